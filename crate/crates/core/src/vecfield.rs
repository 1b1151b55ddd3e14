//! Driftless control-affine systems `ẋ = Σ u_k f_k(x)`: field evaluation,
//! Jacobians, Lie brackets, the bracket matrix `F(x)` and the
//! bracket-generating rank test.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::controller::ComponentEval;
use crate::error::{Error, Result};
use crate::linalg::{self, condition_number, singular_values};
use crate::lyapunov::FunctionEval;
use crate::scalar::{forward_jacobian, Scalar, D1};

/// Default relative singular-value threshold for the rank test.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// A family of smooth vector fields `f_0 … f_{m-1}` on `Rⁿ`, written once
/// for any [`Scalar`].
///
/// `jacobian` defaults to forward-mode differentiation of `field`; systems
/// with closed-form Jacobians should override it.
pub trait SmoothFields: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;

    /// Value of field `k` at `x`.
    fn field<S: Scalar>(&self, k: usize, x: &[S]) -> Vec<S>;

    /// Row-major `n × n` Jacobian `∂f_k/∂x` at `x`.
    fn jacobian<S: Scalar>(&self, k: usize, x: &[S]) -> Vec<S> {
        forward_jacobian(|y| self.field(k, y), x)
    }
}

/// Object-safe view of [`SmoothFields`] at the scalar types the crate uses.
pub trait FieldEval: Send + Sync {
    fn dims(&self) -> (usize, usize);
    fn field_f64(&self, k: usize, x: &[f64]) -> Vec<f64>;
    fn field_d1(&self, k: usize, x: &[D1]) -> Vec<D1>;
    fn jacobian_f64(&self, k: usize, x: &[f64]) -> Vec<f64>;
    fn jacobian_d1(&self, k: usize, x: &[D1]) -> Vec<D1>;
}

impl<T: SmoothFields> FieldEval for T {
    fn dims(&self) -> (usize, usize) {
        (self.state_dim(), self.input_dim())
    }
    fn field_f64(&self, k: usize, x: &[f64]) -> Vec<f64> {
        self.field(k, x)
    }
    fn field_d1(&self, k: usize, x: &[D1]) -> Vec<D1> {
        self.field(k, x)
    }
    fn jacobian_f64(&self, k: usize, x: &[f64]) -> Vec<f64> {
        self.jacobian(k, x)
    }
    fn jacobian_d1(&self, k: usize, x: &[D1]) -> Vec<D1> {
        self.jacobian(k, x)
    }
}

mod sealed {
    pub trait Sealed {}
    impl Sealed for f64 {}
    impl Sealed for crate::scalar::D1 {}
}

/// Scalars at which a type-erased system can be evaluated: `f64` for values
/// and `D1` for one extra directional derivative.
pub trait EvalScalar: Scalar + sealed::Sealed {
    fn field(model: &dyn FieldEval, k: usize, x: &[Self]) -> Vec<Self>;
    fn jacobian(model: &dyn FieldEval, k: usize, x: &[Self]) -> Vec<Self>;
    fn gradient(model: &dyn FunctionEval, x: &[Self]) -> Vec<Self>;
    fn vtilde(model: &dyn ComponentEval, x: &[Self]) -> Vec<Self>;
}

impl EvalScalar for f64 {
    fn field(model: &dyn FieldEval, k: usize, x: &[f64]) -> Vec<f64> {
        model.field_f64(k, x)
    }
    fn jacobian(model: &dyn FieldEval, k: usize, x: &[f64]) -> Vec<f64> {
        model.jacobian_f64(k, x)
    }
    fn gradient(model: &dyn FunctionEval, x: &[f64]) -> Vec<f64> {
        model.gradient_f64(x)
    }
    fn vtilde(model: &dyn ComponentEval, x: &[f64]) -> Vec<f64> {
        model.vtilde_f64(x)
    }
}

impl EvalScalar for D1 {
    fn field(model: &dyn FieldEval, k: usize, x: &[D1]) -> Vec<D1> {
        model.field_d1(k, x)
    }
    fn jacobian(model: &dyn FieldEval, k: usize, x: &[D1]) -> Vec<D1> {
        model.jacobian_d1(k, x)
    }
    fn gradient(model: &dyn FunctionEval, x: &[D1]) -> Vec<D1> {
        model.gradient_d1(x)
    }
    fn vtilde(model: &dyn ComponentEval, x: &[D1]) -> Vec<D1> {
        model.vtilde_d1(x)
    }
}

/// Ordered input pair `I = (i j)` with `i < j`, zero-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndexPair {
    pub first: usize,
    pub second: usize,
}

impl IndexPair {
    pub fn new(first: usize, second: usize) -> Self {
        IndexPair { first, second }
    }

    /// Pair from the one-based labels used in the literature, e.g. `(1, 2)`.
    pub fn one_based(first: usize, second: usize) -> Self {
        IndexPair {
            first: first - 1,
            second: second - 1,
        }
    }

    pub fn contains(&self, k: usize) -> bool {
        self.first == k || self.second == k
    }
}

impl fmt::Display for IndexPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, b) = (self.first + 1, self.second + 1);
        if a < 10 && b < 10 {
            write!(f, "({a}{b})")
        } else {
            write!(f, "({a},{b})")
        }
    }
}

/// A driftless system together with its ordered pair set `S`.
///
/// Immutable once built; cloning shares the underlying evaluators.
#[derive(Clone)]
pub struct VectorFieldSystem {
    name: String,
    state_dim: usize,
    input_dim: usize,
    model: Arc<dyn FieldEval>,
    pairs: Vec<IndexPair>,
}

impl fmt::Debug for VectorFieldSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorFieldSystem")
            .field("name", &self.name)
            .field("state_dim", &self.state_dim)
            .field("input_dim", &self.input_dim)
            .field("pairs", &self.pairs)
            .finish()
    }
}

impl VectorFieldSystem {
    pub fn new<F: SmoothFields + 'static>(
        name: impl Into<String>,
        fields: F,
        pairs: Vec<IndexPair>,
    ) -> Result<Self> {
        Self::from_eval(name, Arc::new(fields), pairs)
    }

    pub fn from_eval(
        name: impl Into<String>,
        model: Arc<dyn FieldEval>,
        pairs: Vec<IndexPair>,
    ) -> Result<Self> {
        let (n, m) = model.dims();
        if m < 2 {
            return Err(Error::InvalidSystem(format!(
                "need at least two inputs to form a bracket, got m = {m}"
            )));
        }
        if m >= n {
            return Err(Error::InvalidSystem(format!(
                "need m < n, got m = {m}, n = {n}"
            )));
        }
        if pairs.len() != n - m {
            return Err(Error::InvalidSystem(format!(
                "pair set has {} entries, expected n - m = {}",
                pairs.len(),
                n - m
            )));
        }
        for (idx, p) in pairs.iter().enumerate() {
            if p.first >= p.second || p.second >= m {
                return Err(Error::InvalidSystem(format!(
                    "pair {p} must satisfy 1 <= i < j <= {m}"
                )));
            }
            if pairs[..idx].contains(p) {
                return Err(Error::InvalidSystem(format!("pair {p} listed twice")));
            }
        }
        let origin = vec![0.0; n];
        let mut cols = vec![0.0; n * m];
        for k in 0..m {
            let f = model.field_f64(k, &origin);
            if f.len() != n {
                return Err(Error::InvalidSystem(format!(
                    "field {} returned {} components, expected {n}",
                    k + 1,
                    f.len()
                )));
            }
            for r in 0..n {
                cols[r * m + k] = f[r];
            }
        }
        let sv = singular_values(&cols, n, m);
        let largest = sv.first().copied().unwrap_or(0.0);
        let smallest = sv.last().copied().unwrap_or(0.0);
        if !(largest > 0.0) || smallest <= DEFAULT_RANK_TOL * largest {
            return Err(Error::InvalidSystem(format!(
                "fields at the origin have rank < {m} (smallest singular value {smallest:e})"
            )));
        }
        Ok(VectorFieldSystem {
            name: name.into(),
            state_dim: n,
            input_dim: m,
            model,
            pairs,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// `n`
    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    /// `m`
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// The ordered pair set `S`.
    pub fn pairs(&self) -> &[IndexPair] {
        &self.pairs
    }

    pub fn field(&self, k: usize, x: &[f64]) -> Vec<f64> {
        self.model.field_f64(k, x)
    }

    pub fn jacobian(&self, k: usize, x: &[f64]) -> Vec<f64> {
        self.model.jacobian_f64(k, x)
    }

    pub(crate) fn field_s<S: EvalScalar>(&self, k: usize, x: &[S]) -> Vec<S> {
        S::field(self.model.as_ref(), k, x)
    }

    pub(crate) fn jacobian_s<S: EvalScalar>(&self, k: usize, x: &[S]) -> Vec<S> {
        S::jacobian(self.model.as_ref(), k, x)
    }

    /// All `m` fields at `x`.
    pub fn fields<S: EvalScalar>(&self, x: &[S]) -> Vec<Vec<S>> {
        (0..self.input_dim).map(|k| self.field_s(k, x)).collect()
    }

    fn check_index(&self, k: usize) -> Result<()> {
        if k >= self.input_dim {
            Err(Error::IndexOutOfRange {
                index: k,
                inputs: self.input_dim,
            })
        } else {
            Ok(())
        }
    }
}

/// `[f_i, f_j] = Df_j·f_i − Df_i·f_j` without validation.
pub(crate) fn bracket_unchecked<S: EvalScalar>(
    sys: &VectorFieldSystem,
    i: usize,
    j: usize,
    x: &[S],
) -> Vec<S> {
    let fi = sys.field_s(i, x);
    let fj = sys.field_s(j, x);
    let dfi = sys.jacobian_s(i, x);
    let dfj = sys.jacobian_s(j, x);
    let a = linalg::matvec(&dfj, &fi);
    let b = linalg::matvec(&dfi, &fj);
    a.into_iter().zip(b).map(|(p, q)| p - q).collect()
}

/// Lie bracket of fields `i` and `j` (zero-based) at `x`.
pub fn lie_bracket(sys: &VectorFieldSystem, i: usize, j: usize, x: &[f64]) -> Result<Vec<f64>> {
    sys.check_index(i)?;
    sys.check_index(j)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "state",
            at: x.to_vec(),
        });
    }
    for k in [i, j] {
        if sys.jacobian(k, x).iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "Jacobian entry",
                at: x.to_vec(),
            });
        }
    }
    Ok(bracket_unchecked(sys, i, j, x))
}

/// Row-major `F(x)` with columns `(f_1, …, f_m, f^{I_1}, …, f^{I_{n−m}})`.
pub(crate) fn bracket_matrix_entries<S: EvalScalar>(sys: &VectorFieldSystem, x: &[S]) -> Vec<S> {
    let n = sys.state_dim();
    let m = sys.input_dim();
    let mut out = vec![S::zero(); n * n];
    let mut put = |c: usize, col: Vec<S>| {
        for (r, v) in col.into_iter().enumerate() {
            out[r * n + c] = v;
        }
    };
    for k in 0..m {
        put(k, sys.field_s(k, x));
    }
    for (idx, p) in sys.pairs().iter().enumerate() {
        put(m + idx, bracket_unchecked(sys, p.first, p.second, x));
    }
    out
}

/// The square matrix of fields and brackets at a point.
#[derive(Clone, Debug)]
pub struct BracketMatrix {
    pub x: Vec<f64>,
    /// Row-major `n × n`.
    pub entries: Vec<f64>,
    pub dim: usize,
    /// 1-norm condition estimate; `+∞` when singular.
    pub condition: f64,
}

impl BracketMatrix {
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.dim + c]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.dim).map(|r| self.get(r, c)).collect()
    }

    pub fn is_singular(&self) -> bool {
        !self.condition.is_finite()
    }
}

pub fn assemble_f(sys: &VectorFieldSystem, x: &[f64]) -> BracketMatrix {
    let n = sys.state_dim();
    let entries = bracket_matrix_entries(sys, x);
    let condition = if entries.iter().all(|v| v.is_finite()) {
        condition_number(&entries, n)
    } else {
        f64::INFINITY
    };
    BracketMatrix {
        x: x.to_vec(),
        entries,
        dim: n,
        condition,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RankVerdict {
    pub generating: bool,
    pub smallest_singular_value: f64,
    pub largest_singular_value: f64,
}

/// Bracket-generating test at `x`: every singular value of `F(x)` must
/// exceed `tol` times the largest one.
pub fn bracket_generating_check(
    sys: &VectorFieldSystem,
    x: &[f64],
    tol: f64,
) -> Result<RankVerdict> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "rank tolerance must lie in (0,1), got {tol}"
        )));
    }
    let n = sys.state_dim();
    let entries = bracket_matrix_entries(sys, x);
    if entries.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "bracket matrix entry",
            at: x.to_vec(),
        });
    }
    let sv = singular_values(&entries, n, n);
    let largest = sv[0];
    let smallest = sv[n - 1];
    Ok(RankVerdict {
        generating: largest > 0.0 && smallest > tol * largest,
        smallest_singular_value: smallest,
        largest_singular_value: largest,
    })
}
