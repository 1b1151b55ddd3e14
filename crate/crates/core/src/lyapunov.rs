//! Weak control Lyapunov functions, the averaged decrease certificate
//! `W = L_{g0}V + γ² Σ L_{[g_i^I, g_j^I]}V`, and sampled sign checks:
//! negative definiteness of `W`, the two-case gain bound built from
//! `α = L_{g0}V` and `β = Σ L_{[g_i^I,g_j^I]}V`, and the supremum test on
//! `∇V·Φ/‖∇V‖²` for synthesized laws.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::controller::{kink_weight, FeedbackLaw};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::sampling::{Region, Sampler};
use crate::scalar::{forward_gradient, Scalar, D1};

/// A scalar function on `Rⁿ`, written once for any [`Scalar`].
pub trait SmoothFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn value<S: Scalar>(&self, x: &[S]) -> S;

    /// Gradient as a covector; defaults to forward-mode differentiation.
    fn gradient<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        forward_gradient(|y| self.value(y), x)
    }
}

/// Object-safe view of [`SmoothFunction`].
pub trait FunctionEval: Send + Sync {
    fn input_dim(&self) -> usize;
    fn value_f64(&self, x: &[f64]) -> f64;
    fn gradient_f64(&self, x: &[f64]) -> Vec<f64>;
    fn gradient_d1(&self, x: &[D1]) -> Vec<D1>;
}

impl<T: SmoothFunction> FunctionEval for T {
    fn input_dim(&self) -> usize {
        self.dim()
    }
    fn value_f64(&self, x: &[f64]) -> f64 {
        self.value(x)
    }
    fn gradient_f64(&self, x: &[f64]) -> Vec<f64> {
        self.gradient(x)
    }
    fn gradient_d1(&self, x: &[D1]) -> Vec<D1> {
        self.gradient(x)
    }
}

/// Positive definite candidate `V` with its gradient.
#[derive(Clone)]
pub struct LyapunovSpec {
    name: String,
    model: Arc<dyn FunctionEval>,
    exponent: Option<f64>,
}

impl fmt::Debug for LyapunovSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LyapunovSpec")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("exponent", &self.exponent)
            .finish()
    }
}

/// Points used to check positivity when a candidate is constructed.
const POSITIVITY_SAMPLES: usize = 512;

impl LyapunovSpec {
    /// Checks `V(0) = 0`, `∇V(0) = 0` and `V > 0` on sampled nonzero points
    /// of the ball of radius `domain_radius`.
    pub fn new<F: SmoothFunction + 'static>(
        name: impl Into<String>,
        function: F,
        domain_radius: f64,
    ) -> Result<Self> {
        let model: Arc<dyn FunctionEval> = Arc::new(function);
        let n = model.input_dim();
        let origin = vec![0.0; n];
        let v0 = model.value_f64(&origin);
        if v0 != 0.0 {
            return Err(Error::InvalidLyapunov(format!("V(0) = {v0}, expected 0")));
        }
        let g0 = model.gradient_f64(&origin);
        if g0.iter().any(|v| *v != 0.0) {
            return Err(Error::InvalidLyapunov(format!(
                "gradient at the origin is {g0:?}"
            )));
        }
        let sampler = Sampler::new(Region::ball(n, domain_radius), 0x5eed)?;
        for i in 0..POSITIVITY_SAMPLES as u64 {
            let x = sampler.point(i);
            let v = model.value_f64(&x);
            if !(v > 0.0) {
                return Err(Error::InvalidLyapunov(format!(
                    "V(x) = {v} <= 0 at x = {x:?}"
                )));
            }
        }
        Ok(LyapunovSpec {
            name: name.into(),
            model,
            exponent: None,
        })
    }

    /// Records the family exponent `p` (informational).
    pub fn with_exponent(mut self, p: f64) -> Self {
        self.exponent = Some(p);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn exponent(&self) -> Option<f64> {
        self.exponent
    }

    pub fn dim(&self) -> usize {
        self.model.input_dim()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.model.value_f64(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.model.gradient_f64(x)
    }

    pub(crate) fn model(&self) -> &dyn FunctionEval {
        self.model.as_ref()
    }
}

/// `W(x)` split into its drift part `α` and bracket part `β`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub w: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Evaluates `α`, `β` and `W = α + γ²β` at `x` for the given gain.
///
/// The bracket terms use the expansion of `[g_i^I, g_j^I]` in the original
/// fields, with the gain products `v_i∇v_j`, `v_j∇v_i` taken as
/// `½·sign(ṽ)²·∇ṽ` so they vanish at kinks (`ṽ = 0`).
pub fn compute_w(law: &FeedbackLaw, x: &[f64], gamma: f64) -> Result<Certificate> {
    let grad_v = law.lyapunov().gradient(x);
    let drift = law.drift(x)?;
    let alpha = dot(&grad_v, &drift);
    let beta: f64 = law
        .averaged_brackets(x)?
        .iter()
        .map(|b| dot(&grad_v, b))
        .sum();
    let w = alpha + gamma * gamma * beta;
    if !(w.is_finite() && alpha.is_finite() && beta.is_finite()) {
        return Err(Error::NonFinite {
            what: "certificate",
            at: x.to_vec(),
        });
    }
    Ok(Certificate { w, alpha, beta })
}

/// Outcome of a sampled sign scan.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DefinitenessReport {
    pub region: Region,
    #[serde(rename = "N")]
    pub samples: usize,
    pub seed: u64,
    pub violations: usize,
    pub worst_value: f64,
    pub worst_point: Vec<f64>,
}

impl DefinitenessReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn reduce_worst(values: &[(f64, usize)]) -> Option<(f64, usize)> {
    // NaN ranks as worst; ties keep the lowest index.
    values.iter().copied().fold(None, |acc, (v, i)| match acc {
        None => Some((v, i)),
        Some((bv, bi)) => {
            let better = if v.is_nan() {
                !bv.is_nan()
            } else {
                !bv.is_nan() && v > bv
            };
            if better {
                Some((v, i))
            } else {
                Some((bv, bi))
            }
        }
    })
}

/// Scans `f` over `samples` points of `region`; a value `≥ 0` (or NaN)
/// counts as a violation of negativity.
pub fn negdef_scan<F>(
    f: F,
    region: &Region,
    samples: usize,
    seed: u64,
) -> Result<DefinitenessReport>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let sampler = Sampler::new(region.clone(), seed)?;
    let values: Vec<(f64, usize)> = (0..samples)
        .into_par_iter()
        .map(|i| (f(&sampler.point(i as u64)), i))
        .collect();
    let violations = values.iter().filter(|(v, _)| !(*v < 0.0)).count();
    let (worst_value, worst_point) = match reduce_worst(&values) {
        Some((v, i)) => (v, sampler.point(i as u64)),
        None => (f64::NEG_INFINITY, Vec::new()),
    };
    Ok(DefinitenessReport {
        region: region.clone(),
        samples,
        seed,
        violations,
        worst_value,
        worst_point,
    })
}

/// Negativity scan of `W` for a law at gain `gamma`; evaluation failures
/// count as violations.
pub fn certificate_scan(
    law: &FeedbackLaw,
    gamma: f64,
    region: &Region,
    samples: usize,
    seed: u64,
) -> Result<DefinitenessReport> {
    negdef_scan(
        |x| compute_w(law, x, gamma).map(|c| c.w).unwrap_or(f64::NAN),
        region,
        samples,
        seed,
    )
}

/// Gain bound from sampled `(α, β)` pairs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GainBound {
    /// `sup(−β/α)` over samples with `|α| > tol_alpha`.
    pub c_ab: f64,
    /// `+∞` when `c_ab ≤ 0`, else `1/√c_ab`.
    pub gamma_max: f64,
    /// Number of samples entering `c_ab`.
    pub admissible: usize,
    pub argmax: Vec<f64>,
    /// Sign check of `β < 0` on samples with `|α| ≤ tol_alpha`.
    pub report: DefinitenessReport,
}

impl GainBound {
    /// True when `γ` is below the bound and the near-`α = 0` check saw no
    /// violations.
    pub fn admits(&self, gamma: f64) -> bool {
        gamma < self.gamma_max && self.report.passed()
    }
}

/// `γ_max` from a given `c_ab`.
pub fn gamma_max_from(c_ab: f64) -> f64 {
    if c_ab <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / c_ab.sqrt()
    }
}

/// Two-case gain bound from any `(α, β)` evaluator.
pub fn gain_bound_from<F>(
    alpha_beta: F,
    region: &Region,
    samples: usize,
    tol_alpha: f64,
    seed: u64,
) -> Result<GainBound>
where
    F: Fn(&[f64]) -> Result<(f64, f64)> + Sync,
{
    if samples == 0 {
        return Err(Error::InvalidArgument(
            "sample count must be positive".into(),
        ));
    }
    if !(tol_alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tol_alpha must be positive, got {tol_alpha}"
        )));
    }
    let sampler = Sampler::new(region.clone(), seed)?;
    let evaluated: Vec<Result<(f64, f64)>> = (0..samples)
        .into_par_iter()
        .map(|i| alpha_beta(&sampler.point(i as u64)))
        .collect();

    let mut ratios = Vec::new();
    let mut near_zero = Vec::new();
    for (i, ab) in evaluated.into_iter().enumerate() {
        let (alpha, beta) = ab?;
        if alpha.abs() > tol_alpha {
            ratios.push((-beta / alpha, i));
        } else {
            near_zero.push((beta, i));
        }
    }
    let Some((c_ab, arg)) = reduce_worst(&ratios) else {
        return Err(Error::NoAdmissibleSamples(format!(
            "no sample with |alpha| > {tol_alpha} among {samples}"
        )));
    };
    let violations = near_zero.iter().filter(|(b, _)| !(*b < 0.0)).count();
    let (worst_value, worst_point) = match reduce_worst(&near_zero) {
        Some((v, i)) => (v, sampler.point(i as u64)),
        None => (f64::NEG_INFINITY, Vec::new()),
    };
    Ok(GainBound {
        c_ab,
        gamma_max: gamma_max_from(c_ab),
        admissible: ratios.len(),
        argmax: sampler.point(arg as u64),
        report: DefinitenessReport {
            region: region.clone(),
            samples: near_zero.len(),
            seed,
            violations,
            worst_value,
            worst_point,
        },
    })
}

/// Gain bound for a law's `α` and `β`.
pub fn certified_gain_bound(
    law: &FeedbackLaw,
    region: &Region,
    samples: usize,
    tol_alpha: f64,
    seed: u64,
) -> Result<GainBound> {
    gain_bound_from(
        |x| compute_w(law, x, 0.0).map(|c| (c.alpha, c.beta)),
        region,
        samples,
        tol_alpha,
        seed,
    )
}

/// `Φ(x, γ)` for a synthesized law: `Σ_I (γ²−1)·ṽ^I f^I + γ²·K_I`, where
/// `K_I` is the gain-gradient part of the bracket expansion. With this
/// definition `W = −‖∇V‖² + ∇V·Φ` holds identically.
pub fn phi_field(law: &FeedbackLaw, x: &[f64], gamma: f64) -> Result<Vec<f64>> {
    let sys = law.system();
    let n = sys.state_dim();
    let (comps, grads) = law.components_with_gradient(x)?;
    let fields = sys.fields(x);
    let g2 = gamma * gamma;
    let mut phi = vec![0.0; n];
    for (idx, pair) in sys.pairs().iter().enumerate() {
        let vt = comps.vtilde[idx];
        let bracket = crate::vecfield::bracket_unchecked(sys, pair.first, pair.second, x);
        let fi = &fields[pair.first];
        let fj = &fields[pair.second];
        let half = 0.5 * kink_weight(vt);
        let di = dot(&grads[idx], fi);
        let dj = dot(&grads[idx], fj);
        for r in 0..n {
            let k = half * (fj[r] * di - fi[r] * dj);
            phi[r] += (g2 - 1.0) * vt * bracket[r] + g2 * k;
        }
    }
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "Phi",
            at: x.to_vec(),
        });
    }
    Ok(phi)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct C1Estimate {
    pub supremum: f64,
    pub argmax: Vec<f64>,
    pub samples: usize,
    /// Points skipped because `‖∇V‖ < 1e-12`.
    pub skipped: usize,
    pub seed: u64,
    pub region: Region,
}

impl C1Estimate {
    pub fn passed(&self) -> bool {
        self.supremum < 1.0
    }
}

const C1_GRAD_FLOOR: f64 = 1e-12;

/// Sampled supremum of `∇V·Φ(x,γ)/‖∇V‖²` for a synthesized law.
pub fn check_c1(
    law: &FeedbackLaw,
    gamma: f64,
    region: &Region,
    samples: usize,
    seed: u64,
) -> Result<C1Estimate> {
    let sampler = Sampler::new(region.clone(), seed)?;
    let lyap = law.lyapunov();
    let values: Vec<Result<Option<f64>>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let x = sampler.point(i as u64);
            let g = lyap.gradient(&x);
            let gn = norm(&g);
            if gn < C1_GRAD_FLOOR {
                return Ok(None);
            }
            let phi = phi_field(law, &x, gamma)?;
            Ok(Some(dot(&g, &phi) / (gn * gn)))
        })
        .collect();
    let mut ratios = Vec::with_capacity(samples);
    let mut skipped = 0;
    for (i, v) in values.into_iter().enumerate() {
        match v? {
            Some(r) => ratios.push((r, i)),
            None => skipped += 1,
        }
    }
    let Some((supremum, arg)) = reduce_worst(&ratios) else {
        return Err(Error::NoAdmissibleSamples(format!(
            "all {samples} points have vanishing gradient"
        )));
    };
    Ok(C1Estimate {
        supremum,
        argmax: sampler.point(arg as u64),
        samples,
        skipped,
        seed,
        region: region.clone(),
    })
}
