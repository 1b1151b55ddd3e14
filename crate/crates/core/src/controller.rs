//! Time-varying oscillatory feedback
//! `u_k = v⁰_k(x) + γ Σ_I v_k^I(x) φ_k^{I,ε}(t)`:
//! non-resonant frequency assignment, the oscillators, synthesis of the
//! components from `F(x)⁻¹∇V`, the square-root split of `ṽ^I`, and the
//! closed-loop fields `g_0`, `g_k^I` and their averaged brackets.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dot, matvec, norm, Lu};
use crate::lyapunov::LyapunovSpec;
use crate::scalar::{seed, sign, Scalar, D1};
use crate::vecfield::{
    bracket_matrix_entries, bracket_unchecked, EvalScalar, IndexPair, VectorFieldSystem,
};

/// Bracket matrices with a larger condition estimate are refused by synthesis.
pub const MAX_CONDITION: f64 = 1e12;
/// Relative residual bound enforced on `F(x)·ṽ = −∇V(x)ᵀ`.
pub const SYNTHESIS_RESIDUAL_TOL: f64 = 1e-10;

/// Channel of an oscillator pair: cosine on `i`, sine on `j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    First,
    Second,
}

/// Integer multipliers `κ_I` with the period `ε`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OscillatorAssignment {
    pairs: Vec<IndexPair>,
    multipliers: Vec<u32>,
    period: f64,
}

/// Default multipliers `1, 2, …, |S|` in pair order.
pub fn assign_frequencies(pairs: &[IndexPair]) -> Result<Vec<u32>> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("pair set is empty".into()));
    }
    Ok((1..=pairs.len() as u32).collect())
}

fn validate_multipliers(multipliers: &[u32], count: usize) -> Result<()> {
    if multipliers.len() != count {
        return Err(Error::Resonance(format!(
            "{} multipliers given for {count} pairs",
            multipliers.len()
        )));
    }
    if let Some(k) = multipliers.iter().find(|&&k| k == 0) {
        return Err(Error::Resonance(format!("multiplier {k} is not positive")));
    }
    for (i, k) in multipliers.iter().enumerate() {
        if multipliers[..i].contains(k) {
            return Err(Error::Resonance(format!(
                "multiplier {k} repeated in {multipliers:?}"
            )));
        }
    }
    Ok(())
}

impl OscillatorAssignment {
    /// Default assignment for `pairs` with period `period`.
    pub fn new(pairs: &[IndexPair], period: f64) -> Result<Self> {
        let multipliers = assign_frequencies(pairs)?;
        Self::with_multipliers(pairs, multipliers, period)
    }

    /// Assignment with explicit multipliers; they must be distinct and positive.
    pub fn with_multipliers(
        pairs: &[IndexPair],
        multipliers: Vec<u32>,
        period: f64,
    ) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidArgument("pair set is empty".into()));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "period must be positive, got {period}"
            )));
        }
        validate_multipliers(&multipliers, pairs.len())?;
        Ok(OscillatorAssignment {
            pairs: pairs.to_vec(),
            multipliers,
            period,
        })
    }

    pub fn pairs(&self) -> &[IndexPair] {
        &self.pairs
    }

    pub fn multipliers(&self) -> &[u32] {
        &self.multipliers
    }

    pub fn multiplier(&self, pair_idx: usize) -> u32 {
        self.multipliers[pair_idx]
    }

    /// `ε`
    pub fn period(&self) -> f64 {
        self.period
    }

    /// `ω = 2π/ε`
    pub fn omega(&self) -> f64 {
        2.0 * PI / self.period
    }

    pub fn max_multiplier(&self) -> u32 {
        self.multipliers.iter().copied().max().unwrap_or(1)
    }

    /// Same multipliers, different period.
    pub fn with_period(&self, period: f64) -> Result<Self> {
        Self::with_multipliers(&self.pairs, self.multipliers.clone(), period)
    }

    pub fn amplitude(&self, pair_idx: usize) -> f64 {
        oscillator_amplitude(self.multipliers[pair_idx], self.period)
    }

    /// `φ` for pair `pair_idx` on the given channel at time `t`.
    pub fn phi(&self, pair_idx: usize, role: Role, t: f64) -> f64 {
        oscillator(self.multipliers[pair_idx], self.period, role, t)
    }
}

/// `2√(κπ/ε)`
pub fn oscillator_amplitude(kappa: u32, period: f64) -> f64 {
    2.0 * (kappa as f64 * PI / period).sqrt()
}

/// `2√(κπ/ε)·cos(κωt)` (first) or `·sin(κωt)` (second).
pub fn oscillator(kappa: u32, period: f64, role: Role, t: f64) -> f64 {
    let arg = kappa as f64 * 2.0 * PI / period * t;
    let a = oscillator_amplitude(kappa, period);
    match role {
        Role::First => a * arg.cos(),
        Role::Second => a * arg.sin(),
    }
}

/// Free-function form of [`OscillatorAssignment::phi`].
pub fn phi(assignment: &OscillatorAssignment, pair_idx: usize, role: Role, t: f64) -> f64 {
    assignment.phi(pair_idx, role, t)
}

/// `(√|ṽ|, √|ṽ|·sign ṽ)` with `sign(0) = 0`.
pub fn split_vi(vtilde: f64) -> (f64, f64) {
    let r = vtilde.abs().sqrt();
    (r, r * sign(vtilde))
}

/// `sign(ṽ)²`: 1 away from the kink set, 0 on it.
pub(crate) fn kink_weight(vtilde: f64) -> f64 {
    let s = sign(vtilde);
    s * s
}

/// User-supplied closed-form law components, written once for any scalar.
pub trait LawComponents: Send + Sync {
    /// `v⁰(x) ∈ Rᵐ`
    fn v0<S: Scalar>(&self, x: &[S]) -> Vec<S>;
    /// `ṽ^I(x)` in pair order.
    fn vtilde<S: Scalar>(&self, x: &[S]) -> Vec<S>;
}

/// Object-safe view of [`LawComponents`].
pub trait ComponentEval: Send + Sync {
    fn v0_f64(&self, x: &[f64]) -> Vec<f64>;
    fn vtilde_f64(&self, x: &[f64]) -> Vec<f64>;
    fn vtilde_d1(&self, x: &[D1]) -> Vec<D1>;
}

impl<T: LawComponents> ComponentEval for T {
    fn v0_f64(&self, x: &[f64]) -> Vec<f64> {
        self.v0(x)
    }
    fn vtilde_f64(&self, x: &[f64]) -> Vec<f64> {
        self.vtilde(x)
    }
    fn vtilde_d1(&self, x: &[D1]) -> Vec<D1> {
        self.vtilde(x)
    }
}

/// Result of solving `F(x)·ṽ = −∇V(x)ᵀ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Synthesis {
    pub v0: Vec<f64>,
    pub vtilde: Vec<f64>,
    pub condition: f64,
    pub residual: f64,
}

fn synthesize_stacked<S: EvalScalar>(
    sys: &VectorFieldSystem,
    lyap: &LyapunovSpec,
    x: &[S],
) -> Result<(Vec<S>, Vec<S>, Vec<S>)> {
    let n = sys.state_dim();
    let f = bracket_matrix_entries(sys, x);
    let grad = S::gradient(lyap.model(), x);
    let rhs: Vec<S> = grad.iter().map(|g| -*g).collect();
    let lu = Lu::factor(&f, n).map_err(|_| Error::IllConditioned {
        condition: f64::INFINITY,
    })?;
    Ok((lu.solve(&rhs), f, rhs))
}

/// Stacked `(v⁰, ṽ) = −F(x)⁻¹∇V(x)ᵀ` with conditioning and residual checks.
pub fn synthesize_gains(
    sys: &VectorFieldSystem,
    lyap: &LyapunovSpec,
    x: &[f64],
) -> Result<Synthesis> {
    let n = sys.state_dim();
    let m = sys.input_dim();
    let (sol, f, rhs) = synthesize_stacked(sys, lyap, x)?;
    let condition = crate::linalg::condition_number(&f, n);
    if !(condition < MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    let back = matvec(&f, &sol);
    let residual = norm(
        &back
            .iter()
            .zip(&rhs)
            .map(|(a, b)| a - b)
            .collect::<Vec<_>>(),
    );
    let bound = SYNTHESIS_RESIDUAL_TOL * norm(&rhs);
    if !(residual <= bound) {
        return Err(Error::SynthesisResidual { residual, bound });
    }
    Ok(Synthesis {
        v0: sol[..m].to_vec(),
        vtilde: sol[m..].to_vec(),
        condition,
        residual,
    })
}

#[derive(Clone)]
enum ComponentSource {
    Synthesized,
    Supplied(Arc<dyn ComponentEval>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LawMode {
    Synthesized,
    Supplied,
}

/// `v⁰(x)` and `ṽ(x)` at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct Components {
    pub v0: Vec<f64>,
    pub vtilde: Vec<f64>,
}

/// Components with the split gains `(v_i^I, v_j^I)` per pair, i.e. all the
/// state-dependent data the input needs.
#[derive(Clone, Debug, PartialEq)]
pub struct FrozenGains {
    pub v0: Vec<f64>,
    pub split: Vec<(f64, f64)>,
}

/// The synthesized controller. Immutable; cloning is cheap.
#[derive(Clone)]
pub struct FeedbackLaw {
    system: VectorFieldSystem,
    lyapunov: LyapunovSpec,
    gain: f64,
    oscillators: OscillatorAssignment,
    source: ComponentSource,
}

impl fmt::Debug for FeedbackLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FeedbackLaw")
            .field("system", &self.system.name())
            .field("lyapunov", &self.lyapunov.name())
            .field("gain", &self.gain)
            .field("oscillators", &self.oscillators)
            .field("mode", &self.mode())
            .finish()
    }
}

impl FeedbackLaw {
    fn build(
        system: VectorFieldSystem,
        lyapunov: LyapunovSpec,
        gain: f64,
        oscillators: OscillatorAssignment,
        source: ComponentSource,
    ) -> Result<Self> {
        if !(gain >= 0.0 && gain.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "gain must be non-negative, got {gain}"
            )));
        }
        if oscillators.pairs() != system.pairs() {
            return Err(Error::InvalidArgument(
                "oscillator pairs differ from the system pair set".into(),
            ));
        }
        if lyapunov.dim() != system.state_dim() {
            return Err(Error::InvalidArgument(format!(
                "Lyapunov candidate has dimension {}, system has {}",
                lyapunov.dim(),
                system.state_dim()
            )));
        }
        Ok(FeedbackLaw {
            system,
            lyapunov,
            gain,
            oscillators,
            source,
        })
    }

    /// Law whose components come from `−F(x)⁻¹∇V(x)ᵀ` at every evaluation.
    pub fn synthesized(
        system: VectorFieldSystem,
        lyapunov: LyapunovSpec,
        gain: f64,
        oscillators: OscillatorAssignment,
    ) -> Result<Self> {
        Self::build(
            system,
            lyapunov,
            gain,
            oscillators,
            ComponentSource::Synthesized,
        )
    }

    /// Law with closed-form components.
    pub fn supplied<C: LawComponents + 'static>(
        system: VectorFieldSystem,
        lyapunov: LyapunovSpec,
        gain: f64,
        oscillators: OscillatorAssignment,
        components: C,
    ) -> Result<Self> {
        Self::build(
            system,
            lyapunov,
            gain,
            oscillators,
            ComponentSource::Supplied(Arc::new(components)),
        )
    }

    pub fn system(&self) -> &VectorFieldSystem {
        &self.system
    }

    pub fn lyapunov(&self) -> &LyapunovSpec {
        &self.lyapunov
    }

    /// `γ`
    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn oscillators(&self) -> &OscillatorAssignment {
        &self.oscillators
    }

    /// `ε`
    pub fn period(&self) -> f64 {
        self.oscillators.period()
    }

    pub fn mode(&self) -> LawMode {
        match self.source {
            ComponentSource::Synthesized => LawMode::Synthesized,
            ComponentSource::Supplied(_) => LawMode::Supplied,
        }
    }

    /// Same law with a different period (oscillator amplitudes follow).
    pub fn with_period(&self, period: f64) -> Result<Self> {
        let mut law = self.clone();
        law.oscillators = self.oscillators.with_period(period)?;
        Ok(law)
    }

    pub fn with_gain(&self, gain: f64) -> Result<Self> {
        Self::build(
            self.system.clone(),
            self.lyapunov.clone(),
            gain,
            self.oscillators.clone(),
            self.source.clone(),
        )
    }

    fn vtilde_s<S: EvalScalar>(&self, x: &[S]) -> Result<Vec<S>> {
        match &self.source {
            ComponentSource::Supplied(c) => Ok(S::vtilde(c.as_ref(), x)),
            ComponentSource::Synthesized => {
                let m = self.system.input_dim();
                let (sol, _, _) = synthesize_stacked(&self.system, &self.lyapunov, x)?;
                Ok(sol[m..].to_vec())
            }
        }
    }

    /// `v⁰(x)` and `ṽ(x)`.
    pub fn components(&self, x: &[f64]) -> Result<Components> {
        let comps = match &self.source {
            ComponentSource::Supplied(c) => Components {
                v0: c.v0_f64(x),
                vtilde: c.vtilde_f64(x),
            },
            ComponentSource::Synthesized => {
                let s = synthesize_gains(&self.system, &self.lyapunov, x)?;
                Components {
                    v0: s.v0,
                    vtilde: s.vtilde,
                }
            }
        };
        if comps.v0.len() != self.system.input_dim()
            || comps.vtilde.len() != self.system.pairs().len()
        {
            return Err(Error::InvalidArgument(
                "law components have the wrong length".into(),
            ));
        }
        Ok(comps)
    }

    /// Components plus `∇ṽ^I(x)` for every pair (forward mode, one sweep per
    /// coordinate).
    pub fn components_with_gradient(&self, x: &[f64]) -> Result<(Components, Vec<Vec<f64>>)> {
        let comps = self.components(x)?;
        let n = x.len();
        let pairs = self.system.pairs().len();
        let mut grads = vec![vec![0.0; n]; pairs];
        for d in 0..n {
            let xd = seed(x, d);
            let vt = self.vtilde_s::<D1>(&xd)?;
            for (idx, v) in vt.iter().enumerate() {
                grads[idx][d] = v.eps;
            }
        }
        Ok((comps, grads))
    }

    /// Split gains for every pair, checking for non-finite values.
    pub fn frozen_gains(&self, x: &[f64]) -> Result<FrozenGains> {
        let comps = self.components(x)?;
        let mut split = Vec::with_capacity(comps.vtilde.len());
        for (idx, vt) in comps.vtilde.iter().enumerate() {
            let s = split_vi(*vt);
            if !(s.0.is_finite() && s.1.is_finite()) {
                return Err(Error::PairEvaluation {
                    pair: self.system.pairs()[idx],
                    detail: format!("non-finite component vtilde = {vt}"),
                });
            }
            split.push(s);
        }
        if comps.v0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "v0",
                at: x.to_vec(),
            });
        }
        Ok(FrozenGains {
            v0: comps.v0,
            split,
        })
    }

    /// Input for already-evaluated gains at time `t`.
    pub fn input_from(&self, gains: &FrozenGains, t: f64) -> Vec<f64> {
        let mut u = gains.v0.clone();
        if self.gain == 0.0 {
            return u;
        }
        for (idx, pair) in self.system.pairs().iter().enumerate() {
            let (vi, vj) = gains.split[idx];
            u[pair.first] += self.gain * vi * self.oscillators.phi(idx, Role::First, t);
            u[pair.second] += self.gain * vj * self.oscillators.phi(idx, Role::Second, t);
        }
        u
    }

    /// `u(x, t)`
    pub fn feedback_eval(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        Ok(self.input_from(&self.frozen_gains(x)?, t))
    }

    /// `g_0(x) = Σ v⁰_k f_k(x)`
    pub fn drift(&self, x: &[f64]) -> Result<Vec<f64>> {
        let comps = self.components(x)?;
        Ok(combine(&self.system.fields(x), &comps.v0))
    }

    /// `[g_i^I, g_j^I](x)` for every pair, expanded as
    /// `v_i v_j f^I + v_i f_j (∇v_j·f_i) − v_j f_i (∇v_i·f_j)` with both gain
    /// products equal to `½ sign(ṽ)² ∇ṽ`.
    pub fn averaged_brackets(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let (comps, grads) = self.components_with_gradient(x)?;
        let fields = self.system.fields(x);
        let n = x.len();
        let mut out = Vec::with_capacity(comps.vtilde.len());
        for (idx, pair) in self.system.pairs().iter().enumerate() {
            let vt = comps.vtilde[idx];
            let (vi, vj) = split_vi(vt);
            let fi = &fields[pair.first];
            let fj = &fields[pair.second];
            let bracket = bracket_unchecked(&self.system, pair.first, pair.second, x);
            let half = 0.5 * kink_weight(vt);
            let di = half * dot(&grads[idx], fi);
            let dj = half * dot(&grads[idx], fj);
            let col: Vec<f64> = (0..n)
                .map(|r| vi * vj * bracket[r] + fj[r] * di - fi[r] * dj)
                .collect();
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::PairEvaluation {
                    pair: *pair,
                    detail: format!("non-finite bracket at x = {x:?}"),
                });
            }
            out.push(col);
        }
        Ok(out)
    }
}

/// `Σ_k u_k f_k`
pub(crate) fn combine(fields: &[Vec<f64>], u: &[f64]) -> Vec<f64> {
    let n = fields.first().map_or(0, Vec::len);
    let mut out = vec![0.0; n];
    for (f, uk) in fields.iter().zip(u) {
        if *uk == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(f) {
            *o += uk * v;
        }
    }
    out
}

/// Free-function form of [`FeedbackLaw::feedback_eval`].
pub fn feedback_eval(law: &FeedbackLaw, x: &[f64], t: f64) -> Result<Vec<f64>> {
    law.feedback_eval(x, t)
}
