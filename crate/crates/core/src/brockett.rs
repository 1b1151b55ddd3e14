//! The ten-dimensional nilpotent Brockett integrator with four inputs, its
//! CLF family `V = ½Σ_{k≤4} x_k² + 1/(2p) Σ_{c≥5} |x_c|^{2p}`, the
//! closed-form law components and certificate, and the admissible gain
//! intervals.

use serde::{Deserialize, Serialize};

use crate::controller::{FeedbackLaw, LawComponents, OscillatorAssignment};
use crate::error::{Error, Result};
use crate::lyapunov::{LyapunovSpec, SmoothFunction};
use crate::scalar::{sign, Scalar};
use crate::vecfield::{IndexPair, SmoothFields, VectorFieldSystem};

pub const SYSTEM_NAME: &str = "brockett10";
pub const STATE_DIM: usize = 10;
pub const INPUT_DIM: usize = 4;

/// Pair order `(12),(13),(14),(23),(24),(34)`; the bracket of pair `idx`
/// is `2e_{5+idx}` (one-based).
pub const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// `(row, column, value)` nonzeros of each constant Jacobian `Df_k`.
const JACOBIAN_ENTRIES: [[(usize, usize, f64); 3]; 4] = [
    [(4, 1, -1.0), (5, 2, -1.0), (6, 3, -1.0)],
    [(4, 0, 1.0), (7, 2, -1.0), (8, 3, -1.0)],
    [(5, 0, 1.0), (7, 1, 1.0), (9, 3, -1.0)],
    [(6, 0, 1.0), (8, 1, 1.0), (9, 2, 1.0)],
];

/// Index of the state coordinate driven by the bracket of pair `idx`.
pub fn bracket_coordinate(pair_idx: usize) -> usize {
    INPUT_DIM + pair_idx
}

pub fn pair_set() -> Vec<IndexPair> {
    PAIRS.iter().map(|&(i, j)| IndexPair::new(i, j)).collect()
}

/// The four input fields.
#[derive(Clone, Copy, Debug, Default)]
pub struct BrockettFields;

impl SmoothFields for BrockettFields {
    fn state_dim(&self) -> usize {
        STATE_DIM
    }

    fn input_dim(&self) -> usize {
        INPUT_DIM
    }

    fn field<S: Scalar>(&self, k: usize, x: &[S]) -> Vec<S> {
        let mut f = vec![S::zero(); STATE_DIM];
        f[k] = S::one();
        for &(r, c, v) in &JACOBIAN_ENTRIES[k] {
            f[r] = x[c].scale(v);
        }
        f
    }

    fn jacobian<S: Scalar>(&self, k: usize, _x: &[S]) -> Vec<S> {
        let mut j = vec![S::zero(); STATE_DIM * STATE_DIM];
        for &(r, c, v) in &JACOBIAN_ENTRIES[k] {
            j[r * STATE_DIM + c] = S::from_f64(v);
        }
        j
    }
}

pub fn brockett_system() -> VectorFieldSystem {
    VectorFieldSystem::new(SYSTEM_NAME, BrockettFields, pair_set())
        .expect("the Brockett integrator satisfies the construction checks")
}

/// `V(x) = ½Σ_{k<4} x_k² + 1/(2p) Σ_{c≥4} |x_c|^{2p}` (zero-based).
#[derive(Clone, Copy, Debug)]
pub struct BrockettLyapunov {
    pub p: f64,
}

impl SmoothFunction for BrockettLyapunov {
    fn dim(&self) -> usize {
        STATE_DIM
    }

    fn value<S: Scalar>(&self, x: &[S]) -> S {
        let mut acc = S::zero();
        for v in &x[..INPUT_DIM] {
            acc += (*v * *v).scale(0.5);
        }
        for v in &x[INPUT_DIM..] {
            acc += v.abs().powf(2.0 * self.p).scale(0.5 / self.p);
        }
        acc
    }

    fn gradient<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let mut g = x.to_vec();
        for v in g.iter_mut().skip(INPUT_DIM) {
            *v = *v * v.abs().powf(2.0 * self.p - 2.0);
        }
        g
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "exponent p must be >= 1, got {p}"
        )));
    }
    Ok(())
}

pub fn brockett_lyapunov(p: f64) -> Result<LyapunovSpec> {
    check_exponent(p)?;
    Ok(LyapunovSpec::new(format!("brockett-p{p}"), BrockettLyapunov { p }, 1.0)?.with_exponent(p))
}

/// Closed-form components: `v⁰_k = −x_k` and
/// `ṽ^I = −½ sign(x_c)|x_c|^{2p−1}` with `c` the bracket coordinate of `I`.
#[derive(Clone, Copy, Debug)]
pub struct BrockettComponents {
    pub p: f64,
}

impl LawComponents for BrockettComponents {
    fn v0<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        x[..INPUT_DIM].iter().map(|v| -*v).collect()
    }

    fn vtilde<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        x[INPUT_DIM..]
            .iter()
            .map(|v| (v.sign() * v.abs().powf(2.0 * self.p - 1.0)).scale(-0.5))
            .collect()
    }
}

/// The six `ṽ^I` values in pair order.
pub fn brockett_vi(p: f64, x: &[f64]) -> [f64; 6] {
    let mut out = [0.0; 6];
    for (idx, o) in out.iter_mut().enumerate() {
        let v = x[bracket_coordinate(idx)];
        *o = -0.5 * sign(v) * v.abs().powf(2.0 * p - 1.0);
    }
    out
}

/// Closed-form certificate value and whether `x` sits on a kink.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BrockettCertificate {
    pub value: f64,
    /// Some bracket coordinate is exactly zero while `p ≤ 3/2`.
    pub kink: bool,
}

/// `∂V/∂x_r`
fn dv(p: f64, x: &[f64], r: usize) -> f64 {
    if r < INPUT_DIM {
        x[r]
    } else {
        sign(x[r]) * x[r].abs().powf(2.0 * p - 1.0)
    }
}

/// `L_{f_k}V(x)`
fn lie_derivative(p: f64, x: &[f64], k: usize) -> f64 {
    let mut acc = x[k];
    for &(r, c, v) in &JACOBIAN_ENTRIES[k] {
        acc += v * x[c] * dv(p, x, r);
    }
    acc
}

/// `f_k(x)` entry in row `r` (only rows ≥ 4 are needed here).
fn field_entry(x: &[f64], k: usize, r: usize) -> f64 {
    JACOBIAN_ENTRIES[k]
        .iter()
        .find(|e| e.0 == r)
        .map_or(0.0, |&(_, c, v)| v * x[c])
}

/// The gradient-term sum
/// `Σ_I sign(x_c)²|x_c|^{2p−2} (f_j[c]·L_{f_i}V − f_i[c]·L_{f_j}V)`.
pub fn brockett_phi(p: f64, x: &[f64]) -> f64 {
    let lf: Vec<f64> = (0..INPUT_DIM).map(|k| lie_derivative(p, x, k)).collect();
    PAIRS
        .iter()
        .enumerate()
        .map(|(idx, &(i, j))| {
            let c = bracket_coordinate(idx);
            let s = sign(x[c]);
            let weight = s * s * x[c].abs().powf(2.0 * p - 2.0);
            weight * (field_entry(x, j, c) * lf[i] - field_entry(x, i, c) * lf[j])
        })
        .sum()
}

/// `W = −Σ_{k<4} x_k² − γ² Σ_c |x_c|^{4p−2} + ((2p−1)γ²/4)·Φ(x)`.
pub fn brockett_w(p: f64, gamma: f64, x: &[f64]) -> BrockettCertificate {
    let head: f64 = x[..INPUT_DIM].iter().map(|v| v * v).sum();
    let tail: f64 = x[INPUT_DIM..]
        .iter()
        .map(|v| v.abs().powf(4.0 * p - 2.0))
        .sum();
    let g2 = gamma * gamma;
    let value = -head - g2 * tail + (2.0 * p - 1.0) * g2 / 4.0 * brockett_phi(p, x);
    let kink = p <= 1.5 && x[INPUT_DIM..].contains(&0.0);
    BrockettCertificate { value, kink }
}

/// Open gain interval `(lower, upper)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GainInterval {
    pub lower: f64,
    pub upper: f64,
    /// True when the interval holds on all of `R¹⁰`.
    pub global: bool,
}

impl GainInterval {
    pub fn contains(&self, gamma: f64) -> bool {
        gamma > self.lower && gamma < self.upper
    }
}

/// `p = 1`: `(0, √2)` globally; `p > 1`: `(0, 2/√((2p−1)H^{2p−1}(1+H)))` on
/// `‖x̃‖ < H`.
///
/// The `p = 1` interval is the quoted one, not a verified one: off the kink
/// set and close to `x̃ = 0` the certificate is `≈ −‖x_head‖²(1 − 3γ²/4)`,
/// positive for `γ > 2/√3`.
pub fn stability_gain_range(p: f64, h: f64) -> Result<GainInterval> {
    check_exponent(p)?;
    if p == 1.0 {
        return Ok(GainInterval {
            lower: 0.0,
            upper: 2f64.sqrt(),
            global: true,
        });
    }
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "domain radius H must be positive, got {h}"
        )));
    }
    let upper = 2.0 / ((2.0 * p - 1.0) * h.powf(2.0 * p - 1.0) * (1.0 + h)).sqrt();
    Ok(GainInterval {
        lower: 0.0,
        upper,
        global: false,
    })
}

/// Named initial conditions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "fig1-left")]
    Fig1Left,
    #[serde(rename = "fig1-right")]
    Fig1Right,
}

impl Preset {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "fig1-left" => Some(Preset::Fig1Left),
            "fig1-right" => Some(Preset::Fig1Right),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Fig1Left => "fig1-left",
            Preset::Fig1Right => "fig1-right",
        }
    }

    pub fn initial_state(&self) -> Vec<f64> {
        match self {
            Preset::Fig1Left => vec![1.0, -1.0, 1.5, -0.5, 2.0, -2.0, 2.5, -2.5, 3.0, -3.0],
            Preset::Fig1Right => (0..STATE_DIM)
                .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
                .collect(),
        }
    }

    pub fn exponent(&self) -> f64 {
        match self {
            Preset::Fig1Left => 1.0,
            Preset::Fig1Right => 1.5,
        }
    }

    pub fn config(&self) -> BrockettConfig {
        BrockettConfig {
            p: self.exponent(),
            x0: self.initial_state(),
            ..BrockettConfig::default()
        }
    }
}

/// Case-study parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrockettConfig {
    pub p: f64,
    pub gamma: f64,
    pub eps: f64,
    #[serde(rename = "H")]
    pub h: f64,
    pub x0: Vec<f64>,
}

impl Default for BrockettConfig {
    fn default() -> Self {
        BrockettConfig {
            p: 1.0,
            gamma: 0.5,
            eps: 0.1,
            h: 1.0,
            x0: Preset::Fig1Left.initial_state(),
        }
    }
}

impl BrockettConfig {
    pub fn validate(&self) -> Result<()> {
        check_exponent(self.p)?;
        let positive = [("gamma", self.gamma), ("eps", self.eps), ("H", self.h)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.x0.len() != STATE_DIM {
            return Err(Error::InvalidArgument(format!(
                "initial state has {} entries, expected {STATE_DIM}",
                self.x0.len()
            )));
        }
        Ok(())
    }
}

/// Builds the case-study law; `synthesized = false` uses the closed forms.
pub fn brockett_law(
    p: f64,
    gamma: f64,
    oscillators: OscillatorAssignment,
    synthesized: bool,
) -> Result<FeedbackLaw> {
    let system = brockett_system();
    let lyap = brockett_lyapunov(p)?;
    if synthesized {
        FeedbackLaw::synthesized(system, lyap, gamma, oscillators)
    } else {
        FeedbackLaw::supplied(system, lyap, gamma, oscillators, BrockettComponents { p })
    }
}

/// Closed-form law with the default multipliers `1..6`.
pub fn default_law(p: f64, gamma: f64, eps: f64) -> Result<FeedbackLaw> {
    let osc = OscillatorAssignment::new(&pair_set(), eps)?;
    brockett_law(p, gamma, osc, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(k: usize) -> Vec<f64> {
        let mut v = vec![0.0; STATE_DIM];
        v[k] = 1.0;
        v
    }

    #[test]
    fn field_values() {
        let f = BrockettFields;
        assert_eq!(f.field::<f64>(0, &[0.0; 10]), e(0));
        let mut x = vec![0.0; 10];
        x[1] = 1.0;
        assert_eq!(f.field::<f64>(0, &x)[4], -1.0);
    }

    #[test]
    fn analytic_jacobian_matches_forward_mode() {
        let f = BrockettFields;
        let x: Vec<f64> = (0..10).map(|i| 0.3 * i as f64 - 1.1).collect();
        for k in 0..4 {
            let ad = crate::scalar::forward_jacobian(|y| f.field(k, y), &x);
            assert_eq!(f.jacobian::<f64>(k, &x), ad);
        }
    }

    #[test]
    fn vi_examples() {
        let mut x = vec![0.0; 10];
        x[4] = 1.0;
        assert_eq!(brockett_vi(1.0, &x)[0], -0.5);
        assert_eq!(
            brockett_vi(2.3, &[0.7, 1.0, 2.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            [0.0; 6]
        );
        let mut y = vec![0.0; 10];
        y[9] = -2.0;
        assert!((brockett_vi(1.5, &y)[5] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn certificate_examples() {
        assert_eq!(brockett_w(1.0, 0.5, &e(0)).value, -1.0);
        assert!((brockett_w(1.0, 0.5, &e(4)).value + 0.25).abs() < 1e-15);
        assert_eq!(brockett_w(1.0, 0.5, &[0.0; 10]).value, 0.0);
        assert!(brockett_w(1.0, 0.5, &e(0)).kink);
        assert!(!brockett_w(2.0, 0.5, &e(0)).kink);
    }

    #[test]
    fn gain_ranges() {
        let g = stability_gain_range(1.0, 5.0).unwrap();
        assert!((g.upper - std::f64::consts::SQRT_2).abs() < 1e-15 && g.global);
        let g = stability_gain_range(1.5, 1.0).unwrap();
        assert!((g.upper - 1.0).abs() < 1e-15);
        let small = stability_gain_range(1.5, 1e-8).unwrap();
        assert!(small.upper > 1e7);
        assert!(stability_gain_range(0.5, 1.0).is_err());
        assert!(stability_gain_range(1.5, 0.0).is_err());
    }

    #[test]
    fn presets() {
        assert_eq!(
            Preset::parse("fig1-right").unwrap().initial_state()[9],
            -1.0
        );
        assert_eq!(Preset::Fig1Left.initial_state()[8], 3.0);
        assert!(Preset::parse("fig2").is_none());
        let mut cfg = BrockettConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.gamma = 0.0;
        assert!(cfg.validate().is_err());
    }
}
