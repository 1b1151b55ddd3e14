//! Closed-loop integration and expansion checks.
//!
//! Trajectories are produced by fixed-step RK4 with `substeps` steps per
//! oscillator period `ε`, so every boundary `t = jε` is hit exactly. In the
//! classical mode the feedback sees the current state; in the sampled mode
//! its state argument is held at `x(jε)` for the whole window while its time
//! argument runs on.

use std::io::{self, Write};

use serde::Serialize;

use crate::controller::{
    combine, oscillator, FeedbackLaw, FrozenGains, OscillatorAssignment, Role,
};
use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::lyapunov::compute_w;

pub const DEFAULT_SUBSTEPS: usize = 400;
/// Minimum steps per period of the fastest harmonic.
pub const MIN_STEPS_PER_HARMONIC: usize = 50;
/// `‖x‖` above this aborts the run with the divergence flag set.
pub const DIVERGENCE_NORM: f64 = 1e6;
/// Substep multiplier of the reference run in [`cf_order_probe`].
pub const REFERENCE_REFINEMENT: usize = 16;
/// Residuals below this are treated as solver noise.
pub const RESIDUAL_NOISE_FLOOR: f64 = 1e-13;
pub const MIN_QUAD_STEPS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionMode {
    Classical,
    Sampled,
}

impl SolutionMode {
    pub fn label(&self) -> &'static str {
        match self {
            SolutionMode::Classical => "classical",
            SolutionMode::Sampled => "sampled",
        }
    }
}

/// Diagnostics at a window boundary `t = jε`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindowRecord {
    pub j: usize,
    pub t: f64,
    #[serde(rename = "V")]
    pub value: f64,
    #[serde(rename = "W")]
    pub certificate: f64,
    /// `[(V_{j+1} − V_j)/ε − W_j]/√ε`; absent on the terminal boundary.
    pub r_hat: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub norms: Vec<f64>,
    /// One record per reached boundary, `j = 0, 1, …`.
    pub windows: Vec<WindowRecord>,
    pub substeps: usize,
    pub period: f64,
    pub solver_order: usize,
    pub mode: SolutionMode,
    pub diverged: bool,
}

impl Trajectory {
    pub fn state_dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn terminal_state(&self) -> &[f64] {
        self.states.last().map_or(&[], Vec::as_slice)
    }

    pub fn terminal_norm(&self) -> f64 {
        self.norms.last().copied().unwrap_or(0.0)
    }

    pub fn initial_norm(&self) -> f64 {
        self.norms.first().copied().unwrap_or(0.0)
    }

    /// Number of completed windows.
    pub fn window_count(&self) -> usize {
        self.windows.len().saturating_sub(1)
    }

    /// Sample index of boundary `j`.
    pub fn boundary_index(&self, j: usize) -> usize {
        j * self.substeps
    }

    /// `(t, x)` at every reached boundary.
    pub fn boundary_states(&self) -> Vec<(f64, &[f64])> {
        self.windows
            .iter()
            .map(|w| (w.t, self.states[self.boundary_index(w.j)].as_slice()))
            .collect()
    }

    pub fn boundary_norms(&self) -> Vec<f64> {
        self.windows
            .iter()
            .map(|w| self.norms[self.boundary_index(w.j)])
            .collect()
    }

    /// `V(x((j+1)ε)) < V(x(jε))` for every window whose start has
    /// `‖x(jε)‖ > norm_floor`.
    pub fn monotone_decrease(&self, norm_floor: f64) -> bool {
        self.windows.windows(2).all(|w| {
            self.norms[self.boundary_index(w[0].j)] <= norm_floor || w[1].value < w[0].value
        })
    }

    /// CSV with header `t,x1,…,xn,V,norm`, every `stride`-th sample plus the
    /// last one, 17 significant digits, LF line endings.
    pub fn write_csv<W: Write>(&self, out: &mut W, stride: usize) -> io::Result<()> {
        let n = self.state_dim();
        let mut header = String::from("t");
        for i in 1..=n {
            header.push_str(&format!(",x{i}"));
        }
        header.push_str(",V,norm\n");
        out.write_all(header.as_bytes())?;
        let stride = stride.max(1);
        let last = self.times.len().saturating_sub(1);
        for (i, t) in self.times.iter().enumerate() {
            if i % stride != 0 && i != last {
                continue;
            }
            let mut line = fmt_num(*t);
            for v in &self.states[i] {
                line.push(',');
                line.push_str(&fmt_num(*v));
            }
            line.push(',');
            line.push_str(&fmt_num(self.values[i]));
            line.push(',');
            line.push_str(&fmt_num(self.norms[i]));
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    /// Window diagnostics as a JSON array of `{j, t, V, W, r_hat}`.
    pub fn windows_json(&self) -> String {
        serde_json::to_string_pretty(&self.windows).expect("window records serialize")
    }
}

/// 17 significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn check_substeps(law: &FeedbackLaw, substeps: usize) -> Result<()> {
    let needed = MIN_STEPS_PER_HARMONIC * law.oscillators().max_multiplier() as usize;
    if substeps < needed {
        return Err(Error::InvalidArgument(format!(
            "substeps = {substeps} below {needed} (50 per period of the fastest harmonic)"
        )));
    }
    Ok(())
}

fn axpy(x: &[f64], a: f64, k: &[f64]) -> Vec<f64> {
    x.iter().zip(k).map(|(xi, ki)| xi + a * ki).collect()
}

fn rk4_step<F>(x: &[f64], t: f64, h: f64, mut rhs: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], f64) -> Result<Vec<f64>>,
{
    let k1 = rhs(x, t)?;
    let k2 = rhs(&axpy(x, 0.5 * h, &k1), t + 0.5 * h)?;
    let k3 = rhs(&axpy(x, 0.5 * h, &k2), t + 0.5 * h)?;
    let k4 = rhs(&axpy(x, h, &k3), t + h)?;
    Ok(x.iter()
        .enumerate()
        .map(|(i, xi)| xi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Advances one window `[jε, (j+1)ε]`, calling `visit(step, x)` after each
/// substep. Returns `None` if the state blew up.
fn advance_window<V>(
    law: &FeedbackLaw,
    x: &[f64],
    j: usize,
    substeps: usize,
    mode: SolutionMode,
    mut visit: V,
) -> Result<Option<Vec<f64>>>
where
    V: FnMut(usize, &[f64]),
{
    let sys = law.system();
    let eps = law.period();
    let h = eps / substeps as f64;
    let t0 = j as f64 * eps;
    let held: Option<FrozenGains> = match mode {
        SolutionMode::Sampled => Some(law.frozen_gains(x)?),
        SolutionMode::Classical => None,
    };
    let mut y = x.to_vec();
    for s in 0..substeps {
        let t = t0 + s as f64 * h;
        y = rk4_step(&y, t, h, |z, tau| {
            let u = match &held {
                Some(g) => law.input_from(g, tau),
                None => law.feedback_eval(z, tau)?,
            };
            Ok(combine(&sys.fields(z), &u))
        })?;
        let r = norm(&y);
        if !r.is_finite() || r > DIVERGENCE_NORM {
            return Ok(None);
        }
        visit(s + 1, &y);
    }
    Ok(Some(y))
}

/// Integrates over `round(T/ε)` windows, recording every substep.
pub fn integrate(
    law: &FeedbackLaw,
    x0: &[f64],
    horizon: f64,
    substeps: usize,
    mode: SolutionMode,
) -> Result<Trajectory> {
    let n = law.system().state_dim();
    if x0.len() != n {
        return Err(Error::InvalidArgument(format!(
            "initial state has {} entries, expected {n}",
            x0.len()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "initial state",
            at: x0.to_vec(),
        });
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "horizon must be non-negative, got {horizon}"
        )));
    }
    check_substeps(law, substeps)?;
    let eps = law.period();
    let h = eps / substeps as f64;
    let windows = (horizon / eps).round() as usize;
    let lyap = law.lyapunov();
    let gamma = law.gain();

    let capacity = windows * substeps + 1;
    let mut traj = Trajectory {
        times: Vec::with_capacity(capacity),
        states: Vec::with_capacity(capacity),
        values: Vec::with_capacity(capacity),
        norms: Vec::with_capacity(capacity),
        windows: Vec::with_capacity(windows + 1),
        substeps,
        period: eps,
        solver_order: 4,
        mode,
        diverged: false,
    };
    let push = |traj: &mut Trajectory, t: f64, x: &[f64]| {
        traj.times.push(t);
        traj.values.push(lyap.value(x));
        traj.norms.push(norm(x));
        traj.states.push(x.to_vec());
    };
    push(&mut traj, 0.0, x0);

    let mut x = x0.to_vec();
    for j in 0..=windows {
        let t_j = j as f64 * eps;
        let w = compute_w(law, &x, gamma)?.w;
        traj.windows.push(WindowRecord {
            j,
            t: t_j,
            value: lyap.value(&x),
            certificate: w,
            r_hat: None,
        });
        if j == windows {
            break;
        }
        let mut samples: Vec<(f64, Vec<f64>)> = Vec::with_capacity(substeps);
        let next = advance_window(law, &x, j, substeps, mode, |s, y| {
            let t = if s == substeps {
                (j + 1) as f64 * eps
            } else {
                t_j + s as f64 * h
            };
            samples.push((t, y.to_vec()));
        })?;
        for (t, y) in &samples {
            push(&mut traj, *t, y);
        }
        match next {
            Some(y) => x = y,
            None => {
                traj.diverged = true;
                break;
            }
        }
    }
    let diag = increment_diagnostics(&traj);
    for (rec, r) in traj.windows.iter_mut().zip(diag.r_hat) {
        rec.r_hat = Some(r);
    }
    Ok(traj)
}

pub fn integrate_classical(
    law: &FeedbackLaw,
    x0: &[f64],
    horizon: f64,
    substeps: usize,
) -> Result<Trajectory> {
    integrate(law, x0, horizon, substeps, SolutionMode::Classical)
}

pub fn integrate_sampled(
    law: &FeedbackLaw,
    x0: &[f64],
    horizon: f64,
    substeps: usize,
) -> Result<Trajectory> {
    integrate(law, x0, horizon, substeps, SolutionMode::Sampled)
}

/// State after a single classical window from `x0`, nothing recorded.
pub fn flow_one_window(law: &FeedbackLaw, x0: &[f64], substeps: usize) -> Result<Vec<f64>> {
    check_substeps(law, substeps)?;
    advance_window(law, x0, 0, substeps, SolutionMode::Classical, |_, _| {})?.ok_or_else(|| {
        Error::NonFinite {
            what: "state after one window",
            at: x0.to_vec(),
        }
    })
}

/// Per-window increment remainders.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IncrementDiagnostics {
    pub r_hat: Vec<f64>,
    pub max_abs: f64,
}

/// `r̂_j = [(V(x((j+1)ε)) − V(x(jε)))/ε − W(x(jε))]/√ε` for every
/// completed window.
pub fn increment_diagnostics(traj: &Trajectory) -> IncrementDiagnostics {
    let eps = traj.period;
    let r_hat: Vec<f64> = traj
        .windows
        .windows(2)
        .map(|w| ((w[1].value - w[0].value) / eps - w[0].certificate) / eps.sqrt())
        .collect();
    let max_abs = r_hat.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
    IncrementDiagnostics { r_hat, max_abs }
}

/// Truncated one-period expansion `x0 + ε(g_0 + γ²Σ[g_i^I, g_j^I])(x0)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CfPrediction {
    pub x0: Vec<f64>,
    pub period: f64,
    pub predicted: Vec<f64>,
    pub drift: Vec<f64>,
    /// `γ² Σ_I [g_i^I, g_j^I](x0)`
    pub bracket_sum: Vec<f64>,
}

pub fn chen_fliess_predict(law: &FeedbackLaw, x0: &[f64]) -> Result<CfPrediction> {
    let eps = law.period();
    let g2 = law.gain() * law.gain();
    let drift = law.drift(x0)?;
    let mut bracket_sum = vec![0.0; x0.len()];
    for b in law.averaged_brackets(x0)? {
        for (s, v) in bracket_sum.iter_mut().zip(b) {
            *s += g2 * v;
        }
    }
    let predicted = x0
        .iter()
        .enumerate()
        .map(|(i, x)| x + eps * (drift[i] + bracket_sum[i]))
        .collect();
    Ok(CfPrediction {
        x0: x0.to_vec(),
        period: eps,
        predicted,
        drift,
        bracket_sum,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CfRow {
    pub eps: f64,
    pub residual: f64,
    /// Residual below the solver noise floor; left out of the fit.
    pub excluded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CfOrderProbe {
    pub rows: Vec<CfRow>,
    /// Fitted slope of `log ρ` against `log ε`.
    pub exponent: f64,
}

/// Residual of the truncated expansion against a refined classical run,
/// for each period in `eps_list` (law rebuilt per period).
pub fn cf_order_probe(law: &FeedbackLaw, x0: &[f64], eps_list: &[f64]) -> Result<CfOrderProbe> {
    if eps_list.len() < 3 {
        return Err(Error::InvalidArgument("need at least three periods".into()));
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) || eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidArgument(
            "periods must be positive and strictly decreasing".into(),
        ));
    }
    let substeps = REFERENCE_REFINEMENT * DEFAULT_SUBSTEPS;
    let rows: Vec<CfRow> = eps_list
        .iter()
        .map(|&eps| {
            let l = law.with_period(eps)?;
            let reference = flow_one_window(&l, x0, substeps)?;
            let pred = chen_fliess_predict(&l, x0)?;
            let diff: Vec<f64> = reference
                .iter()
                .zip(&pred.predicted)
                .map(|(a, b)| a - b)
                .collect();
            let residual = norm(&diff);
            Ok(CfRow {
                eps,
                residual,
                excluded: residual < RESIDUAL_NOISE_FLOOR,
            })
        })
        .collect::<Result<_>>()?;
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| !r.excluded)
        .map(|r| (r.eps.ln(), r.residual.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::NoAdmissibleSamples(
            "fewer than two residuals above the solver noise floor".into(),
        ));
    }
    let exponent = crate::stats::linear_fit(&pts).slope;
    Ok(CfOrderProbe { rows, exponent })
}

/// `∫₀^ε f(s) ∫₀^s g(r) dr ds` by composite Simpson with the inner integral
/// carried at nodes and midpoints.
fn ordered_integral<F, G>(f: F, g: G, period: f64, steps: usize) -> f64
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let h = period / steps as f64;
    let mut inner = 0.0;
    let mut total = 0.0;
    for k in 0..steps {
        let a = k as f64 * h;
        let m = a + 0.5 * h;
        let b = if k + 1 == steps { period } else { a + h };
        let (ga, gm, gb) = (g(a), g(m), g(b));
        let inner_mid = inner + h / 24.0 * (5.0 * ga + 8.0 * gm - gb);
        let inner_end = inner + h / 6.0 * (ga + 4.0 * gm + gb);
        total += h / 6.0 * (f(a) * inner + 4.0 * f(m) * inner_mid + f(b) * inner_end);
        inner = inner_end;
    }
    total
}

/// `A = ∫φ_first^{κ_i}·Φ_second^{κ_j} − ∫φ_second^{κ_j}·Φ_first^{κ_i}` over one
/// period, for explicit multipliers.
pub fn antisymmetric_coefficient(
    kappa_i: u32,
    kappa_j: u32,
    period: f64,
    quad_steps: usize,
) -> Result<f64> {
    if quad_steps < MIN_QUAD_STEPS {
        return Err(Error::InvalidArgument(format!(
            "quad_steps = {quad_steps} below {MIN_QUAD_STEPS}"
        )));
    }
    let first = |s: f64| oscillator(kappa_i, period, Role::First, s);
    let second = |s: f64| oscillator(kappa_j, period, Role::Second, s);
    Ok(ordered_integral(first, second, period, quad_steps)
        - ordered_integral(second, first, period, quad_steps))
}

/// Antisymmetric iterated-integral coefficient between the cosine channel of
/// pair `i` and the sine channel of pair `j`.
pub fn iterated_integral_check(
    assignment: &OscillatorAssignment,
    pair_i: usize,
    pair_j: usize,
    quad_steps: usize,
) -> Result<f64> {
    antisymmetric_coefficient(
        assignment.multiplier(pair_i),
        assignment.multiplier(pair_j),
        assignment.period(),
        quad_steps,
    )
}

/// `(∫₀^ε φ, (1/ε)∫₀^ε φ²)` by composite Simpson.
pub fn oscillator_moments(
    assignment: &OscillatorAssignment,
    pair: usize,
    role: Role,
    quad_steps: usize,
) -> (f64, f64) {
    let eps = assignment.period();
    let f = |t: f64| assignment.phi(pair, role, t);
    let h = eps / quad_steps as f64;
    let (mut mean, mut square) = (0.0, 0.0);
    for k in 0..quad_steps {
        let a = k as f64 * h;
        let (fa, fm, fb) = (f(a), f(a + 0.5 * h), f(a + h));
        mean += h / 6.0 * (fa + 4.0 * fm + fb);
        square += h / 6.0 * (fa * fa + 4.0 * fm * fm + fb * fb);
    }
    (mean, square / eps)
}
