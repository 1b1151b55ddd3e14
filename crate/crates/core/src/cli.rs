//! Command-line front end: `run`, `compare` and `verify`.
//!
//! Configuration is a flat `key = value` file (`#` starts a comment) whose
//! keys match the long flags with `-` replaced by `_`; flags override the
//! file, which overrides the defaults.

use std::collections::BTreeSet;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::brockett::{self, BrockettConfig, Preset};
use crate::controller::{FeedbackLaw, OscillatorAssignment, Role};
use crate::error::{Error, Result};
use crate::integrator::{self, SolutionMode, Trajectory};
use crate::lyapunov::{certificate_scan, certified_gain_bound, check_c1, DefinitenessReport};
use crate::sampling::{Region, Sampler, DEFAULT_R_MIN};
use crate::stats::{decay_rates, linear_fit, LinearFit, RATE_NORM_FLOOR};
use crate::vecfield::{bracket_generating_check, DEFAULT_RANK_TOL};

pub const SCHEMA_VERSION: u32 = 1;
pub const OUTPUT_ROOT_ENV: &str = "OSCSTAB_OUTPUT_ROOT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
/// Divergence in `run`/`compare`, failed check in `verify`.
pub const EXIT_FAILED: i32 = 2;
/// Finished without diverging but above the convergence threshold.
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSelection {
    Classical,
    Sampled,
    Both,
}

impl ModeSelection {
    pub fn modes(&self) -> Vec<SolutionMode> {
        match self {
            ModeSelection::Classical => vec![SolutionMode::Classical],
            ModeSelection::Sampled => vec![SolutionMode::Sampled],
            ModeSelection::Both => vec![SolutionMode::Classical, SolutionMode::Sampled],
        }
    }
}

/// Where the law components come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LawSource {
    /// Closed-form case-study expressions.
    Closed,
    /// Generic synthesis through `F(x)⁻¹`.
    Synthesized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    BracketGenerating,
    Negdef,
    GainBound,
    C1,
    CfOrder,
    IteratedIntegrals,
}

impl Check {
    pub const ALL: [Check; 6] = [
        Check::BracketGenerating,
        Check::Negdef,
        Check::GainBound,
        Check::C1,
        Check::CfOrder,
        Check::IteratedIntegrals,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Check::BracketGenerating => "bracket_generating",
            Check::Negdef => "negdef",
            Check::GainBound => "gain_bound",
            Check::C1 => "c1",
            Check::CfOrder => "cf_order",
            Check::IteratedIntegrals => "iterated_integrals",
        }
    }

    fn parse(s: &str) -> Option<Check> {
        Check::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// Initial state as given: a preset name or an explicit vector.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum InitialState {
    Preset(Preset),
    Vector(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub system: String,
    pub mode: ModeSelection,
    pub law: LawSource,
    /// `None` takes the exponent of the preset (1 for explicit vectors).
    pub p: Option<f64>,
    pub gamma: f64,
    pub eps: f64,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub substeps: usize,
    pub kappa: Option<Vec<u32>>,
    pub x0: InitialState,
    pub seed: u64,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Converged when the terminal norm is below `threshold·‖x0‖`.
    pub threshold: f64,
    pub fit_start: Option<usize>,
    pub fit_end: Option<usize>,
    pub csv_stride: usize,
    pub negdef_samples: usize,
    pub negdef_radius: f64,
    pub gain_samples: usize,
    pub tol_alpha: f64,
    pub c1_samples: usize,
    pub c1_radius: f64,
    pub bracket_samples: usize,
    pub cf_eps: Vec<f64>,
    pub cf_x0: Vec<f64>,
    pub quad_steps: usize,
    pub checks: BTreeSet<Check>,
    #[serde(skip)]
    pub resonance_witness: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut cf_x0 = vec![0.0; brockett::STATE_DIM];
        cf_x0[0] = 0.5;
        cf_x0[4] = 1.0;
        RunConfig {
            system: brockett::SYSTEM_NAME.to_string(),
            mode: ModeSelection::Classical,
            law: LawSource::Closed,
            p: None,
            gamma: 0.5,
            eps: 0.1,
            h: 1.0,
            horizon: 50.0,
            substeps: integrator::DEFAULT_SUBSTEPS,
            kappa: None,
            x0: InitialState::Preset(Preset::Fig1Left),
            seed: 20_240_501,
            out: None,
            threshold: 1e-2,
            fit_start: None,
            fit_end: None,
            csv_stride: 40,
            negdef_samples: 10_000,
            negdef_radius: 2.0,
            gain_samples: 10_000,
            tol_alpha: 1e-8,
            c1_samples: 10_000,
            c1_radius: 1.0,
            bracket_samples: 256,
            cf_eps: vec![0.1, 0.05, 0.025],
            cf_x0,
            quad_steps: integrator::MIN_QUAD_STEPS,
            checks: Check::ALL.into_iter().collect(),
            resonance_witness: false,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("{key}: cannot parse {value:?}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

fn parse_opt_usize(key: &str, value: &str) -> Result<Option<usize>> {
    match value.trim() {
        "" | "auto" => Ok(None),
        v => parse_num(key, v).map(Some),
    }
}

impl RunConfig {
    /// Sets one key; keys are case-sensitive (`H`, `T`).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "system" => self.system = v.to_string(),
            "mode" => {
                self.mode = match v {
                    "classical" => ModeSelection::Classical,
                    "sampled" => ModeSelection::Sampled,
                    "both" => ModeSelection::Both,
                    _ => return Err(Error::InvalidArgument(format!("mode: unknown value {v:?}"))),
                }
            }
            "law" => {
                self.law = match v {
                    "closed" => LawSource::Closed,
                    "synthesized" => LawSource::Synthesized,
                    _ => return Err(Error::InvalidArgument(format!("law: unknown value {v:?}"))),
                }
            }
            "p" => self.p = Some(parse_num(key, v)?),
            "gamma" => self.gamma = parse_num(key, v)?,
            "eps" => self.eps = parse_num(key, v)?,
            "H" => self.h = parse_num(key, v)?,
            "T" => self.horizon = parse_num(key, v)?,
            "substeps" => self.substeps = parse_num(key, v)?,
            "kappa" => {
                self.kappa = if v == "auto" {
                    None
                } else {
                    Some(parse_list(key, v)?)
                }
            }
            "x0" => {
                self.x0 = match Preset::parse(v) {
                    Some(p) => InitialState::Preset(p),
                    None => InitialState::Vector(parse_list(key, v)?),
                }
            }
            "seed" => self.seed = parse_num(key, v)?,
            "out" => self.out = Some(PathBuf::from(v)),
            "threshold" => self.threshold = parse_num(key, v)?,
            "fit_start" => self.fit_start = parse_opt_usize(key, v)?,
            "fit_end" => self.fit_end = parse_opt_usize(key, v)?,
            "csv_stride" => self.csv_stride = parse_num(key, v)?,
            "negdef_samples" => self.negdef_samples = parse_num(key, v)?,
            "negdef_radius" => self.negdef_radius = parse_num(key, v)?,
            "gain_samples" => self.gain_samples = parse_num(key, v)?,
            "tol_alpha" => self.tol_alpha = parse_num(key, v)?,
            "c1_samples" => self.c1_samples = parse_num(key, v)?,
            "c1_radius" => self.c1_radius = parse_num(key, v)?,
            "bracket_samples" => self.bracket_samples = parse_num(key, v)?,
            "cf_eps" => self.cf_eps = parse_list(key, v)?,
            "cf_x0" => self.cf_x0 = parse_list(key, v)?,
            "quad_steps" => self.quad_steps = parse_num(key, v)?,
            "checks" => {
                self.checks = if v == "all" {
                    Check::ALL.into_iter().collect()
                } else {
                    v.split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| {
                            Check::parse(s).ok_or_else(|| {
                                Error::InvalidArgument(format!("checks: unknown check {s:?}"))
                            })
                        })
                        .collect::<Result<_>>()?
                }
            }
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown config key {key:?}"
                )))
            }
        }
        Ok(())
    }

    /// Applies a flat `key = value` document.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "line {}: expected key = value, got {raw:?}",
                    lineno + 1
                ))
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn exponent(&self) -> f64 {
        match (self.p, &self.x0) {
            (Some(p), _) => p,
            (None, InitialState::Preset(preset)) => preset.exponent(),
            (None, InitialState::Vector(_)) => 1.0,
        }
    }

    pub fn initial_state(&self) -> Vec<f64> {
        match &self.x0 {
            InitialState::Preset(p) => p.initial_state(),
            InitialState::Vector(v) => v.clone(),
        }
    }

    pub fn brockett_config(&self) -> BrockettConfig {
        BrockettConfig {
            p: self.exponent(),
            gamma: self.gamma,
            eps: self.eps,
            h: self.h,
            x0: self.initial_state(),
        }
    }

    pub fn window_count(&self) -> usize {
        (self.horizon / self.eps).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.system != brockett::SYSTEM_NAME {
            return Err(Error::InvalidArgument(format!(
                "unknown system {:?}; registered: {}",
                self.system,
                brockett::SYSTEM_NAME
            )));
        }
        self.brockett_config().validate()?;
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "T must be non-negative, got {}",
                self.horizon
            )));
        }
        let ratio = self.horizon / self.eps;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "T = {} is not an integer multiple of eps = {}",
                self.horizon, self.eps
            )));
        }
        if !(self.threshold > 0.0) {
            return Err(Error::InvalidArgument("threshold must be positive".into()));
        }
        if self.csv_stride == 0 {
            return Err(Error::InvalidArgument("csv_stride must be positive".into()));
        }
        if let (Some(a), Some(b)) = (self.fit_start, self.fit_end) {
            if a >= b {
                return Err(Error::InvalidArgument(
                    "fit_start must be below fit_end".into(),
                ));
            }
        }
        if self.cf_x0.len() != brockett::STATE_DIM {
            return Err(Error::InvalidArgument("cf_x0 must have ten entries".into()));
        }
        let osc = self.oscillators()?;
        let needed = integrator::MIN_STEPS_PER_HARMONIC * osc.max_multiplier() as usize;
        if self.substeps < needed {
            return Err(Error::InvalidArgument(format!(
                "substeps = {} below {needed} for the largest multiplier",
                self.substeps
            )));
        }
        Ok(())
    }

    pub fn oscillators(&self) -> Result<OscillatorAssignment> {
        let pairs = brockett::pair_set();
        match &self.kappa {
            Some(k) => OscillatorAssignment::with_multipliers(&pairs, k.clone(), self.eps),
            None => OscillatorAssignment::new(&pairs, self.eps),
        }
    }

    pub fn build_law(&self) -> Result<FeedbackLaw> {
        brockett::brockett_law(
            self.exponent(),
            self.gamma,
            self.oscillators()?,
            self.law == LawSource::Synthesized,
        )
    }

    /// Explicit `out`, resolved against the output-root variable when
    /// relative; otherwise the root itself or `oscstab-out`.
    pub fn output_dir(&self) -> PathBuf {
        let root = std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from);
        match (&self.out, root) {
            (Some(out), Some(root)) if out.is_relative() => root.join(out),
            (Some(out), _) => out.clone(),
            (None, Some(root)) => root,
            (None, None) => PathBuf::from("oscstab-out"),
        }
    }
}

/// Per-mode results reported in `summary.json`.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub mode: SolutionMode,
    pub initial_norm: f64,
    pub terminal_norm: f64,
    pub terminal_state: Vec<f64>,
    pub windows: usize,
    pub monotone_decrease: bool,
    pub converged: bool,
    pub diverged: bool,
    pub exponential_fit: LinearFit,
    pub polynomial_slope: f64,
    pub max_abs_r_hat: f64,
}

/// Convergence-rate fits over boundary norms; an explicit index range
/// replaces the default middle 70%.
pub fn summarize(traj: &Trajectory, cfg: &RunConfig) -> RunSummary {
    let norms = traj.boundary_norms();
    let times: Vec<f64> = traj.windows.iter().map(|w| w.t).collect();
    let (exponential_fit, polynomial_slope) = if cfg.fit_start.is_some() || cfg.fit_end.is_some() {
        let lo = cfg.fit_start.unwrap_or(0).min(norms.len());
        let hi = cfg.fit_end.unwrap_or(norms.len()).min(norms.len()).max(lo);
        let pts: Vec<(f64, f64)> = (lo..hi)
            .filter(|&j| norms[j] > RATE_NORM_FLOOR)
            .map(|j| (times[j], norms[j].ln()))
            .collect();
        let log_pts: Vec<(f64, f64)> = pts
            .iter()
            .filter(|(t, _)| *t > 0.0)
            .map(|(t, l)| (t.ln(), *l))
            .collect();
        (linear_fit(&pts), linear_fit(&log_pts).slope)
    } else {
        let fit = decay_rates(&times, &norms);
        (fit.exponential, fit.polynomial.slope)
    };
    let initial = traj.initial_norm();
    let terminal = traj.terminal_norm();
    RunSummary {
        mode: traj.mode,
        initial_norm: initial,
        terminal_norm: terminal,
        terminal_state: traj.terminal_state().to_vec(),
        windows: traj.window_count(),
        monotone_decrease: traj.monotone_decrease(1e-8),
        converged: !traj.diverged && (initial == 0.0 || terminal < cfg.threshold * initial),
        diverged: traj.diverged,
        exponential_fit,
        polynomial_slope,
        max_abs_r_hat: integrator::increment_diagnostics(traj).max_abs,
    }
}

/// Artifacts kept in memory until the single write at the end.
struct Artifacts {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    fn new(dir: PathBuf) -> Self {
        Artifacts {
            dir,
            files: Vec::new(),
        }
    }

    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn add_json(&mut self, name: &str, value: &impl Serialize) {
        let mut text = serde_json::to_string_pretty(value).expect("report serializes");
        text.push('\n');
        self.add(name, text.into_bytes());
    }

    fn write(self) -> std::io::Result<PathBuf> {
        fs::create_dir_all(&self.dir)?;
        for (name, bytes) in &self.files {
            fs::write(self.dir.join(name), bytes)?;
        }
        Ok(self.dir)
    }
}

fn digest(report: &DefinitenessReport) -> Value {
    json!({
        "N": report.samples,
        "seed": report.seed,
        "violations": report.violations,
        "worst_value": report.worst_value,
        "passed": report.passed(),
    })
}

fn trajectory_artifacts(art: &mut Artifacts, traj: &Trajectory, stride: usize) -> Result<()> {
    let label = traj.mode.label();
    let mut csv = BufWriter::new(Vec::new());
    traj.write_csv(&mut csv, stride)
        .map_err(|e| Error::InvalidArgument(format!("csv encoding: {e}")))?;
    art.add(
        &format!("trajectory_{label}.csv"),
        csv.into_inner().expect("in-memory buffer"),
    );
    let mut windows = traj.windows_json();
    windows.push('\n');
    art.add(&format!("windows_{label}.json"), windows.into_bytes());
    Ok(())
}

fn simulate(cfg: &RunConfig, law: &FeedbackLaw, modes: &[SolutionMode]) -> Result<Vec<Trajectory>> {
    let x0 = cfg.initial_state();
    let run = |m: SolutionMode| integrator::integrate(law, &x0, cfg.horizon, cfg.substeps, m);
    match modes {
        [a, b] => {
            let (ta, tb) = rayon::join(|| run(*a), || run(*b));
            Ok(vec![ta?, tb?])
        }
        _ => modes.iter().map(|m| run(*m)).collect(),
    }
}

fn certificate_region(cfg: &RunConfig) -> Region {
    Region::Ball {
        dim: brockett::STATE_DIM,
        radius: cfg.negdef_radius,
        r_min: DEFAULT_R_MIN,
    }
}

/// Outcome of a subcommand: exit code and the output directory.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub dir: PathBuf,
    pub report: Value,
}

fn run_exit_code(summaries: &[RunSummary]) -> i32 {
    if summaries.iter().any(|s| s.diverged) {
        EXIT_FAILED
    } else if summaries.iter().all(|s| s.converged) {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    }
}

fn finish(art: Artifacts, timing: Value, code: i32, report: Value) -> Result<Outcome> {
    let mut art = art;
    art.add_json("timing.json", &timing);
    let dir = art
        .write()
        .map_err(|e| Error::InvalidArgument(format!("cannot write outputs: {e}")))?;
    Ok(Outcome { code, dir, report })
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let start = Instant::now();
    let law = cfg.build_law()?;
    let trajs = simulate(cfg, &law, &cfg.mode.modes())?;
    let scan = certificate_scan(
        &law,
        cfg.gamma,
        &certificate_region(cfg),
        cfg.negdef_samples,
        cfg.seed,
    )?;
    let mut art = Artifacts::new(cfg.output_dir());
    let mut summaries = Vec::new();
    for t in &trajs {
        trajectory_artifacts(&mut art, t, cfg.csv_stride)?;
        summaries.push(summarize(t, cfg));
    }
    let code = run_exit_code(&summaries);
    let report = json!({
        "schema": SCHEMA_VERSION,
        "command": "run",
        "config": cfg,
        "runs": summaries,
        "certificate_scan": digest(&scan),
    });
    art.add_json("summary.json", &report);
    finish(
        art,
        json!({ "wall_clock_seconds": start.elapsed().as_secs_f64() }),
        code,
        report,
    )
}

pub fn compare(cfg: &RunConfig) -> Result<Outcome> {
    let mut cfg = cfg.clone();
    cfg.mode = ModeSelection::Both;
    cfg.validate()?;
    let start = Instant::now();
    let law = cfg.build_law()?;
    let trajs = simulate(&cfg, &law, &cfg.mode.modes())?;
    let (classical, sampled) = (&trajs[0], &trajs[1]);
    let nc = classical.boundary_norms();
    let ns = sampled.boundary_norms();
    let mut table = String::from("t,norm_classical,norm_sampled,abs_diff\n");
    let mut sup_diff = 0.0_f64;
    for (j, w) in classical
        .windows
        .iter()
        .enumerate()
        .take(nc.len().min(ns.len()))
    {
        let d = (nc[j] - ns[j]).abs();
        sup_diff = sup_diff.max(d);
        table.push_str(&format!(
            "{},{},{},{}\n",
            integrator::fmt_num(w.t),
            integrator::fmt_num(nc[j]),
            integrator::fmt_num(ns[j]),
            integrator::fmt_num(d)
        ));
    }
    let mut art = Artifacts::new(cfg.output_dir());
    let mut summaries = Vec::new();
    for t in &trajs {
        trajectory_artifacts(&mut art, t, cfg.csv_stride)?;
        summaries.push(summarize(t, &cfg));
    }
    art.add("compare.csv", table.into_bytes());
    let code = run_exit_code(&summaries);
    let report = json!({
        "schema": SCHEMA_VERSION,
        "command": "compare",
        "config": cfg,
        "runs": summaries,
        "sup_abs_diff": sup_diff,
    });
    art.add_json("summary.json", &report);
    finish(
        art,
        json!({ "wall_clock_seconds": start.elapsed().as_secs_f64() }),
        code,
        report,
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub check: Check,
    pub passed: bool,
    pub details: Value,
}

fn check_brackets(cfg: &RunConfig) -> Result<CheckResult> {
    let sys = brockett::brockett_system();
    let sampler = Sampler::new(certificate_region(cfg), cfg.seed)?;
    let mut failures = 0;
    let mut min_ratio = f64::INFINITY;
    for x in sampler.points(cfg.bracket_samples) {
        let v = bracket_generating_check(&sys, &x, DEFAULT_RANK_TOL)?;
        if !v.generating {
            failures += 1;
        }
        min_ratio = min_ratio.min(v.smallest_singular_value / v.largest_singular_value);
    }
    Ok(CheckResult {
        check: Check::BracketGenerating,
        passed: failures == 0,
        details: json!({
            "N": cfg.bracket_samples,
            "seed": cfg.seed,
            "rank_deficient": failures,
            "min_singular_ratio": min_ratio,
        }),
    })
}

/// Cross-coefficient tolerance: `1e-8` of the same-pair magnitude `2ε`.
pub fn cross_coefficient_tolerance(eps: f64) -> f64 {
    1e-8 * 2.0 * eps
}

fn check_oscillators(cfg: &RunConfig) -> Result<CheckResult> {
    let osc = cfg.oscillators()?;
    let eps = osc.period();
    let k = osc.pairs().len();
    let mut same_err = 0.0_f64;
    let mut cross_max = 0.0_f64;
    for i in 0..k {
        for j in 0..k {
            let a = integrator::iterated_integral_check(&osc, i, j, cfg.quad_steps)?;
            if i == j {
                same_err = same_err.max(((a + 2.0 * eps) / (2.0 * eps)).abs());
            } else {
                cross_max = cross_max.max(a.abs());
            }
        }
    }
    let mut mean_max = 0.0_f64;
    let mut square_err = 0.0_f64;
    for i in 0..k {
        for role in [Role::First, Role::Second] {
            let (mean, square) = integrator::oscillator_moments(&osc, i, role, cfg.quad_steps);
            let amp = osc.amplitude(i);
            mean_max = mean_max.max(mean.abs() / (amp * eps));
            let expected = 0.5 * amp * amp;
            square_err = square_err.max(((square - expected) / expected).abs());
        }
    }
    let witness = if cfg.resonance_witness {
        let kappa = osc.multiplier(0);
        Some(integrator::antisymmetric_coefficient(
            kappa,
            kappa,
            eps,
            cfg.quad_steps,
        )?)
    } else {
        None
    };
    let cross_tol = cross_coefficient_tolerance(eps);
    let passed = same_err <= 1e-6
        && cross_max <= cross_tol
        && mean_max <= 1e-8
        && square_err <= 1e-8
        && witness.is_none_or(|w| w.abs() <= cross_tol);
    Ok(CheckResult {
        check: Check::IteratedIntegrals,
        passed,
        details: json!({
            "quad_steps": cfg.quad_steps,
            "same_pair_rel_err": same_err,
            "cross_max_abs": cross_max,
            "cross_tolerance": cross_tol,
            "mean_max_rel": mean_max,
            "mean_square_rel_err": square_err,
            "resonant_cross_coefficient": witness,
        }),
    })
}

fn run_check(cfg: &RunConfig, law: &FeedbackLaw, check: Check) -> Result<CheckResult> {
    let p = cfg.exponent();
    match check {
        Check::BracketGenerating => check_brackets(cfg),
        Check::Negdef => {
            let r = certificate_scan(
                law,
                cfg.gamma,
                &certificate_region(cfg),
                cfg.negdef_samples,
                cfg.seed,
            )?;
            Ok(CheckResult {
                check,
                passed: r.passed(),
                details: serde_json::to_value(&r).expect("serializes"),
            })
        }
        Check::GainBound => {
            let region = if p > 1.0 {
                Region::Split {
                    head_dim: brockett::INPUT_DIM,
                    tail_dim: brockett::STATE_DIM - brockett::INPUT_DIM,
                    head_radius: cfg.negdef_radius,
                    tail_radius: cfg.h,
                    r_min: DEFAULT_R_MIN,
                }
            } else {
                certificate_region(cfg)
            };
            let b = certified_gain_bound(law, &region, cfg.gain_samples, cfg.tol_alpha, cfg.seed)?;
            let interval = brockett::stability_gain_range(p, cfg.h)?;
            Ok(CheckResult {
                check,
                passed: b.admits(cfg.gamma),
                details: json!({
                    "gamma": cfg.gamma,
                    "c_ab": b.c_ab,
                    "gamma_max": if b.gamma_max.is_finite() { json!(b.gamma_max) } else { json!("inf") },
                    "admissible": b.admissible,
                    "closed_form_interval": [interval.lower, interval.upper],
                    "near_zero_alpha": digest(&b.report),
                }),
            })
        }
        Check::C1 => {
            let region = Region::Ball {
                dim: brockett::STATE_DIM,
                radius: cfg.c1_radius,
                r_min: DEFAULT_R_MIN,
            };
            let e = check_c1(law, cfg.gamma, &region, cfg.c1_samples, cfg.seed)?;
            Ok(CheckResult {
                check,
                passed: e.passed(),
                details: serde_json::to_value(&e).expect("serializes"),
            })
        }
        Check::CfOrder => {
            let probe = integrator::cf_order_probe(law, &cfg.cf_x0, &cfg.cf_eps)?;
            Ok(CheckResult {
                check,
                passed: (1.3..=1.8).contains(&probe.exponent),
                details: serde_json::to_value(&probe).expect("serializes"),
            })
        }
        Check::IteratedIntegrals => check_oscillators(cfg),
    }
}

pub fn verify(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let start = Instant::now();
    let law = cfg.build_law()?;
    let checks: Vec<Check> = cfg.checks.iter().copied().collect();
    let results: Vec<CheckResult> = {
        use rayon::prelude::*;
        checks
            .par_iter()
            .map(|c| run_check(cfg, &law, *c))
            .collect::<Result<_>>()?
    };
    let all = results.iter().all(|r| r.passed);
    let report = json!({
        "schema": SCHEMA_VERSION,
        "command": "verify",
        "config": cfg,
        "passed": all,
        "checks": results,
    });
    let mut art = Artifacts::new(cfg.output_dir());
    art.add_json("verify.json", &report);
    finish(
        art,
        json!({ "wall_clock_seconds": start.elapsed().as_secs_f64() }),
        if all { EXIT_OK } else { EXIT_FAILED },
        report,
    )
}

#[derive(Parser, Debug)]
#[command(
    name = "oscstab",
    version,
    about = "Oscillatory feedback stabilization of driftless systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Integrate the closed loop and write trajectories and a summary.
    Run(ConfigArgs),
    /// Integrate classical and sampled solutions side by side.
    Compare(ConfigArgs),
    /// Run the hypothesis and expansion checks.
    Verify(ConfigArgs),
}

#[derive(clap::Args, Debug, Default)]
pub struct ConfigArgs {
    /// Flat key = value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub system: Option<String>,
    /// classical, sampled or both.
    #[arg(long)]
    pub mode: Option<String>,
    /// closed or synthesized.
    #[arg(long)]
    pub law: Option<String>,
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long)]
    pub gamma: Option<String>,
    #[arg(long)]
    pub eps: Option<String>,
    #[arg(long = "H")]
    pub h: Option<String>,
    #[arg(long = "T")]
    pub horizon: Option<String>,
    #[arg(long)]
    pub substeps: Option<String>,
    /// Comma-separated multipliers in pair order, or `auto`.
    #[arg(long)]
    pub kappa: Option<String>,
    /// Preset name (fig1-left, fig1-right) or comma-separated state.
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub threshold: Option<String>,
    #[arg(long)]
    pub fit_start: Option<String>,
    #[arg(long)]
    pub fit_end: Option<String>,
    #[arg(long)]
    pub csv_stride: Option<String>,
    #[arg(long)]
    pub negdef_samples: Option<String>,
    #[arg(long)]
    pub negdef_radius: Option<String>,
    #[arg(long)]
    pub gain_samples: Option<String>,
    #[arg(long)]
    pub tol_alpha: Option<String>,
    #[arg(long)]
    pub c1_samples: Option<String>,
    #[arg(long)]
    pub c1_radius: Option<String>,
    #[arg(long)]
    pub bracket_samples: Option<String>,
    #[arg(long)]
    pub cf_eps: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub cf_x0: Option<String>,
    #[arg(long)]
    pub quad_steps: Option<String>,
    /// Comma-separated subset of checks, or `all`.
    #[arg(long)]
    pub checks: Option<String>,
    /// Adds a deliberately resonant cross pair to the iterated-integral check.
    #[arg(long, hide = true)]
    pub resonance_witness: bool,
}

impl ConfigArgs {
    fn overrides(&self) -> Vec<(&'static str, &String)> {
        let fields: [(&'static str, &Option<String>); 27] = [
            ("system", &self.system),
            ("mode", &self.mode),
            ("law", &self.law),
            ("p", &self.p),
            ("gamma", &self.gamma),
            ("eps", &self.eps),
            ("H", &self.h),
            ("T", &self.horizon),
            ("substeps", &self.substeps),
            ("kappa", &self.kappa),
            ("x0", &self.x0),
            ("seed", &self.seed),
            ("out", &self.out),
            ("threshold", &self.threshold),
            ("fit_start", &self.fit_start),
            ("fit_end", &self.fit_end),
            ("csv_stride", &self.csv_stride),
            ("negdef_samples", &self.negdef_samples),
            ("negdef_radius", &self.negdef_radius),
            ("gain_samples", &self.gain_samples),
            ("tol_alpha", &self.tol_alpha),
            ("c1_samples", &self.c1_samples),
            ("c1_radius", &self.c1_radius),
            ("bracket_samples", &self.bracket_samples),
            ("cf_eps", &self.cf_eps),
            ("cf_x0", &self.cf_x0),
            ("quad_steps", &self.quad_steps),
        ];
        let mut out: Vec<_> = fields
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k, v)))
            .collect();
        if let Some(c) = &self.checks {
            out.push(("checks", c));
        }
        out
    }

    /// Defaults, then the file, then the flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text = read_config(path)?;
            cfg.apply_text(&text)?;
        }
        for (k, v) in self.overrides() {
            cfg.set(k, v)?;
        }
        cfg.resonance_witness |= self.resonance_witness;
        Ok(cfg)
    }
}

fn read_config(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read config {}: {e}", path.display())))
}

/// Runs a parsed command line and returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    let (args, op): (&ConfigArgs, fn(&RunConfig) -> Result<Outcome>) = match &cli.command {
        Command::Run(a) => (a, run),
        Command::Compare(a) => (a, compare),
        Command::Verify(a) => (a, verify),
    };
    let outcome = args.resolve().and_then(|cfg| op(&cfg));
    match outcome {
        Ok(o) => {
            eprintln!("wrote {} (exit {})", o.dir.display(), o.code);
            o.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

pub fn main() -> i32 {
    execute(Cli::parse())
}
