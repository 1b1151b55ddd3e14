mod common;

use common::*;
use oscstab::brockett::{default_law, Preset};
use oscstab::controller::OscillatorAssignment;
use oscstab::integrator::*;

fn head_norm(x: &[f64]) -> f64 {
    norm(&x[..4])
}

#[test]
fn zero_gain_flows_match_exact_formulas() {
    // γ = 0 leaves ẋ_head = −x_head (classical) or piecewise constant input
    // (sampled); the tail stays put in both.
    let law = default_law(1.0, 0.0, 0.1).unwrap();
    let x0 = Preset::Fig1Left.initial_state();
    let a = head_norm(&x0);
    let c = integrate_classical(&law, &x0, 5.0, 400).unwrap();
    let s = integrate_sampled(&law, &x0, 5.0, 400).unwrap();
    for (j, (wc, ws)) in c.windows.iter().zip(&s.windows).enumerate() {
        let xc = &c.states[c.boundary_index(j)];
        let xs = &s.states[s.boundary_index(j)];
        let exact_c = a * (-(j as f64) * 0.1).exp();
        let exact_s = a * 0.9f64.powi(j as i32);
        assert!(
            (head_norm(xc) - exact_c).abs() < 1e-11,
            "classical window {j}"
        );
        assert!(
            (head_norm(xs) - exact_s).abs() < 1e-12,
            "sampled window {j}"
        );
        assert!(dist(&xc[4..], &x0[4..]) < 1e-12);
        assert!(dist(&xs[4..], &x0[4..]) < 1e-12);
        assert_eq!(wc.t, ws.t);
    }
}

#[test]
fn zero_gain_remainder_matches_taylor_oracle() {
    let x0 = Preset::Fig1Left.initial_state();
    let a2 = x0[..4].iter().map(|v| v * v).sum::<f64>();
    let mut last = f64::INFINITY;
    for eps in [0.1, 0.05, 0.025] {
        let law = default_law(1.0, 0.0, eps).unwrap();
        let t = integrate_classical(&law, &x0, eps, 400).unwrap();
        let r = increment_diagnostics(&t).r_hat[0];
        let oracle = a2 * ((-2.0 * eps).exp_m1() / (2.0 * eps) + 1.0) / eps.sqrt();
        assert!(
            (r - oracle).abs() < 1e-8 * oracle.abs().max(1.0),
            "eps {eps}: {r} vs {oracle}"
        );
        assert!(r.abs() < last);
        last = r.abs();
    }
}

#[test]
fn zero_state_is_an_equilibrium() {
    let law = default_law(1.0, 0.5, 0.1).unwrap();
    for mode in [SolutionMode::Classical, SolutionMode::Sampled] {
        let t = integrate(&law, &[0.0; 10], 1.0, 400, mode).unwrap();
        assert_eq!(t.terminal_norm(), 0.0);
        assert!(t
            .windows
            .iter()
            .all(|w| w.value == 0.0 && w.certificate == 0.0));
        assert!(increment_diagnostics(&t).r_hat.iter().all(|r| *r == 0.0));
    }
}

#[test]
fn boundaries_are_hit_exactly() {
    let law = default_law(1.0, 0.5, 0.1).unwrap();
    let t = integrate_classical(&law, &Preset::Fig1Left.initial_state(), 2.0, 400).unwrap();
    assert_eq!(t.window_count(), 20);
    assert_eq!(t.times.len(), 20 * 400 + 1);
    for w in &t.windows {
        assert_eq!(t.times[t.boundary_index(w.j)], w.j as f64 * 0.1);
        assert_eq!(w.t, w.j as f64 * 0.1);
    }
    assert!(t.windows.last().unwrap().r_hat.is_none());
    assert!(t.windows[..20].iter().all(|w| w.r_hat.is_some()));
}

#[test]
fn substep_floor_tracks_largest_multiplier() {
    let law = default_law(1.0, 0.5, 0.1).unwrap();
    let x0 = Preset::Fig1Left.initial_state();
    assert!(integrate_classical(&law, &x0, 1.0, 299).is_err());
    assert!(integrate_classical(&law, &x0, 1.0, 300).is_ok());
    assert!(integrate_classical(&law, &[1.0; 3], 1.0, 400).is_err());
    assert!(integrate_classical(&law, &x0, -1.0, 400).is_err());
}

#[test]
fn runaway_gain_sets_divergence_flag() {
    let law = default_law(1.0, 40.0, 0.1).unwrap();
    let t = integrate_classical(&law, &Preset::Fig1Left.initial_state(), 5.0, 400).unwrap();
    assert!(t.diverged);
    assert!(t
        .norms
        .iter()
        .all(|r| r.is_finite() && *r <= DIVERGENCE_NORM));
}

#[test]
fn csv_layout() {
    let law = default_law(1.0, 0.5, 0.1).unwrap();
    let t = integrate_classical(&law, &Preset::Fig1Left.initial_state(), 0.2, 400).unwrap();
    let mut buf = Vec::new();
    t.write_csv(&mut buf, 100).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,x1,x2,x3,x4,x5,x6,x7,x8,x9,x10,V,norm");
    assert_eq!(lines.len(), 1 + 9);
    let last: Vec<f64> = lines
        .last()
        .unwrap()
        .split(',')
        .map(|s| s.parse().unwrap())
        .collect();
    assert_eq!(last.len(), 13);
    assert_eq!(last[0], 0.2);
    assert_eq!(&last[1..11], t.terminal_state());
    let json: serde_json::Value = serde_json::from_str(&t.windows_json()).unwrap();
    assert_eq!(json[0]["j"], 0);
    assert!(json[0]["W"].as_f64().unwrap() < 0.0);
    assert!(json[2]["r_hat"].is_null());
}

#[test]
fn expansion_prediction_at_rest_and_order() {
    let law = default_law(1.0, 0.5, 0.1).unwrap();
    let p = chen_fliess_predict(&law, &[0.0; 10]).unwrap();
    assert!(p.predicted.iter().all(|v| *v == 0.0));
    let mut x0 = vec![0.0; 10];
    x0[0] = 0.5;
    x0[4] = 1.0;
    let probe = cf_order_probe(&law, &x0, &[0.1, 0.05, 0.025]).unwrap();
    assert!(probe.exponent >= 1.3, "{probe:?}");
    assert!(cf_order_probe(&law, &x0, &[0.1, 0.05]).is_err());
    assert!(cf_order_probe(&law, &x0, &[0.05, 0.1, 0.025]).is_err());
}

#[test]
fn resonant_multipliers_couple() {
    let a = antisymmetric_coefficient(3, 3, 0.1, 10_000).unwrap();
    assert!((a + 0.2).abs() < 1e-6);
    let osc = OscillatorAssignment::new(&oscstab::brockett::pair_set(), 0.1).unwrap();
    let cross = iterated_integral_check(&osc, 0, 4, 10_000).unwrap();
    assert!(cross.abs() < 1e-12);
}
