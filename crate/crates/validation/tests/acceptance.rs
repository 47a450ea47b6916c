//! End-to-end acceptance checks. Each test writes one PASS/FAIL line to
//! stderr (bypassing output capture) before asserting.

use std::io::Write;
use std::time::Instant;

use mlgame::automata::{expected_increment, run_ensemble, LearningParams, SimConfig};
use mlgame::dynamics::{
    classify_oscillation, integrate, near_equilibrium, observed_instability_delay, probe_delay,
    IntegrationSpec, LearningModel, OscillationKind, OscillationThresholds, ONSET_OFFSET,
};
use mlgame::game::{builtin_game, MultiLevelGame, StateVector, StochasticBimatrix};
use mlgame::stability::{coefficients_at, instability_delay, predict, StabilityResult, REFERENCE_ROWS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(criterion: u32, title: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "acceptance {criterion} [{verdict}] {title}: {detail}");
    assert!(pass, "criterion {criterion} ({title}) failed: {detail}");
}

fn predicted_delay(model: &LearningModel) -> f64 {
    predict(model, StateVector::uniform())
        .unwrap()
        .result
        .tau2()
        .expect("reference rows lose stability at a finite delay")
}

fn random_game(rng: &mut ChaCha8Rng) -> MultiLevelGame {
    let mut bm = || {
        let mut cell = || (rng.gen::<f64>(), rng.gen::<f64>());
        StochasticBimatrix::from_cells([[cell(), cell()], [cell(), cell()]]).unwrap()
    };
    let a = bm();
    MultiLevelGame::new(a, bm())
}

fn random_params(rng: &mut ChaCha8Rng) -> LearningParams {
    let beta = rng.gen_range(0.02..0.99);
    let alpha = rng.gen_range(0.001..beta);
    LearningParams::new(alpha, beta, rng.gen_range(0.001..=1.0)).unwrap()
}

fn random_state(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> StateVector {
    StateVector::from_array([(); 4].map(|_| rng.gen_range(lo..=hi))).unwrap()
}

#[test]
fn criterion_1_predicted_delays() {
    let start = Instant::now();
    let mut worst_tau: f64 = 0.0;
    let mut worst_c: f64 = 0.0;
    let mut lines = Vec::new();
    for row in REFERENCE_ROWS {
        let pred = predict(&row.model().unwrap(), StateVector::uniform()).unwrap();
        let tau = pred.result.tau2().unwrap_or(f64::INFINITY);
        let rel = (tau - row.tau_predicted).abs() / row.tau_predicted;
        let dc = (pred.equilibrium.clustering - row.c_star).abs();
        worst_tau = worst_tau.max(rel);
        worst_c = worst_c.max(dc);
        lines.push(format!("{:.1}/{}", tau, row.tau_predicted));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst_tau <= 0.10 && worst_c <= 0.02 && secs < 5.0;
    report(
        1,
        "predicted delays",
        pass,
        &format!(
            "tau_p {} ; max rel err {worst_tau:.4}, max |dc*| {worst_c:.4}, {secs:.2}s",
            lines.join(" ")
        ),
    );
}

#[test]
fn criterion_2_observed_delays() {
    let th = OscillationThresholds::default();
    let mut worst: f64 = 0.0;
    let mut lines = Vec::new();
    for row in REFERENCE_ROWS {
        let model = row.model().unwrap();
        let tp = predicted_delay(&model);
        let start = near_equilibrium(&model, StateVector::uniform(), ONSET_OFFSET).unwrap();
        let est = observed_instability_delay(&model, start, (tp / 1.5, tp * 1.5), 1.0, &th).unwrap();
        let rel = (est.tau - row.tau_observed).abs() / row.tau_observed;
        worst = worst.max(rel);
        lines.push(format!("{:.1}/{}", est.tau, row.tau_observed));
    }
    report(
        2,
        "observed delays",
        worst <= 0.15,
        &format!("tau_o {} ; max rel err {worst:.4}", lines.join(" ")),
    );
}

#[test]
fn criterion_3_bracketing() {
    let th = OscillationThresholds::default();
    let mut failures = Vec::new();
    let mut lines = Vec::new();
    for (i, row) in REFERENCE_ROWS.iter().enumerate() {
        let model = row.model().unwrap();
        let tp = predicted_delay(&model);
        let start = near_equilibrium(&model, StateVector::uniform(), ONSET_OFFSET).unwrap();
        let below = probe_delay(&model, start, 0.9 * tp, &th).unwrap().kind;
        let above = probe_delay(&model, start, 1.1 * tp, &th).unwrap().kind;
        lines.push(format!("row {}: {}/{}", i + 1, below.name(), above.name()));
        if below != OscillationKind::DampedOscillatory || above != OscillationKind::PersistentOscillatory {
            failures.push(format!("row {}", i + 1));
        }
    }
    let model = REFERENCE_ROWS[1].model().unwrap();
    let verdict = |tau: f64| {
        let traj = integrate(&model, StateVector::uniform(), &IntegrationSpec::new(tau, 20_000.0)).unwrap();
        classify_oscillation(&traj, &th).unwrap().kind
    };
    let (at100, at150) = (verdict(100.0), verdict(150.0));
    lines.push(format!("game 2 tau=100 {} tau=150 {}", at100.name(), at150.name()));
    if at100 != OscillationKind::DampedOscillatory || at150 != OscillationKind::PersistentOscillatory {
        failures.push("game 2 pair".into());
    }
    let detail = if failures.is_empty() {
        lines.join("; ")
    } else {
        format!("{} ; failing: {}", lines.join("; "), failures.join(", "))
    };
    report(3, "damped below / persistent above", failures.is_empty(), &detail);
}

#[test]
fn criterion_4_theta_scaling() {
    let mut exact = true;
    let mut lines = Vec::new();
    for row in REFERENCE_ROWS {
        let model = row.model().unwrap();
        let half = LearningModel::new(model.game.clone(), model.params.with_theta(row.theta / 2.0).unwrap());
        let (a, b) = (predicted_delay(&model), predicted_delay(&half));
        exact &= b == 2.0 * a;
        lines.push(format!("{a:.3}->{b:.3}"));
    }
    let r5 = predicted_delay(&REFERENCE_ROWS[4].model().unwrap());
    let r6 = predicted_delay(&REFERENCE_ROWS[5].model().unwrap());
    let rows_ok = (r5 - 102.0).abs() <= 10.2 && (r6 - 203.0).abs() <= 20.3 && r6 == 2.0 * r5;
    report(
        4,
        "theta scaling",
        exact && rows_ok,
        &format!("{} ; rows 5-6 {r5:.2} -> {r6:.2}", lines.join(" ")),
    );
}

#[test]
fn criterion_5_drift_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let n = 200;
    for i in 0..n {
        let game = if i % 4 == 0 { builtin_game(1 + (i / 4) % 3).unwrap() } else { random_game(&mut rng) };
        let params = random_params(&mut rng);
        let current = random_state(&mut rng, 0.0, 1.0);
        // Half the tuples undelayed, half with an independent aged state.
        let aged = if i % 2 == 0 { current } else { random_state(&mut rng, 0.0, 1.0) };
        let model = LearningModel::new(game.clone(), params);
        let w = model.drift_delayed(&current, &aged);
        let inc = expected_increment(&current, &aged, &game, &params);
        for k in 0..4 {
            worst = worst.max((inc[k] - params.theta * w[k]).abs());
        }
    }
    report(
        5,
        "exact expected increment equals theta*W",
        worst <= 1e-12,
        &format!("{n} tuples, max deviation {worst:.2e}"),
    );
}

#[test]
fn criterion_6_gradients_and_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_rel: f64 = 0.0;
    let mut worst_res: f64 = 0.0;
    let mut crossings = 0;
    let mut n = 0;
    let residual = |c: &mlgame::stability::StabilityCoefficients, w: f64, tau: f64| {
        let y = c.y1 * c.y2;
        let re = c.x1 * c.x2 - w * w - y * (2.0 * w * tau).cos();
        let im = -w * (c.x1 + c.x2) + y * (2.0 * w * tau).sin();
        re.hypot(im)
    };
    // Random games cross the imaginary axis only occasionally; keep drawing
    // until both checks have at least 100 cases.
    while n < 100 || crossings < 100 {
        n += 1;
        let model = LearningModel::new(random_game(&mut rng), random_params(&mut rng));
        let p = random_state(&mut rng, 0.05, 0.95);
        let c = coefficients_at(&model, &p);
        let h = 1e-5;
        let theta = model.params.theta;
        let fd = |row: usize, col: usize| {
            let (mut up, mut dn) = (p.as_array(), p.as_array());
            up[col] += h;
            dn[col] -= h;
            let wu = model.drift(&StateVector::from_array(up).unwrap())[row];
            let wd = model.drift(&StateVector::from_array(dn).unwrap())[row];
            theta * (wu - wd) / (2.0 * h)
        };
        for (analytic, numeric) in [(c.x1, fd(0, 0)), (c.y1, fd(0, 1)), (c.x2, fd(1, 1)), (c.y2, fd(1, 0))] {
            let scale = analytic.abs().max(numeric.abs());
            if scale > 1e-9 * theta {
                worst_rel = worst_rel.max((analytic - numeric).abs() / scale);
            }
        }
        if let Ok(StabilityResult::Unstable { w, tau2, .. }) = instability_delay(&c) {
            crossings += 1;
            worst_res = worst_res.max(residual(&c, w, tau2));
        }
    }
    for row in REFERENCE_ROWS {
        let pred = predict(&row.model().unwrap(), StateVector::uniform()).unwrap();
        if let StabilityResult::Unstable { w, tau2, .. } = pred.result {
            crossings += 1;
            worst_res = worst_res.max(residual(&pred.coefficients, w, tau2));
        }
    }
    report(
        6,
        "gradient check and marginal residual",
        worst_rel <= 1e-6 && worst_res < 1e-9 && crossings >= 100,
        &format!("{n} instances, max rel err {worst_rel:.2e}; {crossings} crossings, max residual {worst_res:.2e}"),
    );
}

#[test]
fn criterion_7_game1_bistability() {
    let model = LearningModel::new(builtin_game(1).unwrap(), LearningParams::new(0.02, 0.4, 0.1).unwrap());
    let grid = [0.2, 0.5, 0.8];
    let (mut coalition, mut outside, mut off_origin, mut other) = (0, 0, 0, 0);
    for &a in &grid {
        for &b in &grid {
            for &g in &grid {
                for &h in &grid {
                    let start = StateVector::new(a, b, g, h).unwrap();
                    let spec = IntegrationSpec::new(0.0, 20_000.0).with_step(1.0).recording_every(20_000);
                    let end = *integrate(&model, start, &spec).unwrap().last().unwrap();
                    let p = end.as_array();
                    if p.iter().all(|&x| x > 0.99) {
                        coalition += 1;
                    } else if p[0] < 0.01 && p[1] < 0.01 && end.clustering() < 0.01 {
                        outside += 1;
                        if p[2].max(p[3]) > 0.05 {
                            off_origin += 1;
                        }
                    } else {
                        other += 1;
                    }
                }
            }
        }
    }
    report(
        7,
        "game 1 bistability",
        coalition > 0 && outside > 0,
        &format!("81 starts: {coalition} coalition, {outside} non-coalition ({off_origin} with groups away from the origin), {other} unresolved"),
    );
}

#[test]
fn criterion_8_monte_carlo_matches_mean_dynamics() {
    let stages = 200_000;
    let every = 100;
    let params = LearningParams::new(0.02, 0.4, 0.001).unwrap();
    let mut sim = SimConfig::new(builtin_game(2).unwrap(), params);
    sim.horizon = stages;
    sim.ensemble_size = 100;
    sim.decimation = every;
    sim.seed = 8;
    let summary = run_ensemble(&sim).unwrap();

    let model = LearningModel::new(builtin_game(2).unwrap(), params);
    let spec = IntegrationSpec::new(0.0, stages as f64).with_step(1.0).recording_every(every);
    let ode = integrate(&model, StateVector::uniform(), &spec).unwrap();
    assert_eq!(ode.times, summary.times);
    let sup = summary
        .mean
        .iter()
        .zip(&ode.states)
        .map(|(m, s)| StateVector::from_array(*m).unwrap().max_abs_diff(s))
        .fold(0.0, f64::max);
    report(
        8,
        "ensemble mean tracks the mean dynamics",
        sup <= 0.05,
        &format!("100 runs x {stages} stages, sup-norm gap {sup:.4}"),
    );
}

#[test]
fn criterion_9_high_delay_stays_bounded() {
    let model = REFERENCE_ROWS[1].model().unwrap();
    let traj = integrate(&model, StateVector::uniform(), &IntegrationSpec::new(1000.0, 1e5)).unwrap();
    let inside = traj
        .states
        .iter()
        .all(|s| s.as_array().iter().all(|x| (0.0..=1.0).contains(x)));
    let v = classify_oscillation(&traj, &OscillationThresholds::default()).unwrap();
    let ok_kind = matches!(v.kind, OscillationKind::BoundedNonperiodic | OscillationKind::PersistentOscillatory);
    report(
        9,
        "high delay stays bounded and never settles",
        inside && ok_kind,
        &format!("inside cube: {inside}, verdict {} (amplitude {:.3})", v.kind.name(), v.amplitude),
    );
}
