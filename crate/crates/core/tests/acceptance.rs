//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test --test acceptance -- 1 2 11`.

use std::path::Path;
use std::process::Command;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use rsqc::dynprog::generator::{generator_oracle, Cylindrical};
use rsqc::dynprog::control::control_spacing;
use rsqc::dynprog::{BackwardStep, GridConfig, Mode, Policy, ValueGrid};
use rsqc::filters::{
    belavkin_step, belavkin_unnormalized_step, bloch_rn_step, bloch_rs_step, rs_filter_eta_step, rs_filter_step,
    BlochState,
};
use rsqc::io::{RunConfig, Table};
use rsqc::montecarlo::{
    estimate_cost_rn, estimate_cost_rs_physical, estimate_cost_rs_reference, propagate_master, ControlLaw,
    ControllerHandle, CostReport, Measure,
};
use rsqc::operator::pauli::{proj_up, sigma_x, sigma_y, sigma_z};
use rsqc::stochastic::NoiseStream;
use rsqc::{two_level_model, ModelSpec, Operator, StateMatrix, TwoLevelParams};

const UP: [f64; 3] = [0.0, 0.0, 1.0];
const PATHS: usize = 10_000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn state_from_bloch(r: [f64; 3]) -> StateMatrix {
    let op = (Operator::identity(2) + sigma_x().scale(r[0]) + sigma_y().scale(r[1]) + sigma_z().scale(r[2])).scale(0.5);
    StateMatrix::new(op, false).unwrap()
}

fn bloch_of(op: &Operator) -> [f64; 4] {
    let pair = |x: &Operator| (*x * *op).trace().re;
    [op.trace().re, pair(&sigma_x()), pair(&sigma_y()), pair(&sigma_z())]
}

/// A bounded feedback law on the normalized Bloch vector.
fn feedback(r: [f64; 4]) -> Complex64 {
    let n = r[0];
    c(1.5 * r[1] / n + 0.4, -1.2 * r[2] / n + 0.3 * r[3] / n)
}

fn wiener_path(seed: u64, index: u64, n: usize, dt: f64) -> Vec<f64> {
    let mut s = NoiseStream::new(seed, index);
    (0..n).map(|_| s.wiener_increment(dt)).collect()
}

// --- shared dynamic-programming solves ----------------------------------

struct Solved {
    value: ValueGrid,
    policy: Arc<Policy>,
    seconds: f64,
}

fn default_params() -> TwoLevelParams {
    TwoLevelParams::default()
}

fn solve(mode: Mode) -> Solved {
    let start = Instant::now();
    let (value, policy) = rsqc::dynprog::backward_solve(&default_params(), &GridConfig::default(), mode)
        .expect("default grid solves");
    Solved {
        value,
        policy: Arc::new(policy),
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn rs_solved() -> &'static Solved {
    static CELL: OnceLock<Solved> = OnceLock::new();
    CELL.get_or_init(|| solve(Mode::RiskSensitive))
}

fn rn_solved() -> &'static Solved {
    static CELL: OnceLock<Solved> = OnceLock::new();
    CELL.get_or_init(|| solve(Mode::RiskNeutral))
}

fn policy_controller(s: &Solved) -> ControllerHandle {
    ControllerHandle::from_policy(s.policy.clone(), UP).aligned_with(&default_params())
}

const MC_SEED: u64 = 20_240_601;

fn rs_policy_rs_ref() -> &'static CostReport {
    static CELL: OnceLock<CostReport> = OnceLock::new();
    CELL.get_or_init(|| {
        estimate_cost_rs_reference(&default_params(), &policy_controller(rs_solved()), UP, PATHS, MC_SEED).unwrap()
    })
}

// --- criteria ------------------------------------------------------------

fn reduction_identities() -> Outcome {
    let dt = 1e-3;
    let p0 = TwoLevelParams {
        mu: 0.0,
        dt,
        ..Default::default()
    };
    let spec = two_level_model(&p0).unwrap();
    let n = spec.n_steps();
    let mut worst_matrix: f64 = 0.0;
    for seed in 0..5 {
        let dys = wiener_path(11, seed, n, dt);
        let mut a = state_from_bloch([0.3, -0.2, 0.6]);
        let mut b = a;
        for dy in &dys {
            let u = feedback(bloch_of(a.op()));
            a = rs_filter_step(&spec, &a, u, *dy).unwrap();
            b = belavkin_unnormalized_step(&spec, &b, u, *dy).unwrap();
            worst_matrix = worst_matrix.max(a.op().max_abs_diff(b.op()));
        }
    }
    let pa = TwoLevelParams {
        a: 0.0,
        mu: 0.3,
        dt,
        ..Default::default()
    };
    let mut worst_bloch: f64 = 0.0;
    for seed in 0..5 {
        let dys = wiener_path(12, seed, n, dt);
        let mut s = BlochState::from_vector([0.3, -0.2, 0.6]);
        let mut r = s;
        for dy in &dys {
            let u = feedback([s.n, s.x, s.y, s.z]);
            s = bloch_rs_step(&pa, &s, u, *dy).unwrap();
            r = bloch_rn_step(&pa, &r, u, *dy).unwrap();
            for (x, y) in [(s.n, r.n), (s.x, r.x), (s.y, r.y), (s.z, r.z)] {
                worst_bloch = worst_bloch.max((x - y).abs());
            }
        }
    }
    outcome(
        worst_matrix <= 1e-12 && worst_bloch <= 1e-12,
        format!("sup|rs(mu=0) - belavkin| = {worst_matrix:.1e}, sup|bloch rs(a=0) - rn| = {worst_bloch:.1e} (tol 1e-12)"),
    )
}

fn matrix_bloch_equivalence() -> Outcome {
    let p = TwoLevelParams {
        dt: 1e-3,
        ..Default::default()
    };
    let spec = two_level_model(&p).unwrap();
    let n = spec.n_steps();
    let worst = (0..50u64)
        .into_par_iter()
        .map(|seed| {
            let dys = wiener_path(21, seed, n, p.dt);
            let r0 = [0.5 * (seed as f64 * 0.7).cos(), 0.5 * (seed as f64 * 0.7).sin(), 0.4];
            let mut m = state_from_bloch(r0);
            let mut b = BlochState::from_vector(r0);
            let mut worst: f64 = 0.0;
            for dy in &dys {
                let u = feedback(bloch_of(m.op()));
                m = rs_filter_step(&spec, &m, u, *dy).unwrap();
                b = bloch_rs_step(&p, &b, u, *dy).unwrap();
                worst = worst.max(m.op().max_abs_diff(&b.reconstruct()));
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    outcome(worst <= 1e-10, format!("sup-norm over 50 seeds = {worst:.1e} (tol 1e-10)"))
}

fn master_consistency() -> Outcome {
    let p = TwoLevelParams::default();
    let spec = two_level_model(&p).unwrap();
    let r0 = [0.6, -0.3, 0.5];
    let checkpoints = [1000usize, 2500, 5000];
    let zero = |_: f64| c(0.0, 0.0);
    let samples: Vec<Vec<[f64; 3]>> = (0..PATHS as u64)
        .into_par_iter()
        .map(|i| {
            let mut stream = NoiseStream::new(31, i);
            let mut pi = state_from_bloch(r0);
            let mut out = Vec::new();
            for k in 1..=spec.n_steps() {
                pi = belavkin_step(&spec, &pi, c(0.0, 0.0), stream.wiener_increment(p.dt)).unwrap().0;
                if checkpoints.contains(&k) {
                    let b = bloch_of(pi.op());
                    out.push([b[1], b[2], b[3]]);
                }
            }
            out
        })
        .collect();
    let ode = propagate_master(&spec, &state_from_bloch(r0), &zero, p.t_final, p.dt).unwrap();
    let mut worst_sigma: f64 = 0.0;
    let mut ok = true;
    for (j, &k) in checkpoints.iter().enumerate() {
        let b = bloch_of(ode[k].op());
        for comp in 0..3 {
            let xs: Vec<f64> = samples.iter().map(|s| s[j][comp]).collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
            let se = (var / xs.len() as f64).sqrt();
            let diff = (mean - b[comp + 1]).abs();
            ok &= diff <= 3.0 * se + 1e-12;
            if se > 0.0 {
                worst_sigma = worst_sigma.max(diff / se);
            }
        }
    }
    let up = propagate_master(&spec, &state_from_bloch(UP), &zero, p.t_final, p.dt).unwrap();
    let analytic = up
        .iter()
        .enumerate()
        .map(|(k, s)| (bloch_of(s.op())[3] - (-1.0 + 2.0 * (-(k as f64) * p.dt).exp())).abs())
        .fold(0.0, f64::max);
    outcome(
        ok && analytic <= 1e-3,
        format!("worst |mean - ode| = {worst_sigma:.2} SE (tol 3), sup|z - (-1 + 2e^-t)| = {analytic:.1e} (tol 1e-3)"),
    )
}

fn reference_martingale() -> Outcome {
    let p = TwoLevelParams {
        mu: 0.0,
        ..Default::default()
    };
    let ns: Vec<f64> = (0..PATHS as u64)
        .into_par_iter()
        .map(|i| {
            let mut stream = NoiseStream::new(41, i);
            let mut s = BlochState::up();
            for _ in 0..p.n_steps() {
                let u = feedback([s.n, s.x, s.y, s.z]);
                s = bloch_rs_step(&p, &s, u, stream.wiener_increment(p.dt)).unwrap();
            }
            s.n
        })
        .collect();
    let n = ns.len() as f64;
    let mean = ns.iter().sum::<f64>() / n;
    let se = (ns.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    outcome(
        (mean - 1.0).abs() <= 3.0 * se,
        format!("E0[n(T)] = {mean:.5} ± {se:.5}, |dev| = {:.2} SE (tol 3)", (mean - 1.0).abs() / se),
    )
}

fn estimator_equivalence() -> Outcome {
    let p = default_params();
    let rs_ref = rs_policy_rs_ref();
    let rs_phys = rs_policy_rs_phys();
    let rn_ctrl = policy_controller(rn_solved());
    let rn_phys = rn_policy_rn_phys();
    let rn_ref = estimate_cost_rn(&p, &rn_ctrl, UP, PATHS, MC_SEED, Measure::Reference).unwrap();
    let rs_gap = (rs_ref.estimate - rs_phys.estimate).abs();
    let rn_gap = (rn_ref.estimate - rn_phys.estimate).abs();
    let rs_ci = rs_ref.joint_ci95(rs_phys);
    let rn_ci = rn_ref.joint_ci95(rn_phys);
    outcome(
        rs_gap <= rs_ci && rn_gap <= rn_ci,
        format!(
            "rs-ref {:.5}±{:.5} vs rs-phys {:.5}±{:.5} (gap {rs_gap:.5}, ci {rs_ci:.5}); \
             rn-ref {:.4}±{:.4} vs rn-phys {:.4}±{:.4} (gap {rn_gap:.4}, ci {rn_ci:.4})",
            rs_ref.estimate,
            rs_ref.std_error,
            rs_phys.estimate,
            rs_phys.std_error,
            rn_ref.estimate,
            rn_ref.std_error,
            rn_phys.estimate,
            rn_phys.std_error
        ),
    )
}

fn rs_policy_rs_phys() -> &'static CostReport {
    static CELL: OnceLock<CostReport> = OnceLock::new();
    CELL.get_or_init(|| {
        estimate_cost_rs_physical(&default_params(), &policy_controller(rs_solved()), UP, PATHS, MC_SEED).unwrap()
    })
}

fn rn_policy_rn_phys() -> &'static CostReport {
    static CELL: OnceLock<CostReport> = OnceLock::new();
    CELL.get_or_init(|| {
        estimate_cost_rn(&default_params(), &policy_controller(rn_solved()), UP, PATHS, MC_SEED, Measure::Physical)
            .unwrap()
    })
}

fn small_mu_expansion() -> Outcome {
    let base = default_params();
    let ctrl = ControllerHandle::new(ControlLaw::Constant(c(1.0, 0.0)), rsqc::filters::FilterKind::Standard, base, UP);
    let rn = estimate_cost_rn(&base, &ctrl, UP, PATHS, 61, Measure::Physical).unwrap();
    let err = |mu: f64| {
        let j = estimate_cost_rs_physical(&base.with_mu(mu), &ctrl, UP, PATHS, 61).unwrap();
        ((j.estimate - 1.0) / mu - rn.estimate).abs()
    };
    let (e2, e3) = (err(1e-2), err(1e-3));
    outcome(
        e3 < e2,
        format!(
            "J_rn = {:.5}; |slope - J_rn| = {e2:.2e} at mu=1e-2, {e3:.2e} at mu=1e-3 (ratio {:.1})",
            rn.estimate,
            e2 / e3
        ),
    )
}

fn dp_mc_agreement() -> Outcome {
    let rs = rs_solved();
    let rn = rn_solved();
    let v = rs.value.initial_value(UP);
    let w = rn.value.initial_value(UP);
    let jr = rs_policy_rs_ref();
    let jn = rn_policy_rn_phys();
    let rel_rs = (jr.estimate - v).abs() / v.abs();
    let rel_rn = (jn.estimate - w).abs() / w.abs();
    outcome(
        rel_rs <= 0.05 && rel_rn <= 0.05,
        format!(
            "rs: dp {v:.5} vs mc {:.5}±{:.5} ({:.2}%, rs-phys {:.5}); rn: dp {w:.5} vs mc {:.5}±{:.5} ({:.2}%); solves {:.0}s + {:.0}s",
            jr.estimate,
            jr.std_error,
            100.0 * rel_rs,
            rs_policy_rs_phys().estimate,
            jn.estimate,
            jn.std_error,
            100.0 * rel_rn,
            rs.seconds,
            rn.seconds
        ),
    )
}

fn closed_form_minimizer() -> Outcome {
    let p = default_params();
    let cfg = GridConfig::default();
    let spacing = control_spacing(p.u_max, cfg.control_points);
    let mut rng = ChaCha8Rng::seed_from_u64(81);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (mode, solved) in [(Mode::RiskSensitive, rs_solved()), (Mode::RiskNeutral, rn_solved())] {
        let stepper = BackwardStep::new(&p, &cfg, mode).unwrap();
        let lattice = *stepper.lattice();
        let slices = &solved.value.values;
        let interior: Vec<usize> = stepper
            .active_nodes()
            .iter()
            .copied()
            .filter(|&node| {
                let q = lattice.coords(node);
                (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt() < 1.0 - lattice.max_spacing()
                    && lattice.node_gradient(&slices[0], node).is_some()
            })
            .collect();
        for _ in 0..100 {
            let node = interior[rng.gen_range(0..interior.len())];
            let next = &slices[rng.gen_range(1..slices.len())];
            let closed = stepper.closed_form_at(next, stepper.evaluation_point(node)).u;
            let grid = stepper.grid_argmin(next, node).u;
            worst = worst.max((closed - grid).norm());
            checked += 1;
        }
    }
    outcome(
        worst <= spacing,
        format!("{checked} nodes, max |u_closed - u_grid| = {worst:.3} (one grid spacing = {spacing:.3})"),
    )
}

fn policy_dominance() -> Outcome {
    let p = default_params();
    let dp = rs_policy_rs_ref();
    let zero = ControllerHandle::new(ControlLaw::Zero, rsqc::filters::FilterKind::Standard, p, UP);
    let one = ControllerHandle::new(ControlLaw::Constant(c(1.0, 0.0)), rsqc::filters::FilterKind::Standard, p, UP);
    let rn = policy_controller(rn_solved());
    let mut ok = true;
    let mut parts = vec![format!("dp {:.5}±{:.5}", dp.estimate, dp.std_error)];
    for (name, ctrl) in [("u=0", zero), ("u=1", one), ("rn policy", rn)] {
        let j = estimate_cost_rs_reference(&p, &ctrl, UP, PATHS, MC_SEED).unwrap();
        let joint = (dp.std_error.powi(2) + j.std_error.powi(2)).sqrt();
        ok &= dp.estimate <= j.estimate + 2.0 * joint;
        parts.push(format!("{name} {:.5}±{:.5}", j.estimate, j.std_error));
    }
    outcome(ok, parts.join(", "))
}

fn generator_check() -> Outcome {
    let fine = |mu: f64| {
        two_level_model(&TwoLevelParams {
            mu,
            t_final: 1.0,
            dt: 1e-5,
            ..Default::default()
        })
        .unwrap()
    };
    let h = 1e-4;
    let linear_grad = |_: &[f64]| vec![1.0];
    let linear_hess = |_: &[f64]| vec![vec![0.0]];
    let id = |a: &[f64]| a[0];
    let sq = |a: &[f64]| a[0] * a[0];
    let sq_grad = |a: &[f64]| vec![2.0 * a[0]];
    let sq_hess = |_: &[f64]| vec![vec![2.0]];
    let trace = Cylindrical {
        observables: vec![Operator::identity(2)],
        g: &id,
        gradient: &linear_grad,
        hessian: &linear_hess,
    };
    let z = Cylindrical {
        observables: vec![sigma_z()],
        g: &id,
        gradient: &linear_grad,
        hessian: &linear_hess,
    };
    let x2 = Cylindrical {
        observables: vec![sigma_x()],
        g: &sq,
        gradient: &sq_grad,
        hessian: &sq_hess,
    };
    let generic = state_from_bloch([0.4, 0.3, 0.2]);
    let up = StateMatrix::new(proj_up(), false).unwrap();
    let cases: [(&str, &ModelSpec, &Cylindrical, StateMatrix, Complex64); 3] = [
        ("tr", &fine(0.0), &trace, generic, c(0.5, 0.0)),
        ("<sz>", &fine(0.0), &z, up, c(0.0, 0.0)),
        ("<sx>^2", &fine(0.1), &x2, generic, c(0.7, 0.3)),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, (name, spec, f, sigma, u)) in cases.into_iter().enumerate() {
        let est = generator_oracle(spec, f, &sigma, u, h, PATHS, 91 + i as u64).unwrap();
        ok &= (est.estimate - est.analytic).abs() <= 3.0 * est.std_error + 1e-12;
        parts.push(format!(
            "{name}: mc {:.4}±{:.4} vs analytic {:.4}",
            est.estimate, est.std_error, est.analytic
        ));
    }
    outcome(ok, parts.join("; "))
}

/// `−i[H,σ] + 𝒟[L]σ + 𝒟[M]σ + ½μ{C1, σ}` assembled from the model operators.
fn deterministic_drift(spec: &ModelSpec, sigma: &Operator, u: Complex64) -> Operator {
    let dissipator = |x: &Operator| *x * *sigma * x.adjoint() - (x.adjoint() * *x).anticommutator(sigma).scale(0.5);
    let h = spec.hamiltonian(u);
    h.commutator(sigma) * c(0.0, -1.0)
        + dissipator(spec.l())
        + dissipator(spec.m())
        + spec.c1(u).anticommutator(sigma).scale(0.5 * spec.mu())
}

fn efficiency_limits() -> Outcome {
    let p = default_params();
    let spec = two_level_model(&p).unwrap();
    let n = spec.n_steps();
    let mut bitwise = true;
    for seed in 0..5 {
        let dys = wiener_path(111, seed, n, p.dt);
        let mut a = state_from_bloch([0.2, 0.1, 0.3]);
        let mut b = a;
        for dy in &dys {
            let u = feedback(bloch_of(a.op()));
            a = rs_filter_eta_step(&spec, &a, u, *dy).unwrap();
            b = rs_filter_step(&spec, &b, u, *dy).unwrap();
            bitwise &= a == b;
        }
    }
    let blind = spec.with_eta(0.0).unwrap();
    let signal = |k: usize| c(0.8 * (k as f64 * p.dt).cos(), 0.8 * (k as f64 * p.dt).sin());
    let run = |seed: u64| {
        let dys = wiener_path(112, seed, n, p.dt);
        let mut s = StateMatrix::new(proj_up(), false).unwrap();
        let mut path = vec![s];
        for (k, dy) in dys.iter().enumerate() {
            s = rs_filter_eta_step(&blind, &s, signal(k), *dy).unwrap();
            path.push(s);
        }
        path
    };
    let (first, second) = (run(1), run(2));
    let seed_free = first == second;
    let mut ode = *StateMatrix::new(proj_up(), false).unwrap().op();
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let u = signal(k);
        // The identity part ½b|u|² of C1 enters as an exact exponential factor.
        let scalar = 0.5 * p.b * u.norm_sqr();
        let rest = deterministic_drift(&blind, &ode, u) - ode.scale(p.mu * scalar);
        ode = (ode + rest.scale(p.dt)).scale((p.mu * scalar * p.dt).exp());
        worst = worst.max(first[k + 1].op().max_abs_diff(&ode));
    }
    outcome(
        bitwise && seed_free && worst <= 1e-8,
        format!("eta=1 bitwise: {bitwise}; eta=0 seed-independent: {seed_free}, sup|filter - ode| = {worst:.1e} (tol 1e-8)"),
    )
}

fn cli_reproducibility() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::example();
    cfg.model.horizon = 0.25;
    cfg.dp = GridConfig {
        nx: 21,
        ny: 21,
        nz: 21,
        dt: 5e-3,
        control_points: 17,
        store_stride: 5,
        ..Default::default()
    };
    cfg.mc.n_paths = 64;
    let config = dir.path().join("rsqc.toml");
    std::fs::write(&config, cfg.to_toml()).unwrap();
    let bin = env!("CARGO_BIN_EXE_rsqc");
    let run_all = |out: &Path, threads: &str| -> Result<(), String> {
        let policy = |m: &str| out.join(format!("policy_{m}.grid")).display().to_string();
        let commands: Vec<Vec<String>> = vec![
            vec!["solve".into(), "--mode".into(), "rs".into()],
            vec!["solve".into(), "--mode".into(), "rn".into()],
            vec!["simulate".into(), "--policy".into(), policy("rs"), "--n-paths".into(), "3".into()],
            vec!["evaluate".into(), "--policy".into(), policy("rs"), "--estimator".into(), "rs-ref".into()],
            vec!["evaluate".into(), "--zero-control".into(), "--estimator".into(), "rn-phys".into()],
            vec!["master".into()],
            vec![
                "compare".into(),
                "--policy-a".into(),
                policy("rs"),
                "--policy-b".into(),
                policy("rn"),
                "--mu".into(),
                "0,0.1".into(),
            ],
        ];
        for args in commands {
            let status = Command::new(bin)
                .args(&args)
                .arg("--config")
                .arg(&config)
                .arg("--out")
                .arg(out)
                .arg("--seed")
                .arg("7")
                .arg("--threads")
                .arg(threads)
                .output()
                .map_err(|e| e.to_string())?;
            if !status.status.success() {
                return Err(format!("{args:?}: {}", String::from_utf8_lossy(&status.stderr)));
            }
        }
        Ok(())
    };
    let outs = [("a", "1"), ("b", "2"), ("c", "1")];
    for (name, threads) in outs {
        if let Err(e) = run_all(&dir.path().join(name), threads) {
            return outcome(false, format!("command failed: {e}"));
        }
    }
    let files = |name: &str| {
        let mut v: Vec<_> = std::fs::read_dir(dir.path().join(name))
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        v.sort();
        v
    };
    let reference = files("a");
    let mut mismatched = Vec::new();
    for other in ["b", "c"] {
        let got = files(other);
        if got.len() != reference.len() {
            mismatched.push(format!("{other}: file count"));
            continue;
        }
        for (x, y) in reference.iter().zip(&got) {
            if std::fs::read(x).unwrap() != std::fs::read(y).unwrap() {
                mismatched.push(format!("{other}/{}", y.file_name().unwrap().to_string_lossy()));
            }
        }
    }
    let compare = Table::parse(&std::fs::read_to_string(dir.path().join("a/compare.csv")).unwrap()).unwrap();
    outcome(
        mismatched.is_empty() && compare.rows().len() == 2,
        format!(
            "{} files x 3 runs (threads 1, 2, 1); mismatches: {:?}",
            reference.len(),
            mismatched
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("reduction identities", reduction_identities),
        ("matrix/bloch equivalence", matrix_bloch_equivalence),
        ("master-equation consistency", master_consistency),
        ("reference-measure martingale", reference_martingale),
        ("estimator equivalence", estimator_equivalence),
        ("small-mu expansion", small_mu_expansion),
        ("dp/mc value agreement", dp_mc_agreement),
        ("closed-form minimizer", closed_form_minimizer),
        ("policy dominance", policy_dominance),
        ("generator oracle", generator_check),
        ("efficiency limits", efficiency_limits),
        ("reproducibility", cli_reproducibility),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        failed += usize::from(!result.pass);
        println!(
            "criterion {id:2} {:<30} {} [{:.1}s] {}",
            name,
            if result.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            result.detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
