//! Acceptance criteria, one `[PASS]`/`[FAIL]` line each.
//!
//! Runs without the libtest harness so the report is always printed; the
//! process exits nonzero if any gating criterion fails.

mod common;

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use common::{
    dense_phi, max_abs, random_spec, reference_spec, rng, uniform_matrix, uniform_vector,
    well_conditioned,
};
use mflqr_core::cli::parse_config;
use mflqr_core::mfsim::{
    compare_policies, ensemble, exact_problem_offset, nominal_problem_offset,
    normal_initial_states, paired_objectives, predictive_variance_check, EnsembleConfig, Policy,
};
use mflqr_core::pbd::{
    averaging_matrix, mean_field, phi, replicate, split_blocks, PseudoBlockMatrix,
};
use mflqr_core::riccati::{
    min_eigenvalue, reconstruct_centralized, risk_augmentation, solve_centralized,
    solve_mean_field, MeanFieldGainSchedule,
};
use mflqr_core::verify::schedule_deviation;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

const Z_LIMIT: f64 = 4.0;

struct Outcome {
    name: &'static str,
    passed: bool,
    /// Whether a failure fails the run.
    gating: bool,
    summary: String,
    details: Vec<String>,
}

impl Outcome {
    fn new(name: &'static str, passed: bool, summary: String) -> Self {
        Self {
            name,
            passed,
            gating: true,
            summary,
            details: Vec::new(),
        }
    }
}

fn equivalence() -> Vec<Outcome> {
    const SPECS: usize = 250;
    let mut r = rng(0xE0);
    let mut worst = 0.0f64;
    let mut worst_parts = String::new();
    for _ in 0..SPECS {
        let spec = random_spec(&mut r);
        let dense = solve_centralized(&spec).unwrap();
        let rebuilt = reconstruct_centralized(&solve_mean_field(&spec).unwrap(), spec.k())
            .unwrap()
            .to_dense();
        let dev = schedule_deviation(&rebuilt, &dense);
        if dev.max() > worst {
            worst = dev.max();
            worst_parts = format!(
                "S {:.1e}, K {:.1e}, g {:.1e}, f {:.1e}",
                dev.cost_to_go, dev.gain, dev.linear_term, dev.offset
            );
        }
    }
    vec![Outcome::new(
        "riccati equivalence",
        worst <= 1e-8,
        format!("{SPECS} random specs, max relative deviation {worst:.2e} ≤ 1e-8 ({worst_parts})"),
    )]
}

fn random_pbd(r: &mut impl Rng, rows: usize, cols: usize) -> PseudoBlockMatrix {
    let k = common::SUBSYSTEM_COUNTS[r.random_range(0..4)];
    phi(
        k,
        uniform_matrix(r, rows, cols),
        uniform_matrix(r, rows, cols),
    )
    .unwrap()
}

fn pbd_algebra() -> Vec<Outcome> {
    const CASES: usize = 1000;
    let mut r = rng(0xAB);
    let dim = |r: &mut rand_chacha::ChaCha8Rng| r.random_range(1..=4usize);
    let mut rows: Vec<(&str, f64)> = Vec::new();
    let mut run = |name: &'static str, f: &mut dyn FnMut() -> f64| {
        let worst = (0..CASES).map(|_| f()).fold(0.0, f64::max);
        rows.push((name, worst));
    };

    run("densify", &mut || {
        let (a, b) = (dim(&mut r), dim(&mut r));
        let x = random_pbd(&mut r, a, b);
        max_abs(&(x.to_dense() - dense_phi(x.k(), x.inner(), x.mean())))
    });
    run("transpose", &mut || {
        let (a, b) = (dim(&mut r), dim(&mut r));
        let x = random_pbd(&mut r, a, b);
        max_abs(&(x.transpose().to_dense() - dense_phi(x.k(), x.inner(), x.mean()).transpose()))
    });
    run("scale+add", &mut || {
        let (a, b) = (dim(&mut r), dim(&mut r));
        let x = random_pbd(&mut r, a, b);
        let y = phi(
            x.k(),
            uniform_matrix(&mut r, a, b),
            uniform_matrix(&mut r, a, b),
        )
        .unwrap();
        let c: f64 = r.random_range(-3.0..3.0);
        let lhs = x.scale(c).add(&y).unwrap().to_dense();
        max_abs(
            &(lhs
                - (dense_phi(x.k(), x.inner(), x.mean()) * c
                    + dense_phi(y.k(), y.inner(), y.mean()))),
        )
    });
    run("product", &mut || {
        let (a, b, c) = (dim(&mut r), dim(&mut r), dim(&mut r));
        let x = random_pbd(&mut r, a, b);
        let y = phi(
            x.k(),
            uniform_matrix(&mut r, b, c),
            uniform_matrix(&mut r, b, c),
        )
        .unwrap();
        let oracle = dense_phi(x.k(), x.inner(), x.mean()) * dense_phi(y.k(), y.inner(), y.mean());
        max_abs(&(x.matmul(&y).unwrap().to_dense() - oracle))
    });
    run("inverse", &mut || {
        let n = dim(&mut r);
        let k = common::SUBSYSTEM_COUNTS[r.random_range(0..4)];
        let x = phi(k, well_conditioned(&mut r, n), well_conditioned(&mut r, n)).unwrap();
        let product = dense_phi(k, x.inner(), x.mean()) * x.inverse().unwrap().to_dense();
        max_abs(&(product - DMatrix::identity(n * k, n * k)))
    });
    run("apply replicated", &mut || {
        let (a, b) = (dim(&mut r), dim(&mut r));
        let x = random_pbd(&mut r, a, b);
        let v = uniform_vector(&mut r, b);
        let dense = dense_phi(x.k(), x.inner(), x.mean()) * replicate(&v, x.k());
        (dense - replicate(&x.apply_replicated(&v).unwrap(), x.k()))
            .abs()
            .max()
    });
    run("apply stacked", &mut || {
        let (a, b) = (dim(&mut r), dim(&mut r));
        let x = random_pbd(&mut r, a, b);
        let v = uniform_vector(&mut r, b * x.k());
        (dense_phi(x.k(), x.inner(), x.mean()) * &v - x.apply_stacked(&v).unwrap())
            .abs()
            .max()
    });
    run("mean field", &mut || {
        let n = dim(&mut r);
        let k = common::SUBSYSTEM_COUNTS[r.random_range(0..4)];
        let xs = uniform_vector(&mut r, n * k);
        let avg = mean_field(&split_blocks(&xs, k).unwrap()).unwrap();
        // (1ᵀ ⊗ I) x / k through a dense selector
        let selector = DMatrix::from_fn(
            n,
            n * k,
            |i, j| if j % n == i { 1.0 / k as f64 } else { 0.0 },
        );
        (selector * &xs - avg).abs().max()
    });
    run("averaging matrix", &mut || {
        let k = common::SUBSYSTEM_COUNTS[r.random_range(0..4)];
        let e = averaging_matrix(k);
        let (v, w) = (uniform_vector(&mut r, k), uniform_vector(&mut r, k));
        let ones = DVector::from_element(k, 1.0);
        let idempotent = (&e * (&e * &v) - &e * &v).abs().max();
        let symmetric = (v.dot(&(&e * &w)) - w.dot(&(&e * &v))).abs();
        let eigen = (&e * &ones - &ones).abs().max();
        // a negative quadratic form would show up as a positive deficit
        let psd = (-v.dot(&(&e * &v))).max(0.0);
        idempotent.max(symmetric).max(eigen).max(psd)
    });

    // not definite: every zero-sum direction is annihilated once k ≥ 2
    let not_definite = [2usize, 3, 5].iter().all(|&k| {
        let e = averaging_matrix(k);
        let mut v = DVector::zeros(k);
        v[0] = 1.0;
        v[k - 1] = -1.0;
        (&e * &v).abs().max() <= 1e-15 && min_eigenvalue(&e).abs() <= 1e-12
    });
    let worst = rows.iter().map(|(_, w)| *w).fold(0.0, f64::max);
    let mut out = Outcome::new(
        "pseudo-block algebra",
        worst <= 1e-10 && not_definite,
        format!(
            "{} identities × {CASES} cases, max deviation {worst:.2e} ≤ 1e-10; E_k PSD and singular for k ≥ 2: {not_definite}",
            rows.len()
        ),
    );
    out.details = rows
        .iter()
        .map(|(name, w)| format!("{name}: {w:.2e}"))
        .collect();
    vec![out]
}

fn reference_initial_states(k: usize) -> Vec<DVector<f64>> {
    normal_initial_states(k, 1, 10.0, 2.0, 7).unwrap()
}

fn predictive_variance() -> Vec<Outcome> {
    const SAMPLES: usize = 100_000;
    let spec = reference_spec(10, 50, 0.01);
    let schedule = solve_mean_field(&spec).unwrap();
    let x0 = reference_initial_states(10);
    let report = predictive_variance_check(&spec, &schedule, &x0, SAMPLES, 2024, 0).unwrap();
    let first: Vec<_> = report
        .rows
        .iter()
        .filter(|row| (1..=10).contains(&row.t))
        .collect();
    let worst = first.iter().map(|row| row.z.abs()).fold(0.0, f64::max);
    let mut out = Outcome::new(
        "predictive variance",
        first.len() == 10 && worst <= Z_LIMIT,
        format!("k = 10, λ = 0.01, {SAMPLES} rollouts, max |z| over t = 1..10 is {worst:.2} ≤ 4"),
    );
    out.details = first
        .iter()
        .map(|row| {
            format!(
                "t = {:2}: E(Δ²) {:.4e} vs {:.4e}, z = {:+.2}",
                row.t, row.lhs, row.rhs, row.z
            )
        })
        .collect();
    vec![out]
}

fn problem_offset() -> Vec<Outcome> {
    const RUNS: usize = 10_000;
    let (k, lambda) = (10, 0.01);
    let spec = reference_spec(k, 50, lambda);
    let schedule = solve_mean_field(&spec).unwrap();
    let x0 = reference_initial_states(k);
    let paired = paired_objectives(&spec, &schedule, &x0, RUNS, 2024).unwrap();
    let diff = paired.difference;
    let exact = exact_problem_offset(&spec, &x0).unwrap();
    let nominal = nominal_problem_offset(&spec).unwrap();
    let z_exact = (diff.mean - exact) / diff.std_error;
    let z_nominal = (diff.mean - nominal) / diff.std_error;

    // the nominal constant also charges t = 0, where the prediction error of a
    // deterministic initial state vanishes; the gap is that epoch's closed form
    let aug = risk_augmentation(&spec).unwrap();
    let initial: f64 = x0
        .iter()
        .map(|x| (x.transpose() * &aug.q_lambda[0] * x)[(0, 0)] + x.dot(&aug.b_lambda[0]))
        .sum();
    let predicted_gap = k as f64 * lambda * aug.ell(&spec, 0) + initial;

    let mut exact_line = Outcome::new(
        "problem offset (exact constant)",
        z_exact.abs() <= Z_LIMIT,
        format!(
            "J1 − J2 = {:.3} ± {:.3} over {RUNS} paired runs, exact constant {exact:.3}, |z| = {:.2} ≤ 4",
            diff.mean,
            diff.std_error,
            z_exact.abs()
        ),
    );
    exact_line.details.push(format!(
        "E(J1) = {:.3} ± {:.3}, E(J2) = {:.3} ± {:.3}",
        paired.problem1.mean,
        paired.problem1.std_error,
        paired.problem2.mean,
        paired.problem2.std_error
    ));
    let mut nominal_line = Outcome::new(
        "problem offset (Σ_t kλℓ_t over t = 0..T)",
        z_nominal.abs() <= Z_LIMIT,
        format!(
            "nominal constant {nominal:.3} is {:.1} standard errors from J1 − J2",
            z_nominal.abs()
        ),
    );
    nominal_line.gating = false;
    nominal_line.details.push(format!(
        "nominal − exact = {:.3}; t = 0 closed form kλℓ_0 + Σ_i(x0ᵀQ^λx0 + x0ᵀb^λ) = {predicted_gap:.3}",
        nominal - exact
    ));
    nominal_line.details.push(
        "not gating: with deterministic initial states Δ_0 = 0, so the t = 0 term of the nominal constant cannot appear"
            .into(),
    );
    let explained =
        ((nominal - exact) - predicted_gap).abs() <= 1e-9 * predicted_gap.abs().max(1.0);
    let gap_line = Outcome::new(
        "problem offset (t = 0 gap accounted for)",
        explained,
        format!("nominal − exact matches the t = 0 closed form: {explained}"),
    );
    vec![exact_line, nominal_line, gap_line]
}

fn reference_trends() -> Vec<Outcome> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/reference_reduced.cfg");
    let config = parse_config(&path).unwrap();
    assert_eq!(
        (config.spec.k(), config.spec.horizon(), config.n_runs),
        (50, 50, 500)
    );
    let x0 = config.initial_states().unwrap();
    let stats: Vec<_> = config
        .lambda_grid
        .iter()
        .map(|&lambda| {
            let spec = config.spec_at(lambda).unwrap();
            let schedule = solve_mean_field(&spec).unwrap();
            let ens = EnsembleConfig {
                n_runs: config.n_runs,
                base_seed: config.base_seed,
                tail: config.tail,
            };
            ensemble(&spec, &schedule, &x0, ens).unwrap()
        })
        .collect();
    let x_max: Vec<f64> = stats.iter().map(|s| s.time_average.x_max.mean).collect();
    let u_avg: Vec<f64> = stats.iter().map(|s| s.time_average.u_avg.mean).collect();
    let width = |i: usize| stats[i].time_average.x_max.width();
    let lambda_index = |l: f64| config.lambda_grid.iter().position(|&x| x == l).unwrap();
    let (w0, w1) = (width(lambda_index(0.0)), width(lambda_index(0.1)));

    let decreasing = x_max.windows(2).all(|w| w[1] < w[0]);
    let nondecreasing = u_avg.windows(2).all(|w| w[1] >= w[0]);
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.2}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    vec![
        Outcome::new(
            "trend (a): time-averaged c^{x,max} strictly decreasing in λ",
            decreasing,
            format!("k = 50, T = 50, 500 runs: [{}]", fmt(&x_max)),
        ),
        Outcome::new(
            "trend (b): time-averaged c^{u,avg} non-decreasing in λ",
            nondecreasing,
            format!("[{}]", fmt(&u_avg)),
        ),
        Outcome::new(
            "trend (c): 5–95% band of time-averaged c^{x,max} narrower at λ = 0.1 than λ = 0",
            w1 < w0,
            format!("width {w1:.2} at λ = 0.1 vs {w0:.2} at λ = 0"),
        ),
    ]
}

fn perturbed(
    schedule: &MeanFieldGainSchedule,
    r: &mut impl Rng,
    eps: f64,
) -> MeanFieldGainSchedule {
    let mut p = schedule.clone();
    let mut flip = |x: &mut f64| *x *= 1.0 + if r.random_bool(0.5) { eps } else { -eps };
    for t in 0..p.horizon() {
        p.gain[t].iter_mut().for_each(&mut flip);
        p.gain_bar[t].iter_mut().for_each(&mut flip);
        p.offset[t].iter_mut().for_each(&mut flip);
    }
    p
}

fn local_optimality() -> Vec<Outcome> {
    const SPECS: usize = 20;
    const PERTURBATIONS: usize = 8;
    const RUNS: usize = 10_000;
    let mut r = rng(0x0F);
    let mut worst_z = f64::NEG_INFINITY;
    let mut significant = 0;
    let mut details = Vec::new();
    for s in 0..SPECS {
        let spec = random_spec(&mut r);
        let schedule = solve_mean_field(&spec).unwrap();
        let x0: Vec<DVector<f64>> = (0..spec.k())
            .map(|_| uniform_vector(&mut r, spec.n()) * 2.0)
            .collect();
        let variants: Vec<_> = (0..PERTURBATIONS)
            .map(|_| perturbed(&schedule, &mut r, 0.01))
            .collect();
        let mut policies: Vec<&dyn Policy> = vec![&schedule];
        policies.extend(variants.iter().map(|v| v as &dyn Policy));
        let cmp = compare_policies(&spec, &policies, &x0, RUNS, 1000 + s as u64).unwrap();
        // J_opt − J_pert in standard errors; positive means the perturbation did better
        let zs: Vec<f64> = cmp.differences[1..]
            .iter()
            .map(|d| {
                if d.std_error > 0.0 {
                    -d.mean / d.std_error
                } else {
                    -d.mean.signum() * f64::INFINITY
                }
            })
            .collect();
        let spec_worst = zs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        significant += zs.iter().filter(|z| **z < -Z_LIMIT).count();
        worst_z = worst_z.max(spec_worst);
        details.push(format!(
            "spec {s:2} (n {}, m {}, k {}, T {:2}, λ {}): max (J_opt − J_pert)/SE = {spec_worst:+.2}",
            spec.n(),
            spec.m(),
            spec.k(),
            spec.horizon(),
            spec.lambda()
        ));
    }
    let mut out = Outcome::new(
        "local optimality",
        worst_z <= Z_LIMIT,
        format!(
            "{SPECS} specs × {PERTURBATIONS} ±1% perturbations, {RUNS} paired runs: max (J_opt − J_pert)/SE = {worst_z:+.2} ≤ 4; \
             {significant} of {} perturbations significantly worse",
            SPECS * PERTURBATIONS
        ),
    );
    out.details = details;
    vec![out]
}

fn determinism() -> Vec<Outcome> {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/reference_reduced.cfg");
    let dir = tempfile::TempDir::new().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_mflqr"))
            .args([
                "sweep",
                config.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--seed",
                "11",
            ])
            .output()
            .unwrap();
        assert!(
            status.status.success(),
            "{}",
            String::from_utf8_lossy(&status.stderr)
        );
        std::fs::read(out.join("sweep.csv")).unwrap()
    };
    let (a, b) = (run("first"), run("second"));
    vec![Outcome::new(
        "sweep determinism",
        a == b && !a.is_empty(),
        format!(
            "two `mflqr sweep` invocations, {} bytes each, identical: {}",
            a.len(),
            a == b
        ),
    )]
}

fn main() -> ExitCode {
    let criteria: [fn() -> Vec<Outcome>; 7] = [
        equivalence,
        pbd_algebra,
        predictive_variance,
        problem_offset,
        reference_trends,
        local_optimality,
        determinism,
    ];
    let mut gating_failures = 0;
    let mut known_failures = 0;
    for criterion in criteria {
        let start = Instant::now();
        let outcomes = criterion();
        let elapsed = start.elapsed().as_secs_f64();
        for o in outcomes {
            let tag = match (o.passed, o.gating) {
                (true, _) => "PASS",
                (false, true) => "FAIL",
                (false, false) => "FAIL (not gating)",
            };
            println!("[{tag}] {}: {} [{elapsed:.1}s]", o.name, o.summary);
            for line in &o.details {
                println!("        {line}");
            }
            if !o.passed {
                if o.gating {
                    gating_failures += 1;
                } else {
                    known_failures += 1;
                }
            }
        }
    }
    println!("acceptance: {gating_failures} gating failures, {known_failures} non-gating failures");
    if gating_failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
