//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so that every criterion is evaluated and reported
//! even when earlier ones fail. The process exits 0 regardless, unless
//! `ACCEPTANCE_STRICT=1` is set, in which case any FAIL makes it exit 1.

use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use virtual_eve::channel::{PathSet, TransmitArray, VirtualEve};
use virtual_eve::expectation::{
    d_max, expected_delta, expected_snr_col, expected_snr_veve, independent_path_snr_veve,
    ExpectationInputs,
};
use virtual_eve::harness::{
    build_instance, run_sweep, run_table2, spearman, HarnessConfig, ResultRow, RunOptions,
    Strategy, SweepSpec, SweepVariable,
};
use virtual_eve::montecarlo::{cross_term_probe, empirical_expectations, Scenario, TrialConfig};
use virtual_eve::optimizer::{certify_joint, jo_edap_ao, project, AoConfig};
use virtual_eve::SystemParams;

struct Report {
    passed: usize,
    total: usize,
}

impl Report {
    fn line(&mut self, id: &str, ok: bool, detail: String) {
        self.total += 1;
        if ok {
            self.passed += 1;
        }
        println!(
            "criterion {id:>2}: {}  {detail}",
            if ok { "PASS" } else { "FAIL" }
        );
    }
}

fn info(text: String) {
    println!("              {text}");
}

fn criterion_1(rep: &mut Report) {
    let mut ok = true;
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for seed in [1u64, 2, 3] {
        let start = Instant::now();
        let mut cfg = HarnessConfig::default();
        cfg.set_seed(seed);
        let inst =
            build_instance(&cfg, &cfg.params, cfg.n_eves, cfg.n_virtual_mas, 0.0, 0).unwrap();
        let state = jo_edap_ao(&cfg.ao_config(), &inst.problem, None).unwrap();
        let inputs = inst.problem.inputs(&state.positions, state.d).unwrap();
        let closed_col = expected_snr_col(&inputs).unwrap();
        let closed_veve = expected_snr_veve(&inputs).unwrap();
        let indep_veve = independent_path_snr_veve(&inputs).unwrap();
        let trial = TrialConfig {
            num_trials: 100_000,
            seed,
            ..TrialConfig::default()
        };
        let scenario = Scenario {
            params: cfg.params.clone(),
            array: inst.array.clone(),
            paths: inst.paths.clone(),
            veve: VirtualEve::unchecked(state.d, state.positions.clone()).unwrap(),
            eve_distances: inst.eve_distances.clone(),
            bob_distance_m: None,
        };
        let emp = empirical_expectations(&trial, &scenario).unwrap();
        let secs = start.elapsed().as_secs_f64();
        let e_col = (closed_col - emp.e_snr_col).abs() / closed_col;
        let e_veve = (closed_veve - emp.e_snr_veve).abs() / closed_veve;
        let e_indep = (indep_veve - emp.e_snr_veve).abs() / indep_veve;
        info(format!(
            "seed {seed}: col rel err {:.4}%, veve rel err {:.2}% (independent-path mean: {:.4}%), {secs:.2} s",
            100.0 * e_col,
            100.0 * e_veve,
            100.0 * e_indep
        ));
        ok &= e_col <= 0.02 && e_veve <= 0.02 && secs <= 30.0;
        worst = (worst.0.max(e_col), worst.1.max(e_veve), worst.2.max(secs));
    }
    rep.line(
        "1",
        ok,
        format!(
            "closed form vs 1e5 draws: worst col {:.3}%, worst veve {:.2}% (tol 2%), worst {:.2} s",
            100.0 * worst.0,
            100.0 * worst.1,
            worst.2
        ),
    );
}

fn random_params(rng: &mut ChaCha8Rng) -> SystemParams {
    SystemParams {
        alpha: rng.random_range(2.0..4.5),
        noise_power_mw: rng.random_range(0.05..5.0),
        num_paths: rng.random_range(1..=8),
        g0_db: rng.random_range(-10.0..40.0),
        ..SystemParams::default()
    }
}

fn criterion_2(rep: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let params = random_params(&mut rng);
        let m = rng.random_range(1..=6);
        let paths = PathSet::random(params.num_paths, &mut rng).unwrap();
        let array = TransmitArray::default_for(&params, 8).unwrap();
        let raw: Vec<f64> = (0..m)
            .map(|_| rng.random_range(0.0..params.move_range_m()))
            .collect();
        let mut sorted = raw.clone();
        sorted.sort_by(f64::total_cmp);
        let positions = project(&params.bounds(), &sorted);
        let eves: Vec<f64> = (0..m).map(|_| rng.random_range(10.0..80.0)).collect();
        let inputs =
            ExpectationInputs::from_geometry(&array, &paths, &positions, &params, eves, 1.0)
                .unwrap();
        let d = d_max(&inputs).unwrap();
        let col = expected_snr_col(&inputs).unwrap();
        let gap = expected_delta(&inputs.with_distance(d)).unwrap();
        worst = worst.max(gap.abs() / col);
    }
    rep.line(
        "2",
        worst <= 1e-9,
        format!("|E[dSNR](d_max)| / E[SNR_col] over 100 instances: worst {worst:.2e} (tol 1e-9)"),
    );
}

fn criterion_3(rep: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let params = SystemParams {
            num_paths: 1,
            alpha: rng.random_range(2.0..5.0),
            ..SystemParams::default()
        };
        let paths = PathSet::random(1, &mut rng).unwrap();
        let array = TransmitArray::default_for(&params, 8).unwrap();
        let d1 = rng.random_range(1.0..200.0);
        let r = rng.random_range(0.0..params.move_range_m());
        let inputs =
            ExpectationInputs::from_geometry(&array, &paths, &[r], &params, vec![d1], 1.0).unwrap();
        worst = worst.max((d_max(&inputs).unwrap() - d1).abs() / d1);
    }
    rep.line(
        "3",
        worst <= 1e-12,
        format!("M = 1, L = 1: worst |d_max - d_1| / d_1 = {worst:.2e} over 50 cases (tol 1e-12)"),
    );
}

fn criterion_4(rep: &mut Report) {
    let params = SystemParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let est = cross_term_probe(40.0, &params, 100_000, &mut rng).unwrap();
    let l = params.num_paths;
    let mut worst = 0.0f64;
    let mut ok = true;
    for u in 0..l {
        for v in 0..l {
            if u != v {
                let z = est.mean[[u, v]].norm() / est.std_error[[u, v]];
                worst = worst.max(z);
                ok &= z <= 3.0;
            }
        }
    }
    let var = params.path_variance(40.0);
    let diag_err = (0..l)
        .map(|u| (est.mean[[u, u]].re - var).abs() / var)
        .fold(0.0f64, f64::max);
    rep.line(
        "4",
        ok,
        format!("off-diagonal |mean|/se at L = 4, 1e5 draws: worst {worst:.2} (band 3); diagonal rel err {:.3}%", 100.0 * diag_err),
    );
}

fn criterion_5(rep: &mut Report) {
    let start = Instant::now();
    let params = SystemParams::default();
    let resolution = params.wavelength_m / 100.0;
    let mut worst = 0.0f64;
    let mut d_gap = 0.0f64;
    for seed in 0..10u64 {
        let mut cfg = HarnessConfig::default();
        cfg.set_seed(100 + seed);
        let inst = build_instance(&cfg, &params, 2, 2, 0.0, seed).unwrap();
        let state = jo_edap_ao(&AoConfig::default(), &inst.problem, None).unwrap();
        let cert = certify_joint(&inst.problem, resolution).unwrap();
        let s_ao = inst.problem.combining_sum(&state.positions);
        let ratio = s_ao / cert.combining_sum;
        worst = worst.max(ratio - 1.0);
        d_gap = d_gap.max((state.d - cert.d).abs() / cert.d);
    }
    let secs = start.elapsed().as_secs_f64();
    rep.line(
        "5",
        worst <= 0.05 && secs <= 120.0,
        format!(
            "M = 2 vs lambda/100 grid, 10 instances: worst combining-sum excess {:+.3}% (tol 5%), worst |d - d_grid|/d_grid {:.3}%, {secs:.2} s",
            100.0 * worst,
            100.0 * d_gap
        ),
    );
    info("the joint objective is zero at every (d_max(R), R), so optimality is compared on the combining sum".into());
}

fn criterion_6(rep: &mut Report) {
    let cfg = HarnessConfig::default();
    let inst = build_instance(&cfg, &cfg.params, cfg.n_eves, cfg.n_virtual_mas, 0.0, 0).unwrap();
    let state = jo_edap_ao(&cfg.ao_config(), &inst.problem, None).unwrap();
    let first = state.history[0].objective;
    let ok = state.converged && state.iter <= 25 && first < 0.0 && state.objective >= 0.0;
    let trace: Vec<String> = state
        .history
        .iter()
        .map(|h| format!("{:.3e}", h.objective))
        .collect();
    rep.line(
        "6",
        ok,
        format!(
            "converged = {} after {} iterations; history [{}]; final {:.3e}",
            state.converged,
            state.iter,
            trace.join(", "),
            state.objective
        ),
    );
}

fn sweep(cfg: &HarnessConfig, variable: SweepVariable, values: Vec<f64>) -> Vec<ResultRow> {
    let spec = SweepSpec {
        variable,
        values,
        strategies: vec![Strategy::Joint],
        ma_counts: vec![cfg.n_virtual_mas],
    };
    run_sweep(&spec, cfg, RunOptions::default()).unwrap().rows
}

fn column(rows: &[ResultRow], f: impl Fn(&ResultRow) -> Option<f64>) -> (Vec<f64>, Vec<f64>) {
    rows.iter()
        .filter_map(|r| f(r).map(|y| (r.sweep_value, y)))
        .unzip()
}

fn spread(ys: &[f64]) -> f64 {
    let max = ys.iter().cloned().fold(f64::MIN, f64::max);
    let min = ys.iter().cloned().fold(f64::MAX, f64::min);
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    (max - min) / mean.abs()
}

fn fmt(ys: &[f64]) -> String {
    ys.iter()
        .map(|y| format!("{y:.4}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Returns the path-loss sweep rows, reused by criterion 9.
fn criterion_7(rep: &mut Report) -> Vec<ResultRow> {
    let cfg = HarnessConfig::default();

    let rows = sweep(
        &cfg,
        SweepVariable::NumEves,
        SweepVariable::NumEves.default_values(),
    );
    let (x, d) = column(&rows, |r| r.d_m);
    let rho_a = spearman(&x, &d);
    let a_ok = rho_a <= -0.8;
    info(format!(
        "(a) d vs number of Eves 2..8: rho = {rho_a:+.3} [{}] -> {}",
        fmt(&d),
        verdict(a_ok)
    ));

    let rows_alpha = sweep(
        &cfg,
        SweepVariable::PathLossExponent,
        SweepVariable::PathLossExponent.default_values(),
    );
    let (x, d) = column(&rows_alpha, |r| r.d_m);
    let rho_b = spearman(&x, &d);
    let b_ok = rho_b <= -0.8;
    info(format!(
        "(b) d vs alpha 2..4: rho = {rho_b:+.3} [{}] -> {}",
        fmt(&d),
        verdict(b_ok)
    ));

    let rows = sweep(
        &cfg,
        SweepVariable::NoisePower,
        SweepVariable::NoisePower.default_values(),
    );
    let (_, d) = column(&rows, |r| r.d_m);
    let s_c = spread(&d);
    let c_ok = s_c <= 0.05;
    info(format!(
        "(c) d spread over noise powers: {:.3e}% -> {}",
        100.0 * s_c,
        verdict(c_ok)
    ));

    let rows = sweep(
        &cfg,
        SweepVariable::NumVirtualMas,
        SweepVariable::NumVirtualMas.default_values(),
    );
    let (x, e) = column(&rows, |r| r.pct_error.map(f64::abs));
    let rho_d = spearman(&x, &e);
    let steps: Vec<f64> = e.windows(2).map(|w| (w[0] - w[1]).abs()).collect();
    let split = x.iter().position(|&v| v >= 7.0).unwrap_or(x.len() - 1);
    let early = steps[..split].iter().sum::<f64>() / split.max(1) as f64;
    let late = steps[split..].iter().sum::<f64>() / (steps.len() - split).max(1) as f64;
    let d_ok = rho_d <= -0.8 && late < early;
    info(format!(
        "(d) |pct_error| vs virtual MAs 1..9: rho = {rho_d:+.3}, mean step before/after 7 MAs {early:.3e}/{late:.3e} [{}] -> {}",
        fmt(&e),
        verdict(d_ok)
    ));

    let rows = sweep(
        &cfg,
        SweepVariable::MoveRange,
        SweepVariable::MoveRange.default_values(),
    );
    let (_, d) = column(&rows, |r| r.d_m);
    let (_, e) = column(&rows, |r| r.pct_error.map(f64::abs));
    let (s_d, s_e) = (spread(&d), spread(&e));
    let e_ok = s_d <= 0.05 && s_e <= 0.05;
    info(format!(
        "(e) moving range 2..6 lambda: d spread {:.2}%, |pct_error| spread {:.2}% [d: {}] -> {}",
        100.0 * s_d,
        100.0 * s_e,
        fmt(&d),
        verdict(e_ok)
    ));

    rep.line(
        "7",
        a_ok && b_ok && c_ok && d_ok && e_ok,
        format!(
            "trend checks, {} trials per point: a {} b {} c {} d {} e {}",
            cfg.trial.num_trials,
            verdict(a_ok),
            verdict(b_ok),
            verdict(c_ok),
            verdict(d_ok),
            verdict(e_ok)
        ),
    );

    rows_alpha
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

fn criterion_8(rep: &mut Report) {
    let cfg = HarnessConfig::default();
    let rows = run_table2(&cfg).unwrap();
    let mut ok = true;
    for r in &rows {
        ok &= r.error.abs() <= 0.01;
        info(format!(
            "Eves {:?}: d = {:.3} m, R_col = {:.4e}, R_veve = {:.4e}, error {:+.3}%",
            r.eve_distances,
            r.d_m,
            r.secrecy_col,
            r.secrecy_veve,
            100.0 * r.error
        ));
    }
    let worst = rows.iter().map(|r| r.error.abs()).fold(0.0f64, f64::max);
    rep.line(
        "8",
        ok,
        format!(
            "secrecy-rate error, Bob at 30 m, {} trials: worst |error| {:.3}% (tol 1%)",
            cfg.trial.num_trials,
            100.0 * worst
        ),
    );
}

fn criterion_9(rep: &mut Report, rows_alpha: &[ResultRow]) {
    let (_, pct) = column(rows_alpha, |r| r.pct_error);
    let avg = pct.iter().sum::<f64>() / pct.len() as f64;
    rep.line(
        "9",
        (3.0..=15.0).contains(&avg),
        format!(
            "mean percentage error over the path-loss sweep: {avg:.2}% (band 3..15%) [{}]",
            fmt(&pct)
        ),
    );
}

fn criterion_10(rep: &mut Report) {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_virtual-eve");
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(bin)
            .args(["--seed", "7", "--trials", "300", "--out"])
            .arg(&out)
            .args(["sweep", "--sweep", "num_eves"])
            .output()
            .unwrap();
        assert!(
            status.status.success(),
            "{}",
            String::from_utf8_lossy(&status.stderr)
        );
        std::fs::read(out).unwrap()
    };
    let a = run("a.csv");
    let b = run("b.csv");
    rep.line(
        "10",
        a == b && !a.is_empty(),
        format!(
            "two CLI sweeps with the same seed: {} bytes, identical = {}",
            a.len(),
            a == b
        ),
    );
}

fn main() {
    let mut rep = Report {
        passed: 0,
        total: 0,
    };
    criterion_1(&mut rep);
    criterion_2(&mut rep);
    criterion_3(&mut rep);
    criterion_4(&mut rep);
    criterion_5(&mut rep);
    criterion_6(&mut rep);
    let rows_alpha = criterion_7(&mut rep);
    criterion_8(&mut rep);
    criterion_9(&mut rep, &rows_alpha);
    criterion_10(&mut rep);
    println!("acceptance: {}/{} criteria passed", rep.passed, rep.total);
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && rep.passed != rep.total {
        std::process::exit(1);
    }
}
