//! Experiment driver: configuration files, parameter sweeps, the secrecy-rate
//! comparison table, and CSV / plot-data output.
//!
//! A sweep point is averaged over `trials` random instances. Trial `t` draws
//! the eavesdropper distances and path angles from its own streams, runs each
//! strategy on that instance, and then draws one set of path responses to
//! measure the instantaneous SNRs. Every sweep value and every strategy sees
//! the same instances (common random numbers), which keeps trends smooth.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{PathSet, TransmitArray, VirtualEve};
use crate::error::{Error, Result};
use crate::metrics::stable_sum;
use crate::montecarlo::{
    empirical_expectations, run_trial, substream, Entity, Scenario, TrialConfig,
};
use crate::optimizer::{
    feasible_distance, jo_edap_ao, optimize_positions, AoConfig, AoState, EquivalenceProblem,
};
use crate::params::SystemParams;

/// Everything a run needs: physics, geometry sizes and the averaging setup.
#[derive(Debug, Clone, PartialEq)]
pub struct HarnessConfig {
    pub params: SystemParams,
    pub n_bs_antennas: usize,
    pub n_eves: usize,
    pub n_virtual_mas: usize,
    pub d_bob_bs_m: f64,
    pub trial: TrialConfig,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            params: SystemParams::default(),
            n_bs_antennas: 8,
            n_eves: 4,
            n_virtual_mas: 4,
            d_bob_bs_m: 20.0,
            trial: TrialConfig::default(),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value for {key}: {value:?}")))
}

impl HarnessConfig {
    /// Parses `key = value` lines; `#` starts a comment. Unlisted keys keep
    /// their defaults, unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = HarnessConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let p = &mut self.params;
        match key {
            "wavelength_m" => p.wavelength_m = parse_value(key, value)?,
            "n_bs_antennas" => self.n_bs_antennas = parse_value(key, value)?,
            "n_eves" => self.n_eves = parse_value(key, value)?,
            "n_virtual_mas" => self.n_virtual_mas = parse_value(key, value)?,
            "d_bob_bs_m" => self.d_bob_bs_m = parse_value(key, value)?,
            "tx_power_mw" => p.tx_power_mw = parse_value(key, value)?,
            "noise_power_mw" => p.noise_power_mw = parse_value(key, value)?,
            "n_paths" => p.num_paths = parse_value(key, value)?,
            "g0_db" => p.g0_db = parse_value(key, value)?,
            "alpha" => p.alpha = parse_value(key, value)?,
            "move_range_wavelengths" => p.move_range_wavelengths = parse_value(key, value)?,
            "d_min_wavelengths" => p.d_min_wavelengths = parse_value(key, value)?,
            "max_iters" => p.max_iters = parse_value(key, value)?,
            "eve_dist_mean_m" => self.trial.eve_distance_mean_m = parse_value(key, value)?,
            "eve_dist_std_m" => self.trial.eve_distance_std_m = parse_value(key, value)?,
            // Alternative reading of the distance spread as a variance in m².
            "eve_dist_var_m2" => {
                let var: f64 = parse_value(key, value)?;
                if !(var >= 0.0) {
                    return Err(Error::domain("eve_dist_var_m2", var, ">= 0"));
                }
                self.trial.eve_distance_std_m = var.sqrt();
            }
            "trials" => self.trial.num_trials = parse_value(key, value)?,
            "seed" => self.set_seed(parse_value(key, value)?),
            "redraw_angles" => self.trial.redraw_angles = parse_value(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.trial.seed = seed;
        self.params.rng_seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.trial.validate()?;
        if self.n_bs_antennas == 0 {
            return Err(Error::domain("n_bs_antennas", 0.0, ">= 1"));
        }
        if self.n_eves == 0 {
            return Err(Error::domain("n_eves", 0.0, ">= 1"));
        }
        if self.n_virtual_mas == 0 {
            return Err(Error::domain("n_virtual_mas", 0.0, ">= 1"));
        }
        if !(self.d_bob_bs_m > 0.0) {
            return Err(Error::domain("d_bob_bs_m", self.d_bob_bs_m, "> 0"));
        }
        Ok(())
    }

    /// The configuration in the file format accepted by [`parse`](Self::parse).
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let t = &self.trial;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("wavelength_m", p.wavelength_m.to_string());
        kv("n_bs_antennas", self.n_bs_antennas.to_string());
        kv("n_eves", self.n_eves.to_string());
        kv("n_virtual_mas", self.n_virtual_mas.to_string());
        kv("d_bob_bs_m", self.d_bob_bs_m.to_string());
        kv("tx_power_mw", p.tx_power_mw.to_string());
        kv("noise_power_mw", p.noise_power_mw.to_string());
        kv("n_paths", p.num_paths.to_string());
        kv("g0_db", p.g0_db.to_string());
        kv("alpha", p.alpha.to_string());
        kv(
            "move_range_wavelengths",
            p.move_range_wavelengths.to_string(),
        );
        kv("d_min_wavelengths", p.d_min_wavelengths.to_string());
        kv("max_iters", p.max_iters.to_string());
        kv("eve_dist_mean_m", t.eve_distance_mean_m.to_string());
        kv("eve_dist_std_m", t.eve_distance_std_m.to_string());
        kv("trials", t.num_trials.to_string());
        kv("seed", t.seed.to_string());
        kv("redraw_angles", t.redraw_angles.to_string());
        s
    }

    pub fn ao_config(&self) -> AoConfig {
        AoConfig::from_params(&self.params)
    }
}

/// Quantity varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepVariable {
    NumEves,
    PathLossExponent,
    NoisePower,
    MoveRange,
    NumVirtualMas,
    EveDistanceOffset,
}

impl SweepVariable {
    pub const ALL: [SweepVariable; 6] = [
        SweepVariable::NumEves,
        SweepVariable::PathLossExponent,
        SweepVariable::NoisePower,
        SweepVariable::MoveRange,
        SweepVariable::NumVirtualMas,
        SweepVariable::EveDistanceOffset,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SweepVariable::NumEves => "num_eves",
            SweepVariable::PathLossExponent => "path_loss_exponent",
            SweepVariable::NoisePower => "noise_power",
            SweepVariable::MoveRange => "move_range",
            SweepVariable::NumVirtualMas => "num_virtual_mas",
            SweepVariable::EveDistanceOffset => "eve_distance_offset",
        }
    }

    /// Default grid of values, in the variable's natural unit (count,
    /// exponent, mW, wavelengths, count, metres).
    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepVariable::NumEves => (2..=8).map(f64::from).collect(),
            SweepVariable::PathLossExponent => vec![2.0, 2.5, 3.0, 3.5, 4.0],
            SweepVariable::NoisePower => vec![0.1, 0.2, 0.5, 1.0, 2.0],
            SweepVariable::MoveRange => vec![2.0, 3.0, 4.0, 5.0, 6.0],
            SweepVariable::NumVirtualMas => (1..=9).map(f64::from).collect(),
            SweepVariable::EveDistanceOffset => vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
        }
    }

    fn is_count(self) -> bool {
        matches!(self, SweepVariable::NumEves | SweepVariable::NumVirtualMas)
    }
}

impl FromStr for SweepVariable {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SweepVariable::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown sweep variable {s:?}")))
    }
}

/// How `(d, R)` is chosen for one instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    /// Alternating optimisation of distance and positions.
    Joint,
    /// Uniform-spread positions, zero-gap distance for them.
    DistanceOnly,
    /// Distance fixed at the mean eavesdropper distance, positions optimised.
    PositionsOnlyAvgDistance,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [
        Strategy::Joint,
        Strategy::DistanceOnly,
        Strategy::PositionsOnlyAvgDistance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Joint => "joint",
            Strategy::DistanceOnly => "distance_only",
            Strategy::PositionsOnlyAvgDistance => "positions_only_avg_distance",
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub strategies: Vec<Strategy>,
    /// Virtual array sizes run at every value; ignored when the virtual
    /// array size is itself the swept variable.
    pub ma_counts: Vec<usize>,
}

impl SweepSpec {
    /// Default values, all strategies, and the configured virtual array size.
    pub fn new(variable: SweepVariable, config: &HarnessConfig) -> Self {
        SweepSpec {
            variable,
            values: variable.default_values(),
            strategies: Strategy::ALL.to_vec(),
            ma_counts: vec![config.n_virtual_mas],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config("sweep has no values".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("sweep has no strategies".into()));
        }
        if self.ma_counts.is_empty() || self.ma_counts.contains(&0) {
            return Err(Error::Config(
                "ma_counts must be nonempty and positive".into(),
            ));
        }
        for &v in &self.values {
            if !v.is_finite() {
                return Err(Error::domain(self.variable.as_str(), v, "finite"));
            }
            if self.variable.is_count() && (v < 1.0 || v.fract() != 0.0) {
                return Err(Error::domain(
                    self.variable.as_str(),
                    v,
                    "a positive integer",
                ));
            }
        }
        Ok(())
    }

    fn mas_for(&self, value: f64) -> Vec<usize> {
        if self.variable == SweepVariable::NumVirtualMas {
            vec![value as usize]
        } else {
            self.ma_counts.clone()
        }
    }
}

/// One CSV line: a (sweep value, virtual array size, strategy) cell
/// averaged over all trials. Numeric fields are empty for failed cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_var: String,
    pub sweep_value: f64,
    pub strategy: String,
    pub num_mas: usize,
    /// Mean equivalent distance.
    pub d_m: Option<f64>,
    /// Mean closed-form `E[ΔSNR]` at the chosen `(d, R)`.
    pub expected_delta: Option<f64>,
    /// `100·(Ê[SNR_col] − Ê[SNR_veve]) / Ê[SNR_col]` from the sampled SNRs.
    pub pct_error: Option<f64>,
    pub runtime_s: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowFailure {
    pub sweep_value: f64,
    pub strategy: Strategy,
    pub num_mas: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<RowFailure>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Record wall time in `runtime_s`; off by default so outputs are
    /// byte-reproducible.
    pub record_timing: bool,
}

/// `(e_col − e_veve) / e_col`.
pub fn percentage_error(e_col: f64, e_veve: f64) -> f64 {
    (e_col - e_veve) / e_col
}

/// Settings of one sweep point after applying the swept value.
#[derive(Debug, Clone)]
struct PointSetup {
    params: SystemParams,
    n_eves: usize,
    num_mas: usize,
    distance_offset_m: f64,
}

fn point_setup(
    cfg: &HarnessConfig,
    variable: SweepVariable,
    value: f64,
    num_mas: usize,
) -> PointSetup {
    let mut setup = PointSetup {
        params: cfg.params.clone(),
        n_eves: cfg.n_eves,
        num_mas,
        distance_offset_m: 0.0,
    };
    match variable {
        SweepVariable::NumEves => setup.n_eves = value as usize,
        SweepVariable::PathLossExponent => setup.params.alpha = value,
        SweepVariable::NoisePower => setup.params.noise_power_mw = value,
        SweepVariable::MoveRange => setup.params.move_range_wavelengths = value,
        SweepVariable::NumVirtualMas => setup.num_mas = value as usize,
        SweepVariable::EveDistanceOffset => setup.distance_offset_m = value,
    }
    setup
}

/// One random instance of the equivalence problem.
#[derive(Debug, Clone)]
pub struct Instance {
    pub array: TransmitArray,
    pub paths: PathSet,
    pub eve_distances: Vec<f64>,
    pub problem: EquivalenceProblem,
}

/// Instance for trial `trial`: its own path angles and eavesdropper
/// distances (shifted by `distance_offset_m`).
pub fn build_instance(
    cfg: &HarnessConfig,
    params: &SystemParams,
    n_eves: usize,
    num_mas: usize,
    distance_offset_m: f64,
    trial: u64,
) -> Result<Instance> {
    let array = TransmitArray::default_for(params, cfg.n_bs_antennas)?;
    let paths = PathSet::random(
        params.num_paths,
        &mut substream(cfg.trial.seed, trial, Entity::Angles),
    )?;
    let eve_distances: Vec<f64> = cfg
        .trial
        .eve_distances(trial, n_eves)?
        .into_iter()
        .map(|d| d + distance_offset_m)
        .collect();
    let problem = EquivalenceProblem::new(&array, &paths, params, eve_distances.clone(), num_mas)?;
    Ok(Instance {
        array,
        paths,
        eve_distances,
        problem,
    })
}

/// `(d, R)` picked by a strategy, with the closed-form gap there.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyOutcome {
    pub d: f64,
    pub positions: Vec<f64>,
    pub objective: f64,
}

pub fn run_strategy(
    strategy: Strategy,
    problem: &EquivalenceProblem,
    ao: &AoConfig,
) -> Result<StrategyOutcome> {
    let (d, positions) = match strategy {
        Strategy::Joint => {
            let state = jo_edap_ao(ao, problem, None)?;
            (state.d, state.positions)
        }
        Strategy::DistanceOnly => {
            let r = problem.initial_positions()?;
            (feasible_distance(problem, &r)?, r)
        }
        Strategy::PositionsOnlyAvgDistance => {
            let eves = problem.eve_distances();
            let d = stable_sum(eves) / eves.len() as f64;
            let r0 = problem.initial_positions()?;
            let step = optimize_positions(problem, d, &r0, ao.max_inner, ao.inner_tol)?;
            (d, step.positions)
        }
    };
    Ok(StrategyOutcome {
        objective: problem.objective(d, &positions),
        d,
        positions,
    })
}

/// Per-trial record of one strategy on one instance.
#[derive(Debug, Clone, Copy, PartialEq)]
struct CellSample {
    d: f64,
    objective: f64,
    snr_col: f64,
    snr_veve: f64,
    seconds: f64,
}

fn sample_trial(
    cfg: &HarnessConfig,
    setup: &PointSetup,
    strategies: &[Strategy],
    ao: &AoConfig,
    trial: u64,
) -> Result<Vec<CellSample>> {
    let inst = build_instance(
        cfg,
        &setup.params,
        setup.n_eves,
        setup.num_mas,
        setup.distance_offset_m,
        trial,
    )?;
    let draw = TrialConfig {
        redraw_angles: false,
        fixed_eve_distances: None,
        ..cfg.trial.clone()
    };
    strategies
        .iter()
        .map(|&s| {
            let start = Instant::now();
            let out = run_strategy(s, &inst.problem, ao)?;
            let seconds = start.elapsed().as_secs_f64();
            let scenario = Scenario {
                params: setup.params.clone(),
                array: inst.array.clone(),
                paths: inst.paths.clone(),
                veve: VirtualEve::unchecked(out.d, out.positions)?,
                eve_distances: inst.eve_distances.clone(),
                bob_distance_m: None,
            };
            let m = run_trial(&draw, &scenario, trial)?;
            Ok(CellSample {
                d: out.d,
                objective: out.objective,
                snr_col: m.snr_col,
                snr_veve: m.snr_veve,
                seconds,
            })
        })
        .collect()
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    stable_sum(&v) / v.len() as f64
}

/// Runs every (value, virtual array size, strategy) cell. Cells that fail,
/// e.g. because the virtual array does not fit the movement range, become
/// rows with empty numeric fields plus an entry in `failures`.
pub fn run_sweep(
    spec: &SweepSpec,
    cfg: &HarnessConfig,
    options: RunOptions,
) -> Result<SweepResult> {
    spec.validate()?;
    cfg.validate()?;
    let ao = cfg.ao_config();
    let trials = cfg.trial.num_trials as u64;
    let mut result = SweepResult::default();

    for &value in &spec.values {
        for num_mas in spec.mas_for(value) {
            let setup = point_setup(cfg, spec.variable, value, num_mas);
            let samples = setup.params.validate_for(setup.num_mas).and_then(|_| {
                (0..trials)
                    .into_par_iter()
                    .map(|t| sample_trial(cfg, &setup, &spec.strategies, &ao, t))
                    .collect::<Result<Vec<_>>>()
            });
            for (k, &strategy) in spec.strategies.iter().enumerate() {
                let mut row = ResultRow {
                    sweep_var: spec.variable.as_str().to_string(),
                    sweep_value: value,
                    strategy: strategy.as_str().to_string(),
                    num_mas,
                    d_m: None,
                    expected_delta: None,
                    pct_error: None,
                    runtime_s: 0.0,
                    seed: cfg.trial.seed,
                };
                match &samples {
                    Ok(samples) => {
                        let cell = || samples.iter().map(|s| s[k]);
                        let e_col = mean(cell().map(|c| c.snr_col));
                        let e_veve = mean(cell().map(|c| c.snr_veve));
                        row.d_m = Some(mean(cell().map(|c| c.d)));
                        row.expected_delta = Some(mean(cell().map(|c| c.objective)));
                        row.pct_error = Some(100.0 * percentage_error(e_col, e_veve));
                        if options.record_timing {
                            row.runtime_s = cell().map(|c| c.seconds).sum();
                        }
                    }
                    Err(e) => result.failures.push(RowFailure {
                        sweep_value: value,
                        strategy,
                        num_mas,
                        message: e.to_string(),
                    }),
                }
                result.rows.push(row);
            }
        }
    }
    Ok(result)
}

/// Writes rows as CSV with a header, in the order given.
pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record([
            "sweep_var",
            "sweep_value",
            "strategy",
            "num_mas",
            "d_m",
            "expected_delta",
            "pct_error",
            "runtime_s",
            "seed",
        ])?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// Plot-data files next to `csv_path`: one per metric, whitespace separated,
/// first column the sweep value and one column per `strategy@num_mas`
/// series (`nan` for failed cells).
pub fn emit_plot_data(rows: &[ResultRow], csv_path: &Path) -> Result<Vec<PathBuf>> {
    let mut series: Vec<(String, usize)> = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    for r in rows {
        let key = (r.strategy.clone(), r.num_mas);
        if !series.contains(&key) {
            series.push(key);
        }
        if !xs.contains(&r.sweep_value) {
            xs.push(r.sweep_value);
        }
    }
    let stem = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sweep".into());
    let dir = csv_path.parent().unwrap_or(Path::new("."));
    type Column = fn(&ResultRow) -> Option<f64>;
    let metrics: [(&str, Column); 3] = [
        ("d_m", |r| r.d_m),
        ("expected_delta", |r| r.expected_delta),
        ("pct_error", |r| r.pct_error),
    ];
    let mut written = Vec::new();
    for (name, get) in metrics {
        let mut text = String::from("x");
        for (s, m) in &series {
            let _ = write!(text, " {s}@{m}");
        }
        text.push('\n');
        for &x in &xs {
            let _ = write!(text, "{x}");
            for (s, m) in &series {
                let v = rows
                    .iter()
                    .find(|r| r.sweep_value == x && &r.strategy == s && r.num_mas == *m)
                    .and_then(get);
                match v {
                    Some(v) => {
                        let _ = write!(text, " {v}");
                    }
                    None => text.push_str(" nan"),
                }
            }
            text.push('\n');
        }
        let path = dir.join(format!("{stem}_{name}.dat"));
        fs::write(&path, text)?;
        written.push(path);
    }
    Ok(written)
}

/// Eavesdropper distances of the three rows of the secrecy-rate table.
pub const TABLE2_EVE_DISTANCES: [[f64; 3]; 3] =
    [[50.0, 50.5, 53.0], [58.0, 58.5, 61.0], [68.0, 68.5, 71.0]];

/// Bob's distance for the secrecy-rate table.
pub const TABLE2_BOB_DISTANCE_M: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Table2Row {
    pub eve_distances: Vec<f64>,
    pub d_m: f64,
    pub positions: Vec<f64>,
    pub secrecy_col: f64,
    pub secrecy_veve: f64,
    /// `(R_col − R_veve) / R_col`.
    pub error: f64,
    pub e_snr_col: f64,
    pub e_snr_veve: f64,
}

/// Secrecy rates of the colluding set and of the jointly optimised virtual
/// eavesdropper for the fixed table rows. Angles are drawn once from the
/// configured seed; the averages run over `cfg.trial.num_trials` draws.
pub fn run_table2(cfg: &HarnessConfig) -> Result<Vec<Table2Row>> {
    cfg.validate()?;
    let params = &cfg.params;
    let array = TransmitArray::default_for(params, cfg.n_bs_antennas)?;
    let paths = PathSet::random(
        params.num_paths,
        &mut substream(cfg.trial.seed, 0, Entity::Angles),
    )?;
    let ao = cfg.ao_config();
    TABLE2_EVE_DISTANCES
        .iter()
        .map(|row| {
            let eves = row.to_vec();
            let problem =
                EquivalenceProblem::new(&array, &paths, params, eves.clone(), eves.len())?;
            let state = jo_edap_ao(&ao, &problem, None)?;
            let trial = TrialConfig {
                fixed_eve_distances: Some(eves.clone()),
                redraw_angles: false,
                ..cfg.trial.clone()
            };
            let scenario = Scenario {
                params: params.clone(),
                array: array.clone(),
                paths: paths.clone(),
                veve: VirtualEve::unchecked(state.d, state.positions.clone())?,
                eve_distances: eves.clone(),
                bob_distance_m: Some(TABLE2_BOB_DISTANCE_M),
            };
            let report = empirical_expectations(&trial, &scenario)?;
            let secrecy_col = report.mean_secrecy_col.unwrap_or(f64::NAN);
            let secrecy_veve = report.mean_secrecy_veve.unwrap_or(f64::NAN);
            Ok(Table2Row {
                eve_distances: eves,
                d_m: state.d,
                positions: state.positions,
                secrecy_col,
                secrecy_veve,
                error: (secrecy_col - secrecy_veve) / secrecy_col,
                e_snr_col: report.e_snr_col,
                e_snr_veve: report.e_snr_veve,
            })
        })
        .collect()
}

pub fn emit_table2_csv(rows: &[Table2Row], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "eve_distances_m",
        "d_m",
        "secrecy_col",
        "secrecy_veve",
        "error_pct",
    ])?;
    for r in rows {
        let eves: Vec<String> = r.eve_distances.iter().map(|d| d.to_string()).collect();
        w.write_record([
            eves.join(" "),
            r.d_m.to_string(),
            r.secrecy_col.to_string(),
            r.secrecy_veve.to_string(),
            (100.0 * r.error).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Alternating optimisation on the instance of trial 0.
pub fn run_convergence(cfg: &HarnessConfig) -> Result<AoState> {
    cfg.validate()?;
    let inst = build_instance(cfg, &cfg.params, cfg.n_eves, cfg.n_virtual_mas, 0.0, 0)?;
    jo_edap_ao(&cfg.ao_config(), &inst.problem, None)
}

pub fn emit_history_csv(state: &AoState, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iter", "d_m", "expected_delta", "positions_m"])?;
    for h in &state.history {
        let pos: Vec<String> = h.positions.iter().map(|r| r.to_string()).collect();
        w.write_record([
            h.iter.to_string(),
            h.d.to_string(),
            h.objective.to_string(),
            pos.join(" "),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties; `NaN` when either
/// side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman: length mismatch");
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(trials: usize) -> HarnessConfig {
        let mut cfg = HarnessConfig::default();
        cfg.trial.num_trials = trials;
        cfg
    }

    #[test]
    fn percentage_error_cases() {
        assert_eq!(percentage_error(5.0, 5.0), 0.0);
        assert!((percentage_error(100.0, 93.0) - 0.07).abs() < 1e-15);
    }

    #[test]
    fn config_round_trips_through_text() {
        let mut cfg = HarnessConfig::default();
        cfg.params.alpha = 3.0;
        cfg.n_eves = 6;
        cfg.set_seed(17);
        let back = HarnessConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn config_parsing() {
        let cfg = HarnessConfig::parse(
            "# comment\nalpha = 3 # trailing\n\nn_eves=5\neve_dist_var_m2 = 25\n",
        )
        .unwrap();
        assert_eq!(cfg.params.alpha, 3.0);
        assert_eq!(cfg.n_eves, 5);
        assert_eq!(cfg.trial.eve_distance_std_m, 5.0);
        assert!(HarnessConfig::parse("bogus = 1").is_err());
        assert!(HarnessConfig::parse("alpha 3").is_err());
        assert!(HarnessConfig::parse("alpha = x").is_err());
        assert!(HarnessConfig::parse("noise_power_mw = -1").is_err());
    }

    #[test]
    fn names_round_trip() {
        for v in SweepVariable::ALL {
            assert_eq!(v.as_str().parse::<SweepVariable>().unwrap(), v);
        }
        for s in Strategy::ALL {
            assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
        }
        assert!("nope".parse::<Strategy>().is_err());
    }

    #[test]
    fn spec_validation() {
        let cfg = HarnessConfig::default();
        let mut spec = SweepSpec::new(SweepVariable::NumEves, &cfg);
        spec.validate().unwrap();
        spec.values = vec![2.5];
        assert!(spec.validate().is_err());
        spec.values.clear();
        assert!(spec.validate().is_err());
    }

    #[test]
    fn spearman_cases() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 1.0, 0.0]) + 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]) - 0.8).abs() < 1e-12);
        assert!(spearman(&[1.0, 2.0], &[1.0, 1.0]).is_nan());
    }

    #[test]
    fn infeasible_cell_becomes_error_row() {
        let cfg = small_config(3);
        let spec = SweepSpec {
            variable: SweepVariable::NumEves,
            values: vec![4.0],
            strategies: vec![Strategy::Joint],
            ma_counts: vec![4, 12],
        };
        let out = run_sweep(&spec, &cfg, RunOptions::default()).unwrap();
        assert_eq!(out.rows.len(), 2);
        assert!(out.rows[0].d_m.is_some());
        assert!(out.rows[1].d_m.is_none());
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].num_mas, 12);
    }

    #[test]
    fn joint_dominates_distance_only() {
        let cfg = HarnessConfig::default();
        for t in 0..20 {
            let inst = build_instance(&cfg, &cfg.params, 4, 4, 0.0, t).unwrap();
            let joint = run_strategy(Strategy::Joint, &inst.problem, &cfg.ao_config()).unwrap();
            let dist =
                run_strategy(Strategy::DistanceOnly, &inst.problem, &cfg.ao_config()).unwrap();
            assert!(dist.objective >= 0.0 && joint.objective >= 0.0);
            // Both sit at their own zero-gap distance; the joint one reaches a
            // smaller combining sum and hence a distance no larger.
            let (sj, sd) = (
                inst.problem.combining_sum(&joint.positions),
                inst.problem.combining_sum(&dist.positions),
            );
            assert!(sj <= sd * (1.0 + 1e-12));
            assert!(joint.d <= dist.d * (1.0 + 1e-12));
        }
    }

    #[test]
    fn csv_round_trip_and_plot_data() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        emit_csv(&[], &path).unwrap();
        assert_eq!(
            fs::read_to_string(&path).unwrap(),
            "sweep_var,sweep_value,strategy,num_mas,d_m,expected_delta,pct_error,runtime_s,seed\n"
        );
        assert!(load_csv(&path).unwrap().is_empty());

        let cfg = small_config(4);
        let spec = SweepSpec {
            variable: SweepVariable::PathLossExponent,
            values: vec![2.0, 3.0],
            strategies: Strategy::ALL.to_vec(),
            ma_counts: vec![4],
        };
        let out = run_sweep(&spec, &cfg, RunOptions::default()).unwrap();
        emit_csv(&out.rows, &path).unwrap();
        assert_eq!(load_csv(&path).unwrap(), out.rows);
        let files = emit_plot_data(&out.rows, &path).unwrap();
        assert_eq!(files.len(), 3);
        let text = fs::read_to_string(&files[0]).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("x joint@4 distance_only@4 positions_only_avg_distance@4\n"));
    }
}
