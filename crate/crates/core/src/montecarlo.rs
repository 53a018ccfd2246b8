//! Seeded sampling of path responses and eavesdropper deployments, plus the
//! empirical estimators used to check every closed form.
//!
//! Each trial draws independent generators per entity (Bob, every real
//! eavesdropper, the virtual eavesdropper) from `(seed, trial, entity)`, so
//! trials can run in any order or in parallel and still reproduce bit for
//! bit.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;

use crate::channel::{
    bob_channel, eve_channel, virtual_eve_channel, PathResponse, PathSet, TransmitArray, VirtualEve,
};
use crate::error::{Error, Result};
use crate::metrics::{
    capacity, collusion_capacity, secrecy_rate, snr_eve, stable_sum, virtual_eve_snr,
};
use crate::params::SystemParams;
use crate::C64;

/// Distances below this are redrawn.
pub const MIN_EVE_DISTANCE_M: f64 = 1.0;

/// Independent random streams inside one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Entity {
    Bob,
    Eve(usize),
    VirtualEve,
    Angles,
    Distances,
}

impl Entity {
    fn id(self) -> u64 {
        match self {
            Entity::Bob => 1,
            Entity::VirtualEve => 2,
            Entity::Angles => 3,
            Entity::Distances => 4,
            Entity::Eve(m) => 16 + m as u64,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for `entity` in trial `trial` of the run seeded with `seed`.
pub fn substream(seed: u64, trial: u64, entity: Entity) -> ChaCha8Rng {
    let mixed = splitmix64(splitmix64(splitmix64(seed) ^ trial) ^ entity.id());
    ChaCha8Rng::seed_from_u64(mixed)
}

/// Diagonal path response with i.i.d. circular complex Gaussian entries,
/// `E[|σ_l|²] = g0·d^(−α)/L` split evenly between real and imaginary parts.
pub fn sample_path_response<R: Rng + ?Sized>(
    distance_m: f64,
    params: &SystemParams,
    rng: &mut R,
) -> Result<PathResponse> {
    if !(distance_m > 0.0 && distance_m.is_finite()) {
        return Err(Error::domain("distance", distance_m, "> 0"));
    }
    let sd = (params.path_variance(distance_m) / 2.0).sqrt();
    Ok(PathResponse(
        (0..params.num_paths)
            .map(|_| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                C64::new(sd * re, sd * im)
            })
            .collect(),
    ))
}

/// Gaussian eavesdropper distances, redrawn while below [`MIN_EVE_DISTANCE_M`].
pub fn draw_eve_distances<R: Rng + ?Sized>(
    mean_m: f64,
    std_m: f64,
    count: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(mean_m > MIN_EVE_DISTANCE_M) {
        return Err(Error::domain("eve_dist_mean_m", mean_m, "> 1 m"));
    }
    if !(std_m >= 0.0 && std_m.is_finite()) {
        return Err(Error::domain("eve_dist_std_m", std_m, ">= 0"));
    }
    let normal = Normal::new(mean_m, std_m).map_err(|e| Error::Config(e.to_string()))?;
    Ok((0..count)
        .map(|_| loop {
            let d = normal.sample(rng);
            if d >= MIN_EVE_DISTANCE_M {
                break d;
            }
        })
        .collect())
}

/// Trial-level settings of an averaging run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub num_trials: usize,
    pub seed: u64,
    pub eve_distance_mean_m: f64,
    /// Standard deviation of the eavesdropper distance draw.
    pub eve_distance_std_m: f64,
    /// Replaces the random distance draw when set.
    pub fixed_eve_distances: Option<Vec<f64>>,
    /// Redraw the path angles in every trial instead of once per scenario.
    pub redraw_angles: bool,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            num_trials: 5000,
            seed: 1,
            eve_distance_mean_m: 40.0,
            eve_distance_std_m: 5.0,
            fixed_eve_distances: None,
            redraw_angles: false,
        }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_trials == 0 {
            return Err(Error::domain("num_trials", 0.0, ">= 1"));
        }
        if !(self.eve_distance_std_m >= 0.0) {
            return Err(Error::domain(
                "eve_dist_std_m",
                self.eve_distance_std_m,
                ">= 0",
            ));
        }
        Ok(())
    }

    /// Eavesdropper distances for `trial`, either fixed or drawn from the
    /// trial's own stream. Draws are sequential, so the first `k` distances
    /// do not depend on `count`.
    pub fn eve_distances(&self, trial: u64, count: usize) -> Result<Vec<f64>> {
        match &self.fixed_eve_distances {
            Some(d) if d.len() == count => Ok(d.clone()),
            Some(d) => Err(Error::Dimension {
                context: "fixed eve distances",
                expected: count,
                got: d.len(),
            }),
            None => {
                let mut rng = substream(self.seed, trial, Entity::Distances);
                draw_eve_distances(
                    self.eve_distance_mean_m,
                    self.eve_distance_std_m,
                    count,
                    &mut rng,
                )
            }
        }
    }
}

/// A fully specified geometry: everything except the path-response draws.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub params: SystemParams,
    pub array: TransmitArray,
    pub paths: PathSet,
    pub veve: VirtualEve,
    pub eve_distances: Vec<f64>,
    /// Needed for secrecy rates; without it only SNR statistics are produced.
    pub bob_distance_m: Option<f64>,
}

/// Instantaneous quantities of one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub snr_col: f64,
    pub snr_veve: f64,
    pub snr_bob: Option<f64>,
    pub secrecy_col: Option<f64>,
    pub secrecy_veve: Option<f64>,
}

/// Sample means over all trials.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalReport {
    pub num_trials: usize,
    pub e_snr_col: f64,
    pub e_snr_veve: f64,
    pub e_delta: f64,
    /// Standard error of the mean of `SNR_col` and `SNR_veve`.
    pub se_snr_col: f64,
    pub se_snr_veve: f64,
    pub mean_secrecy_col: Option<f64>,
    pub mean_secrecy_veve: Option<f64>,
    pub trials: Vec<TrialOutcome>,
}

/// Instantaneous metrics of trial `trial` for a fixed scenario.
pub fn run_trial(config: &TrialConfig, scenario: &Scenario, trial: u64) -> Result<TrialOutcome> {
    let p = &scenario.params;
    let redrawn;
    let paths = if config.redraw_angles {
        let mut rng = substream(config.seed, trial, Entity::Angles);
        redrawn = PathSet::random(p.num_paths, &mut rng)?;
        &redrawn
    } else {
        &scenario.paths
    };
    let w = scenario.array.beamformer();

    let mut per_eve = Vec::with_capacity(scenario.eve_distances.len());
    for (m, &d) in scenario.eve_distances.iter().enumerate() {
        let mut rng = substream(config.seed, trial, Entity::Eve(m));
        let sigma = sample_path_response(d, p, &mut rng)?;
        let h = eve_channel(&scenario.array, paths, &sigma, p.wavelength_m)?;
        per_eve.push(snr_eve(h.view(), w, p.noise_power_mw)?);
    }
    let snr_col = stable_sum(&per_eve);

    let mut rng = substream(config.seed, trial, Entity::VirtualEve);
    let sigma = sample_path_response(scenario.veve.distance_m(), p, &mut rng)?;
    let h = virtual_eve_channel(
        &scenario.array,
        &scenario.veve,
        paths,
        &sigma,
        p.wavelength_m,
    )?;
    let snr_veve = virtual_eve_snr(&h, w, p.noise_power_mw)?;

    let (snr_bob, secrecy_col, secrecy_veve) = match scenario.bob_distance_m {
        Some(d) => {
            let mut rng = substream(config.seed, trial, Entity::Bob);
            let sigma = sample_path_response(d, p, &mut rng)?;
            let h = bob_channel(&scenario.array, paths, &sigma, p.wavelength_m)?;
            let snr = snr_eve(h.view(), w, p.noise_power_mw)?;
            let c_bob = capacity(snr);
            (
                Some(snr),
                Some(secrecy_rate(c_bob, collusion_capacity(&per_eve)?)),
                Some(secrecy_rate(c_bob, capacity(snr_veve))),
            )
        }
        None => (None, None, None),
    };
    Ok(TrialOutcome {
        snr_col,
        snr_veve,
        snr_bob,
        secrecy_col,
        secrecy_veve,
    })
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = stable_sum(values) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let var = stable_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Sample means of the instantaneous metrics over `config.num_trials`
/// independent path-response draws.
pub fn empirical_expectations(
    config: &TrialConfig,
    scenario: &Scenario,
) -> Result<EmpiricalReport> {
    config.validate()?;
    let trials = (0..config.num_trials as u64)
        .into_par_iter()
        .map(|t| run_trial(config, scenario, t))
        .collect::<Result<Vec<_>>>()?;

    let col: Vec<f64> = trials.iter().map(|t| t.snr_col).collect();
    let veve: Vec<f64> = trials.iter().map(|t| t.snr_veve).collect();
    let (e_snr_col, se_snr_col) = mean_and_se(&col);
    let (e_snr_veve, se_snr_veve) = mean_and_se(&veve);
    let secrecy_mean = |f: fn(&TrialOutcome) -> Option<f64>| -> Option<f64> {
        let v: Option<Vec<f64>> = trials.iter().map(f).collect();
        v.map(|v| stable_sum(&v) / v.len() as f64)
    };
    Ok(EmpiricalReport {
        num_trials: trials.len(),
        e_snr_col,
        e_snr_veve,
        e_delta: e_snr_veve - e_snr_col,
        se_snr_col,
        se_snr_veve,
        mean_secrecy_col: secrecy_mean(|t| t.secrecy_col),
        mean_secrecy_veve: secrecy_mean(|t| t.secrecy_veve),
        trials,
    })
}

/// Empirical second-moment matrix `E[σ_u·σ_v*]` and the standard error of
/// each entry.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossTermEstimate {
    pub mean: Array2<C64>,
    /// Standard error of the complex mean, `sqrt(E|x − x̄|² / n)`.
    pub std_error: Array2<f64>,
    pub num_trials: usize,
}

pub fn cross_term_probe<R: Rng + ?Sized>(
    distance_m: f64,
    params: &SystemParams,
    num_trials: usize,
    rng: &mut R,
) -> Result<CrossTermEstimate> {
    if num_trials < 2 {
        return Err(Error::domain("num_trials", num_trials as f64, ">= 2"));
    }
    let l = params.num_paths;
    let mut samples: Vec<Vec<C64>> = vec![Vec::with_capacity(num_trials); l * l];
    for _ in 0..num_trials {
        let s = sample_path_response(distance_m, params, rng)?;
        for u in 0..l {
            for v in 0..l {
                samples[u * l + v].push(s.0[u] * s.0[v].conj());
            }
        }
    }
    let n = num_trials as f64;
    let mut mean = Array2::zeros((l, l));
    let mut std_error = Array2::zeros((l, l));
    for u in 0..l {
        for v in 0..l {
            let xs = &samples[u * l + v];
            let re: Vec<f64> = xs.iter().map(|x| x.re).collect();
            let im: Vec<f64> = xs.iter().map(|x| x.im).collect();
            let mu = C64::new(stable_sum(&re) / n, stable_sum(&im) / n);
            let dev: Vec<f64> = xs.iter().map(|x| (x - mu).norm_sqr()).collect();
            mean[[u, v]] = mu;
            std_error[[u, v]] = (stable_sum(&dev) / (n - 1.0) / n).sqrt();
        }
    }
    Ok(CrossTermEstimate {
        mean,
        std_error,
        num_trials,
    })
}
