//! Alternating optimisation of the equivalent distance `d` and the virtual
//! array positions `R`.
//!
//! For fixed `R` the distance step is exact: `E[ΔSNR]` is a decreasing power
//! law in `d`, and its zero `d_max(R)` is the smallest nonnegative value. For
//! fixed `d` the position step minimises the slack sum `Σ_m v_m` with
//! `v_m ≥ p_m² + q_m²`, where `p_m + i·q_m = Σ_u α_u(r_m)·γ_u`. Because `p_m`
//! and `q_m` are trigonometric in `r_m`, that step is solved by successive
//! convexification: the phases are linearised around the current iterate,
//! which turns the slack problem into a separable convex quadratic over the
//! ordered, spaced positions, solved exactly by weighted isotonic regression.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::channel::{PathSet, TransmitArray};
use crate::error::{Error, Result};
use crate::expectation::{self, gamma_coefficients, gamma_energy, ExpectationInputs};
use crate::params::{PositionBounds, SystemParams};
use crate::C64;

/// One equivalence instance: the fixed transmit side, the real
/// eavesdroppers, and the size and feasible region of the virtual array.
#[derive(Debug, Clone)]
pub struct EquivalenceProblem {
    params: SystemParams,
    gamma: Vec<C64>,
    /// `k·cos θ_u` for every arrival angle.
    spatial_freqs: Vec<f64>,
    paths: PathSet,
    eve_distances: Vec<f64>,
    num_antennas: usize,
    bounds: PositionBounds,
    e_snr_col: f64,
}

impl EquivalenceProblem {
    pub fn new(
        array: &TransmitArray,
        paths: &PathSet,
        params: &SystemParams,
        eve_distances: Vec<f64>,
        num_antennas: usize,
    ) -> Result<Self> {
        params.validate_for(num_antennas)?;
        if num_antennas == 0 {
            return Err(Error::domain("num_virtual_mas", 0.0, ">= 1"));
        }
        if eve_distances.is_empty() {
            return Err(Error::domain("num_eves", 0.0, ">= 1"));
        }
        if paths.len() != params.num_paths {
            return Err(Error::Dimension {
                context: "paths vs num_paths",
                expected: params.num_paths,
                got: paths.len(),
            });
        }
        let gamma = gamma_coefficients(array, paths, params.wavelength_m);
        let k = params.wavenumber();
        let spatial_freqs = paths.arrival_cosines().iter().map(|c| k * c).collect();
        let mut problem = EquivalenceProblem {
            params: params.clone(),
            gamma,
            spatial_freqs,
            paths: paths.clone(),
            eve_distances,
            num_antennas,
            bounds: params.bounds(),
            e_snr_col: 0.0,
        };
        let placeholder = problem.bounds.uniform_spread(num_antennas)?;
        problem.e_snr_col = expectation::expected_snr_col(&problem.inputs(&placeholder, 1.0)?)?;
        Ok(problem)
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn bounds(&self) -> PositionBounds {
        self.bounds
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn eve_distances(&self) -> &[f64] {
        &self.eve_distances
    }

    pub fn gamma(&self) -> &[C64] {
        &self.gamma
    }

    /// Closed-form `E[SNR_col]`; does not depend on `d` or `R`.
    pub fn e_snr_col(&self) -> f64 {
        self.e_snr_col
    }

    /// Same instance with a different virtual array size.
    pub fn with_num_antennas(&self, num_antennas: usize) -> Result<Self> {
        self.params.validate_for(num_antennas)?;
        Ok(EquivalenceProblem {
            num_antennas,
            ..self.clone()
        })
    }

    /// Closed-form inputs for positions `positions` and distance `d`.
    pub fn inputs(&self, positions: &[f64], d: f64) -> Result<ExpectationInputs> {
        let alphas = expectation::alpha_matrix(positions, &self.paths, self.params.wavelength_m);
        ExpectationInputs::new(
            self.gamma.clone(),
            alphas,
            self.params.clone(),
            self.eve_distances.clone(),
            d,
        )
    }

    /// `Σ_u γ_u·exp(i·k·r·cos θ_u) = p + i·q` at coordinate `r`.
    pub fn combined(&self, r: f64) -> C64 {
        self.gamma
            .iter()
            .zip(&self.spatial_freqs)
            .map(|(g, w)| g * C64::from_polar(1.0, w * r))
            .sum()
    }

    /// `(p, q, ∂p/∂r, ∂q/∂r)` at `r`.
    pub fn linearization(&self, r: f64) -> (f64, f64, f64, f64) {
        let mut z = C64::new(0.0, 0.0);
        let mut dz = C64::new(0.0, 0.0);
        for (g, w) in self.gamma.iter().zip(&self.spatial_freqs) {
            let term = g * C64::from_polar(1.0, w * r);
            z += term;
            dz += term * C64::new(0.0, *w);
        }
        (z.re, z.im, dz.re, dz.im)
    }

    /// Per-antenna gain `|Σ_u α_u(r)·γ_u|²`.
    pub fn antenna_gain(&self, r: f64) -> f64 {
        self.combined(r).norm_sqr()
    }

    /// Analytic derivative of [`antenna_gain`](Self::antenna_gain).
    pub fn antenna_gain_derivative(&self, r: f64) -> f64 {
        let (p, q, dp, dq) = self.linearization(r);
        2.0 * (p * dp + q * dq)
    }

    /// `Σ_m |Σ_u α_u(r_m)·γ_u|²`, the slack sum at equality.
    pub fn combining_sum(&self, positions: &[f64]) -> f64 {
        positions.iter().map(|&r| self.antenna_gain(r)).sum()
    }

    /// `g0·d^(−α)/(L·σ²)`.
    pub fn distance_scale(&self, d: f64) -> f64 {
        let p = &self.params;
        p.g0_linear() * d.powf(-p.alpha) / (p.num_paths as f64 * p.noise_power_mw)
    }

    /// Closed-form `E[ΔSNR]` at `(d, R)`.
    pub fn objective(&self, d: f64, positions: &[f64]) -> f64 {
        self.distance_scale(d) * self.combining_sum(positions) - self.e_snr_col
    }

    pub fn initial_positions(&self) -> Result<Vec<f64>> {
        self.bounds.uniform_spread(self.num_antennas)
    }
}

/// Distance step: the zero-gap distance `d_max(R)`.
pub fn optimize_distance(problem: &EquivalenceProblem, positions: &[f64]) -> Result<f64> {
    problem.bounds.check(positions)?;
    expectation::d_max(&problem.inputs(positions, 1.0)?)
}

/// `d_max(R)` pulled in by a few ulps when rounding leaves the gap negative,
/// so that `E[ΔSNR] ≥ 0` holds exactly at the returned distance.
pub fn feasible_distance(problem: &EquivalenceProblem, positions: &[f64]) -> Result<f64> {
    let d0 = optimize_distance(problem, positions)?;
    // Near a null of the combining sum the two evaluations of the gap can
    // disagree by more than a few ulps, so the pull-in grows geometrically.
    let mut shrink = 4.0 * f64::EPSILON;
    let mut d = d0;
    while problem.objective(d, positions) < 0.0 {
        d = d0 * (1.0 - shrink);
        shrink *= 2.0;
        if shrink > 1e-3 {
            return Err(Error::Degenerate(
                "could not make the gap nonnegative".into(),
            ));
        }
    }
    Ok(d)
}

/// Linearised slack model at one iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemModel {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// Slack values at equality, `v_m = p_m² + q_m²`.
    pub v: Vec<f64>,
}

impl SubproblemModel {
    pub fn at(problem: &EquivalenceProblem, positions: &[f64]) -> Self {
        let mut p = Vec::with_capacity(positions.len());
        let mut q = Vec::with_capacity(positions.len());
        for &r in positions {
            let z = problem.combined(r);
            p.push(z.re);
            q.push(z.im);
        }
        let v = p.iter().zip(&q).map(|(a, b)| a * a + b * b).collect();
        SubproblemModel { p, q, v }
    }

    pub fn is_feasible(&self) -> bool {
        self.v
            .iter()
            .zip(self.p.iter().zip(&self.q))
            .all(|(v, (p, q))| *v >= p * p + q * q - 1e-12 * v.abs().max(1.0))
    }
}

/// Weighted least squares onto non-decreasing sequences (pool adjacent
/// violators).
pub(crate) fn isotonic_regression(targets: &[f64], weights: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(targets.len());
    for (&y, &w) in targets.iter().zip(weights) {
        blocks.push((y, w, 1));
        while blocks.len() >= 2 {
            let (v2, w2, n2) = blocks[blocks.len() - 1];
            let (v1, w1, n1) = blocks[blocks.len() - 2];
            if v1 <= v2 {
                break;
            }
            blocks.pop();
            let last = blocks.last_mut().unwrap();
            *last = ((v1 * w1 + v2 * w2) / (w1 + w2), w1 + w2, n1 + n2);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(v, _, n)| std::iter::repeat_n(v, n))
        .collect()
}

/// Minimises `Σ_m weight_m·(r_m − target_m)²` over the feasible region.
///
/// Substituting `s_m = r_m − (m−1)·D_min` maps the spacing rule onto
/// `s_1 ≤ … ≤ s_M` inside the common box `[0, A − (M−1)·D_min]`, whose
/// weighted projection is isotonic regression followed by clipping.
pub fn project_weighted(bounds: &PositionBounds, targets: &[f64], weights: &[f64]) -> Vec<f64> {
    let m = targets.len();
    if m == 0 {
        return Vec::new();
    }
    let hi = (bounds.range_m - (m - 1) as f64 * bounds.d_min_m).max(0.0);
    let shifted: Vec<f64> = targets
        .iter()
        .enumerate()
        .map(|(i, t)| t - i as f64 * bounds.d_min_m)
        .collect();
    isotonic_regression(&shifted, weights)
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.clamp(0.0, hi) + i as f64 * bounds.d_min_m)
        .map(|r| r.min(bounds.range_m))
        .collect()
}

/// Euclidean projection onto the feasible region.
pub fn project(bounds: &PositionBounds, targets: &[f64]) -> Vec<f64> {
    project_weighted(bounds, targets, &vec![1.0; targets.len()])
}

/// Result of the successive-convexification position solver.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaOutcome {
    pub positions: Vec<f64>,
    /// Slack sum `Σ_m v_m` at the returned positions.
    pub combining_sum: f64,
    pub inner_iterations: usize,
    /// Damping budget ran out while the model still predicted descent.
    pub stagnated: bool,
}

const MAX_DAMPING_STEPS: usize = 40;

/// Successive convexification of the position subproblem at fixed `d`.
///
/// Each inner iteration linearises `p_m(r)` and `q_m(r)` around the current
/// positions, minimises the resulting convex quadratic
/// `Σ_m (p_m + p'_m·δ_m)² + (q_m + q'_m·δ_m)² + μ·c_m·δ_m²` over the feasible
/// region, and accepts the step only if the true slack sum decreases;
/// otherwise `μ` grows. Stops once the change of `E[ΔSNR]` at `d` is below
/// `tol·E[SNR_col]`, or after `max_inner` iterations.
pub fn solve_subproblem_sca(
    problem: &EquivalenceProblem,
    d: f64,
    positions0: &[f64],
    max_inner: usize,
    tol: f64,
) -> Result<ScaOutcome> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::domain("d", d, "> 0"));
    }
    problem.bounds.check(positions0)?;
    let scale = problem.distance_scale(d);
    let threshold = tol * problem.e_snr_col.max(f64::MIN_POSITIVE);
    let mut r = positions0.to_vec();
    let mut current = problem.combining_sum(&r);
    let mut damping = 0.0f64;
    let mut stagnated = false;
    let mut iterations = 0;

    for _ in 0..max_inner {
        iterations += 1;
        let lin: Vec<(f64, f64, f64, f64)> = r.iter().map(|&x| problem.linearization(x)).collect();
        let curvature: Vec<f64> = lin.iter().map(|(_, _, dp, dq)| dp * dp + dq * dq).collect();
        let slope: Vec<f64> = lin
            .iter()
            .map(|(p, q, dp, dq)| 2.0 * (p * dp + q * dq))
            .collect();
        let floor = 1e-12 * curvature.iter().cloned().fold(0.0, f64::max) + f64::MIN_POSITIVE;

        let mut accepted = None;
        let mut stationary = false;
        for _ in 0..MAX_DAMPING_STEPS {
            let weights: Vec<f64> = curvature
                .iter()
                .map(|c| c * (1.0 + damping) + floor)
                .collect();
            let targets: Vec<f64> = r
                .iter()
                .zip(slope.iter().zip(&weights))
                .map(|(x, (g, w))| x - g / (2.0 * w))
                .collect();
            let candidate = project_weighted(&problem.bounds, &targets, &weights);
            let step: f64 = candidate
                .iter()
                .zip(&r)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if step <= 1e-15 * problem.bounds.range_m.max(1e-300) {
                stationary = true;
                break;
            }
            let value = problem.combining_sum(&candidate);
            if value < current {
                accepted = Some((candidate, value));
                damping = (damping / 4.0).max(0.0);
                if damping < 1e-6 {
                    damping = 0.0;
                }
                break;
            }
            damping = if damping == 0.0 { 1e-3 } else { damping * 8.0 };
        }

        match accepted {
            Some((candidate, value)) => {
                let change = scale * (current - value);
                r = candidate;
                current = value;
                if change < threshold {
                    break;
                }
            }
            None => {
                stagnated = !stationary;
                break;
            }
        }
    }

    Ok(ScaOutcome {
        positions: r,
        combining_sum: current,
        inner_iterations: iterations,
        stagnated,
    })
}

/// Best lattice placement of the virtual antennas by dynamic programming;
/// used only to seed the continuous solver.
fn lattice_seed(problem: &EquivalenceProblem) -> Option<Vec<f64>> {
    let b = problem.bounds;
    let m = problem.num_antennas;
    let lambda = problem.params.wavelength_m;
    let steps_per_spacing = (b.d_min_m / (lambda / 40.0)).ceil().max(1.0) as usize;
    let h = b.d_min_m / steps_per_spacing as f64;
    let count = (b.range_m / h + 1e-9).floor() as usize + 1;
    if (m - 1) * steps_per_spacing >= count {
        return None;
    }
    let gains: Vec<f64> = (0..count)
        .map(|j| problem.antenna_gain(j as f64 * h))
        .collect();

    // best[i][j]: cheapest placement of antennas 0..=i with antenna i at j.
    let mut best = vec![vec![f64::INFINITY; count]; m];
    let mut from = vec![vec![usize::MAX; count]; m];
    best[0].clone_from(&gains);
    for i in 1..m {
        let (mut run_min, mut run_arg) = (f64::INFINITY, usize::MAX);
        for j in 0..count {
            if j >= steps_per_spacing {
                let k = j - steps_per_spacing;
                if best[i - 1][k] < run_min {
                    run_min = best[i - 1][k];
                    run_arg = k;
                }
            }
            if run_arg != usize::MAX {
                best[i][j] = run_min + gains[j];
                from[i][j] = run_arg;
            }
        }
    }
    let (mut j, _) = best[m - 1]
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let mut idx = vec![0usize; m];
    for i in (0..m).rev() {
        idx[i] = j;
        if i > 0 {
            j = from[i][j];
        }
    }
    let seed: Vec<f64> = idx.iter().map(|&j| (j as f64 * h).min(b.range_m)).collect();
    b.is_feasible(&seed).then_some(seed)
}

/// Outcome of one position step.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionStep {
    pub positions: Vec<f64>,
    pub stagnated: bool,
}

/// Position step at fixed `d`: successive convexification started from the
/// current positions and from a lattice seed; the best result is kept only
/// if it lowers the slack sum, so the objective never increases.
pub fn optimize_positions(
    problem: &EquivalenceProblem,
    d: f64,
    positions: &[f64],
    max_inner: usize,
    tol: f64,
) -> Result<PositionStep> {
    problem.bounds.check_capacity(problem.num_antennas)?;
    if positions.len() != problem.num_antennas {
        return Err(Error::Dimension {
            context: "virtual array positions",
            expected: problem.num_antennas,
            got: positions.len(),
        });
    }
    let start = problem.combining_sum(positions);
    let mut best = solve_subproblem_sca(problem, d, positions, max_inner, tol)?;
    if let Some(seed) = lattice_seed(problem) {
        let alt = solve_subproblem_sca(problem, d, &seed, max_inner, tol)?;
        if alt.combining_sum < best.combining_sum {
            best = alt;
        }
    }
    // Ties keep the input so flat landscapes are left untouched.
    let improved = best.combining_sum < start - 1e-12 * start.abs();
    Ok(PositionStep {
        positions: if improved {
            best.positions
        } else {
            positions.to_vec()
        },
        stagnated: best.stagnated,
    })
}

/// Lattice certificate at fixed `d`: exhaustive search over sorted, spaced
/// lattice placements with spacing `resolution`. Returns the positions and
/// `E[ΔSNR]`; ties resolve to the lexicographically smallest placement.
pub fn grid_certifier(
    problem: &EquivalenceProblem,
    d: f64,
    resolution: f64,
) -> Result<(Vec<f64>, f64)> {
    let m = problem.num_antennas;
    if m > 3 {
        return Err(Error::Config(format!(
            "grid certifier supports M <= 3, got {m}"
        )));
    }
    let lambda = problem.params.wavelength_m;
    if !(resolution >= lambda / 200.0 * (1.0 - 1e-12)) {
        return Err(Error::domain("resolution", resolution, ">= lambda/200"));
    }
    if !(d > 0.0) {
        return Err(Error::domain("d", d, "> 0"));
    }
    let b = problem.bounds;
    b.check_capacity(m)?;
    let count = (b.range_m / resolution + 1e-9).floor() as usize + 1;
    let gains: Vec<f64> = (0..count)
        .map(|j| problem.antenna_gain(j as f64 * resolution))
        .collect();
    let min_gap = (b.d_min_m / resolution - 1e-9).ceil() as usize;

    // Values within a relative 1e-12 count as ties so rounding noise cannot
    // override the lexicographic rule.
    let better = |a: &(f64, Vec<usize>), b: &(f64, Vec<usize>)| {
        let tie = 1e-12 * a.0.abs().max(b.0.abs());
        a.0 < b.0 - tie || ((a.0 - b.0).abs() <= tie && a.1 < b.1)
    };
    let best: Option<(f64, Vec<usize>)> = match m {
        1 => (0..count)
            .map(|i| (gains[i], vec![i]))
            .reduce(|a, b| if better(&b, &a) { b } else { a }),
        2 => (0..count)
            .flat_map(|i| ((i + min_gap)..count).map(move |j| (i, j)))
            .map(|(i, j)| (gains[i] + gains[j], vec![i, j]))
            .reduce(|a, b| if better(&b, &a) { b } else { a }),
        _ => (0..count)
            .into_par_iter()
            .filter_map(|i| {
                let mut local: Option<(f64, Vec<usize>)> = None;
                for j in (i + min_gap)..count {
                    for k in (j + min_gap)..count {
                        let cand = (gains[i] + gains[j] + gains[k], vec![i, j, k]);
                        if local.as_ref().is_none_or(|l| better(&cand, l)) {
                            local = Some(cand);
                        }
                    }
                }
                local
            })
            .reduce_with(|a, b| if better(&b, &a) { b } else { a }),
    };
    let (sum, idx) = best.ok_or_else(|| Error::Config("no feasible lattice placement".into()))?;
    let positions: Vec<f64> = idx.iter().map(|&j| j as f64 * resolution).collect();
    Ok((
        positions,
        problem.distance_scale(d) * sum - problem.e_snr_col,
    ))
}

/// Joint lattice certificate: the lattice placement with the smallest slack
/// sum together with its zero-gap distance.
#[derive(Debug, Clone, PartialEq)]
pub struct JointCertificate {
    pub positions: Vec<f64>,
    pub combining_sum: f64,
    pub d: f64,
}

pub fn certify_joint(problem: &EquivalenceProblem, resolution: f64) -> Result<JointCertificate> {
    // The slack sum does not depend on d, so any positive d finds the same
    // placement.
    let (positions, _) = grid_certifier(problem, 1.0, resolution)?;
    let d = optimize_distance(problem, &positions)?;
    Ok(JointCertificate {
        combining_sum: problem.combining_sum(&positions),
        positions,
        d,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoConfig {
    pub max_iters: usize,
    /// Outer stopping rule: `|ΔE[ΔSNR]| < rel_tol·E[SNR_col]`.
    pub rel_tol: f64,
    pub max_inner: usize,
    pub inner_tol: f64,
}

impl AoConfig {
    pub fn from_params(params: &SystemParams) -> Self {
        AoConfig {
            max_iters: params.max_iters,
            ..Default::default()
        }
    }
}

impl Default for AoConfig {
    fn default() -> Self {
        AoConfig {
            max_iters: 25,
            rel_tol: 1e-6,
            max_inner: 200,
            inner_tol: 1e-12,
        }
    }
}

/// One outer iteration: the distance used, and `E[ΔSNR]` after the position
/// step at that distance.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub d: f64,
    pub objective: f64,
    pub positions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoState {
    pub iter: usize,
    pub d: f64,
    pub positions: Vec<f64>,
    /// `E[ΔSNR]` at the accepted `(d, R)`; nonnegative.
    pub objective: f64,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    pub stagnated: bool,
}

impl AoState {
    pub fn combining_sum(&self, problem: &EquivalenceProblem) -> f64 {
        problem.combining_sum(&self.positions)
    }
}

/// Alternates the exact distance step and the position step.
///
/// Each iteration sets `d` to the zero-gap distance of the current positions
/// and then moves the antennas at that `d`. Moving the antennas lowers the
/// slack sum, so the recorded gap dips below zero until the next distance
/// step catches up. The returned state re-applies the distance step to the
/// final positions, so its gap is zero from above.
pub fn jo_edap_ao(
    config: &AoConfig,
    problem: &EquivalenceProblem,
    initial_positions: Option<Vec<f64>>,
) -> Result<AoState> {
    let mut positions = match initial_positions {
        Some(p) => p,
        None => problem.initial_positions()?,
    };
    problem.bounds.check(&positions)?;
    if positions.len() != problem.num_antennas {
        return Err(Error::Dimension {
            context: "initial positions",
            expected: problem.num_antennas,
            got: positions.len(),
        });
    }
    let threshold = config.rel_tol * problem.e_snr_col;
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut converged = false;
    let mut stagnated = false;

    for iter in 1..=config.max_iters.max(1) {
        let d = feasible_distance(problem, &positions)?;
        let step = optimize_positions(problem, d, &positions, config.max_inner, config.inner_tol)?;
        stagnated |= step.stagnated;
        positions = step.positions;
        let objective = problem.objective(d, &positions);
        let done = history
            .last()
            .is_some_and(|prev| (objective - prev.objective).abs() < threshold);
        history.push(IterationRecord {
            iter,
            d,
            objective,
            positions: positions.clone(),
        });
        if done {
            converged = true;
            break;
        }
    }

    let d = feasible_distance(problem, &positions)?;
    Ok(AoState {
        iter: history.len(),
        objective: problem.objective(d, &positions),
        d,
        positions,
        history,
        converged,
        stagnated,
    })
}

/// Number of `λ`-periods the virtual array spans; used in diagnostics.
pub fn aperture_in_wavelengths(problem: &EquivalenceProblem) -> f64 {
    problem.bounds.range_m / problem.params.wavelength_m
}

/// `k = 2π/λ` of the problem.
pub fn wavenumber(problem: &EquivalenceProblem) -> f64 {
    2.0 * PI / problem.params.wavelength_m
}

/// Ratio of the independent-path mean virtual SNR to the closed form at
/// the same `(d, R)`: `M·Σ_u|γ_u|² / Σ_m |Σ_u α_u(r_m)γ_u|²`.
pub fn independent_path_ratio(problem: &EquivalenceProblem, positions: &[f64]) -> f64 {
    positions.len() as f64 * gamma_energy(&problem.gamma) / problem.combining_sum(positions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn problem(seed: u64, m: usize, params: SystemParams) -> EquivalenceProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let paths = PathSet::random(params.num_paths, &mut rng).unwrap();
        let array = TransmitArray::default_for(&params, 8).unwrap();
        let eves = vec![38.0, 41.0, 44.5, 36.2];
        EquivalenceProblem::new(&array, &paths, &params, eves, m).unwrap()
    }

    #[test]
    fn isotonic_regression_pools_violators() {
        assert_eq!(
            isotonic_regression(&[1.0, 3.0, 2.0], &[1.0; 3]),
            vec![1.0, 2.5, 2.5]
        );
        assert_eq!(
            isotonic_regression(&[3.0, 2.0, 1.0], &[1.0, 1.0, 2.0]),
            vec![1.75; 3]
        );
        assert_eq!(
            isotonic_regression(&[0.0, 1.0], &[1.0, 1.0]),
            vec![0.0, 1.0]
        );
    }

    #[test]
    fn projection_is_feasible_and_idempotent() {
        let b = SystemParams::default().bounds();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        use rand::Rng;
        for _ in 0..200 {
            let m = rng.random_range(1..=9);
            let t: Vec<f64> = (0..m).map(|_| rng.random_range(-0.02..0.06)).collect();
            let p = project(&b, &t);
            b.check(&p).unwrap();
            let pp = project(&b, &p);
            for (x, y) in p.iter().zip(&pp) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn projection_is_nearest_point_for_two_antennas() {
        // Brute-force check on a fine lattice of feasible pairs.
        let b = PositionBounds {
            d_min_m: 0.5,
            range_m: 2.0,
        };
        let target = [1.2, 1.0];
        let p = project(&b, &target);
        let dist = |x: &[f64]| (x[0] - target[0]).powi(2) + (x[1] - target[1]).powi(2);
        let n = 400;
        for i in 0..=n {
            for j in i..=n {
                let c = [2.0 * i as f64 / n as f64, 2.0 * j as f64 / n as f64];
                if b.is_feasible(&c) {
                    assert!(dist(&p) <= dist(&c) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn gain_derivative_matches_central_differences() {
        let pr = problem(3, 4, SystemParams::default());
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        use rand::Rng;
        let h = 1e-7;
        for _ in 0..50 {
            let r = rng.random_range(0.0..pr.bounds().range_m);
            let analytic = pr.antenna_gain_derivative(r);
            let fd = (pr.antenna_gain(r + h) - pr.antenna_gain(r - h)) / (2.0 * h);
            let scale = analytic
                .abs()
                .max(wavenumber(&pr) * pr.antenna_gain(r))
                .max(1e-300);
            assert!((analytic - fd).abs() <= 1e-4 * scale, "{analytic} vs {fd}");
        }
    }

    #[test]
    fn distance_step_is_exact() {
        for seed in 0..10 {
            let pr = problem(seed, 4, SystemParams::default());
            let r = pr.initial_positions().unwrap();
            let d = optimize_distance(&pr, &r).unwrap();
            assert!(pr.objective(d, &r).abs() <= 1e-9 * pr.e_snr_col());
            let df = feasible_distance(&pr, &r).unwrap();
            assert!(pr.objective(df, &r) >= 0.0);
            assert!((df - d).abs() <= 1e-12 * d);
        }
    }

    #[test]
    fn single_path_is_flat() {
        let params = SystemParams {
            num_paths: 1,
            ..Default::default()
        };
        let pr = problem(5, 4, params);
        let r0 = pr.initial_positions().unwrap();
        let d = optimize_distance(&pr, &r0).unwrap();
        let sca = solve_subproblem_sca(&pr, d, &r0, 50, 1e-12).unwrap();
        assert_eq!(sca.positions, r0);
        assert_eq!(sca.inner_iterations, 1);
        let step = optimize_positions(&pr, d, &r0, 50, 1e-12).unwrap();
        assert_eq!(step.positions, r0);

        let state = jo_edap_ao(&AoConfig::default(), &pr, None).unwrap();
        assert!(state.iter <= 2);
        assert!(state.converged);
        assert!(state.objective >= 0.0);
    }

    #[test]
    fn single_antenna_descends() {
        let pr = problem(6, 1, SystemParams::default());
        let r0 = pr.initial_positions().unwrap();
        let d = optimize_distance(&pr, &r0).unwrap();
        let step = optimize_positions(&pr, d, &r0, 200, 1e-12).unwrap();
        assert!(pr.objective(d, &step.positions) <= pr.objective(d, &r0));
    }

    #[test]
    fn sca_reaches_a_stationary_point() {
        // Small perturbation off an interior lattice minimum of a single antenna.
        let params = SystemParams {
            move_range_wavelengths: 8.0,
            ..Default::default()
        };
        for seed in 0..8 {
            let pr = problem(seed, 1, params.clone());
            let (grid, _) = grid_certifier(&pr, 30.0, params.wavelength_m / 200.0).unwrap();
            let r = grid[0];
            if r <= 0.05 * pr.bounds().range_m || r >= 0.95 * pr.bounds().range_m {
                continue;
            }
            let start = [r + params.wavelength_m / 100.0];
            let out = solve_subproblem_sca(&pr, 30.0, &start, 500, 1e-16).unwrap();
            let g = pr.antenna_gain_derivative(out.positions[0]);
            let scale = wavenumber(&pr) * gamma_energy(pr.gamma()) * pr.params().num_paths as f64;
            assert!(
                g.abs() <= 1e-6 * scale,
                "seed {seed}: gradient {g}, scale {scale}"
            );
            assert!(out.combining_sum <= pr.combining_sum(&start));
        }
    }

    #[test]
    fn grid_certifier_guards() {
        let pr = problem(1, 4, SystemParams::default());
        assert!(grid_certifier(&pr, 30.0, 1e-4).is_err());
        let pr = problem(1, 2, SystemParams::default());
        assert!(grid_certifier(&pr, 30.0, 0.0107 / 400.0).is_err());
        assert!(grid_certifier(&pr, 30.0, 0.0107 / 100.0).is_ok());
    }

    #[test]
    fn grid_certifier_single_antenna_matches_scan() {
        let pr = problem(2, 1, SystemParams::default());
        let res = 0.0107 / 100.0;
        let (pos, obj) = grid_certifier(&pr, 25.0, res).unwrap();
        let count = (pr.bounds().range_m / res + 1e-9).floor() as usize + 1;
        let mut best = (f64::INFINITY, 0.0);
        for j in 0..count {
            let r = j as f64 * res;
            let v = pr.antenna_gain(r);
            if v < best.0 {
                best = (v, r);
            }
        }
        assert_eq!(pos[0], best.1);
        assert!((obj - pr.objective(25.0, &[best.1])).abs() <= 1e-12 * pr.e_snr_col());
    }

    #[test]
    fn grid_certifier_ties_pick_first() {
        let params = SystemParams {
            num_paths: 1,
            ..Default::default()
        };
        let pr = problem(4, 2, params);
        let (pos, _) = grid_certifier(&pr, 30.0, 0.0107 / 100.0).unwrap();
        assert_eq!(pos[0], 0.0);
        assert!((pos[1] - pr.bounds().d_min_m).abs() < 1e-15);
    }

    #[test]
    fn position_step_matches_grid_for_two_antennas() {
        for seed in 0..6 {
            let pr = problem(seed, 2, SystemParams::default());
            let r0 = pr.initial_positions().unwrap();
            let d = optimize_distance(&pr, &r0).unwrap();
            let step = optimize_positions(&pr, d, &r0, 200, 1e-12).unwrap();
            let cert = certify_joint(&pr, 0.0107 / 100.0).unwrap();
            let got = pr.combining_sum(&step.positions);
            assert!(
                got <= 1.05 * cert.combining_sum + 1e-12,
                "seed {seed}: {got} vs {}",
                cert.combining_sum
            );
        }
    }

    #[test]
    fn ao_history_dips_then_settles() {
        let pr = problem(7, 4, SystemParams::default());
        let state = jo_edap_ao(&AoConfig::default(), &pr, None).unwrap();
        assert!(state.converged);
        assert!(state.iter <= 25);
        assert!(state.history[0].objective < 0.0);
        assert!(state.objective >= 0.0);
        let b = pr.bounds();
        for rec in &state.history {
            b.check(&rec.positions).unwrap();
        }
        // Position steps never raise the gap at their own distance.
        let mut prev = pr.initial_positions().unwrap();
        for rec in &state.history {
            assert!(
                pr.objective(rec.d, &rec.positions)
                    <= pr.objective(rec.d, &prev) + 1e-12 * pr.e_snr_col()
            );
            prev = rec.positions.clone();
        }
    }

    #[test]
    fn ao_is_deterministic() {
        let pr = problem(8, 4, SystemParams::default());
        let a = jo_edap_ao(&AoConfig::default(), &pr, None).unwrap();
        let b = jo_edap_ao(&AoConfig::default(), &pr, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn infeasible_configuration_is_rejected() {
        let params = SystemParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let paths = PathSet::random(params.num_paths, &mut rng).unwrap();
        let array = TransmitArray::default_for(&params, 8).unwrap();
        let err = EquivalenceProblem::new(&array, &paths, &params, vec![40.0], 12).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn subproblem_model_is_tight() {
        let pr = problem(9, 3, SystemParams::default());
        let r = pr.initial_positions().unwrap();
        let model = SubproblemModel::at(&pr, &r);
        assert!(model.is_feasible());
        let total: f64 = model.v.iter().sum();
        assert!((total - pr.combining_sum(&r)).abs() <= 1e-12 * total);
    }
}
