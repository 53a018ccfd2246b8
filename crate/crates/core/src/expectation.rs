//! Closed-form expected SNRs and the zero-gap equivalent distance.
//!
//! With `γ_u = Σ_n w_n·exp(−i·k·t_nᵀp^u)` and `α_u(r) = exp(i·k·r·cos θ_u)`,
//! the expected SNR of the virtual eavesdropper at distance `d` is
//!
//! ```text
//! E[SNR_veve] = g0·d^(−α) / (L·σ²) · Σ_z |Σ_u α_u(r_z)·γ_u|²
//! ```
//!
//! and the colluding set of eavesdroppers at distances `d_m` has
//!
//! ```text
//! E[SNR_col] = Σ_m g0·d_m^(−α) / (L·σ²) · Σ_u |γ_u|²
//! ```
//!
//! Their difference is strictly decreasing in `d`, so the gap vanishes at a
//! single distance `d_max` available in closed form.

use ndarray::Array2;

use crate::channel::{PathSet, TransmitArray};
use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::C64;

/// Everything the closed forms depend on for one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationInputs {
    /// `γ_u`, length `L`.
    pub gamma: Vec<C64>,
    /// `α_u(r_m)`, `L × M`.
    pub alphas: Array2<C64>,
    pub params: SystemParams,
    pub eve_distances: Vec<f64>,
    pub veve_distance: f64,
}

impl ExpectationInputs {
    pub fn new(
        gamma: Vec<C64>,
        alphas: Array2<C64>,
        params: SystemParams,
        eve_distances: Vec<f64>,
        veve_distance: f64,
    ) -> Result<Self> {
        if alphas.nrows() != gamma.len() {
            return Err(Error::Dimension {
                context: "alphas rows",
                expected: gamma.len(),
                got: alphas.nrows(),
            });
        }
        if let Some(&d) = eve_distances.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            return Err(Error::domain("eve distance", d, "> 0"));
        }
        Ok(ExpectationInputs {
            gamma,
            alphas,
            params,
            eve_distances,
            veve_distance,
        })
    }

    /// Builds the inputs from the geometry of one instance.
    pub fn from_geometry(
        array: &TransmitArray,
        paths: &PathSet,
        positions: &[f64],
        params: &SystemParams,
        eve_distances: Vec<f64>,
        veve_distance: f64,
    ) -> Result<Self> {
        let gamma = gamma_coefficients(array, paths, params.wavelength_m);
        let alphas = alpha_matrix(positions, paths, params.wavelength_m);
        ExpectationInputs::new(gamma, alphas, params.clone(), eve_distances, veve_distance)
    }

    pub fn with_distance(&self, veve_distance: f64) -> Self {
        ExpectationInputs {
            veve_distance,
            ..self.clone()
        }
    }

    pub fn num_paths(&self) -> usize {
        self.gamma.len()
    }

    pub fn num_virtual_antennas(&self) -> usize {
        self.alphas.ncols()
    }
}

/// `γ_u = Σ_n w_n·exp(−i·k·t_nᵀp^u)` for every path `u`.
pub fn gamma_coefficients(array: &TransmitArray, paths: &PathSet, wavelength_m: f64) -> Vec<C64> {
    let k = 2.0 * std::f64::consts::PI / wavelength_m;
    paths
        .directions()
        .iter()
        .map(|p| {
            array
                .positions()
                .iter()
                .zip(array.beamformer())
                .map(|(t, w)| {
                    *w * C64::from_polar(1.0, -k * (t[0] * p[0] + t[1] * p[1] + t[2] * p[2]))
                })
                .sum()
        })
        .collect()
}

/// `α_u(r_m) = exp(i·k·r_m·cos θ_u)`, `L × M`.
pub fn alpha_matrix(positions: &[f64], paths: &PathSet, wavelength_m: f64) -> Array2<C64> {
    let k = 2.0 * std::f64::consts::PI / wavelength_m;
    let cosines = paths.arrival_cosines();
    Array2::from_shape_fn((cosines.len(), positions.len()), |(u, m)| {
        C64::from_polar(1.0, k * positions[m] * cosines[u])
    })
}

/// `|Σ_u α_u(r_z)·γ_u|²` for each virtual antenna `z`.
pub fn combining_gains(inputs: &ExpectationInputs) -> Vec<f64> {
    inputs
        .alphas
        .columns()
        .into_iter()
        .map(|col| {
            col.iter()
                .zip(&inputs.gamma)
                .map(|(a, g)| a * g)
                .sum::<C64>()
                .norm_sqr()
        })
        .collect()
}

/// `Σ_u |γ_u|²`.
pub fn gamma_energy(gamma: &[C64]) -> f64 {
    gamma.iter().map(|g| g.norm_sqr()).sum()
}

fn check_distance(d: f64) -> Result<()> {
    if d > 0.0 && d.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("veve distance", d, "> 0"))
    }
}

/// `g0·d^(−α) / (L·σ²)`.
fn link_scale(params: &SystemParams, num_paths: usize, d: f64) -> f64 {
    params.g0_linear() * d.powf(-params.alpha) / (num_paths as f64 * params.noise_power_mw)
}

pub fn expected_snr_veve(inputs: &ExpectationInputs) -> Result<f64> {
    check_distance(inputs.veve_distance)?;
    let total: f64 = combining_gains(inputs).iter().sum();
    Ok(link_scale(&inputs.params, inputs.num_paths(), inputs.veve_distance) * total)
}

pub fn expected_snr_col(inputs: &ExpectationInputs) -> Result<f64> {
    let energy = gamma_energy(&inputs.gamma);
    let mut total = 0.0;
    for &d in &inputs.eve_distances {
        check_distance(d)?;
        total += link_scale(&inputs.params, inputs.num_paths(), d) * energy;
    }
    Ok(total)
}

/// `E[SNR_veve] − E[SNR_col]`.
pub fn expected_delta(inputs: &ExpectationInputs) -> Result<f64> {
    Ok(expected_snr_veve(inputs)? - expected_snr_col(inputs)?)
}

/// Largest distance keeping `E[ΔSNR] ≥ 0`; the gap is exactly zero there.
///
/// Ignores `inputs.veve_distance`.
pub fn d_max(inputs: &ExpectationInputs) -> Result<f64> {
    let numerator: f64 = combining_gains(inputs).iter().sum();
    if !(numerator > 0.0) {
        return Err(Error::Degenerate(
            "virtual array combining gain is zero (total destructive combining)".into(),
        ));
    }
    let col = expected_snr_col(inputs)?;
    if !(col > 0.0) {
        return Err(Error::Degenerate("expected collusion SNR is zero".into()));
    }
    let p = &inputs.params;
    let ratio = p.g0_linear() * numerator / (col * inputs.num_paths() as f64 * p.noise_power_mw);
    Ok(ratio.powf(1.0 / p.alpha))
}

/// Mean virtual-eavesdropper SNR when the `L` path gains are drawn
/// independently with zero mean, as the Monte Carlo sampler does:
/// `g0·d^(−α)/(L·σ²) · M · Σ_u |γ_u|²`. The cross-path terms vanish, so the
/// antenna positions drop out.
pub fn independent_path_snr_veve(inputs: &ExpectationInputs) -> Result<f64> {
    check_distance(inputs.veve_distance)?;
    Ok(
        link_scale(&inputs.params, inputs.num_paths(), inputs.veve_distance)
            * inputs.num_virtual_antennas() as f64
            * gamma_energy(&inputs.gamma),
    )
}
