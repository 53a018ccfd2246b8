//! Physical and simulation constants shared by every module.

use crate::error::{Error, Result};

/// Scalar physics and simulation constants.
///
/// The defaults reproduce the reference scenario: 28 GHz carrier, 30 dB
/// reference gain, path-loss exponent 4, 0.5 mW noise, 10 mW transmit power,
/// four propagation paths, half-wavelength minimum spacing and a four
/// wavelength movement range.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    pub wavelength_m: f64,
    /// Average channel gain at 1 m, in dB.
    pub g0_db: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    pub noise_power_mw: f64,
    pub tx_power_mw: f64,
    /// Number of propagation paths, shared by every link.
    pub num_paths: usize,
    pub d_min_wavelengths: f64,
    pub move_range_wavelengths: f64,
    pub max_iters: usize,
    pub rng_seed: u64,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            wavelength_m: 0.0107,
            g0_db: 30.0,
            alpha: 4.0,
            noise_power_mw: 0.5,
            tx_power_mw: 10.0,
            num_paths: 4,
            d_min_wavelengths: 0.5,
            move_range_wavelengths: 4.0,
            max_iters: 25,
            rng_seed: 1,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength_m > 0.0 && self.wavelength_m.is_finite()) {
            return Err(Error::domain("wavelength_m", self.wavelength_m, "> 0"));
        }
        if !(self.alpha >= 2.0 && self.alpha.is_finite()) {
            return Err(Error::domain("alpha", self.alpha, ">= 2"));
        }
        if !(self.noise_power_mw > 0.0 && self.noise_power_mw.is_finite()) {
            return Err(Error::domain("noise_power_mw", self.noise_power_mw, "> 0"));
        }
        if !(self.tx_power_mw >= 0.0 && self.tx_power_mw.is_finite()) {
            return Err(Error::domain("tx_power_mw", self.tx_power_mw, ">= 0"));
        }
        if self.num_paths == 0 {
            return Err(Error::domain("num_paths", 0.0, ">= 1"));
        }
        if !(self.d_min_wavelengths > 0.0 && self.d_min_wavelengths.is_finite()) {
            return Err(Error::domain(
                "d_min_wavelengths",
                self.d_min_wavelengths,
                "> 0",
            ));
        }
        if !(self.move_range_wavelengths >= 0.0 && self.move_range_wavelengths.is_finite()) {
            return Err(Error::domain(
                "move_range_wavelengths",
                self.move_range_wavelengths,
                ">= 0",
            ));
        }
        if !self.g0_db.is_finite() {
            return Err(Error::domain("g0_db", self.g0_db, "finite"));
        }
        Ok(())
    }

    /// Validates the parameters together with the array size they will be
    /// paired with: `M` antennas at `D_min` spacing must fit in the range.
    pub fn validate_for(&self, num_antennas: usize) -> Result<()> {
        self.validate()?;
        self.bounds().check_capacity(num_antennas)
    }

    /// Reference gain as a linear power ratio.
    pub fn g0_linear(&self) -> f64 {
        10f64.powf(self.g0_db / 10.0)
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength_m
    }

    pub fn d_min_m(&self) -> f64 {
        self.d_min_wavelengths * self.wavelength_m
    }

    pub fn move_range_m(&self) -> f64 {
        self.move_range_wavelengths * self.wavelength_m
    }

    /// Per-path second moment `E[|σ_l|²] = g0·d^(−α)/L` at distance `d`.
    pub fn path_variance(&self, distance_m: f64) -> f64 {
        self.g0_linear() * distance_m.powf(-self.alpha) / self.num_paths as f64
    }

    pub fn bounds(&self) -> PositionBounds {
        PositionBounds {
            d_min_m: self.d_min_m(),
            range_m: self.move_range_m(),
        }
    }
}

/// Feasible region of a linear movable-antenna array: every coordinate in
/// `[0, range_m]` and consecutive (sorted) coordinates at least `d_min_m` apart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionBounds {
    pub d_min_m: f64,
    pub range_m: f64,
}

impl PositionBounds {
    /// Slack used when checking constraints on values produced by
    /// floating-point arithmetic.
    pub const TOL: f64 = 1e-12;

    pub fn check_capacity(&self, num_antennas: usize) -> Result<()> {
        let needed = num_antennas.saturating_sub(1) as f64 * self.d_min_m;
        if needed > self.range_m * (1.0 + 1e-12) + Self::TOL {
            return Err(Error::Config(format!(
                "{num_antennas} antennas need {needed:.6} m at minimum spacing but the range is {:.6} m",
                self.range_m
            )));
        }
        Ok(())
    }

    pub fn check(&self, positions: &[f64]) -> Result<()> {
        for (i, &r) in positions.iter().enumerate() {
            if !r.is_finite() || r < -Self::TOL || r > self.range_m + Self::TOL {
                return Err(Error::Constraint(format!(
                    "r[{i}] = {r} outside [0, {}]",
                    self.range_m
                )));
            }
        }
        for (i, w) in positions.windows(2).enumerate() {
            if w[1] - w[0] < self.d_min_m - Self::TOL {
                return Err(Error::Constraint(format!(
                    "r[{}] - r[{i}] = {} < D_min = {}",
                    i + 1,
                    w[1] - w[0],
                    self.d_min_m
                )));
            }
        }
        Ok(())
    }

    pub fn is_feasible(&self, positions: &[f64]) -> bool {
        self.check(positions).is_ok()
    }

    /// `M` positions spread uniformly over `[0, range]` (a single antenna
    /// sits at the centre).
    pub fn uniform_spread(&self, num_antennas: usize) -> Result<Vec<f64>> {
        self.check_capacity(num_antennas)?;
        Ok(match num_antennas {
            0 => Vec::new(),
            1 => vec![self.range_m / 2.0],
            m => {
                let step = self.range_m / (m - 1) as f64;
                (0..m).map(|i| i as f64 * step).collect()
            }
        })
    }
}
