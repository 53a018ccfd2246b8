//! Field-response channel model.
//!
//! Every link (BS to Bob, BS to each real eavesdropper, BS to the virtual
//! eavesdropper) shares the same `L` departure directions, so the transmit
//! field-response matrix `G(T)` is common to all receivers. Single-antenna
//! receivers use an all-ones receive field response; the virtual eavesdropper
//! uses a linear array along the x axis with per-path arrival angles.

use std::f64::consts::{FRAC_PI_2, PI};

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::params::{PositionBounds, SystemParams};
use crate::C64;

/// Unit direction vector of a path with elevation `theta` and azimuth `phi`.
pub fn direction_vector(theta: f64, phi: f64) -> Result<[f64; 3]> {
    check_angle("theta", theta, -FRAC_PI_2, FRAC_PI_2, "[-pi/2, pi/2]")?;
    check_angle("phi", phi, -FRAC_PI_2, FRAC_PI_2, "[-pi/2, pi/2]")?;
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Ok([ct * cp, ct * sp, st])
}

fn check_angle(name: &'static str, v: f64, lo: f64, hi: f64, expected: &'static str) -> Result<()> {
    if v.is_finite() && v >= lo && v <= hi {
        Ok(())
    } else {
        Err(Error::domain(name, v, expected))
    }
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Departure and arrival angles of the `L` propagation paths.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    departures: Vec<(f64, f64)>,
    arrivals: Vec<f64>,
    directions: Vec<[f64; 3]>,
}

impl PathSet {
    /// `departures` are `(theta, phi)` pairs in `[-pi/2, pi/2]²`, `arrivals`
    /// are virtual-array arrival angles in `[0, pi]`.
    pub fn new(departures: Vec<(f64, f64)>, arrivals: Vec<f64>) -> Result<Self> {
        if departures.is_empty() {
            return Err(Error::domain("num_paths", 0.0, ">= 1"));
        }
        if departures.len() != arrivals.len() {
            return Err(Error::Dimension {
                context: "PathSet arrivals",
                expected: departures.len(),
                got: arrivals.len(),
            });
        }
        let directions = departures
            .iter()
            .map(|&(t, p)| direction_vector(t, p))
            .collect::<Result<Vec<_>>>()?;
        for &a in &arrivals {
            check_angle("arrival theta", a, 0.0, PI, "[0, pi]")?;
        }
        Ok(PathSet {
            departures,
            arrivals,
            directions,
        })
    }

    /// Draws `L` paths with every angle uniform over its range.
    pub fn random<R: Rng + ?Sized>(num_paths: usize, rng: &mut R) -> Result<Self> {
        let mut departures = Vec::with_capacity(num_paths);
        for _ in 0..num_paths {
            let theta = rng.random_range(-FRAC_PI_2..=FRAC_PI_2);
            let phi = rng.random_range(-FRAC_PI_2..=FRAC_PI_2);
            departures.push((theta, phi));
        }
        let arrivals = (0..num_paths).map(|_| rng.random_range(0.0..=PI)).collect();
        PathSet::new(departures, arrivals)
    }

    pub fn len(&self) -> usize {
        self.departures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.departures.is_empty()
    }

    pub fn departures(&self) -> &[(f64, f64)] {
        &self.departures
    }

    pub fn arrivals(&self) -> &[f64] {
        &self.arrivals
    }

    /// Unit direction vectors `p^j` of the departures.
    pub fn directions(&self) -> &[[f64; 3]] {
        &self.directions
    }

    pub fn arrival_cosines(&self) -> Vec<f64> {
        self.arrivals.iter().map(|a| a.cos()).collect()
    }
}

/// Base-station antenna positions (z = 0 plane) and a real beamformer.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitArray {
    positions: Vec<[f64; 3]>,
    beamformer: Vec<f64>,
}

impl TransmitArray {
    /// Checks `‖w‖² = tx_power_mw` to 1e-9 relative.
    pub fn new(positions: Vec<[f64; 3]>, beamformer: Vec<f64>, tx_power_mw: f64) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::domain("num_bs_antennas", 0.0, ">= 1"));
        }
        if positions.len() != beamformer.len() {
            return Err(Error::Dimension {
                context: "TransmitArray beamformer",
                expected: positions.len(),
                got: beamformer.len(),
            });
        }
        if positions.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Config("non-finite antenna coordinate".into()));
        }
        let power: f64 = beamformer.iter().map(|w| w * w).sum();
        if (power - tx_power_mw).abs() > 1e-9 * tx_power_mw.max(1e-300) {
            return Err(Error::Config(format!(
                "beamformer power {power} differs from transmit power {tx_power_mw}"
            )));
        }
        Ok(TransmitArray {
            positions,
            beamformer,
        })
    }

    /// Equal-amplitude beamformer `w_n = sqrt(P_t / N)`.
    pub fn with_uniform_beamformer(positions: Vec<[f64; 3]>, tx_power_mw: f64) -> Result<Self> {
        let n = positions.len();
        let w = uniform_beamformer(n, tx_power_mw);
        TransmitArray::new(positions, w, tx_power_mw)
    }

    /// `rows × cols` grid in the z = 0 plane, starting at the origin.
    pub fn planar_grid(rows: usize, cols: usize, pitch_m: f64, tx_power_mw: f64) -> Result<Self> {
        let positions = planar_grid_positions(rows, cols, pitch_m);
        TransmitArray::with_uniform_beamformer(positions, tx_power_mw)
    }

    /// Reference BS: `n` antennas on a two-row grid with half-wavelength pitch.
    pub fn default_for(params: &SystemParams, num_antennas: usize) -> Result<Self> {
        let rows = if num_antennas >= 2 && num_antennas.is_multiple_of(2) {
            2
        } else {
            1
        };
        let cols = num_antennas / rows;
        Self::planar_grid(rows, cols, params.wavelength_m / 2.0, params.tx_power_mw)
    }

    pub fn num_antennas(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn beamformer(&self) -> &[f64] {
        &self.beamformer
    }

    /// Replaces the beamformer, re-checking the power normalisation.
    pub fn with_beamformer(self, beamformer: Vec<f64>, tx_power_mw: f64) -> Result<Self> {
        TransmitArray::new(self.positions, beamformer, tx_power_mw)
    }
}

pub fn planar_grid_positions(rows: usize, cols: usize, pitch_m: f64) -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            out.push([j as f64 * pitch_m, i as f64 * pitch_m, 0.0]);
        }
    }
    out
}

pub fn uniform_beamformer(n: usize, tx_power_mw: f64) -> Vec<f64> {
    let a = (tx_power_mw / n as f64).sqrt();
    vec![a; n]
}

/// Real beamformer of power `tx_power_mw` maximising `|hᴴw|²`.
///
/// With `a = Re h` and `b = Im h`, `|hᴴw|² = wᵀ(aaᵀ + bbᵀ)w`, so the optimum is
/// the principal eigenvector of a rank-two matrix living in `span{a, b}`.
pub fn max_ratio_beamformer(h: &[C64], tx_power_mw: f64) -> Result<Vec<f64>> {
    let n = h.len();
    if n == 0 {
        return Err(Error::domain("num_bs_antennas", 0.0, ">= 1"));
    }
    let a: Vec<f64> = h.iter().map(|z| z.re).collect();
    let b: Vec<f64> = h.iter().map(|z| z.im).collect();
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    let (aa, bb, ab) = (dot(&a, &a), dot(&b, &b), dot(&a, &b));
    if aa + bb == 0.0 {
        return Err(Error::Degenerate(
            "zero channel has no maximum-ratio direction".into(),
        ));
    }
    // Gram form: the eigenvector is c1·a + c2·b where (c1, c2) is the
    // principal eigenvector of [[aa, ab], [ab, bb]].
    let tr = aa + bb;
    let det = aa * bb - ab * ab;
    let lam = 0.5 * tr + (0.25 * tr * tr - det).max(0.0).sqrt();
    let (c1, c2) = if ab.abs() > 1e-300 {
        (ab, lam - aa)
    } else if aa >= bb {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    let mut w: Vec<f64> = a.iter().zip(&b).map(|(x, y)| c1 * x + c2 * y).collect();
    let norm = dot(&w, &w).sqrt();
    if norm == 0.0 {
        return Err(Error::Degenerate("maximum-ratio direction vanished".into()));
    }
    let scale = tx_power_mw.sqrt() / norm;
    w.iter_mut().for_each(|x| *x *= scale);
    Ok(w)
}

/// Diagonal path-response matrix `Σ = diag(σ_1, …, σ_L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathResponse(pub Vec<C64>);

impl PathResponse {
    pub fn identity(num_paths: usize) -> Self {
        PathResponse(vec![C64::new(1.0, 0.0); num_paths])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn gains(&self) -> &[C64] {
        &self.0
    }

    pub fn to_dense(&self) -> Array2<C64> {
        Array2::from_diag(&Array1::from(self.0.clone()))
    }
}

/// The real eavesdroppers: their distances and one path-response draw each.
#[derive(Debug, Clone, PartialEq)]
pub struct EveDeployment {
    pub distances_m: Vec<f64>,
    pub path_gains: Vec<PathResponse>,
}

impl EveDeployment {
    pub fn new(distances_m: Vec<f64>, path_gains: Vec<PathResponse>) -> Result<Self> {
        if distances_m.len() != path_gains.len() {
            return Err(Error::Dimension {
                context: "EveDeployment path gains",
                expected: distances_m.len(),
                got: path_gains.len(),
            });
        }
        if let Some(&d) = distances_m.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            return Err(Error::domain("eve distance", d, "> 0"));
        }
        Ok(EveDeployment {
            distances_m,
            path_gains,
        })
    }

    pub fn len(&self) -> usize {
        self.distances_m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances_m.is_empty()
    }
}

/// Equivalent eavesdropper: distance `d` and the x coordinates `R` of its
/// linear movable-antenna array.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualEve {
    distance_m: f64,
    positions_m: Vec<f64>,
}

impl VirtualEve {
    pub fn new(distance_m: f64, positions_m: Vec<f64>, bounds: &PositionBounds) -> Result<Self> {
        bounds.check(&positions_m)?;
        Self::unchecked(distance_m, positions_m)
    }

    /// Skips the spacing/box check; the distance must still be positive.
    pub fn unchecked(distance_m: f64, positions_m: Vec<f64>) -> Result<Self> {
        if !(distance_m > 0.0 && distance_m.is_finite()) {
            return Err(Error::domain("virtual eve distance", distance_m, "> 0"));
        }
        if positions_m.is_empty() {
            return Err(Error::domain("num_virtual_mas", 0.0, ">= 1"));
        }
        Ok(VirtualEve {
            distance_m,
            positions_m,
        })
    }

    pub fn distance_m(&self) -> f64 {
        self.distance_m
    }

    pub fn positions_m(&self) -> &[f64] {
        &self.positions_m
    }

    pub fn num_antennas(&self) -> usize {
        self.positions_m.len()
    }
}

/// Field response of one transmit antenna: entry `j` is `exp(i·k·tᵀp^j)`.
pub fn transmit_frv(position: &[f64; 3], paths: &PathSet, wavelength_m: f64) -> Array1<C64> {
    let k = 2.0 * PI / wavelength_m;
    paths
        .directions()
        .iter()
        .map(|p| C64::from_polar(1.0, k * dot3(position, p)))
        .collect()
}

/// `G(T)`, `L × N`; column `n` is [`transmit_frv`] of antenna `n`.
pub fn transmit_frm(array: &TransmitArray, paths: &PathSet, wavelength_m: f64) -> Array2<C64> {
    let l = paths.len();
    let n = array.num_antennas();
    let mut g = Array2::zeros((l, n));
    for (col, t) in array.positions().iter().enumerate() {
        g.column_mut(col)
            .assign(&transmit_frv(t, paths, wavelength_m));
    }
    g
}

/// Receive field response at coordinate `r` of the virtual linear array:
/// entry `i` is `exp(i·k·r·cos θ_i)`.
pub fn receive_frv_virtual(r: f64, paths: &PathSet, wavelength_m: f64) -> Array1<C64> {
    let k = 2.0 * PI / wavelength_m;
    paths
        .arrivals()
        .iter()
        .map(|a| C64::from_polar(1.0, k * r * a.cos()))
        .collect()
}

fn check_paths(sigma: &PathResponse, paths: &PathSet) -> Result<()> {
    if sigma.len() != paths.len() {
        return Err(Error::Dimension {
            context: "path response",
            expected: paths.len(),
            got: sigma.len(),
        });
    }
    Ok(())
}

/// Channel of a single-antenna receiver, `(fᵀ Σ G(T))ᵀ` with `f = 1`:
/// entry `n` is `Σ_l σ_l·exp(i·k·t_nᵀp^l)`.
pub fn eve_channel(
    array: &TransmitArray,
    paths: &PathSet,
    sigma: &PathResponse,
    wavelength_m: f64,
) -> Result<Array1<C64>> {
    check_paths(sigma, paths)?;
    let k = 2.0 * PI / wavelength_m;
    Ok(array
        .positions()
        .iter()
        .map(|t| {
            paths
                .directions()
                .iter()
                .zip(sigma.gains())
                .map(|(p, s)| s * C64::from_polar(1.0, k * dot3(t, p)))
                .sum()
        })
        .collect())
}

/// Bob's channel; same model as [`eve_channel`] with Bob's path responses.
pub fn bob_channel(
    array: &TransmitArray,
    paths: &PathSet,
    sigma_bob: &PathResponse,
    wavelength_m: f64,
) -> Result<Array1<C64>> {
    eve_channel(array, paths, sigma_bob, wavelength_m)
}

/// Channel of the virtual eavesdropper, `N × M`, with entry
/// `(n, m) = Σ_u σ_u·exp(i·k·(−r_m cos θ_u + t_nᵀp^u))`.
pub fn virtual_eve_channel(
    array: &TransmitArray,
    veve: &VirtualEve,
    paths: &PathSet,
    sigma: &PathResponse,
    wavelength_m: f64,
) -> Result<Array2<C64>> {
    check_paths(sigma, paths)?;
    let k = 2.0 * PI / wavelength_m;
    let cosines = paths.arrival_cosines();
    let n = array.num_antennas();
    let m = veve.num_antennas();
    let mut h = Array2::zeros((n, m));
    for (row, t) in array.positions().iter().enumerate() {
        for (col, &r) in veve.positions_m().iter().enumerate() {
            h[[row, col]] = paths
                .directions()
                .iter()
                .zip(&cosines)
                .zip(sigma.gains())
                .map(|((p, c), s)| s * C64::from_polar(1.0, k * (-r * c + dot3(t, p))))
                .sum();
        }
    }
    Ok(h)
}
