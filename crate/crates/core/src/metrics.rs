//! Instantaneous (single channel draw) SNRs, capacities and secrecy rates.

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::C64;

/// Per-draw SNRs of the colluding eavesdroppers and of the virtual one.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrReport {
    pub snr_col: f64,
    pub snr_veve: f64,
    pub per_eve_snr: Vec<f64>,
}

impl SnrReport {
    pub fn new(per_eve_snr: Vec<f64>, snr_veve: f64) -> Self {
        SnrReport {
            snr_col: stable_sum(&per_eve_snr),
            snr_veve,
            per_eve_snr,
        }
    }

    pub fn delta(&self) -> f64 {
        delta_snr(self.snr_veve, self.snr_col)
    }
}

/// Which clamp of the secrecy-rate difference was active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecrecyBranch {
    /// Both secrecy rates positive; the clamped and unclamped forms agree.
    BothPositive,
    /// At least one secrecy rate was clamped to zero.
    Clamped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecrecyReport {
    pub c_bob: f64,
    pub c_col: f64,
    pub c_veve: f64,
    /// Secrecy-rate loss of the equivalent model,
    /// `[C_bob − C_col]⁺ − [C_bob − C_veve]⁺`; nonnegative when the virtual
    /// eavesdropper is at least as strong as the colluding set.
    pub delta_r_sec: f64,
    /// `C_veve − C_col`, the form valid when both rates are positive.
    pub delta_r_sec_unclamped: f64,
    pub branch: SecrecyBranch,
}

impl SecrecyReport {
    pub fn new(c_bob: f64, c_col: f64, c_veve: f64) -> Self {
        let sr_veve = secrecy_rate(c_bob, c_veve);
        let sr_col = secrecy_rate(c_bob, c_col);
        let branch = if c_bob - c_veve > 0.0 && c_bob - c_col > 0.0 {
            SecrecyBranch::BothPositive
        } else {
            SecrecyBranch::Clamped
        };
        SecrecyReport {
            c_bob,
            c_col,
            c_veve,
            delta_r_sec: sr_col - sr_veve,
            delta_r_sec_unclamped: c_veve - c_col,
            branch,
        }
    }

    pub fn secrecy_col(&self) -> f64 {
        secrecy_rate(self.c_bob, self.c_col)
    }

    pub fn secrecy_veve(&self) -> f64 {
        secrecy_rate(self.c_bob, self.c_veve)
    }
}

fn check_noise(noise_mw: f64) -> Result<()> {
    if noise_mw > 0.0 && noise_mw.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("noise power", noise_mw, "> 0"))
    }
}

fn projection(h: ArrayView1<C64>, w: &[f64]) -> Result<C64> {
    if h.len() != w.len() {
        return Err(Error::Dimension {
            context: "channel/beamformer",
            expected: w.len(),
            got: h.len(),
        });
    }
    Ok(h.iter().zip(w).map(|(hn, wn)| hn.conj() * *wn).sum())
}

/// `|hᴴw|² / σ²` for a single-antenna receiver.
pub fn snr_eve(h: ArrayView1<C64>, w: &[f64], noise_mw: f64) -> Result<f64> {
    check_noise(noise_mw)?;
    Ok(projection(h, w)?.norm_sqr() / noise_mw)
}

/// `‖Hᴴw‖² / σ²`, summed over the `M` receive antennas (columns of `H`).
pub fn virtual_eve_snr(h: &Array2<C64>, w: &[f64], noise_mw: f64) -> Result<f64> {
    check_noise(noise_mw)?;
    let mut power = 0.0;
    for col in h.columns() {
        power += projection(col, w)?.norm_sqr();
    }
    Ok(power / noise_mw)
}

/// Shannon capacity `log2(1 + snr)` in bits/s/Hz.
pub fn capacity(snr: f64) -> f64 {
    (1.0 + snr).log2()
}

/// Capacity of cooperating eavesdroppers: `log2(1 + Σ γ_m)`.
pub fn collusion_capacity(per_eve_snr: &[f64]) -> Result<f64> {
    if let Some(&g) = per_eve_snr.iter().find(|g| !(**g >= 0.0)) {
        return Err(Error::domain("eavesdropper SNR", g, ">= 0"));
    }
    Ok(capacity(stable_sum(per_eve_snr)))
}

pub fn secrecy_rate(c_bob: f64, c_eve: f64) -> f64 {
    (c_bob - c_eve).max(0.0)
}

/// Per-draw gap `SNR_veve − SNR_col`; may be negative.
pub fn delta_snr(snr_veve: f64, snr_col: f64) -> f64 {
    snr_veve - snr_col
}

/// Neumaier-compensated sum.
pub fn stable_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
