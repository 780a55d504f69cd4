//! Driven Kerr resonator analytics: photon-number calibration, the steady-state
//! cubic, Stark-shift synthesis and fitting, the bistability threshold and the
//! intermodulation relation between IIP3 and K.
//!
//! Detuning is Δ = ω_d − ω_r throughout. K is signed (Hz, K/2π) and negative
//! for a softening junction, so the resonance moves by 2K·n̄.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::HBAR;
use crate::netlist::Topology;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DuffingError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("need at least 3 points for a Stark fit, got {0}")]
    TooFewPoints(usize),
    #[error("photon numbers are all equal; slope undefined")]
    DegenerateAbscissae,
    #[error("K = 0: a linear resonator never bifurcates")]
    NoBifurcation,
}

pub type Result<T> = std::result::Result<T, DuffingError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeParams {
    /// Hz
    pub f_r: f64,
    /// Total linewidth (rad/s).
    pub kappa: f64,
    /// External coupling (rad/s).
    pub kappa_ext: f64,
    /// Signed K/2π (Hz).
    pub kerr: f64,
    pub topology: Topology,
}

impl ModeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_r.is_finite() && self.f_r > 0.0) {
            return Err(DuffingError::Invalid(format!("f_r = {} must be > 0", self.f_r)));
        }
        if !(self.kappa_ext > 0.0 && self.kappa_ext <= self.kappa && self.kappa.is_finite()) {
            return Err(DuffingError::Invalid(format!(
                "need 0 < kappa_ext <= kappa (kappa_ext={}, kappa={})",
                self.kappa_ext, self.kappa
            )));
        }
        if !self.kerr.is_finite() {
            return Err(DuffingError::Invalid("Kerr must be finite".into()));
        }
        Ok(())
    }

    pub fn kappa_int(&self) -> f64 {
        self.kappa - self.kappa_ext
    }

    /// Photon-number weight of the coupling: 1 for reflection, 1/2 for a
    /// symmetric hanger.
    pub fn topology_factor(&self) -> f64 {
        match self.topology {
            Topology::Reflection => 1.0,
            Topology::Hanger => 0.5,
        }
    }

    /// Coefficient a in Δ_eff = Δ − a·n̄ (rad/s per photon).
    fn shift_per_photon(&self) -> f64 {
        2.0 * 2.0 * PI * self.kerr
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    /// Generator power (W).
    pub p_g: f64,
    /// Hz
    pub f_d: f64,
    /// Linear power attenuation between generator and device, ≥ 1.
    pub attenuation: f64,
}

impl DriveSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_g.is_finite() && self.p_g >= 0.0) {
            return Err(DuffingError::Invalid(format!("p_g = {} must be >= 0", self.p_g)));
        }
        if !(self.f_d.is_finite() && self.f_d > 0.0) {
            return Err(DuffingError::Invalid(format!("f_d = {} must be > 0", self.f_d)));
        }
        if !(self.attenuation.is_finite() && self.attenuation >= 1.0) {
            return Err(DuffingError::Invalid(format!(
                "attenuation {} must be >= 1",
                self.attenuation
            )));
        }
        Ok(())
    }
}

fn detuning(mode: &ModeParams, drive: &DriveSpec) -> f64 {
    2.0 * PI * (drive.f_d - mode.f_r)
}

/// Drive term F = factor·κ_ext·P/(ħω_d·A) of the steady-state cubic (1/s²).
fn drive_term(mode: &ModeParams, drive: &DriveSpec) -> f64 {
    let omega_d = 2.0 * PI * drive.f_d;
    mode.topology_factor() * mode.kappa_ext * drive.p_g / (HBAR * omega_d * drive.attenuation)
}

fn lorentzian_denominator(mode: &ModeParams, delta: f64) -> f64 {
    delta * delta + 0.25 * mode.kappa * mode.kappa
}

/// Mean intracavity photon number of the linear resonator.
pub fn photon_number(mode: &ModeParams, drive: &DriveSpec) -> Result<f64> {
    mode.validate()?;
    drive.validate()?;
    Ok(drive_term(mode, drive) / lorentzian_denominator(mode, detuning(mode, drive)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyRoot {
    pub n: f64,
    pub stable: bool,
}

fn cubic(a: f64, delta: f64, kappa: f64, n: f64) -> f64 {
    let d = delta - a * n;
    n * (d * d + 0.25 * kappa * kappa)
}

fn cubic_slope(a: f64, delta: f64, kappa: f64, n: f64) -> f64 {
    3.0 * a * a * n * n - 4.0 * a * delta * n + delta * delta + 0.25 * kappa * kappa
}

/// Solve n·[(Δ − a·n)² + κ²/4] = F for real n ≥ 0, ascending.
fn solve_cubic(a: f64, delta: f64, kappa: f64, f: f64) -> Vec<SteadyRoot> {
    if f == 0.0 {
        return vec![SteadyRoot { n: 0.0, stable: true }];
    }
    // g is increasing from g(0) = 0 except between the two turning points of
    // g'. Every root lies below 4F/κ² since g(n) ≥ nκ²/4.
    let upper = 4.0 * f / (kappa * kappa);
    let mut knots = vec![0.0];
    if a != 0.0 {
        let disc = 16.0 * a * a * delta * delta
            - 12.0 * a * a * (delta * delta + 0.25 * kappa * kappa);
        if disc > 0.0 {
            let s = disc.sqrt();
            for t in [(4.0 * a * delta - s) / (6.0 * a * a), (4.0 * a * delta + s) / (6.0 * a * a)] {
                if t > 0.0 && t < upper {
                    knots.push(t);
                }
            }
        }
    }
    knots.push(upper);
    let h = |n: f64| cubic(a, delta, kappa, n) - f;
    let mut roots = Vec::new();
    for w in knots.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (hl, hh) = (h(lo), h(hi));
        if hl == 0.0 && lo > 0.0 {
            continue;
        }
        if hl.signum() == hh.signum() && hh != 0.0 {
            continue;
        }
        let rising = hh > hl;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if (h(mid) < 0.0) == rising {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let n = if h(lo).abs() < h(hi).abs() { lo } else { hi };
        roots.push(SteadyRoot { n, stable: cubic_slope(a, delta, kappa, n) > 0.0 });
    }
    roots.dedup_by(|x, y| (x.n - y.n).abs() <= 1e-12 * y.n.abs().max(1e-300));
    roots
}

/// All non-negative steady-state photon numbers, ascending, with stability.
pub fn steady_state_occupation(mode: &ModeParams, drive: &DriveSpec) -> Result<Vec<SteadyRoot>> {
    mode.validate()?;
    drive.validate()?;
    let delta = detuning(mode, drive);
    let a = mode.shift_per_photon();
    if a == 0.0 {
        let n = photon_number(mode, drive)?;
        return Ok(vec![SteadyRoot { n, stable: true }]);
    }
    Ok(solve_cubic(a, delta, mode.kappa, drive_term(mode, drive)))
}

/// Relative residual of the steady-state cubic at n.
pub fn cubic_residual(mode: &ModeParams, drive: &DriveSpec, n: f64) -> f64 {
    let f = drive_term(mode, drive);
    let g = cubic(mode.shift_per_photon(), detuning(mode, drive), mode.kappa, n);
    (g - f).abs() / f.abs().max(f64::MIN_POSITIVE)
}

/// Δf_r = 2·(K/2π)·n̄ (Hz).
pub fn stark_shift(mode: &ModeParams, n: f64) -> Result<f64> {
    if !(n.is_finite() && n >= 0.0) {
        return Err(DuffingError::Invalid(format!("photon number {n} must be >= 0")));
    }
    Ok(2.0 * mode.kerr * n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarkFit {
    /// Signed K/2π (Hz).
    pub kerr_hz: f64,
    pub kerr_std_err_hz: f64,
    /// Zero-photon intercept of Δf_r (Hz).
    pub intercept_hz: f64,
    pub points_used: usize,
}

/// Ordinary least squares of Δf_r against n̄; K is half the slope.
pub fn fit_kerr_from_stark(data: &[(f64, f64)]) -> Result<StarkFit> {
    let n = data.len();
    if n < 3 {
        return Err(DuffingError::TooFewPoints(n));
    }
    if data.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(DuffingError::Invalid("non-finite Stark data".into()));
    }
    let nf = n as f64;
    let mx = data.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = data.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = data.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) || sxx <= 1e-24 * data.iter().map(|p| p.0 * p.0).sum::<f64>() {
        return Err(DuffingError::DegenerateAbscissae);
    }
    let sxy: f64 = data.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = data.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let slope_se = (rss / (nf - 2.0) / sxx).sqrt();
    Ok(StarkFit {
        kerr_hz: slope / 2.0,
        kerr_std_err_hz: slope_se / 2.0,
        intercept_hz: intercept,
        points_used: n,
    })
}

/// Stark fit using only points with n̄ below `fraction`·n̄_crit of `prior`, the
/// region where the shift is still linear in drive. The usual fraction is 0.5.
pub fn fit_kerr_from_stark_below_bifurcation(
    data: &[(f64, f64)],
    prior: &ModeParams,
    fraction: f64,
) -> Result<StarkFit> {
    let n_crit = bifurcation_threshold(prior)?.n_crit;
    let kept: Vec<(f64, f64)> =
        data.iter().copied().filter(|p| p.0 < fraction * n_crit).collect();
    fit_kerr_from_stark(&kept)
}

/// |K|/2π = ħω₀κ²/(8·IIP3)/2π (Hz), with κ in rad/s and IIP3 in W.
pub fn kerr_from_iip3(f0: f64, kappa: f64, iip3: f64) -> Result<f64> {
    if !(f0 > 0.0 && kappa > 0.0 && iip3 > 0.0) || !(f0 * kappa * iip3).is_finite() {
        return Err(DuffingError::Invalid(format!(
            "need f0, kappa, iip3 > 0 (got {f0}, {kappa}, {iip3})"
        )));
    }
    Ok(HBAR * 2.0 * PI * f0 * kappa * kappa / (8.0 * iip3) / (2.0 * PI))
}

/// Inverse of [`kerr_from_iip3`]: IIP3 (W) for a given |K|/2π.
pub fn iip3_from_kerr(f0: f64, kappa: f64, kerr_hz: f64) -> Result<f64> {
    if !(f0 > 0.0 && kappa > 0.0 && kerr_hz > 0.0) {
        return Err(DuffingError::Invalid(format!(
            "need f0, kappa, |K| > 0 (got {f0}, {kappa}, {kerr_hz})"
        )));
    }
    Ok(HBAR * 2.0 * PI * f0 * kappa * kappa / (8.0 * kerr_hz) / (2.0 * PI))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bifurcation {
    pub n_crit: f64,
    /// Δ_crit = ω_d − ω_r at the onset (rad/s).
    pub delta_crit: f64,
    /// Power at the device (A = 1) at onset (W).
    pub p_crit: f64,
}

/// Onset of bistability: the lowest power at which some detuning yields three
/// steady states, and that detuning.
pub fn bifurcation_threshold(mode: &ModeParams) -> Result<Bifurcation> {
    mode.validate()?;
    let a = mode.shift_per_photon();
    if a == 0.0 {
        return Err(DuffingError::NoBifurcation);
    }
    let k = mode.kappa;
    let delta_crit = a.signum() * 3f64.sqrt() * k / 2.0;
    let n_crit = k / (3f64.sqrt() * a.abs());
    let f_crit = k.powi(3) / (3.0 * 3f64.sqrt() * a.abs());
    let omega_d = 2.0 * PI * mode.f_r + delta_crit;
    let p_crit = f_crit * HBAR * omega_d / (mode.topology_factor() * mode.kappa_ext);
    Ok(Bifurcation { n_crit, delta_crit, p_crit })
}
