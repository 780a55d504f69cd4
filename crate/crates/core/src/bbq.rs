//! Single-mode black-box quantization: a series RLC read off the impedance the
//! junction sees, then participation ratio, charging energy and Kerr.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{E_CHARGE, H_PLANCK};
use crate::netlist::{upward_zero_crossings, FrequencyGrid, Netlist, NetlistError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BbqError {
    #[error("no negative-to-positive zero crossing of Im Z on the grid")]
    NoResonance,
    #[error("{} zero crossings of Im Z on the grid (at {frequencies:?} Hz); narrow the grid to one mode", frequencies.len())]
    MultiMode { frequencies: Vec<f64> },
    #[error("extracted inductance {l} H is not positive; not a series resonance")]
    NotSeriesResonance { l: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("impedance evaluation failed: {0}")]
    Evaluation(#[from] NetlistError),
    #[error("frequency {f} Hz outside sampled impedance range {lo}..{hi} Hz")]
    OutOfRange { f: f64, lo: f64, hi: f64 },
}

pub type Result<T> = std::result::Result<T, BbqError>;

/// Series R, L, C equivalent at the zero of Im Z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRlc {
    /// rad/s
    pub omega0: f64,
    pub l: f64,
    pub c: f64,
    pub r: f64,
}

/// Series RLC plus the quantities derived from it for one junction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRlcExtraction {
    pub omega0_rad_s: f64,
    pub l_h: f64,
    pub c_f: f64,
    pub r_ohm: f64,
    pub l_j_h: f64,
    pub participation: f64,
    pub e_c_j: f64,
    pub e_c_over_h_hz: f64,
    /// |K|/2π (Hz).
    pub kerr_hz: f64,
    /// True for a softening junction (K < 0).
    pub kerr_negative: bool,
    /// Mode frequency 1/(2π√((L + L_J)C)) (Hz).
    pub mode_frequency_hz: f64,
}

impl SeriesRlcExtraction {
    pub fn signed_kerr_hz(&self) -> f64 {
        if self.kerr_negative {
            -self.kerr_hz
        } else {
            self.kerr_hz
        }
    }
}

/// Anything that yields the impedance seen by the junction at a frequency.
pub trait ImpedanceSource {
    fn impedance(&self, f: f64) -> Result<Complex64>;
}

impl ImpedanceSource for Netlist {
    fn impedance(&self, f: f64) -> Result<Complex64> {
        Ok(self.impedance_at_junction_plane(f)?)
    }
}

impl<F: Fn(f64) -> Complex64> ImpedanceSource for F {
    fn impedance(&self, f: f64) -> Result<Complex64> {
        Ok(self(f))
    }
}

/// Tabulated impedance, interpolated with a local cubic through the four
/// nearest samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledImpedance {
    freqs: Vec<f64>,
    values: Vec<Complex64>,
}

impl SampledImpedance {
    pub fn new(freqs: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if freqs.len() != values.len() || freqs.len() < 4 {
            return Err(BbqError::Invalid("need at least 4 matching (f, Z) samples".into()));
        }
        if freqs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(BbqError::Invalid("sample frequencies must increase strictly".into()));
        }
        Ok(Self { freqs, values })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.freqs[0], *self.freqs.last().unwrap())
    }
}

impl ImpedanceSource for SampledImpedance {
    fn impedance(&self, f: f64) -> Result<Complex64> {
        let (lo, hi) = self.range();
        if !(f >= lo && f <= hi) {
            return Err(BbqError::OutOfRange { f, lo, hi });
        }
        let n = self.freqs.len();
        let idx = self.freqs.partition_point(|&x| x <= f).clamp(1, n - 1);
        let start = idx.saturating_sub(2).min(n - 4);
        let xs = &self.freqs[start..start + 4];
        let ys = &self.values[start..start + 4];
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..4 {
            let w: f64 = (0..4)
                .filter(|&m| m != j)
                .map(|m| (f - xs[m]) / (xs[j] - xs[m]))
                .product();
            acc += ys[j] * w;
        }
        Ok(acc)
    }
}

fn im_derivative(z: &dyn ImpedanceSource, omega: f64) -> Result<f64> {
    let five_point = |h: f64| -> Result<f64> {
        let im = |w: f64| z.impedance(w / (2.0 * PI)).map(|v| v.im);
        Ok((-im(omega + 2.0 * h)? + 8.0 * im(omega + h)? - 8.0 * im(omega - h)?
            + im(omega - 2.0 * h)?)
            / (12.0 * h))
    };
    let h = omega * 1e-6;
    Ok((16.0 * five_point(h / 2.0)? - five_point(h)?) / 15.0)
}

/// Series RLC at the single upward zero crossing of Im Z on `grid`.
pub fn extract_series_rlc(z: &dyn ImpedanceSource, grid: &FrequencyGrid) -> Result<SeriesRlc> {
    grid.validate()?;
    let roots = upward_zero_crossings(grid, 1.0, |f| z.impedance(f).map(|v| v.im))?;
    let f0 = match roots.as_slice() {
        [] => return Err(BbqError::NoResonance),
        [f0] => *f0,
        _ => return Err(BbqError::MultiMode { frequencies: roots }),
    };
    let omega0 = 2.0 * PI * f0;
    let l = im_derivative(z, omega0)? / 2.0;
    if !(l > 0.0) {
        return Err(BbqError::NotSeriesResonance { l });
    }
    let c = 1.0 / (omega0 * omega0 * l);
    let r = z.impedance(f0)?.re;
    Ok(SeriesRlc { omega0, l, c, r })
}

/// p = L_J/(L_J + L).
pub fn participation(l_j: f64, l: f64) -> Result<f64> {
    if !(l_j.is_finite() && l_j > 0.0 && l.is_finite() && l > 0.0) {
        return Err(BbqError::Invalid(format!("inductances must be > 0 (l_j={l_j}, l={l})")));
    }
    Ok(l_j / (l_j + l))
}

/// E_C = e²/2C (J).
pub fn charging_energy(c: f64) -> Result<f64> {
    if !(c.is_finite() && c > 0.0) {
        return Err(BbqError::Invalid(format!("capacitance {c} must be > 0")));
    }
    Ok(E_CHARGE * E_CHARGE / (2.0 * c))
}

/// E_C/h (Hz).
pub fn charging_energy_hz(c: f64) -> Result<f64> {
    Ok(charging_energy(c)? / H_PLANCK)
}

/// |K|/2π = (c₄/c₂)·p³·E_C/h (Hz), with `e_c` in joules.
pub fn predict_kerr(c4_over_c2: f64, p: f64, e_c: f64) -> Result<f64> {
    if !(c4_over_c2.is_finite() && c4_over_c2 >= 0.0) {
        return Err(BbqError::Invalid(format!("c4/c2 = {c4_over_c2} must be >= 0")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(BbqError::Invalid(format!("participation {p} must lie in (0, 1]")));
    }
    if !(e_c.is_finite() && e_c > 0.0) {
        return Err(BbqError::Invalid(format!("charging energy {e_c} J must be > 0")));
    }
    Ok(c4_over_c2 * p.powi(3) * e_c / H_PLANCK)
}

/// Inverse of [`predict_kerr`]: c₄/c₂ from a measured |K|/2π (Hz).
pub fn infer_c4_ratio(kerr_hz: f64, p: f64, e_c: f64) -> Result<f64> {
    if !(kerr_hz.is_finite() && kerr_hz > 0.0) {
        return Err(BbqError::Invalid(format!("measured Kerr {kerr_hz} Hz must be > 0")));
    }
    if !(p > 0.0 && p <= 1.0) || !(e_c.is_finite() && e_c > 0.0) {
        return Err(BbqError::Invalid(format!("need p in (0, 1] and E_C > 0 (p={p}, E_C={e_c})")));
    }
    Ok(kerr_hz / (p.powi(3) * e_c / H_PLANCK))
}

/// Participation, charging energy and Kerr for an extracted RLC.
pub fn analyze(rlc: &SeriesRlc, l_j: f64, c4_over_c2: f64) -> Result<SeriesRlcExtraction> {
    let p = participation(l_j, rlc.l)?;
    let e_c = charging_energy(rlc.c)?;
    let kerr = predict_kerr(c4_over_c2, p, e_c)?;
    Ok(SeriesRlcExtraction {
        omega0_rad_s: rlc.omega0,
        l_h: rlc.l,
        c_f: rlc.c,
        r_ohm: rlc.r,
        l_j_h: l_j,
        participation: p,
        e_c_j: e_c,
        e_c_over_h_hz: e_c / H_PLANCK,
        kerr_hz: kerr,
        kerr_negative: kerr > 0.0,
        mode_frequency_hz: 1.0 / (2.0 * PI * ((rlc.l + l_j) * rlc.c).sqrt()),
    })
}
