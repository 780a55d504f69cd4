//! Parametric amplifier figures of merit on top of the harmonic-balance engine.
//!
//! The pump is solved as a single-tone steady state and reused for every probe;
//! each probe point is then a full two-tone solve warm-started from the pump.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{solve_with, HbError, HbOptions, HbSolution, Result, Tone, ToneSet};
use crate::constants::{db, watts_to_dbm};
use crate::junction::InductancePolynomial;
use crate::netlist::Netlist;

const PROBE: [i32; 2] = [0, 1];
const IDLER: [i32; 2] = [2, -1];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmpOptions {
    pub truncation: usize,
    /// Small-signal probe power (W).
    pub probe_power: f64,
    /// Probe detuning from the pump used for single-number gain figures (Hz).
    pub probe_offset: f64,
    pub hb: HbOptions,
    /// Gain levels (dB) reported as contours of a gain map.
    pub contour_levels: Vec<f64>,
}

impl Default for AmpOptions {
    fn default() -> Self {
        Self {
            truncation: super::DEFAULT_TRUNCATION,
            probe_power: 1e-21,
            probe_offset: 10e3,
            hb: HbOptions::default(),
            contour_levels: vec![20.0, 25.0],
        }
    }
}

/// Gain and conversion at one probe frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResponse {
    pub probe_frequency: f64,
    pub probe_power: f64,
    pub gamma_on: Complex64,
    pub gamma_off: Complex64,
    /// |Γ_on/Γ_off|² (dB).
    pub gain_db: f64,
    /// Power out at 2f_p − f_s over probe power in (dB).
    pub idler_gain_db: f64,
}

/// A solved pump operating point shared by many probe evaluations.
#[derive(Debug, Clone)]
pub struct PumpedState {
    net: Netlist,
    off_net: Netlist,
    poly: InductancePolynomial,
    pub pump: Tone,
    pub solution: HbSolution,
    opts: AmpOptions,
}

impl PumpedState {
    pub fn new(
        net: &Netlist,
        poly: &InductancePolynomial,
        pump: Tone,
        opts: &AmpOptions,
    ) -> Result<Self> {
        Self::with_guess(net, poly, pump, opts, None)
    }

    /// Pump solve seeded from a nearby operating point.
    pub fn with_guess(
        net: &Netlist,
        poly: &InductancePolynomial,
        pump: Tone,
        opts: &AmpOptions,
        guess: Option<&HbSolution>,
    ) -> Result<Self> {
        let tones = ToneSet::new(vec![pump]).with_truncation(opts.truncation);
        let solution = solve_with(net, poly, &tones, &opts.hb, guess)?;
        Ok(Self {
            net: net.clone(),
            off_net: net.with_junction_inductance(poly.l0()),
            poly: poly.clone(),
            pump,
            solution,
            opts: opts.clone(),
        })
    }

    /// Two-tone solve with the probe at `probe_freq`/`probe_power`.
    pub fn solve_probe(
        &self,
        probe_freq: f64,
        probe_power: f64,
        guess: Option<&HbSolution>,
    ) -> Result<HbSolution> {
        let tones = ToneSet::new(vec![self.pump, Tone::new(probe_freq, probe_power)])
            .with_truncation(self.opts.truncation);
        // The pump solution is always an excellent start; ramping the drive
        // from zero would not help where Newton fails from it.
        let hb = HbOptions { continuation: false, ..self.opts.hb };
        solve_with(&self.net, &self.poly, &tones, &hb, guess.or(Some(&self.solution)))
    }

    pub fn response_from(&self, sol: &HbSolution) -> Result<ProbeResponse> {
        let h = sol.harmonic(&PROBE).ok_or_else(|| missing("probe"))?;
        let gamma_on = h.scattering().ok_or_else(|| missing("probe drive"))?;
        let gamma_off = self.off_net.response(h.frequency)?;
        let idler = sol.harmonic(&IDLER).ok_or_else(|| missing("idler"))?;
        let p_in = 0.5 * h.incident.norm_sqr();
        Ok(ProbeResponse {
            probe_frequency: h.frequency,
            probe_power: p_in,
            gamma_on,
            gamma_off,
            gain_db: db((gamma_on / gamma_off).norm_sqr()),
            idler_gain_db: db(idler.output_power() / p_in),
        })
    }

    /// Small-signal response at `probe_freq`.
    pub fn probe(&self, probe_freq: f64) -> Result<ProbeResponse> {
        let sol = self.solve_probe(probe_freq, self.opts.probe_power, None)?;
        self.response_from(&sol)
    }

    /// Small-signal gain at the default probe detuning from the pump.
    pub fn gain_db(&self) -> Result<f64> {
        Ok(self.probe(self.pump.frequency + self.opts.probe_offset)?.gain_db)
    }
}

fn missing(what: &str) -> HbError {
    HbError::NotFound(format!("{what} product missing from the harmonic set"))
}

/// Pump-on over pump-off reflection (or transmission) gain in dB.
pub fn gain(
    net: &Netlist,
    poly: &InductancePolynomial,
    pump: Tone,
    probe_freq: f64,
    probe_power: f64,
) -> Result<f64> {
    let opts = AmpOptions { probe_power, ..AmpOptions::default() };
    let state = PumpedState::new(net, poly, pump, &opts)?;
    Ok(state.probe(probe_freq)?.gain_db)
}

/// Small-signal gain at each probe frequency for one pump point.
pub fn gain_profile(state: &PumpedState, probe_freqs: &[f64]) -> Result<Vec<ProbeResponse>> {
    let mut out = Vec::with_capacity(probe_freqs.len());
    let mut prev: Option<HbSolution> = None;
    for &f in probe_freqs {
        let sol = state.solve_probe(f, state.opts.probe_power, prev.as_ref())?;
        out.push(state.response_from(&sol)?);
        prev = Some(sol);
    }
    Ok(out)
}

/// Full width of the region around the gain maximum within 3 dB of it, with
/// linear interpolation of the edges. `None` if either edge is outside the
/// sampled range.
pub fn bandwidth_3db(freqs: &[f64], gains_db: &[f64]) -> Option<f64> {
    if freqs.len() != gains_db.len() || freqs.len() < 3 {
        return None;
    }
    let (peak, &g_max) = gains_db.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    let level = g_max - 3.0;
    let edge = |a: usize, b: usize| {
        let t = (level - gains_db[a]) / (gains_db[b] - gains_db[a]);
        freqs[a] + t * (freqs[b] - freqs[a])
    };
    let lo = (0..peak).rev().find(|&k| gains_db[k] < level).map(|k| edge(k, k + 1))?;
    let hi = (peak + 1..freqs.len()).find(|&k| gains_db[k] < level).map(|k| edge(k - 1, k))?;
    Some(hi - lo)
}

/// Gain over a pump frequency × pump power grid. Failed cells stay `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainMap {
    pub pump_frequencies: Vec<f64>,
    /// W at the device.
    pub pump_powers: Vec<f64>,
    /// `gain_db[power][frequency]`.
    pub gain_db: Vec<Vec<Option<f64>>>,
    pub failures: Vec<MapFailure>,
    pub contour_levels: Vec<f64>,
    pub probe_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapFailure {
    pub power_index: usize,
    pub frequency_index: usize,
    pub message: String,
}

impl GainMap {
    pub fn pump_powers_dbm(&self) -> Vec<f64> {
        self.pump_powers.iter().map(|&p| watts_to_dbm(p)).collect()
    }

    /// Largest solved gain and its (power index, frequency index).
    pub fn max_gain(&self) -> Option<(f64, usize, usize)> {
        let mut best: Option<(f64, usize, usize)> = None;
        for (i, row) in self.gain_db.iter().enumerate() {
            for (j, g) in row.iter().enumerate() {
                if let Some(g) = *g {
                    if best.is_none_or(|b| g > b.0) {
                        best = Some((g, i, j));
                    }
                }
            }
        }
        best
    }

    /// Cells (power index, frequency index) whose gain lies in [lo, hi] dB.
    pub fn cells_within(&self, lo: f64, hi: f64) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (i, row) in self.gain_db.iter().enumerate() {
            for (j, g) in row.iter().enumerate() {
                if let Some(g) = *g {
                    if (lo..=hi).contains(&g) {
                        out.push((i, j, g));
                    }
                }
            }
        }
        out
    }

    /// True if some pair of neighbouring solved cells straddles `level`.
    pub fn has_contour(&self, level: f64) -> bool {
        let above = |g: Option<f64>| g.map(|g| g >= level);
        for (i, row) in self.gain_db.iter().enumerate() {
            for (j, &g) in row.iter().enumerate() {
                let here = above(g);
                let right = row.get(j + 1).and_then(|&x| above(x));
                let down = self.gain_db.get(i + 1).and_then(|r| above(r[j]));
                if let Some(h) = here {
                    if right.is_some_and(|r| r != h) || down.is_some_and(|d| d != h) {
                        return true;
                    }
                }
            }
        }
        false
    }
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

/// Gain map; each pump frequency column is swept upward in power with the
/// previous operating point as the initial guess, so cells follow the branch
/// connected to the undriven state.
pub fn gain_map(
    net: &Netlist,
    poly: &InductancePolynomial,
    pump_frequencies: &[f64],
    pump_powers: &[f64],
    opts: &AmpOptions,
) -> Result<GainMap> {
    if pump_frequencies.is_empty() || pump_powers.is_empty() {
        return Err(HbError::InvalidTones("gain map axes must be non-empty".into()));
    }
    if !strictly_increasing(pump_frequencies) || !strictly_increasing(pump_powers) {
        return Err(HbError::InvalidTones("gain map axes must be strictly increasing".into()));
    }
    if pump_frequencies.iter().any(|f| !(f.is_finite() && *f > 0.0))
        || pump_powers.iter().any(|p| !(p.is_finite() && *p >= 0.0))
    {
        return Err(HbError::InvalidTones("gain map axes out of range".into()));
    }
    let columns: Vec<Vec<std::result::Result<f64, String>>> = pump_frequencies
        .par_iter()
        .map(|&f| {
            let mut prev: Option<HbSolution> = None;
            pump_powers
                .iter()
                .map(|&p| {
                    let cell = PumpedState::with_guess(net, poly, Tone::new(f, p), opts, prev.as_ref())
                        .and_then(|s| {
                            let g = s.gain_db()?;
                            Ok((s, g))
                        });
                    match cell {
                        Ok((s, g)) => {
                            prev = Some(s.solution);
                            Ok(g)
                        }
                        Err(e) => {
                            prev = None;
                            Err(e.to_string())
                        }
                    }
                })
                .collect()
        })
        .collect();
    let mut gain = vec![vec![None; pump_frequencies.len()]; pump_powers.len()];
    let mut failures = Vec::new();
    for (j, col) in columns.into_iter().enumerate() {
        for (i, cell) in col.into_iter().enumerate() {
            match cell {
                Ok(g) => gain[i][j] = Some(g),
                Err(message) => {
                    failures.push(MapFailure { power_index: i, frequency_index: j, message })
                }
            }
        }
    }
    Ok(GainMap {
        pump_frequencies: pump_frequencies.to_vec(),
        pump_powers: pump_powers.to_vec(),
        gain_db: gain,
        failures,
        contour_levels: opts.contour_levels.clone(),
        probe_offset: opts.probe_offset,
    })
}

/// Pump power between `p_lo` and `p_hi` (W) at which the small-signal gain
/// reaches `target_db` on the branch connected to `p_lo`, found by bisection
/// in log power. Failed solves above `p_lo` (for example past a bifurcation
/// edge, where the gain diverges) count as being above the target.
pub fn pump_for_gain(
    net: &Netlist,
    poly: &InductancePolynomial,
    pump_frequency: f64,
    p_lo: f64,
    p_hi: f64,
    target_db: f64,
    opts: &AmpOptions,
) -> Result<(PumpedState, f64)> {
    if !(p_lo > 0.0 && p_hi > p_lo) {
        return Err(HbError::InvalidTones("need 0 < p_lo < p_hi".into()));
    }
    let mut lo = PumpedState::new(net, poly, Tone::new(pump_frequency, p_lo), opts)?;
    let g_lo = lo.gain_db()?;
    if g_lo >= target_db {
        return Err(HbError::NotFound(format!(
            "gain {g_lo:.2} dB at the lower power already exceeds {target_db} dB"
        )));
    }
    let quick = AmpOptions { hb: HbOptions { continuation: false, ..opts.hb }, ..opts.clone() };
    let attempt = |from: &PumpedState, p: f64| {
        PumpedState::with_guess(net, poly, Tone::new(pump_frequency, p), &quick, Some(&from.solution))
            .and_then(|s| {
                let g = s.gain_db()?;
                Ok((s, g))
            })
            .ok()
    };
    let mut best: Option<(PumpedState, f64)> = None;
    match attempt(&lo, p_hi) {
        Some((s, g)) if g >= target_db => best = Some((s, g)),
        Some((_, g)) => {
            return Err(HbError::NotFound(format!(
                "gain {g_lo:.2}..{g:.2} dB does not bracket {target_db} dB"
            )))
        }
        None => {}
    }
    let (mut a, mut b) = (p_lo, p_hi);
    for _ in 0..200 {
        if best.as_ref().is_some_and(|(_, g)| g - target_db < 1e-3) || b / a - 1.0 < 1e-12 {
            break;
        }
        let mid = (a * b).sqrt();
        match attempt(&lo, mid) {
            Some((s, g)) if g < target_db => {
                a = mid;
                lo = s;
            }
            Some((s, g)) => {
                b = mid;
                best = Some((s, g));
            }
            None => b = mid,
        }
    }
    let (mut state, g) = best.ok_or_else(|| {
        HbError::NotFound(format!(
            "branch ends near {:.3} dBm before reaching {target_db} dB",
            watts_to_dbm(a)
        ))
    })?;
    state.opts = opts.clone();
    Ok((state, g))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Compression {
    /// Input probe power at 1 dB compression (W).
    pub p1db: f64,
    pub p1db_dbm: f64,
    pub small_signal_gain_db: f64,
    pub probe_frequency: f64,
    /// True when the probe pushed a bistable pump state off its branch
    /// before the gain had dropped by 1 dB; `p1db` is then the power at
    /// which the branch disappears.
    pub branch_lost: bool,
    /// (probe power W, gain dB) along the sweep, up to the bracketing point.
    pub sweep: Vec<(f64, f64)>,
}

/// Gain on the branch continued from `guess`, or `None` once that branch no
/// longer exists at `power`.
fn branch_gain(
    state: &PumpedState,
    probe_freq: f64,
    power: f64,
    guess: &HbSolution,
) -> Result<Option<(HbSolution, f64)>> {
    match state.solve_probe(probe_freq, power, Some(guess)) {
        Ok(sol) => {
            let g = state.response_from(&sol)?.gain_db;
            Ok(Some((sol, g)))
        }
        Err(HbError::NotConverged { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Probe power at which the gain first falls 1 dB below its small-signal
/// value. `probe_powers` (W) must be increasing; the crossing is refined by
/// bisection in log power between the bracketing sweep points. Each point is
/// continued from the previous one, and a point where that branch cannot be
/// followed counts as compressed.
pub fn p1db(
    state: &PumpedState,
    probe_freq: f64,
    probe_powers: &[f64],
) -> Result<Compression> {
    if probe_powers.len() < 2 || !strictly_increasing(probe_powers) || probe_powers[0] <= 0.0 {
        return Err(HbError::InvalidTones(
            "probe sweep needs at least two increasing positive powers".into(),
        ));
    }
    let small = state.solve_probe(probe_freq, state.opts.probe_power, None)?;
    let g0 = state.response_from(&small)?.gain_db;
    let target = g0 - 1.0;
    let mut sweep = Vec::with_capacity(probe_powers.len());
    let mut prev = small;
    let mut lo = state.opts.probe_power.min(probe_powers[0]);
    let mut hi = None;
    let mut branch_lost = false;
    for &p in probe_powers {
        match branch_gain(state, probe_freq, p, &prev)? {
            Some((sol, g)) => {
                sweep.push((p, g));
                if g <= target {
                    hi = Some(p);
                    break;
                }
                lo = p;
                prev = sol;
            }
            None => {
                branch_lost = true;
                hi = Some(p);
                break;
            }
        }
    }
    let Some(mut hi) = hi else {
        return Err(HbError::NotFound(format!(
            "gain stays within 1 dB of {g0:.3} dB up to {:.2} dBm",
            watts_to_dbm(*probe_powers.last().unwrap())
        )));
    };
    if g0 < 10.0 {
        return Err(HbError::InsufficientGain { gain_db: g0 });
    }
    for _ in 0..60 {
        if hi / lo - 1.0 < 1e-6 {
            break;
        }
        let mid = (lo * hi).sqrt();
        match branch_gain(state, probe_freq, mid, &prev)? {
            Some((sol, g)) if g > target => {
                lo = mid;
                prev = sol;
            }
            Some(_) => {
                hi = mid;
                branch_lost = false;
            }
            None => {
                hi = mid;
                branch_lost = true;
            }
        }
    }
    let p = (lo * hi).sqrt();
    Ok(Compression {
        p1db: p,
        p1db_dbm: watts_to_dbm(p),
        small_signal_gain_db: g0,
        probe_frequency: probe_freq,
        branch_lost,
        sweep,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iip3Point {
    /// Power per tone at the device (W).
    pub input: f64,
    /// Emitted power at f₁ (W).
    pub fundamental: f64,
    /// Mean emitted power at 2f₁ − f₂ and 2f₂ − f₁ (W).
    pub third_order: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iip3 {
    /// Input third-order intercept (W per tone).
    pub iip3: f64,
    pub iip3_dbm: f64,
    /// Free least-squares slopes of the two lines (dB/dB), for diagnostics.
    pub slope_fundamental: f64,
    pub slope_third_order: f64,
    pub points: Vec<Iip3Point>,
}

fn free_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        f64::NAN
    }
}

/// Two-tone third-order intercept. Output powers are those radiated by the
/// junction current, so the fundamental line is not masked by the direct
/// path past the resonator. Lines of slope 1 and 3 are fitted to the given
/// input powers (W per tone), which should lie in the weak-drive regime.
pub fn iip3(
    net: &Netlist,
    poly: &InductancePolynomial,
    f1: f64,
    f2: f64,
    input_powers: &[f64],
    opts: &AmpOptions,
) -> Result<Iip3> {
    if poly.is_linear() {
        return Err(HbError::NotFound("linear junction produces no third-order products".into()));
    }
    if input_powers.is_empty() || input_powers.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(HbError::InvalidTones("input powers must be positive".into()));
    }
    let mut points = Vec::with_capacity(input_powers.len());
    let mut prev: Option<HbSolution> = None;
    for &p in input_powers {
        let tones = ToneSet::new(vec![Tone::new(f1, p), Tone::new(f2, p)])
            .with_truncation(opts.truncation);
        let sol = solve_with(net, poly, &tones, &opts.hb, prev.as_ref())?;
        let h1 = sol.harmonic(&[1, 0]).ok_or_else(|| missing("first tone"))?;
        let lo = sol.harmonic(&[2, -1]).ok_or_else(|| missing("lower IM3"))?;
        let hi = sol.harmonic(&[-1, 2]).ok_or_else(|| missing("upper IM3"))?;
        let ratio = 0.5 * (lo.current.norm() + hi.current.norm()) / h1.current.norm();
        if !(ratio >= 1e-13) {
            return Err(HbError::InsufficientDrive { ratio });
        }
        points.push(Iip3Point {
            input: p,
            fundamental: h1.emitted_power(),
            third_order: 0.5 * (lo.emitted_power() + hi.emitted_power()),
        });
        prev = Some(sol);
    }
    let x: Vec<f64> = points.iter().map(|q| db(q.input)).collect();
    let y1: Vec<f64> = points.iter().map(|q| db(q.fundamental)).collect();
    let y3: Vec<f64> = points.iter().map(|q| db(q.third_order)).collect();
    let n = x.len() as f64;
    let a1 = x.iter().zip(&y1).map(|(x, y)| y - x).sum::<f64>() / n;
    let a3 = x.iter().zip(&y3).map(|(x, y)| y - 3.0 * x).sum::<f64>() / n;
    let iip3_db = (a1 - a3) / 2.0;
    let iip3 = 10f64.powf(iip3_db / 10.0);
    Ok(Iip3 {
        iip3,
        iip3_dbm: watts_to_dbm(iip3),
        slope_fundamental: free_slope(&x, &y1),
        slope_third_order: free_slope(&x, &y3),
        points,
    })
}
