//! End-to-end chains: netlist to predicted Kerr, and pump tuning followed by
//! compression for several junction kinds sharing one embedding circuit.
//!
//! Each stage reports failures under its own name so that a later stage can
//! fail without hiding the results of the earlier ones.

use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bbq::{self, SeriesRlc, SeriesRlcExtraction};
use crate::constants::{watts_to_dbm, H_PLANCK};
use crate::duffing::ModeParams;
use crate::fitres::{self, ResonanceFit};
use crate::hb::amplifier::{self, AmpOptions, Compression, GainMap, PumpedState};
use crate::junction::{InductancePolynomial, JunctionModel};
use crate::netlist::{FrequencyGrid, Netlist, Topology};
use crate::presets::{BbqTable, DeviceTable, BBQ_A, BBQ_B, DEVICE_A, DEVICE_B};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Extraction,
    Analysis,
    LinearFit,
    GainMap,
    PumpTuning,
    Compression,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Extraction => "extraction",
            Stage::Analysis => "analysis",
            Stage::LinearFit => "linear_fit",
            Stage::GainMap => "gain_map",
            Stage::PumpTuning => "pump_tuning",
            Stage::Compression => "compression",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[error("{label}: {stage} failed: {message}")]
pub struct PipelineError {
    pub label: String,
    pub stage: Stage,
    pub message: String,
}

pub type Result<T> = std::result::Result<T, PipelineError>;

fn fail<E: fmt::Display>(label: &str, stage: Stage) -> impl FnOnce(E) -> PipelineError + '_ {
    move |e| PipelineError { label: label.to_string(), stage, message: e.to_string() }
}

/// Relative mismatch between the BBQ mode frequency and the fitted linear
/// resonance above which the extraction is flagged.
pub const BBQ_FIT_TOLERANCE: f64 = 0.03;

/// A device ready for prediction: embedding netlist, junction and the
/// frequency grid searched for the series resonance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub label: String,
    pub netlist: Netlist,
    pub junction: JunctionModel,
    /// Used instead of extracting the RLC from the netlist.
    pub pinned_rlc: Option<SeriesRlc>,
    pub grid: FrequencyGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearResonance {
    pub f_r_hz: f64,
    pub kappa_hz: f64,
    pub kappa_ext_hz: f64,
    pub kappa_int_hz: f64,
    pub q_int: f64,
    pub fit: ResonanceFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DevicePrediction {
    pub label: String,
    pub topology: Topology,
    pub rlc: SeriesRlc,
    pub rlc_pinned: bool,
    pub extraction: SeriesRlcExtraction,
    /// Frequency shift per added photon, |g|/2π (Hz).
    pub kerr_shift_hz: f64,
    /// Duffing coefficient K/2π with its sign, g/2 (Hz).
    pub duffing_kerr_hz: f64,
    /// Fitted small-signal response of the netlist.
    pub linear: Option<LinearResonance>,
    pub linear_error: Option<PipelineError>,
    /// (BBQ mode frequency − fitted f_r)/fitted f_r.
    pub bbq_fit_offset: Option<f64>,
    pub bbq_consistent: Option<bool>,
}

impl DevicePrediction {
    /// Duffing parameters of the fitted mode with the predicted Kerr.
    pub fn mode_params(&self) -> Option<ModeParams> {
        self.linear.as_ref().map(|l| ModeParams {
            f_r: l.f_r_hz,
            kappa: 2.0 * PI * l.kappa_hz,
            kappa_ext: 2.0 * PI * l.kappa_ext_hz,
            kerr: self.duffing_kerr_hz,
            topology: self.topology,
        })
    }
}

fn fit_window(net: &Netlist, center: f64, half_span: f64) -> fitres::Result<ResonanceFit> {
    const POINTS: usize = 2001;
    let trace: Vec<_> = (0..POINTS)
        .filter_map(|k| {
            let f = center - half_span + 2.0 * half_span * k as f64 / (POINTS - 1) as f64;
            net.response(f).ok().map(|z| (f, z))
        })
        .collect();
    fitres::fit(&trace, net.topology)
}

/// Fits the linear response of `net` near `guess`: a wide first pass, then a
/// window of ±10 linewidths around the first estimate.
pub fn linear_resonance(net: &Netlist, guess: f64) -> fitres::Result<LinearResonance> {
    let first = fit_window(net, guess, 0.02 * guess)?;
    let kappa_hz = first.kappa / (2.0 * PI);
    let half = (10.0 * kappa_hz).min(0.2 * first.f_r);
    let fit = fit_window(net, first.f_r, half)?;
    let two_pi = 2.0 * PI;
    Ok(LinearResonance {
        f_r_hz: fit.f_r,
        kappa_hz: fit.kappa / two_pi,
        kappa_ext_hz: fit.kappa_ext / two_pi,
        kappa_int_hz: fit.kappa_int / two_pi,
        q_int: two_pi * fit.f_r / fit.kappa_int,
        fit,
    })
}

/// Netlist → series RLC → participation, charging energy and Kerr, alongside
/// a fit of the linear resonance of the same netlist.
pub fn predict_device(spec: &DeviceSpec) -> Result<DevicePrediction> {
    let label = spec.label.as_str();
    let l_j = spec.netlist.junction_inductance();
    if (l_j - spec.junction.l_j).abs() > 1e-6 * spec.junction.l_j {
        return Err(PipelineError {
            label: label.into(),
            stage: Stage::Extraction,
            message: format!(
                "netlist junction inductance {l_j:e} H differs from the junction model {:e} H",
                spec.junction.l_j
            ),
        });
    }
    let rlc = match spec.pinned_rlc {
        Some(r) => r,
        None => bbq::extract_series_rlc(&spec.netlist, &spec.grid)
            .map_err(fail(label, Stage::Extraction))?,
    };
    let extraction = bbq::analyze(&rlc, l_j, spec.junction.c4_over_c2())
        .map_err(fail(label, Stage::Analysis))?;
    // A pinned RLC need not describe this netlist, so the fit is seeded from
    // the netlist's own series resonance when one exists.
    let guess = match spec.pinned_rlc {
        Some(_) => bbq::extract_series_rlc(&spec.netlist, &spec.grid)
            .map(|r| 1.0 / (2.0 * PI * ((r.l + l_j) * r.c).sqrt()))
            .unwrap_or(extraction.mode_frequency_hz),
        None => extraction.mode_frequency_hz,
    };
    let (linear, linear_error) = match linear_resonance(&spec.netlist, guess) {
        Ok(l) => (Some(l), None),
        Err(e) => (None, Some(fail(label, Stage::LinearFit)(e))),
    };
    let bbq_fit_offset =
        linear.as_ref().map(|l| (extraction.mode_frequency_hz - l.f_r_hz) / l.f_r_hz);
    Ok(DevicePrediction {
        label: label.into(),
        topology: spec.netlist.topology,
        rlc,
        rlc_pinned: spec.pinned_rlc.is_some(),
        kerr_shift_hz: extraction.kerr_hz,
        duffing_kerr_hz: extraction.signed_kerr_hz() / 2.0,
        extraction,
        linear,
        linear_error,
        bbq_fit_offset,
        bbq_consistent: bbq_fit_offset.map(|d| d.abs() <= BBQ_FIT_TOLERANCE),
    })
}

/// One tabulated quantity recomputed from other tabulated quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub device: String,
    pub quantity: String,
    pub tabulated: f64,
    pub recomputed: f64,
    /// recomputed/tabulated − 1
    pub relative: f64,
    pub from: String,
    pub flagged: bool,
}

fn audit_pair(t: &DeviceTable, b: &BbqTable, tolerance: f64) -> Vec<Discrepancy> {
    let row = |quantity: &str, tabulated: f64, recomputed: f64, from: &str| {
        let relative = recomputed / tabulated - 1.0;
        Discrepancy {
            device: t.label.into(),
            quantity: quantity.into(),
            tabulated,
            recomputed,
            relative,
            from: from.into(),
            flagged: relative.abs() > tolerance,
        }
    };
    let e_c = crate::constants::E_CHARGE.powi(2) / (2.0 * b.c) / H_PLANCK;
    let p = t.l_j / (t.l_j + b.l);
    let f = 1.0 / (2.0 * PI * ((b.l + t.l_j) * b.c).sqrt());
    let kerr = t.c4_over_c2 * t.participation.powi(3) * t.e_c_hz;
    vec![
        row("e_c_hz", t.e_c_hz, e_c, "RLC capacitance"),
        row("participation", b.participation, p, "L_J and RLC inductance"),
        row("f_r_hz", t.f_r, f, "RLC inductance, capacitance and L_J"),
        row("kerr_hz", t.kerr_hz, kerr, "c4/c2, participation and E_C"),
    ]
}

/// Cross-checks the published device tables against each other. Mismatches
/// are reported, never corrected.
pub fn audit_tables(tolerance: f64) -> Vec<Discrepancy> {
    let mut out = audit_pair(&DEVICE_A, &BBQ_A, tolerance);
    out.extend(audit_pair(&DEVICE_B, &BBQ_B, tolerance));
    out
}

/// Grids for the pump search of one junction kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpSearch {
    /// Hz
    pub frequencies: Vec<f64>,
    /// W at the device, increasing.
    pub powers: Vec<f64>,
    /// Accepted small-signal gain window (dB); the midpoint is the target.
    pub gain_window_db: [f64; 2],
    /// Probe powers (W) swept for compression.
    pub probe_sweep: Vec<f64>,
}

impl PumpSearch {
    pub fn target_gain_db(&self) -> f64 {
        0.5 * (self.gain_window_db[0] + self.gain_window_db[1])
    }
}

/// One junction kind in a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub label: String,
    pub junction: JunctionModel,
    pub polynomial: InductancePolynomial,
    pub search: PumpSearch,
}

/// Reference linear mode used to estimate the pumped resonance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearMode {
    pub f_r_hz: f64,
    /// Embedding inductance in series with the junction (H).
    pub l_embedding: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpCandidate {
    pub pump_frequency: f64,
    /// W
    pub pump_power: f64,
    pub pump_power_dbm: f64,
    pub gain_db: f64,
    /// Resonance with the junction at its time-averaged pumped inductance (Hz).
    pub pumped_resonance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunedCompression {
    pub label: String,
    pub map: GainMap,
    pub candidates: Vec<PumpCandidate>,
    pub chosen: PumpCandidate,
    pub compression: Compression,
}

/// Time average of L(i(t)) over one pump period.
pub fn mean_pumped_inductance(state: &PumpedState, poly: &InductancePolynomial) -> f64 {
    const SAMPLES: usize = 512;
    let harmonics: Vec<_> = state
        .solution
        .harmonics
        .iter()
        .filter(|h| h.index.first().is_some_and(|&k| k > 0))
        .map(|h| (h.index[0] as f64, h.current))
        .collect();
    let sum: f64 = (0..SAMPLES)
        .map(|n| {
            let theta = 2.0 * PI * n as f64 / SAMPLES as f64;
            let i: f64 = harmonics
                .iter()
                .map(|&(k, c)| (c * num_complex::Complex64::from_polar(1.0, k * theta)).re)
                .sum();
            poly.eval(i)
        })
        .sum();
    sum / SAMPLES as f64
}

fn pumped_resonance(mode: &LinearMode, l_j: f64, l_mean: f64) -> f64 {
    mode.f_r_hz * ((mode.l_embedding + l_j) / (mode.l_embedding + l_mean)).sqrt()
}

/// Pump powers that bracket the target in one map column: the first solved
/// cell below the target followed by a cell at or above it, or a failed cell.
fn column_bracket(map: &GainMap, column: usize, target: f64) -> Option<(usize, usize)> {
    let col: Vec<Option<f64>> = map.gain_db.iter().map(|r| r[column]).collect();
    (0..col.len().saturating_sub(1)).find_map(|i| match (col[i], col[i + 1]) {
        (Some(a), Some(b)) if a < target && b >= target => Some((i, i + 1)),
        (Some(a), None) if a < target => Some((i, i + 1)),
        _ => None,
    })
}

/// Powers closer than this (dB) count as a tie in the pump choice.
const POWER_TIE_DB: f64 = 1e-3;

/// Gain map, lowest-power pump condition reaching the target gain, then the
/// 1 dB compression point at that condition.
pub fn tune_and_compress(
    net: &Netlist,
    branch: &Branch,
    mode: &LinearMode,
    opts: &AmpOptions,
) -> Result<TunedCompression> {
    let label = branch.label.as_str();
    let search = &branch.search;
    let poly = &branch.polynomial;
    let map = amplifier::gain_map(net, poly, &search.frequencies, &search.powers, opts)
        .map_err(fail(label, Stage::GainMap))?;
    let target = search.target_gain_db();
    let [g_min, g_max] = search.gain_window_db;
    let refined: Vec<(PumpedState, PumpCandidate)> = (0..search.frequencies.len())
        .into_par_iter()
        .filter_map(|j| {
            let (lo, hi) = column_bracket(&map, j, target)?;
            let f = search.frequencies[j];
            let (state, g) = amplifier::pump_for_gain(
                net,
                poly,
                f,
                search.powers[lo],
                search.powers[hi],
                target,
                opts,
            )
            .ok()?;
            if !(g_min..=g_max).contains(&g) {
                return None;
            }
            let l_mean = mean_pumped_inductance(&state, poly);
            let candidate = PumpCandidate {
                pump_frequency: f,
                pump_power: state.pump.power,
                pump_power_dbm: watts_to_dbm(state.pump.power),
                gain_db: g,
                pumped_resonance: pumped_resonance(mode, branch.junction.l_j, l_mean),
            };
            Some((state, candidate))
        })
        .collect();
    let best = refined
        .iter()
        .min_by(|a, b| {
            let (a, b) = (&a.1, &b.1);
            if (a.pump_power_dbm - b.pump_power_dbm).abs() < POWER_TIE_DB {
                let da = (a.pump_frequency - a.pumped_resonance).abs();
                let db = (b.pump_frequency - b.pumped_resonance).abs();
                da.total_cmp(&db)
            } else {
                a.pump_power.total_cmp(&b.pump_power)
            }
        })
        .ok_or_else(|| PipelineError {
            label: label.into(),
            stage: Stage::PumpTuning,
            message: format!(
                "no pump condition on the grid reaches {g_min}..{g_max} dB (map maximum {:?} dB)",
                map.max_gain().map(|m| m.0)
            ),
        })?;
    let (state, chosen) = best;
    let compression = amplifier::p1db(
        state,
        chosen.pump_frequency + opts.probe_offset,
        &search.probe_sweep,
    )
    .map_err(fail(label, Stage::Compression))?;
    Ok(TunedCompression {
        label: label.into(),
        candidates: refined.iter().map(|r| r.1.clone()).collect(),
        chosen: chosen.clone(),
        map,
        compression,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchOutcome {
    pub label: String,
    pub result: Option<TunedCompression>,
    pub error: Option<PipelineError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub device: String,
    /// Configuration the comparison was run from, embedded verbatim.
    pub spec: serde_json::Value,
    pub linear_mode: LinearMode,
    pub branches: Vec<BranchOutcome>,
    /// P1dB of the first branch minus P1dB of the second (dB), when both ran.
    pub delta_p1db_db: Option<f64>,
}

/// Linear reference mode of `net` from its fitted response and its series
/// RLC extraction.
pub fn linear_mode(net: &Netlist, grid: &FrequencyGrid) -> bbq::Result<LinearMode> {
    let rlc = bbq::extract_series_rlc(net, grid)?;
    let f_guess = 1.0 / (2.0 * PI * ((rlc.l + net.junction_inductance()) * rlc.c).sqrt());
    let f_r_hz = linear_resonance(net, f_guess).map(|l| l.f_r_hz).unwrap_or(f_guess);
    Ok(LinearMode { f_r_hz, l_embedding: rlc.l })
}

/// Runs every branch on the same netlist concurrently. A failing branch is
/// reported in its outcome and does not stop the others.
pub fn compare(
    device: &str,
    net: &Netlist,
    branches: &[Branch],
    mode: LinearMode,
    opts: &AmpOptions,
    spec: serde_json::Value,
) -> ComparisonReport {
    let outcomes: Vec<BranchOutcome> = branches
        .par_iter()
        .map(|b| {
            let net = net.with_junction_inductance(b.junction.l_j);
            match tune_and_compress(&net, b, &mode, opts) {
                Ok(r) => BranchOutcome { label: b.label.clone(), result: Some(r), error: None },
                Err(e) => BranchOutcome { label: b.label.clone(), result: None, error: Some(e) },
            }
        })
        .collect();
    let p1 = |k: usize| {
        outcomes.get(k).and_then(|o| o.result.as_ref()).map(|r| r.compression.p1db_dbm)
    };
    let delta_p1db_db = p1(0).zip(p1(1)).map(|(a, b)| a - b);
    ComparisonReport { device: device.into(), spec, linear_mode: mode, branches: outcomes, delta_p1db_db }
}
