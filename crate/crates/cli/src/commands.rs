//! One function per subcommand. Each returns the JSON summary and the files to
//! write; nothing touches the output directory here.

use std::f64::consts::PI;
use std::path::Path;

use kerrkit::config::{DeviceConfig, RunConfig};
use kerrkit::constants::{dbm_to_watts, watts_to_dbm};
use kerrkit::duffing::{self, StarkFit};
use kerrkit::fitres::{self, ResonanceFit};
use kerrkit::hb::amplifier::{self, Compression, GainMap, PumpedState};
use kerrkit::hb::Tone;
use kerrkit::io::{csv as kcsv, touchstone};
use kerrkit::netlist::Topology;
use kerrkit::pipeline::{self, DevicePrediction, Discrepancy, TunedCompression};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::output::{Artifact, Output};
use crate::CliError;

const TWO_PI: f64 = 2.0 * PI;

fn topology_name(t: Topology) -> &'static str {
    match t {
        Topology::Reflection => "reflection",
        Topology::Hanger => "hanger",
    }
}

fn compute<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Compute(e.to_string())
}

fn csv_artifact(
    name: &str,
    f: impl FnOnce(&mut Vec<u8>) -> kerrkit::io::Result<()>,
) -> Result<Artifact, CliError> {
    let mut bytes = Vec::new();
    f(&mut bytes).map_err(compute)?;
    Ok(Artifact { name: name.into(), bytes })
}

fn prediction_json(p: &DevicePrediction) -> Value {
    let x = &p.extraction;
    json!({
        "label": p.label,
        "topology": topology_name(p.topology),
        "rlc_pinned": p.rlc_pinned,
        "series_l_nh": x.l_h * 1e9,
        "series_c_pf": x.c_f * 1e12,
        "series_r_ohm": x.r_ohm,
        "l_j_nh": x.l_j_h * 1e9,
        "participation": x.participation,
        "e_c_hz": x.e_c_over_h_hz,
        "bbq_mode_frequency_hz": x.mode_frequency_hz,
        "kerr_shift_hz": p.kerr_shift_hz,
        "duffing_kerr_hz": p.duffing_kerr_hz,
        "linear_resonance": p.linear.as_ref().map(|l| json!({
            "f_r_hz": l.f_r_hz,
            "kappa_hz": l.kappa_hz,
            "kappa_ext_hz": l.kappa_ext_hz,
            "kappa_int_hz": l.kappa_int_hz,
            "q_int": l.q_int,
        })),
        "linear_error": p.linear_error.as_ref().map(|e| e.to_string()),
        "bbq_fit_offset_relative": p.bbq_fit_offset,
        "bbq_consistent": p.bbq_consistent,
    })
}

fn audit_json(rows: &[Discrepancy]) -> Value {
    Value::Array(
        rows.iter()
            .map(|r| {
                json!({
                    "device": r.device,
                    "quantity": r.quantity,
                    "tabulated": r.tabulated,
                    "recomputed": r.recomputed,
                    "relative": r.relative,
                    "from": r.from,
                    "flagged": r.flagged,
                })
            })
            .collect(),
    )
}

fn fit_json(fit: &ResonanceFit) -> Value {
    json!({
        "topology": topology_name(fit.topology),
        "f_r_hz": fit.f_r,
        "f_r_std_hz": fit.f_r_std(),
        "kappa_hz": fit.kappa / TWO_PI,
        "kappa_std_hz": fit.kappa_std() / TWO_PI,
        "kappa_ext_hz": fit.kappa_ext / TWO_PI,
        "kappa_ext_std_hz": fit.kappa_ext_std() / TWO_PI,
        "kappa_int_hz": fit.kappa_int / TWO_PI,
        "kappa_int_std_hz": fit.kappa_int_std / TWO_PI,
        "q_int": TWO_PI * fit.f_r / fit.kappa_int,
        "q_ext": TWO_PI * fit.f_r / fit.kappa_ext,
        "residual_rms": fit.residual_rms,
        "delay_s": fit.delay,
        "theta_rad": fit.theta,
        "iterations": fit.iterations,
    })
}

fn compression_json(c: &Compression) -> Value {
    json!({
        "p1db_w": c.p1db,
        "p1db_dbm": c.p1db_dbm,
        "small_signal_gain_db": c.small_signal_gain_db,
        "probe_frequency_hz": c.probe_frequency,
        "branch_lost": c.branch_lost,
    })
}

fn compression_csv(name: &str, c: &Compression) -> Result<Artifact, CliError> {
    let rows: Vec<Vec<f64>> = c.sweep.iter().map(|&(p, g)| vec![watts_to_dbm(p), g]).collect();
    csv_artifact(name, |w| kcsv::write_columns(w, &["probe_power_dbm", "gain_db"], &rows))
}

fn map_json(map: &GainMap) -> Value {
    let best = map.max_gain();
    json!({
        "pump_frequencies": map.pump_frequencies.len(),
        "pump_powers": map.pump_powers.len(),
        "max_gain_db": best.map(|b| b.0),
        "max_gain_pump_frequency_hz": best.map(|b| map.pump_frequencies[b.2]),
        "max_gain_pump_power_dbm": best.map(|b| watts_to_dbm(map.pump_powers[b.1])),
        "failed_cells": map.failures.len(),
        "contours_db": map.contour_levels.iter()
            .map(|&l| json!({ "level_db": l, "present": map.has_contour(l) }))
            .collect::<Vec<_>>(),
        "probe_offset_hz": map.probe_offset,
    })
}

fn map_csv(name: &str, map: &GainMap) -> Result<Artifact, CliError> {
    csv_artifact(name, |w| {
        kcsv::write_matrix(
            w,
            "pump_power_dbm\\pump_frequency_hz",
            &map.pump_frequencies,
            &map.pump_powers_dbm(),
            &map.gain_db,
        )
    })
}

fn device_of<'a>(cfg: &'a RunConfig, label: Option<&str>) -> Result<&'a DeviceConfig, CliError> {
    cfg.device(label).map_err(CliError::Config)
}

fn amplifier_of(cfg: &RunConfig) -> Result<&kerrkit::config::AmplifierConfig, CliError> {
    cfg.amplifier.as_ref().ok_or_else(|| CliError::Usage("config has no [amplifier] section".into()))
}

pub fn predict(cfg: &RunConfig, label: Option<&str>) -> Result<Output, CliError> {
    let devices: Vec<&DeviceConfig> = match label {
        Some(_) => vec![device_of(cfg, label)?],
        None => cfg.devices.iter().collect(),
    };
    if devices.is_empty() {
        return Err(CliError::Usage("config defines no device".into()));
    }
    let grid = cfg.grid();
    let mut out = Vec::new();
    for d in devices {
        let spec = d.spec(&grid).map_err(CliError::Config)?;
        out.push(prediction_json(&pipeline::predict_device(&spec).map_err(compute)?));
    }
    let summary = json!({
        "devices": out,
        "table_audit": audit_json(&pipeline::audit_tables(0.05)),
    });
    Ok(Output::new(summary.clone()).with(Artifact::json("prediction.json", &summary)))
}

pub fn bbq(cfg: &RunConfig, label: Option<&str>) -> Result<Output, CliError> {
    let d = device_of(cfg, label)?;
    let grid = cfg.grid();
    let spec = d.spec(&grid).map_err(CliError::Config)?;
    let rlc = match spec.pinned_rlc {
        Some(r) => r,
        None => kerrkit::bbq::extract_series_rlc(&spec.netlist, &spec.grid).map_err(compute)?,
    };
    let x = kerrkit::bbq::analyze(&rlc, spec.junction.l_j, spec.junction.c4_over_c2())
        .map_err(compute)?;
    let summary = json!({
        "label": d.label,
        "rlc_pinned": spec.pinned_rlc.is_some(),
        "series_resonance_hz": rlc.omega0 / TWO_PI,
        "series_l_nh": x.l_h * 1e9,
        "series_c_pf": x.c_f * 1e12,
        "series_r_ohm": x.r_ohm,
        "l_j_nh": x.l_j_h * 1e9,
        "participation": x.participation,
        "e_c_hz": x.e_c_over_h_hz,
        "kerr_shift_hz": x.kerr_hz,
        "bbq_mode_frequency_hz": x.mode_frequency_hz,
    });
    let points = spec.grid.points();
    let z: Vec<(f64, Complex64)> = points
        .iter()
        .map(|&f| spec.netlist.impedance_at_junction_plane(f).map(|z| (f, z)))
        .collect::<Result<_, _>>()
        .map_err(compute)?;
    let response: Vec<(f64, Complex64)> = points
        .iter()
        .map(|&f| spec.netlist.response(f).map(|s| (f, s)))
        .collect::<Result<_, _>>()
        .map_err(compute)?;
    let (data, ext) = match spec.netlist.topology {
        Topology::Reflection => (touchstone::one_port(&response, spec.netlist.port_impedance), "s1p"),
        Topology::Hanger => {
            (touchstone::hanger_two_port(&response, spec.netlist.port_impedance), "s2p")
        }
    };
    let ts = touchstone::render(&data).map_err(compute)?;
    Ok(Output::new(summary.clone())
        .with(Artifact::json("bbq.json", &summary))
        .with(csv_artifact("junction_impedance.csv", |w| kcsv::write_trace(w, &z))?)
        .with(Artifact { name: format!("response.{ext}"), bytes: ts.into_bytes() }))
}

pub fn calibrate(cfg: &RunConfig) -> Result<Output, CliError> {
    let mode = cfg.mode.ok_or_else(|| CliError::Usage("calibrate needs a [mode] section".into()))?;
    let drive =
        cfg.drive.ok_or_else(|| CliError::Usage("calibrate needs a [drive] section".into()))?;
    let (m, d) = (mode.params(), drive.spec());
    let roots = duffing::steady_state_occupation(&m, &d).map_err(compute)?;
    let linear_n = duffing::photon_number(&m, &d).map_err(compute)?;
    let states: Vec<Value> = roots
        .iter()
        .map(|r| {
            json!({
                "n_bar": r.n,
                "stable": r.stable,
                "stark_shift_hz": duffing::stark_shift(&m, r.n).ok(),
            })
        })
        .collect();
    let bif = match duffing::bifurcation_threshold(&m) {
        Ok(b) => json!({
            "n_crit": b.n_crit,
            "delta_crit_hz": b.delta_crit / TWO_PI,
            "p_crit_w": b.p_crit,
            "p_crit_dbm": watts_to_dbm(b.p_crit),
        }),
        Err(duffing::DuffingError::NoBifurcation) => Value::Null,
        Err(e) => return Err(compute(e)),
    };
    let summary = json!({
        "linear_photon_number": linear_n,
        "steady_states": states,
        "bistable": roots.len() > 1,
        "bifurcation": bif,
        "iip3_dbm_from_kerr": (m.kerr != 0.0)
            .then(|| duffing::iip3_from_kerr(m.f_r, m.kappa, m.kerr.abs()).ok().map(watts_to_dbm))
            .flatten(),
    });
    Ok(Output::new(summary.clone()).with(Artifact::json("calibration.json", &summary)))
}

fn stark_json(fit: &StarkFit) -> Value {
    json!({
        "kerr_hz": fit.kerr_hz,
        "kerr_std_err_hz": fit.kerr_std_err_hz,
        "intercept_hz": fit.intercept_hz,
        "points_used": fit.points_used,
    })
}

pub struct KerrFitOptions<'a> {
    pub input: &'a Path,
    pub x_column: &'a str,
    pub y_column: &'a str,
    pub below_bifurcation: Option<f64>,
    pub bootstrap: usize,
    pub seed: u64,
}

pub fn kerr_fit(cfg: Option<&RunConfig>, o: &KerrFitOptions) -> Result<Output, CliError> {
    let file = std::fs::File::open(o.input)
        .map_err(|e| CliError::Input(format!("{}: {e}", o.input.display())))?;
    let data = kcsv::read_columns(file, o.x_column, o.y_column)
        .map_err(|e| CliError::Input(e.to_string()))?;
    let fit_once = |d: &[(f64, f64)]| -> Result<StarkFit, CliError> {
        match o.below_bifurcation {
            Some(fraction) => {
                let mode = cfg.and_then(|c| c.mode).ok_or_else(|| {
                    CliError::Usage("--below-bifurcation needs a config with a [mode] section".into())
                })?;
                duffing::fit_kerr_from_stark_below_bifurcation(d, &mode.params(), fraction)
                    .map_err(compute)
            }
            None => duffing::fit_kerr_from_stark(d).map_err(compute),
        }
    };
    let fit = fit_once(&data)?;
    let mut summary = stark_json(&fit);
    if o.bootstrap > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
        let mut ks = Vec::with_capacity(o.bootstrap);
        for _ in 0..o.bootstrap {
            let sample: Vec<(f64, f64)> =
                (0..data.len()).map(|_| data[rng.gen_range(0..data.len())]).collect();
            if let Ok(f) = fit_once(&sample) {
                ks.push(f.kerr_hz);
            }
        }
        let n = ks.len() as f64;
        let mean = ks.iter().sum::<f64>() / n;
        let std = (ks.iter().map(|k| (k - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        summary["bootstrap"] = json!({
            "seed": o.seed,
            "requested": o.bootstrap,
            "successful": ks.len(),
            "kerr_mean_hz": (ks.len() > 1).then_some(mean),
            "kerr_std_hz": (ks.len() > 1).then_some(std),
        });
    }
    Ok(Output::new(summary.clone()).with(Artifact::json("kerr_fit.json", &summary)))
}

pub fn kerr_iip3(f0_ghz: f64, kappa_mhz: f64, iip3_dbm: f64) -> Result<Output, CliError> {
    let k = duffing::kerr_from_iip3(f0_ghz * 1e9, TWO_PI * kappa_mhz * 1e6, dbm_to_watts(iip3_dbm))
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(Output::new(json!({
        "f0_hz": f0_ghz * 1e9,
        "kappa_hz": kappa_mhz * 1e6,
        "iip3_dbm": iip3_dbm,
        "kerr_hz": k,
    })))
}

pub fn gain_map(cfg: &RunConfig, label: Option<&str>) -> Result<Output, CliError> {
    let d = device_of(cfg, label)?;
    let amp = amplifier_of(cfg)?;
    let net = d.netlist().map_err(CliError::Config)?;
    let poly = d.junction.polynomial().map_err(CliError::Config)?;
    let search = amp.search(amp.pump_power_start_dbm, amp.pump_power_stop_dbm);
    let opts = amp.options(&cfg.hb);
    let map = amplifier::gain_map(&net, &poly, &search.frequencies, &search.powers, &opts)
        .map_err(compute)?;
    let summary = json!({ "label": d.label, "gain_map": map_json(&map) });
    Ok(Output::new(summary.clone())
        .with(Artifact::json("gain_map.json", &summary))
        .with(map_csv("gain_map_db.csv", &map)?))
}

pub fn p1db(cfg: &RunConfig, label: Option<&str>) -> Result<Output, CliError> {
    let d = device_of(cfg, label)?;
    let amp = amplifier_of(cfg)?;
    let (Some(f_ghz), Some(p_dbm)) = (amp.pump_freq_ghz, amp.pump_power_dbm) else {
        return Err(CliError::Usage("p1db needs amplifier.pump_freq_ghz and pump_power_dbm".into()));
    };
    let net = d.netlist().map_err(CliError::Config)?;
    let poly = d.junction.polynomial().map_err(CliError::Config)?;
    let opts = amp.options(&cfg.hb);
    let pump = Tone::new(f_ghz * 1e9, dbm_to_watts(p_dbm));
    let state = PumpedState::new(&net, &poly, pump, &opts).map_err(compute)?;
    let c = amplifier::p1db(&state, pump.frequency + opts.probe_offset, &amp.p1db_sweep())
        .map_err(compute)?;
    let summary = json!({
        "label": d.label,
        "pump_frequency_hz": pump.frequency,
        "pump_power_dbm": p_dbm,
        "compression": compression_json(&c),
    });
    Ok(Output::new(summary.clone())
        .with(Artifact::json("p1db.json", &summary))
        .with(compression_csv("p1db_sweep.csv", &c)?))
}

pub fn iip3(cfg: &RunConfig, label: Option<&str>) -> Result<Output, CliError> {
    let d = device_of(cfg, label)?;
    let t = cfg.iip3.as_ref().ok_or_else(|| CliError::Usage("config has no [iip3] section".into()))?;
    let net = d.netlist().map_err(CliError::Config)?;
    let poly = d.junction.polynomial().map_err(CliError::Config)?;
    let opts = cfg.amplifier.as_ref().map(|a| a.options(&cfg.hb)).unwrap_or_else(|| {
        amplifier::AmpOptions { hb: cfg.hb.options(), ..Default::default() }
    });
    let inputs: Vec<f64> = t.powers_dbm.iter().map(|&p| dbm_to_watts(p)).collect();
    let r = amplifier::iip3(&net, &poly, t.f1_ghz * 1e9, t.f2_ghz * 1e9, &inputs, &opts)
        .map_err(compute)?;
    let guess = 0.5 * (t.f1_ghz + t.f2_ghz) * 1e9;
    let (linear, kerr) = match pipeline::linear_resonance(&net, guess) {
        Ok(l) => {
            let k = duffing::kerr_from_iip3(l.f_r_hz, TWO_PI * l.kappa_hz, r.iip3).ok();
            (Some(json!({ "f_r_hz": l.f_r_hz, "kappa_hz": l.kappa_hz })), k)
        }
        Err(_) => (None, None),
    };
    let summary = json!({
        "label": d.label,
        "iip3_w": r.iip3,
        "iip3_dbm": r.iip3_dbm,
        "slope_fundamental_db_per_db": r.slope_fundamental,
        "slope_third_order_db_per_db": r.slope_third_order,
        "linear_resonance": linear,
        "kerr_from_iip3_hz": kerr,
    });
    let rows: Vec<Vec<f64>> = r
        .points
        .iter()
        .map(|p| vec![watts_to_dbm(p.input), watts_to_dbm(p.fundamental), watts_to_dbm(p.third_order)])
        .collect();
    Ok(Output::new(summary.clone())
        .with(Artifact::json("iip3.json", &summary))
        .with(csv_artifact("iip3_points.csv", |w| {
            kcsv::write_columns(
                w,
                &["input_dbm", "fundamental_out_dbm", "third_order_out_dbm"],
                &rows,
            )
        })?))
}

fn tuned_json(t: &TunedCompression) -> Value {
    json!({
        "gain_map": map_json(&t.map),
        "pump_condition": {
            "pump_frequency_hz": t.chosen.pump_frequency,
            "pump_power_dbm": t.chosen.pump_power_dbm,
            "gain_db": t.chosen.gain_db,
            "pumped_resonance_hz": t.chosen.pumped_resonance,
        },
        "candidates": t.candidates.len(),
        "compression": compression_json(&t.compression),
    })
}

pub fn compare(cfg: &RunConfig) -> Result<Output, CliError> {
    let cmp = cfg.compare.as_ref().ok_or_else(|| CliError::Usage("config has no [compare] section".into()))?;
    let amp = amplifier_of(cfg)?;
    let d = device_of(cfg, Some(&cmp.device))?;
    let net = d.netlist().map_err(CliError::Config)?;
    let branches = cfg.branches().map_err(CliError::Config)?;
    let grid = cfg.grid().build().map_err(CliError::Config)?;
    let mode = pipeline::linear_mode(&net, &grid).map_err(compute)?;
    let spec = serde_json::to_value(cfg).map_err(compute)?;
    let report = pipeline::compare(&d.label, &net, &branches, mode, &amp.options(&cfg.hb), spec);
    let mut artifacts = Vec::new();
    let mut failures = Vec::new();
    let mut entries = Vec::new();
    for (k, b) in report.branches.iter().enumerate() {
        match (&b.result, &b.error) {
            (Some(t), _) => {
                artifacts.push(map_csv(&format!("gain_map_{k}_db.csv"), &t.map)?);
                artifacts.push(compression_csv(&format!("p1db_sweep_{k}.csv"), &t.compression)?);
                entries.push(json!({ "label": b.label, "result": tuned_json(t) }));
            }
            (None, e) => {
                let msg = e.as_ref().map(|e| e.to_string()).unwrap_or_default();
                failures.push(msg.clone());
                entries.push(json!({
                    "label": b.label,
                    "error": e.as_ref().map(|e| json!({ "stage": e.stage.to_string(), "message": e.message })),
                }));
            }
        }
    }
    let summary = json!({
        "device": report.device,
        "linear_mode": {
            "f_r_hz": report.linear_mode.f_r_hz,
            "l_embedding_nh": report.linear_mode.l_embedding * 1e9,
        },
        "branches": entries,
        "delta_p1db_db": report.delta_p1db_db,
        "spec": report.spec,
    });
    let mut out = Output::new(summary.clone()).with(Artifact::json("comparison.json", &summary));
    out.artifacts.extend(artifacts);
    out.partial_failures = failures;
    Ok(out)
}

pub struct FitOptions<'a> {
    pub input: &'a Path,
    pub topology: Option<Topology>,
    pub start_ghz: Option<f64>,
    pub stop_ghz: Option<f64>,
}

pub fn fit(o: &FitOptions) -> Result<Output, CliError> {
    let is_csv = o.input.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let (trace, default_topology) = if is_csv {
        let file = std::fs::File::open(o.input)
            .map_err(|e| CliError::Input(format!("{}: {e}", o.input.display())))?;
        (kcsv::read_trace(file).map_err(|e| CliError::Input(e.to_string()))?, None)
    } else {
        let data = touchstone::read(o.input).map_err(|e| CliError::Input(e.to_string()))?;
        let t = if data.ports == 1 { Topology::Reflection } else { Topology::Hanger };
        (data.resonance_trace(), Some(t))
    };
    let topology = o.topology.or(default_topology).ok_or_else(|| {
        CliError::Usage("--topology is required for CSV traces".into())
    })?;
    let lo = o.start_ghz.map_or(f64::NEG_INFINITY, |g| g * 1e9);
    let hi = o.stop_ghz.map_or(f64::INFINITY, |g| g * 1e9);
    let window: Vec<(f64, Complex64)> =
        trace.into_iter().filter(|(f, _)| *f >= lo && *f <= hi).collect();
    let fit = fitres::fit(&window, topology).map_err(compute)?;
    let summary = fit_json(&fit);
    Ok(Output::new(summary.clone()).with(Artifact::json("fit.json", &summary)))
}
