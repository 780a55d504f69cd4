//! Acceptance criteria, one line per criterion.
//!
//! Positional arguments select criteria by number. Every criterion is always
//! evaluated and reported; the process fails on any FAIL outside
//! `KNOWN_FAILURES`, or on any FAIL at all when `ACCEPTANCE_STRICT=1`.

use std::f64::consts::PI;
use std::time::Instant;

use kerrkit::bbq::{self, SeriesRlc};
use kerrkit::constants::{dbm_to_watts, H_PLANCK};
use kerrkit::duffing::{self, DriveSpec, ModeParams};
use kerrkit::fitres::{self, ResonanceModel};
use kerrkit::hb::amplifier::{self, AmpOptions};
use kerrkit::hb::transient::{transient_oracle, TransientOptions};
use kerrkit::hb::{self, Tone, ToneSet};
use kerrkit::junction::{fit_inductance_polynomial, JunctionModel};
use kerrkit::netlist::{Element, FrequencyGrid, Netlist, Topology};
use kerrkit::pipeline::{self, Branch, PumpSearch};
use kerrkit::presets::{self, DEVICE_A, DEVICE_B};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

/// Criteria that fail with the reference devices; see the decisions ledger.
const KNOWN_FAILURES: &[u32] = &[7];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn c1_kerr_formula() -> Verdict {
    let h = H_PLANCK;
    let a = bbq::predict_kerr(5.3e-3, 0.29, 25.6e6 * h).unwrap();
    let b = bbq::predict_kerr(1.9e-3, 0.11, 51.7e6 * h).unwrap();
    verdict(
        rel(a, 3300.0) < 0.05 && rel(b, 130.0) < 0.10,
        format!("device A {a:.1} Hz (3300 +/- 5%), device B {b:.1} Hz (130 +/- 10%)"),
    )
}

fn c2_participation() -> Verdict {
    let p = bbq::participation(0.200e-9, 1.623e-9).unwrap();
    verdict(rel(p, 0.110) < 0.01, format!("p = {p:.5} (0.110 +/- 1%)"))
}

fn c3_charging_energy() -> Verdict {
    let e = bbq::charging_energy_hz(0.755e-12).unwrap();
    verdict(rel(e, 25.6e6) < 0.01, format!("E_C/h = {:.3} MHz (25.6 +/- 1%)", e / 1e6))
}

fn c4_bbq_round_trip() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_lc, mut worst_r) = (0.0f64, 0.0f64);
    let t0 = Instant::now();
    for _ in 0..100 {
        let l = rng.gen_range(0.2e-9..5e-9);
        let c = rng.gen_range(0.1e-12..2e-12);
        let r = rng.gen_range(0.05..20.0);
        let z = move |f: f64| {
            let w = 2.0 * PI * f;
            Complex64::new(r, w * l - 1.0 / (w * c))
        };
        let f0 = 1.0 / (2.0 * PI * (l * c).sqrt());
        let grid = FrequencyGrid::new(0.5 * f0, 1.7 * f0, 301).unwrap();
        let got: SeriesRlc = bbq::extract_series_rlc(&z, &grid).unwrap();
        worst_lc = worst_lc.max(rel(got.l, l)).max(rel(got.c, c));
        worst_r = worst_r.max(rel(got.r, r));
    }
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        worst_lc < 1e-3 && worst_r < 1e-2 && secs < 1.0,
        format!("worst L/C error {worst_lc:.2e}, worst R error {worst_r:.2e}, {secs:.2} s"),
    )
}

fn c5_hb_vs_transient() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut compared = 0;
    let mut failures = Vec::new();
    let t0 = Instant::now();
    for n in 0..20 {
        let l = rng.gen_range(1e-9..6e-9);
        let c = rng.gen_range(0.3e-12..2e-12);
        let r = rng.gen_range(1.0..20.0);
        let l_j = rng.gen_range(0.3e-9..2e-9);
        let model = if n % 2 == 0 {
            JunctionModel::sis(l_j).unwrap()
        } else {
            JunctionModel::ssms(l_j, 1.0, rng.gen_range(0.05..1.0)).unwrap()
        };
        let poly = fit_inductance_polynomial(&model, 0.6 * model.critical_current(), 10).unwrap();
        let net = Netlist::new(
            vec![
                Element::series_inductor(l),
                Element::series_capacitor(c),
                Element::series_resistor(r),
                Element::Junction { l_j },
            ],
            Topology::Reflection,
            50.0,
        )
        .unwrap();
        let f0 = 1.0 / (2.0 * PI * ((l + l_j) * c).sqrt());
        // Peak current at resonance between 5% and 25% of I_c.
        let i_peak = rng.gen_range(0.05..0.25) * model.critical_current();
        let emf = i_peak * (r + 50.0);
        let power = emf * emf / (8.0 * 50.0);
        let f = f0 * rng.gen_range(0.9..1.1);
        let tones = ToneSet::new(vec![Tone::new(f, power)]);
        let hb = match hb::solve(&net, &poly, &tones) {
            Ok(s) => s,
            Err(e) => {
                failures.push(format!("circuit {n}: HB {e}"));
                continue;
            }
        };
        let tr = match transient_oracle(&net, &poly, &tones, &TransientOptions::default()) {
            Ok(t) => t,
            Err(e) => {
                failures.push(format!("circuit {n}: transient {e}"));
                continue;
            }
        };
        let fund = hb.harmonic(&[1]).unwrap().current.norm();
        for h in &hb.harmonics {
            if h.index[0] <= 0 {
                continue;
            }
            let a = h.current.norm();
            if 20.0 * (a / fund).log10() < -120.0 {
                continue;
            }
            let t = tr.phasor_at(h.frequency).unwrap().norm();
            worst = worst.max(rel(a, t));
            compared += 1;
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        failures.is_empty() && worst < 0.01,
        format!(
            "{compared} harmonics above -120 dBc, worst relative amplitude mismatch {worst:.2e} (< 1e-2), {secs:.1} s{}",
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

fn ssms_a() -> kerrkit::junction::InductancePolynomial {
    presets::amplifier_polynomial(&presets::ssms_junction(DEVICE_A.l_j, DEVICE_A.c4_over_c2).unwrap())
        .unwrap()
}

fn c6_amplifier() -> Verdict {
    let t0 = Instant::now();
    let net = presets::device_a().unwrap();
    let poly = ssms_a();
    let opts = AmpOptions::default();
    let freqs: Vec<f64> = (0..21).map(|k| 7.455e9 + 1e6 * k as f64).collect();
    let powers: Vec<f64> = (0..25).map(|k| dbm_to_watts(-90.0 + 0.25 * k as f64)).collect();
    let map = amplifier::gain_map(&net, &poly, &freqs, &powers, &opts).unwrap();
    let max_gain = map.max_gain().map(|m| m.0).unwrap_or(f64::NAN);

    let f_p = 7.465e9;
    let (state, g) = amplifier::pump_for_gain(
        &net,
        &poly,
        f_p,
        dbm_to_watts(-95.0),
        dbm_to_watts(-83.0),
        20.0,
        &opts,
    )
    .unwrap();
    let probes: Vec<f64> = (0..201).map(|k| f_p - 10e6 + 0.1e6 * k as f64 + 1e3).collect();
    let profile = amplifier::gain_profile(&state, &probes).unwrap();
    let gains: Vec<f64> = profile.iter().map(|r| r.gain_db).collect();
    let k_max = (0..gains.len()).max_by(|&a, &b| gains[a].total_cmp(&gains[b])).unwrap();
    let peak_offset = probes[k_max] - f_p;
    let bw = amplifier::bandwidth_3db(&probes, &gains);
    let secs = t0.elapsed().as_secs_f64();
    let bw_ok = bw.is_some_and(|b| (3e6..=12e6).contains(&b));
    verdict(
        max_gain >= 20.0 && peak_offset.abs() < 0.25e6 && bw_ok,
        format!(
            "map maximum {max_gain:.2} dB; at {:.3} GHz, {:.2} dBm pump ({g:.2} dB): peak {:.2} MHz from pump, 3-dB bandwidth {} (3-12 MHz), {secs:.0} s",
            f_p / 1e9,
            kerrkit::constants::watts_to_dbm(state.pump.power),
            peak_offset / 1e6,
            bw.map_or("none".into(), |b| format!("{:.2} MHz", b / 1e6)),
        ),
    )
}

fn c7_compression_delta() -> Verdict {
    let t0 = Instant::now();
    let net = presets::device_a().unwrap();
    let grid = FrequencyGrid::new(2e9, 12e9, 2001).unwrap();
    let mode = pipeline::linear_mode(&net, &grid).unwrap();
    let axis = |a: f64, b: f64, n: usize| -> Vec<f64> {
        (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
    };
    let probe_sweep: Vec<f64> = (0..341).map(|k| dbm_to_watts(-175.0 + 0.25 * k as f64)).collect();
    let search = |lo: f64, hi: f64| PumpSearch {
        frequencies: axis(7.445e9, 7.485e9, 41),
        powers: axis(lo, hi, 41).into_iter().map(dbm_to_watts).collect(),
        gain_window_db: [20.0, 22.0],
        probe_sweep: probe_sweep.clone(),
    };
    let sis = JunctionModel::sis(DEVICE_A.l_j).unwrap();
    let ssms = presets::ssms_junction(DEVICE_A.l_j, DEVICE_A.c4_over_c2).unwrap();
    let branches = vec![
        Branch {
            label: "SSmS".into(),
            polynomial: presets::amplifier_polynomial(&ssms).unwrap(),
            junction: ssms,
            search: search(-95.0, -80.0),
        },
        Branch {
            label: "SIS".into(),
            polynomial: presets::amplifier_polynomial(&sis).unwrap(),
            junction: sis,
            search: search(-120.0, -100.0),
        },
    ];
    let report = pipeline::compare(
        "device A",
        &net,
        &branches,
        mode,
        &AmpOptions::default(),
        serde_json::Value::Null,
    );
    let secs = t0.elapsed().as_secs_f64();
    let describe = |k: usize| match (&report.branches[k].result, &report.branches[k].error) {
        (Some(r), _) => format!(
            "{} P1dB {:.1} dBm at {:.4} GHz/{:.2} dBm pump{}",
            r.label,
            r.compression.p1db_dbm,
            r.chosen.pump_frequency / 1e9,
            r.chosen.pump_power_dbm,
            if r.compression.branch_lost { " (pump branch lost)" } else { "" }
        ),
        (None, e) => format!("{} failed: {:?}", report.branches[k].label, e),
    };
    let ssms_p1db = report.branches[0].result.as_ref().map(|r| r.compression.p1db_dbm);
    let delta = report.delta_p1db_db;
    let sane = ssms_p1db.is_some_and(|p| (-130.0..=-105.0).contains(&p));
    verdict(
        delta.is_some_and(|d| (7.0..=13.0).contains(&d)) && sane,
        format!(
            "delta {} (7-13 dB); {}; {}; {secs:.0} s",
            delta.map_or("n/a".into(), |d| format!("{d:.1} dB")),
            describe(0),
            describe(1)
        ),
    )
}

fn c8_stark_round_trip() -> Verdict {
    let t0 = Instant::now();
    let kappa = 2.0 * PI * DEVICE_A.kappa_hz;
    let kappa_int = 2.0 * PI * DEVICE_A.f_r / presets::DEVICE_A_Q_INT;
    let mode = ModeParams {
        f_r: DEVICE_A.f_r,
        kappa,
        kappa_ext: kappa - kappa_int,
        kerr: -DEVICE_A.kerr_hz / 2.0,
        topology: Topology::Reflection,
    };
    let n_crit = duffing::bifurcation_threshold(&mode).unwrap().n_crit;
    // Drive below resonance, on the side away from the Kerr pull, and keep
    // the largest occupation under 40% of the bistability threshold.
    let f_d = mode.f_r + 2.0 * DEVICE_A.kappa_hz;
    let n_at = |p: f64| {
        duffing::steady_state_occupation(&mode, &DriveSpec { p_g: p, f_d, attenuation: 1.0 })
            .unwrap()[0]
            .n
    };
    let mut p_max = 1e-15;
    while n_at(p_max * 1.05) < 0.4 * n_crit {
        p_max *= 1.05;
    }
    let truth: Vec<(f64, f64)> = (1..=50)
        .map(|k| {
            let n = n_at(p_max * k as f64 / 50.0);
            (n, duffing::stark_shift(&mode, n).unwrap())
        })
        .collect();
    let noise = Normal::new(0.0, 0.05).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let trials = 200;
    let mut good = 0;
    for _ in 0..trials {
        let data: Vec<(f64, f64)> =
            truth.iter().map(|&(n, df)| (n * (1.0 + rng.sample(noise)), df)).collect();
        let fit = duffing::fit_kerr_from_stark_below_bifurcation(&data, &mode, 0.5).unwrap();
        good += (rel(fit.kerr_hz, mode.kerr) < 0.05) as usize;
    }
    let secs = t0.elapsed().as_secs_f64();
    let rate = good as f64 / trials as f64;
    verdict(
        rate >= 0.95 && secs < 30.0,
        format!("K within 5% in {:.1}% of {trials} trials (>= 95%), {secs:.2} s", 100.0 * rate),
    )
}

fn c9_imd_closed_loop() -> Verdict {
    let t0 = Instant::now();
    let net = presets::device_b().unwrap();
    let model = presets::ssms_junction(DEVICE_B.l_j, DEVICE_B.c4_over_c2).unwrap();
    let poly = presets::amplifier_polynomial(&model).unwrap();
    let grid = FrequencyGrid::new(2e9, 12e9, 2001).unwrap();
    let rlc = bbq::extract_series_rlc(&net, &grid).unwrap();
    let x = bbq::analyze(&rlc, DEVICE_B.l_j, DEVICE_B.c4_over_c2).unwrap();
    let k_config = x.kerr_hz / 2.0;
    let lin = pipeline::linear_resonance(&net, x.mode_frequency_hz).unwrap();
    let f0 = lin.f_r_hz;
    let inputs: Vec<f64> = (0..4).map(|k| dbm_to_watts(-140.0 + 2.0 * k as f64)).collect();
    let r = amplifier::iip3(&net, &poly, f0 - 0.5e6, f0 + 0.5e6, &inputs, &AmpOptions::default())
        .unwrap();
    let k_iip3 = duffing::kerr_from_iip3(f0, 2.0 * PI * lin.kappa_hz, r.iip3).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        rel(k_iip3, k_config) < 0.20,
        format!(
            "IIP3 {:.2} dBm, K from IIP3 {k_iip3:.1} Hz vs configured {k_config:.1} Hz (ratio {:.3}, +/- 20%), {secs:.1} s",
            r.iip3_dbm,
            k_iip3 / k_config
        ),
    )
}

fn add_noise(trace: &mut [(f64, Complex64)], amp: f64, rng: &mut ChaCha8Rng) {
    let n = Normal::new(0.0, amp / 2f64.sqrt()).unwrap();
    for p in trace.iter_mut() {
        p.1 += Complex64::new(rng.sample(n), rng.sample(n));
    }
}

fn c10_fit_calibration() -> Verdict {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let ka = 2.0 * PI * DEVICE_A.kappa_hz;
    let ka_int = 2.0 * PI * DEVICE_A.f_r / presets::DEVICE_A_Q_INT;
    let kb = 2.0 * PI * DEVICE_B.kappa_hz;
    let models = [
        ResonanceModel::ideal(Topology::Reflection, DEVICE_A.f_r, ka - ka_int, ka_int),
        ResonanceModel::ideal(Topology::Hanger, DEVICE_B.f_r, 0.94 * kb, 0.06 * kb),
    ];
    let trials = 500;
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    let mut all_in_band = true;
    for m in &models {
        let w = 8.0 * m.kappa() / (2.0 * PI);
        let clean = fitres::synthesize(m, m.f_r - w, m.f_r + w, 401);
        let mut hits = [0usize; 3];
        for _ in 0..trials {
            let mut t = clean.clone();
            add_noise(&mut t, 1e-3, &mut rng);
            let fit = fitres::fit(&t, m.topology).unwrap();
            worst = worst
                .max(rel(fit.f_r, m.f_r))
                .max(rel(fit.kappa, m.kappa()))
                .max(rel(fit.kappa_ext, m.kappa_ext));
            hits[0] += ((fit.f_r - m.f_r).abs() < 2.0 * fit.f_r_std()) as usize;
            hits[1] += ((fit.kappa - m.kappa()).abs() < 2.0 * fit.kappa_std()) as usize;
            hits[2] += ((fit.kappa_ext - m.kappa_ext).abs() < 2.0 * fit.kappa_ext_std()) as usize;
        }
        let rates: Vec<f64> = hits.iter().map(|&h| h as f64 / trials as f64).collect();
        let pooled = hits.iter().sum::<usize>() as f64 / (3 * trials) as f64;
        all_in_band &= (0.93..=0.97).contains(&pooled);
        lines.push(format!(
            "{:?} 2-sigma coverage {:.1}% (f_r {:.1}%, kappa {:.1}%, kappa_ext {:.1}%)",
            m.topology,
            100.0 * pooled,
            100.0 * rates[0],
            100.0 * rates[1],
            100.0 * rates[2]
        ));
    }
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        worst < 0.01 && all_in_band && secs < 60.0,
        format!("worst rate error {:.3}% (< 1%); {}; {secs:.1} s", 100.0 * worst, lines.join("; ")),
    )
}

fn c11_discrepancies() -> Verdict {
    let rows = pipeline::audit_tables(0.05);
    let find = |d: &str, q: &str| rows.iter().find(|r| r.device == d && r.quantity == q).unwrap();
    let ec = find("device B", "e_c_hz");
    let pa = find("device A", "participation");
    verdict(
        ec.flagged && (ec.recomputed / 1e6 - 40.9).abs() < 0.1 && pa.flagged,
        format!(
            "device B E_C {:.1} MHz vs {:.1} MHz flagged={}; device A p {:.3} vs {:.3} flagged={}",
            ec.recomputed / 1e6,
            ec.tabulated / 1e6,
            ec.flagged,
            pa.recomputed,
            pa.tabulated,
            pa.flagged
        ),
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Verdict); 11] = [
        (1, "Kerr formula reproduction", c1_kerr_formula),
        (2, "participation identity", c2_participation),
        (3, "charging energy", c3_charging_energy),
        (4, "BBQ round trip", c4_bbq_round_trip),
        (5, "HB vs transient oracle", c5_hb_vs_transient),
        (6, "amplifier behaviour", c6_amplifier),
        (7, "SIS vs SSmS compression delta", c7_compression_delta),
        (8, "Stark-shift round trip", c8_stark_round_trip),
        (9, "IMD closed loop", c9_imd_closed_loop),
        (10, "resonance-fit calibration", c10_fit_calibration),
        (11, "documented discrepancies", c11_discrepancies),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut unexpected = Vec::new();
    let mut failed = Vec::new();
    for (n, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let v = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        println!("criterion {n:>2} {name}: {} | {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        if !v.pass {
            failed.push(n);
            if strict || !KNOWN_FAILURES.contains(&n) {
                unexpected.push(n);
            }
        }
    }
    println!(
        "acceptance: {} failed {:?}, known failures {:?}",
        failed.len(),
        failed,
        KNOWN_FAILURES
    );
    if !unexpected.is_empty() {
        eprintln!("acceptance: unexpected failures {unexpected:?}");
        std::process::exit(1);
    }
}
