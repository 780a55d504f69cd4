use kerrkit::constants::{db, dbm_to_watts};
use kerrkit::hb::amplifier::*;
use kerrkit::hb::{HbError, Tone};
use kerrkit::junction::{InductancePolynomial, JunctionModel};
use kerrkit::netlist::{Element, Netlist};
use kerrkit::presets;

const PUMP_FREQ: f64 = 7.465e9;

fn ssms(c4: f64) -> InductancePolynomial {
    presets::amplifier_polynomial(&presets::ssms_junction(presets::DEVICE_A.l_j, c4).unwrap())
        .unwrap()
}

fn lossless_a() -> Netlist {
    let mut net = presets::device_a().unwrap();
    for e in net.elements.iter_mut() {
        if let Element::Lumped { value, kind: kerrkit::netlist::LumpedKind::Resistor, .. } = e {
            *value = 0.0;
        }
    }
    net
}

fn operating_point(net: &Netlist, poly: &InductancePolynomial, target: f64) -> PumpedState {
    pump_for_gain(
        net,
        poly,
        PUMP_FREQ,
        dbm_to_watts(-95.0),
        dbm_to_watts(-83.0),
        target,
        &AmpOptions::default(),
    )
    .unwrap()
    .0
}

#[test]
fn zero_pump_gives_unity_gain() {
    let net = presets::device_a().unwrap();
    let g = gain(&net, &ssms(5.3e-3), Tone::new(PUMP_FREQ, 0.0), PUMP_FREQ + 1e6, 1e-21).unwrap();
    assert!(g.abs() < 1e-9, "{g}");
}

#[test]
fn zero_power_map_is_flat() {
    let net = presets::device_a().unwrap();
    let freqs = [7.40e9, 7.45e9, 7.50e9];
    let map = gain_map(&net, &ssms(5.3e-3), &freqs, &[0.0], &AmpOptions::default()).unwrap();
    assert!(map.failures.is_empty());
    for g in &map.gain_db[0] {
        assert!(g.unwrap().abs() < 1e-9);
    }
}

#[test]
fn linear_junction_never_compresses() {
    let net = presets::device_a().unwrap();
    let poly = InductancePolynomial::linear(presets::DEVICE_A.l_j, 1e-5);
    let state =
        PumpedState::new(&net, &poly, Tone::new(PUMP_FREQ, dbm_to_watts(-86.0)), &AmpOptions::default())
            .unwrap();
    assert!(state.gain_db().unwrap().abs() < 1e-9);
    let sweep: Vec<f64> = (0..20).map(|k| dbm_to_watts(-160.0 + 2.0 * k as f64)).collect();
    let r = p1db(&state, PUMP_FREQ + 10e3, &sweep);
    assert!(matches!(r, Err(HbError::NotFound(_))), "{r:?}");
}

#[test]
fn quadratic_free_junction_has_no_intercept() {
    let net = presets::device_b().unwrap();
    let model = JunctionModel::ssms(presets::DEVICE_B.l_j, 1.0, 0.0).unwrap();
    let poly = InductancePolynomial::linear(model.l_j, 1e-6);
    let r = iip3(&net, &poly, 6.6295e9, 6.6305e9, &[1e-16, 1e-15], &AmpOptions::default());
    assert!(matches!(r, Err(HbError::NotFound(_))), "{r:?}");
}

#[test]
fn gain_peaks_at_the_pump() {
    let net = presets::device_a().unwrap();
    let state = operating_point(&net, &ssms(5.3e-3), 20.0);
    let freqs: Vec<f64> = (0..81).map(|k| PUMP_FREQ - 8e6 + 0.2e6 * k as f64 + 1e3).collect();
    let profile = gain_profile(&state, &freqs).unwrap();
    let (k, _) = profile
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.gain_db.total_cmp(&b.1.gain_db))
        .unwrap();
    assert!((freqs[k] - PUMP_FREQ).abs() < 0.25e6, "{}", freqs[k]);
}

#[test]
fn manley_rowe_in_lossless_amplifier() {
    let net = lossless_a();
    let state = operating_point(&net, &ssms(5.3e-3), 20.0);
    let r = state.probe(PUMP_FREQ + 10e3).unwrap();
    let g_s = 10f64.powf(r.gain_db / 10.0);
    let g_i = 10f64.powf(r.idler_gain_db / 10.0);
    assert!((g_i / (g_s - 1.0) - 1.0).abs() < 0.02, "G_s {g_s} G_i {g_i}");
}

#[test]
fn truncation_five_matches_seven() {
    let net = presets::device_a().unwrap();
    let poly = ssms(5.3e-3);
    let state = operating_point(&net, &poly, 20.0);
    let g7 = state.gain_db().unwrap();
    let o5 = AmpOptions { truncation: 5, ..AmpOptions::default() };
    let g5 = PumpedState::new(&net, &poly, state.pump, &o5).unwrap().gain_db().unwrap();
    assert!((g7 - g5).abs() < 0.1, "{g5} vs {g7}");
}

#[test]
fn map_is_continuous_below_bifurcation() {
    let net = presets::device_a().unwrap();
    let powers: Vec<f64> = (0..61).map(|k| dbm_to_watts(-100.0 + 0.25 * k as f64)).collect();
    let map = gain_map(&net, &ssms(5.3e-3), &[7.48e9], &powers, &AmpOptions::default()).unwrap();
    let column: Vec<f64> = map.gain_db.iter().map(|r| r[0].unwrap()).collect();
    let jump = column.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    assert!(jump < 3.0, "{jump}");
    assert!(column.iter().cloned().fold(f64::MIN, f64::max) > 3.0);
}

#[test]
fn map_reaches_twenty_db() {
    let net = presets::device_a().unwrap();
    let freqs: Vec<f64> = (0..21).map(|k| 7.455e9 + 1e6 * k as f64).collect();
    let powers: Vec<f64> = (0..25).map(|k| dbm_to_watts(-90.0 + 0.25 * k as f64)).collect();
    let map = gain_map(&net, &ssms(5.3e-3), &freqs, &powers, &AmpOptions::default()).unwrap();
    assert!(map.max_gain().unwrap().0 >= 20.0);
    assert!(map.has_contour(20.0));
}

#[test]
fn compression_below_small_signal_gain() {
    let net = presets::device_a().unwrap();
    let state = operating_point(&net, &ssms(5.3e-3), 21.0);
    let sweep: Vec<f64> = (0..200).map(|k| dbm_to_watts(-160.0 + 0.5 * k as f64)).collect();
    let c = p1db(&state, PUMP_FREQ + 10e3, &sweep).unwrap();
    assert!((c.small_signal_gain_db - 21.0).abs() < 0.01);
    // The gain at the reported point sits 1 dB below small signal.
    let at = state.solve_probe(PUMP_FREQ + 10e3, c.p1db, None);
    if let Ok(sol) = at {
        let g = state.response_from(&sol).unwrap().gain_db;
        assert!(c.branch_lost || (g - (c.small_signal_gain_db - 1.0)).abs() < 0.05, "{g}");
    }
    assert!(c.p1db_dbm > -140.0 && c.p1db_dbm < -100.0, "{}", c.p1db_dbm);
}

#[test]
fn low_gain_pump_is_rejected() {
    let net = presets::device_a().unwrap();
    let poly = ssms(5.3e-3);
    let state =
        PumpedState::new(&net, &poly, Tone::new(7.40e9, dbm_to_watts(-88.0)), &AmpOptions::default())
            .unwrap();
    let sweep: Vec<f64> = (0..120).map(|k| dbm_to_watts(-130.0 + 0.5 * k as f64)).collect();
    match p1db(&state, 7.40e9 + 10e3, &sweep) {
        Err(HbError::InsufficientGain { gain_db }) => assert!(gain_db < 10.0),
        other => panic!("{other:?}"),
    }
}

#[test]
fn intercept_scales_inversely_with_quartic_ratio() {
    let net = presets::device_b().unwrap();
    let inputs: Vec<f64> = (0..4).map(|k| dbm_to_watts(-140.0 + 2.0 * k as f64)).collect();
    let run = |c4: f64| {
        let poly = presets::amplifier_polynomial(
            &presets::ssms_junction(presets::DEVICE_B.l_j, c4).unwrap(),
        )
        .unwrap();
        iip3(&net, &poly, 6.6295e9, 6.6305e9, &inputs, &AmpOptions::default()).unwrap()
    };
    let strong = run(1.9e-2);
    let weak = run(1.9e-3);
    for r in [&strong, &weak] {
        assert!((r.slope_fundamental - 1.0).abs() < 0.01);
        assert!((r.slope_third_order - 3.0).abs() < 0.01);
    }
    let ratio = weak.iip3 / strong.iip3;
    assert!((db(ratio) - 10.0).abs() < 0.2, "{}", db(ratio));
}
