use kerrkit::bbq::SeriesRlc;
use kerrkit::junction::JunctionModel;
use kerrkit::netlist::FrequencyGrid;
use kerrkit::pipeline::*;
use kerrkit::presets;

fn grid() -> FrequencyGrid {
    FrequencyGrid::new(2e9, 12e9, 2001).unwrap()
}

fn spec_b(pinned: bool) -> DeviceSpec {
    let t = presets::BBQ_B;
    DeviceSpec {
        label: "device B".into(),
        netlist: presets::device_b().unwrap(),
        junction: presets::ssms_junction(presets::DEVICE_B.l_j, presets::DEVICE_B.c4_over_c2)
            .unwrap(),
        pinned_rlc: pinned.then(|| SeriesRlc {
            omega0: 1.0 / (t.l * t.c).sqrt(),
            l: t.l,
            c: t.c,
            r: t.r,
        }),
        grid: grid(),
    }
}

#[test]
fn pinned_rlc_reproduces_tabulated_participation() {
    let p = predict_device(&spec_b(true)).unwrap();
    assert!(p.rlc_pinned);
    assert!((p.extraction.participation - 0.110).abs() < 5e-4, "{}", p.extraction.participation);
    // Duffing coefficient is half the per-photon shift, and negative.
    assert!((p.duffing_kerr_hz + p.kerr_shift_hz / 2.0).abs() < 1e-12 * p.kerr_shift_hz);
}

#[test]
fn extracted_mode_agrees_with_fitted_resonance() {
    for spec in [
        spec_b(false),
        DeviceSpec {
            label: "device A".into(),
            netlist: presets::device_a().unwrap(),
            junction: JunctionModel::sis(presets::DEVICE_A.l_j).unwrap(),
            pinned_rlc: None,
            grid: grid(),
        },
    ] {
        let p = predict_device(&spec).unwrap();
        assert_eq!(p.bbq_consistent, Some(true), "{}: {:?}", spec.label, p.bbq_fit_offset);
        let m = p.mode_params().unwrap();
        assert!(m.validate().is_ok());
        assert!(m.kerr < 0.0);
    }
}

#[test]
fn prediction_is_deterministic() {
    let a = serde_json::to_string(&predict_device(&spec_b(false)).unwrap()).unwrap();
    let b = serde_json::to_string(&predict_device(&spec_b(false)).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn grid_without_resonance_fails_in_extraction() {
    let mut spec = spec_b(false);
    spec.grid = FrequencyGrid::new(1e9, 2e9, 201).unwrap();
    let e = predict_device(&spec).unwrap_err();
    assert_eq!(e.stage, Stage::Extraction);
}

#[test]
fn linear_junction_predicts_zero_kerr() {
    let mut spec = spec_b(false);
    spec.junction = JunctionModel::ssms(presets::DEVICE_B.l_j, 1.0, 0.0).unwrap();
    let p = predict_device(&spec).unwrap();
    assert_eq!(p.kerr_shift_hz, 0.0);
    assert_eq!(p.duffing_kerr_hz, 0.0);
    assert!(p.extraction.participation > 0.0);
}
