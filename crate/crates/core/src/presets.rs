//! Reference devices: published parameter tables and representative netlists
//! built to reproduce them.
//!
//! Layout dimensions of the measured chips are not public, so the netlists are
//! reconstructions tuned to the published resonance frequency, linewidth and
//! internal quality factor rather than replicas of the layouts.

use serde::{Deserialize, Serialize};

use crate::junction::{self, InductancePolynomial, JunctionModel};
use crate::netlist::{Element, KineticInductor, Netlist, Result, TlSegment, Topology};

/// Phase velocity of the coplanar lines used in the reconstructions (m/s).
pub const V_PH: f64 = 1.2e8;

/// Sheet inductance of the thin aluminium film (H per square).
pub const AL_SHEET_INDUCTANCE: f64 = 1.012e-12;

/// Measured and simulated parameters of one device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceTable {
    pub label: &'static str,
    /// Hz
    pub f_r: f64,
    /// κ/2π (Hz).
    pub kappa_hz: f64,
    pub participation: f64,
    /// H
    pub l_j: f64,
    /// E_C/h (Hz).
    pub e_c_hz: f64,
    /// |K|/2π (Hz) and its quoted uncertainty.
    pub kerr_hz: f64,
    pub kerr_uncertainty_hz: f64,
    pub c4_over_c2: f64,
    pub c4_over_c2_uncertainty: f64,
}

/// Lumped series-RLC equivalent of one device's fundamental mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BbqTable {
    pub label: &'static str,
    /// H
    pub l: f64,
    /// F
    pub c: f64,
    /// Ω
    pub r: f64,
    pub participation: f64,
}

pub const DEVICE_A: DeviceTable = DeviceTable {
    label: "device A",
    f_r: 7.52e9,
    kappa_hz: 41.3e6,
    participation: 0.29,
    l_j: 0.205e-9,
    e_c_hz: 25.6e6,
    kerr_hz: 3300.0,
    kerr_uncertainty_hz: 1000.0,
    c4_over_c2: 5.3e-3,
    c4_over_c2_uncertainty: 1.6e-3,
};

pub const DEVICE_B: DeviceTable = DeviceTable {
    label: "device B",
    f_r: 6.63e9,
    kappa_hz: 32.3e6,
    participation: 0.11,
    l_j: 0.200e-9,
    e_c_hz: 51.7e6,
    kerr_hz: 130.0,
    kerr_uncertainty_hz: 40.0,
    c4_over_c2: 1.9e-3,
    c4_over_c2_uncertainty: 0.6e-3,
};

pub const BBQ_A: BbqTable =
    BbqTable { label: "device A", l: 0.416e-9, c: 0.755e-12, r: 1.174, participation: 0.289 };

pub const BBQ_B: BbqTable =
    BbqTable { label: "device B", l: 1.623e-9, c: 0.474e-12, r: 0.541, participation: 0.110 };

/// Internal quality factor read off the unpumped reflection dip of device A.
pub const DEVICE_A_Q_INT: f64 = 660.0;

/// Directly coupled reflection amplifier: port pad, 150 Ω and 25 Ω matching
/// lines, the kinetic inductance of the junction leads, a loss resistor and
/// the junction to ground.
pub fn device_a() -> Result<Netlist> {
    Netlist::new(
        vec![
            Element::shunt_capacitor(1.7e-12),
            Element::Line(TlSegment::lossless(150.0, 3.40e-3, V_PH)),
            Element::Line(TlSegment::lossless(25.0, 2.89e-3, V_PH)),
            Element::Kinetic(KineticInductor { length_squares: 77.0, l_sq: AL_SHEET_INDUCTANCE }),
            Element::series_resistor(0.044),
            Element::Junction { l_j: DEVICE_A.l_j },
        ],
        Topology::Reflection,
        50.0,
    )
}

/// Capacitively coupled λ/4 hanger resonator shorted through the junction.
pub fn device_b() -> Result<Netlist> {
    Netlist::new(
        vec![
            Element::series_capacitor(31.3e-15),
            Element::Line(TlSegment::lossless(85.0, 3.93e-3, V_PH)),
            Element::series_resistor(0.02),
            Element::Junction { l_j: DEVICE_B.l_j },
        ],
        Topology::Hanger,
        50.0,
    )
}

/// Weakly nonlinear semiconductor junction with the given c₄/c₂.
pub fn ssms_junction(l_j: f64, c4_over_c2: f64) -> junction::Result<JunctionModel> {
    JunctionModel::ssms(l_j, 1.0, c4_over_c2)
}

/// Fraction of the critical current covered by the amplifier L(I) fits. The
/// tunnel junction needs a wider margin relative to I_c because its pumped
/// currents sit much closer to it.
pub fn fit_fraction(model: &JunctionModel) -> f64 {
    match model.kind {
        junction::JunctionKind::Sis => 0.7,
        _ => 0.5,
    }
}

/// Order of the amplifier L(I) fits.
pub const AMPLIFIER_FIT_ORDER: usize = 10;

/// L(I) polynomial used for amplifier simulations of `model`.
pub fn amplifier_polynomial(model: &JunctionModel) -> junction::Result<InductancePolynomial> {
    junction::fit_inductance_polynomial(
        model,
        fit_fraction(model) * model.critical_current(),
        AMPLIFIER_FIT_ORDER,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitres;
    use std::f64::consts::PI;

    fn fitted(net: &Netlist, center: f64) -> fitres::ResonanceFit {
        let trace: Vec<_> = (0..2001)
            .map(|k| {
                let f = center - 0.15e9 + 0.3e9 * k as f64 / 2000.0;
                (f, net.response(f).unwrap())
            })
            .collect();
        fitres::fit(&trace, net.topology).unwrap()
    }

    #[test]
    fn device_a_linewidth_and_internal_q() {
        let net = device_a().unwrap();
        let fit = fitted(&net, 7.5e9);
        let kappa_hz = fit.kappa / (2.0 * PI);
        assert!((kappa_hz / DEVICE_A.kappa_hz - 1.0).abs() < 0.02, "{kappa_hz}");
        assert!((fit.f_r / DEVICE_A.f_r - 1.0).abs() < 0.01, "{}", fit.f_r);
        let q_int = 2.0 * PI * fit.f_r / fit.kappa_int;
        assert!((q_int / DEVICE_A_Q_INT - 1.0).abs() < 0.05, "{q_int}");
    }

    #[test]
    fn device_b_frequency_and_linewidth() {
        let net = device_b().unwrap();
        let fit = fitted(&net, 6.63e9);
        assert!((fit.f_r / DEVICE_B.f_r - 1.0).abs() < 0.005, "{}", fit.f_r);
        let kappa_hz = fit.kappa / (2.0 * PI);
        assert!((kappa_hz / DEVICE_B.kappa_hz - 1.0).abs() < 0.03, "{kappa_hz}");
    }

    #[test]
    fn kinetic_leads() {
        let net = device_a().unwrap();
        let l: f64 = net
            .elements
            .iter()
            .filter_map(|e| match e {
                Element::Kinetic(k) => Some(k.inductance()),
                _ => None,
            })
            .sum();
        assert!((l - 77.924e-12).abs() < 1e-15);
    }
}
