//! Time-domain integration of lumped series circuits, used as an independent
//! check on the harmonic-balance engine.
//!
//! The supported circuit is a reflection port (EMF behind Z_p) driving a series
//! chain of R, L, C and the nonlinear inductor to ground:
//!
//! dq/dt = I,  (L_lin + L(I))·dI/dt = V_s(t) − (R + Z_p)·I − q/C.
//!
//! Integration runs in time scaled by the base angular frequency with an
//! explicit 8th-order Dormand–Prince scheme. After the transient has decayed
//! the current is sampled over whole periods of the base frequency, so every
//! tone and mixing product falls on an exact DFT bin.

use std::f64::consts::PI;

use num_complex::Complex64;
use ode_solvers::{Dop853, OutputType, System, Vector3};

/// (scaled charge, scaled current, scaled time). Time is carried as a state
/// so the right-hand side is autonomous.
type State = Vector3<f64>;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{emf_for_power, HbError, Result, ToneSet};
use crate::junction::InductancePolynomial;
use crate::netlist::{Element, LumpedKind, Netlist, Placement, Termination, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransientOptions {
    /// Settling time before sampling (s); `None` uses 60 energy decay times.
    pub settle: Option<f64>,
    /// Base periods in the sampling window.
    pub periods: usize,
    pub samples_per_period: usize,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for TransientOptions {
    fn default() -> Self {
        Self { settle: None, periods: 8, samples_per_period: 128, rtol: 1e-12, atol: 1e-14 }
    }
}

/// Reduced series circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesCircuit {
    pub resistance: f64,
    pub inductance: f64,
    /// Series capacitance (F); infinite when the chain has no capacitor.
    pub capacitance: f64,
    pub port_impedance: f64,
}

impl SeriesCircuit {
    pub fn from_netlist(net: &Netlist) -> Result<Self> {
        if net.topology != Topology::Reflection || net.termination != Termination::Short {
            return Err(HbError::Unsupported(
                "transient integration needs a shorted reflection netlist".into(),
            ));
        }
        let mut r = 0.0;
        let mut l = 0.0;
        let mut inv_c = 0.0;
        for e in &net.elements {
            match *e {
                Element::Lumped { kind, placement: Placement::Series, value } => match kind {
                    LumpedKind::Resistor => r += value,
                    LumpedKind::Inductor => l += value,
                    LumpedKind::Capacitor => inv_c += 1.0 / value,
                },
                Element::Kinetic(k) => l += k.inductance(),
                Element::Junction { .. } => {}
                _ => {
                    return Err(HbError::Unsupported(
                        "transient integration handles series lumped elements only".into(),
                    ))
                }
            }
        }
        Ok(Self {
            resistance: r,
            inductance: l,
            capacitance: if inv_c > 0.0 { 1.0 / inv_c } else { f64::INFINITY },
            port_impedance: net.port_impedance,
        })
    }

    fn total_resistance(&self) -> f64 {
        self.resistance + self.port_impedance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransientResult {
    pub base_frequency: f64,
    /// Sample times over the window (s).
    pub times: Vec<f64>,
    /// Junction current samples (A).
    pub current: Vec<f64>,
    /// Current phasors (A, peak) at k·base_frequency, k = 0, 1, ….
    pub spectrum: Vec<Complex64>,
    /// Mean power delivered by the EMF (W).
    pub source_power: f64,
    /// Mean power dissipated in the port and series resistance (W).
    pub dissipated_power: f64,
    pub steps: u32,
}

impl TransientResult {
    /// Phasor at `frequency`, which must be a multiple of the base frequency.
    pub fn phasor_at(&self, frequency: f64) -> Option<Complex64> {
        let k = frequency / self.base_frequency;
        let kr = k.round();
        if (k - kr).abs() > 1e-6 || kr < 0.0 {
            return None;
        }
        self.spectrum.get(kr as usize).copied()
    }
}

/// Largest f such that every tone is an integer multiple of it (up to 4096).
pub fn common_base(freqs: &[f64]) -> Option<f64> {
    let fmin = freqs.iter().cloned().fold(f64::INFINITY, f64::min);
    (1..=4096).map(|n| fmin / n as f64).find(|&b| {
        freqs.iter().all(|&f| {
            let k = f / b;
            (k - k.round()).abs() < 1e-9 * k.max(1.0)
        })
    })
}

struct Rhs<'a> {
    poly: &'a InductancePolynomial,
    circuit: SeriesCircuit,
    /// (scaled angular frequency, EMF amplitude)
    sources: Vec<(f64, f64)>,
    i_scale: f64,
    w_base: f64,
}

impl Rhs<'_> {
    fn emf(&self, tau: f64) -> f64 {
        self.sources.iter().map(|&(w, v)| v * (w * tau).cos()).sum()
    }
}

impl System<f64, State> for Rhs<'_> {
    fn system(&self, _: f64, y: &State, dy: &mut State) {
        let tau = y[2];
        let i = self.i_scale * y[1];
        let q = self.i_scale * y[0] / self.w_base;
        let v = self.emf(tau) - self.circuit.total_resistance() * i - q / self.circuit.capacitance;
        let l = self.circuit.inductance + self.poly.eval(i);
        dy[0] = y[1];
        dy[1] = v / (l * self.i_scale * self.w_base);
        dy[2] = 1.0;
    }
}

fn map_integration(e: ode_solvers::dop_shared::IntegrationError) -> HbError {
    HbError::StepCollapse(e.to_string())
}

/// Integrate the driven circuit to steady state and sample it.
pub fn transient_oracle(
    net: &Netlist,
    poly: &InductancePolynomial,
    tones: &ToneSet,
    opts: &TransientOptions,
) -> Result<TransientResult> {
    tones.validate()?;
    let circuit = SeriesCircuit::from_netlist(net)?;
    let freqs: Vec<f64> = tones.tones.iter().map(|t| t.frequency).collect();
    let base = common_base(&freqs)
        .ok_or_else(|| HbError::Unsupported("tones share no common base frequency".into()))?;
    let w_base = 2.0 * PI * base;
    let l_tot = circuit.inductance + poly.l0();
    let sources: Vec<(f64, f64)> = tones
        .tones
        .iter()
        .map(|t| (t.frequency / base, emf_for_power(t.power, circuit.port_impedance)))
        .collect();
    let v_max: f64 = sources.iter().map(|s| s.1).sum();
    let w_max = 2.0 * PI * freqs.iter().cloned().fold(0.0, f64::max);
    let i_scale = if v_max > 0.0 { v_max / (w_max * l_tot) } else { 1e-9 };
    let decay = circuit.total_resistance() / l_tot;
    let settle = opts.settle.unwrap_or(60.0 / decay);
    let settle_periods = (settle * base).ceil().max(1.0);
    let tau_start = 2.0 * PI * settle_periods;
    let spp = opts.samples_per_period.max(8);
    let dtau = 2.0 * PI / spp as f64;
    let rhs = || Rhs { poly, circuit, sources: sources.clone(), i_scale, w_base };
    let steps_per_period = 400.0 * (w_max / w_base).max(1.0);
    let leg = |y: State, from: f64, to: f64, h: f64, n_max: f64| {
        let mut solver = Dop853::from_param(
            rhs(),
            from,
            to,
            to - from,
            y,
            opts.rtol,
            opts.atol,
            0.9,
            0.0,
            0.333,
            6.0,
            dtau,
            h,
            n_max.min(4e9) as u32,
            u32::MAX,
            OutputType::Sparse,
        );
        let stats = solver.integrate().map_err(map_integration)?;
        let y = *solver
            .y_out()
            .last()
            .ok_or_else(|| HbError::StepCollapse("integrator returned no state".into()))?;
        let h_last = solver
            .x_out()
            .windows(2)
            .last()
            .map(|w| w[1] - w[0])
            .unwrap_or(0.0);
        Ok::<_, HbError>((y, stats.accepted_steps, h_last))
    };

    let (mut y, mut steps, mut h) =
        leg(State::zeros(), 0.0, tau_start, 0.0, (settle_periods + 1.0) * steps_per_period + 1e5)?;
    let n = spp * opts.periods;
    let mut ys = Vec::with_capacity(n);
    for k in 0..n {
        ys.push(y);
        let from = tau_start + k as f64 * dtau;
        let (y2, s, h2) = leg(y, from, from + dtau, h.min(dtau), 1e5)?;
        y = y2;
        steps += s;
        if h2 > 0.0 {
            h = h2;
        }
    }
    let t0 = tau_start / w_base;
    let times: Vec<f64> = (0..n).map(|k| t0 + k as f64 * dtau / w_base).collect();
    let current: Vec<f64> = ys.iter().map(|y| y[1] * i_scale).collect();

    let src = Rhs { poly, circuit, sources, i_scale, w_base };
    let mut p_src = 0.0;
    let mut p_diss = 0.0;
    for (k, &i) in current.iter().enumerate() {
        let tau = tau_start + k as f64 * dtau;
        p_src += src.emf(tau) * i;
        p_diss += circuit.total_resistance() * i * i;
    }
    p_src /= n as f64;
    p_diss /= n as f64;

    let mut buf: Vec<Complex64> = current.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let spectrum: Vec<Complex64> = (0..spp / 2)
        .map(|k| {
            let c = buf[k * opts.periods] / n as f64;
            if k == 0 {
                c
            } else {
                2.0 * c
            }
        })
        .collect();

    Ok(TransientResult {
        base_frequency: base,
        times,
        current,
        spectrum,
        source_power: p_src,
        dissipated_power: p_diss,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::dbm_to_watts;
    use crate::hb::{solve, Tone};
    use crate::junction::{fit_inductance_polynomial, JunctionModel};

    fn series(l: f64, c: f64, r: f64, l_j: f64) -> Netlist {
        Netlist::new(
            vec![
                Element::series_inductor(l),
                Element::series_capacitor(c),
                Element::series_resistor(r),
                Element::Junction { l_j },
            ],
            Topology::Reflection,
            50.0,
        )
        .unwrap()
    }

    #[test]
    fn linear_resonance_matches_lorentzian() {
        let (l, c, r, lj) = (8e-9, 0.5e-12, 5.0, 1e-9);
        let net = series(l, c, r, lj);
        let poly = InductancePolynomial::linear(lj, 1.0);
        let f0 = 1.0 / (2.0 * PI * ((l + lj) * c).sqrt());
        let p = dbm_to_watts(-100.0);
        let tones = ToneSet::new(vec![Tone::new(f0, p)]);
        let res = transient_oracle(&net, &poly, &tones, &TransientOptions::default()).unwrap();
        let v = emf_for_power(p, 50.0);
        let want = v / (r + 50.0);
        let got = res.phasor_at(f0).unwrap();
        assert!((got.norm() - want).abs() / want < 1e-3, "{} vs {want}", got.norm());
        assert!(got.arg().abs() < 1e-3);
    }

    #[test]
    fn agrees_with_harmonic_balance() {
        let (l, c, r, lj) = (2e-9, 1e-12, 2.0, 1e-9);
        let net = series(l, c, r, lj);
        let m = JunctionModel::sis(lj).unwrap();
        let poly = fit_inductance_polynomial(&m, 0.6 * m.critical_current(), 10).unwrap();
        let f0 = 1.0 / (2.0 * PI * ((l + lj) * c).sqrt());
        let tones = ToneSet::new(vec![Tone::new(0.97 * f0, dbm_to_watts(-100.0))]);
        let hb = solve(&net, &poly, &tones).unwrap();
        let tr = transient_oracle(&net, &poly, &tones, &TransientOptions::default()).unwrap();
        let fund = hb.harmonic(&[1]).unwrap();
        let t1 = tr.phasor_at(fund.frequency).unwrap();
        assert!((t1 - fund.current).norm() / fund.current.norm() < 1e-2);
        let third = hb.harmonic(&[3]).unwrap();
        let t3 = tr.phasor_at(third.frequency).unwrap();
        assert!((t3 - third.current).norm() / third.current.norm() < 1e-2);
    }

    #[test]
    fn power_balance() {
        let (l, c, r, lj) = (2e-9, 1e-12, 10.0, 1e-9);
        let net = series(l, c, r, lj);
        let m = JunctionModel::sis(lj).unwrap();
        let poly = fit_inductance_polynomial(&m, 0.6 * m.critical_current(), 10).unwrap();
        let f0 = 1.0 / (2.0 * PI * ((l + lj) * c).sqrt());
        let tones = ToneSet::new(vec![Tone::new(f0, dbm_to_watts(-95.0))]);
        let tr = transient_oracle(&net, &poly, &tones, &TransientOptions::default()).unwrap();
        assert!((tr.source_power - tr.dissipated_power).abs() / tr.source_power < 5e-3);
    }

    #[test]
    fn rejects_distributed_netlists() {
        let net = Netlist::new(
            vec![
                Element::shunt_capacitor(1e-12),
                Element::series_inductor(1e-9),
                Element::Junction { l_j: 1e-9 },
            ],
            Topology::Reflection,
            50.0,
        )
        .unwrap();
        let poly = InductancePolynomial::linear(1e-9, 1.0);
        let tones = ToneSet::new(vec![Tone::new(1e9, 1e-15)]);
        assert!(matches!(
            transient_oracle(&net, &poly, &tones, &TransientOptions::default()),
            Err(HbError::Unsupported(_))
        ));
    }

    #[test]
    fn base_frequency() {
        assert_eq!(common_base(&[3e9, 5e9]), Some(1e9));
        assert!((common_base(&[1e9, 1.5e9]).unwrap() - 0.5e9).abs() < 1.0);
    }
}
