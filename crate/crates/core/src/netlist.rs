//! Linear embedding circuits: transmission-line segments, lumped elements and a
//! single junction placeholder, evaluated in the frequency domain with ABCD
//! cascades.
//!
//! A netlist is an ordered chain. For [`Topology::Reflection`] the chain starts
//! at the port; for [`Topology::Hanger`] it starts at the tee on the through
//! line, which both ports see in parallel. The chain ends in a [`Termination`]
//! (ground by default). The junction is a series element of the chain, so the
//! impedance it sees is the sum of the impedances looking back toward the source
//! and forward toward the termination.

use std::f64::consts::PI;
use std::ops::Mul;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const J: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetlistError {
    #[error("invalid netlist: {0}")]
    Invalid(String),
    #[error("non-finite or non-positive frequency {0} Hz")]
    BadFrequency(f64),
    #[error("singular cascade at {frequency} Hz: {what}")]
    Singular { frequency: f64, what: &'static str },
    #[error("operation requires {expected:?} topology, netlist is {found:?}")]
    TopologyMismatch { expected: Topology, found: Topology },
    #[error("invalid frequency grid: {0}")]
    Grid(String),
}

pub type Result<T> = std::result::Result<T, NetlistError>;

/// Uniform TEM transmission-line segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlSegment {
    /// Characteristic impedance (Ω).
    pub z0: f64,
    /// Physical length (m).
    pub length: f64,
    /// Phase velocity (m/s).
    pub v_ph: f64,
    /// Attenuation constant (Np/m).
    #[serde(default)]
    pub loss: f64,
}

impl TlSegment {
    pub fn lossless(z0: f64, length: f64, v_ph: f64) -> Self {
        Self { z0, length, v_ph, loss: 0.0 }
    }

    /// Length of a quarter wavelength at `f` for the given phase velocity.
    pub fn quarter_wave_length(v_ph: f64, f: f64) -> f64 {
        v_ph / (4.0 * f)
    }

    /// Electrical angle 2πf·length/v_ph (rad).
    pub fn electrical_angle(&self, f: f64) -> f64 {
        2.0 * PI * f * self.length / self.v_ph
    }

    fn validate(&self) -> Result<()> {
        let ok = self.z0.is_finite()
            && self.z0 > 0.0
            && self.length.is_finite()
            && self.length >= 0.0
            && self.v_ph.is_finite()
            && self.v_ph > 0.0
            && self.loss.is_finite()
            && self.loss >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(NetlistError::Invalid(format!("bad line segment {self:?}")))
        }
    }
}

/// Thin-film kinetic inductance, modelled as one series lumped inductor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KineticInductor {
    /// Number of squares l/w.
    pub length_squares: f64,
    /// Sheet inductance (H per square).
    pub l_sq: f64,
}

impl KineticInductor {
    pub fn inductance(&self) -> f64 {
        self.length_squares * self.l_sq
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    Series,
    Shunt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LumpedKind {
    Inductor,
    Capacitor,
    Resistor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Element {
    Line(TlSegment),
    Kinetic(KineticInductor),
    Lumped {
        kind: LumpedKind,
        placement: Placement,
        /// H, F or Ω depending on `kind`.
        value: f64,
    },
    /// Reference plane of the junction. `l_j` is the linear inductance used
    /// when the junction is linearized (s-parameter evaluation).
    Junction { l_j: f64 },
}

impl Element {
    pub fn series_inductor(l: f64) -> Self {
        Element::Lumped { kind: LumpedKind::Inductor, placement: Placement::Series, value: l }
    }
    pub fn series_capacitor(c: f64) -> Self {
        Element::Lumped { kind: LumpedKind::Capacitor, placement: Placement::Series, value: c }
    }
    pub fn series_resistor(r: f64) -> Self {
        Element::Lumped { kind: LumpedKind::Resistor, placement: Placement::Series, value: r }
    }
    pub fn shunt_capacitor(c: f64) -> Self {
        Element::Lumped { kind: LumpedKind::Capacitor, placement: Placement::Shunt, value: c }
    }

    /// ABCD matrix at frequency `f` (> 0).
    pub fn abcd(&self, f: f64) -> Abcd {
        let w = 2.0 * PI * f;
        match *self {
            Element::Line(seg) => abcd_of_segment_unchecked(&seg, f),
            Element::Kinetic(k) => Abcd::series(J * w * k.inductance()),
            Element::Junction { l_j } => Abcd::series(J * w * l_j),
            Element::Lumped { kind, placement, value } => {
                let z = match kind {
                    LumpedKind::Inductor => J * w * value,
                    LumpedKind::Capacitor => 1.0 / (J * w * value),
                    LumpedKind::Resistor => Complex64::new(value, 0.0),
                };
                match placement {
                    Placement::Series => Abcd::series(z),
                    Placement::Shunt => Abcd::shunt(1.0 / z),
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Element::Line(seg) => seg.validate(),
            Element::Kinetic(k) => {
                if k.length_squares.is_finite()
                    && k.length_squares >= 0.0
                    && k.l_sq.is_finite()
                    && k.l_sq >= 0.0
                {
                    Ok(())
                } else {
                    Err(NetlistError::Invalid(format!("bad kinetic inductor {k:?}")))
                }
            }
            Element::Junction { l_j } => {
                if l_j.is_finite() && l_j > 0.0 {
                    Ok(())
                } else {
                    Err(NetlistError::Invalid(format!("junction inductance {l_j} must be > 0")))
                }
            }
            Element::Lumped { kind, placement, value } => {
                let ok = match kind {
                    // A zero-ohm resistor is a wire; zero L or C would be singular.
                    LumpedKind::Resistor => value.is_finite() && value >= 0.0,
                    _ => value.is_finite() && value > 0.0,
                };
                let shunt_short = placement == Placement::Shunt
                    && kind == LumpedKind::Resistor
                    && value == 0.0;
                if ok && !shunt_short {
                    Ok(())
                } else {
                    Err(NetlistError::Invalid(format!(
                        "bad {placement:?} {kind:?} value {value}"
                    )))
                }
            }
        }
    }
}

/// 2×2 complex chain (ABCD) matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Abcd {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl Abcd {
    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Self { a: one, b: zero, c: zero, d: one }
    }

    pub fn series(z: Complex64) -> Self {
        Self { b: z, ..Self::identity() }
    }

    pub fn shunt(y: Complex64) -> Self {
        Self { c: y, ..Self::identity() }
    }

    pub fn det(&self) -> Complex64 {
        self.a * self.d - self.b * self.c
    }

    /// Impedance seen at the input when the output is loaded by `load`.
    fn load(&self, load: Projective) -> Projective {
        Projective {
            num: self.a * load.num + self.b * load.den,
            den: self.c * load.num + self.d * load.den,
        }
    }

    /// Impedance seen at the output when the input is loaded by `source`.
    fn load_reversed(&self, source: Projective) -> Projective {
        Projective {
            num: self.d * source.num + self.b * source.den,
            den: self.c * source.num + self.a * source.den,
        }
    }

    pub fn max_abs_diff(&self, other: &Abcd) -> f64 {
        [self.a - other.a, self.b - other.b, self.c - other.c, self.d - other.d]
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

impl Mul for Abcd {
    type Output = Abcd;
    fn mul(self, r: Abcd) -> Abcd {
        Abcd {
            a: self.a * r.a + self.b * r.c,
            b: self.a * r.b + self.b * r.d,
            c: self.c * r.a + self.d * r.c,
            d: self.c * r.b + self.d * r.d,
        }
    }
}

/// Impedance as a ratio num/den, so opens (den = 0) propagate exactly.
#[derive(Debug, Clone, Copy)]
struct Projective {
    num: Complex64,
    den: Complex64,
}

impl Projective {
    fn finite(z: Complex64) -> Self {
        Self { num: z, den: Complex64::new(1.0, 0.0) }
    }
    fn open() -> Self {
        Self { num: Complex64::new(1.0, 0.0), den: Complex64::new(0.0, 0.0) }
    }
    fn short() -> Self {
        Self::finite(Complex64::new(0.0, 0.0))
    }
    fn add(self, o: Projective) -> Projective {
        Projective { num: self.num * o.den + o.num * self.den, den: self.den * o.den }
    }
}

fn check_frequency(f: f64) -> Result<()> {
    if f.is_finite() && f > 0.0 {
        Ok(())
    } else {
        Err(NetlistError::BadFrequency(f))
    }
}

/// ABCD matrix of a (possibly lossy) line segment at frequency `f`.
pub fn abcd_of_segment(seg: &TlSegment, f: f64) -> Result<Abcd> {
    check_frequency(f)?;
    seg.validate()?;
    Ok(abcd_of_segment_unchecked(seg, f))
}

fn abcd_of_segment_unchecked(seg: &TlSegment, f: f64) -> Abcd {
    let gl = Complex64::new(seg.loss * seg.length, seg.electrical_angle(f));
    let (ch, sh) = (gl.cosh(), gl.sinh());
    Abcd { a: ch, b: sh * seg.z0, c: sh / seg.z0, d: ch }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// Single-port device measured in reflection.
    Reflection,
    /// Side-coupled resonator on a two-port through line.
    Hanger,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    #[default]
    Short,
    Open,
}

impl Termination {
    fn projective(self) -> Projective {
        match self {
            Termination::Short => Projective::short(),
            Termination::Open => Projective::open(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Netlist {
    pub elements: Vec<Element>,
    pub topology: Topology,
    pub port_impedance: f64,
    #[serde(default)]
    pub termination: Termination,
}

/// Linear relations at the junction plane for one frequency, per unit generator
/// EMF. Everything the harmonic-balance engine needs from the embedding.
#[derive(Debug, Clone, Copy)]
pub struct JunctionEmbedding {
    pub frequency: f64,
    /// Impedance seen by the junction (Ω).
    pub z_th: Complex64,
    /// Open-circuit junction voltage per volt of generator EMF.
    pub v_th_per_emf: Complex64,
    /// Output wave = `out_emf`·EMF + `out_current`·I_junction (√W units).
    pub out_emf: Complex64,
    pub out_current: Complex64,
    /// Incident wave per volt of EMF.
    pub incident_per_emf: f64,
}

impl JunctionEmbedding {
    pub fn admittance(&self) -> Complex64 {
        1.0 / self.z_th
    }

    /// Scattering parameter (reflection or transmission) for given EMF and
    /// junction current at this frequency.
    pub fn scattering(&self, emf: Complex64, current: Complex64) -> Complex64 {
        (self.out_emf * emf + self.out_current * current) / (self.incident_per_emf * emf)
    }
}

impl Netlist {
    pub fn new(elements: Vec<Element>, topology: Topology, port_impedance: f64) -> Result<Self> {
        let net = Self { elements, topology, port_impedance, termination: Termination::Short };
        net.validate()?;
        Ok(net)
    }

    pub fn with_termination(mut self, termination: Termination) -> Self {
        self.termination = termination;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.port_impedance.is_finite() && self.port_impedance > 0.0) {
            return Err(NetlistError::Invalid(format!(
                "port impedance {} must be > 0",
                self.port_impedance
            )));
        }
        for e in &self.elements {
            e.validate()?;
        }
        let junctions = self
            .elements
            .iter()
            .filter(|e| matches!(e, Element::Junction { .. }))
            .count();
        if junctions != 1 {
            return Err(NetlistError::Invalid(format!(
                "expected exactly one junction placeholder, found {junctions}"
            )));
        }
        if self.topology == Topology::Hanger {
            let coupled = self.elements[..self.junction_index()].iter().any(|e| {
                matches!(
                    e,
                    Element::Lumped { kind: LumpedKind::Capacitor, placement: Placement::Series, .. }
                )
            });
            if !coupled {
                return Err(NetlistError::Invalid(
                    "hanger netlist needs a series coupling capacitor between tee and junction".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn junction_index(&self) -> usize {
        self.elements
            .iter()
            .position(|e| matches!(e, Element::Junction { .. }))
            .expect("validated netlist has a junction")
    }

    pub fn junction_inductance(&self) -> f64 {
        match self.elements[self.junction_index()] {
            Element::Junction { l_j } => l_j,
            _ => unreachable!(),
        }
    }

    /// Copy of the netlist with the linear junction inductance replaced.
    pub fn with_junction_inductance(&self, l_j: f64) -> Self {
        let mut net = self.clone();
        let idx = net.junction_index();
        net.elements[idx] = Element::Junction { l_j };
        net
    }

    /// Source impedance and EMF scale seen at the head of the chain.
    fn source(&self) -> (Complex64, f64) {
        match self.topology {
            Topology::Reflection => (Complex64::new(self.port_impedance, 0.0), 1.0),
            Topology::Hanger => (Complex64::new(self.port_impedance / 2.0, 0.0), 0.5),
        }
    }

    fn chain(elements: &[Element], f: f64) -> Abcd {
        elements.iter().fold(Abcd::identity(), |acc, e| acc * e.abcd(f))
    }

    fn left_right(&self, f: f64) -> (Abcd, Abcd) {
        let idx = self.junction_index();
        (Self::chain(&self.elements[..idx], f), Self::chain(&self.elements[idx + 1..], f))
    }

    /// Impedance seen by the junction looking into the rest of the circuit,
    /// with the junction itself removed (open at its reference plane).
    pub fn impedance_at_junction_plane(&self, f: f64) -> Result<Complex64> {
        check_frequency(f)?;
        let (left, right) = self.left_right(f);
        let (zs, _) = self.source();
        let zl = left.load_reversed(Projective::finite(zs));
        let zr = right.load(self.termination.projective());
        let z = zl.add(zr);
        let val = z.num / z.den;
        if z.den.norm() == 0.0 || !val.re.is_finite() || !val.im.is_finite() {
            return Err(NetlistError::Singular { frequency: f, what: "junction-plane impedance" });
        }
        Ok(val)
    }

    /// Input impedance of the whole chain (junction linearized), seen from the
    /// port (reflection) or from the tee into the branch (hanger).
    fn chain_input(&self, f: f64) -> Projective {
        Self::chain(&self.elements, f).load(self.termination.projective())
    }

    /// Linear reflection coefficient at the port.
    pub fn s11(&self, f: f64) -> Result<Complex64> {
        check_frequency(f)?;
        if self.topology != Topology::Reflection {
            return Err(NetlistError::TopologyMismatch {
                expected: Topology::Reflection,
                found: self.topology,
            });
        }
        let z = self.chain_input(f);
        let zp = self.port_impedance;
        let g = (z.num - z.den * zp) / (z.num + z.den * zp);
        if !g.re.is_finite() || !g.im.is_finite() {
            return Err(NetlistError::Singular { frequency: f, what: "reflection coefficient" });
        }
        Ok(g)
    }

    /// Linear transmission past a hanger branch.
    pub fn s21_hanger(&self, f: f64) -> Result<Complex64> {
        check_frequency(f)?;
        if self.topology != Topology::Hanger {
            return Err(NetlistError::TopologyMismatch {
                expected: Topology::Hanger,
                found: self.topology,
            });
        }
        let z = self.chain_input(f);
        let zp = self.port_impedance;
        let s = 2.0 * z.num / (2.0 * z.num + zp * z.den);
        if !s.re.is_finite() || !s.im.is_finite() {
            return Err(NetlistError::Singular { frequency: f, what: "transmission coefficient" });
        }
        Ok(s)
    }

    /// The measured scattering parameter for this topology (s11 or s21).
    pub fn response(&self, f: f64) -> Result<Complex64> {
        match self.topology {
            Topology::Reflection => self.s11(f),
            Topology::Hanger => self.s21_hanger(f),
        }
    }

    /// Thevenin view of the linear network from the junction plus the output
    /// wave relations used to form scattering parameters under drive.
    pub fn junction_embedding(&self, f: f64) -> Result<JunctionEmbedding> {
        check_frequency(f)?;
        let z_th = self.impedance_at_junction_plane(f)?;
        let (left, _) = self.left_right(f);
        let (zs, k) = self.source();
        let denom = left.a + zs * left.c;
        if denom.norm() == 0.0 {
            return Err(NetlistError::Singular { frequency: f, what: "Thevenin source" });
        }
        let zp = self.port_impedance;
        let sqrt_zp = zp.sqrt();
        // Head-of-chain voltage/current as linear functions of (EMF, I_junction).
        let head = |emf: Complex64, i: Complex64| {
            let va = (emf * k - (left.b + zs * left.d) * i) / denom;
            (left.a * va + left.b * i, left.c * va + left.d * i)
        };
        let wave = |emf: Complex64, i: Complex64| {
            let (v, cur) = head(emf, i);
            match self.topology {
                Topology::Reflection => (v - cur * zp) / (2.0 * sqrt_zp),
                // Transmitted wave into the matched port 2.
                Topology::Hanger => v / sqrt_zp,
            }
        };
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Ok(JunctionEmbedding {
            frequency: f,
            z_th,
            v_th_per_emf: k / denom,
            out_emf: wave(one, zero),
            out_current: wave(zero, one),
            incident_per_emf: 1.0 / (2.0 * sqrt_zp),
        })
    }
}

/// Linearly spaced frequency grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl FrequencyGrid {
    pub fn new(start: f64, stop: f64, count: usize) -> Result<Self> {
        let g = Self { start, stop, count };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite()) || self.start >= self.stop {
            return Err(NetlistError::Grid(format!(
                "need start < stop, got {} .. {}",
                self.start, self.stop
            )));
        }
        if self.count < 2 {
            return Err(NetlistError::Grid(format!("need at least 2 points, got {}", self.count)));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| if i + 1 == self.count { self.stop } else { self.start + step * i as f64 })
            .collect()
    }
}

/// Upward (negative → positive) zero crossings of `g` on the grid, each refined
/// by bisection to `tol_hz`. Downward jumps (poles of a reactance) are ignored.
pub fn upward_zero_crossings<E>(
    grid: &FrequencyGrid,
    tol_hz: f64,
    mut g: impl FnMut(f64) -> std::result::Result<f64, E>,
) -> std::result::Result<Vec<f64>, E> {
    let pts = grid.points();
    let mut vals = Vec::with_capacity(pts.len());
    for &f in &pts {
        vals.push(g(f)?);
    }
    let mut roots = Vec::new();
    for i in 0..pts.len() - 1 {
        let (mut lo, mut hi) = (pts[i], pts[i + 1]);
        if vals[i] == 0.0 && (i == 0 || vals[i - 1] < 0.0) && vals[i + 1] > 0.0 {
            roots.push(lo);
            continue;
        }
        if !(vals[i] < 0.0 && vals[i + 1] > 0.0) {
            continue;
        }
        while hi - lo > tol_hz {
            let mid = 0.5 * (lo + hi);
            let v = g(mid)?;
            if v < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    Ok(roots)
}
