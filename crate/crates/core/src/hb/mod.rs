//! Multi-tone harmonic balance for a linear network with one current-controlled
//! nonlinear inductor.
//!
//! Unknowns are the junction-current phasors I_k on the kept mixing products
//! (peak amplitudes, i(t) = Re Σ I_k e^{jω_k t}). The linear network enters
//! through its Thevenin view at the junction, so the residual in Norton form is
//!
//! F_k = I_k − Y_k·(V_th,k − jω_k·Φ_k(I)),
//!
//! where Φ(I) = ∫ L(I) dI is evaluated on an FFT grid spanning one axis per
//! tone. Newton steps use the exact spectral Jacobian built from the Fourier
//! coefficients of L(i(t)).

pub mod amplifier;
pub mod spectrum;
pub mod transient;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::junction::{InductancePolynomial, JunctionError};
use crate::netlist::{JunctionEmbedding, Netlist, NetlistError, Topology};
use spectrum::{FftGrid, HarmonicSet};

const J: Complex64 = Complex64::new(0.0, 1.0);

/// Residual level, relative to the largest phasor, below which a product is
/// treated as numerically zero.
const FLOOR: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HbError {
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Junction(#[from] JunctionError),
    #[error("invalid tone set: {0}")]
    InvalidTones(String),
    #[error("commensurate tones: {0}")]
    Commensurate(String),
    #[error("no convergence after {iterations} iterations (residual {residual:.3e} A)")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("junction current {peak:.4e} A exceeds the inductance fit domain {domain:.4e} A")]
    Overdrive { peak: f64, domain: f64 },
    #[error("singular Jacobian")]
    Singular,
    #[error("not found: {0}")]
    NotFound(String),
    #[error("small-signal gain {gain_db:.2} dB is below the 10 dB needed for a compression point")]
    InsufficientGain { gain_db: f64 },
    #[error("third-order products at {ratio:.2e} of the fundamental are below the numerical floor")]
    InsufficientDrive { ratio: f64 },
    #[error("unsupported circuit for this operation: {0}")]
    Unsupported(String),
    #[error("transient integration failed: step-size collapse ({0})")]
    StepCollapse(String),
}

pub type Result<T> = std::result::Result<T, HbError>;

fn default_port() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    /// Hz
    pub frequency: f64,
    /// Available power at the device port (W).
    pub power: f64,
    #[serde(default = "default_port")]
    pub port: usize,
}

impl Tone {
    pub fn new(frequency: f64, power: f64) -> Self {
        Self { frequency, power, port: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToneSet {
    pub tones: Vec<Tone>,
    pub truncation: usize,
}

pub const DEFAULT_TRUNCATION: usize = 7;

impl ToneSet {
    pub fn new(tones: Vec<Tone>) -> Self {
        Self { tones, truncation: DEFAULT_TRUNCATION }
    }

    pub fn with_truncation(mut self, truncation: usize) -> Self {
        self.truncation = truncation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.tones.is_empty() {
            return Err(HbError::InvalidTones("at least one tone is required".into()));
        }
        if self.truncation < 3 {
            return Err(HbError::InvalidTones(format!(
                "truncation {} must be >= 3",
                self.truncation
            )));
        }
        for t in &self.tones {
            if !(t.frequency.is_finite() && t.frequency > 0.0) {
                return Err(HbError::InvalidTones(format!("frequency {} must be > 0", t.frequency)));
            }
            if !(t.power.is_finite() && t.power >= 0.0) {
                return Err(HbError::InvalidTones(format!("power {} must be >= 0", t.power)));
            }
            if t.port != 1 {
                return Err(HbError::InvalidTones(format!(
                    "tones drive port 1 only, got port {}",
                    t.port
                )));
            }
        }
        for (a, ta) in self.tones.iter().enumerate() {
            for tb in &self.tones[a + 1..] {
                if ta.frequency == tb.frequency {
                    return Err(HbError::InvalidTones(format!(
                        "duplicate tone frequency {} Hz",
                        ta.frequency
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HbOptions {
    /// Absolute residual tolerance (A).
    pub tolerance: f64,
    /// Residual tolerance of each product relative to its own amplitude.
    pub relative_tolerance: f64,
    pub max_iterations: usize,
    /// Ramp the drive up from zero when Newton fails from the initial guess.
    pub continuation: bool,
}

impl Default for HbOptions {
    fn default() -> Self {
        Self { tolerance: 1e-12, relative_tolerance: 1e-10, max_iterations: 200, continuation: true }
    }
}

/// One mixing product of a solved steady state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub index: Vec<i32>,
    pub frequency: f64,
    /// Junction current phasor (A, peak).
    pub current: Complex64,
    /// Junction voltage phasor jωΦ (V, peak).
    pub voltage: Complex64,
    /// Generator EMF at this frequency (V, peak); zero off the tones.
    pub emf: Complex64,
    /// Incident wave (√W, peak; |a|²/2 is power).
    pub incident: Complex64,
    /// Outgoing wave at the measured port (√W, peak).
    pub outgoing: Complex64,
    /// Part of `outgoing` radiated by the junction current alone.
    pub emitted: Complex64,
}

impl Harmonic {
    /// Reflection or transmission coefficient; `None` off the drive tones.
    pub fn scattering(&self) -> Option<Complex64> {
        (self.incident.norm() > 0.0).then(|| self.outgoing / self.incident)
    }

    /// Power leaving the measured port at this frequency (W).
    pub fn output_power(&self) -> f64 {
        0.5 * self.outgoing.norm_sqr()
    }

    pub fn emitted_power(&self) -> f64 {
        0.5 * self.emitted.norm_sqr()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HbSolution {
    pub tone_freqs: Vec<f64>,
    pub topology: Topology,
    pub harmonics: Vec<Harmonic>,
    /// Max |F_k| at the returned point (A).
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Largest |i(t)| on the sampling grid (A).
    pub peak_current: f64,
}

impl HbSolution {
    pub fn harmonic(&self, index: &[i32]) -> Option<&Harmonic> {
        self.harmonics.iter().find(|h| h.index.as_slice() == index)
    }

    /// Full two-sided spectrum as (index, phasor/2) pairs, with the negative
    /// frequencies filled in as conjugates.
    pub fn two_sided_current(&self) -> Vec<(Vec<i32>, Complex64)> {
        let mut out = Vec::with_capacity(2 * self.harmonics.len());
        for h in &self.harmonics {
            out.push((h.index.clone(), 0.5 * h.current));
            out.push((h.index.iter().map(|k| -k).collect(), 0.5 * h.current.conj()));
        }
        out
    }

    fn current_near(&self, index: &[i32]) -> Option<Complex64> {
        // Accept guesses from solutions with fewer tones by zero-padding.
        self.harmonics
            .iter()
            .find(|h| {
                index.len() >= h.index.len()
                    && index[..h.index.len()] == h.index[..]
                    && index[h.index.len()..].iter().all(|&k| k == 0)
            })
            .map(|h| h.current)
    }
}

/// Source EMF amplitude delivering `power` into a matched port.
pub fn emf_for_power(power: f64, port_impedance: f64) -> f64 {
    (8.0 * port_impedance * power).sqrt()
}

struct Engine<'a> {
    set: HarmonicSet,
    grid: FftGrid,
    poly: &'a InductancePolynomial,
    emb: Vec<JunctionEmbedding>,
    y: Vec<Complex64>,
    jw: Vec<Complex64>,
    emf: Vec<Complex64>,
    topology: Topology,
}

struct Evaluation {
    f: Vec<Complex64>,
    norm: f64,
    peak: f64,
    g: Vec<Complex64>,
    phi: Vec<Complex64>,
}

impl<'a> Engine<'a> {
    fn new(net: &Netlist, poly: &'a InductancePolynomial, tones: &ToneSet) -> Result<Self> {
        tones.validate()?;
        net.validate()?;
        if poly.coefficients.is_empty() || !(poly.l0() > 0.0) {
            return Err(HbError::InvalidTones("inductance polynomial needs L0 > 0".into()));
        }
        let freqs: Vec<f64> = tones.tones.iter().map(|t| t.frequency).collect();
        let set = HarmonicSet::new(&freqs, tones.truncation, poly.is_even())?;
        let grid = FftGrid::new(freqs.len(), tones.truncation, poly.order());
        let mut emb = Vec::with_capacity(set.len());
        for &f in &set.freqs {
            emb.push(net.junction_embedding(f)?);
        }
        let y = emb.iter().map(|e| e.admittance()).collect();
        let jw = set.freqs.iter().map(|&f| J * 2.0 * std::f64::consts::PI * f).collect();
        let mut emf = vec![Complex64::new(0.0, 0.0); set.len()];
        for (t, tone) in tones.tones.iter().enumerate() {
            let mut m = vec![0; freqs.len()];
            m[t] = 1;
            let k = set.position(&m).ok_or_else(|| {
                HbError::InvalidTones("tone fundamental missing from harmonic set".into())
            })?;
            emf[k] = Complex64::new(emf_for_power(tone.power, net.port_impedance), 0.0);
        }
        Ok(Self { set, grid, poly, emb, y, jw, emf, topology: net.topology })
    }

    fn vth(&self, k: usize, scale: f64) -> Complex64 {
        self.emb[k].v_th_per_emf * self.emf[k] * scale
    }

    fn linear_guess(&self, scale: f64) -> Vec<Complex64> {
        let l0 = self.poly.l0();
        (0..self.set.len())
            .map(|k| self.vth(k, scale) / (self.emb[k].z_th + self.jw[k] * l0))
            .collect()
    }

    fn evaluate(&self, i: &[Complex64], scale: f64) -> Evaluation {
        let samples = self.grid.to_time(&self.set, i);
        let peak = samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let flux: Vec<f64> = samples.iter().map(|&x| self.poly.flux(x)).collect();
        let ind: Vec<f64> = samples.iter().map(|&x| self.poly.eval(x)).collect();
        let fc = self.grid.coefficients(&flux);
        let g = self.grid.coefficients(&ind);
        let phi: Vec<Complex64> =
            self.set.indices.iter().map(|m| 2.0 * fc[self.grid.flat(m)]).collect();
        let f: Vec<Complex64> = (0..self.set.len())
            .map(|k| i[k] - self.y[k] * (self.vth(k, scale) - self.jw[k] * phi[k]))
            .collect();
        let norm = f.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        Evaluation { f, norm, peak, g, phi }
    }

    fn jacobian(&self, g: &[Complex64]) -> DMatrix<f64> {
        let n = self.set.len();
        let mut jac = DMatrix::zeros(2 * n, 2 * n);
        let mut diff = vec![0i32; self.set.tone_freqs.len()];
        let mut sum = diff.clone();
        for k in 0..n {
            let yk = self.y[k] * self.jw[k];
            let mk = &self.set.indices[k];
            for l in 0..n {
                let ml = &self.set.indices[l];
                for a in 0..mk.len() {
                    diff[a] = mk[a] - ml[a];
                    sum[a] = mk[a] + ml[a];
                }
                let mut a = yk * g[self.grid.flat(&diff)];
                if k == l {
                    a += 1.0;
                }
                let b = yk * g[self.grid.flat(&sum)];
                let p = a + b;
                let q = a - b;
                jac[(k, l)] = p.re;
                jac[(n + k, l)] = p.im;
                jac[(k, n + l)] = -q.im;
                jac[(n + k, n + l)] = q.re;
            }
        }
        jac
    }

    /// Absolute tolerance on the largest residual, plus a per-product test so
    /// that weak tones (a small-signal probe next to a strong pump) are
    /// resolved to the same relative accuracy as the strong ones.
    fn converged(&self, ev: &Evaluation, i: &[Complex64], opts: &HbOptions) -> bool {
        let scale = i.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let floor = FLOOR * scale;
        ev.norm <= opts.tolerance
            && ev.f.iter().zip(i).all(|(f, x)| f.norm() <= opts.relative_tolerance * x.norm() + floor)
    }

    /// Damped Newton from `start` at drive `scale`; returns the solution, the
    /// final evaluation and the iteration count.
    fn newton(
        &self,
        start: Vec<Complex64>,
        scale: f64,
        opts: &HbOptions,
        max_iter: usize,
    ) -> std::result::Result<(Vec<Complex64>, Evaluation, usize), (Vec<Complex64>, f64, usize)> {
        let n = self.set.len();
        let mut i = start;
        let mut ev = self.evaluate(&i, scale);
        for iter in 0..max_iter {
            if self.converged(&ev, &i, opts) {
                // One extra step tightens small components relative to the
                // dominant tone.
                if let Some((i2, ev2)) = self.step(&i, &ev, scale) {
                    if ev2.norm <= ev.norm {
                        return Ok((i2, ev2, iter + 1));
                    }
                }
                return Ok((i, ev, iter));
            }
            match self.step(&i, &ev, scale) {
                Some((i2, ev2)) if ev2.norm < ev.norm => {
                    i = i2;
                    ev = ev2;
                }
                _ => return Err((i, ev.norm, iter)),
            }
            debug_assert_eq!(i.len(), n);
        }
        if self.converged(&ev, &i, opts) {
            return Ok((i, ev, max_iter));
        }
        Err((i, ev.norm, max_iter))
    }

    fn step(
        &self,
        i: &[Complex64],
        ev: &Evaluation,
        scale: f64,
    ) -> Option<(Vec<Complex64>, Evaluation)> {
        let n = self.set.len();
        let jac = self.jacobian(&ev.g);
        let mut rhs = DVector::zeros(2 * n);
        for k in 0..n {
            rhs[k] = -ev.f[k].re;
            rhs[n + k] = -ev.f[k].im;
        }
        let delta = jac.lu().solve(&rhs)?;
        let mut lambda = 1.0;
        let mut best: Option<(Vec<Complex64>, Evaluation)> = None;
        for _ in 0..30 {
            let trial: Vec<Complex64> = (0..n)
                .map(|k| i[k] + lambda * Complex64::new(delta[k], delta[n + k]))
                .collect();
            let e = self.evaluate(&trial, scale);
            if e.norm.is_finite() && e.norm < ev.norm {
                return Some((trial, e));
            }
            if best.as_ref().is_none_or(|b| e.norm < b.1.norm) && e.norm.is_finite() {
                best = Some((trial, e));
            }
            lambda *= 0.5;
        }
        best
    }

    fn solve(&self, guess: Option<&HbSolution>, opts: &HbOptions) -> Result<HbSolution> {
        let start = match guess {
            Some(g) => {
                let lin = self.linear_guess(1.0);
                self.set
                    .indices
                    .iter()
                    .zip(lin)
                    .map(|(m, l)| g.current_near(m).unwrap_or(l))
                    .collect()
            }
            None => self.linear_guess(1.0),
        };
        let result = match self.newton(start, 1.0, opts, opts.max_iterations) {
            Ok(r) => Ok(r),
            Err(_) if opts.continuation => self.continuation(opts),
            Err((_, residual, iterations)) => Err(HbError::NotConverged { iterations, residual }),
        };
        let (i, ev, iterations) = result?;
        if ev.peak > self.poly.fit_domain {
            return Err(HbError::Overdrive { peak: ev.peak, domain: self.poly.fit_domain });
        }
        Ok(self.package(i, ev, iterations))
    }

    /// Ramp the source amplitude from a small fraction up to full drive.
    fn continuation(&self, opts: &HbOptions) -> Result<(Vec<Complex64>, Evaluation, usize)> {
        let mut done: f64 = 0.0;
        let mut step = 0.1;
        let mut x = self.linear_guess(0.0);
        let mut total = 0;
        let mut last_norm = f64::INFINITY;
        while done < 1.0 {
            let target = (done + step).min(1.0);
            // Extrapolate linearly in drive for the first guess.
            let guess: Vec<Complex64> = if done > 0.0 {
                x.iter().map(|v| v * (target / done)).collect()
            } else {
                self.linear_guess(target)
            };
            match self.newton(guess, target, opts, 60) {
                Ok((sol, ev, it)) => {
                    total += it;
                    if target >= 1.0 {
                        return Ok((sol, ev, total));
                    }
                    x = sol;
                    done = target;
                    step *= 1.5;
                }
                Err((_, norm, it)) => {
                    total += it;
                    last_norm = norm;
                    step *= 0.5;
                    if step < 1e-4 || total > 20 * opts.max_iterations {
                        return Err(HbError::NotConverged { iterations: total, residual: last_norm });
                    }
                }
            }
        }
        Err(HbError::NotConverged { iterations: total, residual: last_norm })
    }

    fn package(&self, i: Vec<Complex64>, ev: Evaluation, iterations: usize) -> HbSolution {
        let harmonics = (0..self.set.len())
            .map(|k| {
                let e = &self.emb[k];
                let emf = self.emf[k];
                Harmonic {
                    index: self.set.indices[k].clone(),
                    frequency: self.set.freqs[k],
                    current: i[k],
                    voltage: self.jw[k] * ev.phi[k],
                    emf,
                    incident: e.incident_per_emf * emf,
                    outgoing: e.out_emf * emf + e.out_current * i[k],
                    emitted: e.out_current * i[k],
                }
            })
            .collect();
        HbSolution {
            tone_freqs: self.set.tone_freqs.clone(),
            topology: self.topology,
            harmonics,
            residual: ev.norm,
            iterations,
            converged: true,
            peak_current: ev.peak,
        }
    }
}

/// Steady state with default options and a linear initial guess.
pub fn solve(net: &Netlist, poly: &InductancePolynomial, tones: &ToneSet) -> Result<HbSolution> {
    solve_with(net, poly, tones, &HbOptions::default(), None)
}

/// Steady state with explicit options; `guess` seeds matching products (a
/// solution with fewer tones is zero-padded onto the new index space).
pub fn solve_with(
    net: &Netlist,
    poly: &InductancePolynomial,
    tones: &ToneSet,
    opts: &HbOptions,
    guess: Option<&HbSolution>,
) -> Result<HbSolution> {
    Engine::new(net, poly, tones)?.solve(guess, opts)
}
