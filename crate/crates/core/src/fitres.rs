//! Single-resonance fits of complex reflection and hanger transmission traces.
//!
//! Both line shapes share one form,
//! `S(f) = a·e^{−iωτ}·[1 − g·κ_ext·e^{iθ}/(κ/2 + iΔ)]`, with Δ = 2π(f − f_r),
//! g = 1 in reflection and g = 1/2 for a hanger. In reflection θ is fixed at 0
//! and the bracket equals (Δ + i(κ_ext − κ/2))/(Δ − iκ/2).

use std::f64::consts::PI;

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::{DMatrix, DVector, Dyn, Matrix3, Owned};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::Topology;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least 20 points, got {0}")]
    TooFewPoints(usize),
    #[error("trace frequencies must be finite and strictly increasing")]
    BadTrace,
    #[error("no resonance above the noise floor")]
    NoResonance,
    #[error("{0} separate dips found; window must contain a single resonance")]
    MultiDip(usize),
    #[error("window spans {span_over_kappa:.2} linewidths; need at least 3")]
    NarrowWindow { span_over_kappa: f64 },
    #[error("least-squares fit did not converge: {0}")]
    NotConverged(String),
}

pub type Result<T> = std::result::Result<T, FitError>;

/// Forward model of a single resonance with background.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceModel {
    pub topology: Topology,
    pub f_r: f64,
    /// rad/s
    pub kappa_ext: f64,
    /// rad/s
    pub kappa_int: f64,
    /// Complex background amplitude.
    pub scale: Complex64,
    /// Cable delay (s).
    pub delay: f64,
    /// Hanger asymmetry angle (rad); ignored in reflection.
    pub theta: f64,
}

impl ResonanceModel {
    pub fn ideal(topology: Topology, f_r: f64, kappa_ext: f64, kappa_int: f64) -> Self {
        Self {
            topology,
            f_r,
            kappa_ext,
            kappa_int,
            scale: Complex64::new(1.0, 0.0),
            delay: 0.0,
            theta: 0.0,
        }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa_ext + self.kappa_int
    }

    fn coupling_weight(topology: Topology) -> f64 {
        match topology {
            Topology::Reflection => 1.0,
            Topology::Hanger => 0.5,
        }
    }

    pub fn eval(&self, f: f64) -> Complex64 {
        let delta = 2.0 * PI * (f - self.f_r);
        let theta = if self.topology == Topology::Hanger { self.theta } else { 0.0 };
        let c = Self::coupling_weight(self.topology) * self.kappa_ext;
        let d = Complex64::new(0.5 * self.kappa(), delta);
        let bracket = 1.0 - Complex64::from_polar(c, theta) / d;
        self.scale * Complex64::from_polar(1.0, -2.0 * PI * f * self.delay) * bracket
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceFit {
    pub f_r: f64,
    pub kappa: f64,
    pub kappa_ext: f64,
    pub kappa_int: f64,
    pub residual_rms: f64,
    /// Covariance of (f_r [Hz], κ [rad/s], κ_ext [rad/s]), row-major.
    pub covariance: [[f64; 3]; 3],
    pub kappa_int_std: f64,
    pub scale: Complex64,
    pub delay: f64,
    pub theta: f64,
    pub topology: Topology,
    pub iterations: usize,
}

impl ResonanceFit {
    pub fn f_r_std(&self) -> f64 {
        self.covariance[0][0].sqrt()
    }
    pub fn kappa_std(&self) -> f64 {
        self.covariance[1][1].sqrt()
    }
    pub fn kappa_ext_std(&self) -> f64 {
        self.covariance[2][2].sqrt()
    }
    pub fn model(&self) -> ResonanceModel {
        ResonanceModel {
            topology: self.topology,
            f_r: self.f_r,
            kappa_ext: self.kappa_ext,
            kappa_int: self.kappa_int,
            scale: self.scale,
            delay: self.delay,
            theta: self.theta,
        }
    }
}

/// Fit a reflection coefficient trace.
pub fn fit_reflection(trace: &[(f64, Complex64)]) -> Result<ResonanceFit> {
    fit(trace, Topology::Reflection)
}

/// Fit a hanger transmission trace.
pub fn fit_hanger(trace: &[(f64, Complex64)]) -> Result<ResonanceFit> {
    fit(trace, Topology::Hanger)
}

pub fn fit(trace: &[(f64, Complex64)], topology: Topology) -> Result<ResonanceFit> {
    if trace.len() < 20 {
        return Err(FitError::TooFewPoints(trace.len()));
    }
    if trace.iter().any(|(f, s)| !f.is_finite() || !s.re.is_finite() || !s.im.is_finite())
        || trace.windows(2).any(|w| !(w[1].0 > w[0].0))
    {
        return Err(FitError::BadTrace);
    }
    let init = initial_guess(trace, topology)?;
    let problem = Problem::new(trace, topology, &init);
    let (problem, report) = LevenbergMarquardt::new()
        .with_patience(400)
        .minimize(problem);
    if !report.termination.was_successful() {
        return Err(FitError::NotConverged(format!("{:?}", report.termination)));
    }
    problem.finish(report.number_of_evaluations)
}

struct Initial {
    f_r: f64,
    kappa: f64,
    kappa_ext: f64,
    scale: Complex64,
    delay: f64,
    theta: f64,
}

fn unwrap_phases(values: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut offset = 0.0;
    let mut prev = values[0].arg();
    out.push(prev);
    for v in &values[1..] {
        let a = v.arg();
        let jump = a - prev;
        if jump > PI {
            offset -= 2.0 * PI;
        } else if jump < -PI {
            offset += 2.0 * PI;
        }
        out.push(a + offset);
        prev = a;
    }
    out
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn initial_guess(trace: &[(f64, Complex64)], topology: Topology) -> Result<Initial> {
    let n = trace.len();
    let freqs: Vec<f64> = trace.iter().map(|p| p.0).collect();
    let vals: Vec<Complex64> = trace.iter().map(|p| p.1).collect();

    // Cable delay from the phase slope of each wing, averaged.
    let wing = (n / 10).max(3);
    let phase = unwrap_phases(&vals);
    let omega: Vec<f64> = freqs.iter().map(|f| 2.0 * PI * f).collect();
    let lo = slope(&omega[..wing], &phase[..wing]);
    let hi = slope(&omega[n - wing..], &phase[n - wing..]);
    let delay = -0.5 * (lo + hi);
    let corrected: Vec<Complex64> = vals
        .iter()
        .zip(&omega)
        .map(|(v, w)| v * Complex64::from_polar(1.0, w * delay))
        .collect();

    // Off-resonant point: the end points sit on either side of the circle.
    let scale = 0.5 * (corrected[0] + corrected[n - 1]);
    if scale.norm() == 0.0 {
        return Err(FitError::NoResonance);
    }
    let dist: Vec<f64> = corrected.iter().map(|v| (v - scale).norm()).collect();
    let (imax, &dmax) = dist
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();

    let noise = (corrected.windows(2).map(|w| (w[1] - w[0]).norm_sqr()).sum::<f64>()
        / (2.0 * (n - 1) as f64))
        .sqrt();
    if dmax <= 5.0 * noise + 1e-9 * scale.norm() {
        return Err(FitError::NoResonance);
    }

    // Half-power points of the Lorentzian distance d².
    let half = dmax / 2f64.sqrt();
    let crossing = |range: &mut dyn Iterator<Item = usize>| {
        let mut last = imax;
        for i in range {
            if dist[i] < half {
                let (a, b) = (dist[i], dist[last]);
                let t = (half - a) / (b - a);
                return Some(freqs[i] + t * (freqs[last] - freqs[i]));
            }
            last = i;
        }
        None
    };
    let span = 2.0 * PI * (freqs[n - 1] - freqs[0]);
    let (Some(f_lo), Some(f_hi)) = (crossing(&mut (0..imax).rev()), crossing(&mut (imax + 1..n)))
    else {
        return Err(FitError::NarrowWindow { span_over_kappa: 1.0 });
    };
    let kappa = (2.0 * PI * (f_hi - f_lo)).max(2.0 * PI * (freqs[1] - freqs[0]));
    if span < 3.0 * kappa {
        return Err(FitError::NarrowWindow { span_over_kappa: span / kappa });
    }

    let mut regions = 0;
    let mut inside = false;
    for &d in &dist {
        if d > 0.5 * dmax && !inside {
            regions += 1;
        }
        inside = d > 0.5 * dmax;
    }
    if regions > 1 {
        return Err(FitError::MultiDip(regions));
    }

    let c = dmax * kappa / (2.0 * scale.norm());
    let kappa_ext = (c / ResonanceModel::coupling_weight(topology)).min(0.99 * kappa);
    let theta = match topology {
        Topology::Reflection => 0.0,
        Topology::Hanger => (1.0 - corrected[imax] / scale).arg(),
    };
    Ok(Initial { f_r: freqs[imax], kappa, kappa_ext, scale, delay, theta })
}

/// Normalized parameters: u0 shifts f_r in units of κ₀/2π; u1, u2 are κ_ext and
/// κ_int in units of κ₀; u3 + i·u4 is the background in units of |a₀|; u5 moves
/// the delay by one radian across the span; u6 is θ (hanger only).
struct Problem {
    freqs: Vec<f64>,
    data: Vec<Complex64>,
    topology: Topology,
    f0: f64,
    kappa0: f64,
    scale0: f64,
    delay0: f64,
    delay_unit: f64,
    omega_c: f64,
    u: DVector<f64>,
}

struct Pieces {
    e: Complex64,
    d: Complex64,
    rot: Complex64,
    bracket: Complex64,
    s: Complex64,
}

impl Problem {
    fn new(trace: &[(f64, Complex64)], topology: Topology, init: &Initial) -> Self {
        let freqs: Vec<f64> = trace.iter().map(|p| p.0).collect();
        let data = trace.iter().map(|p| p.1).collect();
        let span = freqs[freqs.len() - 1] - freqs[0];
        let omega_c = PI * (freqs[0] + freqs[freqs.len() - 1]);
        let scale0 = init.scale.norm();
        // Reference the background phase to the window centre.
        let s_centred = init.scale * Complex64::from_polar(1.0, -omega_c * init.delay) / scale0;
        let np = if topology == Topology::Hanger { 7 } else { 6 };
        let mut u = DVector::zeros(np);
        u[1] = init.kappa_ext / init.kappa;
        u[2] = ((init.kappa - init.kappa_ext) / init.kappa).max(0.02);
        u[3] = s_centred.re;
        u[4] = s_centred.im;
        if np == 7 {
            u[6] = init.theta;
        }
        Self {
            freqs,
            data,
            topology,
            f0: init.f_r,
            kappa0: init.kappa,
            scale0,
            delay0: init.delay,
            delay_unit: 1.0 / (2.0 * PI * span),
            omega_c,
            u,
        }
    }

    fn f_r(&self) -> f64 {
        self.f0 + self.u[0] * self.kappa0 / (2.0 * PI)
    }
    fn delay(&self) -> f64 {
        self.delay0 + self.u[5] * self.delay_unit
    }
    fn theta(&self) -> f64 {
        if self.topology == Topology::Hanger {
            self.u[6]
        } else {
            0.0
        }
    }
    fn weight(&self) -> f64 {
        ResonanceModel::coupling_weight(self.topology)
    }

    fn pieces(&self, f: f64) -> Pieces {
        let kappa = self.kappa0 * (self.u[1] + self.u[2]);
        let c = self.weight() * self.kappa0 * self.u[1];
        let delta = 2.0 * PI * (f - self.f_r());
        let d = Complex64::new(0.5 * kappa, delta);
        let rot = Complex64::from_polar(1.0, self.theta());
        let bracket = 1.0 - c * rot / d;
        let e = Complex64::from_polar(1.0, -(2.0 * PI * f - self.omega_c) * self.delay());
        let s = self.scale0 * Complex64::new(self.u[3], self.u[4]);
        Pieces { e, d, rot, bracket, s }
    }

    fn jacobian_rows(&self, f: f64) -> Vec<Complex64> {
        let p = self.pieces(f);
        let k0 = self.kappa0;
        let c = self.weight() * k0 * self.u[1];
        let se = p.s * p.e;
        let dbd = c * p.rot / (p.d * p.d);
        let mut row = vec![
            // ∂D/∂u0 = −iκ₀
            se * dbd * Complex64::new(0.0, -k0),
            se * (-(self.weight() * k0) * p.rot / p.d + dbd * (0.5 * k0)),
            se * dbd * (0.5 * k0),
            self.scale0 * p.e * p.bracket,
            Complex64::new(0.0, self.scale0) * p.e * p.bracket,
            se * p.bracket * Complex64::new(0.0, -(2.0 * PI * f - self.omega_c) * self.delay_unit),
        ];
        if self.topology == Topology::Hanger {
            row.push(se * (Complex64::new(0.0, -1.0) * c * p.rot / p.d));
        }
        row
    }

    fn model(&self, f: f64) -> Complex64 {
        let p = self.pieces(f);
        p.s * p.e * p.bracket
    }

    fn jacobian_matrix(&self) -> DMatrix<f64> {
        let n = self.freqs.len();
        let np = self.u.len();
        let mut jac = DMatrix::zeros(2 * n, np);
        for (k, &f) in self.freqs.iter().enumerate() {
            for (j, v) in self.jacobian_rows(f).into_iter().enumerate() {
                jac[(k, j)] = v.re;
                jac[(n + k, j)] = v.im;
            }
        }
        jac
    }

    fn finish(&self, iterations: usize) -> Result<ResonanceFit> {
        let n = self.freqs.len();
        let np = self.u.len();
        let rss: f64 = self
            .freqs
            .iter()
            .zip(&self.data)
            .map(|(&f, d)| (self.model(f) - d).norm_sqr())
            .sum();
        let jac = self.jacobian_matrix();
        let jtj = jac.transpose() * &jac;
        let cov_u = jtj
            .clone()
            .try_inverse()
            .ok_or_else(|| FitError::NotConverged("singular normal matrix".into()))?;
        let sigma2 = rss / (2 * n - np) as f64;
        let cov_u = cov_u * sigma2;

        // (f_r, κ, κ_ext, κ_int) as linear maps of (u0, u1, u2).
        let k0 = self.kappa0;
        let t = nalgebra::Matrix4x3::new(
            k0 / (2.0 * PI), 0.0, 0.0,
            0.0, k0, k0,
            0.0, k0, 0.0,
            0.0, 0.0, k0,
        );
        let sub = cov_u.fixed_view::<3, 3>(0, 0).into_owned();
        let full = t * sub * t.transpose();
        let cov3: Matrix3<f64> = full.fixed_view::<3, 3>(0, 0).into_owned();
        let mut covariance = [[0.0; 3]; 3];
        for (r, row) in covariance.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = cov3[(r, c)];
            }
        }

        let kappa_ext = k0 * self.u[1];
        let kappa_int = k0 * self.u[2];
        if !(kappa_ext.is_finite() && kappa_int.is_finite()) || kappa_ext <= 0.0 {
            return Err(FitError::NotConverged(format!(
                "unphysical rates kappa_ext={kappa_ext}, kappa_int={kappa_int}"
            )));
        }
        let s_centred = self.scale0 * Complex64::new(self.u[3], self.u[4]);
        let delay = self.delay();
        Ok(ResonanceFit {
            f_r: self.f_r(),
            kappa: kappa_ext + kappa_int,
            kappa_ext,
            kappa_int,
            residual_rms: (rss / n as f64).sqrt(),
            covariance,
            kappa_int_std: full[(3, 3)].sqrt(),
            scale: s_centred * Complex64::from_polar(1.0, self.omega_c * delay),
            delay,
            theta: self.theta(),
            topology: self.topology,
            iterations,
        })
    }
}

impl LeastSquaresProblem<f64, Dyn, Dyn> for Problem {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, x: &DVector<f64>) {
        self.u.copy_from(x);
    }

    fn params(&self) -> DVector<f64> {
        self.u.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let n = self.freqs.len();
        let mut r = DVector::zeros(2 * n);
        for (k, (&f, d)) in self.freqs.iter().zip(&self.data).enumerate() {
            let v = self.model(f) - d;
            r[k] = v.re;
            r[n + k] = v.im;
        }
        r.iter().all(|x| x.is_finite()).then_some(r)
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        let j = self.jacobian_matrix();
        j.iter().all(|x| x.is_finite()).then_some(j)
    }
}

/// Evaluate a model on a uniform grid.
pub fn synthesize(model: &ResonanceModel, start: f64, stop: f64, count: usize) -> Vec<(f64, Complex64)> {
    (0..count)
        .map(|i| {
            let f = start + (stop - start) * i as f64 / (count - 1) as f64;
            (f, model.eval(f))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use levenberg_marquardt::differentiate_numerically;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::Normal;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn window(m: &ResonanceModel, half_widths: f64) -> (f64, f64) {
        let w = half_widths * m.kappa() / (2.0 * PI);
        (m.f_r - w, m.f_r + w)
    }

    fn add_noise(trace: &mut [(f64, Complex64)], amp: f64, rng: &mut ChaCha8Rng) {
        let n = Normal::new(0.0, amp / 2f64.sqrt()).unwrap();
        for p in trace.iter_mut() {
            p.1 += Complex64::new(rng.sample(n), rng.sample(n));
        }
    }

    #[test]
    fn reflection_bracket_matches_textbook_form() {
        let m = ResonanceModel::ideal(Topology::Reflection, 7.52e9, 2.0 * PI * 30e6, 2.0 * PI * 11e6);
        for f in [7.4e9, 7.52e9, 7.55e9] {
            let d = 2.0 * PI * (f - m.f_r);
            let want = Complex64::new(d, m.kappa_ext - m.kappa() / 2.0)
                / Complex64::new(d, -m.kappa() / 2.0);
            assert!((m.eval(f) - want).norm() < 1e-12);
        }
        let crit = ResonanceModel::ideal(Topology::Reflection, 7.52e9, 1e8, 1e8);
        assert!(crit.eval(7.52e9).norm() < 1e-15);
    }

    #[test]
    fn analytic_jacobian_matches_numeric() {
        let mut m = ResonanceModel::ideal(Topology::Hanger, 6.63e9, 2.0 * PI * 20e6, 2.0 * PI * 12e6);
        m.theta = 0.3;
        m.delay = 2e-9;
        m.scale = Complex64::new(0.7, 0.2);
        let (a, b) = window(&m, 6.0);
        let trace = synthesize(&m, a, b, 101);
        let init = initial_guess(&trace, Topology::Hanger).unwrap();
        let mut p = Problem::new(&trace, Topology::Hanger, &init);
        p.u[0] = 0.05;
        let analytic = p.jacobian().unwrap();
        let numeric = differentiate_numerically(&mut p).unwrap();
        let scale = analytic.abs().max();
        assert!((analytic - numeric).abs().max() < 1e-5 * scale);
    }

    #[test]
    fn overcoupled_reflection_noiseless() {
        let k = 2.0 * PI * 41.3e6;
        let mut m = ResonanceModel::ideal(Topology::Reflection, 7.52e9, 0.9 * k, 0.1 * k);
        m.delay = 5e-9;
        m.scale = Complex64::from_polar(0.3, 1.0);
        let (a, b) = window(&m, 8.0);
        let fit = fit_reflection(&synthesize(&m, a, b, 401)).unwrap();
        assert!(rel(fit.f_r, m.f_r) < 1e-9);
        assert!(rel(fit.kappa, k) < 1e-3);
        assert!(rel(fit.kappa_ext, 0.9 * k) < 1e-3);
        assert_eq!(fit.kappa, fit.kappa_ext + fit.kappa_int);
    }

    #[test]
    fn symmetric_hanger_device_b() {
        let k = 2.0 * PI * 32.3e6;
        let m = ResonanceModel::ideal(Topology::Hanger, 6.63e9, 0.6 * k, 0.4 * k);
        let (a, b) = window(&m, 8.0);
        let fit = fit_hanger(&synthesize(&m, a, b, 401)).unwrap();
        assert!(rel(fit.kappa, k) < 1e-2);
        assert!(rel(fit.kappa_ext, 0.6 * k) < 1e-2);
        assert!(rel(fit.f_r, m.f_r) < 1e-6);
    }

    #[test]
    fn asymmetric_hanger_round_trip() {
        let k = 2.0 * PI * 32.3e6;
        let mut m = ResonanceModel::ideal(Topology::Hanger, 6.63e9, 0.5 * k, 0.5 * k);
        m.theta = 20f64.to_radians();
        m.delay = 1e-9;
        let (a, b) = window(&m, 8.0);
        let fit = fit_hanger(&synthesize(&m, a, b, 401)).unwrap();
        assert!(rel(fit.kappa, k) < 5e-3);
        assert!(rel(fit.kappa_ext, 0.5 * k) < 5e-3);
        assert!(rel(fit.kappa_int, 0.5 * k) < 5e-3);
        assert!((fit.theta - m.theta).abs() < 1e-6);
    }

    #[test]
    fn uncoupled_hanger_rejected() {
        let m = ResonanceModel::ideal(Topology::Hanger, 6.63e9, 0.0, 1e8);
        let trace = synthesize(&m, 6.5e9, 6.8e9, 201);
        assert_eq!(fit_hanger(&trace), Err(FitError::NoResonance));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut noisy = trace.clone();
        add_noise(&mut noisy, 1e-3, &mut rng);
        assert_eq!(fit_hanger(&noisy), Err(FitError::NoResonance));
    }

    #[test]
    fn two_dips_rejected() {
        let a = ResonanceModel::ideal(Topology::Hanger, 6.60e9, 1e8, 5e7);
        let b = ResonanceModel::ideal(Topology::Hanger, 6.70e9, 1e8, 5e7);
        let trace: Vec<(f64, Complex64)> = synthesize(&a, 6.5e9, 6.8e9, 601)
            .into_iter()
            .map(|(f, s)| (f, s * b.eval(f)))
            .collect();
        assert!(matches!(fit_hanger(&trace), Err(FitError::MultiDip(2))));
    }

    #[test]
    fn input_checks() {
        let m = ResonanceModel::ideal(Topology::Reflection, 7e9, 1e8, 1e7);
        assert_eq!(fit_reflection(&synthesize(&m, 6.9e9, 7.1e9, 10)), Err(FitError::TooFewPoints(10)));
        let narrow = synthesize(&m, 7e9 - 5e6, 7e9 + 5e6, 101);
        let got = fit_reflection(&narrow);
        assert!(matches!(got, Err(FitError::NarrowWindow { .. })), "{got:?}");
    }

    #[test]
    fn random_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let topo = if rng.gen_bool(0.5) { Topology::Hanger } else { Topology::Reflection };
            let k = 2.0 * PI * rng.gen_range(5e6..60e6);
            let ext = rng.gen_range(0.2..0.95);
            let mut m = ResonanceModel::ideal(topo, rng.gen_range(4e9..9e9), ext * k, (1.0 - ext) * k);
            m.scale = Complex64::from_polar(rng.gen_range(0.1..2.0), rng.gen_range(-PI..PI));
            m.delay = rng.gen_range(0.0..3e-9);
            if topo == Topology::Hanger {
                m.theta = rng.gen_range(-0.5..0.5);
            }
            let (a, b) = window(&m, 8.0);
            let fit = fit(&synthesize(&m, a, b, 401), topo).unwrap();
            assert!(rel(fit.f_r, m.f_r) < 1e-3);
            assert!(rel(fit.kappa, k) < 1e-3, "{m:?} -> {fit:?}");
            assert!(rel(fit.kappa_ext, ext * k) < 1e-3);
            assert!(rel(fit.kappa_int, (1.0 - ext) * k) < 1e-3);
        }
    }

    #[test]
    fn noisy_errors_are_calibrated() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k = 2.0 * PI * 41.3e6;
        let k_int = 2.0 * PI * 7.52e9 / 660.0;
        let m = ResonanceModel::ideal(Topology::Reflection, 7.52e9, k - k_int, k_int);
        let (a, b) = window(&m, 8.0);
        let clean = synthesize(&m, a, b, 401);
        let trials = 300;
        let mut hits = [0usize; 3];
        for _ in 0..trials {
            let mut t = clean.clone();
            add_noise(&mut t, 1e-3, &mut rng);
            let fit = fit_reflection(&t).unwrap();
            assert!(rel(fit.kappa, k) < 0.01);
            assert!(rel(fit.kappa_ext, k - k_int) < 0.01);
            hits[0] += ((fit.f_r - m.f_r).abs() < 2.0 * fit.f_r_std()) as usize;
            hits[1] += ((fit.kappa - k).abs() < 2.0 * fit.kappa_std()) as usize;
            hits[2] += ((fit.kappa_ext - (k - k_int)).abs() < 2.0 * fit.kappa_ext_std()) as usize;
        }
        for h in hits {
            let rate = h as f64 / trials as f64;
            assert!((0.91..=0.99).contains(&rate), "coverage {rate}");
        }
    }
}
