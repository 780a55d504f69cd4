//! Junction constitutive relations and polynomial L(I) fits.
//!
//! All three models share one scale convention: `l_j` is the small-signal
//! inductance, so dI/dφ at φ = 0 equals φ₀/L_J and E_J = φ₀²/(c₂·L_J). The
//! quartic coefficient `c4` is stored non-negative and enters with a minus
//! sign, so a positive `c4` is a softening junction.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::PHI0_REDUCED as PHI0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JunctionError {
    #[error("invalid junction model: {0}")]
    Invalid(String),
    #[error("phase {phi} rad outside validity domain |phi| < {bound} rad")]
    Domain { phi: f64, bound: f64 },
    #[error("fit domain {i_max} A is not below the critical current {i_c} A")]
    AboveCritical { i_max: f64, i_c: f64 },
    #[error("ill-conditioned polynomial fit: {0}")]
    IllConditioned(String),
}

pub type Result<T> = std::result::Result<T, JunctionError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JunctionKind {
    /// Tunnel junction, cosine potential.
    Sis,
    /// Quartic truncation U = E_J(c₂φ²/2 − c₄φ⁴/24).
    SsmsQuartic,
    /// Short-junction CPR with one effective transmission τ*.
    KoopsCpr,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JunctionModel {
    pub kind: JunctionKind,
    /// Linear (small-signal) inductance, H.
    pub l_j: f64,
    pub c2: f64,
    pub c4: f64,
    pub tau_star: f64,
}

impl JunctionModel {
    pub fn sis(l_j: f64) -> Result<Self> {
        Self { kind: JunctionKind::Sis, l_j, c2: 1.0, c4: 1.0, tau_star: 0.0 }.validated()
    }

    pub fn ssms(l_j: f64, c2: f64, c4: f64) -> Result<Self> {
        Self { kind: JunctionKind::SsmsQuartic, l_j, c2, c4, tau_star: 0.0 }.validated()
    }

    pub fn koops(l_j: f64, tau_star: f64) -> Result<Self> {
        let c4 = if (0.0..1.0).contains(&tau_star) { 1.0 - 0.75 * tau_star } else { f64::NAN };
        Self { kind: JunctionKind::KoopsCpr, l_j, c2: 1.0, c4, tau_star }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l_j.is_finite() && self.l_j > 0.0) {
            return Err(JunctionError::Invalid(format!("l_j = {} must be > 0", self.l_j)));
        }
        if !(self.c2.is_finite() && self.c2 > 0.0) {
            return Err(JunctionError::Invalid(format!("c2 = {} must be > 0", self.c2)));
        }
        if !(self.c4.is_finite() && self.c4 >= 0.0) {
            return Err(JunctionError::Invalid(format!("c4 = {} must be >= 0", self.c4)));
        }
        if !(self.tau_star.is_finite() && (0.0..1.0).contains(&self.tau_star)) {
            return Err(JunctionError::Invalid(format!(
                "tau_star = {} must lie in [0, 1)",
                self.tau_star
            )));
        }
        Ok(())
    }

    /// c₄/c₂ of the potential's Taylor expansion.
    pub fn c4_over_c2(&self) -> f64 {
        self.c4 / self.c2
    }

    /// Josephson energy (J).
    pub fn e_j(&self) -> f64 {
        PHI0 * PHI0 / (self.c2 * self.l_j)
    }

    /// φ₀/L_J, the SIS critical current at this inductance (A).
    pub fn current_scale(&self) -> f64 {
        PHI0 / self.l_j
    }

    /// Koops I₀ = A_N·φ₀/L_J (A). Equals the critical current of that model.
    pub fn koops_i0(&self) -> f64 {
        koops_norm(self.tau_star) * self.current_scale()
    }

    /// |φ| at which the current reaches its maximum; infinite for a linear
    /// quartic model (c4 = 0).
    pub fn phase_at_critical(&self) -> f64 {
        match self.kind {
            JunctionKind::Sis => std::f64::consts::FRAC_PI_2,
            JunctionKind::SsmsQuartic => {
                if self.c4 == 0.0 {
                    f64::INFINITY
                } else {
                    (2.0 * self.c2 / self.c4).sqrt()
                }
            }
            JunctionKind::KoopsCpr => 2.0 * koops_x_star(self.tau_star).sqrt().asin(),
        }
    }

    /// Largest supercurrent the junction carries (A).
    pub fn critical_current(&self) -> f64 {
        let phi = self.phase_at_critical();
        if phi.is_infinite() {
            f64::INFINITY
        } else {
            self.current(phi)
        }
    }

    /// Potential energy U(φ) with U(0) = 0 (J).
    pub fn potential(&self, phi: f64) -> f64 {
        match self.kind {
            JunctionKind::Sis => self.e_j() * (1.0 - phi.cos()),
            JunctionKind::SsmsQuartic => {
                let p2 = phi * phi;
                self.e_j() * (self.c2 * p2 / 2.0 - self.c4 * p2 * p2 / 24.0)
            }
            JunctionKind::KoopsCpr => {
                let tau = self.tau_star;
                let scale = PHI0 * self.current_scale();
                let s = (phi / 2.0).sin().powi(2);
                if tau == 0.0 {
                    scale * 2.0 * s
                } else {
                    // 1 − √(1 − τs) written to avoid cancellation at small τs.
                    let root = (1.0 - tau * s).sqrt();
                    scale * (4.0 / tau) * (tau * s / (1.0 + root))
                }
            }
        }
    }

    /// Supercurrent I(φ) (A).
    pub fn current(&self, phi: f64) -> f64 {
        match self.kind {
            JunctionKind::Sis => self.current_scale() * phi.sin(),
            JunctionKind::SsmsQuartic => {
                self.e_j() / PHI0 * (self.c2 * phi - self.c4 * phi.powi(3) / 6.0)
            }
            JunctionKind::KoopsCpr => {
                let s = (phi / 2.0).sin().powi(2);
                self.current_scale() * phi.sin() / (1.0 - self.tau_star * s).sqrt()
            }
        }
    }

    /// dI/dφ (A/rad).
    pub fn current_slope(&self, phi: f64) -> f64 {
        match self.kind {
            JunctionKind::Sis => self.current_scale() * phi.cos(),
            JunctionKind::SsmsQuartic => {
                self.e_j() / PHI0 * (self.c2 - self.c4 * phi * phi / 2.0)
            }
            JunctionKind::KoopsCpr => {
                let tau = self.tau_star;
                let s = (phi / 2.0).sin().powi(2);
                let q = 1.0 - tau * s;
                self.current_scale()
                    * (phi.cos() / q.sqrt() + 0.25 * tau * phi.sin().powi(2) / q.powf(1.5))
            }
        }
    }

    /// Phase-dependent inductance φ₀/(dI/dφ) (H).
    pub fn inductance_of_phase(&self, phi: f64) -> Result<f64> {
        if !phi.is_finite() {
            return Err(JunctionError::Domain { phi, bound: self.phase_at_critical() });
        }
        if self.kind == JunctionKind::SsmsQuartic {
            let bound = self.phase_at_critical();
            if phi.abs() >= bound {
                return Err(JunctionError::Domain { phi, bound });
            }
            return Ok(self.l_j / (1.0 - self.c4 / (2.0 * self.c2) * phi * phi));
        }
        let slope = self.current_slope(phi);
        if slope == 0.0 {
            return Err(JunctionError::Domain { phi, bound: self.phase_at_critical() });
        }
        Ok(PHI0 / slope)
    }

    /// Phase on the principal branch carrying current `i`, |i| < I_c.
    pub fn phase_of_current(&self, i: f64) -> Result<f64> {
        let i_c = self.critical_current();
        if !(i.abs() < i_c) {
            return Err(JunctionError::AboveCritical { i_max: i.abs(), i_c });
        }
        if self.kind == JunctionKind::Sis {
            return Ok((i / i_c).asin());
        }
        let target = i.abs();
        let mut lo = 0.0;
        let mut hi = if self.phase_at_critical().is_finite() {
            self.phase_at_critical()
        } else {
            // Linear quartic model: φ = I/(φ₀/L_J) exactly.
            return Ok(i / self.current_scale());
        };
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.current(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        Ok(0.5 * (lo + hi) * i.signum())
    }

    /// Current-dependent inductance L(I) (H).
    pub fn inductance_of_current(&self, i: f64) -> Result<f64> {
        if self.kind == JunctionKind::Sis {
            let r = i / self.current_scale();
            if !(r.abs() < 1.0) {
                return Err(JunctionError::AboveCritical {
                    i_max: i.abs(),
                    i_c: self.current_scale(),
                });
            }
            return Ok(self.l_j / (1.0 - r * r).sqrt());
        }
        let phi = self.phase_of_current(i)?;
        self.inductance_of_phase(phi)
    }
}

fn koops_x_star(tau: f64) -> f64 {
    1.0 / (1.0 + (1.0 - tau).sqrt())
}

/// Maximum of sin φ/√(1 − τ sin²(φ/2)) over φ.
pub fn koops_norm(tau: f64) -> f64 {
    let x = koops_x_star(tau);
    2.0 * (x * (1.0 - x) / (1.0 - tau * x)).sqrt()
}

/// Normalized potential coefficients (c₂, c₄) of the Koops CPR, c₂ = 1.
pub fn taylor_from_cpr(tau_star: f64) -> Result<(f64, f64)> {
    if !(tau_star.is_finite() && (0.0..1.0).contains(&tau_star)) {
        return Err(JunctionError::Invalid(format!("tau_star = {tau_star} must lie in [0, 1)")));
    }
    Ok((1.0, 1.0 - 0.75 * tau_star))
}

/// L(I) = Σ coefficients[k]·I^k over |I| ≤ fit_domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InductancePolynomial {
    /// L₀ … L_n in H/A^k.
    pub coefficients: Vec<f64>,
    /// Largest |I| the fit covers (A).
    pub fit_domain: f64,
    /// Largest relative deviation from the model over the fit grid.
    pub fit_residual: f64,
}

const FIT_POINTS: usize = 501;
const MAX_FIT_ORDER: usize = 24;
const MAX_CONDITION: f64 = 1e10;

impl InductancePolynomial {
    /// A current-independent inductor.
    pub fn linear(l0: f64, fit_domain: f64) -> Self {
        Self { coefficients: vec![l0], fit_domain, fit_residual: 0.0 }
    }

    pub fn l0(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn eval(&self, i: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * i + c)
    }

    /// Flux Φ(I) = ∫₀^I L(i) di (Wb).
    pub fn flux(&self, i: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .rev()
            .fold(0.0, |acc, (k, &c)| acc * i + c / (k + 1) as f64)
            * i
    }

    /// True when every odd coefficient is negligible on the fit domain, so the
    /// element only mixes odd harmonics.
    pub fn is_even(&self) -> bool {
        let l0 = self.l0().abs();
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(k, _)| k % 2 == 1)
            .all(|(k, &c)| (c * self.fit_domain.powi(k as i32)).abs() <= 1e-9 * l0)
    }

    /// True if no coefficient beyond L₀ is significant.
    pub fn is_linear(&self) -> bool {
        let l0 = self.l0().abs();
        self.coefficients
            .iter()
            .enumerate()
            .skip(1)
            .all(|(k, &c)| (c * self.fit_domain.powi(k as i32)).abs() <= 1e-12 * l0)
    }

    /// Copy with all odd-order coefficients set to zero.
    pub fn symmetrized(&self) -> Self {
        let mut out = self.clone();
        for (k, c) in out.coefficients.iter_mut().enumerate() {
            if k % 2 == 1 {
                *c = 0.0;
            }
        }
        out
    }

    /// Copy with every coefficient multiplied by `factor` (L₀ included).
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.coefficients.iter_mut().for_each(|c| *c *= factor);
        out
    }
}

/// Least-squares polynomial L(I) of the given order on a uniform 501-point grid
/// over [−i_max, i_max].
pub fn fit_inductance_polynomial(
    model: &JunctionModel,
    i_max: f64,
    order: usize,
) -> Result<InductancePolynomial> {
    model.validate()?;
    if !(i_max.is_finite() && i_max > 0.0) {
        return Err(JunctionError::Invalid(format!("i_max = {i_max} must be > 0")));
    }
    if order < 2 {
        return Err(JunctionError::Invalid(format!("order {order} must be >= 2")));
    }
    if order > MAX_FIT_ORDER {
        return Err(JunctionError::IllConditioned(format!(
            "order {order} exceeds {MAX_FIT_ORDER} for a {FIT_POINTS}-point grid"
        )));
    }
    let i_c = model.critical_current();
    if i_max >= i_c {
        return Err(JunctionError::AboveCritical { i_max, i_c });
    }

    let xs: Vec<f64> = (0..FIT_POINTS)
        .map(|n| -1.0 + 2.0 * n as f64 / (FIT_POINTS - 1) as f64)
        .collect();
    let mut target = Vec::with_capacity(FIT_POINTS);
    for &x in &xs {
        target.push(model.inductance_of_current(x * i_max)? / model.l_j);
    }

    // L(0) = L_J holds exactly for every model, so L₀ is pinned and only the
    // current-dependent part is fitted.
    let vander = DMatrix::from_fn(FIT_POINTS, order, |r, c| xs[r].powi(c as i32 + 1));
    let sv = vander.singular_values();
    let cond = sv.max() / sv.min();
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(JunctionError::IllConditioned(format!("condition number {cond:.3e}")));
    }
    let qr = vander.qr();
    let rhs = qr.q().transpose() * DVector::from_iterator(FIT_POINTS, target.iter().map(|t| t - 1.0));
    let scaled = qr
        .r()
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| JunctionError::IllConditioned("singular R factor".into()))?;

    let coefficients: Vec<f64> = std::iter::once(model.l_j)
        .chain(
            scaled
                .iter()
                .enumerate()
                .map(|(k, a)| a * model.l_j / i_max.powi(k as i32 + 1)),
        )
        .collect();
    let mut poly = InductancePolynomial { coefficients, fit_domain: i_max, fit_residual: 0.0 };
    poly.fit_residual = xs
        .iter()
        .zip(&target)
        .map(|(&x, &t)| (poly.eval(x * i_max) / model.l_j - t).abs() / t)
        .fold(0.0, f64::max);
    Ok(poly)
}
