//! Mixing-product bookkeeping and the multi-dimensional FFT grid on which the
//! nonlinear inductor is evaluated.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::HbError;

/// Kept mixing products Σ mᵢ·fᵢ with Σ|mᵢ| ≤ truncation and positive frequency,
/// sorted by frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicSet {
    pub tone_freqs: Vec<f64>,
    pub truncation: usize,
    pub odd_only: bool,
    pub indices: Vec<Vec<i32>>,
    pub freqs: Vec<f64>,
}

impl HarmonicSet {
    pub fn new(tone_freqs: &[f64], truncation: usize, odd_only: bool) -> Result<Self, HbError> {
        let t = truncation as i32;
        let dims = tone_freqs.len();
        let fmax = tone_freqs.iter().cloned().fold(0.0, f64::max);
        let mut out: Vec<(f64, Vec<i32>)> = Vec::new();
        let mut m = vec![-t; dims];
        loop {
            let order: i32 = m.iter().map(|x| x.abs()).sum();
            let parity_ok = !odd_only || m.iter().sum::<i32>().rem_euclid(2) == 1;
            if order <= t && order > 0 && parity_ok {
                let f: f64 = m.iter().zip(tone_freqs).map(|(&k, &f)| k as f64 * f).sum();
                if f.abs() <= 1e-9 * fmax {
                    return Err(HbError::Commensurate(format!(
                        "mixing product {m:?} falls on DC"
                    )));
                }
                if f > 0.0 {
                    out.push((f, m.clone()));
                }
            }
            // Odometer increment over [−t, t]^dims.
            let mut axis = 0;
            loop {
                if axis == dims {
                    out.sort_by(|a, b| a.0.total_cmp(&b.0));
                    for w in out.windows(2) {
                        if w[1].0 - w[0].0 <= 1e-9 * fmax {
                            return Err(HbError::Commensurate(format!(
                                "mixing products {:?} and {:?} coincide at {} Hz",
                                w[0].1, w[1].1, w[0].0
                            )));
                        }
                    }
                    let (freqs, indices) = out.into_iter().unzip();
                    return Ok(Self {
                        tone_freqs: tone_freqs.to_vec(),
                        truncation,
                        odd_only,
                        indices,
                        freqs,
                    });
                }
                m[axis] += 1;
                if m[axis] > t {
                    m[axis] = -t;
                    axis += 1;
                } else {
                    break;
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn position(&self, index: &[i32]) -> Option<usize> {
        self.indices.iter().position(|m| m.as_slice() == index)
    }
}

fn fft_friendly(min: usize) -> usize {
    (min..)
        .find(|&n| {
            let mut k = n;
            for p in [2, 3, 5] {
                while k % p == 0 {
                    k /= p;
                }
            }
            k == 1
        })
        .unwrap()
}

/// Uniform sampling of the T-torus, one axis per tone.
pub struct FftGrid {
    pub dims: Vec<usize>,
    strides: Vec<usize>,
    total: usize,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl FftGrid {
    /// Grid large enough that a polynomial L(I) of degree `poly_order` does not
    /// alias onto any product used by the solver or its Jacobian.
    pub fn new(tones: usize, truncation: usize, poly_order: usize) -> Self {
        let n = fft_friendly((poly_order + 2) * truncation + 1);
        let dims = vec![n; tones];
        let mut strides = vec![1; tones];
        for a in 1..tones {
            strides[a] = strides[a - 1] * dims[a - 1];
        }
        let total = dims.iter().product();
        let mut planner = FftPlanner::new();
        let forward = dims.iter().map(|&d| planner.plan_fft_forward(d)).collect();
        let inverse = dims.iter().map(|&d| planner.plan_fft_inverse(d)).collect();
        Self { dims, strides, total, forward, inverse }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn flat(&self, m: &[i32]) -> usize {
        m.iter()
            .zip(&self.dims)
            .zip(&self.strides)
            .map(|((&k, &n), &s)| (k.rem_euclid(n as i32) as usize) * s)
            .sum()
    }

    fn transform(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        let mut line = Vec::new();
        for (axis, plan) in plans.iter().enumerate() {
            let n = self.dims[axis];
            let stride = self.strides[axis];
            line.resize(n, Complex64::new(0.0, 0.0));
            for start in 0..self.total {
                if (start / stride) % n != 0 {
                    continue;
                }
                for (k, v) in line.iter_mut().enumerate() {
                    *v = data[start + k * stride];
                }
                plan.process(&mut line);
                for (k, v) in line.iter().enumerate() {
                    data[start + k * stride] = *v;
                }
            }
        }
    }

    /// Real samples of Re Σ X_k·e^{j m_k·θ} on the grid (peak phasors).
    pub fn to_time(&self, set: &HarmonicSet, phasors: &[Complex64]) -> Vec<f64> {
        let mut spec = vec![Complex64::new(0.0, 0.0); self.total];
        for (m, x) in set.indices.iter().zip(phasors) {
            spec[self.flat(m)] += 0.5 * x;
            let neg: Vec<i32> = m.iter().map(|k| -k).collect();
            spec[self.flat(&neg)] += 0.5 * x.conj();
        }
        self.transform(&mut spec, &self.inverse);
        spec.iter().map(|z| z.re).collect()
    }

    /// Normalized Fourier coefficients c_m of real samples, indexed by [`flat`].
    ///
    /// [`flat`]: FftGrid::flat
    pub fn coefficients(&self, samples: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        let scale = 1.0 / self.total as f64;
        data.iter_mut().for_each(|z| *z *= scale);
        data
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_tone_odd_set() {
        let s = HarmonicSet::new(&[1e9], 7, true).unwrap();
        assert_eq!(s.indices, vec![vec![1], vec![3], vec![5], vec![7]]);
        let all = HarmonicSet::new(&[1e9], 4, false).unwrap();
        assert_eq!(all.len(), 4);
    }

    #[test]
    fn two_tone_diamond() {
        let s = HarmonicSet::new(&[7.0e9, 7.01e9], 3, true).unwrap();
        // Odd-sum products with Σ|m| ≤ 3 and f > 0.
        assert!(s.position(&[2, -1]).is_some());
        assert!(s.position(&[-1, 2]).is_some());
        assert!(s.position(&[1, 0]).is_some());
        assert!(s.position(&[1, -1]).is_none());
        assert!(s.freqs.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(s.len(), 8);
    }

    #[test]
    fn coincident_products_rejected() {
        assert!(matches!(
            HarmonicSet::new(&[1e9, 3e9], 5, true),
            Err(HbError::Commensurate(_))
        ));
        assert!(matches!(
            HarmonicSet::new(&[1e9, 1e9], 3, false),
            Err(HbError::Commensurate(_))
        ));
    }

    #[test]
    fn time_round_trip() {
        let s = HarmonicSet::new(&[1.0, 1.3], 3, false).unwrap();
        let grid = FftGrid::new(2, 3, 2);
        let x: Vec<Complex64> =
            (0..s.len()).map(|k| Complex64::new(k as f64 * 0.1 + 1.0, 0.3 - k as f64 * 0.05)).collect();
        let t = grid.to_time(&s, &x);
        let c = grid.coefficients(&t);
        for (m, xk) in s.indices.iter().zip(&x) {
            assert!((2.0 * c[grid.flat(m)] - xk).norm() < 1e-12);
        }
        // Real signal: coefficient at −m is the conjugate.
        for m in &s.indices {
            let neg: Vec<i32> = m.iter().map(|k| -k).collect();
            assert!((c[grid.flat(&neg)] - c[grid.flat(m)].conj()).norm() < 1e-14);
        }
    }
}
