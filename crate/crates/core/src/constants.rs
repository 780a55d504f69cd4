//! Physical constants (CODATA 2018 exact / recommended values) and unit helpers.

use std::f64::consts::PI;

/// Elementary charge (C).
pub const E_CHARGE: f64 = 1.602_176_634e-19;
/// Planck constant (J s).
pub const H_PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant (J s).
pub const HBAR: f64 = H_PLANCK / (2.0 * PI);
/// Reduced flux quantum ħ/2e (Wb).
pub const PHI0_REDUCED: f64 = HBAR / (2.0 * E_CHARGE);

/// Converts a power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

/// Converts a power in watts to dBm. Zero power maps to `-inf`.
pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w / 1e-3).log10()
}

/// Power ratio in dB.
pub fn db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flux_quantum_value() {
        // 2.067833848e-15 Wb / 2π
        assert!((PHI0_REDUCED - 2.067_833_848e-15 / (2.0 * PI)).abs() < 1e-24);
    }

    #[test]
    fn dbm_round_trip() {
        assert!((dbm_to_watts(-100.0) - 1e-13).abs() < 1e-25);
        assert!((watts_to_dbm(dbm_to_watts(-87.3)) + 87.3).abs() < 1e-12);
    }
}
