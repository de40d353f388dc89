//! Barnes G-function on the positive real axis.

use crate::error::{IbgError, Result};
use statrs::function::gamma::ln_gamma;

/// zeta'(-1).
pub const ZETA_PRIME_M1: f64 = -0.165_421_143_700_450_93;

/// log G(z) for real z > 0.
///
/// Integers use the factorial product G(n) = 0! 1! ... (n-2)!. Other arguments are
/// lifted by the functional equation G(z+1) = Gamma(z) G(z) until the asymptotic
/// expansion is accurate.
pub fn ln_barnes_g(z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(IbgError::InvalidArgument(format!("Barnes G needs a positive argument, got {z}")));
    }
    if z.fract() == 0.0 && z < 1e6 {
        let n = z as u64;
        let mut acc = 0.0;
        let mut lf = 0.0;
        for k in 1..n.saturating_sub(1) {
            lf += (k as f64).ln();
            acc += lf;
        }
        return Ok(acc);
    }
    let mut shift = 0.0;
    let mut w = z;
    while w < 12.0 {
        shift += ln_gamma(w);
        w += 1.0;
    }
    Ok(ln_barnes_g_asymptotic(w) - shift)
}

fn ln_barnes_g_asymptotic(z: f64) -> f64 {
    // Expansion of log G(w + 1) in w = z - 1.
    let w = z - 1.0;
    let lw = w.ln();
    let mut s = 0.5 * w * w * lw - 0.75 * w * w + 0.5 * w * (2.0 * std::f64::consts::PI).ln() - lw / 12.0
        + ZETA_PRIME_M1;
    // B_{2k+2} / (4 k (k+1) w^{2k})
    let bern = [
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
        7.0 / 6.0,
        -3617.0 / 510.0,
        43867.0 / 798.0,
    ];
    let w2 = w * w;
    let mut p = w2;
    for (i, b) in bern.iter().enumerate() {
        let k = (i + 1) as f64;
        s += b / (4.0 * k * (k + 1.0) * p);
        p *= w2;
    }
    s
}

/// Large-distance amplitude G(3/2)^4 / sqrt(2 pi) of the infinite-system density matrix.
pub fn asymptotic_constant() -> f64 {
    let g = ln_barnes_g(1.5).expect("positive argument");
    (4.0 * g - 0.5 * (2.0 * std::f64::consts::PI).ln()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_values() {
        assert_eq!(ln_barnes_g(1.0).unwrap(), 0.0);
        assert_eq!(ln_barnes_g(2.0).unwrap(), 0.0);
        assert!((ln_barnes_g(4.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((ln_barnes_g(6.0).unwrap() - (2.0f64 * 6.0 * 24.0).ln()).abs() < 1e-13);
    }

    #[test]
    fn functional_equation_off_integers() {
        for z in [0.3, 1.5, 2.7, 7.25] {
            let lhs = ln_barnes_g(z + 1.0).unwrap();
            let rhs = ln_gamma(z) + ln_barnes_g(z).unwrap();
            assert!((lhs - rhs).abs() < 1e-12, "z={z}");
        }
        // Asymptotic branch agrees with the exact product at an integer.
        let direct = ln_barnes_g_asymptotic(40.0);
        assert!((direct - ln_barnes_g(40.0).unwrap()).abs() < 1e-10 * direct.abs());
    }

    #[test]
    fn half_integer_and_asymptotic_constant() {
        // G(1/2) = 0.603244281209446...
        let g = ln_barnes_g(0.5).unwrap().exp();
        assert!((g - 0.603_244_281_209_446_2).abs() < 1e-13, "{g:.17}");
        let a = asymptotic_constant();
        assert!((a - 0.521_413_972_673_847).abs() < 1e-12, "{a}");
    }
}
