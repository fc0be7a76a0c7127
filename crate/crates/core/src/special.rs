//! Log-gamma via the Lanczos approximation (g = 7, nine coefficients).

use crate::scalar::Real;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
///
/// Absolute error is below 1e-14 near the roots at 1 and 2, and the relative
/// error is below 1e-13 everywhere else on the positive axis (in `f64`).
pub fn ln_gamma<T: Real>(x: T) -> T {
    debug_assert!(x > T::zero(), "ln_gamma is only defined here for x > 0");
    let half = T::lit(0.5);
    if x < half {
        // Reflection: Gamma(x) Gamma(1 - x) = pi / sin(pi x)
        let pi = T::PI();
        return (pi / (pi * x).sin()).ln() - ln_gamma(T::one() - x);
    }
    // Exact zeros keep integer-point identities bitwise clean.
    if x == T::one() || x == T::lit(2.0) {
        return T::zero();
    }
    let z = x - T::one();
    let mut acc = T::lit(LANCZOS_COEF[0]);
    for (k, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc = acc + T::lit(c) / (z + T::from_usize(k).unwrap());
    }
    let t = z + T::lit(LANCZOS_G) + half;
    let ln_sqrt_2pi = T::lit(0.918_938_533_204_672_8);
    ln_sqrt_2pi + (z + half) * t.ln() - t + acc.ln()
}
