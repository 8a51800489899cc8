use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

const G: f64 = 607.0 / 128.0;

// Godfrey's coefficients for g = 607/128.
const COEF: [f64; 15] = [
    0.999_999_999_999_997_1,
    57.156_235_665_862_923_517,
    -59.597_960_355_475_491_248,
    14.136_097_974_741_747_174,
    -0.491_913_816_097_620_199_78,
    0.339_946_499_848_118_886_99e-4,
    0.465_236_289_270_485_756_65e-4,
    -0.983_744_753_048_795_646_77e-4,
    0.158_088_703_224_912_488_84e-3,
    -0.210_264_441_724_104_883_19e-3,
    0.217_439_618_115_212_643_20e-3,
    -0.164_318_106_536_763_890_22e-3,
    0.844_182_239_838_527_432_93e-4,
    -0.261_908_384_015_814_086_70e-4,
    0.368_991_826_595_316_227_04e-5,
];

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
const LN_PI: f64 = 1.144_729_885_849_400_2;
const POLE_TOL: f64 = 1e-12;

fn lanczos(w: Complex64) -> Complex64 {
    let z = w - 1.0;
    let mut a = Complex64::new(COEF[0], 0.0);
    for (k, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (z + k as f64);
    }
    let t = z + (G + 0.5);
    (z + 0.5) * t.ln() - t + a.ln() + HALF_LN_2PI
}

fn lanczos_real(x: f64) -> f64 {
    let z = x - 1.0;
    let mut a = COEF[0];
    for (k, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (z + k as f64);
    }
    let t = z + G + 0.5;
    (z + 0.5) * t.ln() - t + a.ln() + HALF_LN_2PI
}

fn is_pole(re: f64, im: f64) -> bool {
    im.abs() < POLE_TOL && re < 0.5 && (re - re.round()).abs() < POLE_TOL
}

/// Log-gamma on the principal branch (the analytic continuation of
/// `ln Γ(x)` from the positive axis, cut along the negative real axis).
///
/// Satisfies `ln Γ(z+1) = ln Γ(z) + ln z` up to multiples of 2πi only across
/// the cut; off the real axis the recurrence holds exactly.
pub fn ln_gamma(z: Complex64) -> Result<Complex64> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::domain("ln_gamma of non-finite argument"));
    }
    if is_pole(z.re, z.im) {
        return Err(Error::Pole {
            re: z.re,
            im: z.im,
            factor: None,
        });
    }
    if z.re >= 0.5 {
        return Ok(lanczos(z));
    }
    if z.im < 0.0 {
        return ln_gamma(z.conj()).map(|v| v.conj());
    }
    // Reflection, written so the branch follows the continuation:
    // ln Γ(z) = ln π − ln sin(πz) − ln Γ(1 − z), with
    // ln sin(πz) = ln(1/2) + iπ/2 − iπz + ln(1 − e^{2πiz}) for Im z ≥ 0.
    let i = Complex64::i();
    let e = (2.0 * PI * i * z).exp();
    let ln_sin = -std::f64::consts::LN_2 + i * (PI / 2.0) - i * PI * z + (1.0 - e).ln();
    Ok(LN_PI - ln_sin - lanczos(1.0 - z))
}

/// `ln |Γ(x)|` for real `x`.
pub fn ln_gamma_real(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain("ln_gamma of non-finite argument"));
    }
    if is_pole(x, 0.0) {
        return Err(Error::Pole {
            re: x,
            im: 0.0,
            factor: None,
        });
    }
    if x >= 0.5 {
        return Ok(lanczos_real(x));
    }
    Ok(LN_PI - (PI * x).sin().abs().ln() - lanczos_real(1.0 - x))
}

/// Digamma ψ(x) for real `x > 0`.
pub fn digamma(mut x: f64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::domain(format!("digamma needs x > 0, got {x}")));
    }
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let r = 1.0 / (x * x);
    let tail = r * (1.0 / 12.0 - r * (1.0 / 120.0 - r * (1.0 / 252.0 - r * (1.0 / 240.0 - r * (1.0 / 132.0 - r * 691.0 / 32760.0)))));
    Ok(acc + x.ln() - 0.5 / x - tail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64, rel: f64) -> bool {
        (a - b).norm() <= rel * b.norm().max(1.0)
    }

    #[test]
    fn trivial_values() {
        assert!(ln_gamma(c(1.0, 0.0)).unwrap().norm() < 1e-15);
        assert!(ln_gamma(c(2.0, 0.0)).unwrap().norm() < 1e-15);
        let half = ln_gamma(c(0.5, 0.0)).unwrap();
        assert!((half.re - 0.572_364_942_924_700_1).abs() < 1e-15);
        assert!(half.im.abs() < 1e-15);
    }

    // Values minted with mpmath.loggamma at 50 digits.
    const ORACLE: [(f64, f64, f64, f64); 10] = [
        (3.7, 2.1, 0.785_346_958_073_822_4, 2.583_012_925_115_262_3),
        (0.3, -7.5, -11.264_889_713_443_322, -7.300_504_415_025_125),
        (-2.5, 0.2, -0.235_267_405_716_319_05, -9.204_002_541_543_566),
        (-40.3, 1.0, -112.724_187_254_031_27, -124.469_948_085_961_42),
        (120.0, 40.0, 446.450_095_429_567_35, 192.055_862_942_632_22),
        (0.01, 0.0, 4.599_479_878_042_022, 0.0),
        (-0.5, 0.0, 1.265_512_123_484_645_4, -std::f64::consts::PI),
        (1e-3, 900.0, -1_416.192_150_568_998_5, 5_221.371_367_587_213),
        (700.0, -700.0, 3_576.049_204_442_505, -4_677.743_703_499_072),
        (4.0, 0.0, 1.791_759_469_228_055, 0.0),
    ];

    #[test]
    fn matches_high_precision_oracle() {
        for &(re, im, vr, vi) in ORACLE.iter() {
            let got = ln_gamma(c(re, im)).unwrap();
            assert!(close(got, c(vr, vi), 1e-13), "{re}+{im}i: {got} vs {vr}+{vi}i");
        }
    }

    #[test]
    fn digamma_values() {
        let euler = 0.577_215_664_901_532_9;
        assert!((digamma(1.0).unwrap() + euler).abs() < 1e-14);
        assert!((digamma(0.5).unwrap() + euler + 2.0 * std::f64::consts::LN_2).abs() < 1e-14);
        // Derivative check against ln_gamma_real.
        for &x in &[0.3, 2.7, 41.0] {
            let h = 1e-5;
            let fd = (ln_gamma_real(x + h).unwrap() - ln_gamma_real(x - h).unwrap()) / (2.0 * h);
            assert!((fd - digamma(x).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn poles_rejected() {
        for n in 0..5 {
            assert!(matches!(ln_gamma(c(-(n as f64), 0.0)), Err(Error::Pole { .. })));
            assert!(ln_gamma_real(-(n as f64)).is_err());
        }
        assert!(ln_gamma(c(-3.0, 1e-6)).is_ok());
    }

    #[test]
    fn real_matches_complex() {
        for &x in &[0.1, 0.7, 1.5, 3.3, 17.0, 250.5, -0.3, -4.7] {
            let r = ln_gamma_real(x).unwrap();
            let z = ln_gamma(c(x, 0.0)).unwrap();
            assert!((r - z.re).abs() <= 1e-13 * r.abs().max(1.0), "{x}");
        }
    }

    proptest! {
        #[test]
        fn recurrence(re in -60.0f64..60.0, im in 0.05f64..80.0, flip in any::<bool>()) {
            let z = c(re, if flip { -im } else { im });
            let lhs = ln_gamma(z + 1.0).unwrap();
            let rhs = ln_gamma(z).unwrap() + z.ln();
            prop_assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0), "{} vs {}", lhs, rhs);
        }

        #[test]
        fn conjugate_symmetry(re in -30.0f64..30.0, im in 0.01f64..30.0) {
            let a = ln_gamma(c(re, im)).unwrap();
            let b = ln_gamma(c(re, -im)).unwrap();
            prop_assert!((a - b.conj()).norm() < 1e-12 * a.norm().max(1.0));
        }
    }
}
