use crate::error::{Error, Result};

use super::gamma::ln_gamma_real;

const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 100_000;

fn check(a: f64, x: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::domain(format!("incomplete gamma needs a > 0, got {a}")));
    }
    if !(x >= 0.0) {
        return Err(Error::domain(format!("incomplete gamma needs x >= 0, got {x}")));
    }
    Ok(())
}

/// Power series for γ(a,x) e^x x^{-a}.
fn series(a: f64, x: f64) -> Result<f64> {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            return Ok(sum);
        }
    }
    Err(Error::NoConvergence {
        what: "incomplete gamma series",
        residual: term / sum,
    })
}

/// Continued fraction (modified Lentz) for Γ(a,x) e^x x^{-a}.
fn continued_fraction(a: f64, x: f64) -> Result<f64> {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    Err(Error::NoConvergence {
        what: "incomplete gamma continued fraction",
        residual: f64::NAN,
    })
}

/// Regularized lower and upper incomplete gamma `(P(a,x), Q(a,x))`.
pub fn regularized_pq(a: f64, x: f64) -> Result<(f64, f64)> {
    check(a, x)?;
    if x == 0.0 {
        return Ok((0.0, 1.0));
    }
    if x.is_infinite() {
        return Ok((1.0, 0.0));
    }
    let ln_pref = a * x.ln() - x - ln_gamma_real(a)?;
    if x < a + 1.0 {
        let p = (series(a, x)?.ln() + ln_pref).exp().min(1.0);
        Ok((p, 1.0 - p))
    } else {
        let q = (continued_fraction(a, x)?.ln() + ln_pref).exp().min(1.0);
        Ok((1.0 - q, q))
    }
}

/// Γ(a,x)/Γ(a).
pub fn regularized_q(a: f64, x: f64) -> Result<f64> {
    regularized_pq(a, x).map(|(_, q)| q)
}

/// γ(a,x)/Γ(a).
pub fn regularized_p(a: f64, x: f64) -> Result<f64> {
    regularized_pq(a, x).map(|(p, _)| p)
}

/// `ln P(a,x)`, accurate when `P` underflows.
pub fn ln_regularized_p(a: f64, x: f64) -> Result<f64> {
    check(a, x)?;
    if x == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if x < a + 1.0 {
        Ok(series(a, x)?.ln() + a * x.ln() - x - ln_gamma_real(a)?)
    } else {
        let (p, _) = regularized_pq(a, x)?;
        Ok(p.ln())
    }
}

/// Upper incomplete gamma Γ(a,x).
pub fn upper_gamma(a: f64, x: f64) -> Result<f64> {
    check(a, x)?;
    if x == 0.0 {
        return Ok(ln_gamma_real(a)?.exp());
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    if x < a + 1.0 {
        let (_, q) = regularized_pq(a, x)?;
        Ok(q * ln_gamma_real(a)?.exp())
    } else {
        Ok((continued_fraction(a, x)?.ln() + a * x.ln() - x).exp())
    }
}

/// Solve `Q(a,x) = p` for `x`.
///
/// Newton steps are kept inside a bracket that always encloses the root;
/// any step leaving it is replaced by bisection.
pub fn inverse_regularized_q(a: f64, p: f64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::domain(format!("inverse incomplete gamma needs a > 0, got {a}")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::domain(format!("probability {p} outside (0, 1]")));
    }
    if p == 1.0 {
        return Ok(0.0);
    }
    // Work with whichever tail is smaller so the residual keeps relative precision.
    let use_p = p > 0.5;
    let target = if use_p { 1.0 - p } else { p };
    let resid = |x: f64| -> Result<f64> {
        let (lo, up) = regularized_pq(a, x)?;
        Ok(if use_p { target - lo } else { up - target })
    };
    let lg = ln_gamma_real(a)?;

    let mut lo = 0.0;
    let mut hi = a.max(1.0);
    while resid(hi)? > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::NoConvergence {
                what: "inverse incomplete gamma bracket",
                residual: p,
            });
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..500 {
        let r = resid(x)?;
        if r == 0.0 {
            return Ok(x);
        }
        if r > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        // d(resid)/dx = -x^{a-1} e^{-x} / Γ(a) in both forms.
        let deriv = -((a - 1.0) * x.ln() - x - lg).exp();
        let mut next = x - r / deriv;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.max(1e-300) || hi - lo <= 1e-15 * hi {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::NoConvergence {
        what: "inverse incomplete gamma",
        residual: resid(x)?.abs(),
    })
}
