use crate::error::{Error, Result};

const MAX_TERMS: usize = 100_000;

fn is_nonpositive_int(b: f64) -> bool {
    b <= 0.0 && (b - b.round()).abs() < 1e-12
}

fn series(a: f64, b: f64, z: f64) -> Result<f64> {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..MAX_TERMS {
        let kf = k as f64;
        term *= (a + kf) / (b + kf) * z / (kf + 1.0);
        sum += term;
        if !sum.is_finite() {
            return Err(Error::Overflow("kummer_1f1"));
        }
        if term == 0.0 || term.abs() <= 1e-17 * sum.abs() {
            return Ok(sum);
        }
    }
    Err(Error::NoConvergence {
        what: "kummer_1f1 series",
        residual: (term / sum).abs(),
    })
}

/// Confluent hypergeometric ₁F₁(a; b; z).
///
/// Negative `z` goes through Kummer's transformation so the summed series has
/// terms of one sign whenever `b - a >= 0`.
pub fn kummer_1f1(a: f64, b: f64, z: f64) -> Result<f64> {
    if is_nonpositive_int(b) {
        return Err(Error::Pole {
            re: b,
            im: 0.0,
            factor: None,
        });
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    if z < 0.0 {
        let inner = series(b - a, b, -z)?;
        let v = z.exp() * inner;
        if !v.is_finite() {
            return Err(Error::Overflow("kummer_1f1"));
        }
        return Ok(v);
    }
    series(a, b, z)
}

/// `g_l = ₁F₁(-l; n; y)` for `l = 0..len`, the Laguerre polynomial
/// `L_l^{(n-1)}(y)` divided by its value at zero.
///
/// Three-term recurrence, stable in the forward direction.
pub fn laguerre_normalized(n: f64, y: f64, len: usize) -> Vec<f64> {
    let mut g = Vec::with_capacity(len);
    if len == 0 {
        return g;
    }
    g.push(1.0);
    if len == 1 {
        return g;
    }
    g.push(1.0 - y / n);
    for k in 1..len - 1 {
        let kf = k as f64;
        let next = ((2.0 * kf + n - y) * g[k] - kf * g[k - 1]) / (kf + n);
        g.push(next);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial() {
        assert_eq!(kummer_1f1(2.3, 1.7, 0.0).unwrap(), 1.0);
        assert!((kummer_1f1(2.0, 2.0, 1.0).unwrap() - std::f64::consts::E).abs() < 1e-15);
        assert!((kummer_1f1(1.5, 1.5, -3.0).unwrap() - (-3.0f64).exp()).abs() < 1e-16);
        assert!(kummer_1f1(1.0, -2.0, 1.0).is_err());
    }

    // 50-digit term-by-term oracle.
    #[test]
    fn matches_series_oracle() {
        let cases = [
            (3.0, 2.0, -1.5, 0.055_782_540_037_107_457),
            (0.7, 3.5, 12.3, 543.857_747_812_135_75),
            (-2.5, 1.5, -30.0, 919.289_081_150_395),
            (4.2, 0.5, -20.0, 1.188_438_065_971_755_5e-4),
        ];
        for (a, b, z, want) in cases {
            let got = kummer_1f1(a, b, z).unwrap();
            assert!((got / want - 1.0).abs() < 1e-12, "{a} {b} {z}: {got} vs {want}");
        }
    }

    #[test]
    fn laguerre_matches_terminating_series() {
        for &n in &[1.0, 2.0, 5.0] {
            for &y in &[0.2, 1.7, 6.0] {
                let g = laguerre_normalized(n, y, 12);
                for (l, gl) in g.iter().enumerate() {
                    let direct = kummer_1f1(-(l as f64), n, y).unwrap_or_else(|_| unreachable!());
                    assert!((gl - direct).abs() < 1e-10 * direct.abs().max(1.0), "{n} {y} {l}");
                }
            }
        }
    }
}
