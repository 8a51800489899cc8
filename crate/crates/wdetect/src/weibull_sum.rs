//! Sums of i.i.d. Weibull pulse powers: moments, the α-μ moment-matched
//! approximation, and the exact Laguerre-type series density.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::quad::kronrod15;
use crate::special::{digamma, laguerre_normalized, ln_gamma_real, regularized_p};

/// Per-pulse law: `f(ξ) = α̃ ξ^{α̃-1}/Ω̃ · exp(-ξ^α̃/Ω̃)`, so `Ω̃ = E[ξ^α̃]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullParams {
    pub alpha_tilde: f64,
    pub omega_tilde: f64,
}

impl WeibullParams {
    pub fn new(alpha_tilde: f64, omega_tilde: f64) -> Result<Self> {
        if !(alpha_tilde > 0.0 && alpha_tilde.is_finite() && omega_tilde > 0.0 && omega_tilde.is_finite()) {
            return Err(Error::domain(format!(
                "Weibull parameters must be positive, got ({alpha_tilde}, {omega_tilde})"
            )));
        }
        Ok(Self { alpha_tilde, omega_tilde })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let a = self.alpha_tilde;
        let o = self.omega_tilde;
        (a.ln() + (a - 1.0) * x.ln() - o.ln() - x.powf(a) / o).exp()
    }
}

/// `f(η) = α μ^μ η^{αμ-1} exp(-μ η^α/Ω) / (Ω^μ Γ(μ))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaMuParams {
    pub alpha: f64,
    pub mu: f64,
    pub omega: f64,
}

impl AlphaMuParams {
    pub fn new(alpha: f64, mu: f64, omega: f64) -> Result<Self> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !(ok(alpha) && ok(mu) && ok(omega)) {
            return Err(Error::domain(format!(
                "alpha-mu parameters must be positive, got ({alpha}, {mu}, {omega})"
            )));
        }
        Ok(Self { alpha, mu, omega })
    }

    /// `E[η^k]`.
    pub fn moment(&self, k: f64) -> Result<f64> {
        let (a, m, o) = (self.alpha, self.mu, self.omega);
        Ok((k / a * (o.ln() - m.ln()) + ln_gamma_real(m + k / a)? - ln_gamma_real(m)?).exp())
    }

    pub fn cdf(&self, eta: f64) -> Result<f64> {
        if eta <= 0.0 {
            return Ok(0.0);
        }
        regularized_p(self.mu, self.mu * eta.powf(self.alpha) / self.omega)
    }
}

/// Raw moments `E[η]`, `E[η²]`, `E[η⁴]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub m1: f64,
    pub m2: f64,
    pub m4: f64,
}

/// `E[ξ^k] = Ω̃^{k/α̃} Γ(1 + k/α̃)`.
pub fn weibull_moment(p: &WeibullParams, k: f64) -> f64 {
    if k == 0.0 {
        return 1.0;
    }
    let r = k / p.alpha_tilde;
    (r * p.omega_tilde.ln() + ln_gamma_real(1.0 + r).unwrap_or(f64::INFINITY)).exp()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Exact `E[η]`, `E[η²]`, `E[η⁴]` for `η = ξ_1 + … + ξ_n`.
///
/// The multinomial expansion is applied one pulse at a time:
/// `E[(S+ξ)^p] = Σ_i C(p,i) E[S^i] E[ξ^{p-i}]`. Large `n` switches to
/// log-domain accumulation (all terms are positive).
pub fn sum_moments(p: &WeibullParams, n: usize) -> Result<MomentSet> {
    if n == 0 {
        return Err(Error::domain("pulse count must be positive"));
    }
    let xi: Vec<f64> = (0..=4).map(|k| weibull_moment(p, k as f64)).collect();
    if xi.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow("pulse moments"));
    }
    let raw = if 4 * n >= 60 {
        let lxi: Vec<f64> = xi.iter().map(|v| v.ln()).collect();
        let mut ls = lxi.clone();
        for _ in 1..n {
            let next: Vec<f64> = (0..=4)
                .map(|q| {
                    let terms: Vec<f64> =
                        (0..=q).map(|i| binomial(q, i).ln() + ls[i] + lxi[q - i]).collect();
                    log_sum_exp(&terms)
                })
                .collect();
            ls = next;
        }
        ls.iter().map(|v| v.exp()).collect::<Vec<_>>()
    } else {
        let mut s = xi.clone();
        for _ in 1..n {
            let next: Vec<f64> = (0..=4)
                .map(|q| (0..=q).map(|i| binomial(q, i) * s[i] * xi[q - i]).sum())
                .collect();
            s = next;
        }
        s
    };
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow("sum moments"));
    }
    Ok(MomentSet {
        m1: raw[1],
        m2: raw[2],
        m4: raw[4],
    })
}

fn fit_residual(ln_a: f64, ln_m: f64, t1: f64, t2: f64) -> Result<([f64; 2], [[f64; 2]; 2])> {
    let a = ln_a.exp();
    let m = ln_m.exp();
    let lg = |k: f64| ln_gamma_real(m + k / a);
    let ps = |k: f64| digamma(m + k / a);
    let (l0, l1, l2, l4) = (lg(0.0)?, lg(1.0)?, lg(2.0)?, lg(4.0)?);
    let (p0, p1, p2, p4) = (ps(0.0)?, ps(1.0)?, ps(2.0)?, ps(4.0)?);
    let r = [l2 + l0 - 2.0 * l1 - t1, l4 + l0 - 2.0 * l2 - t2];
    // d/d ln α of lnΓ(μ + k/α) is -(k/α) ψ(μ + k/α); d/d ln μ is μ ψ(μ + k/α).
    let da = |k: f64, p: f64| -(k / a) * p;
    let jac = [
        [da(2.0, p2) - 2.0 * da(1.0, p1), m * (p2 + p0 - 2.0 * p1)],
        [da(4.0, p4) - 2.0 * da(2.0, p2), m * (p4 + p0 - 2.0 * p2)],
    ];
    Ok((r, jac))
}

fn norm(r: [f64; 2]) -> f64 {
    r[0].abs().max(r[1].abs())
}

/// Damped Newton from one start; returns `(ln α, ln μ, residual)`.
fn newton(mut x: [f64; 2], t1: f64, t2: f64) -> Option<(f64, f64, f64)> {
    let (mut r, mut j) = fit_residual(x[0], x[1], t1, t2).ok()?;
    for _ in 0..200 {
        let res = norm(r);
        if res < 1e-13 {
            break;
        }
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let mut dx = [
            -(j[1][1] * r[0] - j[0][1] * r[1]) / det,
            -(-j[1][0] * r[0] + j[0][0] * r[1]) / det,
        ];
        let big = dx[0].abs().max(dx[1].abs());
        if big > 2.0 {
            dx = [dx[0] * 2.0 / big, dx[1] * 2.0 / big];
        }
        let mut step = 1.0;
        loop {
            let trial = [x[0] + step * dx[0], x[1] + step * dx[1]];
            if let Ok((rt, jt)) = fit_residual(trial[0], trial[1], t1, t2) {
                if norm(rt) < res {
                    x = trial;
                    r = rt;
                    j = jt;
                    break;
                }
            }
            step *= 0.5;
            if step < 1e-10 {
                return Some((x[0], x[1], res));
            }
        }
    }
    Some((x[0], x[1], norm(r)))
}

const FIT_TOL: f64 = 1e-10;

/// Moment-matched α-μ parameters for the sum of `n` i.i.d. pulses.
///
/// `(ln α, ln μ)` solve the second- and fourth-moment ratio equations by damped
/// Newton from each point of a 16×16 log grid; the best residual wins, ties
/// broken by the smaller `(α, μ)`. `Ω` then follows from the first moment.
pub fn fit_alpha_mu(p: &WeibullParams, n: usize, exec: Exec) -> Result<AlphaMuParams> {
    let m = sum_moments(p, n)?;
    fit_moments(&m, exec)
}

pub fn fit_moments(m: &MomentSet, exec: Exec) -> Result<AlphaMuParams> {
    let t1 = (m.m2 / (m.m1 * m.m1)).ln();
    let t2 = (m.m4 / (m.m2 * m.m2)).ln();
    if !(t1 > 0.0 && t2 > 0.0) {
        return Err(Error::domain("moment ratios violate Cauchy-Schwarz"));
    }
    const G: usize = 16;
    let grid = |lo: f64, hi: f64, i: usize| lo.ln() + (hi / lo).ln() * i as f64 / (G - 1) as f64;
    let runs = exec.map_range(G * G, |idx| {
        let start = [grid(0.1, 8.0, idx / G), grid(0.1, 64.0, idx % G)];
        newton(start, t1, t2)
    });
    let best = runs
        .into_iter()
        .flatten()
        .filter(|r| r.2.is_finite())
        .min_by(|a, b| a.2.total_cmp(&b.2).then(a.0.total_cmp(&b.0)).then(a.1.total_cmp(&b.1)));
    let (la, lm, res) = best.ok_or(Error::NoConvergence {
        what: "alpha-mu fit",
        residual: f64::INFINITY,
    })?;
    if res >= FIT_TOL {
        return Err(Error::NoConvergence {
            what: "alpha-mu fit",
            residual: res,
        });
    }
    let alpha = la.exp();
    let mu = lm.exp();
    let ln_omega = alpha * (m.m1.ln() + mu.ln() / alpha + ln_gamma_real(mu)? - ln_gamma_real(mu + 1.0 / alpha)?);
    AlphaMuParams::new(alpha, mu, ln_omega.exp())
}

/// α-μ density; zero for `η <= 0` and on underflow.
pub fn alpha_mu_pdf(q: &AlphaMuParams, eta: f64) -> f64 {
    if eta <= 0.0 {
        return 0.0;
    }
    let (a, m, o) = (q.alpha, q.mu, q.omega);
    let lg = ln_gamma_real(m).unwrap_or(f64::INFINITY);
    let v = (a.ln() + m * m.ln() + (a * m - 1.0) * eta.ln() - m * eta.powf(a) / o - m * o.ln() - lg).exp();
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

const MAX_OUTER: usize = 500;
// Finite sums for the per-pulse coefficients are trusted while the largest
// term exceeds the result by at most this factor.
const CANCELLATION_LIMIT: f64 = 1e6;

/// Exact density of the i.i.d. sum as a series in normalized Laguerre
/// polynomials, with coefficients shared across `η`.
#[derive(Debug, Clone)]
pub struct ExactSumPdf {
    n: usize,
    chi: f64,
    ln_norm: f64,
    coeffs: Vec<f64>,
}

impl ExactSumPdf {
    pub fn new(p: &WeibullParams, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("pulse count must be positive"));
        }
        let chi = 2.0 * p.omega_tilde;
        let v = pulse_coefficients(p, chi, MAX_OUTER)?;
        // N-fold self-convolution.
        let mut a = vec![0.0; MAX_OUTER];
        a[0] = 1.0;
        for _ in 0..n {
            let mut next = vec![0.0; MAX_OUTER];
            for (l, slot) in next.iter_mut().enumerate() {
                *slot = (0..=l).map(|i| a[i] * v[l - i]).sum();
            }
            a = next;
        }
        let nf = n as f64;
        let ln_norm = -nf * chi.ln() - ln_gamma_real(nf)?;
        Ok(Self { n, chi, ln_norm, coeffs: a })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Partial sum until three consecutive terms fall below `tol` times the
    /// largest partial sum so far.
    pub fn eval(&self, eta: f64, tol: f64) -> Result<f64> {
        if eta <= 0.0 {
            return Ok(0.0);
        }
        let nf = self.n as f64;
        let y = eta / self.chi;
        let g = laguerre_normalized(nf, y, MAX_OUTER);
        let mut sum = 0.0;
        let mut scale: f64 = 0.0;
        let mut quiet = 0;
        let mut last = f64::INFINITY;
        for (l, (&gl, &al)) in g.iter().zip(&self.coeffs).enumerate() {
            let term = gl * al;
            sum += term;
            // In the far tail the sum cancels down to far below its early
            // partials, so terms are judged against the largest partial seen.
            scale = scale.max(sum.abs());
            last = term.abs();
            if last < tol * scale {
                quiet += 1;
                if quiet >= 3 && l >= 3 {
                    let v = ((nf - 1.0) * eta.ln() - y + self.ln_norm).exp() * sum;
                    return Ok(v.max(0.0));
                }
            } else {
                quiet = 0;
            }
        }
        Err(Error::NoConvergence {
            what: "exact sum density",
            residual: last / scale,
        })
    }
}

/// One-off evaluation of the exact sum density.
pub fn exact_sum_pdf(p: &WeibullParams, n: usize, eta: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::domain("tolerance must be positive"));
    }
    ExactSumPdf::new(p, n)?.eval(eta, tol)
}

/// `V(k) = Σ_j (-1)^j C(k,j) E[ξ^j] / (χ^j j!)`, i.e. `E[L_k(ξ/χ)]`.
///
/// The finite sum cancels catastrophically as `k` grows; once that happens the
/// expectation is integrated directly in `s = √(ξ/χ)`, where `L_k` oscillates
/// with a uniform period.
fn pulse_coefficients(p: &WeibullParams, chi: f64, len: usize) -> Result<Vec<f64>> {
    let a = p.alpha_tilde;
    let lo = p.omega_tilde.ln();
    let ln_c: Vec<f64> = (0..len)
        .map(|j| {
            let jf = j as f64;
            Ok(jf / a * lo + ln_gamma_real(1.0 + jf / a)? - jf * chi.ln() - ln_gamma_real(jf + 1.0)?)
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(len);
    for k in 0..len {
        let mut sum = 0.0;
        let mut peak: f64 = 0.0;
        for (j, lc) in ln_c.iter().enumerate().take(k + 1) {
            let t = (binomial(k, j).ln() + lc).exp();
            peak = peak.max(t);
            sum += if j % 2 == 0 { t } else { -t };
        }
        if peak > CANCELLATION_LIMIT * sum.abs() || !sum.is_finite() {
            break;
        }
        out.push(sum);
    }
    if out.len() < len {
        let rest = laguerre_expectations(p, chi, len)?;
        out.extend_from_slice(&rest[out.len()..]);
    }
    Ok(out)
}

fn laguerre_expectations(p: &WeibullParams, chi: f64, len: usize) -> Result<Vec<f64>> {
    let a = p.alpha_tilde;
    let o = p.omega_tilde;
    // Beyond ξ^α̃/Ω̃ = 60 the density is below e^{-60}.
    let s_max = ((60.0 * o).powf(1.0 / a) / chi).sqrt();
    let period = std::f64::consts::PI / (len as f64).sqrt();
    let panels = ((s_max / (0.25 * period)).ceil() as usize).max(64);
    let h = s_max / panels as f64;
    let mut acc = vec![0.0; len];
    let mut lag = vec![0.0; len];
    for i in 0..panels {
        for (s, w) in kronrod15(i as f64 * h, (i + 1) as f64 * h) {
            let xi = chi * s * s;
            let weight = w * p.pdf(xi) * 2.0 * chi * s;
            if weight == 0.0 {
                continue;
            }
            let t = xi / chi;
            lag[0] = 1.0;
            if len > 1 {
                lag[1] = 1.0 - t;
            }
            for k in 1..len - 1 {
                let kf = k as f64;
                lag[k + 1] = ((2.0 * kf + 1.0 - t) * lag[k] - kf * lag[k - 1]) / (kf + 1.0);
            }
            for (slot, l) in acc.iter_mut().zip(&lag) {
                *slot += weight * l;
            }
        }
    }
    if acc.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow("Laguerre expectations"));
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;
    use proptest::prelude::*;

    fn w(a: f64, o: f64) -> WeibullParams {
        WeibullParams::new(a, o).unwrap()
    }

    #[test]
    fn weibull_moment_examples() {
        assert_eq!(weibull_moment(&w(1.7, 3.0), 0.0), 1.0);
        assert!((weibull_moment(&w(1.0, 2.0), 1.0) - 2.0).abs() < 1e-14);
        // (1/2)^{4/3} Γ(7/3), 30-digit direct evaluation.
        assert!((weibull_moment(&w(1.5, 0.5), 2.0) - 0.472_505_538_683_691_7).abs() < 1e-14);
    }

    #[test]
    fn sum_moment_examples() {
        let p = w(1.0, 1.0);
        let m = sum_moments(&p, 2).unwrap();
        assert!((m.m2 - 6.0).abs() < 1e-13);
        let one = sum_moments(&w(1.5, 0.5), 1).unwrap();
        assert_eq!(one.m1, weibull_moment(&w(1.5, 0.5), 1.0));
        assert_eq!(one.m4, weibull_moment(&w(1.5, 0.5), 4.0));
        // Exponential pulses sum to a gamma law: E[η^k] = Ω^k Γ(n+k)/Γ(n).
        let m = sum_moments(&w(1.0, 0.7), 20).unwrap();
        let g = |k: f64| 0.7f64.powf(k) * (ln_gamma_real(20.0 + k).unwrap() - ln_gamma_real(20.0).unwrap()).exp();
        assert!((m.m4 / g(4.0) - 1.0).abs() < 1e-12);
        assert!((m.m2 / g(2.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_exact_for_one_pulse() {
        for &(a, o) in &[(0.5, 2.0), (1.5, 0.5), (3.0, 7.0), (0.25, 1.0)] {
            let f = fit_alpha_mu(&w(a, o), 1, Exec::Sequential).unwrap();
            assert!((f.alpha - a).abs() < 1e-9 && (f.mu - 1.0).abs() < 1e-9 && (f.omega - o).abs() < 1e-9, "{f:?}");
        }
    }

    #[test]
    fn fit_of_exponential_pulses_is_gamma() {
        let f = fit_alpha_mu(&w(1.0, 2.0), 5, Exec::Sequential).unwrap();
        assert!((f.alpha - 1.0).abs() < 1e-8 && (f.mu - 5.0).abs() < 1e-7 && (f.omega - 10.0).abs() < 1e-7, "{f:?}");
    }

    #[test]
    fn fit_reproduces_moment_ratios() {
        for n in [2, 3, 4, 8] {
            let p = w(1.5, 0.5);
            let m = sum_moments(&p, n).unwrap();
            let f = fit_alpha_mu(&p, n, Exec::Parallel).unwrap();
            assert!((f.moment(1.0).unwrap() / m.m1 - 1.0).abs() < 1e-12);
            let r1 = f.moment(2.0).unwrap() / f.moment(1.0).unwrap().powi(2);
            let r2 = f.moment(4.0).unwrap() / f.moment(2.0).unwrap().powi(2);
            assert!((r1.ln() - (m.m2 / (m.m1 * m.m1)).ln()).abs() < 1e-10);
            assert!((r2.ln() - (m.m4 / (m.m2 * m.m2)).ln()).abs() < 1e-10);
        }
    }

    #[test]
    fn fit_independent_of_exec_mode() {
        let p = w(0.5, 2.0);
        assert_eq!(
            fit_alpha_mu(&p, 5, Exec::Sequential).unwrap(),
            fit_alpha_mu(&p, 5, Exec::Parallel).unwrap()
        );
    }

    #[test]
    fn alpha_mu_pdf_examples() {
        let q = AlphaMuParams::new(1.0, 1.0, 1.0).unwrap();
        assert!((alpha_mu_pdf(&q, 0.5) - (-0.5f64).exp()).abs() < 1e-15);
        let q = AlphaMuParams::new(0.7, 3.2, 1.9).unwrap();
        let total = quad::integrate_to_inf(|x| alpha_mu_pdf(&q, x), 0.0, 1e-12, 1e-12, 1_000_000).unwrap();
        assert!((total.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn exact_single_pulse_is_weibull() {
        let p = w(1.0, 0.7);
        for &x in &[0.1, 0.5, 1.3, 3.0] {
            let e = exact_sum_pdf(&p, 1, x, 1e-13).unwrap();
            assert!((e - p.pdf(x)).abs() < 1e-8, "{x}: {e} vs {}", p.pdf(x));
        }
    }

    #[test]
    fn exact_two_pulses_matches_convolution() {
        let p = w(1.5, 0.5);
        let conv = quad::integrate(|t| p.pdf(t) * p.pdf(1.0 - t), 0.0, 1.0, 1e-14, 1e-14, 1_000_000).unwrap();
        // Two pulses converge slowly (terms near 1e-9 persist past l = 400).
        let e = exact_sum_pdf(&p, 2, 1.0, 1e-8).unwrap();
        assert!((e - conv.value).abs() < 1e-5, "{e} vs {}", conv.value);
    }

    // 90-digit evaluations of the same series.
    #[test]
    fn exact_matches_reference_values() {
        let p = w(1.5, 0.5);
        let cases = [
            (2, 0.3, 0.246_545_536_539),
            (2, 3.0, 0.012_275_649_108_3),
            (4, 1.0, 0.131_578_294_271),
            (4, 3.0, 0.281_627_643_23),
            (8, 3.0, 0.146_913_685_409),
            (8, 8.0, 0.006_092_495_923_48),
        ];
        for (n, eta, want) in cases {
            let (tol, acc) = if n == 2 { (1e-8, 1e-5) } else { (1e-11, 1e-9) };
            let got = ExactSumPdf::new(&p, n).unwrap().eval(eta, tol).unwrap();
            assert!((got - want).abs() < acc, "n={n} eta={eta}: {got} vs {want}");
        }
    }

    #[test]
    fn sum_moments_match_exact_density() {
        let p = w(1.5, 0.5);
        for n in [3, 2] {
            let m = sum_moments(&p, n).unwrap();
            let e = ExactSumPdf::new(&p, n).unwrap();
            let grid: Vec<(f64, f64)> = (0..240)
                .flat_map(|i| kronrod15(i as f64 * 0.05, (i + 1) as f64 * 0.05))
                .map(|(x, wt)| {
                    // Close to η = 0 the terms decay too slowly for the tight
                    // tolerance within 500 terms; the density there is ~η^{n-1}.
                    let v = e.eval(x, 1e-8).or_else(|_| e.eval(x, 1e-6)).unwrap();
                    (x, wt * v)
                })
                .collect();
            let mass: f64 = grid.iter().map(|g| g.1).sum();
            assert!((mass - 1.0).abs() < 1e-6, "n={n} mass {mass}");
            for (k, want) in [(1, m.m1), (2, m.m2), (4, m.m4)] {
                let got: f64 = grid.iter().map(|(x, wt)| x.powi(k) * wt).sum();
                assert!((got / want - 1.0).abs() < 1e-5, "n={n} k={k}: {got} vs {want}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn fitted_law_integrates_to_one(a in 0.3f64..4.0, o in 0.2f64..5.0, n in 1usize..12) {
            let q = fit_alpha_mu(&w(a, o), n, Exec::Sequential).unwrap();
            let total = quad::integrate_to_inf(|x| alpha_mu_pdf(&q, x), 0.0, 1e-10, 1e-10, 1_000_000).unwrap();
            prop_assert!((total.value - 1.0).abs() < 1e-6);
            prop_assert!((q.moment(1.0).unwrap() / sum_moments(&w(a, o), n).unwrap().m1 - 1.0).abs() < 1e-10);
        }

        #[test]
        fn moments_satisfy_cauchy_schwarz(a in 0.2f64..6.0, o in 0.1f64..10.0, n in 1usize..40) {
            let m = sum_moments(&w(a, o), n).unwrap();
            prop_assert!(m.m2 >= m.m1 * m.m1 && m.m4 >= m.m2 * m.m2);
        }
    }
}
