//! Multivariate Fox H-function by iterated Mellin–Barnes contour integration,
//! and the detection probability expressed through it.
//!
//! `H = (2πi)^{-L} ∫…∫ Θ(s) Π_l x_l^{-s_l} ds`, with
//! `Θ(s) = Π_j Γ(δ_j + Σ_l d_{jl} s_l) / Π_j Γ(β_j + Σ_l b_{jl} s_l)`.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::detection::{psi, DetectorConfig, EvalResult};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::quad::kronrod15;
use crate::special::{ln_gamma, ln_gamma_real};
use crate::weibull_sum::AlphaMuParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoxHSpec {
    pub x: Vec<Complex64>,
    pub delta: Vec<f64>,
    pub dmat: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    pub bmat: Vec<Vec<f64>>,
}

impl FoxHSpec {
    pub fn new(
        x: Vec<Complex64>,
        delta: Vec<f64>,
        dmat: Vec<Vec<f64>>,
        beta: Vec<f64>,
        bmat: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let l = x.len();
        if l == 0 {
            return Err(Error::domain("Fox H needs at least one variable"));
        }
        if delta.len() != dmat.len() || beta.len() != bmat.len() {
            return Err(Error::domain("gamma row counts disagree"));
        }
        if dmat.iter().chain(&bmat).any(|r| r.len() != l) {
            return Err(Error::domain("coefficient rows must have one entry per variable"));
        }
        let finite = |v: &f64| v.is_finite();
        if !(delta.iter().all(finite) && beta.iter().all(finite) && dmat.iter().chain(&bmat).flatten().all(finite)) {
            return Err(Error::domain("non-finite Fox H coefficient"));
        }
        if x.iter().any(|v| !(v.re.is_finite() && v.im.is_finite()) || v.norm() == 0.0) {
            return Err(Error::domain("Fox H arguments must be finite and non-zero"));
        }
        for col in 0..l {
            if dmat.iter().all(|r| r[col] == 0.0) {
                return Err(Error::domain(format!("variable {col} has no numerator gamma")));
            }
        }
        Ok(Self { x, delta, dmat, beta, bmat })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Real parts of all numerator arguments at `s = offsets`.
    fn anchor_args(&self, offsets: &[f64]) -> Vec<f64> {
        self.delta
            .iter()
            .zip(&self.dmat)
            .map(|(d, row)| d + row.iter().zip(offsets).map(|(c, e)| c * e).sum::<f64>())
            .collect()
    }

    fn feasible(&self, offsets: &[f64]) -> bool {
        self.anchor_args(offsets).iter().all(|&a| a > 0.0)
    }
}

/// Path followed by one integration variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContourShape {
    /// `s = ε + it`, `t ∈ [-W, W]`.
    Vertical,
    /// Horizontal legs `Im s = ∓h` from `Re s = -W` to `ε`, joined by a short
    /// vertical piece through `ε`; wraps the left pole families.
    Loop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourConfig {
    pub offsets: Vec<f64>,
    pub half_length: f64,
    pub max_refinements: u32,
    pub shapes: Vec<ContourShape>,
    /// Integration order, outermost variable first.
    pub order: Vec<usize>,
    /// Half height of loop legs.
    pub loop_height: f64,
    /// Use `Log(-1) = -iπ` for negative real arguments instead of `+iπ`.
    pub lower_branch: bool,
    /// Kernel evaluations allowed over all refinement levels.
    pub max_nodes: u64,
}

impl ContourConfig {
    pub fn vertical(offsets: Vec<f64>) -> Self {
        let l = offsets.len();
        Self {
            offsets,
            half_length: 50.0,
            max_refinements: 3,
            shapes: vec![ContourShape::Vertical; l],
            order: (0..l).collect(),
            loop_height: 0.5,
            lower_branch: false,
            max_nodes: 100_000_000,
        }
    }

    fn validate(&self, spec: &FoxHSpec) -> Result<()> {
        let l = spec.dim();
        if self.offsets.len() != l || self.shapes.len() != l || self.order.len() != l {
            return Err(Error::domain("contour dimensions disagree with spec"));
        }
        let mut seen = vec![false; l];
        for &o in &self.order {
            if o >= l || seen[o] {
                return Err(Error::domain("integration order must be a permutation"));
            }
            seen[o] = true;
        }
        if !(self.half_length > 0.0 && self.loop_height > 0.0) {
            return Err(Error::domain("contour lengths must be positive"));
        }
        if !spec.feasible(&self.offsets) {
            return Err(Error::domain("offsets leave a numerator gamma argument non-positive"));
        }
        for (ax, shape) in self.shapes.iter().enumerate() {
            if *shape != ContourShape::Loop {
                continue;
            }
            // A loop encloses every left pole of its variable; coupled rows must
            // therefore only contribute right poles in it.
            for row in &spec.dmat {
                let coupled = row.iter().filter(|c| **c != 0.0).count() > 1;
                if coupled && row[ax] > 0.0 {
                    return Err(Error::domain(format!(
                        "loop contour on variable {ax} would enclose poles of a coupled gamma"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn ln_x(spec: &FoxHSpec, lower_branch: bool) -> Vec<Complex64> {
    spec.x
        .iter()
        .map(|x| {
            let mut v = x.ln();
            if lower_branch && x.im == 0.0 && x.re < 0.0 {
                v.im = -PI;
            }
            v
        })
        .collect()
}

fn ln_theta_rows(spec: &FoxHSpec, s: &[Complex64]) -> Result<Option<Complex64>> {
    let arg = |d: f64, row: &[f64]| -> Complex64 {
        row.iter().zip(s).fold(Complex64::new(d, 0.0), |acc, (c, sv)| acc + c * sv)
    };
    let mut total = Complex64::new(0.0, 0.0);
    for (j, (d, row)) in spec.delta.iter().zip(&spec.dmat).enumerate() {
        total += ln_gamma(arg(*d, row)).map_err(|e| match e {
            Error::Pole { re, im, .. } => Error::Pole { re, im, factor: Some(j) },
            other => other,
        })?;
    }
    for (b, row) in spec.beta.iter().zip(&spec.bmat) {
        match ln_gamma(arg(*b, row)) {
            Ok(v) => total -= v,
            // 1/Γ vanishes at its poles.
            Err(Error::Pole { .. }) => return Ok(None),
            Err(e) => return Err(e),
        }
    }
    Ok(Some(total))
}

/// The gamma-ratio kernel `Θ(s)`.
pub fn theta(spec: &FoxHSpec, s: &[Complex64]) -> Result<Complex64> {
    if s.len() != spec.dim() {
        return Err(Error::domain("point dimension disagrees with spec"));
    }
    Ok(ln_theta_rows(spec, s)?.map_or(Complex64::new(0.0, 0.0), |v| v.exp()))
}

const GRID: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];

/// First feasible offset vector on the grid `{-1, -1/2, 0, 1/2, 1}^L` in
/// lexicographic order. If none exists the grid is refined (spacing halved,
/// range doubled) up to two times.
pub fn choose_offsets(spec: &FoxHSpec) -> Result<ContourConfig> {
    let l = spec.dim();
    for level in 0..3 {
        let scale = f64::powi(2.0, level);
        let values: Vec<f64> = if level == 0 {
            GRID.to_vec()
        } else {
            let step = 0.5 / scale;
            let count = (2.0 * scale / step).round() as i64;
            (-count..=count).map(|i| i as f64 * step).collect()
        };
        let k = values.len();
        let total = k.pow(l as u32);
        for idx in 0..total {
            let mut rem = idx;
            let mut eps = vec![0.0; l];
            for slot in eps.iter_mut().rev() {
                *slot = values[rem % k];
                rem /= k;
            }
            if spec.feasible(&eps) {
                return Ok(ContourConfig::vertical(eps));
            }
        }
    }
    Err(Error::NoFeasibleOffset)
}

/// Complex number stored as mantissa times `e^exp`.
#[derive(Debug, Clone, Copy)]
struct Scaled {
    m: Complex64,
    e: f64,
}

impl Scaled {
    const ZERO: Scaled = Scaled {
        m: Complex64::new(0.0, 0.0),
        e: f64::NEG_INFINITY,
    };
    const ONE: Scaled = Scaled {
        m: Complex64::new(1.0, 0.0),
        e: 0.0,
    };

    fn from_log(l: Complex64, w: Complex64) -> Self {
        Scaled {
            m: Complex64::from_polar(1.0, l.im) * w,
            e: l.re,
        }
    }

    fn is_zero(self) -> bool {
        self.e == f64::NEG_INFINITY || self.m.norm_sqr() == 0.0
    }

    fn mul(self, o: Scaled) -> Self {
        if self.is_zero() || o.is_zero() {
            return Scaled::ZERO;
        }
        let m = self.m * o.m;
        let n = m.norm();
        Scaled { m: m / n, e: self.e + o.e + n.ln() }
    }

    fn add(self, o: Scaled) -> Self {
        let mut acc = Acc::default();
        acc.push(self);
        acc.push(o);
        acc.get()
    }

    fn log_abs(self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.e + self.m.norm().ln()
        }
    }

    fn to_complex(self) -> Complex64 {
        if self.is_zero() {
            Complex64::new(0.0, 0.0)
        } else {
            self.m * self.e.exp()
        }
    }
}

/// Running sum of `Scaled` terms; rescales only when a larger exponent shows up.
/// Also carries the sum of magnitudes, which sets the rounding floor.
#[derive(Debug, Clone, Copy)]
struct Acc {
    sum: Complex64,
    abs: f64,
    e: f64,
}

impl Default for Acc {
    fn default() -> Self {
        Acc { sum: Complex64::new(0.0, 0.0), abs: 0.0, e: f64::NEG_INFINITY }
    }
}

impl Acc {
    fn push(&mut self, v: Scaled) {
        let a = v.log_abs();
        self.push_with_abs(v, a);
    }

    /// `abs_log` is the log of the magnitude sum behind `v`.
    fn push_with_abs(&mut self, v: Scaled, abs_log: f64) {
        if abs_log == f64::NEG_INFINITY {
            return;
        }
        let top = v.e.max(abs_log);
        if top > self.e {
            if self.e > f64::NEG_INFINITY {
                let r = (self.e - top).exp();
                self.sum *= r;
                self.abs *= r;
            }
            self.e = top;
        }
        if !v.is_zero() {
            self.sum += v.m * (v.e - self.e).exp();
        }
        self.abs += (abs_log - self.e).exp();
    }

    fn abs_log(&self) -> f64 {
        if self.abs == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.e + self.abs.ln()
        }
    }

    fn get(&self) -> Scaled {
        let n = self.sum.norm();
        if n == 0.0 || self.e == f64::NEG_INFINITY {
            return Scaled::ZERO;
        }
        Scaled { m: self.sum / n, e: self.e + n.ln() }
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    s: Complex64,
    w: Complex64,
    /// Cached log of the rows that involve only this variable, with `x^{-s}`;
    /// `None` where a reciprocal gamma vanishes.
    single: Option<Complex64>,
}

/// Nodes of one variable: a central block that is always summed, and branches
/// walked outward panel by panel until the contributions die out.
#[derive(Debug, Clone)]
struct AxisNodes {
    center: Vec<Vec<Node>>,
    branches: Vec<Vec<Vec<Node>>>,
}

impl AxisNodes {
    fn nodes_mut(&mut self) -> impl Iterator<Item = &mut Node> {
        self.center.iter_mut().chain(self.branches.iter_mut().flatten()).flatten()
    }
}

fn panel(a: f64, b: f64, map: impl Fn(f64) -> Complex64, dir: Complex64) -> Vec<Node> {
    // 1/(2πi) folded into the weights.
    let norm = Complex64::new(0.0, -1.0 / (2.0 * PI));
    kronrod15(a, b)
        .map(|(t, w)| Node {
            s: map(t),
            w: dir * w * norm,
            single: None,
        })
        .collect()
}

fn build_axis(shape: ContourShape, eps: f64, half_length: f64, base: f64, height: f64, level: u32) -> AxisNodes {
    let shrink = f64::powi(2.0, level as i32);
    let w_max = half_length * shrink;
    let i = Complex64::i();
    match shape {
        ContourShape::Vertical => {
            let mut up = Vec::new();
            let mut down = Vec::new();
            let mut t = 0.0;
            while t < w_max {
                let width = ((base + 0.25 * t) / shrink).min(4.0 / shrink);
                let next = (t + width).min(w_max);
                up.push(panel(t, next, |v| Complex64::new(eps, v), i));
                down.push(panel(-next, -t, |v| Complex64::new(eps, v), i));
                t = next;
            }
            AxisNodes {
                center: Vec::new(),
                branches: vec![up, down],
            }
        }
        ContourShape::Loop => {
            let pieces = (4.0 * shrink) as usize;
            let step = 2.0 * height / pieces as f64;
            let center = (0..pieces)
                .map(|k| {
                    let a = -height + k as f64 * step;
                    panel(a, a + step, |v| Complex64::new(eps, v), i)
                })
                .collect();
            let leg_width = base.clamp(0.5, 1.0) / shrink;
            let mut lower = Vec::new();
            let mut upper = Vec::new();
            let mut x = eps;
            let end = -w_max;
            while x > end {
                let next = (x - leg_width).max(end);
                // Lower leg runs left to right, upper leg right to left.
                lower.push(panel(next, x, |v| Complex64::new(v, -height), Complex64::new(1.0, 0.0)));
                upper.push(panel(next, x, |v| Complex64::new(v, height), Complex64::new(-1.0, 0.0)));
                x = next;
            }
            AxisNodes {
                center,
                branches: vec![lower, upper],
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Row {
    delta: f64,
    coef: Vec<f64>,
    numerator: bool,
}

impl Row {
    fn axes(&self) -> impl Iterator<Item = usize> + '_ {
        self.coef.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(i, _)| i)
    }

    fn arg(&self, s: &[Complex64]) -> Complex64 {
        self.coef.iter().zip(s).fold(Complex64::new(self.delta, 0.0), |acc, (c, v)| acc + c * v)
    }

    /// `Some(±lnΓ)`, or `None` at a pole of a reciprocal gamma.
    fn ln_factor(&self, s: &[Complex64]) -> Result<Option<Complex64>> {
        match ln_gamma(self.arg(s)) {
            Ok(v) => Ok(Some(if self.numerator { v } else { -v })),
            Err(Error::Pole { .. }) if !self.numerator => Ok(None),
            Err(e) => Err(e),
        }
    }
}

// A branch ends after two consecutive panels below this fraction of the sum.
const BRANCH_CUTOFF: f64 = 1e-17;
// Outer panels evaluated per batch before the cutoff rule is consulted.
const BATCH: usize = 8;

/// Walks one branch applying the cutoff; `panels` yields panel sums lazily.
struct BranchWalk {
    quiet: u32,
    done: bool,
}

impl BranchWalk {
    fn new() -> Self {
        BranchWalk { quiet: 0, done: false }
    }

    fn feed(&mut self, acc: &mut Acc, (v, abs_log): (Scaled, f64)) {
        if self.done {
            return;
        }
        acc.push_with_abs(v, abs_log);
        if abs_log < acc.abs_log() + BRANCH_CUTOFF.ln() {
            self.quiet += 1;
            self.done = self.quiet >= 2;
        } else {
            self.quiet = 0;
        }
    }
}

struct Evaluator<'a> {
    rows: Vec<Row>,
    singles: Vec<Vec<Row>>,
    ln_x: Vec<Complex64>,
    offsets: &'a [f64],
    /// Inner vertical axes whose line is moved to the saddle for each outer point.
    recenter: Vec<bool>,
    axes: Vec<AxisNodes>,
    order: &'a [usize],
    constant: Option<Complex64>,
    visited: std::sync::atomic::AtomicU64,
    budget: u64,
}

impl<'a> Evaluator<'a> {
    fn new(
        rows: Vec<Row>,
        ln_x: &[Complex64],
        mut axes: Vec<AxisNodes>,
        contour: &'a ContourConfig,
        constant: Option<Complex64>,
        budget: u64,
    ) -> Result<Self> {
        let l = ln_x.len();
        let singles: Vec<Vec<Row>> = (0..l)
            .map(|ax| rows.iter().filter(|r| r.axes().eq(std::iter::once(ax))).cloned().collect())
            .collect();
        let recenter: Vec<bool> = (0..l)
            .map(|ax| contour.shapes[ax] == ContourShape::Vertical && contour.order[0] != ax)
            .collect();
        let mut ev = Evaluator {
            rows: Vec::new(),
            singles,
            ln_x: ln_x.to_vec(),
            offsets: &contour.offsets,
            recenter,
            axes: Vec::new(),
            order: &contour.order,
            constant,
            visited: std::sync::atomic::AtomicU64::new(0),
            budget,
        };
        for (ax, nodes) in axes.iter_mut().enumerate() {
            for node in nodes.nodes_mut() {
                node.single = ev.single_log(ax, node.s)?;
            }
        }
        ev.rows = rows.into_iter().filter(|r| r.axes().count() > 1).collect();
        ev.axes = axes;
        Ok(ev)
    }

    fn single_log(&self, axis: usize, s: Complex64) -> Result<Option<Complex64>> {
        let mut point = vec![Complex64::new(0.0, 0.0); self.ln_x.len()];
        point[axis] = s;
        let mut total = -s * self.ln_x[axis];
        for row in &self.singles[axis] {
            match row.ln_factor(&point)? {
                Some(v) => total += v,
                None => return Ok(None),
            }
        }
        Ok(Some(total))
    }

    /// Real part minimizing the integrand magnitude on the real line through
    /// the outer point, inside the strip free of numerator poles. Axes still to
    /// be integrated sit at their anchors.
    fn saddle(&self, pivot: usize, rest: &[usize], point: &[Complex64]) -> f64 {
        let mut tmp = point.to_vec();
        for &a in rest {
            tmp[a] = Complex64::new(self.offsets[a], 0.0);
        }
        tmp[pivot] = Complex64::new(0.0, 0.0);
        let involved: Vec<&Row> = self
            .rows
            .iter()
            .chain(&self.singles[pivot])
            .filter(|r| r.coef[pivot] != 0.0)
            .collect();
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for row in involved.iter().filter(|r| r.numerator) {
            let d = row.coef[pivot];
            let edge = -row.arg(&tmp).re / d;
            if d > 0.0 {
                lo = lo.max(edge);
            } else {
                hi = hi.min(edge);
            }
        }
        let anchor = self.offsets[pivot];
        let lo = if lo.is_finite() { lo } else { anchor - 64.0 };
        let hi = if hi.is_finite() { hi } else { anchor + 64.0 };
        let m = (0.5f64).min((hi - lo) / 4.0);
        let (mut a, mut b) = (lo + m, hi - m);
        if !(b > a) {
            return anchor;
        }
        let lnx = self.ln_x[pivot].re;
        let g = |sigma: f64| -> f64 {
            let mut p = tmp.clone();
            p[pivot] = Complex64::new(sigma, 0.0);
            let mut v = -sigma * lnx;
            for row in &involved {
                match ln_gamma(row.arg(&p)) {
                    Ok(l) => v += if row.numerator { l.re } else { -l.re },
                    Err(_) => return f64::INFINITY,
                }
            }
            v
        };
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let (mut c, mut d) = (b - r * (b - a), a + r * (b - a));
        let (mut gc, mut gd) = (g(c), g(d));
        for _ in 0..48 {
            if gc <= gd {
                b = d;
                d = c;
                gd = gc;
                c = b - r * (b - a);
                gc = g(c);
            } else {
                a = c;
                c = d;
                gc = gd;
                d = a + r * (b - a);
                gd = g(d);
            }
        }
        0.5 * (a + b)
    }

    /// Coupled rows that become fully determined once `pivot` is fixed.
    fn coupled_log(&self, pivot: usize, rest: &[usize], point: &[Complex64]) -> Result<Option<Complex64>> {
        let mut total = Complex64::new(0.0, 0.0);
        for row in &self.rows {
            if row.coef[pivot] == 0.0 || row.axes().any(|a| rest.contains(&a)) {
                continue;
            }
            match row.ln_factor(point)? {
                Some(v) => total += v,
                None => return Ok(None),
            }
        }
        Ok(Some(total))
    }

    fn components(&self, free: &[usize]) -> Vec<Vec<usize>> {
        let mut label: Vec<usize> = (0..free.len()).collect();
        fn find(label: &mut [usize], i: usize) -> usize {
            let mut r = i;
            while label[r] != r {
                r = label[r];
            }
            label[i] = r;
            r
        }
        for row in &self.rows {
            let idx: Vec<usize> = row.axes().filter_map(|a| free.iter().position(|&f| f == a)).collect();
            for w in idx.windows(2) {
                let (a, b) = (find(&mut label, w[0]), find(&mut label, w[1]));
                label[a.max(b)] = a.min(b);
            }
        }
        let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
        for (i, &axis) in free.iter().enumerate() {
            let root = find(&mut label, i);
            match groups.iter_mut().find(|g| g.0 == root) {
                Some(g) => g.1.push(axis),
                None => groups.push((root, vec![axis])),
            }
        }
        groups.into_iter().map(|g| g.1).collect()
    }

    fn panel_value(
        &self,
        pivot: usize,
        rest: &[usize],
        nodes: &[Node],
        shift: Option<f64>,
        point: &mut [Complex64],
    ) -> Result<(Scaled, f64)> {
        self.visited.fetch_add(nodes.len() as u64, std::sync::atomic::Ordering::Relaxed);
        let mut acc = Acc::default();
        for node in nodes {
            let (s, single) = match shift {
                Some(sigma) => {
                    let s = Complex64::new(sigma, node.s.im);
                    (s, self.single_log(pivot, s)?)
                }
                None => (node.s, node.single),
            };
            let Some(single) = single else { continue };
            point[pivot] = s;
            let Some(coupled) = self.coupled_log(pivot, rest, point)? else {
                continue;
            };
            let (inner, inner_abs) = self.integrate(rest, point)?;
            if inner.is_zero() {
                continue;
            }
            let l = single + coupled;
            let v = Scaled {
                m: Complex64::from_polar(1.0, l.im) * node.w * inner.m,
                e: l.re + inner.e,
            };
            acc.push_with_abs(v, l.re + node.w.norm().ln() + inner_abs);
        }
        Ok((acc.get(), acc.abs_log()))
    }

    /// Value and log magnitude sum of the integral over `free`.
    fn integrate(&self, free: &[usize], point: &mut [Complex64]) -> Result<(Scaled, f64)> {
        if free.is_empty() {
            return Ok((Scaled::ONE, 0.0));
        }
        let groups = self.components(free);
        if groups.len() > 1 {
            let (mut acc, mut abs) = (Scaled::ONE, 0.0);
            for g in groups {
                let (v, a) = self.integrate(&g, point)?;
                acc = acc.mul(v);
                abs += a;
            }
            return Ok((acc, abs));
        }
        let (pivot, rest) = self.split(free);
        let axis = &self.axes[pivot];
        let shift = self.recenter[pivot].then(|| self.saddle(pivot, &rest, point));
        let mut acc = Acc::default();
        for p in &axis.center {
            let (v, a) = self.panel_value(pivot, &rest, p, shift, point)?;
            acc.push_with_abs(v, a);
        }
        for branch in &axis.branches {
            let mut walk = BranchWalk::new();
            for p in branch {
                walk.feed(&mut acc, self.panel_value(pivot, &rest, p, shift, point)?);
                if walk.done {
                    break;
                }
            }
        }
        Ok((acc.get(), acc.abs_log()))
    }

    fn split(&self, free: &[usize]) -> (usize, Vec<usize>) {
        let pivot = *self.order.iter().find(|a| free.contains(a)).expect("free axes are in the order");
        let rest = self.order.iter().copied().filter(|a| *a != pivot && free.contains(a)).collect();
        (pivot, rest)
    }

    /// Outermost level: panels go out in fixed-size batches (concurrently when
    /// allowed) and the cutoff rule is applied to each batch in order, so both
    /// execution modes add identical terms in identical order.
    fn run(&self, exec: Exec) -> Result<Scaled> {
        let Some(constant) = self.constant else {
            return Ok(Scaled::ZERO);
        };
        let l = self.axes.len();
        let all: Vec<usize> = self.order.to_vec();
        let mut total = Scaled::from_log(constant, Complex64::new(1.0, 0.0));
        for g in self.components(&all) {
            let (pivot, rest) = self.split(&g);
            let axis = &self.axes[pivot];
            let eval_batch = |panels: &[Vec<Node>]| -> Result<Vec<(Scaled, f64)>> {
                exec.map(panels, |p| {
                    let mut point = vec![Complex64::new(0.0, 0.0); l];
                    self.panel_value(pivot, &rest, p, None, &mut point)
                })
                .into_iter()
                .collect()
            };
            let mut acc = Acc::default();
            for (v, a) in eval_batch(&axis.center)? {
                acc.push_with_abs(v, a);
            }
            for branch in &axis.branches {
                let mut walk = BranchWalk::new();
                for chunk in branch.chunks(BATCH) {
                    for v in eval_batch(chunk)? {
                        walk.feed(&mut acc, v);
                    }
                    if walk.done {
                        break;
                    }
                    if self.visited.load(std::sync::atomic::Ordering::Relaxed) > self.budget {
                        return Err(Error::QuadratureFailure {
                            budget: self.budget as usize,
                            error: f64::NAN,
                        });
                    }
                }
            }
            total = total.mul(acc.get());
        }
        Ok(total)
    }
}


/// Contour integral value with refinement diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoxHValue {
    pub value: Complex64,
    /// `ln |value|`, usable when `value` itself under- or overflows.
    pub log_abs: f64,
    pub previous: Complex64,
    pub levels: u32,
    pub nodes: u64,
}

fn margins(spec: &FoxHSpec, offsets: &[f64]) -> Vec<f64> {
    let args = spec.anchor_args(offsets);
    (0..spec.dim())
        .map(|ax| {
            spec.dmat
                .iter()
                .zip(&args)
                .filter(|(row, _)| row[ax] != 0.0)
                .map(|(row, a)| a / row[ax].abs())
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

fn eval_scaled(spec: &FoxHSpec, contour: &ContourConfig, tol: f64, exec: Exec) -> Result<(Scaled, FoxHValue)> {
    contour.validate(spec)?;
    if !(tol > 0.0) {
        return Err(Error::domain("tolerance must be positive"));
    }
    let rows: Vec<Row> = spec
        .delta
        .iter()
        .zip(&spec.dmat)
        .map(|(d, c)| Row { delta: *d, coef: c.clone(), numerator: true })
        .chain(spec.beta.iter().zip(&spec.bmat).map(|(b, c)| Row { delta: *b, coef: c.clone(), numerator: false }))
        .collect();
    // Rows with no variable at all are constant factors.
    let mut constant = Some(Complex64::new(0.0, 0.0));
    for row in rows.iter().filter(|r| r.axes().next().is_none()) {
        let v = ln_gamma_real(row.delta);
        constant = match (constant, v, row.numerator) {
            (Some(c), Ok(v), true) => Some(c + v),
            (Some(c), Ok(v), false) => Some(c - v),
            (_, Err(_), false) => None,
            (_, Err(e), true) => return Err(e),
            (None, _, _) => None,
        };
    }
    let rows: Vec<Row> = rows.into_iter().filter(|r| r.axes().next().is_some()).collect();
    let base: Vec<f64> = margins(spec, &contour.offsets).iter().map(|m| m.clamp(0.05, 1.0)).collect();
    let lnx = ln_x(spec, contour.lower_branch);

    let mut history: Vec<Scaled> = Vec::new();
    let mut nodes = 0u64;
    for level in 0..=contour.max_refinements {
        let axes: Vec<AxisNodes> = (0..spec.dim())
            .map(|ax| {
                build_axis(
                    contour.shapes[ax],
                    contour.offsets[ax],
                    contour.half_length,
                    base[ax],
                    contour.loop_height,
                    level,
                )
            })
            .collect();
        let ev = Evaluator::new(rows.clone(), &lnx, axes, contour, constant, contour.max_nodes.saturating_sub(nodes))?;
        let cur = match ev.run(exec) {
            Ok(v) => v,
            Err(Error::QuadratureFailure { .. }) => break,
            Err(e) => return Err(e),
        };
        nodes += ev.visited.load(std::sync::atomic::Ordering::Relaxed);
        if let Some(&p) = history.last() {
            let diff = cur.add(Scaled { m: -p.m, e: p.e });
            if cur.is_zero() || diff.log_abs() <= tol.ln() + cur.log_abs() {
                let out = FoxHValue {
                    value: cur.to_complex(),
                    log_abs: cur.log_abs(),
                    previous: p.to_complex(),
                    levels: level + 1,
                    nodes,
                };
                return Ok((cur, out));
            }
        }
        history.push(cur);
    }
    let n = history.len();
    if n == 0 {
        return Err(Error::QuadratureFailure {
            budget: contour.max_nodes as usize,
            error: f64::NAN,
        });
    }
    Err(Error::NotConverged {
        last: history[n - 1].to_complex().norm(),
        previous: history[n.saturating_sub(2)].to_complex().norm(),
    })
}

/// Evaluate the H-function along `contour`, refining until two successive
/// levels agree to `tol` relative.
pub fn eval(spec: &FoxHSpec, contour: &ContourConfig, tol: f64) -> Result<Complex64> {
    eval_detailed(spec, contour, tol, Exec::default()).map(|v| v.value)
}

pub fn eval_detailed(spec: &FoxHSpec, contour: &ContourConfig, tol: f64, exec: Exec) -> Result<FoxHValue> {
    eval_scaled(spec, contour, tol, exec).map(|v| v.1)
}

/// The bivariate (normalization) and trivariate (miss probability) bundles.
pub fn detection_bundles(cfg: &DetectorConfig, q: &AlphaMuParams) -> Result<(FoxHSpec, FoxHSpec)> {
    let nf = cfg.n_pulses as f64;
    let a2 = (nf - 1.0) / 2.0;
    let a3 = (nf + 1.0) / 2.0;
    let c = q.alpha * q.mu - nf / 2.0 + 0.5;
    let ps = Complex64::new(psi(cfg, q), 0.0);
    let minus_one = Complex64::new(-1.0, 0.0);
    let al = q.alpha;
    let dagger = FoxHSpec::new(
        vec![ps, minus_one],
        vec![0.0, a2, c, a3],
        vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-al, -1.0], vec![0.0, -1.0]],
        vec![a3],
        vec![vec![0.0, -1.0]],
    )?;
    let ddagger = FoxHSpec::new(
        vec![ps, minus_one, Complex64::new(cfg.gamma, 0.0)],
        vec![0.0, a2, c, a3, 0.0],
        vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![-al, -1.0, 0.0],
            vec![0.0, -1.0, 1.0],
            vec![0.0, 0.0, -1.0],
        ],
        vec![a3, 1.0],
        vec![vec![0.0, -1.0, 0.0], vec![0.0, 0.0, -1.0]],
    )?;
    Ok((dagger, ddagger))
}

/// `ln Φ` with `Φ = α μ^μ i^{1-N} (2σ²)^{αμ} / (Ω^μ Γ(μ))`.
pub fn ln_prefactor(cfg: &DetectorConfig, q: &AlphaMuParams) -> Result<Complex64> {
    let (a, m, o) = (q.alpha, q.mu, q.omega);
    let re = a.ln() + m * m.ln() + a * m * (2.0 * cfg.sigma2).ln() - m * o.ln() - ln_gamma_real(m)?;
    Ok(Complex64::new(re, PI / 2.0 * (1.0 - cfg.n_pulses as f64)))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FoxOptions {
    /// Integrate the bivariate term instead of using `Φ·H† = 1`.
    pub evaluate_normalization: bool,
    pub exec: Exec,
}

fn ddagger_contour(spec: &FoxHSpec) -> Result<ContourConfig> {
    let mut contour = choose_offsets(spec)?;
    contour.shapes = vec![ContourShape::Vertical, ContourShape::Loop, ContourShape::Vertical];
    contour.order = vec![1, 0, 2];
    Ok(contour)
}

/// Detection probability `Φ·(H† − H‡)`.
pub fn pd_fox(cfg: &DetectorConfig, q: &AlphaMuParams, tol: f64) -> Result<EvalResult> {
    pd_fox_with(cfg, q, tol, &FoxOptions::default())
}

pub fn pd_fox_with(cfg: &DetectorConfig, q: &AlphaMuParams, tol: f64, opts: &FoxOptions) -> Result<EvalResult> {
    let started = Instant::now();
    if !(cfg.gamma > 0.0) {
        // Empty miss region: the trivariate kernel degenerates at γ = 0.
        return Ok(EvalResult::new(1.0, 0, 0.0, started));
    }
    let (dagger, ddagger) = detection_bundles(cfg, q)?;
    let ln_phi = ln_prefactor(cfg, q)?;
    let mut last_err = None;
    for lower_branch in [false, true] {
        let mut contour = ddagger_contour(&ddagger)?;
        contour.lower_branch = lower_branch;
        let (h3, diag) = eval_scaled(&ddagger, &contour, tol, opts.exec)?;
        let miss = Scaled::from_log(ln_phi, Complex64::new(1.0, 0.0)).mul(h3).to_complex();
        let prev = Scaled::from_log(ln_phi, diag.previous).to_complex();
        let mut nodes = diag.nodes;
        let norm = if opts.evaluate_normalization {
            let mut c2 = choose_offsets(&dagger)?;
            c2.shapes = vec![ContourShape::Vertical, ContourShape::Loop];
            c2.order = vec![1, 0];
            c2.lower_branch = lower_branch;
            let (h2, d2) = eval_scaled(&dagger, &c2, tol, opts.exec)?;
            nodes += d2.nodes;
            Scaled::from_log(ln_phi, Complex64::new(1.0, 0.0)).mul(h2).to_complex()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let pd = norm - miss;
        if pd.im.abs() >= 1e-4 {
            last_err = Some(Error::ImaginaryResidue(pd.im));
            continue;
        }
        let mut out = EvalResult::new(pd.re, nodes, (miss - prev).norm(), started);
        out.imag_residue = pd.im;
        return Ok(out);
    }
    Err(last_err.expect("both branches tried"))
}
