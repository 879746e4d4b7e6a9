//! Certified negativity of a two-variable function on a box via lattice
//! evaluation plus a modulus-of-continuity bound, and the full pipeline that
//! pins down η_KL of the lazy walk on K_{3,3}.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{f_n, g_n, xlogx};

/// A function evaluated on a lattice one t-row at a time.
pub trait GridFunction: Sync {
    fn eval(&self, t: f64, x: f64) -> f64;

    /// Per-column data shared by all rows (for example f(x) terms).
    fn column_cache(&self, _xs: &[f64]) -> Vec<f64> {
        Vec::new()
    }

    /// Values at (t, xs[j]) for every j; `cache` is `column_cache(xs)`.
    fn eval_row(&self, t: f64, xs: &[f64], _cache: &[f64], out: &mut [f64]) {
        for (o, &x) in out.iter_mut().zip(xs) {
            *o = self.eval(t, x);
        }
    }
}

impl<F: Fn(f64, f64) -> f64 + Sync> GridFunction for F {
    fn eval(&self, t: f64, x: f64) -> f64 {
        self(t, x)
    }
}

/// G_n(t, x) = (log 2n/log n)·f_n(tx + (1−t)/n) − (f_2(t) + t f_n(x)).
#[derive(Debug, Clone, Copy)]
pub struct BipartiteGap {
    pub n: u32,
}

impl BipartiteGap {
    fn scale(&self) -> f64 {
        let n = self.n as f64;
        (2.0 * n).ln() / n.ln()
    }
}

/// f_n via x log x terms, for the hot loop.
#[inline]
fn f_fast(ln_n: f64, ln_n1: f64, u: f64) -> f64 {
    let r = 1.0 - u;
    ln_n + xlogx(u) + xlogx(r) - r * ln_n1
}

impl GridFunction for BipartiteGap {
    fn eval(&self, t: f64, x: f64) -> f64 {
        let n = self.n as f64;
        self.scale() * f_n(self.n, t * x + (1.0 - t) / n) - (f_n(2, t) + t * f_n(self.n, x))
    }

    fn column_cache(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| f_n(self.n, x)).collect()
    }

    fn eval_row(&self, t: f64, xs: &[f64], cache: &[f64], out: &mut [f64]) {
        let n = self.n as f64;
        let (ln_n, ln_n1) = (n.ln(), (n - 1.0).ln());
        let scale = self.scale();
        let shift = (1.0 - t) / n;
        let f2t = f_n(2, t);
        for ((o, &x), &fx) in out.iter_mut().zip(xs).zip(cache) {
            *o = scale * f_fast(ln_n, ln_n1, t * x + shift) - f2t - t * fx;
        }
    }
}

pub fn g3(t: f64, x: f64) -> Result<f64> {
    if !(t > 0.0 && t <= 1.0) || !((1.0 / 3.0..=1.0).contains(&x)) {
        return Err(Error::InvalidParameter(format!(
            "G_3 needs t ∈ (0,1], x ∈ [1/3,1]; got ({t}, {x})"
        )));
    }
    Ok(BipartiteGap { n: 3 }.eval(t, x))
}

/// Inflation applied to the modulus bound to absorb rounding.
pub const MODULUS_INFLATION: f64 = 1.01;
/// Extra slack on the margin comparison.
pub const MARGIN_SLACK: f64 = 1e-9;

/// Worst-case change of G_n between lattice neighbours at `spacing`, from
/// the monotonicity and convexity of f_2 and f_n on the region: a step in x
/// moves G_n by at most max(L·m_n, m_n), a step in t by at most
/// max(L·m_n, m_2 + δ log n), where m_k = f_k(1) − f_k(1 − δ) and
/// L = log 2n/log n. The sum is inflated by [`MODULUS_INFLATION`].
pub fn modulus_bound_n(n: u32, spacing: f64) -> f64 {
    if !(spacing > 0.0) {
        return 0.0;
    }
    let d = spacing.min(0.5);
    let nf = n as f64;
    let scale = (2.0 * nf).ln() / nf.ln();
    let m_n = f_n(n, 1.0) - f_n(n, 1.0 - d);
    let m_2 = f_n(2, 1.0) - f_n(2, 1.0 - d);
    let x_step = (scale * m_n).max(m_n);
    let t_step = (scale * m_n).max(m_2 + d * nf.ln());
    MODULUS_INFLATION * (x_step + t_step)
}

pub fn modulus_bound(spacing: f64) -> f64 {
    modulus_bound_n(3, spacing)
}

/// Axis-aligned box [t_lo, t_hi] × [x_lo, x_hi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridBox {
    pub t_lo: f64,
    pub t_hi: f64,
    pub x_lo: f64,
    pub x_hi: f64,
}

impl GridBox {
    fn validate(&self) -> Result<()> {
        let ok = [self.t_lo, self.t_hi, self.x_lo, self.x_hi]
            .iter()
            .all(|v| v.is_finite())
            && self.t_lo <= self.t_hi
            && self.x_lo <= self.x_hi;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("malformed box {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRequest {
    pub region: GridBox,
    /// Sub-boxes removed from the region.
    #[serde(default)]
    pub excluded: Vec<GridBox>,
    pub spacing: f64,
    pub margin: f64,
    /// Modulus bound for the function at this spacing.
    pub modulus: f64,
    /// Maximum number of lattice points.
    pub budget: u64,
}

pub const DEFAULT_BUDGET: u64 = 4_000_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCertificate {
    pub region: GridBox,
    pub excluded: Vec<GridBox>,
    pub spacing: f64,
    pub margin: f64,
    pub modulus: f64,
    pub t_points: u64,
    pub x_points: u64,
    pub evaluated: u64,
    pub max_value: f64,
    pub worst_point: (f64, f64),
    pub pass: bool,
}

/// Lattice coordinates lo + iδ for i = 0..=⌊(hi − lo)/δ⌋, plus hi itself when
/// it is not already a lattice point.
fn lattice(lo: f64, hi: f64, spacing: f64) -> Vec<f64> {
    let steps = ((hi - lo) / spacing + 1e-9).floor() as u64;
    let mut v: Vec<f64> = (0..=steps).map(|i| lo + i as f64 * spacing).collect();
    if hi - v[v.len() - 1] > 1e-9 * spacing {
        v.push(hi);
    }
    v
}

/// Index range of lattice coordinates lying in [a, b], by integer rounding
/// with a tolerance of 1e-9 lattice steps.
fn index_range(coords: &[f64], lo: f64, spacing: f64, a: f64, b: f64) -> Option<(usize, usize)> {
    let last = coords.len() - 1;
    let first = ((a - lo) / spacing - 1e-9).ceil().max(0.0) as usize;
    let mut end = ((b - lo) / spacing + 1e-9).floor();
    if end < 0.0 {
        return None;
    }
    if end as usize >= last || b >= coords[last] {
        end = end.max(last as f64);
    }
    let end = (end as usize).min(last);
    // the appended endpoint lies in [a, b] only if b reaches it
    let end = if end == last && coords[last] > b + 1e-9 * spacing {
        last - 1
    } else {
        end
    };
    (first <= end).then_some((first, end))
}

/// Evaluate `f` on the lattice anchored at the region's lower corner and
/// decide whether it certifies f < 0 on the region. Rows are evaluated in
/// parallel; the maximum and its (first) location do not depend on the
/// chunking.
pub fn grid_certify<F: GridFunction>(f: &F, req: &GridRequest) -> Result<GridCertificate> {
    req.region.validate()?;
    for e in &req.excluded {
        e.validate()?;
    }
    if !(req.spacing > 0.0)
        || !req.spacing.is_finite()
        || !(req.margin >= 0.0)
        || !(req.modulus >= 0.0)
    {
        return Err(Error::InvalidParameter(
            "spacing must be positive; margin and modulus nonnegative".into(),
        ));
    }
    let r = &req.region;
    let t_count = ((r.t_hi - r.t_lo) / req.spacing).floor() + 2.0;
    let x_count = ((r.x_hi - r.x_lo) / req.spacing).floor() + 2.0;
    if t_count * x_count > req.budget as f64 {
        return Err(Error::ResourceCap(format!(
            "about {:.3e} lattice points exceed the budget {}",
            t_count * x_count,
            req.budget
        )));
    }
    let ts = lattice(r.t_lo, r.t_hi, req.spacing);
    let xs = lattice(r.x_lo, r.x_hi, req.spacing);
    let holes: Vec<((usize, usize), (usize, usize))> = req
        .excluded
        .iter()
        .filter_map(|e| {
            let ti = index_range(&ts, r.t_lo, req.spacing, e.t_lo, e.t_hi)?;
            let xi = index_range(&xs, r.x_lo, req.spacing, e.x_lo, e.x_hi)?;
            Some((ti, xi))
        })
        .collect();
    let cache = f.column_cache(&xs);

    // (max, column, evaluated) per row
    let rows: Vec<(f64, usize, u64)> = ts
        .par_iter()
        .enumerate()
        .map_init(
            || vec![0.0; xs.len()],
            |buf, (i, &t)| {
                f.eval_row(t, &xs, &cache, buf);
                let mut skip = vec![false; 0];
                let row_holes: Vec<(usize, usize)> = holes
                    .iter()
                    .filter(|((a, b), _)| *a <= i && i <= *b)
                    .map(|(_, x)| *x)
                    .collect();
                if !row_holes.is_empty() {
                    skip = vec![false; xs.len()];
                    for (a, b) in row_holes {
                        skip[a..=b].iter_mut().for_each(|s| *s = true);
                    }
                }
                let mut best = f64::NEG_INFINITY;
                let mut at = usize::MAX;
                let mut count = 0u64;
                for (j, &v) in buf.iter().enumerate() {
                    if !skip.is_empty() && skip[j] {
                        continue;
                    }
                    count += 1;
                    let v = if v.is_nan() { f64::INFINITY } else { v };
                    if v > best {
                        best = v;
                        at = j;
                    }
                }
                (best, at, count)
            },
        )
        .collect();

    let mut max_value = f64::NEG_INFINITY;
    let mut worst = (f64::NAN, f64::NAN);
    let mut evaluated = 0;
    for (i, &(v, j, c)) in rows.iter().enumerate() {
        evaluated += c;
        if c > 0 && v > max_value {
            max_value = v;
            worst = (ts[i], xs[j]);
        }
    }
    let pass =
        evaluated > 0 && max_value < -(req.margin + MARGIN_SLACK) && req.modulus < req.margin;
    Ok(GridCertificate {
        region: req.region,
        excluded: req.excluded.clone(),
        spacing: req.spacing,
        margin: req.margin,
        modulus: req.modulus,
        t_points: ts.len() as u64,
        x_points: xs.len() as u64,
        evaluated,
        max_value,
        worst_point: worst,
        pass,
    })
}

/// exp(log n · log(log n/log 2n)): any t* below this satisfies the
/// small-t ratio bound t^{1/log n} < log n/log 2n.
pub fn t_star_threshold(n: u32) -> f64 {
    let ln = (n as f64).ln();
    (ln * (ln / (2.0 * n as f64).ln()).ln()).exp()
}

/// F_n(t, x, y), the entropy ratio of the lazy walk on K_{n,n} restricted to
/// the symmetric family of distributions.
pub fn bipartite_ratio(n: u32, t: f64, x: f64, y: f64) -> f64 {
    let nf = n as f64;
    let num = f_n(n, t * x + (1.0 - t) / nf) + f_n(n, (1.0 - t) * y + t / nf);
    let den = f_n(2, t) + t * f_n(n, x) + (1.0 - t) * f_n(n, y);
    0.5 * num / den
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartiteRequest {
    pub n: u32,
    pub spacing: f64,
    pub margin: f64,
    pub t_star: f64,
    pub budget: u64,
    /// Spacing of the corner grid on [0.999, 1]².
    pub corner_spacing: f64,
}

impl Default for BipartiteRequest {
    fn default() -> Self {
        Self {
            n: 3,
            spacing: 1e-5,
            margin: 0.00078,
            t_star: 0.58,
            budget: DEFAULT_BUDGET,
            corner_spacing: 1e-6,
        }
    }
}

impl BipartiteRequest {
    pub fn parse(text: &str) -> Result<Self> {
        let req: Self = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n != 3 {
            return Err(Error::InvalidParameter(format!(
                "only n = 3 has a supported certificate; n = {} is a conjecture",
                self.n
            )));
        }
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        if !finite_pos(self.spacing)
            || !finite_pos(self.corner_spacing)
            || !(self.margin.is_finite() && self.margin >= 0.0)
        {
            return Err(Error::InvalidParameter(
                "spacings must be positive, margin nonnegative".into(),
            ));
        }
        if !(self.t_star > 0.5 && self.t_star < CORNER) {
            return Err(Error::InvalidParameter(format!(
                "t* = {} must lie in (1/2, {CORNER})",
                self.t_star
            )));
        }
        if self.corner_spacing > 1e-4 || self.spacing > 0.1 {
            return Err(Error::InvalidParameter(
                "grids too coarse for the region".into(),
            ));
        }
        Ok(())
    }
}

/// Lower corner of the analytically treated box [CORNER, 1]².
pub const CORNER: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartiteReport {
    pub request: BipartiteRequest,
    pub stages: Vec<StageReport>,
    pub grid: Option<GridCertificate>,
    pub target: f64,
    /// The certified value of η_KL when every stage passes.
    pub verdict: Option<f64>,
    pub runtime_secs: f64,
}

impl BipartiteReport {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn pass(&self) -> bool {
        self.verdict.is_some()
    }
}

/// Sup over a coarse (t, x) grid of f_n(tx + (1−t)/n)/(t f_n(x)) for
/// t ∈ (0, t*], x ∈ (1/n, 1].
fn small_t_ratio_sup(n: u32, t_star: f64) -> f64 {
    let nf = n as f64;
    let steps = 400;
    let mut best = f64::NEG_INFINITY;
    for i in 1..=steps {
        let t = t_star * i as f64 / steps as f64;
        for j in 1..=steps {
            let x = 1.0 / nf + (1.0 - 1.0 / nf) * j as f64 / steps as f64;
            let r = f_n(n, t * x + (1.0 - t) / nf) / (t * f_n(n, x));
            best = best.max(r);
        }
    }
    best
}

/// Coarse (t, x, y) grid over (t*, 1) × [1/n, 1]²: the number of points,
/// the number violating F(t,x,y) ≤ max(F(t,x,1/n), target), and the sup of
/// the y-part ratio f_n((1−t)y + t/n)/((1−t) f_n(y)). A y-part ratio below
/// 2·target makes F a mediant that only drops when y leaves 1/n.
fn y_reduction_check(n: u32, t_star: f64, target: f64) -> (usize, usize, f64) {
    let nf = n as f64;
    let steps = 60;
    let mut points = 0;
    let mut bad = 0;
    let mut y_sup = f64::NEG_INFINITY;
    for i in 1..steps {
        let t = t_star + (1.0 - t_star) * i as f64 / steps as f64;
        for j in 0..=steps {
            let x = 1.0 / nf + (1.0 - 1.0 / nf) * j as f64 / steps as f64;
            let base = bipartite_ratio(n, t, x, 1.0 / nf);
            for k in 0..=steps {
                let y = 1.0 / nf + (1.0 - 1.0 / nf) * k as f64 / steps as f64;
                points += 1;
                if bipartite_ratio(n, t, x, y) > base.max(target) + 1e-12 {
                    bad += 1;
                }
                if k > 0 {
                    let s = 1.0 - t;
                    y_sup = y_sup.max(f_n(n, s * y + t / nf) / (s * f_n(n, y)));
                }
            }
        }
    }
    (points, bad, y_sup)
}

/// The upper bound g_3(a) + g_2(b) − L·g_2(c) on G_3(1 − a, 1 − b), with
/// c = 2a/3 + b − ab, and the two scalar inequalities behind its sign:
/// a log(3e/a) < (L/2)·h(4a/3) and b log(2e/b) ≤ (L/2)·h(1.998b), where
/// h(c) = c(0.999 + log(2/c)).
fn corner_check(spacing: f64) -> (f64, f64, f64, u64) {
    let scale = 6f64.ln() / 3f64.ln();
    let h = |c: f64| {
        if c > 0.0 {
            c * (0.999 + (2.0 / c).ln())
        } else {
            0.0
        }
    };
    let steps = ((1.0 - CORNER) / spacing).round() as usize;
    let rows: Vec<(f64, f64, f64, u64)> = (1..=steps)
        .into_par_iter()
        .map(|i| {
            let a = i as f64 * spacing;
            let mut worst_bound = f64::NEG_INFINITY;
            let mut worst_gap = f64::NEG_INFINITY;
            let mut worst_direct = f64::NEG_INFINITY;
            let mut count = 0;
            for j in 0..=steps {
                let b = j as f64 * spacing;
                let c = 2.0 * a / 3.0 + b - a * b;
                let bound = g_n(3, a) + g_n(2, b) - scale * g_n(2, c);
                let gap_a =
                    a * (3.0 * std::f64::consts::E / a).ln() - 0.5 * scale * h(4.0 * a / 3.0);
                let gap_b = if b > 0.0 {
                    b * (2.0 * std::f64::consts::E / b).ln() - 0.5 * scale * h(1.998 * b)
                } else {
                    0.0
                };
                let direct = BipartiteGap { n: 3 }.eval(1.0 - a, 1.0 - b);
                worst_bound = worst_bound.max(bound);
                worst_gap = worst_gap.max(gap_a).max(gap_b);
                worst_direct = worst_direct.max(direct - bound);
                count += 1;
            }
            (worst_bound, worst_gap, worst_direct, count)
        })
        .collect();
    rows.into_iter().fold(
        (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY, 0),
        |acc, r| (acc.0.max(r.0), acc.1.max(r.1), acc.2.max(r.2), acc.3 + r.3),
    )
}

/// Run every stage of the K_{3,3} argument: the t* threshold, the reduction
/// to y = 1/n, the lattice certificate of G_3 < 0 away from the (1, 1)
/// corner, and a fine-grid validation of the corner inequalities (a
/// numerical check, not a symbolic proof). The verdict is the value of
/// η_KL, withheld if any stage fails.
pub fn bipartite_certificate(req: &BipartiteRequest) -> Result<BipartiteReport> {
    req.validate()?;
    let start = Instant::now();
    let n = req.n;
    let nf = n as f64;
    let target = nf.ln() / (2.0 * (2.0 * nf).ln());
    let mut stages = Vec::new();

    let threshold = t_star_threshold(n);
    let sup = small_t_ratio_sup(n, req.t_star);
    let bound = nf.ln() / (2.0 * nf).ln();
    stages.push(StageReport {
        name: "t_star_threshold".into(),
        pass: req.t_star < threshold && sup < bound,
        detail: format!(
            "t* = {} < threshold {threshold:.6}; coarse sup of the small-t ratio {sup:.6} < {bound:.6}",
            req.t_star
        ),
    });

    let (points, bad, y_sup) = y_reduction_check(n, req.t_star, target);
    let limit = bipartite_ratio(n, 1.0 - 1e-9, 1.0, 1.0 / nf);
    stages.push(StageReport {
        name: "y_reduction".into(),
        pass: bad == 0 && y_sup < 2.0 * target && (limit - target).abs() < 1e-6,
        detail: format!(
            "{bad} of {points} sampled points exceed max(F(t,x,1/n), target); y-part ratio sup {y_sup:.6} < {:.6}; \
             F(1−1e-9, 1, 1/n) = {limit:.9} vs {target:.9}",
            2.0 * target
        ),
    });

    let grid_req = GridRequest {
        region: GridBox {
            t_lo: req.t_star,
            t_hi: 1.0,
            x_lo: 1.0 / nf,
            x_hi: 1.0,
        },
        excluded: vec![GridBox {
            t_lo: CORNER,
            t_hi: 1.0,
            x_lo: CORNER,
            x_hi: 1.0,
        }],
        spacing: req.spacing,
        margin: req.margin,
        modulus: modulus_bound_n(n, req.spacing),
        budget: req.budget,
    };
    let grid = grid_certify(&BipartiteGap { n }, &grid_req)?;
    stages.push(StageReport {
        name: "grid".into(),
        pass: grid.pass,
        detail: format!(
            "{} points, max {:.6e} at ({:.5}, {:.5}), modulus {:.6e}, margin {}",
            grid.evaluated,
            grid.max_value,
            grid.worst_point.0,
            grid.worst_point.1,
            grid.modulus,
            grid.margin
        ),
    });

    let (corner_max, gap_max, direct_excess, count) = corner_check(req.corner_spacing);
    stages.push(StageReport {
        name: "corner".into(),
        pass: corner_max < 0.0 && gap_max <= 0.0 && direct_excess <= 1e-12,
        detail: format!(
            "{count} corner points (numerical validation): upper bound max {corner_max:.3e}, \
             scalar inequality max {gap_max:.3e}, G_3 − bound max {direct_excess:.3e}"
        ),
    });

    let verdict = stages.iter().all(|s| s.pass).then_some(target);
    Ok(BipartiteReport {
        request: req.clone(),
        stages,
        grid: Some(grid),
        target,
        verdict,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}
