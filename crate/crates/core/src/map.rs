//! Continuous piecewise linear self-maps of an interval, with exact
//! evaluation, composition, iteration and lap/variation accounting.
//!
//! A map is stored as breakpoints `d_0 < … < d_{k+1}` and values
//! `v_i = f(d_i)`. Breakpoints are exactly the points where the slope
//! changes (no collinear neighbours, no zero slopes); the subset where the
//! slope changes *sign* are the turning points, and the maximal monotone
//! runs between them are the laps.

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default budget for breakpoints of a single iterate.
pub const DEFAULT_NODE_CAP: usize = 10_000_000;

/// A non-trivial closed subinterval of the domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalJ {
    lo: Scalar,
    hi: Scalar,
}

impl IntervalJ {
    pub fn new(lo: Scalar, hi: Scalar) -> Result<Self> {
        if lo >= hi {
            return Err(Error::Domain(format!(
                "interval [{lo}, {hi}] is not non-trivial"
            )));
        }
        Ok(IntervalJ { lo, hi })
    }

    pub fn lo(&self) -> &Scalar {
        &self.lo
    }

    pub fn hi(&self) -> &Scalar {
        &self.hi
    }

    pub fn contains(&self, x: &Scalar) -> bool {
        *x >= self.lo && *x <= self.hi
    }

    /// Closed intervals intersect iff neither lies strictly beyond the other.
    pub fn intersects(&self, other: &IntervalJ) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn width(&self) -> Scalar {
        &self.hi - &self.lo
    }
}

/// Continuous piecewise linear map of `[a,b]` into itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PLMap {
    xs: Vec<Scalar>,
    ys: Vec<Scalar>,
    /// Indices into `xs` where the slope changes sign.
    turning: Vec<usize>,
}

impl PLMap {
    /// Builds a map from breakpoints and values, checking every structural
    /// invariant. The first violated invariant is reported.
    pub fn new(xs: Vec<Scalar>, ys: Vec<Scalar>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::InvalidMap(format!(
                "breakpoint/value count mismatch ({} vs {})",
                xs.len(),
                ys.len()
            )));
        }
        if xs.len() < 2 {
            return Err(Error::InvalidMap("need at least two breakpoints".into()));
        }
        for w in xs.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidMap(
                    "breakpoints not strictly increasing".into(),
                ));
            }
        }
        let (a, b) = (&xs[0], &xs[xs.len() - 1]);
        for y in &ys {
            if y < a || y > b {
                return Err(Error::InvalidMap(format!(
                    "value {y} outside the interval [{a}, {b}]"
                )));
            }
        }
        // slopes: nonzero and distinct from each neighbour
        let mut prev: Option<Scalar> = None;
        for i in 0..xs.len() - 1 {
            let dy = &ys[i + 1] - &ys[i];
            if dy.is_zero() {
                return Err(Error::InvalidMap(format!(
                    "zero-slope segment at [{}, {}]",
                    xs[i],
                    xs[i + 1]
                )));
            }
            let slope = dy / (&xs[i + 1] - &xs[i]);
            if let Some(p) = &prev {
                if *p == slope {
                    return Err(Error::InvalidMap(format!(
                        "collinear segments meet at breakpoint {} (not minimal)",
                        xs[i]
                    )));
                }
            }
            prev = Some(slope);
        }
        let turning = turning_indices(&xs, &ys);
        Ok(PLMap { xs, ys, turning })
    }

    /// Builds from raw nodes, silently merging collinear neighbours first
    /// (used by `compose`, whose solves can produce redundant nodes).
    fn from_nodes_merged(xs: Vec<Scalar>, ys: Vec<Scalar>) -> Result<Self> {
        debug_assert_eq!(xs.len(), ys.len());
        let n = xs.len();
        let mut keep = vec![true; n];
        let mut i = 0; // last kept index
        for j in 1..n - 1 {
            // cross-multiplied slope equality of (i..j) and (j..j+1)
            let lhs = (&ys[j] - &ys[i]) * (&xs[j + 1] - &xs[j]);
            let rhs = (&ys[j + 1] - &ys[j]) * (&xs[j] - &xs[i]);
            if lhs == rhs {
                keep[j] = false;
            } else {
                i = j;
            }
        }
        let mut kxs = Vec::with_capacity(n);
        let mut kys = Vec::with_capacity(n);
        for (k, (x, y)) in xs.into_iter().zip(ys).enumerate() {
            if keep[k] {
                kxs.push(x);
                kys.push(y);
            }
        }
        PLMap::new(kxs, kys)
    }

    /// Identity map on `[a,b]`.
    pub fn identity(a: Scalar, b: Scalar) -> Result<Self> {
        PLMap::new(vec![a.clone(), b.clone()], vec![a, b])
    }

    pub fn a(&self) -> &Scalar {
        &self.xs[0]
    }

    pub fn b(&self) -> &Scalar {
        &self.xs[self.xs.len() - 1]
    }

    pub fn domain(&self) -> IntervalJ {
        IntervalJ {
            lo: self.a().clone(),
            hi: self.b().clone(),
        }
    }

    /// All breakpoints, endpoints included.
    pub fn breakpoints(&self) -> &[Scalar] {
        &self.xs
    }

    /// Values at the breakpoints.
    pub fn values(&self) -> &[Scalar] {
        &self.ys
    }

    pub fn segment_count(&self) -> usize {
        self.xs.len() - 1
    }

    /// Interior breakpoints where the slope changes sign, in increasing
    /// order.
    pub fn turning_points(&self) -> Vec<Scalar> {
        self.turning.iter().map(|&i| self.xs[i].clone()).collect()
    }

    /// Number of laps (maximal monotone runs): turning points + 1.
    pub fn lap_count(&self) -> u64 {
        self.turning.len() as u64 + 1
    }

    /// Lap endpoints `a = s_0 < s_1 < … < s_{p+1} = b` (turning points
    /// plus the two domain endpoints).
    pub fn lap_endpoints(&self) -> Vec<Scalar> {
        let mut out = Vec::with_capacity(self.turning.len() + 2);
        out.push(self.a().clone());
        out.extend(self.turning.iter().map(|&i| self.xs[i].clone()));
        out.push(self.b().clone());
        out
    }

    /// Whether the lap starting at lap endpoint `k` is increasing.
    pub fn lap_increasing(&self, k: usize) -> bool {
        let seg = if k == 0 { 0 } else { self.turning[k - 1] };
        self.ys[seg + 1] > self.ys[seg]
    }

    /// Number of laps of `self` meeting the interior of `j`:
    /// turning points strictly inside, plus one.
    pub fn lap_count_on(&self, j: &IntervalJ) -> u64 {
        let lo = self
            .turning
            .partition_point(|&i| self.xs[i] <= j.lo);
        let hi = self.turning.partition_point(|&i| self.xs[i] < j.hi);
        (hi - lo) as u64 + 1
    }

    /// Total variation: the exact sum of absolute value changes.
    pub fn variation(&self) -> Scalar {
        let mut sum = Scalar::zero();
        for w in self.ys.windows(2) {
            sum += (&w[1] - &w[0]).abs();
        }
        sum
    }

    /// When every segment has the same absolute slope, returns it.
    pub fn uniform_slope(&self) -> Option<Scalar> {
        let mut mag: Option<Scalar> = None;
        for i in 0..self.segment_count() {
            let s = ((&self.ys[i + 1] - &self.ys[i]) / (&self.xs[i + 1] - &self.xs[i])).abs();
            match &mag {
                None => mag = Some(s),
                Some(m) if *m == s => {}
                _ => return None,
            }
        }
        mag
    }

    /// Exact evaluation by linear interpolation on the segment containing
    /// `x`.
    pub fn eval(&self, x: &Scalar) -> Result<Scalar> {
        if x < self.a() || x > self.b() {
            return Err(Error::Domain(format!(
                "point {x} outside the interval [{}, {}]",
                self.a(),
                self.b()
            )));
        }
        // segment index i with xs[i] <= x <= xs[i+1]
        let i = self.xs.partition_point(|d| d < x).saturating_sub(1);
        let i = i.min(self.xs.len() - 2);
        Ok(&self.ys[i]
            + (&self.ys[i + 1] - &self.ys[i]) * (x - &self.xs[i]) / (&self.xs[i + 1] - &self.xs[i]))
    }

    /// Exact image of a subinterval: evaluate the endpoints and every
    /// breakpoint value strictly inside.
    pub fn image(&self, j: &IntervalJ) -> Result<IntervalJ> {
        let mut lo = self.eval(&j.lo)?;
        let mut hi = lo.clone();
        let end = self.eval(&j.hi)?;
        if end < lo {
            lo = end;
        } else {
            hi = end;
        }
        let s = self.xs.partition_point(|d| d <= &j.lo);
        let e = self.xs.partition_point(|d| d < &j.hi);
        for i in s..e {
            if self.ys[i] < lo {
                lo = self.ys[i].clone();
            }
            if self.ys[i] > hi {
                hi = self.ys[i].clone();
            }
        }
        IntervalJ::new(lo, hi)
    }

    /// Inverse of an increasing piecewise linear bijection of `[a,b]`.
    pub fn inverse_homeo(&self) -> Result<PLMap> {
        let increasing = self.ys.windows(2).all(|w| w[0] < w[1]);
        if !increasing || self.ys[0] != self.xs[0] || self.ys[self.ys.len() - 1] != *self.b() {
            return Err(Error::Unsupported(
                "inverse requires an increasing bijection of the interval".into(),
            ));
        }
        PLMap::new(self.ys.clone(), self.xs.clone())
    }

    /// `n`-th iterate, failing cleanly when the breakpoint budget `cap`
    /// would be exceeded.
    pub fn iterate_with_cap(&self, n: u32, cap: usize) -> Result<PLMap> {
        if n == 0 {
            return PLMap::identity(self.a().clone(), self.b().clone());
        }
        let mut acc = self.clone();
        for k in 2..=n {
            // breakpoints(f∘g) <= interior(g) + segments(g)*interior(f) + 2
            let est = (acc.xs.len() - 2)
                .saturating_add(acc.segment_count().saturating_mul(self.xs.len() - 2))
                .saturating_add(2);
            if est > cap {
                return Err(Error::Resource {
                    n: k,
                    detail: format!(
                        "estimated {est} breakpoints exceeds the cap of {cap} \
                         (requested iterate {n})"
                    ),
                });
            }
            acc = compose(self, &acc)?;
            if acc.xs.len() > cap {
                return Err(Error::Resource {
                    n: k,
                    detail: format!(
                        "{} breakpoints exceeds the cap of {cap} (requested iterate {n})",
                        acc.xs.len()
                    ),
                });
            }
        }
        Ok(acc)
    }

    /// `n`-th iterate under the default breakpoint budget.
    pub fn iterate(&self, n: u32) -> Result<PLMap> {
        self.iterate_with_cap(n, DEFAULT_NODE_CAP)
    }
}

fn turning_indices(xs: &[Scalar], ys: &[Scalar]) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 1..xs.len() - 1 {
        let up_before = ys[i] > ys[i - 1];
        let up_after = ys[i + 1] > ys[i];
        if up_before != up_after {
            out.push(i);
        }
    }
    out
}

/// Exact composition `outer ∘ inner`. Both maps must live on the same
/// interval. New breakpoints are the breakpoints of `inner` together with
/// the exact solutions of `inner(x) = w` for each breakpoint `w` of
/// `outer`; collinear nodes produced along the way are merged.
pub fn compose(outer: &PLMap, inner: &PLMap) -> Result<PLMap> {
    if inner.a() != outer.a() || inner.b() != outer.b() {
        return Err(Error::Domain(
            "composition requires maps on the same interval".into(),
        ));
    }
    let ow = &outer.xs[1..outer.xs.len() - 1]; // interior breakpoints of outer
    let mut xs: Vec<Scalar> = Vec::with_capacity(inner.xs.len() * 2);
    let mut ys: Vec<Scalar> = Vec::with_capacity(inner.xs.len() * 2);
    for i in 0..inner.segment_count() {
        let (x0, x1) = (&inner.xs[i], &inner.xs[i + 1]);
        let (y0, y1) = (&inner.ys[i], &inner.ys[i + 1]);
        xs.push(x0.clone());
        ys.push(outer.eval(y0)?);
        // outer breakpoints strictly between y0 and y1
        let (vlo, vhi) = if y0 < y1 { (y0, y1) } else { (y1, y0) };
        let s = ow.partition_point(|w| w <= vlo);
        let e = ow.partition_point(|w| w < vhi);
        let solve = |w: &Scalar| x0 + (w - y0) * (x1 - x0) / (y1 - y0);
        if y0 < y1 {
            for w in &ow[s..e] {
                xs.push(solve(w));
                ys.push(outer.eval(w)?);
            }
        } else {
            for w in ow[s..e].iter().rev() {
                xs.push(solve(w));
                ys.push(outer.eval(w)?);
            }
        }
    }
    xs.push(inner.b().clone());
    ys.push(outer.eval(&inner.ys[inner.ys.len() - 1])?);
    PLMap::from_nodes_merged(xs, ys)
}
