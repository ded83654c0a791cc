//! Truncated lap-count power series `L_N(J,t) = Σ_{n≤N} ℓ(f^n|J) t^n`
//! and the normalized ratios `Λ_N(J,t) = L_N(J,t)/L_N(I,t)`.
//!
//! Explicit iterates are useless here: meaningful `t` sit close to the
//! radius of convergence, where thousands of terms are needed and
//! `ℓ(f^n)` is astronomically large. Instead the engine works with the
//! cumulative counting function `N_n(y) = #(T(f^n) ∩ (a,y))`, which
//! satisfies a one-step recursion through the lap images of `f`:
//! splitting `(a,y)` at the turning points and pushing each monotone
//! piece forward one step reduces depth-`n` counts at `y` to depth-
//! `(n-1)` counts at the lap-endpoint values and at `f(y)`. Summing with
//! weights `t^n` turns this into a recursion for
//! `S_M(y) = Σ_{n≤M} t^n N_n(y)` that only ever walks forward orbits,
//! so the whole table costs `O(terms²)` per non-stationary orbit instead
//! of `O(β^terms)`.
//!
//! Counts are carried as `t^n`-scaled `f64`s (all summands nonnegative,
//! magnitudes in `[0,1]`-ish range, so no overflow and benign rounding);
//! orbit geometry is plain `f64`. The exact explicit-iterate route in
//! [`crate::map`] stays available as an independent oracle at small
//! depth, and the tests hold the engine to it.

use rayon::prelude::*;
use serde::Serialize;

use crate::entropy::growth_data;
use crate::error::{Error, Result};
use crate::map::{IntervalJ, PLMap};
use crate::scalar::scalar_to_f64;

/// Truncation order, evaluation schedule and tail requirement for the
/// series computations.
#[derive(Debug, Clone, Serialize)]
pub struct SeriesConfig {
    /// Truncation order `N`.
    pub terms: usize,
    /// Increasing schedule `t_1 < … < t_K < r` approaching `r`.
    pub t_schedule: Vec<f64>,
    /// Required relative geometric tail at the last scheduled `t`.
    pub tail_tolerance: f64,
}

impl SeriesConfig {
    pub const DEFAULT_SCHEDULE_LEN: usize = 12;
    pub const DEFAULT_TAIL_TOL: f64 = 1e-4;

    /// Deterministic schedule `t_k = r(1 - 2^{-k})`, `k = 1..=len`, with
    /// the truncation order chosen so the geometric tail estimate at the
    /// last `t` meets `tail_tol`.
    pub fn auto(r: f64, schedule_len: usize, tail_tol: f64) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Config(format!(
                "need 0 < r < 1 for a schedule approaching r, got r = {r}"
            )));
        }
        if schedule_len == 0 || !(tail_tol > 0.0 && tail_tol < 1.0) {
            return Err(Error::Config(
                "schedule length must be positive and 0 < tail tolerance < 1".into(),
            ));
        }
        let t_schedule: Vec<f64> = (1..=schedule_len)
            .map(|k| r * (1.0 - 0.5f64.powi(k as i32)))
            .collect();
        // With ℓ(f^n) ≈ β^n the relative tail at t is about
        // q^{N+1}/(1-q^{N+1}) for q = βt = 1 - 2^{-K}.
        let q: f64 = 1.0 - 0.5f64.powi(schedule_len as i32);
        let target = tail_tol / (1.0 + tail_tol);
        let terms = (target.ln() / q.ln()).ceil() as usize;
        if terms > 3_000_000 {
            return Err(Error::Config(format!(
                "schedule of length {schedule_len} at tolerance {tail_tol} \
                 needs {terms} terms"
            )));
        }
        Ok(SeriesConfig {
            terms: terms.max(1),
            t_schedule,
            tail_tolerance: tail_tol,
        })
    }

    /// `auto` with the default schedule length and tail tolerance.
    pub fn auto_default(r: f64) -> Result<Self> {
        Self::auto(r, Self::DEFAULT_SCHEDULE_LEN, Self::DEFAULT_TAIL_TOL)
    }

    pub fn last_t(&self) -> f64 {
        *self.t_schedule.last().expect("non-empty schedule")
    }

    /// Structural checks plus the range requirement `0 < t_1 < … < t_K < r`.
    pub fn validate(&self, r: f64) -> Result<()> {
        if self.terms == 0 {
            return Err(Error::Config("terms must be positive".into()));
        }
        if self.t_schedule.is_empty() {
            return Err(Error::Config("empty t-schedule".into()));
        }
        let mut prev = 0.0;
        for &t in &self.t_schedule {
            if !(t > prev) {
                return Err(Error::Config(
                    "t-schedule must be strictly increasing and positive".into(),
                ));
            }
            prev = t;
        }
        if !(prev < r) {
            return Err(Error::Config(format!(
                "last scheduled t = {prev} is not below r = {r}"
            )));
        }
        Ok(())
    }

    /// Certifies the tail requirement against a built engine: the
    /// geometric tail estimate `(βt)^{N+1}/(1-βt)` relative to the
    /// computed `L_N(I,t)` must not exceed `tail_tolerance`.
    pub fn certify_tail(&self, engine: &LapSeries, beta: f64) -> Result<f64> {
        let q = beta * engine.t();
        let tail = if q >= 1.0 {
            f64::INFINITY
        } else {
            q.powi(engine.terms() as i32 + 1) / (1.0 - q)
        };
        let rel = tail / engine.total().series;
        if rel > self.tail_tolerance {
            return Err(Error::Config(format!(
                "relative tail {rel:.3e} exceeds tolerance {:.3e} at t = {} \
                 with {} terms",
                self.tail_tolerance,
                engine.t(),
                engine.terms()
            )));
        }
        Ok(rel)
    }
}

/// A truncated series value together with the quantities needed for the
/// finite-order error bounds.
#[derive(Debug, Clone, Copy)]
pub struct PrefixValue {
    /// `L_N(J,t)`.
    pub series: f64,
    /// The top term `t^N ℓ(f^N|J)`.
    pub top: f64,
}

/// `series_l` result: the partial sum and the geometric tail bound.
#[derive(Debug, Clone, Copy)]
pub struct SeriesValue {
    pub partial_sum: f64,
    pub tail_bound: f64,
}

/// `lambda_ratio` result: the clamped ratio plus diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct Lambda {
    /// Ratio clamped to `[0,1]`.
    pub value: f64,
    /// Raw ratio before clamping.
    pub raw: f64,
    /// Top term of the numerator relative to `L_N(I,t)`.
    pub top_rel: f64,
}

// Orbit step records packed into a u32: lap index, count of turning
// points strictly below, and the lap direction. Keeps the depth loops
// memory-lean.
const LAP_BITS: u32 = 12;
const LAP_MASK: u32 = (1 << LAP_BITS) - 1;
const DEC_BIT: u32 = 1 << (2 * LAP_BITS);

#[inline]
fn pack_step(tau: usize, lap: usize, decreasing: bool) -> u32 {
    lap as u32 | ((tau as u32) << LAP_BITS) | if decreasing { DEC_BIT } else { 0 }
}

/// Shared, immutable series engine for one `(f, t, terms)` triple.
///
/// Queries may run concurrently; building the engine walks the forward
/// orbits of the lap-endpoint values once and fills the depth tables.
pub struct LapSeries {
    t: f64,
    terms: usize,
    a: f64,
    b: f64,
    seg_x: Vec<f64>,
    seg_y: Vec<f64>,
    turn_x: Vec<f64>,
    lap_inc: Vec<bool>,
    n_laps: usize,
    /// `t^M`, `M = 0..=terms`.
    tpow: Vec<f64>,
    /// `Σ_{n=1..M} t^n`.
    tsum: Vec<f64>,
    /// Per lap endpoint `j`: `S_M(v_j)` for all `M`.
    col_s: Vec<Vec<f64>>,
    col_r: Vec<Vec<f64>>,
    /// Per depth `M`: prefix sums over laps of `|S_M(v_{i+1}) - S_M(v_i)|`.
    w_s: Vec<f64>,
    w_r: Vec<f64>,
    /// `(min,max)` lap-endpoint indices of each lap's image, by value.
    lap_pairs: Vec<(usize, usize)>,
    geom: f64,
    total: PrefixValue,
}

impl LapSeries {
    pub fn new(f: &PLMap, t: f64, terms: usize) -> Result<Self> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::Domain(format!("series parameter t = {t} not in (0,1)")));
        }
        let seg_x: Vec<f64> = f.breakpoints().iter().map(scalar_to_f64).collect();
        let seg_y: Vec<f64> = f.values().iter().map(scalar_to_f64).collect();
        let ends = f.lap_endpoints();
        let turn_x: Vec<f64> = ends[1..ends.len() - 1].iter().map(scalar_to_f64).collect();
        let n_laps = turn_x.len() + 1;
        let lap_inc: Vec<bool> = (0..n_laps).map(|m| f.lap_increasing(m)).collect();
        let lap_vals: Vec<f64> = ends
            .iter()
            .map(|s| scalar_to_f64(&f.eval(s).expect("lap endpoint in domain")))
            .collect();
        let lap_pairs: Vec<(usize, usize)> = (0..n_laps)
            .map(|m| {
                if lap_vals[m] <= lap_vals[m + 1] {
                    (m, m + 1)
                } else {
                    (m + 1, m)
                }
            })
            .collect();

        let mut tpow = Vec::with_capacity(terms + 1);
        let mut tsum = Vec::with_capacity(terms + 1);
        let (mut p, mut s) = (1.0f64, 0.0f64);
        tpow.push(p);
        tsum.push(s);
        for _ in 0..terms {
            p *= t;
            s += p;
            tpow.push(p);
            tsum.push(s);
        }
        let geom = 1.0 + s;

        let mut eng = LapSeries {
            t,
            terms,
            a: seg_x[0],
            b: seg_x[seg_x.len() - 1],
            seg_x,
            seg_y,
            turn_x,
            lap_inc,
            n_laps,
            tpow,
            tsum,
            col_s: Vec::new(),
            col_r: Vec::new(),
            w_s: vec![0.0; (terms + 1) * n_laps],
            w_r: vec![0.0; (terms + 1) * n_laps],
            lap_pairs,
            geom,
            total: PrefixValue { series: 0.0, top: 0.0 },
        };
        eng.build_tables(&lap_vals);
        eng.total = eng.prefix_f64(eng.b);
        Ok(eng)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn terms(&self) -> usize {
        self.terms
    }

    /// `L_N(I,t)` and its top term.
    pub fn total(&self) -> PrefixValue {
        self.total
    }

    fn clamp(&self, y: f64) -> f64 {
        y.max(self.a).min(self.b)
    }

    fn eval_f64(&self, x: f64) -> f64 {
        let i = self
            .seg_x
            .partition_point(|&d| d < x)
            .saturating_sub(1)
            .min(self.seg_x.len() - 2);
        let (x0, x1) = (self.seg_x[i], self.seg_x[i + 1]);
        let (y0, y1) = (self.seg_y[i], self.seg_y[i + 1]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    fn locate(&self, y: f64) -> StepRec {
        let tau = self.turn_x.partition_point(|&s| s < y);
        let lap = tau.min(self.n_laps - 1);
        StepRec {
            tau: tau as u32,
            lap: lap as u32,
            sign: if self.lap_inc[lap] { 1.0 } else { -1.0 },
        }
    }

    /// Forward orbit records; stops early once the orbit is stationary
    /// in `f64` (the remaining points repeat the last record).
    fn orbit(&self, y0: f64) -> Vec<StepRec> {
        let mut recs = Vec::new();
        let mut y = self.clamp(y0);
        for _ in 0..self.terms.max(1) {
            recs.push(self.locate(y));
            let next = self.clamp(self.eval_f64(y));
            if next == y {
                break;
            }
            y = next;
        }
        recs
    }

    fn build_tables(&mut self, lap_vals: &[f64]) {
        let n = self.terms;
        let orbits: Vec<Vec<StepRec>> = lap_vals.iter().map(|&v| self.orbit(v)).collect();
        let n_pts = orbits.len();
        self.col_s = vec![vec![0.0; n + 1]; n_pts];
        self.col_r = vec![vec![0.0; n + 1]; n_pts];
        let mut prev_s: Vec<Vec<f64>> = orbits.iter().map(|o| vec![0.0; o.len()]).collect();
        let mut prev_r = prev_s.clone();
        let mut cur_s = prev_s.clone();
        let mut cur_r = prev_s.clone();
        let t = self.t;
        for depth in 1..=n {
            let wrow = &self.w_s[(depth - 1) * self.n_laps..depth * self.n_laps];
            let wrow_r = &self.w_r[(depth - 1) * self.n_laps..depth * self.n_laps];
            for (j, o) in orbits.iter().enumerate() {
                let cap = o.len() - 1;
                let kmax = (n - depth).min(cap);
                let (ps, pr) = (&prev_s[j], &prev_r[j]);
                let (cs, cr) = (&mut cur_s[j], &mut cur_r[j]);
                for k in 0..=kmax {
                    let rec = o[k];
                    let lap = rec.lap as usize;
                    let nxt = (k + 1).min(cap);
                    cs[k] = rec.tau as f64 * self.tsum[depth]
                        + t * (wrow[lap] + rec.sign * (ps[nxt] - self.col_s[lap][depth - 1]));
                    cr[k] = rec.tau as f64 * self.tpow[depth]
                        + t * (wrow_r[lap] + rec.sign * (pr[nxt] - self.col_r[lap][depth - 1]));
                }
            }
            for j in 0..n_pts {
                self.col_s[j][depth] = cur_s[j][0];
                self.col_r[j][depth] = cur_r[j][0];
            }
            let base = depth * self.n_laps;
            let mut acc_s = 0.0;
            let mut acc_r = 0.0;
            for m in 0..self.n_laps {
                self.w_s[base + m] = acc_s;
                self.w_r[base + m] = acc_r;
                let (lo, hi) = self.lap_pairs[m];
                acc_s += self.col_s[hi][depth] - self.col_s[lo][depth];
                acc_r += self.col_r[hi][depth] - self.col_r[lo][depth];
            }
            std::mem::swap(&mut prev_s, &mut cur_s);
            std::mem::swap(&mut prev_r, &mut cur_r);
        }
    }

    fn chain(&self, y: f64) -> (f64, f64) {
        let recs = self.orbit(y);
        let cap = recs.len() - 1;
        let n = self.terms;
        let (mut s, mut r) = (0.0f64, 0.0f64);
        let t = self.t;
        for depth in 1..=n {
            let rec = recs[(n - depth).min(cap)];
            let lap = rec.lap as usize;
            let w = self.w_s[(depth - 1) * self.n_laps + lap];
            let wr = self.w_r[(depth - 1) * self.n_laps + lap];
            s = rec.tau as f64 * self.tsum[depth]
                + t * (w + rec.sign * (s - self.col_s[lap][depth - 1]));
            r = rec.tau as f64 * self.tpow[depth]
                + t * (wr + rec.sign * (r - self.col_r[lap][depth - 1]));
        }
        (s, r)
    }

    fn prefix_f64(&self, y: f64) -> PrefixValue {
        let (s, r) = self.chain(self.clamp(y));
        PrefixValue {
            series: s + self.geom,
            top: r + self.tpow[self.terms],
        }
    }

    /// `L_N([a,y],t)` with its top term.
    pub fn prefix(&self, y: &crate::scalar::Scalar) -> PrefixValue {
        self.prefix_f64(scalar_to_f64(y))
    }

    /// Batched prefixes, evaluated in parallel.
    pub fn prefix_many(&self, ys: &[f64]) -> Vec<PrefixValue> {
        ys.par_iter().map(|&y| self.prefix_f64(y)).collect()
    }

    /// `L_N(J,t)` for a subinterval, via the cumulative counts at the two
    /// endpoints.
    pub fn interval(&self, j: &IntervalJ) -> PrefixValue {
        let (s_lo, r_lo) = self.chain(self.clamp(scalar_to_f64(j.lo())));
        let (s_hi, r_hi) = self.chain(self.clamp(scalar_to_f64(j.hi())));
        PrefixValue {
            series: (s_hi - s_lo) + self.geom,
            top: (r_hi - r_lo) + self.tpow[self.terms],
        }
    }

    /// `Λ_N(J,t)` clamped to `[0,1]`, with the raw value recorded.
    pub fn lambda(&self, j: &IntervalJ) -> Lambda {
        let pv = self.interval(j);
        let raw = pv.series / self.total.series;
        Lambda {
            value: raw.clamp(0.0, 1.0),
            raw,
            top_rel: pv.top / self.total.series,
        }
    }
}

fn check_subinterval(f: &PLMap, j: &IntervalJ) -> Result<()> {
    if j.lo() < f.a() || j.hi() > f.b() {
        return Err(Error::Domain(format!(
            "interval [{}, {}] not contained in the domain",
            j.lo(),
            j.hi()
        )));
    }
    Ok(())
}

fn check_t(t: f64, r: f64) -> Result<()> {
    if !(t > 0.0 && t < r) {
        return Err(Error::Domain(format!(
            "t = {t} outside (0, r) with r = {r}: the series need not converge"
        )));
    }
    Ok(())
}

/// Partial sum `Σ_{n=0}^{N} ℓ(f^n|J) t^n` together with the geometric
/// tail bound `(βt)^{N+1}/(1-βt)`.
pub fn series_l(f: &PLMap, j: &IntervalJ, t: f64, terms: usize) -> Result<SeriesValue> {
    check_subinterval(f, j)?;
    let growth = growth_data(f)?;
    check_t(t, growth.r)?;
    let eng = LapSeries::new(f, t, terms)?;
    let q = growth.beta * t;
    Ok(SeriesValue {
        partial_sum: eng.interval(j).series,
        tail_bound: q.powi(terms as i32 + 1) / (1.0 - q),
    })
}

/// `Λ_N(J,t) = L_N(J,t)/L_N(I,t)`, clamped to `[0,1]`.
pub fn lambda_ratio(f: &PLMap, j: &IntervalJ, t: f64, terms: usize) -> Result<Lambda> {
    check_subinterval(f, j)?;
    let growth = growth_data(f)?;
    check_t(t, growth.r)?;
    let eng = LapSeries::new(f, t, terms)?;
    Ok(eng.lambda(j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, ratio};

    fn tent2() -> PLMap {
        PLMap::new(
            vec![int(0), ratio(1, 2), int(1)],
            vec![int(0), int(1), int(0)],
        )
        .unwrap()
    }

    fn tent32() -> PLMap {
        PLMap::new(
            vec![int(0), ratio(1, 2), int(1)],
            vec![int(0), ratio(3, 4), int(0)],
        )
        .unwrap()
    }

    /// Oracle: the same series from explicit iterates and exact lap
    /// counting.
    fn oracle_series(f: &PLMap, j: &IntervalJ, t: f64, terms: usize) -> f64 {
        let mut sum = 0.0;
        let mut tp = 1.0;
        for n in 0..=terms {
            let it = f.iterate(n as u32).unwrap();
            sum += it.lap_count_on(j) as f64 * tp;
            tp *= t;
        }
        sum
    }

    #[test]
    fn full_tent_series_is_exact_geometric() {
        let f = tent2();
        let whole = IntervalJ::new(int(0), int(1)).unwrap();
        let v = series_l(&f, &whole, 0.25, 20).unwrap();
        // Σ_{n=0}^{20} 2^n 4^{-n} = 2 - 2^{-20}, exactly representable
        assert_eq!(v.partial_sum, 2.0 - 0.5f64.powi(20));
        assert!(v.tail_bound > 0.0 && v.tail_bound < 1e-6);
    }

    #[test]
    fn zero_terms_gives_one() {
        let f = tent2();
        for j in [
            IntervalJ::new(int(0), int(1)).unwrap(),
            IntervalJ::new(ratio(1, 3), ratio(2, 3)).unwrap(),
        ] {
            let v = series_l(&f, &j, 0.1, 0).unwrap();
            assert_eq!(v.partial_sum, 1.0);
        }
    }

    #[test]
    fn engine_matches_explicit_iterates() {
        let maps = [tent2(), tent32()];
        let js = [
            IntervalJ::new(int(0), int(1)).unwrap(),
            IntervalJ::new(ratio(17, 113), ratio(90, 113)).unwrap(),
            IntervalJ::new(ratio(1, 7), ratio(2, 7)).unwrap(),
        ];
        for f in &maps {
            for j in &js {
                for t in [0.1, 0.3] {
                    let eng = LapSeries::new(f, t, 10).unwrap();
                    let got = eng.interval(j).series;
                    let want = oracle_series(f, j, t, 10);
                    assert!(
                        (got - want).abs() <= 1e-9 * want.max(1.0),
                        "series mismatch: {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn engine_prefix_matches_oracle_on_grid() {
        let f = tent32();
        let eng = LapSeries::new(&f, 0.35, 12).unwrap();
        for k in 1..20 {
            let x = ratio(k, 20);
            let j = IntervalJ::new(int(0), x.clone()).unwrap();
            let got = eng.prefix(&x).series;
            let want = oracle_series(&f, &j, 0.35, 12);
            assert!((got - want).abs() <= 1e-9 * want, "{got} vs {want} at {x}");
        }
    }

    #[test]
    fn lower_bound_from_growth() {
        // L_N(I,t) >= Σ (βt)^n for uniformly PL slope-β maps
        let f = tent32();
        let (beta, t, terms) = (1.5, 0.5, 40);
        let eng = LapSeries::new(&f, t, terms).unwrap();
        let q: f64 = beta * t;
        let geom = (1.0 - q.powi(terms as i32 + 1)) / (1.0 - q);
        assert!(eng.total().series >= geom - 1e-9);
    }

    #[test]
    fn lambda_of_whole_interval_is_one() {
        let f = tent32();
        let eng = LapSeries::new(&f, 0.6, 200).unwrap();
        let whole = IntervalJ::new(int(0), int(1)).unwrap();
        let lam = eng.lambda(&whole);
        assert_eq!(lam.value, 1.0);
        assert_eq!(lam.raw, 1.0);
    }

    #[test]
    fn tent2_left_half_ratio_approaches_half() {
        let f = tent2();
        let j = IntervalJ::new(int(0), ratio(1, 2)).unwrap();
        // Λ([0,1/2],t) = (1-2t) + t exactly in the limit N→∞; along the
        // schedule it approaches 1/2.
        let mut last_gap = f64::INFINITY;
        for k in [4, 8, 12] {
            let t = 0.5 * (1.0 - 0.5f64.powi(k));
            let cfg = SeriesConfig::auto(0.5, k as usize, 1e-4).unwrap();
            let lam = lambda_ratio(&f, &j, t, cfg.terms).unwrap();
            let gap = (lam.value - 0.5).abs();
            assert!(gap < last_gap);
            last_gap = gap;
        }
        assert!(last_gap < 1e-3);
    }

    #[test]
    fn t_outside_radius_is_rejected() {
        let f = tent2();
        let j = IntervalJ::new(int(0), int(1)).unwrap();
        // r = 1/2 for the full tent
        assert!(series_l(&f, &j, 0.5, 10).is_err());
        assert!(series_l(&f, &j, 0.7, 10).is_err());
        assert!(lambda_ratio(&f, &j, -0.1, 10).is_err());
    }

    #[test]
    fn config_auto_terms_meet_tail() {
        let cfg = SeriesConfig::auto(0.5, 6, 1e-3).unwrap();
        let f = tent2();
        let eng = LapSeries::new(&f, cfg.last_t(), cfg.terms).unwrap();
        let rel = cfg.certify_tail(&eng, 2.0).unwrap();
        assert!(rel <= 1e-3);
        // deliberately tiny truncation order: certification fails
        let short = SeriesConfig {
            terms: 10,
            t_schedule: cfg.t_schedule.clone(),
            tail_tolerance: 1e-3,
        };
        let eng2 = LapSeries::new(&f, short.last_t(), short.terms).unwrap();
        assert!(short.certify_tail(&eng2, 2.0).is_err());
    }

    #[test]
    fn config_validation() {
        let cfg = SeriesConfig::auto(0.5, 8, 1e-4).unwrap();
        assert!(cfg.validate(0.5).is_ok());
        assert!(cfg.validate(0.4).is_err());
        let bad = SeriesConfig {
            terms: 0,
            ..cfg.clone()
        };
        assert!(bad.validate(0.5).is_err());
    }
}
