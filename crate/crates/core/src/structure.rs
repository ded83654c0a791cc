//! Tent family structure: cycles, period-doubling renormalization,
//! periodic points and basin statistics.

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::map::{IntervalJ, PLMap};
use crate::scalar::{bigint_sqrt_floor, int, parse_scalar, ratio, scalar_to_f64, Scalar};

/// Tent slope, stored symbolically so that squares of square roots stay
/// exact across renormalization steps.
#[derive(Debug, Clone, PartialEq)]
pub enum BetaValue {
    Rational(Scalar),
    /// The positive square root of a rational.
    SqrtRational(Scalar),
}

impl BetaValue {
    /// Parses `p/q`, a decimal, or `sqrt(...)` of either.
    pub fn parse(text: &str) -> Result<Self> {
        let s = text.trim();
        if let Some(inner) = s.strip_prefix("sqrt(").and_then(|r| r.strip_suffix(')')) {
            let q = parse_scalar(inner)?;
            if !q.is_positive() {
                return Err(Error::Domain(format!("sqrt of non-positive value `{inner}`")));
            }
            return Ok(BetaValue::SqrtRational(q));
        }
        Ok(BetaValue::Rational(parse_scalar(s)?))
    }

    /// Rational approximation from below, with error at most `2^-bits`
    /// for square roots; rationals are returned exactly.
    pub fn approx(&self, bits: u32) -> Scalar {
        match self {
            BetaValue::Rational(q) => q.clone(),
            BetaValue::SqrtRational(q) => {
                let scaled = q.numer() * q.denom() << (2 * bits as usize);
                let m = bigint_sqrt_floor(&scaled);
                Scalar::new(m, q.denom() << bits as usize)
            }
        }
    }

    /// `β²`, exact in both representations.
    pub fn square(&self) -> Scalar {
        match self {
            BetaValue::Rational(q) => q * q,
            BetaValue::SqrtRational(q) => q.clone(),
        }
    }

    pub fn to_f64(&self) -> f64 {
        scalar_to_f64(&self.approx(80))
    }

    pub fn is_positive(&self) -> bool {
        match self {
            BetaValue::Rational(q) => q.is_positive(),
            BetaValue::SqrtRational(q) => q.is_positive(),
        }
    }

    /// Exact `β > 1`.
    pub fn gt_one(&self) -> bool {
        match self {
            BetaValue::Rational(q) => *q > Scalar::one(),
            BetaValue::SqrtRational(q) => *q > Scalar::one(),
        }
    }

    /// Exact `β <= 2`.
    pub fn le_two(&self) -> bool {
        match self {
            BetaValue::Rational(q) => *q <= int(2),
            BetaValue::SqrtRational(q) => *q <= int(4),
        }
    }

    /// Exact `β <= √2`, the renormalizable branch.
    pub fn le_sqrt2(&self) -> bool {
        self.square() <= int(2)
    }

    pub fn display(&self) -> String {
        match self {
            BetaValue::Rational(q) => crate::scalar::format_scalar(q),
            BetaValue::SqrtRational(q) => format!("sqrt({})", crate::scalar::format_scalar(q)),
        }
    }
}

/// Derived tent parameters: the interior fixed point `d = β/(1+β)`, its
/// mirror `c = 1-d`, and the renormalization depth `p`.
#[derive(Debug, Clone)]
pub struct TentParams {
    pub beta: BetaValue,
    pub d: Scalar,
    pub c: Scalar,
    pub p: u32,
}

impl TentParams {
    pub fn new(beta: &BetaValue, precision: u32) -> Result<Self> {
        let p = cycle_period_exponent(beta)?;
        let bq = beta.approx(precision);
        let d = &bq / (Scalar::one() + &bq);
        let c = Scalar::one() - &d;
        Ok(TentParams {
            beta: beta.clone(),
            d,
            c,
            p,
        })
    }
}

fn tent_from_rational(beta: &Scalar) -> Result<PLMap> {
    PLMap::new(
        vec![int(0), ratio(1, 2), int(1)],
        vec![int(0), beta / int(2), int(0)],
    )
}

/// The tent map `u_β` on `[0,1]`: slope `β` up to the turning point at
/// `1/2`, then `-β`. Requires `β ∈ (0,2]`; square-root slopes are taken
/// at the given precision.
pub fn tent(beta: &BetaValue, precision: u32) -> Result<PLMap> {
    if !beta.is_positive() || !beta.le_two() {
        return Err(Error::Domain(format!(
            "tent slope must lie in (0,2], got {}",
            beta.display()
        )));
    }
    tent_from_rational(&beta.approx(precision))
}

/// Smallest `p >= 0` with `2^{p+1} log β > log 2`; the transitive cycle
/// of `u_β` has period `2^p`. Decided exactly via the equivalent
/// comparison `β^{2^{p+1}} > 2`.
pub fn cycle_period_exponent(beta: &BetaValue) -> Result<u32> {
    if !beta.gt_one() || !beta.le_two() {
        return Err(Error::Domain(format!(
            "no transitive cycle for slope {} outside (1,2]",
            beta.display()
        )));
    }
    let mut power = beta.square(); // β^{2^{p+1}} at p = 0
    for p in 0..64u32 {
        if power > int(2) {
            return Ok(p);
        }
        power = &power * &power;
    }
    Err(Error::Domain(format!(
        "slope {} too close to 1 (period exponent exceeds 2^64)",
        beta.display()
    )))
}

/// Disjoint closed intervals cyclically permuted by a map.
#[derive(Debug, Clone)]
pub struct Cycle {
    /// In cyclic order: `f(components[k]) ⊆ components[k+1 mod period]`.
    pub components: Vec<IntervalJ>,
    pub period: usize,
}

impl Cycle {
    /// Exact validation of disjointness and cyclic invariance under `f`.
    pub fn validate(&self, f: &PLMap) -> Result<()> {
        if self.components.is_empty() || self.components.len() != self.period {
            return Err(Error::Domain("cycle period must match its component count".into()));
        }
        let mut sorted: Vec<&IntervalJ> = self.components.iter().collect();
        sorted.sort_by(|x, y| x.lo().cmp(y.lo()));
        for w in sorted.windows(2) {
            if w[0].hi() >= w[1].lo() {
                return Err(Error::Domain(format!(
                    "cycle components [{}, {}] and [{}, {}] are not disjoint",
                    w[0].lo(),
                    w[0].hi(),
                    w[1].lo(),
                    w[1].hi()
                )));
            }
        }
        for k in 0..self.period {
            let image = f.image(&self.components[k])?;
            let next = &self.components[(k + 1) % self.period];
            if image.lo() < next.lo() || image.hi() > next.hi() {
                return Err(Error::Domain(format!(
                    "cycle is not invariant: f(B_{k}) = [{}, {}] escapes B_{}",
                    image.lo(),
                    image.hi(),
                    (k + 1) % self.period
                )));
            }
        }
        Ok(())
    }
}

fn cycle_for_rational(beta: &Scalar) -> Result<Cycle> {
    let u = tent_from_rational(beta)?;
    let beta2 = beta * beta;
    if beta2 > int(2) {
        // single transitive interval [u²(½), u(½)]
        let hi = beta / int(2);
        let lo = u.eval(&hi)?;
        return Ok(Cycle {
            components: vec![IntervalJ::new(lo, hi)?],
            period: 1,
        });
    }
    // renormalizable branch: pull the cycle of u_{β²} back through the
    // orientation-reversing rescaling of [c,d] and interleave images
    let d = beta / (Scalar::one() + beta);
    let c = Scalar::one() - &d;
    let width = &d - &c;
    let sub = cycle_for_rational(&beta2)?;
    let mut components = Vec::with_capacity(2 * sub.period);
    for b in &sub.components {
        let pulled = IntervalJ::new(&d - &width * b.hi(), &d - &width * b.lo())?;
        let image = u.image(&pulled)?;
        components.push(pulled);
        components.push(image);
    }
    Ok(Cycle {
        period: components.len(),
        components,
    })
}

/// The transitive cycle of `u_β` for `β ∈ (1,2]`, constructed by
/// descending through the renormalization tower and validated exactly.
pub fn transitive_cycle(beta: &BetaValue, precision: u32) -> Result<Cycle> {
    if !beta.gt_one() || !beta.le_two() {
        return Err(Error::Domain(format!(
            "no transitive cycle for slope {} outside (1,2]",
            beta.display()
        )));
    }
    let bq = beta.approx(precision);
    let cycle = cycle_for_rational(&bq)?;
    cycle.validate(&tent_from_rational(&bq)?)?;
    Ok(cycle)
}

/// Exact affine map `x ↦ offset + slope·x`.
#[derive(Debug, Clone)]
pub struct AffineMap {
    pub slope: Scalar,
    pub offset: Scalar,
}

impl AffineMap {
    pub fn apply(&self, x: &Scalar) -> Scalar {
        &self.offset + &self.slope * x
    }
}

/// One renormalization step: `u_β²` restricted to `[c,d]`, rescaled onto
/// `[0,1]`, is the tent map with parameter `β²`.
#[derive(Debug, Clone)]
pub struct Renormalization {
    pub c: Scalar,
    pub d: Scalar,
    /// Orientation-reversing rescaling of `[c,d]` onto `[0,1]`.
    pub rescale: AffineMap,
    pub new_beta: BetaValue,
}

/// Renormalizes `u_β` for `β ∈ (1,√2]`. The rescaling is chosen
/// orientation-reversing so that the conjugated map is again a tent map
/// (maximum at the turning point); `β²` is exact, coordinates are at the
/// given precision for square-root slopes.
pub fn renormalize(beta: &BetaValue, precision: u32) -> Result<Renormalization> {
    if !beta.gt_one() {
        return Err(Error::Domain(format!(
            "renormalization needs slope > 1, got {}",
            beta.display()
        )));
    }
    if !beta.le_sqrt2() {
        return Err(Error::Domain(format!(
            "slope {} exceeds sqrt(2): not renormalizable in this scheme",
            beta.display()
        )));
    }
    let bq = beta.approx(precision);
    let d = &bq / (Scalar::one() + &bq);
    let c = Scalar::one() - &d;
    let width = &d - &c;
    // ρ^{-1}(x) = (d - x)/(d - c)
    let rescale = AffineMap {
        slope: -width.recip(),
        offset: &d / &width,
    };
    Ok(Renormalization {
        c,
        d,
        rescale,
        new_beta: BetaValue::Rational(beta.square()),
    })
}

/// Sup over `samples+1` equispaced points of `[c,d]` of the conjugacy
/// defect `|ρ^{-1}(u_β²(x)) - u_{β²}(ρ^{-1}(x))|`, evaluated in exact
/// arithmetic.
pub fn renormalization_defect(beta: &BetaValue, precision: u32, samples: usize) -> Result<f64> {
    let rn = renormalize(beta, precision)?;
    let u = tent(beta, precision)?;
    let model = tent(&rn.new_beta, precision)?;
    let width = &rn.d - &rn.c;
    let mut worst = Scalar::zero();
    for i in 0..=samples {
        let x = &rn.c + &width * ratio(i as i64, samples as i64);
        let lhs = rn.rescale.apply(&u.eval(&u.eval(&x)?)?);
        let rhs = model.eval(&rn.rescale.apply(&x))?;
        let gap = (lhs - rhs).abs();
        if gap > worst {
            worst = gap;
        }
    }
    Ok(scalar_to_f64(&worst))
}

/// Exact fixed points of `f^n` with their minimal periods. Segments of
/// `f^n` that lie on the diagonal are reported separately as whole
/// intervals of fixed points.
#[derive(Debug, Clone)]
pub struct PeriodicPoints {
    pub points: Vec<(Scalar, u32)>,
    pub diagonal_segments: Vec<IntervalJ>,
}

/// Finds all periodic points of period dividing `n` by solving each
/// linear segment of `f^n` against the diagonal.
pub fn periodic_points(f: &PLMap, n: u32, cap: usize) -> Result<PeriodicPoints> {
    if n == 0 {
        return Err(Error::Domain("period must be positive".into()));
    }
    let it = f.iterate_with_cap(n, cap)?;
    let xs = it.breakpoints();
    let ys = it.values();
    let mut diagonal_segments = Vec::new();
    let mut fixed: Vec<Scalar> = Vec::new();
    for i in 0..it.segment_count() {
        let dx = &xs[i + 1] - &xs[i];
        let dy = &ys[i + 1] - &ys[i];
        if dx == dy {
            if ys[i] == xs[i] {
                diagonal_segments.push(IntervalJ::new(xs[i].clone(), xs[i + 1].clone())?);
            }
            continue;
        }
        // solve y_i + (dy/dx)(x - x_i) = x exactly
        let x = (&ys[i] * &dx - &xs[i] * &dy) / (&dx - &dy);
        if x >= xs[i] && x <= xs[i + 1] {
            fixed.push(x);
        }
    }
    fixed.sort();
    fixed.dedup();
    let mut points = Vec::with_capacity(fixed.len());
    for x in fixed {
        let period = minimal_period(f, &x, n)?;
        points.push((x, period));
    }
    Ok(PeriodicPoints {
        points,
        diagonal_segments,
    })
}

fn minimal_period(f: &PLMap, x: &Scalar, n: u32) -> Result<u32> {
    for d in 1..=n {
        if n % d != 0 {
            continue;
        }
        let mut y = x.clone();
        for _ in 0..d {
            y = f.eval(&y)?;
        }
        if y == *x {
            return Ok(d);
        }
    }
    Ok(n)
}

/// Fraction of a uniform grid whose orbit enters the cycle within
/// `max_steps` iterations — the finite surrogate for "all but countably
/// many points are absorbed".
pub fn escape_fraction(f: &PLMap, cycle: &Cycle, grid_size: usize, max_steps: usize) -> f64 {
    let mut sorted: Vec<IntervalJ> = cycle.components.clone();
    sorted.sort_by(|x, y| x.lo().cmp(y.lo()));
    let inside = |x: &Scalar| -> bool {
        let i = sorted.partition_point(|c| c.lo() <= x);
        i > 0 && x <= sorted[i - 1].hi()
    };
    let (a, b) = (f.a().clone(), f.b().clone());
    let span = &b - &a;
    let hits = (0..grid_size)
        .into_par_iter()
        .filter(|&i| {
            let mut x = &a + &span * ratio(i as i64, (grid_size - 1) as i64);
            for _ in 0..=max_steps {
                if inside(&x) {
                    return true;
                }
                x = match f.eval(&x) {
                    Ok(y) => y,
                    Err(_) => return false,
                };
            }
            false
        })
        .count();
    hits as f64 / grid_size as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::DEFAULT_NODE_CAP;

    fn rational(n: i64, d: i64) -> BetaValue {
        BetaValue::Rational(ratio(n, d))
    }

    #[test]
    fn tent_values() {
        let u2 = tent(&rational(2, 1), 128).unwrap();
        assert_eq!(u2.values(), &[int(0), int(1), int(0)]);
        let u1 = tent(&rational(1, 1), 128).unwrap();
        assert_eq!(u1.values(), &[int(0), ratio(1, 2), int(0)]);
        let u32 = tent(&rational(3, 2), 128).unwrap();
        assert_eq!(u32.eval(&ratio(1, 2)).unwrap(), ratio(3, 4));
        assert!(tent(&rational(5, 2), 128).is_err());
        assert!(tent(&rational(0, 1), 128).is_err());
    }

    #[test]
    fn beta_parsing_and_squares() {
        let b = BetaValue::parse("sqrt(2)").unwrap();
        assert_eq!(b.square(), int(2));
        let approx = b.approx(128);
        assert!(&approx * &approx <= int(2));
        let err = int(2) - &approx * &approx;
        assert!(scalar_to_f64(&err) < 1e-37);
        assert_eq!(BetaValue::parse("3/2").unwrap(), rational(3, 2));
        assert_eq!(BetaValue::parse("1.3").unwrap(), rational(13, 10));
    }

    #[test]
    fn period_exponents() {
        assert_eq!(cycle_period_exponent(&rational(19, 10)).unwrap(), 0);
        assert_eq!(cycle_period_exponent(&rational(13, 10)).unwrap(), 1);
        assert_eq!(cycle_period_exponent(&rational(23, 20)).unwrap(), 2);
        // boundary: √2 belongs to the period-2 branch
        let sqrt2 = BetaValue::parse("sqrt(2)").unwrap();
        assert_eq!(cycle_period_exponent(&sqrt2).unwrap(), 1);
        assert!(cycle_period_exponent(&rational(1, 1)).is_err());
        assert!(cycle_period_exponent(&rational(1, 2)).is_err());
    }

    #[test]
    fn tent2_cycle_is_whole_interval() {
        let c = transitive_cycle(&rational(2, 1), 128).unwrap();
        assert_eq!(c.period, 1);
        assert_eq!(c.components[0], IntervalJ::new(int(0), int(1)).unwrap());
    }

    #[test]
    fn tent32_cycle() {
        let c = transitive_cycle(&rational(3, 2), 128).unwrap();
        assert_eq!(c.period, 1);
        assert_eq!(
            c.components[0],
            IntervalJ::new(ratio(3, 8), ratio(3, 4)).unwrap()
        );
    }

    #[test]
    fn period_two_cycle_swaps() {
        let beta = rational(13, 10);
        let c = transitive_cycle(&beta, 128).unwrap();
        assert_eq!(c.period, 2);
        let u = tent(&beta, 128).unwrap();
        c.validate(&u).unwrap();
        // swapped: image of B_1 back inside B_0
        let im = u.image(&c.components[1]).unwrap();
        assert!(im.lo() >= c.components[0].lo() && im.hi() <= c.components[0].hi());
    }

    #[test]
    fn period_matches_exponent_for_samples() {
        for k in 1..=20i64 {
            let beta = BetaValue::Rational(int(1) + ratio(k, 20));
            let p = cycle_period_exponent(&beta).unwrap();
            let c = transitive_cycle(&beta, 128).unwrap();
            assert_eq!(c.period as u64, 1u64 << p, "beta = 1 + {k}/20");
            c.validate(&tent(&beta, 128).unwrap()).unwrap();
        }
    }

    #[test]
    fn renormalize_rational_is_exact() {
        let rn = renormalize(&rational(13, 10), 128).unwrap();
        assert_eq!(rn.d, ratio(13, 23));
        assert_eq!(rn.c, ratio(10, 23));
        assert_eq!(rn.new_beta, rational(169, 100));
        // u_β(c) = d exactly
        let u = tent(&rational(13, 10), 128).unwrap();
        assert_eq!(u.eval(&rn.c).unwrap(), rn.d);
        // exact conjugacy: zero defect
        let defect = renormalization_defect(&rational(13, 10), 128, 1001).unwrap();
        assert_eq!(defect, 0.0);
    }

    #[test]
    fn renormalize_sqrt2_boundary() {
        let sqrt2 = BetaValue::parse("sqrt(2)").unwrap();
        let rn = renormalize(&sqrt2, 128).unwrap();
        assert_eq!(rn.new_beta, rational(2, 1));
        let d = scalar_to_f64(&rn.d);
        assert!((d - 2f64.sqrt() / (1.0 + 2f64.sqrt())).abs() < 1e-15);
        assert!(renormalize(&rational(3, 2), 128).is_err());
        assert!(renormalize(&rational(1, 1), 128).is_err());
    }

    #[test]
    fn fixed_points_of_tent_iterates() {
        let u2 = tent(&rational(2, 1), 128).unwrap();
        let pp = periodic_points(&u2, 2, DEFAULT_NODE_CAP).unwrap();
        let pts: Vec<Scalar> = pp.points.iter().map(|(x, _)| x.clone()).collect();
        assert_eq!(pts, vec![int(0), ratio(2, 5), ratio(2, 3), ratio(4, 5)]);
        assert!(pp.diagonal_segments.is_empty());
        // minimal periods: 0 and 2/3 are fixed, the pair {2/5, 4/5} swaps
        let periods: Vec<u32> = pp.points.iter().map(|(_, p)| *p).collect();
        assert_eq!(periods, vec![1, 2, 1, 2]);

        let u32 = tent(&rational(3, 2), 128).unwrap();
        let pp = periodic_points(&u32, 1, DEFAULT_NODE_CAP).unwrap();
        let pts: Vec<Scalar> = pp.points.iter().map(|(x, _)| x.clone()).collect();
        assert_eq!(pts, vec![int(0), ratio(3, 5)]);
    }

    #[test]
    fn diagonal_segment_is_reported() {
        let id = PLMap::identity(int(0), int(1)).unwrap();
        let pp = periodic_points(&id, 1, DEFAULT_NODE_CAP).unwrap();
        assert_eq!(pp.diagonal_segments.len(), 1);
        assert!(pp.points.is_empty());
    }

    #[test]
    fn escape_from_inside_is_total() {
        let beta = rational(2, 1);
        let u = tent(&beta, 128).unwrap();
        let c = transitive_cycle(&beta, 128).unwrap();
        assert_eq!(escape_fraction(&u, &c, 100, 5), 1.0);
    }
}
