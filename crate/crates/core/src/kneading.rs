//! The constructive linearization pipeline: the increasing surjection
//! `π(x) = Λ([a,x])`, the uniformly piecewise linear model pulled out of
//! it, and the plateau diagnostics that decide whether the resulting
//! semi-conjugacy is in fact a conjugacy.

use rayon::prelude::*;

use crate::entropy::growth_data;
use crate::error::{Error, Result};
use crate::map::{IntervalJ, PLMap};
use crate::scalar::{approx_rational, scalar_from_f64, scalar_to_f64, Scalar};
use crate::series::{LapSeries, SeriesConfig};

/// A map sampled on a fixed grid, stored with exact grid coordinates and
/// `f64` values.
#[derive(Debug, Clone)]
pub struct SampledMap {
    pub xs: Vec<Scalar>,
    xs_f64: Vec<f64>,
    pub ys: Vec<f64>,
}

impl SampledMap {
    pub fn new(xs: Vec<Scalar>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::Domain("sampled map needs matching xs/ys, length >= 2".into()));
        }
        let xs_f64 = xs.iter().map(scalar_to_f64).collect();
        Ok(SampledMap { xs, xs_f64, ys })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn grid_f64(&self) -> &[f64] {
        &self.xs_f64
    }

    /// Linear interpolation between samples, clamped at the ends.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs_f64.len();
        if x <= self.xs_f64[0] {
            return self.ys[0];
        }
        if x >= self.xs_f64[n - 1] {
            return self.ys[n - 1];
        }
        let i = self.xs_f64.partition_point(|&d| d < x).saturating_sub(1);
        let (x0, x1) = (self.xs_f64[i], self.xs_f64[i + 1]);
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.ys.windows(2).all(|w| w[1] >= w[0])
    }
}

/// `build_pi` output: the sampled surjection plus its diagnostics.
#[derive(Debug, Clone)]
pub struct Pi {
    /// Samples of `π` on the grid, in `[0,1]`, nondecreasing, with
    /// `π(a) = 0` and `π(b) = 1`.
    pub map: SampledMap,
    /// Largest monotonicity violation removed by the isotonic clamp.
    pub pre_clamp_violation: f64,
    /// The schedule point actually used.
    pub t: f64,
    pub terms: usize,
    /// Achieved relative tail at `t`.
    pub tail_rel: f64,
    pub beta: f64,
    pub r: f64,
}

/// A reduction: the sampled semi-conjugacy, the uniformly piecewise
/// linear model, and the defect diagnostics.
#[derive(Debug, Clone)]
pub struct Reduction {
    /// `ψ = γ∘π`, sampled on the grid (values in `[a,b]`).
    pub psi: SampledMap,
    /// The uniformly piecewise linear model `g`.
    pub model: PLMap,
    /// `max_i |ψ(f(x_i)) - g(ψ(x_i))|` over the grid.
    pub residual: f64,
    /// Maximal flat stretches of `ψ` (empty means numerically a
    /// homeomorphism, hence a conjugacy).
    pub plateaus: Vec<IntervalJ>,
    /// Laps of `f` whose `π`-images collapsed to a point of the model.
    pub collapsed_laps: usize,
    pub pre_clamp_violation: f64,
    /// Per lap of `f`: `||Δπ(f(d))| - β|Δπ(d)||`.
    pub slope_defects: Vec<f64>,
    pub beta: f64,
    pub r: f64,
    pub tail_rel: f64,
}

/// Uniform grid of `n` exact points spanning `[a,b]`.
pub fn uniform_grid(a: &Scalar, b: &Scalar, n: usize) -> Vec<Scalar> {
    assert!(n >= 2, "grid needs at least two points");
    let span = b - a;
    (0..n)
        .map(|i| a + &span * Scalar::new(i.into(), ((n - 1) as i64).into()))
        .collect()
}

fn check_grid(f: &PLMap, grid: &[Scalar]) -> Result<()> {
    if grid.len() < 3 {
        return Err(Error::Domain("grid needs at least three points".into()));
    }
    if grid.first() != Some(f.a()) || grid.last() != Some(f.b()) {
        return Err(Error::Domain("grid must span the whole interval".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("grid must be strictly increasing".into()));
    }
    Ok(())
}

struct Pipeline {
    engine: LapSeries,
    beta: f64,
    r: f64,
    tail_rel: f64,
}

fn prepare(f: &PLMap, cfg: &SeriesConfig) -> Result<Pipeline> {
    let growth = growth_data(f)?;
    if growth.h_point <= 0.0 {
        return Err(Error::Unsupported(
            "linearization requires positive entropy".into(),
        ));
    }
    cfg.validate(growth.r)?;
    let engine = LapSeries::new(f, cfg.last_t(), cfg.terms)?;
    let tail_rel = cfg.certify_tail(&engine, growth.beta)?;
    Ok(Pipeline {
        engine,
        beta: growth.beta,
        r: growth.r,
        tail_rel,
    })
}

/// Clamps a sequence to be nondecreasing (cumulative max), returning the
/// largest violation repaired.
fn isotonic(values: &mut [f64]) -> f64 {
    let mut worst = 0.0f64;
    let mut run = f64::NEG_INFINITY;
    for v in values.iter_mut() {
        if *v < run {
            worst = worst.max(run - *v);
            *v = run;
        } else {
            run = *v;
        }
    }
    worst
}

fn pi_values(pipe: &Pipeline, xs: &[f64]) -> (Vec<f64>, f64) {
    let total = pipe.engine.total().series;
    let mut vals: Vec<f64> = pipe
        .engine
        .prefix_many(xs)
        .into_iter()
        .map(|p| (p.series / total).clamp(0.0, 1.0))
        .collect();
    vals[0] = 0.0;
    let n = vals.len();
    vals[n - 1] = 1.0;
    let violation = isotonic(&mut vals);
    (vals, violation)
}

/// Builds the sampled increasing surjection `π` on the given grid,
/// evaluating the lap-count ratio at the last scheduled `t` and
/// isotonically repairing sub-tolerance monotonicity noise.
pub fn build_pi(f: &PLMap, grid: &[Scalar], cfg: &SeriesConfig) -> Result<Pi> {
    check_grid(f, grid)?;
    let pipe = prepare(f, cfg)?;
    let xs_f64: Vec<f64> = grid.iter().map(scalar_to_f64).collect();
    let (vals, violation) = pi_values(&pipe, &xs_f64);
    Ok(Pi {
        map: SampledMap::new(grid.to_vec(), vals)?,
        pre_clamp_violation: violation,
        t: pipe.engine.t(),
        terms: pipe.engine.terms(),
        tail_rel: pipe.tail_rel,
        beta: pipe.beta,
        r: pipe.r,
    })
}

/// Builds the full reduction `(ψ, g)` of `f` on the given grid.
pub fn build_reduction(f: &PLMap, grid: &[Scalar], cfg: &SeriesConfig) -> Result<Reduction> {
    check_grid(f, grid)?;
    let pipe = prepare(f, cfg)?;
    let (a, b) = (f.a().clone(), f.b().clone());
    let (a64, b64) = (scalar_to_f64(&a), scalar_to_f64(&b));
    let span = b64 - a64;
    let gamma = |u: f64| a64 + span * u;

    let xs_f64: Vec<f64> = grid.iter().map(scalar_to_f64).collect();
    let (pi_grid, violation) = pi_values(&pipe, &xs_f64);
    let psi_vals: Vec<f64> = pi_grid.iter().map(|&u| gamma(u)).collect();
    let psi = SampledMap::new(grid.to_vec(), psi_vals)?;

    // π at the lap endpoints and at their images: the turning data of g.
    let ends = f.lap_endpoints();
    let end_imgs: Vec<Scalar> = ends
        .iter()
        .map(|s| f.eval(s).expect("lap endpoint in domain"))
        .collect();
    let total = pipe.engine.total().series;
    let pi_at = |pts: &[Scalar]| -> Vec<f64> {
        let xf: Vec<f64> = pts.iter().map(scalar_to_f64).collect();
        pipe.engine
            .prefix_many(&xf)
            .into_iter()
            .map(|p| (p.series / total).clamp(0.0, 1.0))
            .collect()
    };
    let mut pi_ends = pi_at(&ends);
    pi_ends[0] = 0.0;
    let k = pi_ends.len();
    pi_ends[k - 1] = 1.0;
    isotonic(&mut pi_ends);
    let mut pi_imgs = pi_at(&end_imgs);
    // endpoints that map exactly onto an endpoint deserve exact images
    for (u, img) in pi_imgs.iter_mut().zip(&end_imgs) {
        if img == &a {
            *u = 0.0;
        } else if img == &b {
            *u = 1.0;
        }
    }

    let slope_defects: Vec<f64> = (0..k - 1)
        .map(|i| ((pi_imgs[i + 1] - pi_imgs[i]).abs() - pipe.beta * (pi_ends[i + 1] - pi_ends[i])).abs())
        .collect();

    let collapse_eps = 10.0 * cfg.tail_tolerance;
    let (model, collapsed_laps) = model_from_nodes(
        &pi_ends.iter().map(|&u| gamma(u)).collect::<Vec<_>>(),
        &pi_imgs.iter().map(|&u| gamma(u)).collect::<Vec<_>>(),
        collapse_eps * span,
        &a,
        &b,
    )?;

    // residual on the grid: ψ(f(x)) via the engine, g(ψ(x)) exactly
    let f_grid: Vec<f64> = grid
        .iter()
        .map(|x| scalar_to_f64(&f.eval(x).expect("grid point in domain")))
        .collect();
    let psi_of_fx: Vec<f64> = pipe
        .engine
        .prefix_many(&f_grid)
        .into_iter()
        .map(|p| gamma((p.series / total).clamp(0.0, 1.0)))
        .collect();
    let residual = psi
        .ys
        .par_iter()
        .zip(psi_of_fx.par_iter())
        .map(|(&psi_x, &lhs)| {
            let arg = scalar_from_f64(psi_x.max(a64).min(b64));
            let arg = arg.max(a.clone()).min(b.clone());
            let rhs = scalar_to_f64(&model.eval(&arg).expect("clamped into domain"));
            (lhs - rhs).abs()
        })
        .reduce(|| 0.0, f64::max);

    let tol = default_plateau_tol(&psi);
    let plateaus = detect_plateaus(&psi, tol)?;

    Ok(Reduction {
        psi,
        model,
        residual,
        plateaus,
        collapsed_laps,
        pre_clamp_violation: violation,
        slope_defects,
        beta: pipe.beta,
        r: pipe.r,
        tail_rel: pipe.tail_rel,
    })
}

/// Assembles a piecewise linear model from approximate turning nodes,
/// collapsing laps whose `π`-width vanished.
fn model_from_nodes(
    xs: &[f64],
    ys: &[f64],
    eps: f64,
    a: &Scalar,
    b: &Scalar,
) -> Result<(PLMap, usize)> {
    let mut nodes: Vec<(f64, f64)> = Vec::with_capacity(xs.len());
    let mut collapsed = 0usize;
    for (&x, &y) in xs.iter().zip(ys) {
        match nodes.last() {
            Some(&(px, _)) if x - px <= eps => collapsed += 1,
            _ => nodes.push((x, y)),
        }
    }
    if nodes.len() < 2 {
        return Err(Error::Unsupported(
            "model collapsed to a point (no expanding structure found)".into(),
        ));
    }
    // exact coordinates; endpoints pinned to the domain
    let last = nodes.len() - 1;
    let mut exact_x: Vec<Scalar> = Vec::with_capacity(nodes.len());
    let mut exact_y: Vec<Scalar> = Vec::with_capacity(nodes.len());
    for (i, &(x, y)) in nodes.iter().enumerate() {
        let ex = if i == 0 {
            a.clone()
        } else if i == last {
            b.clone()
        } else {
            approx_rational(x, 1e-12)
        };
        let ey = approx_rational(y, 1e-12).max(a.clone()).min(b.clone());
        exact_x.push(ex);
        exact_y.push(ey);
    }
    // drop interior nodes that create zero slopes (their lap collapsed in
    // value), then let the constructor check the rest
    let mut i = 1;
    while i < exact_x.len() - 1 {
        if exact_y[i] == exact_y[i - 1] || exact_y[i] == exact_y[i + 1] {
            exact_x.remove(i);
            exact_y.remove(i);
            collapsed += 1;
        } else {
            i += 1;
        }
    }
    let model = PLMap::new(exact_x, exact_y)?;
    Ok((model, collapsed))
}

/// Default plateau tolerance: a quarter of the mean grid increment of
/// `ψ`, so graphs without flat stretches (identity-like samples) never
/// qualify while genuine plateaus sit far below it.
pub fn default_plateau_tol(psi: &SampledMap) -> f64 {
    let n = psi.len();
    let range = psi.ys[n - 1] - psi.ys[0];
    range / (n - 1) as f64 / 4.0
}

/// Maximal runs of at least three grid points over which `ψ` rises by at
/// most `tol`. An empty result means `ψ` is numerically injective.
pub fn detect_plateaus(psi: &SampledMap, tol: f64) -> Result<Vec<IntervalJ>> {
    if !psi.is_nondecreasing() {
        return Err(Error::Domain("plateau detection needs nondecreasing samples".into()));
    }
    let n = psi.len();
    let mut out: Vec<IntervalJ> = Vec::new();
    let mut j = 0usize;
    let mut prev_j: isize = -1;
    for i in 0..n {
        if j < i {
            j = i;
        }
        while j + 1 < n && psi.ys[j + 1] - psi.ys[i] <= tol {
            j += 1;
        }
        // inclusion-maximal: the window end advanced beyond the previous
        if j as isize > prev_j && j >= i + 2 {
            out.push(IntervalJ::new(psi.xs[i].clone(), psi.xs[j].clone())?);
            prev_j = j as isize;
        }
    }
    Ok(out)
}

/// Residual recomputation from artifacts alone: `ψ` is interpolated
/// linearly between its samples. Used by verification tooling.
pub fn residual_against(psi: &SampledMap, f: &PLMap, g: &PLMap) -> Result<f64> {
    let mut worst = 0.0f64;
    for (x, &psi_x) in psi.xs.iter().zip(&psi.ys) {
        let fx = f.eval(x)?;
        let lhs = psi.eval(scalar_to_f64(&fx));
        let arg = scalar_from_f64(psi_x).max(g.a().clone()).min(g.b().clone());
        let rhs = scalar_to_f64(&g.eval(&arg)?);
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// Serializes plateau intervals as `[lo, hi]` decimal pairs.
pub fn plateaus_as_f64(plateaus: &[IntervalJ]) -> Vec<[f64; 2]> {
    plateaus
        .iter()
        .map(|j| [scalar_to_f64(j.lo()), scalar_to_f64(j.hi())])
        .collect()
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

    fn small_cfg() -> SeriesConfig {
        SeriesConfig::auto(0.5, 9, 1e-3).unwrap()
    }

    #[test]
    fn pi_endpoints_are_exact() {
        let f = tent2();
        let grid = uniform_grid(&int(0), &int(1), 101);
        let pi = build_pi(&f, &grid, &small_cfg()).unwrap();
        assert_eq!(pi.map.ys[0], 0.0);
        assert_eq!(*pi.map.ys.last().unwrap(), 1.0);
        assert!(pi.map.is_nondecreasing());
    }

    #[test]
    fn pi_of_full_tent_is_near_identity() {
        let f = tent2();
        let grid = uniform_grid(&int(0), &int(1), 101);
        let cfg = SeriesConfig::auto(0.5, 12, 1e-4).unwrap();
        let pi = build_pi(&f, &grid, &cfg).unwrap();
        let sup = pi
            .map
            .ys
            .iter()
            .zip(pi.map.grid_f64())
            .map(|(&y, &x)| (y - x).abs())
            .fold(0.0f64, f64::max);
        assert!(sup <= 1e-3, "sup |π - id| = {sup}");
        assert!(pi.pre_clamp_violation <= 10.0 * cfg.tail_tolerance);
    }

    #[test]
    fn zero_entropy_maps_are_rejected() {
        let id = PLMap::identity(int(0), int(1)).unwrap();
        let grid = uniform_grid(&int(0), &int(1), 11);
        assert!(matches!(
            build_pi(&id, &grid, &small_cfg()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn grid_validation() {
        let f = tent2();
        let short = vec![int(0), int(1)];
        assert!(build_pi(&f, &short, &small_cfg()).is_err());
        let offset = uniform_grid(&int(0), &ratio(1, 2), 11);
        assert!(build_pi(&f, &offset, &small_cfg()).is_err());
    }

    #[test]
    fn identity_samples_have_no_plateaus() {
        let xs = uniform_grid(&int(0), &int(1), 101);
        let ys: Vec<f64> = xs.iter().map(scalar_to_f64).collect();
        let psi = SampledMap::new(xs, ys).unwrap();
        let tol = default_plateau_tol(&psi);
        assert!(detect_plateaus(&psi, tol).unwrap().is_empty());
    }

    #[test]
    fn flat_stretch_is_reported_once() {
        let xs = uniform_grid(&int(0), &int(1), 101);
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| {
                let v = scalar_to_f64(x);
                if v < 0.4 {
                    v
                } else if v <= 0.6 {
                    0.4
                } else {
                    v - 0.2
                }
            })
            .collect();
        let psi = SampledMap::new(xs, ys).unwrap();
        let tol = default_plateau_tol(&psi);
        let plats = detect_plateaus(&psi, tol).unwrap();
        assert_eq!(plats.len(), 1);
        assert!(scalar_to_f64(&plats[0].width()) >= 0.19);
    }

    #[test]
    fn reduction_of_full_tent_recovers_it() {
        let f = tent2();
        let grid = uniform_grid(&int(0), &int(1), 201);
        let cfg = SeriesConfig::auto(0.5, 12, 1e-4).unwrap();
        let red = build_reduction(&f, &grid, &cfg).unwrap();
        assert!(red.residual <= 1e-3, "residual {}", red.residual);
        assert_eq!(red.model.lap_count(), 2);
        assert!(red.plateaus.is_empty());
        assert_eq!(red.collapsed_laps, 0);
        for d in &red.slope_defects {
            assert!(*d <= 0.02, "slope defect {d}");
        }
        // the model's turning point sits at ~1/2 with value ~1
        let tp = red.model.turning_points();
        assert!((scalar_to_f64(&tp[0]) - 0.5).abs() < 1e-3);
    }

    #[test]
    fn residual_against_matches_engine_route() {
        let f = tent2();
        let grid = uniform_grid(&int(0), &int(1), 201);
        let cfg = SeriesConfig::auto(0.5, 12, 1e-4).unwrap();
        let red = build_reduction(&f, &grid, &cfg).unwrap();
        let recomputed = residual_against(&red.psi, &f, &red.model).unwrap();
        assert!((recomputed - red.residual).abs() <= 2e-3);
    }
}
