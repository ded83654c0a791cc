//! Reference fixtures used by the test suites and shipped as `.map`
//! files: a rational distortion homeomorphism, the tent map conjugated
//! by it, a map with an attracting region that the linearization must
//! collapse, and a seeded generator of random expanding maps.

use rand::Rng;

use crate::map::{compose, PLMap};
use crate::scalar::{int, ratio};

/// A fixed rational increasing homeomorphism of `[0,1]` (one lap, two
/// same-sign kinks).
pub fn distortion_homeo() -> PLMap {
    PLMap::new(
        vec![int(0), ratio(1, 4), ratio(5, 8), int(1)],
        vec![int(0), ratio(2, 5), ratio(4, 5), int(1)],
    )
    .expect("valid homeomorphism")
}

/// `φ ∘ u_{3/2} ∘ φ⁻¹` for the fixed distortion `φ`: conjugate to the
/// slope-3/2 tent map but visibly non-uniform.
pub fn distorted_tent() -> PLMap {
    let phi = distortion_homeo();
    let u = PLMap::new(
        vec![int(0), ratio(1, 2), int(1)],
        vec![int(0), ratio(3, 4), int(0)],
    )
    .expect("tent");
    let inner = compose(&u, &phi.inverse_homeo().expect("bijection")).expect("compose");
    compose(&phi, &inner).expect("compose")
}

/// A map whose left half carries a full tent (entropy `log 2`) while
/// `[3/5, 4/5]` is an invariant attracting interval: the linearizing
/// semi-conjugacy must flatten everything right of the core, and orbits
/// started there never reach it.
pub fn collapse_map() -> PLMap {
    PLMap::new(
        vec![int(0), ratio(1, 4), ratio(1, 2), ratio(3, 5), ratio(4, 5), int(1)],
        vec![int(0), ratio(1, 2), int(0), ratio(3, 4), ratio(13, 20), ratio(19, 20)],
    )
    .expect("valid collapse fixture")
}

/// Random piecewise linear map on `[0,1]` with `turns` turning points,
/// rational breakpoints and values, and large variation on every lap
/// (which in practice forces positive entropy).
pub fn random_plmap<R: Rng>(rng: &mut R, turns: usize) -> PLMap {
    const DEN: i64 = 64;
    loop {
        let mut cuts: Vec<i64> = Vec::with_capacity(turns);
        while cuts.len() < turns {
            let c = rng.gen_range(1..DEN);
            if !cuts.contains(&c) {
                cuts.push(c);
            }
        }
        cuts.sort_unstable();
        let mut xs = vec![int(0)];
        xs.extend(cuts.iter().map(|&c| ratio(c, DEN)));
        xs.push(int(1));

        // alternate between the low and high bands so every lap sweeps
        // most of the interval
        let mut ys = Vec::with_capacity(turns + 2);
        let start_high = rng.gen_bool(0.5);
        for i in 0..turns + 2 {
            let high = (i % 2 == 0) == start_high;
            let v = if high {
                ratio(rng.gen_range(DEN * 7 / 8..=DEN), DEN)
            } else {
                ratio(rng.gen_range(0..=DEN / 8), DEN)
            };
            ys.push(v);
        }
        if let Ok(map) = PLMap::new(xs, ys) {
            return map;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn distorted_tent_has_one_turning_point() {
        let f = distorted_tent();
        assert_eq!(f.lap_count(), 2);
        assert_eq!(f.turning_points(), vec![ratio(2, 3)]);
        assert_eq!(f.eval(&ratio(2, 3)).unwrap(), ratio(13, 15));
        // conjugacy preserves the lap counts of the tent map
        let u = PLMap::new(
            vec![int(0), ratio(1, 2), int(1)],
            vec![int(0), ratio(3, 4), int(0)],
        )
        .unwrap();
        for n in 1..=8 {
            assert_eq!(
                f.iterate(n).unwrap().lap_count(),
                u.iterate(n).unwrap().lap_count()
            );
        }
    }

    #[test]
    fn collapse_map_core_is_invariant() {
        let f = collapse_map();
        assert_eq!(f.lap_count(), 5);
        // the attracting interval maps strictly into itself
        let basin = crate::map::IntervalJ::new(ratio(3, 5), ratio(4, 5)).unwrap();
        let im = f.image(&basin).unwrap();
        assert!(im.lo() > basin.lo() && im.hi() < basin.hi());
        // the left half carries a full tent onto itself
        let core = crate::map::IntervalJ::new(int(0), ratio(1, 2)).unwrap();
        let im = f.image(&core).unwrap();
        assert_eq!(&im, &core);
    }

    #[test]
    fn random_maps_are_reproducible_and_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_plmap(&mut rng, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let b = random_plmap(&mut rng, 3);
        assert_eq!(a, b);
        assert_eq!(a.lap_count(), 4);
    }
}
