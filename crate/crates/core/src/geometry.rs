//! Closed catalog of domains with exact distance-to-complement.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Analytic description of the open set `D`.
///
/// Every shape supports exact evaluation of `delta(x)`, the Euclidean distance
/// from `x` to the complement of `D`, and exact ray/domain intersection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum DomainGeometry {
    WholeSpace,
    /// `{x : x_1 > 0}`.
    HalfSpace,
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// Finite union of open intervals in dimension one, sorted, with positive
    /// lengths and positive gaps.
    IntervalUnion {
        intervals: Vec<(f64, f64)>,
    },
    ExteriorOfBall {
        center: Vec<f64>,
        radius: f64,
    },
}

impl DomainGeometry {
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        DomainGeometry::Ball { center, radius }
    }

    pub fn intervals(intervals: Vec<(f64, f64)>) -> Self {
        DomainGeometry::IntervalUnion { intervals }
    }

    pub fn exterior(center: Vec<f64>, radius: f64) -> Self {
        DomainGeometry::ExteriorOfBall { center, radius }
    }

    /// Checks the shape invariants against the ambient dimension.
    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            DomainGeometry::WholeSpace | DomainGeometry::HalfSpace => Ok(()),
            DomainGeometry::Ball { center, radius }
            | DomainGeometry::ExteriorOfBall { center, radius } => {
                if center.len() != d {
                    return Err(Error::Config(format!(
                        "geometry center has {} coordinates, expected {d}",
                        center.len()
                    )));
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::Config(format!("radius must be positive, got {radius}")));
                }
                Ok(())
            }
            DomainGeometry::IntervalUnion { intervals } => {
                if d != 1 {
                    return Err(Error::Config("interval-union requires d = 1".into()));
                }
                if intervals.is_empty() {
                    return Err(Error::Config("interval-union needs at least one interval".into()));
                }
                for (i, &(a, b)) in intervals.iter().enumerate() {
                    if !(a.is_finite() && b.is_finite() && b > a) {
                        return Err(Error::Config(format!("interval {i} = ({a}, {b}) has no positive length")));
                    }
                    if i > 0 && a <= intervals[i - 1].1 {
                        return Err(Error::Config(format!(
                            "interval {i} does not start after interval {} with a positive gap",
                            i - 1
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// Short kebab-case name used in reports.
    pub fn label(&self) -> String {
        match self {
            DomainGeometry::WholeSpace => "whole-space".into(),
            DomainGeometry::HalfSpace => "half-space".into(),
            DomainGeometry::Ball { .. } => "ball".into(),
            DomainGeometry::IntervalUnion { .. } => "interval-union".into(),
            DomainGeometry::ExteriorOfBall { .. } => "exterior-of-ball".into(),
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, DomainGeometry::Ball { .. } | DomainGeometry::IntervalUnion { .. })
    }

    pub fn is_whole_space(&self) -> bool {
        matches!(self, DomainGeometry::WholeSpace)
    }

    /// Diameter of `D`; infinite for unbounded shapes.
    pub fn diameter(&self) -> f64 {
        match self {
            DomainGeometry::Ball { radius, .. } => 2.0 * radius,
            DomainGeometry::IntervalUnion { intervals } => {
                intervals.last().map(|l| l.1).unwrap_or(0.0) - intervals.first().map(|f| f.0).unwrap_or(0.0)
            }
            _ => f64::INFINITY,
        }
    }

    /// Distance from `x` to `D^c`; `+inf` for the whole space, `0` off `D`.
    pub fn delta(&self, x: &[f64]) -> f64 {
        match self {
            DomainGeometry::WholeSpace => f64::INFINITY,
            DomainGeometry::HalfSpace => x[0].max(0.0),
            DomainGeometry::Ball { center, radius } => (radius - dist(x, center)).max(0.0),
            DomainGeometry::ExteriorOfBall { center, radius } => (dist(x, center) - radius).max(0.0),
            DomainGeometry::IntervalUnion { intervals } => {
                let p = x[0];
                intervals
                    .iter()
                    .find(|(a, b)| p > *a && p < *b)
                    .map(|(a, b)| (p - a).min(b - p))
                    .unwrap_or(0.0)
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.delta(x) > 0.0
    }

    /// Sub-intervals of `[0, r_max]` along which `origin + r * dir` lies in `D`.
    /// `dir` must be a unit vector.
    pub fn ray_segments(&self, origin: &[f64], dir: &[f64], r_max: f64) -> Vec<(f64, f64)> {
        let clip = |lo: f64, hi: f64| -> Option<(f64, f64)> {
            let lo = lo.max(0.0);
            let hi = hi.min(r_max);
            (hi > lo).then_some((lo, hi))
        };
        match self {
            DomainGeometry::WholeSpace => vec![(0.0, r_max)],
            DomainGeometry::HalfSpace => {
                let (o, u) = (origin[0], dir[0]);
                if u == 0.0 {
                    if o > 0.0 {
                        vec![(0.0, r_max)]
                    } else {
                        vec![]
                    }
                } else {
                    let root = -o / u;
                    let seg = if u > 0.0 { clip(root, f64::INFINITY) } else { clip(f64::NEG_INFINITY, root) };
                    seg.into_iter().collect()
                }
            }
            DomainGeometry::Ball { center, radius } => match sphere_roots(origin, dir, center, *radius) {
                Some((r0, r1)) => clip(r0, r1).into_iter().collect(),
                None => vec![],
            },
            DomainGeometry::ExteriorOfBall { center, radius } => match sphere_roots(origin, dir, center, *radius) {
                Some((r0, r1)) => [clip(f64::NEG_INFINITY, r0), clip(r1, f64::INFINITY)].into_iter().flatten().collect(),
                None => vec![(0.0, r_max)],
            },
            DomainGeometry::IntervalUnion { intervals } => {
                let (o, u) = (origin[0], dir[0]);
                let mut out: Vec<(f64, f64)> = intervals
                    .iter()
                    .filter_map(|&(a, b)| {
                        let (ra, rb) = ((a - o) / u, (b - o) / u);
                        clip(ra.min(rb), ra.max(rb))
                    })
                    .collect();
                out.sort_by(|p, q| p.0.total_cmp(&q.0));
                out
            }
        }
    }

    /// `D` as sorted open intervals of the real line (d = 1 only).
    pub fn segments_1d(&self) -> Vec<(f64, f64)> {
        let inf = f64::INFINITY;
        match self {
            DomainGeometry::WholeSpace => vec![(-inf, inf)],
            DomainGeometry::HalfSpace => vec![(0.0, inf)],
            DomainGeometry::Ball { center, radius } => vec![(center[0] - radius, center[0] + radius)],
            DomainGeometry::ExteriorOfBall { center, radius } => {
                vec![(-inf, center[0] - radius), (center[0] + radius, inf)]
            }
            DomainGeometry::IntervalUnion { intervals } => intervals.clone(),
        }
    }

    /// Points where the domain has edges along the real line (d = 1 only);
    /// used as quadrature breakpoints.
    pub fn edges_1d(&self) -> Vec<f64> {
        match self {
            DomainGeometry::HalfSpace => vec![0.0],
            DomainGeometry::Ball { center, radius } | DomainGeometry::ExteriorOfBall { center, radius } => {
                vec![center[0] - radius, center[0] + radius]
            }
            DomainGeometry::IntervalUnion { intervals } => intervals.iter().flat_map(|&(a, b)| [a, b]).collect(),
            DomainGeometry::WholeSpace => vec![],
        }
    }

    /// Axis-aligned box used for uniform sampling; unbounded shapes are cut at
    /// `extent`.
    pub fn sampling_box(&self, d: usize, extent: f64) -> (Vec<f64>, Vec<f64>) {
        match self {
            DomainGeometry::Ball { center, radius } => {
                (center.iter().map(|c| c - radius).collect(), center.iter().map(|c| c + radius).collect())
            }
            DomainGeometry::IntervalUnion { intervals } => (vec![intervals[0].0], vec![intervals[intervals.len() - 1].1]),
            DomainGeometry::HalfSpace => {
                let mut lo = vec![-extent; d];
                lo[0] = 0.0;
                (lo, vec![extent; d])
            }
            DomainGeometry::ExteriorOfBall { center, radius } => {
                let e = extent + radius;
                (center.iter().map(|c| c - e).collect(), center.iter().map(|c| c + e).collect())
            }
            DomainGeometry::WholeSpace => (vec![-extent; d], vec![extent; d]),
        }
    }

    /// Uniform point of `D` inside the sampling box.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, d: usize, extent: f64, rng: &mut R) -> Vec<f64> {
        let (lo, hi) = self.sampling_box(d, extent);
        loop {
            let x: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| a + (b - a) * rng.random::<f64>()).collect();
            if self.contains(&x) {
                return x;
            }
        }
    }

    /// Point of `D` whose distance to the boundary is `depth` whenever the
    /// shape admits one; otherwise the deepest available point.
    pub fn sample_at_depth<R: Rng + ?Sized>(&self, d: usize, depth: f64, extent: f64, rng: &mut R) -> Vec<f64> {
        match self {
            DomainGeometry::WholeSpace => self.sample_uniform(d, extent, rng),
            DomainGeometry::HalfSpace => {
                let mut x: Vec<f64> = (0..d).map(|_| extent * (2.0 * rng.random::<f64>() - 1.0)).collect();
                x[0] = depth;
                x
            }
            DomainGeometry::Ball { center, radius } => {
                let u = random_direction(d, rng);
                let rho = (radius - depth).max(0.0);
                center.iter().zip(&u).map(|(c, ui)| c + rho * ui).collect()
            }
            DomainGeometry::ExteriorOfBall { center, radius } => {
                let u = random_direction(d, rng);
                center.iter().zip(&u).map(|(c, ui)| c + (radius + depth) * ui).collect()
            }
            DomainGeometry::IntervalUnion { intervals } => {
                let (a, b) = intervals[rng.random_range(0..intervals.len())];
                let half = 0.5 * (b - a);
                if depth >= half {
                    vec![a + half]
                } else if rng.random::<bool>() {
                    vec![a + depth]
                } else {
                    vec![b - depth]
                }
            }
        }
    }
}

pub fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Uniformly distributed unit vector.
pub fn random_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    if d == 1 {
        return vec![if rng.random::<bool>() { 1.0 } else { -1.0 }];
    }
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|a| a / n).collect();
        }
    }
}

// Roots r0 <= r1 of |origin + r dir - center| = radius, if the line meets the sphere.
fn sphere_roots(origin: &[f64], dir: &[f64], center: &[f64], radius: f64) -> Option<(f64, f64)> {
    let oc: Vec<f64> = origin.iter().zip(center).map(|(o, c)| o - c).collect();
    let b: f64 = oc.iter().zip(dir).map(|(a, u)| a * u).sum();
    let c: f64 = oc.iter().map(|a| a * a).sum::<f64>() - radius * radius;
    let disc = b * b - c;
    if disc <= 0.0 {
        return None;
    }
    let s = disc.sqrt();
    Some((-b - s, -b + s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn delta_catalog_values() {
        assert_eq!(DomainGeometry::WholeSpace.delta(&[3.0]), f64::INFINITY);
        assert_eq!(DomainGeometry::ball(vec![0.0, 0.0], 1.0).delta(&[0.0, 0.0]), 1.0);
        let iu = DomainGeometry::intervals(vec![(0.0, 1.0), (2.0, 3.0)]);
        assert!((iu.delta(&[2.25]) - 0.25).abs() < 1e-15);
        assert_eq!(iu.delta(&[1.5]), 0.0);
        assert_eq!(DomainGeometry::HalfSpace.delta(&[-1.0, 4.0]), 0.0);
        assert_eq!(DomainGeometry::exterior(vec![0.0], 1.0).delta(&[3.0]), 2.0);
    }

    #[test]
    fn interval_union_validation() {
        assert!(DomainGeometry::intervals(vec![(0.0, 1.0), (1.0, 2.0)]).validate(1).is_err());
        assert!(DomainGeometry::intervals(vec![(0.0, 1.0), (0.5, 2.0)]).validate(1).is_err());
        assert!(DomainGeometry::intervals(vec![(0.0, 0.0)]).validate(1).is_err());
        assert!(DomainGeometry::intervals(vec![(0.0, 1.0)]).validate(2).is_err());
        assert!(DomainGeometry::intervals(vec![(0.0, 1.0), (1.5, 2.0)]).validate(1).is_ok());
        assert!(DomainGeometry::ball(vec![0.0], 1.0).validate(2).is_err());
    }

    #[test]
    fn delta_is_one_lipschitz_and_vanishes_off_domain() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let shapes = [
            (2, DomainGeometry::HalfSpace),
            (2, DomainGeometry::ball(vec![0.5, -0.5], 1.5)),
            (1, DomainGeometry::intervals(vec![(-1.0, 0.0), (0.5, 2.0)])),
            (3, DomainGeometry::exterior(vec![0.0, 0.0, 0.0], 1.0)),
        ];
        for (d, g) in shapes {
            for _ in 0..2000 {
                let x: Vec<f64> = (0..d).map(|_| 6.0 * rng.random::<f64>() - 3.0).collect();
                let y: Vec<f64> = (0..d).map(|_| 6.0 * rng.random::<f64>() - 3.0).collect();
                assert!((g.delta(&x) - g.delta(&y)).abs() <= dist(&x, &y) + 1e-12);
                assert_eq!(g.delta(&x) == 0.0, !g.contains(&x));
            }
        }
    }

    #[test]
    fn ray_segments_match_membership() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let shapes = [
            (2, DomainGeometry::HalfSpace),
            (2, DomainGeometry::ball(vec![0.0, 0.0], 1.0)),
            (1, DomainGeometry::intervals(vec![(-1.0, 0.0), (0.5, 2.0)])),
            (2, DomainGeometry::exterior(vec![0.0, 0.0], 1.0)),
        ];
        for (d, g) in shapes {
            for _ in 0..200 {
                let o: Vec<f64> = (0..d).map(|_| 4.0 * rng.random::<f64>() - 2.0).collect();
                let u = random_direction(d, &mut rng);
                let segs = g.ray_segments(&o, &u, 10.0);
                for k in 0..400 {
                    let r = 10.0 * (k as f64 + 0.5) / 400.0;
                    let p: Vec<f64> = o.iter().zip(&u).map(|(a, b)| a + r * b).collect();
                    let inside = segs.iter().any(|&(a, b)| r > a && r < b);
                    if (g.delta(&p)) > 1e-9 {
                        assert!(inside, "{g:?} {o:?} {u:?} r={r}");
                    }
                    if inside {
                        assert!(g.delta(&p) >= -1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn depth_sampling_hits_requested_depth() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = DomainGeometry::ball(vec![0.0, 0.0], 2.0);
        for k in 1..20 {
            let depth = 2f64.powi(-k);
            let x = g.sample_at_depth(2, depth, 4.0, &mut rng);
            assert!((g.delta(&x) - depth).abs() < 1e-12);
        }
    }
}
