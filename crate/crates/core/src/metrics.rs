//! Quantitative comparison of approximate Pareto fronts: set coverage,
//! coverage difference, exact 2-D hypervolume by dimension sweep, the
//! shared min-max normalization, and hypervolume ratios.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evo::dominates_pair;

/// A raw set of objective vectors; not required to be mutually
/// non-dominated (coverage is defined on raw sets, hypervolume pre-filters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontSnapshot {
    pub points: Vec<(f64, f64)>,
    pub label: String,
}

impl FrontSnapshot {
    pub fn new(points: Vec<(f64, f64)>, label: &str) -> Self {
        FrontSnapshot {
            points,
            label: label.to_string(),
        }
    }

    /// The mutually non-dominated subset.
    pub fn non_dominated(&self) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .cloned()
            .filter(|p| !self.points.iter().any(|q| dominates_pair(*q, *p)))
            .collect()
    }
}

/// Upper corner bounding the dominated region for hypervolume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint(pub f64, pub f64);

/// Reference point used in normalized objective space: a margin beyond the
/// nadir so extreme front points still contribute area.
pub const NORMALIZED_REFERENCE: ReferencePoint = ReferencePoint(1.1, 1.1);

/// Fraction of `b`'s points dominated by some point of `a`.
pub fn coverage(a: &FrontSnapshot, b: &FrontSnapshot) -> Result<f64> {
    if b.points.is_empty() {
        return Err(Error::invalid("coverage target set is empty"));
    }
    let covered = b
        .points
        .iter()
        .filter(|p| a.points.iter().any(|q| dominates_pair(*q, **p)))
        .count();
    Ok(covered as f64 / b.points.len() as f64)
}

/// `coverage(a, b) - coverage(b, a)`; positive means `a` covers more.
pub fn delta_coverage(a: &FrontSnapshot, b: &FrontSnapshot) -> Result<f64> {
    Ok(coverage(a, b)? - coverage(b, a)?)
}

/// Min-max normalizes every supplied front against the union's bounds; a
/// degenerate axis (constant across the union) maps to 0. Returns the
/// normalized fronts together with the fixed normalized-space reference.
pub fn normalize_and_reference(fronts: &[FrontSnapshot]) -> (Vec<FrontSnapshot>, ReferencePoint) {
    let all: Vec<(f64, f64)> = fronts.iter().flat_map(|f| f.points.iter().cloned()).collect();
    let bound = |pick: fn(&(f64, f64)) -> f64| {
        let lo = all.iter().map(pick).fold(f64::INFINITY, f64::min);
        let hi = all.iter().map(pick).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (lo1, hi1) = bound(|p| p.0);
    let (lo2, hi2) = bound(|p| p.1);
    let axis = |v: f64, lo: f64, hi: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
    let normalized = fronts
        .iter()
        .map(|f| FrontSnapshot {
            points: f
                .points
                .iter()
                .map(|&(x, y)| (axis(x, lo1, hi1), axis(y, lo2, hi2)))
                .collect(),
            label: f.label.clone(),
        })
        .collect();
    (normalized, NORMALIZED_REFERENCE)
}

/// Exact 2-D hypervolume (minimization) by dimension sweep: filter to the
/// non-dominated subset, drop points beyond the reference, sort by the
/// first objective and accumulate gap-times-height slabs.
pub fn hypervolume(front: &FrontSnapshot, r: ReferencePoint) -> f64 {
    let mut pts: Vec<(f64, f64)> = front
        .non_dominated()
        .into_iter()
        .filter(|p| p.0 <= r.0 && p.1 <= r.1)
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    let mut hv = 0.0;
    for (i, p) in pts.iter().enumerate() {
        let next_x = if i + 1 < pts.len() { pts[i + 1].0 } else { r.0 };
        hv += (next_x - p.0) * (r.1 - p.1);
    }
    hv
}

/// Hypervolume ratio of a front against an ideal front, both normalized
/// over their union and bounded by the shared reference point.
pub fn hv_ratio(front: &FrontSnapshot, ideal: &FrontSnapshot) -> f64 {
    let (normalized, r) = normalize_and_reference(&[front.clone(), ideal.clone()]);
    let hv_front = hypervolume(&normalized[0], r);
    let hv_ideal = hypervolume(&normalized[1], r);
    if hv_ideal == 0.0 {
        if hv_front == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        hv_front / hv_ideal
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::test_rng;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn snap(points: &[(f64, f64)]) -> FrontSnapshot {
        FrontSnapshot::new(points.to_vec(), "t")
    }

    #[test]
    fn coverage_of_identical_nondominated_sets_is_zero() {
        let a = snap(&[(0.0, 1.0), (1.0, 0.0)]);
        assert_eq!(coverage(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn coverage_total_domination() {
        let a = snap(&[(0.0, 0.0)]);
        let b = snap(&[(1.0, 1.0), (2.0, 2.0)]);
        assert_eq!(coverage(&a, &b).unwrap(), 1.0);
        assert_eq!(coverage(&b, &a).unwrap(), 0.0);
        assert_eq!(delta_coverage(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn coverage_empty_target_is_error() {
        let a = snap(&[(0.0, 0.0)]);
        assert!(coverage(&a, &snap(&[])).is_err());
    }

    #[test]
    fn delta_coverage_antisymmetry() {
        let mut rng = test_rng(17);
        for _ in 0..50 {
            let rand_front = |rng: &mut rand_chacha::ChaCha12Rng| {
                snap(
                    &(0..10)
                        .map(|_| (rng.random_range(0.0..5.0), rng.random_range(0.0..5.0)))
                        .collect::<Vec<_>>(),
                )
            };
            let a = rand_front(&mut rng);
            let b = rand_front(&mut rng);
            assert_relative_eq!(delta_coverage(&a, &a).unwrap(), 0.0);
            assert_relative_eq!(
                delta_coverage(&a, &b).unwrap(),
                -delta_coverage(&b, &a).unwrap()
            );
        }
    }

    #[test]
    fn coverage_matches_double_loop_oracle() {
        let mut rng = test_rng(18);
        for _ in 0..100 {
            let gen = |rng: &mut rand_chacha::ChaCha12Rng| {
                (0..20)
                    .map(|_| {
                        (
                            rng.random_range(0..10) as f64 / 2.0,
                            rng.random_range(0..10) as f64 / 2.0,
                        )
                    })
                    .collect::<Vec<_>>()
            };
            let pa = gen(&mut rng);
            let pb = gen(&mut rng);
            let mut covered = 0usize;
            for p in &pb {
                let mut hit = false;
                for q in &pa {
                    let dom = q.0 <= p.0 && q.1 <= p.1 && (q.0 < p.0 || q.1 < p.1);
                    if dom {
                        hit = true;
                    }
                }
                if hit {
                    covered += 1;
                }
            }
            let want = covered as f64 / pb.len() as f64;
            assert_eq!(coverage(&snap(&pa), &snap(&pb)).unwrap(), want);
        }
    }

    #[test]
    fn hypervolume_unit_square() {
        assert_relative_eq!(
            hypervolume(&snap(&[(0.0, 0.0)]), ReferencePoint(1.0, 1.0)),
            1.0
        );
    }

    #[test]
    fn hypervolume_two_point_inclusion_exclusion() {
        let f = snap(&[(0.0, 0.5), (0.5, 0.0)]);
        assert_relative_eq!(hypervolume(&f, ReferencePoint(1.0, 1.0)), 0.75);
    }

    #[test]
    fn hypervolume_ignores_dominated_duplicate_and_outside_points() {
        let r = ReferencePoint(1.0, 1.0);
        let base = hypervolume(&snap(&[(0.0, 0.5), (0.5, 0.0)]), r);
        // dominated point
        let with_dominated = hypervolume(&snap(&[(0.0, 0.5), (0.5, 0.0), (0.6, 0.6)]), r);
        assert_relative_eq!(base, with_dominated);
        // duplicate point
        let with_dup = hypervolume(&snap(&[(0.0, 0.5), (0.0, 0.5), (0.5, 0.0)]), r);
        assert_relative_eq!(base, with_dup);
        // point beyond the reference contributes nothing
        let with_outside = hypervolume(&snap(&[(0.0, 0.5), (0.5, 0.0), (1.5, -0.5)]), r);
        assert_relative_eq!(base, with_outside);
        // non-dominated extra point increases the volume
        let with_extra = hypervolume(&snap(&[(0.0, 0.5), (0.5, 0.0), (0.25, 0.25)]), r);
        assert!(with_extra > base);
        // input order is irrelevant
        let reordered = hypervolume(&snap(&[(0.5, 0.0), (0.0, 0.5)]), r);
        assert_relative_eq!(base, reordered);
    }

    /// Raster oracle: column-wise count of grid-cell centers inside the
    /// dominated region bounded by the reference point.
    fn raster_hypervolume(points: &[(f64, f64)], r: ReferencePoint, cells: usize) -> f64 {
        let x0 = points.iter().map(|p| p.0).fold(r.0, f64::min);
        let y0 = points.iter().map(|p| p.1).fold(r.1, f64::min);
        let width = r.0 - x0;
        let height = r.1 - y0;
        if width <= 0.0 || height <= 0.0 {
            return 0.0;
        }
        let dx = width / cells as f64;
        let dy = height / cells as f64;
        let mut inside = 0usize;
        for i in 0..cells {
            let cx = x0 + (i as f64 + 0.5) * dx;
            // lowest J2 among points with J1 <= cx
            let env = points
                .iter()
                .filter(|p| p.0 <= cx)
                .map(|p| p.1)
                .fold(f64::INFINITY, f64::min);
            if env.is_infinite() {
                continue;
            }
            for j in 0..cells {
                let cy = y0 + (j as f64 + 0.5) * dy;
                if cy >= env && cy <= r.1 {
                    inside += 1;
                }
            }
        }
        inside as f64 * dx * dy
    }

    #[test]
    fn hypervolume_matches_raster_oracle() {
        let mut rng = test_rng(19);
        let r = ReferencePoint(1.1, 1.1);
        for _ in 0..100 {
            let n = rng.random_range(1..50);
            let pts: Vec<(f64, f64)> = (0..n)
                .map(|_| (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)))
                .collect();
            let exact = hypervolume(&snap(&pts), r);
            let approx = raster_hypervolume(&pts, r, 2000);
            assert!(
                (exact - approx).abs() < 1e-3,
                "sweep {exact} vs raster {approx}"
            );
        }
    }

    #[test]
    fn normalization_maps_union_to_unit_box() {
        let f = snap(&[(0.0, 0.0), (10.0, 10.0), (5.0, 2.5)]);
        let (norm, r) = normalize_and_reference(&[f]);
        assert_eq!(r, NORMALIZED_REFERENCE);
        assert_eq!(norm[0].points[0], (0.0, 0.0));
        assert_eq!(norm[0].points[1], (1.0, 1.0));
        assert_relative_eq!(norm[0].points[2].0, 0.5);
        assert_relative_eq!(norm[0].points[2].1, 0.25);
    }

    #[test]
    fn normalization_degenerate_axis_maps_to_zero() {
        let f = snap(&[(3.0, 1.0), (3.0, 2.0)]);
        let (norm, _) = normalize_and_reference(&[f]);
        assert!(norm[0].points.iter().all(|p| p.0 == 0.0));
    }

    #[test]
    fn normalization_hand_check_across_fronts() {
        let a = snap(&[(2.0, 8.0), (4.0, 4.0)]);
        let b = snap(&[(6.0, 2.0), (10.0, 0.0)]);
        let (norm, _) = normalize_and_reference(&[a, b]);
        // union bounds: J1 in [2, 10], J2 in [0, 8]
        assert_relative_eq!(norm[0].points[0].0, 0.0);
        assert_relative_eq!(norm[0].points[0].1, 1.0);
        assert_relative_eq!(norm[0].points[1].0, 0.25);
        assert_relative_eq!(norm[0].points[1].1, 0.5);
        assert_relative_eq!(norm[1].points[0].0, 0.5);
        assert_relative_eq!(norm[1].points[0].1, 0.25);
        assert_relative_eq!(norm[1].points[1].0, 1.0);
        assert_relative_eq!(norm[1].points[1].1, 0.0);
    }

    #[test]
    fn hv_ratio_bounds_and_identity() {
        let ideal = snap(&[(0.0, 2.0), (1.0, 1.0), (2.0, 0.0)]);
        assert_relative_eq!(hv_ratio(&ideal, &ideal), 1.0);
        let inside = snap(&[(0.5, 2.0), (1.5, 1.5), (2.0, 0.5)]);
        let ratio = hv_ratio(&inside, &ideal);
        assert!(ratio < 1.0 && ratio > 0.0);
    }

    #[test]
    fn hv_ratio_hand_three_point_case() {
        // front {(0,1),(1,0)} vs ideal {(0,0)}: union bounds are already the
        // unit box, r = (1.1, 1.1). HV(front) by slabs: (0,1) contributes
        // (1-0)*(1.1-1) = 0.1, (1,0) contributes (1.1-1)*(1.1-0) = 0.11,
        // total 0.21. HV(ideal) = 1.1*1.1 = 1.21.
        let front = snap(&[(0.0, 1.0), (1.0, 0.0)]);
        let ideal = snap(&[(0.0, 0.0)]);
        assert_relative_eq!(hv_ratio(&front, &ideal), 0.21 / 1.21, epsilon = 1e-12);
    }

    #[test]
    fn hypervolume_monotone_in_nondominated_additions() {
        let mut rng = test_rng(20);
        let r = ReferencePoint(1.1, 1.1);
        for _ in 0..50 {
            let pts: Vec<(f64, f64)> = (0..10)
                .map(|_| (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)))
                .collect();
            let base = hypervolume(&snap(&pts), r);
            let mut extended = pts.clone();
            extended.push((rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)));
            assert!(hypervolume(&snap(&extended), r) >= base - 1e-15);
        }
    }
}
