//! Non-dominated archive and exact bi-objective hypervolume.
//!
//! Both objectives are minimized. The hypervolume of a point set is the area
//! it dominates inside the box bounded above by the reference point `r`,
//! computed exactly with a single sort-and-sweep. A candidate enters the
//! archive only if its hypervolume improvement is strictly positive, and
//! members it dominates are evicted together with their paired solutions.
//!
//! Archive mutation is single-writer by design; queries on a snapshot are
//! freely concurrent.

use crate::error::{Error, Result};
use crate::objectives::BlockSpec;

/// `a` dominates `b`: no worse in both objectives, strictly better in one.
pub fn dominates(a: [f64; 2], b: [f64; 2]) -> bool {
    a[0] <= b[0] && a[1] <= b[1] && (a[0] < b[0] || a[1] < b[1])
}

/// Exact area dominated by `points` and bounded above by `r`.
///
/// Input need not be mutually non-dominated: dominated members simply add no
/// area. Points with any coordinate at or beyond `r` contribute their clipped
/// (empty) box, i.e. nothing.
pub fn hypervolume_2d(points: &[[f64; 2]], r: [f64; 2]) -> f64 {
    let mut pts: Vec<[f64; 2]> = points
        .iter()
        .copied()
        .filter(|p| p[0] < r[0] && p[1] < r[1])
        .collect();
    if pts.is_empty() {
        return 0.0;
    }
    pts.sort_by(|a, b| {
        a[0].partial_cmp(&b[0])
            .expect("finite objectives")
            .then(a[1].partial_cmp(&b[1]).expect("finite objectives"))
    });

    // Sweep left to right; each strip reaches up from the best f2 seen so far.
    let mut area = 0.0;
    let mut best_f2 = f64::INFINITY;
    for (i, p) in pts.iter().enumerate() {
        let next_x = if i + 1 < pts.len() { pts[i + 1][0] } else { r[0] };
        best_f2 = best_f2.min(p[1]);
        area += (next_x - p[0]) * (r[1] - best_f2);
    }
    area
}

/// Would `cand` dominate any area not already dominated? True iff it lies
/// strictly inside the reference box and no point dominates or equals it.
/// This is the exact combinatorial form of "HVI > 0", immune to the rounding
/// of the area sweep.
pub fn would_improve(points: &[[f64; 2]], r: [f64; 2], cand: [f64; 2]) -> bool {
    cand[0] < r[0]
        && cand[1] < r[1]
        && !points.iter().any(|p| dominates(*p, cand) || *p == cand)
}

/// Hypervolume improvement of `cand`: `HV(P ∪ {cand}, r) - HV(P, r)`,
/// zero iff `cand` is dominated or lies outside the reference box.
pub fn hvi(points: &[[f64; 2]], r: [f64; 2], cand: [f64; 2]) -> f64 {
    if !would_improve(points, r, cand) {
        return 0.0;
    }
    let base = hypervolume_2d(points, r);
    let mut with_cand = points.to_vec();
    with_cand.push(cand);
    (hypervolume_2d(&with_cand, r) - base).max(0.0)
}

/// What [`ParetoArchive::insert`] did.
#[derive(Debug, Clone, PartialEq)]
pub struct InsertReport {
    pub added: bool,
    /// Hypervolume improvement of the candidate at insertion time.
    pub hvi: f64,
    /// Members the candidate dominated, removed with their solutions.
    pub evicted: Vec<(BlockSpec, [f64; 2])>,
}

/// Non-dominated set with paired solutions and a reference point.
///
/// Entries are kept sorted by `(f1, f2)`, so the archive's contents are a
/// canonical function of the inserted set, independent of insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoArchive {
    entries: Vec<(BlockSpec, [f64; 2])>,
    reference: [f64; 2],
}

impl ParetoArchive {
    pub fn new(reference: [f64; 2]) -> Result<Self> {
        Self::check_reference(reference)?;
        Ok(Self { entries: Vec::new(), reference })
    }

    fn check_reference(r: [f64; 2]) -> Result<()> {
        if !(r[0].is_finite() && r[1].is_finite() && r[0] >= 0.0 && r[1] >= 0.0) {
            return Err(Error::Problem(format!(
                "reference point must be finite and non-negative, got {r:?}"
            )));
        }
        Ok(())
    }

    pub fn reference(&self) -> [f64; 2] {
        self.reference
    }

    /// Move the reference point. Only legal while the archive is empty: once
    /// a point is archived the reference is frozen.
    pub fn set_reference(&mut self, r: [f64; 2]) -> Result<()> {
        if !self.entries.is_empty() {
            return Err(Error::Problem(
                "reference point is frozen once the archive is non-empty".into(),
            ));
        }
        Self::check_reference(r)?;
        self.reference = r;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Archived objective points, sorted by `(f1, f2)`.
    pub fn points(&self) -> Vec<[f64; 2]> {
        self.entries.iter().map(|(_, p)| *p).collect()
    }

    /// Archived `(solution, point)` pairs, sorted by `(f1, f2)`.
    pub fn entries(&self) -> &[(BlockSpec, [f64; 2])] {
        &self.entries
    }

    pub fn hypervolume(&self) -> f64 {
        hypervolume_2d(&self.points(), self.reference)
    }

    /// Hypervolume improvement a candidate point would bring.
    pub fn hvi_of(&self, cand: [f64; 2]) -> f64 {
        hvi(&self.points(), self.reference, cand)
    }

    /// Offer a candidate: archived iff its HVI is strictly positive, evicting
    /// any members it dominates. Exact duplicates have zero HVI and are
    /// rejected, so the incumbent always stays. The positivity test is the
    /// combinatorial [`would_improve`], so insertion decisions are exact.
    pub fn insert(&mut self, spec: BlockSpec, point: [f64; 2]) -> InsertReport {
        if !would_improve(&self.points(), self.reference, point) {
            return InsertReport { added: false, hvi: 0.0, evicted: Vec::new() };
        }
        let improvement = self.hvi_of(point);
        let mut evicted = Vec::new();
        self.entries.retain(|(s, p)| {
            if dominates(point, *p) {
                evicted.push((s.clone(), *p));
                false
            } else {
                true
            }
        });
        let at = self
            .entries
            .partition_point(|(_, p)| (p[0], p[1]) < (point[0], point[1]));
        self.entries.insert(at, (spec, point));
        InsertReport { added: true, hvi: improvement, evicted }
    }

    /// Pairwise non-domination check (testing aid).
    pub fn is_mutually_non_dominated(&self) -> bool {
        for (i, (_, a)) in self.entries.iter().enumerate() {
            for (j, (_, b)) in self.entries.iter().enumerate() {
                if i != j && dominates(*a, *b) {
                    return false;
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn spec(d: usize) -> BlockSpec {
        BlockSpec::new(vec![d]).unwrap()
    }

    #[test]
    fn dominance_cases() {
        // Strict in f1, equal in f2.
        assert!(dominates([0.004, 0.103], [0.009, 0.103]));
        assert!(!dominates([0.009, 0.103], [0.004, 0.103]));
        // Mutually non-dominated front members.
        assert!(!dominates([0.004, 0.103], [0.142, 0.026]));
        assert!(!dominates([0.142, 0.026], [0.004, 0.103]));
        // Never self-dominating.
        assert!(!dominates([0.5, 0.5], [0.5, 0.5]));
    }

    #[test]
    fn hypervolume_worked_examples() {
        assert_eq!(hypervolume_2d(&[[1.0, 1.0]], [2.0, 2.0]), 1.0);
        assert_eq!(hypervolume_2d(&[[1.0, 2.0], [2.0, 1.0]], [3.0, 3.0]), 3.0);
        assert_eq!(hypervolume_2d(&[], [2.0, 2.0]), 0.0);
        // Clipping: a point outside the box contributes nothing.
        assert_eq!(hypervolume_2d(&[[2.5, 0.5]], [2.0, 2.0]), 0.0);
        assert_eq!(hypervolume_2d(&[[1.0, 1.0], [2.5, 0.1]], [2.0, 2.0]), 1.0);
    }

    #[test]
    fn hvi_worked_examples() {
        let p = [[1.0, 1.0]];
        assert_eq!(hvi(&p, [2.0, 2.0], [0.5, 0.5]), 1.25);
        assert_eq!(hvi(&p, [2.0, 2.0], [1.5, 1.5]), 0.0);
        assert_eq!(hvi(&p, [2.0, 2.0], [1.0, 1.0]), 0.0);
    }

    #[test]
    fn insert_respects_hvi_rule() {
        let mut a = ParetoArchive::new([2.0, 2.0]).unwrap();
        let r = a.insert(spec(1), [1.0, 1.0]);
        assert!(r.added && r.evicted.is_empty());

        // Dominated candidate: rejected, archive unchanged.
        let before = a.clone();
        let r = a.insert(spec(2), [1.5, 1.5]);
        assert!(!r.added && r.hvi == 0.0);
        assert_eq!(a, before);

        // Dominating candidate: added, incumbent evicted.
        let r = a.insert(spec(3), [0.5, 0.5]);
        assert!(r.added);
        assert_eq!(r.evicted.len(), 1);
        assert_eq!(r.evicted[0].1, [1.0, 1.0]);
        assert_eq!(a.len(), 1);

        // Non-dominated but outside the reference box: zero HVI, rejected.
        let r = a.insert(spec(4), [2.5, 0.1]);
        assert!(!r.added);

        // Exact duplicate: incumbent stays.
        let r = a.insert(spec(5), [0.5, 0.5]);
        assert!(!r.added);
        assert_eq!(a.entries()[0].0, spec(3));
    }

    #[test]
    fn reference_frozen_after_first_insert() {
        let mut a = ParetoArchive::new([0.0, 0.0]).unwrap();
        a.set_reference([1.0, 1.0]).unwrap();
        a.insert(spec(1), [0.5, 0.5]);
        assert!(a.set_reference([2.0, 2.0]).is_err());
    }

    #[test]
    fn reference_must_be_non_negative() {
        assert!(ParetoArchive::new([-0.1, 1.0]).is_err());
        assert!(ParetoArchive::new([f64::NAN, 1.0]).is_err());
        assert!(ParetoArchive::new([0.0, 0.0]).is_ok());
    }

    #[test]
    fn hypervolume_vs_rejection_sampling() {
        let mut rng = seeded(5);
        for trial in 0..10 {
            let r = [1.0 + rng.random::<f64>(), 1.0 + rng.random::<f64>()];
            let n = 1 + (rng.random::<f64>() * 12.0) as usize;
            let pts: Vec<[f64; 2]> = (0..n)
                .map(|_| [rng.random::<f64>() * r[0], rng.random::<f64>() * r[1]])
                .collect();
            let exact = hypervolume_2d(&pts, r);

            let lo = [
                pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min),
                pts.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min),
            ];
            let box_area = (r[0] - lo[0]) * (r[1] - lo[1]);
            let samples = 100_000;
            let mut hits = 0usize;
            for _ in 0..samples {
                let u = [
                    lo[0] + rng.random::<f64>() * (r[0] - lo[0]),
                    lo[1] + rng.random::<f64>() * (r[1] - lo[1]),
                ];
                if pts.iter().any(|p| p[0] <= u[0] && p[1] <= u[1]) {
                    hits += 1;
                }
            }
            let frac = hits as f64 / samples as f64;
            let estimate = box_area * frac;
            let se = box_area * (frac * (1.0 - frac) / samples as f64).sqrt();
            assert!(
                (exact - estimate).abs() <= 4.0 * se.max(1e-6),
                "trial {trial}: exact {exact}, mc {estimate} +- {se}"
            );
        }
    }

    proptest! {
        #[test]
        fn insertion_never_decreases_hv(seed in 0u64..200) {
            let mut rng = seeded(seed);
            let mut a = ParetoArchive::new([1.0, 1.0]).unwrap();
            let mut last = 0.0;
            for i in 1..=30 {
                let pt = [rng.random::<f64>(), rng.random::<f64>()];
                a.insert(spec(i), pt);
                let hv = a.hypervolume();
                prop_assert!(hv >= last);
                prop_assert!(hv <= 1.0 + 1e-12); // reference box area
                last = hv;
            }
            prop_assert!(a.is_mutually_non_dominated());
        }

        #[test]
        fn archive_is_order_independent(seed in 0u64..50) {
            let mut rng = seeded(seed);
            let pts: Vec<[f64; 2]> = (0..15)
                .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
                .collect();

            let mut reference_entries: Option<Vec<[f64; 2]>> = None;
            for _ in 0..20 {
                let mut order: Vec<usize> = (0..pts.len()).collect();
                order.shuffle(&mut rng);
                let mut a = ParetoArchive::new([1.0, 1.0]).unwrap();
                for &i in &order {
                    a.insert(spec(i + 1), pts[i]);
                }
                let got = a.points();
                match &reference_entries {
                    None => reference_entries = Some(got),
                    Some(expect) => prop_assert_eq!(&got, expect),
                }
            }
        }
    }
}
