//! Design evaluation: efficiency ratios, expected-model projection reports,
//! pairwise Q_B contours, optimality-region grids and Q_B curves.

use crate::criteria::{as_exact_baseline, qb_closed, PriorPair, WordCountPattern};
use crate::data::LabeledPattern;
use crate::design::{Design, ModelSpec};
use crate::{Error, Result};
use itertools::Itertools;
use rayon::prelude::*;
use serde::Serialize;

/// Relative Q_B efficiency qb(best)/qb(reference); 1 when both are zero.
pub fn efficiency(
    wc_ref: &WordCountPattern,
    wc_best: &WordCountPattern,
    m: usize,
    p: PriorPair,
) -> Result<f64> {
    let qb_ref = qb_closed(wc_ref, m, p);
    let qb_best = qb_closed(wc_best, m, p);
    if qb_best > qb_ref + 1e-12 {
        return Err(Error::BestExceedsReference { best: qb_best, reference: qb_ref });
    }
    if qb_ref == 0.0 {
        if qb_best.abs() < 1e-12 {
            return Ok(1.0);
        }
        return Err(Error::ZeroReference { qb: qb_best });
    }
    Ok(qb_best / qb_ref)
}

fn round_half_even(x: f64) -> u64 {
    let floor = x.floor();
    if (x - floor - 0.5).abs() < 1e-9 {
        let f = floor as u64;
        if f % 2 == 0 {
            f
        } else {
            f + 1
        }
    } else {
        x.round() as u64
    }
}

pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * u128::from(n - i) / u128::from(i + 1);
    }
    acc
}

/// Expected model size under the prior: M mains, N_I interactions, and the
/// count n_T of eligible models with exactly that composition. Halfway cases
/// round to even.
pub fn expected_model_size(m: usize, p: PriorPair) -> (u64, u64, u128) {
    let big_m = round_half_even(m as f64 * p.pi1);
    let pairs = binomial(big_m, 2) as u64;
    let n_i = round_half_even(pairs as f64 * p.pi2);
    let n_t = binomial(m as u64, big_m) * binomial(pairs, n_i);
    (big_m, n_i, n_t)
}

/// All models with exactly `mains` main effects and `ints` interactions
/// among them, in lexicographic order.
pub fn enumerate_models(
    m: usize,
    mains: usize,
    ints: usize,
) -> impl Iterator<Item = ModelSpec> {
    (0..m).combinations(mains).flat_map(move |main_set| {
        let pairs: Vec<(usize, usize)> = main_set
            .iter()
            .copied()
            .tuple_combinations()
            .collect();
        pairs
            .into_iter()
            .combinations(ints)
            .map(move |int_set| ModelSpec::new(main_set.clone(), int_set).unwrap())
    })
}

/// Estimability and average-A_s comparison of two designs over all models
/// of the expected size at a prior.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub prior: PriorPair,
    pub mains: u64,
    pub interactions: u64,
    pub n_t: u128,
    /// fraction of the n_T models estimable under design A
    pub ratio_a: f64,
    pub ratio_b: f64,
    /// mean exact A_s over models estimable under both designs; absent when
    /// no model is jointly estimable
    pub avg_as_a: Option<f64>,
    pub avg_as_b: Option<f64>,
}

const MODEL_CAP: u128 = 200_000;

/// Enumerate the expected-size model space and score both designs on it.
pub fn projection_report(d_a: &Design, d_b: &Design, p: PriorPair) -> Result<EvalReport> {
    if d_a.m() != d_b.m() {
        return Err(Error::Invalid(format!(
            "factor counts differ: {} vs {}",
            d_a.m(),
            d_b.m()
        )));
    }
    let m = d_a.m();
    let (mains, ints, n_t) = expected_model_size(m, p);
    if n_t > MODEL_CAP {
        return Err(Error::EnumerationCap { count: n_t, cap: MODEL_CAP });
    }
    let models: Vec<ModelSpec> = enumerate_models(m, mains as usize, ints as usize).collect();
    debug_assert_eq!(models.len() as u128, n_t);
    // (count_a, count_b, count_both, sum_a, sum_b)
    let (ca, cb, cboth, sa, sb) = models
        .par_iter()
        .map(|spec| {
            let va = as_exact_baseline(d_a, spec).unwrap();
            let vb = as_exact_baseline(d_b, spec).unwrap();
            let both = va.is_some() && vb.is_some();
            (
                u64::from(va.is_some()),
                u64::from(vb.is_some()),
                u64::from(both),
                if both { va.unwrap() } else { 0.0 },
                if both { vb.unwrap() } else { 0.0 },
            )
        })
        .reduce(
            || (0, 0, 0, 0.0, 0.0),
            |x, y| (x.0 + y.0, x.1 + y.1, x.2 + y.2, x.3 + y.3, x.4 + y.4),
        );
    let n_t_f = n_t as f64;
    Ok(EvalReport {
        prior: p,
        mains,
        interactions: ints,
        n_t,
        ratio_a: ca as f64 / n_t_f,
        ratio_b: cb as f64 / n_t_f,
        avg_as_a: (cboth > 0).then(|| sa / cboth as f64),
        avg_as_b: (cboth > 0).then(|| sb / cboth as f64),
    })
}

/// Where the Q_B difference of two word-count patterns crosses zero along
/// π2 at a fixed π1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Contour {
    /// Δ is identically zero: the designs tie at every π2.
    EqualEverywhere,
    /// Δ is a nonzero constant: one design wins for all π2.
    ConstantSign { delta: f64 },
    /// Real roots of Δ(π2) inside [0, 1]; may be empty.
    Roots(Vec<f64>),
}

/// Coefficients (c0, c1, c2) of Δ(π2) = qb_a − qb_b = c0 + c1·π2 + c2·π2²
/// at fixed π1, on the quarter scale. The difference is exactly quadratic
/// in π2 because each closed-form weight has π2-degree at most two.
pub fn contour_coefficients(
    wc_a: &WordCountPattern,
    wc_b: &WordCountPattern,
    m: usize,
    pi1: f64,
) -> [f64; 3] {
    let mf = m as f64;
    let d1 = wc_a.b1 - wc_b.b1;
    let d2 = wc_a.b2 - wc_b.b2;
    let d3 = wc_a.b3 - wc_b.b3;
    let d4 = wc_a.b4 - wc_b.b4;
    let c0 = pi1 * d1 + 2.0 * pi1.powi(2) * d2;
    let c1 = 7.0 * (mf - 1.0) * pi1.powi(2) * d1
        + 6.0 * pi1.powi(2) * d2
        + 21.0 * pi1.powi(3) * d3;
    let c2 = 12.0 * (mf - 2.0) * pi1.powi(3) * d2 + 36.0 * pi1.powi(4) * d4;
    [c0, c1, c2]
}

/// Roots in [0, 1] of the pairwise Q_B difference along π2 at fixed π1.
pub fn pairwise_contour(
    wc_a: &WordCountPattern,
    wc_b: &WordCountPattern,
    m: usize,
    pi1: f64,
) -> Result<Contour> {
    if !(pi1 > 0.0 && pi1 <= 1.0) {
        return Err(Error::Invalid(format!("pi1 = {pi1} not in (0, 1]")));
    }
    let [c0, c1, c2] = contour_coefficients(wc_a, wc_b, m, pi1);
    let in_unit = |x: f64| (-1e-12..=1.0 + 1e-12).contains(&x);
    let clamp = |x: f64| x.clamp(0.0, 1.0);
    if c2.abs() < 1e-14 {
        if c1.abs() < 1e-14 {
            if c0.abs() < 1e-14 {
                return Ok(Contour::EqualEverywhere);
            }
            return Ok(Contour::ConstantSign { delta: c0 });
        }
        let r = -c0 / c1;
        let roots = if in_unit(r) { vec![clamp(r)] } else { vec![] };
        return Ok(Contour::Roots(roots));
    }
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc < 0.0 {
        return Ok(Contour::Roots(vec![]));
    }
    // numerically stable quadratic formula
    let q = -0.5 * (c1 + c1.signum() * disc.sqrt());
    let mut cand = if c1 == 0.0 {
        let r = (disc.sqrt() / (2.0 * c2)).abs();
        vec![-r, r]
    } else {
        vec![q / c2, c0 / q]
    };
    cand.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cand.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    Ok(Contour::Roots(cand.into_iter().filter(|&r| in_unit(r)).map(clamp).collect()))
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionCell {
    pub pi1: f64,
    pub pi2: f64,
    /// labels of the minimizing design(s); more than one entry means a tie
    /// within 1e-9 relative
    pub winners: Vec<String>,
}

/// Grid classification of prior space by the Q_B-optimal design.
#[derive(Debug, Clone, Serialize)]
pub struct RegionMap {
    pub grid: Vec<RegionCell>,
    pub designs: Vec<LabeledPattern>,
}

/// Classify each grid point of (0,1]² by which labeled pattern minimizes
/// Q_B there. π1 = 0 is excluded: every Q_B is zero and no winner exists.
pub fn region_map(designs: &[LabeledPattern], m: usize, grid_step: f64) -> Result<RegionMap> {
    if designs.is_empty() {
        return Err(Error::Invalid("design list is empty".into()));
    }
    if !(grid_step > 0.0 && grid_step <= 0.1) {
        return Err(Error::Invalid(format!("grid step {grid_step} not in (0, 0.1]")));
    }
    let steps = (1.0 / grid_step).round() as usize;
    let mut grid = Vec::with_capacity(steps * steps);
    for i in 1..=steps {
        let pi1 = i as f64 * grid_step;
        for j in 1..=steps {
            let pi2 = j as f64 * grid_step;
            let p = PriorPair::new(pi1.min(1.0), pi2.min(1.0))?;
            let vals: Vec<f64> =
                designs.iter().map(|d| qb_closed(&d.pattern, m, p)).collect();
            let best = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let tol = 1e-9 * best.abs().max(1.0);
            let winners = designs
                .iter()
                .zip(&vals)
                .filter(|(_, &v)| v - best <= tol)
                .map(|(d, _)| d.label.clone())
                .collect();
            grid.push(RegionCell { pi1, pi2, winners });
        }
    }
    Ok(RegionMap { grid, designs: designs.to_vec() })
}

/// Q_B of one pattern along π2 ∈ [0,1] for each requested π1.
pub fn qb_curve(
    wc: &WordCountPattern,
    m: usize,
    pi1_list: &[f64],
    pi2_step: f64,
) -> Result<Vec<(f64, f64, f64)>> {
    if !(pi2_step > 0.0 && pi2_step <= 1.0) {
        return Err(Error::Invalid(format!("pi2 step {pi2_step} not in (0, 1]")));
    }
    let steps = (1.0 / pi2_step).round() as usize;
    let mut out = Vec::new();
    for &pi1 in pi1_list {
        for j in 0..=steps {
            let pi2 = (j as f64 * pi2_step).min(1.0);
            let p = PriorPair::new(pi1, pi2)?;
            out.push((pi1, pi2, qb_closed(wc, m, p)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::word_counts;
    use crate::data;

    fn prior(pi1: f64, pi2: f64) -> PriorPair {
        PriorPair::new(pi1, pi2).unwrap()
    }

    fn pattern(label: &str, list: &[LabeledPattern]) -> WordCountPattern {
        list.iter().find(|p| p.label == label).unwrap().pattern
    }

    #[test]
    fn efficiency_identity_and_reference_checks() {
        let wc = WordCountPattern::new(0.0, 0.5, 1.0, 2.0);
        assert_eq!(efficiency(&wc, &wc, 6, prior(0.4, 0.4)).unwrap(), 1.0);
        let zero = WordCountPattern::new(0.0, 0.0, 0.0, 0.0);
        assert_eq!(efficiency(&zero, &zero, 6, prior(0.4, 0.4)).unwrap(), 1.0);
        assert!(matches!(
            efficiency(&zero, &wc, 6, prior(0.4, 0.4)),
            Err(Error::BestExceedsReference { .. })
        ));
    }

    #[test]
    fn efficiency_table_values() {
        let pats = data::patterns_6x12();
        let d1 = pattern("D1", &pats);
        let d2 = pattern("D2", &pats);
        let d9 = pattern("D9", &pats);
        let e = efficiency(&d1, &d2, 6, prior(0.4, 0.2)).unwrap();
        assert!((e - 0.8477).abs() < 1e-3, "got {e}");
        let e = efficiency(&d1, &d9, 6, prior(1.0, 1.0)).unwrap();
        assert!((e - 0.7438).abs() < 1e-3, "got {e}");
    }

    #[test]
    fn expected_sizes_match_published_counts() {
        // (m, pi1, pi2, M, N_I, n_T)
        let cases: &[(usize, f64, f64, u64, u64, u128)] = &[
            (6, 0.2, 0.2, 1, 0, 6),
            (6, 0.4, 0.2, 2, 0, 15),
            (6, 0.4, 0.6, 2, 1, 15),
            (6, 0.6, 0.2, 4, 1, 90),
            (6, 0.6, 0.4, 4, 2, 225),
            (6, 0.6, 0.8, 4, 5, 90),
            (6, 0.8, 0.2, 5, 2, 270),
            (6, 1.0, 0.2, 6, 3, 455),
            (6, 1.0, 0.4, 6, 6, 5005),
            (9, 0.3, 0.3, 3, 1, 252),
            (9, 0.5, 0.1, 4, 1, 756),
            (9, 0.5, 0.3, 4, 2, 1890),
            (9, 0.7, 0.1, 6, 2, 8820),
            (9, 0.7, 0.3, 6, 4, 114660),
            (9, 0.9, 0.1, 8, 3, 29484),
        ];
        for &(m, pi1, pi2, mm, ni, nt) in cases {
            let got = expected_model_size(m, prior(pi1, pi2));
            assert_eq!(got, (mm, ni, nt), "m={m} prior=({pi1},{pi2})");
        }
    }

    #[test]
    fn round_half_even_behavior() {
        assert_eq!(round_half_even(4.5), 4);
        assert_eq!(round_half_even(3.5), 4);
        assert_eq!(round_half_even(2.4999), 2);
        assert_eq!(round_half_even(0.5), 0);
    }

    #[test]
    fn enumeration_counts_and_heredity() {
        assert_eq!(enumerate_models(6, 1, 0).count(), 6);
        assert_eq!(enumerate_models(3, 3, 3).count(), 1);
        assert_eq!(enumerate_models(9, 3, 1).count(), 252);
        assert_eq!(enumerate_models(6, 4, 2).count(), 225);
        for spec in enumerate_models(5, 3, 2) {
            assert_eq!(spec.mains().len(), 3);
            assert_eq!(spec.interactions().len(), 2);
        }
    }

    #[test]
    fn self_report_is_symmetric() {
        let d = data::designs::min_k_6x12();
        let rep = projection_report(&d, &d, prior(0.4, 0.6)).unwrap();
        assert_eq!(rep.ratio_a, rep.ratio_b);
        assert_eq!(rep.avg_as_a, rep.avg_as_b);
        assert!(rep.ratio_a <= 1.0);
    }

    #[test]
    fn report_swap_antisymmetry() {
        let a = data::designs::min_k_6x12();
        let b = data::designs::ad1_6x12();
        let p = prior(0.6, 0.4);
        let fwd = projection_report(&a, &b, p).unwrap();
        let rev = projection_report(&b, &a, p).unwrap();
        assert_eq!(fwd.ratio_a, rev.ratio_b);
        assert_eq!(fwd.ratio_b, rev.ratio_a);
        assert_eq!(fwd.avg_as_a, rev.avg_as_b);
    }

    #[test]
    fn report_rejects_oversized_enumeration() {
        let d = data::designs::min_k_6x12();
        let wide = Design::from_rows(
            d.rows()
                .map(|r| {
                    let mut v = r.to_vec();
                    v.extend_from_slice(r);
                    v.extend_from_slice(r);
                    v
                })
                .collect(),
        )
        .unwrap();
        // m=18, M=9: C(18,9)·C(36,4) models, far past the cap
        assert!(matches!(
            projection_report(&wide, &wide, prior(0.5, 0.1)),
            Err(Error::EnumerationCap { .. })
        ));
    }

    #[test]
    fn contour_matches_published_polynomial() {
        // normalized difference for the (0,0.6667,0,3.6667) vs
        // (0,0.3333,0.8889,3) pair: 1 + (3-28π1)π2 + (24π1+36π1²)π2²
        let d2 = WordCountPattern::new(0.0, 2.0 / 3.0, 0.0, 11.0 / 3.0);
        let d4 = WordCountPattern::new(0.0, 1.0 / 3.0, 8.0 / 9.0, 3.0);
        for &pi1 in &[0.17, 0.3, 0.52, 0.76, 0.98] {
            let [c0, c1, c2] = contour_coefficients(&d2, &d4, 6, pi1);
            let scale = c0; // coefficient of π2^0 in the normalized form is 1
            assert!(scale > 0.0);
            assert!((c1 / scale - (3.0 - 28.0 * pi1)).abs() < 1e-9);
            assert!((c2 / scale - (24.0 * pi1 + 36.0 * pi1 * pi1)).abs() < 1e-9);
        }
    }

    /// brute-force sign-change scan of Δ(π2) used as a root oracle
    fn scan_roots(a: &WordCountPattern, b: &WordCountPattern, m: usize, pi1: f64) -> Vec<f64> {
        let delta = |pi2: f64| {
            let p = PriorPair::new(pi1, pi2).unwrap();
            qb_closed(a, m, p) - qb_closed(b, m, p)
        };
        let mut roots = Vec::new();
        let step = 1e-5;
        let mut prev = delta(0.0);
        let mut x = 0.0f64;
        while x < 1.0 {
            let next_x = (x + step).min(1.0);
            let cur = delta(next_x);
            if prev == 0.0 {
                roots.push(x);
            } else if prev.signum() != cur.signum() && cur != 0.0 {
                roots.push(x + step * prev.abs() / (prev.abs() + cur.abs()));
            }
            prev = cur;
            x = next_x;
        }
        if prev == 0.0 {
            roots.push(1.0);
        }
        roots
    }

    #[test]
    fn contour_roots_match_scan_oracle() {
        let d2 = WordCountPattern::new(0.0, 2.0 / 3.0, 0.0, 11.0 / 3.0);
        let d4 = WordCountPattern::new(0.0, 1.0 / 3.0, 8.0 / 9.0, 3.0);
        for &pi1 in &[0.05, 0.1, 0.13, 0.6, 0.9] {
            let got = match pairwise_contour(&d2, &d4, 6, pi1).unwrap() {
                Contour::Roots(r) => r,
                other => panic!("unexpected {other:?}"),
            };
            let want = scan_roots(&d2, &d4, 6, pi1);
            assert_eq!(got.len(), want.len(), "pi1={pi1}: {got:?} vs {want:?}");
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-4, "pi1={pi1}: {g} vs {w}");
            }
        }
    }

    #[test]
    fn contour_roots_near_zero_delta() {
        let pats = data::patterns_6x12();
        let a = pattern("D1", &pats);
        let b = pattern("D3", &pats);
        for &pi1 in &[0.2, 0.5, 0.8] {
            if let Contour::Roots(roots) = pairwise_contour(&a, &b, 6, pi1).unwrap() {
                for &r in &roots {
                    let p = PriorPair::new(pi1, r).unwrap();
                    let qa = qb_closed(&a, 6, p);
                    let qbv = qb_closed(&b, 6, p);
                    assert!((qa - qbv).abs() <= 1e-9 * qa.abs().max(qbv.abs()).max(1.0));
                }
            }
        }
    }

    #[test]
    fn contour_degenerate_cases() {
        let wc = WordCountPattern::new(0.0, 0.5, 1.0, 2.0);
        assert_eq!(pairwise_contour(&wc, &wc, 6, 0.4).unwrap(), Contour::EqualEverywhere);
        // patterns differing only in b3 at m=6: Δ is linear in π2
        let a = WordCountPattern::new(0.0, 0.5, 2.0, 2.0);
        match pairwise_contour(&a, &wc, 6, 0.4).unwrap() {
            Contour::Roots(r) => assert!(r.is_empty() || r.iter().all(|&x| (0.0..=1.0).contains(&x))),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn region_map_single_design_and_winner_consistency() {
        let pats = data::patterns_6x12();
        let single = vec![pats[0].clone()];
        let map = region_map(&single, 6, 0.1).unwrap();
        assert_eq!(map.grid.len(), 100);
        assert!(map.grid.iter().all(|c| c.winners == vec!["D1".to_string()]));

        let map = region_map(&pats, 6, 0.1).unwrap();
        for cell in &map.grid {
            let p = prior(cell.pi1, cell.pi2);
            let best = pats
                .iter()
                .map(|d| qb_closed(&d.pattern, 6, p))
                .fold(f64::INFINITY, f64::min);
            let winner_qb = qb_closed(
                &pattern(&cell.winners[0], &pats),
                6,
                p,
            );
            assert!((winner_qb - best).abs() <= 1e-9 * best.max(1.0));
        }
    }

    #[test]
    fn region_winners_match_optimizer_reference() {
        let pats = data::patterns_6x12();
        let map = region_map(&pats, 6, 0.1).unwrap();
        let expect = [
            ((0.4, 0.2), "D2"),
            ((0.2, 0.6), "D1"),
            ((1.0, 1.0), "D9"),
        ];
        for ((pi1, pi2), label) in expect {
            let cell = map
                .grid
                .iter()
                .find(|c| (c.pi1 - pi1).abs() < 1e-9 && (c.pi2 - pi2).abs() < 1e-9)
                .unwrap();
            assert!(cell.winners.contains(&label.to_string()), "{pi1},{pi2}: {:?}", cell.winners);
        }
    }

    #[test]
    fn curve_values_and_zero_limit() {
        let wc = word_counts(&data::designs::min_k_6x12());
        let curve = qb_curve(&wc, 6, &[0.4], 0.1).unwrap();
        let at = |pi2: f64| {
            curve
                .iter()
                .find(|(_, x, _)| (x - pi2).abs() < 1e-9)
                .map(|&(_, _, q)| q)
                .unwrap()
        };
        assert!((at(0.2) - 0.6588).abs() < 1e-3);
        // orthogonal main-effect part: value at π2 = 0 vanishes when b1 = b2 = 0
        assert!(at(0.0).abs() < 1e-12);
        // larger π1 majorizes pointwise for π2 > 0
        let lo = qb_curve(&wc, 6, &[0.2], 0.05).unwrap();
        let hi = qb_curve(&wc, 6, &[1.0], 0.05).unwrap();
        for (l, h) in lo.iter().zip(&hi) {
            if l.1 > 0.0 {
                assert!(h.2 >= l.2);
            }
        }
    }

    #[test]
    fn estimable_models_fit_in_runs() {
        let d = data::designs::min_k_6x12();
        let (mm, ni, _) = expected_model_size(6, prior(0.6, 0.8));
        for spec in enumerate_models(6, mm as usize, ni as usize) {
            if as_exact_baseline(&d, &spec).unwrap().is_some() {
                assert!(spec.param_count() <= d.n());
            }
        }
    }
}
