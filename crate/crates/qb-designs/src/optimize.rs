//! Q_B-optimal design search: coordinate exchange, the extended multi-prior
//! protocol, the level-balanced swap search and Hadamard column-subset
//! enumeration.

use crate::criteria::{
    qb_closed, word_count_sequence, word_counts, PriorPair, WordCountPattern,
};
use crate::design::Design;
use crate::{Error, Result};
use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Outcome of a search at one prior. `qb` is on the quarter (table) scale
/// and is recomputable as `qb_closed(&word_counts, m, prior)`.
#[derive(Debug, Clone, Serialize)]
pub struct OptimResult {
    #[serde(serialize_with = "serialize_design_rows")]
    pub design: Design,
    pub qb: f64,
    pub prior: PriorPair,
    pub word_counts: WordCountPattern,
    pub restarts_used: usize,
    pub seed: u64,
}

fn serialize_design_rows<S>(d: &Design, s: S) -> std::result::Result<S::Ok, S::Error>
where
    S: serde::Serializer,
{
    let rows: Vec<String> = d
        .rows()
        .map(|r| r.iter().map(|&e| e.to_string()).join(" "))
        .collect();
    rows.serialize(s)
}

/// Mutable design state with incrementally maintained subset sums for word
/// counts of orders 1..=4.
///
/// A single-coordinate flip only changes subset products that contain the
/// flipped column, so a candidate flip is scored by touching those subsets
/// only (O(m^3) of them for orders up to 4).
struct WordCountState {
    n: usize,
    m: usize,
    entries: Vec<i8>, // row-major, each -1 or +1
    subsets: Vec<Vec<usize>>,
    by_column: Vec<Vec<usize>>, // subset ids containing column k
    order_of: Vec<usize>,
    sums: Vec<i64>,
    // sum of squared subset sums per order (index 1..=4)
    sq_totals: [f64; 5],
    weights: [f64; 5], // quarter-scale closed-form weights per order
}

impl WordCountState {
    fn new(entries: Vec<i8>, n: usize, m: usize, prior: PriorPair) -> WordCountState {
        let mut subsets = Vec::new();
        let mut order_of = Vec::new();
        for order in 1..=4.min(m) {
            for sub in (0..m).combinations(order) {
                subsets.push(sub);
                order_of.push(order);
            }
        }
        let mut by_column = vec![Vec::new(); m];
        for (id, sub) in subsets.iter().enumerate() {
            for &k in sub {
                by_column[k].push(id);
            }
        }
        let w = crate::criteria::qb_weights(m, prior);
        let weights = [0.0, w.w1 / 4.0, w.w2 / 4.0, w.w3 / 4.0, w.w4 / 4.0];
        let mut state = WordCountState {
            n,
            m,
            entries,
            subsets,
            by_column,
            order_of,
            sums: Vec::new(),
            sq_totals: [0.0; 5],
            weights,
        };
        state.recompute();
        state
    }

    fn recompute(&mut self) {
        self.sums = vec![0; self.subsets.len()];
        self.sq_totals = [0.0; 5];
        for (id, sub) in self.subsets.iter().enumerate() {
            let mut s = 0i64;
            for r in 0..self.n {
                let mut prod = 1i64;
                for &k in sub {
                    prod *= i64::from(self.entries[r * self.m + k]);
                }
                s += prod;
            }
            self.sums[id] = s;
            self.sq_totals[self.order_of[id]] += (s * s) as f64;
        }
    }

    fn qb(&self) -> f64 {
        let n2 = (self.n * self.n) as f64;
        (1..=4).map(|i| self.weights[i] * self.sq_totals[i]).sum::<f64>() / n2
    }

    /// Q_B after flipping entry (row, col), without mutating.
    fn qb_after_flip(&self, row: usize, col: usize) -> f64 {
        let mut totals = self.sq_totals;
        for &id in &self.by_column[col] {
            let mut prod = 1i64;
            for &k in &self.subsets[id] {
                prod *= i64::from(self.entries[row * self.m + k]);
            }
            let s = self.sums[id];
            let s_new = s - 2 * prod;
            totals[self.order_of[id]] += (s_new * s_new - s * s) as f64;
        }
        let n2 = (self.n * self.n) as f64;
        (1..=4).map(|i| self.weights[i] * totals[i]).sum::<f64>() / n2
    }

    fn apply_flip(&mut self, row: usize, col: usize) {
        for &id in &self.by_column[col] {
            let mut prod = 1i64;
            for &k in &self.subsets[id] {
                prod *= i64::from(self.entries[row * self.m + k]);
            }
            let s = self.sums[id];
            let s_new = s - 2 * prod;
            self.sums[id] = s_new;
            self.sq_totals[self.order_of[id]] += (s_new * s_new - s * s) as f64;
        }
        self.entries[row * self.m + col] = -self.entries[row * self.m + col];
    }

    fn design(&self) -> Design {
        Design::from_rows(self.entries.chunks(self.m).map(|r| r.to_vec()).collect()).unwrap()
    }
}

/// Run coordinate-exchange sweeps from `start` until a full sweep makes no
/// change. A flip is kept iff it strictly decreases Q_B. Returns the local
/// optimum and its Q_B.
fn sweep_to_local_optimum(entries: Vec<i8>, n: usize, m: usize, prior: PriorPair) -> (Design, f64) {
    let mut state = WordCountState::new(entries, n, m, prior);
    let mut cur = state.qb();
    loop {
        let mut changed = false;
        for row in 0..n {
            for col in 0..m {
                let cand = state.qb_after_flip(row, col);
                if cand < cur {
                    state.apply_flip(row, col);
                    cur = cand;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
        // cap floating-point drift from the incremental updates
        state.recompute();
        cur = state.qb();
    }
    (state.design(), cur)
}

/// Polish a given design: run the coordinate-exchange sweep loop from it
/// and return the resulting local optimum with its Q_B.
pub fn polish(d: &Design, prior: PriorPair) -> (Design, f64) {
    sweep_to_local_optimum(d.entries().to_vec(), d.n(), d.m(), prior)
}

fn random_start(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<i8> {
    (0..n * m).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect()
}

fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

/// Traditional coordinate exchange: random {-1,+1} starts, row-major sweeps,
/// flips kept on strict Q_B decrease, best design over all restarts.
/// Restarts run in parallel; ties break on the lowest restart index so the
/// result is deterministic in (n, m, prior, restarts, seed).
pub fn coordinate_exchange(
    n: usize,
    m: usize,
    prior: PriorPair,
    restarts: usize,
    seed: u64,
) -> Result<OptimResult> {
    if n == 0 || m < 2 || restarts == 0 {
        return Err(Error::Invalid(format!(
            "need n >= 1, m >= 2, restarts >= 1 (got n={n}, m={m}, restarts={restarts})"
        )));
    }
    let best = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = restart_rng(seed, r);
            let start = random_start(&mut rng, n, m);
            let (design, qb) = sweep_to_local_optimum(start, n, m, prior);
            (qb, r, design)
        })
        .min_by(|a, b| (a.0, a.1).partial_cmp(&(b.0, b.1)).unwrap())
        .unwrap();
    let (qb, _, design) = best;
    Ok(OptimResult {
        word_counts: word_counts(&design),
        design,
        qb,
        prior,
        restarts_used: restarts,
        seed,
    })
}

/// Extended coordinate exchange over a list of priors.
///
/// Step 1 runs plain coordinate exchange per prior. Steps 2-3 then compare
/// every prior's incumbent against the designs found at the other priors;
/// whenever some other design scores strictly better at a prior, it is used
/// as a new starting design for the sweep loop at that prior. The
/// reconciliation iterates until no replacement occurs (capped at 50
/// rounds).
pub fn extended_exchange(
    n: usize,
    m: usize,
    priors: &[PriorPair],
    restarts: usize,
    seed: u64,
) -> Result<Vec<OptimResult>> {
    if priors.is_empty() {
        return Err(Error::Invalid("prior list is empty".into()));
    }
    let mut results: Vec<OptimResult> = priors
        .iter()
        .map(|&p| coordinate_exchange(n, m, p, restarts, seed))
        .collect::<Result<_>>()?;
    const MAX_ROUNDS: usize = 50;
    let mut rounds = 0;
    loop {
        rounds += 1;
        let replacements: Vec<Option<(f64, Design)>> = (0..results.len())
            .into_par_iter()
            .map(|i| {
                let prior = results[i].prior;
                let mut best: Option<(f64, Design)> = None;
                for (j, other) in results.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    let qb_other_here = qb_closed(&other.word_counts, m, prior);
                    if qb_other_here < results[i].qb {
                        // re-run the sweep loop from the better design
                        let (design, qb) =
                            sweep_to_local_optimum(other.design.entries().to_vec(), n, m, prior);
                        let qb = qb.min(qb_other_here);
                        let cand = if qb <= qb_other_here {
                            (qb, design)
                        } else {
                            (qb_other_here, other.design.clone())
                        };
                        if best.as_ref().map_or(true, |b| cand.0 < b.0) {
                            best = Some(cand);
                        }
                    }
                }
                best.filter(|b| b.0 < results[i].qb)
            })
            .collect();
        let mut any = false;
        for (res, rep) in results.iter_mut().zip(replacements) {
            if let Some((qb, design)) = rep {
                res.word_counts = word_counts(&design);
                res.design = design;
                res.qb = qb;
                any = true;
            }
        }
        if !any {
            break;
        }
        if rounds >= MAX_ROUNDS {
            eprintln!("warning: extended exchange reconciliation stopped at the {MAX_ROUNDS}-round cap");
            break;
        }
    }
    Ok(results)
}

/// Swap moves within one column of a level-balanced design: run the
/// best-decrease swap protocol until no column can be improved.
fn balanced_sweep_to_local_optimum(
    entries: Vec<i8>,
    n: usize,
    m: usize,
    prior: PriorPair,
) -> (Design, f64) {
    let mut state = WordCountState::new(entries, n, m, prior);
    let mut cur = state.qb();
    loop {
        let mut changed = false;
        for col in 0..m {
            let plus: Vec<usize> =
                (0..n).filter(|&r| state.entries[r * m + col] == 1).collect();
            for &rp in &plus {
                // best swap of this +1 with any -1 in the column
                let minus: Vec<usize> =
                    (0..n).filter(|&r| state.entries[r * m + col] == -1).collect();
                let mut best: Option<(f64, usize)> = None;
                for &rm in &minus {
                    // second flip evaluated on a temporarily applied first flip
                    state.apply_flip(rp, col);
                    let probe = state.qb_after_flip(rm, col);
                    state.apply_flip(rp, col); // revert
                    if probe < cur && best.as_ref().map_or(true, |b| probe < b.0) {
                        best = Some((probe, rm));
                    }
                }
                if let Some((qb, rm)) = best {
                    state.apply_flip(rp, col);
                    state.apply_flip(rm, col);
                    cur = qb;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
        state.recompute();
        cur = state.qb();
    }
    (state.design(), cur)
}

/// Level-balanced search: starts with exactly n/2 high entries per column
/// and improves by within-column swaps, so column sums stay zero throughout.
pub fn level_balanced_exchange(
    n: usize,
    m: usize,
    prior: PriorPair,
    restarts: usize,
    seed: u64,
) -> Result<OptimResult> {
    if n % 2 != 0 {
        return Err(Error::OddRunCount { n });
    }
    if n == 0 || m < 2 || restarts == 0 {
        return Err(Error::Invalid(format!(
            "need n >= 2, m >= 2, restarts >= 1 (got n={n}, m={m}, restarts={restarts})"
        )));
    }
    let best = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = restart_rng(seed, r);
            let mut entries = vec![0i8; n * m];
            for col in 0..m {
                let mut levels: Vec<i8> = vec![1; n / 2];
                levels.extend(vec![-1i8; n / 2]);
                levels.shuffle(&mut rng);
                for (row, &e) in levels.iter().enumerate() {
                    entries[row * m + col] = e;
                }
            }
            let (design, qb) = balanced_sweep_to_local_optimum(entries, n, m, prior);
            (qb, r, design)
        })
        .min_by(|a, b| (a.0, a.1).partial_cmp(&(b.0, b.1)).unwrap())
        .unwrap();
    let (qb, _, design) = best;
    Ok(OptimResult {
        word_counts: word_counts(&design),
        design,
        qb,
        prior,
        restarts_used: restarts,
        seed,
    })
}

/// One equivalence class of k-column Hadamard projections.
#[derive(Debug, Clone, Serialize)]
pub struct HadamardClass {
    /// Representative column subset (0-based indices into the non-constant
    /// columns of the normalized matrix).
    pub subset: Vec<usize>,
    /// Number of subsets sharing this word-count sequence.
    pub count: usize,
    pub word_counts: WordCountPattern,
    /// Full word-count sequence (b_1(1), ..., b_k(k)) used for
    /// deduplication; the Q_B criterion only sees the first four entries.
    pub sequence: Vec<f64>,
}

/// Enumerate all k-column subsets of a normalized Hadamard matrix and group
/// them by their full word-count sequence (deduplicated to 1e-6).
///
/// The matrix is normalized by flipping row signs until the first column is
/// all +1; that constant column is dropped and subsets are drawn from the
/// remaining N-1 columns.
pub fn hadamard_subset_search(h: &Design, k: usize) -> Result<Vec<HadamardClass>> {
    let n = h.n();
    if h.m() != n {
        return Err(Error::NotHadamard);
    }
    if k == 0 || k > n - 1 {
        return Err(Error::Invalid(format!("k={k} out of range 1..={}", n - 1)));
    }
    // exact integer Hadamard identity check
    for i in 0..n {
        for j in 0..n {
            let dot: i64 = (0..n).map(|r| i64::from(h.get(r, i)) * i64::from(h.get(r, j))).sum();
            if dot != if i == j { n as i64 } else { 0 } {
                return Err(Error::NotHadamard);
            }
        }
    }
    // normalize rows so column 0 is all +1, then drop it
    let rows: Vec<Vec<i8>> = (0..n)
        .map(|r| {
            let sign = h.get(r, 0);
            (1..n).map(|c| h.get(r, c) * sign).collect()
        })
        .collect();
    let core = Design::from_rows(rows).unwrap();
    let mut classes: Vec<HadamardClass> = Vec::new();
    for sub in (0..n - 1).combinations(k) {
        let proj = core.select_columns(&sub).unwrap();
        let seq = word_count_sequence(&proj, k);
        match classes
            .iter_mut()
            .find(|c| c.sequence.iter().zip(&seq).all(|(a, b)| (a - b).abs() < 1e-6))
        {
            Some(c) => c.count += 1,
            None => classes.push(HadamardClass {
                subset: sub,
                count: 1,
                word_counts: WordCountPattern::new(
                    seq[0],
                    *seq.get(1).unwrap_or(&0.0),
                    *seq.get(2).unwrap_or(&0.0),
                    *seq.get(3).unwrap_or(&0.0),
                ),
                sequence: seq,
            }),
        }
    }
    Ok(classes)
}

/// True iff no single coordinate flip strictly decreases Q_B.
pub fn is_flip_local_optimum(d: &Design, prior: PriorPair) -> bool {
    let state = WordCountState::new(d.entries().to_vec(), d.n(), d.m(), prior);
    let cur = state.qb();
    for row in 0..d.n() {
        for col in 0..d.m() {
            if state.qb_after_flip(row, col) < cur - 1e-12 {
                return false;
            }
        }
    }
    true
}

/// True iff no within-column swap of a +1 with a -1 strictly decreases Q_B.
pub fn is_swap_local_optimum(d: &Design, prior: PriorPair) -> bool {
    let mut state = WordCountState::new(d.entries().to_vec(), d.n(), d.m(), prior);
    let cur = state.qb();
    for col in 0..d.m() {
        for rp in 0..d.n() {
            if state.entries[rp * d.m() + col] != 1 {
                continue;
            }
            for rm in 0..d.n() {
                if state.entries[rm * d.m() + col] != -1 {
                    continue;
                }
                state.apply_flip(rp, col);
                let probe = state.qb_after_flip(rm, col);
                state.apply_flip(rp, col);
                if probe < cur - 1e-12 {
                    return false;
                }
            }
        }
    }
    true
}
