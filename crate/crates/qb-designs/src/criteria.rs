//! Design criteria: generalized word counts, hereditary model priors, the
//! Q_B criterion (closed form and direct form) and exact/approximate
//! baseline A_s.
//!
//! All Q_B values reported by this crate are on the quarter scale of the
//! proportional closed form (the scale of the published tables); the
//! unscaled closed form is available as [`qb_closed_unscaled`].

use crate::design::{model_matrix, Coding, Design, ModelSpec};
use crate::{Error, Result};
use itertools::Itertools;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Main-effect and conditional-interaction prior probabilities (pi1, pi2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorPair {
    pub pi1: f64,
    pub pi2: f64,
}

impl PriorPair {
    pub fn new(pi1: f64, pi2: f64) -> Result<PriorPair> {
        for v in [pi1, pi2] {
            if !(0.0..=1.0).contains(&v) || v.is_nan() {
                return Err(Error::BadPrior { value: v });
            }
        }
        Ok(PriorPair { pi1, pi2 })
    }
}

/// The word counts (b_1(1), b_2(2), b_3(3), b_4(4)) driving closed-form Q_B.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WordCountPattern {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
}

impl WordCountPattern {
    pub fn new(b1: f64, b2: f64, b3: f64, b4: f64) -> WordCountPattern {
        WordCountPattern { b1, b2, b3, b4 }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.b1, self.b2, self.b3, self.b4]
    }
}

/// xi_{ab} = pi1^a * pi2^b, with 0^0 = 1.
pub fn xi(a: u32, b: u32, p: PriorPair) -> f64 {
    p.pi1.powi(a as i32) * p.pi2.powi(b as i32)
}

/// Sum over all i-subsets s of columns of (1/n^2) (sum_h prod_{k in s} x_hk)^2.
fn word_count_order(d: &Design, order: usize) -> f64 {
    let n = d.n();
    let m = d.m();
    if order > m {
        return 0.0;
    }
    let mut total = 0.0;
    for sub in (0..m).combinations(order) {
        let mut s = 0i64;
        for r in 0..n {
            let mut prod = 1i64;
            for &k in &sub {
                prod *= i64::from(d.get(r, k));
            }
            s += prod;
        }
        total += (s * s) as f64;
    }
    total / (n * n) as f64
}

/// The (b1, b2, b3, b4) word-count pattern of a design. Orders above m are 0
/// by the empty-sum convention.
pub fn word_counts(d: &Design) -> WordCountPattern {
    WordCountPattern::new(
        word_count_order(d, 1),
        word_count_order(d, 2),
        word_count_order(d, 3),
        word_count_order(d, 4),
    )
}

/// Full word-count sequence (b_1(1), ..., b_k(k)).
pub fn word_count_sequence(d: &Design, k: usize) -> Vec<f64> {
    (1..=k).map(|i| word_count_order(d, i)).collect()
}

/// Prior probability of a hereditary model with a mains and b interactions:
/// pi1^a (1-pi1)^(m-a) pi2^b (1-pi2)^(a(a-1)/2 - b).
pub fn model_prior(spec: &ModelSpec, m: usize, p: PriorPair) -> f64 {
    let a = spec.mains().len() as i32;
    let b = spec.interactions().len() as i32;
    p.pi1.powi(a)
        * (1.0 - p.pi1).powi(m as i32 - a)
        * p.pi2.powi(b)
        * (1.0 - p.pi2).powi(a * (a - 1) / 2 - b)
}

/// Enumerate every hereditary model on m factors (all subsets of mains, all
/// subsets of interactions among the chosen mains).
pub fn hereditary_models(m: usize) -> Vec<ModelSpec> {
    let mut out = Vec::new();
    for mains_mask in 0u32..(1 << m) {
        let mains: Vec<usize> = (0..m).filter(|&k| mains_mask >> k & 1 == 1).collect();
        let pairs: Vec<(usize, usize)> = mains
            .iter()
            .copied()
            .tuple_combinations()
            .collect();
        for int_mask in 0u64..(1 << pairs.len()) {
            let ints: Vec<(usize, usize)> = pairs
                .iter()
                .enumerate()
                .filter(|(i, _)| int_mask >> i & 1 == 1)
                .map(|(_, &p)| p)
                .collect();
            out.push(ModelSpec::new(mains.clone(), ints).unwrap());
        }
    }
    out
}

/// Effect labels of the full second-order maximal model, in the column order
/// used throughout: intercept, mains ascending, interactions lexicographic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Effect {
    Intercept,
    Main(usize),
    Interaction(usize, usize),
}

pub fn second_order_effects(m: usize) -> Vec<Effect> {
    let mut effs = vec![Effect::Intercept];
    effs.extend((0..m).map(Effect::Main));
    effs.extend((0..m).tuple_combinations().map(|(a, b)| Effect::Interaction(a, b)));
    effs
}

/// Method selector for [`p_matrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PMatrixMethod {
    ClosedForm,
    Enumeration,
}

/// Joint prior inclusion probabilities p_ij over the second-order effects
/// (index 0 = intercept, always present).
pub fn p_matrix(m: usize, p: PriorPair, method: PMatrixMethod) -> Result<DMatrix<f64>> {
    let effs = second_order_effects(m);
    let v1 = effs.len();
    match method {
        PMatrixMethod::ClosedForm => {
            let mut pm = DMatrix::zeros(v1, v1);
            let joint = |e: &Effect, f: &Effect| -> f64 {
                use Effect::*;
                match (e, f) {
                    (Intercept, Intercept) => 1.0,
                    (Intercept, g) | (g, Intercept) => joint_self(g, p),
                    (Main(i), Main(j)) if i == j => xi(1, 0, p),
                    (Main(_), Main(_)) => xi(2, 0, p),
                    (Interaction(a, b), Interaction(c, d)) if (a, b) == (c, d) => xi(2, 1, p),
                    (Interaction(a, b), Interaction(c, d)) => {
                        let shared = [a, b].iter().filter(|x| [c, d].contains(x)).count();
                        if shared == 1 {
                            xi(3, 2, p)
                        } else {
                            xi(4, 2, p)
                        }
                    }
                    (Main(i), Interaction(a, b)) | (Interaction(a, b), Main(i)) => {
                        if i == a || i == b {
                            xi(2, 1, p)
                        } else {
                            xi(3, 1, p)
                        }
                    }
                }
            };
            fn joint_self(e: &Effect, p: PriorPair) -> f64 {
                match e {
                    Effect::Intercept => 1.0,
                    Effect::Main(_) => xi(1, 0, p),
                    Effect::Interaction(_, _) => xi(2, 1, p),
                }
            }
            for i in 0..v1 {
                for j in 0..v1 {
                    pm[(i, j)] = joint(&effs[i], &effs[j]);
                }
            }
            Ok(pm)
        }
        PMatrixMethod::Enumeration => {
            if m > 5 {
                return Err(Error::FactorCountOutOfRange { m, min: 1, max: 5 });
            }
            let mut pm = DMatrix::zeros(v1, v1);
            for spec in hereditary_models(m) {
                let pr = model_prior(&spec, m, p);
                let ind: Vec<f64> = effs
                    .iter()
                    .map(|e| match e {
                        Effect::Intercept => 1.0,
                        Effect::Main(k) => f64::from(spec.mains().contains(k)),
                        Effect::Interaction(a, b) => {
                            f64::from(spec.interactions().contains(&(*a, *b)))
                        }
                    })
                    .collect();
                for i in 0..v1 {
                    if ind[i] == 0.0 {
                        continue;
                    }
                    for j in 0..v1 {
                        pm[(i, j)] += pr * ind[j];
                    }
                }
            }
            Ok(pm)
        }
    }
}

/// Coefficients multiplying (b1, b2, b3, b4) in the unscaled closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QbWeights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
}

/// w1 = 4 xi10 + 28(m-1) xi21; w2 = 8 xi20 + 24 xi21 + 48(m-2) xi32;
/// w3 = 84 xi31; w4 = 144 xi42.
pub fn qb_weights(m: usize, p: PriorPair) -> QbWeights {
    let mf = m as f64;
    QbWeights {
        w1: 4.0 * xi(1, 0, p) + 28.0 * (mf - 1.0) * xi(2, 1, p),
        w2: 8.0 * xi(2, 0, p) + 24.0 * xi(2, 1, p) + 48.0 * (mf - 2.0) * xi(3, 2, p),
        w3: 84.0 * xi(3, 1, p),
        w4: 144.0 * xi(4, 2, p),
    }
}

/// Closed-form Q_B on the unscaled (full) scale.
pub fn qb_closed_unscaled(wc: &WordCountPattern, m: usize, p: PriorPair) -> f64 {
    let w = qb_weights(m, p);
    w.w1 * wc.b1 + w.w2 * wc.b2 + w.w3 * wc.b3 + w.w4 * wc.b4
}

/// Closed-form Q_B on the quarter (table) scale.
pub fn qb_closed(wc: &WordCountPattern, m: usize, p: PriorPair) -> f64 {
    qb_closed_unscaled(wc, m, p) / 4.0
}

/// Direct-form Q_B from the full second-order centered information matrix
/// and the joint prior inclusion probabilities:
/// off-diagonal terms p_ij a_ij^2 / n^2 weighted 4 (mains) and 24
/// (interactions), diagonal terms p_ii / a_ii. For any {-1,+1} design this
/// equals the unscaled closed form plus the design-independent constant
/// (4 m pi1 + 24 C(m,2) pi1^2 pi2) / n.
pub fn qb_direct(d: &Design, p: PriorPair) -> Result<f64> {
    let m = d.m();
    if m > 12 {
        return Err(Error::FactorCountOutOfRange { m, min: 2, max: 12 });
    }
    let n = d.n() as f64;
    let spec = ModelSpec::full_second_order(m);
    let x = model_matrix(d, &spec, Coding::Centered)?;
    let info = x.transpose() * &x;
    let pm = p_matrix(m, p, PMatrixMethod::ClosedForm)?;
    let v1 = spec.param_count();
    let mut total = 0.0;
    for i in 1..v1 {
        let w = if i <= m { 4.0 } else { 24.0 };
        for j in 0..v1 {
            if i == j {
                total += w * pm[(i, i)] / info[(i, i)];
            } else {
                total += w * pm[(i, j)] * info[(i, j)] * info[(i, j)] / (n * n);
            }
        }
    }
    Ok(total)
}

/// Smallest/largest singular-value ratio below this marks X'X singular.
pub const SINGULARITY_RTOL: f64 = 1e-8;

/// Exact baseline A_s: trace of (X'X)^{-1} excluding the intercept entry,
/// with X the baseline model matrix and unit error variance. `None` signals
/// a non-estimable (singular) model.
pub fn as_exact_baseline(d: &Design, spec: &ModelSpec) -> Result<Option<f64>> {
    let x = model_matrix(d, spec, Coding::Baseline)?;
    let xtx = x.transpose() * &x;
    let svd = xtx.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= SINGULARITY_RTOL * smax {
        return Ok(None);
    }
    let inv = svd
        .pseudo_inverse(0.0)
        .map_err(|e| Error::Invalid(format!("pseudo-inverse failed: {e}")))?;
    Ok(Some(inv.trace() - inv[(0, 0)]))
}

/// Approximate baseline A_s from the full second-order centered information
/// matrix: r_ij = a_ij^2 / (a_ii^2 a_jj) summed with weights 4 (mains in
/// spec) and 24 (interactions in spec), j over the intercept and all spec
/// effects including j = i.
pub fn as_approx_baseline(d: &Design, spec: &ModelSpec) -> Result<f64> {
    spec.validate_for(d.m())?;
    let m = d.m();
    let full = ModelSpec::full_second_order(m);
    let x = model_matrix(d, &full, Coding::Centered)?;
    let info = x.transpose() * &x;
    // Column index of an effect in the full second-order model matrix.
    let pair_index = |a: usize, b: usize| -> usize {
        // lexicographic rank of pair (a,b), a < b
        let mut idx = 0;
        for i in 0..a {
            idx += m - i - 1;
        }
        1 + m + idx + (b - a - 1)
    };
    let mut js = vec![0usize];
    js.extend(spec.mains().iter().map(|&k| 1 + k));
    js.extend(spec.interactions().iter().map(|&(a, b)| pair_index(a, b)));
    let mut total = 0.0;
    let mut add = |i: usize, w: f64| {
        for &j in &js {
            total += w * info[(i, j)] * info[(i, j)] / (info[(i, i)] * info[(i, i)] * info[(j, j)]);
        }
    };
    for &k in spec.mains() {
        add(1 + k, 4.0);
    }
    for &(a, b) in spec.interactions() {
        add(pair_index(a, b), 24.0);
    }
    Ok(total)
}
