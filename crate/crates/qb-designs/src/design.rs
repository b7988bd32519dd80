//! Two-level designs, codings, model matrices and the design file format.
//!
//! Canonical storage is the centered coding: every entry is -1 or +1.
//! Baseline (0/1) views are derived on demand, with 0 mapping to -1 and 1
//! mapping to +1.

use crate::{Error, Result};
use nalgebra::DMatrix;

/// Factor-level coding of a design or model matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coding {
    /// Levels {-1, +1}.
    Centered,
    /// Levels {0, 1}; 0 corresponds to the centered -1.
    Baseline,
}

impl Coding {
    fn name(self) -> &'static str {
        match self {
            Coding::Centered => "centered",
            Coding::Baseline => "baseline",
        }
    }
}

/// An n x m two-level design stored in centered coding.
///
/// Duplicate rows are permitted. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Design {
    n: usize,
    m: usize,
    entries: Vec<i8>, // row-major, each -1 or +1
}

impl Design {
    pub fn from_rows(rows: Vec<Vec<i8>>) -> Result<Design> {
        if rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        let m = rows[0].len();
        if m == 0 {
            return Err(Error::EmptyInput);
        }
        let mut entries = Vec::with_capacity(rows.len() * m);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::RaggedRows { row: r + 1, got: row.len(), expected: m });
            }
            for &e in row {
                if e != -1 && e != 1 {
                    return Err(Error::BadEntry {
                        value: e.to_string(),
                        row: r + 1,
                        coding: "centered",
                    });
                }
                entries.push(e);
            }
        }
        Ok(Design { n: rows.len(), m, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Entry at run `r`, factor `k` (both 0-based) in centered coding.
    pub fn get(&self, r: usize, k: usize) -> i8 {
        self.entries[r * self.m + k]
    }

    pub fn row(&self, r: usize) -> &[i8] {
        &self.entries[r * self.m..(r + 1) * self.m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i8]> {
        self.entries.chunks(self.m)
    }

    pub fn entries(&self) -> &[i8] {
        &self.entries
    }

    /// Sum of entries of factor column `k`.
    pub fn column_sum(&self, k: usize) -> i64 {
        (0..self.n).map(|r| i64::from(self.get(r, k))) .sum()
    }

    /// New design with the given factor columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Design> {
        for &c in cols {
            if c >= self.m {
                return Err(Error::FactorOutOfRange { factor: c + 1, m: self.m });
            }
        }
        let rows = (0..self.n)
            .map(|r| cols.iter().map(|&c| self.get(r, c)).collect())
            .collect();
        Design::from_rows(rows)
    }

    /// New design with the sign of the listed factor columns flipped.
    pub fn flip_columns(&self, cols: &[usize]) -> Design {
        let mut entries = self.entries.clone();
        for &c in cols {
            for r in 0..self.n {
                entries[r * self.m + c] = -entries[r * self.m + c];
            }
        }
        Design { n: self.n, m: self.m, entries }
    }

    pub fn serialize(&self, coding: Coding) -> String {
        let mut out = String::new();
        for row in self.rows() {
            let mut first = true;
            for &e in row {
                if !first {
                    out.push(' ');
                }
                first = false;
                let v = match coding {
                    Coding::Centered => i32::from(e),
                    Coding::Baseline => i32::from(e == 1),
                };
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Parse a whitespace-separated design file. `#` starts a comment line.
///
/// Baseline input (0/1) is converted to the canonical centered storage with
/// 0 -> -1 and 1 -> +1.
pub fn parse_design(text: &str, coding: Coding) -> Result<Design> {
    let mut rows: Vec<Vec<i8>> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        for tok in line.split_whitespace() {
            let v: i64 = tok.parse().map_err(|_| Error::BadEntry {
                value: tok.to_string(),
                row: rows.len() + 1,
                coding: coding.name(),
            })?;
            let e = match (coding, v) {
                (Coding::Centered, -1) => -1,
                (Coding::Centered, 1) => 1,
                (Coding::Baseline, 0) => -1,
                (Coding::Baseline, 1) => 1,
                _ => {
                    return Err(Error::BadEntry {
                        value: tok.to_string(),
                        row: rows.len() + 1,
                        coding: coding.name(),
                    })
                }
            };
            row.push(e);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let m = rows[0].len();
    for (r, row) in rows.iter().enumerate() {
        if row.len() != m {
            return Err(Error::RaggedRows { row: r + 1, got: row.len(), expected: m });
        }
    }
    Design::from_rows(rows)
}

/// A hereditary submodel: a set of main effects plus two-factor interactions
/// among them. Factor indices are 0-based internally.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModelSpec {
    mains: Vec<usize>,         // sorted ascending
    interactions: Vec<(usize, usize)>, // sorted lexicographically, each (a,b) with a < b
}

impl ModelSpec {
    pub fn new(mut mains: Vec<usize>, mut interactions: Vec<(usize, usize)>) -> Result<ModelSpec> {
        mains.sort_unstable();
        mains.dedup();
        for p in interactions.iter_mut() {
            if p.0 > p.1 {
                *p = (p.1, p.0);
            }
        }
        interactions.sort_unstable();
        interactions.dedup();
        for &(a, b) in &interactions {
            if !mains.contains(&a) || !mains.contains(&b) || a == b {
                return Err(Error::HeredityViolation { a: a + 1, b: b + 1 });
            }
        }
        Ok(ModelSpec { mains, interactions })
    }

    /// Intercept-only model.
    pub fn intercept_only() -> ModelSpec {
        ModelSpec { mains: Vec::new(), interactions: Vec::new() }
    }

    /// All m main effects and all two-factor interactions.
    pub fn full_second_order(m: usize) -> ModelSpec {
        let mains = (0..m).collect();
        let mut interactions = Vec::new();
        for a in 0..m {
            for b in (a + 1)..m {
                interactions.push((a, b));
            }
        }
        ModelSpec { mains, interactions }
    }

    pub fn mains(&self) -> &[usize] {
        &self.mains
    }

    pub fn interactions(&self) -> &[(usize, usize)] {
        &self.interactions
    }

    /// Parameter count including the intercept.
    pub fn param_count(&self) -> usize {
        1 + self.mains.len() + self.interactions.len()
    }

    pub fn validate_for(&self, m: usize) -> Result<()> {
        if let Some(&k) = self.mains.iter().find(|&&k| k >= m) {
            return Err(Error::FactorOutOfRange { factor: k + 1, m });
        }
        Ok(())
    }
}

/// Model matrix for `spec` under the requested coding.
///
/// Column order: intercept, mains ascending, interactions in lexicographic
/// pair order. Centered interaction columns are products of centered main
/// columns; baseline interaction columns are products of baseline (0/1)
/// main columns.
pub fn model_matrix(d: &Design, spec: &ModelSpec, coding: Coding) -> Result<DMatrix<f64>> {
    spec.validate_for(d.m())?;
    let n = d.n();
    let p = spec.param_count();
    let level = |e: i8| -> f64 {
        match coding {
            Coding::Centered => f64::from(e),
            Coding::Baseline => f64::from(e == 1),
        }
    };
    let mut x = DMatrix::zeros(n, p);
    for r in 0..n {
        x[(r, 0)] = 1.0;
        for (j, &k) in spec.mains.iter().enumerate() {
            x[(r, 1 + j)] = level(d.get(r, k));
        }
        for (j, &(a, b)) in spec.interactions.iter().enumerate() {
            x[(r, 1 + spec.mains.len() + j)] = level(d.get(r, a)) * level(d.get(r, b));
        }
    }
    Ok(x)
}

/// The 2^m-run full factorial with rows in the reverse of Yates' order:
/// first row all factors high, last row all factors low.
pub fn full_factorial(m: usize) -> Result<Design> {
    if m == 0 || m > 12 {
        return Err(Error::FactorCountOutOfRange { m, min: 1, max: 12 });
    }
    let n = 1usize << m;
    let rows = (0..n)
        .map(|r| (0..m).map(|k| if r >> k & 1 == 0 { 1 } else { -1 }).collect())
        .collect();
    Design::from_rows(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_single_row() {
        let d = parse_design("1 1", Coding::Centered).unwrap();
        assert_eq!((d.n(), d.m()), (1, 2));
        assert_eq!(d.row(0), &[1, 1]);
    }

    #[test]
    fn parse_rejects_bad_alphabet() {
        assert!(matches!(
            parse_design("2 1", Coding::Centered),
            Err(Error::BadEntry { .. })
        ));
        assert!(matches!(
            parse_design("-1 1", Coding::Baseline),
            Err(Error::BadEntry { .. })
        ));
    }

    #[test]
    fn parse_rejects_ragged_and_empty() {
        assert!(matches!(
            parse_design("1 1\n1", Coding::Centered),
            Err(Error::RaggedRows { .. })
        ));
        assert!(matches!(
            parse_design("# only a comment\n", Coding::Centered),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn baseline_mapping() {
        let d = parse_design("0 1\n1 0", Coding::Baseline).unwrap();
        assert_eq!(d.row(0), &[-1, 1]);
        assert_eq!(d.row(1), &[1, -1]);
    }

    #[test]
    fn table2_min_k_baseline_matches_centered() {
        let min_k = crate::data::designs::min_k_6x12();
        let from_baseline =
            parse_design(crate::data::designs::MIN_K_6X12_BASELINE, Coding::Baseline).unwrap();
        // Table 2 pairs the 0/1 and centered displays with different row
        // orders; compare as multisets of rows.
        let mut a: Vec<_> = from_baseline.rows().map(|r| r.to_vec()).collect();
        let mut b: Vec<_> = min_k.rows().map(|r| r.to_vec()).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn full_factorial_m2_row_order() {
        let d = full_factorial(2).unwrap();
        let rows: Vec<_> = d.rows().map(|r| r.to_vec()).collect();
        assert_eq!(rows, vec![vec![1, 1], vec![-1, 1], vec![1, -1], vec![-1, -1]]);
    }

    #[test]
    fn full_factorial_m1() {
        let d = full_factorial(1).unwrap();
        let rows: Vec<_> = d.rows().map(|r| r.to_vec()).collect();
        assert_eq!(rows, vec![vec![1], vec![-1]]);
    }

    #[test]
    fn full_factorial_m3_block_recursion() {
        // X_c(3) = [[X_c(2), X_c(2)], [X_c(2), -X_c(2)]] column-wise: the
        // first two factors repeat the m=2 layout and factor 3 is high in
        // the top half, low in the bottom half.
        let d2 = full_factorial(2).unwrap();
        let d3 = full_factorial(3).unwrap();
        for r in 0..4 {
            assert_eq!(&d3.row(r)[..2], d2.row(r));
            assert_eq!(&d3.row(r + 4)[..2], d2.row(r));
            assert_eq!(d3.get(r, 2), 1);
            assert_eq!(d3.get(r + 4, 2), -1);
        }
    }

    #[test]
    fn full_factorial_rows_distinct() {
        for m in 1..=6 {
            let d = full_factorial(m).unwrap();
            let mut rows: Vec<_> = d.rows().map(|r| r.to_vec()).collect();
            rows.sort();
            rows.dedup();
            assert_eq!(rows.len(), 1 << m);
        }
    }

    #[test]
    fn model_matrix_baseline_full_factorial_m2() {
        // The X_b(2) display: rows in reverse-Yates order, columns
        // intercept, F1, F2, F1F2.
        let d = full_factorial(2).unwrap();
        let x = model_matrix(&d, &ModelSpec::full_second_order(2), Coding::Baseline).unwrap();
        let expected = [
            [1.0, 1.0, 1.0, 1.0],
            [1.0, 0.0, 1.0, 0.0],
            [1.0, 1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
        ];
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(x[(r, c)], expected[r][c]);
            }
        }
    }

    #[test]
    fn model_matrix_intercept_only() {
        let d = parse_design("1 -1\n-1 1\n1 1", Coding::Centered).unwrap();
        let x = model_matrix(&d, &ModelSpec::intercept_only(), Coding::Centered).unwrap();
        assert_eq!(x.ncols(), 1);
        assert!(x.column(0).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn model_spec_rejects_non_hereditary() {
        assert!(ModelSpec::new(vec![0, 1], vec![(0, 2)]).is_err());
    }

    #[test]
    fn model_matrix_rejects_factor_out_of_range() {
        let d = parse_design("1 -1\n-1 1", Coding::Centered).unwrap();
        let spec = ModelSpec::new(vec![0, 2], vec![]).unwrap();
        assert!(model_matrix(&d, &spec, Coding::Centered).is_err());
    }

    fn arb_design(n: usize, m: usize) -> impl Strategy<Value = Design> {
        proptest::collection::vec(proptest::collection::vec(prop_oneof![Just(-1i8), Just(1i8)], m), n)
            .prop_map(|rows| Design::from_rows(rows).unwrap())
    }

    proptest! {
        #[test]
        fn round_trip_both_codings(d in arb_design(5, 4)) {
            for coding in [Coding::Centered, Coding::Baseline] {
                let text = d.serialize(coding);
                let back = parse_design(&text, coding).unwrap();
                prop_assert_eq!(&back, &d);
            }
        }

        #[test]
        fn baseline_main_columns_are_affine_rescale(d in arb_design(5, 4)) {
            // (centered + 1)/2 = baseline holds for main-effect columns,
            // while interaction columns are products of baseline mains and
            // are NOT the rescaled centered products.
            let spec = ModelSpec::full_second_order(4);
            let xc = model_matrix(&d, &spec, Coding::Centered).unwrap();
            let xb = model_matrix(&d, &spec, Coding::Baseline).unwrap();
            for r in 0..d.n() {
                for c in 1..=4 {
                    prop_assert_eq!(xb[(r, c)], (xc[(r, c)] + 1.0) / 2.0);
                }
                for c in 5..spec.param_count() {
                    let a = xb[(r, c - 0)];
                    // product of baseline mains
                    prop_assert!(a == 0.0 || a == 1.0);
                }
            }
            // Exhibit a row where rescaling the centered interaction column
            // disagrees with the baseline product unless all entries match.
            let mut all_match = true;
            for r in 0..d.n() {
                for c in 5..spec.param_count() {
                    if xb[(r, c)] != (xc[(r, c)] + 1.0) / 2.0 {
                        all_match = false;
                    }
                }
            }
            // (-1,-1) rows give centered product +1 -> rescaled 1 but
            // baseline product 0, so designs with such a pair must differ.
            let has_low_pair = (0..d.n()).any(|r| {
                (0..4).any(|a| ((a + 1)..4).any(|b| d.get(r, a) == -1 && d.get(r, b) == -1))
            });
            prop_assert_eq!(!all_match, has_low_pair);
        }
    }
}
