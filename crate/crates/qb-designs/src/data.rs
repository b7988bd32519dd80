//! Design matrices and reference tables bundled with the crate.
//!
//! The design files and expected-value tables under `data/` are embedded at
//! compile time so the reproduction targets work from any working
//! directory.

use crate::criteria::WordCountPattern;
use crate::design::{parse_design, Coding, Design};

/// Bundled design matrices.
pub mod designs {
    use super::*;

    pub const TABLE1_DESIGN1: &str = include_str!("../data/designs/table1_design1.txt");
    pub const TABLE1_MIN_K: &str = include_str!("../data/designs/table1_min_k.txt");
    pub const TABLE1_DESIGN2: &str = include_str!("../data/designs/table1_design2.txt");
    pub const TABLE1_DESIGN3: &str = include_str!("../data/designs/table1_design3.txt");
    pub const MIN_K_6X12: &str = include_str!("../data/designs/min_k_6x12.txt");
    pub const MIN_K_6X12_BASELINE: &str = include_str!("../data/designs/min_k_6x12_baseline.txt");
    pub const AD1_6X12: &str = include_str!("../data/designs/ad1_6x12.txt");
    pub const AD2_6X12: &str = include_str!("../data/designs/ad2_6x12.txt");
    pub const HADAMARD12: &str = include_str!("../data/designs/hadamard12.txt");
    pub const MIN_K_9X16: &str = include_str!("../data/designs/min_k_9x16.txt");

    fn centered(text: &str) -> Design {
        parse_design(text, Coding::Centered).expect("bundled design is well-formed")
    }

    pub fn table1_design1() -> Design {
        centered(TABLE1_DESIGN1)
    }

    pub fn table1_min_k() -> Design {
        centered(TABLE1_MIN_K)
    }

    pub fn table1_design2() -> Design {
        centered(TABLE1_DESIGN2)
    }

    pub fn table1_design3() -> Design {
        centered(TABLE1_DESIGN3)
    }

    /// The 6-factor, 12-run minimum K-aberration design (centered form).
    pub fn min_k_6x12() -> Design {
        centered(MIN_K_6X12)
    }

    pub fn ad1_6x12() -> Design {
        centered(AD1_6X12)
    }

    pub fn ad2_6x12() -> Design {
        centered(AD2_6X12)
    }

    /// Order-12 Hadamard matrix (Paley construction), as a 12x12 design.
    pub fn hadamard12() -> Design {
        centered(HADAMARD12)
    }

    /// The 9-factor, 16-run minimum K-aberration design: the regular
    /// 2^{9-5} minimum-aberration fraction, word counts (0, 0, 4, 14).
    pub fn min_k_9x16() -> Design {
        centered(MIN_K_9X16)
    }
}

/// A labeled word-count pattern.
#[derive(Debug, Clone, serde::Serialize)]
pub struct LabeledPattern {
    pub label: String,
    pub pattern: WordCountPattern,
}

fn parse_patterns(csv: &str) -> Vec<LabeledPattern> {
    csv.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            LabeledPattern {
                label: f[0].to_string(),
                pattern: WordCountPattern::new(
                    f[1].parse().unwrap(),
                    f[2].parse().unwrap(),
                    f[3].parse().unwrap(),
                    f[4].parse().unwrap(),
                ),
            }
        })
        .collect()
}

/// Word-count patterns of the eleven 6-factor, 12-run optimal designs.
pub fn patterns_6x12() -> Vec<LabeledPattern> {
    parse_patterns(include_str!("../data/expected/patterns_6x12.csv"))
}

/// Word-count patterns of the 9-factor, 16-run optimal designs.
pub fn patterns_9x16() -> Vec<LabeledPattern> {
    parse_patterns(include_str!("../data/expected/patterns_9x16.csv"))
}

/// Word-count patterns of the three 6x12 reference designs, as published.
pub fn patterns_table3() -> Vec<LabeledPattern> {
    parse_patterns(expected::TABLE3)
}

/// The three 6x12 reference designs by table label.
pub fn reference_design_6x12(label: &str) -> Option<Design> {
    match label {
        "MinK" => Some(designs::min_k_6x12()),
        "AD1" => Some(designs::ad1_6x12()),
        "AD2" => Some(designs::ad2_6x12()),
        _ => None,
    }
}

const PROJ6: &str = include_str!("../data/designs/proj6.txt");
const PROJ9: &str = include_str!("../data/designs/proj9.txt");

/// Per-label Q_B-optimal designs used by the projection comparisons.
///
/// The bundle files hold one design per `# label` section. Labels carry the
/// word-count pattern names; each design reproduces the projection rows
/// published for its label.
pub fn projection_design(m: usize, label: &str) -> Option<Design> {
    let bundle = match m {
        6 => PROJ6,
        9 => PROJ9,
        _ => return None,
    };
    let mut cur: Option<&str> = None;
    let mut rows = String::new();
    for line in bundle.lines().chain(std::iter::once("# end")) {
        if let Some(name) = line.trim().strip_prefix('#') {
            if cur == Some(label) {
                return Some(
                    parse_design(&rows, Coding::Centered).expect("bundled design is well-formed"),
                );
            }
            cur = Some(name.trim());
            match cur {
                Some(l) if l == label => rows.clear(),
                _ => {}
            }
        } else if cur == Some(label) {
            rows.push_str(line);
            rows.push('\n');
        }
    }
    None
}

/// Raw expected-value tables (CSV text embedded from `data/expected/`).
pub mod expected {
    pub const TABLE3: &str = include_str!("../data/expected/table3.csv");
    pub const TABLE4: &str = include_str!("../data/expected/table4.csv");
    pub const TABLE5: &str = include_str!("../data/expected/table5.csv");
    pub const TABLE6: &str = include_str!("../data/expected/table6.csv");
    pub const TABLE7: &str = include_str!("../data/expected/table7.csv");
    pub const TABLE8: &str = include_str!("../data/expected/table8.csv");
    pub const TABLE9: &str = include_str!("../data/expected/table9.csv");
    pub const TABLE10: &str = include_str!("../data/expected/table10.csv");
}

/// A row of the optimizer reference tables (best Q_B per prior).
#[derive(Debug, Clone)]
pub struct OptimRow {
    pub pi1: f64,
    pub pi2: f64,
    pub qb_min_k: f64,
    pub best_qb: f64,
    pub efficiency: f64,
    pub design: String,
}

pub fn parse_optim_table(csv: &str) -> Vec<OptimRow> {
    csv.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            OptimRow {
                pi1: f[0].parse().unwrap(),
                pi2: f[1].parse().unwrap(),
                qb_min_k: f[2].parse().unwrap(),
                best_qb: f[3].parse().unwrap(),
                efficiency: f[4].parse().unwrap(),
                design: f[5].trim().to_string(),
            }
        })
        .collect()
}

/// A row of the level-balanced search reference tables.
#[derive(Debug, Clone)]
pub struct BalanceRow {
    pub pi1: f64,
    pub pi2: f64,
    pub qb: f64,
}

pub fn parse_balance_table(csv: &str) -> Vec<BalanceRow> {
    csv.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            BalanceRow {
                pi1: f[0].parse().unwrap(),
                pi2: f[1].parse().unwrap(),
                qb: f[2].parse().unwrap(),
            }
        })
        .collect()
}

/// A row of the projection reference tables (Tables 7 and 8).
#[derive(Debug, Clone)]
pub struct ProjectionRow {
    pub pi1: f64,
    pub pi2: f64,
    pub ratio_qb: f64,
    pub ratio_k: f64,
    pub n_t: u128,
    pub avg_as_qb: f64,
    pub avg_as_k: f64,
    pub design: String,
}

pub fn parse_projection_table(csv: &str) -> Vec<ProjectionRow> {
    csv.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            ProjectionRow {
                pi1: f[0].parse().unwrap(),
                pi2: f[1].parse().unwrap(),
                ratio_qb: f[2].parse().unwrap(),
                ratio_k: f[3].parse().unwrap(),
                n_t: f[4].parse().unwrap(),
                avg_as_qb: f[5].parse().unwrap(),
                avg_as_k: f[6].parse().unwrap(),
                design: f[7].trim().to_string(),
            }
        })
        .collect()
}
