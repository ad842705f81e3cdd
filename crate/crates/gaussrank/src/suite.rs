//! The curated construction suite: deterministic generators for every
//! family the toolkit handles, each with its expected invariants. The CLI
//! runs it as an end-to-end table; the acceptance tests drive the same
//! entries.

use nalgebra::DVector;
use serde::Serialize;

use crate::classify::{classify_threefold, ThreefoldLabel};
use crate::config::{rng_stream, RunConfig, Tolerances};
use crate::error::Result;
use crate::expr::Expr;
use crate::frames::DirectionField;
use crate::gauss::gauss_rank;
use crate::jets::C;
use crate::variety::{random_curve, random_surface, Variety};

#[derive(Debug, Clone, Serialize)]
pub enum Expectation {
    /// Exact measured rank and fiber dimension.
    RankFiber { r: usize, f: usize },
    /// Lower bound on the fiber dimension.
    FiberFloor { min_f: usize },
    /// Exact classification label.
    Label { label: ThreefoldLabel },
    /// One of several acceptable labels.
    LabelIn { labels: Vec<ThreefoldLabel> },
}

impl std::fmt::Display for Expectation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Expectation::RankFiber { r, f: fd } => write!(f, "r={r}, f={fd}"),
            Expectation::FiberFloor { min_f } => write!(f, "f>={min_f}"),
            Expectation::Label { label } => write!(f, "class {label}"),
            Expectation::LabelIn { labels } => {
                let s: Vec<String> = labels.iter().map(|l| l.to_string()).collect();
                write!(f, "class in {{{}}}", s.join(", "))
            }
        }
    }
}

pub struct SuiteEntry {
    pub name: &'static str,
    pub expected: Expectation,
    pub build: fn(u64, &Tolerances) -> Result<Variety>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteRow {
    pub name: String,
    pub expected: String,
    pub measured: String,
    pub pass: bool,
}

fn twisted_cubic() -> Result<Variety> {
    let t = Expr::param(0);
    Variety::from_polynomials(
        "twisted_cubic",
        1,
        3,
        vec![Expr::one(), t.clone(), Expr::pow(&t, 2), Expr::pow(&t, 3)],
    )
}

fn rational_normal_curve(ambient: usize) -> Result<Variety> {
    let t = Expr::param(0);
    let coords = (0..=ambient).map(|k| Expr::pow(&t, k as u32)).collect();
    Variety::from_polynomials(format!("rnc_{ambient}"), 1, ambient, coords)
}

fn build_linear_plane_p4(_seed: u64, _tol: &Tolerances) -> Result<Variety> {
    Variety::from_polynomials(
        "linear_plane_p4",
        2,
        4,
        vec![
            Expr::one(),
            Expr::param(0),
            Expr::param(1),
            Expr::zero(),
            Expr::zero(),
        ],
    )
}

fn build_veronese_p5(_seed: u64, _tol: &Tolerances) -> Result<Variety> {
    let s = Expr::param(0);
    let t = Expr::param(1);
    Variety::from_polynomials(
        "veronese_p5",
        2,
        5,
        vec![
            Expr::one(),
            s.clone(),
            t.clone(),
            Expr::pow(&s, 2),
            Expr::mul(&s, &t),
            Expr::pow(&t, 2),
        ],
    )
}

fn build_cubic_graph_p4(seed: u64, _tol: &Tolerances) -> Result<Variety> {
    let mut rng = rng_stream(seed, 0x50_01);
    let mut coords = vec![
        Expr::one(),
        Expr::param(0),
        Expr::param(1),
        Expr::param(2),
    ];
    let mut terms = Vec::new();
    for i in 0..=3u32 {
        for j in 0..=(3 - i) {
            let k = 3 - i - j;
            terms.push((
                vec![i, j, k],
                crate::config::random_unit_complex(&mut rng),
            ));
        }
    }
    coords.push(Expr::polynomial(&terms));
    Variety::from_polynomials("cubic_graph_p4", 3, 4, coords)
}

fn build_cone_over_conic_p3(_seed: u64, _tol: &Tolerances) -> Result<Variety> {
    let t = Expr::param(0);
    let conic = Variety::from_polynomials(
        "conic_p3",
        1,
        3,
        vec![Expr::one(), t.clone(), Expr::pow(&t, 2), Expr::zero()],
    )?;
    let vertex = DVector::from_column_slice(&[
        C::new(0.0, 0.0),
        C::new(0.0, 0.0),
        C::new(0.0, 0.0),
        C::new(1.0, 0.0),
    ]);
    Variety::cone(&conic, std::slice::from_ref(&vertex))
}

fn build_tangential_twisted_cubic(_seed: u64, _tol: &Tolerances) -> Result<Variety> {
    Variety::tangential_variety(&twisted_cubic()?)
}

fn build_secant_rnc4_p4(_seed: u64, _tol: &Tolerances) -> Result<Variety> {
    Variety::secant_variety(&rational_normal_curve(4)?, 2)
}

fn build_osculating_quintic_p5(_seed: u64, _tol: &Tolerances) -> Result<Variety> {
    Variety::osculating_variety(&rational_normal_curve(5)?, 2)
}

fn build_hyperband_curve_p3(seed: u64, tol: &Tolerances) -> Result<Variety> {
    let mut rng = rng_stream(seed, 0x50_02);
    let y = random_curve("band_base", 3, 3, &mut rng)?;
    let g: Vec<Expr> = (0..4)
        .map(|_| {
            Expr::add(
                &Expr::constant(crate::config::random_unit_complex(&mut rng)),
                &Expr::scale(
                    crate::config::random_unit_complex(&mut rng),
                    &Expr::pow(&Expr::param(0), 2),
                ),
            )
        })
        .collect();
    Variety::hyperband(&y, &[g], &mut rng, tol)
}

fn build_join_two_curves_p4(seed: u64, _tol: &Tolerances) -> Result<Variety> {
    let mut rng = rng_stream(seed, 0x50_03);
    let c1 = random_curve("join_c1", 4, 3, &mut rng)?;
    let c2 = random_curve("join_c2", 4, 3, &mut rng)?;
    Variety::join(&[c1, c2])
}

fn build_plane_band_quartic_p4(seed: u64, tol: &Tolerances) -> Result<Variety> {
    let mut rng = rng_stream(seed, 0x50_04);
    let t = Expr::param(0);
    let quartic = Variety::from_polynomials(
        "twisted_quartic",
        1,
        4,
        vec![
            Expr::one(),
            t.clone(),
            Expr::pow(&t, 2),
            Expr::pow(&t, 3),
            Expr::pow(&t, 4),
        ],
    )?;
    let g: Vec<Expr> = (0..5)
        .map(|_| {
            Expr::add(
                &Expr::constant(crate::config::random_unit_complex(&mut rng)),
                &Expr::scale(crate::config::random_unit_complex(&mut rng), &t),
            )
        })
        .collect();
    Variety::plane_band(&quartic, &g, &mut rng, tol)
}

fn build_cone_over_surface_p4(seed: u64, _tol: &Tolerances) -> Result<Variety> {
    let mut rng = rng_stream(seed, 0x50_05);
    // Quadratic surface inside the hyperplane x4 = 0, vertex off it.
    let s = Expr::param(0);
    let t = Expr::param(1);
    let mut q_terms = Vec::new();
    for (i, j) in [(2u32, 0u32), (1, 1), (0, 2)] {
        q_terms.push((vec![i, j], crate::config::random_unit_complex(&mut rng)));
    }
    let surface = Variety::from_polynomials(
        "surface_in_h",
        2,
        4,
        vec![
            Expr::one(),
            s.clone(),
            t.clone(),
            Expr::polynomial(&q_terms),
            Expr::zero(),
        ],
    )?;
    let vertex = DVector::from_column_slice(&[
        C::new(0.0, 0.0),
        C::new(0.0, 0.0),
        C::new(0.0, 0.0),
        C::new(0.0, 0.0),
        C::new(1.0, 0.0),
    ]);
    Variety::cone(&surface, std::slice::from_ref(&vertex))
}

fn build_dual_surface_p4(seed: u64, tol: &Tolerances) -> Result<Variety> {
    let mut rng = rng_stream(seed, 0x50_06);
    let s = random_surface("dual_base", 4, 3, &mut rng)?;
    Variety::dual_variety(&s, &mut rng, tol)
}

fn build_line_union_conjugate_p4(seed: u64, tol: &Tolerances) -> Result<Variety> {
    let mut rng = rng_stream(seed, 0x50_07);
    let y = random_surface("conjugate_base", 4, 3, &mut rng)?;
    Variety::line_union(&y, DirectionField::Conjugate(0), seed ^ 0x50_07, tol)
}

/// Every curated construction with its expected invariants.
pub fn curated_suite() -> Vec<SuiteEntry> {
    vec![
        SuiteEntry {
            name: "linear_plane_p4",
            expected: Expectation::RankFiber { r: 0, f: 2 },
            build: build_linear_plane_p4,
        },
        SuiteEntry {
            name: "veronese_p5",
            expected: Expectation::RankFiber { r: 2, f: 0 },
            build: build_veronese_p5,
        },
        SuiteEntry {
            name: "cubic_graph_p4",
            expected: Expectation::Label {
                label: ThreefoldLabel::Nondegenerate,
            },
            build: build_cubic_graph_p4,
        },
        SuiteEntry {
            name: "cone_over_conic_p3",
            expected: Expectation::RankFiber { r: 1, f: 1 },
            build: build_cone_over_conic_p3,
        },
        SuiteEntry {
            name: "tangential_twisted_cubic_p3",
            expected: Expectation::RankFiber { r: 1, f: 1 },
            build: build_tangential_twisted_cubic,
        },
        SuiteEntry {
            name: "secant_rnc4_p4",
            expected: Expectation::FiberFloor { min_f: 1 },
            build: build_secant_rnc4_p4,
        },
        SuiteEntry {
            name: "osculating_quintic_p5",
            expected: Expectation::FiberFloor { min_f: 1 },
            build: build_osculating_quintic_p5,
        },
        SuiteEntry {
            name: "hyperband_curve_p3",
            expected: Expectation::FiberFloor { min_f: 1 },
            build: build_hyperband_curve_p3,
        },
        SuiteEntry {
            name: "join_two_curves_p4",
            expected: Expectation::Label {
                label: ThreefoldLabel::C1c,
            },
            build: build_join_two_curves_p4,
        },
        SuiteEntry {
            name: "plane_band_quartic_p4",
            expected: Expectation::Label {
                label: ThreefoldLabel::C2b,
            },
            build: build_plane_band_quartic_p4,
        },
        SuiteEntry {
            name: "cone_over_surface_p4",
            expected: Expectation::Label {
                label: ThreefoldLabel::C2c,
            },
            build: build_cone_over_surface_p4,
        },
        SuiteEntry {
            name: "dual_surface_p4",
            expected: Expectation::Label {
                label: ThreefoldLabel::C1a,
            },
            build: build_dual_surface_p4,
        },
        SuiteEntry {
            name: "line_union_conjugate_p4",
            expected: Expectation::LabelIn {
                labels: vec![ThreefoldLabel::C1a, ThreefoldLabel::C1b],
            },
            build: build_line_union_conjugate_p4,
        },
    ]
}

/// Run one suite entry against its expectation.
pub fn run_entry(entry: &SuiteEntry, cfg: &RunConfig) -> SuiteRow {
    let outcome = (entry.build)(cfg.seed, &cfg.tol).and_then(|x| {
        match &entry.expected {
            Expectation::RankFiber { .. } | Expectation::FiberFloor { .. } => {
                let a = gauss_rank(&x, cfg.seed, cfg.samples, &cfg.tol)?;
                Ok((format!("r={}, f={}", a.r, a.f), a.r, a.f, None))
            }
            Expectation::Label { .. } | Expectation::LabelIn { .. } => {
                let class = classify_threefold(&x, cfg.seed, cfg)?;
                Ok((
                    format!(
                        "r={}, f={}, class {}",
                        class.gauss.r, class.gauss.f, class.label
                    ),
                    class.gauss.r,
                    class.gauss.f,
                    Some(class.label),
                ))
            }
        }
    });
    match outcome {
        Ok((measured, r, f, label)) => {
            let pass = match &entry.expected {
                Expectation::RankFiber { r: er, f: ef } => r == *er && f == *ef,
                Expectation::FiberFloor { min_f } => f >= *min_f,
                Expectation::Label { label: el } => label == Some(*el),
                Expectation::LabelIn { labels } => {
                    label.is_some_and(|l| labels.contains(&l))
                }
            };
            SuiteRow {
                name: entry.name.to_string(),
                expected: entry.expected.to_string(),
                measured,
                pass,
            }
        }
        Err(e) => SuiteRow {
            name: entry.name.to_string(),
            expected: entry.expected.to_string(),
            measured: format!("error: {e}"),
            pass: false,
        },
    }
}

/// Run the whole curated suite; returns the rows and whether all passed.
pub fn run_suite(cfg: &RunConfig) -> (Vec<SuiteRow>, bool) {
    let rows: Vec<SuiteRow> = curated_suite()
        .iter()
        .map(|entry| run_entry(entry, cfg))
        .collect();
    let all = rows.iter().all(|r| r.pass);
    (rows, all)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curated_entries_build() {
        let tol = Tolerances::default();
        for entry in curated_suite() {
            assert!(
                (entry.build)(0, &tol).is_ok(),
                "entry {} failed to build",
                entry.name
            );
        }
    }
}
