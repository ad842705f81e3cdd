//! Aggregate invariants into the taxonomy of threefolds in P^4 with
//! one-dimensional Gauss fibers, and verify the conjugate-line structure
//! of generic varieties with f = 1.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::config::{rng_stream, RunConfig, Tolerances};
use crate::error::{Error, Result};
use crate::focal::{
    fiber_through, focus_polynomial, focus_report, focus_roots, sweep_dimensions, FocalTracker,
    FocusReport,
};
use crate::frames::{
    conjugacy_check, conjugate_directions, second_fundamental_form, tangent_frame,
};
use crate::gauss::{gauss_rank, GaussAnalysis};
use crate::jets::{C, ZERO};
use crate::linalg;
use crate::variety::{NumericEval, Variety};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ThreefoldLabel {
    #[serde(rename = "1a")]
    C1a,
    #[serde(rename = "1b")]
    C1b,
    #[serde(rename = "1c")]
    C1c,
    #[serde(rename = "2a")]
    C2a,
    #[serde(rename = "2b")]
    C2b,
    #[serde(rename = "2c")]
    C2c,
    #[serde(rename = "nondegenerate")]
    Nondegenerate,
    #[serde(rename = "unsupported")]
    Unsupported,
}

impl std::fmt::Display for ThreefoldLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ThreefoldLabel::C1a => "1a",
            ThreefoldLabel::C1b => "1b",
            ThreefoldLabel::C1c => "1c",
            ThreefoldLabel::C2a => "2a",
            ThreefoldLabel::C2b => "2b",
            ThreefoldLabel::C2c => "2c",
            ThreefoldLabel::Nondegenerate => "nondegenerate",
            ThreefoldLabel::Unsupported => "unsupported",
        };
        write!(f, "{s}")
    }
}

/// The decision table for one fiber's evidence: multiplicity pattern of
/// the focal points, and the dimensions their components sweep out.
///
/// Two distinct foci: both sweep surfaces -> 1a; a surface and a curve ->
/// 1b; two curves -> 1c. One double focus: sweeping a surface -> 2a; a
/// curve -> 2b; fixed -> 2c.
pub fn decide_label(report: &FocusReport) -> ThreefoldLabel {
    let mut mults: Vec<usize> = report.roots.iter().map(|(_, m)| *m).collect();
    mults.sort_unstable_by(|a, b| b.cmp(a));
    let mut sweeps = report.sweeps.clone();
    sweeps.sort_unstable_by(|a, b| b.cmp(a));
    match (mults.as_slice(), sweeps.as_slice()) {
        ([1, 1], [2, 2]) => ThreefoldLabel::C1a,
        ([1, 1], [2, 1]) => ThreefoldLabel::C1b,
        ([1, 1], [1, 1]) => ThreefoldLabel::C1c,
        ([2], [2]) => ThreefoldLabel::C2a,
        ([2], [1]) => ThreefoldLabel::C2b,
        ([2], [0]) => ThreefoldLabel::C2c,
        _ => ThreefoldLabel::Unsupported,
    }
}

#[derive(Debug)]
pub struct ThreefoldClass {
    pub label: ThreefoldLabel,
    pub gauss: GaussAnalysis,
    pub evidence: Vec<FocusReport>,
}

/// Classify a threefold in P^4 by its focal geometry. Requires a measured
/// fiber dimension of one; votes over at least ten generic fibers and
/// refuses to guess when the votes disagree.
pub fn classify_threefold(x: &Variety, seed: u64, cfg: &RunConfig) -> Result<ThreefoldClass> {
    if x.n() != 3 || x.ambient() != 4 {
        return Err(Error::DimensionMismatch {
            what: format!("threefold classification of '{}' (needs n=3 in P^4)", x.name),
            expected: 3,
            got: x.n(),
        });
    }
    let tol = &cfg.tol;
    let gauss = gauss_rank(x, seed, cfg.samples, tol)?;
    if gauss.f == 0 {
        return Ok(ThreefoldClass {
            label: ThreefoldLabel::Nondegenerate,
            gauss,
            evidence: Vec::new(),
        });
    }
    if gauss.f >= 2 {
        return Ok(ThreefoldClass {
            label: ThreefoldLabel::Unsupported,
            gauss,
            evidence: Vec::new(),
        });
    }

    let fibers = 10usize;
    let mut evidence = Vec::with_capacity(fibers);
    let mut tally: BTreeMap<String, usize> = BTreeMap::new();
    let mut stream = 0u64;
    let mut attempts = 0usize;
    while evidence.len() < fibers {
        attempts += 1;
        if attempts > fibers * (tol.retries + 1) {
            return Err(Error::AllSamplesAmbiguous {
                ambiguous: attempts - evidence.len(),
                attempts,
            });
        }
        let mut rng = rng_stream(seed, 0xc1a5_0000 + stream);
        stream += 1;
        match focus_report(x, &mut rng, tol) {
            Ok(report) => {
                let label = decide_label(&report);
                *tally.entry(label.to_string()).or_default() += 1;
                evidence.push(report);
            }
            Err(Error::UnsupportedFiberDimension { .. }) => continue,
            Err(_) => continue,
        }
    }
    if tally.len() != 1 {
        let parts: Vec<String> = tally.iter().map(|(k, v)| format!("{k} x {v}")).collect();
        return Err(Error::MixedEvidence {
            tally: parts.join(", "),
        });
    }
    let label = decide_label(&evidence[0]);
    Ok(ThreefoldClass {
        label,
        gauss,
        evidence,
    })
}

/// Evidence that one focal component behaves like a conjugate-line focus.
#[derive(Debug)]
pub struct ConjugateComponentReport {
    /// Largest component of the fiber line outside the reconstructed
    /// tangent space of the focal variety.
    pub tangency_residual: f64,
    /// Largest conjugacy residual of the fiber direction against the other
    /// eigen-directions of the reconstructed second fundamental form.
    pub conjugacy_residual: f64,
    /// Sampled focal points (lifts) for external membership checks.
    pub samples: Vec<DVector<C>>,
}

#[derive(Debug)]
pub struct ConjugateStructureReport {
    pub components: Vec<ConjugateComponentReport>,
}

/// Verify that a variety with f = 1 and generic focal behaviour is a union
/// of conjugate lines: each focal component, reconstructed from tracked
/// focal points, must be tangent to the fiber lines at the foci, with the
/// fiber direction a simultaneous eigen-direction of its second
/// fundamental form.
pub fn verify_conjugate_structure(
    x: &Variety,
    seed: u64,
    cfg: &RunConfig,
) -> Result<ConjugateStructureReport> {
    let tol = &cfg.tol;
    let n = x.n();
    let dim = x.ambient() + 1;
    let gauss = gauss_rank(x, seed, cfg.samples, tol)?;
    if gauss.f != 1 {
        return Err(Error::ConjugatePrecondition {
            detail: format!("fiber dimension {} (needs 1)", gauss.f),
        });
    }

    let mut rng = rng_stream(seed, 0xc0 + 1);
    let mut prepared = None;
    let mut last = Error::ConjugatePrecondition {
        detail: "no generic fiber found".into(),
    };
    for _ in 0..=tol.retries {
        let Ok(u0) = x.sample_generic(&mut rng, tol) else {
            continue;
        };
        let outcome = fiber_through(x, &u0, &mut rng, tol).and_then(|fiber| {
            let coeffs = focus_polynomial(x, &fiber, &mut rng, tol)?;
            let roots = focus_roots(&coeffs, tol.cluster_tol)?;
            let sweeps = sweep_dimensions(x, &fiber, &roots, &mut rng, tol)?;
            Ok((fiber, roots, sweeps))
        });
        match outcome {
            Ok(p) => {
                prepared = Some(p);
                break;
            }
            Err(e) => last = e,
        }
    }
    let Some((fiber, roots, sweeps)) = prepared else {
        return Err(last);
    };

    if roots.len() != n - 1 || roots.iter().any(|(_, m)| *m != 1) {
        return Err(Error::ConjugatePrecondition {
            detail: format!(
                "focus is not {} distinct simple points: {:?}",
                n - 1,
                roots.iter().map(|(_, m)| *m).collect::<Vec<_>>()
            ),
        });
    }
    if sweeps.iter().any(|&s| s != n - 1) {
        return Err(Error::ConjugatePrecondition {
            detail: format!("focal sweep dimensions {sweeps:?} (need all {})", n - 1),
        });
    }

    let mut components = Vec::with_capacity(roots.len());
    for k in 0..roots.len() {
        let tracker = std::sync::Arc::new(FocalTracker::new(x, &fiber, &roots, k, &mut rng));
        let tracker_for_eval = tracker.clone();
        let reconstructed = Variety::from_numeric(
            format!("focal_component_{k}({})", x.name),
            NumericEval {
                n: n - 1,
                ambient: x.ambient(),
                step: tol.fd_step_numeric,
                f: std::sync::Arc::new(move |s: &[C]| tracker_for_eval.focal_point(s)),
            },
        );
        let origin = vec![ZERO; n - 1];

        // (a) Tangency: the fiber line through the focus lies inside the
        // reconstructed tangent space.
        let frame = tangent_frame(&reconstructed, &origin, tol)?;
        let mut span = vec![frame.lift.clone()];
        span.extend(frame.tangent.iter().cloned());
        let span_basis = linalg::orthonormal_basis(&span, tol);
        let tangency_residual = linalg::residual_outside(&span_basis, &fiber.base)
            .max(linalg::residual_outside(&span_basis, &fiber.direction));
        if tangency_residual > 1e-5 {
            return Err(Error::ConjugateResidual {
                detail: format!(
                    "fiber line sticks out of focal component {k} tangent space by {tangency_residual:.3e}"
                ),
            });
        }

        // (b) Conjugacy: the fiber direction, in the tangent coordinates of
        // the reconstructed component, is one of its conjugate directions.
        let ii = second_fundamental_form(&reconstructed, &origin, tol)?;
        let mut stacked = DMatrix::zeros(dim, n);
        for c in 0..dim {
            stacked[(c, 0)] = frame.lift[c];
            for i in 0..(n - 1) {
                stacked[(c, i + 1)] = frame.tangent[i][c];
            }
        }
        let svd = stacked.svd(true, true);
        let sol = svd
            .solve(&fiber.direction, 1e-12)
            .map_err(|e| Error::ConjugateResidual {
                detail: format!("tangent coordinate solve failed: {e}"),
            })?;
        let v_dir = DVector::from_iterator(n - 1, (1..n).map(|i| sol[i]));
        if v_dir.norm() < 1e-10 {
            return Err(Error::ConjugateResidual {
                detail: format!("fiber direction degenerate on component {k}"),
            });
        }

        let conjugacy_residual = if n - 1 >= 2 {
            let dirs = conjugate_directions(&ii, &mut rng, tol)?;
            let overlap = |a: &DVector<C>, b: &DVector<C>| {
                a.dotc(b).norm() / (a.norm() * b.norm()).max(1e-300)
            };
            let best = (0..dirs.len())
                .max_by(|&i, &j| {
                    overlap(&dirs[i], &v_dir)
                        .partial_cmp(&overlap(&dirs[j], &v_dir))
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .expect("nonempty directions");
            let mut worst: f64 = 0.0;
            for (j, w) in dirs.iter().enumerate() {
                if j != best {
                    worst = worst.max(conjugacy_check(&ii, &v_dir, w));
                }
            }
            worst
        } else {
            0.0
        };
        if conjugacy_residual > 1e-4 {
            return Err(Error::ConjugateResidual {
                detail: format!(
                    "fiber direction not conjugate on component {k}: residual {conjugacy_residual:.3e}"
                ),
            });
        }

        // Sampled focal points for external membership checks.
        let mut samples = vec![tracker.focal_point(&origin)?];
        for _ in 0..4 {
            let s: Vec<C> = (0..(n - 1))
                .map(|_| crate::config::random_unit_complex(&mut rng) * 0.05)
                .collect();
            if let Ok(z) = tracker.focal_point(&s) {
                samples.push(z);
            }
        }
        components.push(ConjugateComponentReport {
            tangency_residual,
            conjugacy_residual,
            samples,
        });
    }

    Ok(ConjugateStructureReport { components })
}

fn complex_pair(z: C) -> [f64; 2] {
    [z.re, z.im]
}

#[derive(Debug, Serialize)]
pub struct FocusSummary {
    /// Focal roots as ([re, im], multiplicity) pairs in the fiber chart.
    pub pattern: Vec<([f64; 2], usize)>,
    pub sweeps: Vec<usize>,
}

/// Serializable end-to-end report: measured invariants plus the class
/// label when the variety is a threefold in P^4. Stage failures are
/// embedded as strings instead of aborting the report.
#[derive(Debug, Serialize)]
pub struct InvariantReport {
    pub name: String,
    pub n: usize,
    #[serde(rename = "N")]
    pub ambient: usize,
    pub r: Option<usize>,
    pub f: Option<usize>,
    pub focus: Option<FocusSummary>,
    pub class: String,
    pub seed: u64,
    pub samples: usize,
    pub tolerances: Tolerances,
    pub ambiguous_rate: Option<f64>,
    pub errors: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<String, f64>>,
}

/// Deterministic invariant report for any variety. With `with_timings`
/// the wall-clock per stage is included (and byte-identical output across
/// runs is no longer guaranteed).
pub fn invariant_report(
    x: &Variety,
    cfg: &RunConfig,
    with_timings: bool,
) -> InvariantReport {
    let mut report = InvariantReport {
        name: x.name.clone(),
        n: x.n(),
        ambient: x.ambient(),
        r: None,
        f: None,
        focus: None,
        class: ThreefoldLabel::Unsupported.to_string(),
        seed: cfg.seed,
        samples: cfg.samples,
        tolerances: cfg.tol.clone(),
        ambiguous_rate: None,
        errors: Vec::new(),
        timings: with_timings.then(BTreeMap::new),
    };
    let record = |timings: &mut Option<BTreeMap<String, f64>>, stage: &str, secs: f64| {
        if let Some(t) = timings {
            t.insert(stage.to_string(), secs);
        }
    };

    let t0 = std::time::Instant::now();
    let gauss = gauss_rank(x, cfg.seed, cfg.samples, &cfg.tol);
    record(&mut report.timings, "gauss_rank", t0.elapsed().as_secs_f64());
    let gauss = match gauss {
        Ok(g) => g,
        Err(e) => {
            report.errors.push(format!("gauss_rank: {e}"));
            return report;
        }
    };
    report.r = Some(gauss.r);
    report.f = Some(gauss.f);
    report.ambiguous_rate = Some(gauss.ambiguous_rate);

    if gauss.f == 1 {
        let t0 = std::time::Instant::now();
        let mut rng = rng_stream(cfg.seed, 0xf0c5);
        match focus_report(x, &mut rng, &cfg.tol) {
            Ok(fr) => {
                report.focus = Some(FocusSummary {
                    pattern: fr
                        .roots
                        .iter()
                        .map(|(z, m)| (complex_pair(*z), *m))
                        .collect(),
                    sweeps: fr.sweeps.clone(),
                });
            }
            Err(e) => report.errors.push(format!("focus_report: {e}")),
        }
        record(&mut report.timings, "focus_report", t0.elapsed().as_secs_f64());
    }

    if x.n() == 3 && x.ambient() == 4 {
        let t0 = std::time::Instant::now();
        match classify_threefold(x, cfg.seed, cfg) {
            Ok(class) => report.class = class.label.to_string(),
            Err(e) => report.errors.push(format!("classify: {e}")),
        }
        record(&mut report.timings, "classify", t0.elapsed().as_secs_f64());
    }
    report
}
