//! The Gauss map: Pluecker coordinates of the embedded tangent space, the
//! numerical rank of the map (measured two independent ways), and the
//! constancy of tangent spaces along the spanning planes of joins.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{random_point, random_unit_complex, rng_stream, Tolerances};
use crate::error::{Error, Result};
use crate::frames::{gauss_fiber_space, second_fundamental_form};
use crate::jets::C;
use crate::linalg;
use crate::variety::{Provenance, Variety};

/// Measured Gauss-map invariants of a variety.
#[derive(Debug, Clone, Serialize)]
pub struct GaussAnalysis {
    pub n: usize,
    #[serde(rename = "N")]
    pub ambient: usize,
    /// Rank of the Gauss map at general points.
    pub r: usize,
    /// Fiber dimension f = n - r.
    pub f: usize,
    pub samples_used: usize,
    /// Fraction of sample attempts rejected and resampled.
    pub ambiguous_rate: f64,
}

/// Lexicographic (n+1)-subsets of the column indices 0..count.
fn column_subsets(count: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..size).collect();
    if size > count {
        return out;
    }
    loop {
        out.push(current.clone());
        // Advance to the next combination.
        let mut i = size;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if current[i] != i + count - size {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        current[i] += 1;
        for j in (i + 1)..size {
            current[j] = current[j - 1] + 1;
        }
    }
}

/// Unnormalized Pluecker coordinates: all (n+1) x (n+1) minors of the
/// stacked matrix [phi; d phi], in lexicographic column order.
fn raw_pluecker(x: &Variety, u: &[C]) -> Result<DVector<C>> {
    let (_, m) = x.lift_and_frame_matrix(u)?;
    let rows = m.nrows();
    let cols = m.ncols();
    let subsets = column_subsets(cols, rows);
    let mut out = DVector::from_element(subsets.len(), C::new(0.0, 0.0));
    for (k, subset) in subsets.iter().enumerate() {
        let sub = m.select_columns(subset.iter());
        out[k] = linalg::determinant(&sub);
    }
    Ok(out)
}

/// Pluecker coordinates of the embedded tangent space at u, unit norm with
/// the first nonzero coordinate made real positive.
pub fn pluecker_gauss(x: &Variety, u: &[C], tol: &Tolerances) -> Result<DVector<C>> {
    let (_, m) = x.lift_and_frame_matrix(u)?;
    let sv = linalg::singular_values(&m);
    let decision = linalg::rank_from_singular_values(&sv, tol);
    if decision.rank != x.n() + 1 {
        return Err(Error::RankDrop {
            detail: format!("tangent stack rank {} of {}", decision.rank, x.n() + 1),
        });
    }
    let p = raw_pluecker(x, u)?;
    Ok(linalg::normalize_phase(&p))
}

/// Numerical rank of the differential of the Gauss map at u, from a
/// finite-difference Jacobian of the Pluecker map in a projective chart.
/// Exact coordinate maps use a plain central difference at `fd_step`;
/// numerically differentiated maps use a Richardson-extrapolated stencil
/// at the wider `fd_step_numeric` to stay above their noise floor.
pub fn pluecker_rank(x: &Variety, u: &[C], tol: &Tolerances) -> Result<linalg::RankDecision> {
    let n = x.n();
    let p0 = raw_pluecker(x, u)?;
    let scale = p0.norm();
    if scale < 1e-12 {
        return Err(Error::RankDrop {
            detail: "vanishing Pluecker vector".into(),
        });
    }
    if p0.len() == 1 {
        // The variety fills its ambient space; the Gauss map target is a
        // single point and the rank is zero.
        return Ok(linalg::RankDecision {
            rank: 0,
            ambiguous: false,
            sigma_max: 0.0,
            gap: f64::INFINITY,
        });
    }
    let pivot = p0.iter().enumerate().max_by(|a, b| {
        a.1.norm()
            .partial_cmp(&b.1.norm())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let pivot = pivot.expect("nonempty Pluecker vector").0;

    let chart = |point: &[C]| -> Result<DVector<C>> {
        let p = raw_pluecker(x, point)?;
        let denom = p[pivot];
        if denom.norm() < 1e-4 * p.norm() {
            return Err(Error::AmbiguousSample {
                what: "Pluecker chart pivot".into(),
            });
        }
        let mut out = DVector::from_element(p.len() - 1, C::new(0.0, 0.0));
        let mut w = 0;
        for i in 0..p.len() {
            if i != pivot {
                out[w] = p[i] / denom;
                w += 1;
            }
        }
        Ok(out)
    };

    let rows = p0.len() - 1;
    let mut jac = DMatrix::from_element(rows, n, C::new(0.0, 0.0));
    let central = |i: usize, h: f64| -> Result<DVector<C>> {
        let mut up = u.to_vec();
        up[i] += C::new(h, 0.0);
        let mut um = u.to_vec();
        um[i] -= C::new(h, 0.0);
        Ok((chart(&up)? - chart(&um)?) / C::new(2.0 * h, 0.0))
    };
    for i in 0..n {
        let col = if x.is_exact() {
            central(i, tol.fd_step)?
        } else {
            let d1 = central(i, tol.fd_step_numeric)?;
            let d2 = central(i, 2.0 * tol.fd_step_numeric)?;
            (d1 * C::new(4.0, 0.0) - d2) / C::new(3.0, 0.0)
        };
        jac.set_column(i, &col);
    }
    Ok(linalg::rank_of(&jac, tol))
}

enum SampleOutcome {
    Accepted { r_pluecker: usize, f_kernel: usize },
    Rejected,
}

fn analyze_sample(x: &Variety, seed: u64, attempt: u64, tol: &Tolerances) -> SampleOutcome {
    let mut rng = rng_stream(seed, 0x6a55_0000 + attempt);
    let u = random_point(&mut rng, x.n());

    // Genericity: nonzero lift, immersive Jacobian with margin.
    let Ok(jets) = x.evaluate(&u, 1) else {
        return SampleOutcome::Rejected;
    };
    let dim = x.ambient() + 1;
    let value = DVector::from_iterator(dim, jets.iter().map(|j| j.value()));
    if value.norm() < 1e-10 {
        return SampleOutcome::Rejected;
    }
    if x.n() > 0 {
        let jac = DMatrix::from_fn(dim, x.n(), |c, i| jets[c].grad()[i]);
        let sv = linalg::singular_values(&jac);
        let decision = linalg::rank_from_singular_values(&sv, tol);
        if decision.rank != x.n() || sv[x.n() - 1] <= tol.gap_factor * tol.tol_rank * sv[0] {
            return SampleOutcome::Rejected;
        }
    }

    let Ok(ii) = second_fundamental_form(x, &u, tol) else {
        return SampleOutcome::Rejected;
    };
    let Ok(kernel) = gauss_fiber_space(&ii, tol) else {
        return SampleOutcome::Rejected;
    };
    let Ok(decision) = pluecker_rank(x, &u, tol) else {
        return SampleOutcome::Rejected;
    };
    if decision.ambiguous {
        return SampleOutcome::Rejected;
    }
    SampleOutcome::Accepted {
        r_pluecker: decision.rank,
        f_kernel: kernel.len(),
    }
}

/// Measure the Gauss rank at `samples` accepted generic points. The two
/// routes (Pluecker Jacobian rank; second-fundamental-form kernel) must
/// agree at every accepted sample; the final rank is a majority vote.
pub fn gauss_rank(x: &Variety, seed: u64, samples: usize, tol: &Tolerances) -> Result<GaussAnalysis> {
    let n = x.n();
    let cap = samples * (tol.retries + 1);
    let outcomes: Vec<SampleOutcome> = (0..cap as u64)
        .into_par_iter()
        .map(|attempt| analyze_sample(x, seed, attempt, tol))
        .collect();

    let mut votes: Vec<usize> = Vec::new();
    let mut rejected = 0usize;
    let mut consumed = 0usize;
    for outcome in &outcomes {
        consumed += 1;
        match outcome {
            SampleOutcome::Accepted {
                r_pluecker,
                f_kernel,
            } => {
                if *r_pluecker != n - *f_kernel {
                    return Err(Error::OracleMismatch {
                        pluecker_rank: *r_pluecker,
                        kernel_rank: n - *f_kernel,
                    });
                }
                votes.push(*r_pluecker);
                if votes.len() == samples {
                    break;
                }
            }
            SampleOutcome::Rejected => rejected += 1,
        }
    }
    let ambiguous_rate = rejected as f64 / consumed.max(1) as f64;
    if votes.is_empty() || ambiguous_rate > 0.5 {
        return Err(Error::AllSamplesAmbiguous {
            ambiguous: rejected,
            attempts: consumed,
        });
    }
    let mut counts: std::collections::BTreeMap<usize, usize> = std::collections::BTreeMap::new();
    for v in &votes {
        *counts.entry(*v).or_default() += 1;
    }
    let r = *counts
        .iter()
        .max_by_key(|(_, c)| **c)
        .expect("nonempty votes")
        .0;
    Ok(GaussAnalysis {
        n,
        ambient: x.ambient(),
        r,
        f: n - r,
        samples_used: votes.len(),
        ambiguous_rate,
    })
}

/// Max principal angle (radians) between the embedded tangent spaces at
/// random points of the spanning plane through u: varies only the join's
/// spanning-coefficient block. Requires join provenance.
pub fn terracini_check(
    x: &Variety,
    u: &[C],
    trials: usize,
    rng: &mut impl Rng,
    tol: &Tolerances,
) -> Result<f64> {
    let span_block = match x.provenance() {
        Provenance::Join { span_block, .. } => span_block.clone(),
        _ => {
            return Err(Error::Input(
                "tangent-constancy check requires join provenance".into(),
            ))
        }
    };
    let row_family = |point: &[C]| -> Result<Vec<DVector<C>>> {
        let (_, m) = x.lift_and_frame_matrix(point)?;
        let sv = linalg::singular_values(&m);
        let decision = linalg::rank_from_singular_values(&sv, tol);
        if decision.rank != x.n() + 1 {
            return Err(Error::RankDrop {
                detail: "tangent stack rank drop on the spanning plane".into(),
            });
        }
        Ok((0..m.nrows()).map(|r| m.row(r).transpose()).collect())
    };
    let base = row_family(u)?;
    let mut worst: f64 = 0.0;
    let mut done = 0;
    let mut attempts = 0;
    while done < trials && attempts < trials * (tol.retries + 1) {
        attempts += 1;
        let mut point = u.to_vec();
        for i in span_block.clone() {
            point[i] = random_unit_complex(rng);
        }
        match row_family(&point) {
            Ok(family) => {
                let sine = linalg::max_principal_sine(&base, &family, tol);
                worst = worst.max(sine.asin());
                done += 1;
            }
            Err(_) => continue,
        }
    }
    if done < trials {
        return Err(Error::NonGeneric {
            what: "spanning plane samples".into(),
            retries: attempts,
        });
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::rng_stream;
    use crate::expr::Expr;
    use crate::variety::{random_curve, random_surface};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn c(re: f64) -> C {
        C::new(re, 0.0)
    }

    fn twisted_cubic() -> Variety {
        let t = Expr::param(0);
        Variety::from_polynomials(
            "twisted_cubic",
            1,
            3,
            vec![Expr::one(), t.clone(), Expr::pow(&t, 2), Expr::pow(&t, 3)],
        )
        .unwrap()
    }

    #[test]
    fn line_has_constant_pluecker_vector() {
        let line = Variety::from_polynomials(
            "line",
            1,
            2,
            vec![Expr::one(), Expr::param(0), Expr::zero()],
        )
        .unwrap();
        let p1 = pluecker_gauss(&line, &[c(0.3)], &tol()).unwrap();
        let p2 = pluecker_gauss(&line, &[c(-1.1)], &tol()).unwrap();
        assert!((p1 - p2).norm() < 1e-12);
    }

    #[test]
    fn twisted_cubic_pluecker_moves_with_t() {
        let v = twisted_cubic();
        let p1 = pluecker_gauss(&v, &[c(0.0)], &tol()).unwrap();
        let p2 = pluecker_gauss(&v, &[c(1.0)], &tol()).unwrap();
        assert!((p1 - p2).norm() > 1e-3);
    }

    #[test]
    fn cone_pluecker_constant_along_rulings() {
        let t = Expr::param(0);
        let conic = Variety::from_polynomials(
            "conic_p3",
            1,
            3,
            vec![Expr::one(), t.clone(), Expr::pow(&t, 2), Expr::zero()],
        )
        .unwrap();
        let vertex = nalgebra::DVector::from_column_slice(&[c(0.0), c(0.0), c(0.0), c(1.0)]);
        let cone = Variety::cone(&conic, std::slice::from_ref(&vertex)).unwrap();
        // Parameters (t, s): fix the conic point, vary the spanning coordinate.
        let p1 = pluecker_gauss(&cone, &[c(0.7), c(0.2)], &tol()).unwrap();
        let p2 = pluecker_gauss(&cone, &[c(0.7), c(-0.9)], &tol()).unwrap();
        assert!((p1 - p2).norm() < 1e-10);
    }

    #[test]
    fn linear_plane_has_rank_zero() {
        let v = Variety::from_polynomials(
            "plane_p4",
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
        .unwrap();
        let a = gauss_rank(&v, 5, 10, &tol()).unwrap();
        assert_eq!(a.r, 0);
        assert_eq!(a.f, 2);
    }

    #[test]
    fn tangential_of_twisted_cubic_has_unit_rank() {
        let tau = Variety::tangential_variety(&twisted_cubic()).unwrap();
        let a = gauss_rank(&tau, 7, 20, &tol()).unwrap();
        assert_eq!(a.r, 1);
        assert_eq!(a.f, 1);
    }

    #[test]
    fn generic_cubic_graph_hypersurface_is_nondegenerate() {
        let mut rng = rng_stream(42, 0);
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
                terms.push((vec![i, j, k], random_unit_complex(&mut rng)));
            }
        }
        coords.push(Expr::polynomial(&terms));
        let v = Variety::from_polynomials("cubic_graph", 3, 4, coords).unwrap();
        let a = gauss_rank(&v, 11, 12, &tol()).unwrap();
        assert_eq!(a.r, 3);
        assert_eq!(a.f, 0);
    }

    #[test]
    fn rank_is_stable_under_tolerance_perturbation() {
        let tau = Variety::tangential_variety(&twisted_cubic()).unwrap();
        for tr in [1e-6, 1e-7, 1e-8] {
            let mut t = tol();
            t.tol_rank = tr;
            let a = gauss_rank(&tau, 3, 10, &t).unwrap();
            assert_eq!((a.r, a.f), (1, 1), "tol_rank {tr}");
        }
    }

    #[test]
    fn join_of_conics_in_p5_has_unit_fiber() {
        let mut rng = rng_stream(9, 0);
        let c1 = random_curve("c1", 5, 2, &mut rng).unwrap();
        let c2 = random_curve("c2", 5, 2, &mut rng).unwrap();
        let join = Variety::join(&[c1, c2]).unwrap();
        let a = gauss_rank(&join, 13, 12, &tol()).unwrap();
        assert_eq!(a.n, 3);
        assert_eq!(a.f, 1);
    }

    #[test]
    fn terracini_tangent_space_constant_on_spanning_planes() {
        let mut rng = rng_stream(10, 0);
        let c1 = random_curve("c1", 5, 2, &mut rng).unwrap();
        let c2 = random_curve("c2", 5, 2, &mut rng).unwrap();
        let join = Variety::join(&[c1, c2]).unwrap();
        let u = join.sample_generic(&mut rng, &tol()).unwrap();
        let angle = terracini_check(&join, &u, 10, &mut rng, &tol()).unwrap();
        assert!(angle < 1e-7, "max angle {angle}");
    }

    #[test]
    fn varying_a_factor_parameter_moves_the_tangent_space() {
        let mut rng = rng_stream(11, 0);
        let c1 = random_curve("c1", 5, 2, &mut rng).unwrap();
        let c2 = random_curve("c2", 5, 2, &mut rng).unwrap();
        let join = Variety::join(&[c1, c2]).unwrap();
        let u = join.sample_generic(&mut rng, &tol()).unwrap();
        let (_, base) = join.lift_and_frame_matrix(&u).unwrap();
        let base_rows: Vec<_> = (0..base.nrows()).map(|r| base.row(r).transpose()).collect();
        let mut worst: f64 = 0.0;
        for _ in 0..5 {
            let mut point = u.clone();
            point[0] = random_unit_complex(&mut rng);
            let (_, m) = join.lift_and_frame_matrix(&point).unwrap();
            let rows: Vec<_> = (0..m.nrows()).map(|r| m.row(r).transpose()).collect();
            worst = worst.max(linalg::max_principal_sine(&base_rows, &rows, &tol()));
        }
        assert!(worst > 1e-2, "moving a factor point should move the tangent space");
    }

    #[test]
    fn terracini_rejects_non_joins() {
        let v = twisted_cubic();
        let mut rng = rng_stream(12, 0);
        assert!(matches!(
            terracini_check(&v, &[c(0.1)], 3, &mut rng, &tol()),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn pluecker_and_kernel_routes_agree_on_a_surface_join() {
        let mut rng = rng_stream(13, 0);
        let s = random_surface("s", 6, 2, &mut rng).unwrap();
        let cu = random_curve("c", 6, 3, &mut rng).unwrap();
        let join = Variety::join(&[s, cu]).unwrap();
        // gauss_rank errors out on any accepted-sample disagreement, so a
        // clean pass is the agreement assertion.
        let a = gauss_rank(&join, 17, 10, &tol()).unwrap();
        assert_eq!(a.n, 4);
        assert!(a.f >= 1);
    }
}
