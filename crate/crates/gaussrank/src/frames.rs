//! Pointwise differential geometry: tangent frames, the projective second
//! fundamental form, its joint kernel (the Gauss fiber directions), and
//! direction fields (conjugate, asymptotic, fiber).

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::config::{random_unit_complex, rng_stream, Tolerances};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jets::{Jet3, C, ZERO};
use crate::linalg;
use crate::variety::Variety;

/// Point lift, tangent basis d_i phi, and an orthonormal normal basis
/// completing {lift, tangent} to a basis of C^{N+1}. Order-2 jets of the
/// coordinates are kept so the second fundamental form can be read off
/// without re-evaluating.
pub struct TangentFrame {
    pub u: Vec<C>,
    pub lift: DVector<C>,
    pub tangent: Vec<DVector<C>>,
    pub normal: Vec<DVector<C>>,
    pub jets: Vec<Jet3>,
}

impl TangentFrame {
    pub fn n(&self) -> usize {
        self.tangent.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.lift.len()
    }
}

/// Tangent frame at u; errors signal a rank drop (non-generic sample).
pub fn tangent_frame(x: &Variety, u: &[C], tol: &Tolerances) -> Result<TangentFrame> {
    let jets = x.evaluate(u, 2)?;
    let dim = x.ambient() + 1;
    let n = x.n();
    let lift = DVector::from_iterator(dim, jets.iter().map(|j| j.value()));
    if lift.norm() < 1e-12 {
        return Err(Error::RankDrop {
            detail: "zero lift".into(),
        });
    }
    let tangent: Vec<DVector<C>> = (0..n)
        .map(|i| DVector::from_iterator(dim, jets.iter().map(|j| j.grad()[i])))
        .collect();
    let mut spanning = vec![lift.clone()];
    spanning.extend(tangent.iter().cloned());
    let mut m = DMatrix::zeros(n + 1, dim);
    for (r, v) in spanning.iter().enumerate() {
        for c in 0..dim {
            m[(r, c)] = v[c];
        }
    }
    let sv = linalg::singular_values(&m);
    let decision = linalg::rank_from_singular_values(&sv, tol);
    if decision.rank != n + 1 || sv[n] <= tol.gap_factor * tol.tol_rank * sv[0] {
        return Err(Error::RankDrop {
            detail: format!(
                "embedded tangent space rank {} of {} (smallest sv ratio {:.2e})",
                decision.rank,
                n + 1,
                sv[n] / sv[0].max(1e-300)
            ),
        });
    }
    let (normal, _) = linalg::orthogonal_complement(&spanning, dim, tol);
    Ok(TangentFrame {
        u: u.to_vec(),
        lift,
        tangent,
        normal,
        jets,
    })
}

/// The system of N-n quadrics on the tangent space: normal components of
/// the coordinate Hessians. Each matrix is exactly symmetric.
pub struct SecondFundamentalForm {
    pub quadrics: Vec<DMatrix<C>>,
    pub frame: TangentFrame,
}

impl SecondFundamentalForm {
    pub fn n(&self) -> usize {
        self.frame.n()
    }
}

pub fn second_fundamental_form(
    x: &Variety,
    u: &[C],
    tol: &Tolerances,
) -> Result<SecondFundamentalForm> {
    let frame = tangent_frame(x, u, tol)?;
    Ok(second_fundamental_form_of_frame(frame))
}

pub fn second_fundamental_form_of_frame(frame: TangentFrame) -> SecondFundamentalForm {
    let n = frame.n();
    let dim = frame.ambient_dim();
    let quadrics = frame
        .normal
        .iter()
        .map(|nu| {
            DMatrix::from_fn(n, n, |i, j| {
                let mut acc = ZERO;
                for c in 0..dim {
                    acc += nu[c].conj() * frame.jets[c].hess()[(i, j)];
                }
                acc
            })
        })
        .collect();
    SecondFundamentalForm { quadrics, frame }
}

/// Basis of the joint kernel {v : Q_mu v = 0 for all mu}; its dimension is
/// the Gauss fiber dimension f = n - r. May be empty (f = 0) or all of the
/// tangent space (linear varieties). Ambiguous singular-value gaps signal
/// a non-generic sample and ask the caller to resample.
pub fn gauss_fiber_space(
    ii: &SecondFundamentalForm,
    tol: &Tolerances,
) -> Result<Vec<DVector<C>>> {
    let n = ii.n();
    if ii.quadrics.is_empty() {
        return Ok((0..n)
            .map(|i| {
                let mut v = DVector::from_element(n, ZERO);
                v[i] = C::new(1.0, 0.0);
                v
            })
            .collect());
    }
    let mut stacked = DMatrix::zeros(ii.quadrics.len() * n, n);
    for (q, quad) in ii.quadrics.iter().enumerate() {
        stacked.view_mut((q * n, 0), (n, n)).copy_from(quad);
    }
    let (basis, decision) = linalg::nullspace(&stacked, tol);
    if decision.ambiguous {
        return Err(Error::AmbiguousSample {
            what: "second fundamental form kernel".into(),
        });
    }
    Ok(basis)
}

fn combine_quadrics(quadrics: &[DMatrix<C>], coeffs: &DVector<C>) -> DMatrix<C> {
    let n = quadrics[0].nrows();
    let mut out = DMatrix::zeros(n, n);
    for (q, quad) in quadrics.iter().enumerate() {
        out += quad * coeffs[q];
    }
    out
}

/// Simultaneous eigen-directions of the quadric pencil for fixed random
/// combinations: eigenvectors of Q0^{-1} Q1, accepted only when the
/// eigenvalues are separated and the directions are pairwise conjugate for
/// every quadric.
pub fn conjugate_directions_with(
    ii: &SecondFundamentalForm,
    alpha: &DVector<C>,
    beta: &DVector<C>,
    tol: &Tolerances,
) -> Result<Vec<DVector<C>>> {
    let n = ii.n();
    let q0 = combine_quadrics(&ii.quadrics, alpha);
    let sv = linalg::singular_values(&q0);
    if sv[n - 1] < 1e-6 * sv[0].max(1e-300) {
        return Err(Error::NondegenerateQuadricNotFound { tries: 1 });
    }
    let q1 = combine_quadrics(&ii.quadrics, beta);
    let a = q0
        .clone()
        .lu()
        .solve(&q1)
        .ok_or(Error::NondegenerateQuadricNotFound { tries: 1 })?;
    let pairs = linalg::eigenpairs(&a)?;
    let scale = pairs
        .iter()
        .map(|(l, _)| l.norm())
        .fold(1.0f64, f64::max);
    for i in 0..n {
        for j in (i + 1)..n {
            if (pairs[i].0 - pairs[j].0).norm() <= tol.cluster_tol * scale {
                return Err(Error::AmbiguousDirections);
            }
        }
    }
    let dirs: Vec<DVector<C>> = pairs.into_iter().map(|(_, v)| v).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            if conjugacy_check(ii, &dirs[i], &dirs[j]) > 1e-8 {
                return Err(Error::AmbiguousDirections);
            }
        }
    }
    Ok(dirs)
}

/// Conjugate directions with combinations drawn from the rng; retries a
/// few combinations before giving up on the pencil or the point.
pub fn conjugate_directions(
    ii: &SecondFundamentalForm,
    rng: &mut impl Rng,
    tol: &Tolerances,
) -> Result<Vec<DVector<C>>> {
    let (alpha, beta) = find_pencil_combos(ii, rng, tol)?;
    conjugate_directions_with(ii, &alpha, &beta, tol)
}

/// Search for a nondegenerate first combination (<= 10 tries), then a
/// second combination giving separated eigenvalues (<= 3 tries).
pub fn find_pencil_combos(
    ii: &SecondFundamentalForm,
    rng: &mut impl Rng,
    tol: &Tolerances,
) -> Result<(DVector<C>, DVector<C>)> {
    let k = ii.quadrics.len();
    if k < 2 {
        return Err(Error::AmbiguousDirections);
    }
    let n = ii.n();
    let mut alpha = None;
    for _ in 0..10 {
        let a = DVector::from_fn(k, |_, _| random_unit_complex(rng));
        let q0 = combine_quadrics(&ii.quadrics, &a);
        let sv = linalg::singular_values(&q0);
        if sv[n - 1] > 1e-6 * sv[0].max(1e-300) {
            alpha = Some(a);
            break;
        }
    }
    let alpha = alpha.ok_or(Error::NondegenerateQuadricNotFound { tries: 10 })?;
    let mut last = Error::AmbiguousDirections;
    for _ in 0..3 {
        let beta = DVector::from_fn(k, |_, _| random_unit_complex(rng));
        match conjugate_directions_with(ii, &alpha, &beta, tol) {
            Ok(_) => return Ok((alpha, beta)),
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// Roots of the homogeneous binary quadric a x^2 + b xy + c y^2, as
/// projective directions in C^2; a double root is reported once.
fn binary_quadric_roots(a: C, b: C, c: C, tol: &Tolerances) -> Vec<DVector<C>> {
    let scale = a.norm().max(b.norm()).max(c.norm());
    let tiny = 1e-12 * scale.max(1e-300);
    let dir = |x: C, y: C| {
        linalg::normalize_phase(&DVector::from_column_slice(&[x, y]))
    };
    if scale == 0.0 {
        return Vec::new();
    }
    if a.norm() > tiny {
        let disc = b * b - a * c * 4.0;
        let sq = disc.sqrt();
        let x1 = (-b + sq) / (a * 2.0);
        let x2 = (-b - sq) / (a * 2.0);
        if (x1 - x2).norm() < tol.cluster_tol * (1.0 + x1.norm().max(x2.norm())) {
            vec![dir(x1, C::new(1.0, 0.0))]
        } else {
            vec![dir(x1, C::new(1.0, 0.0)), dir(x2, C::new(1.0, 0.0))]
        }
    } else if b.norm() > tiny {
        vec![dir(C::new(1.0, 0.0), ZERO), dir(-c / b, C::new(1.0, 0.0))]
    } else {
        // c y^2 = 0: the direction y = 0, doubly.
        vec![dir(C::new(1.0, 0.0), ZERO)]
    }
}

/// Directions v with II(v, v) = 0 for every quadric. Only surfaces (n = 2)
/// are supported: the roots of one binary quadric, intersected with the
/// vanishing of the others.
pub fn asymptotic_directions(
    ii: &SecondFundamentalForm,
    tol: &Tolerances,
) -> Result<Vec<DVector<C>>> {
    let n = ii.n();
    if n != 2 {
        return Err(Error::UnsupportedDimension {
            detail: format!("asymptotic directions need a surface, got dimension {n}"),
        });
    }
    let lead = ii
        .quadrics
        .iter()
        .find(|q| q.iter().map(|z| z.norm()).fold(0.0f64, f64::max) > 1e-12)
        .ok_or_else(|| Error::NoAsymptoticDirection {
            detail: "all quadrics vanish".into(),
        })?;
    let roots = binary_quadric_roots(
        lead[(0, 0)],
        lead[(0, 1)] * 2.0,
        lead[(1, 1)],
        tol,
    );
    let survivors: Vec<DVector<C>> = roots
        .into_iter()
        .filter(|v| {
            ii.quadrics.iter().all(|q| {
                let val = (v.transpose() * q * v)[(0, 0)];
                let qn = q.iter().map(|z| z.norm().powi(2)).sum::<f64>().sqrt();
                val.norm() <= 1e-8 * qn.max(1e-300)
            })
        })
        .collect();
    if survivors.is_empty() {
        return Err(Error::NoAsymptoticDirection {
            detail: "binary quadrics have no common root".into(),
        });
    }
    Ok(survivors)
}

/// Scaled conjugacy residual max_mu |v^T Q_mu w| / (|v| |w| |Q_mu|).
pub fn conjugacy_check(ii: &SecondFundamentalForm, v: &DVector<C>, w: &DVector<C>) -> f64 {
    let nv = v.norm().max(1e-300);
    let nw = w.norm().max(1e-300);
    ii.quadrics
        .iter()
        .map(|q| {
            let val = (v.transpose() * q * w)[(0, 0)].norm();
            let qn = q
                .iter()
                .map(|z| z.norm().powi(2))
                .sum::<f64>()
                .sqrt()
                .max(1e-300);
            val / (nv * nw * qn)
        })
        .fold(0.0f64, f64::max)
}

/// A tangent direction field on a variety: either explicit coefficient
/// expressions, or a pointwise-resolved geometric field.
pub enum DirectionField {
    User(Vec<Expr>),
    Conjugate(usize),
    Asymptotic(usize),
    GaussFiber(usize),
}

enum ResolvedKind {
    Conjugate { index: usize },
    Asymptotic { index: usize },
    GaussFiber { index: usize },
}

/// Pointwise resolver for geometric direction fields. The random pencil
/// combinations and the reference direction are fixed at construction, so
/// the resolved field is deterministic and locally holomorphic: candidate
/// directions are matched to the reference branch and rescaled by the
/// bilinear pairing with it.
pub struct FieldResolver {
    base: Variety,
    kind: ResolvedKind,
    combos: Option<(DVector<C>, DVector<C>)>,
    ref_dir: DVector<C>,
    tol: Tolerances,
}

impl FieldResolver {
    pub fn new(
        base: &Variety,
        field: DirectionField,
        seed: u64,
        tol: &Tolerances,
    ) -> Result<Self> {
        let mut rng = rng_stream(seed, 0xf1e1d);
        let mut last: Error = Error::FieldUndefined {
            detail: "no generic sample".into(),
        };
        for _ in 0..=tol.retries {
            let u = match base.sample_generic(&mut rng, tol) {
                Ok(u) => u,
                Err(e) => {
                    last = e;
                    continue;
                }
            };
            let ii = match second_fundamental_form(base, &u, tol) {
                Ok(ii) => ii,
                Err(e) => {
                    last = e;
                    continue;
                }
            };
            let attempt: Result<(ResolvedKind, Option<_>, Vec<DVector<C>>)> = match &field {
                DirectionField::User(_) => unreachable!("user fields stay symbolic"),
                DirectionField::Conjugate(i) => find_pencil_combos(&ii, &mut rng, tol)
                    .and_then(|(a, b)| {
                        let dirs = conjugate_directions_with(&ii, &a, &b, tol)?;
                        Ok((ResolvedKind::Conjugate { index: *i }, Some((a, b)), dirs))
                    }),
                DirectionField::Asymptotic(i) => asymptotic_directions(&ii, tol)
                    .map(|dirs| (ResolvedKind::Asymptotic { index: *i }, None, dirs)),
                DirectionField::GaussFiber(i) => gauss_fiber_space(&ii, tol)
                    .map(|dirs| (ResolvedKind::GaussFiber { index: *i }, None, dirs)),
            };
            match attempt {
                Ok((kind, combos, dirs)) => {
                    let index = match &kind {
                        ResolvedKind::Conjugate { index }
                        | ResolvedKind::Asymptotic { index }
                        | ResolvedKind::GaussFiber { index } => *index,
                    };
                    if index >= dirs.len() {
                        return Err(Error::FieldUndefined {
                            detail: format!(
                                "field index {index} out of {} available directions",
                                dirs.len()
                            ),
                        });
                    }
                    return Ok(FieldResolver {
                        base: base.clone(),
                        kind,
                        combos,
                        ref_dir: linalg::normalize_phase(&dirs[index]),
                        tol: tol.clone(),
                    });
                }
                Err(e) => last = e,
            }
        }
        Err(Error::FieldUndefined {
            detail: format!("{last}"),
        })
    }

    /// Direction in tangent coordinates at u, on the reference branch,
    /// scaled so that the bilinear pairing with the reference direction is
    /// one (a holomorphic normalization).
    pub fn resolve(&self, u: &[C]) -> Result<DVector<C>> {
        let ii = second_fundamental_form(&self.base, u, &self.tol)?;
        let candidates: Vec<DVector<C>> = match &self.kind {
            ResolvedKind::Conjugate { .. } => {
                let (a, b) = self.combos.as_ref().expect("conjugate combos fixed");
                conjugate_directions_with(&ii, a, b, &self.tol)?
            }
            ResolvedKind::Asymptotic { .. } => asymptotic_directions(&ii, &self.tol)?,
            ResolvedKind::GaussFiber { .. } => gauss_fiber_space(&ii, &self.tol)?,
        };
        if candidates.is_empty() {
            return Err(Error::FieldUndefined {
                detail: "no candidate directions".into(),
            });
        }
        let score = |v: &DVector<C>| {
            let overlap: C = self.ref_dir.dotc(v);
            overlap.norm() / v.norm().max(1e-300)
        };
        let mut best = 0;
        for i in 1..candidates.len() {
            if score(&candidates[i]) > score(&candidates[best]) {
                best = i;
            }
        }
        if candidates.len() > 1 {
            let mut second = 0.0f64;
            for (i, v) in candidates.iter().enumerate() {
                if i != best {
                    second = second.max(score(v));
                }
            }
            if score(&candidates[best]) < 1.02 * second {
                return Err(Error::AmbiguousDirections);
            }
        }
        let v = &candidates[best];
        let pairing: C = self
            .ref_dir
            .iter()
            .zip(v.iter())
            .map(|(a, b)| a * b)
            .sum();
        if pairing.norm() < 1e-8 * v.norm() {
            return Err(Error::FieldUndefined {
                detail: "branch normalization degenerated".into(),
            });
        }
        Ok(v / pairing)
    }
}
