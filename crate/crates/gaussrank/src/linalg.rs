//! Dense complex linear algebra helpers: gap-rule numerical rank,
//! nullspaces, orthonormal complements, principal angles, small dense
//! eigenproblems, and polynomial fitting, root finding, and clustering.
//! Everything here works on matrices small enough (dimension <= ~per-join
//! parameter counts) that robustness beats asymptotics.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::config::{random_unit_complex, Tolerances};
use crate::error::{Error, Result};
use crate::jets::{C, ONE, ZERO};

/// Outcome of a gap-rule rank decision.
#[derive(Debug, Clone, Copy)]
pub struct RankDecision {
    pub rank: usize,
    pub ambiguous: bool,
    pub sigma_max: f64,
    /// Ratio between the smallest kept and largest dropped singular value
    /// (infinite when nothing is dropped).
    pub gap: f64,
}

/// Gap rule: rank = number of singular values above `tol_rank * sigma_max`,
/// ambiguous when the two sides of the cut are separated by less than
/// `gap_factor`. Values are assumed sorted in decreasing order.
pub fn rank_from_singular_values(sv: &[f64], tol: &Tolerances) -> RankDecision {
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    if sigma_max <= tol.zero_floor {
        return RankDecision {
            rank: 0,
            ambiguous: false,
            sigma_max,
            gap: f64::INFINITY,
        };
    }
    let cut = tol.tol_rank * sigma_max;
    let rank = sv.iter().take_while(|&&s| s > cut).count();
    let gap = if rank < sv.len() && sv[rank] > 0.0 {
        sv[rank - 1] / sv[rank]
    } else {
        f64::INFINITY
    };
    RankDecision {
        rank,
        ambiguous: gap < tol.gap_factor,
        sigma_max,
        gap,
    }
}

pub fn singular_values(m: &DMatrix<C>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    m.clone().singular_values().iter().copied().collect()
}

pub fn rank_of(m: &DMatrix<C>, tol: &Tolerances) -> RankDecision {
    rank_from_singular_values(&singular_values(m), tol)
}

/// Pad a (possibly wide) matrix with zero rows to a square one; zero rows
/// change neither the nonzero singular values nor the right singular
/// vectors, and square input makes the thin SVD a full one.
fn pad_square(m: &DMatrix<C>) -> DMatrix<C> {
    if m.nrows() >= m.ncols() {
        return m.clone();
    }
    let mut out = DMatrix::zeros(m.ncols(), m.ncols());
    out.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
    out
}

/// Orthonormal basis of {v : M v = 0}, together with the rank decision for
/// M itself. The basis is deterministic given M.
pub fn nullspace(m: &DMatrix<C>, tol: &Tolerances) -> (Vec<DVector<C>>, RankDecision) {
    let padded = pad_square(m);
    let svd = padded.svd(false, true);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.truncate(m.nrows().min(m.ncols()));
    let decision = rank_from_singular_values(&sv, tol);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let v = v_t.adjoint();
    let basis = (decision.rank..m.ncols())
        .map(|k| v.column(k).into_owned())
        .collect();
    (basis, decision)
}

/// Orthonormal basis of the Hermitian-orthogonal complement of the span of
/// the given vectors in C^dim.
pub fn orthogonal_complement(
    vectors: &[DVector<C>],
    dim: usize,
    tol: &Tolerances,
) -> (Vec<DVector<C>>, RankDecision) {
    let mut m = DMatrix::zeros(vectors.len(), dim);
    for (i, v) in vectors.iter().enumerate() {
        for j in 0..dim {
            m[(i, j)] = v[j].conj();
        }
    }
    nullspace(&m, tol)
}

/// Orthonormal basis of the span of the given vectors (columns).
pub fn orthonormal_basis(vectors: &[DVector<C>], tol: &Tolerances) -> Vec<DVector<C>> {
    if vectors.is_empty() {
        return Vec::new();
    }
    let dim = vectors[0].len();
    let mut m = DMatrix::zeros(dim, vectors.len());
    for (j, v) in vectors.iter().enumerate() {
        m.set_column(j, v);
    }
    let svd = m.clone().svd(true, false);
    let decision = rank_from_singular_values(
        &svd.singular_values.iter().copied().collect::<Vec<_>>(),
        tol,
    );
    let u = svd.u.expect("left singular vectors requested");
    (0..decision.rank).map(|k| u.column(k).into_owned()).collect()
}

/// Sines of the principal angles between the spans of two vector families.
/// Returns the largest sine (0 when the spans coincide).
pub fn max_principal_sine(a: &[DVector<C>], b: &[DVector<C>], tol: &Tolerances) -> f64 {
    let qa = orthonormal_basis(a, tol);
    let qb = orthonormal_basis(b, tol);
    if qa.is_empty() || qb.is_empty() {
        return if qa.len() == qb.len() { 0.0 } else { 1.0 };
    }
    let dim = qa[0].len();
    let mut pa = DMatrix::<C>::identity(dim, dim);
    for q in &qa {
        pa -= q * q.adjoint();
    }
    let mut mb = DMatrix::zeros(dim, qb.len());
    for (j, q) in qb.iter().enumerate() {
        mb.set_column(j, q);
    }
    let residual = pa * mb;
    let sv = singular_values(&residual);
    sv.first().copied().unwrap_or(0.0).min(1.0)
}

/// Chordal (sine of Fubini-Study angle) distance between two points of
/// projective space given by nonzero lifts.
pub fn projective_distance(a: &DVector<C>, b: &DVector<C>) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    let inner: C = a.dotc(b);
    let cos2 = (inner.norm() / (na * nb)).min(1.0);
    (1.0 - cos2 * cos2).max(0.0).sqrt()
}

/// Unit norm and a deterministic phase: the first coordinate whose modulus
/// exceeds a relative threshold is made real positive.
pub fn normalize_phase(v: &DVector<C>) -> DVector<C> {
    let norm = v.norm();
    if norm == 0.0 {
        return v.clone();
    }
    let scaled = v / C::new(norm, 0.0);
    let max_mod = scaled.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    let pivot = scaled
        .iter()
        .find(|z| z.norm() > 1e-10 * max_mod.max(1e-300))
        .copied()
        .unwrap_or(ONE);
    let phase = pivot / C::new(pivot.norm(), 0.0);
    scaled / phase
}

/// Complex eigenvalues of a small dense matrix, via the Schur form.
pub fn eigenvalues(m: &DMatrix<C>) -> Result<Vec<C>> {
    let schur = m
        .clone()
        .try_schur(1e-14, 10_000)
        .ok_or(Error::EigenConvergence)?;
    let t = schur.unpack().1;
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Eigenvector for a given (simple) eigenvalue: the right singular vector
/// of M - lambda I with the smallest singular value.
pub fn eigenvector_for(m: &DMatrix<C>, lambda: C) -> DVector<C> {
    let d = m.nrows();
    let shifted = m - DMatrix::<C>::identity(d, d) * lambda;
    let svd = shifted.svd(false, true);
    let v = svd.v_t.expect("right singular vectors requested").adjoint();
    normalize_phase(&v.column(d - 1).into_owned())
}

/// Eigenpairs with eigenvalues sorted deterministically by (re, im).
pub fn eigenpairs(m: &DMatrix<C>) -> Result<Vec<(C, DVector<C>)>> {
    let mut vals = eigenvalues(m)?;
    vals.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    Ok(vals
        .into_iter()
        .map(|l| (l, eigenvector_for(m, l)))
        .collect())
}

/// Least-squares fit of a degree-`degree` polynomial through the samples
/// (ts[i], vals[i]); returns coefficients (constant term first) and the
/// max relative residual at the nodes.
pub fn polyfit(ts: &[C], vals: &[C], degree: usize) -> (Vec<C>, f64) {
    let rows = ts.len();
    let cols = degree + 1;
    let mut vand = DMatrix::zeros(rows, cols);
    for (i, &t) in ts.iter().enumerate() {
        let mut p = ONE;
        for j in 0..cols {
            vand[(i, j)] = p;
            p *= t;
        }
    }
    let rhs = DVector::from_column_slice(vals);
    let svd = vand.clone().svd(true, true);
    let coeffs = svd
        .solve(&rhs, 1e-13)
        .unwrap_or_else(|_| DVector::zeros(cols));
    let fitted = vand * &coeffs;
    let scale = vals.iter().map(|v| v.norm()).fold(0.0f64, f64::max).max(1e-300);
    let residual = (&fitted - &rhs)
        .iter()
        .map(|z| z.norm())
        .fold(0.0f64, f64::max)
        / scale;
    (coeffs.iter().copied().collect(), residual)
}

/// Roots of a complex polynomial (coefficients constant-first) via the
/// companion matrix. Leading coefficients below `1e-10` relative to the
/// largest coefficient are trimmed first (roots escaping to infinity).
pub fn polynomial_roots(coeffs: &[C]) -> Result<Vec<C>> {
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    if scale == 0.0 {
        return Err(Error::ZeroPolynomial);
    }
    let mut cs: Vec<C> = coeffs.to_vec();
    while let Some(last) = cs.last() {
        if cs.len() > 1 && last.norm() < 1e-10 * scale {
            cs.pop();
        } else {
            break;
        }
    }
    let deg = cs.len() - 1;
    if deg == 0 {
        return Ok(Vec::new());
    }
    let lead = cs[deg];
    let mut companion = DMatrix::<C>::zeros(deg, deg);
    for i in 1..deg {
        companion[(i, i - 1)] = ONE;
    }
    for i in 0..deg {
        companion[(i, deg - 1)] = -cs[i] / lead;
    }
    eigenvalues(&companion)
}

/// Single-linkage clustering of roots with an absolute threshold; returns
/// (centroid, multiplicity) pairs sorted by (re, im) of the centroid.
pub fn cluster_roots(roots: &[C], threshold: f64) -> Vec<(C, usize)> {
    let k = roots.len();
    let mut parent: Vec<usize> = (0..k).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    for i in 0..k {
        for j in (i + 1)..k {
            if (roots[i] - roots[j]).norm() <= threshold {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut clusters: std::collections::BTreeMap<usize, Vec<C>> = std::collections::BTreeMap::new();
    for i in 0..k {
        let r = find(&mut parent, i);
        clusters.entry(r).or_default().push(roots[i]);
    }
    let mut out: Vec<(C, usize)> = clusters
        .values()
        .map(|members| {
            let sum: C = members.iter().sum();
            (sum / members.len() as f64, members.len())
        })
        .collect();
    out.sort_by(|a, b| {
        a.0.re
            .partial_cmp(&b.0.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.im.partial_cmp(&b.0.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    out
}

/// Random complex matrix with entries uniform in the unit box.
pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<C> {
    DMatrix::from_fn(rows, cols, |_, _| random_unit_complex(rng))
}

/// Random invertible square matrix (resampled until well conditioned).
pub fn random_invertible(rng: &mut impl Rng, dim: usize) -> DMatrix<C> {
    loop {
        let m = random_matrix(rng, dim, dim);
        let sv = singular_values(&m);
        if sv[dim - 1] > 1e-3 * sv[0] && sv[0] > 1e-6 {
            return m;
        }
    }
}

/// Determinant via LU.
pub fn determinant(m: &DMatrix<C>) -> C {
    m.clone().lu().determinant()
}

/// Chebyshev-style nodes on a disc of the given radius: extrema angles on
/// a circle, deterministic.
pub fn chebyshev_nodes(count: usize, radius: f64) -> Vec<C> {
    (0..count)
        .map(|k| {
            let theta = std::f64::consts::PI * (2.0 * k as f64 + 1.0) / (2.0 * count as f64);
            C::new(radius * theta.cos(), radius * theta.sin() * 0.37)
        })
        .collect()
}

/// Solve M x = b for small square systems.
pub fn solve(m: &DMatrix<C>, b: &DVector<C>) -> Option<DVector<C>> {
    m.clone().lu().solve(b)
}

/// Hermitian projection of `v` onto the span of an orthonormal basis.
pub fn project_onto(basis: &[DVector<C>], v: &DVector<C>) -> DVector<C> {
    let mut out = DVector::zeros(v.len());
    for q in basis {
        let c: C = q.dotc(v);
        out += q * c;
    }
    out
}

/// Component of `v` orthogonal to the span of an orthonormal basis,
/// relative to the norm of `v`.
pub fn residual_outside(basis: &[DVector<C>], v: &DVector<C>) -> f64 {
    let nv = v.norm();
    if nv == 0.0 {
        return 0.0;
    }
    (v - project_onto(basis, v)).norm() / nv
}

pub fn zero_vector(dim: usize) -> DVector<C> {
    DVector::from_element(dim, ZERO)
}
