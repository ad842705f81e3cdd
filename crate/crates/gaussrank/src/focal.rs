//! Fiber geometry for varieties whose Gauss map has one-dimensional
//! fibers: parametrize the fiber line through a sample point, locate the
//! focal points (where the desingularized parametrization stops being
//! immersive) with multiplicities, and measure the dimension each focal
//! component sweeps out as the fiber moves.
//!
//! The fiber line is worked in a randomized affine chart spanned by the
//! sample lift and the lifted kernel direction; a fixed random mixing
//! keeps all focal points at finite chart values (the natural chart based
//! at the sample point systematically pushes one focus of a join to
//! infinity). All alignment is bilinear, so every map differentiated here
//! is holomorphic in the parameters.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha12Rng;

use crate::config::{random_unit_complex, Tolerances};
use crate::error::{Error, Result};
use crate::frames::{gauss_fiber_space, second_fundamental_form};
use crate::jets::{C, ZERO};
use crate::linalg;
use crate::variety::Variety;

/// The Gauss fiber line through a sample point, in a randomized chart
/// t -> base + t * direction, with the transverse derivative data needed
/// for the focus determinant.
pub struct FiberLine {
    pub u0: Vec<C>,
    /// Chart base point lift c(0).
    pub base: DVector<C>,
    /// Chart direction lift d(0).
    pub direction: DVector<C>,
    /// Kernel direction in tangent coordinates (unit, fixed phase).
    pub kernel: DVector<C>,
    /// Transverse parameter directions (columns), complement of kernel.
    pub transverse: DMatrix<C>,
    /// d c / d s_a at the base fiber.
    pub c_derivs: Vec<DVector<C>>,
    /// d d / d s_a at the base fiber.
    pub d_derivs: Vec<DVector<C>>,
    chart: ChartContext,
}

impl FiberLine {
    /// Point of the fiber line at chart value t.
    pub fn point_at(&self, t: C) -> DVector<C> {
        &self.base + &self.direction * t
    }
}

/// Focal roots with multiplicities and swept dimensions for one fiber.
#[derive(Debug, Clone)]
pub struct FocusReport {
    pub roots: Vec<(C, usize)>,
    /// Sum of multiplicities (n - f on generic fibers).
    pub degree_check: usize,
    /// Estimated dimension swept by each focal component, aligned with
    /// `roots`.
    pub sweeps: Vec<usize>,
    pub fiber_count: usize,
}

/// Shared context for evaluating the ruled chart smoothly across nearby
/// fibers: the kernel alignment reference, the fixed chart mixing, and the
/// fixed transverse basis.
#[derive(Clone)]
pub(crate) struct ChartContext {
    x: Variety,
    u0: Vec<C>,
    v_ref: DVector<C>,
    coeffs: [C; 4],
    s_basis: DMatrix<C>,
    tol: Tolerances,
}

pub(crate) struct ChartData {
    pub c: DVector<C>,
    pub d: DVector<C>,
    pub c_derivs: Vec<DVector<C>>,
    pub d_derivs: Vec<DVector<C>>,
}

impl ChartContext {
    pub fn params_at(&self, s: &[C]) -> Vec<C> {
        let n = self.x.n();
        let mut u = self.u0.clone();
        for (a, &sa) in s.iter().enumerate() {
            for i in 0..n {
                u[i] += self.s_basis[(i, a)] * sa;
            }
        }
        u
    }

    /// Kernel direction at u on the reference branch: the unique kernel
    /// vector whose bilinear pairing with the reference is one.
    fn kernel_at(&self, u: &[C]) -> Result<DVector<C>> {
        let ii = second_fundamental_form(&self.x, u, &self.tol)?;
        let basis = gauss_fiber_space(&ii, &self.tol)?;
        if basis.len() != 1 {
            return Err(Error::UnsupportedFiberDimension { f: basis.len() });
        }
        let v = &basis[0];
        let pairing: C = self.v_ref.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        if pairing.norm() < 1e-8 {
            return Err(Error::AmbiguousSample {
                what: "fiber direction alignment".into(),
            });
        }
        Ok(v / pairing)
    }

    /// Chart rails c, d at u: fixed mixing of the lift and the aligned
    /// kernel lift.
    fn rails_at(&self, u: &[C]) -> Result<(DVector<C>, DVector<C>)> {
        let jets = self.x.evaluate(u, 1)?;
        let dim = self.x.ambient() + 1;
        let lift = DVector::from_iterator(dim, jets.iter().map(|j| j.value()));
        let v = self.kernel_at(u)?;
        let jac = DMatrix::from_fn(dim, self.x.n(), |c, i| jets[c].grad()[i]);
        let e = jac * v;
        let [a0, b0, a1, b1] = self.coeffs;
        Ok((&lift * a0 + &e * b0, &lift * a1 + &e * b1))
    }

    /// Rails plus their transverse derivatives, by Richardson-extrapolated
    /// central differences along the fixed transverse directions.
    pub fn rails_with_derivs(&self, u: &[C]) -> Result<ChartData> {
        let (c, d) = self.rails_at(u)?;
        let n = self.x.n();
        let k = self.s_basis.ncols();
        let h = self.tol.fd_step_numeric;
        let mut c_derivs = Vec::with_capacity(k);
        let mut d_derivs = Vec::with_capacity(k);
        for a in 0..k {
            let shift = |step: f64| -> Result<(DVector<C>, DVector<C>)> {
                let mut up = u.to_vec();
                for i in 0..n {
                    up[i] += self.s_basis[(i, a)] * C::new(step, 0.0);
                }
                self.rails_at(&up)
            };
            let central = |step: f64| -> Result<(DVector<C>, DVector<C>)> {
                let (cp, dp) = shift(step)?;
                let (cm, dm) = shift(-step)?;
                let inv = C::new(1.0 / (2.0 * step), 0.0);
                Ok(((cp - cm) * inv, (dp - dm) * inv))
            };
            let (dc1, dd1) = central(h)?;
            let (dc2, dd2) = central(2.0 * h)?;
            let third = C::new(1.0 / 3.0, 0.0);
            c_derivs.push((dc1 * C::new(4.0, 0.0) - dc2) * third);
            d_derivs.push((dd1 * C::new(4.0, 0.0) - dd2) * third);
        }
        Ok(ChartData {
            c,
            d,
            c_derivs,
            d_derivs,
        })
    }
}

/// Determinant detecting where the projectivized chart map fails to be
/// immersive at chart value t: the point row and all Jacobian rows,
/// compressed square by a fixed random projection. The point row
/// {c + t d} row-reduces against the d row to the constant c, keeping the
/// degree in t at most n-1.
fn chart_det(data: &ChartData, proj: &DMatrix<C>, t: C) -> C {
    let n = data.c_derivs.len() + 1;
    let dim = data.c.len();
    let mut rows = DMatrix::zeros(n + 1, dim);
    let cn = data.c.norm().max(1e-300);
    let dn = data.d.norm().max(1e-300);
    for c in 0..dim {
        rows[(0, c)] = data.c[c] / C::new(cn, 0.0);
        rows[(1, c)] = data.d[c] / C::new(dn, 0.0);
    }
    for a in 0..(n - 1) {
        let scale = data.c_derivs[a]
            .norm()
            .max(data.d_derivs[a].norm())
            .max(1e-300);
        for c in 0..dim {
            rows[(a + 2, c)] =
                (data.c_derivs[a][c] + t * data.d_derivs[a][c]) / C::new(scale, 0.0);
        }
    }
    linalg::determinant(&(rows * proj))
}

/// Parametrize the Gauss fiber through u0. Requires a measured fiber
/// dimension of exactly one at the point; verifies that the embedded
/// tangent space really is constant along the candidate line.
pub fn fiber_through(
    x: &Variety,
    u0: &[C],
    rng: &mut ChaCha12Rng,
    tol: &Tolerances,
) -> Result<FiberLine> {
    let n = x.n();
    let ii = second_fundamental_form(x, u0, tol)?;
    let basis = gauss_fiber_space(&ii, tol)?;
    if basis.len() != 1 {
        return Err(Error::UnsupportedFiberDimension { f: basis.len() });
    }
    let v0 = linalg::normalize_phase(&basis[0]);

    // Randomized, well-conditioned chart mixing of lift and kernel lift.
    let coeffs = loop {
        let a0 = random_unit_complex(rng);
        let b0 = random_unit_complex(rng);
        let a1 = random_unit_complex(rng);
        let b1 = random_unit_complex(rng);
        let det = a0 * b1 - a1 * b0;
        let scale = (a0.norm() + b0.norm()) * (a1.norm() + b1.norm());
        if det.norm() > 0.3 * scale.max(1e-3) {
            break [a0, b0, a1, b1];
        }
    };
    let (transverse_vecs, _) = linalg::orthogonal_complement(&[v0.clone()], n, tol);
    let mut s_basis = DMatrix::zeros(n, n - 1);
    for (a, col) in transverse_vecs.iter().enumerate() {
        s_basis.set_column(a, col);
    }

    let chart = ChartContext {
        x: x.clone(),
        u0: u0.to_vec(),
        v_ref: v0.clone(),
        coeffs,
        s_basis: s_basis.clone(),
        tol: tol.clone(),
    };
    let data = chart.rails_with_derivs(u0)?;

    // The embedded tangent space along the candidate line must match the
    // one at the base point.
    let span_at = |t: C| -> Vec<DVector<C>> {
        let mut fam = vec![data.c.clone() + data.d.clone() * t, data.d.clone()];
        for a in 0..(n - 1) {
            fam.push(data.c_derivs[a].clone() + data.d_derivs[a].clone() * t);
        }
        fam
    };
    let base_span = span_at(ZERO);
    for _ in 0..5 {
        let t = random_unit_complex(rng);
        let sine = linalg::max_principal_sine(&base_span, &span_at(t), tol);
        if sine > 1e-6 {
            return Err(Error::FiberVerification { angle: sine });
        }
    }

    Ok(FiberLine {
        u0: u0.to_vec(),
        base: data.c.clone(),
        direction: data.d.clone(),
        kernel: v0,
        transverse: s_basis,
        c_derivs: data.c_derivs,
        d_derivs: data.d_derivs,
        chart,
    })
}

fn det_polynomial(
    data: &ChartData,
    proj: &DMatrix<C>,
    degree: usize,
) -> Result<(Vec<C>, f64)> {
    let nodes = linalg::chebyshev_nodes(degree + 3, 1.0);
    let vals: Vec<C> = nodes.iter().map(|&t| chart_det(data, proj, t)).collect();
    let scale = vals.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
    if scale < 1e-10 {
        return Err(Error::ZeroPolynomial);
    }
    let (coeffs, residual) = linalg::polyfit(&nodes, &vals, degree);
    Ok((coeffs, residual))
}

/// The focus polynomial of a fiber: determinant of the compressed chart
/// Jacobian as a polynomial in the chart value t, degree at most n-1.
/// Retries the random compression when the fit residual is too large.
pub fn focus_polynomial(
    x: &Variety,
    fiber: &FiberLine,
    rng: &mut ChaCha12Rng,
    tol: &Tolerances,
) -> Result<Vec<C>> {
    let n = x.n();
    let dim = x.ambient() + 1;
    let data = ChartData {
        c: fiber.base.clone(),
        d: fiber.direction.clone(),
        c_derivs: fiber.c_derivs.clone(),
        d_derivs: fiber.d_derivs.clone(),
    };
    let mut worst = f64::INFINITY;
    for _ in 0..tol.retries {
        let proj = linalg::random_matrix(rng, dim, n + 1);
        let (coeffs, residual) = det_polynomial(&data, &proj, n - 1)?;
        if residual < 1e-6 {
            return Ok(coeffs);
        }
        worst = worst.min(residual);
    }
    Err(Error::FitResidual {
        residual: worst,
        tries: tol.retries,
    })
}

/// Companion-matrix roots clustered into multiplicities.
pub fn focus_roots(coeffs: &[C], cluster_tol: f64) -> Result<Vec<(C, usize)>> {
    let roots = linalg::polynomial_roots(coeffs)?;
    if roots.is_empty() {
        return Ok(Vec::new());
    }
    let scale = roots.iter().map(|r| r.norm()).fold(1.0f64, f64::max);
    Ok(linalg::cluster_roots(&roots, cluster_tol * scale))
}

/// Focal points and multiplicities at a shifted base fiber, matched to
/// the reference roots injectively by chart distance.
fn roots_at_shift(
    chart: &ChartContext,
    s: &[C],
    proj: &DMatrix<C>,
    reference: &[(C, usize)],
    tol: &Tolerances,
) -> Result<Vec<(C, DVector<C>)>> {
    let u = chart.params_at(s);
    let data = chart.rails_with_derivs(&u)?;
    let n = chart.x.n();
    let (coeffs, residual) = det_polynomial(&data, proj, n - 1)?;
    if residual > 1e-6 {
        return Err(Error::FitResidual {
            residual,
            tries: 1,
        });
    }
    let clusters = focus_roots(&coeffs, tol.cluster_tol)?;
    if clusters.len() != reference.len() {
        return Err(Error::TrackingAmbiguity);
    }
    let scale = reference
        .iter()
        .map(|(r, _)| r.norm())
        .fold(1.0f64, f64::max);
    let mut used = vec![false; clusters.len()];
    let mut out = Vec::with_capacity(reference.len());
    for (t_ref, m_ref) in reference {
        let mut best: Option<(usize, f64)> = None;
        for (i, (t, _)) in clusters.iter().enumerate() {
            if used[i] {
                continue;
            }
            let d = (t - t_ref).norm();
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        let (i, d) = best.ok_or(Error::TrackingAmbiguity)?;
        // Another unmatched cluster at comparable distance means the
        // assignment is not trustworthy.
        for (j, (t, _)) in clusters.iter().enumerate() {
            if j != i && !used[j] && ((t - t_ref).norm() - d).abs() < tol.cluster_tol * scale {
                return Err(Error::TrackingAmbiguity);
            }
        }
        if clusters[i].1 != *m_ref {
            return Err(Error::TrackingAmbiguity);
        }
        used[i] = true;
        let t = clusters[i].0;
        out.push((t, &data.c + &data.d * t));
    }
    Ok(out)
}

/// Dimension of the variety each focal component sweeps out as the fiber
/// varies: the gap-rule rank of the finite-difference Jacobian of the
/// focal-point map over the transverse parameters, with an absolute floor
/// separating fixed points (cone vertices) from moving ones.
pub fn sweep_dimensions(
    x: &Variety,
    fiber: &FiberLine,
    roots: &[(C, usize)],
    rng: &mut ChaCha12Rng,
    tol: &Tolerances,
) -> Result<Vec<usize>> {
    let n = x.n();
    let dim = x.ambient() + 1;
    let k = n - 1;
    let proj = linalg::random_matrix(rng, dim, n + 1);
    let delta = tol.track_step;

    // Columns of the per-root Jacobian, in an affine chart of projective
    // space anchored at the reference focal point.
    let centers: Vec<DVector<C>> = roots
        .iter()
        .map(|(t, _)| fiber.point_at(*t))
        .collect();
    let mut jacobians: Vec<DMatrix<C>> = (0..roots.len())
        .map(|_| DMatrix::from_element(dim - 1, k, ZERO))
        .collect();

    for a in 0..k {
        let mut s_plus = vec![ZERO; k];
        s_plus[a] = C::new(delta, 0.0);
        let mut s_minus = vec![ZERO; k];
        s_minus[a] = C::new(-delta, 0.0);
        let plus = roots_at_shift(&fiber.chart, &s_plus, &proj, roots, tol)?;
        let minus = roots_at_shift(&fiber.chart, &s_minus, &proj, roots, tol)?;
        for (ri, center) in centers.iter().enumerate() {
            let pivot = center
                .iter()
                .enumerate()
                .max_by(|x, y| {
                    x.1.norm()
                        .partial_cmp(&y.1.norm())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .expect("nonzero focal point")
                .0;
            let chart_of = |p: &DVector<C>| -> Result<DVector<C>> {
                if p[pivot].norm() < 1e-8 * p.norm() {
                    return Err(Error::TrackingAmbiguity);
                }
                let mut out = DVector::from_element(dim - 1, ZERO);
                let mut w = 0;
                for i in 0..dim {
                    if i != pivot {
                        out[w] = p[i] / p[pivot];
                        w += 1;
                    }
                }
                Ok(out)
            };
            let cp = chart_of(&plus[ri].1)?;
            let cm = chart_of(&minus[ri].1)?;
            let col = (cp - cm) / C::new(2.0 * delta, 0.0);
            jacobians[ri].set_column(a, &col);
        }
    }

    let mut sweeps = Vec::with_capacity(roots.len());
    for jac in &jacobians {
        let sv = linalg::singular_values(jac);
        let sigma_max = sv.first().copied().unwrap_or(0.0);
        if sigma_max <= tol.sweep_floor {
            sweeps.push(0);
            continue;
        }
        let cut = (tol.tol_rank * sigma_max).max(tol.sweep_floor);
        let rank = sv.iter().take_while(|&&s| s > cut).count();
        if rank < sv.len() && sv[rank] > 0.0 && sv[rank - 1] / sv[rank] < tol.gap_factor {
            return Err(Error::AmbiguousSample {
                what: "sweep rank gap".into(),
            });
        }
        sweeps.push(rank);
    }
    Ok(sweeps)
}

/// Full focal analysis of one generic fiber: sample a point, build the
/// fiber, fit the focus polynomial, cluster the roots, and measure the
/// swept dimensions. Non-generic draws are retried.
pub fn focus_report(
    x: &Variety,
    rng: &mut ChaCha12Rng,
    tol: &Tolerances,
) -> Result<FocusReport> {
    let mut last = Error::NonGeneric {
        what: format!("fiber analysis of '{}'", x.name),
        retries: tol.retries,
    };
    for _ in 0..=tol.retries {
        let u0 = match x.sample_generic(rng, tol) {
            Ok(u) => u,
            Err(e) => {
                last = e;
                continue;
            }
        };
        let fiber = match fiber_through(x, &u0, rng, tol) {
            Ok(f) => f,
            Err(e @ Error::UnsupportedFiberDimension { .. }) => return Err(e),
            Err(e) => {
                last = e;
                continue;
            }
        };
        let outcome = focus_polynomial(x, &fiber, rng, tol)
            .and_then(|coeffs| focus_roots(&coeffs, tol.cluster_tol))
            .and_then(|roots| {
                let sweeps = sweep_dimensions(x, &fiber, &roots, rng, tol)?;
                Ok((roots, sweeps))
            });
        match outcome {
            Ok((roots, sweeps)) => {
                let degree_check = roots.iter().map(|(_, m)| m).sum();
                return Ok(FocusReport {
                    roots,
                    degree_check,
                    sweeps,
                    fiber_count: 1,
                });
            }
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// Holomorphic map from transverse parameters to the tracked focal point
/// of one root; the backing closure for reconstructed focal varieties.
pub struct FocalTracker {
    chart: ChartContext,
    proj: DMatrix<C>,
    reference: Vec<(C, usize)>,
    root_index: usize,
    tol: Tolerances,
}

impl FocalTracker {
    pub fn new(
        x: &Variety,
        fiber: &FiberLine,
        roots: &[(C, usize)],
        root_index: usize,
        rng: &mut ChaCha12Rng,
    ) -> FocalTracker {
        let dim = x.ambient() + 1;
        FocalTracker {
            chart: fiber.chart.clone(),
            proj: linalg::random_matrix(rng, dim, x.n() + 1),
            reference: roots.to_vec(),
            root_index,
            tol: fiber.chart.tol.clone(),
        }
    }

    pub fn transverse_dim(&self) -> usize {
        self.chart.s_basis.ncols()
    }

    pub fn focal_point(&self, s: &[C]) -> Result<DVector<C>> {
        let matched = roots_at_shift(&self.chart, s, &self.proj, &self.reference, &self.tol)?;
        Ok(matched[self.root_index].1.clone())
    }

    /// The fiber line rails at transverse position s (for tangency checks).
    pub fn rails(&self, s: &[C]) -> Result<(DVector<C>, DVector<C>)> {
        let u = self.chart.params_at(s);
        self.chart.rails_at(&u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::rng_stream;
    use crate::expr::Expr;
    use crate::variety::random_curve;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn c(re: f64) -> C {
        C::new(re, 0.0)
    }

    fn cone_over_conic() -> Variety {
        let t = Expr::param(0);
        let conic = Variety::from_polynomials(
            "conic_p3",
            1,
            3,
            vec![Expr::one(), t.clone(), Expr::pow(&t, 2), Expr::zero()],
        )
        .unwrap();
        let vertex = DVector::from_column_slice(&[c(0.0), c(0.0), c(0.0), c(1.0)]);
        Variety::cone(&conic, std::slice::from_ref(&vertex)).unwrap()
    }

    fn twisted_cubic_tangential() -> Variety {
        let t = Expr::param(0);
        let cubic = Variety::from_polynomials(
            "twisted_cubic",
            1,
            3,
            vec![Expr::one(), t.clone(), Expr::pow(&t, 2), Expr::pow(&t, 3)],
        )
        .unwrap();
        Variety::tangential_variety(&cubic).unwrap()
    }

    #[test]
    fn veronese_has_no_fiber_line() {
        let s = Expr::param(0);
        let t = Expr::param(1);
        let v = Variety::from_polynomials(
            "veronese",
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
        .unwrap();
        let mut rng = rng_stream(1, 0);
        let u = v.sample_generic(&mut rng, &tol()).unwrap();
        assert!(matches!(
            fiber_through(&v, &u, &mut rng, &tol()),
            Err(Error::UnsupportedFiberDimension { f: 0 })
        ));
    }

    #[test]
    fn cone_fiber_is_the_ruling_with_vertex_focus() {
        let cone = cone_over_conic();
        let vertex = DVector::from_column_slice(&[c(0.0), c(0.0), c(0.0), c(1.0)]);
        let mut rng = rng_stream(2, 0);
        let u = cone.sample_generic(&mut rng, &tol()).unwrap();
        let fiber = fiber_through(&cone, &u, &mut rng, &tol()).unwrap();

        // The fiber line passes through the vertex: the chart rails span
        // the ruling, so the vertex lies in span{base, direction}.
        let basis = linalg::orthonormal_basis(
            &[fiber.base.clone(), fiber.direction.clone()],
            &tol(),
        );
        assert!(linalg::residual_outside(&basis, &vertex) < 1e-8);

        // Degree-1 focus polynomial with its single root at the vertex.
        let coeffs = focus_polynomial(&cone, &fiber, &mut rng, &tol()).unwrap();
        let roots = focus_roots(&coeffs, tol().cluster_tol).unwrap();
        assert_eq!(roots.len(), 1);
        assert_eq!(roots[0].1, 1);
        let z = fiber.point_at(roots[0].0);
        assert!(
            linalg::projective_distance(&z, &vertex) < 1e-6,
            "focus should sit at the cone vertex"
        );
    }

    #[test]
    fn cone_vertex_sweeps_dimension_zero() {
        let cone = cone_over_conic();
        let mut rng = rng_stream(3, 0);
        let report = focus_report(&cone, &mut rng, &tol()).unwrap();
        assert_eq!(report.degree_check, 1);
        assert_eq!(report.sweeps, vec![0]);
    }

    #[test]
    fn tangent_developable_focus_is_the_tangency_point() {
        let tau = twisted_cubic_tangential();
        let mut rng = rng_stream(4, 0);
        let u = tau.sample_generic(&mut rng, &tol()).unwrap();
        let fiber = fiber_through(&tau, &u, &mut rng, &tol()).unwrap();
        // The fiber is the tangent line at parameter u[0] of the curve.
        let t0 = u[0];
        let curve_point =
            DVector::from_column_slice(&[c(1.0), t0, t0 * t0, t0 * t0 * t0]);
        let tangent_dir = DVector::from_column_slice(&[
            c(0.0),
            c(1.0),
            t0 * 2.0,
            t0 * t0 * 3.0,
        ]);
        let line = linalg::orthonormal_basis(&[curve_point.clone(), tangent_dir], &tol());
        assert!(linalg::residual_outside(&line, &fiber.base) < 1e-8);
        assert!(linalg::residual_outside(&line, &fiber.direction) < 1e-8);

        let coeffs = focus_polynomial(&tau, &fiber, &mut rng, &tol()).unwrap();
        let roots = focus_roots(&coeffs, tol().cluster_tol).unwrap();
        assert_eq!(roots.iter().map(|(_, m)| m).sum::<usize>(), 1);
        let z = fiber.point_at(roots[0].0);
        assert!(linalg::projective_distance(&z, &curve_point) < 1e-6);
    }

    #[test]
    fn tangent_developable_focus_sweeps_the_curve() {
        let tau = twisted_cubic_tangential();
        let mut rng = rng_stream(5, 0);
        let report = focus_report(&tau, &mut rng, &tol()).unwrap();
        assert_eq!(report.degree_check, 1);
        assert_eq!(report.sweeps, vec![1]);
    }

    #[test]
    fn join_of_plane_curves_has_foci_at_the_anchor_points() {
        let mut rng = rng_stream(6, 0);
        let c1 = random_curve("c1", 4, 2, &mut rng).unwrap();
        let c2 = random_curve("c2", 4, 3, &mut rng).unwrap();
        let join = Variety::join(&[c1.clone(), c2.clone()]).unwrap();
        let u = join.sample_generic(&mut rng, &tol()).unwrap();
        let fiber = fiber_through(&join, &u, &mut rng, &tol()).unwrap();
        let coeffs = focus_polynomial(&join, &fiber, &mut rng, &tol()).unwrap();
        let roots = focus_roots(&coeffs, tol().cluster_tol).unwrap();
        assert_eq!(roots.len(), 2, "two simple foci");
        assert!(roots.iter().all(|(_, m)| *m == 1));

        let y1 = c1.values(&[u[0]]).unwrap();
        let y2 = c2.values(&[u[1]]).unwrap();
        for anchor in [y1, y2] {
            let best = roots
                .iter()
                .map(|(t, _)| linalg::projective_distance(&fiber.point_at(*t), &anchor))
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-6, "focus missing an anchor point: {best}");
        }
    }

    #[test]
    fn join_foci_sweep_curves() {
        let mut rng = rng_stream(7, 0);
        let c1 = random_curve("c1", 4, 2, &mut rng).unwrap();
        let c2 = random_curve("c2", 4, 3, &mut rng).unwrap();
        let join = Variety::join(&[c1, c2]).unwrap();
        let report = focus_report(&join, &mut rng, &tol()).unwrap();
        assert_eq!(report.degree_check, 2);
        assert_eq!(report.sweeps, vec![1, 1]);
    }

    #[test]
    fn plane_band_has_a_double_focus_on_the_curve() {
        let mut rng = rng_stream(8, 0);
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
        )
        .unwrap();
        let g: Vec<Expr> = (0..5)
            .map(|_| {
                Expr::add(
                    &Expr::constant(random_unit_complex(&mut rng)),
                    &Expr::scale(random_unit_complex(&mut rng), &t),
                )
            })
            .collect();
        let band = Variety::plane_band(&quartic, &g, &mut rng, &tol()).unwrap();
        let u = band.sample_generic(&mut rng, &tol()).unwrap();
        let fiber = fiber_through(&band, &u, &mut rng, &tol()).unwrap();
        let coeffs = focus_polynomial(&band, &fiber, &mut rng, &tol()).unwrap();
        let roots = focus_roots(&coeffs, tol().cluster_tol).unwrap();
        assert_eq!(roots.len(), 1, "single focal cluster");
        assert_eq!(roots[0].1, 2, "double root");
        let z = fiber.point_at(roots[0].0);
        let curve_point = quartic.values(&[u[0]]).unwrap();
        assert!(linalg::projective_distance(&z, &curve_point) < 1e-6);
    }

    #[test]
    fn focus_roots_hand_polynomials() {
        // t^2 - 1: two simple roots at +-1.
        let coeffs = [c(-1.0), c(0.0), c(1.0)];
        let roots = focus_roots(&coeffs, 1e-4).unwrap();
        assert_eq!(roots.len(), 2);
        assert!(roots.iter().all(|(_, m)| *m == 1));
        // (t - 2)^2.
        let coeffs = [c(4.0), c(-4.0), c(1.0)];
        let roots = focus_roots(&coeffs, 1e-4).unwrap();
        assert_eq!(roots.len(), 1);
        assert_eq!(roots[0].1, 2);
        assert!((roots[0].0 - c(2.0)).norm() < 1e-6);
    }

    #[test]
    fn zero_polynomial_is_reported() {
        assert!(matches!(
            focus_roots(&[ZERO, ZERO], 1e-4),
            Err(Error::ZeroPolynomial)
        ));
    }
}
