//! Parametrized projective varieties and their constructors.
//!
//! A [`Variety`] is a holomorphic map from a complex parameter domain into
//! the homogeneous coordinates of projective space, together with enough
//! provenance to run construction-specific checks downstream. Polynomial
//! leaves and most constructors stay exact expression DAGs; duals and
//! resolved direction fields only exist pointwise and are differentiated
//! by Richardson-extrapolated finite differences. Every map here is
//! holomorphic in its parameters, so complex jets and complex Jacobian
//! ranks are meaningful throughout.

mod load;

pub use load::load_spec;

use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::config::{random_point, random_unit_complex, rng_stream, Tolerances};
use crate::error::{Error, Result};
use crate::expr::{eval_jets, eval_values, Expr};
use crate::jets::{fd_jets, Jet3, C, ONE, ZERO};
use crate::linalg;

/// Evaluation backend for a parametrized variety: jets of the coordinate
/// functions at a parameter point, to a requested truncation order.
pub trait JetEval: Send + Sync {
    fn params(&self) -> usize;
    fn ambient(&self) -> usize;
    fn eval(&self, u: &[C], order: u8) -> Result<Vec<Jet3>>;
    fn values(&self, u: &[C]) -> Result<DVector<C>> {
        let jets = self.eval(u, 0)?;
        Ok(DVector::from_iterator(jets.len(), jets.iter().map(|j| j.value())))
    }
    /// True when derivatives are exact (expression DAGs and their exact
    /// compositions) rather than finite-difference approximations.
    fn exact(&self) -> bool;
    /// Coordinate expressions, when the variety is polynomial-backed.
    fn dag_coords(&self) -> Option<&[Expr]> {
        None
    }
}

/// How a variety was built; joins remember their parameter blocks so the
/// fiber-plane checks can vary the spanning coordinates alone.
#[derive(Debug, Clone)]
pub enum Provenance {
    Leaf,
    Join {
        factor_blocks: Vec<Range<usize>>,
        span_block: Range<usize>,
    },
    Tangential,
    Osculating,
    Hyperband,
    LineUnion,
    PlaneBand,
    Dual,
    Derived,
}

#[derive(Clone)]
pub struct Variety {
    pub name: String,
    n: usize,
    ambient: usize,
    eval: Arc<dyn JetEval>,
    provenance: Provenance,
}

impl std::fmt::Debug for Variety {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Variety")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("ambient", &self.ambient)
            .field("provenance", &self.provenance)
            .finish()
    }
}

struct DagEval {
    n: usize,
    ambient: usize,
    coords: Vec<Expr>,
}

impl JetEval for DagEval {
    fn params(&self) -> usize {
        self.n
    }
    fn ambient(&self) -> usize {
        self.ambient
    }
    fn eval(&self, u: &[C], order: u8) -> Result<Vec<Jet3>> {
        if u.len() != self.n {
            return Err(Error::ParamMismatch {
                left: u.len(),
                right: self.n,
            });
        }
        eval_jets(&self.coords, u, order)
    }
    fn values(&self, u: &[C]) -> Result<DVector<C>> {
        eval_values(&self.coords, u)
    }
    fn exact(&self) -> bool {
        true
    }
    fn dag_coords(&self) -> Option<&[Expr]> {
        Some(&self.coords)
    }
}

/// Generic join evaluation for factors that are not polynomial-backed:
/// psi(u_1,..,u_k,t) = phi_1(u_1) + sum_j t_j phi_j(u_j).
struct JoinEval {
    factors: Vec<Variety>,
    blocks: Vec<Range<usize>>,
    span_block: Range<usize>,
    ambient: usize,
    n: usize,
}

impl JetEval for JoinEval {
    fn params(&self) -> usize {
        self.n
    }
    fn ambient(&self) -> usize {
        self.ambient
    }
    fn eval(&self, u: &[C], order: u8) -> Result<Vec<Jet3>> {
        let dim = self.ambient + 1;
        let mut out: Vec<Jet3> = vec![Jet3::constant(ZERO, self.n, order); dim];
        for (j, factor) in self.factors.iter().enumerate() {
            let block = &self.blocks[j];
            let jets = factor.eval.eval(&u[block.clone()], order)?;
            let weight = if j == 0 {
                Jet3::constant(ONE, self.n, order)
            } else {
                let ti = self.span_block.start + (j - 1);
                Jet3::seed_variable(ti, u[ti], self.n, order)?
            };
            for c in 0..dim {
                let ext = jets[c].extend(self.n, block.start)?;
                out[c] = out[c].add(&ext.mul(&weight)?)?;
            }
        }
        Ok(out)
    }
    fn exact(&self) -> bool {
        self.factors.iter().all(|f| f.eval.exact())
    }
}

/// Exact affine reparametrization u = A w + b of any evaluation backend.
struct PrecomposeEval {
    inner: Arc<dyn JetEval>,
    a: DMatrix<C>,
    b: DVector<C>,
}

impl JetEval for PrecomposeEval {
    fn params(&self) -> usize {
        self.a.ncols()
    }
    fn ambient(&self) -> usize {
        self.inner.ambient()
    }
    fn eval(&self, w: &[C], order: u8) -> Result<Vec<Jet3>> {
        let wv = DVector::from_column_slice(w);
        let u = &self.a * wv + &self.b;
        let inner = self.inner.eval(u.as_slice(), order)?;
        inner.iter().map(|j| j.pullback_affine(&self.a)).collect()
    }
    fn exact(&self) -> bool {
        self.inner.exact()
    }
}

/// Exact linear change of homogeneous coordinates.
struct AmbientMapEval {
    inner: Arc<dyn JetEval>,
    m: DMatrix<C>,
}

impl JetEval for AmbientMapEval {
    fn params(&self) -> usize {
        self.inner.params()
    }
    fn ambient(&self) -> usize {
        self.inner.ambient()
    }
    fn eval(&self, u: &[C], order: u8) -> Result<Vec<Jet3>> {
        let inner = self.inner.eval(u, order)?;
        let dim = self.m.nrows();
        let mut out = Vec::with_capacity(dim);
        for r in 0..dim {
            let mut acc = Jet3::constant(ZERO, self.inner.params(), order);
            for (c, jet) in inner.iter().enumerate() {
                if self.m[(r, c)] != ZERO {
                    acc = acc.add(&jet.scale(self.m[(r, c)]))?;
                }
            }
            out.push(acc);
        }
        Ok(out)
    }
    fn exact(&self) -> bool {
        self.inner.exact()
    }
}

/// Black-box coordinate map differentiated by finite differences; used for
/// varieties that only exist pointwise (reconstructed focal surfaces).
pub struct NumericEval {
    pub n: usize,
    pub ambient: usize,
    pub step: f64,
    #[allow(clippy::type_complexity)]
    pub f: Arc<dyn Fn(&[C]) -> Result<DVector<C>> + Send + Sync>,
}

impl JetEval for NumericEval {
    fn params(&self) -> usize {
        self.n
    }
    fn ambient(&self) -> usize {
        self.ambient
    }
    fn eval(&self, u: &[C], order: u8) -> Result<Vec<Jet3>> {
        fd_jets(self.f.as_ref(), u, order, self.step)
    }
    fn values(&self, u: &[C]) -> Result<DVector<C>> {
        (self.f)(u)
    }
    fn exact(&self) -> bool {
        false
    }
}

/// Holomorphic frame spanning the nullspace of a full-row-rank matrix
/// family A(y): an oblique projection of a fixed reference frame,
/// h_j(y) = (I - E (A(y) E)^{-1} A(y)) r_j, with E chosen so A(y_ref) E = I.
/// Derivatives come from the exact identity d h = -E (A E)^{-1} (dA) h.
pub(crate) struct NullFrame {
    e: DMatrix<C>,
    reference: DMatrix<C>,
}

impl NullFrame {
    /// Build from the matrix at a reference point; fails when A is not
    /// confidently of full row rank there.
    fn new(a_ref: &DMatrix<C>, tol: &Tolerances) -> Result<NullFrame> {
        let rows = a_ref.nrows();
        let dim = a_ref.ncols();
        let (null, decision) = linalg::nullspace(a_ref, tol);
        if decision.rank != rows || decision.ambiguous || null.len() != dim - rows {
            return Err(Error::RankDrop {
                detail: format!(
                    "annihilator reference rank {} of {}",
                    decision.rank, rows
                ),
            });
        }
        let aa = a_ref * a_ref.adjoint();
        let aa_inv = aa.try_inverse().ok_or_else(|| Error::RankDrop {
            detail: "annihilator complement inversion failed".into(),
        })?;
        let e = a_ref.adjoint() * aa_inv;
        let mut reference = DMatrix::zeros(dim, dim - rows);
        for (j, v) in null.iter().enumerate() {
            reference.set_column(j, v);
        }
        Ok(NullFrame { e, reference })
    }

    fn width(&self) -> usize {
        self.reference.ncols()
    }

    /// Projected frame at A(y): columns spanning ker A(y).
    fn project(&self, a: &DMatrix<C>) -> Result<DMatrix<C>> {
        let ae = a * &self.e;
        let ae_inv = ae.try_inverse().ok_or_else(|| Error::RankDrop {
            detail: "annihilator complement degenerated".into(),
        })?;
        let correction = &self.e * ae_inv * a;
        Ok(&self.reference - correction * &self.reference)
    }

    /// Frame together with its exact first derivatives, given A and its
    /// derivatives d_a A.
    fn project_with_derivs(
        &self,
        a: &DMatrix<C>,
        da: &[DMatrix<C>],
    ) -> Result<(DMatrix<C>, Vec<DMatrix<C>>)> {
        let ae = a * &self.e;
        let ae_inv = ae.try_inverse().ok_or_else(|| Error::RankDrop {
            detail: "annihilator complement degenerated".into(),
        })?;
        let k_op = &self.e * ae_inv;
        let h = &self.reference - &k_op * (a * &self.reference);
        let dh = da
            .iter()
            .map(|dai| -(&k_op * (dai * &h)))
            .collect();
        Ok((h, dh))
    }
}

/// Union of tangent lines along a pointwise-resolved direction field:
/// psi(u, t) = phi(u) + t * sum_i v^i(u) d_i phi(u). The base jets and the
/// dependence on t are exact; only the field coefficients v(u) are
/// finite-differenced.
struct LineUnionEval {
    base: Variety,
    derivs: Vec<Vec<Expr>>, // derivs[i][c] = d_i phi_c, when the base is a DAG
    resolver: crate::frames::FieldResolver,
    step: f64,
}

impl JetEval for LineUnionEval {
    fn params(&self) -> usize {
        self.base.n() + 1
    }
    fn ambient(&self) -> usize {
        self.base.ambient()
    }
    fn eval(&self, u: &[C], order: u8) -> Result<Vec<Jet3>> {
        let m = self.base.n();
        let n = m + 1;
        let dim = self.base.ambient() + 1;
        let base_u = &u[..m];
        let t = Jet3::seed_variable(m, u[m], n, order)?;

        let phi = self.base.eval.eval(base_u, order)?;
        // Jets of the field coefficients, then of the lifted direction.
        let resolver = &self.resolver;
        let vf = |p: &[C]| resolver.resolve(p);
        let vjets = fd_jets(&vf, base_u, order, self.step)?;

        let mut out = Vec::with_capacity(dim);
        for c in 0..dim {
            let mut dir = Jet3::constant(ZERO, m, order);
            for i in 0..m {
                let dphi = self.derivs[i][c].clone();
                let djet = eval_jets(std::slice::from_ref(&dphi), base_u, order)?
                    .pop()
                    .expect("single expression");
                dir = dir.add(&vjets[i].mul(&djet)?)?;
            }
            let psi = phi[c]
                .extend(n, 0)?
                .add(&dir.extend(n, 0)?.mul(&t)?)?;
            out.push(psi);
        }
        Ok(out)
    }
    fn exact(&self) -> bool {
        false
    }
}

/// Dual variety: hyperplanes containing the embedded tangent space. The
/// annihilator basis h_j(y) is an oblique projection of a fixed reference
/// frame, holomorphic in y, and the spanning parameters enter exactly:
/// psi(y, s) = h_1(y) + sum_j s^j h_{j+1}(y).
struct DualEval {
    base: Variety,
    annihilator: NullFrame,
    step: f64,
}

impl DualEval {
    fn tangent_stack(&self, y: &[C]) -> Result<DMatrix<C>> {
        let jets = self.base.eval.eval(y, 1)?;
        let dim = self.base.ambient() + 1;
        let m = self.base.n();
        let mut a = DMatrix::zeros(m + 1, dim);
        for c in 0..dim {
            a[(0, c)] = jets[c].value();
            for i in 0..m {
                a[(i + 1, c)] = jets[c].grad()[i];
            }
        }
        Ok(a)
    }

    /// All annihilator vectors at y, flattened column-major.
    fn h_flat(&self, y: &[C]) -> Result<DVector<C>> {
        let a = self.tangent_stack(y)?;
        let h = self.annihilator.project(&a)?;
        let dim = h.nrows();
        let k = h.ncols();
        let mut out = DVector::zeros(k * dim);
        for j in 0..k {
            for c in 0..dim {
                out[j * dim + c] = h[(c, j)];
            }
        }
        Ok(out)
    }
}

impl JetEval for DualEval {
    fn params(&self) -> usize {
        self.base.n() + (self.annihilator.width() - 1)
    }
    fn ambient(&self) -> usize {
        self.base.ambient()
    }
    fn eval(&self, u: &[C], order: u8) -> Result<Vec<Jet3>> {
        let m = self.base.n();
        let k = self.annihilator.width();
        let n = self.params();
        let dim = self.base.ambient() + 1;
        let y = &u[..m];
        let hj = {
            let f = |p: &[C]| self.h_flat(p);
            fd_jets(&f, y, order, self.step)?
        };
        let mut out = Vec::with_capacity(dim);
        for c in 0..dim {
            let mut psi = hj[c].extend(n, 0)?;
            for j in 1..k {
                let s = Jet3::seed_variable(m + j - 1, u[m + j - 1], n, order)?;
                psi = psi.add(&hj[j * dim + c].extend(n, 0)?.mul(&s)?)?;
            }
            out.push(psi);
        }
        Ok(out)
    }
    fn exact(&self) -> bool {
        false
    }
}

/// Hyperband over Y: the envelope of a family of tangent hyperplanes
/// L_y = span{phi, d phi, g_1..g_k} with k = N - m - 1. The envelope is the
/// union of the characteristic subspaces, cut out by the hyperplane
/// covector h(y) together with its first derivatives, so the variety has
/// N-1 parameters and a degenerate Gauss map with fibers of dimension at
/// least N - m - 1.
struct HyperbandEval {
    base: Variety,
    frame: Vec<Vec<Expr>>,
    frame_derivs: Vec<Vec<Vec<Expr>>>, // [j][a][c] = d_a g_j[c]
    hyperplane: NullFrame,
    characteristic: NullFrame,
    step: f64,
}

impl HyperbandEval {
    /// Spanning matrix of L_y and its parameter derivatives, from exact
    /// order-2 jets of the base and symbolic derivatives of the frame.
    fn plane_stack(&self, y: &[C]) -> Result<(DMatrix<C>, Vec<DMatrix<C>>)> {
        let m = self.base.n();
        let k = self.frame.len();
        let dim = self.base.ambient() + 1;
        let jets = self.base.eval.eval(y, 2)?;
        let mut a = DMatrix::zeros(1 + m + k, dim);
        let mut da: Vec<DMatrix<C>> = (0..m).map(|_| DMatrix::zeros(1 + m + k, dim)).collect();
        for c in 0..dim {
            a[(0, c)] = jets[c].value();
            for i in 0..m {
                a[(1 + i, c)] = jets[c].grad()[i];
            }
            for (aa, dai) in da.iter_mut().enumerate() {
                dai[(0, c)] = jets[c].grad()[aa];
                for i in 0..m {
                    dai[(1 + i, c)] = jets[c].hess()[(aa, i)];
                }
            }
        }
        for (j, g) in self.frame.iter().enumerate() {
            let vals = eval_values(g, y)?;
            for c in 0..dim {
                a[(1 + m + j, c)] = vals[c];
            }
            for (aa, dai) in da.iter_mut().enumerate() {
                let dvals = eval_values(&self.frame_derivs[j][aa], y)?;
                for c in 0..dim {
                    dai[(1 + m + j, c)] = dvals[c];
                }
            }
        }
        Ok((a, da))
    }

    /// Characteristic system at y: the hyperplane covector stacked with
    /// its first derivatives.
    fn characteristic_stack(&self, y: &[C]) -> Result<DMatrix<C>> {
        let m = self.base.n();
        let dim = self.base.ambient() + 1;
        let (a, da) = self.plane_stack(y)?;
        let (h, dh) = self.hyperplane.project_with_derivs(&a, &da)?;
        let mut out = DMatrix::zeros(m + 1, dim);
        for c in 0..dim {
            out[(0, c)] = h[(c, 0)];
            for (aa, dha) in dh.iter().enumerate() {
                out[(1 + aa, c)] = dha[(c, 0)];
            }
        }
        Ok(out)
    }

    /// Basis of the characteristic subspace at y, flattened column-major.
    fn char_flat(&self, y: &[C]) -> Result<DVector<C>> {
        let stack = self.characteristic_stack(y)?;
        let b = self.characteristic.project(&stack)?;
        let dim = b.nrows();
        let k = b.ncols();
        let mut out = DVector::zeros(k * dim);
        for j in 0..k {
            for c in 0..dim {
                out[j * dim + c] = b[(c, j)];
            }
        }
        Ok(out)
    }
}

impl JetEval for HyperbandEval {
    fn params(&self) -> usize {
        self.base.n() + (self.characteristic.width() - 1)
    }
    fn ambient(&self) -> usize {
        self.base.ambient()
    }
    fn eval(&self, u: &[C], order: u8) -> Result<Vec<Jet3>> {
        let m = self.base.n();
        let k = self.characteristic.width();
        let n = self.params();
        let dim = self.base.ambient() + 1;
        let y = &u[..m];
        let bj = {
            let f = |p: &[C]| self.char_flat(p);
            fd_jets(&f, y, order, self.step)?
        };
        let mut out = Vec::with_capacity(dim);
        for c in 0..dim {
            let mut psi = bj[c].extend(n, 0)?;
            for j in 1..k {
                let s = Jet3::seed_variable(m + j - 1, u[m + j - 1], n, order)?;
                psi = psi.add(&bj[j * dim + c].extend(n, 0)?.mul(&s)?)?;
            }
            out.push(psi);
        }
        Ok(out)
    }
    fn exact(&self) -> bool {
        false
    }
}

impl Variety {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Ambient projective dimension N.
    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn is_exact(&self) -> bool {
        self.eval.exact()
    }

    pub fn dag_coords(&self) -> Option<&[Expr]> {
        self.eval.dag_coords()
    }

    /// Polynomial-backed variety with an explicit parameter count.
    pub fn from_polynomials(
        name: impl Into<String>,
        n: usize,
        ambient: usize,
        coords: Vec<Expr>,
    ) -> Result<Self> {
        if coords.len() != ambient + 1 {
            return Err(Error::DimensionMismatch {
                what: "coordinate count".into(),
                expected: ambient + 1,
                got: coords.len(),
            });
        }
        for c in &coords {
            if let Some(p) = c.max_param() {
                if p >= n {
                    return Err(Error::IndexOutOfRange { index: p, n });
                }
            }
        }
        Ok(Variety {
            name: name.into(),
            n,
            ambient,
            eval: Arc::new(DagEval { n, ambient, coords }),
            provenance: Provenance::Leaf,
        })
    }

    /// Zero-parameter variety: a single point given by its lift.
    pub fn from_point(name: impl Into<String>, lift: &DVector<C>) -> Result<Self> {
        let coords = lift.iter().map(|&c| Expr::constant(c)).collect();
        Variety::from_polynomials(name, 0, lift.len() - 1, coords)
    }

    /// Linear space through the given points, parametrized affinely from
    /// the first point.
    pub fn linear_span(name: impl Into<String>, points: &[DVector<C>]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Input("linear span needs at least one point".into()));
        }
        let dim = points[0].len();
        let coords: Vec<Expr> = (0..dim)
            .map(|c| {
                let mut e = Expr::constant(points[0][c]);
                for (i, p) in points.iter().enumerate().skip(1) {
                    e = Expr::add(&e, &Expr::scale(p[c], &Expr::param(i - 1)));
                }
                e
            })
            .collect();
        Variety::from_polynomials(name, points.len() - 1, dim - 1, coords)
    }

    pub fn evaluate(&self, u: &[C], order: u8) -> Result<Vec<Jet3>> {
        if order > 3 {
            return Err(Error::UnsupportedOrder { order });
        }
        if u.len() != self.n {
            return Err(Error::ParamMismatch {
                left: u.len(),
                right: self.n,
            });
        }
        self.eval.eval(u, order)
    }

    pub fn values(&self, u: &[C]) -> Result<DVector<C>> {
        self.eval.values(u)
    }

    /// (N+1) x n Jacobian of the lift at u.
    pub fn jacobian(&self, u: &[C]) -> Result<DMatrix<C>> {
        let jets = self.evaluate(u, 1)?;
        let dim = self.ambient + 1;
        Ok(DMatrix::from_fn(dim, self.n, |c, i| jets[c].grad()[i]))
    }

    /// Lift together with the stacked (n+1) x (N+1) matrix [phi; d phi].
    pub fn lift_and_frame_matrix(&self, u: &[C]) -> Result<(DVector<C>, DMatrix<C>)> {
        let jets = self.evaluate(u, 1)?;
        let dim = self.ambient + 1;
        let lift = DVector::from_iterator(dim, jets.iter().map(|j| j.value()));
        let mut m = DMatrix::zeros(self.n + 1, dim);
        for c in 0..dim {
            m[(0, c)] = jets[c].value();
            for i in 0..self.n {
                m[(i + 1, c)] = jets[c].grad()[i];
            }
        }
        Ok((lift, m))
    }

    /// Random parameter point where the lift is nonzero and the Jacobian
    /// has confident full rank n; resamples degenerate draws.
    pub fn sample_generic(&self, rng: &mut impl Rng, tol: &Tolerances) -> Result<Vec<C>> {
        for _ in 0..=tol.retries {
            let u = random_point(rng, self.n);
            let jets = match self.evaluate(&u, 1) {
                Ok(j) => j,
                Err(_) => continue,
            };
            let dim = self.ambient + 1;
            let value = DVector::from_iterator(dim, jets.iter().map(|j| j.value()));
            if value.norm() < 1e-10 {
                continue;
            }
            if self.n == 0 {
                return Ok(u);
            }
            let jac = DMatrix::from_fn(dim, self.n, |c, i| jets[c].grad()[i]);
            let sv = linalg::singular_values(&jac);
            let decision = linalg::rank_from_singular_values(&sv, tol);
            let confident = decision.rank == self.n
                && sv[self.n - 1] > tol.gap_factor * tol.tol_rank * sv[0];
            if confident {
                return Ok(u);
            }
        }
        Err(Error::NonGeneric {
            what: format!("variety '{}'", self.name),
            retries: tol.retries,
        })
    }

    /// Projective dimension actually attained by the parametrization:
    /// rank of [phi; d phi] minus one, majority-voted over samples. Unlike
    /// `sample_generic` this does not require the map to be immersive.
    pub fn effective_dimension(&self, rng: &mut impl Rng, tol: &Tolerances) -> Result<usize> {
        let mut votes: Vec<usize> = Vec::new();
        let mut attempts = 0;
        while votes.len() < 5 && attempts < 5 * (tol.retries + 1) {
            attempts += 1;
            let u = random_point(rng, self.n);
            let Ok((lift, m)) = self.lift_and_frame_matrix(&u) else {
                continue;
            };
            if lift.norm() < 1e-10 {
                continue;
            }
            let decision = linalg::rank_of(&m, tol);
            if decision.ambiguous || decision.rank == 0 {
                continue;
            }
            votes.push(decision.rank - 1);
        }
        if votes.is_empty() {
            return Err(Error::AllSamplesAmbiguous {
                ambiguous: attempts,
                attempts,
            });
        }
        votes.sort_unstable();
        Ok(votes[votes.len() / 2])
    }

    /// Join of k >= 2 varieties in the same ambient space.
    pub fn join(factors: &[Variety]) -> Result<Variety> {
        if factors.len() < 2 {
            return Err(Error::Input("join needs at least two factors".into()));
        }
        let ambient = factors[0].ambient;
        for f in factors {
            if f.ambient != ambient {
                return Err(Error::AmbientMismatch {
                    left: ambient,
                    right: f.ambient,
                });
            }
        }
        let k = factors.len();
        let mut blocks = Vec::with_capacity(k);
        let mut offset = 0;
        for f in factors {
            blocks.push(offset..offset + f.n);
            offset += f.n;
        }
        let span_block = offset..offset + (k - 1);
        let n = offset + (k - 1);
        let name = format!(
            "join({})",
            factors.iter().map(|f| f.name.as_str()).collect::<Vec<_>>().join(", ")
        );
        let provenance = Provenance::Join {
            factor_blocks: blocks.clone(),
            span_block: span_block.clone(),
        };

        // Polynomial factors compose symbolically; anything else goes
        // through the generic jet-level combination.
        let all_dag: Option<Vec<Vec<Expr>>> = factors
            .iter()
            .map(|f| f.dag_coords().map(|c| c.to_vec()))
            .collect();
        let eval: Arc<dyn JetEval> = if let Some(dag_coords) = all_dag {
            let dim = ambient + 1;
            let mut coords = Vec::with_capacity(dim);
            for c in 0..dim {
                let mut acc = dag_coords[0][c].shift_params(blocks[0].start, factors[0].n)?;
                for j in 1..k {
                    let shifted = dag_coords[j][c].shift_params(blocks[j].start, factors[j].n)?;
                    let t = Expr::param(span_block.start + (j - 1));
                    acc = Expr::add(&acc, &Expr::mul(&t, &shifted));
                }
                coords.push(acc);
            }
            Arc::new(DagEval { n, ambient, coords })
        } else {
            Arc::new(JoinEval {
                factors: factors.to_vec(),
                blocks,
                span_block: span_block.clone(),
                ambient,
                n,
            })
        };
        Ok(Variety {
            name,
            n,
            ambient,
            eval,
            provenance,
        })
    }

    /// Cone over Y with a linear vertex given by spanning points.
    pub fn cone(y: &Variety, vertex_points: &[DVector<C>]) -> Result<Variety> {
        let vertex = Variety::linear_span("vertex", vertex_points)?;
        let mut out = Variety::join(&[y.clone(), vertex])?;
        out.name = format!("cone({})", y.name);
        Ok(out)
    }

    /// Union of secant (k-1)-planes: the join of k independent copies.
    pub fn secant_variety(y: &Variety, k: usize) -> Result<Variety> {
        if k < 2 {
            return Err(Error::Input("secant variety needs k >= 2".into()));
        }
        let copies: Vec<Variety> = (0..k).map(|_| y.clone()).collect();
        let mut out = Variety::join(&copies)?;
        out.name = format!("secant_{}({})", k, y.name);
        Ok(out)
    }

    /// Union of embedded tangent lines: psi(u, v) = phi + sum v^i d_i phi.
    pub fn tangential_variety(y: &Variety) -> Result<Variety> {
        let coords = y
            .dag_coords()
            .ok_or_else(|| Error::Input("tangential variety needs a polynomial-backed base".into()))?;
        let m = y.n;
        let n = 2 * m;
        let dim = y.ambient + 1;
        let mut out = Vec::with_capacity(dim);
        for c in 0..dim {
            let mut e = coords[c].shift_params(0, m)?;
            for i in 0..m {
                let d = coords[c].diff(i).shift_params(0, m)?;
                e = Expr::add(&e, &Expr::mul(&Expr::param(m + i), &d));
            }
            out.push(e);
        }
        Ok(Variety {
            name: format!("tangential({})", y.name),
            n,
            ambient: y.ambient,
            eval: Arc::new(DagEval {
                n,
                ambient: y.ambient,
                coords: out,
            }),
            provenance: Provenance::Tangential,
        })
    }

    /// Order-2 osculating variety:
    /// psi = phi + sum v^i d_i phi + sum_{i<=j} w^{ij} d_i d_j phi.
    pub fn osculating_variety(y: &Variety, order: u32) -> Result<Variety> {
        if order != 2 {
            return Err(Error::UnsupportedDimension {
                detail: format!("osculating order {order} (only 2 supported)"),
            });
        }
        let coords = y
            .dag_coords()
            .ok_or_else(|| Error::Input("osculating variety needs a polynomial-backed base".into()))?;
        let m = y.n;
        let pair_count = m * (m + 1) / 2;
        let n = 2 * m + pair_count;
        let dim = y.ambient + 1;
        let mut out = Vec::with_capacity(dim);
        for c in 0..dim {
            let mut e = coords[c].clone();
            for i in 0..m {
                e = Expr::add(
                    &e,
                    &Expr::mul(&Expr::param(m + i), &coords[c].diff(i)),
                );
            }
            let mut w = 2 * m;
            for i in 0..m {
                for j in i..m {
                    let dd = coords[c].diff(i).diff(j);
                    e = Expr::add(&e, &Expr::mul(&Expr::param(w), &dd));
                    w += 1;
                }
            }
            out.push(e);
        }
        Ok(Variety {
            name: format!("osculating2({})", y.name),
            n,
            ambient: y.ambient,
            eval: Arc::new(DagEval {
                n,
                ambient: y.ambient,
                coords: out,
            }),
            provenance: Provenance::Osculating,
        })
    }

    /// Hyperband over Y: the envelope swept out by a family of tangent
    /// hyperplanes L_y = span{phi, d phi, g_1..g_k}, k = N - m - 1. Each
    /// fiber of the construction is the characteristic subspace of the
    /// hyperplane family, so the result has N-1 parameters, a degenerate
    /// Gauss map, and fibers of dimension at least N - m - 1.
    pub fn hyperband(
        y: &Variety,
        frame: &[Vec<Expr>],
        rng: &mut ChaCha12Rng,
        tol: &Tolerances,
    ) -> Result<Variety> {
        let m = y.n;
        let k = y.ambient - m - 1;
        if frame.len() != k {
            return Err(Error::DimensionMismatch {
                what: "hyperband frame vector count".into(),
                expected: k,
                got: frame.len(),
            });
        }
        if !y.eval.exact() {
            return Err(Error::Input("hyperband needs a polynomial-backed base".into()));
        }
        let dim = y.ambient + 1;
        for g in frame {
            if g.len() != dim {
                return Err(Error::DimensionMismatch {
                    what: "hyperband frame vector".into(),
                    expected: dim,
                    got: g.len(),
                });
            }
        }
        let frame_derivs: Vec<Vec<Vec<Expr>>> = frame
            .iter()
            .map(|g| {
                (0..m)
                    .map(|a| g.iter().map(|e| e.diff(a)).collect())
                    .collect()
            })
            .collect();

        let mut last = Error::FrameDependence;
        for _ in 0..=tol.retries {
            let Ok(y_ref) = y.sample_generic(rng, tol) else {
                continue;
            };
            // Partial eval used to bootstrap the reference data.
            let mut eval = HyperbandEval {
                base: y.clone(),
                frame: frame.to_vec(),
                frame_derivs: frame_derivs.clone(),
                hyperplane: NullFrame {
                    e: DMatrix::zeros(0, 0),
                    reference: DMatrix::zeros(0, 0),
                },
                characteristic: NullFrame {
                    e: DMatrix::zeros(0, 0),
                    reference: DMatrix::zeros(0, 0),
                },
                step: tol.fd_step_numeric,
            };
            let Ok((a_ref, _)) = eval.plane_stack(&y_ref) else {
                continue;
            };
            match NullFrame::new(&a_ref, tol) {
                Ok(nf) => eval.hyperplane = nf,
                Err(e) => {
                    last = e;
                    continue;
                }
            }
            let Ok(c_ref) = eval.characteristic_stack(&y_ref) else {
                continue;
            };
            match NullFrame::new(&c_ref, tol) {
                Ok(nf) => eval.characteristic = nf,
                Err(e) => {
                    last = e;
                    continue;
                }
            }
            let n = eval.params();
            return Ok(Variety {
                name: format!("hyperband({})", y.name),
                n,
                ambient: y.ambient,
                eval: Arc::new(eval),
                provenance: Provenance::Hyperband,
            });
        }
        Err(match last {
            Error::RankDrop { .. } => Error::FrameDependence,
            other => other,
        })
    }

    /// Band of planes tangent to a curve: psi(t,a,b) = phi + a phi' + b g.
    pub fn plane_band(
        c: &Variety,
        g: &[Expr],
        rng: &mut ChaCha12Rng,
        tol: &Tolerances,
    ) -> Result<Variety> {
        if c.n != 1 {
            return Err(Error::UnsupportedDimension {
                detail: format!("plane band base must be a curve, got dimension {}", c.n),
            });
        }
        let coords = c
            .dag_coords()
            .ok_or_else(|| Error::Input("plane band needs a polynomial-backed base".into()))?;
        let dim = c.ambient + 1;
        if g.len() != dim {
            return Err(Error::DimensionMismatch {
                what: "plane band vector".into(),
                expected: dim,
                got: g.len(),
            });
        }

        let mut ok = false;
        for _ in 0..=tol.retries {
            let u = random_point(rng, 1);
            let Ok((_, fm)) = c.lift_and_frame_matrix(&u) else {
                continue;
            };
            let mut stacked = DMatrix::zeros(3, dim);
            stacked.view_mut((0, 0), (2, dim)).copy_from(&fm);
            let Ok(vals) = eval_values(g, &u) else {
                continue;
            };
            for col in 0..dim {
                stacked[(2, col)] = vals[col];
            }
            let d = linalg::rank_of(&stacked, tol);
            if d.rank == 3 && !d.ambiguous {
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(Error::FrameDependence);
        }

        let mut out = Vec::with_capacity(dim);
        for cc in 0..dim {
            let e = Expr::add(
                &Expr::add(
                    &coords[cc].clone(),
                    &Expr::mul(&Expr::param(1), &coords[cc].diff(0)),
                ),
                &Expr::mul(&Expr::param(2), &g[cc]),
            );
            out.push(e);
        }
        Ok(Variety {
            name: format!("plane_band({})", c.name),
            n: 3,
            ambient: c.ambient,
            eval: Arc::new(DagEval {
                n: 3,
                ambient: c.ambient,
                coords: out,
            }),
            provenance: Provenance::PlaneBand,
        })
    }

    /// Union of tangent lines along a direction field on Y.
    pub fn line_union(
        y: &Variety,
        field: crate::frames::DirectionField,
        seed: u64,
        tol: &Tolerances,
    ) -> Result<Variety> {
        let m = y.n;
        let dim = y.ambient + 1;
        match field {
            crate::frames::DirectionField::User(components) => {
                if components.len() != m {
                    return Err(Error::DimensionMismatch {
                        what: "direction field components".into(),
                        expected: m,
                        got: components.len(),
                    });
                }
                let coords = y.dag_coords().ok_or_else(|| {
                    Error::Input("user direction fields need a polynomial-backed base".into())
                })?;
                let n = m + 1;
                let mut out = Vec::with_capacity(dim);
                for c in 0..dim {
                    let mut dir = Expr::zero();
                    for i in 0..m {
                        dir = Expr::add(&dir, &Expr::mul(&components[i], &coords[c].diff(i)));
                    }
                    out.push(Expr::add(
                        &coords[c].clone(),
                        &Expr::mul(&Expr::param(m), &dir),
                    ));
                }
                Ok(Variety {
                    name: format!("line_union({})", y.name),
                    n,
                    ambient: y.ambient,
                    eval: Arc::new(DagEval {
                        n,
                        ambient: y.ambient,
                        coords: out,
                    }),
                    provenance: Provenance::LineUnion,
                })
            }
            other => {
                let coords = y.dag_coords().ok_or_else(|| {
                    Error::Input("resolved direction fields need a polynomial-backed base".into())
                })?;
                let resolver = crate::frames::FieldResolver::new(y, other, seed, tol)?;
                let derivs: Vec<Vec<Expr>> = (0..m)
                    .map(|i| coords.iter().map(|c| c.diff(i)).collect())
                    .collect();
                Ok(Variety {
                    name: format!("line_union({})", y.name),
                    n: m + 1,
                    ambient: y.ambient,
                    eval: Arc::new(LineUnionEval {
                        base: y.clone(),
                        derivs,
                        resolver,
                        step: tol.fd_step_numeric,
                    }),
                    provenance: Provenance::LineUnion,
                })
            }
        }
    }

    /// Dual variety of S: the family of hyperplanes containing the
    /// embedded tangent spaces, in dual coordinates. The annihilator at
    /// each point is the bilinear one (hyperplane pairing), computed as a
    /// holomorphic oblique projection of a reference frame.
    pub fn dual_variety(s: &Variety, rng: &mut ChaCha12Rng, tol: &Tolerances) -> Result<Variety> {
        let m = s.n;
        let dim = s.ambient + 1;
        let k = dim - (m + 1); // annihilator dimension N - m
        if k < 1 {
            return Err(Error::UnsupportedDimension {
                detail: "dual variety needs positive codimension".into(),
            });
        }
        let _ = (dim, k);
        for _ in 0..=tol.retries {
            let Ok(y_ref) = s.sample_generic(rng, tol) else {
                continue;
            };
            let Ok((_, a)) = s.lift_and_frame_matrix(&y_ref) else {
                continue;
            };
            let Ok(annihilator) = NullFrame::new(&a, tol) else {
                continue;
            };
            let eval = DualEval {
                base: s.clone(),
                annihilator,
                step: tol.fd_step_numeric,
            };
            let n = eval.params();
            return Ok(Variety {
                name: format!("dual({})", s.name),
                n,
                ambient: s.ambient,
                eval: Arc::new(eval),
                provenance: Provenance::Dual,
            });
        }
        Err(Error::RankDrop {
            detail: "annihilator rank drop at all retry samples".into(),
        })
    }

    /// Variety backed by a pointwise numeric map.
    pub fn from_numeric(name: impl Into<String>, eval: NumericEval) -> Variety {
        let n = eval.n;
        let ambient = eval.ambient;
        Variety {
            name: name.into(),
            n,
            ambient,
            eval: Arc::new(eval),
            provenance: Provenance::Derived,
        }
    }

    /// Precompose the parameters with an invertible affine map (exact).
    pub fn reparametrize(&self, a: &DMatrix<C>, b: &DVector<C>) -> Result<Variety> {
        if a.nrows() != self.n || a.ncols() != self.n || b.len() != self.n {
            return Err(Error::DimensionMismatch {
                what: "reparametrization".into(),
                expected: self.n,
                got: a.nrows(),
            });
        }
        Ok(Variety {
            name: format!("reparam({})", self.name),
            n: self.n,
            ambient: self.ambient,
            eval: Arc::new(PrecomposeEval {
                inner: self.eval.clone(),
                a: a.clone(),
                b: b.clone(),
            }),
            provenance: Provenance::Derived,
        })
    }

    /// Apply an invertible matrix to the homogeneous coordinates (exact).
    /// Join provenance survives: the parameter blocks are untouched.
    pub fn transform_ambient(&self, m: &DMatrix<C>) -> Result<Variety> {
        let dim = self.ambient + 1;
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::DimensionMismatch {
                what: "ambient transform".into(),
                expected: dim,
                got: m.nrows(),
            });
        }
        Ok(Variety {
            name: format!("proj({})", self.name),
            n: self.n,
            ambient: self.ambient,
            eval: Arc::new(AmbientMapEval {
                inner: self.eval.clone(),
                m: m.clone(),
            }),
            provenance: self.provenance.clone(),
        })
    }

    /// Multi-start local minimization of the projective distance from the
    /// image of this variety to a target point. Returns the best parameter
    /// point and the distance reached.
    pub fn nearest_point(
        &self,
        target: &DVector<C>,
        seed: u64,
        tol: &Tolerances,
    ) -> Result<(Vec<C>, f64)> {
        let mut rng = rng_stream(seed, 0xd157);
        let that = target / C::new(target.norm(), 0.0);
        let objective = |u: &[C]| -> f64 {
            match self.values(u) {
                Ok(v) => linalg::projective_distance(&v, &that),
                Err(_) => f64::INFINITY,
            }
        };

        let mut starts: Vec<(f64, Vec<C>)> = (0..60)
            .map(|_| {
                let u = random_point(&mut rng, self.n);
                (objective(&u), u)
            })
            .collect();
        starts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        starts.truncate(3);

        let mut best = starts[0].clone();
        for (_, start) in starts {
            let refined = self.refine_nearest(&start, &that, tol);
            let d = objective(&refined);
            if d < best.0 {
                best = (d, refined);
            }
        }
        Ok((best.1, best.0))
    }

    /// Damped Gauss-Newton on the component of the normalized lift
    /// orthogonal to the target direction, over real and imaginary parts.
    fn refine_nearest(&self, start: &[C], that: &DVector<C>, _tol: &Tolerances) -> Vec<C> {
        let n = self.n;
        let dim = self.ambient + 1;
        let residual = |u: &[C]| -> Option<DVector<C>> {
            let v = self.values(u).ok()?;
            let norm = v.norm();
            if norm < 1e-14 {
                return None;
            }
            let vhat = &v / C::new(norm, 0.0);
            let overlap: C = that.dotc(&vhat);
            Some(&vhat - that * overlap)
        };
        let mut u = start.to_vec();
        let mut lambda = 1e-3;
        let Some(mut r) = residual(&u) else {
            return u;
        };
        for _ in 0..100 {
            // Real-ified central-difference Jacobian: 2n real unknowns,
            // 2(dim) residual components.
            let h = 1e-6;
            let mut jac = DMatrix::<f64>::zeros(2 * dim, 2 * n);
            let mut ok = true;
            for i in 0..n {
                for (part, col) in [(C::new(h, 0.0), 2 * i), (C::new(0.0, h), 2 * i + 1)] {
                    let mut up = u.clone();
                    up[i] += part;
                    let mut um = u.clone();
                    um[i] -= part;
                    let (Some(rp), Some(rm)) = (residual(&up), residual(&um)) else {
                        ok = false;
                        break;
                    };
                    for c in 0..dim {
                        let d = (rp[c] - rm[c]) / (2.0 * h);
                        jac[(2 * c, col)] = d.re;
                        jac[(2 * c + 1, col)] = d.im;
                    }
                }
                if !ok {
                    break;
                }
            }
            if !ok {
                break;
            }
            let mut rv = DVector::<f64>::zeros(2 * dim);
            for c in 0..dim {
                rv[2 * c] = r[c].re;
                rv[2 * c + 1] = r[c].im;
            }
            let jtj = jac.transpose() * &jac;
            let jtr = jac.transpose() * &rv;
            let damped = &jtj + DMatrix::<f64>::identity(2 * n, 2 * n) * lambda;
            let Some(step) = damped.lu().solve(&jtr) else {
                break;
            };
            let mut u_new = u.clone();
            for i in 0..n {
                u_new[i] -= C::new(step[2 * i], step[2 * i + 1]);
            }
            match residual(&u_new) {
                Some(r_new) if r_new.norm() < r.norm() => {
                    u = u_new;
                    r = r_new;
                    lambda = (lambda * 0.25).max(1e-14);
                    if r.norm() < 1e-13 {
                        break;
                    }
                }
                _ => {
                    lambda *= 10.0;
                    if lambda > 1e10 {
                        break;
                    }
                }
            }
        }
        u
    }
}

/// Random polynomial curve of the given degree in P^ambient: coordinates
/// (1, t, higher random terms), guaranteed nondegenerate up to the degree.
pub fn random_curve(
    name: impl Into<String>,
    ambient: usize,
    degree: u32,
    rng: &mut impl Rng,
) -> Result<Variety> {
    let mut coords = Vec::with_capacity(ambient + 1);
    coords.push(Expr::one());
    coords.push(Expr::param(0));
    for _ in 2..=ambient {
        let terms: Vec<(Vec<u32>, C)> = (2..=degree)
            .map(|d| (vec![d], random_unit_complex(rng)))
            .collect();
        let mut e = Expr::polynomial(&terms);
        // Affine tilt keeps coordinates independent even at low degree.
        e = Expr::add(&e, &Expr::scale(random_unit_complex(rng), &Expr::param(0)));
        e = Expr::add(&e, &Expr::constant(random_unit_complex(rng)));
        coords.push(e);
    }
    Variety::from_polynomials(name, 1, ambient, coords)
}

/// Random polynomial surface in P^ambient with coordinates
/// (1, u, v, random polynomials of the given degree).
pub fn random_surface(
    name: impl Into<String>,
    ambient: usize,
    degree: u32,
    rng: &mut impl Rng,
) -> Result<Variety> {
    let mut coords = Vec::with_capacity(ambient + 1);
    coords.push(Expr::one());
    coords.push(Expr::param(0));
    coords.push(Expr::param(1));
    for _ in 3..=ambient {
        let mut terms: Vec<(Vec<u32>, C)> = Vec::new();
        for total in 2..=degree {
            for i in 0..=total {
                terms.push((vec![i, total - i], random_unit_complex(rng)));
            }
        }
        let mut e = Expr::polynomial(&terms);
        e = Expr::add(&e, &Expr::scale(random_unit_complex(rng), &Expr::param(0)));
        e = Expr::add(&e, &Expr::scale(random_unit_complex(rng), &Expr::param(1)));
        e = Expr::add(&e, &Expr::constant(random_unit_complex(rng)));
        coords.push(e);
    }
    Variety::from_polynomials(name, 2, ambient, coords)
}
