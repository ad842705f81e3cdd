//! Truncated multivariate Taylor (jet) arithmetic to order 3 over complex
//! scalars. This is the sole differentiation mechanism of the toolkit:
//! exact for expression DAGs, finite-difference-backed for coordinate maps
//! that only exist pointwise (dual varieties, resolved direction fields).
//!
//! A [`Jet3`] carries the value together with the raw partial derivatives
//! up to the truncation order: gradient, Hessian, and the fully symmetric
//! third-derivative tensor. Symmetric parts are computed once per
//! canonical index tuple and mirrored, so symmetry holds exactly, not just
//! up to rounding.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};

pub type C = Complex<f64>;

pub const ZERO: C = Complex::new(0.0, 0.0);
pub const ONE: C = Complex::new(1.0, 0.0);

/// Order-3 truncated Taylor expansion of a scalar in `n` complex
/// parameters. Parts beyond `order` are kept empty and treated as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet3 {
    n: usize,
    order: u8,
    value: C,
    grad: DVector<C>,
    hess: DMatrix<C>,
    /// Dense n*n*n storage, fully symmetric; empty unless order == 3.
    third: Vec<C>,
}

#[inline]
fn tidx(n: usize, i: usize, j: usize, k: usize) -> usize {
    (i * n + j) * n + k
}

impl Jet3 {
    /// Jet of a constant: all derivative parts zero.
    pub fn constant(value: C, n: usize, order: u8) -> Self {
        let third = if order >= 3 {
            vec![ZERO; n * n * n]
        } else {
            Vec::new()
        };
        Jet3 {
            n,
            order,
            value,
            grad: DVector::zeros(n),
            hess: DMatrix::zeros(n, n),
            third,
        }
    }

    /// Jet of the i-th coordinate parameter at the given value: gradient is
    /// the i-th standard basis vector, higher parts vanish.
    pub fn seed_variable(i: usize, value: C, n: usize, order: u8) -> Result<Self> {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, n });
        }
        let mut jet = Jet3::constant(value, n, order);
        if order >= 1 {
            jet.grad[i] = ONE;
        }
        Ok(jet)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn value(&self) -> C {
        self.value
    }

    pub fn grad(&self) -> &DVector<C> {
        &self.grad
    }

    pub fn hess(&self) -> &DMatrix<C> {
        &self.hess
    }

    pub fn third_at(&self, i: usize, j: usize, k: usize) -> C {
        if self.third.is_empty() {
            ZERO
        } else {
            self.third[tidx(self.n, i, j, k)]
        }
    }

    /// Raw third tensor (empty unless order 3).
    pub fn third(&self) -> &[C] {
        &self.third
    }

    /// Build a jet from explicit parts. The Hessian is symmetrized and the
    /// third tensor is written from its canonical entries, so the symmetry
    /// invariants hold no matter what the caller passed in.
    pub fn from_parts(
        value: C,
        grad: DVector<C>,
        hess: DMatrix<C>,
        third: Option<Vec<C>>,
        order: u8,
    ) -> Result<Self> {
        let n = grad.len();
        if hess.nrows() != n || hess.ncols() != n {
            return Err(Error::DimensionMismatch {
                what: "jet hessian".into(),
                expected: n,
                got: hess.nrows(),
            });
        }
        let mut jet = Jet3::constant(value, n, order);
        if order >= 1 {
            jet.grad = grad;
        }
        if order >= 2 {
            for i in 0..n {
                for j in i..n {
                    let v = (hess[(i, j)] + hess[(j, i)]) * 0.5;
                    jet.hess[(i, j)] = v;
                    jet.hess[(j, i)] = v;
                }
            }
        }
        if order >= 3 {
            let t = third.unwrap_or_else(|| vec![ZERO; n * n * n]);
            if t.len() != n * n * n {
                return Err(Error::DimensionMismatch {
                    what: "jet third tensor".into(),
                    expected: n * n * n,
                    got: t.len(),
                });
            }
            for i in 0..n {
                for j in i..n {
                    for k in j..n {
                        jet.write_third_sym(i, j, k, t[tidx(n, i, j, k)]);
                    }
                }
            }
        }
        Ok(jet)
    }

    fn check_compatible(&self, other: &Jet3) -> Result<()> {
        if self.n != other.n {
            return Err(Error::ParamMismatch {
                left: self.n,
                right: other.n,
            });
        }
        if self.order != other.order {
            return Err(Error::OrderMismatch {
                left: self.order,
                right: other.order,
            });
        }
        Ok(())
    }

    #[inline]
    fn write_third_sym(&mut self, i: usize, j: usize, k: usize, v: C) {
        let n = self.n;
        self.third[tidx(n, i, j, k)] = v;
        self.third[tidx(n, i, k, j)] = v;
        self.third[tidx(n, j, i, k)] = v;
        self.third[tidx(n, j, k, i)] = v;
        self.third[tidx(n, k, i, j)] = v;
        self.third[tidx(n, k, j, i)] = v;
    }

    pub fn add(&self, other: &Jet3) -> Result<Jet3> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        out.value += other.value;
        if self.order >= 1 {
            out.grad += &other.grad;
        }
        if self.order >= 2 {
            out.hess += &other.hess;
        }
        if self.order >= 3 {
            for (a, b) in out.third.iter_mut().zip(other.third.iter()) {
                *a += *b;
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Jet3) -> Result<Jet3> {
        self.add(&other.scale(-ONE))
    }

    pub fn scale(&self, s: C) -> Jet3 {
        let mut out = self.clone();
        out.value *= s;
        out.grad *= s;
        out.hess *= s;
        for a in out.third.iter_mut() {
            *a *= s;
        }
        out
    }

    pub fn neg(&self) -> Jet3 {
        self.scale(-ONE)
    }

    /// Truncated Leibniz product. Canonical entries of the symmetric parts
    /// are computed once and mirrored.
    pub fn mul(&self, other: &Jet3) -> Result<Jet3> {
        self.check_compatible(other)?;
        let n = self.n;
        let order = self.order;
        let (a, b) = (self, other);
        let mut out = Jet3::constant(a.value * b.value, n, order);
        if order >= 1 {
            out.grad = &a.grad * b.value + &b.grad * a.value;
        }
        if order >= 2 {
            for i in 0..n {
                for j in i..n {
                    let v = a.hess[(i, j)] * b.value
                        + b.hess[(i, j)] * a.value
                        + a.grad[i] * b.grad[j]
                        + a.grad[j] * b.grad[i];
                    out.hess[(i, j)] = v;
                    out.hess[(j, i)] = v;
                }
            }
        }
        if order >= 3 {
            for i in 0..n {
                for j in i..n {
                    for k in j..n {
                        let v = a.third[tidx(n, i, j, k)] * b.value
                            + b.third[tidx(n, i, j, k)] * a.value
                            + a.hess[(i, j)] * b.grad[k]
                            + a.hess[(i, k)] * b.grad[j]
                            + a.hess[(j, k)] * b.grad[i]
                            + b.hess[(i, j)] * a.grad[k]
                            + b.hess[(i, k)] * a.grad[j]
                            + b.hess[(j, k)] * a.grad[i];
                        out.write_third_sym(i, j, k, v);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Nonnegative integer power, by repeated multiplication.
    pub fn powi(&self, exp: u32) -> Result<Jet3> {
        let mut acc = Jet3::constant(ONE, self.n, self.order);
        for _ in 0..exp {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    /// Re-embed an n-parameter jet into a larger parameter space, placing
    /// the old parameters at `offset..offset+n`.
    pub fn extend(&self, new_n: usize, offset: usize) -> Result<Jet3> {
        if offset + self.n > new_n {
            return Err(Error::IndexOutOfRange {
                index: offset + self.n,
                n: new_n,
            });
        }
        let mut out = Jet3::constant(self.value, new_n, self.order);
        if self.order >= 1 {
            for i in 0..self.n {
                out.grad[offset + i] = self.grad[i];
            }
        }
        if self.order >= 2 {
            for i in 0..self.n {
                for j in 0..self.n {
                    out.hess[(offset + i, offset + j)] = self.hess[(i, j)];
                }
            }
        }
        if self.order >= 3 {
            for i in 0..self.n {
                for j in i..self.n {
                    for k in j..self.n {
                        out.write_third_sym(
                            offset + i,
                            offset + j,
                            offset + k,
                            self.third[tidx(self.n, i, j, k)],
                        );
                    }
                }
            }
        }
        Ok(out)
    }

    /// Exact chain rule for an affine substitution u = A w + b: pulls an
    /// n-parameter jet back to the m parameters of w, where A is n x m.
    pub fn pullback_affine(&self, a: &DMatrix<C>) -> Result<Jet3> {
        if a.nrows() != self.n {
            return Err(Error::DimensionMismatch {
                what: "affine pullback".into(),
                expected: self.n,
                got: a.nrows(),
            });
        }
        let m = a.ncols();
        let n = self.n;
        let mut out = Jet3::constant(self.value, m, self.order);
        if self.order >= 1 {
            out.grad = a.transpose() * &self.grad;
        }
        if self.order >= 2 {
            let h = a.transpose() * &self.hess * a;
            for p in 0..m {
                for q in p..m {
                    let v = (h[(p, q)] + h[(q, p)]) * 0.5;
                    out.hess[(p, q)] = v;
                    out.hess[(q, p)] = v;
                }
            }
        }
        if self.order >= 3 {
            for p in 0..m {
                for q in p..m {
                    for r in q..m {
                        let mut v = ZERO;
                        for i in 0..n {
                            let aip = a[(i, p)];
                            if aip == ZERO {
                                continue;
                            }
                            for j in 0..n {
                                let ajq = a[(j, q)];
                                if ajq == ZERO {
                                    continue;
                                }
                                for k in 0..n {
                                    v += self.third[tidx(n, i, j, k)] * aip * ajq * a[(k, r)];
                                }
                            }
                        }
                        out.write_third_sym(p, q, r, v);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Jet of the i-th partial derivative, one order lower: the value is
    /// grad[i], the gradient is the i-th Hessian row, and so on.
    pub fn slice_derivative(&self, i: usize) -> Result<Jet3> {
        if i >= self.n {
            return Err(Error::IndexOutOfRange { index: i, n: self.n });
        }
        if self.order == 0 {
            return Err(Error::UnsupportedOrder { order: 0 });
        }
        let order = self.order - 1;
        let mut out = Jet3::constant(self.grad[i], self.n, order);
        if order >= 1 {
            out.grad = self.hess.row(i).transpose();
        }
        if order >= 2 {
            for j in 0..self.n {
                for k in 0..self.n {
                    out.hess[(j, k)] = self.third_at(i, j, k);
                }
            }
        }
        Ok(out)
    }

    /// Max absolute asymmetry of the Hessian and third tensor. Zero by
    /// construction; asserted after composite operations in tests.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                worst = worst.max((self.hess[(i, j)] - self.hess[(j, i)]).norm());
            }
        }
        if !self.third.is_empty() {
            let n = self.n;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let v = self.third[tidx(n, i, j, k)];
                        for &(a, b, c) in &[(i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)]
                        {
                            worst = worst.max((v - self.third[tidx(n, a, b, c)]).norm());
                        }
                    }
                }
            }
        }
        worst
    }
}

/// Five-point finite-difference jets of a black-box coordinate map.
///
/// The map must be holomorphic in its complex parameters, so real-direction
/// steps recover the complex derivatives. First and second derivatives use
/// Richardson-extrapolated stencils (O(h^4) truncation); third derivatives,
/// when requested, come from one extra central difference of the Hessian
/// and are accurate to roughly O(h^2).
pub fn fd_jets<F>(f: &F, u: &[C], order: u8, h: f64) -> Result<Vec<Jet3>>
where
    F: Fn(&[C]) -> Result<DVector<C>> + ?Sized,
{
    if order > 3 {
        return Err(Error::UnsupportedOrder { order });
    }
    let n = u.len();
    let center = f(u)?;
    let m = center.len();
    let mut jets: Vec<Jet3> = center
        .iter()
        .map(|&v| Jet3::constant(v, n, order))
        .collect();
    if order == 0 {
        return Ok(jets);
    }

    let shifted = |deltas: &[(usize, f64)]| -> Result<DVector<C>> {
        let mut p = u.to_vec();
        for &(i, d) in deltas {
            p[i] += C::new(d, 0.0);
        }
        f(&p)
    };

    // Axis evaluations, reused for first and diagonal-second derivatives.
    for i in 0..n {
        let fp1 = shifted(&[(i, h)])?;
        let fm1 = shifted(&[(i, -h)])?;
        let fp2 = shifted(&[(i, 2.0 * h)])?;
        let fm2 = shifted(&[(i, -2.0 * h)])?;
        for c in 0..m {
            let d1 = (-fp2[c] + fp1[c] * 8.0 - fm1[c] * 8.0 + fm2[c]) / (12.0 * h);
            jets[c].grad[i] = d1;
            if order >= 2 {
                let d2 = (-fp2[c] + fp1[c] * 16.0 - center[c] * 30.0 + fm1[c] * 16.0 - fm2[c])
                    / (12.0 * h * h);
                jets[c].hess[(i, i)] = d2;
            }
        }
    }

    if order >= 2 {
        for i in 0..n {
            for j in (i + 1)..n {
                let cross = |s: f64| -> Result<Vec<C>> {
                    let pp = shifted(&[(i, s), (j, s)])?;
                    let pm = shifted(&[(i, s), (j, -s)])?;
                    let mp = shifted(&[(i, -s), (j, s)])?;
                    let mm = shifted(&[(i, -s), (j, -s)])?;
                    Ok((0..m)
                        .map(|c| (pp[c] - pm[c] - mp[c] + mm[c]) / (4.0 * s * s))
                        .collect())
                };
                let dh = cross(h)?;
                let d2h = cross(2.0 * h)?;
                for c in 0..m {
                    let v = (dh[c] * 4.0 - d2h[c]) / 3.0;
                    jets[c].hess[(i, j)] = v;
                    jets[c].hess[(j, i)] = v;
                }
            }
        }
    }

    if order >= 3 {
        // Central difference of order-2 jets along each parameter, then
        // symmetrization over index permutations.
        let h3 = h.max(1e-3);
        let mut raw = vec![vec![ZERO; n * n * n]; m];
        for k in 0..n {
            let mut up = u.to_vec();
            up[k] += C::new(h3, 0.0);
            let mut um = u.to_vec();
            um[k] -= C::new(h3, 0.0);
            let jp = fd_jets(f, &up, 2, h)?;
            let jm = fd_jets(f, &um, 2, h)?;
            for c in 0..m {
                for i in 0..n {
                    for j in 0..n {
                        raw[c][tidx(n, i, j, k)] =
                            (jp[c].hess[(i, j)] - jm[c].hess[(i, j)]) / (2.0 * h3);
                    }
                }
            }
        }
        for (c, jet) in jets.iter_mut().enumerate() {
            for i in 0..n {
                for j in i..n {
                    for k in j..n {
                        let mut v = ZERO;
                        for &(a, b, d) in &[
                            (i, j, k),
                            (i, k, j),
                            (j, i, k),
                            (j, k, i),
                            (k, i, j),
                            (k, j, i),
                        ] {
                            v += raw[c][tidx(n, a, b, d)];
                        }
                        jet.write_third_sym(i, j, k, v / 6.0);
                    }
                }
            }
        }
    }

    Ok(jets)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C {
        C::new(re, 0.0)
    }

    #[test]
    fn seed_variable_is_a_coordinate_jet() {
        let j = Jet3::seed_variable(0, c(2.0), 2, 3).unwrap();
        assert_eq!(j.value(), c(2.0));
        assert_eq!(j.grad()[0], ONE);
        assert_eq!(j.grad()[1], ZERO);
        assert!(j.hess().iter().all(|&v| v == ZERO));
        assert!(j.third().iter().all(|&v| v == ZERO));
    }

    #[test]
    fn seed_variable_bounds_checked() {
        assert!(matches!(
            Jet3::seed_variable(1, ZERO, 1, 3),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn product_of_two_coordinates() {
        // x*y at (a, b): value ab, grad (b, a), mixed second derivative 1.
        let a = c(3.0);
        let b = c(-2.0);
        let x = Jet3::seed_variable(0, a, 2, 3).unwrap();
        let y = Jet3::seed_variable(1, b, 2, 3).unwrap();
        let p = x.mul(&y).unwrap();
        assert_eq!(p.value(), a * b);
        assert_eq!(p.grad()[0], b);
        assert_eq!(p.grad()[1], a);
        assert_eq!(p.hess()[(0, 1)], ONE);
        assert_eq!(p.hess()[(1, 0)], ONE);
        assert_eq!(p.hess()[(0, 0)], ZERO);
        assert_eq!(p.symmetry_defect(), 0.0);
    }

    #[test]
    fn square_of_sum_hand_oracle() {
        // (x+y)^2 at (1,1): value 4, grad (4,4), hess all 2.
        let x = Jet3::seed_variable(0, c(1.0), 2, 3).unwrap();
        let y = Jet3::seed_variable(1, c(1.0), 2, 3).unwrap();
        let s = x.add(&y).unwrap();
        let sq = s.mul(&s).unwrap();
        assert_eq!(sq.value(), c(4.0));
        assert_eq!(sq.grad()[0], c(4.0));
        assert_eq!(sq.grad()[1], c(4.0));
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(sq.hess()[(i, j)], c(2.0));
            }
        }
    }

    #[test]
    fn cube_hand_oracle() {
        // x^3 at x=2: value 8, f' = 12, f'' = 12, f''' = 6.
        let x = Jet3::seed_variable(0, c(2.0), 1, 3).unwrap();
        let p = x.powi(3).unwrap();
        assert_eq!(p.value(), c(8.0));
        assert_eq!(p.grad()[0], c(12.0));
        assert_eq!(p.hess()[(0, 0)], c(12.0));
        assert_eq!(p.third_at(0, 0, 0), c(6.0));
    }

    #[test]
    fn mul_by_constant_one_is_identity() {
        let x = Jet3::seed_variable(0, C::new(0.3, 0.7), 2, 3).unwrap();
        let y = Jet3::seed_variable(1, C::new(-1.1, 0.2), 2, 3).unwrap();
        let j = x.mul(&y).unwrap().add(&x.powi(2).unwrap()).unwrap();
        let one = Jet3::constant(ONE, 2, 3);
        let p = j.mul(&one).unwrap();
        assert_eq!(p, j);
    }

    #[test]
    fn mismatched_parameter_counts_error() {
        let a = Jet3::constant(ONE, 2, 3);
        let b = Jet3::constant(ONE, 3, 3);
        assert!(matches!(a.add(&b), Err(Error::ParamMismatch { .. })));
        assert!(matches!(a.mul(&b), Err(Error::ParamMismatch { .. })));
    }

    #[test]
    fn extend_places_parameters_at_offset() {
        let x = Jet3::seed_variable(0, c(2.0), 1, 3).unwrap();
        let p = x.powi(3).unwrap().extend(3, 1).unwrap();
        assert_eq!(p.value(), c(8.0));
        assert_eq!(p.grad()[1], c(12.0));
        assert_eq!(p.grad()[0], ZERO);
        assert_eq!(p.hess()[(1, 1)], c(12.0));
        assert_eq!(p.third_at(1, 1, 1), c(6.0));
    }

    #[test]
    fn slice_derivative_shifts_orders() {
        let x = Jet3::seed_variable(0, c(2.0), 1, 3).unwrap();
        let p = x.powi(3).unwrap();
        let dp = p.slice_derivative(0).unwrap();
        assert_eq!(dp.order(), 2);
        assert_eq!(dp.value(), c(12.0));
        assert_eq!(dp.grad()[0], c(12.0));
        assert_eq!(dp.hess()[(0, 0)], c(6.0));
    }

    #[test]
    fn affine_pullback_matches_direct_evaluation() {
        // f(u) = u0^2 * u1 with u = A w, compared against evaluating the
        // composite polynomial directly in w.
        let a = DMatrix::from_row_slice(2, 2, &[c(2.0), c(1.0), c(-1.0), c(3.0)]);
        let w = [C::new(0.4, 0.1), C::new(-0.2, 0.3)];
        let u0 = a[(0, 0)] * w[0] + a[(0, 1)] * w[1];
        let u1 = a[(1, 0)] * w[0] + a[(1, 1)] * w[1];

        let ju0 = Jet3::seed_variable(0, u0, 2, 3).unwrap();
        let ju1 = Jet3::seed_variable(1, u1, 2, 3).unwrap();
        let f_u = ju0.powi(2).unwrap().mul(&ju1).unwrap();
        let pulled = f_u.pullback_affine(&a).unwrap();

        let jw0 = Jet3::seed_variable(0, w[0], 2, 3).unwrap();
        let jw1 = Jet3::seed_variable(1, w[1], 2, 3).unwrap();
        let cu0 = jw0.scale(a[(0, 0)]).add(&jw1.scale(a[(0, 1)])).unwrap();
        let cu1 = jw0.scale(a[(1, 0)]).add(&jw1.scale(a[(1, 1)])).unwrap();
        let f_w = cu0.powi(2).unwrap().mul(&cu1).unwrap();

        assert!((pulled.value() - f_w.value()).norm() < 1e-13);
        for i in 0..2 {
            assert!((pulled.grad()[i] - f_w.grad()[i]).norm() < 1e-12);
            for j in 0..2 {
                assert!((pulled.hess()[(i, j)] - f_w.hess()[(i, j)]).norm() < 1e-12);
                for k in 0..2 {
                    assert!(
                        (pulled.third_at(i, j, k) - f_w.third_at(i, j, k)).norm() < 1e-11
                    );
                }
            }
        }
    }

    #[test]
    fn fd_jets_recover_polynomial_derivatives() {
        // f(u) = (u0 + 2 u1)^3 as a pointwise map.
        let f = |u: &[C]| -> Result<DVector<C>> {
            let s = u[0] + u[1] * 2.0;
            Ok(DVector::from_vec(vec![s * s * s]))
        };
        let u = [C::new(0.3, 0.2), C::new(-0.4, 0.1)];
        let jets = fd_jets(&f, &u, 2, 1e-3).unwrap();
        let s = u[0] + u[1] * 2.0;
        assert!((jets[0].value() - s * s * s).norm() < 1e-14);
        assert!((jets[0].grad()[0] - s * s * 3.0).norm() < 1e-10);
        assert!((jets[0].grad()[1] - s * s * 6.0).norm() < 1e-10);
        assert!((jets[0].hess()[(0, 0)] - s * 6.0).norm() < 1e-8);
        assert!((jets[0].hess()[(0, 1)] - s * 12.0).norm() < 1e-8);
        assert!((jets[0].hess()[(1, 1)] - s * 24.0).norm() < 1e-8);
    }
}
