//! Expression DAGs for parametrization maps: constants, parameters,
//! sums, products, scalar multiples, and nonnegative integer powers.
//! Nodes are shared through `Arc`, walks are memoized by node address, and
//! symbolic differentiation produces new DAGs so derived varieties
//! (tangential, osculating, plane bands) stay exact.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::jets::{fd_jets, Jet3, C, ONE, ZERO};

#[derive(Debug)]
pub enum ExprNode {
    Const(C),
    Param(usize),
    Add(Expr, Expr),
    Mul(Expr, Expr),
    Scale(C, Expr),
    Pow(Expr, u32),
}

/// A handle to a shared expression node.
#[derive(Clone, Debug)]
pub struct Expr(Arc<ExprNode>);

impl Expr {
    fn key(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn constant(c: C) -> Expr {
        Expr(Arc::new(ExprNode::Const(c)))
    }

    pub fn constant_re(re: f64) -> Expr {
        Expr::constant(C::new(re, 0.0))
    }

    pub fn zero() -> Expr {
        Expr::constant(ZERO)
    }

    pub fn one() -> Expr {
        Expr::constant(ONE)
    }

    pub fn param(i: usize) -> Expr {
        Expr(Arc::new(ExprNode::Param(i)))
    }

    fn as_const(&self) -> Option<C> {
        match &*self.0 {
            ExprNode::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn add(a: &Expr, b: &Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x + y),
            (Some(x), None) if x == ZERO => b.clone(),
            (None, Some(y)) if y == ZERO => a.clone(),
            _ => Expr(Arc::new(ExprNode::Add(a.clone(), b.clone()))),
        }
    }

    pub fn sub(a: &Expr, b: &Expr) -> Expr {
        Expr::add(a, &Expr::scale(-ONE, b))
    }

    pub fn mul(a: &Expr, b: &Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x * y),
            (Some(x), None) => Expr::scale(x, b),
            (None, Some(y)) => Expr::scale(y, a),
            _ => Expr(Arc::new(ExprNode::Mul(a.clone(), b.clone()))),
        }
    }

    pub fn scale(c: C, a: &Expr) -> Expr {
        if c == ZERO {
            return Expr::zero();
        }
        if c == ONE {
            return a.clone();
        }
        match &*a.0 {
            ExprNode::Const(x) => Expr::constant(c * x),
            ExprNode::Scale(d, inner) => Expr(Arc::new(ExprNode::Scale(c * d, inner.clone()))),
            _ => Expr(Arc::new(ExprNode::Scale(c, a.clone()))),
        }
    }

    pub fn pow(a: &Expr, exp: u32) -> Expr {
        match exp {
            0 => Expr::one(),
            1 => a.clone(),
            _ => match a.as_const() {
                Some(x) => Expr::constant(x.powu(exp)),
                None => Expr(Arc::new(ExprNode::Pow(a.clone(), exp))),
            },
        }
    }

    /// Sum of coefficient * monomial terms; `monomial[i]` is the exponent
    /// of parameter i.
    pub fn polynomial(terms: &[(Vec<u32>, C)]) -> Expr {
        let mut acc = Expr::zero();
        for (mono, coeff) in terms {
            let mut term = Expr::constant(*coeff);
            for (i, &e) in mono.iter().enumerate() {
                if e > 0 {
                    term = Expr::mul(&term, &Expr::pow(&Expr::param(i), e));
                }
            }
            acc = Expr::add(&acc, &term);
        }
        acc
    }

    /// Largest parameter index used, if any.
    pub fn max_param(&self) -> Option<usize> {
        fn walk(e: &Expr, memo: &mut HashMap<usize, Option<usize>>) -> Option<usize> {
            if let Some(v) = memo.get(&e.key()) {
                return *v;
            }
            let out = match &*e.0 {
                ExprNode::Const(_) => None,
                ExprNode::Param(i) => Some(*i),
                ExprNode::Add(a, b) | ExprNode::Mul(a, b) => {
                    match (walk(a, memo), walk(b, memo)) {
                        (Some(x), Some(y)) => Some(x.max(y)),
                        (x, None) => x,
                        (None, y) => y,
                    }
                }
                ExprNode::Scale(_, a) | ExprNode::Pow(a, _) => walk(a, memo),
            };
            memo.insert(e.key(), out);
            out
        }
        walk(self, &mut HashMap::new())
    }

    /// Symbolic partial derivative with respect to parameter `i`.
    pub fn diff(&self, i: usize) -> Expr {
        fn walk(e: &Expr, i: usize, memo: &mut HashMap<usize, Expr>) -> Expr {
            if let Some(v) = memo.get(&e.key()) {
                return v.clone();
            }
            let out = match &*e.0 {
                ExprNode::Const(_) => Expr::zero(),
                ExprNode::Param(j) => {
                    if *j == i {
                        Expr::one()
                    } else {
                        Expr::zero()
                    }
                }
                ExprNode::Add(a, b) => Expr::add(&walk(a, i, memo), &walk(b, i, memo)),
                ExprNode::Mul(a, b) => {
                    let da = walk(a, i, memo);
                    let db = walk(b, i, memo);
                    Expr::add(&Expr::mul(&da, b), &Expr::mul(a, &db))
                }
                ExprNode::Scale(c, a) => Expr::scale(*c, &walk(a, i, memo)),
                ExprNode::Pow(a, k) => {
                    let da = walk(a, i, memo);
                    let power = Expr::pow(a, k - 1);
                    Expr::scale(C::new(f64::from(*k), 0.0), &Expr::mul(&power, &da))
                }
            };
            memo.insert(e.key(), out.clone());
            out
        }
        walk(self, i, &mut HashMap::new())
    }

    /// Replace every parameter j by `subs[j]`.
    pub fn substitute(&self, subs: &[Expr]) -> Result<Expr> {
        fn walk(e: &Expr, subs: &[Expr], memo: &mut HashMap<usize, Expr>) -> Result<Expr> {
            if let Some(v) = memo.get(&e.key()) {
                return Ok(v.clone());
            }
            let out = match &*e.0 {
                ExprNode::Const(c) => Expr::constant(*c),
                ExprNode::Param(j) => subs
                    .get(*j)
                    .cloned()
                    .ok_or(Error::IndexOutOfRange {
                        index: *j,
                        n: subs.len(),
                    })?,
                ExprNode::Add(a, b) => Expr::add(&walk(a, subs, memo)?, &walk(b, subs, memo)?),
                ExprNode::Mul(a, b) => Expr::mul(&walk(a, subs, memo)?, &walk(b, subs, memo)?),
                ExprNode::Scale(c, a) => Expr::scale(*c, &walk(a, subs, memo)?),
                ExprNode::Pow(a, k) => Expr::pow(&walk(a, subs, memo)?, *k),
            };
            memo.insert(e.key(), out.clone());
            Ok(out)
        }
        walk(self, subs, &mut HashMap::new())
    }

    /// Shift every parameter index by `offset` (for block-parameter
    /// constructions like joins).
    pub fn shift_params(&self, offset: usize, total: usize) -> Result<Expr> {
        let subs: Vec<Expr> = (0..total.max(
            self.max_param().map_or(0, |m| m + 1),
        ))
            .map(|j| Expr::param(j + offset))
            .collect();
        self.substitute(&subs)
    }
}

/// Memoized jet evaluation of a family of expressions over a shared node
/// cache. All expressions must use parameters below `n`.
pub fn eval_jets(exprs: &[Expr], u: &[C], order: u8) -> Result<Vec<Jet3>> {
    if order > 3 {
        return Err(Error::UnsupportedOrder { order });
    }
    let n = u.len();
    let seeds: Vec<Jet3> = (0..n)
        .map(|i| Jet3::seed_variable(i, u[i], n, order))
        .collect::<Result<_>>()?;
    let mut memo: HashMap<usize, Jet3> = HashMap::new();

    fn walk(
        e: &Expr,
        seeds: &[Jet3],
        n: usize,
        order: u8,
        memo: &mut HashMap<usize, Jet3>,
    ) -> Result<Jet3> {
        if let Some(v) = memo.get(&e.key()) {
            return Ok(v.clone());
        }
        let out = match &*e.0 {
            ExprNode::Const(c) => Jet3::constant(*c, n, order),
            ExprNode::Param(j) => seeds
                .get(*j)
                .cloned()
                .ok_or(Error::IndexOutOfRange { index: *j, n })?,
            ExprNode::Add(a, b) => {
                let ja = walk(a, seeds, n, order, memo)?;
                let jb = walk(b, seeds, n, order, memo)?;
                ja.add(&jb)?
            }
            ExprNode::Mul(a, b) => {
                let ja = walk(a, seeds, n, order, memo)?;
                let jb = walk(b, seeds, n, order, memo)?;
                ja.mul(&jb)?
            }
            ExprNode::Scale(c, a) => walk(a, seeds, n, order, memo)?.scale(*c),
            ExprNode::Pow(a, k) => walk(a, seeds, n, order, memo)?.powi(*k)?,
        };
        memo.insert(e.key(), out.clone());
        Ok(out)
    }

    exprs
        .iter()
        .map(|e| walk(e, &seeds, n, order, &mut memo))
        .collect()
}

/// Value-only evaluation (shared cache, no derivative work).
pub fn eval_values(exprs: &[Expr], u: &[C]) -> Result<DVector<C>> {
    let mut memo: HashMap<usize, C> = HashMap::new();

    fn walk(e: &Expr, u: &[C], memo: &mut HashMap<usize, C>) -> Result<C> {
        if let Some(v) = memo.get(&e.key()) {
            return Ok(*v);
        }
        let out = match &*e.0 {
            ExprNode::Const(c) => *c,
            ExprNode::Param(j) => *u.get(*j).ok_or(Error::IndexOutOfRange {
                index: *j,
                n: u.len(),
            })?,
            ExprNode::Add(a, b) => walk(a, u, memo)? + walk(b, u, memo)?,
            ExprNode::Mul(a, b) => walk(a, u, memo)? * walk(b, u, memo)?,
            ExprNode::Scale(c, a) => *c * walk(a, u, memo)?,
            ExprNode::Pow(a, k) => walk(a, u, memo)?.powu(*k),
        };
        memo.insert(e.key(), out);
        Ok(out)
    }

    let vals: Vec<C> = exprs
        .iter()
        .map(|e| walk(e, u, &mut memo))
        .collect::<Result<_>>()?;
    Ok(DVector::from_vec(vals))
}

/// Max relative disagreement between jet derivatives of `expr` and plain
/// central finite differences of its values: the independent oracle for
/// the jet engine.
pub fn finite_difference_check(expr: &Expr, u: &[C], h: f64) -> f64 {
    let n = u.len();
    let jet = &eval_jets(std::slice::from_ref(expr), u, 2).expect("expression evaluation")[0];
    let f = |p: &[C]| eval_values(std::slice::from_ref(expr), p).expect("value evaluation")[0];
    let shift = |i: usize, d: f64| {
        let mut p = u.to_vec();
        p[i] += C::new(d, 0.0);
        p
    };
    let mut worst: f64 = 0.0;
    let f0 = f(u);
    for i in 0..n {
        let fp = f(&shift(i, h));
        let fm = f(&shift(i, -h));
        let d1 = (fp - fm) / (2.0 * h);
        worst = worst.max((d1 - jet.grad()[i]).norm() / (1.0 + jet.grad()[i].norm()));
        let d2 = (fp - f0 * 2.0 + fm) / (h * h);
        worst = worst.max((d2 - jet.hess()[(i, i)]).norm() / (1.0 + jet.hess()[(i, i)].norm()));
        for j in (i + 1)..n {
            let mut pp = shift(i, h);
            pp[j] += C::new(h, 0.0);
            let mut pm = shift(i, h);
            pm[j] -= C::new(h, 0.0);
            let mut mp = shift(i, -h);
            mp[j] += C::new(h, 0.0);
            let mut mm = shift(i, -h);
            mm[j] -= C::new(h, 0.0);
            let dij = (f(&pp) - f(&pm) - f(&mp) + f(&mm)) / (4.0 * h * h);
            worst =
                worst.max((dij - jet.hess()[(i, j)]).norm() / (1.0 + jet.hess()[(i, j)].norm()));
        }
    }
    worst
}

/// Finite-difference jets of an expression family, for parity tests
/// between the exact and numeric evaluation paths.
pub fn fd_jets_of_exprs(exprs: &[Expr], u: &[C], order: u8, h: f64) -> Result<Vec<Jet3>> {
    let f = |p: &[C]| eval_values(exprs, p);
    fd_jets(&f, u, order, h)
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            ExprNode::Const(c) => write!(f, "({:.3}{:+.3}i)", c.re, c.im),
            ExprNode::Param(i) => write!(f, "u{}", i),
            ExprNode::Add(a, b) => write!(f, "({} + {})", a, b),
            ExprNode::Mul(a, b) => write!(f, "({} * {})", a, b),
            ExprNode::Scale(c, a) => write!(f, "({:.3}{:+.3}i)*{}", c.re, c.im, a),
            ExprNode::Pow(a, k) => write!(f, "{}^{}", a, k),
        }
    }
}
