//! Expression DAGs over `(x, y, θ)`.
//!
//! Integrands are built from smooth atoms (constants, affine maps and
//! quadratics in `(x, y)`) closed under addition, scaling, pointwise
//! max/min, absolute value and explicit difference-of-convex nodes. Children
//! are reference counted so a subexpression may be shared between parents.
//!
//! A quadratic atom evaluates `½ zᵀ Q z + lin·z + c0` with `z = (x, y)`.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, VarBlock};

pub type ExprRef = Arc<Expr>;

/// Relative eigenvalue slack for the positive-semidefinite test.
const PSD_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Expr {
    Constant {
        value: f64,
    },
    Affine {
        #[serde(default)]
        c0: f64,
        #[serde(default)]
        cx: Vec<f64>,
        #[serde(default)]
        cy: Vec<f64>,
        #[serde(default)]
        ct: Vec<f64>,
    },
    Quad {
        #[serde(rename = "Q")]
        q: Vec<Vec<f64>>,
        #[serde(default)]
        lin: Vec<f64>,
        #[serde(default)]
        c0: f64,
        #[serde(default)]
        psd: bool,
    },
    Add {
        children: Vec<ExprRef>,
    },
    Scale {
        lambda: f64,
        child: ExprRef,
    },
    Max {
        children: Vec<ExprRef>,
    },
    Min {
        children: Vec<ExprRef>,
    },
    Abs {
        child: ExprRef,
    },
    Dc {
        plus: ExprRef,
        minus: ExprRef,
    },
}

/// Declared variable dimensions of an integrand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub d: usize,
    pub m: usize,
    pub q: usize,
}

impl Dims {
    pub fn new(d: usize, m: usize, q: usize) -> Self {
        Dims { d, m, q }
    }

    /// Dimension of the joint `(x, y)` space.
    pub fn n(&self) -> usize {
        self.d + self.m
    }
}

/// Borrowed evaluation point.
#[derive(Debug, Clone, Copy)]
pub struct Args<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub theta: &'a [f64],
}

impl<'a> Args<'a> {
    pub fn new(x: &'a [f64], y: &'a [f64], theta: &'a [f64]) -> Self {
        Args { x, y, theta }
    }

    #[inline]
    fn z(&self, i: usize) -> f64 {
        if i < self.x.len() {
            self.x[i]
        } else {
            self.y[i - self.x.len()]
        }
    }

    fn check(&self, dims: Dims) -> Result<()> {
        check_len(VarBlock::X, dims.d, self.x.len())?;
        check_len(VarBlock::Y, dims.m, self.y.len())?;
        check_len(VarBlock::Theta, dims.q, self.theta.len())
    }
}

fn check_len(block: VarBlock, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimMismatch {
            block,
            expected,
            found,
        })
    }
}

#[inline]
fn dot_prefix(c: &[f64], v: &[f64]) -> f64 {
    c.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Collapsed quadratic polynomial `½ zᵀ Q z + lin·z + ct·θ + c0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadForm {
    pub q: DMatrix<f64>,
    pub lin: Vec<f64>,
    pub ct: Vec<f64>,
    pub c0: f64,
}

impl QuadForm {
    fn zero(n: usize, nt: usize) -> Self {
        QuadForm {
            q: DMatrix::zeros(n, n),
            lin: vec![0.0; n],
            ct: vec![0.0; nt],
            c0: 0.0,
        }
    }

    fn axpy(&mut self, w: f64, other: &QuadForm) {
        self.q += &other.q * w;
        for (a, b) in self.lin.iter_mut().zip(&other.lin) {
            *a += w * b;
        }
        for (a, b) in self.ct.iter_mut().zip(&other.ct) {
            *a += w * b;
        }
        self.c0 += w * other.c0;
    }
}

pub fn constant(value: f64) -> ExprRef {
    Arc::new(Expr::Constant { value })
}

pub fn affine(c0: f64, cx: Vec<f64>, cy: Vec<f64>, ct: Vec<f64>) -> ExprRef {
    Arc::new(Expr::Affine { c0, cx, cy, ct })
}

pub fn quad(q: Vec<Vec<f64>>, lin: Vec<f64>, c0: f64) -> ExprRef {
    let psd = min_eigenvalue(&q).map(|e| e >= -psd_tol(&q)).unwrap_or(false);
    Arc::new(Expr::Quad { q, lin, c0, psd })
}

pub fn add(children: Vec<ExprRef>) -> ExprRef {
    Arc::new(Expr::Add { children })
}

pub fn scale(lambda: f64, child: ExprRef) -> ExprRef {
    Arc::new(Expr::Scale { lambda, child })
}

pub fn max(children: Vec<ExprRef>) -> ExprRef {
    Arc::new(Expr::Max { children })
}

pub fn min(children: Vec<ExprRef>) -> ExprRef {
    Arc::new(Expr::Min { children })
}

pub fn abs(child: ExprRef) -> ExprRef {
    Arc::new(Expr::Abs { child })
}

pub fn dc(plus: ExprRef, minus: ExprRef) -> ExprRef {
    Arc::new(Expr::Dc { plus, minus })
}

fn min_eigenvalue(q: &[Vec<f64>]) -> Option<f64> {
    let n = q.len();
    if n == 0 {
        return Some(0.0);
    }
    if q.iter().any(|row| row.len() != n) {
        return None;
    }
    let mat = DMatrix::from_fn(n, n, |i, j| 0.5 * (q[i][j] + q[j][i]));
    let eig = SymmetricEigen::new(mat);
    eig.eigenvalues.iter().cloned().reduce(f64::min)
}

fn psd_tol(q: &[Vec<f64>]) -> f64 {
    let scale = q
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    PSD_SLACK * scale.max(1.0)
}

impl Expr {
    /// Validates coefficient shapes against `dims`, finiteness of every
    /// coefficient, psd flags and the convexity of dc children.
    pub fn validate(&self, dims: Dims) -> Result<()> {
        match self {
            Expr::Constant { value } => finite(*value),
            Expr::Affine { c0, cx, cy, ct } => {
                finite(*c0)?;
                for (block, c, want) in [
                    (VarBlock::X, cx, dims.d),
                    (VarBlock::Y, cy, dims.m),
                    (VarBlock::Theta, ct, dims.q),
                ] {
                    if !c.is_empty() {
                        check_len(block, want, c.len())?;
                    }
                    c.iter().try_for_each(|v| finite(*v))?;
                }
                Ok(())
            }
            Expr::Quad { q, lin, c0, psd } => {
                let n = dims.n();
                check_len(VarBlock::XY, n, q.len())?;
                for row in q {
                    check_len(VarBlock::XY, n, row.len())?;
                    row.iter().try_for_each(|v| finite(*v))?;
                }
                if !lin.is_empty() {
                    check_len(VarBlock::XY, n, lin.len())?;
                }
                lin.iter().try_for_each(|v| finite(*v))?;
                finite(*c0)?;
                for i in 0..n {
                    for j in 0..i {
                        if (q[i][j] - q[j][i]).abs() > 1e-12 * (1.0 + q[i][j].abs()) {
                            return Err(Error::InvalidValue(
                                "quadratic matrix Q must be symmetric".into(),
                            ));
                        }
                    }
                }
                if *psd {
                    let e = min_eigenvalue(q).unwrap_or(f64::NEG_INFINITY);
                    if e < -psd_tol(q) {
                        return Err(Error::NotPsd { eigenvalue: e });
                    }
                }
                Ok(())
            }
            Expr::Add { children } | Expr::Max { children } | Expr::Min { children } => {
                if children.is_empty() {
                    return Err(Error::InvalidValue(
                        "add/max/min node needs at least one child".into(),
                    ));
                }
                children.iter().try_for_each(|c| c.validate(dims))
            }
            Expr::Scale { lambda, child } => {
                finite(*lambda)?;
                child.validate(dims)
            }
            Expr::Abs { child } => child.validate(dims),
            Expr::Dc { plus, minus } => {
                plus.validate(dims)?;
                minus.validate(dims)?;
                if !plus.is_convex() {
                    return Err(Error::DcNotConvex { which: "plus" });
                }
                if !minus.is_convex() {
                    return Err(Error::DcNotConvex { which: "minus" });
                }
                Ok(())
            }
        }
    }

    /// Evaluates with dimension checks against `dims`.
    pub fn eval_checked(&self, dims: Dims, args: Args<'_>) -> Result<f64> {
        args.check(dims)?;
        Ok(self.eval(args))
    }

    /// Evaluates assuming the expression was validated for the dimensions of `args`.
    pub fn eval(&self, args: Args<'_>) -> f64 {
        match self {
            Expr::Constant { value } => *value,
            Expr::Affine { c0, cx, cy, ct } => {
                c0 + dot_prefix(cx, args.x) + dot_prefix(cy, args.y) + dot_prefix(ct, args.theta)
            }
            Expr::Quad { q, lin, c0, .. } => {
                let n = q.len();
                let mut acc = *c0;
                for i in 0..n {
                    let zi = args.z(i);
                    if zi == 0.0 {
                        continue;
                    }
                    let row = &q[i];
                    let mut qz = 0.0;
                    for (j, qij) in row.iter().enumerate() {
                        qz += qij * args.z(j);
                    }
                    acc += zi * (0.5 * qz + lin.get(i).copied().unwrap_or(0.0));
                }
                acc
            }
            Expr::Add { children } => children.iter().map(|c| c.eval(args)).sum(),
            Expr::Scale { lambda, child } => lambda * child.eval(args),
            Expr::Max { children } => children
                .iter()
                .map(|c| c.eval(args))
                .fold(f64::NEG_INFINITY, f64::max),
            Expr::Min { children } => children
                .iter()
                .map(|c| c.eval(args))
                .fold(f64::INFINITY, f64::min),
            Expr::Abs { child } => child.eval(args).abs(),
            Expr::Dc { plus, minus } => plus.eval(args) - minus.eval(args),
        }
    }

    /// True when no max/min/abs/dc node occurs anywhere in the tree.
    pub fn is_smooth(&self) -> bool {
        match self {
            Expr::Constant { .. } | Expr::Affine { .. } | Expr::Quad { .. } => true,
            Expr::Add { children } => children.iter().all(|c| c.is_smooth()),
            Expr::Scale { child, .. } => child.is_smooth(),
            Expr::Max { .. } | Expr::Min { .. } | Expr::Abs { .. } | Expr::Dc { .. } => false,
        }
    }

    /// Structural convexity: affine and psd quadratic atoms closed under
    /// sums, nonnegative scaling and max; `abs` of an affine argument.
    pub fn is_convex(&self) -> bool {
        match self {
            Expr::Constant { .. } | Expr::Affine { .. } => true,
            Expr::Quad { q, .. } => min_eigenvalue(q).map(|e| e >= -psd_tol(q)).unwrap_or(false),
            Expr::Add { children } | Expr::Max { children } => {
                children.iter().all(|c| c.is_convex())
            }
            Expr::Scale { lambda, child } => {
                *lambda == 0.0 || (*lambda > 0.0 && child.is_convex())
            }
            Expr::Abs { child } => child.is_affine(),
            Expr::Min { .. } | Expr::Dc { .. } => false,
        }
    }

    /// True when the subtree is affine in `(x, y)` (constants, affine atoms,
    /// quadratics with zero matrix, closed under sums and scaling).
    pub fn is_affine(&self) -> bool {
        match self {
            Expr::Constant { .. } | Expr::Affine { .. } => true,
            Expr::Quad { q, .. } => q.iter().flatten().all(|v| *v == 0.0),
            Expr::Add { children } => children.iter().all(|c| c.is_affine()),
            Expr::Scale { child, .. } => child.is_affine(),
            _ => false,
        }
    }

    /// Value and gradient in `(x, y)` of a smooth subtree. `grad` must have
    /// length `d + m`; it is overwritten.
    pub fn value_grad(&self, args: Args<'_>, grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        self.accumulate_grad(args, 1.0, grad)
    }

    fn accumulate_grad(&self, args: Args<'_>, weight: f64, grad: &mut [f64]) -> f64 {
        let d = args.x.len();
        match self {
            Expr::Constant { value } => *value,
            Expr::Affine { cx, cy, .. } => {
                for (g, c) in grad.iter_mut().zip(cx) {
                    *g += weight * c;
                }
                for (g, c) in grad[d..].iter_mut().zip(cy) {
                    *g += weight * c;
                }
                self.eval(args)
            }
            Expr::Quad { q, lin, .. } => {
                let n = q.len();
                for i in 0..n {
                    let mut qz = lin.get(i).copied().unwrap_or(0.0);
                    for (j, qij) in q[i].iter().enumerate() {
                        qz += qij * args.z(j);
                    }
                    grad[i] += weight * qz;
                }
                self.eval(args)
            }
            Expr::Add { children } => children
                .iter()
                .map(|c| c.accumulate_grad(args, weight, grad))
                .sum(),
            Expr::Scale { lambda, child } => {
                lambda * child.accumulate_grad(args, weight * lambda, grad)
            }
            _ => panic!("value_grad called on a nonsmooth expression"),
        }
    }

    /// Collapses a smooth subtree into a single quadratic polynomial.
    pub fn quad_form(&self, dims: Dims) -> Option<QuadForm> {
        let n = dims.n();
        let mut out = QuadForm::zero(n, dims.q);
        match self {
            Expr::Constant { value } => out.c0 = *value,
            Expr::Affine { c0, cx, cy, ct } => {
                out.c0 = *c0;
                out.lin[..cx.len()].copy_from_slice(cx);
                out.lin[dims.d..dims.d + cy.len()].copy_from_slice(cy);
                out.ct[..ct.len()].copy_from_slice(ct);
            }
            Expr::Quad { q, lin, c0, .. } => {
                out.q = DMatrix::from_fn(n, n, |i, j| q[i][j]);
                out.lin[..lin.len()].copy_from_slice(lin);
                out.c0 = *c0;
            }
            Expr::Add { children } => {
                for c in children {
                    out.axpy(1.0, &c.quad_form(dims)?);
                }
            }
            Expr::Scale { lambda, child } => out.axpy(*lambda, &child.quad_form(dims)?),
            _ => return None,
        }
        Some(out)
    }

    /// Number of nodes in the tree (shared subtrees counted per use).
    pub fn size(&self) -> usize {
        1 + match self {
            Expr::Add { children } | Expr::Max { children } | Expr::Min { children } => {
                children.iter().map(|c| c.size()).sum()
            }
            Expr::Scale { child, .. } | Expr::Abs { child } => child.size(),
            Expr::Dc { plus, minus } => plus.size() + minus.size(),
            _ => 0,
        }
    }

    pub fn is_zero_constant(&self) -> bool {
        matches!(self, Expr::Constant { value } if *value == 0.0)
    }

    /// Splits the expression into two structurally convex parts `(p, q)` with
    /// `self = p − q` pointwise.
    pub fn dc_split(self: &Arc<Self>, dims: Dims) -> Result<(ExprRef, ExprRef)> {
        if self.is_convex() {
            return Ok((self.clone(), constant(0.0)));
        }
        match self.as_ref() {
            Expr::Constant { .. } | Expr::Affine { .. } => unreachable!("affine is convex"),
            Expr::Quad { q, lin, c0, .. } => {
                let n = q.len();
                let mat = DMatrix::from_fn(n, n, |i, j| 0.5 * (q[i][j] + q[j][i]));
                let eig = SymmetricEigen::new(mat);
                let mut pos = DMatrix::zeros(n, n);
                let mut neg = DMatrix::zeros(n, n);
                for (k, &lam) in eig.eigenvalues.iter().enumerate() {
                    let v = eig.eigenvectors.column(k);
                    let outer = v * v.transpose();
                    if lam > 0.0 {
                        pos += outer * lam;
                    } else if lam < 0.0 {
                        neg -= outer * lam;
                    }
                }
                let to_rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
                    (0..n)
                        .map(|i| (0..n).map(|j| 0.5 * (m[(i, j)] + m[(j, i)])).collect())
                        .collect()
                };
                let plus = Arc::new(Expr::Quad {
                    q: to_rows(&pos),
                    lin: lin.clone(),
                    c0: *c0,
                    psd: true,
                });
                let minus = Arc::new(Expr::Quad {
                    q: to_rows(&neg),
                    lin: Vec::new(),
                    c0: 0.0,
                    psd: true,
                });
                Ok((plus, minus))
            }
            Expr::Add { children } => {
                let mut ps = Vec::new();
                let mut qs = Vec::new();
                for c in children {
                    let (p, q) = c.dc_split(dims)?;
                    ps.push(p);
                    qs.push(q);
                }
                Ok((simplify_add(ps), simplify_add(qs)))
            }
            Expr::Scale { lambda, child } => {
                let (p, q) = child.dc_split(dims)?;
                if *lambda >= 0.0 {
                    Ok((simplify_scale(*lambda, p), simplify_scale(*lambda, q)))
                } else {
                    Ok((simplify_scale(-lambda, q), simplify_scale(-lambda, p)))
                }
            }
            Expr::Max { children } => {
                let parts = children
                    .iter()
                    .map(|c| c.dc_split(dims))
                    .collect::<Result<Vec<_>>>()?;
                Ok(split_max(&parts))
            }
            Expr::Min { children } => {
                // min_i e_i = −max_i(−e_i); the split of −e_i swaps the parts.
                let parts = children
                    .iter()
                    .map(|c| c.dc_split(dims).map(|(p, q)| (q, p)))
                    .collect::<Result<Vec<_>>>()?;
                let (p, q) = split_max(&parts);
                Ok((q, p))
            }
            Expr::Abs { child } => {
                let (p, q) = child.dc_split(dims)?;
                Ok(split_max(&[(p.clone(), q.clone()), (q, p)]))
            }
            Expr::Dc { plus, minus } => Ok((plus.clone(), minus.clone())),
        }
    }
}

/// `max_i (p_i − q_i) = max_i (p_i + Σ_{k≠i} q_k) − Σ_k q_k`.
fn split_max(parts: &[(ExprRef, ExprRef)]) -> (ExprRef, ExprRef) {
    let branches = (0..parts.len())
        .map(|i| {
            let mut terms = vec![parts[i].0.clone()];
            terms.extend(
                parts
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != i)
                    .map(|(_, (_, q))| q.clone()),
            );
            simplify_add(terms)
        })
        .collect::<Vec<_>>();
    let minus = simplify_add(parts.iter().map(|(_, q)| q.clone()).collect());
    let plus = if branches.len() == 1 {
        branches.into_iter().next().unwrap()
    } else {
        max(branches)
    };
    (plus, minus)
}

/// Sum that drops zero constants and unwraps singletons.
pub fn simplify_add(children: Vec<ExprRef>) -> ExprRef {
    let mut kept: Vec<ExprRef> = children.into_iter().filter(|c| !c.is_zero_constant()).collect();
    match kept.len() {
        0 => constant(0.0),
        1 => kept.pop().unwrap(),
        _ => add(kept),
    }
}

/// Scaling that folds the trivial factors 0 and 1.
pub fn simplify_scale(lambda: f64, child: ExprRef) -> ExprRef {
    if lambda == 0.0 || child.is_zero_constant() {
        constant(0.0)
    } else if lambda == 1.0 {
        child
    } else {
        scale(lambda, child)
    }
}

fn finite(v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidValue(format!("non-finite coefficient {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x1() -> ExprRef {
        affine(0.0, vec![1.0], vec![], vec![])
    }

    #[test]
    fn eval_examples() {
        let a = Args::new(&[-2.0], &[], &[]);
        assert_eq!(abs(x1()).eval(a), 2.0);
        let a0 = Args::new(&[0.0], &[], &[]);
        assert_eq!(max(vec![x1(), scale(-1.0, x1())]).eval(a0), 0.0);
        // (x1 − 1)² + (y1 − 1)² = ½ zᵀ(2I)z − 2x − 2y + 2
        let f = quad(vec![vec![2.0, 0.0], vec![0.0, 2.0]], vec![-2.0, -2.0], 2.0);
        assert_eq!(f.eval(Args::new(&[1.0], &[1.0], &[])), 0.0);
    }

    #[test]
    fn dimension_mismatch_names_block() {
        let f = affine(0.0, vec![1.0], vec![1.0, 2.0], vec![]);
        let dims = Dims::new(1, 2, 0);
        let err = f
            .eval_checked(dims, Args::new(&[1.0], &[1.0], &[]))
            .unwrap_err();
        assert!(matches!(
            err,
            Error::DimMismatch {
                block: VarBlock::Y,
                expected: 2,
                found: 1
            }
        ));
        assert!(matches!(
            f.validate(Dims::new(2, 2, 0)),
            Err(Error::DimMismatch { block: VarBlock::X, .. })
        ));
    }

    #[test]
    fn dc_children_must_be_convex() {
        let concave = min(vec![x1(), scale(-1.0, x1())]);
        let bad = dc(concave, x1());
        assert!(matches!(
            bad.validate(Dims::new(1, 0, 0)),
            Err(Error::DcNotConvex { which: "plus" })
        ));
        let concave_max = max(vec![quad(vec![vec![-1.0]], vec![], 0.0), x1()]);
        assert!(dc(x1(), concave_max).validate(Dims::new(1, 0, 0)).is_err());
    }

    #[test]
    fn psd_flag_is_verified() {
        let bad = Expr::Quad {
            q: vec![vec![1.0, 0.0], vec![0.0, -1.0]],
            lin: vec![],
            c0: 0.0,
            psd: true,
        };
        assert!(matches!(bad.validate(Dims::new(2, 0, 0)), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn value_grad_matches_quad_form() {
        let dims = Dims::new(1, 1, 1);
        let f = add(vec![
            quad(vec![vec![2.0, 1.0], vec![1.0, 4.0]], vec![0.5, -1.0], 3.0),
            scale(-2.0, affine(1.0, vec![1.0], vec![2.0], vec![3.0])),
        ]);
        let (x, y, t) = ([0.3], [-0.7], [2.0]);
        let mut g = vec![0.0; 2];
        let v = f.value_grad(Args::new(&x, &y, &t), &mut g);
        assert!((v - f.eval(Args::new(&x, &y, &t))).abs() < 1e-14);
        let qf = f.quad_form(dims).unwrap();
        let z = [0.3, -0.7];
        for i in 0..2 {
            let gi = qf.lin[i] + (0..2).map(|j| qf.q[(i, j)] * z[j]).sum::<f64>();
            assert!((gi - g[i]).abs() < 1e-14);
        }
        assert_eq!(qf.ct, vec![-6.0]);
    }

    #[test]
    fn dc_split_reproduces_values() {
        let dims = Dims::new(1, 1, 0);
        let y = affine(0.0, vec![], vec![1.0], vec![]);
        let f = add(vec![
            abs(add(vec![x1(), scale(-1.0, y.clone())])),
            min(vec![quad(vec![vec![1.0, 0.0], vec![0.0, -2.0]], vec![], 0.0), y]),
        ]);
        let f = Arc::new((*f).clone());
        let (p, q) = f.dc_split(dims).unwrap();
        assert!(p.is_convex() && q.is_convex());
        for k in 0..25 {
            let x = [(k as f64) * 0.37 - 4.0];
            let yv = [2.0 - (k as f64) * 0.21];
            let a = Args::new(&x, &yv, &[]);
            assert!((f.eval(a) - (p.eval(a) - q.eval(a))).abs() < 1e-12);
        }
    }

    #[test]
    fn json_schema_round_trip() {
        let text = r#"{"kind":"max","children":[
            {"kind":"affine","c0":1.0,"cx":[1.0],"cy":[],"ct":[]},
            {"kind":"quad","Q":[[2.0]],"lin":[0.0],"c0":0.0,"psd":true},
            {"kind":"dc","plus":{"kind":"abs","child":{"kind":"affine","cx":[1.0]}},
                         "minus":{"kind":"scale","lambda":2.0,"child":{"kind":"constant","value":1.0}}}
        ]}"#;
        let e: Expr = serde_json::from_str(text).unwrap();
        e.validate(Dims::new(1, 0, 0)).unwrap();
        let again: Expr = serde_json::from_str(&serde_json::to_string(&e).unwrap()).unwrap();
        assert_eq!(e, again);
    }
}
