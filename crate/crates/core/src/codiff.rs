//! Finite-vertex codifferential calculus.
//!
//! A codifferential of `f` at `z` is stored as two vertex sets in `ℝ × ℝⁿ`
//! (hypo- and hyperdifferential); their convex hulls are the actual sets.
//! The first-order model is
//!
//! ```text
//! f(z + Δ) − f(z) ≈ max_{(a,v) ∈ hypo} (a + ⟨v, Δ⟩) + min_{(b,w) ∈ hyper} (b + ⟨w, Δ⟩)
//! ```
//!
//! with `max a = 0` over the hypodifferential and `min b = 0` over the
//! hyperdifferential. Vertices with strictly negative (positive) offsets
//! encode nearby pieces of a max (min) that are not active at `z`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Args, Dims, Expr};
use crate::hull;

/// Offset tolerance for zero-offset vertex selection.
pub const TOL_ZERO: f64 = 1e-9;
/// Hard cap on vertices per set.
pub const MAX_VERTICES: usize = 4096;
/// Sets larger than this are pruned to their extreme points.
pub const PRUNE_THRESHOLD: usize = 256;
/// Absolute tolerance of the hull-membership test used by pruning.
pub const TOL_HULL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugVector {
    /// Offset coordinate, in units of the function value.
    pub a: f64,
    /// Gradient-space coordinates over `(x, y)`.
    pub v: Vec<f64>,
}

impl AugVector {
    pub fn new(a: f64, v: Vec<f64>) -> Self {
        AugVector { a, v }
    }

    fn zero(n: usize) -> Self {
        AugVector { a: 0.0, v: vec![0.0; n] }
    }

    fn neg(&self) -> Self {
        AugVector {
            a: -self.a,
            v: self.v.iter().map(|x| -x).collect(),
        }
    }

    fn scaled(&self, s: f64) -> Self {
        AugVector {
            a: s * self.a,
            v: self.v.iter().map(|x| s * x).collect(),
        }
    }

    fn plus(&self, other: &AugVector) -> Self {
        AugVector {
            a: self.a + other.a,
            v: self.v.iter().zip(&other.v).map(|(x, y)| x + y).collect(),
        }
    }

    fn shifted(&self, da: f64) -> Self {
        AugVector {
            a: self.a + da,
            v: self.v.clone(),
        }
    }

    /// `a + ⟨v, Δ⟩`.
    pub fn affine_at(&self, delta: &[f64]) -> f64 {
        self.a + hull::dot(&self.v, delta)
    }

    /// Coordinates `(a, v)` as one flat vector.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(1 + self.v.len());
        out.push(self.a);
        out.extend_from_slice(&self.v);
        out
    }

    fn key(&self) -> Vec<u64> {
        std::iter::once(self.a)
            .chain(self.v.iter().copied())
            .map(|x| if x == 0.0 { 0u64 } else { x.to_bits() })
            .collect()
    }
}

/// Hypodifferential / hyperdifferential pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodiffPair {
    pub hypo: Vec<AugVector>,
    pub hyper: Vec<AugVector>,
    pub dim: usize,
}

/// Sub- / superdifferential pair of vertex sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasidiffPair {
    pub sub: Vec<Vec<f64>>,
    pub sup: Vec<Vec<f64>>,
}

impl QuasidiffPair {
    /// `f′(z; h) = max_{v ∈ sub} ⟨v, h⟩ + min_{w ∈ sup} ⟨w, h⟩`.
    pub fn dirderiv(&self, h: &[f64]) -> f64 {
        let hi = self
            .sub
            .iter()
            .map(|v| hull::dot(v, h))
            .fold(f64::NEG_INFINITY, f64::max);
        let lo = self
            .sup
            .iter()
            .map(|w| hull::dot(w, h))
            .fold(f64::INFINITY, f64::min);
        hi + lo
    }
}

impl CodiffPair {
    /// Codifferential of a function differentiable at the point.
    pub fn smooth(grad: Vec<f64>) -> Self {
        let n = grad.len();
        CodiffPair {
            hypo: vec![AugVector::new(0.0, grad)],
            hyper: vec![AugVector::zero(n)],
            dim: n,
        }
    }

    pub fn max_hypo_offset(&self) -> f64 {
        self.hypo.iter().map(|p| p.a).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_hyper_offset(&self) -> f64 {
        self.hyper.iter().map(|p| p.a).fold(f64::INFINITY, f64::min)
    }

    /// First-order model value `Φ(Δ) + Ψ(Δ)`.
    pub fn expansion_value(&self, delta: &[f64]) -> f64 {
        debug_assert_eq!(delta.len(), self.dim);
        let hi = self
            .hypo
            .iter()
            .map(|p| p.affine_at(delta))
            .fold(f64::NEG_INFINITY, f64::max);
        let lo = self
            .hyper
            .iter()
            .map(|p| p.affine_at(delta))
            .fold(f64::INFINITY, f64::min);
        hi + lo
    }

    /// Zero-offset slices of both sets.
    pub fn quasidiff(&self) -> Result<QuasidiffPair> {
        let sub: Vec<Vec<f64>> = self
            .hypo
            .iter()
            .filter(|p| p.a.abs() <= TOL_ZERO)
            .map(|p| p.v.clone())
            .collect();
        let sup: Vec<Vec<f64>> = self
            .hyper
            .iter()
            .filter(|p| p.a.abs() <= TOL_ZERO)
            .map(|p| p.v.clone())
            .collect();
        if sub.is_empty() || sup.is_empty() {
            return Err(Error::Inconsistent(
                "codifferential has no zero-offset vertex".into(),
            ));
        }
        Ok(QuasidiffPair { sub, sup })
    }

    /// Removes vertices that are not extreme points of their hull.
    pub fn prune(&self) -> CodiffPair {
        CodiffPair {
            hypo: prune_set(&self.hypo),
            hyper: prune_set(&self.hyper),
            dim: self.dim,
        }
    }

    fn check_normalized(&self) -> Result<()> {
        let hi = self.max_hypo_offset();
        let lo = self.min_hyper_offset();
        if hi.abs() > TOL_ZERO || lo.abs() > TOL_ZERO {
            return Err(Error::Inconsistent(format!(
                "offset normalization violated: max a = {hi}, min b = {lo}"
            )));
        }
        Ok(())
    }
}

/// Drops exact duplicates, keeping first occurrences.
fn dedup(set: Vec<AugVector>) -> Vec<AugVector> {
    let mut seen = HashSet::new();
    set.into_iter().filter(|p| seen.insert(p.key())).collect()
}

/// Extreme points of a vertex set, in original order.
pub fn prune_set(set: &[AugVector]) -> Vec<AugVector> {
    let mut pts = dedup(set.to_vec());
    if pts.len() <= 1 {
        return pts;
    }
    let flat: Vec<Vec<f64>> = pts.iter().map(|p| p.flat()).collect();
    let dim = flat[0].len();
    // Unique maximizers along coordinate directions are extreme.
    let mut certain = vec![false; pts.len()];
    for k in 0..dim {
        for sign in [1.0, -1.0] {
            let vals: Vec<f64> = flat.iter().map(|p| sign * p[k]).collect();
            let best = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let arg: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] == best).collect();
            if arg.len() == 1 {
                certain[arg[0]] = true;
            }
        }
    }
    let mut alive = vec![true; pts.len()];
    for i in 0..pts.len() {
        if certain[i] {
            continue;
        }
        let others: Vec<Vec<f64>> = (0..pts.len())
            .filter(|&j| j != i && alive[j])
            .map(|j| flat[j].clone())
            .collect();
        if others.is_empty() {
            continue;
        }
        if hull::dist_to_hull(&flat[i], &others) <= TOL_HULL {
            alive[i] = false;
        }
    }
    let mut i = 0;
    pts.retain(|_| {
        let keep = alive[i];
        i += 1;
        keep
    });
    pts
}

fn control(set: Vec<AugVector>) -> Result<Vec<AugVector>> {
    let set = dedup(set);
    let set = if set.len() > PRUNE_THRESHOLD {
        prune_set(&set)
    } else {
        set
    };
    if set.len() > MAX_VERTICES {
        return Err(Error::VertexCap {
            count: set.len(),
            cap: MAX_VERTICES,
        });
    }
    Ok(set)
}

fn minkowski(a: &[AugVector], b: &[AugVector]) -> Result<Vec<AugVector>> {
    let count = a.len() * b.len();
    if count > MAX_VERTICES {
        return Err(Error::VertexCap {
            count,
            cap: MAX_VERTICES,
        });
    }
    let mut out = Vec::with_capacity(count);
    for p in a {
        for q in b {
            out.push(p.plus(q));
        }
    }
    control(out)
}

fn minkowski_all<'a>(sets: impl Iterator<Item = &'a [AugVector]>, n: usize) -> Result<Vec<AugVector>> {
    let mut acc = vec![AugVector::zero(n)];
    for s in sets {
        acc = minkowski(&acc, s)?;
    }
    Ok(acc)
}

fn negate(set: &[AugVector]) -> Vec<AugVector> {
    set.iter().map(AugVector::neg).collect()
}

struct Node {
    value: f64,
    hypo: Vec<AugVector>,
    hyper: Vec<AugVector>,
}

/// Max rule: `hyper = Σ_k hyper_k`,
/// `hypo = ∪_i { (f_i − f, 0) + hypo_i − Σ_{k≠i} hyper_k }`.
fn max_rule(children: Vec<Node>, n: usize) -> Result<Node> {
    let value = children
        .iter()
        .map(|c| c.value)
        .fold(f64::NEG_INFINITY, f64::max);
    let hyper = minkowski_all(children.iter().map(|c| c.hyper.as_slice()), n)?;
    let negs: Vec<Vec<AugVector>> = children.iter().map(|c| negate(&c.hyper)).collect();
    let mut hypo = Vec::new();
    for (i, c) in children.iter().enumerate() {
        let others = minkowski_all(
            negs.iter()
                .enumerate()
                .filter(|(k, _)| *k != i)
                .map(|(_, s)| s.as_slice()),
            n,
        )?;
        let shift = c.value - value;
        let part = minkowski(&c.hypo, &others)?;
        hypo.extend(part.into_iter().map(|p| p.shifted(shift)));
    }
    Ok(Node {
        value,
        hypo: control(hypo)?,
        hyper,
    })
}

/// Mirror of [`max_rule`] with the roles of the two sets exchanged.
fn min_rule(children: Vec<Node>, n: usize) -> Result<Node> {
    let flipped: Vec<Node> = children
        .into_iter()
        .map(|c| Node {
            value: -c.value,
            hypo: negate(&c.hyper),
            hyper: negate(&c.hypo),
        })
        .collect();
    let m = max_rule(flipped, n)?;
    Ok(Node {
        value: -m.value,
        hypo: negate(&m.hyper),
        hyper: negate(&m.hypo),
    })
}

fn build(e: &Expr, args: Args<'_>, n: usize) -> Result<Node> {
    if e.is_smooth() {
        let mut g = vec![0.0; n];
        let value = e.value_grad(args, &mut g);
        return Ok(Node {
            value,
            hypo: vec![AugVector::new(0.0, g)],
            hyper: vec![AugVector::zero(n)],
        });
    }
    match e {
        Expr::Add { children } => {
            let mut value = 0.0;
            let mut hypo = vec![AugVector::zero(n)];
            let mut hyper = vec![AugVector::zero(n)];
            for c in children {
                let node = build(c, args, n)?;
                value += node.value;
                hypo = minkowski(&hypo, &node.hypo)?;
                hyper = minkowski(&hyper, &node.hyper)?;
            }
            Ok(Node { value, hypo, hyper })
        }
        Expr::Scale { lambda, child } => {
            let node = build(child, args, n)?;
            let s = *lambda;
            let (hypo, hyper) = if s >= 0.0 {
                (node.hypo, node.hyper)
            } else {
                (node.hyper, node.hypo)
            };
            Ok(Node {
                value: s * node.value,
                hypo: dedup(hypo.iter().map(|p| p.scaled(s)).collect()),
                hyper: dedup(hyper.iter().map(|p| p.scaled(s)).collect()),
            })
        }
        Expr::Max { children } => {
            let nodes = children
                .iter()
                .map(|c| build(c, args, n))
                .collect::<Result<Vec<_>>>()?;
            max_rule(nodes, n)
        }
        Expr::Min { children } => {
            let nodes = children
                .iter()
                .map(|c| build(c, args, n))
                .collect::<Result<Vec<_>>>()?;
            min_rule(nodes, n)
        }
        Expr::Abs { child } => {
            // |u| = max(u, −u); a smooth −u keeps its gradient in the hypodifferential.
            let u = build(child, args, n)?;
            let neg = if child.is_smooth() {
                Node {
                    value: -u.value,
                    hypo: negate(&u.hypo),
                    hyper: vec![AugVector::zero(n)],
                }
            } else {
                Node {
                    value: -u.value,
                    hypo: negate(&u.hyper),
                    hyper: negate(&u.hypo),
                }
            };
            max_rule(vec![u, neg], n)
        }
        Expr::Dc { plus, minus } => {
            let p = build(plus, args, n)?;
            let q = build(minus, args, n)?;
            let hypo = minkowski(&p.hypo, &negate(&q.hyper))?;
            let mut hyper = minkowski(&p.hyper, &negate(&q.hypo))?;
            let lo = hyper.iter().map(|v| v.a).fold(f64::INFINITY, f64::min);
            if lo != 0.0 {
                hyper.iter_mut().for_each(|v| v.a -= lo);
            }
            Ok(Node {
                value: p.value - q.value,
                hypo,
                hyper,
            })
        }
        Expr::Constant { .. } | Expr::Affine { .. } | Expr::Quad { .. } => {
            unreachable!("smooth atoms handled above")
        }
    }
}

/// Value and codifferential of `e` at `args`, in dimension `d + m`.
///
/// `e` must have been validated for the dimensions of `args`.
pub fn codiff_with_value(e: &Expr, args: Args<'_>) -> Result<(f64, CodiffPair)> {
    let n = args.x.len() + args.y.len();
    let node = build(e, args, n)?;
    let cd = CodiffPair {
        hypo: node.hypo,
        hyper: node.hyper,
        dim: n,
    };
    cd.check_normalized()?;
    Ok((node.value, cd))
}

/// Codifferential of `e` at `args`, in dimension `d + m`.
pub fn codiff(e: &Expr, args: Args<'_>) -> Result<CodiffPair> {
    codiff_with_value(e, args).map(|(_, cd)| cd)
}

/// Dimension-checked variant of [`codiff`].
pub fn codiff_checked(e: &Expr, dims: Dims, args: Args<'_>) -> Result<CodiffPair> {
    e.eval_checked(dims, args)?;
    codiff(e, args)
}
