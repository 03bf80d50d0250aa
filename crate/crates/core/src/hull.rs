//! Minimum-norm points of polytopes given by vertices.
//!
//! Both entry points run Wolfe's corral algorithm. For a single vertex set
//! the linear minimization oracle scans the vertices; for a Minkowski sum of
//! vertex sets it scans each summand independently, so the (exponentially
//! large) vertex set of the sum is never enumerated.

use nalgebra::{DMatrix, DVector};

/// Violation allowed in the optimality certificate `⟨q, v − q⟩ ≥ −tol`.
pub const CERT_TOL: f64 = 1e-9;

const MAX_MAJOR: usize = 20_000;
const MAX_MINOR: usize = 1_000;

#[derive(Debug, Clone, PartialEq)]
pub struct MinNorm {
    /// The minimum-norm point of the convex hull.
    pub point: Vec<f64>,
    /// Convex-combination coefficients, one per input vertex.
    pub coefficients: Vec<f64>,
}

impl MinNorm {
    pub fn norm(&self) -> f64 {
        norm(&self.point)
    }
}

/// One summand of a Minkowski sum: a vertex set living on a subset of the
/// ambient coordinates.
#[derive(Debug, Clone)]
pub struct Block {
    /// Ambient coordinate of each local coordinate.
    pub coords: Vec<usize>,
    /// Vertices in local coordinates.
    pub vertices: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SumMinNorm {
    pub point: Vec<f64>,
    /// Barycentric weights per block per vertex.
    pub weights: Vec<Vec<f64>>,
}

impl SumMinNorm {
    pub fn norm(&self) -> f64 {
        norm(&self.point)
    }

    /// Local-coordinate point contributed by block `b`.
    pub fn block_point(&self, blocks: &[Block], b: usize) -> Vec<f64> {
        let block = &blocks[b];
        let mut out = vec![0.0; block.coords.len()];
        for (w, v) in self.weights[b].iter().zip(&block.vertices) {
            if *w != 0.0 {
                for (o, vi) in out.iter_mut().zip(v) {
                    *o += w * vi;
                }
            }
        }
        out
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimum-norm point of `co(vertices)` with simplex coefficients.
///
/// Panics when `vertices` is empty or the vertices differ in length.
pub fn min_norm_point(vertices: &[Vec<f64>]) -> MinNorm {
    assert!(!vertices.is_empty(), "min_norm_point needs at least one vertex");
    let dim = vertices[0].len();
    assert!(vertices.iter().all(|v| v.len() == dim));
    let block = Block {
        coords: (0..dim).collect(),
        vertices: vertices.to_vec(),
    };
    let res = min_norm_minkowski(dim, std::slice::from_ref(&block));
    MinNorm {
        point: res.point,
        coefficients: res.weights.into_iter().next().unwrap(),
    }
}

/// Euclidean distance from `p` to `co(vertices)`.
pub fn dist_to_hull(p: &[f64], vertices: &[Vec<f64>]) -> f64 {
    let shifted: Vec<Vec<f64>> = vertices
        .iter()
        .map(|v| v.iter().zip(p).map(|(a, b)| a - b).collect())
        .collect();
    min_norm_point(&shifted).norm()
}

#[derive(Debug, Clone)]
struct Atom {
    choice: Vec<usize>,
    vec: Vec<f64>,
}

fn assemble(dim: usize, blocks: &[Block], choice: &[usize]) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    for (block, &k) in blocks.iter().zip(choice) {
        for (&c, val) in block.coords.iter().zip(&block.vertices[k]) {
            v[c] += val;
        }
    }
    v
}

fn oracle(dim: usize, blocks: &[Block], dir: &[f64]) -> Atom {
    let choice: Vec<usize> = blocks
        .iter()
        .map(|block| {
            let mut best = 0;
            let mut best_val = f64::INFINITY;
            for (k, v) in block.vertices.iter().enumerate() {
                let val: f64 = block.coords.iter().zip(v).map(|(&c, vi)| dir[c] * vi).sum();
                if val < best_val {
                    best_val = val;
                    best = k;
                }
            }
            best
        })
        .collect();
    let vec = assemble(dim, blocks, &choice);
    Atom { choice, vec }
}

/// Coefficients (summing to one) of the minimum-norm point of the affine hull.
fn affine_minimizer(atoms: &[Atom]) -> Vec<f64> {
    let k = atoms.len();
    if k == 1 {
        return vec![1.0];
    }
    let dim = atoms[0].vec.len();
    let base = &atoms[0].vec;
    let b = DMatrix::from_fn(dim, k - 1, |i, j| atoms[j + 1].vec[i] - base[i]);
    let rhs = DVector::from_fn(dim, |i, _| -base[i]);
    let svd = b.svd(true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let beta = svd
        .solve(&rhs, 1e-13 * max_sv.max(1e-300))
        .unwrap_or_else(|_| DVector::zeros(k - 1));
    let mut alpha = Vec::with_capacity(k);
    alpha.push(1.0 - beta.iter().sum::<f64>());
    alpha.extend(beta.iter());
    alpha
}

fn combine(dim: usize, atoms: &[Atom], lambda: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; dim];
    for (a, &l) in atoms.iter().zip(lambda) {
        for (xi, ai) in x.iter_mut().zip(&a.vec) {
            *xi += l * ai;
        }
    }
    x
}

/// Minimum-norm point of the Minkowski sum `Σ_b co(blocks[b])` in an ambient
/// space of dimension `dim`.
pub fn min_norm_minkowski(dim: usize, blocks: &[Block]) -> SumMinNorm {
    assert!(blocks.iter().all(|b| !b.vertices.is_empty()));
    let scale: f64 = blocks
        .iter()
        .map(|b| b.vertices.iter().map(|v| norm(v)).fold(0.0, f64::max))
        .sum::<f64>()
        .max(1e-300);
    let gap_tol = 1e-15 * scale * scale;
    let pos_tol = 1e-14;

    // Start from the best single atom among a few oracle calls.
    let centroid = {
        let mut c = vec![0.0; dim];
        for b in blocks {
            let inv = 1.0 / b.vertices.len() as f64;
            for v in &b.vertices {
                for (&ci, vi) in b.coords.iter().zip(v) {
                    c[ci] += inv * vi;
                }
            }
        }
        c
    };
    let mut atoms = vec![oracle(dim, blocks, &centroid)];
    let mut lambda = vec![1.0];
    let mut x = atoms[0].vec.clone();

    for _ in 0..MAX_MAJOR {
        let xx = dot(&x, &x);
        if xx <= 1e-300 {
            break;
        }
        let q = oracle(dim, blocks, &x);
        let gap = xx - dot(&x, &q.vec);
        if gap <= gap_tol {
            break;
        }
        if atoms.iter().any(|a| a.choice == q.choice) {
            break;
        }
        atoms.push(q);
        lambda.push(0.0);

        let mut minor = 0;
        loop {
            minor += 1;
            let alpha = affine_minimizer(&atoms);
            if alpha.iter().all(|&a| a > pos_tol) {
                lambda = alpha;
                break;
            }
            let mut theta = 1.0f64;
            for (l, a) in lambda.iter().zip(&alpha) {
                if *a <= pos_tol && l - a > 0.0 {
                    theta = theta.min(l / (l - a));
                }
            }
            let theta = theta.clamp(0.0, 1.0);
            for (l, a) in lambda.iter_mut().zip(&alpha) {
                *l = theta * a + (1.0 - theta) * *l;
            }
            // Drop atoms whose weight vanished; keep at least one.
            let mut keep: Vec<bool> = lambda.iter().map(|&l| l > pos_tol).collect();
            if !keep.iter().any(|&k| k) {
                let best = lambda
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(i, _)| i)
                    .unwrap();
                keep[best] = true;
            }
            let mut i = 0;
            atoms.retain(|_| {
                let k = keep[i];
                i += 1;
                k
            });
            let mut i = 0;
            lambda.retain(|_| {
                let k = keep[i];
                i += 1;
                k
            });
            let s: f64 = lambda.iter().sum();
            lambda.iter_mut().for_each(|l| *l /= s);
            if minor >= MAX_MINOR || atoms.len() == 1 {
                break;
            }
        }
        let next = combine(dim, &atoms, &lambda);
        let stalled = dot(&next, &next) >= xx;
        x = next;
        if stalled {
            break;
        }
    }

    let mut weights: Vec<Vec<f64>> = blocks.iter().map(|b| vec![0.0; b.vertices.len()]).collect();
    for (a, &l) in atoms.iter().zip(&lambda) {
        for (w, &k) in weights.iter_mut().zip(&a.choice) {
            w[k] += l;
        }
    }
    // Recompute from weights so the point is exactly the reported combination.
    let mut point = vec![0.0; dim];
    for (block, w) in blocks.iter().zip(&weights) {
        for (v, &wk) in block.vertices.iter().zip(w) {
            if wk != 0.0 {
                for (&c, vi) in block.coords.iter().zip(v) {
                    point[c] += wk * vi;
                }
            }
        }
    }
    SumMinNorm { point, weights }
}
