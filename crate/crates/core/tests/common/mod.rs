//! Shared test support: random expression DAGs, independent numerical
//! oracles and the tiny instances used by the grid comparisons.
#![allow(dead_code)]

use std::sync::Arc;

use codiffsp::expr::{self, Args, Expr, ExprRef};
use codiffsp::generate::{generate, SizeSpec};
use codiffsp::{FirstStageSet, ScenarioSpace, TwoStageProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize, sd: f64) -> Vec<f64> {
    (0..n).map(|_| sd * rng.sample::<f64, _>(rand_distr::StandardNormal)).collect()
}

pub fn unit_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v = normal_vec(rng, n, 1.0);
        let r = norm(&v);
        if r > 1e-3 {
            return v.iter().map(|a| a / r).collect();
        }
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// A point in `(x, y, θ)` with the joint `(x, y)` dimension `d + m`.
#[derive(Debug, Clone)]
pub struct Site {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub theta: Vec<f64>,
}

impl Site {
    pub fn args(&self) -> Args<'_> {
        Args::new(&self.x, &self.y, &self.theta)
    }

    pub fn n(&self) -> usize {
        self.x.len() + self.y.len()
    }

    pub fn moved(&self, t: f64, h: &[f64]) -> Site {
        let d = self.x.len();
        Site {
            x: self.x.iter().zip(&h[..d]).map(|(a, b)| a + t * b).collect(),
            y: self.y.iter().zip(&h[d..]).map(|(a, b)| a + t * b).collect(),
            theta: self.theta.clone(),
        }
    }

    pub fn random(rng: &mut ChaCha8Rng, d: usize, m: usize, q: usize) -> Site {
        Site {
            x: (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect(),
            y: (0..m).map(|_| rng.gen_range(-1.5..1.5)).collect(),
            theta: (0..q).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        }
    }
}

/// Random expression DAGs. With `anchor` set, every max/min/abs node is
/// shifted so that its pieces tie at the anchor, putting the kink exactly
/// there; otherwise nodes are anchored with probability one half.
pub struct DagGen<'a> {
    pub rng: ChaCha8Rng,
    pub d: usize,
    pub m: usize,
    pub q: usize,
    pub site: &'a Site,
    pub always_anchor: bool,
    /// Allow quadratic atoms.
    pub curved: bool,
    pool: Vec<ExprRef>,
}

impl<'a> DagGen<'a> {
    pub fn new(seed: u64, site: &'a Site, always_anchor: bool, curved: bool) -> Self {
        DagGen {
            rng: rng(seed),
            d: site.x.len(),
            m: site.y.len(),
            q: site.theta.len(),
            site,
            always_anchor,
            curved,
            pool: Vec::new(),
        }
    }

    fn value(&self, e: &Expr) -> f64 {
        e.eval(self.site.args())
    }

    fn anchor(&mut self) -> bool {
        self.always_anchor || self.rng.gen_bool(0.5)
    }

    fn shift(&self, e: ExprRef, by: f64) -> ExprRef {
        expr::add(vec![e, expr::constant(by)])
    }

    pub fn affine(&mut self) -> ExprRef {
        let c0 = self.rng.gen_range(-1.0..1.0);
        let cx = normal_vec(&mut self.rng, self.d, 1.0);
        let cy = normal_vec(&mut self.rng, self.m, 1.0);
        let ct = normal_vec(&mut self.rng, self.q, 0.5);
        expr::affine(c0, cx, cy, ct)
    }

    pub fn quad(&mut self, psd: bool) -> ExprRef {
        let n = self.d + self.m;
        let b: Vec<Vec<f64>> = (0..n).map(|_| normal_vec(&mut self.rng, n, 0.5)).collect();
        let q: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if psd {
                            (0..n).map(|k| b[i][k] * b[j][k]).sum()
                        } else {
                            0.5 * (b[i][j] + b[j][i])
                        }
                    })
                    .collect()
            })
            .collect();
        let lin = normal_vec(&mut self.rng, n, 1.0);
        expr::quad(q, lin, self.rng.gen_range(-1.0..1.0))
    }

    fn leaf(&mut self) -> ExprRef {
        if self.curved && self.rng.gen_bool(0.4) {
            let psd = self.rng.gen_bool(0.5);
            self.quad(psd)
        } else if self.rng.gen_bool(0.1) {
            expr::constant(self.rng.gen_range(-2.0..2.0))
        } else {
            self.affine()
        }
    }

    /// Structurally convex subtree.
    pub fn convex(&mut self, depth: usize) -> ExprRef {
        if depth == 0 || self.rng.gen_bool(0.3) {
            return if self.curved && self.rng.gen_bool(0.5) { self.quad(true) } else { self.affine() };
        }
        match self.rng.gen_range(0..3) {
            0 => {
                let k = 2;
                let mut children: Vec<ExprRef> = (0..k).map(|_| self.convex(depth - 1)).collect();
                if self.anchor() {
                    let vals: Vec<f64> = children.iter().map(|c| self.value(c)).collect();
                    let top = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    children = children.into_iter().zip(vals).map(|(c, v)| self.shift(c, top - v)).collect();
                }
                expr::max(children)
            }
            1 => {
                let k = 2;
                expr::add((0..k).map(|_| self.convex(depth - 1)).collect())
            }
            _ => {
                let lambda = self.rng.gen_range(0.2..2.0);
                expr::scale(lambda, self.convex(depth - 1))
            }
        }
    }

    /// General subtree of depth at most `depth`.
    pub fn any(&mut self, depth: usize) -> ExprRef {
        if !self.pool.is_empty() && self.rng.gen_bool(0.15) {
            let i = self.rng.gen_range(0..self.pool.len());
            return self.pool[i].clone();
        }
        let node = if depth == 0 || self.rng.gen_bool(0.2) {
            self.leaf()
        } else {
            match self.rng.gen_range(0..6) {
                0 | 1 => {
                    let k = 2;
                    let mut children: Vec<ExprRef> = (0..k).map(|_| self.any(depth - 1)).collect();
                    let is_max = self.rng.gen_bool(0.5);
                    if self.anchor() {
                        let vals: Vec<f64> = children.iter().map(|c| self.value(c)).collect();
                        let target = vals[0];
                        children = children.into_iter().zip(vals).map(|(c, v)| self.shift(c, target - v)).collect();
                    }
                    if is_max {
                        expr::max(children)
                    } else {
                        expr::min(children)
                    }
                }
                2 => {
                    let mut child = self.any(depth - 1);
                    if self.anchor() {
                        let v = self.value(&child);
                        child = self.shift(child, -v);
                    }
                    expr::abs(child)
                }
                3 => {
                    let k = 2;
                    expr::add((0..k).map(|_| self.any(depth - 1)).collect())
                }
                4 => {
                    let lambda = self.rng.gen_range(-2.0..2.0);
                    expr::scale(lambda, self.any(depth - 1))
                }
                _ => {
                    let p = self.convex(depth - 1);
                    let q = self.convex(depth - 1);
                    expr::dc(p, q)
                }
            }
        };
        self.pool.push(node.clone());
        node
    }
}

/// `K` with `|f(z + Δ) − f(z) − expansion(Δ)| ≤ ½ K |Δ|²`: quadratic atoms
/// contribute their spectral bound, sums add, max/min/abs keep the worst
/// branch and scaling multiplies.
pub fn curvature(e: &Expr) -> f64 {
    match e {
        Expr::Constant { .. } | Expr::Affine { .. } => 0.0,
        Expr::Quad { q, .. } => q.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>()).sum::<f64>().sqrt(),
        Expr::Add { children } => children.iter().map(|c| curvature(c)).sum(),
        Expr::Scale { lambda, child } => lambda.abs() * curvature(child),
        Expr::Max { children } | Expr::Min { children } => children.iter().map(|c| curvature(c)).fold(0.0, f64::max),
        Expr::Abs { child } => curvature(child),
        Expr::Dc { plus, minus } => curvature(plus) + curvature(minus),
    }
}

/// Sampled local Lipschitz bound on the unit ball around `site`.
pub fn sampled_lipschitz(e: &Expr, site: &Site, rng: &mut ChaCha8Rng, pairs: usize) -> f64 {
    let n = site.n();
    let mut best = 0.0f64;
    for _ in 0..pairs {
        let u = unit_vec(rng, n);
        let v = unit_vec(rng, n);
        let a = site.moved(rng.gen_range(0.0..1.0), &u);
        let b = site.moved(rng.gen_range(0.0..1.0), &v);
        let dist: f64 = norm(
            &a.x.iter().chain(&a.y).zip(b.x.iter().chain(&b.y)).map(|(p, q)| p - q).collect::<Vec<_>>(),
        );
        if dist > 1e-9 {
            best = best.max((e.eval(a.args()) - e.eval(b.args())).abs() / dist);
        }
    }
    best
}

/// One-sided derivative of `phi` at 0 by Richardson extrapolation of forward
/// differences at steps 1e-3, 1e-4 and 1e-5.
pub fn richardson(phi: impl Fn(f64) -> f64) -> f64 {
    let f0 = phi(0.0);
    let diff = |a: f64| (phi(a) - f0) / a;
    let (d1, d2, d3) = (diff(1e-3), diff(1e-4), diff(1e-5));
    let r1 = (10.0 * d2 - d1) / 9.0;
    let r2 = (10.0 * d3 - d2) / 9.0;
    (100.0 * r2 - r1) / 99.0
}

/// Relative discrepancy with unit floor.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

/// Exact minimum-norm point of `co V` by enumerating every subset of
/// vertices and solving its affine least-norm problem; the best feasible one
/// wins.
pub fn min_norm_by_faces(vertices: &[Vec<f64>]) -> f64 {
    use nalgebra::{DMatrix, DVector};
    let k = vertices.len();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << k) {
        let idx: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        let r = idx.len();
        // Minimize |Σ λ_i v_i|² s.t. Σ λ_i = 1 via the KKT system.
        let mut kkt = DMatrix::zeros(r + 1, r + 1);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                kkt[(a, b)] = vertices[i].iter().zip(&vertices[j]).map(|(p, q)| p * q).sum::<f64>();
            }
            kkt[(a, r)] = 1.0;
            kkt[(r, a)] = 1.0;
        }
        let mut rhs = DVector::zeros(r + 1);
        rhs[r] = 1.0;
        let Some(sol) = kkt.svd(true, true).solve(&rhs, 1e-13).ok() else { continue };
        if (0..r).any(|a| sol[a] < -1e-12) {
            continue;
        }
        let dim = vertices[0].len();
        let mut p = vec![0.0; dim];
        for (a, &i) in idx.iter().enumerate() {
            for (pk, vk) in p.iter_mut().zip(&vertices[i]) {
                *pk += sol[a] * vk;
            }
        }
        best = best.min(norm(&p));
    }
    best
}

/// Minimum of `|Σ λ_i v_i|` over the simplex lattice `λ ∈ h·ℕ^k`, refined
/// around the incumbent by halving `h` until it is at most `final_step`.
/// Coarser lattices are sublattices of finer ones, so faces of the simplex
/// stay on the grid at every level.
pub fn min_norm_by_simplex_grid(vertices: &[Vec<f64>], final_step: f64) -> f64 {
    let k = vertices.len();
    let dim = vertices[0].len();
    if k == 1 {
        return norm(&vertices[0]);
    }
    let eval = |idx: &[i64], n: i64| -> f64 {
        let mut p = vec![0.0; dim];
        let rest = n - idx.iter().sum::<i64>();
        for (i, v) in vertices.iter().enumerate() {
            let w = if i + 1 < k { idx[i] } else { rest } as f64 / n as f64;
            for (pk, vk) in p.iter_mut().zip(v) {
                *pk += w * vk;
            }
        }
        norm(&p)
    };
    // Lattice resolution 1/n over the first k−1 weights.
    let mut n: i64 = 10;
    let mut center = vec![0i64; k - 1];
    let mut radius = n;
    let mut best = f64::INFINITY;
    let mut incumbent = center.clone();
    loop {
        let mut counter: Vec<i64> = center.iter().map(|c| c - radius).collect();
        loop {
            let total: i64 = counter.iter().sum();
            if counter.iter().all(|&c| c >= 0) && total <= n {
                let v = eval(&counter, n);
                if v < best {
                    best = v;
                    incumbent = counter.clone();
                }
            }
            let mut j = 0;
            while j < k - 1 {
                counter[j] += 1;
                if counter[j] > center[j] + radius {
                    counter[j] = center[j] - radius;
                    j += 1;
                } else {
                    break;
                }
            }
            if j == k - 1 {
                break;
            }
        }
        if 1.0 / n as f64 <= final_step {
            return best;
        }
        n *= 2;
        center = incumbent.iter().map(|c| 2 * c).collect();
        incumbent = center.clone();
        radius = 6;
    }
}

/// Minimum over a refined grid of a convex function on a box in `ℝ^n`; each
/// level keeps a window of `keep` steps on either side of the incumbent.
pub fn zoom_grid_min(
    lo: &[f64],
    hi: &[f64],
    f: impl Fn(&[f64]) -> f64,
    final_step: f64,
    keep: f64,
) -> (f64, Vec<f64>) {
    let n = lo.len();
    let points = 40usize;
    let mut lo = lo.to_vec();
    let mut hi = hi.to_vec();
    let mut best = (f64::INFINITY, lo.clone());
    loop {
        let steps: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| (b - a) / points as f64).collect();
        let mut counter = vec![0usize; n];
        loop {
            let p: Vec<f64> = (0..n).map(|i| lo[i] + counter[i] as f64 * steps[i]).collect();
            let v = f(&p);
            if v < best.0 {
                best = (v, p);
            }
            let mut j = 0;
            while j < n {
                counter[j] += 1;
                if counter[j] > points {
                    counter[j] = 0;
                    j += 1;
                } else {
                    break;
                }
            }
            if j == n {
                break;
            }
        }
        let h = steps.iter().cloned().fold(0.0, f64::max);
        if h <= final_step {
            return best;
        }
        for i in 0..n {
            lo[i] = (best.1[i] - keep * steps[i]).max(lo[i]);
            hi[i] = (best.1[i] + keep * steps[i]).min(hi[i]);
        }
    }
}

/// Tiny generated instances (`d = m = 1`, at most two scenarios) used by the
/// grid comparisons. The seeds are ones whose constraints bind at the
/// optimum, so the penalty parameter matters.
pub fn tiny_instances() -> Vec<TwoStageProblem> {
    const CASES: [(u64, usize, usize, bool); 10] = [
        (0, 1, 1, false),
        (2, 2, 2, false),
        (5, 1, 2, true),
        (10, 2, 1, true),
        (15, 1, 1, false),
        (18, 2, 1, true),
        (21, 1, 2, true),
        (24, 2, 2, false),
        (28, 2, 1, true),
        (33, 1, 2, true),
    ];
    CASES
        .iter()
        .map(|&(seed, s, l, dc)| generate(seed, SizeSpec::new(1, 1, s, l, dc)).expect("generated"))
        .collect()
}

/// Dense grid over `A × [y_lo, y_hi]^S` for `d = m = 1`.
#[derive(Debug, Clone, Copy)]
pub struct Grid {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    pub step: f64,
}

impl Grid {
    pub fn nx(&self) -> usize {
        ((self.x_hi - self.x_lo) / self.step).round() as usize + 1
    }

    pub fn ny(&self) -> usize {
        ((self.y_hi - self.y_lo) / self.step).round() as usize + 1
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_lo + i as f64 * self.step
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_lo + j as f64 * self.step
    }
}

/// Grid argmin: value, x index and one y index per scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct GridArgmin {
    pub value: f64,
    pub ix: usize,
    pub iy: Vec<usize>,
}

impl GridArgmin {
    /// Largest index distance to another argmin, in grid steps.
    pub fn steps_from(&self, other: &GridArgmin) -> usize {
        let mut worst = self.ix.abs_diff(other.ix);
        for (a, b) in self.iy.iter().zip(&other.iy) {
            worst = worst.max(a.abs_diff(*b));
        }
        worst
    }
}

#[derive(Debug, Clone)]
pub struct GridSolution {
    pub constrained: GridArgmin,
    /// One argmin of `Φ_c` per requested `c`, in order.
    pub penalized: Vec<GridArgmin>,
    pub grid: Grid,
}

/// Brute force over every grid point: the constrained minimum of `𝓘` and
/// the minimum of `𝓘 + c·E[max{0, g}]` for each `c`, in one sweep.
pub fn grid_solve(prob: &TwoStageProblem, cs: &[f64], grid: Grid) -> GridSolution {
    assert_eq!((prob.d, prob.m), (1, 1));
    let ns = prob.num_scenarios();
    let probs = prob.probs().to_vec();
    let (nx, ny) = (grid.nx(), grid.ny());
    let ys: Vec<f64> = (0..ny).map(|j| grid.y(j)).collect();

    let mut best_con = GridArgmin { value: f64::INFINITY, ix: 0, iy: vec![0; ns] };
    let mut best_pen: Vec<GridArgmin> =
        cs.iter().map(|_| GridArgmin { value: f64::INFINITY, ix: 0, iy: vec![0; ns] }).collect();
    let mut fv = vec![0.0; ny];
    let mut gv = vec![0.0; ny];
    for ix in 0..nx {
        let x = [grid.x(ix)];
        let mut con_total = 0.0;
        let mut con_iy = vec![0; ns];
        let mut pen_total = vec![0.0; cs.len()];
        let mut pen_iy = vec![vec![0; ns]; cs.len()];
        for s in 0..ns {
            let theta = &prob.scenarios.params[s];
            for (j, &y) in ys.iter().enumerate() {
                let args = Args::new(&x, std::slice::from_ref(&y), theta);
                fv[j] = prob.f.eval(args);
                gv[j] = prob.g.iter().map(|g| g.eval(args)).fold(f64::NEG_INFINITY, f64::max);
            }
            let mut con = (f64::INFINITY, 0);
            for j in 0..ny {
                if gv[j] <= 0.0 && fv[j] < con.0 {
                    con = (fv[j], j);
                }
            }
            con_total += probs[s] * con.0;
            con_iy[s] = con.1;
            for (k, &c) in cs.iter().enumerate() {
                let mut pen = (f64::INFINITY, 0);
                for j in 0..ny {
                    let v = fv[j] + c * gv[j].max(0.0);
                    if v < pen.0 {
                        pen = (v, j);
                    }
                }
                pen_total[k] += probs[s] * pen.0;
                pen_iy[k][s] = pen.1;
            }
        }
        if con_total < best_con.value {
            best_con = GridArgmin { value: con_total, ix, iy: con_iy };
        }
        for k in 0..cs.len() {
            if pen_total[k] < best_pen[k].value {
                best_pen[k] = GridArgmin { value: pen_total[k], ix, iy: pen_iy[k].clone() };
            }
        }
    }
    GridSolution { constrained: best_con, penalized: best_pen, grid }
}

/// The grid used for the tiny instances: `A = [−2, 2]`, `y ∈ [−3, 3]`.
pub fn tiny_grid(step: f64) -> Grid {
    Grid { x_lo: -2.0, x_hi: 2.0, y_lo: -3.0, y_hi: 3.0, step }
}

pub fn arc<T>(v: T) -> Arc<T> {
    Arc::new(v)
}

/// Distance from `y` to the compact convex set `{u ∈ ℝ² : h(u) ≤ 0}`, found
/// by tracing the boundary along rays from an interior point and refining a
/// grid over the ray angle.
pub fn planar_set_distance(h: impl Fn(&[f64]) -> f64, y: &[f64], sup_norm: bool) -> f64 {
    if h(y) <= 0.0 {
        return 0.0;
    }
    let (_, inner) = zoom_grid_min(&[-10.0, -10.0], &[10.0, 10.0], &h, 1e-3, 2.0);
    assert!(h(&inner) < 0.0, "set has empty interior");
    let boundary = |angle: f64| -> Vec<f64> {
        let dir = [angle.cos(), angle.sin()];
        let at = |t: f64| vec![inner[0] + t * dir[0], inner[1] + t * dir[1]];
        let (mut lo, mut hi) = (0.0, 1.0);
        while h(&at(hi)) <= 0.0 {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if h(&at(mid)) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        at(lo)
    };
    let dist = |angle: f64| {
        let u = boundary(angle);
        let diff = [y[0] - u[0], y[1] - u[1]];
        if sup_norm {
            diff[0].abs().max(diff[1].abs())
        } else {
            norm(&diff)
        }
    };
    let tau = std::f64::consts::TAU;
    let (mut lo, mut hi, mut points) = (0.0, tau, 2000usize);
    let mut best = (f64::INFINITY, 0.0);
    loop {
        let step = (hi - lo) / points as f64;
        for i in 0..=points {
            let a = lo + i as f64 * step;
            let v = dist(a);
            if v < best.0 {
                best = (v, a);
            }
        }
        if step < 1e-12 {
            return best.0;
        }
        lo = best.1 - 2.0 * step;
        hi = best.1 + 2.0 * step;
        points = 40;
    }
}

/// A random DAG whose codifferential stays under the vertex cap, with the
/// number of rejected draws.
pub fn tractable_dag(
    seed: u64,
    site: &Site,
    anchored: bool,
    curved: bool,
    depth: usize,
) -> (ExprRef, codiffsp::CodiffPair, usize) {
    for attempt in 0.. {
        let e = DagGen::new(seed.wrapping_add(1_000_003 * attempt), site, anchored, curved).any(depth);
        match codiffsp::codiff(&e, site.args()) {
            Ok(cd) => return (e, cd, attempt as usize),
            Err(codiffsp::Error::VertexCap { .. }) => continue,
            Err(err) => panic!("codiff failed: {err}"),
        }
    }
    unreachable!()
}

/// Problem with `f = 0`, `A = [−1, 1]^d`, equiprobable scenarios and the given constraints.
pub fn problem(d: usize, m: usize, params: Vec<Vec<f64>>, g: Vec<expr::ExprRef>) -> TwoStageProblem {
    let s = params.len();
    let mut p = TwoStageProblem {
        d,
        m,
        p_exponent: 2.0,
        first_stage: FirstStageSet::Box { lower: vec![-1.0; d], upper: vec![1.0; d] },
        scenarios: ScenarioSpace { probs: vec![1.0 / s as f64; s], params },
        f: expr::constant(0.0),
        g,
        witness: None,
        coercivity_mu: None,
    };
    p.validate().expect("valid problem");
    p
}

pub fn box_problem(rng: &mut ChaCha8Rng) -> TwoStageProblem {
    let mut g = Vec::new();
    for j in 0..2 {
        let mut e = vec![0.0; 2];
        let scale = rng.gen_range(0.5..2.0);
        e[j] = scale;
        let (a, b) = (rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3));
        g.push(expr::affine(-scale * rng.gen_range(0.5..2.0), vec![-scale * a], e.clone(), vec![-scale * b]));
        let scale = rng.gen_range(0.5..2.0);
        let mut e = vec![0.0; 2];
        e[j] = -scale;
        let (a, b) = (rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3));
        g.push(expr::affine(-scale * rng.gen_range(0.5..2.0), vec![scale * a], e, vec![scale * b]));
    }
    let params = vec![vec![rng.gen_range(-1.0..1.0)], vec![rng.gen_range(-1.0..1.0)]];
    problem(1, 2, params, g)
}

pub fn ball_problem(rng: &mut ChaCha8Rng) -> TwoStageProblem {
    let k = rng.gen_range(0.5..2.0);
    let l = normal_vec(rng, 2, 0.5);
    let r0 = -k * rng.gen_range(0.5..2.0);
    let (a, b) = (rng.gen_range(-0.2..0.2) * k, rng.gen_range(-0.2..0.2) * k);
    let q = vec![vec![0.0, 0.0, 0.0], vec![0.0, k, 0.0], vec![0.0, 0.0, k]];
    let g = expr::add(vec![expr::quad(q, vec![a, l[0], l[1]], r0), expr::affine(0.0, vec![], vec![], vec![b])]);
    let params = vec![vec![rng.gen_range(-1.0..1.0)], vec![rng.gen_range(-1.0..1.0)]];
    problem(1, 2, params, vec![g])
}

/// Distance from `y` to `{u : max_i g_i(x, u, θ) ≤ 0}` computed from the
/// constraint values alone.
pub fn grid_distance(prob: &TwoStageProblem, x: &[f64], y: &[f64], s: usize, sup_norm: bool) -> f64 {
    let theta = &prob.scenarios.params[s];
    let h = |u: &[f64]| prob.g.iter().map(|g| g.eval(Args::new(x, u, theta))).fold(f64::NEG_INFINITY, f64::max);
    planar_set_distance(h, y, sup_norm)
}
