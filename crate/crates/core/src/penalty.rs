//! Penalty terms, the penalty function `Φ_c = 𝓘 + c·φ` and sufficient
//! conditions for its exactness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::codiff::codiff;
use crate::error::{Error, Result};
use crate::expectation::{block_codiff_of, eval_i, BlockCodiff};
use crate::expr::{self, Args, Expr, ExprRef};
use crate::hull::{min_norm_point, norm};
use crate::model::{Point, TwoStageProblem};
use crate::par::{try_map_scenarios, weighted_sum};

/// Active-set tolerance of the nondegeneracy sampler.
pub const TOL_ACT: f64 = 1e-9;
/// Hull distances at or below this value are reported as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;
/// Largest number of superdifferential selections enumerated per point.
pub const MAX_SELECTIONS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PenaltyKind {
    /// `(E[dist(y, G)^p])^{1/p}`.
    #[serde(rename = "dist_p")]
    Dist,
    /// `E[max_i {0, g_i}]`.
    #[serde(rename = "l1_max")]
    L1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    pub c: f64,
}

impl PenaltySpec {
    pub fn l1(c: f64) -> Self {
        PenaltySpec { kind: PenaltyKind::L1, c }
    }

    pub fn dist(c: f64) -> Self {
        PenaltySpec { kind: PenaltyKind::Dist, c }
    }

    fn validate(&self) -> Result<()> {
        if self.c >= 0.0 && self.c.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidValue(format!("penalty parameter c = {} must be >= 0", self.c)))
        }
    }
}

/// Shape of the second-stage feasible sets `G(x, θ)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Unconstrained,
    /// Each constraint bounds one coordinate: `coef · y_j + r(x, θ) ≤ 0`.
    Box { rows: Vec<(usize, f64)> },
    /// `(k/2)|y|² + l·y + r(x, θ) ≤ 0`.
    Ball { k: f64, l: Vec<f64> },
}

/// Detects a projectable geometry from the collapsed quadratic forms of `g`.
pub fn detect_geometry(prob: &TwoStageProblem) -> Result<Geometry> {
    if prob.g.is_empty() {
        return Ok(Geometry::Unconstrained);
    }
    let dims = prob.dims();
    let (d, m) = (prob.d, prob.m);
    let forms = prob
        .g
        .iter()
        .map(|g| {
            g.quad_form(dims)
                .ok_or_else(|| Error::Unprojectable("constraint is not a smooth polynomial".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    let y_block = |f: &crate::expr::QuadForm| -> (bool, bool) {
        let mut cross = false;
        let mut yy = false;
        for i in 0..d + m {
            for j in d..d + m {
                let v = f.q[(i, j)].abs().max(f.q[(j, i)].abs());
                if v != 0.0 {
                    if i < d {
                        cross = true;
                    } else {
                        yy = true;
                    }
                }
            }
        }
        (cross, yy)
    };

    if forms.iter().all(|f| y_block(f) == (false, false)) {
        let mut rows = Vec::with_capacity(forms.len());
        for f in &forms {
            let nz: Vec<usize> = (0..m).filter(|&j| f.lin[d + j] != 0.0).collect();
            if nz.len() != 1 {
                return Err(Error::Unprojectable(
                    "affine constraint does not bound a single recourse coordinate".into(),
                ));
            }
            rows.push((nz[0], f.lin[d + nz[0]]));
        }
        return Ok(Geometry::Box { rows });
    }
    if forms.len() == 1 {
        let f = &forms[0];
        let (cross, _) = y_block(f);
        let k = f.q[(d, d)];
        let scalar = (d..d + m).all(|i| {
            (d..d + m).all(|j| f.q[(i, j)] == if i == j { k } else { 0.0 })
        });
        if !cross && scalar && k > 0.0 {
            return Ok(Geometry::Ball {
                k,
                l: f.lin[d..].to_vec(),
            });
        }
    }
    Err(Error::Unprojectable(
        "second-stage set is neither a box nor a Euclidean ball".into(),
    ))
}

/// Per-scenario feasible set at a fixed `x`.
#[derive(Debug, Clone, PartialEq)]
pub enum LocalSet {
    Whole,
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl LocalSet {
    /// Distance used by the distance penalty: `ℓ∞` for boxes, Euclidean for balls.
    pub fn distance(&self, y: &[f64]) -> f64 {
        match self {
            LocalSet::Whole => 0.0,
            LocalSet::Box { lower, upper } => y
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (lo, hi))| (v - hi).max(lo - v).max(0.0))
                .fold(0.0, f64::max),
            LocalSet::Ball { center, radius } => {
                let diff: Vec<f64> = y.iter().zip(center).map(|(a, b)| a - b).collect();
                (norm(&diff) - radius).max(0.0)
            }
        }
    }

    /// A nearest point of the set (in the norm of [`LocalSet::distance`]).
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        match self {
            LocalSet::Whole => y.to_vec(),
            LocalSet::Box { lower, upper } => y
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
                .collect(),
            LocalSet::Ball { center, radius } => {
                let diff: Vec<f64> = y.iter().zip(center).map(|(a, b)| a - b).collect();
                let r = norm(&diff);
                if r <= *radius {
                    y.to_vec()
                } else {
                    center.iter().zip(&diff).map(|(c, v)| c + v * radius / r).collect()
                }
            }
        }
    }
}

/// `G(x, θ_s)` for the detected geometry.
pub fn local_set(prob: &TwoStageProblem, geom: &Geometry, x: &[f64], s: usize) -> Result<LocalSet> {
    let zero_y = vec![0.0; prob.m];
    let args = Args::new(x, &zero_y, &prob.scenarios.params[s]);
    match geom {
        Geometry::Unconstrained => Ok(LocalSet::Whole),
        Geometry::Box { rows } => {
            let mut lower = vec![f64::NEG_INFINITY; prob.m];
            let mut upper = vec![f64::INFINITY; prob.m];
            for (g, &(j, coef)) in prob.g.iter().zip(rows) {
                let bound = -g.eval(args) / coef;
                if coef > 0.0 {
                    upper[j] = upper[j].min(bound);
                } else {
                    lower[j] = lower[j].max(bound);
                }
            }
            if lower.iter().zip(&upper).any(|(l, u)| l > u) {
                return Err(Error::Unprojectable(format!("second-stage set of scenario {s} is empty")));
            }
            Ok(LocalSet::Box { lower, upper })
        }
        Geometry::Ball { k, l } => {
            let r = prob.g[0].eval(args);
            let ll: f64 = l.iter().map(|v| v * v).sum();
            let r2 = ll / (k * k) - 2.0 * r / k;
            if r2 < 0.0 {
                return Err(Error::Unprojectable(format!("second-stage set of scenario {s} is empty")));
            }
            Ok(LocalSet::Ball {
                center: l.iter().map(|v| -v / k).collect(),
                radius: r2.sqrt(),
            })
        }
    }
}

/// Per-scenario distances `dist(y_s, G(x, θ_s))`.
pub fn scenario_distances(prob: &TwoStageProblem, z: &Point) -> Result<Vec<f64>> {
    prob.check_point(z)?;
    let geom = detect_geometry(prob)?;
    (0..prob.num_scenarios())
        .map(|s| Ok(local_set(prob, &geom, &z.x, s)?.distance(&z.y[s])))
        .collect()
}

/// Per-scenario projection of the recourse onto `G(x, θ_s)`.
pub fn project_recourse(prob: &TwoStageProblem, z: &Point) -> Result<Point> {
    prob.check_point(z)?;
    let geom = detect_geometry(prob)?;
    let y = (0..prob.num_scenarios())
        .map(|s| Ok(local_set(prob, &geom, &z.x, s)?.project(&z.y[s])))
        .collect::<Result<Vec<_>>>()?;
    Ok(Point { x: z.x.clone(), y })
}

/// `(Σ_s p_s dist(y_s, G(x, θ_s))^p)^{1/p}`.
pub fn phi_dist(prob: &TwoStageProblem, z: &Point) -> Result<f64> {
    let p = prob.p_exponent;
    let dists = scenario_distances(prob, z)?;
    let powered: Vec<f64> = dists.iter().map(|v| v.powf(p)).collect();
    Ok(weighted_sum(prob.probs(), &powered).powf(1.0 / p))
}

/// Per-scenario violations `max_i {0, g_i(x, y_s, θ_s)}`.
pub fn scenario_violations(prob: &TwoStageProblem, z: &Point) -> Result<Vec<f64>> {
    prob.check_point(z)?;
    try_map_scenarios(prob.num_scenarios(), |s| {
        let args = prob.args(z, s);
        let v = prob.g.iter().map(|g| g.eval(args)).fold(0.0, f64::max);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { scenario: s })
        }
    })
}

/// `Σ_s p_s max_i {0, g_i(x, y_s, θ_s)}`.
pub fn phi_l1(prob: &TwoStageProblem, z: &Point) -> Result<f64> {
    Ok(weighted_sum(prob.probs(), &scenario_violations(prob, z)?))
}

pub fn phi(prob: &TwoStageProblem, kind: PenaltyKind, z: &Point) -> Result<f64> {
    match kind {
        PenaltyKind::Dist => phi_dist(prob, z),
        PenaltyKind::L1 => phi_l1(prob, z),
    }
}

/// `Φ_c(z) = 𝓘(z) + c·φ(z)`.
pub fn phi_c(prob: &TwoStageProblem, spec: PenaltySpec, z: &Point) -> Result<f64> {
    spec.validate()?;
    let base = eval_i(prob, z)?;
    if spec.c == 0.0 {
        return Ok(base);
    }
    Ok(base + spec.c * phi(prob, spec.kind, z)?)
}

/// Integrand `f + c·max{0, g_1, …, g_ℓ}` of the `ℓ¹` penalty function.
pub fn penalty_integrand(prob: &TwoStageProblem, c: f64) -> ExprRef {
    if prob.g.is_empty() {
        return prob.f.clone();
    }
    let mut branches = vec![expr::constant(0.0)];
    branches.extend(prob.g.iter().cloned());
    expr::add(vec![prob.f.clone(), expr::scale(c, expr::max(branches))])
}

/// Block codifferential of the `ℓ¹` penalty integrand.
pub fn penalty_codiff(prob: &TwoStageProblem, spec: PenaltySpec, z: &Point) -> Result<BlockCodiff> {
    spec.validate()?;
    if spec.kind != PenaltyKind::L1 {
        return Err(Error::InvalidValue(
            "penalty codifferentials are built for the l1_max penalty".into(),
        ));
    }
    block_codiff_of(prob, &penalty_integrand(prob, spec.c), z)
}

/// Worst point found by [`check_nondegeneracy`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NondegWitness {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub scenario: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NondegReport {
    /// Infeasible `(x, y_s)` pairs examined.
    pub sampled_points: usize,
    pub min_hull_distance: f64,
    /// Distances at or below this value flag degeneracy.
    pub threshold_a: f64,
    pub degenerate: bool,
    pub witness: Option<NondegWitness>,
    /// Sampling can refute the condition but never prove it.
    pub empirical: bool,
}

/// `max_w dist(0, co{∂̲_y g_i + w_i : i active})` at one infeasible point.
fn hull_distance(prob: &TwoStageProblem, x: &[f64], y: &[f64], s: usize) -> Result<Option<f64>> {
    let theta = &prob.scenarios.params[s];
    let args = Args::new(x, y, theta);
    let values: Vec<f64> = prob.g.iter().map(|g| g.eval(args)).collect();
    let top = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(top > 0.0) {
        return Ok(None);
    }
    let d = prob.d;
    let mut subs = Vec::new();
    let mut sups = Vec::new();
    for (i, g) in prob.g.iter().enumerate() {
        if values[i] < top - TOL_ACT {
            continue;
        }
        let qd = codiff(g, args)?.quasidiff()?;
        subs.push(qd.sub.iter().map(|v| v[d..].to_vec()).collect::<Vec<_>>());
        sups.push(qd.sup.iter().map(|w| w[d..].to_vec()).collect::<Vec<_>>());
    }
    let combos: usize = sups
        .iter()
        .map(|s| s.len())
        .try_fold(1usize, |acc, k| acc.checked_mul(k))
        .unwrap_or(usize::MAX);
    let enumerate = combos <= MAX_SELECTIONS;
    let count = if enumerate { combos } else { 1 };
    let mut best = f64::NEG_INFINITY;
    for mut code in 0..count {
        let mut pts = Vec::new();
        for (sub, sup) in subs.iter().zip(&sups) {
            let w = if enumerate {
                let k = code % sup.len();
                code /= sup.len();
                &sup[k]
            } else {
                &sup[0]
            };
            pts.extend(sub.iter().map(|v| v.iter().zip(w).map(|(a, b)| a + b).collect::<Vec<_>>()));
        }
        best = best.max(min_norm_point(&pts).norm());
    }
    Ok(Some(best))
}

fn gaussian_unit(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.iter().map(|a| a / n).collect();
        }
    }
}

/// Smallest `t ≥ 0` with `max_i g_i(x, y + t·d) ≥ 0`, if one is found below 1e3.
fn boundary_step(prob: &TwoStageProblem, x: &[f64], y: &[f64], dir: &[f64], s: usize) -> Option<f64> {
    let theta = &prob.scenarios.params[s];
    let viol = |t: f64| -> f64 {
        let yt: Vec<f64> = y.iter().zip(dir).map(|(a, b)| a + t * b).collect();
        let args = Args::new(x, &yt, theta);
        prob.g.iter().map(|g| g.eval(args)).fold(f64::NEG_INFINITY, f64::max)
    };
    if viol(0.0) >= 0.0 {
        return Some(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1e-3;
    while viol(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e3 {
            return None;
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if viol(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(hi)
}

/// Empirical check of the uniform nondegeneracy condition on the constraints.
///
/// Infeasible points are produced by walking from the witness (or from
/// `(Π_A(0), 0)`) along random recourse directions to the boundary of the
/// feasible set and stepping past it by amounts log-spaced in `[1e-12, 10]`.
pub fn check_nondegeneracy(prob: &TwoStageProblem, samples: usize, seed: u64) -> Result<NondegReport> {
    if prob.g.is_empty() {
        return Err(Error::InvalidValue("nondegeneracy needs at least one constraint".into()));
    }
    let base = prob.witness.clone().unwrap_or_else(|| {
        let x = prob.first_stage.project(&vec![0.0; prob.d]);
        Point { x, y: vec![vec![0.0; prob.m]; prob.num_scenarios()] }
    });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut plan = Vec::with_capacity(samples);
    for k in 0..samples {
        let shift: Vec<f64> = (0..prob.d)
            .map(|_| if k == 0 { 0.0 } else { 0.25 * rng.sample::<f64, _>(StandardNormal) })
            .collect();
        let x = prob
            .first_stage
            .project(&base.x.iter().zip(&shift).map(|(a, b)| a + b).collect::<Vec<_>>());
        let dirs: Vec<Vec<f64>> = (0..prob.num_scenarios()).map(|_| gaussian_unit(&mut rng, prob.m)).collect();
        let frac = if samples > 1 { (k % 27) as f64 / 26.0 } else { 0.0 };
        let tau = 10f64.powf(-12.0 + 13.0 * frac);
        plan.push((x, dirs, tau));
    }

    let results = try_map_scenarios(plan.len(), |k| {
        let (x, dirs, tau) = &plan[k];
        let mut found = Vec::new();
        for s in 0..prob.num_scenarios() {
            let Some(tb) = boundary_step(prob, x, &base.y[s], &dirs[s], s) else {
                continue;
            };
            let y: Vec<f64> = base.y[s].iter().zip(&dirs[s]).map(|(a, b)| a + (tb + tau) * b).collect();
            if let Some(dist) = hull_distance(prob, x, &y, s)? {
                found.push((dist, NondegWitness { x: x.clone(), y, scenario: s }));
            }
        }
        Ok::<_, Error>(found)
    })?;

    let mut sampled = 0;
    let mut min = f64::INFINITY;
    let mut witness = None;
    for (dist, w) in results.into_iter().flatten() {
        sampled += 1;
        if dist < min {
            min = dist;
            witness = Some(w);
        }
    }
    Ok(NondegReport {
        sampled_points: sampled,
        min_hull_distance: min,
        threshold_a: DEGENERACY_TOL,
        degenerate: min <= DEGENERACY_TOL,
        witness,
        empirical: true,
    })
}

/// Sufficient pattern for bounded sublevel sets of the penalty function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundednessPattern {
    /// Bounded `A` and uniformly bounded second-stage sets.
    BoundedSets,
    /// `f` is a quadratic with positive definite Hessian.
    CoerciveQuadratic,
    /// `f − μ(|x|² + |y|²)` declared bounded below.
    DeclaredCoercivity,
}

/// Structural check for bounded sublevel sets; `None` if no pattern applies.
pub fn check_sublevel_bounded(prob: &TwoStageProblem) -> Option<BoundednessPattern> {
    if prob.coercivity_mu.is_some() {
        return Some(BoundednessPattern::DeclaredCoercivity);
    }
    if let Some(form) = prob.f.quad_form(prob.dims()) {
        let sym = (&form.q + form.q.transpose()) * 0.5;
        let eig = nalgebra::SymmetricEigen::new(sym);
        if eig.eigenvalues.iter().all(|&e| e > 0.0) {
            return Some(BoundednessPattern::CoerciveQuadratic);
        }
    }
    if prob.first_stage.is_bounded() {
        let bounded = match detect_geometry(prob) {
            Ok(Geometry::Ball { .. }) => true,
            Ok(Geometry::Box { rows }) => (0..prob.m).all(|j| {
                rows.iter().any(|&(k, c)| k == j && c > 0.0) && rows.iter().any(|&(k, c)| k == j && c < 0.0)
            }),
            _ => false,
        };
        if bounded {
            return Some(BoundednessPattern::BoundedSets);
        }
    }
    None
}

/// Convenience: `true` when `e` has no nonsmooth node.
pub fn all_smooth(prob: &TwoStageProblem) -> bool {
    prob.f.is_smooth() && prob.g.iter().all(|g: &ExprRef| Expr::is_smooth(g))
}
