//! Certificates for candidate solutions: multiplier-based stationarity in
//! codifferential form, its smooth KKT reduction, and a sampled estimate of
//! the rate of steepest descent of `Φ_c`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::codiff::{codiff, CodiffPair};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::hull::{min_norm_minkowski, min_norm_point, norm, Block};
use crate::model::{Point, TwoStageProblem};
use crate::par::try_map_scenarios;
use crate::penalty::penalty_integrand;
use crate::solvers::selections;

/// Feasibility tolerance required of a candidate.
pub const TOL_CANDIDATE: f64 = 1e-6;
/// Constraints with `|g_i| ≤ TOL_CERT_ACT` and vertices with offset within it
/// count as active.
pub const TOL_CERT_ACT: f64 = 1e-6;
/// Tolerance on the faces of `A` entering the normal cone.
pub const TOL_NORMAL: f64 = 1e-6;
/// Multipliers are searched in `[0, LAMBDA_FACTOR · c]`.
pub const LAMBDA_FACTOR: f64 = 10.0;
/// Largest number of hyperdifferential selections checked.
pub const MAX_CHECKED_SELECTIONS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// Largest per-scenario norm of the `y`-block left in the hull.
    pub stationarity: f64,
    /// `max |λ_{i,s} g_i(x, y_s, θ_s)|`.
    pub complementarity: f64,
    /// `dist(−E[ζ], N_A(x))`.
    pub normal_cone: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.complementarity).max(self.normal_cone)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    /// `Σ_i max_s λ_{i,s}`.
    pub value: f64,
    /// The penalty parameter `c`, when one was given.
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// `lambdas[s][i]`; zero for constraints inactive in scenario `s`.
    pub lambdas: Vec<Vec<f64>>,
    pub zeta: Vec<Vec<f64>>,
    pub residuals: Residuals,
    pub budget: Budget,
    /// Number of hyperdifferential selections verified; the reported
    /// multipliers belong to the worst one.
    pub checked_selections: usize,
    /// Set when not every selection could be enumerated.
    pub selection_fallback: bool,
    pub empirical: bool,
}

impl Certificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

/// One hyperdifferential vertex choice per scenario: `objective[s]` indexes
/// the zero-offset hyper vertices of `f`, `constraints[s][i]` those of `g_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub objective: Vec<usize>,
    pub constraints: Vec<Vec<usize>>,
}

/// Zero-offset slices of a codifferential within `TOL_CERT_ACT`.
struct Slices {
    sub: Vec<Vec<f64>>,
    sup: Vec<Vec<f64>>,
}

fn slices(cd: &CodiffPair) -> Slices {
    let near = |a: f64| a.abs() <= TOL_CERT_ACT;
    Slices {
        sub: cd.hypo.iter().filter(|p| near(p.a)).map(|p| p.v.clone()).collect(),
        sup: cd.hyper.iter().filter(|p| near(p.a)).map(|p| p.v.clone()).collect(),
    }
}

struct ScenarioData {
    objective: Slices,
    /// `(constraint index, slices)` for active constraints.
    active: Vec<(usize, Slices)>,
    values: Vec<f64>,
}

fn check_candidate(prob: &TwoStageProblem, z: &Point) -> Result<()> {
    let rep = prob.is_feasible(z, TOL_CANDIDATE)?;
    if !rep.feasible {
        return Err(Error::InfeasibleCandidate {
            violation: rep.max_violation,
            scenario: rep.scenario.unwrap_or(0),
            constraint: if rep.first_stage_distance > TOL_CANDIDATE { None } else { rep.constraint },
        });
    }
    Ok(())
}

fn scenario_data(prob: &TwoStageProblem, z: &Point) -> Result<Vec<ScenarioData>> {
    try_map_scenarios(prob.num_scenarios(), |s| {
        let args = prob.args(z, s);
        let objective = slices(&codiff(&prob.f, args)?);
        let mut active = Vec::new();
        let mut values = Vec::with_capacity(prob.g.len());
        for (i, g) in prob.g.iter().enumerate() {
            let v = g.eval(args);
            if !v.is_finite() {
                return Err(Error::NonFinite { scenario: s });
            }
            values.push(v);
            if v.abs() <= TOL_CERT_ACT {
                active.push((i, slices(&codiff(g, args)?)));
            }
        }
        Ok(ScenarioData { objective, active, values })
    })
}

fn shifted(sub: &[Vec<f64>], w: &[f64]) -> Vec<Vec<f64>> {
    sub.iter().map(|v| v.iter().zip(w).map(|(a, b)| a + b).collect()).collect()
}

/// Maps a joint `(x, y_s)` vector into the ambient space with the `x`-part
/// weighted by `p_s`.
fn lift(v: &[f64], d: usize, p: f64, factor: f64) -> Vec<f64> {
    v.iter().enumerate().map(|(k, vk)| if k < d { factor * p * vk } else { factor * vk }).collect()
}

/// Certificate for one fixed selection via a single minimum-norm problem
/// over a Minkowski sum. `λ·co(V)` with `λ ∈ [0, Λ]` equals `co({0} ∪ ΛV)`,
/// so the multiplier search is convex and exact.
fn certify_selection(
    prob: &TwoStageProblem,
    c: f64,
    z: &Point,
    data: &[ScenarioData],
    sel: &Selection,
) -> Certificate {
    let (d, m, ns) = (prob.d, prob.m, prob.num_scenarios());
    let dim = d + ns * m;
    let probs = prob.probs();
    let cap = LAMBDA_FACTOR * c;
    let mut blocks: Vec<Block> = Vec::new();
    // (scenario, constraint, block index)
    let mut constraint_blocks = Vec::new();
    let mut objective_blocks = Vec::with_capacity(ns);
    for (s, sd) in data.iter().enumerate() {
        let coords: Vec<usize> = (0..d).chain(d + s * m..d + (s + 1) * m).collect();
        let w = &sd.objective.sup[sel.objective[s]];
        objective_blocks.push(blocks.len());
        blocks.push(Block {
            coords: coords.clone(),
            vertices: shifted(&sd.objective.sub, w).iter().map(|v| lift(v, d, probs[s], 1.0)).collect(),
        });
        for (k, (i, sl)) in sd.active.iter().enumerate() {
            let w = &sl.sup[sel.constraints[s][k]];
            let mut vertices = vec![vec![0.0; d + m]];
            vertices.extend(shifted(&sl.sub, w).iter().map(|v| lift(v, d, probs[s], cap)));
            constraint_blocks.push((s, *i, blocks.len()));
            blocks.push(Block { coords: coords.clone(), vertices });
        }
    }
    let reach: f64 = 1.0
        + blocks
            .iter()
            .map(|b| b.vertices.iter().map(|v| norm(&v[..d])).fold(0.0, f64::max))
            .sum::<f64>();
    for n in prob.first_stage.normal_generators(&z.x, TOL_NORMAL) {
        blocks.push(Block {
            coords: (0..d).collect(),
            vertices: vec![vec![0.0; d], n.iter().map(|v| reach * v).collect()],
        });
    }

    let sol = min_norm_minkowski(dim, &blocks);
    let stationarity = (0..ns)
        .map(|s| norm(&sol.point[d + s * m..d + (s + 1) * m]))
        .fold(0.0, f64::max);

    let mut lambdas = vec![vec![0.0; prob.g.len()]; ns];
    let mut zeta: Vec<Vec<f64>> = objective_blocks
        .iter()
        .enumerate()
        .map(|(s, &b)| sol.block_point(&blocks, b)[..d].iter().map(|v| v / probs[s]).collect())
        .collect();
    for &(s, i, b) in &constraint_blocks {
        lambdas[s][i] = cap * (1.0 - sol.weights[b][0]).clamp(0.0, 1.0);
        for (zk, v) in zeta[s].iter_mut().zip(&sol.block_point(&blocks, b)[..d]) {
            *zk += v / probs[s];
        }
    }
    finish(prob, Some(c), z, data.iter().map(|sd| sd.values.clone()).collect(), lambdas, zeta, stationarity)
}

fn finish(
    prob: &TwoStageProblem,
    c: Option<f64>,
    z: &Point,
    values: Vec<Vec<f64>>,
    lambdas: Vec<Vec<f64>>,
    zeta: Vec<Vec<f64>>,
    stationarity: f64,
) -> Certificate {
    let probs = prob.probs();
    let mut mean = vec![0.0; prob.d];
    for (p, zs) in probs.iter().zip(&zeta) {
        for (acc, v) in mean.iter_mut().zip(zs) {
            *acc += p * v;
        }
    }
    let neg: Vec<f64> = mean.iter().map(|v| -v).collect();
    let normal_cone = prob.first_stage.normal_cone_distance(&z.x, &neg, TOL_NORMAL);
    let complementarity = lambdas
        .iter()
        .zip(&values)
        .flat_map(|(ls, gs)| ls.iter().zip(gs).map(|(l, g)| (l * g).abs()))
        .fold(0.0, f64::max);
    let budget = (0..prob.g.len())
        .map(|i| lambdas.iter().map(|ls| ls[i]).fold(0.0, f64::max))
        .sum();
    Certificate {
        lambdas,
        zeta,
        residuals: Residuals { stationarity, complementarity, normal_cone },
        budget: Budget { value: budget, bound: c },
        checked_selections: 1,
        selection_fallback: false,
        empirical: false,
    }
}

fn validate_selection(data: &[ScenarioData], prob: &TwoStageProblem, sel: &Selection) -> Result<()> {
    let bad = |msg: String| Err(Error::InvalidValue(format!("selection: {msg}")));
    if sel.objective.len() != data.len() || sel.constraints.len() != data.len() {
        return bad(format!("expected {} scenarios", data.len()));
    }
    for (s, sd) in data.iter().enumerate() {
        if sel.objective[s] >= sd.objective.sup.len() {
            return bad(format!("objective index {} out of range in scenario {s}", sel.objective[s]));
        }
        if sel.constraints[s].len() != prob.g.len() {
            return bad(format!("expected {} constraint indices in scenario {s}", prob.g.len()));
        }
    }
    Ok(())
}

/// Restricts a user selection to the active constraints.
fn compact(data: &[ScenarioData], sel: &Selection) -> Result<Selection> {
    let mut constraints = Vec::with_capacity(data.len());
    for (s, sd) in data.iter().enumerate() {
        let mut row = Vec::with_capacity(sd.active.len());
        for (i, sl) in &sd.active {
            let k = sel.constraints[s][*i];
            if k >= sl.sup.len() {
                return Err(Error::InvalidValue(format!(
                    "selection: constraint {i} index {k} out of range in scenario {s}"
                )));
            }
            row.push(k);
        }
        constraints.push(row);
    }
    Ok(Selection { objective: sel.objective.clone(), constraints })
}

/// Multiplier-based necessary optimality conditions at a feasible `z`.
///
/// Without explicit selections every combination of zero-offset hyper
/// vertices is checked when there are at most [`MAX_CHECKED_SELECTIONS`];
/// otherwise the first vertex of each set is used and `selection_fallback`
/// is set. The certificate of the worst checked selection is returned.
pub fn check_optimality(
    prob: &TwoStageProblem,
    c: f64,
    z: &Point,
    selection: Option<&Selection>,
) -> Result<Certificate> {
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::InvalidValue(format!("penalty parameter c = {c} must be >= 0")));
    }
    check_candidate(prob, z)?;
    let data = scenario_data(prob, z)?;
    if let Some(sel) = selection {
        validate_selection(&data, prob, sel)?;
        return Ok(certify_selection(prob, c, z, &data, &compact(&data, sel)?));
    }

    let mut counts = Vec::new();
    for sd in &data {
        counts.push(sd.objective.sup.len());
        counts.extend(sd.active.iter().map(|(_, sl)| sl.sup.len()));
    }
    let total = counts.iter().try_fold(1usize, |acc, &k| acc.checked_mul(k));
    let fallback = total.map_or(true, |t| t > MAX_CHECKED_SELECTIONS);
    let choices = if fallback { vec![vec![0; counts.len()]] } else { selections(&counts) };

    let mut worst: Option<Certificate> = None;
    for choice in &choices {
        let mut it = choice.iter().copied();
        let mut sel = Selection { objective: Vec::new(), constraints: Vec::new() };
        for sd in &data {
            sel.objective.push(it.next().expect("choice length"));
            sel.constraints.push(sd.active.iter().map(|_| it.next().expect("choice length")).collect());
        }
        let cert = certify_selection(prob, c, z, &data, &sel);
        let score = cert.residuals.stationarity.max(cert.residuals.normal_cone);
        if worst
            .as_ref()
            .map_or(true, |w| score > w.residuals.stationarity.max(w.residuals.normal_cone))
        {
            worst = Some(cert);
        }
    }
    let mut cert = worst.expect("at least one selection");
    cert.checked_selections = choices.len();
    cert.selection_fallback = fallback;
    Ok(cert)
}

/// Nonnegative least squares `min ‖A λ − b‖, λ ≥ 0` (Lawson–Hanson).
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-12 * (1.0 + a.norm() * b.norm());
    for _ in 0..3 * n + 10 {
        let w = a.transpose() * (b - a * &x);
        let cand = (0..n).filter(|&j| !passive[j] && w[j] > tol).max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = cand else { break };
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let sub = a.select_columns(&idx);
            let zs = sub
                .clone()
                .svd(true, true)
                .solve(b, 1e-14)
                .expect("svd solve with both factors");
            if zs.iter().all(|&v| v > 0.0) {
                for (k, &col) in idx.iter().enumerate() {
                    x[col] = zs[k];
                }
                break;
            }
            let mut alpha = 1.0f64;
            for (k, &col) in idx.iter().enumerate() {
                if zs[k] <= 0.0 {
                    alpha = alpha.min(x[col] / (x[col] - zs[k]));
                }
            }
            for (k, &col) in idx.iter().enumerate() {
                x[col] += alpha * (zs[k] - x[col]);
                if x[col] <= 1e-15 {
                    x[col] = 0.0;
                    passive[col] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}

fn all_smooth(prob: &TwoStageProblem) -> bool {
    prob.f.is_smooth() && prob.g.iter().all(|g| g.is_smooth())
}

fn grad(e: &Expr, prob: &TwoStageProblem, z: &Point, s: usize) -> (f64, Vec<f64>) {
    let mut g = vec![0.0; prob.d + prob.m];
    let v = e.value_grad(prob.args(z, s), &mut g);
    (v, g)
}

/// KKT conditions with gradients: per scenario, nonnegative least squares
/// for `∇_y f + Σ λ_i ∇_y g_i = 0` over the active constraints.
pub fn smooth_kkt_check(prob: &TwoStageProblem, z: &Point) -> Result<Certificate> {
    if !all_smooth(prob) {
        return Err(Error::NotSmooth("objective or a constraint contains a nonsmooth node".into()));
    }
    check_candidate(prob, z)?;
    let (d, m) = (prob.d, prob.m);
    let rows: Vec<(Vec<f64>, Vec<f64>, Vec<f64>, f64)> = try_map_scenarios(prob.num_scenarios(), |s| {
        let (_, gf) = grad(&prob.f, prob, z, s);
        let mut values = Vec::new();
        let mut active = Vec::new();
        for (i, g) in prob.g.iter().enumerate() {
            let (v, gg) = grad(g, prob, z, s);
            if !v.is_finite() {
                return Err(Error::NonFinite { scenario: s });
            }
            values.push(v);
            if v.abs() <= TOL_CERT_ACT {
                active.push((i, gg));
            }
        }
        let a = DMatrix::from_fn(m, active.len(), |r, k| active[k].1[d + r]);
        let b = DVector::from_fn(m, |r, _| -gf[d + r]);
        let lam = nnls(&a, &b);
        let residual = (&a * &lam - &b).norm();
        let mut lambdas = vec![0.0; prob.g.len()];
        let mut zeta = gf[..d].to_vec();
        for (k, (i, gg)) in active.iter().enumerate() {
            lambdas[*i] = lam[k];
            for (zk, v) in zeta.iter_mut().zip(&gg[..d]) {
                *zk += lam[k] * v;
            }
        }
        Ok::<_, Error>((values, lambdas, zeta, residual))
    })?;
    let stationarity = rows.iter().map(|r| r.3).fold(0.0, f64::max);
    let mut values = Vec::new();
    let mut lambdas = Vec::new();
    let mut zeta = Vec::new();
    for (v, l, zs, _) in rows {
        values.push(v);
        lambdas.push(l);
        zeta.push(zs);
    }
    Ok(finish(prob, None, z, values, lambdas, zeta, stationarity))
}

/// Sampled estimate of the rate of steepest descent of `Φ_c` at `z`.
///
/// The minimum of the exact directional derivative over `directions` random
/// unit directions, plus one steepest-descent candidate built from the
/// first-order model. Directions are projected onto the tangent cone of `A`
/// and normalized in the probability-weighted norm. Nonnegative values
/// indicate approximate inf-stationarity.
pub fn inf_stationarity_measure(
    prob: &TwoStageProblem,
    c: f64,
    z: &Point,
    directions: usize,
    seed: u64,
) -> Result<f64> {
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::InvalidValue(format!("penalty parameter c = {c} must be >= 0")));
    }
    prob.check_point(z)?;
    let integrand = penalty_integrand(prob, c);
    let qds = try_map_scenarios(prob.num_scenarios(), |s| {
        let args = prob.args(z, s);
        if !integrand.eval(args).is_finite() {
            return Err(Error::NonFinite { scenario: s });
        }
        codiff(&integrand, args)?.quasidiff()
    })?;
    let (d, ns) = (prob.d, prob.num_scenarios());
    let probs = prob.probs();

    let rate = |hx: &[f64], hy: &[Vec<f64>]| -> Option<f64> {
        let hx = prob.first_stage.project_tangent(&z.x, hx, TOL_NORMAL);
        let h = Point { x: hx, y: hy.to_vec() };
        let len = h.weighted_norm(probs);
        if !(len > 1e-12) {
            return None;
        }
        let mut acc = 0.0;
        for (s, qd) in qds.iter().enumerate() {
            let mut joint = h.joint(s);
            joint.iter_mut().for_each(|v| *v /= len);
            acc += probs[s] * qd.dirderiv(&joint);
        }
        Some(acc)
    };

    let mut best = f64::INFINITY;
    // Negative model gradient: per scenario the min-norm element of
    // sub + first sup vertex, the x-part averaged.
    let mut hx = vec![0.0; d];
    let mut hy = Vec::with_capacity(ns);
    for (s, qd) in qds.iter().enumerate() {
        let g = min_norm_point(&shifted(&qd.sub, &qd.sup[0])).point;
        for (acc, v) in hx.iter_mut().zip(&g[..d]) {
            *acc -= probs[s] * v;
        }
        hy.push(g[d..].iter().map(|v| -v).collect::<Vec<f64>>());
    }
    if let Some(r) = rate(&hx, &hy) {
        best = best.min(r);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..directions {
        let hx: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let hy: Vec<Vec<f64>> = (0..ns)
            .map(|_| (0..prob.m).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        if let Some(r) = rate(&hx, &hy) {
            best = best.min(r);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{abs, affine, quad, ExprRef};
    use crate::model::{FirstStageSet, ScenarioSpace};

    fn problem(d: usize, m: usize, a: FirstStageSet, f: ExprRef, g: Vec<ExprRef>) -> TwoStageProblem {
        let mut p = TwoStageProblem {
            d,
            m,
            p_exponent: 2.0,
            first_stage: a,
            scenarios: ScenarioSpace { probs: vec![1.0], params: vec![] },
            f,
            g,
            witness: None,
            coercivity_mu: None,
        };
        p.validate().unwrap();
        p
    }

    /// `(y − 1)²` subject to `y ≤ 0` with `x` pinned to 0.
    fn analytic() -> TwoStageProblem {
        let f = quad(vec![vec![0.0, 0.0], vec![0.0, 2.0]], vec![0.0, -2.0], 1.0);
        let g = affine(0.0, vec![], vec![1.0], vec![]);
        let a = FirstStageSet::Box { lower: vec![0.0], upper: vec![0.0] };
        problem(1, 1, a, f, vec![g])
    }

    #[test]
    fn analytic_multiplier() {
        let p = analytic();
        let z = Point::zeros(1, 1, 1);
        let cert = check_optimality(&p, 10.0, &z, None).unwrap();
        assert!((cert.lambdas[0][0] - 2.0).abs() < 1e-9, "{:?}", cert.lambdas);
        assert!(cert.residuals.max() <= 1e-9, "{:?}", cert.residuals);
        assert_eq!(cert.checked_selections, 1);
        let kkt = smooth_kkt_check(&p, &z).unwrap();
        assert!((kkt.lambdas[0][0] - cert.lambdas[0][0]).abs() < 1e-9);
        assert!((kkt.residuals.stationarity - cert.residuals.stationarity).abs() < 1e-9);
        assert!((kkt.residuals.normal_cone - cert.residuals.normal_cone).abs() < 1e-9);
    }

    #[test]
    fn unconstrained_minimum() {
        // (x − 1)² + y², free x: zeta is the x-gradient, here 0.
        let f = quad(vec![vec![2.0, 0.0], vec![0.0, 2.0]], vec![-2.0, 0.0], 1.0);
        let p = problem(1, 1, FirstStageSet::Free, f, vec![]);
        let z = Point { x: vec![1.0], y: vec![vec![0.0]] };
        let cert = check_optimality(&p, 1.0, &z, None).unwrap();
        assert!(cert.residuals.max() <= 1e-9);
        assert!(cert.zeta[0][0].abs() <= 1e-9);
        assert!(smooth_kkt_check(&p, &z).unwrap().lambdas[0].is_empty());
    }

    #[test]
    fn nonstationary_point() {
        let f = quad(vec![vec![0.0, 0.0], vec![0.0, 2.0]], vec![0.0, 0.0], 0.0);
        let p = problem(1, 1, FirstStageSet::Box { lower: vec![0.0], upper: vec![0.0] }, f, vec![]);
        let z = Point { x: vec![0.0], y: vec![vec![1.5]] };
        let cert = check_optimality(&p, 1.0, &z, None).unwrap();
        assert!(cert.residuals.stationarity >= 3.0 - 1e-6);
        let kkt = smooth_kkt_check(&p, &z).unwrap();
        assert!((kkt.residuals.stationarity - 3.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_candidate_rejected() {
        let p = analytic();
        let z = Point { x: vec![0.0], y: vec![vec![0.5]] };
        let err = check_optimality(&p, 10.0, &z, None).unwrap_err();
        assert_eq!(err.code(), "INFEASIBLE_CANDIDATE");
    }

    #[test]
    fn nonsmooth_rejected_by_kkt() {
        let f = abs(affine(0.0, vec![1.0], vec![], vec![]));
        let p = problem(1, 1, FirstStageSet::Free, f, vec![]);
        let err = smooth_kkt_check(&p, &Point::zeros(1, 1, 1)).unwrap_err();
        assert_eq!(err.code(), "NOT_SMOOTH");
    }

    #[test]
    fn kink_minimum_certifies() {
        let f = abs(affine(0.0, vec![1.0], vec![], vec![]));
        let p = problem(1, 1, FirstStageSet::Free, f, vec![]);
        let cert = check_optimality(&p, 1.0, &Point::zeros(1, 1, 1), None).unwrap();
        assert!(cert.residuals.max() <= 1e-9);
    }

    #[test]
    fn nnls_matches_hand_solution() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, -1.0]);
        let x = nnls(&a, &b);
        assert!((x[0] - 2.0).abs() < 1e-14 && x[1] == 0.0);
    }

    #[test]
    fn inf_stationarity_examples() {
        let f = quad(vec![vec![2.0, 0.0], vec![0.0, 2.0]], vec![], 0.0);
        let p = problem(1, 1, FirstStageSet::Free, f, vec![]);
        let m0 = inf_stationarity_measure(&p, 1.0, &Point::zeros(1, 1, 1), 128, 3).unwrap();
        assert!(m0 >= -1e-9);
        let z = Point { x: vec![1.0], y: vec![vec![2.0]] };
        let m1 = inf_stationarity_measure(&p, 1.0, &z, 128, 3).unwrap();
        // Steepest rate is −|∇| = −2√5.
        assert!(m1 <= -2.0 * 5f64.sqrt() + 1e-9, "{m1}");

        let f = abs(affine(0.0, vec![1.0], vec![], vec![]));
        let p = problem(1, 1, FirstStageSet::Free, f, vec![]);
        assert!(inf_stationarity_measure(&p, 1.0, &Point::zeros(1, 1, 1), 128, 3).unwrap() >= 0.0);
    }
}
