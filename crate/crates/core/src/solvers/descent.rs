//! Codifferential descent in the probability-weighted space.
//!
//! At an iterate `z` the engine builds, per scenario, the codifferential of
//! the integrand and lifts each hypodifferential vertex `(a, v_x, v_y)` to
//! `(p_s a, p_s v_x, √p_s v_y)` in `ℝ^{1+d+mS}`, the `v_y` part landing in
//! the block of scenario `s`. The expectation's hypodifferential is the
//! Minkowski sum of these blocks, and its minimum-norm element (plus a
//! truncated normal cone of `A`) yields both the stationarity measure and the
//! search direction. Every selection of hyperdifferential vertices gives one
//! such model; convergence requires all enumerated selections to be small.

use serde::{Deserialize, Serialize};

use crate::codiff::{codiff, AugVector, CodiffPair, TOL_ZERO};
use crate::error::{Error, Result};
use crate::expr::{Expr, ExprRef};
use crate::hull::{min_norm_minkowski, Block};
use crate::model::{Point, TwoStageProblem};
use crate::par::{try_map_scenarios, weighted_sum};
use crate::penalty::{penalty_integrand, phi_l1};

use super::{
    HistoryEntry, SolveOptions, SolveReport, SolveStatus, ESCALATION_FACTOR, MAX_ESCALATIONS,
};

/// Bounds closer than this count as active in the normal cone of `A`.
const NORMAL_TOL: f64 = 1e-9;
const MAX_SELECTIONS: usize = 16;
const MAX_SNAPS: usize = 10;
const ALPHA_MAX: f64 = 1e10;
const SUPPORT_TOL: f64 = 1e-9;
/// Offset gaps tried by the terminal snap, widest first.
const SNAP_GAPS: &[f64] = &[f64::INFINITY, 1e-4, 1e-6];
/// Offset cut-offs of the truncated hypodifferentials tried as extra directions.
const TRUNCATION_LEVELS: &[f64] = &[1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-6, 0.0];

/// Convex expectation `Σ_s p_s [e(x, y_s, θ_s) − ℓ_s·(x, y_s)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexObjective {
    pub integrand: ExprRef,
    /// Per-scenario linear terms in `(x, y_s)` coordinates; empty for none.
    #[serde(default)]
    pub linear: Vec<Vec<f64>>,
}

pub(crate) struct Objective<'a> {
    pub integrand: &'a Expr,
    pub linear: &'a [Vec<f64>],
}

impl Objective<'_> {
    fn scenario_value(&self, prob: &TwoStageProblem, z: &Point, s: usize) -> f64 {
        let mut v = self.integrand.eval(prob.args(z, s));
        if let Some(l) = self.linear.get(s) {
            let (lx, ly) = l.split_at(prob.d);
            v -= crate::hull::dot(lx, &z.x) + crate::hull::dot(ly, &z.y[s]);
        }
        v
    }

    pub fn value(&self, prob: &TwoStageProblem, z: &Point) -> Result<f64> {
        let vals = try_map_scenarios(prob.num_scenarios(), |s| {
            let v = self.scenario_value(prob, z, s);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite { scenario: s })
            }
        })?;
        Ok(weighted_sum(prob.probs(), &vals))
    }

    fn scenario_codiff(&self, prob: &TwoStageProblem, z: &Point, s: usize) -> Result<CodiffPair> {
        let mut cd = codiff(self.integrand, prob.args(z, s))?;
        if let Some(l) = self.linear.get(s) {
            for p in &mut cd.hypo {
                for (vi, li) in p.v.iter_mut().zip(l) {
                    *vi -= li;
                }
            }
        }
        Ok(cd)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct EngineParams {
    pub tol_stat: f64,
    pub max_iter: usize,
    pub hyper_offset_cap: f64,
    pub sigma: f64,
    pub max_halvings: usize,
}

impl EngineParams {
    pub fn from_options(opts: &SolveOptions, max_iter: usize) -> Self {
        EngineParams {
            tol_stat: opts.tol_stat,
            max_iter,
            hyper_offset_cap: opts.hyper_offset_cap,
            sigma: opts.sigma,
            max_halvings: opts.max_halvings,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum EngineStatus {
    Converged,
    IterationCap,
    Stalled,
}

pub(crate) struct EngineResult {
    pub point: Point,
    pub iterations: usize,
    pub status: EngineStatus,
}

/// Minimum-norm model of one hyperdifferential selection.
struct SelectionModel {
    norm: f64,
    direction: Point,
    /// Per scenario: raw augmented vertices `(a + b_w, v + w)` and their weights.
    support: Vec<(Vec<AugVector>, Vec<f64>)>,
    /// Normal generators carrying weight.
    normals: Vec<Vec<f64>>,
}

impl SelectionModel {
    fn exact(&self) -> bool {
        self.support.iter().all(|(verts, w)| {
            verts
                .iter()
                .zip(w)
                .all(|(v, &wi)| wi <= SUPPORT_TOL || v.a.abs() <= TOL_ZERO)
        })
    }
}

pub(crate) fn selections(counts: &[usize]) -> Vec<Vec<usize>> {
    let total = counts
        .iter()
        .try_fold(1usize, |acc, &k| acc.checked_mul(k))
        .unwrap_or(usize::MAX);
    if total <= MAX_SELECTIONS {
        let mut out = Vec::with_capacity(total);
        for mut code in 0..total {
            out.push(
                counts
                    .iter()
                    .map(|&k| {
                        let c = code % k;
                        code /= k;
                        c
                    })
                    .collect(),
            );
        }
        return out;
    }
    let base = vec![0; counts.len()];
    let mut out = vec![base.clone()];
    'outer: for (s, &k) in counts.iter().enumerate() {
        for alt in 1..k {
            if out.len() >= MAX_SELECTIONS {
                break 'outer;
            }
            let mut sel = base.clone();
            sel[s] = alt;
            out.push(sel);
        }
    }
    out
}

fn local_models(
    prob: &TwoStageProblem,
    obj: &Objective<'_>,
    z: &Point,
    params: &EngineParams,
) -> Result<Vec<(SelectionModel, Vec<Point>)>> {
    let (d, m, ns) = (prob.d, prob.m, prob.num_scenarios());
    let dim = 1 + d + m * ns;
    let probs = prob.probs();
    let cds = try_map_scenarios(ns, |s| obj.scenario_codiff(prob, z, s))?;

    let candidates: Vec<Vec<&AugVector>> = cds
        .iter()
        .map(|cd| {
            let mut c: Vec<&AugVector> = cd
                .hyper
                .iter()
                .filter(|w| w.a <= params.hyper_offset_cap + TOL_ZERO)
                .collect();
            c.sort_by(|a, b| a.a.total_cmp(&b.a));
            c
        })
        .collect();
    let counts: Vec<usize> = candidates.iter().map(Vec::len).collect();
    if counts.iter().any(|&k| k == 0) {
        return Err(Error::Inconsistent("hyperdifferential has no zero-offset vertex".into()));
    }

    let lift = |s: usize, a: f64, v: &[f64]| -> Vec<f64> {
        let p = probs[s];
        let sp = p.sqrt();
        let mut out = Vec::with_capacity(1 + d + m);
        out.push(p * a);
        out.extend(v[..d].iter().map(|x| p * x));
        out.extend(v[d..].iter().map(|y| sp * y));
        out
    };
    let coords_of = |s: usize| -> Vec<usize> {
        let mut c: Vec<usize> = (0..=d).collect();
        c.extend((0..m).map(|j| 1 + d + s * m + j));
        c
    };

    let gens = prob.first_stage.normal_generators(&z.x, NORMAL_TOL);
    let mut bound = 0.0;
    for (s, cd) in cds.iter().enumerate() {
        let mut best = 0.0f64;
        for w in &candidates[s] {
            for h in &cd.hypo {
                let v: Vec<f64> = h.v.iter().zip(&w.v).map(|(a, b)| a + b).collect();
                best = best.max(crate::hull::norm(&lift(s, h.a + w.a, &v)));
            }
        }
        bound += best;
    }
    let reach = 2.0 * bound + 1.0;
    let normal_blocks: Vec<Block> = gens
        .iter()
        .map(|g| Block {
            coords: (1..=d).collect(),
            vertices: vec![vec![0.0; d], g.iter().map(|v| reach * v).collect()],
        })
        .collect();

    let solve = |sel: &[usize], mu: f64| -> SelectionModel {
        let mut raw = Vec::with_capacity(ns);
        let mut blocks = Vec::with_capacity(ns + normal_blocks.len());
        for s in 0..ns {
            let w = candidates[s][sel[s]];
            let verts: Vec<AugVector> = cds[s]
                .hypo
                .iter()
                .filter(|h| h.a >= -mu)
                .map(|h| AugVector::new(h.a + w.a, h.v.iter().zip(&w.v).map(|(a, b)| a + b).collect()))
                .collect();
            blocks.push(Block {
                coords: coords_of(s),
                vertices: verts.iter().map(|v| lift(s, v.a, &v.v)).collect(),
            });
            raw.push(verts);
        }
        blocks.extend(normal_blocks.iter().cloned());
        let res = min_norm_minkowski(dim, &blocks);
        let q = &res.point;
        let direction = Point {
            x: q[1..=d].iter().map(|v| -v).collect(),
            y: (0..ns)
                .map(|s| {
                    let sp = probs[s].sqrt();
                    q[1 + d + s * m..1 + d + (s + 1) * m].iter().map(|v| -v / sp).collect()
                })
                .collect(),
        };
        let support = raw.into_iter().zip(res.weights.iter().cloned()).collect();
        let normals = gens
            .iter()
            .zip(&res.weights[ns..])
            .filter(|(_, w)| w[1] > SUPPORT_TOL)
            .map(|(g, _)| g.clone())
            .collect();
        SelectionModel {
            norm: res.norm(),
            direction,
            support,
            normals,
        }
    };

    // Offsets present below zero decide which truncation levels differ.
    let offsets: Vec<f64> = cds
        .iter()
        .flat_map(|cd| cd.hypo.iter().map(|h| -h.a))
        .filter(|&a| a > 0.0)
        .collect();
    let mut models = Vec::new();
    for sel in selections(&counts) {
        let full = solve(&sel, f64::INFINITY);
        let mut extra = Vec::new();
        let mut seen_counts = vec![offsets.len()];
        for &mu in TRUNCATION_LEVELS {
            let kept = offsets.iter().filter(|&&a| a <= mu).count();
            if seen_counts.contains(&kept) {
                continue;
            }
            seen_counts.push(kept);
            let mdl = solve(&sel, mu);
            if mdl.norm > 0.0 {
                extra.push(mdl.direction);
            }
        }
        models.push((full, extra));
    }
    Ok(models)
}

fn weighted_dist2(a: &Point, b: &Point, probs: &[f64]) -> f64 {
    let mut acc: f64 = a.x.iter().zip(&b.x).map(|(u, v)| (u - v) * (u - v)).sum();
    for ((ya, yb), p) in a.y.iter().zip(&b.y).zip(probs) {
        acc += p * ya.iter().zip(yb).map(|(u, v)| (u - v) * (u - v)).sum::<f64>();
    }
    acc
}

fn arc_point(prob: &TwoStageProblem, z: &Point, h: &Point, alpha: f64) -> Point {
    let moved = z.axpy(alpha, h);
    Point {
        x: prob.first_stage.project(&moved.x),
        y: moved.y,
    }
}

/// Moves onto the kink the minimum-norm model leans on: solves, in the least
/// norm sense, for the step that equalizes every supporting piece with the
/// active one while keeping the supporting faces of `A`.
/// Pieces whose offset trails the top one by more than `gap` are left out.
fn snap(prob: &TwoStageProblem, z: &Point, model: &SelectionModel, gap: f64) -> Option<Point> {
    let (d, m, ns) = (prob.d, prob.m, prob.num_scenarios());
    let nvar = d + m * ns;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    for (s, (verts, w)) in model.support.iter().enumerate() {
        let top = verts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.a.total_cmp(&b.1.a))
            .map(|(i, _)| i)?;
        for (j, v) in verts.iter().enumerate() {
            if j == top || w[j] <= SUPPORT_TOL || verts[top].a - v.a > gap {
                continue;
            }
            let mut row = vec![0.0; nvar];
            for k in 0..d {
                row[k] = v.v[k] - verts[top].v[k];
            }
            for k in 0..m {
                row[d + s * m + k] = v.v[d + k] - verts[top].v[d + k];
            }
            rows.push(row);
            rhs.push(verts[top].a - v.a);
        }
    }
    for g in &model.normals {
        let mut row = vec![0.0; nvar];
        row[..d].copy_from_slice(g);
        rows.push(row);
        rhs.push(0.0);
    }
    if rows.is_empty() {
        return None;
    }
    let a = nalgebra::DMatrix::from_fn(rows.len(), nvar, |i, j| rows[i][j]);
    let b = nalgebra::DVector::from_vec(rhs);
    let sol = a.svd(true, true).solve(&b, 1e-12).ok()?;
    let step = Point {
        x: sol.as_slice()[..d].to_vec(),
        y: (0..ns)
            .map(|s| sol.as_slice()[d + s * m..d + (s + 1) * m].to_vec())
            .collect(),
    };
    let next = arc_point(prob, z, &step, 1.0);
    next.is_finite().then_some(next)
}

/// Armijo search along the projection arc, starting from twice the previous
/// step and extrapolating while the first trial is accepted.
fn line_search(
    prob: &TwoStageProblem,
    obj: &Objective<'_>,
    z: &Point,
    f: f64,
    dir: &Point,
    alpha_prev: f64,
    params: &EngineParams,
) -> Option<(Point, f64, f64, f64)> {
    let probs = prob.probs();
    let trial_at = |alpha: f64| -> Option<(Point, f64, f64, f64)> {
        let trial = arc_point(prob, z, dir, alpha);
        let dist2 = weighted_dist2(&trial, z, probs);
        if dist2 == 0.0 {
            return None;
        }
        let ft = obj.value(prob, &trial).ok()?;
        (ft <= f - params.sigma / alpha * dist2).then(|| (trial, ft, alpha, dist2.sqrt()))
    };
    let search = |start: f64| -> Option<(Point, f64, f64, f64)> {
        let mut alpha = start;
        for k in 0..=params.max_halvings {
            if let Some(mut best) = trial_at(alpha) {
                if k == 0 {
                    while best.2 < ALPHA_MAX {
                        match trial_at(2.0 * best.2) {
                            Some(next) if next.1 < best.1 => best = next,
                            _ => break,
                        }
                    }
                }
                return Some(best);
            }
            if arc_point(prob, z, dir, alpha) == *z {
                return None;
            }
            alpha *= 0.5;
        }
        None
    };
    let warm = (2.0 * alpha_prev).min(ALPHA_MAX);
    let found = search(warm);
    // A collapsed warm start cannot extrapolate through roundoff-level
    // differences; a fresh search from the unit step recovers.
    if warm >= 1.0 {
        return found;
    }
    match (found, search(1.0)) {
        (Some(a), Some(b)) => Some(if b.1 < a.1 { b } else { a }),
        (a, b) => a.or(b),
    }
}

/// Runs the descent engine; `observe` sees every accepted iterate with its
/// value and step length.
pub(crate) fn descend(
    prob: &TwoStageProblem,
    obj: &Objective<'_>,
    z0: &Point,
    params: &EngineParams,
    observe: &mut dyn FnMut(&Point, f64, f64) -> Result<()>,
) -> Result<EngineResult> {
    prob.check_point(z0)?;
    if !z0.is_finite() {
        return Err(Error::InvalidValue("starting point is not finite".into()));
    }
    let probs = prob.probs();
    let mut z = Point {
        x: prob.first_stage.project(&z0.x),
        y: z0.y.clone(),
    };
    let mut f = obj.value(prob, &z)?;
    let mut alpha_prev: f64 = 0.5;
    let mut snaps = 0;

    for it in 0..params.max_iter {
        let models = local_models(prob, obj, &z, params)?;
        let stat = models.iter().map(|(mdl, _)| mdl.norm).fold(0.0, f64::max);
        if stat <= params.tol_stat {
            let worst = models
                .iter()
                .map(|(mdl, _)| mdl)
                .max_by(|a, b| a.norm.total_cmp(&b.norm))
                .expect("at least one selection");
            if worst.exact() || snaps >= MAX_SNAPS {
                return Ok(EngineResult { point: z, iterations: it, status: EngineStatus::Converged });
            }
            snaps += 1;
            let snapped = SNAP_GAPS.iter().find_map(|&gap| {
                let next = snap(prob, &z, worst, gap)?;
                let fn_ = obj.value(prob, &next).ok()?;
                (fn_ <= f + 1e-12 * (1.0 + f.abs()) && next != z).then_some((next, fn_))
            });
            if let Some((next, fn_)) = snapped {
                let step = weighted_dist2(&next, &z, probs).sqrt();
                z = next;
                f = fn_.min(f);
                observe(&z, f, step)?;
                continue;
            }
            return Ok(EngineResult { point: z, iterations: it, status: EngineStatus::Converged });
        }

        let mut directions: Vec<&Point> = Vec::new();
        for (mdl, extra) in &models {
            if mdl.norm > params.tol_stat {
                directions.push(&mdl.direction);
            }
            directions.extend(extra.iter());
        }
        let mut accepted: Option<(Point, f64, f64, f64)> = None;
        for dir in directions {
            let Some(cand) = line_search(prob, obj, &z, f, dir, alpha_prev, params) else {
                continue;
            };
            if accepted.as_ref().map_or(true, |best| cand.1 < best.1) {
                accepted = Some(cand);
            }
        }
        match accepted {
            Some((trial, ft, alpha, step)) => {
                z = trial;
                f = ft;
                alpha_prev = alpha;
                observe(&z, f, step)?;
            }
            None => {
                return Ok(EngineResult { point: z, iterations: it, status: EngineStatus::Stalled });
            }
        }
    }
    Ok(EngineResult {
        point: z,
        iterations: params.max_iter,
        status: EngineStatus::IterationCap,
    })
}

/// Minimizes a structurally convex expectation over `A × (ℝ^m)^S`.
///
/// The result never has a larger objective than the (projected) start.
pub fn convex_subsolve(
    prob: &TwoStageProblem,
    objective: &ConvexObjective,
    z0: &Point,
    opts: &SolveOptions,
) -> Result<Point> {
    Ok(run_convex(prob, objective, z0, opts)?.point)
}

pub(crate) fn run_convex(
    prob: &TwoStageProblem,
    objective: &ConvexObjective,
    z0: &Point,
    opts: &SolveOptions,
) -> Result<EngineResult> {
    if !objective.integrand.is_convex() {
        return Err(Error::InvalidValue("subproblem integrand is not structurally convex".into()));
    }
    if !objective.linear.is_empty() {
        if objective.linear.len() != prob.num_scenarios()
            || objective.linear.iter().any(|l| l.len() != prob.d + prob.m)
        {
            return Err(Error::InvalidValue("linear terms must be one (d+m)-vector per scenario".into()));
        }
    }
    let obj = Objective {
        integrand: &objective.integrand,
        linear: &objective.linear,
    };
    let params = EngineParams::from_options(opts, opts.inner_max_iter);
    descend(prob, &obj, z0, &params, &mut |_, _, _| Ok(()))
}

pub(crate) fn status_of(status: EngineStatus) -> SolveStatus {
    match status {
        EngineStatus::Converged => SolveStatus::Converged,
        EngineStatus::IterationCap => SolveStatus::IterationCap,
        EngineStatus::Stalled => SolveStatus::Stalled,
    }
}

/// Codifferential descent on `Φ_c` with the `ℓ¹` penalty term.
pub fn codiff_descent(prob: &TwoStageProblem, c: f64, z0: &Point, opts: &SolveOptions) -> Result<SolveReport> {
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::InvalidValue(format!("penalty parameter c = {c} must be >= 0")));
    }
    let max_iter = opts.max_iter.unwrap_or(1000);
    let mut c = c;
    let mut z = z0.clone();
    let mut history = Vec::new();
    let mut iterates = 0;
    let mut escalations = 0;
    let status = loop {
        let integrand = penalty_integrand(prob, c);
        let obj = Objective { integrand: &integrand, linear: &[] };
        prob.check_point(&z)?;
        let start = Point { x: prob.first_stage.project(&z.x), y: z.y.clone() };
        history.push(HistoryEntry {
            value: obj.value(prob, &start)?,
            phi: phi_l1(prob, &start)?,
            step: 0.0,
        });
        let params = EngineParams::from_options(opts, max_iter);
        let mut observe = |p: &Point, v: f64, step: f64| -> Result<()> {
            history.push(HistoryEntry { value: v, phi: phi_l1(prob, p)?, step });
            Ok(())
        };
        let run = match descend(prob, &obj, &start, &params, &mut observe) {
            Ok(run) => run,
            Err(Error::VertexCap { .. }) => {
                z = start;
                break SolveStatus::VertexCap;
            }
            Err(e) => return Err(e),
        };
        iterates += run.iterations;
        z = run.point;
        let status = status_of(run.status);
        let infeasible = phi_l1(prob, &z)? > opts.tol_feas;
        if status == SolveStatus::Converged && opts.escalate && infeasible && escalations < MAX_ESCALATIONS {
            c *= ESCALATION_FACTOR;
            escalations += 1;
            continue;
        }
        break if status == SolveStatus::Converged && escalations > 0 {
            SolveStatus::PenaltyEscalated(escalations)
        } else {
            status
        };
    };
    let final_value = crate::penalty::phi_c(prob, crate::penalty::PenaltySpec::l1(c), &z)?;
    Ok(SolveReport {
        solver: "cd".into(),
        iterates,
        final_phi: phi_l1(prob, &z)?,
        final_value,
        final_point: z,
        status,
        c,
        history,
    })
}
