//! DC decomposition of the `ℓ¹` penalty integrand and the DC algorithm.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codiff::codiff;
use crate::error::{Error, Result};
use crate::expr::{self, simplify_add, simplify_scale, Args, ExprRef};
use crate::model::{Point, TwoStageProblem};
use crate::par::try_map_scenarios;
use crate::penalty::{penalty_integrand, phi_c, phi_l1, PenaltySpec};

use super::descent::{run_convex, status_of, ConvexObjective, EngineStatus};
use super::{HistoryEntry, SolveOptions, SolveReport, SolveStatus, ESCALATION_FACTOR, MAX_ESCALATIONS};

const VERIFY_POINTS: usize = 50;
const VERIFY_TOL: f64 = 1e-9;
const VERIFY_SEED: u64 = 0x00dc_5eed;
/// Slack allowed on the monotone decrease of `Φ_c` between iterates.
const MONOTONE_SLACK: f64 = 1e-12;

/// Convex integrands with `plus − minus = f + c·max{0, g_1, …, g_ℓ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcDecomposition {
    pub plus: ExprRef,
    pub minus: ExprRef,
}

/// Builds `plus = f₁ + c·max{Σ_k g_k2, g_i1 + Σ_{k≠i} g_k2}` and
/// `minus = f₂ + c·Σ_k g_k2` from the splits `f = f₁ − f₂`, `g_i = g_i1 − g_i2`,
/// then checks the identity on sampled points.
pub fn dc_decompose(prob: &TwoStageProblem, c: f64) -> Result<DcDecomposition> {
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::InvalidValue(format!("penalty parameter c = {c} must be >= 0")));
    }
    let dims = prob.dims();
    let (f1, f2) = prob.f.dc_split(dims).map_err(|e| Error::NotDc(e.to_string()))?;
    let parts = prob
        .g
        .iter()
        .map(|g| g.dc_split(dims).map_err(|e| Error::NotDc(e.to_string())))
        .collect::<Result<Vec<_>>>()?;

    let (plus, minus) = if parts.is_empty() {
        (f1, f2)
    } else {
        let concave_sum = simplify_add(parts.iter().map(|(_, q)| q.clone()).collect());
        let mut branches = vec![concave_sum.clone()];
        for (i, (p, _)) in parts.iter().enumerate() {
            let mut terms = vec![p.clone()];
            terms.extend(parts.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, (_, q))| q.clone()));
            branches.push(simplify_add(terms));
        }
        (
            simplify_add(vec![f1, simplify_scale(c, expr::max(branches))]),
            simplify_add(vec![f2, simplify_scale(c, concave_sum)]),
        )
    };
    if !plus.is_convex() || !minus.is_convex() {
        return Err(Error::NotDc("decomposition parts are not structurally convex".into()));
    }

    let target = penalty_integrand(prob, c);
    let mut rng = ChaCha8Rng::seed_from_u64(VERIFY_SEED);
    let base = prob.witness.clone().unwrap_or_else(|| Point::zeros(prob.d, prob.m, prob.num_scenarios()));
    for k in 0..VERIFY_POINTS {
        let s = k % prob.num_scenarios();
        let x: Vec<f64> = base.x.iter().map(|v| v + rng.gen_range(-3.0..3.0)).collect();
        let y: Vec<f64> = base.y[s].iter().map(|v| v + rng.gen_range(-3.0..3.0)).collect();
        let args = Args::new(&x, &y, &prob.scenarios.params[s]);
        let (p, q, t) = (plus.eval(args), minus.eval(args), target.eval(args));
        if !((p - q) - t).abs().le(&(VERIFY_TOL * (1.0 + p.abs() + q.abs()))) {
            return Err(Error::NotDc(format!(
                "decomposition identity fails by {:e} in scenario {s}",
                ((p - q) - t).abs()
            )));
        }
    }
    Ok(DcDecomposition { plus, minus })
}

fn weighted_step(a: &Point, b: &Point, probs: &[f64]) -> f64 {
    let mut acc: f64 = a.x.iter().zip(&b.x).map(|(u, v)| (u - v) * (u - v)).sum();
    for ((ya, yb), p) in a.y.iter().zip(&b.y).zip(probs) {
        acc += p * ya.iter().zip(yb).map(|(u, v)| (u - v) * (u - v)).sum::<f64>();
    }
    acc.sqrt()
}

/// Subgradients of the `minus` integrand per scenario.
fn linearization(prob: &TwoStageProblem, minus: &ExprRef, z: &Point) -> Result<Vec<Vec<f64>>> {
    try_map_scenarios(prob.num_scenarios(), |s| {
        let qd = codiff(minus, prob.args(z, s))?.quasidiff()?;
        Ok(qd.sub.into_iter().next().expect("nonempty subdifferential"))
    })
}

/// DC algorithm on `Φ_c = 𝓔_plus − 𝓔_minus`.
pub fn dca_solve(prob: &TwoStageProblem, c: f64, z0: &Point, opts: &SolveOptions) -> Result<SolveReport> {
    prob.check_point(z0)?;
    if !z0.is_finite() {
        return Err(Error::InvalidValue("starting point is not finite".into()));
    }
    let max_iter = opts.max_iter.unwrap_or(500);
    let probs = prob.probs();
    let mut c = c;
    let mut z = Point { x: prob.first_stage.project(&z0.x), y: z0.y.clone() };
    let mut history = Vec::new();
    let mut iterates = 0;
    let mut escalations = 0;

    let status = 'escalate: loop {
        let dec = dc_decompose(prob, c)?;
        let spec = PenaltySpec::l1(c);
        let mut value = phi_c(prob, spec, &z)?;
        history.push(HistoryEntry { value, phi: phi_l1(prob, &z)?, step: 0.0 });
        let mut status = SolveStatus::IterationCap;
        for _ in 0..max_iter {
            let linear = match linearization(prob, &dec.minus, &z) {
                Ok(l) => l,
                Err(Error::VertexCap { .. }) => break 'escalate SolveStatus::VertexCap,
                Err(e) => return Err(e),
            };
            let obj = ConvexObjective { integrand: dec.plus.clone(), linear };
            let run = match run_convex(prob, &obj, &z, opts) {
                Ok(r) => r,
                Err(Error::VertexCap { .. }) => break 'escalate SolveStatus::VertexCap,
                Err(e) => return Err(e),
            };
            iterates += 1;
            let next_value = phi_c(prob, spec, &run.point)?;
            if next_value > value + MONOTONE_SLACK {
                status = SolveStatus::Stalled;
                break;
            }
            let step = weighted_step(&run.point, &z, probs);
            let decrease = value - next_value;
            z = run.point;
            value = next_value;
            history.push(HistoryEntry { value, phi: phi_l1(prob, &z)?, step });
            if decrease < opts.tol_obj || step < opts.tol_step {
                status = match run.status {
                    EngineStatus::Converged => SolveStatus::Converged,
                    other => status_of(other),
                };
                break;
            }
        }
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
    Ok(SolveReport {
        solver: "dca".into(),
        iterates,
        final_value: phi_c(prob, PenaltySpec::l1(c), &z)?,
        final_phi: phi_l1(prob, &z)?,
        final_point: z,
        status,
        c,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{affine, dc, quad};
    use crate::model::{FirstStageSet, ScenarioSpace};

    fn problem(f: ExprRef, g: Vec<ExprRef>) -> TwoStageProblem {
        let mut p = TwoStageProblem {
            d: 1,
            m: 1,
            p_exponent: 2.0,
            first_stage: FirstStageSet::Free,
            scenarios: ScenarioSpace { probs: vec![1.0], params: vec![] },
            f,
            g,
            witness: None,
            coercivity_mu: None,
        };
        p.validate().unwrap();
        p
    }

    fn sq(i: usize) -> ExprRef {
        let mut q = vec![vec![0.0; 2]; 2];
        q[i][i] = 2.0;
        quad(q, vec![], 0.0)
    }

    #[test]
    fn decomposition_examples() {
        let f = sq(0);
        let dec = dc_decompose(&problem(f.clone(), vec![]), 3.0).unwrap();
        assert_eq!(dec.plus, f);
        assert!(dec.minus.is_zero_constant());

        let f = dc(sq(0), sq(1));
        let dec = dc_decompose(&problem(f, vec![]), 3.0).unwrap();
        assert_eq!((dec.plus, dec.minus), (sq(0), sq(1)));

        let g1 = affine(-1.0, vec![], vec![1.0], vec![]);
        let g2 = sq(0);
        let g = dc(g1.clone(), g2.clone());
        let dec = dc_decompose(&problem(sq(1), vec![g]), 1.0).unwrap();
        assert_eq!(dec.plus, expr::add(vec![sq(1), expr::max(vec![g2.clone(), g1])]));
        assert_eq!(dec.minus, g2);
    }

    #[test]
    fn convex_problem_is_one_solve() {
        let f = quad(vec![vec![2.0, 0.0], vec![0.0, 2.0]], vec![-2.0, -4.0], 0.0);
        let g = affine(-1.0, vec![], vec![1.0], vec![]);
        let p = problem(f, vec![g]);
        let rep = dca_solve(&p, 10.0, &Point::zeros(1, 1, 1), &SolveOptions::default()).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged);
        assert!((rep.final_point.x[0] - 1.0).abs() < 1e-6);
        assert!((rep.final_point.y[0][0] - 1.0).abs() < 1e-6);
        assert!(rep.iterates <= 2);
    }

    #[test]
    fn coupled_instance_is_monotone() {
        // min (x−2)² + (y−x)²  s.t.  y ≤ 1, written with a dc objective.
        let f = dc(
            quad(vec![vec![6.0, -2.0], vec![-2.0, 2.0]], vec![-4.0, 0.0], 4.0),
            quad(vec![vec![2.0, 0.0], vec![0.0, 0.0]], vec![], 0.0),
        );
        let g = affine(-1.0, vec![], vec![1.0], vec![]);
        let p = problem(f, vec![g]);
        let rep = dca_solve(&p, 10.0, &Point { x: vec![-3.0], y: vec![vec![4.0]] }, &SolveOptions::default()).unwrap();
        assert!(rep.status.is_success(), "{:?}", rep.status);
        for w in rep.history.windows(2) {
            assert!(w[1].value <= w[0].value + 1e-12);
        }
        // Optimum: y = 1, x = 1.5, value 0.5.
        assert!((rep.final_value - 0.5).abs() < 1e-6, "{}", rep.final_value);
    }
}
