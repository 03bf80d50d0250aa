//! The expectation functional `𝓘(x, y) = Σ_s p_s f(x, y_s, θ_s)` and its
//! scenario-blockwise first-order models.

use serde::Serialize;

use crate::codiff::{codiff_with_value, CodiffPair};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::model::{Point, TwoStageProblem};
use crate::par::{try_map_scenarios, weighted_sum};

/// Per-scenario codifferentials of an integrand.
///
/// The codifferential of the expectation is the probability-weighted product
/// of these sets; it is kept factored and never enumerated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockCodiff {
    pub per_scenario: Vec<CodiffPair>,
    pub probs: Vec<f64>,
    /// Integrand values `f(x, y_s, θ_s)`.
    pub values: Vec<f64>,
}

impl BlockCodiff {
    pub fn len(&self) -> usize {
        self.per_scenario.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_scenario.is_empty()
    }

    pub fn value(&self) -> f64 {
        weighted_sum(&self.probs, &self.values)
    }

    /// Largest vertex norm over all scenarios (offset coordinate excluded).
    pub fn max_vertex_norm(&self) -> f64 {
        self.per_scenario
            .iter()
            .flat_map(|cd| cd.hypo.iter().chain(&cd.hyper))
            .map(|v| crate::hull::norm(&v.v))
            .fold(0.0, f64::max)
    }
}

fn joint(dx: &[f64], dy: &[f64]) -> Vec<f64> {
    let mut h = Vec::with_capacity(dx.len() + dy.len());
    h.extend_from_slice(dx);
    h.extend_from_slice(dy);
    h
}

fn finite_or(value: f64, scenario: usize) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { scenario })
    }
}

/// Per-scenario values of an integrand at `z`.
pub fn integrand_values(prob: &TwoStageProblem, e: &Expr, z: &Point) -> Result<Vec<f64>> {
    prob.check_point(z)?;
    try_map_scenarios(prob.num_scenarios(), |s| finite_or(e.eval(prob.args(z, s)), s))
}

/// `Σ_s p_s e(x, y_s, θ_s)`.
pub fn eval_integrand(prob: &TwoStageProblem, e: &Expr, z: &Point) -> Result<f64> {
    let values = integrand_values(prob, e, z)?;
    Ok(weighted_sum(prob.probs(), &values))
}

/// `𝓘(z)`.
pub fn eval_i(prob: &TwoStageProblem, z: &Point) -> Result<f64> {
    eval_integrand(prob, &prob.f, z)
}

/// Block codifferential of an arbitrary integrand.
pub fn block_codiff_of(prob: &TwoStageProblem, e: &Expr, z: &Point) -> Result<BlockCodiff> {
    prob.check_point(z)?;
    let pairs: Vec<(f64, CodiffPair)> = try_map_scenarios(prob.num_scenarios(), |s| {
        let (value, cd) = codiff_with_value(e, prob.args(z, s))?;
        Ok::<_, Error>((finite_or(value, s)?, cd))
    })?;
    let (values, per_scenario) = pairs.into_iter().unzip();
    Ok(BlockCodiff {
        per_scenario,
        probs: prob.probs().to_vec(),
        values,
    })
}

/// Block codifferential of the objective integrand.
pub fn block_codiff(prob: &TwoStageProblem, z: &Point) -> Result<BlockCodiff> {
    block_codiff_of(prob, &prob.f, z)
}

/// `Σ_s p_s · expansion_value(cd_s, (Δx, Δy_s))`.
pub fn i_expansion(bc: &BlockCodiff, dx: &[f64], dy: &[Vec<f64>]) -> f64 {
    let terms: Vec<f64> = bc
        .per_scenario
        .iter()
        .zip(dy)
        .map(|(cd, dys)| cd.expansion_value(&joint(dx, dys)))
        .collect();
    weighted_sum(&bc.probs, &terms)
}

/// Per-scenario directional derivatives `e′(x, y_s, θ_s; h_x, h_{y,s})`.
pub fn scenario_dirderivs(
    prob: &TwoStageProblem,
    e: &Expr,
    z: &Point,
    hx: &[f64],
    hy: &[Vec<f64>],
) -> Result<Vec<f64>> {
    prob.check_point(z)?;
    prob.check_point(&Point { x: hx.to_vec(), y: hy.to_vec() })?;
    try_map_scenarios(prob.num_scenarios(), |s| {
        let (value, cd) = codiff_with_value(e, prob.args(z, s))?;
        finite_or(value, s)?;
        let qd = cd.quasidiff()?;
        finite_or(qd.dirderiv(&joint(hx, &hy[s])), s)
    })
}

/// Directional derivative of `Σ_s p_s e(·, ·, θ_s)`.
pub fn integrand_dirderiv(
    prob: &TwoStageProblem,
    e: &Expr,
    z: &Point,
    hx: &[f64],
    hy: &[Vec<f64>],
) -> Result<f64> {
    let d = scenario_dirderivs(prob, e, z, hx, hy)?;
    Ok(weighted_sum(prob.probs(), &d))
}

/// `𝓘′(z; h)`.
pub fn i_dirderiv(prob: &TwoStageProblem, z: &Point, hx: &[f64], hy: &[Vec<f64>]) -> Result<f64> {
    integrand_dirderiv(prob, &prob.f, z, hx, hy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{abs, affine, constant};
    use crate::model::{FirstStageSet, ScenarioSpace};
    use std::sync::Arc;

    fn problem(f: Arc<Expr>, probs: Vec<f64>, params: Vec<Vec<f64>>) -> TwoStageProblem {
        let mut p = TwoStageProblem {
            d: 1,
            m: 1,
            p_exponent: 2.0,
            first_stage: FirstStageSet::Free,
            scenarios: ScenarioSpace { probs, params },
            f,
            g: vec![],
            witness: None,
            coercivity_mu: None,
        };
        p.validate().unwrap();
        p
    }

    fn abs_x() -> Arc<Expr> {
        abs(affine(0.0, vec![1.0], vec![], vec![]))
    }

    #[test]
    fn eval_examples() {
        let p = problem(abs_x(), vec![0.5, 0.5], vec![]);
        let z = Point { x: vec![-3.0], y: vec![vec![1.0], vec![2.0]] };
        assert_eq!(eval_i(&p, &z).unwrap(), 3.0);

        let theta = affine(0.0, vec![], vec![], vec![1.0]);
        let p = problem(theta, vec![0.25, 0.75], vec![vec![1.0], vec![3.0]]);
        assert_eq!(eval_i(&p, &z).unwrap(), 2.5);
    }

    #[test]
    fn nonfinite_names_scenario() {
        let big = affine(0.0, vec![], vec![1e308], vec![]);
        let p = problem(big, vec![0.5, 0.5], vec![]);
        let z = Point { x: vec![0.0], y: vec![vec![1.0], vec![10.0]] };
        match eval_i(&p, &z).unwrap_err() {
            Error::NonFinite { scenario } => assert_eq!(scenario, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn kink_in_one_scenario() {
        let f = abs(affine(0.0, vec![1.0], vec![-1.0], vec![]));
        let p = problem(f, vec![0.5, 0.5], vec![]);
        let z = Point { x: vec![1.0], y: vec![vec![1.0], vec![0.0]] };
        let bc = block_codiff(&p, &z).unwrap();
        assert_eq!(bc.per_scenario[0].hypo.len(), 2);
        assert_eq!(bc.per_scenario[1].hypo.len(), 2);
        assert!(bc.per_scenario[1].hypo.iter().any(|v| v.a < -1e-3));
        let qd0 = bc.per_scenario[0].quasidiff().unwrap();
        let qd1 = bc.per_scenario[1].quasidiff().unwrap();
        assert_eq!(qd0.sub.len(), 2);
        assert_eq!(qd1.sub.len(), 1);
    }

    #[test]
    fn expansion_and_dirderiv_examples() {
        let p = problem(abs_x(), vec![0.5, 0.5], vec![]);
        let z = Point { x: vec![0.0], y: vec![vec![0.0], vec![0.0]] };
        let bc = block_codiff(&p, &z).unwrap();
        let zero = vec![vec![0.0], vec![0.0]];
        assert_eq!(i_expansion(&bc, &[0.0], &zero), 0.0);
        assert_eq!(i_expansion(&bc, &[1.0], &zero), 1.0);
        assert_eq!(i_dirderiv(&p, &z, &[-2.0], &[vec![5.0], vec![-1.0]]).unwrap(), 2.0);
        assert_eq!(i_dirderiv(&p, &z, &[0.0], &zero).unwrap(), 0.0);
    }

    #[test]
    fn smooth_dirderiv_is_gradient() {
        let f = crate::expr::add(vec![
            crate::expr::quad(vec![vec![2.0, 1.0], vec![1.0, 4.0]], vec![1.0, -1.0], 0.0),
            constant(3.0),
        ]);
        let p = problem(f, vec![0.3, 0.7], vec![]);
        let z = Point { x: vec![0.5], y: vec![vec![1.0], vec![-2.0]] };
        let (hx, hy) = (vec![0.7], vec![vec![-0.3], vec![2.0]]);
        let mut expect = 0.0;
        for s in 0..2 {
            let mut g = vec![0.0; 2];
            p.f.value_grad(p.args(&z, s), &mut g);
            expect += p.probs()[s] * (g[0] * hx[0] + g[1] * hy[s][0]);
        }
        let got = i_dirderiv(&p, &z, &hx, &hy).unwrap();
        assert!((got - expect).abs() < 1e-14);
    }
}
