//! Two-stage problem data model and its JSON file schema.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, VarBlock};
use crate::expr::{Args, Dims, ExprRef};
use crate::hull::{dot, norm};

/// Allowed deviation of the probability sum from one.
pub const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpace {
    pub probs: Vec<f64>,
    #[serde(default)]
    pub params: Vec<Vec<f64>>,
}

impl ScenarioSpace {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Dimension `q` of the scenario parameter.
    pub fn param_dim(&self) -> usize {
        self.params.first().map_or(0, Vec::len)
    }

    fn validate(&mut self) -> Result<()> {
        if self.probs.is_empty() {
            return Err(Error::InvalidValue("at least one scenario is required".into()));
        }
        for (s, &p) in self.probs.iter().enumerate() {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::ProbNonPositive { scenario: s, prob: p });
            }
        }
        let sum: f64 = self.probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::ProbSum { sum });
        }
        if self.params.is_empty() {
            self.params = vec![Vec::new(); self.probs.len()];
        }
        if self.params.len() != self.probs.len() {
            return Err(Error::InvalidValue(format!(
                "{} parameter vectors for {} scenarios",
                self.params.len(),
                self.probs.len()
            )));
        }
        let q = self.param_dim();
        for theta in &self.params {
            if theta.len() != q {
                return Err(Error::DimMismatch {
                    block: VarBlock::Theta,
                    expected: q,
                    found: theta.len(),
                });
            }
            if theta.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidValue("non-finite scenario parameter".into()));
            }
        }
        Ok(())
    }
}

/// Convex first-stage set `A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FirstStageSet {
    Free,
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl FirstStageSet {
    fn validate(&self, d: usize) -> Result<()> {
        match self {
            FirstStageSet::Free => Ok(()),
            FirstStageSet::Box { lower, upper } => {
                if lower.len() != d || upper.len() != d {
                    return Err(Error::DimMismatch {
                        block: VarBlock::X,
                        expected: d,
                        found: lower.len().max(upper.len()),
                    });
                }
                if lower.iter().zip(upper).any(|(l, u)| !(l <= u) || l.is_nan() || u.is_nan()) {
                    return Err(Error::InvalidSet("box requires lower <= upper".into()));
                }
                Ok(())
            }
            FirstStageSet::Ball { center, radius } => {
                if center.len() != d {
                    return Err(Error::DimMismatch {
                        block: VarBlock::X,
                        expected: d,
                        found: center.len(),
                    });
                }
                if !(*radius > 0.0 && radius.is_finite()) || center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidSet("ball requires a finite radius > 0".into()));
                }
                Ok(())
            }
        }
    }

    pub fn is_bounded(&self) -> bool {
        match self {
            FirstStageSet::Free => false,
            FirstStageSet::Box { lower, upper } => lower
                .iter()
                .chain(upper)
                .all(|v| v.is_finite()),
            FirstStageSet::Ball { .. } => true,
        }
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        match self {
            FirstStageSet::Free => x.to_vec(),
            FirstStageSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (l, u))| v.clamp(*l, *u))
                .collect(),
            FirstStageSet::Ball { center, radius } => {
                let diff: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
                let r = norm(&diff);
                if r <= *radius {
                    x.to_vec()
                } else {
                    center
                        .iter()
                        .zip(&diff)
                        .map(|(c, dv)| c + dv * radius / r)
                        .collect()
                }
            }
        }
    }

    /// Euclidean distance from `x` to the set.
    pub fn distance(&self, x: &[f64]) -> f64 {
        let p = self.project(x);
        x.iter()
            .zip(&p)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Unit generators of the normal cone at `x` (bounds within `tol` count as active).
    pub fn normal_generators(&self, x: &[f64], tol: f64) -> Vec<Vec<f64>> {
        let d = x.len();
        match self {
            FirstStageSet::Free => Vec::new(),
            FirstStageSet::Box { lower, upper } => {
                let mut gens = Vec::new();
                for i in 0..d {
                    if x[i] >= upper[i] - tol {
                        let mut e = vec![0.0; d];
                        e[i] = 1.0;
                        gens.push(e);
                    }
                    if x[i] <= lower[i] + tol {
                        let mut e = vec![0.0; d];
                        e[i] = -1.0;
                        gens.push(e);
                    }
                }
                gens
            }
            FirstStageSet::Ball { center, radius } => {
                let diff: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
                let r = norm(&diff);
                if r >= radius - tol && r > 0.0 {
                    vec![diff.iter().map(|v| v / r).collect()]
                } else {
                    Vec::new()
                }
            }
        }
    }

    /// Projection of a direction onto the tangent cone at `x`.
    pub fn project_tangent(&self, x: &[f64], h: &[f64], tol: f64) -> Vec<f64> {
        match self {
            FirstStageSet::Free => h.to_vec(),
            FirstStageSet::Box { lower, upper } => h
                .iter()
                .enumerate()
                .map(|(i, &hi)| {
                    let at_upper = x[i] >= upper[i] - tol;
                    let at_lower = x[i] <= lower[i] + tol;
                    if (at_upper && hi > 0.0) || (at_lower && hi < 0.0) {
                        0.0
                    } else {
                        hi
                    }
                })
                .collect(),
            FirstStageSet::Ball { .. } => {
                let gens = self.normal_generators(x, tol);
                match gens.first() {
                    Some(u) => {
                        let t = dot(h, u);
                        if t > 0.0 {
                            h.iter().zip(u).map(|(hi, ui)| hi - t * ui).collect()
                        } else {
                            h.to_vec()
                        }
                    }
                    None => h.to_vec(),
                }
            }
        }
    }

    /// `dist(v, N_A(x))`.
    pub fn normal_cone_distance(&self, x: &[f64], v: &[f64], tol: f64) -> f64 {
        match self {
            FirstStageSet::Free => norm(v),
            FirstStageSet::Box { lower, upper } => v
                .iter()
                .enumerate()
                .map(|(i, &vi)| {
                    let at_upper = x[i] >= upper[i] - tol;
                    let at_lower = x[i] <= lower[i] + tol;
                    let r = match (at_lower, at_upper) {
                        (true, true) => 0.0,
                        (false, true) => vi.min(0.0),
                        (true, false) => vi.max(0.0),
                        (false, false) => vi,
                    };
                    r * r
                })
                .sum::<f64>()
                .sqrt(),
            FirstStageSet::Ball { .. } => match self.normal_generators(x, tol).first() {
                Some(u) => {
                    let t = dot(v, u).max(0.0);
                    v.iter()
                        .zip(u)
                        .map(|(vi, ui)| (vi - t * ui).powi(2))
                        .sum::<f64>()
                        .sqrt()
                }
                None => norm(v),
            },
        }
    }

    /// Componentwise bounds of a box enclosing the set, if bounded.
    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            FirstStageSet::Free => None,
            FirstStageSet::Box { lower, upper } => {
                self.is_bounded().then(|| (lower.clone(), upper.clone()))
            }
            FirstStageSet::Ball { center, radius } => Some((
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            )),
        }
    }
}

/// Decision pair `(x, y_1, …, y_S)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: Vec<f64>,
    pub y: Vec<Vec<f64>>,
}

impl Point {
    pub fn zeros(d: usize, m: usize, s: usize) -> Self {
        Point {
            x: vec![0.0; d],
            y: vec![vec![0.0; m]; s],
        }
    }

    /// `self + t·h`.
    pub fn axpy(&self, t: f64, h: &Point) -> Point {
        Point {
            x: self.x.iter().zip(&h.x).map(|(a, b)| a + t * b).collect(),
            y: self
                .y
                .iter()
                .zip(&h.y)
                .map(|(ys, hs)| ys.iter().zip(hs).map(|(a, b)| a + t * b).collect())
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.y.iter().flatten()).all(|v| v.is_finite())
    }

    /// Probability-weighted norm `(|x|² + Σ_s p_s |y_s|²)^{1/2}`.
    pub fn weighted_norm(&self, probs: &[f64]) -> f64 {
        let mut acc = dot(&self.x, &self.x);
        for (ys, p) in self.y.iter().zip(probs) {
            acc += p * dot(ys, ys);
        }
        acc.sqrt()
    }

    /// Joint `(x, y_s)` vector of scenario `s`.
    pub fn joint(&self, s: usize) -> Vec<f64> {
        let mut z = self.x.clone();
        z.extend_from_slice(&self.y[s]);
        z
    }

    pub fn from_json(text: &str) -> Result<Point> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Point> {
        Point::from_json(&std::fs::read_to_string(path)?)
    }
}

fn default_p() -> f64 {
    2.0
}

/// Two-stage stochastic program in variational form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageProblem {
    pub d: usize,
    pub m: usize,
    #[serde(rename = "p", default = "default_p")]
    pub p_exponent: f64,
    #[serde(rename = "A")]
    pub first_stage: FirstStageSet,
    pub scenarios: ScenarioSpace,
    pub f: ExprRef,
    #[serde(default)]
    pub g: Vec<ExprRef>,
    /// A point strictly satisfying every constraint, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Point>,
    /// Declared `μ` such that `f − μ(|x|² + |y|²)` is bounded below.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coercivity_mu: Option<f64>,
}

/// Outcome of [`TwoStageProblem::is_feasible`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// Largest violation over the first-stage distance and all `g_i(x, y_s, θ_s)`.
    pub max_violation: f64,
    pub first_stage_distance: f64,
    /// Scenario and constraint attaining the largest constraint value.
    pub scenario: Option<usize>,
    pub constraint: Option<usize>,
}

impl TwoStageProblem {
    pub fn num_scenarios(&self) -> usize {
        self.scenarios.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.g.len()
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.d, self.m, self.scenarios.param_dim())
    }

    pub fn probs(&self) -> &[f64] {
        &self.scenarios.probs
    }

    /// Evaluation arguments of scenario `s` at `z`.
    pub fn args<'a>(&'a self, z: &'a Point, s: usize) -> Args<'a> {
        Args::new(&z.x, &z.y[s], &self.scenarios.params[s])
    }

    /// Checks every structural invariant; normalizes omitted scenario parameters.
    pub fn validate(&mut self) -> Result<()> {
        if self.d == 0 || self.m == 0 {
            return Err(Error::InvalidValue("d and m must be positive".into()));
        }
        if !(self.p_exponent > 1.0 && self.p_exponent.is_finite()) {
            return Err(Error::InvalidValue(format!(
                "norm exponent p = {} must lie in (1, inf)",
                self.p_exponent
            )));
        }
        self.scenarios.validate()?;
        self.first_stage.validate(self.d)?;
        let dims = self.dims();
        self.f.validate(dims)?;
        for g in &self.g {
            g.validate(dims)?;
        }
        if let Some(w) = &self.witness {
            self.check_point(w)?;
        }
        if let Some(mu) = self.coercivity_mu {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(Error::InvalidValue("coercivity_mu must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn check_point(&self, z: &Point) -> Result<()> {
        if z.x.len() != self.d {
            return Err(Error::DimMismatch {
                block: VarBlock::X,
                expected: self.d,
                found: z.x.len(),
            });
        }
        if z.y.len() != self.num_scenarios() {
            return Err(Error::InvalidValue(format!(
                "point has {} recourse vectors for {} scenarios",
                z.y.len(),
                self.num_scenarios()
            )));
        }
        for ys in &z.y {
            if ys.len() != self.m {
                return Err(Error::DimMismatch {
                    block: VarBlock::Y,
                    expected: self.m,
                    found: ys.len(),
                });
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<TwoStageProblem> {
        let mut prob: TwoStageProblem = serde_json::from_str(text)?;
        prob.validate()?;
        Ok(prob)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TwoStageProblem> {
        TwoStageProblem::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem serializes")
    }

    /// Feasibility of `z` within `tol`, with the worst violation located.
    pub fn is_feasible(&self, z: &Point, tol: f64) -> Result<FeasibilityReport> {
        self.check_point(z)?;
        let first_stage_distance = self.first_stage.distance(&z.x);
        let mut worst = f64::NEG_INFINITY;
        let mut scenario = None;
        let mut constraint = None;
        for s in 0..self.num_scenarios() {
            let args = self.args(z, s);
            for (i, g) in self.g.iter().enumerate() {
                let v = g.eval(args);
                if v.is_nan() {
                    return Err(Error::NonFinite { scenario: s });
                }
                if v > worst {
                    worst = v;
                    scenario = Some(s);
                    constraint = Some(i);
                }
            }
        }
        let max_violation = first_stage_distance.max(worst.max(0.0));
        Ok(FeasibilityReport {
            feasible: first_stage_distance <= tol && worst <= tol,
            max_violation,
            first_stage_distance,
            scenario,
            constraint,
        })
    }
}

/// Parses and validates a problem file.
pub fn load_problem(path: impl AsRef<Path>) -> Result<TwoStageProblem> {
    TwoStageProblem::load(path)
}
