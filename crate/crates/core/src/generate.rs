//! Seeded random instances.
//!
//! Every generated problem is convex in `(x, y)` once its dc nodes are
//! expanded: the subtracted quadratics are dominated by the added ones. The
//! instances are therefore nonsmooth and carry explicit DC structure, yet
//! their stationary points are global minimizers, which lets local solvers be
//! checked against grid oracles.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{self, ExprRef};
use crate::model::{FirstStageSet, Point, ScenarioSpace, TwoStageProblem};

/// Coercivity weight added to every generated objective.
pub const COERCIVITY_MU: f64 = 0.1;
/// Half-width of the generated first-stage box.
pub const BOX_HALF_WIDTH: f64 = 2.0;
const PARAM_DIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeSpec {
    pub d: usize,
    pub m: usize,
    #[serde(rename = "S")]
    pub s: usize,
    pub l: usize,
    pub dc: bool,
    /// Restrict to smooth atoms (no max, abs or dc nodes).
    #[serde(default)]
    pub smooth: bool,
}

impl SizeSpec {
    pub fn new(d: usize, m: usize, s: usize, l: usize, dc: bool) -> Self {
        SizeSpec { d, m, s, l, dc, smooth: false }
    }

    pub fn smooth(mut self) -> Self {
        self.smooth = true;
        self
    }
}

struct Gen {
    rng: ChaCha8Rng,
    d: usize,
    m: usize,
}

impl Gen {
    fn n(&self) -> usize {
        self.d + self.m
    }

    fn normal(&mut self, len: usize, sd: f64) -> Vec<f64> {
        (0..len)
            .map(|_| sd * self.rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    fn uniform(&mut self, len: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..len).map(|_| self.rng.gen_range(lo..hi)).collect()
    }

    /// Random symmetric matrix over `(x, y)` with spectrum in `[lo, hi]`.
    fn spectrum_matrix(&mut self, lo: f64, hi: f64) -> Vec<Vec<f64>> {
        let n = self.n();
        let g = DMatrix::from_vec(n, n, self.normal(n * n, 1.0));
        let u = g.qr().q();
        let eig = DVector::from_vec(self.uniform(n, lo, hi));
        let mat = &u * DMatrix::from_diagonal(&eig) * u.transpose();
        (0..n)
            .map(|i| (0..n).map(|j| 0.5 * (mat[(i, j)] + mat[(j, i)])).collect())
            .collect()
    }

    fn affine(&mut self, c0: f64, sx: f64, sy: f64, st: f64) -> ExprRef {
        let cx = self.normal(self.d, sx);
        let cy = self.normal(self.m, sy);
        let ct = self.normal(PARAM_DIM, st);
        expr::affine(c0, cx, cy, ct)
    }

    fn max_affine(&mut self, pieces: usize, scale: f64) -> ExprRef {
        let children = (0..pieces)
            .map(|_| {
                let c0 = self.rng.gen_range(-0.5..0.5) * scale;
                self.affine(c0, scale, scale, scale)
            })
            .collect();
        expr::max(children)
    }

    fn objective(&mut self, spec: &SizeSpec) -> ExprRef {
        let n = self.n();
        let curved = self.spectrum_matrix(1.0, 2.0);
        let lin = self.normal(n, 0.3);
        let shift = self.affine(0.0, 0.3, 0.3, 1.0);
        let mut mu_q = vec![vec![0.0; n]; n];
        for (i, row) in mu_q.iter_mut().enumerate() {
            row[i] = 2.0 * COERCIVITY_MU;
        }
        let coercive = expr::quad(mu_q, Vec::new(), 0.0);
        let concave = spec.dc.then(|| self.spectrum_matrix(0.1, 0.5));

        if spec.smooth {
            let q = match concave {
                Some(neg) => sub_matrix(&curved, &neg),
                None => curved,
            };
            return expr::add(vec![expr::quad(q, lin, 0.0), shift, coercive]);
        }
        let kinks = self.max_affine(3, 0.5);
        let convex = expr::add(vec![expr::quad(curved, lin, 0.0), kinks]);
        let body = match concave {
            Some(neg) => expr::dc(convex, expr::quad(neg, Vec::new(), 0.0)),
            None => convex,
        };
        expr::add(vec![body, shift, coercive])
    }

    /// Constraint body before the feasibility shift.
    fn constraint(&mut self, spec: &SizeSpec) -> ExprRef {
        let mut cy = self.normal(self.m, 1.0);
        let target = self.rng.gen_range(0.5..1.5);
        let len = cy.iter().map(|v| v * v).sum::<f64>().sqrt();
        if len > 0.0 {
            cy.iter_mut().for_each(|v| *v *= target / len);
        } else {
            cy[0] = target;
        }
        let cx = self.normal(self.d, 0.5);
        let ct = self.normal(PARAM_DIM, 0.5);
        let lin = expr::affine(0.0, cx, cy, ct);
        if spec.smooth {
            let q = self.spectrum_matrix(0.0, 0.3);
            return expr::add(vec![lin, expr::quad(q, Vec::new(), 0.0)]);
        }
        let kinks = self.max_affine(2, 0.1);
        if spec.dc {
            let plus_q = self.spectrum_matrix(0.5, 1.0);
            let minus_q = self.spectrum_matrix(0.0, 0.4);
            let plus = expr::add(vec![lin, kinks, expr::quad(plus_q, Vec::new(), 0.0)]);
            expr::dc(plus, expr::quad(minus_q, Vec::new(), 0.0))
        } else {
            expr::add(vec![lin, kinks])
        }
    }
}

fn sub_matrix(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x - y).collect())
        .collect()
}

/// Deterministic random instance with a strictly feasible witness.
pub fn generate(seed: u64, spec: SizeSpec) -> Result<TwoStageProblem> {
    if spec.d == 0 || spec.m == 0 || spec.s == 0 {
        return Err(Error::InvalidValue("d, m and S must be positive".into()));
    }
    let mut gen = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        d: spec.d,
        m: spec.m,
    };

    let weights = gen.uniform(spec.s, 0.5, 1.5);
    let total: f64 = weights.iter().sum();
    let mut probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let head: f64 = probs[..spec.s - 1].iter().sum();
    probs[spec.s - 1] = 1.0 - head;
    let params: Vec<Vec<f64>> = (0..spec.s).map(|_| gen.uniform(PARAM_DIM, -1.0, 1.0)).collect();

    let witness = Point {
        x: gen.uniform(spec.d, -1.0, 1.0),
        y: (0..spec.s).map(|_| gen.uniform(spec.m, -1.0, 1.0)).collect(),
    };

    let f = gen.objective(&spec);
    let mut g = Vec::with_capacity(spec.l);
    for _ in 0..spec.l {
        let body = gen.constraint(&spec);
        let margin = gen.rng.gen_range(0.3..1.0);
        let worst = (0..spec.s)
            .map(|s| {
                body.eval(crate::expr::Args::new(&witness.x, &witness.y[s], &params[s]))
            })
            .fold(f64::NEG_INFINITY, f64::max);
        g.push(expr::add(vec![body, expr::constant(-(worst + margin))]));
    }

    let half = BOX_HALF_WIDTH;
    let mut prob = TwoStageProblem {
        d: spec.d,
        m: spec.m,
        p_exponent: 2.0,
        first_stage: FirstStageSet::Box {
            lower: vec![-half; spec.d],
            upper: vec![half; spec.d],
        },
        scenarios: ScenarioSpace { probs, params },
        f,
        g,
        witness: Some(witness),
        coercivity_mu: Some(COERCIVITY_MU),
    };
    prob.validate()?;
    Ok(prob)
}
