//! Standalone checkers for the auxiliary inequalities: the barrier ODE, the
//! cos² bound on thick sets, the flat-space solution representation, the
//! resolvent estimate and the polynomial toolkit (zero counting, three
//! circles, Remez).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{LabError, Result};

pub mod barrier;
pub mod complex;
pub mod cos2;
pub mod representation;
pub mod resolvent;

pub use barrier::{solve_barrier, solve_barrier_fn, BarrierSolution};
pub use complex::{hadamard_three_circle_check, jensen_zero_bound, remez_check, ComplexPoly, JensenCount};
pub use cos2::{cos2_inf, cos2_integral, cos2_lower_bound, Cos2Inf};
pub use representation::{solution_representation_check, GaussPoly};
pub use resolvent::{plateau_onset, resolvent_constant, resolvent_sweep};

/// Outcome of one inequality check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub lemma: String,
    pub params: serde_json::Value,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
}

impl Verdict {
    pub fn new(lemma: &str, params: serde_json::Value, lhs: f64, rhs: f64, pass: bool) -> Self {
        Verdict {
            lemma: lemma.to_string(),
            params,
            lhs,
            rhs,
            slack: rhs - lhs,
            pass,
        }
    }

    pub fn into_result(self) -> Result<Verdict> {
        if self.pass {
            Ok(self)
        } else {
            Err(LabError::LemmaViolation(format!(
                "{}: lhs = {:e} exceeds rhs = {:e} ({})",
                self.lemma, self.lhs, self.rhs, self.params
            )))
        }
    }
}

/// Random continuous potential on `[a, b]`: a smooth trigonometric sum with
/// values in `[lo, hi]`.
pub fn random_potential(rng: &mut impl Rng, lo: f64, hi: f64) -> impl Fn(f64) -> f64 + Clone {
    let terms: Vec<(f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.random_range(-1.0..1.0),
                rng.random_range(0.5..6.0),
                rng.random_range(0.0..6.3),
            )
        })
        .collect();
    let total: f64 = terms.iter().map(|t| t.0.abs()).sum::<f64>().max(1e-12);
    move |x: f64| {
        let s: f64 = terms.iter().map(|(a, w, p)| a * (w * x + p).sin()).sum::<f64>() / total;
        lo + (hi - lo) * 0.5 * (1.0 + s)
    }
}

/// Random union of intervals inside `[0, 1]` with total measure at least
/// `zeta`.
pub fn random_unit_set(rng: &mut impl Rng, zeta: f64) -> Vec<[f64; 2]> {
    let pieces = rng.random_range(1..=6usize);
    let target = zeta + rng.random_range(0.0..(1.0 - zeta) * 0.5);
    let mut cuts: Vec<f64> = (0..pieces).map(|_| rng.random_range(0.05..1.0)).collect();
    let sum: f64 = cuts.iter().sum();
    cuts.iter_mut().for_each(|c| *c *= target / sum);
    let gap_total = 1.0 - target;
    let mut gaps: Vec<f64> = (0..=pieces).map(|_| rng.random_range(0.05..1.0)).collect();
    let gsum: f64 = gaps.iter().sum();
    gaps.iter_mut().for_each(|g| *g *= gap_total / gsum);
    let mut x = gaps[0];
    let mut out = Vec::with_capacity(pieces);
    for (len, gap) in cuts.iter().zip(&gaps[1..]) {
        out.push([x, (x + len).min(1.0)]);
        x += len + gap;
    }
    out
}

/// Runs every checker on randomized inputs drawn from `seed`.
pub fn lemma_suite(seed: u64, trials: usize) -> Result<Vec<Verdict>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for _ in 0..trials {
        let v = random_potential(&mut rng, 0.0, 5.0);
        let sol = solve_barrier_fn(&v, 0.0, 2.0, 1e-3)?;
        let top = sol.phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out.push(Verdict::new(
            "barrier",
            json!({"a": 0.0, "b": 2.0, "sup_v": sol.sup_v}),
            top,
            sol.upper_bound,
            top <= sol.upper_bound * (1.0 + 1e-6),
        ));

        let omega = random_unit_set(&mut rng, 0.3);
        let lambda = 10f64.powf(rng.random_range(0.0..2.0));
        let c = cos2_inf(&omega, 0.3, lambda, 2000)?;
        let floor = cos2_lower_bound(0.3);
        out.push(Verdict::new(
            "cos2",
            json!({"lambda": lambda, "zeta": 0.3, "intervals": omega}),
            floor,
            c.value,
            c.value >= floor,
        ));

        let degree = rng.random_range(1..=10);
        let p = ComplexPoly::random_with_roots(&mut rng, degree, 2.0)?;
        let a = complex::random_point(&mut rng, 0.5);
        let j = jensen_zero_bound(&p, a, 1.0, 1.5)?;
        out.push(j.verdict(a, 1.0, 1.5));
        out.push(hadamard_three_circle_check(&p, 0.5, 1.0, 2.0)?);
        let len = rng.random_range(0.2..1.0);
        let start = rng.random_range(-1.0..(1.0 - len));
        let degree = rng.random_range(0..=8);
        let q = ComplexPoly::random(&mut rng, degree)?;
        out.push(remez_check(&q, &[[start, start + len]], 1.0)?);
    }
    let f = GaussPoly::new(vec![1.0, -0.4, 0.2], 0.1, 0.7);
    let mu = 4.0 + rng.random_range(0.0..6.0);
    let s = rng.random_range(-0.5..0.5);
    let res = solution_representation_check(&f, mu, s, -1.5, 1.5, 1e-6)?;
    out.push(Verdict::new(
        "representation",
        json!({"mu": mu, "s": s}),
        res,
        1e-6,
        res <= 1e-6,
    ));
    Ok(out)
}
