//! Positive solution of `-φ'' + Vφ = 0` with `(φ(a), φ'(a)) = (1, 0)` and the
//! bound `1 <= φ <= e^{(b-a)² ||V||_∞}`.

use serde::Serialize;

use crate::domain::{Grid, Potential};
use crate::error::{param, LabError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarrierSolution {
    pub a: f64,
    pub b: f64,
    pub step: f64,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    /// Largest `|V|` seen by the integrator.
    pub sup_v: f64,
    pub upper_bound: f64,
}

impl BarrierSolution {
    pub fn x(&self, j: usize) -> f64 {
        self.a + j as f64 * self.step
    }
}

/// Classical RK4 on `(φ, φ')' = (φ', Vφ)`.
pub fn solve_barrier_fn(v: &dyn Fn(f64) -> f64, a: f64, b: f64, step: f64) -> Result<BarrierSolution> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return param(format!("need a finite interval a < b, got [{a}, {b}]"));
    }
    if !(step > 0.0 && step <= 1e-3) {
        return param(format!("step must lie in (0, 1e-3], got {step}"));
    }
    let steps = ((b - a) / step).ceil() as usize;
    let dx = (b - a) / steps as f64;
    let mut phi = Vec::with_capacity(steps + 1);
    let mut dphi = Vec::with_capacity(steps + 1);
    let (mut p, mut q) = (1.0f64, 0.0f64);
    phi.push(p);
    dphi.push(q);
    let mut sup_v: f64 = 0.0;
    let mut sample = |x: f64| -> Result<f64> {
        let val = v(x);
        if !val.is_finite() || val < 0.0 {
            return param(format!("potential must be finite and non-negative, got V({x}) = {val}"));
        }
        sup_v = sup_v.max(val);
        Ok(val)
    };
    for j in 0..steps {
        let x = a + j as f64 * dx;
        let (v0, vm, v1) = (sample(x)?, sample(x + 0.5 * dx)?, sample(x + dx)?);
        let k1 = (q, v0 * p);
        let k2 = (q + 0.5 * dx * k1.1, vm * (p + 0.5 * dx * k1.0));
        let k3 = (q + 0.5 * dx * k2.1, vm * (p + 0.5 * dx * k2.0));
        let k4 = (q + dx * k3.1, v1 * (p + dx * k3.0));
        p += dx / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        q += dx / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        phi.push(p);
        dphi.push(q);
    }
    let upper_bound = ((b - a) * (b - a) * sup_v).exp();
    let sol = BarrierSolution {
        a,
        b,
        step: dx,
        phi,
        dphi,
        sup_v,
        upper_bound,
    };
    check(&sol)?;
    Ok(sol)
}

fn check(sol: &BarrierSolution) -> Result<()> {
    for (j, (&p, &q)) in sol.phi.iter().zip(&sol.dphi).enumerate() {
        if p < 1.0 - 1e-12 || p > sol.upper_bound * (1.0 + 1e-6) {
            return Err(LabError::LemmaViolation(format!(
                "barrier leaves [1, {}] at x = {}: phi = {p}",
                sol.upper_bound,
                sol.x(j)
            )));
        }
        if q < -1e-12 || (j > 0 && p < sol.phi[j - 1] - 1e-12) {
            return Err(LabError::LemmaViolation(format!(
                "barrier decreases at x = {}",
                sol.x(j)
            )));
        }
    }
    Ok(())
}

/// Barrier for a sampled potential, linearly interpolated between nodes.
pub fn solve_barrier(v: &Potential, grid: &Grid, a: f64, b: f64, step: f64) -> Result<BarrierSolution> {
    if v.len() != grid.n() {
        return param("potential does not match the grid");
    }
    if a < grid.node(0) || b > grid.node(grid.n() - 1) {
        return param(format!("[{a}, {b}] leaves the sampled range of the potential"));
    }
    let samples = v.samples();
    let h = grid.h();
    let x0 = grid.node(0);
    let interp = |x: f64| {
        let pos = ((x - x0) / h).clamp(0.0, (samples.len() - 1) as f64);
        let j = (pos.floor() as usize).min(samples.len() - 2);
        let w = pos - j as f64;
        (1.0 - w) * samples[j] + w * samples[j + 1]
    };
    solve_barrier_fn(&interp, a, b, step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_grid;
    use crate::verify::random_potential;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_potential_gives_cosh() {
        let sol = solve_barrier_fn(&|_| 1.0, 0.0, 1.0, 1e-3).unwrap();
        for (j, p) in sol.phi.iter().enumerate() {
            assert!((p - sol.x(j).cosh()).abs() < 1e-8);
        }
        assert!((sol.upper_bound - 1f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn constant_potential_gives_scaled_cosh() {
        let c = 3.5;
        let sol = solve_barrier_fn(&|_| c, 0.5, 1.7, 5e-4).unwrap();
        let last = sol.phi.len() - 1;
        let exact = (c.sqrt() * (sol.x(last) - 0.5)).cosh();
        assert!((sol.phi[last] - exact).abs() < 1e-8 * exact);
    }

    #[test]
    fn random_potentials_respect_bounds_and_convexity() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let v = random_potential(&mut rng, 1.0, 5.0);
            let sol = solve_barrier_fn(&v, 0.0, 2.0, 1e-3).unwrap();
            assert!(sol.upper_bound <= 20f64.exp() * (1.0 + 1e-12));
            let dx = sol.step;
            for j in 1..sol.phi.len() - 1 {
                let d2 = (sol.phi[j + 1] - 2.0 * sol.phi[j] + sol.phi[j - 1]) / (dx * dx);
                assert!(d2 >= 1.0 - 1e-6);
            }
        }
    }

    #[test]
    fn sampled_potential_variant() {
        let g = make_grid(-1.0, 3.0, 400).unwrap();
        let v = Potential::constant(&g, 1.0).unwrap();
        let sol = solve_barrier(&v, &g, 0.0, 1.0, 1e-3).unwrap();
        assert!((sol.phi.last().unwrap() - 1f64.cosh()).abs() < 1e-8);
        assert!(solve_barrier(&v, &g, -2.0, 1.0, 1e-3).is_err());
    }

    #[test]
    fn rejects_coarse_steps_and_negative_potentials() {
        assert!(solve_barrier_fn(&|_| 1.0, 0.0, 1.0, 1e-2).is_err());
        assert!(solve_barrier_fn(&|_| -1.0, 0.0, 1.0, 1e-3).is_err());
    }
}
