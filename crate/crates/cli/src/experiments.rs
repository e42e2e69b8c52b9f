use serde::Serialize;
use serde_json::{json, Value};

use obslab::control::{control_cost_vs_t, hum_solve, simulate_controlled, uniform_times};
use obslab::fbi::{gaussian_reproduce_check, intertwine_residual, FbiConfig};
use obslab::fit::{compare_linear_quadratic, cost_fit, FitModel};
use obslab::observability::{
    default_mu_sweep, default_t_sweep, heat_sweep, highfreq_sweep, obs_sweep, spectral_sweep,
    telescoping_heat_observability, write_sweep_csv, SweepRow,
};
use obslab::verify::{lemma_suite, Verdict};
use obslab::{mask, HamiltonianSpectrum, Mask, Result};

use crate::config::{ExperimentConfig, ExperimentKind, Format, Setup};

/// One output file before it is written.
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Result of one experiment: files, a summary and, for checking
/// experiments, whether every check passed.
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub summary: Value,
    pub verdict: Option<bool>,
}

struct Collector<'a> {
    formats: &'a [Format],
    artifacts: Vec<Artifact>,
}

impl Collector<'_> {
    fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        if !self.formats.contains(&Format::Csv) {
            return Ok(());
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        self.push(name, bytes);
        Ok(())
    }

    fn raw_csv(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        if !self.formats.contains(&Format::Csv) {
            return Ok(());
        }
        let mut bytes = Vec::new();
        write(&mut bytes)?;
        self.push(name, bytes);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        if !self.formats.contains(&Format::Json) {
            return Ok(());
        }
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.push(name, bytes);
        Ok(())
    }

    fn push(&mut self, name: &str, bytes: Vec<u8>) {
        self.artifacts.push(Artifact {
            name: name.to_string(),
            bytes,
        });
    }
}

fn sweep_points(rows: &[SweepRow]) -> Vec<(f64, f64)> {
    rows.iter().map(|r| (r.parameter, r.constant)).collect()
}

fn max_min_ratio(rows: &[SweepRow]) -> f64 {
    let hi = rows.iter().map(|r| r.constant).fold(f64::NEG_INFINITY, f64::max);
    let lo = rows.iter().map(|r| r.constant).fold(f64::INFINITY, f64::min);
    hi / lo
}

pub fn run(cfg: &ExperimentConfig, setup: &Setup) -> Result<Outcome> {
    let kind = cfg.experiment.name;
    log::info!("running {} on n = {}", kind.name(), setup.grid.n());
    let mut out = Collector {
        formats: &cfg.output.formats,
        artifacts: Vec::new(),
    };
    if kind == ExperimentKind::Lemmas {
        return lemmas(cfg, out);
    }
    let m = mask(&setup.thickset, &setup.grid);
    if kind == ExperimentKind::Thickcheck {
        out.json("thickset.json", &setup.thickset)?;
        let summary = json!({
            "intervals": setup.thickset.intervals.len(),
            "measure": setup.thickset.measure(),
            "margin": setup.thickset.margin,
            "worst_window": setup.thickset.worst_window,
            "mask_nodes": m.count(),
            "mask_measure": m.measure(),
        });
        return Ok(Outcome {
            artifacts: out.artifacts,
            summary,
            verdict: None,
        });
    }
    let spec = HamiltonianSpectrum::new(&setup.grid, &setup.potential)?;
    match kind {
        ExperimentKind::Spectrum => spectrum(&spec, out),
        ExperimentKind::ObsSweep => {
            let ts = cfg.experiment.sweeps.t.clone().unwrap_or_else(default_t_sweep);
            let rows = obs_sweep(&spec, &m, &ts)?;
            fitted_sweep(out, &rows, FitModel::InvTSquared, false)
        }
        ExperimentKind::SpectralSweep => {
            let mus = match &cfg.experiment.sweeps.mu {
                Some(mus) => mus.clone(),
                None => default_mu_sweep(&spec, &m),
            };
            let rows = spectral_sweep(&spec, &m, &mus)?;
            fitted_sweep(out, &rows, FitModel::Mu, true)
        }
        ExperimentKind::HeatSweep => heat(cfg, &spec, &m, out),
        ExperimentKind::Highfreq => {
            let mu = cfg.experiment.mu.unwrap_or(0.4 * spec.max_energy().sqrt());
            let ts = cfg.experiment.sweeps.t.clone().unwrap_or_else(default_t_sweep);
            let rows = highfreq_sweep(&spec, &m, mu, &ts)?;
            out.raw_csv("sweep.csv", |w| write_sweep_csv(&rows, w))?;
            let summary = json!({
                "mu": mu,
                "points": rows.len(),
                "max_over_min": max_min_ratio(&rows),
            });
            out.json("summary.json", &summary)?;
            Ok(Outcome {
                artifacts: out.artifacts,
                summary,
                verdict: None,
            })
        }
        ExperimentKind::Hum => hum(cfg, &spec, &m, out),
        ExperimentKind::Fbi => fbi(cfg, &spec, out),
        ExperimentKind::Thickcheck | ExperimentKind::Lemmas => unreachable!("handled above"),
    }
}

fn spectrum(spec: &HamiltonianSpectrum, mut out: Collector) -> Result<Outcome> {
    out.raw_csv("spectrum.csv", |w| spec.write_spectrum_csv(w))?;
    let summary = json!({
        "n": spec.n(),
        "h": spec.h(),
        "e0": spec.energies()[0],
        "e_max": spec.max_energy(),
        "edge_mass_top": spec.edge_mass(spec.n() - 1),
    });
    out.json("summary.json", &summary)?;
    Ok(Outcome {
        artifacts: out.artifacts,
        summary,
        verdict: None,
    })
}

fn fitted_sweep(mut out: Collector, rows: &[SweepRow], model: FitModel, compare: bool) -> Result<Outcome> {
    out.raw_csv("sweep.csv", |w| write_sweep_csv(rows, w))?;
    let pts = sweep_points(rows);
    let fit = cost_fit(&pts, model)?;
    let mut summary = json!({ "fit": fit });
    if compare {
        let cmp = compare_linear_quadratic(&pts, model)?;
        summary["comparison"] = json!({
            "aic_linear": cmp.aic_linear,
            "aic_quadratic": cmp.aic_quadratic,
            "linear_preferred": cmp.linear_preferred(),
        });
    }
    out.json("fit.json", &summary)?;
    Ok(Outcome {
        artifacts: out.artifacts,
        summary: json!({ "a": fit.a, "b": fit.b, "r2": fit.r2, "points": rows.len() }),
        verdict: None,
    })
}

fn heat(cfg: &ExperimentConfig, spec: &HamiltonianSpectrum, m: &Mask, mut out: Collector) -> Result<Outcome> {
    let ts = cfg.experiment.sweeps.t.clone().unwrap_or_else(default_t_sweep);
    let depth = cfg.experiment.depth.unwrap_or(8);
    let rows = heat_sweep(spec, m, &ts)?;
    out.raw_csv("sweep.csv", |w| write_sweep_csv(&rows, w))?;
    let fit = cost_fit(&sweep_points(&rows), FitModel::InvT)?;
    let mut bounds = Vec::with_capacity(rows.len());
    let mut dominated = true;
    for r in &rows {
        let tele = telescoping_heat_observability(spec, m, r.parameter, depth)?;
        dominated &= tele.log_constant >= r.constant.ln();
        bounds.push(tele);
    }
    out.json("fit.json", &json!({ "fit": fit }))?;
    out.json("telescoping.json", &bounds)?;
    Ok(Outcome {
        artifacts: out.artifacts,
        summary: json!({ "a": fit.a, "b": fit.b, "r2": fit.r2, "depth": depth, "telescoping_dominates": dominated }),
        verdict: Some(dominated),
    })
}

#[derive(Serialize)]
struct HumRow {
    seed: u64,
    #[serde(rename = "T")]
    t: f64,
    cost: f64,
    iterations: usize,
    endpoint_error: f64,
    simulated_error: f64,
}

fn hum(cfg: &ExperimentConfig, spec: &HamiltonianSpectrum, m: &Mask, mut out: Collector) -> Result<Outcome> {
    let exp = &cfg.experiment;
    let t = exp.t.unwrap_or(1.0);
    let steps = exp.steps.unwrap_or(10_000);
    let max_iter = exp.max_iter.unwrap_or(500);
    let times = uniform_times(t, steps + 1);
    let mut rows = Vec::new();
    let mut pass = true;
    for &seed in &exp.seeds {
        let u0 = spec.random_state(None, 2 * seed);
        let u1 = spec.random_state(None, 2 * seed + 1);
        let sol = hum_solve(spec, m, t, &u0, &u1, exp.tolerances.cg, max_iter)?;
        let samples = sol.sample(spec, m, &times);
        let end = simulate_controlled(spec, m, &samples, &u0, t, steps)?;
        let simulated_error = spec.norm(&(&end - &u1)) / spec.norm(&u1).max(1.0);
        pass &= sol.endpoint_error <= exp.tolerances.residual;
        if seed == exp.seeds[0] {
            out.raw_csv("control.csv", |w| sol.write_samples_csv(w))?;
            out.json("control_header.json", &sol.header())?;
        }
        rows.push(HumRow {
            seed,
            t,
            cost: sol.control_cost,
            iterations: sol.cg_iterations,
            endpoint_error: sol.endpoint_error,
            simulated_error,
        });
    }
    out.csv("hum.csv", &rows)?;
    let mut summary = json!({
        "T": t,
        "runs": rows.len(),
        "max_endpoint_error": rows.iter().map(|r| r.endpoint_error).fold(0.0, f64::max),
        "max_simulated_error": rows.iter().map(|r| r.simulated_error).fold(0.0, f64::max),
        "max_iterations": rows.iter().map(|r| r.iterations).max().unwrap_or(0),
    });
    if let Some(ts) = &exp.sweeps.t {
        let seed = exp.seeds[0];
        let (u0, u1) = (spec.random_state(None, 2 * seed), spec.random_state(None, 2 * seed + 1));
        let (fit, cost_rows) = control_cost_vs_t(spec, m, &u0, &u1, ts, exp.tolerances.cg, max_iter)?;
        out.csv("cost_vs_T.csv", &cost_rows)?;
        out.json("cost_fit.json", &json!({ "fit": fit }))?;
        summary["cost_fit"] = json!({ "a": fit.a, "b": fit.b, "r2": fit.r2 });
    }
    Ok(Outcome {
        artifacts: out.artifacts,
        summary,
        verdict: Some(pass),
    })
}

fn fbi(cfg: &ExperimentConfig, spec: &HamiltonianSpectrum, mut out: Collector) -> Result<Outcome> {
    let exp = &cfg.experiment;
    let t = exp.t.unwrap_or(0.5);
    let mu = exp.mu.unwrap_or(1.8f64.sqrt());
    let hs = exp.sweeps.h.clone().unwrap_or_else(|| vec![0.1]);
    let taus = exp
        .sweeps
        .tau
        .clone()
        .unwrap_or_else(|| vec![3.0 * t, 5.0 * t, 7.0 * t]);
    let mut residuals = Vec::new();
    let mut records = Vec::new();
    let mut worst_residual: f64 = 0.0;
    let mut pass = true;
    for &seed in &exp.seeds {
        let f = spec.random_state(Some(mu), seed);
        for &h in &hs {
            let fc = FbiConfig::new(h, t)?;
            let rep = intertwine_residual(spec, &f, &fc)?;
            worst_residual = worst_residual.max(rep.max_residual);
            pass &= rep.max_residual <= exp.tolerances.residual;
            residuals.push(json!({
                "seed": seed,
                "h": h,
                "max_residual": rep.max_residual,
                "refined_max_residual": rep.refined_max_residual,
                "refinement_ratio": rep.refinement_ratio,
            }));
            if seed == exp.seeds[0] && h == hs[0] {
                out.raw_csv("residual.csv", |w| rep.write_csv(w))?;
            }
            let recs = gaussian_reproduce_check(spec, &f, &fc, &taus)?;
            pass &= recs.iter().all(|r| r.pass);
            records.extend(recs);
        }
    }
    out.csv("reproduction.csv", &records)?;
    out.json("residuals.json", &residuals)?;
    let worst_ratio = records.iter().map(|r| r.error / r.bound).fold(0.0, f64::max);
    Ok(Outcome {
        artifacts: out.artifacts,
        summary: json!({
            "T": t,
            "modes": spec.rank_below(mu),
            "max_residual": worst_residual,
            "worst_error_over_bound": worst_ratio,
        }),
        verdict: Some(pass),
    })
}

#[derive(Serialize)]
struct VerdictRow<'a> {
    seed: u64,
    lemma: &'a str,
    lhs: f64,
    rhs: f64,
    slack: f64,
    pass: bool,
}

fn lemmas(cfg: &ExperimentConfig, mut out: Collector) -> Result<Outcome> {
    let trials = cfg.experiment.trials.unwrap_or(5);
    let mut all: Vec<(u64, Verdict)> = Vec::new();
    for &seed in &cfg.experiment.seeds {
        all.extend(lemma_suite(seed, trials)?.into_iter().map(|v| (seed, v)));
    }
    let rows: Vec<VerdictRow> = all
        .iter()
        .map(|(seed, v)| VerdictRow {
            seed: *seed,
            lemma: &v.lemma,
            lhs: v.lhs,
            rhs: v.rhs,
            slack: v.slack,
            pass: v.pass,
        })
        .collect();
    out.csv("verdicts.csv", &rows)?;
    let verdicts: Vec<&Verdict> = all.iter().map(|(_, v)| v).collect();
    out.json("verdicts.json", &verdicts)?;
    let failed = all.iter().filter(|(_, v)| !v.pass).count();
    Ok(Outcome {
        artifacts: out.artifacts,
        summary: json!({ "checks": all.len(), "failed": failed, "seeds": cfg.experiment.seeds }),
        verdict: Some(failed == 0),
    })
}
