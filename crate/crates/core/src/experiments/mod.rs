//! Experiment drivers behind the `vpme` command line.

pub mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{error, info};
use rayon::prelude::*;

use crate::diagnostics::{self, record, write_atomic, write_float_csv, DiagnosticsRecord};
use crate::dynamics::SimState;
use crate::error::{Result, VpmeError};
use crate::particles::ParticleEnsemble;
use crate::snapshot;
use crate::transport::{ensemble_w2, fit_stability_constant, sample_w1, stability_scale, StabilityFit};

pub use config::{ExperimentConfig, TimeStep};

fn csv_bytes(header: &[&str], rows: &[Vec<f64>]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_float_csv(&mut buf, header, rows)?;
    Ok(buf)
}

fn prepare_output(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// Advances `state` through the configured schedule, calling `observe` on
/// the initial state, every `log_every` steps and on the final state.
fn simulate<F>(state: &mut SimState, dt: f64, steps: usize, log_every: usize, mut observe: F) -> Result<()>
where
    F: FnMut(&SimState, usize) -> Result<()>,
{
    observe(state, 0)?;
    for k in 1..=steps {
        if let Err(e) = state.step(dt) {
            error!("step {k} (t = {:.6}) failed: {e}", state.time());
            return Err(e);
        }
        if k % log_every == 0 || k == steps {
            observe(state, k)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dt: f64,
    pub steps: usize,
    pub records: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<PathBuf>,
    /// `rho_lp_check` outcome at every logged step.
    pub lp_satisfied: Vec<bool>,
}

/// Runs the configured simulation, writing `diagnostics.csv` and snapshots
/// into `out`.
pub fn cmd_run(cfg: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    prepare_output(out)?;
    let mut state = cfg.initial_state(cfg.initial_ensemble()?)?;
    let (dt, steps) = cfg.schedule(&state)?;
    let f_linf = cfg.scenario()?.f_linf(cfg.dim);
    info!("run: {} steps of dt = {dt:e}", steps);
    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    let mut lp_satisfied = Vec::new();
    let snap_every = cfg.snapshot_every;
    let result = simulate(&mut state, dt, steps, cfg.log_every, |s, k| {
        let rec = record(s, cfg.moment_order)?;
        lp_satisfied.push(diagnostics::rho_lp_check(&s.fields()?.rho, f_linf, rec.kinetic).satisfied);
        records.push(rec);
        let snap_due = k == 0 || k == steps || (snap_every > 0 && k % snap_every == 0);
        if snap_due {
            let path = out.join(format!("snap_{k:07}.bin"));
            snapshot::write(&path, s.ensemble(), s.time())?;
            snapshots.push(path);
        }
        Ok(())
    });
    // the log up to the failing step is still useful
    let mut buf = Vec::new();
    diagnostics::write_diagnostics(&mut buf, &records)?;
    write_atomic(&out.join("diagnostics.csv"), &buf)?;
    result?;
    Ok(RunSummary {
        dt,
        steps,
        records,
        snapshots,
        lp_satisfied,
    })
}

#[derive(Debug, Clone)]
pub struct EpsResult {
    pub eps: f64,
    /// `(t, W_2(f_1(t), f_2(t)))`, averaged over trials.
    pub series: Vec<(f64, f64)>,
    /// Largest estimator floor over the series.
    pub floor: f64,
    pub fit: StabilityFit,
    /// `sup_t ||rho_i||_inf` for the reference and the perturbed run.
    pub rho_sup: (f64, f64),
    /// `(t, W_1)` of the first velocity marginals, averaged over trials.
    pub w1_series: Vec<(f64, f64)>,
    /// `sup_t log(W_1(t) / W_1(0)) / t`.
    pub w1_rate: f64,
}

#[derive(Debug, Clone)]
pub struct StabilitySummary {
    pub results: Vec<EpsResult>,
    /// Force Lipschitz constant of a smooth kernel.
    pub lipschitz: Option<f64>,
}

/// How the second ensemble of a stability pair is obtained from the first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Perturbation {
    /// `v -> v + eps e_1`.
    VelocityShift,
    /// `v -> (1 + eps) v`.
    VelocityDilation,
}

impl Perturbation {
    pub fn apply(self, ensemble: &mut ParticleEnsemble, eps: f64) -> Result<()> {
        match self {
            Perturbation::VelocityShift => {
                let mut shift = vec![0.0; ensemble.dim()];
                shift[0] = eps;
                ensemble.shift_velocities(&shift)
            }
            Perturbation::VelocityDilation => {
                ensemble.scale_velocities(1.0 + eps);
                Ok(())
            }
        }
    }
}

struct PairTrace {
    times: Vec<f64>,
    w2: Vec<f64>,
    floor: f64,
    w1: Vec<f64>,
    rho_sup: (f64, f64),
}

fn run_pair(cfg: &ExperimentConfig, seed: u64, eps: f64, perturbation: Perturbation) -> Result<PairTrace> {
    let mut seeded = cfg.clone();
    seeded.seed = seed;
    let base = seeded.initial_ensemble()?;
    let mut shifted = base.clone();
    perturbation.apply(&mut shifted, eps)?;
    let mut a = seeded.initial_state(base)?;
    let mut b = seeded.initial_state(shifted)?;
    let (dt, steps) = seeded.schedule(&a)?;
    let mut trace = PairTrace {
        times: Vec::new(),
        w2: Vec::new(),
        floor: 0.0,
        w1: Vec::new(),
        rho_sup: (0.0, 0.0),
    };
    let mut observe = |a: &SimState, b: &SimState| -> Result<()> {
        let est = ensemble_w2(a.ensemble(), b.ensemble(), cfg.w2_points)?;
        trace.times.push(a.time());
        trace.w2.push(est.w2);
        trace.floor = trace.floor.max(est.floor);
        trace
            .w1
            .push(sample_w1(&a.ensemble().velocity_component(0), &b.ensemble().velocity_component(0))?);
        trace.rho_sup.0 = trace.rho_sup.0.max(a.rho().max_abs());
        trace.rho_sup.1 = trace.rho_sup.1.max(b.rho().max_abs());
        Ok(())
    };
    observe(&a, &b)?;
    for k in 1..=steps {
        a.step(dt)?;
        b.step(dt)?;
        if k % cfg.log_every == 0 || k == steps {
            observe(&a, &b)?;
        }
    }
    Ok(trace)
}

/// Growth rate `sup_t log(w(t) / w(0)) / t` of a distance series.
pub fn growth_rate(series: &[(f64, f64)]) -> f64 {
    let Some(&(t0, w0)) = series.first() else {
        return 0.0;
    };
    if !(w0 > 0.0) {
        return 0.0;
    }
    series
        .iter()
        .filter(|(t, w)| *t > t0 && *w > 0.0)
        .map(|(t, w)| (w / w0).ln() / (t - t0))
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0)
}

fn average(traces: &[PairTrace], pick: impl Fn(&PairTrace) -> &Vec<f64>) -> Vec<(f64, f64)> {
    let times = &traces[0].times;
    (0..times.len())
        .map(|i| {
            let mean = traces.iter().map(|t| pick(t)[i]).sum::<f64>() / traces.len() as f64;
            (times[i], mean)
        })
        .collect()
}

/// Paired runs from `f_0` and its perturbation for every `eps`, averaged over
/// `trials` seeds starting at the configured one.
pub fn stability_sweep(
    cfg: &ExperimentConfig,
    eps_list: &[f64],
    trials: usize,
    perturbation: Perturbation,
) -> Result<StabilitySummary> {
    if eps_list.is_empty() || trials == 0 {
        return Err(VpmeError::Usage("need at least one eps and one trial".into()));
    }
    if let Some(e) = eps_list.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
        return Err(VpmeError::Usage(format!("eps {e} must be non-negative")));
    }
    let grid = cfg.grid()?;
    let lipschitz = cfg.force_model(&grid)?.lipschitz_constant()?;
    let results = eps_list
        .par_iter()
        .map(|&eps| -> Result<EpsResult> {
            let traces = (0..trials)
                .map(|t| run_pair(cfg, cfg.seed + t as u64, eps, perturbation))
                .collect::<Result<Vec<_>>>()?;
            let series = average(&traces, |t| &t.w2);
            let w1_series = average(&traces, |t| &t.w1);
            let floor = traces.iter().map(|t| t.floor).fold(0.0, f64::max);
            let w0 = series[0].1;
            let fit = fit_stability_constant(&series[1..], w0, cfg.dim, floor)?;
            let rho_sup = traces.iter().fold((0.0f64, 0.0f64), |acc, t| {
                (acc.0.max(t.rho_sup.0), acc.1.max(t.rho_sup.1))
            });
            info!("eps = {eps}: C = {:.6}, residual = {:.3e}", fit.c, fit.residual);
            Ok(EpsResult {
                eps,
                w1_rate: growth_rate(&w1_series),
                series,
                floor,
                fit,
                rho_sup,
                w1_series,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StabilitySummary { results, lipschitz })
}

/// `log L(t)` with `L = -log(w^2 / 16de)`.
pub fn log_l(w2: f64, dim: usize) -> f64 {
    (-(w2 * w2 / stability_scale(dim)).ln()).ln()
}

/// Writes `stability.csv`, `stability_fit.csv`, `stability_density.csv` and,
/// for smooth kernels, `dobrushin.csv` and `dobrushin_fit.csv`.
pub fn cmd_stability(cfg: &ExperimentConfig, out: &Path, eps_list: &[f64], trials: usize) -> Result<StabilitySummary> {
    prepare_output(out)?;
    let summary = stability_sweep(cfg, eps_list, trials, Perturbation::VelocityShift)?;
    let mut series = Vec::new();
    let mut fits = Vec::new();
    let mut density = Vec::new();
    let mut w1 = Vec::new();
    let mut w1_fit = Vec::new();
    for r in &summary.results {
        for &(t, w) in &r.series {
            series.push(vec![r.eps, t, w, log_l(w, cfg.dim)]);
        }
        fits.push(vec![
            r.eps,
            r.fit.c,
            r.fit.residual,
            r.fit.t0_implied,
            f64::from(u8::from(r.fit.floor_dominated)),
        ]);
        density.push(vec![r.eps, r.rho_sup.0, r.rho_sup.1]);
        for &(t, w) in &r.w1_series {
            w1.push(vec![r.eps, t, w]);
        }
        if let Some(lip) = summary.lipschitz {
            w1_fit.push(vec![r.eps, r.w1_rate, lip]);
        }
    }
    write_atomic(&out.join("stability.csv"), &csv_bytes(&["eps", "t", "w2", "logL"], &series)?)?;
    write_atomic(
        &out.join("stability_fit.csv"),
        &csv_bytes(&["eps", "C", "residual", "t0_implied", "floor_dominated"], &fits)?,
    )?;
    write_atomic(
        &out.join("stability_density.csv"),
        &csv_bytes(&["eps", "rho_linf_sup_1", "rho_linf_sup_2"], &density)?,
    )?;
    if summary.lipschitz.is_some() {
        write_atomic(&out.join("dobrushin.csv"), &csv_bytes(&["eps", "t", "w1"], &w1)?)?;
        write_atomic(
            &out.join("dobrushin_fit.csv"),
            &csv_bytes(&["eps", "rate", "lipschitz"], &w1_fit)?,
        )?;
    }
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifyRow {
    pub r: f64,
    pub w2: f64,
    pub floor: f64,
}

/// Runs the unmollified system and the mollified one for every radius from
/// the same initial ensemble; returns `W_2(f_r(t_end), f(t_end))` per radius.
pub fn mollify_sweep(cfg: &ExperimentConfig, radii: &[f64]) -> Result<Vec<MollifyRow>> {
    if radii.is_empty() {
        return Err(VpmeError::Usage("need at least one radius".into()));
    }
    if let Some(r) = radii.iter().find(|r| !(**r > 0.0 && **r <= 0.5)) {
        return Err(VpmeError::Usage(format!("radius {r} outside (0, 1/2]")));
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(VpmeError::Usage("radii must be strictly decreasing".into()));
    }
    let initial = cfg.initial_ensemble()?;
    let probe = cfg.initial_state(initial.clone())?;
    let (dt, steps) = cfg.schedule(&probe)?;
    let final_state = |r: Option<f64>| -> Result<ParticleEnsemble> {
        let mut c = cfg.clone();
        c.mollifier_radius = r;
        let mut s = c.initial_state(initial.clone())?;
        for _ in 0..steps {
            s.step(dt)?;
        }
        Ok(s.ensemble().clone())
    };
    let mut runs: Vec<Option<f64>> = vec![None];
    runs.extend(radii.iter().map(|&r| Some(r)));
    let finals = runs.par_iter().map(|&r| final_state(r)).collect::<Result<Vec<_>>>()?;
    radii
        .iter()
        .zip(&finals[1..])
        .map(|(&r, f)| {
            let est = ensemble_w2(f, &finals[0], cfg.w2_points)?;
            info!("r = {r}: W2 = {:.6e} (floor {:.3e})", est.w2, est.floor);
            Ok(MollifyRow {
                r,
                w2: est.w2,
                floor: est.floor,
            })
        })
        .collect()
}

pub fn cmd_mollify(cfg: &ExperimentConfig, out: &Path, radii: &[f64]) -> Result<Vec<MollifyRow>> {
    prepare_output(out)?;
    let rows = mollify_sweep(cfg, radii)?;
    let table: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.r, r.w2, r.floor]).collect();
    write_atomic(&out.join("mollify.csv"), &csv_bytes(&["r", "w2", "floor"], &table)?)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    pub orders: Vec<f64>,
    /// `(t, moments)` per logged step.
    pub rows: Vec<(f64, Vec<f64>)>,
    /// Supremum over time per order.
    pub sup: Vec<f64>,
}

impl MomentTable {
    pub fn initial(&self) -> &[f64] {
        &self.rows[0].1
    }
}

fn order_label(m: f64) -> String {
    format!("m{m}")
}

/// Velocity moments of the given orders along the configured run.
pub fn moment_sweep(cfg: &ExperimentConfig, orders: &[f64]) -> Result<MomentTable> {
    if orders.is_empty() {
        return Err(VpmeError::Usage("need at least one moment order".into()));
    }
    if let Some(m) = orders.iter().find(|m| !(0.0..=8.0).contains(*m)) {
        return Err(VpmeError::Usage(format!("moment order {m} outside [0, 8]")));
    }
    let mut state = cfg.initial_state(cfg.initial_ensemble()?)?;
    let (dt, steps) = cfg.schedule(&state)?;
    let mut rows = Vec::new();
    simulate(&mut state, dt, steps, cfg.log_every, |s, _| {
        let m: Vec<f64> = orders.iter().map(|&o| diagnostics::moment(s.ensemble(), o)).collect();
        rows.push((s.time(), m));
        Ok(())
    })?;
    let sup = (0..orders.len())
        .map(|j| rows.iter().map(|r| r.1[j]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    Ok(MomentTable {
        orders: orders.to_vec(),
        rows,
        sup,
    })
}

/// Writes `moments.csv`: a `time` column, one column per order, and a final
/// row labelled `sup`.
pub fn cmd_moments(cfg: &ExperimentConfig, out: &Path, orders: &[f64]) -> Result<MomentTable> {
    prepare_output(out)?;
    let table = moment_sweep(cfg, orders)?;
    let mut text = String::from("time");
    for &o in &table.orders {
        let _ = write!(text, ",{}", order_label(o));
    }
    text.push('\n');
    for (t, m) in &table.rows {
        text.push_str(&diagnostics::fmt_float(*t));
        for v in m {
            let _ = write!(text, ",{}", diagnostics::fmt_float(*v));
        }
        text.push('\n');
    }
    text.push_str("sup");
    for v in &table.sup {
        let _ = write!(text, ",{}", diagnostics::fmt_float(*v));
    }
    text.push('\n');
    write_atomic(&out.join("moments.csv"), text.as_bytes())?;
    Ok(table)
}

/// Reads a file written by [`cmd_moments`].
pub fn read_moments(path: &Path) -> Result<MomentTable> {
    let err = |msg: String| VpmeError::Format {
        path: path.to_path_buf(),
        msg,
    };
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| err("empty file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"time") {
        return Err(err(format!("unexpected header '{header}'")));
    }
    let orders = cols[1..]
        .iter()
        .map(|c| {
            c.strip_prefix('m')
                .and_then(|o| o.parse::<f64>().ok())
                .ok_or_else(|| err(format!("bad column '{c}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    let parse_row = |line: &str, n: usize| -> Result<(String, Vec<f64>)> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n + 1 {
            return Err(err(format!("row '{line}' has {} fields", fields.len())));
        }
        let vals = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| err(format!("bad number '{f}'"))))
            .collect::<Result<Vec<_>>>()?;
        Ok((fields[0].to_string(), vals))
    };
    let mut rows = Vec::new();
    let mut sup = None;
    for line in lines {
        let (label, vals) = parse_row(line, orders.len())?;
        if label == "sup" {
            sup = Some(vals);
        } else if sup.is_some() {
            return Err(err("rows after the sup row".into()));
        } else {
            let t = label.parse::<f64>().map_err(|_| err(format!("bad time '{label}'")))?;
            rows.push((t, vals));
        }
    }
    Ok(MomentTable {
        orders,
        rows,
        sup: sup.ok_or_else(|| err("missing sup row".into()))?,
    })
}

/// Distance between two snapshots.
pub fn cmd_w2(file_a: &Path, file_b: &Path, w2_points: usize) -> Result<crate::transport::DistanceEstimate> {
    let (a, _) = snapshot::read(file_a)?;
    let (b, _) = snapshot::read(file_b)?;
    if a.dim() != b.dim() {
        return Err(VpmeError::DimMismatch(a.dim(), b.dim()));
    }
    ensemble_w2(&a, &b, w2_points)
}
