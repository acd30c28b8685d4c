//! Plain-text experiment configuration: one `key = value` per line, `#`
//! starts a comment.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::dynamics::{ForceModel, SimState};
use crate::error::{Result, VpmeError};
use crate::grid::TorusGrid;
use crate::particles::ParticleEnsemble;
use crate::pic::ShapeOrder;
use crate::poisson::SolverSettings;
use crate::sampling::{sample_initial, Scenario};

/// Recognized keys, in the order [`ExperimentConfig::to_text`] writes them.
pub const KEYS: [&str; 23] = [
    "dim",
    "n_grid",
    "n_particles",
    "dt",
    "t_end",
    "model",
    "mollifier_radius",
    "scenario",
    "sigma",
    "delta",
    "mode",
    "v0",
    "r_x",
    "r_v",
    "seed",
    "log_every",
    "output",
    "shape_order",
    "moment_order",
    "w2_points",
    "snapshot_every",
    "newton_tol",
    "max_iters",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStep {
    /// `suggest_dt` of the initial state.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub n_grid: usize,
    pub n_particles: usize,
    pub dt: TimeStep,
    pub t_end: f64,
    /// `vpme`, `electron` or `smooth:<kernel>`.
    pub model: String,
    pub mollifier_radius: Option<f64>,
    pub scenario: String,
    pub sigma: Option<f64>,
    pub delta: Option<f64>,
    pub mode: Option<u32>,
    pub v0: Option<f64>,
    pub r_x: Option<f64>,
    pub r_v: Option<f64>,
    pub seed: u64,
    /// Steps between logged rows.
    pub log_every: usize,
    pub output: PathBuf,
    pub shape_order: u32,
    /// Order of the `m_cfg` moment column.
    pub moment_order: f64,
    /// Subsample size of transport distances.
    pub w2_points: usize,
    /// Steps between snapshots; zero writes only the initial and final ones.
    pub snapshot_every: usize,
    pub newton_tol: f64,
    pub max_iters: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            n_grid: 64,
            n_particles: 100_000,
            dt: TimeStep::Fixed(1e-3),
            t_end: 1.0,
            model: "vpme".into(),
            mollifier_radius: None,
            scenario: "perturbed_maxwellian".into(),
            sigma: None,
            delta: None,
            mode: None,
            v0: None,
            r_x: None,
            r_v: None,
            seed: 0,
            log_every: 10,
            output: PathBuf::from("out"),
            shape_order: 3,
            moment_order: 4.0,
            w2_points: 4000,
            snapshot_every: 0,
            newton_tol: 1e-10,
            max_iters: 50,
        }
    }
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| VpmeError::Config {
        line,
        msg: format!("cannot parse '{value}' for {key}"),
    })
}

fn positive(line: usize, key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(VpmeError::Config {
            line,
            msg: format!("{key} must be positive, got {v}"),
        })
    }
}

fn positive_int(line: usize, key: &str, v: usize) -> Result<usize> {
    if v > 0 {
        Ok(v)
    } else {
        Err(VpmeError::Config {
            line,
            msg: format!("{key} must be positive"),
        })
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen: Vec<&str> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(VpmeError::Config {
                    line,
                    msg: format!("expected 'key = value', got '{content}'"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            let Some(&known) = KEYS.iter().find(|k| **k == key) else {
                return Err(VpmeError::Config {
                    line,
                    msg: format!("unknown key '{key}'"),
                });
            };
            if seen.contains(&known) {
                return Err(VpmeError::Config {
                    line,
                    msg: format!("duplicate key '{key}'"),
                });
            }
            seen.push(known);
            cfg.set(line, known, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn set(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        let float = |v: &str| parse_value::<f64>(line, key, v);
        match key {
            "dim" => self.dim = parse_value(line, key, value)?,
            "n_grid" => self.n_grid = positive_int(line, key, parse_value(line, key, value)?)?,
            "n_particles" => self.n_particles = positive_int(line, key, parse_value(line, key, value)?)?,
            "dt" => {
                self.dt = if value == "auto" {
                    TimeStep::Auto
                } else {
                    TimeStep::Fixed(positive(line, key, float(value)?)?)
                }
            }
            "t_end" => self.t_end = positive(line, key, float(value)?)?,
            "model" => self.model = value.to_string(),
            "mollifier_radius" => {
                self.mollifier_radius = if value == "none" {
                    None
                } else {
                    Some(positive(line, key, float(value)?)?)
                }
            }
            "scenario" => self.scenario = value.to_string(),
            "sigma" => self.sigma = Some(positive(line, key, float(value)?)?),
            "delta" => self.delta = Some(float(value)?),
            "mode" => self.mode = Some(parse_value(line, key, value)?),
            "v0" => self.v0 = Some(float(value)?),
            "r_x" => self.r_x = Some(positive(line, key, float(value)?)?),
            "r_v" => self.r_v = Some(positive(line, key, float(value)?)?),
            "seed" => self.seed = parse_value(line, key, value)?,
            "log_every" => self.log_every = positive_int(line, key, parse_value(line, key, value)?)?,
            "output" => self.output = PathBuf::from(value),
            "shape_order" => self.shape_order = parse_value(line, key, value)?,
            "moment_order" => {
                let m: f64 = float(value)?;
                if !(0.0..=8.0).contains(&m) {
                    return Err(VpmeError::Config {
                        line,
                        msg: format!("moment_order {m} outside [0, 8]"),
                    });
                }
                self.moment_order = m;
            }
            "w2_points" => self.w2_points = positive_int(line, key, parse_value(line, key, value)?)?,
            "snapshot_every" => self.snapshot_every = parse_value(line, key, value)?,
            "newton_tol" => self.newton_tol = positive(line, key, float(value)?)?,
            "max_iters" => self.max_iters = positive_int(line, key, parse_value(line, key, value)?)?,
            _ => unreachable!("key list and setter out of sync"),
        }
        Ok(())
    }

    /// Cross-field checks. Errors carry line 0.
    pub fn validate(&self) -> Result<()> {
        let wrap = |e: VpmeError| VpmeError::Config {
            line: 0,
            msg: e.to_string(),
        };
        self.grid().map_err(wrap)?;
        self.scenario().map_err(wrap)?;
        ShapeOrder::from_order(self.shape_order).map_err(wrap)?;
        self.force_model(&self.grid()?).map_err(wrap)?;
        self.solver_settings().validate().map_err(wrap)?;
        Ok(())
    }

    pub fn grid(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.dim, self.n_grid)
    }

    /// Scenario defaults overridden by the configured parameters.
    pub fn scenario(&self) -> Result<Scenario> {
        let mut s = Scenario::from_name(&self.scenario)?;
        let unused = |name: &str| {
            VpmeError::InvalidScenario(format!("parameter {name} does not apply to {}", self.scenario))
        };
        match &mut s {
            Scenario::UniformMaxwellian { sigma } => {
                if let Some(v) = self.sigma {
                    *sigma = v;
                }
                for (name, set) in [("delta", self.delta.is_some()), ("mode", self.mode.is_some()), ("v0", self.v0.is_some())] {
                    if set {
                        return Err(unused(name));
                    }
                }
            }
            Scenario::PerturbedMaxwellian { delta, mode, sigma } => {
                if let Some(v) = self.sigma {
                    *sigma = v;
                }
                if let Some(v) = self.delta {
                    *delta = v;
                }
                if let Some(v) = self.mode {
                    *mode = v;
                }
                if self.v0.is_some() {
                    return Err(unused("v0"));
                }
            }
            Scenario::TwoStream { v0, delta, sigma } => {
                if let Some(v) = self.sigma {
                    *sigma = v;
                }
                if let Some(v) = self.delta {
                    *delta = v;
                }
                if let Some(v) = self.v0 {
                    *v0 = v;
                }
                if self.mode.is_some() {
                    return Err(unused("mode"));
                }
            }
            Scenario::CompactSupport { r_x, r_v } => {
                if let Some(v) = self.r_x {
                    *r_x = v;
                }
                if let Some(v) = self.r_v {
                    *r_v = v;
                }
            }
        }
        if !matches!(s, Scenario::CompactSupport { .. }) && (self.r_x.is_some() || self.r_v.is_some()) {
            return Err(unused("r_x/r_v"));
        }
        s.validate()?;
        Ok(s)
    }

    pub fn force_model(&self, grid: &TorusGrid) -> Result<ForceModel> {
        ForceModel::from_name(&self.model, grid)?.with_mollifier(self.mollifier_radius)
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings {
            newton_tol: self.newton_tol,
            max_iters: self.max_iters,
            ..SolverSettings::default()
        }
    }

    pub fn shape(&self) -> ShapeOrder {
        ShapeOrder::from_order(self.shape_order).unwrap_or_default()
    }

    /// Initial particles for the configured seed.
    pub fn initial_ensemble(&self) -> Result<ParticleEnsemble> {
        sample_initial(&self.scenario()?, &self.grid()?, self.n_particles, self.seed)
    }

    pub fn initial_state(&self, ensemble: ParticleEnsemble) -> Result<SimState> {
        let grid = self.grid()?;
        SimState::new(
            ensemble,
            &grid,
            self.force_model(&grid)?,
            self.shape(),
            self.solver_settings(),
        )
    }

    /// Step size and step count covering `[0, t_end]`; the step is shrunk so
    /// the steps land exactly on `t_end`.
    pub fn schedule(&self, state: &SimState) -> Result<(f64, usize)> {
        let dt = match self.dt {
            TimeStep::Fixed(dt) => dt,
            TimeStep::Auto => state.suggest_dt()?,
        };
        let steps = (self.t_end / dt - 1e-9).ceil().max(1.0) as usize;
        Ok((self.t_end / steps as f64, steps))
    }

    /// Serializes to the text format accepted by [`ExperimentConfig::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("dim", self.dim.to_string());
        put("n_grid", self.n_grid.to_string());
        put("n_particles", self.n_particles.to_string());
        put(
            "dt",
            match self.dt {
                TimeStep::Auto => "auto".into(),
                TimeStep::Fixed(v) => format!("{v:?}"),
            },
        );
        put("t_end", format!("{:?}", self.t_end));
        put("model", self.model.clone());
        if let Some(r) = self.mollifier_radius {
            put("mollifier_radius", format!("{r:?}"));
        }
        put("scenario", self.scenario.clone());
        for (k, v) in [("sigma", self.sigma), ("delta", self.delta), ("v0", self.v0), ("r_x", self.r_x), ("r_v", self.r_v)] {
            if let Some(v) = v {
                put(k, format!("{v:?}"));
            }
        }
        if let Some(m) = self.mode {
            put("mode", m.to_string());
        }
        put("seed", self.seed.to_string());
        put("log_every", self.log_every.to_string());
        put("output", self.output.display().to_string());
        put("shape_order", self.shape_order.to_string());
        put("moment_order", format!("{:?}", self.moment_order));
        put("w2_points", self.w2_points.to_string());
        put("snapshot_every", self.snapshot_every.to_string());
        put("newton_tol", format!("{:?}", self.newton_tol));
        put("max_iters", self.max_iters.to_string());
        s
    }
}
