//! Initial data and quiet-start particle loading.
//!
//! Particles are loaded as `M` beams of `K` particles. Inside a beam all
//! particles share one velocity and sit on a shifted lattice in the inverse
//! CDF coordinates of the spatial profile, so each beam deposits a density
//! equal to the spatial profile up to lattice ripple, and free streaming maps a
//! beam onto another shifted lattice. Velocities come from `M` equal-mass
//! strata of the velocity profile.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc;

use crate::error::{Result, VpmeError};
use crate::grid::TorusGrid;
use crate::particles::{uniform_weights, ParticleEnsemble};

/// Minimum number of beams (distinct velocities).
const MIN_BEAMS: usize = 16;
/// Simpson panels per velocity stratum.
const STRATUM_PANELS: usize = 200;
const GAUSS_CUTOFF: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scenario {
    /// `f = (2 pi sigma^2)^{-d/2} exp(-|v|^2 / 2 sigma^2)`, uniform in `x`.
    UniformMaxwellian { sigma: f64 },
    /// Maxwellian with `rho = 1 + delta cos(2 pi mode x_1)`.
    PerturbedMaxwellian { delta: f64, mode: u32, sigma: f64 },
    /// `rho = 1 + delta cos(2 pi x_1)`, counter-streaming Maxwellians at
    /// `+-v0` along the first axis.
    TwoStream { v0: f64, delta: f64, sigma: f64 },
    /// Separable bump `(1 - ((x_k - 1/2) / r_x)^2)_+` in space and
    /// `(1 - |v|^2 / r_v^2)_+^2` in velocity.
    CompactSupport { r_x: f64, r_v: f64 },
}

/// Scenario names accepted by [`Scenario::from_name`].
pub const SCENARIO_NAMES: [&str; 4] = ["uniform_maxwellian", "perturbed_maxwellian", "two_stream", "compact_support"];

impl Scenario {
    /// Scenario with default parameters.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "uniform_maxwellian" => Scenario::UniformMaxwellian { sigma: 1.0 },
            "perturbed_maxwellian" => Scenario::PerturbedMaxwellian {
                delta: 0.1,
                mode: 1,
                sigma: 1.0,
            },
            "two_stream" => Scenario::TwoStream {
                v0: 1.0,
                delta: 0.05,
                sigma: 0.5,
            },
            "compact_support" => Scenario::CompactSupport { r_x: 0.45, r_v: 3.0 },
            other => return Err(VpmeError::UnknownScenario(other.to_string())),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::UniformMaxwellian { .. } => "uniform_maxwellian",
            Scenario::PerturbedMaxwellian { .. } => "perturbed_maxwellian",
            Scenario::TwoStream { .. } => "two_stream",
            Scenario::CompactSupport { .. } => "compact_support",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(VpmeError::InvalidScenario(msg));
        match *self {
            Scenario::UniformMaxwellian { sigma } if !(sigma > 0.0 && sigma.is_finite()) => bad(format!("sigma = {sigma}")),
            Scenario::PerturbedMaxwellian { delta, mode, sigma } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    bad(format!("sigma = {sigma}"))
                } else if !(delta.abs() < 1.0) {
                    bad(format!("delta = {delta} would make the density negative"))
                } else if mode == 0 {
                    bad("mode must be at least 1".into())
                } else {
                    Ok(())
                }
            }
            Scenario::TwoStream { v0, delta, sigma } => {
                if !(sigma > 0.0 && sigma.is_finite()) || !v0.is_finite() {
                    bad(format!("sigma = {sigma}, v0 = {v0}"))
                } else if !(delta.abs() < 1.0) {
                    bad(format!("delta = {delta} would make the density negative"))
                } else {
                    Ok(())
                }
            }
            Scenario::CompactSupport { r_x, r_v } => {
                if !(r_x > 0.0 && r_x <= 0.5) {
                    bad(format!("r_x = {r_x} must lie in (0, 1/2]"))
                } else if !(r_v > 0.0 && r_v.is_finite()) {
                    bad(format!("r_v = {r_v}"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    fn space_profile(&self, axis: usize) -> Profile {
        match *self {
            Scenario::UniformMaxwellian { .. } => Profile::Flat,
            Scenario::PerturbedMaxwellian { delta, mode, .. } if axis == 0 => Profile::Cosine { delta, mode },
            Scenario::PerturbedMaxwellian { .. } => Profile::Flat,
            Scenario::TwoStream { delta, .. } if axis == 0 => Profile::Cosine { delta, mode: 1 },
            Scenario::TwoStream { .. } => Profile::Flat,
            Scenario::CompactSupport { r_x, .. } => Profile::Bump { r: r_x },
        }
    }

    /// Velocity profile along `axis` for separable scenarios.
    fn velocity_profile(&self, axis: usize, dim: usize) -> Profile {
        match *self {
            Scenario::UniformMaxwellian { sigma } | Scenario::PerturbedMaxwellian { sigma, .. } => Profile::Gauss { sigma },
            Scenario::TwoStream { v0, sigma, .. } if axis == 0 => Profile::TwoStream { v0, sigma },
            Scenario::TwoStream { sigma, .. } => Profile::Gauss { sigma },
            Scenario::CompactSupport { r_v, .. } => Profile::Radial { r: r_v, dim },
        }
    }

    /// `sup f_0`.
    pub fn f_linf(&self, dim: usize) -> f64 {
        let gauss_peak = |sigma: f64| 1.0 / (2.0 * PI * sigma * sigma).sqrt();
        let d = dim as i32;
        match *self {
            Scenario::UniformMaxwellian { sigma } => gauss_peak(sigma).powi(d),
            Scenario::PerturbedMaxwellian { delta, sigma, .. } => (1.0 + delta.abs()) * gauss_peak(sigma).powi(d),
            Scenario::TwoStream { v0, delta, sigma } => {
                let p = Profile::TwoStream { v0, sigma };
                let span = v0.abs() + sigma;
                let peak = (0..=20_000)
                    .map(|i| p.pdf(-span + 2.0 * span * i as f64 / 20_000.0))
                    .fold(0.0, f64::max);
                (1.0 + delta.abs()) * peak * gauss_peak(sigma).powi(d - 1)
            }
            Scenario::CompactSupport { r_x, r_v } => {
                let x_peak = 3.0 / (4.0 * r_x);
                x_peak.powi(d) / radial_normalization(r_v, dim)
            }
        }
    }
}

/// `int (1 - |v|^2 / r^2)_+^2 dv` over `R^d`.
fn radial_normalization(r: f64, dim: usize) -> f64 {
    let d = dim as f64;
    let sphere = match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    };
    sphere * r.powi(dim as i32) * (1.0 / d - 2.0 / (d + 2.0) + 1.0 / (d + 4.0))
}

/// One-dimensional probability profiles.
#[derive(Debug, Clone, Copy)]
enum Profile {
    Flat,
    Cosine { delta: f64, mode: u32 },
    Bump { r: f64 },
    Gauss { sigma: f64 },
    TwoStream { v0: f64, sigma: f64 },
    /// Radius distribution of `(1 - |v|^2/r^2)_+^2` in `d` dimensions; in
    /// `d = 1` the signed variable.
    Radial { r: f64, dim: usize },
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

impl Profile {
    fn support(&self) -> (f64, f64) {
        match *self {
            Profile::Flat | Profile::Cosine { .. } => (0.0, 1.0),
            Profile::Bump { r } => (0.5 - r, 0.5 + r),
            Profile::Gauss { sigma } => (-GAUSS_CUTOFF * sigma, GAUSS_CUTOFF * sigma),
            Profile::TwoStream { v0, sigma } => {
                let s = v0.abs() + GAUSS_CUTOFF * sigma;
                (-s, s)
            }
            Profile::Radial { r, dim: 1 } => (-r, r),
            Profile::Radial { r, .. } => (0.0, r),
        }
    }

    fn pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return 0.0;
        }
        match *self {
            Profile::Flat => 1.0,
            Profile::Cosine { delta, mode } => 1.0 + delta * (2.0 * PI * mode as f64 * x).cos(),
            Profile::Bump { r } => {
                let s = (x - 0.5) / r;
                0.75 / r * (1.0 - s * s)
            }
            Profile::Gauss { sigma } => normal_pdf(x / sigma) / sigma,
            Profile::TwoStream { v0, sigma } => 0.5 * (normal_pdf((x - v0) / sigma) + normal_pdf((x + v0) / sigma)) / sigma,
            Profile::Radial { r, dim } => {
                let s = x / r;
                let w = (1.0 - s * s).powi(2);
                if dim == 1 {
                    w * 15.0 / (16.0 * r)
                } else {
                    let d = dim as f64;
                    s.abs().powi(dim as i32 - 1) * w / (r * (1.0 / d - 2.0 / (d + 2.0) + 1.0 / (d + 4.0)))
                }
            }
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        match *self {
            Profile::Flat => x,
            Profile::Cosine { delta, mode } => {
                let k = 2.0 * PI * mode as f64;
                x + delta * (k * x).sin() / k
            }
            Profile::Bump { r } => {
                let s = (x - 0.5) / r;
                0.75 * (s - s * s * s / 3.0 + 2.0 / 3.0)
            }
            Profile::Gauss { sigma } => normal_cdf(x / sigma),
            Profile::TwoStream { v0, sigma } => 0.5 * (normal_cdf((x - v0) / sigma) + normal_cdf((x + v0) / sigma)),
            Profile::Radial { r, dim } => {
                let s = x / r;
                if dim == 1 {
                    (s - 2.0 * s.powi(3) / 3.0 + s.powi(5) / 5.0 + 8.0 / 15.0) * 15.0 / 16.0
                } else {
                    let d = dim as f64;
                    let prim = |t: f64| t.powf(d) / d - 2.0 * t.powf(d + 2.0) / (d + 2.0) + t.powf(d + 4.0) / (d + 4.0);
                    prim(s) / prim(1.0)
                }
            }
        }
    }

    fn quantile(&self, u: f64) -> f64 {
        let (mut lo, mut hi) = self.support();
        if let Profile::Flat = self {
            return u.clamp(0.0, 1.0);
        }
        if u <= 0.0 {
            return lo;
        }
        if u >= 1.0 {
            return hi;
        }
        // bisection to full precision; the CDFs are monotone and cheap
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// `int_a^b g(x) pdf(x) dx` by composite Simpson.
    fn integrate<G: Fn(f64) -> f64>(&self, a: f64, b: f64, g: G) -> f64 {
        let n = STRATUM_PANELS;
        let h = (b - a) / n as f64;
        let mut s = g(a) * self.pdf(a) + g(b) * self.pdf(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(x) * self.pdf(x);
        }
        s * h / 3.0
    }

    /// One representative per equal-mass stratum, matching the conditional
    /// fourth moment of each stratum.
    fn stratum_representatives(&self, m: usize) -> Vec<f64> {
        let bounds: Vec<f64> = (0..=m).map(|j| self.quantile(j as f64 / m as f64)).collect();
        bounds
            .windows(2)
            .map(|ab| {
                let (a, b) = (ab[0], ab[1]);
                if b <= a {
                    return a;
                }
                let mass = self.integrate(a, b, |_| 1.0);
                let mean = self.integrate(a, b, |x| x);
                let m4 = self.integrate(a, b, |x| x.powi(4)) / mass;
                let rep = m4.powf(0.25).clamp(a.abs().min(b.abs()), a.abs().max(b.abs()));
                if mean < 0.0 {
                    -rep
                } else {
                    rep
                }
            })
            .collect()
    }

    /// Stratum midpoints in probability.
    fn stratum_midpoints(&self, m: usize) -> Vec<f64> {
        (0..m).map(|j| self.quantile((j as f64 + 0.5) / m as f64)).collect()
    }
}

/// Beam count `M` and beam size `K` with `M K = N`.
pub fn beam_layout(dim: usize, n_grid: usize, n_particles: usize) -> (usize, usize) {
    let divisors: Vec<usize> = (1..=n_particles).filter(|k| n_particles % k == 0).collect();
    if dim == 1 {
        let fits = |k: &&usize| n_particles / **k >= MIN_BEAMS;
        let k = divisors
            .iter()
            .filter(fits)
            .find(|&&k| k >= 4 * n_grid)
            .or_else(|| divisors.iter().filter(fits).last())
            .copied()
            .unwrap_or(1);
        (n_particles / k, k)
    } else {
        let root = (n_particles as f64).sqrt();
        let m = divisors
            .iter()
            .copied()
            .min_by(|a, b| (*a as f64 - root).abs().total_cmp(&(*b as f64 - root).abs()))
            .unwrap_or(1);
        (m, n_particles / m)
    }
}

/// Generator `(1, a, a^2, ...)` of a rank-1 lattice with `m` points in
/// `[0,1)^dim`, chosen to maximize the minimal torus distance between points.
pub fn korobov_generator(m: usize, dim: usize) -> Vec<usize> {
    if dim == 1 || m <= 2 {
        return vec![1; dim.max(1)];
    }
    let gen = |a: usize| {
        let mut g = vec![1usize; dim];
        for j in 1..dim {
            g[j] = (g[j - 1] * a) % m;
        }
        g
    };
    let separation = |g: &[usize]| {
        (1..m)
            .map(|k| {
                g.iter()
                    .map(|&gj| {
                        let c = ((k * gj) % m) as f64 / m as f64;
                        let c = c.min(1.0 - c);
                        c * c
                    })
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
    };
    let mut best = (1usize, f64::NEG_INFINITY);
    for a in 2..m {
        if gcd(a, m) != 1 {
            continue;
        }
        let g = gen(a);
        if g.iter().any(|&gj| gcd(gj, m) != 1) {
            continue;
        }
        let s = separation(&g);
        if s > best.1 {
            best = (a, s);
        }
    }
    gen(best.0)
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Additive recurrence constants `phi_d^{-(j+1)}` with `phi_d` the positive
/// root of `x^{d+1} = x + 1`.
fn recurrence_constants(dim: usize) -> Vec<f64> {
    let mut phi = 2.0f64;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (dim as f64 + 1.0));
    }
    (1..=dim).map(|j| phi.powi(-(j as i32))).collect()
}

/// Deterministic quiet-start sample of `scenario` with `n_particles` equal
/// weights. The grid sets the dimension and the preferred beam size.
pub fn sample_initial(scenario: &Scenario, grid: &TorusGrid, n_particles: usize, seed: u64) -> Result<ParticleEnsemble> {
    scenario.validate()?;
    if n_particles == 0 {
        return Err(VpmeError::InvalidEnsemble("no particles".into()));
    }
    let dim = grid.dim();
    let (m, k) = beam_layout(dim, grid.n(), n_particles);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha = recurrence_constants(dim);
    let start: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
    let vel_shift: Vec<usize> = (0..dim).map(|_| rng.gen_range(0..m)).collect();

    let velocities_per_beam = beam_velocities(scenario, dim, m, &vel_shift);

    let x_gen = korobov_generator(k, dim);
    let x_profiles: Vec<Profile> = (0..dim).map(|a| scenario.space_profile(a)).collect();
    let mut positions = Vec::with_capacity(n_particles * dim);
    let mut velocities = Vec::with_capacity(n_particles * dim);
    for beam in 0..m {
        let offset: Vec<f64> = (0..dim).map(|j| (start[j] + beam as f64 * alpha[j]).fract()).collect();
        let v = &velocities_per_beam[beam * dim..(beam + 1) * dim];
        for i in 0..k {
            for j in 0..dim {
                let lattice = ((i * x_gen[j]) % k) as f64;
                let u = (lattice + offset[j]) / k as f64;
                positions.push(x_profiles[j].quantile(u));
            }
            velocities.extend_from_slice(v);
        }
    }
    ParticleEnsemble::new(dim, positions, velocities, uniform_weights(n_particles))
}

/// `m` velocities (beam-major, `dim` components each).
fn beam_velocities(scenario: &Scenario, dim: usize, m: usize, shift: &[usize]) -> Vec<f64> {
    let gen = korobov_generator(m, dim);
    let mut out = vec![0.0; m * dim];
    let radial = matches!(scenario, Scenario::CompactSupport { .. });
    if dim == 1 || !radial {
        for axis in 0..dim {
            let reps = scenario.velocity_profile(axis, dim).stratum_representatives(m);
            for beam in 0..m {
                let slot = (beam * gen[axis] + shift[axis]) % m;
                out[beam * dim + axis] = reps[slot];
            }
        }
        return out;
    }
    let radius = scenario.velocity_profile(0, dim).stratum_midpoints(m);
    for beam in 0..m {
        let u: Vec<f64> = (0..dim)
            .map(|j| (((beam * gen[j] + shift[j]) % m) as f64 + 0.5) / m as f64)
            .collect();
        let r = radius[((beam * gen[0] + shift[0]) % m).min(m - 1)];
        let v = &mut out[beam * dim..(beam + 1) * dim];
        if dim == 2 {
            let theta = 2.0 * PI * u[1];
            v[0] = r * theta.cos();
            v[1] = r * theta.sin();
        } else {
            let z = 2.0 * u[1] - 1.0;
            let phi = 2.0 * PI * u[2];
            let s = (1.0 - z * z).max(0.0).sqrt();
            v[0] = r * s * phi.cos();
            v[1] = r * s * phi.sin();
            v[2] = r * z;
        }
    }
    out
}
