//! Reflected Brownian motion in the nonnegative orthant: validated parameter
//! sets, Euler sampling of free paths pushed through the reflection engine,
//! streaming steady-state scans, and the diffusion family that approximates
//! a queueing network near a given scale.
//!
//! A parameter set holds drift, driving covariance, reflection matrix, and a
//! starting point. Sampling draws the free Brownian path on a uniform grid
//! and reflects it, so the output carries both the constrained path and its
//! regulator.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::limits::{covariance_gamma, LimitComponent, LimitError};
use crate::linalg::{self, LinalgError};
use crate::network::NetworkSpec;
use crate::network::ScaleRegime;
use crate::skorokhod::{
    reflect_md, PathGrid, Reflection, SkorokhodError, REFLECT_MAX_ITER, REFLECT_TOL,
};

/// Hard ceiling on stored grid points per simulated path.
pub const GRID_CAP: usize = 1 << 22;

#[derive(Debug, Error)]
pub enum SrbmError {
    #[error("bad diffusion parameters: {0}")]
    BadSpec(String),
    #[error("grid of {steps} steps exceeds the cap of {cap}")]
    TooManySteps { steps: usize, cap: usize },
    #[error(transparent)]
    Skorokhod(#[from] SkorokhodError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Validated parameters of a reflected Brownian motion.
#[derive(Clone, Debug)]
pub struct SrbmSpec {
    pub drift: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub reflection: DMatrix<f64>,
    pub initial: DVector<f64>,
    chol: DMatrix<f64>,
}

impl SrbmSpec {
    pub fn new(
        drift: DVector<f64>,
        covariance: DMatrix<f64>,
        reflection: DMatrix<f64>,
        initial: DVector<f64>,
    ) -> Result<Self, SrbmError> {
        let d = drift.len();
        if d == 0 {
            return Err(SrbmError::BadSpec("dimension must be positive".into()));
        }
        if covariance.nrows() != d
            || covariance.ncols() != d
            || reflection.nrows() != d
            || reflection.ncols() != d
            || initial.len() != d
        {
            return Err(SrbmError::BadSpec(format!(
                "inconsistent dimensions around a {d}-dimensional drift"
            )));
        }
        if linalg::max_asymmetry(&covariance) > 1e-9 {
            return Err(SrbmError::BadSpec("covariance is not symmetric".into()));
        }
        let chol = linalg::psd_cholesky(&covariance, 1e-10)
            .map_err(|e| SrbmError::BadSpec(format!("covariance: {e}")))?;
        if !linalg::is_m_matrix(&reflection, 1e-9) {
            return Err(SrbmError::BadSpec(
                "reflection matrix must be an M-matrix".into(),
            ));
        }
        if initial.iter().any(|&x| x < 0.0) {
            return Err(SrbmError::BadSpec(
                "starting point must be nonnegative".into(),
            ));
        }
        Ok(Self {
            drift,
            covariance,
            reflection,
            initial,
            chol,
        })
    }

    pub fn from_component(comp: &LimitComponent) -> Result<Self, SrbmError> {
        Self::new(
            comp.drift.clone(),
            comp.covariance.clone(),
            comp.reflection.clone(),
            comp.initial.clone(),
        )
    }

    pub fn dim(&self) -> usize {
        self.drift.len()
    }

    /// Lower-triangular factor `L` with `L L' =` covariance.
    pub fn cholesky(&self) -> &DMatrix<f64> {
        &self.chol
    }
}

/// Samples one reflected path on `steps` Euler increments over `[0, horizon]`.
///
/// Normals are drawn coordinate-major within each step, so equal seeds give
/// equal paths for equal dimensions regardless of the parameter values.
pub fn simulate<R: Rng + ?Sized>(
    spec: &SrbmSpec,
    horizon: f64,
    steps: usize,
    rng: &mut R,
) -> Result<Reflection, SrbmError> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(SrbmError::BadSpec("horizon must be positive".into()));
    }
    if steps == 0 {
        return Err(SrbmError::BadSpec("need at least one step".into()));
    }
    if steps > GRID_CAP {
        return Err(SrbmError::TooManySteps {
            steps,
            cap: GRID_CAP,
        });
    }
    let d = spec.dim();
    let h = horizon / steps as f64;
    let sqrt_h = h.sqrt();
    let mut coords = vec![vec![0.0f64; steps + 1]; d];
    let mut x = spec.initial.clone();
    for (j, col) in coords.iter_mut().enumerate() {
        col[0] = x[j];
    }
    let mut noise = DVector::zeros(d);
    for n in 1..=steps {
        for j in 0..d {
            noise[j] = rng.sample::<f64, _>(StandardNormal);
        }
        x += &spec.drift * h + &spec.chol * &noise * sqrt_h;
        for (j, col) in coords.iter_mut().enumerate() {
            col[n] = x[j];
        }
    }
    let times: Vec<f64> = (0..=steps).map(|n| n as f64 * h).collect();
    let free = PathGrid::new(times, coords)?;
    Ok(reflect_md(&free, &spec.reflection, REFLECT_TOL, REFLECT_MAX_ITER)?)
}

/// Spaced state reads and the time average from one long scan.
#[derive(Clone, Debug)]
pub struct ScanOutput {
    /// State every `spacing` steps after the burn-in.
    pub samples: Vec<f64>,
    /// Mean state over all post-burn-in steps.
    pub time_average: f64,
}

/// Streaming steady-state scan of a one-dimensional reflected Brownian
/// motion with unit reflection: records the state every `spacing` steps after
/// a burn-in, without storing the path.
pub fn stationary_scan_1d<R: Rng + ?Sized>(
    drift: f64,
    variance: f64,
    h: f64,
    burn_in_steps: usize,
    spacing: usize,
    samples: usize,
    rng: &mut R,
) -> Result<ScanOutput, SrbmError> {
    if !(drift < 0.0) {
        return Err(SrbmError::BadSpec(
            "steady state needs strictly negative drift".into(),
        ));
    }
    if !(variance > 0.0 && h > 0.0) {
        return Err(SrbmError::BadSpec(
            "variance and step size must be positive".into(),
        ));
    }
    if spacing == 0 || samples == 0 {
        return Err(SrbmError::BadSpec(
            "need positive spacing and sample count".into(),
        ));
    }
    let sd_step = (variance * h).sqrt();
    let mut z = 0.0f64;
    let mut out = Vec::with_capacity(samples);
    let mut area = 0.0f64;
    let total = burn_in_steps + spacing * samples;
    for n in 1..=total {
        let eps: f64 = rng.sample(StandardNormal);
        z = (z + drift * h + sd_step * eps).max(0.0);
        if n > burn_in_steps {
            area += z;
            if (n - burn_in_steps) % spacing == 0 {
                out.push(z);
            }
        }
    }
    Ok(ScanOutput {
        samples: out,
        time_average: area / (spacing * samples) as f64,
    })
}

/// Diffusion approximation family of a network: one member per scale and
/// observation clock, all sharing the reflection matrix and driving
/// covariance of the network.
#[derive(Clone, Debug)]
pub struct PrelimitFamily {
    pub reflection: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub regime: ScaleRegime,
}

impl PrelimitFamily {
    pub fn from_network(spec: &NetworkSpec) -> Result<Self, LimitError> {
        Ok(Self {
            reflection: spec.routing.reflection(),
            gamma: covariance_gamma(spec)?,
            regime: spec.regime.clone(),
        })
    }

    /// Member at scale `r` on block `clock`'s time scale. Drift per
    /// coordinate is the rate slack pushed through the reflection matrix and
    /// divided by the clock's scale factor; starting levels `xi` are given on
    /// each station's own scale and converted onto the clock.
    pub fn component(&self, r: f64, clock: usize, xi: &[f64]) -> Result<SrbmSpec, SrbmError> {
        let n = self.regime.stations();
        if !(0.0 < r && r < 1.0) {
            return Err(SrbmError::BadSpec(format!("scale r = {r} outside (0, 1)")));
        }
        if clock >= self.regime.count() {
            return Err(SrbmError::BadSpec(format!(
                "clock {clock} out of range for {} blocks",
                self.regime.count()
            )));
        }
        if xi.len() != n {
            return Err(SrbmError::BadSpec(format!(
                "{} starting levels for {n} stations",
                xi.len()
            )));
        }
        let gk = self.regime.gamma(clock, r);
        let drift = -(&self.reflection * self.regime.delta(r)) / gk;
        let initial = DVector::from_fn(n, |j, _| {
            gk * xi[j] / self.regime.gamma_station(j, r)
        });
        SrbmSpec::new(
            drift,
            self.gamma.clone(),
            self.reflection.clone(),
            initial,
        )
    }
}

/// Samples a limit component's reflected Brownian motion.
pub fn simulate_limit<R: Rng + ?Sized>(
    comp: &LimitComponent,
    horizon: f64,
    steps: usize,
    rng: &mut R,
) -> Result<Reflection, SrbmError> {
    let spec = SrbmSpec::from_component(comp)?;
    simulate(&spec, horizon, steps, rng)
}

/// Reads one Brownian motion of the given variance on two clocks at once:
/// returns `(g_a * X(t_a / g_a^2), g_b * X(t_b / g_b^2))`, sampled exactly by
/// walking the two raw times in order. Each scaled read is a Brownian value
/// of variance `variance * t` on its own clock; their coupling shrinks as
/// the scales separate.
pub fn scaled_bm_pair<R: Rng + ?Sized>(
    variance: f64,
    g_a: f64,
    g_b: f64,
    t_a: f64,
    t_b: f64,
    rng: &mut R,
) -> (f64, f64) {
    assert!(variance > 0.0 && g_a > 0.0 && g_b > 0.0 && t_a > 0.0 && t_b > 0.0);
    let u_a = t_a / (g_a * g_a);
    let u_b = t_b / (g_b * g_b);
    let (first, second) = if u_a <= u_b { (u_a, u_b) } else { (u_b, u_a) };
    let sd = variance.sqrt();
    let n1: f64 = rng.sample(StandardNormal);
    let n2: f64 = rng.sample(StandardNormal);
    let x_first = sd * first.sqrt() * n1;
    let x_second = x_first + sd * (second - first).sqrt() * n2;
    if u_a <= u_b {
        (g_a * x_first, g_b * x_second)
    } else {
        (g_a * x_second, g_b * x_first)
    }
}
