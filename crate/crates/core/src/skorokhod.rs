//! Reflection engine: maps free paths to nonnegative reflected paths and
//! their regulators on a discrete time grid.
//!
//! The reflected pair `(z, y)` of a path `x` with reflection matrix `R`
//! satisfies `z = x + R y >= 0` with `y` nondecreasing from zero, `y_j`
//! growing only while `z_j = 0`. In one dimension the regulator is the
//! running maximum of `(-x)^+` in closed form; in higher dimensions it is the
//! smallest fixed point of the coordinatewise running-max map, found by
//! monotone iteration from zero (the reflection matrix is normalized to a
//! unit diagonal internally, which rescales regulators but not the problem).

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linalg;

/// Iteration tolerance on the sup-norm change of the (diagonally normalized)
/// regulator between sweeps.
pub const REFLECT_TOL: f64 = 1e-10;
/// Sweep budget for the fixed-point iteration.
pub const REFLECT_MAX_ITER: usize = 10_000;

#[derive(Debug, Error)]
pub enum SkorokhodError {
    #[error("path must start in the nonnegative orthant; coordinate {coord} starts at {value}")]
    NegativeStart { coord: usize, value: f64 },
    #[error("reflection fixed point did not converge within {iterations} sweeps")]
    NoConvergence { iterations: usize },
    #[error("reflection matrix is not an M-matrix")]
    BadReflection,
    #[error("path grid is malformed: {0}")]
    BadGrid(String),
}

/// Piecewise-constant vector path on a shared time grid, stored
/// coordinate-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PathGrid {
    times: Vec<f64>,
    coords: Vec<Vec<f64>>,
}

impl PathGrid {
    pub fn new(times: Vec<f64>, coords: Vec<Vec<f64>>) -> Result<Self, SkorokhodError> {
        if coords.is_empty() {
            return Err(SkorokhodError::BadGrid("path needs a coordinate".into()));
        }
        if coords.iter().any(|c| c.len() != times.len()) {
            return Err(SkorokhodError::BadGrid(
                "coordinate length differs from time grid".into(),
            ));
        }
        if times.is_empty() {
            return Err(SkorokhodError::BadGrid("empty time grid".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SkorokhodError::BadGrid(
                "times must increase strictly".into(),
            ));
        }
        Ok(Self { times, coords })
    }

    /// Uniform grid `0, step, ..., steps * step` with zeroed coordinates.
    pub fn zeros(dim: usize, step: f64, steps: usize) -> Self {
        Self {
            times: (0..=steps).map(|n| n as f64 * step).collect(),
            coords: vec![vec![0.0; steps + 1]; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn coord(&self, j: usize) -> &[f64] {
        &self.coords[j]
    }

    pub fn coord_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.coords[j]
    }

    pub fn value(&self, j: usize, n: usize) -> f64 {
        self.coords[j][n]
    }

    /// Largest absolute value of coordinate `j`.
    pub fn sup_abs(&self, j: usize) -> f64 {
        self.coords[j].iter().fold(0.0, |m, &v| m.max(v.abs()))
    }

    /// Index of `t` in the grid, accepting relative rounding of `1e-9`.
    pub fn find_time(&self, t: f64) -> Option<usize> {
        let idx = self
            .times
            .partition_point(|&s| s < t - 1e-9 * t.abs().max(1.0));
        if idx < self.times.len()
            && (self.times[idx] - t).abs() <= 1e-9 * t.abs().max(1.0)
        {
            Some(idx)
        } else {
            None
        }
    }
}

/// Reflected path, its regulator, and solver diagnostics.
#[derive(Clone, Debug)]
pub struct Reflection {
    pub z: PathGrid,
    pub y: PathGrid,
    /// Worst discrete complementarity sum `sum_n z_j(t_n) dy_j(t_n)` over
    /// coordinates; near zero when regulators only grow on the boundary.
    pub complementarity: f64,
    /// Fixed-point sweeps used (1 for the closed-form scalar case).
    pub iterations: usize,
}

/// Closed-form scalar reflection: `y(t) = max(0, max_{s<=t} -x(s))`,
/// `z = x + y`.
pub fn reflect_1d(x: &[f64]) -> Result<(Vec<f64>, Vec<f64>), SkorokhodError> {
    if x.is_empty() {
        return Err(SkorokhodError::BadGrid("empty path".into()));
    }
    if x[0] < 0.0 {
        return Err(SkorokhodError::NegativeStart {
            coord: 0,
            value: x[0],
        });
    }
    let mut z = vec![0.0; x.len()];
    let mut y = vec![0.0; x.len()];
    let mut running = 0.0f64;
    for (n, &v) in x.iter().enumerate() {
        running = running.max(-v);
        y[n] = running;
        z[n] = v + running;
    }
    Ok((z, y))
}

/// Largest absolute row sum of the reflection matrix: a Lipschitz constant of
/// the reflection and regulator maps in the sup norm.
pub fn kappa(r: &DMatrix<f64>) -> f64 {
    linalg::inf_norm(r)
}

/// Multidimensional reflection by monotone fixed-point iteration.
///
/// Sweeps update every coordinate's regulator from the running maximum of its
/// own deficit given the other coordinates' previous regulators, and stop
/// when the largest pointwise change falls below `tol`.
pub fn reflect_md(
    x: &PathGrid,
    r: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<Reflection, SkorokhodError> {
    let d = x.dim();
    let n = x.len();
    if r.nrows() != d || r.ncols() != d {
        return Err(SkorokhodError::BadGrid(format!(
            "reflection is {}x{}, path has {d} coordinates",
            r.nrows(),
            r.ncols()
        )));
    }
    for j in 0..d {
        let v = x.value(j, 0);
        if v < 0.0 {
            return Err(SkorokhodError::NegativeStart { coord: j, value: v });
        }
    }
    if !linalg::is_m_matrix(r, 1e-9) {
        return Err(SkorokhodError::BadReflection);
    }
    // Column-normalize to a unit diagonal: R y = (R D^{-1})(D y).
    let rt: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| r[(i, j)] / r[(j, j)]).collect())
        .collect();
    let mut y = vec![vec![0.0f64; n]; d];
    let mut y_next = vec![vec![0.0f64; n]; d];
    let mut iterations = 0;
    loop {
        iterations += 1;
        if iterations > max_iter {
            return Err(SkorokhodError::NoConvergence {
                iterations: max_iter,
            });
        }
        let mut delta = 0.0f64;
        for j in 0..d {
            let xj = x.coord(j);
            let row = &rt[j];
            let mut running = 0.0f64;
            for t in 0..n {
                let mut deficit = -xj[t];
                for (k, yk) in y.iter().enumerate() {
                    if k != j {
                        deficit -= row[k] * yk[t];
                    }
                }
                running = running.max(deficit);
                y_next[j][t] = running;
                delta = delta.max((running - y[j][t]).abs());
            }
        }
        std::mem::swap(&mut y, &mut y_next);
        if delta <= tol {
            break;
        }
    }
    // Assemble z = x + R y (in normalized terms) and rescale the regulator.
    let mut z_coords = vec![vec![0.0f64; n]; d];
    let mut complementarity = 0.0f64;
    for j in 0..d {
        let xj = x.coord(j);
        let row = &rt[j];
        for t in 0..n {
            let mut v = xj[t];
            for (k, yk) in y.iter().enumerate() {
                v += row[k] * yk[t];
            }
            z_coords[j][t] = v;
        }
        let mut slack_sum = 0.0f64;
        let mut prev = 0.0f64;
        for t in 0..n {
            slack_sum += z_coords[j][t] * (y[j][t] - prev);
            prev = y[j][t];
        }
        complementarity = complementarity.max(slack_sum.abs());
    }
    let y_coords: Vec<Vec<f64>> = y
        .into_iter()
        .enumerate()
        .map(|(j, col)| col.into_iter().map(|v| v / r[(j, j)]).collect())
        .collect();
    Ok(Reflection {
        z: PathGrid::new(x.times().to_vec(), z_coords)?,
        y: PathGrid::new(x.times().to_vec(), y_coords)?,
        complementarity,
        iterations,
    })
}

/// Families of deterministic driving paths used to exercise the two
/// degeneration mechanisms of the reflection map under scale separation.
pub mod lemma {
    use super::{reflect_1d, PathGrid, SkorokhodError};

    /// Which degeneration a scenario exercises.
    #[derive(Clone, Copy, Debug, PartialEq, Eq)]
    pub enum ScenarioKind {
        /// `z = reflect(u - v - m(r) t)`: an ever stronger downward drift
        /// squashes the reflected path itself.
        VanishingReflected,
        /// `y = regulator of (u - v + a(r)) / c`: an ever larger headroom
        /// offset keeps the regulator dormant.
        DormantRegulator,
    }

    /// Deterministic scenario: bounded path `u`, nondecreasing drain `v`,
    /// scale-dependent coefficient (drift slope or offset), and for the
    /// regulator form a positive reflection scalar `c`.
    pub struct Scenario {
        pub kind: ScenarioKind,
        pub u: Box<dyn Fn(f64) -> f64>,
        pub v: Box<dyn Fn(f64) -> f64>,
        /// Drift slope `m(r)` or offset `a(r)`, diverging as `r` shrinks.
        pub coefficient: Box<dyn Fn(f64) -> f64>,
        pub reflection_scale: f64,
        pub horizon: f64,
        pub steps: usize,
    }

    /// Sup norms of the degenerate object along the scale grid.
    #[derive(Clone, Debug)]
    pub struct Sweep {
        pub r_grid: Vec<f64>,
        pub sup_norms: Vec<f64>,
        /// Nonincreasing along the grid and small at the end.
        pub vanishing: bool,
    }

    /// Evaluates the scenario on each scale and reports whether the sup norm
    /// decreases monotonically toward zero.
    pub fn check_paths(s: &Scenario, r_grid: &[f64]) -> Result<Sweep, SkorokhodError> {
        assert!(r_grid.windows(2).all(|w| w[1] < w[0]), "grid must decrease");
        let mut sup_norms = Vec::with_capacity(r_grid.len());
        for &r in r_grid {
            let coeff = (s.coefficient)(r);
            let grid = PathGrid::zeros(1, s.horizon / s.steps as f64, s.steps);
            let x: Vec<f64> = grid
                .times()
                .iter()
                .map(|&t| match s.kind {
                    ScenarioKind::VanishingReflected => (s.u)(t) - (s.v)(t) - coeff * t,
                    ScenarioKind::DormantRegulator => {
                        ((s.u)(t) - (s.v)(t) + coeff) / s.reflection_scale
                    }
                })
                .collect();
            let sup = match s.kind {
                ScenarioKind::VanishingReflected => {
                    let (z, _) = reflect_1d(&x)?;
                    z.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
                }
                ScenarioKind::DormantRegulator => {
                    let (_, y) = reflect_1d(&x)?;
                    y.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
                }
            };
            sup_norms.push(sup);
        }
        let monotone = sup_norms.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        let first = sup_norms.first().copied().unwrap_or(0.0);
        let last = sup_norms.last().copied().unwrap_or(0.0);
        let vanishing = monotone && last <= (0.2 * first).max(1e-10);
        Ok(Sweep {
            r_grid: r_grid.to_vec(),
            sup_norms,
            vanishing,
        })
    }
}
