use serde::{Deserialize, Serialize};

use crate::{tol, Error, Result};

/// Uniform grid `t_k = k·dt`, `k = 0..=n_steps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_max: f64,
    dt: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidGrid(format!("dt must be positive, got {dt}")));
        }
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "t_max must be positive, got {t_max}"
            )));
        }
        let n = (t_max / dt).round();
        if n < 1.0 || (n * dt - t_max).abs() > tol::GRID * t_max.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "t_max = {t_max} is not an integer multiple of dt = {dt}"
            )));
        }
        Ok(Self {
            t_max,
            dt,
            n_steps: n as usize,
        })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of grid points, `n_steps + 1`.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.time(k))
    }

    /// Same span with the step divided by `factor`.
    pub fn refined(&self, factor: usize) -> TimeGrid {
        TimeGrid {
            t_max: self.t_max,
            dt: self.dt / factor as f64,
            n_steps: self.n_steps * factor,
        }
    }

    /// Half-step grid carrying the Runge-Kutta stage values: point `2k` is
    /// grid point `k`, point `2k + 1` its midpoint.
    pub fn stage_grid(&self) -> TimeGrid {
        self.refined(2)
    }

    /// Index of the grid point closest to `t`, clamped to the grid.
    pub fn index_of(&self, t: f64) -> usize {
        ((t / self.dt).round().max(0.0) as usize).min(self.n_steps)
    }
}
