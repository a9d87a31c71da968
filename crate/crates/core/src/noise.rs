//! Correlation kernels and exact samplers for the two complex Gaussian noises.
//!
//! Noise paths store the conjugated process (`z*_t`, `y*_t`), which is what
//! enters the trajectory equation. Statistics follow `M[z_t z*_s] = α(t,s)`
//! and `M[z_t z_s] = 0`.

use std::f64::consts::FRAC_1_SQRT_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::operators::{I, ZERO};
use crate::{tol, Error, Result, TimeGrid, C64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorrelationKernel {
    /// `α(t,s) = |g|² e^{−iω(t−s)}`.
    SingleMode { coupling: C64, frequency: f64 },
    /// `β(t,s) = c e^{−γ|t−s|}`.
    OrnsteinUhlenbeck { amplitude: f64, rate: f64 },
    Zero,
}

impl CorrelationKernel {
    pub fn single_mode(coupling: C64, frequency: f64) -> Self {
        Self::SingleMode {
            coupling,
            frequency,
        }
    }

    pub fn ornstein_uhlenbeck(amplitude: f64, rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidArgument(format!("OU rate must be positive, got {rate}")));
        }
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "OU amplitude must be non-negative, got {amplitude}"
            )));
        }
        Ok(Self::OrnsteinUhlenbeck { amplitude, rate })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::SingleMode { .. } => "single-mode",
            Self::OrnsteinUhlenbeck { .. } => "Ornstein-Uhlenbeck",
            Self::Zero => "zero",
        }
    }

    pub fn value(&self, t: f64, s: f64) -> C64 {
        match *self {
            Self::SingleMode {
                coupling,
                frequency,
            } => {
                let (sin, cos) = (frequency * (t - s)).sin_cos();
                C64::new(cos, -sin) * coupling.norm_sqr()
            }
            Self::OrnsteinUhlenbeck { amplitude, rate } => {
                C64::from(amplitude * (-rate * (t - s).abs()).exp())
            }
            Self::Zero => ZERO,
        }
    }

    /// `k(t,t)`.
    pub fn equal_time(&self) -> f64 {
        match *self {
            Self::SingleMode { coupling, .. } => coupling.norm_sqr(),
            Self::OrnsteinUhlenbeck { amplitude, .. } => amplitude,
            Self::Zero => 0.0,
        }
    }

    /// `λ` such that `k(t,s) = k(t,t)·e^{λ(t−s)}` for `t ≥ s`.
    pub fn exponent(&self) -> C64 {
        match *self {
            Self::SingleMode { frequency, .. } => -I * frequency,
            Self::OrnsteinUhlenbeck { rate, .. } => C64::from(-rate),
            Self::Zero => ZERO,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.equal_time() == 0.0
    }
}

pub fn kernel_value(kernel: &CorrelationKernel, t: f64, s: f64) -> C64 {
    kernel.value(t, s)
}

/// One sampled path of `z*_t` (or `y*_t`) on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseRealization {
    pub grid: TimeGrid,
    pub values: Vec<C64>,
    pub seed: u64,
}

impl NoiseRealization {
    pub fn zeros(grid: TimeGrid, seed: u64) -> Self {
        Self {
            grid,
            values: vec![ZERO; grid.len()],
            seed,
        }
    }
}

fn complex_gaussian(rng: &mut impl Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * FRAC_1_SQRT_2
}

/// Single-mode path `z*_t = −i g z* e^{iωt}` from one standard complex
/// Gaussian `z` with `E|z|² = 1`.
pub fn sample_cavity_noise(kernel: &CorrelationKernel, grid: TimeGrid, seed: u64) -> Result<NoiseRealization> {
    let CorrelationKernel::SingleMode {
        coupling,
        frequency,
    } = *kernel
    else {
        return Err(Error::WrongKernel {
            expected: "single-mode",
            found: kernel.name(),
        });
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp = -I * coupling * complex_gaussian(&mut rng).conj();
    let values = grid
        .times()
        .map(|t| {
            let (sin, cos) = (frequency * t).sin_cos();
            amp * C64::new(cos, sin)
        })
        .collect();
    Ok(NoiseRealization { grid, values, seed })
}

/// Stationary complex OU path by the exact AR(1) recursion.
pub fn sample_ou_noise(kernel: &CorrelationKernel, grid: TimeGrid, seed: u64) -> Result<NoiseRealization> {
    let CorrelationKernel::OrnsteinUhlenbeck { amplitude, rate } = *kernel else {
        return Err(Error::WrongKernel {
            expected: "Ornstein-Uhlenbeck",
            found: kernel.name(),
        });
    };
    let step = rate * grid.dt();
    if step > tol::MAX_RATE_STEP {
        return Err(Error::GridTooCoarse(step));
    }
    if amplitude == 0.0 {
        return Ok(NoiseRealization::zeros(grid, seed));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let decay = (-step).exp();
    let kick = (-amplitude * (-2.0 * step).exp_m1()).sqrt();
    let mut y = complex_gaussian(&mut rng) * amplitude.sqrt();
    let mut values = Vec::with_capacity(grid.len());
    values.push(y);
    for _ in 0..grid.n_steps() {
        y = y * decay + complex_gaussian(&mut rng) * kick;
        values.push(y);
    }
    Ok(NoiseRealization { grid, values, seed })
}

/// Dispatches on the kernel kind; a zero kernel gives the zero path.
pub fn sample_noise(kernel: &CorrelationKernel, grid: TimeGrid, seed: u64) -> Result<NoiseRealization> {
    match kernel {
        CorrelationKernel::SingleMode { .. } => sample_cavity_noise(kernel, grid, seed),
        CorrelationKernel::OrnsteinUhlenbeck { .. } => sample_ou_noise(kernel, grid, seed),
        CorrelationKernel::Zero => Ok(NoiseRealization::zeros(grid, seed)),
    }
}

/// Sample mean and standard error of `z_{t_i} z*_{t_j}` across paths, an
/// estimate of `kernel_value(t_i, t_j)`.
pub fn empirical_correlation(paths: &[NoiseRealization], i: usize, j: usize) -> Result<(C64, f64)> {
    moment(paths, i, j, |a, b| a.conj() * b)
}

/// Sample mean and standard error of the non-conjugated `z*_{t_i} z*_{t_j}`.
pub fn empirical_plain_moment(paths: &[NoiseRealization], i: usize, j: usize) -> Result<(C64, f64)> {
    moment(paths, i, j, |a, b| a * b)
}

fn moment(paths: &[NoiseRealization], i: usize, j: usize, f: impl Fn(C64, C64) -> C64) -> Result<(C64, f64)> {
    if paths.len() < 2 {
        return Err(Error::InvalidArgument("need at least two paths".into()));
    }
    let grid = paths[0].grid;
    if paths.iter().any(|p| p.grid != grid) {
        return Err(Error::GridMismatch("noise paths live on different grids".into()));
    }
    if i >= grid.len() || j >= grid.len() {
        return Err(Error::InvalidArgument(format!("index out of range for {} points", grid.len())));
    }
    let k = paths.len() as f64;
    let samples: Vec<C64> = paths.iter().map(|p| f(p.values[i], p.values[j])).collect();
    let mean = samples.iter().sum::<C64>() / k;
    let var = samples.iter().map(|x| (x - mean).norm_sqr()).sum::<f64>() / (k - 1.0);
    Ok((mean, (var / k).sqrt()))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of stream `stream` (0 for z, 1 for y) of trajectory `index`. Depends
/// only on its arguments, so any worker can rebuild any trajectory.
pub fn stream_seed(master: u64, index: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(index)).wrapping_add(stream))
}
