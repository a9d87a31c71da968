//! Deterministic coefficient functions of the two O operators.
//!
//! Both channels have exponential kernels `k(t,s) = A·e^{λ(t−s)}`, so every
//! convolution `∫₀ᵗ k(t,s) f(t,s) ds` obeys a closed ODE in `t` and the
//! single-time integrated coefficients are marched directly. The stored tables
//! live on the half-step stage grid so the trajectory integrator reads exact
//! values at every Runge-Kutta stage.

mod dump;
mod one_qubit;
mod two_qubit;

pub use dump::{read_coeffs, write_coeffs, DUMP_MAGIC, DUMP_VERSION};
pub use one_qubit::{solve_one_qubit_coeffs, OneQubitCoeffs};
pub use two_qubit::{
    direct_coupling_coeffs, solve_two_qubit_coeffs, Boundary, SliceMarcher, TwoQubitCoeffs, TwoTimeTable,
};

use serde::{Deserialize, Serialize};

use crate::noise::CorrelationKernel;
use crate::{Error, Result, TimeGrid, C64};

/// Physical parameters of the qubit-cavity-detector chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Qubit (or qubit A) frequency.
    pub omega_s: f64,
    /// Qubit B frequency; `None` means equal to `omega_s`.
    pub omega_b: Option<f64>,
    /// Cavity frequency.
    pub omega_cav: f64,
    /// Qubit-cavity coupling.
    pub g: C64,
    /// Decay rate of the detector environment; 0 removes that layer.
    pub gamma: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub n_qubits: usize,
    /// Couple the qubits straight to the detector, without the cavity.
    pub cut_probe: bool,
    /// Amplitude of the direct-coupling detector kernel; `None` means `γ/2`,
    /// the value whose time integral matches the probe's second layer.
    pub detector_amplitude: Option<f64>,
}

impl ModelParams {
    pub fn one_qubit(omega_s: f64, omega_cav: f64, g: f64, gamma: f64) -> Self {
        Self {
            omega_s,
            omega_b: None,
            omega_cav,
            g: C64::from(g),
            gamma,
            kappa1: 1.0,
            kappa2: 0.0,
            n_qubits: 1,
            cut_probe: false,
            detector_amplitude: None,
        }
    }

    pub fn two_qubit(omega_s: f64, omega_cav: f64, g: f64, gamma: f64, kappa1: f64, kappa2: f64) -> Self {
        Self {
            kappa1,
            kappa2,
            n_qubits: 2,
            ..Self::one_qubit(omega_s, omega_cav, g, gamma)
        }
    }

    /// The same model with the cavity removed.
    pub fn direct(&self) -> Self {
        Self {
            cut_probe: true,
            ..self.clone()
        }
    }

    pub fn omega_a(&self) -> f64 {
        self.omega_s
    }

    pub fn omega_b(&self) -> f64 {
        self.omega_b.unwrap_or(self.omega_s)
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.omega_s, self.omega_b(), self.omega_cav, self.g.re, self.g.im, self.gamma, self.kappa1, self.kappa2]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidArgument("model parameters must be finite".into()));
        }
        if self.n_qubits != 1 && self.n_qubits != 2 {
            return Err(Error::InvalidArgument(format!("n_qubits must be 1 or 2, got {}", self.n_qubits)));
        }
        if self.gamma < 0.0 {
            return Err(Error::InvalidArgument("gamma must be non-negative".into()));
        }
        if let Some(c) = self.detector_amplitude {
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::InvalidArgument("detector_amplitude must be non-negative".into()));
            }
        }
        Ok(())
    }

    pub fn probe_kernel(&self) -> CorrelationKernel {
        CorrelationKernel::single_mode(self.g, self.omega_cav)
    }

    /// `β(t,s) = γ/(2|g|²)·e^{−γ|t−s|}`; zero when `γ = 0` or `g = 0`.
    pub fn environment_kernel(&self) -> CorrelationKernel {
        let g2 = self.g.norm_sqr();
        if self.gamma > 0.0 && g2 > 0.0 {
            CorrelationKernel::OrnsteinUhlenbeck {
                amplitude: self.gamma / (2.0 * g2),
                rate: self.gamma,
            }
        } else {
            CorrelationKernel::Zero
        }
    }

    pub fn detector_kernel(&self) -> CorrelationKernel {
        if self.gamma > 0.0 {
            CorrelationKernel::OrnsteinUhlenbeck {
                amplitude: self.detector_amplitude.unwrap_or(self.gamma / 2.0),
                rate: self.gamma,
            }
        } else {
            CorrelationKernel::Zero
        }
    }

    pub fn kernels(&self) -> ChannelKernels {
        if self.cut_probe {
            ChannelKernels {
                z: self.detector_kernel(),
                y: CorrelationKernel::Zero,
            }
        } else {
            ChannelKernels {
                z: self.probe_kernel(),
                y: self.environment_kernel(),
            }
        }
    }
}

/// Kernels of the `z` (first) and `y` (second) noise channels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelKernels {
    pub z: CorrelationKernel,
    pub y: CorrelationKernel,
}

/// `k(t,s) = amp·e^{rate·(t−s)}` for `t ≥ s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct ExpKernel {
    pub amp: f64,
    pub rate: C64,
}

impl From<&CorrelationKernel> for ExpKernel {
    fn from(k: &CorrelationKernel) -> Self {
        Self {
            amp: k.equal_time(),
            rate: k.exponent(),
        }
    }
}

/// Solved coefficients for either model size.
#[derive(Clone, Debug)]
pub enum Coefficients {
    One(OneQubitCoeffs),
    Two(TwoQubitCoeffs),
}

impl Coefficients {
    pub fn grid(&self) -> TimeGrid {
        match self {
            Self::One(c) => c.grid(),
            Self::Two(c) => c.grid(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::One(_) => 2,
            Self::Two(_) => 4,
        }
    }
}

/// Solves the coefficients `params` call for: probe or direct coupling,
/// one or two qubits.
pub fn solve_coeffs(params: &ModelParams, grid: TimeGrid) -> Result<Coefficients> {
    params.validate()?;
    let kernels = params.kernels();
    Ok(match params.n_qubits {
        1 => Coefficients::One(OneQubitCoeffs::solve(kernels, params.omega_s, grid)?),
        _ => Coefficients::Two(TwoQubitCoeffs::solve(params, kernels, grid)?),
    })
}

/// Classical fourth-order Runge-Kutta step for an autonomous system.
pub(crate) fn rk4_step<const D: usize>(y: &[C64; D], h: f64, f: impl Fn(&[C64; D]) -> [C64; D]) -> [C64; D] {
    let shift = |base: &[C64; D], k: &[C64; D], a: f64| -> [C64; D] {
        std::array::from_fn(|i| base[i] + k[i] * a)
    };
    let k1 = f(y);
    let k2 = f(&shift(y, &k1, h / 2.0));
    let k3 = f(&shift(y, &k2, h / 2.0));
    let k4 = f(&shift(y, &k3, h));
    std::array::from_fn(|i| y[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0))
}
