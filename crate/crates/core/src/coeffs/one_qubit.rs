use super::{rk4_step, ChannelKernels, ExpKernel, ModelParams};
use crate::operators::{I, ZERO};
use crate::{tol, Error, Result, TimeGrid, C64};

/// `N(t) = ∫₀ᵗ α(t,s) n(t,s) ds` and `M(t) = ∫₀ᵗ β(t,s) m(t,s) ds` for one
/// qubit, tabulated on the stage grid.
#[derive(Clone, Debug, PartialEq)]
pub struct OneQubitCoeffs {
    grid: TimeGrid,
    omega_s: f64,
    kernels: ChannelKernels,
    n: Vec<C64>,
    m: Vec<C64>,
}

impl OneQubitCoeffs {
    pub fn solve(kernels: ChannelKernels, omega_s: f64, grid: TimeGrid) -> Result<Self> {
        Self::solve_with_ceiling(kernels, omega_s, grid, tol::POLE_CEILING)
    }

    /// With `α = A e^{λ(t−s)}` and `β = B e^{μ(t−s)}`:
    ///
    /// ```text
    /// N' = A(1 − iM) + (iω_s + λ)N + N²
    /// M' = −iB·N + (iω_s + μ)M + N·M
    /// ```
    pub fn solve_with_ceiling(kernels: ChannelKernels, omega_s: f64, grid: TimeGrid, ceiling: f64) -> Result<Self> {
        let a = ExpKernel::from(&kernels.z);
        let b = ExpKernel::from(&kernels.y);
        let iw = I * omega_s;
        let rhs = |v: &[C64; 2]| {
            let (n, m) = (v[0], v[1]);
            [
                (C64::from(1.0) - I * m) * a.amp + (iw + a.rate) * n + n * n,
                -I * b.amp * n + (iw + b.rate) * m + n * m,
            ]
        };
        let stages = grid.stage_grid();
        let h = stages.dt();
        let mut n = Vec::with_capacity(stages.len());
        let mut m = Vec::with_capacity(stages.len());
        let mut y = [ZERO; 2];
        n.push(y[0]);
        m.push(y[1]);
        for j in 1..stages.len() {
            y = rk4_step(&y, h, rhs);
            let t = stages.time(j);
            if !(y[0].is_finite() && y[1].is_finite()) {
                return Err(Error::NonFiniteValue(format!("N, M at t = {t}")));
            }
            if y[0].norm() > ceiling {
                return Err(Error::PoleEncountered {
                    t,
                    magnitude: y[0].norm(),
                });
            }
            n.push(y[0]);
            m.push(y[1]);
        }
        Ok(Self {
            grid,
            omega_s,
            kernels,
            n,
            m,
        })
    }

    pub(crate) fn from_tables(grid: TimeGrid, omega_s: f64, kernels: ChannelKernels, n: Vec<C64>, m: Vec<C64>) -> Self {
        Self {
            grid,
            omega_s,
            kernels,
            n,
            m,
        }
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn omega_s(&self) -> f64 {
        self.omega_s
    }

    pub fn kernels(&self) -> ChannelKernels {
        self.kernels
    }

    /// `N` at grid point `k`.
    pub fn n(&self, k: usize) -> C64 {
        self.n[2 * k]
    }

    pub fn m(&self, k: usize) -> C64 {
        self.m[2 * k]
    }

    /// `N` at stage-grid point `j` (grid point `j/2`).
    pub fn n_stage(&self, j: usize) -> C64 {
        self.n[j]
    }

    pub fn m_stage(&self, j: usize) -> C64 {
        self.m[j]
    }

    /// `N` on the output grid.
    pub fn n_values(&self) -> Vec<C64> {
        self.n.iter().step_by(2).copied().collect()
    }

    pub fn m_values(&self) -> Vec<C64> {
        self.m.iter().step_by(2).copied().collect()
    }

    pub(crate) fn stage_tables(&self) -> (&[C64], &[C64]) {
        (&self.n, &self.m)
    }
}

pub fn solve_one_qubit_coeffs(params: &ModelParams, grid: TimeGrid) -> Result<OneQubitCoeffs> {
    params.validate()?;
    if params.n_qubits != 1 {
        return Err(Error::InvalidArgument("one-qubit solver needs n_qubits = 1".into()));
    }
    OneQubitCoeffs::solve(params.kernels(), params.omega_s, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::CorrelationKernel;

    fn no_environment(g: f64, omega: f64) -> ChannelKernels {
        ChannelKernels {
            z: CorrelationKernel::single_mode(C64::from(g), omega),
            y: CorrelationKernel::Zero,
        }
    }

    #[test]
    fn zero_coupling_gives_zero_coefficients() {
        let p = ModelParams::one_qubit(1.0, 0.5, 0.0, 5.0);
        let c = solve_one_qubit_coeffs(&p, TimeGrid::new(5.0, 0.01).unwrap()).unwrap();
        assert!(c.n_values().iter().chain(&c.m_values()).all(|z| *z == ZERO));
    }

    #[test]
    fn empty_integrals_at_start() {
        let p = ModelParams::one_qubit(1.0, 0.5, 0.5, 5.0);
        let c = solve_one_qubit_coeffs(&p, TimeGrid::new(1.0, 0.01).unwrap()).unwrap();
        assert_eq!((c.n(0), c.m(0)), (ZERO, ZERO));
    }

    #[test]
    fn resonant_riccati_closed_form() {
        // dN/dt = |g|² + N² at resonance without environment: N = |g| tan(|g|t).
        let g = 0.5;
        let grid = TimeGrid::new(std::f64::consts::FRAC_PI_4 / g, std::f64::consts::FRAC_PI_4 / g / 400.0).unwrap();
        let c = OneQubitCoeffs::solve(no_environment(g, 1.0), 1.0, grid).unwrap();
        let last = c.n(grid.n_steps());
        assert!((last - C64::from(g)).norm() / g < 1e-6, "{last}");
        for k in 0..grid.len() {
            let exact = g * (g * grid.time(k)).tan();
            assert!((c.n(k) - exact).norm() <= 1e-6 * exact.max(1e-300) + 1e-15);
        }
    }

    #[test]
    fn pole_is_reported() {
        let g = 0.5;
        let grid = TimeGrid::new(4.0, 0.01).unwrap();
        match OneQubitCoeffs::solve(no_environment(g, 1.0), 1.0, grid) {
            Err(Error::PoleEncountered { t, .. }) => {
                assert!((t - std::f64::consts::PI).abs() < 0.05, "pole at {t}");
            }
            other => panic!("expected a pole, got {other:?}"),
        }
    }

    #[test]
    fn step_refinement_agrees() {
        let p = ModelParams::one_qubit(2.0, 1.0, 0.5, 5.0);
        let coarse = solve_one_qubit_coeffs(&p, TimeGrid::new(5.0, 0.01).unwrap()).unwrap();
        let fine = solve_one_qubit_coeffs(&p, TimeGrid::new(5.0, 0.001).unwrap()).unwrap();
        // Relative to the sup norm of each series; both start at zero.
        let scale = |v: &[C64]| v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let (sn, sm) = (scale(&fine.n_values()), scale(&fine.m_values()));
        for k in 0..coarse.grid().len() {
            let (a, b) = (coarse.n(k), fine.n(10 * k));
            assert!((a - b).norm() / sn < 1e-8, "N at k={k}: {a} vs {b}");
            let (a, b) = (coarse.m(k), fine.m(10 * k));
            assert!((a - b).norm() / sm < 1e-8, "M at k={k}: {a} vs {b}");
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let p = ModelParams::one_qubit(1.0, 0.5, 0.5, 5.0);
        let at = |dt: f64| {
            let c = solve_one_qubit_coeffs(&p, TimeGrid::new(4.0, dt).unwrap()).unwrap();
            c.n(c.grid().n_steps())
        };
        let (a, b, c) = (at(0.2), at(0.1), at(0.05));
        let ratio = (a - b).norm() / (b - c).norm();
        assert!((ratio - 16.0).abs() < 3.0, "ratio {ratio}");
    }

    #[test]
    fn rejects_two_qubit_params() {
        let p = ModelParams::two_qubit(1.0, 0.5, 0.5, 5.0, 1.0, 1.0);
        assert!(solve_one_qubit_coeffs(&p, TimeGrid::new(1.0, 0.1).unwrap()).is_err());
    }
}
