//! Deterministic oracles.
//!
//! * [`solve_one_qubit_master`]: the exact one-qubit master equation driven by
//!   the solved `N(t)`.
//! * [`jc_population`]: vacuum Rabi oscillation.
//! * [`solve_lindblad_oracle`]: qubits ⊗ cavity (⊗ pseudomode) under a
//!   Lindblad equation. With [`Environment::MarkovCavity`] the cavity leaks at
//!   a fixed rate κ, the flat-memory limit of the detector layer. With
//!   [`Environment::Pseudomode`] an extra damped bosonic mode reproduces the
//!   Ornstein-Uhlenbeck memory exactly: a mode coupled with strength `√c` and
//!   damped at rate `2γ` exerts the correlation `c·e^{−γ|t−s|}` on whatever it
//!   couples to.
//!
//! The Lindblad solver works on the smallest set of product basis states that
//! contains the support of `ρ₀` and is closed under the Hamiltonian and the
//! jump operators. The density matrix never leaves that set, so the
//! restriction is exact; for the excitation-conserving models here it keeps
//! two-qubit problems to a few dozen states.

use std::collections::BTreeSet;

use crate::coeffs::{ModelParams, OneQubitCoeffs};
use crate::ensemble::DensityMatrixSeries;
use crate::operators::{
    annihilation, creation, number, on_qubit_a, on_qubit_b, sigma_minus, sigma_plus, sigma_z, tensor_product,
    ComplexMatrix, I, ZERO,
};
use crate::{tol, Error, Result, TimeGrid, C64};

fn check_state(rho: &ComplexMatrix, dim: usize) -> Result<()> {
    if rho.rows() != dim || rho.cols() != dim {
        return Err(Error::DimensionMismatch(format!(
            "initial density matrix is {}×{}, expected {dim}×{dim}",
            rho.rows(),
            rho.cols()
        )));
    }
    let defect = rho.hermiticity_defect();
    if defect > tol::HERMITIAN_INPUT {
        return Err(Error::NotHermitian(defect));
    }
    if (rho.trace() - 1.0).norm() > tol::NORMALIZATION {
        return Err(Error::InvalidArgument(format!("initial trace {} is not 1", rho.trace())));
    }
    Ok(())
}

fn deterministic_series(grid: TimeGrid, rho: Vec<ComplexMatrix>) -> DensityMatrixSeries {
    DensityMatrixSeries {
        grid,
        stderr: vec![0.0; rho.len()],
        rho,
        k: 0,
        rejected: 0,
        blocks: Vec::new(),
    }
}

/// `∂_tρ = −i[(ω_s/2)σ_z, ρ] + [σ₋, ρŌ†] − [σ₊, Ōρ]` with `Ō = N(t)σ₋`.
pub fn solve_one_qubit_master(
    params: &ModelParams,
    coeffs: &OneQubitCoeffs,
    rho0: &ComplexMatrix,
    grid: TimeGrid,
) -> Result<DensityMatrixSeries> {
    params.validate()?;
    if grid != coeffs.grid() {
        return Err(Error::GridMismatch("master-equation grid differs from the coefficient grid".into()));
    }
    check_state(rho0, 2)?;
    let (sm, sp) = (sigma_minus(), sigma_plus());
    let h = &sigma_z() * (0.5 * coeffs.omega_s());
    let rhs = |j: usize, r: &ComplexMatrix| {
        let o = &sm * coeffs.n_stage(j);
        let od = o.dagger();
        let unitary = &(&(&h * r) - &(r * &h)) * (-I);
        let gain = &(&sm * &(r * &od)) - &(&(r * &od) * &sm);
        let loss = &(&sp * &(&o * r)) - &(&(&o * r) * &sp);
        &(&unitary + &gain) - &loss
    };
    let h_step = grid.dt();
    let mut rho = rho0.clone();
    let mut out = Vec::with_capacity(grid.len());
    out.push(rho.clone());
    for k in 0..grid.n_steps() {
        let j = 2 * k;
        let k1 = rhs(j, &rho);
        let k2 = rhs(j + 1, &(&rho + &(&k1 * (h_step / 2.0))));
        let k3 = rhs(j + 1, &(&rho + &(&k2 * (h_step / 2.0))));
        let k4 = rhs(j + 2, &(&rho + &(&k3 * h_step)));
        rho = &rho + &(&(&(&k1 + &k4) + &(&(&k2 + &k3) * 2.0)) * (h_step / 6.0));
        if !rho.is_finite() {
            return Err(Error::NonFiniteValue(format!("master equation at t = {}", grid.time(k + 1))));
        }
        out.push(rho.clone());
    }
    Ok(deterministic_series(grid, out))
}

/// Excited population `cos²(|g|t)` of a resonant qubit exchanging one quantum
/// with a vacuum cavity.
pub fn jc_population(g: C64, t: f64) -> f64 {
    (g.norm() * t).cos().powi(2)
}

/// How the cavity loses energy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Environment {
    /// Cavity damped at rate `kappa`.
    MarkovCavity { kappa: f64 },
    /// Exact OU memory through one damped auxiliary mode.
    Pseudomode,
}

/// Qubits ⊗ cavity (⊗ pseudomode) with Lindblad damping.
#[derive(Clone, Debug)]
pub struct LindbladModel {
    pub params: ModelParams,
    pub environment: Environment,
    /// Fock levels kept per bosonic mode.
    pub fock_cutoff: usize,
}

/// Sparse operator as `(row, col, value)` triplets.
#[derive(Clone, Debug, Default)]
struct Sparse(Vec<(usize, usize, C64)>);

impl Sparse {
    fn from_dense(m: &ComplexMatrix) -> Self {
        let mut v = Vec::new();
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                if m[(i, j)] != ZERO {
                    v.push((i, j, m[(i, j)]));
                }
            }
        }
        Self(v)
    }

    fn restrict(&self, index: &[Option<usize>]) -> Self {
        Self(
            self.0
                .iter()
                .filter_map(|&(i, j, x)| Some((index[i]?, index[j]?, x)))
                .collect(),
        )
    }
}

impl LindbladModel {
    pub fn new(params: ModelParams, environment: Environment, fock_cutoff: usize) -> Result<Self> {
        params.validate()?;
        if fock_cutoff < 2 {
            return Err(Error::InvalidArgument("fock cutoff must be at least 2".into()));
        }
        if let Environment::MarkovCavity { kappa } = environment {
            if !(kappa.is_finite() && kappa >= 0.0) {
                return Err(Error::InvalidArgument("cavity damping must be non-negative".into()));
            }
        }
        Ok(Self {
            params,
            environment,
            fock_cutoff,
        })
    }

    /// Markov-limit model with the calibrated cavity damping `κ = 1`.
    pub fn markov(params: ModelParams, fock_cutoff: usize) -> Result<Self> {
        Self::new(params, Environment::MarkovCavity { kappa: 1.0 }, fock_cutoff)
    }

    pub fn with_cutoff(&self, fock_cutoff: usize) -> Self {
        Self {
            fock_cutoff,
            ..self.clone()
        }
    }

    pub fn system_dim(&self) -> usize {
        self.params.dim()
    }

    /// Dimensions of the bosonic modes after the qubits.
    pub fn mode_dims(&self) -> Vec<usize> {
        let n = self.fock_cutoff;
        match (self.environment, self.params.cut_probe) {
            (Environment::MarkovCavity { .. }, _) => vec![n],
            (Environment::Pseudomode, true) => vec![n],
            (Environment::Pseudomode, false) => vec![n, n],
        }
    }

    pub fn total_dim(&self) -> usize {
        self.system_dim() * self.mode_dims().iter().product::<usize>()
    }

    fn system_ops(&self) -> (ComplexMatrix, ComplexMatrix) {
        let p = &self.params;
        if p.n_qubits == 1 {
            (&sigma_z() * (0.5 * p.omega_s), sigma_minus())
        } else {
            let (sm, sz) = (sigma_minus(), sigma_z());
            (
                &(&on_qubit_a(&sz) * (0.5 * p.omega_a())) + &(&on_qubit_b(&sz) * (0.5 * p.omega_b())),
                &(&on_qubit_a(&sm) * p.kappa1) + &(&on_qubit_b(&sm) * p.kappa2),
            )
        }
    }

    /// Hamiltonian and damped jump operators `(rate, op)` on the full space.
    fn operators(&self) -> (ComplexMatrix, Vec<(f64, ComplexMatrix)>) {
        let p = &self.params;
        let n = self.fock_cutoff;
        let (hs, l) = self.system_ops();
        let ld = l.dagger();
        let (a, ad, num) = (annihilation(n), creation(n), number(n));
        let id_n = ComplexMatrix::identity(n);
        let id_s = ComplexMatrix::identity(self.system_dim());
        match (self.environment, p.cut_probe) {
            (Environment::MarkovCavity { kappa }, false) => {
                let h = &(&tensor_product(&hs, &id_n) + &(&tensor_product(&id_s, &num) * p.omega_cav))
                    + &(&(&tensor_product(&l, &ad) * p.g) + &(&tensor_product(&ld, &a) * p.g.conj()));
                (h, vec![(kappa, tensor_product(&id_s, &a))])
            }
            (Environment::MarkovCavity { kappa }, true) => {
                // Qubits damped straight into a flat bath.
                let h = tensor_product(&hs, &id_n);
                (h, vec![(kappa, tensor_product(&l, &id_n))])
            }
            (Environment::Pseudomode, false) => {
                let sys = |m: &ComplexMatrix| tensor_product(&tensor_product(m, &id_n), &id_n);
                let cav = |m: &ComplexMatrix| tensor_product(&id_s, m);
                let aux = |m: &ComplexMatrix| tensor_product(&tensor_product(&id_s, &id_n), m);
                let coupling = (0.5 * p.gamma).sqrt();
                let h = &(&(&sys(&hs) + &(&tensor_product(&cav(&num), &id_n) * p.omega_cav))
                    + &(&(&tensor_product(&tensor_product(&l, &ad), &id_n) * p.g)
                        + &(&tensor_product(&tensor_product(&ld, &a), &id_n) * p.g.conj())))
                    + &(&(&tensor_product(&cav(&a), &ad) + &tensor_product(&cav(&ad), &a)) * coupling);
                (h, vec![(2.0 * p.gamma, aux(&a))])
            }
            (Environment::Pseudomode, true) => {
                let c = p.detector_amplitude.unwrap_or(0.5 * p.gamma);
                let h = &tensor_product(&hs, &id_n)
                    + &(&(&tensor_product(&l, &ad) + &tensor_product(&ld, &a)) * c.sqrt());
                (h, vec![(2.0 * p.gamma, tensor_product(&id_s, &a))])
            }
        }
    }

    /// Full Hamiltonian on the product space.
    pub fn hamiltonian(&self) -> ComplexMatrix {
        self.operators().0
    }

    /// `ρ_sys ⊗ |0…0⟩⟨0…0|`.
    pub fn with_vacuum(&self, rho_sys: &ComplexMatrix) -> ComplexMatrix {
        let modes: usize = self.mode_dims().iter().product();
        let mut vac = ComplexMatrix::zeros(modes, modes);
        vac[(0, 0)] = C64::from(1.0);
        tensor_product(rho_sys, &vac)
    }
}

/// Lindblad evolution restricted to an invariant set of basis states.
#[derive(Clone, Debug)]
pub struct LindbladSolution {
    pub grid: TimeGrid,
    pub system_dim: usize,
    pub total_dim: usize,
    /// Full-space indices of the retained basis states, ascending.
    pub support: Vec<usize>,
    /// `ρ(t)` on the retained states.
    pub states: Vec<ComplexMatrix>,
}

impl LindbladSolution {
    /// `ρ(t_k)` on the full product space.
    pub fn full(&self, k: usize) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.total_dim, self.total_dim);
        let r = &self.states[k];
        for (a, &i) in self.support.iter().enumerate() {
            for (b, &j) in self.support.iter().enumerate() {
                m[(i, j)] = r[(a, b)];
            }
        }
        m
    }

    /// Qubit density matrix at `t_k`, tracing out all modes.
    pub fn system(&self, k: usize) -> ComplexMatrix {
        let modes = self.total_dim / self.system_dim;
        let mut out = ComplexMatrix::zeros(self.system_dim, self.system_dim);
        let r = &self.states[k];
        for (a, &i) in self.support.iter().enumerate() {
            for (b, &j) in self.support.iter().enumerate() {
                if i % modes == j % modes {
                    out[(i / modes, j / modes)] += r[(a, b)];
                }
            }
        }
        out
    }

    /// Qubit-only series, with zero error bars.
    pub fn system_series(&self) -> DensityMatrixSeries {
        deterministic_series(self.grid, (0..self.grid.len()).map(|k| self.system(k)).collect())
    }
}

/// Smallest index set containing `seed` and closed under the given operators.
fn closure(seed: BTreeSet<usize>, ops: &[&Sparse], dim: usize) -> Vec<usize> {
    let mut adj = vec![Vec::new(); dim];
    for op in ops {
        for &(i, j, _) in &op.0 {
            adj[j].push(i);
        }
    }
    let mut seen = seed.clone();
    let mut stack: Vec<usize> = seed.into_iter().collect();
    while let Some(j) = stack.pop() {
        for &i in &adj[j] {
            if seen.insert(i) {
                stack.push(i);
            }
        }
    }
    seen.into_iter().collect()
}

fn solve_fixed_cutoff(model: &LindbladModel, rho0: &ComplexMatrix, grid: TimeGrid) -> Result<LindbladSolution> {
    let dim = model.total_dim();
    check_state(rho0, dim)?;
    let (h, jumps) = model.operators();
    let h_sparse = Sparse::from_dense(&h);
    let jump_sparse: Vec<(f64, Sparse)> = jumps.iter().map(|(r, m)| (*r, Sparse::from_dense(m))).collect();
    let mut seed = BTreeSet::new();
    for i in 0..dim {
        for j in 0..dim {
            if rho0[(i, j)] != ZERO {
                seed.insert(i);
                seed.insert(j);
            }
        }
    }
    let mut ops: Vec<&Sparse> = vec![&h_sparse];
    ops.extend(jump_sparse.iter().map(|(_, s)| s));
    let support = closure(seed, &ops, dim);
    let mut index = vec![None; dim];
    for (a, &i) in support.iter().enumerate() {
        index[i] = Some(a);
    }
    let s = support.len();

    // H_eff = H − (i/2)Σ r L†L; dρ = −i(H_eff ρ − ρ H_eff†) + Σ r LρL†.
    let jumps: Vec<(f64, Sparse)> = jump_sparse.iter().map(|(r, l)| (*r, l.restrict(&index))).collect();
    let mut h_eff = h_sparse.restrict(&index);
    for (r, l) in &jumps {
        for &(i, k, x) in &l.0 {
            for &(i2, m, y) in &l.0 {
                if i == i2 {
                    h_eff.0.push((k, m, x.conj() * y * (-0.5 * r * I)));
                }
            }
        }
    }

    let rhs = |rho: &[C64]| -> Vec<C64> {
        let mut out = vec![ZERO; s * s];
        for &(i, k, x) in &h_eff.0 {
            // −i H ρ: row i gains x·ρ[k, :]
            let f = -I * x;
            for j in 0..s {
                out[i * s + j] += f * rho[k * s + j];
            }
            // +i ρ H†: column i gains conj(x)·ρ[:, k]
            let g = I * x.conj();
            for r in 0..s {
                out[r * s + i] += g * rho[r * s + k];
            }
        }
        for (rate, l) in &jumps {
            for &(i, k, x) in &l.0 {
                for &(j, m, y) in &l.0 {
                    out[i * s + j] += x * y.conj() * rho[k * s + m] * *rate;
                }
            }
        }
        out
    };

    let mut rho: Vec<C64> = support
        .iter()
        .flat_map(|&i| support.iter().map(move |&j| (i, j)))
        .map(|(i, j)| rho0[(i, j)])
        .collect();
    let row_bound = (0..s)
        .map(|i| h_eff.0.iter().filter(|e| e.0 == i).map(|e| e.2.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let substeps = ((2.0 * row_bound * grid.dt()) / 0.5).ceil().max(1.0) as usize;
    let h_step = grid.dt() / substeps as f64;
    let axpy = |x: &[C64], k: &[C64], a: f64| -> Vec<C64> { x.iter().zip(k).map(|(x, k)| x + k * a).collect() };
    let as_matrix = |v: &[C64]| ComplexMatrix::from_vec(s, s, v.to_vec()).expect("s×s");
    let mut states = Vec::with_capacity(grid.len());
    states.push(as_matrix(&rho));
    for k in 0..grid.n_steps() {
        for _ in 0..substeps {
            let k1 = rhs(&rho);
            let k2 = rhs(&axpy(&rho, &k1, h_step / 2.0));
            let k3 = rhs(&axpy(&rho, &k2, h_step / 2.0));
            let k4 = rhs(&axpy(&rho, &k3, h_step));
            for i in 0..rho.len() {
                rho[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h_step / 6.0);
            }
        }
        if rho.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteValue(format!("Lindblad state at t = {}", grid.time(k + 1))));
        }
        states.push(as_matrix(&rho));
    }
    Ok(LindbladSolution {
        grid,
        system_dim: model.system_dim(),
        total_dim: dim,
        support,
        states,
    })
}

/// Re-indexes a product-space matrix from cutoff `from` to cutoff `to`.
/// `None` if it populates levels that do not exist at `to`.
fn recut(rho: &ComplexMatrix, sys: usize, modes: usize, from: usize, to: usize) -> Option<ComplexMatrix> {
    let map = |i: usize| -> Option<usize> {
        let (s, mut rest) = (i / from.pow(modes as u32), i % from.pow(modes as u32));
        let mut out = 0;
        for m in (0..modes).rev() {
            let p = from.pow(m as u32);
            let level = rest / p;
            rest %= p;
            if level >= to {
                return None;
            }
            out += level * to.pow(m as u32);
        }
        Some(s * to.pow(modes as u32) + out)
    };
    let dim_to = sys * to.pow(modes as u32);
    let mut out = ComplexMatrix::zeros(dim_to, dim_to);
    for i in 0..rho.rows() {
        for j in 0..rho.cols() {
            if rho[(i, j)] != ZERO {
                out[(map(i)?, map(j)?)] = rho[(i, j)];
            }
        }
    }
    Some(out)
}

/// Solves at the model's cutoff and at twice that, and fails unless the qubit
/// density matrices agree within the convergence threshold.
pub fn solve_lindblad_oracle(model: &LindbladModel, rho0: &ComplexMatrix, grid: TimeGrid) -> Result<LindbladSolution> {
    let base = solve_fixed_cutoff(model, rho0, grid)?;
    let n = model.fock_cutoff;
    let modes = model.mode_dims().len();
    let doubled = model.with_cutoff(2 * n);
    let rho_big = recut(rho0, model.system_dim(), modes, n, 2 * n).expect("larger cutoff holds every level");
    let check = solve_fixed_cutoff(&doubled, &rho_big, grid)?;
    let deviation = (0..grid.len())
        .map(|k| base.system(k).max_abs_diff(&check.system(k)))
        .fold(0.0, f64::max);
    if deviation > tol::CUTOFF_CONVERGENCE {
        return Err(Error::CutoffNotConverged { cutoff: n, deviation });
    }
    Ok(base)
}
