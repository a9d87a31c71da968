//! Linear QSD trajectories `∂_tψ = G(t)ψ`, with
//! `G = −iH_s + L z*_t − (L† + i y*_t) Ō_z − i z*_t Ō_y`.
//!
//! The deterministic parts of `Ō_z`, `Ō_y` come from the coefficient tables.
//! For two qubits both also carry an `O₅ = σ₋^A σ₋^B` term that is a
//! functional of the noise history:
//!
//! ```text
//! Z(t) = i∫₀ᵗ [N₅(t,s′) z*_{s′} + N₆(t,s′) y*_{s′}] ds′
//! Y(t) = i∫₀ᵗ [M₅(t,s′) z*_{s′} + M₆(t,s′) y*_{s′}] ds′
//! ```
//!
//! Because `N₅, …, M₆` obey linear ODEs in `t`, so do `Z` and `Y`; they are
//! integrated alongside `ψ` instead of re-running the quadrature each step.

use std::sync::Arc;

use crate::coeffs::{Coefficients, ModelParams};
use crate::noise::NoiseRealization;
use crate::operators::{on_qubit_a, on_qubit_b, sigma_minus, sigma_z, ComplexMatrix, ComplexVector, I, ZERO};
use crate::{tol, Error, Result, TimeGrid, C64};

const MAX_STATE: usize = 6;
type State = [C64; MAX_STATE];

/// Noise-independent pieces of the generator on the stage grid, shared by
/// every trajectory of an ensemble.
#[derive(Clone, Debug)]
pub struct GeneratorTables {
    grid: TimeGrid,
    dim: usize,
    /// `−iH_s − L†Ō_z`, `L − iŌ_y` and `−iŌ_z` per stage, row-major.
    det: Vec<C64>,
    zc: Vec<C64>,
    yc: Vec<C64>,
    aux: Option<AuxTables>,
}

#[derive(Clone, Debug)]
struct AuxTables {
    /// `L†O₅` and `O₅`.
    k5: ComplexMatrix,
    o5: ComplexMatrix,
    /// Per stage: `[Z←Z, Z←Y, Y←Y, Y←Z]` rates and `[N₅, N₆, M₅, M₆](t,t)`.
    rates: Vec<[C64; 4]>,
    sources: Vec<[C64; 4]>,
}

/// The two-qubit coefficient operators `O₁..O₄` and `O₅`.
fn two_qubit_ops() -> ([ComplexMatrix; 4], ComplexMatrix) {
    let (sm, sz) = (sigma_minus(), sigma_z());
    let (am, bm) = (on_qubit_a(&sm), on_qubit_b(&sm));
    let (az, bz) = (on_qubit_a(&sz), on_qubit_b(&sz));
    (
        [am.clone(), bm.clone(), &az * &bm, &am * &bz],
        &am * &bm,
    )
}

impl GeneratorTables {
    pub fn new(params: &ModelParams, coeffs: &Coefficients) -> Result<Self> {
        params.validate()?;
        if params.dim() != coeffs.dim() {
            return Err(Error::DimensionMismatch(format!(
                "model has dimension {}, coefficients {}",
                params.dim(),
                coeffs.dim()
            )));
        }
        let grid = coeffs.grid();
        let n_stages = grid.stage_grid().len();
        let dim = coeffs.dim();
        let mut det = Vec::with_capacity(n_stages * dim * dim);
        let mut zc = Vec::with_capacity(n_stages * dim * dim);
        let mut yc = Vec::with_capacity(n_stages * dim * dim);
        let mut push = |h: &ComplexMatrix, l: &ComplexMatrix, oz: &ComplexMatrix, oy: &ComplexMatrix| {
            let ld = l.dagger();
            det.extend_from_slice((&(h * (-I)) - &(&ld * oz)).as_slice());
            zc.extend_from_slice((l - &(oy * I)).as_slice());
            yc.extend_from_slice((oz * (-I)).as_slice());
        };
        let aux = match coeffs {
            Coefficients::One(c) => {
                let h = &sigma_z() * (0.5 * c.omega_s());
                let l = sigma_minus();
                for j in 0..n_stages {
                    push(&h, &l, &(&l * c.n_stage(j)), &(&l * c.m_stage(j)));
                }
                None
            }
            Coefficients::Two(c) => {
                let [wa, wb] = c.omega();
                let [k1, k2] = c.kappa();
                let (sm, sz) = (sigma_minus(), sigma_z());
                let h = &(&on_qubit_a(&sz) * (0.5 * wa)) + &(&on_qubit_b(&sz) * (0.5 * wb));
                let l = &(&on_qubit_a(&sm) * k1) + &(&on_qubit_b(&sm) * k2);
                let (ops, o5) = two_qubit_ops();
                let combine = |w: [C64; 4]| {
                    ops.iter()
                        .zip(w)
                        .fold(ComplexMatrix::zeros(4, 4), |acc, (o, x)| &acc + &(o * x))
                };
                let mut rates = Vec::with_capacity(n_stages);
                let mut sources = Vec::with_capacity(n_stages);
                let model = c.model();
                let (a, b) = (model.a, model.b);
                for j in 0..n_stages {
                    push(&h, &l, &combine(c.big_n_stage(j)), &combine(c.big_m_stage(j)));
                    let d = c.derived_stage(j);
                    rates.push([a.rate + d.c_g + d.d_n, -I * a.amp, b.rate + d.c_g, d.d_m - I * b.amp]);
                    let bd = d.boundary;
                    sources.push([bd.n5, bd.n6, bd.m5, bd.m6]);
                }
                Some(AuxTables {
                    k5: &l.dagger() * &o5,
                    o5,
                    rates,
                    sources,
                })
            }
        };
        Ok(Self {
            grid,
            dim,
            det,
            zc,
            yc,
            aux,
        })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// `G(t)` for one pair of noise paths.
#[derive(Clone, Debug)]
pub struct EffectiveGenerator {
    tables: Arc<GeneratorTables>,
    /// Noise on the stage grid.
    z: Vec<C64>,
    y: Vec<C64>,
    seeds: (u64, u64),
}

/// Puts a path on the stage grid: taken as is when sampled there, otherwise
/// linearly interpolated at the midpoints.
fn on_stages(path: &NoiseRealization, grid: TimeGrid) -> Result<Vec<C64>> {
    let stages = grid.stage_grid();
    let close = |a: TimeGrid, b: TimeGrid| a.n_steps() == b.n_steps() && (a.dt() - b.dt()).abs() <= tol::GRID * b.dt();
    if path.values.len() != path.grid.len() {
        return Err(Error::DimensionMismatch("noise path length disagrees with its grid".into()));
    }
    if close(path.grid, stages) {
        Ok(path.values.clone())
    } else if close(path.grid, grid) {
        let v = &path.values;
        let mut out = Vec::with_capacity(stages.len());
        for k in 0..grid.n_steps() {
            out.push(v[k]);
            out.push((v[k] + v[k + 1]) * 0.5);
        }
        out.push(v[grid.n_steps()]);
        Ok(out)
    } else {
        Err(Error::GridMismatch(format!(
            "noise grid (dt = {}, {} steps) matches neither the coefficient grid nor its stage grid",
            path.grid.dt(),
            path.grid.n_steps()
        )))
    }
}

impl EffectiveGenerator {
    /// `y_path = None` removes the `y*` terms, as for direct coupling.
    pub fn new(tables: Arc<GeneratorTables>, z_path: &NoiseRealization, y_path: Option<&NoiseRealization>) -> Result<Self> {
        let z = on_stages(z_path, tables.grid)?;
        let (y, y_seed) = match y_path {
            Some(p) => (on_stages(p, tables.grid)?, p.seed),
            None => (vec![ZERO; z.len()], 0),
        };
        Ok(Self {
            tables,
            z,
            y,
            seeds: (z_path.seed, y_seed),
        })
    }

    pub fn grid(&self) -> TimeGrid {
        self.tables.grid
    }

    pub fn dim(&self) -> usize {
        self.tables.dim
    }

    pub fn tables(&self) -> &Arc<GeneratorTables> {
        &self.tables
    }

    /// `G` at stage-grid point `j` for the noise-functional amplitudes
    /// `aux = [Z, Y]` (ignored for one qubit).
    pub fn matrix(&self, j: usize, aux: [C64; 2]) -> ComplexMatrix {
        let d = self.tables.dim;
        let range = j * d * d..(j + 1) * d * d;
        let (z, y) = (self.z[j], self.y[j]);
        let mut g = ComplexMatrix::from_vec(
            d,
            d,
            self.tables.det[range.clone()]
                .iter()
                .zip(&self.tables.zc[range.clone()])
                .zip(&self.tables.yc[range])
                .map(|((a, b), c)| a + z * b + y * c)
                .collect(),
        )
        .expect("table block is d×d");
        if let Some(aux_t) = &self.tables.aux {
            let [zz, yy] = aux;
            g = &(&g - &(&aux_t.k5 * zz)) - &(&aux_t.o5 * (I * (y * zz + z * yy)));
        }
        g
    }

    /// `(dψ/dt, d[Z, Y]/dt)` at stage `j`.
    pub fn derivative(&self, j: usize, psi: &[C64], aux: [C64; 2]) -> (Vec<C64>, [C64; 2]) {
        let d = self.tables.dim;
        let mut x = [ZERO; MAX_STATE];
        x[..d].copy_from_slice(psi);
        x[d] = aux[0];
        x[d + 1] = aux[1];
        let dx = self.rhs(j, &x);
        (dx[..d].to_vec(), [dx[d], dx[d + 1]])
    }

    fn rhs(&self, j: usize, x: &State) -> State {
        let t = &*self.tables;
        let d = t.dim;
        let base = j * d * d;
        let (z, y) = (self.z[j], self.y[j]);
        let mut out = [ZERO; MAX_STATE];
        for r in 0..d {
            let row = base + r * d;
            let mut acc = ZERO;
            for c in 0..d {
                acc += (t.det[row + c] + z * t.zc[row + c] + y * t.yc[row + c]) * x[c];
            }
            out[r] = acc;
        }
        if let Some(a) = &t.aux {
            let (zz, yy) = (x[4], x[5]);
            // K₅ = L†O₅ and O₅ only read the |11⟩ amplitude.
            let c11 = x[3];
            let f = I * (y * zz + z * yy);
            for r in 0..4 {
                out[r] -= (a.k5[(r, 3)] * zz + a.o5[(r, 3)] * f) * c11;
            }
            let [zz_r, zy_r, yy_r, yz_r] = a.rates[j];
            let [n5, n6, m5, m6] = a.sources[j];
            out[4] = zz_r * zz + zy_r * yy + I * (n5 * z + n6 * y);
            out[5] = yy_r * yy + yz_r * zz + I * (m5 * z + m6 * y);
        }
        out
    }
}

/// Builds `G(t)` from solved coefficients and the two noise paths, which may
/// live on the coefficient grid or on its half-step stage grid. In direct
/// coupling mode the `y` path is ignored.
pub fn build_effective_generator(
    params: &ModelParams,
    coeffs: &Coefficients,
    z_path: &NoiseRealization,
    y_path: &NoiseRealization,
) -> Result<EffectiveGenerator> {
    let tables = Arc::new(GeneratorTables::new(params, coeffs)?);
    let y = (!params.cut_probe).then_some(y_path);
    EffectiveGenerator::new(tables, z_path, y)
}

/// One unnormalized trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryState {
    pub grid: TimeGrid,
    pub psi: Vec<ComplexVector>,
    /// Seeds of the `z` and `y` paths.
    pub seed_pair: (u64, u64),
}

/// Fixed-step RK4 from `psi0`; `visit(k, ψ_k)` sees every grid point.
pub(crate) fn integrate(gen: &EffectiveGenerator, psi0: &[C64], mut visit: impl FnMut(usize, &[C64])) -> Result<()> {
    let grid = gen.grid();
    let d = gen.dim();
    let h = grid.dt();
    let n = if gen.tables.aux.is_some() { d + 2 } else { d };
    let mut x = [ZERO; MAX_STATE];
    x[..d].copy_from_slice(psi0);
    visit(0, &x[..d]);
    let shift = |x: &State, k: &State, a: f64| -> State { std::array::from_fn(|i| if i < n { x[i] + k[i] * a } else { ZERO }) };
    for k in 0..grid.n_steps() {
        let j = 2 * k;
        let k1 = gen.rhs(j, &x);
        let k2 = gen.rhs(j + 1, &shift(&x, &k1, h / 2.0));
        let k3 = gen.rhs(j + 1, &shift(&x, &k2, h / 2.0));
        let k4 = gen.rhs(j + 2, &shift(&x, &k3, h));
        for i in 0..n {
            x[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
        }
        let t = grid.time(k + 1);
        if x[..n].iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(format!("trajectory at t = {t}")));
        }
        let norm = x[..d].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if norm > tol::OVERFLOW_NORM {
            return Err(Error::Overflow { t, norm });
        }
        visit(k + 1, &x[..d]);
    }
    Ok(())
}

pub fn run_trajectory(generator: &EffectiveGenerator, psi0: &ComplexVector, grid: TimeGrid) -> Result<TrajectoryState> {
    if grid != generator.grid() {
        return Err(Error::GridMismatch("trajectory grid differs from the generator grid".into()));
    }
    if psi0.dim() != generator.dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has dimension {}, model {}",
            psi0.dim(),
            generator.dim()
        )));
    }
    if (psi0.norm() - 1.0).abs() > tol::NORMALIZATION {
        return Err(Error::InvalidArgument(format!("initial state norm {} is not 1", psi0.norm())));
    }
    let mut psi = Vec::with_capacity(grid.len());
    integrate(generator, psi0.as_slice(), |_, v| {
        psi.push(ComplexVector::new(v.to_vec()).expect("non-empty"))
    })?;
    Ok(TrajectoryState {
        grid,
        psi,
        seed_pair: generator.seeds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{solve_coeffs, OneQubitCoeffs};
    use crate::noise::{sample_noise, CorrelationKernel};
    use crate::operators::{excited, sigma_plus};
    use proptest::prelude::*;

    fn generator(p: &ModelParams, grid: TimeGrid, seed: u64) -> EffectiveGenerator {
        let coeffs = solve_coeffs(p, grid).unwrap();
        let k = p.kernels();
        let stages = grid.stage_grid();
        let z = sample_noise(&k.z, stages, seed).unwrap();
        let y = sample_noise(&k.y, stages, seed + 1).unwrap();
        build_effective_generator(p, &coeffs, &z, &y).unwrap()
    }

    #[test]
    fn no_coupling_is_unitary() {
        let p = ModelParams::one_qubit(1.3, 0.5, 0.0, 0.0);
        let g = generator(&p, TimeGrid::new(1.0, 0.1).unwrap(), 7);
        let h = &sigma_z() * 0.65;
        for j in 0..g.grid().stage_grid().len() {
            assert!(g.matrix(j, [ZERO; 2]).max_abs_diff(&(&h * (-I))) < 1e-15);
        }
    }

    #[test]
    fn noise_free_one_qubit_generator() {
        let p = ModelParams::one_qubit(1.0, 0.5, 0.5, 5.0);
        let grid = TimeGrid::new(2.0, 0.05).unwrap();
        let coeffs = solve_coeffs(&p, grid).unwrap();
        let zeros = NoiseRealization::zeros(grid, 0);
        let g = build_effective_generator(&p, &coeffs, &zeros, &zeros).unwrap();
        let Coefficients::One(c) = &coeffs else { unreachable!() };
        let pp = &sigma_plus() * &sigma_minus();
        for j in 0..grid.stage_grid().len() {
            let expected = &(&sigma_z() * (-0.5 * I)) - &(&pp * c.n_stage(j));
            assert!(g.matrix(j, [ZERO; 2]).max_abs_diff(&expected) < 1e-15);
        }
    }

    #[test]
    fn two_qubit_embeds_one_qubit_when_b_is_idle() {
        let grid = TimeGrid::new(2.0, 0.02).unwrap();
        let p2 = ModelParams::two_qubit(1.0, 0.5, 0.5, 5.0, 1.0, 0.0);
        let p1 = ModelParams::one_qubit(1.0, 0.5, 0.5, 5.0);
        let g2 = generator(&p2, grid, 11);
        let g1 = generator(&p1, grid, 11);
        // B in |0⟩ contributes the constant energy −ω_B/2.
        let shift = I * 0.5;
        let sub = [0usize, 2];
        for j in 0..grid.stage_grid().len() {
            let (m2, m1) = (g2.matrix(j, [C64::new(0.3, -1.0), C64::new(2.0, 0.1)]), g1.matrix(j, [ZERO; 2]));
            for (r, &rr) in sub.iter().enumerate() {
                for (c, &cc) in sub.iter().enumerate() {
                    let expected = m1[(r, c)] + if r == c { shift } else { ZERO };
                    assert!((m2[(rr, cc)] - expected).norm() < 1e-10);
                }
                // Nothing leaks out of the B-ground subspace.
                assert!(m2[(1, sub[r])].norm() < 1e-14 && m2[(3, sub[r])].norm() < 1e-14);
            }
        }
    }

    #[test]
    fn phase_evolution() {
        let p = ModelParams::one_qubit(1.3, 0.5, 0.0, 0.0);
        let grid = TimeGrid::new(3.0, 0.01).unwrap();
        let g = generator(&p, grid, 1);
        let tr = run_trajectory(&g, &excited(), grid).unwrap();
        for (k, psi) in tr.psi.iter().enumerate() {
            let exact = (-I * 0.65 * grid.time(k)).exp();
            assert!((psi[1] - exact).norm() < 1e-10 && psi[0] == ZERO);
        }
    }

    #[test]
    fn zero_generator_is_stationary() {
        let p = ModelParams::one_qubit(0.0, 0.5, 0.0, 0.0);
        let grid = TimeGrid::new(1.0, 0.1).unwrap();
        let psi0 = ComplexVector::new(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
        let tr = run_trajectory(&generator(&p, grid, 3), &psi0, grid).unwrap();
        assert!(tr.psi.iter().all(|v| *v == psi0));
    }

    #[test]
    fn step_halving_agrees() {
        let p = ModelParams::one_qubit(1.0, 1.0, 0.5, 0.0);
        let norms = |dt: f64| {
            let grid = TimeGrid::new(2.0, dt).unwrap();
            let tr = run_trajectory(&generator(&p, grid, 42), &excited(), grid).unwrap();
            tr.psi.iter().map(|v| v.norm_sqr()).collect::<Vec<_>>()
        };
        let (a, b) = (norms(0.01), norms(0.005));
        for k in 0..a.len() {
            assert!((a[k] - b[2 * k]).abs() < 1e-8, "k={k}: {} vs {}", a[k], b[2 * k]);
        }
    }

    #[test]
    fn noise_free_projector_follows_master_drift() {
        let p = ModelParams::one_qubit(1.0, 0.5, 0.5, 5.0);
        let grid = TimeGrid::new(3.0, 0.01).unwrap();
        let c = OneQubitCoeffs::solve(p.kernels(), 1.0, grid).unwrap();
        let zeros = NoiseRealization::zeros(grid, 0);
        let g = build_effective_generator(&p, &Coefficients::One(c.clone()), &zeros, &zeros).unwrap();
        let psi0 = ComplexVector::new(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
        let tr = run_trajectory(&g, &psi0, grid).unwrap();
        // ρ' = Dρ + ρD† with D = −i(ω/2)σ_z − Nσ₊σ₋, integrated independently.
        let drift = |j: usize, r: &ComplexMatrix| {
            let d = ComplexMatrix::diag(&[C64::from(0.5) * I, -I * 0.5 - c.n_stage(j)]);
            &(&d * r) + &(r * &d.dagger())
        };
        let h = grid.dt();
        let mut rho = psi0.projector();
        for k in 0..grid.n_steps() {
            let j = 2 * k;
            let k1 = drift(j, &rho);
            let k2 = drift(j + 1, &(&rho + &(&k1 * (h / 2.0))));
            let k3 = drift(j + 1, &(&rho + &(&k2 * (h / 2.0))));
            let k4 = drift(j + 2, &(&rho + &(&k3 * h)));
            let inc = &(&(&k1 + &(&(&k2 + &k3) * 2.0)) + &k4) * (h / 6.0);
            rho = &rho + &inc;
            assert!(tr.psi[k + 1].projector().max_abs_diff(&rho) < 1e-8);
        }
    }

    #[test]
    fn mean_squared_norm_is_one() {
        let p = ModelParams::one_qubit(1.0, 0.5, 0.5, 5.0);
        let grid = TimeGrid::new(3.0, 0.02).unwrap();
        let coeffs = solve_coeffs(&p, grid).unwrap();
        let tables = Arc::new(GeneratorTables::new(&p, &coeffs).unwrap());
        let k = p.kernels();
        let trials = 2000;
        let mut sums = vec![(0.0, 0.0); grid.len()];
        for n in 0..trials {
            let z = sample_noise(&k.z, grid.stage_grid(), 2 * n).unwrap();
            let y = sample_noise(&k.y, grid.stage_grid(), 2 * n + 1).unwrap();
            let g = EffectiveGenerator::new(tables.clone(), &z, Some(&y)).unwrap();
            integrate(&g, excited().as_slice(), |i, v| {
                let w: f64 = v.iter().map(|a| a.norm_sqr()).sum();
                sums[i].0 += w;
                sums[i].1 += w * w;
            })
            .unwrap();
        }
        let kf = trials as f64;
        for (s, s2) in sums {
            let mean = s / kf;
            let se = ((s2 / kf - mean * mean).max(0.0) / (kf - 1.0)).sqrt();
            assert!((mean - 1.0).abs() <= 5.0 * se + 1e-12, "{mean} ± {se}");
        }
    }

    #[test]
    fn overflow_is_reported() {
        let p = ModelParams::one_qubit(1.0, 0.5, 0.5, 0.0);
        let grid = TimeGrid::new(1.0, 0.01).unwrap();
        let coeffs = solve_coeffs(&p, grid).unwrap();
        let mut z = NoiseRealization::zeros(grid, 0);
        z.values.iter_mut().for_each(|v| *v = C64::from(1e7));
        let g = build_effective_generator(&p, &coeffs, &z, &NoiseRealization::zeros(grid, 0)).unwrap();
        let psi0 = ComplexVector::new(vec![C64::from(0.6), C64::from(0.8)]).unwrap();
        assert!(matches!(run_trajectory(&g, &psi0, grid), Err(Error::Overflow { .. } | Error::NonFiniteValue(_))));
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let p = ModelParams::one_qubit(1.0, 0.5, 0.5, 5.0);
        let coeffs = solve_coeffs(&p, TimeGrid::new(1.0, 0.1).unwrap()).unwrap();
        let other = NoiseRealization::zeros(TimeGrid::new(1.0, 0.03125).unwrap(), 0);
        assert!(matches!(
            build_effective_generator(&p, &coeffs, &other, &other),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn interpolated_and_stage_noise_agree_for_smooth_paths() {
        let p = ModelParams::one_qubit(1.0, 0.5, 0.5, 0.0);
        let grid = TimeGrid::new(2.0, 0.01).unwrap();
        let kernel = CorrelationKernel::single_mode(C64::from(0.5), 0.5);
        let run = |g: TimeGrid| {
            let z = sample_noise(&kernel, g, 9).unwrap();
            let coeffs = solve_coeffs(&p, grid).unwrap();
            let gen = build_effective_generator(&p, &coeffs, &z, &NoiseRealization::zeros(g, 0)).unwrap();
            run_trajectory(&gen, &excited(), grid).unwrap()
        };
        let (a, b) = (run(grid), run(grid.stage_grid()));
        let last = grid.n_steps();
        assert!((a.psi[last][1] - b.psi[last][1]).norm() < 1e-4);
    }

    proptest! {
        #[test]
        fn linear_in_initial_state(re in -2.0f64..2.0, im in -2.0f64..2.0, seed in 0u64..1000) {
            let p = ModelParams::two_qubit(1.0, 0.5, 0.5, 5.0, 1.0, 0.6);
            let grid = TimeGrid::new(1.0, 0.05).unwrap();
            let g = generator(&p, grid, seed);
            let psi0 = ComplexVector::new(vec![C64::from(0.5), C64::new(0.0, 0.5), C64::from(-0.5), C64::from(0.5)]).unwrap();
            let c = C64::new(re, im);
            let mut base = Vec::new();
            integrate(&g, psi0.as_slice(), |_, v| base.push(v.to_vec())).unwrap();
            let scaled0: Vec<C64> = psi0.as_slice().iter().map(|x| x * c).collect();
            let mut k = 0;
            integrate(&g, &scaled0, |_, v| {
                for (a, b) in v.iter().zip(&base[k]) {
                    assert!((a - b * c).norm() <= 1e-12 * (1.0 + (b * c).norm()));
                }
                k += 1;
            }).unwrap();
        }
    }
}
