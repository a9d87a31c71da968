//! Ensemble averages `ρ_t = M[|ψ_t⟩⟨ψ_t|]` over the two noises.
//!
//! Trajectory `k` draws its `z` and `y` paths from
//! `stream_seed(master_seed, k, 0|1)`. The index range is cut into at most
//! [`BLOCKS`] contiguous blocks that run one after another. Inside a block the
//! range is halved recursively down to chunks of [`CHUNK`] trajectories that
//! are summed in index order, and partial sums are added back up the same
//! fixed tree. The floating-point result therefore does not depend on how
//! many worker threads take part.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use crate::coeffs::{ChannelKernels, Coefficients, ModelParams};
use crate::noise::{sample_noise, stream_seed};
use crate::operators::{ComplexMatrix, ComplexVector, ZERO};
use crate::trajectory::{integrate, EffectiveGenerator, GeneratorTables, TrajectoryState};
use crate::{tol, Error, Result, TimeGrid, C64};

/// Number of contiguous blocks kept for jackknife error bars.
pub const BLOCKS: usize = 20;
const CHUNK: usize = 16;

/// Running sums of `ψψ†` and of `|ψ_iψ_j*|²` over accepted trajectories.
#[derive(Clone, Debug)]
struct Acc {
    count: usize,
    rejected: usize,
    sum: Vec<C64>,
    sum2: Vec<f64>,
}

impl Acc {
    fn new(len: usize, dim: usize) -> Self {
        Self {
            count: 0,
            rejected: 0,
            sum: vec![ZERO; len * dim * dim],
            sum2: vec![0.0; len * dim * dim],
        }
    }

    fn add_history(&mut self, history: &[C64], dim: usize) {
        for (t, psi) in history.chunks_exact(dim).enumerate() {
            let base = t * dim * dim;
            for i in 0..dim {
                for j in 0..dim {
                    let x = psi[i] * psi[j].conj();
                    self.sum[base + i * dim + j] += x;
                    self.sum2[base + i * dim + j] += x.norm_sqr();
                }
            }
        }
        self.count += 1;
    }

    fn merge(mut self, other: &Self) -> Self {
        self.count += other.count;
        self.rejected += other.rejected;
        self.sum.iter_mut().zip(&other.sum).for_each(|(a, b)| *a += b);
        self.sum2.iter_mut().zip(&other.sum2).for_each(|(a, b)| *a += b);
        self
    }
}

/// Sum of `ψψ†` over one block, kept for leave-one-block-out estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSum {
    pub count: usize,
    pub sum: Vec<ComplexMatrix>,
}

/// Averaged density matrices with Monte-Carlo error estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrixSeries {
    pub grid: TimeGrid,
    pub rho: Vec<ComplexMatrix>,
    /// Largest entrywise standard error at each time; NaN when `k < 2`.
    pub stderr: Vec<f64>,
    /// Accepted trajectories.
    pub k: usize,
    pub rejected: usize,
    pub blocks: Vec<BlockSum>,
}

impl DensityMatrixSeries {
    fn from_blocks(grid: TimeGrid, dim: usize, blocks: Vec<Acc>) -> Result<Self> {
        let total = tree_sum(blocks.clone()).ok_or_else(|| Error::InvalidArgument("no trajectories".into()))?;
        if total.count == 0 {
            return Err(Error::InvalidArgument("every trajectory was rejected".into()));
        }
        let kf = total.count as f64;
        let dd = dim * dim;
        let mut rho = Vec::with_capacity(grid.len());
        let mut stderr = Vec::with_capacity(grid.len());
        for t in 0..grid.len() {
            let mean: Vec<C64> = total.sum[t * dd..(t + 1) * dd].iter().map(|x| x / kf).collect();
            let m = ComplexMatrix::from_vec(dim, dim, mean.clone()).expect("d×d block");
            rho.push(m.hermitian_part());
            stderr.push(if total.count < 2 {
                f64::NAN
            } else {
                mean.iter()
                    .zip(&total.sum2[t * dd..(t + 1) * dd])
                    .map(|(mu, s2)| {
                        // Differences at the rounding level of the sums mean no spread.
                        let raw = s2 / kf - mu.norm_sqr();
                        let floor = 64.0 * f64::EPSILON * s2 / kf;
                        let var = if raw <= floor { 0.0 } else { raw * kf / (kf - 1.0) };
                        (var / kf).sqrt()
                    })
                    .fold(0.0, f64::max)
            });
        }
        let blocks = blocks
            .into_iter()
            .filter(|b| b.count > 0)
            .map(|b| BlockSum {
                count: b.count,
                sum: b
                    .sum
                    .chunks_exact(dd)
                    .map(|c| ComplexMatrix::from_vec(dim, dim, c.to_vec()).expect("d×d block"))
                    .collect(),
            })
            .collect();
        Ok(Self {
            grid,
            rho,
            stderr,
            k: total.count,
            rejected: total.rejected,
            blocks,
        })
    }

    pub fn dim(&self) -> usize {
        self.rho[0].rows()
    }

    /// `f` of the leave-one-block-out averages at time index `t`, one value
    /// per stored block.
    pub fn leave_one_out(&self, t: usize, f: impl Fn(&ComplexMatrix) -> f64) -> Vec<f64> {
        let total: ComplexMatrix = self.blocks.iter().fold(ComplexMatrix::zeros(self.dim(), self.dim()), |acc, b| &acc + &b.sum[t]);
        let kf = self.k as f64;
        self.blocks
            .iter()
            .map(|b| {
                let rest = &(&total - &b.sum[t]) * (1.0 / (kf - b.count as f64));
                f(&rest.hermitian_part())
            })
            .collect()
    }

    /// Jackknife over the stored blocks: the full-sample value of `f(ρ_t)`
    /// and its standard error. `None` with fewer than two blocks.
    pub fn jackknife(&self, t: usize, f: impl Fn(&ComplexMatrix) -> f64) -> (f64, Option<f64>) {
        let value = f(&self.rho[t]);
        if self.blocks.len() < 2 {
            return (value, None);
        }
        (value, Some(jackknife_stderr(&self.leave_one_out(t, f))))
    }
}

/// Standard error from leave-one-out estimates.
pub fn jackknife_stderr(partial: &[f64]) -> f64 {
    let nb = partial.len() as f64;
    let mean = partial.iter().sum::<f64>() / nb;
    (partial.iter().map(|x| (x - mean).powi(2)).sum::<f64>() * (nb - 1.0) / nb).sqrt()
}

fn tree_sum(mut parts: Vec<Acc>) -> Option<Acc> {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            next.push(match it.next() {
                Some(b) => a.merge(&b),
                None => a,
            });
        }
        parts = next;
    }
    parts.pop()
}

/// Progress hook and cancellation flag for [`run_ensemble_with`].
#[derive(Clone, Default)]
pub struct EnsembleOptions {
    /// Called with the completed fraction after each block (every 5% of K).
    pub progress: Option<Arc<dyn Fn(f64) + Send + Sync>>,
    pub cancel: Option<Arc<AtomicBool>>,
}

impl EnsembleOptions {
    pub fn with_progress(mut self, f: impl Fn(f64) + Send + Sync + 'static) -> Self {
        self.progress = Some(Arc::new(f));
        self
    }

    pub fn with_cancel(mut self, flag: Arc<AtomicBool>) -> Self {
        self.cancel = Some(flag);
        self
    }
}

fn coeff_kernels(c: &Coefficients) -> ChannelKernels {
    match c {
        Coefficients::One(c) => c.kernels(),
        Coefficients::Two(c) => c.kernels(),
    }
}

/// Averages `k` trajectories started from `psi0`.
pub fn run_ensemble(
    params: &ModelParams,
    coeffs: &Coefficients,
    kernels: &ChannelKernels,
    grid: TimeGrid,
    psi0: &ComplexVector,
    k: usize,
    master_seed: u64,
) -> Result<DensityMatrixSeries> {
    run_ensemble_with(params, coeffs, kernels, grid, psi0, k, master_seed, &EnsembleOptions::default())
}

#[allow(clippy::too_many_arguments)]
pub fn run_ensemble_with(
    params: &ModelParams,
    coeffs: &Coefficients,
    kernels: &ChannelKernels,
    grid: TimeGrid,
    psi0: &ComplexVector,
    k: usize,
    master_seed: u64,
    opts: &EnsembleOptions,
) -> Result<DensityMatrixSeries> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("ensemble size must be at least 2, got {k}")));
    }
    if grid != coeffs.grid() {
        return Err(Error::GridMismatch("ensemble grid differs from the coefficient grid".into()));
    }
    if *kernels != coeff_kernels(coeffs) {
        return Err(Error::InvalidArgument("noise kernels differ from those the coefficients were solved for".into()));
    }
    if psi0.dim() != coeffs.dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has dimension {}, model {}",
            psi0.dim(),
            coeffs.dim()
        )));
    }
    if (psi0.norm() - 1.0).abs() > tol::NORMALIZATION {
        return Err(Error::InvalidArgument(format!("initial state norm {} is not 1", psi0.norm())));
    }
    let tables = Arc::new(GeneratorTables::new(params, coeffs)?);
    let stages = grid.stage_grid();
    let dim = coeffs.dim();
    let len = grid.len();
    let limit = (tol::REJECT_FRACTION * k as f64).floor() as usize;
    let use_y = !params.cut_probe;

    let one = |idx: usize, acc: &mut Acc, buf: &mut Vec<C64>| -> Result<()> {
        let z = sample_noise(&kernels.z, stages, stream_seed(master_seed, idx as u64, 0))?;
        let y = if use_y {
            Some(sample_noise(&kernels.y, stages, stream_seed(master_seed, idx as u64, 1))?)
        } else {
            None
        };
        let gen = EffectiveGenerator::new(tables.clone(), &z, y.as_ref())?;
        buf.clear();
        match integrate(&gen, psi0.as_slice(), |_, v| buf.extend_from_slice(v)) {
            Ok(()) => {
                acc.add_history(buf, dim);
                Ok(())
            }
            Err(Error::Overflow { .. } | Error::NonFiniteValue(_)) => {
                acc.rejected += 1;
                Ok(())
            }
            Err(e) => Err(e),
        }
    };

    fn range_sum(lo: usize, hi: usize, len: usize, dim: usize, cancel: Option<&AtomicBool>, one: &(dyn Fn(usize, &mut Acc, &mut Vec<C64>) -> Result<()> + Sync)) -> Result<Acc> {
        if hi - lo <= CHUNK {
            if cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
                return Err(Error::Cancelled);
            }
            let mut acc = Acc::new(len, dim);
            let mut buf = Vec::with_capacity(len * dim);
            for idx in lo..hi {
                one(idx, &mut acc, &mut buf)?;
            }
            return Ok(acc);
        }
        // Split on a chunk boundary so the tree depends only on (lo, hi).
        let mid = lo + ((hi - lo) / CHUNK).div_ceil(2) * CHUNK;
        let (a, b) = rayon::join(
            || range_sum(lo, mid, len, dim, cancel, one),
            || range_sum(mid, hi, len, dim, cancel, one),
        );
        Ok(a?.merge(&b?))
    }

    let n_blocks = BLOCKS.min(k);
    let mut blocks = Vec::with_capacity(n_blocks);
    let mut rejected = 0;
    for b in 0..n_blocks {
        let (lo, hi) = (b * k / n_blocks, (b + 1) * k / n_blocks);
        let acc = range_sum(lo, hi, len, dim, opts.cancel.as_deref(), &one)?;
        rejected += acc.rejected;
        if rejected > limit {
            return Err(Error::ExcessiveRejects { rejected, total: k, limit });
        }
        blocks.push(acc);
        if let Some(p) = &opts.progress {
            p((b + 1) as f64 / n_blocks as f64);
        }
    }
    DensityMatrixSeries::from_blocks(grid, dim, blocks)
}

/// Averages already integrated trajectories, in list order.
pub fn density_from_trajectories(paths: &[TrajectoryState]) -> Result<DensityMatrixSeries> {
    let first = paths
        .first()
        .ok_or_else(|| Error::InvalidArgument("no trajectories to average".into()))?;
    let grid = first.grid;
    let dim = first.psi[0].dim();
    let n_blocks = BLOCKS.min(paths.len());
    let mut blocks = Vec::with_capacity(n_blocks);
    for b in 0..n_blocks {
        let mut acc = Acc::new(grid.len(), dim);
        for p in &paths[b * paths.len() / n_blocks..(b + 1) * paths.len() / n_blocks] {
            if p.grid != grid || p.psi.len() != grid.len() {
                return Err(Error::GridMismatch("trajectories live on different grids".into()));
            }
            if p.psi.iter().any(|v| v.dim() != dim) {
                return Err(Error::DimensionMismatch("trajectories have different dimensions".into()));
            }
            let flat: Vec<C64> = p.psi.iter().flat_map(|v| v.as_slice().iter().copied()).collect();
            acc.add_history(&flat, dim);
        }
        blocks.push(acc);
    }
    DensityMatrixSeries::from_blocks(grid, dim, blocks)
}

/// The stored standard error at grid index `t_index`.
pub fn mc_error(series: &DensityMatrixSeries, t_index: usize) -> Result<f64> {
    if series.k < 2 {
        return Err(Error::InvalidArgument("the standard error needs at least two trajectories".into()));
    }
    series
        .stderr
        .get(t_index)
        .copied()
        .ok_or_else(|| Error::InvalidArgument(format!("time index {t_index} out of range")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::solve_coeffs;
    use crate::operators::{excited, ground};
    use rand::{Rng, SeedableRng};

    fn state(grid: TimeGrid, psi: Vec<ComplexVector>) -> TrajectoryState {
        TrajectoryState {
            grid,
            psi,
            seed_pair: (0, 0),
        }
    }

    fn ensemble(p: &ModelParams, grid: TimeGrid, k: usize, seed: u64) -> DensityMatrixSeries {
        let coeffs = solve_coeffs(p, grid).unwrap();
        run_ensemble(p, &coeffs, &p.kernels(), grid, &excited(), k, seed).unwrap()
    }

    #[test]
    fn noise_free_model_stays_pure() {
        let p = ModelParams::one_qubit(1.0, 0.5, 0.0, 0.0);
        let grid = TimeGrid::new(1.0, 0.05).unwrap();
        let psi0 = ComplexVector::new(vec![C64::from(0.6), C64::new(0.0, 0.8)]).unwrap();
        let coeffs = solve_coeffs(&p, grid).unwrap();
        let s = run_ensemble(&p, &coeffs, &p.kernels(), grid, &psi0, 50, 3).unwrap();
        for (rho, se) in s.rho.iter().zip(&s.stderr) {
            // Unitary up to the RK4 amplitude error, ~(ωdt)⁶ per step.
            assert!((rho.trace() - 1.0).norm() < 1e-9);
            assert!(rho.matmul(rho).unwrap().max_abs_diff(rho) < 1e-9);
            assert!(*se < 1e-15);
        }
    }

    #[test]
    fn single_projector() {
        let grid = TimeGrid::new(1.0, 1.0).unwrap();
        let psi = ComplexVector::new(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
        let s = density_from_trajectories(&[state(grid, vec![psi.clone(), psi.clone()])]).unwrap();
        assert!(s.rho[1].max_abs_diff(&psi.projector()) < 1e-15);
        assert!((s.rho[1].trace() - 1.0).norm() < 1e-15);
        assert!(mc_error(&s, 0).is_err());
    }

    #[test]
    fn two_basis_states_average_to_mixture() {
        let grid = TimeGrid::new(1.0, 1.0).unwrap();
        let s = density_from_trajectories(&[
            state(grid, vec![ground(), ground()]),
            state(grid, vec![excited(), excited()]),
        ])
        .unwrap();
        let half = ComplexMatrix::diag(&[C64::from(0.5), C64::from(0.5)]);
        assert!(s.rho.iter().all(|r| r.max_abs_diff(&half) < 1e-15));
    }

    #[test]
    fn matches_brute_force_sum() {
        let grid = TimeGrid::new(2.0, 1.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut c = || C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let paths: Vec<_> = (0..37)
            .map(|_| state(grid, (0..3).map(|_| ComplexVector::new(vec![c(), c(), c(), c()]).unwrap()).collect()))
            .collect();
        let s = density_from_trajectories(&paths).unwrap();
        for t in 0..3 {
            let mut brute = ComplexMatrix::zeros(4, 4);
            for p in &paths {
                brute = &brute + &p.psi[t].projector();
            }
            brute = &brute * (1.0 / 37.0);
            assert!(s.rho[t].max_abs_diff(&brute) < 1e-14);
        }
    }

    #[test]
    fn identical_across_thread_counts() {
        let p = ModelParams::two_qubit(1.0, 0.5, 0.5, 5.0, 1.0, 1.0);
        let grid = TimeGrid::new(1.0, 0.02).unwrap();
        let coeffs = solve_coeffs(&p, grid).unwrap();
        let psi0 = crate::operators::bell_phi_plus();
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_ensemble(&p, &coeffs, &p.kernels(), grid, &psi0, 300, 17).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn physical_invariants() {
        let p = ModelParams::one_qubit(1.0, 0.5, 0.5, 5.0);
        let s = ensemble(&p, TimeGrid::new(3.0, 0.02).unwrap(), 2000, 1);
        for (rho, se) in s.rho.iter().zip(&s.stderr) {
            assert!(rho.hermiticity_defect() < 1e-12);
            assert!((rho.trace() - 1.0).norm() <= 5.0 * se + 1e-12);
            let (ev, _) = rho.hermitian_eigen().unwrap();
            assert!(ev[0] >= -5.0 * se - 1e-12);
        }
    }

    #[test]
    fn error_scales_like_inverse_root_k() {
        let p = ModelParams::one_qubit(1.0, 0.5, 0.5, 5.0);
        let grid = TimeGrid::new(3.0, 0.05).unwrap();
        let median = |s: &DensityMatrixSeries| {
            let mut v: Vec<f64> = s.stderr[1..].to_vec();
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        };
        let ratio = median(&ensemble(&p, grid, 4000, 2)) / median(&ensemble(&p, grid, 2000, 3));
        assert!((ratio - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.2 * std::f64::consts::FRAC_1_SQRT_2, "{ratio}");
    }

    #[test]
    fn progress_and_cancel() {
        let p = ModelParams::one_qubit(1.0, 0.5, 0.5, 5.0);
        let grid = TimeGrid::new(1.0, 0.05).unwrap();
        let coeffs = solve_coeffs(&p, grid).unwrap();
        let seen = Arc::new(std::sync::Mutex::new(Vec::new()));
        let sink = seen.clone();
        let opts = EnsembleOptions::default().with_progress(move |f| sink.lock().unwrap().push(f));
        run_ensemble_with(&p, &coeffs, &p.kernels(), grid, &excited(), 200, 0, &opts).unwrap();
        let seen = seen.lock().unwrap();
        assert_eq!(seen.len(), BLOCKS);
        assert_eq!(*seen.last().unwrap(), 1.0);

        let flag = Arc::new(AtomicBool::new(true));
        let opts = EnsembleOptions::default().with_cancel(flag);
        assert!(matches!(
            run_ensemble_with(&p, &coeffs, &p.kernels(), grid, &excited(), 200, 0, &opts),
            Err(Error::Cancelled)
        ));
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = ModelParams::one_qubit(1.0, 0.5, 0.5, 5.0);
        let grid = TimeGrid::new(1.0, 0.05).unwrap();
        let coeffs = solve_coeffs(&p, grid).unwrap();
        assert!(run_ensemble(&p, &coeffs, &p.kernels(), grid, &excited(), 1, 0).is_err());
        let other = p.direct().kernels();
        assert!(run_ensemble(&p, &coeffs, &other, grid, &excited(), 10, 0).is_err());
        assert!(density_from_trajectories(&[]).is_err());
    }

    #[test]
    fn jackknife_matches_linear_error() {
        // For a linear functional the jackknife and the direct standard error
        // agree closely. The excited amplitude from |1⟩ is noise-free, so use ρ₀₀.
        let p = ModelParams::one_qubit(1.0, 0.5, 0.5, 5.0);
        let s = ensemble(&p, TimeGrid::new(2.0, 0.1).unwrap(), 4000, 8);
        let t = 10;
        let (v, se) = s.jackknife(t, |r| r[(0, 0)].re);
        assert_eq!(v, s.rho[t][(0, 0)].re);
        let se = se.unwrap();
        assert!(se > 0.3 * s.stderr[t] && se < 3.0 * s.stderr[t], "{se} vs {}", s.stderr[t]);
    }
}
