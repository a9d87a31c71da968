//! Populations, coherences and concurrence extracted from density-matrix
//! series.
//!
//! Error bars come from the jackknife over trajectory blocks when the series
//! carries blocks, and from the series' own entrywise stderr otherwise
//! (deterministic oracles report zero).

use serde::Serialize;

use crate::ensemble::DensityMatrixSeries;
use crate::operators::{partial_trace, partial_trace_left, sigma_y, tensor_product, ComplexMatrix};
use crate::{tol, Error, Result, TimeGrid, C64};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObservableSeries {
    pub grid: TimeGrid,
    pub name: String,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Negative-eigenvalue mass removed before evaluation; zeros for linear
    /// observables.
    pub clipped: Vec<f64>,
}

impl ObservableSeries {
    pub fn constant(grid: TimeGrid, name: &str, value: f64) -> Self {
        let n = grid.len();
        Self {
            grid,
            name: name.to_string(),
            values: vec![value; n],
            stderr: vec![0.0; n],
            clipped: vec![0.0; n],
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn max_stderr(&self) -> f64 {
        self.stderr.iter().copied().fold(0.0, f64::max)
    }
}

/// Reduced matrix of qubit `which` (0 = A, 1 = B) of a one- or two-qubit
/// density matrix.
pub fn reduced_qubit(rho: &ComplexMatrix, which: usize) -> Result<ComplexMatrix> {
    match (rho.rows(), which) {
        (2, 0) => Ok(rho.clone()),
        (4, 0) => partial_trace(rho, 2, 2),
        (4, 1) => partial_trace_left(rho, 2, 2),
        (d, w) => Err(Error::InvalidArgument(format!("qubit index {w} out of range for dimension {d}"))),
    }
}

fn check_index(series: &DensityMatrixSeries, which: usize) -> Result<()> {
    reduced_qubit(&ComplexMatrix::zeros(series.dim(), series.dim()), which).map(|_| ())
}

/// Evaluates a scalar function of `ρ_t` at every time, with jackknife errors.
fn map_series(series: &DensityMatrixSeries, name: String, f: impl Fn(&ComplexMatrix) -> f64) -> ObservableSeries {
    let n = series.grid.len();
    let mut values = Vec::with_capacity(n);
    let mut stderr = Vec::with_capacity(n);
    for t in 0..n {
        let (v, se) = series.jackknife(t, &f);
        values.push(v);
        stderr.push(se.unwrap_or(if series.k == 0 { 0.0 } else { series.stderr[t] }));
    }
    ObservableSeries {
        grid: series.grid,
        name,
        values,
        stderr,
        clipped: vec![0.0; n],
    }
}

/// Excited-state population `⟨1|ρ_q|1⟩` of qubit `which`.
pub fn population(series: &DensityMatrixSeries, which: usize) -> Result<ObservableSeries> {
    check_index(series, which)?;
    Ok(map_series(series, format!("population_{}", qubit_label(which)), |r| {
        reduced_qubit(r, which).expect("checked")[(1, 1)].re
    }))
}

/// Ground-state population `⟨0|ρ_q|0⟩` of qubit `which`.
pub fn ground_population(series: &DensityMatrixSeries, which: usize) -> Result<ObservableSeries> {
    check_index(series, which)?;
    Ok(map_series(series, format!("ground_{}", qubit_label(which)), |r| {
        reduced_qubit(r, which).expect("checked")[(0, 0)].re
    }))
}

/// `|⟨0|ρ_q|1⟩|` of qubit `which`.
pub fn coherence(series: &DensityMatrixSeries, which: usize) -> Result<ObservableSeries> {
    check_index(series, which)?;
    Ok(map_series(series, format!("coherence_{}", qubit_label(which)), |r| {
        reduced_qubit(r, which).expect("checked")[(0, 1)].norm()
    }))
}

fn qubit_label(which: usize) -> &'static str {
    if which == 0 {
        "a"
    } else {
        "b"
    }
}

/// Nearest physical state: eigenvalues below zero are dropped and the trace
/// restored. Returns the projected matrix and the removed negative mass.
pub fn project_psd(rho: &ComplexMatrix) -> Result<(ComplexMatrix, f64)> {
    let (w, v) = psd_factor(rho)?;
    let n = rho.rows();
    let m = ComplexMatrix::from_fn(n, n, |i, j| (0..w.len()).map(|k| v[(i, k)] * v[(j, k)].conj() * w[k]).sum());
    Ok((m, clipped_mass(rho)?))
}

fn clipped_mass(rho: &ComplexMatrix) -> Result<f64> {
    let (w, _) = rho.hermitian_eigen()?;
    Ok(w.iter().filter(|&&x| x < 0.0).map(|x| -x).sum())
}

// Eigenpairs of the projected state, keeping only eigenvalues above the
// rounding level of the trace. Weights are renormalized to the original trace.
fn psd_factor(rho: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    let (w, v) = rho.hermitian_eigen()?;
    let trace: f64 = w.iter().sum();
    let cut = 64.0 * f64::EPSILON * trace.abs().max(f64::MIN_POSITIVE);
    let kept: Vec<usize> = (0..w.len()).filter(|&k| w[k] > cut).collect();
    let mass: f64 = kept.iter().map(|&k| w[k]).sum();
    let scale = if mass > 0.0 { trace / mass } else { 0.0 };
    let n = rho.rows();
    let vectors = ComplexMatrix::from_fn(n, kept.len(), |i, j| v[(i, kept[j])]);
    Ok((kept.iter().map(|&k| w[k] * scale).collect(), vectors))
}

/// Wootters concurrence of one 4×4 state, with the clipped negative mass.
///
/// The spin-flipped overlap is evaluated as the singular values of
/// `τ = Wᵀ(σ_y⊗σ_y)W` with `ρ = WW†`; these equal the square roots of the
/// eigenvalues of `√ρ ρ̃ √ρ` but avoid taking square roots of rounding noise.
pub fn concurrence_of(rho: &ComplexMatrix) -> Result<(f64, f64)> {
    if rho.rows() != 4 || !rho.is_square() {
        return Err(Error::DimensionMismatch(format!("concurrence needs a 4x4 matrix, got {}x{}", rho.rows(), rho.cols())));
    }
    let defect = rho.hermiticity_defect();
    if !(defect <= tol::HERMITIAN_INPUT) {
        return Err(Error::NotHermitian(defect));
    }
    let h = rho.hermitian_part();
    Ok((concurrence_hermitian(&h)?, clipped_mass(&h)?))
}

fn concurrence_hermitian(rho: &ComplexMatrix) -> Result<f64> {
    let (w, v) = psd_factor(rho)?;
    let trace: f64 = w.iter().sum();
    if w.is_empty() || trace <= 0.0 {
        return Ok(0.0);
    }
    let r = w.len();
    let factor = ComplexMatrix::from_fn(4, r, |i, j| v[(i, j)] * (w[j] / trace).sqrt());
    let yy = tensor_product(&sigma_y(), &sigma_y());
    let tau = ComplexMatrix::from_fn(r, r, |i, j| {
        let mut acc = C64::new(0.0, 0.0);
        for a in 0..4 {
            for b in 0..4 {
                acc += factor[(a, i)] * yy[(a, b)] * factor[(b, j)];
            }
        }
        acc
    });
    let mut s = singular_values(&tau);
    s.resize(4, 0.0);
    s.sort_by(|a, b| b.total_cmp(a));
    Ok((s[0] - s[1] - s[2] - s[3]).max(0.0).min(1.0))
}

// One-sided Jacobi: rotate column pairs until mutually orthogonal; the column
// norms are then the singular values, accurate to rounding in absolute terms.
fn singular_values(a: &ComplexMatrix) -> Vec<f64> {
    let (m, n) = (a.rows(), a.cols());
    let mut u = a.clone();
    for _ in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut app, mut aqq, mut apq) = (0.0, 0.0, C64::new(0.0, 0.0));
                for i in 0..m {
                    app += u[(i, p)].norm_sqr();
                    aqq += u[(i, q)].norm_sqr();
                    apq += u[(i, p)].conj() * u[(i, q)];
                }
                let mag = apq.norm();
                if mag <= 1e-15 * (app * aqq).sqrt() || mag == 0.0 {
                    continue;
                }
                rotated = true;
                let phase = apq / mag;
                let zeta = (aqq - app) / (2.0 * mag);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (u[(i, p)], u[(i, q)]);
                    u[(i, p)] = x * c - y * phase.conj() * s;
                    u[(i, q)] = x * phase * s + y * c;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    (0..n).map(|j| (0..m).map(|i| u[(i, j)].norm_sqr()).sum::<f64>().sqrt()).collect()
}

/// Concurrence of a two-qubit series; error bars from the block jackknife.
pub fn concurrence(series: &DensityMatrixSeries) -> Result<ObservableSeries> {
    if series.dim() != 4 {
        return Err(Error::DimensionMismatch(format!("concurrence needs two qubits, series has dimension {}", series.dim())));
    }
    let mut clipped = Vec::with_capacity(series.rho.len());
    for r in &series.rho {
        clipped.push(concurrence_of(r)?.1);
    }
    let mut out = map_series(series, "concurrence".into(), |r| concurrence_hermitian(r).unwrap_or(f64::NAN));
    if out.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue("concurrence".into()));
    }
    out.clipped = clipped;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{bell_phi_plus, excited, on_qubit_a, sigma_x, sigma_z, ComplexVector, I, ONE, ZERO};
    use nalgebra::Matrix4;
    use proptest::prelude::*;

    fn deterministic(rho: ComplexMatrix) -> DensityMatrixSeries {
        DensityMatrixSeries {
            grid: TimeGrid::new(0.1, 0.1).unwrap(),
            rho: vec![rho.clone(), rho],
            stderr: vec![0.0; 2],
            k: 0,
            rejected: 0,
            blocks: vec![],
        }
    }

    fn werner(p: f64) -> ComplexMatrix {
        let bell = bell_phi_plus().projector();
        &(&bell * p) + &(&ComplexMatrix::identity(4) * ((1.0 - p) / 4.0))
    }

    fn ket(amps: &[C64]) -> ComplexVector {
        ComplexVector::new(amps.to_vec()).unwrap().normalized()
    }

    // Brute force: eigenvalues of the non-Hermitian product ρρ̃ by nalgebra.
    fn brute_concurrence(rho: &ComplexMatrix) -> f64 {
        let yy = tensor_product(&sigma_y(), &sigma_y());
        let tilde = &(&yy * &rho.conj()) * &yy;
        let prod = rho * &tilde;
        let m = Matrix4::from_fn(|i, j| prod[(i, j)]);
        let ev = m.schur().eigenvalues().unwrap();
        let mut l: Vec<f64> = ev.iter().map(|z| z.re.max(0.0).sqrt()).collect();
        l.sort_by(|a, b| b.total_cmp(a));
        (l[0] - l[1] - l[2] - l[3]).max(0.0)
    }

    fn qubit_unitary(a: f64, b: f64, c: f64, phase: f64) -> ComplexMatrix {
        let r = (a * a + b * b + c * c).sqrt().max(1e-300);
        let gen = &(&(&sigma_x() * (a / r)) + &(&sigma_y() * (b / r))) + &(&sigma_z() * (c / r));
        let u = &(&ComplexMatrix::identity(2) * C64::from(r.cos())) + &(&gen * (I * r.sin()));
        &u * C64::from_polar(1.0, phase)
    }

    fn random_state(entries: &[(f64, f64)]) -> ComplexMatrix {
        let w = ComplexMatrix::from_fn(4, 4, |i, j| C64::new(entries[4 * i + j].0, entries[4 * i + j].1));
        let rho = &w * &w.dagger();
        let tr = rho.trace().re;
        &rho * (1.0 / tr)
    }

    #[test]
    fn populations_of_simple_states() {
        let p = population(&deterministic(excited().projector()), 0).unwrap();
        assert_eq!(p.values, vec![1.0; 2]);
        let half = population(&deterministic(&ComplexMatrix::identity(2) * 0.5), 0).unwrap();
        assert_eq!(half.values, vec![0.5; 2]);
        let bell = deterministic(bell_phi_plus().projector());
        for q in 0..2 {
            assert!((population(&bell, q).unwrap().values[0] - 0.5).abs() < 1e-15);
        }
        assert!(population(&bell, 2).is_err());
        assert!(population(&deterministic(excited().projector()), 1).is_err());
    }

    #[test]
    fn coherence_is_phase_blind() {
        for phi in [0.0, 0.7, 2.0, -3.0] {
            let psi = ket(&[ONE, C64::from_polar(1.0, phi)]);
            let c = coherence(&deterministic(psi.projector()), 0).unwrap();
            assert!((c.values[0] - 0.5).abs() < 1e-15);
        }
        let diag = ComplexMatrix::diag(&[C64::from(0.3), C64::from(0.7)]);
        assert_eq!(coherence(&deterministic(diag), 0).unwrap().values[0], 0.0);
    }

    #[test]
    fn concurrence_reference_values() {
        assert!((concurrence_of(&bell_phi_plus().projector()).unwrap().0 - 1.0).abs() < 1e-12);
        let both = ComplexVector::basis(4, 3).projector();
        assert_eq!(concurrence_of(&both).unwrap().0, 0.0);
        let w = werner(0.5);
        let c = concurrence_of(&w).unwrap().0;
        assert!((c - 0.25).abs() < 1e-10, "{c}");
        assert!((brute_concurrence(&w) - 0.25).abs() < 1e-10);
        for p in [0.0f64, 0.2, 1.0 / 3.0, 0.6, 0.9] {
            let expect = ((3.0 * p - 1.0) / 2.0).max(0.0);
            assert!((concurrence_of(&werner(p)).unwrap().0 - expect).abs() < 1e-10, "p = {p}");
        }
    }

    #[test]
    fn non_hermitian_input_is_rejected() {
        let mut m = werner(0.5);
        m[(0, 1)] = C64::new(1e-6, 0.0);
        assert!(matches!(concurrence_of(&m), Err(Error::NotHermitian(_))));
        assert!(concurrence_of(&ComplexMatrix::identity(2)).is_err());
    }

    #[test]
    fn psd_projection_clips_and_renormalizes() {
        let m = ComplexMatrix::diag(&[C64::from(0.6), C64::from(0.5), C64::from(-0.1), ZERO]);
        let (p, clipped) = project_psd(&m).unwrap();
        assert!((clipped - 0.1).abs() < 1e-15);
        assert!((p.trace().re - 1.0).abs() < 1e-15);
        assert!(p[(2, 2)].norm() < 1e-15);
        assert!((p[(0, 0)].re - 0.6 / 1.1).abs() < 1e-15);
    }

    #[test]
    fn matches_brute_force_on_random_states() {
        let mut rng_state = 12345u64;
        let mut next = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((rng_state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for _ in 0..50 {
            let entries: Vec<(f64, f64)> = (0..16).map(|_| (next(), next())).collect();
            let rho = random_state(&entries);
            let (c, _) = concurrence_of(&rho).unwrap();
            assert!((c - brute_concurrence(&rho)).abs() < 1e-9);
        }
    }

    #[test]
    fn series_concurrence_and_population_sum() {
        let bell = deterministic(bell_phi_plus().projector());
        let c = concurrence(&bell).unwrap();
        assert!((c.values[0] - 1.0).abs() < 1e-12);
        assert_eq!(c.stderr, vec![0.0; 2]);
        assert!(concurrence(&deterministic(excited().projector())).is_err());
        let rho = deterministic(random_state(&[(0.3, 0.1); 16].iter().enumerate().map(|(i, x)| (x.0 * i as f64, x.1 - 0.01 * i as f64)).collect::<Vec<_>>()));
        for q in 0..2 {
            let e = population(&rho, q).unwrap().values[0];
            let g = ground_population(&rho, q).unwrap().values[0];
            let tr = reduced_qubit(&rho.rho[0], q).unwrap().trace().re;
            assert!((e + g - tr).abs() < 1e-14);
        }
    }

    fn entries() -> impl Strategy<Value = Vec<(f64, f64)>> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 16)
    }

    proptest! {
        #[test]
        fn local_unitary_invariance(e in entries(), u in proptest::array::uniform4(-3.0f64..3.0), v in proptest::array::uniform4(-3.0f64..3.0)) {
            let rho = random_state(&e);
            let ua = qubit_unitary(u[0], u[1], u[2], u[3]);
            let ub = qubit_unitary(v[0], v[1], v[2], v[3]);
            let uab = tensor_product(&ua, &ub);
            let rotated = &(&uab * &rho) * &uab.dagger();
            let c0 = concurrence_of(&rho).unwrap().0;
            let c1 = concurrence_of(&rotated.hermitian_part()).unwrap().0;
            prop_assert!((c0 - c1).abs() <= 1e-10, "{} vs {}", c0, c1);
        }

        #[test]
        fn pure_state_invariance(a in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4), u in proptest::array::uniform4(-3.0f64..3.0)) {
            let raw: Vec<C64> = a.iter().map(|&(r, i)| C64::new(r, i)).collect();
            prop_assume!(raw.iter().map(|z| z.norm_sqr()).sum::<f64>() > 0.25);
            let psi = ket(&raw);
            let rho = psi.projector();
            let ua = on_qubit_a(&qubit_unitary(u[0], u[1], u[2], u[3]));
            let rotated = &(&ua * &rho) * &ua.dagger();
            let c0 = concurrence_of(&rho).unwrap().0;
            let c1 = concurrence_of(&rotated.hermitian_part()).unwrap().0;
            prop_assert!((c0 - c1).abs() <= 1e-10);
            // Pure states: C = 2|ad − bc|.
            let s = psi.as_slice();
            let direct = 2.0 * (s[0] * s[3] - s[1] * s[2]).norm();
            prop_assert!((c0 - direct).abs() <= 1e-10, "{} vs {}", c0, direct);
        }

        #[test]
        fn separable_mixtures_have_zero_concurrence(
            parts in proptest::collection::vec(((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0),
                                                (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 0.05f64..1.0), 1..6)
        ) {
            let mut rho = ComplexMatrix::zeros(4, 4);
            let mut total = 0.0;
            for ((a0, a1, a2, a3), (b0, b1, b2, b3), w) in parts {
                prop_assume!(a0 * a0 + a1 * a1 + a2 * a2 + a3 * a3 > 0.25);
                prop_assume!(b0 * b0 + b1 * b1 + b2 * b2 + b3 * b3 > 0.25);
                let a = ket(&[C64::new(a0, a1), C64::new(a2, a3)]);
                let b = ket(&[C64::new(b0, b1), C64::new(b2, b3)]);
                rho = &rho + &(&a.kron(&b).projector() * w);
                total += w;
            }
            let rho = &rho * (1.0 / total);
            prop_assert!(concurrence_of(&rho).unwrap().0 <= 1e-10);
        }
    }
}
