//! Two-qubit coefficients in the operator basis
//! `O₁ = σ₋^A, O₂ = σ₋^B, O₃ = σ_z^A σ₋^B, O₄ = σ₋^A σ_z^B, O₅ = σ₋^A σ₋^B`.
//!
//! The two-time functions `n_j(t,s), m_j(t,s)` obey
//! `∂_t p = R(N(t); p) − i·X(t,s)·ℓ` with `X = N₅` for the `n` family and
//! `X = N₆` for the `m` family, where `R` is the linear map in [`Model::r`]
//! and `ℓ = (κ₂, κ₁, κ₁, κ₂)/2` are the components of `L†O₅`. The
//! three-time functions obey `∂_t n₅ = c_G n₅ + d_n(t,s) N₅(t,s′)` and
//! likewise for `n₆, m₅, m₆`.
//!
//! Integrating against the exponential kernels closes the hierarchy on twelve
//! single-time quantities: `N_j, M_j` (j = 1..4) and
//! `Φ₁ = ∫α M₅, Φ₂ = ∫α N₅, Φ₃ = ∫β M₆, Φ₄ = ∫β N₆`, where
//! `N₅(t,s′) = ∫ds α(t,s) n₅(t,s,s′)` and so on. That closed system is what
//! [`TwoQubitCoeffs`] solves. [`SliceMarcher`] marches the two- and
//! three-time slices themselves, which the tests use to check the closure by
//! trapezoidal quadrature.

use super::{rk4_step, ChannelKernels, ExpKernel, ModelParams};
use crate::noise::CorrelationKernel;
use crate::operators::{I, ZERO};
use crate::{tol, Error, Result, TimeGrid, C64};

/// `N₅(t,t), N₆(t,t), M₅(t,t), M₆(t,t)`: the sources of the noise-functional
/// `O₅` amplitudes.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Boundary {
    pub n5: C64,
    pub n6: C64,
    pub m5: C64,
    pub m6: C64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Model {
    pub omega: [f64; 2],
    pub kappa: [f64; 2],
    pub a: ExpKernel,
    pub b: ExpKernel,
}

/// Quantities derived from the twelve moments at one instant.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Derived {
    pub boundary: Boundary,
    pub c_g: C64,
    pub d_n: C64,
    pub d_m: C64,
}

fn cross(x: &[C64; 4], p: &[C64; 4]) -> C64 {
    x[0] * p[2] - x[2] * p[0] + x[1] * p[3] - x[3] * p[1]
}

fn split(y: &[C64; 12]) -> ([C64; 4], [C64; 4], [C64; 4]) {
    (
        [y[0], y[1], y[2], y[3]],
        [y[4], y[5], y[6], y[7]],
        [y[8], y[9], y[10], y[11]],
    )
}

impl Model {
    /// Drift of a coefficient column `p` given the integrated `N`.
    pub fn r(&self, n: &[C64; 4], p: &[C64; 4]) -> [C64; 4] {
        let [k1, k2] = self.kappa;
        let (wa, wb) = (I * self.omega[0], I * self.omega[1]);
        [
            wa * p[0] + (n[0] * p[0] + n[3] * p[3]) * k1 + (-n[0] * p[2] + n[2] * p[0] + n[2] * p[3] + n[3] * p[2]) * k2,
            wb * p[1] + (-n[1] * p[3] + n[2] * p[3] + n[3] * p[1] + n[3] * p[2]) * k1 + (n[1] * p[1] + n[2] * p[2]) * k2,
            wb * p[2] + (-n[1] * p[0] + n[2] * p[0] + n[3] * p[1] + n[3] * p[2]) * k1 + (n[1] * p[2] + n[2] * p[1]) * k2,
            wa * p[3] + (n[0] * p[3] + n[3] * p[0]) * k1 + (-n[0] * p[1] + n[2] * p[0] + n[2] * p[3] + n[3] * p[1]) * k2,
        ]
    }

    pub fn ell(&self) -> [C64; 4] {
        let [k1, k2] = self.kappa;
        [k2, k1, k1, k2].map(|k| C64::from(0.5 * k))
    }

    /// `n(t,t)` from the integrated `M(t)`.
    pub fn n_diagonal(&self, m: &[C64; 4]) -> [C64; 4] {
        let [k1, k2] = self.kappa;
        [C64::from(k1) - I * m[0], C64::from(k2) - I * m[1], -I * m[2], -I * m[3]]
    }

    pub fn d_of(&self, p: &[C64; 4]) -> C64 {
        let [k1, k2] = self.kappa;
        (p[0] - p[3]) * k1 + (p[1] - p[2]) * k2
    }

    pub fn derived(&self, y: &[C64; 12]) -> Derived {
        let [k1, k2] = self.kappa;
        let (n, m, phi) = split(y);
        let boundary = Boundary {
            n5: -I * 2.0 * (n[2] * k1 + n[3] * k2) - cross(&m, &n) * 2.0 - I * phi[0],
            n6: -I * phi[1],
            m5: -I * 2.0 * (m[2] * k1 + m[3] * k2) - I * phi[2],
            m6: -cross(&n, &m) * 2.0 - I * phi[3],
        };
        Derived {
            boundary,
            c_g: I * (self.omega[0] + self.omega[1]) + (n[0] + n[3]) * k1 + (n[1] + n[2]) * k2,
            d_n: self.d_of(&n),
            d_m: self.d_of(&m),
        }
    }

    pub fn rhs(&self, y: &[C64; 12]) -> [C64; 12] {
        let (n, m, phi) = split(y);
        let d = self.derived(y);
        let (a, b) = (self.a, self.b);
        let ell = self.ell();
        let nd = self.n_diagonal(&m);
        let rn = self.r(&n, &n);
        let rm = self.r(&n, &m);
        let mut out = [ZERO; 12];
        for j in 0..4 {
            out[j] = nd[j] * a.amp + a.rate * n[j] + rn[j] - I * ell[j] * phi[1];
            out[4 + j] = -I * b.amp * n[j] + b.rate * m[j] + rm[j] - I * ell[j] * phi[3];
        }
        let bd = d.boundary;
        out[8] = bd.m5 * a.amp + (a.rate + b.rate + d.c_g) * phi[0] + (d.d_m - I * b.amp) * phi[1];
        out[9] = bd.n5 * a.amp + (a.rate * 2.0 + d.c_g + d.d_n) * phi[1] - I * a.amp * phi[0];
        out[10] = bd.m6 * b.amp + (b.rate * 2.0 + d.c_g) * phi[2] + (d.d_m - I * b.amp) * phi[3];
        out[11] = bd.n6 * b.amp + (a.rate + b.rate + d.c_g + d.d_n) * phi[3] - I * a.amp * phi[2];
        out
    }
}

/// Solved two-qubit coefficients on the stage grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoQubitCoeffs {
    grid: TimeGrid,
    kernels: ChannelKernels,
    model: Model,
    state: Vec<[C64; 12]>,
}

impl TwoQubitCoeffs {
    pub fn solve(params: &ModelParams, kernels: ChannelKernels, grid: TimeGrid) -> Result<Self> {
        let model = Model {
            omega: [params.omega_a(), params.omega_b()],
            kappa: [params.kappa1, params.kappa2],
            a: ExpKernel::from(&kernels.z),
            b: ExpKernel::from(&kernels.y),
        };
        let stages = grid.stage_grid();
        let h = stages.dt();
        let mut state = Vec::with_capacity(stages.len());
        let mut y = [ZERO; 12];
        state.push(y);
        for j in 1..stages.len() {
            y = rk4_step(&y, h, |v| model.rhs(v));
            let t = stages.time(j);
            if y.iter().any(|z| !z.is_finite()) {
                return Err(Error::NonFiniteValue(format!("two-qubit moments at t = {t}")));
            }
            let big = y[..4].iter().map(|z| z.norm()).fold(0.0, f64::max);
            if big > tol::POLE_CEILING {
                return Err(Error::PoleEncountered { t, magnitude: big });
            }
            state.push(y);
        }
        Ok(Self {
            grid,
            kernels,
            model,
            state,
        })
    }

    pub(crate) fn from_tables(grid: TimeGrid, kernels: ChannelKernels, omega: [f64; 2], kappa: [f64; 2], state: Vec<[C64; 12]>) -> Self {
        Self {
            grid,
            kernels,
            model: Model {
                omega,
                kappa,
                a: ExpKernel::from(&kernels.z),
                b: ExpKernel::from(&kernels.y),
            },
            state,
        }
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn kernels(&self) -> ChannelKernels {
        self.kernels
    }

    pub fn kappa(&self) -> [f64; 2] {
        self.model.kappa
    }

    pub fn omega(&self) -> [f64; 2] {
        self.model.omega
    }

    pub(crate) fn model(&self) -> &Model {
        &self.model
    }

    pub(crate) fn stage_state(&self) -> &[[C64; 12]] {
        &self.state
    }

    /// `N_1..N_4` at grid point `k`.
    pub fn big_n(&self, k: usize) -> [C64; 4] {
        split(&self.state[2 * k]).0
    }

    /// `M_1..M_4` at grid point `k`.
    pub fn big_m(&self, k: usize) -> [C64; 4] {
        split(&self.state[2 * k]).1
    }

    /// `Φ₁..Φ₄` at grid point `k`.
    pub fn phi(&self, k: usize) -> [C64; 4] {
        split(&self.state[2 * k]).2
    }

    pub fn big_n_stage(&self, j: usize) -> [C64; 4] {
        split(&self.state[j]).0
    }

    pub fn big_m_stage(&self, j: usize) -> [C64; 4] {
        split(&self.state[j]).1
    }

    pub fn boundary(&self, k: usize) -> Boundary {
        self.model.derived(&self.state[2 * k]).boundary
    }

    pub(crate) fn derived_stage(&self, j: usize) -> Derived {
        self.model.derived(&self.state[j])
    }

    /// Marches the multi-time slices alongside the stored moments.
    pub fn slices(&self, three_time: bool) -> Result<SliceMarcher<'_>> {
        SliceMarcher::new(self, three_time, tol::SLICE_MEMORY_CAP)
    }

    /// Full `(t,s)` tables of `n_j` and `m_j` for `s ≤ t`.
    pub fn two_time_table(&self, memory_cap: usize) -> Result<TwoTimeTable> {
        let len = self.grid.len();
        let bytes = len * (len + 1) / 2 * 8 * std::mem::size_of::<C64>();
        if bytes > memory_cap {
            return Err(Error::MemoryCap {
                requested: bytes,
                cap: memory_cap,
            });
        }
        let mut marcher = SliceMarcher::new(self, false, memory_cap)?;
        let mut rows = Vec::with_capacity(len);
        loop {
            rows.push(marcher.two.clone());
            if !marcher.advance()? {
                break;
            }
        }
        Ok(TwoTimeTable { grid: self.grid, rows })
    }
}

pub fn solve_two_qubit_coeffs(params: &ModelParams, grid: TimeGrid) -> Result<TwoQubitCoeffs> {
    params.validate()?;
    if params.n_qubits != 2 {
        return Err(Error::InvalidArgument("two-qubit solver needs n_qubits = 2".into()));
    }
    TwoQubitCoeffs::solve(params, params.kernels(), grid)
}

/// Coefficients for qubits coupled straight to `detector_kernel`, with the
/// second noise layer removed.
pub fn direct_coupling_coeffs(params: &ModelParams, detector_kernel: &CorrelationKernel, grid: TimeGrid) -> Result<TwoQubitCoeffs> {
    params.validate()?;
    if !params.cut_probe || params.n_qubits != 2 {
        return Err(Error::InvalidArgument(
            "direct coupling needs cut_probe = true and n_qubits = 2".into(),
        ));
    }
    let kernels = ChannelKernels {
        z: *detector_kernel,
        y: CorrelationKernel::Zero,
    };
    TwoQubitCoeffs::solve(params, kernels, grid)
}

/// `n_j(t,s)` and `m_j(t,s)` for every pair of grid points `s ≤ t`.
#[derive(Clone, Debug)]
pub struct TwoTimeTable {
    grid: TimeGrid,
    rows: Vec<Vec<[C64; 8]>>,
}

impl TwoTimeTable {
    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn n(&self, t: usize, s: usize) -> [C64; 4] {
        let r = &self.rows[t][s];
        [r[0], r[1], r[2], r[3]]
    }

    pub fn m(&self, t: usize, s: usize) -> [C64; 4] {
        let r = &self.rows[t][s];
        [r[4], r[5], r[6], r[7]]
    }
}

/// Current-`t` slices: `n_j, m_j(t,s)`, `N₅, N₆, M₅, M₆(t,s′)` and optionally
/// `n₅, n₆, m₅, m₆(t,s,s′)`, for grid points `s, s′ ≤ t`.
pub struct SliceMarcher<'a> {
    coeffs: &'a TwoQubitCoeffs,
    k: usize,
    two: Vec<[C64; 8]>,
    big: Vec<[C64; 4]>,
    three: Option<Vec<[C64; 4]>>,
    stride: usize,
}

impl<'a> SliceMarcher<'a> {
    pub fn new(coeffs: &'a TwoQubitCoeffs, three_time: bool, memory_cap: usize) -> Result<Self> {
        let len = coeffs.grid.len();
        let three = if three_time {
            let bytes = (len * len + len) * 4 * std::mem::size_of::<C64>();
            if bytes > memory_cap {
                return Err(Error::MemoryCap {
                    requested: bytes,
                    cap: memory_cap,
                });
            }
            // Row-major (s, s′) block, then the s → s′⁻ limits at the diagonal.
            Some(vec![[ZERO; 4]; len * len + len])
        } else {
            None
        };
        let mut marcher = Self {
            coeffs,
            k: 0,
            two: Vec::with_capacity(len),
            big: Vec::with_capacity(len),
            three,
            stride: len,
        };
        marcher.append_diagonal();
        Ok(marcher)
    }

    /// Index of the current time on the grid.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn t(&self) -> f64 {
        self.coeffs.grid.time(self.k)
    }

    pub fn n(&self, s: usize) -> [C64; 4] {
        let r = &self.two[s];
        [r[0], r[1], r[2], r[3]]
    }

    pub fn m(&self, s: usize) -> [C64; 4] {
        let r = &self.two[s];
        [r[4], r[5], r[6], r[7]]
    }

    /// `[N₅, N₆, M₅, M₆](t, s′)`.
    pub fn integrated(&self, s_prime: usize) -> [C64; 4] {
        self.big[s_prime]
    }

    /// `[n₅, n₆, m₅, m₆](t, s, s′)`, when three-time slices are kept.
    pub fn three_time(&self, s: usize, s_prime: usize) -> Option<[C64; 4]> {
        self.three.as_ref().map(|v| v[s * self.stride + s_prime])
    }

    /// Limit of the three-time slice as `s → s′` from below. The boundary
    /// column and the initial row need not agree at the corner.
    pub fn three_time_left(&self, s_prime: usize) -> Option<[C64; 4]> {
        self.three.as_ref().map(|v| v[self.stride * self.stride + s_prime])
    }

    fn moments(&self, j: usize) -> ([C64; 4], [C64; 4], Derived) {
        let st = &self.coeffs.state[j];
        let (n, m, _) = split(st);
        (n, m, self.coeffs.model.derived(st))
    }

    /// Entries born at the new time `t_k`: the `s = t` diagonal, the `s′ = t`
    /// boundary column and the `s = t` initial row.
    fn append_diagonal(&mut self) {
        let k = self.k;
        let model = self.coeffs.model;
        let (n, m, d) = self.moments(2 * k);
        let nd = model.n_diagonal(&m);
        self.two.push([nd[0], nd[1], nd[2], nd[3], -I * n[0], -I * n[1], -I * n[2], -I * n[3]]);
        let b = d.boundary;
        self.big.push([b.n5, b.n6, b.m5, b.m6]);
        let [k1, k2] = model.kappa;
        if let Some(three) = self.three.as_mut() {
            for s in 0..=k {
                let r = &self.two[s];
                let (ns, ms) = ([r[0], r[1], r[2], r[3]], [r[4], r[5], r[6], r[7]]);
                let [n5, n6, m5_, m6_] = self.big[s];
                let at = if s < k { s * self.stride + k } else { self.stride * self.stride + k };
                three[at] = [
                    -I * 2.0 * (ns[2] * k1 + ns[3] * k2) - I * m5_ - cross(&m, &ns) * 2.0,
                    -I * n5,
                    -I * 2.0 * (ms[2] * k1 + ms[3] * k2) - I * m6_,
                    -I * n6 - cross(&n, &ms) * 2.0,
                ];
            }
            for sp in 0..=k {
                let [n5, n6, m5_, m6_] = self.big[sp];
                three[k * self.stride + sp] = [-I * m5_, -I * m6_, -I * n5, -I * n6];
            }
        }
    }

    fn derivative(&self, j: usize, two: &[[C64; 8]], big: &[[C64; 4]], three: Option<&[[C64; 4]]>) -> (Vec<[C64; 8]>, Vec<[C64; 4]>, Option<Vec<[C64; 4]>>) {
        let model = &self.coeffs.model;
        let (n, _, d) = self.moments(j);
        let ell = model.ell();
        let (a, b) = (model.a, model.b);
        let dtwo = two
            .iter()
            .zip(big)
            .map(|(r, x)| {
                let rn = model.r(&n, &[r[0], r[1], r[2], r[3]]);
                let rm = model.r(&n, &[r[4], r[5], r[6], r[7]]);
                std::array::from_fn(|i| {
                    if i < 4 {
                        rn[i] - I * ell[i] * x[0]
                    } else {
                        rm[i - 4] - I * ell[i - 4] * x[1]
                    }
                })
            })
            .collect();
        let dbig = big
            .iter()
            .map(|&[n5, n6, m5, m6]| {
                [
                    -I * a.amp * m5 + (a.rate + d.c_g + d.d_n) * n5,
                    -I * a.amp * m6 + (a.rate + d.c_g + d.d_n) * n6,
                    -I * b.amp * n5 + (b.rate + d.c_g) * m5 + d.d_m * n5,
                    -I * b.amp * n6 + (b.rate + d.c_g) * m6 + d.d_m * n6,
                ]
            })
            .collect();
        let dthree = three.map(|v| {
            let live = two.len();
            let mut out = vec![[ZERO; 4]; live * self.stride + live];
            let rate = |c: [C64; 4], s: usize, sp: usize| {
                let r = &two[s];
                let dn = model.d_of(&[r[0], r[1], r[2], r[3]]);
                let dm = model.d_of(&[r[4], r[5], r[6], r[7]]);
                let [n5, n6, _, _] = big[sp];
                [
                    d.c_g * c[0] + dn * n5,
                    d.c_g * c[1] + dn * n6,
                    d.c_g * c[2] + dm * n5,
                    d.c_g * c[3] + dm * n6,
                ]
            };
            for s in 0..live {
                for sp in 0..live {
                    let idx = s * self.stride + sp;
                    out[idx] = rate(v[idx], s, sp);
                }
            }
            let tail = live * self.stride;
            for sp in 0..live {
                out[tail + sp] = rate(v[tail + sp], sp, sp);
            }
            out
        });
        (dtwo, dbig, dthree)
    }

    /// Steps to the next grid point; `false` once the grid is exhausted.
    pub fn advance(&mut self) -> Result<bool> {
        if self.k >= self.coeffs.grid.n_steps() {
            return Ok(false);
        }
        let h = self.coeffs.grid.dt();
        let j = 2 * self.k;
        let live = self.two.len();
        let corner = self.stride * self.stride;
        let three_live = self.three.as_ref().map(|v| {
            let mut x = v[..live * self.stride].to_vec();
            x.extend_from_slice(&v[corner..corner + live]);
            x
        });

        fn axpy<const D: usize>(base: &[[C64; D]], k: &[[C64; D]], a: f64) -> Vec<[C64; D]> {
            base.iter()
                .zip(k)
                .map(|(x, y)| std::array::from_fn(|i| x[i] + y[i] * a))
                .collect()
        }

        let (t1, b1, r1) = self.derivative(j, &self.two, &self.big, three_live.as_deref());
        let (t2, b2, r2) = {
            let (tw, bg) = (axpy(&self.two, &t1, h / 2.0), axpy(&self.big, &b1, h / 2.0));
            let th = three_live.as_ref().zip(r1.as_ref()).map(|(x, k)| axpy(x, k, h / 2.0));
            self.derivative(j + 1, &tw, &bg, th.as_deref())
        };
        let (t3, b3, r3) = {
            let (tw, bg) = (axpy(&self.two, &t2, h / 2.0), axpy(&self.big, &b2, h / 2.0));
            let th = three_live.as_ref().zip(r2.as_ref()).map(|(x, k)| axpy(x, k, h / 2.0));
            self.derivative(j + 1, &tw, &bg, th.as_deref())
        };
        let (t4, b4, r4) = {
            let (tw, bg) = (axpy(&self.two, &t3, h), axpy(&self.big, &b3, h));
            let th = three_live.as_ref().zip(r3.as_ref()).map(|(x, k)| axpy(x, k, h));
            self.derivative(j + 2, &tw, &bg, th.as_deref())
        };

        fn combine<const D: usize>(x: &mut [[C64; D]], k: [&[[C64; D]]; 4], h: f64) {
            for (i, xi) in x.iter_mut().enumerate() {
                for c in 0..D {
                    xi[c] += (k[0][i][c] + (k[1][i][c] + k[2][i][c]) * 2.0 + k[3][i][c]) * (h / 6.0);
                }
            }
        }
        combine(&mut self.two, [&t1, &t2, &t3, &t4], h);
        combine(&mut self.big, [&b1, &b2, &b3, &b4], h);
        if let (Some(three), Some(mut x), Some(r1), Some(r2), Some(r3), Some(r4)) =
            (self.three.as_mut(), three_live, r1, r2, r3, r4)
        {
            combine(&mut x, [&r1, &r2, &r3, &r4], h);
            let tail = live * self.stride;
            three[..tail].copy_from_slice(&x[..tail]);
            three[corner..corner + live].copy_from_slice(&x[tail..]);
        }

        self.k += 1;
        let t = self.t();
        for (s, r) in self.two.iter().enumerate() {
            if r.iter().any(|z| !z.is_finite()) {
                return Err(Error::NonFiniteValue(format!("n/m(t = {t}, s = {})", self.coeffs.grid.time(s))));
            }
        }
        if let Some(three) = &self.three {
            if three[corner..corner + live].iter().flatten().any(|z| !z.is_finite()) {
                return Err(Error::NonFiniteValue(format!("three-time diagonal limit at t = {t}")));
            }
            for s in 0..live {
                for sp in 0..live {
                    if three[s * self.stride + sp].iter().any(|z| !z.is_finite()) {
                        let g = self.coeffs.grid;
                        return Err(Error::NonFiniteValue(format!(
                            "three-time slice (t = {t}, s = {}, s' = {})",
                            g.time(s),
                            g.time(sp)
                        )));
                    }
                }
            }
        }
        self.append_diagonal();
        Ok(true)
    }

    fn trapezoid(&self, f: impl FnMut(usize) -> C64) -> C64 {
        self.trapezoid_range(0, self.k, f)
    }

    fn trapezoid_range(&self, lo: usize, hi: usize, mut f: impl FnMut(usize) -> C64) -> C64 {
        if hi <= lo {
            return ZERO;
        }
        let h = self.coeffs.grid.dt();
        let inner: C64 = (lo + 1..hi).map(&mut f).sum();
        (inner + (f(lo) + f(hi)) * 0.5) * h
    }

    /// Trapezoidal `∫₀ᵗ α(t,s) n_j(t,s) ds` and `∫₀ᵗ β(t,s) m_j(t,s) ds`.
    pub fn quadrature_moments(&self) -> ([C64; 4], [C64; 4]) {
        let g = self.coeffs.grid;
        let t = self.t();
        let ks = self.coeffs.kernels;
        let n = std::array::from_fn(|j| self.trapezoid(|s| ks.z.value(t, g.time(s)) * self.two[s][j]));
        let m = std::array::from_fn(|j| self.trapezoid(|s| ks.y.value(t, g.time(s)) * self.two[s][4 + j]));
        (n, m)
    }

    /// Trapezoidal `[N₅, N₆, M₅, M₆](t, s′)` from the three-time slice, split
    /// at `s = s′` where the slice may jump.
    pub fn quadrature_integrated(&self, s_prime: usize) -> Option<[C64; 4]> {
        let three = self.three.as_ref()?;
        let g = self.coeffs.grid;
        let t = self.t();
        let ks = self.coeffs.kernels;
        let left = self.stride * self.stride + s_prime;
        Some(std::array::from_fn(|c| {
            let kernel = if c < 2 { ks.z } else { ks.y };
            let below = self.trapezoid_range(0, s_prime, |s| {
                let idx = if s == s_prime { left } else { s * self.stride + s_prime };
                kernel.value(t, g.time(s)) * three[idx][c]
            });
            let above = self.trapezoid_range(s_prime, self.k, |s| {
                kernel.value(t, g.time(s)) * three[s * self.stride + s_prime][c]
            });
            below + above
        }))
    }

    /// Trapezoidal `Φ₁..Φ₄` from the two-time `N₅, N₆, M₅, M₆` slices.
    pub fn quadrature_phi(&self) -> [C64; 4] {
        let g = self.coeffs.grid;
        let t = self.t();
        let ks = self.coeffs.kernels;
        let pick = [(ks.z, 2), (ks.z, 0), (ks.y, 3), (ks.y, 1)];
        std::array::from_fn(|c| {
            let (kernel, col) = pick[c];
            self.trapezoid(|s| kernel.value(t, g.time(s)) * self.big[s][col])
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::OneQubitCoeffs;

    fn fig3() -> ModelParams {
        ModelParams::two_qubit(1.0, 0.5, 0.5, 5.0, 1.0, 1.0)
    }

    fn max_diff(a: &[C64], b: &[C64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn starts_from_empty_integrals() {
        let c = solve_two_qubit_coeffs(&fig3(), TimeGrid::new(1.0, 0.01).unwrap()).unwrap();
        assert!(c.big_n(0).iter().chain(&c.big_m(0)).all(|z| *z == ZERO));
    }

    #[test]
    fn reduces_to_one_qubit_when_kappa2_vanishes() {
        let grid = TimeGrid::new(10.0, 0.01).unwrap();
        let p = ModelParams::two_qubit(1.0, 0.5, 0.5, 5.0, 1.0, 0.0);
        let two = solve_two_qubit_coeffs(&p, grid).unwrap();
        let one = OneQubitCoeffs::solve(p.kernels(), 1.0, grid).unwrap();
        for k in 0..grid.len() {
            assert!((two.big_n(k)[0] - one.n(k)).norm() < 1e-8);
            assert!((two.big_m(k)[0] - one.m(k)).norm() < 1e-8);
            assert!(two.big_n(k)[1..3].iter().all(|z| z.norm() < 1e-14));
        }
    }

    #[test]
    fn kappa2_zero_two_time_reduction() {
        let grid = TimeGrid::new(3.0, 0.01).unwrap();
        let p = ModelParams::two_qubit(1.0, 0.5, 0.5, 5.0, 1.0, 0.0);
        let two = solve_two_qubit_coeffs(&p, grid).unwrap();
        let table = two.two_time_table(tol::SLICE_MEMORY_CAP).unwrap();
        let one = OneQubitCoeffs::solve(p.kernels(), 1.0, grid).unwrap();
        // One-qubit column: ∂_t n = (iω + N(t)) n from n(s,s) = 1 − iM(s), by
        // RK4 on the stage table.
        for s in (0..grid.len()).step_by(50) {
            let mut n = C64::from(1.0) - I * one.m(s);
            for t in s..grid.len() {
                let got = table.n(t, s);
                assert!((got[0] - n).norm() < 1e-8, "n1({t},{s}) {} vs {n}", got[0]);
                assert!(got[1].norm() < 1e-14 && got[2].norm() < 1e-14);
                if t + 1 < grid.len() {
                    let f = |j: usize, x: C64| (I + one.n_stage(j)) * x;
                    let h = grid.dt();
                    let k1 = f(2 * t, n);
                    let k2 = f(2 * t + 1, n + k1 * (h / 2.0));
                    let k3 = f(2 * t + 1, n + k2 * (h / 2.0));
                    let k4 = f(2 * t + 2, n + k3 * h);
                    n += (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
                }
            }
        }
    }

    #[test]
    fn exchange_symmetry() {
        let c = solve_two_qubit_coeffs(&fig3(), TimeGrid::new(10.0, 0.01).unwrap()).unwrap();
        for k in 0..c.grid().len() {
            let (n, m) = (c.big_n(k), c.big_m(k));
            assert!((n[0] - n[1]).norm() < 1e-10 && (n[2] - n[3]).norm() < 1e-10);
            assert!((m[0] - m[1]).norm() < 1e-10 && (m[2] - m[3]).norm() < 1e-10);
        }
    }

    #[test]
    fn two_time_exchange_symmetry() {
        let c = solve_two_qubit_coeffs(&fig3(), TimeGrid::new(4.0, 0.05).unwrap()).unwrap();
        let table = c.two_time_table(tol::SLICE_MEMORY_CAP).unwrap();
        for t in 0..c.grid().len() {
            for s in 0..=t {
                let (n, m) = (table.n(t, s), table.m(t, s));
                assert!((n[0] - n[1]).norm() < 1e-10 && (n[2] - n[3]).norm() < 1e-10);
                assert!((m[0] - m[1]).norm() < 1e-10 && (m[2] - m[3]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn diagonal_matches_initial_conditions() {
        let c = solve_two_qubit_coeffs(&fig3(), TimeGrid::new(2.0, 0.05).unwrap()).unwrap();
        let mut sl = c.slices(true).unwrap();
        while sl.advance().unwrap() {
            let k = sl.k();
            let (bn, bm) = (c.big_n(k), c.big_m(k));
            let n = sl.n(k);
            assert_eq!(n[0], C64::from(1.0) - I * bm[0]);
            assert_eq!(n[3], -I * bm[3]);
            assert_eq!(sl.m(k)[2], -I * bn[2]);
            let b = c.boundary(k);
            assert_eq!(sl.integrated(k), [b.n5, b.n6, b.m5, b.m6]);
            for sp in 0..=k {
                let [n5, n6, m5, m6] = sl.integrated(sp);
                assert_eq!(sl.three_time(k, sp).unwrap(), [-I * m5, -I * m6, -I * n5, -I * n6]);
            }
            for s in 0..k {
                let col = sl.three_time(s, k).unwrap();
                let ns = sl.n(s);
                let [n5, _, m5, _] = sl.integrated(s);
                let expected = -I * 2.0 * (ns[2] + ns[3]) - I * m5 - cross(&bm, &ns) * 2.0;
                assert_eq!(col[0], expected);
                assert_eq!(col[1], -I * n5);
            }
        }
    }

    #[test]
    fn slice_quadrature_reproduces_moments() {
        // Trapezoid over s is second order, so the residual shrinks ~4x per halving.
        let err = |dt: f64| {
            let c = solve_two_qubit_coeffs(&fig3(), TimeGrid::new(2.0, dt).unwrap()).unwrap();
            let mut sl = c.slices(true).unwrap();
            let mut worst = 0.0f64;
            while sl.advance().unwrap() {
                let k = sl.k();
                let (qn, qm) = sl.quadrature_moments();
                worst = worst.max(max_diff(&qn, &c.big_n(k))).max(max_diff(&qm, &c.big_m(k)));
                worst = worst.max(max_diff(&sl.quadrature_phi(), &c.phi(k)));
                for sp in 0..=k {
                    let q = sl.quadrature_integrated(sp).unwrap();
                    worst = worst.max(max_diff(&q, &sl.integrated(sp)));
                }
            }
            worst
        };
        let (e1, e2) = (err(0.04), err(0.02));
        assert!(e2 < 0.05, "quadrature residual {e2}");
        assert!(e1 / e2 > 3.0, "residual ratio {}", e1 / e2);
    }

    #[test]
    fn zero_detector_kernel_freezes_coefficients() {
        let p = fig3().direct();
        let c = direct_coupling_coeffs(&p, &CorrelationKernel::Zero, TimeGrid::new(3.0, 0.01).unwrap()).unwrap();
        let table = c.two_time_table(tol::SLICE_MEMORY_CAP).unwrap();
        let g = c.grid();
        for t in 0..g.len() {
            assert!(c.big_n(t).iter().all(|z| *z == ZERO));
            for s in 0..=t {
                let phase = (I * (g.time(t) - g.time(s))).exp();
                let n = table.n(t, s);
                assert!((n[0] - phase).norm() < 1e-8 && (n[1] - phase).norm() < 1e-8);
                assert!(n[2].norm() < 1e-14 && n[3].norm() < 1e-14);
                assert!(table.m(t, s).iter().all(|z| z.norm() < 1e-14));
            }
        }
    }

    #[test]
    fn direct_coupling_reaches_markov_plateau() {
        let gamma = 200.0;
        let c_amp = 3.0;
        let p = ModelParams::two_qubit(1.0, 0.5, 0.5, gamma, 1.0, 0.0).direct();
        let kernel = CorrelationKernel::ornstein_uhlenbeck(c_amp, gamma).unwrap();
        let c = direct_coupling_coeffs(&p, &kernel, TimeGrid::new(1.0, 0.001).unwrap()).unwrap();
        assert_eq!(c.big_n(0)[0], ZERO);
        let plateau = c_amp / gamma;
        let n1 = c.big_n(c.grid().n_steps())[0];
        assert!((n1 - plateau).norm() / plateau < 0.05, "{n1} vs {plateau}");
        assert!(c.big_m(c.grid().n_steps()).iter().all(|z| *z == ZERO));
    }

    #[test]
    fn direct_coupling_requires_cut_probe() {
        let kernel = CorrelationKernel::ornstein_uhlenbeck(1.0, 1.0).unwrap();
        assert!(direct_coupling_coeffs(&fig3(), &kernel, TimeGrid::new(1.0, 0.1).unwrap()).is_err());
    }

    #[test]
    fn markov_limit_environment_moments_vanish() {
        // Both layers sharply peaked, each with time integral 0.05.
        let (gamma, weight) = (1000.0, 0.05);
        let ou = CorrelationKernel::ornstein_uhlenbeck(weight * gamma, gamma).unwrap();
        let c = TwoQubitCoeffs::solve(&fig3(), ChannelKernels { z: ou, y: ou }, TimeGrid::new(2.0, 0.0005).unwrap()).unwrap();
        let g = c.grid();
        for k in g.index_of(10.0 / gamma)..g.len() {
            assert!(c.big_m(k).iter().all(|z| z.norm() < 1e-2));
            assert!((c.big_n(k)[0] - c.big_n(g.n_steps())[0]).norm() < 1e-2);
        }
    }

    #[test]
    fn quadrature_sanity_bound() {
        let c = solve_two_qubit_coeffs(&fig3(), TimeGrid::new(3.0, 0.02).unwrap()).unwrap();
        let table = c.two_time_table(tol::SLICE_MEMORY_CAP).unwrap();
        let g = c.grid();
        let alpha = c.kernels().z;
        for t in 1..g.len() {
            let weight: f64 = (0..=t).map(|s| alpha.value(g.time(t), g.time(s)).norm()).sum::<f64>() * g.dt();
            for j in 0..4 {
                let peak = (0..=t).map(|s| table.n(t, s)[j].norm()).fold(0.0, f64::max);
                assert!(c.big_n(t)[j].norm() <= weight * peak * 1.01 + 1e-12);
            }
        }
    }

    #[test]
    fn memory_guard() {
        let c = solve_two_qubit_coeffs(&fig3(), TimeGrid::new(2.0, 0.01).unwrap()).unwrap();
        assert!(matches!(SliceMarcher::new(&c, true, 1024), Err(Error::MemoryCap { .. })));
        assert!(matches!(c.two_time_table(1024), Err(Error::MemoryCap { .. })));
    }
}
