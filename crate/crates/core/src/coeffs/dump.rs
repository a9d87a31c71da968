//! Binary coefficient dump.
//!
//! Layout: 8-byte magic, `u32` version, `u64` header length, a JSON header,
//! `u64` value count, then that many complex values as little-endian
//! `(re, im)` `f64` pairs. One-qubit dumps store `N` then `M` on the stage
//! grid; two-qubit dumps store the twelve moments per stage, stage-major.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ChannelKernels, Coefficients, OneQubitCoeffs, TwoQubitCoeffs};
use crate::{Error, Result, TimeGrid, C64};

pub const DUMP_MAGIC: &[u8; 8] = b"PQSDCOEF";
pub const DUMP_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    n_qubits: usize,
    t_max: f64,
    dt: f64,
    n_steps: usize,
    omega: [f64; 2],
    kappa: [f64; 2],
    kernels: ChannelKernels,
}

fn to_bytes(c: &Coefficients) -> Vec<u8> {
    let grid = c.grid();
    let (header, values): (Header, Vec<C64>) = match c {
        Coefficients::One(one) => {
            let (n, m) = one.stage_tables();
            (
                Header {
                    n_qubits: 1,
                    t_max: grid.t_max(),
                    dt: grid.dt(),
                    n_steps: grid.n_steps(),
                    omega: [one.omega_s(); 2],
                    kappa: [1.0, 0.0],
                    kernels: one.kernels(),
                },
                n.iter().chain(m).copied().collect(),
            )
        }
        Coefficients::Two(two) => (
            Header {
                n_qubits: 2,
                t_max: grid.t_max(),
                dt: grid.dt(),
                n_steps: grid.n_steps(),
                omega: two.omega(),
                kappa: two.kappa(),
                kernels: two.kernels(),
            },
            two.stage_state().iter().flatten().copied().collect(),
        ),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(28 + json.len() + 16 * values.len());
    out.extend_from_slice(DUMP_MAGIC);
    out.extend_from_slice(&DUMP_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

/// Writes `coeffs` atomically: a sibling temp file is renamed into place.
pub fn write_coeffs(path: &Path, coeffs: &Coefficients) -> Result<()> {
    crate::export::write_atomic(path, &to_bytes(coeffs))
}

struct Cursor<'a>(&'a [u8]);

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.0.len() < n {
            return Err(Error::Dump(format!("truncated while reading {what}")));
        }
        let (head, rest) = self.0.split_at(n);
        self.0 = rest;
        Ok(head)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

fn from_bytes(bytes: &[u8]) -> Result<Coefficients> {
    let mut cur = Cursor(bytes);
    if cur.take(8, "magic")? != DUMP_MAGIC {
        return Err(Error::Dump("bad magic".into()));
    }
    let version = u32::from_le_bytes(cur.take(4, "version")?.try_into().unwrap());
    if version != DUMP_VERSION {
        return Err(Error::Dump(format!("unsupported version {version}")));
    }
    let hlen = cur.u64("header length")? as usize;
    let header: Header =
        serde_json::from_slice(cur.take(hlen, "header")?).map_err(|e| Error::Dump(format!("header: {e}")))?;
    let grid = TimeGrid::new(header.t_max, header.dt).map_err(|e| Error::Dump(e.to_string()))?;
    if grid.n_steps() != header.n_steps {
        return Err(Error::Dump("grid step count disagrees with t_max/dt".into()));
    }
    let stages = grid.stage_grid().len();
    let count = cur.u64("value count")? as usize;
    let expected = match header.n_qubits {
        1 => 2 * stages,
        2 => 12 * stages,
        n => return Err(Error::Dump(format!("unsupported qubit count {n}"))),
    };
    if count != expected {
        return Err(Error::Dump(format!("expected {expected} values, found {count}")));
    }
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        let re = cur.f64("values")?;
        let im = cur.f64("values")?;
        values.push(C64::new(re, im));
    }
    if !cur.0.is_empty() {
        return Err(Error::Dump(format!("{} trailing bytes", cur.0.len())));
    }
    Ok(match header.n_qubits {
        1 => {
            let m = values.split_off(stages);
            Coefficients::One(OneQubitCoeffs::from_tables(grid, header.omega[0], header.kernels, values, m))
        }
        _ => {
            let state = values.chunks_exact(12).map(|c| std::array::from_fn(|i| c[i])).collect();
            Coefficients::Two(TwoQubitCoeffs::from_tables(grid, header.kernels, header.omega, header.kappa, state))
        }
    })
}

pub fn read_coeffs(path: &Path) -> Result<Coefficients> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}
