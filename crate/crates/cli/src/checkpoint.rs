//! Bit-exact restart files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic     8 bytes  "MEMBRCK1"
//! version   u32
//! model     8 × f64  kappa sigma coupling line_tension epsilon beta alpha radius
//! grid      f64 radius, u64 l_max, f64 oversample, u64 max_order
//! t         f64
//! lambda    f64
//! step      u64
//! n         u64      number of coefficients
//! coeffs    n × f64
//! sha256    32 bytes over everything above
//! ```

use std::path::Path;
use std::sync::Arc;

use membrane_core::{FlowState, GridSpec, ModelParams, SpectralField, SphereGrid};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MAGIC: [u8; 8] = *b"MEMBRCK1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub grid: GridSpec,
    pub t: f64,
    pub lambda: f64,
    pub step_count: u64,
    pub coeffs: Vec<f64>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CliError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| CliError::Checkpoint("truncated file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u32(&mut self) -> Result<u32, CliError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, CliError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, CliError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

impl Checkpoint {
    pub fn from_state(state: &FlowState, params: &ModelParams) -> Self {
        let grid = state.phi.grid();
        Self {
            params: *params,
            grid: GridSpec { max_order: Some(grid.max_order()), ..grid.spec() },
            t: state.t,
            lambda: state.lambda,
            step_count: state.step_count,
            coeffs: state.phi.coeffs().to_vec(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let p = &self.params;
        let mut out = Vec::with_capacity(128 + 8 * self.coeffs.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for v in [p.kappa, p.sigma, p.coupling, p.line_tension, p.epsilon, p.beta, p.alpha, p.radius] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let g = &self.grid;
        out.extend_from_slice(&g.radius.to_le_bytes());
        out.extend_from_slice(&(g.l_max as u64).to_le_bytes());
        out.extend_from_slice(&g.oversample.to_le_bytes());
        out.extend_from_slice(&(g.max_order.unwrap_or(g.l_max) as u64).to_le_bytes());
        out.extend_from_slice(&self.t.to_le_bytes());
        out.extend_from_slice(&self.lambda.to_le_bytes());
        out.extend_from_slice(&self.step_count.to_le_bytes());
        out.extend_from_slice(&(self.coeffs.len() as u64).to_le_bytes());
        for c in &self.coeffs {
            out.extend_from_slice(&c.to_le_bytes());
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CliError> {
        if bytes.len() < MAGIC.len() + 32 || bytes[..8] != MAGIC {
            return Err(CliError::Checkpoint("not a checkpoint (bad magic)".into()));
        }
        let (body, sum) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != sum {
            return Err(CliError::Checkpoint("checksum mismatch".into()));
        }
        let mut r = Reader { bytes: body, pos: 8 };
        let version = r.u32()?;
        if version != VERSION {
            return Err(CliError::Checkpoint(format!("unsupported version {version}")));
        }
        let mut m = [0.0; 8];
        for v in &mut m {
            *v = r.f64()?;
        }
        let params = ModelParams {
            kappa: m[0],
            sigma: m[1],
            coupling: m[2],
            line_tension: m[3],
            epsilon: m[4],
            beta: m[5],
            alpha: m[6],
            radius: m[7],
        };
        let radius = r.f64()?;
        let l_max = r.u64()? as usize;
        let oversample = r.f64()?;
        let max_order = Some(r.u64()? as usize);
        let t = r.f64()?;
        let lambda = r.f64()?;
        let step_count = r.u64()?;
        let n = r.u64()? as usize;
        if n.checked_mul(8) != Some(body.len() - r.pos) {
            return Err(CliError::Checkpoint(format!("coefficient count {n} does not match file size")));
        }
        let coeffs = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        Ok(Self { params, grid: GridSpec { radius, l_max, oversample, max_order }, t, lambda, step_count, coeffs })
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_bytes()).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn build_grid(&self) -> Result<Arc<SphereGrid>, CliError> {
        Ok(self.grid.build()?)
    }

    /// `φ` on `grid`, which must have the stored layout.
    pub fn phi_on(&self, grid: &Arc<SphereGrid>) -> Result<SpectralField, CliError> {
        let g = grid.spec();
        let same = g.l_max == self.grid.l_max
            && g.oversample == self.grid.oversample
            && grid.max_order() == self.grid.max_order.unwrap_or(self.grid.l_max)
            && g.radius == self.grid.radius;
        if !same {
            return Err(CliError::Config(format!(
                "checkpoint grid {:?} does not match configured grid {:?}",
                self.grid, g
            )));
        }
        Ok(SpectralField::from_coeffs(grid, self.coeffs.clone())?)
    }
}
