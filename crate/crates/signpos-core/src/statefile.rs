//! Binary container for sector state vectors.
//!
//! Layout, all little-endian: magic "SGNC", u32 version, u32 n_sites,
//! u32 n_up, u64 amplitude count, then count (re, im) f64 pairs. One state
//! vector per file; amplitudes round-trip bit-exactly.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::SectorBasis;

pub const STATE_MAGIC: [u8; 4] = *b"SGNC";
pub const STATE_VERSION: u32 = 1;

pub fn write_state<W: Write>(mut w: W, n_sites: u32, n_up: u32, amplitudes: &[Complex64]) -> Result<()> {
    w.write_all(&STATE_MAGIC)?;
    w.write_all(&STATE_VERSION.to_le_bytes())?;
    w.write_all(&n_sites.to_le_bytes())?;
    w.write_all(&n_up.to_le_bytes())?;
    w.write_all(&(amplitudes.len() as u64).to_le_bytes())?;
    for a in amplitudes {
        w.write_all(&a.re.to_le_bytes())?;
        w.write_all(&a.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_state_file(path: &Path, n_sites: u32, n_up: u32, amplitudes: &[Complex64]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut buf = std::io::BufWriter::new(file);
    write_state(&mut buf, n_sites, n_up, amplitudes)?;
    buf.flush()?;
    Ok(())
}

pub struct StateRecord {
    pub n_sites: u32,
    pub n_up: u32,
    pub amplitudes: Vec<Complex64>,
}

impl StateRecord {
    /// Checks the header against a basis before using the amplitudes.
    pub fn expect_basis(&self, basis: &SectorBasis) -> Result<()> {
        if self.n_sites as usize != basis.n_sites
            || self.n_up as usize != basis.n_up
            || self.amplitudes.len() != basis.len()
        {
            return Err(Error::BasisMismatch(format!(
                "state file holds n={}, n_up={}, {} amplitudes; expected n={}, n_up={}, {}",
                self.n_sites,
                self.n_up,
                self.amplitudes.len(),
                basis.n_sites,
                basis.n_up,
                basis.len()
            )));
        }
        Ok(())
    }
}

pub fn read_state<R: Read>(mut r: R) -> Result<StateRecord> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != STATE_MAGIC {
        return Err(Error::Format(format!(
            "bad state file magic {magic:?}, expected {STATE_MAGIC:?}"
        )));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != STATE_VERSION {
        return Err(Error::Format(format!(
            "unsupported state file version {version}, expected {STATE_VERSION}"
        )));
    }
    r.read_exact(&mut u32buf)?;
    let n_sites = u32::from_le_bytes(u32buf);
    r.read_exact(&mut u32buf)?;
    let n_up = u32::from_le_bytes(u32buf);
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf)?;
    let count = u64::from_le_bytes(u64buf);
    if n_up > n_sites || n_sites > 64 {
        return Err(Error::Format(format!(
            "state file header is inconsistent: n_sites={n_sites}, n_up={n_up}"
        )));
    }
    let mut amplitudes = Vec::with_capacity(count as usize);
    let mut pair = [0u8; 16];
    for _ in 0..count {
        r.read_exact(&mut pair)?;
        let re = f64::from_le_bytes(pair[..8].try_into().expect("8 bytes"));
        let im = f64::from_le_bytes(pair[8..].try_into().expect("8 bytes"));
        amplitudes.push(Complex64::new(re, im));
    }
    Ok(StateRecord {
        n_sites,
        n_up,
        amplitudes,
    })
}

pub fn read_state_file(path: &Path) -> Result<StateRecord> {
    let file = std::fs::File::open(path)?;
    read_state(std::io::BufReader::new(file))
}
