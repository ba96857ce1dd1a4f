//! Chain geometry and the fixed-magnetization computational basis.
//!
//! Site `i` of an `n`-site chain maps to bit `i` of a configuration word;
//! bit = 1 means the site is in the up-spin `|1>` state (`Sz = +1/2`).

use crate::error::{Error, Result};

pub const MAX_SITES: usize = 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    Open,
    Periodic,
}

impl Boundary {
    pub fn as_str(&self) -> &'static str {
        match self {
            Boundary::Open => "obc",
            Boundary::Periodic => "pbc",
        }
    }
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "obc" | "open" => Ok(Boundary::Open),
            "pbc" | "periodic" => Ok(Boundary::Periodic),
            other => Err(Error::Format(format!("unknown boundary {other:?}"))),
        }
    }
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Chain geometry plus couplings; bond lists are derived at construction.
#[derive(Debug, Clone)]
pub struct ChainModel {
    pub n_sites: usize,
    pub boundary: Boundary,
    pub j1: f64,
    pub j2: f64,
    pub j1_bonds: Vec<(usize, usize)>,
    pub j2_bonds: Vec<(usize, usize)>,
}

/// Builds the chain. `n_sites` must be even; the open 2-site chain is admitted
/// as a toy case, periodic chains need at least 4 sites.
pub fn build_chain(n_sites: usize, boundary: Boundary, j1: f64, j2: f64) -> Result<ChainModel> {
    if n_sites % 2 != 0 {
        return Err(Error::InvalidGeometry(format!(
            "n_sites must be even, got {n_sites}"
        )));
    }
    let min = match boundary {
        Boundary::Open => 2,
        Boundary::Periodic => 4,
    };
    if n_sites < min || n_sites > MAX_SITES {
        return Err(Error::InvalidGeometry(format!(
            "n_sites must be in [{min}, {MAX_SITES}] for {boundary}, got {n_sites}"
        )));
    }
    if !j1.is_finite() || !j2.is_finite() {
        return Err(Error::InvalidGeometry("couplings must be finite".into()));
    }
    let (j1_bonds, j2_bonds) = match boundary {
        Boundary::Open => (
            (0..n_sites - 1).map(|i| (i, i + 1)).collect(),
            (0..n_sites.saturating_sub(2)).map(|i| (i, i + 2)).collect(),
        ),
        Boundary::Periodic => (
            (0..n_sites).map(|i| (i, (i + 1) % n_sites)).collect(),
            (0..n_sites).map(|i| (i, (i + 2) % n_sites)).collect(),
        ),
    };
    Ok(ChainModel {
        n_sites,
        boundary,
        j1,
        j2,
        j1_bonds,
        j2_bonds,
    })
}

/// Chain distance between two sites, respecting the boundary.
pub fn chain_distance(n_sites: usize, boundary: Boundary, i: usize, j: usize) -> usize {
    let d = i.abs_diff(j);
    match boundary {
        Boundary::Open => d,
        Boundary::Periodic => d.min(n_sites - d),
    }
}

/// All configurations of a fixed-magnetization sector, ascending as integers.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    pub n_sites: usize,
    pub n_up: usize,
    configs: Vec<u64>,
}

/// Enumerates the sector with `n_up` up spins on `n_sites` sites.
pub fn enumerate_sector(n_sites: usize, n_up: usize) -> Result<SectorBasis> {
    if n_sites == 0 || n_sites > MAX_SITES {
        return Err(Error::InvalidSector(format!(
            "n_sites must be in [1, {MAX_SITES}], got {n_sites}"
        )));
    }
    if n_up > n_sites {
        return Err(Error::InvalidSector(format!(
            "n_up {n_up} exceeds n_sites {n_sites}"
        )));
    }
    let mut configs = Vec::with_capacity(binomial(n_sites, n_up));
    if n_up == 0 {
        configs.push(0);
    } else {
        // Gosper's hack: next integer with the same popcount.
        let mut c: u64 = (1 << n_up) - 1;
        let limit: u64 = 1 << n_sites;
        while c < limit {
            configs.push(c);
            let lo = c & c.wrapping_neg();
            let ripple = c + lo;
            c = ripple | (((c ^ ripple) >> 2) / lo);
        }
    }
    Ok(SectorBasis {
        n_sites,
        n_up,
        configs,
    })
}

impl SectorBasis {
    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn configs(&self) -> &[u64] {
        &self.configs
    }

    pub fn config(&self, index: usize) -> u64 {
        self.configs[index]
    }

    /// Ordinal index of a configuration, or `None` if it is outside the sector.
    pub fn index_of(&self, config: u64) -> Option<usize> {
        if config.count_ones() as usize != self.n_up || config >> self.n_sites != 0 {
            return None;
        }
        self.configs.binary_search(&config).ok()
    }

    /// Checks that another basis describes the same sector.
    pub fn same_sector(&self, other: &SectorBasis) -> bool {
        self.n_sites == other.n_sites && self.n_up == other.n_up
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn open_chain_bond_counts() {
        let m = build_chain(6, Boundary::Open, 1.0, 0.5).unwrap();
        assert_eq!(m.j1_bonds, vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]);
        assert_eq!(m.j2_bonds, vec![(0, 2), (1, 3), (2, 4), (3, 5)]);
    }

    #[test]
    fn periodic_chain_wraps() {
        let m = build_chain(6, Boundary::Periodic, 1.0, 2.0).unwrap();
        assert_eq!(m.j1_bonds.len(), 6);
        assert_eq!(m.j2_bonds.len(), 6);
        assert!(m.j1_bonds.contains(&(5, 0)));
        assert!(m.j2_bonds.contains(&(4, 0)));
        assert!(m.j2_bonds.contains(&(5, 1)));
    }

    #[test]
    fn odd_size_rejected() {
        assert!(matches!(
            build_chain(7, Boundary::Open, 1.0, 0.0),
            Err(Error::InvalidGeometry(_))
        ));
    }

    #[test]
    fn two_site_open_allowed_periodic_rejected() {
        assert!(build_chain(2, Boundary::Open, 1.0, 0.0).is_ok());
        assert!(build_chain(2, Boundary::Periodic, 1.0, 0.0).is_err());
    }

    #[test]
    fn sector_4_2() {
        let b = enumerate_sector(4, 2).unwrap();
        assert_eq!(b.configs(), &[0b0011, 0b0101, 0b0110, 0b1001, 0b1010, 0b1100]);
    }

    #[test]
    fn sector_sizes() {
        assert_eq!(enumerate_sector(6, 3).unwrap().len(), 20);
        let empty = enumerate_sector(6, 0).unwrap();
        assert_eq!(empty.configs(), &[0]);
    }

    #[test]
    fn index_lookup() {
        let b = enumerate_sector(4, 2).unwrap();
        assert_eq!(b.index_of(0b0101), Some(1));
        assert_eq!(b.index_of(0b0111), None);
        let b6 = enumerate_sector(6, 3).unwrap();
        assert_eq!(b6.index_of(0b000111), Some(0));
    }

    #[test]
    fn distances() {
        assert_eq!(chain_distance(6, Boundary::Open, 0, 5), 5);
        assert_eq!(chain_distance(6, Boundary::Periodic, 0, 5), 1);
    }
}
