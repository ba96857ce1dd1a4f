//! Term-list Hamiltonians: construction, matrix-free application, symbolic
//! conjugation by diagonal circuits, and dense verification matrices.
//!
//! Operator kinds act on a single site in the `(|0>, |1>)` basis:
//! `Sz = diag(-1/2, +1/2)`, `PauliZ = diag(+1, -1)`, `S+ = |1><0|`, `S- = |0><1|`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{ChainModel, SectorBasis};

/// Coefficients below this magnitude are dropped during normalization.
pub const MERGE_TOL: f64 = 1e-14;

/// Dense matrices are refused above this sector dimension.
pub const DENSE_CAP: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FactorKind {
    Sz,
    Splus,
    Sminus,
    PauliZ,
}

impl FactorKind {
    pub fn token(&self) -> &'static str {
        match self {
            FactorKind::Sz => "Sz",
            FactorKind::Splus => "S+",
            FactorKind::Sminus => "S-",
            FactorKind::PauliZ => "Z",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OperatorFactor {
    pub site: usize,
    pub kind: FactorKind,
}

#[derive(Debug, Clone)]
pub struct HamiltonianTerm {
    pub coefficient: Complex64,
    /// Factors on pairwise-distinct sites, sorted by site.
    pub factors: Vec<OperatorFactor>,
}

impl HamiltonianTerm {
    fn key(&self) -> Vec<(usize, FactorKind)> {
        self.factors.iter().map(|f| (f.site, f.kind)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct HamiltonianIR {
    pub n_sites: usize,
    pub terms: Vec<HamiltonianTerm>,
}

fn factor(site: usize, kind: FactorKind) -> OperatorFactor {
    OperatorFactor { site, kind }
}

/// Heisenberg exchange in S+/S- form: `J Sz_i Sz_j + (J/2)(S+_i S-_j + S-_i S+_j)`.
pub fn heisenberg_terms(model: &ChainModel) -> HamiltonianIR {
    let mut terms = Vec::new();
    let mut push_bond = |i: usize, j: usize, coupling: f64| {
        if coupling == 0.0 {
            return;
        }
        let c = Complex64::new(coupling, 0.0);
        let half = Complex64::new(coupling / 2.0, 0.0);
        terms.push(HamiltonianTerm {
            coefficient: c,
            factors: vec![factor(i, FactorKind::Sz), factor(j, FactorKind::Sz)],
        });
        terms.push(HamiltonianTerm {
            coefficient: half,
            factors: vec![factor(i, FactorKind::Splus), factor(j, FactorKind::Sminus)],
        });
        terms.push(HamiltonianTerm {
            coefficient: half,
            factors: vec![factor(i, FactorKind::Sminus), factor(j, FactorKind::Splus)],
        });
    };
    for &(i, j) in &model.j1_bonds {
        push_bond(i, j, model.j1);
    }
    for &(i, j) in &model.j2_bonds {
        push_bond(i, j, model.j2);
    }
    let mut ir = HamiltonianIR {
        n_sites: model.n_sites,
        terms,
    };
    ir.normalize();
    ir
}

/// Per-term bit masks precompiled for fast application.
#[derive(Debug, Clone)]
struct CompiledTerm {
    coefficient: Complex64,
    /// Bits that must be SET in the output config (S+ sites).
    set_mask: u64,
    /// Bits that must be CLEAR in the output config (S- sites).
    clear_mask: u64,
    /// set_mask | clear_mask; XOR maps output config to source config.
    flip_mask: u64,
    sz_mask: u64,
    z_mask: u64,
    /// (1/2)^(number of Sz factors).
    sz_scale: f64,
}

#[derive(Debug, Clone)]
pub struct CompiledIR {
    n_sites: usize,
    terms: Vec<CompiledTerm>,
    all_real: bool,
}

impl HamiltonianIR {
    /// Sorts factors, merges like terms, and drops negligible coefficients.
    pub fn normalize(&mut self) {
        use std::collections::BTreeMap;
        let mut merged: BTreeMap<Vec<(usize, FactorKind)>, Complex64> = BTreeMap::new();
        for t in &self.terms {
            let mut t = t.clone();
            t.factors.sort_by_key(|f| f.site);
            *merged.entry(t.key()).or_insert(Complex64::new(0.0, 0.0)) += t.coefficient;
        }
        self.terms = merged
            .into_iter()
            .filter(|(_, c)| c.norm() > MERGE_TOL)
            .map(|(key, coefficient)| HamiltonianTerm {
                coefficient,
                factors: key.into_iter().map(|(site, kind)| factor(site, kind)).collect(),
            })
            .collect();
    }

    pub fn is_real(&self) -> bool {
        self.terms.iter().all(|t| t.coefficient.im.abs() <= MERGE_TOL)
    }

    /// Every term must have its Hermitian-conjugate partner present.
    pub fn check_hermitian(&self, tol: f64) -> Result<()> {
        use std::collections::BTreeMap;
        let mut map: BTreeMap<Vec<(usize, FactorKind)>, Complex64> = BTreeMap::new();
        for t in &self.terms {
            *map.entry(t.key()).or_insert(Complex64::new(0.0, 0.0)) += t.coefficient;
        }
        for t in &self.terms {
            let adj_key: Vec<(usize, FactorKind)> = t
                .factors
                .iter()
                .map(|f| {
                    let kind = match f.kind {
                        FactorKind::Splus => FactorKind::Sminus,
                        FactorKind::Sminus => FactorKind::Splus,
                        other => other,
                    };
                    (f.site, kind)
                })
                .collect();
            let partner = map.get(&adj_key).copied().unwrap_or(Complex64::new(0.0, 0.0));
            if (partner - t.coefficient.conj()).norm() > tol {
                return Err(Error::Internal(format!(
                    "non-Hermitian IR: term {:?} has partner coefficient {partner}",
                    t.key()
                )));
            }
        }
        Ok(())
    }

    /// Validates factor sites and distinctness.
    pub fn validate(&self) -> Result<()> {
        for t in &self.terms {
            if t.factors.is_empty() {
                return Err(Error::Internal("term with no factors".into()));
            }
            let mut sites: Vec<usize> = t.factors.iter().map(|f| f.site).collect();
            sites.sort_unstable();
            sites.dedup();
            if sites.len() != t.factors.len() {
                return Err(Error::Internal("repeated site within a term".into()));
            }
            if t.factors.iter().any(|f| f.site >= self.n_sites) {
                return Err(Error::Internal("factor site out of range".into()));
            }
            if !t.coefficient.re.is_finite() || !t.coefficient.im.is_finite() {
                return Err(Error::Internal("non-finite coefficient".into()));
            }
        }
        Ok(())
    }

    pub fn compile(&self) -> CompiledIR {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let mut ct = CompiledTerm {
                    coefficient: t.coefficient,
                    set_mask: 0,
                    clear_mask: 0,
                    flip_mask: 0,
                    sz_mask: 0,
                    z_mask: 0,
                    sz_scale: 1.0,
                };
                for f in &t.factors {
                    let bit = 1u64 << f.site;
                    match f.kind {
                        FactorKind::Splus => ct.set_mask |= bit,
                        FactorKind::Sminus => ct.clear_mask |= bit,
                        FactorKind::Sz => {
                            ct.sz_mask |= bit;
                            ct.sz_scale *= 0.5;
                        }
                        FactorKind::PauliZ => ct.z_mask |= bit,
                    }
                }
                ct.flip_mask = ct.set_mask | ct.clear_mask;
                ct
            })
            .collect();
        CompiledIR {
            n_sites: self.n_sites,
            terms,
            all_real: self.is_real(),
        }
    }

    /// Deterministic text listing, one canonical line per term.
    pub fn listing(&self) -> String {
        let mut ir = self.clone();
        ir.normalize();
        let mut out = String::new();
        for t in &ir.terms {
            out.push_str(&format!("{:+.16e} {:+.16e}", t.coefficient.re, t.coefficient.im));
            for f in &t.factors {
                out.push_str(&format!(" [{}:{}]", f.site, f.kind.token()));
            }
            out.push('\n');
        }
        out
    }

    /// Maximum number of factors in any term.
    pub fn max_support(&self) -> usize {
        self.terms.iter().map(|t| t.factors.len()).max().unwrap_or(0)
    }
}

impl CompiledIR {
    /// Contribution row: amplitude that term `t` moves from source config onto
    /// output config `out`. Returns `None` when incompatible.
    #[inline]
    fn entry(t: &CompiledTerm, out: u64) -> Option<(u64, f64)> {
        if out & t.set_mask != t.set_mask || out & t.clear_mask != 0 {
            return None;
        }
        let src = out ^ t.flip_mask;
        // Diagonal factors evaluate on the source config.
        let sz_down = (t.sz_mask & !src).count_ones();
        let z_up = (t.z_mask & src).count_ones();
        let sign = if (sz_down + z_up) % 2 == 0 { 1.0 } else { -1.0 };
        Some((src, sign * t.sz_scale))
    }

    fn apply_range_complex(
        &self,
        basis: &SectorBasis,
        state: &[Complex64],
        out: &mut [Complex64],
        start: usize,
    ) {
        for (row, acc) in out.iter_mut().enumerate() {
            let cfg = basis.config(start + row);
            let mut sum = Complex64::new(0.0, 0.0);
            for t in &self.terms {
                if let Some((src, scale)) = Self::entry(t, cfg) {
                    if let Some(idx) = basis.index_of(src) {
                        sum += t.coefficient * scale * state[idx];
                    }
                }
            }
            *acc = sum;
        }
    }

    fn apply_range_real(&self, basis: &SectorBasis, state: &[f64], out: &mut [f64], start: usize) {
        for (row, acc) in out.iter_mut().enumerate() {
            let cfg = basis.config(start + row);
            let mut sum = 0.0;
            for t in &self.terms {
                if let Some((src, scale)) = Self::entry(t, cfg) {
                    if let Some(idx) = basis.index_of(src) {
                        sum += t.coefficient.re * scale * state[idx];
                    }
                }
            }
            *acc = sum;
        }
    }

    pub fn is_all_real(&self) -> bool {
        self.all_real
    }

    /// H|state> over the sector basis (gather-style, deterministic).
    pub fn apply(&self, basis: &SectorBasis, state: &[Complex64]) -> Result<Vec<Complex64>> {
        if basis.n_sites != self.n_sites || state.len() != basis.len() {
            return Err(Error::BasisMismatch(format!(
                "state length {} vs basis dimension {}",
                state.len(),
                basis.len()
            )));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); basis.len()];
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            let chunk = chunk_size(basis.len());
            out.par_chunks_mut(chunk).enumerate().for_each(|(ci, slice)| {
                self.apply_range_complex(basis, state, slice, ci * chunk);
            });
        }
        #[cfg(not(feature = "parallel"))]
        self.apply_range_complex(basis, state, &mut out, 0);
        Ok(out)
    }

    /// Real fast path; requires an all-real IR.
    pub fn apply_real(&self, basis: &SectorBasis, state: &[f64]) -> Result<Vec<f64>> {
        if !self.all_real {
            return Err(Error::Internal("apply_real on a complex IR".into()));
        }
        if basis.n_sites != self.n_sites || state.len() != basis.len() {
            return Err(Error::BasisMismatch(format!(
                "state length {} vs basis dimension {}",
                state.len(),
                basis.len()
            )));
        }
        let mut out = vec![0.0; basis.len()];
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            let chunk = chunk_size(basis.len());
            out.par_chunks_mut(chunk).enumerate().for_each(|(ci, slice)| {
                self.apply_range_real(basis, state, slice, ci * chunk);
            });
        }
        #[cfg(not(feature = "parallel"))]
        self.apply_range_real(basis, state, &mut out, 0);
        Ok(out)
    }
}

#[cfg(feature = "parallel")]
fn chunk_size(dim: usize) -> usize {
    (dim / (rayon::current_num_threads() * 8)).max(64)
}

/// H|state> through a freshly compiled IR; compile once for repeated use.
pub fn apply_terms(ir: &HamiltonianIR, basis: &SectorBasis, state: &[Complex64]) -> Result<Vec<Complex64>> {
    ir.compile().apply(basis, state)
}

/// Dense sector-restricted matrix (column-major nalgebra), capped at 5000.
pub fn dense_matrix(ir: &HamiltonianIR, basis: &SectorBasis) -> Result<nalgebra::DMatrix<Complex64>> {
    let dim = basis.len();
    if dim > DENSE_CAP {
        return Err(Error::TooLarge(format!(
            "sector dimension {dim} exceeds dense cap {DENSE_CAP}"
        )));
    }
    let compiled = ir.compile();
    let mut m = nalgebra::DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for row in 0..dim {
        let cfg = basis.config(row);
        for t in &compiled.terms {
            if let Some((src, scale)) = CompiledIR::entry(t, cfg) {
                if let Some(col) = basis.index_of(src) {
                    m[(row, col)] += t.coefficient * scale;
                }
            }
        }
    }
    let herm_dev = (0..dim)
        .flat_map(|i| (0..=i).map(move |j| (i, j)))
        .map(|(i, j)| (m[(i, j)] - m[(j, i)].conj()).norm())
        .fold(0.0f64, f64::max);
    if herm_dev > 1e-12 {
        return Err(Error::Internal(format!(
            "dense matrix not Hermitian (deviation {herm_dev:.3e})"
        )));
    }
    Ok(m)
}

/// Conjugates by the diagonal rotation layer `U = prod_i Rz_i(theta_i)`:
/// `S+_i` picks up `e^{i theta_i}`, `S-_i` the conjugate, diagonal factors
/// are unchanged. Angles are integers in units of pi/2.
pub fn conjugate_by_diagonal(ir: &HamiltonianIR, angles_half_pi: &[i8]) -> Result<HamiltonianIR> {
    if angles_half_pi.len() != ir.n_sites {
        return Err(Error::InvalidProtocol(format!(
            "angle list length {} vs n_sites {}",
            angles_half_pi.len(),
            ir.n_sites
        )));
    }
    if angles_half_pi.iter().any(|a| a.abs() > 2) {
        return Err(Error::InvalidProtocol("angles must lie in [-2, 2] half-pi units".into()));
    }
    // i^k for k mod 4.
    const I_POW: [Complex64; 4] = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, -1.0),
    ];
    let mut out = ir.clone();
    for t in &mut out.terms {
        let mut k: i32 = 0;
        for f in &t.factors {
            match f.kind {
                FactorKind::Splus => k += angles_half_pi[f.site] as i32,
                FactorKind::Sminus => k -= angles_half_pi[f.site] as i32,
                _ => {}
            }
        }
        t.coefficient *= I_POW[k.rem_euclid(4) as usize];
    }
    out.normalize();
    out.check_hermitian(1e-12)?;
    Ok(out)
}

/// Conjugates by a CZ layer on disjoint pairs: each `S+/-_a` with partner `b`
/// acquires a `PauliZ_b` factor on its right; on-site products are reduced
/// exactly afterwards.
pub fn conjugate_by_cz(ir: &HamiltonianIR, pairs: &[(usize, usize)]) -> Result<HamiltonianIR> {
    let mut partner = vec![usize::MAX; ir.n_sites];
    for &(a, b) in pairs {
        if a >= ir.n_sites || b >= ir.n_sites || a == b {
            return Err(Error::InvalidProtocol(format!("bad CZ pair ({a}, {b})")));
        }
        if partner[a] != usize::MAX || partner[b] != usize::MAX {
            return Err(Error::InvalidProtocol("CZ pairs must be disjoint".into()));
        }
        partner[a] = b;
        partner[b] = a;
    }
    let mut out_terms = Vec::with_capacity(ir.terms.len());
    for t in &ir.terms {
        // Ordered factor sequence after the substitution rule.
        let mut seq: Vec<OperatorFactor> = Vec::with_capacity(t.factors.len() * 2);
        for f in &t.factors {
            seq.push(*f);
            if matches!(f.kind, FactorKind::Splus | FactorKind::Sminus) && partner[f.site] != usize::MAX {
                seq.push(factor(partner[f.site], FactorKind::PauliZ));
            }
        }
        if let Some(reduced) = reduce_ordered(t.coefficient, seq)? {
            out_terms.push(reduced);
        }
    }
    let mut out = HamiltonianIR {
        n_sites: ir.n_sites,
        terms: out_terms,
    };
    out.normalize();
    out.check_hermitian(1e-12)?;
    Ok(out)
}

/// Reduces an ordered product of single-site factors to at most one factor per
/// site, tracking scalar prefactors exactly. Returns `None` for a vanished term.
fn reduce_ordered(coefficient: Complex64, seq: Vec<OperatorFactor>) -> Result<Option<HamiltonianTerm>> {
    use FactorKind::*;
    let mut coeff = coefficient;
    let mut per_site: std::collections::BTreeMap<usize, Vec<FactorKind>> = std::collections::BTreeMap::new();
    // Factors on distinct sites commute, so the per-site subsequences retain
    // their relative order and fully determine the product.
    for f in seq {
        per_site.entry(f.site).or_default().push(f.kind);
    }
    let mut factors = Vec::new();
    for (site, kinds) in per_site {
        let mut current: Option<FactorKind> = None;
        for k in kinds {
            current = match (current, k) {
                (None, k) => Some(k),
                (Some(PauliZ), PauliZ) => None,
                (Some(Splus), PauliZ) => Some(Splus),
                (Some(PauliZ), Splus) => {
                    coeff = -coeff;
                    Some(Splus)
                }
                (Some(Sminus), PauliZ) => {
                    coeff = -coeff;
                    Some(Sminus)
                }
                (Some(PauliZ), Sminus) => Some(Sminus),
                (Some(Sz), PauliZ) | (Some(PauliZ), Sz) => {
                    coeff *= Complex64::new(-0.5, 0.0);
                    None
                }
                (a, b) => {
                    return Err(Error::Internal(format!(
                        "unsupported on-site product {a:?} * {b:?}"
                    )))
                }
            };
        }
        if let Some(kind) = current {
            factors.push(factor(site, kind));
        }
    }
    if factors.is_empty() {
        // A pure scalar would shift the spectrum; the CZ rule never produces
        // one from the IRs in scope.
        return Err(Error::Internal("term reduced to a scalar".into()));
    }
    Ok(Some(HamiltonianTerm {
        coefficient: coeff,
        factors,
    }))
}

/// Directly constructs the transformed open-chain Hamiltonian in which all
/// next-nearest exchange flips sign and nearest exchange flips on the
/// (2k, 2k+1) bonds only, with all Sz Sz terms unchanged. Equals conjugation
/// of the Heisenberg IR by the period-4 pi-rotation layer.
pub fn even_odd_transformed(model: &ChainModel) -> Result<HamiltonianIR> {
    if model.boundary != crate::lattice::Boundary::Open {
        return Err(Error::UnsupportedBoundary(
            "the transformed Hamiltonian is defined for open chains".into(),
        ));
    }
    let mut ir = heisenberg_terms(model);
    for t in &mut ir.terms {
        let exchange = t.factors.iter().any(|f| matches!(f.kind, FactorKind::Splus));
        if !exchange {
            continue;
        }
        let sites: Vec<usize> = t.factors.iter().map(|f| f.site).collect();
        let (i, j) = (sites[0], sites[1]);
        let dist = j.abs_diff(i);
        let flip = match dist {
            2 => true,
            1 => i.min(j) % 2 == 0,
            _ => false,
        };
        if flip {
            t.coefficient = -t.coefficient;
        }
    }
    ir.normalize();
    Ok(ir)
}
