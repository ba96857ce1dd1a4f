//! Figure-level analyses: J2 sweeps of sign metrics, reference-state overlap
//! curves, sign-minimum location, and entanglement entropy of sector states.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::eigen::{canonicalize_real, ground_level, EigenOptions, EigenResult};
use crate::error::{Error, Result};
use crate::hamiltonian::heisenberg_terms;
use crate::lattice::{build_chain, enumerate_sector, Boundary, ChainModel, SectorBasis};
use crate::protocol::{apply_protocol, sign_report, Protocol};
use crate::subspace::{max_sign_transformed, positivize_degenerate_subspace};

/// A protocol selection that can be instantiated for any chain length.
#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolChoice {
    Identity,
    Mpr,
    OddEven,
    Torlai,
    MprCz,
    Custom(Protocol),
}

impl ProtocolChoice {
    pub fn from_name(name: &str) -> Option<ProtocolChoice> {
        match name {
            "identity" | "raw" => Some(ProtocolChoice::Identity),
            "mpr" => Some(ProtocolChoice::Mpr),
            "odd-even" => Some(ProtocolChoice::OddEven),
            "torlai" => Some(ProtocolChoice::Torlai),
            "mpr-cz" => Some(ProtocolChoice::MprCz),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            ProtocolChoice::Identity => "identity".into(),
            ProtocolChoice::Mpr => "mpr".into(),
            ProtocolChoice::OddEven => "odd-even".into(),
            ProtocolChoice::Torlai => "torlai".into(),
            ProtocolChoice::MprCz => "mpr-cz".into(),
            ProtocolChoice::Custom(p) => p.label.clone(),
        }
    }

    pub fn build(&self, n_sites: usize) -> Result<Protocol> {
        match self {
            ProtocolChoice::Identity => Ok(Protocol::identity(n_sites)),
            ProtocolChoice::Mpr => Ok(Protocol::mpr(n_sites)),
            ProtocolChoice::OddEven => Ok(Protocol::odd_even(n_sites)),
            ProtocolChoice::Torlai => Protocol::torlai(n_sites),
            ProtocolChoice::MprCz => Ok(Protocol::mpr_cz(n_sites)),
            ProtocolChoice::Custom(p) => {
                if p.n_sites() != n_sites {
                    return Err(Error::BasisMismatch(format!(
                        "protocol '{}' has {} sites but the chain has {n_sites}",
                        p.label,
                        p.n_sites()
                    )));
                }
                p.validate()?;
                Ok(p.clone())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub n_sites: Vec<usize>,
    pub boundary: Boundary,
    pub j1: f64,
    /// Ascending grid within [0, 2].
    pub j2_grid: Vec<f64>,
    pub protocols: Vec<ProtocolChoice>,
    pub eigen: EigenOptions,
    pub phase_tol: f64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_sites.is_empty() || self.j2_grid.is_empty() || self.protocols.is_empty() {
            return Err(Error::InvalidGeometry(
                "sweep needs at least one chain length, one J2 point, and one protocol".into(),
            ));
        }
        if !self.j1.is_finite() {
            return Err(Error::InvalidGeometry("J1 must be finite".into()));
        }
        for w in self.j2_grid.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidGeometry("J2 grid must be strictly ascending".into()));
            }
        }
        for &j2 in &self.j2_grid {
            if !(0.0..=2.0 + 1e-9).contains(&j2) {
                return Err(Error::InvalidGeometry(format!(
                    "J2 grid point {j2} is outside [0, 2]"
                )));
            }
        }
        Ok(())
    }
}

/// The default grid: step 0.1 over [0, 2].
pub fn default_j2_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub n_sites: usize,
    pub boundary: Boundary,
    pub j2: f64,
    pub protocol: String,
    pub sign_average: f64,
    pub negative_fraction: f64,
    pub energy: f64,
    pub degeneracy: usize,
    /// Sign averages of the individual transformed eigenvectors when the
    /// ground level is degenerate (the headline metric then refers to the
    /// in-subspace maximizer).
    pub per_vector_signs: Vec<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn failed(n_sites: usize, boundary: Boundary, j2: f64, protocol: String, error: String) -> Self {
        SweepRow {
            n_sites,
            boundary,
            j2,
            protocol,
            sign_average: f64::NAN,
            negative_fraction: f64::NAN,
            energy: f64::NAN,
            degeneracy: 0,
            per_vector_signs: Vec::new(),
            error: Some(error),
        }
    }
}

/// Ground level of the model restricted to one magnetization sector.
pub fn solve_ground(model: &ChainModel, n_up: usize, opts: &EigenOptions) -> Result<(SectorBasis, EigenResult)> {
    let basis = enumerate_sector(model.n_sites, n_up)?;
    let ir = heisenberg_terms(model);
    let res = ground_level(&ir, &basis, opts)?;
    Ok((basis, res))
}

/// Sign metrics of the transformed ground level: `(sign_average,
/// negative_fraction, per_vector_signs)`. Real representatives are oriented
/// to a nonnegative sign average; a state and its negation are the same
/// state, so the metric is reported for the representative that favors the
/// positive mass. A degenerate level reports the in-subspace maximizer, plus
/// the per-member values.
pub fn metrics_for_protocol(
    protocol: &Protocol,
    basis: &SectorBasis,
    ground: &EigenResult,
    seed: u64,
    phase_tol: f64,
) -> Result<(f64, f64, Vec<f64>)> {
    let vectors = ground.ground_vectors();
    let transformed: Vec<Vec<Complex64>> = vectors
        .iter()
        .map(|v| apply_protocol(protocol, basis, v))
        .collect::<Result<_>>()?;
    if transformed.len() == 1 {
        let (mut re, resid) = canonicalize_real(&transformed[0], phase_tol)?;
        let mut report = sign_report(&re, resid);
        if report.sign_average < 0.0 {
            for x in re.iter_mut() {
                *x = -*x;
            }
            report = sign_report(&re, resid);
        }
        Ok((report.sign_average, report.negative_fraction, Vec::new()))
    } else {
        let per_vector: Vec<f64> = transformed
            .iter()
            .map(|t| {
                let (re, resid) = canonicalize_real(t, phase_tol)?;
                Ok(sign_report(&re, resid).sign_average.abs())
            })
            .collect::<Result<_>>()?;
        let (_, report) = max_sign_transformed(&transformed, seed, phase_tol)?;
        Ok((report.sign_average, report.negative_fraction, per_vector))
    }
}

fn sweep_point(spec: &SweepSpec, n: usize, j2: f64) -> Vec<SweepRow> {
    let fail_all = |msg: String| -> Vec<SweepRow> {
        spec.protocols
            .iter()
            .map(|p| SweepRow::failed(n, spec.boundary, j2, p.label(), msg.clone()))
            .collect()
    };
    let model = match build_chain(n, spec.boundary, spec.j1, j2) {
        Ok(m) => m,
        Err(e) => return fail_all(e.to_string()),
    };
    let (basis, ground) = match solve_ground(&model, n / 2, &spec.eigen) {
        Ok(r) => r,
        Err(e) => return fail_all(e.to_string()),
    };
    let energy = ground.eigenvalues[0];
    let degeneracy = ground.ground_multiplicity();
    spec.protocols
        .iter()
        .map(|choice| {
            let outcome = choice
                .build(n)
                .and_then(|p| metrics_for_protocol(&p, &basis, &ground, spec.eigen.seed, spec.phase_tol));
            match outcome {
                Ok((sign_average, negative_fraction, per_vector_signs)) => SweepRow {
                    n_sites: n,
                    boundary: spec.boundary,
                    j2,
                    protocol: choice.label(),
                    sign_average,
                    negative_fraction,
                    energy,
                    degeneracy,
                    per_vector_signs,
                    error: None,
                },
                Err(e) => {
                    let mut row = SweepRow::failed(n, spec.boundary, j2, choice.label(), e.to_string());
                    row.energy = energy;
                    row.degeneracy = degeneracy;
                    row
                }
            }
        })
        .collect()
}

/// One row per (chain length, J2 point, protocol), in spec order. Solver or
/// protocol failures are recorded in the affected rows; the sweep continues.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let points: Vec<(usize, f64)> = spec
        .n_sites
        .iter()
        .flat_map(|&n| spec.j2_grid.iter().map(move |&j2| (n, j2)))
        .collect();
    #[cfg(feature = "parallel")]
    let per_point: Vec<Vec<SweepRow>> = {
        use rayon::prelude::*;
        points
            .par_iter()
            .map(|&(n, j2)| sweep_point(spec, n, j2))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_point: Vec<Vec<SweepRow>> = points.iter().map(|&(n, j2)| sweep_point(spec, n, j2)).collect();
    Ok(per_point.into_iter().flatten().collect())
}

/// Overlap curves of the ground state along a J2 grid against three reference
/// states: the J2 = 0 ground state, the J2 = 0.5 ground state (both at
/// J1 = 1), and the J1 = 0, J2 = 1 ground level. For a degenerate third
/// reference the curve reports, per grid point, the largest overlap over the
/// positivized degenerate set (positivized with the odd/even protocol and
/// mapped back to the original frame).
#[derive(Debug, Clone)]
pub struct OverlapCurves {
    pub j2: Vec<f64>,
    pub with_heisenberg: Vec<f64>,
    pub with_mg_point: Vec<f64>,
    pub with_j2_only: Vec<f64>,
    pub j2_only_multiplicity: usize,
    pub j2_only_member_signs: Vec<f64>,
}

pub fn reference_overlap_curves(
    n_sites: usize,
    boundary: Boundary,
    j2_grid: &[f64],
    opts: &EigenOptions,
    phase_tol: f64,
) -> Result<OverlapCurves> {
    let n_up = n_sites / 2;
    let solve = |j1: f64, j2: f64| -> Result<(SectorBasis, EigenResult)> {
        let model = build_chain(n_sites, boundary, j1, j2)?;
        solve_ground(&model, n_up, opts)
    };
    let (_, res_i) = solve(1.0, 0.0)?;
    let (ref_i, _) = canonicalize_real(&res_i.eigenvectors[0], phase_tol)?;
    let (_, res_ii) = solve(1.0, 0.5)?;
    let (ref_ii, _) = canonicalize_real(&res_ii.eigenvectors[0], phase_tol)?;

    let (basis, res_iii) = solve(0.0, 1.0)?;
    let mult = res_iii.ground_multiplicity();
    let protocol = Protocol::odd_even(n_sites);
    // Members of the positivized set, mapped back to the original frame so
    // overlaps are taken against untransformed states.
    let (members, member_signs): (Vec<Vec<Complex64>>, Vec<f64>) = if mult == 1 {
        let (re, _) = canonicalize_real(&res_iii.eigenvectors[0], phase_tol)?;
        let v: Vec<Complex64> = re.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let s = crate::protocol::sign_average(&re);
        (vec![v], vec![s])
    } else {
        let outcome =
            positivize_degenerate_subspace(&basis, &res_iii.ground_vectors(), &protocol, opts.seed, phase_tol)?;
        let pulled: Vec<Vec<Complex64>> = outcome
            .vectors
            .iter()
            .map(|v| {
                basis
                    .configs()
                    .iter()
                    .zip(v)
                    .map(|(&c, &x)| protocol.phase(c).conj() * x)
                    .collect()
            })
            .collect();
        (pulled, outcome.sign_values.clone())
    };

    let mut with_heisenberg = Vec::with_capacity(j2_grid.len());
    let mut with_mg_point = Vec::with_capacity(j2_grid.len());
    let mut with_j2_only = Vec::with_capacity(j2_grid.len());
    for &j2 in j2_grid {
        let (_, res) = solve(1.0, j2)?;
        let (psi, _) = canonicalize_real(&res.eigenvectors[0], phase_tol)?;
        let dot = |r: &[f64]| -> f64 { r.iter().zip(&psi).map(|(a, b)| a * b).sum::<f64>().abs() };
        with_heisenberg.push(dot(&ref_i));
        with_mg_point.push(dot(&ref_ii));
        let best = members
            .iter()
            .map(|m| {
                m.iter()
                    .zip(&psi)
                    .map(|(a, &b)| a.conj() * b)
                    .sum::<Complex64>()
                    .norm()
            })
            .fold(0.0f64, f64::max);
        with_j2_only.push(best);
    }
    Ok(OverlapCurves {
        j2: j2_grid.to_vec(),
        with_heisenberg,
        with_mg_point,
        with_j2_only,
        j2_only_multiplicity: mult,
        j2_only_member_signs: member_signs,
    })
}

/// Location of the minimum of a sampled curve, refined by a parabola through
/// the minimal sample and its neighbors. Boundary minima return the grid
/// point itself.
pub fn minimum_location(grid: &[f64], values: &[f64]) -> Result<(f64, f64)> {
    if grid.len() != values.len() || grid.is_empty() {
        return Err(Error::InvalidGeometry(
            "minimum location needs matching nonempty grid and values".into(),
        ));
    }
    let mut i_min = 0usize;
    for (i, v) in values.iter().enumerate() {
        if v < &values[i_min] {
            i_min = i;
        }
    }
    if i_min == 0 || i_min + 1 == grid.len() {
        return Ok((grid[i_min], values[i_min]));
    }
    let (x0, x1, x2) = (grid[i_min - 1], grid[i_min], grid[i_min + 1]);
    let (y0, y1, y2) = (values[i_min - 1], values[i_min], values[i_min + 1]);
    let d1 = (y1 - y0) / (x1 - x0);
    let d2 = (y2 - y1) / (x2 - x1);
    let curv = (d2 - d1) / (x2 - x0);
    if curv <= 1e-15 {
        return Ok((x1, y1));
    }
    let x_star = (0.5 * (x0 + x1) - d1 / (2.0 * curv)).clamp(x0, x2);
    let y_star = y0 + d1 * (x_star - x0) + curv * (x_star - x0) * (x_star - x1);
    Ok((x_star, y_star))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Partition {
    ContiguousHalf,
    AbbaSublattice,
}

impl Partition {
    pub fn as_str(&self) -> &'static str {
        match self {
            Partition::ContiguousHalf => "contiguous_half",
            Partition::AbbaSublattice => "abba_sublattice",
        }
    }

    pub fn from_name(name: &str) -> Option<Partition> {
        match name {
            "contiguous_half" | "half" => Some(Partition::ContiguousHalf),
            "abba_sublattice" | "abba" => Some(Partition::AbbaSublattice),
            _ => None,
        }
    }
}

/// Site mask of subsystem A for the named bipartition.
pub fn bipartition_masks(n_sites: usize, kind: Partition) -> u64 {
    match kind {
        Partition::ContiguousHalf => (1u64 << (n_sites / 2)) - 1,
        Partition::AbbaSublattice => (0..n_sites)
            .filter(|i| matches!(i % 4, 1 | 2))
            .fold(0u64, |m, i| m | 1 << i),
    }
}

const ENTROPY_SUBSYSTEM_CAP: u32 = 16;

fn compress(config: u64, sites: &[usize]) -> u64 {
    sites
        .iter()
        .enumerate()
        .fold(0u64, |acc, (k, &s)| acc | ((config >> s & 1) << k))
}

/// Von Neumann entanglement entropy, in bits, of the subsystem selected by
/// `partition_mask`, for a state over a fixed-magnetization sector. The
/// reduced density matrix is assembled blockwise by subsystem magnetization;
/// its spectrum comes from Gram matrices on the smaller side of each block.
pub fn entanglement_entropy(state: &[Complex64], basis: &SectorBasis, partition_mask: u64) -> Result<f64> {
    let n = basis.n_sites;
    if state.len() != basis.len() {
        return Err(Error::BasisMismatch(format!(
            "state has {} amplitudes, basis has {}",
            state.len(),
            basis.len()
        )));
    }
    if partition_mask >> n != 0 {
        return Err(Error::InvalidGeometry(format!(
            "partition mask {partition_mask:#b} references sites outside 0..{n}"
        )));
    }
    let a_sites: Vec<usize> = (0..n).filter(|&i| partition_mask >> i & 1 == 1).collect();
    let b_sites: Vec<usize> = (0..n).filter(|&i| partition_mask >> i & 1 == 0).collect();
    if a_sites.len() as u32 > ENTROPY_SUBSYSTEM_CAP {
        return Err(Error::TooLarge(format!(
            "subsystem A has {} sites, above the cap of {ENTROPY_SUBSYSTEM_CAP}; pass the complement mask instead",
            a_sites.len()
        )));
    }
    if a_sites.is_empty() || b_sites.is_empty() {
        return Ok(0.0);
    }

    let max_abs = state.iter().map(|a| a.norm()).fold(0.0f64, f64::max);
    if max_abs <= 0.0 {
        return Err(Error::Format("cannot take the entropy of the zero vector".into()));
    }
    let is_real = state.iter().all(|a| a.im.abs() <= 1e-12 * max_abs);

    struct Block {
        rows: HashMap<u64, usize>,
        cols: HashMap<u64, usize>,
        entries: Vec<(usize, usize, Complex64)>,
    }
    let mut blocks: std::collections::BTreeMap<u32, Block> = std::collections::BTreeMap::new();
    for (&config, &amp) in basis.configs().iter().zip(state) {
        let ca = compress(config, &a_sites);
        let cb = compress(config, &b_sites);
        let block = blocks.entry(ca.count_ones()).or_insert_with(|| Block {
            rows: HashMap::new(),
            cols: HashMap::new(),
            entries: Vec::new(),
        });
        let next_row = block.rows.len();
        let r = *block.rows.entry(ca).or_insert(next_row);
        let next_col = block.cols.len();
        let c = *block.cols.entry(cb).or_insert(next_col);
        block.entries.push((r, c, amp));
    }

    let mut eigenvalues: Vec<f64> = Vec::new();
    for block in blocks.values() {
        let (nr, nc) = (block.rows.len(), block.cols.len());
        let d = nr.min(nc);
        if is_real {
            let mut m = nalgebra::DMatrix::<f64>::zeros(nr, nc);
            for &(r, c, a) in &block.entries {
                m[(r, c)] = a.re;
            }
            let gram = if nr <= nc { &m * m.transpose() } else { m.transpose() * &m };
            let se = gram.symmetric_eigen();
            eigenvalues.extend(se.eigenvalues.iter().map(|&l| l.max(0.0)));
        } else {
            let mut m = nalgebra::DMatrix::<Complex64>::zeros(nr, nc);
            for &(r, c, a) in &block.entries {
                m[(r, c)] += a;
            }
            let gram = if nr <= nc {
                &m * m.adjoint()
            } else {
                m.adjoint() * &m
            };
            // Hermitian G = A + iB embeds as real symmetric [[A, -B], [B, A]]
            // with each eigenvalue doubled.
            let mut big = nalgebra::DMatrix::<f64>::zeros(2 * d, 2 * d);
            for i in 0..d {
                for j in 0..d {
                    let z = gram[(i, j)];
                    big[(i, j)] = z.re;
                    big[(i + d, j + d)] = z.re;
                    big[(i, j + d)] = -z.im;
                    big[(i + d, j)] = z.im;
                }
            }
            let se = big.symmetric_eigen();
            let mut evs: Vec<f64> = se.eigenvalues.iter().copied().collect();
            evs.sort_by(|a, b| b.total_cmp(a));
            eigenvalues.extend(evs.into_iter().step_by(2).map(|l| l.max(0.0)));
        }
    }
    let total: f64 = eigenvalues.iter().sum();
    let norm: f64 = state.iter().map(|a| a.norm_sqr()).sum();
    if (total - norm).abs() > 1e-8 * norm.max(1.0) {
        return Err(Error::Internal(format!(
            "reduced density matrix trace {total} deviates from state norm {norm}"
        )));
    }
    let entropy = eigenvalues
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| -l * l.log2())
        .sum::<f64>();
    Ok(entropy.max(0.0))
}

/// Real-amplitude convenience wrapper around [`entanglement_entropy`].
pub fn entanglement_entropy_real(state: &[f64], basis: &SectorBasis, partition_mask: u64) -> Result<f64> {
    let c: Vec<Complex64> = state.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    entanglement_entropy(&c, basis, partition_mask)
}
