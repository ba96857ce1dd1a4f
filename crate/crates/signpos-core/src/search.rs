//! Searches over protocol space maximizing |sign average| of a transformed
//! ground state: exhaustive single-qubit enumeration, periodic-template
//! restriction, and rotation layers combined with CZ perfect matchings.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use serde::Serialize;

use crate::eigen::canonicalize_real;
use crate::error::{Error, Result};
use crate::lattice::{chain_distance, Boundary, SectorBasis};
use crate::protocol::{apply_protocol, sign_report, Protocol, SignReport};
use crate::subspace::max_sign_transformed;

/// Refusal threshold for exhaustive enumeration: 5^13, the full
/// fixed-first-site space of a 14-site chain. Enumerations this large must be
/// sharded into strictly smaller ranges.
pub const DEFAULT_MAX_CANDIDATES: u128 = 1_220_703_125;

#[derive(Debug, Clone)]
pub struct SearchConfig {
    /// Pin site 0 to angle 0. Sound within a fixed-Sz sector: adding one
    /// constant to every angle shifts all amplitudes by a common phase.
    pub fix_first_site: bool,
    /// The allowed angles in pi/2 units; enumeration digits index this list.
    pub angle_set: [i8; 5],
    pub max_candidates: u128,
    pub top_k: usize,
    /// Candidates whose transformed state fails real canonicalization at this
    /// tolerance are skipped, not scored.
    pub phase_tol: f64,
    /// Chain-distance cap for CZ matchings.
    pub cz_max_distance: usize,
    pub seed: u64,
    /// Half-open candidate index range for resumable sharding.
    pub shard: Option<(u128, u128)>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            fix_first_site: true,
            angle_set: [-2, -1, 0, 1, 2],
            max_candidates: DEFAULT_MAX_CANDIDATES,
            top_k: 5,
            phase_tol: 1e-8,
            cz_max_distance: 1,
            seed: 1,
            shard: None,
        }
    }
}

impl SearchConfig {
    fn validate(&self) -> Result<()> {
        if self.top_k == 0 {
            return Err(Error::InvalidProtocol("search top_k must be at least 1".into()));
        }
        if self.max_candidates == 0 {
            return Err(Error::InvalidProtocol("search candidate cap must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RankedProtocol {
    pub protocol: Protocol,
    pub report: SignReport,
    /// Position in the enumeration order, for reproducibility.
    pub candidate_index: u128,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    /// Best candidates by descending |sign_average|; ties prefer fewer gates,
    /// then lexicographically smaller angle lists.
    pub ranked: Vec<RankedProtocol>,
    pub n_evaluated: u64,
    pub n_skipped_nonreal: u64,
    pub wall_time: Duration,
}

/// JSON export row for one ranked candidate.
#[derive(Debug, Clone, Serialize)]
pub struct SearchResultRow {
    pub protocol: Protocol,
    pub sign_average: f64,
    pub negative_fraction: f64,
}

impl SearchResult {
    pub fn export_rows(&self) -> Vec<SearchResultRow> {
        self.ranked
            .iter()
            .map(|r| SearchResultRow {
                protocol: r.protocol.clone(),
                sign_average: r.report.sign_average,
                negative_fraction: r.report.negative_fraction,
            })
            .collect()
    }
}

fn ranking_order(a: &RankedProtocol, b: &RankedProtocol) -> std::cmp::Ordering {
    b.report
        .sign_average
        .abs()
        .total_cmp(&a.report.sign_average.abs())
        .then_with(|| a.protocol.gate_count().cmp(&b.protocol.gate_count()))
        .then_with(|| a.protocol.angles_half_pi.cmp(&b.protocol.angles_half_pi))
        .then_with(|| a.candidate_index.cmp(&b.candidate_index))
}

/// Decodes index -> per-site angles; the first free site is the most
/// significant digit, so index order equals lexicographic angle order when the
/// angle set is ascending.
fn angles_for_index(n_sites: usize, fix_first: bool, angle_set: &[i8; 5], index: u128) -> Vec<i8> {
    let free = if fix_first { n_sites - 1 } else { n_sites };
    let mut digits = vec![0u8; free];
    let mut rest = index;
    for d in digits.iter_mut().rev() {
        *d = (rest % 5) as u8;
        rest /= 5;
    }
    let mut angles = Vec::with_capacity(n_sites);
    if fix_first {
        angles.push(0);
    }
    angles.extend(digits.iter().map(|&d| angle_set[d as usize]));
    angles
}

fn exhaustive_total(n_sites: usize, fix_first: bool) -> u128 {
    let free = if fix_first { n_sites as u32 - 1 } else { n_sites as u32 };
    5u128.pow(free)
}

/// All single-qubit angle assignments in enumeration order. Refuses with the
/// candidate count when it reaches the configured threshold.
pub fn enumerate_single_qubit_protocols<'a>(
    n_sites: usize,
    config: &'a SearchConfig,
) -> Result<impl Iterator<Item = Protocol> + 'a> {
    config.validate()?;
    let total = exhaustive_total(n_sites, config.fix_first_site);
    if total >= config.max_candidates {
        return Err(Error::TooManyCandidates {
            count: total,
            cap: config.max_candidates,
        });
    }
    Ok((0..total).map(move |i| Protocol {
        label: format!("enum-{i}"),
        angles_half_pi: angles_for_index(n_sites, config.fix_first_site, &config.angle_set, i),
        cz_pairs: Vec::new(),
    }))
}

/// One candidate scored against the (possibly degenerate) ground set.
/// Returns None when the transformed state is not real up to a phase.
fn score_candidate(
    protocol: &Protocol,
    basis: &SectorBasis,
    states: &[Vec<f64>],
    config: &SearchConfig,
) -> Result<Option<SignReport>> {
    let transformed: Vec<Vec<Complex64>> = states
        .iter()
        .map(|s| {
            let c: Vec<Complex64> = s.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            apply_protocol(protocol, basis, &c)
        })
        .collect::<Result<_>>()?;
    if transformed.len() == 1 {
        match canonicalize_real(&transformed[0], config.phase_tol) {
            Ok((re, resid)) => Ok(Some(sign_report(&re, resid))),
            Err(Error::NotRealUpToPhase { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    } else {
        match max_sign_transformed(&transformed, config.seed, config.phase_tol) {
            Ok((_, report)) => Ok(Some(report)),
            Err(Error::NotRealUpToPhase { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

struct BlockResult {
    top: Vec<RankedProtocol>,
    n_evaluated: u64,
    n_skipped: u64,
}

fn merge_top(top: &mut Vec<RankedProtocol>, entry: RankedProtocol, k: usize) {
    let pos = top
        .binary_search_by(|e| ranking_order(e, &entry))
        .unwrap_or_else(|p| p);
    top.insert(pos, entry);
    top.truncate(k);
}

fn eval_block<F>(make: &F, range: std::ops::Range<u128>, basis: &SectorBasis, states: &[Vec<f64>], config: &SearchConfig) -> Result<BlockResult>
where
    F: Fn(u128) -> Option<Protocol> + Sync,
{
    let mut top = Vec::new();
    let mut n_evaluated = 0u64;
    let mut n_skipped = 0u64;
    for i in range {
        let Some(protocol) = make(i) else { continue };
        match score_candidate(&protocol, basis, states, config)? {
            Some(report) => {
                n_evaluated += 1;
                merge_top(
                    &mut top,
                    RankedProtocol {
                        protocol,
                        report,
                        candidate_index: i,
                    },
                    config.top_k,
                );
            }
            None => n_skipped += 1,
        }
    }
    Ok(BlockResult {
        top,
        n_evaluated,
        n_skipped,
    })
}

/// Evaluates candidates `start..end` produced by `make` and keeps the top k.
/// Parallel blocks merge in index order, so results never depend on the
/// worker count.
fn run_search<F>(
    make: F,
    start: u128,
    end: u128,
    basis: &SectorBasis,
    states: &[Vec<f64>],
    config: &SearchConfig,
) -> Result<SearchResult>
where
    F: Fn(u128) -> Option<Protocol> + Sync,
{
    if start >= end {
        return Err(Error::InvalidProtocol("the search candidate range is empty".into()));
    }
    if states.is_empty() {
        return Err(Error::InvalidProtocol("search needs at least one ground vector".into()));
    }
    let clock = Instant::now();
    let total = end - start;
    let blocks: Vec<std::ops::Range<u128>> = {
        let n_blocks: u128 = ((total / 4096) + 1).min(4096);
        let step = total.div_ceil(n_blocks);
        (0..n_blocks)
            .map(|b| (start + b * step)..(start + ((b + 1) * step).min(total)))
            .filter(|r| r.start < r.end)
            .collect()
    };
    #[cfg(feature = "parallel")]
    let results: Result<Vec<BlockResult>> = {
        use rayon::prelude::*;
        blocks
            .into_par_iter()
            .map(|r| eval_block(&make, r, basis, states, config))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Result<Vec<BlockResult>> = blocks
        .into_iter()
        .map(|r| eval_block(&make, r, basis, states, config))
        .collect();
    let mut ranked = Vec::new();
    let mut n_evaluated = 0u64;
    let mut n_skipped = 0u64;
    for block in results? {
        n_evaluated += block.n_evaluated;
        n_skipped += block.n_skipped;
        for e in block.top {
            merge_top(&mut ranked, e, config.top_k);
        }
    }
    Ok(SearchResult {
        ranked,
        n_evaluated,
        n_skipped_nonreal: n_skipped,
        wall_time: clock.elapsed(),
    })
}

/// Exhaustive search over all single-qubit angle assignments.
///
/// `states` holds the canonicalized real ground vectors: one entry for a
/// non-degenerate level, or the full degenerate set, in which case each
/// candidate is scored by the in-subspace maximum of the sign average.
pub fn brute_force_search(
    states: &[Vec<f64>],
    basis: &SectorBasis,
    config: &SearchConfig,
) -> Result<SearchResult> {
    config.validate()?;
    let total = exhaustive_total(basis.n_sites, config.fix_first_site);
    let (start, end) = match config.shard {
        Some((s, e)) => {
            if s > e || e > total {
                return Err(Error::InvalidProtocol(format!(
                    "shard {s}..{e} is outside the candidate range 0..{total}"
                )));
            }
            (s, e)
        }
        None => (0, total),
    };
    if end - start >= config.max_candidates {
        return Err(Error::TooManyCandidates {
            count: end - start,
            cap: config.max_candidates,
        });
    }
    let n_sites = basis.n_sites;
    let fix = config.fix_first_site;
    let angle_set = config.angle_set;
    run_search(
        move |i| {
            Some(Protocol {
                label: format!("brute-{i}"),
                angles_half_pi: angles_for_index(n_sites, fix, &angle_set, i),
                cz_pairs: Vec::new(),
            })
        },
        start,
        end,
        basis,
        states,
        config,
    )
}

/// Encodes an angle list as a base-5 integer for duplicate detection.
fn encode_angles(angles: &[i8], angle_set: &[i8; 5]) -> u64 {
    let mut code = 0u64;
    for &a in angles.iter().rev() {
        let d = angle_set.iter().position(|&x| x == a).expect("angle from set") as u64;
        code = code * 5 + d;
    }
    code
}

/// Search restricted to period-repeating angle patterns and their cyclic
/// shifts, truncated to the chain length. Duplicate assignments (after
/// truncation) are evaluated once.
pub fn template_search(
    states: &[Vec<f64>],
    basis: &SectorBasis,
    period: usize,
    config: &SearchConfig,
) -> Result<SearchResult> {
    config.validate()?;
    if !matches!(period, 1 | 2 | 4 | 8) {
        return Err(Error::InvalidProtocol(format!(
            "template period must be 1, 2, 4, or 8, got {period}"
        )));
    }
    let n_sites = basis.n_sites;
    let n_patterns = 5u128.pow(period as u32);
    let mut seen = std::collections::HashSet::new();
    let mut candidates: Vec<Vec<i8>> = Vec::new();
    for p in 0..n_patterns {
        let mut pattern = vec![0i8; period];
        let mut rest = p;
        for d in pattern.iter_mut().rev() {
            *d = config.angle_set[(rest % 5) as usize];
            rest /= 5;
        }
        for shift in 0..period {
            let angles: Vec<i8> = (0..n_sites)
                .map(|i| pattern[(i + period - shift) % period])
                .collect();
            if seen.insert(encode_angles(&angles, &config.angle_set)) {
                candidates.push(angles);
            }
        }
    }
    if candidates.len() as u128 >= config.max_candidates {
        return Err(Error::TooManyCandidates {
            count: candidates.len() as u128,
            cap: config.max_candidates,
        });
    }
    let label_period = period;
    let n_candidates = candidates.len() as u128;
    run_search(
        move |i| {
            let angles = candidates[i as usize].clone();
            Some(Protocol {
                label: format!("template-p{label_period}-{i}"),
                angles_half_pi: angles,
                cz_pairs: Vec::new(),
            })
        },
        0,
        n_candidates,
        basis,
        states,
        config,
    )
}

/// All perfect matchings of the chain with pair distance at most
/// `cz_max_distance`, in deterministic order. Distance 1 gives the single
/// adjacent matching for open chains and the two shifted adjacent matchings
/// for periodic ones.
pub fn cz_matchings(n_sites: usize, boundary: Boundary, cz_max_distance: usize) -> Result<Vec<Vec<(usize, usize)>>> {
    if n_sites % 2 != 0 {
        return Err(Error::InvalidGeometry(format!(
            "perfect matchings need an even site count, got {n_sites}"
        )));
    }
    let mut out = Vec::new();
    let mut matched = vec![false; n_sites];
    let mut current: Vec<(usize, usize)> = Vec::new();
    fn recurse(
        n: usize,
        boundary: Boundary,
        dmax: usize,
        matched: &mut Vec<bool>,
        current: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        let Some(first) = matched.iter().position(|&m| !m) else {
            out.push(current.clone());
            return;
        };
        matched[first] = true;
        for partner in first + 1..n {
            if matched[partner] || chain_distance(n, boundary, first, partner) > dmax {
                continue;
            }
            matched[partner] = true;
            current.push((first, partner));
            recurse(n, boundary, dmax, matched, current, out);
            current.pop();
            matched[partner] = false;
        }
        matched[first] = false;
    }
    recurse(n_sites, boundary, cz_max_distance, &mut matched, &mut current, &mut out);
    Ok(out)
}

/// Search over the three named rotation layers combined with every CZ perfect
/// matching within the distance cap.
pub fn search_mpr_plus_cz(
    states: &[Vec<f64>],
    basis: &SectorBasis,
    boundary: Boundary,
    config: &SearchConfig,
) -> Result<SearchResult> {
    config.validate()?;
    let n_sites = basis.n_sites;
    let matchings = cz_matchings(n_sites, boundary, config.cz_max_distance)?;
    let odd_even = Protocol::odd_even(n_sites);
    let complement: Vec<i8> = odd_even.angles_half_pi.iter().map(|&a| 2 - a).collect();
    let layers: Vec<(&str, Vec<i8>)> = vec![
        ("mpr", Protocol::mpr(n_sites).angles_half_pi),
        ("odd-even", odd_even.angles_half_pi.clone()),
        ("odd-even-complement", complement),
    ];
    let total = (layers.len() * matchings.len()) as u128;
    if total >= config.max_candidates {
        return Err(Error::TooManyCandidates {
            count: total,
            cap: config.max_candidates,
        });
    }
    let n_matchings = matchings.len() as u128;
    run_search(
        move |i| {
            let layer = &layers[(i / n_matchings) as usize];
            let matching = &matchings[(i % n_matchings) as usize];
            Some(Protocol {
                label: format!("{}+cz{}", layer.0, i % n_matchings),
                angles_half_pi: layer.1.clone(),
                cz_pairs: matching.clone(),
            })
        },
        0,
        total,
        basis,
        states,
        config,
    )
}
