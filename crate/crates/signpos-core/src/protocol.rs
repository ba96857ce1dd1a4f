//! Positivization protocols: layers of diagonal single-qubit rotations with
//! angles quantized to multiples of pi/2, optionally followed by CZ gates on
//! disjoint pairs. Includes the named protocol constructors, reference dimer
//! states, and sign-structure metrics.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::SectorBasis;

/// Relative cutoff below which an amplitude counts as an exact zero.
pub const ZERO_THRESHOLD_REL: f64 = 1e-12;

/// omega^k for omega = exp(i pi/4).
const OMEGA: [Complex64; 8] = {
    use std::f64::consts::FRAC_1_SQRT_2 as H;
    [
        Complex64::new(1.0, 0.0),
        Complex64::new(H, H),
        Complex64::new(0.0, 1.0),
        Complex64::new(-H, H),
        Complex64::new(-1.0, 0.0),
        Complex64::new(-H, -H),
        Complex64::new(0.0, -1.0),
        Complex64::new(H, -H),
    ]
};

/// A diagonal phase circuit: per-site Rz angles in units of pi/2 plus a layer
/// of CZ gates on disjoint pairs.
///
/// Convention: Rz(theta) = diag(e^{-i theta/2}, e^{+i theta/2}) on (|0>, |1>),
/// so a basis configuration picks up exp(i Sigma_j s_j theta_j / 2) with
/// s_j = +1 for a set bit and -1 otherwise, times (-1)^(number of CZ pairs
/// with both bits set).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Protocol {
    pub label: String,
    /// Angle of site i as an integer multiple of pi/2, each in -2..=2.
    pub angles_half_pi: Vec<i8>,
    #[serde(default)]
    pub cz_pairs: Vec<(usize, usize)>,
}

impl Protocol {
    pub fn new(label: impl Into<String>, angles_half_pi: Vec<i8>, cz_pairs: Vec<(usize, usize)>) -> Result<Self> {
        let p = Protocol {
            label: label.into(),
            angles_half_pi,
            cz_pairs,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn n_sites(&self) -> usize {
        self.angles_half_pi.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.angles_half_pi.len();
        for &a in &self.angles_half_pi {
            if !(-2..=2).contains(&a) {
                return Err(Error::InvalidProtocol(format!(
                    "angle {a} (in pi/2 units) is outside -2..=2"
                )));
            }
        }
        let mut seen = vec![false; n];
        for &(a, b) in &self.cz_pairs {
            if a >= n || b >= n {
                return Err(Error::InvalidProtocol(format!(
                    "cz pair ({a},{b}) references a site outside 0..{n}"
                )));
            }
            if a == b {
                return Err(Error::InvalidProtocol(format!("cz pair ({a},{b}) repeats a site")));
            }
            for s in [a, b] {
                if seen[s] {
                    return Err(Error::InvalidProtocol(format!("cz pairs overlap at site {s}")));
                }
                seen[s] = true;
            }
        }
        Ok(())
    }

    /// Number of non-identity gates (nonzero rotations plus CZ gates).
    pub fn gate_count(&self) -> usize {
        self.angles_half_pi.iter().filter(|&&a| a != 0).count() + self.cz_pairs.len()
    }

    /// Identity circuit.
    pub fn identity(n_sites: usize) -> Self {
        Protocol {
            label: "identity".into(),
            angles_half_pi: vec![0; n_sites],
            cz_pairs: Vec::new(),
        }
    }

    /// pi rotations on the odd sites of the two-sublattice ABAB pattern.
    pub fn mpr(n_sites: usize) -> Self {
        Protocol {
            label: "mpr".into(),
            angles_half_pi: (0..n_sites).map(|i| if i % 2 == 1 { 2 } else { 0 }).collect(),
            cz_pairs: Vec::new(),
        }
    }

    /// pi rotations on the B sites of the period-4 pattern A,B,B,A repeated
    /// from site 0 and truncated at `n_sites`. One constructor covers both
    /// chain-length parities; the complementary truncation differs only by a
    /// constant phase on any fixed-Sz sector.
    pub fn odd_even(n_sites: usize) -> Self {
        Protocol {
            label: "odd-even".into(),
            angles_half_pi: (0..n_sites)
                .map(|i| if matches!(i % 4, 1 | 2) { 2 } else { 0 })
                .collect(),
            cz_pairs: Vec::new(),
        }
    }

    /// +pi/2 on the A sites and -pi/2 on the B sites of the ABBA pattern.
    /// Requires an even number of site pairs.
    pub fn torlai(n_sites: usize) -> Result<Self> {
        if (n_sites / 2) % 2 != 0 {
            return Err(Error::UnsupportedParity(format!(
                "this protocol needs an even number of site pairs, got {n_sites} sites"
            )));
        }
        Ok(Protocol {
            label: "torlai".into(),
            angles_half_pi: (0..n_sites)
                .map(|i| if matches!(i % 4, 1 | 2) { -1 } else { 1 })
                .collect(),
            cz_pairs: Vec::new(),
        })
    }

    /// MPR rotations followed by CZ gates on the pairs (0,1), (2,3), ...
    pub fn mpr_cz(n_sites: usize) -> Self {
        let mut p = Protocol::mpr(n_sites);
        p.label = "mpr-cz".into();
        p.cz_pairs = (0..n_sites / 2).map(|k| (2 * k, 2 * k + 1)).collect();
        p
    }

    /// Phase factor this circuit attaches to one basis configuration.
    pub fn phase(&self, config: u64) -> Complex64 {
        let mut m: i64 = 0;
        for (j, &a) in self.angles_half_pi.iter().enumerate() {
            let s = if config >> j & 1 == 1 { 1 } else { -1 };
            m += a as i64 * s;
        }
        let mut phase = OMEGA[m.rem_euclid(8) as usize];
        for &(a, b) in &self.cz_pairs {
            if config >> a & 1 == 1 && config >> b & 1 == 1 {
                phase = -phase;
            }
        }
        phase
    }
}

/// Multiplies each amplitude by the protocol's diagonal phase. Norm preserved
/// exactly.
pub fn apply_protocol(protocol: &Protocol, basis: &SectorBasis, state: &[Complex64]) -> Result<Vec<Complex64>> {
    if protocol.n_sites() != basis.n_sites {
        return Err(Error::BasisMismatch(format!(
            "protocol has {} sites, basis has {}",
            protocol.n_sites(),
            basis.n_sites
        )));
    }
    if state.len() != basis.len() {
        return Err(Error::BasisMismatch(format!(
            "state has {} amplitudes, basis has {}",
            state.len(),
            basis.len()
        )));
    }
    protocol.validate()?;
    Ok(basis
        .configs()
        .iter()
        .zip(state)
        .map(|(&c, &a)| protocol.phase(c) * a)
        .collect())
}

/// Real-amplitude convenience wrapper around [`apply_protocol`].
pub fn apply_protocol_real(protocol: &Protocol, basis: &SectorBasis, state: &[f64]) -> Result<Vec<Complex64>> {
    let c: Vec<Complex64> = state.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    apply_protocol(protocol, basis, &c)
}

/// Sign-structure summary of a real amplitude vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignReport {
    /// Sigma_sigma sign(psi(sigma)) |psi(sigma)|^2, in [-1, 1] for unit states.
    pub sign_average: f64,
    /// Share of non-negligible amplitudes that are negative.
    pub negative_fraction: f64,
    pub n_negative: usize,
    pub n_nonzero: usize,
    /// Largest imaginary part left over by phase canonicalization.
    pub phase_residual: f64,
}

/// Metrics over real amplitudes. Amplitudes at or below
/// `ZERO_THRESHOLD_REL * max|psi|` count as exact zeros and are excluded from
/// the fraction.
pub fn sign_report(amps: &[f64], phase_residual: f64) -> SignReport {
    let max_abs = amps.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let threshold = ZERO_THRESHOLD_REL * max_abs;
    let mut sign_average = 0.0;
    let mut n_negative = 0usize;
    let mut n_nonzero = 0usize;
    for &a in amps {
        if a.abs() <= threshold {
            continue;
        }
        n_nonzero += 1;
        if a < 0.0 {
            n_negative += 1;
            sign_average -= a * a;
        } else {
            sign_average += a * a;
        }
    }
    let negative_fraction = if n_nonzero > 0 {
        n_negative as f64 / n_nonzero as f64
    } else {
        0.0
    };
    SignReport {
        sign_average,
        negative_fraction,
        n_negative,
        n_nonzero,
        phase_residual,
    }
}

/// The scalar sign average alone.
pub fn sign_average(amps: &[f64]) -> f64 {
    sign_report(amps, 0.0).sign_average
}

/// Normalized product of nearest-neighbor singlets on the pairs
/// (2k+offset, 2k+1+offset mod N), expanded over the half-filled sector.
/// The sign convention puts + on the component with the up spin at the first
/// site of each pair; every nonzero amplitude is +-2^(-N/4).
pub fn mg_product_state(basis: &SectorBasis, offset: usize) -> Result<Vec<f64>> {
    let n = basis.n_sites;
    if offset > 1 {
        return Err(Error::InvalidProtocol(format!(
            "dimer offset must be 0 or 1, got {offset}"
        )));
    }
    if basis.n_up != n / 2 {
        return Err(Error::InvalidSector(format!(
            "dimer product state lives in the half-filled sector, basis has n_up={}",
            basis.n_up
        )));
    }
    let pairs: Vec<(usize, usize)> = (0..n / 2)
        .map(|k| ((2 * k + offset) % n, (2 * k + 1 + offset) % n))
        .collect();
    let amp = 0.5f64.powi((n / 2) as i32).sqrt(); // 2^(-N/4)
    let mut out = vec![0.0; basis.len()];
    // Each pair holds exactly one up spin; enumerate the 2^(N/2) choices.
    for choice in 0u64..1 << (n / 2) {
        let mut config = 0u64;
        let mut sign = 1.0;
        for (k, &(first, second)) in pairs.iter().enumerate() {
            if choice >> k & 1 == 0 {
                config |= 1 << first;
            } else {
                config |= 1 << second;
                sign = -sign;
            }
        }
        let idx = basis
            .index_of(config)
            .ok_or_else(|| Error::Internal("dimer configuration missing from sector".into()))?;
        out[idx] += sign * amp;
    }
    Ok(out)
}

/// |<a|b>| for unit vectors over the same basis.
pub fn overlap_abs(a: &[Complex64], b: &[Complex64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::BasisMismatch(format!(
            "overlap between vectors of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let inner: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    Ok(inner.norm())
}

/// |<a|b>| for real unit vectors over the same basis.
pub fn overlap_abs_real(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::BasisMismatch(format!(
            "overlap between vectors of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>().abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::canonicalize_real;
    use crate::lattice::enumerate_sector;
    use approx::assert_relative_eq;

    #[test]
    fn named_patterns() {
        assert_eq!(Protocol::mpr(6).angles_half_pi, vec![0, 2, 0, 2, 0, 2]);
        assert_eq!(Protocol::mpr(4).angles_half_pi, vec![0, 2, 0, 2]);
        assert_eq!(Protocol::odd_even(8).angles_half_pi, vec![0, 2, 2, 0, 0, 2, 2, 0]);
        assert_eq!(Protocol::odd_even(6).angles_half_pi, vec![0, 2, 2, 0, 0, 2]);
        assert_eq!(Protocol::odd_even(4).angles_half_pi, vec![0, 2, 2, 0]);
        let t = Protocol::torlai(8).unwrap();
        assert_eq!(t.angles_half_pi, vec![1, -1, -1, 1, 1, -1, -1, 1]);
        assert!(matches!(Protocol::torlai(6), Err(Error::UnsupportedParity(_))));
        let mc = Protocol::mpr_cz(6);
        assert_eq!(mc.angles_half_pi, vec![0, 2, 0, 2, 0, 2]);
        assert_eq!(mc.cz_pairs, vec![(0, 1), (2, 3), (4, 5)]);
        assert_eq!(Protocol::mpr_cz(4).cz_pairs, vec![(0, 1), (2, 3)]);
    }

    #[test]
    fn identity_is_noop() {
        let basis = enumerate_sector(4, 2).unwrap();
        let state: Vec<Complex64> = (0..basis.len())
            .map(|i| Complex64::new(0.1 * i as f64 - 0.2, 0.0))
            .collect();
        let out = apply_protocol(&Protocol::identity(4), &basis, &state).unwrap();
        assert_eq!(out, state);
    }

    #[test]
    fn singlet_to_triplet() {
        let basis = enumerate_sector(2, 1).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        // + component carries the up spin on site 0 (config 0b01).
        let singlet = vec![h, -h];
        let p = Protocol::new("half", vec![0, 2], vec![]).unwrap();
        let out = apply_protocol_real(&p, &basis, &singlet).unwrap();
        let (re, resid) = canonicalize_real(&out, 1e-8).unwrap();
        assert!(resid < 1e-12);
        assert_relative_eq!(re[0], h, epsilon = 1e-12);
        assert_relative_eq!(re[1], h, epsilon = 1e-12);
    }

    #[test]
    fn cz_flips_double_occupancy() {
        let basis = enumerate_sector(2, 2).unwrap();
        let p = Protocol::new("cz", vec![0, 0], vec![(0, 1)]).unwrap();
        let out = apply_protocol_real(&p, &basis, &[1.0]).unwrap();
        assert_relative_eq!(out[0].re, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn norm_preserved() {
        let basis = enumerate_sector(6, 3).unwrap();
        let state: Vec<Complex64> = (0..basis.len())
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let p = Protocol::new("mix", vec![1, -2, 0, 2, -1, 1], vec![(0, 3), (2, 5)]).unwrap();
        let out = apply_protocol(&p, &basis, &state).unwrap();
        let n_in: f64 = state.iter().map(|a| a.norm_sqr()).sum();
        let n_out: f64 = out.iter().map(|a| a.norm_sqr()).sum();
        assert_relative_eq!(n_in, n_out, epsilon = 1e-13);
    }

    #[test]
    fn overlapping_cz_rejected() {
        assert!(Protocol::new("bad", vec![0; 4], vec![(0, 1), (1, 2)]).is_err());
        assert!(Protocol::new("bad", vec![0; 4], vec![(2, 2)]).is_err());
        assert!(Protocol::new("bad", vec![0, 0, 0, 3], vec![]).is_err());
    }

    #[test]
    fn torlai_matches_odd_even_on_sector() {
        // The two differ by a sector-constant phase, so canonicalized
        // amplitudes agree exactly.
        let basis = enumerate_sector(8, 4).unwrap();
        let state: Vec<f64> = (0..basis.len()).map(|i| ((i * 37 % 19) as f64 - 9.0) / 19.0).collect();
        let t = apply_protocol_real(&Protocol::torlai(8).unwrap(), &basis, &state).unwrap();
        let o = apply_protocol_real(&Protocol::odd_even(8), &basis, &state).unwrap();
        let (tr, _) = canonicalize_real(&t, 1e-8).unwrap();
        let (or, _) = canonicalize_real(&o, 1e-8).unwrap();
        for (a, b) in tr.iter().zip(&or) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn odd_even_complement_equivalent() {
        // Swapping the A and B roles shifts every config's phase by the same
        // constant within a fixed-Sz sector.
        let basis = enumerate_sector(6, 3).unwrap();
        let state: Vec<f64> = (0..basis.len()).map(|i| ((i * 11 % 7) as f64 - 3.0) / 7.0).collect();
        let complement: Vec<i8> = Protocol::odd_even(6)
            .angles_half_pi
            .iter()
            .map(|&a| 2 - a)
            .collect();
        let p_c = Protocol::new("complement", complement, vec![]).unwrap();
        let a = apply_protocol_real(&Protocol::odd_even(6), &basis, &state).unwrap();
        let b = apply_protocol_real(&p_c, &basis, &state).unwrap();
        let (ar, _) = canonicalize_real(&a, 1e-8).unwrap();
        let (br, _) = canonicalize_real(&b, 1e-8).unwrap();
        for (x, y) in ar.iter().zip(&br) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn sign_metrics() {
        let r = sign_report(&[0.8, -0.6], 0.0);
        assert_relative_eq!(r.sign_average, 0.64 - 0.36, epsilon = 1e-15);
        assert_relative_eq!(r.negative_fraction, 0.5, epsilon = 1e-15);
        assert_eq!(r.n_negative, 1);
        assert_eq!(r.n_nonzero, 2);
        // Exact zeros drop out of the counts.
        let r = sign_report(&[0.6, 0.0, 0.8], 0.0);
        assert_eq!(r.n_nonzero, 2);
        assert_relative_eq!(r.sign_average, 1.0, epsilon = 1e-15);
        assert_relative_eq!(r.negative_fraction, 0.0, epsilon = 1e-15);
        // Unit states satisfy sign_average + 2 * negative mass = 1.
        let amps = [0.5, -0.5, 0.5, 0.5];
        let neg_mass: f64 = amps.iter().filter(|&&a| a < 0.0).map(|a| a * a).sum();
        assert_relative_eq!(sign_average(&amps) + 2.0 * neg_mass, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn mg_state_structure() {
        let basis = enumerate_sector(4, 2).unwrap();
        let mg = mg_product_state(&basis, 0).unwrap();
        let nonzero: Vec<f64> = mg.iter().copied().filter(|a| a.abs() > 1e-15).collect();
        assert_eq!(nonzero.len(), 4);
        for a in &nonzero {
            assert_relative_eq!(a.abs(), 0.5, epsilon = 1e-15);
        }
        let norm: f64 = mg.iter().map(|a| a * a).sum();
        assert_relative_eq!(norm, 1.0, epsilon = 1e-13);
        // (01)(23) dimers: config 0b0101 has both up spins on first pair
        // sites, so its amplitude is +1/2.
        let idx = basis.index_of(0b0101).unwrap();
        assert_relative_eq!(mg[idx], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn mg_transformed_nonnegative() {
        let basis = enumerate_sector(8, 4).unwrap();
        let mg = mg_product_state(&basis, 0).unwrap();
        let out = apply_protocol_real(&Protocol::mpr(8), &basis, &mg).unwrap();
        let (re, _) = canonicalize_real(&out, 1e-8).unwrap();
        for a in &re {
            assert!(*a >= -1e-15);
        }
        assert_relative_eq!(sign_average(&re), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn mg_offset_wraps() {
        let basis = enumerate_sector(4, 2).unwrap();
        let mg = mg_product_state(&basis, 1).unwrap();
        // Pairs (1,2) and (3,0); config 0b1010 puts up spins on sites 1,3.
        let idx = basis.index_of(0b1010).unwrap();
        assert_relative_eq!(mg[idx], 0.5, epsilon = 1e-15);
        let norm: f64 = mg.iter().map(|a| a * a).sum();
        assert_relative_eq!(norm, 1.0, epsilon = 1e-13);
    }

    #[test]
    fn overlap_bounds() {
        let a = vec![1.0, 0.0, 0.0];
        let b = vec![0.0, 1.0, 0.0];
        assert_relative_eq!(overlap_abs_real(&a, &a).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(overlap_abs_real(&a, &b).unwrap(), 0.0, epsilon = 1e-15);
        assert!(overlap_abs_real(&a, &[1.0]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let p = Protocol::new("demo", vec![0, 2, -1, 1], vec![(0, 2)]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"label\""));
        assert!(s.contains("\"angles_half_pi\""));
        assert!(s.contains("\"cz_pairs\""));
        let q: Protocol = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
        // cz_pairs may be omitted on input.
        let q: Protocol = serde_json::from_str(r#"{"label":"x","angles_half_pi":[0,0]}"#).unwrap();
        assert!(q.cz_pairs.is_empty());
    }
}
