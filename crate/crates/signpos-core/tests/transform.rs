//! Transformed parent Hamiltonians: symbolic conjugation must match state-side
//! protocol application operator by operator and spectrum by spectrum.

use approx::assert_relative_eq;
use num_complex::Complex64;

use signpos_core::hamiltonian::apply_terms;
use signpos_core::{
    apply_protocol, build_chain, conjugate_by_cz, conjugate_by_diagonal, dense_spectrum,
    enumerate_sector, even_odd_transformed, heisenberg_terms, Boundary, HamiltonianIR, Protocol,
};

fn conjugated(ir: &HamiltonianIR, protocol: &Protocol) -> HamiltonianIR {
    let rotated = conjugate_by_diagonal(ir, &protocol.angles_half_pi).unwrap();
    if protocol.cz_pairs.is_empty() {
        rotated
    } else {
        conjugate_by_cz(&rotated, &protocol.cz_pairs).unwrap()
    }
}

/// Deterministic unit test state spread over the whole sector.
fn probe_state(dim: usize) -> Vec<Complex64> {
    let raw: Vec<Complex64> = (0..dim)
        .map(|i| {
            let t = i as f64 + 1.0;
            Complex64::new((1.3 * t).sin(), (0.7 * t).cos())
        })
        .collect();
    let norm: f64 = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    raw.into_iter().map(|a| a / norm).collect()
}

/// U H U^dag intertwines with U: applying H then the protocol must equal
/// applying the protocol then the transformed H.
fn check_intertwining(n: usize, boundary: Boundary, j2: f64, protocol: &Protocol) {
    let model = build_chain(n, boundary, 1.0, j2).unwrap();
    let ir = heisenberg_terms(&model);
    let transformed = conjugated(&ir, protocol);
    let basis = enumerate_sector(n, n / 2).unwrap();
    let psi = probe_state(basis.len());
    let h_psi = apply_terms(&ir, &basis, &psi).unwrap();
    let lhs = apply_protocol(protocol, &basis, &h_psi).unwrap();
    let u_psi = apply_protocol(protocol, &basis, &psi).unwrap();
    let rhs = apply_terms(&transformed, &basis, &u_psi).unwrap();
    for (a, b) in lhs.iter().zip(&rhs) {
        assert!(
            (a - b).norm() < 1e-12,
            "intertwining violated for {} at n={n} {boundary} j2={j2}",
            protocol.label
        );
    }
}

#[test]
fn intertwining_all_protocols() {
    for &boundary in &[Boundary::Open, Boundary::Periodic] {
        for &j2 in &[0.0, 0.4, 1.0] {
            check_intertwining(6, boundary, j2, &Protocol::mpr(6));
            check_intertwining(6, boundary, j2, &Protocol::odd_even(6));
            check_intertwining(6, boundary, j2, &Protocol::mpr_cz(6));
            check_intertwining(8, boundary, j2, &Protocol::torlai(8).unwrap());
        }
    }
}

#[test]
fn closed_form_even_odd_equals_generic_conjugation() {
    for n in [6usize, 8, 10] {
        let model = build_chain(n, Boundary::Open, 1.0, 0.7).unwrap();
        let direct = even_odd_transformed(&model).unwrap();
        let generic = conjugated(&heisenberg_terms(&model), &Protocol::odd_even(n));
        assert_eq!(direct.listing(), generic.listing(), "n={n}");
    }
}

#[test]
fn complement_pattern_yields_identical_operator() {
    // Flipping the complementary sublattice instead conjugates by a layer that
    // differs only by a sector-constant phase, so the operator is the same.
    for n in [6usize, 8] {
        let ir = heisenberg_terms(&build_chain(n, Boundary::Open, 1.0, 1.0).unwrap());
        let pattern = Protocol::odd_even(n).angles_half_pi;
        let complement: Vec<i8> = pattern.iter().map(|a| 2 - a).collect();
        let a = conjugate_by_diagonal(&ir, &pattern).unwrap();
        let b = conjugate_by_diagonal(&ir, &complement).unwrap();
        assert_eq!(a.listing(), b.listing(), "n={n}");
    }
}

#[test]
fn mpr_cz_operator_has_four_site_terms() {
    let ir = heisenberg_terms(&build_chain(6, Boundary::Periodic, 1.0, 1.0).unwrap());
    let transformed = conjugated(&ir, &Protocol::mpr_cz(6));
    assert!(transformed.is_real());
    assert_eq!(transformed.max_support(), 4);
    transformed.validate().unwrap();
    transformed.check_hermitian(1e-12).unwrap();
    // The plain Heisenberg operator never exceeds two-site support.
    assert_eq!(ir.max_support(), 2);
}

#[test]
fn conjugation_preserves_every_sector_spectrum() {
    for &boundary in &[Boundary::Open, Boundary::Periodic] {
        let model = build_chain(6, boundary, 1.0, 0.8).unwrap();
        let ir = heisenberg_terms(&model);
        for protocol in [Protocol::odd_even(6), Protocol::mpr_cz(6)] {
            let transformed = conjugated(&ir, &protocol);
            for n_up in 0..=6 {
                let basis = enumerate_sector(6, n_up).unwrap();
                let orig = dense_spectrum(&ir, &basis).unwrap();
                let conj = dense_spectrum(&transformed, &basis).unwrap();
                for (a, b) in orig.iter().zip(&conj) {
                    assert!(
                        (a - b).abs() < 1e-10,
                        "{} spectrum moved in sector n_up={n_up} ({a} vs {b})",
                        protocol.label
                    );
                }
            }
        }
    }
}

#[test]
fn complex_operator_keeps_real_spectrum() {
    // An odd angle difference across a bond puts a factor of i on the hopping
    // terms; the spectrum still matches through the Hermitian embedding path.
    let ir = heisenberg_terms(&build_chain(8, Boundary::Open, 1.0, 0.4).unwrap());
    let angles: Vec<i8> = (0..8).map(|i| (i % 2) as i8).collect();
    let rotated = conjugate_by_diagonal(&ir, &angles).unwrap();
    assert!(!rotated.is_real());
    let basis = enumerate_sector(8, 4).unwrap();
    let orig = dense_spectrum(&ir, &basis).unwrap();
    let conj = dense_spectrum(&rotated, &basis).unwrap();
    for (a, b) in orig.iter().zip(&conj) {
        assert_relative_eq!(a, b, epsilon = 1e-9);
    }
}

#[test]
fn torlai_and_even_transform_states_identically() {
    // On a fixed-Sz sector the quarter-turn layer equals the pi-layer up to a
    // sector-constant phase, so canonicalized transformed states coincide.
    for &j2 in &[0.4, 1.2] {
        let model = build_chain(8, Boundary::Open, 1.0, j2).unwrap();
        let ir = heisenberg_terms(&model);
        let basis = enumerate_sector(8, 4).unwrap();
        let res = signpos_core::ground_level(&ir, &basis, &signpos_core::EigenOptions::default()).unwrap();
        let ground = &res.eigenvectors[0];
        let via_torlai = apply_protocol(&Protocol::torlai(8).unwrap(), &basis, ground).unwrap();
        let via_even = apply_protocol(&Protocol::odd_even(8), &basis, ground).unwrap();
        let (a, _) = signpos_core::canonicalize_real(&via_torlai, 1e-8).unwrap();
        let (b, _) = signpos_core::canonicalize_real(&via_even, 1e-8).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12, "j2={j2}");
        }
    }
}
