//! Lowest eigenpairs of sector-restricted Hamiltonians.
//!
//! Small sectors go through a dense symmetric eigendecomposition; larger ones
//! use Lanczos with full reorthogonalization, seeded start vectors, and
//! deflation so that degenerate levels are resolved one copy at a time.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hamiltonian::{dense_matrix, CompiledIR, HamiltonianIR};
use crate::lattice::SectorBasis;

#[derive(Debug, Clone)]
pub struct EigenOptions {
    pub k: usize,
    pub tol: f64,
    pub max_iterations: usize,
    pub seed: u64,
    /// Sectors at or below this dimension use the dense path.
    pub dense_cutoff: usize,
    /// Relative gap below which neighboring eigenvalues form one group.
    pub group_tol: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            k: 1,
            tol: 1e-10,
            max_iterations: 4000,
            seed: 1,
            dense_cutoff: 600,
            group_tol: 1e-9,
        }
    }
}

impl EigenOptions {
    pub fn with_k(k: usize) -> Self {
        EigenOptions {
            k,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<Complex64>>,
    pub residual_norms: Vec<f64>,
    pub degeneracy_groups: Vec<Vec<usize>>,
}

impl EigenResult {
    /// Size of the group containing the lowest eigenvalue.
    pub fn ground_multiplicity(&self) -> usize {
        self.degeneracy_groups.first().map_or(0, |g| g.len())
    }

    pub fn ground_vectors(&self) -> Vec<Vec<Complex64>> {
        let mult = self.ground_multiplicity();
        self.eigenvectors[..mult].to_vec()
    }
}

/// Partition of ascending eigenvalues into near-degenerate runs.
pub fn degeneracy_groups(eigenvalues: &[f64], group_tol: f64) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, &ev) in eigenvalues.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if (ev - eigenvalues[*g.last().unwrap()]).abs() < group_tol * ev.abs().max(1.0) => {
                g.push(i)
            }
            _ => groups.push(vec![i]),
        }
    }
    groups
}

/// Divides out the phase of the largest-magnitude amplitude (ties broken by
/// lowest index) and reports the residual imaginary magnitude. Errors when the
/// residual exceeds `phase_tol`.
pub fn canonicalize_real(state: &[Complex64], phase_tol: f64) -> Result<(Vec<f64>, f64)> {
    let mut best = 0usize;
    let mut best_norm = -1.0f64;
    for (i, a) in state.iter().enumerate() {
        let n = a.norm_sqr();
        if n > best_norm {
            best_norm = n;
            best = i;
        }
    }
    if best_norm <= 0.0 {
        return Err(Error::Format("cannot canonicalize the zero vector".into()));
    }
    let phase = state[best] / state[best].norm();
    let rotated: Vec<Complex64> = state.iter().map(|a| a * phase.conj()).collect();
    let residual = rotated.iter().map(|a| a.im.abs()).fold(0.0, f64::max);
    if residual > phase_tol {
        return Err(Error::NotRealUpToPhase {
            residual,
            tol: phase_tol,
        });
    }
    Ok((rotated.iter().map(|a| a.re).collect(), residual))
}

/// k lowest eigenpairs. Deterministic for a fixed seed and options.
pub fn lowest_eigenpairs(ir: &HamiltonianIR, basis: &SectorBasis, opts: &EigenOptions) -> Result<EigenResult> {
    let dim = basis.len();
    if opts.k == 0 || opts.k > dim {
        return Err(Error::InvalidSector(format!(
            "requested k={} eigenpairs from a dimension-{dim} sector",
            opts.k
        )));
    }
    let compiled = ir.compile();
    let mut result = if dim <= opts.dense_cutoff.min(crate::hamiltonian::DENSE_CAP) {
        dense_lowest(ir, basis, opts)?
    } else if compiled.is_all_real() {
        lanczos_lowest(&compiled, basis, opts)?
    } else {
        return Err(Error::TooLarge(format!(
            "iterative path supports real IRs only; dimension {dim} exceeds the dense cutoff"
        )));
    };
    // Residuals computed honestly through the matvec.
    result.residual_norms = result
        .eigenvectors
        .iter()
        .zip(&result.eigenvalues)
        .map(|(v, &ev)| {
            let hv = compiled.apply(basis, v).expect("dimension checked");
            hv.iter()
                .zip(v)
                .map(|(h, x)| (h - ev * x).norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    result.degeneracy_groups = degeneracy_groups(&result.eigenvalues, opts.group_tol);
    Ok(result)
}

/// Repeatedly raises k until the lowest degeneracy group no longer touches the
/// last computed eigenvalue, so the ground multiplicity is never truncated.
/// Starts at two pairs minimum: a single pair can never certify that the level
/// ends where it was cut.
pub fn ground_level(ir: &HamiltonianIR, basis: &SectorBasis, opts: &EigenOptions) -> Result<EigenResult> {
    let mut k = opts.k.max(2).min(basis.len());
    loop {
        let opts_k = EigenOptions {
            k,
            ..opts.clone()
        };
        let res = lowest_eigenpairs(ir, basis, &opts_k)?;
        let mult = res.ground_multiplicity();
        if mult < k || k == basis.len() {
            return Ok(res);
        }
        k = (k + 4).min(basis.len());
    }
}

/// Full ascending spectrum of the sector-restricted matrix via the dense path.
/// Subject to the dense size cap; complex Hermitian IRs go through the real
/// embedding, real ones directly.
pub fn dense_spectrum(ir: &HamiltonianIR, basis: &SectorBasis) -> Result<Vec<f64>> {
    let dim = basis.len();
    let m = dense_matrix(ir, basis)?;
    let mut evals: Vec<f64> = if ir.is_real() {
        let a = nalgebra::DMatrix::from_fn(dim, dim, |i, j| m[(i, j)].re);
        a.symmetric_eigen().eigenvalues.iter().copied().collect()
    } else {
        let mut big = nalgebra::DMatrix::zeros(2 * dim, 2 * dim);
        for i in 0..dim {
            for j in 0..dim {
                let z = m[(i, j)];
                big[(i, j)] = z.re;
                big[(i + dim, j + dim)] = z.re;
                big[(i, j + dim)] = -z.im;
                big[(i + dim, j)] = z.im;
            }
        }
        let mut doubled: Vec<f64> = big.symmetric_eigen().eigenvalues.iter().copied().collect();
        doubled.sort_by(f64::total_cmp);
        doubled.into_iter().step_by(2).collect()
    };
    evals.sort_by(f64::total_cmp);
    Ok(evals)
}

fn dense_lowest(ir: &HamiltonianIR, basis: &SectorBasis, opts: &EigenOptions) -> Result<EigenResult> {
    let dim = basis.len();
    let m = dense_matrix(ir, basis)?;
    let real = ir.is_real();
    let (evals, evecs): (Vec<f64>, Vec<Vec<Complex64>>) = if real {
        let a = nalgebra::DMatrix::from_fn(dim, dim, |i, j| m[(i, j)].re);
        let se = a.symmetric_eigen();
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&x, &y| se.eigenvalues[x].total_cmp(&se.eigenvalues[y]));
        let evals = order.iter().map(|&i| se.eigenvalues[i]).collect();
        let evecs = order
            .iter()
            .take(opts.k)
            .map(|&i| {
                se.eigenvectors
                    .column(i)
                    .iter()
                    .map(|&x| Complex64::new(x, 0.0))
                    .collect()
            })
            .collect();
        (evals, evecs)
    } else {
        // Hermitian H = A + iB embeds as the real symmetric [[A, -B], [B, A]]
        // with every eigenvalue doubled; eigenvectors (x, y) map to x + iy.
        let mut big = nalgebra::DMatrix::zeros(2 * dim, 2 * dim);
        for i in 0..dim {
            for j in 0..dim {
                let z = m[(i, j)];
                big[(i, j)] = z.re;
                big[(i + dim, j + dim)] = z.re;
                big[(i, j + dim)] = -z.im;
                big[(i + dim, j)] = z.im;
            }
        }
        let se = big.symmetric_eigen();
        let mut order: Vec<usize> = (0..2 * dim).collect();
        order.sort_by(|&x, &y| se.eigenvalues[x].total_cmp(&se.eigenvalues[y]));
        // Each true eigenvalue appears twice; keep every second entry.
        let evals: Vec<f64> = order.iter().step_by(2).map(|&i| se.eigenvalues[i]).collect();
        let mut evecs: Vec<Vec<Complex64>> = Vec::with_capacity(opts.k);
        let mut used: Vec<Vec<Complex64>> = Vec::new();
        for &i in order.iter() {
            if evecs.len() >= opts.k {
                break;
            }
            let col = se.eigenvectors.column(i);
            let mut v: Vec<Complex64> = (0..dim)
                .map(|r| Complex64::new(col[r], col[r + dim]))
                .collect();
            // The doubled spectrum yields pairs (x, y) and (-y, x) spanning the
            // same complex line; keep only vectors orthogonal to earlier picks.
            for u in &used {
                let inner: Complex64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (x, y) in v.iter_mut().zip(u) {
                    *x -= inner * y;
                }
            }
            let norm: f64 = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            if norm < 1e-8 {
                continue;
            }
            for x in &mut v {
                *x /= norm;
            }
            used.push(v.clone());
            evecs.push(v);
        }
        (evals, evecs)
    };
    Ok(EigenResult {
        eigenvalues: evals[..opts.k.min(evals.len())].to_vec(),
        eigenvectors: evecs,
        residual_norms: Vec::new(),
        degeneracy_groups: Vec::new(),
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Lanczos with full reorthogonalization against both the Krylov basis and
/// previously locked eigenvectors. Each sweep locks converged Ritz pairs from
/// the bottom of the spectrum; restarts continue in the orthogonal complement.
fn lanczos_lowest(compiled: &CompiledIR, basis: &SectorBasis, opts: &EigenOptions) -> Result<EigenResult> {
    let dim = basis.len();
    let max_subspace = 320.min(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut locked_vecs: Vec<Vec<f64>> = Vec::new();
    let mut locked_vals: Vec<f64> = Vec::new();
    let mut iterations = 0usize;
    let mut best_residual = f64::INFINITY;

    while locked_vals.len() < opts.k {
        // Fresh start vector orthogonal to everything locked.
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect();
        for u in &locked_vecs {
            let c = dot(&v, u);
            axpy(&mut v, -c, u);
        }
        let n0 = norm(&v);
        if n0 < 1e-12 {
            return Err(Error::Internal("start vector vanished after deflation".into()));
        }
        for x in &mut v {
            *x /= n0;
        }

        let mut krylov: Vec<Vec<f64>> = vec![v];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut locked_this_sweep = false;

        loop {
            iterations += 1;
            if iterations > opts.max_iterations {
                return Err(Error::Convergence {
                    iterations,
                    best_residual,
                });
            }
            let j = alphas.len();
            let vj = krylov[j].clone();
            let mut w = compiled.apply_real(basis, &vj)?;
            let alpha = dot(&w, &vj);
            alphas.push(alpha);
            axpy(&mut w, -alpha, &vj);
            if j > 0 {
                let beta_prev = betas[j - 1];
                axpy(&mut w, -beta_prev, &krylov[j - 1]);
            }
            // Full reorthogonalization, twice for safety.
            for _ in 0..2 {
                for u in locked_vecs.iter().chain(krylov.iter()) {
                    let c = dot(&w, u);
                    if c != 0.0 {
                        axpy(&mut w, -c, u);
                    }
                }
            }
            let beta = norm(&w);

            let subspace = alphas.len();
            let invariant = beta < 1e-12;
            let full = subspace == max_subspace || subspace == dim - locked_vecs.len();
            let check_now = invariant || full || subspace % 40 == 0;
            if check_now {
                let (theta, s) = tridiag_eigen(&alphas, &betas);
                // Lock converged Ritz pairs from the bottom up.
                let mut newly = Vec::new();
                for r in 0..subspace {
                    if locked_vals.len() + newly.len() >= opts.k && !invariant {
                        break;
                    }
                    let res = if invariant { 0.0 } else { (beta * s[(subspace - 1, r)]).abs() };
                    best_residual = best_residual.min(res);
                    if res <= opts.tol * theta[r].abs().max(1.0) {
                        newly.push(r);
                    } else {
                        break;
                    }
                }
                if !newly.is_empty() && (invariant || full || locked_vals.len() + newly.len() >= opts.k) {
                    for &r in &newly {
                        if locked_vals.len() >= opts.k {
                            break;
                        }
                        let mut y = vec![0.0; dim];
                        for (q, kv) in krylov.iter().enumerate().take(subspace) {
                            axpy(&mut y, s[(q, r)], kv);
                        }
                        // Guard orthogonality against everything already locked.
                        for u in &locked_vecs {
                            let c = dot(&y, u);
                            axpy(&mut y, -c, u);
                        }
                        let ny = norm(&y);
                        if ny < 1e-8 {
                            continue;
                        }
                        for x in &mut y {
                            *x /= ny;
                        }
                        locked_vecs.push(y);
                        locked_vals.push(theta[r]);
                        locked_this_sweep = true;
                    }
                    break;
                }
                if invariant || full {
                    break;
                }
            }
            if invariant {
                break;
            }
            betas.push(beta);
            let mut next = w;
            for x in &mut next {
                *x /= beta;
            }
            krylov.push(next);
        }
        if !locked_this_sweep {
            // Nothing converged in a full sweep; try again from a new seed
            // direction, bounded by max_iterations overall.
            continue;
        }
    }

    let mut order: Vec<usize> = (0..locked_vals.len()).collect();
    order.sort_by(|&a, &b| locked_vals[a].total_cmp(&locked_vals[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| locked_vals[i]).collect();
    let eigenvectors: Vec<Vec<Complex64>> = order
        .iter()
        .map(|&i| locked_vecs[i].iter().map(|&x| Complex64::new(x, 0.0)).collect())
        .collect();
    Ok(EigenResult {
        eigenvalues,
        eigenvectors,
        residual_norms: Vec::new(),
        degeneracy_groups: Vec::new(),
    })
}

/// Eigendecomposition of the symmetric tridiagonal (alphas, betas), eigenvalues
/// ascending with eigenvectors as matrix columns.
fn tridiag_eigen(alphas: &[f64], betas: &[f64]) -> (Vec<f64>, nalgebra::DMatrix<f64>) {
    let n = alphas.len();
    let mut t = nalgebra::DMatrix::zeros(n, n);
    for i in 0..n {
        t[(i, i)] = alphas[i];
        if i + 1 < n {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let se = t.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let evals = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vecs = nalgebra::DMatrix::zeros(n, n);
    for (new_c, &old_c) in order.iter().enumerate() {
        vecs.set_column(new_c, &se.eigenvectors.column(old_c));
    }
    (evals, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::heisenberg_terms;
    use crate::lattice::{build_chain, enumerate_sector, Boundary};
    use approx::assert_relative_eq;

    #[test]
    fn two_site_singlet() {
        let m = build_chain(2, Boundary::Open, 1.0, 0.0).unwrap();
        let ir = heisenberg_terms(&m);
        let b = enumerate_sector(2, 1).unwrap();
        let res = lowest_eigenpairs(&ir, &b, &EigenOptions::default()).unwrap();
        assert_relative_eq!(res.eigenvalues[0], -0.75, epsilon = 1e-12);
        assert!(res.residual_norms[0] < 1e-9);
    }

    #[test]
    fn grouping() {
        let groups = degeneracy_groups(&[-1.0, -1.0 + 1e-12, 0.0], 1e-9);
        assert_eq!(groups, vec![vec![0, 1], vec![2]]);
        let groups = degeneracy_groups(&[-2.0, -1.0, 0.5], 1e-9);
        assert_eq!(groups.len(), 3);
    }

    #[test]
    fn canonicalize_pure_phase() {
        let phase = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_3);
        let raw = vec![0.6, -0.8];
        let state: Vec<Complex64> = raw.iter().map(|&x| phase * x).collect();
        let (re, resid) = canonicalize_real(&state, 1e-8).unwrap();
        assert!(resid <= 1e-12);
        // Largest amplitude becomes positive.
        assert_relative_eq!(re[1], 0.8, epsilon = 1e-12);
        assert_relative_eq!(re[0], -0.6, epsilon = 1e-12);
    }

    #[test]
    fn canonicalize_rejects_truly_complex() {
        let state = vec![Complex64::new(0.8, 0.0), Complex64::new(0.0, 0.6)];
        assert!(matches!(
            canonicalize_real(&state, 1e-8),
            Err(Error::NotRealUpToPhase { .. })
        ));
    }

    #[test]
    fn canonicalize_idempotent() {
        let state = vec![
            Complex64::new(0.48, 0.0),
            Complex64::new(-0.64, 0.0),
            Complex64::new(0.6, 0.0),
        ];
        let (a, _) = canonicalize_real(&state, 1e-8).unwrap();
        let a_c: Vec<Complex64> = a.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let (b, _) = canonicalize_real(&a_c, 1e-8).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lanczos_matches_dense() {
        let m = build_chain(10, Boundary::Periodic, 1.0, 0.7).unwrap();
        let ir = heisenberg_terms(&m);
        let b = enumerate_sector(10, 5).unwrap();
        let dense = lowest_eigenpairs(&ir, &b, &EigenOptions {
            k: 4,
            dense_cutoff: 600,
            ..Default::default()
        })
        .unwrap();
        let iter = lowest_eigenpairs(&ir, &b, &EigenOptions {
            k: 4,
            dense_cutoff: 10,
            ..Default::default()
        })
        .unwrap();
        for (a, c) in dense.eigenvalues.iter().zip(&iter.eigenvalues) {
            assert_relative_eq!(a, c, epsilon = 1e-9);
        }
        for r in &iter.residual_norms {
            assert!(*r < 1e-8);
        }
    }

    #[test]
    fn lanczos_resolves_degeneracy() {
        // Twofold-degenerate ground pair.
        let m = build_chain(12, Boundary::Periodic, 1.0, 0.5).unwrap();
        let ir = heisenberg_terms(&m);
        let b = enumerate_sector(12, 6).unwrap();
        let res = lowest_eigenpairs(&ir, &b, &EigenOptions {
            k: 4,
            dense_cutoff: 10,
            ..Default::default()
        })
        .unwrap();
        assert_relative_eq!(res.eigenvalues[0], -4.5, epsilon = 1e-8);
        assert_relative_eq!(res.eigenvalues[1], -4.5, epsilon = 1e-8);
        assert!(res.eigenvalues[2] > -4.3);
        assert_eq!(res.ground_multiplicity(), 2);
        // Orthonormality of the returned pairs.
        for i in 0..res.eigenvectors.len() {
            for j in 0..=i {
                let inner: Complex64 = res.eigenvectors[i]
                    .iter()
                    .zip(&res.eigenvectors[j])
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(inner.re, expect, epsilon = 1e-8);
            }
        }
    }
}
