//! Metrics and positivization for degenerate ground levels.
//!
//! When an eigenlevel is k-fold degenerate, sign metrics depend on which
//! vector in the subspace is examined. Two treatments are provided: the
//! single in-subspace vector maximizing the sign average, and an orthogonal
//! rotation of the whole subspace maximizing the summed sign averages of all
//! k vectors (pairwise Jacobi-style rotations).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eigen::canonicalize_real;
use crate::error::{Error, Result};
use crate::lattice::SectorBasis;
use crate::protocol::{apply_protocol, sign_report, Protocol, SignReport};

const RESTARTS: u64 = 8;
const SWEEP_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 80;
const MAX_FIXED_POINT_ITERS: usize = 300;

#[derive(Debug, Clone)]
pub struct SubspaceOutcome {
    /// Orthonormal real vectors spanning the same subspace as the input,
    /// each oriented so its sign average is nonnegative.
    pub vectors: Vec<Vec<f64>>,
    pub sign_values: Vec<f64>,
    pub converged: bool,
    pub sweeps: usize,
    /// Largest canonicalization residual over the input vectors.
    pub phase_residual: f64,
}

/// Canonicalizes each transformed vector to real amplitudes and checks
/// orthonormality of the set.
fn realize_set(transformed: &[Vec<Complex64>], phase_tol: f64) -> Result<(Vec<Vec<f64>>, f64)> {
    if transformed.is_empty() {
        return Err(Error::Internal("empty degenerate subspace".into()));
    }
    let dim = transformed[0].len();
    let mut cols = Vec::with_capacity(transformed.len());
    let mut worst = 0.0f64;
    for v in transformed {
        if v.len() != dim {
            return Err(Error::BasisMismatch("subspace vectors differ in length".into()));
        }
        let (re, resid) = canonicalize_real(v, phase_tol)?;
        worst = worst.max(resid);
        cols.push(re);
    }
    for i in 0..cols.len() {
        for j in 0..=i {
            let inner: f64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
            let expect = if i == j { 1.0 } else { 0.0 };
            if (inner.abs() - expect).abs() > 1e-7 {
                return Err(Error::Internal(format!(
                    "subspace input is not orthonormal: |<v{i}|v{j}>| = {:.3e}",
                    inner.abs()
                )));
            }
        }
    }
    Ok((cols, worst))
}

fn sign_value(v: &[f64]) -> f64 {
    v.iter().map(|&a| if a < 0.0 { -a * a } else { a * a }).sum()
}

/// Flips the vector so its sign average is nonnegative; exact zeros fall back
/// to making the largest-magnitude amplitude positive.
fn orient(v: &mut [f64]) {
    let s = sign_value(v);
    let flip = if s.abs() > 1e-15 {
        s < 0.0
    } else {
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for (i, a) in v.iter().enumerate() {
            if a.abs() > best_abs {
                best_abs = a.abs();
                best = i;
            }
        }
        v[best] < 0.0
    };
    if flip {
        for a in v.iter_mut() {
            *a = -*a;
        }
    }
}

/// Uniformly-seeded random orthogonal k x k matrix via Gram-Schmidt.
fn random_orthogonal(k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    loop {
        let mut rows: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..k).map(|_| rng.gen::<f64>() - 0.5).collect())
            .collect();
        let mut ok = true;
        for i in 0..k {
            for j in 0..i {
                let c: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
                let rj = rows[j].clone();
                for (x, y) in rows[i].iter_mut().zip(&rj) {
                    *x -= c * y;
                }
            }
            let n: f64 = rows[i].iter().map(|x| x * x).sum::<f64>().sqrt();
            if n < 1e-6 {
                ok = false;
                break;
            }
            for x in rows[i].iter_mut() {
                *x /= n;
            }
        }
        if ok {
            return rows;
        }
    }
}

fn mix_columns(cols: &[Vec<f64>], trans: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = cols.len();
    let dim = cols[0].len();
    let mut out = vec![vec![0.0; dim]; k];
    for (r, row) in trans.iter().enumerate() {
        for (c, &w) in row.iter().enumerate() {
            if w != 0.0 {
                for m in 0..dim {
                    out[r][m] += w * cols[c][m];
                }
            }
        }
    }
    out
}

/// Best plane rotation (angle, objective) for the pair (a, b), maximizing
/// |sign(u)| + |sign(v)| with u = cos t a + sin t b, v = -sin t a + cos t b.
/// Exact up to floating point: the objective is piecewise sinusoidal in 2t
/// between amplitude zero crossings, so each arc is maximized in closed form.
fn best_pair_rotation(a: &[f64], b: &[f64]) -> (f64, f64) {
    use std::f64::consts::PI;
    let dim = a.len();
    let mut breaks: Vec<f64> = Vec::with_capacity(2 * dim + 2);
    for m in 0..dim {
        if a[m] == 0.0 && b[m] == 0.0 {
            continue;
        }
        breaks.push((-a[m]).atan2(b[m]).rem_euclid(PI));
        breaks.push(b[m].atan2(a[m]).rem_euclid(PI));
    }
    breaks.push(0.0);
    breaks.push(PI);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|x, y| (*x - *y).abs() < 1e-13);

    let eval = |t: f64| -> f64 {
        let (c, s) = (t.cos(), t.sin());
        let mut su = 0.0;
        let mut sv = 0.0;
        for m in 0..dim {
            let u = c * a[m] + s * b[m];
            let v = -s * a[m] + c * b[m];
            su += if u < 0.0 { -u * u } else { u * u };
            sv += if v < 0.0 { -v * v } else { v * v };
        }
        su.abs() + sv.abs()
    };

    let mut best_t = 0.0;
    let mut best_g = eval(0.0);
    let consider = |t: f64, best_t: &mut f64, best_g: &mut f64| {
        let g = eval(t);
        if g > *best_g + 1e-15 {
            *best_g = g;
            *best_t = t;
        }
    };
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi - lo < 1e-13 {
            continue;
        }
        // The arc endpoints themselves can carry the maximum (an amplitude
        // crossing zero exactly where the objective peaks).
        consider(lo, &mut best_t, &mut best_g);
        consider(hi, &mut best_t, &mut best_g);
        let mid = 0.5 * (lo + hi);
        let (c, s) = (mid.cos(), mid.sin());
        // Fixed sign pattern on this arc: S_u = C_u + A_u cos2t + B_u sin2t,
        // S_v = C_v - A_v cos2t - B_v sin2t.
        let (mut au, mut bu, mut av, mut bv) = (0.0, 0.0, 0.0, 0.0);
        for m in 0..dim {
            let u = c * a[m] + s * b[m];
            let v = -s * a[m] + c * b[m];
            let (sgu, sgv) = (u.signum(), v.signum());
            let half_diff = 0.5 * (a[m] * a[m] - b[m] * b[m]);
            let cross = a[m] * b[m];
            au += sgu * half_diff;
            bu += sgu * cross;
            av += sgv * half_diff;
            bv += sgv * cross;
        }
        consider(mid, &mut best_t, &mut best_g);
        // Extrema of eps*S_u + del*S_v over the arc, for the two independent
        // sign combinations; each is a sinusoid in 2t.
        for (ca, cb) in [(au - av, bu - bv), (au + av, bu + bv)] {
            if ca == 0.0 && cb == 0.0 {
                continue;
            }
            let base = 0.5 * cb.atan2(ca);
            for off in [0.0, 0.5 * PI] {
                let t = (base + off).rem_euclid(PI);
                if t > lo + 1e-14 && t < hi - 1e-14 {
                    consider(t, &mut best_t, &mut best_g);
                }
            }
        }
    }
    (best_t, best_g)
}

fn jacobi_sweeps(cols: &mut [Vec<f64>]) -> (bool, usize) {
    let k = cols.len();
    let mut prev: f64 = cols.iter().map(|v| sign_value(v).abs()).sum();
    for sweep in 1..=MAX_SWEEPS {
        for i in 0..k {
            for j in i + 1..k {
                let (t, g) = best_pair_rotation(&cols[i], &cols[j]);
                let current = sign_value(&cols[i]).abs() + sign_value(&cols[j]).abs();
                if g > current + 1e-14 {
                    let (c, s) = (t.cos(), t.sin());
                    for m in 0..cols[i].len() {
                        let (x, y) = (cols[i][m], cols[j][m]);
                        cols[i][m] = c * x + s * y;
                        cols[j][m] = -s * x + c * y;
                    }
                }
            }
        }
        let total: f64 = cols.iter().map(|v| sign_value(v).abs()).sum();
        if total - prev < SWEEP_TOL {
            return (true, sweep);
        }
        prev = total;
    }
    (false, MAX_SWEEPS)
}

/// Orthogonal in-subspace transform maximizing the summed sign averages,
/// restarted from several seeded random orientations; the best result wins.
/// Input vectors are the protocol-transformed degenerate eigenvectors.
pub fn positivize_transformed(transformed: &[Vec<Complex64>], seed: u64, phase_tol: f64) -> Result<SubspaceOutcome> {
    let (cols, phase_residual) = realize_set(transformed, phase_tol)?;
    let k = cols.len();
    if k == 1 {
        let mut v = cols.into_iter().next().unwrap();
        orient(&mut v);
        let s = sign_value(&v);
        return Ok(SubspaceOutcome {
            sign_values: vec![s],
            vectors: vec![v],
            converged: true,
            sweeps: 0,
            phase_residual,
        });
    }
    let mut best: Option<(f64, SubspaceOutcome)> = None;
    for r in 0..RESTARTS {
        let mut work = if r == 0 {
            cols.clone()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r));
            mix_columns(&cols, &random_orthogonal(k, &mut rng))
        };
        let (converged, sweeps) = jacobi_sweeps(&mut work);
        let total: f64 = work.iter().map(|v| sign_value(v).abs()).sum();
        if best.as_ref().is_none_or(|(t, _)| total > *t + 1e-12) {
            for v in work.iter_mut() {
                orient(v);
            }
            let sign_values: Vec<f64> = work.iter().map(|v| sign_value(v)).collect();
            best = Some((
                total,
                SubspaceOutcome {
                    vectors: work,
                    sign_values,
                    converged,
                    sweeps,
                    phase_residual,
                },
            ));
        }
    }
    Ok(best.unwrap().1)
}

/// In-subspace unit vector maximizing the sign average, found by a monotone
/// fixed-point iteration restarted from several seeded directions.
///
/// For coefficients c over the real orthonormal columns Q, the sign average
/// of Qc equals c^T B c with B = Q^T diag(sign(Qc)) Q; replacing c by the top
/// eigenvector of B never decreases the objective.
pub fn max_sign_transformed(transformed: &[Vec<Complex64>], seed: u64, phase_tol: f64) -> Result<(Vec<f64>, SignReport)> {
    let (cols, phase_residual) = realize_set(transformed, phase_tol)?;
    let k = cols.len();
    let dim = cols[0].len();
    if k == 1 {
        let mut v = cols.into_iter().next().unwrap();
        orient(&mut v);
        let report = sign_report(&v, phase_residual);
        return Ok((v, report));
    }
    let mut best_vec: Option<Vec<f64>> = None;
    let mut best_s = f64::NEG_INFINITY;
    for r in 0..RESTARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r));
        let mut c: Vec<f64> = if r == 0 {
            let mut e = vec![0.0; k];
            e[0] = 1.0;
            e
        } else {
            let raw: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() - 0.5).collect();
            let n: f64 = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
            raw.iter().map(|x| x / n.max(1e-12)).collect()
        };
        let mut s_prev = f64::NEG_INFINITY;
        for _ in 0..MAX_FIXED_POINT_ITERS {
            let x: Vec<f64> = (0..dim)
                .map(|m| (0..k).map(|q| c[q] * cols[q][m]).sum())
                .collect();
            // B = Q^T diag(sign(x)) Q.
            let mut b = nalgebra::DMatrix::zeros(k, k);
            for p in 0..k {
                for q in p..k {
                    let val: f64 = (0..dim)
                        .map(|m| x[m].signum() * cols[p][m] * cols[q][m])
                        .sum();
                    b[(p, q)] = val;
                    b[(q, p)] = val;
                }
            }
            let se = b.symmetric_eigen();
            let mut top = 0usize;
            for i in 1..k {
                if se.eigenvalues[i] > se.eigenvalues[top] {
                    top = i;
                }
            }
            let mut next: Vec<f64> = se.eigenvectors.column(top).iter().copied().collect();
            let x_next: Vec<f64> = (0..dim)
                .map(|m| (0..k).map(|q| next[q] * cols[q][m]).sum())
                .collect();
            let mut s_next = sign_value(&x_next);
            if s_next < 0.0 {
                for v in next.iter_mut() {
                    *v = -*v;
                }
                s_next = -s_next;
            }
            c = next;
            if (s_next - s_prev).abs() < 1e-13 {
                s_prev = s_next;
                break;
            }
            s_prev = s_next;
        }
        if s_prev > best_s + 1e-13 {
            best_s = s_prev;
            let mut x: Vec<f64> = (0..dim)
                .map(|m| (0..k).map(|q| c[q] * cols[q][m]).sum())
                .collect();
            orient(&mut x);
            best_vec = Some(x);
        }
    }
    let v = best_vec.expect("at least one restart ran");
    let report = sign_report(&v, phase_residual);
    Ok((v, report))
}

/// Applies the protocol to each degenerate eigenvector, then rotates the
/// subspace to maximize the summed sign averages. Returns the rotated
/// orthonormal set with per-vector sign values.
pub fn positivize_degenerate_subspace(
    basis: &SectorBasis,
    eigenvectors: &[Vec<Complex64>],
    protocol: &Protocol,
    seed: u64,
    phase_tol: f64,
) -> Result<SubspaceOutcome> {
    let transformed: Vec<Vec<Complex64>> = eigenvectors
        .iter()
        .map(|v| apply_protocol(protocol, basis, v))
        .collect::<Result<_>>()?;
    positivize_transformed(&transformed, seed, phase_tol)
}

/// Applies the protocol to each degenerate eigenvector and reports the
/// in-subspace vector with the largest sign average.
pub fn max_sign_in_subspace(
    basis: &SectorBasis,
    eigenvectors: &[Vec<Complex64>],
    protocol: &Protocol,
    seed: u64,
    phase_tol: f64,
) -> Result<(Vec<f64>, SignReport)> {
    let transformed: Vec<Vec<Complex64>> = eigenvectors
        .iter()
        .map(|v| apply_protocol(protocol, basis, v))
        .collect::<Result<_>>()?;
    max_sign_transformed(&transformed, seed, phase_tol)
}
