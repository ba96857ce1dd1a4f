//! One function per subcommand. Each resolves its configuration, runs the
//! core operations, writes the requested outputs, and returns an error when
//! any requested row failed.

use std::fs::File;
use std::io::{BufWriter, Write};

use anyhow::{bail, Context, Result};
use num_complex::Complex64;
use serde_json::json;

use signpos_core::csvio::{write_entropy_csv, write_overlap_csv, write_sweep_csv};
use signpos_core::{
    apply_protocol, bipartition_masks, brute_force_search, build_chain, canonicalize_real,
    conjugate_by_cz, conjugate_by_diagonal, dense_spectrum, entanglement_entropy, ground_level,
    heisenberg_terms, line_chart, lowest_eigenpairs, metrics_for_protocol, search_mpr_plus_cz,
    statefile, template_search, EntropyRow, HamiltonianIR, Partition, Protocol, ProtocolChoice,
    SearchConfig, SearchResult, Series, SweepRow, SweepSpec,
};

use crate::config::Effective;
use crate::{EntropyArgs, GroundArgs, OverlapArgs, SearchArgs, SweepArgs, TransformArgs};

/// Transformed states whose residual imaginary part exceeds this are treated
/// as genuinely complex.
const PHASE_TOL: f64 = 1e-8;

fn ensure_out_dir(effective: &Effective) -> Result<()> {
    std::fs::create_dir_all(effective.out_dir())
        .with_context(|| format!("creating output directory {}", effective.out_dir))
}

fn metadata(effective: &Effective) -> Vec<(String, String)> {
    vec![("config".into(), effective.echo())]
}

/// Trailing-zero-free coupling label for file names ("0.5", "1", "1.25").
fn j2_tag(j2: f64) -> String {
    let s = format!("{j2:.4}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn fail_if_any_rows_failed(failed: usize, total: usize) -> Result<()> {
    if failed > 0 {
        bail!("{failed} of {total} rows failed; see the output metadata for details");
    }
    Ok(())
}

pub fn cmd_ground(effective: &Effective, args: &GroundArgs) -> Result<()> {
    let n = effective.single_n()?;
    let j2 = effective.single_j2()?;
    let n_up = args.n_up.unwrap_or(n / 2);
    println!("# config: {}", effective.echo());

    let model = build_chain(n, effective.boundary(), effective.j1, j2)?;
    let ir = heisenberg_terms(&model);
    let basis = signpos_core::enumerate_sector(n, n_up)?;
    let mut opts = effective.eigen_options();
    opts.k = args.k.max(1);
    let res = lowest_eigenpairs(&ir, &basis, &opts)?;

    println!(
        "levels (n={n} {} j1={} j2={j2}, sector n_up={n_up}, dim {}):",
        effective.boundary,
        effective.j1,
        basis.len()
    );
    for group in &res.degeneracy_groups {
        let first = group[0];
        let worst_residual = group
            .iter()
            .filter_map(|&i| res.residual_norms.get(i))
            .fold(0.0f64, |m, &r| m.max(r));
        println!(
            "  E = {:+.10}  multiplicity {}  residual {:.2e}",
            res.eigenvalues[first],
            group.len(),
            worst_residual
        );
    }

    for choice in effective.protocol_choices()? {
        let protocol = choice.build(n)?;
        let (sign, neg_frac, per_vector) =
            metrics_for_protocol(&protocol, &basis, &res, effective.seed, PHASE_TOL)?;
        let label = if protocol.label == "identity" { "raw".into() } else { protocol.label.clone() };
        print!("sign[{label}]: sign_avg = {sign:.10}, neg_frac = {neg_frac:.10}");
        if !per_vector.is_empty() {
            print!(" (in-subspace max; members {per_vector:.6?})");
        }
        println!();
    }

    ensure_out_dir(effective)?;
    for (idx, vector) in res.ground_vectors().iter().enumerate() {
        let name = format!("ground_n{n}_{}_j2{}_v{idx}.sgnc", effective.boundary, j2_tag(j2));
        let path = effective.out_path(&name);
        statefile::write_state_file(&path, n as u32, n_up as u32, vector)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn cmd_sweep(effective: &Effective, _args: &SweepArgs) -> Result<()> {
    let spec = SweepSpec {
        n_sites: effective.n.clone(),
        boundary: effective.boundary(),
        j1: effective.j1,
        j2_grid: effective.j2_grid.clone(),
        protocols: effective.protocol_choices()?,
        eigen: effective.eigen_options(),
        phase_tol: PHASE_TOL,
    };
    let rows = signpos_core::run_sweep(&spec)?;
    ensure_out_dir(effective)?;

    if effective.has_format("csv") {
        let path = effective.out_path("sweep.csv");
        let mut w = BufWriter::new(File::create(&path)?);
        write_sweep_csv(&mut w, &rows, &metadata(effective))?;
        w.flush()?;
        println!("wrote {}", path.display());
    }
    if effective.has_format("json") {
        let path = effective.out_path("sweep.json");
        let body = json!({
            "config": serde_json::to_value(effective)?,
            "rows": rows.iter().map(sweep_row_json).collect::<Vec<_>>(),
        });
        std::fs::write(&path, serde_json::to_string_pretty(&body)?)?;
        println!("wrote {}", path.display());
    }
    if effective.has_format("svg") {
        let path = effective.out_path("sweep.svg");
        std::fs::write(&path, sweep_chart(&spec, &rows))?;
        println!("wrote {}", path.display());
    }

    for row in rows.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "failed row: n={} j2={} protocol={}: {}",
            row.n_sites,
            row.j2,
            row.protocol,
            row.error.as_deref().unwrap_or("unknown")
        );
    }
    fail_if_any_rows_failed(rows.iter().filter(|r| r.error.is_some()).count(), rows.len())
}

fn sweep_row_json(row: &SweepRow) -> serde_json::Value {
    json!({
        "n": row.n_sites,
        "boundary": row.boundary.as_str(),
        "j2": row.j2,
        "protocol": row.protocol,
        "sign_avg": nan_to_null(row.sign_average),
        "neg_frac": nan_to_null(row.negative_fraction),
        "energy": nan_to_null(row.energy),
        "degeneracy": row.degeneracy,
        "per_vector_signs": row.per_vector_signs,
        "error": row.error,
    })
}

fn nan_to_null(x: f64) -> serde_json::Value {
    if x.is_finite() { json!(x) } else { serde_json::Value::Null }
}

/// One series per (chain length, protocol); failed rows break the polyline.
fn sweep_chart(spec: &SweepSpec, rows: &[SweepRow]) -> String {
    let single_protocol = spec.protocols.len() == 1;
    let mut series: Vec<Series> = Vec::new();
    for &n in &spec.n_sites {
        for choice in &spec.protocols {
            let label = choice.label();
            let points: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.n_sites == n && r.protocol == label)
                .map(|r| (r.j2, r.sign_average))
                .collect();
            series.push(Series {
                label: if single_protocol { format!("N={n}") } else { format!("N={n} {label}") },
                points,
            });
        }
    }
    line_chart("sign average vs J2", "J2", "sign average", &series)
}

pub fn cmd_search(effective: &Effective, args: &SearchArgs) -> Result<()> {
    let n = effective.single_n()?;
    let j2 = effective.single_j2()?;
    let boundary = effective.boundary();
    let model = build_chain(n, boundary, effective.j1, j2)?;
    let ir = heisenberg_terms(&model);
    let basis = signpos_core::enumerate_sector(n, n / 2)?;
    let res = ground_level(&ir, &basis, &effective.eigen_options())?;
    let states: Vec<Vec<f64>> = res
        .ground_vectors()
        .iter()
        .map(|v| Ok(canonicalize_real(v, PHASE_TOL)?.0))
        .collect::<Result<_>>()?;

    let config = SearchConfig {
        top_k: args.top_k,
        seed: effective.seed,
        shard: match (args.shard_start, args.shard_end) {
            (None, None) => None,
            (Some(s), Some(e)) => Some((s, e)),
            _ => bail!("--shard-start and --shard-end must be passed together"),
        },
        ..SearchConfig::default()
    };
    let result = match args.mode.as_str() {
        "exhaustive" => brute_force_search(&states, &basis, &config)?,
        "template" => template_search(&states, &basis, args.period, &config)?,
        "mpr-cz" => search_mpr_plus_cz(&states, &basis, boundary, &config)?,
        other => bail!("unknown search mode {other}; choose exhaustive, template, or mpr-cz"),
    };

    println!("# config: {}", effective.echo());
    println!(
        "mode {}: evaluated {} candidates ({} skipped as non-real) in {:.2}s",
        args.mode,
        result.n_evaluated,
        result.n_skipped_nonreal,
        result.wall_time.as_secs_f64()
    );
    for (rank, r) in result.ranked.iter().enumerate() {
        println!(
            "  #{rank} sign_avg = {:.10}  angles {:?}  cz {:?}",
            r.report.sign_average, r.protocol.angles_half_pi, r.protocol.cz_pairs
        );
    }

    if effective.has_format("json") {
        ensure_out_dir(effective)?;
        let path = effective.out_path("search.json");
        std::fs::write(&path, serde_json::to_string_pretty(&search_json(effective, args, &result))?)?;
        println!("wrote {}", path.display());
    }
    if result.ranked.is_empty() {
        bail!("the search produced no real-representative candidates");
    }
    Ok(())
}

fn search_json(effective: &Effective, args: &SearchArgs, result: &SearchResult) -> serde_json::Value {
    json!({
        "config": serde_json::to_value(effective).expect("config serializes"),
        "mode": args.mode,
        "n_evaluated": result.n_evaluated,
        "n_skipped_nonreal": result.n_skipped_nonreal,
        "wall_time_s": result.wall_time.as_secs_f64(),
        "results": result.export_rows(),
    })
}

fn conjugated(ir: &HamiltonianIR, protocol: &Protocol) -> signpos_core::Result<HamiltonianIR> {
    let rotated = conjugate_by_diagonal(ir, &protocol.angles_half_pi)?;
    if protocol.cz_pairs.is_empty() {
        Ok(rotated)
    } else {
        conjugate_by_cz(&rotated, &protocol.cz_pairs)
    }
}

pub fn cmd_transform(effective: &Effective, args: &TransformArgs) -> Result<()> {
    let n = effective.single_n()?;
    let j2 = effective.single_j2()?;
    let protocol = effective.single_protocol()?.build(n)?;
    let model = build_chain(n, effective.boundary(), effective.j1, j2)?;
    let ir = heisenberg_terms(&model);
    let transformed = conjugated(&ir, &protocol)?;

    println!("# config: {}", effective.echo());
    println!(
        "# transformed Hamiltonian, protocol {} on n={n} {} j1={} j2={j2}",
        protocol.label, effective.boundary, effective.j1
    );
    println!("# coefficient_re coefficient_im [site:op]...");
    print!("{}", transformed.listing());

    if args.verify {
        if n > 10 {
            bail!("--verify compares dense spectra and is limited to n <= 10, got n={n}");
        }
        let mut max_deviation = 0.0f64;
        for n_up in 0..=n {
            let basis = signpos_core::enumerate_sector(n, n_up)?;
            let a = dense_spectrum(&ir, &basis)?;
            let b = dense_spectrum(&transformed, &basis)?;
            for (x, y) in a.iter().zip(&b) {
                max_deviation = max_deviation.max((x - y).abs());
            }
        }
        println!("# max spectral deviation over all sectors: {max_deviation:.3e}");
        if max_deviation > args.verify_tol {
            bail!(
                "spectrum verification failed: max deviation {max_deviation:.3e} exceeds {:.1e}",
                args.verify_tol
            );
        }
    }
    Ok(())
}

pub fn cmd_entropy(effective: &Effective, args: &EntropyArgs) -> Result<()> {
    let boundary = effective.boundary();
    let partitions: Vec<Partition> = match args.partition.as_str() {
        "half" => vec![Partition::ContiguousHalf],
        "abba" => vec![Partition::AbbaSublattice],
        "both" => vec![Partition::ContiguousHalf, Partition::AbbaSublattice],
        other => bail!("unknown partition {other}; choose half, abba, or both"),
    };
    let choices = effective.protocol_choices()?;
    let opts = effective.eigen_options();

    let mut rows: Vec<EntropyRow> = Vec::new();
    for &n in &effective.n {
        for &j2 in &effective.j2_grid {
            rows.extend(entropy_point(n, boundary, effective.j1, j2, &partitions, &choices, &opts));
        }
    }
    ensure_out_dir(effective)?;
    if effective.has_format("csv") {
        let path = effective.out_path("entropy.csv");
        let mut w = BufWriter::new(File::create(&path)?);
        write_entropy_csv(&mut w, &rows, &metadata(effective))?;
        w.flush()?;
        println!("wrote {}", path.display());
    }
    if effective.has_format("svg") {
        let path = effective.out_path("entropy.svg");
        std::fs::write(&path, entropy_chart(&rows))?;
        println!("wrote {}", path.display());
    }
    for row in rows.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "failed row: n={} j2={} partition={} state={}: {}",
            row.n_sites,
            row.j2,
            row.partition,
            row.state_kind,
            row.error.as_deref().unwrap_or("unknown")
        );
    }
    fail_if_any_rows_failed(rows.iter().filter(|r| r.error.is_some()).count(), rows.len())
}

/// Raw plus per-protocol entropies of one ground state, for each partition.
fn entropy_point(
    n: usize,
    boundary: signpos_core::Boundary,
    j1: f64,
    j2: f64,
    partitions: &[Partition],
    choices: &[ProtocolChoice],
    opts: &signpos_core::EigenOptions,
) -> Vec<EntropyRow> {
    let row = |partition: &Partition, kind: &str, value: signpos_core::Result<f64>| match value {
        Ok(entropy_bits) => EntropyRow {
            n_sites: n,
            boundary,
            j2,
            partition: partition.as_str().into(),
            state_kind: kind.into(),
            entropy_bits,
            error: None,
        },
        Err(e) => EntropyRow {
            n_sites: n,
            boundary,
            j2,
            partition: partition.as_str().into(),
            state_kind: kind.into(),
            entropy_bits: f64::NAN,
            error: Some(e.to_string()),
        },
    };

    let prepared: signpos_core::Result<(signpos_core::SectorBasis, Vec<Complex64>)> = (|| {
        let model = build_chain(n, boundary, j1, j2)?;
        let ir = heisenberg_terms(&model);
        let basis = signpos_core::enumerate_sector(n, n / 2)?;
        let res = ground_level(&ir, &basis, opts)?;
        if res.ground_multiplicity() != 1 {
            return Err(signpos_core::Error::InvalidSector(format!(
                "ground level is {}-fold degenerate at j2={j2}; entropy of the level is ambiguous",
                res.ground_multiplicity()
            )));
        }
        Ok((basis, res.eigenvectors[0].clone()))
    })();

    let (basis, state) = match prepared {
        Ok(p) => p,
        Err(e) => {
            // Every requested row at this point fails with the same cause.
            let msg = e.to_string();
            let mut rows = Vec::new();
            for partition in partitions {
                let kinds = std::iter::once("raw".to_string()).chain(choices.iter().map(|c| c.label()));
                for kind in kinds {
                    let mut r = row(partition, &kind, Ok(f64::NAN));
                    r.error = Some(msg.clone());
                    rows.push(r);
                }
            }
            return rows;
        }
    };

    let mut rows = Vec::new();
    for partition in partitions {
        let mask = bipartition_masks(n, *partition);
        rows.push(row(partition, "raw", entanglement_entropy(&state, &basis, mask)));
        for choice in choices {
            let value = choice
                .build(n)
                .and_then(|p| apply_protocol(&p, &basis, &state))
                .and_then(|t| entanglement_entropy(&t, &basis, mask));
            rows.push(row(partition, &choice.label(), value));
        }
    }
    rows
}

fn entropy_chart(rows: &[EntropyRow]) -> String {
    let mut series: Vec<Series> = Vec::new();
    for row in rows {
        let label = format!("N={} {} {}", row.n_sites, row.partition, row.state_kind);
        match series.iter_mut().find(|s| s.label == label) {
            Some(s) => s.points.push((row.j2, row.entropy_bits)),
            None => series.push(Series {
                label,
                points: vec![(row.j2, row.entropy_bits)],
            }),
        }
    }
    line_chart("entanglement entropy vs J2", "J2", "entropy (bits)", &series)
}

pub fn cmd_overlap(effective: &Effective, _args: &OverlapArgs) -> Result<()> {
    let boundary = effective.boundary();
    let opts = effective.eigen_options();
    ensure_out_dir(effective)?;
    for &n in &effective.n {
        let curves = signpos_core::reference_overlap_curves(
            n,
            boundary,
            &effective.j2_grid,
            &opts,
            PHASE_TOL,
        )?;
        if effective.has_format("csv") {
            let path = effective.out_path(&format!("overlap_n{n}.csv"));
            let mut w = BufWriter::new(File::create(&path)?);
            write_overlap_csv(&mut w, n, boundary, &curves, &metadata(effective))?;
            w.flush()?;
            println!("wrote {}", path.display());
        }
        if effective.has_format("svg") {
            let path = effective.out_path(&format!("overlap_n{n}.svg"));
            let series = vec![
                Series {
                    label: "vs J2=0 ground".into(),
                    points: curves.j2.iter().copied().zip(curves.with_heisenberg.iter().copied()).collect(),
                },
                Series {
                    label: "vs J2=0.5 ground".into(),
                    points: curves.j2.iter().copied().zip(curves.with_mg_point.iter().copied()).collect(),
                },
                Series {
                    label: "vs J1=0 level".into(),
                    points: curves.j2.iter().copied().zip(curves.with_j2_only.iter().copied()).collect(),
                },
            ];
            std::fs::write(&path, line_chart(&format!("overlaps, N={n}"), "J2", "|overlap|", &series))?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}
