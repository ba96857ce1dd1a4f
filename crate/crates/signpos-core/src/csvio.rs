//! CSV emission with fixed, versioned headers. Metadata (effective run
//! configuration, failure notes) travels in leading `#` comment lines; the
//! header and column layout never change within a schema version.

use std::io::Write;

use crate::error::Result;
use crate::lattice::Boundary;
use crate::sweeps::{OverlapCurves, SweepRow};

pub const SWEEP_SCHEMA: &str = "sweep-csv v1";
pub const SWEEP_HEADER: &str = "n,boundary,j2,protocol,sign_avg,neg_frac,energy,degeneracy";
pub const ENTROPY_SCHEMA: &str = "entropy-csv v1";
pub const ENTROPY_HEADER: &str = "n,boundary,j2,partition,state_kind,entropy_bits";
pub const OVERLAP_SCHEMA: &str = "overlap-csv v1";
pub const OVERLAP_HEADER: &str = "n,boundary,j2,overlap_heisenberg,overlap_mg_point,overlap_j2_only";

fn write_metadata<W: Write>(w: &mut W, schema: &str, metadata: &[(String, String)]) -> Result<()> {
    writeln!(w, "# signpos {schema}")?;
    for (key, value) in metadata {
        for line in value.lines() {
            writeln!(w, "# {key}: {line}")?;
        }
    }
    Ok(())
}

fn fmt_metric(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.10}")
    }
}

pub fn write_sweep_csv<W: Write>(w: &mut W, rows: &[SweepRow], metadata: &[(String, String)]) -> Result<()> {
    let mut all_meta = metadata.to_vec();
    let failures: Vec<&SweepRow> = rows.iter().filter(|r| r.error.is_some()).collect();
    all_meta.push(("failed_rows".into(), failures.len().to_string()));
    for row in failures {
        all_meta.push((
            "failure".into(),
            format!(
                "n={} j2={} protocol={}: {}",
                row.n_sites,
                row.j2,
                row.protocol,
                row.error.as_deref().unwrap_or("unknown")
            ),
        ));
    }
    write_metadata(w, SWEEP_SCHEMA, &all_meta)?;
    writeln!(w, "{SWEEP_HEADER}")?;
    for row in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            row.n_sites,
            row.boundary.as_str(),
            row.j2,
            row.protocol,
            fmt_metric(row.sign_average),
            fmt_metric(row.negative_fraction),
            fmt_metric(row.energy),
            row.degeneracy
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct EntropyRow {
    pub n_sites: usize,
    pub boundary: Boundary,
    pub j2: f64,
    pub partition: String,
    pub state_kind: String,
    pub entropy_bits: f64,
    pub error: Option<String>,
}

pub fn write_entropy_csv<W: Write>(w: &mut W, rows: &[EntropyRow], metadata: &[(String, String)]) -> Result<()> {
    let mut all_meta = metadata.to_vec();
    let failures: Vec<&EntropyRow> = rows.iter().filter(|r| r.error.is_some()).collect();
    all_meta.push(("failed_rows".into(), failures.len().to_string()));
    for row in failures {
        all_meta.push((
            "failure".into(),
            format!(
                "n={} j2={} partition={} state={}: {}",
                row.n_sites,
                row.j2,
                row.partition,
                row.state_kind,
                row.error.as_deref().unwrap_or("unknown")
            ),
        ));
    }
    write_metadata(w, ENTROPY_SCHEMA, &all_meta)?;
    writeln!(w, "{ENTROPY_HEADER}")?;
    for row in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            row.n_sites,
            row.boundary.as_str(),
            row.j2,
            row.partition,
            row.state_kind,
            fmt_metric(row.entropy_bits)
        )?;
    }
    Ok(())
}

pub fn write_overlap_csv<W: Write>(
    w: &mut W,
    n_sites: usize,
    boundary: Boundary,
    curves: &OverlapCurves,
    metadata: &[(String, String)],
) -> Result<()> {
    let mut all_meta = metadata.to_vec();
    all_meta.push((
        "overlap_convention".into(),
        "|<a|b>|, not squared".into(),
    ));
    all_meta.push((
        "j2_only_reference".into(),
        format!(
            "ground level of J1=0, J2=1, multiplicity {}; curve takes the best member of the positivized set",
            curves.j2_only_multiplicity
        ),
    ));
    write_metadata(w, OVERLAP_SCHEMA, &all_meta)?;
    writeln!(w, "{OVERLAP_HEADER}")?;
    for (i, &j2) in curves.j2.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            n_sites,
            boundary.as_str(),
            j2,
            fmt_metric(curves.with_heisenberg[i]),
            fmt_metric(curves.with_mg_point[i]),
            fmt_metric(curves.with_j2_only[i])
        )?;
    }
    Ok(())
}
