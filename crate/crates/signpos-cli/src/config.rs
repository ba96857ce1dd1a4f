//! Flag resolution. Precedence: command-line flags, then the JSON config
//! file, then built-in defaults. The resolved configuration is serialized
//! into every output's metadata block.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use signpos_core::{Boundary, EigenOptions, Protocol, ProtocolChoice};

use crate::SharedArgs;

/// Optional overrides read from `--config <file>`. Keys mirror the shared
/// flag names.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub n: Option<Vec<usize>>,
    pub boundary: Option<String>,
    pub j1: Option<f64>,
    pub j2: Option<f64>,
    pub j2_grid: Option<Vec<f64>>,
    pub protocol: Option<Vec<String>>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out_dir: Option<String>,
    pub format: Option<Vec<String>>,
    pub tol: Option<f64>,
    pub max_iterations: Option<usize>,
}

/// Fully resolved run settings, echoed verbatim into output metadata.
#[derive(Debug, Clone, Serialize)]
pub struct Effective {
    pub command: String,
    pub n: Vec<usize>,
    pub boundary: String,
    pub j1: f64,
    pub j2_grid: Vec<f64>,
    pub protocols: Vec<String>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub out_dir: String,
    pub formats: Vec<String>,
    pub tol: f64,
    pub max_iterations: usize,
}

impl Effective {
    pub fn boundary(&self) -> Boundary {
        match self.boundary.as_str() {
            "pbc" => Boundary::Periodic,
            _ => Boundary::Open,
        }
    }

    pub fn eigen_options(&self) -> EigenOptions {
        EigenOptions {
            tol: self.tol,
            max_iterations: self.max_iterations,
            seed: self.seed,
            ..EigenOptions::default()
        }
    }

    pub fn out_dir(&self) -> &Path {
        Path::new(&self.out_dir)
    }

    pub fn out_path(&self, file_name: &str) -> PathBuf {
        self.out_dir().join(file_name)
    }

    pub fn has_format(&self, name: &str) -> bool {
        self.formats.iter().any(|f| f == name)
    }

    /// Single-line JSON used as the metadata echo.
    pub fn echo(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// The single chain length for commands that take exactly one.
    pub fn single_n(&self) -> Result<usize> {
        match self.n.as_slice() {
            [n] => Ok(*n),
            [] => bail!("pass one chain length with -n"),
            more => bail!("this command takes exactly one chain length, got {more:?}"),
        }
    }

    /// The single coupling for commands that take one J2 point.
    pub fn single_j2(&self) -> Result<f64> {
        match self.j2_grid.as_slice() {
            [j2] => Ok(*j2),
            more => bail!("this command takes a single --j2, got a grid of {}", more.len()),
        }
    }

    pub fn protocol_choices(&self) -> Result<Vec<ProtocolChoice>> {
        self.protocols.iter().map(|s| parse_protocol(s)).collect()
    }

    /// Exactly one protocol, for the transform command.
    pub fn single_protocol(&self) -> Result<ProtocolChoice> {
        match self.protocols.as_slice() {
            [one] => parse_protocol(one),
            more => bail!("this command takes exactly one --protocol, got {}", more.len()),
        }
    }
}

/// What each command falls back to when neither flags nor the config file
/// decide.
pub struct CommandDefaults {
    pub protocols: &'static [&'static str],
    pub formats: &'static [&'static str],
    /// Commands without this default require an explicit --j2/--j2-grid or a
    /// config file entry, except for the full default grid below.
    pub full_grid: bool,
}

const VALID_FORMATS: [&str; 3] = ["csv", "json", "svg"];

pub fn resolve(shared: &SharedArgs, command: &str, defaults: &CommandDefaults) -> Result<Effective> {
    let file: FileConfig = match &shared.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config file {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing config file {}", path.display()))?
        }
        None => FileConfig::default(),
    };

    let n = if !shared.n.is_empty() {
        shared.n.clone()
    } else {
        file.n.unwrap_or_default()
    };
    if n.is_empty() {
        bail!("pass at least one chain length with -n");
    }

    let boundary = shared
        .boundary
        .clone()
        .or(file.boundary)
        .unwrap_or_else(|| "obc".into());
    if boundary != "obc" && boundary != "pbc" {
        bail!("boundary must be obc or pbc, got {boundary}");
    }

    let j2_grid = if let Some(j2) = shared.j2 {
        vec![j2]
    } else if let Some(spec) = &shared.j2_grid {
        parse_grid(spec)?
    } else if let Some(grid) = file.j2_grid {
        grid
    } else if let Some(j2) = file.j2 {
        vec![j2]
    } else if defaults.full_grid {
        signpos_core::default_j2_grid()
    } else {
        vec![0.0]
    };
    if j2_grid.is_empty() {
        bail!("the J2 grid is empty");
    }

    let protocols = if !shared.protocol.is_empty() {
        shared.protocol.clone()
    } else if let Some(p) = file.protocol {
        p
    } else {
        defaults.protocols.iter().map(|s| s.to_string()).collect()
    };
    for p in &protocols {
        parse_protocol(p)?;
    }

    let formats = if !shared.format.is_empty() {
        shared.format.clone()
    } else if let Some(f) = file.format {
        f
    } else {
        defaults.formats.iter().map(|s| s.to_string()).collect()
    };
    for f in &formats {
        if !VALID_FORMATS.contains(&f.as_str()) {
            bail!("unknown output format {f}; choose from csv, json, svg");
        }
    }

    let eigen_defaults = EigenOptions::default();
    let effective = Effective {
        command: command.into(),
        n,
        boundary,
        j1: shared.j1.or(file.j1).unwrap_or(1.0),
        j2_grid,
        protocols,
        seed: shared.seed.or(file.seed).unwrap_or(1),
        threads: shared.threads.or(file.threads),
        out_dir: shared
            .out_dir
            .as_ref()
            .map(|p| p.display().to_string())
            .or(file.out_dir)
            .unwrap_or_else(|| ".".into()),
        formats,
        tol: shared.tol.or(file.tol).unwrap_or(eigen_defaults.tol),
        max_iterations: shared
            .max_iterations
            .or(file.max_iterations)
            .unwrap_or(eigen_defaults.max_iterations),
    };
    if !(effective.tol > 0.0) {
        bail!("--tol must be positive");
    }
    if effective.max_iterations == 0 {
        bail!("--max-iterations must be positive");
    }
    Ok(effective)
}

/// `a,b,c` or `start:end:step`, ascending.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let spec = spec.trim();
    if spec.is_empty() {
        bail!("the J2 grid is empty");
    }
    let grid: Vec<f64> = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [start, end, step] = parts.as_slice() else {
            bail!("grid ranges use start:end:step, got {spec}");
        };
        let (start, end, step): (f64, f64, f64) = (
            start.trim().parse().context("grid start")?,
            end.trim().parse().context("grid end")?,
            step.trim().parse().context("grid step")?,
        );
        if step <= 0.0 || end < start {
            bail!("grid range must ascend with a positive step, got {spec}");
        }
        let count = ((end - start) / step).round() as usize;
        // Snap accumulated rounding (0.1 * 3 = 0.30000000000000004) so grid
        // labels stay clean.
        (0..=count)
            .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
            .collect()
    } else {
        spec.split(',')
            .map(|tok| tok.trim().parse::<f64>().with_context(|| format!("grid point {tok:?}")))
            .collect::<Result<_>>()?
    };
    for w in grid.windows(2) {
        if w[1] <= w[0] {
            bail!("the J2 grid must be strictly ascending");
        }
    }
    Ok(grid)
}

/// A named protocol or `file:<path>` pointing at a protocol JSON document.
pub fn parse_protocol(token: &str) -> Result<ProtocolChoice> {
    if let Some(path) = token.strip_prefix("file:") {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading protocol file {path}"))?;
        let protocol: Protocol =
            serde_json::from_str(&text).with_context(|| format!("parsing protocol file {path}"))?;
        protocol.validate().with_context(|| format!("protocol file {path}"))?;
        return Ok(ProtocolChoice::Custom(protocol));
    }
    ProtocolChoice::from_name(token).ok_or_else(|| {
        anyhow::anyhow!(
            "unknown protocol {token}; choose from identity, mpr, odd-even, torlai, mpr-cz, or file:<path>"
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_grid() {
        let g = parse_grid("0:0.5:0.1").unwrap();
        assert_eq!(g.len(), 6);
        assert!((g[5] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn list_grid() {
        assert_eq!(parse_grid("0.8, 1.0, 1.5").unwrap(), vec![0.8, 1.0, 1.5]);
    }

    #[test]
    fn rejects_descending() {
        assert!(parse_grid("1.0,0.5").is_err());
        assert!(parse_grid("").is_err());
        assert!(parse_grid("1:0:0.1").is_err());
    }
}
