//! End-to-end runs of the compiled binary: exit codes, stdout contracts,
//! output files, and config precedence.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_signpos"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("signpos-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn ground_two_sites_prints_singlet_energy() {
    let dir = temp_dir("toy");
    let out = run(&["ground", "-n", "2", "--out-dir", dir.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("-0.7500000000"), "stdout: {text}");
    assert!(text.contains("multiplicity 1"));
    assert!(text.contains("# config:"));
}

#[test]
fn ground_rejects_odd_chain() {
    let out = run(&["ground", "-n", "7"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("even"), "stderr: {}", stderr(&out));
}

#[test]
fn ground_writes_bit_exact_state_and_reports_mpr_sign() {
    let dir = temp_dir("ground");
    let out = run(&[
        "ground",
        "-n",
        "6",
        "-b",
        "obc",
        "--j2",
        "0.5",
        "--protocol",
        "mpr",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("sign[mpr]: sign_avg = 1.0000000000"), "stdout: {text}");

    let path = dir.join("ground_n6_obc_j20.5_v0.sgnc");
    let record = signpos_core::read_state_file(&path).unwrap();
    assert_eq!(record.n_sites, 6);
    assert_eq!(record.n_up, 3);
    assert_eq!(record.amplitudes.len(), 20);
    let norm: f64 = record.amplitudes.iter().map(|a| a.norm_sqr()).sum();
    assert!((norm - 1.0).abs() < 1e-10);

    // The stored vector reproduces the ground energy through the basis it
    // declares.
    let basis = signpos_core::enumerate_sector(6, 3).unwrap();
    record.expect_basis(&basis).unwrap();
}

#[test]
fn sweep_emits_versioned_csv_and_chart() {
    let dir = temp_dir("sweep");
    let out = run(&[
        "sweep",
        "-n",
        "6",
        "-b",
        "obc",
        "--j2-grid",
        "0:0.3:0.1",
        "--protocol",
        "mpr",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let csv = std::fs::read_to_string(dir.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "# signpos sweep-csv v1");
    assert!(csv.contains("n,boundary,j2,protocol,sign_avg,neg_frac,energy,degeneracy"));
    assert!(csv.contains("# config: {\"command\":\"sweep\""));
    assert!(csv.contains("6,obc,0.3,mpr,"));
    let svg = std::fs::read_to_string(dir.join("sweep.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("N=6"));
}

#[test]
fn sweep_with_failing_rows_exits_nonzero_but_writes_outputs() {
    let dir = temp_dir("sweep-fail");
    // The quarter-turn pattern needs an even number of site pairs; n=6 rows
    // fail while n=8 rows succeed.
    let out = run(&[
        "sweep",
        "-n",
        "6,8",
        "--j2",
        "0.4",
        "--protocol",
        "torlai",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("1 of 2 rows failed"), "stderr: {}", stderr(&out));
    let csv = std::fs::read_to_string(dir.join("sweep.csv")).unwrap();
    assert!(csv.contains("# failed_rows: 1"));
    assert!(csv.contains("nan"));
    assert!(csv.contains("8,obc,0.4,torlai,"));
}

#[test]
fn search_mpr_cz_finds_exact_positivization() {
    let dir = temp_dir("search");
    let out = run(&[
        "search",
        "-n",
        "6",
        "-b",
        "pbc",
        "--j2",
        "1.0",
        "--mode",
        "mpr-cz",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("#0 sign_avg = 1.0000000000"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("search.json")).unwrap()).unwrap();
    assert_eq!(json["mode"], "mpr-cz");
    assert!(json["config"]["seed"].as_u64().is_some());
    let best = &json["results"][0];
    assert!((best["sign_average"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(best["protocol"]["angles_half_pi"].as_array().unwrap().len(), 6);
}

#[test]
fn exhaustive_search_refuses_fourteen_sites_with_count() {
    let out = run(&["search", "-n", "14", "--j2", "0.2", "--mode", "exhaustive"]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains("1220703125"), "stderr: {err}");
}

#[test]
fn transform_verifies_spectrum_equality() {
    let out = run(&[
        "transform",
        "-n",
        "6",
        "-b",
        "pbc",
        "--j2",
        "1.0",
        "--protocol",
        "mpr-cz",
        "--verify",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("[1:Z]"), "four-factor terms expected: {text}");
    let deviation_line = text
        .lines()
        .find(|l| l.contains("max spectral deviation"))
        .expect("deviation line");
    let value: f64 = deviation_line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(value < 1e-9, "deviation {value}");
}

#[test]
fn transform_rejects_verify_beyond_dense_reach() {
    let out = run(&["transform", "-n", "12", "--protocol", "mpr", "--verify"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("n <= 10"), "stderr: {}", stderr(&out));
}

#[test]
fn entropy_csv_shows_amplification() {
    let dir = temp_dir("entropy");
    let out = run(&[
        "entropy",
        "-n",
        "6",
        "-b",
        "pbc",
        "--j2",
        "1.0",
        "--partition",
        "half",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let csv = std::fs::read_to_string(dir.join("entropy.csv")).unwrap();
    assert!(csv.contains("n,boundary,j2,partition,state_kind,entropy_bits"));
    let value = |kind: &str| -> f64 {
        csv.lines()
            .find(|l| l.contains(&format!("contiguous_half,{kind},")))
            .unwrap()
            .rsplit(',')
            .next()
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!(value("mpr-cz") > value("raw") + 0.1);
}

#[test]
fn overlap_csv_covers_reference_curves() {
    let dir = temp_dir("overlap");
    let out = run(&[
        "overlap",
        "-n",
        "6",
        "-b",
        "obc",
        "--j2-grid",
        "0,0.5",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let csv = std::fs::read_to_string(dir.join("overlap_n6.csv")).unwrap();
    assert!(csv.contains("n,boundary,j2,overlap_heisenberg,overlap_mg_point,overlap_j2_only"));
    // Self-overlap of the J2=0 reference at its own coupling.
    let first = csv.lines().find(|l| l.starts_with("6,obc,0,")).unwrap();
    assert!(first.contains("1.0000000000"));
}

#[test]
fn flags_override_config_file_which_overrides_defaults() {
    let dir = temp_dir("config");
    let config_path = dir.join("run.json");
    std::fs::write(&config_path, r#"{"j2": 0.3, "seed": 9, "boundary": "pbc"}"#).unwrap();
    let out = run(&[
        "ground",
        "-n",
        "6",
        "--config",
        config_path.to_str().unwrap(),
        "--j2",
        "0.5",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let config_line = text.lines().find(|l| l.starts_with("# config:")).unwrap();
    // Flag beats file; file beats default; untouched settings stay default.
    assert!(config_line.contains("\"j2_grid\":[0.5]"), "{config_line}");
    assert!(config_line.contains("\"seed\":9"));
    assert!(config_line.contains("\"boundary\":\"pbc\""));
    assert!(config_line.contains("\"j1\":1.0"));
}

#[test]
fn config_file_rejects_unknown_keys() {
    let dir = temp_dir("badconfig");
    let config_path = dir.join("bad.json");
    std::fs::write(&config_path, r#"{"j2_gird": 0.3}"#).unwrap();
    let out = run(&["ground", "-n", "6", "--config", config_path.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("unknown field"), "stderr: {}", stderr(&out));
}

#[test]
fn custom_protocol_file_runs_through_sweep() {
    let dir = temp_dir("proto");
    let proto_path = dir.join("p.json");
    std::fs::write(
        &proto_path,
        r#"{"label":"handmade","angles_half_pi":[0,2,0,2,0,2],"cz_pairs":[[0,1],[2,3],[4,5]]}"#,
    )
    .unwrap();
    let out = run(&[
        "sweep",
        "-n",
        "6",
        "-b",
        "pbc",
        "--j2",
        "1.0",
        "--protocol",
        &format!("file:{}", proto_path.display()),
        "--format",
        "csv",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let csv = std::fs::read_to_string(dir.join("sweep.csv")).unwrap();
    assert!(csv.contains("6,pbc,1,handmade,1.0000000000"), "csv: {csv}");
}

#[test]
fn empty_grid_is_a_usage_error() {
    let out = run(&["sweep", "-n", "6", "--j2-grid", ""]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("empty"), "stderr: {}", stderr(&out));
}

#[test]
fn thread_count_does_not_change_search_results() {
    let dir_a = temp_dir("threads-1");
    let dir_b = temp_dir("threads-4");
    let search = |threads: &str, dir: &Path| {
        let out = run(&[
            "search",
            "-n",
            "6",
            "-b",
            "pbc",
            "--j2",
            "0.8",
            "--mode",
            "exhaustive",
            "--threads",
            threads,
            "--out-dir",
            dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "stderr: {}", stderr(&out));
        let mut json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.join("search.json")).unwrap()).unwrap();
        // Wall time and the echoed thread setting legitimately differ.
        json.as_object_mut().unwrap().remove("wall_time_s");
        json.as_object_mut().unwrap().remove("config");
        json
    };
    assert_eq!(search("1", &dir_a), search("4", &dir_b));
}
