use std::path::Path;

use clap::Parser;

use crate::{run, Cli};

struct Outcome {
    code: i32,
    stderr: String,
}

impl Outcome {
    fn success(&self) -> bool {
        self.code == 0
    }
}

fn oamtopo(args: &[&str], out: &Path) -> Outcome {
    let argv = ["oamtopo"].iter().copied().chain(args.iter().copied()).chain(["--out", out.to_str().unwrap()]);
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => return Outcome { code: e.exit_code(), stderr: e.render().to_string() },
    };
    match cli.overrides.resolve().and_then(|cfg| run(cli.command, &cfg)) {
        Ok(_) => Outcome { code: 0, stderr: String::new() },
        Err(e) => Outcome { code: e.exit_code(), stderr: e.to_string() },
    }
}

fn configs() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn data_rows(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn catalog_export_writes_one_file_per_layout() {
    let dir = tempfile::tempdir().unwrap();
    let o = oamtopo(&["topology", "--budget", "16", "--catalog"], dir.path());
    assert!(o.success(), "{}", o.stderr);
    let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert!(files.len() >= 7, "{} files", files.len());
    assert!(dir.path().join("cuca_4x4.csv").exists());
    assert!(dir.path().join("fuca_4x4.csv").exists());
}

#[test]
fn four_ring_positions_sit_on_their_radii() {
    let dir = tempfile::tempdir().unwrap();
    let o = oamtopo(&["topology", "--family", "cuca", "--rings", "4", "--k", "4", "--radii", "2,1.5,1,0.5"], dir.path());
    assert!(o.success());
    let text = std::fs::read_to_string(dir.path().join("cuca_4x4.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# oamtopo "));
    assert_eq!(lines.next(), Some("ring,index,x_m,y_m,z_m"));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 16);
    for row in rows {
        let f: Vec<&str> = row.split(',').collect();
        let ring: usize = f[0].parse().unwrap();
        let x: f64 = f[2].parse().unwrap();
        let y: f64 = f[3].parse().unwrap();
        assert!((x.hypot(y) - [2.0, 1.5, 1.0, 0.5][ring]).abs() < 1e-11);
    }
}

#[test]
fn json_topology_round_trips_through_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let o = oamtopo(&["topology", "--family", "fuca", "--rings", "4", "--k", "4", "--format", "json"], dir.path());
    assert!(o.success());
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("fuca_4x4.json")).unwrap()).unwrap();
    assert_eq!(v["family"], "fuca");
    assert_eq!(v["positions"].as_array().unwrap().len(), 16);
    assert_eq!(v["meta"]["config_sha256"].as_str().unwrap().len(), 64);
    assert!(v["validation"]["violations"].as_array().unwrap().is_empty());
}

#[test]
fn seeded_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["ber", "--family", "cuca", "--rings", "2", "--k", "8", "--frames", "200", "--seed", "42"];
    assert!(oamtopo(&args, a.path()).success());
    assert!(oamtopo(&args, b.path()).success());
    let x = std::fs::read(a.path().join("ber_vs_snr.csv")).unwrap();
    let y = std::fs::read(b.path().join("ber_vs_snr.csv")).unwrap();
    assert_eq!(x, y);
    assert!(String::from_utf8(x).unwrap().lines().next().unwrap().ends_with("seed=42"));
}

#[test]
fn usage_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let o = oamtopo(&["bogus"], dir.path());
    assert!(!o.success());
    assert!(o.stderr.contains("Usage"));
    let o = oamtopo(&["topology", "--rings", "4"], dir.path());
    assert_eq!(o.code, 2);
}

#[test]
fn config_errors_exit_two_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    let out = dir.path().join("out");
    std::fs::write(&cfg, r#"{"topologies": [{"family": "uca", "k": 16}], "snr_db": []}"#).unwrap();
    let o = oamtopo(&["se", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("SNR grid is empty"));
    std::fs::write(&cfg, r#"{"link": {"distance": -1}}"#).unwrap();
    assert_eq!(oamtopo(&["se", "--config", cfg.to_str().unwrap()], &out).code, 2);
    std::fs::write(&cfg, r#"{"frame": 3}"#).unwrap();
    assert_eq!(oamtopo(&["ber", "--config", cfg.to_str().unwrap()], &out).code, 2);
    let o = oamtopo(&["se", "--family", "spiral", "--count", "16"], &out);
    assert_eq!(o.code, 2);
    assert!(!out.exists());
}

#[test]
fn infeasible_search_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"optimizer": {"budget": 4, "aperture": 0.01, "resolution": 0.001}}"#).unwrap();
    let o = oamtopo(&["optimize", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.code, 3, "{}", o.stderr);
}

#[test]
fn switchcost_table_is_symmetric_with_zero_diagonal() {
    let dir = tempfile::tempdir().unwrap();
    let o = oamtopo(&["switchcost", "--config", configs().join("fig11.json").to_str().unwrap()], dir.path());
    assert!(o.success());
    let text = std::fs::read_to_string(dir.path().join("switchcost.csv")).unwrap();
    let mut d = std::collections::HashMap::new();
    for row in data_rows(&text) {
        let f: Vec<&str> = row.split(',').collect();
        d.insert((f[0].to_string(), f[1].to_string()), f[2].parse::<f64>().unwrap());
    }
    for ((a, b), v) in &d {
        assert_eq!(*v, d[&(b.clone(), a.clone())]);
        if a == b {
            assert_eq!(*v, 0.0);
        }
    }
}

#[test]
fn surface_and_optimize_outputs_have_expected_shape() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"topologies": [{"family": "cuca", "rings": 2, "k": 8}], "distances_m": [50, 100], "apertures_m": [0.5, 1.0, 2.0],
            "optimizer": {"budget": 8, "resolution": 0.1}}"#,
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    assert!(oamtopo(&["surface", "--config", c], dir.path()).success());
    let text = std::fs::read_to_string(dir.path().join("surface_cuca_2x8.csv")).unwrap();
    assert_eq!(text.lines().nth(1), Some("d_m,r_m,se_bps"));
    assert_eq!(data_rows(&text).len(), 6);
    assert!(oamtopo(&["optimize", "--config", c], dir.path()).success());
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("optimize.json")).unwrap()).unwrap();
    for key in ["family", "N", "K", "radii", "capacity_bps", "trace", "positions", "seed", "cfg"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let n = v["N"].as_u64().unwrap() * v["K"].as_u64().unwrap();
    assert_eq!(v["positions"].as_array().unwrap().len() as u64, n);
    assert!(dir.path().join("optimize_positions.csv").exists());
}
