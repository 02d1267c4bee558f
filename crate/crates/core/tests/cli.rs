use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(dir: &Path, sub: &str, config: &str, extra: &[&str]) -> Output {
    let cfg = dir.join(format!("{sub}.json"));
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_conical"))
        .arg(sub)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

const SPHERICAL_HALF: &str = r#"{"command":"analyze",
    "grid":{"inner_radius":1e-6,"n_radial":129,"n_angular":64},
    "metric":{"kind":"spherical","beta":0.5}}"#;

#[test]
fn analyze_spherical_half() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), "analyze", SPHERICAL_HALF, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(dir.path().join("out/report.json"));
    assert!((num(&r["gamma_hat"]) + 0.5).abs() < 1e-3);
    assert!((num(&r["schwarzian_limit"][0]) - 0.375).abs() < 1e-3);
    assert!((num(&r["connection_limit"][0]) + 0.5).abs() < 1e-3);
    assert_eq!(r["pass"]["expansion"], Value::Bool(true));
    let profile = fs::read_to_string(dir.path().join("out/profile.csv")).unwrap();
    let mut lines = profile.lines();
    assert_eq!(lines.next(), Some("rho,u_mean,zgamma_re,zgamma_im,z2s_re,z2s_im"));
    assert_eq!(lines.count(), 129);
}

#[test]
fn analyze_is_byte_identical_across_runs() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    run(a.path(), "analyze", SPHERICAL_HALF, &[]);
    run(b.path(), "analyze", SPHERICAL_HALF, &[]);
    for f in ["report.json", "profile.csv"] {
        assert_eq!(
            fs::read(a.path().join("out").join(f)).unwrap(),
            fs::read(b.path().join("out").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn analyze_flat_metric_energy() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"command":"analyze",
        "grid":{"inner_radius":1e-4,"n_radial":129,"n_angular":32},
        "metric":{"kind":"flat","gamma":0}}"#;
    let out = run(dir.path(), "analyze", cfg, &[]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(dir.path().join("out/report.json"));
    assert!(num(&r["connection_limit"][0]).abs() < 1e-12);
    assert!(num(&r["schwarzian_limit"][0]).abs() < 1e-12);
    assert!((num(&r["energy"]) - std::f64::consts::PI).abs() < 1e-6);
}

#[test]
fn analyze_essential_singularity_is_divergent() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"command":"analyze",
        "grid":{"inner_radius":0.01,"n_radial":65,"n_angular":64},
        "metric":{"kind":"essential","order":1}}"#;
    let out = run(dir.path(), "analyze", cfg, &[]);
    assert_eq!(out.status.code(), Some(4));
    let r = json(dir.path().join("out/report.json"));
    assert_eq!(r["energy_divergent"], Value::Bool(true));
    assert_eq!(r["energy"], Value::Null);
    assert_eq!(r["pass"]["expansion"], Value::Bool(false));
}

#[test]
fn analyze_refinement_table() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"command":"analyze",
        "grid":{"inner_radius":1e-4,"n_radial":65,"n_angular":32},
        "metric":{"kind":"spherical","beta":1}}"#;
    let out = run(dir.path(), "analyze", cfg, &["--refine", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let table = fs::read_to_string(dir.path().join("out/refinement.csv")).unwrap();
    let rows: Vec<Vec<&str>> = table.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(
        table.lines().next(),
        Some("level,n_radial,n_angular,quantity,value,error,order")
    );
    let energy: Vec<&Vec<&str>> = rows.iter().filter(|r| r[3] == "energy").collect();
    assert_eq!(energy.len(), 3);
    assert_eq!(energy[2][1], "257");
    let order: f64 = energy[2][6].parse().unwrap();
    assert!(order > 1.5, "{table}");
}

#[test]
fn solve_liouville_then_analyze_solution() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"command":"solve",
        "grid":{"inner_radius":1e-3,"n_radial":129,"n_angular":32},
        "curvature":{"kind":"constant","value":-4},
        "boundary":{"kind":"metric","metric":{"kind":"spherical","beta":0.5}},
        "seed":7}"#;
    let out = run(dir.path(), "solve", cfg, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(dir.path().join("out/solve.json"));
    assert!((num(&summary["gamma_hat"]) + 0.5).abs() < 1e-2);
    assert!(num(&summary["residual"]) <= 1e-10);
    let log = fs::read_to_string(dir.path().join("out/iterations.jsonl")).unwrap();
    let lines: Vec<Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines[0]["kind"], "metadata");
    assert_eq!(lines[0]["boundary"]["kind"], "metric");
    assert_eq!(lines[0]["seed"], 7);
    assert_eq!(lines[1]["step"], 0);
    assert!(num(&lines.last().unwrap()["residual"]) <= 1e-10);

    // the written solution is a valid sampled metric; the path is relative
    // to the config file
    let analyze = r#"{"command":"analyze",
        "metric":{"kind":"sampled","path":"out/solution.csv"},
        "curvature":{"kind":"constant","value":-4}}"#;
    let out = run(dir.path(), "analyze", analyze, &[]);
    assert!(
        matches!(out.status.code(), Some(0 | 3)),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = json(dir.path().join("out/report.json"));
    assert!((num(&r["gamma_hat"]) + 0.5).abs() < 1e-2);
}

#[test]
fn solve_flat_in_one_step() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"command":"solve",
        "grid":{"inner_radius":0.01,"n_radial":33,"n_angular":16},
        "curvature":{"kind":"constant","value":0},
        "boundary":{"kind":"metric","metric":{"kind":"flat","gamma":0.2,"coefficients":[0.5]}},
        "solver":{"initial_guess":{"kind":"zero"}}}"#;
    let out = run(dir.path(), "solve", cfg, &[]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(dir.path().join("out/solve.json"))["newton_steps"], 1);
}

#[test]
fn solve_refinement_shows_second_order() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"command":"solve",
        "grid":{"inner_radius":0.05,"n_radial":33,"n_angular":16},
        "curvature":{"kind":"constant","value":-4},
        "boundary":{"kind":"metric","metric":{"kind":"spherical","beta":1}}}"#;
    let out = run(dir.path(), "solve", cfg, &["--refine", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let table = fs::read_to_string(dir.path().join("out/refinement.csv")).unwrap();
    let orders: Vec<f64> = table
        .lines()
        .filter(|l| l.contains("solution_error"))
        .filter_map(|l| l.rsplit(',').next().unwrap().parse().ok())
        .collect();
    assert_eq!(orders.len(), 2);
    assert!(orders.iter().all(|o| *o > 1.9), "{table}");
}

#[test]
fn solve_rejects_positive_curvature() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"command":"solve",
        "grid":{"inner_radius":0.05,"n_radial":17,"n_angular":8},
        "curvature":{"kind":"constant","value":2},
        "boundary":{"kind":"metric","metric":{"kind":"spherical","beta":1}}}"#;
    let out = run(dir.path(), "solve", cfg, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonpositive"));
}

#[test]
fn solve_reports_non_convergence() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"command":"solve",
        "grid":{"inner_radius":0.01,"n_radial":33,"n_angular":16},
        "curvature":{"kind":"constant","value":-4},
        "boundary":{"kind":"metric","metric":{"kind":"spherical","beta":1}},
        "solver":{"max_steps":1,"initial_guess":{"kind":"zero"}}}"#;
    let out = run(dir.path(), "solve", cfg, &[]);
    assert_eq!(out.status.code(), Some(3));
    let log = fs::read_to_string(dir.path().join("out/iterations.jsonl")).unwrap();
    assert!(log.lines().count() >= 2);
}

#[test]
fn solve_with_boundary_file() {
    let dir = TempDir::new().unwrap();
    let n = 8;
    let mut csv = String::from("rho,theta,u\n");
    for (rho, u) in [(0.1f64, 0.3 * 0.1f64.ln()), (1.0, 0.0)] {
        for j in 0..n {
            csv.push_str(&format!(
                "{rho},{},{u}\n",
                2.0 * std::f64::consts::PI * j as f64 / n as f64
            ));
        }
    }
    fs::write(dir.path().join("bc.csv"), csv).unwrap();
    let cfg = r#"{"command":"solve",
        "grid":{"inner_radius":0.1,"n_radial":17,"n_angular":8},
        "curvature":{"kind":"constant","value":0},
        "boundary":{"kind":"file","path":"bc.csv"}}"#;
    let out = run(dir.path(), "solve", cfg, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!((num(&json(dir.path().join("out/solve.json"))["gamma_hat"]) - 0.3).abs() < 1e-10);
}

#[test]
fn pullback_half_cone_to_smooth() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"command":"pullback",
        "grid":{"inner_radius":0.01,"n_radial":65,"n_angular":32},
        "metric":{"kind":"spherical","beta":0.5},"cover_order":2}"#;
    let out = run(dir.path(), "pullback", cfg, &[]);
    assert_eq!(out.status.code(), Some(0));
    let p = json(dir.path().join("out/pullback.json"));
    assert_eq!(num(&p["gamma_star"]), 0.0);
    assert!(num(&p["connection_residual"]) <= 1e-10);
    assert!(num(&p["schwarzian_residual"]) <= 1e-10);
    assert!(dir.path().join("out/pullback.csv").exists());
}

#[test]
fn pullback_identity_and_triple_cover() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"command":"pullback",
        "grid":{"inner_radius":0.05,"n_radial":33,"n_angular":16},
        "metric":{"kind":"spherical","beta":1},"cover_order":1}"#;
    run(dir.path(), "pullback", cfg, &[]);
    let p = json(dir.path().join("out/pullback.json"));
    assert_eq!(num(&p["connection_residual"]), 0.0);
    assert_eq!(num(&p["schwarzian_residual"]), 0.0);
    let cfg = cfg.replace("\"cover_order\":1", "\"cover_order\":3");
    run(dir.path(), "pullback", &cfg, &[]);
    let p = json(dir.path().join("out/pullback.json"));
    assert!(num(&p["schwarzian_residual"]) <= 1e-10);
    assert_eq!(num(&p["gamma_star"]), 2.0);
}

#[test]
fn potential_of_unit_density() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"command":"potential",
        "grid":{"inner_radius":1e-3,"n_radial":128,"n_angular":256},
        "density":{"kind":"constant","value":1},"probe_exponent":4}"#;
    let out = run(dir.path(), "potential", cfg, &[]);
    assert_eq!(out.status.code(), Some(0));
    let p = json(dir.path().join("out/potential.json"));
    assert!(num(&p["newton_error"]) <= 1e-4);
    assert!((num(&p["newton_at_origin"]) + 0.25).abs() < 1e-4);
    let e = 1f64.exp();
    assert!((num(&p["probe"]["integral"]) - std::f64::consts::PI * (e - 1.0)).abs() < 1e-4);
    for f in ["newton.csv", "green.csv"] {
        let text = fs::read_to_string(dir.path().join("out").join(f)).unwrap();
        assert_eq!(text.lines().count(), 1 + 128 * 256);
    }
}

#[test]
fn potential_refinement_with_cell_midpoint_rule() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"command":"potential",
        "grid":{"inner_radius":1e-3,"n_radial":17,"n_angular":32},
        "density":{"kind":"constant","value":1},"method":"cell_midpoint"}"#;
    let out = run(dir.path(), "potential", cfg, &["--refine", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let table = fs::read_to_string(dir.path().join("out/refinement.csv")).unwrap();
    let orders: Vec<f64> = table
        .lines()
        .skip(1)
        .filter_map(|l| l.rsplit(',').next().unwrap().parse().ok())
        .collect();
    assert_eq!(orders.len(), 2);
    assert!(orders.iter().all(|o| *o >= 1.0), "{table}");
}

#[test]
fn potential_from_density_file() {
    let dir = TempDir::new().unwrap();
    let mut csv = String::from("rho,theta,re,im\n");
    let (eps, nr, na) = (0.01f64, 33usize, 16usize);
    for i in 0..nr {
        let rho = (eps.ln() * (1.0 - i as f64 / (nr - 1) as f64)).exp();
        for j in 0..na {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / na as f64;
            csv.push_str(&format!("{rho},{theta},{},0\n", -1.0 / rho));
        }
    }
    fs::write(dir.path().join("f.csv"), csv).unwrap();
    let cfg = r#"{"command":"potential","density":{"kind":"file","path":"f.csv"}}"#;
    let out = run(dir.path(), "potential", cfg, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let p = json(dir.path().join("out/potential.json"));
    assert_eq!(p["mass_divergent"], Value::Bool(false));
    // refinement needs a constant density
    let out = run(dir.path(), "potential", cfg, &["--refine", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn potential_of_non_integrable_density_is_divergent() {
    let dir = TempDir::new().unwrap();
    let mut csv = String::from("rho,theta,re,im\n");
    let (eps, nr, na) = (1e-4f64, 65usize, 8usize);
    for i in 0..nr {
        let rho = (eps.ln() * (1.0 - i as f64 / (nr - 1) as f64)).exp();
        for j in 0..na {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / na as f64;
            csv.push_str(&format!("{rho},{theta},{},0\n", -1.0 / (rho * rho)));
        }
    }
    fs::write(dir.path().join("f.csv"), csv).unwrap();
    let cfg = r#"{"command":"potential","density":{"kind":"file","path":"f.csv"}}"#;
    let out = run(dir.path(), "potential", cfg, &[]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn spectrum_of_exponential() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"command":"spectrum","samples":{"kind":"exp"},"radius":0.5,"max_index":20}"#;
    let out = run(dir.path(), "spectrum", cfg, &[]);
    assert_eq!(out.status.code(), Some(0));
    let s = json(dir.path().join("out/spectrum.json"));
    assert_eq!(s["parseval"]["verdict"], "finite");
    assert!((num(&s["parseval"]["value"]) - 4.99714).abs() < 1e-5);
    assert_eq!(s["lowest_nonzero_index"], 0);
    let csv = fs::read_to_string(dir.path().join("out/spectrum.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("n,re,im,abs"));
    assert_eq!(csv.lines().count(), 1 + 41);
}

#[test]
fn spectrum_of_essential_singularity_diverges() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"command":"spectrum","samples":{"kind":"exp_inverse"},"radius":0.5,"max_index":16}"#;
    let out = run(dir.path(), "spectrum", cfg, &[]);
    assert_eq!(out.status.code(), Some(4));
    let s = json(dir.path().join("out/spectrum.json"));
    assert_eq!(s["parseval"]["verdict"], "divergent");
    assert_eq!(s["lowest_nonzero_index"], -16);
}

#[test]
fn spectrum_from_sample_file_and_laurent_terms() {
    let dir = TempDir::new().unwrap();
    let mut csv = String::from("re,im\n");
    for j in 0..16 {
        let t = 2.0 * std::f64::consts::PI * j as f64 / 16.0;
        // 1 + z on |z| = 1/2
        csv.push_str(&format!("{},{}\n", 1.0 + 0.5 * t.cos(), 0.5 * t.sin()));
    }
    fs::write(dir.path().join("s.csv"), csv).unwrap();
    let cfg = r#"{"command":"spectrum","samples":{"kind":"file","path":"s.csv"},"radius":0.5,"max_index":4}"#;
    assert_eq!(run(dir.path(), "spectrum", cfg, &[]).status.code(), Some(0));
    let a = json(dir.path().join("out/spectrum.json"));
    let cfg = r#"{"command":"spectrum","samples":{"kind":"laurent","terms":[[0,1,0],[1,1,0]]},
        "radius":0.5,"count":16,"max_index":4}"#;
    assert_eq!(run(dir.path(), "spectrum", cfg, &[]).status.code(), Some(0));
    let b = json(dir.path().join("out/spectrum.json"));
    // π (1 + 1/2)
    let expected = 1.5 * std::f64::consts::PI;
    assert!((num(&a["parseval"]["value"]) - expected).abs() < 1e-12);
    assert!((num(&b["parseval"]["value"]) - expected).abs() < 1e-12);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    // wrong subcommand for the document
    assert_eq!(run(dir.path(), "solve", SPHERICAL_HALF, &[]).status.code(), Some(2));
    // unknown field
    let cfg = r#"{"command":"spectrum","samples":{"kind":"exp"},"radius":0.5,"max_index":4,"x":1}"#;
    assert_eq!(run(dir.path(), "spectrum", cfg, &[]).status.code(), Some(2));
    // missing file
    let cfg = r#"{"command":"analyze","metric":{"kind":"sampled","path":"nope.csv"}}"#;
    assert_eq!(run(dir.path(), "analyze", cfg, &[]).status.code(), Some(2));
    // closed form without a grid
    let cfg = r#"{"command":"analyze","metric":{"kind":"spherical","beta":1}}"#;
    assert_eq!(run(dir.path(), "analyze", cfg, &[]).status.code(), Some(2));
    // undersampled spectrum
    let cfg = r#"{"command":"spectrum","samples":{"kind":"exp"},"radius":0.5,"count":8,"max_index":4}"#;
    assert_eq!(run(dir.path(), "spectrum", cfg, &[]).status.code(), Some(2));
}
