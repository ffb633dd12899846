use std::path::{Path, PathBuf};
use std::process::Command;

use sepinn_cli::config::{ConfigError, Method, RunConfig};
use sepinn_cli::run::{self, EvalOptions, RunManifest};

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

/// A preset shrunk to a budget that trains in well under a second.
fn tiny(name: &str) -> RunConfig {
    let mut c = RunConfig::load(&preset(name)).unwrap();
    c.samples.interior = 400;
    if c.samples.boundary.is_some() {
        c.samples.boundary = Some(100);
    } else {
        c.samples.dirichlet = Some(80);
        c.samples.neumann = Some(80);
    }
    c.samples.validation = 2000;
    c.adam.iterations = 30;
    if let Some(l) = c.lbfgs.as_mut() {
        l.iterations = 30;
    }
    if let Some(e) = c.eigen.as_mut() {
        e.alternations = 1;
    }
    c
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sepinn"))
}

#[test]
fn presets_parse_and_round_trip() {
    let dir = std::fs::read_dir(preset("")).unwrap();
    let mut n = 0;
    for entry in dir {
        let path = entry.unwrap().path();
        let cfg = RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let again = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again, "{}", path.display());
        n += 1;
    }
    assert!(n >= 8);
}

#[test]
fn field_errors_name_the_field() {
    let text = std::fs::read_to_string(preset("lshape2d.toml")).unwrap();
    let bad = text.replace("q = 1.5", "q = 1.0");
    match RunConfig::from_toml(&bad) {
        Err(ConfigError::Field { field, .. }) => assert_eq!(field, "penalty.q"),
        other => panic!("{other:?}"),
    }
    let bad = text.replace("widths = [2, 20, 20, 20, 1]", "widths = [3, 20, 1]");
    assert!(matches!(RunConfig::from_toml(&bad), Err(ConfigError::Field { field: "network.widths", .. })));
    let bad = text.replace("method = \"sepinn\"", "method = \"sepinn-c\"");
    assert!(matches!(RunConfig::from_toml(&bad), Err(ConfigError::Field { field: "method", .. })));
    let edge = std::fs::read_to_string(preset("edge3d.toml")).unwrap();
    let bad = edge.replace("[series]\nn = 20\n", "");
    assert!(matches!(RunConfig::from_toml(&bad), Err(ConfigError::Field { field: "series.n", .. })));
    assert!(matches!(RunConfig::from_toml(&format!("{text}\nbogus = 1\n")), Err(ConfigError::Parse(_))));
}

#[test]
fn training_is_deterministic_and_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny("lshape2d.toml");
    let a = run::train(&cfg, &tmp.path().join("a")).unwrap();
    let b = run::train(&cfg, &tmp.path().join("b")).unwrap();
    assert_eq!(a.final_state, b.final_state);
    assert_eq!(a.summary.max_rel_diff(&b.summary), 0.0);
    for f in ["manifest.json", "report.csv", "final.ckpt", "loop_01.ckpt"] {
        assert!(a.dir.join(f).exists(), "{f}");
    }
    let m = RunManifest::load(&a.manifest).unwrap();
    assert_eq!(m.config, cfg);
    assert_eq!(m.summary, a.summary);
    assert!(m.checkpoints.iter().all(|p| p.exists()));
    assert!(!a.dir.join(".manifest.json.tmp").exists());

    let mut other = cfg.clone();
    other.seed += 1;
    let c = run::train(&other, &tmp.path().join("c")).unwrap();
    assert_ne!(a.final_state, c.final_state);
}

#[test]
fn replay_reproduces_the_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run::train(&tiny("mixed_bc.toml"), &tmp.path().join("orig")).unwrap();
    let (old, new) = run::replay(&out.manifest, &tmp.path().join("again")).unwrap();
    assert!(old.max_rel_diff(&new) <= 1e-10);
}

#[test]
fn evaluate_matches_the_training_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny("lshape2d.toml");
    let out = run::train(&cfg, tmp.path()).unwrap();
    let spec = cfg.problem_spec().unwrap();
    let opts = EvalOptions {
        n: cfg.samples.validation,
        seed: cfg.seed,
        slice: None,
        resolution: 11,
        out_dir: tmp.path().join("eval"),
        grid: true,
    };
    let rep = run::evaluate(&tmp.path().join("final.ckpt"), &spec, &opts).unwrap();
    assert_eq!(rep.e_w, out.summary.e);
    assert_eq!(rep.e_u, out.summary.e_u);
    assert!(rep.grid.unwrap().exists());

    // A 2D checkpoint against a 3D problem is a configuration error.
    let edge = sepinn::problems::example_edge_3d();
    let err = run::evaluate(&tmp.path().join("final.ckpt"), &edge, &opts).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn evaluate_slices_a_3d_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny("edge3d.toml");
    let out = run::train(&cfg, tmp.path()).unwrap();
    let spec = cfg.problem_spec().unwrap();
    let opts = EvalOptions {
        n: 2000,
        seed: cfg.seed,
        slice: Some(0.5),
        resolution: 9,
        out_dir: tmp.path().to_path_buf(),
        grid: true,
    };
    let rep = run::evaluate(&tmp.path().join("final.ckpt"), &spec, &opts).unwrap();
    assert_eq!(rep.e_w, out.summary.e);
    assert!(rep.e_s.is_some());
    assert!(rep.grid.unwrap().ends_with("field_z0.5.csv"));
}

#[test]
fn baseline_uses_identical_settings() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = run::compare_baseline(&tiny("lshape2d.toml"), tmp.path()).unwrap();
    assert_eq!(a.summary.method, Method::Sepinn);
    assert_eq!(b.summary.method, Method::Pinn);
    assert_eq!(a.summary.seed, b.summary.seed);
    assert!(b.summary.gamma.is_empty());
    assert!(tmp.path().join("compare.csv").exists());
}

#[test]
fn analytic_sweep_needs_no_training() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny("edge3d.toml");
    let rows = run::sweep_truncation(&cfg, &[5, 10, 15, 20], true, tmp.path()).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.windows(2).all(|w| w[1].e_s < w[0].e_s));
    assert!(rows.iter().all(|r| r.e == 0.0));
    assert!(tmp.path().join("truncation.csv").exists());
    assert!(run::sweep_truncation(&tiny("lshape2d.toml"), &[5], true, tmp.path()).is_err());
}

#[test]
fn eigen_run_reports_ordered_values() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run::train(&tiny("eigen_lshape.toml"), tmp.path()).unwrap();
    let mu = out.summary.mu.unwrap();
    assert!(mu[0] <= mu[1] && mu[0] > 0.0);
    let spec = sepinn::problems::by_name("eigen_lshape").unwrap();
    let opts = EvalOptions {
        n: 2000,
        seed: 1,
        slice: None,
        resolution: 5,
        out_dir: tmp.path().to_path_buf(),
        grid: false,
    };
    let rep = run::evaluate(&tmp.path().join("final.ckpt"), &spec, &opts).unwrap();
    // Same points as the run's validation set: the summary is reproduced.
    let mut rq = rep.rayleigh.unwrap();
    rq.sort_by(f64::total_cmp);
    assert_eq!(rq, mu.to_vec());
}

#[test]
fn binary_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    let text = std::fs::read_to_string(preset("lshape2d.toml")).unwrap();
    std::fs::write(&bad, text.replace("q = 1.5", "q = 0.9")).unwrap();
    let out = bin().args(["train", "-c"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("penalty.q"));

    let missing = bin().args(["train", "-c", "/nonexistent.toml"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
    let unknown = bin().arg("frobnicate").output().unwrap();
    assert_eq!(unknown.status.code(), Some(2));

    // An intensity this large overflows the residual: numerical abort.
    let good = tmp.path().join("good.toml");
    let mut cfg = tiny("lshape2d.toml");
    cfg.gamma_init = 1e200;
    std::fs::write(&good, cfg.to_toml()).unwrap();
    let out = bin().args(["--threads", "1", "train", "-c"]).arg(&good).arg("-o").arg(tmp.path().join("r")).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn binary_trains_and_replays_with_output_root() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("c.toml");
    std::fs::write(&cfg_path, tiny("mixed_bc.toml").to_toml()).unwrap();
    let out = bin()
        .env(run::OUTPUT_ROOT_VAR, tmp.path().join("root"))
        .args(["--threads", "1", "train", "-c"])
        .arg(&cfg_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = tmp.path().join("root/mixed_bc-sepinn-seed1/manifest.json");
    assert!(manifest.exists());
    let out = bin()
        .args(["--threads", "1", "train", "--replay"])
        .arg(&manifest)
        .arg("-o")
        .arg(tmp.path().join("replay"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("replay max relative difference"));
}
