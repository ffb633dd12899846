//! Commands behind the binary: each writes its artifacts into a run
//! directory and returns a summary.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use sepinn::geometry::{Point, SampleSet};
use sepinn::loss::{
    rayleigh_quotient, CollocationObjective, EigenObjective, Enrichment, StateLayout,
};
use sepinn::metrics::{
    exact_truncated_singular, export_field_grid, extract_gamma, relative_l2_on, split_errors, truncation_study,
    validation_points, SectorQuadrature, Solution,
};
use sepinn::network::{Checkpoint, MlpArch, MlpParams};
use sepinn::optimize::{eigen_alternate, eigen_candidates, two_stage_train, Hooks, TrainReport};
use sepinn::problems::{EquationKind, ProblemSpec};

use crate::config::{ConfigError, Method, RunConfig};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_VAR: &str = "SEPINN_OUTPUT_ROOT";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Core(#[from] sepinn::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest error: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("{0}")]
    Replay(String),
}

impl CliError {
    /// 2 for anything the user can fix in the configuration, 3 for a
    /// numerical abort, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use sepinn::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::Config(_) | E::Parameter(_) | E::DegenerateDomain { .. }) => 2,
            CliError::Core(E::NonFinite { .. } | E::NonFiniteLoss { .. } | E::DegenerateCandidate(_)) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"))
}

pub fn run_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir.clone().unwrap_or_else(|| {
        let method = serde_json::to_value(cfg.method).unwrap();
        output_root().join(format!("{}-{}-seed{}", cfg.problem, method.as_str().unwrap_or("run"), cfg.seed))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub problem: String,
    pub method: Method,
    pub seed: u64,
    /// Trained coefficients, per term in state order.
    pub gamma: Vec<f64>,
    /// Intensity factors recovered from `û` by the extraction formula (2D).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_extracted: Option<Vec<f64>>,
    /// Relative error of the approximated part: `ŵ` for enriched methods, `û` for plain PINN.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_u: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_abs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<[f64; 2]>,
    pub final_loss: f64,
    pub sigma_final: [f64; 2],
    pub pf_loops: usize,
    pub early_stop: bool,
    pub iterations: usize,
    pub seconds: f64,
}

impl Summary {
    pub fn line(&self) -> String {
        let mut s = format!("{} {:?} seed {}:", self.problem, self.method, self.seed);
        if let Some(mu) = self.mu {
            s += &format!(" mu = [{:.6}, {:.6}]", mu[0], mu[1]);
        }
        if !self.gamma.is_empty() {
            let g: Vec<String> = self.gamma.iter().take(6).map(|g| format!("{g:.6}")).collect();
            s += &format!(" gamma = [{}{}]", g.join(", "), if self.gamma.len() > 6 { ", .." } else { "" });
        }
        if let Some(g) = &self.gamma_extracted {
            let g: Vec<String> = g.iter().map(|g| format!("{g:.6}")).collect();
            s += &format!(" gamma_extracted = [{}]", g.join(", "));
        }
        for (name, v) in [("e", self.e), ("e_u", self.e_u), ("e_S", self.e_s)] {
            if let Some(v) = v {
                s += &format!(" {name} = {v:.3e}");
            }
        }
        s += &format!(
            " loss = {:.3e} loops = {} iters = {} time = {:.1}s",
            self.final_loss, self.pf_loops, self.iterations, self.seconds
        );
        s
    }

    /// Largest relative difference over the numeric fields (timing excluded).
    pub fn max_rel_diff(&self, other: &Summary) -> f64 {
        fn rel(a: f64, b: f64) -> f64 {
            if a == b {
                0.0
            } else {
                (a - b).abs() / a.abs().max(b.abs())
            }
        }
        let opt = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => rel(a, b),
            (None, None) => 0.0,
            _ => f64::INFINITY,
        };
        let vec = |a: &[f64], b: &[f64]| {
            if a.len() != b.len() {
                return f64::INFINITY;
            }
            a.iter().zip(b).map(|(x, y)| rel(*x, *y)).fold(0.0, f64::max)
        };
        let mut d = vec(&self.gamma, &other.gamma)
            .max(opt(self.e, other.e))
            .max(opt(self.e_u, other.e_u))
            .max(opt(self.e_s, other.e_s))
            .max(rel(self.final_loss, other.final_loss));
        d = d.max(match (&self.gamma_extracted, &other.gamma_extracted) {
            (Some(a), Some(b)) => vec(a, b),
            (None, None) => 0.0,
            _ => f64::INFINITY,
        });
        d = d.max(match (self.mu, other.mu) {
            (Some(a), Some(b)) => vec(&a, &b),
            (None, None) => 0.0,
            _ => f64::INFINITY,
        });
        if self.iterations != other.iterations || self.pf_loops != other.pf_loops {
            d = f64::INFINITY;
        }
        d
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub threads: usize,
    pub started_unix: u64,
    pub wall_seconds: f64,
    pub config: RunConfig,
    pub summary: Summary,
    pub report_csv: PathBuf,
    pub checkpoints: Vec<PathBuf>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    /// Writes `manifest.json` via a temporary file and a rename.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        let tmp = dir.join(".manifest.json.tmp");
        std::fs::write(&tmp, serde_json::to_vec_pretty(self)?)?;
        std::fs::rename(&tmp, &path)?;
        Ok(path)
    }
}

pub struct TrainOutcome {
    pub summary: Summary,
    pub report: TrainReport,
    pub dir: PathBuf,
    pub manifest: PathBuf,
    pub final_state: Vec<f64>,
}

fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn enrichment(cfg: &RunConfig, spec: &ProblemSpec) -> Result<Enrichment> {
    Ok(match cfg.method {
        Method::Sepinn => Enrichment::Scalar,
        Method::SepinnC => Enrichment::Series { n: cfg.series.as_ref().map_or(0, |s| s.n) },
        Method::SepinnN => {
            let widths = cfg.network.aux_widths.clone().unwrap_or_default();
            Enrichment::AuxNets {
                archs: vec![MlpArch::new(widths)?; spec.terms.len()],
                input: cfg.network.aux_input,
            }
        }
        Method::Pinn | Method::Eigen => Enrichment::None,
    })
}

fn checkpoint_of(layout: &StateLayout, seed: u64, x: &[f64]) -> Result<Checkpoint> {
    let (w, aux, coeffs) = layout.split(x)?;
    let mut nets = vec![w];
    nets.extend(aux);
    Ok(Checkpoint { seed, nets, extras: coeffs })
}

/// Errors and extracted intensities of a trained collocation state.
struct Evaluation {
    e: Option<f64>,
    e_u: Option<f64>,
    e_s: Option<f64>,
    e_abs: Option<f64>,
    gamma_extracted: Option<Vec<f64>>,
}

fn evaluate_solution(spec: &ProblemSpec, sol: &Solution, plain: bool, n: usize, seed: u64) -> Result<Evaluation> {
    if !spec.has_exact_solution() {
        return Ok(Evaluation {
            e: None,
            e_u: None,
            e_s: None,
            e_abs: None,
            gamma_extracted: None,
        });
    }
    let split = split_errors(spec, sol, n, seed)?;
    let (e, e_abs) = if plain {
        (split.u.relative, split.u.absolute)
    } else {
        (split.w.relative, split.w.absolute)
    };
    // The extraction identity holds for the Laplacian only.
    let gamma_extracted = (spec.dim() == 2 && spec.kind == EquationKind::Poisson).then(|| {
        spec.terms
            .iter()
            .map(|t| {
                let u = |p: Point| sol.u(&[p])[0];
                extract_gamma(u, |p| spec.source(p), t, SectorQuadrature::default()).map(|x| x.gamma)
            })
            .collect::<sepinn::Result<Vec<f64>>>()
    });
    Ok(Evaluation {
        e: Some(e),
        e_u: Some(split.u.relative),
        e_s: if plain { None } else { split.s.map(|s| s.relative) },
        e_abs: Some(e_abs),
        gamma_extracted: gamma_extracted.transpose()?,
    })
}

/// Trains according to `cfg`, writing the report CSV, per-loop and final
/// checkpoints and the manifest into `dir`.
pub fn train(cfg: &RunConfig, dir: &Path) -> Result<TrainOutcome> {
    cfg.validate()?;
    if cfg.method == Method::Eigen {
        return train_eigen(cfg, dir);
    }
    let started = now_unix();
    let clock = Instant::now();
    std::fs::create_dir_all(dir)?;
    let spec = cfg.problem_spec()?;
    let samples = SampleSet::draw(&spec.domain, cfg.sample_counts(&spec), cfg.seed)?;
    let arch = MlpArch::new(cfg.network.widths.clone())?;
    let mut obj = CollocationObjective::new(&spec, &samples, arch, enrichment(cfg, &spec)?, cfg.initial_penalty())?;
    let layout = obj.layout();
    let x0 = obj.initial_point(cfg.seed, cfg.gamma_init);
    let plain = cfg.method == Method::Pinn;

    // PF stopping rule: relative error of the approximated part on fresh points.
    let val_pts = if spec.has_exact_solution() {
        validation_points(&spec.domain, cfg.samples.validation, cfg.seed)?
    } else {
        Vec::new()
    };
    let target: Vec<f64> = val_pts
        .iter()
        .map(|&p| {
            if plain {
                spec.exact_u(p).unwrap().value
            } else {
                spec.exact_w(p).unwrap().value
            }
        })
        .collect();
    let volume = spec.domain.measures().volume;
    let validate = |x: &[f64]| -> sepinn::Result<f64> {
        let sol = Solution::from_state(&spec, &layout, x)?;
        let approx = if plain { sol.u(&val_pts) } else { sol.regular(&val_pts) };
        Ok(relative_l2_on(&approx, &target, volume, cfg.seed)?.relative)
    };
    let mut checkpoints = Vec::new();
    let mut save_loop = |k: usize, x: &[f64]| -> sepinn::Result<()> {
        let path = dir.join(format!("loop_{k:02}.ckpt"));
        checkpoint_of(&layout, cfg.seed, x).map_err(to_core)?.save(&path)?;
        checkpoints.push(path);
        Ok(())
    };
    let hooks = Hooks {
        validate: spec.has_exact_solution().then_some(&validate as &dyn Fn(&[f64]) -> sepinn::Result<f64>),
        on_loop: Some(&mut save_loop),
    };
    let report = two_stage_train(&mut obj, &x0, &cfg.two_stage(), cfg.seed, cfg.to_toml(), hooks)?;

    let report_csv = dir.join("report.csv");
    report.write_csv(&report_csv)?;
    let final_ckpt = dir.join("final.ckpt");
    checkpoint_of(&layout, cfg.seed, &report.final_x)?.save(&final_ckpt)?;
    checkpoints.push(final_ckpt);

    let sol = Solution::from_state(&spec, &layout, &report.final_x)?;
    let ev = evaluate_solution(&spec, &sol, plain, cfg.samples.validation, cfg.seed)?;
    let sigma = obj.penalty();
    let summary = Summary {
        problem: cfg.problem.clone(),
        method: cfg.method,
        seed: cfg.seed,
        gamma: report.final_x[layout.coeff_offset()..].to_vec(),
        gamma_extracted: ev.gamma_extracted,
        e: ev.e,
        e_u: ev.e_u,
        e_s: ev.e_s,
        e_abs: ev.e_abs,
        mu: None,
        final_loss: report.final_loss.total,
        sigma_final: [sigma.dirichlet, sigma.neumann],
        pf_loops: report.sigma_trajectory.len(),
        early_stop: report.early_stop,
        iterations: report.records.len().saturating_sub(1),
        seconds: clock.elapsed().as_secs_f64(),
    };
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: "train".into(),
        threads: rayon::current_num_threads(),
        started_unix: started,
        wall_seconds: clock.elapsed().as_secs_f64(),
        config: cfg.clone(),
        summary: summary.clone(),
        report_csv,
        checkpoints: checkpoints.clone(),
    }
    .write(dir)?;
    Ok(TrainOutcome {
        summary,
        final_state: report.final_x.clone(),
        report,
        dir: dir.to_path_buf(),
        manifest,
    })
}

fn to_core(e: CliError) -> sepinn::Error {
    match e {
        CliError::Core(e) => e,
        other => sepinn::Error::Checkpoint(other.to_string()),
    }
}

fn train_eigen(cfg: &RunConfig, dir: &Path) -> Result<TrainOutcome> {
    let started = now_unix();
    let clock = Instant::now();
    std::fs::create_dir_all(dir)?;
    let spec = cfg.problem_spec()?;
    let samples = SampleSet::draw(&spec.domain, cfg.sample_counts(&spec), cfg.seed)?;
    let arch = MlpArch::new(cfg.network.widths.clone())?;
    let (ecfg, weights) = cfg.eigen_config().expect("validated");
    let mut obj = EigenObjective::new(&spec, &samples, arch, true, cfg.penalty.sigma_d, weights)?;
    let out = eigen_alternate(&mut obj, cfg.seed, cfg.gamma_init, &ecfg, cfg.to_toml())?;
    let report_csv = dir.join("report.csv");
    out.report.write_csv(&report_csv)?;
    let nets = eigen_candidates(&obj, &out.report.final_x)?;
    let co = obj.coeff_offset();
    let x = &out.report.final_x;
    let ckpt = Checkpoint {
        seed: cfg.seed,
        nets: nets.to_vec(),
        extras: vec![x[co], x[co + 1], obj.mu()[0], obj.mu()[1]],
    };
    let final_ckpt = dir.join("final.ckpt");
    ckpt.save(&final_ckpt)?;
    // Reported eigenvalues are Rayleigh quotients on fresh points; the
    // in-training estimates on the collocation points run low once the
    // candidates fit the sample.
    let pts = validation_points(&spec.domain, cfg.samples.validation, cfg.seed)?;
    let mut pairs = [0, 1].map(|i| (0.0, x[co + i]));
    for (i, pair) in pairs.iter_mut().enumerate() {
        pair.0 = rayleigh_quotient(&nets[i], x[co + i], &spec.terms, &pts)?;
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let summary = Summary {
        problem: cfg.problem.clone(),
        method: cfg.method,
        seed: cfg.seed,
        gamma: pairs.iter().map(|p| p.1).collect(),
        gamma_extracted: None,
        e: None,
        e_u: None,
        e_s: None,
        e_abs: None,
        mu: Some([pairs[0].0, pairs[1].0]),
        final_loss: out.report.final_loss.total,
        sigma_final: [obj.sigma(), 0.0],
        pf_loops: out.report.sigma_trajectory.len(),
        early_stop: false,
        iterations: out.report.records.len().saturating_sub(1),
        seconds: clock.elapsed().as_secs_f64(),
    };
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: "eigen".into(),
        threads: rayon::current_num_threads(),
        started_unix: started,
        wall_seconds: clock.elapsed().as_secs_f64(),
        config: cfg.clone(),
        summary: summary.clone(),
        report_csv,
        checkpoints: vec![final_ckpt],
    }
    .write(dir)?;
    Ok(TrainOutcome {
        summary,
        final_state: out.report.final_x.clone(),
        report: out.report,
        dir: dir.to_path_buf(),
        manifest,
    })
}

/// Re-runs the configuration stored in a manifest into `dir` and returns
/// the stored and the new summary.
pub fn replay(manifest: &Path, dir: &Path) -> Result<(Summary, Summary)> {
    let m = RunManifest::load(manifest)?;
    let out = train(&m.config, dir)?;
    Ok((m.summary, out.summary))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub problem: String,
    pub checkpoint: PathBuf,
    pub n: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_u: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_u: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_abs_u: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_extracted: Option<Vec<f64>>,
    /// Rayleigh quotients of the candidates (eigenvalue problems).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rayleigh: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<PathBuf>,
}

pub struct EvalOptions {
    pub n: usize,
    pub seed: u64,
    pub slice: Option<f64>,
    pub resolution: usize,
    pub out_dir: PathBuf,
    pub grid: bool,
}

/// Errors of a saved state against the exact solution when one is known,
/// otherwise a residual-free report (Rayleigh quotients for eigenvalue
/// problems). Optionally writes a field grid of `û`.
pub fn evaluate(checkpoint: &Path, spec: &ProblemSpec, opts: &EvalOptions) -> Result<EvalReport> {
    let ck = Checkpoint::load(checkpoint)?;
    std::fs::create_dir_all(&opts.out_dir)?;
    let mut rep = EvalReport {
        problem: spec.name.clone(),
        checkpoint: checkpoint.to_path_buf(),
        n: opts.n,
        seed: opts.seed,
        e_w: None,
        e_u: None,
        e_s: None,
        abs_w: None,
        abs_u: None,
        max_abs_u: None,
        gamma_extracted: None,
        rayleigh: None,
        grid: None,
    };
    let field: Box<dyn Fn(&[Point]) -> Vec<f64>> = if spec.kind == EquationKind::Eigenvalue {
        if ck.nets.len() != 2 || ck.extras.len() < 2 {
            return Err(sepinn::Error::Config("eigen checkpoint needs two networks and their coefficients".into()).into());
        }
        if ck.nets[0].arch().input_dim() != spec.dim() {
            return Err(sepinn::Error::Config("checkpoint dimension does not match the problem".into()).into());
        }
        let pts = validation_points(&spec.domain, opts.n, opts.seed)?;
        let rq = (0..2)
            .map(|i| rayleigh_quotient(&ck.nets[i], ck.extras[i], &spec.terms, &pts))
            .collect::<sepinn::Result<Vec<f64>>>()?;
        rep.rayleigh = Some(rq);
        let (net, g, terms) = (ck.nets[0].clone(), ck.extras[0], spec.terms.clone());
        Box::new(move |pts: &[Point]| {
            let sol = Solution {
                terms: terms.clone(),
                zbasis: None,
                w: net.clone(),
                aux: Vec::new(),
                aux_input: Default::default(),
                coeffs: vec![vec![g]; terms.len()],
            };
            sol.u(pts)
        })
    } else {
        let sol = Solution::from_parts(spec, &ck.nets, &ck.extras)?;
        let plain = ck.extras.is_empty() && ck.nets.len() == 1;
        if spec.has_exact_solution() {
            let s = split_errors(spec, &sol, opts.n, opts.seed)?;
            rep.e_w = (!plain).then_some(s.w.relative);
            rep.abs_w = (!plain).then_some(s.w.absolute);
            rep.e_u = Some(s.u.relative);
            rep.abs_u = Some(s.u.absolute);
            rep.max_abs_u = Some(s.u.max_abs);
            rep.e_s = if plain { None } else { s.s.map(|x| x.relative) };
            rep.gamma_extracted = evaluate_solution(spec, &sol, plain, opts.n, opts.seed)?.gamma_extracted;
        }
        Box::new(move |pts: &[Point]| sol.u(pts))
    };
    if opts.grid {
        let path = opts.out_dir.join(match opts.slice {
            Some(z) => format!("field_z{z}.csv"),
            None => "field.csv".into(),
        });
        export_field_grid(field, &spec.domain, [opts.resolution; 2], opts.slice, &path)?;
        rep.grid = Some(path);
    }
    let tmp = opts.out_dir.join(".eval.json.tmp");
    std::fs::write(&tmp, serde_json::to_vec_pretty(&rep)?)?;
    std::fs::rename(&tmp, opts.out_dir.join("eval.json"))?;
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub e: f64,
    pub e_u: f64,
    pub e_s: f64,
    pub abs_w: f64,
    pub abs_u: f64,
    pub abs_s: f64,
    pub seconds: f64,
}

/// Truncation sweep. Analytic mode uses the exact regular part and exact
/// coefficients cut after mode `N`; trained mode runs one training per `N`.
pub fn sweep_truncation(cfg: &RunConfig, levels: &[usize], analytic: bool, dir: &Path) -> Result<Vec<SweepRow>> {
    if cfg.method != Method::SepinnC {
        return Err(ConfigError::Field {
            field: "method",
            message: "truncation sweeps need sepinn-c".into(),
        }
        .into());
    }
    if levels.is_empty() {
        return Err(sepinn::Error::Parameter("empty truncation list".into()).into());
    }
    std::fs::create_dir_all(dir)?;
    let spec = cfg.problem_spec()?;
    let mut rows = Vec::new();
    if analytic {
        let clock = Instant::now();
        let w = |pts: &[Point]| pts.iter().map(|&p| spec.exact_w(p).unwrap().value).collect::<Vec<_>>();
        for r in truncation_study(
            &spec,
            w,
            |pts, n| exact_truncated_singular(&spec, pts, n),
            levels,
            cfg.samples.validation,
            cfg.seed,
        )? {
            rows.push(SweepRow {
                n: r.n,
                e: r.e,
                e_u: r.e_u,
                e_s: r.e_s,
                abs_w: r.abs_w,
                abs_u: r.abs_u,
                abs_s: r.abs_s,
                seconds: clock.elapsed().as_secs_f64() / levels.len() as f64,
            });
        }
    } else {
        for &n in levels {
            let mut c = cfg.clone();
            c.series = Some(crate::config::SeriesSection { n });
            let sub = dir.join(format!("n{n:02}"));
            let out = train(&c, &sub)?;
            let sol = Solution::from_parts(&spec, &checkpoint_nets(&out)?, &out.summary.gamma)?;
            let t = truncation_study(
                &spec,
                |pts: &[Point]| sol.regular(pts),
                |pts, k| sol.singular_truncated(pts, Some(k)),
                &[n],
                cfg.samples.validation,
                cfg.seed,
            )?;
            let r = t[0];
            rows.push(SweepRow {
                n,
                e: r.e,
                e_u: r.e_u,
                e_s: r.e_s,
                abs_w: r.abs_w,
                abs_u: r.abs_u,
                abs_s: r.abs_s,
                seconds: out.summary.seconds,
            });
        }
    }
    let mut w = csv::Writer::from_path(dir.join("truncation.csv"))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(rows)
}

fn checkpoint_nets(out: &TrainOutcome) -> Result<Vec<MlpParams>> {
    let path = out.dir.join("final.ckpt");
    Ok(Checkpoint::load(&path)?.nets)
}

/// Trains the enriched method and plain PINN on identical seeds, samples and
/// architecture, and writes both loss trajectories side by side.
pub fn compare_baseline(cfg: &RunConfig, dir: &Path) -> Result<(TrainOutcome, TrainOutcome)> {
    if cfg.method != Method::Sepinn {
        return Err(ConfigError::Field {
            field: "method",
            message: "baseline comparison starts from a sepinn config".into(),
        }
        .into());
    }
    let enriched = train(cfg, &dir.join("sepinn"))?;
    let mut plain_cfg = cfg.clone();
    plain_cfg.method = Method::Pinn;
    let plain = train(&plain_cfg, &dir.join("pinn"))?;
    write_comparison(&enriched, &plain, &dir.join("compare.csv"))?;
    Ok((enriched, plain))
}

fn write_comparison(a: &TrainOutcome, b: &TrainOutcome, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["run", "stage", "pf_loop", "iteration", "step", "total", "validation_e"])?;
    for (name, out) in [("sepinn", a), ("pinn", b)] {
        let mut last_loop = usize::MAX;
        for (step, r) in out.report.records.iter().enumerate() {
            // The PF validation error is known at the end of each loop.
            let val = if r.pf_loop != last_loop && r.pf_loop >= 2 {
                out.report.validation.get(r.pf_loop - 2).copied()
            } else {
                None
            };
            last_loop = r.pf_loop;
            w.write_record([
                name.to_string(),
                format!("{:?}", r.stage).to_lowercase(),
                r.pf_loop.to_string(),
                r.iteration.to_string(),
                step.to_string(),
                format!("{:e}", r.loss.total),
                val.map(|v| format!("{v:e}")).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Core(sepinn::Error::Csv(e))
    }
}
