//! Adam, L-BFGS, the penalty path-following schedule and the training drivers.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{CollocationObjective, EigenObjective, LossBreakdown, PenaltyWeights};
use crate::network::MlpParams;

/// A differentiable loss over a flat state vector.
pub trait Objective {
    fn dim(&self) -> usize;

    /// Loss at `x`; when `grad` is given it receives the gradient of the total.
    fn evaluate(&self, x: &[f64], grad: Option<&mut [f64]>) -> Result<LossBreakdown>;
}

/// Optimizes the leading `head.len()` coordinates with the tail held fixed.
pub struct Restricted<'a, O: Objective + ?Sized> {
    inner: &'a O,
    tail: Vec<f64>,
}

impl<'a, O: Objective + ?Sized> Restricted<'a, O> {
    pub fn new(inner: &'a O, tail: Vec<f64>) -> Self {
        Self { inner, tail }
    }

    fn full(&self, head: &[f64]) -> Vec<f64> {
        let mut x = head.to_vec();
        x.extend_from_slice(&self.tail);
        x
    }
}

impl<O: Objective + ?Sized> Objective for Restricted<'_, O> {
    fn dim(&self) -> usize {
        self.inner.dim() - self.tail.len()
    }

    fn evaluate(&self, x: &[f64], grad: Option<&mut [f64]>) -> Result<LossBreakdown> {
        let full = self.full(x);
        match grad {
            None => self.inner.evaluate(&full, None),
            Some(g) => {
                let mut gf = vec![0.0; full.len()];
                let lb = self.inner.evaluate(&full, Some(&mut gf))?;
                g.copy_from_slice(&gf[..x.len()]);
                Ok(lb)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIterations,
    Stagnated,
    LineSearchFailed,
    NonFinite,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub x: Vec<f64>,
    /// Loss at the start of every iteration.
    pub history: Vec<LossBreakdown>,
    /// Loss at the returned state.
    pub last: LossBreakdown,
    pub status: Status,
    pub evaluations: usize,
}

fn is_nonfinite(e: &Error) -> bool {
    matches!(e, Error::NonFinite { .. } | Error::NonFiniteLoss { .. })
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr_net: f64,
    pub lr_coeff: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub max_iter: usize,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr_net: 1e-3,
            lr_coeff: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            max_iter: 1000,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr_net > 0.0
            && self.lr_coeff > 0.0
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid Adam settings {self:?}")))
        }
    }
}

/// Adam with bias correction; coordinates from `split` on use `lr_coeff`.
pub fn adam_minimize<O: Objective + ?Sized>(
    obj: &O,
    x0: &[f64],
    cfg: &AdamConfig,
    split: usize,
) -> Result<Outcome> {
    cfg.validate()?;
    let n = obj.dim();
    if x0.len() != n || x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("Adam needs a finite state of the objective's size".into()));
    }
    let mut x = x0.to_vec();
    let mut good = x.clone();
    let (mut m, mut v, mut g) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut history = Vec::with_capacity(cfg.max_iter);
    let (mut b1t, mut b2t) = (1.0, 1.0);
    let mut status = Status::MaxIterations;
    for _ in 0..cfg.max_iter {
        let lb = match obj.evaluate(&x, Some(&mut g)) {
            Ok(lb) if lb.total.is_finite() && g.iter().all(|v| v.is_finite()) => lb,
            Ok(_) => {
                status = Status::NonFinite;
                break;
            }
            Err(e) if is_nonfinite(&e) => {
                status = Status::NonFinite;
                break;
            }
            Err(e) => return Err(e),
        };
        history.push(lb);
        good.copy_from_slice(&x);
        b1t *= cfg.beta1;
        b2t *= cfg.beta2;
        let (c1, c2) = (1.0 - b1t, 1.0 - b2t);
        for i in 0..n {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let lr = if i < split { cfg.lr_net } else { cfg.lr_coeff };
            x[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + cfg.eps);
        }
    }
    let mut evals = history.len();
    let last = if status == Status::NonFinite {
        // Fall back to the last state with a finite loss.
        x = good;
        match history.last() {
            Some(lb) => *lb,
            None => return Err(Error::NonFiniteLoss { iteration: 0 }),
        }
    } else {
        evals += 1;
        match obj.evaluate(&x, None) {
            Ok(lb) if lb.total.is_finite() => lb,
            Ok(_) => return Err(Error::NonFiniteLoss { iteration: history.len() }),
            Err(e) if is_nonfinite(&e) => return Err(Error::NonFiniteLoss { iteration: history.len() }),
            Err(e) => return Err(e),
        }
    };
    Ok(Outcome {
        x,
        history,
        last,
        status,
        evaluations: evals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbfgsConfig {
    pub memory: usize,
    /// Stop when `max |g_i|` falls below this.
    pub gtol: f64,
    /// Stop when the relative loss decrease of an accepted step falls below this.
    pub ftol: f64,
    pub max_iter: usize,
    pub c1: f64,
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            memory: 10,
            gtol: 1e-9,
            ftol: 1e-12,
            max_iter: 2500,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 25,
        }
    }
}

impl LbfgsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.memory == 0 || !(self.gtol > 0.0) || !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::Config(format!("invalid L-BFGS settings {self:?}")));
        }
        Ok(())
    }
}

struct Probe {
    f: f64,
    g: Vec<f64>,
    dphi: f64,
    lb: LossBreakdown,
}

fn probe<O: Objective + ?Sized>(obj: &O, x: &[f64], d: &[f64], a: f64, evals: &mut usize) -> Result<Option<Probe>> {
    let xt: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + a * di).collect();
    let mut g = vec![0.0; x.len()];
    *evals += 1;
    match obj.evaluate(&xt, Some(&mut g)) {
        Ok(lb) if lb.total.is_finite() && g.iter().all(|v| v.is_finite()) => Ok(Some(Probe {
            f: lb.total,
            dphi: dot(&g, d),
            g,
            lb,
        })),
        Ok(_) => Ok(None),
        Err(e) if is_nonfinite(&e) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Minimizer of the cubic interpolating `(a, fa, da)` and `(b, fb, db)`,
/// safeguarded into the interior of the bracket.
fn cubic_step(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    let mid = 0.5 * (lo + hi);
    if disc < 0.0 {
        return mid;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
    if !t.is_finite() {
        return mid;
    }
    let margin = 0.1 * (hi - lo);
    t.clamp(lo + margin, hi - margin)
}

/// Strong-Wolfe line search along `d`; `None` on failure.
fn line_search<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    f0: f64,
    d0: f64,
    d: &[f64],
    a_init: f64,
    cfg: &LbfgsConfig,
    evals: &mut usize,
) -> Result<Option<(f64, Probe)>> {
    let (c1, c2) = (cfg.c1, cfg.c2);
    // Sufficient decrease; near convergence, where loss differences drown in
    // rounding, a non-increasing step with a flattened slope also counts.
    let decrease = |a: f64, p: &Probe| p.f <= f0 + c1 * a * d0 || (p.f <= f0 && p.dphi <= (2.0 * c1 - 1.0) * d0);
    let (mut a_prev, mut f_prev, mut d_prev) = (0.0, f0, d0);
    let mut a = a_init;
    let mut budget = cfg.max_line_search;
    // Bracketing phase.
    let (mut lo, mut hi);
    loop {
        if budget == 0 {
            return Ok(None);
        }
        budget -= 1;
        let Some(p) = probe(obj, x, d, a, evals)? else {
            // Step into a non-finite region: shrink.
            a = 0.5 * (a_prev + a);
            if a - a_prev < 1e-20 {
                return Ok(None);
            }
            continue;
        };
        if !decrease(a, &p) || (a_prev > 0.0 && p.f >= f_prev) {
            lo = (a_prev, f_prev, d_prev);
            hi = (a, p.f, p.dphi);
            break;
        }
        if p.dphi.abs() <= -c2 * d0 {
            return Ok(Some((a, p)));
        }
        if p.dphi >= 0.0 {
            lo = (a, p.f, p.dphi);
            hi = (a_prev, f_prev, d_prev);
            break;
        }
        a_prev = a;
        f_prev = p.f;
        d_prev = p.dphi;
        a *= 2.0;
    }
    // Zoom phase.
    loop {
        if budget == 0 || (hi.0 - lo.0).abs() < 1e-16 * lo.0.abs().max(1e-16) {
            return Ok(None);
        }
        budget -= 1;
        let at = cubic_step(lo.0, lo.1, lo.2, hi.0, hi.1, hi.2);
        let Some(p) = probe(obj, x, d, at, evals)? else {
            hi = (at, f64::INFINITY, 0.0);
            continue;
        };
        if !decrease(at, &p) || p.f > lo.1 || (p.f == lo.1 && lo.0 > 0.0) {
            hi = (at, p.f, p.dphi);
        } else {
            if p.dphi.abs() <= -c2 * d0 {
                return Ok(Some((at, p)));
            }
            if p.dphi * (hi.0 - lo.0) >= 0.0 {
                hi = lo;
            }
            lo = (at, p.f, p.dphi);
        }
    }
}

/// L-BFGS with the two-loop recursion and a strong-Wolfe line search.
pub fn lbfgs_minimize<O: Objective + ?Sized>(obj: &O, x0: &[f64], cfg: &LbfgsConfig) -> Result<Outcome> {
    cfg.validate()?;
    let n = obj.dim();
    if x0.len() != n || x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("L-BFGS needs a finite state of the objective's size".into()));
    }
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut lb = obj.evaluate(&x, Some(&mut g))?;
    if !lb.total.is_finite() {
        return Err(Error::NonFiniteLoss { iteration: 0 });
    }
    let mut evals = 1;
    let mut history = Vec::new();
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut status = Status::MaxIterations;
    let mut alpha = vec![0.0; cfg.memory];
    let mut iter = 0;
    while iter < cfg.max_iter {
        if max_abs(&g) <= cfg.gtol {
            status = Status::Converged;
            break;
        }
        history.push(lb);
        iter += 1;
        // Two-loop recursion.
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        for (k, (s, y, rho)) in mem.iter().enumerate().rev() {
            alpha[k] = rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= alpha[k] * yi;
            }
        }
        if let Some((s, y, _)) = mem.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|v| *v *= gamma);
        }
        for (k, (s, y, rho)) in mem.iter().enumerate() {
            let beta = rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (alpha[k] - beta) * si;
            }
        }
        let mut d0 = dot(&g, &d);
        if !(d0 < 0.0) {
            mem.clear();
            d = g.iter().map(|v| -v).collect();
            d0 = dot(&g, &d);
        }
        let a_init = if mem.is_empty() {
            (1.0 / max_abs(&g).max(1e-300)).min(1.0)
        } else {
            1.0
        };
        let found = line_search(obj, &x, lb.total, d0, &d, a_init, cfg, &mut evals)?;
        let Some((a, p)) = found else {
            if mem.is_empty() {
                status = Status::LineSearchFailed;
                break;
            }
            mem.clear();
            continue;
        };
        let s: Vec<f64> = d.iter().map(|v| a * v).collect();
        let y: Vec<f64> = p.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let f_old = lb.total;
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi += si;
        }
        g = p.g;
        lb = p.lb;
        if sy > 1e-12 * dot(&y, &y).max(1e-300) {
            if mem.len() == cfg.memory {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        if (f_old - lb.total).abs() < cfg.ftol * f_old.abs().max(lb.total.abs()) {
            status = Status::Stagnated;
            break;
        }
    }
    Ok(Outcome {
        x,
        history,
        last: lb,
        status,
        evaluations: evals,
    })
}

/// Geometric penalty schedule `σ^{(k+1)} = q σ^{(k)}`, run while the largest
/// weight stays at or below the cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySchedule {
    pub initial: PenaltyWeights,
    pub q: f64,
    pub cap: f64,
    /// Early stop once the validation error drops below this.
    pub threshold: f64,
}

impl PenaltySchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.q > 1.0) || !(self.cap >= self.initial.dirichlet.max(self.initial.neumann)) {
            return Err(Error::Config(format!("invalid penalty schedule {self:?}")));
        }
        Ok(())
    }

    /// Every `σ^{(k)}` the schedule visits when no early stop occurs.
    pub fn trajectory(&self) -> Vec<PenaltyWeights> {
        let mut out = vec![self.initial];
        loop {
            let next = out.last().unwrap().scaled(self.q);
            if next.dirichlet.max(next.neumann) > self.cap {
                return out;
            }
            out.push(next);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Adam,
    Lbfgs,
    Final,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterRecord {
    pub stage: Stage,
    /// Penalty loop index, 0 for Stage 1.
    pub pf_loop: usize,
    pub iteration: usize,
    pub sigma: PenaltyWeights,
    pub loss: LossBreakdown,
    pub extras: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub seed: u64,
    pub config: String,
    pub extra_labels: Vec<String>,
    pub records: Vec<IterRecord>,
    pub sigma_trajectory: Vec<PenaltyWeights>,
    pub loop_status: Vec<Status>,
    pub validation: Vec<f64>,
    pub early_stop: bool,
    pub stage_seconds: Vec<(String, f64)>,
    pub final_x: Vec<f64>,
    pub final_loss: LossBreakdown,
}

impl TrainReport {
    fn new(seed: u64, config: String, extra_labels: Vec<String>) -> Self {
        Self {
            seed,
            config,
            extra_labels,
            records: Vec::new(),
            sigma_trajectory: Vec::new(),
            loop_status: Vec::new(),
            validation: Vec::new(),
            early_stop: false,
            stage_seconds: Vec::new(),
            final_x: Vec::new(),
            final_loss: LossBreakdown::default(),
        }
    }

    pub fn iterations(&self, stage: Stage) -> usize {
        self.records.iter().filter(|r| r.stage == stage).count()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = [
            "stage", "pf_loop", "iteration", "sigma_d", "sigma_n", "interior", "dirichlet", "neumann",
            "normalization", "orthogonality", "rayleigh", "total",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend(self.extra_labels.iter().cloned());
        w.write_record(&header)?;
        for r in &self.records {
            let stage = match r.stage {
                Stage::Adam => "adam",
                Stage::Lbfgs => "lbfgs",
                Stage::Final => "final",
            };
            let mut row = vec![stage.to_string(), r.pf_loop.to_string(), r.iteration.to_string()];
            let l = &r.loss;
            for v in [
                r.sigma.dirichlet, r.sigma.neumann, l.interior, l.dirichlet, l.neumann, l.normalization,
                l.orthogonality, l.rayleigh, l.total,
            ]
            .iter()
            .chain(&r.extras)
            {
                row.push(format!("{v:e}"));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "loss {:.3e}", self.final_loss.total);
        if let Some(r) = self.records.last() {
            for (l, v) in self.extra_labels.iter().zip(&r.extras) {
                let _ = write!(s, " {l} {v:.6}");
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoStageConfig {
    pub adam: AdamConfig,
    pub lbfgs: LbfgsConfig,
    pub schedule: PenaltySchedule,
    /// Adam iterations before L-BFGS inside every penalty loop.
    pub stage2_adam: Option<AdamConfig>,
}

/// Hooks observed by the training drivers.
#[derive(Default)]
pub struct Hooks<'a> {
    /// Validation error of a state; drives the early stop.
    pub validate: Option<&'a dyn Fn(&[f64]) -> Result<f64>>,
    /// Called after every penalty loop with the loop index and state.
    pub on_loop: Option<&'a mut dyn FnMut(usize, &[f64]) -> Result<()>>,
}

fn push_history(report: &mut TrainReport, stage: Stage, pf_loop: usize, sigma: PenaltyWeights, out: &Outcome, extras: &[f64]) {
    for (i, lb) in out.history.iter().enumerate() {
        report.records.push(IterRecord {
            stage,
            pf_loop,
            iteration: i,
            sigma,
            loss: *lb,
            extras: extras.to_vec(),
        });
    }
}

/// Stage 1: Adam on `(θ, γ)` at `σ^{(1)}`. Stage 2: γ frozen, L-BFGS on θ
/// for each penalty level, warm-started from the previous loop.
pub fn two_stage_train(
    obj: &mut CollocationObjective,
    x0: &[f64],
    cfg: &TwoStageConfig,
    seed: u64,
    config_snapshot: String,
    mut hooks: Hooks<'_>,
) -> Result<TrainReport> {
    cfg.schedule.validate()?;
    let split = obj.coeff_offset();
    let mut report = TrainReport::new(seed, config_snapshot, obj.coeff_labels());
    let coeffs = |x: &[f64]| x[split..].to_vec();

    obj.set_penalty(cfg.schedule.initial);
    let t = Instant::now();
    let out = adam_minimize(&*obj, x0, &cfg.adam, split)?;
    report.stage_seconds.push(("adam".into(), t.elapsed().as_secs_f64()));
    let g1 = coeffs(&out.x);
    for (i, lb) in out.history.iter().enumerate() {
        report.records.push(IterRecord {
            stage: Stage::Adam,
            pf_loop: 0,
            iteration: i,
            sigma: cfg.schedule.initial,
            loss: *lb,
            extras: Vec::new(),
        });
    }
    // The coefficient trajectory of Stage 1 is only known at its end.
    if let Some(r) = report.records.last_mut() {
        r.extras = g1.clone();
    }
    for r in report.records.iter_mut() {
        if r.extras.is_empty() {
            r.extras = vec![f64::NAN; g1.len()];
        }
    }
    if out.status == Status::NonFinite {
        return Err(Error::NonFiniteLoss { iteration: out.history.len() });
    }
    let mut x = out.x;

    let t = Instant::now();
    for (k, sigma) in cfg.schedule.trajectory().into_iter().enumerate() {
        obj.set_penalty(sigma);
        report.sigma_trajectory.push(sigma);
        let head = x[..split].to_vec();
        let sub = Restricted::new(&*obj, g1.clone());
        let mut head = head;
        if let Some(a) = &cfg.stage2_adam {
            let o = adam_minimize(&sub, &head, a, head.len())?;
            push_history(&mut report, Stage::Adam, k + 1, sigma, &o, &g1);
            head = o.x;
        }
        let o = lbfgs_minimize(&sub, &head, &cfg.lbfgs)?;
        push_history(&mut report, Stage::Lbfgs, k + 1, sigma, &o, &g1);
        report.loop_status.push(o.status);
        x[..split].copy_from_slice(&o.x);
        report.final_loss = o.last;
        if let Some(cb) = hooks.on_loop.as_mut() {
            cb(k + 1, &x)?;
        }
        if let Some(v) = hooks.validate {
            let e = v(&x)?;
            report.validation.push(e);
            if e < cfg.schedule.threshold {
                report.early_stop = true;
                break;
            }
        }
    }
    report.stage_seconds.push(("lbfgs".into(), t.elapsed().as_secs_f64()));
    report.records.push(IterRecord {
        stage: Stage::Final,
        pf_loop: report.sigma_trajectory.len(),
        iteration: 0,
        sigma: obj.penalty(),
        loss: report.final_loss,
        extras: g1,
    });
    report.final_x = x;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenConfig {
    pub adam: AdamConfig,
    /// Boundary penalty schedule (`neumann` is ignored).
    pub schedule: PenaltySchedule,
    /// Adam-then-Rayleigh alternations per penalty level.
    pub alternations: usize,
    /// Stop alternating once both eigenvalue updates are below this.
    pub mu_tol: f64,
    pub max_restarts: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenReport {
    pub report: TrainReport,
    /// Ascending eigenvalue estimates.
    pub mu: [f64; 2],
    /// Enrichment coefficients, ordered like `mu`.
    pub gamma: [f64; 2],
    pub mu_trajectory: Vec<[f64; 2]>,
    pub restarts: usize,
}

/// Rescales the last layers of both candidates (and their coefficients) so
/// that each has unit Monte Carlo norm.
pub fn normalize_candidates(obj: &EigenObjective, x: &mut [f64]) -> Result<()> {
    let mass = obj.masses(x)?;
    rescale_candidates(obj, x, mass)
}

fn rescale_candidates(obj: &EigenObjective, x: &mut [f64], mass: [f64; 2]) -> Result<()> {
    let arch = obj.arch();
    let n = arch.n_params();
    let last = arch.n_layers();
    let (wo, end) = (arch.weight_offset(last), arch.bias_offset(last) + arch.widths()[last]);
    let co = obj.coeff_offset();
    for (i, m) in mass.iter().enumerate() {
        if !(*m > 1e-12 && m.is_finite()) {
            return Err(Error::DegenerateCandidate(*m));
        }
        let s = 1.0 / m.sqrt();
        for v in &mut x[i * n + wo..i * n + end] {
            *v *= s;
        }
        x[co + i] *= s;
    }
    Ok(())
}

/// Alternating eigenvalue solver: Adam on the loss with `μ` frozen, then `μ`
/// refreshed by the Rayleigh quotient, over an increasing boundary penalty.
pub fn eigen_alternate(
    obj: &mut EigenObjective,
    seed: u64,
    gamma_init: f64,
    cfg: &EigenConfig,
    config_snapshot: String,
) -> Result<EigenReport> {
    cfg.schedule.validate()?;
    let mut restarts = 0;
    loop {
        let s = seed.wrapping_add(restarts as u64 * 0x9E37_79B9);
        match eigen_attempt(obj, s, gamma_init, cfg, config_snapshot.clone()) {
            Err(Error::DegenerateCandidate(_)) if restarts < cfg.max_restarts => restarts += 1,
            Err(e) => return Err(e),
            Ok(mut r) => {
                r.restarts = restarts;
                return Ok(r);
            }
        }
    }
}

fn eigen_attempt(
    obj: &mut EigenObjective,
    seed: u64,
    gamma_init: f64,
    cfg: &EigenConfig,
    config_snapshot: String,
) -> Result<EigenReport> {
    let split = obj.coeff_offset();
    let labels = vec!["gamma_1".into(), "gamma_2".into(), "mu_1".into(), "mu_2".into()];
    let mut report = TrainReport::new(seed, config_snapshot, labels);
    let mut x = obj.initial_point(seed, gamma_init);
    // With the plain terms, the overlap (linear in scale) and the boundary
    // penalty drag a candidate to zero, where the normalisation pull is flat.
    // The scale is fixed by rescaling instead.
    obj.set_scale_invariant(true);
    let mut mu = obj.rayleigh(&x)?;
    let mut mu_traj = vec![mu];
    let t = Instant::now();
    for (k, sigma) in cfg.schedule.trajectory().into_iter().enumerate() {
        obj.set_sigma(sigma.dirichlet);
        report.sigma_trajectory.push(sigma);
        for _ in 0..cfg.alternations.max(1) {
            normalize_candidates(obj, &mut x)?;
            obj.set_mu(mu);
            let out = adam_minimize(&*obj, &x, &cfg.adam, split)?;
            if out.status == Status::NonFinite {
                return Err(Error::NonFiniteLoss { iteration: out.history.len() });
            }
            let extras = [out.x[split], out.x[split + 1], mu[0], mu[1]];
            push_history(&mut report, Stage::Adam, k + 1, sigma, &out, &extras);
            x = out.x;
            let new_mu = obj.rayleigh(&x)?;
            report.final_loss = out.last;
            let delta = (new_mu[0] - mu[0]).abs().max((new_mu[1] - mu[1]).abs());
            mu = new_mu;
            mu_traj.push(mu);
            if delta < cfg.mu_tol {
                break;
            }
        }
    }
    report.stage_seconds.push(("adam".into(), t.elapsed().as_secs_f64()));
    let gamma = [x[split], x[split + 1]];
    report.records.push(IterRecord {
        stage: Stage::Final,
        pf_loop: report.sigma_trajectory.len(),
        iteration: 0,
        sigma: PenaltyWeights {
            dirichlet: obj.sigma(),
            neumann: 0.0,
        },
        loss: report.final_loss,
        extras: vec![gamma[0], gamma[1], mu[0], mu[1]],
    });
    report.final_x = x;
    let (mu, gamma) = if mu[0] <= mu[1] {
        (mu, gamma)
    } else {
        ([mu[1], mu[0]], [gamma[1], gamma[0]])
    };
    Ok(EigenReport {
        report,
        mu,
        gamma,
        mu_trajectory: mu_traj,
        restarts: 0,
    })
}

/// Splits an eigen state into its two candidate networks.
pub fn eigen_candidates(obj: &EigenObjective, x: &[f64]) -> Result<[MlpParams; 2]> {
    let n = obj.arch().n_params();
    Ok([
        MlpParams::from_flat(obj.arch(), x[..n].to_vec())?,
        MlpParams::from_flat(obj.arch(), x[n..2 * n].to_vec())?,
    ])
}
