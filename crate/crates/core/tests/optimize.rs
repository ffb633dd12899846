use sepinn::geometry::{SampleCounts, SampleSet};
use sepinn::loss::{CollocationObjective, Enrichment, LossBreakdown, PenaltyWeights};
use sepinn::network::MlpArch;
use sepinn::optimize::*;
use sepinn::problems;
use sepinn::Result;

struct Bowl;

impl Objective for Bowl {
    fn dim(&self) -> usize {
        1
    }
    fn evaluate(&self, x: &[f64], grad: Option<&mut [f64]>) -> Result<LossBreakdown> {
        if let Some(g) = grad {
            g[0] = 2.0 * (x[0] - 3.0);
        }
        Ok(LossBreakdown::scalar((x[0] - 3.0).powi(2)))
    }
}

struct Flat(usize);

impl Objective for Flat {
    fn dim(&self) -> usize {
        self.0
    }
    fn evaluate(&self, _: &[f64], grad: Option<&mut [f64]>) -> Result<LossBreakdown> {
        if let Some(g) = grad {
            g.fill(0.0);
        }
        Ok(LossBreakdown::scalar(1.0))
    }
}

struct Rosenbrock;

impl Objective for Rosenbrock {
    fn dim(&self) -> usize {
        2
    }
    fn evaluate(&self, x: &[f64], grad: Option<&mut [f64]>) -> Result<LossBreakdown> {
        let (a, b) = (1.0, 100.0);
        let f = (a - x[0]).powi(2) + b * (x[1] - x[0] * x[0]).powi(2);
        if let Some(g) = grad {
            g[0] = -2.0 * (a - x[0]) - 4.0 * b * x[0] * (x[1] - x[0] * x[0]);
            g[1] = 2.0 * b * (x[1] - x[0] * x[0]);
        }
        Ok(LossBreakdown::scalar(f))
    }
}

/// `½ (x - x*)ᵀ A (x - x*)` with a fixed SPD tridiagonal `A` and
/// `x*_i = sin(i)`; written around `x*` so it stays accurate near the minimum.
struct Quadratic(usize);

impl Quadratic {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.0;
        (0..n)
            .map(|i| {
                let mut v = (1.0 + i as f64) * x[i];
                if i > 0 {
                    v += 0.3 * x[i - 1];
                }
                if i + 1 < n {
                    v += 0.3 * x[i + 1];
                }
                v
            })
            .collect()
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.0
    }
    fn evaluate(&self, x: &[f64], grad: Option<&mut [f64]>) -> Result<LossBreakdown> {
        let e: Vec<f64> = x.iter().enumerate().map(|(i, v)| v - (i as f64).sin()).collect();
        let ae = self.apply(&e);
        let f: f64 = e.iter().zip(&ae).map(|(a, b)| 0.5 * a * b).sum();
        if let Some(g) = grad {
            g.copy_from_slice(&ae);
        }
        Ok(LossBreakdown::scalar(f))
    }
}

#[test]
fn adam_finds_the_bottom_of_a_bowl() {
    let cfg = AdamConfig { lr_net: 0.1, lr_coeff: 0.1, max_iter: 500, ..AdamConfig::default() };
    let out = adam_minimize(&Bowl, &[0.0], &cfg, 1).unwrap();
    assert!((out.x[0] - 3.0).abs() < 1e-3, "{}", out.x[0]);
    assert_eq!(out.history.len(), 500);
}

#[test]
fn adam_leaves_a_flat_objective_alone() {
    let x0 = vec![0.3, -1.0, 2.0];
    let out = adam_minimize(&Flat(3), &x0, &AdamConfig::default(), 2).unwrap();
    assert_eq!(out.x, x0);
}

#[test]
fn adam_uses_separate_rates_per_group() {
    // First Adam step has magnitude lr in every coordinate with nonzero gradient.
    let cfg = AdamConfig { lr_net: 1e-3, lr_coeff: 8e-3, max_iter: 1, ..AdamConfig::default() };
    let x0 = [-1.0; 4];
    let out = adam_minimize(&Quadratic(4), &x0, &cfg, 2).unwrap();
    for (i, v) in out.x.iter().enumerate() {
        let lr = if i < 2 { 1e-3 } else { 8e-3 };
        assert!((v - x0[i] - lr).abs() < 1e-10, "coord {i}: {v}");
    }
    assert!(AdamConfig { beta1: 1.0, ..cfg }.validate().is_err());
}

#[test]
fn lbfgs_solves_rosenbrock() {
    let cfg = LbfgsConfig { max_iter: 200, ftol: 0.0, gtol: 1e-10, ..LbfgsConfig::default() };
    let out = lbfgs_minimize(&Rosenbrock, &[-1.2, 1.0], &cfg).unwrap();
    assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6, "{:?} {:?}", out.x, out.status);
    assert!(out.history.len() <= 200);
    // Accepted steps never increase the loss.
    for w in out.history.windows(2) {
        assert!(w[1].total <= w[0].total);
    }
    assert!(out.last.total <= out.history.last().unwrap().total);
}

#[test]
fn lbfgs_stops_at_once_when_already_optimal() {
    let out = lbfgs_minimize(&Rosenbrock, &[1.0, 1.0], &LbfgsConfig::default()).unwrap();
    assert!(out.history.len() <= 1);
    assert_eq!(out.status, Status::Converged);
    assert_eq!(out.x, vec![1.0, 1.0]);
}

#[test]
fn lbfgs_memory_does_not_change_a_quadratic_minimizer() {
    let q = Quadratic(30);
    let run = |m| {
        let cfg = LbfgsConfig { memory: m, gtol: 1e-13, ftol: 0.0, max_iter: 500, ..LbfgsConfig::default() };
        lbfgs_minimize(&q, &vec![0.0; 30], &cfg).unwrap().x
    };
    let (a, b) = (run(10), run(20));
    for (u, v) in a.iter().zip(&b) {
        assert!((u - v).abs() < 1e-10);
    }
    assert!(a.iter().enumerate().all(|(i, v)| (v - (i as f64).sin()).abs() < 1e-10));
    assert!(LbfgsConfig { memory: 0, ..LbfgsConfig::default() }.validate().is_err());
}

#[test]
fn penalty_trajectory_is_geometric_and_capped() {
    let s = PenaltySchedule {
        initial: PenaltyWeights::new(100.0, 0.0).unwrap(),
        q: 1.5,
        cap: 1200.0,
        threshold: 1e-3,
    };
    let t: Vec<f64> = s.trajectory().iter().map(|p| p.dirichlet).collect();
    assert_eq!(t.len(), 7);
    for w in t.windows(2) {
        assert_eq!(w[1], w[0] * 1.5);
    }
    assert_eq!(t[0], 100.0);
    assert_eq!(*t.last().unwrap(), 1139.0625);
    assert!(t.last().unwrap() * 1.5 > 1200.0);
    assert!((t.last().unwrap() - 1139.1).abs() < 0.05);
    assert!(PenaltySchedule { q: 1.0, ..s }.validate().is_err());

    let mixed = PenaltySchedule {
        initial: PenaltyWeights::new(100.0, 100.0).unwrap(),
        cap: 800.0,
        ..s
    };
    assert_eq!(mixed.trajectory().len(), 6);
}

fn small_run(threshold: f64, seed: u64) -> (TrainReport, Vec<Vec<f64>>) {
    let p = problems::example_lshape_2d();
    let s = SampleSet::draw(&p.domain, SampleCounts::proportional(&p.domain, 300, 80), seed).unwrap();
    let arch = MlpArch::new(vec![2, 6, 6, 1]).unwrap();
    let sigma = PenaltyWeights::new(100.0, 0.0).unwrap();
    let mut obj = CollocationObjective::new(&p, &s, arch, Enrichment::Scalar, sigma).unwrap();
    let x0 = obj.initial_point(seed, 1.0);
    let cfg = TwoStageConfig {
        adam: AdamConfig { max_iter: 30, ..AdamConfig::default() },
        lbfgs: LbfgsConfig { max_iter: 15, ..LbfgsConfig::default() },
        schedule: PenaltySchedule { initial: sigma, q: 1.5, cap: 300.0, threshold },
        stage2_adam: None,
    };
    let mut states = Vec::new();
    let mut record = |_: usize, x: &[f64]| -> Result<()> {
        states.push(x.to_vec());
        Ok(())
    };
    let validate = |_: &[f64]| -> Result<f64> { Ok(0.5) };
    let hooks = Hooks { validate: Some(&validate), on_loop: Some(&mut record) };
    let report = two_stage_train(&mut obj, &x0, &cfg, seed, String::new(), hooks).unwrap();
    (report, states)
}

#[test]
fn two_stage_training_follows_the_schedule() {
    let (r, states) = small_run(1e-3, 4);
    let sig: Vec<f64> = r.sigma_trajectory.iter().map(|s| s.dirichlet).collect();
    assert_eq!(sig, vec![100.0, 150.0, 225.0]);
    assert!(!r.early_stop);
    assert_eq!(r.iterations(Stage::Adam), 30);
    assert_eq!(states.len(), 3);
    // γ is frozen after Stage 1.
    let n = states[0].len() - 1;
    assert!(states.iter().all(|x| x[n] == states[0][n]));
    assert_eq!(r.final_x, *states.last().unwrap());

    // Warm start: the first L-BFGS record of loop k+1 is evaluated at the loop-k state.
    for k in 1..3 {
        let first_next = r.records.iter().find(|x| x.stage == Stage::Lbfgs && x.pf_loop == k + 1).unwrap();
        let last_prev = r.records.iter().filter(|x| x.stage == Stage::Lbfgs && x.pf_loop == k).last().unwrap();
        let _ = last_prev;
        let s = SampleSet::draw(
            &problems::example_lshape_2d().domain,
            SampleCounts::proportional(&problems::example_lshape_2d().domain, 300, 80),
            4,
        )
        .unwrap();
        let p = problems::example_lshape_2d();
        let obj = CollocationObjective::new(
            &p,
            &s,
            MlpArch::new(vec![2, 6, 6, 1]).unwrap(),
            Enrichment::Scalar,
            first_next.sigma,
        )
        .unwrap();
        let at_prev = obj.evaluate(&states[k - 1], None).unwrap();
        assert_eq!(at_prev.interior.to_bits(), first_next.loss.interior.to_bits());
    }

    let (again, _) = small_run(1e-3, 4);
    let a: Vec<u64> = r.records.iter().map(|x| x.loss.total.to_bits()).collect();
    let b: Vec<u64> = again.records.iter().map(|x| x.loss.total.to_bits()).collect();
    assert_eq!(a, b);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.csv");
    r.write_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("stage,pf_loop,iteration,sigma_d"));
    assert_eq!(text.lines().count(), r.records.len() + 1);
}

#[test]
fn validation_below_threshold_stops_after_one_loop() {
    let (r, states) = small_run(1.0, 4);
    assert!(r.early_stop);
    assert_eq!(r.sigma_trajectory.len(), 1);
    assert_eq!(states.len(), 1);
}
