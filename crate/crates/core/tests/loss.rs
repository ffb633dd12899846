use std::f64::consts::PI;

use sepinn::geometry::{SampleCounts, SampleSet};
use sepinn::jet::Jet;
use sepinn::loss::*;
use sepinn::network::{forward_with_derivatives, MlpArch, MlpParams};
use sepinn::optimize::{normalize_candidates, Objective};
use sepinn::problems::{self, EquationKind, ProblemId, ProblemSpec};
use sepinn::Point;

fn samples(p: &ProblemSpec, n: usize, nb: usize, seed: u64) -> SampleSet {
    SampleSet::draw(&p.domain, SampleCounts::proportional(&p.domain, n, nb), seed).unwrap()
}

fn sigma() -> PenaltyWeights {
    PenaltyWeights::new(100.0, 100.0).unwrap()
}

fn net_jet(params: &MlpParams, p: Point) -> Jet<3> {
    let d = params.arch().input_dim();
    let e = forward_with_derivatives(params, &p[..d]);
    let mut grad = [0.0; 3];
    grad[..d].copy_from_slice(&e.grad);
    Jet { value: e.value, grad, lap: e.lap }
}

fn lift(j: Jet<2>) -> Jet<3> {
    Jet { value: j.value, grad: [j.grad[0], j.grad[1], 0.0], lap: j.lap }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn exact_solutions_zero_the_loss() {
    for id in ProblemId::ALL {
        let p = problems::by_id(id);
        if !p.has_exact_solution() {
            continue;
        }
        let s = samples(&p, 2000, 400, 7);
        let sig = sigma();
        let scale = 1.0 + sig.dirichlet + sig.neumann;
        // Linear enrichment: only w is penalized on the boundary.
        let lb = candidate_breakdown(&p, &s, sig, |x| p.exact_u(x).unwrap(), |x| p.exact_w(x).unwrap()).unwrap();
        assert!(lb.total <= 1e-10 * scale, "{}: {lb:?}", p.name);
        // Auxiliary variant: the full u is penalized.
        let lb = candidate_breakdown(&p, &s, sig, |x| p.exact_u(x).unwrap(), |x| p.exact_u(x).unwrap()).unwrap();
        assert!(lb.total <= 1e-10 * scale, "{} (full trace): {lb:?}", p.name);
        for &x in &s.interior {
            let r = candidate_residual(&p, &p.exact_u(x).unwrap(), x);
            assert!(r.abs() <= 1e-8, "{} residual {r} at {x:?}", p.name);
        }
    }
}

#[test]
fn plain_mode_sees_the_singular_source() {
    let p = problems::example_lshape_2d();
    let s = samples(&p, 2000, 400, 3);
    let lb = candidate_breakdown(&p, &s, sigma(), |x| p.exact_w(x).unwrap(), |x| p.exact_w(x).unwrap()).unwrap();
    assert!(lb.interior > 1e-3);
    assert!(lb.dirichlet <= 1e-16);
}

#[test]
fn truncated_edge_series_leaves_only_the_tail() {
    let p = problems::example_edge_3d();
    let s = samples(&p, 3000, 600, 11);
    let zb = p.zbasis.unwrap();
    let mut last = f64::INFINITY;
    for n in [5, 10, 15, 20] {
        let u = |x: Point| {
            let mut j = p.exact_w(x).unwrap();
            for k in 0..=n {
                let g = p.exact_gamma(0, k).unwrap();
                j = j + p.terms[0].eval_mode(&zb, k, x) * g;
            }
            j
        };
        let lb = candidate_breakdown(&p, &s, sigma(), u, |x| p.exact_w(x).unwrap()).unwrap();
        assert!(lb.total < last, "N={n}: {} !< {last}", lb.total);
        assert!(lb.dirichlet <= 1e-28);
        last = lb.total;
    }
}

#[test]
fn zero_state_of_a_sourceless_problem_has_zero_loss() {
    let mut p = problems::eigen_lshape();
    p.kind = EquationKind::Poisson;
    let s = samples(&p, 500, 100, 1);
    let arch = MlpArch::new(vec![2, 8, 8, 1]).unwrap();
    let lb = sepinn_loss_2d(&MlpParams::zeros(&arch), &[0.0], &s, &p, sigma()).unwrap();
    assert_eq!(lb.total, 0.0);
    let lb = plain_pinn_loss(&MlpParams::zeros(&arch), &s, &p, sigma()).unwrap();
    assert_eq!(lb.total, 0.0);
}

#[test]
fn mismatched_domain_and_missing_boundary_are_rejected() {
    let p = problems::example_lshape_2d();
    let q = problems::example_mixed_bc();
    let s = samples(&q, 200, 50, 1);
    let arch = MlpArch::new(vec![2, 4, 1]).unwrap();
    let w = MlpParams::zeros(&arch);
    assert!(matches!(plain_pinn_loss(&w, &s, &p, sigma()), Err(sepinn::Error::Config(_))));
    let mut s = samples(&p, 200, 50, 1);
    s.dirichlet.clear();
    assert!(plain_pinn_loss(&w, &s, &p, sigma()).is_err());
    assert!(PenaltyWeights::new(0.0, 0.0).is_err());
    // Neumann boundary present but unpenalized.
    let s = samples(&q, 200, 50, 1);
    assert!(plain_pinn_loss(&w, &s, &q, PenaltyWeights::new(10.0, 0.0).unwrap()).is_err());
}

/// The blocked training path against single-point evaluation of the same
/// candidate, for every enrichment variant.
#[test]
fn objective_matches_pointwise_candidate() {
    // 2D, scalar coefficient.
    for p in [problems::example_lshape_2d(), problems::example_mixed_bc(), problems::helmholtz_2d()] {
        let s = samples(&p, 157, 61, 5);
        let arch = MlpArch::new(vec![2, 7, 6, 1]).unwrap();
        let obj = CollocationObjective::new(&p, &s, arch.clone(), Enrichment::Scalar, sigma()).unwrap();
        let mut x = obj.initial_point(9, 0.7);
        let n = arch.n_params();
        let w = MlpParams::from_flat(&arch, x[..n].to_vec()).unwrap();
        let g = x[n];
        let lb = obj.evaluate(&x, None).unwrap();
        let full = |q: Point| net_jet(&w, q) + lift(p.terms[0].eval([q[0], q[1]])) * g;
        let reference = candidate_breakdown(&p, &s, sigma(), full, |q| net_jet(&w, q)).unwrap();
        for (a, b) in [
            (lb.interior, reference.interior),
            (lb.dirichlet, reference.dirichlet),
            (lb.neumann, reference.neumann),
            (lb.total, reference.total),
        ] {
            assert!(rel(a, b) < 1e-11 || (a - b).abs() < 1e-300, "{}: {a} vs {b}", p.name);
        }
        x[n] = 0.0;
        let plain = plain_pinn_loss(&w, &s, &p, sigma()).unwrap();
        let zero = obj.evaluate(&x, None).unwrap();
        assert!(rel(plain.total, zero.total) < 1e-13);
    }

    // 3D, truncated series.
    for p in [problems::example_edge_3d(), problems::example_four_edges_3d(), problems::helmholtz_3d()] {
        let s = samples(&p, 301, 97, 8);
        let arch = MlpArch::new(vec![3, 6, 5, 1]).unwrap();
        let n_modes = 3;
        let obj = CollocationObjective::new(&p, &s, arch.clone(), Enrichment::Series { n: n_modes }, sigma()).unwrap();
        let mut x = obj.initial_point(4, 1.0);
        let n = arch.n_params();
        for (k, v) in x[n..].iter_mut().enumerate() {
            *v = 0.3 + 0.1 * k as f64;
        }
        let w = MlpParams::from_flat(&arch, x[..n].to_vec()).unwrap();
        let gammas = obj.coeffs_per_term(&x);
        let zb = p.zbasis.unwrap();
        let full = |q: Point| {
            let mut j = net_jet(&w, q);
            for (t, gs) in gammas.iter().enumerate() {
                for (k, g) in gs.iter().enumerate() {
                    j = j + p.terms[t].eval_mode(&zb, k, q) * *g;
                }
            }
            j
        };
        let lb = obj.evaluate(&x, None).unwrap();
        let reference = candidate_breakdown(&p, &s, sigma(), full, |q| net_jet(&w, q)).unwrap();
        assert!(rel(lb.total, reference.total) < 1e-11, "{}: {lb:?} vs {reference:?}", p.name);
        let direct = sepinn_c_loss_3d(&w, &gammas, &s, &p, sigma()).unwrap();
        assert_eq!(direct.total.to_bits(), lb.total.to_bits());
    }
}

fn aux_phi_jet(p: &ProblemSpec, t: usize, phi: &MlpParams, input: AuxInput, q: Point) -> Jet<3> {
    match input {
        AuxInput::Cartesian => net_jet(phi, q),
        AuxInput::Polar => {
            let v = p.terms[t].frame.vertex;
            let (dx, dy) = (q[0] - v[0], q[1] - v[1]);
            let r = dx.hypot(dy);
            let e = forward_with_derivatives(phi, &[r, q[2]]);
            Jet {
                value: e.value,
                grad: [e.grad[0] * dx / r, e.grad[0] * dy / r, e.grad[1]],
                lap: e.lap + e.grad[0] / r,
            }
        }
    }
}

#[test]
fn auxiliary_variant_matches_engine_on_the_full_product() {
    for input in [AuxInput::Polar, AuxInput::Cartesian] {
        for p in [problems::example_edge_3d(), problems::example_four_edges_3d()] {
            let s = samples(&p, 211, 89, 21);
            let arch = MlpArch::new(vec![3, 5, 5, 1]).unwrap();
            let d_in = if input == AuxInput::Polar { 2 } else { 3 };
            let aux_arch = MlpArch::new(vec![d_in, 4, 4, 1]).unwrap();
            let archs = vec![aux_arch.clone(); p.terms.len()];
            let obj = CollocationObjective::new(
                &p,
                &s,
                arch.clone(),
                Enrichment::AuxNets { archs: archs.clone(), input },
                sigma(),
            )
            .unwrap();
            let x = obj.initial_point(17, 1.0);
            let n = arch.n_params();
            let w = MlpParams::from_flat(&arch, x[..n].to_vec()).unwrap();
            let phis: Vec<MlpParams> = (0..p.terms.len())
                .map(|j| {
                    let o = n + j * aux_arch.n_params();
                    MlpParams::from_flat(&aux_arch, x[o..o + aux_arch.n_params()].to_vec()).unwrap()
                })
                .collect();
            let u = |q: Point| {
                let mut j = net_jet(&w, q);
                for (t, phi) in phis.iter().enumerate() {
                    let pj = lift(p.terms[t].eval([q[0], q[1]]));
                    if pj.value != 0.0 || pj.grad != [0.0; 3] {
                        j = j + aux_phi_jet(&p, t, phi, input, q) * pj;
                    }
                }
                j
            };
            let lb = obj.evaluate(&x, None).unwrap();
            let reference = candidate_breakdown(&p, &s, sigma(), u, u).unwrap();
            for (a, b) in [(lb.interior, reference.interior), (lb.dirichlet, reference.dirichlet), (lb.neumann, reference.neumann)] {
                assert!(rel(a, b) < 1e-9, "{} {input:?}: {a} vs {b}", p.name);
            }
            let direct = sepinn_n_loss_3d(&w, &phis, input, &s, &p, sigma()).unwrap();
            assert_eq!(direct.total.to_bits(), lb.total.to_bits());
        }
    }
}

#[test]
fn auxiliary_variant_with_zero_networks_is_plain_pinn() {
    let p = problems::example_edge_3d();
    let s = samples(&p, 300, 120, 2);
    let arch = MlpArch::new(vec![3, 6, 6, 1]).unwrap();
    let w = MlpParams::init(&arch, 3);
    let aux = vec![MlpParams::zeros(&MlpArch::new(vec![2, 5, 1]).unwrap())];
    let a = sepinn_n_loss_3d(&w, &aux, AuxInput::Polar, &s, &p, sigma()).unwrap();
    let b = plain_pinn_loss(&w, &s, &p, sigma()).unwrap();
    assert_eq!(a.total.to_bits(), b.total.to_bits());
    assert_eq!(a.interior.to_bits(), b.interior.to_bits());
}

#[test]
fn closed_form_flux_in_the_auxiliary_slot_zeroes_the_loss() {
    // Φ_ζ replaced by the exact Φ: the full u enters residual and traces.
    let p = problems::example_edge_3d();
    let s = samples(&p, 1500, 300, 4);
    let lb = candidate_breakdown(&p, &s, sigma(), |x| p.exact_u(x).unwrap(), |x| p.exact_u(x).unwrap()).unwrap();
    assert!(lb.total <= 1e-6 * 201.0);
}

fn fd_check<O: Objective>(obj: &O, x: &[f64], coords: &[usize], label: &str) {
    let mut g = vec![0.0; x.len()];
    obj.evaluate(x, Some(&mut g)).unwrap();
    for &i in coords {
        let h = 1e-5 * x[i].abs().max(1.0);
        let mut xp = x.to_vec();
        xp[i] += h;
        let fp = obj.evaluate(&xp, None).unwrap().total;
        xp[i] -= 2.0 * h;
        let fm = obj.evaluate(&xp, None).unwrap().total;
        let fd = (fp - fm) / (2.0 * h);
        let scale = g[i].abs().max(fd.abs()).max(1e-6);
        assert!((g[i] - fd).abs() / scale < 1e-5, "{label} coord {i}: {} vs {fd}", g[i]);
    }
}

#[test]
fn gradients_match_finite_differences() {
    let p = problems::example_mixed_bc();
    let s = samples(&p, 150, 60, 1);
    let arch = MlpArch::new(vec![2, 6, 5, 1]).unwrap();
    let obj = CollocationObjective::new(&p, &s, arch.clone(), Enrichment::Scalar, sigma()).unwrap();
    let x = obj.initial_point(2, 0.5);
    fd_check(&obj, &x, &[0, 3, 13, 20, 40, arch.n_params() - 1, arch.n_params()], "mixed_bc");

    let p = problems::helmholtz_3d();
    let s = samples(&p, 150, 60, 1);
    let arch = MlpArch::new(vec![3, 5, 4, 1]).unwrap();
    let obj = CollocationObjective::new(&p, &s, arch.clone(), Enrichment::Series { n: 2 }, sigma()).unwrap();
    let x = obj.initial_point(2, 0.5);
    let n = arch.n_params();
    fd_check(&obj, &x, &[1, 7, 22, n - 2, n + 1, n + 2], "helmholtz3d");

    for input in [AuxInput::Polar, AuxInput::Cartesian] {
        let p = problems::example_four_edges_3d();
        let s = samples(&p, 200, 150, 1);
        let arch = MlpArch::new(vec![3, 5, 4, 1]).unwrap();
        let d_in = if input == AuxInput::Polar { 2 } else { 3 };
        let aa = MlpArch::new(vec![d_in, 4, 3, 1]).unwrap();
        let obj = CollocationObjective::new(
            &p,
            &s,
            arch.clone(),
            Enrichment::AuxNets { archs: vec![aa.clone(); 4], input },
            sigma(),
        )
        .unwrap();
        let x = obj.initial_point(5, 1.0);
        let n = arch.n_params();
        let m = aa.n_params();
        fd_check(&obj, &x, &[0, n - 1, n, n + 5, n + m + 2, n + 3 * m + m - 1], "aux");
    }
}

#[test]
fn penalty_enters_affinely() {
    let p = problems::example_mixed_bc();
    let s = samples(&p, 200, 80, 6);
    let arch = MlpArch::new(vec![2, 5, 1]).unwrap();
    let mut obj = CollocationObjective::new(&p, &s, arch, Enrichment::Scalar, sigma()).unwrap();
    let x = obj.initial_point(1, 1.0);
    let a = obj.evaluate(&x, None).unwrap();
    let sig = PenaltyWeights::new(3.5, 70.0).unwrap();
    obj.set_penalty(sig);
    let b = obj.evaluate(&x, None).unwrap();
    assert_eq!(a.interior, b.interior);
    assert_eq!(a.dirichlet, b.dirichlet);
    let expected = b.interior + 3.5 * b.dirichlet + 70.0 * b.neumann;
    assert!(rel(b.total, expected) < 1e-15);
}

#[test]
fn sample_order_and_thread_count_do_not_matter() {
    let p = problems::example_lshape_2d();
    let s = samples(&p, 1000, 200, 12);
    let arch = MlpArch::new(vec![2, 8, 8, 1]).unwrap();
    let obj = CollocationObjective::new(&p, &s, arch.clone(), Enrichment::Scalar, sigma()).unwrap();
    let x = obj.initial_point(3, 1.0);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let mut g = vec![0.0; x.len()];
            let lb = obj.evaluate(&x, Some(&mut g)).unwrap();
            (lb, g)
        })
    };
    let (a, ga) = run(1);
    let (b, gb) = run(4);
    assert_eq!(a.total.to_bits(), b.total.to_bits());
    assert!(ga.iter().zip(&gb).all(|(u, v)| u.to_bits() == v.to_bits()));

    let mut shuffled = s.clone();
    shuffled.interior.reverse();
    shuffled.dirichlet.rotate_left(17);
    let obj2 = CollocationObjective::new(&p, &shuffled, arch, Enrichment::Scalar, sigma()).unwrap();
    let c = obj2.evaluate(&x, None).unwrap();
    assert!(rel(a.total, c.total) < 1e-12);
}

#[test]
fn rayleigh_quotient_of_the_analytic_eigenfunction() {
    let p = problems::eigen_lshape();
    let pts = p.domain.sample_interior(100_000, 99).unwrap();
    let u = |q: Point| {
        let [x, y, _] = Jet::<3>::point(q);
        (x * PI).sin() * (y * PI).sin()
    };
    let est = rayleigh_quotient_of(u, &pts).unwrap();
    // Standard error of the ratio estimator by the delta method.
    let (mut sa, mut sb) = (0.0, 0.0);
    let vals: Vec<(f64, f64)> = pts
        .iter()
        .map(|&q| {
            let j = u(q);
            (j.grad_norm_sq(), j.value * j.value)
        })
        .collect();
    for (a, b) in &vals {
        sa += a;
        sb += b;
    }
    let r = sa / sb;
    let var: f64 = vals.iter().map(|(a, b)| (a - r * b).powi(2)).sum::<f64>();
    let se = var.sqrt() / sb;
    assert!((est - 2.0 * PI * PI).abs() <= 3.0 * se, "{est} vs {} (se {se})", 2.0 * PI * PI);

    let scaled = rayleigh_quotient_of(|q| u(q) * 5.0, &pts).unwrap();
    assert!(rel(scaled, est) < 1e-12);
    assert!(matches!(
        rayleigh_quotient_of(|_| Jet::constant(0.0), &pts),
        Err(sepinn::Error::DegenerateCandidate(_))
    ));
}

#[test]
fn rayleigh_quotient_of_the_bare_enrichment_matches_grid_quadrature() {
    let p = problems::eigen_lshape();
    let arch = MlpArch::new(vec![2, 5, 1]).unwrap();
    let pts = p.domain.sample_interior(2_000_000, 5).unwrap();
    let est = rayleigh_quotient(&MlpParams::zeros(&arch), 1.0, &p.terms, &pts).unwrap();
    assert!(est.is_finite() && est > 0.0);
    // Midpoint rule over the support square of the cutoff.
    let m = 1200;
    let h = 1.0 / m as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..m {
        for j in 0..m {
            let x = -0.5 + (i as f64 + 0.5) * h;
            let y = -0.5 + (j as f64 + 0.5) * h;
            if x > 0.0 && y < 0.0 {
                continue;
            }
            let psi = p.terms[0].eval([x, y]);
            num += psi.grad[0] * psi.grad[0] + psi.grad[1] * psi.grad[1];
            den += psi.value * psi.value;
        }
    }
    let grid = num / den;
    assert!(rel(est, grid) < 0.01, "{est} vs {grid}");
}

fn eigen_setup(enriched: bool) -> (ProblemSpec, SampleSet, EigenObjective) {
    let p = problems::eigen_lshape();
    let s = samples(&p, 400, 120, 3);
    let arch = MlpArch::new(vec![2, 6, 6, 1]).unwrap();
    let mut obj = EigenObjective::new(&p, &s, arch, enriched, 50.0, EigenWeights::default()).unwrap();
    obj.set_mu([9.0, 15.0]);
    (p, s, obj)
}

#[test]
fn eigen_loss_components_match_pointwise_route() {
    let (p, s, obj) = eigen_setup(true);
    let mut x = obj.initial_point(8, 0.4);
    let n = obj.arch().n_params();
    x[2 * n + 1] = -0.25;
    let lb = obj.evaluate(&x, None).unwrap();
    let nets = [
        MlpParams::from_flat(obj.arch(), x[..n].to_vec()).unwrap(),
        MlpParams::from_flat(obj.arch(), x[n..2 * n].to_vec()).unwrap(),
    ];
    let gam = [x[2 * n], x[2 * n + 1]];
    let c = s.measures.volume / s.interior.len() as f64;
    let mu = [9.0, 15.0];
    let (mut res, mut mass, mut energy, mut overlap) = (0.0, [0.0; 2], [0.0; 2], 0.0);
    for &q in &s.interior {
        let psi = lift(p.terms[0].eval([q[0], q[1]]));
        let u: Vec<Jet<3>> = (0..2).map(|i| net_jet(&nets[i], q) + psi * gam[i]).collect();
        for i in 0..2 {
            res += c * (u[i].lap + mu[i] * u[i].value).powi(2);
            mass[i] += c * u[i].value * u[i].value;
            energy[i] += c * u[i].grad_norm_sq();
        }
        overlap += c * u[0].value * u[1].value;
    }
    let w = EigenWeights::default();
    assert!(rel(lb.interior, res) < 1e-11);
    assert!(rel(lb.normalization, w.alpha * ((mass[0] - 1.0).abs() + (mass[1] - 1.0).abs())) < 1e-10);
    assert!(rel(lb.orthogonality, w.beta * overlap.abs()) < 1e-10);
    assert!(rel(lb.rayleigh, w.nu[0] * energy[0] / mass[0] + w.nu[1] * energy[1] / mass[1]) < 1e-11);
    let ray = obj.rayleigh(&x).unwrap();
    assert!(rel(ray[0], energy[0] / mass[0]) < 1e-11);
    let single = rayleigh_quotient(&nets[1], gam[1], &p.terms, &s.interior).unwrap();
    assert!(rel(single, ray[1]) < 1e-11);
}

#[test]
fn eigen_constraints_on_identical_candidates() {
    let (_, _, obj) = eigen_setup(false);
    let mut x = obj.initial_point(8, 0.0);
    let n = obj.arch().n_params();
    let first = x[..n].to_vec();
    x[n..2 * n].copy_from_slice(&first);
    let lb = obj.evaluate(&x, None).unwrap();
    let m = obj.masses(&x).unwrap();
    assert_eq!(m[0], m[1]);
    assert!(rel(lb.orthogonality, 135.0 * m[0]) < 1e-12);

    // Rescale both candidates to unit norm: normalization penalty vanishes.
    let arch = obj.arch().clone();
    let last = arch.n_layers();
    let s = 1.0 / m[0].sqrt();
    for i in 0..2 {
        for v in &mut x[i * n + arch.weight_offset(last)..(i + 1) * n] {
            *v *= s;
        }
    }
    let lb = obj.evaluate(&x, None).unwrap();
    assert!(lb.normalization < 1e-12, "{lb:?}");
    assert!(EigenObjective::new(
        &problems::eigen_lshape(),
        &samples(&problems::eigen_lshape(), 10, 10, 1),
        arch,
        true,
        1.0,
        EigenWeights { alpha: -1.0, ..EigenWeights::default() }
    )
    .is_err());
}

#[test]
fn eigen_gradient_matches_finite_differences() {
    let (_, _, obj) = eigen_setup(true);
    let mut x = obj.initial_point(8, 0.4);
    let n = obj.arch().n_params();
    x[2 * n + 1] = -0.25;
    fd_check(&obj, &x, &[0, 5, 30, n - 1, n, n + 17, 2 * n - 1, 2 * n, 2 * n + 1], "eigen");
}

#[test]
fn scale_invariant_eigen_loss() {
    let (_, _, mut obj) = eigen_setup(true);
    let mut x = obj.initial_point(8, 0.4);
    let n = obj.arch().n_params();
    x[2 * n + 1] = -0.25;
    normalize_candidates(&obj, &mut x).unwrap();
    let raw = obj.evaluate(&x, None).unwrap();
    obj.set_scale_invariant(true);
    let inv = obj.evaluate(&x, None).unwrap();
    // Identical on the unit sphere.
    assert!(raw.normalization < 1e-9);
    assert!(rel(raw.total, inv.total) < 1e-9, "{raw:?} {inv:?}");

    // Off the sphere nothing sees the scale.
    let arch = obj.arch().clone();
    let wo = arch.weight_offset(arch.n_layers());
    let scaled = |k: f64| {
        let mut y = x.clone();
        for i in 0..2 {
            for v in &mut y[i * n + wo..(i + 1) * n] {
                *v *= k;
            }
            y[2 * n + i] *= k;
        }
        y
    };
    fd_check(&obj, &scaled(1.1), &[0, 5, 30, n - 1, n, n + 17, 2 * n - 1, 2 * n, 2 * n + 1], "scale-invariant eigen");
    let small = obj.evaluate(&scaled(0.5), None).unwrap();
    for (a, b) in [
        (inv.interior, small.interior),
        (inv.dirichlet, small.dirichlet),
        (inv.orthogonality, small.orthogonality),
        (inv.rayleigh, small.rayleigh),
        (inv.total, small.total),
    ] {
        assert!(rel(a, b) < 1e-10, "{a} {b}");
    }
    assert_eq!(small.normalization, 0.0);
}
