//! Empirical collocation losses and their gradients.
//!
//! Trainable state is one flat vector `[w net | auxiliary nets | coefficients]`.
//! Samples are split into fixed chunks of `CHUNK` points; chunk partials are
//! reduced in chunk order, so results do not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::enrichment::{SingularTerm, ZBasis};
use crate::error::{Error, Result};
use crate::geometry::{BoundaryPoint, Point, SampleSet};
use crate::jet::Jet;
use crate::network::{MlpArch, MlpParams, Order, Tape, BLOCK};
use crate::optimize::Objective;
use crate::problems::{EquationKind, ProblemSpec};
use crate::rng::{substream, Stream};

const CHUNK: usize = 4 * BLOCK;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyWeights {
    pub dirichlet: f64,
    pub neumann: f64,
}

impl PenaltyWeights {
    pub fn new(dirichlet: f64, neumann: f64) -> Result<Self> {
        if !(dirichlet > 0.0 && dirichlet.is_finite()) {
            return Err(Error::Parameter(format!("Dirichlet penalty must be positive, got {dirichlet}")));
        }
        if !(neumann >= 0.0 && neumann.is_finite()) {
            return Err(Error::Parameter(format!("Neumann penalty must be nonnegative, got {neumann}")));
        }
        Ok(Self { dirichlet, neumann })
    }

    pub fn uniform(sigma: f64) -> Result<Self> {
        Self::new(sigma, sigma)
    }

    pub fn scaled(self, q: f64) -> Self {
        Self {
            dirichlet: self.dirichlet * q,
            neumann: self.neumann * q,
        }
    }
}

/// Loss components. Boundary components are stored without their penalty
/// weight; eigen constraint terms are stored with their weights applied.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub interior: f64,
    pub dirichlet: f64,
    pub neumann: f64,
    pub normalization: f64,
    pub orthogonality: f64,
    pub rayleigh: f64,
    pub total: f64,
}

impl LossBreakdown {
    /// A loss with no structure, for generic objectives.
    pub fn scalar(v: f64) -> Self {
        Self {
            interior: v,
            total: v,
            ..Self::default()
        }
    }

    pub fn weighted_total(&self, sigma: PenaltyWeights) -> f64 {
        self.interior
            + sigma.dirichlet * self.dirichlet
            + sigma.neumann * self.neumann
            + self.normalization
            + self.orthogonality
            + self.rayleigh
    }
}

/// How a flat state vector splits into networks and coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct StateLayout {
    pub w_arch: MlpArch,
    pub aux_archs: Vec<MlpArch>,
    pub aux_input: AuxInput,
    /// Term index of every coefficient, in state order.
    pub coeff_terms: Vec<usize>,
    pub n_terms: usize,
}

impl StateLayout {
    pub fn dim(&self) -> usize {
        self.coeff_offset() + self.coeff_terms.len()
    }

    pub fn coeff_offset(&self) -> usize {
        self.w_arch.n_params() + self.aux_archs.iter().map(MlpArch::n_params).sum::<usize>()
    }

    pub fn coeffs_per_term(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new(); self.n_terms];
        for (&t, &c) in self.coeff_terms.iter().zip(&x[self.coeff_offset()..]) {
            out[t].push(c);
        }
        out
    }

    /// The regular network, the auxiliary networks and the coefficients.
    pub fn split(&self, x: &[f64]) -> Result<(MlpParams, Vec<MlpParams>, Vec<f64>)> {
        if x.len() != self.dim() {
            return Err(Error::Parameter(format!("state has {} entries, layout needs {}", x.len(), self.dim())));
        }
        let mut off = self.w_arch.n_params();
        let w = MlpParams::from_flat(&self.w_arch, x[..off].to_vec())?;
        let mut aux = Vec::new();
        for a in &self.aux_archs {
            aux.push(MlpParams::from_flat(a, x[off..off + a.n_params()].to_vec())?);
            off += a.n_params();
        }
        Ok((w, aux, x[off..].to_vec()))
    }
}

/// How the auxiliary networks of the edge variant see a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxInput {
    /// Local cylindrical coordinates `(r, z)` around the edge.
    #[default]
    Polar,
    /// Global `(x, y, z)`.
    Cartesian,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Enrichment {
    /// Plain network, no singular part.
    None,
    /// One scalar coefficient per term.
    Scalar,
    /// Edge expansion truncated after mode `n` (coefficients `γ_0..γ_n` per term).
    Series { n: usize },
    /// One network `Φ_j` per term multiplying `η s`.
    AuxNets { archs: Vec<MlpArch>, input: AuxInput },
}

#[derive(Debug, Clone, Copy)]
enum Basis {
    Plane { term: usize },
    Mode { term: usize, n: usize },
}

#[derive(Debug, Clone, Copy)]
struct AuxSample {
    input: Point,
    p: Jet<2>,
    e_r: [f64; 2],
    inv_r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Part {
    Interior,
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Copy)]
struct Work {
    part: Part,
    start: usize,
    end: usize,
}

fn plan(n_int: usize, n_d: usize, n_n: usize) -> Vec<Work> {
    let mut out = Vec::new();
    for (part, n) in [(Part::Interior, n_int), (Part::Dirichlet, n_d), (Part::Neumann, n_n)] {
        let mut s = 0;
        while s < n {
            let e = (s + CHUNK).min(n);
            out.push(Work { part, start: s, end: e });
            s = e;
        }
    }
    out
}

/// Runs `f` over items with per-worker scratch, preserving item order.
fn run_ordered<T, S, I, F>(items: &[Work], init: I, f: F) -> Result<Vec<T>>
where
    T: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, &Work) -> Result<T> + Sync + Send,
{
    if rayon::current_num_threads() <= 1 {
        let mut s = init();
        items.iter().map(|w| f(&mut s, w)).collect()
    } else {
        items.par_iter().map_init(&init, |s, w| f(s, w)).collect()
    }
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

fn lift(j: Jet<2>) -> Jet<3> {
    Jet {
        value: j.value,
        grad: [j.grad[0], j.grad[1], 0.0],
        lap: j.lap,
    }
}

fn check_domain(problem: &ProblemSpec, samples: &SampleSet) -> Result<()> {
    if samples.domain_name != problem.domain.name {
        return Err(Error::Config(format!(
            "samples drawn on '{}' but problem '{}' lives on '{}'",
            samples.domain_name, problem.name, problem.domain.name
        )));
    }
    Ok(())
}

fn check_penalty(samples: &SampleSet, sigma: PenaltyWeights) -> Result<()> {
    if samples.dirichlet.is_empty() {
        return Err(Error::Config("no Dirichlet boundary samples".into()));
    }
    if samples.measures.neumann > 0.0 && (samples.neumann.is_empty() || sigma.neumann == 0.0) {
        return Err(Error::Config(
            "Neumann boundary present: needs samples and a positive penalty".into(),
        ));
    }
    Ok(())
}

fn weight(measure: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        measure / n as f64
    }
}

/// Collocation loss of `-Δu + A²u = f` with `u = w + enrichment`.
#[derive(Debug, Clone)]
pub struct CollocationObjective {
    a2: f64,
    sigma: PenaltyWeights,
    dim: usize,
    w_arch: MlpArch,
    aux_archs: Vec<MlpArch>,
    aux_input: AuxInput,
    aux_offsets: Vec<usize>,
    coeff_offset: usize,
    basis: Vec<Basis>,
    inert: Vec<bool>,
    n_terms: usize,
    interior: Vec<Point>,
    dirichlet: Vec<BoundaryPoint>,
    neumann: Vec<BoundaryPoint>,
    c_int: f64,
    c_dir: f64,
    c_neu: f64,
    f: Vec<f64>,
    g: Vec<f64>,
    /// `Δψ_k - A²ψ_k`, sample-major.
    lin: Vec<f64>,
    /// Per term: interior, Dirichlet, Neumann auxiliary samples.
    aux: Vec<[Vec<AuxSample>; 3]>,
    work: Vec<Work>,
}

struct Scratch {
    w: [Tape; 3],
    aux: Vec<[Tape; 3]>,
    inputs: Vec<Point>,
}

fn part_index(p: Part) -> usize {
    match p {
        Part::Interior => 0,
        Part::Dirichlet => 1,
        Part::Neumann => 2,
    }
}

fn tapes(arch: &MlpArch) -> [Tape; 3] {
    [
        Tape::new(arch, Order::Laplacian),
        Tape::new(arch, Order::Value),
        Tape::new(arch, Order::Gradient),
    ]
}

impl CollocationObjective {
    pub fn new(
        problem: &ProblemSpec,
        samples: &SampleSet,
        w_arch: MlpArch,
        enrichment: Enrichment,
        sigma: PenaltyWeights,
    ) -> Result<Self> {
        check_domain(problem, samples)?;
        check_penalty(samples, sigma)?;
        if problem.kind == EquationKind::Eigenvalue {
            return Err(Error::Config("eigenvalue problems use EigenObjective".into()));
        }
        let dim_in = problem.dim();
        if w_arch.input_dim() != dim_in {
            return Err(Error::Config(format!(
                "network input width {} does not match problem dimension {dim_in}",
                w_arch.input_dim()
            )));
        }
        let a2 = problem.a_squared();
        let terms = &problem.terms;
        let mut basis = Vec::new();
        let mut inert = Vec::new();
        let (mut aux_archs, mut aux_input) = (Vec::new(), AuxInput::Polar);
        match &enrichment {
            Enrichment::None => {}
            Enrichment::Scalar => {
                if dim_in != 2 {
                    return Err(Error::Config("scalar enrichment needs a 2D problem".into()));
                }
                for t in 0..terms.len() {
                    basis.push(Basis::Plane { term: t });
                    inert.push(false);
                }
            }
            Enrichment::Series { n } => {
                let zb = problem
                    .zbasis
                    .ok_or_else(|| Error::Config("series enrichment needs a 3D problem".into()))?;
                for t in 0..terms.len() {
                    for k in 0..=*n {
                        basis.push(Basis::Mode { term: t, n: k });
                        inert.push(k == 0 && zb.zero_mode_vanishes());
                    }
                }
            }
            Enrichment::AuxNets { archs, input } => {
                if dim_in != 3 {
                    return Err(Error::Config("auxiliary networks need a 3D problem".into()));
                }
                if archs.len() != terms.len() {
                    return Err(Error::Config(format!(
                        "{} auxiliary networks for {} singular terms",
                        archs.len(),
                        terms.len()
                    )));
                }
                let want = match input {
                    AuxInput::Polar => 2,
                    AuxInput::Cartesian => 3,
                };
                if archs.iter().any(|a| a.input_dim() != want) {
                    return Err(Error::Config(format!("auxiliary networks must take {want} inputs")));
                }
                aux_archs = archs.clone();
                aux_input = *input;
            }
        }

        let mut off = w_arch.n_params();
        let mut aux_offsets = Vec::new();
        for a in &aux_archs {
            aux_offsets.push(off);
            off += a.n_params();
        }
        let coeff_offset = off;
        let dim = off + basis.len();

        let f: Vec<f64> = samples.interior.iter().map(|&p| problem.source(p)).collect();
        let g: Vec<f64> = samples.dirichlet.iter().map(|b| problem.dirichlet_data(b.point)).collect();
        let k = basis.len();
        let mut lin = vec![0.0; samples.interior.len() * k];
        for (i, &p) in samples.interior.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let psi = eval_basis(terms, problem.zbasis.as_ref(), *b, p);
                lin[i * k + j] = psi.lap - a2 * psi.value;
            }
        }
        let aux = if aux_archs.is_empty() {
            Vec::new()
        } else {
            terms
                .iter()
                .map(|t| {
                    let mk = |p: Point| aux_sample(t, aux_input, p);
                    [
                        samples.interior.iter().map(|&p| mk(p)).collect(),
                        samples.dirichlet.iter().map(|b| mk(b.point)).collect(),
                        samples.neumann.iter().map(|b| mk(b.point)).collect(),
                    ]
                })
                .collect()
        };
        let m = samples.measures;
        Ok(Self {
            a2,
            sigma,
            dim,
            w_arch,
            aux_archs,
            aux_input,
            aux_offsets,
            coeff_offset,
            basis,
            inert,
            n_terms: terms.len(),
            c_int: weight(m.volume, samples.interior.len()),
            c_dir: weight(m.dirichlet, samples.dirichlet.len()),
            c_neu: weight(m.neumann, samples.neumann.len()),
            interior: samples.interior.clone(),
            dirichlet: samples.dirichlet.clone(),
            neumann: samples.neumann.clone(),
            f,
            g,
            lin,
            aux,
            work: plan(samples.interior.len(), samples.dirichlet.len(), samples.neumann.len()),
        })
    }

    pub fn penalty(&self) -> PenaltyWeights {
        self.sigma
    }

    pub fn set_penalty(&mut self, sigma: PenaltyWeights) {
        self.sigma = sigma;
    }

    pub fn w_arch(&self) -> &MlpArch {
        &self.w_arch
    }

    pub fn aux_archs(&self) -> &[MlpArch] {
        &self.aux_archs
    }

    /// Number of network parameters (the coefficients follow them).
    pub fn coeff_offset(&self) -> usize {
        self.coeff_offset
    }

    pub fn aux_input(&self) -> AuxInput {
        self.aux_input
    }

    pub fn layout(&self) -> StateLayout {
        StateLayout {
            w_arch: self.w_arch.clone(),
            aux_archs: self.aux_archs.clone(),
            aux_input: self.aux_input,
            coeff_terms: self
                .basis
                .iter()
                .map(|b| match *b {
                    Basis::Plane { term } | Basis::Mode { term, .. } => term,
                })
                .collect(),
            n_terms: self.n_terms,
        }
    }

    pub fn n_coeffs(&self) -> usize {
        self.basis.len()
    }

    /// Coefficients that multiply an identically zero basis function.
    pub fn inert_coeffs(&self) -> &[bool] {
        &self.inert
    }

    /// Coefficients grouped per term.
    pub fn coeffs_per_term(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new(); self.n_terms];
        for (b, c) in self.basis.iter().zip(&x[self.coeff_offset..]) {
            let t = match *b {
                Basis::Plane { term } | Basis::Mode { term, .. } => term,
            };
            out[t].push(*c);
        }
        out
    }

    pub fn coeff_labels(&self) -> Vec<String> {
        self.basis
            .iter()
            .map(|b| match *b {
                Basis::Plane { .. } if self.n_terms == 1 => "gamma".to_string(),
                Basis::Plane { term } => format!("gamma_{term}"),
                Basis::Mode { n, .. } if self.n_terms == 1 => format!("gamma_n{n}"),
                Basis::Mode { term, n } => format!("gamma_{term}_n{n}"),
            })
            .collect()
    }

    /// Network initialisation from `seed` and coefficients set to
    /// `gamma_init` (inert ones to zero).
    pub fn initial_point(&self, seed: u64, gamma_init: f64) -> Vec<f64> {
        let mut x = MlpParams::init_with(&self.w_arch, &mut substream(seed, Stream::Init, 0)).into_flat();
        for (j, a) in self.aux_archs.iter().enumerate() {
            x.extend(MlpParams::init_with(a, &mut substream(seed, Stream::Init, 1 + j as u64)).into_flat());
        }
        x.extend(self.inert.iter().map(|&z| if z { 0.0 } else { gamma_init }));
        x
    }

    fn unpack(&self, x: &[f64]) -> Result<(MlpParams, Vec<MlpParams>)> {
        if x.len() != self.dim {
            return Err(Error::Parameter(format!("state has length {}, expected {}", x.len(), self.dim)));
        }
        let w = MlpParams::from_flat(&self.w_arch, x[..self.w_arch.n_params()].to_vec())?;
        let aux = self
            .aux_archs
            .iter()
            .zip(&self.aux_offsets)
            .map(|(a, &o)| MlpParams::from_flat(a, x[o..o + a.n_params()].to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Ok((w, aux))
    }

    fn scratch(&self) -> Scratch {
        Scratch {
            w: tapes(&self.w_arch),
            aux: self.aux_archs.iter().map(tapes).collect(),
            inputs: Vec::with_capacity(BLOCK),
        }
    }

    fn chunk(
        &self,
        s: &mut Scratch,
        w: &MlpParams,
        aux: &[MlpParams],
        coeffs: &[f64],
        work: &Work,
        want_grad: bool,
    ) -> Result<(f64, Vec<f64>)> {
        let mut grad = if want_grad { vec![0.0; self.dim] } else { Vec::new() };
        let mut sum = 0.0;
        let pi = part_index(work.part);
        let k = self.basis.len();
        let mut start = work.start;
        while start < work.end {
            let end = (start + BLOCK).min(work.end);
            let n = end - start;
            s.inputs.clear();
            match work.part {
                Part::Interior => s.inputs.extend_from_slice(&self.interior[start..end]),
                Part::Dirichlet => s.inputs.extend(self.dirichlet[start..end].iter().map(|b| b.point)),
                Part::Neumann => s.inputs.extend(self.neumann[start..end].iter().map(|b| b.point)),
            }
            s.w[pi].forward(w, &s.inputs);
            for (j, net) in aux.iter().enumerate() {
                s.inputs.clear();
                s.inputs.extend(self.aux[j][pi][start..end].iter().map(|a| a.input));
                s.aux[j][pi].forward(net, &s.inputs);
            }
            if want_grad {
                s.w[pi].clear_seeds();
                for t in &mut s.aux {
                    t[pi].clear_seeds();
                }
            }
            for b in 0..n {
                let i = start + b;
                let wt = &s.w[pi];
                match work.part {
                    Part::Interior => {
                        let mut res = wt.lap(b) - self.a2 * wt.value(b) + self.f[i];
                        let row = &self.lin[i * k..(i + 1) * k];
                        for (c, l) in coeffs.iter().zip(row) {
                            res += c * l;
                        }
                        for (j, t) in s.aux.iter().enumerate() {
                            let a = &self.aux[j][0][i];
                            let tp = &t[0];
                            let (nv, nl) = (tp.value(b), tp.lap(b));
                            let lap_phi_p = match self.aux_input {
                                AuxInput::Polar => {
                                    let nr = tp.grad(0, b);
                                    let erdp = a.e_r[0] * a.p.grad[0] + a.e_r[1] * a.p.grad[1];
                                    nv * a.p.lap + 2.0 * nr * erdp + a.p.value * (nl + nr * a.inv_r)
                                }
                                AuxInput::Cartesian => {
                                    nv * a.p.lap
                                        + 2.0 * (tp.grad(0, b) * a.p.grad[0] + tp.grad(1, b) * a.p.grad[1])
                                        + a.p.value * nl
                                }
                            };
                            res += lap_phi_p - self.a2 * nv * a.p.value;
                        }
                        if !res.is_finite() {
                            return Err(Error::NonFinite { index: i, what: "interior residual".into() });
                        }
                        sum += self.c_int * res * res;
                        if want_grad {
                            let rb = 2.0 * self.c_int * res;
                            *s.w[0].seed_lap(b) = rb;
                            *s.w[0].seed_value(b) = -self.a2 * rb;
                            for (gk, l) in grad[self.coeff_offset..].iter_mut().zip(row) {
                                *gk += rb * l;
                            }
                            for (j, t) in s.aux.iter_mut().enumerate() {
                                let a = &self.aux[j][0][i];
                                let tp = &mut t[0];
                                *tp.seed_value(b) = rb * (a.p.lap - self.a2 * a.p.value);
                                *tp.seed_lap(b) = rb * a.p.value;
                                match self.aux_input {
                                    AuxInput::Polar => {
                                        let erdp = a.e_r[0] * a.p.grad[0] + a.e_r[1] * a.p.grad[1];
                                        *tp.seed_grad(0, b) = rb * (2.0 * erdp + a.p.value * a.inv_r);
                                    }
                                    AuxInput::Cartesian => {
                                        *tp.seed_grad(0, b) = 2.0 * rb * a.p.grad[0];
                                        *tp.seed_grad(1, b) = 2.0 * rb * a.p.grad[1];
                                    }
                                }
                            }
                        }
                    }
                    Part::Dirichlet => {
                        let mut v = wt.value(b) - self.g[i];
                        for (j, t) in s.aux.iter().enumerate() {
                            v += t[1].value(b) * self.aux[j][1][i].p.value;
                        }
                        if !v.is_finite() {
                            return Err(Error::NonFinite { index: i, what: "Dirichlet trace".into() });
                        }
                        sum += self.c_dir * v * v;
                        if want_grad {
                            let vb = 2.0 * self.sigma.dirichlet * self.c_dir * v;
                            *s.w[1].seed_value(b) = vb;
                            for (j, t) in s.aux.iter_mut().enumerate() {
                                *t[1].seed_value(b) = vb * self.aux[j][1][i].p.value;
                            }
                        }
                    }
                    Part::Neumann => {
                        let nrm = self.neumann[i].normal;
                        let d = self.w_arch.input_dim();
                        let mut q: f64 = (0..d).map(|c| wt.grad(c, b) * nrm[c]).sum();
                        for (j, t) in s.aux.iter().enumerate() {
                            let a = &self.aux[j][2][i];
                            let tp = &t[2];
                            let dpn = a.p.grad[0] * nrm[0] + a.p.grad[1] * nrm[1];
                            let dphin = match self.aux_input {
                                AuxInput::Polar => tp.grad(0, b) * (a.e_r[0] * nrm[0] + a.e_r[1] * nrm[1]) + tp.grad(1, b) * nrm[2],
                                AuxInput::Cartesian => (0..3).map(|c| tp.grad(c, b) * nrm[c]).sum(),
                            };
                            q += dphin * a.p.value + tp.value(b) * dpn;
                        }
                        if !q.is_finite() {
                            return Err(Error::NonFinite { index: i, what: "Neumann trace".into() });
                        }
                        sum += self.c_neu * q * q;
                        if want_grad {
                            let qb = 2.0 * self.sigma.neumann * self.c_neu * q;
                            for c in 0..d {
                                *s.w[2].seed_grad(c, b) = qb * nrm[c];
                            }
                            for (j, t) in s.aux.iter_mut().enumerate() {
                                let a = &self.aux[j][2][i];
                                let tp = &mut t[2];
                                *tp.seed_value(b) = qb * (a.p.grad[0] * nrm[0] + a.p.grad[1] * nrm[1]);
                                match self.aux_input {
                                    AuxInput::Polar => {
                                        *tp.seed_grad(0, b) = qb * a.p.value * (a.e_r[0] * nrm[0] + a.e_r[1] * nrm[1]);
                                        *tp.seed_grad(1, b) = qb * a.p.value * nrm[2];
                                    }
                                    AuxInput::Cartesian => {
                                        for c in 0..3 {
                                            *tp.seed_grad(c, b) = qb * a.p.value * nrm[c];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            if want_grad {
                let nw = self.w_arch.n_params();
                s.w[pi].backward(w, &mut grad[..nw]);
                for (j, net) in aux.iter().enumerate() {
                    let o = self.aux_offsets[j];
                    s.aux[j][pi].backward(net, &mut grad[o..o + net.arch().n_params()]);
                }
            }
            start = end;
        }
        Ok((sum, grad))
    }

    fn eval_impl(&self, x: &[f64], grad: Option<&mut [f64]>) -> Result<LossBreakdown> {
        let (w, aux) = self.unpack(x)?;
        let coeffs = &x[self.coeff_offset..];
        let want = grad.is_some();
        let outs = run_ordered(&self.work, || self.scratch(), |s, wk| {
            self.chunk(s, &w, &aux, coeffs, wk, want)
        })?;
        let mut sums = [0.0; 3];
        for (wk, (v, _)) in self.work.iter().zip(&outs) {
            sums[part_index(wk.part)] += v;
        }
        if let Some(g) = grad {
            g.fill(0.0);
            for (_, cg) in &outs {
                add_into(g, cg);
            }
            for (gk, &z) in g[self.coeff_offset..].iter_mut().zip(&self.inert) {
                if z {
                    *gk = 0.0;
                }
            }
        }
        let mut lb = LossBreakdown {
            interior: sums[0],
            dirichlet: sums[1],
            neumann: sums[2],
            ..LossBreakdown::default()
        };
        lb.total = lb.weighted_total(self.sigma);
        if !lb.total.is_finite() {
            return Err(Error::NonFinite { index: 0, what: "total loss".into() });
        }
        Ok(lb)
    }
}

impl Objective for CollocationObjective {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, x: &[f64], grad: Option<&mut [f64]>) -> Result<LossBreakdown> {
        self.eval_impl(x, grad)
    }
}

fn eval_basis(terms: &[SingularTerm], zb: Option<&ZBasis>, b: Basis, p: Point) -> Jet<3> {
    match b {
        Basis::Plane { term } => lift(terms[term].eval([p[0], p[1]])),
        Basis::Mode { term, n } => terms[term].eval_mode(zb.expect("series basis needs z basis"), n, p),
    }
}

fn aux_sample(term: &SingularTerm, input: AuxInput, p: Point) -> AuxSample {
    let (r, theta) = term.local_polar([p[0], p[1]]);
    AuxSample {
        input: match input {
            AuxInput::Polar => [r, p[2], 0.0],
            AuxInput::Cartesian => p,
        },
        p: term.eval([p[0], p[1]]),
        e_r: term.frame.radial_direction(theta),
        inv_r: 1.0 / r.max(1e-12),
    }
}

/// Residual of a closed-form candidate `u` at `p`: `Δu - A²u + f`.
pub fn candidate_residual(problem: &ProblemSpec, u: &Jet<3>, p: Point) -> f64 {
    u.lap - problem.a_squared() * u.value + problem.source(p)
}

/// Loss of a candidate given in closed form: `full` enters the interior
/// residual, `trace` is the part penalized on the boundary.
pub fn candidate_breakdown<F, T>(
    problem: &ProblemSpec,
    samples: &SampleSet,
    sigma: PenaltyWeights,
    full: F,
    trace: T,
) -> Result<LossBreakdown>
where
    F: Fn(Point) -> Jet<3>,
    T: Fn(Point) -> Jet<3>,
{
    check_domain(problem, samples)?;
    let m = samples.measures;
    let c_int = weight(m.volume, samples.interior.len());
    let c_dir = weight(m.dirichlet, samples.dirichlet.len());
    let c_neu = weight(m.neumann, samples.neumann.len());
    let mut lb = LossBreakdown::default();
    for &p in &samples.interior {
        let r = candidate_residual(problem, &full(p), p);
        lb.interior += c_int * r * r;
    }
    for b in &samples.dirichlet {
        let v = trace(b.point).value - problem.dirichlet_data(b.point);
        lb.dirichlet += c_dir * v * v;
    }
    for b in &samples.neumann {
        let t = trace(b.point);
        let q: f64 = (0..3).map(|c| t.grad[c] * b.normal[c]).sum();
        lb.neumann += c_neu * q * q;
    }
    lb.total = lb.weighted_total(sigma);
    Ok(lb)
}

fn objective_for(
    problem: &ProblemSpec,
    samples: &SampleSet,
    params: &MlpParams,
    enrichment: Enrichment,
    sigma: PenaltyWeights,
) -> Result<CollocationObjective> {
    CollocationObjective::new(problem, samples, params.arch().clone(), enrichment, sigma)
}

/// Loss of `w_θ + Σ γ_t η s_t` on a 2D problem.
pub fn sepinn_loss_2d(
    params: &MlpParams,
    gamma: &[f64],
    samples: &SampleSet,
    problem: &ProblemSpec,
    sigma: PenaltyWeights,
) -> Result<LossBreakdown> {
    let obj = objective_for(problem, samples, params, Enrichment::Scalar, sigma)?;
    if gamma.len() != obj.n_coeffs() {
        return Err(Error::Parameter(format!("{} coefficients for {} terms", gamma.len(), obj.n_coeffs())));
    }
    let mut x = params.flat().to_vec();
    x.extend_from_slice(gamma);
    obj.evaluate(&x, None)
}

/// Loss of the plain network, no enrichment.
pub fn plain_pinn_loss(
    params: &MlpParams,
    samples: &SampleSet,
    problem: &ProblemSpec,
    sigma: PenaltyWeights,
) -> Result<LossBreakdown> {
    objective_for(problem, samples, params, Enrichment::None, sigma)?.evaluate(params.flat(), None)
}

/// Loss with the edge expansion truncated after `gamma[t].len() - 1` modes.
pub fn sepinn_c_loss_3d(
    params: &MlpParams,
    gamma: &[Vec<f64>],
    samples: &SampleSet,
    problem: &ProblemSpec,
    sigma: PenaltyWeights,
) -> Result<LossBreakdown> {
    let n = gamma.first().map_or(0, |g| g.len().saturating_sub(1));
    if gamma.len() != problem.terms.len() || gamma.iter().any(|g| g.len() != n + 1) {
        return Err(Error::Parameter("one coefficient series of equal length per term".into()));
    }
    let obj = objective_for(problem, samples, params, Enrichment::Series { n }, sigma)?;
    let mut x = params.flat().to_vec();
    for g in gamma {
        x.extend_from_slice(g);
    }
    obj.evaluate(&x, None)
}

/// Loss with one auxiliary network per edge.
pub fn sepinn_n_loss_3d(
    params_w: &MlpParams,
    params_phi: &[MlpParams],
    input: AuxInput,
    samples: &SampleSet,
    problem: &ProblemSpec,
    sigma: PenaltyWeights,
) -> Result<LossBreakdown> {
    let archs = params_phi.iter().map(|p| p.arch().clone()).collect();
    let obj = objective_for(problem, samples, params_w, Enrichment::AuxNets { archs, input }, sigma)?;
    let mut x = params_w.flat().to_vec();
    for p in params_phi {
        x.extend_from_slice(p.flat());
    }
    obj.evaluate(&x, None)
}

/// Hyper-parameters of the eigenvalue loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenWeights {
    pub alpha: f64,
    pub beta: f64,
    pub nu: [f64; 2],
}

impl Default for EigenWeights {
    fn default() -> Self {
        Self {
            alpha: 100.0,
            beta: 135.0,
            nu: [0.02, 0.01],
        }
    }
}

impl EigenWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.nu.iter().all(|v| *v >= 0.0)) {
            return Err(Error::Config(format!("eigen weights must be nonnegative: {self:?}")));
        }
        Ok(())
    }
}

/// Monte Carlo aggregates of one candidate.
#[derive(Debug, Clone, Copy, Default)]
struct Aggregates {
    residual: [f64; 2],
    mass: [f64; 2],
    energy: [f64; 2],
    overlap: f64,
    boundary: [f64; 2],
}

impl Aggregates {
    fn add(&mut self, o: &Aggregates) {
        for i in 0..2 {
            self.residual[i] += o.residual[i];
            self.mass[i] += o.mass[i];
            self.energy[i] += o.energy[i];
            self.boundary[i] += o.boundary[i];
        }
        self.overlap += o.overlap;
    }
}

/// Two-candidate Dirichlet eigenvalue loss. State layout
/// `[θ_1 | θ_2 | γ_1 | γ_2]`, with `u_i = w_i + γ_i Σ_t η s_t`.
#[derive(Debug, Clone)]
pub struct EigenObjective {
    arch: MlpArch,
    enriched: bool,
    sigma: f64,
    weights: EigenWeights,
    mu: [f64; 2],
    interior: Vec<Point>,
    dirichlet: Vec<Point>,
    psi: Vec<Jet<2>>,
    c_int: f64,
    c_dir: f64,
    work: Vec<Work>,
    scale_invariant: bool,
}

impl EigenObjective {
    pub fn new(
        problem: &ProblemSpec,
        samples: &SampleSet,
        arch: MlpArch,
        enriched: bool,
        sigma: f64,
        weights: EigenWeights,
    ) -> Result<Self> {
        check_domain(problem, samples)?;
        weights.validate()?;
        if !(sigma > 0.0) {
            return Err(Error::Parameter(format!("boundary penalty must be positive, got {sigma}")));
        }
        if samples.dirichlet.is_empty() {
            return Err(Error::Config("no Dirichlet boundary samples".into()));
        }
        if arch.input_dim() != 2 {
            return Err(Error::Config("eigen candidates take 2 inputs".into()));
        }
        let psi = samples
            .interior
            .iter()
            .map(|p| {
                problem.terms.iter().fold(Jet::constant(0.0), |acc, t| acc + t.eval([p[0], p[1]]))
            })
            .collect();
        let m = samples.measures;
        Ok(Self {
            arch,
            enriched,
            sigma,
            weights,
            mu: [0.0; 2],
            c_int: weight(m.volume, samples.interior.len()),
            c_dir: weight(m.dirichlet, samples.dirichlet.len()),
            interior: samples.interior.clone(),
            dirichlet: samples.dirichlet.iter().map(|b| b.point).collect(),
            psi,
            work: plan(samples.interior.len(), samples.dirichlet.len(), 0),
            scale_invariant: false,
        })
    }

    /// Evaluates the residual, boundary and overlap terms on `u_i / ‖u_i‖`
    /// and drops the normalisation penalty: the loss then agrees with the
    /// plain one on the unit sphere and ignores the candidates' scale, which
    /// the caller fixes by rescaling.
    pub fn set_scale_invariant(&mut self, on: bool) {
        self.scale_invariant = on;
    }

    pub fn set_mu(&mut self, mu: [f64; 2]) {
        self.mu = mu;
    }

    pub fn mu(&self) -> [f64; 2] {
        self.mu
    }

    pub fn set_sigma(&mut self, sigma: f64) {
        self.sigma = sigma;
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn arch(&self) -> &MlpArch {
        &self.arch
    }

    pub fn coeff_offset(&self) -> usize {
        2 * self.arch.n_params()
    }

    pub fn initial_point(&self, seed: u64, gamma_init: f64) -> Vec<f64> {
        let mut x = MlpParams::init_with(&self.arch, &mut substream(seed, Stream::Init, 0)).into_flat();
        x.extend(MlpParams::init_with(&self.arch, &mut substream(seed, Stream::Init, 1)).into_flat());
        let g = if self.enriched { gamma_init } else { 0.0 };
        x.extend([g, g]);
        x
    }

    fn unpack(&self, x: &[f64]) -> Result<[MlpParams; 2]> {
        let n = self.arch.n_params();
        if x.len() != 2 * n + 2 {
            return Err(Error::Parameter(format!("state has length {}, expected {}", x.len(), 2 * n + 2)));
        }
        Ok([
            MlpParams::from_flat(&self.arch, x[..n].to_vec())?,
            MlpParams::from_flat(&self.arch, x[n..2 * n].to_vec())?,
        ])
    }

    fn gammas(&self, x: &[f64]) -> [f64; 2] {
        if self.enriched {
            let o = self.coeff_offset();
            [x[o], x[o + 1]]
        } else {
            [0.0; 2]
        }
    }

    /// Monte Carlo `‖u_i‖²`, failing on a vanishing candidate.
    pub fn masses(&self, x: &[f64]) -> Result<[f64; 2]> {
        let agg = self.aggregate(x)?;
        for m in agg.mass {
            if !(m > 1e-12) {
                return Err(Error::DegenerateCandidate(m));
            }
        }
        Ok(agg.mass)
    }

    /// Rayleigh quotients `‖∇u_i‖² / ‖u_i‖²` at `x`.
    pub fn rayleigh(&self, x: &[f64]) -> Result<[f64; 2]> {
        let agg = self.aggregate(x)?;
        let mut out = [0.0; 2];
        for i in 0..2 {
            if !(agg.mass[i] > 1e-12) {
                return Err(Error::DegenerateCandidate(agg.mass[i]));
            }
            out[i] = agg.energy[i] / agg.mass[i];
        }
        Ok(out)
    }

    fn candidate(&self, t: &Tape, b: usize, gamma: f64, psi: &Jet<2>) -> (f64, [f64; 2], f64) {
        (
            t.value(b) + gamma * psi.value,
            [t.grad(0, b) + gamma * psi.grad[0], t.grad(1, b) + gamma * psi.grad[1]],
            t.lap(b) + gamma * psi.lap,
        )
    }

    fn aggregate(&self, x: &[f64]) -> Result<Aggregates> {
        let nets = self.unpack(x)?;
        let gamma = self.gammas(x);
        let outs = run_ordered(
            &self.work,
            || [Tape::new(&self.arch, Order::Laplacian), Tape::new(&self.arch, Order::Laplacian)],
            |tp, wk| {
                let mut a = Aggregates::default();
                let mut start = wk.start;
                while start < wk.end {
                    let end = (start + BLOCK).min(wk.end);
                    match wk.part {
                        Part::Interior => {
                            let pts = &self.interior[start..end];
                            tp[0].forward(&nets[0], pts);
                            tp[1].forward(&nets[1], pts);
                            for b in 0..end - start {
                                let psi = &self.psi[start + b];
                                let mut vals = [0.0; 2];
                                for i in 0..2 {
                                    let (u, g, l) = self.candidate(&tp[i], b, gamma[i], psi);
                                    if !(u.is_finite() && l.is_finite()) {
                                        return Err(Error::NonFinite { index: start + b, what: "eigen candidate".into() });
                                    }
                                    let r = l + self.mu[i] * u;
                                    a.residual[i] += self.c_int * r * r;
                                    a.mass[i] += self.c_int * u * u;
                                    a.energy[i] += self.c_int * (g[0] * g[0] + g[1] * g[1]);
                                    vals[i] = u;
                                }
                                a.overlap += self.c_int * vals[0] * vals[1];
                            }
                        }
                        _ => {
                            let pts = &self.dirichlet[start..end];
                            for i in 0..2 {
                                tp[i].forward(&nets[i], pts);
                                for b in 0..end - start {
                                    let v = tp[i].value(b);
                                    a.boundary[i] += self.c_dir * v * v;
                                }
                            }
                        }
                    }
                    start = end;
                }
                Ok(a)
            },
        )?;
        let mut agg = Aggregates::default();
        for o in &outs {
            agg.add(o);
        }
        Ok(agg)
    }

    /// Multipliers of the per-candidate quadratic terms and of the overlap.
    fn scales(&self, agg: &Aggregates) -> ([f64; 2], f64) {
        if self.scale_invariant {
            let m = agg.mass;
            ([1.0 / m[0], 1.0 / m[1]], 1.0 / (m[0] * m[1]).sqrt())
        } else {
            ([1.0; 2], 1.0)
        }
    }

    fn breakdown(&self, agg: &Aggregates) -> Result<LossBreakdown> {
        let w = &self.weights;
        let mut lb = LossBreakdown::default();
        for i in 0..2 {
            if !(agg.mass[i] > 1e-12) {
                return Err(Error::DegenerateCandidate(agg.mass[i]));
            }
        }
        let (f, fo) = self.scales(agg);
        for i in 0..2 {
            lb.interior += f[i] * agg.residual[i];
            lb.dirichlet += f[i] * agg.boundary[i];
            if !self.scale_invariant {
                lb.normalization += w.alpha * (agg.mass[i] - 1.0).abs();
            }
            lb.rayleigh += w.nu[i] * agg.energy[i] / agg.mass[i];
        }
        lb.orthogonality = w.beta * fo * agg.overlap.abs();
        lb.total = lb.interior + self.sigma * lb.dirichlet + lb.normalization + lb.orthogonality + lb.rayleigh;
        Ok(lb)
    }
}

impl Objective for EigenObjective {
    fn dim(&self) -> usize {
        2 * self.arch.n_params() + 2
    }

    fn evaluate(&self, x: &[f64], grad: Option<&mut [f64]>) -> Result<LossBreakdown> {
        let agg = self.aggregate(x)?;
        let lb = self.breakdown(&agg)?;
        let Some(grad) = grad else { return Ok(lb) };
        let nets = self.unpack(x)?;
        let gamma = self.gammas(x);
        let n = self.arch.n_params();
        let w = &self.weights;
        let sgn = |v: f64| if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 };
        let c = self.c_int;
        let (f, fo) = self.scales(&agg);
        // Per-candidate multipliers of u and ∇u from the global terms.
        let mut k_val = [0.0; 2];
        let mut k_grad = [0.0; 2];
        for i in 0..2 {
            let m = agg.mass[i];
            let mut dm = -w.nu[i] * agg.energy[i] / (m * m);
            if self.scale_invariant {
                dm -= (agg.residual[i] + self.sigma * agg.boundary[i]) / (m * m);
                dm -= 0.5 * w.beta * fo * agg.overlap.abs() / m;
            } else {
                dm += w.alpha * sgn(m - 1.0);
            }
            k_val[i] = 2.0 * c * dm;
            k_grad[i] = 2.0 * c * w.nu[i] / m;
        }
        let k_over = w.beta * fo * sgn(agg.overlap) * c;
        let dim = self.dim();
        let outs = run_ordered(
            &self.work,
            || [Tape::new(&self.arch, Order::Laplacian), Tape::new(&self.arch, Order::Laplacian)],
            |tp, wk| {
                let mut g = vec![0.0; dim];
                let mut start = wk.start;
                while start < wk.end {
                    let end = (start + BLOCK).min(wk.end);
                    match wk.part {
                        Part::Interior => {
                            let pts = &self.interior[start..end];
                            for i in 0..2 {
                                tp[i].forward(&nets[i], pts);
                                tp[i].clear_seeds();
                            }
                            for b in 0..end - start {
                                let psi = &self.psi[start + b];
                                let (u0, _, _) = self.candidate(&tp[0], b, gamma[0], psi);
                                let (u1, _, _) = self.candidate(&tp[1], b, gamma[1], psi);
                                let us = [u0, u1];
                                for i in 0..2 {
                                    let (u, gu, l) = self.candidate(&tp[i], b, gamma[i], psi);
                                    let r = l + self.mu[i] * u;
                                    let sv = 2.0 * c * f[i] * r * self.mu[i] + k_val[i] * u + k_over * us[1 - i];
                                    let sg = [k_grad[i] * gu[0], k_grad[i] * gu[1]];
                                    let sl = 2.0 * c * f[i] * r;
                                    *tp[i].seed_value(b) = sv;
                                    *tp[i].seed_grad(0, b) = sg[0];
                                    *tp[i].seed_grad(1, b) = sg[1];
                                    *tp[i].seed_lap(b) = sl;
                                    if self.enriched {
                                        g[2 * n + i] += sv * psi.value + sg[0] * psi.grad[0] + sg[1] * psi.grad[1] + sl * psi.lap;
                                    }
                                }
                            }
                        }
                        _ => {
                            let pts = &self.dirichlet[start..end];
                            for i in 0..2 {
                                tp[i].forward(&nets[i], pts);
                                tp[i].clear_seeds();
                                for b in 0..end - start {
                                    *tp[i].seed_value(b) = 2.0 * self.sigma * f[i] * self.c_dir * tp[i].value(b);
                                }
                            }
                        }
                    }
                    for i in 0..2 {
                        tp[i].backward(&nets[i], &mut g[i * n..(i + 1) * n]);
                    }
                    start = end;
                }
                Ok(g)
            },
        )?;
        grad.fill(0.0);
        for o in &outs {
            add_into(grad, o);
        }
        Ok(lb)
    }
}

/// `‖∇u‖² / ‖u‖²` for `u = w_θ + γ Σ_t η s_t` over interior samples.
pub fn rayleigh_quotient(
    params: &MlpParams,
    gamma: f64,
    terms: &[SingularTerm],
    points: &[Point],
) -> Result<f64> {
    let mut tape = Tape::new(params.arch(), Order::Gradient);
    let (mut num, mut den) = (0.0, 0.0);
    for chunk in points.chunks(BLOCK) {
        tape.forward(params, chunk);
        for (b, p) in chunk.iter().enumerate() {
            let psi = terms.iter().fold(Jet::<2>::constant(0.0), |a, t| a + t.eval([p[0], p[1]]));
            let u = tape.value(b) + gamma * psi.value;
            let gx = tape.grad(0, b) + gamma * psi.grad[0];
            let gy = tape.grad(1, b) + gamma * psi.grad[1];
            num += gx * gx + gy * gy;
            den += u * u;
        }
    }
    rayleigh_ratio(num, den, points.len())
}

/// Rayleigh quotient of a closed-form candidate.
pub fn rayleigh_quotient_of<F: Fn(Point) -> Jet<3>>(u: F, points: &[Point]) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for &p in points {
        let j = u(p);
        num += j.grad_norm_sq();
        den += j.value * j.value;
    }
    rayleigh_ratio(num, den, points.len())
}

fn rayleigh_ratio(num: f64, den: f64, n: usize) -> Result<f64> {
    if n == 0 || !(den / n as f64 > 1e-12) {
        return Err(Error::DegenerateCandidate(den / n.max(1) as f64));
    }
    Ok(num / den)
}
