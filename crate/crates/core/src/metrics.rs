//! Errors against exact solutions, stress intensity extraction, truncation
//! studies and grid export.

use std::path::Path;

use serde::Serialize;

use crate::enrichment::SingularTerm;
use crate::error::{Error, Result};
use crate::geometry::{DomainSpec, Point};
use crate::loss::{AuxInput, StateLayout};
use crate::network::{MlpParams, Order, Tape, BLOCK};
use crate::enrichment::ZBasis;
use crate::problems::ProblemSpec;
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorReport {
    pub relative: f64,
    pub absolute: f64,
    pub max_abs: f64,
    pub n: usize,
    pub seed: u64,
}

/// Fresh validation points, drawn from their own stream.
pub fn validation_points(domain: &DomainSpec, n: usize, seed: u64) -> Result<Vec<Point>> {
    domain.sample_interior_with(n, &mut stream(seed, Stream::Validation))
}

/// Monte Carlo relative L² error on a shared point set.
pub fn relative_l2_on(approx: &[f64], exact: &[f64], volume: f64, seed: u64) -> Result<ErrorReport> {
    assert_eq!(approx.len(), exact.len());
    let n = exact.len();
    let (mut num, mut den, mut max_abs) = (0.0, 0.0, 0.0f64);
    for (a, e) in approx.iter().zip(exact) {
        let d = a - e;
        num += d * d;
        den += e * e;
        max_abs = max_abs.max(d.abs());
    }
    let w = volume / n.max(1) as f64;
    let norm = (w * den).sqrt();
    if !(norm >= 1e-14) {
        return Err(Error::DegenerateReference(norm));
    }
    let absolute = (w * num).sqrt();
    Ok(ErrorReport {
        relative: absolute / norm,
        absolute,
        max_abs,
        n,
        seed,
    })
}

pub fn relative_l2<A, E>(approx: A, exact: E, domain: &DomainSpec, n: usize, seed: u64) -> Result<ErrorReport>
where
    A: Fn(&[Point]) -> Vec<f64>,
    E: Fn(Point) -> f64,
{
    if n < 1000 {
        return Err(Error::Parameter(format!("error estimate needs at least 1000 points, got {n}")));
    }
    let pts = validation_points(domain, n, seed)?;
    let ex: Vec<f64> = pts.iter().map(|&p| exact(p)).collect();
    relative_l2_on(&approx(&pts), &ex, domain.measures().volume, seed)
}

/// A trained state of a collocation objective, evaluable at arbitrary points.
#[derive(Debug, Clone)]
pub struct Solution {
    pub terms: Vec<SingularTerm>,
    pub zbasis: Option<ZBasis>,
    pub w: MlpParams,
    pub aux: Vec<MlpParams>,
    pub aux_input: AuxInput,
    /// Coefficients per term: one scalar (2D) or `γ_0..γ_N` (edge series).
    pub coeffs: Vec<Vec<f64>>,
}

fn net_values(params: &MlpParams, pts: &[Point]) -> Vec<f64> {
    let mut tape = Tape::new(params.arch(), Order::Value);
    let mut out = Vec::with_capacity(pts.len());
    for chunk in pts.chunks(BLOCK) {
        tape.forward(params, chunk);
        out.extend_from_slice(tape.output(0));
    }
    out
}

impl Solution {
    pub fn from_state(problem: &ProblemSpec, layout: &StateLayout, x: &[f64]) -> Result<Self> {
        let (w, aux, _) = layout.split(x)?;
        Ok(Self {
            terms: problem.terms.clone(),
            zbasis: problem.zbasis,
            w,
            aux,
            aux_input: layout.aux_input,
            coeffs: layout.coeffs_per_term(x),
        })
    }

    /// A solution from saved networks: `nets[0]` is the regular part, any
    /// further networks are auxiliary ones (input read off their width), and
    /// `coeffs` are split evenly over the terms.
    pub fn from_parts(problem: &ProblemSpec, nets: &[MlpParams], coeffs: &[f64]) -> Result<Self> {
        let (w, aux) = nets
            .split_first()
            .ok_or_else(|| Error::Config("no regular network".into()))?;
        if w.arch().input_dim() != problem.dim() {
            return Err(Error::Config(format!(
                "network takes {} inputs, problem '{}' is {}D",
                w.arch().input_dim(),
                problem.name,
                problem.dim()
            )));
        }
        let nt = problem.terms.len();
        if !aux.is_empty() && aux.len() != nt {
            return Err(Error::Config(format!("{} auxiliary networks for {nt} terms", aux.len())));
        }
        if !coeffs.is_empty() && coeffs.len() % nt != 0 {
            return Err(Error::Config(format!("{} coefficients for {nt} terms", coeffs.len())));
        }
        let aux_input = match aux.first().map(|a| a.arch().input_dim()) {
            Some(3) => AuxInput::Cartesian,
            _ => AuxInput::Polar,
        };
        let per = coeffs.len() / nt.max(1);
        Ok(Self {
            terms: problem.terms.clone(),
            zbasis: problem.zbasis,
            w: w.clone(),
            aux: aux.to_vec(),
            aux_input,
            coeffs: if per == 0 { vec![Vec::new(); nt] } else { coeffs.chunks(per).map(<[f64]>::to_vec).collect() },
        })
    }

    pub fn regular(&self, pts: &[Point]) -> Vec<f64> {
        net_values(&self.w, pts)
    }

    /// The singular part, optionally with each series truncated after mode `n_max`.
    pub fn singular_truncated(&self, pts: &[Point], n_max: Option<usize>) -> Vec<f64> {
        let mut out = vec![0.0; pts.len()];
        if !self.aux.is_empty() {
            for (term, net) in self.terms.iter().zip(&self.aux) {
                let inputs: Vec<Point> = pts
                    .iter()
                    .map(|&p| match self.aux_input {
                        AuxInput::Polar => [term.local_polar([p[0], p[1]]).0, p[2], 0.0],
                        AuxInput::Cartesian => p,
                    })
                    .collect();
                let phi = net_values(net, &inputs);
                for (o, (p, v)) in out.iter_mut().zip(pts.iter().zip(phi)) {
                    *o += v * term.eval([p[0], p[1]]).value;
                }
            }
            return out;
        }
        for (term, gs) in self.terms.iter().zip(&self.coeffs) {
            for (o, &p) in out.iter_mut().zip(pts) {
                *o += match &self.zbasis {
                    Some(zb) => gs
                        .iter()
                        .enumerate()
                        .take(n_max.map_or(gs.len(), |n| n + 1))
                        .map(|(n, g)| g * term.eval_mode(zb, n, p).value)
                        .sum::<f64>(),
                    None => gs.first().copied().unwrap_or(0.0) * term.eval([p[0], p[1]]).value,
                };
            }
        }
        out
    }

    pub fn singular(&self, pts: &[Point]) -> Vec<f64> {
        self.singular_truncated(pts, None)
    }

    pub fn u(&self, pts: &[Point]) -> Vec<f64> {
        self.regular(pts).iter().zip(self.singular(pts)).map(|(a, b)| a + b).collect()
    }
}

/// Errors of `ŵ`, `Ŝ` and `û = ŵ + Ŝ` against the exact parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitErrors {
    pub w: ErrorReport,
    pub s: Option<ErrorReport>,
    pub u: ErrorReport,
}

pub fn split_errors(problem: &ProblemSpec, sol: &Solution, n: usize, seed: u64) -> Result<SplitErrors> {
    if !problem.has_exact_solution() {
        return Err(Error::Config(format!("problem '{}' has no exact solution", problem.name)));
    }
    let pts = validation_points(&problem.domain, n, seed)?;
    let vol = problem.domain.measures().volume;
    let w_hat = sol.regular(&pts);
    let s_hat = sol.singular(&pts);
    let u_hat: Vec<f64> = w_hat.iter().zip(&s_hat).map(|(a, b)| a + b).collect();
    let w_ex: Vec<f64> = pts.iter().map(|&p| problem.exact_w(p).unwrap().value).collect();
    let s_ex: Vec<f64> = pts.iter().map(|&p| problem.exact_singular(p).unwrap().value).collect();
    let u_ex: Vec<f64> = w_ex.iter().zip(&s_ex).map(|(a, b)| a + b).collect();
    Ok(SplitErrors {
        w: relative_l2_on(&w_hat, &w_ex, vol, seed)?,
        s: relative_l2_on(&s_hat, &s_ex, vol, seed).ok(),
        u: relative_l2_on(&u_hat, &u_ex, vol, seed)?,
    })
}

/// Tensor quadrature on the sector `0 < r < R`, `0 < θ < ω`, midpoint in
/// `θ` and in `t` with `r = R t²`, which grades nodes toward the vertex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SectorQuadrature {
    pub n_r: usize,
    pub n_theta: usize,
}

impl Default for SectorQuadrature {
    fn default() -> Self {
        Self { n_r: 512, n_theta: 512 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extraction {
    pub gamma: f64,
    pub points: usize,
    /// The quadrature has fewer than 10⁴ nodes.
    pub coarse: bool,
}

/// `γ = (λω)^{-1} (∫ f η s_{-λ} + ∫ u Δ(η s_{-λ}))` over the cutoff support.
pub fn extract_gamma<U, F>(u: U, f: F, term: &SingularTerm, quad: SectorQuadrature) -> Result<Extraction>
where
    U: Fn(Point) -> f64,
    F: Fn(Point) -> f64,
{
    if quad.n_r == 0 || quad.n_theta == 0 {
        return Err(Error::Parameter("empty quadrature".into()));
    }
    let frame = &term.frame;
    let radius = term.cutoff.support();
    let (ht, hth) = (1.0 / quad.n_r as f64, frame.omega / quad.n_theta as f64);
    let mut acc = 0.0;
    for i in 0..quad.n_r {
        let t = (i as f64 + 0.5) * ht;
        let r = radius * t * t;
        let jac = 2.0 * radius * t * ht * r * hth;
        let mut ring = 0.0;
        for j in 0..quad.n_theta {
            let theta = (j as f64 + 0.5) * hth;
            let xy = frame.from_local_polar(r, theta);
            let (v, lap) = term.eval_dual_cutoff(xy)?;
            let p = [xy[0], xy[1], 0.0];
            let mut val = 0.0;
            if v != 0.0 {
                val += f(p) * v;
            }
            if lap != 0.0 {
                val += u(p) * lap;
            }
            ring += val;
        }
        acc += ring * jac;
    }
    let points = quad.n_r * quad.n_theta;
    Ok(Extraction {
        gamma: acc / (term.lambda() * frame.omega),
        points,
        coarse: points < 10_000,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationRow {
    pub n: usize,
    pub e: f64,
    pub e_s: f64,
    pub e_u: f64,
    pub abs_w: f64,
    pub abs_s: f64,
    pub abs_u: f64,
}

/// Errors of `ŵ`, `Ŝ^N` and `ŵ + Ŝ^N` for each truncation level `N`.
/// `singular(pts, N)` evaluates the series cut after mode `N`.
pub fn truncation_study<R, S>(
    problem: &ProblemSpec,
    regular: R,
    singular: S,
    levels: &[usize],
    n_points: usize,
    seed: u64,
) -> Result<Vec<TruncationRow>>
where
    R: Fn(&[Point]) -> Vec<f64>,
    S: Fn(&[Point], usize) -> Vec<f64>,
{
    if problem.exact_singular([0.0; 3]).is_none() || problem.zbasis.is_none() {
        return Err(Error::Config("truncation study needs a closed-form edge singularity".into()));
    }
    let pts = validation_points(&problem.domain, n_points, seed)?;
    let vol = problem.domain.measures().volume;
    let w_hat = regular(&pts);
    let w_ex: Vec<f64> = pts.iter().map(|&p| problem.exact_w(p).unwrap().value).collect();
    let s_ex: Vec<f64> = pts.iter().map(|&p| problem.exact_singular(p).unwrap().value).collect();
    let u_ex: Vec<f64> = w_ex.iter().zip(&s_ex).map(|(a, b)| a + b).collect();
    let ew = relative_l2_on(&w_hat, &w_ex, vol, seed)?;
    levels
        .iter()
        .map(|&n| {
            let s_hat = singular(&pts, n);
            let u_hat: Vec<f64> = w_hat.iter().zip(&s_hat).map(|(a, b)| a + b).collect();
            let es = relative_l2_on(&s_hat, &s_ex, vol, seed)?;
            let eu = relative_l2_on(&u_hat, &u_ex, vol, seed)?;
            Ok(TruncationRow {
                n,
                e: ew.relative,
                e_s: es.relative,
                e_u: eu.relative,
                abs_w: ew.absolute,
                abs_s: es.absolute,
                abs_u: eu.absolute,
            })
        })
        .collect()
}

/// The exact coefficients truncated after mode `n`: the analytic mode of a
/// truncation study.
pub fn exact_truncated_singular(problem: &ProblemSpec, pts: &[Point], n: usize) -> Vec<f64> {
    let (Some(zb), Some(series)) = (problem.zbasis, problem.exact_series(n)) else {
        return vec![0.0; pts.len()];
    };
    pts.iter()
        .map(|&p| {
            problem
                .terms
                .iter()
                .zip(&series)
                .map(|(t, gs)| gs.iter().enumerate().map(|(k, g)| g * t.eval_mode(&zb, k, p).value).sum::<f64>())
                .sum()
        })
        .collect()
}

/// Writes `f` on a regular grid over the bounding box, clipped to the domain.
/// 3D domains need a `z` slice inside their extent. Returns the row count.
pub fn export_field_grid<F>(
    f: F,
    domain: &DomainSpec,
    resolution: [usize; 2],
    z_slice: Option<f64>,
    path: &Path,
) -> Result<usize>
where
    F: Fn(&[Point]) -> Vec<f64>,
{
    if resolution.iter().any(|&n| n < 2) {
        return Err(Error::Parameter("grid needs at least 2 nodes per axis".into()));
    }
    let z = match (domain.z_range(), z_slice) {
        (Some((lo, hi)), Some(z)) if z >= lo && z <= hi => Some(z),
        (Some((lo, hi)), Some(z)) => {
            return Err(Error::Parameter(format!("slice z = {z} outside [{lo}, {hi}]")));
        }
        (Some(_), None) => return Err(Error::Parameter("3D export needs a z slice".into())),
        (None, Some(_)) => return Err(Error::Parameter("2D domain takes no z slice".into())),
        (None, None) => None,
    };
    let (lo, hi) = domain.bounding_box();
    let mut pts = Vec::new();
    for j in 0..resolution[1] {
        let y = lo[1] + (hi[1] - lo[1]) * j as f64 / (resolution[1] - 1) as f64;
        for i in 0..resolution[0] {
            let x = lo[0] + (hi[0] - lo[0]) * i as f64 / (resolution[0] - 1) as f64;
            if domain.contains_closed_2d([x, y]) {
                pts.push([x, y, z.unwrap_or(0.0)]);
            }
        }
    }
    let vals = f(&pts);
    let mut w = csv::Writer::from_path(path)?;
    if z.is_some() {
        w.write_record(["x", "y", "z", "value"])?;
    } else {
        w.write_record(["x", "y", "value"])?;
    }
    for (p, v) in pts.iter().zip(&vals) {
        let mut row = vec![format!("{:e}", p[0]), format!("{:e}", p[1])];
        if z.is_some() {
            row.push(format!("{:e}", p[2]));
        }
        row.push(format!("{v:e}"));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(pts.len())
}
