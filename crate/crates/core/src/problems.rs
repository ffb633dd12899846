//! Registry of the manufactured test problems.
//!
//! Regular parts are written over [`Jet`]s, so sources follow from exact
//! differentiation: `f = -Δu + A²u` with `u = w + S`. The singular part `S`
//! is assembled from enrichment evaluations (2D terms, edge modes) or, for
//! the edge problems, from the closed-form flux intensity `Φ` times `η s`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::enrichment::{terms_for_domain, Cutoff, SingularTerm, ZBasis};
use crate::error::{Error, Result};
use crate::geometry::{self, BcKind, DomainSpec, Point};
use crate::jet::Jet;

type J3 = Jet<3>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EquationKind {
    Poisson,
    /// `-Δu + A²u = f`.
    Helmholtz { a: f64 },
    /// `-Δu = μu`.
    Eigenvalue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemId {
    Lshape2d,
    MixedBc,
    Edge3d,
    FourEdges3d,
    EigenLshape,
    Helmholtz2d,
    Helmholtz3d,
}

impl ProblemId {
    pub const ALL: [ProblemId; 7] = [
        ProblemId::Lshape2d,
        ProblemId::MixedBc,
        ProblemId::Edge3d,
        ProblemId::FourEdges3d,
        ProblemId::EigenLshape,
        ProblemId::Helmholtz2d,
        ProblemId::Helmholtz3d,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemId::Lshape2d => "lshape2d",
            ProblemId::MixedBc => "mixed_bc",
            ProblemId::Edge3d => "edge3d",
            ProblemId::FourEdges3d => "four_edges3d",
            ProblemId::EigenLshape => "eigen_lshape",
            ProblemId::Helmholtz2d => "helmholtz2d",
            ProblemId::Helmholtz3d => "helmholtz3d",
        }
    }
}

/// Closed-form flux intensity functions of the edge problems.
#[derive(Debug, Clone, Copy, PartialEq)]
enum ExactPhi {
    /// `-2 atan(e^{-πr} sin πz / (1 + e^{-πr} cos πz))`.
    Alternating,
    /// `r - ln(2 cosh r - 2 cos z)`.
    Logarithmic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub id: ProblemId,
    pub name: String,
    pub domain: DomainSpec,
    pub kind: EquationKind,
    pub terms: Vec<SingularTerm>,
    /// z-direction basis of the edge expansion (prisms only).
    pub zbasis: Option<ZBasis>,
    pub reference_eigenvalues: Option<[f64; 2]>,
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn a_squared(&self) -> f64 {
        match self.kind {
            EquationKind::Helmholtz { a } => a * a,
            _ => 0.0,
        }
    }

    pub fn has_exact_solution(&self) -> bool {
        self.id != ProblemId::EigenLshape
    }

    /// Exact stress intensity factor of 2D term `term`, or the exact edge
    /// coefficient `γ_n` of a 3D term.
    pub fn exact_gamma(&self, term: usize, n: usize) -> Option<f64> {
        let nf = n as f64;
        match self.id {
            ProblemId::Lshape2d | ProblemId::MixedBc | ProblemId::Helmholtz2d => {
                (term == 0).then_some(1.0)
            }
            ProblemId::Edge3d => Some(if n == 0 {
                0.0
            } else {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                sign * 2.0 / nf
            }),
            ProblemId::FourEdges3d => Some(if n == 0 { 0.0 } else { 2.0 / nf }),
            ProblemId::Helmholtz3d => Some(if n == 1 { 1.0 } else { 0.0 }),
            ProblemId::EigenLshape => None,
        }
    }

    /// Exact series `γ_0..γ_N` for every term.
    pub fn exact_series(&self, n_max: usize) -> Option<Vec<Vec<f64>>> {
        (0..self.terms.len())
            .map(|t| (0..=n_max).map(|n| self.exact_gamma(t, n)).collect())
            .collect()
    }

    /// Regular part `w` with exact derivatives.
    pub fn exact_w(&self, p: Point) -> Option<J3> {
        let [x, y, z] = J3::point(p);
        let w = match self.id {
            ProblemId::Lshape2d => {
                let poly = if p[1] < 0.0 {
                    (y * y * 0.5 + y) * (y * y - 1.0)
                } else {
                    (y * y * -0.5 + y) * (y * y - 1.0)
                };
                (x * (2.0 * PI)).sin() * poly
            }
            ProblemId::MixedBc => (x * PI).sin() * y * y * (y - 1.0),
            ProblemId::Edge3d => (x - x.powi(3)) * (y - y.powi(3)) * (1.0 - z * z),
            ProblemId::FourEdges3d => {
                let qx = 1.0 - x * x / (PI * PI);
                let qy = 1.0 - y * y / (PI * PI);
                qx * qx * qy * qy * z.cos()
            }
            ProblemId::Helmholtz2d => helmholtz_core(x, y),
            ProblemId::Helmholtz3d => helmholtz_core(x, y) * (z * PI).sin(),
            ProblemId::EigenLshape => return None,
        };
        Some(w)
    }

    fn exact_phi(&self) -> Option<ExactPhi> {
        match self.id {
            ProblemId::Edge3d => Some(ExactPhi::Alternating),
            ProblemId::FourEdges3d => Some(ExactPhi::Logarithmic),
            _ => None,
        }
    }

    /// Closed-form `Φ(r, z)` of term `t` at `p` (edge problems only).
    pub fn exact_phi_value(&self, t: usize, p: Point) -> Option<f64> {
        let kind = self.exact_phi()?;
        let (r, _) = self.terms[t].local_polar([p[0], p[1]]);
        Some(phi_jet(kind, J3::constant(r), J3::constant(p[2])).value)
    }

    /// Exact singular part `S` with exact derivatives.
    pub fn exact_singular(&self, p: Point) -> Option<J3> {
        if !self.has_exact_solution() {
            return None;
        }
        let mut s = J3::constant(0.0);
        for (t, term) in self.terms.iter().enumerate() {
            let part = match (self.exact_phi(), self.zbasis) {
                (Some(kind), _) => {
                    let plane = lift(term.eval([p[0], p[1]]));
                    if plane.value == 0.0 && plane.lap == 0.0 && plane.grad == [0.0; 3] {
                        continue;
                    }
                    let [x, y, z] = J3::point(p);
                    let dx = x - term.frame.vertex[0];
                    let dy = y - term.frame.vertex[1];
                    let r = (dx * dx + dy * dy).sqrt();
                    phi_jet(kind, r, z) * plane
                }
                (None, Some(zb)) => {
                    // Finite exact series (Helmholtz 3D: a single mode).
                    let mut acc = J3::constant(0.0);
                    for n in 0..=4 {
                        let g = self.exact_gamma(t, n).unwrap_or(0.0);
                        if g != 0.0 {
                            acc = acc + term.eval_mode(&zb, n, p) * g;
                        }
                    }
                    acc
                }
                (None, None) => lift(term.eval([p[0], p[1]])) * self.exact_gamma(t, 0).unwrap_or(0.0),
            };
            s = s + part;
        }
        Some(s)
    }

    pub fn exact_u(&self, p: Point) -> Option<J3> {
        Some(self.exact_w(p)? + self.exact_singular(p)?)
    }

    /// The source `f`. Zero for the eigenvalue problem.
    pub fn source(&self, p: Point) -> f64 {
        match self.exact_u(p) {
            Some(u) => -u.lap + self.a_squared() * u.value,
            None => 0.0,
        }
    }

    /// Dirichlet data (homogeneous for every registered problem).
    pub fn dirichlet_data(&self, _p: Point) -> f64 {
        0.0
    }
}

fn helmholtz_core(x: J3, y: J3) -> J3 {
    x * y * ((x * x - 1.0).exp() - 1.0) * ((y * y - 1.0).exp() - 1.0)
}

fn lift(j: Jet<2>) -> J3 {
    Jet {
        value: j.value,
        grad: [j.grad[0], j.grad[1], 0.0],
        lap: j.lap,
    }
}

fn phi_jet(kind: ExactPhi, r: J3, z: J3) -> J3 {
    match kind {
        ExactPhi::Alternating => {
            let e = (r * -PI).exp();
            let zz = z * PI;
            let num = e * zz.sin();
            let den = e * zz.cos() + 1.0;
            num.atan2(&den) * -2.0
        }
        ExactPhi::Logarithmic => r - (r.cosh() * 2.0 - z.cos() * 2.0).ln(),
    }
}

/// Example with a reentrant corner: L-shape, homogeneous Dirichlet data,
/// `s = r^{2/3} sin(2θ/3)`, `ρ = 1`, `R = 1/2`, `γ* = 1`.
pub fn example_lshape_2d() -> ProblemSpec {
    let domain = geometry::lshape();
    let terms = terms_for_domain(&domain, Cutoff::new(1.0, 0.5).unwrap()).unwrap();
    ProblemSpec {
        id: ProblemId::Lshape2d,
        name: ProblemId::Lshape2d.name().into(),
        domain,
        kind: EquationKind::Poisson,
        terms,
        zbasis: None,
        reference_eigenvalues: None,
    }
}

/// Unit square with a Dirichlet-to-Neumann switch at `(1/2, 0)`,
/// `s = r^{1/2} sin(θ/2)`, `R = 1/4`, `γ* = 1`.
pub fn example_mixed_bc() -> ProblemSpec {
    let domain = geometry::square_mixed();
    let terms = terms_for_domain(&domain, Cutoff::new(1.0, 0.25).unwrap()).unwrap();
    ProblemSpec {
        id: ProblemId::MixedBc,
        name: ProblemId::MixedBc.name().into(),
        domain,
        kind: EquationKind::Poisson,
        terms,
        zbasis: None,
        reference_eigenvalues: None,
    }
}

/// L-shape prism `Ω_0 × (-1, 1)` with one reentrant edge and
/// `Φ = Σ (-1)^n (2/n) e^{-nπr} sin(nπz)`.
pub fn example_edge_3d() -> ProblemSpec {
    let domain = geometry::lshape_prism();
    let terms = terms_for_domain(&domain, Cutoff::new(1.0, 0.5).unwrap()).unwrap();
    ProblemSpec {
        id: ProblemId::Edge3d,
        name: ProblemId::Edge3d.name().into(),
        domain,
        kind: EquationKind::Poisson,
        terms,
        zbasis: Some(ZBasis::new([BcKind::Dirichlet, BcKind::Dirichlet], 0.0, 1.0).unwrap()),
        reference_eigenvalues: None,
    }
}

/// Cube `(-π, π)³` with four Dirichlet/Neumann switches along vertical edges
/// and `Φ_j = Σ (2/n) e^{-n r_j} cos(nz)`.
pub fn example_four_edges_3d() -> ProblemSpec {
    let domain = geometry::cube_mixed_edges();
    let terms = terms_for_domain(&domain, Cutoff::new(1.0, 0.5).unwrap()).unwrap();
    ProblemSpec {
        id: ProblemId::FourEdges3d,
        name: ProblemId::FourEdges3d.name().into(),
        domain,
        kind: EquationKind::Poisson,
        terms,
        zbasis: Some(ZBasis::new([BcKind::Neumann, BcKind::Neumann], 0.0, PI).unwrap()),
        reference_eigenvalues: None,
    }
}

/// Dirichlet Laplace eigenproblem on the L-shape; reference values for the
/// two smallest eigenvalues.
pub fn eigen_lshape() -> ProblemSpec {
    let domain = geometry::lshape();
    let terms = terms_for_domain(&domain, Cutoff::new(1.0, 0.5).unwrap()).unwrap();
    ProblemSpec {
        id: ProblemId::EigenLshape,
        name: ProblemId::EigenLshape.name().into(),
        domain,
        kind: EquationKind::Eigenvalue,
        terms,
        zbasis: None,
        reference_eigenvalues: Some([9.6397, 15.1973]),
    }
}

/// `-Δu + π²u = f` on the L-shape with the damped term `e^{-πr} η s`.
pub fn helmholtz_2d() -> ProblemSpec {
    let domain = geometry::lshape();
    let terms = terms_for_domain(&domain, Cutoff::new(1.0, 0.5).unwrap())
        .unwrap()
        .into_iter()
        .map(|t| t.with_damping(PI))
        .collect();
    ProblemSpec {
        id: ProblemId::Helmholtz2d,
        name: ProblemId::Helmholtz2d.name().into(),
        domain,
        kind: EquationKind::Helmholtz { a: PI },
        terms,
        zbasis: None,
        reference_eigenvalues: None,
    }
}

/// `-Δu + π²u = f` on the L-shape prism; the singular part is the single
/// mode `e^{-√2 πr} η s sin(πz)`.
pub fn helmholtz_3d() -> ProblemSpec {
    let domain = geometry::lshape_prism();
    let terms = terms_for_domain(&domain, Cutoff::new(1.0, 0.5).unwrap())
        .unwrap()
        .into_iter()
        .map(|t| t.with_damping(PI))
        .collect();
    ProblemSpec {
        id: ProblemId::Helmholtz3d,
        name: ProblemId::Helmholtz3d.name().into(),
        domain,
        kind: EquationKind::Helmholtz { a: PI },
        terms,
        zbasis: Some(ZBasis::new([BcKind::Dirichlet, BcKind::Dirichlet], 0.0, 1.0).unwrap()),
        reference_eigenvalues: None,
    }
}

pub fn by_id(id: ProblemId) -> ProblemSpec {
    match id {
        ProblemId::Lshape2d => example_lshape_2d(),
        ProblemId::MixedBc => example_mixed_bc(),
        ProblemId::Edge3d => example_edge_3d(),
        ProblemId::FourEdges3d => example_four_edges_3d(),
        ProblemId::EigenLshape => eigen_lshape(),
        ProblemId::Helmholtz2d => helmholtz_2d(),
        ProblemId::Helmholtz3d => helmholtz_3d(),
    }
}

pub fn by_name(name: &str) -> Result<ProblemSpec> {
    ProblemId::ALL
        .iter()
        .find(|id| id.name() == name)
        .map(|&id| by_id(id))
        .ok_or_else(|| Error::Config(format!("unknown problem '{name}'")))
}
