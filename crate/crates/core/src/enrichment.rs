//! Singular functions, the C² cutoff, z-direction bases and the enriched
//! basis functions built from them.
//!
//! A boundary-condition pair is always ordered as (edge at `θ = 0`, edge at
//! `θ = ω`) in the vertex's local polar frame.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BcKind, DomainSpec, PolarFrame, Point};
use crate::jet::Jet;

const R_FLOOR: f64 = 1e-12;
const ANGLE_EPS: f64 = 1e-12;

/// The piecewise-quintic cutoff `η_ρ`: 1 on `[0, ρR/2]`, 0 on `[ρR, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub rho: f64,
    pub radius: f64,
}

impl Cutoff {
    pub fn new(rho: f64, radius: f64) -> Result<Self> {
        if !(rho > 0.0 && rho <= 2.0) {
            return Err(Error::Parameter(format!("cutoff rho = {rho} outside (0, 2]")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Parameter(format!("cutoff R = {radius} must be positive")));
        }
        Ok(Self { rho, radius })
    }

    /// Outer radius `ρR` of the support.
    pub fn support(&self) -> f64 {
        self.rho * self.radius
    }

    /// `(η, η', η'')` at radius `r`.
    pub fn eval(&self, r: f64) -> [f64; 3] {
        let outer = self.support();
        if r < 0.5 * outer {
            return [1.0, 0.0, 0.0];
        }
        if r >= outer {
            return [0.0; 3];
        }
        let dt = 4.0 / outer;
        let t = dt * r - 3.0;
        let t2 = t * t;
        let one_m = 1.0 - t2;
        let value = (15.0 / 16.0) * (8.0 / 15.0 - t + (2.0 / 3.0) * t * t2 - 0.2 * t * t2 * t2);
        let d1 = -(15.0 / 16.0) * one_m * one_m;
        let d2 = 3.75 * t * one_m;
        [value, d1 * dt, d2 * dt * dt]
    }
}

/// `η`, `η'` or `η''` at `r` (`order` 0, 1 or 2).
pub fn eval_cutoff(cutoff: &Cutoff, r: f64, order: usize) -> Result<f64> {
    if order > 2 {
        return Err(Error::Parameter(format!("cutoff derivative order {order} > 2")));
    }
    if !(r >= 0.0) {
        return Err(Error::Parameter(format!("negative radius {r}")));
    }
    Ok(cutoff.eval(r)[order])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trig {
    Sin,
    Cos,
}

impl Trig {
    pub fn for_first_edge(bc: BcKind) -> Self {
        match bc {
            BcKind::Dirichlet => Trig::Sin,
            BcKind::Neumann => Trig::Cos,
        }
    }

    /// `(T(a), T'(a), T''(a))`.
    pub fn eval(self, a: f64) -> [f64; 3] {
        let (s, c) = a.sin_cos();
        match self {
            Trig::Sin => [s, c, -s],
            Trig::Cos => [c, -s, -c],
        }
    }
}

/// One angular eigenfunction `trig(λθ)` of the vertex sector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    pub k: usize,
    pub lambda: f64,
    pub trig: Trig,
}

/// The first `k_max` angular eigenpairs for the given boundary-condition pair.
pub fn eigen_pairs(bc: [BcKind; 2], omega: f64, k_max: usize) -> Vec<EigenPair> {
    use BcKind::*;
    (1..=k_max)
        .map(|k| {
            let kf = k as f64;
            let (factor, trig) = match bc {
                [Dirichlet, Dirichlet] => (kf, Trig::Sin),
                [Dirichlet, Neumann] => (kf - 0.5, Trig::Sin),
                [Neumann, Dirichlet] => (kf - 0.5, Trig::Cos),
                [Neumann, Neumann] => (kf - 1.0, Trig::Cos),
            };
            EigenPair {
                k,
                lambda: factor * PI / omega,
                trig,
            }
        })
        .collect()
}

/// `r^λ trig(λθ)` with `λ = iπ/ω`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularFunction {
    pub index: f64,
    pub lambda: f64,
    pub trig: Trig,
}

impl SingularFunction {
    pub fn eval(&self, r: f64, theta: f64) -> f64 {
        r.powf(self.lambda) * self.trig.eval(self.lambda * theta)[0]
    }

    /// The dual function `r^{-λ} trig(λθ)`.
    pub fn eval_dual(&self, r: f64, theta: f64) -> Result<f64> {
        if r < R_FLOOR {
            return Err(Error::AtVertex { r });
        }
        Ok(r.powf(-self.lambda) * self.trig.eval(self.lambda * theta)[0])
    }
}

/// The singular functions a vertex contributes; empty when the vertex is
/// not singular for this boundary-condition pair.
pub fn singular_index_set(bc: [BcKind; 2], omega: f64) -> Vec<SingularFunction> {
    let make = |index: f64, trig: Trig| SingularFunction {
        index,
        lambda: index * PI / omega,
        trig,
    };
    if bc[0] == bc[1] {
        if omega > PI + ANGLE_EPS && omega <= 2.0 * PI + ANGLE_EPS {
            vec![make(1.0, Trig::for_first_edge(bc[0]))]
        } else {
            Vec::new()
        }
    } else {
        let trig = Trig::for_first_edge(bc[0]);
        if omega > 0.5 * PI + ANGLE_EPS && omega <= 1.5 * PI + ANGLE_EPS {
            vec![make(0.5, trig)]
        } else if omega > 1.5 * PI + ANGLE_EPS && omega <= 2.0 * PI + ANGLE_EPS {
            vec![make(0.5, trig), make(1.5, trig)]
        } else {
            Vec::new()
        }
    }
}

/// Orthogonal basis in `z` for a prism with the given face conditions.
///
/// `Z_n(z) = trig(ξ_n (z - origin))`; the bottom face decides sin/cos and a
/// change of type shifts the frequencies by one half.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZBasis {
    pub bc: [BcKind; 2],
    pub origin: f64,
    pub length: f64,
}

impl ZBasis {
    pub fn new(bc: [BcKind; 2], origin: f64, length: f64) -> Result<Self> {
        if !(length > 0.0) {
            return Err(Error::Parameter(format!("z-basis length {length} must be positive")));
        }
        Ok(Self { bc, origin, length })
    }

    /// `ξ_n`; only meaningful for modes with `Z_n ≢ 0`.
    pub fn xi(&self, n: usize) -> f64 {
        let nf = n as f64;
        let factor = if self.bc[0] == self.bc[1] { nf } else { nf - 0.5 };
        factor * PI / self.length
    }

    /// Whether `Z_0` vanishes identically.
    pub fn zero_mode_vanishes(&self) -> bool {
        !(self.bc == [BcKind::Neumann, BcKind::Neumann])
    }

    /// `(Z_n, Z_n', Z_n'')` at `z`.
    pub fn eval(&self, n: usize, z: f64) -> [f64; 3] {
        if n == 0 && self.zero_mode_vanishes() {
            return [0.0; 3];
        }
        let xi = self.xi(n);
        let [v, d1, d2] = Trig::for_first_edge(self.bc[0]).eval(xi * (z - self.origin));
        [v, d1 * xi, d2 * xi * xi]
    }
}

/// One enrichment term attached to a vertex: `trig`, exponent, cutoff and an
/// optional screening constant `A` of the modified Helmholtz operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularTerm {
    pub frame: PolarFrame,
    pub function: SingularFunction,
    pub cutoff: Cutoff,
    pub damping: f64,
}

/// Polar quantities shared by all products `g(r) s(r, θ)` at one point.
#[derive(Debug, Clone, Copy)]
struct PolarSample {
    r: f64,
    s: f64,
    /// `λ r^{λ-1} T(λθ)` and `λ r^{λ-1} T'(λθ)`.
    ds_dr: f64,
    ds_dtheta_over_r: f64,
    e_r: [f64; 2],
    e_theta: [f64; 2],
}

impl SingularTerm {
    pub fn new(frame: PolarFrame, function: SingularFunction, cutoff: Cutoff) -> Self {
        Self {
            frame,
            function,
            cutoff,
            damping: 0.0,
        }
    }

    pub fn with_damping(mut self, a: f64) -> Self {
        self.damping = a;
        self
    }

    pub fn lambda(&self) -> f64 {
        self.function.lambda
    }

    pub fn local_polar(&self, p: [f64; 2]) -> (f64, f64) {
        self.frame.to_local_polar(p)
    }

    fn polar_sample(&self, p: [f64; 2]) -> PolarSample {
        let (r, theta) = self.frame.to_local_polar(p);
        let lam = self.function.lambda;
        let [t0, t1, _] = self.function.trig.eval(lam * theta);
        let rc = r.max(R_FLOOR);
        let r_lm1 = rc.powf(lam - 1.0);
        PolarSample {
            r,
            s: r.powf(lam) * t0,
            ds_dr: lam * r_lm1 * t0,
            ds_dtheta_over_r: lam * r_lm1 * t1,
            e_r: self.frame.radial_direction(theta),
            e_theta: self.frame.angular_direction(theta),
        }
    }

    /// `g(r) s` with its planar gradient and planar Laplacian, given a
    /// radial profile `g` as `(g, g', g'')`.
    fn profile_product(&self, ps: &PolarSample, g: [f64; 3]) -> Jet<2> {
        let lam = self.function.lambda;
        let rc = ps.r.max(R_FLOOR);
        let radial = g[1] * ps.s + g[0] * ps.ds_dr;
        let angular = g[0] * ps.ds_dtheta_over_r;
        Jet {
            value: g[0] * ps.s,
            grad: [
                radial * ps.e_r[0] + angular * ps.e_theta[0],
                radial * ps.e_r[1] + angular * ps.e_theta[1],
            ],
            lap: ps.s * (g[2] + (1.0 + 2.0 * lam) * g[1] / rc),
        }
    }

    /// `η` times `exp(-a r)` as a radial profile.
    fn damped_cutoff(&self, r: f64, a: f64) -> [f64; 3] {
        let [e0, e1, e2] = self.cutoff.eval(r);
        if a == 0.0 {
            return [e0, e1, e2];
        }
        let ex = (-a * r).exp();
        [ex * e0, ex * (e1 - a * e0), ex * (e2 - 2.0 * a * e1 + a * a * e0)]
    }

    /// `η s` (times `exp(-A r)` for damped terms) with exact planar gradient
    /// and Laplacian.
    pub fn eval(&self, p: [f64; 2]) -> Jet<2> {
        let (r, _) = self.frame.to_local_polar(p);
        if r >= self.cutoff.support() {
            return Jet::constant(0.0);
        }
        let ps = self.polar_sample(p);
        self.profile_product(&ps, self.damped_cutoff(r, self.damping))
    }

    /// The bare product `η s` with exact planar derivatives.
    pub fn eval_undamped(&self, p: [f64; 2]) -> Jet<2> {
        let (r, _) = self.frame.to_local_polar(p);
        if r >= self.cutoff.support() {
            return Jet::constant(0.0);
        }
        let ps = self.polar_sample(p);
        self.profile_product(&ps, self.cutoff.eval(r))
    }

    /// The `n`-th edge mode `Z_n(z) exp(-ξ̃_n r) η s` (with a factor ½ at
    /// `n = 0`), where `ξ̃_n = (ξ_n² + A²)^{1/2}`, as a 3D jet.
    pub fn eval_mode(&self, zb: &ZBasis, n: usize, p: Point) -> Jet<3> {
        let [z0, z1, z2] = zb.eval(n, p[2]);
        if z0 == 0.0 && z1 == 0.0 && z2 == 0.0 {
            return Jet::constant(0.0);
        }
        let (r, _) = self.frame.to_local_polar([p[0], p[1]]);
        if r >= self.cutoff.support() {
            return Jet::constant(0.0);
        }
        let xi = if n == 0 && zb.zero_mode_vanishes() { 0.0 } else { zb.xi(n) };
        let xi_damped = (xi * xi + self.damping * self.damping).sqrt();
        let ps = self.polar_sample([p[0], p[1]]);
        let plane = self.profile_product(&ps, self.damped_cutoff(r, xi_damped));
        let half = if n == 0 { 0.5 } else { 1.0 };
        Jet {
            value: half * z0 * plane.value,
            grad: [
                half * z0 * plane.grad[0],
                half * z0 * plane.grad[1],
                half * z1 * plane.value,
            ],
            lap: half * (z0 * plane.lap + z2 * plane.value),
        }
    }

    /// The dual singular function `r^{-λ} trig(λθ)`.
    pub fn eval_dual(&self, p: [f64; 2]) -> Result<f64> {
        let (r, theta) = self.frame.to_local_polar(p);
        self.function.eval_dual(r, theta)
    }

    /// `(η s_{-λ}, Δ(η s_{-λ}))`, using that `s_{-λ}` is harmonic.
    pub fn eval_dual_cutoff(&self, p: [f64; 2]) -> Result<(f64, f64)> {
        let (r, theta) = self.frame.to_local_polar(p);
        let dual = self.function.eval_dual(r, theta)?;
        let [e0, e1, e2] = self.cutoff.eval(r);
        let lam = self.function.lambda;
        Ok((e0 * dual, dual * (e2 + (1.0 - 2.0 * lam) * e1 / r)))
    }
}

/// Builds one term per singular function of every flagged vertex of `domain`.
/// Fails when two cutoff supports overlap.
pub fn terms_for_domain(domain: &DomainSpec, cutoff: Cutoff) -> Result<Vec<SingularTerm>> {
    let mut terms = Vec::new();
    for sv in &domain.singular_vertices {
        for f in singular_index_set(sv.bc, sv.frame.omega) {
            terms.push(SingularTerm::new(sv.frame, f, cutoff));
        }
    }
    check_disjoint_supports(&terms)?;
    Ok(terms)
}

/// Terms at distinct vertices must have disjoint cutoff balls.
pub fn check_disjoint_supports(terms: &[SingularTerm]) -> Result<()> {
    for (i, a) in terms.iter().enumerate() {
        for b in &terms[i + 1..] {
            if a.frame.vertex == b.frame.vertex {
                continue;
            }
            let d = (a.frame.vertex[0] - b.frame.vertex[0]).hypot(a.frame.vertex[1] - b.frame.vertex[1]);
            if d < a.cutoff.support() + b.cutoff.support() {
                return Err(Error::Parameter(format!(
                    "cutoff supports around {:?} and {:?} overlap",
                    a.frame.vertex, b.frame.vertex
                )));
            }
        }
    }
    Ok(())
}

/// Truncated edge flux intensity `Φ^N(r, z) = ½γ_0 Z_0 e^{-ξ̃_0 r} + Σ γ_n e^{-ξ̃_n r} Z_n(z)`
/// with its partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhiValue {
    pub value: f64,
    pub dr: f64,
    pub dz: f64,
    pub drr: f64,
    pub drz: f64,
    pub dzz: f64,
}

pub fn truncated_phi(gamma: &[f64], zb: &ZBasis, damping: f64, r: f64, z: f64) -> PhiValue {
    let mut out = PhiValue::default();
    for (n, &g) in gamma.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let [z0, z1, z2] = zb.eval(n, z);
        let xi = if n == 0 && zb.zero_mode_vanishes() { 0.0 } else { zb.xi(n) };
        let k = (xi * xi + damping * damping).sqrt();
        let c = if n == 0 { 0.5 * g } else { g } * (-k * r).exp();
        out.value += c * z0;
        out.dr -= c * k * z0;
        out.dz += c * z1;
        out.drr += c * k * k * z0;
        out.drz -= c * k * z1;
        out.dzz += c * z2;
    }
    out
}

/// `f̃ = f + Σ_k c_k (Δψ_k - A²ψ_k)` for linear enrichment coefficients `c_k`
/// multiplying basis functions `ψ_k`.
pub fn enriched_source(f: f64, basis: &[Jet<3>], coeffs: &[f64], a_squared: f64) -> f64 {
    basis
        .iter()
        .zip(coeffs)
        .fold(f, |acc, (psi, c)| acc + c * (psi.lap - a_squared * psi.value))
}
