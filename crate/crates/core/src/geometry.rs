//! Polygonal domains, prisms, local polar frames and uniform samplers.

use std::f64::consts::{PI, TAU};

use rand::distributions::{Distribution, Open01, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Sample points are always stored with three coordinates; 2D domains leave `z = 0`.
pub type Point = [f64; 3];

const ANGLE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BcKind {
    Dirichlet,
    Neumann,
}

/// Local polar coordinates `(r, θ)` around a polygon vertex.
///
/// `θ = 0` runs along the edge leaving the vertex (in polygon order) and the
/// interior angle `ω` is swept counterclockwise from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarFrame {
    pub vertex: [f64; 2],
    pub base_angle: f64,
    pub omega: f64,
    pub counterclockwise: bool,
}

impl PolarFrame {
    pub fn new(vertex: [f64; 2], base_angle: f64, omega: f64) -> Result<Self> {
        if !(omega > 0.0 && omega <= TAU + ANGLE_EPS) {
            return Err(Error::Parameter(format!(
                "interior angle {omega} outside (0, 2π]"
            )));
        }
        Ok(Self {
            vertex,
            base_angle,
            omega,
            counterclockwise: true,
        })
    }

    /// Returns `(r, θ)` with `θ ∈ [0, 2π)`; the vertex itself maps to `(0, 0)`.
    pub fn to_local_polar(&self, p: [f64; 2]) -> (f64, f64) {
        let dx = p[0] - self.vertex[0];
        let dy = p[1] - self.vertex[1];
        let r = dx.hypot(dy);
        if r == 0.0 {
            return (0.0, 0.0);
        }
        let phi = dy.atan2(dx);
        let raw = if self.counterclockwise {
            phi - self.base_angle
        } else {
            self.base_angle - phi
        };
        let mut theta = raw.rem_euclid(TAU);
        if theta >= TAU {
            theta = 0.0;
        }
        (r, theta)
    }

    pub fn from_local_polar(&self, r: f64, theta: f64) -> [f64; 2] {
        let [ux, uy] = self.radial_direction(theta);
        [self.vertex[0] + r * ux, self.vertex[1] + r * uy]
    }

    /// Unit vector `e_r` at local angle `θ`.
    pub fn radial_direction(&self, theta: f64) -> [f64; 2] {
        let a = self.global_angle(theta);
        [a.cos(), a.sin()]
    }

    /// Unit vector `e_θ` (direction of increasing local angle).
    pub fn angular_direction(&self, theta: f64) -> [f64; 2] {
        let a = self.global_angle(theta);
        if self.counterclockwise {
            [-a.sin(), a.cos()]
        } else {
            [a.sin(), -a.cos()]
        }
    }

    fn global_angle(&self, theta: f64) -> f64 {
        if self.counterclockwise {
            self.base_angle + theta
        } else {
            self.base_angle - theta
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySegment {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub bc: BcKind,
    pub outward_normal: [f64; 2],
}

impl BoundarySegment {
    pub fn length(&self) -> f64 {
        (self.b[0] - self.a[0]).hypot(self.b[1] - self.a[1])
    }

    pub fn at(&self, t: f64) -> [f64; 2] {
        [
            self.a[0] + t * (self.b[0] - self.a[0]),
            self.a[1] + t * (self.b[1] - self.a[1]),
        ]
    }

    /// Distance from `p` to the closed segment.
    pub fn distance(&self, p: [f64; 2]) -> f64 {
        let d = [self.b[0] - self.a[0], self.b[1] - self.a[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let t = (((p[0] - self.a[0]) * d[0] + (p[1] - self.a[1]) * d[1]) / len2).clamp(0.0, 1.0);
        let q = self.at(t);
        (p[0] - q[0]).hypot(p[1] - q[1])
    }
}

/// A vertex whose angle and boundary conditions produce a singular solution component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularVertex {
    pub index: usize,
    pub frame: PolarFrame,
    /// Boundary conditions on the `θ = 0` edge and on the `θ = ω` edge.
    pub bc: [BcKind; 2],
}

/// Extrusion of the polygon along `z` into a prism.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrusion {
    pub z_min: f64,
    pub z_max: f64,
    pub bc_bottom: BcKind,
    pub bc_top: BcKind,
}

impl Extrusion {
    pub fn length(&self) -> f64 {
        self.z_max - self.z_min
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measures {
    pub volume: f64,
    pub dirichlet: f64,
    pub neumann: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BoundaryPiece {
    /// A polygon edge (a lateral rectangle for prisms).
    Edge(usize),
    /// Bottom (`false`) or top (`true`) face of a prism.
    ZFace(bool),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub name: String,
    pub polygon: Vec<[f64; 2]>,
    pub segments: Vec<BoundarySegment>,
    pub singular_vertices: Vec<SingularVertex>,
    pub extrusion: Option<Extrusion>,
}

impl DomainSpec {
    /// Builds a domain from a counterclockwise vertex list; `edge_bc[i]` labels
    /// the edge from vertex `i` to vertex `i + 1`.
    pub fn from_polygon(
        name: impl Into<String>,
        polygon: Vec<[f64; 2]>,
        edge_bc: Vec<BcKind>,
        extrusion: Option<Extrusion>,
    ) -> Result<Self> {
        let n = polygon.len();
        if n < 3 {
            return Err(Error::Config("a polygon needs at least 3 vertices".into()));
        }
        if edge_bc.len() != n {
            return Err(Error::Config(format!(
                "{} boundary labels given for {n} edges",
                edge_bc.len()
            )));
        }
        if signed_area(&polygon) <= 0.0 {
            return Err(Error::Config(
                "polygon vertices must be listed counterclockwise".into(),
            ));
        }
        let mut segments = Vec::with_capacity(n);
        for i in 0..n {
            let a = polygon[i];
            let b = polygon[(i + 1) % n];
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            if len == 0.0 {
                return Err(Error::Config(format!("edge {i} has zero length")));
            }
            segments.push(BoundarySegment {
                a,
                b,
                bc: edge_bc[i],
                outward_normal: [(b[1] - a[1]) / len, -(b[0] - a[0]) / len],
            });
        }
        if !is_simple(&segments) {
            return Err(Error::Config("polygon is self-intersecting".into()));
        }
        if let Some(ext) = &extrusion {
            if !(ext.z_max > ext.z_min) {
                return Err(Error::Config("extrusion needs z_max > z_min".into()));
            }
        }
        let has_dirichlet = edge_bc.contains(&BcKind::Dirichlet)
            || extrusion.is_some_and(|e| {
                e.bc_bottom == BcKind::Dirichlet || e.bc_top == BcKind::Dirichlet
            });
        if !has_dirichlet {
            return Err(Error::Config("the Dirichlet boundary must be nonempty".into()));
        }
        let mut domain = Self {
            name: name.into(),
            polygon,
            segments,
            singular_vertices: Vec::new(),
            extrusion,
        };
        domain.singular_vertices = domain.screen_singular_vertices();
        Ok(domain)
    }

    pub fn dim(&self) -> usize {
        if self.extrusion.is_some() {
            3
        } else {
            2
        }
    }

    /// Local frame at polygon vertex `i`.
    pub fn vertex_frame(&self, i: usize) -> PolarFrame {
        let n = self.polygon.len();
        let v = self.polygon[i];
        let next = self.polygon[(i + 1) % n];
        let prev = self.polygon[(i + n - 1) % n];
        let base = (next[1] - v[1]).atan2(next[0] - v[0]);
        let back = (prev[1] - v[1]).atan2(prev[0] - v[0]);
        let mut omega = (back - base).rem_euclid(TAU);
        if omega == 0.0 {
            omega = TAU;
        }
        PolarFrame {
            vertex: v,
            base_angle: base,
            omega,
            counterclockwise: true,
        }
    }

    /// Boundary conditions on the `θ = 0` and `θ = ω` edges at vertex `i`.
    pub fn vertex_bc(&self, i: usize) -> [BcKind; 2] {
        let n = self.polygon.len();
        [self.segments[i].bc, self.segments[(i + n - 1) % n].bc]
    }

    /// Vertices that satisfy the singularity condition: `π < ω ≤ 2π` when the
    /// boundary condition keeps its type, `π/2 < ω ≤ 2π` when it changes.
    pub fn screen_singular_vertices(&self) -> Vec<SingularVertex> {
        (0..self.polygon.len())
            .filter_map(|i| {
                let frame = self.vertex_frame(i);
                let bc = self.vertex_bc(i);
                let threshold = if bc[0] == bc[1] { PI } else { PI / 2.0 };
                (frame.omega > threshold + ANGLE_EPS).then_some(SingularVertex {
                    index: i,
                    frame,
                    bc,
                })
            })
            .collect()
    }

    pub fn area_2d(&self) -> f64 {
        signed_area(&self.polygon)
    }

    pub fn measures(&self) -> Measures {
        let area = self.area_2d();
        let (mut dir, mut neu) = (0.0, 0.0);
        let height = self.extrusion.map_or(1.0, |e| e.length());
        for seg in &self.segments {
            let m = seg.length() * height;
            match seg.bc {
                BcKind::Dirichlet => dir += m,
                BcKind::Neumann => neu += m,
            }
        }
        let volume = match &self.extrusion {
            None => area,
            Some(ext) => {
                for bc in [ext.bc_bottom, ext.bc_top] {
                    match bc {
                        BcKind::Dirichlet => dir += area,
                        BcKind::Neumann => neu += area,
                    }
                }
                area * ext.length()
            }
        };
        Measures {
            volume,
            dirichlet: dir,
            neumann: neu,
        }
    }

    /// Axis-aligned bounding box `(min, max)`; the `z` range is `[0, 0]` in 2D.
    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY, f64::INFINITY, 0.0];
        let mut hi = [f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0];
        for v in &self.polygon {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        if let Some(ext) = &self.extrusion {
            lo[2] = ext.z_min;
            hi[2] = ext.z_max;
        }
        (lo, hi)
    }

    /// Strict interior test in the polygon (boundary points are outside).
    pub fn contains_2d(&self, p: [f64; 2]) -> bool {
        let scale = self.boundary_tolerance();
        if self.segments.iter().any(|s| s.distance(p) <= scale) {
            return false;
        }
        let mut inside = false;
        let n = self.polygon.len();
        let mut j = n - 1;
        for i in 0..n {
            let (vi, vj) = (self.polygon[i], self.polygon[j]);
            if (vi[1] > p[1]) != (vj[1] > p[1]) {
                let x_cross = vj[0] + (p[1] - vj[1]) * (vi[0] - vj[0]) / (vi[1] - vj[1]);
                if p[0] < x_cross {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    /// Closed polygon test: interior or within tolerance of the boundary.
    pub fn contains_closed_2d(&self, p: [f64; 2]) -> bool {
        let scale = self.boundary_tolerance();
        self.segments.iter().any(|s| s.distance(p) <= scale) || self.contains_2d(p)
    }

    pub fn contains(&self, p: Point) -> bool {
        if let Some(ext) = &self.extrusion {
            if !(p[2] > ext.z_min && p[2] < ext.z_max) {
                return false;
            }
        }
        self.contains_2d([p[0], p[1]])
    }

    fn boundary_tolerance(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        1e-14 * (hi[0] - lo[0]).max(hi[1] - lo[1])
    }

    fn boundary_pieces(&self, kind: BcKind) -> Vec<(BoundaryPiece, f64)> {
        let height = self.extrusion.map_or(1.0, |e| e.length());
        let mut out: Vec<(BoundaryPiece, f64)> = self
            .segments
            .iter()
            .enumerate()
            .filter(|(_, s)| s.bc == kind)
            .map(|(i, s)| (BoundaryPiece::Edge(i), s.length() * height))
            .collect();
        if let Some(ext) = &self.extrusion {
            let area = self.area_2d();
            if ext.bc_bottom == kind {
                out.push((BoundaryPiece::ZFace(false), area));
            }
            if ext.bc_top == kind {
                out.push((BoundaryPiece::ZFace(true), area));
            }
        }
        out
    }

    fn sample_polygon_point<R: Rng>(&self, rng: &mut R) -> [f64; 2] {
        let (lo, hi) = self.bounding_box();
        loop {
            let x = lo[0] + (hi[0] - lo[0]) * rng.sample::<f64, _>(Open01);
            let y = lo[1] + (hi[1] - lo[1]) * rng.sample::<f64, _>(Open01);
            if self.contains_2d([x, y]) {
                return [x, y];
            }
        }
    }

    fn acceptance_ratio(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        let mut ratio = self.area_2d() / ((hi[0] - lo[0]) * (hi[1] - lo[1]));
        if !ratio.is_finite() {
            ratio = 0.0;
        }
        ratio
    }

    /// `n` i.i.d. uniform interior points by rejection from the bounding box.
    pub fn sample_interior_with<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Vec<Point>> {
        let ratio = self.acceptance_ratio();
        if ratio < 1e-3 {
            return Err(Error::DegenerateDomain { ratio });
        }
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let [x, y] = self.sample_polygon_point(rng);
            let z = match &self.extrusion {
                Some(ext) => ext.z_min + ext.length() * rng.sample::<f64, _>(Open01),
                None => 0.0,
            };
            out.push([x, y, z]);
        }
        Ok(out)
    }

    pub fn sample_interior(&self, n: usize, seed: u64) -> Result<Vec<Point>> {
        if n == 0 {
            return Err(Error::Config("interior sample count must be at least 1".into()));
        }
        self.sample_interior_with(n, &mut rng::stream(seed, Stream::Interior))
    }

    fn sample_boundary_kind<R: Rng>(
        &self,
        kind: BcKind,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<BoundaryPoint>> {
        if n == 0 {
            return Ok(Vec::new());
        }
        let pieces = self.boundary_pieces(kind);
        if pieces.is_empty() {
            return Err(Error::Config(format!(
                "{n} {kind:?} boundary samples requested but that boundary part is empty"
            )));
        }
        let chooser = WeightedIndex::new(pieces.iter().map(|p| p.1))
            .map_err(|e| Error::Config(format!("boundary weights: {e}")))?;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let piece = pieces[chooser.sample(rng)].0;
            let bp = match piece {
                BoundaryPiece::Edge(i) => {
                    let seg = &self.segments[i];
                    let t: f64 = rng.sample(Open01);
                    let [x, y] = seg.at(t);
                    let z = match &self.extrusion {
                        Some(ext) => ext.z_min + ext.length() * rng.sample::<f64, _>(Open01),
                        None => 0.0,
                    };
                    BoundaryPoint {
                        point: [x, y, z],
                        normal: [seg.outward_normal[0], seg.outward_normal[1], 0.0],
                    }
                }
                BoundaryPiece::ZFace(top) => {
                    let ext = self.extrusion.expect("z face without extrusion");
                    let [x, y] = self.sample_polygon_point(rng);
                    let (z, nz) = if top {
                        (ext.z_max, 1.0)
                    } else {
                        (ext.z_min, -1.0)
                    };
                    BoundaryPoint {
                        point: [x, y, z],
                        normal: [0.0, 0.0, nz],
                    }
                }
            };
            out.push(bp);
        }
        Ok(out)
    }

    /// Uniform points on `Γ_D` and `Γ_N`, each carrying its outward normal.
    pub fn sample_boundary(
        &self,
        n_dirichlet: usize,
        n_neumann: usize,
        seed: u64,
    ) -> Result<(Vec<BoundaryPoint>, Vec<BoundaryPoint>)> {
        if n_dirichlet == 0 {
            return Err(Error::Config(
                "Dirichlet sample count must be at least 1".into(),
            ));
        }
        let dir = self.sample_boundary_kind(
            BcKind::Dirichlet,
            n_dirichlet,
            &mut rng::stream(seed, Stream::Dirichlet),
        )?;
        let neu = self.sample_boundary_kind(
            BcKind::Neumann,
            n_neumann,
            &mut rng::stream(seed, Stream::Neumann),
        )?;
        Ok((dir, neu))
    }

    /// Regular grid bookkeeping helper: which coordinates a 2D slice of this domain spans.
    pub fn z_range(&self) -> Option<(f64, f64)> {
        self.extrusion.map(|e| (e.z_min, e.z_max))
    }
}

fn signed_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        * 0.5
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_intersect(p: &BoundarySegment, q: &BoundarySegment) -> bool {
    let d1 = orient(q.a, q.b, p.a);
    let d2 = orient(q.a, q.b, p.b);
    let d3 = orient(p.a, p.b, q.a);
    let d4 = orient(p.a, p.b, q.b);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |s: &BoundarySegment, x: [f64; 2]| s.distance(x) == 0.0;
    on(q, p.a) || on(q, p.b) || on(p, q.a) || on(p, q.b)
}

fn is_simple(segments: &[BoundarySegment]) -> bool {
    let n = segments.len();
    for i in 0..n {
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(&segments[i], &segments[j]) {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub point: Point,
    pub normal: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleCounts {
    pub interior: usize,
    pub dirichlet: usize,
    pub neumann: usize,
}

impl SampleCounts {
    /// Splits `n_boundary` between `Γ_D` and `Γ_N` in proportion to their measures.
    pub fn proportional(domain: &DomainSpec, interior: usize, n_boundary: usize) -> Self {
        let m = domain.measures();
        if m.neumann == 0.0 {
            return Self {
                interior,
                dirichlet: n_boundary,
                neumann: 0,
            };
        }
        let share = m.dirichlet / (m.dirichlet + m.neumann);
        let dirichlet = ((n_boundary as f64 * share).round() as usize).clamp(1, n_boundary.max(1));
        Self {
            interior,
            dirichlet,
            neumann: n_boundary.saturating_sub(dirichlet),
        }
    }
}

/// A fixed collocation set for one training run.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub interior: Vec<Point>,
    pub dirichlet: Vec<BoundaryPoint>,
    pub neumann: Vec<BoundaryPoint>,
    pub measures: Measures,
    pub seed: u64,
    pub domain_name: String,
}

impl SampleSet {
    pub fn draw(domain: &DomainSpec, counts: SampleCounts, seed: u64) -> Result<Self> {
        let interior = domain.sample_interior(counts.interior, seed)?;
        let (dirichlet, neumann) = domain.sample_boundary(counts.dirichlet, counts.neumann, seed)?;
        Ok(Self {
            interior,
            dirichlet,
            neumann,
            measures: domain.measures(),
            seed,
            domain_name: domain.name.clone(),
        })
    }

    pub fn counts(&self) -> SampleCounts {
        SampleCounts {
            interior: self.interior.len(),
            dirichlet: self.dirichlet.len(),
            neumann: self.neumann.len(),
        }
    }
}

/// `(-1,1)² \ ([0,1) × (-1,0])`, all Dirichlet.
pub fn lshape() -> DomainSpec {
    DomainSpec::from_polygon(
        "lshape2d",
        lshape_vertices(),
        vec![BcKind::Dirichlet; 6],
        None,
    )
    .expect("built-in L-shape")
}

fn lshape_vertices() -> Vec<[f64; 2]> {
    vec![
        [-1.0, -1.0],
        [0.0, -1.0],
        [0.0, 0.0],
        [1.0, 0.0],
        [1.0, 1.0],
        [-1.0, 1.0],
    ]
}

/// `(0,1)²`, all Dirichlet.
pub fn unit_square() -> DomainSpec {
    DomainSpec::from_polygon(
        "unit_square",
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        vec![BcKind::Dirichlet; 4],
        None,
    )
    .expect("built-in square")
}

/// `(0,1)²` with `Γ_N = {(x, 0) : 0 < x < 1/2}`.
pub fn square_mixed() -> DomainSpec {
    use BcKind::*;
    DomainSpec::from_polygon(
        "square_mixed",
        vec![[0.0, 0.0], [0.5, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        vec![Neumann, Dirichlet, Dirichlet, Dirichlet, Dirichlet],
        None,
    )
    .expect("built-in mixed square")
}

/// L-shape × (-1, 1), all Dirichlet.
pub fn lshape_prism() -> DomainSpec {
    DomainSpec::from_polygon(
        "lshape_prism",
        lshape_vertices(),
        vec![BcKind::Dirichlet; 6],
        Some(Extrusion {
            z_min: -1.0,
            z_max: 1.0,
            bc_bottom: BcKind::Dirichlet,
            bc_top: BcKind::Dirichlet,
        }),
    )
    .expect("built-in prism")
}

/// `(-π, π)³` with four Dirichlet/Neumann switches at the edge midpoints
/// `(0,-π)`, `(π,0)`, `(0,π)`, `(-π,0)` and Neumann faces at `z = ±π`.
pub fn cube_mixed_edges() -> DomainSpec {
    use BcKind::*;
    DomainSpec::from_polygon(
        "cube_mixed_edges",
        vec![
            [-PI, -PI],
            [0.0, -PI],
            [PI, -PI],
            [PI, 0.0],
            [PI, PI],
            [0.0, PI],
            [-PI, PI],
            [-PI, 0.0],
        ],
        vec![
            Dirichlet, Neumann, Neumann, Dirichlet, Dirichlet, Neumann, Neumann, Dirichlet,
        ],
        Some(Extrusion {
            z_min: -PI,
            z_max: PI,
            bc_bottom: Neumann,
            bc_top: Neumann,
        }),
    )
    .expect("built-in cube")
}

pub fn builtin(name: &str) -> Option<DomainSpec> {
    match name {
        "lshape2d" => Some(lshape()),
        "unit_square" => Some(unit_square()),
        "square_mixed" => Some(square_mixed()),
        "lshape_prism" => Some(lshape_prism()),
        "cube_mixed_edges" => Some(cube_mixed_edges()),
        _ => None,
    }
}
