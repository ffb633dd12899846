//! Fully connected tanh networks with exact spatial derivatives.
//!
//! Parameters live in one flat vector. For every layer `ℓ = 1..L` the
//! row-major `n_ℓ × n_{ℓ-1}` weight matrix comes first, then the `n_ℓ`
//! biases. Hidden layers use `tanh`; the output layer is affine.
//!
//! [`Tape`] evaluates a block of points at once. Each neuron carries up to
//! `2 + d` channels (value, `d` gradient entries, Laplacian), propagated by
//!
//! ```text
//! h  = t(z),   ∂h = t'(z) ∂z,   Δh = t''(z) |∂z|² + t'(z) Δz
//! ```
//!
//! and [`Tape::backward`] pulls per-sample adjoints of the output channels
//! back to the parameters through the same recursion.

use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::rng::{self, Stream};

/// Number of points evaluated together by a [`Tape`].
pub const BLOCK: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpArch {
    widths: Vec<usize>,
}

impl MlpArch {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 3 {
            return Err(Error::Config(format!(
                "network needs at least one hidden layer, got widths {widths:?}"
            )));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::Config(format!("zero layer width in {widths:?}")));
        }
        if widths[0] > 3 {
            return Err(Error::Config(format!("input dimension {} > 3", widths[0])));
        }
        if *widths.last().unwrap() != 1 {
            return Err(Error::Config("network output must be scalar".into()));
        }
        Ok(Self { widths })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    /// Number of affine layers `L`.
    pub fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn n_params(&self) -> usize {
        self.widths.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }

    /// Offset of layer `l`'s weights (`l` is 1-based, as in `A_ℓ`).
    pub fn weight_offset(&self, l: usize) -> usize {
        self.widths[..l]
            .windows(2)
            .map(|w| w[1] * (w[0] + 1))
            .sum()
    }

    pub fn bias_offset(&self, l: usize) -> usize {
        self.weight_offset(l) + self.widths[l] * self.widths[l - 1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    arch: MlpArch,
    flat: Vec<f64>,
}

impl MlpParams {
    pub fn zeros(arch: &MlpArch) -> Self {
        Self {
            flat: vec![0.0; arch.n_params()],
            arch: arch.clone(),
        }
    }

    /// Xavier-uniform weights, zero biases.
    pub fn init_with<R: Rng>(arch: &MlpArch, rng: &mut R) -> Self {
        let mut p = Self::zeros(arch);
        for l in 1..=arch.n_layers() {
            let (n_in, n_out) = (arch.widths[l - 1], arch.widths[l]);
            let bound = (6.0 / (n_in + n_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            let off = arch.weight_offset(l);
            for w in &mut p.flat[off..off + n_in * n_out] {
                *w = dist.sample(rng);
            }
        }
        p
    }

    pub fn init(arch: &MlpArch, seed: u64) -> Self {
        Self::init_with(arch, &mut rng::stream(seed, Stream::Init))
    }

    pub fn from_flat(arch: &MlpArch, flat: Vec<f64>) -> Result<Self> {
        if flat.len() != arch.n_params() {
            return Err(Error::Parameter(format!(
                "flat vector has {} entries, architecture needs {}",
                flat.len(),
                arch.n_params()
            )));
        }
        Ok(Self {
            arch: arch.clone(),
            flat,
        })
    }

    /// Builds parameters from per-layer `(weights, biases)` pairs.
    pub fn from_layers(arch: &MlpArch, layers: &[(Vec<f64>, Vec<f64>)]) -> Result<Self> {
        if layers.len() != arch.n_layers() {
            return Err(Error::Parameter("layer count mismatch".into()));
        }
        let mut flat = Vec::with_capacity(arch.n_params());
        for (l, (w, b)) in layers.iter().enumerate() {
            let (n_in, n_out) = (arch.widths[l], arch.widths[l + 1]);
            if w.len() != n_in * n_out || b.len() != n_out {
                return Err(Error::Parameter(format!("layer {} has the wrong shape", l + 1)));
            }
            flat.extend_from_slice(w);
            flat.extend_from_slice(b);
        }
        Self::from_flat(arch, flat)
    }

    pub fn layers(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        (1..=self.arch.n_layers())
            .map(|l| (self.weights(l).to_vec(), self.biases(l).to_vec()))
            .collect()
    }

    pub fn arch(&self) -> &MlpArch {
        &self.arch
    }

    pub fn flat(&self) -> &[f64] {
        &self.flat
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.flat
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.flat
    }

    pub fn weights(&self, l: usize) -> &[f64] {
        let off = self.arch.weight_offset(l);
        &self.flat[off..off + self.arch.widths[l] * self.arch.widths[l - 1]]
    }

    pub fn biases(&self, l: usize) -> &[f64] {
        let off = self.arch.bias_offset(l);
        &self.flat[off..off + self.arch.widths[l]]
    }

    pub fn max_abs(&self) -> f64 {
        self.flat.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Value, spatial gradient and spatial Laplacian of a network at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub value: f64,
    pub grad: Vec<f64>,
    pub lap: f64,
}

/// Single-point evaluation by second-order forward propagation, one input
/// direction at a time.
pub fn forward_with_derivatives(params: &MlpParams, x: &[f64]) -> EvalResult {
    let arch = &params.arch;
    let d = arch.input_dim();
    assert_eq!(x.len(), d, "input dimension mismatch");
    // first[k][j], second[k][j]: derivatives of neuron j along direction k.
    let mut value = x.to_vec();
    let mut first: Vec<Vec<f64>> = (0..d)
        .map(|k| (0..d).map(|i| if i == k { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut second: Vec<Vec<f64>> = vec![vec![0.0; d]; d];
    let last = arch.n_layers();
    for l in 1..=last {
        let (n_in, n_out) = (arch.widths[l - 1], arch.widths[l]);
        let w = params.weights(l);
        let b = params.biases(l);
        let affine = |v: &[f64], bias: bool| -> Vec<f64> {
            (0..n_out)
                .map(|j| {
                    let row = &w[j * n_in..(j + 1) * n_in];
                    let s: f64 = row.iter().zip(v).map(|(a, c)| a * c).sum();
                    if bias {
                        s + b[j]
                    } else {
                        s
                    }
                })
                .collect()
        };
        let z = affine(&value, true);
        let zf: Vec<Vec<f64>> = first.iter().map(|v| affine(v, false)).collect();
        let zs: Vec<Vec<f64>> = second.iter().map(|v| affine(v, false)).collect();
        if l == last {
            value = z;
            first = zf;
            second = zs;
        } else {
            let t: Vec<f64> = z.iter().map(|v| v.tanh()).collect();
            let tp: Vec<f64> = t.iter().map(|t| 1.0 - t * t).collect();
            let tpp: Vec<f64> = t.iter().zip(&tp).map(|(t, p)| -2.0 * t * p).collect();
            second = (0..d)
                .map(|k| {
                    (0..n_out)
                        .map(|j| tpp[j] * zf[k][j] * zf[k][j] + tp[j] * zs[k][j])
                        .collect()
                })
                .collect();
            first = (0..d)
                .map(|k| (0..n_out).map(|j| tp[j] * zf[k][j]).collect())
                .collect();
            value = t;
        }
    }
    EvalResult {
        value: value[0],
        grad: (0..d).map(|k| first[k][0]).collect(),
        lap: (0..d).map(|k| second[k][0]).sum(),
    }
}

/// Which output channels a [`Tape`] propagates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Value,
    Gradient,
    Laplacian,
}

impl Order {
    pub fn channels(self, d: usize) -> usize {
        match self {
            Order::Value => 1,
            Order::Gradient => 1 + d,
            Order::Laplacian => 2 + d,
        }
    }
}

/// Batched forward/backward workspace for one network and one block of points.
///
/// Activations are stored neuron-major, then channel, then sample:
/// entry `(j, c, b)` sits at `(j * C + c) * BLOCK + b`.
#[derive(Debug, Clone)]
pub struct Tape {
    arch: MlpArch,
    order: Order,
    d: usize,
    c: usize,
    len: usize,
    inputs: Vec<f64>,
    /// Pre-activations per layer `1..=L` (index `l - 1`).
    pre: Vec<Vec<f64>>,
    /// Post-activations per hidden layer `1..L` (index `l - 1`).
    post: Vec<Vec<f64>>,
    seeds: Vec<f64>,
    bar: Vec<f64>,
    bar_prev: Vec<f64>,
}

impl Tape {
    pub fn new(arch: &MlpArch, order: Order) -> Self {
        let d = arch.input_dim();
        let c = order.channels(d);
        let l = arch.n_layers();
        let size = |w: usize| vec![0.0; w * c * BLOCK];
        let max_w = *arch.widths.iter().max().unwrap();
        Self {
            arch: arch.clone(),
            order,
            d,
            c,
            len: 0,
            inputs: vec![0.0; d * BLOCK],
            pre: (1..=l).map(|k| size(arch.widths[k])).collect(),
            post: (1..l).map(|k| size(arch.widths[k])).collect(),
            seeds: vec![0.0; c * BLOCK],
            bar: size(max_w),
            bar_prev: size(max_w),
        }
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Evaluates the network at up to [`BLOCK`] points; only the first
    /// `input_dim` coordinates of each point are used.
    pub fn forward(&mut self, params: &MlpParams, points: &[Point]) {
        debug_assert_eq!(params.arch, self.arch);
        assert!(points.len() <= BLOCK);
        self.len = points.len();
        let (d, c) = (self.d, self.c);
        self.inputs.fill(0.0);
        for (b, p) in points.iter().enumerate() {
            for i in 0..d {
                self.inputs[i * BLOCK + b] = p[i];
            }
        }
        let last = self.arch.n_layers();
        for l in 1..=last {
            let n_in = self.arch.widths[l - 1];
            let n_out = self.arch.widths[l];
            let w = params.weights(l);
            let bias = params.biases(l);
            let cb = c * BLOCK;
            if l == 1 {
                let z = &mut self.pre[0];
                for j in 0..n_out {
                    let row = &mut z[j * cb..(j + 1) * cb];
                    let (val, rest) = row.split_at_mut(BLOCK);
                    val.fill(bias[j]);
                    for i in 0..d {
                        let wji = w[j * n_in + i];
                        axpy(wji, &self.inputs[i * BLOCK..(i + 1) * BLOCK], val);
                    }
                    if c > 1 {
                        for k in 0..d {
                            rest[k * BLOCK..(k + 1) * BLOCK].fill(w[j * n_in + k]);
                        }
                        if self.order == Order::Laplacian {
                            rest[d * BLOCK..].fill(0.0);
                        }
                    }
                }
            } else {
                let (head, tail) = self.pre.split_at_mut(l - 1);
                let _ = head;
                let z = &mut tail[0];
                let a = &self.post[l - 2];
                for j in 0..n_out {
                    let row = &mut z[j * cb..(j + 1) * cb];
                    row[..BLOCK].fill(bias[j]);
                    row[BLOCK..].fill(0.0);
                    combine(&w[j * n_in..(j + 1) * n_in], 1, a, cb, row);
                }
            }
            if l < last {
                activate(
                    &self.pre[l - 1],
                    &mut self.post[l - 1],
                    n_out,
                    d,
                    self.order,
                );
            }
        }
    }

    /// Output channel `ch` (0 = value, `1..=d` gradient, `d + 1` Laplacian).
    pub fn output(&self, ch: usize) -> &[f64] {
        let z = self.pre.last().unwrap();
        &z[ch * BLOCK..ch * BLOCK + self.len]
    }

    pub fn value(&self, b: usize) -> f64 {
        self.pre.last().unwrap()[b]
    }

    pub fn grad(&self, k: usize, b: usize) -> f64 {
        self.pre.last().unwrap()[(1 + k) * BLOCK + b]
    }

    pub fn lap(&self, b: usize) -> f64 {
        debug_assert_eq!(self.order, Order::Laplacian);
        self.pre.last().unwrap()[(1 + self.d) * BLOCK + b]
    }

    /// Clears the output adjoints before they are filled for a new block.
    pub fn clear_seeds(&mut self) {
        self.seeds.fill(0.0);
    }

    /// Adjoint of output channel `ch` at sample `b`.
    pub fn seed_mut(&mut self, ch: usize, b: usize) -> &mut f64 {
        &mut self.seeds[ch * BLOCK + b]
    }

    pub fn seed_value(&mut self, b: usize) -> &mut f64 {
        self.seed_mut(0, b)
    }

    pub fn seed_grad(&mut self, k: usize, b: usize) -> &mut f64 {
        self.seed_mut(1 + k, b)
    }

    pub fn seed_lap(&mut self, b: usize) -> &mut f64 {
        let d = self.d;
        self.seed_mut(1 + d, b)
    }

    /// Accumulates `Σ_b Σ_c seed[c][b] ∂out[c][b]/∂θ` into `grad` (flat
    /// parameter layout). Seeds of padded lanes must be zero.
    pub fn backward(&mut self, params: &MlpParams, grad: &mut [f64]) {
        let (d, c) = (self.d, self.c);
        let cb = c * BLOCK;
        let last = self.arch.n_layers();
        self.bar[..cb].copy_from_slice(&self.seeds);
        for l in (1..=last).rev() {
            let n_in = self.arch.widths[l - 1];
            let n_out = self.arch.widths[l];
            let w = params.weights(l);
            let w_off = self.arch.weight_offset(l);
            let b_off = self.arch.bias_offset(l);
            for j in 0..n_out {
                let zb = &self.bar[j * cb..(j + 1) * cb];
                grad[b_off + j] += zb[..BLOCK].iter().sum::<f64>();
            }
            if l == 1 {
                for j in 0..n_out {
                    let zb = &self.bar[j * cb..(j + 1) * cb];
                    for i in 0..d {
                        let mut g = dot(&zb[..BLOCK], &self.inputs[i * BLOCK..(i + 1) * BLOCK]);
                        if c > 1 {
                            g += zb[(1 + i) * BLOCK..(2 + i) * BLOCK].iter().sum::<f64>();
                        }
                        grad[w_off + j * n_in + i] += g;
                    }
                }
                break;
            }
            let a = &self.post[l - 2];
            for j in 0..n_out {
                let zb = &self.bar[j * cb..(j + 1) * cb];
                for i in 0..n_in {
                    grad[w_off + j * n_in + i] += dot(zb, &a[i * cb..(i + 1) * cb]);
                }
            }
            let prev = &mut self.bar_prev[..n_in * cb];
            prev.fill(0.0);
            for i in 0..n_in {
                combine(&w[i..], n_in, &self.bar[..n_out * cb], cb, &mut prev[i * cb..(i + 1) * cb]);
            }
            activate_adjoint(&self.pre[l - 2], &self.post[l - 2], prev, n_in, d, self.order);
            std::mem::swap(&mut self.bar, &mut self.bar_prev);
        }
    }
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// `out += Σ_k coef[k * step] src[k]`, where `src[k]` is the `k`-th row of
/// length `out.len()` in `src` (row stride `stride`). Rows are added in order
/// `k = 0, 1, ..`, with 16 lanes kept in registers.
#[inline]
fn combine(coef: &[f64], step: usize, src: &[f64], stride: usize, out: &mut [f64]) {
    const LANES: usize = 16;
    let n = src.len() / stride;
    let len = out.len();
    let mut start = 0;
    while start + LANES <= len {
        let mut acc = [0.0f64; LANES];
        acc.copy_from_slice(&out[start..start + LANES]);
        for k in 0..n {
            let a = coef[k * step];
            let x = &src[k * stride + start..k * stride + start + LANES];
            for l in 0..LANES {
                acc[l] += a * x[l];
            }
        }
        out[start..start + LANES].copy_from_slice(&acc);
        start += LANES;
    }
    for k in 0..n {
        let a = coef[k * step];
        axpy(a, &src[k * stride + start..k * stride + len], &mut out[start..]);
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

fn activate(z: &[f64], h: &mut [f64], n: usize, d: usize, order: Order) {
    let c = order.channels(d);
    let cb = c * BLOCK;
    let mut tp = [0.0f64; BLOCK];
    let mut tpp = [0.0f64; BLOCK];
    for j in 0..n {
        let zr = &z[j * cb..(j + 1) * cb];
        let hr = &mut h[j * cb..(j + 1) * cb];
        for b in 0..BLOCK {
            let t = zr[b].tanh();
            hr[b] = t;
            tp[b] = 1.0 - t * t;
            tpp[b] = -2.0 * t * tp[b];
        }
        if order == Order::Value {
            continue;
        }
        for k in 0..d {
            let off = (1 + k) * BLOCK;
            for b in 0..BLOCK {
                hr[off + b] = tp[b] * zr[off + b];
            }
        }
        if order == Order::Laplacian {
            let off = (1 + d) * BLOCK;
            for b in 0..BLOCK {
                let mut sq = 0.0;
                for k in 0..d {
                    let g = zr[(1 + k) * BLOCK + b];
                    sq += g * g;
                }
                hr[off + b] = tpp[b] * sq + tp[b] * zr[off + b];
            }
        }
    }
}

/// Turns post-activation adjoints (in `bar`) into pre-activation adjoints in place.
fn activate_adjoint(z: &[f64], h: &[f64], bar: &mut [f64], n: usize, d: usize, order: Order) {
    let c = order.channels(d);
    let cb = c * BLOCK;
    for j in 0..n {
        let zr = &z[j * cb..(j + 1) * cb];
        let hr = &h[j * cb..(j + 1) * cb];
        let br = &mut bar[j * cb..(j + 1) * cb];
        for b in 0..BLOCK {
            let t = hr[b];
            let tp = 1.0 - t * t;
            let mut zbar = br[b] * tp;
            if order != Order::Value {
                let tpp = -2.0 * t * tp;
                let lap_bar = if order == Order::Laplacian {
                    br[(1 + d) * BLOCK + b]
                } else {
                    0.0
                };
                let mut sq = 0.0;
                for k in 0..d {
                    let off = (1 + k) * BLOCK + b;
                    let g = zr[off];
                    sq += g * g;
                    zbar += br[off] * tpp * g;
                    br[off] = br[off] * tp + 2.0 * lap_bar * tpp * g;
                }
                if order == Order::Laplacian {
                    let tppp = -2.0 * tp * tp + 4.0 * t * t * tp;
                    let off = (1 + d) * BLOCK + b;
                    zbar += lap_bar * (tppp * sq + tpp * zr[off]);
                    br[off] = lap_bar * tp;
                }
            }
            br[b] = zbar;
        }
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"SEPINNCK";
const CHECKPOINT_VERSION: u32 = 1;
const ACTIVATION_TANH: u8 = 1;

/// A saved training state: one or more networks plus trailing scalars
/// (enrichment coefficients, eigenvalue estimates).
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub nets: Vec<MlpParams>,
    pub extras: Vec<f64>,
}

impl Checkpoint {
    /// Little-endian layout: magic `SEPINNCK`, `u32` version, `u64` seed,
    /// `u32` network count; per network `u32` depth, `u32` widths and a `u8`
    /// activation tag (1 = tanh); `u64` extras count; then every network's
    /// flat `f64` parameters followed by the extras.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(self.nets.len() as u32).to_le_bytes());
        for net in &self.nets {
            let w = net.arch.widths();
            out.extend_from_slice(&(w.len() as u32).to_le_bytes());
            for &v in w {
                out.extend_from_slice(&(v as u32).to_le_bytes());
            }
            out.push(ACTIVATION_TANH);
        }
        out.extend_from_slice(&(self.extras.len() as u64).to_le_bytes());
        for net in &self.nets {
            for v in net.flat() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        for v in &self.extras {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let seed = r.u64()?;
        let n_nets = r.u32()? as usize;
        let mut archs = Vec::with_capacity(n_nets);
        for _ in 0..n_nets {
            let depth = r.u32()? as usize;
            let widths = (0..depth)
                .map(|_| r.u32().map(|v| v as usize))
                .collect::<Result<Vec<_>>>()?;
            if r.take(1)?[0] != ACTIVATION_TANH {
                return Err(Error::Checkpoint("unknown activation tag".into()));
            }
            archs.push(MlpArch::new(widths).map_err(|e| Error::Checkpoint(e.to_string()))?);
        }
        let n_extras = r.u64()? as usize;
        let mut nets = Vec::with_capacity(n_nets);
        for arch in &archs {
            let flat = (0..arch.n_params()).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            nets.push(MlpParams::from_flat(arch, flat)?);
        }
        let extras = (0..n_extras).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(Self { seed, nets, extras })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
