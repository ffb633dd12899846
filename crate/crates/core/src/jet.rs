//! Second-order forward-mode derivative engine.
//!
//! A [`Jet`] carries a value together with its spatial gradient and spatial
//! Laplacian. The triple is closed under arithmetic and under composition with
//! smooth scalar functions:
//!
//! * `Δ(fg) = f Δg + g Δf + 2 ∇f·∇g`
//! * `Δφ(f) = φ''(f) |∇f|² + φ'(f) Δf`
//!
//! so any closed-form expression written over jets yields exact (to rounding)
//! values, gradients and Laplacians. The network module uses the same
//! propagation rule in a batched form; this type is the reference used for
//! manufactured solutions and for cross-checking closed-form enrichment
//! derivatives.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<const D: usize> {
    pub value: f64,
    pub grad: [f64; D],
    pub lap: f64,
}

impl<const D: usize> Jet<D> {
    pub fn constant(value: f64) -> Self {
        Self {
            value,
            grad: [0.0; D],
            lap: 0.0,
        }
    }

    /// The coordinate function `x_k` evaluated at `value`.
    pub fn variable(value: f64, k: usize) -> Self {
        let mut grad = [0.0; D];
        grad[k] = 1.0;
        Self {
            value,
            grad,
            lap: 0.0,
        }
    }

    /// Seeds all `D` coordinates of a point.
    pub fn point(x: [f64; D]) -> [Self; D] {
        std::array::from_fn(|k| Self::variable(x[k], k))
    }

    pub fn grad_norm_sq(&self) -> f64 {
        self.grad.iter().map(|g| g * g).sum()
    }

    pub fn grad_dot(&self, other: &Self) -> f64 {
        self.grad
            .iter()
            .zip(other.grad.iter())
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Composes with a scalar function given its value and first two derivatives at `self.value`.
    pub fn chain(&self, f: f64, df: f64, d2f: f64) -> Self {
        let mut grad = [0.0; D];
        for (g, s) in grad.iter_mut().zip(self.grad.iter()) {
            *g = df * s;
        }
        Self {
            value: f,
            grad,
            lap: d2f * self.grad_norm_sq() + df * self.lap,
        }
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn exp(&self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    pub fn ln(&self) -> Self {
        let v = self.value;
        self.chain(v.ln(), 1.0 / v, -1.0 / (v * v))
    }

    pub fn sqrt(&self) -> Self {
        let s = self.value.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * s * s))
    }

    pub fn powf(&self, p: f64) -> Self {
        let v = self.value;
        self.chain(
            v.powf(p),
            p * v.powf(p - 1.0),
            p * (p - 1.0) * v.powf(p - 2.0),
        )
    }

    pub fn powi(&self, n: i32) -> Self {
        let v = self.value;
        let nf = n as f64;
        self.chain(
            v.powi(n),
            nf * v.powi(n - 1),
            nf * (nf - 1.0) * v.powi(n - 2),
        )
    }

    pub fn tanh(&self) -> Self {
        let t = self.value.tanh();
        let dt = 1.0 - t * t;
        self.chain(t, dt, -2.0 * t * dt)
    }

    pub fn cosh(&self) -> Self {
        let v = self.value;
        self.chain(v.cosh(), v.sinh(), v.cosh())
    }

    pub fn atan(&self) -> Self {
        let v = self.value;
        let q = 1.0 + v * v;
        self.chain(v.atan(), 1.0 / q, -2.0 * v / (q * q))
    }

    /// `atan2(self, x)`, differentiated away from the branch cut.
    pub fn atan2(&self, x: &Self) -> Self {
        let y = self;
        let q = x.value * x.value + y.value * y.value;
        let mut n = [0.0; D];
        for k in 0..D {
            n[k] = x.value * y.grad[k] - y.value * x.grad[k];
        }
        let mut grad = [0.0; D];
        let mut n_dot_dq = 0.0;
        for k in 0..D {
            grad[k] = n[k] / q;
            let dq = 2.0 * (x.value * x.grad[k] + y.value * y.grad[k]);
            n_dot_dq += n[k] * dq;
        }
        let div_n = x.value * y.lap - y.value * x.lap;
        Self {
            value: y.value.atan2(x.value),
            grad,
            lap: div_n / q - n_dot_dq / (q * q),
        }
    }
}

impl<const D: usize> Add for Jet<D> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut grad = self.grad;
        for (g, r) in grad.iter_mut().zip(rhs.grad.iter()) {
            *g += r;
        }
        Self {
            value: self.value + rhs.value,
            grad,
            lap: self.lap + rhs.lap,
        }
    }
}

impl<const D: usize> Sub for Jet<D> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<const D: usize> Neg for Jet<D> {
    type Output = Self;
    fn neg(self) -> Self {
        let mut grad = self.grad;
        for g in grad.iter_mut() {
            *g = -*g;
        }
        Self {
            value: -self.value,
            grad,
            lap: -self.lap,
        }
    }
}

impl<const D: usize> Mul for Jet<D> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut grad = [0.0; D];
        for k in 0..D {
            grad[k] = self.value * rhs.grad[k] + rhs.value * self.grad[k];
        }
        Self {
            value: self.value * rhs.value,
            grad,
            lap: self.value * rhs.lap + rhs.value * self.lap + 2.0 * self.grad_dot(&rhs),
        }
    }
}

impl<const D: usize> Div for Jet<D> {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Self) -> Self {
        let v = rhs.value;
        self * rhs.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }
}

impl<const D: usize> Add<f64> for Jet<D> {
    type Output = Self;
    fn add(mut self, rhs: f64) -> Self {
        self.value += rhs;
        self
    }
}

impl<const D: usize> Sub<f64> for Jet<D> {
    type Output = Self;
    fn sub(mut self, rhs: f64) -> Self {
        self.value -= rhs;
        self
    }
}

impl<const D: usize> Mul<f64> for Jet<D> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        let mut grad = self.grad;
        for g in grad.iter_mut() {
            *g *= rhs;
        }
        Self {
            value: self.value * rhs,
            grad,
            lap: self.lap * rhs,
        }
    }
}

impl<const D: usize> Div<f64> for Jet<D> {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        self * (1.0 / rhs)
    }
}

impl<const D: usize> Add<Jet<D>> for f64 {
    type Output = Jet<D>;
    fn add(self, rhs: Jet<D>) -> Jet<D> {
        rhs + self
    }
}

impl<const D: usize> Sub<Jet<D>> for f64 {
    type Output = Jet<D>;
    fn sub(self, rhs: Jet<D>) -> Jet<D> {
        (-rhs) + self
    }
}

impl<const D: usize> Mul<Jet<D>> for f64 {
    type Output = Jet<D>;
    fn mul(self, rhs: Jet<D>) -> Jet<D> {
        rhs * self
    }
}
