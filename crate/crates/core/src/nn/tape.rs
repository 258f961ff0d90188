//! Reverse-mode differentiation over a linear tape.
//!
//! Each operation appends a node holding its value and, when any input
//! needs a gradient, a closure that maps the output gradient onto the input
//! gradients. `backward` walks the tape once in reverse.

use std::sync::Arc;

use super::tensor::{gemm, NnError, Tensor};

type Backward = Box<dyn Fn(&[f64], &mut Grads)>;

struct Node {
    value: Tensor,
    requires_grad: bool,
    backward: Option<Backward>,
}

/// Handle to a value on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradient buffers produced by [`Tape::backward`]. Only leaves keep their
/// buffers after the pass.
pub struct Grads {
    bufs: Vec<Option<Vec<f64>>>,
    requires: Vec<bool>,
    sizes: Vec<usize>,
}

impl Grads {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.bufs[v.0].as_deref()
    }

    pub fn take(&mut self, v: Var) -> Option<Vec<f64>> {
        self.bufs[v.0].take()
    }

    /// Run `f` on the (zero-initialised on first use) gradient of `v`.
    pub(crate) fn acc(&mut self, v: Var, f: impl FnOnce(&mut [f64])) {
        if !self.requires[v.0] {
            return;
        }
        let size = self.sizes[v.0];
        f(self.bufs[v.0].get_or_insert_with(|| vec![0.0; size]));
    }

    pub(crate) fn add_into(&mut self, v: Var, g: &[f64]) {
        self.acc(v, |buf| buf.iter_mut().zip(g).for_each(|(b, x)| *b += x));
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, requires_grad, backward: None });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub(crate) fn data(&self, v: Var) -> Arc<Vec<f64>> {
        self.nodes[v.0].value.shared()
    }

    pub(crate) fn push(
        &mut self,
        value: Tensor,
        parents: &[Var],
        backward: impl Fn(&[f64], &mut Grads) + 'static,
    ) -> Var {
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        let backward: Option<Backward> = if requires_grad { Some(Box::new(backward)) } else { None };
        self.nodes.push(Node { value, requires_grad, backward });
        Var(self.nodes.len() - 1)
    }

    /// Gradients of the scalar `loss` with respect to every leaf that
    /// requires one.
    pub fn backward(&self, loss: Var) -> Grads {
        assert_eq!(self.nodes[loss.0].value.len(), 1, "backward needs a scalar loss");
        let mut grads = Grads {
            bufs: (0..self.nodes.len()).map(|_| None).collect(),
            requires: self.nodes.iter().map(|n| n.requires_grad).collect(),
            sizes: self.nodes.iter().map(|n| n.value.len()).collect(),
        };
        if !self.nodes[loss.0].requires_grad {
            return grads;
        }
        grads.bufs[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(f) = &self.nodes[i].backward else { continue };
            if let Some(g) = grads.bufs[i].take() {
                f(&g, &mut grads);
            }
        }
        grads
    }

    // ---- elementwise ----

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, df: impl Fn(f64, f64) -> f64 + 'static) -> Var {
        let x = self.data(a);
        let y: Vec<f64> = x.iter().map(|&v| f(v)).collect();
        let out = Tensor::new(self.value(a).shape(), y).expect("same size");
        let ys = out.shared();
        self.push(out, &[a], move |g, grads| {
            grads.acc(a, |buf| {
                for i in 0..buf.len() {
                    buf[i] += g[i] * df(x[i], ys[i]);
                }
            })
        })
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, |_, y| y * (1.0 - y))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, |_, y| 1.0 - y * y)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(0.0), |x, _| if x > 0.0 { 1.0 } else { 0.0 })
    }

    /// `1 - a`.
    pub fn one_minus(&mut self, a: Var) -> Var {
        self.unary(a, |x| 1.0 - x, |_, _| -1.0)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, move |x| c * x, move |_, _| c)
    }

    fn check_same(&self, op: &'static str, a: Var, b: Var) -> Result<(), NnError> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if self.value(a).len() != self.value(b).len() {
            return Err(NnError::shape(op, sa, sb));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.check_same("add", a, b)?;
        let (x, y) = (self.data(a), self.data(b));
        let z: Vec<f64> = x.iter().zip(y.iter()).map(|(p, q)| p + q).collect();
        let out = Tensor::new(self.value(a).shape(), z).expect("same size");
        Ok(self.push(out, &[a, b], move |g, grads| {
            grads.add_into(a, g);
            grads.add_into(b, g);
        }))
    }

    /// Hadamard product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.check_same("mul", a, b)?;
        let (x, y) = (self.data(a), self.data(b));
        let z: Vec<f64> = x.iter().zip(y.iter()).map(|(p, q)| p * q).collect();
        let out = Tensor::new(self.value(a).shape(), z).expect("same size");
        Ok(self.push(out, &[a, b], move |g, grads| {
            grads.acc(a, |buf| buf.iter_mut().enumerate().for_each(|(i, v)| *v += g[i] * y[i]));
            grads.acc(b, |buf| buf.iter_mut().enumerate().for_each(|(i, v)| *v += g[i] * x[i]));
        }))
    }

    // ---- linear algebra ----

    /// `a · b` for `a: m×k`, `b: k×n`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (m, k) = (self.value(a).rows(), self.value(a).cols());
        let (k2, n) = (self.value(b).rows(), self.value(b).cols());
        if k != k2 {
            return Err(NnError::shape("matmul", (m, k), (k2, n)));
        }
        let (x, y) = (self.data(a), self.data(b));
        let mut z = vec![0.0; m * n];
        gemm(m, k, n, &x, false, &y, false, &mut z, 0.0);
        Ok(self.push(Tensor::matrix(m, n, z), &[a, b], move |g, grads| {
            grads.acc(a, |buf| gemm(m, n, k, g, false, &y, true, buf, 1.0));
            grads.acc(b, |buf| gemm(k, m, n, &x, true, g, false, buf, 1.0));
        }))
    }

    /// `x · wᵀ + b` for `x: B×in` (or a vector), `w: out×in`, `b: out`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var, NnError> {
        let vector_in = self.value(x).shape().len() == 1;
        let (rows, din) = (self.value(x).rows(), self.value(x).cols());
        let (dout, win) = (self.value(w).rows(), self.value(w).cols());
        if din != win || self.value(b).len() != dout {
            return Err(NnError::shape("linear", (dout, din), (self.value(w).shape(), self.value(b).shape())));
        }
        let (xd, wd, bd) = (self.data(x), self.data(w), self.data(b));
        let mut z = Vec::with_capacity(rows * dout);
        for _ in 0..rows {
            z.extend_from_slice(&bd);
        }
        gemm(rows, din, dout, &xd, false, &wd, true, &mut z, 1.0);
        let out = if vector_in { Tensor::vector(z) } else { Tensor::matrix(rows, dout, z) };
        Ok(self.push(out, &[x, w, b], move |g, grads| {
            grads.acc(x, |buf| gemm(rows, dout, din, g, false, &wd, false, buf, 1.0));
            grads.acc(w, |buf| gemm(dout, rows, din, g, true, &xd, false, buf, 1.0));
            grads.acc(b, |buf| {
                for r in 0..rows {
                    for (o, v) in buf.iter_mut().enumerate() {
                        *v += g[r * dout + o];
                    }
                }
            });
        }))
    }

    // ---- structure ----

    /// Same data, new shape.
    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var, NnError> {
        let out = self.value(a).reshape(shape)?;
        Ok(self.push(out, &[a], move |g, grads| grads.add_into(a, g)))
    }

    /// Row `i` of a matrix as a vector.
    pub fn row(&mut self, a: Var, i: usize) -> Var {
        let c = self.value(a).cols();
        let out = Tensor::vector(self.value(a).row(i).to_vec());
        self.push(out, &[a], move |g, grads| {
            grads.acc(a, |buf| buf[i * c..(i + 1) * c].iter_mut().zip(g).for_each(|(b, x)| *b += x))
        })
    }

    /// Stack equal-length vectors into a matrix.
    pub fn stack_rows(&mut self, rows: &[Var]) -> Result<Var, NnError> {
        let n = rows.first().map_or(0, |&r| self.value(r).len());
        let mut data = Vec::with_capacity(rows.len() * n);
        for &r in rows {
            if self.value(r).len() != n {
                return Err(NnError::shape("stack_rows", n, self.value(r).len()));
            }
            data.extend_from_slice(self.value(r).data());
        }
        let parents = rows.to_vec();
        Ok(self.push(Tensor::matrix(rows.len(), n, data), rows, move |g, grads| {
            for (i, &r) in parents.iter().enumerate() {
                grads.add_into(r, &g[i * n..(i + 1) * n]);
            }
        }))
    }

    /// Concatenate along the trailing axis. Inputs share their row count;
    /// vectors in give a vector out.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NnError> {
        let rows = parts.first().map_or(1, |&p| self.value(p).rows());
        let vector = parts.iter().all(|&p| self.value(p).shape().len() <= 1);
        let widths: Vec<usize> = parts.iter().map(|&p| self.value(p).cols()).collect();
        for &p in parts {
            if self.value(p).rows() != rows {
                return Err(NnError::shape("concat_cols", rows, self.value(p).rows()));
            }
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let out = if vector { Tensor::vector(data) } else { Tensor::matrix(rows, total, data) };
        let parents = parts.to_vec();
        Ok(self.push(out, parts, move |g, grads| {
            let mut off = 0;
            for (&p, &w) in parents.iter().zip(&widths) {
                grads.acc(p, |buf| {
                    for r in 0..rows {
                        let src = &g[r * total + off..r * total + off + w];
                        buf[r * w..(r + 1) * w].iter_mut().zip(src).for_each(|(b, x)| *b += x);
                    }
                });
                off += w;
            }
        }))
    }

    // ---- reductions ----

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), &[a], move |g, grads| grads.acc(a, |buf| buf.iter_mut().for_each(|b| *b += g[0])))
    }

    /// `Σ wᵢ aᵢ` with fixed weights; a generic scalar probe for checks.
    pub fn weighted_sum(&mut self, a: Var, w: Vec<f64>) -> Result<Var, NnError> {
        if w.len() != self.value(a).len() {
            return Err(NnError::shape("weighted_sum", self.value(a).len(), w.len()));
        }
        let s = self.value(a).data().iter().zip(&w).map(|(x, y)| x * y).sum();
        Ok(self.push(Tensor::scalar(s), &[a], move |g, grads| {
            grads.acc(a, |buf| buf.iter_mut().zip(&w).for_each(|(b, y)| *b += g[0] * y))
        }))
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
