//! A small eager tape for reverse-mode differentiation over f64 tensors.
//!
//! Backward passes are themselves built out of tape primitives, so
//! gradients are ordinary tape values and can be differentiated again.
//! That second order is what the critic's gradient penalty needs: the
//! penalty is a function of the input gradient, and its parameter
//! gradient differentiates through the first backward pass.
//!
//! Tensors are flat `Vec<f64>` plus a shape: `[1]` scalars, `[C]`
//! per-channel vectors, `[C, L]` signals, `[O, I, K]` conv kernels.

use std::cell::RefCell;

/// Stride and zero-padding of a 1-D convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub stride: usize,
    pub padding: usize,
}

impl ConvSpec {
    pub fn out_len(&self, in_len: usize, kernel: usize) -> usize {
        (in_len + 2 * self.padding - kernel) / self.stride + 1
    }

    /// Output length of the transposed form.
    pub fn transposed_out_len(&self, in_len: usize, kernel: usize) -> usize {
        (in_len - 1) * self.stride + kernel - 2 * self.padding
    }
}

/// Handle to a tape value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

// Some payload fields (constants, output extents) are consumed at
// construction time only; they stay on the op for Debug output.
#[allow(dead_code)]
#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Neg(Var),
    Scale(Var, f64),
    AddConst(Var, f64),
    /// Elementwise multiply by a `[1]` scalar.
    MulScalar(Var, Var),
    SumAll(Var),
    Broadcast(Var, Vec<usize>),
    Sigmoid(Var),
    Tanh(Var),
    Softplus(Var),
    Sqrt(Var),
    Recip(Var),
    Abs(Var),
    Sign(Var),
    /// `[C, L] -> [C]`, sum over the length axis.
    SumLen(Var),
    /// `[C] -> [C, L]`, repeat along a new length axis.
    BroadcastLen(Var, usize),
    /// y[o,t] = sum_{i,k} w[o,i,k] x[i, t*s + k - p]
    Conv {
        x: Var,
        w: Var,
        spec: ConvSpec,
    },
    /// Adjoint of Conv w.r.t. its input; doubles as the transposed conv.
    ConvBackInput {
        g: Var,
        w: Var,
        spec: ConvSpec,
        in_len: usize,
    },
    /// Adjoint of Conv w.r.t. its kernel.
    ConvBackWeight {
        x: Var,
        g: Var,
        spec: ConvSpec,
        kernel: usize,
    },
}

struct Node {
    op: Op,
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// Append-only computation record.
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

fn stable_softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn leaf(&self, data: Vec<f64>, shape: Vec<usize>) -> Var {
        debug_assert_eq!(data.len(), shape.iter().product::<usize>());
        self.push(Op::Leaf, shape, data)
    }

    pub fn scalar(&self, v: f64) -> Var {
        self.leaf(vec![v], vec![1])
    }

    pub fn zeros(&self, shape: Vec<usize>) -> Var {
        let n = shape.iter().product();
        self.leaf(vec![0.0; n], shape)
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].shape.clone()
    }

    pub fn data(&self, v: Var) -> Vec<f64> {
        self.nodes.borrow()[v.0].data.clone()
    }

    pub fn value(&self, v: Var) -> f64 {
        let nodes = self.nodes.borrow();
        debug_assert_eq!(nodes[v.0].data.len(), 1);
        nodes[v.0].data[0]
    }

    pub fn with_data<R>(&self, v: Var, f: impl FnOnce(&[f64]) -> R) -> R {
        f(&self.nodes.borrow()[v.0].data)
    }

    /// Overwrites a leaf's contents (used to re-run cheap probes without
    /// rebuilding a tape). Only valid before any dependent op exists.
    pub fn set_leaf(&self, v: Var, data: &[f64]) {
        let mut nodes = self.nodes.borrow_mut();
        assert!(matches!(nodes[v.0].op, Op::Leaf));
        nodes[v.0].data.copy_from_slice(data);
    }

    fn push(&self, op: Op, shape: Vec<usize>, data: Vec<f64>) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { op, shape, data });
        Var(nodes.len() - 1)
    }

    fn binary_same_shape(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let (shape, data) = {
            let nodes = self.nodes.borrow();
            let na = &nodes[a.0];
            let nb = &nodes[b.0];
            assert_eq!(na.shape, nb.shape, "shape mismatch in elementwise op");
            let data = na
                .data
                .iter()
                .zip(&nb.data)
                .map(|(x, y)| f(*x, *y))
                .collect();
            (na.shape.clone(), data)
        };
        self.push(op, shape, data)
    }

    fn unary(&self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let (shape, data) = {
            let nodes = self.nodes.borrow();
            let na = &nodes[a.0];
            (na.shape.clone(), na.data.iter().map(|x| f(*x)).collect())
        };
        self.push(op, shape, data)
    }

    pub fn add(&self, a: Var, b: Var) -> Var {
        self.binary_same_shape(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&self, a: Var, b: Var) -> Var {
        self.binary_same_shape(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&self, a: Var, b: Var) -> Var {
        self.binary_same_shape(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn neg(&self, a: Var) -> Var {
        self.unary(a, |x| -x, Op::Neg(a))
    }

    pub fn scale(&self, a: Var, c: f64) -> Var {
        self.unary(a, |x| c * x, Op::Scale(a, c))
    }

    pub fn add_const(&self, a: Var, c: f64) -> Var {
        self.unary(a, |x| x + c, Op::AddConst(a, c))
    }

    pub fn mul_scalar(&self, a: Var, s: Var) -> Var {
        let (shape, data) = {
            let nodes = self.nodes.borrow();
            assert_eq!(nodes[s.0].data.len(), 1);
            let sv = nodes[s.0].data[0];
            let na = &nodes[a.0];
            (na.shape.clone(), na.data.iter().map(|x| x * sv).collect())
        };
        self.push(Op::MulScalar(a, s), shape, data)
    }

    pub fn sum_all(&self, a: Var) -> Var {
        let total = {
            let nodes = self.nodes.borrow();
            nodes[a.0].data.iter().sum()
        };
        self.push(Op::SumAll(a), vec![1], vec![total])
    }

    pub fn broadcast(&self, a: Var, shape: Vec<usize>) -> Var {
        let v = self.value(a);
        let n = shape.iter().product();
        self.push(Op::Broadcast(a, shape.clone()), shape, vec![v; n])
    }

    pub fn mean_all(&self, a: Var) -> Var {
        let n = self.data(a).len();
        let s = self.sum_all(a);
        self.scale(s, 1.0 / n as f64)
    }

    pub fn sigmoid(&self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn softplus(&self, a: Var) -> Var {
        self.unary(a, stable_softplus, Op::Softplus(a))
    }

    pub fn sqrt(&self, a: Var) -> Var {
        self.unary(a, f64::sqrt, Op::Sqrt(a))
    }

    pub fn recip(&self, a: Var) -> Var {
        self.unary(a, |x| 1.0 / x, Op::Recip(a))
    }

    pub fn abs(&self, a: Var) -> Var {
        self.unary(a, f64::abs, Op::Abs(a))
    }

    pub fn sign(&self, a: Var) -> Var {
        self.unary(a, |x| if x >= 0.0 { 1.0 } else { -1.0 }, Op::Sign(a))
    }

    /// x * tanh(softplus(x))
    pub fn mish(&self, a: Var) -> Var {
        let sp = self.softplus(a);
        let t = self.tanh(sp);
        self.mul(a, t)
    }

    /// values (*) sigmoid(gates)
    pub fn glu(&self, values: Var, gates: Var) -> Var {
        let s = self.sigmoid(gates);
        self.mul(values, s)
    }

    pub fn sum_len(&self, a: Var) -> Var {
        let (c, data) = {
            let nodes = self.nodes.borrow();
            let na = &nodes[a.0];
            assert_eq!(na.shape.len(), 2);
            let (c, l) = (na.shape[0], na.shape[1]);
            let data = (0..c)
                .map(|ch| na.data[ch * l..(ch + 1) * l].iter().sum())
                .collect();
            (c, data)
        };
        self.push(Op::SumLen(a), vec![c], data)
    }

    pub fn broadcast_len(&self, a: Var, l: usize) -> Var {
        let (c, data) = {
            let nodes = self.nodes.borrow();
            let na = &nodes[a.0];
            assert_eq!(na.shape.len(), 1);
            let c = na.shape[0];
            let mut data = Vec::with_capacity(c * l);
            for ch in 0..c {
                data.extend(std::iter::repeat(na.data[ch]).take(l));
            }
            (c, data)
        };
        self.push(Op::BroadcastLen(a, l), vec![c, l], data)
    }

    /// Channel means: `[C, L] -> [C]`.
    pub fn mean_len(&self, a: Var) -> Var {
        let l = self.shape(a)[1];
        let s = self.sum_len(a);
        self.scale(s, 1.0 / l as f64)
    }

    /// Adds a per-channel bias to a `[C, L]` signal.
    pub fn add_bias(&self, x: Var, b: Var) -> Var {
        let l = self.shape(x)[1];
        let bb = self.broadcast_len(b, l);
        self.add(x, bb)
    }

    pub fn dot(&self, a: Var, b: Var) -> Var {
        let m = self.mul(a, b);
        self.sum_all(m)
    }

    /// Mean absolute difference of two same-shape tensors.
    pub fn l1_mean(&self, a: Var, b: Var) -> Var {
        let d = self.sub(a, b);
        let ad = self.abs(d);
        self.mean_all(ad)
    }

    /// Euclidean norm of all entries.
    pub fn l2_norm(&self, a: Var) -> Var {
        let sq = self.mul(a, a);
        let s = self.sum_all(sq);
        self.sqrt(s)
    }

    pub fn conv(&self, x: Var, w: Var, spec: ConvSpec) -> Var {
        let (shape, data) = {
            let nodes = self.nodes.borrow();
            let nx = &nodes[x.0];
            let nw = &nodes[w.0];
            assert_eq!(nx.shape.len(), 2, "conv input must be [C, L]");
            assert_eq!(nw.shape.len(), 3, "conv kernel must be [O, I, K]");
            let (ci, l) = (nx.shape[0], nx.shape[1]);
            let (co, wi, k) = (nw.shape[0], nw.shape[1], nw.shape[2]);
            assert_eq!(ci, wi, "conv channel mismatch");
            assert_eq!(
                (l + 2 * spec.padding - k) % spec.stride,
                0,
                "conv stride/padding bookkeeping does not balance"
            );
            let lout = spec.out_len(l, k);
            let mut y = vec![0.0; co * lout];
            conv_forward(&nx.data, &nw.data, &mut y, ci, l, co, k, lout, spec);
            (vec![co, lout], y)
        };
        self.push(Op::Conv { x, w, spec }, shape, data)
    }

    /// Adjoint of `conv` w.r.t. the input. With `g` as the layer input
    /// this is a transposed convolution producing `in_len` samples.
    pub fn conv_transposed(&self, g: Var, w: Var, spec: ConvSpec, in_len: usize) -> Var {
        let (shape, data) = {
            let nodes = self.nodes.borrow();
            let ng = &nodes[g.0];
            let nw = &nodes[w.0];
            assert_eq!(ng.shape.len(), 2);
            assert_eq!(nw.shape.len(), 3);
            let (co, lout) = (ng.shape[0], ng.shape[1]);
            let (wo, ci, k) = (nw.shape[0], nw.shape[1], nw.shape[2]);
            assert_eq!(co, wo, "transposed conv channel mismatch");
            assert_eq!(spec.out_len(in_len, k), lout, "transposed conv length mismatch");
            let mut dx = vec![0.0; ci * in_len];
            conv_back_input(&ng.data, &nw.data, &mut dx, ci, in_len, co, k, lout, spec);
            (vec![ci, in_len], dx)
        };
        self.push(Op::ConvBackInput { g, w, spec, in_len }, shape, data)
    }

    /// Adjoint of `conv` w.r.t. the kernel.
    pub fn conv_weight_grad(&self, x: Var, g: Var, spec: ConvSpec, kernel: usize) -> Var {
        let (shape, data) = {
            let nodes = self.nodes.borrow();
            let nx = &nodes[x.0];
            let ng = &nodes[g.0];
            let (ci, l) = (nx.shape[0], nx.shape[1]);
            let (co, lout) = (ng.shape[0], ng.shape[1]);
            assert_eq!(spec.out_len(l, kernel), lout, "weight-grad length mismatch");
            let mut dw = vec![0.0; co * ci * kernel];
            conv_back_weight(&nx.data, &ng.data, &mut dw, ci, l, co, kernel, lout, spec);
            (vec![co, ci, kernel], dw)
        };
        self.push(Op::ConvBackWeight { x, g, spec, kernel }, shape, data)
    }

    /// Reverse-mode gradients of a scalar `output` w.r.t. each var in
    /// `wrt`. The returned gradients are tape values and can be
    /// differentiated again.
    pub fn grad(&self, output: Var, wrt: &[Var]) -> Vec<Var> {
        assert_eq!(
            self.nodes.borrow()[output.0].data.len(),
            1,
            "grad target must be scalar"
        );
        let frontier = output.0 + 1;
        let mut adjoint: Vec<Option<Var>> = vec![None; frontier];
        adjoint[output.0] = Some(self.scalar(1.0));

        for id in (0..frontier).rev() {
            let Some(u) = adjoint[id] else { continue };
            let op = self.nodes.borrow()[id].op.clone();
            let contribute = |parent: Var, g: Var, adjoint: &mut Vec<Option<Var>>| {
                adjoint[parent.0] = Some(match adjoint[parent.0] {
                    Some(existing) => self.add(existing, g),
                    None => g,
                });
            };
            match op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    contribute(a, u, &mut adjoint);
                    contribute(b, u, &mut adjoint);
                }
                Op::Sub(a, b) => {
                    contribute(a, u, &mut adjoint);
                    let nu = self.neg(u);
                    contribute(b, nu, &mut adjoint);
                }
                Op::Mul(a, b) => {
                    let ga = self.mul(u, b);
                    let gb = self.mul(u, a);
                    contribute(a, ga, &mut adjoint);
                    contribute(b, gb, &mut adjoint);
                }
                Op::Neg(a) => {
                    let g = self.neg(u);
                    contribute(a, g, &mut adjoint);
                }
                Op::Scale(a, c) => {
                    let g = self.scale(u, c);
                    contribute(a, g, &mut adjoint);
                }
                Op::AddConst(a, _) => contribute(a, u, &mut adjoint),
                Op::MulScalar(a, s) => {
                    let ga = self.mul_scalar(u, s);
                    contribute(a, ga, &mut adjoint);
                    let prod = self.mul(u, a);
                    let gs = self.sum_all(prod);
                    contribute(s, gs, &mut adjoint);
                }
                Op::SumAll(a) => {
                    let g = self.broadcast(u, self.shape(a));
                    contribute(a, g, &mut adjoint);
                }
                Op::Broadcast(a, _) => {
                    let g = self.sum_all(u);
                    contribute(a, g, &mut adjoint);
                }
                Op::Sigmoid(a) => {
                    let y = Var(id);
                    let ny = self.neg(y);
                    let one_minus = self.add_const(ny, 1.0);
                    let uy = self.mul(u, y);
                    let g = self.mul(uy, one_minus);
                    contribute(a, g, &mut adjoint);
                }
                Op::Tanh(a) => {
                    let y = Var(id);
                    let uy = self.mul(u, y);
                    let uyy = self.mul(uy, y);
                    let g = self.sub(u, uyy);
                    contribute(a, g, &mut adjoint);
                }
                Op::Softplus(a) => {
                    let s = self.sigmoid(a);
                    let g = self.mul(u, s);
                    contribute(a, g, &mut adjoint);
                }
                Op::Sqrt(a) => {
                    let y = Var(id);
                    let r = self.recip(y);
                    let ur = self.mul(u, r);
                    let g = self.scale(ur, 0.5);
                    contribute(a, g, &mut adjoint);
                }
                Op::Recip(a) => {
                    let y = Var(id);
                    let yy = self.mul(y, y);
                    let uyy = self.mul(u, yy);
                    let g = self.neg(uyy);
                    contribute(a, g, &mut adjoint);
                }
                Op::Abs(a) => {
                    let s = self.sign(a);
                    let g = self.mul(u, s);
                    contribute(a, g, &mut adjoint);
                }
                // sign is flat almost everywhere
                Op::Sign(_) => {}
                Op::SumLen(a) => {
                    let l = self.shape(a)[1];
                    let g = self.broadcast_len(u, l);
                    contribute(a, g, &mut adjoint);
                }
                Op::BroadcastLen(a, _) => {
                    let g = self.sum_len(u);
                    contribute(a, g, &mut adjoint);
                }
                Op::Conv { x, w, spec } => {
                    let in_len = self.shape(x)[1];
                    let kernel = self.shape(w)[2];
                    let gx = self.conv_transposed(u, w, spec, in_len);
                    contribute(x, gx, &mut adjoint);
                    let gw = self.conv_weight_grad(x, u, spec, kernel);
                    contribute(w, gw, &mut adjoint);
                }
                Op::ConvBackInput { g, w, spec, .. } => {
                    let kernel = self.shape(w)[2];
                    let gg = self.conv(u, w, spec);
                    contribute(g, gg, &mut adjoint);
                    let gw = self.conv_weight_grad(u, g, spec, kernel);
                    contribute(w, gw, &mut adjoint);
                }
                Op::ConvBackWeight { x, g, spec, .. } => {
                    let in_len = self.shape(x)[1];
                    let gx = self.conv_transposed(g, u, spec, in_len);
                    contribute(x, gx, &mut adjoint);
                    let gg = self.conv(x, u, spec);
                    contribute(g, gg, &mut adjoint);
                }
            }
        }

        wrt.iter()
            .map(|v| match adjoint.get(v.0).copied().flatten() {
                Some(g) => g,
                None => self.zeros(self.shape(*v)),
            })
            .collect()
    }
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_forward(
    x: &[f64],
    w: &[f64],
    y: &mut [f64],
    ci: usize,
    l: usize,
    co: usize,
    k: usize,
    lout: usize,
    spec: ConvSpec,
) {
    let (s, p) = (spec.stride, spec.padding);
    for o in 0..co {
        let yo = &mut y[o * lout..(o + 1) * lout];
        for i in 0..ci {
            let xi = &x[i * l..(i + 1) * l];
            let wo = &w[(o * ci + i) * k..(o * ci + i + 1) * k];
            for (kk, &wv) in wo.iter().enumerate() {
                if wv == 0.0 {
                    continue;
                }
                // valid t: 0 <= t*s + kk - p < l
                let tmin = if kk >= p { 0 } else { (p - kk).div_ceil(s) };
                let tmax = ((l + p - kk - 1) / s + 1).min(lout);
                let base = kk as isize - p as isize;
                for t in tmin..tmax {
                    let j = (t * s) as isize + base;
                    yo[t] += wv * xi[j as usize];
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_back_input(
    g: &[f64],
    w: &[f64],
    dx: &mut [f64],
    ci: usize,
    l: usize,
    co: usize,
    k: usize,
    lout: usize,
    spec: ConvSpec,
) {
    let (s, p) = (spec.stride, spec.padding);
    for o in 0..co {
        let go = &g[o * lout..(o + 1) * lout];
        for i in 0..ci {
            let dxi = &mut dx[i * l..(i + 1) * l];
            let wo = &w[(o * ci + i) * k..(o * ci + i + 1) * k];
            for (kk, &wv) in wo.iter().enumerate() {
                if wv == 0.0 {
                    continue;
                }
                let tmin = if kk >= p { 0 } else { (p - kk).div_ceil(s) };
                let tmax = ((l + p - kk - 1) / s + 1).min(lout);
                let base = kk as isize - p as isize;
                for t in tmin..tmax {
                    let j = ((t * s) as isize + base) as usize;
                    dxi[j] += wv * go[t];
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_back_weight(
    x: &[f64],
    g: &[f64],
    dw: &mut [f64],
    ci: usize,
    l: usize,
    co: usize,
    k: usize,
    lout: usize,
    spec: ConvSpec,
) {
    let (s, p) = (spec.stride, spec.padding);
    for o in 0..co {
        let go = &g[o * lout..(o + 1) * lout];
        for i in 0..ci {
            let xi = &x[i * l..(i + 1) * l];
            let dwo = &mut dw[(o * ci + i) * k..(o * ci + i + 1) * k];
            for (kk, dwv) in dwo.iter_mut().enumerate() {
                let tmin = if kk >= p { 0 } else { (p - kk).div_ceil(s) };
                let tmax = ((l + p - kk - 1) / s + 1).min(lout);
                let base = kk as isize - p as isize;
                let mut acc = 0.0;
                for t in tmin..tmax {
                    let j = ((t * s) as isize + base) as usize;
                    acc += go[t] * xi[j];
                }
                *dwv += acc;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect()
    }

    /// Central finite differences of a scalar function of one flat input.
    fn fd_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        let mut probe = x.to_vec();
        for i in 0..x.len() {
            probe[i] = x[i] + step;
            let up = f(&probe);
            probe[i] = x[i] - step;
            let dn = f(&probe);
            probe[i] = x[i];
            g[i] = (up - dn) / (2.0 * step);
        }
        g
    }

    fn assert_close(analytic: &[f64], numeric: &[f64], tol: f64) {
        for (a, n) in analytic.iter().zip(numeric) {
            let denom = a.abs().max(n.abs()).max(1e-6);
            assert!(
                (a - n).abs() / denom <= tol,
                "gradient mismatch: analytic {a}, numeric {n}"
            );
        }
    }

    #[test]
    fn elementwise_chain_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x0 = rand_vec(&mut rng, 12);
        let f = |x: &[f64]| {
            let t = Tape::new();
            let v = t.leaf(x.to_vec(), vec![3, 4]);
            let m = t.mish(v);
            let s = t.sigmoid(m);
            let sq = t.mul(s, s);
            t.value(t.mean_all(sq))
        };
        let t = Tape::new();
        let v = t.leaf(x0.clone(), vec![3, 4]);
        let m = t.mish(v);
        let s = t.sigmoid(m);
        let sq = t.mul(s, s);
        let out = t.mean_all(sq);
        let g = t.grad(out, &[v]);
        assert_close(&t.data(g[0]), &fd_grad(f, &x0, 1e-5), 1e-6);
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &(stride, padding, kernel, l) in
            &[(1usize, 2usize, 5usize, 16usize), (2, 3, 8, 16), (1, 0, 3, 10)]
        {
            let spec = ConvSpec { stride, padding };
            let (ci, co) = (2, 3);
            let x0 = rand_vec(&mut rng, ci * l);
            let w0 = rand_vec(&mut rng, co * ci * kernel);
            let run = |x: &[f64], w: &[f64]| {
                let t = Tape::new();
                let xv = t.leaf(x.to_vec(), vec![ci, l]);
                let wv = t.leaf(w.to_vec(), vec![co, ci, kernel]);
                let y = t.conv(xv, wv, spec);
                let ty = t.tanh(y);
                let sq = t.mul(ty, ty);
                t.value(t.mean_all(sq))
            };
            let t = Tape::new();
            let xv = t.leaf(x0.clone(), vec![ci, l]);
            let wv = t.leaf(w0.clone(), vec![co, ci, kernel]);
            let y = t.conv(xv, wv, spec);
            let ty = t.tanh(y);
            let sq = t.mul(ty, ty);
            let out = t.mean_all(sq);
            let g = t.grad(out, &[xv, wv]);
            assert_close(&t.data(g[0]), &fd_grad(|x| run(x, &w0), &x0, 1e-5), 1e-5);
            assert_close(&t.data(g[1]), &fd_grad(|w| run(&x0, w), &w0, 1e-5), 1e-5);
        }
    }

    #[test]
    fn transposed_conv_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = ConvSpec { stride: 2, padding: 3 };
        let (ci, co, kernel, lin) = (3, 2, 8, 8);
        let lout = spec.transposed_out_len(lin, kernel);
        assert_eq!(lout, 16);
        let x0 = rand_vec(&mut rng, ci * lin);
        let w0 = rand_vec(&mut rng, ci * co * kernel);
        let run = |x: &[f64], w: &[f64]| {
            let t = Tape::new();
            let xv = t.leaf(x.to_vec(), vec![ci, lin]);
            let wv = t.leaf(w.to_vec(), vec![ci, co, kernel]);
            let y = t.conv_transposed(xv, wv, spec, lout);
            let sq = t.mul(y, y);
            t.value(t.mean_all(sq))
        };
        let t = Tape::new();
        let xv = t.leaf(x0.clone(), vec![ci, lin]);
        let wv = t.leaf(w0.clone(), vec![ci, co, kernel]);
        let y = t.conv_transposed(xv, wv, spec, lout);
        let sq = t.mul(y, y);
        let out = t.mean_all(sq);
        let g = t.grad(out, &[xv, wv]);
        assert_close(&t.data(g[0]), &fd_grad(|x| run(x, &w0), &x0, 1e-5), 1e-5);
        assert_close(&t.data(g[1]), &fd_grad(|w| run(&x0, w), &w0, 1e-5), 1e-5);
    }

    #[test]
    fn bias_and_reductions() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x0 = rand_vec(&mut rng, 2 * 6);
        let b0 = rand_vec(&mut rng, 2);
        let run = |x: &[f64], b: &[f64]| {
            let t = Tape::new();
            let xv = t.leaf(x.to_vec(), vec![2, 6]);
            let bv = t.leaf(b.to_vec(), vec![2]);
            let y = t.add_bias(xv, bv);
            let m = t.mean_len(y);
            let n = t.l2_norm(m);
            t.value(n)
        };
        let t = Tape::new();
        let xv = t.leaf(x0.clone(), vec![2, 6]);
        let bv = t.leaf(b0.clone(), vec![2]);
        let y = t.add_bias(xv, bv);
        let m = t.mean_len(y);
        let out = t.l2_norm(m);
        let g = t.grad(out, &[xv, bv]);
        assert_close(&t.data(g[0]), &fd_grad(|x| run(x, &b0), &x0, 1e-5), 1e-5);
        assert_close(&t.data(g[1]), &fd_grad(|b| run(&x0, b), &b0, 1e-5), 1e-5);
    }

    #[test]
    fn second_order_through_input_gradient() {
        // h(w) = (||grad_x f(x; w)|| - 1)^2 for f = mean(tanh(conv(x, w)));
        // d h / d w must match finite differences of the analytically
        // computed first gradient.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = ConvSpec { stride: 1, padding: 1 };
        let (ci, co, kernel, l) = (1, 2, 3, 8);
        let x0 = rand_vec(&mut rng, ci * l);
        let w0 = rand_vec(&mut rng, co * ci * kernel);

        let penalty = |w: &[f64]| {
            let t = Tape::new();
            let xv = t.leaf(x0.clone(), vec![ci, l]);
            let wv = t.leaf(w.to_vec(), vec![co, ci, kernel]);
            let y = t.conv(xv, wv, spec);
            let ty = t.tanh(y);
            let f = t.mean_all(ty);
            let gx = t.grad(f, &[xv])[0];
            let norm = t.l2_norm(gx);
            let shifted = t.add_const(norm, -1.0);
            let sq = t.mul(shifted, shifted);
            (t, sq, wv)
        };

        let (t, sq, wv) = penalty(&w0);
        let gw = t.grad(sq, &[wv]);
        let analytic = t.data(gw[0]);
        let numeric = fd_grad(
            |w| {
                let (t, sq, _) = penalty(w);
                t.value(sq)
            },
            &w0,
            1e-5,
        );
        assert_close(&analytic, &numeric, 1e-5);
    }

    #[test]
    fn mish_values() {
        let t = Tape::new();
        let x = t.leaf(vec![0.0, 20.0, -20.0], vec![1, 3]);
        let m = t.mish(x);
        let d = t.data(m);
        assert!(d[0].abs() < 1e-12);
        assert!((d[1] - 20.0).abs() < 1e-6);
        assert!(d[2].abs() < 1e-6);
    }

    #[test]
    fn glu_values() {
        let t = Tape::new();
        let values = t.leaf(vec![2.0, -4.0], vec![1, 2]);
        for (gate, factor) in [(0.0, 0.5), (-50.0, 0.0), (50.0, 1.0)] {
            let gates = t.leaf(vec![gate, gate], vec![1, 2]);
            let out = t.glu(values, gates);
            let d = t.data(out);
            assert!((d[0] - 2.0 * factor).abs() < 1e-9);
            assert!((d[1] + 4.0 * factor).abs() < 1e-9);
        }
    }
}
