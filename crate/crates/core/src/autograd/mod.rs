//! Tape-based reverse-mode automatic differentiation.
//!
//! A [`Graph`] records every operation applied to its [`Var`]s. Calling
//! [`Graph::backward`] on a scalar node walks the tape in reverse and returns
//! gradients for every node that requires one. Gradients never flow into
//! nodes created with [`Graph::constant`].

pub mod conv;

use crate::filter;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use conv::ConvGeom;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    Conv2d { x: Var, w: Var, b: Option<Var>, geom: ConvGeom },
    ConvTranspose2d { x: Var, w: Var, b: Option<Var>, geom: ConvGeom },
    InstanceNorm { x: Var, inv_std: Vec<T> },
    LeakyRelu { x: Var, slope: T },
    Tanh { x: Var },
    Sigmoid { x: Var },
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    Mul { a: Var, b: Var },
    /// `a: [N, C, H, W] * b: [N, 1, H, W]`
    MulChannelBroadcast { a: Var, b: Var },
    Div { a: Var, b: Var },
    Affine { x: Var, scale: T },
    Concat { parts: Vec<(Var, usize)> },
    SliceChannels { x: Var, start: usize },
    Blur { x: Var, kernel: Vec<T> },
    AvgPool2 { x: Var },
    Mean { x: Var },
    AbsMeanDiff { a: Var, b: Var },
    SmoothL1 { a: Var, b: Var },
    RegLoss { x: Var, c: T, floor: T },
    LogMean { x: Var, complement: bool, eps: T },
    ClampMin { x: Var, min: T },
    Powf { x: Var, exponent: T },
    WeightedSum { terms: Vec<(Var, T)> },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Gradients produced by [`Graph::backward`].
pub struct Grads<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Grads<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn shape_of(dims: &[usize]) -> Vec<usize> {
    dims.to_vec()
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A leaf that receives gradients (trainable parameter or probed input).
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf that never receives gradients.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn dims(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.dims()
    }

    /// Scalar value of a one-element node.
    pub fn scalar(&self, v: Var) -> T {
        self.nodes[v.0].value.item()
    }

    // ---- network layers -------------------------------------------------

    /// Zero-padded strided convolution; `w` is `[co, ci, k, k]`, `b` is `[co]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize) -> Var {
        let (n, c, h, wd) = self.value(x).nchw();
        let wdims = self.dims(w).to_vec();
        assert_eq!(wdims.len(), 4, "conv weight must be 4-d");
        assert_eq!(wdims[1], c, "conv weight expects {} input channels, got {c}", wdims[1]);
        assert_eq!(wdims[2], wdims[3], "square kernels only");
        let geom = ConvGeom { c, h, w: wd, k: wdims[2], stride, pad };
        let (oh, ow) = geom.out_hw().expect("kernel larger than padded input");
        let co = wdims[0];
        let out = conv::conv2d_forward(
            self.value(x).data(),
            n,
            &geom,
            self.value(w).data(),
            co,
            b.map(|b| self.value(b).data()),
        );
        let rg = self.rg(x) || self.rg(w) || b.is_some_and(|b| self.rg(b));
        let value = Tensor::from_vec(&[n, co, oh, ow], out).expect("conv output shape");
        self.push(value, Op::Conv2d { x, w, b, geom }, rg)
    }

    /// Transposed convolution; `w` is `[ci, co, k, k]`. Output extent is
    /// `(h - 1) * stride - 2 * pad + k`.
    pub fn conv_transpose2d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        pad: usize,
    ) -> Var {
        let (n, ci, h, wd) = self.value(x).nchw();
        let wdims = self.dims(w).to_vec();
        assert_eq!(wdims[0], ci, "transposed conv weight expects {} inputs, got {ci}", wdims[0]);
        let (co, k) = (wdims[1], wdims[2]);
        let oh = (h - 1) * stride + k - 2 * pad;
        let ow = (wd - 1) * stride + k - 2 * pad;
        let geom = ConvGeom { c: co, h: oh, w: ow, k, stride, pad };
        debug_assert_eq!(geom.out_hw(), Some((h, wd)));
        let out = conv::conv_transpose2d_forward(
            self.value(x).data(),
            n,
            ci,
            &geom,
            self.value(w).data(),
            b.map(|b| self.value(b).data()),
        );
        let rg = self.rg(x) || self.rg(w) || b.is_some_and(|b| self.rg(b));
        let value = Tensor::from_vec(&[n, co, oh, ow], out).expect("transposed conv shape");
        self.push(value, Op::ConvTranspose2d { x, w, b, geom }, rg)
    }

    /// Per-sample, per-channel normalization to zero mean and unit variance.
    pub fn instance_norm(&mut self, x: Var, eps: T) -> Var {
        let (n, c, h, w) = self.value(x).nchw();
        let plane = h * w;
        let inv_n = T::one() / T::from_usize_lossy(plane);
        let src = self.value(x).data();
        let mut out = vec![T::zero(); src.len()];
        let mut inv_std = Vec::with_capacity(n * c);
        for p in 0..n * c {
            let s = &src[p * plane..(p + 1) * plane];
            let mean = s.iter().copied().sum::<T>() * inv_n;
            let var = s.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_n;
            let is = T::one() / (var + eps).sqrt();
            for (o, &v) in out[p * plane..(p + 1) * plane].iter_mut().zip(s) {
                *o = (v - mean) * is;
            }
            inv_std.push(is);
        }
        let rg = self.rg(x);
        let value = Tensor::from_vec(&[n, c, h, w], out).expect("norm shape");
        self.push(value, Op::InstanceNorm { x, inv_std }, rg)
    }

    pub fn leaky_relu(&mut self, x: Var, slope: T) -> Var {
        let value = self.value(x).map(|v| if v > T::zero() { v } else { v * slope });
        let rg = self.rg(x);
        self.push(value, Op::LeakyRelu { x, slope }, rg)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.leaky_relu(x, T::zero())
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| v.tanh());
        let rg = self.rg(x);
        self.push(value, Op::Tanh { x }, rg)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| T::one() / (T::one() + (-v).exp()));
        let rg = self.rg(x);
        self.push(value, Op::Sigmoid { x }, rg)
    }

    // ---- elementwise algebra ----------------------------------------------

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |p, q| p + q);
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::Add { a, b }, rg)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |p, q| p - q);
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::Sub { a, b }, rg)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |p, q| p * q);
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::Mul { a, b }, rg)
    }

    /// `a: [N, C, H, W]` times a single-channel `b: [N, 1, H, W]` broadcast
    /// over `a`'s channels.
    pub fn mul_channel_broadcast(&mut self, a: Var, b: Var) -> Var {
        let (n, c, h, w) = self.value(a).nchw();
        let bd = self.value(b).nchw();
        assert_eq!(bd, (n, 1, h, w), "broadcast operand must be [N, 1, H, W]");
        let plane = h * w;
        let av = self.value(a).data();
        let bv = self.value(b).data();
        let mut out = vec![T::zero(); av.len()];
        for s in 0..n {
            let bp = &bv[s * plane..(s + 1) * plane];
            for ch in 0..c {
                let off = (s * c + ch) * plane;
                for i in 0..plane {
                    out[off + i] = av[off + i] * bp[i];
                }
            }
        }
        let rg = self.rg(a) || self.rg(b);
        let value = Tensor::from_vec(&[n, c, h, w], out).expect("broadcast shape");
        self.push(value, Op::MulChannelBroadcast { a, b }, rg)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |p, q| p / q);
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::Div { a, b }, rg)
    }

    /// `scale * x + shift`.
    pub fn affine(&mut self, x: Var, scale: T, shift: T) -> Var {
        let value = self.value(x).map(|v| v * scale + shift);
        let rg = self.rg(x);
        self.push(value, Op::Affine { x, scale }, rg)
    }

    pub fn clamp_min(&mut self, x: Var, min: T) -> Var {
        let value = self.value(x).map(|v| v.max(min));
        let rg = self.rg(x);
        self.push(value, Op::ClampMin { x, min }, rg)
    }

    /// Elementwise `x^exponent`; callers keep `x` positive.
    pub fn powf(&mut self, x: Var, exponent: T) -> Var {
        let value = self.value(x).map(|v| v.powf(exponent));
        let rg = self.rg(x);
        self.push(value, Op::Powf { x, exponent }, rg)
    }

    // ---- layout -------------------------------------------------------------

    /// Concatenate `[N, C_i, H, W]` tensors along the channel axis.
    pub fn concat_channels(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat of nothing");
        let (n, _, h, w) = self.value(parts[0]).nchw();
        let plane = h * w;
        let mut chans = Vec::with_capacity(parts.len());
        for &p in parts {
            let (pn, pc, ph, pw) = self.value(p).nchw();
            assert_eq!((pn, ph, pw), (n, h, w), "concat spatial/batch mismatch");
            chans.push((p, pc));
        }
        let total: usize = chans.iter().map(|&(_, c)| c).sum();
        let mut out = Vec::with_capacity(n * total * plane);
        for s in 0..n {
            for &(p, c) in &chans {
                let d = self.value(p).data();
                out.extend_from_slice(&d[s * c * plane..(s + 1) * c * plane]);
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        let value = Tensor::from_vec(&[n, total, h, w], out).expect("concat shape");
        self.push(value, Op::Concat { parts: chans }, rg)
    }

    /// Channels `start..start + len` of a 4-d tensor.
    pub fn slice_channels(&mut self, x: Var, start: usize, len: usize) -> Var {
        let (n, c, h, w) = self.value(x).nchw();
        assert!(start + len <= c, "channel slice out of range");
        let plane = h * w;
        let d = self.value(x).data();
        let mut out = Vec::with_capacity(n * len * plane);
        for s in 0..n {
            out.extend_from_slice(&d[(s * c + start) * plane..(s * c + start + len) * plane]);
        }
        let rg = self.rg(x);
        let value = Tensor::from_vec(&[n, len, h, w], out).expect("slice shape");
        self.push(value, Op::SliceChannels { x, start }, rg)
    }

    // ---- filtering ------------------------------------------------------------

    /// Separable blur of every trailing `H x W` plane with reflective borders.
    pub fn blur(&mut self, x: Var, kernel: &[T]) -> Var {
        let dims = shape_of(self.dims(x));
        let (h, w) = (dims[dims.len() - 2], dims[dims.len() - 1]);
        let out = filter::blur_planes(self.value(x).data(), h, w, kernel);
        let rg = self.rg(x);
        let value = Tensor::from_vec(&dims, out).expect("blur shape");
        self.push(value, Op::Blur { x, kernel: kernel.to_vec() }, rg)
    }

    pub fn avg_pool2(&mut self, x: Var) -> Var {
        let dims = shape_of(self.dims(x));
        let nd = dims.len();
        let (out, oh, ow) = filter::avg_pool2(self.value(x).data(), dims[nd - 2], dims[nd - 1]);
        let mut odims = dims;
        odims[nd - 2] = oh;
        odims[nd - 1] = ow;
        let rg = self.rg(x);
        let value = Tensor::from_vec(&odims, out).expect("pool shape");
        self.push(value, Op::AvgPool2 { x }, rg)
    }

    // ---- reductions -------------------------------------------------------------

    pub fn mean(&mut self, x: Var) -> Var {
        let value = Tensor::scalar(self.value(x).mean());
        let rg = self.rg(x);
        self.push(value, Op::Mean { x }, rg)
    }

    /// `mean |a - b|`.
    pub fn abs_mean_diff(&mut self, a: Var, b: Var) -> Var {
        let va = self.value(a);
        let vb = self.value(b);
        assert_eq!(va.dims(), vb.dims(), "l1 shape mismatch");
        let s: T = va.data().iter().zip(vb.data()).map(|(&p, &q)| (p - q).abs()).sum();
        let value = Tensor::scalar(s / T::from_usize_lossy(va.len()));
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::AbsMeanDiff { a, b }, rg)
    }

    /// Mean Huber penalty with unit threshold: `0.5 d^2` below 1, `d - 0.5` above.
    pub fn smooth_l1(&mut self, a: Var, b: Var) -> Var {
        let va = self.value(a);
        let vb = self.value(b);
        assert_eq!(va.dims(), vb.dims(), "smooth-l1 shape mismatch");
        let half = T::lit(0.5);
        let s: T = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(&p, &q)| {
                let d = (p - q).abs();
                if d < T::one() {
                    half * d * d
                } else {
                    d - half
                }
            })
            .sum();
        let value = Tensor::scalar(s / T::from_usize_lossy(va.len()));
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::SmoothL1 { a, b }, rg)
    }

    /// `mean 1 / max(c - |v|, floor)`.
    pub fn reg_loss(&mut self, x: Var, c: T, floor: T) -> Var {
        let vx = self.value(x);
        let s: T = vx.data().iter().map(|&v| T::one() / (c - v.abs()).max(floor)).sum();
        let value = Tensor::scalar(s / T::from_usize_lossy(vx.len()));
        let rg = self.rg(x);
        self.push(value, Op::RegLoss { x, c, floor }, rg)
    }

    /// `mean log(max(x, eps))`, or `mean log(max(1 - x, eps))` when `complement`.
    pub fn log_mean(&mut self, x: Var, complement: bool, eps: T) -> Var {
        let vx = self.value(x);
        let s: T = vx
            .data()
            .iter()
            .map(|&v| {
                let a = if complement { T::one() - v } else { v };
                a.max(eps).ln()
            })
            .sum();
        let value = Tensor::scalar(s / T::from_usize_lossy(vx.len()));
        let rg = self.rg(x);
        self.push(value, Op::LogMean { x, complement, eps }, rg)
    }

    /// `sum_i w_i * s_i` over scalar nodes.
    pub fn weighted_sum(&mut self, terms: &[(Var, T)]) -> Var {
        let mut acc = T::zero();
        for &(v, w) in terms {
            acc += w * self.scalar(v);
        }
        let rg = terms.iter().any(|&(v, _)| self.rg(v));
        self.push(Tensor::scalar(acc), Op::WeightedSum { terms: terms.to_vec() }, rg)
    }

    // ---- reverse pass -------------------------------------------------------------

    /// Gradients of the scalar `loss` with respect to every node on its path.
    pub fn backward(&self, loss: Var) -> Grads<T> {
        assert_eq!(self.value(loss).len(), 1, "backward from a non-scalar");
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        if !self.rg(loss) {
            return Grads { grads };
        }
        grads[loss.0] = Some(Tensor::full(self.dims(loss), T::one()));
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Grads { grads }
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], v: Var, g: Tensor<T>) {
        if !self.rg(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn accumulate_data(&self, grads: &mut [Option<Tensor<T>>], v: Var, data: Vec<T>) {
        if !self.rg(v) {
            return;
        }
        let t = Tensor::from_vec(self.dims(v), data).expect("gradient shape");
        self.accumulate(grads, v, t);
    }

    fn propagate(&self, idx: usize, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let node = &self.nodes[idx];
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d { x, w, b, geom } => {
                let n = self.value(*x).dims()[0];
                let co = self.dims(*w)[0];
                let (dx, dw, db) = conv::conv2d_backward(
                    self.value(*x).data(),
                    n,
                    geom,
                    self.value(*w).data(),
                    co,
                    gd,
                    self.rg(*x),
                    self.rg(*w),
                );
                if let Some(dx) = dx {
                    self.accumulate_data(grads, *x, dx);
                }
                if let Some(dw) = dw {
                    self.accumulate_data(grads, *w, dw);
                }
                if let Some(b) = b {
                    self.accumulate_data(grads, *b, db);
                }
            }
            Op::ConvTranspose2d { x, w, b, geom } => {
                let (n, ci, _, _) = self.value(*x).nchw();
                let (dx, dw, db) = conv::conv_transpose2d_backward(
                    self.value(*x).data(),
                    n,
                    ci,
                    geom,
                    self.value(*w).data(),
                    gd,
                    self.rg(*x),
                    self.rg(*w),
                );
                if let Some(dx) = dx {
                    self.accumulate_data(grads, *x, dx);
                }
                if let Some(dw) = dw {
                    self.accumulate_data(grads, *w, dw);
                }
                if let Some(b) = b {
                    self.accumulate_data(grads, *b, db);
                }
            }
            Op::InstanceNorm { x, inv_std } => {
                let (_, _, h, w) = node.value.nchw();
                let plane = h * w;
                let inv_n = T::one() / T::from_usize_lossy(plane);
                let y = node.value.data();
                let mut dx = vec![T::zero(); y.len()];
                for (p, &is) in inv_std.iter().enumerate() {
                    let r = p * plane..(p + 1) * plane;
                    let (gy, yy) = (&gd[r.clone()], &y[r.clone()]);
                    let mg = gy.iter().copied().sum::<T>() * inv_n;
                    let mgy = gy.iter().zip(yy).map(|(&a, &b)| a * b).sum::<T>() * inv_n;
                    for ((o, &a), &b) in dx[r].iter_mut().zip(gy).zip(yy) {
                        *o = is * (a - mg - b * mgy);
                    }
                }
                self.accumulate_data(grads, *x, dx);
            }
            Op::LeakyRelu { x, slope } => {
                let xv = self.value(*x).data();
                let dx = gd
                    .iter()
                    .zip(xv)
                    .map(|(&g, &v)| if v > T::zero() { g } else { g * *slope })
                    .collect();
                self.accumulate_data(grads, *x, dx);
            }
            Op::Tanh { x } => {
                let y = node.value.data();
                let dx = gd.iter().zip(y).map(|(&g, &t)| g * (T::one() - t * t)).collect();
                self.accumulate_data(grads, *x, dx);
            }
            Op::Sigmoid { x } => {
                let y = node.value.data();
                let dx = gd.iter().zip(y).map(|(&g, &s)| g * s * (T::one() - s)).collect();
                self.accumulate_data(grads, *x, dx);
            }
            Op::Add { a, b } => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Sub { a, b } => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.map(|v| -v));
            }
            Op::Mul { a, b } => {
                if self.rg(*a) {
                    let d = g.zip_map(self.value(*b), |p, q| p * q);
                    self.accumulate(grads, *a, d);
                }
                if self.rg(*b) {
                    let d = g.zip_map(self.value(*a), |p, q| p * q);
                    self.accumulate(grads, *b, d);
                }
            }
            Op::MulChannelBroadcast { a, b } => {
                let (n, c, h, w) = self.value(*a).nchw();
                let plane = h * w;
                let av = self.value(*a).data();
                let bv = self.value(*b).data();
                if self.rg(*a) {
                    let mut da = vec![T::zero(); av.len()];
                    for s in 0..n {
                        for ch in 0..c {
                            let off = (s * c + ch) * plane;
                            for i in 0..plane {
                                da[off + i] = gd[off + i] * bv[s * plane + i];
                            }
                        }
                    }
                    self.accumulate_data(grads, *a, da);
                }
                if self.rg(*b) {
                    let mut db = vec![T::zero(); bv.len()];
                    for s in 0..n {
                        for ch in 0..c {
                            let off = (s * c + ch) * plane;
                            for i in 0..plane {
                                db[s * plane + i] += gd[off + i] * av[off + i];
                            }
                        }
                    }
                    self.accumulate_data(grads, *b, db);
                }
            }
            Op::Div { a, b } => {
                let bv = self.value(*b);
                if self.rg(*a) {
                    let d = g.zip_map(bv, |p, q| p / q);
                    self.accumulate(grads, *a, d);
                }
                if self.rg(*b) {
                    // d(a/b)/db = -(a/b)/b
                    let q = node.value.zip_map(bv, |r, q| r / q);
                    let d = g.zip_map(&q, |p, r| -p * r);
                    self.accumulate(grads, *b, d);
                }
            }
            Op::Affine { x, scale } => {
                let s = *scale;
                self.accumulate(grads, *x, g.map(|v| v * s));
            }
            Op::ClampMin { x, min } => {
                let xv = self.value(*x);
                let d = g.zip_map(xv, |p, v| if v >= *min { p } else { T::zero() });
                self.accumulate(grads, *x, d);
            }
            Op::Powf { x, exponent } => {
                let xv = self.value(*x);
                let e = *exponent;
                let d = g.zip_map(xv, |p, v| p * e * v.powf(e - T::one()));
                self.accumulate(grads, *x, d);
            }
            Op::Concat { parts } => {
                let (n, total, h, w) = node.value.nchw();
                let plane = h * w;
                let mut offset = 0;
                for &(p, c) in parts {
                    if self.rg(p) {
                        let mut d = Vec::with_capacity(n * c * plane);
                        for s in 0..n {
                            let base = (s * total + offset) * plane;
                            d.extend_from_slice(&gd[base..base + c * plane]);
                        }
                        self.accumulate_data(grads, p, d);
                    }
                    offset += c;
                }
            }
            Op::SliceChannels { x, start } => {
                let (n, c, h, w) = self.value(*x).nchw();
                let len = node.value.dims()[1];
                let plane = h * w;
                let mut d = vec![T::zero(); n * c * plane];
                for s in 0..n {
                    let dst = (s * c + start) * plane;
                    let src = s * len * plane;
                    d[dst..dst + len * plane].copy_from_slice(&gd[src..src + len * plane]);
                }
                self.accumulate_data(grads, *x, d);
            }
            Op::Blur { x, kernel } => {
                let dims = self.dims(*x);
                let (h, w) = (dims[dims.len() - 2], dims[dims.len() - 1]);
                let d = filter::blur_planes_adjoint(gd, h, w, kernel);
                self.accumulate_data(grads, *x, d);
            }
            Op::AvgPool2 { x } => {
                let dims = self.dims(*x);
                let (h, w) = (dims[dims.len() - 2], dims[dims.len() - 1]);
                let d = filter::avg_pool2_adjoint(gd, h, w);
                self.accumulate_data(grads, *x, d);
            }
            Op::Mean { x } => {
                let n = self.value(*x).len();
                let v = gd[0] / T::from_usize_lossy(n);
                self.accumulate(grads, *x, Tensor::full(self.dims(*x), v));
            }
            Op::AbsMeanDiff { a, b } => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let k = gd[0] / T::from_usize_lossy(va.len());
                let da = va.zip_map(vb, |p, q| {
                    let d = p - q;
                    if d > T::zero() {
                        k
                    } else if d < T::zero() {
                        -k
                    } else {
                        T::zero()
                    }
                });
                if self.rg(*b) {
                    self.accumulate(grads, *b, da.map(|v| -v));
                }
                self.accumulate(grads, *a, da);
            }
            Op::SmoothL1 { a, b } => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let k = gd[0] / T::from_usize_lossy(va.len());
                let da = va.zip_map(vb, |p, q| {
                    let d = p - q;
                    if d.abs() < T::one() {
                        k * d
                    } else {
                        k * d.signum()
                    }
                });
                if self.rg(*b) {
                    self.accumulate(grads, *b, da.map(|v| -v));
                }
                self.accumulate(grads, *a, da);
            }
            Op::RegLoss { x, c, floor } => {
                let vx = self.value(*x);
                let k = gd[0] / T::from_usize_lossy(vx.len());
                let d = vx.map(|v| {
                    let den = *c - v.abs();
                    if den > *floor {
                        // d/dv 1/(c - |v|) = sign(v) / (c - |v|)^2
                        k * v.signum() / (den * den) * if v == T::zero() { T::zero() } else { T::one() }
                    } else {
                        T::zero()
                    }
                });
                self.accumulate(grads, *x, d);
            }
            Op::LogMean { x, complement, eps } => {
                let vx = self.value(*x);
                let k = gd[0] / T::from_usize_lossy(vx.len());
                let d = vx.map(|v| {
                    let a = if *complement { T::one() - v } else { v };
                    if a < *eps {
                        T::zero()
                    } else if *complement {
                        -k / a
                    } else {
                        k / a
                    }
                });
                self.accumulate(grads, *x, d);
            }
            Op::WeightedSum { terms } => {
                for &(v, w) in terms {
                    self.accumulate(grads, v, Tensor::scalar(gd[0] * w));
                }
            }
        }
    }
}
