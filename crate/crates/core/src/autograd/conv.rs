//! im2col / col2im convolution kernels on single `[C, H, W]` samples.

use crate::scalar::{gemm, Scalar};

/// Geometry of a strided, zero-padded 2-d convolution over a `[c, h, w]` input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    /// Output extent, or `None` when the kernel does not fit.
    pub fn out_hw(&self) -> Option<(usize, usize)> {
        let ph = self.h + 2 * self.pad;
        let pw = self.w + 2 * self.pad;
        if ph < self.k || pw < self.k || self.stride == 0 {
            return None;
        }
        Some(((ph - self.k) / self.stride + 1, (pw - self.k) / self.stride + 1))
    }

    pub fn col_rows(&self) -> usize {
        self.c * self.k * self.k
    }
}

/// Unfold `x` (`[c, h, w]`) into a `[c*k*k, oh*ow]` column matrix.
pub fn im2col<T: Scalar>(x: &[T], g: &ConvGeom, cols: &mut [T]) {
    let (oh, ow) = g.out_hw().expect("valid conv geometry");
    let n = oh * ow;
    debug_assert_eq!(cols.len(), g.col_rows() * n);
    for c in 0..g.c {
        let plane = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.k {
            for kj in 0..g.k {
                let row = (c * g.k + ki) * g.k + kj;
                let dst = &mut cols[row * n..(row + 1) * n];
                for oi in 0..oh {
                    let ii = (oi * g.stride + ki) as isize - g.pad as isize;
                    let line = &mut dst[oi * ow..(oi + 1) * ow];
                    if ii < 0 || ii >= g.h as isize {
                        line.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let src = &plane[ii as usize * g.w..(ii as usize + 1) * g.w];
                    for (oj, v) in line.iter_mut().enumerate() {
                        let jj = (oj * g.stride + kj) as isize - g.pad as isize;
                        *v = if jj < 0 || jj >= g.w as isize { T::zero() } else { src[jj as usize] };
                    }
                }
            }
        }
    }
}

/// Fold a `[c*k*k, oh*ow]` column matrix back, accumulating into `x`.
pub fn col2im<T: Scalar>(cols: &[T], g: &ConvGeom, x: &mut [T]) {
    let (oh, ow) = g.out_hw().expect("valid conv geometry");
    let n = oh * ow;
    for c in 0..g.c {
        let plane = &mut x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.k {
            for kj in 0..g.k {
                let row = (c * g.k + ki) * g.k + kj;
                let src = &cols[row * n..(row + 1) * n];
                for oi in 0..oh {
                    let ii = (oi * g.stride + ki) as isize - g.pad as isize;
                    if ii < 0 || ii >= g.h as isize {
                        continue;
                    }
                    let dst = &mut plane[ii as usize * g.w..(ii as usize + 1) * g.w];
                    for oj in 0..ow {
                        let jj = (oj * g.stride + kj) as isize - g.pad as isize;
                        if jj >= 0 && (jj as usize) < g.w {
                            dst[jj as usize] += src[oi * ow + oj];
                        }
                    }
                }
            }
        }
    }
}

/// Forward convolution of a batch. `w` is `[co, ci, k, k]`.
pub fn conv2d_forward<T: Scalar>(
    x: &[T],
    batch: usize,
    g: &ConvGeom,
    w: &[T],
    co: usize,
    bias: Option<&[T]>,
) -> Vec<T> {
    let (oh, ow) = g.out_hw().expect("valid conv geometry");
    let n = oh * ow;
    let rows = g.col_rows();
    let mut cols = vec![T::zero(); rows * n];
    let mut out = vec![T::zero(); batch * co * n];
    let in_len = g.c * g.h * g.w;
    for b in 0..batch {
        im2col(&x[b * in_len..(b + 1) * in_len], g, &mut cols);
        let dst = &mut out[b * co * n..(b + 1) * co * n];
        if let Some(bias) = bias {
            for (o, &bv) in bias.iter().enumerate() {
                dst[o * n..(o + 1) * n].iter_mut().for_each(|v| *v = bv);
            }
        }
        let beta = if bias.is_some() { T::one() } else { T::zero() };
        gemm(co, rows, n, T::one(), w, false, &cols, false, beta, dst);
    }
    out
}

/// Gradients of [`conv2d_forward`]; returns `(dx, dw, dbias)` for the requested parts.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward<T: Scalar>(
    x: &[T],
    batch: usize,
    g: &ConvGeom,
    w: &[T],
    co: usize,
    dout: &[T],
    want_dx: bool,
    want_dw: bool,
) -> (Option<Vec<T>>, Option<Vec<T>>, Vec<T>) {
    let (oh, ow) = g.out_hw().expect("valid conv geometry");
    let n = oh * ow;
    let rows = g.col_rows();
    let in_len = g.c * g.h * g.w;
    let mut cols = vec![T::zero(); rows * n];
    let mut dx = want_dx.then(|| vec![T::zero(); batch * in_len]);
    let mut dw = want_dw.then(|| vec![T::zero(); co * rows]);
    let mut db = vec![T::zero(); co];
    for b in 0..batch {
        let dy = &dout[b * co * n..(b + 1) * co * n];
        for (o, acc) in db.iter_mut().enumerate() {
            *acc += dy[o * n..(o + 1) * n].iter().copied().sum();
        }
        if let Some(dw) = dw.as_mut() {
            im2col(&x[b * in_len..(b + 1) * in_len], g, &mut cols);
            gemm(co, n, rows, T::one(), dy, false, &cols, true, T::one(), dw);
        }
        if let Some(dx) = dx.as_mut() {
            gemm(rows, co, n, T::one(), w, true, dy, false, T::zero(), &mut cols);
            col2im(&cols, g, &mut dx[b * in_len..(b + 1) * in_len]);
        }
    }
    (dx, dw, db)
}

/// Transposed convolution. `g` describes the *adjoint* convolution taking the
/// `[co, oh, ow]` output back to the `[ci, h, w]` input; `w` is `[ci, co, k, k]`.
pub fn conv_transpose2d_forward<T: Scalar>(
    x: &[T],
    batch: usize,
    ci: usize,
    g: &ConvGeom,
    w: &[T],
    bias: Option<&[T]>,
) -> Vec<T> {
    let (h, wd) = g.out_hw().expect("valid conv geometry");
    let n = h * wd;
    let rows = g.col_rows();
    let out_len = g.c * g.h * g.w;
    let mut cols = vec![T::zero(); rows * n];
    let mut out = vec![T::zero(); batch * out_len];
    for b in 0..batch {
        let xb = &x[b * ci * n..(b + 1) * ci * n];
        gemm(rows, ci, n, T::one(), w, true, xb, false, T::zero(), &mut cols);
        let dst = &mut out[b * out_len..(b + 1) * out_len];
        col2im(&cols, g, dst);
        if let Some(bias) = bias {
            let plane = g.h * g.w;
            for (o, &bv) in bias.iter().enumerate() {
                dst[o * plane..(o + 1) * plane].iter_mut().for_each(|v| *v += bv);
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
pub fn conv_transpose2d_backward<T: Scalar>(
    x: &[T],
    batch: usize,
    ci: usize,
    g: &ConvGeom,
    w: &[T],
    dout: &[T],
    want_dx: bool,
    want_dw: bool,
) -> (Option<Vec<T>>, Option<Vec<T>>, Vec<T>) {
    let (h, wd) = g.out_hw().expect("valid conv geometry");
    let n = h * wd;
    let rows = g.col_rows();
    let out_len = g.c * g.h * g.w;
    let plane = g.h * g.w;
    let mut cols = vec![T::zero(); rows * n];
    let mut dx = want_dx.then(|| vec![T::zero(); batch * ci * n]);
    let mut dw = want_dw.then(|| vec![T::zero(); ci * rows]);
    let mut db = vec![T::zero(); g.c];
    for b in 0..batch {
        let dy = &dout[b * out_len..(b + 1) * out_len];
        for (o, acc) in db.iter_mut().enumerate() {
            *acc += dy[o * plane..(o + 1) * plane].iter().copied().sum();
        }
        if dx.is_none() && dw.is_none() {
            continue;
        }
        im2col(dy, g, &mut cols);
        if let Some(dx) = dx.as_mut() {
            gemm(ci, rows, n, T::one(), w, false, &cols, false, T::zero(), &mut dx[b * ci * n..(b + 1) * ci * n]);
        }
        if let Some(dw) = dw.as_mut() {
            let xb = &x[b * ci * n..(b + 1) * ci * n];
            gemm(ci, n, rows, T::one(), xb, false, &cols, true, T::one(), dw);
        }
    }
    (dx, dw, db)
}
