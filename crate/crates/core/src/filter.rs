//! Separable Gaussian filtering with reflective borders, and 2x average pooling.
//!
//! These kernels are shared by the differentiable SSIM loss and the 8-bit SSIM
//! metric so both evaluate exactly the same window.

use crate::scalar::Scalar;

/// Normalized 1-d Gaussian taps of odd length `size`.
pub fn gaussian_kernel<T: Scalar>(size: usize, sigma: f64) -> Vec<T> {
    assert!(size % 2 == 1, "Gaussian window must have odd length");
    let half = (size / 2) as f64;
    let raw: Vec<f64> = (0..size)
        .map(|i| {
            let x = i as f64 - half;
            (-(x * x) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| T::lit(v / total)).collect()
}

/// Mirror index without repeating the edge sample (`-1 -> 1`, `n -> n-2`).
#[inline]
pub fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let r = if i < 0 {
        -i
    } else if i >= n {
        2 * n - 2 - i
    } else {
        i
    };
    debug_assert!((0..n).contains(&r), "reflect index out of range");
    r as usize
}

/// Smallest extent a plane may have along one axis for a kernel of `size` taps.
pub fn min_extent(size: usize) -> usize {
    size / 2 + 1
}

fn pass<T: Scalar>(
    src: &[T],
    dst: &mut [T],
    lines: usize,
    len: usize,
    line_stride: usize,
    step: usize,
    kernel: &[T],
) {
    let half = (kernel.len() / 2) as isize;
    for line in 0..lines {
        let base = line * line_stride;
        for j in 0..len {
            let mut acc = T::zero();
            for (k, &tap) in kernel.iter().enumerate() {
                let idx = reflect(j as isize + k as isize - half, len);
                acc += tap * src[base + idx * step];
            }
            dst[base + j * step] = acc;
        }
    }
}

fn pass_adjoint<T: Scalar>(
    src: &[T],
    dst: &mut [T],
    lines: usize,
    len: usize,
    line_stride: usize,
    step: usize,
    kernel: &[T],
) {
    let half = (kernel.len() / 2) as isize;
    for line in 0..lines {
        let base = line * line_stride;
        for j in 0..len {
            dst[base + j * step] = T::zero();
        }
        for j in 0..len {
            let g = src[base + j * step];
            for (k, &tap) in kernel.iter().enumerate() {
                let idx = reflect(j as isize + k as isize - half, len);
                dst[base + idx * step] += tap * g;
            }
        }
    }
}

/// Blur every `h x w` plane of `planes` (length `count * h * w`) with the
/// separable kernel, reflective borders.
pub fn blur_planes<T: Scalar>(planes: &[T], h: usize, w: usize, kernel: &[T]) -> Vec<T> {
    let count = planes.len() / (h * w);
    let mut tmp = vec![T::zero(); planes.len()];
    let mut out = vec![T::zero(); planes.len()];
    // rows
    pass(planes, &mut tmp, count * h, w, w, 1, kernel);
    // columns
    for p in 0..count {
        let off = p * h * w;
        pass(&tmp[off..off + h * w], &mut out[off..off + h * w], w, h, 1, w, kernel);
    }
    out
}

/// Transpose of [`blur_planes`] (reflection makes the operator non-symmetric).
pub fn blur_planes_adjoint<T: Scalar>(planes: &[T], h: usize, w: usize, kernel: &[T]) -> Vec<T> {
    let count = planes.len() / (h * w);
    let mut tmp = vec![T::zero(); planes.len()];
    let mut out = vec![T::zero(); planes.len()];
    for p in 0..count {
        let off = p * h * w;
        pass_adjoint(&planes[off..off + h * w], &mut tmp[off..off + h * w], w, h, 1, w, kernel);
    }
    pass_adjoint(&tmp, &mut out, count * h, w, w, 1, kernel);
    out
}

/// 2x2 average pooling of each plane; odd trailing rows/columns are dropped.
pub fn avg_pool2<T: Scalar>(planes: &[T], h: usize, w: usize) -> (Vec<T>, usize, usize) {
    let count = planes.len() / (h * w);
    let (oh, ow) = (h / 2, w / 2);
    let quarter = T::lit(0.25);
    let mut out = vec![T::zero(); count * oh * ow];
    for p in 0..count {
        let src = &planes[p * h * w..];
        let dst = &mut out[p * oh * ow..];
        for i in 0..oh {
            for j in 0..ow {
                let a = src[(2 * i) * w + 2 * j];
                let b = src[(2 * i) * w + 2 * j + 1];
                let c = src[(2 * i + 1) * w + 2 * j];
                let d = src[(2 * i + 1) * w + 2 * j + 1];
                dst[i * ow + j] = (a + b + c + d) * quarter;
            }
        }
    }
    (out, oh, ow)
}

/// Transpose of [`avg_pool2`].
pub fn avg_pool2_adjoint<T: Scalar>(grad: &[T], h: usize, w: usize) -> Vec<T> {
    let (oh, ow) = (h / 2, w / 2);
    let count = grad.len() / (oh * ow).max(1);
    let quarter = T::lit(0.25);
    let mut out = vec![T::zero(); count * h * w];
    for p in 0..count {
        let src = &grad[p * oh * ow..];
        let dst = &mut out[p * h * w..];
        for i in 0..oh {
            for j in 0..ow {
                let g = src[i * ow + j] * quarter;
                dst[(2 * i) * w + 2 * j] += g;
                dst[(2 * i) * w + 2 * j + 1] += g;
                dst[(2 * i + 1) * w + 2 * j] += g;
                dst[(2 * i + 1) * w + 2 * j + 1] += g;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let k: Vec<f64> = gaussian_kernel(11, 1.5);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for i in 0..5 {
            assert_eq!(k[i], k[10 - i]);
        }
    }

    #[test]
    fn blur_keeps_constants() {
        let k: Vec<f64> = gaussian_kernel(11, 1.5);
        let plane = vec![0.3; 2 * 12 * 14];
        let out = blur_planes(&plane, 12, 14, &k);
        assert!(out.iter().all(|v| (v - 0.3).abs() < 1e-14));
    }

    #[test]
    fn adjoint_satisfies_inner_product_identity() {
        let (h, w) = (7, 9);
        let k: Vec<f64> = gaussian_kernel(5, 1.0);
        let x: Vec<f64> = (0..h * w).map(|i| ((i * 7919) % 13) as f64 / 13.0).collect();
        let y: Vec<f64> = (0..h * w).map(|i| ((i * 104729) % 17) as f64 / 17.0 - 0.5).collect();
        let ax = blur_planes(&x, h, w, &k);
        let aty = blur_planes_adjoint(&y, h, w, &k);
        let lhs: f64 = ax.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&aty).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);

        let (px, ph, pw) = avg_pool2(&x, h, w);
        let gy: Vec<f64> = (0..ph * pw).map(|i| i as f64 * 0.1).collect();
        let back = avg_pool2_adjoint(&gy, h, w);
        let lhs: f64 = px.iter().zip(&gy).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn reflect_mirrors_without_edge_repeat() {
        assert_eq!(reflect(-1, 5), 1);
        assert_eq!(reflect(-2, 5), 2);
        assert_eq!(reflect(5, 5), 3);
        assert_eq!(reflect(6, 5), 2);
        assert_eq!(reflect(3, 5), 3);
    }
}
