//! Procedural reference scenes for building datasets without a photo corpus.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imgcore::{self, ImageTensor, Space};
use crate::tensor::Tensor;

/// A smooth two-color gradient with a handful of flat rectangles and disks and
/// a faint sinusoidal texture. Values stay within `[0.02, 0.98]`.
pub fn scene(height: usize, width: usize, rng: &mut impl Rng) -> ImageTensor<f64> {
    let (h, w) = (height as f64, width as f64);
    let c0: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.1..0.9));
    let c1: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.1..0.9));
    let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let (ca, sa) = (angle.cos(), angle.sin());
    let freq: f64 = rng.gen_range(0.05..0.3);
    let amp: f64 = rng.gen_range(0.0..0.08);

    enum Shape {
        Rect { y0: f64, x0: f64, y1: f64, x1: f64 },
        Disk { cy: f64, cx: f64, r: f64 },
    }
    let shapes: Vec<(Shape, [f64; 3])> = (0..rng.gen_range(2..6))
        .map(|_| {
            let color = std::array::from_fn(|_| rng.gen_range(0.05..0.95));
            let shape = if rng.gen_bool(0.5) {
                let y0 = rng.gen_range(0.0..h);
                let x0 = rng.gen_range(0.0..w);
                Shape::Rect { y0, x0, y1: y0 + rng.gen_range(h / 8.0..h / 2.0), x1: x0 + rng.gen_range(w / 8.0..w / 2.0) }
            } else {
                Shape::Disk { cy: rng.gen_range(0.0..h), cx: rng.gen_range(0.0..w), r: rng.gen_range(h / 10.0..h / 3.0) }
            };
            (shape, color)
        })
        .collect();

    let mut data = vec![0.0; 3 * height * width];
    for i in 0..height {
        for j in 0..width {
            let (y, x) = (i as f64, j as f64);
            let t = (((y / h - 0.5) * sa + (x / w - 0.5) * ca) + 0.75) / 1.5;
            let mut px: [f64; 3] = std::array::from_fn(|c| c0[c] + (c1[c] - c0[c]) * t.clamp(0.0, 1.0));
            for (shape, color) in &shapes {
                let inside = match *shape {
                    Shape::Rect { y0, x0, y1, x1 } => y >= y0 && y < y1 && x >= x0 && x < x1,
                    Shape::Disk { cy, cx, r } => (y - cy).powi(2) + (x - cx).powi(2) <= r * r,
                };
                if inside {
                    px = *color;
                }
            }
            let tex = amp * ((x + 0.5 * y) * freq).sin();
            for c in 0..3 {
                data[(c * height + i) * width + j] = (px[c] + tex).clamp(0.02, 0.98);
            }
        }
    }
    let t = Tensor::from_vec(&[3, height, width], data).expect("scene dims");
    ImageTensor::new(t, Space::Storage01).expect("scene values in range")
}

/// Write `count` scenes as `scene_000.png`, ... into `dir`.
pub fn write_sources(dir: &Path, count: usize, height: usize, width: usize, seed: u64) -> Result<Vec<PathBuf>> {
    if count == 0 || height == 0 || width == 0 {
        return Err(Error::Invalid("synthetic source count and size must be positive".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let p = dir.join(format!("scene_{k:03}.png"));
            imgcore::save_png(&scene(height, width, &mut rng), &p)?;
            Ok(p)
        })
        .collect()
}
