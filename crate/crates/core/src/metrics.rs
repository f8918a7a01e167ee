//! Full-reference quality metrics on 8-bit images and the evaluation loop.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{num_workers, BrightnessLevel, Manifest, ManifestRecord, Split};
use crate::error::{Error, Result};
use crate::filter::reflect;
use crate::imgcore::{quantize, ImageTensor, ImageU8};
use crate::losses::{ssim_map, SsimConfig};
use crate::model::Generator;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// PSNR reported for identical images.
pub const PSNR_SENTINEL_DB: f64 = 99.0;

const PEAK: f64 = 255.0;

fn same_shape(a: &ImageU8, b: &ImageU8) -> Result<()> {
    if (a.channels, a.height, a.width) != (b.channels, b.height, b.width) {
        return Err(Error::Shape(format!(
            "metric inputs differ: {}x{}x{} vs {}x{}x{}",
            a.channels, a.height, a.width, b.channels, b.height, b.width
        )));
    }
    Ok(())
}

/// Mean squared difference on the 0-255 scale.
pub fn mse(a: &ImageU8, b: &ImageU8) -> Result<f64> {
    same_shape(a, b)?;
    let total: u64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&p, &q)| {
            let d = i64::from(p) - i64::from(q);
            (d * d) as u64
        })
        .sum();
    Ok(total as f64 / a.data.len() as f64)
}

/// `10 log10(255^2 / mse)`, or [`PSNR_SENTINEL_DB`] when `mse` is 0.
pub fn psnr(mse: f64) -> Result<f64> {
    if !(mse >= 0.0) {
        return Err(Error::Invalid(format!("PSNR needs a non-negative MSE, got {mse}")));
    }
    if mse == 0.0 {
        return Ok(PSNR_SENTINEL_DB);
    }
    Ok(10.0 * (PEAK * PEAK / mse).log10())
}

fn u8_tensor(img: &ImageU8) -> Tensor<f64> {
    let data = img.data.iter().map(|&v| f64::from(v)).collect();
    Tensor::from_vec(&[img.channels, img.height, img.width], data).expect("u8 dims")
}

/// Mean Gaussian-windowed SSIM with `L = 255`.
pub fn ssim_metric(a: &ImageU8, b: &ImageU8) -> Result<f64> {
    same_shape(a, b)?;
    let map = ssim_map(&u8_tensor(a), &u8_tensor(b), &SsimConfig::eight_bit())?;
    Ok(map.mean())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub id: String,
    pub level: BrightnessLevel,
    pub mse: f64,
    pub psnr_db: f64,
    pub ssim: f64,
}

impl ImageMetrics {
    pub fn compute(id: &str, level: BrightnessLevel, output: &ImageU8, reference: &ImageU8) -> Result<Self> {
        let m = mse(output, reference)?;
        Ok(ImageMetrics {
            id: id.to_string(),
            level,
            mse: m,
            psnr_db: psnr(m)?,
            ssim: ssim_metric(output, reference)?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub count: usize,
    pub mse: f64,
    pub psnr_db: f64,
    pub ssim: f64,
}

impl Aggregate {
    fn of<'a>(rows: impl Iterator<Item = &'a ImageMetrics>) -> Self {
        let (mut n, mut m, mut p, mut s) = (0usize, 0.0, 0.0, 0.0);
        for r in rows {
            n += 1;
            m += r.mse;
            p += r.psnr_db;
            s += r.ssim;
        }
        let k = n.max(1) as f64;
        Aggregate { count: n, mse: m / k, psnr_db: p / k, ssim: s / k }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelAggregate {
    pub level: BrightnessLevel,
    #[serde(flatten)]
    pub metrics: Aggregate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub label: String,
    pub per_image: Vec<ImageMetrics>,
    pub per_level: Vec<LevelAggregate>,
    pub overall: Aggregate,
}

impl MetricReport {
    /// Aggregate rows; rows are kept sorted by id so reports compare independent of evaluation order.
    pub fn from_rows(label: impl Into<String>, mut rows: Vec<ImageMetrics>) -> Self {
        rows.sort_by(|a, b| a.id.cmp(&b.id));
        let mut levels: Vec<BrightnessLevel> = Vec::new();
        for r in &rows {
            if !levels.contains(&r.level) {
                levels.push(r.level);
            }
        }
        levels.sort_by(|a, b| a.value().total_cmp(&b.value()));
        let per_level = levels
            .into_iter()
            .map(|level| LevelAggregate { level, metrics: Aggregate::of(rows.iter().filter(|r| r.level == level)) })
            .collect();
        let overall = Aggregate::of(rows.iter());
        MetricReport { label: label.into(), per_image: rows, per_level, overall }
    }

    /// Union of two reports over disjoint images.
    pub fn merge(self, other: MetricReport) -> Result<Self> {
        let mut rows = self.per_image;
        for r in other.per_image {
            if rows.iter().any(|q| q.id == r.id) {
                return Err(Error::Invalid(format!("image `{}` appears in both reports", r.id)));
            }
            rows.push(r);
        }
        Ok(Self::from_rows(self.label, rows))
    }

    pub fn level(&self, level: BrightnessLevel) -> Option<&Aggregate> {
        self.per_level.iter().find(|l| l.level == level).map(|l| &l.metrics)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("id,level,mse,psnr_db,ssim\n");
        for r in &self.per_image {
            let _ = writeln!(s, "{},{},{},{},{}", r.id, r.level.value(), r.mse, r.psnr_db, r.ssim);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Aggregates only; per-image rows go to CSV.
    pub fn write_json(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Summary<'a> {
            label: &'a str,
            per_level: &'a [LevelAggregate],
            overall: &'a Aggregate,
        }
        let body = serde_json::to_string_pretty(&Summary {
            label: &self.label,
            per_level: &self.per_level,
            overall: &self.overall,
        })?;
        fs::write(path, body).map_err(|e| Error::io(path, e))
    }
}

/// Anything that maps a network-space `[1, 3, H, W]` image to an enhanced one.
pub trait Enhancer<T: Scalar>: Sync {
    fn label(&self) -> String;

    fn enhance(&self, x: &Tensor<T>) -> Result<Tensor<T>>;

    /// Spatial extents the model accepts must be multiples of this.
    fn size_multiple(&self) -> usize {
        1
    }
}

/// Baseline that returns its input.
#[derive(Clone, Copy, Debug, Default)]
pub struct Identity;

impl<T: Scalar> Enhancer<T> for Identity {
    fn label(&self) -> String {
        "identity".into()
    }

    fn enhance(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(x.clone())
    }
}

/// A generator paired with a display label.
pub struct Labeled<'a, T> {
    pub label: String,
    pub generator: &'a Generator<T>,
}

impl<T: Scalar> Enhancer<T> for Labeled<'_, T> {
    fn label(&self) -> String {
        self.label.clone()
    }

    fn enhance(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.generator.forward(x, None)?.x_hat)
    }

    fn size_multiple(&self) -> usize {
        self.generator.config.size_multiple()
    }
}

/// Mirror-pad the trailing two dims of `[N, C, H, W]` up to the given extents.
pub fn pad_reflect<T: Scalar>(x: &Tensor<T>, height: usize, width: usize) -> Tensor<T> {
    let (n, c, h, w) = x.nchw();
    let mirror = |i: usize, len: usize| -> usize {
        if len == 1 {
            return 0;
        }
        let period = 2 * len - 2;
        reflect((i % period) as isize, len)
    };
    let src = x.data();
    Tensor::from_fn(&[n, c, height, width], |k| {
        let (plane, rem) = (k / (height * width), k % (height * width));
        let (i, j) = (rem / width, rem % width);
        src[plane * h * w + mirror(i, h) * w + mirror(j, w)]
    })
}

/// Keep the top-left `height x width` window of `[N, C, H, W]`.
pub fn crop<T: Scalar>(x: &Tensor<T>, height: usize, width: usize) -> Tensor<T> {
    let (n, c, h, w) = x.nchw();
    let src = x.data();
    Tensor::from_fn(&[n, c, height, width], |k| {
        let (plane, rem) = (k / (height * width), k % (height * width));
        src[plane * h * w + (rem / width) * w + rem % width]
    })
}

/// Run an enhancer on one network-space `[3, H, W]` image, padding to its size
/// multiple. The result is in storage space.
pub fn enhance_image<T: Scalar, E: Enhancer<T> + ?Sized>(model: &E, x: &ImageTensor<T>) -> Result<ImageTensor<T>> {
    let (c, h, w) = (x.channels(), x.height(), x.width());
    let batch = x.tensor().clone().reshape(&[1, c, h, w])?;
    let m = model.size_multiple().max(1);
    let (ph, pw) = (h.div_ceil(m) * m, w.div_ceil(m) * m);
    let out = if (ph, pw) == (h, w) {
        model.enhance(&batch)?
    } else {
        crop(&model.enhance(&pad_reflect(&batch, ph, pw))?, h, w)
    };
    let (_, oc, oh, ow) = out.nchw();
    if (oh, ow) != (h, w) {
        return Err(Error::Shape(format!("enhancer returned {oh}x{ow} for a {h}x{w} input")));
    }
    ImageTensor::from_network_tensor(out.reshape(&[oc, oh, ow])?)?.from_network()
}

fn evaluate_record<T: Scalar, E: Enhancer<T> + ?Sized>(
    model: &E,
    manifest: &Manifest,
    r: &ManifestRecord,
) -> Result<ImageMetrics> {
    let (x, y) = manifest.load_pair::<T>(r)?;
    let out = quantize(&enhance_image(model, &x)?)?;
    let reference = quantize(&y.from_network()?)?;
    ImageMetrics::compute(&r.id, r.level, &out, &reference)
}

/// Score every pair of one split. Images are spread over `RETINEXGAN_NUM_WORKERS` threads.
pub fn evaluate<T: Scalar, E: Enhancer<T> + ?Sized>(model: &E, manifest: &Manifest, split: Split) -> Result<MetricReport> {
    let records: Vec<&ManifestRecord> = manifest.split(split).collect();
    if records.is_empty() {
        return Err(Error::Invalid(format!("split {split:?} is empty")));
    }
    let workers = num_workers().min(records.len()).max(1);
    let rows: Vec<ImageMetrics> = if workers == 1 {
        records.iter().map(|r| evaluate_record(model, manifest, r)).collect::<Result<_>>()?
    } else {
        let chunk = records.len().div_ceil(workers);
        std::thread::scope(|s| {
            let handles: Vec<_> = records
                .chunks(chunk)
                .map(|part| {
                    s.spawn(move || part.iter().map(|r| evaluate_record(model, manifest, r)).collect::<Result<Vec<_>>>())
                })
                .collect();
            let mut all = Vec::with_capacity(records.len());
            for h in handles {
                all.extend(h.join().expect("evaluation worker panicked")?);
            }
            Ok::<_, Error>(all)
        })?
    };
    Ok(MetricReport::from_rows(model.label(), rows))
}
