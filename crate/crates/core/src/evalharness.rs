//! Desk-scale experiments: the strategy/loss ablation ladder, metric-vs-level
//! curves, the decomposition collapse probe, and report rendering.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use imageproc::drawing::{draw_filled_circle_mut, draw_hollow_rect_mut, draw_line_segment_mut};
use imageproc::rect::Rect;
use serde::{Deserialize, Serialize};

use crate::config::{OptimConfig, RunConfig};
use crate::dataset::{iterate_batches, BrightnessLevel, Manifest, Split};
use crate::error::{Error, Result};
use crate::losses::{Factor, LossConfig, LossFlags};
use crate::metrics::{evaluate, Aggregate, Enhancer, Labeled, MetricReport};
use crate::model::Strategy;
use crate::scalar::Scalar;
use crate::trainer::{train, train_step, TrainOptions, TrainState};

/// Brightness level the ablation ladder is evaluated at.
pub const ABLATION_LEVEL: f64 = 0.5;

pub const ABLATION_LABELS: [&str; 5] = ["S1", "S2", "S3", "S3+SmoothL1+SSIM", "S3+SmoothL1+SSIM+GAN"];

/// Steps between two samples of the collapse probe.
pub const PROBE_EVERY: u64 = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub label: String,
    pub psnr_db: f64,
    pub mse: f64,
    pub ssim: f64,
}

impl AblationRow {
    pub fn from_report(label: &str, report: &MetricReport) -> Self {
        AblationRow {
            label: label.to_string(),
            psnr_db: report.overall.psnr_db,
            mse: report.overall.mse,
            ssim: report.overall.ssim,
        }
    }
}

/// One rung of the ladder with its provenance.
#[derive(Clone, Debug)]
pub struct AblationRun {
    pub row: AblationRow,
    /// Fingerprint of the first training batch; equal across rungs.
    pub first_batch: String,
    pub report: MetricReport,
    pub checkpoint: PathBuf,
}

/// Strategy and loss switches for one ladder label, applied on top of `base`.
pub fn ablation_config(label: &str, base: &RunConfig) -> Result<RunConfig> {
    let (strategy, flags) = match label {
        "S1" => (Strategy::S1, LossFlags::none()),
        "S2" => (Strategy::S2, LossFlags::none()),
        "S3" => (Strategy::S3, LossFlags::none()),
        "S3+SmoothL1+SSIM" => (Strategy::S3, LossFlags { use_gan: false, ..LossFlags::default() }),
        "S3+SmoothL1+SSIM+GAN" => (Strategy::S3, LossFlags::default()),
        other => return Err(Error::Invalid(format!("unknown ablation label `{other}`"))),
    };
    let mut cfg = base.clone();
    cfg.model.strategy = strategy;
    cfg.loss.flags = flags;
    Ok(cfg)
}

fn file_stem(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' }).collect()
}

fn at_level(manifest: &Manifest, level: f64) -> Result<Manifest> {
    let want = BrightnessLevel::new(level)?;
    if !manifest.levels().contains(&want) {
        return Err(Error::Invalid(format!("manifest has no pairs at brightness level {level}")));
    }
    Ok(manifest.filtered(|r| r.level == want))
}

/// Train the five ladder configurations with one seed, budget and data order,
/// then score each on the test split at the ablation level.
pub fn run_ablation<T: Scalar>(
    manifest: &Manifest,
    base: &RunConfig,
    budget: &OptimConfig,
    seed: u64,
    work_dir: &Path,
) -> Result<Vec<AblationRun>> {
    if budget.max_steps == 0 {
        return Err(Error::Invalid("ablation needs a budget of at least one step".into()));
    }
    let data = at_level(manifest, ABLATION_LEVEL)?;
    let mut runs = Vec::with_capacity(ABLATION_LABELS.len());
    for label in ABLATION_LABELS {
        let mut cfg = ablation_config(label, base)?;
        cfg.seed = seed;
        cfg.optim = budget.clone();
        let opts = TrainOptions { out_dir: work_dir.join(file_stem(label)), resume: None };
        let out = train::<T>(&cfg, &data, &opts)?;
        let first_batch = out.first_batch.unwrap_or_default();
        log::info!("ablation {label}: first batch {first_batch}, config {}", cfg.digest());
        let model = Labeled { label: label.to_string(), generator: &out.state.gen };
        let report = evaluate(&model, &data, Split::Test)?;
        runs.push(AblationRun {
            row: AblationRow::from_report(label, &report),
            first_batch,
            report,
            checkpoint: out.checkpoints.last().cloned().expect("training writes a final checkpoint"),
        });
    }
    Ok(runs)
}

/// Metric means of every model at one brightness level, in model order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSeries {
    pub level: BrightnessLevel,
    pub values: Vec<(String, Aggregate)>,
}

impl CurveSeries {
    pub fn get(&self, label: &str) -> Option<&Aggregate> {
        self.values.iter().find(|(l, _)| l == label).map(|(_, a)| a)
    }
}

/// Evaluate each model on `split` and regroup the per-level means into one series per level.
pub fn run_level_sweep<T: Scalar>(models: &[&dyn Enhancer<T>], manifest: &Manifest, split: Split) -> Result<Vec<CurveSeries>> {
    let levels = manifest.levels();
    if levels.len() < 2 {
        return Err(Error::Invalid(format!("a level sweep needs at least 2 brightness levels, found {}", levels.len())));
    }
    if models.is_empty() {
        return Err(Error::Invalid("a level sweep needs at least one model".into()));
    }
    let reports = models.iter().map(|m| evaluate(*m, manifest, split)).collect::<Result<Vec<_>>>()?;
    levels
        .into_iter()
        .map(|level| {
            let values = reports
                .iter()
                .map(|r| {
                    let agg = r.level(level).ok_or_else(|| {
                        Error::Invalid(format!("split {split:?} has no pairs at level {}", level.value()))
                    })?;
                    Ok((r.label.clone(), *agg))
                })
                .collect::<Result<_>>()?;
            Ok(CurveSeries { level, values })
        })
        .collect()
}

/// Loss setup for the collapse probe: the tied factor is also the regularized
/// one, the tie term dominates, and the enhancement and adversarial terms are off.
/// Whether the regularizer is active follows the strategy.
pub fn probe_loss() -> LossConfig {
    let mut loss = LossConfig::analysis_consistent();
    loss.flags = LossFlags { use_smooth_l1: true, use_ssim: false, use_gan: false };
    loss.weights.lambda_rec = 1.0;
    loss.weights.lambda_dec = 10.0;
    loss.weights.lambda_com = 0.0;
    loss.weights.lambda_cgan = 0.0;
    loss
}

/// Train under [`probe_loss`] and record the mean |tied factor| on a fixed
/// batch every [`PROBE_EVERY`] steps.
pub fn collapse_probe<T: Scalar>(
    manifest: &Manifest,
    base: &RunConfig,
    strategy: Strategy,
    with_reg: bool,
    budget: &OptimConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    let strategy = match (strategy.illum_channels(), with_reg) {
        (3, true) => Strategy::S3,
        (3, false) => Strategy::S2,
        (_, false) => Strategy::S1,
        (_, true) => {
            return Err(Error::Invalid("the regularized probe needs a three-channel illumination".into()));
        }
    };
    let mut cfg = base.clone();
    cfg.seed = seed;
    cfg.model.strategy = strategy;
    cfg.loss = probe_loss();
    cfg.optim = budget.clone();
    cfg.validate()?;

    let bs = cfg.optim.batch_size;
    let probe = iterate_batches::<T>(manifest, Split::Train, bs, seed, 0)?
        .next()
        .ok_or_else(|| Error::Invalid("train split is empty".into()))??;
    let tied_magnitude = |state: &TrainState<T>| -> Result<f64> {
        let dx = state.gen.decompose(&probe.x)?;
        let dy = state.gen.decompose(&probe.y)?;
        let pick = |d: &crate::model::Decomposition<T>| match cfg.loss.tie {
            Factor::R => d.r.clone(),
            Factor::I => d.i.clone(),
        };
        let (fx, fy) = (pick(&dx), pick(&dy));
        let total: f64 = fx.data().iter().chain(fy.data()).map(|v| v.as_f64().abs()).sum();
        Ok(total / (fx.len() + fy.len()) as f64)
    };

    let mut state = TrainState::<T>::init(&cfg)?;
    let mut trajectory = Vec::new();
    let mut epoch = 0;
    while state.step < cfg.optim.max_steps {
        let mut progressed = false;
        for batch in iterate_batches::<T>(manifest, Split::Train, bs, seed, epoch)? {
            let batch = batch?;
            train_step(&mut state, &batch.x, &batch.y, &cfg)?;
            progressed = true;
            if state.step % PROBE_EVERY == 0 {
                trajectory.push(tied_magnitude(&state)?);
            }
            if state.step >= cfg.optim.max_steps {
                break;
            }
        }
        if !progressed {
            return Err(Error::Invalid("train split yields no batches".into()));
        }
        epoch += 1;
    }
    Ok(trajectory)
}

/// Paths written by [`emit_report`].
#[derive(Clone, Debug, PartialEq)]
pub struct ReportFiles {
    pub ablation_csv: PathBuf,
    pub ablation_md: PathBuf,
    pub curve_csv: Vec<PathBuf>,
    pub curve_png: Vec<PathBuf>,
}

const METRICS: [&str; 3] = ["mse", "psnr", "ssim"];

fn metric_of(a: &Aggregate, metric: &str) -> f64 {
    match metric {
        "mse" => a.mse,
        "psnr" => a.psnr_db,
        _ => a.ssim,
    }
}

/// Model labels across all series, in first-seen order.
fn series_labels(curves: &[CurveSeries]) -> Vec<String> {
    let mut labels: Vec<String> = Vec::new();
    for c in curves {
        for (l, _) in &c.values {
            if !labels.contains(l) {
                labels.push(l.clone());
            }
        }
    }
    labels
}

pub fn ablation_markdown(rows: &[AblationRow]) -> String {
    let mut s = String::from("| Configuration | PSNR (dB) | MSE | SSIM |\n|---|---:|---:|---:|\n");
    for r in rows {
        let _ = writeln!(s, "| {} | {:.2} | {:.2} | {:.4} |", r.label, r.psnr_db, r.mse, r.ssim);
    }
    s
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut s = String::from("label,psnr_db,mse,ssim\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.label, r.psnr_db, r.mse, r.ssim);
    }
    s
}

/// One row per level, one column per model; missing points are left empty.
pub fn curve_csv(curves: &[CurveSeries], metric: &str) -> String {
    let labels = series_labels(curves);
    let mut s = format!("level,{}\n", labels.join(","));
    for c in curves {
        s.push_str(&c.level.value().to_string());
        for l in &labels {
            s.push(',');
            if let Some(a) = c.get(l) {
                s.push_str(&metric_of(a, metric).to_string());
            }
        }
        s.push('\n');
    }
    s
}

const PALETTE: [[u8; 3]; 6] = [[31, 119, 180], [255, 127, 14], [44, 160, 44], [214, 39, 40], [148, 103, 189], [140, 86, 75]];

/// Line chart with brightness level on x. Series colors follow [`series_labels`] order.
pub fn curve_chart(curves: &[CurveSeries], metric: &str) -> RgbImage {
    const W: u32 = 480;
    const H: u32 = 320;
    const M: f32 = 32.0;
    let mut img = RgbImage::from_pixel(W, H, Rgb([255, 255, 255]));
    let labels = series_labels(curves);

    let xs: Vec<f64> = curves.iter().map(|c| c.level.value()).collect();
    let ys: Vec<f64> = curves.iter().flat_map(|c| c.values.iter().map(|(_, a)| metric_of(a, metric))).collect();
    let span = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo > 1e-12 { (lo, hi) } else { (lo - 0.5, hi + 0.5) }
    };
    let (x0, x1) = span(&xs);
    let (y0, y1) = span(&ys);
    let (pw, ph) = (W as f32 - 2.0 * M, H as f32 - 2.0 * M);
    let px = |x: f64| M + ((x - x0) / (x1 - x0)) as f32 * pw;
    let py = |y: f64| H as f32 - M - ((y - y0) / (y1 - y0)) as f32 * ph;

    let grey = Rgb([160, 160, 160]);
    draw_hollow_rect_mut(&mut img, Rect::at(M as i32, M as i32).of_size(pw as u32, ph as u32), grey);
    for c in curves {
        let x = px(c.level.value());
        draw_line_segment_mut(&mut img, (x, H as f32 - M), (x, H as f32 - M + 5.0), grey);
    }

    for (k, label) in labels.iter().enumerate() {
        let color = Rgb(PALETTE[k % PALETTE.len()]);
        let pts: Vec<(f32, f32)> = curves
            .iter()
            .filter_map(|c| c.get(label).map(|a| (px(c.level.value()), py(metric_of(a, metric)))))
            .collect();
        for w in pts.windows(2) {
            draw_line_segment_mut(&mut img, w[0], w[1], color);
        }
        for &(x, y) in &pts {
            draw_filled_circle_mut(&mut img, (x.round() as i32, y.round() as i32), 3, color);
        }
        // Legend swatch.
        let lx = M as i32 + 8 + 16 * k as i32;
        draw_filled_circle_mut(&mut img, (lx, (M / 2.0) as i32), 5, color);
    }
    img
}

fn write(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Write `ablation.{csv,md}` and `curves_{mse,psnr,ssim}.{csv,png}` under `out_dir`.
pub fn emit_report(rows: &[AblationRow], curves: &[CurveSeries], out_dir: &Path) -> Result<ReportFiles> {
    if rows.is_empty() {
        return Err(Error::Invalid("no ablation rows to report".into()));
    }
    if curves.is_empty() {
        return Err(Error::Invalid("no curve series to report".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let ablation_csv_path = out_dir.join("ablation.csv");
    write(&ablation_csv_path, &ablation_csv(rows))?;
    let ablation_md_path = out_dir.join("ablation.md");
    write(&ablation_md_path, &ablation_markdown(rows))?;

    let mut files = ReportFiles {
        ablation_csv: ablation_csv_path,
        ablation_md: ablation_md_path,
        curve_csv: Vec::new(),
        curve_png: Vec::new(),
    };
    for metric in METRICS {
        let csv = out_dir.join(format!("curves_{metric}.csv"));
        write(&csv, &curve_csv(curves, metric))?;
        let png = out_dir.join(format!("curves_{metric}.png"));
        curve_chart(curves, metric)
            .save_with_format(&png, image::ImageFormat::Png)
            .map_err(|e| Error::io(&png, std::io::Error::other(e)))?;
        files.curve_csv.push(csv);
        files.curve_png.push(png);
    }
    Ok(files)
}

#[cfg(test)]
mod tests;
