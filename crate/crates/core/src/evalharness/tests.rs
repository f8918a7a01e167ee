use super::*;
use crate::dataset::{build_dataset, synth, DatasetConfig, NoiseConfig};
use crate::losses::SsimConfig;
use crate::metrics::{Identity, PSNR_SENTINEL_DB};
use crate::model::ModelConfig;

fn tiny_cfg(levels: Vec<f64>) -> RunConfig {
    let mut c = RunConfig::desk();
    c.dataset = DatasetConfig { levels, noise: NoiseConfig::noiseless(), split_ratio: 0.75, height: 16, width: 16 };
    c.model = ModelConfig { depth: 2, base_width: 4, max_width: 8, disc_base_width: 4, ..ModelConfig::default() };
    c.loss.ssim = SsimConfig { levels: 1, ..SsimConfig::default() };
    c.optim.batch_size = 2;
    c.optim.max_steps = 2;
    c
}

fn tiny_data(cfg: &RunConfig, count: usize) -> (tempfile::TempDir, Manifest) {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src");
    synth::write_sources(&src, count, 16, 16, 5).unwrap();
    let m = build_dataset(&src, &dir.path().join("data"), &cfg.dataset).unwrap();
    (dir, m)
}

fn agg(mse: f64, psnr_db: f64, ssim: f64) -> Aggregate {
    Aggregate { count: 1, mse, psnr_db, ssim }
}

fn sample_rows() -> Vec<AblationRow> {
    ABLATION_LABELS
        .iter()
        .enumerate()
        .map(|(k, l)| AblationRow { label: l.to_string(), psnr_db: 30.0 + k as f64, mse: 100.0 - k as f64, ssim: 0.85 + 0.01 * k as f64 })
        .collect()
}

fn sample_curves() -> Vec<CurveSeries> {
    [0.1, 0.5, 1.0]
        .iter()
        .map(|&l| CurveSeries {
            level: BrightnessLevel::new(l).unwrap(),
            values: vec![
                ("identity".into(), agg(1000.0 * (1.0 - l), 10.0 + 10.0 * l, 0.3 + 0.5 * l)),
                ("model".into(), agg(200.0, 25.0, 0.8)),
            ],
        })
        .collect()
}

#[test]
fn ladder_configs() {
    let base = RunConfig::desk();
    let s1 = ablation_config("S1", &base).unwrap();
    assert_eq!((s1.model.strategy, s1.loss.flags), (Strategy::S1, LossFlags::none()));
    let mid = ablation_config("S3+SmoothL1+SSIM", &base).unwrap();
    assert_eq!(mid.model.strategy, Strategy::S3);
    assert!(mid.loss.flags.use_smooth_l1 && mid.loss.flags.use_ssim && !mid.loss.flags.use_gan);
    let full = ablation_config("S3+SmoothL1+SSIM+GAN", &base).unwrap();
    assert_eq!(full.loss.flags, LossFlags::default());
    assert!(ablation_config("S4", &base).is_err());
}

#[test]
fn ablation_shares_data_order_and_rejects_bad_inputs() {
    let cfg = tiny_cfg(vec![0.5]);
    let (dir, m) = tiny_data(&cfg, 8);
    let mut zero = cfg.optim.clone();
    zero.max_steps = 0;
    assert!(run_ablation::<f32>(&m, &cfg, &zero, 0, dir.path()).unwrap_err().is_validation());

    let runs = run_ablation::<f32>(&m, &cfg, &cfg.optim, 0, &dir.path().join("abl")).unwrap();
    let labels: Vec<&str> = runs.iter().map(|r| r.row.label.as_str()).collect();
    assert_eq!(labels, ABLATION_LABELS);
    assert!(!runs[0].first_batch.is_empty());
    assert!(runs.iter().all(|r| r.first_batch == runs[0].first_batch));
    assert!(runs.iter().all(|r| r.checkpoint.is_file() && r.row.psnr_db.is_finite()));

    let other = tiny_cfg(vec![0.3]);
    let (dir2, m2) = tiny_data(&other, 4);
    assert!(run_ablation::<f32>(&m2, &other, &other.optim, 0, dir2.path()).is_err());
}

#[test]
fn identity_sweep_improves_with_level() {
    let cfg = tiny_cfg(vec![0.1, 0.5, 1.0]);
    let (_dir, m) = tiny_data(&cfg, 4);
    let id: &dyn Enhancer<f64> = &Identity;
    let curves = run_level_sweep(&[id], &m, Split::Train).unwrap();
    assert_eq!(curves.len(), 3);
    let mse: Vec<f64> = curves.iter().map(|c| c.get("identity").unwrap().mse).collect();
    assert!(mse.windows(2).all(|w| w[1] < w[0]), "{mse:?}");
    assert_eq!(curves[2].get("identity").unwrap().psnr_db, PSNR_SENTINEL_DB);

    let single = m.filtered(|r| r.level.value() == 0.5);
    assert!(run_level_sweep(&[id], &single, Split::Train).is_err());
}

#[test]
fn probe_samples_every_fifty_steps() {
    let cfg = tiny_cfg(vec![0.5]);
    let (_dir, m) = tiny_data(&cfg, 4);
    let mut budget = cfg.optim.clone();
    budget.max_steps = 120;
    let t = collapse_probe::<f32>(&m, &cfg, Strategy::S3, false, &budget, 0).unwrap();
    assert_eq!(t.len(), 2);
    assert!(t.iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(collapse_probe::<f32>(&m, &cfg, Strategy::S1, true, &budget, 0).is_err());
}

#[test]
fn report_files_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let rows = sample_rows();
    let curves = sample_curves();
    let files = emit_report(&rows, &curves, dir.path()).unwrap();

    let md = fs::read_to_string(&files.ablation_md).unwrap();
    let lines: Vec<&str> = md.lines().collect();
    assert_eq!(lines.len(), 2 + 5);
    assert!(lines[0].contains("PSNR") && lines[0].contains("MSE") && lines[0].contains("SSIM"));

    let csv = fs::read_to_string(&files.curve_csv[0]).unwrap();
    let csv_lines: Vec<&str> = csv.lines().collect();
    assert_eq!(csv_lines[0], "level,identity,model");
    assert_eq!(csv_lines.len(), 4);
    assert!(csv_lines[1..].iter().all(|l| l.split(',').count() == 3));

    let png = image::open(&files.curve_png[1]).unwrap().to_rgb8();
    for color in &PALETTE[..2] {
        assert!(png.pixels().any(|p| p.0 == *color));
    }
    assert!(!png.pixels().any(|p| p.0 == PALETTE[2]));
}

#[test]
fn report_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let fa = emit_report(&sample_rows(), &sample_curves(), a.path()).unwrap();
    let fb = emit_report(&sample_rows(), &sample_curves(), b.path()).unwrap();
    let all = |f: &ReportFiles| {
        let mut v = vec![f.ablation_csv.clone(), f.ablation_md.clone()];
        v.extend(f.curve_csv.iter().cloned());
        v.extend(f.curve_png.iter().cloned());
        v
    };
    for (x, y) in all(&fa).iter().zip(all(&fb)) {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
    }
}

#[test]
fn empty_inputs_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert!(emit_report(&[], &sample_curves(), dir.path()).is_err());
    assert!(emit_report(&sample_rows(), &[], dir.path()).is_err());
}
