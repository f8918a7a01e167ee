use super::*;
use proptest::prelude::*;

fn const_img(v: f64, h: usize, w: usize) -> ImageTensor<f64> {
    ImageTensor::filled(3, h, w, v, Space::Storage01).unwrap()
}

fn lvl(v: f64) -> BrightnessLevel {
    BrightnessLevel::new(v).unwrap()
}

fn small_cfg(levels: &[f64]) -> DatasetConfig {
    DatasetConfig { levels: levels.to_vec(), height: 8, width: 12, ..DatasetConfig::default() }
}

#[test]
fn full_level_without_noise_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let r = synth::scene(8, 12, &mut rng);
    let x = synthesize_low(&r, lvl(1.0), &NoiseConfig::noiseless()).unwrap();
    assert_eq!(x, r);
}

#[test]
fn half_level_halves_constant() {
    let x = synthesize_low(&const_img(0.5, 4, 4), lvl(0.5), &NoiseConfig::noiseless()).unwrap();
    assert!(x.tensor().data().iter().all(|&v| v == 0.25));
}

#[test]
fn noisy_mean_matches_gain() {
    // Oracle: per-pixel std from the noise model, standard error over all pixels.
    let noise = NoiseConfig { seed: 7, ..NoiseConfig::default() };
    let (h, w) = (64, 64);
    let x = synthesize_low(&const_img(1.0, h, w), lvl(0.1), &noise).unwrap();
    let n = (3 * h * w) as f64;
    let sd = (noise.read_sigma.powi(2) + noise.shot_factor.powi(2) * 0.1).sqrt();
    let se = sd / n.sqrt();
    let mean = x.tensor().mean();
    assert!((mean - 0.1).abs() < 3.0 * se, "mean {mean}, se {se}");
    // and the noise is really there
    let var = x.tensor().data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    assert!((var.sqrt() - sd).abs() < 0.1 * sd);
}

#[test]
fn noise_is_seed_deterministic() {
    let r = const_img(0.6, 6, 6);
    let a = synthesize_low(&r, lvl(0.3), &NoiseConfig::default()).unwrap();
    let b = synthesize_low(&r, lvl(0.3), &NoiseConfig::default()).unwrap();
    let c = synthesize_low(&r, lvl(0.3), &NoiseConfig { seed: 1, ..NoiseConfig::default() }).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn level_domain_is_enforced() {
    assert!(BrightnessLevel::new(0.0).is_err());
    assert!(BrightnessLevel::new(1.2).is_err());
    assert!(BrightnessLevel::new(f64::NAN).is_err());
    assert!(serde_json::from_str::<BrightnessLevel>("1.5").is_err());
    assert_eq!(serde_json::from_str::<BrightnessLevel>("0.3").unwrap(), lvl(0.3));
}

#[test]
fn split_counts_follow_floor_then_remainder() {
    let ids: Vec<String> = (0..100).map(|i| format!("img{i:03}")).collect();
    let s = assign_splits(&ids, DEFAULT_SPLIT_RATIO).unwrap();
    assert!((DEFAULT_SPLIT_RATIO - 0.8772).abs() < 1e-4);
    assert_eq!(s.iter().filter(|&&v| v == Split::Train).count(), 88);
    assert_eq!(s.iter().filter(|&&v| v == Split::Test).count(), 12);
    // deterministic and order-independent
    let mut rev = ids.clone();
    rev.reverse();
    let s2 = assign_splits(&rev, DEFAULT_SPLIT_RATIO).unwrap();
    for (i, id) in rev.iter().enumerate() {
        let j = ids.iter().position(|x| x == id).unwrap();
        assert_eq!(s2[i], s[j]);
    }
    assert_eq!(assign_splits(&ids[..1], DEFAULT_SPLIT_RATIO).unwrap(), vec![Split::Train]);
}

#[test]
fn single_source_single_level() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src");
    synth::write_sources(&src, 1, 16, 20, 0).unwrap();
    let m = build_dataset(&src, &dir.path().join("out"), &small_cfg(&[0.5])).unwrap();
    assert_eq!(m.records.len(), 1);
    assert_eq!(m.records[0].split, Split::Train);
    let (x, y) = m.load_pair::<f32>(&m.records[0]).unwrap();
    assert_eq!(x.tensor().dims(), &[3, 8, 12]);
    assert_eq!(y.space(), Space::Network11);
}

#[test]
fn three_levels_repeat_each_reference() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src");
    synth::write_sources(&src, 10, 16, 20, 1).unwrap();
    let out = dir.path().join("out");
    let m = build_dataset(&src, &out, &small_cfg(&[0.1, 0.5, 0.9])).unwrap();
    assert_eq!(m.records.len(), 30);
    for r in &m.records {
        let same_ref = m.records.iter().filter(|q| q.ref_path == r.ref_path).count();
        assert_eq!(same_ref, 3);
        let split = m.records.iter().filter(|q| q.ref_path == r.ref_path).map(|q| q.split);
        assert!(split.into_iter().all(|s| s == r.split), "levels of one source share a split");
    }
    assert!(out.join("low/scene_003_0.5.png").is_file());
    assert!(out.join("ref/scene_003.png").is_file());
    let reloaded = load_manifest(out.join(MANIFEST_FILE)).unwrap();
    assert_eq!(reloaded.records, m.records);
    assert_eq!(m.levels().iter().map(|l| l.value()).collect::<Vec<_>>(), vec![0.1, 0.5, 0.9]);
}

#[test]
fn rebuild_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src");
    synth::write_sources(&src, 3, 16, 20, 2).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    build_dataset(&src, &a, &small_cfg(&[0.1, 0.7])).unwrap();
    build_dataset(&src, &b, &small_cfg(&[0.1, 0.7])).unwrap();
    for rel in ["manifest.jsonl", "low/scene_001_0.1.png", "low/scene_002_0.7.png", "ref/scene_000.png"] {
        assert_eq!(fs::read(a.join(rel)).unwrap(), fs::read(b.join(rel)).unwrap(), "{rel}");
    }
}

#[test]
fn build_errors() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    assert!(matches!(build_dataset(&empty, &dir.path().join("o"), &small_cfg(&[0.5])), Err(Error::Invalid(_))));
    let src = dir.path().join("src");
    synth::write_sources(&src, 1, 8, 8, 0).unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    assert!(build_dataset(&src, &blocker.join("out"), &small_cfg(&[0.5])).is_err());
    assert!(build_dataset(&src, &dir.path().join("o2"), &small_cfg(&[1.5])).is_err());
}

#[test]
fn manifest_validation() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.jsonl");
    fs::write(&p, "").unwrap();
    assert!(load_manifest(&p).unwrap().records.is_empty());

    imgcore::save_png(&const_img(0.5, 2, 2), dir.path().join("a.png")).unwrap();
    let line = |id: &str, low: &str| {
        format!(r#"{{"id":"{id}","low_path":"{low}","ref_path":"a.png","level":0.5,"split":"train"}}"#)
    };
    fs::write(&p, format!("{}\n{}\n", line("x", "a.png"), line("x", "a.png"))).unwrap();
    assert!(matches!(load_manifest(&p), Err(Error::Manifest(m)) if m.contains("duplicate")));
    fs::write(&p, format!("{}\n", line("x", "gone.png"))).unwrap();
    assert!(matches!(load_manifest(&p), Err(Error::Manifest(m)) if m.contains("missing")));
    fs::write(&p, format!("{}\n", line("x", "a.png"))).unwrap();
    assert_eq!(load_manifest(&p).unwrap().records.len(), 1);
}

fn ten_sample_manifest(dir: &Path) -> Manifest {
    let src = dir.join("src");
    synth::write_sources(&src, 10, 8, 8, 4).unwrap();
    let cfg = DatasetConfig { split_ratio: 1.0, ..small_cfg(&[0.3]) };
    build_dataset(&src, &dir.join("out"), &cfg).unwrap()
}

#[test]
fn batches_cover_split_with_short_tail() {
    let dir = tempfile::tempdir().unwrap();
    let m = ten_sample_manifest(dir.path());
    let it = iterate_batches::<f32>(&m, Split::Train, 4, 0, 0).unwrap();
    assert_eq!(it.num_batches(), 3);
    let batches: Vec<Batch<f32>> = it.map(|b| b.unwrap()).collect();
    assert_eq!(batches.iter().map(Batch::len).collect::<Vec<_>>(), vec![4, 4, 2]);
    assert_eq!(batches[0].x.dims(), &[4, 3, 8, 12]);
    let mut seen: Vec<&String> = batches.iter().flat_map(|b| &b.ids).collect();
    seen.sort();
    seen.dedup();
    assert_eq!(seen.len(), 10);
    for b in &batches {
        assert!(b.x.min() >= -1.0 && b.x.max() <= 1.0);
        assert!(b.x.min() < 0.0, "network space is signed");
    }
}

#[test]
fn batch_order_is_seeded_per_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let m = ten_sample_manifest(dir.path());
    let ids = |seed, epoch| -> Vec<String> {
        iterate_batches::<f32>(&m, Split::Train, 3, seed, epoch).unwrap().flat_map(|b| b.unwrap().ids).collect()
    };
    assert_eq!(ids(5, 0), ids(5, 0));
    assert_ne!(ids(5, 0), ids(5, 1));
    // oracle: the permutation is exactly the seeded shuffle of split order
    let split: Vec<&str> = m.split(Split::Train).map(|r| r.id.as_str()).collect();
    let want: Vec<String> = epoch_permutation(10, 5, 1).into_iter().map(|i| split[i].to_string()).collect();
    assert_eq!(ids(5, 1), want);
}

#[test]
fn batch_errors() {
    let dir = tempfile::tempdir().unwrap();
    let m = ten_sample_manifest(dir.path());
    assert!(iterate_batches::<f32>(&m, Split::Train, 0, 0, 0).is_err());
    assert!(iterate_batches::<f32>(&m, Split::Test, 2, 0, 0).is_err());
}

proptest! {
    #[test]
    fn darkening_is_monotone_in_level(a in 0.01f64..=1.0, b in 0.01f64..=1.0, v in prop::collection::vec(0.0f64..=1.0, 12)) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let r = ImageTensor::new(Tensor::from_vec(&[3, 2, 2], v).unwrap(), Space::Storage01).unwrap();
        let xa = synthesize_low(&r, lvl(lo), &NoiseConfig::noiseless()).unwrap();
        let xb = synthesize_low(&r, lvl(hi), &NoiseConfig::noiseless()).unwrap();
        prop_assert!(xa.tensor().data().iter().zip(xb.tensor().data()).all(|(p, q)| p <= q));
    }

    #[test]
    fn noisy_output_stays_in_range(seed in 0u64..1000, level in 0.01f64..=1.0) {
        let noise = NoiseConfig { read_sigma: 0.2, shot_factor: 0.3, seed };
        let x = synthesize_low(&const_img(0.9, 3, 3), lvl(level), &noise).unwrap();
        prop_assert!(x.tensor().min() >= 0.0 && x.tensor().max() <= 1.0);
    }
}
