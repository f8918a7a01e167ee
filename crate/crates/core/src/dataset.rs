//! Paired low/normal-light dataset synthesis, manifests and batch iteration.
//!
//! A low-light input is made from a reference image by linear darkening
//! followed by heteroscedastic Gaussian noise:
//!
//! ```text
//! x = clip(level * ref + n, 0, 1),   n ~ N(0, read_sigma^2 + shot_factor^2 * level * ref)
//! ```
//!
//! On disk a dataset is `out_dir/ref/<id>.png`, `out_dir/low/<id>_<level>.png`
//! and `out_dir/manifest.jsonl` (one JSON record per line, paths relative to
//! the manifest's directory).

pub mod synth;

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::imgcore::{self, ImageTensor, Space};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Exposure factor in `(0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct BrightnessLevel(f64);

impl BrightnessLevel {
    /// The five short-exposure levels plus the top level.
    pub const CANONICAL: [f64; 6] = [0.1, 0.3, 0.5, 0.7, 0.9, 1.0];

    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value <= 1.0 {
            Ok(BrightnessLevel(value))
        } else {
            Err(Error::Invalid(format!("brightness level must lie in (0, 1], got {value}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Text used in file names: shortest round-trip decimal.
    pub fn tag(self) -> String {
        format!("{}", self.0)
    }
}

impl TryFrom<f64> for BrightnessLevel {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<BrightnessLevel> for f64 {
    fn from(l: BrightnessLevel) -> f64 {
        l.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub read_sigma: f64,
    pub shot_factor: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { read_sigma: 0.01, shot_factor: 0.02, seed: 0 }
    }
}

impl NoiseConfig {
    pub fn noiseless() -> Self {
        NoiseConfig { read_sigma: 0.0, shot_factor: 0.0, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.read_sigma >= 0.0 && self.shot_factor >= 0.0) {
            return Err(Error::Invalid("noise parameters must be non-negative".into()));
        }
        Ok(())
    }

    /// Same noise model with a seed specific to one `(id, level)` record.
    pub fn for_record(&self, id: &str, level: BrightnessLevel) -> Self {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(id.as_bytes());
        h.update(level.value().to_le_bytes());
        let d = h.finalize();
        NoiseConfig { seed: u64::from_le_bytes(d[..8].try_into().expect("8 bytes")), ..*self }
    }
}

/// Darken `reference` to `level` and add sensor-like noise, deterministically in `noise.seed`.
pub fn synthesize_low<T: Scalar>(
    reference: &ImageTensor<T>,
    level: BrightnessLevel,
    noise: &NoiseConfig,
) -> Result<ImageTensor<T>> {
    if reference.space() != Space::Storage01 {
        return Err(Error::Space("synthesize_low expects a storage-space reference".into()));
    }
    noise.validate()?;
    let lv = level.value();
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let noisy = noise.read_sigma > 0.0 || noise.shot_factor > 0.0;
    let out = reference.tensor().map(|_| T::zero());
    let mut out = out;
    for (o, &r) in out.data_mut().iter_mut().zip(reference.tensor().data()) {
        let signal = lv * r.as_f64();
        let v = if noisy {
            let var = noise.read_sigma.powi(2) + noise.shot_factor.powi(2) * signal;
            let z: f64 = StandardNormal.sample(&mut rng);
            signal + var.sqrt() * z
        } else {
            signal
        };
        *o = T::lit(v.clamp(0.0, 1.0));
    }
    ImageTensor::new(out, Space::Storage01)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Invalid(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub low_path: PathBuf,
    pub ref_path: PathBuf,
    pub level: BrightnessLevel,
    pub split: Split,
}

/// Validated list of pairs; relative paths resolve against `root`.
#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub root: PathBuf,
    pub records: Vec<ManifestRecord>,
}

pub const MANIFEST_FILE: &str = "manifest.jsonl";

impl Manifest {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    /// Distinct levels present, ascending.
    pub fn levels(&self) -> Vec<BrightnessLevel> {
        let mut v: Vec<BrightnessLevel> = Vec::new();
        for r in &self.records {
            if !v.contains(&r.level) {
                v.push(r.level);
            }
        }
        v.sort_by(|a, b| a.value().total_cmp(&b.value()));
        v
    }

    /// Records restricted to a predicate, keeping the root.
    pub fn filtered(&self, keep: impl Fn(&ManifestRecord) -> bool) -> Manifest {
        Manifest { root: self.root.clone(), records: self.records.iter().filter(|r| keep(r)).cloned().collect() }
    }

    fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.records {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Manifest(format!("duplicate id `{}`", r.id)));
            }
            for p in [&r.low_path, &r.ref_path] {
                let full = self.resolve(p);
                if !full.is_file() {
                    return Err(Error::Manifest(format!(
                        "record `{}` references missing file {}",
                        r.id,
                        full.display()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut body = String::new();
        for r in &self.records {
            body.push_str(&serde_json::to_string(r)?);
            body.push('\n');
        }
        fs::write(path, body).map_err(|e| Error::io(path, e))
    }

    /// Load one pair as network-space tensors `(x, y)`, each `[3, H, W]`.
    pub fn load_pair<T: Scalar>(&self, r: &ManifestRecord) -> Result<(ImageTensor<T>, ImageTensor<T>)> {
        let low = imgcore::load_png::<T>(self.resolve(&r.low_path))?.to_rgb().to_network()?;
        let reference = imgcore::load_png::<T>(self.resolve(&r.ref_path))?.to_rgb().to_network()?;
        if low.tensor().dims() != reference.tensor().dims() {
            return Err(Error::Shape(format!(
                "pair `{}`: low {:?} vs ref {:?}",
                r.id,
                low.tensor().dims(),
                reference.tensor().dims()
            )));
        }
        Ok((low, reference))
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ManifestRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Manifest(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        records.push(rec);
    }
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let m = Manifest { root, records };
    m.validate()?;
    Ok(m)
}

/// Fraction of source images used for training: 1550 train pairs out of 1767.
pub const DEFAULT_SPLIT_RATIO: f64 = 1550.0 / 1767.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub levels: Vec<f64>,
    pub noise: NoiseConfig,
    pub split_ratio: f64,
    pub height: usize,
    pub width: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            levels: BrightnessLevel::CANONICAL.to_vec(),
            noise: NoiseConfig::default(),
            split_ratio: DEFAULT_SPLIT_RATIO,
            height: 256,
            width: 384,
        }
    }
}

/// Position of `id` in `[0, 1)` from its SHA-256 digest.
pub fn id_hash_unit(id: &str) -> f64 {
    let d = Sha256::digest(id.as_bytes());
    let v = u64::from_be_bytes(d[..8].try_into().expect("8 bytes"));
    (v >> 11) as f64 / (1u64 << 53) as f64
}

/// Assign sources to splits: `floor((1 - ratio) * n)` test sources, the rest
/// train; sources with the smallest id hashes go to train.
pub fn assign_splits(ids: &[String], split_ratio: f64) -> Result<Vec<Split>> {
    if !(0.0..=1.0).contains(&split_ratio) {
        return Err(Error::Invalid(format!("split ratio must lie in [0, 1], got {split_ratio}")));
    }
    let n = ids.len();
    // The epsilon keeps e.g. (1 - 0.88) * 100 = 11.999.. from flooring to 11.
    let n_test = (((1.0 - split_ratio) * n as f64) + 1e-9).floor() as usize;
    let n_train = n - n_test.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| id_hash_unit(&ids[a]).total_cmp(&id_hash_unit(&ids[b])).then(ids[a].cmp(&ids[b])));
    let mut splits = vec![Split::Test; n];
    for &i in &order[..n_train] {
        splits[i] = Split::Train;
    }
    Ok(splits)
}

/// Worker count for data loading, from `RETINEXGAN_NUM_WORKERS` (default 1).
pub fn num_workers() -> usize {
    std::env::var("RETINEXGAN_NUM_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1)
}

fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

fn build_one(
    src: &Path,
    id: &str,
    split: Split,
    levels: &[BrightnessLevel],
    cfg: &DatasetConfig,
    out_dir: &Path,
) -> Result<Vec<ManifestRecord>> {
    let img = imgcore::load_png::<f64>(src)?.to_rgb();
    let reference = imgcore::resize(&img, cfg.height, cfg.width)?;
    let ref_rel = PathBuf::from("ref").join(format!("{id}.png"));
    imgcore::save_png(&reference, out_dir.join(&ref_rel))?;
    // Quantize the reference first so the low image is derived from what is on disk.
    let reference = imgcore::load_png::<f64>(out_dir.join(&ref_rel))?;
    let mut recs = Vec::with_capacity(levels.len());
    for &level in levels {
        let low = synthesize_low(&reference, level, &cfg.noise.for_record(id, level))?;
        let rec_id = format!("{id}_{}", level.tag());
        let low_rel = PathBuf::from("low").join(format!("{rec_id}.png"));
        imgcore::save_png(&low, out_dir.join(&low_rel))?;
        recs.push(ManifestRecord { id: rec_id, low_path: low_rel, ref_path: ref_rel.clone(), level, split });
    }
    Ok(recs)
}

/// Build a paired dataset from every PNG in `source_dir`.
pub fn build_dataset(source_dir: &Path, out_dir: &Path, cfg: &DatasetConfig) -> Result<Manifest> {
    cfg.noise.validate()?;
    if cfg.height == 0 || cfg.width == 0 {
        return Err(Error::Invalid("dataset image size must be positive".into()));
    }
    let levels = cfg.levels.iter().map(|&l| BrightnessLevel::new(l)).collect::<Result<Vec<_>>>()?;
    if levels.is_empty() {
        return Err(Error::Invalid("at least one brightness level is required".into()));
    }
    let sources = list_pngs(source_dir)?;
    if sources.is_empty() {
        return Err(Error::Invalid(format!("no PNG files in {}", source_dir.display())));
    }
    let ids: Vec<String> = sources
        .iter()
        .map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())
        .collect();
    let splits = assign_splits(&ids, cfg.split_ratio)?;
    for sub in ["low", "ref"] {
        let d = out_dir.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }

    let workers = num_workers().min(sources.len());
    let jobs: Vec<usize> = (0..sources.len()).collect();
    let chunk = sources.len().div_ceil(workers);
    let results: Vec<Result<Vec<ManifestRecord>>> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .chunks(chunk)
            .map(|part| {
                let (sources, ids, splits, levels) = (&sources, &ids, &splits, &levels);
                s.spawn(move || {
                    part.iter()
                        .map(|&i| build_one(&sources[i], &ids[i], splits[i], levels, cfg, out_dir))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("dataset worker panicked")).collect()
    });
    let mut records = Vec::new();
    for r in results {
        records.extend(r?);
    }
    let manifest = Manifest { root: out_dir.to_path_buf(), records };
    manifest.validate()?;
    manifest.write(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// One mini-batch in network space: `x` low-light, `y` reference, `[B, 3, H, W]`.
#[derive(Clone, Debug)]
pub struct Batch<T> {
    pub ids: Vec<String>,
    pub levels: Vec<BrightnessLevel>,
    pub x: Tensor<T>,
    pub y: Tensor<T>,
}

impl<T: Scalar> Batch<T> {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Stable fingerprint of the batch contents (ids and pixel bits).
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for id in &self.ids {
            h.update(id.as_bytes());
        }
        let mut buf = Vec::new();
        for &v in self.x.data().iter().chain(self.y.data()) {
            v.write_le(&mut buf);
        }
        h.update(&buf);
        hex::encode(&h.finalize()[..8])
    }
}

/// Seeded, epoch-dependent permutation of `n` indices.
pub fn epoch_permutation(n: usize, seed: u64, epoch: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// Iterator over one epoch of a split; the last batch may be short.
pub struct BatchIter<'a, T> {
    manifest: &'a Manifest,
    records: Vec<&'a ManifestRecord>,
    order: Vec<usize>,
    pos: usize,
    batch_size: usize,
    _marker: std::marker::PhantomData<T>,
}

pub fn iterate_batches<T: Scalar>(
    manifest: &Manifest,
    split: Split,
    batch_size: usize,
    seed: u64,
    epoch: u64,
) -> Result<BatchIter<'_, T>> {
    if batch_size == 0 {
        return Err(Error::Invalid("batch size must be at least 1".into()));
    }
    let records: Vec<&ManifestRecord> = manifest.split(split).collect();
    if records.is_empty() {
        return Err(Error::Invalid(format!("split {split:?} is empty")));
    }
    let order = epoch_permutation(records.len(), seed, epoch);
    Ok(BatchIter { manifest, records, order, pos: 0, batch_size, _marker: std::marker::PhantomData })
}

impl<T: Scalar> BatchIter<'_, T> {
    /// Number of batches this epoch yields.
    pub fn num_batches(&self) -> usize {
        self.records.len().div_ceil(self.batch_size)
    }

    /// Advance past `k` batches without loading them.
    pub fn skip_batches(&mut self, k: usize) {
        self.pos = (self.pos + k * self.batch_size).min(self.order.len());
    }
}

impl<T: Scalar> Iterator for BatchIter<'_, T> {
    type Item = Result<Batch<T>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let idx = &self.order[self.pos..end];
        self.pos = end;
        let load = || -> Result<Batch<T>> {
            let mut xs = Vec::with_capacity(idx.len());
            let mut ys = Vec::with_capacity(idx.len());
            let mut ids = Vec::with_capacity(idx.len());
            let mut levels = Vec::with_capacity(idx.len());
            for &i in idx {
                let r = self.records[i];
                let (x, y) = self.manifest.load_pair::<T>(r)?;
                xs.push(x.into_tensor());
                ys.push(y.into_tensor());
                ids.push(r.id.clone());
                levels.push(r.level);
            }
            Ok(Batch { ids, levels, x: Tensor::stack(&xs)?, y: Tensor::stack(&ys)? })
        };
        Some(load())
    }
}

#[cfg(test)]
mod tests;
