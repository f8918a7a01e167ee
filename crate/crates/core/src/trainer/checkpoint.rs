//! Binary checkpoint with a SHA-256 trailer, plus a JSON sidecar.
//!
//! Layout (little endian): magic, format version, dtype tag, step, seed,
//! config JSON, then six tensor lists (generator, discriminator, and the two
//! moment buffers of each optimizer) and the two optimizer step counts. The
//! last 32 bytes hash everything before them.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::TrainState;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::model::init_params;
use crate::optim::Adam;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

const MAGIC: &[u8; 8] = b"RGANCKPT";
const VERSION: u32 = 1;
const TRAILER: usize = 32;

/// Contents of the `.json` file written next to every checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub step: u64,
    pub seed: u64,
    pub config_digest: String,
    pub created_at: String,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn bytes(&mut self, b: &[u8]) {
        self.u64(b.len() as u64);
        self.0.extend_from_slice(b);
    }
    fn tensors<T: Scalar>(&mut self, names: Option<&[String]>, ts: &[Tensor<T>]) {
        self.u32(ts.len() as u32);
        for (k, t) in ts.iter().enumerate() {
            self.bytes(names.map_or("", |n| n[k].as_str()).as_bytes());
            self.u32(t.dims().len() as u32);
            for &d in t.dims() {
                self.u64(d as u64);
            }
            for &v in t.data() {
                v.write_le(&mut self.0);
            }
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Corrupt(format!("unexpected end of data at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.u64()?;
        self.take(usize::try_from(n).map_err(|_| Error::Corrupt("length overflow".into()))?)
    }
    fn string(&mut self) -> Result<String> {
        String::from_utf8(self.bytes()?.to_vec()).map_err(|_| Error::Corrupt("invalid UTF-8".into()))
    }
    fn tensors<T: Scalar>(&mut self) -> Result<(Vec<String>, Vec<Tensor<T>>)> {
        let n = self.u32()? as usize;
        let (mut names, mut ts) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for _ in 0..n {
            names.push(self.string()?);
            let nd = self.u32()? as usize;
            let dims = (0..nd).map(|_| self.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let len: usize = dims.iter().product();
            let raw = self.take(len.checked_mul(T::BYTES).ok_or_else(|| Error::Corrupt("size overflow".into()))?)?;
            let data = raw.chunks_exact(T::BYTES).map(T::read_le).collect();
            ts.push(Tensor::from_vec(&dims, data).map_err(|e| Error::Corrupt(e.to_string()))?);
        }
        Ok((names, ts))
    }
}

fn dtype_tag<T: Scalar>() -> u8 {
    T::BYTES as u8
}

/// Serialize the full training state.
pub fn encode<T: Scalar>(state: &TrainState<T>, cfg: &RunConfig) -> Result<Vec<u8>> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION);
    w.u8(dtype_tag::<T>());
    w.u64(state.step);
    w.u64(cfg.seed);
    w.bytes(serde_json::to_string(cfg)?.as_bytes());
    w.tensors(Some(state.gen.store.names()), state.gen.store.tensors());
    w.tensors(Some(state.disc.store.names()), state.disc.store.tensors());
    for opt in [&state.opt_g, &state.opt_d] {
        w.tensors(None, &opt.m);
        w.tensors(None, &opt.v);
        w.u64(opt.t);
    }
    let digest = Sha256::digest(&w.0);
    w.0.extend_from_slice(&digest);
    Ok(w.0)
}

/// Parse a checkpoint, rebuilding networks from the embedded configuration.
pub fn decode<T: Scalar>(buf: &[u8]) -> Result<(RunConfig, TrainState<T>)> {
    if buf.len() < MAGIC.len() + TRAILER || &buf[..MAGIC.len()] != MAGIC {
        return Err(Error::Corrupt("not a checkpoint file".into()));
    }
    let (body, trailer) = buf.split_at(buf.len() - TRAILER);
    if Sha256::digest(body).as_slice() != trailer {
        return Err(Error::Corrupt("checksum mismatch (truncated or modified file)".into()));
    }
    let mut r = Reader { buf: body, pos: MAGIC.len() };
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Corrupt(format!("unsupported format version {version}")));
    }
    let tag = r.u8()?;
    if tag != dtype_tag::<T>() {
        return Err(Error::Corrupt(format!("stored with {tag}-byte floats, loading as {}", T::DTYPE)));
    }
    let step = r.u64()?;
    let seed = r.u64()?;
    let cfg: RunConfig = serde_json::from_slice(r.bytes()?).map_err(|e| Error::Corrupt(format!("config: {e}")))?;
    if cfg.seed != seed {
        return Err(Error::Corrupt("seed field disagrees with stored config".into()));
    }
    let (mut gen, mut disc) = init_params::<T>(cfg.seed, &cfg.model)?;
    let (gn, gt) = r.tensors::<T>()?;
    gen.store.load(&gn, gt)?;
    let (dn, dt) = r.tensors::<T>()?;
    disc.store.load(&dn, dt)?;
    let mut opts = Vec::with_capacity(2);
    for store_dims in [gen.store.tensors(), disc.store.tensors()] {
        let (_, m) = r.tensors::<T>()?;
        let (_, v) = r.tensors::<T>()?;
        let t = r.u64()?;
        let fits = |x: &[Tensor<T>]| x.len() == store_dims.len() && x.iter().zip(store_dims).all(|(a, b)| a.dims() == b.dims());
        if !fits(&m) || !fits(&v) {
            return Err(Error::Corrupt("optimizer moments do not match parameters".into()));
        }
        opts.push(Adam { m, v, t });
    }
    if r.pos != body.len() {
        return Err(Error::Corrupt("trailing bytes".into()));
    }
    let opt_d = opts.pop().expect("two optimizers");
    let opt_g = opts.pop().expect("two optimizers");
    Ok((cfg, TrainState { gen, disc, opt_g, opt_d, step }))
}

/// Write the checkpoint and its sidecar.
pub fn save_checkpoint<T: Scalar>(state: &TrainState<T>, cfg: &RunConfig, path: &Path) -> Result<()> {
    let bytes = encode(state, cfg)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let side = Sidecar {
        step: state.step,
        seed: cfg.seed,
        config_digest: cfg.digest(),
        created_at: chrono::Utc::now().to_rfc3339(),
    };
    let sp = sidecar_path(path);
    fs::write(&sp, serde_json::to_string_pretty(&side)?).map_err(|e| Error::io(&sp, e))
}

/// Load a checkpoint together with the configuration it was trained under.
pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<(RunConfig, TrainState<T>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Load a checkpoint for resuming under `cfg`; refuses a different configuration.
pub fn load_checkpoint_for<T: Scalar>(path: &Path, cfg: &RunConfig) -> Result<TrainState<T>> {
    let (stored, state) = load_checkpoint(path)?;
    let (expected, found) = (cfg.digest(), stored.digest());
    if expected != found {
        return Err(Error::DigestMismatch { expected, found });
    }
    Ok(state)
}
