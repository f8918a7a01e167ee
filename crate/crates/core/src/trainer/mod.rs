//! Alternating discriminator/generator optimization, logging and checkpoints.

pub mod checkpoint;

use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::autograd::Graph;
use crate::config::RunConfig;
use crate::dataset::{iterate_batches, Manifest, Split};
use crate::error::{Error, Result};
use crate::losses::{cgan_d_var, generator_loss, LossBreakdown};
use crate::model::{init_params, Generator, PatchDiscriminator};
use crate::optim::Adam;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub use checkpoint::{load_checkpoint, load_checkpoint_for, save_checkpoint, Sidecar};

/// Networks, optimizer moments and the number of completed steps.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState<T> {
    pub gen: Generator<T>,
    pub disc: PatchDiscriminator<T>,
    pub opt_g: Adam<T>,
    pub opt_d: Adam<T>,
    pub step: u64,
}

impl<T: Scalar> TrainState<T> {
    pub fn init(cfg: &RunConfig) -> Result<Self> {
        let (gen, disc) = init_params::<T>(cfg.seed, &cfg.model)?;
        let opt_g = Adam::new(gen.store.tensors());
        let opt_d = Adam::new(disc.store.tensors());
        Ok(TrainState { gen, disc, opt_g, opt_d, step: 0 })
    }
}

fn with_step(e: Error, step: u64) -> Error {
    match e {
        Error::NonFinite { term, .. } => Error::NonFinite { term, step },
        other => other,
    }
}

/// All loss terms for `(x, y)` under the current parameters, without updating anything.
pub fn compute_losses<T: Scalar>(state: &TrainState<T>, x: &Tensor<T>, y: &Tensor<T>, cfg: &RunConfig) -> Result<LossBreakdown> {
    let mut g = Graph::new();
    let gp = state.gen.store.bind(&mut g, false);
    let xv = g.constant(x.clone());
    let yv = g.constant(y.clone());
    let out = state.gen.forward_vars(&mut g, &gp, xv, Some(yv))?;
    let (score_fake, cgan_d) = if cfg.loss.flags.use_gan {
        let dp = state.disc.store.bind(&mut g, false);
        let real = state.disc.forward(&mut g, &dp, xv, yv)?;
        let fake = state.disc.forward(&mut g, &dp, xv, out.x_hat)?;
        let d = cgan_d_var(&mut g, real, fake);
        (Some(fake), Some(g.scalar(d).as_f64()))
    } else {
        (None, None)
    };
    let vars = generator_loss(&mut g, &cfg.loss, cfg.model.strategy, xv, yv, &out, score_fake)?;
    vars.breakdown(&g, cgan_d, &cfg.loss, cfg.model.strategy).map_err(|e| with_step(e, state.step))
}

fn check_finite<T: Scalar>(v: T, term: &'static str, step: u64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { term, step })
    }
}

/// One optimization step: a discriminator update on the detached generator
/// output (when the adversarial term is on), then a generator update on the
/// weighted total. Returns the losses re-evaluated after both updates.
pub fn train_step<T: Scalar>(state: &mut TrainState<T>, x: &Tensor<T>, y: &Tensor<T>, cfg: &RunConfig) -> Result<LossBreakdown> {
    let step = state.step + 1;
    let lr = cfg.optim.lr_at(step);
    let adam = cfg.optim.adam;
    let strategy = cfg.model.strategy;

    let mut g = Graph::new();
    let gp = state.gen.store.bind(&mut g, true);
    let xv = g.constant(x.clone());
    let yv = g.constant(y.clone());
    let out = state.gen.forward_vars(&mut g, &gp, xv, Some(yv))?;

    let score_fake = if cfg.loss.flags.use_gan {
        let x_hat = g.value(out.x_hat).clone();
        let mut dg = Graph::new();
        let dp = state.disc.store.bind(&mut dg, true);
        let dx = dg.constant(x.clone());
        let dy = dg.constant(y.clone());
        let dxh = dg.constant(x_hat);
        let real = state.disc.forward(&mut dg, &dp, dx, dy)?;
        let fake = state.disc.forward(&mut dg, &dp, dx, dxh)?;
        let loss_d = cgan_d_var(&mut dg, real, fake);
        check_finite(dg.scalar(loss_d), "cgan_d", step)?;
        let grads = dg.backward(loss_d);
        let gs: Vec<_> = dp.iter().map(|&p| grads.get(p)).collect();
        state.opt_d.step(state.disc.store.tensors_mut(), &gs, lr, &adam);

        let dp = state.disc.store.bind(&mut g, false);
        Some(state.disc.forward(&mut g, &dp, xv, out.x_hat)?)
    } else {
        None
    };

    let vars = generator_loss(&mut g, &cfg.loss, strategy, xv, yv, &out, score_fake)?;
    if !g.scalar(vars.total).is_finite() {
        // Name the first offending term.
        return Err(match vars.breakdown(&g, None, &cfg.loss, strategy) {
            Err(e) => with_step(e, step),
            Ok(_) => Error::NonFinite { term: "total", step },
        });
    }
    let grads = g.backward(vars.total);
    let gs: Vec<_> = gp.iter().map(|&p| grads.get(p)).collect();
    state.opt_g.step(state.gen.store.tensors_mut(), &gs, lr, &adam);
    state.step = step;
    compute_losses(state, x, y, cfg)
}

/// One row of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainLogRow {
    pub step: u64,
    pub losses: LossBreakdown,
    pub lr: f64,
    pub wall_ms: u64,
}

impl TrainLogRow {
    pub fn header() -> String {
        let mut cols = vec!["step"];
        cols.extend(LossBreakdown::FIELDS);
        cols.extend(["lr", "wall_ms"]);
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.step.to_string();
        for v in self.losses.values() {
            s.push(',');
            s.push_str(&v.to_string());
        }
        s.push_str(&format!(",{},{}", self.lr, self.wall_ms));
        s
    }
}

/// Where to write and whether to continue from a checkpoint.
#[derive(Clone, Debug, Default)]
pub struct TrainOptions {
    pub out_dir: PathBuf,
    pub resume: Option<PathBuf>,
}

pub struct TrainOutcome<T> {
    pub state: TrainState<T>,
    pub log_path: PathBuf,
    pub checkpoints: Vec<PathBuf>,
    /// Fingerprint of the first batch this run consumed.
    pub first_batch: Option<String>,
    pub history: Vec<TrainLogRow>,
}

pub const LOG_FILE: &str = "train_log.csv";

pub fn checkpoint_path(out_dir: &Path, step: u64) -> PathBuf {
    out_dir.join("checkpoints").join(format!("step_{step:08}.ckpt"))
}

/// Most recent checkpoint under `out_dir`, if any.
pub fn latest_checkpoint(out_dir: &Path) -> Option<PathBuf> {
    let dir = out_dir.join("checkpoints");
    let mut found: Vec<PathBuf> = fs::read_dir(dir)
        .ok()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ckpt"))
        .collect();
    found.sort();
    found.pop()
}

/// Run `cfg.optim.max_steps` steps over seeded epoch shuffles of the train split.
pub fn train<T: Scalar>(cfg: &RunConfig, manifest: &Manifest, opts: &TrainOptions) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    let bs = cfg.optim.batch_size;
    let n_batches = iterate_batches::<T>(manifest, Split::Train, bs, cfg.seed, 0)?.num_batches() as u64;

    let mut state = match &opts.resume {
        Some(p) => load_checkpoint_for::<T>(p, cfg)?,
        None => TrainState::init(cfg)?,
    };
    if state.step > cfg.optim.max_steps {
        return Err(Error::Invalid(format!(
            "checkpoint is at step {} beyond max_steps {}",
            state.step, cfg.optim.max_steps
        )));
    }

    fs::create_dir_all(&opts.out_dir).map_err(|e| Error::io(&opts.out_dir, e))?;
    let log_path = opts.out_dir.join(LOG_FILE);
    let append = opts.resume.is_some() && log_path.is_file();
    let mut log = OpenOptions::new()
        .create(true)
        .write(true)
        .append(append)
        .truncate(!append)
        .open(&log_path)
        .map_err(|e| Error::io(&log_path, e))?;
    if !append {
        writeln!(log, "{}", TrainLogRow::header()).map_err(|e| Error::io(&log_path, e))?;
    }

    let mut checkpoints = Vec::new();
    let mut history = Vec::new();
    let mut first_batch = None;
    let started = Instant::now();
    let every = cfg.optim.checkpoint_every;

    let mut epoch = state.step / n_batches;
    let mut iter = iterate_batches::<T>(manifest, Split::Train, bs, cfg.seed, epoch)?;
    iter.skip_batches((state.step % n_batches) as usize);
    while state.step < cfg.optim.max_steps {
        let batch = match iter.next() {
            Some(b) => b?,
            None => {
                epoch += 1;
                iter = iterate_batches::<T>(manifest, Split::Train, bs, cfg.seed, epoch)?;
                continue;
            }
        };
        if first_batch.is_none() {
            first_batch = Some(batch.fingerprint());
        }
        let losses = train_step(&mut state, &batch.x, &batch.y, cfg)?;
        let row = TrainLogRow {
            step: state.step,
            losses,
            lr: cfg.optim.lr_at(state.step),
            wall_ms: started.elapsed().as_millis() as u64,
        };
        writeln!(log, "{}", row.to_csv()).map_err(|e| Error::io(&log_path, e))?;
        log::debug!("step {} total {:.5}", row.step, row.losses.total);
        history.push(row);
        if every > 0 && state.step % every == 0 {
            let p = checkpoint_path(&opts.out_dir, state.step);
            save_checkpoint(&state, cfg, &p)?;
            checkpoints.push(p);
        }
    }
    if checkpoints.last() != Some(&checkpoint_path(&opts.out_dir, state.step)) {
        let p = checkpoint_path(&opts.out_dir, state.step);
        save_checkpoint(&state, cfg, &p)?;
        checkpoints.push(p);
    }
    Ok(TrainOutcome { state, log_path, checkpoints, first_batch, history })
}

/// Parse a training log written by [`train`].
pub fn read_log(path: &Path) -> Result<Vec<TrainLogRow>> {
    let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in body.lines().enumerate().skip(1) {
        let vals: Vec<&str> = line.split(',').collect();
        let bad = || Error::Invalid(format!("{}:{}: malformed log row", path.display(), i + 1));
        if vals.len() != LossBreakdown::FIELDS.len() + 3 {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        let l: Vec<f64> = vals[1..=LossBreakdown::FIELDS.len()].iter().map(|s| num(s)).collect::<Result<_>>()?;
        rows.push(TrainLogRow {
            step: vals[0].parse().map_err(|_| bad())?,
            losses: LossBreakdown {
                rec_x: l[0],
                rec_y: l[1],
                reg: l[2],
                dec: l[3],
                enh: l[4],
                ssim_ms: l[5],
                com: l[6],
                cgan_g: l[7],
                cgan_d: l[8],
                total: l[9],
            },
            lr: num(vals[vals.len() - 2])?,
            wall_ms: vals[vals.len() - 1].parse().map_err(|_| bad())?,
        });
    }
    Ok(rows)
}
