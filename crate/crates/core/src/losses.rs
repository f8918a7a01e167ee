//! Training objectives.
//!
//! Every term exists in two forms: a graph builder used by the trainer, and a
//! plain function on tensors that builds a throwaway graph. The tensor form is
//! what evaluation code and tests call.

use serde::{Deserialize, Serialize};

use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::filter;
use crate::model::{compose_vars, DecompVars, GeneratorVars, Strategy};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Canonical five-level multiscale SSIM weights.
pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

/// Lower clamp applied to each multiscale term before raising it to a fractional power.
pub const MS_SSIM_TERM_FLOOR: f64 = 1e-6;

/// Lower clamp on log arguments in the adversarial losses.
pub const LOG_EPS: f64 = 1e-8;

/// Which Retinex factor a loss term acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Factor {
    R,
    I,
}

impl Factor {
    fn pick(self, d: DecompVars) -> Var {
        match self {
            Factor::R => d.r,
            Factor::I => d.i,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegConfig {
    pub c: f64,
    pub denom_floor: f64,
    pub target_factor: Factor,
}

impl Default for RegConfig {
    fn default() -> Self {
        RegConfig { c: 1.0, denom_floor: 1e-2, target_factor: Factor::R }
    }
}

impl RegConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c >= 1.0) || !(self.denom_floor > 0.0) || self.denom_floor >= self.c {
            return Err(Error::Invalid(format!(
                "regularization needs C >= 1 and 0 < floor < C, got C={} floor={}",
                self.c, self.denom_floor
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub lambda_rec: f64,
    pub lambda_dec: f64,
    pub lambda_com: f64,
    pub lambda_cgan: f64,
    /// Mix between the enhancement distance and the multiscale SSIM loss.
    pub alpha: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { lambda_rec: 1.0, lambda_dec: 1.0, lambda_com: 10.0, lambda_cgan: 1.0, alpha: 0.84 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let lambdas = [self.lambda_rec, self.lambda_dec, self.lambda_com, self.lambda_cgan];
        if lambdas.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
            return Err(Error::Invalid(format!("loss weights must be finite and >= 0, got {lambdas:?}")));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Invalid(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SsimConfig {
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
    pub window_size: usize,
    pub sigma: f64,
    pub levels: usize,
    /// Per-level weights; `None` takes the canonical weights renormalized to `levels`.
    pub level_weights: Option<Vec<f64>>,
}

impl Default for SsimConfig {
    fn default() -> Self {
        SsimConfig {
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
            window_size: 11,
            sigma: 1.5,
            levels: 3,
            level_weights: None,
        }
    }
}

impl SsimConfig {
    /// Defaults for 8-bit images.
    pub fn eight_bit() -> Self {
        SsimConfig { dynamic_range: 255.0, levels: 1, ..Self::default() }
    }

    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }

    pub fn kernel<T: Scalar>(&self) -> Vec<T> {
        filter::gaussian_kernel(self.window_size, self.sigma)
    }

    /// Smallest height/width accepted for the configured number of levels.
    pub fn min_extent(&self) -> usize {
        self.window_size << (self.levels.max(1) - 1)
    }

    pub fn weights(&self) -> Result<Vec<f64>> {
        match &self.level_weights {
            Some(w) => {
                if w.len() != self.levels {
                    return Err(Error::Invalid(format!("{} level weights for {} levels", w.len(), self.levels)));
                }
                if w.iter().any(|&v| !(v >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(Error::Invalid("level weights must be non-negative and sum to 1".into()));
                }
                Ok(w.clone())
            }
            None => {
                if self.levels > MS_SSIM_WEIGHTS.len() {
                    return Err(Error::Invalid(format!(
                        "{} levels need explicit level_weights (canonical set has {})",
                        self.levels,
                        MS_SSIM_WEIGHTS.len()
                    )));
                }
                let head = &MS_SSIM_WEIGHTS[..self.levels];
                let total: f64 = head.iter().sum();
                Ok(head.iter().map(|w| w / total).collect())
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::Invalid("SSIM needs at least one level".into()));
        }
        if self.window_size % 2 == 0 || self.window_size == 0 {
            return Err(Error::Invalid(format!("SSIM window must be odd, got {}", self.window_size)));
        }
        if !(self.sigma > 0.0) || !(self.dynamic_range > 0.0) || !(self.k1 > 0.0) || !(self.k2 > 0.0) {
            return Err(Error::Invalid("SSIM constants must be positive".into()));
        }
        self.weights().map(|_| ())
    }

    fn check_extent(&self, dims: &[usize], levels: usize) -> Result<()> {
        if dims.len() < 2 {
            return Err(Error::Shape(format!("SSIM needs at least 2 dims, got {dims:?}")));
        }
        let need = self.window_size << (levels - 1);
        let (h, w) = (dims[dims.len() - 2], dims[dims.len() - 1]);
        if h < need || w < need {
            return Err(Error::Shape(format!(
                "image {h}x{w} is smaller than {need} required by a {}-tap window over {levels} level(s)",
                self.window_size
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossFlags {
    pub use_smooth_l1: bool,
    pub use_ssim: bool,
    pub use_gan: bool,
}

impl Default for LossFlags {
    fn default() -> Self {
        LossFlags { use_smooth_l1: true, use_ssim: true, use_gan: true }
    }
}

impl LossFlags {
    pub fn none() -> Self {
        LossFlags { use_smooth_l1: false, use_ssim: false, use_gan: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub weights: LossWeights,
    pub reg: RegConfig,
    pub ssim: SsimConfig,
    pub flags: LossFlags,
    /// Factor tied between the two branches by the decomposition loss.
    pub tie: Factor,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            weights: LossWeights::default(),
            reg: RegConfig::default(),
            ssim: SsimConfig::default(),
            flags: LossFlags::default(),
            tie: Factor::I,
        }
    }
}

impl LossConfig {
    /// Tie and regularize the reflectance factor.
    pub fn analysis_consistent() -> Self {
        LossConfig { tie: Factor::R, reg: RegConfig { target_factor: Factor::R, ..RegConfig::default() }, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.reg.validate()?;
        if self.flags.use_ssim {
            self.ssim.validate()?;
        }
        Ok(())
    }
}

/// Scalar inputs to [`total_loss`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub rec_x: f64,
    pub rec_y: f64,
    pub reg: f64,
    pub dec: f64,
    pub enh: f64,
    pub ssim_ms: f64,
    pub cgan_g: f64,
    pub cgan_d: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub rec_x: f64,
    pub rec_y: f64,
    pub reg: f64,
    pub dec: f64,
    pub enh: f64,
    pub ssim_ms: f64,
    pub com: f64,
    pub cgan_g: f64,
    pub cgan_d: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub const FIELDS: [&'static str; 10] =
        ["rec_x", "rec_y", "reg", "dec", "enh", "ssim_ms", "com", "cgan_g", "cgan_d", "total"];

    pub fn values(&self) -> [f64; 10] {
        [
            self.rec_x,
            self.rec_y,
            self.reg,
            self.dec,
            self.enh,
            self.ssim_ms,
            self.com,
            self.cgan_g,
            self.cgan_d,
            self.total,
        ]
    }
}

/// `alpha * enh + (1 - alpha) * ssim_ms`.
pub fn com_loss(enh: f64, ssim_ms: f64, alpha: f64) -> f64 {
    alpha * enh + (1.0 - alpha) * ssim_ms
}

/// Combine per-term scalars into the weighted objective.
///
/// Terms a strategy or flag switches off are reported as 0.
pub fn total_loss(parts: &LossParts, weights: &LossWeights, strategy: Strategy, flags: LossFlags) -> Result<LossBreakdown> {
    let named = [
        ("rec_x", parts.rec_x),
        ("rec_y", parts.rec_y),
        ("reg", parts.reg),
        ("dec", parts.dec),
        ("enh", parts.enh),
        ("ssim_ms", parts.ssim_ms),
        ("cgan_g", parts.cgan_g),
        ("cgan_d", parts.cgan_d),
    ];
    if let Some((term, _)) = named.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { term, step: 0 });
    }
    let reg = if strategy.uses_reg() { parts.reg } else { 0.0 };
    let ssim_ms = if flags.use_ssim { parts.ssim_ms } else { 0.0 };
    let com = if flags.use_ssim { com_loss(parts.enh, ssim_ms, weights.alpha) } else { parts.enh };
    let (cgan_g, cgan_d) = if flags.use_gan { (parts.cgan_g, parts.cgan_d) } else { (0.0, 0.0) };
    let total = weights.lambda_rec * (parts.rec_x + parts.rec_y + reg)
        + weights.lambda_dec * parts.dec
        + weights.lambda_com * com
        + weights.lambda_cgan * cgan_g;
    Ok(LossBreakdown {
        rec_x: parts.rec_x,
        rec_y: parts.rec_y,
        reg,
        dec: parts.dec,
        enh: parts.enh,
        ssim_ms,
        com,
        cgan_g,
        cgan_d,
        total,
    })
}

// ---- graph builders ---------------------------------------------------------------

/// Smooth-L1 distance, or mean absolute difference when smooth-L1 is disabled.
pub fn distance<T: Scalar>(g: &mut Graph<T>, a: Var, b: Var, flags: LossFlags) -> Var {
    if flags.use_smooth_l1 {
        g.smooth_l1(a, b)
    } else {
        g.abs_mean_diff(a, b)
    }
}

pub fn reg_var<T: Scalar>(g: &mut Graph<T>, factor: Var, cfg: &RegConfig) -> Var {
    g.reg_loss(factor, T::lit(cfg.c), T::lit(cfg.denom_floor))
}

/// Per-pixel SSIM map and contrast-structure map.
pub fn ssim_maps<T: Scalar>(g: &mut Graph<T>, a: Var, b: Var, cfg: &SsimConfig, kernel: &[T]) -> (Var, Var) {
    let mu_a = g.blur(a, kernel);
    let mu_b = g.blur(b, kernel);
    let aa = g.mul(a, a);
    let bb = g.mul(b, b);
    let ab = g.mul(a, b);
    let e_aa = g.blur(aa, kernel);
    let e_bb = g.blur(bb, kernel);
    let e_ab = g.blur(ab, kernel);
    let mu_aa = g.mul(mu_a, mu_a);
    let mu_bb = g.mul(mu_b, mu_b);
    let mu_ab = g.mul(mu_a, mu_b);
    let var_a = g.sub(e_aa, mu_aa);
    let var_b = g.sub(e_bb, mu_bb);
    let cov = g.sub(e_ab, mu_ab);

    let (c1, c2) = (T::lit(cfg.c1()), T::lit(cfg.c2()));
    let two = T::lit(2.0);
    let l_num = g.affine(mu_ab, two, c1);
    let mu_sq = g.add(mu_aa, mu_bb);
    let l_den = g.affine(mu_sq, T::one(), c1);
    let cs_num = g.affine(cov, two, c2);
    let var_sum = g.add(var_a, var_b);
    let cs_den = g.affine(var_sum, T::one(), c2);
    let l = g.div(l_num, l_den);
    let cs = g.div(cs_num, cs_den);
    let ssim = g.mul(l, cs);
    (ssim, cs)
}

/// `1 - mean(SSIM map)`.
pub fn ssim_loss_var<T: Scalar>(g: &mut Graph<T>, a: Var, b: Var, cfg: &SsimConfig) -> Result<Var> {
    same_dims(g.dims(a), g.dims(b))?;
    cfg.check_extent(g.dims(a), 1)?;
    let kernel = cfg.kernel::<T>();
    let (ssim, _) = ssim_maps(g, a, b, cfg, &kernel);
    let m = g.mean(ssim);
    Ok(g.affine(m, -T::one(), T::one()))
}

/// `1 - mean(ssim_M)^b_M * prod_{j<M} mean(cs_j)^b_j` over a 2x average-pooled pyramid.
///
/// Each multiscale term is clamped below at [`MS_SSIM_TERM_FLOOR`] before the
/// power. With one level this is exactly [`ssim_loss_var`].
pub fn ms_ssim_loss_var<T: Scalar>(g: &mut Graph<T>, a: Var, b: Var, cfg: &SsimConfig) -> Result<Var> {
    same_dims(g.dims(a), g.dims(b))?;
    cfg.validate()?;
    let levels = cfg.levels;
    if levels == 1 {
        return ssim_loss_var(g, a, b, cfg);
    }
    cfg.check_extent(g.dims(a), levels)?;
    let weights = cfg.weights()?;
    let kernel = cfg.kernel::<T>();
    let floor = T::lit(MS_SSIM_TERM_FLOOR);
    let (mut a, mut b) = (a, b);
    let mut product: Option<Var> = None;
    for (j, &beta) in weights.iter().enumerate() {
        if j > 0 {
            a = g.avg_pool2(a);
            b = g.avg_pool2(b);
        }
        let (ssim, cs) = ssim_maps(g, a, b, cfg, &kernel);
        let map = if j + 1 == levels { ssim } else { cs };
        let m = g.mean(map);
        let m = g.clamp_min(m, floor);
        let term = g.powf(m, T::lit(beta));
        product = Some(match product {
            Some(p) => g.mul(p, term),
            None => term,
        });
    }
    let p = product.expect("at least two levels");
    Ok(g.affine(p, -T::one(), T::one()))
}

/// Discriminator loss `-mean log D(real) - mean log(1 - D(fake))`.
pub fn cgan_d_var<T: Scalar>(g: &mut Graph<T>, score_real: Var, score_fake: Var) -> Var {
    let eps = T::lit(LOG_EPS);
    let lr = g.log_mean(score_real, false, eps);
    let lf = g.log_mean(score_fake, true, eps);
    g.weighted_sum(&[(lr, -T::one()), (lf, -T::one())])
}

/// Non-saturating generator loss `-mean log D(fake)`.
pub fn cgan_g_var<T: Scalar>(g: &mut Graph<T>, score_fake: Var) -> Var {
    let lf = g.log_mean(score_fake, false, T::lit(LOG_EPS));
    g.weighted_sum(&[(lf, -T::one())])
}

/// Graph handles of every generator-side term.
#[derive(Clone, Copy, Debug)]
pub struct GeneratorLossVars {
    pub rec_x: Var,
    pub rec_y: Var,
    pub reg: Option<Var>,
    pub dec: Var,
    pub enh: Var,
    pub ssim_ms: Option<Var>,
    pub com: Var,
    pub cgan_g: Option<Var>,
    pub total: Var,
}

impl GeneratorLossVars {
    /// Scalar values read back from the graph, combined by [`total_loss`].
    pub fn breakdown<T: Scalar>(
        &self,
        g: &Graph<T>,
        cgan_d: Option<f64>,
        cfg: &LossConfig,
        strategy: Strategy,
    ) -> Result<LossBreakdown> {
        let read = |v: Option<Var>| v.map_or(0.0, |v| g.scalar(v).as_f64());
        let parts = LossParts {
            rec_x: read(Some(self.rec_x)),
            rec_y: read(Some(self.rec_y)),
            reg: read(self.reg),
            dec: read(Some(self.dec)),
            enh: read(Some(self.enh)),
            ssim_ms: read(self.ssim_ms),
            cgan_g: read(self.cgan_g),
            cgan_d: cgan_d.unwrap_or(0.0),
        };
        total_loss(&parts, &cfg.weights, strategy, cfg.flags)
    }
}

/// Assemble the full generator objective on the graph.
///
/// `score_fake` is the discriminator's map for `x_hat`; it is required when
/// the adversarial term is enabled.
pub fn generator_loss<T: Scalar>(
    g: &mut Graph<T>,
    cfg: &LossConfig,
    strategy: Strategy,
    x: Var,
    y: Var,
    out: &GeneratorVars,
    score_fake: Option<Var>,
) -> Result<GeneratorLossVars> {
    let dec_y = out.dec_y.ok_or_else(|| Error::Invalid("generator loss needs the reference branch".into()))?;
    let flags = cfg.flags;
    let w = &cfg.weights;

    let recon_x = compose_vars(g, out.dec_x.r, out.dec_x.i)?;
    let recon_y = compose_vars(g, dec_y.r, dec_y.i)?;
    same_dims(g.dims(recon_x), g.dims(x))?;
    same_dims(g.dims(recon_y), g.dims(y))?;
    let rec_x = distance(g, x, recon_x, flags);
    let rec_y = distance(g, y, recon_y, flags);
    let reg = strategy.uses_reg().then(|| {
        let fx = reg_var(g, cfg.reg.target_factor.pick(out.dec_x), &cfg.reg);
        let fy = reg_var(g, cfg.reg.target_factor.pick(dec_y), &cfg.reg);
        g.weighted_sum(&[(fx, T::lit(0.5)), (fy, T::lit(0.5))])
    });

    let (tx, ty) = (cfg.tie.pick(out.dec_x), cfg.tie.pick(dec_y));
    same_dims(g.dims(tx), g.dims(ty))?;
    let dec = distance(g, tx, ty, flags);

    same_dims(g.dims(out.x_hat), g.dims(y))?;
    let enh = distance(g, y, out.x_hat, flags);
    let ssim_ms = if flags.use_ssim {
        let y01 = g.affine(y, T::lit(0.5), T::lit(0.5));
        let x01 = g.affine(out.x_hat, T::lit(0.5), T::lit(0.5));
        Some(ms_ssim_loss_var(g, y01, x01, &cfg.ssim)?)
    } else {
        None
    };
    let com = match ssim_ms {
        Some(s) => g.weighted_sum(&[(enh, T::lit(w.alpha)), (s, T::lit(1.0 - w.alpha))]),
        None => enh,
    };
    let cgan_g = if flags.use_gan {
        let s = score_fake.ok_or_else(|| Error::Invalid("adversarial term enabled without discriminator scores".into()))?;
        Some(cgan_g_var(g, s))
    } else {
        None
    };

    let lr = T::lit(w.lambda_rec);
    let mut terms = vec![(rec_x, lr), (rec_y, lr), (dec, T::lit(w.lambda_dec)), (com, T::lit(w.lambda_com))];
    if let Some(r) = reg {
        terms.push((r, lr));
    }
    if let Some(c) = cgan_g {
        terms.push((c, T::lit(w.lambda_cgan)));
    }
    let total = g.weighted_sum(&terms);
    Ok(GeneratorLossVars { rec_x, rec_y, reg, dec, enh, ssim_ms, com, cgan_g, total })
}

// ---- tensor forms -------------------------------------------------------------------

fn same_dims(a: &[usize], b: &[usize]) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("shape mismatch: {a:?} vs {b:?}")));
    }
    Ok(())
}

fn binary<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, f: impl FnOnce(&mut Graph<T>, Var, Var) -> Result<Var>) -> Result<T> {
    same_dims(a.dims(), b.dims())?;
    let mut g = Graph::new();
    let av = g.constant(a.clone());
    let bv = g.constant(b.clone());
    let out = f(&mut g, av, bv)?;
    Ok(g.scalar(out))
}

/// Mean Huber penalty with unit threshold.
pub fn smooth_l1<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<T> {
    binary(a, b, |g, a, b| Ok(g.smooth_l1(a, b)))
}

pub fn mean_abs_diff<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<T> {
    binary(a, b, |g, a, b| Ok(g.abs_mean_diff(a, b)))
}

/// `mean 1 / max(C - |v|, floor)`.
pub fn reg_loss<T: Scalar>(factor: &Tensor<T>, cfg: &RegConfig) -> Result<T> {
    cfg.validate()?;
    let mut g = Graph::new();
    let v = g.constant(factor.clone());
    let out = reg_var(&mut g, v, cfg);
    Ok(g.scalar(out))
}

/// Decomposition factors of one image, `[N, C, H, W]`.
pub struct Factors<'a, T> {
    pub r: &'a Tensor<T>,
    pub i: &'a Tensor<T>,
}

impl<T> Factors<'_, T> {
    fn pick(&self, f: Factor) -> &Tensor<T> {
        match f {
            Factor::R => self.r,
            Factor::I => self.i,
        }
    }
}

/// `(rec_x, rec_y, reg)`; `reg` is 0 unless the strategy uses it.
pub fn rec_loss<T: Scalar>(
    x: &Tensor<T>,
    y: &Tensor<T>,
    dec_x: Factors<'_, T>,
    dec_y: Factors<'_, T>,
    strategy: Strategy,
    reg: &RegConfig,
    flags: LossFlags,
) -> Result<(T, T, T)> {
    let rec = |img: &Tensor<T>, d: &Factors<'_, T>| -> Result<T> {
        let recon = crate::model::compose(d.r, d.i)?;
        binary(img, &recon, |g, a, b| Ok(distance(g, a, b, flags)))
    };
    let rec_x = rec(x, &dec_x)?;
    let rec_y = rec(y, &dec_y)?;
    let reg = if strategy.uses_reg() {
        let half = T::lit(0.5);
        half * (reg_loss(dec_x.pick(reg.target_factor), reg)? + reg_loss(dec_y.pick(reg.target_factor), reg)?)
    } else {
        T::zero()
    };
    Ok((rec_x, rec_y, reg))
}

/// Distance between the tied factors of the two branches.
pub fn dec_loss<T: Scalar>(tied_x: &Tensor<T>, tied_y: &Tensor<T>, flags: LossFlags) -> Result<T> {
    binary(tied_x, tied_y, |g, a, b| Ok(distance(g, a, b, flags)))
}

/// Distance between the reference and `compose(R_x, I_x_enh)`.
pub fn enh_loss<T: Scalar>(y: &Tensor<T>, r_x: &Tensor<T>, i_x_enh: &Tensor<T>, flags: LossFlags) -> Result<T> {
    let x_hat = crate::model::compose(r_x, i_x_enh)?;
    binary(y, &x_hat, |g, a, b| Ok(distance(g, a, b, flags)))
}

/// Per-pixel SSIM of two same-shape tensors (planes are the trailing two dims).
pub fn ssim_map<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, cfg: &SsimConfig) -> Result<Tensor<T>> {
    same_dims(a.dims(), b.dims())?;
    cfg.check_extent(a.dims(), 1)?;
    let kernel = cfg.kernel::<T>();
    let mut g = Graph::new();
    let av = g.constant(a.clone());
    let bv = g.constant(b.clone());
    let (ssim, _) = ssim_maps(&mut g, av, bv, cfg, &kernel);
    Ok(g.value(ssim).clone())
}

pub fn ssim_loss<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, cfg: &SsimConfig) -> Result<T> {
    binary(a, b, |g, a, b| ssim_loss_var(g, a, b, cfg))
}

pub fn ms_ssim_loss<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, cfg: &SsimConfig) -> Result<T> {
    binary(a, b, |g, a, b| ms_ssim_loss_var(g, a, b, cfg))
}

/// `(cgan_d, cgan_g)` from the discriminator's maps on real and generated pairs.
pub fn cgan_losses<T: Scalar>(score_real: &Tensor<T>, score_fake: &Tensor<T>) -> (T, T) {
    let mut g = Graph::new();
    let r = g.constant(score_real.clone());
    let f = g.constant(score_fake.clone());
    let d = cgan_d_var(&mut g, r, f);
    let gen = cgan_g_var(&mut g, f);
    (g.scalar(d), g.scalar(gen))
}

#[cfg(test)]
mod tests;
