//! The generator (shared decomposition U-Net + enhancement U-Net + Retinex
//! composition) and the conditional PatchGAN discriminator.
//!
//! A single decomposition network splits an image into a 3-channel factor `R`
//! and a 1- or 3-channel factor `I` such that the image is `R * I`. The same
//! weights decompose the low-light input `x` and, during training, the
//! reference `y`. The enhancement network maps `I_x` to `I_x'` and the output
//! is `x_hat = R_x * I_x'`.

pub mod discriminator;
pub mod unet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::nn::ParamStore;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub use discriminator::{receptive_field, PatchDiscriminator};
pub use unet::UNet;

/// How the decomposition splits channels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// `R` 3 channels, `I` 1 channel.
    S1,
    /// `R` and `I` both 3 channels.
    S2,
    /// As `S2`, plus the regularization term on the decomposition.
    S3,
}

impl Strategy {
    pub fn illum_channels(self) -> usize {
        match self {
            Strategy::S1 => 1,
            Strategy::S2 | Strategy::S3 => 3,
        }
    }

    pub fn uses_reg(self) -> bool {
        self == Strategy::S3
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "S1" => Ok(Strategy::S1),
            "S2" => Ok(Strategy::S2),
            "S3" => Ok(Strategy::S3),
            other => Err(Error::Invalid(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub strategy: Strategy,
    pub depth: usize,
    pub base_width: usize,
    pub max_width: usize,
    /// First-layer width of the discriminator (widths are `w, 2w, 4w, 1`).
    pub disc_base_width: usize,
    /// Feed `R_x` to the enhancement network alongside `I_x`.
    pub enhancer_uses_reflectance: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            strategy: Strategy::S3,
            depth: 7,
            base_width: 64,
            max_width: 512,
            disc_base_width: 64,
            enhancer_uses_reflectance: false,
        }
    }
}

impl ModelConfig {
    /// Small networks for CPU experiments on 64x96 images.
    pub fn desk() -> Self {
        ModelConfig { depth: 4, base_width: 16, max_width: 128, disc_base_width: 16, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.depth > 12 {
            return Err(Error::Invalid(format!("depth must be in 1..=12, got {}", self.depth)));
        }
        if self.base_width == 0 || self.max_width < self.base_width || self.disc_base_width == 0 {
            return Err(Error::Invalid("network widths must be positive and max_width >= base_width".into()));
        }
        Ok(())
    }

    /// Required divisor of input height and width.
    pub fn size_multiple(&self) -> usize {
        1 << self.depth
    }
}

/// The two factors of one image, network space, `[N, C, H, W]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition<T> {
    pub r: Tensor<T>,
    pub i: Tensor<T>,
}

/// Graph handles for a decomposition.
#[derive(Clone, Copy, Debug)]
pub struct DecompVars {
    pub r: Var,
    pub i: Var,
}

#[derive(Clone, Copy, Debug)]
pub struct GeneratorVars {
    pub dec_x: DecompVars,
    pub dec_y: Option<DecompVars>,
    pub i_x_enh: Var,
    pub x_hat: Var,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorOutput<T> {
    pub dec_x: Decomposition<T>,
    pub dec_y: Option<Decomposition<T>>,
    pub i_x_enh: Tensor<T>,
    pub x_hat: Tensor<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Generator<T> {
    pub store: ParamStore<T>,
    pub config: ModelConfig,
    decomposer: UNet,
    enhancer: UNet,
}

/// Elementwise `R * I`, broadcasting a single-channel `I` over `R`'s channels.
pub fn compose_vars<T: Scalar>(g: &mut Graph<T>, r: Var, i: Var) -> Result<Var> {
    let (rn, rc, rh, rw) = g.value(r).nchw();
    let (iname, ic, ih, iw) = g.value(i).nchw();
    if (rn, rh, rw) != (iname, ih, iw) {
        return Err(Error::Shape(format!("compose: R {:?} vs I {:?}", g.dims(r), g.dims(i))));
    }
    match ic {
        c if c == rc => Ok(g.mul(r, i)),
        1 => Ok(g.mul_channel_broadcast(r, i)),
        _ => Err(Error::Shape(format!("compose: I has {ic} channels, R has {rc}"))),
    }
}

/// [`compose_vars`] on plain tensors.
pub fn compose<T: Scalar>(r: &Tensor<T>, i: &Tensor<T>) -> Result<Tensor<T>> {
    let mut g = Graph::new();
    let rv = g.constant(r.clone());
    let iv = g.constant(i.clone());
    let out = compose_vars(&mut g, rv, iv)?;
    Ok(g.value(out).clone())
}

/// Deterministic initialization of both networks from one seed.
pub fn init_params<T: Scalar>(seed: u64, config: &ModelConfig) -> Result<(Generator<T>, PatchDiscriminator<T>)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let ic = config.strategy.illum_channels();
    let decomposer =
        UNet::init(&mut store, "dec", 3, 3 + ic, config.depth, config.base_width, config.max_width, &mut rng);
    let enh_in = if config.enhancer_uses_reflectance { ic + 3 } else { ic };
    let enhancer =
        UNet::init(&mut store, "enh", enh_in, ic, config.depth, config.base_width, config.max_width, &mut rng);
    rng.set_stream(1);
    let disc = PatchDiscriminator::init(6, config.disc_base_width, &mut rng);
    Ok((Generator { store, config: config.clone(), decomposer, enhancer }, disc))
}

impl<T: Scalar> Generator<T> {
    pub fn strategy(&self) -> Strategy {
        self.config.strategy
    }

    pub fn check_input(&self, dims: &[usize]) -> Result<()> {
        if dims.len() != 4 {
            return Err(Error::Shape(format!("generator input must be [N, 3, H, W], got {dims:?}")));
        }
        self.decomposer.check_input(dims[1], dims[2], dims[3])
    }

    pub fn decompose_vars(&self, g: &mut Graph<T>, params: &[Var], img: Var) -> Result<DecompVars> {
        let out = self.decomposer.forward(g, params, img)?;
        let r = g.slice_channels(out, 0, 3);
        let i = g.slice_channels(out, 3, self.strategy().illum_channels());
        Ok(DecompVars { r, i })
    }

    pub fn enhance_vars(&self, g: &mut Graph<T>, params: &[Var], dec: DecompVars) -> Result<Var> {
        let ic = g.dims(dec.i)[1];
        if ic != self.strategy().illum_channels() {
            return Err(Error::Shape(format!(
                "strategy {:?} expects {}-channel illumination, got {ic}",
                self.strategy(),
                self.strategy().illum_channels()
            )));
        }
        let input = if self.config.enhancer_uses_reflectance { g.concat_channels(&[dec.i, dec.r]) } else { dec.i };
        self.enhancer.forward(g, params, input)
    }

    /// Full forward pass. `y` (training only) is decomposed with the same weights.
    pub fn forward_vars(&self, g: &mut Graph<T>, params: &[Var], x: Var, y: Option<Var>) -> Result<GeneratorVars> {
        let dec_x = self.decompose_vars(g, params, x)?;
        let dec_y = y.map(|y| self.decompose_vars(g, params, y)).transpose()?;
        let i_x_enh = self.enhance_vars(g, params, dec_x)?;
        let x_hat = compose_vars(g, dec_x.r, i_x_enh)?;
        Ok(GeneratorVars { dec_x, dec_y, i_x_enh, x_hat })
    }

    pub fn decompose(&self, img: &Tensor<T>) -> Result<Decomposition<T>> {
        self.check_input(img.dims())?;
        let mut g = Graph::new();
        let params = self.store.bind(&mut g, false);
        let x = g.constant(img.clone());
        let d = self.decompose_vars(&mut g, &params, x)?;
        Ok(Decomposition { r: g.value(d.r).clone(), i: g.value(d.i).clone() })
    }

    /// Run the enhancement network on an illumination factor (plus `R` when configured).
    pub fn enhance(&self, i_x: &Tensor<T>, r_x: Option<&Tensor<T>>) -> Result<Tensor<T>> {
        if i_x.dims().len() != 4 {
            return Err(Error::Shape(format!("illumination must be [N, C, H, W], got {:?}", i_x.dims())));
        }
        let mut g = Graph::new();
        let params = self.store.bind(&mut g, false);
        let i = g.constant(i_x.clone());
        let r = match (self.config.enhancer_uses_reflectance, r_x) {
            (true, Some(r)) => g.constant(r.clone()),
            (true, None) => return Err(Error::Invalid("enhancer configured to take R; none given".into())),
            (false, _) => i,
        };
        let out = self.enhance_vars(&mut g, &params, DecompVars { r, i })?;
        Ok(g.value(out).clone())
    }

    pub fn forward(&self, x: &Tensor<T>, y: Option<&Tensor<T>>) -> Result<GeneratorOutput<T>> {
        self.check_input(x.dims())?;
        if let Some(y) = y {
            if y.dims() != x.dims() {
                return Err(Error::Shape(format!("x {:?} vs y {:?}", x.dims(), y.dims())));
            }
        }
        let mut g = Graph::new();
        let params = self.store.bind(&mut g, false);
        let xv = g.constant(x.clone());
        let yv = y.map(|y| g.constant(y.clone()));
        let v = self.forward_vars(&mut g, &params, xv, yv)?;
        let dec = |d: DecompVars| Decomposition { r: g.value(d.r).clone(), i: g.value(d.i).clone() };
        Ok(GeneratorOutput {
            dec_x: dec(v.dec_x),
            dec_y: v.dec_y.map(dec),
            i_x_enh: g.value(v.i_x_enh).clone(),
            x_hat: g.value(v.x_hat).clone(),
        })
    }
}
