//! Conditional PatchGAN discriminator.
//!
//! `conv(k4,s2,w) -> conv(k4,s2,2w) -> conv(k4,s2,4w) -> conv(k4,s1,1) -> sigmoid`
//! with padding 1, LeakyReLU(0.2) between layers and instance norm on the two
//! middle layers. Each output unit sees a 46x46 input patch.

use rand::Rng;

use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::nn::{ConvLayer, ParamStore};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct PatchDiscriminator<T> {
    pub store: ParamStore<T>,
    pub widths: [usize; 4],
    layers: Vec<ConvLayer>,
}

/// Receptive field of a conv stack given `(kernel, stride)` per layer:
/// `r <- r + (k - 1) * j`, `j <- j * s`, starting from `r = 1`, `j = 1`.
pub fn receptive_field(layers: &[(usize, usize)]) -> usize {
    let (mut r, mut j) = (1, 1);
    for &(k, s) in layers {
        r += (k - 1) * j;
        j *= s;
    }
    r
}

impl<T: Scalar> PatchDiscriminator<T> {
    /// `base` is the first layer width (64 for the full-size network).
    pub fn init(in_channels: usize, base: usize, rng: &mut impl Rng) -> Self {
        let mut store = ParamStore::new();
        let widths = [base, 2 * base, 4 * base, 1];
        let mut layers = Vec::with_capacity(4);
        let mut cin = in_channels;
        for (i, &w) in widths.iter().enumerate() {
            let stride = if i < 3 { 2 } else { 1 };
            layers.push(ConvLayer::init(&mut store, &format!("disc.conv{i}"), cin, w, 4, stride, 1, false, rng));
            cin = w;
        }
        PatchDiscriminator { store, widths, layers }
    }

    pub fn kernel_strides(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| (l.kernel, l.stride)).collect()
    }

    pub fn receptive_field(&self) -> usize {
        receptive_field(&self.kernel_strides())
    }

    /// Score-map extent for an input of `height x width`.
    pub fn score_map_size(&self, height: usize, width: usize) -> (usize, usize) {
        self.layers.iter().fold((height, width), |(h, w), l| {
            ((h + 2 * l.pad - l.kernel) / l.stride + 1, (w + 2 * l.pad - l.kernel) / l.stride + 1)
        })
    }

    /// Per-patch probabilities that `candidate` is the real image for `condition`.
    pub fn forward(&self, g: &mut Graph<T>, params: &[Var], condition: Var, candidate: Var) -> Result<Var> {
        let (cn, _, ch, cw) = g.value(condition).nchw();
        let (dn, _, dh, dw) = g.value(candidate).nchw();
        if (cn, ch, cw) != (dn, dh, dw) {
            return Err(Error::Shape(format!(
                "discriminator inputs differ: {:?} vs {:?}",
                g.dims(condition),
                g.dims(candidate)
            )));
        }
        let min = 2 * 2 * 2 * 2;
        if ch < min || cw < min {
            return Err(Error::Shape(format!("discriminator input {ch}x{cw} too small")));
        }
        let eps = T::lit(1e-5);
        let leak = T::lit(0.2);
        let mut h = g.concat_channels(&[condition, candidate]);
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.apply(g, params, h);
            if i == last {
                break;
            }
            if i > 0 {
                h = g.instance_norm(h, eps);
            }
            h = g.leaky_relu(h, leak);
        }
        Ok(g.sigmoid(h))
    }

    /// Convenience: score a single pair of `[N, 3, H, W]` tensors outside training.
    pub fn score(&self, condition: &Tensor<T>, candidate: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = Graph::new();
        let params = self.store.bind(&mut g, false);
        let c = g.constant(condition.clone());
        let d = g.constant(candidate.clone());
        let s = self.forward(&mut g, &params, c, d)?;
        Ok(g.value(s).clone())
    }
}
