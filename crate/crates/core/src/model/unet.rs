//! Encoder-decoder with a skip connection at every level.
//!
//! Encoder: `depth` stride-2 4x4 convolutions, LeakyReLU(0.2) before every
//! block but the first, instance norm on all blocks except the outermost and
//! the bottleneck. Decoder: ReLU, stride-2 4x4 transposed convolution,
//! instance norm, then concatenation with the mirrored encoder output. The
//! last decoder block ends in `tanh`.

use rand::Rng;

use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::nn::{ConvLayer, ParamStore};
use crate::scalar::Scalar;

const NORM_EPS: f64 = 1e-5;
const LEAK: f64 = 0.2;

#[derive(Clone, Debug, PartialEq)]
pub struct UNet {
    pub in_channels: usize,
    pub out_channels: usize,
    pub widths: Vec<usize>,
    down: Vec<ConvLayer>,
    up: Vec<ConvLayer>,
}

/// Channel width of encoder level `i`: `base * 2^i`, capped.
pub fn level_widths(depth: usize, base: usize, cap: usize) -> Vec<usize> {
    (0..depth).map(|i| (base << i.min(30)).min(cap)).collect()
}

impl UNet {
    #[allow(clippy::too_many_arguments)]
    pub fn init<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        depth: usize,
        base_width: usize,
        max_width: usize,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(depth >= 1, "U-Net depth must be at least 1");
        let widths = level_widths(depth, base_width, max_width);
        let mut down = Vec::with_capacity(depth);
        let mut cin = in_channels;
        for (i, &w) in widths.iter().enumerate() {
            down.push(ConvLayer::init(store, &format!("{name}.down{i}"), cin, w, 4, 2, 1, false, rng));
            cin = w;
        }
        let mut up = vec![None; depth];
        for i in (0..depth).rev() {
            let cin = if i == depth - 1 { widths[i] } else { 2 * widths[i] };
            let cout = if i == 0 { out_channels } else { widths[i - 1] };
            up[i] = Some(ConvLayer::init(store, &format!("{name}.up{i}"), cin, cout, 4, 2, 1, true, rng));
        }
        let up = up.into_iter().map(|l| l.expect("initialized")).collect();
        UNet { in_channels, out_channels, widths, down, up }
    }

    pub fn depth(&self) -> usize {
        self.widths.len()
    }

    /// Spatial extents must be divisible by `2^depth`.
    pub fn check_input(&self, channels: usize, height: usize, width: usize) -> Result<()> {
        if channels != self.in_channels {
            return Err(Error::Shape(format!(
                "U-Net expects {} input channels, got {channels}",
                self.in_channels
            )));
        }
        let m = 1usize << self.depth();
        if height % m != 0 || width % m != 0 || height == 0 || width == 0 {
            return Err(Error::Shape(format!(
                "input {height}x{width} not divisible by 2^{} = {m}",
                self.depth()
            )));
        }
        Ok(())
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, params: &[Var], x: Var) -> Result<Var> {
        let (_, c, h, w) = g.value(x).nchw();
        self.check_input(c, h, w)?;
        let depth = self.depth();
        let eps = T::lit(NORM_EPS);
        let leak = T::lit(LEAK);
        let mut skips = Vec::with_capacity(depth);
        let mut h = x;
        for (i, layer) in self.down.iter().enumerate() {
            if i > 0 {
                h = g.leaky_relu(h, leak);
            }
            h = layer.apply(g, params, h);
            if i > 0 && i + 1 < depth {
                h = g.instance_norm(h, eps);
            }
            skips.push(h);
        }
        for i in (0..depth).rev() {
            h = g.relu(h);
            h = self.up[i].apply(g, params, h);
            if i > 0 {
                h = g.instance_norm(h, eps);
                h = g.concat_channels(&[h, skips[i - 1]]);
            }
        }
        Ok(g.tanh(h))
    }
}
