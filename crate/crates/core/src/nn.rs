//! Parameter storage and the convolution layer building block.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Standard deviation of the Gaussian weight initialization.
pub const INIT_STD: f64 = 0.02;

/// Named, ordered parameter tensors of one network.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParamStore<T> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore { names: Vec::new(), tensors: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, t: Tensor<T>) -> usize {
        self.names.push(name.into());
        self.tensors.push(t);
        self.tensors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    pub fn get(&self, i: usize) -> &Tensor<T> {
        &self.tensors[i]
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Put every tensor on the graph; `trainable` decides whether they collect gradients.
    pub fn bind(&self, g: &mut Graph<T>, trainable: bool) -> Vec<Var> {
        self.tensors
            .iter()
            .map(|t| if trainable { g.param(t.clone()) } else { g.constant(t.clone()) })
            .collect()
    }

    /// Replace every tensor, checking names and shapes against the current layout.
    pub fn load(&mut self, names: &[String], tensors: Vec<Tensor<T>>) -> Result<()> {
        if names != self.names.as_slice() || tensors.len() != self.tensors.len() {
            return Err(Error::Corrupt(format!(
                "parameter layout differs: expected {} tensors, found {}",
                self.names.len(),
                names.len()
            )));
        }
        for ((name, old), new) in self.names.iter().zip(&self.tensors).zip(&tensors) {
            if old.dims() != new.dims() {
                return Err(Error::Corrupt(format!("{name}: expected {:?}, found {:?}", old.dims(), new.dims())));
            }
        }
        self.tensors = tensors;
        Ok(())
    }

    /// Every value of every weight (not bias) tensor.
    pub fn weight_values(&self) -> impl Iterator<Item = T> + '_ {
        self.names
            .iter()
            .zip(&self.tensors)
            .filter(|(n, _)| n.ends_with(".w"))
            .flat_map(|(_, t)| t.data().iter().copied())
    }
}

/// One convolution (or transposed convolution) with bias.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvLayer {
    pub weight: usize,
    pub bias: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub transposed: bool,
}

impl ConvLayer {
    /// Register a `k x k` layer mapping `cin -> cout` channels with N(0, 0.02)
    /// weights and zero bias.
    #[allow(clippy::too_many_arguments)]
    pub fn init<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        transposed: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let dims = if transposed { [cin, cout, kernel, kernel] } else { [cout, cin, kernel, kernel] };
        let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
        let w = Tensor::from_fn(&dims, |_| T::lit(normal.sample(rng)));
        let weight = store.push(format!("{name}.w"), w);
        let bias = store.push(format!("{name}.b"), Tensor::zeros(&[cout]));
        ConvLayer { weight, bias, kernel, stride, pad, transposed }
    }

    pub fn apply<T: Scalar>(&self, g: &mut Graph<T>, params: &[Var], x: Var) -> Var {
        let (w, b) = (params[self.weight], params[self.bias]);
        if self.transposed {
            g.conv_transpose2d(x, w, Some(b), self.stride, self.pad)
        } else {
            g.conv2d(x, w, Some(b), self.stride, self.pad)
        }
    }
}
