use super::NnError;
use crate::seed::rng_from_seed;
use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const LOG_VAR_MIN: f64 = -10.0;
pub const LOG_VAR_MAX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

/// Output transform applied after the last dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    Linear,
    /// Squashes every output into `[-1, 1]`.
    Tanh,
    /// First half of the outputs is a mean, second half a log-variance
    /// softly clamped into `[LOG_VAR_MIN, LOG_VAR_MAX]`.
    Gaussian,
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Smooth clamp of a raw log-variance and its derivative.
pub fn soft_clamp_log_var(raw: f64) -> (f64, f64) {
    let upper = LOG_VAR_MAX - softplus(LOG_VAR_MAX - raw);
    let out = LOG_VAR_MIN + softplus(upper - LOG_VAR_MIN);
    let d = sigmoid(LOG_VAR_MAX - raw) * sigmoid(upper - LOG_VAR_MIN);
    (out.clamp(LOG_VAR_MIN, LOG_VAR_MAX), d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `in × out`, applied as `x · W + b`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    activation: Activation,
    head: Head,
    pub(super) layers: Vec<Dense>,
    generation: u64,
}

/// Activations recorded by [`Mlp::forward`] for one batch.
#[derive(Debug, Clone)]
pub struct Cache {
    generation: u64,
    /// Input of every layer.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of the last layer.
    last_pre: Array2<f64>,
    output: Array2<f64>,
}

impl Cache {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }
}

/// Parameter gradients, one `(dW, db)` per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Gradients {
    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied().collect::<Vec<_>>())
            .collect()
    }

    pub fn scale(&mut self, k: f64) {
        for (w, b) in &mut self.layers {
            *w *= k;
            *b *= k;
        }
    }
}

impl Mlp {
    /// `dims = [input, hidden…, output]`, uniform fan-in initialization.
    pub fn new(dims: &[usize], activation: Activation, head: Head, seed: u64) -> Result<Self, NnError> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return Err(NnError::Architecture(format!("layer dims {dims:?} need ≥ 2 positive entries")));
        }
        if head == Head::Gaussian && dims[dims.len() - 1] % 2 != 0 {
            return Err(NnError::Architecture(format!(
                "gaussian head needs an even output width, got {}",
                dims[dims.len() - 1]
            )));
        }
        let mut rng = rng_from_seed(seed);
        let layers = dims
            .windows(2)
            .map(|p| {
                let bound = 1.0 / (p[0] as f64).sqrt();
                Dense {
                    w: Array2::from_shape_fn((p[0], p[1]), |_| rng.gen_range(-bound..bound)),
                    b: Array1::from_shape_fn(p[1], |_| rng.gen_range(-bound..bound)),
                }
            })
            .collect();
        Ok(Self {
            dims: dims.to_vec(),
            activation,
            head,
            layers,
            generation: 0,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        self.dims[self.dims.len() - 1]
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Parameters in layer order, each layer as `W` (row-major) then `b`.
    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.w.iter().chain(l.b.iter()).copied().collect::<Vec<_>>())
            .collect()
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<(), NnError> {
        if flat.len() != self.param_count() {
            return Err(NnError::Shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            for v in l.w.iter_mut().chain(l.b.iter_mut()) {
                *v = it.next().expect("length checked");
            }
        }
        self.touch();
        Ok(())
    }

    /// Marks parameters as changed; caches from earlier forwards become stale.
    pub(super) fn touch(&mut self) {
        self.generation += 1;
    }

    pub(super) fn layers_mut(&mut self) -> &mut [Dense] {
        self.touch();
        &mut self.layers
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<(), NnError> {
        if x.ncols() != self.input_dim() {
            return Err(NnError::Shape(format!(
                "input width {} does not match network input {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn hidden(&self, z: &mut Array2<f64>) {
        match self.activation {
            Activation::Tanh => z.mapv_inplace(f64::tanh),
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
        }
    }

    fn apply_head(&self, pre: &Array2<f64>) -> Array2<f64> {
        match self.head {
            Head::Linear => pre.clone(),
            Head::Tanh => pre.mapv(f64::tanh),
            Head::Gaussian => {
                let k = self.output_dim() / 2;
                let mut out = pre.clone();
                out.slice_mut(ndarray::s![.., k..]).mapv_inplace(|v| soft_clamp_log_var(v).0);
                out
            }
        }
    }

    /// Batched forward pass (one sample per row) recording activations.
    pub fn forward(&self, x: &Array2<f64>) -> Result<Cache, NnError> {
        self.check_input(x)?;
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut h = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = h.dot(&l.w) + &l.b;
            inputs.push(h);
            if i + 1 < n {
                self.hidden(&mut z);
                h = z;
            } else {
                let output = self.apply_head(&z);
                return Ok(Cache {
                    generation: self.generation,
                    inputs,
                    last_pre: z,
                    output,
                });
            }
        }
        unreachable!("at least one layer")
    }

    pub fn predict(&self, x: &Array2<f64>) -> Result<Array2<f64>, NnError> {
        self.check_input(x)?;
        let n = self.layers.len();
        let mut h = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = h.dot(&l.w) + &l.b;
            if i + 1 < n {
                self.hidden(&mut z);
                h = z;
            } else {
                return Ok(self.apply_head(&z));
            }
        }
        unreachable!("at least one layer")
    }

    pub fn predict_one(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        let row = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("row shape");
        Ok(self.predict(&row)?.into_raw_vec())
    }

    /// Reverse-mode gradients of `Σ grad_out ⊙ output` with respect to the
    /// parameters and the input.
    pub fn backward(&self, cache: &Cache, grad_out: &Array2<f64>) -> Result<(Gradients, Array2<f64>), NnError> {
        if cache.generation != self.generation {
            return Err(NnError::StaleCache);
        }
        if grad_out.dim() != cache.output.dim() {
            return Err(NnError::Shape(format!(
                "output gradient {:?} does not match output {:?}",
                grad_out.dim(),
                cache.output.dim()
            )));
        }
        let mut delta = match self.head {
            Head::Linear => grad_out.clone(),
            Head::Tanh => grad_out * &cache.output.mapv(|y| 1.0 - y * y),
            Head::Gaussian => {
                let k = self.output_dim() / 2;
                let mut d = grad_out.clone();
                let pre = cache.last_pre.slice(ndarray::s![.., k..]);
                d.slice_mut(ndarray::s![.., k..])
                    .zip_mut_with(&pre, |g, &z| *g *= soft_clamp_log_var(z).1);
                d
            }
        };
        let mut grads = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let input = &cache.inputs[i];
            let dw = input.t().dot(&delta);
            let db = delta.sum_axis(Axis(0));
            let dx = delta.dot(&self.layers[i].w.t());
            grads.push((dw, db));
            delta = if i > 0 {
                // `input` is the activated output of layer i-1.
                match self.activation {
                    Activation::Tanh => dx * &input.mapv(|y| 1.0 - y * y),
                    Activation::Relu => dx * &input.mapv(|y| if y > 0.0 { 1.0 } else { 0.0 }),
                }
            } else {
                dx
            };
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, delta))
    }

    /// Polyak averaging: `θ ← τ·θ_src + (1 − τ)·θ`.
    pub fn soft_update_from(&mut self, src: &Mlp, tau: f64) -> Result<(), NnError> {
        if src.dims != self.dims {
            return Err(NnError::Shape(format!("dims {:?} vs {:?}", src.dims, self.dims)));
        }
        for (dst, s) in self.layers_mut().iter_mut().zip(&src.layers) {
            dst.w.zip_mut_with(&s.w, |d, &v| *d = tau * v + (1.0 - tau) * *d);
            dst.b.zip_mut_with(&s.b, |d, &v| *d = tau * v + (1.0 - tau) * *d);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn set_layer(net: &mut Mlp, i: usize, w: Array2<f64>, b: Array1<f64>) {
        let l = &mut net.layers_mut()[i];
        l.w = w;
        l.b = b;
    }

    #[test]
    fn identity_linear_layer() {
        let mut net = Mlp::new(&[3, 3], Activation::Tanh, Head::Linear, 0).unwrap();
        set_layer(&mut net, 0, Array2::eye(3), Array1::zeros(3));
        assert_eq!(net.predict_one(&[1.0, -2.0, 0.5]).unwrap(), vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn tanh_head_at_zero() {
        let mut net = Mlp::new(&[2, 1], Activation::Tanh, Head::Tanh, 0).unwrap();
        set_layer(&mut net, 0, Array2::zeros((2, 1)), Array1::zeros(1));
        assert_eq!(net.predict_one(&[3.0, 4.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn hand_computed_two_two_one() {
        let mut net = Mlp::new(&[2, 2, 1], Activation::Tanh, Head::Linear, 0).unwrap();
        set_layer(&mut net, 0, array![[0.5, -1.0], [0.25, 2.0]], array![0.1, 0.0]);
        set_layer(&mut net, 1, array![[1.0], [-0.5]], array![0.2]);
        // h = tanh([0.5·1 + 0.25·2 + 0.1, −1·1 + 2·2]) = tanh([1.1, 3]).
        let expected = 1.1f64.tanh() - 0.5 * 3f64.tanh() + 0.2;
        let y = net.predict_one(&[1.0, 2.0]).unwrap()[0];
        assert!((y - expected).abs() < 1e-15);
    }

    #[test]
    fn linear_weight_gradient_is_input() {
        let net = Mlp::new(&[3, 2], Activation::Relu, Head::Linear, 1).unwrap();
        let x = array![[0.3, -1.2, 2.0]];
        let cache = net.forward(&x).unwrap();
        let (g, _) = net.backward(&cache, &array![[1.0, 0.0]]).unwrap();
        assert_eq!(g.layers[0].0.column(0).to_vec(), vec![0.3, -1.2, 2.0]);
        assert_eq!(g.layers[0].0.column(1).to_vec(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_output_gradient_gives_zero_gradients() {
        let net = Mlp::new(&[4, 5, 2], Activation::Tanh, Head::Gaussian, 3).unwrap();
        let x = Array2::from_elem((3, 4), 0.7);
        let cache = net.forward(&x).unwrap();
        let (g, dx) = net.backward(&cache, &Array2::zeros((3, 2))).unwrap();
        assert!(g.flat().iter().all(|&v| v == 0.0));
        assert!(dx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stale_cache_rejected() {
        let mut net = Mlp::new(&[2, 2], Activation::Tanh, Head::Linear, 0).unwrap();
        let cache = net.forward(&array![[1.0, 1.0]]).unwrap();
        let p = net.params();
        net.set_params(&p).unwrap();
        assert!(matches!(
            net.backward(&cache, &array![[1.0, 1.0]]),
            Err(NnError::StaleCache)
        ));
    }

    #[test]
    fn dimension_mismatch() {
        let net = Mlp::new(&[2, 2], Activation::Tanh, Head::Linear, 0).unwrap();
        assert!(matches!(net.predict_one(&[1.0]), Err(NnError::Shape(_))));
        assert!(Mlp::new(&[2, 3], Activation::Tanh, Head::Gaussian, 0).is_err());
        assert!(Mlp::new(&[2], Activation::Tanh, Head::Linear, 0).is_err());
    }

    #[test]
    fn soft_clamp_stays_in_range() {
        for raw in [-1e6, -50.0, -10.0, 0.0, 2.0, 50.0, 1e6] {
            let (v, d) = soft_clamp_log_var(raw);
            assert!((LOG_VAR_MIN..=LOG_VAR_MAX).contains(&v), "{raw} → {v}");
            assert!((0.0..=1.0).contains(&d));
        }
    }

    #[test]
    fn same_seed_same_weights() {
        let a = Mlp::new(&[5, 8, 2], Activation::Relu, Head::Tanh, 42).unwrap();
        let b = Mlp::new(&[5, 8, 2], Activation::Relu, Head::Tanh, 42).unwrap();
        assert_eq!(a.params(), b.params());
    }
}
