use super::mlp::{Gradients, Mlp};
use super::NnError;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<(Array2<f64>, Array1<f64>)>,
    v: Vec<(Array2<f64>, Array1<f64>)>,
}

impl AdamState {
    pub fn new(net: &Mlp, config: AdamConfig) -> Self {
        let zeros: Vec<_> = net
            .layers()
            .iter()
            .map(|l| (Array2::zeros(l.w.dim()), Array1::zeros(l.b.len())))
            .collect();
        Self {
            config,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One bias-corrected Adam update of `net` along `grads`.
    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<(), NnError> {
        let shapes_ok = grads.layers.len() == self.m.len()
            && grads
                .layers
                .iter()
                .zip(&self.m)
                .all(|((gw, gb), (mw, mb))| gw.dim() == mw.dim() && gb.len() == mb.len());
        if !shapes_ok || net.layers().len() != self.m.len() {
            return Err(NnError::Shape("gradients do not match optimizer state".into()));
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for (i, layer) in net.layers_mut().iter_mut().enumerate() {
            let (gw, gb) = &grads.layers[i];
            let (mw, mb) = &mut self.m[i];
            let (vw, vb) = &mut self.v[i];
            for (((p, g), m), v) in layer.w.iter_mut().zip(gw.iter()).zip(mw.iter_mut()).zip(vw.iter_mut()) {
                update(p, *g, m, v);
            }
            for (((p, g), m), v) in layer.b.iter_mut().zip(gb.iter()).zip(mb.iter_mut()).zip(vb.iter_mut()) {
                update(p, *g, m, v);
            }
        }
        Ok(())
    }
}

/// Mean squared error over all elements and its gradient.
pub fn mse_loss(pred: &Array2<f64>, target: &Array2<f64>) -> (f64, Array2<f64>) {
    let diff = pred - target;
    let n = diff.len().max(1) as f64;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    (loss, diff * (2.0 / n))
}

/// `0.5·Σ[(target − mean)²/exp(log_var) + log_var]` with gradients
/// `(∂/∂mean, ∂/∂log_var)`.
pub fn gaussian_nll(mean: &[f64], log_var: &[f64], target: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    assert!(mean.len() == log_var.len() && mean.len() == target.len(), "equal widths");
    let mut loss = 0.0;
    let mut gm = Vec::with_capacity(mean.len());
    let mut gl = Vec::with_capacity(mean.len());
    for ((&m, &lv), &t) in mean.iter().zip(log_var).zip(target) {
        let inv = (-lv).exp();
        let e = t - m;
        loss += 0.5 * (e * e * inv + lv);
        gm.push(-e * inv);
        gl.push(0.5 * (1.0 - e * e * inv));
    }
    (loss, gm, gl)
}

/// Batch mean of [`gaussian_nll`] over rows of a gaussian-head output
/// `[mean | log_var]`; returns the loss and its gradient w.r.t. the output.
pub fn gaussian_nll_batch(output: &Array2<f64>, target: &Array2<f64>) -> (f64, Array2<f64>) {
    let k = target.ncols();
    assert_eq!(output.ncols(), 2 * k, "gaussian output is twice the target width");
    assert_eq!(output.nrows(), target.nrows());
    let n = output.nrows().max(1) as f64;
    let mut grad = Array2::zeros(output.dim());
    let mut loss = 0.0;
    for (i, (o, t)) in output.rows().into_iter().zip(target.rows()).enumerate() {
        let o = o.to_vec();
        let (l, gm, gl) = gaussian_nll(&o[..k], &o[k..], &t.to_vec());
        loss += l;
        for j in 0..k {
            grad[[i, j]] = gm[j] / n;
            grad[[i, k + j]] = gl[j] / n;
        }
    }
    (loss / n, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Head};
    use ndarray::array;

    #[test]
    fn first_adam_step_moves_by_lr_times_sign() {
        let mut net = Mlp::new(&[2, 1], Activation::Tanh, Head::Linear, 0).unwrap();
        let before = net.params();
        let mut adam = AdamState::new(&net, AdamConfig::with_lr(0.01));
        let g = Gradients {
            layers: vec![(array![[3.0], [-0.002]], array![0.5])],
        };
        adam.step(&mut net, &g).unwrap();
        let after = net.params();
        let expect = [-0.01, 0.01, -0.01];
        for i in 0..3 {
            assert!((after[i] - before[i] - expect[i]).abs() < 1e-7, "param {i}");
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut net = Mlp::new(&[3, 4, 2], Activation::Relu, Head::Linear, 5).unwrap();
        let before = net.params();
        let mut adam = AdamState::new(&net, AdamConfig::default());
        let zero = Gradients {
            layers: net
                .layers()
                .iter()
                .map(|l| (Array2::zeros(l.w.dim()), Array1::zeros(l.b.len())))
                .collect(),
        };
        for _ in 0..3 {
            adam.step(&mut net, &zero).unwrap();
        }
        assert_eq!(net.params(), before);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut net = Mlp::new(&[2, 1], Activation::Tanh, Head::Linear, 0).unwrap();
        let mut adam = AdamState::new(&net, AdamConfig::default());
        let g = Gradients {
            layers: vec![(array![[1.0, 2.0]], array![0.5])],
        };
        assert!(adam.step(&mut net, &g).is_err());
    }

    #[test]
    fn nll_examples() {
        assert_eq!(gaussian_nll(&[0.3], &[0.0], &[0.3]).0, 0.0);
        assert_eq!(gaussian_nll(&[0.0], &[0.0], &[1.0]).0, 0.5);
    }

    #[test]
    fn nll_gradient_matches_finite_differences() {
        let (m, lv, t) = ([0.2, -1.0], [0.3, -0.7], [1.1, -0.4]);
        let (_, gm, gl) = gaussian_nll(&m, &lv, &t);
        let h = 1e-5;
        for j in 0..2 {
            let mut mp = m;
            let mut mm = m;
            mp[j] += h;
            mm[j] -= h;
            let fd = (gaussian_nll(&mp, &lv, &t).0 - gaussian_nll(&mm, &lv, &t).0) / (2.0 * h);
            assert!((fd - gm[j]).abs() <= 1e-4 * fd.abs().max(1e-8));
            let mut lp = lv;
            let mut lm = lv;
            lp[j] += h;
            lm[j] -= h;
            let fd = (gaussian_nll(&m, &lp, &t).0 - gaussian_nll(&m, &lm, &t).0) / (2.0 * h);
            assert!((fd - gl[j]).abs() <= 1e-4 * fd.abs().max(1e-8));
        }
    }

    #[test]
    fn mse_gradient() {
        let (l, g) = mse_loss(&array![[1.0, 3.0]], &array![[0.0, 1.0]]);
        assert_eq!(l, 2.5);
        assert_eq!(g, array![[1.0, 2.0]]);
    }
}
