//! Feed-forward Q-network: affine layers with ReLU hidden activations and an
//! identity output, plus hand-rolled backpropagation and the Adam optimizer.

use crate::error::{Result, SimError};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct Mlp {
    dims: Vec<usize>,
    /// Per layer, row-major [out][in].
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Mlp {
    /// Uniform init in +-sqrt(6/(fan_in+fan_out)), biases zero.
    pub fn new(dims: &[usize], rng: &mut ChaCha8Rng) -> Result<Mlp> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return Err(SimError::Config(format!("mlp: bad layer dims {dims:?}")));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| rng.gen_range(-limit..limit))
                    .collect(),
            );
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Mlp {
            dims: dims.to_vec(),
            weights,
            biases,
        })
    }

    pub fn zeros(dims: &[usize]) -> Mlp {
        let weights = (0..dims.len() - 1)
            .map(|l| vec![0.0; dims[l] * dims[l + 1]])
            .collect();
        let biases = (0..dims.len() - 1).map(|l| vec![0.0; dims[l + 1]]).collect();
        Mlp {
            dims: dims.to_vec(),
            weights,
            biases,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn layer_count(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn param_count(&self) -> usize {
        (0..self.layer_count())
            .map(|l| self.dims[l] * self.dims[l + 1] + self.dims[l + 1])
            .sum()
    }

    pub fn copy_from(&mut self, other: &Mlp) {
        debug_assert_eq!(self.dims, other.dims);
        for (dst, src) in self.weights.iter_mut().zip(other.weights.iter()) {
            dst.copy_from_slice(src);
        }
        for (dst, src) in self.biases.iter_mut().zip(other.biases.iter()) {
            dst.copy_from_slice(src);
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(SimError::Validation(format!(
                "mlp forward: input length {} != {}",
                input.len(),
                self.input_dim()
            )));
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(SimError::Validation("mlp forward: non-finite input".into()));
        }
        Ok(self.forward_trace(input).output)
    }

    pub(crate) fn forward_trace(&self, input: &[f64]) -> Trace {
        let layers = self.layer_count();
        let mut layer_inputs = Vec::with_capacity(layers);
        let mut x = input.to_vec();
        for l in 0..layers {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let mut z = self.biases[l].clone();
            let w = &self.weights[l];
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &w[o * n_in..(o + 1) * n_in];
                let mut acc = 0.0;
                for (wi, xi) in row.iter().zip(x.iter()) {
                    acc += wi * xi;
                }
                *zo += acc;
            }
            layer_inputs.push(x);
            if l + 1 < layers {
                // hidden layer: rectify
                for v in &mut z {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            let _ = n_out;
            x = z;
        }
        Trace {
            layer_inputs,
            output: x,
        }
    }

    /// Backpropagate dL/d(output) through the network, accumulating parameter
    /// gradients. `trace` must come from `forward_trace` on the same input.
    pub(crate) fn backward(&self, trace: &Trace, dloss_dout: &[f64], grads: &mut Gradients) {
        let layers = self.layer_count();
        let mut delta = dloss_dout.to_vec();
        for l in (0..layers).rev() {
            let n_in = self.dims[l];
            let x = &trace.layer_inputs[l];
            // ReLU derivative for hidden layers: the layer input of l+1 is the
            // post-activation of layer l, which is zero exactly where clipped.
            if l + 1 < layers {
                let post = &trace.layer_inputs[l + 1];
                for (d, p) in delta.iter_mut().zip(post.iter()) {
                    if *p <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let gw = &mut grads.weights[l];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                let row = &mut gw[o * n_in..(o + 1) * n_in];
                for (g, xi) in row.iter_mut().zip(x.iter()) {
                    *g += d * xi;
                }
                grads.biases[l][o] += d;
            }
            if l > 0 {
                let w = &self.weights[l];
                let mut prev = vec![0.0; n_in];
                for (o, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    let row = &w[o * n_in..(o + 1) * n_in];
                    for (p, wi) in prev.iter_mut().zip(row.iter()) {
                        *p += d * wi;
                    }
                }
                delta = prev;
            }
        }
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in 0..self.layer_count() {
            out.extend_from_slice(&self.weights[l]);
            out.extend_from_slice(&self.biases[l]);
        }
        out
    }

    pub fn load_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(SimError::Validation(format!(
                "mlp load: expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut off = 0;
        for l in 0..self.layer_count() {
            let wn = self.weights[l].len();
            self.weights[l].copy_from_slice(&flat[off..off + wn]);
            off += wn;
            let bn = self.biases[l].len();
            self.biases[l].copy_from_slice(&flat[off..off + bn]);
            off += bn;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Trace {
    /// Input vector of each layer (index 0 is the network input).
    pub layer_inputs: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

/// Parameter gradients with the same shapes as the network.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Gradients {
        Gradients {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn reset(&mut self) {
        for w in &mut self.weights {
            w.iter_mut().for_each(|v| *v = 0.0);
        }
        for b in &mut self.biases {
            b.iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

/// Adam first/second moment state.
#[derive(Debug, Clone)]
pub struct AdamState {
    m_w: Vec<Vec<f64>>,
    v_w: Vec<Vec<f64>>,
    m_b: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
    t: u64,
}

impl AdamState {
    pub fn new(net: &Mlp) -> AdamState {
        AdamState {
            m_w: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            v_w: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            m_b: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            v_b: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            t: 0,
        }
    }
}

/// One Adam update with bias correction.
pub fn adam_step(
    net: &mut Mlp,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) -> Result<()> {
    for layer in grads.weights.iter().chain(grads.biases.iter()) {
        if layer.iter().any(|g| !g.is_finite()) {
            return Err(SimError::InternalInvariant(
                "adam_step: non-finite gradient".into(),
            ));
        }
    }
    state.t += 1;
    let bc1 = 1.0 - beta1.powi(state.t as i32);
    let bc2 = 1.0 - beta2.powi(state.t as i32);
    let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        for i in 0..p.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    };
    for l in 0..net.layer_count() {
        update(
            &mut net.weights[l],
            &grads.weights[l],
            &mut state.m_w[l],
            &mut state.v_w[l],
        );
        update(
            &mut net.biases[l],
            &grads.biases[l],
            &mut state.m_b[l],
            &mut state.v_b[l],
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_net_zero_output() {
        let net = Mlp::zeros(&[6, 8, 4]);
        let out = net.forward(&[1.0, -2.0, 0.5, 3.0, 0.0, 1.0]).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn output_length_matches_architecture() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::new(&[144, 128, 256, 48], &mut rng).unwrap();
        let out = net.forward(&vec![0.1; 144]).unwrap();
        assert_eq!(out.len(), 48);
    }

    #[test]
    fn forward_rejects_bad_input() {
        let net = Mlp::zeros(&[4, 2]);
        assert!(net.forward(&[0.0; 3]).is_err());
        assert!(net.forward(&[0.0, f64::NAN, 0.0, 0.0]).is_err());
    }

    /// Central-difference oracle over every parameter of a small net.
    fn finite_diff_check(dims: &[usize], seed: u64, inputs: usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Mlp::new(dims, &mut rng).unwrap();
        let out_dim = net.output_dim();
        let h = 1e-5;
        for _ in 0..inputs {
            let x: Vec<f64> = (0..net.input_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let target: Vec<f64> = (0..out_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let loss_of = |n: &Mlp| -> f64 {
                let y = n.forward(&x).unwrap();
                y.iter()
                    .zip(target.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            };
            let trace = net.forward_trace(&x);
            let dloss: Vec<f64> = trace
                .output
                .iter()
                .zip(target.iter())
                .map(|(a, b)| 2.0 * (a - b))
                .collect();
            let mut grads = Gradients::zeros_like(&net);
            net.backward(&trace, &dloss, &mut grads);

            let mut perturbed = net.clone();
            for l in 0..net.layer_count() {
                for i in 0..net.weights[l].len() {
                    perturbed.weights[l][i] = net.weights[l][i] + h;
                    let up = loss_of(&perturbed);
                    perturbed.weights[l][i] = net.weights[l][i] - h;
                    let down = loss_of(&perturbed);
                    perturbed.weights[l][i] = net.weights[l][i];
                    let fd = (up - down) / (2.0 * h);
                    let an = grads.weights[l][i];
                    let scale = an.abs().max(fd.abs());
                    if scale > 1e-7 {
                        assert!(
                            (an - fd).abs() / scale < 1e-4,
                            "layer {l} weight {i}: analytic {an} fd {fd}"
                        );
                    }
                }
                for i in 0..net.biases[l].len() {
                    perturbed.biases[l][i] = net.biases[l][i] + h;
                    let up = loss_of(&perturbed);
                    perturbed.biases[l][i] = net.biases[l][i] - h;
                    let down = loss_of(&perturbed);
                    perturbed.biases[l][i] = net.biases[l][i];
                    let fd = (up - down) / (2.0 * h);
                    let an = grads.biases[l][i];
                    let scale = an.abs().max(fd.abs());
                    if scale > 1e-7 {
                        assert!(
                            (an - fd).abs() / scale < 1e-4,
                            "layer {l} bias {i}: analytic {an} fd {fd}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        finite_diff_check(&[6, 10, 12, 4], 42, 10);
    }

    #[test]
    fn adam_zero_gradient_keeps_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = Mlp::new(&[3, 4, 2], &mut rng).unwrap();
        let before = net.params_flat();
        let grads = Gradients::zeros_like(&net);
        let mut st = AdamState::new(&net);
        adam_step(&mut net, &grads, &mut st, 1e-4, 0.9, 0.999, 1e-8).unwrap();
        assert_eq!(net.params_flat(), before);
    }

    #[test]
    fn adam_zero_lr_keeps_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = Mlp::new(&[3, 4, 2], &mut rng).unwrap();
        let before = net.params_flat();
        let mut grads = Gradients::zeros_like(&net);
        for g in grads.weights.iter_mut().chain(grads.biases.iter_mut()) {
            g.iter_mut().for_each(|v| *v = 0.7);
        }
        let mut st = AdamState::new(&net);
        adam_step(&mut net, &grads, &mut st, 0.0, 0.9, 0.999, 1e-8).unwrap();
        assert_eq!(net.params_flat(), before);
    }

    #[test]
    fn adam_first_step_closed_form() {
        // Scalar parameter w=1 with gradient 1: bias-corrected m=v=1, so the
        // step is exactly lr/(1+eps).
        let mut net = Mlp::zeros(&[1, 1]);
        net.weights[0][0] = 1.0;
        let mut grads = Gradients::zeros_like(&net);
        grads.weights[0][0] = 1.0;
        let mut st = AdamState::new(&net);
        let lr = 1e-4;
        adam_step(&mut net, &grads, &mut st, lr, 0.9, 0.999, 1e-8).unwrap();
        let expect = 1.0 - lr / (1.0 + 1e-8);
        assert!((net.weights[0][0] - expect).abs() < 1e-15);
        assert!((net.weights[0][0] - 0.9999).abs() < 1e-8);
    }

    #[test]
    fn adam_rejects_non_finite_gradient() {
        let mut net = Mlp::zeros(&[1, 1]);
        let mut grads = Gradients::zeros_like(&net);
        grads.weights[0][0] = f64::NAN;
        let mut st = AdamState::new(&net);
        assert!(adam_step(&mut net, &grads, &mut st, 1e-4, 0.9, 0.999, 1e-8).is_err());
    }
}
