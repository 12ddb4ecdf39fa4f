use super::{MlpGrads, MlpParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct AdamState<S> {
    pub m: MlpGrads<S>,
    pub v: MlpGrads<S>,
    pub t: u64,
    pub lr: S,
    pub beta1: S,
    pub beta2: S,
    pub eps: S,
}

impl<S: Scalar> AdamState<S> {
    /// Fresh state with the canonical `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`.
    pub fn new(params: &MlpParams<S>, lr: S) -> Self {
        Self::with_betas(params, lr, S::lit(0.9), S::lit(0.999), S::lit(1e-8))
    }

    pub fn with_betas(params: &MlpParams<S>, lr: S, beta1: S, beta2: S, eps: S) -> Self {
        Self {
            m: MlpGrads::zeros_like(params),
            v: MlpGrads::zeros_like(params),
            t: 0,
            lr,
            beta1,
            beta2,
            eps,
        }
    }

    /// One optimizer step. Gradients are validated before anything is mutated.
    pub fn step(&mut self, params: &mut MlpParams<S>, grads: &MlpGrads<S>) -> Result<()> {
        if !params.same_shape(&grads.layers) || !params.same_shape(&self.m.layers) {
            return Err(Error::Parameter("adam: params, grads and moments differ in shape".into()));
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("adam gradient".into()));
        }
        self.t += 1;
        let t = self.t as i32;
        let one = S::one();
        let bc1 = one - self.beta1.powi(t);
        let bc2 = one - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let tensors = params
            .tensors_mut()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut().zip(self.v.tensors_mut()));
        for ((p, g), (m, v)) in tensors {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (one - b1) * gi;
                v[i] = b2 * v[i] + (one - b2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
