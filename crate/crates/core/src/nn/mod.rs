//! Dense MLP kernel, Adam, Polyak averaging and the squashed Gaussian head.

mod adam;
mod gaussian;
mod matrix;
mod mlp;

pub use adam::AdamState;
pub use gaussian::{
    squashed_gaussian_backward, squashed_gaussian_sample, SquashedGrads, SquashedSample,
    LOG_STD_MAX, LOG_STD_MIN, TANH_EPS,
};
pub use matrix::Matrix;
pub use mlp::{soft_update, Dense, ForwardCache, MlpGrads, MlpParams, DEFAULT_HIDDEN};

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Straight triple loop, independent of the GEMM path.
    fn naive_forward(p: &MlpParams<f64>, x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        for (li, layer) in p.layers.iter().enumerate() {
            let mut next = vec![0.0; layer.n_out];
            for o in 0..layer.n_out {
                let mut acc = layer.b[o];
                for i in 0..layer.n_in {
                    acc += layer.w[o * layer.n_in + i] * h[i];
                }
                next[o] = if li < 2 { acc.max(0.0) } else { acc };
            }
            h = next;
        }
        h
    }

    #[test]
    fn zero_params_output_bias() {
        let p = MlpParams::<f64>::zeros(5, 64, 3).unwrap();
        let (out, _) = p.forward(&[1.0, -2.0, 3.0, 0.5, 9.0]).unwrap();
        assert_eq!(out, vec![0.0; 3]);
    }

    #[test]
    fn relu_gates_negative_input() {
        let mut p = MlpParams::<f64>::zeros(1, 64, 1).unwrap();
        p.layers[0].w.iter_mut().for_each(|w| *w = 1.0);
        for i in 0..64 {
            p.layers[1].w[i * 64 + i] = 1.0;
        }
        p.layers[2].w.iter_mut().for_each(|w| *w = 1.0);
        let (out, _) = p.forward(&[-1.0]).unwrap();
        assert_eq!(out, vec![0.0]);
        let (out, _) = p.forward(&[2.0]).unwrap();
        assert_eq!(out, vec![128.0]);
    }

    #[test]
    fn forward_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = MlpParams::<f64>::init(4, 64, 3, &mut rng).unwrap();
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (out, _) = p.forward(&x).unwrap();
        let want = naive_forward(&p, &x);
        for (a, b) in out.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300), "{a} vs {b}");
        }
    }

    #[test]
    fn forward_is_bit_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = MlpParams::<f64>::init(6, 64, 2, &mut rng).unwrap();
        let x = Matrix::from_vec(2, 6, (0..12).map(|i| i as f64 * 0.1).collect()).unwrap();
        assert_eq!(p.predict(&x).unwrap(), p.predict(&x).unwrap());
        assert_eq!(p.forward_batch(&x).unwrap().0, p.predict(&x).unwrap());
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let p = MlpParams::<f64>::zeros(3, 8, 1).unwrap();
        assert!(matches!(p.forward(&[1.0, 2.0]), Err(crate::Error::Shape { .. })));
        assert!(MlpParams::<f64>::zeros(0, 8, 1).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = MlpParams::<f64>::init(4, 16, 2, &mut rng).unwrap();
        let (_, cache) = p.forward(&[0.3, -0.1, 0.7, 1.0]).unwrap();
        let (g, dx) = p.backward(&cache, &Matrix::zeros(1, 2)).unwrap();
        assert!(g.is_zero());
        assert!(dx.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_chain_rule() {
        let mut p = MlpParams::<f64>::zeros(1, 1, 1).unwrap();
        p.layers[0].w[0] = 2.0;
        p.layers[1].w[0] = 1.0;
        p.layers[2].w[0] = 1.0;
        let (out, cache) = p.forward(&[3.0]).unwrap();
        assert_eq!(out, vec![6.0]);
        let (g, dx) = p.backward(&cache, &Matrix::row_vector(&[1.0])).unwrap();
        assert_eq!(g.layers[0].w[0], 3.0);
        assert_eq!(dx.as_slice(), &[2.0]);
    }

    #[test]
    fn backward_rejects_mismatched_upstream() {
        let p = MlpParams::<f64>::zeros(2, 4, 3).unwrap();
        let (_, cache) = p.forward(&[1.0, 1.0]).unwrap();
        assert!(p.backward(&cache, &Matrix::zeros(1, 2)).is_err());
        assert!(p.backward(&cache, &Matrix::zeros(2, 3)).is_err());
    }

    fn scalar_params(v: f64) -> MlpParams<f64> {
        let mut p = MlpParams::<f64>::zeros(1, 1, 1).unwrap();
        p.layers[0].w[0] = v;
        p
    }

    fn scalar_grads(p: &MlpParams<f64>, g: f64) -> MlpGrads<f64> {
        let mut grads = MlpGrads::zeros_like(p);
        grads.layers[0].w[0] = g;
        grads
    }

    #[test]
    fn adam_zero_gradient_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut p = MlpParams::<f64>::init(3, 8, 2, &mut rng).unwrap();
        let before = p.clone();
        let mut opt = AdamState::new(&p, 0.01);
        let zero = MlpGrads::zeros_like(&p);
        opt.step(&mut p, &zero).unwrap();
        assert_eq!(opt.t, 1);
        assert_eq!(p, before);
        for _ in 0..20 {
            opt.step(&mut p, &zero).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn adam_first_step_hand_evaluated() {
        let mut p = scalar_params(0.0);
        let mut opt = AdamState::new(&p, 0.01);
        let g = scalar_grads(&p, 1.0);
        opt.step(&mut p, &g).unwrap();
        // m_hat = v_hat = 1 after bias correction
        let want = -0.01 / (1.0 + 1e-8);
        assert!((p.layers[0].w[0] - want).abs() < 1e-15);
        let first = p.layers[0].w[0];
        let g = scalar_grads(&p, 1.0);
        opt.step(&mut p, &g).unwrap();
        assert!(p.layers[0].w[0] < first && first < 0.0);
    }

    #[test]
    fn adam_rejects_non_finite_without_mutating() {
        let mut p = scalar_params(0.5);
        let mut opt = AdamState::new(&p, 0.01);
        let g = scalar_grads(&p, f64::NAN);
        let err = opt.step(&mut p, &g).unwrap_err();
        assert!(matches!(err, crate::Error::NonFinite(_)));
        assert_eq!(opt.t, 0);
        assert_eq!(p.layers[0].w[0], 0.5);
    }

    #[test]
    fn soft_update_endpoints_and_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let online = MlpParams::<f64>::init(3, 8, 2, &mut rng).unwrap();
        let target = MlpParams::<f64>::init(3, 8, 2, &mut rng).unwrap();

        let mut t = target.clone();
        soft_update(&mut t, &online, 1.0).unwrap();
        assert_eq!(t, online);

        let mut t = target.clone();
        soft_update(&mut t, &online, 0.0).unwrap();
        assert_eq!(t, target);

        let mut t = scalar_params(0.0);
        soft_update(&mut t, &scalar_params(1.0), 0.01).unwrap();
        assert!((t.layers[0].w[0] - 0.01).abs() < 1e-15);

        let mut t = target.clone();
        assert!(soft_update(&mut t, &online, 1.5).is_err());
        assert!(soft_update(&mut t, &online, -0.1).is_err());
        assert!(soft_update(&mut t, &online, f64::NAN).is_err());
    }

    #[test]
    fn squashed_zero_noise_center() {
        let ls = [-0.5, 0.3];
        let s = squashed_gaussian_sample(&[0.0, 0.0], &ls, &[0.0, 0.0]).unwrap();
        assert_eq!(s.action, vec![0.0, 0.0]);
        let half_log_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
        let want: f64 = ls.iter().map(|l| -l - half_log_2pi).sum::<f64>() - 2.0 * (1.0f64 + 1e-6).ln();
        assert!((s.log_prob - want).abs() < 1e-12);
    }

    #[test]
    fn squashed_saturates() {
        let s = squashed_gaussian_sample::<f64>(&[20.0], &[-20.0], &[0.0]).unwrap();
        assert!((s.action[0] - 1.0).abs() < 1e-8);
        assert!(s.log_prob.is_finite());
    }

    #[test]
    fn squashed_rejects_non_finite() {
        assert!(squashed_gaussian_sample(&[f64::NAN], &[0.0], &[0.0]).is_err());
        assert!(squashed_gaussian_sample(&[0.0], &[0.0], &[f64::INFINITY]).is_err());
        assert!(squashed_gaussian_sample(&[0.0, 1.0], &[0.0], &[0.0]).is_err());
    }

    #[test]
    fn squashed_clamps_log_std() {
        let hi = squashed_gaussian_sample(&[0.1], &[50.0], &[0.3]).unwrap();
        let at = squashed_gaussian_sample(&[0.1], &[LOG_STD_MAX], &[0.3]).unwrap();
        assert_eq!(hi, at);
        let g = squashed_gaussian_backward(&[0.1], &[50.0], &[0.3], &[1.0], 1.0).unwrap();
        assert_eq!(g.d_log_std, vec![0.0]);
    }

    #[test]
    fn snapshot_rejects_garbage_and_wrong_width() {
        let p = MlpParams::<f64>::zeros(2, 3, 1).unwrap();
        let bytes = p.to_bytes();
        assert!(MlpParams::<f32>::from_bytes(&bytes).is_err());
        assert!(MlpParams::<f64>::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(MlpParams::<f64>::from_bytes(b"nope").is_err());
    }

    #[test]
    fn single_precision_builds_and_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = MlpParams::<f32>::init(4, 64, 2, &mut rng).unwrap();
        let (out, cache) = p.forward(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(out.len(), 2);
        let (g, _) = p.backward(&cache, &Matrix::row_vector(&[1.0, 0.0])).unwrap();
        assert!(g.is_finite());
    }
}
