//! Tanh-squashed diagonal Gaussian policy head.

use crate::error::{check_len, Error, Result};
use crate::scalar::Scalar;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Added inside the tanh Jacobian log to keep it finite at saturation.
pub const TANH_EPS: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct SquashedSample<S> {
    pub action: Vec<S>,
    pub log_prob: S,
}

/// Partial derivatives of a loss with respect to the head inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct SquashedGrads<S> {
    pub d_mean: Vec<S>,
    pub d_log_std: Vec<S>,
}

fn clamp_log_std<S: Scalar>(x: S) -> S {
    x.max(S::lit(LOG_STD_MIN)).min(S::lit(LOG_STD_MAX))
}

fn check_inputs<S: Scalar>(mean: &[S], log_std: &[S], noise: &[S]) -> Result<()> {
    check_len("log_std length", mean.len(), log_std.len())?;
    check_len("noise length", mean.len(), noise.len())?;
    let finite = mean
        .iter()
        .chain(log_std)
        .chain(noise)
        .all(|x| x.is_finite());
    if !finite {
        return Err(Error::NonFinite("squashed gaussian input".into()));
    }
    Ok(())
}

/// `action = tanh(mean + exp(log_std) * noise)` and its log-density.
///
/// `noise` must be standard normal; the caller owns the randomness so the
/// function is deterministic.
pub fn squashed_gaussian_sample<S: Scalar>(
    mean: &[S],
    log_std: &[S],
    noise: &[S],
) -> Result<SquashedSample<S>> {
    check_inputs(mean, log_std, noise)?;
    let half_log_2pi = S::lit(0.5 * (2.0 * std::f64::consts::PI).ln());
    let half = S::lit(0.5);
    let mut action = Vec::with_capacity(mean.len());
    let mut log_prob = S::zero();
    for ((&mu, &ls), &eps) in mean.iter().zip(log_std).zip(noise) {
        let ls = clamp_log_std(ls);
        let a = (mu + ls.exp() * eps).tanh();
        log_prob += -half * eps * eps - ls - half_log_2pi;
        log_prob -= (S::one() - a * a + S::lit(TANH_EPS)).ln();
        action.push(a);
    }
    Ok(SquashedSample { action, log_prob })
}

/// Backpropagates `d_action . action + d_log_prob * log_prob` through the
/// reparameterized sample. `noise` is held fixed. `log_std` entries outside
/// the clamp range receive zero gradient.
pub fn squashed_gaussian_backward<S: Scalar>(
    mean: &[S],
    log_std: &[S],
    noise: &[S],
    d_action: &[S],
    d_log_prob: S,
) -> Result<SquashedGrads<S>> {
    check_inputs(mean, log_std, noise)?;
    check_len("d_action length", mean.len(), d_action.len())?;
    let two = S::lit(2.0);
    let mut d_mean = Vec::with_capacity(mean.len());
    let mut d_log_std = Vec::with_capacity(mean.len());
    for (((&mu, &raw_ls), &eps), &da) in mean.iter().zip(log_std).zip(noise).zip(d_action) {
        let ls = clamp_log_std(raw_ls);
        let sigma = ls.exp();
        let a = (mu + sigma * eps).tanh();
        let one_minus_a2 = S::one() - a * a;
        // d log_prob / d u through the Jacobian correction term
        let dlp_du = two * a * one_minus_a2 / (one_minus_a2 + S::lit(TANH_EPS));
        let du = da * one_minus_a2 + d_log_prob * dlp_du;
        d_mean.push(du);
        let in_range = raw_ls >= S::lit(LOG_STD_MIN) && raw_ls <= S::lit(LOG_STD_MAX);
        d_log_std.push(if in_range {
            du * sigma * eps - d_log_prob
        } else {
            S::zero()
        });
    }
    Ok(SquashedGrads { d_mean, d_log_std })
}
