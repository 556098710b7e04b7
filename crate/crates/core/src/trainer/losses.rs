//! Training losses with analytic gradients.
//!
//! Every function returns the scalar loss averaged over the batch together
//! with its gradient with respect to the live parameters. Quantities that are
//! treated as constants (bootstrapped targets, detached Q values) are read
//! from explicitly passed parameter snapshots.

use crate::error::{Error, Result};
use crate::evaluator::{soft_value, Forward, HeadGrad, Mlp};

#[derive(Clone, Debug)]
pub struct SupervisedItem {
    pub x: Vec<f64>,
    pub mask: Vec<bool>,
    pub action: usize,
    pub value_target: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SupervisedReport {
    pub loss: f64,
    pub ce: f64,
    pub value: f64,
    pub accuracy: f64,
}

/// Mean of `-ln pi(a) + c_v (V - R)^2`.
pub fn supervised_loss(
    mlp: &Mlp,
    params: &[f64],
    items: &[SupervisedItem],
    value_coef: f64,
) -> Result<(SupervisedReport, Vec<f64>)> {
    let mut grad = vec![0.0; params.len()];
    let mut rep = SupervisedReport::default();
    let b = items.len().max(1) as f64;
    let mut hits = 0usize;
    for it in items {
        let f = mlp.forward(params, &it.x, &it.mask, false)?;
        check_action(&f, it.action)?;
        rep.ce -= f.log_policy[it.action] / b;
        let err = f.value - it.value_target;
        rep.value += err * err / b;
        if argmax(&f.policy) == it.action {
            hits += 1;
        }
        let g = HeadGrad {
            logits: ce_logit_grad(&f, &one_hot(f.policy.len(), it.action), 1.0 / b),
            value: 2.0 * value_coef * err / b,
            ..HeadGrad::default()
        };
        mlp.backward(params, &f, &g, &mut grad);
    }
    rep.accuracy = hits as f64 / b;
    rep.loss = rep.ce + value_coef * rep.value;
    finite(rep.loss)?;
    Ok((rep, grad))
}

#[derive(Clone, Debug)]
pub struct PpoItem {
    pub x: Vec<f64>,
    pub mask: Vec<bool>,
    pub action: usize,
    pub log_prob_old: f64,
    pub advantage: f64,
    pub ret: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PpoCoeffs {
    pub eps: f64,
    pub c_v: f64,
    pub c_e: f64,
}

/// Where the ratio denominator comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RatioBaseline {
    /// The recorded `log_prob_old`, held constant.
    Recorded,
    /// A denominator that equals the current policy and moves with it.
    Tracking,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PpoReport {
    pub loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub ratios: Vec<f64>,
}

/// `-E[min(r A, clip(r, 1-eps, 1+eps) A)] + c_v E[(V - R)^2] - c_e E[H]`.
pub fn ppo_loss(
    mlp: &Mlp,
    params: &[f64],
    items: &[PpoItem],
    k: PpoCoeffs,
    baseline: RatioBaseline,
) -> Result<(PpoReport, Vec<f64>)> {
    let mut grad = vec![0.0; params.len()];
    let mut rep = PpoReport::default();
    let b = items.len().max(1) as f64;
    for it in items {
        let f = mlp.forward(params, &it.x, &it.mask, false)?;
        check_action(&f, it.action)?;
        let logp = f.log_policy[it.action];
        let old = match baseline {
            RatioBaseline::Recorded => it.log_prob_old,
            RatioBaseline::Tracking => logp,
        };
        let r = (logp - old).exp();
        if !r.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite ratio for action {}",
                it.action
            )));
        }
        rep.ratios.push(r);
        let a = it.advantage;
        let clipped = r.clamp(1.0 - k.eps, 1.0 + k.eps);
        let unclipped_active = r * a <= clipped * a;
        rep.policy_loss -= (r * a).min(clipped * a) / b;
        if (r - 1.0).abs() > k.eps {
            rep.clip_fraction += 1.0 / b;
        }
        let h = f.entropy();
        rep.entropy += h / b;
        let err = f.value - it.ret;
        rep.value_loss += err * err / b;

        let mut gl = vec![0.0; f.policy.len()];
        if unclipped_active && baseline == RatioBaseline::Recorded {
            for j in 0..gl.len() {
                if f.mask[j] {
                    let delta = if j == it.action { 1.0 } else { 0.0 };
                    gl[j] -= a * r * (delta - f.policy[j]) / b;
                }
            }
        }
        add_scaled(&mut gl, &entropy_logit_grad(&f), -k.c_e / b);
        let g = HeadGrad {
            logits: gl,
            value: 2.0 * k.c_v * err / b,
            ..HeadGrad::default()
        };
        mlp.backward(params, &f, &g, &mut grad);
    }
    rep.loss = rep.policy_loss + k.c_v * rep.value_loss - k.c_e * rep.entropy;
    finite(rep.loss)?;
    Ok((rep, grad))
}

#[derive(Clone, Debug)]
pub struct SacItem {
    pub x: Vec<f64>,
    pub mask: Vec<bool>,
    pub action: usize,
    pub reward: f64,
    pub done: bool,
    pub next_x: Vec<f64>,
    pub next_mask: Vec<bool>,
    /// Normalized visit distribution when search ran at this step.
    pub mcts: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SacCoeffs {
    pub alpha: f64,
    pub gamma: f64,
    pub lambda_mcts: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SacReport {
    pub loss: f64,
    pub q_loss: f64,
    pub policy_loss: f64,
    pub ce_loss: f64,
    pub entropy: f64,
    pub targets: Vec<f64>,
}

/// `y = r + gamma (1 - d) V(s')` with `V(s') = sum_a pi(a|s') (min_i Qbar_i(s', a) - alpha ln pi(a|s'))`.
/// The policy at `s'` comes from `policy_params`, the Q values from `target_params`.
pub fn sac_targets(
    mlp: &Mlp,
    policy_params: &[f64],
    target_params: &[f64],
    items: &[SacItem],
    k: SacCoeffs,
) -> Result<Vec<f64>> {
    items
        .iter()
        .map(|it| {
            if it.done {
                return Ok(it.reward);
            }
            if !it.next_mask.iter().any(|m| *m) {
                return Err(Error::Data(
                    "non-terminal transition without valid successor actions".into(),
                ));
            }
            let pf = mlp.forward(policy_params, &it.next_x, &it.next_mask, false)?;
            let mut tf = mlp.forward(target_params, &it.next_x, &it.next_mask, true)?;
            tf.policy = pf.policy;
            tf.log_policy = pf.log_policy;
            Ok(it.reward + k.gamma * soft_value(&tf, k.alpha))
        })
        .collect()
}

/// `L_Q + L_pi + lambda_mcts L_CE` of the discrete soft actor-critic.
///
/// `frozen` supplies the detached Q values in `L_pi` and the successor
/// policy in the targets; `target` supplies the target Q heads.
pub fn sac_loss(
    mlp: &Mlp,
    params: &[f64],
    frozen: &[f64],
    target: &[f64],
    items: &[SacItem],
    k: SacCoeffs,
) -> Result<(SacReport, Vec<f64>)> {
    let ys = sac_targets(mlp, frozen, target, items, k)?;
    let mut grad = vec![0.0; params.len()];
    let mut rep = SacReport::default();
    let b = items.len().max(1) as f64;
    for (it, &y) in items.iter().zip(&ys) {
        let f = mlp.forward(params, &it.x, &it.mask, true)?;
        check_action(&f, it.action)?;
        let fr_own;
        let fr = if std::ptr::eq(frozen, params) {
            &f
        } else {
            fr_own = mlp.forward(frozen, &it.x, &it.mask, true)?;
            &fr_own
        };
        let a = it.action;
        let n = f.policy.len();

        let (e1, e2) = (f.q1[a] - y, f.q2[a] - y);
        rep.q_loss += (e1 * e1 + e2 * e2) / b;
        let mut gq1 = vec![0.0; n];
        let mut gq2 = vec![0.0; n];
        gq1[a] = 2.0 * e1 / b;
        gq2[a] = 2.0 * e2 / b;

        // g_a = alpha ln pi(a) - min_i Q_i(a), Q detached
        let g: Vec<f64> = (0..n)
            .map(|j| {
                if f.mask[j] {
                    k.alpha * f.log_policy[j] - fr.q1[j].min(fr.q2[j])
                } else {
                    0.0
                }
            })
            .collect();
        let pg: f64 = (0..n).map(|j| f.policy[j] * g[j]).sum();
        rep.policy_loss += pg / b;
        let mut gl: Vec<f64> = (0..n)
            .map(|j| {
                if f.mask[j] {
                    f.policy[j] * (g[j] - pg) / b
                } else {
                    0.0
                }
            })
            .collect();

        if let Some(t) = &it.mcts {
            if t.len() != n {
                return Err(Error::Data("visit distribution has wrong length".into()));
            }
            let ce: f64 = (0..n)
                .filter(|&j| f.mask[j] && t[j] > 0.0)
                .map(|j| -t[j] * f.log_policy[j])
                .sum();
            rep.ce_loss += ce / b;
            add_scaled(&mut gl, &ce_logit_grad(&f, t, 1.0), k.lambda_mcts / b);
        }
        rep.entropy += f.entropy() / b;
        let hg = HeadGrad {
            logits: gl,
            value: 0.0,
            q1: gq1,
            q2: gq2,
        };
        mlp.backward(params, &f, &hg, &mut grad);
    }
    rep.loss = rep.q_loss + rep.policy_loss + k.lambda_mcts * rep.ce_loss;
    rep.targets = ys;
    finite(rep.loss)?;
    Ok((rep, grad))
}

/// `d(-sum_a t_a ln pi_a)/dz = pi * sum(t) - t`, scaled, zero on masked entries.
fn ce_logit_grad(f: &Forward, t: &[f64], scale: f64) -> Vec<f64> {
    let total: f64 = t
        .iter()
        .zip(&f.mask)
        .filter(|(_, m)| **m)
        .map(|(v, _)| v)
        .sum();
    (0..f.policy.len())
        .map(|j| {
            if f.mask[j] {
                scale * (f.policy[j] * total - t[j])
            } else {
                0.0
            }
        })
        .collect()
}

/// `dH/dz_j = pi_j (-ln pi_j - H)`.
fn entropy_logit_grad(f: &Forward) -> Vec<f64> {
    let h = f.entropy();
    (0..f.policy.len())
        .map(|j| {
            if f.mask[j] {
                f.policy[j] * (-f.log_policy[j] - h)
            } else {
                0.0
            }
        })
        .collect()
}

fn add_scaled(dst: &mut [f64], src: &[f64], s: f64) {
    for (d, v) in dst.iter_mut().zip(src) {
        *d += s * v;
    }
}

fn one_hot(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

fn check_action(f: &Forward, a: usize) -> Result<()> {
    if a >= f.mask.len() || !f.mask[a] {
        return Err(Error::Data(format!("recorded action {a} is masked")));
    }
    Ok(())
}

fn finite(loss: f64) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric(format!("non-finite loss {loss}")))
    }
}

/// Largest relative error between `analytic[i]` and a central difference of
/// `loss` over the given parameter indices, with denominator
/// `max(|analytic|, |numeric|, 1e-5)`.
pub fn finite_difference_check(
    loss: impl Fn(&[f64]) -> Result<f64>,
    params: &[f64],
    analytic: &[f64],
    indices: &[usize],
    step: f64,
) -> Result<f64> {
    let mut p = params.to_vec();
    let mut worst = 0.0f64;
    for &i in indices {
        let orig = p[i];
        p[i] = orig + step;
        let up = loss(&p)?;
        p[i] = orig - step;
        let down = loss(&p)?;
        p[i] = orig;
        let numeric = (up - down) / (2.0 * step);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-5);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    Ok(worst)
}
