use crate::error::{config_err, Result};

/// Generalized advantage estimates and value targets for one episode.
///
/// `values[t]` is `V(s_t)`; `bootstrap` is `V(s_T)` after the last step and
/// must be zero when the episode terminated.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(0.0..=1.0).contains(&gamma) || !(0.0..=1.0).contains(&lambda) {
        return config_err(format!("gamma {gamma} / lambda {lambda} outside [0, 1]"));
    }
    if rewards.len() != values.len() {
        return config_err(format!(
            "{} rewards but {} values",
            rewards.len(),
            values.len()
        ));
    }
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_value = bootstrap;
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let delta = rewards[t] + gamma * next_value - values[t];
        acc = delta + gamma * lambda * acc;
        adv[t] = acc;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Zero-mean, unit-variance rescaling; constant inputs map to zeros.
pub fn normalize(xs: &mut [f64]) {
    if xs.is_empty() {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt() + 1e-8;
    for x in xs {
        *x = (*x - mean) / std;
    }
}
