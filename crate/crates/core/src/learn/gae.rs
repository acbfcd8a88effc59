//! Generalized advantage estimation.

/// Backward recursion `A_t = δ_t + γλ(1 − done_t) A_{t+1}` with
/// `δ_t = r_t + γ(1 − done_t) V_{t+1} − V_t` and `V_T = bootstrap`.
/// Returns `(advantages, returns)` with `returns = advantages + values`.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    assert!(rewards.len() == values.len() && values.len() == dones.len());
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_value = bootstrap;
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * live * next_value - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, ret)
}

/// Shifts and scales `xs` in place to zero mean and unit (population) std.
pub fn normalize(xs: &mut [f64]) {
    if xs.is_empty() {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-12);
    for x in xs.iter_mut() {
        *x = (*x - mean) / std;
    }
    // second pass removes the rounding residue of the first
    let mean2 = xs.iter().sum::<f64>() / n;
    for x in xs.iter_mut() {
        *x -= mean2;
    }
}
