//! Generalised advantage estimation.

/// Advantages and value targets for one trajectory.
///
/// `next_values[t]` is the value of the state reached by step `t` (zero when
/// the episode terminated there); `dones[t]` cuts the recursion at episode
/// boundaries, including truncations.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    next_values: &[f64],
    dones: &[bool],
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let delta = rewards[t] + gamma * next_values[t] - values[t];
        let carry = if dones[t] { 0.0 } else { running };
        running = delta + gamma * lambda * carry;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Shift and scale to zero mean and unit variance (no-op for fewer than two samples).
pub fn normalize(adv: &mut [f64]) {
    let n = adv.len();
    if n < 2 {
        return;
    }
    let mean = adv.iter().sum::<f64>() / n as f64;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64;
    let scale = 1.0 / (var.sqrt() + 1e-8);
    for a in adv.iter_mut() {
        *a = (*a - mean) * scale;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_reward_unrolls() {
        let (adv, ret) = gae(&[1.0; 3], &[0.0; 3], &[0.0; 3], &[false; 3], 1.0, 1.0);
        assert_eq!(adv, vec![3.0, 2.0, 1.0]);
        assert_eq!(ret, adv);
    }

    #[test]
    fn done_cuts_recursion() {
        let (adv, _) = gae(&[1.0; 3], &[0.0; 3], &[0.0; 3], &[false, true, false], 1.0, 1.0);
        assert_eq!(adv, vec![2.0, 1.0, 1.0]);
    }

    #[test]
    fn normalized_has_zero_mean_unit_variance() {
        let mut a = vec![1.0, 2.0, 3.0, 10.0];
        normalize(&mut a);
        let mean: f64 = a.iter().sum::<f64>() / 4.0;
        let var: f64 = a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-6);
    }
}
