//! PPO with generalised advantage estimation.
//!
//! The update path is exact rather than autodiff'd: the clipped surrogate,
//! value loss, and entropy bonus all have hand-derived gradients with
//! respect to the network heads, which [`crate::policy::grad_batch`] then
//! backpropagates through the trunk. Batches are flat transition arrays;
//! episode boundaries are carried by the `dones` mask and respected by the
//! advantage recursion.

use crate::optim::{Optimizer, OptimizerKind};
use crate::policy::{grad_batch, log_softmax, PolicyError, PolicyParams};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub lr: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub optimizer: OptimizerKind,
    pub normalize_advantages: bool,
}

impl Default for PpoConfig {
    fn default() -> PpoConfig {
        PpoConfig {
            gamma: 0.995,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            epochs: 5,
            minibatches: 1,
            lr: 1e-4,
            value_coef: 0.5,
            entropy_coef: 0.01,
            max_grad_norm: 0.5,
            optimizer: OptimizerKind::Adam,
            normalize_advantages: true,
        }
    }
}

/// Flat batch of transitions, possibly spanning several episodes.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Trajectory {
    /// Network inputs (already frame-stacked and encoded).
    pub inputs: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    /// Behaviour-policy log-probabilities recorded at collection time.
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    /// V(s_t) under the collecting policy.
    pub values: Vec<f64>,
    /// Value of the state after the final transition, for truncated tails.
    /// Ignored whenever the last transition is terminal.
    pub bootstrap_value: f64,
    /// Optional per-step successor values V(s_{t+1}); when present these
    /// replace the shifted `values` in the TD residuals. Used when the
    /// successor state the learner should credit differs from the one the
    /// behaviour stream visited (fictitious transitions).
    pub next_values: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Append another trajectory. The absorbed trajectory must end in a
    /// terminal transition, otherwise its bootstrap value would be lost.
    pub fn extend(&mut self, other: Trajectory) {
        assert!(
            other.is_empty() || *other.dones.last().unwrap(),
            "cannot concatenate a truncated trajectory mid-batch"
        );
        match (&mut self.next_values, other.next_values) {
            (Some(a), Some(b)) => a.extend(b),
            (None, None) => {}
            (a @ None, Some(b)) => {
                // Promote: synthesise the shifted-values view for the prefix.
                let mut nv = shifted_next_values(&self.values, self.bootstrap_value);
                nv.extend(b);
                *a = Some(nv);
            }
            (Some(a), None) => {
                a.extend(shifted_next_values(&other.values, other.bootstrap_value));
            }
        }
        self.inputs.extend(other.inputs);
        self.actions.extend(other.actions);
        self.log_probs.extend(other.log_probs);
        self.rewards.extend(other.rewards);
        self.dones.extend(other.dones);
        self.values.extend(other.values);
        self.bootstrap_value = other.bootstrap_value;
    }

    pub fn episode_count(&self) -> usize {
        self.dones.iter().filter(|&&d| d).count()
    }

    /// Undiscounted per-episode returns (truncated tail counts as one episode).
    pub fn episode_returns(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut acc = 0.0;
        for t in 0..self.len() {
            acc += self.rewards[t];
            if self.dones[t] {
                out.push(acc);
                acc = 0.0;
            }
        }
        if self.len() > 0 && !self.dones[self.len() - 1] {
            out.push(acc);
        }
        out
    }
}

fn shifted_next_values(values: &[f64], bootstrap: f64) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|t| if t + 1 < n { values[t + 1] } else { bootstrap })
        .collect()
}

#[derive(Debug, Clone)]
pub struct GaeResult {
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    /// One-step TD residuals, kept because several level scores consume them.
    pub deltas: Vec<f64>,
}

/// Backward GAE recursion with episode resets:
/// delta_t = r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t)
/// A_t     = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}
pub fn compute_gae(traj: &Trajectory, gamma: f64, lambda: f64) -> GaeResult {
    let n = traj.len();
    let mut advantages = vec![0.0; n];
    let mut deltas = vec![0.0; n];
    let mut carry = 0.0;
    for t in (0..n).rev() {
        let not_done = if traj.dones[t] { 0.0 } else { 1.0 };
        let next_v = match &traj.next_values {
            Some(nv) => nv[t],
            None => {
                if t + 1 < n {
                    traj.values[t + 1]
                } else {
                    traj.bootstrap_value
                }
            }
        };
        let delta = traj.rewards[t] + gamma * next_v * not_done - traj.values[t];
        deltas[t] = delta;
        carry = delta + gamma * lambda * not_done * carry;
        advantages[t] = carry;
    }
    let returns = advantages
        .iter()
        .zip(&traj.values)
        .map(|(a, v)| a + v)
        .collect();
    GaeResult { advantages, returns, deltas }
}

/// Standardise advantages to zero mean / unit variance, with a floor on the
/// standard deviation so constant batches degrade to zeros rather than NaN.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    for a in adv.iter_mut() {
        *a = (*a - mean) / std;
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct PpoStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub total_loss: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    /// Pre-clip global gradient norm, averaged over optimiser steps.
    pub grad_norm: f64,
    pub optimizer_steps: usize,
}

/// Run the full PPO update (epochs x minibatches) on one batch in place.
/// An empty trajectory is a no-op that returns zeroed stats.
pub fn ppo_update(
    params: &mut PolicyParams,
    opt: &mut Optimizer,
    traj: &Trajectory,
    cfg: &PpoConfig,
    rng: &mut ChaCha8Rng,
) -> Result<PpoStats, PolicyError> {
    if traj.is_empty() {
        return Ok(PpoStats::default());
    }
    let gae = compute_gae(traj, cfg.gamma, cfg.gae_lambda);
    let mut advantages = gae.advantages;
    if cfg.normalize_advantages {
        normalize_advantages(&mut advantages);
    }
    let returns = gae.returns;

    let n = traj.len();
    let mut stats = PpoStats::default();
    let mut order: Vec<usize> = (0..n).collect();
    let chunks = cfg.minibatches.max(1).min(n);

    for _ in 0..cfg.epochs {
        if chunks > 1 {
            order.shuffle(rng);
        }
        for mb in 0..chunks {
            // Contiguous slices of the (possibly shuffled) index order.
            let lo = mb * n / chunks;
            let hi = (mb + 1) * n / chunks;
            let idx = &order[lo..hi];
            if idx.is_empty() {
                continue;
            }
            let inputs: Vec<Vec<f64>> = idx.iter().map(|&i| traj.inputs[i].clone()).collect();
            let b = idx.len() as f64;

            let mut mb_stats = (0.0, 0.0, 0.0, 0.0, 0.0); // pl, vl, ent, clip, kl
            let (total, grad) = grad_batch(params, &inputs, |logits, values| {
                let mut loss = 0.0;
                let mut d_logits = Vec::with_capacity(idx.len());
                let mut d_values = Vec::with_capacity(idx.len());
                for (s, &i) in idx.iter().enumerate() {
                    let lp = log_softmax(&logits[s]);
                    let probs: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
                    let a = traj.actions[i];
                    let adv = advantages[i];
                    let ratio = (lp[a] - traj.log_probs[i]).exp();
                    let clipped = ratio.clamp(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
                    let surr1 = ratio * adv;
                    let surr2 = clipped * adv;
                    let policy_term = -surr1.min(surr2);

                    let entropy = -probs
                        .iter()
                        .zip(&lp)
                        .filter(|(p, _)| **p > 0.0)
                        .map(|(p, l)| p * l)
                        .sum::<f64>();
                    let verr = values[s] - returns[i];
                    let value_term = 0.5 * verr * verr;

                    loss += (policy_term + cfg.value_coef * value_term
                        - cfg.entropy_coef * entropy)
                        / b;

                    // d(policy_term)/d logit_j. The min routes the gradient
                    // through the unclipped branch whenever it is active (or
                    // tied, where the two branches agree in the interior).
                    let mut row = vec![0.0; probs.len()];
                    if surr1 <= surr2 {
                        let coef = -adv * ratio;
                        for j in 0..probs.len() {
                            let ind = if j == a { 1.0 } else { 0.0 };
                            row[j] += coef * (ind - probs[j]);
                        }
                    }
                    // Entropy bonus: d(-c_H * H)/d logit_j = c_H * p_j (log p_j + H).
                    for j in 0..probs.len() {
                        row[j] += cfg.entropy_coef * probs[j] * (lp[j] + entropy);
                    }
                    row.iter_mut().for_each(|g| *g /= b);
                    d_logits.push(row);
                    d_values.push(cfg.value_coef * verr / b);

                    mb_stats.0 += policy_term / b;
                    mb_stats.1 += value_term / b;
                    mb_stats.2 += entropy / b;
                    if (ratio - 1.0).abs() > cfg.clip_eps {
                        mb_stats.3 += 1.0 / b;
                    }
                    mb_stats.4 += (traj.log_probs[i] - lp[a]) / b;
                }
                (loss, d_logits, d_values)
            })?;

            let norm = opt.step(&mut params.theta, &grad);
            stats.policy_loss += mb_stats.0;
            stats.value_loss += mb_stats.1;
            stats.entropy += mb_stats.2;
            stats.clip_fraction += mb_stats.3;
            stats.approx_kl += mb_stats.4;
            stats.total_loss += total;
            stats.grad_norm += norm;
            stats.optimizer_steps += 1;
        }
    }
    let k = stats.optimizer_steps.max(1) as f64;
    stats.policy_loss /= k;
    stats.value_loss /= k;
    stats.entropy /= k;
    stats.clip_fraction /= k;
    stats.approx_kl /= k;
    stats.total_loss /= k;
    stats.grad_norm /= k;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{forward, softmax, Arch};
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn traj(rewards: Vec<f64>, values: Vec<f64>, dones: Vec<bool>, bootstrap: f64) -> Trajectory {
        let n = rewards.len();
        Trajectory {
            inputs: vec![vec![0.0]; n],
            actions: vec![0; n],
            log_probs: vec![0.0; n],
            rewards,
            dones,
            values,
            bootstrap_value: bootstrap,
            next_values: None,
        }
    }

    #[test]
    fn lambda_one_recovers_discounted_monte_carlo() {
        let t = traj(
            vec![1.0, 0.0, 2.0],
            vec![0.5, 0.5, 0.5],
            vec![false, false, true],
            0.0,
        );
        let g = compute_gae(&t, 0.9, 1.0);
        // G2 = 2, G1 = 0.9*2, G0 = 1 + 0.9*1.8
        let expect = [2.62, 1.8, 2.0];
        for (i, e) in expect.iter().enumerate() {
            assert!((g.returns[i] - e).abs() < 1e-12, "return {i}");
            assert!((g.advantages[i] - (e - 0.5)).abs() < 1e-12, "advantage {i}");
        }
    }

    #[test]
    fn lambda_zero_is_one_step_td() {
        let t = traj(
            vec![0.3, -0.1, 1.0],
            vec![0.2, 0.4, 0.6],
            vec![false, false, false],
            0.9,
        );
        let g = compute_gae(&t, 0.99, 0.0);
        let expect = [
            0.3 + 0.99 * 0.4 - 0.2,
            -0.1 + 0.99 * 0.6 - 0.4,
            1.0 + 0.99 * 0.9 - 0.6,
        ];
        for (i, e) in expect.iter().enumerate() {
            assert!((g.advantages[i] - e).abs() < 1e-12);
            assert!((g.deltas[i] - e).abs() < 1e-12);
        }
    }

    #[test]
    fn two_step_worked_example() {
        // TD residuals [1.0, -0.5] with gamma = lambda = 1 give advantages
        // [0.5, -0.5]: the fixture several scoring tests build on.
        let t = traj(vec![0.0, 1.5], vec![1.0, 2.0], vec![false, true], 0.0);
        let g = compute_gae(&t, 1.0, 1.0);
        assert!((g.deltas[0] - 1.0).abs() < 1e-12);
        assert!((g.deltas[1] + 0.5).abs() < 1e-12);
        assert!((g.advantages[0] - 0.5).abs() < 1e-12);
        assert!((g.advantages[1] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn done_flags_isolate_episodes() {
        let a = traj(vec![1.0, 2.0], vec![0.1, 0.2], vec![false, true], 0.0);
        let b = traj(vec![-1.0, 0.5], vec![0.3, 0.4], vec![false, true], 0.0);
        let mut joined = a.clone();
        joined.extend(b.clone());
        let g_joined = compute_gae(&joined, 0.97, 0.9);
        let g_a = compute_gae(&a, 0.97, 0.9);
        let g_b = compute_gae(&b, 0.97, 0.9);
        let expect: Vec<f64> = g_a.advantages.iter().chain(&g_b.advantages).copied().collect();
        for (x, y) in g_joined.advantages.iter().zip(&expect) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn truncated_tail_uses_bootstrap_value() {
        let t = traj(vec![0.0], vec![0.0], vec![false], 10.0);
        let g = compute_gae(&t, 0.5, 0.95);
        assert!((g.advantages[0] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn per_step_next_values_override_the_shifted_view() {
        let mut t = traj(
            vec![1.0, 1.0],
            vec![0.0, 0.0],
            vec![false, false],
            0.7,
        );
        // Identical to the shifted view -> identical result.
        t.next_values = Some(vec![0.0, 0.7]);
        let g1 = compute_gae(&t, 0.9, 0.95);
        t.next_values = None;
        let g0 = compute_gae(&t, 0.9, 0.95);
        for (a, b) in g0.advantages.iter().zip(&g1.advantages) {
            assert!((a - b).abs() < 1e-12);
        }
        // A different successor value shifts the residual by gamma * dv.
        t.next_values = Some(vec![2.0, 0.7]);
        let g2 = compute_gae(&t, 0.9, 0.95);
        assert!((g2.deltas[0] - (1.0 + 0.9 * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn extend_promotes_next_values_consistently() {
        let a = traj(vec![1.0, 2.0], vec![0.1, 0.2], vec![false, true], 0.0);
        let mut b = traj(vec![-1.0], vec![0.3], vec![true], 0.0);
        b.next_values = Some(vec![0.9]);
        let mut joined = a.clone();
        joined.extend(b);
        let nv = joined.next_values.as_ref().unwrap();
        assert_eq!(nv.len(), 3);
        // Prefix got the shifted-values view: [values[1], bootstrap].
        assert!((nv[0] - 0.2).abs() < 1e-15);
        assert!((nv[1] - 0.0).abs() < 1e-15);
        assert!((nv[2] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn episode_returns_split_on_dones() {
        let t = traj(
            vec![1.0, 2.0, 5.0, 0.5],
            vec![0.0; 4],
            vec![false, true, true, false],
            0.0,
        );
        assert_eq!(t.episode_returns(), vec![3.0, 5.0, 0.5]);
        assert_eq!(t.episode_count(), 2);
    }

    #[test]
    fn normalization_handles_constant_batches() {
        let mut adv = vec![3.0, 3.0, 3.0];
        normalize_advantages(&mut adv);
        assert!(adv.iter().all(|a| a.is_finite() && a.abs() < 1e-6));
        let mut adv = vec![1.0, -1.0];
        normalize_advantages(&mut adv);
        assert!((adv[0] - 1.0).abs() < 1e-12 && (adv[1] + 1.0).abs() < 1e-12);
    }

    fn bandit_batch(params: &PolicyParams, n: usize) -> Trajectory {
        // One-state bandit: action 0 pays 1, action 1 pays 0. Half the batch
        // takes each action; log-probs recorded under the given params.
        let input = vec![1.0, 0.0, 0.5];
        let (logits, value) = forward(params, &input);
        let lp = log_softmax(&logits);
        let mut t = Trajectory::default();
        for i in 0..n {
            let a = i % 2;
            t.inputs.push(input.clone());
            t.actions.push(a);
            t.log_probs.push(lp[a]);
            t.rewards.push(if a == 0 { 1.0 } else { 0.0 });
            t.dones.push(true);
            t.values.push(value);
        }
        t
    }

    #[test]
    fn update_shifts_probability_toward_rewarded_action() {
        let mut params = PolicyParams::zeros(Arch::new(3, vec![8], 2));
        let cfg = PpoConfig { lr: 0.05, optimizer: OptimizerKind::Sgd, ..PpoConfig::default() };
        let mut opt = Optimizer::new(cfg.optimizer, cfg.lr, Some(cfg.max_grad_norm), params.theta.len());
        let mut r = rng(20);
        for _ in 0..20 {
            let batch = bandit_batch(&params, 16);
            ppo_update(&mut params, &mut opt, &batch, &cfg, &mut r).unwrap();
        }
        let (logits, _) = forward(&params, &[1.0, 0.0, 0.5]);
        let probs = softmax(&logits);
        assert!(probs[0] > 0.7, "p(rewarded action) = {} after training", probs[0]);
    }

    #[test]
    fn zero_learning_rate_is_bitwise_noop() {
        let mut params = PolicyParams::init(Arch::new(3, vec![6], 2), &mut rng(21));
        let before = params.theta.clone();
        let cfg = PpoConfig { lr: 0.0, ..PpoConfig::default() };
        let mut opt = Optimizer::new(cfg.optimizer, 0.0, Some(cfg.max_grad_norm), params.theta.len());
        let batch = bandit_batch(&params, 8);
        let stats = ppo_update(&mut params, &mut opt, &batch, &cfg, &mut rng(22)).unwrap();
        assert!(stats.total_loss.is_finite());
        for (a, b) in params.theta.iter().zip(&before) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn empty_batch_is_noop_with_zero_stats() {
        let mut params = PolicyParams::init(Arch::new(3, vec![4], 2), &mut rng(23));
        let before = params.theta.clone();
        let cfg = PpoConfig::default();
        let mut opt = Optimizer::new(cfg.optimizer, cfg.lr, Some(cfg.max_grad_norm), params.theta.len());
        let stats = ppo_update(&mut params, &mut opt, &Trajectory::default(), &cfg, &mut rng(24)).unwrap();
        assert_eq!(stats.optimizer_steps, 0);
        assert_eq!(params.theta, before);
    }

    #[test]
    fn first_epoch_has_unit_ratios() {
        // With one epoch the ratios never leave 1, so nothing clips and the
        // KL estimate is exactly zero.
        let mut params = PolicyParams::init(Arch::new(3, vec![6], 2), &mut rng(25));
        let batch = bandit_batch(&params, 8);
        let cfg = PpoConfig { epochs: 1, ..PpoConfig::default() };
        let mut opt = Optimizer::new(cfg.optimizer, cfg.lr, Some(cfg.max_grad_norm), params.theta.len());
        let stats = ppo_update(&mut params, &mut opt, &batch, &cfg, &mut rng(26)).unwrap();
        assert_eq!(stats.clip_fraction, 0.0);
        assert_eq!(stats.approx_kl, 0.0);
        assert_eq!(stats.optimizer_steps, 1);
    }

    #[test]
    fn clipped_sgd_update_has_exact_norm() {
        // Single SGD step on a batch whose gradient exceeds the cap: the
        // parameter displacement must have norm lr * max_grad_norm.
        let mut params = PolicyParams::init(Arch::new(3, vec![6], 2), &mut rng(27));
        let before = params.theta.clone();
        let mut batch = bandit_batch(&params, 8);
        for r in batch.rewards.iter_mut() {
            *r *= 1000.0; // inflate advantages so the raw gradient is large
        }
        let cfg = PpoConfig {
            epochs: 1,
            lr: 0.01,
            optimizer: OptimizerKind::Sgd,
            ..PpoConfig::default()
        };
        let mut opt = Optimizer::new(cfg.optimizer, cfg.lr, Some(cfg.max_grad_norm), params.theta.len());
        let stats = ppo_update(&mut params, &mut opt, &batch, &cfg, &mut rng(28)).unwrap();
        assert!(stats.grad_norm > cfg.max_grad_norm, "test needs a clipping-scale gradient");
        let delta: f64 = params
            .theta
            .iter()
            .zip(&before)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let expect = cfg.lr * cfg.max_grad_norm;
        assert!(
            (delta - expect).abs() < 1e-12 * expect.max(1.0),
            "|update| = {delta}, want {expect}"
        );
    }

    #[test]
    fn entropy_bonus_flattens_a_peaked_policy() {
        // Zero advantages and on-target values leave only the entropy term;
        // the logit gap must shrink.
        let arch = Arch::new(2, vec![], 2);
        let mut params = PolicyParams::zeros(arch);
        // Linear model: bias the first logit up via the policy head bias.
        let pr = params.arch.policy_head_range();
        params.theta[pr.end - 2] = 2.0; // policy bias for action 0
        let input = vec![0.0, 0.0];
        let (logits, value) = forward(&params, &input);
        let gap_before = logits[0] - logits[1];
        let lp = log_softmax(&logits);
        let batch = Trajectory {
            inputs: vec![input.clone(); 4],
            actions: vec![0, 1, 0, 1],
            log_probs: vec![lp[0], lp[1], lp[0], lp[1]],
            rewards: vec![value; 4],
            dones: vec![true; 4],
            values: vec![value; 4],
            bootstrap_value: 0.0,
            next_values: None,
        };
        let cfg = PpoConfig { lr: 0.1, optimizer: OptimizerKind::Sgd, epochs: 3, ..PpoConfig::default() };
        let mut opt = Optimizer::new(cfg.optimizer, cfg.lr, Some(cfg.max_grad_norm), params.theta.len());
        ppo_update(&mut params, &mut opt, &batch, &cfg, &mut rng(29)).unwrap();
        let (logits_after, _) = forward(&params, &input);
        let gap_after = logits_after[0] - logits_after[1];
        assert!(gap_after < gap_before, "{gap_after} !< {gap_before}");
        assert!(gap_after > 0.0, "entropy alone should not flip the ordering");
    }

    #[test]
    fn nan_rewards_surface_as_non_finite_loss() {
        let mut params = PolicyParams::init(Arch::new(3, vec![4], 2), &mut rng(30));
        let mut batch = bandit_batch(&params, 4);
        batch.rewards[2] = f64::NAN;
        let cfg = PpoConfig::default();
        let mut opt = Optimizer::new(cfg.optimizer, cfg.lr, Some(cfg.max_grad_norm), params.theta.len());
        let err = ppo_update(&mut params, &mut opt, &batch, &cfg, &mut rng(31)).unwrap_err();
        assert!(matches!(err, PolicyError::NonFiniteLoss(_)));
    }

    #[test]
    fn minibatch_split_covers_every_sample_once_per_epoch() {
        // Indirect check: two minibatches with lr=0 must still count the
        // right number of optimiser steps.
        let mut params = PolicyParams::init(Arch::new(3, vec![4], 2), &mut rng(32));
        let batch = bandit_batch(&params, 9);
        let cfg = PpoConfig { epochs: 2, minibatches: 2, lr: 0.0, ..PpoConfig::default() };
        let mut opt = Optimizer::new(cfg.optimizer, 0.0, Some(cfg.max_grad_norm), params.theta.len());
        let stats = ppo_update(&mut params, &mut opt, &batch, &cfg, &mut rng(33)).unwrap();
        assert_eq!(stats.optimizer_steps, 4);
    }
}
