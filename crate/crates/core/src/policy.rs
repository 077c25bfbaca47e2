//! Feed-forward policy/value network with hand-written backpropagation.
//!
//! The architecture is deliberately small and fixed in shape: a tanh MLP
//! trunk with a linear policy head (logits over the discrete action space)
//! and a linear value head. Parameters live in one flat `Vec<f64>` so
//! optimisers, checkpoints, and parameter hashing all operate on a single
//! contiguous buffer. Partial observability is handled upstream by frame
//! stacking rather than recurrence.
//!
//! Gradients are exact: [`grad_batch`] backpropagates any loss expressed
//! through the two heads, given the analytic head derivatives. There is no
//! tape and no approximation, which keeps the finite-difference oracle in
//! the tests honest.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Read, Write};
use std::ops::Range;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arch {
    pub input_dim: usize,
    /// Hidden layer widths; may be empty for a purely linear model.
    pub hidden: Vec<usize>,
    pub action_count: usize,
}

impl Arch {
    pub fn new(input_dim: usize, hidden: Vec<usize>, action_count: usize) -> Arch {
        Arch { input_dim, hidden, action_count }
    }

    fn last_width(&self) -> usize {
        self.hidden.last().copied().unwrap_or(self.input_dim)
    }

    /// Total parameter count: trunk layers plus both heads.
    pub fn param_count(&self) -> usize {
        let mut n = 0;
        let mut prev = self.input_dim;
        for &h in &self.hidden {
            n += h * (prev + 1);
            prev = h;
        }
        n + self.action_count * (prev + 1) + (prev + 1)
    }

    /// Flat-buffer ranges: per-layer (weights, bias), then the heads.
    fn layout(&self) -> Layout {
        let mut layers = Vec::with_capacity(self.hidden.len());
        let mut at = 0;
        let mut prev = self.input_dim;
        for &h in &self.hidden {
            let w = at..at + h * prev;
            at = w.end;
            let b = at..at + h;
            at = b.end;
            layers.push((w, b));
            prev = h;
        }
        let pw = at..at + self.action_count * prev;
        at = pw.end;
        let pb = at..at + self.action_count;
        at = pb.end;
        let vw = at..at + prev;
        at = vw.end;
        let vb = at..at + 1;
        Layout { layers, policy: (pw, pb), value: (vw, vb) }
    }

    /// Range of the policy head's parameters inside the flat buffer.
    pub fn policy_head_range(&self) -> Range<usize> {
        let l = self.layout();
        l.policy.0.start..l.policy.1.end
    }

    pub fn value_head_range(&self) -> Range<usize> {
        let l = self.layout();
        l.value.0.start..l.value.1.end
    }
}

struct Layout {
    layers: Vec<(Range<usize>, Range<usize>)>,
    policy: (Range<usize>, Range<usize>),
    value: (Range<usize>, Range<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub arch: Arch,
    pub theta: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("loss or gradient is not finite: {0}")]
    NonFiniteLoss(String),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad checkpoint format: {0}")]
    Format(String),
}

impl PolicyParams {
    pub fn zeros(arch: Arch) -> PolicyParams {
        let theta = vec![0.0; arch.param_count()];
        PolicyParams { arch, theta }
    }

    /// Orthogonal trunk (gain sqrt(2)), orthogonal heads scaled 0.01
    /// (policy) and 1.0 (value), zero biases.
    pub fn init(arch: Arch, rng: &mut ChaCha8Rng) -> PolicyParams {
        let layout = arch.layout();
        let mut theta = vec![0.0; arch.param_count()];
        let mut prev = arch.input_dim;
        for (i, &h) in arch.hidden.iter().enumerate() {
            let w = orthogonal(h, prev, 2f64.sqrt(), rng);
            theta[layout.layers[i].0.clone()].copy_from_slice(&w);
            prev = h;
        }
        let pw = orthogonal(arch.action_count, prev, 0.01, rng);
        theta[layout.policy.0.clone()].copy_from_slice(&pw);
        let vw = orthogonal(1, prev, 1.0, rng);
        theta[layout.value.0.clone()].copy_from_slice(&vw);
        PolicyParams { arch, theta }
    }

    /// Content hash of the parameter vector; cheap change detection for
    /// stop-gradient contracts.
    pub fn theta_hash(&self) -> u64 {
        let mut bytes = Vec::with_capacity(self.theta.len() * 8);
        for v in &self.theta {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        crate::env::fnv1a64(&bytes)
    }
}

/// Rows-orthonormal (or columns, whichever is smaller) Gaussian matrix via
/// modified Gram-Schmidt, scaled by `gain`. Row-major `rows x cols`.
fn orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let transpose = rows > cols;
    let (n, m) = if transpose { (cols, rows) } else { (rows, cols) };
    let mut q: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    for i in 0..n {
        for j in 0..i {
            let dot: f64 = q[i].iter().zip(&q[j]).map(|(a, b)| a * b).sum();
            for k in 0..m {
                q[i][k] -= dot * q[j][k];
            }
        }
        let norm = q[i].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            // Measure-zero degenerate draw; fall back to a basis vector.
            q[i].iter_mut().for_each(|v| *v = 0.0);
            q[i][i % m] = 1.0;
        } else {
            q[i].iter_mut().for_each(|v| *v /= norm);
        }
    }
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let v = if transpose { q[c][r] } else { q[r][c] };
            out[r * cols + c] = gain * v;
        }
    }
    out
}

/// Per-batch forward results plus the activation cache backward needs.
pub struct BatchForward {
    pub logits: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    /// `acts[s][l]` is sample s's activation entering layer l (acts[s][0] is
    /// the input itself); the last entry feeds the heads.
    acts: Vec<Vec<Vec<f64>>>,
}

fn affine(w: &[f64], b: &[f64], x: &[f64], out_dim: usize) -> Vec<f64> {
    let in_dim = x.len();
    let mut out = Vec::with_capacity(out_dim);
    for o in 0..out_dim {
        let row = &w[o * in_dim..(o + 1) * in_dim];
        let mut acc = b[o];
        for (wi, xi) in row.iter().zip(x) {
            acc += wi * xi;
        }
        out.push(acc);
    }
    out
}

pub fn forward_batch(params: &PolicyParams, inputs: &[Vec<f64>]) -> BatchForward {
    let arch = &params.arch;
    let layout = arch.layout();
    let theta = &params.theta;
    let mut logits = Vec::with_capacity(inputs.len());
    let mut values = Vec::with_capacity(inputs.len());
    let mut acts = Vec::with_capacity(inputs.len());
    for x in inputs {
        debug_assert_eq!(x.len(), arch.input_dim);
        let mut chain = Vec::with_capacity(arch.hidden.len() + 1);
        chain.push(x.clone());
        let mut cur = x.clone();
        for (i, &h) in arch.hidden.iter().enumerate() {
            let (w, b) = &layout.layers[i];
            let mut z = affine(&theta[w.clone()], &theta[b.clone()], &cur, h);
            z.iter_mut().for_each(|v| *v = v.tanh());
            chain.push(z.clone());
            cur = z;
        }
        let (pw, pb) = &layout.policy;
        let (vw, vb) = &layout.value;
        logits.push(affine(&theta[pw.clone()], &theta[pb.clone()], &cur, arch.action_count));
        values.push(affine(&theta[vw.clone()], &theta[vb.clone()], &cur, 1)[0]);
        acts.push(chain);
    }
    BatchForward { logits, values, acts }
}

/// Convenience single-observation forward.
pub fn forward(params: &PolicyParams, input: &[f64]) -> (Vec<f64>, f64) {
    let out = forward_batch(params, std::slice::from_ref(&input.to_vec()));
    (out.logits.into_iter().next().unwrap(), out.values[0])
}

/// Backpropagate head derivatives through the trunk, accumulating the full
/// parameter gradient (summed over the batch; divide upstream for means).
pub fn backward_batch(
    params: &PolicyParams,
    fwd: &BatchForward,
    d_logits: &[Vec<f64>],
    d_values: &[f64],
) -> Vec<f64> {
    let arch = &params.arch;
    let layout = arch.layout();
    let theta = &params.theta;
    let mut grad = vec![0.0; theta.len()];
    let last = arch.last_width();

    for s in 0..fwd.acts.len() {
        let chain = &fwd.acts[s];
        let top = &chain[chain.len() - 1];
        let dl = &d_logits[s];
        let dv = d_values[s];

        // Heads.
        let (pw, pb) = &layout.policy;
        let (vw, vb) = &layout.value;
        let mut d_top = vec![0.0; last];
        for a in 0..arch.action_count {
            let g = dl[a];
            if g != 0.0 {
                let row = pw.start + a * last;
                for k in 0..last {
                    grad[row + k] += g * top[k];
                    d_top[k] += g * theta[row + k];
                }
            }
            grad[pb.start + a] += g;
        }
        if dv != 0.0 {
            for k in 0..last {
                grad[vw.start + k] += dv * top[k];
                d_top[k] += dv * theta[vw.start + k];
            }
        }
        grad[vb.start] += dv;

        // Trunk, in reverse. d_top currently holds dL/d(activation out of
        // the final hidden layer); fold through tanh and each affine.
        let mut d_out = d_top;
        for l in (0..arch.hidden.len()).rev() {
            let (wr, br) = &layout.layers[l];
            let out_act = &chain[l + 1];
            let input = &chain[l];
            let in_dim = input.len();
            let mut d_in = vec![0.0; in_dim];
            for o in 0..out_act.len() {
                let dz = d_out[o] * (1.0 - out_act[o] * out_act[o]);
                if dz != 0.0 {
                    let row = wr.start + o * in_dim;
                    for k in 0..in_dim {
                        grad[row + k] += dz * input[k];
                        d_in[k] += dz * theta[row + k];
                    }
                }
                grad[br.start + o] += dz;
            }
            d_out = d_in;
        }
    }
    grad
}

/// Exact gradient of a loss expressed through the heads. The closure sees
/// the batch logits/values and must return the loss together with its
/// analytic derivatives w.r.t. every logit and value.
pub fn grad_batch<F>(
    params: &PolicyParams,
    inputs: &[Vec<f64>],
    loss: F,
) -> Result<(f64, Vec<f64>), PolicyError>
where
    F: FnOnce(&[Vec<f64>], &[f64]) -> (f64, Vec<Vec<f64>>, Vec<f64>),
{
    let fwd = forward_batch(params, inputs);
    let (value, d_logits, d_values) = loss(&fwd.logits, &fwd.values);
    if !value.is_finite() {
        return Err(PolicyError::NonFiniteLoss(format!("loss = {value}")));
    }
    let grad = backward_batch(params, &fwd, &d_logits, &d_values);
    if let Some(bad) = grad.iter().find(|g| !g.is_finite()) {
        return Err(PolicyError::NonFiniteLoss(format!("gradient component = {bad}")));
    }
    Ok((value, grad))
}

/// Numerically stable log-softmax.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln() + m;
    logits.iter().map(|l| l - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).iter().map(|l| l.exp()).collect()
}

pub fn entropy_of(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// Sample from the categorical distribution the logits define. Returns the
/// action and its log-probability under the current policy.
pub fn sample_action(logits: &[f64], rng: &mut ChaCha8Rng) -> (usize, f64) {
    let logp = log_softmax(logits);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut action = logp.len() - 1;
    for (i, lp) in logp.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            action = i;
            break;
        }
    }
    (action, logp[action])
}

/// Deterministic argmax action (first index on ties) with its log-prob.
pub fn greedy_action(logits: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for (i, &l) in logits.iter().enumerate() {
        if l > logits[best] {
            best = i;
        }
    }
    (best, log_softmax(logits)[best])
}

// --- Checkpoint format -----------------------------------------------------
//
// One JSON header line, then the raw parameter vector as little-endian f64:
//
//   {"format":"ued-policy-v1","arch":{...},"updates":N,"theta_len":L}\n
//   <L * 8 bytes>

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    format: String,
    arch: Arch,
    updates: u64,
    theta_len: usize,
}

pub const POLICY_FORMAT: &str = "ued-policy-v1";

pub fn save_policy(path: &Path, params: &PolicyParams, updates: u64) -> Result<(), PolicyError> {
    let header = CheckpointHeader {
        format: POLICY_FORMAT.into(),
        arch: params.arch.clone(),
        updates,
        theta_len: params.theta.len(),
    };
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer(&mut f, &header).map_err(|e| PolicyError::Format(e.to_string()))?;
    f.write_all(b"\n")?;
    let mut bytes = Vec::with_capacity(params.theta.len() * 8);
    for v in &params.theta {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    f.write_all(&bytes)?;
    Ok(())
}

pub fn load_policy(path: &Path) -> Result<(PolicyParams, u64), PolicyError> {
    let f = std::fs::File::open(path)?;
    let mut reader = BufReader::new(f);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let header: CheckpointHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| PolicyError::Format(e.to_string()))?;
    if header.format != POLICY_FORMAT {
        return Err(PolicyError::Format(format!("unknown format {:?}", header.format)));
    }
    if header.theta_len != header.arch.param_count() {
        return Err(PolicyError::Format(format!(
            "theta length {} does not match architecture ({} expected)",
            header.theta_len,
            header.arch.param_count()
        )));
    }
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != header.theta_len * 8 {
        return Err(PolicyError::Format(format!(
            "expected {} parameter bytes, found {}",
            header.theta_len * 8,
            bytes.len()
        )));
    }
    let theta = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((PolicyParams { arch: header.arch, theta }, header.updates))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn param_count_matches_layout_end() {
        for arch in [
            Arch::new(7, vec![16, 8], 3),
            Arch::new(4, vec![], 5),
            Arch::new(12, vec![6], 2),
        ] {
            let l = arch.layout();
            assert_eq!(l.value.1.end, arch.param_count());
            assert_eq!(PolicyParams::zeros(arch.clone()).theta.len(), arch.param_count());
        }
    }

    #[test]
    fn zero_parameters_give_uniform_policy_and_zero_value() {
        let params = PolicyParams::zeros(Arch::new(6, vec![8], 3));
        let (logits, value) = forward(&params, &[1.0, -2.0, 0.5, 0.0, 3.0, -1.0]);
        assert_eq!(value, 0.0);
        let probs = softmax(&logits);
        for p in &probs {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!((entropy_of(&probs) - 3f64.ln()).abs() < 1e-12);
    }

    /// Independent straight-line reimplementation of the forward pass, kept
    /// naive on purpose: the production path must agree with it exactly.
    fn oracle_forward(params: &PolicyParams, x: &[f64]) -> (Vec<f64>, f64) {
        let arch = &params.arch;
        let mut consumed = 0usize;
        let mut take = |n: usize| {
            let s = params.theta[consumed..consumed + n].to_vec();
            consumed += n;
            s
        };
        let mut cur = x.to_vec();
        for &h in &arch.hidden {
            let w = take(h * cur.len());
            let b = take(h);
            let mut next = vec![0.0; h];
            for o in 0..h {
                let mut z = b[o];
                for i in 0..cur.len() {
                    z += w[o * cur.len() + i] * cur[i];
                }
                next[o] = z.tanh();
            }
            cur = next;
        }
        let a = arch.action_count;
        let pw = take(a * cur.len());
        let pb = take(a);
        let mut logits = vec![0.0; a];
        for o in 0..a {
            logits[o] = pb[o] + (0..cur.len()).map(|i| pw[o * cur.len() + i] * cur[i]).sum::<f64>();
        }
        let vw = take(cur.len());
        let vb = take(1);
        let value = vb[0] + (0..cur.len()).map(|i| vw[i] * cur[i]).sum::<f64>();
        assert_eq!(consumed, params.theta.len());
        (logits, value)
    }

    #[test]
    fn forward_matches_independent_oracle() {
        let mut r = rng(3);
        for _ in 0..20 {
            let arch = Arch::new(5, vec![7, 4], 3);
            let params = PolicyParams::init(arch, &mut r);
            let x: Vec<f64> = (0..5).map(|_| r.gen_range(-2.0..2.0)).collect();
            let (logits, value) = forward(&params, &x);
            let (ol, ov) = oracle_forward(&params, &x);
            for (a, b) in logits.iter().zip(&ol) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!((value - ov).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let params = PolicyParams::init(Arch::new(4, vec![6], 3), &mut rng(4));
        let inputs = vec![vec![0.3, -0.1, 0.7, 0.2]];
        let (_, grad) = grad_batch(&params, &inputs, |logits, values| {
            (5.0, vec![vec![0.0; logits[0].len()]], vec![0.0; values.len()])
        })
        .unwrap();
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn value_only_loss_leaves_policy_head_untouched() {
        let params = PolicyParams::init(Arch::new(4, vec![6, 5], 3), &mut rng(5));
        let inputs = vec![vec![0.3, -0.1, 0.7, 0.2], vec![1.0, 0.0, -0.5, 0.4]];
        // L = mean of 0.5 * value^2  =>  dL/dv = v / B.
        let (_, grad) = grad_batch(&params, &inputs, |logits, values| {
            let b = values.len() as f64;
            let loss = values.iter().map(|v| 0.5 * v * v).sum::<f64>() / b;
            let dv = values.iter().map(|v| v / b).collect();
            (loss, vec![vec![0.0; logits[0].len()]; logits.len()], dv)
        })
        .unwrap();
        let pr = params.arch.policy_head_range();
        assert!(grad[pr].iter().all(|&g| g == 0.0), "policy head must stay detached");
        let vr = params.arch.value_head_range();
        assert!(grad[vr].iter().any(|&g| g != 0.0), "value head should receive gradient");
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        // Cross-entropy-ish loss mixing both heads, checked coordinate-wise
        // against central finite differences.
        let mut r = rng(6);
        let arch = Arch::new(3, vec![5, 4], 3);
        let mut params = PolicyParams::init(arch, &mut r);
        let inputs: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..3).map(|_| r.gen_range(-1.0..1.0)).collect())
            .collect();
        let targets = [0usize, 2, 1, 0];
        let rets = [0.5, -0.2, 1.1, 0.0];

        let loss_fn = |logits: &[Vec<f64>], values: &[f64]| {
            let b = logits.len() as f64;
            let mut loss = 0.0;
            let mut dl = Vec::with_capacity(logits.len());
            let mut dv = Vec::with_capacity(values.len());
            for s in 0..logits.len() {
                let lp = log_softmax(&logits[s]);
                let probs: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
                loss += (-lp[targets[s]] + 0.5 * (values[s] - rets[s]).powi(2)) / b;
                let mut row = vec![0.0; probs.len()];
                for a in 0..probs.len() {
                    row[a] = (probs[a] - if a == targets[s] { 1.0 } else { 0.0 }) / b;
                }
                dl.push(row);
                dv.push((values[s] - rets[s]) / b);
            }
            (loss, dl, dv)
        };

        let (_, grad) = grad_batch(&params, &inputs, loss_fn).unwrap();
        let h = 1e-5;
        for k in (0..params.theta.len()).step_by(7) {
            let orig = params.theta[k];
            params.theta[k] = orig + h;
            let (lp, _, _) = loss_fn(&forward_batch(&params, &inputs).logits, &forward_batch(&params, &inputs).values);
            params.theta[k] = orig - h;
            let (lm, _, _) = loss_fn(&forward_batch(&params, &inputs).logits, &forward_batch(&params, &inputs).values);
            params.theta[k] = orig;
            let fd = (lp - lm) / (2.0 * h);
            let tol = 1e-4 * grad[k].abs().max(fd.abs()).max(1e-5);
            assert!(
                (grad[k] - fd).abs() <= tol,
                "coordinate {k}: analytic {} vs numeric {fd}",
                grad[k]
            );
        }
    }

    #[test]
    fn non_finite_loss_is_reported() {
        let params = PolicyParams::zeros(Arch::new(2, vec![], 2));
        let err = grad_batch(&params, &[vec![1.0, 1.0]], |logits, values| {
            (f64::NAN, vec![vec![0.0; logits[0].len()]], vec![0.0; values.len()])
        })
        .unwrap_err();
        assert!(matches!(err, PolicyError::NonFiniteLoss(_)));
    }

    #[test]
    fn sampling_respects_extreme_logits() {
        let mut r = rng(7);
        let logits = [10.0, -10.0, -10.0];
        let mut first = 0;
        for _ in 0..10_000 {
            let (a, lp) = sample_action(&logits, &mut r);
            assert!((lp - log_softmax(&logits)[a]).abs() < 1e-12);
            if a == 0 {
                first += 1;
            }
        }
        assert!(first as f64 / 10_000.0 > 0.999);
    }

    #[test]
    fn greedy_takes_first_argmax() {
        assert_eq!(greedy_action(&[1.0, 3.0, 3.0]).0, 1);
        assert_eq!(greedy_action(&[2.0, 1.0, 2.0]).0, 0);
    }

    #[test]
    fn softmax_sums_to_one() {
        let mut r = rng(8);
        for _ in 0..100 {
            let logits: Vec<f64> = (0..5).map(|_| r.gen_range(-30.0..30.0)).collect();
            let s: f64 = softmax(&logits).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_init_rows_are_orthonormal() {
        let mut r = rng(9);
        let w = orthogonal(4, 9, 1.0, &mut r);
        for i in 0..4 {
            for j in 0..4 {
                let dot: f64 = (0..9).map(|k| w[i * 9 + k] * w[j * 9 + k]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-9, "rows {i},{j}: {dot}");
            }
        }
    }

    #[test]
    fn checkpoint_round_trips_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("policy.ckpt");
        let params = PolicyParams::init(Arch::new(6, vec![5], 4), &mut rng(10));
        save_policy(&path, &params, 321).unwrap();
        let (loaded, updates) = load_policy(&path).unwrap();
        assert_eq!(updates, 321);
        assert_eq!(loaded.arch, params.arch);
        for (a, b) in loaded.theta.iter().zip(&params.theta) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn checkpoint_rejects_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("policy.ckpt");
        let params = PolicyParams::init(Arch::new(3, vec![4], 2), &mut rng(11));
        save_policy(&path, &params, 0).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 4);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_policy(&path), Err(PolicyError::Format(_))));
    }

    #[test]
    fn theta_hash_tracks_any_parameter_change()
    {
        let mut params = PolicyParams::init(Arch::new(3, vec![4], 2), &mut rng(12));
        let h0 = params.theta_hash();
        params.theta[5] += 1e-12;
        assert_ne!(params.theta_hash(), h0);
    }
}
