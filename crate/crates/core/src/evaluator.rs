//! Policy/value network: a two-hidden-layer ReLU perceptron with a masked
//! policy head, a scalar value head and twin per-action Q heads.
//!
//! Parameters live in one flat `Vec<f64>` so that target copies, Polyak
//! averaging, optimizer state and checkpoints are plain slice operations.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::env::{Env, EnvState};
use crate::error::{config_err, Error, Result};

/// Additive sentinel applied to masked logits.
pub const MASK_SENTINEL: f64 = -1e9;

const CHECKPOINT_MAGIC: &[u8; 8] = b"PCNET\0\0\x01";
const CHECKPOINT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8 * 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    pub hidden: usize,
    pub seed: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub grad_clip: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            hidden: 128,
            seed: 0,
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            grad_clip: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub input: usize,
    pub hidden: usize,
    pub actions: usize,
}

impl Dims {
    pub fn for_env(env: &Env, hidden: usize) -> Dims {
        Dims {
            input: env.feature_dim(),
            hidden,
            actions: env.num_actions(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Layout {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    wp: usize,
    bp: usize,
    wv: usize,
    bv: usize,
    wq: [usize; 2],
    bq: [usize; 2],
    total: usize,
}

impl Layout {
    fn new(d: Dims) -> Layout {
        let mut off = 0;
        let mut take = |n: usize| {
            let o = off;
            off += n;
            o
        };
        let (i, h, a) = (d.input, d.hidden, d.actions);
        let w1 = take(h * i);
        let b1 = take(h);
        let w2 = take(h * h);
        let b2 = take(h);
        let wp = take(a * h);
        let bp = take(a);
        let wv = take(h);
        let bv = take(1);
        let wq0 = take(a * h);
        let bq0 = take(a);
        let wq1 = take(a * h);
        let bq1 = take(a);
        Layout {
            w1,
            b1,
            w2,
            b2,
            wp,
            bp,
            wv,
            bv,
            wq: [wq0, wq1],
            bq: [bq0, bq1],
            total: off,
        }
    }
}

/// Network structure; parameters are passed separately.
#[derive(Clone, Debug)]
pub struct Mlp {
    dims: Dims,
    layout: Layout,
}

/// Forward activations kept for backpropagation, plus the head outputs.
#[derive(Clone, Debug)]
pub struct Forward {
    x: Vec<f64>,
    z1: Vec<f64>,
    h1: Vec<f64>,
    z2: Vec<f64>,
    h2: Vec<f64>,
    pub mask: Vec<bool>,
    /// Raw logits plus the sentinel on masked entries.
    pub logits: Vec<f64>,
    /// Exactly zero on masked entries.
    pub policy: Vec<f64>,
    /// `ln policy` on valid entries, zero on masked entries.
    pub log_policy: Vec<f64>,
    pub value: f64,
    /// Empty unless Q heads were requested.
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
}

impl Forward {
    pub fn entropy(&self) -> f64 {
        entropy(&self.policy, &self.log_policy)
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}

pub fn entropy(policy: &[f64], log_policy: &[f64]) -> f64 {
    -policy
        .iter()
        .zip(log_policy)
        .map(|(p, l)| if *p > 0.0 { p * l } else { 0.0 })
        .sum::<f64>()
}

/// Loss derivatives with respect to the head outputs of one sample.
/// Empty vectors mean "no gradient".
#[derive(Clone, Debug, Default)]
pub struct HeadGrad {
    pub logits: Vec<f64>,
    pub value: f64,
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn dense(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let n_in = x.len();
    for (o, (row, bias)) in out.iter_mut().zip(w.chunks_exact(n_in).zip(b)) {
        *o = bias + dot(row, x);
    }
}

/// `g_in` may be empty when the input gradient is not needed.
fn dense_backward(
    w: &[f64],
    x: &[f64],
    g_out: &[f64],
    gw: &mut [f64],
    gb: &mut [f64],
    g_in: &mut [f64],
) {
    let n_in = x.len();
    for (k, &g) in g_out.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        gb[k] += g;
        let grow = &mut gw[k * n_in..(k + 1) * n_in];
        for (gw, xi) in grow.iter_mut().zip(x) {
            *gw += g * xi;
        }
        if !g_in.is_empty() {
            let row = &w[k * n_in..(k + 1) * n_in];
            for (gi, wi) in g_in.iter_mut().zip(row) {
                *gi += g * wi;
            }
        }
    }
}

impl Mlp {
    pub fn new(dims: Dims) -> Result<Mlp> {
        if dims.input == 0 || dims.hidden == 0 || dims.actions == 0 {
            return config_err(format!("degenerate network dimensions {dims:?}"));
        }
        Ok(Mlp {
            dims,
            layout: Layout::new(dims),
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn num_params(&self) -> usize {
        self.layout.total
    }

    /// Fan-in uniform hidden and Q layers, zero policy/value heads and biases.
    /// Each initialized block draws from its own generator stream.
    pub fn init(&self, seed: u64) -> Vec<f64> {
        let d = self.dims;
        let l = self.layout;
        let mut p = vec![0.0; l.total];
        let mut fill = |start: usize, len: usize, fan_in: usize, stream: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for v in &mut p[start..start + len] {
                *v = rng.random_range(-bound..bound);
            }
        };
        fill(l.w1, d.hidden * d.input, d.input, 1);
        fill(l.w2, d.hidden * d.hidden, d.hidden, 2);
        fill(l.wq[0], d.actions * d.hidden, d.hidden, 3);
        fill(l.wq[1], d.actions * d.hidden, d.hidden, 4);
        p
    }

    fn check_shapes(&self, params: &[f64], x: &[f64], mask: &[bool]) -> Result<()> {
        if params.len() != self.layout.total {
            return config_err(format!(
                "expected {} parameters, got {}",
                self.layout.total,
                params.len()
            ));
        }
        if x.len() != self.dims.input || mask.len() != self.dims.actions {
            return config_err(format!(
                "input {} / mask {} do not match dims {:?}",
                x.len(),
                mask.len(),
                self.dims
            ));
        }
        if let Some(v) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite network input {v}")));
        }
        Ok(())
    }

    pub fn forward(
        &self,
        params: &[f64],
        x: &[f64],
        mask: &[bool],
        with_q: bool,
    ) -> Result<Forward> {
        self.check_shapes(params, x, mask)?;
        let d = self.dims;
        let l = self.layout;
        let (h, a) = (d.hidden, d.actions);
        let mut z1 = vec![0.0; h];
        dense(&params[l.w1..l.b1], &params[l.b1..l.b1 + h], x, &mut z1);
        let h1: Vec<f64> = z1.iter().map(|v| v.max(0.0)).collect();
        let mut z2 = vec![0.0; h];
        dense(&params[l.w2..l.b2], &params[l.b2..l.b2 + h], &h1, &mut z2);
        let h2: Vec<f64> = z2.iter().map(|v| v.max(0.0)).collect();

        let mut logits = vec![0.0; a];
        dense(
            &params[l.wp..l.bp],
            &params[l.bp..l.bp + a],
            &h2,
            &mut logits,
        );
        for (z, m) in logits.iter_mut().zip(mask) {
            if !m {
                *z += MASK_SENTINEL;
            }
        }
        let (policy, log_policy) = masked_softmax(&logits, mask);

        let mut v = [0.0];
        dense(&params[l.wv..l.bv], &params[l.bv..l.bv + 1], &h2, &mut v);

        let (mut q1, mut q2) = (Vec::new(), Vec::new());
        if with_q {
            q1 = vec![0.0; a];
            q2 = vec![0.0; a];
            dense(
                &params[l.wq[0]..l.bq[0]],
                &params[l.bq[0]..l.bq[0] + a],
                &h2,
                &mut q1,
            );
            dense(
                &params[l.wq[1]..l.bq[1]],
                &params[l.bq[1]..l.bq[1] + a],
                &h2,
                &mut q2,
            );
        }
        let out = Forward {
            x: x.to_vec(),
            z1,
            h1,
            z2,
            h2,
            mask: mask.to_vec(),
            logits,
            policy,
            log_policy,
            value: v[0],
            q1,
            q2,
        };
        if !out.value.is_finite() || out.policy.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numeric("non-finite network output".into()));
        }
        Ok(out)
    }

    /// Accumulates `d loss / d params` for one sample into `grad`.
    /// Gradients on masked logits are dropped.
    pub fn backward(&self, params: &[f64], fwd: &Forward, g: &HeadGrad, grad: &mut [f64]) {
        let d = self.dims;
        let l = self.layout;
        let (h, a) = (d.hidden, d.actions);
        let mut dh2 = vec![0.0; h];
        {
            let (gw, rest) = grad[l.wp..].split_at_mut(l.bp - l.wp);
            if !g.logits.is_empty() {
                let gl: Vec<f64> = g
                    .logits
                    .iter()
                    .zip(&fwd.mask)
                    .map(|(v, m)| if *m { *v } else { 0.0 })
                    .collect();
                dense_backward(
                    &params[l.wp..l.bp],
                    &fwd.h2,
                    &gl,
                    gw,
                    &mut rest[..a],
                    &mut dh2,
                );
            }
        }
        if g.value != 0.0 {
            let (gw, rest) = grad[l.wv..].split_at_mut(l.bv - l.wv);
            dense_backward(
                &params[l.wv..l.bv],
                &fwd.h2,
                &[g.value],
                gw,
                &mut rest[..1],
                &mut dh2,
            );
        }
        for (k, gq) in [&g.q1, &g.q2].into_iter().enumerate() {
            if gq.is_empty() {
                continue;
            }
            let (gw, rest) = grad[l.wq[k]..].split_at_mut(l.bq[k] - l.wq[k]);
            dense_backward(
                &params[l.wq[k]..l.bq[k]],
                &fwd.h2,
                gq,
                gw,
                &mut rest[..a],
                &mut dh2,
            );
        }
        let dz2: Vec<f64> = dh2
            .iter()
            .zip(&fwd.z2)
            .map(|(g, z)| if *z > 0.0 { *g } else { 0.0 })
            .collect();
        let mut dh1 = vec![0.0; h];
        {
            let (gw, rest) = grad[l.w2..].split_at_mut(l.b2 - l.w2);
            dense_backward(
                &params[l.w2..l.b2],
                &fwd.h1,
                &dz2,
                gw,
                &mut rest[..h],
                &mut dh1,
            );
        }
        let dz1: Vec<f64> = dh1
            .iter()
            .zip(&fwd.z1)
            .map(|(g, z)| if *z > 0.0 { *g } else { 0.0 })
            .collect();
        let (gw, rest) = grad[l.w1..].split_at_mut(l.b1 - l.w1);
        dense_backward(
            &params[l.w1..l.b1],
            &fwd.x,
            &dz1,
            gw,
            &mut rest[..h],
            &mut [],
        );
    }
}

/// Max-subtracted softmax over unmasked entries.
pub fn masked_softmax(logits: &[f64], mask: &[bool]) -> (Vec<f64>, Vec<f64>) {
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, m)| **m)
        .map(|(z, _)| *z)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut policy = vec![0.0; logits.len()];
    let mut log_policy = vec![0.0; logits.len()];
    if max == f64::NEG_INFINITY {
        return (policy, log_policy);
    }
    let sum: f64 = logits
        .iter()
        .zip(mask)
        .filter(|(_, m)| **m)
        .map(|(z, _)| (z - max).exp())
        .sum();
    let log_sum = sum.ln();
    for i in 0..logits.len() {
        if mask[i] {
            log_policy[i] = logits[i] - max - log_sum;
            policy[i] = log_policy[i].exp();
        }
    }
    (policy, log_policy)
}

/// Adam with global gradient-norm clipping.
#[derive(Clone, Debug)]
pub struct Adam {
    cfg: NetConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(cfg: &NetConfig, n: usize) -> Adam {
        Adam {
            cfg: cfg.clone(),
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// Applies one update and returns the pre-clip gradient norm. Parameters
    /// are left untouched if the update would make any of them non-finite.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<f64> {
        if grad.len() != params.len() || grad.len() != self.m.len() {
            return config_err("optimizer/parameter size mismatch");
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::Numeric(format!("non-finite gradient norm {norm}")));
        }
        let scale = if self.cfg.grad_clip > 0.0 && norm > self.cfg.grad_clip {
            self.cfg.grad_clip / norm
        } else {
            1.0
        };
        let c = &self.cfg;
        let t = self.t + 1;
        let bc1 = 1.0 - c.beta1.powi(t as i32);
        let bc2 = 1.0 - c.beta2.powi(t as i32);
        let mut next = params.to_vec();
        let mut m = self.m.clone();
        let mut v = self.v.clone();
        for i in 0..params.len() {
            let g = grad[i] * scale;
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
            next[i] -= c.lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + c.eps);
        }
        if next.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numeric(
                "update produced non-finite parameters".into(),
            ));
        }
        params.copy_from_slice(&next);
        self.m = m;
        self.v = v;
        self.t = t;
        Ok(norm)
    }
}

/// `target <- (1 - tau) target + tau online`.
pub fn polyak_update(target: &mut [f64], online: &[f64], tau: f64) -> Result<()> {
    if target.len() != online.len() {
        return config_err(format!(
            "polyak shape mismatch: {} vs {}",
            target.len(),
            online.len()
        ));
    }
    if !(tau > 0.0 && tau <= 1.0) {
        return config_err(format!("tau_soft {tau} outside (0, 1]"));
    }
    for (t, o) in target.iter_mut().zip(online) {
        *t = (1.0 - tau) * *t + tau * o;
    }
    Ok(())
}

/// Stable 64-bit digest of a configuration string.
pub fn config_hash(text: &str) -> u64 {
    let digest = Sha256::digest(text.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckpointHeader {
    pub dims: Dims,
    pub seed: u64,
    pub config_hash: u64,
}

fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

pub fn save_checkpoint(path: &Path, header: &CheckpointHeader, params: &[f64]) -> Result<()> {
    let d = header.dims;
    let expected = Layout::new(d).total;
    if params.len() != expected {
        return Err(Error::Checkpoint(format!(
            "parameter count {} does not match dims ({expected})",
            params.len()
        )));
    }
    let mut bytes = Vec::with_capacity(HEADER_LEN + 8 * params.len());
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    bytes.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for v in [
        d.input as u64,
        d.hidden as u64,
        d.actions as u64,
        header.seed,
        header.config_hash,
        params.len() as u64,
    ] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    for p in params {
        bytes.extend_from_slice(&p.to_le_bytes());
    }
    fs::write(path, bytes)?;
    let manifest = format!(
        "version={CHECKPOINT_VERSION}\ninput={}\nhidden={}\nactions={}\nseed={}\nconfig_hash={:016x}\nparams={}\n",
        d.input,
        d.hidden,
        d.actions,
        header.seed,
        header.config_hash,
        params.len()
    );
    fs::write(manifest_path(path), manifest)?;
    Ok(())
}

/// Reads and fully validates a checkpoint before returning any parameters.
/// `expect` pins the dimensions and, when non-zero, the config hash.
pub fn load_checkpoint(
    path: &Path,
    expect: Option<(Dims, u64)>,
) -> Result<(CheckpointHeader, Vec<f64>)> {
    let bytes = fs::read(path)?;
    if bytes.len() < HEADER_LEN || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(format!(
            "{} is not a checkpoint",
            path.display()
        )));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let word = |i: usize| u64::from_le_bytes(bytes[12 + 8 * i..20 + 8 * i].try_into().unwrap());
    let dims = Dims {
        input: word(0) as usize,
        hidden: word(1) as usize,
        actions: word(2) as usize,
    };
    let header = CheckpointHeader {
        dims,
        seed: word(3),
        config_hash: word(4),
    };
    let count = word(5) as usize;
    if dims.input == 0 || dims.hidden == 0 || dims.actions == 0 {
        return Err(Error::Checkpoint(format!("corrupt dimensions {dims:?}")));
    }
    if count != Layout::new(dims).total || bytes.len() != HEADER_LEN + 8 * count {
        return Err(Error::Checkpoint("parameter block length mismatch".into()));
    }
    if let Some((want, hash)) = expect {
        if want != dims {
            return Err(Error::Checkpoint(format!(
                "checkpoint dims {dims:?} differ from expected {want:?}"
            )));
        }
        if hash != 0 && hash != header.config_hash {
            return Err(Error::Checkpoint(format!(
                "config hash {:016x} differs from expected {hash:016x}",
                header.config_hash
            )));
        }
    }
    let params: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::Checkpoint("non-finite parameter".into()));
    }
    Ok((header, params))
}

/// Prior policy over the flat action space and a scalar state value.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub policy: Vec<f64>,
    /// Log-probabilities, 0 at masked actions.
    pub log_policy: Vec<f64>,
    pub value: f64,
}

pub trait PolicyValue {
    fn evaluate(&self, env: &Env, state: &EnvState) -> Result<Evaluation>;
}

/// Uniform prior over valid actions, zero value.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformEvaluator;

impl PolicyValue for UniformEvaluator {
    fn evaluate(&self, env: &Env, state: &EnvState) -> Result<Evaluation> {
        let mask = env.action_mask(state);
        let k = mask.iter().filter(|m| **m).count();
        let policy = mask
            .iter()
            .map(|m| if *m { 1.0 / k as f64 } else { 0.0 })
            .collect();
        let log_policy = mask
            .iter()
            .map(|m| if *m { -(k as f64).ln() } else { 0.0 })
            .collect();
        Ok(Evaluation {
            policy,
            log_policy,
            value: 0.0,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ValueSource {
    /// The scalar value head.
    Head,
    /// Soft state value `sum_a pi(a) (min_i Q_i(a) - alpha ln pi(a))`.
    SoftQ { alpha: f64 },
}

/// Network-backed evaluator over a borrowed parameter snapshot.
#[derive(Clone, Copy, Debug)]
pub struct NetEvaluator<'a> {
    pub mlp: &'a Mlp,
    pub params: &'a [f64],
    pub source: ValueSource,
}

impl NetEvaluator<'_> {
    pub fn forward(&self, env: &Env, state: &EnvState) -> Result<Forward> {
        let x = env.features(state)?;
        let mask = env.action_mask(state);
        self.mlp.forward(
            self.params,
            &x,
            &mask,
            matches!(self.source, ValueSource::SoftQ { .. }),
        )
    }
}

pub fn soft_value(fwd: &Forward, alpha: f64) -> f64 {
    (0..fwd.policy.len())
        .filter(|&i| fwd.mask[i])
        .map(|i| fwd.policy[i] * (fwd.q1[i].min(fwd.q2[i]) - alpha * fwd.log_policy[i]))
        .sum()
}

impl PolicyValue for NetEvaluator<'_> {
    fn evaluate(&self, env: &Env, state: &EnvState) -> Result<Evaluation> {
        let fwd = self.forward(env, state)?;
        let value = match self.source {
            ValueSource::Head => fwd.value,
            ValueSource::SoftQ { alpha } => soft_value(&fwd, alpha),
        };
        Ok(Evaluation {
            policy: fwd.policy,
            log_policy: fwd.log_policy,
            value,
        })
    }
}
