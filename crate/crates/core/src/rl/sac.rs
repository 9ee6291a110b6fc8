//! Soft actor-critic with twin critics, a squashed Gaussian policy and a
//! learned temperature.

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::buffer::{Batch, ReplayBuffer};
use crate::error::{check_dim, check_finite, AacError, Result};
use crate::nn::{adam_step, topology, Activation, MlpParameters, OptimizerState, ScalarAdam};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SacConfig {
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub min_fill: usize,
    pub buffer_capacity: usize,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub lr_alpha: f64,
    pub initial_alpha: f64,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub activation: Activation,
    pub her: bool,
    pub her_k: usize,
    pub episodes_per_epoch: usize,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            gamma: 0.995,
            tau: 0.005,
            batch_size: 64,
            min_fill: 1000,
            buffer_capacity: 1_000_000,
            lr_actor: 3e-4,
            lr_critic: 5e-4,
            lr_alpha: 3e-4,
            initial_alpha: 0.2,
            hidden_width: 128,
            hidden_layers: 3,
            activation: Activation::Selu,
            her: false,
            her_k: 4,
            episodes_per_epoch: 50,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| {
            Err(AacError::InvalidConfig {
                key: format!("sac.{key}"),
                reason: reason.to_string(),
            })
        };
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma", "must lie in [0, 1]");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau", "must lie in (0, 1]");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be positive");
        }
        if self.buffer_capacity == 0 {
            return bad("buffer_capacity", "must be positive");
        }
        for (key, v) in [
            ("lr_actor", self.lr_actor),
            ("lr_critic", self.lr_critic),
            ("lr_alpha", self.lr_alpha),
            ("initial_alpha", self.initial_alpha),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(key, "must be finite and positive");
            }
        }
        if self.hidden_width == 0 {
            return bad("hidden_width", "must be positive");
        }
        if self.episodes_per_epoch == 0 {
            return bad("episodes_per_epoch", "must be positive");
        }
        Ok(())
    }
}

/// Losses from one call to [`SacAgent::update`]. `performed` is false when the
/// buffer was below the minimum fill and nothing changed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateReport {
    pub performed: bool,
    pub critic_loss: f64,
    pub policy_loss: f64,
    pub alpha_loss: f64,
    pub alpha: f64,
}

/// Anything that maps an extended observation to an environment action.
pub trait Policy {
    fn act(&mut self, s_e: &[f64], deterministic: bool) -> Result<Vec<f64>>;
}

struct PolicySample {
    /// Squashed actions in `[-1, 1]`.
    squashed: Array2<f64>,
    log_prob: Array1<f64>,
    std: Array2<f64>,
    noise: Array2<f64>,
    /// Whether the log-std output was inside its clamp (gradient passes).
    log_std_free: Array2<bool>,
}

pub struct SacAgent {
    config: SacConfig,
    pub policy: MlpParameters,
    pub critics: [MlpParameters; 2],
    pub targets: [MlpParameters; 2],
    pub log_alpha: f64,
    policy_opt: OptimizerState,
    critic_opts: [OptimizerState; 2],
    alpha_opt: ScalarAdam,
    action_center: Vec<f64>,
    action_half: Vec<f64>,
    input_dim: usize,
    target_entropy: f64,
    rng: ChaCha8Rng,
}

impl SacAgent {
    pub fn new(config: SacConfig, input_dim: usize, action_low: &[f64], action_high: &[f64], seed: u64) -> Result<Self> {
        config.validate()?;
        check_dim("action bounds", action_low.len(), action_high.len())?;
        let m = action_low.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, l, act) = (config.hidden_width, config.hidden_layers, config.activation);
        let policy = MlpParameters::new(&topology(input_dim, w, l, 2 * m), act, &mut rng);
        let critics = [
            MlpParameters::new(&topology(input_dim + m, w, l, 1), act, &mut rng),
            MlpParameters::new(&topology(input_dim + m, w, l, 1), act, &mut rng),
        ];
        let targets = critics.clone();
        Ok(Self {
            policy_opt: OptimizerState::new(&policy, config.lr_actor),
            critic_opts: [
                OptimizerState::new(&critics[0], config.lr_critic),
                OptimizerState::new(&critics[1], config.lr_critic),
            ],
            alpha_opt: ScalarAdam::new(config.lr_alpha),
            log_alpha: config.initial_alpha.ln(),
            action_center: action_low.iter().zip(action_high).map(|(lo, hi)| 0.5 * (lo + hi)).collect(),
            action_half: action_low.iter().zip(action_high).map(|(lo, hi)| 0.5 * (hi - lo)).collect(),
            target_entropy: -(m as f64),
            input_dim,
            policy,
            critics,
            targets,
            config,
            rng,
        })
    }

    pub fn config(&self) -> &SacConfig {
        &self.config
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_center.len()
    }

    pub fn target_entropy(&self) -> f64 {
        self.target_entropy
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub(crate) fn action_scale(&self) -> (&[f64], &[f64]) {
        (&self.action_center, &self.action_half)
    }

    fn to_env_units(&self, squashed: &[f64]) -> Vec<f64> {
        squashed
            .iter()
            .zip(self.action_center.iter().zip(&self.action_half))
            .map(|(u, (c, h))| (c + h * u).clamp(c - h, c + h))
            .collect()
    }

    /// Squashed-Gaussian action in environment units; the deterministic mode
    /// returns the squashed mean.
    pub fn sample_action(&mut self, s_e: &[f64], deterministic: bool) -> Result<Vec<f64>> {
        check_dim("extended observation", self.input_dim, s_e.len())?;
        let out = self.policy.forward(s_e)?;
        let m = self.action_dim();
        let squashed: Vec<f64> = if deterministic {
            out[..m].iter().map(|mu| mu.tanh()).collect()
        } else {
            (0..m)
                .map(|i| {
                    let std = out[m + i].clamp(LOG_STD_MIN, LOG_STD_MAX).exp();
                    let xi: f64 = StandardNormal.sample(&mut self.rng);
                    (out[i] + std * xi).tanh()
                })
                .collect()
        };
        Ok(self.to_env_units(&squashed))
    }

    fn sample_policy(&mut self, states: ArrayView2<f64>) -> (PolicySample, crate::nn::ForwardCache) {
        let m = self.action_dim();
        let (out, cache) = self.policy.forward_batch(states);
        let n = out.nrows();
        let noise = Array2::from_shape_simple_fn((n, m), || StandardNormal.sample(&mut self.rng));
        let raw_log_std = out.slice(s![.., m..]);
        let log_std = raw_log_std.mapv(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX));
        let log_std_free = raw_log_std.mapv(|v| (LOG_STD_MIN..=LOG_STD_MAX).contains(&v));
        let std = log_std.mapv(f64::exp);
        let pre = &out.slice(s![.., ..m]) + &(&std * &noise);
        let squashed = pre.mapv(f64::tanh);
        let mut log_prob = Array1::zeros(n);
        for r in 0..n {
            let mut lp = 0.0;
            for i in 0..m {
                let u = pre[[r, i]];
                let xi = noise[[r, i]];
                lp += -0.5 * xi * xi - log_std[[r, i]] - HALF_LN_2PI - log_one_minus_tanh_sq(u);
            }
            log_prob[r] = lp;
        }
        (
            PolicySample {
                squashed,
                log_prob,
                std,
                noise,
                log_std_free,
            },
            cache,
        )
    }

    /// Soft Bellman targets for a batch, using a fresh next-action sample.
    pub fn critic_target(&mut self, batch: &Batch) -> Array1<f64> {
        let (next, _) = self.sample_policy(batch.s_e_next.view());
        let x = concatenate![Axis(1), batch.s_e_next, next.squashed];
        let (q1, _) = self.targets[0].forward_batch(x.view());
        let (q2, _) = self.targets[1].forward_batch(x.view());
        let min_q = ndarray::Zip::from(q1.column(0)).and(q2.column(0)).map_collect(|a, b| a.min(*b));
        soft_targets(&batch.rewards, &batch.terminated, &min_q, &next.log_prob, self.alpha(), self.config.gamma)
    }

    /// One gradient step on both critics, the policy and the temperature,
    /// followed by the target update.
    pub fn update(&mut self, buffer: &ReplayBuffer) -> Result<UpdateReport> {
        if buffer.len() < self.config.min_fill.max(1) {
            return Ok(UpdateReport {
                performed: false,
                alpha: self.alpha(),
                ..UpdateReport::default()
            });
        }
        let batch = {
            let (c, h) = (self.action_center.clone(), self.action_half.clone());
            buffer.sample(self.config.batch_size, &c, &h, &mut self.rng)
        };
        let n = batch.len() as f64;
        let alpha = self.alpha();
        let y = self.critic_target(&batch);

        let x = concatenate![Axis(1), batch.s_e, batch.actions];
        let mut critic_loss = 0.0;
        for k in 0..2 {
            let (q, cache) = self.critics[k].forward_batch(x.view());
            let residual = &q.column(0) - &y;
            critic_loss += residual.mapv(|r| r * r).sum() / n;
            let upstream = residual.mapv(|r| 2.0 * r / n).insert_axis(Axis(1));
            let (grads, _) = self.critics[k].backward(&cache, upstream.view());
            adam_step(&mut self.critics[k], &grads, &mut self.critic_opts[k]);
        }

        let (pi, pcache) = self.sample_policy(batch.s_e.view());
        let m = self.action_dim();
        let xa = concatenate![Axis(1), batch.s_e, pi.squashed];
        let ones = Array2::<f64>::ones((batch.len(), 1));
        let (q1, c1) = self.critics[0].forward_batch(xa.view());
        let (q2, c2) = self.critics[1].forward_batch(xa.view());
        let g1 = self.critics[0].input_gradient(&c1, ones.view());
        let g2 = self.critics[1].input_gradient(&c2, ones.view());
        let d = self.input_dim;
        let mut upstream = Array2::zeros((batch.len(), 2 * m));
        let mut policy_loss = 0.0;
        for r in 0..batch.len() {
            let (q, dq) = if q1[[r, 0]] <= q2[[r, 0]] {
                (q1[[r, 0]], g1.slice(s![r, d..]))
            } else {
                (q2[[r, 0]], g2.slice(s![r, d..]))
            };
            policy_loss += (alpha * pi.log_prob[r] - q) / n;
            for i in 0..m {
                let (g_mu, g_ls) = squashed_gaussian_grad(
                    pi.squashed[[r, i]],
                    pi.std[[r, i]],
                    pi.noise[[r, i]],
                    dq[i],
                    alpha,
                );
                upstream[[r, i]] = g_mu / n;
                upstream[[r, m + i]] = if pi.log_std_free[[r, i]] { g_ls / n } else { 0.0 };
            }
        }
        let (pgrads, _) = self.policy.backward(&pcache, upstream.view());
        adam_step(&mut self.policy, &pgrads, &mut self.policy_opt);

        let mean_log_prob = pi.log_prob.mean().unwrap_or(0.0);
        let alpha_grad = temperature_gradient(mean_log_prob, self.target_entropy);
        let alpha_loss = -self.log_alpha * (mean_log_prob + self.target_entropy);
        self.alpha_opt.step(&mut self.log_alpha, alpha_grad);

        for k in 0..2 {
            self.targets[k].polyak_from(&self.critics[k], self.config.tau);
        }

        let finite = self.policy.is_finite()
            && self.critics.iter().all(MlpParameters::is_finite)
            && self.targets.iter().all(MlpParameters::is_finite)
            && self.log_alpha.is_finite();
        if !finite {
            return Err(AacError::NonFinite("agent parameters after update"));
        }
        check_finite("losses", &[critic_loss, policy_loss, alpha_loss])?;
        Ok(UpdateReport {
            performed: true,
            critic_loss: critic_loss / 2.0,
            policy_loss,
            alpha_loss,
            alpha: self.alpha(),
        })
    }

    pub fn polyak_targets(&mut self) {
        for k in 0..2 {
            self.targets[k].polyak_from(&self.critics[k], self.config.tau);
        }
    }

    /// Networks in checkpoint order: policy, critic 1, critic 2, target 1, target 2.
    pub fn networks(&self) -> [&MlpParameters; 5] {
        [
            &self.policy,
            &self.critics[0],
            &self.critics[1],
            &self.targets[0],
            &self.targets[1],
        ]
    }

    pub fn save<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        crate::nn::checkpoint::write_agent(w, &self.networks(), self.log_alpha)
    }

    /// Restore networks and temperature; optimizer moments start fresh.
    pub fn load<R: std::io::Read>(&mut self, r: &mut R) -> Result<()> {
        let (nets, log_alpha) = crate::nn::checkpoint::read_agent(r)?;
        if nets.len() != 5 {
            return Err(AacError::Checkpoint(format!("expected 5 networks, found {}", nets.len())));
        }
        for (net, mine) in nets.iter().zip(self.networks()) {
            if net.sizes() != mine.sizes() {
                return Err(AacError::Checkpoint(format!(
                    "network shape {:?} does not match {:?}",
                    net.sizes(),
                    mine.sizes()
                )));
            }
        }
        let mut it = nets.into_iter();
        self.policy = it.next().unwrap();
        self.critics = [it.next().unwrap(), it.next().unwrap()];
        self.targets = [it.next().unwrap(), it.next().unwrap()];
        self.log_alpha = log_alpha;
        Ok(())
    }
}

impl Policy for SacAgent {
    fn act(&mut self, s_e: &[f64], deterministic: bool) -> Result<Vec<f64>> {
        self.sample_action(s_e, deterministic)
    }
}

/// Deterministic squashed-mean policy read from a checkpoint, without critics.
#[derive(Debug, Clone)]
pub struct FrozenPolicy {
    pub network: MlpParameters,
    pub action_center: Vec<f64>,
    pub action_half: Vec<f64>,
}

impl FrozenPolicy {
    pub fn from_agent(agent: &SacAgent) -> Self {
        let (c, h) = agent.action_scale();
        Self {
            network: agent.policy.clone(),
            action_center: c.to_vec(),
            action_half: h.to_vec(),
        }
    }
}

impl Policy for FrozenPolicy {
    fn act(&mut self, s_e: &[f64], _deterministic: bool) -> Result<Vec<f64>> {
        let out = self.network.forward(s_e)?;
        Ok(self
            .action_center
            .iter()
            .zip(&self.action_half)
            .zip(&out)
            .map(|((c, h), mu)| (c + h * mu.tanh()).clamp(c - h, c + h))
            .collect())
    }
}

/// `y = r + γ·(1 - done)·(min_q - α·log π)`.
pub fn soft_targets(
    rewards: &Array1<f64>,
    terminated: &Array1<f64>,
    min_q_next: &Array1<f64>,
    log_prob_next: &Array1<f64>,
    alpha: f64,
    gamma: f64,
) -> Array1<f64> {
    ndarray::Zip::from(rewards)
        .and(terminated)
        .and(min_q_next)
        .and(log_prob_next)
        .map_collect(|r, d, q, lp| r + gamma * (1.0 - d) * (q - alpha * lp))
}

/// `log(1 - tanh(u)^2)` in the overflow-free form `2·(ln 2 - u - softplus(-2u))`.
fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Per-dimension gradient of `α·log π(a) - Q(a)` with respect to the policy's
/// mean and log-std outputs, for a reparameterised sample
/// `a = tanh(μ + σ·ξ)`. `dq_da` is the critic's slope in squashed units.
pub fn squashed_gaussian_grad(squashed: f64, std: f64, noise: f64, dq_da: f64, alpha: f64) -> (f64, f64) {
    let dlogp_du = 2.0 * squashed;
    let dq_du = dq_da * (1.0 - squashed * squashed);
    let g_mu = alpha * dlogp_du - dq_du;
    let g_ls = alpha * (-1.0 + dlogp_du * std * noise) - dq_du * std * noise;
    (g_mu, g_ls)
}

/// Gradient of `-log α · (mean log π + H_target)` with respect to `log α`.
pub fn temperature_gradient(mean_log_prob: f64, target_entropy: f64) -> f64 {
    -(mean_log_prob + target_entropy)
}
