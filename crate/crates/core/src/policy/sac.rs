//! Soft actor-critic with a tanh-squashed Gaussian actor and twin critics.
//!
//! Actions live in `[-1, 1]^2` inside the learner and are scaled by `f_max`
//! at the environment boundary. All gradients are computed by hand through
//! [`Mlp::backward`].

use std::f64::consts::{LN_2, PI};

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::nn::{c, Adam, AdamConfig, Mlp, MlpCache, MlpGrads, Scalar, ScalarAdam};
use super::replay::Transition;

pub const ACTION_DIM: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SacConfig {
    pub gamma: f64,
    pub batch: usize,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub lr_alpha: f64,
    pub total_transitions: usize,
    pub hidden: Vec<usize>,
    pub polyak: f64,
    pub target_entropy: f64,
    pub init_log_alpha: f64,
    pub warmup: usize,
    pub replay_capacity: usize,
    pub log_std_min: f64,
    pub log_std_max: f64,
    /// Half-width of the follow-point box (m).
    pub f_max: f64,
    /// Learning-curve sampling period in transitions.
    pub curve_interval: usize,
    /// Number of most recent episodes averaged per curve point.
    pub curve_window: usize,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            batch: 256,
            lr_actor: 3e-4,
            lr_critic: 1e-3,
            lr_alpha: 1e-3,
            total_transitions: 100_000,
            hidden: vec![64, 64],
            polyak: 0.005,
            target_entropy: -(ACTION_DIM as f64),
            init_log_alpha: 0.0,
            warmup: 1000,
            replay_capacity: 100_000,
            log_std_min: -20.0,
            log_std_max: 2.0,
            f_max: 5.0,
            curve_interval: 1000,
            curve_window: 20,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<(), SacError> {
        let bad = |m: &str| Err(SacError::InvalidConfig(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if self.batch == 0 || self.replay_capacity == 0 || self.curve_interval == 0 || self.curve_window == 0 {
            return bad("batch, replay_capacity, curve_interval and curve_window must be positive");
        }
        if !(self.lr_actor > 0.0 && self.lr_critic > 0.0 && self.lr_alpha > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(self.polyak > 0.0 && self.polyak <= 1.0) {
            return bad("polyak must lie in (0, 1]");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden sizes must be non-empty and positive");
        }
        if !(self.f_max > 0.0) || !(self.log_std_min < self.log_std_max) {
            return bad("f_max must be positive and log_std_min < log_std_max");
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SacError {
    #[error("non-finite {which} loss; update skipped")]
    NonFiniteLoss { which: &'static str },
    #[error("invalid SAC configuration: {0}")]
    InvalidConfig(String),
    #[error("batch has {got} transitions, expected {expected}")]
    BatchSize { got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SacLosses {
    pub critic1: f64,
    pub critic2: f64,
    pub actor: f64,
    pub alpha: f64,
}

/// Squashed-Gaussian policy network: outputs `[mean(2), log_std(2)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Actor<T> {
    pub net: Mlp<T>,
    pub log_std_min: f64,
    pub log_std_max: f64,
}

/// Reparameterized sample with everything needed for backpropagation.
struct ActorSample<T> {
    cache: MlpCache<T>,
    raw_log_std: Array2<T>,
    std: Array2<T>,
    u: Array2<T>,
    action: Array2<T>,
    logp: Array1<T>,
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl<T: Scalar> Actor<T> {
    pub fn new<R: Rng>(obs_dim: usize, hidden: &[usize], cfg: &SacConfig, rng: &mut R) -> Self {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(2 * ACTION_DIM);
        Self {
            net: Mlp::new(&sizes, rng),
            log_std_min: cfg.log_std_min,
            log_std_max: cfg.log_std_max,
        }
    }

    /// `tanh(mean)`, the squashed mean action in `[-1, 1]^2`.
    pub fn deterministic(&self, obs: ArrayView2<T>) -> Array2<T> {
        self.net.forward(obs).slice(s![.., ..ACTION_DIM]).mapv(|m| m.tanh())
    }

    /// Squashed sample `tanh(mean + std * noise)` and its log-density.
    pub fn sample(&self, obs: ArrayView2<T>, noise: ArrayView2<T>) -> (Array2<T>, Array1<T>) {
        let s = self.sample_cached(obs, noise);
        (s.action, s.logp)
    }

    fn sample_cached(&self, obs: ArrayView2<T>, noise: ArrayView2<T>) -> ActorSample<T> {
        let (out, cache) = self.net.forward_cached(obs);
        let mean = out.slice(s![.., ..ACTION_DIM]);
        let raw_log_std = out.slice(s![.., ACTION_DIM..]).to_owned();
        let lo: T = c(self.log_std_min);
        let hi: T = c(self.log_std_max);
        let log_std = raw_log_std.mapv(|x| x.max(lo).min(hi));
        let std = log_std.mapv(|x| x.exp());
        let u = &mean + &(&std * &noise);
        let action = u.mapv(|x| x.tanh());

        let half_ln_2pi = 0.5 * (2.0 * PI).ln();
        let b = obs.nrows();
        let mut logp = Array1::<T>::zeros(b);
        for i in 0..b {
            let mut acc = 0.0;
            for d in 0..ACTION_DIM {
                let e = noise[[i, d]].to_f64().unwrap_or(f64::NAN);
                let ls = log_std[[i, d]].to_f64().unwrap_or(f64::NAN);
                let ui = u[[i, d]].to_f64().unwrap_or(f64::NAN);
                // log(1 - tanh(u)^2) = 2 (ln 2 - u - softplus(-2u))
                acc += -0.5 * e * e - ls - half_ln_2pi - 2.0 * (LN_2 - ui - softplus(-2.0 * ui));
            }
            logp[i] = c(acc);
        }
        ActorSample { cache, raw_log_std, std, u, action, logp }
    }
}

/// Mini-batch in learner units (actions normalized to `[-1, 1]`).
#[derive(Debug, Clone)]
pub struct Batch<T> {
    pub obs: Array2<T>,
    pub act: Array2<T>,
    pub rew: Array1<T>,
    pub next_obs: Array2<T>,
    pub not_done: Array1<T>,
}

impl<T: Scalar> Batch<T> {
    pub fn from_transitions(ts: &[&Transition], f_max: f64) -> Self {
        let b = ts.len();
        let dim = ts.first().map_or(0, |t| t.obs.len());
        let mut obs = Array2::zeros((b, dim));
        let mut next_obs = Array2::zeros((b, dim));
        let mut act = Array2::zeros((b, ACTION_DIM));
        let mut rew = Array1::zeros(b);
        let mut not_done = Array1::zeros(b);
        for (i, t) in ts.iter().enumerate() {
            for j in 0..dim {
                obs[[i, j]] = c(t.obs[j]);
                next_obs[[i, j]] = c(t.next_obs[j]);
            }
            act[[i, 0]] = c(t.action.fx / f_max);
            act[[i, 1]] = c(t.action.fy / f_max);
            rew[i] = c(t.reward);
            not_done[i] = if t.done { T::zero() } else { T::one() };
        }
        Self { obs, act, rew, next_obs, not_done }
    }

    pub fn len(&self) -> usize {
        self.rew.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rew.is_empty()
    }
}

/// Standard-normal noise used by one update: for the next-state action in the
/// critic target and for the reparameterized actor loss.
#[derive(Debug, Clone)]
pub struct UpdateNoise<T> {
    pub next: Array2<T>,
    pub current: Array2<T>,
}

impl<T: Scalar> UpdateNoise<T> {
    pub fn sample<R: Rng>(batch: usize, rng: &mut R) -> Self {
        let mut draw = || Array2::from_shape_fn((batch, ACTION_DIM), |_| c(rng.sample::<f64, _>(StandardNormal)));
        let next = draw();
        let current = draw();
        Self { next, current }
    }
}

/// Losses and parameter gradients of one update, before any step is taken.
#[derive(Debug, Clone)]
pub struct SacGradients<T> {
    pub losses: SacLosses,
    pub critic: [MlpGrads<T>; 2],
    pub actor: MlpGrads<T>,
    pub log_alpha: f64,
}

#[derive(Debug, Clone)]
pub struct SacAgent<T> {
    pub cfg: SacConfig,
    pub obs_dim: usize,
    pub actor: Actor<T>,
    pub critics: [Mlp<T>; 2],
    pub targets: [Mlp<T>; 2],
    pub log_alpha: f64,
    opt_actor: Adam<T>,
    opt_critics: [Adam<T>; 2],
    opt_alpha: ScalarAdam,
}

fn critic_input<T: Scalar>(obs: ArrayView2<T>, act: ArrayView2<T>) -> Array2<T> {
    concatenate![Axis(1), obs, act]
}

impl<T: Scalar> SacAgent<T> {
    pub fn new<R: Rng>(obs_dim: usize, cfg: SacConfig, rng: &mut R) -> Self {
        let actor = Actor::new(obs_dim, &cfg.hidden, &cfg, rng);
        let mut sizes = vec![obs_dim + ACTION_DIM];
        sizes.extend_from_slice(&cfg.hidden);
        sizes.push(1);
        let critics = [Mlp::new(&sizes, rng), Mlp::new(&sizes, rng)];
        let targets = critics.clone();
        Self {
            opt_actor: Adam::new(&actor.net, AdamConfig::with_lr(cfg.lr_actor)),
            opt_critics: [
                Adam::new(&critics[0], AdamConfig::with_lr(cfg.lr_critic)),
                Adam::new(&critics[1], AdamConfig::with_lr(cfg.lr_critic)),
            ],
            opt_alpha: ScalarAdam::new(AdamConfig::with_lr(cfg.lr_alpha)),
            log_alpha: cfg.init_log_alpha,
            obs_dim,
            actor,
            critics,
            targets,
            cfg,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    /// Soft Bellman targets `r + gamma (1 - done) (min Q_targ - alpha log pi)`.
    pub fn critic_targets(&self, batch: &Batch<T>, noise_next: ArrayView2<T>) -> Array1<T> {
        let (a_next, logp_next) = self.actor.sample(batch.next_obs.view(), noise_next);
        let x = critic_input(batch.next_obs.view(), a_next.view());
        let q1 = self.targets[0].forward(x.view());
        let q2 = self.targets[1].forward(x.view());
        let alpha: T = c(self.alpha());
        let gamma: T = c(self.cfg.gamma);
        let mut y = Array1::zeros(batch.len());
        for i in 0..batch.len() {
            let soft = q1[[i, 0]].min(q2[[i, 0]]) - alpha * logp_next[i];
            y[i] = batch.rew[i] + gamma * batch.not_done[i] * soft;
        }
        y
    }

    /// Mean squared Bellman error of one critic and its gradient.
    pub fn critic_loss(critic: &Mlp<T>, batch: &Batch<T>, targets: &Array1<T>) -> (f64, MlpGrads<T>) {
        let x = critic_input(batch.obs.view(), batch.act.view());
        let (q, cache) = critic.forward_cached(x.view());
        let n: T = c(batch.len() as f64);
        let two: T = c(2.0);
        let mut loss = 0.0;
        let mut g = Array2::zeros((batch.len(), 1));
        for i in 0..batch.len() {
            let r = q[[i, 0]] - targets[i];
            loss += r.to_f64().unwrap_or(f64::NAN).powi(2);
            g[[i, 0]] = two * r / n;
        }
        let mut grads = critic.zero_grads();
        critic.backward(&cache, g, Some(&mut grads), false);
        (loss / batch.len() as f64, grads)
    }

    /// Reparameterized actor loss `mean(alpha log pi - min Q)` with its
    /// gradient; also returns the per-sample log-densities.
    pub fn actor_loss(&self, obs: ArrayView2<T>, noise: ArrayView2<T>) -> (f64, MlpGrads<T>, Array1<T>) {
        let b = obs.nrows();
        let sample = self.actor.sample_cached(obs, noise);
        let x = critic_input(obs, sample.action.view());
        let (q1, c1) = self.critics[0].forward_cached(x.view());
        let (q2, c2) = self.critics[1].forward_cached(x.view());
        let alpha = self.alpha();
        let inv_b = 1.0 / b as f64;

        let mut loss = 0.0;
        let mut g1 = Array2::<T>::zeros((b, 1));
        let mut g2 = Array2::<T>::zeros((b, 1));
        for i in 0..b {
            let (a, bq) = (q1[[i, 0]], q2[[i, 0]]);
            let qmin = if a <= bq {
                g1[[i, 0]] = c(-inv_b);
                a
            } else {
                g2[[i, 0]] = c(-inv_b);
                bq
            };
            loss += alpha * sample.logp[i].to_f64().unwrap_or(f64::NAN) - qmin.to_f64().unwrap_or(f64::NAN);
        }
        loss *= inv_b;

        let gin1 = self.critics[0].backward(&c1, g1, None, true).expect("input grad");
        let gin2 = self.critics[1].backward(&c2, g2, None, true).expect("input grad");
        let dq_da = &gin1.slice(s![.., self.obs_dim..]) + &gin2.slice(s![.., self.obs_dim..]);

        let alpha_b: T = c(alpha * inv_b);
        let two: T = c(2.0);
        let one = T::one();
        let lo: T = c(self.actor.log_std_min);
        let hi: T = c(self.actor.log_std_max);
        let mut grad_out = Array2::<T>::zeros((b, 2 * ACTION_DIM));
        for i in 0..b {
            for d in 0..ACTION_DIM {
                let a = sample.action[[i, d]];
                let u = sample.u[[i, d]];
                // d logp / du = 2 tanh(u); d a / du = 1 - a^2
                let g_u = dq_da[[i, d]] * (one - a * a) + alpha_b * two * u.tanh();
                grad_out[[i, d]] = g_u;
                let raw = sample.raw_log_std[[i, d]];
                let g_ls = g_u * sample.std[[i, d]] * noise[[i, d]] - alpha_b;
                grad_out[[i, ACTION_DIM + d]] = if raw > lo && raw < hi { g_ls } else { T::zero() };
            }
        }
        let mut grads = self.actor.net.zero_grads();
        self.actor.net.backward(&sample.cache, grad_out, Some(&mut grads), false);
        (loss, grads, sample.logp)
    }

    /// Temperature loss `-log_alpha * mean(log pi + target_entropy)` and its
    /// derivative in `log_alpha`.
    pub fn alpha_loss(log_alpha: f64, logp: &Array1<T>, target_entropy: f64) -> (f64, f64) {
        let m = logp.iter().map(|x| x.to_f64().unwrap_or(f64::NAN) + target_entropy).sum::<f64>() / logp.len() as f64;
        (-log_alpha * m, -m)
    }

    /// All losses and gradients at the current parameters.
    pub fn gradients(&self, batch: &Batch<T>, noise: &UpdateNoise<T>) -> SacGradients<T> {
        let y = self.critic_targets(batch, noise.next.view());
        let (l1, g1) = Self::critic_loss(&self.critics[0], batch, &y);
        let (l2, g2) = Self::critic_loss(&self.critics[1], batch, &y);
        let (la, ga, logp) = self.actor_loss(batch.obs.view(), noise.current.view());
        let (lt, gt) = Self::alpha_loss(self.log_alpha, &logp, self.cfg.target_entropy);
        SacGradients {
            losses: SacLosses { critic1: l1, critic2: l2, actor: la, alpha: lt },
            critic: [g1, g2],
            actor: ga,
            log_alpha: gt,
        }
    }

    /// One gradient step on both critics, the actor and the temperature,
    /// followed by the polyak update of the target critics. Nothing is
    /// modified when any loss is non-finite.
    pub fn update_with_noise(&mut self, batch: &Batch<T>, noise: &UpdateNoise<T>) -> Result<SacLosses, SacError> {
        let g = self.gradients(batch, noise);
        let l = g.losses;
        for (which, v) in [("critic1", l.critic1), ("critic2", l.critic2), ("actor", l.actor), ("alpha", l.alpha)] {
            if !v.is_finite() {
                return Err(SacError::NonFiniteLoss { which });
            }
        }
        let [gc1, gc2] = g.critic;
        self.opt_critics[0].apply(&mut self.critics[0], &gc1);
        self.opt_critics[1].apply(&mut self.critics[1], &gc2);
        self.opt_actor.apply(&mut self.actor.net, &g.actor);
        self.opt_alpha.apply(&mut self.log_alpha, g.log_alpha);
        let tau: T = c(self.cfg.polyak);
        for (t, o) in self.targets.iter_mut().zip(&self.critics) {
            t.polyak_from(o, tau);
        }
        Ok(l)
    }

    pub fn update<R: Rng>(&mut self, transitions: &[&Transition], rng: &mut R) -> Result<SacLosses, SacError> {
        if transitions.len() != self.cfg.batch {
            return Err(SacError::BatchSize { got: transitions.len(), expected: self.cfg.batch });
        }
        let batch = Batch::from_transitions(transitions, self.cfg.f_max);
        let noise = UpdateNoise::sample(batch.len(), rng);
        self.update_with_noise(&batch, &noise)
    }

    /// Action in `[-1, 1]^2` for a single feature vector.
    pub fn act_normalized<R: Rng>(&self, features: &[f64], stochastic: bool, rng: &mut R) -> [f64; 2] {
        let obs = Array2::from_shape_fn((1, features.len()), |(_, j)| c::<T>(features[j]));
        let a = if stochastic {
            let noise = Array2::from_shape_fn((1, ACTION_DIM), |_| c::<T>(rng.sample::<f64, _>(StandardNormal)));
            self.actor.sample(obs.view(), noise.view()).0
        } else {
            self.actor.deterministic(obs.view())
        };
        [a[[0, 0]].to_f64().unwrap_or(0.0), a[[0, 1]].to_f64().unwrap_or(0.0)]
    }
}
