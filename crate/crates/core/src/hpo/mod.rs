//! Two-stage hyperparameter search.
//!
//! Stage 1 evaluates uniformly random points and fits a surrogate network
//! to the observed losses. Stage 2 perturbs the best points with the
//! closed-form diffusion marginal, ranks the perturbations by surrogate
//! prediction and spends the remaining budget verifying the most promising
//! ones with real training runs.

mod diffusion;
mod evalnet;

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use diffusion::{forward_step, marginal_sample, standard_normal, DiffusionSchedule, Point};
pub use evalnet::{train_eval_net, EvalNet, HIDDEN, PARAMS};

use crate::classifier::{cross_entropy, train, HyperPoint, LabeledPair, HYPER_DIM};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, substream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HpoConfig {
    pub budget: usize,
    pub k: usize,
    pub steps: usize,
    pub seed: u64,
    /// Marginal draws per seed point and step.
    pub draws_per_step: usize,
    pub epochs: usize,
    /// Surrogate refit interval during stage 2, in verified points.
    pub refit_every: usize,
}

impl Default for HpoConfig {
    fn default() -> Self {
        HpoConfig { budget: 128, k: 64, steps: 8, seed: 0, draws_per_step: 2, epochs: 2000, refit_every: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub point: HyperPoint,
    pub loss: f64,
    pub stage: u8,
}

#[derive(Debug, Clone)]
pub struct HpoOutcome {
    pub best: HyperPoint,
    pub best_loss: f64,
    /// One entry per true-loss evaluation, in evaluation order.
    pub history: Vec<Evaluation>,
    /// Seed points (normalized) with their losses, ascending by loss.
    pub seeds: Vec<(Point, f64)>,
}

/// Number of stage-1 points kept as diffusion seeds.
pub fn seed_count(k: usize) -> usize {
    (k / 10).max(3).min(k)
}

/// Validation cross-entropy of a model trained with `h`.
pub fn true_loss(train_set: &[LabeledPair], val: &[LabeledPair], h: &HyperPoint, seed: u64) -> Result<f64> {
    let m = train(train_set, h, seed)?;
    cross_entropy(val, &m)
}

pub fn optimize(
    train_set: &[LabeledPair],
    val: &[LabeledPair],
    cfg: &HpoConfig,
) -> Result<HpoOutcome> {
    let train_seed = derive_seed(cfg.seed, "hpo.train");
    optimize_with(|h| true_loss(train_set, val, h, train_seed), cfg)
}

fn key(h: &HyperPoint) -> [u64; HYPER_DIM] {
    [
        h.num_leaves as u64,
        h.max_depth as u64,
        h.learning_rate.to_bits(),
        h.num_rounds as u64,
        h.min_samples_leaf as u64,
        h.feature_fraction.to_bits(),
        h.bagging_fraction.to_bits(),
    ]
}

fn clamp01(p: &Point) -> Point {
    std::array::from_fn(|i| p[i].clamp(0.0, 1.0))
}

struct Search<F> {
    objective: F,
    cache: HashMap<[u64; HYPER_DIM], f64>,
    history: Vec<Evaluation>,
    samples: Vec<(Point, f64)>,
}

impl<F: FnMut(&HyperPoint) -> Result<f64>> Search<F> {
    fn evaluate(&mut self, u: Point, stage: u8) -> Result<()> {
        let point = HyperPoint::denormalize(&u);
        let loss = match self.cache.get(&key(&point)) {
            Some(&l) => l,
            None => {
                let l = (self.objective)(&point)?;
                self.cache.insert(key(&point), l);
                l
            }
        };
        self.history.push(Evaluation { point, loss, stage });
        self.samples.push((point.normalize(), loss));
        Ok(())
    }
}

/// Search driver over an arbitrary objective.
pub fn optimize_with<F>(objective: F, cfg: &HpoConfig) -> Result<HpoOutcome>
where
    F: FnMut(&HyperPoint) -> Result<f64>,
{
    if cfg.k < 2 || cfg.budget < cfg.k {
        return Err(Error::BudgetTooSmall { budget: cfg.budget, k: cfg.k });
    }
    let sched = DiffusionSchedule::new(cfg.steps)?;
    let mut s = Search { objective, cache: HashMap::new(), history: Vec::new(), samples: Vec::new() };

    let mut uniform = substream(cfg.seed, "hpo.uniform");
    for _ in 0..cfg.k {
        let u: Point = std::array::from_fn(|_| uniform.random());
        s.evaluate(u, 1)?;
    }

    let mut ranked = s.samples.clone();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
    ranked.truncate(seed_count(cfg.k));
    let seeds = ranked;

    let mut noise = substream(cfg.seed, "hpo.noise");
    let mut pool: Vec<Point> = Vec::new();
    let mut net: Option<EvalNet> = None;
    let mut since_fit = usize::MAX;
    let mut refits = 0u64;
    while s.history.len() < cfg.budget {
        if since_fit >= cfg.refit_every.max(1) || net.is_none() {
            let fit_seed = derive_seed(cfg.seed, &format!("hpo.net.{refits}"));
            net = Some(train_eval_net(EvalNet::new(fit_seed), &s.samples, cfg.epochs, fit_seed)?);
            since_fit = 0;
            refits += 1;
        }
        pool.retain(|u| !s.cache.contains_key(&key(&HyperPoint::denormalize(u))));
        if pool.is_empty() {
            for _ in 0..4 {
                for (v0, _) in &seeds {
                    for t in 1..=sched.steps() {
                        for _ in 0..cfg.draws_per_step {
                            let eps = standard_normal(&mut noise);
                            pool.push(clamp01(&marginal_sample(v0, t, &sched, &eps)));
                        }
                    }
                }
                pool.retain(|u| !s.cache.contains_key(&key(&HyperPoint::denormalize(u))));
                if !pool.is_empty() {
                    break;
                }
            }
            if pool.is_empty() {
                pool.push(std::array::from_fn(|_| uniform.random()));
            }
        }
        let net_ref = net.as_ref().expect("surrogate fitted above");
        let (best_idx, _) = pool
            .iter()
            .map(|u| net_ref.predict(u))
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, p)| if p < acc.1 { (i, p) } else { acc });
        let u = pool.swap_remove(best_idx);
        s.evaluate(u, 2)?;
        since_fit += 1;
    }

    let best = s
        .history
        .iter()
        .fold(None::<&Evaluation>, |acc, e| match acc {
            Some(b) if b.loss <= e.loss => Some(b),
            _ => Some(e),
        })
        .expect("budget >= 2");
    Ok(HpoOutcome { best: best.point, best_loss: best.loss, history: s.history, seeds })
}
