//! Cosine-scheduled Gaussian forward process over the unit hypercube.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::classifier::HYPER_DIM;
use crate::error::{Error, Result};

pub type Point = [f64; HYPER_DIM];

/// `g_t = cos²((π/2)·t/T)`, `D_t = 1 - g_t`, `D̃_t = Π_{i≤t} D_i`.
///
/// The step interval is measured from the initial step, so `g_1` is close
/// to 1 (almost pure noise) and `g_T = 0` (the step is the identity).
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule {
    steps: usize,
    d_tilde: Vec<f64>,
}

impl DiffusionSchedule {
    pub fn new(steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidHyper("diffusion needs at least one step".into()));
        }
        let mut d_tilde = Vec::with_capacity(steps + 1);
        d_tilde.push(1.0);
        for t in 1..=steps {
            let prev = d_tilde[t - 1];
            d_tilde.push(prev * (1.0 - g_at(t, steps)));
        }
        Ok(DiffusionSchedule { steps, d_tilde })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn g(&self, t: usize) -> f64 {
        g_at(t, self.steps)
    }

    pub fn d(&self, t: usize) -> f64 {
        1.0 - self.g(t)
    }

    /// Cumulative product of `D_1..D_t`; `D̃_0 = 1`.
    pub fn d_tilde(&self, t: usize) -> f64 {
        self.d_tilde[t]
    }

    fn check(&self, t: usize) {
        assert!((1..=self.steps).contains(&t), "step {t} outside 1..={}", self.steps);
    }
}

// cos(π/2·x) written as sin(π/2·(1-x)) so the last step is exactly zero
fn g_at(t: usize, steps: usize) -> f64 {
    let s = (FRAC_PI_2 * (steps - t.min(steps)) as f64 / steps as f64).sin();
    s * s
}

/// One chained step: `√D_t·v + √g_t·ε`. The result is not clamped.
pub fn forward_step(v_prev: &Point, t: usize, sched: &DiffusionSchedule, noise: &Point) -> Point {
    sched.check(t);
    let (a, b) = (sched.d(t).sqrt(), sched.g(t).sqrt());
    std::array::from_fn(|i| a * v_prev[i] + b * noise[i])
}

/// Closed-form marginal after `t` steps: `√D̃_t·v0 + √(1-D̃_t)·ε`.
pub fn marginal_sample(v0: &Point, t: usize, sched: &DiffusionSchedule, noise: &Point) -> Point {
    sched.check(t);
    let dt = sched.d_tilde(t);
    let (a, b) = (dt.sqrt(), (1.0 - dt).sqrt());
    std::array::from_fn(|i| a * v0[i] + b * noise[i])
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Point {
    std::array::from_fn(|_| rng.sample(StandardNormal))
}
