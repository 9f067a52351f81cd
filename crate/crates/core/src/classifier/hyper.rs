use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HYPER_DIM: usize = 7;

/// Boosted-tree hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperPoint {
    pub num_leaves: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub num_rounds: usize,
    pub min_samples_leaf: usize,
    pub feature_fraction: f64,
    pub bagging_fraction: f64,
}

/// Search-space bounds. Integers map linearly, the learning rate
/// logarithmically, fractions linearly.
pub mod bounds {
    pub const NUM_LEAVES: (usize, usize) = (2, 64);
    pub const MAX_DEPTH: (usize, usize) = (1, 12);
    pub const LEARNING_RATE: (f64, f64) = (0.01, 1.0);
    pub const NUM_ROUNDS: (usize, usize) = (5, 300);
    pub const MIN_SAMPLES_LEAF: (usize, usize) = (1, 64);
    pub const FEATURE_FRACTION: (f64, f64) = (0.2, 1.0);
    pub const BAGGING_FRACTION: (f64, f64) = (0.2, 1.0);
}

impl Default for HyperPoint {
    fn default() -> Self {
        HyperPoint {
            num_leaves: 31,
            max_depth: 8,
            learning_rate: 0.1,
            num_rounds: 100,
            min_samples_leaf: 20,
            feature_fraction: 1.0,
            bagging_fraction: 1.0,
        }
    }
}

fn round_half_up(x: f64) -> f64 {
    (x + 0.5).floor()
}

fn int_to_unit(v: usize, (lo, hi): (usize, usize)) -> f64 {
    (v as f64 - lo as f64) / (hi - lo) as f64
}

fn unit_to_int(u: f64, (lo, hi): (usize, usize)) -> usize {
    lo + round_half_up(u.clamp(0.0, 1.0) * (hi - lo) as f64) as usize
}

fn real_to_unit(v: f64, (lo, hi): (f64, f64)) -> f64 {
    (v - lo) / (hi - lo)
}

fn unit_to_real(u: f64, (lo, hi): (f64, f64)) -> f64 {
    lo + u.clamp(0.0, 1.0) * (hi - lo)
}

impl HyperPoint {
    /// Image in the unit cube. Values outside the search bounds map outside
    /// `[0, 1]`; [`HyperPoint::denormalize`] clamps them back.
    pub fn normalize(&self) -> [f64; HYPER_DIM] {
        let (lr_lo, lr_hi) = bounds::LEARNING_RATE;
        [
            int_to_unit(self.num_leaves, bounds::NUM_LEAVES),
            int_to_unit(self.max_depth, bounds::MAX_DEPTH),
            (self.learning_rate.ln() - lr_lo.ln()) / (lr_hi.ln() - lr_lo.ln()),
            int_to_unit(self.num_rounds, bounds::NUM_ROUNDS),
            int_to_unit(self.min_samples_leaf, bounds::MIN_SAMPLES_LEAF),
            real_to_unit(self.feature_fraction, bounds::FEATURE_FRACTION),
            real_to_unit(self.bagging_fraction, bounds::BAGGING_FRACTION),
        ]
    }

    /// Clamp every coordinate to `[0, 1]` and map back; integers round half up.
    pub fn denormalize(u: &[f64; HYPER_DIM]) -> HyperPoint {
        let (lr_lo, lr_hi) = bounds::LEARNING_RATE;
        HyperPoint {
            num_leaves: unit_to_int(u[0], bounds::NUM_LEAVES),
            max_depth: unit_to_int(u[1], bounds::MAX_DEPTH),
            learning_rate: (lr_lo.ln() + u[2].clamp(0.0, 1.0) * (lr_hi.ln() - lr_lo.ln())).exp(),
            num_rounds: unit_to_int(u[3], bounds::NUM_ROUNDS),
            min_samples_leaf: unit_to_int(u[4], bounds::MIN_SAMPLES_LEAF),
            feature_fraction: unit_to_real(u[5], bounds::FEATURE_FRACTION),
            bagging_fraction: unit_to_real(u[6], bounds::BAGGING_FRACTION),
        }
    }

    /// Projection onto the search box; the fixed point of
    /// `denormalize(normalize(_))`.
    pub fn clamped(&self) -> HyperPoint {
        let ci = |v: usize, (lo, hi): (usize, usize)| v.clamp(lo, hi);
        let cr = |v: f64, (lo, hi): (f64, f64)| v.clamp(lo, hi);
        HyperPoint {
            num_leaves: ci(self.num_leaves, bounds::NUM_LEAVES),
            max_depth: ci(self.max_depth, bounds::MAX_DEPTH),
            learning_rate: cr(self.learning_rate, bounds::LEARNING_RATE),
            num_rounds: ci(self.num_rounds, bounds::NUM_ROUNDS),
            min_samples_leaf: ci(self.min_samples_leaf, bounds::MIN_SAMPLES_LEAF),
            feature_fraction: cr(self.feature_fraction, bounds::FEATURE_FRACTION),
            bagging_fraction: cr(self.bagging_fraction, bounds::BAGGING_FRACTION),
        }
    }

    /// Domain check for training (not the search box).
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidHyper(msg.to_string()));
        if self.num_leaves < 2 {
            return bad("num_leaves must be >= 2");
        }
        if self.max_depth < 1 {
            return bad("max_depth must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must be in (0, 1]");
        }
        if self.num_rounds < 1 {
            return bad("num_rounds must be >= 1");
        }
        if self.min_samples_leaf < 1 {
            return bad("min_samples_leaf must be >= 1");
        }
        if !(self.feature_fraction > 0.0 && self.feature_fraction <= 1.0) {
            return bad("feature_fraction must be in (0, 1]");
        }
        if !(self.bagging_fraction > 0.0 && self.bagging_fraction <= 1.0) {
            return bad("bagging_fraction must be in (0, 1]");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &HyperPoint, b: &HyperPoint) -> bool {
        a.num_leaves == b.num_leaves
            && a.max_depth == b.max_depth
            && a.num_rounds == b.num_rounds
            && a.min_samples_leaf == b.min_samples_leaf
            && (a.learning_rate - b.learning_rate).abs() <= 1e-12 * b.learning_rate
            && (a.feature_fraction - b.feature_fraction).abs() <= 1e-12
            && (a.bagging_fraction - b.bagging_fraction).abs() <= 1e-12
    }

    #[test]
    fn default_is_valid_and_inside_box() {
        let d = HyperPoint::default();
        d.validate().unwrap();
        assert!(d.normalize().iter().all(|u| (0.0..=1.0).contains(u)));
        assert!(close(&HyperPoint::denormalize(&d.normalize()), &d));
    }

    #[test]
    fn corners() {
        let lo = HyperPoint::denormalize(&[0.0; 7]);
        assert_eq!(lo.num_leaves, 2);
        assert_eq!(lo.max_depth, 1);
        assert!((lo.learning_rate - 0.01).abs() < 1e-15);
        let hi = HyperPoint::denormalize(&[1.0; 7]);
        assert_eq!(hi.num_rounds, 300);
        assert!((hi.learning_rate - 1.0).abs() < 1e-12);
        assert_eq!(HyperPoint::denormalize(&[-3.0; 7]), lo);
        assert_eq!(HyperPoint::denormalize(&[7.0; 7]), hi);
    }

    #[test]
    fn half_up_rounding() {
        // num_leaves spans 62 steps; u = 0.5/62 sits exactly on a half step
        let mut u = [0.0; 7];
        u[0] = 0.5 / 62.0;
        assert_eq!(HyperPoint::denormalize(&u).num_leaves, 3);
    }

    #[test]
    fn rejects_invalid() {
        let h = HyperPoint { num_rounds: 0, ..HyperPoint::default() };
        assert!(matches!(h.validate(), Err(Error::InvalidHyper(_))));
        let h = HyperPoint { learning_rate: 0.0, ..HyperPoint::default() };
        assert!(h.validate().is_err());
    }

    proptest! {
        #[test]
        fn roundtrip_is_clamp(
            leaves in 0usize..100, depth in 0usize..20, lr in 0.001f64..2.0,
            rounds in 0usize..400, msl in 0usize..100, ff in 0.0f64..1.5, bf in 0.0f64..1.5,
        ) {
            let h = HyperPoint {
                num_leaves: leaves, max_depth: depth, learning_rate: lr, num_rounds: rounds,
                min_samples_leaf: msl, feature_fraction: ff, bagging_fraction: bf,
            };
            let back = HyperPoint::denormalize(&h.normalize());
            prop_assert!(close(&back, &h.clamped()), "{back:?} vs {:?}", h.clamped());
            back.validate().unwrap();
        }
    }
}
