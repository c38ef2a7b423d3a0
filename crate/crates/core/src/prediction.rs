//! Object motion prediction with linearly growing truncated-Gaussian
//! uncertainty, plus sampling and grid enumeration over the belief.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dynamics::{step, EgoInput, EgoState};
use crate::error::{Error, Result};
use crate::geometry::{Configuration, Position};

/// One realization of the object's uncertain kinematics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectSample {
    pub q: Position,
    pub v: f64,
}

/// Object belief at one prediction step: mean pose and speed with independent
/// truncated Gaussians on `c1`, `c2` and `v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectBelief {
    pub mean_config: Configuration,
    pub mean_v: f64,
    /// Standard deviations `(σ_c1, σ_c2, σ_v)`.
    pub sigma: [f64; 3],
    pub q_lo: Position,
    pub q_hi: Position,
    pub v_lo: f64,
    pub v_hi: f64,
}

impl ObjectBelief {
    /// Exact measurement: point mass in position, speed known up to the
    /// given truncation interval.
    pub fn measured(config: Configuration, v: f64, v_bounds: [f64; 2]) -> Result<Self> {
        let b = Self {
            mean_config: config,
            mean_v: v,
            sigma: [0.0; 3],
            q_lo: config.position(),
            q_hi: config.position(),
            v_lo: v_bounds[0],
            v_hi: v_bounds[1],
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let q = self.mean_config.position();
        for i in 0..2 {
            if !(self.q_lo[i] <= q[i] && q[i] <= self.q_hi[i]) {
                return Err(Error::InvalidConfig(format!(
                    "belief mean position {q:?} outside truncation box {:?}..{:?}",
                    self.q_lo, self.q_hi
                )));
            }
        }
        if !(self.v_lo <= self.mean_v && self.mean_v <= self.v_hi) {
            return Err(Error::InvalidConfig(format!(
                "belief mean speed {} outside [{}, {}]",
                self.mean_v, self.v_lo, self.v_hi
            )));
        }
        if self.sigma.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidConfig("belief std devs must be >= 0".into()));
        }
        Ok(())
    }

    pub fn mean_position(&self) -> Position {
        self.mean_config.position()
    }
}

/// Per-step increments of the standard deviations and truncation bounds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UncertaintyGrowth {
    /// Added to `(σ_c1, σ_c2, σ_v)` every step.
    pub q_diag: [f64; 3],
    /// Position box widening per side, per step.
    pub dq: [f64; 2],
    /// Speed interval widening per side, per step.
    pub dv: f64,
}

impl UncertaintyGrowth {
    pub fn validate(&self) -> Result<()> {
        let all = self.q_diag.iter().chain(self.dq.iter()).chain(std::iter::once(&self.dv));
        if all.into_iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::InvalidConfig("uncertainty increments must be >= 0".into()));
        }
        Ok(())
    }

    pub fn scaled(&self, n: f64) -> Self {
        Self {
            q_diag: self.q_diag.map(|x| x * n),
            dq: self.dq.map(|x| x * n),
            dv: self.dv * n,
        }
    }
}

/// Advances the belief mean one step with the object's constant inputs.
///
/// The position truncation box moves with the mean; its width and the
/// standard deviations are left as they are.
pub fn propagate_mean(belief: &ObjectBelief, u_o: EgoInput, dt: f64) -> ObjectBelief {
    let next = step(&EgoState(belief.mean_config), u_o, dt).0;
    let d = [next.c1() - belief.mean_config.c1(), next.c2() - belief.mean_config.c2()];
    let mut out = *belief;
    out.mean_config = next;
    out.mean_v = u_o.v;
    out.q_lo = [belief.q_lo[0] + d[0], belief.q_lo[1] + d[1]];
    out.q_hi = [belief.q_hi[0] + d[0], belief.q_hi[1] + d[1]];
    // Box translation rounds differently from the mean update; keep the mean
    // inside its own box.
    let q = next.position();
    for i in 0..2 {
        out.q_lo[i] = out.q_lo[i].min(q[i]);
        out.q_hi[i] = out.q_hi[i].max(q[i]);
    }
    out
}

/// Widens spreads and truncation bounds by one step of `g`.
pub fn grow(belief: &ObjectBelief, g: &UncertaintyGrowth) -> ObjectBelief {
    let mut out = *belief;
    for i in 0..3 {
        out.sigma[i] += g.q_diag[i];
    }
    for i in 0..2 {
        out.q_lo[i] -= g.dq[i];
        out.q_hi[i] += g.dq[i];
    }
    out.v_lo -= g.dv;
    out.v_hi += g.dv;
    out
}

/// Beliefs for steps `0..=horizon`, starting from the measured belief.
pub fn predict_horizon(
    belief0: &ObjectBelief,
    u_o: EgoInput,
    growth: &UncertaintyGrowth,
    dt: f64,
    horizon: usize,
) -> Vec<ObjectBelief> {
    let mut out = Vec::with_capacity(horizon + 1);
    out.push(*belief0);
    for n in 0..horizon {
        let next = grow(&propagate_mean(&out[n], u_o, dt), growth);
        out.push(next);
    }
    out
}

/// Gaussian `N(mean, sigma²)` truncated to `[lo, hi]`, sampled by inverting
/// the CDF on the truncated interval.
#[derive(Debug, Clone, Copy)]
pub struct TruncatedNormal {
    mean: f64,
    sigma: f64,
    lo: f64,
    hi: f64,
}

impl TruncatedNormal {
    pub fn new(mean: f64, sigma: f64, lo: f64, hi: f64) -> Self {
        Self { mean, sigma, lo, hi }
    }

    /// Maps a uniform draw `u ∈ [0, 1)` to a truncated-normal variate.
    pub fn quantile(&self, u: f64) -> f64 {
        if self.sigma <= 0.0 || self.lo >= self.hi {
            return self.mean.clamp(self.lo, self.hi);
        }
        let std = Normal::standard();
        let mut a = (self.lo - self.mean) / self.sigma;
        let mut b = (self.hi - self.mean) / self.sigma;
        // Work in the lower tail where the CDF has full relative precision.
        let flip = a > 0.0;
        if flip {
            (a, b) = (-b, -a);
        }
        let (fa, fb) = (std.cdf(a), std.cdf(b));
        let z = if fb > 1e-300 {
            std.inverse_cdf(fa + u * (fb - fa)).clamp(a, b)
        } else {
            // Deep in the tail the density is close to exponential in the
            // distance from the nearer bound.
            let rate = -b;
            let t = -(u * (-(rate * (b - a))).exp_m1()).ln_1p() / rate;
            (b - t).clamp(a, b)
        };
        let z = if flip { -z } else { z };
        (self.mean + self.sigma * z).clamp(self.lo, self.hi)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}

/// Draws `j` independent samples from the belief.
///
/// Each sample consumes exactly three uniforms from `rng`, so sample sets are
/// reproducible from the stream state alone.
pub fn sample<R: Rng + ?Sized>(belief: &ObjectBelief, j: usize, rng: &mut R) -> Vec<ObjectSample> {
    let q = belief.mean_position();
    let c1 = TruncatedNormal::new(q[0], belief.sigma[0], belief.q_lo[0], belief.q_hi[0]);
    let c2 = TruncatedNormal::new(q[1], belief.sigma[1], belief.q_lo[1], belief.q_hi[1]);
    let v = TruncatedNormal::new(belief.mean_v, belief.sigma[2], belief.v_lo, belief.v_hi);
    (0..j)
        .map(|_| ObjectSample {
            q: [c1.sample(rng), c2.sample(rng)],
            v: v.sample(rng),
        })
        .collect()
}

/// `n` evenly spaced points on `[lo, hi]` with both endpoints included; a
/// degenerate interval yields the single point `lo`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if lo >= hi || n < 2 {
        return vec![lo];
    }
    let last = (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * (i as f64 / last) })
        .collect()
}

/// Cartesian grid of `l` points per truncation interval, ordered with `c1`
/// outermost and `v` innermost.
pub fn grid(belief: &ObjectBelief, l: usize) -> Vec<ObjectSample> {
    let c1 = linspace(belief.q_lo[0], belief.q_hi[0], l);
    let c2 = linspace(belief.q_lo[1], belief.q_hi[1], l);
    let v = linspace(belief.v_lo, belief.v_hi, l);
    let mut out = Vec::with_capacity(c1.len() * c2.len() * v.len());
    for &a in &c1 {
        for &b in &c2 {
            for &s in &v {
                out.push(ObjectSample { q: [a, b], v: s });
            }
        }
    }
    out
}
