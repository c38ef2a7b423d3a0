//! Discrete-time unicycle model, input limits and the path timing law.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, ArcPath, Configuration};

/// Turn rates below this magnitude use the small-angle branch of [`step`].
pub const OMEGA_EPS: f64 = 1e-6;

/// Ego state; for the unicycle the state is the configuration itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EgoState(pub Configuration);

impl EgoState {
    pub fn config(&self) -> &Configuration {
        &self.0
    }
}

impl From<Configuration> for EgoState {
    fn from(c: Configuration) -> Self {
        Self(c)
    }
}

/// Speed and turn rate applied over one sample period.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EgoInput {
    pub v: f64,
    pub omega: f64,
}

impl EgoInput {
    pub fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }
}

/// Box limits on the ego inputs `(v, ω)` and the path velocity `u2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputBounds {
    pub v: [f64; 2],
    pub omega: [f64; 2],
    pub u2: [f64; 2],
}

impl Default for InputBounds {
    fn default() -> Self {
        Self {
            v: [-5.0, 10.0],
            omega: [-0.5, 0.5],
            u2: [-5.0, 10.0],
        }
    }
}

impl InputBounds {
    pub fn validate(&self) -> Result<()> {
        for (name, [lo, hi]) in [("v", self.v), ("omega", self.omega), ("u2", self.u2)] {
            if !(lo <= hi) {
                return Err(Error::InvalidConfig(format!(
                    "input bound {name} must satisfy lo <= hi, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    pub fn clip(&self, u: EgoInput) -> EgoInput {
        EgoInput {
            v: u.v.clamp(self.v[0], self.v[1]),
            omega: u.omega.clamp(self.omega[0], self.omega[1]),
        }
    }

    pub fn clip_u2(&self, u2: f64) -> f64 {
        u2.clamp(self.u2[0], self.u2[1])
    }

    pub fn contains(&self, u: EgoInput, u2: f64) -> bool {
        let inside = |x: f64, [lo, hi]: [f64; 2]| x >= lo && x <= hi;
        inside(u.v, self.v) && inside(u.omega, self.omega) && inside(u2, self.u2)
    }
}

/// Optional position box for the state constraint set; `None` axes are free.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateBounds {
    pub c1: Option<[f64; 2]>,
    pub c2: Option<[f64; 2]>,
}

impl StateBounds {
    /// Distance by which `x` lies outside the box (0 when inside).
    pub fn violation(&self, x: &EgoState) -> f64 {
        let excess = |v: f64, b: Option<[f64; 2]>| match b {
            Some([lo, hi]) => (lo - v).max(0.0) + (v - hi).max(0.0),
            None => 0.0,
        };
        excess(x.0.c1(), self.c1) + excess(x.0.c2(), self.c2)
    }
}

/// Advances the unicycle by one sample period `dt` under constant inputs.
///
/// For `|ω| ≥ OMEGA_EPS` this is the exact circular-arc update. Below the
/// threshold the arc chord is evaluated at the mid-step heading, which is the
/// `ω → 0` limit of the same expression and reduces to a straight line at
/// `ω = 0`.
pub fn step(x: &EgoState, u: EgoInput, dt: f64) -> EgoState {
    let theta = x.0.theta();
    let turn = u.omega * dt;
    let (d1, d2) = if u.omega.abs() < OMEGA_EPS {
        let mid = theta + 0.5 * turn;
        (u.v * dt * mid.cos(), u.v * dt * mid.sin())
    } else {
        let r = u.v / u.omega;
        (
            r * ((theta + turn).sin() - theta.sin()),
            r * (theta.cos() - (theta + turn).cos()),
        )
    };
    EgoState(x.0.offset(d1, d2, turn))
}

/// Timing law: advances the path parameter by the projection of the
/// displacement `u2·dt` onto the path tangent, clamped to the path interval.
pub fn advance_lambda(
    lambda: f64,
    u2: f64,
    theta_e: f64,
    theta_p: f64,
    dt: f64,
    path: &ArcPath,
) -> f64 {
    path.clamp(lambda + u2 * (theta_e - theta_p).cos() * dt)
}

/// Path-following error `(c1 - c1_p, c2 - c2_p, wrap(θ - θ_p), u2 - v_ref)`.
pub fn tracking_error(x: &EgoState, lambda: f64, u2: f64, path: &ArcPath, v_ref: f64) -> [f64; 4] {
    let p = path.eval(lambda);
    [
        x.0.c1() - p.c1(),
        x.0.c2() - p.c2(),
        wrap_angle(x.0.theta() - p.theta()),
        u2 - v_ref,
    ]
}
