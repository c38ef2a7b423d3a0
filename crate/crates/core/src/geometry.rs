//! Planar configurations, circular occupancy and the constant-curvature
//! reference path.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planar position `(c1, c2)` in meters.
pub type Position = [f64; 2];

/// Curvatures below this magnitude are treated as a straight line.
pub const STRAIGHT_CURVATURE_EPS: f64 = 1e-9;

/// Maps an angle into `[0, 2π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let a = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if a >= TAU {
        0.0
    } else {
        a
    }
}

/// Maps an angle difference into `(-π, π]`.
pub fn wrap_angle(delta: f64) -> f64 {
    PI - (PI - delta).rem_euclid(TAU)
}

pub fn distance(a: Position, b: Position) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Pose of an actor: center position and heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Configuration {
    c1: f64,
    c2: f64,
    theta: f64,
}

impl Configuration {
    pub fn new(c1: f64, c2: f64, theta: f64) -> Self {
        Self {
            c1,
            c2,
            theta: normalize_angle(theta),
        }
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    /// Heading in `[0, 2π)`.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn position(&self) -> Position {
        [self.c1, self.c2]
    }

    /// Returns the configuration displaced by `(d1, d2, dtheta)`.
    pub fn offset(&self, d1: f64, d2: f64, dtheta: f64) -> Self {
        Self::new(self.c1 + d1, self.c2 + d2, self.theta + dtheta)
    }
}

impl From<[f64; 3]> for Configuration {
    fn from(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

impl From<Configuration> for [f64; 3] {
    fn from(c: Configuration) -> Self {
        [c.c1, c.c2, c.theta]
    }
}

/// Circular footprint of an actor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleShape {
    radius: f64,
}

impl CircleShape {
    pub fn new(radius: f64) -> Result<Self> {
        if radius > 0.0 && radius.is_finite() {
            Ok(Self { radius })
        } else {
            Err(Error::InvalidConfig(format!(
                "circle radius must be positive, got {radius}"
            )))
        }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

/// Returns `true` when two circles centered at `q_e` and `q_o` overlap or touch.
pub fn collides(q_e: Position, q_o: Position, r_e: f64, r_o: f64) -> bool {
    let d1 = q_e[0] - q_o[0];
    let d2 = q_e[1] - q_o[1];
    let reach = r_e + r_o;
    d1 * d1 + d2 * d2 <= reach * reach
}

/// Collision indicator: 1 if the circles overlap (boundary included), else 0.
pub fn collision_indicator(q_e: Position, q_o: Position, r_e: f64, r_o: f64) -> u8 {
    u8::from(collides(q_e, q_o, r_e, r_o))
}

/// `sin(x) / x` with the removable singularity filled in.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Arc-length parameterized path of constant curvature that ends at `goal`
/// for `lambda = lambda_g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcPath {
    goal: Configuration,
    curvature: f64,
    lambda_0: f64,
    lambda_g: f64,
}

impl ArcPath {
    pub fn new(goal: Configuration, curvature: f64, lambda_0: f64, lambda_g: f64) -> Result<Self> {
        if !(lambda_0 < lambda_g) {
            return Err(Error::InvalidConfig(format!(
                "path interval must satisfy lambda_0 < lambda_g, got [{lambda_0}, {lambda_g}]"
            )));
        }
        if !curvature.is_finite() {
            return Err(Error::InvalidConfig("path curvature must be finite".into()));
        }
        Ok(Self {
            goal,
            curvature,
            lambda_0,
            lambda_g,
        })
    }

    pub fn goal(&self) -> Configuration {
        self.goal
    }

    pub fn curvature(&self) -> f64 {
        self.curvature
    }

    pub fn lambda_0(&self) -> f64 {
        self.lambda_0
    }

    pub fn lambda_g(&self) -> f64 {
        self.lambda_g
    }

    pub fn clamp(&self, lambda: f64) -> f64 {
        lambda.clamp(self.lambda_0, self.lambda_g)
    }

    /// Tangent heading at `lambda` (clamped), not normalized.
    pub fn heading(&self, lambda: f64) -> f64 {
        self.goal.theta() + self.curvature * (self.clamp(lambda) - self.lambda_g)
    }

    /// Path configuration at `lambda`, silently clamping to the path interval.
    pub fn eval(&self, lambda: f64) -> Configuration {
        let lambda = self.clamp(lambda);
        let s = lambda - self.lambda_g;
        let theta_g = self.goal.theta();
        if self.curvature.abs() < STRAIGHT_CURVATURE_EPS {
            return self.goal.offset(s * theta_g.cos(), s * theta_g.sin(), 0.0);
        }
        // Chord of the arc: length s·sinc(κs/2) along the mid-arc heading.
        let sweep = self.curvature * s;
        let chord = s * sinc(0.5 * sweep);
        let mid = theta_g + 0.5 * sweep;
        self.goal.offset(chord * mid.cos(), chord * mid.sin(), sweep)
    }

    /// Like [`ArcPath::eval`] but reports out-of-range parameters.
    pub fn try_eval(&self, lambda: f64) -> Result<Configuration> {
        if lambda < self.lambda_0 || lambda > self.lambda_g || lambda.is_nan() {
            return Err(Error::LambdaOutOfRange {
                lambda,
                lo: self.lambda_0,
                hi: self.lambda_g,
                clamped: self.clamp(lambda),
            });
        }
        Ok(self.eval(lambda))
    }

    /// Path parameter of the point closest (in position) to `y`.
    ///
    /// A 1 m grid scan brackets the global minimum, then golden-section search
    /// refines it to 1e-4 m.
    pub fn nearest_lambda(&self, y: &Configuration) -> f64 {
        let q = y.position();
        let dist = |lambda: f64| distance(q, self.eval(lambda).position());

        let span = self.lambda_g - self.lambda_0;
        let cells = span.ceil().max(1.0) as usize;
        let step = span / cells as f64;
        let mut best = (0usize, f64::INFINITY);
        for i in 0..=cells {
            let d = dist(self.lambda_0 + step * i as f64);
            if d < best.1 {
                best = (i, d);
            }
        }

        let center = self.lambda_0 + step * best.0 as f64;
        let mut a = (center - step).max(self.lambda_0);
        let mut b = (center + step).min(self.lambda_g);
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = b - inv_phi * (b - a);
        let mut x2 = a + inv_phi * (b - a);
        let mut f1 = dist(x1);
        let mut f2 = dist(x2);
        while b - a > 1e-5 {
            if f1 < f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - inv_phi * (b - a);
                f1 = dist(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + inv_phi * (b - a);
                f2 = dist(x2);
            }
        }
        let mid = 0.5 * (a + b);
        // The bracket endpoints can beat the interior when the minimum sits on
        // the path boundary.
        [mid, self.lambda_0, self.lambda_g]
            .into_iter()
            .map(|l| (l, dist(l)))
            .fold((mid, dist(mid)), |acc, c| if c.1 < acc.1 { c } else { acc })
            .0
    }
}
