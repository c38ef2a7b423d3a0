//! Collision severity, the Monte Carlo risk estimator and the grid-based
//! worst-case risk.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{collides, Position};
use crate::prediction::{linspace, ObjectBelief, ObjectSample};

/// Actor masses used by the kinetic-energy severity model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeverityParams {
    pub m_e: f64,
    pub m_o: f64,
}

impl SeverityParams {
    pub fn new(m_e: f64, m_o: f64) -> Result<Self> {
        if m_e > 0.0 && m_o > 0.0 {
            Ok(Self { m_e, m_o })
        } else {
            Err(Error::InvalidConfig(format!("masses must be positive, got {m_e}, {m_o}")))
        }
    }
}

impl Default for SeverityParams {
    fn default() -> Self {
        Self { m_e: 1000.0, m_o: 1000.0 }
    }
}

/// Differential kinetic energy `½·|m_e·v_e² − m_o·v_o²|` in joules.
pub fn severity(v_e: f64, v_o: f64, p: &SeverityParams) -> f64 {
    0.5 * (p.m_e * v_e * v_e - p.m_o * v_o * v_o).abs()
}

/// Deterministic ego side of a risk evaluation against one object belief.
#[derive(Debug, Clone, Copy)]
pub struct RiskQuery<'a> {
    pub q_e: Position,
    pub v_e: f64,
    pub r_e: f64,
    pub r_o: f64,
    pub belief: &'a ObjectBelief,
    pub severity: SeverityParams,
}

/// Monte Carlo estimate `(1/J)·Σ I_C·s` over the given object samples.
pub fn mcs_risk(query: &RiskQuery<'_>, samples: &[ObjectSample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let total: f64 = samples
        .iter()
        .filter(|s| collides(query.q_e, s.q, query.r_e, query.r_o))
        .map(|s| severity(query.v_e, s.v, &query.severity))
        .sum();
    total / samples.len() as f64
}

/// Squared distance from `q` to the axis-aligned box `[lo, hi]`.
fn box_distance_sq(q: Position, lo: Position, hi: Position) -> f64 {
    let d0 = q[0] - q[0].clamp(lo[0], hi[0]);
    let d1 = q[1] - q[1].clamp(lo[1], hi[1]);
    d0 * d0 + d1 * d1
}

/// Maximum of `I_C·s` over the `L`-per-axis grid on the truncation box.
///
/// Severity depends only on speed and the indicator only on position, so the
/// maximum over the `L³` grid factors into "does any position grid point
/// collide" times "largest severity on the speed grid".
pub fn worst_case_risk(query: &RiskQuery<'_>, l: usize) -> f64 {
    let b = query.belief;
    let reach = query.r_e + query.r_o;
    // No point of the continuous box is in reach, so no grid point is either.
    let margin = reach * (1.0 + 1e-12) + 1e-12;
    if box_distance_sq(query.q_e, b.q_lo, b.q_hi) > margin * margin {
        return 0.0;
    }
    let c1 = linspace(b.q_lo[0], b.q_hi[0], l);
    let c2 = linspace(b.q_lo[1], b.q_hi[1], l);
    let hit = c1.iter().any(|&a| {
        (a - query.q_e[0]).abs() <= reach
            && c2.iter().any(|&bb| collides(query.q_e, [a, bb], query.r_e, query.r_o))
    });
    if !hit {
        return 0.0;
    }
    linspace(b.v_lo, b.v_hi, l)
        .into_iter()
        .map(|v| severity(query.v_e, v, &query.severity))
        .fold(0.0, f64::max)
}
