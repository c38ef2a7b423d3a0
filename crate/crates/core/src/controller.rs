//! Receding-horizon path-following OCP with a per-step risk constraint, in a
//! robust (worst-case grid) and a stochastic (Monte Carlo) flavor.
//!
//! The problem is solved by single shooting over the `3N` inputs
//! `(v, ω, u2)` with a cross-entropy search. Risk violations enter the
//! ranking through an exact penalty; the returned solution is re-checked
//! against the hard constraints and flagged when no candidate satisfied them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{advance_lambda, step, tracking_error, EgoInput, EgoState, InputBounds, StateBounds};
use crate::error::{Error, Result};
use crate::geometry::{ArcPath, CircleShape};
use crate::prediction::{predict_horizon, sample, ObjectBelief, ObjectSample, UncertaintyGrowth};
use crate::risk::{mcs_risk, worst_case_risk, RiskQuery, SeverityParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerMode {
    /// Worst-case risk over the truncation grid (RMPC).
    #[serde(alias = "rmpc")]
    Robust,
    /// Monte Carlo expected risk (SMPC).
    #[serde(alias = "smpc")]
    Stochastic,
}

impl ControllerMode {
    pub fn short_name(&self) -> &'static str {
        match self {
            ControllerMode::Robust => "rmpc",
            ControllerMode::Stochastic => "smpc",
        }
    }
}

/// Cross-entropy search budget and step sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub population: usize,
    pub iterations: usize,
    pub elite: usize,
    /// Weight of the new elite statistics when updating the search distribution.
    pub smoothing: f64,
    /// Initial std dev as a fraction of each input's bound range.
    pub init_std: f64,
    /// Floor on the std dev, same units as `init_std`.
    pub min_std: f64,
    /// Penalty factor on constraint violation, relative to the largest weight.
    pub penalty: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            population: 64,
            iterations: 30,
            elite: 8,
            smoothing: 0.7,
            init_std: 0.25,
            min_std: 0.005,
            penalty: 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcpConfig {
    pub horizon: usize,
    pub dt: f64,
    pub weight: [[f64; 4]; 4],
    pub epsilon: f64,
    pub mode: ControllerMode,
    pub bounds: InputBounds,
    pub state_bounds: StateBounds,
    pub mcs_samples: usize,
    pub grid_points: usize,
    pub solver: SolverSettings,
}

impl Default for OcpConfig {
    fn default() -> Self {
        let mut weight = [[0.0; 4]; 4];
        for (i, row) in weight.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Self {
            horizon: 6,
            dt: 0.5,
            weight,
            epsilon: 0.0,
            mode: ControllerMode::Stochastic,
            bounds: InputBounds::default(),
            state_bounds: StateBounds::default(),
            mcs_samples: 500,
            grid_points: 40,
            solver: SolverSettings::default(),
        }
    }
}

/// Cholesky test for a symmetric positive-definite 4×4 matrix.
fn is_spd(w: &[[f64; 4]; 4]) -> bool {
    for i in 0..4 {
        for j in 0..4 {
            if (w[i][j] - w[j][i]).abs() > 1e-12 * (1.0 + w[i][j].abs()) {
                return false;
            }
        }
    }
    let mut l = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = w[i][i] - s;
                if !(d > 0.0) {
                    return false;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (w[i][j] - s) / l[j][j];
            }
        }
    }
    true
}

impl OcpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.horizon == 0 {
            return bad("horizon must be at least 1");
        }
        if !(self.dt > 0.0) {
            return bad("sample time must be positive");
        }
        if !(self.epsilon >= 0.0) {
            return bad("risk tolerance must be >= 0");
        }
        if !is_spd(&self.weight) {
            return bad("weight matrix must be symmetric positive definite");
        }
        if self.mcs_samples == 0 {
            return bad("need at least one Monte Carlo sample");
        }
        if self.grid_points < 2 {
            return bad("grid resolution must be at least 2");
        }
        let s = &self.solver;
        if s.population < 2 || s.elite == 0 || s.elite > s.population {
            return bad("solver needs population >= 2 and 1 <= elite <= population");
        }
        if !(s.smoothing > 0.0 && s.smoothing <= 1.0) {
            return bad("solver smoothing must lie in (0, 1]");
        }
        self.bounds.validate()
    }

    /// Slack allowed on `risk <= epsilon` when reporting feasibility.
    pub fn risk_tolerance(&self) -> f64 {
        1e-6 * self.epsilon.max(1.0)
    }

    fn stage_cost(&self, e: &[f64; 4]) -> f64 {
        let mut c = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                c += e[i] * self.weight[i][j] * e[j];
            }
        }
        c
    }

    fn penalty_factor(&self) -> f64 {
        let scale = (0..4).map(|i| self.weight[i][i]).fold(0.0, f64::max);
        self.solver.penalty * scale
    }
}

/// Per-step risk evaluator over the prediction horizon, with any Monte Carlo
/// samples frozen for the lifetime of one solve.
#[derive(Debug, Clone)]
pub enum HorizonRisk {
    WorstCase {
        beliefs: Vec<ObjectBelief>,
        grid_points: usize,
    },
    MonteCarlo {
        beliefs: Vec<ObjectBelief>,
        samples: Vec<Vec<ObjectSample>>,
    },
}

impl HorizonRisk {
    pub fn new(cfg: &OcpConfig, beliefs: Vec<ObjectBelief>, rng: &mut ChaCha8Rng) -> Self {
        match cfg.mode {
            ControllerMode::Robust => HorizonRisk::WorstCase {
                beliefs,
                grid_points: cfg.grid_points,
            },
            ControllerMode::Stochastic => {
                let samples = beliefs.iter().map(|b| sample(b, cfg.mcs_samples, rng)).collect();
                HorizonRisk::MonteCarlo { beliefs, samples }
            }
        }
    }

    pub fn beliefs(&self) -> &[ObjectBelief] {
        match self {
            HorizonRisk::WorstCase { beliefs, .. } | HorizonRisk::MonteCarlo { beliefs, .. } => beliefs,
        }
    }

    fn eval(&self, n: usize, query: &RiskQuery<'_>) -> f64 {
        match self {
            HorizonRisk::WorstCase { grid_points, .. } => worst_case_risk(query, *grid_points),
            HorizonRisk::MonteCarlo { samples, .. } => mcs_risk(query, &samples[n]),
        }
    }
}

/// Input sequences over the horizon together with their predicted outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcpSolution {
    pub u1_seq: Vec<EgoInput>,
    pub u2_seq: Vec<f64>,
    /// States for steps `0..=N`.
    pub states: Vec<EgoState>,
    /// Path parameters for steps `0..=N`.
    pub lambdas: Vec<f64>,
    /// Risk at steps `0..=N`; step `n` uses the speed applied from `n`
    /// (the last input for `n = N`).
    pub risks: Vec<f64>,
    pub cost: f64,
    /// Summed constraint excess (risk above ε plus state-box excess).
    pub violation: f64,
    pub feasible: bool,
}

impl OcpSolution {
    /// Drops the first input and repeats the last one.
    pub fn shifted(&self) -> (Vec<EgoInput>, Vec<f64>) {
        let shift = |v: &[EgoInput]| {
            let mut s = v[1..].to_vec();
            s.push(*v.last().unwrap());
            s
        };
        let mut u2 = self.u2_seq[1..].to_vec();
        u2.push(*self.u2_seq.last().unwrap());
        (shift(&self.u1_seq), u2)
    }

    pub fn max_risk(&self) -> f64 {
        self.risks.iter().copied().fold(0.0, f64::max)
    }
}

/// Independent random streams used by one controller: one drives the
/// search, the other draws Monte Carlo samples.
#[derive(Debug, Clone)]
pub struct SolveStreams {
    pub search: ChaCha8Rng,
    pub sampling: ChaCha8Rng,
}

impl SolveStreams {
    pub fn from_seed(seed: u64) -> Self {
        let search = ChaCha8Rng::seed_from_u64(seed);
        let mut sampling = ChaCha8Rng::seed_from_u64(seed);
        sampling.set_stream(1);
        Self { search, sampling }
    }
}

/// Everything the OCP needs besides the current measurement.
#[derive(Debug, Clone)]
pub struct OcpProblem {
    pub cfg: OcpConfig,
    pub path: ArcPath,
    pub v_ref: f64,
    pub ego_shape: CircleShape,
    pub object_shape: CircleShape,
    pub severity: SeverityParams,
    /// Constant inputs of the object's prediction model.
    pub object_input: EgoInput,
    pub growth: UncertaintyGrowth,
}

impl OcpProblem {
    pub fn predict(&self, belief0: &ObjectBelief) -> Vec<ObjectBelief> {
        predict_horizon(belief0, self.object_input, &self.growth, self.cfg.dt, self.cfg.horizon)
    }

    /// Simulates the horizon from `(x0, lambda0)` and evaluates cost, risk and
    /// feasibility.
    pub fn rollout(
        &self,
        x0: &EgoState,
        lambda0: f64,
        u1_seq: &[EgoInput],
        u2_seq: &[f64],
        risk: &HorizonRisk,
    ) -> Result<OcpSolution> {
        let n = self.cfg.horizon;
        let check = |what, got| {
            if got == n {
                Ok(())
            } else {
                Err(Error::DimensionMismatch { what, expected: n, got })
            }
        };
        check("u1_seq", u1_seq.len())?;
        check("u2_seq", u2_seq.len())?;
        if risk.beliefs().len() != n + 1 {
            return Err(Error::DimensionMismatch {
                what: "beliefs",
                expected: n + 1,
                got: risk.beliefs().len(),
            });
        }
        Ok(self.rollout_unchecked(x0, lambda0, u1_seq, u2_seq, risk))
    }

    fn rollout_unchecked(
        &self,
        x0: &EgoState,
        lambda0: f64,
        u1_seq: &[EgoInput],
        u2_seq: &[f64],
        risk: &HorizonRisk,
    ) -> OcpSolution {
        let cfg = &self.cfg;
        let n = cfg.horizon;
        let mut states = Vec::with_capacity(n + 1);
        let mut lambdas = Vec::with_capacity(n + 1);
        let mut risks = Vec::with_capacity(n + 1);
        states.push(*x0);
        lambdas.push(lambda0);

        let mut cost = 0.0;
        let mut violation = 0.0;
        let mut in_bounds = true;
        for k in 0..n {
            let (x, lambda) = (states[k], lambdas[k]);
            let (u1, u2) = (u1_seq[k], u2_seq[k]);
            in_bounds &= cfg.bounds.contains(u1, u2);
            cost += cfg.stage_cost(&tracking_error(&x, lambda, u2, &self.path, self.v_ref));
            let theta_p = self.path.heading(lambda);
            lambdas.push(advance_lambda(lambda, u2, x.0.theta(), theta_p, cfg.dt, &self.path));
            states.push(step(&x, u1, cfg.dt));
        }

        let beliefs = risk.beliefs();
        for (k, x) in states.iter().enumerate() {
            let query = RiskQuery {
                q_e: x.0.position(),
                v_e: u1_seq[k.min(n - 1)].v,
                r_e: self.ego_shape.radius(),
                r_o: self.object_shape.radius(),
                belief: &beliefs[k],
                severity: self.severity,
            };
            let r = risk.eval(k, &query);
            violation += (r - cfg.epsilon).max(0.0);
            risks.push(r);
            violation += cfg.state_bounds.violation(x);
        }

        let tol = cfg.risk_tolerance();
        let lambda_ok = lambdas
            .iter()
            .all(|l| *l >= self.path.lambda_0() && *l <= self.path.lambda_g());
        let feasible = in_bounds
            && lambda_ok
            && risks.iter().all(|r| *r <= cfg.epsilon + tol)
            && states.iter().all(|x| cfg.state_bounds.violation(x) == 0.0);

        OcpSolution {
            u1_seq: u1_seq.to_vec(),
            u2_seq: u2_seq.to_vec(),
            states,
            lambdas,
            risks,
            cost,
            violation,
            feasible,
        }
    }

    fn decode(&self, z: &[f64]) -> (Vec<EgoInput>, Vec<f64>) {
        let b = &self.cfg.bounds;
        let u1 = z.chunks(3).map(|c| b.clip(EgoInput::new(c[0], c[1]))).collect();
        let u2 = z.chunks(3).map(|c| b.clip_u2(c[2])).collect();
        (u1, u2)
    }

    fn encode(u1: &[EgoInput], u2: &[f64]) -> Vec<f64> {
        u1.iter().zip(u2).flat_map(|(u, w)| [u.v, u.omega, *w]).collect()
    }

    /// Solves the OCP for the current ego state, path parameter and measured
    /// object belief.
    ///
    /// With a feasible `warm` start the returned cost never exceeds the cost of
    /// the shifted warm start. When no evaluated candidate satisfies the
    /// constraints, the least-violating one is returned with `feasible = false`.
    pub fn solve(
        &self,
        x0: &EgoState,
        lambda0: f64,
        belief0: &ObjectBelief,
        warm: Option<&OcpSolution>,
        streams: &mut SolveStreams,
    ) -> OcpSolution {
        let cfg = &self.cfg;
        let n = cfg.horizon;
        let s = &cfg.solver;
        let risk = HorizonRisk::new(cfg, self.predict(belief0), &mut streams.sampling);

        let (u1_init, u2_init) = match warm {
            Some(w) if w.u1_seq.len() == n && w.u2_seq.len() == n => w.shifted(),
            _ => (vec![EgoInput::default(); n], vec![self.v_ref; n]),
        };
        let bounds = cfg.bounds;
        let lo: Vec<f64> = (0..n).flat_map(|_| [bounds.v[0], bounds.omega[0], bounds.u2[0]]).collect();
        let hi: Vec<f64> = (0..n).flat_map(|_| [bounds.v[1], bounds.omega[1], bounds.u2[1]]).collect();
        let clip = |z: &mut [f64]| {
            for (i, x) in z.iter_mut().enumerate() {
                *x = x.clamp(lo[i], hi[i]);
            }
        };
        let range: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| b - a).collect();

        let mut mean = Self::encode(&u1_init, &u2_init);
        clip(&mut mean);
        let mut std: Vec<f64> = range.iter().map(|r| r * s.init_std).collect();
        let min_std: Vec<f64> = range.iter().map(|r| r * s.min_std).collect();
        let mu = cfg.penalty_factor();
        let score = |sol: &OcpSolution| sol.cost + mu * sol.violation;

        let eval = |z: &[f64]| {
            let (u1, u2) = self.decode(z);
            self.rollout_unchecked(x0, lambda0, &u1, &u2, &risk)
        };

        let mut best_feasible: Option<OcpSolution> = None;
        let mut least_violating: Option<OcpSolution> = None;
        let mut keep = |sol: &OcpSolution| {
            if sol.feasible {
                if best_feasible.as_ref().map_or(true, |b| sol.cost < b.cost) {
                    best_feasible = Some(sol.clone());
                }
            } else if least_violating
                .as_ref()
                .map_or(true, |b| (sol.violation, sol.cost) < (b.violation, b.cost))
            {
                least_violating = Some(sol.clone());
            }
        };

        let first = eval(&mean);
        keep(&first);
        let mut incumbent = (mean.clone(), score(&first));

        let dim = mean.len();
        for _ in 0..s.iterations {
            let mut pool: Vec<(Vec<f64>, f64)> = Vec::with_capacity(s.population + 1);
            pool.push(incumbent.clone());
            for c in 0..s.population {
                let mut z = mean.clone();
                if c > 0 {
                    for i in 0..dim {
                        let g: f64 = StandardNormal.sample(&mut streams.search);
                        z[i] += std[i] * g;
                    }
                    clip(&mut z);
                }
                let sol = eval(&z);
                keep(&sol);
                let sc = score(&sol);
                if sc < incumbent.1 {
                    incumbent = (z.clone(), sc);
                }
                pool.push((z, sc));
            }
            // stable sort keeps ties in generation order
            pool.sort_by(|a, b| a.1.total_cmp(&b.1));
            let elites = &pool[..s.elite.min(pool.len())];
            let k = elites.len() as f64;
            for i in 0..dim {
                let m = elites.iter().map(|e| e.0[i]).sum::<f64>() / k;
                let var = elites.iter().map(|e| (e.0[i] - m).powi(2)).sum::<f64>() / k;
                mean[i] = s.smoothing * m + (1.0 - s.smoothing) * mean[i];
                std[i] = (s.smoothing * var.sqrt() + (1.0 - s.smoothing) * std[i]).max(min_std[i]);
            }
        }

        best_feasible
            .or(least_violating)
            .expect("at least one candidate is always evaluated")
    }
}

/// Receding-horizon controller: an OCP plus its warm start and random streams.
#[derive(Debug, Clone)]
pub struct Controller {
    problem: OcpProblem,
    warm: Option<OcpSolution>,
    streams: SolveStreams,
}

impl Controller {
    pub fn new(problem: OcpProblem, seed: u64) -> Result<Self> {
        problem.cfg.validate()?;
        Ok(Self {
            problem,
            warm: None,
            streams: SolveStreams::from_seed(seed),
        })
    }

    pub fn problem(&self) -> &OcpProblem {
        &self.problem
    }

    /// Solves at the current measurement and keeps the result as the next
    /// warm start.
    pub fn solve(&mut self, x0: &EgoState, lambda0: f64, belief0: &ObjectBelief) -> OcpSolution {
        let sol = self
            .problem
            .solve(x0, lambda0, belief0, self.warm.as_ref(), &mut self.streams);
        self.warm = Some(sol.clone());
        sol
    }
}
