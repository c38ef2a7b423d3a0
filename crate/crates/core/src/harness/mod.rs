//! Closed-loop scenario runner and the controller × uncertainty × tolerance
//! experiment matrix.

mod config;
pub mod output;

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{ScenarioConfig, UncertaintyLevel};

use crate::controller::{Controller, ControllerMode};
use crate::dynamics::{advance_lambda, step, tracking_error, EgoState};
use crate::error::{Error, Result};
use crate::geometry::{distance, Configuration};
use crate::prediction::ObjectBelief;

/// Risk tolerances of the experiment matrix, in joules.
pub const MATRIX_EPSILONS: [f64; 6] = [0.0, 500.0, 1000.0, 1500.0, 2000.0, 2500.0];
pub const MATRIX_MODES: [ControllerMode; 2] = [ControllerMode::Robust, ControllerMode::Stochastic];

/// One closed-loop step as written to trace files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub t_s: f64,
    pub ego_c1: f64,
    pub ego_c2: f64,
    pub ego_theta: f64,
    pub ego_v_applied: f64,
    pub lambda: f64,
    pub ref_c1: f64,
    pub ref_c2: f64,
    pub ref_theta: f64,
    pub obj_c1: f64,
    pub obj_c2: f64,
    pub obj_theta: f64,
    pub obj_v: f64,
    pub risk_step: f64,
    pub err_norm: f64,
    pub feasible: bool,
}

impl TraceRow {
    pub fn separation(&self) -> f64 {
        distance([self.ego_c1, self.ego_c2], [self.obj_c1, self.obj_c2])
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub rows: Vec<TraceRow>,
    pub e_acc: f64,
    pub d_min: f64,
    pub collided: bool,
    /// Steps at which the solver found no constraint-satisfying input.
    pub infeasible_steps: usize,
    pub wall_time: Duration,
}

/// Accumulated error `Σ‖e_k‖` and minimum center distance over a trace.
pub fn metrics(rows: &[TraceRow]) -> Result<(f64, f64)> {
    if rows.is_empty() {
        return Err(Error::InvalidConfig("metrics need a nonempty trace".into()));
    }
    let e_acc = rows.iter().map(|r| r.err_norm).sum();
    let d_min = rows.iter().map(TraceRow::separation).fold(f64::INFINITY, f64::min);
    Ok((e_acc, d_min))
}

fn norm4(e: &[f64; 4]) -> f64 {
    e.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Runs `cfg.duration_steps` closed-loop steps: measure the object, solve,
/// apply the first inputs, advance the object's true motion.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    let started = Instant::now();
    let problem = cfg.problem()?;
    let path = problem.path;
    let dt = problem.cfg.dt;
    let truth = cfg.object_truth_input();
    let mut controller = Controller::new(problem, cfg.seed)?;

    let mut ego = EgoState(cfg.ego_start());
    let mut lambda = path.nearest_lambda(&cfg.ego_start());
    let mut object: Configuration = cfg.object_start();

    let mut rows = Vec::with_capacity(cfg.duration_steps);
    let mut infeasible_steps = 0;
    for k in 0..cfg.duration_steps {
        let belief = ObjectBelief::measured(object, truth.v, cfg.object_v_bounds)?;
        let sol = controller.solve(&ego, lambda, &belief);
        let (u1, u2) = (sol.u1_seq[0], sol.u2_seq[0]);
        if !sol.feasible {
            infeasible_steps += 1;
        }

        let reference = path.eval(lambda);
        rows.push(TraceRow {
            k,
            t_s: k as f64 * dt,
            ego_c1: ego.0.c1(),
            ego_c2: ego.0.c2(),
            ego_theta: ego.0.theta(),
            ego_v_applied: u1.v,
            lambda,
            ref_c1: reference.c1(),
            ref_c2: reference.c2(),
            ref_theta: reference.theta(),
            obj_c1: object.c1(),
            obj_c2: object.c2(),
            obj_theta: object.theta(),
            obj_v: truth.v,
            risk_step: sol.risks[0],
            err_norm: norm4(&tracking_error(&ego, lambda, u2, &path, cfg.v_ref)),
            feasible: sol.feasible,
        });

        lambda = advance_lambda(lambda, u2, ego.0.theta(), path.heading(lambda), dt, &path);
        ego = step(&ego, u1, dt);
        object = step(&EgoState(object), truth, dt).0;
    }

    let (e_acc, d_min) = metrics(&rows)?;
    Ok(ScenarioResult {
        rows,
        e_acc,
        d_min,
        collided: d_min <= cfg.ego_radius + cfg.object_radius,
        infeasible_steps,
        wall_time: started.elapsed(),
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one matrix cell, derived from the base seed, the controller and
/// the uncertainty level. Cells that differ only in ε share a seed, so the
/// tolerance sweep is a paired comparison and each cell can be re-run alone.
pub fn cell_seed(base: u64, mode: ControllerMode, level: UncertaintyLevel) -> u64 {
    let mode_id = match mode {
        ControllerMode::Robust => 1,
        ControllerMode::Stochastic => 2,
    };
    let level_id = match level {
        UncertaintyLevel::None => 0,
        UncertaintyLevel::Low => 1,
        UncertaintyLevel::Medium => 2,
        UncertaintyLevel::High => 3,
    };
    [mode_id, level_id]
        .into_iter()
        .fold(splitmix64(base), |h, x| splitmix64(h ^ x))
}

#[derive(Debug, Clone)]
pub struct MatrixCell {
    pub mode: ControllerMode,
    pub level: UncertaintyLevel,
    pub epsilon: f64,
    pub config: ScenarioConfig,
    pub result: std::result::Result<ScenarioResult, String>,
}

impl MatrixCell {
    /// File stem used for this cell's trace and summary.
    pub fn name(&self) -> String {
        format!("{}_{}_eps{}", self.mode.short_name(), self.level.name(), self.epsilon)
    }
}

/// Configurations of the 36 matrix cells in table order: controller, then
/// tolerance, then uncertainty level.
pub fn matrix_configs(base: &ScenarioConfig) -> Vec<ScenarioConfig> {
    let mut out = Vec::with_capacity(36);
    for mode in MATRIX_MODES {
        for epsilon in MATRIX_EPSILONS {
            for level in UncertaintyLevel::MATRIX {
                out.push(ScenarioConfig {
                    controller: mode,
                    uncertainty: level,
                    growth: None,
                    epsilon,
                    seed: cell_seed(base.seed, mode, level),
                    ..base.clone()
                });
            }
        }
    }
    out
}

/// Runs all matrix cells in parallel. A failing cell is reported in its slot
/// and does not stop the others.
pub fn run_matrix(base: &ScenarioConfig) -> Vec<MatrixCell> {
    matrix_configs(base)
        .into_par_iter()
        .map(|config| MatrixCell {
            mode: config.controller,
            level: config.uncertainty,
            epsilon: config.epsilon,
            result: run_scenario(&config).map_err(|e| e.to_string()),
            config,
        })
        .collect()
}
