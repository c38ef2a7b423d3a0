//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use riskmpc::controller::ControllerMode;
use riskmpc::dynamics::{step, EgoInput, EgoState, OMEGA_EPS};
use riskmpc::geometry::{collision_indicator, distance, ArcPath, Configuration};
use riskmpc::harness::output::{write_matrix, TraceFormat};
use riskmpc::harness::{
    run_matrix, run_scenario, MatrixCell, ScenarioConfig, UncertaintyLevel, MATRIX_EPSILONS,
};
use riskmpc::prediction::{grid, sample, ObjectBelief};
use riskmpc::risk::{mcs_risk, severity, worst_case_risk, RiskQuery, SeverityParams};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

type Table = HashMap<(ControllerMode, UncertaintyLevel, u64), (f64, f64)>;

fn table(cells: &[MatrixCell]) -> Table {
    cells
        .iter()
        .map(|c| {
            let r = c.result.as_ref().expect("matrix cell failed");
            ((c.mode, c.level, c.epsilon as u64), (r.e_acc, r.d_min))
        })
        .collect()
}

fn eps_keys() -> impl Iterator<Item = u64> {
    MATRIX_EPSILONS.iter().map(|e| *e as u64)
}

fn d(t: &Table, m: ControllerMode, l: UncertaintyLevel, e: u64) -> f64 {
    t[&(m, l, e)].1
}

fn e_acc(t: &Table, m: ControllerMode, l: UncertaintyLevel, e: u64) -> f64 {
    t[&(m, l, e)].0
}

fn spread(xs: &[f64]) -> f64 {
    let hi = xs.iter().copied().fold(f64::MIN, f64::max);
    let lo = xs.iter().copied().fold(f64::MAX, f64::min);
    (hi - lo) / lo
}

use ControllerMode::{Robust, Stochastic};
use UncertaintyLevel::{High, Low, Medium};

fn collision_freedom(t: &Table, wall: Duration) -> Outcome {
    let hits: Vec<String> = t
        .iter()
        .filter(|(_, (_, dm))| *dm <= 3.0)
        .map(|((m, l, e), (_, dm))| format!("{}/{}/{e}: {dm:.3}", m.short_name(), l.name()))
        .collect();
    let in_budget = wall < Duration::from_secs(15 * 60);
    outcome(
        hits.is_empty() && in_budget,
        format!("matrix wall time {wall:.1?}; cells with d_min <= 3.0: {hits:?}"),
    )
}

fn rmpc_eps_invariance(t: &Table) -> Outcome {
    let mut ok = true;
    let mut parts = vec![];
    for l in UncertaintyLevel::MATRIX {
        let xs: Vec<f64> = eps_keys().map(|e| d(t, Robust, l, e)).collect();
        let s = spread(&xs);
        ok &= s < 0.05;
        parts.push(format!("{} {:.1}%", l.name(), 100.0 * s));
    }
    outcome(ok, format!("spread {}", parts.join(", ")))
}

fn rmpc_uncertainty_monotone(t: &Table) -> Outcome {
    let mut ok = true;
    let mut parts = vec![];
    for e in eps_keys() {
        let (a, b, c) = (d(t, Robust, Low, e), d(t, Robust, Medium, e), d(t, Robust, High, e));
        ok &= b >= 1.3 * a && c >= 1.3 * b;
        parts.push(format!("eps {e}: {a:.2}/{b:.2}/{c:.2}"));
    }
    outcome(ok, parts.join("; "))
}

fn conservatism(t: &Table) -> Outcome {
    let mut bad = vec![];
    for e in eps_keys() {
        for l in [Medium, High] {
            let (r, s) = (d(t, Robust, l, e), d(t, Stochastic, l, e));
            if r < 1.5 * s {
                bad.push(format!("d_min {}/{e}: {r:.2} vs {s:.2}", l.name()));
            }
        }
        for l in UncertaintyLevel::MATRIX {
            let (r, s) = (e_acc(t, Robust, l, e), e_acc(t, Stochastic, l, e));
            if r <= s {
                bad.push(format!("e_acc {}/{e}: {r:.1} vs {s:.1}", l.name()));
            }
        }
    }
    outcome(bad.is_empty(), format!("violations: {bad:?}"))
}

fn smpc_tolerance_response(t: &Table) -> Outcome {
    let (d0, d2500) = (d(t, Stochastic, High, 0), d(t, Stochastic, High, 2500));
    let low: Vec<f64> = eps_keys().map(|e| d(t, Stochastic, Low, e)).collect();
    let s = spread(&low);
    outcome(
        d2500 <= 0.5 * d0 && s < 0.15,
        format!("high d_min eps0 {d0:.2}, eps2500 {d2500:.2}; low spread {:.1}%", 100.0 * s),
    )
}

/// Truncated normal on `[lo, hi]` evaluated through the untruncated CDF.
struct TruncNorm {
    n: Normal,
    lo: f64,
    hi: f64,
    z: f64,
}

impl TruncNorm {
    fn new(mu: f64, sigma: f64, lo: f64, hi: f64) -> Self {
        let n = Normal::new(mu, sigma).unwrap();
        let z = n.cdf(hi) - n.cdf(lo);
        Self { n, lo, hi, z }
    }

    fn pdf(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi {
            0.0
        } else {
            self.n.pdf(x) / self.z
        }
    }

    fn mass(&self, a: f64, b: f64) -> f64 {
        let (a, b) = (a.max(self.lo), b.min(self.hi));
        if b <= a {
            0.0
        } else {
            (self.n.cdf(b) - self.n.cdf(a)) / self.z
        }
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Risk integral by quadrature: collision probability (one-dimensional
/// integral over `c1` of the `c2` mass inside the disk chord) times the
/// expected severity over the speed density, split at its kinks.
fn risk_quadrature(q_e: [f64; 2], v_e: f64, b: &ObjectBelief, reach: f64, p: &SeverityParams) -> f64 {
    let m = b.mean_position();
    let c1 = TruncNorm::new(m[0], b.sigma[0], b.q_lo[0], b.q_hi[0]);
    let c2 = TruncNorm::new(m[1], b.sigma[1], b.q_lo[1], b.q_hi[1]);
    let lo = b.q_lo[0].max(q_e[0] - reach);
    let hi = b.q_hi[0].min(q_e[0] + reach);
    let p_hit = if hi <= lo {
        0.0
    } else {
        // c1 = q_e1 + reach·sin φ removes the square-root endpoint behaviour
        let phi = |x: f64| ((x - q_e[0]) / reach).clamp(-1.0, 1.0).asin();
        simpson(
            |f| {
                let x = q_e[0] + reach * f.sin();
                let h = reach * f.cos();
                c1.pdf(x) * c2.mass(q_e[1] - h, q_e[1] + h) * reach * f.cos()
            },
            phi(lo),
            phi(hi),
            20_000,
        )
    };

    let v = TruncNorm::new(b.mean_v, b.sigma[2], b.v_lo, b.v_hi);
    let root = v_e.abs() * (p.m_e / p.m_o).sqrt();
    let mut cuts = vec![b.v_lo, b.v_hi];
    cuts.extend([-root, root].into_iter().filter(|x| *x > b.v_lo && *x < b.v_hi));
    cuts.sort_by(f64::total_cmp);
    let e_sev: f64 = cuts
        .windows(2)
        .map(|w| simpson(|x| v.pdf(x) * severity(v_e, x, p), w[0], w[1], 4_000))
        .sum();
    p_hit * e_sev
}

fn random_belief(rng: &mut ChaCha8Rng) -> ObjectBelief {
    let m = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
    let mv = rng.random_range(-4.0..4.0);
    let side = |rng: &mut ChaCha8Rng| rng.random_range(0.3..4.0);
    ObjectBelief {
        mean_config: Configuration::new(m[0], m[1], rng.random_range(-PI..PI)),
        mean_v: mv,
        sigma: [rng.random_range(0.2..2.0), rng.random_range(0.2..2.0), rng.random_range(0.2..2.0)],
        q_lo: [m[0] - side(rng), m[1] - side(rng)],
        q_hi: [m[0] + side(rng), m[1] + side(rng)],
        v_lo: mv - side(rng),
        v_hi: mv + side(rng),
    }
}

fn mcs_matches_quadrature() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let j = 100_000;
    let mut bad = vec![];
    let mut worst = 0.0f64;
    for i in 0..20 {
        let b = random_belief(&mut rng);
        let m = b.mean_position();
        let q_e = [m[0] + rng.random_range(-3.0..3.0), m[1] + rng.random_range(-3.0..3.0)];
        let v_e = rng.random_range(-6.0..6.0);
        let sev = SeverityParams::new(rng.random_range(500.0..2000.0), rng.random_range(500.0..2000.0)).unwrap();
        let query = RiskQuery { q_e, v_e, r_e: 1.5, r_o: 1.5, belief: &b, severity: sev };

        let samples = sample(&b, j, &mut rng);
        let est = mcs_risk(&query, &samples);
        let xs: Vec<f64> = samples
            .iter()
            .map(|s| collision_indicator(q_e, s.q, 1.5, 1.5) as f64 * severity(v_e, s.v, &sev))
            .collect();
        let var = xs.iter().map(|x| (x - est).powi(2)).sum::<f64>() / (j - 1) as f64;
        let se = (var / j as f64).sqrt();
        let oracle = risk_quadrature(q_e, v_e, &b, 3.0, &sev);
        let z = if se > 0.0 { (est - oracle).abs() / se } else { (est - oracle).abs() };
        worst = worst.max(z);
        if z > 3.0 {
            bad.push(format!("query {i}: mcs {est:.3} oracle {oracle:.3} se {se:.3}"));
        }
    }
    let wall = started.elapsed();
    outcome(
        bad.is_empty() && wall < Duration::from_secs(60),
        format!("worst |error|/se {worst:.2}, {wall:.1?}; {bad:?}"),
    )
}

fn worst_case_matches_exhaustive() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut bad = 0;
    let mut colliding = 0;
    for _ in 0..100 {
        let b = random_belief(&mut rng);
        let m = b.mean_position();
        let q_e = [m[0] + rng.random_range(-7.0..7.0), m[1] + rng.random_range(-7.0..7.0)];
        let v_e = rng.random_range(-6.0..6.0);
        let l = rng.random_range(2..=40);
        let sev = SeverityParams::default();
        let query = RiskQuery { q_e, v_e, r_e: 1.5, r_o: 1.5, belief: &b, severity: sev };
        let exhaustive = grid(&b, l)
            .iter()
            .map(|s| collision_indicator(q_e, s.q, 1.5, 1.5) as f64 * severity(v_e, s.v, &sev))
            .fold(0.0, f64::max);
        if exhaustive > 0.0 {
            colliding += 1;
        }
        if worst_case_risk(&query, l) != exhaustive {
            bad += 1;
        }
    }
    outcome(bad == 0, format!("{bad} mismatches in 100 queries ({colliding} with a colliding grid point)"))
}

fn dynamics_limit() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_step = 0.0f64;
    for _ in 0..1000 {
        let x = EgoState(Configuration::new(
            rng.random_range(-50.0..50.0),
            rng.random_range(-50.0..50.0),
            rng.random_range(-PI..PI),
        ));
        let v = rng.random_range(-10.0..10.0);
        let dt = rng.random_range(0.01..1.0);
        for w in [OMEGA_EPS, -OMEGA_EPS] {
            let arc = step(&x, EgoInput::new(v, w), dt);
            let below = step(&x, EgoInput::new(v, w * (1.0 - 1e-9)), dt);
            // straight segment along the mid-step heading
            let mid = x.0.theta() + 0.5 * w * dt;
            let line = [x.0.c1() + v * dt * mid.cos(), x.0.c2() + v * dt * mid.sin()];
            worst_step = worst_step
                .max(distance(arc.0.position(), line))
                .max(distance(arc.0.position(), below.0.position()));
        }
    }

    let mut worst_arc = 0.0f64;
    for (goal, kappa) in [([65.0, 5.0, 0.0], 0.003), ([0.0, 0.0, 1.0], -0.05), ([10.0, -3.0, 2.0], 0.0)] {
        let path = ArcPath::new(goal.into(), kappa, -95.0, 0.0).unwrap();
        for (a, b) in [(-95.0, 0.0), (-60.0, -20.0), (-3.0, -1.0)] {
            let n = 100_000;
            let h = (b - a) / n as f64;
            let len: f64 = (0..n)
                .map(|i| distance(path.eval(a + i as f64 * h).position(), path.eval(a + (i + 1) as f64 * h).position()))
                .sum();
            worst_arc = worst_arc.max((len - (b - a)).abs() / (b - a));
        }
    }
    outcome(
        worst_step <= 1e-8 && worst_arc <= 1e-6,
        format!("max step deviation {worst_step:.2e} m, max relative arc-length error {worst_arc:.2e}"),
    )
}

fn mode_collapse() -> Outcome {
    let mut bad = vec![];
    for epsilon in [0.0, 1000.0, 2500.0] {
        let base = ScenarioConfig {
            uncertainty: UncertaintyLevel::None,
            object_v_bounds: [3.0, 3.0],
            epsilon,
            seed: 11,
            ..Default::default()
        };
        let run = |mode| run_scenario(&ScenarioConfig { controller: mode, ..base.clone() }).unwrap();
        let (r, s) = (run(Robust), run(Stochastic));
        if r.rows != s.rows {
            bad.push(epsilon);
        }
    }
    outcome(bad.is_empty(), format!("tolerances with differing traces: {bad:?}"))
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

fn determinism(first: &[MatrixCell]) -> Outcome {
    let second = run_matrix(&ScenarioConfig::default());
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_matrix(a.path(), first, TraceFormat::Csv).unwrap();
    write_matrix(b.path(), &second, TraceFormat::Csv).unwrap();
    let (fa, fb) = (dir_bytes(a.path()), dir_bytes(b.path()));
    let differing: Vec<&String> = fa.keys().filter(|k| fa.get(*k) != fb.get(*k)).collect();
    outcome(
        fa.len() == fb.len() && differing.is_empty(),
        format!("{} files compared, differing: {differing:?}", fa.len()),
    )
}

fn main() {
    let started = Instant::now();
    let cells = run_matrix(&ScenarioConfig::default());
    let wall = started.elapsed();
    let t = table(&cells);

    let results = [
        ("1 collision freedom", collision_freedom(&t, wall)),
        ("2 RMPC tolerance invariance", rmpc_eps_invariance(&t)),
        ("3 RMPC uncertainty monotonicity", rmpc_uncertainty_monotone(&t)),
        ("4 conservatism ordering", conservatism(&t)),
        ("5 SMPC tolerance response", smpc_tolerance_response(&t)),
        ("6 MCS estimator vs quadrature", mcs_matches_quadrature()),
        ("7 worst-case estimator vs exhaustive grid", worst_case_matches_exhaustive()),
        ("8 dynamics limit and arc length", dynamics_limit()),
        ("9 mode collapse under point-mass beliefs", mode_collapse()),
        ("10 matrix determinism", determinism(&cells)),
    ];

    let mut failed = 0;
    for (name, o) in &results {
        println!("criterion {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
