//! End-to-end wave-equation study: nominal design at `q₀`, the two ways of
//! extending it over `q`, and simulations of every resulting loop with both
//! simulators.
//!
//! Method 1 keeps the nominal `K̃` and only re-evaluates the delay part
//! `Φ(q)`; method 2 designs the polynomial schedule
//! `K̃(q) = K̃₀ + (q − q₀)K̃₁ + (q − q₀)²K̃₂` over samples of `q` and
//! recovers it through `Φ(q)` as well.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use structune::delay::{
    closed_loop_network, recover_controller, simulate_network, simulate_wave_pde, wave_plant,
    Reference, Traces, WaveScenario,
};
use structune::io::status_name;
use structune::norms::{pole_region_violation, PoleGoal};
use structune::program::{
    evaluate, solve, Class, Program, Requirement, SolveOptions, SynthResult, SynthStatus,
};
use structune::ss::{lft_lower, Spectrum, StateSpace};
use structune::structure::{assemble, InitStrategy, StructureSpec};
use structune::{PartitionedPlant64, StateSpace64};

use crate::{exit, pretty, read_text, write_text, CliError, CliResult};

/// Published gains, loadable with `--gains-override`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainsOverride {
    pub nominal: [f64; 3],
    pub k1: [f64; 3],
    pub k2: [f64; 3],
    /// Replaces the configured `q₀` when present.
    #[serde(default)]
    pub q0: Option<f64>,
}

impl GainsOverride {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = read_text(path, "gains-override")?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::new(exit::PARSE, "gains-override", e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoConfig {
    pub q0: f64,
    pub qs: Vec<f64>,
    pub out: PathBuf,
    pub gains_override: Option<GainsOverride>,
    pub seed: Option<u64>,
    pub nominal_goal: PoleGoal<f64>,
    pub scheduled_goal: PoleGoal<f64>,
    /// Number of equally spaced schedule samples for method 2.
    pub samples: usize,
    /// Grid intervals of the PDE run (the step is `1/grid` for both
    /// simulators).
    pub grid: usize,
    pub horizon: f64,
    /// Unit step reference by default; `Some(r)` ramps it smoothly over
    /// `[0, r]` instead.
    pub rise: Option<f64>,
}

impl DemoConfig {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        Self {
            q0: 3.0,
            qs: vec![2.0, 3.0, 4.0],
            out: out.into(),
            gains_override: None,
            seed: None,
            nominal_goal: PoleGoal::new(0.9, 0.9, 4.0).expect("valid goal"),
            scheduled_goal: PoleGoal::new(0.7, 0.9, 2.0).expect("valid goal"),
            samples: 5,
            grid: 400,
            horizon: 20.0,
            rise: None,
        }
    }

    pub fn reference(&self) -> Reference<f64> {
        match self.rise {
            None => Reference::Step { amplitude: 1.0 },
            Some(rise) => Reference::SmoothStep {
                amplitude: 1.0,
                rise,
            },
        }
    }
}

/// Program tuning a static `K̃` on `G̃(q₀)`: the nominal goal is hard and
/// also minimized; the scheduled goal enters as a soft term so the nominal
/// gain is a feasible base point for the schedule.
pub fn nominal_program(
    q0: f64,
    nominal: PoleGoal<f64>,
    scheduled: PoleGoal<f64>,
) -> structune::Result<Program<f64>> {
    Program::new(
        vec![wave_plant(q0)?],
        StructureSpec::StaticGain { nu: 1, ny: 3 },
        vec![
            Requirement::poles(0, nominal, Class::Soft),
            Requirement::poles(0, scheduled, Class::Soft),
            Requirement::poles(0, nominal, Class::Hard),
        ],
    )
}

/// Program tuning `K̃₁, K̃₂` around `base` with the goal hard and soft at
/// every sample.
pub fn scheduled_program(
    base: &[f64],
    q0: f64,
    samples: &[f64],
    goal: PoleGoal<f64>,
) -> structune::Result<Program<f64>> {
    let models = samples
        .iter()
        .map(|&q| wave_plant(q))
        .collect::<structune::Result<Vec<PartitionedPlant64>>>()?;
    let reqs = (0..models.len())
        .flat_map(|i| {
            [
                Requirement::poles(i, goal, Class::Soft),
                Requirement::poles(i, goal, Class::Hard),
            ]
        })
        .collect();
    Program::new(models, schedule_structure(base, q0), reqs)?.with_schedule(samples.to_vec())
}

pub fn schedule_structure(base: &[f64], q0: f64) -> StructureSpec<f64> {
    StructureSpec::PolynomialScheduled {
        base: DMatrix::from_row_slice(1, base.len(), base),
        degree: 2,
        q0,
    }
}

/// `count` equally spaced samples over the hull of `q₀` and `qs`.
pub fn schedule_samples(q0: f64, qs: &[f64], count: usize) -> Vec<f64> {
    let lo = qs.iter().copied().fold(q0, f64::min);
    let hi = qs.iter().copied().fold(q0, f64::max);
    if hi - lo <= 1e-12 || count < 2 {
        return vec![q0];
    }
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

/// Scheduled gain `K̃(q)` from the six schedule parameters.
pub fn scheduled_gain(base: &[f64], q0: f64, x: &[f64], q: f64) -> structune::Result<StateSpace64> {
    let spec = schedule_structure(base, q0);
    let p =
        structune::structure::ParamVector::new(DVector::from_row_slice(x), spec.default_bounds())?;
    assemble(&spec, &p, Some(q))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageSummary {
    pub source: &'static str,
    pub status: Option<SynthStatus>,
    pub x: Vec<f64>,
    pub f: f64,
    pub g: f64,
    pub certificate: f64,
    pub serious_steps: usize,
    pub evaluations: usize,
}

impl StageSummary {
    fn from_result(r: &SynthResult<f64>) -> Self {
        Self {
            source: "synthesized",
            status: Some(r.status),
            x: r.x_star.x.as_slice().to_vec(),
            f: r.f_star,
            g: r.g_star,
            certificate: r.certificate,
            serious_steps: r.history.len(),
            evaluations: r.evaluations,
        }
    }

    fn to_json(&self) -> Value {
        json!({
            "source": self.source,
            "status": self.status.map(status_name),
            "x": self.x,
            "f": self.f,
            "g": self.g,
            "certificate": self.certificate,
            "serious_steps": self.serious_steps,
            "evaluations": self.evaluations,
        })
    }
}

/// Pole-goal check of one frozen loop.
#[derive(Debug, Clone, PartialEq)]
pub struct GoalCheck {
    pub label: String,
    pub q: f64,
    pub poles: Vec<(f64, f64)>,
    pub violation: f64,
}

impl GoalCheck {
    /// `−violation`: positive when the goal holds with room to spare.
    pub fn margin(&self) -> f64 {
        -self.violation
    }

    pub fn met(&self) -> bool {
        self.violation <= 0.0
    }

    fn to_json(&self) -> Value {
        json!({
            "label": self.label,
            "q": self.q,
            "poles": self.poles.iter().map(|(re, im)| [*re, *im]).collect::<Vec<_>>(),
            "violation": self.violation,
            "margin": self.margin(),
            "met": self.met(),
        })
    }
}

/// One frozen loop `(G̃(q), K̃)` checked against both goals.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopSummary {
    pub method: usize,
    pub q: f64,
    pub gain: Vec<f64>,
    pub poles: Vec<(f64, f64)>,
    pub nominal_violation: f64,
    pub scheduled_violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSummary {
    pub method: usize,
    pub q: f64,
    pub pde_file: String,
    pub network_file: String,
    /// Largest disagreement of `y1, y2, y3, u` between the simulators.
    pub max_abs_diff: f64,
    /// Largest `|y1|, |y2|, |y3|, |u|` of the PDE run.
    pub peak_abs: f64,
    /// Peak over the last quarter of the delay-network run divided by the
    /// peak over the quarter before it.
    pub network_growth: f64,
    /// Same ratio for the PDE run.
    pub pde_growth: f64,
    /// Peak over the last quarter of the step-to-step alternating part
    /// `|2dₙ − dₙ₋₁ − dₙ₊₁|/4` of the PDE − network gap `d`.
    pub grid_mode: f64,
}

impl SimulationSummary {
    /// The delay network realizes `G̃ + Φ` exactly, so its run decides
    /// whether the closed loop itself is bounded.
    pub fn bounded(&self) -> bool {
        self.peak_abs.is_finite() && self.network_growth <= GROWTH_TOL
    }

    /// At Δt = Δξ the leapfrog grid carries a neutral odd-even mode that
    /// the boundary feedback can pump; the PDE run counts as clean when it
    /// does not grow.
    pub fn pde_clean(&self) -> bool {
        self.peak_abs.is_finite() && self.pde_growth <= GROWTH_TOL
    }
}

/// Largest tail-to-previous-quarter peak ratio still read as bounded.
pub const GROWTH_TOL: f64 = 1.01;

#[derive(Debug, Clone, PartialEq)]
pub struct DemoReport {
    pub q0: f64,
    pub qs: Vec<f64>,
    pub samples: Vec<f64>,
    pub nominal: StageSummary,
    pub scheduled: StageSummary,
    pub design_checks: Vec<GoalCheck>,
    pub loops: Vec<LoopSummary>,
    pub simulations: Vec<SimulationSummary>,
    /// Files written, relative to the output directory.
    pub artifacts: Vec<String>,
}

impl DemoReport {
    pub fn designs_meet_goals(&self) -> bool {
        self.design_checks.iter().all(GoalCheck::met)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let fmt_x = |x: &[f64]| {
            x.iter()
                .map(|v| format!("{v:.6}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        s.push_str(&format!(
            "nominal ({}): K = [{}]\n",
            self.nominal.source,
            fmt_x(&self.nominal.x)
        ));
        s.push_str(&format!(
            "schedule ({}): K1 = [{}], K2 = [{}]\n",
            self.scheduled.source,
            fmt_x(&self.scheduled.x[..3]),
            fmt_x(&self.scheduled.x[3..])
        ));
        for c in &self.design_checks {
            s.push_str(&format!(
                "check {} q={}: margin {:+.6} {}\n",
                c.label,
                c.q,
                c.margin(),
                if c.met() { "ok" } else { "VIOLATED" }
            ));
        }
        for l in &self.loops {
            let poles = l
                .poles
                .iter()
                .map(|(re, im)| format!("{re:.4}{im:+.4}i"))
                .collect::<Vec<_>>()
                .join(" ");
            s.push_str(&format!("method {} q={}: poles {}\n", l.method, l.q, poles));
        }
        for m in &self.simulations {
            let pde = if m.pde_clean() {
                String::new()
            } else {
                format!(
                    "; PDE growth {:.4}, odd-even grid mode {:.2e}",
                    m.pde_growth, m.grid_mode
                )
            };
            s.push_str(&format!(
                "sim method {} q={}: pde/network max diff {:.3e}, peak {:.4}, {}{}\n",
                m.method,
                m.q,
                m.max_abs_diff,
                m.peak_abs,
                if m.bounded() { "bounded" } else { "GROWING" },
                pde
            ));
        }
        s
    }
}

fn stage_err(stage: &str) -> impl Fn(structune::Error) -> CliError + '_ {
    move |e| CliError::from_lib(stage, e)
}

fn check_status(stage: &str, r: &SynthResult<f64>) -> CliResult<()> {
    match r.status {
        SynthStatus::LocalOptimum | SynthStatus::Feasible => Ok(()),
        SynthStatus::InfeasibleHard => Err(CliError::new(
            exit::INFEASIBLE,
            stage,
            format!("hard pole goal not met (g = {:.6})", r.g_star),
        )),
        SynthStatus::Unstabilizable => Err(CliError::new(
            exit::UNSTABILIZABLE,
            stage,
            "no stabilizing gain found",
        )),
    }
}

fn given(program: &Program<f64>, x: &[f64]) -> CliResult<StageSummary> {
    let p = program
        .params(DVector::from_row_slice(x))
        .map_err(stage_err("gains-override"))?;
    let e = evaluate(program, &p).map_err(stage_err("gains-override"))?;
    Ok(StageSummary {
        source: "override",
        status: None,
        x: x.to_vec(),
        f: e.f,
        g: e.g,
        certificate: 0.0,
        serious_steps: 0,
        evaluations: 1,
    })
}

fn frozen_poles(q: f64, k: &StateSpace64) -> structune::Result<Spectrum<f64>> {
    let clp = lft_lower(&wave_plant(q)?, k)?;
    Spectrum::of_matrix(&clp.a)
}

fn pole_pairs(sp: &Spectrum<f64>) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = sp.eigenvalues.iter().map(|z| (z.re, z.im)).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    v
}

fn q_tag(q: f64) -> String {
    format!("{q}").replace('-', "m")
}

fn peak(values: &[DVector<f64>], channels: usize) -> f64 {
    values
        .iter()
        .flat_map(|v| v.iter().take(channels).map(|x| x.abs()))
        .fold(0.0, f64::max)
}

fn tail_len(n: usize) -> usize {
    (n / 4).max(1).min(n)
}

/// Peak over the last quarter divided by the peak over the quarter before.
fn growth(values: &[DVector<f64>]) -> f64 {
    let n = values.len();
    let q = tail_len(n);
    let last = peak(&values[n - q..], 4);
    let before = peak(&values[n.saturating_sub(2 * q)..n - q], 4);
    if before > 1e-12 {
        last / before
    } else {
        1.0
    }
}

/// Peak over the last quarter of `|2dₙ − dₙ₋₁ − dₙ₊₁|/4`: the full amplitude
/// of a signal flipping sign every step, O(Δt²) for smooth ones.
fn alternating_tail(d: &[DVector<f64>]) -> f64 {
    let n = d.len();
    ((n - tail_len(n)).max(1)..n.saturating_sub(1))
        .map(|i| peak(&[(&d[i] * 2.0 - &d[i - 1] - &d[i + 1]) / 4.0], 4))
        .fold(0.0, f64::max)
}

fn simulate_pair(
    cfg: &DemoConfig,
    method: usize,
    q: f64,
    k: &StateSpace64,
    artifacts: &mut Vec<String>,
) -> CliResult<SimulationSummary> {
    let stage = "simulation";
    let reference = cfg.reference();
    let sc = WaveScenario::at_rest(q, cfg.grid, cfg.horizon, reference);
    let ctrl = recover_controller(k, q).map_err(stage_err(stage))?;
    let (pde, _) = simulate_wave_pde(&sc, &ctrl).map_err(stage_err(stage))?;
    let net = closed_loop_network(k, q).map_err(stage_err(stage))?;
    let input = move |t: f64| DVector::from_element(1, reference.at(t));
    let tr: Traces<f64> =
        simulate_network(&net, &input, sc.dt(), cfg.horizon).map_err(stage_err(stage))?;
    if tr.values.len() != pde.values.len() {
        return Err(CliError::new(
            exit::FAILURE,
            stage,
            "simulators produced different sample counts",
        ));
    }
    let max_abs_diff = pde
        .values
        .iter()
        .zip(&tr.values)
        .flat_map(|(a, b)| (0..4).map(move |c| (a[c] - b[c]).abs()))
        .fold(0.0, f64::max);
    let gap: Vec<DVector<f64>> = pde
        .values
        .iter()
        .zip(&tr.values)
        .map(|(a, b)| a.rows(0, 4) - b.rows(0, 4))
        .collect();
    let grid_mode = alternating_tail(&gap);
    let pde_file = format!("traces/method{method}_q{}_pde.csv", q_tag(q));
    let network_file = format!("traces/method{method}_q{}_network.csv", q_tag(q));
    write_text(&cfg.out.join(&pde_file), &pde.to_csv(), stage)?;
    write_text(&cfg.out.join(&network_file), &tr.to_csv(), stage)?;
    artifacts.push(pde_file.clone());
    artifacts.push(network_file.clone());
    Ok(SimulationSummary {
        method,
        q,
        pde_file,
        network_file,
        max_abs_diff,
        peak_abs: peak(&pde.values, 4),
        network_growth: growth(&tr.values),
        pde_growth: growth(&pde.values),
        grid_mode,
    })
}

/// Runs the whole study and writes `gains.json`, `report.json` and the
/// trace CSVs under `cfg.out`.
pub fn wave_demo(cfg: &DemoConfig) -> CliResult<DemoReport> {
    let q0 = cfg
        .gains_override
        .as_ref()
        .and_then(|g| g.q0)
        .unwrap_or(cfg.q0);
    let stage = "config";
    if cfg.qs.is_empty() {
        return Err(CliError::new(
            exit::UNSTABLE,
            stage,
            "no values of q to study",
        ));
    }
    for &q in std::iter::once(&q0).chain(&cfg.qs) {
        WaveScenario::at_rest(q, cfg.grid, cfg.horizon, cfg.reference())
            .validate()
            .map_err(stage_err(stage))?;
    }
    let samples = schedule_samples(q0, &cfg.qs, cfg.samples);
    let (lo, hi) = (samples[0], samples[samples.len() - 1]);
    if lo < 1.0 && hi > 1.0 {
        return Err(CliError::new(
            exit::UNSTABLE,
            stage,
            "the schedule range must not contain q = 1",
        ));
    }
    let opts = SolveOptions {
        init: cfg.seed.map_or(InitStrategy::Zeros, InitStrategy::Random),
        ..SolveOptions::default()
    };

    // nominal design
    let nominal_prog =
        nominal_program(q0, cfg.nominal_goal, cfg.scheduled_goal).map_err(stage_err("nominal"))?;
    let nominal = match &cfg.gains_override {
        Some(g) => given(&nominal_prog, &g.nominal)?,
        None => {
            let r = solve(&nominal_prog, &opts).map_err(stage_err("nominal"))?;
            check_status("nominal", &r)?;
            StageSummary::from_result(&r)
        }
    };

    // method 2: schedule around the nominal gain
    let sched_prog = scheduled_program(&nominal.x, q0, &samples, cfg.scheduled_goal)
        .map_err(stage_err("scheduled"))?;
    let scheduled = match &cfg.gains_override {
        Some(g) => {
            let x: Vec<f64> = g.k1.iter().chain(&g.k2).copied().collect();
            given(&sched_prog, &x)?
        }
        None => {
            let sched_opts = SolveOptions {
                init: cfg.seed.map_or(InitStrategy::Zeros, |s| {
                    InitStrategy::Random(s.wrapping_add(1))
                }),
                ..opts.clone()
            };
            let r = solve(&sched_prog, &sched_opts).map_err(stage_err("scheduled"))?;
            check_status("scheduled", &r)?;
            StageSummary::from_result(&r)
        }
    };
    let gain_at = |method: usize, q: f64| -> structune::Result<StateSpace64> {
        match method {
            1 => Ok(StateSpace::gain(DMatrix::from_row_slice(1, 3, &nominal.x))),
            _ => scheduled_gain(&nominal.x, q0, &scheduled.x, q),
        }
    };

    // goal checks of the designs themselves
    let mut design_checks = Vec::new();
    let sp = frozen_poles(q0, &gain_at(1, q0).map_err(stage_err("report"))?)
        .map_err(stage_err("report"))?;
    design_checks.push(GoalCheck {
        label: "nominal".into(),
        q: q0,
        poles: pole_pairs(&sp),
        violation: pole_region_violation(&sp, &cfg.nominal_goal).0,
    });
    let mut check_qs = samples.clone();
    for &q in &cfg.qs {
        if !check_qs.iter().any(|s| (s - q).abs() <= 1e-12) {
            check_qs.push(q);
        }
    }
    check_qs.sort_by(f64::total_cmp);
    for &q in &check_qs {
        let sp = frozen_poles(q, &gain_at(2, q).map_err(stage_err("report"))?)
            .map_err(stage_err("report"))?;
        design_checks.push(GoalCheck {
            label: "scheduled".into(),
            q,
            poles: pole_pairs(&sp),
            violation: pole_region_violation(&sp, &cfg.scheduled_goal).0,
        });
    }

    // frozen loops and simulations for both methods
    let mut loops = Vec::new();
    let mut simulations = Vec::new();
    let mut artifacts = Vec::new();
    let mut gains_per_q = Vec::new();
    for &q in &cfg.qs {
        let mut row = serde_json::Map::new();
        row.insert("q".into(), json!(q));
        for method in [1, 2] {
            let k = gain_at(method, q).map_err(stage_err("report"))?;
            let sp = frozen_poles(q, &k).map_err(stage_err("report"))?;
            let gain: Vec<f64> = k.d.iter().copied().collect();
            row.insert(format!("method{method}"), json!(gain));
            loops.push(LoopSummary {
                method,
                q,
                gain,
                poles: pole_pairs(&sp),
                nominal_violation: pole_region_violation(&sp, &cfg.nominal_goal).0,
                scheduled_violation: pole_region_violation(&sp, &cfg.scheduled_goal).0,
            });
            simulations.push(simulate_pair(cfg, method, q, &k, &mut artifacts)?);
        }
        gains_per_q.push(Value::Object(row));
    }

    let source = if cfg.gains_override.is_some() {
        "override"
    } else {
        "synthesized"
    };
    let gains = json!({
        "source": source,
        "q0": q0,
        "nominal": nominal.x,
        "k1": scheduled.x[..3],
        "k2": scheduled.x[3..],
        "schedule_samples": samples,
        "per_q": gains_per_q,
    });
    write_text(&cfg.out.join("gains.json"), &pretty(&gains), "report")?;
    artifacts.insert(0, "gains.json".into());
    artifacts.insert(1, "report.json".into());

    let report = DemoReport {
        q0,
        qs: cfg.qs.clone(),
        samples,
        nominal,
        scheduled,
        design_checks,
        loops,
        simulations,
        artifacts,
    };
    write_text(
        &cfg.out.join("report.json"),
        &pretty(&report_json(cfg, &report)),
        "report",
    )?;
    Ok(report)
}

fn goal_json(g: &PoleGoal<f64>) -> Value {
    json!({"min_decay": g.min_decay, "min_damping": g.min_damping, "max_frequency": g.max_frequency})
}

fn report_json(cfg: &DemoConfig, r: &DemoReport) -> Value {
    json!({
        "config": {
            "q0": r.q0,
            "qs": r.qs,
            "seed": cfg.seed,
            "nominal_goal": goal_json(&cfg.nominal_goal),
            "scheduled_goal": goal_json(&cfg.scheduled_goal),
            "grid": cfg.grid,
            "horizon": cfg.horizon,
            "reference": match cfg.rise {
                None => json!({"type": "step", "amplitude": 1.0}),
                Some(rise) => json!({"type": "smooth_step", "amplitude": 1.0, "rise": rise}),
            },
        },
        "schedule_samples": r.samples,
        "stages": {"nominal": r.nominal.to_json(), "scheduled": r.scheduled.to_json()},
        "design_checks": r.design_checks.iter().map(GoalCheck::to_json).collect::<Vec<_>>(),
        "designs_meet_goals": r.designs_meet_goals(),
        "loops": r.loops.iter().map(|l| json!({
            "method": l.method,
            "q": l.q,
            "gain": l.gain,
            "poles": l.poles.iter().map(|(re, im)| [*re, *im]).collect::<Vec<_>>(),
            "nominal_goal_violation": l.nominal_violation,
            "scheduled_goal_violation": l.scheduled_violation,
        })).collect::<Vec<_>>(),
        "simulations": r.simulations.iter().map(|m| json!({
            "method": m.method,
            "q": m.q,
            "pde": m.pde_file,
            "network": m.network_file,
            "max_abs_diff": m.max_abs_diff,
            "peak_abs": m.peak_abs,
            "network_growth": m.network_growth,
            "pde_growth": m.pde_growth,
            "grid_mode": m.grid_mode,
            "bounded": m.bounded(),
            "pde_clean": m.pde_clean(),
        })).collect::<Vec<_>>(),
        "artifacts": r.artifacts,
    })
}
