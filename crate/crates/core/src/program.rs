//! Multi-model synthesis programs: soft requirements are minimized in the
//! worst case, hard requirements are constrained to be `≤ 1`.

use std::fmt::Write as _;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::bundle::{self, BundleOptions, BundleStatus, OracleSample, Plane};
use crate::norms::{self, PoleGoal};
use crate::sensitivity::{self, Subgradient};
use crate::ss::{lft_lower, PartitionedPlant, Spectrum};
use crate::structure::{self, Bound, InitStrategy, ParamVector, StructureSpec};
use crate::{lit, to_f64, Error, Real, Result};

/// Schedule samples used when a scheduled structure comes without any.
pub const DEFAULT_SCHEDULE: [f64; 5] = [2.0, 2.5, 3.0, 3.5, 4.0];
/// Stability margin of the stabilization phase.
pub const STAB_MARGIN: f64 = 0.05;
const TIE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RequirementKind<T: Real> {
    Hinf { bound: T },
    H2 { bound: T },
    PoleRegion(PoleGoal<T>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    Soft,
    Hard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Requirement<T: Real> {
    pub model: usize,
    /// Exogenous inputs of the channel (ignored by pole goals).
    pub w: Vec<usize>,
    /// Performance outputs of the channel (ignored by pole goals).
    pub z: Vec<usize>,
    pub kind: RequirementKind<T>,
    pub class: Class,
    pub weight: T,
}

impl<T: Real> Requirement<T> {
    pub fn poles(model: usize, goal: PoleGoal<T>, class: Class) -> Self {
        Self {
            model,
            w: Vec::new(),
            z: Vec::new(),
            kind: RequirementKind::PoleRegion(goal),
            class,
            weight: T::one(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program<T: Real> {
    pub models: Vec<PartitionedPlant<T>>,
    pub structure: StructureSpec<T>,
    pub requirements: Vec<Requirement<T>>,
    pub schedule_samples: Option<Vec<T>>,
    /// Extra box on the parameters, intersected with the structure's own.
    pub bounds: Option<Vec<Bound<T>>>,
}

/// A frozen closed loop: one model at one schedule value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Instance<T: Real> {
    pub model: usize,
    pub q: Option<T>,
}

impl<T: Real> Program<T> {
    pub fn new(
        models: Vec<PartitionedPlant<T>>,
        structure: StructureSpec<T>,
        requirements: Vec<Requirement<T>>,
    ) -> Result<Self> {
        let p = Self {
            models,
            structure,
            requirements,
            schedule_samples: None,
            bounds: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// Scheduled program whose models are paired with `samples` (see
    /// [`Program::instances`]); validated once with the final schedule.
    pub fn scheduled(
        models: Vec<PartitionedPlant<T>>,
        structure: StructureSpec<T>,
        requirements: Vec<Requirement<T>>,
        samples: Vec<T>,
    ) -> Result<Self> {
        let p = Self {
            models,
            structure,
            requirements,
            schedule_samples: Some(samples),
            bounds: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_schedule(mut self, samples: Vec<T>) -> Result<Self> {
        self.schedule_samples = Some(samples);
        self.validate()?;
        Ok(self)
    }

    pub fn with_bounds(mut self, bounds: Vec<Bound<T>>) -> Result<Self> {
        self.bounds = Some(bounds);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.requirements.is_empty() {
            return Err(Error::InvalidArgument("program has no requirements".into()));
        }
        let (_, kin, kout) = self.structure.dims();
        for (i, m) in self.models.iter().enumerate() {
            if m.ny() != kin || m.nu() != kout {
                return Err(Error::DimensionMismatch(format!(
                    "model {i} has (ny, nu) = ({}, {}), controller needs ({kin}, {kout})",
                    m.ny(),
                    m.nu()
                )));
            }
            if !self.requirements.iter().any(|r| r.model == i) {
                return Err(Error::InvalidArgument(format!(
                    "model {i} is not referenced"
                )));
            }
        }
        for r in &self.requirements {
            let m = self.models.get(r.model).ok_or_else(|| {
                Error::InvalidArgument(format!("requirement references model {}", r.model))
            })?;
            if !(r.weight > T::zero()) {
                return Err(Error::InvalidArgument("weights must be positive".into()));
            }
            match r.kind {
                RequirementKind::Hinf { bound } | RequirementKind::H2 { bound } => {
                    if !(bound > T::zero()) {
                        return Err(Error::InvalidArgument(
                            "norm bounds must be positive".into(),
                        ));
                    }
                    if r.w.is_empty() || r.z.is_empty() {
                        return Err(Error::InvalidArgument(
                            "norm requirement with empty channel".into(),
                        ));
                    }
                    if r.w.iter().any(|&i| i >= m.nw()) || r.z.iter().any(|&i| i >= m.nz()) {
                        return Err(Error::DimensionMismatch(
                            "channel index out of range".into(),
                        ));
                    }
                }
                RequirementKind::PoleRegion(_) => {}
            }
        }
        if let Some(b) = &self.bounds {
            if b.len() != self.structure.parameter_count() {
                return Err(Error::DimensionMismatch("bounds length".into()));
            }
        }
        self.instances().map(|_| ())
    }

    /// Models paired with schedule values. A scheduled structure replicates
    /// a single model over all samples; otherwise the model count must be a
    /// multiple of the sample count and model `i` is paired with sample
    /// `i mod samples`, so several plants can share one sample.
    pub fn instances(&self) -> Result<Vec<Instance<T>>> {
        if !self.structure.is_scheduled() {
            return Ok((0..self.models.len())
                .map(|model| Instance { model, q: None })
                .collect());
        }
        let samples: Vec<T> = match &self.schedule_samples {
            Some(s) => s.clone(),
            None => DEFAULT_SCHEDULE.iter().map(|&v| lit(v)).collect(),
        };
        if samples.is_empty() {
            return Err(Error::InvalidArgument("empty schedule".into()));
        }
        let n = samples.len();
        if self.models.len() > 1 && self.models.len().is_multiple_of(n) {
            Ok((0..self.models.len())
                .map(|model| Instance {
                    model,
                    q: Some(samples[model % n]),
                })
                .collect())
        } else if self.models.len() == 1 {
            Ok(samples
                .iter()
                .map(|&q| Instance {
                    model: 0,
                    q: Some(q),
                })
                .collect())
        } else {
            Err(Error::InvalidArgument(format!(
                "{} models cannot be paired with {} schedule samples",
                self.models.len(),
                samples.len()
            )))
        }
    }

    /// Structure box intersected with the program box.
    pub fn param_bounds(&self) -> Vec<Bound<T>> {
        let own = self.structure.default_bounds();
        match &self.bounds {
            Some(extra) => own.iter().zip(extra).map(|(a, b)| a.meet(b)).collect(),
            None => own,
        }
    }

    pub fn params(&self, x: DVector<T>) -> Result<ParamVector<T>> {
        ParamVector::new(x, self.param_bounds())
    }
}

/// Value of one requirement at one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct TermValue<T: Real> {
    pub requirement: usize,
    pub instance: usize,
    pub class: Class,
    pub value: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation<T: Real> {
    pub f: T,
    pub g: T,
    pub soft: Vec<Subgradient<T>>,
    pub hard: Vec<Subgradient<T>>,
    pub stable: bool,
    /// Largest closed-loop spectral abscissa over all instances.
    pub abscissa: T,
    pub terms: Vec<TermValue<T>>,
}

struct InstanceEval<T: Real> {
    abscissa: T,
    abscissa_subgradients: Vec<Subgradient<T>>,
    terms: Vec<(TermValue<T>, Vec<Subgradient<T>>)>,
}

fn eval_instance<T: Real>(
    program: &Program<T>,
    x: &ParamVector<T>,
    idx: usize,
    inst: &Instance<T>,
    with_terms: bool,
) -> Result<InstanceEval<T>> {
    let plant = &program.models[inst.model];
    let k = structure::assemble(&program.structure, x, inst.q)?;
    let jac = structure::jacobian(&program.structure, x, inst.q)?;
    let clp = lft_lower(plant, &k)?;
    let dq = sensitivity::closed_loop_jacobian(plant, &k, &jac)?;
    let spectrum = Spectrum::of_matrix(&clp.a)?;
    let abscissa_subgradients = if spectrum.is_empty() {
        Vec::new()
    } else {
        sensitivity::abscissa_subgradients(&clp, &dq, &spectrum)?
    };
    let mut terms = Vec::new();
    if with_terms && spectrum.is_stable() {
        for (ri, r) in program.requirements.iter().enumerate() {
            if r.model != inst.model {
                continue;
            }
            let tv = |value| TermValue {
                requirement: ri,
                instance: idx,
                class: r.class,
                value,
            };
            match r.kind {
                RequirementKind::Hinf { bound } => {
                    let sub = clp.channel(&r.w, &r.z)?;
                    let dsub: Vec<_> = dq.iter().map(|d| d.channel(&r.w, &r.z)).collect();
                    let res = norms::hinf_norm(&sub, lit(norms::DEFAULT_HINF_TOL))?;
                    let scale = r.weight / bound;
                    let grads = sensitivity::hinf_subgradients(&sub, &dsub, &res)?
                        .into_iter()
                        .map(|g| g.scaled(scale))
                        .collect();
                    terms.push((tv(scale * res.value), grads));
                }
                RequirementKind::H2 { bound } => {
                    let sub = clp.channel(&r.w, &r.z)?;
                    let dsub: Vec<_> = dq.iter().map(|d| d.channel(&r.w, &r.z)).collect();
                    let scale = r.weight / bound;
                    let value = norms::h2_norm(&sub)?;
                    let g = sensitivity::h2_gradient(&sub, &dsub)?.scaled(scale);
                    terms.push((tv(scale * value), vec![g]));
                }
                RequirementKind::PoleRegion(goal) => {
                    if spectrum.is_empty() {
                        continue;
                    }
                    let (v, active) = norms::pole_region_violation(&spectrum, &goal);
                    let grads =
                        sensitivity::pole_subgradients(&clp, &dq, &goal, &spectrum, &active)?
                            .into_iter()
                            .map(|g| g.scaled(r.weight))
                            .collect();
                    terms.push((tv(T::one() + r.weight * v), grads));
                }
            }
        }
    }
    Ok(InstanceEval {
        abscissa: spectrum.abscissa,
        abscissa_subgradients,
        terms,
    })
}

fn eval_all<T: Real>(
    program: &Program<T>,
    x: &ParamVector<T>,
    with_terms: bool,
) -> Result<Vec<InstanceEval<T>>> {
    let instances = program.instances()?;
    instances
        .par_iter()
        .enumerate()
        .map(|(i, inst)| eval_instance(program, x, i, inst, with_terms))
        .collect()
}

fn active_max<T: Real>(items: &[(T, &Vec<Subgradient<T>>)]) -> (T, Vec<Subgradient<T>>) {
    let Some(top) = items.iter().map(|(v, _)| *v).reduce(|a, b| a.max(b)) else {
        return (T::zero(), Vec::new());
    };
    let tie = lit::<T>(TIE_TOL) * (T::one() + top.abs());
    let grads = items
        .iter()
        .filter(|(v, _)| *v >= top - tie)
        .flat_map(|(_, g)| g.iter().cloned())
        .collect();
    (top, grads)
}

/// Soft objective `f`, hard constraint `g` and their active subgradients.
/// Unstable closed loops replace both by the stabilization surrogate.
pub fn evaluate<T: Real>(program: &Program<T>, x: &ParamVector<T>) -> Result<Evaluation<T>> {
    let evals = eval_all(program, x, true)?;
    let abscissa = evals
        .iter()
        .map(|e| e.abscissa)
        .fold(-T::max_value().unwrap_or(T::one()), |a, b| a.max(b));
    let stable = evals.iter().all(|e| e.abscissa < T::zero());
    if !stable {
        let (s, grads) = surrogate(&evals);
        return Ok(Evaluation {
            f: s,
            g: s,
            soft: grads.clone(),
            hard: grads,
            stable,
            abscissa,
            terms: Vec::new(),
        });
    }
    let terms: Vec<_> = evals.into_iter().flat_map(|e| e.terms).collect();
    let pick = |class| {
        let items: Vec<_> = terms
            .iter()
            .filter(|(t, _)| t.class == class)
            .map(|(t, g)| (t.value, g))
            .collect();
        active_max(&items)
    };
    let (f, soft) = pick(Class::Soft);
    let (g, hard) = pick(Class::Hard);
    Ok(Evaluation {
        f,
        g,
        soft,
        hard,
        stable,
        abscissa,
        terms: terms.into_iter().map(|(t, _)| t).collect(),
    })
}

/// `max abscissa + margin` over the instances, with its subgradients.
fn surrogate<T: Real>(evals: &[InstanceEval<T>]) -> (T, Vec<Subgradient<T>>) {
    let margin = lit::<T>(STAB_MARGIN);
    let items: Vec<_> = evals
        .iter()
        .map(|e| (e.abscissa + margin, &e.abscissa_subgradients))
        .collect();
    active_max(&items)
}

fn planes_from<T: Real>(value: T, grads: &[Subgradient<T>], n: usize) -> Vec<Plane<T>> {
    if grads.is_empty() {
        return vec![Plane {
            value,
            gradient: DVector::zeros(n),
        }];
    }
    grads
        .iter()
        .map(|g| Plane {
            value,
            gradient: g.vector.clone(),
        })
        .collect()
}

/// Drives every closed loop to abscissa `< -margin`; returns `x0` untouched
/// when it already stabilizes all loops.
pub fn phase0_stabilize<T: Real>(
    program: &Program<T>,
    x0: &ParamVector<T>,
) -> Result<ParamVector<T>> {
    phase0_with(program, x0, 500)
}

fn phase0_with<T: Real>(
    program: &Program<T>,
    x0: &ParamVector<T>,
    budget: usize,
) -> Result<ParamVector<T>> {
    let evals = eval_all(program, x0, false)?;
    if evals.iter().all(|e| e.abscissa < T::zero()) {
        return Ok(x0.clone());
    }
    let n = x0.len();
    let mut oracle = |y: &DVector<T>| -> Result<OracleSample<T>> {
        let p = x0.with_x(y.clone());
        match eval_all(program, &p, false) {
            Ok(evals) => {
                let (s, grads) = surrogate(&evals);
                Ok(OracleSample {
                    point: y.clone(),
                    value: s,
                    planes: planes_from(s, &grads, n),
                    feasible: true,
                    aux: s,
                })
            }
            Err(Error::IllPosed) => Ok(OracleSample::rejected(y.clone())),
            Err(e) => Err(e),
        }
    };
    let opts = BundleOptions {
        max_serious: budget,
        target: Some(T::zero()),
        ..BundleOptions::default()
    };
    let res = bundle::run(&mut oracle, &x0.x, &x0.bounds, &opts)?;
    if res.value < T::zero() {
        Ok(x0.with_x(res.x))
    } else {
        Err(Error::Unstabilizable)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthStatus {
    LocalOptimum,
    Feasible,
    InfeasibleHard,
    Unstabilizable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEntry<T: Real> {
    pub round: usize,
    pub mu: T,
    pub serious_idx: usize,
    /// Penalty value `f + μ max(0, g − 1)`.
    pub phi: T,
    pub f: T,
    pub g: T,
    pub tau: T,
    pub step_norm: T,
    pub certificate: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthResult<T: Real> {
    pub x_star: ParamVector<T>,
    pub f_star: T,
    pub g_star: T,
    pub certificate: T,
    pub status: SynthStatus,
    pub history: Vec<HistoryEntry<T>>,
    pub evaluations: usize,
}

impl<T: Real> SynthResult<T> {
    pub fn history_csv(&self) -> String {
        let mut s = String::from("serious_idx,f,g,tau,step_norm,certificate\n");
        for h in &self.history {
            let _ = writeln!(
                s,
                "{},{:.12e},{:.12e},{:.6e},{:.6e},{:.6e}",
                h.serious_idx,
                to_f64(h.f),
                to_f64(h.g),
                to_f64(h.tau),
                to_f64(h.step_norm),
                to_f64(h.certificate)
            );
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions<T: Real> {
    pub bundle: BundleOptions<T>,
    pub init: InitStrategy<T>,
    pub mu0: T,
    pub mu_factor: T,
    pub max_rounds: usize,
    pub feas_tol: T,
    /// Aggregate-subgradient bound for declaring a local optimum.
    pub cert_tol: T,
    pub phase0_budget: usize,
}

impl<T: Real> Default for SolveOptions<T> {
    fn default() -> Self {
        Self {
            bundle: BundleOptions::default(),
            init: InitStrategy::Zeros,
            mu0: lit(10.0),
            mu_factor: lit(10.0),
            max_rounds: 8,
            feas_tol: lit(1e-6),
            cert_tol: lit(1e-4),
            phase0_budget: 500,
        }
    }
}

/// Stabilization phase followed by exact-penalty rounds.
pub fn solve<T: Real>(program: &Program<T>, opts: &SolveOptions<T>) -> Result<SynthResult<T>> {
    program.validate()?;
    if !(opts.feas_tol > T::zero() && opts.cert_tol > T::zero() && opts.mu0 > T::zero()) {
        return Err(Error::InvalidArgument("tolerances must be positive".into()));
    }
    let init = structure::init_params(&program.structure, &opts.init)?;
    let bounds = program.param_bounds();
    let start = ParamVector {
        x: DVector::zeros(init.len()),
        bounds,
    }
    .with_x(init.x);

    let mut x = match phase0_with(program, &start, opts.phase0_budget) {
        Ok(x) => x,
        Err(Error::Unstabilizable) => {
            let e = evaluate(program, &start)?;
            return Ok(SynthResult {
                x_star: start,
                f_star: e.f,
                g_star: e.g,
                certificate: T::zero(),
                status: SynthStatus::Unstabilizable,
                history: Vec::new(),
                evaluations: 0,
            });
        }
        Err(e) => return Err(e),
    };
    let n = x.len();
    let one = T::one();
    let mut mu = opts.mu0;
    let mut history = Vec::new();
    let mut evaluations = 0;
    let mut serious_idx = 0;
    for round in 0..opts.max_rounds {
        let mut oracle = |y: &DVector<T>| -> Result<OracleSample<T>> {
            let p = x.with_x(y.clone());
            let e = match evaluate(program, &p) {
                Ok(e) => e,
                Err(Error::IllPosed) => return Ok(OracleSample::rejected(y.clone())),
                Err(e) => return Err(e),
            };
            if !e.stable {
                return Ok(OracleSample::rejected(y.clone()));
            }
            let excess = e.g - one;
            let phi = e.f + mu * excess.max(T::zero());
            let tie = lit::<T>(TIE_TOL);
            let soft = if e.soft.is_empty() {
                vec![DVector::zeros(n)]
            } else {
                e.soft.iter().map(|s| s.vector.clone()).collect()
            };
            let mut grads = Vec::new();
            if excess >= -tie && !e.hard.is_empty() {
                for h in &e.hard {
                    grads.push(&soft[0] + &h.vector * mu);
                }
                for s in soft.iter().skip(1) {
                    grads.push(s + &e.hard[0].vector * mu);
                }
            }
            if excess <= tie {
                grads.extend(soft);
            }
            let mut sample = OracleSample::new(y.clone(), phi, grads);
            sample.aux = e.g;
            Ok(sample)
        };
        let res = bundle::run(&mut oracle, &x.x, &x.bounds, &opts.bundle)?;
        evaluations += res.evaluations;
        for h in &res.history {
            serious_idx += 1;
            history.push(HistoryEntry {
                round,
                mu,
                serious_idx,
                phi: h.value,
                f: h.value - mu * (h.aux - one).max(T::zero()),
                g: h.aux,
                tau: h.tau,
                step_norm: h.step_norm,
                certificate: h.certificate,
            });
        }
        x = x.with_x(res.x.clone());
        let e = evaluate(program, &x)?;
        if e.g <= one + opts.feas_tol {
            let status =
                if res.status == BundleStatus::Converged && res.certificate <= opts.cert_tol {
                    SynthStatus::LocalOptimum
                } else {
                    SynthStatus::Feasible
                };
            return Ok(SynthResult {
                x_star: x,
                f_star: e.f,
                g_star: e.g,
                certificate: res.certificate,
                status,
                history,
                evaluations,
            });
        }
        mu *= opts.mu_factor;
    }
    let e = evaluate(program, &x)?;
    Ok(SynthResult {
        x_star: x,
        f_star: e.f,
        g_star: e.g,
        certificate: T::zero(),
        status: SynthStatus::InfeasibleHard,
        history,
        evaluations,
    })
}
