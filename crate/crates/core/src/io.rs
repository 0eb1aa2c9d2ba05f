//! JSON formats for systems, plants, structures, programs and results.
//!
//! Matrices are row-major nested arrays. Empty matrices may be written as
//! `[]`; their shape is then inferred from the other blocks (or from the
//! explicit dimensions of a partitioned plant).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::norms::PoleGoal;
use crate::program::{Class, Program, Requirement, RequirementKind, SynthResult, SynthStatus};
use crate::ss::{PartitionedPlant, StateSpace};
use crate::structure::{Bound, StructureSpec};
use crate::{Error, Result};

type Rows = Vec<Vec<f64>>;

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

fn matrix(rows: &Rows, shape: (usize, usize), name: &str) -> Result<DMatrix<f64>> {
    let (r, c) = shape;
    if rows.is_empty() && (r == 0 || c == 0) {
        return Ok(DMatrix::zeros(r, c));
    }
    if rows.len() != r || rows.iter().any(|row| row.len() != c) {
        return Err(parse_err(format!("{name}: expected {r}x{c}")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn shape(rows: &Rows) -> Option<(usize, usize)> {
    if rows.is_empty() {
        None
    } else {
        Some((rows.len(), rows[0].len()))
    }
}

pub fn to_rows(m: &DMatrix<f64>) -> Rows {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemJson {
    #[serde(rename = "A", default)]
    pub a: Rows,
    #[serde(rename = "B", default)]
    pub b: Rows,
    #[serde(rename = "C", default)]
    pub c: Rows,
    #[serde(rename = "D", default)]
    pub d: Rows,
}

impl SystemJson {
    pub fn to_system(&self) -> Result<StateSpace<f64>> {
        let nx = self.a.len();
        let nu = shape(&self.b)
            .map(|s| s.1)
            .or_else(|| shape(&self.d).map(|s| s.1))
            .unwrap_or(0);
        let ny = shape(&self.c)
            .map(|s| s.0)
            .or_else(|| shape(&self.d).map(|s| s.0))
            .unwrap_or(0);
        StateSpace::new(
            matrix(&self.a, (nx, nx), "A")?,
            matrix(&self.b, (nx, nu), "B")?,
            matrix(&self.c, (ny, nx), "C")?,
            matrix(&self.d, (ny, nu), "D")?,
        )
    }

    pub fn from_system(sys: &StateSpace<f64>) -> Self {
        Self {
            a: to_rows(&sys.a),
            b: to_rows(&sys.b),
            c: to_rows(&sys.c),
            d: to_rows(&sys.d),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantJson {
    #[serde(rename = "A", default)]
    pub a: Rows,
    #[serde(rename = "B1", default)]
    pub b1: Rows,
    #[serde(rename = "B2", default)]
    pub b2: Rows,
    #[serde(rename = "C1", default)]
    pub c1: Rows,
    #[serde(rename = "C2", default)]
    pub c2: Rows,
    #[serde(rename = "D11", default)]
    pub d11: Rows,
    #[serde(rename = "D12", default)]
    pub d12: Rows,
    #[serde(rename = "D21", default)]
    pub d21: Rows,
    #[serde(rename = "D22", default)]
    pub d22: Rows,
    pub nw: usize,
    pub nu: usize,
    pub nz: usize,
    pub ny: usize,
}

impl PlantJson {
    pub fn to_plant(&self) -> Result<PartitionedPlant<f64>> {
        let n = self.a.len();
        let (nw, nu, nz, ny) = (self.nw, self.nu, self.nz, self.ny);
        PartitionedPlant::new(
            matrix(&self.a, (n, n), "A")?,
            matrix(&self.b1, (n, nw), "B1")?,
            matrix(&self.b2, (n, nu), "B2")?,
            matrix(&self.c1, (nz, n), "C1")?,
            matrix(&self.c2, (ny, n), "C2")?,
            matrix(&self.d11, (nz, nw), "D11")?,
            matrix(&self.d12, (nz, nu), "D12")?,
            matrix(&self.d21, (ny, nw), "D21")?,
            matrix(&self.d22, (ny, nu), "D22")?,
        )
    }

    pub fn from_plant(p: &PartitionedPlant<f64>) -> Self {
        Self {
            a: to_rows(&p.a),
            b1: to_rows(&p.b1),
            b2: to_rows(&p.b2),
            c1: to_rows(&p.c1),
            c2: to_rows(&p.c2),
            d11: to_rows(&p.d11),
            d12: to_rows(&p.d12),
            d21: to_rows(&p.d21),
            d22: to_rows(&p.d22),
            nw: p.nw(),
            nu: p.nu(),
            nz: p.nz(),
            ny: p.ny(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StructureJson {
    Pid {
        #[serde(default)]
        tau: Option<f64>,
        #[serde(default = "yes")]
        derivative: bool,
    },
    Static {
        nu: usize,
        ny: usize,
    },
    Observer {
        #[serde(rename = "A")]
        a: Rows,
        #[serde(rename = "B2")]
        b2: Rows,
        #[serde(rename = "C2")]
        c2: Rows,
    },
    FullOrder {
        nk: usize,
        nu: usize,
        ny: usize,
    },
    Decentralized {
        blocks: Vec<StructureJson>,
    },
    Filter1,
    PolyScheduled {
        base: Rows,
        degree: usize,
        q0: f64,
    },
    Fixed {
        system: SystemJson,
    },
}

fn yes() -> bool {
    true
}

impl StructureJson {
    pub fn to_spec(&self) -> Result<StructureSpec<f64>> {
        Ok(match self {
            StructureJson::Pid { tau, derivative } => StructureSpec::RealizablePid {
                tau: *tau,
                derivative: *derivative,
            },
            StructureJson::Static { nu, ny } => StructureSpec::StaticGain { nu: *nu, ny: *ny },
            StructureJson::Observer { a, b2, c2 } => {
                let n = a.len();
                let nu = shape(b2).map_or(0, |s| s.1);
                let ny = shape(c2).map_or(0, |s| s.0);
                StructureSpec::ObserverBased {
                    a: matrix(a, (n, n), "A")?,
                    b2: matrix(b2, (n, nu), "B2")?,
                    c2: matrix(c2, (ny, n), "C2")?,
                }
            }
            StructureJson::FullOrder { nk, nu, ny } => StructureSpec::FullOrder {
                nk: *nk,
                nu: *nu,
                ny: *ny,
            },
            StructureJson::Decentralized { blocks } => StructureSpec::Decentralized(
                blocks.iter().map(|b| b.to_spec()).collect::<Result<_>>()?,
            ),
            StructureJson::Filter1 => StructureSpec::FirstOrderFilter,
            StructureJson::PolyScheduled { base, degree, q0 } => {
                let s = shape(base).ok_or_else(|| parse_err("empty schedule base"))?;
                StructureSpec::PolynomialScheduled {
                    base: matrix(base, s, "base")?,
                    degree: *degree,
                    q0: *q0,
                }
            }
            StructureJson::Fixed { system } => StructureSpec::FixedBlock(system.to_system()?),
        })
    }

    pub fn from_spec(spec: &StructureSpec<f64>) -> Self {
        match spec {
            StructureSpec::StaticGain { nu, ny } => StructureJson::Static { nu: *nu, ny: *ny },
            StructureSpec::RealizablePid { tau, derivative } => StructureJson::Pid {
                tau: *tau,
                derivative: *derivative,
            },
            StructureSpec::ObserverBased { a, b2, c2 } => StructureJson::Observer {
                a: to_rows(a),
                b2: to_rows(b2),
                c2: to_rows(c2),
            },
            StructureSpec::FullOrder { nk, nu, ny } => StructureJson::FullOrder {
                nk: *nk,
                nu: *nu,
                ny: *ny,
            },
            StructureSpec::Decentralized(c) => StructureJson::Decentralized {
                blocks: c.iter().map(Self::from_spec).collect(),
            },
            StructureSpec::FirstOrderFilter => StructureJson::Filter1,
            StructureSpec::PolynomialScheduled { base, degree, q0 } => {
                StructureJson::PolyScheduled {
                    base: to_rows(base),
                    degree: *degree,
                    q0: *q0,
                }
            }
            StructureSpec::FixedBlock(k) => StructureJson::Fixed {
                system: SystemJson::from_system(k),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoalJson {
    pub min_decay: f64,
    pub min_damping: f64,
    pub max_frequency: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RequirementJson {
    pub model: usize,
    #[serde(default)]
    pub w: Vec<usize>,
    #[serde(default)]
    pub z: Vec<usize>,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<GoalJson>,
    pub class: String,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

impl RequirementJson {
    pub fn to_requirement(&self) -> Result<Requirement<f64>> {
        let bound = || {
            self.bound
                .ok_or_else(|| parse_err(format!("{} requirement needs \"bound\"", self.kind)))
        };
        let kind = match self.kind.as_str() {
            "hinf" => RequirementKind::Hinf { bound: bound()? },
            "h2" => RequirementKind::H2 { bound: bound()? },
            "poles" => {
                let g = self
                    .goal
                    .as_ref()
                    .ok_or_else(|| parse_err("poles requirement needs \"goal\""))?;
                RequirementKind::PoleRegion(PoleGoal::new(
                    g.min_decay,
                    g.min_damping,
                    g.max_frequency,
                )?)
            }
            other => return Err(parse_err(format!("unknown requirement kind {other:?}"))),
        };
        let class = match self.class.as_str() {
            "soft" => Class::Soft,
            "hard" => Class::Hard,
            other => return Err(parse_err(format!("unknown class {other:?}"))),
        };
        Ok(Requirement {
            model: self.model,
            w: self.w.clone(),
            z: self.z.clone(),
            kind,
            class,
            weight: self.weight,
        })
    }

    pub fn from_requirement(r: &Requirement<f64>) -> Self {
        let (kind, bound, goal) = match r.kind {
            RequirementKind::Hinf { bound } => ("hinf", Some(bound), None),
            RequirementKind::H2 { bound } => ("h2", Some(bound), None),
            RequirementKind::PoleRegion(g) => (
                "poles",
                None,
                Some(GoalJson {
                    min_decay: g.min_decay,
                    min_damping: g.min_damping,
                    max_frequency: g.max_frequency,
                }),
            ),
        };
        Self {
            model: r.model,
            w: r.w.clone(),
            z: r.z.clone(),
            kind: kind.into(),
            bound,
            goal,
            class: match r.class {
                Class::Soft => "soft".into(),
                Class::Hard => "hard".into(),
            },
            weight: r.weight,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProgramJson {
    pub models: Vec<PlantJson>,
    pub structure: StructureJson,
    pub requirements: Vec<RequirementJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule_samples: Option<Vec<f64>>,
    /// Per-parameter `[lo, hi]`, either side may be `null`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<(Option<f64>, Option<f64>)>>,
    /// Starting point; zeros (with the `τ` floor) when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

impl ProgramJson {
    pub fn to_program(&self) -> Result<Program<f64>> {
        let models = self
            .models
            .iter()
            .map(|m| m.to_plant())
            .collect::<Result<Vec<_>>>()?;
        let reqs = self
            .requirements
            .iter()
            .map(|r| r.to_requirement())
            .collect::<Result<Vec<_>>>()?;
        let p = Program {
            models,
            structure: self.structure.to_spec()?,
            requirements: reqs,
            schedule_samples: self.schedule_samples.clone(),
            bounds: self
                .bounds
                .as_ref()
                .map(|b| b.iter().map(|&(lo, hi)| Bound::new(lo, hi)).collect()),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn from_program(p: &Program<f64>) -> Self {
        Self {
            models: p.models.iter().map(PlantJson::from_plant).collect(),
            structure: StructureJson::from_spec(&p.structure),
            requirements: p
                .requirements
                .iter()
                .map(RequirementJson::from_requirement)
                .collect(),
            schedule_samples: p.schedule_samples.clone(),
            bounds: p
                .bounds
                .as_ref()
                .map(|b| b.iter().map(|b| (b.lo, b.hi)).collect()),
            x0: None,
        }
    }

    pub fn initial_point(&self) -> Option<DVector<f64>> {
        self.x0.as_ref().map(|v| DVector::from_row_slice(v))
    }
}

pub fn parse_system(text: &str) -> Result<StateSpace<f64>> {
    serde_json::from_str::<SystemJson>(text)
        .map_err(|e| parse_err(e.to_string()))?
        .to_system()
}

pub fn parse_program(text: &str) -> Result<ProgramJson> {
    serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))
}

pub fn status_name(s: SynthStatus) -> &'static str {
    match s {
        SynthStatus::LocalOptimum => "LocalOptimum",
        SynthStatus::Feasible => "Feasible",
        SynthStatus::InfeasibleHard => "InfeasibleHard",
        SynthStatus::Unstabilizable => "Unstabilizable",
    }
}

pub fn result_json(r: &SynthResult<f64>) -> Value {
    json!({
        "status": status_name(r.status),
        "x_star": r.x_star.x.as_slice(),
        "f_star": r.f_star,
        "g_star": r.g_star,
        "certificate": r.certificate,
        "serious_steps": r.history.len(),
        "evaluations": r.evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn system_roundtrip() {
        let s = parse_system(r#"{"A":[[-1]],"B":[[1]],"C":[[1]],"D":[[0]]}"#).unwrap();
        assert_eq!(s, StateSpace::first_order(1.0, 1.0));
        let text = serde_json::to_string(&SystemJson::from_system(&s)).unwrap();
        assert_eq!(parse_system(&text).unwrap(), s);
    }

    #[test]
    fn pure_gain_with_empty_blocks() {
        let s = parse_system(r#"{"A":[],"B":[],"C":[],"D":[[0.5, 1.0]]}"#).unwrap();
        assert_eq!((s.nx(), s.nu(), s.ny()), (0, 2, 1));
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(parse_system("{"), Err(Error::Parse(_))));
        assert!(matches!(
            parse_system(r#"{"A":[[1,2]],"B":[[1]],"C":[[1]],"D":[[0]]}"#),
            Err(Error::Parse(_))
        ));
        let bad = r#"{"models":[],"structure":{"type":"bogus"},"requirements":[]}"#;
        assert!(parse_program(bad).is_err());
    }

    #[test]
    fn structure_descriptors() {
        let s: StructureJson =
            serde_json::from_str(r#"{"type":"poly_scheduled","base":[[1,2,3]],"degree":2,"q0":3}"#)
                .unwrap();
        assert_eq!(s.to_spec().unwrap().parameter_count(), 6);
        let d: StructureJson = serde_json::from_str(
            r#"{"type":"decentralized","blocks":[{"type":"filter1"},{"type":"pid","tau":0.01,"derivative":false}]}"#,
        )
        .unwrap();
        assert_eq!(d.to_spec().unwrap().parameter_count(), 3);
    }
}
