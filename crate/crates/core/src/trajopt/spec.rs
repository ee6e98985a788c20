//! Experiment description.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinodynamics::{GravitySpec, MAX_ORDER};
use crate::model::{load_model_file, RobotModel};
use crate::trajopt::bspline::BSplineTrajectory;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// Raw derivative `ν^(d)` of the target links' spatial velocities.
    LinkVelocity,
    /// Raw derivative `q^(d)` of the target joints' coordinates.
    JointCoordinate,
    /// Raw derivative `τ^(d)` of the target joints' torques.
    JointTorque,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSpec {
    pub quantity: Quantity,
    pub order: usize,
    /// Link ids (link quantities) or joint ids (joint quantities); empty selects all.
    #[serde(default)]
    pub targets: Vec<String>,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplineSpec {
    pub degree: usize,
    pub control_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    pub q0: Vec<f64>,
    #[serde(rename = "qT")]
    pub q_t: Vec<f64>,
    pub qd0: Vec<f64>,
    #[serde(rename = "qdT")]
    pub qd_t: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    pub damping: f64,
    pub max_iters: usize,
    pub step_tol: f64,
    pub penalty_ratio: f64,
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        Self {
            damping: 1e-8,
            max_iters: 500,
            step_tol: 1e-12,
            penalty_ratio: 1e12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub model_path: String,
    pub duration_s: f64,
    pub samples: usize,
    pub spline: SplineSpec,
    pub boundary: BoundarySpec,
    pub bounds: BoundsSpec,
    pub gravity: GravitySpec,
    pub costs: Vec<CostSpec>,
    #[serde(default)]
    pub optimizer: OptimizerSpec,
}

/// Cost term with its targets resolved to body indices.
#[derive(Clone, Debug)]
pub struct ResolvedCost {
    pub quantity: Quantity,
    pub order: usize,
    pub bodies: Vec<usize>,
    pub weight: f64,
}

/// A validated experiment bound to its model.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub spec: ExperimentSpec,
    pub model: RobotModel,
    pub costs: Vec<ResolvedCost>,
    pub times: Vec<f64>,
    /// Sample spacing `T / samples`; samples sit at `s·dt`, `s < samples`.
    pub dt: f64,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.costs.iter().map(|c| c.weight).collect()
    }
}

impl Experiment {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let spec = ExperimentSpec::from_json(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        let model = load_model_file(&base.join(&spec.model_path))?;
        Self::new(spec, model)
    }

    pub fn new(spec: ExperimentSpec, model: RobotModel) -> Result<Self> {
        let n = model.num_bodies();
        let invalid = |m: String| Err(Error::Validation(m));
        if !model.all_single_dof() {
            return invalid("trajectory optimization supports one-DoF joints only".into());
        }
        if !(spec.duration_s > 0.0 && spec.duration_s.is_finite()) {
            return invalid(format!("duration must be positive, got {}", spec.duration_s));
        }
        if spec.samples < 1 {
            return invalid("at least one sample is required".into());
        }
        if spec.spline.degree == 0 || spec.spline.control_points < spec.spline.degree + 1 {
            return invalid("spline needs degree ≥ 1 and control_points ≥ degree + 1".into());
        }
        let b = &spec.boundary;
        for (name, v) in [("q0", &b.q0), ("qT", &b.q_t), ("qd0", &b.qd0), ("qdT", &b.qd_t)] {
            if v.len() != n {
                return invalid(format!("boundary {name} has {} entries, model has {n} joints", v.len()));
            }
        }
        if spec.bounds.lower.len() != n || spec.bounds.upper.len() != n {
            return invalid("bounds must list one value per joint".into());
        }
        if spec.bounds.lower.iter().zip(&spec.bounds.upper).any(|(l, u)| l > u) {
            return invalid("bounds are not well ordered".into());
        }
        if spec.costs.is_empty() {
            return invalid("at least one cost term is required".into());
        }
        let o = &spec.optimizer;
        if !(o.damping >= 0.0 && o.step_tol > 0.0 && o.penalty_ratio > 0.0) {
            return invalid("optimizer settings must be positive".into());
        }
        let mut costs = Vec::with_capacity(spec.costs.len());
        for c in &spec.costs {
            if !(c.weight >= 0.0 && c.weight.is_finite()) {
                return invalid(format!("cost weight must be nonnegative, got {}", c.weight));
            }
            if c.order > MAX_ORDER {
                return Err(Error::Order(format!("cost derivative order {} exceeds {MAX_ORDER}", c.order)));
            }
            if c.quantity == Quantity::JointTorque && c.order + 1 > MAX_ORDER {
                return Err(Error::Order("torque derivative order exceeds engine capability".into()));
            }
            let bodies = if c.targets.is_empty() {
                (0..n).collect()
            } else {
                c.targets
                    .iter()
                    .map(|id| resolve_target(&model, c.quantity, id))
                    .collect::<Result<Vec<_>>>()?
            };
            costs.push(ResolvedCost {
                quantity: c.quantity,
                order: c.order,
                bodies,
                weight: c.weight,
            });
        }
        let dt = spec.duration_s / spec.samples as f64;
        let times = (0..spec.samples).map(|s| s as f64 * dt).collect();
        Ok(Self {
            spec,
            model,
            costs,
            times,
            dt,
        })
    }

    pub fn n_q(&self) -> usize {
        self.model.num_bodies()
    }

    pub fn n_theta(&self) -> usize {
        self.n_q() * self.spec.spline.control_points
    }

    pub fn weights(&self) -> Vec<f64> {
        self.costs.iter().map(|c| c.weight).collect()
    }

    /// Same experiment with other cost weights.
    pub fn with_weights(&self, w: &[f64]) -> Result<Self> {
        let mut spec = self.spec.clone();
        for (c, w) in spec.costs.iter_mut().zip(w) {
            c.weight = *w;
        }
        Self::new(spec, self.model.clone())
    }

    pub fn trajectory(&self, theta: DVector<f64>) -> Result<BSplineTrajectory> {
        BSplineTrajectory::new(
            self.spec.spline.degree,
            self.spec.spline.control_points,
            self.n_q(),
            self.spec.duration_s,
            theta,
        )
    }

    /// Control points with the two end pairs pinned to `q0` and `qT` (zero end
    /// velocity) and the interior interpolated linearly between them.
    pub fn initial_theta(&self) -> DVector<f64> {
        let nc = self.spec.spline.control_points;
        let nq = self.n_q();
        let b = &self.spec.boundary;
        DVector::from_fn(nc * nq, |r, _| {
            let (i, j) = (r / nq, r % nq);
            let s = if nc <= 3 {
                i as f64 / (nc - 1) as f64
            } else {
                (i.clamp(1, nc - 2) - 1) as f64 / (nc - 3) as f64
            };
            b.q0[j] + s * (b.q_t[j] - b.q0[j])
        })
    }

    /// Penalty weight `ρ = ratio · max w_i`.
    pub fn penalty_weight(&self) -> f64 {
        let wmax = self.costs.iter().map(|c| c.weight).fold(0.0, f64::max);
        self.spec.optimizer.penalty_ratio * if wmax > 0.0 { wmax } else { 1.0 }
    }
}

fn resolve_target(model: &RobotModel, q: Quantity, id: &str) -> Result<usize> {
    let found = match q {
        Quantity::LinkVelocity => model.link_index(id).and_then(|l| model.body_of_link(l)),
        Quantity::JointCoordinate | Quantity::JointTorque => model.joints.iter().position(|j| j.id == id),
    };
    found.ok_or_else(|| Error::Validation(format!("cost target '{id}' does not name a moving link or joint")))
}
