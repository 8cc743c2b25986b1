//! A catalog system bound to one stepper.

use nalgebra::DVector;

use super::catalog::{FlowState, Model};
use super::config::{ConfigError, IntegratorKind, RunConfig};
use crate::error::{Error, Result};
use crate::liegroup::Retraction;
use crate::nlsolve::SolverConfig;
use crate::prk_lie::LieIntegrator;
use crate::prk_vec::{VecIntegrator, INITIAL_CONSTRAINT_TOL};
use crate::tableau::PartitionedTableau;

/// What one step produced.
#[derive(Debug, Clone)]
pub struct Advance {
    pub state: FlowState,
    /// Largest stage constraint violation.
    pub constraint_residual: f64,
    pub iterations: usize,
}

/// A model, a stepper kind and a Lobatto pair.
#[derive(Debug)]
pub struct Runner {
    pub model: Model,
    pub kind: IntegratorKind,
    vector: VecIntegrator,
    lie: LieIntegrator,
}

impl Runner {
    pub fn new(model: Model, kind: IntegratorKind, stages: usize, solver: SolverConfig, retraction: Retraction) -> Result<Self> {
        if !model.supports(kind) {
            return Err(Error::Unsupported(format!(
                "integrator `{kind}` does not apply to system `{}`",
                model.name()
            )));
        }
        let tableau = PartitionedTableau::lobatto(stages)?;
        Ok(Self {
            model,
            kind,
            vector: VecIntegrator::new(tableau.clone(), solver),
            lie: LieIntegrator::new(tableau, solver, retraction),
        })
    }

    /// Builds the model and stepper named by `cfg`.
    pub fn from_config(cfg: &RunConfig) -> std::result::Result<Self, ConfigError> {
        let model = Model::from_config(cfg)?;
        let kind = cfg.integrator.unwrap_or_else(|| model.default_integrator());
        Self::new(model, kind, cfg.stages, cfg.solver, cfg.retraction).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn stages(&self) -> usize {
        self.vector.tableau.stages()
    }

    /// The consistent starting state for configuration coordinates `q` and
    /// velocity `v`, rejected when it violates the constraints the stepper
    /// enforces.
    pub fn start(&self, q: DVector<f64>, v: DVector<f64>) -> Result<FlowState> {
        let state = self.model.initial_state(q, v, self.kind)?;
        let violation = self.model.constraint_residual(self.kind, &state);
        if violation > INITIAL_CONSTRAINT_TOL {
            return Err(Error::InconsistentInitialState(violation));
        }
        Ok(state)
    }

    pub fn step(&self, state: &FlowState, h: f64) -> Result<Advance> {
        use IntegratorKind::*;
        let m = &self.model;
        let (state, constraint_residual, iterations) = match state {
            FlowState::Vector(x) => {
                let (next, rep) = match self.kind {
                    Vprk => self.vector.step_vprk(m.vector().expect("supported"), x, h)?,
                    Holonomic => self.vector.step_holonomic(m.holonomic().expect("supported"), x, h)?,
                    NhLagrangian => self.vector.step_nh_lagrangian(m.vector().expect("supported"), x, h)?,
                    NhHamiltonian => self.vector.step_nh_hamiltonian(m.hamiltonian().expect("supported"), x, h)?,
                    _ => return Err(Error::Unsupported("group stepper applied to a vector state".into())),
                };
                (FlowState::Vector(next), rep.constraint_residual, rep.solve.iterations)
            }
            FlowState::Lie(x) => {
                let (next, rep) = match self.kind {
                    Vprkmk => self.lie.step_vprkmk(m.lie().expect("supported"), x, h)?,
                    NhLie => self.lie.step_nh_lie(m.lie().expect("supported"), x, h)?,
                    NhLieHamiltonian => self.lie.step_nh_lie_hamiltonian(m.lie_hamiltonian().expect("supported"), x, h)?,
                    _ => return Err(Error::Unsupported("vector stepper applied to a group state".into())),
                };
                (FlowState::Lie(next), rep.constraint_residual, rep.solve.iterations)
            }
        };
        Ok(Advance {
            state,
            constraint_residual,
            iterations,
        })
    }

    /// Takes `steps` steps of size `h`, returning the final state or the
    /// failing step index (one-based).
    pub fn advance(&self, mut state: FlowState, h: f64, steps: usize) -> Result<FlowState> {
        for k in 1..=steps {
            state = self
                .step(&state, h)
                .map_err(|e| Error::StepFailed {
                    step: k,
                    source: Box::new(e),
                })?
                .state;
        }
        Ok(state)
    }
}
