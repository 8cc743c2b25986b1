//! Named example systems with their default data and diagnostics.

use nalgebra::{DMatrix, DVector};

use super::config::{ConfigError, IntegratorKind, RunConfig};
use crate::error::Result;
use crate::lie_mechanics::{lie_energy, LieHamiltonian, LieState, LieSystem};
use crate::liegroup::{MatrixGroup, So3};
use crate::mechanics::{energy, HamiltonianSystem, HolonomicSystem, VecState, VecSystem};
use crate::systems::{BallOnTurntable, ChaoticSystem, Cvt, HarmonicOscillator, NonholonomicParticle, PlanarPendulum, Unicycle};

/// Every name accepted by the `system` key.
pub const NAMES: [&str; 7] = ["particle", "cvt", "chaotic", "unicycle", "ball", "oscillator", "pendulum"];

fn param_names(system: &str) -> &'static [&'static str] {
    match system {
        "cvt" => &["eps"],
        "chaotic" => &["m"],
        "unicycle" => &["mass", "inertia"],
        "ball" => &["radius", "spin", "inertia", "moving_energy_factor"],
        "oscillator" => &["n"],
        "pendulum" => &["gravity"],
        _ => &[],
    }
}

/// Whether `params.<name>` is meaningful for `system`.
pub fn accepts_param(system: &str, name: &str) -> bool {
    param_names(system).contains(&name)
}

/// A catalog system, instantiated with its parameters.
#[derive(Debug)]
pub enum Model {
    Particle(NonholonomicParticle),
    Cvt(Cvt),
    Chaotic(ChaoticSystem),
    Oscillator(HarmonicOscillator),
    Pendulum(PlanarPendulum),
    Unicycle(Unicycle),
    Ball(BallOnTurntable),
}

/// A point of a discrete flow in either setting.
#[derive(Debug, Clone, PartialEq)]
pub enum FlowState {
    Vector(VecState),
    Lie(LieState),
}

impl FlowState {
    pub fn time(&self) -> f64 {
        match self {
            FlowState::Vector(s) => s.t,
            FlowState::Lie(s) => s.t,
        }
    }

    pub fn lambda(&self) -> &DVector<f64> {
        match self {
            FlowState::Vector(s) => &s.lambda,
            FlowState::Lie(s) => &s.lambda,
        }
    }

    /// `p` or `μ`.
    pub fn momentum(&self) -> &DVector<f64> {
        match self {
            FlowState::Vector(s) => &s.p,
            FlowState::Lie(s) => &s.mu,
        }
    }

    /// `v` or `η`.
    pub fn velocity(&self) -> &DVector<f64> {
        match self {
            FlowState::Vector(s) => &s.v,
            FlowState::Lie(s) => &s.eta,
        }
    }

    /// `q`, or the matrix entries of `g` in column-major order.
    pub fn configuration(&self) -> DVector<f64> {
        match self {
            FlowState::Vector(s) => s.q.clone(),
            FlowState::Lie(s) => DVector::from_column_slice(s.g.as_slice()),
        }
    }
}

fn scalar(cfg: &RunConfig, name: &str, default: f64) -> std::result::Result<f64, ConfigError> {
    match cfg.params.get(name).map(Vec::as_slice) {
        None => Ok(default),
        Some([x]) => Ok(*x),
        Some(_) => Err(ConfigError::Invalid(format!("params.{name} expects a single number"))),
    }
}

fn count(cfg: &RunConfig, name: &str, default: usize, min: usize) -> std::result::Result<usize, ConfigError> {
    let x = scalar(cfg, name, default as f64)?;
    if x.fract() != 0.0 || x < min as f64 {
        return Err(ConfigError::Invalid(format!("params.{name} must be an integer ≥ {min}")));
    }
    Ok(x as usize)
}

fn length_check(what: &str, got: usize, want: usize) -> std::result::Result<(), ConfigError> {
    if got == want {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!("{what} has {got} components, expected {want}")))
    }
}

fn invalid(message: String) -> ConfigError {
    ConfigError::Invalid(message)
}

impl Model {
    pub fn from_config(cfg: &RunConfig) -> std::result::Result<Self, ConfigError> {
        Ok(match cfg.system.as_str() {
            "particle" => Model::Particle(NonholonomicParticle),
            "cvt" => Model::Cvt(Cvt {
                eps: scalar(cfg, "eps", 0.5)?,
            }),
            "chaotic" => Model::Chaotic(ChaoticSystem {
                m: count(cfg, "m", 3, 2)?,
            }),
            "oscillator" => Model::Oscillator(HarmonicOscillator {
                n: count(cfg, "n", 1, 1)?,
            }),
            "pendulum" => Model::Pendulum(PlanarPendulum {
                gravity: scalar(cfg, "gravity", 1.0)?,
            }),
            "unicycle" => Model::Unicycle(Unicycle {
                mass: scalar(cfg, "mass", 1.0)?,
                inertia: scalar(cfg, "inertia", 1.0)?,
            }),
            "ball" => {
                let inertia = match cfg.params.get("inertia").map(Vec::as_slice) {
                    None => [0.4; 3],
                    Some([a]) => [*a; 3],
                    Some([a, b, c]) => [*a, *b, *c],
                    Some(_) => return Err(invalid("params.inertia expects one or three numbers".into())),
                };
                let mut ball = BallOnTurntable::new(scalar(cfg, "radius", 1.0)?, scalar(cfg, "spin", 1.0)?, inertia);
                ball.moving_energy_factor = scalar(cfg, "moving_energy_factor", 1.0)?;
                Model::Ball(ball)
            }
            other => return Err(invalid(format!("unknown system `{other}`"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::Particle(_) => "particle",
            Model::Cvt(_) => "cvt",
            Model::Chaotic(_) => "chaotic",
            Model::Oscillator(_) => "oscillator",
            Model::Pendulum(_) => "pendulum",
            Model::Unicycle(_) => "unicycle",
            Model::Ball(_) => "ball",
        }
    }

    pub fn vector(&self) -> Option<&dyn VecSystem> {
        Some(match self {
            Model::Particle(s) => s,
            Model::Cvt(s) => s,
            Model::Chaotic(s) => s,
            Model::Oscillator(s) => s,
            Model::Pendulum(s) => s,
            _ => return None,
        })
    }

    pub fn hamiltonian(&self) -> Option<&dyn HamiltonianSystem> {
        Some(match self {
            Model::Particle(s) => s,
            Model::Cvt(s) => s,
            Model::Chaotic(s) => s,
            Model::Oscillator(s) => s,
            _ => return None,
        })
    }

    pub fn holonomic(&self) -> Option<&dyn HolonomicSystem> {
        match self {
            Model::Pendulum(s) => Some(s),
            _ => None,
        }
    }

    pub fn lie(&self) -> Option<&dyn LieSystem> {
        Some(match self {
            Model::Unicycle(s) => s,
            Model::Ball(s) => s,
            _ => return None,
        })
    }

    pub fn lie_hamiltonian(&self) -> Option<&dyn LieHamiltonian> {
        Some(match self {
            Model::Unicycle(s) => s,
            Model::Ball(s) => s,
            _ => return None,
        })
    }

    /// The stepper used when the configuration names none.
    pub fn default_integrator(&self) -> IntegratorKind {
        match self {
            Model::Oscillator(_) => IntegratorKind::Vprk,
            Model::Pendulum(_) => IntegratorKind::Holonomic,
            Model::Unicycle(_) | Model::Ball(_) => IntegratorKind::NhLie,
            _ => IntegratorKind::NhLagrangian,
        }
    }

    /// Whether `kind` can drive this system.
    pub fn supports(&self, kind: IntegratorKind) -> bool {
        use IntegratorKind::*;
        match kind {
            Vprk | NhLagrangian => self.vector().is_some(),
            NhHamiltonian => self.hamiltonian().is_some(),
            Holonomic => self.holonomic().is_some(),
            Vprkmk | NhLie => self.lie().is_some(),
            NhLieHamiltonian => self.lie_hamiltonian().is_some(),
        }
    }

    /// Names of the configuration columns.
    pub fn configuration_names(&self) -> Vec<String> {
        match self {
            Model::Unicycle(_) => (0..3)
                .flat_map(|j| (0..3).map(move |i| format!("g{i}{j}")))
                .collect(),
            Model::Ball(_) => (0..6)
                .flat_map(|j| (0..6).map(move |i| format!("g{i}{j}")))
                .collect(),
            _ => (0..self.vector().map_or(0, |s| s.dim())).map(|i| format!("q{i}")).collect(),
        }
    }

    pub fn momentum_prefix(&self) -> &'static str {
        if self.lie().is_some() {
            "mu"
        } else {
            "p"
        }
    }

    pub fn velocity_prefix(&self) -> &'static str {
        if self.lie().is_some() {
            "eta"
        } else {
            "v"
        }
    }

    pub fn diagnostic_names(&self) -> Vec<&'static str> {
        match self {
            Model::Cvt(_) => vec!["E_d", "E_p", "E_T"],
            Model::Pendulum(_) => vec!["energy", "position_constraint"],
            Model::Unicycle(_) => vec!["energy", "orthogonality"],
            Model::Ball(_) => vec!["energy", "I1", "I2", "I3", "moving_energy", "orthogonality"],
            _ => vec!["energy"],
        }
    }

    /// Values of [`Self::diagnostic_names`] at `state`.
    pub fn diagnostics(&self, state: &FlowState) -> Vec<f64> {
        match (self, state) {
            (Model::Cvt(s), FlowState::Vector(x)) => {
                let (d, p) = (s.driver_energy(&x.q, &x.v), s.passenger_energy(&x.q, &x.v));
                vec![d, p, d + p]
            }
            (Model::Pendulum(s), FlowState::Vector(x)) => {
                vec![energy(s, &x.q, &x.v), s.position_constraint(&x.q).amax()]
            }
            (Model::Unicycle(s), FlowState::Lie(x)) => {
                vec![lie_energy(s, &x.g, &x.eta), orthogonality(&x.g.view((0, 0), (2, 2)).into_owned())]
            }
            (Model::Ball(s), FlowState::Lie(x)) => {
                let [i1, i2, i3] = s.linear_integrals(&x.g, &x.eta);
                vec![
                    lie_energy(s, &x.g, &x.eta),
                    i1,
                    i2,
                    i3,
                    s.moving_energy(&x.g, &x.eta),
                    orthogonality(&x.g.view((0, 0), (3, 3)).into_owned()),
                ]
            }
            (_, FlowState::Vector(x)) => vec![self.vector().map_or(f64::NAN, |s| energy(s, &x.q, &x.v))],
            (_, FlowState::Lie(x)) => vec![self.lie().map_or(f64::NAN, |s| lie_energy(s, &x.g, &x.eta))],
        }
    }

    /// Largest violation of the constraints the stepper `kind` enforces.
    pub fn constraint_residual(&self, kind: IntegratorKind, state: &FlowState) -> f64 {
        let residual = match (kind, state) {
            (IntegratorKind::Holonomic, FlowState::Vector(x)) => {
                self.holonomic().map(|s| s.position_constraint(&x.q))
            }
            (k, FlowState::Vector(x)) if k.is_nonholonomic() => self.vector().map(|s| s.constraint(&x.q, &x.v)),
            (k, FlowState::Lie(x)) if k.is_nonholonomic() => self.lie().map(|s| s.constraint(&x.g, &x.eta)),
            _ => None,
        };
        residual.map_or(0.0, |r| r.iter().fold(0.0, |acc: f64, x| acc.max(x.abs())))
    }

    /// Default or configured initial position and velocity.
    pub fn initial_data(&self, cfg: &RunConfig) -> std::result::Result<(DVector<f64>, DVector<f64>), ConfigError> {
        let init = &cfg.initial;
        let preset = init.preset.as_deref();
        match (self, preset) {
            (Model::Cvt(_), None | Some("low")) | (_, None) => {}
            (Model::Cvt(_), Some("high")) => {}
            (_, Some(p)) => return Err(invalid(format!("unknown initial.preset `{p}` for {}", self.name()))),
        }
        if init.member.is_some() && !matches!(self, Model::Chaotic(_)) {
            return Err(invalid("initial.member only applies to the chaotic system".into()));
        }
        let (q, v) = match (&init.q, &init.v) {
            (Some(q), Some(v)) => (DVector::from_column_slice(q), DVector::from_column_slice(v)),
            (q, v) => {
                let (dq, dv) = self.default_data(cfg)?;
                (
                    q.as_deref().map_or(dq, DVector::from_column_slice),
                    v.as_deref().map_or(dv, DVector::from_column_slice),
                )
            }
        };
        let (nq, nv) = self.coordinate_dims();
        length_check("initial.q", q.len(), nq)?;
        length_check("initial.v", v.len(), nv)?;
        Ok((q, v))
    }

    fn default_data(&self, cfg: &RunConfig) -> std::result::Result<(DVector<f64>, DVector<f64>), ConfigError> {
        let preset = cfg.initial.preset.as_deref();
        Ok(match self {
            Model::Particle(_) => NonholonomicParticle::initial_state(),
            Model::Cvt(_) if preset == Some("high") => Cvt::high_energy_state(),
            Model::Cvt(_) => Cvt::low_energy_state(),
            Model::Chaotic(s) => {
                let member = cfg.initial.member.unwrap_or(0);
                if member > cfg.ensemble_size {
                    return Err(invalid(format!(
                        "initial.member {member} exceeds ensemble.size {}",
                        cfg.ensemble_size
                    )));
                }
                if s.m == 3 {
                    ChaoticSystem::ensemble_state(member, cfg.ensemble_size)
                } else {
                    return Err(invalid("the chaotic system has default initial data only for m = 3".into()));
                }
            }
            Model::Oscillator(s) => (DVector::from_element(s.n, 1.0), DVector::zeros(s.n)),
            Model::Pendulum(_) => {
                let th: f64 = 0.9;
                (
                    DVector::from_vec(vec![th.sin(), -th.cos()]),
                    DVector::from_vec(vec![0.4 * th.cos(), 0.4 * th.sin()]),
                )
            }
            Model::Unicycle(_) => {
                let (g, eta) = Unicycle::initial_state();
                (DVector::from_vec(vec![g[(0, 2)], g[(1, 2)], g[(1, 0)].atan2(g[(0, 0)])]), eta)
            }
            Model::Ball(s) => {
                // The default attitude is the identity, rotation vector zero.
                let (g, eta) = s.initial_state();
                let (x, y) = BallOnTurntable::position(&g);
                (DVector::from_vec(vec![0.0, 0.0, 0.0, x, y]), eta)
            }
        })
    }

    /// Lengths of `initial.q` and `initial.v`.
    pub fn coordinate_dims(&self) -> (usize, usize) {
        match self {
            Model::Unicycle(_) => (3, 3),
            Model::Ball(_) => (5, 5),
            _ => {
                let n = self.vector().map_or(0, |s| s.dim());
                (n, n)
            }
        }
    }

    /// The group element described by `initial.q`: `(x, y, θ)` for the
    /// unicycle, a rotation vector and table position for the ball.
    pub fn element(&self, q: &DVector<f64>) -> Option<DMatrix<f64>> {
        match self {
            Model::Unicycle(_) => Some(Unicycle::pose(q[0], q[1], q[2])),
            Model::Ball(s) => Some(s.element(&So3.exp(&q.rows(0, 3).into_owned()), q[3], q[4])),
            _ => None,
        }
    }

    /// The starting state for `kind`, with the continuous multiplier when the
    /// stepper enforces velocity constraints.
    pub fn initial_state(&self, q: DVector<f64>, v: DVector<f64>, kind: IntegratorKind) -> Result<FlowState> {
        Ok(match (self.element(&q), self.lie()) {
            (Some(g), Some(sys)) => FlowState::Lie(if kind.is_nonholonomic() {
                LieState::consistent(sys, 0.0, g, v)?
            } else {
                LieState::from_velocity(sys, 0.0, g, v)
            }),
            _ => {
                let sys = self.vector().expect("vector model");
                FlowState::Vector(if kind.is_nonholonomic() {
                    VecState::consistent(sys, 0.0, q, v)?
                } else {
                    VecState::from_velocity(sys, 0.0, q, v)
                })
            }
        })
    }
}

/// `‖RᵀR − I‖_∞`.
fn orthogonality(r: &DMatrix<f64>) -> f64 {
    (r.transpose() * r - DMatrix::identity(r.nrows(), r.ncols())).amax()
}
