//! One trajectory, one CSV row per step.

use super::catalog::FlowState;
use super::config::{IntegratorKind, RunConfig};
use super::runner::Runner;
use super::table::{Cell, Table};
use super::{prepare, HarnessError};
use crate::error::Error;

/// A trajectory table, possibly cut short by a failed step.
#[derive(Debug)]
pub struct Simulation {
    pub table: Table,
    /// The step that failed, as [`Error::StepFailed`].
    pub failure: Option<Error>,
}

fn lambda_dim(runner: &Runner) -> usize {
    let m = &runner.model;
    match runner.kind {
        IntegratorKind::Holonomic => m.holonomic().map_or(0, |s| s.n_position_constraints()),
        k if k.is_nonholonomic() => m
            .vector()
            .map(|s| s.n_constraints())
            .or_else(|| m.lie().map(|s| s.n_constraints()))
            .unwrap_or(0),
        _ => 0,
    }
}

fn header(runner: &Runner, start: &FlowState) -> Vec<String> {
    let m = &runner.model;
    let n = start.momentum().len();
    let mut h = vec!["t".to_owned()];
    h.extend(m.configuration_names());
    h.extend((0..n).map(|i| format!("{}{i}", m.momentum_prefix())));
    h.extend((0..n).map(|i| format!("{}{i}", m.velocity_prefix())));
    h.extend((0..lambda_dim(runner)).map(|i| format!("lambda{i}")));
    h.push("constraint_residual".into());
    h.push("newton_iterations".into());
    h.extend(m.diagnostic_names().into_iter().map(String::from));
    h
}

fn row(runner: &Runner, state: &FlowState, residual: f64, iterations: usize) -> Vec<Cell> {
    let mut r: Vec<Cell> = vec![state.time().into()];
    r.extend(state.configuration().iter().map(|&x| Cell::Real(x)));
    r.extend(state.momentum().iter().map(|&x| Cell::Real(x)));
    r.extend(state.velocity().iter().map(|&x| Cell::Real(x)));
    // Before the first holonomic step there is no multiplier yet.
    let lambda = state.lambda();
    r.extend((0..lambda_dim(runner)).map(|i| Cell::Real(lambda.get(i).copied().unwrap_or(f64::NAN))));
    r.push(residual.into());
    r.push(iterations.into());
    r.extend(runner.model.diagnostics(state).into_iter().map(Cell::Real));
    r
}

/// Runs `cfg.steps` steps of size `cfg.h` from the configured start, one
/// row per point including the initial one.
///
/// The residual column holds the largest stage constraint violation of the
/// step that produced the row; the first row holds the violation at the start.
pub fn simulate(cfg: &RunConfig) -> Result<Simulation, HarnessError> {
    let (runner, start) = prepare(cfg)?;
    Ok(trajectory(&runner, start, cfg.h, cfg.steps))
}

/// [`simulate`] for an already prepared runner.
pub fn trajectory(runner: &Runner, start: FlowState, h: f64, steps: usize) -> Simulation {
    let mut table = Table::new(header(runner, &start));
    let residual = runner.model.constraint_residual(runner.kind, &start);
    table.push(row(runner, &start, residual, 0));
    let mut state = start;
    let mut failure = None;
    for k in 1..=steps {
        match runner.step(&state, h) {
            Ok(adv) => {
                // Time is recomputed from the step count to avoid accumulated rounding.
                let mut next = adv.state;
                set_time(&mut next, k as f64 * h);
                table.push(row(runner, &next, adv.constraint_residual, adv.iterations));
                state = next;
            }
            Err(e) => {
                failure = Some(Error::StepFailed {
                    step: k,
                    source: Box::new(e),
                });
                break;
            }
        }
    }
    Simulation { table, failure }
}

fn set_time(state: &mut FlowState, t: f64) {
    match state {
        FlowState::Vector(s) => s.t = t,
        FlowState::Lie(s) => s.t = t,
    }
}
