//! Mean squared energy error over the chaotic ensemble.

use rayon::prelude::*;

use super::catalog::{FlowState, Model};
use super::config::{ConfigError, RunConfig};
use super::runner::Runner;
use super::table::{Cell, Table};
use super::HarnessError;
use crate::error::Error;
use crate::mechanics::energy;
use crate::systems::ChaoticSystem;

/// `μ(E, k)` per step plus bookkeeping.
#[derive(Debug)]
pub struct EnsembleReport {
    /// Columns `k, t, mu, mu_normalized, members`.
    pub table: Table,
    /// Energy of each member at `k = 0`, by member index.
    pub initial_energies: Vec<f64>,
    /// Members whose run failed, with the failure; they are left out of `μ`.
    pub dropped: Vec<(usize, Error)>,
}

fn member_energies(runner: &Runner, sys: &ChaoticSystem, start: FlowState, h: f64, steps: usize) -> Result<Vec<f64>, Error> {
    let level = |s: &FlowState| match s {
        FlowState::Vector(x) => energy(sys, &x.q, &x.v),
        FlowState::Lie(_) => f64::NAN,
    };
    let mut out = Vec::with_capacity(steps + 1);
    out.push(level(&start));
    let mut state = start;
    for k in 1..=steps {
        state = runner
            .step(&state, h)
            .map_err(|e| Error::StepFailed {
                step: k,
                source: Box::new(e),
            })?
            .state;
        out.push(level(&state));
    }
    Ok(out)
}

/// Runs members `j = 0..=J` of the chaotic ensemble for `cfg.steps` steps and
/// reports `μ(E, k) = mean_j (E_jk − E_j0)²`, also divided by `h^{2(2s−2)}`.
///
/// Each member is measured against its own initial energy, which makes
/// `μ(E, 0)` exactly zero; all members start on the same level up to rounding.
pub fn ensemble(cfg: &RunConfig) -> Result<EnsembleReport, HarnessError> {
    let runner = Runner::from_config(cfg)?;
    let sys = match &runner.model {
        Model::Chaotic(s) if s.m == 3 => *s,
        _ => {
            return Err(ConfigError::Invalid("ensemble runs need system = chaotic with params.m = 3".into()).into())
        }
    };
    if cfg.initial.q.is_some() || cfg.initial.v.is_some() || cfg.initial.member.is_some() {
        return Err(ConfigError::Invalid("ensemble runs take their initial data from the ensemble".into()).into());
    }
    let big_j = cfg.ensemble_size;
    let starts = (0..=big_j)
        .map(|j| {
            let (q, v) = ChaoticSystem::ensemble_state(j, big_j);
            runner.start(q, v)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(HarnessError::InitialState)?;
    let runs: Vec<Result<Vec<f64>, Error>> = starts
        .into_par_iter()
        .map(|start| member_energies(&runner, &sys, start, cfg.h, cfg.steps))
        .collect();

    let mut initial_energies = Vec::new();
    let mut survivors = Vec::new();
    let mut dropped = Vec::new();
    for (j, run) in runs.into_iter().enumerate() {
        match run {
            Ok(e) => {
                initial_energies.push(e[0]);
                survivors.push(e);
            }
            Err(err) => {
                initial_energies.push(f64::NAN);
                dropped.push((j, err));
            }
        }
    }
    if survivors.is_empty() {
        let (_, err) = dropped.swap_remove(0);
        return Err(HarnessError::Solver(err));
    }

    let order = 2 * runner.stages() - 2;
    let scale = cfg.h.powi(2 * order as i32);
    let names = ["k", "t", "mu", "mu_normalized", "members"];
    let mut table = Table::new(names.map(String::from).to_vec());
    let count = survivors.len() as f64;
    for k in 0..=cfg.steps {
        let mu = survivors.iter().map(|e| (e[k] - e[0]).powi(2)).sum::<f64>() / count;
        table.push(vec![
            Cell::from(k),
            Cell::Real(k as f64 * cfg.h),
            Cell::Real(mu),
            Cell::Real(mu / scale),
            Cell::from(survivors.len()),
        ]);
    }
    Ok(EnsembleReport {
        table,
        initial_energies,
        dropped,
    })
}
