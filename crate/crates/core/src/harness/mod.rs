//! Experiment drivers behind the command line: simulations, convergence
//! studies, ensembles and tableau dumps, all emitting [`Table`]s.

pub mod catalog;
pub mod config;
pub mod converge;
pub mod ensemble;
pub mod runner;
pub mod simulate;
pub mod table;

pub use catalog::{FlowState, Model};
pub use config::{ConfigError, IntegratorKind, RunConfig};
pub use converge::{converge, ConvergenceReport};
pub use ensemble::{ensemble, EnsembleReport};
pub use runner::{Advance, Runner};
pub use simulate::{simulate, Simulation};
pub use table::{Cell, Table};

use crate::error::{Error, Result};
use crate::tableau::PartitionedTableau;

/// Failures of the experiment drivers, split by who is to blame.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid initial state: {0}")]
    InitialState(Error),
    #[error(transparent)]
    Solver(Error),
}

impl HarnessError {
    /// Process exit code: 2 for configuration problems, 3 for solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::InitialState(_) => 2,
            HarnessError::Solver(_) => 3,
        }
    }
}

/// Builds the runner and starting state described by `cfg`.
pub fn prepare(cfg: &RunConfig) -> std::result::Result<(Runner, FlowState), HarnessError> {
    let runner = Runner::from_config(cfg)?;
    let (q, v) = runner.model.initial_data(cfg)?;
    let start = runner.start(q, v).map_err(HarnessError::InitialState)?;
    Ok((runner, start))
}

/// The coefficients and certificate of the `s`-stage Lobatto pair as rows
/// `quantity, i, j, value`. Matrices are dumped row-major; vectors use
/// `j = 0`, scalars `i = j = 0`.
pub fn tableau_table(s: usize) -> Result<Table> {
    let pair = PartitionedTableau::lobatto(s)?;
    let mut table = Table::new(["quantity", "i", "j", "value"].map(String::from).to_vec());
    let mut put = |name: &'static str, i: usize, j: usize, value: f64| {
        table.push(vec![Cell::Label(name), i.into(), j.into(), value.into()]);
    };
    for (name, m) in [("a", pair.primal.a()), ("a_hat", pair.dual.a())] {
        for i in 0..s {
            for j in 0..s {
                put(name, i, j, m[(i, j)]);
            }
        }
    }
    for (name, v) in [("b", pair.primal.b()), ("c", pair.primal.c()), ("b_hat", pair.dual.b()), ("c_hat", pair.dual.c())] {
        for i in 0..s {
            put(name, i, 0, v[i]);
        }
    }
    for (name, value) in certificate_entries(&pair) {
        put(name, 0, 0, value);
    }
    Ok(table)
}

/// Named scalar properties of a pair, hypotheses as 0/1 flags.
pub fn certificate_entries(pair: &PartitionedTableau) -> Vec<(&'static str, f64)> {
    let c = &pair.cert;
    let h = &c.hypotheses;
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    vec![
        ("p", c.p as f64),
        ("q", c.q as f64),
        ("r", c.r as f64),
        ("p_hat", c.p_dual as f64),
        ("q_hat", c.q_dual as f64),
        ("r_hat", c.r_dual as f64),
        ("cc_hat", c.cc_dual as f64),
        ("dd_hat", c.dd_dual as f64),
        ("c_hat_c", c.dual_cc as f64),
        ("d_hat_d", c.dual_dd as f64),
        ("r_inf", c.r_inf.unwrap_or(f64::NAN)),
        ("symplecticity_residual", pair.symplecticity_residual()),
        ("h1", flag(h.first_row_zero)),
        ("h2", flag(h.trailing_invertible)),
        ("h3", flag(h.stiffly_accurate)),
        ("h1_prime", flag(h.dual_last_column_zero)),
        ("h2_prime", flag(h.dual_first_column_b1)),
    ]
}
