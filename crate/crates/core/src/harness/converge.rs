//! Global error against a fine-step reference, and fitted orders.

use rayon::prelude::*;

use super::catalog::FlowState;
use super::config::{ConfigError, RunConfig};
use super::table::{Cell, Table};
use super::{prepare, HarnessError};

/// Errors at the final time for each step size, with least-squares slopes.
///
/// For group systems `err_q` compares the group elements entrywise and
/// `err_p` the trivialized momenta.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub steps: Vec<f64>,
    pub err_q: Vec<f64>,
    pub err_p: Vec<f64>,
    pub err_lambda: Vec<f64>,
    pub slope_q: f64,
    pub slope_p: f64,
    pub slope_lambda: f64,
    /// Expected order of `q` and `p`.
    pub predicted_qp: f64,
    /// Expected order of `λ`, `NaN` for steppers without velocity multipliers.
    pub predicted_lambda: f64,
}

impl ConvergenceReport {
    pub fn to_table(&self) -> Table {
        let names = [
            "h",
            "err_q",
            "err_p",
            "err_lambda",
            "slope_q",
            "slope_p",
            "slope_lambda",
            "predicted_qp",
            "predicted_lambda",
        ];
        let mut t = Table::new(names.map(String::from).to_vec());
        for (i, &h) in self.steps.iter().enumerate() {
            t.push(
                [
                    h,
                    self.err_q[i],
                    self.err_p[i],
                    self.err_lambda[i],
                    self.slope_q,
                    self.slope_p,
                    self.slope_lambda,
                    self.predicted_qp,
                    self.predicted_lambda,
                ]
                .map(Cell::Real)
                .to_vec(),
            );
        }
        t
    }
}

/// Orders for the `s`-stage Lobatto pair: `2s − 2` for positions and
/// momenta; `s` for even `s` and `s − 1` for odd `s` for the multipliers.
pub fn predicted_orders(s: usize) -> (f64, f64) {
    let lambda = if s % 2 == 0 { s } else { s - 1 };
    ((2 * s - 2) as f64, lambda as f64)
}

/// Least-squares slope of `log err` against `log h` over the errors above
/// `floor`; `NaN` with fewer than two such points.
pub fn fitted_slope(steps: &[f64], errors: &[f64], floor: f64) -> f64 {
    let points: Vec<(f64, f64)> = steps
        .iter()
        .zip(errors)
        .filter(|(_, &e)| e > floor && e.is_finite())
        .map(|(&h, &e)| (h.ln(), e.ln()))
        .collect();
    if points.len() < 2 {
        return f64::NAN;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn step_count(final_time: f64, h: f64) -> Result<usize, ConfigError> {
    let n = (final_time / h).round();
    if n < 1.0 || (n * h - final_time).abs() > 1e-9 * final_time {
        return Err(ConfigError::Invalid(format!(
            "converge.final_time {final_time} is not a multiple of step {h}"
        )));
    }
    Ok(n as usize)
}

fn gap(a: &FlowState, b: &FlowState) -> (f64, f64, f64) {
    let diff = |x: &nalgebra::DVector<f64>, y: &nalgebra::DVector<f64>| {
        if x.len() == y.len() {
            (x - y).iter().fold(0.0, |m: f64, d| m.max(d.abs()))
        } else {
            f64::NAN
        }
    };
    (
        diff(&a.configuration(), &b.configuration()),
        diff(a.momentum(), b.momentum()),
        diff(a.lambda(), b.lambda()),
    )
}

/// Runs every step size of `cfg.converge` and the reference to the same
/// final time, in parallel.
pub fn converge(cfg: &RunConfig) -> Result<ConvergenceReport, HarnessError> {
    let settings = &cfg.converge;
    let (runner, start) = prepare(cfg)?;
    let mut jobs = vec![(settings.reference_step, step_count(settings.final_time, settings.reference_step)?)];
    for &h in &settings.steps {
        jobs.push((h, step_count(settings.final_time, h)?));
    }
    let finals = jobs
        .par_iter()
        .map(|&(h, n)| runner.advance(start.clone(), h, n))
        .collect::<Result<Vec<_>, _>>()
        .map_err(HarnessError::Solver)?;
    let reference = &finals[0];
    let gaps: Vec<_> = finals[1..].iter().map(|f| gap(f, reference)).collect();
    let err_q: Vec<f64> = gaps.iter().map(|g| g.0).collect();
    let err_p: Vec<f64> = gaps.iter().map(|g| g.1).collect();
    let err_lambda: Vec<f64> = gaps.iter().map(|g| g.2).collect();
    let floor = settings.noise_floor;
    let (predicted_qp, predicted_lambda) = predicted_orders(runner.stages());
    let constrained = runner.kind.is_nonholonomic() && !start.lambda().is_empty();
    Ok(ConvergenceReport {
        slope_q: fitted_slope(&settings.steps, &err_q, floor),
        slope_p: fitted_slope(&settings.steps, &err_p, floor),
        slope_lambda: if constrained {
            fitted_slope(&settings.steps, &err_lambda, floor)
        } else {
            f64::NAN
        },
        steps: settings.steps.clone(),
        err_q,
        err_p,
        err_lambda,
        predicted_qp,
        predicted_lambda: if constrained { predicted_lambda } else { f64::NAN },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_ignores_the_noise_floor() {
        let steps = [0.1, 0.05, 0.025, 0.0125];
        let errors: Vec<f64> = steps.iter().map(|h: &f64| 3.0 * h.powi(4)).collect();
        assert!((fitted_slope(&steps, &errors, 0.0) - 4.0).abs() < 1e-12);
        let floored = [1e-4, 6.25e-6, 1e-13, 1e-14];
        assert!((fitted_slope(&steps, &floored, 1e-12) - 4.0).abs() < 1e-12);
        assert!(fitted_slope(&steps, &[1e-13; 4], 1e-12).is_nan());
    }

    #[test]
    fn lobatto_orders() {
        assert_eq!(predicted_orders(2), (2.0, 2.0));
        assert_eq!(predicted_orders(3), (4.0, 2.0));
        assert_eq!(predicted_orders(4), (6.0, 4.0));
    }

    #[test]
    fn final_time_must_be_a_multiple() {
        assert_eq!(step_count(1.0, 0.0125).unwrap(), 80);
        assert!(step_count(1.0, 0.3).is_err());
    }
}
