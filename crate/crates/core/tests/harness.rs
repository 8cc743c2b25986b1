use nhprk::harness::{converge, ensemble, simulate, tableau_table, ConfigError, HarnessError, RunConfig};

fn config(text: &str) -> RunConfig {
    RunConfig::parse(text, &[]).unwrap()
}

#[test]
fn scalar_and_vector_values_parse() {
    let cfg = config("system = particle\nh = 0.1\ninitial.q = 1, 0, 1\n");
    assert_eq!(cfg.h, 0.1);
    assert_eq!(cfg.initial.q.as_deref(), Some(&[1.0, 0.0, 1.0][..]));
}

#[test]
fn missing_system_names_the_key() {
    let err = RunConfig::parse("h = 0.1\n", &[]).unwrap_err();
    assert!(matches!(err, ConfigError::Missing("system")));
    assert!(err.to_string().contains("system"));
}

#[test]
fn particle_trajectory_keeps_the_constraint() {
    let sim = simulate(&config("system = particle\nstages = 2\nh = 0.01\nsteps = 1000\n")).unwrap();
    assert!(sim.failure.is_none());
    assert_eq!(sim.table.rows.len(), 1001);
    let residuals = sim.table.column("constraint_residual").unwrap();
    assert!(residuals.iter().all(|r| *r <= 1e-10));
    let t = sim.table.column("t").unwrap();
    assert_eq!(t[1000], 10.0);
}

#[test]
fn identical_configs_give_identical_csv() {
    let text = "system = ball\nh = 0.05\nsteps = 40\n";
    let a = simulate(&config(text)).unwrap().table.to_csv_string();
    let b = simulate(&config(text)).unwrap().table.to_csv_string();
    assert_eq!(a, b);
    assert!(a.starts_with("t,g00,"));
    assert!(!a.contains('\r'));
}

#[test]
fn homogeneous_ball_integrals_are_flat_columns() {
    let sim = simulate(&config("system = ball\nstages = 3\nh = 0.05\nsteps = 400\n")).unwrap();
    for name in ["I1", "I2", "I3"] {
        let col = sim.table.column(name).unwrap();
        let drift = col.iter().map(|x| (x - col[0]).abs()).fold(0.0, f64::max);
        assert!(drift <= 1e-10, "{name}: {drift:e}");
    }
}

#[test]
fn unsupported_integrator_is_a_config_error() {
    let err = simulate(&config("system = particle\nintegrator = nh-lie\n")).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn inconsistent_initial_state_is_rejected() {
    let err = simulate(&config("system = particle\ninitial.q = 0, 1, 0\ninitial.v = 1, 0, 0\n")).unwrap_err();
    assert!(matches!(err, HarnessError::InitialState(_)), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn ensemble_starts_on_the_energy_level() {
    let report = ensemble(&config("system = chaotic\nh = 0.1\nsteps = 20\nensemble.size = 5\n")).unwrap();
    assert!(report.dropped.is_empty());
    assert_eq!(report.initial_energies.len(), 6);
    for e in &report.initial_energies {
        assert!((e - 3.06).abs() <= 1e-12, "{e}");
    }
    let mu = report.table.column("mu").unwrap();
    assert_eq!(mu[0], 0.0);
    assert_eq!(mu.len(), 21);
}

#[test]
fn ensemble_rejects_other_systems() {
    let err = ensemble(&config("system = particle\n")).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn two_stage_convergence_is_second_order() {
    let report = converge(&config("system = particle\nstages = 2\nconverge.h_ref = 1e-3\n")).unwrap();
    for slope in [report.slope_q, report.slope_p, report.slope_lambda] {
        assert!((slope - 2.0).abs() <= 0.3, "{report:?}");
    }
    let table = report.to_table();
    assert_eq!(table.rows.len(), report.steps.len());
}

#[test]
fn convergence_needs_commensurate_steps() {
    let err = converge(&config("system = particle\nconverge.h = 0.3\n")).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn tableau_dump_lists_coefficients_and_certificate() {
    let table = tableau_table(3).unwrap();
    assert_eq!(table.header, ["quantity", "i", "j", "value"]);
    let value = |name: &str, i: usize, j: usize| {
        let csv = table.to_csv_string();
        let prefix = format!("{name},{i},{j},");
        let line = csv.lines().find(|l| l.starts_with(&prefix)).unwrap_or_else(|| panic!("{prefix}"));
        line[prefix.len()..].parse::<f64>().unwrap()
    };
    assert!((value("a", 1, 0) - 5.0 / 24.0).abs() < 1e-15);
    assert!((value("b_hat", 1, 0) - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(value("p", 0, 0), 4.0);
    assert_eq!(value("r_inf", 0, 0), 1.0);
    assert_eq!(table.rows.len(), 2 * 9 + 4 * 3 + 17);
}
