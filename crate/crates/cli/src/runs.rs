//! Subcommand implementations: each builds its inputs from the configuration,
//! runs the corresponding core pipeline and writes a run directory with CSV
//! artifacts, a summary record and the manifest.

use crate::config::ExperimentConfig;
use crate::output::{RunDir, Summary};
use hskdv_core::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

struct Setup {
    grid: Grid1D,
    tgrid: TimeGrid,
    geom: Geometry,
}

fn setup(cfg: &ExperimentConfig) -> Result<Setup> {
    let grid = Grid1D::new(cfg.length, cfg.grid_n)?;
    let tgrid = TimeGrid::new(cfg.horizon, cfg.grid_m)?;
    let geom = Geometry::new(grid, tgrid, cfg.omega, cfg.obs)?;
    Ok(Setup { grid, tgrid, geom })
}

fn props(cfg: &ExperimentConfig, s: &Setup) -> Result<CascadePropagators> {
    CascadePropagators::new(&s.grid, &s.tgrid, cfg.theta)
}

fn rng_of(cfg: &ExperimentConfig) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed)
}

fn sources(cfg: &ExperimentConfig, s: &Setup) -> (SpaceTimeField, SpaceTimeField) {
    let c1 = 0.4 * cfg.length;
    let c2 = 0.5 * cfg.length;
    let w = 0.3 * cfg.length;
    (
        ensemble::admissible_source(&s.grid, &s.tgrid, cfg.amplitude, cfg.decay, c1, w),
        ensemble::admissible_source(&s.grid, &s.tgrid, cfg.amplitude, cfg.decay, c2, w),
    )
}

fn pic_cfg(cfg: &ExperimentConfig) -> PicardConfig {
    PicardConfig {
        radius: cfg.picard_radius,
        tol: cfg.picard_tol,
        max_outer: cfg.picard_max,
    }
}

fn hum_cfg(cfg: &ExperimentConfig) -> HumConfig {
    HumConfig {
        eps: cfg.eps,
        cg_tol: cfg.cg_tol,
        cg_max: cfg.cg_max,
        s: cfg.s,
    }
}

pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let s = setup(cfg)?;
    let dir = RunDir::create(out, "simulate", &cfg.canonical())?;
    let mut rng = rng_of(cfg);
    let mut init = ensemble::smooth_profile(&s.grid, 6, &mut rng);
    for v in &mut init {
        *v *= cfg.amplitude;
    }
    let spec = KdvOperatorSpec {
        dispersion: cfg.sim_dispersion,
        bc: if cfg.sim_bc == "left" {
            BcVariant::Left
        } else {
            BcVariant::Right
        },
        direction: if cfg.sim_direction == "forward" {
            MarchDirection::Forward
        } else {
            MarchDirection::Backward
        },
    };
    let source = SpaceTimeField::zeros(s.grid, s.tgrid);
    let field = solve_linear_kdv(&spec, &s.grid, &s.tgrid, &init, &source, cfg.theta)?;
    dir.write_field("field.csv", &field)?;
    let mut sum = Summary::default();
    sum.push("subcommand", "simulate");
    sum.push_float("initial_l2", l2_norm(&init, &s.grid));
    sum.push_float(
        "final_l2",
        l2_norm(field.slice(s.tgrid.steps()), &s.grid),
    );
    dir.write_text("summary.txt", &sum.text())?;
    dir.write_manifest(&cfg.canonical(), cfg.seed)?;
    println!("wrote {}", dir.path.display());
    Ok(())
}

pub fn cascade(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let s = setup(cfg)?;
    let dir = RunDir::create(out, "cascade", &cfg.canonical())?;
    let cp = props(cfg, &s)?;
    let mut rng = rng_of(cfg);
    let zero = SpaceTimeField::zeros(s.grid, s.tgrid);
    let mut sum = Summary::default();
    sum.push("subcommand", "cascade");
    sum.push("system", &cfg.cascade_system);
    if cfg.cascade_system == "extended" {
        let (xi1, xi2) = sources(cfg, &s);
        let mut u0 = ensemble::smooth_profile(&s.grid, 6, &mut rng);
        let mut v0 = ensemble::smooth_profile(&s.grid, 6, &mut rng);
        for v in u0.iter_mut().chain(v0.iter_mut()) {
            *v *= cfg.amplitude;
        }
        let h = ControlPair::zeros(&s.geom);
        let st = solve_extended_linear(&cp, &s.geom, &u0, &v0, &h, [&xi1, &xi2, &zero, &zero]);
        dir.write_field("u.csv", &st.u)?;
        dir.write_field("v.csv", &st.v)?;
        dir.write_field("p.csv", &st.p)?;
        dir.write_field("q.csv", &st.q)?;
        sum.push_float("pq0_norm", st.pq0_norm(&s.grid));
        sum.push_float("pq_max_norm", st.pq_max_norm(&s.grid));
    } else {
        let zeta0 = ensemble::smooth_profile(&s.grid, 6, &mut rng);
        let theta0 = ensemble::smooth_profile(&s.grid, 6, &mut rng);
        let adj = solve_adjoint(&cp, &s.geom, &zeta0, &theta0, [&zero, &zero, &zero, &zero]);
        dir.write_field("eta.csv", &adj.eta)?;
        dir.write_field("psi.csv", &adj.psi)?;
        dir.write_field("zeta.csv", &adj.zeta)?;
        dir.write_field("theta.csv", &adj.theta)?;
        sum.push_float("eta_max_l2", adj.eta.max_l2());
        sum.push_float("psi_max_l2", adj.psi.max_l2());
    }
    dir.write_text("summary.txt", &sum.text())?;
    dir.write_manifest(&cfg.canonical(), cfg.seed)?;
    println!("wrote {}", dir.path.display());
    Ok(())
}

pub fn control_linear(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let s = setup(cfg)?;
    let dir = RunDir::create(out, "control-linear", &cfg.canonical())?;
    let cp = props(cfg, &s)?;
    let zero = SpaceTimeField::zeros(s.grid, s.tgrid);
    // criterion-style setup: an admissible source in the p-equation slot
    let f3 = ensemble::admissible_source(
        &s.grid,
        &s.tgrid,
        cfg.amplitude,
        cfg.decay,
        0.4 * cfg.length,
        0.3 * cfg.length,
    );
    let f = [&zero, &zero, &f3, &zero];
    let zdata = vec![0.0; s.grid.n_nodes()];
    let h0 = ControlPair::zeros(&s.geom);
    let baseline_state = solve_extended_linear(&cp, &s.geom, &zdata, &zdata, &h0, f);
    let baseline = baseline_state.pq_max_norm(&s.grid);

    let (h, state, report) = synthesize_null_control(&cp, &s.geom, f, &hum_cfg(cfg))?;
    dir.write_field("h1.csv", &h.h1)?;
    dir.write_field("h2.csv", &h.h2)?;
    dir.write_slices(
        "pq0.csv",
        &s.grid,
        &["p0", "q0"],
        &[state.p.slice(0), state.q.slice(0)],
    )?;
    let mut sum = Summary::default();
    sum.push("subcommand", "control-linear");
    sum.push_float("eps", cfg.eps);
    sum.push_float("pq0_norm", report.pq0_norm);
    sum.push_float("baseline_pq_max", baseline);
    sum.push_float("reduction_vs_baseline", report.pq0_norm / baseline);
    sum.push("cg_iterations", report.iterations);
    sum.push_float("cg_residual", report.final_residual);
    sum.push_float("weighted_source_norm", report.weighted_source_norm);
    let wcfg = WeightConfig {
        omega0: cfg.omega0,
        s: cfg.s,
        k1_override: None,
    };
    let w = build_weights(&wcfg, &s.grid, &s.tgrid)?;
    for e in space_e_report(&cp, &s.geom, &state, &h, &w)? {
        sum.push_float(&format!("spaceE.{}", e.label), e.value);
    }
    dir.write_text("summary.txt", &sum.text())?;
    dir.write_manifest(&cfg.canonical(), cfg.seed)?;
    println!("wrote {}", dir.path.display());
    Ok(())
}

pub fn picard(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let s = setup(cfg)?;
    let dir = RunDir::create(out, "picard", &cfg.canonical())?;
    let cp = props(cfg, &s)?;
    let (xi1, xi2) = sources(cfg, &s);
    let zdata = vec![0.0; s.grid.n_nodes()];
    let h = ControlPair::zeros(&s.geom);
    let (st, hist) =
        picard_solve_nonlinear(&cp, &s.geom, &zdata, &zdata, &h, &xi1, &xi2, &pic_cfg(cfg))?;
    let rows: Vec<String> = hist
        .increments
        .iter()
        .zip(&hist.ball_norms)
        .enumerate()
        .map(|(i, (inc, ball))| format!("{i},{inc:.17e},{ball:.17e}"))
        .collect();
    dir.write_rows("history.csv", "iteration,increment,ball_norm", &rows)?;
    dir.write_field("u.csv", &st.u)?;
    dir.write_field("v.csv", &st.v)?;
    dir.write_field("p.csv", &st.p)?;
    dir.write_field("q.csv", &st.q)?;
    let residual = residual_norms(&s.geom, &residual_y(&s.geom, &st, &h, &xi1, &xi2));
    let mut sum = Summary::default();
    sum.push("subcommand", "picard");
    sum.push("iterations", hist.increments.len());
    sum.push_float(
        "final_increment",
        hist.increments.last().copied().unwrap_or(0.0),
    );
    for (name, r) in ["u", "v", "p", "q"].iter().zip(residual) {
        sum.push_float(&format!("residual_{name}"), r);
    }
    dir.write_text("summary.txt", &sum.text())?;
    dir.write_manifest(&cfg.canonical(), cfg.seed)?;
    println!("wrote {}", dir.path.display());
    Ok(())
}

pub fn control_nonlinear(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let s = setup(cfg)?;
    let dir = RunDir::create(out, "control-nonlinear", &cfg.canonical())?;
    let cp = props(cfg, &s)?;
    let (xi1, xi2) = sources(cfg, &s);
    let zdata = vec![0.0; s.grid.n_nodes()];
    let h0 = ControlPair::zeros(&s.geom);
    let pic = pic_cfg(cfg);
    let (unc, _) = picard_solve_nonlinear(&cp, &s.geom, &zdata, &zdata, &h0, &xi1, &xi2, &pic)?;
    let baseline = unc.pq_max_norm(&s.grid);
    let target = cfg.pq_target_factor * baseline;
    let (h, st, hist) = nonlinear_null_control(
        &cp,
        &s.geom,
        &xi1,
        &xi2,
        &hum_cfg(cfg),
        &pic,
        target,
        cfg.control_tol,
        cfg.outer_max,
    )?;
    let rows: Vec<String> = hist
        .rounds
        .iter()
        .enumerate()
        .map(|(i, r)| {
            format!(
                "{i},{:.17e},{:.17e},{},{}",
                r.pq0_norm, r.control_increment, r.cg_iterations, r.picard_iterations
            )
        })
        .collect();
    dir.write_rows(
        "rounds.csv",
        "round,pq0_norm,control_increment,cg_iterations,picard_iterations",
        &rows,
    )?;
    dir.write_field("h1.csv", &h.h1)?;
    dir.write_field("h2.csv", &h.h2)?;
    dir.write_slices(
        "pq0.csv",
        &s.grid,
        &["p0", "q0"],
        &[st.p.slice(0), st.q.slice(0)],
    )?;
    let mut sum = Summary::default();
    sum.push("subcommand", "control-nonlinear");
    sum.push_float("baseline_pq_max", baseline);
    sum.push_float("pq_target", target);
    sum.push_float("pq0_norm", st.pq0_norm(&s.grid));
    sum.push("outer_rounds", hist.rounds.len());
    dir.write_text("summary.txt", &sum.text())?;
    dir.write_manifest(&cfg.canonical(), cfg.seed)?;
    println!("wrote {}", dir.path.display());
    Ok(())
}

pub fn insensitize(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let s = setup(cfg)?;
    let dir = RunDir::create(out, "insensitize", &cfg.canonical())?;
    let cp = props(cfg, &s)?;
    let (xi1, xi2) = sources(cfg, &s);
    let zdata = vec![0.0; s.grid.n_nodes()];
    let pic = pic_cfg(cfg);
    let h = if cfg.insensitize_control {
        let h0 = ControlPair::zeros(&s.geom);
        let (unc, _) =
            picard_solve_nonlinear(&cp, &s.geom, &zdata, &zdata, &h0, &xi1, &xi2, &pic)?;
        let target = cfg.pq_target_factor * unc.pq_max_norm(&s.grid);
        nonlinear_null_control(
            &cp,
            &s.geom,
            &xi1,
            &xi2,
            &hum_cfg(cfg),
            &pic,
            target,
            cfg.control_tol,
            cfg.outer_max,
        )?
        .0
    } else {
        ControlPair::zeros(&s.geom)
    };

    let mut rng = rng_of(cfg);
    let mut rows = Vec::new();
    let mut max_lin: f64 = 0.0;
    let mut max_nonlin: f64 = 0.0;
    for i in 0..cfg.perturbations {
        let pert = PerturbationSpec::random(cfg.tau, &s.grid, &mut rng);
        let d_lin = insensitivity_derivative(
            &cp,
            &s.geom,
            &h,
            &xi1,
            &xi2,
            &pert,
            &pic,
            Dynamics::Linearized,
        )?;
        let (lhs, rhs, defect) = duality_identity_check(
            &cp,
            &s.geom,
            &h,
            &xi1,
            &xi2,
            &pert,
            &pic,
            Dynamics::Nonlinear,
        )?;
        max_lin = max_lin.max(d_lin.abs());
        max_nonlin = max_nonlin.max(lhs.abs());
        rows.push(format!(
            "{i},{d_lin:.17e},{lhs:.17e},{rhs:.17e},{defect:.17e}"
        ));
    }
    dir.write_rows(
        "insensitivity.csv",
        "perturbation,derivative_linearized,derivative_nonlinear,pq0_pairing,defect",
        &rows,
    )?;

    // tau ladder on a fixed perturbation
    let pert0 = PerturbationSpec::random(cfg.tau, &s.grid, &mut rng);
    let mut ladder_rows = Vec::new();
    for tau in [1e-2, 1e-3, 1e-4] {
        let p = PerturbationSpec {
            uhat0: pert0.uhat0.clone(),
            vhat0: pert0.vhat0.clone(),
            tau,
        };
        let (lhs, rhs, defect) = duality_identity_check(
            &cp,
            &s.geom,
            &h,
            &xi1,
            &xi2,
            &p,
            &pic,
            Dynamics::Nonlinear,
        )?;
        ladder_rows.push(format!("{tau:.17e},{lhs:.17e},{rhs:.17e},{defect:.17e}"));
    }
    dir.write_rows("tau_ladder.csv", "tau,lhs,rhs,defect", &ladder_rows)?;

    let mut sum = Summary::default();
    sum.push("subcommand", "insensitize");
    sum.push(
        "control",
        if cfg.insensitize_control { "on" } else { "off" },
    );
    sum.push_float("max_abs_derivative_linearized", max_lin);
    sum.push_float("max_abs_derivative_nonlinear", max_nonlin);
    dir.write_text("summary.txt", &sum.text())?;
    dir.write_manifest(&cfg.canonical(), cfg.seed)?;
    println!("wrote {}", dir.path.display());
    Ok(())
}

pub fn audit_weights(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let s = setup(cfg)?;
    let dir = RunDir::create(out, "audit-weights", &cfg.canonical())?;
    let w = build_weights(
        &WeightConfig {
            omega0: cfg.omega0,
            s: cfg.s,
            k1_override: None,
        },
        &s.grid,
        &s.tgrid,
    )?;
    dir.write_profile("beta.csv", "x", &s.grid.nodes(), "beta", w.beta())?;
    let interior_times: Vec<f64> = (1..s.tgrid.steps()).map(|k| s.tgrid.time(k)).collect();
    let xi: Vec<f64> = (1..s.tgrid.steps()).map(|k| w.xi(k)).collect();
    let phi_star: Vec<f64> = (1..s.tgrid.steps()).map(|k| w.phi_star(k)).collect();
    let phi_hat: Vec<f64> = (1..s.tgrid.steps()).map(|k| w.phi_hat(k)).collect();
    let gap: Vec<f64> = (1..s.tgrid.steps())
        .map(|k| (36.0 * w.phi_star(k) - 35.0 * w.phi_hat(k)) / w.xi(k))
        .collect();
    dir.write_profile("xi.csv", "t", &interior_times, "xi", &xi)?;
    dir.write_profile("phi_star.csv", "t", &interior_times, "phi_star", &phi_star)?;
    dir.write_profile("phi_hat.csv", "t", &interior_times, "phi_hat", &phi_hat)?;
    dir.write_profile("gap.csv", "t", &interior_times, "gap_ratio", &gap)?;
    let (c0, ok) = w.weight_gap_check();
    let mut sum = Summary::default();
    sum.push("subcommand", "audit-weights");
    sum.push_float("k1", w.k1);
    sum.push_float("k2", w.k2);
    sum.push_float("m_const", w.m_const);
    sum.push_float("c0", c0);
    sum.push("gap_ok", ok);
    dir.write_text("summary.txt", &sum.text())?;
    dir.write_manifest(&cfg.canonical(), cfg.seed)?;
    println!("wrote {}", dir.path.display());
    Ok(())
}

pub fn audit_observability(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let s = setup(cfg)?;
    let dir = RunDir::create(out, "audit-observability", &cfg.canonical())?;
    let cp = props(cfg, &s)?;
    let w = build_weights(
        &WeightConfig {
            omega0: cfg.omega0,
            s: cfg.s,
            k1_override: None,
        },
        &s.grid,
        &s.tgrid,
    )?;
    let mut rng = rng_of(cfg);
    let obs_stats =
        observability_ratio_audit(&cp, &s.geom, &w, cfg.omega0, cfg.ensemble, &mut rng)?;
    let car_stats = carleman_ratio_audit(&cp, &s.geom, &w, cfg.omega0, cfg.ensemble, &mut rng)?;
    for (name, stats) in [("observability", &obs_stats), ("carleman", &car_stats)] {
        let rows: Vec<String> = stats
            .pairs
            .iter()
            .zip(&stats.ratios)
            .enumerate()
            .map(|(i, ((lhs, rhs), ratio))| format!("{i},{lhs:.17e},{rhs:.17e},{ratio:.17e}"))
            .collect();
        dir.write_rows(&format!("{name}.csv"), "trial,lhs,rhs,ratio", &rows)?;
    }
    let mut sum = Summary::default();
    sum.push("subcommand", "audit-observability");
    sum.push("ensemble", cfg.ensemble);
    sum.push_float("observability_max_ratio", obs_stats.max());
    sum.push_float("observability_median_ratio", obs_stats.median());
    sum.push("observability_skipped", obs_stats.skipped);
    sum.push_float("carleman_max_ratio", car_stats.max());
    sum.push_float("carleman_median_ratio", car_stats.median());
    sum.push("carleman_skipped", car_stats.skipped);
    dir.write_text("summary.txt", &sum.text())?;
    dir.write_manifest(&cfg.canonical(), cfg.seed)?;
    println!("wrote {}", dir.path.display());
    Ok(())
}
