//! Fixed-point machinery: the Picard map for the nonlinear cascade, the
//! outer control iteration that realizes local null controllability
//! constructively, residual evaluation of the full nonlinear map, and an
//! amplitude-bisection probe for the empirical smallness threshold.

use crate::cascade::{
    solve_extended_linear, CascadePropagators, CascadeState, ControlPair, Geometry,
};
use crate::control::{synthesize_null_control, HumConfig};
use crate::error::{Error, Result};
use crate::grid::SpaceTimeField;
use crate::kdv::{nonlinear_term, third_derivative_matrix, BcVariant};

#[derive(Debug, Clone, Copy)]
pub struct PicardConfig {
    /// Ball radius: iterates whose summed Y-norm exceeds 2R abort.
    pub radius: f64,
    /// Fixed-point increment tolerance in the Y-surrogate norm.
    pub tol: f64,
    pub max_outer: usize,
}

impl PicardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || !(self.tol > 0.0) {
            return Err(Error::config(
                "Picard radius and tolerance must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct PicardHistory {
    pub increments: Vec<f64>,
    pub ball_norms: Vec<f64>,
}

fn state_ball_norm(st: &CascadeState) -> f64 {
    st.u.y_quarter_norm() + st.v.y_quarter_norm() + st.p.y_quarter_norm() + st.q.y_quarter_norm()
}

fn state_increment(a: &CascadeState, b: &CascadeState) -> f64 {
    let mut du = a.u.clone();
    du.axpy(-1.0, &b.u);
    let mut dv = a.v.clone();
    dv.axpy(-1.0, &b.v);
    let mut dp = a.p.clone();
    dp.axpy(-1.0, &b.p);
    let mut dq = a.q.clone();
    dq.axpy(-1.0, &b.q);
    du.y_quarter_norm() + dv.y_quarter_norm() + dp.y_quarter_norm() + dq.y_quarter_norm()
}

/// Frozen sources of the fixed-point map evaluated at the previous iterate:
/// f1 = xi1 + 3 u u_x - 6 v v_x, f2 = xi2 - 3 u v_x,
/// f3 = 3 p u_x - 3 q v_x, f4 = -6 p v_x.
pub fn frozen_sources(
    st: &CascadeState,
    xi1: &SpaceTimeField,
    xi2: &SpaceTimeField,
) -> [SpaceTimeField; 4] {
    let mut f1 = xi1.clone();
    f1.axpy(1.0, &nonlinear_term(&st.u, &st.u, 3.0));
    f1.axpy(1.0, &nonlinear_term(&st.v, &st.v, -6.0));
    let mut f2 = xi2.clone();
    f2.axpy(1.0, &nonlinear_term(&st.u, &st.v, -3.0));
    let mut f3 = nonlinear_term(&st.p, &st.u, 3.0);
    f3.axpy(1.0, &nonlinear_term(&st.q, &st.v, -3.0));
    let f4 = nonlinear_term(&st.p, &st.v, -6.0);
    [f1, f2, f3, f4]
}

/// Picard iteration for the nonlinear extended system: repeated linear
/// cascade solves with the nonlinear terms frozen at the previous iterate.
#[allow(clippy::too_many_arguments)]
pub fn picard_solve_nonlinear(
    props: &CascadePropagators,
    geom: &Geometry,
    u0: &[f64],
    v0: &[f64],
    h: &ControlPair,
    xi1: &SpaceTimeField,
    xi2: &SpaceTimeField,
    cfg: &PicardConfig,
) -> Result<(CascadeState, PicardHistory)> {
    cfg.validate()?;
    let mut history = PicardHistory::default();
    let zero = SpaceTimeField::zeros(geom.grid, geom.tgrid);
    let mut current = CascadeState {
        u: zero.clone(),
        v: zero.clone(),
        p: zero.clone(),
        q: zero.clone(),
    };
    for _round in 0..cfg.max_outer {
        let f = frozen_sources(&current, xi1, xi2);
        let next = solve_extended_linear(
            props,
            geom,
            u0,
            v0,
            h,
            [&f[0], &f[1], &f[2], &f[3]],
        );
        if !(next.u.is_finite() && next.v.is_finite() && next.p.is_finite() && next.q.is_finite()) {
            return Err(Error::convergence(
                "Picard iterate became non-finite (data too large)",
                history.increments,
            ));
        }
        let ball = state_ball_norm(&next);
        let inc = state_increment(&next, &current);
        history.ball_norms.push(ball);
        history.increments.push(inc);
        if ball > 2.0 * cfg.radius {
            return Err(Error::convergence(
                format!(
                    "Picard iterate escaped the ball: norm {ball:.3e} > 2R = {:.3e}",
                    2.0 * cfg.radius
                ),
                history.increments,
            ));
        }
        current = next;
        if inc <= cfg.tol {
            return Ok((current, history));
        }
    }
    Err(Error::convergence(
        format!(
            "Picard did not converge within {} iterations (last increment {:.3e})",
            cfg.max_outer,
            history.increments.last().copied().unwrap_or(f64::NAN)
        ),
        history.increments,
    ))
}

/// Largest source amplitude (for the standard admissible shape) at which the
/// Picard iteration still converges, found by bisection; the numerical
/// analogue of the smallness threshold.
pub fn amplitude_bisection(
    props: &CascadePropagators,
    geom: &Geometry,
    decay: f64,
    cfg: &PicardConfig,
    lo0: f64,
    hi0: f64,
    rounds: usize,
) -> f64 {
    let probe = |amp: f64| -> bool {
        let xi1 = crate::ensemble::admissible_source(&geom.grid, &geom.tgrid, amp, decay, 0.4, 0.3);
        let zero = SpaceTimeField::zeros(geom.grid, geom.tgrid);
        let zdata = vec![0.0; geom.grid.n_nodes()];
        let h = ControlPair::zeros(geom);
        picard_solve_nonlinear(props, geom, &zdata, &zdata, &h, &xi1, &zero, cfg).is_ok()
    };
    let mut lo = lo0;
    let mut hi = hi0;
    if !probe(lo) {
        return 0.0;
    }
    if probe(hi) {
        return hi;
    }
    for _ in 0..rounds {
        let mid = 0.5 * (lo + hi);
        if probe(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[derive(Debug, Clone)]
pub struct OuterRound {
    pub pq0_norm: f64,
    pub control_increment: f64,
    pub cg_iterations: usize,
    pub picard_iterations: usize,
}

#[derive(Debug, Clone, Default)]
pub struct OuterHistory {
    pub rounds: Vec<OuterRound>,
}

/// Outer control iteration: freeze the nonlinear terms, synthesize a linear
/// null control for the combined sources, re-solve the nonlinear cascade under
/// that control, and repeat until the terminal defect and the control
/// increment both drop below their targets.
#[allow(clippy::too_many_arguments)]
pub fn nonlinear_null_control(
    props: &CascadePropagators,
    geom: &Geometry,
    xi1: &SpaceTimeField,
    xi2: &SpaceTimeField,
    hum_cfg: &HumConfig,
    pic_cfg: &PicardConfig,
    pq_target: f64,
    control_tol: f64,
    max_rounds: usize,
) -> Result<(ControlPair, CascadeState, OuterHistory)> {
    let zdata = vec![0.0; geom.grid.n_nodes()];
    let mut history = OuterHistory::default();
    let mut h = ControlPair::zeros(geom);
    let mut state = picard_solve_nonlinear(props, geom, &zdata, &zdata, &h, xi1, xi2, pic_cfg)?.0;

    for _round in 0..max_rounds {
        let f = frozen_sources(&state, xi1, xi2);
        let (h_new, _lin_state, report) =
            synthesize_null_control(props, geom, [&f[0], &f[1], &f[2], &f[3]], hum_cfg)?;
        let mut dh1 = h_new.h1.clone();
        dh1.axpy(-1.0, &h.h1);
        let mut dh2 = h_new.h2.clone();
        dh2.axpy(-1.0, &h.h2);
        let dh = (dh1.l2_space_time().powi(2) + dh2.l2_space_time().powi(2)).sqrt();
        h = h_new;
        let (st, pic_hist) =
            picard_solve_nonlinear(props, geom, &zdata, &zdata, &h, xi1, xi2, pic_cfg)?;
        state = st;
        let pq0 = state.pq0_norm(&geom.grid);
        history.rounds.push(OuterRound {
            pq0_norm: pq0,
            control_increment: dh,
            cg_iterations: report.iterations,
            picard_iterations: pic_hist.increments.len(),
        });
        if pq0 <= pq_target && dh <= control_tol {
            return Ok((h, state, history));
        }
    }
    let pq_hist: Vec<f64> = history.rounds.iter().map(|r| r.pq0_norm).collect();
    Err(Error::convergence(
        format!(
            "outer control iteration missed its target {pq_target:.3e} within {max_rounds} rounds"
        ),
        pq_hist,
    ))
}

/// Midpoint-sampled components of the nonlinear map applied to a state,
/// minus the given external sources; for a state produced by the Picard
/// iteration all four norms sit at the fixed-point tolerance level.
/// Row k of each returned table is the residual at t_{k+1/2}; the tables have
/// M rows of full slices.
pub fn residual_y(
    geom: &Geometry,
    state: &CascadeState,
    h: &ControlPair,
    xi1: &SpaceTimeField,
    xi2: &SpaceTimeField,
) -> [Vec<Vec<f64>>; 4] {
    use crate::cascade::{DISPERSION_P, DISPERSION_Q, DISPERSION_U, DISPERSION_V};
    let tg = geom.tgrid;
    let grid = geom.grid;
    let n = grid.n_nodes();
    let d3l = third_derivative_matrix(&grid, BcVariant::Left);
    let d3r = third_derivative_matrix(&grid, BcVariant::Right);

    // nonlinear contributions, node sampled
    let nl_u = {
        let mut t = nonlinear_term(&state.u, &state.u, -3.0);
        t.axpy(1.0, &nonlinear_term(&state.v, &state.v, 6.0));
        t
    };
    let nl_v = nonlinear_term(&state.u, &state.v, 3.0);
    let nl_p = {
        let mut t = nonlinear_term(&state.p, &state.u, -3.0);
        t.axpy(1.0, &nonlinear_term(&state.q, &state.v, 3.0));
        t
    };
    let nl_q = nonlinear_term(&state.p, &state.v, 6.0);

    let h1m = h.h1.mask(geom.mask_omega());
    let h2m = h.h2.mask(geom.mask_omega());
    let obs_u = state.u.mask(geom.weights_obs());
    let obs_v = state.v.mask(geom.weights_obs());

    let eval = |field: &SpaceTimeField,
                d3: &crate::banded::BandedMatrix,
                a: f64,
                backward: bool,
                nl: &SpaceTimeField,
                subtract: &[&SpaceTimeField]|
     -> Vec<Vec<f64>> {
        let mut rows = Vec::with_capacity(tg.steps());
        for k in 0..tg.steps() {
            let y0 = field.interior(k);
            let y1 = field.interior(k + 1);
            let avg: Vec<f64> = y0.iter().zip(y1).map(|(a0, a1)| 0.5 * (a0 + a1)).collect();
            let disp = d3.matvec(&avg);
            let sgn = if backward { -1.0 } else { 1.0 };
            let mut full = vec![0.0; n];
            for j in 0..avg.len() {
                let mut r = sgn * (y1[j] - y0[j]) / tg.dt() + a * disp[j];
                r += 0.5 * (nl.interior(k)[j] + nl.interior(k + 1)[j]);
                for s in subtract {
                    r -= 0.5 * (s.interior(k)[j] + s.interior(k + 1)[j]);
                }
                full[j + 1] = r;
            }
            rows.push(full);
        }
        rows
    };

    [
        eval(&state.u, &d3l, DISPERSION_U, false, &nl_u, &[&h1m, xi1]),
        eval(&state.v, &d3r, DISPERSION_V, false, &nl_v, &[&h2m, xi2]),
        eval(&state.p, &d3r, DISPERSION_P, true, &nl_p, &[&obs_u]),
        eval(&state.q, &d3l, DISPERSION_Q, true, &nl_q, &[&obs_v]),
    ]
}

/// L2 space-time norms of the four residual tables.
pub fn residual_norms(geom: &Geometry, residuals: &[Vec<Vec<f64>>; 4]) -> [f64; 4] {
    let grid = geom.grid;
    let dt = geom.tgrid.dt();
    let mut out = [0.0; 4];
    for (i, table) in residuals.iter().enumerate() {
        let mut acc = 0.0;
        for row in table {
            let nrm = crate::grid::l2_norm(row, &grid);
            acc += dt * nrm * nrm;
        }
        out[i] = acc.sqrt();
    }
    out
}
