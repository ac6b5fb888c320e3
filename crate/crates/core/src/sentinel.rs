//! Sentinel functional, insensitivity diagnostics and the Carleman /
//! observability ratio audits.

use crate::cascade::{
    solve_adjoint, solve_extended_linear, CascadePropagators, ControlPair, Geometry,
};
use crate::ensemble;
use crate::error::{Error, Result};
use crate::grid::{inner_product, interval_weights, l2_norm, SpaceTimeField};
use crate::nonlinear::{picard_solve_nonlinear, PicardConfig};
use crate::weights::WeightSet;
use rand::Rng;

/// Unit perturbation directions of the initial data, with the perturbation
/// size tau. Profiles are normalized to unit discrete L2 norm and projected
/// onto the Dirichlet rows.
#[derive(Debug, Clone)]
pub struct PerturbationSpec {
    pub uhat0: Vec<f64>,
    pub vhat0: Vec<f64>,
    pub tau: f64,
}

impl PerturbationSpec {
    pub fn normalized(
        mut uhat0: Vec<f64>,
        mut vhat0: Vec<f64>,
        tau: f64,
        grid: &crate::grid::Grid1D,
    ) -> Result<Self> {
        if uhat0.len() != grid.n_nodes() || vhat0.len() != grid.n_nodes() {
            return Err(Error::config("perturbation profiles must sample every node"));
        }
        let n = grid.n_nodes();
        for p in [&mut uhat0, &mut vhat0] {
            p[0] = 0.0;
            p[n - 1] = 0.0;
            let nrm = l2_norm(p, grid);
            if nrm <= 1e-14 {
                return Err(Error::config("perturbation profile is numerically zero"));
            }
            for v in p.iter_mut() {
                *v /= nrm;
            }
        }
        if !(tau != 0.0) {
            return Err(Error::config("perturbation size tau must be nonzero"));
        }
        Ok(PerturbationSpec { uhat0, vhat0, tau })
    }

    pub fn random(tau: f64, grid: &crate::grid::Grid1D, rng: &mut impl Rng) -> Self {
        PerturbationSpec {
            uhat0: ensemble::unit_profile(grid, 6, rng),
            vhat0: ensemble::unit_profile(grid, 6, rng),
            tau,
        }
    }
}

/// The sentinel J = 1/2 iint_O u^2 + 1/2 iint_O v^2, trapezoidal in both
/// directions with the interval-consistent observation weights.
pub fn sentinel_value(u: &SpaceTimeField, v: &SpaceTimeField, geom: &Geometry) -> f64 {
    let tg = u.tgrid();
    let grid = u.grid();
    let wobs = geom.weights_obs();
    let mut acc = 0.0;
    for k in 0..tg.n_nodes() {
        let us = u.slice(k);
        let vs = v.slice(k);
        let mut slice = 0.0;
        for j in 0..grid.n_nodes() {
            slice += grid.trap_weight(j) * wobs[j] * (us[j] * us[j] + vs[j] * vs[j]);
        }
        acc += tg.dt() * tg.trap_weight(k) * slice * grid.dx();
    }
    0.5 * acc
}

/// Which dynamics the perturbed solves use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dynamics {
    Linearized,
    Nonlinear,
}

#[allow(clippy::too_many_arguments)]
fn solve_with_initial_data(
    props: &CascadePropagators,
    geom: &Geometry,
    u0: &[f64],
    v0: &[f64],
    h: &ControlPair,
    xi1: &SpaceTimeField,
    xi2: &SpaceTimeField,
    pic: &PicardConfig,
    dynamics: Dynamics,
) -> Result<crate::cascade::CascadeState> {
    match dynamics {
        Dynamics::Linearized => {
            let zero = SpaceTimeField::zeros(geom.grid, geom.tgrid);
            Ok(solve_extended_linear(
                props,
                geom,
                u0,
                v0,
                h,
                [xi1, xi2, &zero, &zero],
            ))
        }
        Dynamics::Nonlinear => {
            let (st, _) = picard_solve_nonlinear(props, geom, u0, v0, h, xi1, xi2, pic)?;
            Ok(st)
        }
    }
}

/// Centered difference (J(+tau) - J(-tau)) / (2 tau) of the sentinel over
/// solutions with initial data (tau uhat0, tau vhat0).
#[allow(clippy::too_many_arguments)]
pub fn insensitivity_derivative(
    props: &CascadePropagators,
    geom: &Geometry,
    h: &ControlPair,
    xi1: &SpaceTimeField,
    xi2: &SpaceTimeField,
    pert: &PerturbationSpec,
    pic: &PicardConfig,
    dynamics: Dynamics,
) -> Result<f64> {
    let n = geom.grid.n_nodes();
    let mut j_vals = [0.0; 2];
    for (slot, sign) in [(0usize, 1.0f64), (1, -1.0)] {
        let tau = sign * pert.tau;
        let mut u0 = vec![0.0; n];
        let mut v0 = vec![0.0; n];
        for j in 0..n {
            u0[j] = tau * pert.uhat0[j];
            v0[j] = tau * pert.vhat0[j];
        }
        let st = solve_with_initial_data(props, geom, &u0, &v0, h, xi1, xi2, pic, dynamics)?;
        j_vals[slot] = sentinel_value(&st.u, &st.v, geom);
    }
    Ok((j_vals[0] - j_vals[1]) / (2.0 * pert.tau))
}

/// First-variation identity behind the cascade reduction: the sentinel
/// derivative versus the pairing of (p(0), q(0)) with the perturbation.
/// Returns (lhs, rhs, |lhs - rhs|).
#[allow(clippy::too_many_arguments)]
pub fn duality_identity_check(
    props: &CascadePropagators,
    geom: &Geometry,
    h: &ControlPair,
    xi1: &SpaceTimeField,
    xi2: &SpaceTimeField,
    pert: &PerturbationSpec,
    pic: &PicardConfig,
    dynamics: Dynamics,
) -> Result<(f64, f64, f64)> {
    let lhs = insensitivity_derivative(props, geom, h, xi1, xi2, pert, pic, dynamics)?;
    let n = geom.grid.n_nodes();
    let zdata = vec![0.0; n];
    let st = solve_with_initial_data(props, geom, &zdata, &zdata, h, xi1, xi2, pic, dynamics)?;
    let rhs = inner_product(st.p.slice(0), &pert.uhat0, &geom.grid)
        + inner_product(st.q.slice(0), &pert.vhat0, &geom.grid);
    Ok((lhs, rhs, (lhs - rhs).abs()))
}

/// Ratio statistics of an audit ensemble.
#[derive(Debug, Clone, Default)]
pub struct RatioStats {
    pub ratios: Vec<f64>,
    /// (lhs, rhs) pairs behind the ratios, in trial order.
    pub pairs: Vec<(f64, f64)>,
    pub skipped: usize,
}

impl RatioStats {
    pub fn max(&self) -> f64 {
        self.ratios.iter().copied().fold(0.0, f64::max)
    }

    pub fn median(&self) -> f64 {
        if self.ratios.is_empty() {
            return 0.0;
        }
        let mut s = self.ratios.clone();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        s[s.len() / 2]
    }

    pub fn all_finite(&self) -> bool {
        self.ratios.iter().all(|r| r.is_finite())
    }
}

fn dx_slice(slice: &[f64], grid: &crate::grid::Grid1D) -> Vec<f64> {
    let n = slice.len();
    let dx = grid.dx();
    let mut out = vec![0.0; n];
    out[0] = (slice[1] - slice[0]) / dx;
    out[n - 1] = (slice[n - 1] - slice[n - 2]) / dx;
    for j in 1..n - 1 {
        out[j] = (slice[j + 1] - slice[j - 1]) / (2.0 * dx);
    }
    out
}

fn dxx_slice(slice: &[f64], grid: &crate::grid::Grid1D) -> Vec<f64> {
    let n = slice.len();
    let dx2 = grid.dx() * grid.dx();
    let mut out = vec![0.0; n];
    for j in 1..n - 1 {
        out[j] = (slice[j + 1] - 2.0 * slice[j] + slice[j - 1]) / dx2;
    }
    out[0] = (slice[2] - 2.0 * slice[1] + slice[0]) / dx2;
    out[n - 1] = (slice[n - 1] - 2.0 * slice[n - 2] + slice[n - 3]) / dx2;
    out
}

/// One-sided/centered third differences without boundary-condition
/// assumptions, for the H3 surrogate.
fn dxxx_slice(slice: &[f64], grid: &crate::grid::Grid1D) -> Vec<f64> {
    let n = slice.len();
    let dx3 = grid.dx().powi(3);
    let mut out = vec![0.0; n];
    for j in 2..n - 2 {
        out[j] =
            (-0.5 * slice[j - 2] + slice[j - 1] - slice[j + 1] + 0.5 * slice[j + 2]) / dx3;
    }
    // one-sided third differences at the four outermost rows
    out[0] = (-slice[0] + 3.0 * slice[1] - 3.0 * slice[2] + slice[3]) / dx3;
    out[1] = (-slice[0] + 3.0 * slice[1] - 3.0 * slice[2] + slice[3]) / dx3;
    out[n - 2] = (slice[n - 1] - 3.0 * slice[n - 2] + 3.0 * slice[n - 3] - slice[n - 4]) / dx3;
    out[n - 1] = (slice[n - 1] - 3.0 * slice[n - 2] + 3.0 * slice[n - 3] - slice[n - 4]) / dx3;
    out
}

fn h3_surrogate_sq(slice: &[f64], grid: &crate::grid::Grid1D) -> f64 {
    let l2 = l2_norm(slice, grid);
    let d1 = l2_norm(&dx_slice(slice, grid), grid);
    let d2 = l2_norm(&dxx_slice(slice, grid), grid);
    let d3 = l2_norm(&dxxx_slice(slice, grid), grid);
    l2 * l2 + d1 * d1 + d2 * d2 + d3 * d3
}

fn random_adjoint_inputs(
    geom: &Geometry,
    rng: &mut impl Rng,
    amplitude: f64,
) -> (Vec<f64>, Vec<f64>, [SpaceTimeField; 4]) {
    let mut zeta0 = ensemble::smooth_profile(&geom.grid, 6, rng);
    let mut theta0 = ensemble::smooth_profile(&geom.grid, 6, rng);
    for v in zeta0.iter_mut().chain(theta0.iter_mut()) {
        *v *= amplitude;
    }
    let mut g = Vec::new();
    for _ in 0..4 {
        let mut f = ensemble::smooth_spacetime(&geom.grid, &geom.tgrid, 6, rng);
        f.scale(amplitude);
        g.push(f);
    }
    (zeta0, theta0, [g.remove(0), g.remove(0), g.remove(0), g.remove(0)])
}

/// Carleman-estimate ratio diagnostic: the weighted left-hand side
/// I(eta) + I(psi) + I(zeta) + I(theta) against the weighted source-gradient
/// and inner-observation right-hand side, over a random ensemble.
pub fn carleman_ratio_audit(
    props: &CascadePropagators,
    geom: &Geometry,
    w: &WeightSet,
    omega0: (f64, f64),
    ensemble_size: usize,
    rng: &mut impl Rng,
) -> Result<RatioStats> {
    let tg = geom.tgrid;
    let grid = geom.grid;
    let wobs0 = interval_weights(omega0, &grid)?;
    let s = w.s;
    let mut stats = RatioStats::default();

    for _ in 0..ensemble_size {
        let (zeta0, theta0, g) = random_adjoint_inputs(geom, rng, 1.0);
        let adj = solve_adjoint(props, geom, &zeta0, &theta0, [&g[0], &g[1], &g[2], &g[3]]);
        let states = [&adj.eta, &adj.psi, &adj.zeta, &adj.theta];

        let mut lhs = 0.0;
        for z in &states {
            // I(z, s) with the original weights; endpoints vanish
            for k in 1..tg.steps() {
                let xi = w.xi(k);
                let wk = tg.dt() * tg.trap_weight(k);
                let slice = z.slice(k);
                let d1 = dx_slice(slice, &grid);
                let d2 = dxx_slice(slice, &grid);
                let mut t5 = 0.0;
                let mut t3 = 0.0;
                let mut t1 = 0.0;
                for j in 0..grid.n_nodes() {
                    let lw = w.log_phi_spacetime(-2.0, 0.0, k, j);
                    let ew = if lw == f64::NEG_INFINITY { 0.0 } else { lw.exp() };
                    let tw = grid.trap_weight(j) * grid.dx() * ew;
                    t5 += tw * slice[j] * slice[j];
                    t3 += tw * d1[j] * d1[j];
                    t1 += tw * d2[j] * d2[j];
                }
                lhs += wk
                    * (s.powi(5) * xi.powi(5) * t5
                        + s.powi(3) * xi.powi(3) * t3
                        + s * xi * t1);
                // + s * e^{-2 s phi_hat} xi^{-3} ||z||_{H3}^2
                let lw = w.log_phi_weight(0.0, -2.0, -3.0, k);
                if lw != f64::NEG_INFINITY {
                    lhs += wk * s * lw.exp() * h3_surrogate_sq(slice, &grid);
                }
            }
        }

        let mut rhs = 0.0;
        for k in 1..tg.steps() {
            let wk = tg.dt() * tg.trap_weight(k);
            // s^5 e^{-12 s phi* + 10 s phi_hat} xi^13 * sum |g_{i,x}|^2
            let lw_g = w.log_phi_weight(-12.0, 10.0, 13.0, k);
            if lw_g != f64::NEG_INFINITY {
                let wg = lw_g.exp();
                let mut acc = 0.0;
                for gi in &g {
                    let d = dx_slice(gi.slice(k), &grid);
                    let nrm = l2_norm(&d, &grid);
                    acc += nrm * nrm;
                }
                rhs += wk * s.powi(5) * wg * acc;
            }
            // s^25 e^{-36 s phi* + 34 s phi_hat} xi^57 * int_{omega0} (eta^2 + psi^2)
            let lw_o = w.log_phi_weight(-36.0, 34.0, 57.0, k);
            if lw_o != f64::NEG_INFINITY {
                let wo = lw_o.exp();
                let mut acc = 0.0;
                for z in [&adj.eta, &adj.psi] {
                    let slice = z.slice(k);
                    for j in 0..grid.n_nodes() {
                        acc += grid.trap_weight(j) * grid.dx() * wobs0[j] * slice[j] * slice[j];
                    }
                }
                rhs += wk * s.powi(25) * wo * acc;
            }
        }

        if lhs == 0.0 && rhs == 0.0 {
            stats.skipped += 1;
            continue;
        }
        stats.pairs.push((lhs, rhs));
        stats.ratios.push(lhs / rhs);
    }
    Ok(stats)
}

/// Observability-inequality ratio diagnostic with the modified weights:
/// terminal norms + weighted sup-in-time and gradient terms of the adjoint
/// against weighted source gradients plus the inner observation of (eta, psi).
pub fn observability_ratio_audit(
    props: &CascadePropagators,
    geom: &Geometry,
    w: &WeightSet,
    omega0: (f64, f64),
    ensemble_size: usize,
    rng: &mut impl Rng,
) -> Result<RatioStats> {
    let tg = geom.tgrid;
    let grid = geom.grid;
    let wobs0 = interval_weights(omega0, &grid)?;
    let s = w.s;
    let mut stats = RatioStats::default();

    for _ in 0..ensemble_size {
        let (zeta0, theta0, g) = random_adjoint_inputs(geom, rng, 1.0);
        let adj = solve_adjoint(props, geom, &zeta0, &theta0, [&g[0], &g[1], &g[2], &g[3]]);
        let states = [&adj.eta, &adj.psi, &adj.zeta, &adj.theta];

        let zt = l2_norm(adj.zeta.slice(tg.steps()), &grid);
        let tt = l2_norm(adj.theta.slice(tg.steps()), &grid);
        let mut lhs = zt * zt + tt * tt;

        // sup_t e^{-2 s S_hat} Z (sum of state L2 norms squared)
        let mut sup_term: f64 = 0.0;
        for k in 1..=tg.steps() {
            let lw = {
                let z = w.frak_z(k);
                -2.0 * s * w.beta_max() * z + z.ln()
            };
            let weight = lw.exp();
            let mut sum = 0.0;
            for z in &states {
                let nrm = l2_norm(z.slice(k), &grid);
                sum += nrm * nrm;
            }
            sup_term = sup_term.max(weight * sum);
        }
        lhs += sup_term;

        // iint e^{-2 s S_hat} Z^3 sum |z_x|^2
        for k in 1..=tg.steps() {
            let z = w.frak_z(k);
            let lw = -2.0 * s * w.beta_max() * z + 3.0 * z.ln();
            let weight = lw.exp();
            if weight == 0.0 {
                continue;
            }
            let wk = tg.dt() * tg.trap_weight(k);
            let mut acc = 0.0;
            for st in &states {
                let d = dx_slice(st.slice(k), &grid);
                let nrm = l2_norm(&d, &grid);
                acc += nrm * nrm;
            }
            lhs += wk * weight * acc;
        }

        let mut rhs = 0.0;
        for k in 1..=tg.steps() {
            let wk = tg.dt() * tg.trap_weight(k);
            let z = w.frak_z(k);
            // e^{-12 s S* + 10 s S_hat} Z^13 sum |g_{i,x}|^2
            let lw_g = s * z * (-12.0 + 10.0 * w.beta_max()) + 13.0 * z.ln();
            let wg = lw_g.exp();
            if wg > 0.0 {
                let mut acc = 0.0;
                for gi in &g {
                    let d = dx_slice(gi.slice(k), &grid);
                    let nrm = l2_norm(&d, &grid);
                    acc += nrm * nrm;
                }
                rhs += wk * wg * acc;
            }
            // e^{-36 s S* + 34 s S_hat} Z^57 int_{omega0}(eta^2 + psi^2)
            let lw_o = s * z * (-36.0 + 34.0 * w.beta_max()) + 57.0 * z.ln();
            let wo = lw_o.exp();
            if wo > 0.0 {
                let mut acc = 0.0;
                for st in [&adj.eta, &adj.psi] {
                    let slice = st.slice(k);
                    for j in 0..grid.n_nodes() {
                        acc += grid.trap_weight(j) * grid.dx() * wobs0[j] * slice[j] * slice[j];
                    }
                }
                rhs += wk * wo * acc;
            }
        }

        if lhs == 0.0 && rhs == 0.0 {
            stats.skipped += 1;
            continue;
        }
        stats.pairs.push((lhs, rhs));
        stats.ratios.push(lhs / rhs);
    }
    Ok(stats)
}
