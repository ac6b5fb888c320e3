//! Penalized-HUM synthesis of the localized null controls for the extended
//! linear system, plus the weighted-norm report for the solution space.
//!
//! The quadratic functional
//!   J_eps(z) = 1/2 sum dt w ||(eta, psi) 1_omega||^2 + eps/2 ||z||^2
//!              + sum dt w <(f1..f4), (eta, psi, zeta, theta)>
//! over adjoint data z = (zeta0, theta0) is minimized by conjugate gradient.
//! Because the adjoint solver is the exact transpose of the forward cascade,
//! the Hessian-vector product is one adjoint solve followed by one forward
//! solve, and the linear term equals <(p_f(0), q_f(0)), z> exactly.

use crate::cascade::{
    solve_adjoint, solve_extended_linear, spacetime_pairing, CascadePropagators, CascadeState,
    ControlPair, Geometry,
};
use crate::error::{Error, Result};
use crate::grid::{h1_seminorm, h_minus1_norm, inner_interior, l2_norm, SpaceTimeField};
use crate::kdv::third_derivative_matrix;
use crate::weights::{WeightRecipe, WeightSet};

#[derive(Debug, Clone, Copy)]
pub struct HumConfig {
    /// Penalization parameter; the terminal defect scales like eps ||z||.
    pub eps: f64,
    /// Relative residual target for the conjugate gradient.
    pub cg_tol: f64,
    pub cg_max: usize,
    /// Weight parameter used by the reporting helpers.
    pub s: f64,
}

impl HumConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::config(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.cg_tol > 0.0 && self.cg_tol < 1.0) {
            return Err(Error::config(format!(
                "cg_tol must lie in (0,1), got {}",
                self.cg_tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct HumReport {
    pub iterations: usize,
    pub final_residual: f64,
    pub pq0_norm: f64,
    /// Quadratic-functional value after each accepted iterate (monotone).
    pub functional_history: Vec<f64>,
    pub weighted_source_norm: f64,
}

/// Adjoint-data pair, interior storage.
#[derive(Debug, Clone)]
pub struct AdjointData {
    pub zeta0: Vec<f64>,
    pub theta0: Vec<f64>,
}

impl AdjointData {
    pub fn zeros(n: usize) -> Self {
        AdjointData {
            zeta0: vec![0.0; n],
            theta0: vec![0.0; n],
        }
    }

    fn axpy(&mut self, alpha: f64, other: &AdjointData) {
        for (a, b) in self.zeta0.iter_mut().zip(&other.zeta0) {
            *a += alpha * b;
        }
        for (a, b) in self.theta0.iter_mut().zip(&other.theta0) {
            *a += alpha * b;
        }
    }
}

fn pair_inner(a: &AdjointData, b: &AdjointData, geom: &Geometry) -> f64 {
    inner_interior(&a.zeta0, &b.zeta0, &geom.grid) + inner_interior(&a.theta0, &b.theta0, &geom.grid)
}

fn full_slice(interior: &[f64], n_nodes: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_nodes];
    out[1..n_nodes - 1].copy_from_slice(interior);
    out
}

/// One application of the HUM operator: z -> B*B z + eps z, where B z is the
/// masked adjoint observation and B* the forward cascade's terminal map.
pub fn hum_apply(
    props: &CascadePropagators,
    geom: &Geometry,
    z: &AdjointData,
    eps: f64,
) -> AdjointData {
    let n = geom.grid.n_nodes();
    let zero = SpaceTimeField::zeros(geom.grid, geom.tgrid);
    let adj = solve_adjoint(
        props,
        geom,
        &full_slice(&z.zeta0, n),
        &full_slice(&z.theta0, n),
        [&zero; 4],
    );
    let h = ControlPair::new(&adj.eta, &adj.psi, geom);
    let zdata = vec![0.0; n];
    let st = solve_extended_linear(props, geom, &zdata, &zdata, &h, [&zero; 4]);
    let mut out = AdjointData {
        zeta0: st.p.interior(0).to_vec(),
        theta0: st.q.interior(0).to_vec(),
    };
    for (o, zi) in out.zeta0.iter_mut().zip(&z.zeta0) {
        *o += eps * zi;
    }
    for (o, zi) in out.theta0.iter_mut().zip(&z.theta0) {
        *o += eps * zi;
    }
    out
}

/// Value of J_eps at z (one extra adjoint solve); used by the gradient tests.
pub fn hum_functional(
    props: &CascadePropagators,
    geom: &Geometry,
    f: [&SpaceTimeField; 4],
    z: &AdjointData,
    eps: f64,
) -> f64 {
    let n = geom.grid.n_nodes();
    let zero = SpaceTimeField::zeros(geom.grid, geom.tgrid);
    let adj = solve_adjoint(
        props,
        geom,
        &full_slice(&z.zeta0, n),
        &full_slice(&z.theta0, n),
        [&zero; 4],
    );
    let h = ControlPair::new(&adj.eta, &adj.psi, geom);
    let obs = 0.5 * h.norm_sq(&geom.tgrid, &geom.grid);
    let penalty = 0.5 * eps * pair_inner(z, z, geom);
    let linear = spacetime_pairing(f[0], &adj.eta)
        + spacetime_pairing(f[1], &adj.psi)
        + spacetime_pairing(f[2], &adj.zeta)
        + spacetime_pairing(f[3], &adj.theta);
    obs + penalty + linear
}

/// Gradient of J_eps at z via the transpose identities:
/// grad = B*B z + eps z + (p_f(0), q_f(0)).
pub fn hum_gradient(
    props: &CascadePropagators,
    geom: &Geometry,
    f: [&SpaceTimeField; 4],
    z: &AdjointData,
    eps: f64,
) -> AdjointData {
    let mut g = hum_apply(props, geom, z, eps);
    let bf = source_term(props, geom, f);
    g.axpy(1.0, &bf);
    g
}

/// (p_f(0), q_f(0)): the forward cascade driven by the sources alone.
fn source_term(
    props: &CascadePropagators,
    geom: &Geometry,
    f: [&SpaceTimeField; 4],
) -> AdjointData {
    let n = geom.grid.n_nodes();
    let zdata = vec![0.0; n];
    let h = ControlPair::zeros(geom);
    let st = solve_extended_linear(props, geom, &zdata, &zdata, &h, f);
    AdjointData {
        zeta0: st.p.interior(0).to_vec(),
        theta0: st.q.interior(0).to_vec(),
    }
}

/// Synthesizes the null controls for zero initial data and the given sources.
pub fn synthesize_null_control(
    props: &CascadePropagators,
    geom: &Geometry,
    f: [&SpaceTimeField; 4],
    cfg: &HumConfig,
) -> Result<(ControlPair, CascadeState, HumReport)> {
    cfg.validate()?;
    let n_int = geom.grid.interior();
    let n = geom.grid.n_nodes();

    // rhs b = -(p_f(0), q_f(0))
    let mut b = source_term(props, geom, f);
    for v in b.zeta0.iter_mut().chain(b.theta0.iter_mut()) {
        *v = -*v;
    }
    let b_norm = pair_inner(&b, &b, geom).sqrt();

    let mut z = AdjointData::zeros(n_int);
    let mut history = Vec::new();
    let mut functional_history = vec![0.0]; // J_eps(0) = 0
    let mut iterations = 0;
    let mut final_residual = 0.0;

    if b_norm > 0.0 {
        // conjugate gradient on (B*B + eps I) z = b
        let mut r = b.clone();
        let mut p = r.clone();
        let mut rr = pair_inner(&r, &r, geom);
        let mut jval = 0.0;
        loop {
            let rel = rr.sqrt() / b_norm;
            history.push(rel);
            final_residual = rel;
            if rel <= cfg.cg_tol {
                break;
            }
            if iterations >= cfg.cg_max {
                return Err(Error::convergence(
                    format!(
                        "HUM conjugate gradient stalled at relative residual {rel:.3e} after {} iterations (target {:.1e})",
                        iterations, cfg.cg_tol
                    ),
                    history,
                ));
            }
            let ap = hum_apply(props, geom, &p, cfg.eps);
            let pap = pair_inner(&p, &ap, geom);
            if !(pap > 0.0) {
                return Err(Error::numeric(format!(
                    "HUM operator lost positivity: <p, Ap> = {pap:.3e}"
                )));
            }
            let alpha = rr / pap;
            z.axpy(alpha, &p);
            r.axpy(-alpha, &ap);
            // J decreases by 1/2 alpha r^T r each accepted step
            jval -= 0.5 * alpha * rr;
            functional_history.push(jval);
            let rr_new = pair_inner(&r, &r, geom);
            let beta = rr_new / rr;
            rr = rr_new;
            let mut p_new = r.clone();
            p_new.axpy(beta, &p);
            p = p_new;
            iterations += 1;
        }
    }

    // controls are the masked adjoint observations at the minimizer
    let zero = SpaceTimeField::zeros(geom.grid, geom.tgrid);
    let adj = solve_adjoint(
        props,
        geom,
        &full_slice(&z.zeta0, n),
        &full_slice(&z.theta0, n),
        [&zero; 4],
    );
    let h = ControlPair::new(&adj.eta, &adj.psi, geom);
    let zdata = vec![0.0; n];
    let state = solve_extended_linear(props, geom, &zdata, &zdata, &h, f);
    let pq0 = state.pq0_norm(&geom.grid);

    // admissibility weight e^{s S_hat} Z^{-1/2} applied to the sources
    let weighted_source_norm = {
        let wcfg = crate::weights::WeightConfig {
            omega0: sane_omega0(geom),
            s: cfg.s,
            k1_override: None,
        };
        match crate::weights::build_weights(&wcfg, &geom.grid, &geom.tgrid) {
            Ok(w) => weighted_l1l2(&w, &WeightRecipe::new(0.0, 1.0, -0.5), f),
            Err(_) => f64::NAN,
        }
    };

    Ok((
        h,
        state,
        HumReport {
            iterations,
            final_residual,
            pq0_norm: pq0,
            functional_history,
            weighted_source_norm,
        },
    ))
}

/// A default inner interval for weight construction when only the geometry
/// is known: the middle half of the overlap of omega and the observation
/// region (falls back to the middle of the domain if they do not overlap).
fn sane_omega0(geom: &Geometry) -> (f64, f64) {
    let lo = geom.omega.0.max(geom.obs.0);
    let hi = geom.omega.1.min(geom.obs.1);
    if lo < hi {
        let mid = 0.5 * (lo + hi);
        let w = 0.25 * (hi - lo);
        (mid - w, mid + w)
    } else {
        let l = geom.grid.length();
        (0.45 * l, 0.55 * l)
    }
}

/// L1-in-time, L2-in-space norm of the four sources under a temporal weight
/// recipe; weights that blow up make the result infinite rather than erroring.
fn weighted_l1l2(w: &WeightSet, recipe: &WeightRecipe, f: [&SpaceTimeField; 4]) -> f64 {
    let profile = match w.eval_recipe_profile(recipe) {
        Ok(p) => p,
        Err(_) => return f64::INFINITY,
    };
    let tg = w.tgrid();
    let grid = w.grid();
    let mut acc = 0.0;
    for (k, pw) in profile.iter().enumerate() {
        let wk = tg.dt() * tg.trap_weight(k) * pw;
        if wk == 0.0 {
            continue;
        }
        let mut slice_norm = 0.0;
        for fi in &f {
            let nrm = l2_norm(fi.slice(k), &grid);
            slice_norm += nrm * nrm;
        }
        acc += wk * slice_norm.sqrt();
    }
    acc
}

/// One entry of the weighted-norm table for the solution space.
#[derive(Debug, Clone)]
pub struct SpaceEEntry {
    pub label: String,
    pub value: f64,
}

/// log(sum exp(l_k)) with the usual max shift; empty input gives -inf.
fn log_sum_exp(terms: &[f64]) -> f64 {
    let mx = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if mx == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = terms.iter().map(|l| (l - mx).exp()).sum();
    mx + s.ln()
}

/// Discrete values of the weighted norms defining membership in the
/// solution space: weighted H^-1, the control weight, the L-infinity(L2)
/// and L2(H1) state weights, and the four weighted equation residuals.
///
/// Everything is accumulated in log space: the decay-flagging weights grow
/// like exp(c/t) near t = 0, and a state or control that does not vanish
/// fast enough there honestly reports an infinite entry. That is the
/// a-posteriori membership verification this table exists for.
pub fn space_e_report(
    props: &CascadePropagators,
    geom: &Geometry,
    state: &CascadeState,
    h: &ControlPair,
    w: &WeightSet,
) -> Result<Vec<SpaceEEntry>> {
    let tg = geom.tgrid;
    let grid = geom.grid;
    let mut entries = Vec::new();

    let lw_hm1 = w.log_recipe_profile(&WeightRecipe::new(6.0, -5.0, -6.5))?;
    let lw_ctrl = w.log_recipe_profile(&WeightRecipe::new(18.0, -17.0, -28.5))?;
    let lw_l2 = w.log_recipe_profile(&WeightRecipe::new(18.0, -17.0, -30.5))?;
    let lw_res = w.log_recipe_profile(&WeightRecipe::new(0.0, 1.0, -0.5))?;

    // sqrt(sum_k dt w_k e^{2 lw_k} nrm_k^2), overflow-safe
    let weighted_l2t = |lw: &[f64], norms: &[f64]| -> f64 {
        let mut terms = Vec::new();
        for k in 0..tg.n_nodes() {
            if norms[k] > 0.0 && lw[k] > f64::NEG_INFINITY {
                terms.push((tg.dt() * tg.trap_weight(k)).ln() + 2.0 * lw[k] + 2.0 * norms[k].ln());
            }
        }
        (0.5 * log_sum_exp(&terms)).exp()
    };

    let comps: [(&str, &SpaceTimeField); 4] = [
        ("u", &state.u),
        ("v", &state.v),
        ("p", &state.p),
        ("q", &state.q),
    ];

    for (name, field) in &comps {
        let norms: Vec<f64> = (0..tg.n_nodes())
            .map(|k| h_minus1_norm(field.slice(k), &grid))
            .collect();
        entries.push(SpaceEEntry {
            label: format!("l2_hminus1[{name}]"),
            value: weighted_l2t(&lw_hm1, &norms),
        });
    }

    for (name, field) in [("h1", &h.h1), ("h2", &h.h2)] {
        let norms: Vec<f64> = (0..tg.n_nodes())
            .map(|k| l2_norm(field.slice(k), &grid))
            .collect();
        entries.push(SpaceEEntry {
            label: format!("l2_control[{name}]"),
            value: weighted_l2t(&lw_ctrl, &norms),
        });
    }

    for (name, field) in &comps {
        let l2s: Vec<f64> = (0..tg.n_nodes())
            .map(|k| l2_norm(field.slice(k), &grid))
            .collect();
        let h1s: Vec<f64> = (0..tg.n_nodes())
            .map(|k| {
                let s = field.slice(k);
                let a = l2_norm(s, &grid);
                let b = h1_seminorm(s, &grid);
                (a * a + b * b).sqrt()
            })
            .collect();
        let linf_log = (0..tg.n_nodes())
            .filter(|k| l2s[*k] > 0.0 && lw_l2[*k] > f64::NEG_INFINITY)
            .map(|k| lw_l2[k] + l2s[k].ln())
            .fold(f64::NEG_INFINITY, f64::max);
        entries.push(SpaceEEntry {
            label: format!("linf_l2[{name}]"),
            value: if linf_log == f64::NEG_INFINITY {
                0.0
            } else {
                linf_log.exp()
            },
        });
        entries.push(SpaceEEntry {
            label: format!("l2_h1[{name}]"),
            value: weighted_l2t(&lw_l2, &h1s),
        });
    }

    // weighted equation residuals, midpoint sampled:
    // sum_k dt e^{(lw_k + lw_{k+1})/2} ||res_k||
    let residuals = linear_residuals(props, geom, state, h);
    for (name, res) in ["u", "v", "p", "q"].iter().zip(&residuals) {
        let mut terms = Vec::new();
        for k in 0..tg.steps() {
            let nrm = l2_norm(&res[k], &grid);
            let lmid = 0.5 * (lw_res[k] + lw_res[k + 1]);
            if nrm > 0.0 && lmid > f64::NEG_INFINITY {
                terms.push(tg.dt().ln() + lmid + nrm.ln());
            }
        }
        entries.push(SpaceEEntry {
            label: format!("l1l2_residual[{name}]"),
            value: log_sum_exp(&terms).exp(),
        });
    }

    Ok(entries)
}

/// Midpoint-sampled residuals of the four linear equations against the state
/// actually stored (natural difference stencils; the backward pair is
/// evaluated against its consistent continuous form, so transpose-march
/// output shows the scheme-level defect rather than zero).
pub fn linear_residuals(
    _props: &CascadePropagators,
    geom: &Geometry,
    state: &CascadeState,
    h: &ControlPair,
) -> [Vec<Vec<f64>>; 4] {
    use crate::cascade::{DISPERSION_P, DISPERSION_Q, DISPERSION_U, DISPERSION_V};
    let tg = geom.tgrid;
    let grid = geom.grid;
    let n = grid.n_nodes();
    let d3l = third_derivative_matrix(&grid, crate::kdv::BcVariant::Left);
    let d3r = third_derivative_matrix(&grid, crate::kdv::BcVariant::Right);

    let mut out: [Vec<Vec<f64>>; 4] = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    let h1m = h.h1.mask(geom.mask_omega());
    let h2m = h.h2.mask(geom.mask_omega());
    let obs_u = state.u.mask(geom.weights_obs());
    let obs_v = state.v.mask(geom.weights_obs());

    let eval = |field: &SpaceTimeField,
                d3: &crate::banded::BandedMatrix,
                a: f64,
                backward: bool,
                forcing: &SpaceTimeField|
     -> Vec<Vec<f64>> {
        let mut rows = Vec::with_capacity(tg.steps());
        for k in 0..tg.steps() {
            let y0 = field.interior(k);
            let y1 = field.interior(k + 1);
            let mut avg: Vec<f64> = y0.iter().zip(y1).map(|(a0, a1)| 0.5 * (a0 + a1)).collect();
            let disp = d3.matvec(&avg);
            let sgn = if backward { -1.0 } else { 1.0 };
            for j in 0..avg.len() {
                let dtterm = sgn * (y1[j] - y0[j]) / tg.dt();
                let force = 0.5 * (forcing.interior(k)[j] + forcing.interior(k + 1)[j]);
                avg[j] = dtterm + a * disp[j] - force;
            }
            let mut full = vec![0.0; n];
            full[1..n - 1].copy_from_slice(&avg);
            rows.push(full);
        }
        rows
    };

    out[0] = eval(&state.u, &d3l, DISPERSION_U, false, &h1m);
    out[1] = eval(&state.v, &d3r, DISPERSION_V, false, &h2m);
    out[2] = eval(&state.p, &d3r, DISPERSION_P, true, &obs_u);
    out[3] = eval(&state.q, &d3l, DISPERSION_Q, true, &obs_v);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble;
    use crate::grid::{Grid1D, TimeGrid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn desk() -> (Geometry, CascadePropagators) {
        let grid = Grid1D::new(1.0, 40).unwrap();
        let tgrid = TimeGrid::new(0.5, 48).unwrap();
        let geom = Geometry::new(grid, tgrid, (0.45, 0.8), (0.2, 0.6)).unwrap();
        let props = CascadePropagators::new(&grid, &tgrid, 0.5).unwrap();
        (geom, props)
    }

    #[test]
    fn zero_sources_zero_control() {
        let (geom, props) = desk();
        let zero = SpaceTimeField::zeros(geom.grid, geom.tgrid);
        let cfg = HumConfig {
            eps: 1e-6,
            cg_tol: 1e-9,
            cg_max: 100,
            s: 1.0,
        };
        let (h, state, report) = synthesize_null_control(&props, &geom, [&zero; 4], &cfg).unwrap();
        assert_eq!(report.iterations, 0);
        assert!(h.h1.values().iter().all(|v| *v == 0.0));
        assert_eq!(state.pq0_norm(&geom.grid), 0.0);
    }

    #[test]
    fn hum_operator_symmetric() {
        let (geom, props) = desk();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..3 {
            let x = AdjointData {
                zeta0: ensemble::smooth_profile(&geom.grid, 5, &mut rng)[1..=geom.grid.interior()]
                    .to_vec(),
                theta0: ensemble::smooth_profile(&geom.grid, 5, &mut rng)
                    [1..=geom.grid.interior()]
                    .to_vec(),
            };
            let y = AdjointData {
                zeta0: ensemble::smooth_profile(&geom.grid, 5, &mut rng)[1..=geom.grid.interior()]
                    .to_vec(),
                theta0: ensemble::smooth_profile(&geom.grid, 5, &mut rng)
                    [1..=geom.grid.interior()]
                    .to_vec(),
            };
            let ax = hum_apply(&props, &geom, &x, 1e-6);
            let ay = hum_apply(&props, &geom, &y, 1e-6);
            let lhs = pair_inner(&ax, &y, &geom);
            let rhs = pair_inner(&x, &ay, &geom);
            let defect = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-300);
            assert!(defect <= 1e-9, "symmetry defect {defect}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (geom, props) = desk();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let f3 = ensemble::admissible_source(&geom.grid, &geom.tgrid, 1e-2, 16.0, 0.4, 0.3);
        let zero = SpaceTimeField::zeros(geom.grid, geom.tgrid);
        let f = [&zero, &zero, &f3, &zero];
        let eps = 1e-4;
        let z = AdjointData {
            zeta0: ensemble::smooth_profile(&geom.grid, 5, &mut rng)[1..=geom.grid.interior()]
                .to_vec(),
            theta0: ensemble::smooth_profile(&geom.grid, 5, &mut rng)[1..=geom.grid.interior()]
                .to_vec(),
        };
        let grad = hum_gradient(&props, &geom, f, &z, eps);
        for trial in 0..5 {
            let dir = AdjointData {
                zeta0: ensemble::smooth_profile(&geom.grid, 4, &mut rng)
                    [1..=geom.grid.interior()]
                    .to_vec(),
                theta0: ensemble::smooth_profile(&geom.grid, 4, &mut rng)
                    [1..=geom.grid.interior()]
                    .to_vec(),
            };
            let hstep = 1e-3;
            let mut zp = z.clone();
            zp.axpy(hstep, &dir);
            let mut zm = z.clone();
            zm.axpy(-hstep, &dir);
            let fd = (hum_functional(&props, &geom, f, &zp, eps)
                - hum_functional(&props, &geom, f, &zm, eps))
                / (2.0 * hstep);
            let an = pair_inner(&grad, &dir, &geom);
            let defect = (fd - an).abs() / an.abs().max(fd.abs()).max(1e-300);
            assert!(defect <= 1e-6, "trial {trial}: fd {fd:.6e} adjoint {an:.6e}");
        }
    }

    #[test]
    fn control_reduces_terminal_defect() {
        // full desk-scale configuration of the acceptance setup
        let grid = Grid1D::new(1.0, 64).unwrap();
        let tgrid = TimeGrid::new(0.5, 128).unwrap();
        let geom = Geometry::new(grid, tgrid, (0.45, 0.8), (0.2, 0.6)).unwrap();
        let props = CascadePropagators::new(&grid, &tgrid, 0.5).unwrap();
        let f3 = ensemble::admissible_source(&geom.grid, &geom.tgrid, 1e-2, 4.1, 0.4, 0.3);
        let zero = SpaceTimeField::zeros(geom.grid, geom.tgrid);
        let f = [&zero, &zero, &f3, &zero];
        let zdata = vec![0.0; geom.grid.n_nodes()];
        let h0 = ControlPair::zeros(&geom);
        let baseline = solve_extended_linear(&props, &geom, &zdata, &zdata, &h0, f)
            .pq_max_norm(&geom.grid);
        let cfg = HumConfig {
            eps: 1e-6,
            cg_tol: 1e-10,
            cg_max: 4000,
            s: 1.0,
        };
        let (h, state, report) = synthesize_null_control(&props, &geom, f, &cfg).unwrap();
        assert!(
            state.pq0_norm(&geom.grid) <= 1e-3 * baseline,
            "pq0 {} baseline {baseline}",
            state.pq0_norm(&geom.grid)
        );
        // controls vanish outside omega exactly
        let mask = geom.mask_omega();
        for k in 0..geom.tgrid.n_nodes() {
            for (j, m) in mask.iter().enumerate() {
                if *m == 0.0 {
                    assert_eq!(h.h1.slice(k)[j], 0.0);
                    assert_eq!(h.h2.slice(k)[j], 0.0);
                }
            }
        }
        // CG functional monotone
        for win in report.functional_history.windows(2) {
            assert!(win[1] <= win[0] + 1e-12 * win[0].abs().max(1.0));
        }
    }

    #[test]
    fn eps_ladder_monotone() {
        let grid = Grid1D::new(1.0, 64).unwrap();
        let tgrid = TimeGrid::new(0.5, 128).unwrap();
        let geom = Geometry::new(grid, tgrid, (0.45, 0.8), (0.2, 0.6)).unwrap();
        let props = CascadePropagators::new(&grid, &tgrid, 0.5).unwrap();
        let f3 = ensemble::admissible_source(&geom.grid, &geom.tgrid, 1e-2, 4.1, 0.4, 0.3);
        let zero = SpaceTimeField::zeros(geom.grid, geom.tgrid);
        let f = [&zero, &zero, &f3, &zero];
        let mut prev = f64::INFINITY;
        for eps in [1e-3, 1e-4, 1e-5, 1e-6, 1e-7] {
            let cfg = HumConfig {
                eps,
                cg_tol: 1e-11,
                cg_max: 6000,
                s: 1.0,
            };
            let (_, state, _) = synthesize_null_control(&props, &geom, f, &cfg).unwrap();
            let pq0 = state.pq0_norm(&geom.grid);
            assert!(
                pq0 <= prev * (1.0 + 1e-9),
                "eps ladder not monotone: {pq0} after {prev}"
            );
            prev = pq0;
        }
    }

    #[test]
    fn space_e_report_finite() {
        let (geom, props) = desk();
        let f3 = ensemble::admissible_source(&geom.grid, &geom.tgrid, 1e-2, 16.0, 0.4, 0.3);
        let zero = SpaceTimeField::zeros(geom.grid, geom.tgrid);
        let f = [&zero, &zero, &f3, &zero];
        let cfg = HumConfig {
            eps: 1e-5,
            cg_tol: 1e-8,
            cg_max: 2000,
            s: 1.0,
        };
        let (h, state, _) = synthesize_null_control(&props, &geom, f, &cfg).unwrap();
        let w = crate::weights::build_weights(
            &crate::weights::WeightConfig {
                omega0: (0.48, 0.56),
                s: 1.0,
                k1_override: None,
            },
            &geom.grid,
            &geom.tgrid,
        )
        .unwrap();
        let entries = space_e_report(&props, &geom, &state, &h, &w).unwrap();
        assert!(!entries.is_empty());
        // entries are well-defined numbers: no NaN from 0 * inf. Entries may
        // honestly come out infinite when the unweighted-HUM control does not
        // decay at t -> 0+ (the report flags exactly that).
        for e in &entries {
            assert!(!e.value.is_nan(), "{} = {}", e.label, e.value);
        }
        // the residual rows carry no exponential blow-up and stay finite
        for e in &entries {
            if e.label.starts_with("l1l2_residual") {
                assert!(e.value.is_finite(), "{} = {}", e.label, e.value);
            }
        }
        // zero state and control: every entry vanishes
        let zstate = solve_extended_linear(
            &props,
            &geom,
            &vec![0.0; geom.grid.n_nodes()],
            &vec![0.0; geom.grid.n_nodes()],
            &ControlPair::zeros(&geom),
            [&zero; 4],
        );
        let zentries =
            space_e_report(&props, &geom, &zstate, &ControlPair::zeros(&geom), &w).unwrap();
        for e in &zentries {
            assert_eq!(e.value, 0.0, "{}", e.label);
        }
    }
}
