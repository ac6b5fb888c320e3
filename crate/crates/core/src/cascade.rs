//! The extended 4x4 forward-backward linear system and its adjoint.
//!
//! The forward pair (u, v) is marched by the theta scheme. The backward pair
//! (p, q) is built as the exact transpose of the forward propagators
//! (discretize-then-optimize): p accumulates the dual of u's homogeneous
//! propagation against the observation coupling, and likewise q against v.
//! The adjoint system then comes out by transposing once more: (zeta, theta)
//! are literally the forward propagators applied to the adjoint data, and
//! (eta, psi) are the staggered transpose marches. With this arrangement the
//! discrete duality identity and the first-variation identity behind the
//! sentinel both hold to round-off.

use crate::error::{Error, Result};
use crate::grid::{
    indicator_mask, inner_product, interval_weights, Grid1D, SpaceTimeField, TimeGrid,
};
use crate::kdv::{BcVariant, Propagator};
use rand::Rng;

/// Dispersion coefficients of the four equations, as written in the system:
/// u_t - (1/2) u_xxx, v_t + v_xxx, -p_t + (1/2) p_xxx, -q_t - q_xxx.
pub const DISPERSION_U: f64 = -0.5;
pub const DISPERSION_V: f64 = 1.0;
pub const DISPERSION_P: f64 = 0.5;
pub const DISPERSION_Q: f64 = -1.0;

/// Control and observation geometry with the masks every solver shares.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub grid: Grid1D,
    pub tgrid: TimeGrid,
    pub omega: (f64, f64),
    pub obs: (f64, f64),
    mask_omega: Vec<f64>,
    weights_obs: Vec<f64>,
}

impl Geometry {
    pub fn new(grid: Grid1D, tgrid: TimeGrid, omega: (f64, f64), obs: (f64, f64)) -> Result<Self> {
        let mask_omega = indicator_mask(omega, &grid)?;
        let weights_obs = interval_weights(obs, &grid)?;
        if obs.0 >= grid.length() || obs.1 <= 0.0 {
            return Err(Error::config("observation interval leaves the domain"));
        }
        Ok(Geometry {
            grid,
            tgrid,
            omega,
            obs,
            mask_omega,
            weights_obs,
        })
    }

    /// Sharp control localization mask (0/1 at nodes strictly inside omega).
    pub fn mask_omega(&self) -> &[f64] {
        &self.mask_omega
    }

    /// Trapezoid-consistent observation weights for the coupling on the
    /// observation region.
    pub fn weights_obs(&self) -> &[f64] {
        &self.weights_obs
    }
}

/// Localized control pair; vanishes identically outside omega by masking.
#[derive(Debug, Clone)]
pub struct ControlPair {
    pub h1: SpaceTimeField,
    pub h2: SpaceTimeField,
}

impl ControlPair {
    pub fn zeros(geom: &Geometry) -> Self {
        ControlPair {
            h1: SpaceTimeField::zeros(geom.grid, geom.tgrid),
            h2: SpaceTimeField::zeros(geom.grid, geom.tgrid),
        }
    }

    /// Masks the given fields onto omega.
    pub fn new(h1: &SpaceTimeField, h2: &SpaceTimeField, geom: &Geometry) -> Self {
        ControlPair {
            h1: h1.mask(geom.mask_omega()),
            h2: h2.mask(geom.mask_omega()),
        }
    }

    pub fn norm_sq(&self, tgrid: &TimeGrid, grid: &Grid1D) -> f64 {
        let mut acc = 0.0;
        for k in 0..tgrid.n_nodes() {
            let w = tgrid.dt() * tgrid.trap_weight(k);
            acc += w
                * (inner_product(self.h1.slice(k), self.h1.slice(k), grid)
                    + inner_product(self.h2.slice(k), self.h2.slice(k), grid));
        }
        acc
    }
}

#[derive(Debug, Clone)]
pub struct CascadeState {
    pub u: SpaceTimeField,
    pub v: SpaceTimeField,
    pub p: SpaceTimeField,
    pub q: SpaceTimeField,
}

impl CascadeState {
    /// sqrt(||p(0)||^2 + ||q(0)||^2).
    pub fn pq0_norm(&self, grid: &Grid1D) -> f64 {
        let p0 = self.p.slice(0);
        let q0 = self.q.slice(0);
        (inner_product(p0, p0, grid) + inner_product(q0, q0, grid)).sqrt()
    }

    /// max_t sqrt(||p(t)||^2 + ||q(t)||^2), the uncontrolled-baseline scale.
    pub fn pq_max_norm(&self, grid: &Grid1D) -> f64 {
        let tg = self.p.tgrid();
        (0..tg.n_nodes())
            .map(|k| {
                let p = self.p.slice(k);
                let q = self.q.slice(k);
                (inner_product(p, p, grid) + inner_product(q, q, grid)).sqrt()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct AdjointState {
    pub eta: SpaceTimeField,
    pub psi: SpaceTimeField,
    pub zeta: SpaceTimeField,
    pub theta: SpaceTimeField,
}

/// The two forward propagators; everything else is a transpose of these.
pub struct CascadePropagators {
    pub prop_u: Propagator,
    pub prop_v: Propagator,
}

impl CascadePropagators {
    pub fn new(grid: &Grid1D, tgrid: &TimeGrid, theta: f64) -> Result<Self> {
        Ok(CascadePropagators {
            prop_u: Propagator::new(grid, tgrid.dt(), theta, DISPERSION_U, BcVariant::Left)?,
            prop_v: Propagator::new(grid, tgrid.dt(), theta, DISPERSION_V, BcVariant::Right)?,
        })
    }
}

fn add_fields(a: &SpaceTimeField, b: &SpaceTimeField) -> SpaceTimeField {
    let mut out = a.clone();
    out.axpy(1.0, b);
    out
}

/// Forward solve of the extended linear system: (u, v) marched from
/// (u0, v0) under masked controls plus sources f1, f2; then (p, q) as the
/// transposed backward solves with dual sources (obs-weighted state + f3, f4).
pub fn solve_extended_linear(
    props: &CascadePropagators,
    geom: &Geometry,
    u0: &[f64],
    v0: &[f64],
    h: &ControlPair,
    f: [&SpaceTimeField; 4],
) -> CascadeState {
    let tg = &geom.tgrid;
    let n = geom.grid.n_nodes();
    let src_u = add_fields(&h.h1.mask(geom.mask_omega()), f[0]);
    let src_v = add_fields(&h.h2.mask(geom.mask_omega()), f[1]);
    let u = props.prop_u.cn_march(tg, &u0[1..n - 1], &src_u);
    let v = props.prop_v.cn_march(tg, &v0[1..n - 1], &src_v);
    let dual_p = add_fields(&u.mask(geom.weights_obs()), f[2]);
    let dual_q = add_fields(&v.mask(geom.weights_obs()), f[3]);
    let p = props.prop_u.dual_accum_march(tg, &dual_p);
    let q = props.prop_v.dual_accum_march(tg, &dual_q);
    CascadeState { u, v, p, q }
}

/// Adjoint solve as the exact transpose of the forward cascade:
/// (zeta, theta) forward from the adjoint data with dual sources g3, g4;
/// (eta, psi) backward with dual sources (obs-weighted zeta/theta + g1, g2).
pub fn solve_adjoint(
    props: &CascadePropagators,
    geom: &Geometry,
    zeta0: &[f64],
    theta0: &[f64],
    g: [&SpaceTimeField; 4],
) -> AdjointState {
    let tg = &geom.tgrid;
    let n = geom.grid.n_nodes();
    let zeta = props
        .prop_u
        .forward_accum_march(tg, &zeta0[1..n - 1], g[2]);
    let theta = props
        .prop_v
        .forward_accum_march(tg, &theta0[1..n - 1], g[3]);
    let dual_eta = add_fields(&zeta.mask(geom.weights_obs()), g[0]);
    let dual_psi = add_fields(&theta.mask(geom.weights_obs()), g[1]);
    let eta = props.prop_u.cn_transpose_march(tg, &dual_eta, None);
    let psi = props.prop_v.cn_transpose_march(tg, &dual_psi, None);
    AdjointState {
        eta,
        psi,
        zeta,
        theta,
    }
}

/// Independent discretization of the adjoint system, used only to validate
/// that the transpose construction converges to a consistent scheme: plain
/// theta marches with the natural closures of each equation.
pub fn solve_adjoint_independent(
    geom: &Geometry,
    zeta0: &[f64],
    theta0: &[f64],
    g: [&SpaceTimeField; 4],
    theta_scheme: f64,
) -> Result<AdjointState> {
    use crate::kdv::{reverse_time, KdvOperatorSpec, MarchDirection};
    let tg = &geom.tgrid;
    let grid = &geom.grid;
    // zeta_t - 1/2 zeta_xxx = g3 (forward, LEFT), theta_t + theta_xxx = g4 (forward, RIGHT)
    let zeta = crate::kdv::solve_linear_kdv(
        &KdvOperatorSpec {
            dispersion: DISPERSION_U,
            bc: BcVariant::Left,
            direction: MarchDirection::Forward,
        },
        grid,
        tg,
        zeta0,
        g[2],
        theta_scheme,
    )?;
    let theta = crate::kdv::solve_linear_kdv(
        &KdvOperatorSpec {
            dispersion: DISPERSION_V,
            bc: BcVariant::Right,
            direction: MarchDirection::Forward,
        },
        grid,
        tg,
        theta0,
        g[3],
        theta_scheme,
    )?;
    // -eta_t + 1/2 eta_xxx = zeta 1_O + g1 (backward, RIGHT)
    let src_eta = add_fields(&zeta.mask(geom.weights_obs()), g[0]);
    let src_psi = add_fields(&theta.mask(geom.weights_obs()), g[1]);
    let zerodata = vec![0.0; grid.n_nodes()];
    let prop_eta = Propagator::new(grid, tg.dt(), theta_scheme, DISPERSION_P, BcVariant::Right)?;
    let prop_psi = Propagator::new(grid, tg.dt(), theta_scheme, DISPERSION_Q, BcVariant::Left)?;
    let eta = reverse_time(&prop_eta.cn_march(tg, &zerodata[1..grid.n_nodes() - 1], &reverse_time(&src_eta)));
    let psi = reverse_time(&prop_psi.cn_march(tg, &zerodata[1..grid.n_nodes() - 1], &reverse_time(&src_psi)));
    Ok(AdjointState {
        eta,
        psi,
        zeta,
        theta,
    })
}

/// Trapezoidal space-time pairing sum_k dt w_k <a(k), b(k)>.
pub fn spacetime_pairing(a: &SpaceTimeField, b: &SpaceTimeField) -> f64 {
    let tg = a.tgrid();
    let grid = a.grid();
    let mut acc = 0.0;
    for k in 0..tg.n_nodes() {
        acc += tg.dt() * tg.trap_weight(k) * inner_product(a.slice(k), b.slice(k), &grid);
    }
    acc
}

/// Verifies the discrete duality identity
///   <(p(0), q(0)), (zeta0, theta0)> = sum_t dt w <(h1, h2) 1_omega, (eta, psi)>
/// on random data with f = g = 0; returns the maximum relative defect.
pub fn duality_pairing_check(
    props: &CascadePropagators,
    geom: &Geometry,
    trials: usize,
    rng: &mut impl Rng,
) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let h = ControlPair::new(
            &crate::ensemble::smooth_spacetime(&geom.grid, &geom.tgrid, 6, rng),
            &crate::ensemble::smooth_spacetime(&geom.grid, &geom.tgrid, 6, rng),
            geom,
        );
        let zeta0 = crate::ensemble::smooth_profile(&geom.grid, 6, rng);
        let theta0 = crate::ensemble::smooth_profile(&geom.grid, 6, rng);
        let zero = SpaceTimeField::zeros(geom.grid, geom.tgrid);
        let zdata = vec![0.0; geom.grid.n_nodes()];
        let state = solve_extended_linear(props, geom, &zdata, &zdata, &h, [&zero; 4]);
        let adj = solve_adjoint(props, geom, &zeta0, &theta0, [&zero; 4]);
        let lhs = inner_product(state.p.slice(0), &zeta0, &geom.grid)
            + inner_product(state.q.slice(0), &theta0, &geom.grid);
        let rhs = spacetime_pairing(&h.h1.mask(geom.mask_omega()), &adj.eta)
            + spacetime_pairing(&h.h2.mask(geom.mask_omega()), &adj.psi);
        let defect = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-300);
        worst = worst.max(defect);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble;
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
    fn zero_inputs_zero_state() {
        let (geom, props) = desk();
        let zero = SpaceTimeField::zeros(geom.grid, geom.tgrid);
        let zdata = vec![0.0; geom.grid.n_nodes()];
        let h = ControlPair::zeros(&geom);
        let st = solve_extended_linear(&props, &geom, &zdata, &zdata, &h, [&zero; 4]);
        assert!(st.u.values().iter().all(|v| *v == 0.0));
        assert!(st.p.values().iter().all(|v| *v == 0.0));
        assert!(st.q.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn f3_only_decouples() {
        let (geom, props) = desk();
        let zero = SpaceTimeField::zeros(geom.grid, geom.tgrid);
        let f3 = SpaceTimeField::from_fn(geom.grid, geom.tgrid, |t, x| {
            (3.0 * x).sin() * (1.0 + t)
        });
        let zdata = vec![0.0; geom.grid.n_nodes()];
        let h = ControlPair::zeros(&geom);
        let st = solve_extended_linear(&props, &geom, &zdata, &zdata, &h, [&zero, &zero, &f3, &zero]);
        assert!(st.u.values().iter().all(|v| *v == 0.0));
        assert!(st.v.values().iter().all(|v| *v == 0.0));
        assert!(st.q.values().iter().all(|v| *v == 0.0));
        // p is the backward response to f3 alone
        let p_alone = props.prop_u.dual_accum_march(&geom.tgrid, &f3);
        for (a, b) in st.p.values().iter().zip(p_alone.values()) {
            assert_eq!(a, b);
        }
        assert!(st.p.slice(0).iter().any(|v| v.abs() > 0.0));
        // terminal condition is exact
        assert!(st.p.slice(geom.tgrid.steps()).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn duality_defect_roundoff() {
        let (geom, props) = desk();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let worst = duality_pairing_check(&props, &geom, 5, &mut rng);
        assert!(worst <= 1e-8, "duality defect {worst}");
    }

    #[test]
    fn mismatched_quadrature_detected() {
        // rectangle rule on the rhs must break the identity by far more than 1e-8
        let (geom, props) = desk();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = ControlPair::new(
            &ensemble::smooth_spacetime(&geom.grid, &geom.tgrid, 6, &mut rng),
            &ensemble::smooth_spacetime(&geom.grid, &geom.tgrid, 6, &mut rng),
            &geom,
        );
        let zeta0 = ensemble::smooth_profile(&geom.grid, 6, &mut rng);
        let theta0 = ensemble::smooth_profile(&geom.grid, 6, &mut rng);
        let zero = SpaceTimeField::zeros(geom.grid, geom.tgrid);
        let zdata = vec![0.0; geom.grid.n_nodes()];
        let state = solve_extended_linear(&props, &geom, &zdata, &zdata, &h, [&zero; 4]);
        let adj = solve_adjoint(&props, &geom, &zeta0, &theta0, [&zero; 4]);
        let lhs = inner_product(state.p.slice(0), &zeta0, &geom.grid)
            + inner_product(state.q.slice(0), &theta0, &geom.grid);
        // rectangle rule: weight 1 everywhere, skip the last node
        let mut rhs = 0.0;
        let tg = geom.tgrid;
        for k in 0..tg.steps() {
            rhs += tg.dt()
                * (inner_product(h.h1.slice(k), adj.eta.slice(k), &geom.grid)
                    + inner_product(h.h2.slice(k), adj.psi.slice(k), &geom.grid));
        }
        let defect = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-300);
        assert!(defect > 1e-6, "rectangle-rule defect only {defect}");
    }

    #[test]
    fn superposition() {
        let (geom, props) = desk();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f_a = ensemble::smooth_spacetime(&geom.grid, &geom.tgrid, 5, &mut rng);
        let f_b = ensemble::smooth_spacetime(&geom.grid, &geom.tgrid, 5, &mut rng);
        let zero = SpaceTimeField::zeros(geom.grid, geom.tgrid);
        let zdata = vec![0.0; geom.grid.n_nodes()];
        let h = ControlPair::zeros(&geom);
        let mut combo_src = f_a.clone();
        combo_src.scale(2.0);
        combo_src.axpy(-1.5, &f_b);
        let st = solve_extended_linear(&props, &geom, &zdata, &zdata, &h, [&combo_src, &zero, &zero, &zero]);
        let st_a = solve_extended_linear(&props, &geom, &zdata, &zdata, &h, [&f_a, &zero, &zero, &zero]);
        let st_b = solve_extended_linear(&props, &geom, &zdata, &zdata, &h, [&f_b, &zero, &zero, &zero]);
        let mut expect = st_a.p.clone();
        expect.scale(2.0);
        expect.axpy(-1.5, &st_b.p);
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for (a, b) in st.p.values().iter().zip(expect.values()) {
            num = num.max((a - b).abs());
            den = den.max(a.abs());
        }
        assert!(num <= 1e-10 * den.max(1.0), "superposition defect {num}");
    }

    #[test]
    fn obs_mask_zero_decouples_adjoint() {
        let grid = Grid1D::new(1.0, 32).unwrap();
        let tgrid = TimeGrid::new(0.4, 24).unwrap();
        // observation region outside the domain of interest: mask identically zero
        let geom = Geometry::new(grid, tgrid, (0.45, 0.8), (0.9, 0.95)).unwrap();
        let props = CascadePropagators::new(&grid, &tgrid, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let zeta0 = ensemble::smooth_profile(&grid, 5, &mut rng);
        let zero = SpaceTimeField::zeros(grid, tgrid);
        let zdata = vec![0.0; grid.n_nodes()];
        // obs interval (0.9,0.95): weights vanish on most nodes, eta only sees
        // zeta through them; shrink further to a gap between nodes
        let geom2 = Geometry::new(grid, tgrid, (0.45, 0.8), (0.901, 0.908)).unwrap();
        assert!(geom2.weights_obs().iter().all(|w| *w == 0.0));
        let adj = solve_adjoint(&props, &geom2, &zeta0, &zdata, [&zero; 4]);
        assert!(adj.zeta.slice(0).iter().any(|v| v.abs() > 0.0));
        assert!(adj.eta.values().iter().all(|v| *v == 0.0));
        let _ = geom;
    }

    #[test]
    fn adjoint_forward_pair_dissipative() {
        let (geom, props) = desk();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let zeta0 = ensemble::smooth_profile(&geom.grid, 8, &mut rng);
        let theta0 = ensemble::smooth_profile(&geom.grid, 8, &mut rng);
        let zero = SpaceTimeField::zeros(geom.grid, geom.tgrid);
        let adj = solve_adjoint(&props, &geom, &zeta0, &theta0, [&zero; 4]);
        for field in [&adj.zeta, &adj.theta] {
            let mut prev = crate::grid::l2_norm(field.slice(0), &geom.grid);
            for k in 1..=geom.tgrid.steps() {
                let cur = crate::grid::l2_norm(field.slice(k), &geom.grid);
                assert!(cur <= prev * (1.0 + 1e-8), "step {k}: {prev} -> {cur}");
                prev = cur;
            }
        }
    }
}
