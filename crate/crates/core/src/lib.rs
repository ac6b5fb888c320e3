// `!(x > 0)`-style guards deliberately reject NaN configuration values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Numerical toolkit for a coupled KdV control system: discretization,
//! Carleman weights, forward-backward cascade solvers, penalized-HUM control
//! synthesis, nonlinear fixed-point machinery and sentinel diagnostics.
//!
//! The load-bearing design choice is discretize-then-optimize: the backward
//! equations of the cascade and the whole adjoint system are exact transposes
//! of the assembled forward marches, so duality pairings, conjugate-gradient
//! Hessian products and the first-variation identity of the sentinel hold at
//! round-off rather than at scheme order.

pub mod banded;
pub mod cascade;
pub mod control;
pub mod ensemble;
pub mod error;
pub mod grid;
pub mod kdv;
pub mod nonlinear;
pub mod sentinel;
pub mod weights;

pub use banded::{solve_banded, BandedLu, BandedMatrix};
pub use cascade::{
    duality_pairing_check, solve_adjoint, solve_adjoint_independent, solve_extended_linear,
    AdjointState, CascadePropagators, CascadeState, ControlPair, Geometry,
};
pub use control::{
    hum_apply, hum_functional, hum_gradient, space_e_report, synthesize_null_control, HumConfig,
    HumReport,
};
pub use error::{Error, Result};
pub use grid::{
    h1_seminorm, h_minus1_norm, indicator_mask, inner_product, interval_weights, l2_norm, Grid1D,
    SpaceTimeField, TimeGrid,
};
pub use kdv::{
    assemble_operator, nonlinear_term, solve_linear_kdv, third_derivative_matrix, BcVariant,
    KdvOperatorSpec, MarchDirection, Propagator,
};
pub use nonlinear::{
    amplitude_bisection, nonlinear_null_control, picard_solve_nonlinear, residual_norms,
    residual_y, OuterHistory, PicardConfig, PicardHistory,
};
pub use sentinel::{
    carleman_ratio_audit, duality_identity_check, insensitivity_derivative,
    observability_ratio_audit, sentinel_value, Dynamics, PerturbationSpec, RatioStats,
};
pub use weights::{build_weights, WeightConfig, WeightRecipe, WeightSet};

/// Validates the standing geometric hypotheses: omega and the observation
/// region intersect, and omega0 is compactly contained in that intersection.
pub fn validate_geometry(
    length: f64,
    omega: (f64, f64),
    obs: (f64, f64),
    omega0: (f64, f64),
) -> Result<()> {
    for (name, (a, b)) in [("omega", omega), ("obs", obs), ("omega0", omega0)] {
        if !(0.0 <= a && a < b && b <= length) {
            return Err(Error::config(format!(
                "{name} = ({a}, {b}) is not a valid subinterval of (0, {length})"
            )));
        }
    }
    let lo = omega.0.max(obs.0);
    let hi = omega.1.min(obs.1);
    if !(lo < hi) {
        return Err(Error::config(format!(
            "hypothesis violated: obs {:?} and omega {:?} must intersect",
            obs, omega
        )));
    }
    if !(omega0.0 > lo && omega0.1 < hi) {
        return Err(Error::config(format!(
            "hypothesis violated: omega0 {:?} must be compactly contained in obs-cap-omega = ({lo}, {hi})",
            omega0
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_hypotheses() {
        // accepted: omega0 strictly inside (0.45, 0.6)
        validate_geometry(1.0, (0.45, 0.8), (0.2, 0.6), (0.48, 0.56)).unwrap();
        // rejected: empty intersection
        assert!(validate_geometry(1.0, (0.7, 0.9), (0.1, 0.3), (0.75, 0.85)).is_err());
        // rejected: not compactly contained
        assert!(validate_geometry(1.0, (0.45, 0.8), (0.2, 0.6), (0.44, 0.56)).is_err());
    }
}
