//! Random smooth fields and admissible sources for tests, audits and the CLI.
//!
//! Everything is generated from an explicit RNG so that seeded runs are
//! bit-reproducible.

use crate::grid::{l2_norm, Grid1D, SpaceTimeField, TimeGrid};
use rand::Rng;
use rand_distr::StandardNormal;

/// Random low-mode sine series, vanishing at both walls (H^1_0-type profile).
/// Coefficients decay like 1/m^2 so the H^1 norm stays O(1).
pub fn smooth_profile(grid: &Grid1D, modes: usize, rng: &mut impl Rng) -> Vec<f64> {
    let coeffs: Vec<f64> = (0..modes)
        .map(|m| {
            let g: f64 = rng.sample(StandardNormal);
            g / ((m + 1) * (m + 1)) as f64
        })
        .collect();
    let l = grid.length();
    (0..grid.n_nodes())
        .map(|j| {
            let x = grid.node(j);
            coeffs
                .iter()
                .enumerate()
                .map(|(m, c)| c * ((m + 1) as f64 * std::f64::consts::PI * x / l).sin())
                .sum()
        })
        .collect()
}

/// Same, normalized to unit discrete L2 norm.
pub fn unit_profile(grid: &Grid1D, modes: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let mut p = smooth_profile(grid, modes, rng);
        let n = l2_norm(&p, grid);
        if n > 1e-8 {
            for v in &mut p {
                *v /= n;
            }
            return p;
        }
    }
}

/// Random smooth space-time field: sine modes in space, low-order
/// trigonometric modulation in time.
pub fn smooth_spacetime(
    grid: &Grid1D,
    tgrid: &TimeGrid,
    modes: usize,
    rng: &mut impl Rng,
) -> SpaceTimeField {
    let spatial: Vec<Vec<f64>> = (0..3).map(|_| smooth_profile(grid, modes, rng)).collect();
    let tcoef: Vec<(f64, f64)> = (0..3)
        .map(|_| (rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let tt = tgrid.horizon();
    let mut out = SpaceTimeField::zeros(*grid, *tgrid);
    for k in 0..tgrid.n_nodes() {
        let t = tgrid.time(k);
        let row = out.slice_mut(k);
        for (i, prof) in spatial.iter().enumerate() {
            let (c, s) = tcoef[i];
            let tm = 1.0 + 0.5 * (c * (std::f64::consts::PI * t / tt).cos()
                + s * (2.0 * std::f64::consts::PI * t / tt).sin());
            for (j, v) in row.iter_mut().enumerate() {
                *v += tm * prof[j] / 3.0;
            }
        }
    }
    out
}

/// Smooth compactly supported bump on (center - width/2, center + width/2),
/// peak value one.
pub fn bump_profile(grid: &Grid1D, center: f64, width: f64) -> Vec<f64> {
    (0..grid.n_nodes())
        .map(|j| {
            let r = 2.0 * (grid.node(j) - center) / width;
            if r.abs() < 1.0 {
                (1.0 - 1.0 / (1.0 - r * r)).exp() * std::f64::consts::E
            } else {
                0.0
            }
        })
        .collect()
}

/// Admissible source amplitude * exp(-decay (1/t - 1/T)) * bump(x): the
/// exp(-decay/t) vanishing rate near t = 0 keeps the weighted source norm
/// finite provided decay exceeds the blow-up rate of the weight
/// (s S_hat ~ s beta_max / (t T) near zero, so decay > s beta_max / T).
/// The time profile is normalized to peak value one at t = T.
pub fn admissible_source(
    grid: &Grid1D,
    tgrid: &TimeGrid,
    amplitude: f64,
    decay: f64,
    center: f64,
    width: f64,
) -> SpaceTimeField {
    let bump = bump_profile(grid, center, width);
    let tt = tgrid.horizon();
    let mut out = SpaceTimeField::zeros(*grid, *tgrid);
    for k in 0..tgrid.n_nodes() {
        let t = tgrid.time(k);
        let factor = if t <= 0.0 {
            0.0
        } else {
            (-decay * (1.0 / t - 1.0 / tt)).exp()
        };
        let row = out.slice_mut(k);
        for (j, v) in row.iter_mut().enumerate() {
            *v = amplitude * factor * bump[j];
        }
    }
    out
}

/// Default decay rate for admissible sources at the given weight scale
/// (twice the minimal admissible value).
pub fn default_decay(s: f64, beta_max: f64, horizon: f64) -> f64 {
    2.0 * s * beta_max / horizon
}
