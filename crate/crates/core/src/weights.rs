//! Carleman weight functions: the spatial profile beta, the temporal blow-up
//! factors, their space-time products, and the modified variants that stay
//! bounded near the final time.
//!
//! All composite weights are evaluated in log space so that the competition
//! between the exponential decay and the algebraic blow-up factors never
//! produces 0 * inf.

use crate::error::{Error, Result};
use crate::grid::{Grid1D, TimeGrid};

#[derive(Debug, Clone, Copy)]
pub struct WeightConfig {
    /// The inner observation interval (l0, l1), compactly inside (0, L).
    pub omega0: (f64, f64),
    /// Carleman parameter s > 0.
    pub s: f64,
    /// Override for the amplitude K1 (defaults to 1/(70 M)).
    pub k1_override: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct WeightSet {
    grid: Grid1D,
    tgrid: TimeGrid,
    pub s: f64,
    pub k1: f64,
    pub k2: f64,
    pub m_const: f64,
    beta: Vec<f64>,
    beta_max: f64,
}

impl WeightSet {
    pub fn grid(&self) -> Grid1D {
        self.grid
    }

    pub fn tgrid(&self) -> TimeGrid {
        self.tgrid
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// min beta = beta(l_half) = 1, by construction.
    pub fn beta_min(&self) -> f64 {
        1.0
    }

    /// max beta = max(beta(0), beta(L)) = 1 + K1 M, by construction.
    pub fn beta_max(&self) -> f64 {
        self.beta_max
    }

    /// xi(t) = 1/(t(T-t)); infinite at both endpoints.
    pub fn xi(&self, k: usize) -> f64 {
        let t = self.tgrid.time(k);
        let tt = self.tgrid.horizon();
        if k == 0 || k == self.tgrid.steps() {
            f64::INFINITY
        } else {
            1.0 / (t * (tt - t))
        }
    }

    /// Modified temporal factor: xi on (0, T/2], constant 4/T^2 beyond.
    pub fn frak_z(&self, k: usize) -> f64 {
        let t = self.tgrid.time(k);
        let tt = self.tgrid.horizon();
        if k == 0 {
            f64::INFINITY
        } else if t <= 0.5 * tt {
            1.0 / (t * (tt - t))
        } else {
            4.0 / (tt * tt)
        }
    }

    pub fn phi(&self, k: usize, j: usize) -> f64 {
        self.xi(k) * self.beta[j]
    }

    pub fn frak_s(&self, k: usize, j: usize) -> f64 {
        self.frak_z(k) * self.beta[j]
    }

    pub fn phi_star(&self, k: usize) -> f64 {
        self.xi(k)
    }

    pub fn phi_hat(&self, k: usize) -> f64 {
        self.xi(k) * self.beta_max
    }

    pub fn frak_s_star(&self, k: usize) -> f64 {
        self.frak_z(k)
    }

    pub fn frak_s_hat(&self, k: usize) -> f64 {
        self.frak_z(k) * self.beta_max
    }

    /// Minimal ratio (36 phi* - 35 phi_hat)/xi over interior time nodes,
    /// together with its positivity flag. With the default K1 the ratio is
    /// the constant 1 - 35 K1 M = 1/2.
    pub fn weight_gap_check(&self) -> (f64, bool) {
        let mut c0 = f64::INFINITY;
        for k in 1..self.tgrid.steps() {
            let ratio = (36.0 * self.phi_star(k) - 35.0 * self.phi_hat(k)) / self.xi(k);
            c0 = c0.min(ratio);
        }
        (c0, c0 > 0.0)
    }

    /// log of exp(a s S* + b s S_hat) Z^p at time node k, using the modified
    /// weights; -inf encodes a vanishing weight.
    fn log_recipe_modified(&self, a: f64, b: f64, p: f64, k: usize) -> f64 {
        let z = self.frak_z(k);
        if z.is_infinite() {
            let net = a + b * self.beta_max;
            return if net < 0.0 || (net == 0.0 && p < 0.0) {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            };
        }
        self.s * z * (a + b * self.beta_max) + p * z.ln()
    }

    /// Same using the original weights (phi*, phi_hat, xi): these vanish at
    /// both time endpoints for admissible recipes.
    pub fn log_phi_weight(&self, a: f64, b: f64, p: f64, k: usize) -> f64 {
        let xi = self.xi(k);
        if xi.is_infinite() {
            let net = a + b * self.beta_max;
            return if net < 0.0 || (net == 0.0 && p < 0.0) {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            };
        }
        self.s * xi * (a + b * self.beta_max) + p * xi.ln()
    }

    /// Space-time log weight exp(c s phi(t,x)) xi^p.
    pub fn log_phi_spacetime(&self, c: f64, p: f64, k: usize, j: usize) -> f64 {
        let xi = self.xi(k);
        if xi.is_infinite() {
            return if c * self.beta[j] < 0.0 {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            };
        }
        c * self.s * xi * self.beta[j] + p * xi.ln()
    }
}

/// Exponent recipe exp(exp_star * s * S^* + exp_hat * s * S_hat) * Z^z_pow
/// over the modified weights.
#[derive(Debug, Clone, Copy)]
pub struct WeightRecipe {
    pub exp_star: f64,
    pub exp_hat: f64,
    pub z_pow: f64,
}

impl WeightRecipe {
    pub fn new(exp_star: f64, exp_hat: f64, z_pow: f64) -> Self {
        WeightRecipe {
            exp_star,
            exp_hat,
            z_pow,
        }
    }
}

pub fn build_weights(cfg: &WeightConfig, grid: &Grid1D, tgrid: &TimeGrid) -> Result<WeightSet> {
    let (l0, l1) = cfg.omega0;
    let length = grid.length();
    if !(0.0 < l0 && l0 < l1 && l1 < length) {
        return Err(Error::config(format!(
            "omega0 = ({l0}, {l1}) must satisfy 0 < l0 < l1 < L = {length}"
        )));
    }
    if !(cfg.s > 0.0) {
        return Err(Error::config(format!("Carleman parameter s must be positive, got {}", cfg.s)));
    }
    let l_half = 0.5 * (l0 + l1);
    let k2 = 4.0 / ((l1 - l0) * (l1 - l0));
    let m_const = {
        let a = 1.0 - (-k2 * l_half * l_half).exp();
        let b = 1.0 - (-k2 * (length - l_half) * (length - l_half)).exp();
        a.max(b)
    };
    let k1 = cfg.k1_override.unwrap_or(1.0 / (70.0 * m_const));
    if k1 < 0.0 {
        return Err(Error::config(format!("K1 must be non-negative, got {k1}")));
    }
    let beta: Vec<f64> = (0..grid.n_nodes())
        .map(|j| {
            let x = grid.node(j);
            1.0 + k1 * (1.0 - (-k2 * (x - l_half) * (x - l_half)).exp())
        })
        .collect();
    let beta_max = 1.0 + k1 * m_const;
    Ok(WeightSet {
        grid: *grid,
        tgrid: *tgrid,
        s: cfg.s,
        k1,
        k2,
        m_const,
        beta,
        beta_max,
    })
}

impl WeightSet {
    /// Rejects recipes with a positive net blow-up at t -> 0+ and no
    /// compensating algebraic factor (pure exponential growth, plainly
    /// non-integrable). Recipes with an algebraic Z-power are meaningful
    /// pointwise away from t = 0 even when the exponential grows: those are
    /// exactly the decay-flagging weights of the solution space, whose value
    /// near t = 0 is huge by design.
    pub fn screen_recipe(&self, r: &WeightRecipe) -> Result<()> {
        let net = r.exp_star + r.exp_hat * self.beta_max;
        if net > 0.0 && r.z_pow >= 0.0 {
            return Err(Error::config(format!(
                "weight recipe exp({} s S* + {} s S_hat) Z^{} blows up as t -> 0+ (net exponent {net})",
                r.exp_star, r.exp_hat, r.z_pow
            )));
        }
        Ok(())
    }

    /// Evaluates a recipe at every time node for quadrature use: node 0
    /// always carries weight zero (all weighted integrals pair these profiles
    /// against quantities vanishing at t = 0), the interior and final nodes
    /// get the pointwise values.
    pub fn eval_recipe_profile(&self, r: &WeightRecipe) -> Result<Vec<f64>> {
        self.screen_recipe(r)?;
        Ok((0..self.tgrid.n_nodes())
            .map(|k| {
                if k == 0 {
                    return 0.0;
                }
                let lw = self.log_recipe_modified(r.exp_star, r.exp_hat, r.z_pow, k);
                if lw == f64::NEG_INFINITY {
                    0.0
                } else {
                    lw.exp()
                }
            })
            .collect())
    }

    /// Log-weights of a recipe for overflow-safe quadrature: node 0 carries
    /// -inf (weight zero); other nodes the exact log value.
    pub fn log_recipe_profile(&self, r: &WeightRecipe) -> Result<Vec<f64>> {
        self.screen_recipe(r)?;
        Ok((0..self.tgrid.n_nodes())
            .map(|k| {
                if k == 0 {
                    f64::NEG_INFINITY
                } else {
                    self.log_recipe_modified(r.exp_star, r.exp_hat, r.z_pow, k)
                }
            })
            .collect())
    }

    /// Pointwise value at an interior or final node (k >= 1).
    pub fn eval_recipe_at(&self, r: &WeightRecipe, k: usize) -> Result<f64> {
        self.screen_recipe(r)?;
        if k == 0 {
            let net = r.exp_star + r.exp_hat * self.beta_max;
            return Ok(if net < 0.0 || (net == 0.0 && r.z_pow < 0.0) {
                0.0
            } else if net == 0.0 && r.z_pow == 0.0 {
                1.0
            } else {
                f64::INFINITY
            });
        }
        let lw = self.log_recipe_modified(r.exp_star, r.exp_hat, r.z_pow, k);
        Ok(if lw == f64::NEG_INFINITY { 0.0 } else { lw.exp() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk() -> (Grid1D, TimeGrid) {
        (
            Grid1D::new(1.0, 64).unwrap(),
            TimeGrid::new(0.5, 128).unwrap(),
        )
    }

    fn desk_weights() -> WeightSet {
        let (g, tg) = desk();
        build_weights(
            &WeightConfig {
                omega0: (0.48, 0.56),
                s: 1.0,
                k1_override: None,
            },
            &g,
            &tg,
        )
        .unwrap()
    }

    #[test]
    fn k2_value() {
        let w = desk_weights();
        assert!((w.k2 - 625.0).abs() < 1e-9, "k2 = {}", w.k2);
    }

    #[test]
    fn phi_star_equals_xi() {
        let w = desk_weights();
        // beta(l_half) = 1 in closed form, so phi* = xi
        for k in 1..w.tgrid().steps() {
            assert_eq!(w.phi_star(k), w.xi(k));
        }
        // and the grid samples of beta stay >= 1 everywhere
        assert!(w.beta().iter().all(|b| *b >= 1.0));
    }

    #[test]
    fn temporal_factor_values() {
        let w = desk_weights();
        let tg = w.tgrid();
        // T = 0.5: xi(T/2) = 16 and frak_z = 16 beyond T/2
        let mid = tg.steps() / 2;
        assert!((w.xi(mid) - 16.0).abs() < 1e-12);
        for k in mid..=tg.steps() {
            assert!((w.frak_z(k) - 16.0).abs() < 1e-12 || w.frak_z(k) >= 16.0);
        }
        assert!((w.frak_z(tg.steps()) - 16.0).abs() < 1e-12);
        // frak_z coincides with xi up to T/2
        for k in 1..=mid {
            assert_eq!(w.frak_z(k), w.xi(k));
        }
    }

    #[test]
    fn gap_check_paper_choice() {
        let w = desk_weights();
        let (c0, ok) = w.weight_gap_check();
        assert!(ok);
        assert!((c0 - 0.5).abs() < 1e-12, "c0 = {c0}");
    }

    #[test]
    fn gap_check_boundary_choice() {
        let (g, tg) = desk();
        let base = desk_weights();
        let w = build_weights(
            &WeightConfig {
                omega0: (0.48, 0.56),
                s: 1.0,
                k1_override: Some(1.0 / (35.0 * base.m_const)),
            },
            &g,
            &tg,
        )
        .unwrap();
        let (c0, ok) = w.weight_gap_check();
        assert!(c0.abs() < 1e-12, "c0 = {c0}");
        assert!(!ok);
    }

    #[test]
    fn gap_check_flat_beta() {
        let (g, tg) = desk();
        let w = build_weights(
            &WeightConfig {
                omega0: (0.48, 0.56),
                s: 1.0,
                k1_override: Some(0.0),
            },
            &g,
            &tg,
        )
        .unwrap();
        let (c0, _) = w.weight_gap_check();
        assert!((c0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn beta_shape_conditions() {
        // the desk interval (0.48, 0.56) makes the Gaussian tails of beta
        // underflow against 1.0 in double precision (the discrete differences
        // are exactly zero away from omega0), so the sign checks run on a
        // wider interval where the profile is resolvable
        let (g, tg) = desk();
        let w = build_weights(
            &WeightConfig {
                omega0: (0.3, 0.7),
                s: 1.0,
                k1_override: None,
            },
            &g,
            &tg,
        )
        .unwrap();
        let dx = g.dx();
        let beta = w.beta();
        let n = g.n_nodes();
        // one-sided signs at the walls
        let bx0 = (beta[1] - beta[0]) / dx;
        let bxl = (beta[n - 1] - beta[n - 2]) / dx;
        assert!(bx0 < 0.0, "beta_x(0) = {bx0}");
        assert!(bxl > 0.0, "beta_x(L) = {bxl}");
        // concavity outside the closure of omega0 (centered second differences)
        for j in 1..n - 1 {
            let x = g.node(j);
            if x < 0.3 - dx || x > 0.7 + dx {
                let bxx = (beta[j + 1] - 2.0 * beta[j] + beta[j - 1]) / (dx * dx);
                assert!(bxx < 0.0, "beta_xx = {bxx} at x = {x}");
            }
        }
        // discrete minimum of |beta_x| outside omega0, reported not asserted
        let min_slope = (1..n - 1)
            .filter(|j| {
                let x = g.node(*j);
                x < 0.3 || x > 0.7
            })
            .map(|j| ((beta[j + 1] - beta[j - 1]) / (2.0 * dx)).abs())
            .fold(f64::INFINITY, f64::min);
        assert!(min_slope.is_finite());
    }

    #[test]
    fn modified_weights_monotone() {
        let w = desk_weights();
        for k in 1..=w.tgrid().steps() {
            assert!(w.frak_s_star(k) <= w.frak_s_hat(k));
        }
    }

    #[test]
    fn recipe_examples() {
        let w = desk_weights();
        let tg = w.tgrid();
        // e^{-2 s S_hat} Z^5 -> 0 at t -> 0+
        let p = w
            .eval_recipe_profile(&WeightRecipe::new(0.0, -2.0, 5.0))
            .unwrap();
        assert_eq!(p[0], 0.0);
        assert!(p[1] >= 0.0 && p[1].is_finite());

        // e^{18 s S* - 17 s S_hat} Z^{-61/2} finite and positive at t = T
        let p = w
            .eval_recipe_profile(&WeightRecipe::new(18.0, -17.0, -30.5))
            .unwrap();
        let end = p[tg.steps()];
        assert!(end.is_finite() && end > 0.0);
        let z_end = 16.0f64;
        let expect = (w.s * z_end * (18.0 - 17.0 * w.beta_max())).exp() * z_end.powf(-30.5);
        assert!((end - expect).abs() <= 1e-12 * expect);

        // net positive blow-up is rejected
        assert!(w
            .eval_recipe_profile(&WeightRecipe::new(0.0, 2.0, 0.0))
            .is_err());
    }
}
