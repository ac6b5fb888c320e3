//! Uniform grids, space-time fields, discrete norms and interval masks.
//!
//! Space is discretized by `N` interior nodes plus the two walls, x_j = j*dx
//! with dx = L/(N+1). Time uses `M` uniform steps. All integrals are composite
//! trapezoidal in both directions; this fixes the inner products every adjoint
//! construction in the crate transposes against.

use crate::error::{Error, Result};

/// Uniform spatial grid on (0, L) with N interior nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    length: f64,
    interior: usize,
    dx: f64,
}

impl Grid1D {
    /// Third-derivative stencils need interior room; below 8 nodes the
    /// closure rows would overlap.
    pub const MIN_INTERIOR: usize = 8;

    pub fn new(length: f64, interior: usize) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::config(format!(
                "domain length must be positive and finite, got {length}"
            )));
        }
        if interior < Self::MIN_INTERIOR {
            return Err(Error::config(format!(
                "need at least {} interior nodes, got {interior}",
                Self::MIN_INTERIOR
            )));
        }
        let dx = length / (interior + 1) as f64;
        Ok(Grid1D {
            length,
            interior,
            dx,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Number of interior nodes N.
    pub fn interior(&self) -> usize {
        self.interior
    }

    /// Total node count N + 2 including both walls.
    pub fn n_nodes(&self) -> usize {
        self.interior + 2
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Node position x_j, j = 0 ..= N+1.
    pub fn node(&self, j: usize) -> f64 {
        self.dx * j as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|j| self.node(j)).collect()
    }

    /// Trapezoidal weight of node j (1/2 at the walls).
    pub fn trap_weight(&self, j: usize) -> f64 {
        if j == 0 || j == self.interior + 1 {
            0.5
        } else {
            1.0
        }
    }
}

/// Uniform time grid on [0, T] with M steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::config(format!(
                "time horizon must be positive and finite, got {horizon}"
            )));
        }
        if steps < 2 {
            return Err(Error::config(format!(
                "need at least 2 time steps, got {steps}"
            )));
        }
        Ok(TimeGrid {
            horizon,
            steps,
            dt: horizon / steps as f64,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of time nodes M + 1.
    pub fn n_nodes(&self) -> usize {
        self.steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        self.dt * k as f64
    }

    /// Trapezoidal weight of node k (1/2 at the endpoints).
    pub fn trap_weight(&self, k: usize) -> f64 {
        if k == 0 || k == self.steps {
            0.5
        } else {
            1.0
        }
    }
}

/// One scalar unknown sampled on the full space-time grid: (M+1) x (N+2),
/// row-major, rows indexed by time.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    grid: Grid1D,
    tgrid: TimeGrid,
    values: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zeros(grid: Grid1D, tgrid: TimeGrid) -> Self {
        SpaceTimeField {
            grid,
            tgrid,
            values: vec![0.0; grid.n_nodes() * tgrid.n_nodes()],
        }
    }

    pub fn from_fn(grid: Grid1D, tgrid: TimeGrid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid, tgrid);
        for k in 0..tgrid.n_nodes() {
            let t = tgrid.time(k);
            let row = out.slice_mut(k);
            for (j, v) in row.iter_mut().enumerate() {
                *v = f(t, grid.node(j));
            }
        }
        out
    }

    pub fn grid(&self) -> Grid1D {
        self.grid
    }

    pub fn tgrid(&self) -> TimeGrid {
        self.tgrid
    }

    /// Spatial slice at time node k (length N+2).
    pub fn slice(&self, k: usize) -> &[f64] {
        let n = self.grid.n_nodes();
        &self.values[k * n..(k + 1) * n]
    }

    pub fn slice_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.grid.n_nodes();
        &mut self.values[k * n..(k + 1) * n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Copies an interior vector (length N) into time row k, zeroing the walls.
    pub fn set_interior(&mut self, k: usize, interior: &[f64]) {
        let n = self.grid.n_nodes();
        debug_assert_eq!(interior.len(), n - 2);
        let row = self.slice_mut(k);
        row[0] = 0.0;
        row[n - 1] = 0.0;
        row[1..n - 1].copy_from_slice(interior);
    }

    pub fn interior(&self, k: usize) -> &[f64] {
        let n = self.grid.n_nodes();
        &self.slice(k)[1..n - 1]
    }

    pub fn scale(&mut self, alpha: f64) {
        for v in &mut self.values {
            *v *= alpha;
        }
    }

    /// self += alpha * other (same grids assumed).
    pub fn axpy(&mut self, alpha: f64, other: &SpaceTimeField) {
        debug_assert_eq!(self.values.len(), other.values.len());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    /// Multiplies every time slice pointwise by a spatial weight vector.
    pub fn mask(&self, weights: &[f64]) -> SpaceTimeField {
        let mut out = self.clone();
        let n = self.grid.n_nodes();
        debug_assert_eq!(weights.len(), n);
        for k in 0..self.tgrid.n_nodes() {
            let row = out.slice_mut(k);
            for j in 0..n {
                row[j] *= weights[j];
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// max_k of the slice L2 norms (discrete L-infinity-in-time, L2-in-space).
    pub fn max_l2(&self) -> f64 {
        (0..self.tgrid.n_nodes())
            .map(|k| l2_norm(self.slice(k), &self.grid))
            .fold(0.0, f64::max)
    }

    /// Trapezoidal space-time L2 norm.
    pub fn l2_space_time(&self) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.tgrid.n_nodes() {
            let s = l2_norm(self.slice(k), &self.grid);
            acc += self.tgrid.dt() * self.tgrid.trap_weight(k) * s * s;
        }
        acc.sqrt()
    }

    /// Squared L2(0,T; H1) surrogate: trapezoid in time of ||.||_{L2}^2 + |.|_{H1}^2.
    pub fn l2_h1_sq(&self) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.tgrid.n_nodes() {
            let s = self.slice(k);
            let l2 = l2_norm(s, &self.grid);
            let h1 = h1_seminorm(s, &self.grid);
            acc += self.tgrid.dt() * self.tgrid.trap_weight(k) * (l2 * l2 + h1 * h1);
        }
        acc
    }

    /// Y_{1/4}-type surrogate norm: max of the C0(L2) and L2(H1) pieces.
    pub fn y_quarter_norm(&self) -> f64 {
        self.max_l2().max(self.l2_h1_sq().sqrt())
    }
}

/// Trapezoidal approximation of (int_0^L f^2)^{1/2} over a full slice.
pub fn l2_norm(slice: &[f64], grid: &Grid1D) -> f64 {
    inner_product(slice, slice, grid).sqrt()
}

/// Trapezoidal spatial inner product over full slices (length N+2).
pub fn inner_product(a: &[f64], b: &[f64], grid: &Grid1D) -> f64 {
    debug_assert_eq!(a.len(), grid.n_nodes());
    debug_assert_eq!(b.len(), grid.n_nodes());
    let mut acc = 0.0;
    for j in 0..grid.n_nodes() {
        acc += grid.trap_weight(j) * a[j] * b[j];
    }
    acc * grid.dx()
}

/// Inner product of interior vectors (length N); walls contribute nothing.
pub fn inner_interior(a: &[f64], b: &[f64], grid: &Grid1D) -> f64 {
    debug_assert_eq!(a.len(), grid.interior());
    let mut acc = 0.0;
    for j in 0..a.len() {
        acc += a[j] * b[j];
    }
    acc * grid.dx()
}

pub fn l2_interior(a: &[f64], grid: &Grid1D) -> f64 {
    inner_interior(a, a, grid).sqrt()
}

/// First-difference H1 seminorm over the N+1 cells of a full slice.
pub fn h1_seminorm(slice: &[f64], grid: &Grid1D) -> f64 {
    let dx = grid.dx();
    let mut acc = 0.0;
    for j in 0..slice.len() - 1 {
        let d = (slice[j + 1] - slice[j]) / dx;
        acc += d * d;
    }
    (acc * dx).sqrt()
}

/// Discrete H^{-1} surrogate: sqrt(<f, phi>) with -phi'' = f, phi(0)=phi(L)=0,
/// one tridiagonal Dirichlet solve per call (Thomas algorithm).
pub fn h_minus1_norm(slice: &[f64], grid: &Grid1D) -> f64 {
    let n = grid.interior();
    let dx = grid.dx();
    let f: Vec<f64> = slice[1..=n].to_vec();
    // solve (-phi_{j-1} + 2 phi_j - phi_{j+1})/dx^2 = f_j
    let mut diag = vec![2.0 / (dx * dx); n];
    let off = -1.0 / (dx * dx);
    let mut rhs = f.clone();
    for j in 1..n {
        let m = off / diag[j - 1];
        diag[j] -= m * off;
        rhs[j] -= m * rhs[j - 1];
    }
    let mut phi = vec![0.0; n];
    phi[n - 1] = rhs[n - 1] / diag[n - 1];
    for j in (0..n - 1).rev() {
        phi[j] = (rhs[j] - off * phi[j + 1]) / diag[j];
    }
    let mut acc = 0.0;
    for j in 0..n {
        acc += f[j] * phi[j];
    }
    (acc * dx).max(0.0).sqrt()
}

/// Sharp 0/1 indicator of (a, b): 1 at nodes strictly inside, 0 elsewhere.
/// Used multiplicatively for control localization.
pub fn indicator_mask(interval: (f64, f64), grid: &Grid1D) -> Result<Vec<f64>> {
    let (a, b) = interval;
    if !(a < b) {
        return Err(Error::config(format!(
            "interval ({a}, {b}) is empty or inverted"
        )));
    }
    if a < 0.0 || b > grid.length() {
        return Err(Error::config(format!(
            "interval ({a}, {b}) leaves the domain (0, {})",
            grid.length()
        )));
    }
    Ok((0..grid.n_nodes())
        .map(|j| {
            let x = grid.node(j);
            if x > a && x < b {
                1.0
            } else {
                0.0
            }
        })
        .collect())
}

/// Trapezoid-consistent quadrature weights of an interval: 1 strictly inside,
/// 1/2 at nodes sitting exactly on an endpoint. This is the weight used for
/// observation integrals so that e.g. the measure of (0.2, 0.6) comes out
/// exact when the endpoints are grid nodes.
pub fn interval_weights(interval: (f64, f64), grid: &Grid1D) -> Result<Vec<f64>> {
    let (a, b) = interval;
    if !(a < b) {
        return Err(Error::config(format!(
            "interval ({a}, {b}) is empty or inverted"
        )));
    }
    let tol = 1e-12 * grid.length();
    Ok((0..grid.n_nodes())
        .map(|j| {
            let x = grid.node(j);
            if (x - a).abs() <= tol || (x - b).abs() <= tol {
                0.5
            } else if x > a && x < b {
                1.0
            } else {
                0.0
            }
        })
        .collect())
}
