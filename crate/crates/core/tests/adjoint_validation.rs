//! The adjoint solver is the exact transpose of the forward cascade, not an
//! independent discretization. Here the two are compared on a refinement
//! ladder: they must converge to each other, which pins the transpose
//! construction to the continuous adjoint system.

use hskdv_core::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn field_distance(a: &SpaceTimeField, b: &SpaceTimeField) -> f64 {
    let mut d = a.clone();
    d.axpy(-1.0, b);
    d.l2_space_time()
}

fn adjoint_gap(nx: usize, mt: usize) -> f64 {
    let grid = Grid1D::new(1.0, nx).unwrap();
    let tgrid = TimeGrid::new(0.5, mt).unwrap();
    let geom = Geometry::new(grid, tgrid, (0.45, 0.8), (0.2, 0.6)).unwrap();
    let props = CascadePropagators::new(&grid, &tgrid, 0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    // fixed smooth data independent of the grid: sample analytic profiles
    let zeta0: Vec<f64> = (0..grid.n_nodes())
        .map(|j| {
            let x = grid.node(j);
            (std::f64::consts::PI * x).sin() + 0.3 * (2.0 * std::f64::consts::PI * x).sin()
        })
        .collect();
    let theta0: Vec<f64> = (0..grid.n_nodes())
        .map(|j| {
            let x = grid.node(j);
            (2.0 * std::f64::consts::PI * x).sin()
        })
        .collect();
    let zero = SpaceTimeField::zeros(grid, tgrid);
    let adj_t = solve_adjoint(&props, &geom, &zeta0, &theta0, [&zero; 4]);
    let adj_i = solve_adjoint_independent(&geom, &zeta0, &theta0, [&zero; 4], 0.5).unwrap();
    let _ = &mut rng;
    let mut gap = 0.0f64;
    for (a, b) in [
        (&adj_t.zeta, &adj_i.zeta),
        (&adj_t.theta, &adj_i.theta),
        (&adj_t.eta, &adj_i.eta),
        (&adj_t.psi, &adj_i.psi),
    ] {
        gap = gap.max(field_distance(a, b));
    }
    gap
}

#[test]
fn transpose_converges_to_independent_discretization() {
    let g1 = adjoint_gap(32, 32);
    let g2 = adjoint_gap(64, 64);
    let g3 = adjoint_gap(128, 128);
    println!("adjoint transpose-vs-independent gaps: {g1:.4e} {g2:.4e} {g3:.4e}");
    println!(
        "measured orders: {:.2}, {:.2}",
        (g1 / g2).log2(),
        (g2 / g3).log2()
    );
    assert!(
        g2 < g1 && g3 < g2,
        "gap must shrink under refinement: {g1:.3e} {g2:.3e} {g3:.3e}"
    );
    // combined order along dt ~ dx of at least ~0.7 per level
    assert!(g3 <= g1 / 2.5, "insufficient convergence: {g1:.3e} -> {g3:.3e}");
}
