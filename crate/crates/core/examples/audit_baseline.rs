use hskdv_core::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let grid = Grid1D::new(1.0, 64).unwrap();
    let tgrid = TimeGrid::new(0.5, 128).unwrap();
    let geom = Geometry::new(grid, tgrid, (0.45, 0.8), (0.2, 0.6)).unwrap();
    let props = CascadePropagators::new(&grid, &tgrid, 0.5).unwrap();
    let w = build_weights(&WeightConfig { omega0: (0.48, 0.56), s: 1.0, k1_override: None }, &grid, &tgrid).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let car = carleman_ratio_audit(&props, &geom, &w, (0.48, 0.56), 20, &mut rng).unwrap();
    let obs = observability_ratio_audit(&props, &geom, &w, (0.48, 0.56), 20, &mut rng).unwrap();
    println!("carleman_max = {:.17e}", car.max());
    println!("observability_max = {:.17e}", obs.max());
    eprintln!("carleman median {:.3e} min {:.3e}", car.median(), car.ratios.iter().copied().fold(f64::INFINITY, f64::min));
    eprintln!("observability median {:.3e} min {:.3e}", obs.median(), obs.ratios.iter().copied().fold(f64::INFINITY, f64::min));
    eprintln!("skipped: car {} obs {}", car.skipped, obs.skipped);
}
