//! Oracle checks for the reflection engine: closed forms, constraint
//! properties, grid refinement, and sup-norm stability bounds.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use gjnlab::skorokhod::{
    kappa, reflect_1d, reflect_md, PathGrid, REFLECT_MAX_ITER, REFLECT_TOL,
};
use gjnlab::verify::random_m_matrix;

fn brownian_path(rng: &mut ChaCha8Rng, start: f64, step: f64, steps: usize) -> Vec<f64> {
    let mut x = vec![start; steps + 1];
    let sd = step.sqrt();
    for n in 1..=steps {
        let incr: f64 = rng.sample(StandardNormal);
        x[n] = x[n - 1] + sd * incr;
    }
    x
}

fn grid_from(coords: Vec<Vec<f64>>, step: f64) -> PathGrid {
    let times: Vec<f64> = (0..coords[0].len()).map(|n| n as f64 * step).collect();
    PathGrid::new(times, coords).unwrap()
}

#[test]
fn scalar_reflection_matches_an_independent_fold() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF01D);
    for _ in 0..50 {
        let start = rng.random_range(0.0..2.0);
        let x = brownian_path(&mut rng, start, 0.01, 400);
        let (z, y) = reflect_1d(&x).unwrap();
        let mut low = f64::INFINITY;
        for (n, &v) in x.iter().enumerate() {
            low = low.min(v);
            let y_ref = (-low).max(0.0);
            assert!((y[n] - y_ref).abs() <= 1e-14);
            assert!((z[n] - (v + y_ref)).abs() <= 1e-14);
            assert!(z[n] >= 0.0);
        }
    }
}

#[test]
fn coupled_regulators_are_monotone_complementary_and_feasible() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF02D);
    for _ in 0..25 {
        let d = rng.random_range(2..=4);
        let r = random_m_matrix(&mut rng, d);
        let coords: Vec<Vec<f64>> = (0..d)
            .map(|_| {
                let start = rng.random_range(0.0..0.5);
                brownian_path(&mut rng, start, 0.005, 300)
            })
            .collect();
        let grid = grid_from(coords, 0.005);
        let out = reflect_md(&grid, &r, REFLECT_TOL, REFLECT_MAX_ITER).unwrap();
        assert!(out.complementarity <= 1e-8);
        for j in 0..d {
            let y = out.y.coord(j);
            assert_eq!(y[0], 0.0);
            assert!(y.windows(2).all(|w| w[1] >= w[0] - 1e-12));
            assert!(out.z.coord(j).iter().all(|&v| v >= -1e-9));
        }
    }
}

#[test]
fn refining_the_grid_converges_to_the_same_reflected_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF03D);
    let r = DMatrix::from_row_slice(2, 2, &[1.0, -0.3, -0.4, 1.0]);
    let fine_steps = 800usize;
    let step = 2.0 / fine_steps as f64;
    let coords: Vec<Vec<f64>> = (0..2)
        .map(|_| brownian_path(&mut rng, 0.2, step, fine_steps))
        .collect();

    let reflect_sub = |every: usize| {
        let sub: Vec<Vec<f64>> = coords
            .iter()
            .map(|c| c.iter().copied().step_by(every).collect())
            .collect();
        let grid = grid_from(sub, step * every as f64);
        reflect_md(&grid, &r, REFLECT_TOL, REFLECT_MAX_ITER).unwrap()
    };

    let fine = reflect_sub(1);
    let err_of = |every: usize| {
        let coarse = reflect_sub(every);
        let mut worst = 0.0f64;
        for j in 0..2 {
            for (n, &v) in coarse.z.coord(j).iter().enumerate() {
                worst = worst.max((v - fine.z.coord(j)[n * every]).abs());
            }
        }
        worst
    };
    let err4 = err_of(4);
    let err2 = err_of(2);
    assert!(err2 < err4, "halving the step did not help: {err2} vs {err4}");
    assert!(err2 < 0.2, "refined solution still far off: {err2}");
}

#[test]
fn coarse_scalar_regulators_never_exceed_fine_ones() {
    // Running maxima over fewer grid points can only shrink, so the scalar
    // regulator on a subsampled path sits below the fine-grid regulator.
    let mut rng = ChaCha8Rng::seed_from_u64(0xF04D);
    let x = brownian_path(&mut rng, 0.1, 0.002, 1000);
    let (_, y_fine) = reflect_1d(&x).unwrap();
    let sub: Vec<f64> = x.iter().copied().step_by(5).collect();
    let (_, y_coarse) = reflect_1d(&sub).unwrap();
    for (m, &yc) in y_coarse.iter().enumerate() {
        assert!(yc <= y_fine[m * 5] + 1e-14);
    }
}

fn unit_diagonal_m_matrix(rng: &mut ChaCha8Rng, d: usize, mass: f64) -> DMatrix<f64> {
    let mut m = DMatrix::identity(d, d);
    for j in 0..d {
        if d == 1 {
            break;
        }
        let budget = rng.random_range(0.0..mass);
        let mut weights = vec![0.0f64; d];
        let mut total = 0.0;
        for (i, w) in weights.iter_mut().enumerate() {
            if i != j {
                *w = rng.random_range(0.1..1.0);
                total += *w;
            }
        }
        for i in 0..d {
            if i != j {
                m[(j, i)] = -budget * weights[i] / total;
            }
        }
    }
    m
}

#[test]
fn perturbations_move_both_maps_within_the_feedback_bound() {
    // For a unit-diagonal reflection with off-diagonal row mass q, a sup-norm
    // input change of e moves each regulator by at most e + q * (the largest
    // regulator change), so both maps are Lipschitz with constant 1 / (1 - q).
    let mut rng = ChaCha8Rng::seed_from_u64(0xF05D);
    for _ in 0..50 {
        let d = rng.random_range(1..=4);
        let r = unit_diagonal_m_matrix(&mut rng, d, 0.35);
        let q = (0..d)
            .map(|j| (0..d).filter(|&i| i != j).map(|i| r[(j, i)].abs()).sum::<f64>())
            .fold(0.0f64, f64::max);
        let bound = 1.0 / (1.0 - q);
        assert!(kappa(&r) >= 1.0 - 1e-12);
        let coords: Vec<Vec<f64>> = (0..d)
            .map(|_| {
                let start = rng.random_range(0.0..0.5);
                brownian_path(&mut rng, start, 0.005, 250)
            })
            .collect();
        let mut shifted = coords.clone();
        let mut gap = 0.0f64;
        for c in &mut shifted {
            let shift = rng.random_range(0.0..0.3);
            gap = gap.max(shift);
            for v in c.iter_mut() {
                *v += shift;
            }
        }
        let base = reflect_md(&grid_from(coords, 0.005), &r, REFLECT_TOL, REFLECT_MAX_ITER)
            .unwrap();
        let moved = reflect_md(&grid_from(shifted, 0.005), &r, REFLECT_TOL, REFLECT_MAX_ITER)
            .unwrap();
        let mut dz = 0.0f64;
        let mut dy = 0.0f64;
        for j in 0..d {
            for n in 0..base.z.len() {
                dz = dz.max((base.z.coord(j)[n] - moved.z.coord(j)[n]).abs());
                dy = dy.max((base.y.coord(j)[n] - moved.y.coord(j)[n]).abs());
            }
        }
        assert!(dz <= bound * gap + 1e-8, "state gap {dz} over {bound} * {gap}");
        assert!(dy <= bound * gap + 1e-8, "regulator gap {dy} over {bound} * {gap}");
        if d == 1 {
            // Scalar shifts can never be amplified at all.
            assert!(dz <= gap + 1e-10);
            assert!(dy <= gap + 1e-10);
        }
    }
}
