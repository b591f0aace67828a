//! Cross-checks for throughputs, visit probabilities, flow covariance, and
//! limit descriptors against independently coded closed forms.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gjnlab::limits::{
    covariance_gamma, eliminate, limit_descriptor, limit_descriptor_for_network, w_from_reflection,
    w_matrix, RegimeKind,
};
use gjnlab::network::{
    service_rates, solve_traffic, Block, DistributionSpec, NetworkSpec, RoutingMatrix, ScaleRegime,
};
use gjnlab::verify::{random_m_matrix, random_open_network};

fn tandem(b1: f64, b2: f64) -> NetworkSpec {
    NetworkSpec::new(
        RoutingMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap(),
        vec![1.0, 0.0],
        vec![DistributionSpec::Exponential; 2],
        vec![DistributionSpec::Exponential; 2],
        ScaleRegime::new(
            vec![
                Block { lo: 0, hi: 0, exponent: 1.0, b: vec![b1] },
                Block { lo: 1, hi: 1, exponent: 2.0, b: vec![b2] },
            ],
            2,
        )
        .unwrap(),
    )
    .unwrap()
}

/// Flow covariance rebuilt from first principles: arrival variability feeds
/// the diagonal, each service process spreads variance over its routing row,
/// and multinomial routing adds its own covariance.
fn gamma_oracle(spec: &NetworkSpec, lam: &DVector<f64>) -> DMatrix<f64> {
    let n = spec.stations();
    let p = spec.routing.p();
    let ce2 = spec.arrival_scv();
    let cs2 = spec.service_scv();
    let mut g = DMatrix::zeros(n, n);
    for j in 0..n {
        g[(j, j)] += spec.alpha[j] * ce2[j];
    }
    for k in 0..n {
        let mut dep = DVector::zeros(n);
        dep[k] = 1.0;
        for j in 0..n {
            dep[j] -= p[(k, j)];
        }
        g += lam[k] * cs2[k] * &dep * dep.transpose();
        for i in 0..n {
            for j in 0..n {
                let delta = if i == j { 1.0 } else { 0.0 };
                g[(i, j)] += lam[k] * p[(k, i)] * (delta - p[(k, j)]);
            }
        }
    }
    g
}

#[test]
fn throughput_solution_agrees_with_a_long_fixed_point_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x51A7);
    let mut specs = vec![tandem(1.0, 1.0)];
    for _ in 0..20 {
        specs.push(random_open_network(&mut rng, 6));
    }
    for spec in &specs {
        let lam = solve_traffic(spec).unwrap();
        let p_t = spec.routing.p().transpose();
        let alpha = spec.alpha_vector();
        let mut fixed = alpha.clone();
        for _ in 0..600 {
            fixed = &alpha + &p_t * &fixed;
        }
        let residual = (&alpha + &p_t * &lam - &lam).abs().max();
        assert!(residual <= 1e-12, "traffic equations violated by {residual:e}");
        for j in 0..spec.stations() {
            let rel = (lam[j] - fixed[j]).abs() / fixed[j];
            assert!(rel <= 1e-12, "station {j}: solver {} vs iteration {}", lam[j], fixed[j]);
        }
    }
}

#[test]
fn visit_probabilities_satisfy_the_first_step_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x51A8);
    for _ in 0..20 {
        let spec = random_open_network(&mut rng, 6);
        let p = spec.routing.p();
        let n = spec.stations();
        let w = w_matrix(&spec.routing).unwrap();
        for i in 0..n {
            for j in 0..n {
                // Reaching j before blocking means jumping there directly or
                // jumping to a faster station m < j and reaching j from m;
                // landing anywhere else ends the excursion.
                let mut rhs = p[(i, j)];
                for m in 0..j {
                    rhs += p[(i, m)] * w.get(m, j);
                }
                let gap = (w.get(i, j) - rhs).abs();
                assert!(gap <= 1e-12, "entry ({i}, {j}) off by {gap:e}");
            }
        }
    }
}

#[test]
fn both_visit_probability_routes_agree_on_random_networks() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x51A9);
    for _ in 0..20 {
        let spec = random_open_network(&mut rng, 6);
        let from_routing = w_matrix(&spec.routing).unwrap();
        let from_reflection = w_from_reflection(&spec.routing.reflection()).unwrap();
        let n = spec.stations();
        // The reflection route only defines the upper wedge, which is all
        // the limit parameters consume.
        for j in 0..n {
            for i in 0..=j {
                let gap = (from_routing.get(i, j) - from_reflection.get(i, j)).abs();
                assert!(gap <= 1e-12, "routes disagree at ({i}, {j}) by {gap:e}");
            }
        }
    }
}

#[test]
fn flow_covariance_matches_the_primitive_reconstruction() {
    let tandem_gamma = covariance_gamma(&tandem(1.0, 1.0)).unwrap();
    let frozen = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
    assert!((tandem_gamma - frozen).abs().max() <= 1e-14);

    let mut rng = ChaCha8Rng::seed_from_u64(0x51AA);
    for _ in 0..20 {
        let spec = random_open_network(&mut rng, 6);
        let lam = solve_traffic(&spec).unwrap();
        let gamma = covariance_gamma(&spec).unwrap();
        let oracle = gamma_oracle(&spec, &lam);
        let scale = oracle.abs().max().max(1.0);
        let gap = (gamma - oracle).abs().max() / scale;
        assert!(gap <= 1e-12, "covariance reconstruction off by {gap:e}");
    }
}

#[test]
fn capacity_slacks_scale_with_their_block_exponents() {
    let mut rows = vec![vec![0.0; 6]; 6];
    for j in 0..5 {
        rows[j][j + 1] = 1.0;
    }
    let spec = NetworkSpec::new(
        RoutingMatrix::from_rows(&rows).unwrap(),
        vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        vec![DistributionSpec::Exponential; 6],
        vec![DistributionSpec::Exponential; 6],
        ScaleRegime::new(
            vec![
                Block { lo: 0, hi: 1, exponent: 1.0, b: vec![1.0, 2.0] },
                Block { lo: 2, hi: 4, exponent: 2.0, b: vec![3.0, 2.0, 1.0] },
                Block { lo: 5, hi: 5, exponent: 3.0, b: vec![2.0] },
            ],
            6,
        )
        .unwrap(),
    )
    .unwrap();
    let r: f64 = 0.25;
    let lam = solve_traffic(&spec).unwrap();
    let rates = service_rates(&spec, r).unwrap();
    let expected = [r, 2.0 * r, 3.0 * r * r, 2.0 * r * r, r * r, 2.0 * r.powi(3)];
    for j in 0..6 {
        let slack = rates.mu[j] - lam[j];
        let rel = (slack - expected[j]).abs() / expected[j];
        assert!(rel <= 1e-12, "station {j}: slack {slack} vs {}", expected[j]);
        assert!(rates.rho[j] < 1.0);
    }
}

#[test]
fn matching_descriptor_of_the_tandem_is_two_unit_reflected_scalars() {
    let spec = tandem(0.7, 1.3);
    let desc = limit_descriptor_for_network(&spec, RegimeKind::Matching, &[0.4, 0.9]).unwrap();
    assert_eq!(desc.components.len(), 2);
    // Neither station feeds back to itself, so each pull factor is one and
    // both stations inherit the full flow variance of two.
    let expect = [(-0.7, 0.4), (-1.3, 0.9)];
    for (j, comp) in desc.components.iter().enumerate() {
        assert_eq!(comp.dim(), 1);
        assert_eq!(comp.stations, vec![j]);
        assert!((comp.drift[0] - expect[j].0).abs() <= 1e-14);
        assert!((comp.initial[0] - expect[j].1).abs() <= 1e-14);
        assert!((comp.covariance[(0, 0)] - 2.0).abs() <= 1e-12);
        assert!((comp.reflection[(0, 0)] - 1.0).abs() <= 1e-14);
    }
}

#[test]
fn lowest_descriptor_of_the_tandem_matches_hand_elimination() {
    let spec = tandem(0.7, 1.3);
    let desc = limit_descriptor_for_network(&spec, RegimeKind::Lowest, &[0.4, 0.9]).unwrap();

    // Station 1 keeps the whole system on its own clock; only its slack
    // survives because the slower station's capacity vanishes on this clock.
    let first = &desc.components[0];
    assert_eq!(first.dim(), 2);
    let r_full = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 1.0]);
    let gamma = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
    assert!((first.drift[0] + 0.7).abs() <= 1e-14);
    assert!((first.drift[1] - 0.7).abs() <= 1e-14);
    assert!((&first.covariance - &gamma).abs().max() <= 1e-12);
    assert!((&first.reflection - &r_full).abs().max() <= 1e-14);
    assert_eq!(first.initial.as_slice(), &[0.4, 0.9]);

    // Station 2 sees the upstream station averaged out: a scalar with the
    // eliminated variance (1, 1) Gamma (1, 1)' = 2 and a fresh start.
    let second = &desc.components[1];
    assert_eq!(second.dim(), 1);
    assert!((second.drift[0] + 1.3).abs() <= 1e-14);
    assert!((second.covariance[(0, 0)] - 2.0).abs() <= 1e-12);
    assert!((second.reflection[(0, 0)] - 1.0).abs() <= 1e-14);
    assert_eq!(second.initial[0], 0.0);
}

#[test]
fn blockwise_descriptors_slice_the_eliminated_system() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x51AB);
    let n = 4;
    let r = random_m_matrix(&mut rng, n);
    let l = random_m_matrix(&mut rng, n).lower_triangle();
    let gamma = &l * l.transpose();
    let regime = ScaleRegime::new(
        vec![
            Block { lo: 0, hi: 1, exponent: 1.0, b: vec![0.8, 1.1] },
            Block { lo: 2, hi: 3, exponent: 2.0, b: vec![0.6, 0.9] },
        ],
        n,
    )
    .unwrap();
    let xi = [0.3, 0.0, 0.5, 0.2];

    let matching =
        limit_descriptor(&r, &gamma, &regime, RegimeKind::BlockMatching, &xi).unwrap();
    assert_eq!(matching.components.len(), 2);
    let head = &matching.components[0];
    assert_eq!(head.dim(), 2);
    // The leading block needs no elimination, so its parameters are plain
    // submatrices of the original system.
    let b_head = DVector::from_column_slice(&[0.8, 1.1]);
    let drift_head = -r.view((0, 0), (2, 2)) * &b_head;
    assert!((&head.drift - &drift_head).abs().max() <= 1e-13);
    assert!((&head.covariance - gamma.view((0, 0), (2, 2))).abs().max() <= 1e-13);
    assert!((&head.reflection - r.view((0, 0), (2, 2))).abs().max() <= 1e-14);
    assert_eq!(head.initial.as_slice(), &xi[0..2]);

    let tail = &matching.components[1];
    assert_eq!(tail.dim(), 2);
    assert_eq!(tail.initial.as_slice(), &xi[2..4]);
    let elim = eliminate(&r, 3).unwrap();
    let mixed = &elim.e * &gamma * elim.e.transpose();
    let b_tail = DVector::from_column_slice(&[0.6, 0.9]);
    let drift_tail = -elim.g.view((2, 2), (2, 2)) * &b_tail;
    assert!((&tail.drift - &drift_tail).abs().max() <= 1e-12);
    assert!((&tail.covariance - mixed.view((2, 2), (2, 2))).abs().max() <= 1e-12);
    assert!((&tail.reflection - elim.g.view((2, 2), (2, 2))).abs().max() <= 1e-13);

    let lowest = limit_descriptor(&r, &gamma, &regime, RegimeKind::BlockLowest, &xi).unwrap();
    let deep = &lowest.components[0];
    // On the fastest clock every station is retained and every later
    // block's capacity has already vanished.
    assert_eq!(deep.dim(), n);
    let drift_deep = -r.view((0, 0), (n, 2)) * &b_head;
    assert!((&deep.drift - &drift_deep).abs().max() <= 1e-13);
    assert!((&deep.reflection - &r).abs().max() <= 1e-14);
    assert_eq!(deep.initial.as_slice(), &xi[..]);
    assert_eq!(lowest.components[1].initial.as_slice(), &[0.0, 0.0]);
}
