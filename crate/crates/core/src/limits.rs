//! Limit calculus: turns a network description into the parameters of its
//! heavy-traffic diffusion limits.
//!
//! The central objects are
//!
//! * the `w` matrix: `w[i][j]` is the probability that the routing chain
//!   started at station `i` visits `j` before leaving the network or touching
//!   any station after `j` (the first step always counts, so `w[j][j]` is a
//!   return probability). Columns solve small linear systems in the leading
//!   principal blocks of the routing matrix, and the same numbers can be read
//!   off any reflection matrix `R` directly, without routing probabilities;
//! * block Gaussian elimination of a reflection matrix: `eliminate(R, k)`
//!   produces the unit lower-triangular eliminator `E` and the partially
//!   reduced `G = E R` whose trailing Schur complement is again an M-matrix.
//!   Row `k` of `E` and the diagonal of `G` reproduce the `w` quantities,
//!   which is how the per-station and blockwise limit parameters join up;
//! * the limit descriptor: for each separation regime, the list of reflected
//!   Brownian components (initial point, drift, covariance, reflection
//!   matrix, observed coordinates) that the scaled network converges to.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, LinalgError};
use crate::network::{NetworkSpec, RoutingMatrix, ScaleRegime};

#[derive(Debug, Error)]
pub enum LimitError {
    #[error("leading principal block of order {order} is singular")]
    SingularBlock { order: usize },
    #[error("covariance is numerically asymmetric (worst gap {gap:.3e})")]
    Asymmetric { gap: f64 },
    #[error("reflection matrix is not an M-matrix")]
    NotMMatrix,
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Network(#[from] crate::network::NetworkError),
}

/// Visit-before-blocking probabilities, one column per target station.
///
/// A full matrix (every `i`) comes from routing probabilities; a reflection
/// matrix only determines the entries with `i <= j`, which is all the limit
/// parameters need.
#[derive(Clone, Debug)]
pub struct WMatrix {
    entries: DMatrix<f64>,
    full: bool,
}

impl WMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_full(&self) -> bool {
        self.full
    }

    /// Entry `w[i][j]`; entries below the diagonal exist only for the
    /// routing-derived matrix.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(
            self.full || i <= j,
            "entry ({i}, {j}) undefined for a reflection-derived w matrix"
        );
        self.entries[(i, j)]
    }

    /// Return probability `w[j][j]`.
    pub fn return_probability(&self, j: usize) -> f64 {
        self.entries[(j, j)]
    }

    /// The vector `u_j = (w[0][j], ..., w[j-1][j], 1, 0, ..., 0)` whose
    /// quadratic form against the covariance gives station `j`'s limit
    /// variance.
    pub fn u_vector(&self, j: usize) -> DVector<f64> {
        let mut u = DVector::zeros(self.dim());
        for i in 0..j {
            u[i] = self.entries[(i, j)];
        }
        u[j] = 1.0;
        u
    }
}

/// All visit probabilities from the routing matrix.
///
/// Column `j` (0-based) stacks two solves in the order-`j` leading block
/// `A = P[..j, ..j]`: the rows above `j` are `(I - A)^{-1} P[..j, j]`, and
/// the rows from `j` down add the direct step `P[j.., j]` to the detour
/// `P[j.., ..j] (I - A)^{-1} P[..j, j]` through the faster stations.
pub fn w_matrix(routing: &RoutingMatrix) -> Result<WMatrix, LimitError> {
    let p = routing.p();
    let n = routing.dim();
    let mut w = DMatrix::zeros(n, n);
    for j in 0..n {
        let below_left = p.view((j, 0), (n - j, j));
        let direct = p.view((j, j), (n - j, 1));
        // Column 0 has an empty leading block and no detour term.
        let detour = if j == 0 {
            DMatrix::zeros(0, 1)
        } else {
            let head = p.view((0, 0), (j, j));
            let above = p.view((0, j), (j, 1));
            let eye = DMatrix::identity(j, j);
            (eye - head)
                .lu()
                .solve(&above.clone_owned())
                .ok_or(LimitError::SingularBlock { order: j })?
        };
        for i in 0..j {
            w[(i, j)] = detour[(i, 0)];
        }
        let tail = if j == 0 {
            direct.clone_owned()
        } else {
            direct.clone_owned() + below_left * &detour
        };
        for i in j..n {
            w[(i, j)] = tail[(i - j, 0)];
        }
    }
    Ok(WMatrix { entries: w, full: true })
}

/// Visit probabilities `w[i][j]`, `i <= j`, read off a reflection matrix.
///
/// The row above the diagonal is `-R[j, ..j] R[..j, ..j]^{-1}` and the
/// diagonal is `1 - R[j][j] + R[j, ..j] R[..j, ..j]^{-1} R[..j, j]`; for
/// `R = I - P'` these agree with [`w_matrix`].
pub fn w_from_reflection(r: &DMatrix<f64>) -> Result<WMatrix, LimitError> {
    let n = r.nrows();
    assert_eq!(n, r.ncols(), "square reflection matrix required");
    let mut w = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut detour = 0.0;
        if j > 0 {
            let head = r.view((0, 0), (j, j));
            let row = r.view((j, 0), (1, j));
            let col = r.view((0, j), (j, 1));
            // top = -(A')^{-1} row', i.e. the row vector -row A^{-1} as a column.
            let lu = head.transpose().lu();
            let top = lu
                .solve(&row.transpose())
                .map(|x| -x)
                .ok_or(LimitError::SingularBlock { order: j })?;
            for i in 0..j {
                w[(i, j)] = top[(i, 0)];
                detour -= top[(i, 0)] * col[(i, 0)];
            }
        }
        w[(j, j)] = 1.0 - r[(j, j)] + detour;
    }
    Ok(WMatrix { entries: w, full: false })
}

/// Result of block Gaussian elimination at pivot `k` (1-based):
/// `e` is unit lower-triangular, `g = e * r`, and rows `k-1..` of `g` carry
/// zeros in the first `k-1` columns.
#[derive(Clone, Debug)]
pub struct Elimination {
    pub e: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub pivot: usize,
}

impl Elimination {
    /// The trailing Schur complement `g[k-1.., k-1..]`.
    pub fn schur(&self) -> DMatrix<f64> {
        let n = self.g.nrows();
        let m = self.pivot - 1;
        self.g.view((m, m), (n - m, n - m)).clone_owned()
    }
}

/// Eliminates the first `k - 1` coordinates of the reflection matrix `r`.
///
/// `k = 1` returns `e = I`, `g = r`. For an M-matrix input the trailing
/// Schur complement is again an M-matrix.
pub fn eliminate(r: &DMatrix<f64>, k: usize) -> Result<Elimination, LimitError> {
    let n = r.nrows();
    assert_eq!(n, r.ncols(), "square reflection matrix required");
    assert!(k >= 1 && k <= n, "pivot {k} outside 1..={n}");
    if !linalg::is_m_matrix(r, 1e-9) {
        return Err(LimitError::NotMMatrix);
    }
    let m = k - 1;
    let mut e = DMatrix::identity(n, n);
    let mut g = r.clone();
    if m > 0 {
        let head = r.view((0, 0), (m, m)).clone_owned();
        let c = r.view((m, 0), (n - m, m)).clone_owned();
        let d = r.view((m, m), (n - m, n - m)).clone_owned();
        let b = r.view((0, m), (m, n - m)).clone_owned();
        // c_head = C A^{-1}, solved through A' to keep one LU.
        let lu = head.transpose().lu();
        let c_head = lu
            .solve(&c.transpose())
            .ok_or(LimitError::SingularBlock { order: m })?
            .transpose();
        let schur = d - &c_head * &b;
        for i in 0..(n - m) {
            for jj in 0..m {
                e[(m + i, jj)] = -c_head[(i, jj)];
                g[(m + i, jj)] = 0.0;
            }
            for jj in 0..(n - m) {
                g[(m + i, m + jj)] = schur[(i, jj)];
            }
        }
        debug_assert!(
            linalg::is_m_matrix(&schur, 1e-9),
            "Schur complement lost the M-matrix property"
        );
    }
    Ok(Elimination { e, g, pivot: k })
}

/// Covariance of the limit driving Brownian motion.
///
/// Entry `(j, k)` is `alpha_j c_ej^2` on the diagonal plus, for every
/// station `i`, the routing multinomial term
/// `lambda_i P[i][j] (delta_jk - P[i][k])` and the service variability term
/// `lambda_i c_si^2 (delta_ij - P[i][j]) (delta_ik - P[i][k])`. The formula
/// is evaluated independently for every ordered pair and must come out
/// symmetric to `1e-10`.
pub fn covariance_gamma(spec: &NetworkSpec) -> Result<DMatrix<f64>, LimitError> {
    let n = spec.stations();
    let p = spec.routing.p();
    let lam = crate::network::solve_traffic(spec)?;
    let ce2 = spec.arrival_scv();
    let cs2 = spec.service_scv();
    let kron = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let mut gamma = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            let mut s = spec.alpha[j] * ce2[j] * kron(j, k);
            for i in 0..n {
                s += lam[i]
                    * (p[(i, j)] * (kron(j, k) - p[(i, k)])
                        + cs2[i] * (kron(i, j) - p[(i, j)]) * (kron(i, k) - p[(i, k)]));
            }
            gamma[(j, k)] = s;
        }
    }
    let gap = linalg::max_asymmetry(&gamma);
    if gap > 1e-10 {
        return Err(LimitError::Asymmetric { gap });
    }
    Ok(gamma)
}

/// Station `j`'s limit variance accumulated from primitive variability.
///
/// Faster stations (`i < j`) contribute arrival variability thinned by the
/// visit probabilities, slower stations (`i > j`) contribute service
/// variability, and the station itself contributes its own arrival noise and
/// the return-probability service term. Requires the full (routing-derived)
/// `w` matrix because stations after `j` enter through their visit
/// probabilities.
pub fn station_variance_direct(
    spec: &NetworkSpec,
    lam: &DVector<f64>,
    w: &WMatrix,
    j: usize,
) -> f64 {
    assert!(w.is_full(), "the direct route needs all visit probabilities");
    let ce2 = spec.arrival_scv();
    let cs2 = spec.service_scv();
    let mut s = spec.alpha[j] * ce2[j];
    for i in 0..spec.stations() {
        let wij = w.get(i, j);
        if i < j {
            s += spec.alpha[i] * (wij * wij * ce2[i] + wij * (1.0 - wij));
        } else if i > j {
            s += lam[i] * (wij * wij * cs2[i] + wij * (1.0 - wij));
        } else {
            s += lam[j] * (cs2[j] * (1.0 - wij) * (1.0 - wij) + wij * (1.0 - wij));
        }
    }
    s
}

/// Station `j`'s limit variance as the quadratic form `u_j' gamma u_j`.
pub fn station_variance_quadratic(gamma: &DMatrix<f64>, w: &WMatrix, j: usize) -> f64 {
    let u = w.u_vector(j);
    (u.transpose() * gamma * &u)[(0, 0)]
}

/// Station `j`'s limit drift `-(1 - w[j][j]) * b_j`.
pub fn station_drift(w: &WMatrix, slack: f64, j: usize) -> f64 {
    -(1.0 - w.return_probability(j)) * slack
}

/// Which separation regime a limit descriptor is built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeKind {
    /// One scale per station, observed on each station's own clock.
    Matching,
    /// One scale per station, observed on the slowest surviving clock.
    Lowest,
    /// Blockwise scales, each block on its own clock.
    BlockMatching,
    /// Blockwise scales, each block on the slowest surviving clock.
    BlockLowest,
}

/// One reflected Brownian component of a limit descriptor.
#[derive(Clone, Debug)]
pub struct LimitComponent {
    pub label: String,
    /// Network stations this component reports, in coordinate order.
    pub stations: Vec<usize>,
    /// Coordinates (within the component) carrying those stations.
    pub observed: Vec<usize>,
    pub initial: DVector<f64>,
    pub drift: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub reflection: DMatrix<f64>,
}

impl LimitComponent {
    pub fn dim(&self) -> usize {
        self.drift.len()
    }
}

/// The full limit of a scaled network: independent reflected Brownian
/// components, one per station or block.
#[derive(Clone, Debug)]
pub struct LimitDescriptor {
    pub kind: RegimeKind,
    pub components: Vec<LimitComponent>,
}

/// Builds the limit descriptor from a reflection matrix, driving covariance,
/// capacity schedule, and initial levels `xi` (one per station, on each
/// station's own scale).
pub fn limit_descriptor(
    r: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
    regime: &ScaleRegime,
    kind: RegimeKind,
    xi: &[f64],
) -> Result<LimitDescriptor, LimitError> {
    let n = r.nrows();
    if gamma.nrows() != n || gamma.ncols() != n {
        return Err(LimitError::Unsupported(format!(
            "covariance is {}x{}, reflection {}x{}",
            gamma.nrows(),
            gamma.ncols(),
            n,
            n
        )));
    }
    if regime.stations() != n || xi.len() != n {
        return Err(LimitError::Unsupported(format!(
            "schedule covers {} stations and xi {}, reflection has {n}",
            regime.stations(),
            xi.len()
        )));
    }
    if xi.iter().any(|&x| x < 0.0) {
        return Err(LimitError::Unsupported(
            "initial levels must be nonnegative".into(),
        ));
    }
    let per_station = matches!(kind, RegimeKind::Matching | RegimeKind::Lowest);
    if per_station && regime.count() != n {
        return Err(LimitError::Unsupported(format!(
            "{kind:?} needs one block per station; schedule has {} blocks",
            regime.count()
        )));
    }
    let mut components = Vec::new();
    match kind {
        RegimeKind::Matching => {
            // Per-station scalars from the visit probabilities; the
            // elimination route must agree but is deliberately not used here.
            let w = w_from_reflection(r)?;
            for j in 0..n {
                let pull = 1.0 - w.return_probability(j);
                let variance = station_variance_quadratic(gamma, &w, j);
                components.push(LimitComponent {
                    label: format!("station {}", j + 1),
                    stations: vec![j],
                    observed: vec![0],
                    initial: DVector::from_element(1, xi[j]),
                    drift: DVector::from_element(1, -pull * regime.slack(j)),
                    covariance: DMatrix::from_element(1, 1, variance),
                    reflection: DMatrix::from_element(1, 1, pull),
                });
            }
        }
        RegimeKind::Lowest => {
            for j in 0..n {
                let elim = eliminate(r, j + 1)?;
                let d = n - j;
                let drift = -(elim.g.column(j).rows(j, d).clone_owned() * regime.slack(j));
                let mixed = &elim.e * gamma * elim.e.transpose();
                let initial = if j == 0 {
                    DVector::from_column_slice(xi)
                } else {
                    DVector::zeros(d)
                };
                components.push(LimitComponent {
                    label: format!("station {} (companion tail)", j + 1),
                    stations: vec![j],
                    observed: vec![0],
                    initial,
                    drift,
                    covariance: mixed.view((j, j), (d, d)).clone_owned(),
                    reflection: elim.schur(),
                });
            }
        }
        RegimeKind::BlockMatching | RegimeKind::BlockLowest => {
            for (k, blk) in regime.blocks().iter().enumerate() {
                let elim = eliminate(r, blk.lo + 1)?;
                let mixed = &elim.e * gamma * elim.e.transpose();
                let width = blk.size();
                let depth = if kind == RegimeKind::BlockMatching {
                    width
                } else {
                    n - blk.lo
                };
                let slack = DVector::from_column_slice(&blk.b);
                let drift =
                    -elim.g.view((blk.lo, blk.lo), (depth, width)).clone_owned() * &slack;
                let initial = if kind == RegimeKind::BlockMatching {
                    DVector::from_column_slice(&xi[blk.lo..=blk.hi])
                } else if k == 0 {
                    DVector::from_column_slice(xi)
                } else {
                    DVector::zeros(depth)
                };
                components.push(LimitComponent {
                    label: format!("block {}", k + 1),
                    stations: (blk.lo..=blk.hi).collect(),
                    observed: (0..width).collect(),
                    initial,
                    drift,
                    covariance: mixed.view((blk.lo, blk.lo), (depth, depth)).clone_owned(),
                    reflection: elim
                        .g
                        .view((blk.lo, blk.lo), (depth, depth))
                        .clone_owned(),
                });
            }
        }
    }
    for comp in &components {
        check_component(comp)?;
    }
    Ok(LimitDescriptor { kind, components })
}

/// Descriptor for a network: reflection `I - P'`, covariance from the
/// primitives, schedule from the spec.
pub fn limit_descriptor_for_network(
    spec: &NetworkSpec,
    kind: RegimeKind,
    xi: &[f64],
) -> Result<LimitDescriptor, LimitError> {
    let gamma = covariance_gamma(spec)?;
    limit_descriptor(&spec.routing.reflection(), &gamma, &spec.regime, kind, xi)
}

/// Component sanity: reflection is an M-matrix, covariance is symmetric PSD,
/// and the pushback `reflection^{-1} (-drift)` is nonnegative with strict
/// positivity on observed coordinates, which is the componentwise stability
/// statement that survives general slack vectors.
fn check_component(comp: &LimitComponent) -> Result<(), LimitError> {
    if !linalg::is_m_matrix(&comp.reflection, 1e-9) {
        return Err(LimitError::NotMMatrix);
    }
    let gap = linalg::max_asymmetry(&comp.covariance);
    if gap > 1e-10 {
        return Err(LimitError::Asymmetric { gap });
    }
    linalg::psd_cholesky(&comp.covariance, 1e-10)?;
    let pushback = linalg::solve(&comp.reflection, &(-comp.drift.clone()))?;
    for i in 0..comp.dim() {
        let floor = if comp.observed.contains(&i) { 1e-9 } else { -1e-9 };
        if pushback[i] < floor {
            return Err(LimitError::Unsupported(format!(
                "component '{}' is not stable in coordinate {i} \
                 (pushback {:.3e})",
                comp.label, pushback[i]
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Block, DistributionSpec, NetworkSpec, RoutingMatrix, ScaleRegime};

    fn exp_spec(n: usize) -> Vec<DistributionSpec> {
        vec![DistributionSpec::Exponential; n]
    }

    fn tandem() -> NetworkSpec {
        NetworkSpec::new(
            RoutingMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap(),
            vec![1.0, 0.0],
            exp_spec(2),
            exp_spec(2),
            ScaleRegime::fully_separated(2),
        )
        .unwrap()
    }

    /// Two stations exchanging half their output.
    fn two_cycle() -> NetworkSpec {
        NetworkSpec::new(
            RoutingMatrix::from_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap(),
            vec![0.5, 0.5],
            exp_spec(2),
            exp_spec(2),
            ScaleRegime::fully_separated(2),
        )
        .unwrap()
    }

    #[test]
    fn w_of_tandem() {
        let w = w_matrix(&tandem().routing).unwrap();
        assert_eq!(w.get(0, 0), 0.0);
        assert_eq!(w.get(1, 0), 0.0);
        assert!((w.get(0, 1) - 1.0).abs() < 1e-15);
        assert_eq!(w.get(1, 1), 0.0);
    }

    #[test]
    fn w_of_two_cycle() {
        let w = w_matrix(&two_cycle().routing).unwrap();
        assert_eq!(w.get(0, 0), 0.0);
        assert!((w.get(1, 0) - 0.5).abs() < 1e-15);
        assert!((w.get(0, 1) - 0.5).abs() < 1e-15);
        assert!((w.get(1, 1) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn reflection_route_matches_routing_route() {
        let spec = two_cycle();
        let full = w_matrix(&spec.routing).unwrap();
        let upper = w_from_reflection(&spec.routing.reflection()).unwrap();
        for j in 0..2 {
            for i in 0..=j {
                assert!((full.get(i, j) - upper.get(i, j)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn elimination_of_symmetric_half_cycle() {
        let r = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 1.0]);
        let elim = eliminate(&r, 2).unwrap();
        let e_want = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 1.0]);
        let g_want = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, 0.0, 0.75]);
        assert!(linalg::max_abs_diff(&elim.e, &e_want) < 1e-15);
        assert!(linalg::max_abs_diff(&elim.g, &g_want) < 1e-15);

        let trivial = eliminate(&r, 1).unwrap();
        assert!(linalg::max_abs_diff(&trivial.e, &DMatrix::identity(2, 2)) < 1e-15);
        assert!(linalg::max_abs_diff(&trivial.g, &r) < 1e-15);
    }

    #[test]
    fn covariance_of_tandem_and_cycle() {
        let want = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        for spec in [tandem(), two_cycle()] {
            let gamma = covariance_gamma(&spec).unwrap();
            assert!(linalg::max_abs_diff(&gamma, &want) < 1e-12);
        }
    }

    #[test]
    fn single_station_variance_is_two() {
        let spec = NetworkSpec::new(
            RoutingMatrix::from_rows(&[vec![0.0]]).unwrap(),
            vec![1.0],
            exp_spec(1),
            exp_spec(1),
            ScaleRegime::fully_separated(1),
        )
        .unwrap();
        let lam = crate::network::solve_traffic(&spec).unwrap();
        let w = w_matrix(&spec.routing).unwrap();
        let gamma = covariance_gamma(&spec).unwrap();
        assert!((station_variance_direct(&spec, &lam, &w, 0) - 2.0).abs() < 1e-14);
        assert!((station_variance_quadratic(&gamma, &w, 0) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn both_variance_routes_give_three_halves_on_the_cycle() {
        // Hand value for the half-exchange cycle, station 2: 3/2.
        let spec = two_cycle();
        let lam = crate::network::solve_traffic(&spec).unwrap();
        let w = w_matrix(&spec.routing).unwrap();
        let gamma = covariance_gamma(&spec).unwrap();
        assert!((station_variance_direct(&spec, &lam, &w, 1) - 1.5).abs() < 1e-13);
        assert!((station_variance_quadratic(&gamma, &w, 1) - 1.5).abs() < 1e-13);
        assert!((station_drift(&w, 1.0, 1) + 0.75).abs() < 1e-13);
    }

    #[test]
    fn matching_descriptor_of_the_cycle() {
        let spec = two_cycle();
        let desc =
            limit_descriptor_for_network(&spec, RegimeKind::Matching, &[1.0, 1.0]).unwrap();
        assert_eq!(desc.components.len(), 2);
        assert!((desc.components[0].drift[0] + 1.0).abs() < 1e-13);
        assert!((desc.components[1].drift[0] + 0.75).abs() < 1e-13);
        assert!((desc.components[0].covariance[(0, 0)] - 2.0).abs() < 1e-13);
        assert!((desc.components[1].covariance[(0, 0)] - 1.5).abs() < 1e-13);
    }

    #[test]
    fn lowest_descriptor_shrinks_with_station() {
        let spec = two_cycle();
        let desc =
            limit_descriptor_for_network(&spec, RegimeKind::Lowest, &[1.0, 0.5]).unwrap();
        assert_eq!(desc.components[0].dim(), 2);
        assert_eq!(desc.components[1].dim(), 1);
        // First component keeps the given start, the later one starts at zero.
        assert_eq!(desc.components[0].initial.as_slice(), &[1.0, 0.5]);
        assert_eq!(desc.components[1].initial.as_slice(), &[0.0]);
        // Station 1 on the slow clock: drift column -R[.., 0] = (-1, 0.5).
        assert!((desc.components[0].drift[0] + 1.0).abs() < 1e-13);
        assert!((desc.components[0].drift[1] - 0.5).abs() < 1e-13);
        // Station 2: scalar reduced system.
        assert!((desc.components[1].drift[0] + 0.75).abs() < 1e-13);
        assert!((desc.components[1].reflection[(0, 0)] - 0.75).abs() < 1e-13);
    }

    #[test]
    fn blockwise_descriptor_with_one_block_is_the_plain_reflection() {
        let spec = two_cycle();
        let regime = ScaleRegime::new(
            vec![Block { lo: 0, hi: 1, exponent: 1.0, b: vec![1.0, 1.0] }],
            2,
        )
        .unwrap();
        let gamma = covariance_gamma(&spec).unwrap();
        let r = spec.routing.reflection();
        let desc =
            limit_descriptor(&r, &gamma, &regime, RegimeKind::BlockMatching, &[1.0, 1.0])
                .unwrap();
        assert_eq!(desc.components.len(), 1);
        let comp = &desc.components[0];
        assert!(linalg::max_abs_diff(&comp.reflection, &r) < 1e-15);
        assert!(linalg::max_abs_diff(&comp.covariance, &gamma) < 1e-15);
        let want_drift = -(&r * DVector::from_column_slice(&[1.0, 1.0]));
        assert!((comp.drift.clone() - want_drift).abs().max() < 1e-15);
    }

    #[test]
    fn descriptor_rejects_mismatched_inputs() {
        let spec = two_cycle();
        let gamma = covariance_gamma(&spec).unwrap();
        let r = spec.routing.reflection();
        let block_regime = ScaleRegime::new(
            vec![Block { lo: 0, hi: 1, exponent: 1.0, b: vec![1.0, 1.0] }],
            2,
        )
        .unwrap();
        // Per-station regimes need singleton blocks.
        assert!(limit_descriptor(&r, &gamma, &block_regime, RegimeKind::Matching, &[0.0, 0.0])
            .is_err());
        // Negative starting level.
        assert!(limit_descriptor(
            &r,
            &gamma,
            &spec.regime,
            RegimeKind::Matching,
            &[-1.0, 0.0]
        )
        .is_err());
    }
}
