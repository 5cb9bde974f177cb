//! Independent estimates of the energy-dissipation cost c(t; u1, u2) between
//! states at a frozen time, and property checks of the induced metric.
//!
//! The cost is an infimum over admissible curves; there is no closed
//! algorithm for it, so this module brackets it instead. In one dimension the
//! integral of |dE/du| over the connecting interval *is* the infimum and
//! serves as the brute-force oracle. In higher dimensions a label-setting
//! shortest path on a weighted lattice gives an upper bound that converges as
//! the mesh refines; the chain-rule energy drop bounds the cost from below.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::energy::EnergyModel;
use crate::sample::SampleBox;
use crate::State;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CostError {
    #[error("operation requires a 1-d model, got dim {0}")]
    Not1d(usize),
    #[error("endpoint lies outside the grid box")]
    OutsideBox,
    #[error("grid too large: {0} nodes (cap {1})")]
    GridTooLarge(usize, usize),
    #[error("points must be pairwise distinct")]
    PointsNotDistinct,
    #[error("no lattice path between the endpoints")]
    Unreachable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostMethod {
    Quadrature1d,
    GridDijkstra,
    Heteroclinic,
}

impl std::fmt::Display for CostMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CostMethod::Quadrature1d => "quadrature_1d",
            CostMethod::GridDijkstra => "grid_dijkstra",
            CostMethod::Heteroclinic => "heteroclinic",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct CostEstimate {
    pub t: f64,
    pub u1: State,
    pub u2: State,
    pub value: f64,
    pub method: CostMethod,
    pub witness_path: Vec<State>,
    /// Error scale of the estimate (quadrature error model / mesh bound).
    pub resolution: f64,
}

/// Composite Simpson of `f` on [a, b] with an even number of panels.
fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, n_panels: usize) -> f64 {
    let n = n_panels.max(2) + n_panels % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * k as f64);
    }
    acc * h / 3.0
}

/// 1-d oracle: integral of |dE/du| over [min(u1,u2), max(u1,u2)] by composite
/// Simpson with panel boundaries at the sign changes of the derivative, so
/// the absolute value never straddles a kink. In 1-d any connecting curve
/// covers this interval and the integrand is nonnegative, which makes the
/// result the exact infimum (up to quadrature error).
pub fn cost_1d(
    model: &EnergyModel,
    t: f64,
    u1: f64,
    u2: f64,
    n_quad: usize,
) -> Result<CostEstimate, CostError> {
    if model.dim() != 1 {
        return Err(CostError::Not1d(model.dim()));
    }
    let g = |x: f64| model.gradient(t, &State::from_element(1, x))[0];
    let (lo, hi) = (u1.min(u2), u1.max(u2));
    let mk = |value: f64, witness: Vec<State>| CostEstimate {
        t,
        u1: State::from_element(1, u1),
        u2: State::from_element(1, u2),
        value,
        method: CostMethod::Quadrature1d,
        witness_path: witness,
        resolution: 1e-10 * (1.0 + value.abs()),
    };
    if lo == hi {
        return Ok(mk(0.0, vec![State::from_element(1, u1)]));
    }

    // locate sign changes of the derivative on a scan grid
    let n_scan = n_quad.max(64);
    let mut cuts = vec![lo];
    let mut prev_x = lo;
    let mut prev_g = g(lo);
    for k in 1..=n_scan {
        let x = lo + (hi - lo) * k as f64 / n_scan as f64;
        let gx = g(x);
        if prev_g == 0.0 {
            // grid point exactly critical; it is already a panel boundary
        } else if gx != 0.0 && gx.signum() != prev_g.signum() {
            let (mut a, mut b) = (prev_x, x);
            let (mut ga, _) = (prev_g, gx);
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                let gm = g(m);
                if gm == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if gm.signum() == ga.signum() {
                    a = m;
                    ga = gm;
                } else {
                    b = m;
                }
            }
            cuts.push(0.5 * (a + b));
        }
        prev_x = x;
        prev_g = gx;
    }
    cuts.push(hi);

    let total_len = hi - lo;
    let mut value = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let panels = ((n_quad as f64 * (b - a) / total_len).ceil() as usize).max(4);
        value += simpson(&|x| g(x).abs(), a, b, panels);
    }

    // witness: the monotone segment, oriented u1 -> u2, with nodes at cuts
    let mut witness: Vec<f64> = cuts.clone();
    if u1 > u2 {
        witness.reverse();
    }
    let witness = witness
        .into_iter()
        .map(|x| State::from_element(1, x))
        .collect();
    Ok(mk(value, witness))
}

/// Lattice description for [`cost_grid`]: a box cut into cells of size `mesh`.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub sbox: SampleBox,
    pub mesh: f64,
}

impl GridSpec {
    pub fn new(sbox: SampleBox, mesh: f64) -> Self {
        assert!(mesh > 0.0);
        GridSpec { sbox, mesh }
    }
}

const GRID_NODE_CAP: usize = 8_000_000;

struct Lattice {
    dims: Vec<usize>,
    lo: Vec<f64>,
    mesh: f64,
}

impl Lattice {
    fn node_count(&self) -> usize {
        self.dims.iter().product()
    }

    fn coords(&self, mut idx: usize) -> State {
        let d = self.dims.len();
        let mut u = State::zeros(d);
        for i in 0..d {
            let k = idx % self.dims[i];
            idx /= self.dims[i];
            u[i] = self.lo[i] + self.mesh * k as f64;
        }
        u
    }

    fn index_of(&self, multi: &[i64]) -> usize {
        let mut idx = 0usize;
        for i in (0..self.dims.len()).rev() {
            idx = idx * self.dims[i] + multi[i] as usize;
        }
        idx
    }

    fn multi_of(&self, mut idx: usize) -> Vec<i64> {
        let mut m = vec![0i64; self.dims.len()];
        for i in 0..self.dims.len() {
            m[i] = (idx % self.dims[i]) as i64;
            idx /= self.dims[i];
        }
        m
    }

    fn nearest(&self, u: &State) -> Vec<i64> {
        (0..self.dims.len())
            .map(|i| {
                let k = ((u[i] - self.lo[i]) / self.mesh).round() as i64;
                k.clamp(0, self.dims[i] as i64 - 1)
            })
            .collect()
    }
}

/// Neighbor stencil: axis moves plus diagonals; in 2-d the 16-move stencil
/// (axis, diagonal, knight) to cut lattice metric anisotropy.
fn stencil(d: usize) -> Vec<Vec<i64>> {
    match d {
        1 => vec![vec![1], vec![-1]],
        2 => {
            let mut s = Vec::new();
            for &(a, b) in &[
                (1, 0),
                (0, 1),
                (1, 1),
                (1, -1),
                (2, 1),
                (2, -1),
                (1, 2),
                (-1, 2),
            ] {
                s.push(vec![a, b]);
                s.push(vec![-a, -b]);
            }
            s
        }
        _ => {
            // all nonzero offsets in {-1,0,1}^d
            let mut s = Vec::new();
            let n = 3usize.pow(d as u32);
            for code in 0..n {
                let mut c = code;
                let mut off = vec![0i64; d];
                for slot in off.iter_mut() {
                    *slot = (c % 3) as i64 - 1;
                    c /= 3;
                }
                if off.iter().any(|&x| x != 0) {
                    s.push(off);
                }
            }
            s
        }
    }
}

#[derive(PartialEq)]
struct HeapItem {
    dist: f64,
    node: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest-path upper bound of the cost on the lattice graph, edge weight
/// = mean endpoint |DE| x edge length. Converges to the continuum cost from
/// above as the mesh refines; the witness polyline is returned.
pub fn cost_grid(
    model: &EnergyModel,
    t: f64,
    u1: &State,
    u2: &State,
    grid: &GridSpec,
) -> Result<CostEstimate, CostError> {
    let d = model.dim();
    if !grid.sbox.contains(u1) || !grid.sbox.contains(u2) {
        return Err(CostError::OutsideBox);
    }
    let dims: Vec<usize> = (0..d)
        .map(|i| (((grid.sbox.hi[i] - grid.sbox.lo[i]) / grid.mesh).round() as usize + 1).max(2))
        .collect();
    let lattice = Lattice {
        dims,
        lo: grid.sbox.lo.clone(),
        mesh: grid.mesh,
    };
    let n = lattice.node_count();
    if n > GRID_NODE_CAP {
        return Err(CostError::GridTooLarge(n, GRID_NODE_CAP));
    }

    let mut weight = vec![0.0f64; n];
    for (idx, w) in weight.iter_mut().enumerate() {
        *w = model.grad_norm(t, &lattice.coords(idx));
    }

    let src = lattice.index_of(&lattice.nearest(u1));
    let dst = lattice.index_of(&lattice.nearest(u2));

    let moves = stencil(d);
    let mut dist = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(HeapItem {
        dist: 0.0,
        node: src,
    });
    while let Some(HeapItem { dist: dcur, node }) = heap.pop() {
        if dcur > dist[node] {
            continue;
        }
        if node == dst {
            break;
        }
        let multi = lattice.multi_of(node);
        for mv in &moves {
            let mut nb = multi.clone();
            let mut ok = true;
            let mut len2 = 0.0;
            for i in 0..d {
                nb[i] += mv[i];
                if nb[i] < 0 || nb[i] >= lattice.dims[i] as i64 {
                    ok = false;
                    break;
                }
                len2 += (mv[i] * mv[i]) as f64;
            }
            if !ok {
                continue;
            }
            let nidx = lattice.index_of(&nb);
            let w = 0.5 * (weight[node] + weight[nidx]) * grid.mesh * len2.sqrt();
            let nd = dcur + w;
            if nd < dist[nidx] {
                dist[nidx] = nd;
                parent[nidx] = node;
                heap.push(HeapItem {
                    dist: nd,
                    node: nidx,
                });
            }
        }
    }
    if !dist[dst].is_finite() {
        return Err(CostError::Unreachable);
    }

    let mut rev = vec![dst];
    let mut cur = dst;
    while parent[cur] != usize::MAX {
        cur = parent[cur];
        rev.push(cur);
    }
    let mut witness: Vec<State> = rev.into_iter().rev().map(|i| lattice.coords(i)).collect();
    witness.insert(0, u1.clone());
    witness.push(u2.clone());

    // resolution: 2 mesh widths x the stiffest Hessian seen along the path
    let h_max = witness
        .iter()
        .map(|u| model.hessian(t, u).norm())
        .fold(0.0f64, f64::max);
    Ok(CostEstimate {
        t,
        u1: u1.clone(),
        u2: u2.clone(),
        value: dist[dst],
        method: CostMethod::GridDijkstra,
        witness_path: witness,
        resolution: 2.0 * grid.mesh * h_max,
    })
}

/// Which oracle backs an all-pairs property check.
#[derive(Debug, Clone)]
pub enum CostOracle {
    Quadrature1d { n_quad: usize },
    GridDijkstra { grid: GridSpec },
}

impl CostOracle {
    fn eval(
        &self,
        model: &EnergyModel,
        t: f64,
        a: &State,
        b: &State,
    ) -> Result<CostEstimate, CostError> {
        match self {
            CostOracle::Quadrature1d { n_quad } => {
                cost_1d(model, t, a[0], b[0], *n_quad)
            }
            CostOracle::GridDijkstra { grid } => cost_grid(model, t, a, b, grid),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CostPropertyReport {
    pub n_points: usize,
    /// values[i][j] = c(points[i], points[j]); diagonal is 0.
    pub values: Vec<Vec<f64>>,
    pub resolution: f64,
    pub positivity_ok: bool,
    pub symmetry_ok: bool,
    pub triangle_ok: bool,
    pub lsc_ok: bool,
}

impl CostPropertyReport {
    pub fn pass(&self) -> bool {
        self.positivity_ok && self.symmetry_ok && self.triangle_ok && self.lsc_ok
    }
}

/// Evaluate all pairwise costs among critical `points` and check the metric
/// properties at oracle resolution: positivity off the diagonal, symmetry,
/// the triangle inequality through every intermediate point, and a sampled
/// lower-semicontinuity probe (endpoint perturbations shrinking to zero).
pub fn check_cost_properties(
    model: &EnergyModel,
    t: f64,
    points: &[State],
    oracle: &CostOracle,
) -> Result<CostPropertyReport, CostError> {
    let n = points.len();
    for i in 0..n {
        for j in (i + 1)..n {
            if (&points[i] - &points[j]).norm() == 0.0 {
                return Err(CostError::PointsNotDistinct);
            }
        }
    }
    let mut values = vec![vec![0.0f64; n]; n];
    let mut resolution = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let est = oracle.eval(model, t, &points[i], &points[j])?;
            values[i][j] = est.value;
            resolution = resolution.max(est.resolution);
        }
    }
    let sym_tol = match oracle {
        CostOracle::Quadrature1d { .. } => 0.0,
        CostOracle::GridDijkstra { .. } => 1e-12,
    };
    let mut positivity_ok = true;
    let mut symmetry_ok = true;
    let mut triangle_ok = true;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if values[i][j] <= resolution {
                positivity_ok = false;
            }
            if (values[i][j] - values[j][i]).abs() > sym_tol * (1.0 + values[i][j]) {
                symmetry_ok = false;
            }
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                if values[i][j] > values[i][k] + values[k][j] + resolution + 1e-12 {
                    triangle_ok = false;
                }
            }
        }
    }

    // sampled lsc: pull the endpoints toward each other by shrinking offsets;
    // the costs must converge back up to c(u_i, u_j) within the local
    // gradient bound over the excised ends
    let mut lsc_ok = true;
    let deltas = [4.0, 2.0, 1.0];
    let base = match oracle {
        CostOracle::Quadrature1d { .. } => 1e-3,
        CostOracle::GridDijkstra { grid } => grid.mesh,
    };
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let dir = (&points[j] - &points[i]).normalize();
            for &m in &deltas {
                let delta = m * base;
                let a = &points[i] + &dir * delta;
                let b = &points[j] - &dir * delta;
                let est = oracle.eval(model, t, &a, &b)?;
                let g_bound = model
                    .grad_norm(t, &a)
                    .max(model.grad_norm(t, &b))
                    .max(model.grad_norm(t, &points[i]))
                    .max(model.grad_norm(t, &points[j]));
                let slack = 2.0 * delta * g_bound.max(1.0) + resolution + 1e-12;
                if est.value < values[i][j] - slack {
                    lsc_ok = false;
                }
            }
        }
    }

    Ok(CostPropertyReport {
        n_points: n,
        values,
        resolution,
        positivity_ok,
        symmetry_ok,
        triangle_ok,
        lsc_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s1(x: f64) -> State {
        State::from_vec(vec![x])
    }

    const T_STAR: f64 = 0.38490017945975047;
    const U_STAR: f64 = -0.5773502691896258;
    const U_PLUS: f64 = 1.1547005383792515;

    #[test]
    fn zero_on_the_diagonal() {
        let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
        let est = cost_1d(&m, 0.0, 0.7, 0.7, 100).unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn fold_jump_cost_is_three_quarters() {
        let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
        let est = cost_1d(&m, T_STAR, U_STAR, U_PLUS, 2000).unwrap();
        assert!((est.value - 0.75).abs() < 1e-8, "value {}", est.value);
    }

    #[test]
    fn well_to_well_cost_splits_at_the_saddle() {
        let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
        let c_full = cost_1d(&m, 0.0, -1.0, 1.0, 2000).unwrap().value;
        let c_left = cost_1d(&m, 0.0, -1.0, 0.0, 2000).unwrap().value;
        let c_right = cost_1d(&m, 0.0, 0.0, 1.0, 2000).unwrap().value;
        assert!((c_full - 0.5).abs() < 1e-10);
        assert!((c_left - 0.25).abs() < 1e-10);
        assert!((c_right - 0.25).abs() < 1e-10);
        assert!((c_full - c_left - c_right).abs() < 1e-10);
    }

    #[test]
    fn quadrature_symmetry_is_bit_exact() {
        let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
        for (a, b) in [(-1.3, 0.9), (0.05, 2.2), (-2.0, -0.4)] {
            let ab = cost_1d(&m, 0.3, a, b, 500).unwrap().value;
            let ba = cost_1d(&m, 0.3, b, a, 500).unwrap().value;
            assert_eq!(ab.to_bits(), ba.to_bits());
        }
    }

    #[test]
    fn grid_matches_quadrature_in_1d() {
        let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
        let grid = GridSpec::new(SampleBox::centered(1, 2.5), 1e-3);
        let est = cost_grid(&m, T_STAR, &s1(U_STAR), &s1(U_PLUS), &grid).unwrap();
        let oracle = cost_1d(&m, T_STAR, U_STAR, U_PLUS, 4000).unwrap().value;
        assert!(
            (est.value - oracle).abs() <= est.resolution,
            "grid {} vs oracle {} (res {})",
            est.value,
            oracle,
            est.resolution
        );
    }

    #[test]
    fn separable_2d_grid_cost_matches_marginal() {
        let m = EnergyModel::double_well_2d(1.0, 1.0).unwrap();
        let grid = GridSpec::new(
            SampleBox::new(vec![-0.8, -0.1], vec![1.4, 0.1]),
            1e-2,
        );
        let a = State::from_vec(vec![U_STAR, 0.0]);
        let b = State::from_vec(vec![U_PLUS, 0.0]);
        let est = cost_grid(&m, T_STAR, &a, &b, &grid).unwrap();
        assert!(
            (est.value - 0.75).abs() < 0.05 * 0.75,
            "2d grid cost {}",
            est.value
        );
        // symmetric within float noise (undirected graph)
        let rev = cost_grid(&m, T_STAR, &b, &a, &grid).unwrap();
        assert!((est.value - rev.value).abs() <= 1e-12 * (1.0 + est.value));
    }

    #[test]
    fn mesh_refinement_is_monotone_within_resolution() {
        let m = EnergyModel::double_well_2d(1.0, 1.0).unwrap();
        let a = State::from_vec(vec![U_STAR, 0.0]);
        let b = State::from_vec(vec![U_PLUS, 0.0]);
        let sbox = SampleBox::new(vec![-0.8, -0.1], vec![1.4, 0.1]);
        let coarse =
            cost_grid(&m, T_STAR, &a, &b, &GridSpec::new(sbox.clone(), 2e-2)).unwrap();
        let fine = cost_grid(&m, T_STAR, &a, &b, &GridSpec::new(sbox, 1e-2)).unwrap();
        assert!(fine.value <= coarse.value + coarse.resolution);
    }

    #[test]
    fn chain_rule_lower_bound() {
        let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
        for (a, b) in [(-1.0, 1.0), (U_STAR, U_PLUS), (0.3, -1.7)] {
            let est = cost_1d(&m, 0.2, a, b, 1000).unwrap();
            let drop = m.value(0.2, &s1(a)) - m.value(0.2, &s1(b));
            assert!(est.value >= drop - est.resolution);
        }
    }

    #[test]
    fn metric_properties_on_the_three_wells() {
        let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
        let points = vec![s1(-1.0), s1(0.0), s1(1.0)];
        let rep = check_cost_properties(
            &m,
            0.0,
            &points,
            &CostOracle::Quadrature1d { n_quad: 2000 },
        )
        .unwrap();
        assert!(rep.pass(), "{rep:?}");
        assert!((rep.values[0][2] - 0.5).abs() < 1e-8);
        assert!((rep.values[0][1] + rep.values[1][2] - rep.values[0][2]).abs() < 1e-8);
        assert!(rep
            .values
            .iter()
            .enumerate()
            .all(|(i, row)| row
                .iter()
                .enumerate()
                .all(|(j, &v)| i == j || v > 0.2)));
    }

    #[test]
    fn duplicate_points_are_rejected() {
        let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
        let err = check_cost_properties(
            &m,
            0.0,
            &[s1(1.0), s1(1.0)],
            &CostOracle::Quadrature1d { n_quad: 100 },
        );
        assert!(matches!(err, Err(CostError::PointsNotDistinct)));
    }

    #[test]
    fn grid_rejects_outside_endpoints() {
        let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
        let grid = GridSpec::new(SampleBox::centered(1, 1.0), 1e-2);
        let err = cost_grid(&m, 0.0, &s1(0.0), &s1(1.5), &grid);
        assert!(matches!(err, Err(CostError::OutsideBox)));
    }
}
