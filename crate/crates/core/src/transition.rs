//! Optimal jump transitions at a frozen time: heteroclinic solutions of the
//! autonomous flow `theta' = -DE_t(theta)` between critical points, their
//! energy-dissipation cost, and parameterization utilities.
//!
//! The flow stagnates at the degenerate point a jump starts from, so the
//! solver launches from a small offset along the descent direction and
//! integrates with an adaptive Heun step under a trust-region cap. Landing
//! requires both a tiny gradient and proximity to a catalogued critical point
//! (the gradient alone is small near saddles too). A landing on a non-minimum
//! relaunches from there, producing a multi-piece admissible path with
//! breakpoints at critical points.

use crate::critical::{find_critical, sym_eigs, CriticalCatalog, CriticalKind, CriticalOpts};
use crate::energy::EnergyModel;
use crate::sample::{unit_directions, SampleBox};
use crate::State;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TransitionError {
    #[error("heteroclinic escaped the search box at t*={t_star}")]
    EscapedDomain { t_star: f64 },
    #[error("path needs at least two nodes")]
    PathTooShort,
    #[error("zero-cost path cannot be reparameterized")]
    ZeroCostPath,
}

/// A frozen-time heteroclinic path with its cost bookkeeping.
#[derive(Debug, Clone)]
pub struct JumpTransition {
    pub t_star: f64,
    pub u_minus: State,
    pub u_plus: State,
    /// Polyline nodes; first is `u_minus`, last is `u_plus` when converged.
    pub path: Vec<State>,
    /// Node parameters in [0, 1] (normalized cumulative arclength).
    pub s: Vec<f64>,
    pub cost: f64,
    pub arclength: f64,
    pub converged: bool,
    pub landing_grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct HeteroclinicOpts {
    /// Gradient norm below which landing is considered.
    pub landing_tol: f64,
    /// Landing also requires this proximity to a catalogued critical point.
    pub capture_radius: f64,
    /// Local error tolerance of the adaptive Heun step.
    pub step_tol: f64,
    /// Trust-region cap on the state move per step (absolute).
    pub trust_radius: f64,
    pub max_pseudo_time: f64,
    pub max_steps: usize,
    /// Max relaunches through intermediate critical points.
    pub max_pieces: usize,
    pub domain: SampleBox,
    pub catalog_starts: usize,
    pub newton_tol: f64,
    pub degeneracy_tol: f64,
}

impl HeteroclinicOpts {
    pub fn new(domain: SampleBox) -> Self {
        let diam = domain.diameter();
        HeteroclinicOpts {
            landing_tol: 1e-9,
            capture_radius: 1e-3,
            step_tol: 1e-9,
            trust_radius: 0.002 * diam,
            max_pseudo_time: 1e6,
            max_steps: 400_000,
            max_pieces: 8,
            domain,
            catalog_starts: 64,
            newton_tol: 1e-10,
            degeneracy_tol: 1e-7,
        }
    }

    /// Launch offset used when none is given: 1e-4 of the box diameter.
    pub fn default_delta(&self) -> f64 {
        1e-4 * self.domain.diameter()
    }
}

/// Trapezoid quadrature of the dissipation integral over the polyline; it
/// depends on node positions only, never on the node parameters.
pub fn transition_cost(path: &[State], model: &EnergyModel, t_star: f64) -> f64 {
    assert!(path.len() >= 2, "path needs at least two nodes");
    let mut acc = 0.0;
    let mut g_prev = model.grad_norm(t_star, &path[0]);
    for k in 1..path.len() {
        let g = model.grad_norm(t_star, &path[k]);
        acc += 0.5 * (g_prev + g) * (&path[k] - &path[k - 1]).norm();
        g_prev = g;
    }
    acc
}

pub fn path_arclength(path: &[State]) -> f64 {
    path.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum()
}

/// Max over segments of the chain-rule defect
/// |E(b) - E(a) - <DE(mid), b - a>|, relative to the mean segment cost.
/// Refining the nodes drives this to zero at second order.
pub fn chain_rule_residual(path: &[State], model: &EnergyModel, t_star: f64) -> f64 {
    assert!(path.len() >= 2, "path needs at least two nodes");
    let n_seg = (path.len() - 1) as f64;
    let scale = transition_cost(path, model, t_star) / n_seg;
    if scale <= 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for w in path.windows(2) {
        let mid = (&w[0] + &w[1]) * 0.5;
        let de = model.value(t_star, &w[1]) - model.value(t_star, &w[0]);
        let lin = model.gradient(t_star, &mid).dot(&(&w[1] - &w[0]));
        worst = worst.max((de - lin).abs());
    }
    worst / scale
}

/// Reparameterize a path to constant dissipation speed.
///
/// For paths with interior nodes the geometry is kept and only the node
/// parameters move: `s_i` becomes the cumulative-cost fraction, which makes
/// the cumulative dissipation integral exactly affine in `s` and leaves
/// `transition_cost` bit-identical. A bare two-node path first gets interior
/// nodes inserted uniformly in the cumulative-cost measure of its segment.
pub fn reparameterize_unit(
    path: &[State],
    model: &EnergyModel,
    t_star: f64,
) -> Result<(Vec<State>, Vec<f64>), TransitionError> {
    if path.len() < 2 {
        return Err(TransitionError::PathTooShort);
    }
    let nodes: Vec<State> = if path.len() == 2 {
        // resolve the segment finely, then place nodes at equal cost
        let n_fine = 4096;
        let a = &path[0];
        let d = &path[1] - a;
        let seg_len = d.norm();
        if seg_len == 0.0 {
            return Err(TransitionError::ZeroCostPath);
        }
        let mut cum = vec![0.0f64; n_fine + 1];
        let mut g_prev = model.grad_norm(t_star, a);
        for k in 1..=n_fine {
            let p = a + &d * (k as f64 / n_fine as f64);
            let g = model.grad_norm(t_star, &p);
            cum[k] = cum[k - 1] + 0.5 * (g_prev + g) * seg_len / n_fine as f64;
            g_prev = g;
        }
        let total = cum[n_fine];
        if total <= 0.0 {
            return Err(TransitionError::ZeroCostPath);
        }
        let n_out = 33;
        let mut out = Vec::with_capacity(n_out);
        let mut k = 0usize;
        for j in 0..n_out {
            let target = total * j as f64 / (n_out - 1) as f64;
            while k + 1 < cum.len() && cum[k + 1] < target {
                k += 1;
            }
            let frac = if k + 1 < cum.len() && cum[k + 1] > cum[k] {
                (k as f64 + (target - cum[k]) / (cum[k + 1] - cum[k])) / n_fine as f64
            } else {
                k as f64 / n_fine as f64
            };
            out.push(a + &d * frac.min(1.0));
        }
        out
    } else {
        path.to_vec()
    };

    // cumulative trapezoid cost at the nodes
    let mut cum = vec![0.0f64; nodes.len()];
    let mut g_prev = model.grad_norm(t_star, &nodes[0]);
    for k in 1..nodes.len() {
        let g = model.grad_norm(t_star, &nodes[k]);
        cum[k] = cum[k - 1] + 0.5 * (g_prev + g) * (&nodes[k] - &nodes[k - 1]).norm();
        g_prev = g;
    }
    let total = cum[nodes.len() - 1];
    if total <= 0.0 {
        return Err(TransitionError::ZeroCostPath);
    }
    let s: Vec<f64> = cum.iter().map(|c| c / total).collect();
    Ok((nodes, s))
}

struct PieceResult {
    nodes: Vec<State>,
    landed: Option<usize>, // catalog index
    landing_grad: f64,
}

/// Integrate one gradient-flow piece from `start` until capture or timeout.
fn flow_piece(
    model: &EnergyModel,
    t_star: f64,
    start: &State,
    catalog: &CriticalCatalog,
    opts: &HeteroclinicOpts,
) -> Result<PieceResult, TransitionError> {
    let mut theta = start.clone();
    let mut nodes = vec![theta.clone()];
    let mut sigma = 0.0;
    let mut h = 1e-3;
    let mut landing_grad = model.grad_norm(t_star, &theta);
    for _ in 0..opts.max_steps {
        if sigma > opts.max_pseudo_time {
            return Ok(PieceResult {
                nodes,
                landed: None,
                landing_grad,
            });
        }
        let k1 = -model.gradient(t_star, &theta);
        // Heun with embedded Euler error estimate
        let mut accepted = false;
        for _ in 0..60 {
            let euler = &theta + &k1 * h;
            let k2 = -model.gradient(t_star, &euler);
            let heun = &theta + (&k1 + &k2) * (0.5 * h);
            let err = (&heun - &euler).norm();
            let move_len = (&heun - &theta).norm();
            if err <= opts.step_tol && move_len <= opts.trust_radius {
                sigma += h;
                theta = heun;
                accepted = true;
                let grow = if err > 0.0 {
                    (0.9 * (opts.step_tol / err).sqrt()).clamp(1.0, 5.0)
                } else {
                    5.0
                };
                h *= grow;
                break;
            }
            h *= 0.5;
        }
        if !accepted {
            return Ok(PieceResult {
                nodes,
                landed: None,
                landing_grad,
            });
        }
        nodes.push(theta.clone());
        if !opts.domain.contains(&theta) {
            return Err(TransitionError::EscapedDomain { t_star });
        }
        landing_grad = model.grad_norm(t_star, &theta);
        if landing_grad <= opts.landing_tol {
            let nearest = (0..catalog.points.len()).min_by(|&a, &b| {
                let da = (&catalog.points[a].u - &theta).norm();
                let db = (&catalog.points[b].u - &theta).norm();
                da.partial_cmp(&db).unwrap()
            });
            if let Some(i) = nearest {
                if (&catalog.points[i].u - &theta).norm() <= opts.capture_radius {
                    return Ok(PieceResult {
                        nodes,
                        landed: Some(i),
                        landing_grad,
                    });
                }
            }
        }
    }
    Ok(PieceResult {
        nodes,
        landed: None,
        landing_grad,
    })
}

/// Solve the frozen-time heteroclinic from `u_from` along `direction`.
///
/// `converged = false` means the probe fell back to its start or ran out of
/// pseudo-time; escaping the search box is an error (the energy is then not
/// coercive on the box and no landing exists inside it).
pub fn solve_heteroclinic(
    model: &EnergyModel,
    t_star: f64,
    u_from: &State,
    direction: &State,
    delta: f64,
    opts: &HeteroclinicOpts,
) -> Result<JumpTransition, TransitionError> {
    assert!(delta > 0.0, "launch offset must be positive");
    let copts = CriticalOpts {
        newton_tol: opts.newton_tol,
        degeneracy_tol: opts.degeneracy_tol,
        ..Default::default()
    };
    let catalog = find_critical(model, t_star, &opts.domain, opts.catalog_starts, &copts);
    let dir_unit = {
        let n = direction.norm();
        assert!(n > 0.0, "direction must be nonzero");
        direction / n
    };

    let mut path: Vec<State> = vec![u_from.clone()];
    let mut launch = u_from + &dir_unit * delta;
    let mut converged = false;
    let mut landing_grad = f64::NAN;
    let mut u_plus = u_from.clone();

    'pieces: for piece in 0..opts.max_pieces {
        path.push(launch.clone());
        let res = flow_piece(model, t_star, &launch, &catalog, opts)?;
        path.extend(res.nodes.into_iter().skip(1));
        landing_grad = res.landing_grad;
        match res.landed {
            None => {
                u_plus = path.last().unwrap().clone();
                break 'pieces;
            }
            Some(i) => {
                let p = &catalog.points[i];
                // snap to the polished catalog point
                path.push(p.u.clone());
                if (&p.u - u_from).norm() <= opts.capture_radius {
                    // fell back to the start: no transition this way
                    u_plus = p.u.clone();
                    converged = false;
                    break 'pieces;
                }
                if p.kind == CriticalKind::NondegenerateMin {
                    u_plus = p.u.clone();
                    converged = true;
                    break 'pieces;
                }
                // landed on a saddle or degenerate point: relaunch along its
                // softest direction, keeping the sense of motion
                if piece + 1 == opts.max_pieces {
                    u_plus = p.u.clone();
                    converged = false;
                    break 'pieces;
                }
                let (_eigs, vecs) = sym_eigs(&model.hessian(t_star, &p.u));
                let mut v: State = vecs.column(0).into_owned();
                let motion = &p.u - &path[path.len() - 2];
                if motion.norm() > 0.0 && v.dot(&motion) < 0.0 {
                    v = -v;
                }
                launch = &p.u + &v * delta;
                landing_grad = model.grad_norm(t_star, &launch);
            }
        }
    }

    let arclength = path_arclength(&path);
    let cost = transition_cost(&path, model, t_star);
    let s = if arclength > 0.0 {
        let mut cum = 0.0;
        let mut out = vec![0.0];
        for w in path.windows(2) {
            cum += (&w[1] - &w[0]).norm();
            out.push(cum / arclength);
        }
        out
    } else {
        (0..path.len())
            .map(|k| k as f64 / (path.len() - 1).max(1) as f64)
            .collect()
    };
    Ok(JumpTransition {
        t_star,
        u_minus: u_from.clone(),
        u_plus,
        path,
        s,
        cost,
        arclength,
        converged,
        landing_grad_norm: landing_grad,
    })
}

fn point_segment_dist(p: &State, a: &State, b: &State) -> f64 {
    let ab = b - a;
    let denom = ab.norm_squared();
    if denom == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / denom).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

fn hausdorff(a: &[State], b: &[State]) -> f64 {
    let side = |x: &[State], y: &[State]| {
        x.iter()
            .map(|p| {
                y.windows(2)
                    .map(|w| point_segment_dist(p, &w[0], &w[1]))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0f64, f64::max)
    };
    side(a, b).max(side(b, a))
}

fn subsample(path: &[State], max_nodes: usize) -> Vec<State> {
    if path.len() <= max_nodes {
        return path.to_vec();
    }
    let stride = path.len().div_ceil(max_nodes);
    let mut out: Vec<State> = path.iter().step_by(stride).cloned().collect();
    if out.last() != path.last() {
        out.push(path.last().unwrap().clone());
    }
    out
}

/// Probe heteroclinics along `n_probe_dirs` launch directions from `u_minus`
/// and count the path clusters that land at `u_plus`. A finite count comes
/// for free; this is a numerical witness, not a proof, that only finitely
/// many optimal transitions exist.
pub fn count_transitions(
    model: &EnergyModel,
    t_star: f64,
    u_minus: &State,
    u_plus: &State,
    n_probe_dirs: usize,
    opts: &HeteroclinicOpts,
) -> usize {
    let delta = opts.default_delta();
    let cluster_tol = 10.0 * opts.capture_radius;
    let mut landed_paths: Vec<Vec<State>> = Vec::new();
    for dir in unit_directions(model.dim(), n_probe_dirs) {
        let tr = match solve_heteroclinic(model, t_star, u_minus, &dir, delta, opts) {
            Ok(tr) => tr,
            Err(_) => continue,
        };
        if tr.converged && (&tr.u_plus - u_plus).norm() <= opts.capture_radius {
            landed_paths.push(subsample(&tr.path, 200));
        }
    }
    let mut clusters: Vec<Vec<State>> = Vec::new();
    for p in landed_paths {
        if !clusters.iter().any(|c| hausdorff(c, &p) <= cluster_tol) {
            clusters.push(p);
        }
    }
    clusters.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::EnergyModel;

    fn s1(x: f64) -> State {
        State::from_vec(vec![x])
    }

    const T_STAR: f64 = 0.38490017945975047;
    const U_STAR: f64 = -0.5773502691896258;
    const U_PLUS: f64 = 1.1547005383792515; // 2 / sqrt 3

    fn opts_1d() -> HeteroclinicOpts {
        HeteroclinicOpts::new(SampleBox::centered(1, 2.5))
    }

    #[test]
    fn fold_jump_lands_on_the_far_well() {
        let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
        let tr = solve_heteroclinic(&m, T_STAR, &s1(U_STAR), &s1(1.0), 1e-4, &opts_1d())
            .unwrap();
        assert!(tr.converged);
        assert!((tr.u_plus[0] - U_PLUS).abs() < 1e-4, "u+ = {}", tr.u_plus[0]);
        assert!((tr.cost - 0.75).abs() < 1e-4, "cost = {}", tr.cost);
        let drop = m.value(T_STAR, &tr.u_minus) - m.value(T_STAR, &tr.u_plus);
        assert!((tr.cost - drop).abs() < 1e-4);
        assert!(tr.landing_grad_norm <= 1e-9);
        assert!(tr.arclength.is_finite());
        // descent along the path
        let mut prev = f64::INFINITY;
        for p in &tr.path {
            let e = m.value(T_STAR, p);
            assert!(e <= prev + 1e-8);
            prev = e;
        }
    }

    #[test]
    fn reverse_probe_falls_back() {
        let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
        let tr = solve_heteroclinic(&m, T_STAR, &s1(U_STAR), &s1(-1.0), 1e-4, &opts_1d())
            .unwrap();
        assert!(!tr.converged);
        assert!((tr.u_plus[0] - U_STAR).abs() < 1e-3);
    }

    #[test]
    fn no_transition_from_a_strict_minimum() {
        let m = EnergyModel::quadratic_track(s1(0.0), s1(1.0), 1.0).unwrap();
        let opts = HeteroclinicOpts::new(SampleBox::centered(1, 3.0));
        let tr = solve_heteroclinic(&m, 0.4, &s1(0.4), &s1(1.0), 1e-4, &opts).unwrap();
        assert!(!tr.converged);
    }

    #[test]
    fn separable_2d_jump_costs_the_marginal() {
        let m = EnergyModel::double_well_2d(1.0, 1.0).unwrap();
        let opts = HeteroclinicOpts::new(SampleBox::centered(2, 2.5));
        let fold = State::from_vec(vec![U_STAR, 0.0]);
        let dir = State::from_vec(vec![1.0, 0.0]);
        let tr = solve_heteroclinic(&m, T_STAR, &fold, &dir, 1e-4, &opts).unwrap();
        assert!(tr.converged);
        assert!((tr.u_plus[0] - U_PLUS).abs() < 1e-4);
        assert!(tr.u_plus[1].abs() < 1e-6);
        assert!((tr.cost - 0.75).abs() < 1e-4);
    }

    #[test]
    fn constant_and_straight_path_costs() {
        let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
        let c = transition_cost(&[s1(0.3), s1(0.3)], &m, T_STAR);
        assert_eq!(c, 0.0);
        let n = 2000;
        let path: Vec<State> = (0..=n)
            .map(|k| s1(U_STAR + (U_PLUS - U_STAR) * k as f64 / n as f64))
            .collect();
        let c = transition_cost(&path, &m, T_STAR);
        assert!((c - 0.75).abs() < 1e-5, "straight-line cost {c}");
    }

    #[test]
    fn chain_rule_residual_refines_quadratically() {
        let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
        assert_eq!(chain_rule_residual(&[s1(0.1), s1(0.1)], &m, 0.0), 0.0);
        let mk = |n: usize| -> Vec<State> {
            (0..=n)
                .map(|k| s1(U_STAR + (U_PLUS - U_STAR) * k as f64 / n as f64))
                .collect()
        };
        let r1 = chain_rule_residual(&mk(8), &m, T_STAR);
        let r2 = chain_rule_residual(&mk(16), &m, T_STAR);
        let r3 = chain_rule_residual(&mk(32), &m, T_STAR);
        assert!(r1 > 0.0);
        assert!(r2 < r1 / 2.5, "r1={r1}, r2={r2}");
        assert!(r3 < r2 / 2.5, "r2={r2}, r3={r3}");
    }

    #[test]
    fn reparameterization_preserves_cost_and_is_affine() {
        let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
        let tr = solve_heteroclinic(&m, T_STAR, &s1(U_STAR), &s1(1.0), 1e-4, &opts_1d())
            .unwrap();
        let before = transition_cost(&tr.path, &m, T_STAR);
        let (nodes, s) = reparameterize_unit(&tr.path, &m, T_STAR).unwrap();
        let after = transition_cost(&nodes, &m, T_STAR);
        assert!((before - after).abs() <= 1e-12 * before.max(1.0));
        assert_eq!(nodes.first().unwrap(), tr.path.first().unwrap());
        assert_eq!(nodes.last().unwrap(), tr.path.last().unwrap());
        // cumulative cost is affine in the new parameter
        let mut cum = 0.0;
        let mut g_prev = m.grad_norm(T_STAR, &nodes[0]);
        for k in 1..nodes.len() {
            let g = m.grad_norm(T_STAR, &nodes[k]);
            cum += 0.5 * (g_prev + g) * (&nodes[k] - &nodes[k - 1]).norm();
            g_prev = g;
            assert!((cum / after - s[k]).abs() < 1e-12);
        }
        // the heteroclinic is exponentially slow near its ends, so the
        // parameter must be visibly redistributed against arclength
        let mid_idx = nodes.len() / 2;
        assert!(s[mid_idx] > 0.0 && s[mid_idx] < 1.0);
    }

    #[test]
    fn two_node_path_gets_cost_uniform_nodes() {
        let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
        let (nodes, s) =
            reparameterize_unit(&[s1(U_STAR), s1(U_PLUS)], &m, T_STAR).unwrap();
        assert!(nodes.len() > 2);
        // each node should sit at its share of the cumulative cost
        let total = transition_cost(&nodes, &m, T_STAR);
        let mut cum = 0.0;
        let mut g_prev = m.grad_norm(T_STAR, &nodes[0]);
        for k in 1..nodes.len() {
            let g = m.grad_norm(T_STAR, &nodes[k]);
            cum += 0.5 * (g_prev + g) * (&nodes[k] - &nodes[k - 1]).norm();
            g_prev = g;
            assert!((cum / total - s[k]).abs() < 2e-3, "node {k}");
        }
        let err = reparameterize_unit(&[s1(0.2), s1(0.2)], &m, T_STAR);
        assert!(matches!(err, Err(TransitionError::ZeroCostPath)));
    }

    #[test]
    fn transition_counts() {
        let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
        let n = count_transitions(&m, T_STAR, &s1(U_STAR), &s1(U_PLUS), 2, &opts_1d());
        assert_eq!(n, 1);

        let q = EnergyModel::quadratic_track(s1(0.0), s1(1.0), 1.0).unwrap();
        let qopts = HeteroclinicOpts::new(SampleBox::centered(1, 3.0));
        let n = count_transitions(&q, 0.4, &s1(0.4), &s1(0.4), 2, &qopts);
        assert_eq!(n, 0);
    }

    #[test]
    fn pass_through_degenerate_point_concatenates() {
        // E' = u (u-1)^2 (u-2): flow from 0+ crawls through the degenerate
        // point at 1 and must relaunch to reach the minimum at 2
        let m = EnergyModel::polynomial(
            "double_plateau",
            1,
            vec![
                (vec![5], 0.2),
                (vec![4], -1.0),
                (vec![3], 5.0 / 3.0),
                (vec![2], -1.0),
            ],
            None,
            1.0,
        )
        .unwrap();
        let opts = HeteroclinicOpts::new(SampleBox::new(vec![-1.0], vec![3.0]));
        let tr = solve_heteroclinic(&m, 0.5, &s1(0.0), &s1(1.0), 5e-4, &opts).unwrap();
        assert!(tr.converged, "grad at end {}", tr.landing_grad_norm);
        assert!((tr.u_plus[0] - 2.0).abs() < 1e-6);
        // breakpoint at the intermediate critical point
        assert!(tr
            .path
            .iter()
            .any(|p| (p[0] - 1.0).abs() < 1e-6));
        let drop = m.value(0.5, &s1(0.0)) - m.value(0.5, &s1(2.0));
        assert!((drop - 4.0 / 15.0).abs() < 1e-12);
        assert!((tr.cost - drop).abs() < 1e-3, "cost {}", tr.cost);
    }

    #[test]
    fn escape_is_an_error() {
        // inverted parabola: downhill to infinity
        let m = EnergyModel::polynomial("hilltop", 1, vec![(vec![2], -0.5)], None, 1.0)
            .unwrap();
        let opts = HeteroclinicOpts::new(SampleBox::centered(1, 2.0));
        let err = solve_heteroclinic(&m, 0.5, &s1(0.0), &s1(1.0), 1e-3, &opts);
        assert!(matches!(err, Err(TransitionError::EscapedDomain { .. })));
    }
}
