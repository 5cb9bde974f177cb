//! Critical points of E_t and their continuation in time.
//!
//! `find_critical` harvests deduplicated Newton limits from low-discrepancy
//! multistarts; `continue_branch` follows a branch of critical points with a
//! pseudo-arclength predictor-corrector (parameterizing by t fails exactly at
//! folds, which are the interesting points); fold locations are refined by
//! bisection on the smallest Hessian eigenvalue. Transversality and
//! Lojasiewicz diagnostics quantify how generic a detected fold is.

use crate::energy::EnergyModel;
use crate::sample::{unit_directions, Halton, SampleBox};
use crate::{Matrix, State};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CriticalError {
    #[error("point is not degenerate at tolerance {tol} (min |eig| = {min_abs_eig})")]
    NotDegenerate { min_abs_eig: f64, tol: f64 },
    #[error("continuation corrector diverged near t={t}")]
    CorrectorDiverged { t: f64 },
    #[error("continuation exceeded {0} steps")]
    MaxSteps(usize),
    #[error("all samples fell below the energy noise floor")]
    BelowNoise,
    #[error("fold refinement failed to bracket a sign change")]
    FoldBracketLost,
}

/// Classification of a critical point by its Hessian spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticalKind {
    NondegenerateMin,
    /// Nondegenerate with at least one negative eigenvalue (includes maxima).
    Saddle,
    Degenerate,
}

impl std::fmt::Display for CriticalKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CriticalKind::NondegenerateMin => "nondegenerate_min",
            CriticalKind::Saddle => "saddle",
            CriticalKind::Degenerate => "degenerate",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct CriticalPoint {
    pub t: f64,
    pub u: State,
    pub grad_norm: f64,
    /// Hessian eigenvalues, ascending.
    pub hess_eigs: Vec<f64>,
    pub kind: CriticalKind,
}

#[derive(Debug, Clone)]
pub struct CriticalCatalog {
    pub points: Vec<CriticalPoint>,
    /// Minimal pairwise distance between catalogued points: a sampled witness
    /// of the isolated-critical-point assumption. Infinite when < 2 points.
    pub min_pairwise_gap: f64,
}

#[derive(Debug, Clone)]
pub enum BranchTermination {
    Fold { t_star: f64, u_star: State },
    ReachedTimeBoundary,
    LeftDomain,
}

#[derive(Debug, Clone)]
pub struct CriticalBranch {
    /// Samples ordered by arclength; `t` is monotone up to the termination.
    pub samples: Vec<CriticalPoint>,
    pub termination: BranchTermination,
    /// Filled by catalog-level passes; infinite when unknown.
    pub min_gap_to_other_branches: f64,
}

impl CriticalBranch {
    pub fn t_first(&self) -> f64 {
        self.samples.first().unwrap().t
    }

    pub fn t_last(&self) -> f64 {
        self.samples.last().unwrap().t
    }
}

#[derive(Debug, Clone)]
pub struct CriticalOpts {
    pub newton_tol: f64,
    pub merge_tol: f64,
    pub degeneracy_tol: f64,
    pub max_iters: usize,
}

impl Default for CriticalOpts {
    fn default() -> Self {
        CriticalOpts {
            newton_tol: 1e-10,
            merge_tol: 1e-6,
            degeneracy_tol: 1e-7,
            max_iters: 120,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ContinuationOpts {
    pub arc_step: f64,
    pub newton_tol: f64,
    pub degeneracy_tol: f64,
    pub fold_time_tol: f64,
    pub max_steps: usize,
    /// Guard box for the state; leaving it terminates the branch.
    pub domain: SampleBox,
}

impl ContinuationOpts {
    pub fn new(dim: usize) -> Self {
        ContinuationOpts {
            arc_step: 1e-2,
            newton_tol: 1e-10,
            degeneracy_tol: 1e-7,
            fold_time_tol: 1e-8,
            max_steps: 200_000,
            domain: SampleBox::centered(dim, 1e3),
        }
    }
}

/// Sorted eigen-decomposition of the symmetrized matrix.
pub fn sym_eigs(h: &Matrix) -> (Vec<f64>, Matrix) {
    let hs = (h + h.transpose()) * 0.5;
    let eig = hs.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = Matrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vecs.set_column(col, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

fn classify(eigs: &[f64], degeneracy_tol: f64) -> CriticalKind {
    let min_abs = eigs.iter().fold(f64::INFINITY, |m, &l| m.min(l.abs()));
    if min_abs <= degeneracy_tol {
        CriticalKind::Degenerate
    } else if eigs.iter().all(|&l| l > 0.0) {
        CriticalKind::NondegenerateMin
    } else {
        CriticalKind::Saddle
    }
}

/// Build a `CriticalPoint` record at (t, u), evaluating the spectrum.
pub fn critical_point_at(
    model: &EnergyModel,
    t: f64,
    u: &State,
    degeneracy_tol: f64,
) -> CriticalPoint {
    let (eigs, _) = sym_eigs(&model.hessian(t, u));
    CriticalPoint {
        t,
        u: u.clone(),
        grad_norm: model.grad_norm(t, u),
        kind: classify(&eigs, degeneracy_tol),
        hess_eigs: eigs,
    }
}

/// Damped Newton for DE_t(u) = 0 from one start. Keeps polishing while the
/// gradient still shrinks so that degenerate (double-root) limits collapse
/// well below the merge tolerance.
fn newton_critical(
    model: &EnergyModel,
    t: f64,
    start: &State,
    step_cap: f64,
    opts: &CriticalOpts,
) -> Option<State> {
    let dim = model.dim();
    let mut u = start.clone();
    let mut g = model.gradient(t, &u);
    let mut gn = g.norm();
    let mut reached = false;
    for _ in 0..opts.max_iters {
        if !gn.is_finite() {
            return None;
        }
        if gn <= opts.newton_tol {
            reached = true;
        }
        let h = model.hessian(t, &u);
        let mut delta = if dim == 1 {
            let j = h[(0, 0)];
            if j.abs() < 1e-14 * (1.0 + gn) {
                None
            } else {
                Some(State::from_element(1, -g[0] / j))
            }
        } else {
            h.lu().solve(&(-&g))
        }
        .unwrap_or_else(|| -&g * (1.0 / (1.0 + gn)));
        let dn = delta.norm();
        if dn > step_cap {
            delta *= step_cap / dn;
        }
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = &u + &delta * lambda;
            let cg = model.gradient(t, &cand);
            let cn = cg.norm();
            if cn < gn {
                u = cand;
                g = cg;
                gn = cn;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break; // stagnated; keep best iterate
        }
    }
    if gn <= opts.newton_tol || reached {
        Some(u)
    } else {
        None
    }
}

/// Newton-polish a near-critical guess at fixed time. `None` when the
/// iteration cannot reach the gradient tolerance from this guess.
pub fn polish_critical(
    model: &EnergyModel,
    t: f64,
    guess: &State,
    opts: &CriticalOpts,
) -> Option<State> {
    newton_critical(model, t, guess, f64::INFINITY, opts)
}

/// Deduplicated Newton limits from `n_starts` quasi-random starts in the box.
///
/// An empty catalog is not an error: it only means no start converged.
pub fn find_critical(
    model: &EnergyModel,
    t: f64,
    sbox: &SampleBox,
    n_starts: usize,
    opts: &CriticalOpts,
) -> CriticalCatalog {
    assert!(n_starts >= 1);
    let mut halton = Halton::new(model.dim(), 0);
    let step_cap = 0.5 * sbox.diameter();
    let margin = 10.0 * opts.merge_tol;
    let mut found: Vec<State> = Vec::new();
    for k in 0..n_starts {
        let start = if k == 0 {
            sbox.map_unit(&vec![0.5; model.dim()])
        } else {
            halton.next_in(sbox)
        };
        if let Some(u) = newton_critical(model, t, &start, step_cap, opts) {
            let inside = (0..model.dim())
                .all(|i| u[i] >= sbox.lo[i] - margin && u[i] <= sbox.hi[i] + margin);
            if inside && !found.iter().any(|v| (v - &u).norm() <= opts.merge_tol) {
                found.push(u);
            }
        }
    }
    found.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .find_map(|(x, y)| {
                let c = x.partial_cmp(y).unwrap();
                (c != std::cmp::Ordering::Equal).then_some(c)
            })
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut gap = f64::INFINITY;
    for i in 0..found.len() {
        for j in (i + 1)..found.len() {
            gap = gap.min((&found[i] - &found[j]).norm());
        }
    }
    let points = found
        .iter()
        .map(|u| critical_point_at(model, t, u, opts.degeneracy_tol))
        .collect();
    CriticalCatalog {
        points,
        min_pairwise_gap: gap,
    }
}

/// d/dt DE_t(u) by central difference (the energies are C^1 in t; builtins
/// are analytic, so 1e-6 T is well inside the stable range).
fn grad_time_slope(model: &EnergyModel, t: f64, u: &State) -> State {
    let h = 1e-6 * model.horizon();
    (model.gradient(t + h, u) - model.gradient(t - h, u)) / (2.0 * h)
}

/// Augmented point for continuation: z = (u, t).
#[derive(Clone)]
struct AugPoint {
    u: State,
    t: f64,
}

fn bordered_solve(
    model: &EnergyModel,
    z: &AugPoint,
    row: &[f64],
    rhs_g: &State,
    rhs_last: f64,
) -> Option<State> {
    let d = model.dim();
    let h = model.hessian(z.t, &z.u);
    let gt = grad_time_slope(model, z.t, &z.u);
    let mut j = Matrix::zeros(d + 1, d + 1);
    for i in 0..d {
        for k in 0..d {
            j[(i, k)] = h[(i, k)];
        }
        j[(i, d)] = gt[i];
    }
    for k in 0..=d {
        j[(d, k)] = row[k];
    }
    let mut rhs = State::zeros(d + 1);
    for i in 0..d {
        rhs[i] = rhs_g[i];
    }
    rhs[d] = rhs_last;
    j.lu().solve(&rhs)
}

/// Unit tangent of the critical curve at `z`, oriented along `orient_row`.
fn tangent_at(model: &EnergyModel, z: &AugPoint, orient_row: &[f64]) -> Option<State> {
    let d = model.dim();
    let sol = bordered_solve(model, z, orient_row, &State::zeros(d), 1.0)?;
    let n = sol.norm();
    if n < 1e-14 {
        return None;
    }
    Some(sol / n)
}

/// Corrector: Newton on [DE = 0; tau . (z - z_ref) = c] around the predictor.
fn correct(
    model: &EnergyModel,
    guess: &AugPoint,
    tau: &State,
    z_ref: &AugPoint,
    newton_tol: f64,
) -> Option<AugPoint> {
    let d = model.dim();
    let mut z = guess.clone();
    for _ in 0..40 {
        let g = model.gradient(z.t, &z.u);
        let mut cons = -tau[d] * (z.t - z_ref.t);
        for i in 0..d {
            cons -= tau[i] * (z.u[i] - z_ref.u[i]);
        }
        if g.norm() <= newton_tol && cons.abs() <= 1e-12 * (1.0 + z.t.abs()) {
            return Some(z);
        }
        let delta = bordered_solve(model, &z, tau.as_slice(), &(-&g), cons)?;
        if delta.iter().any(|x| !x.is_finite()) {
            return None;
        }
        for i in 0..d {
            z.u[i] += delta[i];
        }
        z.t += delta[d];
    }
    let g = model.grad_norm(z.t, &z.u);
    if g <= newton_tol {
        Some(z)
    } else {
        None
    }
}

fn min_eig(model: &EnergyModel, z: &AugPoint) -> f64 {
    let (eigs, _) = sym_eigs(&model.hessian(z.t, &z.u));
    eigs.iter().copied().fold(f64::INFINITY, |m, l| {
        if l.abs() < m.abs() {
            l
        } else {
            m
        }
    })
}

/// Newton in u at fixed t (used to pin branch endpoints on the boundary).
fn solve_at_fixed_time(
    model: &EnergyModel,
    t: f64,
    start: &State,
    opts: &CriticalOpts,
) -> Option<State> {
    newton_critical(model, t, start, f64::INFINITY, opts)
}

/// Pseudo-arclength continuation of a critical branch from `start`.
///
/// `direction` (+1/-1) orients the initial tangent in time. The branch stops
/// at the time boundary, on leaving the domain box, or at a fold, which is
/// then refined by bisection on the smallest Hessian eigenvalue until
/// `|lambda_min| <= degeneracy_tol` and the bracket in t is below
/// `fold_time_tol`.
pub fn continue_branch(
    model: &EnergyModel,
    start: &CriticalPoint,
    direction: f64,
    opts: &ContinuationOpts,
) -> Result<CriticalBranch, CriticalError> {
    let d = model.dim();
    let copts = CriticalOpts {
        newton_tol: opts.newton_tol,
        degeneracy_tol: opts.degeneracy_tol,
        ..Default::default()
    };
    let horizon = model.horizon();
    let mut z = AugPoint {
        u: start.u.clone(),
        t: start.t,
    };
    // orient the first tangent by the sign of its time component
    let mut tsel = vec![0.0; d + 1];
    tsel[d] = 1.0;
    let mut tau =
        tangent_at(model, &z, &tsel).ok_or(CriticalError::CorrectorDiverged { t: z.t })?;
    if tau[d] * direction < 0.0 {
        tau = -tau;
    }

    let mut samples = vec![critical_point_at(model, z.t, &z.u, opts.degeneracy_tol)];
    let mut lam = min_eig(model, &z);
    let mut h = opts.arc_step;
    let h_floor = 1e-3 * opts.arc_step;

    for _ in 0..opts.max_steps {
        let pred = AugPoint {
            u: &z.u + State::from_iterator(d, (0..d).map(|i| h * tau[i])),
            t: z.t + h * tau[d],
        };
        let corrected = correct(model, &pred, &tau, &pred, opts.newton_tol);
        let z_new = match corrected {
            Some(zc) => zc,
            None => {
                h *= 0.5;
                if h < h_floor {
                    return Err(CriticalError::CorrectorDiverged { t: z.t });
                }
                continue;
            }
        };
        let lam_new = min_eig(model, &z_new);

        // fold: smallest eigenvalue changed sign along the step
        if lam.signum() != lam_new.signum() && lam.abs() > 0.0 {
            let fold =
                refine_fold(model, &z, &z_new, &tau, lam, opts)?;
            let fp = critical_point_at(model, fold.t, &fold.u, opts.degeneracy_tol);
            samples.push(fp);
            return Ok(CriticalBranch {
                samples,
                termination: BranchTermination::Fold {
                    t_star: fold.t,
                    u_star: fold.u,
                },
                min_gap_to_other_branches: f64::INFINITY,
            });
        }

        // time boundary: land exactly on it
        if z_new.t > horizon || z_new.t < 0.0 {
            let t_edge = if z_new.t > horizon { horizon } else { 0.0 };
            if let Some(u_edge) = solve_at_fixed_time(model, t_edge, &z_new.u, &copts) {
                samples.push(critical_point_at(model, t_edge, &u_edge, opts.degeneracy_tol));
            }
            return Ok(CriticalBranch {
                samples,
                termination: BranchTermination::ReachedTimeBoundary,
                min_gap_to_other_branches: f64::INFINITY,
            });
        }

        if !opts.domain.contains(&z_new.u) {
            samples.push(critical_point_at(model, z_new.t, &z_new.u, opts.degeneracy_tol));
            return Ok(CriticalBranch {
                samples,
                termination: BranchTermination::LeftDomain,
                min_gap_to_other_branches: f64::INFINITY,
            });
        }

        samples.push(critical_point_at(model, z_new.t, &z_new.u, opts.degeneracy_tol));
        let tau_new = tangent_at(model, &z_new, tau.as_slice())
            .ok_or(CriticalError::CorrectorDiverged { t: z_new.t })?;
        tau = if tau_new.dot(&tau) >= 0.0 { tau_new } else { -tau_new };
        z = z_new;
        lam = lam_new;
        h = (h * 1.3).min(opts.arc_step);
    }
    Err(CriticalError::MaxSteps(opts.max_steps))
}

/// Bisection along the secant between two corrected points astride the fold.
fn refine_fold(
    model: &EnergyModel,
    za: &AugPoint,
    zb: &AugPoint,
    tau: &State,
    lam_a: f64,
    opts: &ContinuationOpts,
) -> Result<AugPoint, CriticalError> {
    let d = model.dim();
    let mut a = za.clone();
    let mut b = zb.clone();
    let mut sign_a = lam_a.signum();
    let mut best;
    for _ in 0..200 {
        let mid_guess = AugPoint {
            u: State::from_iterator(d, (0..d).map(|i| 0.5 * (a.u[i] + b.u[i]))),
            t: 0.5 * (a.t + b.t),
        };
        let mid = correct(model, &mid_guess, tau, &mid_guess, opts.newton_tol)
            .ok_or(CriticalError::CorrectorDiverged { t: mid_guess.t })?;
        let lam_mid = min_eig(model, &mid);
        best = mid.clone();
        if lam_mid.abs() <= opts.degeneracy_tol && (b.t - a.t).abs() <= opts.fold_time_tol {
            return Ok(mid);
        }
        if lam_mid.signum() == sign_a {
            a = mid;
            sign_a = lam_mid.signum();
        } else {
            b = mid;
        }
        if (b.t - a.t).abs() <= opts.fold_time_tol
            && min_eig(model, &best).abs() <= opts.degeneracy_tol
        {
            return Ok(best);
        }
    }
    Err(CriticalError::FoldBracketLost)
}

#[derive(Debug, Clone)]
pub struct TransversalityReport {
    pub t_star: f64,
    pub u_star: State,
    pub null_dim: usize,
    /// <d/dt DE(t*, u*), v> for the unit null vector v.
    pub t2_value: f64,
    /// D^3 E(t*, u*)[v, v, v].
    pub t3_value: f64,
    pub null_vector: State,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct TransversalityOpts {
    pub degeneracy_tol: f64,
    pub tv_tol: f64,
}

impl Default for TransversalityOpts {
    fn default() -> Self {
        TransversalityOpts {
            degeneracy_tol: 1e-7,
            tv_tol: 1e-4,
        }
    }
}

/// Check the fold-genericity conditions at an (approximately) degenerate
/// critical point: 1-d Hessian kernel, nonzero time pairing, nonzero cubic.
pub fn check_transversality(
    model: &EnergyModel,
    t_star: f64,
    u_star: &State,
    opts: &TransversalityOpts,
) -> Result<TransversalityReport, CriticalError> {
    let (eigs, vecs) = sym_eigs(&model.hessian(t_star, u_star));
    let null_dim = eigs.iter().filter(|l| l.abs() <= opts.degeneracy_tol).count();
    if null_dim == 0 {
        let min_abs = eigs.iter().fold(f64::INFINITY, |m, l| m.min(l.abs()));
        return Err(CriticalError::NotDegenerate {
            min_abs_eig: min_abs,
            tol: opts.degeneracy_tol,
        });
    }
    let k_min = (0..eigs.len())
        .min_by(|&a, &b| eigs[a].abs().partial_cmp(&eigs[b].abs()).unwrap())
        .unwrap();
    let mut v: State = vecs.column(k_min).into_owned();
    // deterministic sign: largest-magnitude component positive
    let lead = (0..v.len())
        .max_by(|&a, &b| v[a].abs().partial_cmp(&v[b].abs()).unwrap())
        .unwrap();
    if v[lead] < 0.0 {
        v = -v;
    }
    let t2 = grad_time_slope(model, t_star, u_star).dot(&v);
    let t3 = model.third_directional(t_star, u_star, &v);
    Ok(TransversalityReport {
        t_star,
        u_star: u_star.clone(),
        null_dim,
        t2_value: t2,
        t3_value: t3,
        pass: null_dim == 1 && t2.abs() > opts.tv_tol && t3.abs() > opts.tv_tol,
        null_vector: v,
    })
}

#[derive(Debug, Clone)]
pub struct LojasiewiczFit {
    pub theta: f64,
    pub c: f64,
    pub fit_r2: f64,
    pub radius: f64,
}

/// Fit |E - E*|^theta <= C |DE| on spheres around a critical point:
/// theta is the least-squares slope of log|DE| against log|E - E*|, C the
/// max ratio on the sample.
pub fn estimate_lojasiewicz(
    model: &EnergyModel,
    t: f64,
    u_star: &State,
    radii: &[f64],
    n_dirs: usize,
) -> Result<LojasiewiczFit, CriticalError> {
    let e_star = model.value(t, u_star);
    let noise = 1e3 * f64::EPSILON * (1.0 + e_star.abs());
    let dirs = unit_directions(model.dim(), n_dirs.max(2));
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &r in radii {
        for dir in &dirs {
            let v = u_star + dir * r;
            let de = model.value(t, &v) - e_star;
            let g = model.grad_norm(t, &v);
            if de.abs() <= noise || g <= 1e-300 {
                continue;
            }
            xs.push(de.abs().ln());
            ys.push(g.ln());
        }
    }
    if xs.len() < 2 {
        return Err(CriticalError::BelowNoise);
    }
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let syy: f64 = ys.iter().map(|y| (y - ybar) * (y - ybar)).sum();
    let theta = sxy / sxx;
    let fit_r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    let c = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (theta * x - y).exp())
        .fold(0.0f64, f64::max);
    Ok(LojasiewiczFit {
        theta,
        c,
        fit_r2,
        radius: radii.iter().copied().fold(0.0, f64::max),
    })
}

#[derive(Debug, Clone)]
pub struct E4Report {
    pub holds: bool,
    /// Sampled estimate of limsup (E(v) - E(u*)) / |DE(v)| at the smallest
    /// radius; the condition asks for this to be >= 0 up to tolerance.
    pub max_ratio: f64,
}

/// Sampled check of the one-sided slope condition at a critical point.
pub fn check_e4(
    model: &EnergyModel,
    t: f64,
    u_star: &State,
    radii: &[f64],
    n_dirs: usize,
    e4_tol: f64,
) -> Result<E4Report, CriticalError> {
    let r = radii
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if !r.is_finite() {
        return Err(CriticalError::BelowNoise);
    }
    let e_star = model.value(t, u_star);
    let dirs = unit_directions(model.dim(), n_dirs.max(2));
    let mut max_ratio = f64::NEG_INFINITY;
    for dir in &dirs {
        let v = u_star + dir * r;
        let g = model.grad_norm(t, &v);
        if g <= 1e-300 {
            continue;
        }
        max_ratio = max_ratio.max((model.value(t, &v) - e_star) / g);
    }
    if !max_ratio.is_finite() {
        return Err(CriticalError::BelowNoise);
    }
    Ok(E4Report {
        holds: max_ratio >= -e4_tol,
        max_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::EnergyModel;

    fn s1(x: f64) -> State {
        State::from_vec(vec![x])
    }

    const T_STAR: f64 = 0.38490017945975047; // 2 / (3 sqrt 3)
    const U_STAR: f64 = -0.5773502691896258; // -1 / sqrt 3

    #[test]
    fn finds_all_three_wells_at_t0() {
        let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
        let cat = find_critical(
            &m,
            0.0,
            &SampleBox::centered(1, 2.5),
            64,
            &CriticalOpts::default(),
        );
        assert_eq!(cat.points.len(), 3);
        let us: Vec<f64> = cat.points.iter().map(|p| p.u[0]).collect();
        for (got, want) in us.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-8, "{us:?}");
        }
        assert!((cat.min_pairwise_gap - 1.0).abs() < 1e-6);
        assert!(cat.points.iter().all(|p| p.grad_norm <= 1e-10));
        assert_eq!(cat.points[0].kind, CriticalKind::NondegenerateMin);
        assert_eq!(cat.points[1].kind, CriticalKind::Saddle);
    }

    #[test]
    fn single_root_past_the_fold() {
        let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
        let cat = find_critical(
            &m,
            0.5,
            &SampleBox::centered(1, 2.5),
            64,
            &CriticalOpts::default(),
        );
        assert_eq!(cat.points.len(), 1);
        // oracle: bisect u^3 - u = 0.5 on [1, 2]
        let (mut lo, mut hi) = (1.0f64, 2.0f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if mid * mid * mid - mid < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((cat.points[0].u[0] - lo).abs() < 1e-9);
    }

    #[test]
    fn quadratic_has_unique_minimizer() {
        let m = EnergyModel::quadratic_track(s1(0.0), s1(1.0), 1.0).unwrap();
        let cat = find_critical(
            &m,
            0.3,
            &SampleBox::centered(1, 3.0),
            32,
            &CriticalOpts::default(),
        );
        assert_eq!(cat.points.len(), 1);
        assert!((cat.points[0].u[0] - 0.3).abs() < 1e-12);
        assert!(cat.min_pairwise_gap.is_infinite());
    }

    #[test]
    fn left_branch_folds_at_analytic_point() {
        let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
        let start = critical_point_at(&m, 0.0, &s1(-1.0), 1e-7);
        let branch = continue_branch(&m, &start, 1.0, &ContinuationOpts::new(1)).unwrap();
        match &branch.termination {
            BranchTermination::Fold { t_star, u_star } => {
                assert!((t_star - T_STAR).abs() < 1e-6, "t* = {t_star}");
                assert!((u_star[0] - U_STAR).abs() < 1e-6, "u* = {}", u_star[0]);
            }
            other => panic!("expected fold, got {other:?}"),
        }
        for p in &branch.samples {
            assert!(p.grad_norm <= 10.0 * 1e-10);
        }
    }

    #[test]
    fn right_branch_reaches_horizon() {
        let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
        let start = critical_point_at(&m, 0.0, &s1(1.0), 1e-7);
        let branch = continue_branch(&m, &start, 1.0, &ContinuationOpts::new(1)).unwrap();
        assert!(matches!(
            branch.termination,
            BranchTermination::ReachedTimeBoundary
        ));
        let last = branch.samples.last().unwrap();
        assert!((last.t - 1.0).abs() < 1e-12);
        // end state solves u^3 - u = 1
        assert!((last.u[0].powi(3) - last.u[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn quadratic_branch_tracks_the_path() {
        let m = EnergyModel::quadratic_track(s1(0.0), s1(1.0), 1.0).unwrap();
        let start = critical_point_at(&m, 0.0, &s1(0.0), 1e-7);
        let branch = continue_branch(&m, &start, 1.0, &ContinuationOpts::new(1)).unwrap();
        assert!(matches!(
            branch.termination,
            BranchTermination::ReachedTimeBoundary
        ));
        for p in &branch.samples {
            assert!((p.u[0] - p.t).abs() < 1e-9);
            assert!(p.hess_eigs[0] > 0.9);
        }
    }

    #[test]
    fn transversality_at_the_fold() {
        let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
        let rep = check_transversality(
            &m,
            T_STAR,
            &s1(U_STAR),
            &TransversalityOpts::default(),
        )
        .unwrap();
        assert_eq!(rep.null_dim, 1);
        assert!((rep.t2_value.abs() - 1.0).abs() < 1e-4);
        assert!((rep.t3_value.abs() - 6.0 / 3.0f64.sqrt()).abs() < 1e-3);
        assert!(rep.pass);
    }

    #[test]
    fn transversality_rejects_nondegenerate_points() {
        let m = EnergyModel::quadratic_track(s1(0.0), s1(1.0), 1.0).unwrap();
        let err = check_transversality(
            &m,
            0.3,
            &s1(0.3),
            &TransversalityOpts::default(),
        )
        .unwrap_err();
        assert!(matches!(err, CriticalError::NotDegenerate { .. }));
    }

    #[test]
    fn transversality_2d_null_vector_along_u_axis() {
        let m = EnergyModel::double_well_2d(1.0, 1.0).unwrap();
        let fold = State::from_vec(vec![U_STAR, 0.0]);
        let rep =
            check_transversality(&m, T_STAR, &fold, &TransversalityOpts::default()).unwrap();
        assert_eq!(rep.null_dim, 1);
        assert!(rep.null_vector[0].abs() > 0.999);
        assert!(rep.null_vector[1].abs() < 1e-6);
        assert!(rep.pass);
    }

    #[test]
    fn lojasiewicz_exponents() {
        let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
        let radii: Vec<f64> = (0..8).map(|k| 1e-4 * 10f64.powf(k as f64 / 3.5)).collect();
        let fit = estimate_lojasiewicz(&m, 0.0, &s1(1.0), &radii, 2).unwrap();
        assert!((fit.theta - 0.5).abs() < 0.05, "theta = {}", fit.theta);

        let radii_fold: Vec<f64> =
            (0..8).map(|k| 1e-3 * 10f64.powf(k as f64 / 4.7)).collect();
        let fit = estimate_lojasiewicz(&m, T_STAR, &s1(U_STAR), &radii_fold, 2).unwrap();
        assert!(
            (fit.theta - 2.0 / 3.0).abs() < 0.05,
            "fold theta = {}",
            fit.theta
        );

        let q = EnergyModel::quadratic_track(s1(0.0), s1(1.0), 1.0).unwrap();
        let fit = estimate_lojasiewicz(&q, 0.3, &s1(0.3), &radii, 2).unwrap();
        assert!((fit.theta - 0.5).abs() < 0.02);
        assert!((fit.c - 1.0 / 2.0f64.sqrt()).abs() < 0.02, "C = {}", fit.c);
    }

    #[test]
    fn e4_holds_at_catalogued_points() {
        let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
        let radii = [1e-3, 1e-2];
        for u in [-1.0, 0.0, 1.0] {
            let rep = check_e4(&m, 0.0, &s1(u), &radii, 8, 1e-2).unwrap();
            assert!(rep.holds, "E4 failed at u={u}: {rep:?}");
        }
        let rep = check_e4(&m, T_STAR, &s1(U_STAR), &radii, 8, 1e-2).unwrap();
        assert!(rep.holds);
        let q = EnergyModel::quadratic_track(s1(0.0), s1(1.0), 1.0).unwrap();
        let rep = check_e4(&q, 0.3, &s1(0.3), &radii, 8, 1e-2).unwrap();
        assert!(rep.holds && rep.max_ratio >= 0.0);
    }
}
