//! Implicit-Euler integration of the singularly perturbed gradient flow
//! `eps u' + DE_t(u) = 0`, with an energy-identity audit driving the adaptive
//! step.
//!
//! Every accepted step solves the backward-Euler residual with a damped
//! Newton iteration, then checks that the discrete energy identity (trapezoid
//! dissipation + stored-energy change - trapezoid power) balances to the
//! audit budget for that step. Cumulative integrals are accumulated at full
//! step resolution even when node storage is thinned, so interval residuals
//! and window masses keep fine-step accuracy on long stiff runs.

use crate::energy::EnergyModel;
use crate::{Matrix, State};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("time span [{0}, {1}] is empty or outside the model horizon")]
    BadSpan(f64, f64),
    #[error("initial state has non-finite entries")]
    NonFiniteInitial,
    #[error("Newton failed to converge at t={t} with dt={dt}")]
    NewtonFailed { t: f64, dt: f64 },
    #[error("adaptive step underflow at t={t}: audit tolerance unreachable")]
    StepUnderflow { t: f64 },
    #[error("energy became non-finite at t={t}")]
    NonFiniteEnergy { t: f64 },
    #[error("step budget of {0} exhausted")]
    MaxSteps(u64),
    #[error("query interval [{s}, {t}] outside trajectory support")]
    OutOfSupport { s: f64, t: f64 },
}

/// Options for [`integrate`].
#[derive(Debug, Clone)]
pub struct IntegrateOpts {
    /// Absolute tolerance on the implicit-step residual.
    pub newton_tol: f64,
    /// Budget for the cumulative energy-identity defect over the span; each
    /// step gets the proportional share `audit_tol * dt / span`.
    pub audit_tol: f64,
    /// Initial step; `None` means `1e-6 * span`.
    pub dt_init: Option<f64>,
    /// Optional hard cap on the step (used for fixed-resolution studies).
    pub dt_max: Option<f64>,
    pub max_steps: u64,
    /// Node-storage cap; accepted steps beyond it are thinned by striding.
    pub max_nodes: usize,
}

impl Default for IntegrateOpts {
    fn default() -> Self {
        IntegrateOpts {
            newton_tol: 1e-10,
            audit_tol: 1e-6,
            dt_init: None,
            dt_max: None,
            max_steps: 2_000_000_000,
            max_nodes: 2_000_000,
        }
    }
}

/// One viscous trajectory: stored nodes plus cumulative integrals.
///
/// `diss_density[k]` evaluates `eps/2 |u'|^2 + 1/(2 eps) |DE|^2` at node `k`
/// with `u'` taken as the quotient of the accepted step ending there. The
/// `cum_*` arrays are running trapezoid integrals accumulated at full step
/// resolution, so they stay exact at stored nodes after thinning.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub epsilon: f64,
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub energies: Vec<f64>,
    pub powers: Vec<f64>,
    pub diss_density: Vec<f64>,
    pub step_residuals: Vec<f64>,
    /// Integral of `diss_density` from the start.
    pub cum_diss: Vec<f64>,
    /// Integral of the power from the start.
    pub cum_power: Vec<f64>,
    /// Integral of `|DE| |u'|` from the start.
    pub cum_endiss: Vec<f64>,
    /// Sum of |per-step identity defect| over the whole run.
    pub total_abs_defect: f64,
    /// Number of accepted fine steps (>= stored nodes - 1).
    pub accepted_steps: u64,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    fn check_point(&self, r: f64) -> Result<(), FlowError> {
        let slack = 1e-12 * (1.0 + self.t_end().abs());
        if r < self.t_start() - slack || r > self.t_end() + slack {
            return Err(FlowError::OutOfSupport { s: r, t: r });
        }
        Ok(())
    }

    /// Bracket index i with times[i] <= r <= times[i+1], plus the fraction.
    fn locate(&self, r: f64) -> (usize, f64) {
        let n = self.times.len();
        let r = r.clamp(self.times[0], self.times[n - 1]);
        let i = match self
            .times
            .binary_search_by(|t| t.partial_cmp(&r).unwrap())
        {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        };
        let dt = self.times[i + 1] - self.times[i];
        let lam = if dt > 0.0 { (r - self.times[i]) / dt } else { 0.0 };
        (i, lam.clamp(0.0, 1.0))
    }

    fn lerp(&self, arr: &[f64], r: f64) -> f64 {
        let (i, lam) = self.locate(r);
        arr[i] + lam * (arr[i + 1] - arr[i])
    }

    /// Linearly interpolated state.
    pub fn state_at(&self, r: f64) -> State {
        let (i, lam) = self.locate(r);
        &self.states[i] * (1.0 - lam) + &self.states[i + 1] * lam
    }

    /// |∫_s^t diss + E_t(u(t)) - E_s(u(s)) - ∫_s^t P|, the audited energy
    /// identity defect over `[s, t]`.
    pub fn energy_identity_residual(
        &self,
        model: &EnergyModel,
        s: f64,
        t: f64,
    ) -> Result<f64, FlowError> {
        if s > t {
            return Err(FlowError::OutOfSupport { s, t });
        }
        self.check_point(s)?;
        self.check_point(t)?;
        let diss = self.lerp(&self.cum_diss, t) - self.lerp(&self.cum_diss, s);
        let work = self.lerp(&self.cum_power, t) - self.lerp(&self.cum_power, s);
        let e_t = model.value(t, &self.state_at(t));
        let e_s = model.value(s, &self.state_at(s));
        Ok((diss + e_t - e_s - work).abs())
    }

    /// Trapezoid approximation of ∫_s^t |DE| |u'| dr.
    pub fn dissipation_integral(&self, s: f64, t: f64) -> Result<f64, FlowError> {
        if s > t {
            return Err(FlowError::OutOfSupport { s, t });
        }
        self.check_point(s)?;
        self.check_point(t)?;
        Ok(self.lerp(&self.cum_endiss, t) - self.lerp(&self.cum_endiss, s))
    }

    /// ∫_s^t diss_density dr (the defect-measure mass of the window).
    pub fn dissipation_mass(&self, s: f64, t: f64) -> Result<f64, FlowError> {
        if s > t {
            return Err(FlowError::OutOfSupport { s, t });
        }
        self.check_point(s)?;
        self.check_point(t)?;
        Ok(self.lerp(&self.cum_diss, t) - self.lerp(&self.cum_diss, s))
    }
}

/// Shared per-step state for the implicit solver.
struct Stepper<'m> {
    model: &'m EnergyModel,
    eps: f64,
    dim: usize,
    grad: State,
    hess: Matrix,
    trial: State,
}

impl<'m> Stepper<'m> {
    fn new(model: &'m EnergyModel, eps: f64) -> Self {
        let dim = model.dim();
        Stepper {
            model,
            eps,
            dim,
            grad: State::zeros(dim),
            hess: Matrix::zeros(dim, dim),
            trial: State::zeros(dim),
        }
    }

    /// Residual norm of R(w) = eps w / dt + DE(t1, u0 + w).
    fn residual_norm(&mut self, t1: f64, u0: &State, w: &State, dt: f64) -> f64 {
        self.trial.copy_from(u0);
        self.trial += w;
        self.model.gradient_into(t1, &self.trial, &mut self.grad);
        let mut acc = 0.0;
        for i in 0..self.dim {
            let r = self.eps * w[i] / dt + self.grad[i];
            acc += r * r;
        }
        acc.sqrt()
    }

    /// Damped Newton for the backward-Euler step. Returns the increment `w`.
    fn implicit_step(
        &mut self,
        t1: f64,
        u0: &State,
        dt: f64,
        tol: f64,
    ) -> Option<State> {
        let mut w = State::zeros(self.dim);
        let mut rn = self.residual_norm(t1, u0, &w, dt);
        for _ in 0..60 {
            if rn <= tol {
                return Some(w);
            }
            self.trial.copy_from(u0);
            self.trial += &w;
            self.model.hessian_into(t1, &self.trial, &mut self.hess);
            self.model.gradient_into(t1, &self.trial, &mut self.grad);
            let delta = if self.dim == 1 {
                let j = self.eps / dt + self.hess[(0, 0)];
                if j.abs() < 1e-300 {
                    return None;
                }
                State::from_element(1, -(self.eps * w[0] / dt + self.grad[0]) / j)
            } else {
                let mut j = self.hess.clone();
                for i in 0..self.dim {
                    j[(i, i)] += self.eps / dt;
                }
                let mut rhs = State::zeros(self.dim);
                for i in 0..self.dim {
                    rhs[i] = -(self.eps * w[i] / dt + self.grad[i]);
                }
                match j.lu().solve(&rhs) {
                    Some(d) => d,
                    None => return None,
                }
            };
            if delta.iter().any(|x| !x.is_finite()) {
                return None;
            }
            // backtracking on the residual norm
            let mut lambda = 1.0;
            let mut improved = false;
            for _ in 0..30 {
                let cand = &w + &delta * lambda;
                let cn = self.residual_norm(t1, u0, &cand, dt);
                if cn < rn || cn <= tol {
                    w = cand;
                    rn = cn;
                    improved = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !improved {
                return None;
            }
        }
        if rn <= tol {
            Some(w)
        } else {
            None
        }
    }
}

/// Growable node storage with stride thinning and exact cumulative sums.
///
/// Steps cluster where the dynamics is fast, so plain striding would leave
/// huge time gaps on slow stretches and wreck interpolation there. Nodes that
/// first cross a uniform time lattice are marked as anchors and survive every
/// compaction, which bounds the stored time gap by the anchor spacing.
struct Recorder {
    stride: u64,
    max_nodes: usize,
    anchor_dt: f64,
    next_anchor: f64,
    anchors: Vec<bool>,
    traj: Trajectory,
}

impl Recorder {
    fn new(eps: f64, max_nodes: usize, t0: f64, span: f64) -> Self {
        Recorder {
            stride: 1,
            max_nodes: max_nodes.max(16_384),
            anchor_dt: span / 4096.0,
            next_anchor: t0,
            anchors: Vec::new(),
            traj: Trajectory {
                epsilon: eps,
                times: Vec::new(),
                states: Vec::new(),
                energies: Vec::new(),
                powers: Vec::new(),
                diss_density: Vec::new(),
                step_residuals: Vec::new(),
                cum_diss: Vec::new(),
                cum_power: Vec::new(),
                cum_endiss: Vec::new(),
                total_abs_defect: 0.0,
                accepted_steps: 0,
            },
        }
    }

    /// True when a node at time `t` must be stored regardless of the stride.
    fn is_anchor(&mut self, t: f64) -> bool {
        if t >= self.next_anchor {
            while self.next_anchor <= t {
                self.next_anchor += self.anchor_dt;
            }
            true
        } else {
            false
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        t: f64,
        u: &State,
        e: f64,
        p: f64,
        d: f64,
        res: f64,
        cum_diss: f64,
        cum_power: f64,
        cum_endiss: f64,
        anchor: bool,
    ) {
        let tr = &mut self.traj;
        tr.times.push(t);
        tr.states.push(u.clone());
        tr.energies.push(e);
        tr.powers.push(p);
        tr.diss_density.push(d);
        tr.step_residuals.push(res);
        tr.cum_diss.push(cum_diss);
        tr.cum_power.push(cum_power);
        tr.cum_endiss.push(cum_endiss);
        self.anchors.push(anchor);
        if tr.times.len() > self.max_nodes {
            self.compact();
        }
    }

    /// Drop every other non-anchor node (cumulative sums stay exact at the
    /// survivors because they are running totals, not window values).
    fn compact(&mut self) {
        let anchors = &self.anchors;
        let mut detail = 0usize;
        let keep_flags: Vec<bool> = (0..anchors.len())
            .map(|i| {
                if anchors[i] {
                    true
                } else {
                    detail += 1;
                    detail % 2 == 0
                }
            })
            .collect();
        let tr = &mut self.traj;
        let keep = |v: &mut Vec<f64>| {
            let mut i = 0;
            v.retain(|_| {
                let k = keep_flags[i];
                i += 1;
                k
            });
        };
        keep(&mut tr.times);
        keep(&mut tr.energies);
        keep(&mut tr.powers);
        keep(&mut tr.diss_density);
        keep(&mut tr.step_residuals);
        keep(&mut tr.cum_diss);
        keep(&mut tr.cum_power);
        keep(&mut tr.cum_endiss);
        let mut i = 0;
        tr.states.retain(|_| {
            let k = keep_flags[i];
            i += 1;
            k
        });
        let mut i = 0;
        self.anchors.retain(|_| {
            let k = keep_flags[i];
            i += 1;
            k
        });
        self.stride *= 2;
    }
}

/// Integrate `eps u' + DE_t(u) = 0` over `t_span` from `u0`.
pub fn integrate(
    model: &EnergyModel,
    eps: f64,
    u0: &State,
    t_span: (f64, f64),
    opts: &IntegrateOpts,
) -> Result<Trajectory, FlowError> {
    integrate_impl(model, eps, u0, t_span, opts, None)
}

/// Integrate on a prescribed node grid (no adaptivity). Used for step-halving
/// refinement studies and fixed-resolution oracles.
pub fn integrate_on_grid(
    model: &EnergyModel,
    eps: f64,
    u0: &State,
    times: &[f64],
    opts: &IntegrateOpts,
) -> Result<Trajectory, FlowError> {
    assert!(times.len() >= 2, "grid needs at least two nodes");
    let span = (times[0], *times.last().unwrap());
    integrate_impl(model, eps, u0, span, opts, Some(times))
}

fn integrate_impl(
    model: &EnergyModel,
    eps: f64,
    u0: &State,
    t_span: (f64, f64),
    opts: &IntegrateOpts,
    grid: Option<&[f64]>,
) -> Result<Trajectory, FlowError> {
    if eps <= 0.0 {
        return Err(FlowError::NonPositiveEpsilon(eps));
    }
    let (t0, t1) = t_span;
    let span = t1 - t0;
    let slack = 1e-9 * (1.0 + model.horizon());
    if span <= 0.0 || t0 < -slack || t1 > model.horizon() + slack {
        return Err(FlowError::BadSpan(t0, t1));
    }
    if u0.iter().any(|x| !x.is_finite()) {
        return Err(FlowError::NonFiniteInitial);
    }

    let mut stepper = Stepper::new(model, eps);
    let mut rec = Recorder::new(eps, opts.max_nodes, t0, span);

    let mut t = t0;
    let mut u = u0.clone();
    let g0 = model.gradient(t0, &u);
    let q0 = g0.norm() / eps;
    let mut e = model.value(t0, &u);
    let mut p = model.power(t0, &u);
    let mut d = eps / 2.0 * q0 * q0 + g0.norm_squared() / (2.0 * eps);
    let mut endiss_rate = g0.norm() * q0;
    if !e.is_finite() {
        return Err(FlowError::NonFiniteEnergy { t: t0 });
    }
    let (mut cum_diss, mut cum_power, mut cum_endiss) = (0.0, 0.0, 0.0);
    rec.is_anchor(t);
    rec.push(t, &u, e, p, d, 0.0, cum_diss, cum_power, cum_endiss, true);

    let dt_floor = 1e-12 * span;
    let mut dt = opts.dt_init.unwrap_or(1e-6 * span).min(span);
    if let Some(cap) = opts.dt_max {
        dt = dt.min(cap);
    }
    let mut consecutive = 0u32;
    let mut accepted: u64 = 0;
    let mut grid_pos = 1usize;

    while t < t1 - 1e-14 * span {
        if accepted >= opts.max_steps {
            return Err(FlowError::MaxSteps(opts.max_steps));
        }
        let step_dt = match grid {
            Some(g) => {
                let next = g[grid_pos];
                next - t
            }
            None => dt.min(t1 - t),
        };
        if step_dt <= 0.0 {
            return Err(FlowError::BadSpan(t, t1));
        }
        let t_next = match grid {
            Some(g) => g[grid_pos],
            None => t + step_dt,
        };

        let sol = stepper.implicit_step(t_next, &u, step_dt, opts.newton_tol);
        let mut reject_reason: Option<FlowError> = None;
        if let Some(w) = sol {
            let u_next = &u + &w;
            let e_next = model.value(t_next, &u_next);
            if !e_next.is_finite() {
                return Err(FlowError::NonFiniteEnergy { t: t_next });
            }
            let p_next = model.power(t_next, &u_next);
            let gn = model.grad_norm(t_next, &u_next);
            let qn = w.norm() / step_dt;
            let d_next = eps / 2.0 * qn * qn + gn * gn / (2.0 * eps);
            let endiss_next = gn * qn;
            let defect = step_dt / 2.0 * (d + d_next) + (e_next - e)
                - step_dt / 2.0 * (p + p_next);
            // the energy difference cannot be evaluated below the rounding
            // floor, so the proportional budget gets an absolute pad
            let budget = opts.audit_tol * step_dt / span
                + 8.0 * f64::EPSILON * (1.0 + e.abs() + e_next.abs());
            if grid.is_some() || defect.abs() <= budget {
                // accept
                cum_diss += step_dt / 2.0 * (d + d_next);
                cum_power += step_dt / 2.0 * (p + p_next);
                cum_endiss += step_dt / 2.0 * (endiss_rate + endiss_next);
                t = t_next;
                u = u_next;
                e = e_next;
                p = p_next;
                d = d_next;
                endiss_rate = endiss_next;
                rec.traj.total_abs_defect += defect.abs();
                accepted += 1;
                let at_end = t >= t1 - 1e-14 * span
                    || grid.map(|g| grid_pos + 1 >= g.len()).unwrap_or(false);
                let anchor = rec.is_anchor(t) || at_end;
                if (anchor || accepted % rec.stride == 0)
                    && *rec.traj.times.last().unwrap() < t
                {
                    rec.push(
                        t, &u, e, p, d, defect, cum_diss, cum_power, cum_endiss, anchor,
                    );
                }
                if grid.is_some() {
                    grid_pos += 1;
                    if grid_pos >= grid.unwrap().len() {
                        break;
                    }
                } else {
                    consecutive += 1;
                    if consecutive >= 5 {
                        consecutive = 0;
                        dt *= 1.5;
                        if let Some(cap) = opts.dt_max {
                            dt = dt.min(cap);
                        }
                        dt = dt.min(span);
                    }
                }
                continue;
            }
        } else {
            reject_reason = Some(FlowError::NewtonFailed { t, dt: step_dt });
        }
        // reject: halve or fail
        if grid.is_some() {
            return Err(reject_reason.unwrap_or(FlowError::NewtonFailed { t, dt: step_dt }));
        }
        consecutive = 0;
        dt = step_dt * 0.5;
        if dt < dt_floor {
            return Err(match reject_reason {
                Some(e) => e,
                None => FlowError::StepUnderflow { t },
            });
        }
    }

    rec.traj.accepted_steps = accepted;
    Ok(rec.traj)
}
