//! Time-dependent energy models E_t(u) on R^d.
//!
//! A model bundles analytic evaluators for the value, spatial gradient,
//! Hessian, power (partial time derivative) and a directional third
//! derivative. Builtin families are hard-coded closed forms; user models come
//! in through [`EnergyFn`] or the dense polynomial representation. Everything
//! downstream (flow integration, continuation, transitions) treats a model as
//! an immutable, shareable bundle of pure functions of `(t, u)`.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::sample::{Halton, SampleBox};
use crate::{Matrix, State};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("unknown energy family `{0}`")]
    UnknownFamily(String),
    #[error("family `{family}` is missing parameter `{name}`")]
    MissingParameter { family: String, name: String },
    #[error("invalid parameter `{name}`: {reason}")]
    BadParameter { name: String, reason: String },
    #[error("horizon must be positive, got {0}")]
    NonPositiveHorizon(f64),
    #[error("perturbation matrix is not symmetric")]
    NonSymmetricPerturbation,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{what} returned a non-finite value at t={t}")]
    NonFinite { what: &'static str, t: f64 },
}

/// Evaluators of a time-dependent energy. All methods must be pure; models
/// are shared read-only across worker threads.
pub trait EnergyFn: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, t: f64, u: &State) -> f64;
    fn gradient_into(&self, t: f64, u: &State, out: &mut State);
    fn hessian_into(&self, t: f64, u: &State, out: &mut Matrix);
    /// Power P_t(u) = d/dt E_t(u).
    fn power(&self, t: f64, u: &State) -> f64;

    /// Directional third derivative D^3 E_t(u)[v,v,v].
    ///
    /// Default: central difference of the Hessian quadratic form along `v`,
    /// which is what user-supplied models get.
    fn third_directional(&self, t: f64, u: &State, v: &State) -> f64 {
        let h = 1e-5 * (1.0 + u.norm());
        let d = self.dim();
        let mut hp = Matrix::zeros(d, d);
        let mut hm = Matrix::zeros(d, d);
        self.hessian_into(t, &(u + v * h), &mut hp);
        self.hessian_into(t, &(u - v * h), &mut hm);
        (v.dot(&(&hp * v)) - v.dot(&(&hm * v))) / (2.0 * h)
    }
}

/// An immutable energy model: named family, parameter record, horizon and
/// evaluators. Cloning is cheap (the evaluator is shared).
#[derive(Clone)]
pub struct EnergyModel {
    name: String,
    dim: usize,
    horizon: f64,
    params: BTreeMap<String, f64>,
    f: Arc<dyn EnergyFn>,
}

impl std::fmt::Debug for EnergyModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EnergyModel")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("horizon", &self.horizon)
            .field("params", &self.params)
            .finish()
    }
}

impl EnergyModel {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn value(&self, t: f64, u: &State) -> f64 {
        self.f.value(t, u)
    }

    pub fn gradient(&self, t: f64, u: &State) -> State {
        let mut g = State::zeros(self.dim);
        self.f.gradient_into(t, u, &mut g);
        g
    }

    pub fn gradient_into(&self, t: f64, u: &State, out: &mut State) {
        self.f.gradient_into(t, u, out);
    }

    pub fn hessian(&self, t: f64, u: &State) -> Matrix {
        let mut h = Matrix::zeros(self.dim, self.dim);
        self.f.hessian_into(t, u, &mut h);
        h
    }

    pub fn hessian_into(&self, t: f64, u: &State, out: &mut Matrix) {
        self.f.hessian_into(t, u, out);
    }

    pub fn power(&self, t: f64, u: &State) -> f64 {
        self.f.power(t, u)
    }

    pub fn third_directional(&self, t: f64, u: &State, v: &State) -> f64 {
        self.f.third_directional(t, u, v)
    }

    pub fn grad_norm(&self, t: f64, u: &State) -> f64 {
        self.gradient(t, u).norm()
    }

    /// Wrap arbitrary evaluators as a model (user and test energies).
    pub fn from_fn(
        name: impl Into<String>,
        horizon: f64,
        f: Arc<dyn EnergyFn>,
    ) -> Result<Self, EnergyError> {
        if horizon <= 0.0 {
            return Err(EnergyError::NonPositiveHorizon(horizon));
        }
        Ok(EnergyModel {
            name: name.into(),
            dim: f.dim(),
            horizon,
            params: BTreeMap::new(),
            f,
        })
    }

    /// E_t(u) = 1/2 ||u - a0 - t a1||^2, the convex tracking benchmark.
    pub fn quadratic_track(a0: State, a1: State, horizon: f64) -> Result<Self, EnergyError> {
        if horizon <= 0.0 {
            return Err(EnergyError::NonPositiveHorizon(horizon));
        }
        if a0.len() != a1.len() {
            return Err(EnergyError::DimensionMismatch {
                expected: a0.len(),
                got: a1.len(),
            });
        }
        let dim = a0.len();
        let mut params = BTreeMap::new();
        for i in 0..dim {
            params.insert(format!("a0.{i}"), a0[i]);
            params.insert(format!("a1.{i}"), a1[i]);
        }
        params.insert("T".into(), horizon);
        Ok(EnergyModel {
            name: "quadratic_track".into(),
            dim,
            horizon,
            params,
            f: Arc::new(QuadraticTrack { a0, a1 }),
        })
    }

    /// E_t(u) = u^4/4 - u^2/2 - (rate t) u + c0, the minimal nonconvex family
    /// with a fold. `c0` makes the energy nonnegative on the horizon.
    pub fn tilted_double_well(tilt_rate: f64, horizon: f64) -> Result<Self, EnergyError> {
        if horizon <= 0.0 {
            return Err(EnergyError::NonPositiveHorizon(horizon));
        }
        let c0 = double_well_shift(tilt_rate.abs() * horizon);
        let mut params = BTreeMap::new();
        params.insert("tilt_rate".into(), tilt_rate);
        params.insert("c0".into(), c0);
        params.insert("T".into(), horizon);
        Ok(EnergyModel {
            name: "tilted_double_well".into(),
            dim: 1,
            horizon,
            params,
            f: Arc::new(TiltedDoubleWell { tilt_rate, c0 }),
        })
    }

    /// E_t(u,v) = (u^2-1)^2/4 + v^2/2 - (rate t) u + c0: the 1-d fold embedded
    /// in the plane with a transverse stable direction.
    pub fn double_well_2d(tilt_rate: f64, horizon: f64) -> Result<Self, EnergyError> {
        if horizon <= 0.0 {
            return Err(EnergyError::NonPositiveHorizon(horizon));
        }
        // (u^2-1)^2/4 = u^4/4 - u^2/2 + 1/4, so the 1-d shift oversubtracts 1/4
        let c0 = (double_well_shift(tilt_rate.abs() * horizon) - 0.25).max(0.0);
        let mut params = BTreeMap::new();
        params.insert("tilt_rate".into(), tilt_rate);
        params.insert("c0".into(), c0);
        params.insert("T".into(), horizon);
        Ok(EnergyModel {
            name: "double_well_2d".into(),
            dim: 2,
            horizon,
            params,
            f: Arc::new(DoubleWell2d { tilt_rate, c0 }),
        })
    }

    /// Dense polynomial energy: sum of monomial terms plus a time-polynomial
    /// tilt `l(t) <g, u>`.
    pub fn polynomial(
        name: impl Into<String>,
        dim: usize,
        terms: Vec<(Vec<u32>, f64)>,
        tilt: Option<(State, Vec<f64>)>,
        horizon: f64,
    ) -> Result<Self, EnergyError> {
        if horizon <= 0.0 {
            return Err(EnergyError::NonPositiveHorizon(horizon));
        }
        for (exps, _) in &terms {
            if exps.len() != dim {
                return Err(EnergyError::DimensionMismatch {
                    expected: dim,
                    got: exps.len(),
                });
            }
        }
        if let Some((g, _)) = &tilt {
            if g.len() != dim {
                return Err(EnergyError::DimensionMismatch {
                    expected: dim,
                    got: g.len(),
                });
            }
        }
        Ok(EnergyModel {
            name: name.into(),
            dim,
            horizon,
            params: BTreeMap::new(),
            f: Arc::new(PolynomialEnergy { dim, terms, tilt }),
        })
    }

    /// Instantiate a builtin family from a flat parameter map.
    ///
    /// Families: `quadratic_track` (requires `a1.0`; optional `a0.i`, `a1.i`,
    /// `T`), `tilted_double_well` and `double_well_2d` (optional `tilt_rate`,
    /// `T`). Vector parameters use key suffix `.i`.
    pub fn make_builtin(
        name: &str,
        params: &BTreeMap<String, f64>,
    ) -> Result<Self, EnergyError> {
        let horizon = params.get("T").or_else(|| params.get("horizon")).copied();
        let horizon = horizon.unwrap_or(1.0);
        match name {
            "quadratic_track" => {
                if !params.contains_key("a1.0") {
                    return Err(EnergyError::MissingParameter {
                        family: name.into(),
                        name: "a1.0".into(),
                    });
                }
                let dim = params
                    .keys()
                    .filter_map(|k| {
                        k.strip_prefix("a0.")
                            .or_else(|| k.strip_prefix("a1."))
                            .and_then(|s| s.parse::<usize>().ok())
                    })
                    .max()
                    .map(|m| m + 1)
                    .unwrap_or(1);
                let a0 = State::from_iterator(
                    dim,
                    (0..dim).map(|i| params.get(&format!("a0.{i}")).copied().unwrap_or(0.0)),
                );
                let a1 = State::from_iterator(
                    dim,
                    (0..dim).map(|i| params.get(&format!("a1.{i}")).copied().unwrap_or(0.0)),
                );
                Self::quadratic_track(a0, a1, horizon)
            }
            "tilted_double_well" => {
                let rate = params.get("tilt_rate").copied().unwrap_or(1.0);
                Self::tilted_double_well(rate, horizon)
            }
            "double_well_2d" => {
                let rate = params.get("tilt_rate").copied().unwrap_or(1.0);
                Self::double_well_2d(rate, horizon)
            }
            other => Err(EnergyError::UnknownFamily(other.into())),
        }
    }

    /// Generic second-order perturbation E_t(u) + <y,u> + 1/2 u^T K u.
    ///
    /// The perturbation is autonomous, so the power is unchanged; gradient and
    /// Hessian shift by `y + K u` and `K`. `K` must be symmetric.
    pub fn perturb_generic(&self, y: &State, k: &Matrix) -> Result<Self, EnergyError> {
        if y.len() != self.dim || k.nrows() != self.dim || k.ncols() != self.dim {
            return Err(EnergyError::DimensionMismatch {
                expected: self.dim,
                got: y.len().max(k.nrows()),
            });
        }
        let scale = 1.0 + k.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        let asym = (k - k.transpose())
            .iter()
            .fold(0.0f64, |m, &x| m.max(x.abs()));
        if asym > 1e-12 * scale {
            return Err(EnergyError::NonSymmetricPerturbation);
        }
        Ok(EnergyModel {
            name: format!("{}+quadratic_perturbation", self.name),
            dim: self.dim,
            horizon: self.horizon,
            params: self.params.clone(),
            f: Arc::new(PerturbedEnergy {
                inner: self.f.clone(),
                y: y.clone(),
                k: k.clone(),
            }),
        })
    }

    /// Cross-check the analytic evaluators against central differences at
    /// quasi-random samples of the box x time interval.
    ///
    /// The gradient and power are differenced from the value; the Hessian is
    /// differenced from the gradient (second differences of the value at the
    /// same step would sit at the rounding floor). Errors are relative to
    /// `1 + |analytic|`.
    pub fn validate_derivatives(
        &self,
        sbox: &SampleBox,
        n_samples: usize,
        h: f64,
        tol: f64,
    ) -> Result<ValidationReport, EnergyError> {
        assert!(h > 0.0 && n_samples >= 1, "need h > 0 and n_samples >= 1");
        let d = self.dim;
        let mut halton = Halton::new(d + 1, 0);
        let mut worst_g = 0.0f64;
        let mut worst_h = 0.0f64;
        let mut worst_p = 0.0f64;
        for _ in 0..n_samples {
            let q = halton.next_point();
            let t = q[d] * self.horizon;
            let u = sbox.map_unit(&q[..d]);

            let val = self.value(t, &u);
            let g = self.gradient(t, &u);
            let hess = self.hessian(t, &u);
            let p = self.power(t, &u);
            if !val.is_finite() || !p.is_finite() || g.iter().any(|x| !x.is_finite()) {
                return Err(EnergyError::NonFinite {
                    what: "energy evaluator",
                    t,
                });
            }

            // gradient vs value
            let gscale = 1.0 + g.amax();
            for i in 0..d {
                let mut up = u.clone();
                let mut um = u.clone();
                up[i] += h;
                um[i] -= h;
                let fd = (self.value(t, &up) - self.value(t, &um)) / (2.0 * h);
                if !fd.is_finite() {
                    return Err(EnergyError::NonFinite {
                        what: "value evaluator",
                        t,
                    });
                }
                worst_g = worst_g.max((g[i] - fd).abs() / gscale);
            }

            // hessian vs gradient, plus its symmetry defect
            let hscale = 1.0 + hess.amax();
            for j in 0..d {
                let mut up = u.clone();
                let mut um = u.clone();
                up[j] += h;
                um[j] -= h;
                let col = (self.gradient(t, &up) - self.gradient(t, &um)) / (2.0 * h);
                for i in 0..d {
                    worst_h = worst_h.max((hess[(i, j)] - col[i]).abs() / hscale);
                }
            }
            let asym = (&hess - hess.transpose())
                .iter()
                .fold(0.0f64, |m, &x| m.max(x.abs()));
            worst_h = worst_h.max(asym / hscale);

            // power vs value
            let fd_p = (self.value(t + h, &u) - self.value(t - h, &u)) / (2.0 * h);
            worst_p = worst_p.max((p - fd_p).abs() / (1.0 + p.abs()));
        }
        Ok(ValidationReport {
            max_rel_error_gradient: worst_g,
            max_rel_error_hessian: worst_h,
            max_rel_error_power: worst_p,
            sample_count: n_samples,
            pass: worst_g < tol && worst_h < tol && worst_p < tol,
        })
    }

    /// Fit the smallest constants with |P| <= C1 E + C2 on the sampled grid.
    ///
    /// C2(C1) is the exact least upper bound for each candidate slope; the
    /// returned pair minimizes C1 * max(E) + C2 over a slope grid, which
    /// degrades gracefully to (0, 0) for autonomous energies.
    pub fn check_power_control(
        &self,
        grid: &PowerGrid,
    ) -> Result<PowerControlEstimate, EnergyError> {
        assert!(grid.n_u >= 1 && grid.n_t >= 1, "grid must be nonempty");
        let mut halton = Halton::new(self.dim, 0);
        let mut samples: Vec<(f64, f64)> = Vec::with_capacity(grid.n_u * grid.n_t);
        for _ in 0..grid.n_u {
            let u = halton.next_in(&grid.sbox);
            for j in 0..grid.n_t {
                let t = self.horizon * (j as f64) / ((grid.n_t - 1).max(1) as f64);
                let e = self.value(t, &u);
                let p = self.power(t, &u);
                if !e.is_finite() || !p.is_finite() {
                    return Err(EnergyError::NonFinite {
                        what: "energy or power evaluator",
                        t,
                    });
                }
                samples.push((e, p.abs()));
            }
        }
        let e_max = samples.iter().fold(0.0f64, |m, &(e, _)| m.max(e));
        let p_max = samples.iter().fold(0.0f64, |m, &(_, p)| m.max(p));
        if p_max <= 1e-14 * (1.0 + e_max) {
            return Ok(PowerControlEstimate {
                c1: 0.0,
                c2: 0.0,
                violation_count: 0,
                samples: samples.len(),
            });
        }
        let c2_for = |c1: f64| {
            samples
                .iter()
                .fold(0.0f64, |m, &(e, p)| m.max(p - c1 * e))
        };
        let c1_hi = samples
            .iter()
            .map(|&(e, p)| p / e.max(1e-12 * (1.0 + e_max)))
            .fold(0.0f64, f64::max);
        let n_grid = 1024;
        let mut best = (0.0, c2_for(0.0));
        let mut best_obj = best.1; // objective at c1 = 0
        for k in 1..=n_grid {
            let c1 = c1_hi * (k as f64) / (n_grid as f64);
            let c2 = c2_for(c1);
            let obj = c1 * e_max + c2;
            if obj < best_obj {
                best_obj = obj;
                best = (c1, c2);
            }
        }
        let slack = 1e-12 * (1.0 + p_max);
        let violation_count = samples
            .iter()
            .filter(|&&(e, p)| p > best.0 * e + best.1 + slack)
            .count();
        Ok(PowerControlEstimate {
            c1: best.0,
            c2: best.1,
            violation_count,
            samples: samples.len(),
        })
    }

    /// Sampled coercivity witness: bound the sublevel {sup_t |E_t| <= rho}
    /// inside the search box. Returns `bounded = false` when the sublevel
    /// reaches the box boundary (the box then proves nothing).
    pub fn check_coercivity(
        &self,
        rho: f64,
        sbox: &SampleBox,
    ) -> Result<CoercivityReport, EnergyError> {
        assert!(rho > 0.0, "rho must be positive");
        let d = self.dim;
        let n_axis: usize = match d {
            1 => 4001,
            2 => 201,
            _ => 31,
        };
        let n_t = 11;
        let mut idx = vec![0usize; d];
        let mut radius = 0.0f64;
        let mut touches = false;
        let cell = (0..d)
            .map(|i| (sbox.hi[i] - sbox.lo[i]) / (n_axis - 1) as f64)
            .fold(0.0f64, f64::max);
        loop {
            let u = State::from_iterator(
                d,
                idx.iter().enumerate().map(|(i, &k)| {
                    sbox.lo[i] + (sbox.hi[i] - sbox.lo[i]) * k as f64 / (n_axis - 1) as f64
                }),
            );
            let mut g = 0.0f64;
            for j in 0..n_t {
                let t = self.horizon * j as f64 / (n_t - 1) as f64;
                let e = self.value(t, &u);
                if !e.is_finite() {
                    return Err(EnergyError::NonFinite {
                        what: "value evaluator",
                        t,
                    });
                }
                g = g.max(e.abs());
            }
            if g <= rho {
                radius = radius.max(u.norm());
                if sbox.near_boundary(&u, 1.5 * cell) {
                    touches = true;
                }
            }
            // odometer over the lattice
            let mut axis = 0;
            loop {
                if axis == d {
                    return Ok(CoercivityReport {
                        bounded: !touches,
                        radius,
                    });
                }
                idx[axis] += 1;
                if idx[axis] < n_axis {
                    break;
                }
                idx[axis] = 0;
                axis += 1;
            }
        }
    }
}

/// Outcome of [`EnergyModel::validate_derivatives`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub max_rel_error_gradient: f64,
    pub max_rel_error_hessian: f64,
    pub max_rel_error_power: f64,
    pub sample_count: usize,
    pub pass: bool,
}

/// Fitted power-control constants, |P| <= C1 E + C2 on the sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerControlEstimate {
    pub c1: f64,
    pub c2: f64,
    pub violation_count: usize,
    pub samples: usize,
}

/// Sampling layout for [`EnergyModel::check_power_control`].
#[derive(Debug, Clone)]
pub struct PowerGrid {
    pub sbox: SampleBox,
    pub n_u: usize,
    pub n_t: usize,
}

impl PowerGrid {
    pub fn new(sbox: SampleBox, n_u: usize, n_t: usize) -> Self {
        PowerGrid { sbox, n_u, n_t }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoercivityReport {
    pub bounded: bool,
    /// Radius (about the origin) of the smallest ball holding the sampled
    /// sublevel set; 0 when the sublevel misses the box entirely.
    pub radius: f64,
}

/// Additive constant that makes u^4/4 - u^2/2 - l u nonnegative for all
/// |l| <= l_max. The minimum sits at the outer root of u^3 - u = l_max.
fn double_well_shift(l_max: f64) -> f64 {
    let mut u = 1.5 + l_max.cbrt();
    for _ in 0..100 {
        let f = u * u * u - u - l_max;
        let fp = 3.0 * u * u - 1.0;
        let step = f / fp;
        u -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    let e_min = 0.25 * u.powi(4) - 0.5 * u * u - l_max * u;
    // tiny pad keeps sampled values clear of -0.0 after rounding
    (-e_min).max(0.0) + 1e-9
}

struct QuadraticTrack {
    a0: State,
    a1: State,
}

impl QuadraticTrack {
    #[inline]
    fn target(&self, t: f64) -> State {
        &self.a0 + &self.a1 * t
    }
}

impl EnergyFn for QuadraticTrack {
    fn dim(&self) -> usize {
        self.a0.len()
    }

    fn value(&self, t: f64, u: &State) -> f64 {
        0.5 * (u - self.target(t)).norm_squared()
    }

    fn gradient_into(&self, t: f64, u: &State, out: &mut State) {
        for i in 0..u.len() {
            out[i] = u[i] - self.a0[i] - t * self.a1[i];
        }
    }

    fn hessian_into(&self, _t: f64, _u: &State, out: &mut Matrix) {
        out.fill(0.0);
        out.fill_diagonal(1.0);
    }

    fn power(&self, t: f64, u: &State) -> f64 {
        -(u - self.target(t)).dot(&self.a1)
    }

    fn third_directional(&self, _t: f64, _u: &State, _v: &State) -> f64 {
        0.0
    }
}

struct TiltedDoubleWell {
    tilt_rate: f64,
    c0: f64,
}

impl EnergyFn for TiltedDoubleWell {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, t: f64, u: &State) -> f64 {
        let x = u[0];
        0.25 * x * x * x * x - 0.5 * x * x - self.tilt_rate * t * x + self.c0
    }

    fn gradient_into(&self, t: f64, u: &State, out: &mut State) {
        let x = u[0];
        out[0] = x * x * x - x - self.tilt_rate * t;
    }

    fn hessian_into(&self, _t: f64, u: &State, out: &mut Matrix) {
        out[(0, 0)] = 3.0 * u[0] * u[0] - 1.0;
    }

    fn power(&self, _t: f64, u: &State) -> f64 {
        -self.tilt_rate * u[0]
    }

    fn third_directional(&self, _t: f64, u: &State, v: &State) -> f64 {
        6.0 * u[0] * v[0] * v[0] * v[0]
    }
}

struct DoubleWell2d {
    tilt_rate: f64,
    c0: f64,
}

impl EnergyFn for DoubleWell2d {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, t: f64, u: &State) -> f64 {
        let (x, y) = (u[0], u[1]);
        let w = x * x - 1.0;
        0.25 * w * w + 0.5 * y * y - self.tilt_rate * t * x + self.c0
    }

    fn gradient_into(&self, t: f64, u: &State, out: &mut State) {
        let (x, y) = (u[0], u[1]);
        out[0] = x * x * x - x - self.tilt_rate * t;
        out[1] = y;
    }

    fn hessian_into(&self, _t: f64, u: &State, out: &mut Matrix) {
        out[(0, 0)] = 3.0 * u[0] * u[0] - 1.0;
        out[(0, 1)] = 0.0;
        out[(1, 0)] = 0.0;
        out[(1, 1)] = 1.0;
    }

    fn power(&self, _t: f64, u: &State) -> f64 {
        -self.tilt_rate * u[0]
    }

    fn third_directional(&self, _t: f64, u: &State, v: &State) -> f64 {
        6.0 * u[0] * v[0] * v[0] * v[0]
    }
}

/// Dense polynomial energy: sum_alpha c_alpha u^alpha + l(t) <g, u>, with
/// l a polynomial in t. All derivatives are exact.
struct PolynomialEnergy {
    dim: usize,
    terms: Vec<(Vec<u32>, f64)>,
    tilt: Option<(State, Vec<f64>)>,
}

impl PolynomialEnergy {
    /// Monomial with per-axis derivative orders applied.
    fn monomial_deriv(exps: &[u32], coeff: f64, u: &State, orders: &[u32]) -> f64 {
        let mut acc = coeff;
        for (i, (&e, &d)) in exps.iter().zip(orders).enumerate() {
            if d > e {
                return 0.0;
            }
            let mut fall = 1.0;
            for k in 0..d {
                fall *= (e - k) as f64;
            }
            acc *= fall * u[i].powi((e - d) as i32);
        }
        acc
    }

    fn tilt_value(&self, t: f64) -> f64 {
        match &self.tilt {
            Some((_, poly)) => poly
                .iter()
                .rev()
                .fold(0.0, |acc, &c| acc * t + c),
            None => 0.0,
        }
    }

    fn tilt_rate(&self, t: f64) -> f64 {
        match &self.tilt {
            Some((_, poly)) => {
                let mut acc = 0.0;
                for (k, &c) in poly.iter().enumerate().skip(1).rev() {
                    acc = acc * t + (k as f64) * c;
                }
                acc
            }
            None => 0.0,
        }
    }
}

impl EnergyFn for PolynomialEnergy {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, t: f64, u: &State) -> f64 {
        let orders = vec![0u32; self.dim];
        let mut v: f64 = self
            .terms
            .iter()
            .map(|(e, c)| Self::monomial_deriv(e, *c, u, &orders))
            .sum();
        if let Some((g, _)) = &self.tilt {
            v += self.tilt_value(t) * g.dot(u);
        }
        v
    }

    fn gradient_into(&self, t: f64, u: &State, out: &mut State) {
        let mut orders = vec![0u32; self.dim];
        for i in 0..self.dim {
            orders[i] = 1;
            out[i] = self
                .terms
                .iter()
                .map(|(e, c)| Self::monomial_deriv(e, *c, u, &orders))
                .sum();
            orders[i] = 0;
        }
        if let Some((g, _)) = &self.tilt {
            let l = self.tilt_value(t);
            for i in 0..self.dim {
                out[i] += l * g[i];
            }
        }
    }

    fn hessian_into(&self, _t: f64, u: &State, out: &mut Matrix) {
        let mut orders = vec![0u32; self.dim];
        for i in 0..self.dim {
            for j in i..self.dim {
                orders[i] += 1;
                orders[j] += 1;
                let v: f64 = self
                    .terms
                    .iter()
                    .map(|(e, c)| Self::monomial_deriv(e, *c, u, &orders))
                    .sum();
                orders[i] -= 1;
                orders[j] -= 1;
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
    }

    fn power(&self, t: f64, u: &State) -> f64 {
        match &self.tilt {
            Some((g, _)) => self.tilt_rate(t) * g.dot(u),
            None => 0.0,
        }
    }

    fn third_directional(&self, _t: f64, u: &State, v: &State) -> f64 {
        let mut orders = vec![0u32; self.dim];
        let mut acc = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                for k in 0..self.dim {
                    orders[i] += 1;
                    orders[j] += 1;
                    orders[k] += 1;
                    let d3: f64 = self
                        .terms
                        .iter()
                        .map(|(e, c)| Self::monomial_deriv(e, *c, u, &orders))
                        .sum();
                    orders[i] -= 1;
                    orders[j] -= 1;
                    orders[k] -= 1;
                    acc += d3 * v[i] * v[j] * v[k];
                }
            }
        }
        acc
    }
}

struct PerturbedEnergy {
    inner: Arc<dyn EnergyFn>,
    y: State,
    k: Matrix,
}

impl EnergyFn for PerturbedEnergy {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, t: f64, u: &State) -> f64 {
        self.inner.value(t, u) + self.y.dot(u) + 0.5 * u.dot(&(&self.k * u))
    }

    fn gradient_into(&self, t: f64, u: &State, out: &mut State) {
        self.inner.gradient_into(t, u, out);
        *out += &self.y + &self.k * u;
    }

    fn hessian_into(&self, t: f64, u: &State, out: &mut Matrix) {
        self.inner.hessian_into(t, u, out);
        *out += &self.k;
    }

    fn power(&self, t: f64, u: &State) -> f64 {
        self.inner.power(t, u)
    }

    fn third_directional(&self, t: f64, u: &State, v: &State) -> f64 {
        // the added term is quadratic, so the cubic part is untouched
        self.inner.third_directional(t, u, v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s1(x: f64) -> State {
        State::from_vec(vec![x])
    }

    #[test]
    fn quadratic_track_critical_point() {
        let m =
            EnergyModel::quadratic_track(s1(0.0), s1(1.0), 1.0).unwrap();
        assert_eq!(m.gradient(0.5, &s1(0.5))[0], 0.0);
        assert_eq!(m.value(0.5, &s1(0.5)), 0.0);
    }

    #[test]
    fn tilted_double_well_gradient_and_third() {
        let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
        // u = 1 is critical at t = 0
        assert!(m.gradient(0.0, &s1(1.0))[0].abs() < 1e-15);
        let ustar = -1.0 / 3.0f64.sqrt();
        let d3 = m.third_directional(0.2, &s1(ustar), &s1(1.0));
        assert!((d3 - 6.0 * ustar).abs() < 1e-12);
        // and it agrees with the finite-difference fallback on the Hessian
        let h = 1e-5;
        let fd = (m.hessian(0.2, &s1(ustar + h))[(0, 0)]
            - m.hessian(0.2, &s1(ustar - h))[(0, 0)])
            / (2.0 * h);
        assert!((d3 - fd).abs() < 1e-9);
    }

    #[test]
    fn builtin_energies_are_nonnegative() {
        let models = [
            EnergyModel::tilted_double_well(1.0, 1.0).unwrap(),
            EnergyModel::double_well_2d(1.0, 1.0).unwrap(),
            EnergyModel::quadratic_track(s1(0.0), s1(1.0), 1.0).unwrap(),
        ];
        for m in &models {
            let sbox = SampleBox::centered(m.dim(), 2.5);
            let mut h = Halton::new(m.dim() + 1, 3);
            for _ in 0..500 {
                let q = h.next_point();
                let t = q[m.dim()] * m.horizon();
                let u = sbox.map_unit(&q[..m.dim()]);
                assert!(m.value(t, &u) >= 0.0, "{} went negative", m.name());
            }
        }
    }

    #[test]
    fn make_builtin_errors() {
        let empty = BTreeMap::new();
        assert!(matches!(
            EnergyModel::make_builtin("no_such_family", &empty),
            Err(EnergyError::UnknownFamily(_))
        ));
        assert!(matches!(
            EnergyModel::make_builtin("quadratic_track", &empty),
            Err(EnergyError::MissingParameter { .. })
        ));
        let mut bad = BTreeMap::new();
        bad.insert("T".to_string(), -1.0);
        assert!(matches!(
            EnergyModel::make_builtin("tilted_double_well", &bad),
            Err(EnergyError::NonPositiveHorizon(_))
        ));
    }

    #[test]
    fn validation_passes_builtins_and_flags_broken_gradient() {
        let sbox = SampleBox::centered(1, 2.0);
        let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
        let rep = m.validate_derivatives(&sbox, 100, 1e-5, 1e-6).unwrap();
        assert!(rep.pass, "{rep:?}");

        struct FlippedGradient(Arc<dyn EnergyFn>);
        impl EnergyFn for FlippedGradient {
            fn dim(&self) -> usize {
                self.0.dim()
            }
            fn value(&self, t: f64, u: &State) -> f64 {
                self.0.value(t, u)
            }
            fn gradient_into(&self, t: f64, u: &State, out: &mut State) {
                self.0.gradient_into(t, u, out);
                *out *= -1.0;
            }
            fn hessian_into(&self, t: f64, u: &State, out: &mut Matrix) {
                self.0.hessian_into(t, u, out);
            }
            fn power(&self, t: f64, u: &State) -> f64 {
                self.0.power(t, u)
            }
        }
        let broken = EnergyModel::from_fn(
            "flipped",
            1.0,
            Arc::new(FlippedGradient(
                EnergyModel::tilted_double_well(1.0, 1.0).unwrap().f,
            )),
        )
        .unwrap();
        let rep = broken.validate_derivatives(&sbox, 50, 1e-5, 1e-6).unwrap();
        assert!(!rep.pass);
    }

    #[test]
    fn perturbation_identities() {
        let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
        let zero = m
            .perturb_generic(&s1(0.0), &Matrix::zeros(1, 1))
            .unwrap();
        let shifted = m
            .perturb_generic(&s1(0.1), &Matrix::zeros(1, 1))
            .unwrap();
        let curved = m
            .perturb_generic(&s1(0.0), &Matrix::from_element(1, 1, 0.05))
            .unwrap();
        let mut h = Halton::new(2, 11);
        for _ in 0..10 {
            let q = h.next_point();
            let t = q[1];
            let u = s1(4.0 * q[0] - 2.0);
            assert_eq!(zero.value(t, &u), m.value(t, &u));
            assert_eq!(zero.gradient(t, &u), m.gradient(t, &u));
            assert!(
                (shifted.gradient(t, &u)[0] - m.gradient(t, &u)[0] - 0.1).abs() < 1e-15
            );
            assert!(
                (curved.hessian(t, &u)[(0, 0)] - m.hessian(t, &u)[(0, 0)] - 0.05).abs()
                    < 1e-15
            );
            // autonomous perturbation: power untouched
            assert_eq!(curved.power(t, &u), m.power(t, &u));
            assert_eq!(shifted.power(t, &u), m.power(t, &u));
        }
    }

    #[test]
    fn perturbation_rejects_asymmetric_matrix() {
        let m = EnergyModel::double_well_2d(1.0, 1.0).unwrap();
        let mut k = Matrix::zeros(2, 2);
        k[(0, 1)] = 0.1;
        assert!(matches!(
            m.perturb_generic(&State::zeros(2), &k),
            Err(EnergyError::NonSymmetricPerturbation)
        ));
    }

    #[test]
    fn power_control_examples() {
        let sbox = SampleBox::centered(1, 2.0);
        let grid = PowerGrid::new(sbox.clone(), 40, 9);

        // autonomous energy: exact (0, 0)
        let frozen = EnergyModel::tilted_double_well(0.0, 1.0).unwrap();
        let est = frozen.check_power_control(&grid).unwrap();
        assert_eq!((est.c1, est.c2, est.violation_count), (0.0, 0.0, 0));

        for m in [
            EnergyModel::tilted_double_well(1.0, 1.0).unwrap(),
            EnergyModel::quadratic_track(s1(0.0), s1(1.0), 1.0).unwrap(),
        ] {
            let est = m.check_power_control(&grid).unwrap();
            assert_eq!(est.violation_count, 0, "{est:?}");
            assert!(est.c1.is_finite() && est.c2.is_finite());
            assert!(est.c1 >= 0.0 && est.c2 >= 0.0);
        }
    }

    #[test]
    fn coercivity_positive_and_negative() {
        let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
        let sbox = SampleBox::centered(1, 4.0);
        let rep = m.check_coercivity(10.0, &sbox).unwrap();
        assert!(rep.bounded);
        assert!(rep.radius < 4.0);

        let q = EnergyModel::quadratic_track(s1(0.0), s1(1.0), 1.0).unwrap();
        let rep = q.check_coercivity(1.0, &SampleBox::centered(1, 4.0)).unwrap();
        assert!(rep.bounded);

        struct Bump;
        impl EnergyFn for Bump {
            fn dim(&self) -> usize {
                1
            }
            fn value(&self, _t: f64, u: &State) -> f64 {
                (-u[0] * u[0]).exp()
            }
            fn gradient_into(&self, _t: f64, u: &State, out: &mut State) {
                out[0] = -2.0 * u[0] * (-u[0] * u[0]).exp();
            }
            fn hessian_into(&self, _t: f64, u: &State, out: &mut Matrix) {
                let x = u[0];
                out[(0, 0)] = (4.0 * x * x - 2.0) * (-x * x).exp();
            }
            fn power(&self, _t: f64, _u: &State) -> f64 {
                0.0
            }
        }
        let bump = EnergyModel::from_fn("gaussian_bump", 1.0, Arc::new(Bump)).unwrap();
        let rep = bump.check_coercivity(0.5, &SampleBox::centered(1, 4.0)).unwrap();
        assert!(!rep.bounded, "exp(-u^2) sublevels are unbounded");
    }

    #[test]
    fn polynomial_energy_matches_closed_form() {
        // u^4/4 - u^2/2 + t * u  (tilt direction +1, l(t) = t)
        let m = EnergyModel::polynomial(
            "quartic",
            1,
            vec![(vec![4], 0.25), (vec![2], -0.5)],
            Some((s1(1.0), vec![0.0, 1.0])),
            1.0,
        )
        .unwrap();
        let u = s1(1.3);
        let t = 0.7;
        let expect = 0.25 * 1.3f64.powi(4) - 0.5 * 1.3 * 1.3 + 0.7 * 1.3;
        assert!((m.value(t, &u) - expect).abs() < 1e-14);
        assert!((m.gradient(t, &u)[0] - (1.3f64.powi(3) - 1.3 + 0.7)).abs() < 1e-14);
        assert!((m.hessian(t, &u)[(0, 0)] - (3.0 * 1.3 * 1.3 - 1.0)).abs() < 1e-14);
        assert!((m.power(t, &u) - 1.3).abs() < 1e-14);
        assert!((m.third_directional(t, &u, &s1(1.0)) - 6.0 * 1.3).abs() < 1e-12);
        let rep = m
            .validate_derivatives(&SampleBox::centered(1, 2.0), 60, 1e-5, 1e-6)
            .unwrap();
        assert!(rep.pass, "{rep:?}");
    }
}
