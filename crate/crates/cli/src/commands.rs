//! Subcommand implementations. Each writes its module's artifacts through
//! the sink; numerical failures carry a diagnostic naming the violated
//! invariant and map to exit code 2.

use std::fmt::Write as _;

use anyhow::{anyhow, Result};
use bvflow_core::cost::{check_cost_properties, CostOracle, GridSpec};
use bvflow_core::critical::{
    check_e4, check_transversality, continue_branch, estimate_lojasiewicz, find_critical,
    sym_eigs, BranchTermination, ContinuationOpts, CriticalOpts, TransversalityOpts,
};
use bvflow_core::energy::EnergyModel;
use bvflow_core::flow::{integrate, IntegrateOpts, Trajectory};
use bvflow_core::limit::{
    compare_vanishing_viscosity, construct_bv, energy_balance_residual, BvOpts,
};
use bvflow_core::sample::SampleBox;
use bvflow_core::transition::{chain_rule_residual, solve_heteroclinic, HeteroclinicOpts};
use bvflow_core::State;

use crate::config::{state_from, RunConfig};
use crate::output::{
    branch_csv, bv_jumps_csv, bv_segments_csv, convergence_csv, eps_tag,
    fmt_f, lojasiewicz_report, trajectory_csv, transition_csv, transversality_report,
    OutputSink,
};

/// Failure class decides the process exit code.
pub enum CmdError {
    Config(anyhow::Error),
    Numeric(anyhow::Error),
}

pub type CmdResult = Result<(), CmdError>;

fn cfg_err<T>(e: anyhow::Error) -> Result<T, CmdError> {
    Err(CmdError::Config(e))
}

fn num_err<T>(e: anyhow::Error) -> Result<T, CmdError> {
    Err(CmdError::Numeric(e))
}

fn build_model(cfg: &RunConfig) -> Result<EnergyModel, CmdError> {
    cfg.model.build().map_err(CmdError::Config)
}

fn sink_write(sink: &mut OutputSink, name: &str, content: &str) -> Result<(), CmdError> {
    sink.write(name, content).map_err(CmdError::Config)
}

fn threads_from_env() -> usize {
    std::env::var("BVFLOW_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

pub fn run_validate(cfg: &RunConfig, sink: &mut OutputSink) -> CmdResult {
    let v = &cfg.validate;
    if v.n_samples == 0 || v.h <= 0.0 || v.tol <= 0.0 {
        return cfg_err(anyhow!("validate: need n_samples >= 1, h > 0, tol > 0"));
    }
    let mut models = vec![build_model(cfg)?];
    for fam in &v.families {
        if fam == cfg.model.family.as_str() {
            continue;
        }
        let mut params = std::collections::BTreeMap::new();
        params.insert("T".to_string(), cfg.model.horizon);
        if fam == "quadratic_track" {
            params.insert("a1.0".to_string(), 1.0);
        }
        let m = EnergyModel::make_builtin(fam, &params)
            .map_err(|e| CmdError::Config(anyhow!("validate family `{fam}`: {e}")))?;
        models.push(m);
    }
    let mut failures = Vec::new();
    for m in &models {
        let sbox = match &v.sample_box {
            Some(b) => b.to_box().map_err(CmdError::Config)?,
            None => SampleBox::centered(m.dim(), 2.0),
        };
        let rep = m
            .validate_derivatives(&sbox, v.n_samples, v.h, v.tol)
            .map_err(|e| CmdError::Numeric(anyhow!("{}: {e}", m.name())))?;
        let mut text = String::new();
        let _ = writeln!(text, "model={}", m.name());
        let _ = writeln!(text, "max_rel_error_gradient={}", fmt_f(rep.max_rel_error_gradient));
        let _ = writeln!(text, "max_rel_error_hessian={}", fmt_f(rep.max_rel_error_hessian));
        let _ = writeln!(text, "max_rel_error_power={}", fmt_f(rep.max_rel_error_power));
        let _ = writeln!(text, "sample_count={}", rep.sample_count);
        let _ = writeln!(text, "tol={}", fmt_f(v.tol));
        let _ = writeln!(text, "pass={}", rep.pass);
        sink_write(sink, &format!("validation_{}.txt", m.name()), &text)?;
        println!(
            "validate {}: pass={} (grad {:.2e}, hess {:.2e}, power {:.2e})",
            m.name(),
            rep.pass,
            rep.max_rel_error_gradient,
            rep.max_rel_error_hessian,
            rep.max_rel_error_power
        );
        if !rep.pass {
            failures.push(m.name().to_string());
        }
    }
    if !failures.is_empty() {
        return num_err(anyhow!(
            "derivative validation failed for: {} (max relative error above tol)",
            failures.join(", ")
        ));
    }
    Ok(())
}

fn integrate_ladder(
    model: &EnergyModel,
    epsilons: &[f64],
    u0: &State,
    span: (f64, f64),
    opts: &IntegrateOpts,
) -> Vec<Result<Trajectory, bvflow_core::flow::FlowError>> {
    let threads = threads_from_env();
    if threads <= 1 || epsilons.len() <= 1 {
        return epsilons
            .iter()
            .map(|&eps| integrate(model, eps, u0, span, opts))
            .collect();
    }
    let mut results: Vec<Option<_>> = (0..epsilons.len()).map(|_| None).collect();
    let mut idx = 0;
    while idx < epsilons.len() {
        let hi = (idx + threads).min(epsilons.len());
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for k in idx..hi {
                let eps = epsilons[k];
                handles.push((
                    k,
                    scope.spawn(move || integrate(model, eps, u0, span, opts)),
                ));
            }
            for (k, h) in handles {
                results[k] = Some(h.join().expect("integration worker panicked"));
            }
        });
        idx = hi;
    }
    results.into_iter().map(|r| r.unwrap()).collect()
}

pub fn run_simulate(cfg: &RunConfig, sink: &mut OutputSink) -> CmdResult {
    let model = build_model(cfg)?;
    let s = &cfg.simulate;
    if s.epsilons.is_empty() {
        return cfg_err(anyhow!("simulate: epsilons must be nonempty"));
    }
    if s.epsilons.iter().any(|&e| e <= 0.0) {
        return cfg_err(anyhow!("simulate: every epsilon must be positive"));
    }
    if s.u0.len() != model.dim() {
        return cfg_err(anyhow!(
            "simulate: u0 has dim {}, model has dim {}",
            s.u0.len(),
            model.dim()
        ));
    }
    if s.audit_tol <= 0.0 || s.newton_tol <= 0.0 {
        return cfg_err(anyhow!("simulate: tolerances must be positive"));
    }
    let span = match s.t_span {
        Some([a, b]) => (a, b),
        None => (0.0, model.horizon()),
    };
    let opts = IntegrateOpts {
        newton_tol: s.newton_tol,
        audit_tol: s.audit_tol,
        dt_init: s.dt_init.filter(|&x| x > 0.0),
        dt_max: s.dt_max.filter(|&x| x > 0.0),
        max_nodes: s.max_nodes,
        ..Default::default()
    };
    let u0 = state_from(&s.u0);
    let results = integrate_ladder(&model, &s.epsilons, &u0, span, &opts);
    for (eps, res) in s.epsilons.iter().zip(results) {
        let traj = match res {
            Ok(t) => t,
            Err(e) => return num_err(anyhow!("integration at epsilon={eps}: {e}")),
        };
        let res_full = traj
            .energy_identity_residual(&model, span.0, span.1)
            .map_err(|e| CmdError::Numeric(anyhow!("{e}")))?;
        println!(
            "simulate eps={eps:.3e}: {} steps, identity residual {res_full:.3e}",
            traj.accepted_steps
        );
        sink_write(sink, &format!("traj_eps_{}.csv", eps_tag(*eps)), &trajectory_csv(&traj))?;
    }
    Ok(())
}

pub fn run_branches(cfg: &RunConfig, sink: &mut OutputSink) -> CmdResult {
    let model = build_model(cfg)?;
    let b = &cfg.branches;
    let sbox = b.search_box.to_box().map_err(CmdError::Config)?;
    if sbox.dim() != model.dim() {
        return cfg_err(anyhow!("branches: box dim != model dim"));
    }
    if b.t0 < 0.0 || b.t0 > model.horizon() {
        return cfg_err(anyhow!("branches: t0 outside [0, T]"));
    }
    let copts = CriticalOpts {
        newton_tol: b.newton_tol,
        ..Default::default()
    };
    let catalog = find_critical(&model, b.t0, &sbox, b.n_starts, &copts);
    println!(
        "branches: {} critical points at t0={}, isolation gap {:.3e}",
        catalog.points.len(),
        b.t0,
        catalog.min_pairwise_gap
    );

    let mut cp_csv = String::from("t");
    for i in 1..=model.dim() {
        let _ = write!(cp_csv, ",u_{i}");
    }
    cp_csv.push_str(",grad_norm,lambda_min,kind\n");
    for p in &catalog.points {
        let _ = write!(cp_csv, "{}", fmt_f(p.t));
        for i in 0..model.dim() {
            let _ = write!(cp_csv, ",{}", fmt_f(p.u[i]));
        }
        let _ = writeln!(cp_csv, ",{},{},{}", fmt_f(p.grad_norm), fmt_f(p.hess_eigs[0]), p.kind);
    }
    sink_write(sink, "critical_points.csv", &cp_csv)?;

    let mut summary = String::new();
    let _ = writeln!(summary, "t0={}", fmt_f(b.t0));
    let _ = writeln!(summary, "n_points={}", catalog.points.len());
    let _ = writeln!(summary, "isolation_gap={}", fmt_f(catalog.min_pairwise_gap));

    let conts = ContinuationOpts {
        arc_step: b.arc_step,
        newton_tol: b.newton_tol,
        domain: sbox.clone(),
        ..ContinuationOpts::new(model.dim())
    };
    for (k, p) in catalog.points.iter().enumerate() {
        let branch = continue_branch(&model, p, 1.0, &conts)
            .map_err(|e| CmdError::Numeric(anyhow!("continuation from point {k}: {e}")))?;
        let term = match &branch.termination {
            BranchTermination::Fold { t_star, u_star } => {
                let rep =
                    check_transversality(&model, *t_star, u_star, &TransversalityOpts::default())
                        .map_err(|e| CmdError::Numeric(anyhow!("transversality: {e}")))?;
                sink_write(
                    sink,
                    &format!("transversality_{k}.txt"),
                    &transversality_report(&rep),
                )?;
                format!("fold at t={}", fmt_f(*t_star))
            }
            BranchTermination::ReachedTimeBoundary => "time_boundary".to_string(),
            BranchTermination::LeftDomain => "left_domain".to_string(),
        };
        let _ = writeln!(summary, "branch_{k}_termination={term}");
        sink_write(sink, &format!("branch_{k}.csv"), &branch_csv(&branch))?;

        // Lojasiewicz / E4 diagnostics at the seed point
        match estimate_lojasiewicz(&model, b.t0, &p.u, &b.loja_radii, b.n_dirs) {
            Ok(fit) => {
                let e4 = check_e4(&model, b.t0, &p.u, &b.loja_radii, b.n_dirs, 1e-2)
                    .map_err(|e| CmdError::Numeric(anyhow!("E4 check: {e}")))?;
                sink_write(
                    sink,
                    &format!("lojasiewicz_{k}.txt"),
                    &lojasiewicz_report(&format!("point_{k}"), &fit, e4.holds, e4.max_ratio),
                )?;
            }
            Err(e) => {
                let _ = writeln!(summary, "lojasiewicz_{k}=unavailable ({e})");
            }
        }
    }
    sink_write(sink, "branches_report.txt", &summary)?;
    Ok(())
}

pub fn run_jump(cfg: &RunConfig, sink: &mut OutputSink) -> CmdResult {
    let model = build_model(cfg)?;
    let j = &cfg.jump;
    if j.u_from.len() != model.dim() {
        return cfg_err(anyhow!("jump: u_from has the wrong dimension"));
    }
    let sbox = j.search_box.to_box().map_err(CmdError::Config)?;
    let u_from = state_from(&j.u_from);
    let opts = HeteroclinicOpts::new(sbox);
    let delta = j.delta.unwrap_or_else(|| opts.default_delta());
    if delta <= 0.0 {
        return cfg_err(anyhow!("jump: delta must be positive"));
    }
    let direction = match &j.direction {
        Some(d) => {
            if d.len() != model.dim() {
                return cfg_err(anyhow!("jump: direction has the wrong dimension"));
            }
            state_from(d)
        }
        None => {
            let (_, vecs) = sym_eigs(&model.hessian(j.t_star, &u_from));
            vecs.column(0).into_owned()
        }
    };
    let tr = solve_heteroclinic(&model, j.t_star, &u_from, &direction, delta, &opts)
        .map_err(|e| CmdError::Numeric(anyhow!("heteroclinic: {e}")))?;
    let drop = model.value(j.t_star, &tr.u_minus) - model.value(j.t_star, &tr.u_plus);
    let chain = chain_rule_residual(&tr.path, &model, j.t_star);
    let mut rep = String::new();
    let _ = writeln!(rep, "t_star={}", fmt_f(j.t_star));
    let _ = writeln!(rep, "converged={}", tr.converged);
    for i in 0..model.dim() {
        let _ = writeln!(rep, "u_plus_{}={}", i + 1, fmt_f(tr.u_plus[i]));
    }
    let _ = writeln!(rep, "cost={}", fmt_f(tr.cost));
    let _ = writeln!(rep, "energy_drop={}", fmt_f(drop));
    let _ = writeln!(rep, "arclength={}", fmt_f(tr.arclength));
    let _ = writeln!(rep, "landing_grad_norm={}", fmt_f(tr.landing_grad_norm));
    let _ = writeln!(rep, "chain_rule_residual={}", fmt_f(chain));
    sink_write(sink, "jump_report.txt", &rep)?;
    sink_write(sink, "transition.csv", &transition_csv(&tr, &model))?;
    println!(
        "jump at t*={}: converged={}, cost={:.6}, drop={:.6}",
        j.t_star, tr.converged, tr.cost, drop
    );
    Ok(())
}

pub fn run_cost(cfg: &RunConfig, sink: &mut OutputSink) -> CmdResult {
    let model = build_model(cfg)?;
    let c = &cfg.cost;
    if c.points.len() < 2 {
        return cfg_err(anyhow!("cost: need at least two points"));
    }
    let points: Vec<State> = c.points.iter().map(|p| state_from(p)).collect();
    if points.iter().any(|p| p.len() != model.dim()) {
        return cfg_err(anyhow!("cost: point dimension mismatch"));
    }
    let oracle = match c.oracle.as_str() {
        "quadrature_1d" => CostOracle::Quadrature1d { n_quad: c.n_quad },
        "grid_dijkstra" => {
            let b = c
                .grid_box
                .as_ref()
                .ok_or_else(|| CmdError::Config(anyhow!("cost: grid oracle needs grid_box")))?;
            CostOracle::GridDijkstra {
                grid: GridSpec::new(b.to_box().map_err(CmdError::Config)?, c.mesh),
            }
        }
        other => return cfg_err(anyhow!("cost: unknown oracle `{other}`")),
    };
    let rep = check_cost_properties(&model, c.t, &points, &oracle)
        .map_err(|e| CmdError::Numeric(anyhow!("cost oracle: {e}")))?;

    let mut rows = String::from("i,j,value,method,resolution\n");
    for i in 0..rep.n_points {
        for jj in 0..rep.n_points {
            if i == jj {
                continue;
            }
            let _ = writeln!(
                rows,
                "{i},{jj},{},{},{}",
                fmt_f(rep.values[i][jj]),
                c.oracle,
                fmt_f(rep.resolution)
            );
        }
    }
    sink_write(sink, "cost_matrix.csv", &rows)?;

    let mut text = String::new();
    let _ = writeln!(text, "t={}", fmt_f(c.t));
    let _ = writeln!(text, "n_points={}", rep.n_points);
    let _ = writeln!(text, "resolution={}", fmt_f(rep.resolution));
    let _ = writeln!(text, "positivity_ok={}", rep.positivity_ok);
    let _ = writeln!(text, "symmetry_ok={}", rep.symmetry_ok);
    let _ = writeln!(text, "triangle_ok={}", rep.triangle_ok);
    let _ = writeln!(text, "lsc_ok={}", rep.lsc_ok);
    sink_write(sink, "cost_report.txt", &text)?;
    println!(
        "cost: positivity={} symmetry={} triangle={} lsc={}",
        rep.positivity_ok, rep.symmetry_ok, rep.triangle_ok, rep.lsc_ok
    );
    if !rep.pass() {
        let mut bad = Vec::new();
        if !rep.positivity_ok {
            bad.push("positivity");
        }
        if !rep.symmetry_ok {
            bad.push("symmetry");
        }
        if !rep.triangle_ok {
            bad.push("triangle inequality");
        }
        if !rep.lsc_ok {
            bad.push("lower semicontinuity");
        }
        return num_err(anyhow!("cost metric properties violated: {}", bad.join(", ")));
    }
    Ok(())
}

fn build_bv(
    cfg: &RunConfig,
    model: &EnergyModel,
) -> Result<(bvflow_core::limit::BvSolution, (f64, f64)), CmdError> {
    let l = &cfg.limit;
    if l.u0.len() != model.dim() {
        return cfg_err(anyhow!("limit: u0 has the wrong dimension"));
    }
    let sbox = l.search_box.to_box().map_err(CmdError::Config)?;
    let span = match l.t_span {
        Some([a, b]) => (a, b),
        None => (0.0, model.horizon()),
    };
    if span.0 >= span.1 || span.0 < 0.0 || span.1 > model.horizon() {
        return cfg_err(anyhow!("limit: bad t_span"));
    }
    let mut opts = BvOpts::new(sbox);
    opts.max_jumps = l.max_jumps;
    let bv = construct_bv(model, &state_from(&l.u0), span, &opts)
        .map_err(|e| CmdError::Numeric(anyhow!("limit construction: {e}")))?;
    Ok((bv, span))
}

fn write_bv(
    sink: &mut OutputSink,
    model: &EnergyModel,
    bv: &bvflow_core::limit::BvSolution,
    span: (f64, f64),
) -> CmdResult {
    sink_write(sink, "bv_segments.csv", &bv_segments_csv(bv))?;
    sink_write(sink, "bv_jumps.csv", &bv_jumps_csv(bv))?;
    for (k, j) in bv.jumps.iter().enumerate() {
        sink_write(
            sink,
            &format!("bv_transition_{k}.csv"),
            &transition_csv(&j.transition, model),
        )?;
    }
    let mut text = String::new();
    let _ = writeln!(text, "t_span={},{}", fmt_f(span.0), fmt_f(span.1));
    let _ = writeln!(text, "n_segments={}", bv.segments.len());
    let _ = writeln!(text, "n_jumps={}", bv.jumps.len());
    for (k, j) in bv.jumps.iter().enumerate() {
        let _ = writeln!(text, "jump_{k}_t={}", fmt_f(j.t));
        let _ = writeln!(text, "jump_{k}_mass={}", fmt_f(j.mass));
        let _ = writeln!(text, "jump_{k}_cost={}", fmt_f(j.transition.cost));
    }
    let full = energy_balance_residual(bv, model, span.0, span.1);
    let _ = writeln!(text, "balance_residual_full_span={}", fmt_f(full));
    sink_write(sink, "bv_summary.txt", &text)?;
    println!(
        "limit: {} segments, {} jumps, full-span balance residual {full:.3e}",
        bv.segments.len(),
        bv.jumps.len()
    );
    Ok(())
}

pub fn run_limit(cfg: &RunConfig, sink: &mut OutputSink) -> CmdResult {
    let model = build_model(cfg)?;
    let (bv, span) = build_bv(cfg, &model)?;
    write_bv(sink, &model, &bv, span)
}

pub fn run_compare(cfg: &RunConfig, sink: &mut OutputSink) -> CmdResult {
    let model = build_model(cfg)?;
    let l = &cfg.limit;
    if l.epsilons.is_empty() {
        return cfg_err(anyhow!("compare: epsilons must be nonempty"));
    }
    if l.epsilons.iter().any(|&e| e <= 0.0) {
        return cfg_err(anyhow!("compare: every epsilon must be positive"));
    }
    if l.epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return cfg_err(anyhow!("compare: epsilons must be strictly decreasing"));
    }
    let (bv, span) = build_bv(cfg, &model)?;
    write_bv(sink, &model, &bv, span)?;

    let jump_set = bv.jump_set();
    let mut samples = Vec::new();
    for k in 0..l.n_samples {
        let t = span.0 + (span.1 - span.0) * k as f64 / (l.n_samples - 1).max(1) as f64;
        if jump_set.iter().all(|&tj| (t - tj).abs() >= l.exclusion_radius) {
            samples.push(t);
        }
    }
    let opts = IntegrateOpts {
        audit_tol: l.audit_tol,
        max_nodes: l.max_nodes,
        ..Default::default()
    };
    let rep = compare_vanishing_viscosity(
        &model,
        &state_from(&l.u0),
        &l.epsilons,
        &bv,
        &samples,
        l.exclusion_radius,
        l.window_halfwidth,
        &opts,
    )
    .map_err(|e| CmdError::Numeric(anyhow!("comparison: {e}")))?;

    sink_write(sink, "convergence.csv", &convergence_csv(&rep))?;
    let mut text = String::new();
    let _ = writeln!(text, "n_samples={}", samples.len());
    let _ = writeln!(text, "exclusion_radius={}", fmt_f(l.exclusion_radius));
    let _ = writeln!(text, "window_halfwidth={}", fmt_f(l.window_halfwidth));
    let _ = writeln!(text, "sup_strictly_decreasing={}", rep.sup_strictly_decreasing);
    let _ = writeln!(text, "window_mass_converged={}", rep.window_mass_converged);
    if let Some(last) = rep.rows.last() {
        let _ = writeln!(text, "final_sup_distance={}", fmt_f(last.sup_distance));
        let _ = writeln!(text, "final_outside_mass={}", fmt_f(last.outside_mass));
        for (k, m) in last.window_masses.iter().enumerate() {
            let _ = writeln!(text, "final_mass_window_{k}={}", fmt_f(*m));
        }
    }
    for (k, a) in rep.atom_masses.iter().enumerate() {
        let _ = writeln!(text, "atom_{k}={}", fmt_f(*a));
    }
    sink_write(sink, "compare_report.txt", &text)?;
    for row in &rep.rows {
        println!(
            "compare eps={:.3e}: sup distance {:.4e}, outside mass {:.4e}",
            row.epsilon, row.sup_distance, row.outside_mass
        );
    }

    if cfg.output.write_trajectories {
        let u0 = state_from(&l.u0);
        let results = integrate_ladder(&model, &l.epsilons, &u0, span, &opts);
        for (eps, res) in l.epsilons.iter().zip(results) {
            let traj =
                res.map_err(|e| CmdError::Numeric(anyhow!("integration at eps={eps}: {e}")))?;
            sink_write(
                sink,
                &format!("traj_eps_{}.csv", eps_tag(*eps)),
                &trajectory_csv(&traj),
            )?;
        }
    }
    Ok(())
}
