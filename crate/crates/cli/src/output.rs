//! Artifact sink: every emitted file is hashed and listed in a MANIFEST so a
//! run can be diffed byte for byte. Floats are printed with 17 significant
//! digits, which round-trips f64 exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use bvflow_core::critical::{CriticalBranch, LojasiewiczFit, TransversalityReport};
use bvflow_core::energy::EnergyModel;
use bvflow_core::flow::Trajectory;
use bvflow_core::limit::{BvSolution, ConvergenceReport};
use bvflow_core::transition::JumpTransition;
use sha2::{Digest, Sha256};

pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

/// Short deterministic tag for an epsilon value, used in file names.
pub fn eps_tag(eps: f64) -> String {
    format!("{eps:e}").replace('.', "p")
}

pub struct OutputSink {
    dir: PathBuf,
    entries: Vec<(String, String)>,
}

impl OutputSink {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output dir {}", dir.display()))?;
        Ok(OutputSink {
            dir: dir.to_path_buf(),
            entries: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, content: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, content)
            .with_context(|| format!("cannot write {}", path.display()))?;
        let mut hasher = Sha256::new();
        hasher.update(content.as_bytes());
        let hex: String = hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        self.entries.push((name.to_string(), hex));
        Ok(())
    }

    /// Write the MANIFEST (one `path<TAB>sha-256` line per emitted file).
    /// Called on success and on partial failure alike.
    pub fn finish(&self) -> Result<()> {
        let mut text = String::new();
        for (name, hash) in &self.entries {
            let _ = writeln!(text, "{name}\t{hash}");
        }
        std::fs::write(self.dir.join("MANIFEST"), text).context("cannot write MANIFEST")
    }
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let d = traj.dim();
    let mut s = String::with_capacity(traj.times.len() * 90);
    s.push('t');
    for i in 1..=d {
        let _ = write!(s, ",u_{i}");
    }
    s.push_str(",energy,power,diss_density,step_residual\n");
    for k in 0..traj.times.len() {
        let _ = write!(s, "{}", fmt_f(traj.times[k]));
        for i in 0..d {
            let _ = write!(s, ",{}", fmt_f(traj.states[k][i]));
        }
        let _ = writeln!(
            s,
            ",{},{},{},{}",
            fmt_f(traj.energies[k]),
            fmt_f(traj.powers[k]),
            fmt_f(traj.diss_density[k]),
            fmt_f(traj.step_residuals[k]),
        );
    }
    s
}

pub fn branch_csv(branch: &CriticalBranch) -> String {
    let d = branch.samples[0].u.len();
    let mut s = String::from("t");
    for i in 1..=d {
        let _ = write!(s, ",u_{i}");
    }
    s.push_str(",grad_norm,lambda_min,kind\n");
    for p in &branch.samples {
        let _ = write!(s, "{}", fmt_f(p.t));
        for i in 0..d {
            let _ = write!(s, ",{}", fmt_f(p.u[i]));
        }
        let _ = writeln!(
            s,
            ",{},{},{}",
            fmt_f(p.grad_norm),
            fmt_f(p.hess_eigs[0]),
            p.kind
        );
    }
    s
}

pub fn transition_csv(tr: &JumpTransition, model: &EnergyModel) -> String {
    let d = tr.path[0].len();
    let mut s = String::from("s");
    for i in 1..=d {
        let _ = write!(s, ",theta_{i}");
    }
    s.push_str(",grad_norm,cum_cost,cum_arclength\n");
    let mut cum_cost = 0.0;
    let mut cum_arc = 0.0;
    let mut g_prev = model.grad_norm(tr.t_star, &tr.path[0]);
    for k in 0..tr.path.len() {
        if k > 0 {
            let g = model.grad_norm(tr.t_star, &tr.path[k]);
            let seg = (&tr.path[k] - &tr.path[k - 1]).norm();
            cum_cost += 0.5 * (g_prev + g) * seg;
            cum_arc += seg;
            g_prev = g;
        }
        let _ = write!(s, "{}", fmt_f(tr.s[k]));
        for i in 0..d {
            let _ = write!(s, ",{}", fmt_f(tr.path[k][i]));
        }
        let _ = writeln!(
            s,
            ",{},{},{}",
            fmt_f(model.grad_norm(tr.t_star, &tr.path[k])),
            fmt_f(cum_cost),
            fmt_f(cum_arc),
        );
    }
    s
}

pub fn convergence_csv(rep: &ConvergenceReport) -> String {
    let n_win = rep.windows.len();
    let mut s = String::from("epsilon,sup_distance");
    for k in 1..=n_win {
        let _ = write!(s, ",mass_window_{k}");
    }
    s.push_str(",mass_outside\n");
    for row in &rep.rows {
        let _ = write!(s, "{},{}", fmt_f(row.epsilon), fmt_f(row.sup_distance));
        for m in &row.window_masses {
            let _ = write!(s, ",{}", fmt_f(*m));
        }
        let _ = writeln!(s, ",{}", fmt_f(row.outside_mass));
    }
    s
}

pub fn bv_segments_csv(bv: &BvSolution) -> String {
    let d = bv.segments[0].branch.samples[0].u.len();
    let mut s = String::from("segment,t");
    for i in 1..=d {
        let _ = write!(s, ",u_{i}");
    }
    s.push_str(",grad_norm,lambda_min,kind\n");
    for (k, seg) in bv.segments.iter().enumerate() {
        for p in &seg.branch.samples {
            let _ = write!(s, "{k},{}", fmt_f(p.t));
            for i in 0..d {
                let _ = write!(s, ",{}", fmt_f(p.u[i]));
            }
            let _ = writeln!(
                s,
                ",{},{},{}",
                fmt_f(p.grad_norm),
                fmt_f(p.hess_eigs[0]),
                p.kind
            );
        }
    }
    s
}

pub fn bv_jumps_csv(bv: &BvSolution) -> String {
    let d = bv.segments[0].branch.samples[0].u.len();
    let mut s = String::from("t");
    for i in 1..=d {
        let _ = write!(s, ",u_minus_{i}");
    }
    for i in 1..=d {
        let _ = write!(s, ",u_plus_{i}");
    }
    s.push_str(",cost,arclength,mass\n");
    for j in &bv.jumps {
        let _ = write!(s, "{}", fmt_f(j.t));
        for i in 0..d {
            let _ = write!(s, ",{}", fmt_f(j.u_minus[i]));
        }
        for i in 0..d {
            let _ = write!(s, ",{}", fmt_f(j.u_plus[i]));
        }
        let _ = writeln!(
            s,
            ",{},{},{}",
            fmt_f(j.transition.cost),
            fmt_f(j.transition.arclength),
            fmt_f(j.mass)
        );
    }
    s
}

pub fn transversality_report(rep: &TransversalityReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "t_star={}", fmt_f(rep.t_star));
    for (i, x) in rep.u_star.iter().enumerate() {
        let _ = writeln!(s, "u_star_{}={}", i + 1, fmt_f(*x));
    }
    let _ = writeln!(s, "null_dim={}", rep.null_dim);
    let _ = writeln!(s, "t2_value={}", fmt_f(rep.t2_value));
    let _ = writeln!(s, "t3_value={}", fmt_f(rep.t3_value));
    let _ = writeln!(s, "pass={}", rep.pass);
    s
}

pub fn lojasiewicz_report(point_tag: &str, fit: &LojasiewiczFit, e4: bool, ratio: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "point={point_tag}");
    let _ = writeln!(s, "theta={}", fmt_f(fit.theta));
    let _ = writeln!(s, "c={}", fmt_f(fit.c));
    let _ = writeln!(s, "fit_r2={}", fmt_f(fit.fit_r2));
    let _ = writeln!(s, "radius={}", fmt_f(fit.radius));
    let _ = writeln!(s, "e4_holds={e4}");
    let _ = writeln!(s, "e4_max_ratio={}", fmt_f(ratio));
    s
}
