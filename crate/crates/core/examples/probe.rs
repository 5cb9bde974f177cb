use bvflow_core::energy::EnergyModel;
use bvflow_core::flow::{integrate, integrate_on_grid, IntegrateOpts};
use bvflow_core::State;
use std::time::Instant;

fn s1(x: f64) -> State { State::from_vec(vec![x]) }

fn main() {
    let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
    let q = EnergyModel::quadratic_track(s1(0.0), s1(1.0), 1.0).unwrap();

    // halving study: quadratic
    let opts = IntegrateOpts { audit_tol: 1e-5, ..Default::default() };
    let t0 = Instant::now();
    let base = integrate(&q, 1e-2, &s1(0.0), (0.0, 1.0), &opts).unwrap();
    println!("quad adaptive: steps={} nodes={} dt(end)~{:.2e} [{:?}]",
        base.accepted_steps, base.times.len(),
        base.times[base.times.len()-1] - base.times[base.times.len()-2], t0.elapsed());
    let r0 = base.energy_identity_residual(&q, 0.0, 1.0).unwrap();
    let mut halved: Vec<f64> = Vec::new();
    for w in base.times.windows(2) {
        halved.push(w[0]);
        halved.push(0.5 * (w[0] + w[1]));
    }
    halved.push(*base.times.last().unwrap());
    let fine = integrate_on_grid(&q, 1e-2, &s1(0.0), &halved, &opts).unwrap();
    let r1 = fine.energy_identity_residual(&q, 0.0, 1.0).unwrap();
    println!("quad residuals: base={r0:.3e} halved={r1:.3e} ratio={:.2}", r0 / r1);

    // halving study: tdw at eps=0.1
    let opts2 = IntegrateOpts { audit_tol: 1e-4, ..Default::default() };
    let t0 = Instant::now();
    let base = integrate(&m, 0.1, &s1(-1.0), (0.0, 1.0), &opts2).unwrap();
    println!("tdw(0.1) adaptive: steps={} nodes={} [{:?}]",
        base.accepted_steps, base.times.len(), t0.elapsed());
    let r0 = base.energy_identity_residual(&m, 0.0, 1.0).unwrap();
    let mut halved: Vec<f64> = Vec::new();
    for w in base.times.windows(2) {
        halved.push(w[0]);
        halved.push(0.5 * (w[0] + w[1]));
    }
    halved.push(*base.times.last().unwrap());
    let fine = integrate_on_grid(&m, 0.1, &s1(-1.0), &halved, &opts2).unwrap();
    let r1 = fine.energy_identity_residual(&m, 0.0, 1.0).unwrap();
    println!("tdw residuals: base={r0:.3e} halved={r1:.3e} ratio={:.2}", r0 / r1);

    // ladder probe at the two cheapest and the most expensive epsilon
    for (eps, audit) in [(1e-1, 1.2e-5), (1e-2, 1.2e-5), (1e-3, 1.2e-5)] {
        let opts = IntegrateOpts { audit_tol: audit, max_nodes: 500_000, ..Default::default() };
        let t0 = Instant::now();
        let traj = integrate(&m, eps, &s1(-1.0), (0.0, 1.0), &opts).unwrap();
        let res = traj.energy_identity_residual(&m, 0.0, 1.0).unwrap();
        let tstar = 0.38490017945975047;
        let mass_win = traj.dissipation_mass(tstar - 0.05, tstar + 0.05).unwrap();
        let total = traj.dissipation_mass(0.0, 1.0).unwrap();
        let u30 = traj.state_at(0.30)[0];
        let u45 = traj.state_at(0.45)[0];
        println!("eps={eps:.0e}: steps={} res={res:.2e} win_mass={mass_win:.4} out={:.4} u(.30)={u30:.6} u(.45)={u45:.6} [{:?}]",
            traj.accepted_steps, total - mass_win, t0.elapsed());
    }
}
