use bvflow_core::energy::EnergyModel;
use bvflow_core::flow::{integrate_on_grid, IntegrateOpts};
use bvflow_core::limit::{compare_vanishing_viscosity, construct_bv, energy_balance_residual, BvOpts};
use bvflow_core::sample::SampleBox;
use bvflow_core::State;
use std::time::Instant;

fn s1(x: f64) -> State { State::from_vec(vec![x]) }

fn main() {
    let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
    let bv = construct_bv(&m, &s1(-1.0), (0.0, 1.0), &BvOpts::new(SampleBox::centered(1, 2.5))).unwrap();
    let tj = bv.jumps[0].t;

    // samples avoiding the jump by 0.05
    let mut samples = Vec::new();
    let n = 41;
    for k in 0..n {
        let t = k as f64 / (n - 1) as f64;
        if (t - tj).abs() >= 0.05 { samples.push(t); }
    }
    let ladder = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];
    let opts = IntegrateOpts { audit_tol: 1.2e-5, max_nodes: 500_000, ..Default::default() };
    let t0 = Instant::now();
    let rep = compare_vanishing_viscosity(&m, &s1(-1.0), &ladder, &bv, &samples, 0.05, 0.05, &opts).unwrap();
    println!("ladder in {:?}", t0.elapsed());
    for r in &rep.rows {
        println!("eps={:.0e} sup={:.6e} win={:.5} out={:.5}", r.epsilon, r.sup_distance, r.window_masses[0], r.outside_mass);
    }
    println!("strict_decrease={} mass_conv={}", rep.sup_strictly_decreasing, rep.window_mass_converged);

    // balance residual scan
    let mut worst_on = 0.0f64; let mut worst_str = 0.0f64;
    let mut x = 0.123456f64;
    let mut rnd = || { x = (x * 9301.0 + 49297.0) % 233280.0; x / 233280.0 };
    for _ in 0..50 {
        let a = rnd(); let b = rnd();
        let (s, t) = if a <= b { (a, b) } else { (b, a) };
        let r = energy_balance_residual(&bv, &m, s, t);
        if s <= tj && tj <= t { worst_str = worst_str.max(r) } else { worst_on = worst_on.max(r) }
    }
    println!("balance residuals: on-segment max {worst_on:.2e}, straddling max {worst_str:.2e}");

    // criterion 2: fixed grid dt=1e-6
    let q = EnergyModel::quadratic_track(s1(0.0), s1(1.0), 1.0).unwrap();
    let n_steps = 1_000_000usize;
    let grid: Vec<f64> = (0..=n_steps).map(|k| k as f64 / n_steps as f64).collect();
    let t0 = Instant::now();
    let traj = integrate_on_grid(&q, 1e-2, &s1(0.0), &grid, &IntegrateOpts { max_nodes: 1_100_000, ..Default::default() }).unwrap();
    let mut worst = 0.0f64;
    for (t, u) in traj.times.iter().zip(&traj.states) {
        let exact = t - 1e-2 * (1.0 - (-t / 1e-2).exp());
        worst = worst.max((u[0] - exact).abs());
    }
    println!("closed-form sup err at dt=1e-6: {worst:.3e} nodes={} [{:?}]", traj.times.len(), t0.elapsed());
    let res = traj.energy_identity_residual(&q, 0.0, 1.0).unwrap();
    let diss = traj.dissipation_mass(0.0, 1.0).unwrap();
    println!("criterion-3 check: residual {res:.3e} vs bound {:.3e}", 1e-5 * (1.0 + diss));
}
