//! Limit-evolution assembly checks that cut across modules: genericity of
//! perturbed folds, stability of transition arclengths, transition counting
//! in the plane, and the defect-mass bracket around the jump cost.

use bvflow_core::critical::{
    check_transversality, continue_branch, critical_point_at, polish_critical,
    BranchTermination, ContinuationOpts, CriticalOpts, TransversalityOpts,
};
use bvflow_core::energy::EnergyModel;
use bvflow_core::flow::{integrate, IntegrateOpts};
use bvflow_core::sample::SampleBox;
use bvflow_core::transition::{count_transitions, solve_heteroclinic, HeteroclinicOpts};
use bvflow_core::{Matrix, State};

fn s1(x: f64) -> State {
    State::from_vec(vec![x])
}

const T_STAR: f64 = 0.38490017945975047;
const U_STAR: f64 = -0.5773502691896258;
const U_PLUS: f64 = 1.1547005383792515;

/// Small deterministic lcg for the perturbation draws.
struct Lcg(u64);

impl Lcg {
    fn next_unit(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((self.0 >> 11) as f64) / ((1u64 << 53) as f64)
    }
    fn next_sym(&mut self, scale: f64) -> f64 {
        scale * (2.0 * self.next_unit() - 1.0)
    }
}

#[test]
fn random_quadratic_perturbations_keep_folds_transversal() {
    let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
    let mut rng = Lcg(0x9e3779b97f4a7c15);
    let copts = CriticalOpts::default();
    for draw in 0..20 {
        let y = s1(rng.next_sym(0.05));
        let k = Matrix::from_element(1, 1, rng.next_sym(0.05));
        let pert = m.perturb_generic(&y, &k).unwrap();
        // follow the left minimum from t = 0 into its fold
        let u0 = polish_critical(&pert, 0.0, &s1(-1.0), &copts)
            .unwrap_or_else(|| panic!("draw {draw}: left minimum lost"));
        let start = critical_point_at(&pert, 0.0, &u0, 1e-7);
        let branch = continue_branch(&pert, &start, 1.0, &ContinuationOpts::new(1)).unwrap();
        match branch.termination {
            BranchTermination::Fold { t_star, u_star } => {
                let rep = check_transversality(
                    &pert,
                    t_star,
                    &u_star,
                    &TransversalityOpts::default(),
                )
                .unwrap();
                assert!(
                    rep.pass,
                    "draw {draw}: fold at t={t_star} failed transversality: {rep:?}"
                );
            }
            other => panic!("draw {draw}: expected a fold, got {other:?}"),
        }
    }
}

#[test]
fn transition_arclength_is_stable_under_step_refinement() {
    let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
    let coarse = HeteroclinicOpts::new(SampleBox::centered(1, 2.5));
    let mut fine = coarse.clone();
    fine.step_tol = coarse.step_tol / 8.0;
    let a = solve_heteroclinic(&m, T_STAR, &s1(U_STAR), &s1(1.0), 1e-4, &coarse).unwrap();
    let b = solve_heteroclinic(&m, T_STAR, &s1(U_STAR), &s1(1.0), 1e-4, &fine).unwrap();
    assert!(a.converged && b.converged);
    assert!(a.arclength.is_finite() && b.arclength.is_finite());
    let rel = (a.arclength - b.arclength).abs() / b.arclength;
    assert!(rel < 0.01, "arclength moved by {rel:.4} under refinement");
}

#[test]
fn one_descent_channel_in_the_plane() {
    let m = EnergyModel::double_well_2d(1.0, 1.0).unwrap();
    let opts = HeteroclinicOpts::new(SampleBox::centered(2, 2.5));
    let fold = State::from_vec(vec![U_STAR, 0.0]);
    let target = State::from_vec(vec![U_PLUS, 0.0]);
    let n = count_transitions(&m, T_STAR, &fold, &target, 16, &opts);
    assert_eq!(n, 1);
}

#[test]
fn window_dissipation_brackets_the_jump_cost() {
    // mu({t*}) >= c(t*; u-, u+): the viscous mass near the jump must carry at
    // least the cost, and by Young it carries at least the dissipation integral
    let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
    let opts = IntegrateOpts {
        audit_tol: 1e-4,
        max_nodes: 500_000,
        ..Default::default()
    };
    let traj = integrate(&m, 1e-3, &s1(-1.0), (0.0, 1.0), &opts).unwrap();
    let endiss = traj
        .dissipation_integral(T_STAR - 0.05, T_STAR + 0.05)
        .unwrap();
    let mass = traj.dissipation_mass(T_STAR - 0.05, T_STAR + 0.05).unwrap();
    assert!(endiss >= 0.75 - 0.04, "dissipation integral {endiss}");
    assert!(mass >= endiss - 1e-12);
    // off the jump the measure carries next to nothing
    let tail = traj.dissipation_mass(0.5, 1.0).unwrap();
    assert!(tail < 0.02, "tail mass {tail}");
}
