//! Agreement between the independent cost estimators and metric properties
//! under random endpoints.

use bvflow_core::cost::{cost_1d, cost_grid, GridSpec};
use bvflow_core::energy::EnergyModel;
use bvflow_core::sample::SampleBox;
use bvflow_core::transition::{solve_heteroclinic, transition_cost, HeteroclinicOpts};
use bvflow_core::State;
use proptest::prelude::*;

fn s1(x: f64) -> State {
    State::from_vec(vec![x])
}

const T_STAR: f64 = 0.38490017945975047;
const U_STAR: f64 = -0.5773502691896258;

#[test]
fn three_estimators_agree_on_the_fold_jump() {
    let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
    let opts = HeteroclinicOpts::new(SampleBox::centered(1, 2.5));
    let tr = solve_heteroclinic(&m, T_STAR, &s1(U_STAR), &s1(1.0), 1e-4, &opts).unwrap();
    assert!(tr.converged);

    let hetero = tr.cost;
    let drop = m.value(T_STAR, &tr.u_minus) - m.value(T_STAR, &tr.u_plus);
    let quad = cost_1d(&m, T_STAR, tr.u_minus[0], tr.u_plus[0], 4000)
        .unwrap()
        .value;
    assert!((hetero - drop).abs() < 1e-4, "hetero {hetero} vs drop {drop}");
    assert!((hetero - quad).abs() < 1e-4, "hetero {hetero} vs quad {quad}");
    assert!((quad - 0.75).abs() < 1e-8);

    // the lattice upper bound brackets the heteroclinic at its resolution
    let grid = GridSpec::new(SampleBox::centered(1, 2.5), 1e-3);
    let lattice = cost_grid(&m, T_STAR, &tr.u_minus, &tr.u_plus, &grid).unwrap();
    assert!(hetero >= lattice.value - lattice.resolution);
    assert!(hetero <= lattice.value + lattice.resolution);

    // the recomputed transition cost is the polyline quadrature, bit for bit
    assert_eq!(hetero, transition_cost(&tr.path, &m, T_STAR));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cost_1d_symmetric_nonnegative_and_above_the_drop(
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
        t in 0.0f64..1.0,
    ) {
        let m = EnergyModel::tilted_double_well(1.0, 1.0).unwrap();
        let ab = cost_1d(&m, t, a, b, 400).unwrap();
        let ba = cost_1d(&m, t, b, a, 400).unwrap();
        prop_assert_eq!(ab.value.to_bits(), ba.value.to_bits());
        prop_assert!(ab.value >= 0.0);
        let drop = m.value(t, &s1(a)) - m.value(t, &s1(b));
        prop_assert!(ab.value >= drop - ab.resolution - 1e-6 * (1.0 + drop.abs()));
        // zero only on the diagonal
        if (a - b).abs() > 1e-6 {
            prop_assert!(ab.value > 0.0);
        }
    }
}
