use proptest::prelude::*;
use stlrelax::dynamics::{linearize, rollout, step_discrete, ControlInput, VehicleParams, VehicleState};

fn state() -> impl Strategy<Value = VehicleState> {
    (-50.0..50.0f64, -50.0..50.0f64, -std::f64::consts::PI..std::f64::consts::PI, 0.0..15.0f64)
        .prop_map(|(px, py, th, v)| VehicleState::new(px, py, th, v))
}

fn input() -> impl Strategy<Value = ControlInput> {
    (-9.0..4.0f64, -0.2..0.2f64).prop_map(|(a, b)| ControlInput::new(a, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn jacobians_match_central_differences(x in state(), u in input()) {
        let p = VehicleParams::default();
        let dt = 0.2;
        let next = step_discrete(&x, &u, dt, &p);
        let lin = &linearize(&[x, next], &[u], dt, &p)[0];
        let h = 1e-5;
        for j in 0..4 {
            let mut xp = x.to_array();
            let mut xm = x.to_array();
            xp[j] += h;
            xm[j] -= h;
            let fp = step_discrete(&VehicleState::from_array(xp), &u, dt, &p).to_array();
            let fm = step_discrete(&VehicleState::from_array(xm), &u, dt, &p).to_array();
            for i in 0..4 {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                prop_assert!((fd - lin.a[i][j]).abs() <= 1e-6, "A[{i}][{j}] {} vs {}", lin.a[i][j], fd);
            }
        }
        for j in 0..2 {
            let mut up = [u.a, u.beta];
            let mut um = [u.a, u.beta];
            up[j] += h;
            um[j] -= h;
            let fp = step_discrete(&x, &ControlInput::new(up[0], up[1]), dt, &p).to_array();
            let fm = step_discrete(&x, &ControlInput::new(um[0], um[1]), dt, &p).to_array();
            for i in 0..4 {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                prop_assert!((fd - lin.b[i][j]).abs() <= 1e-6, "B[{i}][{j}] {} vs {}", lin.b[i][j], fd);
            }
        }
    }

    #[test]
    fn affine_chain_reproduces_reference(x0 in state(), us in proptest::collection::vec(input(), 1..10)) {
        let p = VehicleParams::default();
        let xs = rollout(&x0, &us, 0.2, &p);
        let lin = linearize(&xs, &us, 0.2, &p);
        let mut x = x0.to_array();
        for (k, (step, u)) in lin.iter().zip(&us).enumerate() {
            x = step.apply(x, [u.a, u.beta]);
            let want = xs[k + 1].to_array();
            for i in 0..4 {
                prop_assert!((x[i] - want[i]).abs() <= 1e-9 * (1.0 + want[i].abs()));
            }
        }
    }
}

#[test]
fn spec_euler_example() {
    let s = step_discrete(&VehicleState::new(0.0, 0.0, 0.0, 2.0), &ControlInput::new(1.0, 0.1), 0.2, &VehicleParams::default());
    let want = [0.4, 0.04, 0.026_666_666_666_666_67, 2.2];
    for (a, b) in s.to_array().iter().zip(want) {
        assert!((a - b).abs() < 1e-12);
    }
}
