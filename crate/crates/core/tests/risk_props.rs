use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use stlrelax::risk::*;
use stlrelax::stl::{TimeGrid, Trace};

const DT: f64 = 0.2;

fn agent_trace(xs: &[f64], ys: &[f64], vx: f64, vy: f64) -> Trace {
    let n = xs.len();
    Trace::from_columns(
        TimeGrid::new(DT, n).unwrap(),
        vec![("x", xs.to_vec()), ("y", ys.to_vec()), ("vx", vec![vx; n]), ("vy", vec![vy; n])],
    )
    .unwrap()
}

fn ego_trace(xs: &[f64], ys: &[f64], v: f64, theta: f64) -> Trace {
    let n = xs.len();
    Trace::from_columns(
        TimeGrid::new(DT, n).unwrap(),
        vec![("px", xs.to_vec()), ("py", ys.to_vec()), ("theta", vec![theta; n]), ("v", vec![v; n])],
    )
    .unwrap()
}

fn straight(x0: f64, y0: f64, vx: f64, vy: f64, n: usize) -> Trace {
    let xs: Vec<f64> = (0..n).map(|k| x0 + vx * DT * k as f64).collect();
    let ys: Vec<f64> = (0..n).map(|k| y0 + vy * DT * k as f64).collect();
    agent_trace(&xs, &ys, vx, vy)
}

fn pedestrian(nominal: Trace, sigma: f64) -> AgentModel {
    AgentModel { name: "ped".into(), kind: AgentKind::Pedestrian, mass: 70.0, kappa: 0.1, nominal, noise_sigma: sigma }
}

#[test]
fn zero_noise_reproduces_nominal() {
    let a = pedestrian(straight(3.0, -4.0, 0.0, 1.5, 12), 0.0);
    for s in sample_agent_trajectories(&a, 5, 7).unwrap() {
        assert_eq!(s, a.nominal);
    }
}

#[test]
fn same_seed_is_bit_identical() {
    let a = pedestrian(straight(3.0, -4.0, 0.0, 1.5, 12), 0.3);
    let s1 = sample_agent_trajectories(&a, 20, 99).unwrap();
    let s2 = sample_agent_trajectories(&a, 20, 99).unwrap();
    assert_eq!(s1, s2);
    let s3 = sample_agent_trajectories(&a, 20, 100).unwrap();
    assert_ne!(s1, s3);
}

#[test]
fn samples_are_order_independent() {
    let a = pedestrian(straight(0.0, 0.0, 1.0, 0.0, 8), 0.3);
    let many = sample_agent_trajectories(&a, 30, 5).unwrap();
    let few = sample_agent_trajectories(&a, 10, 5).unwrap();
    assert_eq!(&many[..10], &few[..]);
}

#[test]
fn final_position_mean_within_clt_bound() {
    let steps = 6;
    let sigma = 0.3;
    let n = 100_000;
    let a = pedestrian(straight(1.0, 2.0, 1.0, -0.5, steps), sigma);
    let samples = sample_agent_trajectories(&a, n, 2024).unwrap();
    let last = steps - 1;
    // final position sums (steps-1) independent velocity perturbations
    let pos_sigma = sigma * DT * (last as f64).sqrt();
    let bound = 3.0 * pos_sigma / (n as f64).sqrt();
    for (col, nominal) in [("x", a.nominal.get(last, "x").unwrap()), ("y", a.nominal.get(last, "y").unwrap())] {
        let mean = samples.iter().map(|s| s.get(last, col).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - nominal).abs() <= bound, "{col}: mean {mean}, nominal {nominal}, bound {bound}");
    }
}

#[test]
fn handcrafted_seven_of_twenty() {
    let n = 6;
    let ego = ego_trace(&vec![0.0; n], &vec![0.0; n], 0.0, 0.0);
    let mut samples = Vec::new();
    let mut expected = Vec::new();
    for i in 0..20 {
        // offsets chosen so exactly the listed samples enter the 2 m box
        let close = [1, 4, 5, 9, 12, 17, 19].contains(&i);
        let gap = if close { 1.0 + 0.1 * i as f64 / 20.0 } else { 2.5 + 0.2 * i as f64 };
        let xs: Vec<f64> = (0..n).map(|k| if k == 3 { gap } else { 10.0 }).collect();
        let ys: Vec<f64> = (0..n).map(|k| if k % 2 == 0 { -gap } else { gap }).collect();
        let tr = agent_trace(&xs, &ys, 0.0, 0.0);
        let manual = (0..n).any(|k| xs[k].abs().max(ys[k].abs()) <= 2.0);
        assert_eq!(manual, close);
        if manual {
            expected.push(i);
        }
        samples.push(tr);
    }
    let (p, hits) = collision_probability(&ego, &samples, 2.0).unwrap();
    assert_eq!(hits, expected);
    assert_eq!(p, 0.35);
}

#[test]
fn grid_mismatch_is_an_error() {
    let ego = ego_trace(&[0.0; 5], &[0.0; 5], 0.0, 0.0);
    let other = straight(0.0, 0.0, 0.0, 0.0, 6);
    assert_eq!(collision_probability(&ego, &[other], 2.0), Err(RiskError::GridMismatch));
}

#[test]
fn first_contact_examples() {
    let ego = ego_trace(&[0.0; 8], &[0.0; 8], 0.0, 0.0);
    let at_zero = agent_trace(&[1.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0], &[0.0; 8], 0.0, 0.0);
    assert_eq!(first_contact_time(&ego, &at_zero, 2.0).unwrap(), 0);
    let crossing = agent_trace(&[6.0, 5.0, 4.0, 3.0, 1.5, 0.5, 0.0, 0.0], &[0.0; 8], 0.0, 0.0);
    assert_eq!(first_contact_time(&ego, &crossing, 2.0).unwrap(), 4);
}

#[test]
fn equal_velocity_has_zero_severity() {
    let ego = ego_trace(&[0.0; 4], &[0.0; 4], 3.0, 0.0);
    let a = pedestrian(straight(1.0, 0.0, 3.0, 0.0, 4), 0.0);
    let (raw, s) = severity(&ego, &a, &[(&a.nominal, 0)], &RiskParams::default()).unwrap();
    assert_eq!((raw, s), (0.0, 0.0));
}

#[test]
fn severity_is_clamped() {
    let ego = ego_trace(&[0.0; 4], &[0.0; 4], 30.0, 0.0);
    let a = pedestrian(straight(1.0, 0.0, -30.0, 0.0, 4), 0.0);
    let params = RiskParams { s_max: 10.0, ..RiskParams::default() };
    let (raw, s) = severity(&ego, &a, &[(&a.nominal, 0)], &params).unwrap();
    assert!(raw > 10.0);
    assert_eq!(s, 1.0);
}

#[test]
fn vulnerability_ordering() {
    let ped = vulnerability(0.1).unwrap();
    let veh = vulnerability(1.5).unwrap();
    let amb = vulnerability(2.3).unwrap();
    assert!(ped > veh && veh > amb);
}

#[test]
fn no_agents_gives_empty_report() {
    let ego = ego_trace(&[0.0; 4], &[0.0; 4], 0.0, 0.0);
    let r = evaluate_risk(&ego, &[], &RiskParams::default()).unwrap();
    assert!(r.agents.is_empty());
    assert_eq!(r.total(), 0.0);
}

#[test]
fn far_agent_has_zero_risk() {
    let n = 10;
    let ego = ego_trace(&vec![0.0; n], &vec![0.0; n], 5.0, 0.0);
    let a = pedestrian(straight(50.0, 50.0, 0.0, 0.0, n), 0.3);
    let r = evaluate_risk(&ego, &[a], &RiskParams::default()).unwrap();
    assert_eq!(r.agents[0].p, 0.0);
    assert_eq!(r.agents[0].r, 0.0);
}

/// Straight-line reimplementation of the Monte-Carlo risk, sharing only the
/// stream key derivation.
fn oracle(ego: &Trace, a: &AgentModel, p: &RiskParams) -> (f64, f64, f64, f64) {
    let n = ego.len();
    let col = |t: &Trace, c: &str| t.column(c).unwrap();
    let (ex, ey, ev, eth) = (col(ego, "px"), col(ego, "py"), col(ego, "v"), col(ego, "theta"));
    let (ax, ay, avx, avy) = (col(&a.nominal, "x"), col(&a.nominal, "y"), col(&a.nominal, "vx"), col(&a.nominal, "vy"));
    let noise = Normal::new(0.0, a.noise_sigma).unwrap();
    let mut hits = 0usize;
    let mut sev = 0.0;
    for s in 0..p.n_samples {
        let mut rng = ChaCha8Rng::seed_from_u64(sample_key(p.seed, &a.name, s));
        let (mut x, mut y) = (ax[0], ay[0]);
        for t in 0..n {
            let vx = avx[t] + noise.sample(&mut rng);
            let vy = avy[t] + noise.sample(&mut rng);
            if (ex[t] - x).abs() <= p.d_safe && (ey[t] - y).abs() <= p.d_safe {
                hits += 1;
                let mu = p.ego_mass * a.mass / (p.ego_mass + a.mass);
                let dvx = ev[t] * eth[t].cos() - vx;
                let dvy = ev[t] * eth[t].sin() - vy;
                sev += mu * (dvx * dvx + dvy * dvy).sqrt();
                break;
            }
            x += DT * vx;
            y += DT * vy;
        }
    }
    let prob = hits as f64 / p.n_samples as f64;
    let s = if hits == 0 { 0.0 } else { (sev / hits as f64 / p.s_max).min(1.0) };
    let v = 1.0 / (1.0 + a.kappa);
    (prob, s, v, prob * s * v)
}

#[test]
fn intersection_conflict_matches_second_implementation() {
    // ego eastbound through the crossing, pedestrian walking north across it
    let n = 21;
    let ex: Vec<f64> = (0..n).map(|k| -10.0 + 5.0 * DT * k as f64).collect();
    let ego = ego_trace(&ex, &vec![0.0; n], 5.0, 0.0);
    let ped = pedestrian(straight(0.0, -4.0, 0.0, 1.2, n), 0.3);
    let amb = AgentModel {
        name: "ambulance".into(),
        kind: AgentKind::Ambulance,
        mass: 5000.0,
        kappa: 2.3,
        nominal: straight(4.0, 12.0, 0.0, -6.0, n),
        noise_sigma: 0.3,
    };
    let params = RiskParams { n_samples: 400, seed: 11, ..RiskParams::default() };
    let report = evaluate_risk(&ego, &[ped.clone(), amb.clone()], &params).unwrap();
    for (a, got) in [ped, amb].iter().zip(&report.agents) {
        let (p, s, v, r) = oracle(&ego, a, &params);
        assert_eq!(got.p, p, "{}", a.name);
        assert!((got.s - s).abs() < 1e-12, "{}: {} vs {s}", a.name, got.s);
        assert_eq!(got.v, v);
        assert!((got.r - r).abs() < 1e-12);
    }
    assert!(report.agents.iter().any(|a| a.p > 0.0 && a.p < 1.0), "{report:?}");
}

fn scene() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64, f64, f64, f64, u64)> {
    let n = 8usize;
    (
        prop::collection::vec(-6.0..6.0f64, n),
        prop::collection::vec(-6.0..6.0f64, n),
        -3.0..3.0f64,
        -3.0..3.0f64,
        0.5..3.0f64,
        0.0..2.0f64,
        any::<u64>(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn report_invariants((ex, ey, x0, y0, d, extra, seed) in scene()) {
        let n = ex.len();
        let ego = ego_trace(&ex, &ey, 4.0, 0.3);
        let a = pedestrian(straight(x0, y0, 0.5, -0.5, n), 0.4);
        let params = RiskParams { n_samples: 50, d_safe: d, seed, ..RiskParams::default() };
        let r = agent_risk(&ego, &a, &params).unwrap();
        prop_assert_eq!(r.p, r.colliding as f64 / 50.0);
        prop_assert!(r.colliding <= 50);
        prop_assert_eq!(r.r, r.p * r.s * r.v);
        prop_assert!((0.0..=1.0).contains(&r.s));
        prop_assert!(r.v > 0.0 && r.v <= 1.0);
        prop_assert_eq!(&agent_risk(&ego, &a, &params).unwrap(), &r);

        let samples = sample_agent_trajectories(&a, 50, seed).unwrap();
        let (p_small, _) = collision_probability(&ego, &samples, d).unwrap();
        let (p_big, _) = collision_probability(&ego, &samples, d + extra).unwrap();
        prop_assert!(p_big >= p_small);
    }

    #[test]
    fn first_contact_matches_scan(start in 3.0..20.0f64, speed in 0.2..4.0f64, d in 0.5..3.0f64) {
        let n = 30;
        let xs: Vec<f64> = (0..n).map(|k| (start - speed * DT * k as f64).max(0.0)).collect();
        let sample = agent_trace(&xs, &vec![0.0; n], -speed, 0.0);
        let ego = ego_trace(&vec![0.0; n], &vec![0.0; n], 0.0, 0.0);
        let scan = xs.iter().position(|&x| x <= d);
        match (scan, first_contact_time(&ego, &sample, d)) {
            (Some(k), Ok(t)) => prop_assert_eq!(k, t),
            (None, Err(RiskError::NoContact)) => {}
            (s, t) => prop_assert!(false, "scan {:?} vs {:?}", s, t),
        }
    }
}
