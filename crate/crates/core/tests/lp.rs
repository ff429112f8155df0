use kbsim_core::lp::oracle::{check_against_oracle, random_lp, vertex_enumeration};
use kbsim_core::lp::{
    allocation_lp, benchmark_jd, build_optimistic_lp, solve, LinearProgram, LpStatus, Sense,
};
use kbsim_core::model::{ArrivalSchedule, Context, Omega, ProblemInstance, ResourceSpec, Theta};
use kbsim_core::sim::{preset_instance, Preset, PresetOptions};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn simplex_matches_vertex_enumeration_on_seeded_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut infeasible = 0;
    for case in 0..1500 {
        let lp = random_lp(&mut rng, 5, 5);
        let sol = solve(&lp);
        if sol.status == LpStatus::Infeasible {
            infeasible += 1;
        }
        if let Some(msg) = check_against_oracle(&lp, &sol) {
            panic!("case {case}: {msg}\n{lp:?}");
        }
    }
    // both outcomes must be exercised
    assert!(infeasible > 50 && infeasible < 1400, "{infeasible}");
}

#[test]
fn simplex_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let lp = random_lp(&mut rng, 5, 5);
        assert_eq!(solve(&lp), solve(&lp));
    }
}

#[test]
fn unbounded_is_reported() {
    let mut lp = LinearProgram::new(vec![1.0, 0.0]);
    lp.add_row(vec![1.0, -1.0], Sense::Le, 1.0);
    assert_eq!(solve(&lp).status, LpStatus::Unbounded);
}

/// The collapsed benchmark for the IID setting, written out by hand:
/// variables (y_1A, y_1B, y_2A, y_2B) plus rejects.
#[test]
fn iid_benchmark_is_495() {
    let (inst, sched) = preset_instance(Preset::Iid, &PresetOptions::default()).unwrap();
    let jd = benchmark_jd(&inst, &sched, 500).unwrap();

    let mut lp = LinearProgram::new(vec![0.9, 0.5, 1.35, 0.75, 0.0, 0.0]);
    lp.add_row(vec![0.9, 0.5, 0.0, 0.0, 0.0, 0.0], Sense::Le, 250.0);
    lp.add_row(vec![0.0, 0.0, 0.9, 0.5, 0.0, 0.0], Sense::Le, 250.0);
    lp.add_row(vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0], Sense::Eq, 300.0);
    lp.add_row(vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0], Sense::Eq, 200.0);
    let (oracle, _) = vertex_enumeration(&lp).unwrap();
    assert!((oracle - 495.0).abs() < 1e-9);
    assert!((jd - 495.0).abs() < 1e-6, "{jd}");
}

#[test]
fn benchmark_of_empty_prefix_is_zero() {
    let (inst, sched) = preset_instance(Preset::Adv2, &PresetOptions::default()).unwrap();
    assert_eq!(benchmark_jd(&inst, &sched, 0).unwrap(), 0.0);
    assert!(benchmark_jd(&inst, &sched, 501).is_err());
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Instance with `n` resources, `l` one-hot types and the given true
/// probabilities; each resource also carries a second, higher candidate.
fn random_instance(
    rev: &[f64],
    cap: &[f64],
    probs: &[Vec<f64>],
    mix: &[f64],
    horizon: usize,
) -> ProblemInstance {
    let l = mix.len();
    let contexts = (0..l)
        .map(|j| {
            let mut x = vec![0.0; l];
            x[j] = 1.0;
            Context::new(j, x)
        })
        .collect();
    let resources = rev
        .iter()
        .zip(cap)
        .zip(probs)
        .map(|((&r, &c), p)| {
            let truth = Theta(p.iter().map(|&q| logit(q)).collect());
            let high = Theta(p.iter().map(|&q| logit(q) + 0.5).collect());
            ResourceSpec {
                revenue: r,
                capacity: c,
                theta_space: vec![truth, high],
                true_theta: 0,
            }
        })
        .collect();
    let h = horizon as f64;
    ProblemInstance::new(
        resources,
        contexts,
        horizon,
        mix.iter().map(|m| m * h).collect(),
        true,
    )
    .unwrap()
}

fn instance_strategy() -> impl Strategy<Value = (ProblemInstance, ArrivalSchedule)> {
    (1usize..=3, 1usize..=2, 5usize..60).prop_flat_map(|(n, l, horizon)| {
        (
            prop::collection::vec(0.1f64..3.0, n),
            prop::collection::vec(1.0f64..40.0, n),
            prop::collection::vec(prop::collection::vec(0.05f64..0.95, l), n),
            prop::collection::vec(0.05f64..1.0, l),
        )
            .prop_map(move |(rev, cap, probs, w)| {
                let total: f64 = w.iter().sum();
                let mix: Vec<f64> = w.iter().map(|x| x / total).collect();
                let mut last = mix.clone();
                let rest: f64 = last[..l - 1].iter().sum();
                last[l - 1] = 1.0 - rest;
                let sched = ArrivalSchedule::from_rows(vec![last; horizon]).unwrap();
                let mut inst = random_instance(&rev, &cap, &probs, &sched.rows()[0], horizon);
                inst.total_rates = sched.total_rates();
                (inst, sched)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn allocation_lp_agrees_with_oracle((inst, _sched) in instance_strategy(), sub in any::<bool>()) {
        let omegas: Vec<Omega> = inst
            .resources
            .iter()
            .map(|r| if sub { Omega::from_indices(r.theta_space.len(), &[0]) } else { Omega::full(r.theta_space.len()) })
            .collect();
        let (lp, idx) = build_optimistic_lp(&inst, &omegas).unwrap();
        let sol = solve(&lp);
        prop_assert!(check_against_oracle(&lp, &sol).is_none());
        let plan = idx.plan(&sol.values, sol.objective_value);
        for j in 0..inst.num_types() {
            let col: f64 = plan.column(j).iter().sum();
            prop_assert!((col - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn optimism_dominates_truth((inst, _s) in instance_strategy()) {
        let full: Vec<Omega> = inst.resources.iter().map(|r| Omega::full(r.theta_space.len())).collect();
        let (lp_opt, _) = build_optimistic_lp(&inst, &full).unwrap();
        let (lp_true, _) = allocation_lp(&inst, &inst.true_probs());
        let u = solve(&lp_opt).objective_value;
        let v = solve(&lp_true).objective_value;
        prop_assert!(u >= v - 1e-8, "{} < {}", u, v);
    }

    #[test]
    fn benchmark_is_monotone((inst, sched) in instance_strategy(), bump in 0.0f64..20.0) {
        let mut prev = 0.0;
        for t in 0..=inst.horizon {
            let v = benchmark_jd(&inst, &sched, t).unwrap();
            prop_assert!(v >= prev - 1e-9);
            prev = v;
        }
        let mut bigger = inst.clone();
        for r in &mut bigger.resources {
            r.capacity += bump;
        }
        let t = inst.horizon;
        prop_assert!(benchmark_jd(&bigger, &sched, t).unwrap() >= benchmark_jd(&inst, &sched, t).unwrap() - 1e-9);
    }
}
