use kbsim_core::lp::benchmark_jd;
use kbsim_core::model::{Context, ProblemInstance, ResourceSpec, Theta};
use kbsim_core::policy::{sample_index, PolicyKind, PolicySettings};
use kbsim_core::sim::{
    draw_arrival, preset_config, preset_instance, replicate, run_episode, stream_rng, summarize,
    Preset, PresetOptions, SimulationConfig, ARRIVAL_STREAM, POLICY_STREAM,
};

fn within_three_sigma(hits: usize, draws: usize, p: f64) -> bool {
    let freq = hits as f64 / draws as f64;
    let sigma = (p * (1.0 - p) / draws as f64).sqrt();
    (freq - p).abs() <= 3.0 * sigma
}

#[test]
fn iid_arrival_frequencies() {
    let (_, sched) = preset_instance(Preset::Iid, &PresetOptions::default()).unwrap();
    let mut rng = stream_rng(11, 0, ARRIVAL_STREAM);
    let draws = 100_000;
    let hits = (0..draws)
        .filter(|k| draw_arrival(&sched, 1 + k % 500, &mut rng) == 0)
        .count();
    assert!(within_three_sigma(hits, draws, 0.6), "{hits}");
}

#[test]
fn adv2_segment_rows() {
    let sched = Preset::Adv2.schedule(500).unwrap();
    let expect = [
        (1, 50, 0.2),
        (51, 200, 0.8),
        (201, 300, 0.2),
        (301, 350, 0.4),
        (351, 400, 0.2),
        (401, 450, 0.02),
        (451, 500, 0.2),
    ];
    for (a, b, p) in expect {
        for t in a..=b {
            assert_eq!(sched.row(t)[0], p, "period {t}");
        }
    }
}

#[test]
fn sampling_frequencies() {
    let probs = [0.2, 0.5, 0.3];
    let mut rng = stream_rng(5, 0, POLICY_STREAM);
    let draws = 100_000;
    let mut counts = [0usize; 3];
    for _ in 0..draws {
        counts[sample_index(&probs, &mut rng)] += 1;
    }
    for (c, p) in counts.iter().zip(probs) {
        assert!(within_three_sigma(*c, draws, p), "{counts:?}");
    }
}

#[test]
fn single_period_adv_takes_raw_argmax() {
    let res = |r: f64, p: f64| ResourceSpec {
        revenue: r,
        capacity: 1.0,
        theta_space: vec![Theta(vec![(p / (1.0 - p)).ln()])],
        true_theta: 0,
    };
    // r f = 0.9 vs 0.75
    let inst = ProblemInstance::new(
        vec![res(1.0, 0.9), res(1.5, 0.5)],
        vec![Context::new(0, vec![1.0])],
        1,
        vec![1.0],
        true,
    )
    .unwrap();
    let cfg = SimulationConfig {
        schedule: kbsim_core::model::ArrivalSchedule::from_rows(vec![vec![1.0]]).unwrap(),
        instance: inst,
        policy: PolicyKind::AlgAdv,
        replications: 1,
        base_seed: 0,
        checkpoints: vec![1],
        settings: PolicySettings::default(),
    };
    let (trace, regret) = run_episode(&cfg, 0).unwrap();
    assert_eq!(trace.records.len(), 1);
    assert_eq!(trace.records[0].resource, Some(0));
    assert_eq!(regret.points.len(), 1);
}

#[test]
fn single_replication_summary_is_the_trace() {
    let mut cfg = preset_config(Preset::Adv1, PolicyKind::Ulwe, &PresetOptions::default()).unwrap();
    cfg.replications = 1;
    let summary = replicate(&cfg).unwrap();
    let (trace, regret) = run_episode(&cfg, 0).unwrap();
    for (k, cp) in summary.checkpoints.iter().enumerate() {
        assert_eq!(cp.mean_regret, regret.points[k].regret);
        assert_eq!(cp.stderr, 0.0);
        let counts = &trace.checkpoint_allocations[k];
        for (row, want) in cp.mean_allocations.iter().zip(counts) {
            let want: Vec<f64> = want.iter().map(|c| *c as f64).collect();
            assert_eq!(row, &want);
        }
    }
    assert_eq!(summary.switch_periods, vec![trace.switch_period]);
}

#[test]
fn checkpoints_use_the_benchmark() {
    let cfg = preset_config(Preset::Adv2, PolicyKind::AlgLp, &PresetOptions::default()).unwrap();
    let (_, regret) = run_episode(&cfg, 3).unwrap();
    let mut prev = 0.0;
    for p in &regret.points {
        let direct = benchmark_jd(&cfg.instance, &cfg.schedule, p.t).unwrap();
        assert_eq!(p.benchmark, direct);
        assert!(p.benchmark >= prev);
        assert_eq!(p.regret, p.benchmark - p.revenue);
        prev = p.benchmark;
    }
}

#[test]
fn replication_output_is_reproducible_and_order_stable() {
    let mut cfg = preset_config(Preset::Iid, PolicyKind::Ulwe, &PresetOptions::default()).unwrap();
    cfg.replications = 8;
    let a = replicate(&cfg).unwrap();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap();
    let b = pool.install(|| replicate(&cfg)).unwrap();
    assert_eq!(a, b);
    let runs: Vec<_> = (0..8).map(|r| run_episode(&cfg, r).unwrap()).collect();
    assert_eq!(summarize(&cfg, &runs), a);
}

#[test]
// Some checkpoints have zero expected regret, so a two-sigma bound trips by
// chance now and then; the preset seed and 100 replications are pinned.
fn mean_regret_is_not_significantly_negative() {
    for preset in [Preset::Iid, Preset::Adv1, Preset::Adv2] {
        for policy in [PolicyKind::AlgLp, PolicyKind::AlgAdv, PolicyKind::Ulwe] {
            let mut cfg = preset_config(preset, policy, &PresetOptions::default()).unwrap();
            cfg.replications = 100;
            let s = replicate(&cfg).unwrap();
            for cp in &s.checkpoints {
                assert!(
                    cp.mean_regret >= -2.0 * cp.stderr,
                    "{preset} {policy} t={} regret {} se {}",
                    cp.t,
                    cp.mean_regret,
                    cp.stderr
                );
            }
        }
    }
}

#[test]
fn invalid_configs_are_rejected_before_running() {
    let base = preset_config(Preset::Iid, PolicyKind::AlgLp, &PresetOptions::default()).unwrap();
    let mut c = base.clone();
    c.replications = 0;
    assert!(run_episode(&c, 0).is_err());
    let mut c = base.clone();
    c.checkpoints = vec![200, 100];
    assert!(replicate(&c).is_err());
    let mut c = base.clone();
    c.checkpoints = vec![501];
    assert!(replicate(&c).is_err());
    let mut c = base;
    c.settings.resolve_cadence = 0;
    assert!(replicate(&c).is_err());
}
