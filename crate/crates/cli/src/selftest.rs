//! LP-versus-oracle suite plus a handful of end-to-end smoke checks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use kbsim_core::lp::oracle::{check_against_oracle, random_lp};
use kbsim_core::lp::{benchmark_jd, LinearProgram, LpSolution};
use kbsim_core::model::{optimistic_prob, psi, Omega};
use kbsim_core::policy::PolicyKind;
use kbsim_core::sim::{preset_config, preset_instance, run_episode, Preset, PresetOptions};

pub const DEFAULT_CASES: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestReport {
    pub oracle_cases: usize,
    /// `(case, message)` for every disagreement.
    pub oracle_failures: Vec<(usize, String)>,
    pub smoke: Vec<(&'static str, Result<(), String>)>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.oracle_failures.is_empty() && self.smoke.iter().all(|(_, r)| r.is_ok())
    }
}

/// Runs `cases` random LPs (at most 5 variables and 5 rows) through `solver`
/// and compares each answer with vertex enumeration, then the smoke checks.
pub fn run_selftest<F>(solver: F, cases: usize, seed: u64) -> SelftestReport
where
    F: Fn(&LinearProgram) -> LpSolution,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut oracle_failures = Vec::new();
    for case in 0..cases {
        let lp = random_lp(&mut rng, 5, 5);
        if let Some(msg) = check_against_oracle(&lp, &solver(&lp)) {
            oracle_failures.push((case, msg));
        }
    }
    let smoke: Vec<(&'static str, Result<(), String>)> = vec![
        ("psi endpoints", smoke_psi()),
        ("iid benchmark", smoke_benchmark()),
        ("optimism", smoke_optimism()),
        ("capacity and determinism", smoke_episodes()),
    ];
    SelftestReport {
        oracle_cases: cases,
        oracle_failures,
        smoke,
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn smoke_psi() -> Result<(), String> {
    let mid = psi(0.5).map_err(|e| e.to_string())?;
    let want = (0.5f64.exp() - 1.0) / (1f64.exp() - 1.0);
    check(
        psi(0.0).ok() == Some(0.0) && psi(1.0).ok() == Some(1.0) && (mid - want).abs() < 1e-12,
        || format!("psi(0.5) = {mid}"),
    )
}

fn smoke_benchmark() -> Result<(), String> {
    let (inst, sched) =
        preset_instance(Preset::Iid, &PresetOptions::default()).map_err(|e| e.to_string())?;
    let v = benchmark_jd(&inst, &sched, 500).map_err(|e| e.to_string())?;
    check((v - 495.0).abs() <= 1e-6, || {
        format!("J^D = {v}, expected 495")
    })
}

fn smoke_optimism() -> Result<(), String> {
    let (inst, _) =
        preset_instance(Preset::Adv1, &PresetOptions::default()).map_err(|e| e.to_string())?;
    for res in &inst.resources {
        let omega = Omega::full(res.theta_space.len());
        for ctx in &inst.contexts {
            let (fbar, _) =
                optimistic_prob(ctx, &res.theta_space, &omega).map_err(|e| e.to_string())?;
            let truth = res.true_prob(ctx).map_err(|e| e.to_string())?;
            check(fbar >= truth, || {
                format!("optimistic {fbar} below true {truth}")
            })?;
        }
    }
    Ok(())
}

fn smoke_episodes() -> Result<(), String> {
    let opts = PresetOptions {
        horizon: 120,
        ..PresetOptions::default()
    };
    for policy in [PolicyKind::AlgLp, PolicyKind::AlgAdv, PolicyKind::Ulwe] {
        let cfg = preset_config(Preset::Adv2, policy, &opts).map_err(|e| e.to_string())?;
        let (a, ra) = run_episode(&cfg, 1).map_err(|e| e.to_string())?;
        let (b, rb) = run_episode(&cfg, 1).map_err(|e| e.to_string())?;
        check(a.records == b.records && ra == rb, || {
            format!("{policy}: repeat run differs")
        })?;
        for rec in &a.records {
            check(rec.remaining.iter().all(|r| *r >= 0.0), || {
                format!("{policy}: capacity exceeded in period {}", rec.period)
            })?;
        }
    }
    Ok(())
}
