//! Decision policies: the LP protocol, the inventory-balancing protocol, and
//! the unified policy that runs the first until a switch condition fires and
//! the second afterwards. All three learn the same confidence sets.

mod confidence;
mod switch;

pub use confidence::{ConfidenceState, Removal, RemovalReason};
pub use switch::{SwitchCause, SwitchMonitor, ThetaCardinality};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{allocation_lp, optimistic_coefficients, solve, AllocationPlan};
use crate::model::{psi, Context, ProblemInstance};

/// Capacity slack below which a resource counts as depleted.
const DEPLETION_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    AlgLp,
    AlgAdv,
    Ulwe,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::AlgLp => "alg_lp",
            PolicyKind::AlgAdv => "alg_adv",
            PolicyKind::Ulwe => "ulwe",
        }
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "alg_lp" | "lp" => Ok(PolicyKind::AlgLp),
            "alg_adv" | "adv" => Ok(PolicyKind::AlgAdv),
            "ulwe" => Ok(PolicyKind::Ulwe),
            other => Err(Error::Config(format!("unknown policy `{other}`"))),
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityMode {
    /// Depleted resources cannot be offered.
    #[default]
    Hard,
    /// Depleted resources may be offered; sales beyond capacity earn nothing
    /// and are counted as violations.
    Soft,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySettings {
    /// Periods between LP re-solves; 1 re-solves every period.
    pub resolve_cadence: usize,
    pub capacity_mode: CapacityMode,
    /// Scales the confidence-set removal threshold.
    pub threshold_multiplier: f64,
    pub theta_cardinality: ThetaCardinality,
}

impl Default for PolicySettings {
    fn default() -> Self {
        Self {
            resolve_cadence: 1,
            capacity_mode: CapacityMode::Hard,
            threshold_multiplier: 1.0,
            theta_cardinality: ThetaCardinality::Sum,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    /// Offered resource; `None` rejects the customer.
    pub resource: Option<usize>,
    /// Distribution the choice was drawn from: resources, then reject.
    pub probabilities: Vec<f64>,
    /// Optimistic parameter (index into the resource's space) for the offer.
    pub maximizer: Option<usize>,
}

#[derive(Debug, Clone)]
struct CachedLp {
    plan: AllocationPlan,
    solved_at: usize,
}

/// Period-level scratch shared between the step and the switch check.
#[derive(Debug, Clone)]
struct PeriodView {
    t: usize,
    ty: usize,
    optimistic: Vec<Vec<f64>>,
    argmax: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct PolicyState {
    kind: PolicyKind,
    settings: PolicySettings,
    pub confidence: ConfidenceState,
    pub monitor: SwitchMonitor,
    consumption: Vec<f64>,
    period: usize,
    lp: Option<CachedLp>,
    view: Option<PeriodView>,
}

impl PolicyState {
    pub fn new(instance: &ProblemInstance, kind: PolicyKind, settings: PolicySettings) -> Self {
        Self {
            kind,
            settings,
            confidence: ConfidenceState::new(instance, settings.threshold_multiplier),
            monitor: SwitchMonitor::new(instance, settings.theta_cardinality),
            consumption: vec![0.0; instance.num_resources()],
            period: 0,
            lp: None,
            view: None,
        }
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn settings(&self) -> &PolicySettings {
        &self.settings
    }

    /// Completed periods.
    pub fn period(&self) -> usize {
        self.period
    }

    /// Purchases recorded so far per resource.
    pub fn consumption(&self) -> &[f64] {
        &self.consumption
    }

    pub fn switched(&self) -> bool {
        self.monitor.switched()
    }

    /// Most recent LP solution and the period it was computed in.
    pub fn lp_plan(&self) -> Option<(&AllocationPlan, usize)> {
        self.lp.as_ref().map(|c| (&c.plan, c.solved_at))
    }

    pub fn is_depleted(&self, instance: &ProblemInstance, resource: usize) -> bool {
        self.consumption[resource] + 1.0 > instance.resources[resource].capacity + DEPLETION_EPS
    }

    fn offerable(&self, instance: &ProblemInstance, resource: usize) -> bool {
        match self.settings.capacity_mode {
            CapacityMode::Hard => !self.is_depleted(instance, resource),
            CapacityMode::Soft => true,
        }
    }

    fn prepare(&mut self, instance: &ProblemInstance, context: &Context) -> Result<()> {
        if context.id >= instance.num_types() {
            return Err(Error::Config(format!(
                "unknown customer type {}",
                context.id
            )));
        }
        let t = self.period + 1;
        if self
            .view
            .as_ref()
            .is_some_and(|v| v.t == t && v.ty == context.id)
        {
            return Ok(());
        }
        let (optimistic, argmax) = optimistic_coefficients(instance, self.confidence.omegas())?;
        self.view = Some(PeriodView {
            t,
            ty: context.id,
            optimistic,
            argmax,
        });
        Ok(())
    }

    fn view(&self) -> &PeriodView {
        self.view
            .as_ref()
            .expect("prepare() runs before every decision")
    }

    /// Chooses an arm for the arriving customer according to the policy kind.
    pub fn decide<R: Rng + ?Sized>(
        &mut self,
        instance: &ProblemInstance,
        context: &Context,
        rng: &mut R,
    ) -> Result<Decision> {
        match self.kind {
            PolicyKind::AlgLp => alg_lp_step(self, instance, context, rng),
            PolicyKind::AlgAdv => alg_adv_step(self, instance, context),
            PolicyKind::Ulwe => ulwe_step(self, instance, context, rng),
        }
    }

    /// Feeds back the purchase outcome and closes the period.
    pub fn observe(
        &mut self,
        instance: &ProblemInstance,
        decision: &Decision,
        context: &Context,
        purchased: bool,
    ) -> Result<()> {
        if let (Some(i), true) = (decision.resource, purchased) {
            self.consumption[i] += 1.0;
        }
        update_confidence(self, instance, decision, context, purchased)?;
        self.period += 1;
        self.view = None;
        Ok(())
    }
}

/// Inverse-CDF draw from unnormalised weights, scanning in index order.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs
        .iter()
        .rposition(|p| *p > 0.0)
        .unwrap_or(probs.len() - 1)
}

/// LP protocol: offer resource `i` with probability `sbar_ij` for the arriving
/// type `j`, re-solving the optimistic LP once the cached solution is
/// `resolve_cadence` periods old. In hard-capacity mode the mass of depleted
/// resources moves to the reject arm.
pub fn alg_lp_step<R: Rng + ?Sized>(
    state: &mut PolicyState,
    instance: &ProblemInstance,
    context: &Context,
    rng: &mut R,
) -> Result<Decision> {
    state.prepare(instance, context)?;
    let t = state.period + 1;
    let cadence = state.settings.resolve_cadence.max(1);
    if state.lp.as_ref().is_none_or(|c| t >= c.solved_at + cadence) {
        let (lp, idx) = allocation_lp(instance, &state.view().optimistic);
        let sol = solve(&lp);
        if !sol.is_optimal() {
            return Err(Error::Lp(sol.status));
        }
        state.lp = Some(CachedLp {
            plan: idx.plan(&sol.values, sol.objective_value),
            solved_at: t,
        });
    }
    let n = instance.num_resources();
    let mut probs = state
        .lp
        .as_ref()
        .expect("solved above")
        .plan
        .column(context.id);
    for i in 0..n {
        if !state.offerable(instance, i) {
            probs[n] += probs[i];
            probs[i] = 0.0;
        }
    }
    let k = sample_index(&probs, rng);
    let resource = (k < n).then_some(k);
    Ok(Decision {
        resource,
        maximizer: resource.map(|i| state.view().argmax[i][context.id]),
        probabilities: probs,
    })
}

/// Inventory-balancing protocol: offer the resource maximising
/// `r_i (1 - psi(N_i / c_i)) fbar_i(x)`; lower index wins ties, and the
/// customer is rejected when no resource scores above zero.
pub fn alg_adv_step(
    state: &mut PolicyState,
    instance: &ProblemInstance,
    context: &Context,
) -> Result<Decision> {
    state.prepare(instance, context)?;
    let n = instance.num_resources();
    let mut best: Option<(usize, f64)> = None;
    for (i, res) in instance.resources.iter().enumerate() {
        if !state.offerable(instance, i) {
            continue;
        }
        let used = (state.consumption[i] / res.capacity).clamp(0.0, 1.0);
        let score = res.revenue * (1.0 - psi(used)?) * state.view().optimistic[i][context.id];
        if score > 0.0 && best.is_none_or(|(_, b)| score > b) {
            best = Some((i, score));
        }
    }
    let resource = best.map(|(i, _)| i);
    let mut probabilities = vec![0.0; n + 1];
    probabilities[resource.unwrap_or(n)] = 1.0;
    Ok(Decision {
        resource,
        maximizer: resource.map(|i| state.view().argmax[i][context.id]),
        probabilities,
    })
}

/// Applies the confidence-set tests for the period's offer. Rejections carry
/// no information and leave the sets alone.
pub fn update_confidence(
    state: &mut PolicyState,
    instance: &ProblemInstance,
    decision: &Decision,
    context: &Context,
    purchased: bool,
) -> Result<()> {
    if let (Some(i), Some(k)) = (decision.resource, decision.maximizer) {
        let t = state.period + 1;
        state
            .confidence
            .update(instance, i, k, context, purchased, t)?;
    }
    Ok(())
}

/// Feeds the current period into the switch monitor. Must follow
/// [`alg_lp_step`] in the same period; returns the monitor's state.
pub fn check_switch(
    state: &mut PolicyState,
    instance: &ProblemInstance,
    context: &Context,
    _decision: &Decision,
) -> Result<bool> {
    if state.monitor.switched() {
        return Ok(true);
    }
    state.prepare(instance, context)?;
    let t = state.period + 1;
    let plan = &state
        .lp
        .as_ref()
        .ok_or_else(|| Error::Config("switch check before any LP solve".into()))?
        .plan;
    let view = state.view.as_ref().expect("prepared above");
    state.monitor.observe(
        instance,
        &state.confidence,
        plan,
        &view.optimistic,
        context.id,
        t,
    )
}

/// Unified policy: LP protocol plus switch check until a condition fires,
/// inventory balancing from the following period on.
pub fn ulwe_step<R: Rng + ?Sized>(
    state: &mut PolicyState,
    instance: &ProblemInstance,
    context: &Context,
    rng: &mut R,
) -> Result<Decision> {
    if state.monitor.switched() {
        return alg_adv_step(state, instance, context);
    }
    let decision = alg_lp_step(state, instance, context, rng)?;
    check_switch(state, instance, context, &decision)?;
    Ok(decision)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ResourceSpec, Theta};
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn logit(p: f64) -> f64 {
        (p / (1.0 - p)).ln()
    }

    /// Two resources with revenues (1, 1.5), types A=(1,0), B=(0,1), f = (0.9, 0.5).
    fn two_by_two(capacity: f64, horizon: usize) -> ProblemInstance {
        let truth = Theta(vec![logit(0.9), logit(0.5)]);
        let res = |r| ResourceSpec {
            revenue: r,
            capacity,
            theta_space: vec![truth.clone()],
            true_theta: 0,
        };
        let h = horizon as f64;
        ProblemInstance::new(
            vec![res(1.0), res(1.5)],
            vec![
                Context::new(0, vec![1.0, 0.0]),
                Context::new(1, vec![0.0, 1.0]),
            ],
            horizon,
            vec![0.6 * h, 0.4 * h],
            true,
        )
        .unwrap()
    }

    /// Yields the same 64-bit word forever; `1 << 63` maps to the uniform 0.5.
    struct ConstRng(u64);

    impl RngCore for ConstRng {
        fn next_u32(&mut self) -> u32 {
            (self.0 >> 32) as u32
        }
        fn next_u64(&mut self) -> u64 {
            self.0
        }
        fn fill_bytes(&mut self, dst: &mut [u8]) {
            dst.fill(0);
        }
    }

    #[test]
    fn sampling_inverse_cdf() {
        let mut zero = ConstRng(0);
        assert_eq!(sample_index(&[1.0, 0.0], &mut zero), 0);
        assert_eq!(sample_index(&[0.0, 1.0], &mut zero), 1);
        let mut half = ConstRng(1 << 63);
        assert_eq!(half.random::<f64>(), 0.5);
        assert_eq!(sample_index(&[0.4, 0.6, 0.0], &mut half), 1);
        assert_eq!(sample_index(&[0.6, 0.4, 0.0], &mut half), 0);
    }

    #[test]
    fn adv_prefers_higher_revenue_when_fresh() {
        let inst = two_by_two(250.0, 500);
        let mut st = PolicyState::new(&inst, PolicyKind::AlgAdv, PolicySettings::default());
        let d = alg_adv_step(&mut st, &inst, &inst.contexts[0]).unwrap();
        assert_eq!(d.resource, Some(1));
        assert_eq!(d.probabilities, vec![0.0, 1.0, 0.0]);
        assert_eq!(d.maximizer, Some(0));
    }

    #[test]
    fn adv_scores_with_half_consumption() {
        let inst = two_by_two(250.0, 500);
        let mut st = PolicyState::new(&inst, PolicyKind::AlgAdv, PolicySettings::default());
        st.consumption = vec![125.0, 200.0];
        // scores: 1*(1-psi(0.5))*0.9 = 0.560213 vs 1.5*(1-psi(0.8))*0.9 = 0.387114
        let d = alg_adv_step(&mut st, &inst, &inst.contexts[0]).unwrap();
        assert_eq!(d.resource, Some(0));
    }

    #[test]
    fn adv_skips_full_resource() {
        let inst = two_by_two(250.0, 500);
        let mut st = PolicyState::new(&inst, PolicyKind::AlgAdv, PolicySettings::default());
        st.consumption = vec![0.0, 250.0];
        let d = alg_adv_step(&mut st, &inst, &inst.contexts[1]).unwrap();
        assert_eq!(d.resource, Some(0));
        st.consumption = vec![250.0, 250.0];
        let d = alg_adv_step(&mut st, &inst, &inst.contexts[1]).unwrap();
        assert_eq!(d.resource, None);
        assert_eq!(d.probabilities, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn lp_redirects_depleted_mass_to_reject() {
        let inst = two_by_two(250.0, 500);
        let mut st = PolicyState::new(&inst, PolicyKind::AlgLp, PolicySettings::default());
        st.consumption = vec![250.0, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let d = alg_lp_step(&mut st, &inst, &inst.contexts[1], &mut rng).unwrap();
            assert_ne!(d.resource, Some(0));
            assert_eq!(d.probabilities[0], 0.0);
            assert!((d.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn lp_respects_resolve_cadence() {
        let inst = two_by_two(250.0, 500);
        let settings = PolicySettings {
            resolve_cadence: 50,
            ..PolicySettings::default()
        };
        let mut st = PolicyState::new(&inst, PolicyKind::AlgLp, settings);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for t in 1..=120 {
            let ctx = &inst.contexts[t % 2];
            let d = st.decide(&inst, ctx, &mut rng).unwrap();
            let solved_at = st.lp_plan().unwrap().1;
            assert_eq!(solved_at, 1 + 50 * ((t - 1) / 50));
            st.observe(&inst, &d, ctx, false).unwrap();
        }
    }

    #[test]
    fn ulwe_matches_lp_before_switch() {
        let inst = two_by_two(250.0, 500);
        let settings = PolicySettings::default();
        let mut lp = PolicyState::new(&inst, PolicyKind::AlgLp, settings);
        let mut ul = PolicyState::new(&inst, PolicyKind::Ulwe, settings);
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        for t in 1..=50 {
            let ctx = &inst.contexts[t % 2];
            let a = lp.decide(&inst, ctx, &mut r1).unwrap();
            let b = ul.decide(&inst, ctx, &mut r2).unwrap();
            assert_eq!(a, b);
            assert!(!ul.switched());
            lp.observe(&inst, &a, ctx, t % 3 == 0).unwrap();
            ul.observe(&inst, &b, ctx, t % 3 == 0).unwrap();
        }
    }

    /// One resource, A = (1,0) with f = 0.9 front-loaded for 100 periods, then
    /// B = (0,1) with f = 0.1. Capacity 130 covers all expected demand, so the
    /// LP offers the resource to everyone and planned consumption runs at 0.9
    /// per period against a pace of 130/500.
    pub(crate) fn front_loaded() -> (ProblemInstance, Vec<usize>) {
        let truth = Theta(vec![logit(0.9), logit(0.1)]);
        let inst = ProblemInstance::new(
            vec![ResourceSpec {
                revenue: 1.0,
                capacity: 130.0,
                theta_space: vec![truth],
                true_theta: 0,
            }],
            vec![
                Context::new(0, vec![1.0, 0.0]),
                Context::new(1, vec![0.0, 1.0]),
            ],
            500,
            vec![100.0, 400.0],
            true,
        )
        .unwrap();
        let types = (0..500).map(|t| usize::from(t >= 100)).collect();
        (inst, types)
    }

    #[test]
    fn ulwe_follows_adv_once_switched() {
        let (inst, types) = front_loaded();
        let mut ul = PolicyState::new(&inst, PolicyKind::Ulwe, PolicySettings::default());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut t = 0;
        while !ul.switched() {
            assert!(t < 100, "switch never fired");
            let ctx = &inst.contexts[types[t]];
            let d = ul.decide(&inst, ctx, &mut rng).unwrap();
            ul.observe(&inst, &d, ctx, false).unwrap();
            t += 1;
        }
        // oracle: first t with 0.9 t > (t/500) 130 + sqrt(2 t ln(2t / beta)), beta = 1/500
        let expect = (1..500)
            .find(|&t| {
                let t = t as f64;
                0.9 * t > t / 500.0 * 130.0 + (2.0 * t * (2.0 * t * 500.0).ln()).sqrt()
            })
            .unwrap();
        assert_eq!(ul.monitor.switch_period(), Some(expect));
        assert_eq!(
            ul.monitor.cause(),
            Some(SwitchCause::Consumption { resource: 0 })
        );

        let mut adv = PolicyState::new(&inst, PolicyKind::AlgAdv, PolicySettings::default());
        adv.consumption = ul.consumption.clone();
        adv.confidence = ul.confidence.clone();
        adv.period = ul.period;
        for ty in [0, 1, 0] {
            let ctx = &inst.contexts[ty];
            let a = ul.decide(&inst, ctx, &mut rng).unwrap();
            let b = adv.decide(&inst, ctx, &mut rng).unwrap();
            assert_eq!(a, b);
            ul.observe(&inst, &a, ctx, true).unwrap();
            adv.observe(&inst, &b, ctx, true).unwrap();
            assert!(ul.switched());
        }
    }

    #[test]
    fn policy_names_round_trip() {
        for k in [PolicyKind::AlgLp, PolicyKind::AlgAdv, PolicyKind::Ulwe] {
            assert_eq!(k.name().parse::<PolicyKind>().unwrap(), k);
        }
        assert!("greedy".parse::<PolicyKind>().is_err());
    }
}
