//! Monitors and statistics: state audit, level watermarks, clock windows,
//! pass spacing, external-tick leader counts, trial aggregates.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::engine::{Monitor, MonitorCtx, RunReport, Variant};
use crate::junta::JuntaState;
use crate::leader_election::AgentState;
use crate::phase_clock::{cyclic_distance, leq_mod, ClockAgent, Phase};

/// Agents whose clocks can be read. Returns `(level, ordinary, external)`
/// for agents whose clocks are running.
pub trait Clocked {
    fn clock(&self) -> Option<(u8, Phase, Phase)>;
}

impl Clocked for ClockAgent {
    fn clock(&self) -> Option<(u8, Phase, Phase)> {
        Some((0, self.ordinary, self.external))
    }
}

impl Clocked for AgentState {
    fn clock(&self) -> Option<(u8, Phase, Phase)> {
        (!self.active).then_some((self.level, self.ordinary, self.external))
    }
}

/// Phases of the running clocks on the highest level present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PhaseSnapshot {
    pub interaction: u64,
    pub ordinary: Vec<Phase>,
    pub external: Vec<Phase>,
    pub leaders: usize,
}

pub fn record_snapshot<A: Clocked>(agents: &[A], interaction: u64, leaders: usize) -> PhaseSnapshot {
    let top = agents.iter().filter_map(|a| a.clock()).map(|c| c.0).max();
    let mut ordinary = Vec::new();
    let mut external = Vec::new();
    if let Some(top) = top {
        for (l, x, y) in agents.iter().filter_map(|a| a.clock()) {
            if l == top {
                ordinary.push(x);
                external.push(y);
            }
        }
    }
    PhaseSnapshot { interaction, ordinary, external, leaders }
}

/// Smallest `w` such that some anchor `p` has every phase `q` with
/// `p ≤_m q` and forward distance at most `w`. Returns `m` when no anchor
/// works (the phases span more than half the dial).
pub fn clock_window(phases: &[Phase], m: u32) -> u32 {
    assert!(!phases.is_empty(), "empty snapshot");
    let mut present = vec![false; m as usize];
    for &q in phases {
        present[q as usize] = true;
    }
    let mut best = m;
    for p in 0..m as Phase {
        let mut width = 0;
        let mut ok = true;
        for q in 0..m as Phase {
            if present[q as usize] {
                if !leq_mod(p, q, m) {
                    ok = false;
                    break;
                }
                width = width.max(cyclic_distance(p, q, m));
            }
        }
        if ok {
            best = best.min(width);
        }
    }
    best
}

/// Set of state keys seen. Dense bitmap for small keys, hash set above.
#[derive(Debug, Clone, Default)]
pub struct StateAudit {
    bits: Vec<u64>,
    sparse: HashSet<u64>,
    count: u64,
}

impl StateAudit {
    const DENSE_LIMIT: u64 = 1 << 28;

    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn insert(&mut self, key: u64) {
        if key < Self::DENSE_LIMIT {
            let (w, b) = ((key / 64) as usize, key % 64);
            if w >= self.bits.len() {
                self.bits.resize(w + 1, 0);
            }
            let mask = 1u64 << b;
            if self.bits[w] & mask == 0 {
                self.bits[w] |= mask;
                self.count += 1;
            }
        } else if self.sparse.insert(key) {
            self.count += 1;
        }
    }

    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

/// State budget `48·m²·(⌈log₂log₂n⌉ + c)`.
pub fn state_budget(m: u32, n: usize, c: u32) -> u64 {
    48 * (m as u64).pow(2) * (crate::engine::ceil_log2_log2(n) + c) as u64
}

/// Highest Forming_junta level each agent has ever held; `B_l` is the number
/// of agents whose watermark is at least `l`.
#[derive(Debug, Clone)]
pub struct LevelWatermark {
    reached: Vec<u8>,
}

impl LevelWatermark {
    pub fn new(n: usize) -> Self {
        LevelWatermark { reached: vec![0; n] }
    }

    pub fn observe(&mut self, idx: usize, level: u8) {
        let r = &mut self.reached[idx];
        *r = (*r).max(level);
    }

    /// `[B_0, B_1, ..., B_L]`.
    pub fn counts(&self) -> Vec<usize> {
        let top = self.reached.iter().copied().max().unwrap_or(0) as usize;
        let mut hist = vec![0usize; top + 1];
        for &r in &self.reached {
            hist[r as usize] += 1;
        }
        let mut acc = 0;
        for h in hist.iter_mut().rev() {
            acc += *h;
            *h = acc;
        }
        hist
    }
}

impl Monitor<JuntaState> for LevelWatermark {
    fn on_interaction(&mut self, ctx: &MonitorCtx, agents: &[JuntaState]) {
        let it = ctx.interaction;
        self.observe(it.responder, agents[it.responder].level);
        self.observe(it.initiator, agents[it.initiator].level);
    }
}

/// Clock window of every snapshot on the top level.
#[derive(Debug, Clone)]
pub struct WindowMonitor {
    m: u32,
    pub widths: Vec<(u64, u32)>,
    pub keep_snapshots: bool,
    pub snapshots: Vec<PhaseSnapshot>,
}

impl WindowMonitor {
    pub fn new(m: u32) -> Self {
        WindowMonitor { m, widths: Vec::new(), keep_snapshots: false, snapshots: Vec::new() }
    }

    pub fn max_width(&self) -> u32 {
        self.widths.iter().map(|w| w.1).max().unwrap_or(0)
    }
}

impl<A: Clocked> Monitor<A> for WindowMonitor {
    fn on_snapshot(&mut self, step: u64, agents: &[A], leaders: usize) {
        let snap = record_snapshot(agents, step, leaders);
        if !snap.ordinary.is_empty() {
            self.widths.push((step, clock_window(&snap.ordinary, self.m)));
        }
        if self.keep_snapshots {
            self.snapshots.push(snap);
        }
    }
}

/// Forward progress of each agent's ordinary clock, unwrapped: every update
/// adds the forward distance from the old phase to the new one.
#[derive(Debug, Clone)]
pub struct UnwrappedProgress {
    m: u32,
    last: Vec<Option<(u8, Phase)>>,
    pub progress: Vec<u64>,
}

impl UnwrappedProgress {
    pub fn new(n: usize, m: u32) -> Self {
        UnwrappedProgress { m, last: vec![None; n], progress: vec![0; n] }
    }

    /// Record agent `idx`'s current clock; returns its unwrapped progress.
    pub fn observe<A: Clocked>(&mut self, idx: usize, agent: &A) -> u64 {
        if let Some((level, x, _)) = agent.clock() {
            match self.last[idx] {
                Some((l, old)) if l == level => {
                    self.progress[idx] += cyclic_distance(old, x, self.m) as u64;
                }
                _ => {}
            }
            self.last[idx] = Some((level, x));
        }
        self.progress[idx]
    }
}

/// Interactions between consecutive passes through zero, per agent.
#[derive(Debug, Clone)]
pub struct PassSpacing {
    last_phase: Vec<Phase>,
    last_pass: Vec<Option<u64>>,
    pub gaps: Vec<u64>,
}

impl PassSpacing {
    pub fn new(n: usize) -> Self {
        PassSpacing { last_phase: vec![0; n], last_pass: vec![None; n], gaps: Vec::new() }
    }
}

impl<A: Clocked> Monitor<A> for PassSpacing {
    fn on_interaction(&mut self, ctx: &MonitorCtx, agents: &[A]) {
        let idx = ctx.interaction.responder;
        if let Some((_, x, _)) = agents[idx].clock() {
            if x < self.last_phase[idx] {
                if let Some(prev) = self.last_pass[idx] {
                    self.gaps.push(ctx.step - prev);
                }
                self.last_pass[idx] = Some(ctx.step);
            }
            self.last_phase[idx] = x;
        }
    }
}

/// Leader count each time the population's furthest external clock advances.
#[derive(Debug, Clone)]
pub struct ExternalTicks {
    tracker: ExternalTracker,
    best: u64,
    pub ticks: Vec<(u64, usize)>,
}

#[derive(Debug, Clone)]
struct ExternalTracker {
    m: u32,
    last: Vec<Option<(u8, Phase)>>,
    progress: Vec<u64>,
}

impl ExternalTicks {
    pub fn new(n: usize, m: u32) -> Self {
        ExternalTicks {
            tracker: ExternalTracker { m, last: vec![None; n], progress: vec![0; n] },
            best: 0,
            ticks: Vec::new(),
        }
    }

    /// Number of external ticks until the leader count first reached 1.
    pub fn ticks_to_unique(&self) -> Option<u64> {
        self.ticks.iter().find(|t| t.1 == 1).map(|t| t.0)
    }
}

impl<A: Clocked> Monitor<A> for ExternalTicks {
    fn on_interaction(&mut self, ctx: &MonitorCtx, agents: &[A]) {
        let idx = ctx.interaction.responder;
        let t = &mut self.tracker;
        if let Some((level, _, y)) = agents[idx].clock() {
            match t.last[idx] {
                Some((l, old)) if l == level => {
                    t.progress[idx] += cyclic_distance(old, y, t.m) as u64;
                }
                Some(_) => t.progress[idx] = 0,
                None => {}
            }
            t.last[idx] = Some((level, y));
            if t.progress[idx] > self.best {
                self.best = t.progress[idx];
                self.ticks.push((self.best, ctx.leader_count));
            }
        }
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Per-(n, variant) collections of trial statistics.
#[derive(Debug, Clone, Default, Serialize)]
pub struct TrialAggregate {
    groups: BTreeMap<(usize, String), BTreeMap<String, Vec<f64>>>,
    trials: BTreeMap<(usize, String), usize>,
}

impl TrialAggregate {
    pub const QUANTILES: [f64; 9] = [0.0, 0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99, 1.0];

    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, n: usize, variant: Variant, statistic: &str, value: f64) {
        self.groups
            .entry((n, variant.to_string()))
            .or_default()
            .entry(statistic.to_string())
            .or_default()
            .push(value);
    }

    /// Record the standard statistics of one run.
    pub fn add_report(&mut self, r: &RunReport) {
        let key = (r.n, r.variant.to_string());
        *self.trials.entry(key).or_default() += 1;
        let n = r.n as f64;
        self.add(r.n, r.variant, "interactions", r.interactions_total as f64);
        self.add(r.n, r.variant, "parallel_time", r.parallel_time);
        self.add(r.n, r.variant, "interactions_per_n_ln_n", r.interactions_total as f64 / (n * n.ln()));
        self.add(
            r.n,
            r.variant,
            "interactions_per_n_log2sq_n",
            r.interactions_total as f64 / (n * n.log2().powi(2)),
        );
        self.add(r.n, r.variant, "stabilized", r.stabilized as u8 as f64);
        self.add(r.n, r.variant, "leader_count_final", r.leader_count_final as f64);
        self.add(r.n, r.variant, "violations", r.violations.len() as f64);
        if let Some(j) = r.junta_size {
            self.add(r.n, r.variant, "junta_size", j as f64);
        }
        if let Some(l) = r.max_level {
            self.add(r.n, r.variant, "max_level", l as f64);
        }
        if let Some(e) = r.epidemic_completion {
            self.add(r.n, r.variant, "epidemic_completion", e as f64);
        }
    }

    pub fn values(&self, n: usize, variant: Variant, statistic: &str) -> Option<&[f64]> {
        self.groups
            .get(&(n, variant.to_string()))
            .and_then(|g| g.get(statistic))
            .map(|v| v.as_slice())
    }

    pub fn trial_count(&self, n: usize, variant: Variant) -> usize {
        self.trials.get(&(n, variant.to_string())).copied().unwrap_or(0)
    }

    pub fn csv_header() -> &'static str {
        "n,variant,statistic,quantile,value"
    }

    /// One row per `(n, variant, statistic, quantile)`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(Self::csv_header());
        out.push('\n');
        for ((n, variant), stats) in &self.groups {
            for (name, values) in stats {
                let s = sorted(values);
                for q in Self::QUANTILES {
                    let _ = writeln!(out, "{n},{variant},{name},{q},{}", quantile(&s, q));
                }
            }
        }
        out
    }

    /// JSON summary: per group, per statistic, count, mean and quantiles.
    pub fn to_json(&self) -> String {
        let mut doc = serde_json::Map::new();
        for ((n, variant), stats) in &self.groups {
            let mut group = serde_json::Map::new();
            for (name, values) in stats {
                let s = sorted(values);
                let mean = s.iter().sum::<f64>() / s.len() as f64;
                let qs: serde_json::Map<String, serde_json::Value> = Self::QUANTILES
                    .iter()
                    .map(|&q| (q.to_string(), serde_json::json!(quantile(&s, q))))
                    .collect();
                group.insert(
                    name.clone(),
                    serde_json::json!({ "count": s.len(), "mean": mean, "quantiles": qs }),
                );
            }
            doc.insert(format!("{variant}/n={n}"), serde_json::Value::Object(group));
        }
        serde_json::to_string_pretty(&serde_json::Value::Object(doc)).expect("summary serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{SimConfig, Simulator};
    use crate::junta::JuntaProtocol;
    use crate::phase_clock::{ClockProtocol, Role};

    /// Brute force: try every width and anchor, with the circular order
    /// written out from its piecewise definition.
    fn window_oracle(phases: &[Phase], m: u32) -> u32 {
        let leq = |x: i64, y: i64| {
            let mx = if 2 * (x - y).abs() <= m as i64 { x.max(y) } else { x.min(y) };
            mx == y
        };
        for w in 0..=m / 2 {
            for p in 0..m {
                if phases.iter().all(|&q| {
                    let d = (q as u32 + m - p) % m;
                    d <= w && leq(p as i64, q as i64)
                }) {
                    return w;
                }
            }
        }
        m
    }

    #[test]
    fn window_examples() {
        assert_eq!(clock_window(&[3, 3, 3], 8), 0);
        assert_eq!(clock_window(&[7, 0, 1], 8), 2);
        assert_eq!(clock_window(&[0, 4], 8), 4);
        assert_eq!(clock_window(&[0, 2, 4, 6], 8), 8);
    }

    #[test]
    fn window_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5000 {
            let m = rng.gen_range(2..20u32);
            let len = rng.gen_range(1..6);
            let base = rng.gen_range(0..m);
            let spread = rng.gen_range(0..m);
            let phases: Vec<Phase> = (0..len)
                .map(|_| ((base + rng.gen_range(0..=spread)) % m) as Phase)
                .collect();
            assert_eq!(clock_window(&phases, m), window_oracle(&phases, m), "{phases:?} m={m}");
        }
    }

    #[test]
    fn snapshot_cadence() {
        let mut c = SimConfig::new(Variant::ClockOnly, 100, 1);
        c.clock_passes = 1000;
        c.snapshot_every = Some(100);
        c.max_interactions = Some(1000);
        let mut w = WindowMonitor::new(16);
        w.keep_snapshots = true;
        let mut sim = Simulator::new(c, ClockProtocol::new(100, 16, 10, 1000)).unwrap();
        sim.add_monitor(&mut w);
        sim.run_to_end();
        drop(sim);
        assert_eq!(w.snapshots.len(), 10);
        assert_eq!(w.snapshots[0].ordinary.len(), 100);
    }

    #[test]
    fn uniform_population_has_zero_window() {
        let agents = vec![
            ClockAgent {
                ordinary: 5,
                external: 0,
                role: Role::Follower,
                flags: Default::default()
            };
            10
        ];
        let s = record_snapshot(&agents, 0, 0);
        assert_eq!(clock_window(&s.ordinary, 16), 0);
    }

    #[test]
    fn audit_counts_distinct() {
        let mut a = StateAudit::new();
        for k in [1, 5, 1, 1 << 40, 5, 1 << 40, 0] {
            a.insert(k);
        }
        assert_eq!(a.len(), 4);
    }

    #[test]
    fn budget_formula() {
        assert_eq!(state_budget(16, 1 << 12, 6), 48 * 256 * 10);
    }

    #[test]
    fn watermarks_are_monotone_and_replayable() {
        for seed in 0..5 {
            let run = |seed| {
                let c = SimConfig::new(Variant::JuntaOnly, 4096, seed);
                let mut w = LevelWatermark::new(4096);
                let mut sim = Simulator::new(c, JuntaProtocol::new(4096)).unwrap();
                sim.add_monitor(&mut w);
                sim.run_to_end();
                let r = sim.report();
                drop(sim);
                (w.counts(), r)
            };
            let (b, r) = run(seed);
            assert!(b.windows(2).all(|p| p[0] >= p[1]));
            assert_eq!(b[0], 4096);
            assert!(b[1] >= 1 && b[1] <= 2048);
            assert_eq!(*b.last().unwrap(), r.junta_size.unwrap());
            assert_eq!(run(seed).0, b);
        }
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }

    #[test]
    fn aggregate_csv_rows() {
        let mut agg = TrialAggregate::new();
        for seed in 0..3 {
            let r = crate::engine::run(&SimConfig::new(Variant::EpidemicOnly, 50, seed)).unwrap();
            agg.add_report(&r);
        }
        assert_eq!(agg.trial_count(50, Variant::EpidemicOnly), 3);
        let csv = agg.to_csv();
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows[0], TrialAggregate::csv_header());
        assert!(rows.iter().any(|r| r.starts_with("50,epidemic_only,epidemic_completion,0.5,")));
        let json: serde_json::Value = serde_json::from_str(&agg.to_json()).unwrap();
        assert_eq!(json["epidemic_only/n=50"]["interactions"]["count"], 3);
    }
}
