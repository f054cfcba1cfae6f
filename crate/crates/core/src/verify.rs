//! Acceptance suite. Each criterion runs its trial grid and returns a
//! [`Verdict`] carrying the measured numbers; tolerances are the constants
//! below.
//!
//! Trial `i` of a block with base seed `b` uses `trial_seed(b, i)`, so any
//! prefix of a block is reproducible on its own and blocks can be shared
//! between criteria.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{median, quantile, sorted, state_budget, UnwrappedProgress, WindowMonitor};
use crate::engine::{self, trial_seed, Protocol, RunReport, Scheduler, SimConfig, Simulator, Variant};
use crate::epidemic::expected_completion;
use crate::junta::{JuntaProtocol, JuntaState, Spoiler};
use crate::phase_clock::{ClockProtocol, Perturbation};

/// Clock modulus for the clock-only properties (criteria 8 and 11). The
/// clock theorem only promises its window for a large enough constant `m`;
/// the measured worst window is 10-15 phases independent of `m`, so
/// `m/4 = 20` leaves headroom while `m = 16` cannot.
pub const CLOCK_M: u32 = 80;
/// Spoiling probability per participant and interaction.
pub const SPOIL_PROBABILITY: f64 = 1e-3;
/// Reference mean for the four-agent slow protocol.
pub const SLOW_REFERENCE_MEAN: f64 = 9.5;

const SEED_LV: u64 = 0x4c56;
const SEED_FAST: u64 = 0x4641;
const SEED_EPIDEMIC: u64 = 0x4550;
const SEED_JUNTA: u64 = 0x4a55;
const SEED_CLOCK: u64 = 0x434c;
const SEED_SLOW: u64 = 0x534c;
const SEED_ROBUST: u64 = 0x524f;
const SEED_ORACLE: u64 = 0x4f52;

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    /// `PASS [ 3] name: detail`.
    pub fn line(&self) -> String {
        format!(
            "{} [{:>2}] {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail
        )
    }
}

/// `(id, name, suite)` for every criterion.
pub const CRITERIA: [(u8, &str, &str); 12] = [
    (1, "las_vegas_safety", "safety"),
    (2, "fast_whp_success", "whp"),
    (3, "las_vegas_time_scaling", "scaling"),
    (4, "epidemic_expectation", "epidemic"),
    (5, "junta_size", "junta"),
    (6, "junta_max_level_band", "junta"),
    (7, "junta_stabilization_time", "junta"),
    (8, "clock_spread_window", "clock"),
    (9, "slow_protocol_exactness", "slow"),
    (10, "state_audit", "audit"),
    (11, "clock_slowdown_robustness", "robustness"),
    (12, "two_agent_oracle", "oracle"),
];

/// Criterion ids selected by a suite name: `all`, a suite from
/// [`CRITERIA`], a criterion name, or a comma list of ids.
pub fn suite_ids(suite: &str) -> Option<Vec<u8>> {
    if suite == "all" {
        return Some(CRITERIA.iter().map(|c| c.0).collect());
    }
    let by_name: Vec<u8> = CRITERIA
        .iter()
        .filter(|c| c.1 == suite || c.2 == suite)
        .map(|c| c.0)
        .collect();
    if !by_name.is_empty() {
        return Some(by_name);
    }
    suite
        .split(',')
        .map(|s| s.trim().parse::<u8>().ok().filter(|id| (1..=12).contains(id)))
        .collect()
}

/// Trial concurrency from `POPSIM_THREADS`, else the available cores.
pub fn threads_from_env() -> usize {
    std::env::var("POPSIM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|p| p.get()).unwrap_or(1))
}

/// Map `f` over `items` on `threads` workers; output order follows input order.
pub fn par_map<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if threads <= 1 {
        return items.iter().map(f).collect();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
        .install(|| items.par_iter().map(f).collect())
}

/// Configs for trials `start..end` of a block.
pub fn block_configs(template: &SimConfig, base_seed: u64, start: usize, end: usize) -> Vec<SimConfig> {
    (start..end)
        .map(|i| SimConfig { seed: trial_seed(base_seed, i as u64), ..template.clone() })
        .collect()
}

/// Run configs through [`engine::run`].
pub fn run_trials(configs: &[SimConfig], threads: usize) -> Vec<RunReport> {
    par_map(configs, threads, |c| engine::run(c).expect("valid config"))
}

fn ratio_log2sq(r: &RunReport) -> f64 {
    let n = r.n as f64;
    r.interactions_total as f64 / (n * n.log2().powi(2))
}

/// Least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone)]
struct JuntaRun {
    n: usize,
    junta_size: usize,
    max_level: u32,
    interactions: u64,
}

/// Runs the acceptance criteria, sharing trial blocks between them.
pub struct Verifier {
    threads: usize,
    progress: bool,
    blocks: HashMap<(Variant, usize, u64, bool), Vec<RunReport>>,
    junta: HashMap<(usize, bool), Vec<JuntaRun>>,
}

impl Verifier {
    pub const JUNTA_GRID: [usize; 5] = [1 << 10, 1 << 12, 1 << 14, 1 << 16, 1 << 18];
    pub const JUNTA_TRIALS: usize = 50;

    pub fn new(threads: usize) -> Self {
        Verifier { threads: threads.max(1), progress: false, blocks: HashMap::new(), junta: HashMap::new() }
    }

    /// Log block progress to stderr.
    pub fn with_progress(mut self, on: bool) -> Self {
        self.progress = on;
        self
    }

    fn log(&self, msg: impl AsRef<str>) {
        if self.progress {
            eprintln!("[verify] {}", msg.as_ref());
        }
    }

    /// First `count` trials of a default-config block, computing only the
    /// trials not already cached.
    fn block(&mut self, variant: Variant, n: usize, base: u64, count: usize, audit: bool) -> Vec<RunReport> {
        let key = (variant, n, base, audit);
        let have = self.blocks.get(&key).map_or(0, Vec::len);
        if have < count {
            self.log(format!("{variant} n={n}: trials {have}..{count}"));
            let mut template = SimConfig::new(variant, n, 0);
            template.audit_states = audit;
            let fresh = run_trials(&block_configs(&template, base, have, count), self.threads);
            self.blocks.entry(key).or_default().extend(fresh);
        }
        self.blocks[&key][..count].to_vec()
    }

    fn junta_block(&mut self, n: usize, spoiled: bool) -> Vec<JuntaRun> {
        if let Some(runs) = self.junta.get(&(n, spoiled)) {
            return runs.clone();
        }
        self.log(format!("junta n={n} spoiled={spoiled}: {} trials", Self::JUNTA_TRIALS));
        let mut template = SimConfig::new(Variant::JuntaOnly, n, 0);
        template.audit_states = false;
        let configs = block_configs(&template, SEED_JUNTA, 0, Self::JUNTA_TRIALS);
        let runs = par_map(&configs, self.threads, |c| {
            let mut p = JuntaProtocol::new(c.n);
            if spoiled {
                p = p.with_spoiler(Spoiler { probability: SPOIL_PROBABILITY, seed: c.seed ^ 0x5901 });
            }
            let r = Simulator::new(c.clone(), p).expect("valid config").run();
            JuntaRun {
                n: c.n,
                junta_size: r.junta_size.unwrap_or(0),
                max_level: r.max_level.unwrap_or(0),
                interactions: r.interactions_total,
            }
        });
        self.junta.insert((n, spoiled), runs.clone());
        runs
    }

    pub fn run(&mut self, id: u8) -> Verdict {
        let (_, name, _) = CRITERIA[(id - 1) as usize];
        self.log(format!("criterion {id}: {name}"));
        let (passed, detail) = match id {
            1 => self.las_vegas_safety(),
            2 => self.fast_whp(),
            3 => self.las_vegas_scaling(),
            4 => self.epidemic_expectation(),
            5 => self.junta_size(),
            6 => self.junta_level_band(),
            7 => self.junta_time(),
            8 => self.clock_window(),
            9 => self.slow_exactness(),
            10 => self.state_audit(),
            11 => self.robustness(),
            12 => self.two_agent_oracle(),
            _ => panic!("unknown criterion {id}"),
        };
        Verdict { id, name, passed, detail }
    }

    pub fn run_all(&mut self, ids: &[u8]) -> Vec<Verdict> {
        ids.iter().map(|&id| self.run(id)).collect()
    }

    fn las_vegas_safety(&mut self) -> (bool, String) {
        let mut passed = true;
        let mut parts = Vec::new();
        for (n, trials) in [(512, 1000), (4096, 200)] {
            let runs = self.block(Variant::LasVegas, n, SEED_LV, trials, false);
            let good = runs
                .iter()
                .filter(|r| r.stabilized && r.leader_count_final == 1 && r.violations.is_empty())
                .count();
            passed &= good == trials;
            parts.push(format!("n={n}: {good}/{trials} single leader"));
        }
        (passed, parts.join("; "))
    }

    fn fast_whp(&mut self) -> (bool, String) {
        const TRIALS: usize = 500;
        const MIN_FRACTION: f64 = 0.99;
        let runs = self.block(Variant::Fast, 4096, SEED_FAST, TRIALS, true);
        let good = runs.iter().filter(|r| r.stabilized && r.leader_count_final == 1).count();
        let frac = good as f64 / TRIALS as f64;
        (frac >= MIN_FRACTION, format!("n=4096: {good}/{TRIALS} = {frac:.3} (need >= {MIN_FRACTION})"))
    }

    fn las_vegas_scaling(&mut self) -> (bool, String) {
        const TRIALS: usize = 50;
        const MAX_SPREAD: f64 = 3.0;
        let mut medians = Vec::new();
        let mut parts = Vec::new();
        for e in [10u32, 12, 14, 16] {
            let n = 1usize << e;
            let runs = self.block(Variant::LasVegas, n, SEED_LV, TRIALS, false);
            let ratios: Vec<f64> = runs.iter().map(ratio_log2sq).collect();
            let med = median(&ratios);
            let unstable = runs.iter().filter(|r| !r.stabilized).count();
            medians.push(med);
            parts.push(format!("2^{e}: {med:.1}{}", if unstable > 0 { format!(" ({unstable} capped)") } else { String::new() }));
        }
        let hi = medians.iter().cloned().fold(f64::MIN, f64::max);
        let lo = medians.iter().cloned().fold(f64::MAX, f64::min);
        let spread = hi / lo;
        (
            spread < MAX_SPREAD,
            format!("median interactions/(n log2^2 n) {}; spread {spread:.2}x (need < {MAX_SPREAD})", parts.join(", ")),
        )
    }

    fn epidemic_expectation(&mut self) -> (bool, String) {
        const N: usize = 10_000;
        const TRIALS: usize = 100;
        const TOLERANCE: f64 = 0.10;
        let runs = self.block(Variant::EpidemicOnly, N, SEED_EPIDEMIC, TRIALS, false);
        let mean = runs.iter().map(|r| r.epidemic_completion.unwrap_or(u64::MAX) as f64).sum::<f64>() / TRIALS as f64;
        let oracle = expected_completion(N);
        let rel = (mean - oracle).abs() / oracle;
        (rel <= TOLERANCE, format!("mean {mean:.0} vs oracle {oracle:.0} (rel. error {rel:.4}, need <= {TOLERANCE})"))
    }

    fn junta_size(&mut self) -> (bool, String) {
        const MAX_MEDIAN: f64 = 10.0;
        let mut passed = true;
        let mut parts = Vec::new();
        for spoiled in [false, true] {
            let mut xs = Vec::new();
            let mut meds = Vec::new();
            let mut empty = 0;
            for n in Self::JUNTA_GRID {
                let runs = self.junta_block(n, spoiled);
                empty += runs.iter().filter(|r| r.junta_size == 0).count();
                let nf = n as f64;
                let ratios: Vec<f64> = runs.iter().map(|r| r.junta_size as f64 / (nf * nf.ln()).sqrt()).collect();
                xs.push(nf.log2());
                meds.push(median(&ratios));
            }
            let s = slope(&xs, &meds);
            let max = meds.iter().cloned().fold(f64::MIN, f64::max);
            passed &= max < MAX_MEDIAN && s <= 0.0 && empty == 0;
            parts.push(format!(
                "{}: medians [{}], slope per log2 n {s:+.4} (need <= 0), max {max:.3} (need < {MAX_MEDIAN}), empty juntas {empty}",
                if spoiled { "spoiled" } else { "plain" },
                meds.iter().map(|m| format!("{m:.3}")).collect::<Vec<_>>().join(", ")
            ));
        }
        (passed, parts.join("; "))
    }

    fn junta_level_band(&mut self) -> (bool, String) {
        const MAX_WIDTH: f64 = 3.0;
        let mut passed = true;
        let mut parts = Vec::new();
        for spoiled in [false, true] {
            let offsets: Vec<f64> = Self::JUNTA_GRID
                .iter()
                .flat_map(|&n| self.junta_block(n, spoiled))
                .map(|r| r.max_level as f64 - (r.n as f64).log2().log2())
                .collect();
            let lo = offsets.iter().cloned().fold(f64::MAX, f64::min);
            let hi = offsets.iter().cloned().fold(f64::MIN, f64::max);
            passed &= hi - lo <= MAX_WIDTH;
            parts.push(format!(
                "{}: L - log2 log2 n in [{lo:.2}, {hi:.2}], width {:.2} (need <= {MAX_WIDTH})",
                if spoiled { "spoiled" } else { "plain" },
                hi - lo
            ));
        }
        (passed, parts.join("; "))
    }

    fn junta_time(&mut self) -> (bool, String) {
        const MAX_SPREAD: f64 = 2.0;
        let mut passed = true;
        let mut parts = Vec::new();
        for spoiled in [false, true] {
            let p99s: Vec<f64> = Self::JUNTA_GRID
                .iter()
                .map(|&n| {
                    let nf = n as f64;
                    let v: Vec<f64> = self
                        .junta_block(n, spoiled)
                        .iter()
                        .map(|r| r.interactions as f64 / (nf * nf.ln()))
                        .collect();
                    quantile(&sorted(&v), 0.99)
                })
                .collect();
            let hi = p99s.iter().cloned().fold(f64::MIN, f64::max);
            let lo = p99s.iter().cloned().fold(f64::MAX, f64::min);
            passed &= hi / lo < MAX_SPREAD;
            parts.push(format!(
                "{}: p99 interactions/(n ln n) [{}], spread {:.2}x (need < {MAX_SPREAD})",
                if spoiled { "spoiled" } else { "plain" },
                p99s.iter().map(|m| format!("{m:.2}")).collect::<Vec<_>>().join(", "),
                hi / lo
            ));
        }
        (passed, parts.join("; "))
    }

    /// Fraction of seeds whose every snapshot window stays within `m/4`.
    fn window_fraction(&self, n: usize, m: u32, trials: usize) -> (usize, u32) {
        let mut template = SimConfig::new(Variant::ClockOnly, n, 0);
        template.m = m;
        template.audit_states = false;
        let configs = block_configs(&template, SEED_CLOCK, 0, trials);
        let widths = par_map(&configs, self.threads, |c| {
            let mut monitor = WindowMonitor::new(c.m);
            let mut sim = Simulator::new(c.clone(), ClockProtocol::from_config(c)).expect("valid config");
            sim.add_monitor(&mut monitor);
            sim.run_to_end();
            let finished = sim.protocol().passes().iter().all(|&p| p >= c.clock_passes);
            drop(sim);
            if finished { monitor.max_width() } else { u32::MAX }
        });
        (widths.iter().filter(|&&w| w <= m / 4).count(), widths.iter().copied().max().unwrap_or(0))
    }

    fn clock_window(&mut self) -> (bool, String) {
        const TRIALS: usize = 200;
        const MIN_FRACTION: f64 = 0.99;
        let mut passed = true;
        let mut parts = Vec::new();
        for n in [1024usize, 4096] {
            self.log(format!("clock n={n} m={CLOCK_M}"));
            let (good, worst) = self.window_fraction(n, CLOCK_M, TRIALS);
            let (good16, worst16) = self.window_fraction(n, SimConfig::DEFAULT_M, TRIALS);
            let frac = good as f64 / TRIALS as f64;
            passed &= frac >= MIN_FRACTION;
            parts.push(format!(
                "n={n}: m={CLOCK_M} {good}/{TRIALS} within {} (worst {worst}); m=16 {good16}/{TRIALS} within 4 (worst {worst16})",
                CLOCK_M / 4
            ));
        }
        (passed, format!("{} (need >= {MIN_FRACTION} at m={CLOCK_M})", parts.join("; ")))
    }

    fn slow_exactness(&mut self) -> (bool, String) {
        const TRIALS: usize = 100_000;
        const TOLERANCE: f64 = 0.10;
        let runs = self.block(Variant::SlowOnly, 4, SEED_SLOW, TRIALS, false);
        let single = runs.iter().filter(|r| r.stabilized && r.leader_count_final == 1).count();
        let mean = runs.iter().map(|r| r.interactions_total as f64).sum::<f64>() / TRIALS as f64;
        let chain = slow_expected_interactions(4);
        let rel = (mean - SLOW_REFERENCE_MEAN).abs() / SLOW_REFERENCE_MEAN;
        (
            rel <= TOLERANCE && single == TRIALS,
            format!(
                "mean {mean:.3} vs reference {SLOW_REFERENCE_MEAN} (rel. error {rel:.4}, need <= {TOLERANCE}); \
                 chain expectation {chain:.3}; single survivor {single}/{TRIALS}"
            ),
        )
    }

    fn state_audit(&mut self) -> (bool, String) {
        let mut passed = true;
        let mut parts = Vec::new();
        for (n, trials) in [(4096usize, 500usize), (1 << 16, 2)] {
            let runs = self.block(Variant::Fast, n, SEED_FAST, trials, true);
            let observed = runs.iter().filter_map(|r| r.distinct_states_observed).max().unwrap_or(0);
            let budget = state_budget(SimConfig::DEFAULT_M, n, SimConfig::LEVEL_CAP_SLACK);
            passed &= observed <= budget;
            parts.push(format!("n={n}: max {observed} distinct over {trials} runs, budget {budget}"));
        }
        (passed, parts.join("; "))
    }

    fn robustness(&mut self) -> (bool, String) {
        const N: usize = 1024;
        const SEEDS: usize = 50;
        let seeds: Vec<u64> = (0..SEEDS as u64).map(|i| trial_seed(SEED_ROBUST, i)).collect();
        let mut parts = Vec::new();
        let mut passed = true;
        for (label, demote, void) in [("demote 50%", 0.5, 0.0), ("void 20%", 0.0, 0.2)] {
            let results = par_map(&seeds, self.threads, |&seed| {
                lockstep_lead(N, CLOCK_M, seed, Perturbation {
                    seed: seed ^ 0xfa17,
                    demote_fraction: demote,
                    demote_at: 200 * N as u64,
                    void_probability: void,
                })
            });
            let ahead = results.iter().filter(|r| r.max_lead > 0).count();
            let steps: u64 = results.iter().map(|r| r.steps).sum();
            passed &= ahead == 0;
            parts.push(format!("{label}: {ahead}/{SEEDS} seeds with an agent ahead ({steps} paired steps)"));
        }
        (passed, format!("n={N}, m={CLOCK_M}: {}", parts.join("; ")))
    }

    fn two_agent_oracle(&mut self) -> (bool, String) {
        const SEEDS: u64 = 10_000;
        let seeds: Vec<u64> = (0..SEEDS).map(|i| trial_seed(SEED_ORACLE, i)).collect();
        let mismatches = par_map(&seeds, self.threads, |&seed| {
            let mut bad = 0;
            let e = engine::run(&SimConfig::new(Variant::EpidemicOnly, 2, seed)).expect("valid config");
            let t = epidemic_chain(seed);
            if !(e.stabilized && e.interactions_total == t && e.epidemic_completion == Some(t)) {
                bad += 1;
            }
            let j = engine::run(&SimConfig::new(Variant::JuntaOnly, 2, seed)).expect("valid config");
            let (t, level, members) = junta_chain(seed);
            if !(j.stabilized
                && j.interactions_total == t
                && j.max_level == Some(level)
                && j.junta_size == Some(members))
            {
                bad += 1;
            }
            bad
        });
        let bad: usize = mismatches.iter().sum();
        (bad == 0, format!("{SEEDS} seeds x 2 protocols, {bad} mismatches"))
    }
}

/// Expected interactions of the pure slow protocol from `n` candidates:
/// `Σ_{c=2}^{n} n(n-1)/(c(c-1))`, one geometric wait per elimination.
pub fn slow_expected_interactions(n: usize) -> f64 {
    let nf = n as f64;
    (2..=n).map(|c| nf * (nf - 1.0) / (c as f64 * (c as f64 - 1.0))).sum()
}

/// Epidemic with two agents, traced from the scheduler alone: the run ends
/// at the first draw whose initiator is agent 0.
pub fn epidemic_chain(seed: u64) -> u64 {
    let mut s = Scheduler::new(2, seed);
    let mut t = 0;
    loop {
        t += 1;
        if s.draw().initiator == 0 {
            return t;
        }
    }
}

/// Forming_junta with two agents traced by hand: the first draw sends the
/// initiator to `(1,1)` and the responder to `(0,0)`; the run ends when the
/// level-1 agent next responds, freezing at `(1,0)`. Returns
/// `(interactions, max level, members)`.
pub fn junta_chain(seed: u64) -> (u64, u32, usize) {
    let mut s = Scheduler::new(2, seed);
    let climber = s.draw().initiator;
    let mut state = [JuntaState::DEAD; 2];
    state[climber] = JuntaState::new(1, true);
    let mut t = 1;
    loop {
        t += 1;
        if s.draw().responder == climber {
            state[climber] = JuntaState::new(1, false);
            break;
        }
    }
    let level = state.iter().map(|a| a.level).max().unwrap_or(0);
    (t, level as u32, state.iter().filter(|a| a.level == level).count())
}

/// Result of a paired clock run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lockstep {
    /// Largest amount by which a perturbed agent's unwrapped ordinary
    /// progress exceeded its unperturbed counterpart.
    pub max_lead: u64,
    pub steps: u64,
}

/// Run an unperturbed and a perturbed clock on the same scheduler stream
/// until the unperturbed one completes its passes, comparing the unwrapped
/// progress of both participants after every interaction.
pub fn lockstep_lead(n: usize, m: u32, seed: u64, perturbation: Perturbation) -> Lockstep {
    let mut config = SimConfig::new(Variant::ClockOnly, n, seed);
    config.m = m;
    config.audit_states = false;
    let mut base = Simulator::new(config.clone(), ClockProtocol::from_config(&config)).expect("valid config");
    let mut pert = Simulator::new(
        config.clone(),
        ClockProtocol::from_config(&config).with_perturbation(perturbation),
    )
    .expect("valid config");
    let mut base_progress = UnwrappedProgress::new(n, m);
    let mut pert_progress = UnwrappedProgress::new(n, m);
    for i in 0..n {
        base_progress.observe(i, &base.protocol().agents()[i]);
        pert_progress.observe(i, &pert.protocol().agents()[i]);
    }
    let cap = config.effective_max_interactions();
    let mut max_lead = 0;
    while !base.protocol().is_stabilized() && base.steps() < cap {
        let it = base.step();
        let it2 = pert.step();
        debug_assert_eq!(it, it2);
        for idx in [it.responder, it.initiator] {
            let b = base_progress.observe(idx, &base.protocol().agents()[idx]);
            let p = pert_progress.observe(idx, &pert.protocol().agents()[idx]);
            max_lead = max_lead.max(p.saturating_sub(b));
        }
    }
    Lockstep { max_lead, steps: base.steps() }
}
