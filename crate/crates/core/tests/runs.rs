use popsim::analysis::{median, ExternalTicks, PassSpacing, WindowMonitor};
use popsim::engine::{Monitor, MonitorCtx, Protocol, SimConfig, Simulator, Variant};
use popsim::epidemic::EpidemicProtocol;
use popsim::junta::JuntaProtocol;
use popsim::leader_election::{ElectionProtocol, SlowProtocol};
use popsim::phase_clock::ClockProtocol;
use popsim::verify::slow_expected_interactions;
use popsim::{run, trial_seed};

fn config(variant: Variant, n: usize, seed: u64) -> SimConfig {
    let mut c = SimConfig::new(variant, n, seed);
    c.audit_states = false;
    c
}

#[test]
fn reports_repeat_for_equal_seeds() {
    for variant in Variant::ALL {
        for seed in 0..3 {
            let mut c = SimConfig::new(variant, 96, seed);
            c.clock_passes = 3;
            let a = run(&c).unwrap();
            assert_eq!(a, run(&c).unwrap(), "{variant} seed {seed}");
            assert!(a.stabilized, "{variant} seed {seed}");
            let other = run(&SimConfig { seed: seed + 100, ..c.clone() }).unwrap();
            assert_ne!(a.leader_trajectory, other.leader_trajectory, "{variant}");
        }
    }
}

/// Runs to the end; if the run stabilized, checks that `10n` further
/// interactions keep it stabilized with the same leader count.
fn stays_stable<P: Protocol>(mut sim: Simulator<'_, P>, n: usize) -> bool {
    sim.run_to_end();
    if !sim.protocol().is_stabilized() {
        return false;
    }
    let leaders = sim.protocol().leader_count();
    for _ in 0..10 * n {
        sim.step();
        assert!(sim.protocol().is_stabilized());
        assert_eq!(sim.protocol().leader_count(), leaders);
    }
    true
}

#[test]
fn stabilization_is_permanent() {
    let n = 64;
    let mut fast_failures = 0;
    for i in 0..100 {
        let seed = trial_seed(77, i);
        let c = config(Variant::LasVegas, n, seed);
        assert!(stays_stable(Simulator::new(c.clone(), ElectionProtocol::from_config(&c)).unwrap(), n));
        let c = config(Variant::SlowOnly, 16, seed);
        assert!(stays_stable(Simulator::new(c, SlowProtocol::new(16)).unwrap(), 16));
        let c = config(Variant::JuntaOnly, n, seed);
        assert!(stays_stable(Simulator::new(c, JuntaProtocol::new(n)).unwrap(), n));
        let c = config(Variant::EpidemicOnly, n, seed);
        assert!(stays_stable(Simulator::new(c, EpidemicProtocol::new(n)).unwrap(), n));
        // The fast variant can lose every leader at this size; its clocks
        // then stop and the run ends at the cap.
        let c = SimConfig { max_interactions: Some(200 * 64 * 36), ..config(Variant::Fast, n, seed) };
        let mut sim = Simulator::new(c.clone(), ElectionProtocol::from_config(&c)).unwrap();
        sim.run_to_end();
        if !sim.protocol().is_stabilized() {
            assert_eq!(sim.protocol().leader_count(), 0, "fast run stuck with leaders");
        }
        fast_failures += !stays_stable(sim, n) as usize;
    }
    assert!(fast_failures <= 5, "{fast_failures} fast runs lost every leader");
}

#[test]
fn monitors_do_not_change_runs() {
    for variant in [Variant::Fast, Variant::LasVegas] {
        let c = config(variant, 256, 5);
        let plain = Simulator::new(c.clone(), ElectionProtocol::from_config(&c)).unwrap().run();
        let mut window = WindowMonitor::new(c.m);
        let mut spacing = PassSpacing::new(c.n);
        let mut ticks = ExternalTicks::new(c.n, c.m);
        let mut sim = Simulator::new(c.clone(), ElectionProtocol::from_config(&c)).unwrap();
        sim.add_monitor(&mut window);
        sim.add_monitor(&mut spacing);
        sim.add_monitor(&mut ticks);
        let observed = sim.run();
        assert_eq!(plain, observed);
        assert!(!window.widths.is_empty() && !spacing.gaps.is_empty() && !ticks.ticks.is_empty());
    }
}

struct MinLeaders(usize);

impl<A> Monitor<A> for MinLeaders {
    fn on_interaction(&mut self, ctx: &MonitorCtx, _: &[A]) {
        self.0 = self.0.min(ctx.leader_count);
    }
}

#[test]
fn some_agent_can_always_lead() {
    for variant in [Variant::LasVegas, Variant::Fast] {
        for i in 0..20 {
            let c = config(variant, 256, trial_seed(3, i));
            let mut low = MinLeaders(usize::MAX);
            let mut sim = Simulator::new(c.clone(), ElectionProtocol::from_config(&c)).unwrap();
            sim.add_monitor(&mut low);
            let r = sim.run();
            assert!(r.stabilized && r.violations.is_empty(), "{variant} {i}: {:?}", r.violations);
            assert!(low.0 >= 1, "{variant} trial {i}");
            if variant == Variant::LasVegas {
                assert_eq!(r.leader_count_final, 1);
            }
        }
    }
}

fn median_gap(n: usize, seeds: u64) -> f64 {
    let gaps: Vec<f64> = (0..seeds)
        .flat_map(|s| {
            let c = config(Variant::ClockOnly, n, trial_seed(11, s));
            let mut spacing = PassSpacing::new(n);
            let mut sim = Simulator::new(c.clone(), ClockProtocol::from_config(&c)).unwrap();
            sim.add_monitor(&mut spacing);
            sim.run_to_end();
            drop(sim);
            spacing.gaps.into_iter().map(|g| g as f64)
        })
        .collect();
    median(&gaps)
}

#[test]
fn clock_passes_scale_with_n_log_n() {
    let small = median_gap(1024, 4);
    let large = median_gap(4096, 4);
    let per = |g: f64, n: f64| g / (n * n.ln());
    let (a, b) = (per(small, 1024.0), per(large, 4096.0));
    eprintln!("median pass gap / (n ln n): {a:.3} at 1024, {b:.3} at 4096");
    assert!(a > 0.5 && b > 0.5, "passes too frequent");
    assert!((a / b - 1.0).abs() < 0.5, "{a} vs {b}");
}

#[test]
fn fast_rounds_halve_leaders() {
    let n = 4096;
    let mut rounds = Vec::new();
    for i in 0..10 {
        let c = config(Variant::Fast, n, trial_seed(21, i));
        let mut ticks = ExternalTicks::new(n, c.m);
        let mut sim = Simulator::new(c.clone(), ElectionProtocol::from_config(&c)).unwrap();
        sim.add_monitor(&mut ticks);
        sim.run_to_end();
        let junta = sim.report().junta_size.unwrap();
        drop(sim);
        let t = ticks.ticks_to_unique().expect("one leader left");
        rounds.push((junta, t));
    }
    eprintln!("(junta size, external ticks to a single leader): {rounds:?}");
    for (junta, t) in rounds {
        assert!(t as f64 <= 4.0 * (junta as f64).log2() + 8.0, "junta {junta} took {t} ticks");
    }
}

#[test]
fn slow_protocol_matches_markov_chain() {
    for n in [3usize, 5] {
        let trials = 20_000;
        let mean = (0..trials)
            .map(|i| run(&config(Variant::SlowOnly, n, trial_seed(n as u64, i))).unwrap().interactions_total as f64)
            .sum::<f64>()
            / trials as f64;
        let exact = slow_expected_interactions(n);
        assert!((mean - exact).abs() / exact < 0.03, "n={n}: {mean} vs {exact}");
    }
}
