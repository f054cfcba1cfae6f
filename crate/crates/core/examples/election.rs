//! Elect a leader in a population of 4096 agents with both variants and
//! print how the leader count fell over time.

use popsim::{run, SimConfig, Variant};

fn main() {
    for variant in [Variant::Fast, Variant::LasVegas] {
        let report = run(&SimConfig::new(variant, 4096, 1)).expect("valid config");
        println!(
            "{variant}: {} leader(s) after {} interactions ({:.0} parallel time), junta of {} at level {}",
            report.leader_count_final,
            report.interactions_total,
            report.parallel_time,
            report.junta_size.unwrap_or(0),
            report.max_level.unwrap_or(0),
        );
        if let Some((t, _)) = report.leader_trajectory.iter().find(|(_, l)| *l == 1) {
            println!("  first single leader at parallel time {:.0}", *t as f64 / 4096.0);
        }
    }
}
