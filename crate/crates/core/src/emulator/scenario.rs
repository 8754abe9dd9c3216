//! Scripted runs: every command at its timestamp, then run to the end time.

use super::{Emulator, EmulatorConfig, LogRecord, Metrics};
use crate::api::Scenario;
use crate::substrate::Topology;
use crate::time::SimTime;

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub log: Vec<LogRecord>,
    pub metrics: Metrics,
}

/// Executes a script on a fresh emulator. Command failures are logged, not fatal.
pub fn run_scenario(topo: Topology, script: &Scenario, config: EmulatorConfig) -> ScenarioOutcome {
    let mut em = Emulator::new(topo, config);
    em.load_script(script);
    em.run_until(SimTime::from_ms(script.end_ms()));
    em.finalize_reports();
    ScenarioOutcome { metrics: em.metrics(), log: std::mem::take(&mut em.log) }
}

impl Emulator {
    /// Queues every command of a script, offset from the current time.
    pub fn load_script(&mut self, script: &Scenario) -> Vec<u64> {
        let base = self.now();
        script
            .commands
            .iter()
            .map(|c| self.enqueue(base + crate::time::SimDuration::from_ms(c.at_ms), c.command.clone()))
            .collect()
    }
}
