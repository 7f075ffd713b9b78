//! Subcommands. Each returns whether every mathematical check passed;
//! errors carry their own exit code.

pub mod check;
pub mod solve;
pub mod synth;
pub mod verify;

use kernelbound::bounds::WindowMode;
use kernelbound::par::Exec;
use kernelbound::verify::{SolveSettings, WeightedConfig, WeightedPlan};

use crate::config::{GridConfig, RunConfig};
use crate::output::Reporter;

/// State shared by the subcommands of one invocation.
pub struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub out: Reporter,
    /// `--seed`, falling back to `verify.seed`
    pub seed: Option<u64>,
}

impl Ctx<'_> {
    pub fn settings(&self, grid: &GridConfig) -> SolveSettings {
        SolveSettings { theta: grid.theta, dt: grid.dt, mollifier_factor: grid.mollifier, exec: Exec::Parallel }
    }

    pub fn weighted_config(&self, d: usize) -> WeightedConfig {
        let mut w = WeightedConfig::new(d, self.cfg.lyapunov.horizon, self.cfg.bounds.s);
        w.mode = self.cfg.bounds.mode;
        w.overrides = self.cfg.lyapunov.overrides;
        w.two_sided = self.cfg.bounds.two_sided;
        w.cert_plan.radius = self.cfg.lyapunov.certificate_radius;
        w
    }

    /// Default sample plan; with a fixed window the times are moved inside its core.
    pub fn weighted_plan(&self, d: usize) -> WeightedPlan {
        let mut plan = WeightedPlan::default_for(d, self.cfg.lyapunov.horizon);
        if let WindowMode::Fixed(w) = self.cfg.bounds.mode {
            plan.times = (1..=8).map(|i| w.a + (w.b - w.a) * i as f64 / 9.0).collect();
        }
        plan
    }
}
