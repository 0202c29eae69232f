//! Hardware configuration policies for sequences of preprocessing runs.
//!
//! A policy boots with some configuration and, before every run, decides
//! whether to keep it or pay a reconfiguration penalty for a better one.
//! Policies are stateful, so the registry stores constructors.

use crate::cost::{
    reconfig_decision, select_config, ConfigPair, ReconfigPolicy, VariantCatalog, WorkloadParams,
};
use crate::error::{Error, Result};

pub struct PolicyContext<'a> {
    pub catalog: &'a VariantCatalog,
    pub reconfig: &'a ReconfigPolicy,
    pub clock_hz: f64,
}

/// What a policy did before a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyStep {
    pub config: ConfigPair,
    pub penalty_ms: f64,
    pub reconfigured: bool,
    pub replanned: bool,
}

pub trait ConfigPolicy: Send {
    fn name(&self) -> &'static str;

    fn boot(&mut self, config: ConfigPair, planned_for: WorkloadParams);

    fn current(&self) -> Option<ConfigPair>;

    fn before_run(
        &mut self,
        workload: &WorkloadParams,
        ctx: &PolicyContext<'_>,
    ) -> Result<PolicyStep>;
}

fn not_booted(name: &str) -> Error {
    Error::Scenario(format!("policy `{name}` used before boot"))
}

/// Keeps the boot configuration forever.
#[derive(Debug, Default)]
pub struct StaticPolicy {
    current: Option<ConfigPair>,
}

impl ConfigPolicy for StaticPolicy {
    fn name(&self) -> &'static str {
        "static"
    }

    fn boot(&mut self, config: ConfigPair, _: WorkloadParams) {
        self.current = Some(config);
    }

    fn current(&self) -> Option<ConfigPair> {
        self.current
    }

    fn before_run(&mut self, _: &WorkloadParams, _: &PolicyContext<'_>) -> Result<PolicyStep> {
        let config = self.current.ok_or_else(|| not_booted(self.name()))?;
        Ok(PolicyStep {
            config,
            penalty_ms: 0.0,
            reconfigured: false,
            replanned: false,
        })
    }
}

/// Re-plans when the workload drifts past the threshold and switches when
/// the amortized saving beats the penalty.
#[derive(Debug, Default)]
pub struct DynamicPolicy {
    current: Option<ConfigPair>,
    planned_for: Option<WorkloadParams>,
}

impl ConfigPolicy for DynamicPolicy {
    fn name(&self) -> &'static str {
        "dynamic"
    }

    fn boot(&mut self, config: ConfigPair, planned_for: WorkloadParams) {
        self.current = Some(config);
        self.planned_for = Some(planned_for);
    }

    fn current(&self) -> Option<ConfigPair> {
        self.current
    }

    fn before_run(
        &mut self,
        workload: &WorkloadParams,
        ctx: &PolicyContext<'_>,
    ) -> Result<PolicyStep> {
        let current = self.current.ok_or_else(|| not_booted(self.name()))?;
        let stale = match &self.planned_for {
            Some(p) => {
                ctx.reconfig.drifted(p, workload)
                    || (p.layers, p.fanout, p.batch)
                        != (workload.layers, workload.fanout, workload.batch)
            }
            None => true,
        };
        let mut step = PolicyStep {
            config: current,
            penalty_ms: 0.0,
            reconfigured: false,
            replanned: stale,
        };
        if stale {
            let candidate = select_config(workload, ctx.catalog)?.best.config;
            let decision =
                reconfig_decision(current, candidate, workload, ctx.reconfig, ctx.clock_hz)?;
            self.planned_for = Some(*workload);
            if decision.reconfigure {
                self.current = Some(candidate);
                step.config = candidate;
                step.penalty_ms = decision.penalty_ms;
                step.reconfigured = true;
            }
        }
        Ok(step)
    }
}

type Factory = fn() -> Box<dyn ConfigPolicy>;

pub struct PolicyRegistry {
    entries: Vec<(&'static str, Factory)>,
}

impl PolicyRegistry {
    pub fn empty() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    pub fn register(&mut self, name: &'static str, factory: Factory) {
        self.entries.retain(|(n, _)| *n != name);
        self.entries.push((name, factory));
    }

    pub fn create(&self, name: &str) -> Result<Box<dyn ConfigPolicy>> {
        self.entries
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, f)| f())
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "policy",
                name: name.to_owned(),
                available: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|(n, _)| *n).collect()
    }
}

impl Default for PolicyRegistry {
    fn default() -> Self {
        let mut reg = Self::empty();
        reg.register("static", || Box::new(StaticPolicy::default()));
        reg.register("dynamic", || Box::new(DynamicPolicy::default()));
        reg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wl(n: u64, e: u64) -> WorkloadParams {
        WorkloadParams {
            n,
            e,
            layers: 2,
            fanout: 10,
            batch: 3000,
        }
    }

    #[test]
    fn registry() {
        let reg = PolicyRegistry::default();
        assert_eq!(reg.names(), vec!["static", "dynamic"]);
        assert_eq!(reg.create("dynamic").unwrap().name(), "dynamic");
        assert!(reg.create("oracle").is_err());
    }

    #[test]
    fn unbooted_policy_errors() {
        let cat = VariantCatalog::default();
        let pol = ReconfigPolicy::default();
        let ctx = PolicyContext {
            catalog: &cat,
            reconfig: &pol,
            clock_hz: 1e8,
        };
        assert!(StaticPolicy::default().before_run(&wl(1, 1), &ctx).is_err());
        assert!(DynamicPolicy::default()
            .before_run(&wl(1, 1), &ctx)
            .is_err());
    }

    #[test]
    fn dynamic_switches_only_when_worth_it() {
        let cat = VariantCatalog::default();
        let mv = wl(3_710, 11_300_000);
        let ax = wl(169_000, 1_160_000);
        let boot = select_config(&mv, &cat).unwrap().best.config;
        let ax_best = select_config(&ax, &cat).unwrap().best.config;
        assert_ne!(boot, ax_best);

        for (horizon, expect) in [(1, false), (100_000, true)] {
            let pol = ReconfigPolicy {
                horizon,
                ..Default::default()
            };
            let ctx = PolicyContext {
                catalog: &cat,
                reconfig: &pol,
                clock_hz: 1e8,
            };
            let mut p = DynamicPolicy::default();
            p.boot(boot, mv);
            let same = p.before_run(&mv, &ctx).unwrap();
            assert!(!same.replanned && !same.reconfigured);
            let step = p.before_run(&ax, &ctx).unwrap();
            assert!(step.replanned);
            assert_eq!(step.reconfigured, expect);
            assert_eq!(p.current().unwrap() == ax_best, expect);
            // Planned for ax now; a repeat does not re-plan.
            assert!(!p.before_run(&ax, &ctx).unwrap().replanned);
        }
    }
}
