//! The four checks run together over every refined component.

use std::str::FromStr;

use serde::Serialize;

use super::{
    check_progress, check_reachability, check_simulation, cross_check, reach_targets, Bounds, CrossCheckReport,
    OracleError, ProgressReport, ReachabilityReport, SimulationReport,
};
use crate::model::{StateKind, SystemModel};
use crate::refine::Refined;
use crate::runtime::UnexpectedPolicy;

/// Which checks to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Check {
    Simulation,
    Reach,
    Progress,
    Cross,
    #[default]
    All,
}

impl Check {
    fn includes(self, other: Check) -> bool {
        self == Check::All || self == other
    }
}

impl FromStr for Check {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "simulation" => Ok(Check::Simulation),
            "reach" => Ok(Check::Reach),
            "progress" => Ok(Check::Progress),
            "cross" => Ok(Check::Cross),
            "all" => Ok(Check::All),
            _ => Err(format!("unknown check `{s}` (simulation, reach, progress, cross, all)")),
        }
    }
}

/// Results for one component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComponentChecks {
    pub component: String,
    pub simulation: Option<SimulationReport>,
    pub progress: Option<ProgressReport>,
    /// One report per basic state of the refined machine.
    pub reachability: Vec<ReachabilityReport>,
    pub cross: Option<CrossCheckReport>,
    /// A check that could not run.
    pub error: Option<String>,
}

impl ComponentChecks {
    pub fn passed(&self) -> bool {
        self.error.is_none()
            && self.simulation.as_ref().is_none_or(SimulationReport::passed)
            && self.progress.as_ref().is_none_or(ProgressReport::passed)
            && self.reachability.iter().all(ReachabilityReport::passed)
            && self.cross.as_ref().is_none_or(CrossCheckReport::passed)
    }

    /// One line per failed check.
    pub fn failures(&self) -> Vec<String> {
        let c = &self.component;
        let mut out = Vec::new();
        if let Some(e) = &self.error {
            out.push(format!("{c}: {e}"));
        }
        if let Some(cx) = self.simulation.as_ref().and_then(|s| s.counterexample.as_ref()) {
            out.push(format!(
                "{c}: simulation fails after [{}]: {} (original {}, refined {})",
                cx.inputs.join(", "),
                cx.reason,
                cx.original_state,
                cx.refined_state
            ));
        }
        if let Some(w) = self.progress.as_ref().and_then(|p| p.stuck.as_ref()) {
            out.push(format!(
                "{c}: stuck in {} after [{}] by rule {} ({})",
                w.state,
                w.inputs.join(", "),
                w.rule,
                w.reason
            ));
        }
        for r in self.reachability.iter().filter(|r| !r.passed()) {
            let mut missing: Vec<&str> = r.unreached_states.iter().map(String::as_str).collect();
            missing.extend(r.unreached_transitions.iter().map(String::as_str));
            let cut = if r.truncated { " (exploration truncated)" } else { "" };
            out.push(format!("{c}: from {} unreachable: {}{cut}", r.from, missing.join(", ")));
        }
        if let Some(x) = &self.cross {
            out.extend(x.divergences.iter().map(|d| format!("{c}: steppers diverge: {d}")));
        }
        out
    }
}

/// Runs the selected checks on every component of `refined` that has a
/// state machine and belongs to the original model. `original` is needed
/// for simulation only.
pub fn run_checks(
    original: &SystemModel,
    refined: &Refined,
    check: Check,
    depth: usize,
    policy: UnexpectedPolicy,
    bounds: &Bounds,
) -> Vec<ComponentChecks> {
    let mut out = Vec::new();
    for comp in &refined.model.components {
        let Some(hsm) = &comp.behavior else { continue };
        if comp.name == refined.metadata.dbg_agent || original.component(&comp.name).is_none() {
            continue;
        }
        let mut res = ComponentChecks {
            component: comp.name.clone(),
            simulation: None,
            progress: None,
            reachability: Vec::new(),
            cross: None,
            error: None,
        };
        let mut attempt = || -> Result<(), OracleError> {
            let has_original = original.component(&comp.name).is_some_and(|c| c.behavior.is_some());
            if check.includes(Check::Simulation) && has_original {
                res.simulation = Some(check_simulation(original, refined, &comp.name, depth, bounds)?);
            }
            if check.includes(Check::Progress) {
                res.progress = Some(check_progress(&refined.model, &comp.name, depth, policy, bounds)?);
            }
            if check.includes(Check::Reach) {
                let targets = reach_targets(hsm, refined.metadata.components.get(&comp.name));
                for s in hsm.states.values().filter(|s| s.kind == StateKind::Basic) {
                    res.reachability
                        .push(check_reachability(&refined.model, &comp.name, s.id.as_str(), &targets, bounds)?);
                }
            }
            if check.includes(Check::Cross) {
                res.cross = Some(cross_check(&refined.model, &comp.name, depth.min(3), policy, bounds)?);
            }
            Ok(())
        };
        if let Err(e) = attempt() {
            res.error = Some(e.to_string());
        }
        out.push(res);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::Setting;
    use crate::refine::refine_model;
    use crate::text::parse_model;

    #[test]
    fn traffic_light_passes_every_check() {
        let m = parse_model(crate::TRAFFIC_LIGHT).unwrap();
        let r = refine_model(&m, &Setting::default()).unwrap();
        let res = run_checks(&m, &r, Check::All, 3, UnexpectedPolicy::Stuck, &Bounds::default());
        assert!(!res.is_empty());
        for c in &res {
            assert!(c.passed(), "{:?}", c.failures());
        }
    }

    #[test]
    fn check_names_parse() {
        assert_eq!("reach".parse::<Check>(), Ok(Check::Reach));
        assert!("everything".parse::<Check>().is_err());
    }
}
