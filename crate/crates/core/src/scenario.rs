//! Scenario configuration: the full description of one experiment, its
//! TOML (de)serialization, validation, and policy construction.

use crate::discrete::{MaxWeightSlot, RandomizedSlot, SlotPolicy, SlotScenario, SlotSource, SrDiscreteSlot};
use crate::distributions::{DistError, DistSpec};
use crate::optimizer::{self, OptimError, SourceParams};
use crate::policies::{
    optimize_generate_at_will_threshold, threshold_defaults, AgeThreshold, BoundedAttempt,
    GenerateAtWillThreshold, MultiSourceThreshold, Policy, PolicyConfig, PolicyError,
    StationaryRandomized, THRESHOLD_SEARCH_CYCLES,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("config: {0}")]
    Config(String),
    #[error("config: source {index}: {source}")]
    Source {
        index: usize,
        #[source]
        source: DistError,
    },
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Search(#[from] PolicyError),
    #[error("config parse: {0}")]
    Parse(String),
}

impl ScenarioError {
    /// Whether this failure is a numerical non-convergence rather than a
    /// configuration problem.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            ScenarioError::Search(PolicyError::SearchNonConvergence { .. })
                | ScenarioError::Optim(OptimError::NoBracket)
        )
    }
}

fn config_err<T>(msg: impl Into<String>) -> Result<T, ScenarioError> {
    Err(ScenarioError::Config(msg.into()))
}

/// One source: weight, per-transmission cost, and its generation and
/// service laws. `gen` is omitted for generate-at-will sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    pub rho: f64,
    #[serde(default)]
    pub cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gen: Option<DistSpec>,
    pub service: DistSpec,
}

fn default_replications() -> u64 {
    1
}

/// A full system description: sources, policy, horizon, replication count,
/// and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    pub horizon: f64,
    #[serde(default = "default_replications")]
    pub replications: u64,
    #[serde(default)]
    pub slotted: bool,
    #[serde(default)]
    pub preemptive: bool,
    pub policy: PolicyConfig,
    pub sources: Vec<SourceConfig>,
}

impl Scenario {
    /// Parse and validate a TOML scenario.
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario =
            toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.sources.is_empty() {
            return config_err("at least one source is required");
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return config_err(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.replications == 0 {
            return config_err("replications must be at least 1");
        }
        for (index, src) in self.sources.iter().enumerate() {
            if !(src.rho.is_finite() && src.rho > 0.0) {
                return config_err(format!("source {index}: rho must be positive, got {}", src.rho));
            }
            if !(src.cost.is_finite() && src.cost >= 0.0) {
                return config_err(format!(
                    "source {index}: cost must be nonnegative, got {}",
                    src.cost
                ));
            }
            src.service
                .validate()
                .map_err(|source| ScenarioError::Source { index, source })?;
            if let Some(gen) = &src.gen {
                gen.validate().map_err(|source| ScenarioError::Source { index, source })?;
                if gen.mean() <= 0.0 {
                    return config_err(format!(
                        "source {index}: inter-generation mean must be positive"
                    ));
                }
            }
        }

        if self.slotted != self.policy.is_slotted() {
            return config_err(if self.slotted {
                "slotted scenario requires a slotted policy"
            } else {
                "slotted policy requires slotted = true"
            });
        }
        if self.slotted {
            if self.preemptive {
                return config_err("the slotted engine has no preemption");
            }
            for (index, src) in self.sources.iter().enumerate() {
                if src.cost != 0.0 {
                    return config_err(format!(
                        "source {index}: slotted runs measure age only; cost must be 0"
                    ));
                }
                match (&src.gen, &src.service) {
                    (Some(DistSpec::Geometric { .. }), DistSpec::Geometric { .. }) => {}
                    _ => {
                        return config_err(format!(
                            "source {index}: slotted runs need geometric gen and service laws"
                        ))
                    }
                }
            }
        }
        if self.policy.needs_preemptive_engine() && !self.preemptive {
            return config_err("this policy preempts; set preemptive = true");
        }

        if self.policy.is_generate_at_will() {
            if self.sources.len() != 1 {
                return config_err("generate-at-will policies are single-source");
            }
            if self.sources[0].gen.is_some() {
                return config_err("generate-at-will sources have no generation law; omit gen");
            }
            if self.sources[0].service.mean() <= 0.0 {
                return config_err("generate-at-will needs a positive mean service time");
            }
        } else if !self.slotted {
            for (index, src) in self.sources.iter().enumerate() {
                if src.gen.is_none() {
                    return config_err(format!("source {index}: missing generation law"));
                }
            }
        }

        match &self.policy {
            PolicyConfig::Sr { marking_probs }
            | PolicyConfig::SrWorkConserving { marking_probs }
            | PolicyConfig::SrPreemptiveMarking { marking_probs } => {
                if let Some(p) = marking_probs {
                    if p.len() != self.sources.len() {
                        return config_err("marking_probs length must match the source count");
                    }
                    if p.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
                        return config_err("marking_probs must lie in (0, 1]");
                    }
                }
            }
            PolicyConfig::Threshold { thresholds } => {
                if let Some(t) = thresholds {
                    if t.len() != self.sources.len() {
                        return config_err("thresholds length must match the source count");
                    }
                    if t.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
                        return config_err("thresholds must be nonnegative");
                    }
                }
            }
            PolicyConfig::AgeThreshold { alpha } => {
                if !(alpha.is_finite() && *alpha >= 0.0) {
                    return config_err("alpha must be nonnegative");
                }
            }
            PolicyConfig::GenerateAtWillOptimized { beta } => {
                if let Some(b) = beta {
                    if !(b.is_finite() && *b >= 0.0) {
                        return config_err("beta must be nonnegative");
                    }
                }
            }
            PolicyConfig::PreemptRetry { epsilon } | PolicyConfig::PreemptDiscard { epsilon } => {
                if !(epsilon.is_finite() && *epsilon > 0.0) {
                    return config_err("epsilon must be positive");
                }
            }
            PolicyConfig::RandomizedDiscrete { q } => {
                if let Some(q) = q {
                    if q.len() != self.sources.len() {
                        return config_err("q length must match the source count");
                    }
                    if q.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
                        return config_err("q weights must be positive");
                    }
                }
            }
            PolicyConfig::MaxWeightDiscrete { weights } => {
                if let Some(w) = weights {
                    if w.len() != self.sources.len() {
                        return config_err("weights length must match the source count");
                    }
                    if w.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
                        return config_err("max-weight index weights must be positive");
                    }
                }
            }
            PolicyConfig::GenerateAtWill | PolicyConfig::SrDiscrete => {}
        }
        Ok(())
    }

    /// Per-source solver constants; requires every source to carry a
    /// generation law.
    pub fn source_params(&self) -> Result<Vec<SourceParams<f64>>, ScenarioError> {
        self.sources
            .iter()
            .enumerate()
            .map(|(index, src)| match &src.gen {
                Some(gen) => Ok(SourceParams {
                    rho: src.rho,
                    cost: src.cost,
                    mu: gen.mean(),
                    sigma2: gen.variance(),
                    gamma: src.service.mean(),
                }),
                None => config_err(format!("source {index}: missing generation law")),
            })
            .collect()
    }

    pub fn slot_scenario(&self) -> Result<SlotScenario, ScenarioError> {
        let sources = self
            .sources
            .iter()
            .enumerate()
            .map(|(index, src)| match (&src.gen, &src.service) {
                (
                    Some(DistSpec::Geometric { success_prob: gen_prob }),
                    DistSpec::Geometric { success_prob },
                ) => Ok(SlotSource {
                    gen_prob: *gen_prob,
                    success_prob: *success_prob,
                    rho: src.rho,
                }),
                _ => config_err(format!(
                    "source {index}: slotted runs need geometric gen and service laws"
                )),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SlotScenario { sources })
    }

    /// Instantiate the configured continuous-time policy, solving for
    /// marking probabilities or thresholds where the config leaves them to
    /// the optimizer.
    pub fn build_policy(&self) -> Result<Box<dyn Policy>, ScenarioError> {
        let service_specs: Vec<DistSpec> = self.sources.iter().map(|s| s.service.clone()).collect();
        let sr = |probs: Vec<f64>, wc: bool| -> Result<Box<dyn Policy>, ScenarioError> {
            let params = self.source_params()?;
            let marking = optimizer::ProbVector { probs, multiplier: 0.0 };
            let selection = optimizer::selection_probs(&marking, &params);
            Ok(Box::new(StationaryRandomized::new(
                marking.probs,
                selection,
                service_specs.clone(),
                wc,
            )))
        };
        match &self.policy {
            PolicyConfig::Sr { marking_probs } => {
                let probs = match marking_probs {
                    Some(p) => p.clone(),
                    None => optimizer::solve_marking_probs(&self.source_params()?)?.probs,
                };
                sr(probs, false)
            }
            PolicyConfig::SrWorkConserving { marking_probs } => {
                let probs = match marking_probs {
                    Some(p) => p.clone(),
                    None => optimizer::solve_marking_probs(&self.source_params()?)?.probs,
                };
                sr(probs, true)
            }
            PolicyConfig::SrPreemptiveMarking { marking_probs } => {
                let probs = match marking_probs {
                    Some(p) => p.clone(),
                    None => optimizer::solve_marking_probs_preemptive(&self.source_params()?)?.probs,
                };
                sr(probs, false)
            }
            PolicyConfig::Threshold { thresholds } => {
                let thresholds = match thresholds {
                    Some(t) => t.clone(),
                    None => threshold_defaults(&self.source_params()?),
                };
                Ok(Box::new(MultiSourceThreshold::new(thresholds)))
            }
            PolicyConfig::AgeThreshold { alpha } => Ok(Box::new(AgeThreshold::new(*alpha))),
            PolicyConfig::GenerateAtWill => Ok(Box::new(GenerateAtWillThreshold::new(
                self.sources[0].service.mean(),
            ))),
            PolicyConfig::GenerateAtWillOptimized { beta } => {
                let beta = match beta {
                    Some(b) => *b,
                    None => optimize_generate_at_will_threshold(
                        &self.sources[0].service,
                        THRESHOLD_SEARCH_CYCLES,
                        self.seed,
                    )?,
                };
                Ok(Box::new(GenerateAtWillThreshold::new(beta)))
            }
            PolicyConfig::PreemptRetry { epsilon } => Ok(Box::new(BoundedAttempt::retrying(*epsilon))),
            PolicyConfig::PreemptDiscard { epsilon } => {
                Ok(Box::new(BoundedAttempt::discarding(*epsilon)))
            }
            other => config_err(format!("{other:?} runs on the slotted engine")),
        }
    }

    /// Instantiate the configured slotted policy.
    pub fn build_slot_policy(&self) -> Result<Box<dyn SlotPolicy>, ScenarioError> {
        let slots = self.slot_scenario()?;
        match &self.policy {
            PolicyConfig::SrDiscrete => Ok(Box::new(SrDiscreteSlot::new(&slots))),
            PolicyConfig::RandomizedDiscrete { q } => {
                let weights = match q {
                    Some(q) => q.clone(),
                    None => slots
                        .sources
                        .iter()
                        .map(|s| (s.rho / s.success_prob).sqrt())
                        .collect(),
                };
                Ok(Box::new(RandomizedSlot::new(weights)))
            }
            PolicyConfig::MaxWeightDiscrete { weights } => Ok(Box::new(match weights {
                Some(w) => MaxWeightSlot::with_weights(w.clone()),
                None => MaxWeightSlot::new(&slots),
            })),
            other => config_err(format!("{other:?} runs on the continuous engine")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_toml() -> &'static str {
        r#"
seed = 42
horizon = 1000.0
replications = 4

[policy]
kind = "sr"

[[sources]]
rho = 1.0
cost = 1.0
gen = { kind = "exponential", mean = 2.0 }
service = { kind = "exponential", mean = 1.0 }
"#
    }

    #[test]
    fn parse_and_round_trip() {
        let scn = Scenario::from_toml(minimal_toml()).unwrap();
        assert_eq!(scn.seed, 42);
        assert_eq!(scn.replications, 4);
        let text = scn.to_toml();
        let back = Scenario::from_toml(&text).unwrap();
        assert_eq!(back, scn);
    }

    #[test]
    fn source_params_extraction() {
        let scn = Scenario::from_toml(minimal_toml()).unwrap();
        let params = scn.source_params().unwrap();
        assert_eq!(params[0].mu, 2.0);
        assert_eq!(params[0].sigma2, 4.0);
        assert_eq!(params[0].gamma, 1.0);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut scn = Scenario::from_toml(minimal_toml()).unwrap();
        scn.horizon = 0.0;
        assert!(scn.validate().is_err());

        let mut scn = Scenario::from_toml(minimal_toml()).unwrap();
        scn.sources[0].rho = -1.0;
        assert!(scn.validate().is_err());

        let mut scn = Scenario::from_toml(minimal_toml()).unwrap();
        scn.sources[0].gen = None;
        assert!(scn.validate().is_err());

        let mut scn = Scenario::from_toml(minimal_toml()).unwrap();
        scn.policy = PolicyConfig::Sr { marking_probs: Some(vec![0.5, 0.5]) };
        assert!(scn.validate().is_err(), "length mismatch");

        let mut scn = Scenario::from_toml(minimal_toml()).unwrap();
        scn.policy = PolicyConfig::PreemptRetry { epsilon: 0.5 };
        assert!(scn.validate().is_err(), "preemptive flag required");
        scn.preemptive = true;
        scn.validate().unwrap();
    }

    #[test]
    fn slotted_validation() {
        let text = r#"
seed = 1
horizon = 1000.0
slotted = true

[policy]
kind = "sr_discrete"

[[sources]]
rho = 1.0
gen = { kind = "geometric", success_prob = 0.5 }
service = { kind = "geometric", success_prob = 0.25 }
"#;
        let scn = Scenario::from_toml(text).unwrap();
        let slots = scn.slot_scenario().unwrap();
        assert_eq!(slots.sources[0].gen_prob, 0.5);
        assert_eq!(slots.sources[0].success_prob, 0.25);

        let mut bad = scn.clone();
        bad.sources[0].gen = Some(DistSpec::exponential(2.0).unwrap());
        assert!(bad.validate().is_err());

        let mut bad = scn.clone();
        bad.slotted = false;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn generate_at_will_validation() {
        let text = r#"
seed = 1
horizon = 1000.0

[policy]
kind = "generate_at_will"

[[sources]]
rho = 1.0
service = { kind = "exponential", mean = 2.0 }
"#;
        let scn = Scenario::from_toml(text).unwrap();
        scn.build_policy().unwrap();

        let mut bad = scn.clone();
        bad.sources[0].gen = Some(DistSpec::exponential(1.0).unwrap());
        assert!(bad.validate().is_err());
    }

    #[test]
    fn build_policy_solves_marking_probs() {
        let scn = Scenario::from_toml(minimal_toml()).unwrap();
        let policy = scn.build_policy().unwrap();
        // mu=2, gamma=1, c=1: unconstrained stationary point is
        // mu*sqrt(2/1) = 2.83 -> clamped to 1, constraint 0.5 <= 1 slack.
        drop(policy);
        let probs = optimizer::solve_marking_probs(&scn.source_params().unwrap()).unwrap();
        assert_eq!(probs.probs, vec![1.0]);
    }
}
