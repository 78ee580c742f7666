//! The four subcommands over parsed scenarios.

use crate::table::{cell, provenance, Table};
use aoi_core::discrete;
use aoi_core::engine;
use aoi_core::metrics;
use aoi_core::optimizer;
use aoi_core::scenario::{Scenario, ScenarioError};

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments (exit code 2).
    Config(String),
    /// Numerical non-convergence (exit code 3).
    Numerical(String),
    /// I/O failure (exit code 1).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl From<engine::EngineError> for CliError {
    fn from(e: engine::EngineError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<optimizer::OptimError> for CliError {
    fn from(e: optimizer::OptimError) -> Self {
        match e {
            optimizer::OptimError::NoBracket => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

/// Marking and selection probabilities, one row per source plus the dual.
pub fn cmd_solve_probs(scenario: &Scenario) -> Result<Table, CliError> {
    let params = scenario.source_params()?;
    let marking = if scenario.preemptive {
        optimizer::solve_marking_probs_preemptive(&params)?
    } else {
        optimizer::solve_marking_probs(&params)?
    };
    let selection = optimizer::selection_probs(&marking, &params);
    let mut table = Table::new(
        provenance(
            "solve-probs",
            &format!("seed={} preemptive={}", scenario.seed, scenario.preemptive),
        ),
        &["row", "source", "p", "p_hat", "lambda"],
    );
    for (i, (&p, &p_hat)) in marking.probs.iter().zip(&selection).enumerate() {
        table.push(vec!["data".into(), i.to_string(), cell(p), cell(p_hat), String::new()]);
    }
    table.push(vec![
        "dual".into(),
        String::new(),
        String::new(),
        String::new(),
        cell(marking.multiplier),
    ]);
    Ok(table)
}

/// Full bound report: per-source probabilities and transmitted fractions,
/// plus the summary row with the lower bound, the policy upper bound, and
/// the competitive-ratio bound.
pub fn cmd_bounds(scenario: &Scenario) -> Result<Table, CliError> {
    let params = scenario.source_params()?;
    let report = optimizer::compute_bounds(&params, scenario.preemptive)?;
    let mut table = Table::new(
        provenance(
            "bounds",
            &format!("seed={} preemptive={}", scenario.seed, scenario.preemptive),
        ),
        &["row", "source", "p", "p_hat", "f_star", "lb", "ub", "cr_bound"],
    );
    for i in 0..params.len() {
        table.push(vec![
            "data".into(),
            i.to_string(),
            cell(report.marking.probs[i]),
            cell(report.selection[i]),
            cell(report.f_star[i]),
            String::new(),
            String::new(),
            String::new(),
        ]);
    }
    table.push(vec![
        "summary".into(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        cell(report.lb_offline),
        cell(report.ub_policy),
        cell(report.cr_bound),
    ]);
    Ok(table)
}

pub struct SimulateOutput {
    pub results: Table,
    /// Present when tracing was requested (continuous runs only).
    pub trace: Option<Table>,
    pub periods: Option<Table>,
}

/// One row per replication plus an aggregate row with the confidence
/// half-width. Tracing reruns replication 0 with the event log attached.
pub fn cmd_simulate(
    scenario: &Scenario,
    workers: usize,
    trace: bool,
) -> Result<SimulateOutput, CliError> {
    if scenario.slotted {
        return simulate_slotted(scenario);
    }
    let n = scenario.sources.len();
    let mut headers: Vec<String> =
        vec!["row".into(), "replication".into(), "gamma".into(), "gamma_ci".into(), "utilization".into()];
    for i in 0..n {
        headers.push(format!("aoi_{i}"));
        headers.push(format!("cost_{i}"));
    }
    let header_refs: Vec<&str> = headers.iter().map(|s| s.as_str()).collect();
    let mut table = Table::new(
        provenance(
            "simulate",
            &format!(
                "seed={} reps={} horizon={} workers=any",
                scenario.seed, scenario.replications, scenario.horizon
            ),
        ),
        &header_refs,
    );

    let build = || scenario.build_policy();
    let built = build()?; // surface config/search errors before spawning workers
    drop(built);
    let replicated = engine::run_replications(
        scenario,
        &|| build().expect("policy rebuilt from a validated scenario"),
        scenario.replications,
        workers,
    )?;
    for summary in &replicated.summaries {
        let mut row = vec![
            "data".to_string(),
            summary.replication.to_string(),
            cell(summary.gamma),
            String::new(),
            cell(summary.utilization),
        ];
        for i in 0..n {
            row.push(cell(summary.aoi[i]));
            row.push(cell(summary.tx_cost[i]));
        }
        table.push(row);
    }
    let mut aggregate = vec![
        "mean".to_string(),
        String::new(),
        cell(replicated.gamma_mean),
        cell(replicated.gamma_ci),
        String::new(),
    ];
    for i in 0..n {
        aggregate.push(cell(replicated.aoi_mean[i]));
        aggregate.push(String::new());
    }
    table.push(aggregate);

    let (trace_table, period_table) = if trace {
        let mut policy = build()?;
        let (result, rows) = engine::run_with_trace(scenario, policy.as_mut(), 0)?;
        let mut tt = Table::new(
            provenance("simulate", &format!("seed={} trace-of-replication=0", scenario.seed)),
            &["time", "event", "source", "age_before", "age_after"],
        );
        for r in rows {
            tt.push(vec![
                cell(r.time),
                r.event.to_string(),
                r.source.map(|s| s.to_string()).unwrap_or_default(),
                cell(r.age_before),
                cell(r.age_after),
            ]);
        }
        let mut pt = Table::new(
            provenance("simulate", &format!("seed={} periods-of-replication=0", scenario.seed)),
            &["source", "index", "T", "Z", "w", "d"],
        );
        for (source, periods) in result.periods.per_source.iter().enumerate() {
            for (index, s) in periods.iter().enumerate() {
                pt.push(vec![
                    source.to_string(),
                    index.to_string(),
                    cell(s.period),
                    cell(s.system_time),
                    cell(s.wait),
                    cell(s.service),
                ]);
            }
        }
        (Some(tt), Some(pt))
    } else {
        (None, None)
    };

    Ok(SimulateOutput { results: table, trace: trace_table, periods: period_table })
}

fn simulate_slotted(scenario: &Scenario) -> Result<SimulateOutput, CliError> {
    let slots = scenario.slot_scenario()?;
    let n = slots.sources.len();
    let horizon_slots = scenario.horizon as u64;
    let mut headers: Vec<String> =
        vec!["row".into(), "replication".into(), "weighted_sum_aoi".into(), "aoi_ci".into()];
    for i in 0..n {
        headers.push(format!("aoi_{i}"));
    }
    let header_refs: Vec<&str> = headers.iter().map(|s| s.as_str()).collect();
    let mut table = Table::new(
        provenance(
            "simulate",
            &format!(
                "seed={} reps={} slots={} slotted=true",
                scenario.seed, scenario.replications, horizon_slots
            ),
        ),
        &header_refs,
    );
    let mut weighted = Vec::new();
    let mut per_source: Vec<Vec<f64>> = vec![Vec::new(); n];
    for rep in 0..scenario.replications {
        let mut policy = scenario.build_slot_policy()?;
        let result = discrete::run_slotted(&slots, policy.as_mut(), horizon_slots, scenario.seed, rep);
        let mut row = vec![
            "data".to_string(),
            rep.to_string(),
            cell(result.weighted_sum_aoi),
            String::new(),
        ];
        for (acc, &aoi) in per_source.iter_mut().zip(&result.per_source_aoi) {
            row.push(cell(aoi));
            acc.push(aoi);
        }
        weighted.push(result.weighted_sum_aoi);
        table.push(row);
    }
    let (mean, ci) = metrics::mean_and_ci(&weighted);
    let mut aggregate = vec!["mean".to_string(), String::new(), cell(mean), cell(ci)];
    for xs in &per_source {
        aggregate.push(cell(metrics::mean_and_ci(xs).0));
    }
    table.push(aggregate);
    Ok(SimulateOutput { results: table, trace: None, periods: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_error_class() {
        assert_eq!(CliError::Io("x".into()).exit_code(), 1);
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::Numerical("x".into()).exit_code(), 3);
    }

    #[test]
    fn scenario_errors_map_to_codes() {
        use aoi_core::policies::PolicyError;
        let config: CliError = ScenarioError::Config("bad".into()).into();
        assert_eq!(config.exit_code(), 2);
        let search: CliError =
            ScenarioError::Search(PolicyError::SearchNonConvergence { spread: 1.0, iters: 60 })
                .into();
        assert_eq!(search.exit_code(), 3);
    }
}
