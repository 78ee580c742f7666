//! Named experiment sweeps with the standard parameterization: four
//! sources with weights [4,4,1,1], inter-generation means mu*[1,4/3,2,4],
//! transmission means gamma*[4,2,4/3,1], and costs c*[2,1,1,2], except
//! where a sweep says otherwise.

use crate::commands::CliError;
use crate::table::{cell, provenance, Table};
use aoi_core::discrete;
use aoi_core::distributions::DistSpec;
use aoi_core::engine;
use aoi_core::metrics;
use aoi_core::optimizer;
use aoi_core::parallel::parallel_indexed;
use aoi_core::policies::{optimize_generate_at_will_threshold, PolicyConfig, THRESHOLD_SEARCH_CYCLES};
use aoi_core::scenario::{Scenario, SourceConfig};

pub const PRESETS: &[&str] = &[
    "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10", "example1",
];

#[derive(Debug, Clone)]
pub struct PresetOpts {
    pub seed: u64,
    pub reps: Option<u64>,
    pub workers: usize,
    /// Optional externally supplied lower-bound values for the slotted
    /// comparison sweep, as `(x, lb)` pairs.
    pub external_lb: Option<Vec<(f64, f64)>>,
}

const RHO: [f64; 4] = [4.0, 4.0, 1.0, 1.0];
const MU_VEC: [f64; 4] = [1.0, 4.0 / 3.0, 2.0, 4.0];
const GAMMA_VEC: [f64; 4] = [4.0, 2.0, 4.0 / 3.0, 1.0];
const COST_VEC: [f64; 4] = [2.0, 1.0, 1.0, 2.0];

fn scenario(
    seed: u64,
    horizon: f64,
    reps: u64,
    policy: PolicyConfig,
    sources: Vec<SourceConfig>,
) -> Scenario {
    Scenario { seed, horizon, replications: reps, slotted: false, preemptive: false, policy, sources }
}

fn run_gamma(scn: &Scenario, workers: usize) -> Result<(f64, f64), CliError> {
    scn.build_policy()?; // surface errors eagerly
    let replicated = engine::run_replications(
        scn,
        &|| scn.build_policy().expect("validated scenario"),
        scn.replications,
        workers,
    )?;
    Ok((replicated.gamma_mean, replicated.gamma_ci))
}

pub fn run_preset(name: &str, opts: &PresetOpts) -> Result<Vec<(String, Table)>, CliError> {
    match name {
        "fig3" => fig3(opts),
        "fig4" => fig4(opts),
        "fig5" => fig5(opts),
        "fig6" => fig6(opts),
        "fig7" => fig7(opts),
        "fig8" => fig8(opts),
        "fig9" => fig9(opts),
        "fig10" => fig10(opts),
        "example1" => example1(opts),
        other => Err(CliError::Config(format!(
            "unknown preset {other:?}; available: {}",
            PRESETS.join(", ")
        ))),
    }
}

/// Weighted sum cost versus the number of identical exponential sources.
fn fig3(opts: &PresetOpts) -> Result<Vec<(String, Table)>, CliError> {
    let reps = opts.reps.unwrap_or(32);
    let horizon = 100_000.0;
    let mut table = Table::new(
        provenance("experiment", &format!("preset=fig3 seed={} reps={reps}", opts.seed)),
        &["n", "gamma_sr", "ci_sr", "gamma_th", "ci_th", "lb", "ub"],
    );
    for n in 1..=10usize {
        let sources: Vec<SourceConfig> = (0..n)
            .map(|_| SourceConfig {
                rho: 1.0,
                cost: 1.0,
                gen: Some(DistSpec::Exponential { mean: 2.0 }),
                service: DistSpec::Exponential { mean: 1.0 },
            })
            .collect();
        let sr = scenario(opts.seed, horizon, reps, PolicyConfig::Sr { marking_probs: None }, sources.clone());
        let th = scenario(opts.seed, horizon, reps, PolicyConfig::Threshold { thresholds: None }, sources);
        let params = sr.source_params()?;
        let bounds = optimizer::compute_bounds(&params, false)?;
        let (g_sr, ci_sr) = run_gamma(&sr, opts.workers)?;
        let (g_th, ci_th) = run_gamma(&th, opts.workers)?;
        table.push(vec![
            n.to_string(),
            cell(g_sr),
            cell(ci_sr),
            cell(g_th),
            cell(ci_th),
            cell(bounds.lb_offline),
            cell(bounds.ub_policy),
        ]);
    }
    Ok(vec![("fig3.csv".into(), table)])
}

/// Weighted sum cost versus the inter-generation variance (log-normal
/// generation laws; the variance-zero point degenerates to deterministic).
fn fig4(opts: &PresetOpts) -> Result<Vec<(String, Table)>, CliError> {
    let reps = opts.reps.unwrap_or(8);
    let horizon = 60_000.0;
    let mut table = Table::new(
        provenance("experiment", &format!("preset=fig4 seed={} reps={reps}", opts.seed)),
        &[
            "sigma2",
            "gamma_sr_mu1",
            "ci_mu1",
            "gamma_sr_mu2",
            "ci_mu2",
            "lb_mu1",
            "ub_mu1",
            "lb_mu2",
            "ub_mu2",
        ],
    );
    for s2 in 0..=10 {
        let s2 = s2 as f64;
        let mut row = vec![cell(s2)];
        let mut bounds_cols = Vec::new();
        for mu in [1.0, 2.0] {
            let sources: Vec<SourceConfig> = (0..4)
                .map(|i| SourceConfig {
                    rho: RHO[i],
                    cost: COST_VEC[i],
                    gen: Some(if s2 == 0.0 {
                        DistSpec::Deterministic { value: mu * MU_VEC[i] }
                    } else {
                        DistSpec::LogNormal { mean: mu * MU_VEC[i], variance: s2 }
                    }),
                    service: DistSpec::Exponential { mean: GAMMA_VEC[i] },
                })
                .collect();
            let scn = scenario(opts.seed, horizon, reps, PolicyConfig::Sr { marking_probs: None }, sources);
            let params = scn.source_params()?;
            let bounds = optimizer::compute_bounds(&params, false)?;
            let (g, ci) = run_gamma(&scn, opts.workers)?;
            row.push(cell(g));
            row.push(cell(ci));
            bounds_cols.push(cell(bounds.lb_offline));
            bounds_cols.push(cell(bounds.ub_policy));
        }
        row.extend(bounds_cols);
        table.push(row);
    }
    Ok(vec![("fig4.csv".into(), table)])
}

/// Weighted sum cost versus the mean inter-generation time, with the
/// work-conserving variant alongside.
fn fig5(opts: &PresetOpts) -> Result<Vec<(String, Table)>, CliError> {
    let reps = opts.reps.unwrap_or(8);
    let horizon = 100_000.0;
    let mut table = Table::new(
        provenance("experiment", &format!("preset=fig5 seed={} reps={reps}", opts.seed)),
        &["mu", "gamma_sr", "ci_sr", "gamma_wc", "ci_wc", "lb", "ub"],
    );
    for mu in [1.0, 3.0, 6.0, 9.0, 12.0, 15.0, 18.0, 21.0, 24.0, 27.0, 30.0] {
        let sources: Vec<SourceConfig> = (0..4)
            .map(|i| SourceConfig {
                rho: RHO[i],
                cost: COST_VEC[i],
                gen: Some(DistSpec::Exponential { mean: mu * MU_VEC[i] }),
                service: DistSpec::Exponential { mean: 2.0 * GAMMA_VEC[i] },
            })
            .collect();
        let sr = scenario(opts.seed, horizon, reps, PolicyConfig::Sr { marking_probs: None }, sources.clone());
        let wc = scenario(
            opts.seed,
            horizon,
            reps,
            PolicyConfig::SrWorkConserving { marking_probs: None },
            sources,
        );
        let params = sr.source_params()?;
        let bounds = optimizer::compute_bounds(&params, false)?;
        let (g_sr, ci_sr) = run_gamma(&sr, opts.workers)?;
        let (g_wc, ci_wc) = run_gamma(&wc, opts.workers)?;
        table.push(vec![
            cell(mu),
            cell(g_sr),
            cell(ci_sr),
            cell(g_wc),
            cell(ci_wc),
            cell(bounds.lb_offline),
            cell(bounds.ub_policy),
        ]);
    }
    Ok(vec![("fig5.csv".into(), table)])
}

/// Weighted sum cost versus the mean transmission time for log-normal
/// service laws of different variances.
fn fig6(opts: &PresetOpts) -> Result<Vec<(String, Table)>, CliError> {
    let reps = opts.reps.unwrap_or(8);
    let horizon = 100_000.0;
    let mut table = Table::new(
        provenance("experiment", &format!("preset=fig6 seed={} reps={reps}", opts.seed)),
        &[
            "gamma",
            "gamma_sr_var0",
            "ci_var0",
            "gamma_sr_var4",
            "ci_var4",
            "gamma_wc_var4",
            "ci_wc_var4",
            "gamma_sr_var10",
            "ci_var10",
            "lb",
            "ub",
        ],
    );
    for g in 1..=10 {
        let g = g as f64;
        let sources_with = |variance: f64| -> Vec<SourceConfig> {
            (0..4)
                .map(|i| SourceConfig {
                    rho: RHO[i],
                    cost: COST_VEC[i],
                    gen: Some(DistSpec::Exponential { mean: 16.0 * MU_VEC[i] }),
                    service: if variance == 0.0 {
                        DistSpec::Deterministic { value: g * GAMMA_VEC[i] }
                    } else {
                        DistSpec::LogNormal { mean: g * GAMMA_VEC[i], variance }
                    },
                })
                .collect()
        };
        let mut row = vec![cell(g)];
        let mut lb_ub: Option<(f64, f64)> = None;
        for variance in [0.0, 4.0, 10.0] {
            let scn = scenario(
                opts.seed,
                horizon,
                reps,
                PolicyConfig::Sr { marking_probs: None },
                sources_with(variance),
            );
            let params = scn.source_params()?;
            let bounds = optimizer::compute_bounds(&params, false)?;
            lb_ub = Some((bounds.lb_offline, bounds.ub_policy));
            let (gm, ci) = run_gamma(&scn, opts.workers)?;
            row.push(cell(gm));
            row.push(cell(ci));
            if variance == 4.0 {
                let wc = scenario(
                    opts.seed,
                    horizon,
                    reps,
                    PolicyConfig::SrWorkConserving { marking_probs: None },
                    sources_with(variance),
                );
                let (gw, ciw) = run_gamma(&wc, opts.workers)?;
                row.push(cell(gw));
                row.push(cell(ciw));
            }
        }
        let (lb, ub) = lb_ub.expect("three variances ran");
        row.push(cell(lb));
        row.push(cell(ub));
        table.push(row);
    }
    Ok(vec![("fig6.csv".into(), table)])
}

/// Weighted sum cost versus the per-transmission cost; waiting beats
/// work-conservation once the cost is large.
fn fig7(opts: &PresetOpts) -> Result<Vec<(String, Table)>, CliError> {
    let reps = opts.reps.unwrap_or(8);
    let horizon = 100_000.0;
    let mut table = Table::new(
        provenance("experiment", &format!("preset=fig7 seed={} reps={reps}", opts.seed)),
        &["c", "gamma_sr", "ci_sr", "gamma_wc", "ci_wc", "lb", "ub"],
    );
    for c in [0.0, 100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0, 900.0, 1000.0] {
        let sources: Vec<SourceConfig> = (0..4)
            .map(|i| SourceConfig {
                rho: RHO[i],
                cost: c * COST_VEC[i],
                gen: Some(DistSpec::LogNormal { mean: MU_VEC[i], variance: 1.0 }),
                service: DistSpec::Exponential { mean: GAMMA_VEC[i] },
            })
            .collect();
        let sr = scenario(opts.seed, horizon, reps, PolicyConfig::Sr { marking_probs: None }, sources.clone());
        let wc = scenario(
            opts.seed,
            horizon,
            reps,
            PolicyConfig::SrWorkConserving { marking_probs: None },
            sources,
        );
        let params = sr.source_params()?;
        let bounds = optimizer::compute_bounds(&params, false)?;
        let (g_sr, ci_sr) = run_gamma(&sr, opts.workers)?;
        let (g_wc, ci_wc) = run_gamma(&wc, opts.workers)?;
        table.push(vec![
            cell(c),
            cell(g_sr),
            cell(ci_sr),
            cell(g_wc),
            cell(ci_wc),
            cell(bounds.lb_offline),
            cell(bounds.ub_policy),
        ]);
    }
    Ok(vec![("fig7.csv".into(), table)])
}

/// Slotted-time comparison against the per-slot randomized and max-weight
/// policies. The external lower-bound column stays empty unless values are
/// supplied.
fn fig8(opts: &PresetOpts) -> Result<Vec<(String, Table)>, CliError> {
    let reps = opts.reps.unwrap_or(4);
    let horizon_slots = 500_000u64;
    let success = [0.25, 0.5, 0.75, 1.0];
    let rates = [1.0, 0.75, 0.5, 0.25];
    let mut table = Table::new(
        provenance("experiment", &format!("preset=fig8 seed={} reps={reps}", opts.seed)),
        &["gen_rate", "aoi_sr", "aoi_rd", "aoi_mw", "lb"],
    );
    for step in 1..=7 {
        let inv_mu = 0.05 * step as f64;
        let sources: Vec<SourceConfig> = (0..4)
            .map(|i| SourceConfig {
                rho: RHO[i],
                cost: 0.0,
                gen: Some(DistSpec::Geometric { success_prob: inv_mu * rates[i] }),
                service: DistSpec::Geometric { success_prob: success[i] },
            })
            .collect();
        let mut values = Vec::new();
        for policy in [
            PolicyConfig::SrDiscrete,
            PolicyConfig::RandomizedDiscrete { q: None },
            PolicyConfig::MaxWeightDiscrete { weights: None },
        ] {
            let scn = Scenario {
                seed: opts.seed,
                horizon: horizon_slots as f64,
                replications: reps,
                slotted: true,
                preemptive: false,
                policy,
                sources: sources.clone(),
            };
            let slots = scn.slot_scenario()?;
            scn.build_slot_policy()?;
            let outcomes = parallel_indexed(reps as usize, opts.workers, |rep| {
                let mut policy = scn.build_slot_policy().expect("validated scenario");
                discrete::run_slotted(&slots, policy.as_mut(), horizon_slots, scn.seed, rep as u64)
                    .weighted_sum_aoi
            });
            values.push(metrics::mean_and_ci(&outcomes).0);
        }
        let lb = opts
            .external_lb
            .as_ref()
            .and_then(|rows| rows.iter().find(|(x, _)| (x - inv_mu).abs() < 1e-9))
            .map(|(_, v)| cell(*v))
            .unwrap_or_default();
        table.push(vec![cell(inv_mu), cell(values[0]), cell(values[1]), cell(values[2]), lb]);
    }
    Ok(vec![("fig8.csv".into(), table)])
}

fn generate_at_will_scenario(seed: u64, reps: u64, service: DistSpec, policy: PolicyConfig) -> Scenario {
    let horizon = 30_000.0 * service.mean();
    Scenario {
        seed,
        horizon,
        replications: reps,
        slotted: false,
        preemptive: false,
        policy,
        sources: vec![SourceConfig { rho: 1.0, cost: 0.0, gen: None, service }],
    }
}

/// Single-source generate-at-will age comparison: mean-service threshold
/// versus the numerically optimized threshold, for exponential and uniform
/// service laws.
fn fig9(opts: &PresetOpts) -> Result<Vec<(String, Table)>, CliError> {
    let reps = opts.reps.unwrap_or(4);
    let mut table = Table::new(
        provenance("experiment", &format!("preset=fig9 seed={} reps={reps}", opts.seed)),
        &[
            "gamma",
            "aoi_sd_exp",
            "ci_sd_exp",
            "aoi_star_exp",
            "ci_star_exp",
            "aoi_sd_unif",
            "ci_sd_unif",
            "aoi_star_unif",
            "ci_star_unif",
        ],
    );
    for g in 1..=10 {
        let g = g as f64;
        let mut row = vec![cell(g)];
        for service in [
            DistSpec::Exponential { mean: g },
            DistSpec::Uniform { a: 0.0, b: 2.0 * g },
        ] {
            for policy in [
                PolicyConfig::GenerateAtWill,
                PolicyConfig::GenerateAtWillOptimized { beta: None },
            ] {
                let scn = generate_at_will_scenario(opts.seed, reps, service.clone(), policy);
                let (aoi, ci) = run_gamma(&scn, opts.workers)?;
                row.push(cell(aoi));
                row.push(cell(ci));
            }
        }
        table.push(row);
    }
    Ok(vec![("fig9.csv".into(), table)])
}

/// The thresholds behind the generate-at-will policies.
fn fig10(opts: &PresetOpts) -> Result<Vec<(String, Table)>, CliError> {
    let mut table = Table::new(
        provenance("experiment", &format!("preset=fig10 seed={}", opts.seed)),
        &["gamma", "threshold_sd", "beta_star_exp", "beta_star_unif"],
    );
    for g in 1..=10 {
        let g = g as f64;
        let beta_exp =
            optimize_generate_at_will_threshold(&DistSpec::Exponential { mean: g }, THRESHOLD_SEARCH_CYCLES, opts.seed)
                .map_err(|e| CliError::Numerical(e.to_string()))?;
        let beta_unif = optimize_generate_at_will_threshold(
            &DistSpec::Uniform { a: 0.0, b: 2.0 * g },
            THRESHOLD_SEARCH_CYCLES,
            opts.seed,
        )
        .map_err(|e| CliError::Numerical(e.to_string()))?;
        table.push(vec![cell(g), cell(g), cell(beta_exp), cell(beta_unif)]);
    }
    Ok(vec![("fig10.csv".into(), table)])
}

/// The two-point tight instance: the stationary randomized policy against
/// the immediate age-threshold policy, with the predicted cost ratio.
fn example1(opts: &PresetOpts) -> Result<Vec<(String, Table)>, CliError> {
    let reps = opts.reps.unwrap_or(4);
    let eps = 1e-3;
    let horizon = 1_000_000.0;
    let mut table = Table::new(
        provenance("experiment", &format!("preset=example1 seed={} reps={reps} eps={eps}", opts.seed)),
        &["alpha", "gamma_sr", "ci_sr", "gamma_tp", "ci_tp", "ratio", "predicted_ratio"],
    );
    for alpha in [25.0, 50.0, 75.0, 100.0] {
        let gen = DistSpec::TwoPoint { lo: eps, hi: alpha, prob_hi: 0.5 };
        let (mu, var) = gen.moments();
        let sources = vec![SourceConfig {
            rho: 1.0,
            cost: 0.0,
            gen: Some(gen),
            service: DistSpec::Deterministic { value: 0.0 },
        }];
        let sr = scenario(opts.seed, horizon, reps, PolicyConfig::Sr { marking_probs: None }, sources.clone());
        let tp = scenario(opts.seed, horizon, reps, PolicyConfig::AgeThreshold { alpha }, sources);
        let (g_sr, ci_sr) = run_gamma(&sr, opts.workers)?;
        let (g_tp, ci_tp) = run_gamma(&tp, opts.workers)?;
        table.push(vec![
            cell(alpha),
            cell(g_sr),
            cell(ci_sr),
            cell(g_tp),
            cell(ci_tp),
            cell(g_sr / g_tp),
            cell(0.5 * (var / (mu * mu) + 1.0)),
        ]);
    }
    Ok(vec![("example1.csv".into(), table)])
}
