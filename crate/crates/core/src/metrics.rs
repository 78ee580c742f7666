//! Cost accounting, period statistics, and empirical verification
//! quantities shared by the continuous and slotted engines.

use crate::distributions::DistSpec;
use crate::optimizer::SourceParams;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("empty sample set")]
    EmptySamples,
}

/// One completed period of a source: the gap between the generation times
/// of two consecutively received packets, plus the received packet's system
/// time split into waiting and transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodSample {
    /// Period length `T`.
    pub period: f64,
    /// System time `Z = w + d` of the packet closing the period.
    pub system_time: f64,
    /// Transmission time `d`.
    pub service: f64,
    /// Waiting time `w`.
    pub wait: f64,
}

/// Per-source period records from one completed run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PeriodLog {
    pub per_source: Vec<Vec<PeriodSample>>,
}

impl PeriodLog {
    pub fn new(sources: usize) -> Self {
        PeriodLog { per_source: vec![Vec::new(); sources] }
    }
}

/// Weighted sum cost recomputed from the period log:
/// `(1/N) sum_l sum_i (rho_l (T_i^2/2 + T_i Z_i) + c_l) / t`.
///
/// Differs from the engine's integrated cost by exactly the final partial
/// age triangle of every source plus the cost of transmissions started but
/// not completed by the horizon.
pub fn gamma_from_periods(
    log: &PeriodLog,
    params: &[SourceParams<f64>],
    horizon: f64,
) -> f64 {
    let n = params.len() as f64;
    let mut total = 0.0;
    for (source, periods) in log.per_source.iter().enumerate() {
        let p = &params[source];
        let mut acc = 0.0;
        for s in periods {
            acc += p.rho * (0.5 * s.period * s.period + s.period * s.system_time) + p.cost;
        }
        total += acc / horizon;
    }
    total / n
}

/// Mean, variance, and the empirical period-fluctuation statistic
/// `beta_hat = sum_i delta_i (delta_i + 2 d_i) / R` with
/// `delta_i = T_i - mean(T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodStats {
    pub mean: f64,
    pub variance: f64,
    pub beta_hat: f64,
}

/// Statistics of one source's periods; `None` when the log is empty.
pub fn period_stats(periods: &[PeriodSample]) -> Option<PeriodStats> {
    if periods.is_empty() {
        return None;
    }
    let n = periods.len() as f64;
    let mean = periods.iter().map(|s| s.period).sum::<f64>() / n;
    let mut var_acc = 0.0;
    let mut beta_acc = 0.0;
    for s in periods {
        let delta = s.period - mean;
        var_acc += delta * delta;
        beta_acc += delta * (delta + 2.0 * s.service);
    }
    Some(PeriodStats {
        mean,
        variance: if periods.len() > 1 { var_acc / (n - 1.0) } else { 0.0 },
        beta_hat: beta_acc / n,
    })
}

/// Channel-sharing check `sum_l gamma_l R_l(t) / t` with its finite-sample
/// tolerance `1 + 10/sqrt(min_l R_l)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilizationReport {
    pub value: f64,
    pub bound: f64,
}

pub fn utilization_check(
    log: &PeriodLog,
    params: &[SourceParams<f64>],
    horizon: f64,
) -> UtilizationReport {
    let mut value = 0.0;
    let mut min_r = u64::MAX;
    for (source, periods) in log.per_source.iter().enumerate() {
        value += params[source].gamma * periods.len() as f64 / horizon;
        min_r = min_r.min(periods.len() as u64);
    }
    let bound = if min_r == 0 { f64::INFINITY } else { 1.0 + 10.0 / (min_r as f64).sqrt() };
    UtilizationReport { value, bound }
}

/// Kolmogorov-Smirnov sup-distance between the empirical CDF of `samples`
/// and the analytic CDF of `spec`.
pub fn ks_distance(samples: &[f64], spec: &DistSpec) -> Result<f64, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptySamples);
    }
    let mut xs = samples.to_vec();
    xs.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut sup: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        // Group ties so the empirical CDF jumps once per distinct value;
        // compare against the analytic CDF on both sides of the jump.
        let x = xs[i];
        let mut j = i + 1;
        while j < xs.len() && xs[j] == x {
            j += 1;
        }
        let before = i as f64 / n;
        let after = j as f64 / n;
        sup = sup.max((spec.cdf_left(x) - before).abs()).max((spec.cdf(x) - after).abs());
        i = j;
    }
    Ok(sup)
}

/// Sample mean and 95% normal-approximation confidence half-width.
pub fn mean_and_ci(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    // Constant samples get an exactly-zero width; summing identical floats
    // can otherwise leave rounding residue in the variance.
    if xs.iter().all(|&x| x == xs[0]) {
        return (xs[0], 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

/// Pearson correlation of paired samples (truncated to the shorter vector).
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len());
    assert!(n >= 2, "correlation needs at least two pairs");
    let nf = n as f64;
    let mx = xs[..n].iter().sum::<f64>() / nf;
    let my = ys[..n].iter().sum::<f64>() / nf;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let dx = xs[i] - mx;
        let dy = ys[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    sxy / (sxx * syy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{RngStream, StreamPurpose};

    fn params1(rho: f64, cost: f64) -> Vec<SourceParams<f64>> {
        vec![SourceParams { rho, cost, mu: 1.0, sigma2: 1.0, gamma: 1.0 }]
    }

    #[test]
    fn gamma_from_single_period() {
        // One period T=2, Z=1, rho=1, c=1, t=2 -> (1*(2+2)+1)/2 = 2.5.
        let mut log = PeriodLog::new(1);
        log.per_source[0].push(PeriodSample { period: 2.0, system_time: 1.0, service: 1.0, wait: 0.0 });
        let g = gamma_from_periods(&log, &params1(1.0, 1.0), 2.0);
        assert!((g - 2.5).abs() < 1e-12);
    }

    #[test]
    fn gamma_with_no_periods_is_zero_here() {
        // The age-triangle contribution lives in the engine's integral; the
        // period-sum form is zero on an empty log.
        let log = PeriodLog::new(1);
        assert_eq!(gamma_from_periods(&log, &params1(1.0, 0.0), 10.0), 0.0);
    }

    #[test]
    fn equal_periods_have_zero_beta() {
        let mut log = PeriodLog::new(1);
        for _ in 0..50 {
            log.per_source[0].push(PeriodSample { period: 3.0, system_time: 0.5, service: 0.5, wait: 0.0 });
        }
        let stats = period_stats(&log.per_source[0]).unwrap();
        assert_eq!(stats.beta_hat, 0.0);
        assert_eq!(stats.variance, 0.0);
        assert_eq!(stats.mean, 3.0);
    }

    #[test]
    fn empty_log_gives_none() {
        assert!(period_stats(&[]).is_none());
    }

    #[test]
    fn utilization_of_saturated_source() {
        // Back-to-back unit transmissions: R = t / 1.
        let mut log = PeriodLog::new(1);
        for _ in 0..100 {
            log.per_source[0].push(PeriodSample { period: 1.0, system_time: 1.0, service: 1.0, wait: 0.0 });
        }
        let rep = utilization_check(&log, &params1(1.0, 0.0), 100.0);
        assert!((rep.value - 1.0).abs() < 1e-12);
        assert!(rep.value <= rep.bound);
    }

    #[test]
    fn utilization_of_idle_system() {
        let log = PeriodLog::new(1);
        let rep = utilization_check(&log, &params1(1.0, 0.0), 100.0);
        assert_eq!(rep.value, 0.0);
    }

    #[test]
    fn ks_distance_of_true_law_is_small() {
        let spec = DistSpec::exponential(2.0).unwrap();
        let mut rng = RngStream::new(404, 0, 0, StreamPurpose::Aux);
        let samples: Vec<f64> = (0..1_000_000).map(|_| spec.sample(&mut rng)).collect();
        let d = ks_distance(&samples, &spec).unwrap();
        assert!(d < 0.002, "ks distance {d}");
    }

    #[test]
    fn ks_distance_of_wrong_law_is_large() {
        let spec = DistSpec::exponential(2.0).unwrap();
        let wrong = DistSpec::exponential(3.0).unwrap();
        let mut rng = RngStream::new(405, 0, 0, StreamPurpose::Aux);
        let samples: Vec<f64> = (0..100_000).map(|_| spec.sample(&mut rng)).collect();
        assert!(ks_distance(&samples, &wrong).unwrap() > 0.05);
    }

    #[test]
    fn ks_distance_deterministic_matching() {
        let spec = DistSpec::deterministic(2.0).unwrap();
        let samples = vec![2.0; 1000];
        // Step geometry: the empirical CDF jumps where the analytic one does.
        assert!(ks_distance(&samples, &spec).unwrap() < 1e-12);
    }

    #[test]
    fn ks_distance_rejects_empty() {
        let spec = DistSpec::exponential(1.0).unwrap();
        assert_eq!(ks_distance(&[], &spec), Err(MetricsError::EmptySamples));
    }

    #[test]
    fn ci_basics() {
        let (m, ci) = mean_and_ci(&[2.0, 2.0, 2.0, 2.0]);
        assert_eq!(m, 2.0);
        assert_eq!(ci, 0.0);
        let (m, ci) = mean_and_ci(&[1.0]);
        assert_eq!((m, ci), (1.0, 0.0));
    }

    #[test]
    fn correlation_of_independent_streams_is_small() {
        let mut a = RngStream::new(9, 0, 0, StreamPurpose::Aux);
        let mut b = RngStream::new(9, 0, 1, StreamPurpose::Aux);
        let xs: Vec<f64> = (0..200_000).map(|_| a.uniform()).collect();
        let ys: Vec<f64> = (0..200_000).map(|_| b.uniform()).collect();
        assert!(correlation(&xs, &ys).abs() < 0.01);
    }
}
