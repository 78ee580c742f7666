//! Marking-probability programs and analytic cost bounds.
//!
//! Both convex programs minimize a separable objective
//! `sum_l (k * rho_l * mu_l / p_l + c_l * p_l / mu_l)` (k = 2 non-preemptive,
//! k = 3 preemptive) over `p in [0,1]^N` subject to the channel-sharing
//! constraint `sum_l p_l * gamma_l / mu_l <= 1`. Separability gives the
//! water-filling closed form `p_l(lambda) = min(1, mu_l * sqrt(k*rho_l /
//! (c_l + lambda*gamma_l)))`, with `p_l = 1` when the denominator vanishes,
//! and a one-dimensional bisection on the dual multiplier `lambda >= 0`
//! drives the constraint to bind or proves it slack. The offline lower
//! bound minimizes `sum_l (rho_l*mu_l/(2 f_l) + c_l f_l / mu_l)` over the
//! same feasible set, which is the same closed form with k = 1/2.

use crate::real::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OptimError {
    #[error("source {index}: {reason}")]
    InvalidSource { index: usize, reason: String },
    #[error("at least one source is required")]
    NoSources,
    #[error("marking probability for source {0} is zero")]
    ZeroProbability(usize),
    #[error("dual bisection failed to bracket the constraint")]
    NoBracket,
    #[error("no feasible grid point at resolution {0}")]
    GridTooCoarse(f64),
}

/// Per-source constants: weight, cost per transmission, inter-generation
/// mean/variance, and mean transmission time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceParams<T> {
    pub rho: T,
    pub cost: T,
    pub mu: T,
    pub sigma2: T,
    pub gamma: T,
}

impl<T: Real> SourceParams<T> {
    /// `theta = 1 - sigma^2 / mu^2`; at most 1, unbounded below.
    pub fn theta(&self) -> T {
        T::one() - self.sigma2 / (self.mu * self.mu)
    }

    /// Dispersion ratio `sigma^2 / mu^2`.
    pub fn dispersion(&self) -> T {
        self.sigma2 / (self.mu * self.mu)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.rho.is_finite() && self.rho > T::zero()) {
            return Err(format!("rho must be positive and finite, got {}", self.rho));
        }
        if !(self.cost.is_finite() && self.cost >= T::zero()) {
            return Err(format!("cost must be nonnegative and finite, got {}", self.cost));
        }
        if !(self.mu.is_finite() && self.mu > T::zero()) {
            return Err(format!("mu must be positive and finite, got {}", self.mu));
        }
        if !(self.sigma2.is_finite() && self.sigma2 >= T::zero()) {
            return Err(format!("sigma2 must be nonnegative and finite, got {}", self.sigma2));
        }
        if !(self.gamma.is_finite() && self.gamma >= T::zero()) {
            return Err(format!("gamma must be nonnegative and finite, got {}", self.gamma));
        }
        Ok(())
    }
}

fn validate_all<T: Real>(params: &[SourceParams<T>]) -> Result<(), OptimError> {
    if params.is_empty() {
        return Err(OptimError::NoSources);
    }
    for (index, p) in params.iter().enumerate() {
        p.validate()
            .map_err(|reason| OptimError::InvalidSource { index, reason })?;
    }
    Ok(())
}

/// Marking probabilities together with the dual value of the channel
/// constraint at the optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector<T> {
    pub probs: Vec<T>,
    pub multiplier: T,
}

/// Everything the bound pipeline produces for one instance.
///
/// `lb_offline` is the minimum of the offline bound expression over all
/// feasible transmitted fractions `f`; the analysis states the bound at the
/// fraction the optimal offline policy realizes, which is feasible, so the
/// minimum over `f` is the computable lower bound on any offline policy.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport<T> {
    pub marking: ProbVector<T>,
    pub selection: Vec<T>,
    pub lb_offline: T,
    pub ub_policy: T,
    pub cr_bound: T,
    pub f_star: Vec<T>,
}

/// `p_l(lambda)` for objective coefficient `coeff`.
fn closed_form<T: Real>(p: &SourceParams<T>, coeff: T, lambda: T) -> T {
    let denom = p.cost + lambda * p.gamma;
    if denom <= T::zero() {
        // Objective strictly decreasing in p_l.
        T::one()
    } else {
        (p.mu * (coeff * p.rho / denom).sqrt()).min(T::one())
    }
}

/// Channel-constraint slack `1 - sum_l x_l(lambda) * gamma_l / mu_l`,
/// nondecreasing in `lambda`.
fn constraint_slack<T: Real>(params: &[SourceParams<T>], coeff: T, lambda: T) -> T {
    let mut used = T::zero();
    for p in params {
        used = used + closed_form(p, coeff, lambda) * p.gamma / p.mu;
    }
    T::one() - used
}

/// Water-filling solve for one coefficient: the probability vector and the
/// dual multiplier. Absolute tolerance 1e-12 on lambda (clamped to machine
/// precision for narrower floats), 1e-9 on slack.
fn waterfill<T: Real>(params: &[SourceParams<T>], coeff: T) -> Result<(Vec<T>, T), OptimError> {
    let slack_tol = T::of(1e-9).max(T::epsilon());
    if constraint_slack(params, coeff, T::zero()) >= -slack_tol {
        let probs = params.iter().map(|p| closed_form(p, coeff, T::zero())).collect();
        return Ok((probs, T::zero()));
    }
    // Bracket: double from 1 until the constraint is satisfied.
    let mut hi = T::one();
    let mut iters = 0;
    while constraint_slack(params, coeff, hi) < T::zero() {
        hi = hi + hi;
        iters += 1;
        if iters > 200 {
            return Err(OptimError::NoBracket);
        }
    }
    let two = T::of(2.0);
    let mut lo = if hi > T::one() { hi / two } else { T::zero() };
    let lambda_tol = T::of(1e-12).max(T::epsilon() * hi);
    while hi - lo > lambda_tol {
        let mid = (lo + hi) / two;
        let s = constraint_slack(params, coeff, mid);
        if s.abs() <= slack_tol {
            let probs = params.iter().map(|p| closed_form(p, coeff, mid)).collect();
            return Ok((probs, mid));
        }
        if s < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // hi satisfies the constraint; at a clamped solution the slack can stay
    // positive for every lambda in the bracket.
    let lambda = hi;
    let probs = params.iter().map(|p| closed_form(p, coeff, lambda)).collect();
    Ok((probs, lambda))
}

fn marking_objective<T: Real>(params: &[SourceParams<T>], probs: &[T], coeff: T) -> T {
    params
        .iter()
        .zip(probs)
        .fold(T::zero(), |acc, (p, &x)| acc + coeff * p.rho * p.mu / x + p.cost * x / p.mu)
}

/// Value of the non-preemptive marking objective at `probs`.
pub fn marking_objective_value<T: Real>(params: &[SourceParams<T>], probs: &[T]) -> T {
    marking_objective(params, probs, T::of(2.0))
}

/// Value of the preemptive marking objective at `probs`.
pub fn marking_objective_value_preemptive<T: Real>(params: &[SourceParams<T>], probs: &[T]) -> T {
    marking_objective(params, probs, T::of(3.0))
}

/// Minimizer of the non-preemptive marking program.
pub fn solve_marking_probs<T: Real>(params: &[SourceParams<T>]) -> Result<ProbVector<T>, OptimError> {
    validate_all(params)?;
    let (probs, multiplier) = waterfill(params, T::of(2.0))?;
    Ok(ProbVector { probs, multiplier })
}

/// Minimizer of the preemptive-setting marking program (coefficient 3).
pub fn solve_marking_probs_preemptive<T: Real>(
    params: &[SourceParams<T>],
) -> Result<ProbVector<T>, OptimError> {
    validate_all(params)?;
    let (probs, multiplier) = waterfill(params, T::of(3.0))?;
    Ok(ProbVector { probs, multiplier })
}

/// Source-selection probabilities `p_hat_l = (p_l/mu_l) / sum_i (p_i/mu_i)`.
pub fn selection_probs<T: Real>(marking: &ProbVector<T>, params: &[SourceParams<T>]) -> Vec<T> {
    let weights: Vec<T> = marking
        .probs
        .iter()
        .zip(params)
        .map(|(&p, s)| p / s.mu)
        .collect();
    let total = weights.iter().fold(T::zero(), |a, &w| a + w);
    weights.into_iter().map(|w| w / total).collect()
}

fn lower_bound_with<T: Real>(
    params: &[SourceParams<T>],
    include_service_term: bool,
) -> Result<(T, Vec<T>), OptimError> {
    validate_all(params)?;
    let (f, _) = waterfill(params, T::of(0.5))?;
    let n = T::of(params.len() as f64);
    let two = T::of(2.0);
    let mut total = T::zero();
    for (p, &fl) in params.iter().zip(&f) {
        total = total + p.rho * p.mu / (two * fl) + p.cost * fl / p.mu;
        if include_service_term {
            total = total + p.rho * p.gamma;
        }
    }
    Ok((total / n, f))
}

/// Offline lower bound for non-preemptive policies: the minimum over
/// feasible `f` of `(1/N) sum_l (rho_l mu_l / (2 f_l) + rho_l gamma_l +
/// c_l f_l / mu_l)`.
pub fn lower_bound_offline<T: Real>(params: &[SourceParams<T>]) -> Result<(T, Vec<T>), OptimError> {
    lower_bound_with(params, true)
}

/// Lower bound against preemptive offline policies; drops the
/// `rho_l * gamma_l` term (completed transmissions can be arbitrarily short
/// under preemption).
pub fn lower_bound_preemptive<T: Real>(
    params: &[SourceParams<T>],
) -> Result<(T, Vec<T>), OptimError> {
    lower_bound_with(params, false)
}

/// Upper bound on the expected weighted sum cost of the stationary
/// randomized policy at the given marking probabilities:
/// `(1/N) sum_l (2 rho mu / p + c p / mu + rho gamma - rho mu theta / 2)`.
pub fn upper_bound_sr<T: Real>(
    params: &[SourceParams<T>],
    marking: &ProbVector<T>,
) -> Result<T, OptimError> {
    validate_all(params)?;
    let n = T::of(params.len() as f64);
    let two = T::of(2.0);
    let mut total = T::zero();
    for (i, (p, &pl)) in params.iter().zip(&marking.probs).enumerate() {
        if pl <= T::zero() {
            return Err(OptimError::ZeroProbability(i));
        }
        total = total + two * p.rho * p.mu / pl + p.cost * pl / p.mu + p.rho * p.gamma
            - p.rho * p.mu * p.theta() / two;
    }
    Ok(total / n)
}

/// Preemptive-setting counterpart:
/// `(1/N) sum_l (3 rho mu / p + c p / mu - rho mu theta / 2)`.
pub fn upper_bound_sr_preemptive<T: Real>(
    params: &[SourceParams<T>],
    marking: &ProbVector<T>,
) -> Result<T, OptimError> {
    validate_all(params)?;
    let n = T::of(params.len() as f64);
    let two = T::of(2.0);
    let three = T::of(3.0);
    let mut total = T::zero();
    for (i, (p, &pl)) in params.iter().zip(&marking.probs).enumerate() {
        if pl <= T::zero() {
            return Err(OptimError::ZeroProbability(i));
        }
        total = total + three * p.rho * p.mu / pl + p.cost * pl / p.mu
            - p.rho * p.mu * p.theta() / two;
    }
    Ok(total / n)
}

/// Closed-form competitive-ratio bound: `max(4, 3 + max_l sigma^2/mu^2)`
/// non-preemptive, `max(6, 5 + max_l sigma^2/mu^2)` preemptive.
pub fn cr_bound<T: Real>(params: &[SourceParams<T>], preemptive: bool) -> T {
    let worst = params
        .iter()
        .map(|p| p.dispersion())
        .fold(T::zero(), |a, d| a.max(d));
    if preemptive {
        T::of(6.0).max(T::of(5.0) + worst)
    } else {
        T::of(4.0).max(T::of(3.0) + worst)
    }
}

/// Full bound pipeline for one instance.
pub fn compute_bounds<T: Real>(
    params: &[SourceParams<T>],
    preemptive: bool,
) -> Result<BoundsReport<T>, OptimError> {
    let marking = if preemptive {
        solve_marking_probs_preemptive(params)?
    } else {
        solve_marking_probs(params)?
    };
    let selection = selection_probs(&marking, params);
    let ((lb_offline, f_star), ub_policy) = if preemptive {
        (
            lower_bound_preemptive(params)?,
            upper_bound_sr_preemptive(params, &marking)?,
        )
    } else {
        (lower_bound_offline(params)?, upper_bound_sr(params, &marking)?)
    };
    Ok(BoundsReport {
        marking,
        selection,
        lb_offline,
        ub_policy,
        cr_bound: cr_bound(params, preemptive),
        f_star,
    })
}

/// Grid-search minimizer of the non-preemptive marking objective over
/// feasible grid points.
///
/// For a single source this is an exhaustive scan of `(0, 1]` at
/// `grid_step`. For two or three sources an exhaustive fine scan is out of
/// reach, so the search runs a coarse lattice first and re-grids a shrinking
/// box around the incumbent down to `grid_step`; the objective is convex and
/// the constraint monotone in every coordinate, so the box refinement keeps
/// the minimizer. Infeasible points are never evaluated or returned. The
/// `multiplier` field of the result is not produced by this oracle and is
/// reported as zero.
pub fn brute_force_probs<T: Real>(
    params: &[SourceParams<T>],
    grid_step: f64,
) -> Result<ProbVector<T>, OptimError> {
    brute_force_with_coeff(params, grid_step, T::of(2.0))
}

/// Same oracle for the preemptive (coefficient 3) program.
pub fn brute_force_probs_preemptive<T: Real>(
    params: &[SourceParams<T>],
    grid_step: f64,
) -> Result<ProbVector<T>, OptimError> {
    brute_force_with_coeff(params, grid_step, T::of(3.0))
}

fn is_feasible<T: Real>(params: &[SourceParams<T>], point: &[T]) -> bool {
    let mut used = T::zero();
    for (p, &x) in params.iter().zip(point) {
        used = used + x * p.gamma / p.mu;
    }
    used <= T::one() + T::of(1e-12)
}

/// Scan the lattice `{lo_d + k*step}` inside `[lo_d, hi_d]` per dimension,
/// returning the best feasible point, if any.
fn scan_box<T: Real>(
    params: &[SourceParams<T>],
    coeff: T,
    lo: &[f64],
    hi: &[f64],
    step: f64,
) -> Option<(T, Vec<f64>)> {
    let n = params.len();
    let counts: Vec<usize> = (0..n)
        .map(|d| (((hi[d] - lo[d]) / step) + 1e-9).floor() as usize + 1)
        .collect();
    let total: usize = counts.iter().product();
    let mut best: Option<(T, Vec<f64>)> = None;
    let mut point_f = vec![0.0f64; n];
    let mut point_t = vec![T::zero(); n];
    for flat in 0..total {
        let mut rem = flat;
        for d in 0..n {
            let k = rem % counts[d];
            rem /= counts[d];
            let v = (lo[d] + step * k as f64).min(1.0);
            point_f[d] = v;
            point_t[d] = T::of(v);
        }
        if !is_feasible(params, &point_t) {
            continue;
        }
        let obj = marking_objective(params, &point_t, coeff);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, point_f.clone()));
        }
    }
    best
}

fn brute_force_with_coeff<T: Real>(
    params: &[SourceParams<T>],
    grid_step: f64,
    coeff: T,
) -> Result<ProbVector<T>, OptimError> {
    validate_all(params)?;
    assert!(params.len() <= 3, "grid oracle limited to 3 sources");
    assert!(grid_step > 0.0 && grid_step < 1.0);
    let n = params.len();

    let mut steps = Vec::new();
    let mut s = if n == 1 { grid_step } else { grid_step.max(0.01) };
    loop {
        steps.push(s);
        if s <= grid_step * (1.0 + 1e-9) {
            break;
        }
        s = (s / 10.0).max(grid_step);
    }

    let mut incumbent: Option<Vec<f64>> = None;
    let mut prev_step = 1.0;
    for &step in &steps {
        let (lo, hi): (Vec<f64>, Vec<f64>) = match &incumbent {
            // Box of +/- 2 coarse cells around the incumbent, clamped to (0, 1].
            Some(c) => c
                .iter()
                .map(|&v| ((v - 2.0 * prev_step).max(step), (v + 2.0 * prev_step).min(1.0)))
                .unzip(),
            None => (vec![step; n], vec![1.0; n]),
        };
        if let Some((_, point)) = scan_box(params, coeff, &lo, &hi, step) {
            incumbent = Some(point);
            prev_step = step;
        } else if incumbent.is_none() {
            // Entire coarse lattice infeasible; retry the full box finer.
            continue;
        }
    }
    match incumbent {
        Some(point) => Ok(ProbVector {
            probs: point.into_iter().map(T::of).collect(),
            multiplier: T::zero(),
        }),
        None => Err(OptimError::GridTooCoarse(grid_step)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{RngStream, StreamPurpose};

    fn src(rho: f64, cost: f64, mu: f64, sigma2: f64, gamma: f64) -> SourceParams<f64> {
        SourceParams { rho, cost, mu, sigma2, gamma }
    }

    fn random_instance(rng: &mut RngStream, n: usize) -> Vec<SourceParams<f64>> {
        (0..n)
            .map(|_| {
                src(
                    0.1 + 5.0 * rng.uniform(),
                    10.0 * rng.uniform(),
                    0.5 + 4.0 * rng.uniform(),
                    4.0 * rng.uniform(),
                    2.0 * rng.uniform(),
                )
            })
            .collect()
    }

    #[test]
    fn single_source_free_channel_marks_everything() {
        for &(rho, mu) in &[(1.0, 1.0), (3.0, 0.25), (0.2, 8.0)] {
            let p = solve_marking_probs(&[src(rho, 0.0, mu, 1.0, 0.0)]).unwrap();
            assert_eq!(p.probs, vec![1.0]);
            assert_eq!(p.multiplier, 0.0);
        }
    }

    #[test]
    fn single_source_interior_stationary_point() {
        // -2/p^2 + 8 = 0 at p = 0.5, constraint slack (0.25 <= 1).
        let p = solve_marking_probs(&[src(1.0, 8.0, 1.0, 1.0, 0.5)]).unwrap();
        assert!((p.probs[0] - 0.5).abs() < 1e-9);
        assert_eq!(p.multiplier, 0.0);
    }

    #[test]
    fn symmetric_two_sources_bind_the_channel() {
        let params = vec![src(1.0, 0.0, 1.0, 1.0, 1.0), src(1.0, 0.0, 1.0, 1.0, 1.0)];
        let p = solve_marking_probs(&params).unwrap();
        assert!((p.probs[0] - 0.5).abs() < 1e-6);
        assert!((p.probs[1] - 0.5).abs() < 1e-6);
        assert!((p.multiplier - 8.0).abs() < 1e-5, "lambda = {}", p.multiplier);
    }

    #[test]
    fn preemptive_examples() {
        let p = solve_marking_probs_preemptive(&[src(2.0, 0.0, 1.5, 1.0, 0.0)]).unwrap();
        assert_eq!(p.probs, vec![1.0]);

        // -3/p^2 + 12 = 0 at p = 0.5.
        let p = solve_marking_probs_preemptive(&[src(1.0, 12.0, 1.0, 1.0, 0.5)]).unwrap();
        assert!((p.probs[0] - 0.5).abs() < 1e-9);

        let params = vec![src(1.0, 0.0, 1.0, 1.0, 1.0), src(1.0, 0.0, 1.0, 1.0, 1.0)];
        let p = solve_marking_probs_preemptive(&params).unwrap();
        assert!((p.probs[0] - 0.5).abs() < 1e-6);
        assert!((p.probs[1] - 0.5).abs() < 1e-6);
        assert!((p.multiplier - 12.0).abs() < 1e-4);
    }

    #[test]
    fn selection_prob_examples() {
        let params = vec![src(1.0, 0.0, 1.0, 1.0, 0.0), src(1.0, 0.0, 2.0, 1.0, 0.0)];
        let marking = ProbVector { probs: vec![0.5, 0.25], multiplier: 0.0 };
        let sel = selection_probs(&marking, &params);
        assert!((sel[0] - 0.8).abs() < 1e-12);
        assert!((sel[1] - 0.2).abs() < 1e-12);

        let one = selection_probs(
            &ProbVector { probs: vec![0.3], multiplier: 0.0 },
            &[src(1.0, 0.0, 2.0, 1.0, 0.0)],
        );
        assert_eq!(one, vec![1.0]);

        let sym = selection_probs(
            &ProbVector { probs: vec![0.4, 0.4], multiplier: 0.0 },
            &[src(1.0, 0.0, 3.0, 1.0, 0.0), src(1.0, 0.0, 3.0, 1.0, 0.0)],
        );
        assert!((sym[0] - 0.5).abs() < 1e-12 && (sym[1] - 0.5).abs() < 1e-12);
    }

    /// 1-d exhaustive oracle for the lower-bound expression.
    fn lb_grid_1d(p: &SourceParams<f64>, with_service: bool, step: f64) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0);
        let mut k = 1usize;
        loop {
            let f = step * k as f64;
            if f > 1.0 {
                break;
            }
            if f * p.gamma / p.mu <= 1.0 + 1e-12 {
                let mut v = p.rho * p.mu / (2.0 * f) + p.cost * f / p.mu;
                if with_service {
                    v += p.rho * p.gamma;
                }
                if v < best.0 {
                    best = (v, f);
                }
            }
            k += 1;
        }
        best
    }

    #[test]
    fn lower_bound_examples() {
        let p1 = src(1.0, 0.0, 2.0, 1.0, 0.5);
        let (lb, f) = lower_bound_offline(&[p1]).unwrap();
        assert!((f[0] - 1.0).abs() < 1e-9);
        assert!((lb - 1.5).abs() < 1e-9);
        let (oracle, of) = lb_grid_1d(&p1, true, 1e-4);
        assert!((lb - oracle).abs() <= 1e-3 * oracle);
        assert!((f[0] - of).abs() <= 1e-3);

        let p2 = src(1.0, 2.0, 1.0, 1.0, 0.0);
        let (lb, f) = lower_bound_offline(&[p2]).unwrap();
        assert!((f[0] - 0.5).abs() < 1e-9);
        assert!((lb - 2.0).abs() < 1e-9);
        let (oracle, _) = lb_grid_1d(&p2, true, 1e-4);
        assert!((lb - oracle).abs() <= 1e-3 * oracle);

        // gamma -> 0 and c = 0 pushes every f to 1.
        let params = vec![src(2.0, 0.0, 3.0, 1.0, 0.0), src(1.0, 0.0, 1.0, 1.0, 0.0)];
        let (lb, f) = lower_bound_offline(&params).unwrap();
        assert_eq!(f, vec![1.0, 1.0]);
        assert!((lb - 0.5 * (2.0 * 3.0 / 2.0 + 1.0 * 1.0 / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn preemptive_lower_bound_examples() {
        let p1 = src(1.0, 0.0, 2.0, 1.0, 0.5);
        let (lb, f) = lower_bound_preemptive(&[p1]).unwrap();
        assert!((f[0] - 1.0).abs() < 1e-9);
        assert!((lb - 1.0).abs() < 1e-9);
        // Dropping a nonnegative term keeps it below the non-preemptive bound.
        let (lb_np, _) = lower_bound_offline(&[p1]).unwrap();
        assert!(lb_np >= lb);

        // Identical when gamma = 0.
        let p2 = src(1.0, 2.0, 1.0, 1.0, 0.0);
        let (lb_p, _) = lower_bound_preemptive(&[p2]).unwrap();
        let (lb_n, _) = lower_bound_offline(&[p2]).unwrap();
        assert!((lb_p - 2.0).abs() < 1e-9);
        assert_eq!(lb_p, lb_n);
    }

    #[test]
    fn upper_bound_examples() {
        // theta = 0, gamma = 0, c = 0, p = 1 gives 2*rho*mu.
        let p = src(1.0, 0.0, 1.0, 1.0, 0.0);
        let marking = solve_marking_probs(&[p]).unwrap();
        assert!((upper_bound_sr(&[p], &marking).unwrap() - 2.0).abs() < 1e-12);

        let p = src(1.0, 8.0, 1.0, 1.0, 0.5);
        let marking = solve_marking_probs(&[p]).unwrap();
        assert!((upper_bound_sr(&[p], &marking).unwrap() - 8.5).abs() < 1e-8);
    }

    #[test]
    fn preemptive_upper_bound_examples() {
        let p = src(1.0, 0.0, 1.0, 1.0, 1.0);
        let marking = solve_marking_probs_preemptive(&[p]).unwrap();
        assert_eq!(marking.probs, vec![1.0]);
        assert!((upper_bound_sr_preemptive(&[p], &marking).unwrap() - 3.0).abs() < 1e-12);

        let params = vec![src(1.0, 0.0, 1.0, 1.0, 1.0), src(1.0, 0.0, 1.0, 1.0, 1.0)];
        let marking = solve_marking_probs_preemptive(&params).unwrap();
        let ub = upper_bound_sr_preemptive(&params, &marking).unwrap();
        assert!((ub - 6.0).abs() < 1e-5);
    }

    #[test]
    fn preemptive_ub_decomposes_into_nonpreemptive_terms() {
        // At the same marking vector, UB_preempt = UB - mean(rho*gamma) +
        // mean(rho*mu/p); with the preemptive minimizer on the left this
        // becomes an inequality.
        let mut rng = RngStream::new(11, 0, 0, StreamPurpose::Aux);
        for _ in 0..50 {
            let params = random_instance(&mut rng, 2);
            let marking = solve_marking_probs_preemptive(&params).unwrap();
            let lhs = upper_bound_sr_preemptive(&params, &marking).unwrap();
            let ub_np = upper_bound_sr(&params, &solve_marking_probs(&params).unwrap()).unwrap();
            let n = params.len() as f64;
            let extra: f64 = params
                .iter()
                .zip(&marking.probs)
                .map(|(p, &pl)| p.rho * p.mu / pl - p.rho * p.gamma)
                .sum::<f64>()
                / n;
            let tol = 1e-9 * lhs.abs().max(1.0);
            assert!(
                lhs >= ub_np + extra - tol,
                "lhs={lhs} ub_np={ub_np} extra={extra} params={params:?}"
            );
        }
    }

    #[test]
    fn cr_bound_examples() {
        // Exponential inter-generation: dispersion 1.
        let exp = src(1.0, 1.0, 2.0, 4.0, 1.0);
        assert_eq!(cr_bound(&[exp], false), 4.0);
        // Rayleigh: dispersion 4/pi - 1 < 1.
        let nu: f64 = 1.3;
        let ray = src(
            1.0,
            1.0,
            nu * (std::f64::consts::PI / 2.0).sqrt(),
            nu * nu * (4.0 - std::f64::consts::PI) / 2.0,
            1.0,
        );
        assert_eq!(cr_bound(&[ray], false), 4.0);
        // Dispersion 3.
        let heavy = src(1.0, 1.0, 1.0, 3.0, 1.0);
        assert_eq!(cr_bound(&[heavy], false), 6.0);
        assert_eq!(cr_bound(&[heavy], true), 8.0);
        assert_eq!(cr_bound(&[exp], true), 6.0);
    }

    #[test]
    fn grid_oracle_trivial_cases() {
        let p = brute_force_probs(&[src(1.0, 0.0, 1.0, 1.0, 0.0)], 1e-4).unwrap();
        assert!((p.probs[0] - 1.0).abs() < 1e-12);

        // Returned point is feasible even when the constraint is tight.
        let params = vec![src(1.0, 0.0, 1.0, 1.0, 1.0), src(1.0, 0.0, 1.0, 1.0, 1.0)];
        let p = brute_force_probs(&params, 1e-3).unwrap();
        let used: f64 = params.iter().zip(&p.probs).map(|(s, &x)| x * s.gamma / s.mu).sum();
        assert!(used <= 1.0 + 1e-9);
        assert!((p.probs[0] - 0.5).abs() <= 2e-3 && (p.probs[1] - 0.5).abs() <= 2e-3);
    }

    #[test]
    fn solver_matches_grid_oracle() {
        let mut rng = RngStream::new(2024, 0, 0, StreamPurpose::Aux);
        for trial in 0..30 {
            let n = 1 + (trial % 3);
            let params = random_instance(&mut rng, n);
            let solved = solve_marking_probs(&params).unwrap();
            let oracle = brute_force_probs(&params, 1e-4).unwrap();
            let a = marking_objective_value(&params, &solved.probs);
            let b = marking_objective_value(&params, &oracle.probs);
            assert!(
                (a - b).abs() <= 1e-3 * b.abs(),
                "n={n} solver={a} oracle={b} params={params:?}"
            );
            // The solver should never lose to the oracle by more than float noise.
            assert!(a <= b + 1e-9 * b.abs());
        }
    }

    #[test]
    fn preemptive_solver_matches_grid_oracle() {
        let mut rng = RngStream::new(77, 0, 0, StreamPurpose::Aux);
        for trial in 0..15 {
            let n = 1 + (trial % 3);
            let params = random_instance(&mut rng, n);
            let solved = solve_marking_probs_preemptive(&params).unwrap();
            let oracle = brute_force_probs_preemptive(&params, 1e-4).unwrap();
            let a = marking_objective_value_preemptive(&params, &solved.probs);
            let b = marking_objective_value_preemptive(&params, &oracle.probs);
            assert!((a - b).abs() <= 1e-3 * b.abs());
        }
    }

    #[test]
    fn dual_slack_monotone() {
        let mut rng = RngStream::new(5, 0, 0, StreamPurpose::Aux);
        let params = random_instance(&mut rng, 3);
        let mut prev = constraint_slack(&params, 2.0, 0.0);
        for k in 1..200 {
            let s = constraint_slack(&params, 2.0, 0.25 * k as f64);
            assert!(s >= prev - 1e-12);
            prev = s;
        }
    }

    #[test]
    fn solution_satisfies_constraints() {
        let mut rng = RngStream::new(6, 0, 0, StreamPurpose::Aux);
        for trial in 0..100 {
            let params = random_instance(&mut rng, 1 + trial % 3);
            let sol = solve_marking_probs(&params).unwrap();
            let used: f64 = params.iter().zip(&sol.probs).map(|(s, &x)| x * s.gamma / s.mu).sum();
            assert!(used <= 1.0 + 1e-9, "constraint violated: {used}");
            for &p in &sol.probs {
                assert!(p > 0.0 && p <= 1.0);
            }
            assert!(sol.multiplier >= 0.0);
        }
    }

    #[test]
    fn bound_ordering_and_cr_chain() {
        let mut rng = RngStream::new(7, 0, 0, StreamPurpose::Aux);
        for trial in 0..200 {
            let params = random_instance(&mut rng, 1 + trial % 3);
            let report = compute_bounds(&params, false).unwrap();
            assert!(report.lb_offline <= report.ub_policy + 1e-9);
            assert!(report.cr_bound >= 1.0);
            assert!(
                report.ub_policy / report.lb_offline <= report.cr_bound + 1e-9,
                "chain violated: {report:?}"
            );
            let preempt = compute_bounds(&params, true).unwrap();
            assert!(
                preempt.ub_policy / preempt.lb_offline <= preempt.cr_bound + 1e-9,
                "preemptive chain violated: {preempt:?}"
            );
        }
    }

    #[test]
    fn scale_covariance() {
        let mut rng = RngStream::new(8, 0, 0, StreamPurpose::Aux);
        for trial in 0..50 {
            let params = random_instance(&mut rng, 1 + trial % 3);
            let k = 0.1 + 10.0 * rng.uniform();
            let scaled: Vec<_> = params
                .iter()
                .map(|p| SourceParams { rho: k * p.rho, cost: k * p.cost, ..*p })
                .collect();
            let base = compute_bounds(&params, false).unwrap();
            let big = compute_bounds(&scaled, false).unwrap();
            for (a, b) in base.marking.probs.iter().zip(&big.marking.probs) {
                assert!((a - b).abs() < 1e-7, "probs moved under scaling");
            }
            assert!((big.lb_offline - k * base.lb_offline).abs() < 1e-7 * big.lb_offline.max(1.0));
            assert!((big.ub_policy - k * base.ub_policy).abs() < 1e-7 * big.ub_policy.max(1.0));
        }
    }

    #[test]
    fn f32_instantiation_agrees_roughly() {
        let p64 = [src(1.0, 8.0, 1.0, 1.0, 0.5)];
        let p32 = [SourceParams::<f32> { rho: 1.0, cost: 8.0, mu: 1.0, sigma2: 1.0, gamma: 0.5 }];
        let a = solve_marking_probs(&p64).unwrap().probs[0];
        let b = solve_marking_probs(&p32).unwrap().probs[0];
        assert!((a as f32 - b).abs() < 1e-5);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(matches!(solve_marking_probs::<f64>(&[]), Err(OptimError::NoSources)));
        let bad = src(1.0, 1.0, 0.0, 1.0, 1.0);
        assert!(matches!(
            solve_marking_probs(&[bad]),
            Err(OptimError::InvalidSource { index: 0, .. })
        ));
    }

    #[test]
    fn zero_marking_probability_rejected_by_bounds() {
        let params = [src(1.0, 1.0, 1.0, 1.0, 0.5)];
        let marking = ProbVector { probs: vec![0.0], multiplier: 0.0 };
        assert_eq!(upper_bound_sr(&params, &marking), Err(OptimError::ZeroProbability(0)));
        assert_eq!(
            upper_bound_sr_preemptive(&params, &marking),
            Err(OptimError::ZeroProbability(0))
        );
    }
}
