//! Scheduling policies for the continuous-time engine, behind one decision
//! contract.
//!
//! A policy sees the system only through [`EngineView`] snapshots and is
//! consulted at packet-generation instants (mark or discard) and whenever
//! the channel is free (transmit, idle, or do nothing). Preemption-capable
//! policies additionally expose a per-attempt time limit and a disposition
//! for timed-out attempts.

use crate::distributions::DistSpec;
use crate::optimizer::SourceParams;
use crate::rng::{RngStream, StreamPurpose};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolicyError {
    #[error("threshold search did not converge: objective spread {spread} after {iters} iterations")]
    SearchNonConvergence { spread: f64, iters: usize },
}

/// What the policy wants done at a free-channel instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyDecision {
    /// Transmit the latest fresh marked packet of `source`. The engine
    /// rejects this if the source holds none.
    Transmit { source: usize },
    /// Generate a fresh packet at the current instant and transmit it
    /// (generate-at-will sources).
    GenerateAndTransmit { source: usize },
    /// Keep the channel idle for `duration`; no decisions are taken until
    /// the idle expires. A zero duration leaves the channel free instead.
    Idle { duration: f64 },
    /// Leave the channel free; the policy is consulted again at the next
    /// event.
    DoNothing,
}

/// Disposition of a transmission attempt the policy cut short.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PreemptAction {
    /// Put the packet back; the next attempt draws a fresh transmission
    /// time (and pays the per-transmission cost again).
    RetryFreshDraw,
    /// Drop the packet entirely.
    DiscardPacket,
    /// Put the packet back with its remaining transmission time; resuming
    /// costs nothing.
    Shelve,
}

/// Per-source snapshot handed to policies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceView {
    /// Current age `t - lambda(t)`.
    pub age: f64,
    /// Generation time of the latest fresh marked packet, if one is held.
    pub fresh_marked_gen: Option<f64>,
    /// Whether that packet has been (partially) transmitted before.
    pub fresh_marked_attempted: bool,
    /// Time the source last started a transmission.
    pub last_selected: Option<f64>,
    /// Generation time of the newest received packet.
    pub last_received_gen: f64,
}

/// System snapshot at a decision instant.
#[derive(Debug)]
pub struct EngineView<'a> {
    pub now: f64,
    pub channel_free: bool,
    pub sources: &'a [SourceView],
}

/// Deterministic streams reserved for policy randomness, split by purpose so
/// marking, selection and idle draws never interfere.
#[derive(Debug, Clone)]
pub struct PolicyRng {
    pub mark: Vec<RngStream>,
    pub select: RngStream,
    pub idle: RngStream,
}

impl PolicyRng {
    pub fn new(seed: u64, replication: u64, sources: usize) -> Self {
        PolicyRng {
            mark: (0..sources)
                .map(|s| RngStream::new(seed, replication, s as u64, StreamPurpose::Mark))
                .collect(),
            select: RngStream::new(seed, replication, 0, StreamPurpose::Select),
            idle: RngStream::new(seed, replication, 0, StreamPurpose::Idle),
        }
    }
}

pub trait Policy: Send {
    /// Mark (`true`) or discard a packet generated at `view.now`.
    fn on_packet_generated(&mut self, source: usize, view: &EngineView, rng: &mut PolicyRng)
        -> bool;

    /// Decide at a free-channel instant.
    fn on_channel_free(&mut self, view: &EngineView, rng: &mut PolicyRng) -> PolicyDecision;

    /// Cap on the length of a single transmission attempt of `source`.
    /// Only honored by the preemptive engine.
    fn attempt_limit(&self, _source: usize) -> Option<f64> {
        None
    }

    /// Disposition of an attempt that hit its limit.
    fn on_attempt_timeout(&mut self, _source: usize, _view: &EngineView) -> PreemptAction {
        PreemptAction::RetryFreshDraw
    }

    /// Optional preemption when a packet is generated while the channel is
    /// busy (preemptive engine only).
    fn on_generation_while_busy(
        &mut self,
        _generated: usize,
        _busy_source: usize,
        _view: &EngineView,
    ) -> Option<PreemptAction> {
        None
    }

    /// Per-source instants at which this policy selected a source, when the
    /// policy records them (the stationary randomized family does).
    fn selection_instants(&self) -> Option<&Vec<Vec<f64>>> {
        None
    }
}

/// Scenario-facing policy selector with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyConfig {
    /// Stationary randomized policy; marking probabilities default to the
    /// solution of the non-preemptive convex program.
    Sr {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        marking_probs: Option<Vec<f64>>,
    },
    /// Work-conserving variant: never idles, redraws among remaining
    /// sources when the chosen one has nothing to send.
    SrWorkConserving {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        marking_probs: Option<Vec<f64>>,
    },
    /// Stationary randomized logic with marking probabilities from the
    /// preemptive-setting program; the policy itself never preempts.
    SrPreemptiveMarking {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        marking_probs: Option<Vec<f64>>,
    },
    /// Multi-source threshold policy (threshold marking + longest-unserved
    /// selection); thresholds default to
    /// `max(sqrt(sigma^2 + 2c/rho) - mu, N * mean(gamma))`.
    Threshold {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        thresholds: Option<Vec<f64>>,
    },
    /// Transmit a freshly generated packet immediately when the elapsed
    /// time since the last transmitted generation reaches `alpha`.
    AgeThreshold { alpha: f64 },
    /// Single-source generate-at-will threshold policy with the mean
    /// transmission time as its threshold.
    GenerateAtWill,
    /// Single-source generate-at-will policy with a numerically optimized
    /// threshold (golden-section over a Monte-Carlo cost estimate).
    GenerateAtWillOptimized {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
    },
    /// Preempt any attempt longer than `epsilon` and retry with a fresh
    /// transmission-time draw.
    PreemptRetry { epsilon: f64 },
    /// Give each packet a single attempt of at most `epsilon`, then discard
    /// it.
    PreemptDiscard { epsilon: f64 },
    /// Slotted stationary randomized policy (marks everything, retries the
    /// same source after a failed slot).
    SrDiscrete,
    /// Slotted per-slot randomized policy; `q` defaults to weights
    /// proportional to `sqrt(rho_l * gamma_l)`.
    RandomizedDiscrete {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q: Option<Vec<f64>>,
    },
    /// Slotted max-weight policy (largest expected weighted age reduction);
    /// the per-source index weights default to `rho_l / gamma_l` and can be
    /// overridden.
    MaxWeightDiscrete {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
}

impl PolicyConfig {
    pub fn is_slotted(&self) -> bool {
        matches!(
            self,
            PolicyConfig::SrDiscrete
                | PolicyConfig::RandomizedDiscrete { .. }
                | PolicyConfig::MaxWeightDiscrete { .. }
        )
    }

    pub fn needs_preemptive_engine(&self) -> bool {
        matches!(self, PolicyConfig::PreemptRetry { .. } | PolicyConfig::PreemptDiscard { .. })
    }

    pub fn is_generate_at_will(&self) -> bool {
        matches!(
            self,
            PolicyConfig::GenerateAtWill | PolicyConfig::GenerateAtWillOptimized { .. }
        )
    }
}

// ---------------------------------------------------------------------------
// Stationary randomized family
// ---------------------------------------------------------------------------

/// The stationary randomized policy: Bernoulli marking per source plus
/// randomized source selection at free-channel instants; idles for a
/// service-time draw of the selected source when it holds nothing, unless
/// built work-conserving.
pub struct StationaryRandomized {
    marking: Vec<f64>,
    selection: Vec<f64>,
    service: Vec<DistSpec>,
    work_conserving: bool,
    selections: Vec<Vec<f64>>,
}

impl StationaryRandomized {
    pub fn new(
        marking: Vec<f64>,
        selection: Vec<f64>,
        service: Vec<DistSpec>,
        work_conserving: bool,
    ) -> Self {
        assert_eq!(marking.len(), selection.len());
        assert_eq!(marking.len(), service.len());
        let n = marking.len();
        StationaryRandomized {
            marking,
            selection,
            service,
            work_conserving,
            selections: vec![Vec::new(); n],
        }
    }

    pub fn marking_probs(&self) -> &[f64] {
        &self.marking
    }

    fn draw_among(&self, mask: &[bool], u: f64) -> Option<usize> {
        let total: f64 = self
            .selection
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(&w, _)| w)
            .sum();
        if total <= 0.0 {
            return None;
        }
        let mut target = u * total;
        for (i, (&w, &m)) in self.selection.iter().zip(mask).enumerate() {
            if !m {
                continue;
            }
            if target < w {
                return Some(i);
            }
            target -= w;
        }
        // Guard against accumulated round-off at u ~ 1.
        mask.iter().rposition(|&m| m)
    }
}

impl Policy for StationaryRandomized {
    fn on_packet_generated(&mut self, source: usize, _view: &EngineView, rng: &mut PolicyRng) -> bool {
        rng.mark[source].bernoulli(self.marking[source])
    }

    fn on_channel_free(&mut self, view: &EngineView, rng: &mut PolicyRng) -> PolicyDecision {
        if !self.work_conserving {
            let mask = vec![true; self.selection.len()];
            let source = self.draw_among(&mask, rng.select.uniform()).expect("nonempty");
            self.selections[source].push(view.now);
            return if view.sources[source].fresh_marked_gen.is_some() {
                PolicyDecision::Transmit { source }
            } else {
                PolicyDecision::Idle { duration: self.service[source].sample(&mut rng.idle) }
            };
        }
        // Work-conserving: redraw among the sources not yet rejected at this
        // instant; zero waiting by construction.
        let mut mask = vec![true; self.selection.len()];
        while let Some(source) = self.draw_among(&mask, rng.select.uniform()) {
            if view.sources[source].fresh_marked_gen.is_some() {
                return PolicyDecision::Transmit { source };
            }
            mask[source] = false;
        }
        PolicyDecision::DoNothing
    }

    fn selection_instants(&self) -> Option<&Vec<Vec<f64>>> {
        Some(&self.selections)
    }
}

// ---------------------------------------------------------------------------
// Multi-source threshold policy
// ---------------------------------------------------------------------------

/// Default per-source marking thresholds
/// `max(sqrt(sigma_l^2 + 2 c_l / rho_l) - mu_l, N * mean(gamma))`.
pub fn threshold_defaults(params: &[SourceParams<f64>]) -> Vec<f64> {
    let n = params.len() as f64;
    let mean_gamma = params.iter().map(|p| p.gamma).sum::<f64>() / n;
    params
        .iter()
        .map(|p| ((p.sigma2 + 2.0 * p.cost / p.rho).sqrt() - p.mu).max(n * mean_gamma))
        .collect()
}

/// Threshold marking (mark when the gap since the previously marked
/// generation reaches the threshold) plus longest-unserved selection among
/// holders, ties to the lowest index.
pub struct MultiSourceThreshold {
    thresholds: Vec<f64>,
    last_marked_gen: Vec<f64>,
}

impl MultiSourceThreshold {
    pub fn new(thresholds: Vec<f64>) -> Self {
        let n = thresholds.len();
        MultiSourceThreshold { thresholds, last_marked_gen: vec![0.0; n] }
    }
}

impl Policy for MultiSourceThreshold {
    fn on_packet_generated(&mut self, source: usize, view: &EngineView, _rng: &mut PolicyRng) -> bool {
        if view.now - self.last_marked_gen[source] >= self.thresholds[source] {
            self.last_marked_gen[source] = view.now;
            true
        } else {
            false
        }
    }

    fn on_channel_free(&mut self, view: &EngineView, _rng: &mut PolicyRng) -> PolicyDecision {
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in view.sources.iter().enumerate() {
            if s.fresh_marked_gen.is_none() {
                continue;
            }
            let last = s.last_selected.unwrap_or(f64::NEG_INFINITY);
            if best.is_none_or(|(_, b)| last < b) {
                best = Some((i, last));
            }
        }
        match best {
            Some((source, _)) => PolicyDecision::Transmit { source },
            None => PolicyDecision::DoNothing,
        }
    }
}

// ---------------------------------------------------------------------------
// Immediate age-threshold policy
// ---------------------------------------------------------------------------

/// Transmits a just-generated packet immediately when the source age has
/// reached `alpha` and the channel is free; every other packet is
/// discarded. Packets arriving at a busy channel are discarded regardless
/// of age.
pub struct AgeThreshold {
    alpha: f64,
}

impl AgeThreshold {
    pub fn new(alpha: f64) -> Self {
        AgeThreshold { alpha }
    }
}

impl Policy for AgeThreshold {
    fn on_packet_generated(&mut self, source: usize, view: &EngineView, _rng: &mut PolicyRng) -> bool {
        view.channel_free && view.sources[source].age >= self.alpha
    }

    fn on_channel_free(&mut self, view: &EngineView, _rng: &mut PolicyRng) -> PolicyDecision {
        for (source, s) in view.sources.iter().enumerate() {
            if s.fresh_marked_gen.is_some() {
                return PolicyDecision::Transmit { source };
            }
        }
        PolicyDecision::DoNothing
    }
}

// ---------------------------------------------------------------------------
// Generate-at-will threshold policies (single source)
// ---------------------------------------------------------------------------

/// Single-source generate-at-will policy: when the channel is free and the
/// elapsed time since the last transmitted packet's generation reaches the
/// threshold, generate a fresh packet and transmit it; otherwise idle until
/// the threshold instant.
pub struct GenerateAtWillThreshold {
    threshold: f64,
    last_transmitted_gen: f64,
    /// Set when an idle until the threshold instant is in flight; the wake-up
    /// fires unconditionally so that rounding in `now` cannot re-arm a
    /// vanishing idle.
    armed: bool,
}

impl GenerateAtWillThreshold {
    pub fn new(threshold: f64) -> Self {
        GenerateAtWillThreshold { threshold, last_transmitted_gen: 0.0, armed: false }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

impl Policy for GenerateAtWillThreshold {
    fn on_packet_generated(&mut self, _source: usize, _view: &EngineView, _rng: &mut PolicyRng) -> bool {
        // Generate-at-will sources have no autonomous generation process.
        false
    }

    fn on_channel_free(&mut self, view: &EngineView, _rng: &mut PolicyRng) -> PolicyDecision {
        let elapsed = view.now - self.last_transmitted_gen;
        if self.armed || elapsed >= self.threshold {
            self.armed = false;
            self.last_transmitted_gen = view.now;
            PolicyDecision::GenerateAndTransmit { source: 0 }
        } else {
            // No other decision instant can occur while the channel idles,
            // so the next call is the wake-up at the threshold instant.
            self.armed = true;
            PolicyDecision::Idle { duration: self.threshold - elapsed }
        }
    }
}

/// Monte-Carlo estimate of the long-run age under a generate-at-will
/// threshold policy with threshold `beta`.
///
/// With transmission times `d` and threshold `beta`, consecutive
/// transmitted generations are `max(d, beta)` apart and each received
/// packet's system time is its own `d`, so renewal-reward gives
/// `E[M^2]/(2 E[M]) + E[d]` with `M = max(d, beta)`. The same `d` draws are
/// reused for every candidate threshold (common random numbers).
pub fn generate_at_will_age_estimate(draws: &[f64], beta: f64) -> f64 {
    let mut sum_m = 0.0;
    let mut sum_m2 = 0.0;
    let mut sum_d = 0.0;
    for &d in draws {
        let m = d.max(beta);
        sum_m += m;
        sum_m2 += m * m;
        sum_d += d;
    }
    let n = draws.len() as f64;
    sum_m2 / (2.0 * sum_m) + sum_d / n
}

/// Default Monte-Carlo cycle count for the threshold search. The objective
/// is nearly flat around its minimizer, so a few hundred cycles let the
/// argmin wander by ~10%; this count pins it to ~1%.
pub const THRESHOLD_SEARCH_CYCLES: usize = 20_000;

/// Golden-section search for the age-minimizing generate-at-will threshold
/// over `[0, 5 * gamma]`, using `cycles` Monte-Carlo cycles per candidate
/// with common random numbers across candidates.
pub fn optimize_generate_at_will_threshold(
    service: &DistSpec,
    cycles: usize,
    seed: u64,
) -> Result<f64, PolicyError> {
    let mut rng = RngStream::new(seed, 0, 0, StreamPurpose::Aux);
    let draws: Vec<f64> = (0..cycles).map(|_| service.sample(&mut rng)).collect();
    let objective = |beta: f64| generate_at_will_age_estimate(&draws, beta);

    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, 5.0 * service.mean());
    if b == 0.0 {
        return Ok(0.0);
    }
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = objective(c);
    let mut fd = objective(d);
    const MAX_ITERS: usize = 60;
    for _ in 0..MAX_ITERS {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = objective(d);
        }
    }
    let spread = (fc - fd).abs();
    let scale = fc.abs().max(fd.abs()).max(1.0);
    if spread > 1e-6 * scale {
        return Err(PolicyError::SearchNonConvergence { spread, iters: MAX_ITERS });
    }
    Ok(0.5 * (a + b))
}

// ---------------------------------------------------------------------------
// Preemptive test policies
// ---------------------------------------------------------------------------

/// Work-conserving policy capping each transmission attempt at `epsilon`.
/// On timeout the packet is either retried with a fresh transmission-time
/// draw or discarded for good.
pub struct BoundedAttempt {
    epsilon: f64,
    discard_on_timeout: bool,
}

impl BoundedAttempt {
    pub fn retrying(epsilon: f64) -> Self {
        BoundedAttempt { epsilon, discard_on_timeout: false }
    }

    pub fn discarding(epsilon: f64) -> Self {
        BoundedAttempt { epsilon, discard_on_timeout: true }
    }
}

impl Policy for BoundedAttempt {
    fn on_packet_generated(&mut self, _source: usize, _view: &EngineView, _rng: &mut PolicyRng) -> bool {
        true
    }

    fn on_channel_free(&mut self, view: &EngineView, _rng: &mut PolicyRng) -> PolicyDecision {
        for (source, s) in view.sources.iter().enumerate() {
            if s.fresh_marked_gen.is_none() {
                continue;
            }
            // The discarding variant only ever attempts never-transmitted
            // packets.
            if self.discard_on_timeout && s.fresh_marked_attempted {
                continue;
            }
            return PolicyDecision::Transmit { source };
        }
        PolicyDecision::DoNothing
    }

    fn attempt_limit(&self, _source: usize) -> Option<f64> {
        Some(self.epsilon)
    }

    fn on_attempt_timeout(&mut self, _source: usize, _view: &EngineView) -> PreemptAction {
        if self.discard_on_timeout {
            PreemptAction::DiscardPacket
        } else {
            PreemptAction::RetryFreshDraw
        }
    }
}
