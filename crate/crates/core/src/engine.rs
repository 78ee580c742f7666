//! Continuous-time discrete-event simulation of the multi-source
//! single-channel system.
//!
//! Age curves are integrated exactly as piecewise-linear area: the age of a
//! source rises at slope one and drops only at reception instants, so the
//! integral accumulates in closed form between receptions and is closed at
//! the horizon. The preemptive mode adds per-attempt time limits,
//! arrival-triggered preemption, shelve/resume, and consolidated channel
//! times per completed packet.
//!
//! Simultaneous events are ordered service-completion first, then attempt
//! timeouts, idle expiries, and generations (by source index); a packet
//! generated exactly at a completion instant is therefore visible to the
//! scheduling decision that follows it. Events strictly after the horizon
//! are discarded and every integral is closed at the horizon.

use crate::distributions::DistSpec;
use crate::metrics::{self, PeriodLog, PeriodSample};
use crate::parallel::parallel_indexed;
use crate::policies::{EngineView, Policy, PolicyDecision, PolicyRng, PreemptAction, SourceView};
use crate::rng::{RngStream, StreamPurpose};
use crate::scenario::Scenario;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("policy requested transmission from source {index} holding no fresh marked packet at t={time}")]
    TransmitWithoutFreshPacket { index: usize, time: f64 },
    #[error("policy returned a negative idle duration at t={time}")]
    NegativeIdle { time: f64 },
    #[error("policy sets attempt limits but the run is non-preemptive")]
    PreemptionNotEnabled,
}

/// Aggregates for one source at the end of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceResult {
    /// Time-average age over the horizon.
    pub aoi: f64,
    /// Cost rate `c * (fresh transmission starts) / horizon`.
    pub avg_tx_cost: f64,
    pub period_mean: Option<f64>,
    pub period_var: Option<f64>,
    pub empirical_beta: Option<f64>,
    /// Completed receptions.
    pub completed: u64,
    /// Fresh transmission starts (completions plus preempted attempts plus
    /// any transmission still in flight at the horizon).
    pub fresh_tx_started: u64,
    /// Age at the horizon: the length of the open final period.
    pub final_age: f64,
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub per_source: Vec<SourceResult>,
    /// `(1/N) sum_l (avg_tx_cost_l + rho_l * aoi_l)`.
    pub gamma_cost: f64,
    /// Fraction of the horizon the channel was busy.
    pub utilization: f64,
    pub horizon: f64,
    pub seed: u64,
    pub replication: u64,
    pub periods: PeriodLog,
    /// Consolidated channel time per completed packet: total channel
    /// occupancy by the source between consecutive completions.
    pub consolidated: Vec<Vec<f64>>,
    /// Gaps between consecutive marked generations, per source.
    pub marked_gaps: Vec<Vec<f64>>,
    /// Instants at which the policy selected each source, for policies that
    /// record them.
    pub selections: Vec<Vec<f64>>,
}

impl SimResult {
    /// The weighted sum cost is stored exactly as this recomputation.
    pub fn recompute_gamma(&self, rhos: &[f64]) -> f64 {
        let n = self.per_source.len() as f64;
        self.per_source
            .iter()
            .zip(rhos)
            .map(|(s, &rho)| s.avg_tx_cost + rho * s.aoi)
            .sum::<f64>()
            / n
    }
}

/// One `--trace` row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub time: f64,
    pub event: &'static str,
    pub source: Option<usize>,
    pub age_before: f64,
    pub age_after: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum EventKind {
    ServiceComplete { epoch: u64 },
    AttemptTimeout { epoch: u64 },
    IdleExpired { epoch: u64 },
    Generation { source: usize },
}

impl EventKind {
    fn rank(&self) -> u8 {
        match self {
            EventKind::ServiceComplete { .. } => 0,
            EventKind::AttemptTimeout { .. } => 1,
            EventKind::IdleExpired { .. } => 2,
            EventKind::Generation { .. } => 3,
        }
    }

    fn source_index(&self) -> usize {
        match self {
            EventKind::Generation { source } => *source,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    kind: EventKind,
    seq: u64,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed so the max-heap pops the earliest event first.
        let lhs = (other.time, other.kind.rank(), other.kind.source_index(), other.seq);
        let rhs = (self.time, self.kind.rank(), self.kind.source_index(), self.seq);
        lhs.partial_cmp(&rhs).expect("event times are finite")
    }
}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The single fresh marked packet a source holds. Older marked packets are
/// dominated by the newest one and dropped when a newer packet arrives.
#[derive(Debug, Clone, Copy)]
struct Buffered {
    gen_time: f64,
    /// Transmission time already spent on this packet.
    transmitted: f64,
    /// Remaining service when shelved mid-attempt; `None` draws fresh on
    /// the next attempt.
    remaining: Option<f64>,
    attempted: bool,
}

impl Buffered {
    fn new(gen_time: f64) -> Self {
        Buffered { gen_time, transmitted: 0.0, remaining: None, attempted: false }
    }
}

#[derive(Debug, Clone, Copy)]
enum Channel {
    Free,
    Busy {
        source: usize,
        gen_time: f64,
        attempt_started: f64,
        /// Service this attempt needs to finish the packet.
        attempt_needs: f64,
        /// Transmission time the packet had accumulated before this attempt.
        prior_transmitted: f64,
        epoch: u64,
    },
    Idling {
        epoch: u64,
    },
}

struct SourceRuntime {
    rho: f64,
    cost: f64,
    gen: Option<DistSpec>,
    service: DistSpec,
    gen_stream: RngStream,
    service_stream: RngStream,
    /// Generation time of the newest received packet.
    lambda: f64,
    /// Running age integral and the time it is integrated up to.
    area: f64,
    checkpoint: f64,
    buffer: Option<Buffered>,
    completed: u64,
    fresh_tx_started: u64,
    /// Channel occupancy since this source's previous completion.
    occupancy_accum: f64,
    consolidated: Vec<f64>,
    marked_gaps: Vec<f64>,
    last_marked_gen: f64,
    last_selected: Option<f64>,
}

impl SourceRuntime {
    fn age(&self, now: f64) -> f64 {
        now - self.lambda
    }

    /// Advance the age integral to `now`; lambda is unchanged since the
    /// last checkpoint, so the area is a trapezoid in closed form.
    fn integrate_to(&mut self, now: f64) {
        let a = self.checkpoint - self.lambda;
        let b = now - self.lambda;
        self.area += 0.5 * (b * b - a * a);
        self.checkpoint = now;
    }

    fn view(&self, now: f64) -> SourceView {
        SourceView {
            age: self.age(now),
            fresh_marked_gen: self.buffer.as_ref().map(|b| b.gen_time),
            fresh_marked_attempted: self.buffer.as_ref().is_some_and(|b| b.attempted),
            last_selected: self.last_selected,
            last_received_gen: self.lambda,
        }
    }

    /// Store a marked packet unless it is stale or dominated by a newer one.
    fn offer_packet(&mut self, packet: Buffered) {
        if packet.gen_time <= self.lambda {
            return;
        }
        match &self.buffer {
            Some(held) if held.gen_time >= packet.gen_time => {}
            _ => self.buffer = Some(packet),
        }
    }
}

struct Sim<'t> {
    sources: Vec<SourceRuntime>,
    channel: Channel,
    epoch: u64,
    queue: BinaryHeap<Event>,
    seq: u64,
    horizon: f64,
    preemptive: bool,
    busy_time: f64,
    periods: PeriodLog,
    trace: Option<&'t mut Vec<TraceRow>>,
    view_buf: Vec<SourceView>,
}

impl<'t> Sim<'t> {
    fn push(&mut self, time: f64, kind: EventKind) {
        self.seq += 1;
        self.queue.push(Event { time, kind, seq: self.seq });
    }

    fn next_epoch(&mut self) -> u64 {
        self.epoch += 1;
        self.epoch
    }

    fn channel_free(&self) -> bool {
        matches!(self.channel, Channel::Free)
    }

    fn snapshot(&mut self, now: f64) {
        self.view_buf.clear();
        for s in &self.sources {
            self.view_buf.push(s.view(now));
        }
    }

    fn record(
        &mut self,
        time: f64,
        event: &'static str,
        source: Option<usize>,
        age_before: f64,
        age_after: f64,
    ) {
        if let Some(trace) = self.trace.as_deref_mut() {
            trace.push(TraceRow { time, event, source, age_before, age_after });
        }
    }

    /// Begin an attempt on `packet` at `now`. Fresh attempts draw a service
    /// time and pay the per-transmission cost; resumed attempts use the
    /// shelved remaining time for free.
    fn start_transmission(&mut self, now: f64, source: usize, mut packet: Buffered, policy: &dyn Policy) {
        let s = &mut self.sources[source];
        let attempt_needs = match packet.remaining.take() {
            Some(remaining) => remaining,
            None => {
                s.fresh_tx_started += 1;
                s.service.sample(&mut s.service_stream)
            }
        };
        s.last_selected = Some(now);
        let age = s.age(now);
        let epoch = self.next_epoch();
        self.channel = Channel::Busy {
            source,
            gen_time: packet.gen_time,
            attempt_started: now,
            attempt_needs,
            prior_transmitted: packet.transmitted,
            epoch,
        };
        let limit = if self.preemptive { policy.attempt_limit(source) } else { None };
        match limit {
            Some(limit) if attempt_needs > limit => {
                self.push(now + limit, EventKind::AttemptTimeout { epoch });
            }
            _ => {
                self.push(now + attempt_needs, EventKind::ServiceComplete { epoch });
            }
        }
        self.record(now, "transmit_start", Some(source), age, age);
    }

    /// Tear down the running attempt at `now`, crediting channel occupancy.
    /// Returns the source and the in-flight packet with updated progress.
    fn interrupt_attempt(&mut self, now: f64) -> (usize, Buffered) {
        let Channel::Busy {
            source,
            gen_time,
            attempt_started,
            attempt_needs,
            prior_transmitted,
            ..
        } = self.channel
        else {
            unreachable!("interrupt_attempt on a non-busy channel")
        };
        let chunk = now - attempt_started;
        self.busy_time += chunk;
        self.sources[source].occupancy_accum += chunk;
        self.channel = Channel::Free;
        let packet = Buffered {
            gen_time,
            transmitted: prior_transmitted + chunk,
            remaining: Some(attempt_needs - chunk),
            attempted: true,
        };
        (source, packet)
    }

    fn apply_preempt_action(&mut self, source: usize, packet: Buffered, action: PreemptAction) {
        match action {
            PreemptAction::DiscardPacket => {}
            PreemptAction::RetryFreshDraw => {
                self.sources[source].offer_packet(Buffered { remaining: None, ..packet });
            }
            PreemptAction::Shelve => {
                self.sources[source].offer_packet(packet);
            }
        }
    }

    fn handle_service_complete(&mut self, now: f64, epoch: u64) {
        let Channel::Busy {
            source,
            gen_time,
            attempt_started,
            prior_transmitted,
            epoch: current,
            ..
        } = self.channel
        else {
            return;
        };
        if current != epoch {
            return;
        }
        let chunk = now - attempt_started;
        self.busy_time += chunk;
        self.channel = Channel::Free;

        let s = &mut self.sources[source];
        s.occupancy_accum += chunk;
        let service_total = prior_transmitted + chunk;
        let period = gen_time - s.lambda;
        let system_time = now - gen_time;
        let wait = (system_time - service_total).max(0.0);
        self.periods.per_source[source].push(PeriodSample {
            period,
            system_time,
            service: service_total,
            wait,
        });
        let age_before = s.age(now);
        s.integrate_to(now);
        s.lambda = gen_time;
        s.completed += 1;
        s.consolidated.push(s.occupancy_accum);
        s.occupancy_accum = 0.0;
        if s.buffer.is_some_and(|b| b.gen_time <= s.lambda) {
            s.buffer = None;
        }
        let age_after = s.age(now);
        self.record(now, "reception", Some(source), age_before, age_after);
    }

    fn handle_attempt_timeout(&mut self, now: f64, epoch: u64, policy: &mut dyn Policy) {
        let Channel::Busy { epoch: current, .. } = self.channel else { return };
        if current != epoch {
            return;
        }
        let (source, packet) = self.interrupt_attempt(now);
        let age = self.sources[source].age(now);
        self.snapshot(now);
        let action = policy.on_attempt_timeout(
            source,
            &EngineView { now, channel_free: true, sources: &self.view_buf },
        );
        self.apply_preempt_action(source, packet, action);
        self.record(now, "attempt_timeout", Some(source), age, age);
    }

    fn handle_idle_expired(&mut self, now: f64, epoch: u64) {
        if let Channel::Idling { epoch: current } = self.channel {
            if current == epoch {
                self.channel = Channel::Free;
                self.record(now, "idle_end", None, 0.0, 0.0);
            }
        }
    }

    fn handle_generation(
        &mut self,
        now: f64,
        source: usize,
        policy: &mut dyn Policy,
        prng: &mut PolicyRng,
    ) {
        // Schedule the next generation of this source.
        let next = {
            let s = &mut self.sources[source];
            s.gen.as_ref().map(|g| now + g.sample(&mut s.gen_stream))
        };
        if let Some(t) = next {
            self.push(t, EventKind::Generation { source });
        }

        self.snapshot(now);
        let marked = policy.on_packet_generated(
            source,
            &EngineView { now, channel_free: self.channel_free(), sources: &self.view_buf },
            prng,
        );
        let age = self.sources[source].age(now);
        if marked {
            let s = &mut self.sources[source];
            s.marked_gaps.push(now - s.last_marked_gen);
            s.last_marked_gen = now;
            s.offer_packet(Buffered::new(now));
            self.record(now, "gen_marked", Some(source), age, age);
        } else {
            self.record(now, "gen_discarded", Some(source), age, age);
        }

        if self.preemptive {
            if let Channel::Busy { source: busy_source, .. } = self.channel {
                self.snapshot(now);
                let action = policy.on_generation_while_busy(
                    source,
                    busy_source,
                    &EngineView { now, channel_free: false, sources: &self.view_buf },
                );
                if let Some(action) = action {
                    let (victim, packet) = self.interrupt_attempt(now);
                    self.apply_preempt_action(victim, packet, action);
                    self.record(now, "preempted", Some(victim), 0.0, 0.0);
                }
            }
        }
    }

    /// Consult the policy whenever the channel is free after an event.
    fn decide(&mut self, now: f64, policy: &mut dyn Policy, prng: &mut PolicyRng) -> Result<(), EngineError> {
        if !self.channel_free() {
            return Ok(());
        }
        self.snapshot(now);
        let decision = policy.on_channel_free(
            &EngineView { now, channel_free: true, sources: &self.view_buf },
            prng,
        );
        match decision {
            PolicyDecision::Transmit { source } => {
                let packet = self.sources[source].buffer.take().ok_or(
                    EngineError::TransmitWithoutFreshPacket { index: source, time: now },
                )?;
                self.start_transmission(now, source, packet, policy);
            }
            PolicyDecision::GenerateAndTransmit { source } => {
                self.start_transmission(now, source, Buffered::new(now), policy);
            }
            PolicyDecision::Idle { duration } => {
                if duration < 0.0 {
                    return Err(EngineError::NegativeIdle { time: now });
                }
                // A zero-length idle leaves the channel free; the policy is
                // consulted again at the next event.
                if duration > 0.0 {
                    let epoch = self.next_epoch();
                    self.channel = Channel::Idling { epoch };
                    self.push(now + duration, EventKind::IdleExpired { epoch });
                    self.record(now, "idle_start", None, 0.0, 0.0);
                }
            }
            PolicyDecision::DoNothing => {}
        }
        Ok(())
    }
}

fn simulate(
    scenario: &Scenario,
    policy: &mut dyn Policy,
    replication: u64,
    preemptive: bool,
    trace: Option<&mut Vec<TraceRow>>,
) -> Result<SimResult, EngineError> {
    let n = scenario.sources.len();
    if !preemptive && (0..n).any(|s| policy.attempt_limit(s).is_some()) {
        return Err(EngineError::PreemptionNotEnabled);
    }
    let seed = scenario.seed;
    let mut prng = PolicyRng::new(seed, replication, n);
    let sources = scenario
        .sources
        .iter()
        .enumerate()
        .map(|(i, cfg)| SourceRuntime {
            rho: cfg.rho,
            cost: cfg.cost,
            gen: cfg.gen.clone(),
            service: cfg.service.clone(),
            gen_stream: RngStream::new(seed, replication, i as u64, StreamPurpose::Generation),
            service_stream: RngStream::new(seed, replication, i as u64, StreamPurpose::Service),
            lambda: 0.0,
            area: 0.0,
            checkpoint: 0.0,
            buffer: None,
            completed: 0,
            fresh_tx_started: 0,
            occupancy_accum: 0.0,
            consolidated: Vec::new(),
            marked_gaps: Vec::new(),
            last_marked_gen: 0.0,
            last_selected: None,
        })
        .collect();
    let mut sim = Sim {
        sources,
        channel: Channel::Free,
        epoch: 0,
        queue: BinaryHeap::new(),
        seq: 0,
        horizon: scenario.horizon,
        preemptive,
        busy_time: 0.0,
        periods: PeriodLog::new(n),
        trace,
        view_buf: Vec::with_capacity(n),
    };

    for i in 0..n {
        let first = {
            let s = &mut sim.sources[i];
            s.gen.as_ref().map(|g| g.sample(&mut s.gen_stream))
        };
        if let Some(t) = first {
            sim.push(t, EventKind::Generation { source: i });
        }
    }

    // The channel starts free: give the policy its first decision at t = 0.
    sim.decide(0.0, policy, &mut prng)?;

    while let Some(event) = sim.queue.pop() {
        if event.time > sim.horizon {
            break;
        }
        match event.kind {
            EventKind::ServiceComplete { epoch } => sim.handle_service_complete(event.time, epoch),
            EventKind::AttemptTimeout { epoch } => {
                sim.handle_attempt_timeout(event.time, epoch, policy)
            }
            EventKind::IdleExpired { epoch } => sim.handle_idle_expired(event.time, epoch),
            EventKind::Generation { source } => {
                sim.handle_generation(event.time, source, policy, &mut prng)
            }
        }
        sim.decide(event.time, policy, &mut prng)?;
    }

    // Close every integral at the horizon; an in-flight transmission
    // contributes its elapsed part to the busy time but never completes.
    let horizon = sim.horizon;
    for s in &mut sim.sources {
        s.integrate_to(horizon);
    }
    if let Channel::Busy { attempt_started, .. } = sim.channel {
        sim.busy_time += horizon - attempt_started;
    }
    let utilization = sim.busy_time / horizon;
    debug_assert!(utilization <= 1.0 + 1e-9, "channel over-utilized: {utilization}");

    let mut per_source = Vec::with_capacity(n);
    let mut consolidated = Vec::with_capacity(n);
    let mut marked_gaps = Vec::with_capacity(n);
    for (i, s) in sim.sources.iter_mut().enumerate() {
        let stats = metrics::period_stats(&sim.periods.per_source[i]);
        per_source.push(SourceResult {
            aoi: s.area / horizon,
            avg_tx_cost: s.cost * s.fresh_tx_started as f64 / horizon,
            period_mean: stats.map(|st| st.mean),
            period_var: stats.map(|st| st.variance),
            empirical_beta: stats.map(|st| st.beta_hat),
            completed: s.completed,
            fresh_tx_started: s.fresh_tx_started,
            final_age: horizon - s.lambda,
        });
        consolidated.push(std::mem::take(&mut s.consolidated));
        marked_gaps.push(std::mem::take(&mut s.marked_gaps));
    }
    let gamma_cost = sim
        .sources
        .iter()
        .zip(&per_source)
        .map(|(s, r)| r.avg_tx_cost + s.rho * r.aoi)
        .sum::<f64>()
        / n as f64;
    let selections = match policy.selection_instants() {
        Some(sel) => sel.clone(),
        None => vec![Vec::new(); n],
    };

    Ok(SimResult {
        per_source,
        gamma_cost,
        utilization,
        horizon,
        seed,
        replication,
        periods: sim.periods,
        consolidated,
        marked_gaps,
        selections,
    })
}

/// Non-preemptive run: attempt limits and busy-generation hooks are never
/// consulted, and a policy that sets limits is rejected.
pub fn run(
    scenario: &Scenario,
    policy: &mut dyn Policy,
    replication: u64,
) -> Result<SimResult, EngineError> {
    simulate(scenario, policy, replication, false, None)
}

/// Preemption-enabled run. A policy that never preempts produces a result
/// identical to [`run`] for the same seed.
pub fn run_preemptive(
    scenario: &Scenario,
    policy: &mut dyn Policy,
    replication: u64,
) -> Result<SimResult, EngineError> {
    simulate(scenario, policy, replication, true, None)
}

/// Run honoring the scenario's `preemptive` flag and collecting an event
/// trace.
pub fn run_with_trace(
    scenario: &Scenario,
    policy: &mut dyn Policy,
    replication: u64,
) -> Result<(SimResult, Vec<TraceRow>), EngineError> {
    let mut trace = Vec::new();
    let result = simulate(scenario, policy, replication, scenario.preemptive, Some(&mut trace))?;
    Ok((result, trace))
}

/// Scalar summary of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationSummary {
    pub replication: u64,
    pub gamma: f64,
    pub utilization: f64,
    pub aoi: Vec<f64>,
    pub tx_cost: Vec<f64>,
}

/// Mean and 95% confidence half-widths across independent replications.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicatedResult {
    pub summaries: Vec<ReplicationSummary>,
    pub gamma_mean: f64,
    pub gamma_ci: f64,
    pub aoi_mean: Vec<f64>,
    pub aoi_ci: Vec<f64>,
}

/// Independent replications on distinct substreams, dispatched to a worker
/// pool; the aggregation order is fixed by replication index, so results do
/// not depend on the worker count. Honors the scenario's `preemptive` flag.
pub fn run_replications(
    scenario: &Scenario,
    build_policy: &(dyn Fn() -> Box<dyn Policy> + Sync),
    replications: u64,
    workers: usize,
) -> Result<ReplicatedResult, EngineError> {
    let outcomes = parallel_indexed(replications as usize, workers, |rep| {
        let mut policy = build_policy();
        simulate(scenario, policy.as_mut(), rep as u64, scenario.preemptive, None)
    });
    let mut summaries = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        let result = outcome?;
        summaries.push(ReplicationSummary {
            replication: result.replication,
            gamma: result.gamma_cost,
            utilization: result.utilization,
            aoi: result.per_source.iter().map(|s| s.aoi).collect(),
            tx_cost: result.per_source.iter().map(|s| s.avg_tx_cost).collect(),
        });
    }
    let gammas: Vec<f64> = summaries.iter().map(|s| s.gamma).collect();
    let (gamma_mean, gamma_ci) = metrics::mean_and_ci(&gammas);
    let n = scenario.sources.len();
    let mut aoi_mean = Vec::with_capacity(n);
    let mut aoi_ci = Vec::with_capacity(n);
    for source in 0..n {
        let xs: Vec<f64> = summaries.iter().map(|s| s.aoi[source]).collect();
        let (m, ci) = metrics::mean_and_ci(&xs);
        aoi_mean.push(m);
        aoi_ci.push(ci);
    }
    Ok(ReplicatedResult { summaries, gamma_mean, gamma_ci, aoi_mean, aoi_ci })
}
