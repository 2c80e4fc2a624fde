//! The discrete-event loop.
//!
//! One binary heap of timestamped events drives every replica, external
//! observer, timer, and partition transition. Ties are broken by insertion
//! sequence, so a scenario plus master seed determines the entire trace.
//!
//! Ground truth lives here, not in any replica: telemetry is collected as
//! events are routed, including from Byzantine replicas (whose wrappers
//! filter protocol messages, never telemetry, except for crashes). External
//! observers verify notarized blocks against the harness's record of
//! genuinely assembled notarizations; signature uniqueness makes that digest
//! check equivalent to cryptographic verification, which replicas already
//! perform on every delivery path.

use crate::adversary::{transform, Behavior, Routed};
use crate::network::DelaySampler;
use crate::scenario::Scenario;
use pharos::chain::{ranking, Block, Ranking};
use pharos::crypto::{Digest, Seed};
use pharos::finalizer::{ObserverEvent, ObserverState};
use pharos::replica::{
    Output, ProtocolConfig, ProtocolMessage, ReplicaState, Telemetry, TimerKind,
};
use pharos::threshold::GroupSignature;
use pharos::time::Time;
use pharos::{Label, Round};

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

/// Runaway guard; legitimate scenarios stay far below this.
const MAX_EVENTS: u64 = 200_000_000;

#[derive(Clone, Debug)]
enum EventKind {
    Deliver { from: Label, to: Label, message: ProtocolMessage },
    Timer { who: Label, timer: TimerKind },
    Lineage { requester: Label, responder: Label, ancestor: Digest },
    /// An adversary's delayed broadcast; per-destination delays and the
    /// partition state are taken when this fires.
    Release { from: Label, message: ProtocolMessage },
    ObserverDeliver { observer: usize, block: Block, signature: GroupSignature },
    ObserverTimer { observer: usize, round: Round },
    PartitionStart { index: usize },
    PartitionEnd { index: usize },
}

struct Event {
    at: Time,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Event) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Event) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Event) -> std::cmp::Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

/// Static facts about a block, recorded when its body first crosses the
/// network.
#[derive(Clone, Copy, Debug)]
pub struct BlockMeta {
    pub round: Round,
    pub owner: Option<Label>,
    pub prev: Option<Digest>,
}

/// A realized partition interval. `end` is None if still split at run end.
#[derive(Clone, Debug)]
pub struct PartitionWindow {
    pub index: usize,
    pub start: Time,
    pub end: Option<Time>,
    pub components: Vec<BTreeSet<Label>>,
}

/// Everything the theorem checks and metrics read. Times are firsts: each
/// map records the earliest instant the event held.
#[derive(Default)]
pub struct Trace {
    /// Round entry times, every replica whose telemetry got through.
    pub entered_all: BTreeMap<Round, BTreeMap<Label, Time>>,
    /// Round entry times, honest replicas only.
    pub entered_honest: BTreeMap<Round, BTreeMap<Label, Time>>,
    /// Randomness recovery times per round per replica.
    pub seed_recovered: BTreeMap<Round, BTreeMap<Label, Time>>,
    /// Every randomness recovery in event order, for stall analysis.
    pub seed_events: Vec<(Time, Label, Round)>,
    /// First sight of a notarization for a digest, per replica.
    pub nota_seen: BTreeMap<Label, BTreeMap<Digest, Time>>,
    /// First storage of a block body, per replica.
    pub block_stored: BTreeMap<Label, BTreeMap<Digest, Time>>,
    /// Proposals in event order per round: (time, proposer, digest, rank).
    pub proposed: BTreeMap<Round, Vec<(Time, Label, Digest, u64)>>,
    /// Ground truth: first assembly time of a notarization per digest.
    pub notarized: BTreeMap<Round, BTreeMap<Digest, Time>>,
    pub block_meta: BTreeMap<Digest, BlockMeta>,
    /// Invalid artifacts observed by replicas, by kind.
    pub invalid: BTreeMap<String, u64>,
    pub messages_delivered: u64,
    pub events_processed: u64,
    /// Per external observer: first fill time of each round's bucket.
    pub observer_fill: Vec<BTreeMap<Round, Time>>,
    /// Per external observer: first time the finalized round reached r.
    pub observer_final: Vec<BTreeMap<Round, Time>>,
    pub observer_violations: Vec<u64>,
    pub observer_rejects: Vec<u64>,
    /// Same three, for the observer embedded in each replica.
    pub replica_fill: BTreeMap<Label, BTreeMap<Round, Time>>,
    pub replica_final: BTreeMap<Label, BTreeMap<Round, Time>>,
    pub embedded_violations: BTreeMap<Label, u64>,
    pub partition_windows: Vec<PartitionWindow>,
    /// True iff every honest replica entered round `rounds + 1`.
    pub completed: bool,
}

/// A finished run: the scenario, the trace, and final component states.
pub struct RunArtifacts {
    pub scenario: Scenario,
    pub config: ProtocolConfig,
    pub honest: BTreeSet<Label>,
    pub trace: Trace,
    /// Ground-truth randomness per round (any replica that recovered it;
    /// the uniqueness check proves they all agree).
    pub seeds: BTreeMap<Round, Seed>,
    /// Ground-truth proposer ranking per round, from `seeds`.
    pub rankings: BTreeMap<Round, Ranking>,
    /// Per-replica recovered seeds, for the uniqueness check.
    pub replica_seeds: BTreeMap<Label, BTreeMap<Round, Seed>>,
    pub replicas: BTreeMap<Label, ReplicaState>,
    pub observers: Vec<ObserverState>,
}

impl RunArtifacts {
    /// All honest replicas entered round r.
    pub fn complete(&self, r: Round) -> bool {
        self.trace
            .entered_honest
            .get(&r)
            .map(|m| m.len() == self.honest.len())
            .unwrap_or(false)
    }

    /// Earliest honest entry into round r.
    pub fn tau_min(&self, r: Round) -> Option<Time> {
        self.trace.entered_honest.get(&r)?.values().min().copied()
    }

    /// Latest honest entry into round r; meaningful when `complete(r)`.
    pub fn tau_max(&self, r: Round) -> Option<Time> {
        self.trace.entered_honest.get(&r)?.values().max().copied()
    }

    /// Earliest entry into round r by any replica whose telemetry got
    /// through.
    pub fn tau_star(&self, r: Round) -> Option<Time> {
        self.trace.entered_all.get(&r)?.values().min().copied()
    }

    /// Earliest and latest honest randomness recovery for round r; the
    /// latest is meaningful when every honest replica recovered it.
    pub fn xi_min(&self, r: Round) -> Option<Time> {
        let m = self.trace.seed_recovered.get(&r)?;
        m.iter().filter(|(l, _)| self.honest.contains(l)).map(|(_, t)| *t).min()
    }

    pub fn xi_max(&self, r: Round) -> Option<Time> {
        let m = self.trace.seed_recovered.get(&r)?;
        m.iter().filter(|(l, _)| self.honest.contains(l)).map(|(_, t)| *t).max()
    }

    pub fn xi_complete(&self, r: Round) -> bool {
        self.trace
            .seed_recovered
            .get(&r)
            .map(|m| self.honest.iter().all(|l| m.contains_key(l)))
            .unwrap_or(false)
    }

    /// Best (lowest) rank held by an honest replica in round r.
    pub fn best_honest_rank(&self, r: Round) -> Option<u64> {
        let ranking = self.rankings.get(&r)?;
        self.honest.iter().filter_map(|l| ranking.rank_of(*l)).min()
    }

    /// The rank-0 replica of round r is honest.
    pub fn top_honest(&self, r: Round) -> Option<bool> {
        let ranking = self.rankings.get(&r)?;
        ranking.label_at_rank(0).map(|l| self.honest.contains(&l))
    }
}

struct ActivePartition {
    index: usize,
    components: Vec<BTreeSet<Label>>,
}

struct Sim {
    scenario: Scenario,
    config: ProtocolConfig,
    labels: Vec<Label>,
    honest: BTreeSet<Label>,
    replicas: BTreeMap<Label, ReplicaState>,
    behaviors: BTreeMap<Label, Behavior>,
    observers: Vec<ObserverState>,
    sampler: DelaySampler,
    queue: BinaryHeap<Reverse<Event>>,
    seq: u64,
    now: Time,
    trace: Trace,
    active: Option<ActivePartition>,
    partition_started: BTreeSet<usize>,
    truth_notarized: BTreeSet<Digest>,
    obs_final_high: Vec<Round>,
    replica_final_high: BTreeMap<Label, Round>,
    done: BTreeSet<Label>,
    horizon: Round,
    stop: bool,
}

/// Simulate one scenario to completion (or quiescence, if a permanent
/// partition starves a component of progress).
pub fn run(scenario: Scenario) -> RunArtifacts {
    scenario.validate().expect("scenario must validate before running");
    let setup = scenario.bootstrap();
    let config = setup.config.clone();
    let labels: Vec<Label> = config.universe.clone();
    let honest = scenario.honest();

    let replicas: BTreeMap<Label, ReplicaState> =
        labels.iter().map(|&l| (l, setup.replica(l))).collect();
    let mut behaviors: BTreeMap<Label, Behavior> =
        labels.iter().map(|&l| (l, Behavior::Honest)).collect();
    for adv in &scenario.adversaries {
        behaviors.insert(Label(adv.label), Behavior::from_spec(&adv.behavior));
    }
    let observers: Vec<ObserverState> = (0..scenario.observers)
        .map(|_| ObserverState::new(config.params.clone(), config.finalize_mode))
        .collect();
    let sampler = DelaySampler::new(&scenario.master_seed, scenario.delta.0, scenario.delay);

    let mut trace = Trace::default();
    trace.observer_fill = vec![BTreeMap::new(); observers.len()];
    trace.observer_final = vec![BTreeMap::new(); observers.len()];
    trace.observer_violations = vec![0; observers.len()];
    trace.observer_rejects = vec![0; observers.len()];
    // Genesis is notarized at setup, before any event.
    let genesis = *replicas[&labels[0]].pool().genesis();
    trace.notarized.entry(0).or_default().insert(genesis, Time::ZERO);
    trace.block_meta.insert(genesis, BlockMeta { round: 0, owner: None, prev: None });
    for obs_final in &mut trace.observer_final {
        obs_final.insert(0, Time::ZERO);
    }
    for &l in &labels {
        let mut m = BTreeMap::new();
        m.insert(0, Time::ZERO);
        trace.replica_final.insert(l, m);
    }

    let horizon = scenario.rounds + 1;
    let mut sim = Sim {
        truth_notarized: [genesis].into_iter().collect(),
        obs_final_high: vec![0; observers.len()],
        replica_final_high: labels.iter().map(|&l| (l, 0)).collect(),
        scenario,
        config,
        labels,
        honest,
        replicas,
        behaviors,
        observers,
        sampler,
        queue: BinaryHeap::new(),
        seq: 0,
        now: Time::ZERO,
        trace,
        active: None,
        partition_started: BTreeSet::new(),
        done: BTreeSet::new(),
        horizon,
        stop: false,
    };
    sim.start();
    sim.event_loop();
    sim.finish()
}

impl Sim {
    fn start(&mut self) {
        for (i, p) in self.scenario.partitions.iter().enumerate() {
            if let Some(at) = p.start_time {
                self.queue.push(Reverse(Event {
                    at: at.0,
                    seq: self.seq,
                    kind: EventKind::PartitionStart { index: i },
                }));
                self.seq += 1;
            }
        }
        for i in 0..self.labels.len() {
            let label = self.labels[i];
            let outputs = self
                .replicas
                .get_mut(&label)
                .expect("label registered")
                .start(Time::ZERO);
            self.route(label, outputs);
        }
    }

    fn event_loop(&mut self) {
        while !self.stop {
            let Some(Reverse(event)) = self.queue.pop() else { break };
            debug_assert!(event.at >= self.now, "time moves forward");
            self.now = event.at;
            self.trace.events_processed += 1;
            if self.trace.events_processed > MAX_EVENTS {
                break;
            }
            self.dispatch(event.kind);
        }
        self.trace.completed = self.stop;
    }

    fn dispatch(&mut self, kind: EventKind) {
        match kind {
            EventKind::Deliver { from, to, message } => {
                self.trace.messages_delivered += 1;
                let outputs = self
                    .replicas
                    .get_mut(&to)
                    .expect("label registered")
                    .on_message(self.now, from, message);
                self.route(to, outputs);
            }
            EventKind::Timer { who, timer } => {
                let outputs = self
                    .replicas
                    .get_mut(&who)
                    .expect("label registered")
                    .on_timer(self.now, timer);
                self.route(who, outputs);
            }
            EventKind::Lineage { requester, responder, ancestor } => {
                let outputs = self.replicas[&responder].lineage_response(requester, &ancestor);
                self.route(responder, outputs);
            }
            EventKind::Release { from, message } => self.broadcast(from, message),
            EventKind::ObserverDeliver { observer, block, signature } => {
                self.trace.messages_delivered += 1;
                let params = &self.config.params;
                let truth = &self.truth_notarized;
                let events = self.observers[observer].ingest(
                    self.now,
                    block,
                    signature,
                    &mut |b: &Block, _s: &GroupSignature| truth.contains(&b.digest(params)),
                );
                self.observer_events(observer, events);
            }
            EventKind::ObserverTimer { observer, round } => {
                let events = self.observers[observer].on_finalize_due(round);
                self.observer_events(observer, events);
            }
            EventKind::PartitionStart { index } => {
                let (end_at, started) = {
                    let p = &self.scenario.partitions[index];
                    let start = p.start_time.expect("timed partition").0;
                    let end = match (p.end_time, p.duration) {
                        (Some(e), None) => e.0,
                        (None, Some(d)) => start + d.0,
                        _ => unreachable!("validated"),
                    };
                    (end, self.partition_started.contains(&index))
                };
                if !started {
                    self.activate_partition(index, end_at);
                }
            }
            EventKind::PartitionEnd { index } => self.end_partition(index),
        }
    }

    /// Pass one replica's outputs through its behavior wrapper and into the
    /// network, timers, and trace.
    fn route(&mut self, label: Label, outputs: Vec<Output>) {
        if outputs.is_empty() {
            return;
        }
        let behavior = self.behaviors[&label];
        let routed = transform(behavior, self.now, &self.replicas[&label], outputs);
        for item in routed {
            match item {
                Routed::Now(Output::Broadcast(message)) => self.broadcast(label, message),
                Routed::Now(Output::Send { to, message }) => self.direct(label, to, message),
                Routed::Now(Output::ScheduleTimer { at, timer }) => {
                    if let TimerKind::Finalize { round } = timer {
                        // Timer-mode finalization is scheduled the moment
                        // bucket round+1 first fills.
                        self.trace
                            .replica_fill
                            .entry(label)
                            .or_default()
                            .entry(round + 1)
                            .or_insert(self.now);
                    }
                    self.push(at, EventKind::Timer { who: label, timer });
                }
                Routed::Now(Output::RequestLineage { to, ancestor }) => {
                    if self.reachable(label, to) {
                        let at = self.now + self.sampler.next();
                        self.push(
                            at,
                            EventKind::Lineage { requester: label, responder: to, ancestor },
                        );
                    }
                }
                Routed::Now(Output::Telemetry(t)) => self.record_telemetry(label, t),
                Routed::Release { at, message } => {
                    self.push(at, EventKind::Release { from: label, message });
                }
            }
        }
    }

    /// Fan a message out to every other replica (partition permitting) and,
    /// for notarized blocks, to every external observer. Unreachable
    /// destinations consume no delay draw, so a partitioned run shares no
    /// delay stream with its unpartitioned twin.
    fn broadcast(&mut self, from: Label, message: ProtocolMessage) {
        self.note_block_meta(&message);
        for i in 0..self.labels.len() {
            let to = self.labels[i];
            if to == from || !self.reachable(from, to) {
                continue;
            }
            let at = self.now + self.sampler.next();
            self.push(at, EventKind::Deliver { from, to, message: message.clone() });
        }
        if let ProtocolMessage::NotarizedBlock { block, signature } = &message {
            // Observers sit outside every partition.
            for observer in 0..self.observers.len() {
                let at = self.now + self.sampler.next();
                self.push(
                    at,
                    EventKind::ObserverDeliver {
                        observer,
                        block: block.clone(),
                        signature: signature.clone(),
                    },
                );
            }
        }
    }

    fn direct(&mut self, from: Label, to: Label, message: ProtocolMessage) {
        self.note_block_meta(&message);
        if !self.reachable(from, to) {
            return;
        }
        let at = self.now + self.sampler.next();
        self.push(at, EventKind::Deliver { from, to, message });
    }

    fn reachable(&self, a: Label, b: Label) -> bool {
        match &self.active {
            None => true,
            Some(p) => p.components.iter().any(|c| c.contains(&a) && c.contains(&b)),
        }
    }

    fn push(&mut self, at: Time, kind: EventKind) {
        debug_assert!(at >= self.now, "events schedule into the future");
        self.queue.push(Reverse(Event { at, seq: self.seq, kind }));
        self.seq += 1;
    }

    /// Block bodies are recorded the first time they cross the network in
    /// any direction, including adversarial twins that no replica proposed.
    fn note_block_meta(&mut self, message: &ProtocolMessage) {
        let block = match message {
            ProtocolMessage::BlockProposal { block } => block,
            ProtocolMessage::NotarizedBlock { block, .. } => block,
            _ => return,
        };
        let digest = block.digest(&self.config.params);
        self.trace.block_meta.entry(digest).or_insert_with(|| BlockMeta {
            round: block.round(),
            owner: block.owner(),
            prev: block.prev().copied(),
        });
    }

    fn record_telemetry(&mut self, label: Label, telemetry: Telemetry) {
        let now = self.now;
        match telemetry {
            Telemetry::EnteredRound { round } => {
                self.trace.entered_all.entry(round).or_default().entry(label).or_insert(now);
                if self.honest.contains(&label) {
                    self.trace
                        .entered_honest
                        .entry(round)
                        .or_default()
                        .entry(label)
                        .or_insert(now);
                    self.maybe_trigger_partition(round);
                    if round >= self.horizon {
                        self.done.insert(label);
                        if self.done.len() == self.honest.len() {
                            self.stop = true;
                        }
                    }
                }
            }
            Telemetry::BeaconShareSent { .. } => {}
            Telemetry::SeedRecovered { round } => {
                self.trace
                    .seed_recovered
                    .entry(round)
                    .or_default()
                    .entry(label)
                    .or_insert(now);
                self.trace.seed_events.push((now, label, round));
            }
            Telemetry::Proposed { round, digest, rank } => {
                self.trace.proposed.entry(round).or_default().push((now, label, digest, rank));
            }
            Telemetry::Signed { .. } => {}
            Telemetry::NotarizationAssembled { round, digest } => {
                self.truth_notarized.insert(digest);
                self.trace.notarized.entry(round).or_default().entry(digest).or_insert(now);
            }
            Telemetry::NotarizationSeen { round: _, digest } => {
                self.trace.nota_seen.entry(label).or_default().entry(digest).or_insert(now);
            }
            Telemetry::BlockStored { round: _, digest } => {
                self.trace.block_stored.entry(label).or_default().entry(digest).or_insert(now);
            }
            Telemetry::NotarizedBlockStored { round, digest } => {
                self.truth_notarized.insert(digest);
                self.trace.notarized.entry(round).or_default().entry(digest).or_insert(now);
                self.trace.nota_seen.entry(label).or_default().entry(digest).or_insert(now);
                self.trace.block_stored.entry(label).or_default().entry(digest).or_insert(now);
            }
            Telemetry::InvalidArtifact { kind } => {
                *self.trace.invalid.entry(kind.to_string()).or_insert(0) += 1;
            }
            Telemetry::Observer(ev) => match ev {
                ObserverEvent::Finalized { len, .. } => {
                    let high = self.replica_final_high.get_mut(&label).expect("registered");
                    let map = self.trace.replica_final.get_mut(&label).expect("registered");
                    for r in (*high + 1)..=len {
                        map.insert(r, now);
                    }
                    *high = (*high).max(len);
                }
                ObserverEvent::PrefixViolation { .. } => {
                    *self.trace.embedded_violations.entry(label).or_insert(0) += 1;
                }
                ObserverEvent::Rejected | ObserverEvent::ScheduleFinalize { .. } => {}
            },
        }
    }

    fn observer_events(&mut self, observer: usize, events: Vec<ObserverEvent>) {
        for ev in events {
            match ev {
                ObserverEvent::ScheduleFinalize { at, round } => {
                    self.trace.observer_fill[observer].entry(round + 1).or_insert(self.now);
                    self.push(at, EventKind::ObserverTimer { observer, round });
                }
                ObserverEvent::Finalized { len, .. } => {
                    let high = &mut self.obs_final_high[observer];
                    for r in (*high + 1)..=len {
                        self.trace.observer_final[observer].insert(r, self.now);
                    }
                    *high = (*high).max(len);
                }
                ObserverEvent::PrefixViolation { .. } => {
                    self.trace.observer_violations[observer] += 1;
                }
                ObserverEvent::Rejected => self.trace.observer_rejects[observer] += 1,
            }
        }
    }

    /// Round-triggered partitions activate when the first honest replica
    /// enters the named round.
    fn maybe_trigger_partition(&mut self, round: Round) {
        for index in 0..self.scenario.partitions.len() {
            let p = &self.scenario.partitions[index];
            if p.start_round != Some(round) || self.partition_started.contains(&index) {
                continue;
            }
            let end_at = self.now + p.duration.expect("validated: round start carries duration").0;
            self.activate_partition(index, end_at);
        }
    }

    fn activate_partition(&mut self, index: usize, end_at: Time) {
        assert!(self.active.is_none(), "overlapping partitions are not supported");
        self.partition_started.insert(index);
        let components: Vec<BTreeSet<Label>> = self.scenario.partitions[index]
            .components
            .iter()
            .map(|c| c.iter().map(|&l| Label(l)).collect())
            .collect();
        self.trace.partition_windows.push(PartitionWindow {
            index,
            start: self.now,
            end: None,
            components: components.clone(),
        });
        self.active = Some(ActivePartition { index, components });
        self.push(end_at, EventKind::PartitionEnd { index });
    }

    fn end_partition(&mut self, index: usize) {
        let active = self.active.take().expect("partition end without active partition");
        assert_eq!(active.index, index, "partitions end in activation order");
        for w in self.trace.partition_windows.iter_mut().rev() {
            if w.index == index && w.end.is_none() {
                w.end = Some(self.now);
                break;
            }
        }
        // Everyone re-announces current-round artifacts so stalled
        // components catch up.
        for i in 0..self.labels.len() {
            let label = self.labels[i];
            let outputs =
                self.replicas.get_mut(&label).expect("label registered").heal_rebroadcast();
            self.route(label, outputs);
        }
    }

    fn finish(self) -> RunArtifacts {
        let max_round = self.scenario.rounds + 2;
        let mut replica_seeds = BTreeMap::new();
        for (label, replica) in &self.replicas {
            let mut per_round = BTreeMap::new();
            for r in 0..=max_round {
                if let Some(s) = replica.seed(r) {
                    per_round.insert(r, *s);
                }
            }
            replica_seeds.insert(*label, per_round);
        }
        let mut seeds: BTreeMap<Round, Seed> = BTreeMap::new();
        for per_round in replica_seeds.values() {
            for (&r, &s) in per_round {
                seeds.entry(r).or_insert(s);
            }
        }
        let rankings: BTreeMap<Round, Ranking> = seeds
            .iter()
            .map(|(&r, s)| {
                (r, ranking(&self.config.universe, s).expect("universe fits the ranking domain"))
            })
            .collect();
        RunArtifacts {
            scenario: self.scenario,
            config: self.config,
            honest: self.honest,
            trace: self.trace,
            seeds,
            rankings,
            replica_seeds,
            replicas: self.replicas,
            observers: self.observers,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Scenario;

    fn small_scenario(rounds: u64) -> Scenario {
        Scenario::from_json(&format!(
            r#"{{
                "name": "runner-smoke",
                "universe": 4,
                "group_size": 4,
                "rounds": {rounds},
                "delta": "1",
                "block_time": "3",
                "finalize": {{ "timer": {{ "delay": "2" }} }},
                "master_seed": "runner-tests"
            }}"#
        ))
        .unwrap()
    }

    #[test]
    fn all_honest_run_completes_and_notarizes_every_round() {
        let art = run(small_scenario(5));
        assert!(art.trace.completed);
        for r in 1..=5 {
            assert!(art.complete(r), "round {r} entered by all honest replicas");
            let notarized = art.trace.notarized.get(&r).map(|m| m.len()).unwrap_or(0);
            assert_eq!(notarized, 1, "round {r} has exactly one notarized block");
            assert!(art.xi_complete(r), "round {r} randomness recovered everywhere");
        }
        // Entry spread stays within one delay bound.
        for r in 1..=5 {
            let spread = art.tau_max(r).unwrap() - art.tau_min(r).unwrap();
            assert!(spread < Time::from_int(1) || spread == Time::from_int(1));
        }
    }

    #[test]
    fn external_observer_finalizes_the_chain() {
        let art = run(small_scenario(6));
        assert_eq!(art.trace.observer_rejects[0], 0);
        assert_eq!(art.trace.observer_violations[0], 0);
        let export = art.observers[0].export();
        assert!(export.len() >= 5, "observer finalized most of the run: {}", export.len());
        for (i, entry) in export.iter().enumerate() {
            assert_eq!(entry.round, i as u64, "finalized rounds are consecutive");
        }
    }

    #[test]
    fn same_scenario_same_trace() {
        let a = run(small_scenario(4));
        let b = run(small_scenario(4));
        assert_eq!(a.trace.entered_honest, b.trace.entered_honest);
        assert_eq!(a.trace.notarized.len(), b.trace.notarized.len());
        for (r, m) in &a.trace.notarized {
            assert_eq!(m, &b.trace.notarized[r]);
        }
        assert_eq!(a.trace.messages_delivered, b.trace.messages_delivered);
        assert_eq!(a.trace.events_processed, b.trace.events_processed);
        assert_eq!(a.seeds, b.seeds);
    }

    #[test]
    fn different_master_seed_changes_the_delay_realization() {
        let a = run(small_scenario(4));
        let mut sc = small_scenario(4);
        sc.master_seed = "other-master".to_string();
        let b = run(sc);
        // Keys, seeds, and delays all differ; entry times cannot all match.
        assert_ne!(a.seeds, b.seeds);
    }

    #[test]
    fn crash_of_a_minority_keeps_liveness() {
        let mut sc = small_scenario(8);
        sc.adversaries = vec![crate::scenario::AdversarySpec {
            label: 4,
            behavior: crate::scenario::BehaviorSpec::Crash { at: crate::scenario::Ts(Time::ZERO) },
        }];
        // One crash of four respects beta = 3.
        sc.validate().unwrap();
        let art = run(sc);
        assert!(art.trace.completed, "three honest replicas of four carry the run");
        for r in 1..=8 {
            assert!(!art.trace.notarized.get(&r).map(|m| m.is_empty()).unwrap_or(true));
        }
    }
}
