//! Byzantine behaviors as output filters.
//!
//! Every replica runs the honest code; an adversary is a wrapper that drops,
//! duplicates, delays, or rewrites the *outputs* of its replica before they
//! reach the network. Replica internals stay honest, so timing invariants
//! that depend only on local state (no signature before the notarization
//! wait expires) hold for adversaries too. Telemetry always passes through
//! at true time: the harness sees what really happened.

use crate::scenario::BehaviorSpec;
use pharos::chain::Block;
use pharos::replica::{Output, ProtocolMessage, ReplicaState};
use pharos::time::Time;

/// Suffix appended to the payload of an equivocating twin proposal.
const TWIN_SUFFIX: &[u8] = b".twin";

#[derive(Clone, Copy, PartialEq, Debug)]
pub enum Behavior {
    Honest,
    Equivocate,
    WithholdSignatures,
    WithholdNotarization { delay: Time },
    SelfishChain,
    Crash { at: Time },
    BeaconAbstain,
}

impl Behavior {
    pub fn from_spec(spec: &BehaviorSpec) -> Behavior {
        match spec {
            BehaviorSpec::Equivocate => Behavior::Equivocate,
            BehaviorSpec::WithholdSignatures => Behavior::WithholdSignatures,
            BehaviorSpec::WithholdNotarization { delay } => {
                Behavior::WithholdNotarization { delay: delay.0 }
            }
            BehaviorSpec::SelfishChain => Behavior::SelfishChain,
            BehaviorSpec::Crash { at } => Behavior::Crash { at: at.0 },
            BehaviorSpec::BeaconAbstain => Behavior::BeaconAbstain,
        }
    }

    pub fn is_byzantine(self) -> bool {
        !matches!(self, Behavior::Honest)
    }
}

/// What the wrapper hands the network.
#[derive(Clone, Debug)]
pub enum Routed {
    /// Deliver as the replica emitted it.
    Now(Output),
    /// Broadcast `message` at time `at`; per-destination delays and the
    /// partition state are taken at the release instant, not now.
    Release { at: Time, message: ProtocolMessage },
}

/// Filter one batch of outputs through the replica's behavior.
pub fn transform(
    behavior: Behavior,
    now: Time,
    state: &ReplicaState,
    outputs: Vec<Output>,
) -> Vec<Routed> {
    match behavior {
        Behavior::Honest => outputs.into_iter().map(Routed::Now).collect(),
        Behavior::Equivocate => equivocate(state, outputs),
        Behavior::WithholdSignatures => outputs
            .into_iter()
            .filter(|o| !is_message(o, is_block_signature))
            .map(Routed::Now)
            .collect(),
        Behavior::WithholdNotarization { delay } => withhold_notarization(now, delay, outputs),
        Behavior::SelfishChain => selfish_chain(state, outputs),
        Behavior::Crash { at } => {
            if now >= at {
                Vec::new()
            } else {
                outputs.into_iter().map(Routed::Now).collect()
            }
        }
        Behavior::BeaconAbstain => outputs
            .into_iter()
            .filter(|o| !is_message(o, is_beacon_share))
            .map(Routed::Now)
            .collect(),
    }
}

fn is_message(output: &Output, pred: fn(&ProtocolMessage) -> bool) -> bool {
    match output {
        Output::Broadcast(m) | Output::Send { message: m, .. } => pred(m),
        _ => false,
    }
}

fn is_block_signature(m: &ProtocolMessage) -> bool {
    matches!(m, ProtocolMessage::BlockSignature { .. })
}

fn is_beacon_share(m: &ProtocolMessage) -> bool {
    matches!(m, ProtocolMessage::BeaconShare { .. })
}

fn is_notarization_kind(m: &ProtocolMessage) -> bool {
    matches!(
        m,
        ProtocolMessage::Notarization { .. } | ProtocolMessage::NotarizedBlock { .. }
    )
}

/// Each own proposal gains a twin with a tweaked payload: same rank, same
/// predecessor, different digest. Both are valid, so honest notaries that
/// have not yet signed a better rank sign both.
fn equivocate(state: &ReplicaState, outputs: Vec<Output>) -> Vec<Routed> {
    let mut routed = Vec::new();
    for output in outputs {
        let twin = match &output {
            Output::Broadcast(ProtocolMessage::BlockProposal { block }) => match block {
                Block::Normal { prev, round, prev_notarization, payload, owner }
                    if *owner == state.id() =>
                {
                    let mut twin_payload = payload.clone();
                    twin_payload.extend_from_slice(TWIN_SUFFIX);
                    Some(Block::Normal {
                        prev: *prev,
                        round: *round,
                        prev_notarization: prev_notarization.clone(),
                        payload: twin_payload,
                        owner: *owner,
                    })
                }
                _ => None,
            },
            _ => None,
        };
        routed.push(Routed::Now(output));
        if let Some(block) = twin {
            routed.push(Routed::Now(Output::Broadcast(ProtocolMessage::BlockProposal {
                block,
            })));
        }
    }
    routed
}

/// Contribute no notarization shares; sit on any notarization assembled or
/// learned until `delay` has passed, then broadcast it. Directed catch-up
/// sends of notarizations are dropped outright.
fn withhold_notarization(now: Time, delay: Time, outputs: Vec<Output>) -> Vec<Routed> {
    let mut routed = Vec::new();
    for output in outputs {
        match output {
            o if is_message(&o, is_block_signature) => {}
            Output::Broadcast(m) if is_notarization_kind(&m) => {
                routed.push(Routed::Release { at: now + delay, message: m });
            }
            Output::Send { message: m, .. } if is_notarization_kind(&m) => {}
            o => routed.push(Routed::Now(o)),
        }
    }
    routed
}

/// Retarget own proposals onto the replica's own notarized block of the
/// previous round when one exists. The result is still a valid proposal
/// (real notarization, correct round), just a deliberately worse parent.
fn selfish_chain(state: &ReplicaState, outputs: Vec<Output>) -> Vec<Routed> {
    let mut routed = Vec::new();
    for output in outputs {
        let replaced = match &output {
            Output::Broadcast(ProtocolMessage::BlockProposal { block }) => match block {
                Block::Normal { round, payload, owner, .. } if *owner == state.id() => {
                    own_notarized_parent(state, *round).map(|(prev, notarization)| {
                        Output::Broadcast(ProtocolMessage::BlockProposal {
                            block: Block::Normal {
                                prev,
                                round: *round,
                                prev_notarization: notarization,
                                payload: payload.clone(),
                                owner: *owner,
                            },
                        })
                    })
                }
                _ => None,
            },
            _ => None,
        };
        routed.push(Routed::Now(replaced.unwrap_or(output)));
    }
    routed
}

fn own_notarized_parent(
    state: &ReplicaState,
    round: u64,
) -> Option<(pharos::crypto::Digest, pharos::threshold::GroupSignature)> {
    let pool = state.pool();
    let prev_round = round.checked_sub(1)?;
    // BlockPool iterates digests in order, so the first own hit is the
    // deterministic minimum.
    let digest = *pool
        .notarized_at(prev_round)
        .find(|d| pool.get(d).and_then(|b| b.owner()) == Some(state.id()))?;
    let notarization = pool.notarization_of(&digest)?.clone();
    Some((digest, notarization))
}

#[cfg(test)]
mod tests {
    use super::*;
    use pharos::crypto::Digest;
    use pharos::finalizer::FinalizeMode;
    use pharos::replica::Telemetry;
    use pharos::setup::bootstrap;
    use pharos::threshold::SchemeParams;

    fn one_replica() -> ReplicaState {
        let setup = bootstrap(
            SchemeParams::toy(),
            4,
            1,
            4,
            3,
            Time::from_int(3),
            FinalizeMode::Timer { delay: Time::from_int(2) },
            b"adv-tests",
        );
        setup.replica(pharos::Label(1))
    }

    fn fake_outputs() -> Vec<Output> {
        vec![
            Output::Telemetry(Telemetry::EnteredRound { round: 1 }),
            Output::ScheduleTimer {
                at: Time::from_int(3),
                timer: pharos::replica::TimerKind::Notarize { round: 1 },
            },
        ]
    }

    #[test]
    fn honest_passes_everything() {
        let state = one_replica();
        let routed = transform(Behavior::Honest, Time::ZERO, &state, fake_outputs());
        assert_eq!(routed.len(), 2);
        assert!(routed.iter().all(|r| matches!(r, Routed::Now(_))));
    }

    #[test]
    fn crash_drops_everything_after_deadline() {
        let state = one_replica();
        let crash = Behavior::Crash { at: Time::from_int(5) };
        assert_eq!(transform(crash, Time::from_int(4), &state, fake_outputs()).len(), 2);
        assert_eq!(transform(crash, Time::from_int(5), &state, fake_outputs()).len(), 0);
    }

    #[test]
    fn equivocator_twins_only_its_own_proposals() {
        let state = one_replica();
        let start = state;
        // A start batch carries no proposal; nothing to twin.
        let routed = transform(Behavior::Equivocate, Time::ZERO, &start, fake_outputs());
        assert_eq!(routed.len(), 2);

        let someone_elses = Block::Normal {
            prev: Digest([0u8; 32]),
            round: 1,
            prev_notarization: start
                .pool()
                .notarization_of(start.pool().genesis())
                .unwrap()
                .clone(),
            payload: b"p".to_vec(),
            owner: pharos::Label(2),
        };
        let routed = transform(
            Behavior::Equivocate,
            Time::ZERO,
            &start,
            vec![Output::Broadcast(ProtocolMessage::BlockProposal { block: someone_elses })],
        );
        assert_eq!(routed.len(), 1, "relayed foreign proposals are not twinned");

        let own = Block::Normal {
            prev: *start.pool().genesis(),
            round: 1,
            prev_notarization: start
                .pool()
                .notarization_of(start.pool().genesis())
                .unwrap()
                .clone(),
            payload: b"p".to_vec(),
            owner: pharos::Label(1),
        };
        let routed = transform(
            Behavior::Equivocate,
            Time::ZERO,
            &start,
            vec![Output::Broadcast(ProtocolMessage::BlockProposal { block: own })],
        );
        assert_eq!(routed.len(), 2);
        let digests: Vec<Digest> = routed
            .iter()
            .filter_map(|r| match r {
                Routed::Now(Output::Broadcast(ProtocolMessage::BlockProposal { block })) => {
                    Some(block.digest(&SchemeParams::toy()))
                }
                _ => None,
            })
            .collect();
        assert_eq!(digests.len(), 2);
        assert_ne!(digests[0], digests[1], "twin must have a distinct digest");
    }

    #[test]
    fn withholder_delays_notarizations_and_drops_shares() {
        let state = one_replica();
        let genesis_sig = state.pool().notarization_of(state.pool().genesis()).unwrap().clone();
        let outputs = vec![
            Output::Broadcast(ProtocolMessage::Notarization {
                round: 1,
                digest: Digest([9u8; 32]),
                signature: genesis_sig.clone(),
            }),
            Output::Broadcast(ProtocolMessage::BlockSignature {
                round: 1,
                digest: Digest([9u8; 32]),
                share: genesis_sig.contributors[0].clone(),
            }),
            Output::Telemetry(Telemetry::EnteredRound { round: 1 }),
        ];
        let routed = transform(
            Behavior::WithholdNotarization { delay: Time::from_int(5) },
            Time::from_int(2),
            &state,
            outputs,
        );
        assert_eq!(routed.len(), 2);
        assert!(matches!(
            routed[0],
            Routed::Release { at, .. } if at == Time::from_int(7)
        ));
        assert!(matches!(routed[1], Routed::Now(Output::Telemetry(_))));
    }
}
