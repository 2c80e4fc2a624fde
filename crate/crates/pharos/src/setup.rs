//! Deterministic system bootstrap for simulations and tests.
//!
//! Derives the registered groups from a setup seed, runs the distributed key
//! generation for each, distributes the resulting key shares to their
//! holders, and produces the genesis notarization that lets round 1 extend
//! the genesis block. Everything is a pure function of the inputs, so two
//! bootstraps from the same tag are identical.

use crate::chain::{genesis_block, genesis_seed, notary_message};
use crate::committee::{committee_select, group_derive, Beta};
use crate::crypto::{encode64, hash_parts, Seed};
use crate::finalizer::FinalizeMode;
use crate::replica::{GroupInfo, PayloadRule, ProtocolConfig, ReplicaState};
use crate::threshold::dkg::{deal_all, run_dkg};
use crate::threshold::{recover, sign_share, GroupSignature, SchemeParams, SecretKeyShare};
use crate::time::Time;
use crate::Label;

use std::collections::BTreeMap;

/// The output of a bootstrap: shared configuration, each replica's secret
/// key shares keyed by group id, and the genesis notarization.
#[derive(Clone, Debug)]
pub struct SystemSetup {
    pub config: ProtocolConfig,
    pub shares: BTreeMap<Label, BTreeMap<u64, SecretKeyShare>>,
    pub genesis_notarization: GroupSignature,
}

impl SystemSetup {
    /// Build the replica for one label. Panics on labels outside the
    /// universe; replicas without any committee seat are valid.
    pub fn replica(&self, id: Label) -> ReplicaState {
        assert!(self.config.universe.contains(&id), "label {id} is not registered");
        let keys = self.shares.get(&id).cloned().unwrap_or_default();
        ReplicaState::new(id, self.config.clone(), keys, self.genesis_notarization.clone())
            .expect("bootstrap output is a valid configuration")
    }

    /// Build every replica, in universe order.
    pub fn replicas(&self) -> impl Iterator<Item = ReplicaState> + '_ {
        self.config.universe.iter().map(move |&id| self.replica(id))
    }
}

/// Bootstrap a system of `universe_size` replicas labeled 1..=universe_size
/// with `group_count` registered groups of `group_size` members each and
/// signature threshold `threshold`. `tag` seeds group derivation and key
/// generation.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap(
    params: SchemeParams,
    universe_size: u64,
    group_count: u64,
    group_size: u32,
    threshold: u32,
    block_time: Time,
    finalize_mode: FinalizeMode,
    tag: &[u8],
) -> SystemSetup {
    assert!(group_count > 0, "at least one group is required");
    assert!(
        group_size as u64 <= universe_size,
        "groups cannot exceed the universe"
    );
    let universe: Vec<Label> = (1..=universe_size).map(Label).collect();
    let setup_seed = Seed::from(hash_parts(&[b"setup", tag]));

    let mut groups = Vec::with_capacity(group_count as usize);
    let mut shares: BTreeMap<Label, BTreeMap<u64, SecretKeyShare>> = BTreeMap::new();
    for j in 0..group_count {
        let group =
            group_derive(&setup_seed, j, &universe, group_size).expect("group fits universe");
        let dkg_seed = Seed::from(hash_parts(&[b"dkg", &setup_seed.0, &encode64(j)]));
        let dealings = deal_all(&params, threshold, group_size, &dkg_seed);
        let outcome =
            run_dkg(&params, threshold, group_size, &dealings).expect("honest dealings qualify");
        for (index, share) in &outcome.shares {
            let label = group.member_at_index(*index).expect("share index is in range");
            shares.entry(label).or_default().insert(j, share.clone());
        }
        groups.push(GroupInfo { group, vvec: outcome.vvec });
    }

    let config = ProtocolConfig {
        params: params.clone(),
        universe,
        groups,
        threshold,
        beta: Beta::from_integer(3).expect("3 exceeds 2"),
        epoch_length: 10,
        block_time,
        payload_rule: PayloadRule::Any,
        finalize_mode,
    };
    config.validate().expect("bootstrap produces a valid configuration");

    // The seed-zero committee notarizes genesis at setup, which bootstraps
    // round 1: proposals extending genesis carry this notarization.
    let genesis_digest = genesis_block().digest(&params);
    let message = notary_message(&genesis_digest);
    let gid = committee_select(&genesis_seed(), group_count);
    let committee = &config.groups[gid as usize];
    let mut contributors = Vec::with_capacity(threshold as usize);
    for &member in &committee.group.members {
        if contributors.len() == threshold as usize {
            break;
        }
        let key = &shares[&member][&gid];
        contributors.push(sign_share(&params, &message, key));
    }
    let value =
        recover(&params, threshold, &contributors).expect("threshold shares recover");
    let genesis_notarization = GroupSignature { value, contributors };

    SystemSetup { config, shares, genesis_notarization }
}
