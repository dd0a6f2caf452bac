//! Newcomer filtering: scan, credential check, honeypot probe, verdict.
//!
//! Unknown nodes near the network are credential-checked first. Survivors
//! are probed with fake packets carrying unique tags and watched for a
//! bounded window; a node that sends a tagged packet anywhere other than the
//! approved database set has proved it exfiltrates, and is hostile. Tags
//! make attribution exact, so there are no false positives by construction.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{Event, Node, NodeId, Role, WorldState};

#[derive(Debug, Error, PartialEq)]
pub enum AdmissionError {
    #[error("probe target {0} does not exist")]
    UnknownTarget(NodeId),
}

/// Payload class of a simulated packet. Honeypot packets always carry their
/// tag; real packets never do.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketKind {
    Real,
    Honeypot { tag: u64 },
}

impl PacketKind {
    pub fn honeypot_tag(self) -> Option<u64> {
        match self {
            PacketKind::Real => None,
            PacketKind::Honeypot { tag } => Some(tag),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub src: NodeId,
    pub dst: NodeId,
    pub kind: PacketKind,
    /// Abstract bytes.
    pub size: u32,
}

/// Scripted per-node packet behavior, fixed by the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PacketScript {
    /// Consumes everything it receives.
    Drop,
    /// Forwards every received packet to `dst`, `delay` ticks after receipt.
    ForwardTo { dst: NodeId, delay: u64 },
}

/// Node id → scripted behavior. Nodes without an entry drop traffic.
pub type BehaviorTable = BTreeMap<NodeId, PacketScript>;

/// What the probe loop saw, kept as admission evidence.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    CredentialFailure,
    Forwarded { src: NodeId, dst: NodeId, tag: u64 },
}

/// Final admission call for one node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Rejected,
    Friend,
    Hostile,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Rejected => "Rejected",
            Verdict::Friend => "Friend",
            Verdict::Hostile => "Hostile",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissionVerdict {
    pub node_id: NodeId,
    pub verdict: Verdict,
    pub evidence: Vec<(u64, Observation)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbePolicy {
    pub probe_packet_count: u32,
    /// Ticks the world is run while watching the probed node.
    pub observation_window: u64,
    /// Legitimate sinks; forwarding a tagged packet anywhere else is
    /// exfiltration.
    pub database_node_ids: BTreeSet<NodeId>,
}

impl Default for ProbePolicy {
    fn default() -> Self {
        Self {
            probe_packet_count: 3,
            observation_window: 10,
            database_node_ids: BTreeSet::new(),
        }
    }
}

/// Ids of all Unknown nodes within `radius` of any Friend or BaseStation
/// node, ascending. The id is the number the scan assigns to each node.
pub fn scan_candidates(state: &WorldState, radius: f64) -> Vec<NodeId> {
    debug_assert!(radius > 0.0);
    let anchors: Vec<&Node> = state
        .nodes()
        .filter(|n| matches!(n.role, Role::Friend | Role::BaseStation))
        .collect();
    state
        .nodes()
        .filter(|n| n.role == Role::Unknown)
        .filter(|n| {
            anchors
                .iter()
                .any(|a| a.position.distance(n.position) <= radius)
        })
        .map(|n| n.id)
        .collect()
}

/// Credential validity and registry membership in one check: the frame must
/// verify and the identifier must be registered as friendly.
pub fn check_identity(node: &Node, registry: &BTreeSet<u32>, crc_mode: bool) -> bool {
    node.credential.verify(crc_mode) && registry.contains(&node.credential.id_bits())
}

/// A packet travelling or a forward waiting to be sent.
#[derive(Debug, Clone, Copy)]
enum Pending {
    Deliver { at: u64, packet: Packet },
    Send { at: u64, packet: Packet },
}

/// Sends tagged honeypot packets to the target and runs the world for the
/// observation window, executing every node's packet script. Hostile iff a
/// tagged packet was sent by the target to a node outside the database set.
///
/// Delivery takes one tick; a `ForwardTo` script sends `delay` ticks after
/// receipt, so forward chains through intermediate nodes are followed too.
/// Packets still in flight when the window closes are not judged.
pub fn probe_with_honeypot(
    state: &mut WorldState,
    behaviors: &BehaviorTable,
    target: NodeId,
    policy: &ProbePolicy,
) -> Result<(Verdict, Vec<(u64, Observation)>), AdmissionError> {
    if state.node(target).is_none() {
        return Err(AdmissionError::UnknownTarget(target));
    }
    let origin = probe_origin(state);

    let mut tags = BTreeSet::new();
    let mut pending: Vec<Pending> = Vec::new();
    for _ in 0..policy.probe_packet_count {
        let tag = state.mint_honeypot_tag();
        tags.insert(tag);
        state.log(Event::HoneypotInjected {
            src: origin,
            dst: target,
            tag,
        });
        pending.push(Pending::Deliver {
            at: state.tick() + 1,
            packet: Packet {
                src: origin,
                dst: target,
                kind: PacketKind::Honeypot { tag },
                size: 64,
            },
        });
    }

    let mut observations: Vec<(u64, Observation)> = Vec::new();
    let mut hostile = false;
    for _ in 0..policy.observation_window {
        state.step();
        let now = state.tick();

        // Deliveries first, so zero-delay forwards can go out this tick.
        let mut inboxes: BTreeMap<NodeId, Vec<Packet>> = BTreeMap::new();
        let mut rest = Vec::with_capacity(pending.len());
        for item in pending.drain(..) {
            match item {
                Pending::Deliver { at, packet } if at <= now => {
                    inboxes.entry(packet.dst).or_default().push(packet);
                }
                other => rest.push(other),
            }
        }
        pending = rest;

        for (node_id, packets) in inboxes {
            let Some(PacketScript::ForwardTo { dst, delay }) = behaviors.get(&node_id).copied()
            else {
                continue; // no script or Drop: traffic is consumed
            };
            for packet in packets {
                pending.push(Pending::Send {
                    at: now + delay,
                    packet: Packet {
                        src: node_id,
                        dst,
                        kind: packet.kind,
                        size: packet.size,
                    },
                });
            }
        }

        let mut rest = Vec::with_capacity(pending.len());
        for item in pending.drain(..) {
            match item {
                Pending::Send { at, packet } if at <= now => {
                    state.log(Event::PacketForwarded {
                        src: packet.src,
                        dst: packet.dst,
                        tag: packet.kind.honeypot_tag(),
                    });
                    if let Some(tag) = packet.kind.honeypot_tag() {
                        if tags.contains(&tag) {
                            observations.push((
                                now,
                                Observation::Forwarded {
                                    src: packet.src,
                                    dst: packet.dst,
                                    tag,
                                },
                            ));
                            if packet.src == target
                                && !policy.database_node_ids.contains(&packet.dst)
                            {
                                hostile = true;
                            }
                        }
                    }
                    rest.push(Pending::Deliver {
                        at: now + 1,
                        packet,
                    });
                }
                other => rest.push(other),
            }
        }
        pending = rest;
    }

    let verdict = if hostile {
        Verdict::Hostile
    } else {
        Verdict::Friend
    };
    Ok((verdict, observations))
}

/// Where probe packets originate: the lowest-id base station, else the
/// lowest-id friend, else a synthetic system origin.
fn probe_origin(state: &WorldState) -> NodeId {
    state
        .nodes()
        .find(|n| n.role == Role::BaseStation)
        .or_else(|| state.nodes().find(|n| n.role == Role::Friend))
        .map(|n| n.id)
        .unwrap_or(NodeId(u32::MAX))
}

/// The full filtering pipeline for one node: credential check, then the
/// honeypot probe. Deterministic given the scenario.
pub fn filter_node(
    state: &mut WorldState,
    behaviors: &BehaviorTable,
    target: NodeId,
    policy: &ProbePolicy,
    registry: &BTreeSet<u32>,
    crc_mode: bool,
) -> Result<AdmissionVerdict, AdmissionError> {
    let node = state
        .node(target)
        .ok_or(AdmissionError::UnknownTarget(target))?;
    if !check_identity(node, registry, crc_mode) {
        state.log(Event::CredentialRejected { node: target });
        return Ok(AdmissionVerdict {
            node_id: target,
            verdict: Verdict::Rejected,
            evidence: vec![(state.tick(), Observation::CredentialFailure)],
        });
    }
    let (verdict, evidence) = probe_with_honeypot(state, behaviors, target, policy)?;
    Ok(AdmissionVerdict {
        node_id: target,
        verdict,
        evidence,
    })
}
