//! Confrontation pipeline: local affinity scan, team formation, energy-drain
//! attack, decoy counter-attack, and the sensing/recognition/response mode
//! machine with agent roles.
//!
//! Once a node is confirmed hostile, every friend's detector is scored
//! against the hostile's behavioral signature. The strongest detector heads
//! a team recalled from the hostile's neighborhood, and the team floods it
//! with fake packets until its energy source is spent. Optionally a decoy
//! then assumes the neutralized node's identity.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ais::{affinity, AffinityConfig, Bitstring, Detector};
use crate::world::{Event, NodeId, Position, Role, WorldState};

#[derive(Debug, Error, PartialEq)]
pub enum ResponseError {
    #[error("target {0} does not exist")]
    TargetNotFound(NodeId),
    #[error("target {0} is not hostile")]
    NotHostile(NodeId),
    #[error("no detector produced a ranking; recognition failed")]
    NoDetectors,
    #[error("node {0} has not been neutralized")]
    NotNeutralized(NodeId),
    #[error(transparent)]
    Ais(#[from] crate::ais::AisError),
}

/// System state governing when detection decisions are made.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Information sources are monitored for abnormal behavior.
    Sensing,
    /// A dangerous agent was recognized; a decision is being made.
    Recognition,
    /// The decided operation is being carried out.
    Response,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Sensing => "Sensing",
            Mode::Recognition => "Recognition",
            Mode::Response => "Response",
        }
    }
}

/// Things that move the mode machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeEvent {
    AnomalyDetected,
    PlanDecided,
    TargetNeutralized,
    Timeout,
}

/// The mode transition table; undefined pairs leave the mode unchanged.
pub fn transition_mode(mode: Mode, event: ModeEvent) -> Mode {
    match (mode, event) {
        (Mode::Sensing, ModeEvent::AnomalyDetected) => Mode::Recognition,
        (Mode::Recognition, ModeEvent::PlanDecided) => Mode::Response,
        (Mode::Recognition, ModeEvent::Timeout) => Mode::Sensing,
        (Mode::Response, ModeEvent::TargetNeutralized) => Mode::Sensing,
        (unchanged, _) => unchanged,
    }
}

/// Duty of a team member during a confrontation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentRole {
    Supervisor,
    Connector,
    Decider,
    Helper,
    Destroyer,
    Protective,
}

/// A confronting team: the strongest detector leads, recalled neighbors
/// follow. `members` is kept in ranking order with the head first.
#[derive(Debug, Clone, PartialEq)]
pub struct Team {
    pub head: NodeId,
    pub members: Vec<NodeId>,
    pub target: NodeId,
    pub formed_at: u64,
    pub recall_radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrainConfig {
    /// Energy a node loses for every fake packet it receives.
    pub drain_per_packet: f64,
    pub packets_per_member_per_tick: u32,
    pub recall_radius: f64,
    /// Energy level at or below which the target counts as neutralized.
    pub neutralized_floor: f64,
}

impl Default for DrainConfig {
    fn default() -> Self {
        Self {
            drain_per_packet: 2.0,
            packets_per_member_per_tick: 1,
            recall_radius: 0.25,
            neutralized_floor: 0.0,
        }
    }
}

/// Outcome of one confrontation.
#[derive(Debug, Clone, PartialEq)]
pub struct NeutralizationReport {
    pub target: NodeId,
    pub team: Team,
    pub ticks_to_neutralize: u64,
    pub packets_sent: u64,
    pub energy_drained: f64,
}

/// Index of a role in the behavioral-signature class vector.
fn role_class(role: Role) -> usize {
    match role {
        Role::Friend => 0,
        Role::Unknown => 1,
        Role::Hostile => 2,
        Role::Decoy => 3,
        Role::BaseStation => 4,
        Role::DatabaseNode => 5,
    }
}

const ROLE_CLASSES: usize = 6;

/// Encodes which destination classes `target` forwarded packets to, as
/// recorded in the event log, cycled out to `length` bits so the class
/// pattern recurs along the whole string.
pub fn behavior_signature(state: &WorldState, target: NodeId, length: usize) -> Bitstring {
    let mut classes = [false; ROLE_CLASSES];
    for (_, event) in state.events() {
        if let Event::PacketForwarded { src, dst, .. } = event {
            if *src == target {
                if let Some(node) = state.node(*dst) {
                    classes[role_class(node.role)] = true;
                }
            }
        }
    }
    signature_from_classes(&classes, length)
}

/// Cyclic expansion of a destination-class vector to a full-length pattern.
pub fn signature_from_classes(classes: &[bool; 6], length: usize) -> Bitstring {
    Bitstring::from_bits((0..length).map(|i| classes[i % ROLE_CLASSES]).collect())
}

/// Affinity of every friend's detector to the target's behavioral
/// signature, descending, ties by lowest id.
pub fn local_scan(
    state: &WorldState,
    target: NodeId,
    node_detectors: &BTreeMap<NodeId, Detector>,
    config: &AffinityConfig,
) -> Result<Vec<(NodeId, f64)>, ResponseError> {
    let node = state
        .node(target)
        .ok_or(ResponseError::TargetNotFound(target))?;
    if node.role != Role::Hostile {
        return Err(ResponseError::NotHostile(target));
    }
    let signature = behavior_signature(state, target, signature_length(node_detectors));
    let mut ranking = Vec::new();
    for friend in state.nodes().filter(|n| n.role == Role::Friend) {
        if let Some(detector) = node_detectors.get(&friend.id) {
            let a = affinity(&detector.pattern, &signature, config)?;
            ranking.push((friend.id, a));
        }
    }
    ranking.sort_by(|(id_a, a), (id_b, b)| b.total_cmp(a).then(id_a.cmp(id_b)));
    Ok(ranking)
}

fn signature_length(node_detectors: &BTreeMap<NodeId, Detector>) -> usize {
    node_detectors
        .values()
        .next()
        .map_or(0, |d| d.pattern.len())
}

/// Builds the confronting team: the ranking's top node leads, and every
/// friend within `recall_radius` of the target is recalled. A recall
/// message is logged per recalled member.
pub fn form_team(
    ranking: &[(NodeId, f64)],
    state: &mut WorldState,
    target: NodeId,
    recall_radius: f64,
) -> Result<Team, ResponseError> {
    let (head, _) = *ranking.first().ok_or(ResponseError::NoDetectors)?;
    let target_pos = state
        .node(target)
        .ok_or(ResponseError::TargetNotFound(target))?
        .position;
    let mut members = vec![head];
    for &(id, _) in ranking.iter() {
        if id == head {
            continue;
        }
        let Some(node) = state.node(id) else { continue };
        if node.role == Role::Friend && node.position.distance(target_pos) <= recall_radius {
            members.push(id);
        }
    }
    for &member in members.iter().skip(1) {
        state.log(Event::RecallSent {
            from: head,
            to: member,
            target,
        });
    }
    Ok(Team {
        head,
        members,
        target,
        formed_at: state.tick(),
        recall_radius,
    })
}

/// One tick of the drain attack: every member sends its volley of fake
/// packets, and the target pays the per-packet cost for each.
pub fn drain_attack_tick(
    state: &mut WorldState,
    team: &Team,
    config: &DrainConfig,
) -> Result<(), ResponseError> {
    let target = team.target;
    let energy = state
        .node(target)
        .ok_or(ResponseError::TargetNotFound(target))?
        .energy;
    debug_assert!(
        energy > config.neutralized_floor,
        "drain tick on a neutralized target"
    );
    let members = team.members.len() as u32;
    let packets = members * config.packets_per_member_per_tick;
    state.log(Event::DrainVolley {
        target,
        members,
        packets,
    });
    state
        .drain(target, packets as f64 * config.drain_per_packet)
        .map_err(|_| ResponseError::TargetNotFound(target))?;
    Ok(())
}

/// Runs the whole confrontation: scan, recall, then drain ticks until the
/// target's energy reaches the neutralized floor.
pub fn run_confrontation(
    state: &mut WorldState,
    target: NodeId,
    node_detectors: &BTreeMap<NodeId, Detector>,
    affinity_config: &AffinityConfig,
    drain_config: &DrainConfig,
) -> Result<NeutralizationReport, ResponseError> {
    let ranking = local_scan(state, target, node_detectors, affinity_config)?;
    if ranking.is_empty() {
        return Err(ResponseError::NoDetectors);
    }
    let team = form_team(&ranking, state, target, drain_config.recall_radius)?;
    let initial_energy = state.node(target).expect("checked by local_scan").energy;
    let per_tick_packets =
        team.members.len() as u64 * drain_config.packets_per_member_per_tick as u64;

    let mut ticks = 0u64;
    let mut packets = 0u64;
    while state.node(target).expect("target persists").energy > drain_config.neutralized_floor {
        state.step();
        drain_attack_tick(state, &team, drain_config)?;
        ticks += 1;
        packets += per_tick_packets;
    }
    state.log(Event::Neutralized { node: target });
    let remaining = state.node(target).expect("target persists").energy;
    Ok(NeutralizationReport {
        target,
        team,
        ticks_to_neutralize: ticks,
        packets_sent: packets,
        energy_drained: initial_energy - remaining,
    })
}

/// Spawns a decoy that shadows the neutralized node's identity: same
/// position, duplicated credential, role `Decoy`. Returns the decoy's id.
pub fn counter_attack(
    state: &mut WorldState,
    neutralized: NodeId,
    neutralized_floor: f64,
) -> Result<NodeId, ResponseError> {
    let node = state
        .node(neutralized)
        .ok_or(ResponseError::TargetNotFound(neutralized))?;
    if node.energy > neutralized_floor {
        return Err(ResponseError::NotNeutralized(neutralized));
    }
    let decoy_id = state.next_free_id();
    let mut decoy =
        crate::world::Node::new(decoy_id, Role::Decoy, node.position, 0.0, node.credential);
    decoy.shadowed_id = Some(neutralized);
    state.insert_node(decoy).expect("next_free_id is unused");
    state.log(Event::DecoySpawned {
        decoy: decoy_id,
        shadowed: neutralized,
    });
    Ok(decoy_id)
}

/// Distributes duties over a team.
///
/// The head supervises. Database-adjacent members (within the recall radius
/// of a database node) protect it regardless of rank. Of the rest, the
/// highest-ranked becomes the decider and the others alternate destroyer and
/// helper. If the network has a base station, the destroyer/helper member
/// nearest to it becomes the connector.
pub fn assign_roles(team: &Team, state: &WorldState) -> BTreeMap<NodeId, AgentRole> {
    let mut roles = BTreeMap::new();
    roles.insert(team.head, AgentRole::Supervisor);

    let database_positions: Vec<Position> = state
        .nodes()
        .filter(|n| n.role == Role::DatabaseNode)
        .map(|n| n.position)
        .collect();
    let near_database = |id: NodeId| {
        state.node(id).is_some_and(|n| {
            database_positions
                .iter()
                .any(|db| n.position.distance(*db) <= team.recall_radius)
        })
    };

    let mut rank_roles = Vec::new();
    for &member in team.members.iter().skip(1) {
        if near_database(member) {
            roles.insert(member, AgentRole::Protective);
        } else {
            rank_roles.push(member);
        }
    }
    for (i, &member) in rank_roles.iter().enumerate() {
        let role = match i {
            0 => AgentRole::Decider,
            _ if i % 2 == 1 => AgentRole::Destroyer,
            _ => AgentRole::Helper,
        };
        roles.insert(member, role);
    }

    let base = state
        .nodes()
        .find(|n| n.role == Role::BaseStation)
        .map(|n| n.position);
    if let Some(base_pos) = base {
        let connector = roles
            .iter()
            .filter(|(_, r)| matches!(r, AgentRole::Destroyer | AgentRole::Helper))
            .filter_map(|(&id, _)| state.node(id).map(|n| (id, n.position.distance(base_pos))))
            .min_by(|(id_a, a), (id_b, b)| a.total_cmp(b).then(id_a.cmp(id_b)))
            .map(|(id, _)| id);
        if let Some(id) = connector {
            roles.insert(id, AgentRole::Connector);
        }
    }
    roles
}
