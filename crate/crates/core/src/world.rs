//! Network state: nodes, positions, energy, credentials, and the tick loop.
//!
//! `WorldState` owns everything the other modules act on. All mutation goes
//! through its methods so the event log stays a faithful, ordered record of
//! what happened; two runs from the same scenario and seed produce identical
//! states and logs.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Width of the credential identifier field in bits.
pub const ID_BITS_WIDTH: u32 = 18;

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("credential id {0:#x} does not fit in {ID_BITS_WIDTH} bits")]
    IdOutOfRange(u32),
    #[error("drain amount {0} is negative")]
    NegativeDrain(f64),
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
}

/// Identifier of a node within one `WorldState`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A point in the operational area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Euclidean distance to `other`.
    pub fn distance(self, other: Position) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// What a node is to the defending network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Friend,
    Unknown,
    Hostile,
    Decoy,
    BaseStation,
    DatabaseNode,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Friend => "Friend",
            Role::Unknown => "Unknown",
            Role::Hostile => "Hostile",
            Role::Decoy => "Decoy",
            Role::BaseStation => "BaseStation",
            Role::DatabaseNode => "DatabaseNode",
        }
    }
}

/// 19-bit admission frame: an 18-bit identifier plus one even-parity bit.
/// The CRC-8 checksum rides in a separate field and is only checked when
/// the caller asks for CRC mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Credential {
    id_bits: u32,
    parity_bit: bool,
    crc8: u8,
}

/// Bitwise CRC-8, polynomial 0x07, init 0x00, no reflection, no final xor.
fn crc8_atm(data: &[u8]) -> u8 {
    let mut crc: u8 = 0;
    for &byte in data {
        crc ^= byte;
        for _ in 0..8 {
            crc = if crc & 0x80 != 0 {
                (crc << 1) ^ 0x07
            } else {
                crc << 1
            };
        }
    }
    crc
}

impl Credential {
    /// Builds a well-formed credential for `id_bits`.
    ///
    /// The parity bit makes the total popcount of the 19-bit frame even; the
    /// CRC-8 covers the identifier packed big-endian into three bytes.
    pub fn new(id_bits: u32) -> Result<Self, WorldError> {
        if id_bits >= 1 << ID_BITS_WIDTH {
            return Err(WorldError::IdOutOfRange(id_bits));
        }
        let bytes = [(id_bits >> 16) as u8, (id_bits >> 8) as u8, id_bits as u8];
        Ok(Self {
            id_bits,
            parity_bit: id_bits.count_ones() % 2 == 1,
            crc8: crc8_atm(&bytes),
        })
    }

    /// Assembles a credential from raw parts without any well-formedness
    /// check. Useful for modelling corrupted or forged frames.
    pub fn from_parts(id_bits: u32, parity_bit: bool, crc8: u8) -> Self {
        Self {
            id_bits,
            parity_bit,
            crc8,
        }
    }

    pub fn id_bits(self) -> u32 {
        self.id_bits
    }

    pub fn parity_bit(self) -> bool {
        self.parity_bit
    }

    pub fn crc8(self) -> u8 {
        self.crc8
    }

    /// True iff the frame is well-formed: the identifier fits in 18 bits and
    /// the parity bit checks out (and the CRC-8 matches when `crc_mode` is
    /// on). Malformed frames are simply invalid, never an error.
    pub fn verify(self, crc_mode: bool) -> bool {
        if self.id_bits >= 1 << ID_BITS_WIDTH {
            return false;
        }
        let parity_ok = self.parity_bit == (self.id_bits.count_ones() % 2 == 1);
        if !parity_ok {
            return false;
        }
        if crc_mode {
            let bytes = [
                (self.id_bits >> 16) as u8,
                (self.id_bits >> 8) as u8,
                self.id_bits as u8,
            ];
            return self.crc8 == crc8_atm(&bytes);
        }
        true
    }
}

/// One sensor-network participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub role: Role,
    pub position: Position,
    /// Remaining energy in abstract units; never negative.
    pub energy: f64,
    pub credential: Credential,
    /// Scripted positions, one per tick; the node holds its last position
    /// once the script runs out.
    pub trajectory: Option<Vec<Position>>,
    /// For decoys: the neutralized node whose identity this one shadows.
    pub shadowed_id: Option<NodeId>,
}

impl Node {
    pub fn new(
        id: NodeId,
        role: Role,
        position: Position,
        energy: f64,
        credential: Credential,
    ) -> Self {
        Self {
            id,
            role,
            position,
            energy,
            credential,
            trajectory: None,
            shadowed_id: None,
        }
    }

    /// Returns a copy with `amount` removed from the energy store, clamped
    /// at zero. Everything else is untouched.
    pub fn drained(&self, amount: f64) -> Result<Node, WorldError> {
        if amount < 0.0 {
            return Err(WorldError::NegativeDrain(amount));
        }
        let mut out = self.clone();
        out.energy = (self.energy - amount).max(0.0);
        Ok(out)
    }
}

/// Everything the simulator records about what happened, keyed by tick in
/// the world's event log.
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Stepped,
    CredentialRejected {
        node: NodeId,
    },
    HoneypotInjected {
        src: NodeId,
        dst: NodeId,
        tag: u64,
    },
    PacketForwarded {
        src: NodeId,
        dst: NodeId,
        tag: Option<u64>,
    },
    RecallSent {
        from: NodeId,
        to: NodeId,
        target: NodeId,
    },
    DrainVolley {
        target: NodeId,
        members: u32,
        packets: u32,
    },
    EnergyDrained {
        node: NodeId,
        amount: f64,
    },
    Neutralized {
        node: NodeId,
    },
    DecoySpawned {
        decoy: NodeId,
        shadowed: NodeId,
    },
}

/// The simulated network at one instant, plus its full history.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    tick: u64,
    nodes: BTreeMap<NodeId, Node>,
    rng_seed: u64,
    event_log: Vec<(u64, Event)>,
    next_tag: u64,
}

impl WorldState {
    pub fn new(rng_seed: u64) -> Self {
        Self {
            tick: 0,
            nodes: BTreeMap::new(),
            rng_seed,
            event_log: Vec::new(),
            next_tag: 0,
        }
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn insert_node(&mut self, node: Node) -> Result<(), WorldError> {
        if self.nodes.contains_key(&node.id) {
            return Err(WorldError::DuplicateNode(node.id));
        }
        self.nodes.insert(node.id, node);
        Ok(())
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(&id)
    }

    /// Nodes in ascending id order.
    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Smallest id not yet taken (one past the current maximum).
    pub fn next_free_id(&self) -> NodeId {
        NodeId(self.nodes.keys().next_back().map_or(0, |id| id.0 + 1))
    }

    /// Advances the world one tick: mobile nodes move to their trajectory
    /// entry for the new tick (or hold position), energies are untouched.
    pub fn step(&mut self) {
        self.tick += 1;
        let tick = self.tick;
        for node in self.nodes.values_mut() {
            if let Some(trajectory) = &node.trajectory {
                if let Some(&pos) = trajectory.get(tick as usize) {
                    node.position = pos;
                }
            }
        }
        self.event_log.push((tick, Event::Stepped));
    }

    /// Appends an event at the current tick.
    pub fn log(&mut self, event: Event) {
        self.event_log.push((self.tick, event));
    }

    pub fn events(&self) -> &[(u64, Event)] {
        &self.event_log
    }

    /// Fresh unique token for a honeypot packet.
    pub fn mint_honeypot_tag(&mut self) -> u64 {
        let tag = self.next_tag;
        self.next_tag += 1;
        tag
    }

    /// Drains `amount` from a node's energy store, clamped at zero, and logs
    /// it. Returns the remaining energy.
    pub fn drain(&mut self, id: NodeId, amount: f64) -> Result<f64, WorldError> {
        let node = self.nodes.get(&id).ok_or(WorldError::UnknownNode(id))?;
        let drained = node.drained(amount)?;
        let remaining = drained.energy;
        self.nodes.insert(id, drained);
        self.event_log
            .push((self.tick, Event::EnergyDrained { node: id, amount }));
        Ok(remaining)
    }

    pub fn set_role(&mut self, id: NodeId, role: Role) -> Result<(), WorldError> {
        let node = self.nodes.get_mut(&id).ok_or(WorldError::UnknownNode(id))?;
        node.role = role;
        Ok(())
    }
}
