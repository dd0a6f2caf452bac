//! The end-to-end event loop: sense → track → admit → detect → respond.
//!
//! Per tick the world steps, every still-unknown node is tracked from the
//! binary sensor readings, and suspicious or newly-in-range unknowns are
//! probed. Hostile verdicts move the mode machine through recognition (the
//! detector set is consulted) into response (the confrontation drains the
//! target), then back to sensing. Everything is driven by one seeded RNG,
//! so a scenario run is a pure function of its file.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::admission::{
    filter_node, scan_candidates, BehaviorTable, PacketScript, ProbePolicy, Verdict,
};
use crate::ais::{negative_selection, Detector};
use crate::response::{
    behavior_signature, counter_attack, run_confrontation, signature_from_classes, transition_mode,
    Mode, ModeEvent,
};
use crate::tracking::{
    classify_motion, estimate_position, reweigh_particles, sense, Motion, Particle, ProximitySign,
    TrackingConfig,
};
use crate::world::{Credential, Event, Node, NodeId, Position, Role, WorldState};

use super::metrics::{compute_summary, MetricsRow, RunReport};
use super::scenario::{HarnessError, ScenarioConfig, ScriptSpec};

/// Tracking state for one unknown node.
struct Track {
    particles: Vec<Particle>,
    last_position: Position,
    last_readings: Option<Vec<ProximitySign>>,
    distance_window: VecDeque<f64>,
}

struct Runner<'a> {
    config: &'a ScenarioConfig,
    state: WorldState,
    behaviors: BehaviorTable,
    registry: BTreeSet<u32>,
    policy: ProbePolicy,
    rng: ChaCha8Rng,
    detectors: Vec<Detector>,
    node_detectors: BTreeMap<NodeId, Detector>,
    tracks: BTreeMap<NodeId, Track>,
    mode: Mode,
    rows: Vec<MetricsRow>,
    verdicts: Vec<crate::admission::AdmissionVerdict>,
    neutralizations: Vec<crate::response::NeutralizationReport>,
    events_seen: usize,
    last_probe: BTreeMap<NodeId, u64>,
    verdicted: BTreeMap<NodeId, Verdict>,
}

/// Runs a validated scenario to completion.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunReport, HarnessError> {
    let mut runner = Runner::build(config)?;
    runner.run();
    let summary = compute_summary(&runner.rows);
    Ok(RunReport {
        rows: runner.rows,
        verdicts: runner.verdicts,
        neutralizations: runner.neutralizations,
        summary,
    })
}

impl<'a> Runner<'a> {
    fn build(config: &'a ScenarioConfig) -> Result<Runner<'a>, HarnessError> {
        let mut state = WorldState::new(config.seed);
        let mut behaviors = BehaviorTable::new();
        for spec in &config.nodes {
            let credential_id = spec.credential_id.unwrap_or(spec.id);
            let credential = Credential::new(credential_id).expect("validated id width");
            let credential = if spec.corrupt_parity {
                Credential::from_parts(
                    credential.id_bits(),
                    !credential.parity_bit(),
                    credential.crc8(),
                )
            } else {
                credential
            };
            let mut node = Node::new(
                NodeId(spec.id),
                spec.role.into(),
                Position::new(spec.position[0], spec.position[1]),
                spec.energy,
                credential,
            );
            node.trajectory = spec
                .trajectory
                .as_ref()
                .map(|t| t.iter().map(|p| Position::new(p[0], p[1])).collect());
            state.insert_node(node).expect("validated unique ids");

            match &spec.script {
                Some(ScriptSpec::Forward { forward_to, delay }) => {
                    behaviors.insert(
                        NodeId(spec.id),
                        PacketScript::ForwardTo {
                            dst: NodeId(*forward_to),
                            delay: *delay,
                        },
                    );
                }
                Some(ScriptSpec::Named(_)) | None => {
                    behaviors.insert(NodeId(spec.id), PacketScript::Drop);
                }
            }
        }

        let policy = ProbePolicy {
            probe_packet_count: config.admission.probe_packet_count,
            observation_window: config.admission.observation_window,
            database_node_ids: config
                .admission
                .database_nodes
                .iter()
                .map(|&id| NodeId(id))
                .collect(),
        };
        let registry: BTreeSet<u32> = config.friendly_ids.iter().copied().collect();

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

        // Self set: the signatures of known-benign behavior — silence and
        // forwarding to the database set.
        let length = config.ais.bit_length;
        let self_set = vec![
            signature_from_classes(&[false; 6], length),
            signature_from_classes(&[false, false, false, false, false, true], length),
        ];
        let affinity_config = config.ais.affinity_config();
        let detectors = negative_selection(
            &self_set,
            length,
            config.ais.detector_count,
            &affinity_config,
            config.ais.max_attempts,
            &mut rng,
        )
        .expect("self set lengths are uniform by construction");

        // Each friend carries one detector, dealt round-robin in id order.
        let mut node_detectors = BTreeMap::new();
        if !detectors.is_empty() {
            let friends: Vec<NodeId> = state
                .nodes()
                .filter(|n| n.role == Role::Friend)
                .map(|n| n.id)
                .collect();
            for (i, friend) in friends.into_iter().enumerate() {
                node_detectors.insert(friend, detectors[i % detectors.len()].clone());
            }
        }

        let mut runner = Runner {
            config,
            state,
            behaviors,
            registry,
            policy,
            rng,
            detectors,
            node_detectors,
            tracks: BTreeMap::new(),
            mode: Mode::Sensing,
            rows: Vec::new(),
            verdicts: Vec::new(),
            neutralizations: Vec::new(),
            events_seen: 0,
            last_probe: BTreeMap::new(),
            verdicted: BTreeMap::new(),
        };
        runner.init_tracks_and_ground_truth();
        Ok(runner)
    }

    fn init_tracks_and_ground_truth(&mut self) {
        let unknowns: Vec<(NodeId, Position)> = self
            .state
            .nodes()
            .filter(|n| n.role == Role::Unknown)
            .map(|n| (n.id, n.position))
            .collect();
        for (id, position) in unknowns {
            let truth = match self.behaviors.get(&id) {
                Some(PacketScript::ForwardTo { dst, .. })
                    if !self.policy.database_node_ids.contains(dst) =>
                {
                    "Hostile"
                }
                _ => "Benign",
            };
            let mut row = MetricsRow::new(0, id, "script", self.mode);
            row.verdict = truth.to_string();
            self.rows.push(row);

            let particles = (0..self.config.tracking.particle_count)
                .map(|_| {
                    let p = self.random_position();
                    Particle::new(p, p, 1.0 / self.config.tracking.particle_count as f64)
                })
                .collect();
            self.tracks.insert(
                id,
                Track {
                    particles,
                    last_position: position,
                    last_readings: None,
                    distance_window: VecDeque::new(),
                },
            );
        }
    }

    fn random_position(&mut self) -> Position {
        let area = self.config.area;
        Position::new(
            self.rng.gen_range(area.min_x..=area.max_x),
            self.rng.gen_range(area.min_y..=area.max_y),
        )
    }

    fn run(&mut self) {
        while self.state.tick() < self.config.max_ticks {
            self.state.step();
            self.drain_world_events();
            let suspicious = self.track_unknowns();
            let candidates = self.collect_candidates(suspicious);
            for target in candidates {
                if self.state.tick() >= self.config.max_ticks {
                    break;
                }
                self.process_candidate(target);
            }
        }
        self.drain_world_events();
    }

    /// Tracks every still-unknown node one tick; returns those whose motion
    /// classified as suspicious.
    fn track_unknowns(&mut self) -> Vec<NodeId> {
        let tracking = &self.config.tracking;
        let sensors: Vec<Node> = self
            .state
            .nodes()
            .filter(|n| matches!(n.role, Role::Friend | Role::BaseStation))
            .cloned()
            .collect();
        let sensor_positions: Vec<Position> = sensors.iter().map(|s| s.position).collect();
        let centroid = centroid(&sensor_positions);

        let targets: Vec<NodeId> = self
            .tracks
            .keys()
            .copied()
            .filter(|id| {
                self.state
                    .node(*id)
                    .is_some_and(|n| n.role == Role::Unknown)
            })
            .collect();
        let mut suspicious = Vec::new();
        for id in targets {
            let Some(node) = self.state.node(id) else {
                continue;
            };
            let current = node.position;
            let tick = self.state.tick();
            let track = self.tracks.get_mut(&id).expect("track exists");
            let previous = track.last_position;

            let readings: Vec<ProximitySign> = sensors
                .iter()
                .map(|s| {
                    sense(
                        s,
                        tick,
                        previous,
                        current,
                        tracking.noise_flip_prob,
                        &mut self.rng,
                    )
                    .sign
                })
                .collect();

            if let Some(prev_readings) = track.last_readings.take() {
                // Particles take a bounded random walk, then the readings
                // reweigh them.
                let area = self.config.area;
                for p in &mut track.particles {
                    p.prev_position = p.curr_position;
                    p.curr_position = Position::new(
                        (p.curr_position.x
                            + self.rng.gen_range(-tracking.walk_step..=tracking.walk_step))
                        .clamp(area.min_x, area.max_x),
                        (p.curr_position.y
                            + self.rng.gen_range(-tracking.walk_step..=tracking.walk_step))
                        .clamp(area.min_y, area.max_y),
                    );
                }
                let config = TrackingConfig {
                    threshold: tracking.threshold,
                    floor_weight: tracking.floor_weight,
                    noise_flip_prob: tracking.noise_flip_prob,
                    particle_count: tracking.particle_count,
                };
                if !sensor_positions.is_empty() || !track.particles.is_empty() {
                    if let Ok(reweighed) = reweigh_particles(
                        &sensor_positions,
                        &prev_readings,
                        &readings,
                        &track.particles,
                        &config,
                    ) {
                        track.particles = reweighed;
                        if let (Ok(estimate), Some(c)) =
                            (estimate_position(&track.particles), centroid)
                        {
                            track.distance_window.push_back(estimate.distance(c));
                            while track.distance_window.len() > tracking.window {
                                track.distance_window.pop_front();
                            }
                        }
                    }
                }
            }
            track.last_readings = Some(readings);
            track.last_position = current;

            if track.distance_window.len() >= 3 {
                let window: Vec<f64> = track.distance_window.iter().copied().collect();
                if classify_motion(&window, tracking.motion_tolerance) == Ok(Motion::Suspicious) {
                    suspicious.push(id);
                }
            }
        }
        suspicious
    }

    /// Probe queue for this tick: suspicious or in-range unknowns that have
    /// no verdict yet, plus admitted friends due for a periodic re-probe.
    fn collect_candidates(&mut self, suspicious: Vec<NodeId>) -> Vec<NodeId> {
        let mut queue = BTreeSet::new();
        for id in scan_candidates(&self.state, self.config.admission.scan_radius) {
            if !self.verdicted.contains_key(&id) {
                queue.insert(id);
            }
        }
        for id in suspicious {
            if !self.verdicted.contains_key(&id) {
                queue.insert(id);
            }
        }
        let tick = self.state.tick();
        for (&id, &verdict) in &self.verdicted {
            if verdict == Verdict::Friend
                && self
                    .last_probe
                    .get(&id)
                    .is_some_and(|&t| tick >= t + self.config.admission.reprobe_interval)
                && self.state.node(id).is_some()
            {
                queue.insert(id);
            }
        }
        queue.into_iter().collect()
    }

    fn process_candidate(&mut self, target: NodeId) {
        self.last_probe.insert(target, self.state.tick());
        let verdict = match filter_node(
            &mut self.state,
            &self.behaviors,
            target,
            &self.policy,
            &self.registry,
            self.config.admission.crc_mode,
        ) {
            Ok(v) => v,
            Err(_) => return, // candidate disappeared; nothing to record
        };
        self.drain_world_events();

        let mut row = MetricsRow::new(self.state.tick(), target, "verdict", self.mode);
        row.verdict = verdict.verdict.name().to_string();
        self.rows.push(row);
        self.verdicted.insert(target, verdict.verdict);

        match verdict.verdict {
            Verdict::Rejected => {}
            Verdict::Friend => {
                self.state
                    .set_role(target, Role::Friend)
                    .expect("probed node exists");
            }
            Verdict::Hostile => {
                self.state
                    .set_role(target, Role::Hostile)
                    .expect("probed node exists");
                self.handle_hostile(target);
            }
        }
        self.verdicts.push(verdict);
    }

    fn set_mode(&mut self, event: ModeEvent, about: NodeId) {
        let next = transition_mode(self.mode, event);
        if next != self.mode {
            self.mode = next;
            self.rows
                .push(MetricsRow::new(self.state.tick(), about, "mode", self.mode));
        }
    }

    fn handle_hostile(&mut self, target: NodeId) {
        self.set_mode(ModeEvent::AnomalyDetected, target);

        let signature = behavior_signature(&self.state, target, self.config.ais.bit_length);
        let affinity_config = self.config.ais.affinity_config();
        let detection = crate::ais::detect(&mut self.detectors, &signature, &affinity_config)
            .expect("detector lengths are uniform");
        let Some((_, affinity)) = detection else {
            // Recognition failed: no detector covers this signature.
            self.set_mode(ModeEvent::Timeout, target);
            return;
        };
        let mut row = MetricsRow::new(self.state.tick(), target, "detect", self.mode);
        row.affinity = Some(affinity);
        self.rows.push(row);

        self.set_mode(ModeEvent::PlanDecided, target);
        self.rows.push(MetricsRow::new(
            self.state.tick(),
            target,
            "confront_start",
            self.mode,
        ));
        let outcome = run_confrontation(
            &mut self.state,
            target,
            &self.node_detectors,
            &affinity_config,
            &self.config.response.drain_config(),
        );
        self.drain_world_events();
        match outcome {
            Ok(report) => {
                if self.config.response.counter_attack {
                    counter_attack(
                        &mut self.state,
                        target,
                        self.config.response.neutralized_floor,
                    )
                    .expect("target was just neutralized");
                    self.drain_world_events();
                }
                self.neutralizations.push(report);
                self.set_mode(ModeEvent::TargetNeutralized, target);
            }
            Err(_) => {
                // No team could form; response never started.
                self.mode = Mode::Recognition;
                self.set_mode(ModeEvent::Timeout, target);
            }
        }
    }

    /// Mirrors new world events into metrics rows.
    fn drain_world_events(&mut self) {
        let events: Vec<(u64, Event)> = self.state.events()[self.events_seen..].to_vec();
        self.events_seen += events.len();
        for (tick, event) in events {
            let row = match event {
                Event::HoneypotInjected { dst, .. } => {
                    Some(MetricsRow::new(tick, dst, "honeypot", self.mode))
                }
                Event::PacketForwarded { src, .. } => {
                    Some(MetricsRow::new(tick, src, "forward", self.mode))
                }
                Event::CredentialRejected { node } => {
                    Some(MetricsRow::new(tick, node, "credential_reject", self.mode))
                }
                Event::RecallSent { to, .. } => {
                    Some(MetricsRow::new(tick, to, "recall", self.mode))
                }
                Event::EnergyDrained { node, amount } => {
                    let mut row = MetricsRow::new(tick, node, "drain", self.mode);
                    row.energy = Some(amount);
                    Some(row)
                }
                Event::Neutralized { node } => {
                    let mut row = MetricsRow::new(tick, node, "neutralized", self.mode);
                    row.energy = self.state.node(node).map(|n| n.energy);
                    Some(row)
                }
                Event::DecoySpawned { decoy, .. } => {
                    Some(MetricsRow::new(tick, decoy, "decoy", self.mode))
                }
                Event::Stepped | Event::DrainVolley { .. } => None,
            };
            if let Some(row) = row {
                self.rows.push(row);
            }
        }
    }
}

fn centroid(positions: &[Position]) -> Option<Position> {
    if positions.is_empty() {
        return None;
    }
    let n = positions.len() as f64;
    Some(Position::new(
        positions.iter().map(|p| p.x).sum::<f64>() / n,
        positions.iter().map(|p| p.y).sum::<f64>() / n,
    ))
}
