//! Declarative experiment input: TOML scenario files with fail-fast
//! validation. Unknown keys are errors, and every invariant violation is
//! reported with its field path in one pass.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ais::{AffinityConfig, ClonalParams, MatchScheme};
use crate::world::{Role, ID_BITS_WIDTH};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid scenario {path}:\n  {}", violations.join("\n  "))]
    Validation {
        path: String,
        violations: Vec<String>,
    },
    #[error("bad metrics file {path}: line {line}: {message}")]
    BadCsv {
        path: String,
        line: usize,
        message: String,
    },
}

/// Rectangle the scenario plays out in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaBounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Default for AreaBounds {
    fn default() -> Self {
        Self {
            min_x: 0.0,
            min_y: 0.0,
            max_x: 1.0,
            max_y: 1.0,
        }
    }
}

impl AreaBounds {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoleSpec {
    Friend,
    Unknown,
    Hostile,
    Decoy,
    BaseStation,
    DatabaseNode,
}

impl From<RoleSpec> for Role {
    fn from(spec: RoleSpec) -> Role {
        match spec {
            RoleSpec::Friend => Role::Friend,
            RoleSpec::Unknown => Role::Unknown,
            RoleSpec::Hostile => Role::Hostile,
            RoleSpec::Decoy => Role::Decoy,
            RoleSpec::BaseStation => Role::BaseStation,
            RoleSpec::DatabaseNode => Role::DatabaseNode,
        }
    }
}

/// Scripted packet behavior: the literal string `"drop"` or a
/// `{ forward_to = <id>, delay = <ticks> }` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptSpec {
    Named(String),
    Forward {
        forward_to: u32,
        #[serde(default)]
        delay: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: u32,
    pub role: RoleSpec,
    /// Initial position as `[x, y]`.
    pub position: [f64; 2],
    #[serde(default = "default_energy")]
    pub energy: f64,
    /// 18-bit credential identifier; defaults to the node id.
    #[serde(default)]
    pub credential_id: Option<u32>,
    /// Flip the parity bit so the credential check fails.
    #[serde(default)]
    pub corrupt_parity: bool,
    #[serde(default)]
    pub script: Option<ScriptSpec>,
    /// Position per tick; the node holds its last scripted position after.
    #[serde(default)]
    pub trajectory: Option<Vec<[f64; 2]>>,
}

fn default_energy() -> f64 {
    100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackingBlock {
    pub threshold: f64,
    pub floor_weight: f64,
    pub noise_flip_prob: f64,
    pub particle_count: usize,
    /// Tolerance for the motion classifier.
    pub motion_tolerance: f64,
    /// Per-axis particle random-walk step between ticks.
    pub walk_step: f64,
    /// Length of the estimated-distance window fed to the classifier.
    pub window: usize,
}

impl Default for TrackingBlock {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            floor_weight: 0.01,
            noise_flip_prob: 0.05,
            particle_count: 500,
            motion_tolerance: 0.0,
            walk_step: 0.05,
            window: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdmissionBlock {
    /// Unknown nodes within this distance of a friend or base station are
    /// scanned as admission candidates.
    pub scan_radius: f64,
    pub probe_packet_count: u32,
    pub observation_window: u64,
    pub database_nodes: Vec<u32>,
    /// Admitted friends are probed again every this many ticks.
    pub reprobe_interval: u64,
    pub crc_mode: bool,
}

impl Default for AdmissionBlock {
    fn default() -> Self {
        Self {
            scan_radius: 0.3,
            probe_packet_count: 3,
            observation_window: 10,
            database_nodes: Vec::new(),
            reprobe_interval: 50,
            crc_mode: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AisBlock {
    pub bit_length: usize,
    /// `"r-contiguous"` or `"hamming"`.
    pub scheme: String,
    pub r: usize,
    pub recognition_threshold: f64,
    pub detector_count: usize,
    pub max_attempts: usize,
}

impl Default for AisBlock {
    fn default() -> Self {
        Self {
            bit_length: 32,
            scheme: "r-contiguous".to_string(),
            r: 8,
            recognition_threshold: 0.8,
            detector_count: 60,
            max_attempts: 50_000,
        }
    }
}

impl AisBlock {
    pub fn affinity_config(&self) -> AffinityConfig {
        AffinityConfig {
            scheme: if self.scheme == "hamming" {
                MatchScheme::Hamming
            } else {
                MatchScheme::RContiguous
            },
            r: self.r,
            recognition_threshold: self.recognition_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResponseBlock {
    pub drain_per_packet: f64,
    pub packets_per_member_per_tick: u32,
    pub recall_radius: f64,
    pub neutralized_floor: f64,
    pub counter_attack: bool,
}

impl Default for ResponseBlock {
    fn default() -> Self {
        Self {
            drain_per_packet: 2.0,
            packets_per_member_per_tick: 1,
            recall_radius: 0.25,
            neutralized_floor: 0.0,
            counter_attack: false,
        }
    }
}

impl ResponseBlock {
    pub fn drain_config(&self) -> crate::response::DrainConfig {
        crate::response::DrainConfig {
            drain_per_packet: self.drain_per_packet,
            packets_per_member_per_tick: self.packets_per_member_per_tick,
            recall_radius: self.recall_radius,
            neutralized_floor: self.neutralized_floor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerBlock {
    pub population: usize,
    pub select: usize,
    pub clone_budget: usize,
    pub maturity: f64,
    pub replace_worst: usize,
    pub generations: usize,
}

impl Default for OptimizerBlock {
    fn default() -> Self {
        Self {
            population: 50,
            select: 20,
            clone_budget: 20,
            maturity: 80.0,
            replace_worst: 5,
            generations: 600,
        }
    }
}

impl OptimizerBlock {
    pub fn clonal_params(&self) -> ClonalParams {
        ClonalParams {
            population_size: self.population,
            select_count: self.select,
            clone_budget: self.clone_budget,
            maturity_level: self.maturity,
            replace_worst_n: self.replace_worst,
            max_generations: self.generations,
        }
    }
}

/// The whole experiment declaration. `seed` is mandatory; everything else
/// has documented defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    #[serde(default = "default_max_ticks")]
    pub max_ticks: u64,
    #[serde(default)]
    pub area: AreaBounds,
    #[serde(default)]
    pub friendly_ids: Vec<u32>,
    #[serde(default)]
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub tracking: TrackingBlock,
    #[serde(default)]
    pub admission: AdmissionBlock,
    #[serde(default)]
    pub ais: AisBlock,
    #[serde(default)]
    pub response: ResponseBlock,
    #[serde(default)]
    pub optimizer: OptimizerBlock,
}

fn default_max_ticks() -> u64 {
    100
}

impl ScenarioConfig {
    /// Collects every invariant violation as a `field path: problem` line.
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.max_ticks == 0 {
            v.push("max_ticks: must be at least 1".to_string());
        }
        if self.area.min_x >= self.area.max_x || self.area.min_y >= self.area.max_y {
            v.push("area: min bounds must be below max bounds".to_string());
        }
        for (i, id) in self.friendly_ids.iter().enumerate() {
            if *id >= 1 << ID_BITS_WIDTH {
                v.push(format!(
                    "friendly_ids[{i}]: {id} does not fit in {ID_BITS_WIDTH} bits"
                ));
            }
        }

        let mut ids = BTreeSet::new();
        for (i, node) in self.nodes.iter().enumerate() {
            let path = format!("nodes[{i}] (id {})", node.id);
            if !ids.insert(node.id) {
                v.push(format!("{path}: duplicate id"));
            }
            if !self.area.contains(node.position[0], node.position[1]) {
                v.push(format!("{path}: position outside the area bounds"));
            }
            if node.energy < 0.0 {
                v.push(format!("{path}: energy must be non-negative"));
            }
            let credential_id = node.credential_id.unwrap_or(node.id);
            if credential_id >= 1 << ID_BITS_WIDTH {
                v.push(format!(
                    "{path}: credential id {credential_id} does not fit in {ID_BITS_WIDTH} bits"
                ));
            }
            if let Some(trajectory) = &node.trajectory {
                for (k, p) in trajectory.iter().enumerate() {
                    if !self.area.contains(p[0], p[1]) {
                        v.push(format!("{path}: trajectory[{k}] outside the area bounds"));
                    }
                }
            }
            match &node.script {
                Some(ScriptSpec::Named(name)) if name != "drop" => {
                    v.push(format!(
                        "{path}: unknown script {name:?} (expected \"drop\" or a forward table)"
                    ));
                }
                Some(ScriptSpec::Forward { forward_to, .. })
                    if !self.nodes.iter().any(|n| n.id == *forward_to) =>
                {
                    v.push(format!(
                        "{path}: script forwards to undefined node id {forward_to}"
                    ));
                }
                _ => {}
            }
        }

        for (i, db) in self.admission.database_nodes.iter().enumerate() {
            if !self.nodes.iter().any(|n| n.id == *db) {
                v.push(format!(
                    "admission.database_nodes[{i}]: undefined node id {db}"
                ));
            }
        }
        if self.admission.scan_radius <= 0.0 {
            v.push("admission.scan_radius: must be positive".to_string());
        }
        if self.admission.probe_packet_count == 0 {
            v.push("admission.probe_packet_count: must be at least 1".to_string());
        }
        if self.admission.observation_window == 0 {
            v.push("admission.observation_window: must be at least 1".to_string());
        }
        if self.admission.reprobe_interval == 0 {
            v.push("admission.reprobe_interval: must be at least 1".to_string());
        }

        let t = &self.tracking;
        if !(t.threshold > 0.0 && t.threshold < 1.0) {
            v.push("tracking.threshold: must be inside (0, 1)".to_string());
        }
        if t.floor_weight <= 0.0 || t.floor_weight > t.threshold {
            v.push("tracking.floor_weight: must be positive and at most the threshold".to_string());
        }
        if !(0.0..0.5).contains(&t.noise_flip_prob) {
            v.push("tracking.noise_flip_prob: must be in [0, 0.5)".to_string());
        }
        if t.particle_count == 0 {
            v.push("tracking.particle_count: must be at least 1".to_string());
        }
        if t.walk_step <= 0.0 {
            v.push("tracking.walk_step: must be positive".to_string());
        }
        if t.window < 3 {
            v.push("tracking.window: must be at least 3".to_string());
        }
        if t.motion_tolerance < 0.0 {
            v.push("tracking.motion_tolerance: must be non-negative".to_string());
        }

        let a = &self.ais;
        if a.bit_length == 0 {
            v.push("ais.bit_length: must be at least 1".to_string());
        }
        if a.scheme != "r-contiguous" && a.scheme != "hamming" {
            v.push(format!("ais.scheme: unknown scheme {:?}", a.scheme));
        }
        if a.r == 0 || a.r > a.bit_length {
            v.push("ais.r: must be in 1..=bit_length".to_string());
        }
        if !(a.recognition_threshold > 0.0 && a.recognition_threshold <= 1.0) {
            v.push("ais.recognition_threshold: must be inside (0, 1]".to_string());
        }
        if a.detector_count == 0 {
            v.push("ais.detector_count: must be at least 1".to_string());
        }
        if a.max_attempts == 0 {
            v.push("ais.max_attempts: must be at least 1".to_string());
        }

        let r = &self.response;
        if r.drain_per_packet <= 0.0 {
            v.push("response.drain_per_packet: must be positive".to_string());
        }
        if r.packets_per_member_per_tick == 0 {
            v.push("response.packets_per_member_per_tick: must be at least 1".to_string());
        }
        if r.recall_radius <= 0.0 {
            v.push("response.recall_radius: must be positive".to_string());
        }
        if r.neutralized_floor < 0.0 {
            v.push("response.neutralized_floor: must be non-negative".to_string());
        }

        if let Err(problem) = self.optimizer.clonal_params().validate() {
            v.push(format!("optimizer: {problem}"));
        }
        v
    }
}

/// Parses and validates a scenario from TOML text; `origin` names the
/// source in errors.
pub fn parse_scenario(text: &str, origin: &str) -> Result<ScenarioConfig, HarnessError> {
    let config: ScenarioConfig = toml::from_str(text).map_err(|e| HarnessError::Parse {
        path: origin.to_string(),
        message: e.to_string(),
    })?;
    let violations = config.validate();
    if !violations.is_empty() {
        return Err(HarnessError::Validation {
            path: origin.to_string(),
            violations,
        });
    }
    Ok(config)
}

/// Loads a scenario file from disk.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text, &path.display().to_string())
}
