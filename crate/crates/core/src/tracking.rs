//! Binary-proximity target tracking.
//!
//! Each sensor reports a single bit per tick: whether the target got closer
//! or farther since the last sample. Candidate (previous, current) position
//! pairs — particles — are weighted by how consistent they are with those
//! readings, the weights multiply across sensors and are normalized, and the
//! weighted mean gives the position estimate. A short window of estimated
//! distances classifies the motion as approaching, receding or suspicious.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{Node, NodeId, Position};

#[derive(Debug, Error, PartialEq)]
pub enum TrackingError {
    #[error("motion window has {0} entries, need at least 3")]
    WindowTooShort(usize),
    #[error("got {readings} readings for {sensors} sensors")]
    ReadingMismatch { sensors: usize, readings: usize },
    #[error("particle set is empty")]
    EmptyParticles,
}

/// One-bit proximity report: did the target get closer or farther?
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProximitySign {
    /// The target was sensed closer than last tick (+1).
    Closer,
    /// The target was sensed farther than last tick (−1); ties land here.
    Farther,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryReading {
    pub sensor_id: NodeId,
    pub tick: u64,
    pub sign: ProximitySign,
}

/// Candidate target motion hypothesis with its normalized weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub prev_position: Position,
    pub curr_position: Position,
    pub weight: f64,
}

impl Particle {
    pub fn new(prev_position: Position, curr_position: Position, weight: f64) -> Self {
        Self {
            prev_position,
            curr_position,
            weight,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingConfig {
    /// Ratio threshold below which consistent motion gets full weight.
    pub threshold: f64,
    /// Weight assigned to particles moving against the readings; keeps the
    /// normalization well-defined.
    pub floor_weight: f64,
    /// Probability that a sensor reading is inverted by noise.
    pub noise_flip_prob: f64,
    pub particle_count: usize,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            floor_weight: 0.01,
            noise_flip_prob: 0.05,
            particle_count: 500,
        }
    }
}

/// Samples one binary reading from a sensor watching the target move from
/// `target_prev` to `target_curr`. Equal distances report `Farther`.
pub fn sense(
    sensor: &Node,
    tick: u64,
    target_prev: Position,
    target_curr: Position,
    noise_flip_prob: f64,
    rng: &mut dyn RngCore,
) -> BinaryReading {
    let closer = sensor.position.distance(target_curr) < sensor.position.distance(target_prev);
    let mut sign = if closer {
        ProximitySign::Closer
    } else {
        ProximitySign::Farther
    };
    if noise_flip_prob > 0.0 && rng.gen_bool(noise_flip_prob.min(1.0)) {
        sign = match sign {
            ProximitySign::Closer => ProximitySign::Farther,
            ProximitySign::Farther => ProximitySign::Closer,
        };
    }
    BinaryReading {
        sensor_id: sensor.id,
        tick,
        sign,
    }
}

/// Weight of one particle against one sensor's reading pair.
///
/// Differing readings carry no information about this sensor, so the weight
/// is 1. For two `Closer` readings the distance ratio d_curr/d_prev scores
/// the particle: at or below the threshold is fully consistent (1), up to 1
/// the ratio itself is the weight, above 1 the particle moves against the
/// reading and gets the floor weight. Two `Farther` readings use the inverse
/// ratio symmetrically. A zero distance on either side counts as a
/// ratio-consistent extreme.
pub fn case_weight(
    sensor_pos: Position,
    s_prev: ProximitySign,
    s_curr: ProximitySign,
    particle: &Particle,
    threshold: f64,
    floor_weight: f64,
) -> f64 {
    if s_prev != s_curr {
        return 1.0;
    }
    let d_prev = sensor_pos.distance(particle.prev_position);
    let d_curr = sensor_pos.distance(particle.curr_position);
    if d_prev == 0.0 || d_curr == 0.0 {
        return 1.0;
    }
    let ratio = match s_prev {
        ProximitySign::Closer => d_curr / d_prev,
        ProximitySign::Farther => d_prev / d_curr,
    };
    if ratio <= threshold {
        1.0
    } else if ratio <= 1.0 {
        ratio
    } else {
        floor_weight
    }
}

/// Recomputes particle weights from two rounds of per-sensor readings.
///
/// Raw weight is the product of [`case_weight`] over sensors (independent
/// evidence), then normalized to sum to 1. Particle order is preserved.
/// `readings_prev[i]` and `readings_curr[i]` belong to `sensor_positions[i]`.
pub fn reweigh_particles(
    sensor_positions: &[Position],
    readings_prev: &[ProximitySign],
    readings_curr: &[ProximitySign],
    particles: &[Particle],
    config: &TrackingConfig,
) -> Result<Vec<Particle>, TrackingError> {
    if particles.is_empty() {
        return Err(TrackingError::EmptyParticles);
    }
    if readings_prev.len() != sensor_positions.len()
        || readings_curr.len() != sensor_positions.len()
    {
        return Err(TrackingError::ReadingMismatch {
            sensors: sensor_positions.len(),
            readings: readings_prev.len().min(readings_curr.len()),
        });
    }
    let mut out: Vec<Particle> = particles.to_vec();
    for particle in &mut out {
        let mut raw = 1.0;
        for (i, &pos) in sensor_positions.iter().enumerate() {
            raw *= case_weight(
                pos,
                readings_prev[i],
                readings_curr[i],
                particle,
                config.threshold,
                config.floor_weight,
            );
        }
        particle.weight = raw;
    }
    let total: f64 = out.iter().map(|p| p.weight).sum();
    // floor_weight > 0 makes a zero total impossible.
    debug_assert!(total > 0.0);
    for particle in &mut out {
        particle.weight /= total;
    }
    Ok(out)
}

/// Weighted mean of the particles' current positions. Expects normalized
/// weights.
pub fn estimate_position(particles: &[Particle]) -> Result<Position, TrackingError> {
    if particles.is_empty() {
        return Err(TrackingError::EmptyParticles);
    }
    let mut x = 0.0;
    let mut y = 0.0;
    for p in particles {
        x += p.weight * p.curr_position.x;
        y += p.weight * p.curr_position.y;
    }
    Ok(Position::new(x, y))
}

/// Target motion relative to the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Motion {
    Approaching,
    Receding,
    /// Anything other than the two predicted behaviors.
    Suspicious,
}

impl Motion {
    pub fn name(self) -> &'static str {
        match self {
            Motion::Approaching => "Approaching",
            Motion::Receding => "Receding",
            Motion::Suspicious => "Suspicious",
        }
    }
}

/// Classifies a window of estimated distances to the network centroid.
/// Monotone decreasing within tolerance is approaching, monotone increasing
/// within tolerance is receding, everything else is suspicious.
pub fn classify_motion(window: &[f64], tolerance: f64) -> Result<Motion, TrackingError> {
    if window.len() < 3 {
        return Err(TrackingError::WindowTooShort(window.len()));
    }
    let decreasing = window.windows(2).all(|w| w[1] - w[0] <= tolerance);
    if decreasing {
        return Ok(Motion::Approaching);
    }
    let increasing = window.windows(2).all(|w| w[0] - w[1] <= tolerance);
    if increasing {
        return Ok(Motion::Receding);
    }
    Ok(Motion::Suspicious)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{Credential, Role};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sensor_at(x: f64, y: f64) -> Node {
        Node::new(
            NodeId(1),
            Role::Friend,
            Position::new(x, y),
            1.0,
            Credential::new(1).unwrap(),
        )
    }

    fn particle(prev: (f64, f64), curr: (f64, f64)) -> Particle {
        Particle::new(
            Position::new(prev.0, prev.1),
            Position::new(curr.0, curr.1),
            0.0,
        )
    }

    #[test]
    fn sense_reports_closer_on_approach() {
        let sensor = sensor_at(0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let reading = sense(
            &sensor,
            1,
            Position::new(1.0, 0.0),
            Position::new(0.5, 0.0),
            0.0,
            &mut rng,
        );
        assert_eq!(reading.sign, ProximitySign::Closer);
        assert_eq!(reading.sensor_id, NodeId(1));
        assert_eq!(reading.tick, 1);
    }

    #[test]
    fn sense_ties_report_farther() {
        let sensor = sensor_at(0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let stationary = Position::new(0.3, 0.4);
        let reading = sense(&sensor, 2, stationary, stationary, 0.0, &mut rng);
        assert_eq!(reading.sign, ProximitySign::Farther);
    }

    #[test]
    fn sense_with_certain_noise_inverts() {
        let sensor = sensor_at(0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let reading = sense(
            &sensor,
            3,
            Position::new(1.0, 0.0),
            Position::new(0.5, 0.0),
            1.0,
            &mut rng,
        );
        assert_eq!(reading.sign, ProximitySign::Farther);
    }

    #[test]
    fn differing_readings_always_weigh_one() {
        let p = particle((0.9, 0.2), (0.1, 0.7));
        let w = case_weight(
            Position::new(0.4, 0.4),
            ProximitySign::Closer,
            ProximitySign::Farther,
            &p,
            0.5,
            0.01,
        );
        assert_eq!(w, 1.0);
    }

    #[test]
    fn closer_pair_weighs_by_ratio_in_the_mid_band() {
        // d_prev = 1.0, d_curr = 0.9 from the origin.
        let p = particle((1.0, 0.0), (0.9, 0.0));
        let w = case_weight(
            Position::new(0.0, 0.0),
            ProximitySign::Closer,
            ProximitySign::Closer,
            &p,
            0.5,
            0.01,
        );
        assert!((w - 0.9).abs() < 1e-12);
    }

    #[test]
    fn inconsistent_particle_gets_the_floor() {
        // Readings say closer but the particle moves away: ratio 1.2.
        let p = particle((1.0, 0.0), (1.2, 0.0));
        let w = case_weight(
            Position::new(0.0, 0.0),
            ProximitySign::Closer,
            ProximitySign::Closer,
            &p,
            0.5,
            0.01,
        );
        assert_eq!(w, 0.01);
    }

    #[test]
    fn strongly_consistent_ratio_weighs_one() {
        // Ratio 0.4 is at or below the 0.5 threshold.
        let p = particle((1.0, 0.0), (0.4, 0.0));
        let w = case_weight(
            Position::new(0.0, 0.0),
            ProximitySign::Closer,
            ProximitySign::Closer,
            &p,
            0.5,
            0.01,
        );
        assert_eq!(w, 1.0);
    }

    #[test]
    fn farther_pair_uses_the_inverse_ratio() {
        // d_prev = 0.5, d_curr = 0.625: inverse ratio 0.8 in the mid band.
        let p = particle((0.5, 0.0), (0.625, 0.0));
        let w = case_weight(
            Position::new(0.0, 0.0),
            ProximitySign::Farther,
            ProximitySign::Farther,
            &p,
            0.5,
            0.01,
        );
        assert!((w - 0.8).abs() < 1e-12);
    }

    #[test]
    fn zero_distance_counts_as_consistent_extreme() {
        let p = particle((0.0, 0.0), (0.5, 0.0));
        let w = case_weight(
            Position::new(0.0, 0.0),
            ProximitySign::Closer,
            ProximitySign::Closer,
            &p,
            0.5,
            0.01,
        );
        assert_eq!(w, 1.0);
    }

    #[test]
    fn sign_flip_gives_uniform_weights() {
        let particles: Vec<Particle> = (0..4)
            .map(|i| particle((0.1 * i as f64, 0.2), (0.3, 0.1 * i as f64)))
            .collect();
        let out = reweigh_particles(
            &[Position::new(0.5, 0.5)],
            &[ProximitySign::Closer],
            &[ProximitySign::Farther],
            &particles,
            &TrackingConfig::default(),
        )
        .unwrap();
        for p in &out {
            assert!((p.weight - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_sensors_give_uniform_weights() {
        let particles: Vec<Particle> = (0..5)
            .map(|i| particle((0.1, 0.1), (0.2 * i as f64, 0.3)))
            .collect();
        let out = reweigh_particles(&[], &[], &[], &particles, &TrackingConfig::default()).unwrap();
        for p in &out {
            assert!((p.weight - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn reweigh_matches_hand_multiplied_table() {
        // Two sensors: (0,0) read Closer/Closer, (1,0) read Farther/Farther.
        // Per-particle case weights were multiplied out by hand:
        //   p1: 1.0 (ratio 0.5 at threshold) * 1.0 (inverse ratio 1/3) = 1.0
        //   p2: sqrt(0.41/0.5) * floor  = 0.9055385138137416 * 0.01
        //   p3: floor * floor           = 0.0001
        let sensors = [Position::new(0.0, 0.0), Position::new(1.0, 0.0)];
        let prev = [ProximitySign::Closer, ProximitySign::Farther];
        let curr = [ProximitySign::Closer, ProximitySign::Farther];
        let particles = vec![
            particle((0.8, 0.0), (0.4, 0.0)),
            particle((0.5, 0.5), (0.5, 0.4)),
            particle((0.2, 0.0), (0.9, 0.0)),
        ];
        let out = reweigh_particles(
            &sensors,
            &prev,
            &curr,
            &particles,
            &TrackingConfig::default(),
        )
        .unwrap();
        let raw = [1.0, (0.41f64 / 0.5).sqrt() * 0.01, 0.0001];
        let total: f64 = raw.iter().sum();
        for (got, want) in out.iter().zip(raw.iter().map(|r| r / total)) {
            assert!(
                (got.weight - want).abs() < 1e-12,
                "got {} want {want}",
                got.weight
            );
        }
    }

    #[test]
    fn reweigh_rejects_mismatched_readings() {
        let particles = vec![particle((0.1, 0.1), (0.2, 0.2))];
        let err = reweigh_particles(
            &[Position::new(0.0, 0.0)],
            &[],
            &[ProximitySign::Closer],
            &particles,
            &TrackingConfig::default(),
        )
        .unwrap_err();
        assert_eq!(
            err,
            TrackingError::ReadingMismatch {
                sensors: 1,
                readings: 0
            }
        );
    }

    #[test]
    fn estimate_single_particle_is_its_position() {
        let p = Particle::new(Position::new(0.0, 0.0), Position::new(0.3, 0.7), 1.0);
        assert_eq!(estimate_position(&[p]).unwrap(), Position::new(0.3, 0.7));
    }

    #[test]
    fn estimate_two_equal_particles_is_the_midpoint() {
        let particles = [
            Particle::new(Position::new(0.0, 0.0), Position::new(0.0, 0.0), 0.5),
            Particle::new(Position::new(0.0, 0.0), Position::new(1.0, 1.0), 0.5),
        ];
        assert_eq!(
            estimate_position(&particles).unwrap(),
            Position::new(0.5, 0.5)
        );
    }

    #[test]
    fn estimate_stays_in_the_bounding_box() {
        // Convex-hull membership, checked on the axis-aligned hull bounds.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let n = 2 + rng.next_u32() as usize % 8;
            let mut particles: Vec<Particle> = (0..n)
                .map(|_| {
                    particle(
                        (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)),
                        (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)),
                    )
                })
                .collect();
            let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
            let total: f64 = raw.iter().sum();
            for (p, w) in particles.iter_mut().zip(&raw) {
                p.weight = w / total;
            }
            let est = estimate_position(&particles).unwrap();
            let (mut min_x, mut max_x) = (f64::MAX, f64::MIN);
            let (mut min_y, mut max_y) = (f64::MAX, f64::MIN);
            for p in &particles {
                min_x = min_x.min(p.curr_position.x);
                max_x = max_x.max(p.curr_position.x);
                min_y = min_y.min(p.curr_position.y);
                max_y = max_y.max(p.curr_position.y);
            }
            assert!(est.x >= min_x - 1e-12 && est.x <= max_x + 1e-12);
            assert!(est.y >= min_y - 1e-12 && est.y <= max_y + 1e-12);
        }
    }

    #[test]
    fn classify_motion_examples() {
        assert_eq!(
            classify_motion(&[1.0, 0.8, 0.6], 0.0).unwrap(),
            Motion::Approaching
        );
        assert_eq!(
            classify_motion(&[0.5, 0.7, 0.9], 0.0).unwrap(),
            Motion::Receding
        );
        assert_eq!(
            classify_motion(&[1.0, 0.6, 1.0], 0.0).unwrap(),
            Motion::Suspicious
        );
    }

    #[test]
    fn classify_motion_rejects_short_windows() {
        assert_eq!(
            classify_motion(&[1.0, 0.5], 0.0),
            Err(TrackingError::WindowTooShort(2))
        );
    }

    #[test]
    fn classify_motion_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let n = 3 + rng.next_u32() as usize % 5;
            let window: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
            let tolerance = rng.gen_range(0.0..0.2);
            let scale = rng.gen_range(0.1..10.0);
            let scaled: Vec<f64> = window.iter().map(|d| d * scale).collect();
            assert_eq!(
                classify_motion(&window, tolerance).unwrap(),
                classify_motion(&scaled, tolerance * scale).unwrap()
            );
        }
    }
}
