//! The immune core: bitstring affinity, negative-selection detector
//! generation, clonal-selection maturation, and the memory-detector
//! lifecycle.
//!
//! Detectors are recognizers matched against samples by an affinity score in
//! `[0,1]`. Negative selection keeps only detectors that recognize no known
//! self sample, so whatever they do recognize is non-self. Clonal selection
//! iteratively clones the best recognizers with affinity-inverse mutation
//! and keeps a memory set of the best ever seen.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AisError {
    #[error("bitstring lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("population size {got} does not match configured {expected}")]
    PopulationSize { got: usize, expected: usize },
    #[error("bad detector line {line}: {reason}")]
    BadDetectorLine { line: usize, reason: String },
}

/// Fixed-length receptor string. All bitstrings in one run share a length.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bitstring {
    bits: Vec<bool>,
}

impl Bitstring {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// All-zero string of the given length.
    pub fn zero(length: usize) -> Self {
        Self {
            bits: vec![false; length],
        }
    }

    /// Uniformly random string of the given length.
    pub fn random(length: usize, rng: &mut dyn RngCore) -> Self {
        Self {
            bits: (0..length).map(|_| rng.gen_bool(0.5)).collect(),
        }
    }

    /// Builds the string whose big-endian integer value is `value`; only
    /// usable for lengths up to 64.
    pub fn from_value(value: u64, length: usize) -> Self {
        assert!(length <= 64);
        Self {
            bits: (0..length)
                .map(|i| value >> (length - 1 - i) & 1 == 1)
                .collect(),
        }
    }

    /// Parses an ASCII string of '0'/'1' characters.
    pub fn from_binary_str(s: &str) -> Option<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                _ => return None,
            }
        }
        Some(Self { bits })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bit(&self, index: usize) -> bool {
        self.bits[index]
    }

    pub fn set_bit(&mut self, index: usize, value: bool) {
        self.bits[index] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Hex rendering: the first bit is the most significant bit of the first
    /// digit; lengths that are not a multiple of four are padded with zero
    /// bits on the right of the last digit.
    pub fn to_hex(&self) -> String {
        let mut out = String::with_capacity(self.bits.len().div_ceil(4));
        for chunk in self.bits.chunks(4) {
            let mut nibble = 0u8;
            for (i, &b) in chunk.iter().enumerate() {
                if b {
                    nibble |= 1 << (3 - i);
                }
            }
            out.push(char::from_digit(nibble as u32, 16).unwrap());
        }
        out
    }

    /// Inverse of [`Bitstring::to_hex`] for a known length. The padding bits
    /// beyond `length` must be zero.
    pub fn from_hex(s: &str, length: usize) -> Option<Self> {
        if s.len() != length.div_ceil(4) {
            return None;
        }
        let mut bits = Vec::with_capacity(s.len() * 4);
        for c in s.chars() {
            let nibble = c.to_digit(16)? as u8;
            for i in (0..4).rev() {
                bits.push(nibble >> i & 1 == 1);
            }
        }
        if bits[length..].iter().any(|&b| b) {
            return None;
        }
        bits.truncate(length);
        Some(Self { bits })
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            write!(f, "{}", if b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

/// All `2^length` bitstrings of `length` bits in ascending numeric order.
pub fn exhaustive_bitstrings(length: usize) -> impl Iterator<Item = Bitstring> {
    assert!(
        length <= 30,
        "exhaustive enumeration is only for desk-scale lengths"
    );
    (0..1u64 << length).map(move |v| Bitstring::from_value(v, length))
}

/// Detector lifecycle stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DetectorState {
    Immature,
    Mature,
    Memory,
}

impl fmt::Display for DetectorState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DetectorState::Immature => "immature",
            DetectorState::Mature => "mature",
            DetectorState::Memory => "memory",
        })
    }
}

impl FromStr for DetectorState {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "immature" => Ok(DetectorState::Immature),
            "mature" => Ok(DetectorState::Mature),
            "memory" => Ok(DetectorState::Memory),
            _ => Err(()),
        }
    }
}

/// A recognizer with its lifecycle bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Detector {
    pub pattern: Bitstring,
    pub state: DetectorState,
    /// Ticks since creation; advanced by the owner.
    pub age: u64,
    pub match_count: u64,
}

impl Detector {
    pub fn mature(pattern: Bitstring) -> Self {
        Self {
            pattern,
            state: DetectorState::Mature,
            age: 0,
            match_count: 0,
        }
    }
}

/// How detector/sample binding is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchScheme {
    /// Longest run of contiguous agreeing positions, normalized by length;
    /// a detector matches when some agreeing run reaches `r`.
    RContiguous,
    /// Fraction of agreeing positions; a detector matches when it reaches
    /// the recognition threshold.
    Hamming,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffinityConfig {
    pub scheme: MatchScheme,
    pub r: usize,
    pub recognition_threshold: f64,
}

impl Default for AffinityConfig {
    fn default() -> Self {
        Self {
            scheme: MatchScheme::RContiguous,
            r: 8,
            recognition_threshold: 0.8,
        }
    }
}

/// Knobs of the clonal-selection engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClonalParams {
    pub population_size: usize,
    pub select_count: usize,
    pub clone_budget: usize,
    /// Hypermutation intensity in percent; an antibody of affinity `a`
    /// mutates at intensity `(1 - a) * maturity_level / 100`.
    pub maturity_level: f64,
    pub replace_worst_n: usize,
    pub max_generations: usize,
}

impl Default for ClonalParams {
    fn default() -> Self {
        Self {
            population_size: 50,
            select_count: 20,
            clone_budget: 20,
            maturity_level: 80.0,
            replace_worst_n: 5,
            max_generations: 600,
        }
    }
}

impl ClonalParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.population_size == 0 {
            return Err("population_size must be positive".into());
        }
        if self.select_count == 0 || self.select_count > self.population_size {
            return Err("select_count must be in 1..=population_size".into());
        }
        if self.clone_budget == 0 {
            return Err("clone_budget must be positive".into());
        }
        if self.replace_worst_n >= self.population_size {
            return Err("replace_worst_n must be below population_size".into());
        }
        if !(0.0..=100.0).contains(&self.maturity_level) {
            return Err("maturity_level must be in 0..=100".into());
        }
        if self.max_generations == 0 {
            return Err("max_generations must be positive".into());
        }
        Ok(())
    }
}

fn longest_agreeing_run(a: &Bitstring, b: &Bitstring) -> usize {
    let mut best = 0;
    let mut run = 0;
    for (x, y) in a.bits.iter().zip(&b.bits) {
        if x == y {
            run += 1;
            best = best.max(run);
        } else {
            run = 0;
        }
    }
    best
}

/// Affinity of two equal-length bitstrings in `[0,1]`. Symmetric and pure.
pub fn affinity(a: &Bitstring, b: &Bitstring, config: &AffinityConfig) -> Result<f64, AisError> {
    if a.len() != b.len() {
        return Err(AisError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Ok(1.0);
    }
    let score = match config.scheme {
        MatchScheme::RContiguous => longest_agreeing_run(a, b) as f64,
        MatchScheme::Hamming => a.bits.iter().zip(&b.bits).filter(|(x, y)| x == y).count() as f64,
    };
    Ok(score / a.len() as f64)
}

/// Whether a detector recognizes a sample under the configured scheme.
pub fn matches(
    detector: &Detector,
    sample: &Bitstring,
    config: &AffinityConfig,
) -> Result<bool, AisError> {
    let pattern = &detector.pattern;
    if pattern.len() != sample.len() {
        return Err(AisError::LengthMismatch(pattern.len(), sample.len()));
    }
    Ok(match config.scheme {
        MatchScheme::RContiguous => longest_agreeing_run(pattern, sample) >= config.r,
        MatchScheme::Hamming => affinity(pattern, sample, config)? >= config.recognition_threshold,
    })
}

/// Core of negative selection: keep candidates that recognize no self
/// element, until `requested` have been kept or the stream runs dry.
pub fn negative_selection_from<I>(
    self_set: &[Bitstring],
    candidates: I,
    requested: usize,
    config: &AffinityConfig,
) -> Result<Vec<Detector>, AisError>
where
    I: IntoIterator<Item = Bitstring>,
{
    let mut detectors = Vec::new();
    for candidate in candidates {
        if detectors.len() >= requested {
            break;
        }
        let probe = Detector::mature(candidate);
        let mut recognized = false;
        for self_sample in self_set {
            if matches(&probe, self_sample, config)? {
                recognized = true;
                break;
            }
        }
        if !recognized {
            detectors.push(probe);
        }
    }
    Ok(detectors)
}

/// Randomly generates candidate detectors and censors them against the self
/// set. Stops after `requested` survivors or `max_attempts` candidates; a
/// short return means the self set saturates the space at this threshold.
pub fn negative_selection(
    self_set: &[Bitstring],
    length: usize,
    requested: usize,
    config: &AffinityConfig,
    max_attempts: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<Detector>, AisError> {
    for s in self_set {
        if s.len() != length {
            return Err(AisError::LengthMismatch(s.len(), length));
        }
    }
    let stream = (0..max_attempts).map(|_| Bitstring::random(length, rng));
    negative_selection_from(self_set, stream, requested, config)
}

/// Genomes paired with their affinities, ranked or not.
pub type ScoredPopulation<G> = Vec<(G, f64)>;

/// Candidate solution the clonal engine can clone, mutate and replace.
pub trait Genome: Clone {
    /// Mutated copy at the given hypermutation intensity in `[0,1]`.
    fn mutated(&self, intensity: f64, rng: &mut dyn RngCore) -> Self;
    /// Fresh random genome of the same shape as `self`.
    fn fresh(&self, rng: &mut dyn RngCore) -> Self;
}

impl Genome for Bitstring {
    /// Each position flips with probability `intensity / length`.
    fn mutated(&self, intensity: f64, rng: &mut dyn RngCore) -> Self {
        if self.is_empty() {
            return self.clone();
        }
        let rate = (intensity / self.len() as f64).clamp(0.0, 1.0);
        let mut out = self.clone();
        for bit in &mut out.bits {
            if rate > 0.0 && rng.gen_bool(rate) {
                *bit = !*bit;
            }
        }
        out
    }

    fn fresh(&self, rng: &mut dyn RngCore) -> Self {
        Bitstring::random(self.len(), rng)
    }
}

/// Splits `budget` clones across the selected antibodies proportionally to
/// affinity, by largest-remainder rounding. Counts are ordered like the
/// affinities and always sum to exactly `budget`.
pub fn clone_allocation(affinities: &[f64], budget: usize) -> Vec<usize> {
    if affinities.is_empty() {
        return Vec::new();
    }
    let total: f64 = affinities.iter().sum();
    let shares: Vec<f64> = if total > 0.0 {
        affinities
            .iter()
            .map(|a| budget as f64 * a / total)
            .collect()
    } else {
        vec![budget as f64 / affinities.len() as f64; affinities.len()]
    };
    let mut counts: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&i, &j| {
        let ri = shares[i] - counts[i] as f64;
        let rj = shares[j] - counts[j] as f64;
        rj.total_cmp(&ri).then(i.cmp(&j))
    });
    for &i in order.iter().take(budget - assigned) {
        counts[i] += 1;
    }
    counts
}

/// One generation of clonal selection.
///
/// The top `select_count` antibodies are cloned (clone counts proportional
/// to affinity), each clone is mutated at intensity
/// `(1 - affinity) * maturity_level / 100`, and each parent is replaced by
/// its best clone when that clone scores higher. The best antibody seen this
/// generation (parents and clones alike) is copied into the returned memory
/// additions, and the `replace_worst_n` weakest slots are refilled with
/// fresh random antibodies. Population size is preserved.
pub fn clonal_step<G, E>(
    population: &[(G, f64)],
    mut eval: E,
    params: &ClonalParams,
    rng: &mut dyn RngCore,
) -> Result<(ScoredPopulation<G>, ScoredPopulation<G>), AisError>
where
    G: Genome,
    E: FnMut(&G) -> f64,
{
    if population.len() != params.population_size {
        return Err(AisError::PopulationSize {
            got: population.len(),
            expected: params.population_size,
        });
    }

    let mut ranked: Vec<(G, f64)> = population.to_vec();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));

    let selected_affinities: Vec<f64> = ranked[..params.select_count]
        .iter()
        .map(|(_, a)| a)
        .copied()
        .collect();
    let counts = clone_allocation(&selected_affinities, params.clone_budget);

    let mut memory_best: Option<(G, f64)> = ranked.first().cloned();
    for (slot, count) in counts.iter().enumerate() {
        let (parent, parent_affinity) = ranked[slot].clone();
        let intensity = (1.0 - parent_affinity).max(0.0) * params.maturity_level / 100.0;
        let mut best_clone: Option<(G, f64)> = None;
        for _ in 0..*count {
            let clone = parent.mutated(intensity, rng);
            let clone_affinity = eval(&clone);
            if best_clone.as_ref().is_none_or(|(_, a)| clone_affinity > *a) {
                best_clone = Some((clone, clone_affinity));
            }
        }
        if let Some((clone, clone_affinity)) = best_clone {
            if clone_affinity > memory_best.as_ref().map_or(f64::NEG_INFINITY, |(_, a)| *a) {
                memory_best = Some((clone.clone(), clone_affinity));
            }
            if clone_affinity > ranked[slot].1 {
                ranked[slot] = (clone, clone_affinity);
            }
        }
    }

    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    let len = ranked.len();
    for slot in (len - params.replace_worst_n..len).rev() {
        let fresh = ranked[0].0.fresh(rng);
        let fresh_affinity = eval(&fresh);
        ranked[slot] = (fresh, fresh_affinity);
    }

    let memory_additions = memory_best.into_iter().collect();
    Ok((ranked, memory_additions))
}

/// Scans the detector set for the sample and returns the index and affinity
/// of the strongest matching detector (ties go to the earliest-created one).
/// Its match count is bumped and a mature detector is promoted to memory on
/// its first successful detection.
pub fn detect(
    detectors: &mut [Detector],
    sample: &Bitstring,
    config: &AffinityConfig,
) -> Result<Option<(usize, f64)>, AisError> {
    let mut best: Option<(usize, f64)> = None;
    for (index, detector) in detectors.iter().enumerate() {
        if matches(detector, sample, config)? {
            let a = affinity(&detector.pattern, sample, config)?;
            if best.is_none_or(|(_, b)| a > b) {
                best = Some((index, a));
            }
        }
    }
    if let Some((index, _)) = best {
        let detector = &mut detectors[index];
        detector.match_count += 1;
        if detector.state == DetectorState::Mature {
            detector.state = DetectorState::Memory;
        }
    }
    Ok(best)
}

/// Serializes a detector set in the line format
/// `<hex-pattern> <state> <age> <match_count>`, one detector per line.
pub fn write_detectors(detectors: &[Detector]) -> String {
    let mut out = String::new();
    for d in detectors {
        out.push_str(&format!(
            "{} {} {} {}\n",
            d.pattern.to_hex(),
            d.state,
            d.age,
            d.match_count
        ));
    }
    out
}

/// Parses the [`write_detectors`] line format; `length` is the run-wide
/// bitstring length the hex patterns decode to.
pub fn parse_detectors(input: &str, length: usize) -> Result<Vec<Detector>, AisError> {
    let mut detectors = Vec::new();
    for (number, line) in input.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |reason: &str| AisError::BadDetectorLine {
            line: number + 1,
            reason: reason.to_string(),
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(bad("expected 4 fields"));
        }
        let pattern =
            Bitstring::from_hex(fields[0], length).ok_or_else(|| bad("bad hex pattern"))?;
        let state = fields[1].parse().map_err(|_| bad("bad state"))?;
        let age = fields[2].parse().map_err(|_| bad("bad age"))?;
        let match_count = fields[3].parse().map_err(|_| bad("bad match count"))?;
        detectors.push(Detector {
            pattern,
            state,
            age,
            match_count,
        });
    }
    Ok(detectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bits(s: &str) -> Bitstring {
        Bitstring::from_binary_str(s).unwrap()
    }

    fn rcontig(r: usize) -> AffinityConfig {
        AffinityConfig {
            scheme: MatchScheme::RContiguous,
            r,
            recognition_threshold: 0.8,
        }
    }

    fn hamming(threshold: f64) -> AffinityConfig {
        AffinityConfig {
            scheme: MatchScheme::Hamming,
            r: 0,
            recognition_threshold: threshold,
        }
    }

    /// Window-scan oracle, structured differently from the implementation:
    /// checks every start offset for an all-agreeing window of width w.
    fn has_agreeing_window(a: &Bitstring, b: &Bitstring, w: usize) -> bool {
        if w == 0 {
            return true;
        }
        (0..a.len().saturating_sub(w - 1))
            .any(|start| (start..start + w).all(|i| a.bit(i) == b.bit(i)))
    }

    #[test]
    fn identical_strings_have_affinity_one() {
        let a = bits("10110010");
        assert_eq!(affinity(&a, &a, &rcontig(3)).unwrap(), 1.0);
        assert_eq!(affinity(&a, &a, &hamming(0.8)).unwrap(), 1.0);
    }

    #[test]
    fn complement_has_hamming_affinity_zero() {
        let a = bits("10110010");
        let b = bits("01001101");
        assert_eq!(affinity(&a, &b, &hamming(0.8)).unwrap(), 0.0);
    }

    #[test]
    fn rcontiguous_affinity_counts_longest_agreeing_run() {
        let a = bits("00001111");
        let b = bits("00110011");
        assert_eq!(affinity(&a, &b, &rcontig(2)).unwrap(), 0.25);
    }

    #[test]
    fn affinity_rejects_length_mismatch() {
        let a = bits("000");
        let b = bits("0000");
        assert_eq!(
            affinity(&a, &b, &rcontig(2)),
            Err(AisError::LengthMismatch(3, 4))
        );
    }

    #[test]
    fn affinity_is_symmetric_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let a = Bitstring::random(16, &mut rng);
            let b = Bitstring::random(16, &mut rng);
            for config in [rcontig(4), hamming(0.7)] {
                assert_eq!(
                    affinity(&a, &b, &config).unwrap(),
                    affinity(&b, &a, &config).unwrap()
                );
            }
        }
    }

    #[test]
    fn matches_agrees_with_window_scan_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let a = Bitstring::random(12, &mut rng);
            let b = Bitstring::random(12, &mut rng);
            let r = 1 + (rng.next_u32() as usize % 12);
            let got = matches(&Detector::mature(a.clone()), &b, &rcontig(r)).unwrap();
            assert_eq!(got, has_agreeing_window(&a, &b, r));
        }
    }

    #[test]
    fn matches_examples_from_the_contract() {
        let identical = Detector::mature(bits("1010"));
        assert!(matches(&identical, &bits("1010"), &rcontig(4)).unwrap());
        assert!(!matches(&Detector::mature(bits("1111")), &bits("0000"), &rcontig(2)).unwrap());
        assert!(!matches(&Detector::mature(bits("0110")), &bits("0000"), &rcontig(2)).unwrap());
    }

    #[test]
    fn negative_selection_with_empty_self_keeps_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let detectors = negative_selection(&[], 8, 5, &rcontig(3), 1000, &mut rng).unwrap();
        assert_eq!(detectors.len(), 5);
        assert!(detectors.iter().all(|d| d.state == DetectorState::Mature));
    }

    #[test]
    fn exhaustive_negative_selection_finds_the_eight_survivors() {
        let self_set = vec![bits("0000")];
        let detectors =
            negative_selection_from(&self_set, exhaustive_bitstrings(4), usize::MAX, &rcontig(2))
                .unwrap();
        let got: Vec<String> = detectors.iter().map(|d| d.pattern.to_string()).collect();
        assert_eq!(
            got,
            ["0101", "0110", "0111", "1010", "1011", "1101", "1110", "1111"]
        );
    }

    #[test]
    fn saturated_self_space_returns_empty() {
        // Self covers the whole 2-bit space at r=1 (every candidate agrees
        // somewhere with some self string).
        let self_set: Vec<Bitstring> = exhaustive_bitstrings(2).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let detectors = negative_selection(&self_set, 2, 4, &rcontig(1), 500, &mut rng).unwrap();
        assert!(detectors.is_empty());
    }

    #[test]
    fn clone_allocation_matches_largest_remainder_example() {
        assert_eq!(clone_allocation(&[0.9, 0.6, 0.3], 20), vec![10, 7, 3]);
    }

    #[test]
    fn clone_allocation_splits_a_zero_sum_equally() {
        assert_eq!(clone_allocation(&[0.0, 0.0, 0.0], 7), vec![3, 2, 2]);
        assert_eq!(clone_allocation(&[0.0, 0.0], 4), vec![2, 2]);
    }

    #[test]
    fn clone_allocation_sums_and_orders() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..300 {
            let n = 1 + rng.next_u32() as usize % 10;
            let budget = 1 + rng.next_u32() as usize % 40;
            let mut affs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            affs.sort_by(|a, b| b.total_cmp(a));
            let counts = clone_allocation(&affs, budget);
            assert_eq!(counts.iter().sum::<usize>(), budget);
            for w in counts.windows(2) {
                assert!(w[0] >= w[1], "counts not ordered: {counts:?} for {affs:?}");
            }
        }
    }

    #[derive(Clone, Debug)]
    struct ScalarGenome(f64);

    impl Genome for ScalarGenome {
        fn mutated(&self, intensity: f64, rng: &mut dyn RngCore) -> Self {
            ScalarGenome(self.0 + intensity * (rng.gen_range(-1.0..1.0)))
        }

        fn fresh(&self, rng: &mut dyn RngCore) -> Self {
            ScalarGenome(rng.gen_range(0.0..1.0))
        }
    }

    fn scalar_population(affinities: &[f64]) -> Vec<(ScalarGenome, f64)> {
        affinities.iter().map(|&a| (ScalarGenome(a), a)).collect()
    }

    #[test]
    fn zero_maturity_memory_addition_is_the_best_antibody() {
        let params = ClonalParams {
            population_size: 4,
            select_count: 2,
            clone_budget: 4,
            maturity_level: 0.0,
            replace_worst_n: 1,
            max_generations: 1,
        };
        let population = scalar_population(&[0.9, 0.5, 0.3, 0.1]);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (_, memory) = clonal_step(&population, |g| g.0, &params, &mut rng).unwrap();
        assert_eq!(memory.len(), 1);
        assert_eq!(memory[0].1, 0.9);
        assert_eq!(memory[0].0 .0, 0.9);
    }

    #[test]
    fn clonal_step_preserves_population_size_and_rejects_mismatch() {
        let params = ClonalParams {
            population_size: 6,
            select_count: 3,
            clone_budget: 6,
            maturity_level: 50.0,
            replace_worst_n: 2,
            max_generations: 1,
        };
        let population = scalar_population(&[0.9, 0.8, 0.5, 0.4, 0.2, 0.1]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (next, _) =
            clonal_step(&population, |g| g.0.abs().min(1.0), &params, &mut rng).unwrap();
        assert_eq!(next.len(), 6);

        let short = scalar_population(&[0.5]);
        assert_eq!(
            clonal_step(&short, |g| g.0, &params, &mut rng).unwrap_err(),
            AisError::PopulationSize {
                got: 1,
                expected: 6
            }
        );
    }

    #[test]
    fn memory_addition_is_at_least_the_pre_step_best() {
        let params = ClonalParams {
            population_size: 10,
            select_count: 4,
            clone_budget: 8,
            maturity_level: 80.0,
            replace_worst_n: 2,
            max_generations: 1,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let affs: Vec<f64> = (0..10).map(|_| rng.gen_range(0.0..1.0)).collect();
            let population = scalar_population(&affs);
            let pre_best = affs.iter().cloned().fold(f64::MIN, f64::max);
            let (_, memory) =
                clonal_step(&population, |g| g.0.clamp(0.0, 1.0), &params, &mut rng).unwrap();
            assert!(memory[0].1 >= pre_best);
        }
    }

    #[test]
    fn detect_empty_set_is_none() {
        let mut detectors: Vec<Detector> = Vec::new();
        assert_eq!(
            detect(&mut detectors, &bits("0000"), &rcontig(2)).unwrap(),
            None
        );
    }

    #[test]
    fn detect_promotes_on_first_match() {
        let mut detectors = vec![Detector::mature(bits("1010"))];
        let hit = detect(&mut detectors, &bits("1010"), &rcontig(2)).unwrap();
        assert_eq!(hit, Some((0, 1.0)));
        assert_eq!(detectors[0].state, DetectorState::Memory);
        assert_eq!(detectors[0].match_count, 1);
    }

    #[test]
    fn detect_returns_the_highest_affinity_match() {
        // Against sample 11111111: 11110000 agrees on a run of 4 (0.5),
        // 11111110 on a run of 7 (0.875).
        let mut detectors = vec![
            Detector::mature(bits("11110000")),
            Detector::mature(bits("11111110")),
        ];
        let hit = detect(&mut detectors, &bits("11111111"), &rcontig(4)).unwrap();
        assert_eq!(hit, Some((1, 0.875)));
        assert_eq!(detectors[0].match_count, 0);
        assert_eq!(detectors[1].match_count, 1);
    }

    #[test]
    fn detect_breaks_ties_by_creation_order() {
        let mut detectors = vec![
            Detector::mature(bits("1100")),
            Detector::mature(bits("1100")),
        ];
        let hit = detect(&mut detectors, &bits("1100"), &rcontig(2)).unwrap();
        assert_eq!(hit, Some((0, 1.0)));
    }

    #[test]
    fn detector_lines_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let mut detectors: Vec<Detector> = (0..5)
            .map(|_| Detector::mature(Bitstring::random(12, &mut rng)))
            .collect();
        detectors[2].state = DetectorState::Memory;
        detectors[2].match_count = 3;
        detectors[4].age = 17;
        let text = write_detectors(&detectors);
        let parsed = parse_detectors(&text, 12).unwrap();
        assert_eq!(parsed, detectors);
    }

    #[test]
    fn hex_encoding_is_msb_first() {
        assert_eq!(bits("1111").to_hex(), "f");
        assert_eq!(bits("0110").to_hex(), "6");
        assert_eq!(bits("10100000").to_hex(), "a0");
        assert_eq!(bits("101").to_hex(), "a");
        assert_eq!(Bitstring::from_hex("a", 3), Some(bits("101")));
        // Nonzero padding bits are invalid for the claimed length.
        assert_eq!(Bitstring::from_hex("b", 3), None);
    }
}
