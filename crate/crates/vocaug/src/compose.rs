//! Deterministic dataset composition.
//!
//! Splits each speaker's utterances into train/valid/test, samples the
//! low-resource real subset, builds the domain-labeled oversampled training
//! plan, and pairs speakers for the mismatched-augmentation ablation.
//!
//! Every operation is a pure function of `(inputs, seed)`. Seeded shuffles
//! run over lexicographically sorted ids, so results are independent of
//! manifest file order, and all output id lists are sorted.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifest::{Domain, Gender, SpeakerRecord};
use crate::seeding::derive_seed;

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error("speaker {speaker_id} has {got} utterances, need at least {need} for the split")]
    TooFewUtterances {
        speaker_id: String,
        got: usize,
        need: usize,
    },
    #[error("utterance id {0:?} appears in both the real and synthetic lists")]
    Overlap(String),
    #[error("need at least 2 speakers of gender {gender:?} for mismatch pairing, got {got}")]
    InsufficientSpeakers { gender: Gender, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Train/valid/test ratio, e.g. `(10, 1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRatio(pub u32, pub u32, pub u32);

impl Default for SplitRatio {
    fn default() -> Self {
        SplitRatio(10, 1, 1)
    }
}

impl SplitRatio {
    fn units(&self) -> u32 {
        self.0 + self.1 + self.2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub speaker_id: String,
    pub train_ids: Vec<String>,
    pub valid_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub seed: u64,
}

/// Splits one speaker's utterances by the given ratio.
///
/// Valid and test sizes are `round(n * part / units)`; train takes the
/// remainder, so the three lists always partition the input ids.
pub fn split_speaker(
    rec: &SpeakerRecord,
    ratio: SplitRatio,
    seed: u64,
) -> Result<SplitAssignment, ComposeError> {
    let n = rec.utterances.len();
    let units = ratio.units() as usize;
    if n < units {
        return Err(ComposeError::TooFewUtterances {
            speaker_id: rec.speaker_id.clone(),
            got: n,
            need: units,
        });
    }
    let mut ids: Vec<String> = rec.utterances.iter().map(|u| u.id.clone()).collect();
    ids.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &["split", &rec.speaker_id]));
    ids.shuffle(&mut rng);

    let valid_n = ((n as f64) * (ratio.1 as f64) / (units as f64)).round() as usize;
    let test_n = ((n as f64) * (ratio.2 as f64) / (units as f64)).round() as usize;
    let train_n = n - valid_n - test_n;

    let mut train_ids: Vec<String> = ids[..train_n].to_vec();
    let mut valid_ids: Vec<String> = ids[train_n..train_n + valid_n].to_vec();
    let mut test_ids: Vec<String> = ids[train_n + valid_n..].to_vec();
    train_ids.sort();
    valid_ids.sort();
    test_ids.sort();

    Ok(SplitAssignment {
        speaker_id: rec.speaker_id.clone(),
        train_ids,
        valid_ids,
        test_ids,
        seed,
    })
}

/// Samples the retained-as-real fraction of the training ids.
///
/// Returns `(real_ids, to_synthesize_ids)`, a partition of `train_ids`.
/// The real subset has `round(fraction * n)` elements, at least one.
pub fn sample_real_subset(
    train_ids: &[String],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>), ComposeError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(ComposeError::InvalidParameter(format!(
            "fraction must be in (0, 1), got {fraction}"
        )));
    }
    let mut ids: Vec<String> = train_ids.to_vec();
    ids.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &["real-subset"]));
    ids.shuffle(&mut rng);

    let k = ((ids.len() as f64) * fraction).round().max(1.0) as usize;
    let k = k.min(ids.len());
    let mut real: Vec<String> = ids[..k].to_vec();
    let mut synth: Vec<String> = ids[k..].to_vec();
    real.sort();
    synth.sort();
    Ok((real, synth))
}

/// One training-set slot: an utterance with its domain label and how many
/// times it is repeated per epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub utterance_id: String,
    pub domain_label: Domain,
    pub multiplicity: u32,
}

/// The exact multiset of training entries.
///
/// Real entries carry `multiplicity == os_factor`, synthetic entries 1.
/// When `dc_enabled` is false the domain labels are still recorded but are
/// not consumed as a training condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionPlan {
    pub entries: Vec<PlanEntry>,
    pub dc_enabled: bool,
    pub os_factor: u32,
    pub seed: u64,
}

impl CompositionPlan {
    /// Total slot count: the sum of multiplicities.
    pub fn effective_size(&self) -> usize {
        self.entries.iter().map(|e| e.multiplicity as usize).sum()
    }
}

pub fn compose_training_set(
    real_ids: &[String],
    synth_ids: &[String],
    os_factor: u32,
    dc_enabled: bool,
    seed: u64,
) -> Result<CompositionPlan, ComposeError> {
    if os_factor < 1 {
        return Err(ComposeError::InvalidParameter(
            "os_factor must be at least 1".into(),
        ));
    }
    let real_set: BTreeSet<&String> = real_ids.iter().collect();
    if let Some(dup) = synth_ids.iter().find(|id| real_set.contains(id)) {
        return Err(ComposeError::Overlap((*dup).clone()));
    }
    let entries = real_ids
        .iter()
        .map(|id| PlanEntry {
            utterance_id: id.clone(),
            domain_label: Domain::Real,
            multiplicity: os_factor,
        })
        .chain(synth_ids.iter().map(|id| PlanEntry {
            utterance_id: id.clone(),
            domain_label: Domain::Synthetic,
            multiplicity: 1,
        }))
        .collect();
    Ok(CompositionPlan {
        entries,
        dc_enabled,
        os_factor,
        seed,
    })
}

/// Donor assignment for the speaker-mismatched ablation: each target speaker
/// borrows synthetic speech from a different speaker of the same gender.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchPairing {
    pub donor_of: BTreeMap<String, String>,
    pub seed: u64,
}

/// Builds a fixpoint-free pairing within each gender group by rotating a
/// seeded shuffle, so every group is a single cycle.
pub fn pair_mismatched(
    speakers: &[SpeakerRecord],
    seed: u64,
) -> Result<MismatchPairing, ComposeError> {
    let mut by_gender: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for s in speakers {
        let key = match s.gender {
            Gender::M => "m",
            Gender::F => "f",
        };
        by_gender.entry(key).or_default().push(s.speaker_id.clone());
    }
    let mut donor_of = BTreeMap::new();
    for (key, mut group) in by_gender {
        if group.len() < 2 {
            return Err(ComposeError::InsufficientSpeakers {
                gender: if key == "m" { Gender::M } else { Gender::F },
                got: group.len(),
            });
        }
        group.sort();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &["pairing", key]));
        group.shuffle(&mut rng);
        for i in 0..group.len() {
            let donor = group[(i + 1) % group.len()].clone();
            donor_of.insert(group[i].clone(), donor);
        }
    }
    Ok(MismatchPairing { donor_of, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::{AudioSource, Utterance};

    fn speaker(id: &str, gender: Gender, n: usize) -> SpeakerRecord {
        let utterances = (0..n)
            .map(|i| Utterance {
                id: format!("{id}-u{i:04}"),
                speaker_id: id.into(),
                text: "one two three four".into(),
                audio_ref: format!("real/{id}-u{i:04}"),
                duration_s: 3.0,
                domain: Domain::Real,
                source: AudioSource::Recording,
            })
            .collect();
        SpeakerRecord {
            speaker_id: id.into(),
            gender,
            utterances,
        }
    }

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("u{i:04}")).collect()
    }

    #[test]
    fn split_240_is_200_20_20() {
        let rec = speaker("s01", Gender::M, 240);
        let s = split_speaker(&rec, SplitRatio::default(), 1).unwrap();
        assert_eq!(s.train_ids.len(), 200);
        assert_eq!(s.valid_ids.len(), 20);
        assert_eq!(s.test_ids.len(), 20);
    }

    #[test]
    fn split_12_is_10_1_1() {
        let rec = speaker("s01", Gender::M, 12);
        let s = split_speaker(&rec, SplitRatio::default(), 1).unwrap();
        assert_eq!(
            (s.train_ids.len(), s.valid_ids.len(), s.test_ids.len()),
            (10, 1, 1)
        );
    }

    #[test]
    fn split_too_few_rejected() {
        let rec = speaker("s01", Gender::M, 11);
        assert!(matches!(
            split_speaker(&rec, SplitRatio::default(), 1),
            Err(ComposeError::TooFewUtterances { need: 12, .. })
        ));
    }

    #[test]
    fn split_partitions_input() {
        let rec = speaker("s01", Gender::M, 57);
        let s = split_speaker(&rec, SplitRatio::default(), 9).unwrap();
        let mut all: Vec<String> = s
            .train_ids
            .iter()
            .chain(&s.valid_ids)
            .chain(&s.test_ids)
            .cloned()
            .collect();
        all.sort();
        let mut expect: Vec<String> = rec.utterances.iter().map(|u| u.id.clone()).collect();
        expect.sort();
        assert_eq!(all, expect);
    }

    #[test]
    fn split_deterministic_and_seed_sensitive() {
        let rec = speaker("s01", Gender::M, 120);
        let a = split_speaker(&rec, SplitRatio::default(), 1).unwrap();
        let b = split_speaker(&rec, SplitRatio::default(), 1).unwrap();
        assert_eq!(a, b);
        let c = split_speaker(&rec, SplitRatio::default(), 2).unwrap();
        assert_eq!(a.train_ids.len(), c.train_ids.len());
        assert_ne!(a.train_ids, c.train_ids);
    }

    #[test]
    fn split_order_insensitive() {
        let mut rec = speaker("s01", Gender::M, 40);
        let a = split_speaker(&rec, SplitRatio::default(), 5).unwrap();
        rec.utterances.reverse();
        let b = split_speaker(&rec, SplitRatio::default(), 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn subset_200_at_10_percent() {
        let (real, synth) = sample_real_subset(&ids(200), 0.10, 3).unwrap();
        assert_eq!(real.len(), 20);
        assert_eq!(synth.len(), 180);
        let mut all: Vec<String> = real.iter().chain(&synth).cloned().collect();
        all.sort();
        assert_eq!(all, ids(200));
    }

    #[test]
    fn subset_minimum_clamp() {
        let (real, synth) = sample_real_subset(&ids(5), 0.10, 3).unwrap();
        assert_eq!(real.len(), 1);
        assert_eq!(synth.len(), 4);
    }

    #[test]
    fn subset_exact_half() {
        let (real, synth) = sample_real_subset(&ids(10), 0.5, 3).unwrap();
        assert_eq!((real.len(), synth.len()), (5, 5));
    }

    #[test]
    fn compose_effective_size() {
        let real = ids(20);
        let synth: Vec<String> = (0..180).map(|i| format!("v{i:04}")).collect();
        let plan = compose_training_set(&real, &synth, 3, true, 0).unwrap();
        assert_eq!(plan.effective_size(), 240);
        let real_slots: usize = plan
            .entries
            .iter()
            .filter(|e| e.domain_label == Domain::Real)
            .map(|e| e.multiplicity as usize)
            .sum();
        assert_eq!(real_slots, 60);
    }

    #[test]
    fn compose_identity_factor_and_degenerate() {
        let real = ids(4);
        let synth: Vec<String> = vec!["v1".into()];
        let plan = compose_training_set(&real, &synth, 1, false, 0).unwrap();
        assert!(plan.entries.iter().all(|e| e.multiplicity == 1));
        assert_eq!(plan.effective_size(), 5);

        let only_real = compose_training_set(&ids(20), &[], 3, false, 0).unwrap();
        assert_eq!(only_real.effective_size(), 60);
        assert!(only_real
            .entries
            .iter()
            .all(|e| e.domain_label == Domain::Real));
    }

    #[test]
    fn compose_rejects_overlap() {
        let real = ids(3);
        let synth = vec!["u0001".to_string()];
        assert!(matches!(
            compose_training_set(&real, &synth, 3, true, 0),
            Err(ComposeError::Overlap(id)) if id == "u0001"
        ));
    }

    #[test]
    fn pairing_two_per_gender_is_forced_swap() {
        let speakers = vec![
            speaker("m1", Gender::M, 1),
            speaker("m2", Gender::M, 1),
            speaker("f1", Gender::F, 1),
            speaker("f2", Gender::F, 1),
        ];
        let p = pair_mismatched(&speakers, 11).unwrap();
        assert_eq!(p.donor_of["m1"], "m2");
        assert_eq!(p.donor_of["m2"], "m1");
        assert_eq!(p.donor_of["f1"], "f2");
        assert_eq!(p.donor_of["f2"], "f1");
    }

    #[test]
    fn pairing_single_speaker_rejected() {
        let speakers = vec![speaker("m1", Gender::M, 1)];
        assert!(matches!(
            pair_mismatched(&speakers, 1),
            Err(ComposeError::InsufficientSpeakers { got: 1, .. })
        ));
    }

    #[test]
    fn pairing_three_same_gender_is_a_three_cycle() {
        let speakers = vec![
            speaker("a", Gender::F, 1),
            speaker("b", Gender::F, 1),
            speaker("c", Gender::F, 1),
        ];
        for seed in 0..20 {
            let p = pair_mismatched(&speakers, seed).unwrap();
            // all derangements of 3 elements are the two 3-cycles
            for (t, d) in &p.donor_of {
                assert_ne!(t, d, "fixpoint at seed {seed}");
            }
            let a2 = &p.donor_of[&p.donor_of["a"]];
            let a3 = &p.donor_of[a2.as_str()];
            assert_eq!(a3, "a", "not a 3-cycle at seed {seed}");
        }
    }

    #[test]
    fn pairing_respects_gender() {
        let speakers = vec![
            speaker("m1", Gender::M, 1),
            speaker("m2", Gender::M, 1),
            speaker("m3", Gender::M, 1),
            speaker("f1", Gender::F, 1),
            speaker("f2", Gender::F, 1),
        ];
        let p = pair_mismatched(&speakers, 4).unwrap();
        for (t, d) in &p.donor_of {
            let tg = speakers.iter().find(|s| &s.speaker_id == t).unwrap().gender;
            let dg = speakers.iter().find(|s| &s.speaker_id == d).unwrap().gender;
            assert_eq!(tg, dg);
            assert_ne!(t, d);
        }
    }
}
