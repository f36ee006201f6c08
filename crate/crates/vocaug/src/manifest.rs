//! Corpus data model and JSON-lines manifest I/O.
//!
//! A manifest file starts with a header line naming the corpus and its
//! speakers, followed by one utterance object per line:
//!
//! ```text
//! {"corpus":"demo","speakers":[{"id":"s01","gender":"M"}, ...]}
//! {"id":"s01-u0001","speaker_id":"s01","text":"...","audio_ref":"real/s01-u0001","duration_s":4.2,"domain":"real","source":"recording"}
//! ```
//!
//! The format is streamable, diff-friendly and append-safe. Loading
//! validates every invariant; `Manifest` values are immutable after load
//! and safe to share across threads.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Provenance of an utterance's audio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Real,
    Synthetic,
}

/// How the audio asset was produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AudioSource {
    Recording,
    /// Synthesized by the named zero-shot TTS source model.
    ZsTts(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gender {
    M,
    F,
}

/// One transcript with its audio-asset reference and provenance.
///
/// `audio_ref` is opaque to this crate: no audio is ever decoded here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: String,
    pub speaker_id: String,
    pub text: String,
    pub audio_ref: String,
    pub duration_s: f64,
    pub domain: Domain,
    pub source: AudioSource,
}

impl Utterance {
    fn check(&self) -> Result<(), ManifestError> {
        if self.text.trim().is_empty() {
            return Err(ManifestError::Validation(format!(
                "utterance {:?} has empty transcript",
                self.id
            )));
        }
        if !(self.duration_s >= 0.0) {
            return Err(ManifestError::Validation(format!(
                "utterance {:?} has negative or NaN duration {}",
                self.id, self.duration_s
            )));
        }
        let synthetic_source = matches!(self.source, AudioSource::ZsTts(_));
        if (self.domain == Domain::Synthetic) != synthetic_source {
            return Err(ManifestError::Validation(format!(
                "utterance {:?}: domain {:?} inconsistent with source {:?}",
                self.id, self.domain, self.source
            )));
        }
        Ok(())
    }

    /// Whitespace-token count of the transcript after trimming.
    pub fn word_count(&self) -> usize {
        self.text.split_whitespace().count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerRecord {
    pub speaker_id: String,
    pub gender: Gender,
    pub utterances: Vec<Utterance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub corpus_name: String,
    pub speakers: Vec<SpeakerRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_with_seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct HeaderSpeaker {
    id: String,
    gender: Gender,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    corpus: String,
    speakers: Vec<HeaderSpeaker>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

impl Manifest {
    /// Checks every manifest invariant: unique speaker and utterance ids,
    /// consistent per-speaker grouping, per-utterance field constraints and
    /// a nonzero total utterance count.
    pub fn validate(&self) -> Result<(), ManifestError> {
        let mut speaker_ids = BTreeSet::new();
        let mut utt_ids = BTreeSet::new();
        let mut total = 0usize;
        for spk in &self.speakers {
            if !speaker_ids.insert(spk.speaker_id.as_str()) {
                return Err(ManifestError::Validation(format!(
                    "duplicate speaker id {:?}",
                    spk.speaker_id
                )));
            }
            for utt in &spk.utterances {
                utt.check()?;
                if utt.speaker_id != spk.speaker_id {
                    return Err(ManifestError::Validation(format!(
                        "utterance {:?} filed under speaker {:?} but labeled {:?}",
                        utt.id, spk.speaker_id, utt.speaker_id
                    )));
                }
                if !utt_ids.insert(utt.id.as_str()) {
                    return Err(ManifestError::Validation(format!(
                        "duplicate utterance id {:?}",
                        utt.id
                    )));
                }
                total += 1;
            }
        }
        if total == 0 {
            return Err(ManifestError::Validation(
                "manifest contains no utterances".into(),
            ));
        }
        Ok(())
    }

    pub fn total_utterances(&self) -> usize {
        self.speakers.iter().map(|s| s.utterances.len()).sum()
    }

    pub fn speaker(&self, id: &str) -> Option<&SpeakerRecord> {
        self.speakers.iter().find(|s| s.speaker_id == id)
    }

    /// All utterances in file order.
    pub fn utterances(&self) -> impl Iterator<Item = &Utterance> {
        self.speakers.iter().flat_map(|s| s.utterances.iter())
    }
}

/// Loads and fully validates a JSON-lines manifest.
pub fn load_manifest(path: &Path) -> Result<Manifest, ManifestError> {
    let file = File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| ManifestError::Parse {
            line: 1,
            message: "empty file, expected header line".into(),
        })??;
    let header: Header = serde_json::from_str(&header_line).map_err(|e| ManifestError::Parse {
        line: 1,
        message: e.to_string(),
    })?;

    let mut by_speaker: BTreeMap<String, Vec<Utterance>> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    for hs in &header.speakers {
        if by_speaker.insert(hs.id.clone(), Vec::new()).is_some() {
            return Err(ManifestError::Validation(format!(
                "duplicate speaker id {:?} in header",
                hs.id
            )));
        }
        order.push(hs.id.clone());
    }

    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let utt: Utterance = serde_json::from_str(&line).map_err(|e| ManifestError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let bucket = by_speaker
            .get_mut(&utt.speaker_id)
            .ok_or_else(|| ManifestError::Validation(format!(
                "utterance {:?} names unknown speaker {:?}",
                utt.id, utt.speaker_id
            )))?;
        bucket.push(utt);
    }

    let speakers = order
        .into_iter()
        .map(|id| {
            let gender = header
                .speakers
                .iter()
                .find(|h| h.id == id)
                .map(|h| h.gender)
                .expect("header speaker present");
            SpeakerRecord {
                speaker_id: id.clone(),
                gender,
                utterances: by_speaker.remove(&id).unwrap_or_default(),
            }
        })
        .collect();

    let manifest = Manifest {
        corpus_name: header.corpus,
        speakers,
        created_with_seed: header.seed,
    };
    manifest.validate()?;
    Ok(manifest)
}

/// Writes a validated manifest; `load_manifest(write_manifest(m)) == m`.
pub fn write_manifest(m: &Manifest, path: &Path) -> Result<(), ManifestError> {
    m.validate()?;
    let header = Header {
        corpus: m.corpus_name.clone(),
        speakers: m
            .speakers
            .iter()
            .map(|s| HeaderSpeaker {
                id: s.speaker_id.clone(),
                gender: s.gender,
            })
            .collect(),
        seed: m.created_with_seed,
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &header).map_err(io_from_json)?;
    w.write_all(b"\n")?;
    for utt in m.utterances() {
        serde_json::to_writer(&mut w, utt).map_err(io_from_json)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn io_from_json(e: serde_json::Error) -> ManifestError {
    ManifestError::Io(std::io::Error::other(e))
}

// ============================================================================
// Transcript filtering
// ============================================================================

/// Character classes treated as disqualifying for training transcripts.
///
/// The banned set is configuration, not a fixed rule: corpora disagree on
/// what counts as a non-verbal token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BannedTokenClass {
    /// Any ASCII digit in the transcript.
    Digits,
    /// Bracketed annotations such as `[laugh]` or `<noise>`.
    BracketedTokens,
    /// Characters outside letters, apostrophe, hyphen, space and terminal
    /// punctuation (`.`, `!`, `?`, `,`).
    NonVerbalSymbols,
}

impl BannedTokenClass {
    /// The default banned set applied when producing training corpora.
    pub fn default_set() -> BTreeSet<BannedTokenClass> {
        [
            BannedTokenClass::Digits,
            BannedTokenClass::BracketedTokens,
            BannedTokenClass::NonVerbalSymbols,
        ]
        .into()
    }

    fn matches(&self, text: &str) -> bool {
        match self {
            BannedTokenClass::Digits => text.chars().any(|c| c.is_ascii_digit()),
            BannedTokenClass::BracketedTokens => {
                ['[', ']', '<', '>', '{', '}'].iter().any(|b| text.contains(*b))
            }
            BannedTokenClass::NonVerbalSymbols => text.chars().any(|c| {
                !(c.is_alphabetic()
                    || c == '\''
                    || c == '-'
                    || c == ' '
                    || matches!(c, '.' | '!' | '?' | ','))
            }),
        }
    }
}

/// Drops utterances shorter than `min_words` words or containing banned
/// tokens. Retained utterances are untouched and keep their order; the
/// result may be empty.
pub fn filter_transcripts(
    m: &Manifest,
    min_words: usize,
    banned: &BTreeSet<BannedTokenClass>,
) -> Manifest {
    assert!(min_words >= 1, "min_words must be at least 1");
    let speakers = m
        .speakers
        .iter()
        .map(|spk| SpeakerRecord {
            speaker_id: spk.speaker_id.clone(),
            gender: spk.gender,
            utterances: spk
                .utterances
                .iter()
                .filter(|u| u.word_count() >= min_words && !banned.iter().any(|b| b.matches(&u.text)))
                .cloned()
                .collect(),
        })
        .collect();
    Manifest {
        corpus_name: m.corpus_name.clone(),
        speakers,
        created_with_seed: m.created_with_seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn utt(id: &str, spk: &str, text: &str, dur: f64) -> Utterance {
        Utterance {
            id: id.into(),
            speaker_id: spk.into(),
            text: text.into(),
            audio_ref: format!("real/{id}"),
            duration_s: dur,
            domain: Domain::Real,
            source: AudioSource::Recording,
        }
    }

    fn two_speaker_manifest() -> Manifest {
        Manifest {
            corpus_name: "demo".into(),
            speakers: vec![
                SpeakerRecord {
                    speaker_id: "s01".into(),
                    gender: Gender::M,
                    utterances: vec![
                        utt("s01-u1", "s01", "the quick brown fox", 3.0),
                        utt("s01-u2", "s01", "jumps over the lazy dog", 4.0),
                        utt("s01-u3", "s01", "pack my box with jugs", 5.0),
                    ],
                },
                SpeakerRecord {
                    speaker_id: "s02".into(),
                    gender: Gender::F,
                    utterances: vec![
                        utt("s02-u1", "s02", "five quacking zephyrs bolt", 3.5),
                        utt("s02-u2", "s02", "how vexingly quick daft", 2.5),
                        utt("s02-u3", "s02", "zebras jump the fence", 4.5),
                    ],
                },
            ],
            created_with_seed: Some(7),
        }
    }

    #[test]
    fn roundtrip_preserves_structure() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let m = two_speaker_manifest();
        write_manifest(&m, &path).unwrap();
        let loaded = load_manifest(&path).unwrap();
        assert_eq!(loaded, m);
        assert_eq!(loaded.total_utterances(), 6);
    }

    #[test]
    fn duplicate_utterance_id_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let mut m = two_speaker_manifest();
        m.speakers[0].utterances[1].id = "u1".into();
        m.speakers[0].utterances[0].id = "u1".into();
        let err = write_manifest(&m, &path).unwrap_err();
        match err {
            ManifestError::Validation(msg) => assert!(msg.contains("u1"), "{msg}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn negative_duration_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let m = two_speaker_manifest();
        write_manifest(&m, &path).unwrap();
        // patch duration in the raw file to keep the check on the load path
        let body = std::fs::read_to_string(&path).unwrap().replace("3.0", "-1.0");
        std::fs::write(&path, body).unwrap();
        assert!(matches!(
            load_manifest(&path),
            Err(ManifestError::Validation(_))
        ));
    }

    #[test]
    fn corrupt_byte_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        write_manifest(&two_speaker_manifest(), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // clobber the opening brace of the second line
        let second_line = bytes.iter().position(|&b| b == b'\n').unwrap() + 1;
        bytes[second_line] = b'X';
        std::fs::write(&path, bytes).unwrap();
        match load_manifest(&path) {
            Err(ManifestError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn domain_source_consistency_enforced() {
        let mut m = two_speaker_manifest();
        m.speakers[0].utterances[0].domain = Domain::Synthetic;
        assert!(matches!(m.validate(), Err(ManifestError::Validation(_))));
        m.speakers[0].utterances[0].source = AudioSource::ZsTts("alpha_tts".into());
        assert!(m.validate().is_ok());
    }

    #[test]
    fn empty_manifest_rejected_on_write() {
        let dir = tempfile::tempdir().unwrap();
        let m = Manifest {
            corpus_name: "demo".into(),
            speakers: vec![],
            created_with_seed: None,
        };
        assert!(matches!(
            write_manifest(&m, &dir.path().join("m.jsonl")),
            Err(ManifestError::Validation(_))
        ));
    }

    #[test]
    fn filter_min_words_boundary() {
        let mut m = two_speaker_manifest();
        m.speakers[0].utterances[0].text = "hi there".into(); // 2 words: dropped
        m.speakers[0].utterances[1].text = "one two three".into(); // exactly 3: kept
        let f = filter_transcripts(&m, 3, &BTreeSet::new());
        let ids: Vec<&str> = f.utterances().map(|u| u.id.as_str()).collect();
        assert!(!ids.contains(&"s01-u1"));
        assert!(ids.contains(&"s01-u2"));
    }

    #[test]
    fn filter_banned_classes() {
        let mut m = two_speaker_manifest();
        m.speakers[0].utterances[0].text = "call me at 5 tomorrow".into();
        m.speakers[0].utterances[1].text = "he said [laugh] loudly".into();
        m.speakers[0].utterances[2].text = "price is $40 total #tag".into();
        let f = filter_transcripts(&m, 1, &BannedTokenClass::default_set());
        assert_eq!(f.speakers[0].utterances.len(), 0);
        assert_eq!(f.speakers[1].utterances.len(), 3);
    }

    #[test]
    fn filter_is_idempotent_and_field_preserving() {
        let m = two_speaker_manifest();
        let banned = BannedTokenClass::default_set();
        let once = filter_transcripts(&m, 4, &banned);
        let twice = filter_transcripts(&once, 4, &banned);
        assert_eq!(once, twice);
        for u in once.utterances() {
            let orig = m.utterances().find(|o| o.id == u.id).unwrap();
            assert_eq!(orig, u);
        }
    }
}
