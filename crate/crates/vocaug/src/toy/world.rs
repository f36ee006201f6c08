//! The parametric speech-feature universe.
//!
//! A world renders an utterance `(speaker, text, domain)` to a feature
//! vector
//!
//! ```text
//! y = A phi(text) + v_s + [domain = synthetic] * alpha * (v_zs - v_s) + noise
//! ```
//!
//! where `v_s` is the speaker direction, `v_zs` the prototype of the
//! synthesizing source model, and `alpha` the domain-shift strength. Speaker
//! directions are sampled orthogonal to the text subspace `col(A)`, so
//! identity and content factor cleanly; the embedder suppresses the text
//! subspace before projecting, mimicking a content-invariant speaker
//! encoder. `alpha` is calibrated by bisection so that measured
//! synthetic-vs-real similarity hits a configured target.
//!
//! The same world also backs the mock services: a noisy transcription
//! channel whose word-corruption probability grows with the text-subspace
//! discrepancy of the rendered vector, plus a deterministic hallucination
//! flag for synthesis jobs.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ToyError;
use crate::manifest::{AudioSource, Domain, Gender, Manifest, SpeakerRecord, Utterance};
use crate::metrics::normalize_text;
use crate::seeding::derive_seed;

/// How text maps to the linguistic feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextMapKind {
    /// L2-normalized character-trigram hash into `text_dim` buckets.
    TrigramHash,
    /// The zero map; used by closed-form oracle scenarios.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    /// Feature dimension D.
    pub feature_dim: usize,
    /// Text feature dimension K.
    pub text_dim: usize,
    /// Speaker-embedding dimension E.
    pub embed_dim: usize,
    pub speaker_ids: Vec<String>,
    pub source_models: Vec<String>,
    /// Per-render Gaussian noise scale.
    pub noise_sigma: f64,
    /// Norm of the text contribution `A phi` for unit `phi`.
    pub text_strength: f64,
    /// Fraction of the text subspace removed by the embedder, in [0, 1].
    pub embed_text_suppression: f64,
    /// Calibration target for mean synthetic-vs-real similarity.
    pub secs_target: f64,
    pub calibration_tolerance: f64,
    pub text_map: TextMapKind,
    /// Word-corruption floor of the transcription channel.
    pub asr_base_rate: f64,
    /// Corruption added per unit of text-subspace discrepancy.
    pub asr_error_slope: f64,
    /// Fraction of synthesis jobs that hallucinate.
    pub hallucination_rate: f64,
    /// Extra corruption applied to hallucinated assets.
    pub hallucination_boost: f64,
}

impl WorldConfig {
    /// The bundled demo universe: four speakers, two source models,
    /// calibrated to a synthetic-vs-real similarity of 0.763.
    pub fn demo(n_speakers: usize) -> Self {
        WorldConfig {
            feature_dim: 96,
            text_dim: 12,
            embed_dim: 96,
            speaker_ids: (1..=n_speakers).map(|i| format!("s{i:02}")).collect(),
            source_models: vec!["alpha_tts".into(), "beta_tts".into()],
            noise_sigma: 0.02,
            text_strength: 0.3,
            embed_text_suppression: 0.9,
            secs_target: 0.763,
            calibration_tolerance: 0.02,
            text_map: TextMapKind::TrigramHash,
            asr_base_rate: 0.003,
            asr_error_slope: 1.5,
            hallucination_rate: 0.12,
            hallucination_boost: 0.45,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToyWorld {
    pub config: WorldConfig,
    seed: u64,
    speakers: BTreeMap<String, DVector<f64>>,
    prototypes: BTreeMap<String, DVector<f64>>,
    /// Calibrated domain-shift strength alpha.
    shift_strength: f64,
    /// D x K, orthonormal columns; the mixing matrix is
    /// `text_strength * text_basis`.
    text_basis: DMatrix<f64>,
    /// E x D, orthonormal rows.
    embed_map: DMatrix<f64>,
}

fn gaussian_vector(dim: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| StandardNormal.sample(rng))
}

fn orthonormal_columns(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    assert!(cols <= rows, "need cols <= rows for orthonormal columns");
    let g = DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng));
    g.qr().q()
}

impl ToyWorld {
    /// Direct constructor for fully specified test universes. Calibration is
    /// skipped: `shift_strength` is taken as given.
    #[allow(clippy::too_many_arguments)]
    pub fn custom(
        config: WorldConfig,
        seed: u64,
        speakers: BTreeMap<String, DVector<f64>>,
        prototypes: BTreeMap<String, DVector<f64>>,
        shift_strength: f64,
        text_basis: DMatrix<f64>,
        embed_map: DMatrix<f64>,
    ) -> Self {
        ToyWorld {
            config,
            seed,
            speakers,
            prototypes,
            shift_strength,
            text_basis,
            embed_map,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn shift_strength(&self) -> f64 {
        self.shift_strength
    }

    pub fn speaker_ids(&self) -> impl Iterator<Item = &String> {
        self.speakers.keys()
    }

    pub fn speaker_direction(&self, speaker_id: &str) -> Option<&DVector<f64>> {
        self.speakers.get(speaker_id)
    }

    pub fn feature_dim(&self) -> usize {
        self.config.feature_dim
    }

    pub fn text_dim(&self) -> usize {
        self.config.text_dim
    }

    /// Linguistic features `phi(text)`.
    pub fn text_features(&self, text: &str) -> DVector<f64> {
        let k = self.config.text_dim;
        match self.config.text_map {
            TextMapKind::Zero => DVector::zeros(k),
            TextMapKind::TrigramHash => trigram_features(text, k),
        }
    }

    /// Renders an utterance to its feature vector.
    pub fn render(
        &self,
        speaker_id: &str,
        text: &str,
        domain: Domain,
        model: &str,
    ) -> Result<DVector<f64>, ToyError> {
        let v_s = self
            .speakers
            .get(speaker_id)
            .ok_or_else(|| ToyError::UnknownSpeaker(speaker_id.into()))?;
        let phi = self.text_features(text);
        let mut y = &self.text_basis * (phi * self.config.text_strength);
        y += v_s;
        let noise_labels: Vec<&str>;
        match domain {
            Domain::Real => {
                noise_labels = vec!["render", speaker_id, text, "real"];
            }
            Domain::Synthetic => {
                let v_zs = self
                    .prototypes
                    .get(model)
                    .ok_or_else(|| ToyError::UnknownModel(model.into()))?;
                y += (v_zs - v_s) * self.shift_strength;
                noise_labels = vec!["render", speaker_id, text, "synthetic", model];
            }
        }
        if self.config.noise_sigma > 0.0 {
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(self.seed, &noise_labels));
            y += gaussian_vector(self.config.feature_dim, &mut rng) * self.config.noise_sigma;
        }
        Ok(y)
    }

    /// Speaker-embedding projection: suppresses the text subspace, then
    /// applies the orthonormal embedding map.
    pub fn embed(&self, features: &DVector<f64>) -> DVector<f64> {
        let kappa = self.config.embed_text_suppression;
        let text_part = &self.text_basis * (self.text_basis.transpose() * features);
        &self.embed_map * (features - text_part * kappa)
    }

    /// Embedding of the pure speaker direction; the noise-free reference.
    pub fn reference_embedding(&self, speaker_id: &str) -> Result<DVector<f64>, ToyError> {
        let v_s = self
            .speakers
            .get(speaker_id)
            .ok_or_else(|| ToyError::UnknownSpeaker(speaker_id.into()))?;
        Ok(self.embed(v_s))
    }

    /// Deterministic hallucination flag for a synthesis job key.
    pub fn is_hallucinated(&self, job_key: &str) -> bool {
        let h = derive_seed(self.seed, &["hallucination", job_key]);
        (h as f64 / u64::MAX as f64) < self.config.hallucination_rate
    }

    /// Discrepancy between the rendered vector's text-subspace content and
    /// the stated transcript; drives the transcription channel.
    pub fn text_discrepancy(&self, features: &DVector<f64>, text: &str) -> f64 {
        let projected = self.text_basis.transpose() * features;
        let expected = self.text_features(text) * self.config.text_strength;
        (projected - expected).norm()
    }

    /// Noisy transcription of a rendered vector.
    ///
    /// Each word of the stated transcript is independently corrupted with
    /// probability `base + slope * text_discrepancy` (plus the hallucination
    /// boost where flagged); `corruption_override` replaces that probability
    /// wholesale when set.
    pub fn transcribe(
        &self,
        features: &DVector<f64>,
        text: &str,
        hallucinated: bool,
        corruption_override: Option<f64>,
    ) -> String {
        let p = match corruption_override {
            Some(p) => p,
            None => {
                let mut p = self.config.asr_base_rate
                    + self.config.asr_error_slope * self.text_discrepancy(features, text);
                if hallucinated {
                    p += self.config.hallucination_boost;
                }
                p
            }
        }
        .clamp(0.0, 0.9);

        let mut key = derive_seed(self.seed, &["asr", text]);
        for v in features.iter().take(8) {
            key = key.rotate_left(17).wrapping_add(v.to_bits());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let mut out: Vec<String> = Vec::new();
        for word in normalize_text(text).split_whitespace() {
            if rng.gen::<f64>() < p {
                match rng.gen_range(0u8..20) {
                    0..=13 => out.push(mangle_word(word, &mut rng)), // substitution
                    14..=16 => {}                                    // deletion
                    _ => {
                        out.push(word.to_string()); // insertion after the word
                        out.push(mangle_word(word, &mut rng));
                    }
                }
            } else {
                out.push(word.to_string());
            }
        }
        out.join(" ")
    }

    /// Mean synthetic-vs-real embedding similarity over the calibration
    /// protocol: every `(model, speaker, probe text)` triple, paired on the
    /// same text.
    pub fn measured_calibration_secs(&self) -> f64 {
        let probes = calibration_texts(self.seed);
        let mut scores = Vec::new();
        for model in self.prototypes.keys() {
            for speaker in self.speakers.keys() {
                for text in &probes {
                    let real = self
                        .render(speaker, text, Domain::Real, model)
                        .expect("calibration render");
                    let synth = self
                        .render(speaker, text, Domain::Synthetic, model)
                        .expect("calibration render");
                    let s = crate::metrics::secs(
                        self.embed(&real).as_slice(),
                        self.embed(&synth).as_slice(),
                    )
                    .expect("calibration embeddings are nonzero");
                    scores.push(s.value());
                }
            }
        }
        scores.iter().sum::<f64>() / scores.len() as f64
    }
}

fn calibration_texts(seed: u64) -> Vec<String> {
    generate_texts(8, derive_seed(seed, &["calibration"]))
}

/// Samples a calibrated world: speaker and prototype directions, text basis
/// and embedder are drawn from `seed`, then the domain-shift strength is
/// solved by bisection so measured synthetic-vs-real similarity matches
/// `config.secs_target`.
pub fn generate_world(config: &WorldConfig, seed: u64) -> Result<ToyWorld, ToyError> {
    let d = config.feature_dim;
    let k = config.text_dim;
    if d < 4 {
        return Err(ToyError::Config(format!("feature_dim must be >= 4, got {d}")));
    }
    if k < 1 || k >= d {
        return Err(ToyError::Config(format!(
            "text_dim must be in [1, feature_dim), got {k}"
        )));
    }
    if config.embed_dim < 1 || config.embed_dim > d {
        return Err(ToyError::Config(format!(
            "embed_dim must be in [1, feature_dim], got {}",
            config.embed_dim
        )));
    }
    if config.speaker_ids.is_empty() || config.source_models.is_empty() {
        return Err(ToyError::Config(
            "need at least one speaker and one source model".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &["world-basis"]));
    let text_basis = orthonormal_columns(d, k, &mut rng);

    // embed map with orthonormal rows: thin QR of a D x E Gaussian, transposed
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &["world-embed"]));
    let embed_map = orthonormal_columns(d, config.embed_dim, &mut rng).transpose();

    // directions orthogonal to the text subspace, so content never bleeds
    // into identity
    let unit_off_text = |label: &str, name: &str| -> DVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[label, name]));
        let g = gaussian_vector(d, &mut rng);
        let mut v = &g - &text_basis * (text_basis.transpose() * &g);
        let n = v.norm();
        v /= n;
        v
    };

    let speakers: BTreeMap<String, DVector<f64>> = config
        .speaker_ids
        .iter()
        .map(|id| (id.clone(), unit_off_text("speaker", id)))
        .collect();
    let prototypes: BTreeMap<String, DVector<f64>> = config
        .source_models
        .iter()
        .map(|m| (m.clone(), unit_off_text("prototype", m)))
        .collect();

    let mut world = ToyWorld {
        config: config.clone(),
        seed,
        speakers,
        prototypes,
        shift_strength: 0.0,
        text_basis,
        embed_map,
    };

    // Renders are independent of alpha, and the embedding is linear, so the
    // calibration objective can be evaluated from cached embeddings:
    // emb_synth(alpha) = emb(base) + alpha * emb(prototype - speaker).
    let probes = calibration_texts(seed);
    let mut pairs: Vec<(DVector<f64>, DVector<f64>, DVector<f64>)> = Vec::new();
    for model in config.source_models.iter() {
        let v_zs = world.prototypes[model].clone();
        for speaker in config.speaker_ids.iter() {
            let v_s = world.speakers[speaker].clone();
            world.shift_strength = 0.0;
            for text in &probes {
                let real = world.render(speaker, text, Domain::Real, model)?;
                let base_synth = world.render(speaker, text, Domain::Synthetic, model)?;
                pairs.push((
                    world.embed(&real),
                    world.embed(&base_synth),
                    world.embed(&(&v_zs - &v_s)),
                ));
            }
        }
    }
    let measure = |alpha: f64| -> f64 {
        let mut total = 0.0;
        for (real, base, shift) in &pairs {
            let synth = base + shift * alpha;
            let cos = real.dot(&synth) / (real.norm() * synth.norm());
            total += cos;
        }
        total / pairs.len() as f64
    };

    let hi_secs = measure(0.0);
    let lo_secs = measure(1.0);
    let target = config.secs_target;
    if !(lo_secs - 1e-12 <= target && target <= hi_secs + 1e-12) {
        return Err(ToyError::CalibrationFailure {
            target,
            lo: lo_secs,
            hi: hi_secs,
        });
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if measure(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    world.shift_strength = 0.5 * (lo + hi);

    let achieved = world.measured_calibration_secs();
    if (achieved - target).abs() > config.calibration_tolerance {
        return Err(ToyError::CalibrationFailure {
            target,
            lo: lo_secs,
            hi: hi_secs,
        });
    }
    Ok(world)
}

// ============================================================================
// Text features and generated transcripts
// ============================================================================

fn trigram_features(text: &str, buckets: usize) -> DVector<f64> {
    let mut v = DVector::zeros(buckets);
    let normalized = normalize_text(text);
    if normalized.is_empty() {
        return v;
    }
    let padded = format!(" {normalized} ");
    let bytes = padded.as_bytes();
    if bytes.len() < 3 {
        return v;
    }
    for w in bytes.windows(3) {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for &b in w {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        v[(h % buckets as u64) as usize] += 1.0;
    }
    let n = v.norm();
    if n > 0.0 {
        v /= n;
    }
    v
}

fn mangle_word(word: &str, rng: &mut ChaCha8Rng) -> String {
    let mut chars: Vec<char> = word.chars().collect();
    if chars.len() >= 2 {
        let i = rng.gen_range(0..chars.len() - 1);
        chars.swap(i, i + 1);
    }
    let mangled: String = chars.into_iter().collect();
    if mangled == word {
        format!("{word}x")
    } else {
        mangled
    }
}

const WORD_BANK: &[&str] = &[
    "the", "a", "this", "that", "every", "some", "quick", "slow", "bright", "dark", "quiet",
    "loud", "small", "large", "gentle", "sharp", "warm", "cold", "early", "late", "green",
    "blue", "red", "amber", "silver", "golden", "river", "mountain", "valley", "harbor",
    "garden", "window", "doorway", "lantern", "bridge", "meadow", "forest", "island",
    "castle", "village", "morning", "evening", "winter", "summer", "autumn", "spring",
    "teacher", "sailor", "painter", "farmer", "writer", "keeper", "runner", "singer",
    "walks", "runs", "sings", "reads", "writes", "paints", "carries", "follows", "watches",
    "listens", "remembers", "forgets", "opens", "closes", "builds", "repairs", "gathers",
    "scatters", "beside", "under", "over", "through", "between", "toward", "against",
    "without", "within", "softly", "quickly", "slowly", "carefully", "brightly", "barely",
    "nearly", "always", "never", "often", "seldom", "again", "alone", "together", "apart",
    "stone", "paper", "letter", "story", "song", "road", "path", "field", "cloud", "rain",
    "snow", "wind", "light", "shadow", "voice", "silence",
];

/// Deterministic pseudo-transcripts from a fixed word bank; 4 to 9 words
/// each, so they pass the default transcript filter.
pub fn generate_texts(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.gen_range(4..=9);
            let words: Vec<&str> = (0..len)
                .map(|_| WORD_BANK[rng.gen_range(0..WORD_BANK.len())])
                .collect();
            words.join(" ")
        })
        .collect()
}

/// Builds the bundled demo corpus: `n_speakers` alternating-gender speakers
/// with `utterances_per_speaker` generated transcripts each.
pub fn demo_corpus(n_speakers: usize, utterances_per_speaker: usize, seed: u64) -> Manifest {
    let speakers = (1..=n_speakers)
        .map(|i| {
            let speaker_id = format!("s{i:02}");
            let texts = generate_texts(
                utterances_per_speaker,
                derive_seed(seed, &["demo-texts", &speaker_id]),
            );
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(seed, &["demo-durations", &speaker_id]));
            let utterances = texts
                .into_iter()
                .enumerate()
                .map(|(j, text)| {
                    let id = format!("{speaker_id}-u{j:04}");
                    Utterance {
                        audio_ref: format!("real/{id}"),
                        id,
                        speaker_id: speaker_id.clone(),
                        text,
                        duration_s: rng.gen_range(2.0..11.0),
                        domain: Domain::Real,
                        source: AudioSource::Recording,
                    }
                })
                .collect();
            SpeakerRecord {
                speaker_id,
                gender: if i % 2 == 1 { Gender::M } else { Gender::F },
                utterances,
            }
        })
        .collect();
    Manifest {
        corpus_name: "demo".into(),
        speakers,
        created_with_seed: Some(seed),
    }
}
