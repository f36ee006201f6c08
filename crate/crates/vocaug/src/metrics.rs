//! Objective and statistical evaluation measures.
//!
//! Everything here is a pure function: Levenshtein edit distance, character
//! and word error rates with a shared text normalization, speaker-embedding
//! cosine similarity, multi-seed aggregation of metric reports, an exact
//! two-sided binomial test for ABX preferences, and MOS confidence
//! intervals. Rates are stored as fractions; report emitters format them as
//! percent.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("reference text is empty after normalization")]
    EmptyReference,
    #[error("embedding dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("zero-norm embedding vector")]
    ZeroVector,
    #[error("unbalanced runs: {0}")]
    UnbalancedRuns(String),
    #[error("need at least 2 scores for a confidence interval, got {0}")]
    TooFewScores(usize),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

// ============================================================================
// Edit distance and error rates
// ============================================================================

/// Unit-cost Levenshtein distance between two token sequences.
///
/// Rolling two-row dynamic program; `dist(a, a) == 0` and the triangle
/// inequality holds for unit costs.
pub fn edit_distance<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> usize {
    if reference.is_empty() {
        return hypothesis.len();
    }
    if hypothesis.is_empty() {
        return reference.len();
    }
    let m = hypothesis.len();
    let mut prev: Vec<usize> = (0..=m).collect();
    let mut curr = vec![0usize; m + 1];
    for (i, r) in reference.iter().enumerate() {
        curr[0] = i + 1;
        for (j, h) in hypothesis.iter().enumerate() {
            let cost = usize::from(r != h);
            curr[j + 1] = (prev[j + 1] + 1) // deletion
                .min(curr[j] + 1) // insertion
                .min(prev[j] + cost); // substitution
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[m]
}

/// An edit count normalized by reference length. The rate may exceed 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRate {
    pub edits: usize,
    pub ref_len: usize,
}

impl ErrorRate {
    pub fn rate(&self) -> f64 {
        self.edits as f64 / self.ref_len as f64
    }

    pub fn as_percent(&self) -> f64 {
        100.0 * self.rate()
    }
}

/// Scoring normalization: lowercase, strip punctuation, collapse whitespace.
///
/// Kept characters are ASCII alphanumerics, apostrophe and hyphen; every
/// other character acts as a word separator.
pub fn normalize_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_space = false;
    for c in s.chars() {
        let keep = c.is_ascii_alphanumeric() || c == '\'' || c == '-';
        if keep {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.extend(c.to_lowercase());
        } else {
            pending_space = true;
        }
    }
    out
}

/// Word error rate over normalized text.
pub fn wer(reference: &str, hypothesis: &str) -> Result<ErrorRate, MetricsError> {
    let r = normalize_text(reference);
    let h = normalize_text(hypothesis);
    let r_tok: Vec<&str> = r.split_whitespace().collect();
    if r_tok.is_empty() {
        return Err(MetricsError::EmptyReference);
    }
    let h_tok: Vec<&str> = h.split_whitespace().collect();
    Ok(ErrorRate {
        edits: edit_distance(&r_tok, &h_tok),
        ref_len: r_tok.len(),
    })
}

/// Character error rate over normalized text.
///
/// Spaces count as characters after whitespace collapse, so word boundaries
/// contribute to the reference length exactly once each.
pub fn cer(reference: &str, hypothesis: &str) -> Result<ErrorRate, MetricsError> {
    let r = normalize_text(reference);
    if r.is_empty() {
        return Err(MetricsError::EmptyReference);
    }
    let h = normalize_text(hypothesis);
    let r_chars: Vec<char> = r.chars().collect();
    let h_chars: Vec<char> = h.chars().collect();
    Ok(ErrorRate {
        edits: edit_distance(&r_chars, &h_chars),
        ref_len: r_chars.len(),
    })
}

// ============================================================================
// Speaker-embedding cosine similarity
// ============================================================================

/// Cosine similarity between two speaker embeddings, in `[-1, 1]` up to
/// numerical slack.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SecsScore(f64);

impl SecsScore {
    pub fn value(&self) -> f64 {
        self.0
    }
}

pub fn secs(e1: &[f64], e2: &[f64]) -> Result<SecsScore, MetricsError> {
    if e1.len() != e2.len() {
        return Err(MetricsError::DimensionMismatch(e1.len(), e2.len()));
    }
    let dot: f64 = e1.iter().zip(e2).map(|(a, b)| a * b).sum();
    let n1: f64 = e1.iter().map(|a| a * a).sum::<f64>().sqrt();
    let n2: f64 = e2.iter().map(|a| a * a).sum::<f64>().sqrt();
    if n1 == 0.0 || n2 == 0.0 {
        return Err(MetricsError::ZeroVector);
    }
    let v = dot / (n1 * n2);
    debug_assert!(v.abs() <= 1.0 + 1e-9);
    Ok(SecsScore(v))
}

// ============================================================================
// Metric reports and multi-seed aggregation
// ============================================================================

/// One evaluation cell: a speaker under one experiment configuration and one
/// seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub config_tag: String,
    pub speaker_id: String,
    pub seed: u64,
    pub secs: f64,
    pub cer: f64,
    pub wer: f64,
}

/// SECS/CER/WER triple; the summary payload of an aggregation cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricTriple {
    pub secs: f64,
    pub cer: f64,
    pub wer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub config_tag: String,
    pub seeds_per_cell: usize,
    /// Unweighted mean over seeds, then over speakers.
    pub overall: MetricTriple,
    pub per_speaker: BTreeMap<String, MetricTriple>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Averages reports per configuration: over seeds first, then unweighted
/// over speakers. Every `(speaker, config)` cell must hold the same number
/// of seeds, otherwise the aggregate would silently weight speakers
/// unevenly.
pub fn aggregate_runs(reports: &[MetricReport]) -> Result<Vec<ConfigSummary>, MetricsError> {
    let mut cells: BTreeMap<(String, String), Vec<&MetricReport>> = BTreeMap::new();
    for r in reports {
        cells
            .entry((r.config_tag.clone(), r.speaker_id.clone()))
            .or_default()
            .push(r);
    }
    if cells.is_empty() {
        return Ok(Vec::new());
    }
    let mut seed_counts: BTreeSet<usize> = BTreeSet::new();
    for ((tag, spk), rs) in &cells {
        let seeds: BTreeSet<u64> = rs.iter().map(|r| r.seed).collect();
        if seeds.len() != rs.len() {
            return Err(MetricsError::UnbalancedRuns(format!(
                "duplicate seed for speaker {spk} under {tag}"
            )));
        }
        seed_counts.insert(rs.len());
    }
    if seed_counts.len() != 1 {
        return Err(MetricsError::UnbalancedRuns(format!(
            "seed counts differ across cells: {seed_counts:?}"
        )));
    }
    let seeds_per_cell = *seed_counts.iter().next().unwrap();

    let mut by_tag: BTreeMap<String, BTreeMap<String, MetricTriple>> = BTreeMap::new();
    for ((tag, spk), rs) in &cells {
        let triple = MetricTriple {
            secs: mean(&rs.iter().map(|r| r.secs).collect::<Vec<_>>()),
            cer: mean(&rs.iter().map(|r| r.cer).collect::<Vec<_>>()),
            wer: mean(&rs.iter().map(|r| r.wer).collect::<Vec<_>>()),
        };
        by_tag.entry(tag.clone()).or_default().insert(spk.clone(), triple);
    }

    Ok(by_tag
        .into_iter()
        .map(|(config_tag, per_speaker)| {
            let overall = MetricTriple {
                secs: mean(&per_speaker.values().map(|t| t.secs).collect::<Vec<_>>()),
                cer: mean(&per_speaker.values().map(|t| t.cer).collect::<Vec<_>>()),
                wer: mean(&per_speaker.values().map(|t| t.wer).collect::<Vec<_>>()),
            };
            ConfigSummary {
                config_tag,
                seeds_per_cell,
                overall,
                per_speaker,
            }
        })
        .collect())
}

// ============================================================================
// Significance statistics
// ============================================================================

/// Exact two-sided binomial test against p = 0.5.
///
/// Sums the probability of every outcome at most as likely as the observed
/// one; for the symmetric null this equals `min(1, 2 * tail)`.
pub fn binomial_two_sided(k: u64, n: u64) -> f64 {
    assert!(n >= 1 && k <= n, "need 0 <= k <= n, n >= 1");
    // work with the farther tail: by symmetry p(k) == p(n - k)
    let hi = k.max(n - k);
    if 2 * hi == n {
        return 1.0;
    }
    // tail mass P(X >= hi) via exact binomial coefficients
    let tail: f64 = (hi..=n).map(|i| binomial_pmf_half(n, i)).sum();
    (2.0 * tail).min(1.0)
}

/// P(X = k) for X ~ Bin(n, 1/2), evaluated in log space to stay exact-ish
/// for n beyond u128 range.
fn binomial_pmf_half(n: u64, k: u64) -> f64 {
    // ln C(n, k) - n ln 2, accumulated as a product of ratios
    let k = k.min(n - k);
    let mut ln_c = 0.0f64;
    for i in 0..k {
        ln_c += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
    }
    (ln_c - n as f64 * std::f64::consts::LN_2).exp()
}

/// Mean opinion score summary: mean and the 95% confidence half-width
/// `1.96 * s / sqrt(n)` with `s` the sample standard deviation.
pub fn mos_ci(scores: &[f64]) -> Result<(f64, f64), MetricsError> {
    if scores.len() < 2 {
        return Err(MetricsError::TooFewScores(scores.len()));
    }
    let n = scores.len() as f64;
    let m = mean(scores);
    let var = scores.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / (n - 1.0);
    Ok((m, 1.96 * var.sqrt() / n.sqrt()))
}

// ============================================================================
// Report emission
// ============================================================================

/// Writes one CSV row per report. Rates are raw fractions; see
/// [`write_summary_json`] for the percent-formatted table view.
pub fn write_reports_csv(reports: &[MetricReport], path: &Path) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["config_tag", "speaker_id", "seed", "secs", "cer", "wer"])?;
    for r in reports {
        w.write_record([
            r.config_tag.clone(),
            r.speaker_id.clone(),
            r.seed.to_string(),
            format!("{:.6}", r.secs),
            format!("{:.6}", r.cer),
            format!("{:.6}", r.wer),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_reports_csv(path: &Path) -> Result<Vec<MetricReport>, MetricsError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for record in rdr.deserialize::<(String, String, u64, f64, f64, f64)>() {
        let (config_tag, speaker_id, seed, secs, cer, wer) = record?;
        out.push(MetricReport {
            config_tag,
            speaker_id,
            seed,
            secs,
            cer,
            wer,
        });
    }
    Ok(out)
}

/// Summary table mirroring the objective-results layout: one row per
/// configuration with SECS (fraction) and CER/WER in percent.
pub fn write_summary_json(
    summaries: &[ConfigSummary],
    path: &Path,
) -> Result<(), MetricsError> {
    #[derive(Serialize)]
    struct Row<'a> {
        config_tag: &'a str,
        seeds_per_cell: usize,
        secs: f64,
        cer_percent: f64,
        wer_percent: f64,
        per_speaker: BTreeMap<&'a str, [f64; 3]>,
    }
    let rows: Vec<Row> = summaries
        .iter()
        .map(|s| Row {
            config_tag: &s.config_tag,
            seeds_per_cell: s.seeds_per_cell,
            secs: round6(s.overall.secs),
            cer_percent: round6(100.0 * s.overall.cer),
            wer_percent: round6(100.0 * s.overall.wer),
            per_speaker: s
                .per_speaker
                .iter()
                .map(|(k, t)| {
                    (
                        k.as_str(),
                        [round6(t.secs), round6(100.0 * t.cer), round6(100.0 * t.wer)],
                    )
                })
                .collect(),
        })
        .collect();
    let mut f = std::fs::File::create(path)?;
    let body = serde_json::to_string_pretty(&serde_json::json!({ "rows": rows }))
        .expect("summary serializes");
    f.write_all(body.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn edit_distance_kitten_sitting() {
        assert_eq!(edit_distance(&chars("kitten"), &chars("sitting")), 3);
    }

    #[test]
    fn edit_distance_identity_and_insertion() {
        assert_eq!(edit_distance(&chars("abc"), &chars("abc")), 0);
        assert_eq!(edit_distance(&chars(""), &chars("abc")), 3);
        assert_eq!(edit_distance(&chars("abc"), &chars("")), 3);
    }

    #[test]
    fn wer_basic_cases() {
        let r = wer("the cat sat", "the cat").unwrap();
        assert_eq!((r.edits, r.ref_len), (1, 3));
        assert!((r.rate() - 1.0 / 3.0).abs() < 1e-15);

        let same = wer("Hello, world!", "hello world").unwrap();
        assert_eq!(same.edits, 0);

        // rate above one: one-word reference, two-word hypothesis
        let over = wer("a", "b c").unwrap();
        assert_eq!((over.edits, over.ref_len), (2, 1));
        assert!((over.rate() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn wer_empty_reference_rejected() {
        assert!(matches!(wer("  ...  ", "x"), Err(MetricsError::EmptyReference)));
    }

    #[test]
    fn cer_counts_collapsed_spaces() {
        // "a b" vs "a b" -> 0 edits over 3 chars including the space
        let r = cer("a  b", "a b").unwrap();
        assert_eq!((r.edits, r.ref_len), (0, 3));
    }

    #[test]
    fn normalization_strips_punctuation_and_case() {
        assert_eq!(normalize_text("  The QUICK, brown-fox! "), "the quick brown-fox");
    }

    #[test]
    fn secs_known_values() {
        let v = [1.0, 2.0, -3.0];
        assert!((secs(&v, &v).unwrap().value() - 1.0).abs() < 1e-12);
        assert!((secs(&[1.0, 0.0], &[0.0, 1.0]).unwrap().value()).abs() < 1e-12);
        let h = secs(&[1.0, 0.0], &[1.0, 1.0]).unwrap().value();
        assert!((h - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn secs_error_paths() {
        assert!(matches!(
            secs(&[1.0], &[1.0, 2.0]),
            Err(MetricsError::DimensionMismatch(1, 2))
        ));
        assert!(matches!(secs(&[0.0, 0.0], &[1.0, 0.0]), Err(MetricsError::ZeroVector)));
    }

    fn report(tag: &str, spk: &str, seed: u64, secs: f64) -> MetricReport {
        MetricReport {
            config_tag: tag.into(),
            speaker_id: spk.into(),
            seed,
            secs,
            cer: 0.05,
            wer: 0.10,
        }
    }

    #[test]
    fn aggregate_means_over_seeds_then_speakers() {
        let reports = vec![
            report("dc", "a", 1, 0.80),
            report("dc", "a", 2, 0.82),
            report("dc", "a", 3, 0.81),
        ];
        let s = aggregate_runs(&reports).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s[0].overall.secs - 0.81).abs() < 1e-12);

        let reports = vec![report("dc", "a", 1, 0.8), report("dc", "b", 1, 0.9)];
        let s = aggregate_runs(&reports).unwrap();
        assert!((s[0].overall.secs - 0.85).abs() < 1e-12);
    }

    #[test]
    fn aggregate_rejects_missing_seed() {
        let reports = vec![
            report("dc", "a", 1, 0.8),
            report("dc", "a", 2, 0.8),
            report("dc", "b", 1, 0.9),
        ];
        assert!(matches!(
            aggregate_runs(&reports),
            Err(MetricsError::UnbalancedRuns(_))
        ));
    }

    #[test]
    fn binomial_known_values() {
        // 2 * sum_{i=15..20} C(20, i) / 2^20 = 43400 / 1048576
        let p = binomial_two_sided(15, 20);
        assert!((p - 43400.0 / 1048576.0).abs() < 1e-12);
        assert_eq!(binomial_two_sided(10, 20), 1.0);
        // extreme tail, clipped at 1 for n = 1
        assert!((binomial_two_sided(8, 8) - 2.0 * 0.5f64.powi(8)).abs() < 1e-15);
        assert_eq!(binomial_two_sided(1, 1), 1.0);
    }

    #[test]
    fn binomial_null_symmetry() {
        for n in 1..=40u64 {
            for k in 0..=n {
                let a = binomial_two_sided(k, n);
                let b = binomial_two_sided(n - k, n);
                assert!((a - b).abs() < 1e-12, "asymmetry at k={k} n={n}");
            }
        }
    }

    #[test]
    fn mos_ci_hand_values() {
        let (m, hw) = mos_ci(&[4.0, 4.0, 4.0]).unwrap();
        assert_eq!((m, hw), (4.0, 0.0));

        // s = sqrt(2), halfwidth = 1.96 * sqrt(2) / sqrt(2) = 1.96
        let (m, hw) = mos_ci(&[3.0, 5.0]).unwrap();
        assert!((m - 4.0).abs() < 1e-12);
        assert!((hw - 1.96).abs() < 1e-12);

        // s = 0.5, halfwidth = 1.96 * 0.5 / 2 = 0.49
        let (m, hw) = mos_ci(&[4.0, 4.0, 4.0, 5.0]).unwrap();
        assert!((m - 4.25).abs() < 1e-12);
        assert!((hw - 0.49).abs() < 1e-12);
    }

    #[test]
    fn mos_ci_needs_two_scores() {
        assert!(matches!(mos_ci(&[4.0]), Err(MetricsError::TooFewScores(1))));
    }
}
