//! Per-technique probability profiles.
//!
//! A [`TechniqueProfile`] is trained from a list of `(candidate, correct?)`
//! outcomes. It stores the technique's prior match/mismatch rates and, for
//! each of ten score bins of width 0.1, the smoothed within-bin rates of
//! correct and incorrect matches. Add-one smoothing (denominator +2) keeps
//! every stored probability strictly inside `(0,1)`, so the posterior and
//! complementarity computations downstream are always defined.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matchers::{MatchCandidate, TechniqueId};

/// Number of score bins partitioning `[0,1]`.
pub const NUM_BINS: usize = 10;

/// Tolerance for the "probabilities sum to 1" invariants.
pub const PROB_SUM_EPS: f64 = 1e-12;

/// One of ten score bins. Bin `b` covers `[b/10, (b+1)/10)`, except bin 9
/// which also includes 1.0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BinIndex(u8);

impl BinIndex {
    pub fn new(index: usize) -> Result<Self> {
        if index < NUM_BINS {
            Ok(Self(index as u8))
        } else {
            Err(Error::ProfileParse(format!("bin index {index} out of range")))
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = BinIndex> {
        (0..NUM_BINS as u8).map(BinIndex)
    }
}

impl std::fmt::Display for BinIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Maps a matching score in `[0,1]` to its covering bin.
pub fn bin_of(score: f64) -> Result<BinIndex> {
    if !(0.0..=1.0).contains(&score) {
        return Err(Error::ScoreOutOfRange(score));
    }
    let b = (score * NUM_BINS as f64).floor() as usize;
    Ok(BinIndex(b.min(NUM_BINS - 1) as u8))
}

/// Raw per-bin outcome counts, kept unsmoothed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BinCounts {
    /// Correct matches that scored in this bin.
    pub matches: u64,
    /// Incorrect matches that scored in this bin.
    pub mismatches: u64,
}

impl BinCounts {
    /// All scored queries in this bin.
    pub fn total(&self) -> u64 {
        self.matches + self.mismatches
    }
}

/// Counts plus smoothed within-bin rates for one score bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinStats {
    pub counts: BinCounts,
    /// Smoothed rate of correct matches in this bin: `(W+1)/(X+2)`.
    pub likelihood_match: f64,
    /// Smoothed rate of incorrect matches in this bin: `(Y+1)/(X+2)`.
    pub likelihood_mismatch: f64,
}

impl BinStats {
    fn from_counts(counts: BinCounts) -> Self {
        let x = counts.total() as f64;
        Self {
            counts,
            likelihood_match: (counts.matches as f64 + 1.0) / (x + 2.0),
            likelihood_mismatch: (counts.mismatches as f64 + 1.0) / (x + 2.0),
        }
    }
}

/// Trained statistics for one matching technique.
#[derive(Debug, Clone, PartialEq)]
pub struct TechniqueProfile {
    technique: TechniqueId,
    prior_match: f64,
    prior_mismatch: f64,
    bins: [BinStats; NUM_BINS],
    training_size: u64,
}

impl TechniqueProfile {
    pub fn technique(&self) -> &TechniqueId {
        &self.technique
    }

    /// Smoothed prior probability that this technique matches correctly.
    pub fn prior_match(&self) -> f64 {
        self.prior_match
    }

    /// Smoothed prior probability that this technique mismatches.
    pub fn prior_mismatch(&self) -> f64 {
        self.prior_mismatch
    }

    pub fn bin(&self, bin: BinIndex) -> &BinStats {
        &self.bins[bin.index()]
    }

    pub fn bins(&self) -> &[BinStats; NUM_BINS] {
        &self.bins
    }

    /// Number of training results the profile was built from.
    pub fn training_size(&self) -> u64 {
        self.training_size
    }
}

/// Trains a profile from per-query outcomes of one technique.
///
/// Priors are `(#correct+1)/(N+2)` and `(#incorrect+1)/(N+2)`; per bin the
/// rates are `(W+1)/(X+2)` and `(Y+1)/(X+2)`. Raw counts are retained
/// unsmoothed.
pub fn train_profile(
    technique: TechniqueId,
    results: &[(MatchCandidate, bool)],
) -> Result<TechniqueProfile> {
    if results.is_empty() {
        return Err(Error::EmptyResults);
    }
    let mut counts = [BinCounts::default(); NUM_BINS];
    let mut correct: u64 = 0;
    for (candidate, is_match) in results {
        let bin = bin_of(candidate.score)?;
        if *is_match {
            counts[bin.index()].matches += 1;
            correct += 1;
        } else {
            counts[bin.index()].mismatches += 1;
        }
    }
    let n = results.len() as u64;
    Ok(TechniqueProfile {
        technique,
        prior_match: (correct as f64 + 1.0) / (n as f64 + 2.0),
        prior_mismatch: ((n - correct) as f64 + 1.0) / (n as f64 + 2.0),
        bins: counts.map(BinStats::from_counts),
        training_size: n,
    })
}

// ── Serialization ─────────────────────────────────────────────────────────

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileDoc {
    technique: String,
    prior: PriorDoc,
    bins: Vec<BinDoc>,
    training_size: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PriorDoc {
    pm: f64,
    pmm: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BinDoc {
    w: u64,
    y: u64,
    x: u64,
    pzm: f64,
    pzmm: f64,
}

fn check_prob(field: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::ProbabilityOutOfRange { field, value })
    }
}

impl TechniqueProfile {
    /// Serializes to the profile JSON schema. serde_json prints `f64` with
    /// shortest round-trip precision, so reloading is lossless.
    pub fn to_json_string(&self) -> String {
        let doc = ProfileDoc {
            technique: self.technique.as_str().to_owned(),
            prior: PriorDoc {
                pm: self.prior_match,
                pmm: self.prior_mismatch,
            },
            bins: self
                .bins
                .iter()
                .map(|b| BinDoc {
                    w: b.counts.matches,
                    y: b.counts.mismatches,
                    x: b.counts.total(),
                    pzm: b.likelihood_match,
                    pzmm: b.likelihood_mismatch,
                })
                .collect(),
            training_size: self.training_size,
        };
        serde_json::to_string_pretty(&doc).expect("profile serialization cannot fail")
    }

    /// Parses and validates a profile document.
    ///
    /// Enforces the stored invariants: priors and per-bin rates strictly in
    /// `(0,1)` and summing to 1, `w + y = x` per bin, and bin totals summing
    /// to `training_size`. This is the untrusted-input entry point the
    /// `profile_json` fuzz target drives.
    pub fn from_json_str(json: &str) -> Result<Self> {
        let doc: ProfileDoc =
            serde_json::from_str(json).map_err(|e| Error::ProfileParse(e.to_string()))?;
        if doc.bins.len() != NUM_BINS {
            return Err(Error::ProfileParse(format!(
                "expected {NUM_BINS} bins, got {}",
                doc.bins.len()
            )));
        }
        check_prob("pm", doc.prior.pm)?;
        check_prob("pmm", doc.prior.pmm)?;
        let prior_sum = doc.prior.pm + doc.prior.pmm;
        if (prior_sum - 1.0).abs() > PROB_SUM_EPS {
            return Err(Error::PriorSum(prior_sum));
        }
        let mut bins = Vec::with_capacity(NUM_BINS);
        let mut total_x: u64 = 0;
        for (i, b) in doc.bins.iter().enumerate() {
            check_prob("pzm", b.pzm)?;
            check_prob("pzmm", b.pzmm)?;
            let sum = b.pzm + b.pzmm;
            if (sum - 1.0).abs() > PROB_SUM_EPS {
                return Err(Error::BinLikelihoodSum { bin: i, sum });
            }
            if b.w.checked_add(b.y) != Some(b.x) {
                return Err(Error::ProfileCounts(format!(
                    "bin {i}: w {} + y {} != x {}",
                    b.w, b.y, b.x
                )));
            }
            total_x = total_x
                .checked_add(b.x)
                .ok_or_else(|| Error::ProfileCounts("bin totals overflow".into()))?;
            bins.push(BinStats {
                counts: BinCounts {
                    matches: b.w,
                    mismatches: b.y,
                },
                likelihood_match: b.pzm,
                likelihood_mismatch: b.pzmm,
            });
        }
        if total_x != doc.training_size {
            return Err(Error::ProfileCounts(format!(
                "bin totals sum to {total_x} but training_size is {}",
                doc.training_size
            )));
        }
        Ok(TechniqueProfile {
            technique: TechniqueId::new(doc.technique),
            prior_match: doc.prior.pm,
            prior_mismatch: doc.prior.pmm,
            bins: bins.try_into().expect("length checked above"),
            training_size: doc.training_size,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&json)
    }
}
