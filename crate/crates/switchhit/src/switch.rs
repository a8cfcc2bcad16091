//! The switching engine.
//!
//! For each query the engine runs the current technique, converts its
//! matching score into a bin, and computes the posterior probability that
//! the retrieval is correct. A posterior at or above the threshold accepts
//! the answer; otherwise the untried techniques are ranked by their
//! complementarity with the technique that just failed (evaluated at that
//! technique's score bin) and the engine switches to the best candidate.
//! When every allowed attempt stays below the threshold, the attempt with
//! the maximum posterior wins.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::dataset::GrayImage;
use crate::error::{Error, Result};
use crate::matchers::{MatchCandidate, MatcherIndex, TechniqueId};
use crate::stats::{bin_of, BinIndex, TechniqueProfile, NUM_BINS};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Posterior probability of a correct match given the score bin:
/// `PM * L_M(bin) / (PM * L_M(bin) + PMM * L_MM(bin))`.
///
/// Smoothed profiles keep both joint terms positive, so the result always
/// lies strictly inside `(0,1)`.
pub fn posterior(profile: &TechniqueProfile, bin: BinIndex) -> f64 {
    let stats = profile.bin(bin);
    let joint_match = profile.prior_match() * stats.likelihood_match;
    let joint_mismatch = profile.prior_mismatch() * stats.likelihood_mismatch;
    joint_match / (joint_match + joint_mismatch)
}

/// How strongly technique B compensates technique A at a given score bin.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplementarityScore {
    pub pair: (TechniqueId, TechniqueId),
    /// Finite and positive for smoothed profiles.
    pub value: f64,
}

/// Ratio kernel of the complementarity score. Exposed separately so tests
/// can evaluate it on scaled likelihood lookups.
pub fn complementarity_value(
    likelihood_match_a: f64,
    likelihood_mismatch_a: f64,
    likelihood_match_b: f64,
    likelihood_mismatch_b: f64,
) -> f64 {
    (likelihood_match_a * likelihood_match_b) / (likelihood_mismatch_a * likelihood_mismatch_b)
}

/// Complementarity of A with B at the query's score bin.
pub fn complementarity(
    profile_a: &TechniqueProfile,
    profile_b: &TechniqueProfile,
    bin: BinIndex,
) -> ComplementarityScore {
    let a = profile_a.bin(bin);
    let b = profile_b.bin(bin);
    ComplementarityScore {
        pair: (profile_a.technique().clone(), profile_b.technique().clone()),
        value: complementarity_value(
            a.likelihood_match,
            a.likelihood_mismatch,
            b.likelihood_match,
            b.likelihood_mismatch,
        ),
    }
}

/// Combination, acceptance threshold, and attempt budget.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchConfig {
    combination: Vec<TechniqueId>,
    threshold: f64,
    max_attempts: usize,
}

impl SwitchConfig {
    /// Builds a config with the default threshold of 0.5 and an attempt
    /// budget equal to the combination size. The first technique is the
    /// primary.
    pub fn new(combination: Vec<TechniqueId>) -> Result<Self> {
        if combination.is_empty() {
            return Err(Error::SwitchConfig("combination is empty".into()));
        }
        for (i, id) in combination.iter().enumerate() {
            if combination[..i].contains(id) {
                return Err(Error::SwitchConfig(format!(
                    "duplicate technique \"{id}\" in combination"
                )));
            }
        }
        let max_attempts = combination.len();
        Ok(Self {
            combination,
            threshold: DEFAULT_THRESHOLD,
            max_attempts,
        })
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::SwitchConfig(format!(
                "threshold {threshold} outside [0,1]"
            )));
        }
        self.threshold = threshold;
        Ok(self)
    }

    pub fn with_max_attempts(mut self, max_attempts: usize) -> Result<Self> {
        if max_attempts == 0 {
            return Err(Error::SwitchConfig("max_attempts must be at least 1".into()));
        }
        self.max_attempts = max_attempts;
        Ok(self)
    }

    pub fn combination(&self) -> &[TechniqueId] {
        &self.combination
    }

    pub fn primary(&self) -> &TechniqueId {
        &self.combination[0]
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn max_attempts(&self) -> usize {
        self.max_attempts
    }
}

/// Why a trace's answer was accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcceptanceMode {
    /// An attempt's posterior reached the threshold.
    ThresholdPass,
    /// No attempt reached the threshold; the maximum-posterior attempt won.
    MaxPosteriorFallback,
}

impl AcceptanceMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ThresholdPass => "threshold-pass",
            Self::MaxPosteriorFallback => "max-posterior-fallback",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "threshold-pass" => Ok(Self::ThresholdPass),
            "max-posterior-fallback" => Ok(Self::MaxPosteriorFallback),
            other => Err(Error::TraceParse(format!(
                "unknown acceptance mode \"{other}\""
            ))),
        }
    }
}

impl std::fmt::Display for AcceptanceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One technique's try at a query.
#[derive(Debug, Clone, PartialEq)]
pub struct Attempt {
    pub technique: TechniqueId,
    pub candidate: MatchCandidate,
    pub bin: BinIndex,
    pub posterior: f64,
    /// Untried techniques ranked by complementarity with this technique at
    /// its score bin; populated only when this attempt failed the
    /// threshold.
    pub complementarity_ranking: Vec<(TechniqueId, f64)>,
}

/// Full record of the cascade for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchTrace {
    pub query_index: usize,
    pub attempts: Vec<Attempt>,
    pub accepted: TechniqueId,
    pub accepted_candidate: MatchCandidate,
    pub acceptance_mode: AcceptanceMode,
}

impl SwitchTrace {
    /// The accepted attempt's posterior, used as the confidence for
    /// precision-recall evaluation.
    pub fn accepted_posterior(&self) -> f64 {
        self.attempts
            .iter()
            .find(|a| a.technique == self.accepted)
            .map(|a| a.posterior)
            .expect("accepted technique always appears among attempts")
    }
}

/// Runs the switch cascade for a single query.
///
/// Each configured technique runs at most once. Ties in the
/// complementarity ranking break by combination order; ties in the
/// fallback break by earliest attempt.
pub fn run_query(
    query_index: usize,
    query: &GrayImage,
    config: &SwitchConfig,
    profiles: &HashMap<TechniqueId, TechniqueProfile>,
    indices: &HashMap<TechniqueId, MatcherIndex>,
) -> Result<SwitchTrace> {
    for id in &config.combination {
        if !profiles.contains_key(id) {
            return Err(Error::MissingProfile(id.as_str().to_owned()));
        }
        if !indices.contains_key(id) {
            return Err(Error::MissingIndex(id.as_str().to_owned()));
        }
    }
    let budget = config.max_attempts.min(config.combination.len());
    let mut attempts: Vec<Attempt> = Vec::with_capacity(budget);
    let mut tried: Vec<&TechniqueId> = Vec::with_capacity(budget);
    let mut current = config.primary();

    loop {
        let candidate = indices[current].best_match(query);
        let bin = bin_of(candidate.score)?;
        let post = posterior(&profiles[current], bin);
        tried.push(current);

        if post >= config.threshold {
            attempts.push(Attempt {
                technique: current.clone(),
                candidate,
                bin,
                posterior: post,
                complementarity_ranking: Vec::new(),
            });
            return Ok(SwitchTrace {
                query_index,
                accepted: current.clone(),
                accepted_candidate: candidate,
                acceptance_mode: AcceptanceMode::ThresholdPass,
                attempts,
            });
        }

        // Rank the untried techniques by complementarity with the
        // technique that just failed, at its score bin. Building the list
        // in combination order plus a stable sort breaks ties by
        // combination order.
        let current_stats = profiles[current].bin(bin);
        let mut ranking: Vec<(TechniqueId, f64)> = config
            .combination
            .iter()
            .filter(|id| !tried.contains(id))
            .map(|id| {
                let b = profiles[id].bin(bin);
                (
                    id.clone(),
                    complementarity_value(
                        current_stats.likelihood_match,
                        current_stats.likelihood_mismatch,
                        b.likelihood_match,
                        b.likelihood_mismatch,
                    ),
                )
            })
            .collect();
        ranking.sort_by(|a, b| b.1.total_cmp(&a.1));

        let next = ranking.first().map(|(id, _)| id.clone());
        attempts.push(Attempt {
            technique: current.clone(),
            candidate,
            bin,
            posterior: post,
            complementarity_ranking: ranking,
        });

        match next {
            Some(id) if attempts.len() < budget => {
                current = config
                    .combination
                    .iter()
                    .find(|c| **c == id)
                    .expect("ranked technique comes from the combination");
            }
            _ => break,
        }
    }

    // Fallback: maximum posterior, earliest attempt on ties.
    let best = attempts
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| {
            a.posterior
                .total_cmp(&b.posterior)
                .then(ib.cmp(ia)) // earlier attempt wins ties
        })
        .map(|(i, _)| i)
        .expect("at least one attempt is always made");
    Ok(SwitchTrace {
        query_index,
        accepted: attempts[best].technique.clone(),
        accepted_candidate: attempts[best].candidate,
        acceptance_mode: AcceptanceMode::MaxPosteriorFallback,
        attempts,
    })
}

/// Runs the cascade over a query set, one trace per query in order.
pub fn run_dataset(
    queries: &[GrayImage],
    config: &SwitchConfig,
    profiles: &HashMap<TechniqueId, TechniqueProfile>,
    indices: &HashMap<TechniqueId, MatcherIndex>,
) -> Result<Vec<SwitchTrace>> {
    queries
        .iter()
        .enumerate()
        .map(|(i, q)| run_query(i, q, config, profiles, indices))
        .collect()
}

// ── Trace CSV ─────────────────────────────────────────────────────────────

const TRACE_HEADER: [&str; 8] = [
    "query_index",
    "attempt_ordinal",
    "technique",
    "score",
    "bin",
    "posterior",
    "accepted",
    "acceptance_mode",
];

/// One attempt row of the trace CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub query_index: usize,
    /// 1-based position of this attempt within its query's cascade.
    pub attempt_ordinal: usize,
    pub technique: String,
    pub score: f64,
    pub bin: usize,
    pub posterior: f64,
    pub accepted: bool,
    pub acceptance_mode: AcceptanceMode,
}

/// Writes traces as CSV, one row per attempt, in query then attempt order.
pub fn write_traces_csv<W: Write>(traces: &[SwitchTrace], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io_err = |e: csv::Error| Error::TraceParse(e.to_string());
    w.write_record(TRACE_HEADER).map_err(io_err)?;
    for trace in traces {
        for (i, attempt) in trace.attempts.iter().enumerate() {
            let accepted = attempt.technique == trace.accepted;
            w.write_record([
                trace.query_index.to_string(),
                (i + 1).to_string(),
                attempt.technique.as_str().to_owned(),
                attempt.candidate.score.to_string(),
                attempt.bin.index().to_string(),
                attempt.posterior.to_string(),
                if accepted { "1" } else { "0" }.to_string(),
                trace.acceptance_mode.as_str().to_owned(),
            ])
            .map_err(io_err)?;
        }
    }
    w.flush().map_err(|e| Error::TraceParse(e.to_string()))?;
    Ok(())
}

pub fn save_traces_csv(traces: &[SwitchTrace], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_traces_csv(traces, std::io::BufWriter::new(file))
}

/// Parses and validates trace CSV rows. This is the untrusted-input entry
/// point the `trace_csv` fuzz target drives; structural checks against a
/// dataset happen later, during evaluation.
pub fn parse_traces_csv<R: Read>(reader: R) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r
        .headers()
        .map_err(|e| Error::TraceParse(e.to_string()))?
        .clone();
    if headers.iter().ne(TRACE_HEADER) {
        return Err(Error::TraceParse(format!(
            "unexpected header: {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| Error::TraceParse(e.to_string()))?;
        if record.len() != TRACE_HEADER.len() {
            return Err(Error::TraceParse(format!(
                "expected {} fields, got {}",
                TRACE_HEADER.len(),
                record.len()
            )));
        }
        let field = |i: usize| record.get(i).unwrap_or_default();
        let parse_usize = |i: usize| {
            field(i)
                .parse::<usize>()
                .map_err(|e| Error::TraceParse(format!("{}: {e}", TRACE_HEADER[i])))
        };
        let parse_f64 = |i: usize| {
            field(i)
                .parse::<f64>()
                .map_err(|e| Error::TraceParse(format!("{}: {e}", TRACE_HEADER[i])))
        };
        let score = parse_f64(3)?;
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::TraceParse(format!("score {score} outside [0,1]")));
        }
        let bin = parse_usize(4)?;
        if bin >= NUM_BINS {
            return Err(Error::TraceParse(format!("bin {bin} out of range")));
        }
        let post = parse_f64(5)?;
        if !(post > 0.0 && post < 1.0) {
            return Err(Error::TraceParse(format!(
                "posterior {post} outside (0,1)"
            )));
        }
        let accepted = match field(6) {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::TraceParse(format!(
                    "accepted must be 0 or 1, got \"{other}\""
                )))
            }
        };
        let ordinal = parse_usize(1)?;
        if ordinal == 0 {
            return Err(Error::TraceParse("attempt_ordinal is 1-based".into()));
        }
        rows.push(TraceRow {
            query_index: parse_usize(0)?,
            attempt_ordinal: ordinal,
            technique: field(2).to_owned(),
            score,
            bin,
            posterior: post,
            accepted,
            acceptance_mode: AcceptanceMode::parse(field(7))?,
        });
    }
    Ok(rows)
}

pub fn load_traces_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_traces_csv(std::io::BufReader::new(file))
}
