//! Evaluation: correctness scoring, precision-recall curves, AUC, and the
//! aggregate report comparing the switching system against each technique
//! run alone.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matchers::{MatchCandidate, TechniqueId};
use crate::stats::bin_of;
use crate::switch::{Attempt, SwitchTrace, TraceRow};

/// A retrieval is correct when the retrieved index lies within `tolerance`
/// of the ground-truth index.
pub fn is_correct(candidate: &MatchCandidate, gt_index: usize, tolerance: usize) -> bool {
    candidate.reference_index.abs_diff(gt_index) <= tolerance
}

/// One point of a precision-recall curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PRPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Sweeps acceptance thresholds over the distinct confidences (plus
/// sentinels 0 and 1), in decreasing order. At threshold `t` a result is
/// accepted when its confidence is at least `t`; precision over an empty
/// accepted set is 1 by convention.
pub fn pr_curve(results: &[(f64, bool)]) -> Result<Vec<PRPoint>> {
    if results.is_empty() {
        return Err(Error::EmptyEvalInput);
    }
    for &(confidence, _) in results {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::ScoreOutOfRange(confidence));
        }
    }
    let mut thresholds: Vec<f64> = results.iter().map(|r| r.0).collect();
    thresholds.push(0.0);
    thresholds.push(1.0);
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();

    let total = results.len() as f64;
    let mut curve = Vec::with_capacity(thresholds.len());
    for t in thresholds {
        let mut accepted = 0usize;
        let mut correct = 0usize;
        for &(confidence, ok) in results {
            if confidence >= t {
                accepted += 1;
                if ok {
                    correct += 1;
                }
            }
        }
        let precision = if accepted == 0 {
            1.0
        } else {
            correct as f64 / accepted as f64
        };
        curve.push(PRPoint {
            threshold: t,
            precision,
            recall: correct as f64 / total,
        });
    }
    Ok(curve)
}

/// Trapezoidal area under precision over recall.
///
/// Points are sorted by recall and deduplicated first; vertical segments
/// (equal recall) contribute zero width. Needs at least two distinct
/// points.
pub fn auc(curve: &[PRPoint]) -> Result<f64> {
    for p in curve {
        if !(0.0..=1.0).contains(&p.precision) {
            return Err(Error::ScoreOutOfRange(p.precision));
        }
        if !(0.0..=1.0).contains(&p.recall) {
            return Err(Error::ScoreOutOfRange(p.recall));
        }
    }
    let mut pts: Vec<(f64, f64)> = curve.iter().map(|p| (p.recall, p.precision)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 2 {
        return Err(Error::CurveTooShort(pts.len()));
    }
    let mut area = 0.0;
    for pair in pts.windows(2) {
        let (r0, p0) = pair[0];
        let (r1, p1) = pair[1];
        area += (r1 - r0) * (p0 + p1) / 2.0;
    }
    Ok(area)
}

/// Per-technique evaluation results.
#[derive(Debug, Clone, PartialEq)]
pub struct TechniqueEval {
    pub technique: TechniqueId,
    pub correct: usize,
    pub curve: Vec<PRPoint>,
    pub auc: f64,
}

/// Aggregate comparison of the switching system against each individual
/// technique on the same query set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n_queries: usize,
    pub tolerance: usize,
    pub switchhit_correct: usize,
    pub switchhit_curve: Vec<PRPoint>,
    pub switchhit_auc: f64,
    pub techniques: Vec<TechniqueEval>,
    /// Accepted technique per query, in query order.
    pub switch_pattern: Vec<TechniqueId>,
    /// `attempts_histogram[k]` counts traces that took `k + 1` attempts.
    pub attempts_histogram: Vec<usize>,
}

/// Aggregates traces and per-technique baselines into a report.
///
/// SwitchHit confidences are accepted-attempt posteriors; individual
/// techniques use their raw matching scores.
pub fn build_report(
    traces: &[SwitchTrace],
    per_technique: &[(TechniqueId, Vec<MatchCandidate>)],
    gt_indices: &[usize],
    tolerance: usize,
) -> Result<EvalReport> {
    let n = gt_indices.len();
    if traces.len() != n {
        return Err(Error::InconsistentLengths(format!(
            "{} traces for {n} queries",
            traces.len()
        )));
    }
    if n == 0 {
        return Err(Error::EmptyEvalInput);
    }
    for (id, candidates) in per_technique {
        if candidates.len() != n {
            return Err(Error::InconsistentLengths(format!(
                "technique \"{id}\" has {} results for {n} queries",
                candidates.len()
            )));
        }
    }

    let switchhit_results: Vec<(f64, bool)> = traces
        .iter()
        .zip(gt_indices)
        .map(|(t, &gt)| {
            (
                t.accepted_posterior(),
                is_correct(&t.accepted_candidate, gt, tolerance),
            )
        })
        .collect();
    let switchhit_correct = switchhit_results.iter().filter(|(_, ok)| *ok).count();
    let switchhit_curve = pr_curve(&switchhit_results)?;
    let switchhit_auc = auc(&switchhit_curve)?;

    let mut techniques = Vec::with_capacity(per_technique.len());
    for (id, candidates) in per_technique {
        let results: Vec<(f64, bool)> = candidates
            .iter()
            .zip(gt_indices)
            .map(|(c, &gt)| (c.score, is_correct(c, gt, tolerance)))
            .collect();
        let curve = pr_curve(&results)?;
        techniques.push(TechniqueEval {
            technique: id.clone(),
            correct: results.iter().filter(|(_, ok)| *ok).count(),
            auc: auc(&curve)?,
            curve,
        });
    }

    let mut attempts_histogram = Vec::new();
    for t in traces {
        let k = t.attempts.len();
        if attempts_histogram.len() < k {
            attempts_histogram.resize(k, 0);
        }
        attempts_histogram[k - 1] += 1;
    }

    Ok(EvalReport {
        n_queries: n,
        tolerance,
        switchhit_correct,
        switchhit_curve,
        switchhit_auc,
        techniques,
        switch_pattern: traces.iter().map(|t| t.accepted.clone()).collect(),
        attempts_histogram,
    })
}

/// Rebuilds traces from parsed CSV rows plus recomputed per-technique
/// candidates, cross-checking scores and bins against the dataset.
///
/// Complementarity rankings are not stored in the CSV and come back empty.
pub fn reconstruct_traces(
    rows: &[TraceRow],
    per_technique: &[(TechniqueId, Vec<MatchCandidate>)],
) -> Result<Vec<SwitchTrace>> {
    let candidates_for = |name: &str| -> Option<&Vec<MatchCandidate>> {
        per_technique
            .iter()
            .find(|(id, _)| id.as_str() == name)
            .map(|(_, c)| c)
    };

    let mut traces: Vec<SwitchTrace> = Vec::new();
    let mut i = 0;
    while i < rows.len() {
        let query_index = rows[i].query_index;
        if query_index != traces.len() {
            return Err(Error::TraceParse(format!(
                "query indices must be contiguous from 0: expected {}, got {query_index}",
                traces.len()
            )));
        }
        let group_end = rows[i..]
            .iter()
            .position(|r| r.query_index != query_index)
            .map(|off| i + off)
            .unwrap_or(rows.len());
        let group = &rows[i..group_end];

        let mode = group[0].acceptance_mode;
        let mut attempts = Vec::with_capacity(group.len());
        let mut accepted: Option<(TechniqueId, MatchCandidate)> = None;
        for (ordinal, row) in group.iter().enumerate() {
            if row.attempt_ordinal != ordinal + 1 {
                return Err(Error::TraceParse(format!(
                    "query {query_index}: expected attempt_ordinal {}, got {}",
                    ordinal + 1,
                    row.attempt_ordinal
                )));
            }
            if row.acceptance_mode != mode {
                return Err(Error::TraceParse(format!(
                    "query {query_index}: mixed acceptance modes"
                )));
            }
            let candidates = candidates_for(&row.technique).ok_or_else(|| {
                Error::TraceMismatch(format!("unknown technique \"{}\"", row.technique))
            })?;
            let candidate = *candidates.get(query_index).ok_or_else(|| {
                Error::TraceMismatch(format!("no candidate for query {query_index}"))
            })?;
            if candidate.score != row.score {
                return Err(Error::TraceMismatch(format!(
                    "query {query_index}: stored score {} but dataset gives {}",
                    row.score, candidate.score
                )));
            }
            if bin_of(row.score)?.index() != row.bin {
                return Err(Error::TraceMismatch(format!(
                    "query {query_index}: bin {} inconsistent with score {}",
                    row.bin, row.score
                )));
            }
            let technique = TechniqueId::new(row.technique.clone());
            if row.accepted {
                if accepted.is_some() {
                    return Err(Error::TraceParse(format!(
                        "query {query_index}: multiple accepted rows"
                    )));
                }
                accepted = Some((technique.clone(), candidate));
            }
            attempts.push(Attempt {
                technique,
                candidate,
                bin: bin_of(row.score)?,
                posterior: row.posterior,
                complementarity_ranking: Vec::new(),
            });
        }
        let (accepted, accepted_candidate) = accepted.ok_or_else(|| {
            Error::TraceParse(format!("query {query_index}: no accepted row"))
        })?;
        traces.push(SwitchTrace {
            query_index,
            attempts,
            accepted,
            accepted_candidate,
            acceptance_mode: mode,
        });
        i = group_end;
    }
    if traces.is_empty() {
        return Err(Error::TraceParse("no trace rows".into()));
    }
    Ok(traces)
}

// ── Report artifacts ──────────────────────────────────────────────────────

#[derive(Serialize, Deserialize)]
pub(crate) struct ReportDoc {
    pub n_queries: usize,
    pub tolerance: usize,
    pub switchhit: ReportEntry,
    pub techniques: Vec<NamedReportEntry>,
    pub attempts_histogram: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct ReportEntry {
    pub correct: usize,
    pub auc: f64,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct NamedReportEntry {
    pub name: String,
    pub correct: usize,
    pub auc: f64,
}

fn write_pr_csv(curve: &[PRPoint], path: &Path) -> Result<()> {
    let mut out = String::from("threshold,precision,recall\n");
    for p in curve {
        out.push_str(&format!("{},{},{}\n", p.threshold, p.precision, p.recall));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

impl EvalReport {
    pub(crate) fn to_doc(&self) -> ReportDoc {
        ReportDoc {
            n_queries: self.n_queries,
            tolerance: self.tolerance,
            switchhit: ReportEntry {
                correct: self.switchhit_correct,
                auc: self.switchhit_auc,
            },
            techniques: self
                .techniques
                .iter()
                .map(|t| NamedReportEntry {
                    name: t.technique.as_str().to_owned(),
                    correct: t.correct,
                    auc: t.auc,
                })
                .collect(),
            attempts_histogram: self.attempts_histogram.clone(),
        }
    }

    /// Writes `report.json`, one `pr_<name>.csv` per curve, and
    /// `switch_pattern.csv` into `out_dir`.
    pub fn write_artifacts(&self, out_dir: &Path) -> Result<()> {
        std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let report_path = out_dir.join("report.json");
        let json = serde_json::to_string_pretty(&self.to_doc())
            .expect("report serialization cannot fail");
        std::fs::write(&report_path, json).map_err(|e| Error::io(&report_path, e))?;

        write_pr_csv(&self.switchhit_curve, &out_dir.join("pr_switchhit.csv"))?;
        for t in &self.techniques {
            write_pr_csv(
                &t.curve,
                &out_dir.join(format!("pr_{}.csv", t.technique.as_str())),
            )?;
        }

        let pattern_path = out_dir.join("switch_pattern.csv");
        let mut out = String::from("query_index,accepted_technique\n");
        for (i, id) in self.switch_pattern.iter().enumerate() {
            out.push_str(&format!("{i},{id}\n"));
        }
        std::fs::write(&pattern_path, out).map_err(|e| Error::io(&pattern_path, e))
    }
}

pub(crate) fn load_report_doc(path: &Path) -> Result<ReportDoc> {
    let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&json).map_err(|e| Error::ConfigParse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::switch::AcceptanceMode;

    fn cand(index: usize, score: f64) -> MatchCandidate {
        MatchCandidate {
            reference_index: index,
            score,
        }
    }

    #[test]
    fn correctness_window() {
        assert!(is_correct(&cand(5, 0.9), 5, 0));
        assert!(!is_correct(&cand(6, 0.9), 5, 0));
        assert!(is_correct(&cand(7, 0.9), 5, 2));
        assert!(is_correct(&cand(3, 0.9), 5, 2));
        assert!(!is_correct(&cand(8, 0.9), 5, 2));
    }

    #[test]
    fn pr_curve_hand_example() {
        // Three results: confidences 0.9 (correct), 0.8 (wrong), 0.7
        // (correct). Enumerating accepted sets by hand:
        //   t=0.9: accept {0.9}        -> P=1,   R=1/3
        //   t=0.8: accept {0.9,0.8}    -> P=1/2, R=1/3
        //   t=0.7: accept all          -> P=2/3, R=2/3
        let curve = pr_curve(&[(0.9, true), (0.8, false), (0.7, true)]).unwrap();
        let at = |t: f64| curve.iter().find(|p| p.threshold == t).unwrap();
        assert_eq!((at(0.9).precision, at(0.9).recall), (1.0, 1.0 / 3.0));
        assert_eq!((at(0.8).precision, at(0.8).recall), (0.5, 1.0 / 3.0));
        assert_eq!((at(0.7).precision, at(0.7).recall), (2.0 / 3.0, 2.0 / 3.0));
        // Sentinels: nothing accepted at 1.0 (precision 1 by convention),
        // everything at 0.0.
        assert_eq!((at(1.0).precision, at(1.0).recall), (1.0, 0.0));
        assert_eq!((at(0.0).precision, at(0.0).recall), (2.0 / 3.0, 2.0 / 3.0));
        // Emitted in decreasing threshold order.
        for pair in curve.windows(2) {
            assert!(pair[0].threshold > pair[1].threshold);
        }
    }

    #[test]
    fn pr_curve_degenerate_cases() {
        let all_correct = pr_curve(&[(0.3, true), (0.9, true)]).unwrap();
        assert!(all_correct.iter().all(|p| p.precision == 1.0));
        assert_eq!(all_correct.last().unwrap().recall, 1.0);

        let none_correct = pr_curve(&[(0.3, false), (0.9, false)]).unwrap();
        for p in &none_correct {
            if p.threshold <= 0.9 {
                assert_eq!(p.precision, 0.0);
            }
            assert_eq!(p.recall, 0.0);
        }

        assert!(matches!(pr_curve(&[]), Err(Error::EmptyEvalInput)));
        assert!(pr_curve(&[(1.5, true)]).is_err());
    }

    #[test]
    fn pr_recall_is_monotone_in_threshold() {
        let mut state: u64 = 99;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            state >> 40
        };
        for _ in 0..100 {
            let n = 1 + (next() % 30) as usize;
            let results: Vec<(f64, bool)> = (0..n)
                .map(|_| ((next() % 1001) as f64 / 1000.0, next() % 2 == 0))
                .collect();
            let curve = pr_curve(&results).unwrap();
            // Thresholds decrease along the curve, so recall must be
            // non-decreasing.
            for pair in curve.windows(2) {
                assert!(pair[1].recall >= pair[0].recall);
            }
            let total_correct = results.iter().filter(|(_, ok)| *ok).count() as f64;
            assert_eq!(
                curve.last().unwrap().recall,
                total_correct / results.len() as f64
            );
        }
    }

    fn pt(recall: f64, precision: f64) -> PRPoint {
        PRPoint {
            threshold: 0.0,
            precision,
            recall,
        }
    }

    #[test]
    fn auc_trivial_and_hand_cases() {
        assert_eq!(auc(&[pt(0.0, 1.0), pt(1.0, 1.0)]).unwrap(), 1.0);
        assert_eq!(auc(&[pt(0.0, 1.0), pt(1.0, 0.0)]).unwrap(), 0.5);
        // Hand trapezoid sum: 0.5*(1+0.8)/2 + 0.5*(0.8+0.6)/2 = 0.80.
        let three = [pt(0.0, 1.0), pt(0.5, 0.8), pt(1.0, 0.6)];
        assert!((auc(&three).unwrap() - 0.80).abs() < 1e-12);
        // Order independence: auc sorts by recall itself.
        let shuffled = [pt(1.0, 0.6), pt(0.0, 1.0), pt(0.5, 0.8)];
        assert_eq!(auc(&three).unwrap(), auc(&shuffled).unwrap());
    }

    #[test]
    fn auc_invariant_under_collinear_insertion() {
        let base = [pt(0.0, 1.0), pt(1.0, 0.6)];
        let with_mid = [pt(0.0, 1.0), pt(0.5, 0.8), pt(1.0, 0.6)];
        assert!((auc(&base).unwrap() - auc(&with_mid).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn auc_rejects_degenerate_curves() {
        assert!(matches!(auc(&[]), Err(Error::CurveTooShort(0))));
        assert!(matches!(
            auc(&[pt(0.3, 0.5), pt(0.3, 0.5)]),
            Err(Error::CurveTooShort(1))
        ));
        assert!(auc(&[pt(0.0, 1.2), pt(1.0, 0.5)]).is_err());
    }

    fn one_attempt_trace(query_index: usize, technique: &str, c: MatchCandidate) -> SwitchTrace {
        SwitchTrace {
            query_index,
            attempts: vec![Attempt {
                technique: technique.into(),
                candidate: c,
                bin: bin_of(c.score).unwrap(),
                posterior: 0.75,
                complementarity_ranking: Vec::new(),
            }],
            accepted: technique.into(),
            accepted_candidate: c,
            acceptance_mode: AcceptanceMode::ThresholdPass,
        }
    }

    #[test]
    fn no_switch_report_mirrors_primary() {
        let candidates = vec![cand(0, 0.9), cand(1, 0.8), cand(3, 0.7)];
        let gt = vec![0, 1, 2];
        let traces: Vec<SwitchTrace> = candidates
            .iter()
            .enumerate()
            .map(|(i, c)| one_attempt_trace(i, "primary", *c))
            .collect();
        let per_tech = vec![("primary".into(), candidates.clone())];
        let report = build_report(&traces, &per_tech, &gt, 0).unwrap();
        assert_eq!(report.switchhit_correct, 2);
        assert_eq!(report.techniques[0].correct, 2);
        assert_eq!(report.switchhit_correct, report.techniques[0].correct);
        assert!(report
            .switch_pattern
            .iter()
            .all(|id| id == &TechniqueId::new("primary")));
        assert_eq!(report.attempts_histogram, vec![3]);
        // Correct/incorrect labels agree query-by-query with the primary's.
        for (t, (c, &g)) in traces.iter().zip(candidates.iter().zip(&gt)) {
            assert_eq!(
                is_correct(&t.accepted_candidate, g, 0),
                is_correct(c, g, 0)
            );
        }
    }

    #[test]
    fn report_rejects_inconsistent_lengths() {
        let traces = vec![one_attempt_trace(0, "a", cand(0, 0.9))];
        let per_tech = vec![(TechniqueId::new("a"), vec![cand(0, 0.9), cand(1, 0.8)])];
        assert!(matches!(
            build_report(&traces, &per_tech, &[0, 1], 0),
            Err(Error::InconsistentLengths(_))
        ));
        assert!(matches!(
            build_report(&traces, &per_tech[..0], &[], 0),
            Err(Error::InconsistentLengths(_))
        ));
    }

    #[test]
    fn switchhit_count_recomputable_from_traces_alone() {
        let traces = vec![
            one_attempt_trace(0, "a", cand(0, 0.9)),
            one_attempt_trace(1, "a", cand(5, 0.8)),
        ];
        let gt = vec![0, 1];
        let per_tech = vec![(TechniqueId::new("a"), vec![cand(0, 0.9), cand(5, 0.8)])];
        let report = build_report(&traces, &per_tech, &gt, 0).unwrap();
        let recount = traces
            .iter()
            .zip(&gt)
            .filter(|(t, &g)| is_correct(&t.accepted_candidate, g, 0))
            .count();
        assert_eq!(report.switchhit_correct, recount);
        assert_eq!(report.switchhit_correct, 1);
    }
}
