//! Loading exam-style datasets: candidate scores with group labels, and
//! program capacity tables with opening/closing admission ranks.
//!
//! A committed synthetic fixture in this schema lives under
//! `fixtures/jee_synthetic/`; [`write_synthetic_fixture`] regenerates it
//! byte for byte.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::GroupLabels;

/// One row of a candidate file: an id, an observed score, and the value of
/// the protected attribute under study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub candidate_id: String,
    pub score: f64,
    pub group_label: String,
}

/// One row of a program file. `opening_rank`/`closing_rank` are the best
/// and worst admission ranks the program accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramRecord {
    pub program_id: String,
    pub capacity: usize,
    pub opening_rank: u32,
    pub closing_rank: u32,
}

impl ProgramRecord {
    pub fn validate(&self) -> Result<(), Error> {
        if self.capacity == 0 {
            return Err(Error::InvalidInput(format!(
                "program {} has zero capacity",
                self.program_id
            )));
        }
        if self.opening_rank == 0 || self.opening_rank > self.closing_rank {
            return Err(Error::InvalidInput(format!(
                "program {} has invalid rank range {}..{}",
                self.program_id, self.opening_rank, self.closing_rank
            )));
        }
        Ok(())
    }
}

/// Candidate scores with group labels resolved to dense indices.
#[derive(Debug, Clone)]
pub struct CandidateTable {
    ids: Vec<String>,
    scores: Vec<f64>,
    groups: GroupLabels,
    /// Label string for each group index, in order of first appearance.
    group_names: Vec<String>,
}

impl CandidateTable {
    pub fn from_records(records: &[CandidateRecord]) -> Result<Self, Error> {
        let mut ids = Vec::with_capacity(records.len());
        let mut scores = Vec::with_capacity(records.len());
        let mut labels = Vec::with_capacity(records.len());
        let mut group_names: Vec<String> = Vec::new();
        let mut seen_ids: HashMap<&str, usize> = HashMap::new();
        for (idx, rec) in records.iter().enumerate() {
            if let Some(first) = seen_ids.insert(&rec.candidate_id, idx) {
                return Err(Error::Parse {
                    row: idx + 2,
                    message: format!(
                        "duplicate candidate id {} (first seen in row {})",
                        rec.candidate_id,
                        first + 2
                    ),
                });
            }
            if !rec.score.is_finite() {
                return Err(Error::Parse {
                    row: idx + 2,
                    message: format!("non-finite score for candidate {}", rec.candidate_id),
                });
            }
            let label = match group_names.iter().position(|g| *g == rec.group_label) {
                Some(i) => i,
                None => {
                    group_names.push(rec.group_label.clone());
                    group_names.len() - 1
                }
            };
            ids.push(rec.candidate_id.clone());
            scores.push(rec.score);
            labels.push(label);
        }
        let groups = GroupLabels::new(labels)?;
        Ok(CandidateTable { ids, scores, groups, group_names })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn groups(&self) -> &GroupLabels {
        &self.groups
    }

    pub fn group_names(&self) -> &[String] {
        &self.group_names
    }

    pub fn records(&self) -> Vec<CandidateRecord> {
        self.ids
            .iter()
            .zip(&self.scores)
            .zip(self.groups.labels())
            .map(|((id, &score), &g)| CandidateRecord {
                candidate_id: id.clone(),
                score,
                group_label: self.group_names[g].clone(),
            })
            .collect()
    }

    /// The table reordered by descending score (ties by candidate id) and
    /// truncated to the best `limit` candidates. Group indices are
    /// reassigned by first appearance in the new order.
    pub fn ranked(&self, limit: Option<usize>) -> Result<Self, Error> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            self.scores[b]
                .total_cmp(&self.scores[a])
                .then_with(|| self.ids[a].cmp(&self.ids[b]))
        });
        if let Some(limit) = limit {
            if limit == 0 {
                return Err(Error::InvalidInput("rank limit must be positive".into()));
            }
            order.truncate(limit);
        }
        let records: Vec<CandidateRecord> = order
            .into_iter()
            .map(|i| CandidateRecord {
                candidate_id: self.ids[i].clone(),
                score: self.scores[i],
                group_label: self.group_names[self.groups.labels()[i]].clone(),
            })
            .collect();
        CandidateTable::from_records(&records)
    }
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize, Error> {
    headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
        row: 1,
        message: format!("missing column `{name}`"),
    })
}

fn record_row(record: &csv::StringRecord, fallback: usize) -> usize {
    record.position().map(|p| p.line() as usize).unwrap_or(fallback)
}

/// Read a candidate CSV. Required columns: `candidate_id`, `score`, and the
/// named group column; other columns are ignored.
pub fn load_candidates(
    path: impl AsRef<Path>,
    group_column: &str,
) -> Result<CandidateTable, Error> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let id_col = column_index(&headers, "candidate_id")?;
    let score_col = column_index(&headers, "score")?;
    let group_col = column_index(&headers, group_column)?;
    let mut records = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = record_row(&record, idx + 2);
        let score_text = record.get(score_col).unwrap_or("");
        let score: f64 = score_text.parse().map_err(|_| Error::Parse {
            row,
            message: format!("score `{score_text}` is not a number"),
        })?;
        records.push(CandidateRecord {
            candidate_id: record.get(id_col).unwrap_or("").to_string(),
            score,
            group_label: record.get(group_col).unwrap_or("").to_string(),
        });
    }
    if records.is_empty() {
        return Err(Error::Parse { row: 1, message: "no candidate rows".into() });
    }
    CandidateTable::from_records(&records)
}

/// Read a program CSV with columns `program_id`, `capacity`,
/// `opening_rank`, `closing_rank`.
pub fn load_programs(path: impl AsRef<Path>) -> Result<Vec<ProgramRecord>, Error> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let id_col = column_index(&headers, "program_id")?;
    let cap_col = column_index(&headers, "capacity")?;
    let open_col = column_index(&headers, "opening_rank")?;
    let close_col = column_index(&headers, "closing_rank")?;
    let mut out: Vec<ProgramRecord> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = record_row(&record, idx + 2);
        let number = |col: usize, what: &str| -> Result<u64, Error> {
            let text = record.get(col).unwrap_or("");
            text.parse().map_err(|_| Error::Parse {
                row,
                message: format!("{what} `{text}` is not a positive integer"),
            })
        };
        let rec = ProgramRecord {
            program_id: record.get(id_col).unwrap_or("").to_string(),
            capacity: number(cap_col, "capacity")? as usize,
            opening_rank: number(open_col, "opening rank")? as u32,
            closing_rank: number(close_col, "closing rank")? as u32,
        };
        rec.validate().map_err(|e| Error::Parse { row, message: e.to_string() })?;
        if out.iter().any(|p| p.program_id == rec.program_id) {
            return Err(Error::Parse {
                row,
                message: format!("duplicate program id {}", rec.program_id),
            });
        }
        out.push(rec);
    }
    if out.is_empty() {
        return Err(Error::Parse { row: 1, message: "no program rows".into() });
    }
    Ok(out)
}

/// Programs ordered into a central ranking by selectivity.
#[derive(Debug, Clone)]
pub struct ProgramRanking {
    programs: Vec<ProgramRecord>,
    ties: Vec<String>,
}

impl ProgramRanking {
    /// Institution count after the cutoff.
    pub fn len(&self) -> usize {
        self.programs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.programs.is_empty()
    }

    /// Programs in ranking order: index 0 is every candidate's notional
    /// first choice.
    pub fn programs(&self) -> &[ProgramRecord] {
        &self.programs
    }

    pub fn capacities(&self) -> Vec<usize> {
        self.programs.iter().map(|p| p.capacity).collect()
    }

    /// Ids whose position was decided by the id tie-break on equal closing
    /// ranks.
    pub fn tie_broken(&self) -> &[String] {
        &self.ties
    }
}

/// Order programs by ascending closing rank (a lower closing rank means a
/// more selective program) and drop everything above the cutoff. Equal
/// closing ranks fall back to id order and are reported.
pub fn build_central_ranking(
    programs: &[ProgramRecord],
    closing_rank_cutoff: Option<u32>,
) -> Result<ProgramRanking, Error> {
    if programs.is_empty() {
        return Err(Error::InvalidInput("no programs to rank".into()));
    }
    for p in programs {
        p.validate()?;
    }
    let mut kept: Vec<ProgramRecord> = programs
        .iter()
        .filter(|p| closing_rank_cutoff.is_none_or(|c| p.closing_rank <= c))
        .cloned()
        .collect();
    if kept.is_empty() {
        return Err(Error::Infeasible(format!(
            "no program has closing rank <= {}",
            closing_rank_cutoff.unwrap_or(u32::MAX)
        )));
    }
    kept.sort_by(|a, b| {
        a.closing_rank.cmp(&b.closing_rank).then_with(|| a.program_id.cmp(&b.program_id))
    });
    let mut ties = Vec::new();
    for pair in kept.windows(2) {
        if pair[0].closing_rank == pair[1].closing_rank {
            for p in pair {
                if !ties.contains(&p.program_id) {
                    ties.push(p.program_id.clone());
                }
            }
        }
    }
    Ok(ProgramRanking { programs: kept, ties })
}

/// Write candidate records with one group column of the given name.
pub fn write_candidate_column(
    path: impl AsRef<Path>,
    records: &[CandidateRecord],
    group_column: &str,
) -> Result<(), Error> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    writer.write_record(["candidate_id", "score", group_column])?;
    for rec in records {
        writer.write_record([
            rec.candidate_id.as_str(),
            &format!("{:.6}", rec.score),
            rec.group_label.as_str(),
        ])?;
    }
    writer.flush().map_err(|e| Error::Io(e))?;
    Ok(())
}

pub fn write_programs(
    path: impl AsRef<Path>,
    programs: &[ProgramRecord],
) -> Result<(), Error> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    writer.write_record(["program_id", "capacity", "opening_rank", "closing_rank"])?;
    for p in programs {
        writer.write_record([
            p.program_id.as_str(),
            &p.capacity.to_string(),
            &p.opening_rank.to_string(),
            &p.closing_rank.to_string(),
        ])?;
    }
    writer.flush().map_err(|e| Error::Io(e))?;
    Ok(())
}

/// The 33 most selective major-institution pairs of the 2009 IIT-JEE
/// season, ordered by closing rank. Published seat counts are not
/// available, so every program carries a nominal capacity of 30.
pub fn reference_programs() -> Vec<ProgramRecord> {
    const ROWS: [(&str, u32, u32); 33] = [
        ("CSE (4Yr), IIT Bombay", 3, 86),
        ("EE (4Yr), IIT Bombay", 8, 109),
        ("CSE (4Yr), IIT Delhi", 1, 154),
        ("CSE (4Yr), IIT Kanpur", 2, 181),
        ("CSE (4Yr), IIT Madras", 5, 215),
        ("EE (4Yr), IIT Delhi", 108, 241),
        ("EE w/ Micro (5Yr), IIT Bombay", 117, 245),
        ("CSE (5Yr), IIT Delhi", 187, 278),
        ("EE (4Yr), IIT Madras", 32, 310),
        ("EE w/ Info. & Comm. Tech. (5Yr), IIT Delhi", 284, 369),
        ("EE w/ Comm. & SP (5Yr), IIT Bombay", 266, 379),
        ("EE (4Yr), IIT Kanpur", 39, 416),
        ("CSE (5Yr), IIT Kanpur", 216, 422),
        ("ME (4Yr), IIT Bombay", 72, 494),
        ("CSE (5Yr), IIT Madras", 333, 502),
        ("CSE (4Yr), IIT Kharag.", 276, 527),
        ("EE (5Yr), IIT Kanpur", 423, 608),
        ("ME (4Yr), IIT Delhi", 237, 634),
        ("ME w/ CAD & Auto. (5Yr), IIT Bombay", 419, 637),
        ("EE w/ Micro & VLSI (5Yr), IIT Madras", 339, 716),
        ("ME w/ CIM (5Yr), IIT Bombay", 556, 757),
        ("EE w/ Power (4Yr), IIT Delhi", 477, 758),
        ("EEC (4Yr), IIT Kharag.", 133, 762),
        ("EE w/ Comm. Eng. (5Yr), IIT Madras", 458, 764),
        ("Math. & Comp. (5Yr), IIT Delhi", 348, 789),
        ("ME (4Yr), IIT Kanpur", 497, 806),
        ("ME (4Yr), IIT Madras", 275, 820),
        ("CSE (5Yr), IIT Kharag.", 431, 877),
        ("EE (4Yr), IIT Kharag.", 596, 920),
        ("Chem. Eng. (4Yr), IIT Bombay", 244, 928),
        ("EE w/ Power Sys. & Elec. (5Yr), IIT Madras", 773, 937),
        ("CSE (4Yr), IIT Roorkee", 471, 984),
        ("ME (5Yr), IIT Kanpur", 808, 992),
    ];
    ROWS.iter()
        .map(|&(id, opening, closing)| ProgramRecord {
            program_id: id.to_string(),
            capacity: 30,
            opening_rank: opening,
            closing_rank: closing,
        })
        .collect()
}

/// Observed group-level score gaps of the 2009 season: the mean score of
/// female candidates was 0.69 of the male mean, and 0.52 across birth
/// categories.
pub const GENDER_GAP: f64 = 0.69;
pub const BIRTH_CATEGORY_GAP: f64 = 0.52;

/// Synthetic candidates matching the exam schema: uniform latent ability,
/// observed score scaled by the group gaps above. Attributes cycle through
/// the four gender/birth-category cells so both splits are exactly even;
/// quota rounding then matches group sizes instead of adding rounding skew
/// on top of the gaps under study.
pub fn synthetic_candidates(n: usize, seed: u64) -> Vec<CandidateRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let ability: f64 = rng.random();
            let female = i % 2 == 1;
            let reserved = (i / 2) % 2 == 1;
            let score = ability
                * if female { GENDER_GAP } else { 1.0 }
                * if reserved { BIRTH_CATEGORY_GAP } else { 1.0 };
            CandidateRecord {
                candidate_id: format!("C{:05}", i + 1),
                score,
                group_label: format!(
                    "{}|{}",
                    if female { "female" } else { "male" },
                    if reserved { "reserved" } else { "general" }
                ),
            }
        })
        .collect()
}

/// Write `candidates.csv` and `programs.csv` under `dir`. The candidate
/// file carries separate `gender` and `birth_category` columns so either
/// attribute can serve as the group column.
pub fn write_synthetic_fixture(
    dir: impl AsRef<Path>,
    n: usize,
    seed: u64,
) -> Result<(), Error> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let records = synthetic_candidates(n, seed);
    let mut writer = csv::Writer::from_path(dir.join("candidates.csv"))?;
    writer.write_record(["candidate_id", "score", "gender", "birth_category"])?;
    for rec in &records {
        let (gender, birth) =
            rec.group_label.split_once('|').expect("synthetic labels are paired");
        writer.write_record([
            rec.candidate_id.as_str(),
            &format!("{:.6}", rec.score),
            gender,
            birth,
        ])?;
    }
    writer.flush().map_err(Error::Io)?;
    write_programs(dir.join("programs.csv"), &reference_programs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn candidates_load_with_first_appearance_group_order() {
        let f = write_temp(
            "candidate_id,score,gender\nA1,0.9,female\nA2,0.5,male\nA3,0.7,female\n",
        );
        let table = load_candidates(f.path(), "gender").unwrap();
        assert_eq!(table.len(), 3);
        assert_eq!(table.group_names(), ["female", "male"]);
        assert_eq!(table.groups().labels(), [0, 1, 0]);
        assert_eq!(table.scores(), [0.9, 0.5, 0.7]);
    }

    #[test]
    fn duplicate_candidate_id_names_the_row() {
        let f = write_temp("candidate_id,score,gender\nA1,0.9,f\nA1,0.5,m\n");
        let err = load_candidates(f.path(), "gender").unwrap_err();
        assert!(err.to_string().contains("row 3"), "{err}");
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn bad_score_and_missing_column_are_reported() {
        let f = write_temp("candidate_id,score,gender\nA1,abc,f\n");
        let err = load_candidates(f.path(), "gender").unwrap_err();
        assert!(err.to_string().contains("not a number"), "{err}");
        let f = write_temp("candidate_id,score\nA1,0.5\n");
        let err = load_candidates(f.path(), "gender").unwrap_err();
        assert!(err.to_string().contains("missing column `gender`"), "{err}");
    }

    #[test]
    fn ranked_orders_by_score_then_id() {
        let records = vec![
            CandidateRecord {
                candidate_id: "B".into(),
                score: 0.5,
                group_label: "x".into(),
            },
            CandidateRecord {
                candidate_id: "A".into(),
                score: 0.5,
                group_label: "y".into(),
            },
            CandidateRecord {
                candidate_id: "C".into(),
                score: 0.9,
                group_label: "x".into(),
            },
        ];
        let table = CandidateTable::from_records(&records).unwrap();
        let ranked = table.ranked(None).unwrap();
        assert_eq!(ranked.ids(), ["C", "A", "B"]);
        let top2 = table.ranked(Some(2)).unwrap();
        assert_eq!(top2.ids(), ["C", "A"]);
        assert_eq!(top2.group_names(), ["x", "y"]);
    }

    #[test]
    fn central_ranking_orders_by_closing_rank() {
        let ranking = build_central_ranking(&reference_programs(), Some(1000)).unwrap();
        assert_eq!(ranking.len(), 33);
        assert_eq!(ranking.programs()[0].program_id, "CSE (4Yr), IIT Bombay");
        assert_eq!(ranking.programs()[0].closing_rank, 86);
        assert_eq!(ranking.programs()[32].program_id, "ME (5Yr), IIT Kanpur");
        assert!(ranking
            .programs()
            .windows(2)
            .all(|w| w[0].closing_rank <= w[1].closing_rank));
        assert!(ranking.tie_broken().is_empty());
        assert_eq!(ranking.capacities(), vec![30; 33]);
    }

    #[test]
    fn cutoff_truncates_and_can_empty_the_ranking() {
        let ranking = build_central_ranking(&reference_programs(), Some(500)).unwrap();
        assert_eq!(ranking.len(), 14);
        assert!(ranking.programs().iter().all(|p| p.closing_rank <= 500));
        assert!(build_central_ranking(&reference_programs(), Some(50)).is_err());
        let all = build_central_ranking(&reference_programs(), None).unwrap();
        assert_eq!(all.len(), 33);
    }

    #[test]
    fn closing_rank_ties_break_by_id_and_are_reported() {
        let programs = vec![
            ProgramRecord {
                program_id: "B".into(),
                capacity: 1,
                opening_rank: 1,
                closing_rank: 10,
            },
            ProgramRecord {
                program_id: "A".into(),
                capacity: 1,
                opening_rank: 2,
                closing_rank: 10,
            },
            ProgramRecord {
                program_id: "C".into(),
                capacity: 1,
                opening_rank: 1,
                closing_rank: 5,
            },
        ];
        let ranking = build_central_ranking(&programs, None).unwrap();
        let ids: Vec<&str> =
            ranking.programs().iter().map(|p| p.program_id.as_str()).collect();
        assert_eq!(ids, ["C", "A", "B"]);
        assert_eq!(ranking.tie_broken(), ["A", "B"]);
    }

    #[test]
    fn program_round_trip_preserves_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("programs.csv");
        let programs = reference_programs();
        write_programs(&path, &programs).unwrap();
        let reloaded = load_programs(&path).unwrap();
        assert_eq!(programs, reloaded);
    }

    #[test]
    fn invalid_program_rows_are_rejected() {
        let f = write_temp(
            "program_id,capacity,opening_rank,closing_rank\nP1,0,1,10\n",
        );
        assert!(load_programs(f.path()).is_err());
        let f = write_temp(
            "program_id,capacity,opening_rank,closing_rank\nP1,5,11,10\n",
        );
        assert!(load_programs(f.path()).is_err());
        let f = write_temp(
            "program_id,capacity,opening_rank,closing_rank\nP1,5,1,10\nP1,5,1,12\n",
        );
        let err = load_programs(f.path()).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn synthetic_scores_show_the_configured_gender_gap() {
        let records = synthetic_candidates(5000, 7);
        let mean = |pred: &dyn Fn(&CandidateRecord) -> bool| {
            let vals: Vec<f64> =
                records.iter().filter(|r| pred(r)).map(|r| r.score).collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        };
        let female = mean(&|r| r.group_label.starts_with("female"));
        let male = mean(&|r| r.group_label.starts_with("male"));
        assert!((female / male - GENDER_GAP).abs() < 0.04, "{}", female / male);
        let reserved = mean(&|r| r.group_label.ends_with("reserved"));
        let general = mean(&|r| r.group_label.ends_with("general"));
        assert!(
            (reserved / general - BIRTH_CATEGORY_GAP).abs() < 0.04,
            "{}",
            reserved / general
        );
    }

    #[test]
    fn fixture_write_and_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        write_synthetic_fixture(dir.path(), 200, 7).unwrap();
        let by_gender =
            load_candidates(dir.path().join("candidates.csv"), "gender").unwrap();
        assert_eq!(by_gender.len(), 200);
        assert_eq!(by_gender.groups().group_count(), 2);
        let by_birth =
            load_candidates(dir.path().join("candidates.csv"), "birth_category").unwrap();
        assert_eq!(by_birth.groups().group_count(), 2);
        let programs = load_programs(dir.path().join("programs.csv")).unwrap();
        assert_eq!(programs.len(), 33);
    }

    #[test]
    fn committed_fixture_matches_its_generator_byte_for_byte() {
        // Same n and seed as examples/generate_fixture.rs.
        let committed = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../fixtures/jee_synthetic");
        let dir = tempfile::tempdir().unwrap();
        write_synthetic_fixture(dir.path(), 5000, 20090614).unwrap();
        for name in ["candidates.csv", "programs.csv"] {
            let fresh = std::fs::read(dir.path().join(name)).unwrap();
            let stored = std::fs::read(committed.join(name)).unwrap();
            assert_eq!(fresh, stored, "{name} drifted from its generator");
        }
    }
}
