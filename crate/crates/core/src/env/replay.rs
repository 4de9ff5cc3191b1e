//! Replay of logged positive interactions against sampled negatives.

use std::collections::HashMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use serde::Deserialize;

use super::{Candidate, EnvError, Environment, Step};
use crate::period::{period_of, TimePeriod};
use crate::rng::{self, streams};
use crate::types::{ItemId, UserId};

/// One logged interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub step: u64,
    pub period: TimePeriod,
    pub user: UserId,
    pub positive: ItemId,
}

#[derive(Debug, Deserialize)]
struct InteractionRow {
    step: u64,
    day_index: u32,
    minutes: u32,
    user_id: u64,
    positive_item_id: u64,
}

#[derive(Debug, Clone)]
pub struct ReplayEnv {
    log: Vec<LogEntry>,
    users: HashMap<UserId, Vec<f64>>,
    /// Item ids in ascending order; negatives are sampled by position here.
    item_ids: Vec<ItemId>,
    item_index: HashMap<ItemId, usize>,
    item_features: Vec<Vec<f64>>,
    user_dim: usize,
    observed_dim: usize,
    candidates: usize,
    seed: u64,
}

fn csv_error(path: &Path, e: impl std::fmt::Display) -> EnvError {
    EnvError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn open(path: &Path) -> Result<std::fs::File, EnvError> {
    std::fs::File::open(path).map_err(|source| EnvError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses an `id,f0,...,f{d-1}` feature table.
fn read_features<R: Read>(reader: R, path: &Path) -> Result<(usize, Vec<(u64, Vec<f64>)>), EnvError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.get(0).map(str::trim) != Some("id") {
        return Err(csv_error(path, "first column must be `id`"));
    }
    let dim = headers.len() - 1;
    for (k, h) in headers.iter().skip(1).enumerate() {
        if h.trim() != format!("f{k}") {
            return Err(csv_error(path, format!("expected column `f{k}`, found `{h}`")));
        }
    }
    let mut rows = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let at = |m: String| csv_error(path, format!("row {}: {m}", line + 1));
        let id: u64 = record[0]
            .trim()
            .parse()
            .map_err(|e| at(format!("bad id: {e}")))?;
        let values = record
            .iter()
            .skip(1)
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| at(format!("bad feature: {e}")))?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(at("non-finite feature".into()));
        }
        rows.push((id, values));
    }
    Ok((dim, rows))
}

fn read_log<R: Read>(reader: R, path: &Path) -> Result<Vec<LogEntry>, EnvError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut log = Vec::new();
    for (line, row) in rdr.deserialize::<InteractionRow>().enumerate() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let period = period_of(row.day_index, row.minutes)
            .map_err(|e| csv_error(path, format!("row {}: {e}", line + 1)))?;
        log.push(LogEntry {
            step: row.step,
            period,
            user: UserId(row.user_id),
            positive: ItemId(row.positive_item_id),
        });
    }
    log.sort_by_key(|e| e.step);
    Ok(log)
}

impl ReplayEnv {
    /// Loads `interactions.csv`, `users.csv` and `items.csv`.
    pub fn from_files(
        interactions: impl AsRef<Path>,
        users: impl AsRef<Path>,
        items: impl AsRef<Path>,
        candidates: usize,
        seed: u64,
    ) -> Result<Self, EnvError> {
        let (ip, up, tp) = (interactions.as_ref(), users.as_ref(), items.as_ref());
        Self::from_readers(
            (open(ip)?, ip.to_path_buf()),
            (open(up)?, up.to_path_buf()),
            (open(tp)?, tp.to_path_buf()),
            candidates,
            seed,
        )
    }

    /// Like [`ReplayEnv::from_files`], with each reader paired with the name
    /// used in error messages.
    pub fn from_readers<A: Read, B: Read, C: Read>(
        interactions: (A, PathBuf),
        users: (B, PathBuf),
        items: (C, PathBuf),
        candidates: usize,
        seed: u64,
    ) -> Result<Self, EnvError> {
        let log = read_log(interactions.0, &interactions.1)?;
        let (user_dim, user_rows) = read_features(users.0, &users.1)?;
        let (observed_dim, mut item_rows) = read_features(items.0, &items.1)?;
        item_rows.sort_by_key(|(id, _)| *id);

        let mut user_map = HashMap::new();
        for (id, f) in user_rows {
            if user_map.insert(UserId(id), f).is_some() {
                return Err(csv_error(&users.1, format!("duplicate user id {id}")));
            }
        }
        let mut item_ids = Vec::with_capacity(item_rows.len());
        let mut item_features = Vec::with_capacity(item_rows.len());
        let mut item_index = HashMap::new();
        for (id, f) in item_rows {
            if item_index.insert(ItemId(id), item_ids.len()).is_some() {
                return Err(csv_error(&items.1, format!("duplicate item id {id}")));
            }
            item_ids.push(ItemId(id));
            item_features.push(f);
        }

        if candidates == 0 {
            return Err(EnvError::Config("candidates must be positive".into()));
        }
        if item_ids.len() < candidates {
            return Err(EnvError::Config(format!(
                "item pool of {} is smaller than the candidate set size {candidates}",
                item_ids.len()
            )));
        }
        for entry in &log {
            if !user_map.contains_key(&entry.user) {
                return Err(EnvError::MissingUser(entry.user));
            }
            if !item_index.contains_key(&entry.positive) {
                return Err(EnvError::MissingItem(entry.positive));
            }
        }

        Ok(Self {
            log,
            users: user_map,
            item_ids,
            item_index,
            item_features,
            user_dim,
            observed_dim,
            candidates,
            seed,
        })
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn num_items(&self) -> usize {
        self.item_ids.len()
    }
}

impl Environment for ReplayEnv {
    fn user_dim(&self) -> usize {
        self.user_dim
    }

    fn observed_dim(&self) -> usize {
        self.observed_dim
    }

    fn candidates_per_step(&self) -> usize {
        self.candidates
    }

    fn horizon(&self) -> Option<usize> {
        Some(self.log.len())
    }

    fn step(&mut self, t: usize) -> Result<Step, EnvError> {
        let entry = self.log.get(t).ok_or(EnvError::EndOfLog {
            step: t,
            len: self.log.len(),
        })?;
        let positive = self.item_index[&entry.positive];
        let mut rng = rng::stream(self.seed, streams::STEP_BASE + t as u64);
        // Sample M−1 distinct positions among the n−1 non-positive items.
        let mut chosen: Vec<usize> = sample(&mut rng, self.item_ids.len() - 1, self.candidates - 1)
            .into_iter()
            .map(|k| if k >= positive { k + 1 } else { k })
            .collect();
        chosen.push(positive);
        chosen.shuffle(&mut rng);
        let candidates = chosen
            .into_iter()
            .map(|k| Candidate {
                item: self.item_ids[k],
                observed: self.item_features[k].clone(),
            })
            .collect();
        Ok(Step {
            t,
            user: entry.user,
            user_context: self.users[&entry.user].clone(),
            period: entry.period,
            candidates,
        })
    }

    fn feedback(&mut self, step: &Step, chosen: usize) -> Result<f64, EnvError> {
        let cand = step.candidates.get(chosen).ok_or(EnvError::BadChoice {
            index: chosen,
            len: step.candidates.len(),
        })?;
        let entry = self.log.get(step.t).ok_or(EnvError::EndOfLog {
            step: step.t,
            len: self.log.len(),
        })?;
        Ok(if cand.item == entry.positive { 1.0 } else { 0.0 })
    }

    fn expected_rewards(&self, _step: &Step) -> Option<Vec<f64>> {
        None
    }
}
