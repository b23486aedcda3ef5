//! On-disk formats: event logs and edge lists as CSV, parameters and Σ as JSON.

use std::fs;
use std::path::Path;

use mic_core::{Event, EventLog, ExponentialKernel, Mixing, ModelParams, UserGraph};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const PARAMS_SCHEMA: &str = "mic.params/1";

const EVENT_HEADER: [&str; 3] = ["user", "cascade", "timestamp"];

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file))
}

fn parse_error(path: &Path, line: u64, message: String) -> CliError {
    CliError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    }
}

fn parse_id(path: &Path, line: u64, column: &str, raw: &str) -> Result<usize> {
    raw.parse::<u64>()
        .ok()
        .and_then(|v| usize::try_from(v).ok())
        .ok_or_else(|| {
            let what = if !raw.is_empty() && raw.bytes().all(|b| b.is_ascii_digit()) {
                "id overflow"
            } else {
                "not a nonnegative integer id"
            };
            parse_error(path, line, format!("column `{column}`: {what}: {raw:?}"))
        })
}

fn parse_real(path: &Path, line: u64, column: &str, raw: &str) -> Result<f64> {
    let x: f64 = raw
        .parse()
        .map_err(|_| parse_error(path, line, format!("column `{column}`: not a number: {raw:?}")))?;
    if !x.is_finite() || x < 0.0 {
        return Err(parse_error(
            path,
            line,
            format!("column `{column}`: must be finite and nonnegative, got {raw}"),
        ));
    }
    Ok(x)
}

fn check_header(path: &Path, reader: &mut csv::Reader<fs::File>, expected: &[&str], optional: usize) -> Result<usize> {
    let header = reader
        .headers()
        .map_err(|e| CliError::data(path, e.to_string()))?
        .clone();
    let names: Vec<&str> = header.iter().collect();
    let required = expected.len() - optional;
    let ok = names.len() >= required && names.len() <= expected.len() && names.iter().zip(expected).all(|(a, b)| a == b);
    if !ok {
        return Err(parse_error(
            path,
            1,
            format!("expected header `{}`, found `{}`", expected.join(","), names.join(",")),
        ));
    }
    Ok(names.len())
}

/// Reads `user,cascade,timestamp` rows (timestamps in seconds) into a sorted log.
///
/// `horizon` defaults to the last event time; an empty log needs it explicitly.
pub fn read_event_log(path: &Path, horizon: Option<f64>) -> Result<EventLog> {
    let mut reader = csv_reader(path)?;
    check_header(path, &mut reader, &EVENT_HEADER, 0)?;
    let mut events = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::data(path, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(parse_error(path, line, format!("expected 3 columns, found {}", record.len())));
        }
        let user = parse_id(path, line, "user", &record[0])?;
        let cascade = parse_id(path, line, "cascade", &record[1])?;
        let time = parse_real(path, line, "timestamp", &record[2])?;
        events.push(Event::new(user, cascade, time));
    }
    let last = events.iter().map(|e| e.time).fold(None, |m: Option<f64>, t| Some(m.map_or(t, |m| m.max(t))));
    let horizon = match (horizon, last) {
        (Some(h), Some(t)) if h < t => {
            return Err(CliError::data(path, format!("horizon {h} precedes the last event at {t}")))
        }
        (Some(h), _) => h,
        (None, Some(t)) => t,
        (None, None) => return Err(CliError::data(path, "empty event log: pass the horizon explicitly")),
    };
    Ok(EventLog::new(events, horizon)?)
}

pub fn event_log_csv(log: &EventLog) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(EVENT_HEADER).expect("in-memory write");
    for e in log.events() {
        w.write_record([e.user.to_string(), e.cascade.to_string(), e.time.to_string()])
            .expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

/// An edge list as read from disk, before the user count is known.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeList {
    pub edges: Vec<(usize, usize, Option<f64>)>,
}

impl EdgeList {
    pub fn max_id(&self) -> Option<usize> {
        self.edges.iter().map(|&(s, d, _)| s.max(d)).max()
    }

    pub fn graph(&self, n_users: usize) -> Result<UserGraph> {
        if let Some(id) = self.max_id().filter(|&id| id >= n_users) {
            return Err(CliError::Usage(format!(
                "edge list references user {id} but the model has {n_users} users"
            )));
        }
        Ok(UserGraph::from_edges(n_users, self.edges.iter().map(|&(s, d, _)| (s, d)))?)
    }

    /// The weight matrix, if every edge carries a weight.
    pub fn weights(&self, n_users: usize) -> Option<DMatrix<f64>> {
        if self.edges.is_empty() || self.edges.iter().any(|e| e.2.is_none()) {
            return None;
        }
        let mut w = DMatrix::zeros(n_users, n_users);
        for &(s, d, x) in &self.edges {
            w[(s, d)] = x.unwrap_or(0.0);
        }
        Some(w)
    }
}

/// Reads `src,dst[,weight]` rows; a missing weight marks an edge whose weight is to be fitted.
pub fn read_edge_list(path: &Path) -> Result<EdgeList> {
    let mut reader = csv_reader(path)?;
    check_header(path, &mut reader, &["src", "dst", "weight"], 1)?;
    let mut edges = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::data(path, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let weight = match record.len() {
            2 => None,
            3 if record[2].is_empty() => None,
            3 => Some(parse_real(path, line, "weight", &record[2])?),
            n => return Err(parse_error(path, line, format!("expected 2 or 3 columns, found {n}"))),
        };
        let src = parse_id(path, line, "src", &record[0])?;
        let dst = parse_id(path, line, "dst", &record[1])?;
        edges.push((src, dst, weight));
    }
    Ok(EdgeList { edges })
}

/// Writes the support of `graph` with weights from `influence` when given.
pub fn edge_list_csv(graph: &UserGraph, influence: Option<&DMatrix<f64>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if influence.is_some() {
        w.write_record(["src", "dst", "weight"]).expect("in-memory write");
    } else {
        w.write_record(["src", "dst"]).expect("in-memory write");
    }
    for (src, dst) in graph.edges() {
        let mut row = vec![src.to_string(), dst.to_string()];
        if let Some(m) = influence {
            row.push(m[(src, dst)].to_string());
        }
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightEntry {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

/// Parameter file: dense M and Σ, nonzero entries of W as triplets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsDocument {
    pub schema: String,
    pub n_users: usize,
    pub n_cascades: usize,
    pub kernel: ExponentialKernel,
    pub mixing: Mixing,
    /// `baseline[u][c]` = `μ_u^(c)`.
    pub baseline: Vec<Vec<f64>>,
    /// `interaction[s][c]` = `σ_sc`; rows sum to one.
    pub interaction: Vec<Vec<f64>>,
    /// `w_{src,dst}`, the influence of `src` on `dst`.
    pub influence: Vec<WeightEntry>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], n_rows: usize, n_cols: usize, what: &str) -> std::result::Result<DMatrix<f64>, String> {
    if rows.len() != n_rows || rows.iter().any(|r| r.len() != n_cols) {
        return Err(format!("{what} must be {n_rows}x{n_cols}"));
    }
    Ok(DMatrix::from_fn(n_rows, n_cols, |i, j| rows[i][j]))
}

impl ParamsDocument {
    pub fn from_params(p: &ModelParams) -> Self {
        let n = p.n_users();
        let mut influence = Vec::new();
        for src in 0..n {
            for dst in 0..n {
                let weight = p.influence[(src, dst)];
                if weight != 0.0 {
                    influence.push(WeightEntry { src, dst, weight });
                }
            }
        }
        Self {
            schema: PARAMS_SCHEMA.to_string(),
            n_users: n,
            n_cascades: p.n_cascades(),
            kernel: p.kernel,
            mixing: p.mixing,
            baseline: rows(&p.baseline),
            interaction: rows(&p.interaction),
            influence,
        }
    }

    pub fn to_params(&self) -> std::result::Result<ModelParams, String> {
        if self.schema != PARAMS_SCHEMA {
            return Err(format!("unsupported schema {:?}, expected {PARAMS_SCHEMA:?}", self.schema));
        }
        let (nu, nc) = (self.n_users, self.n_cascades);
        let baseline = matrix_from_rows(&self.baseline, nu, nc, "baseline")?;
        let interaction = matrix_from_rows(&self.interaction, nc, nc, "interaction")?;
        let mut influence = DMatrix::zeros(nu, nu);
        for e in &self.influence {
            if e.src >= nu || e.dst >= nu {
                return Err(format!("influence entry ({}, {}) references a missing user", e.src, e.dst));
            }
            if !(e.weight >= 0.0 && e.weight.is_finite()) {
                return Err(format!("influence entry ({}, {}) has weight {}", e.src, e.dst, e.weight));
            }
            influence[(e.src, e.dst)] = e.weight;
        }
        let kernel = ExponentialKernel::new(self.kernel.tau).map_err(|e| e.to_string())?;
        ModelParams::new(baseline, interaction, influence, kernel, self.mixing).map_err(|e| e.to_string())
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| parse_error(path, e.line() as u64, e.to_string()))
}

pub fn read_params(path: &Path) -> Result<ModelParams> {
    let doc: ParamsDocument = read_json(path)?;
    doc.to_params().map_err(|m| CliError::data(path, m))
}

pub fn params_json(p: &ModelParams) -> Vec<u8> {
    crate::artifact::to_json(&ParamsDocument::from_params(p))
}

/// Σ file: a bare nested array, or an object with a `matrix` field.
#[derive(Deserialize)]
#[serde(untagged)]
enum SigmaFile {
    Bare(Vec<Vec<f64>>),
    Wrapped { matrix: Vec<Vec<f64>> },
}

pub fn read_sigma(path: &Path) -> Result<DMatrix<f64>> {
    let rows = match read_json::<SigmaFile>(path)? {
        SigmaFile::Bare(r) | SigmaFile::Wrapped { matrix: r } => r,
    };
    let n = rows.len();
    let m = matrix_from_rows(&rows, n, n, "interaction matrix").map_err(|m| CliError::data(path, m))?;
    for (s, row) in rows.iter().enumerate() {
        let total: f64 = row.iter().sum();
        if row.iter().any(|x| !(*x >= 0.0)) || (total - 1.0).abs() > mic_core::model::SIGMA_ROW_TOLERANCE {
            return Err(CliError::data(path, format!("row {s} is not a probability vector: {row:?}")));
        }
    }
    Ok(m)
}
