use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Event;
use crate::block_norm::SetIndex;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EventCounts {
    pub updates: u64,
    pub sends: u64,
    pub deliveries: u64,
    /// Messages beaten by a fresher one from the same sender in the same tick.
    pub superseded: u64,
    /// Deliveries dropped by timestamp deduplication.
    pub discarded: u64,
}

/// Distances of one agent's local copy to the minimizer at one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub k: u64,
    pub agent_id: usize,
    pub dist2: f64,
    pub dist_blockmax: f64,
    /// `None` when the stepsizes give no contraction (`q >= 1`).
    pub set_index: Option<SetIndex>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    k: u64,
    agent_id: usize,
    dist2: f64,
    dist_blockmax: f64,
    set_index: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub agents: usize,
    pub horizon: u64,
    pub x_hat: Vec<f64>,
    /// `||I - Gamma Q||_2` for the stepsizes used.
    pub q: f64,
    /// Initial block-max radius `D_o`.
    pub d_o: f64,
    /// `(horizon + 1) * agents` rows, tick-major.
    pub rows: Vec<TraceRow>,
    pub final_states: Vec<Vec<f64>>,
    pub counts: EventCounts,
    pub events: Vec<Event>,
}

impl SimTrace {
    pub(crate) fn new(agents: usize, horizon: u64, x_hat: Vec<f64>, q: f64, d_o: f64) -> Self {
        SimTrace {
            agents,
            horizon,
            x_hat,
            q,
            d_o,
            rows: Vec::new(),
            final_states: Vec::new(),
            counts: EventCounts::default(),
            events: Vec::new(),
        }
    }

    pub fn at(&self, k: u64) -> &[TraceRow] {
        let start = k as usize * self.agents;
        &self.rows[start..start + self.agents]
    }

    /// Worst agent's Euclidean distance at tick `k`.
    pub fn max_dist2(&self, k: u64) -> f64 {
        self.at(k).iter().map(|r| r.dist2).fold(0.0, f64::max)
    }

    pub fn max_dist_blockmax(&self, k: u64) -> f64 {
        self.at(k).iter().map(|r| r.dist_blockmax).fold(0.0, f64::max)
    }

    /// Worst-agent Euclidean distance for every tick.
    pub fn worst_curve(&self) -> Vec<f64> {
        (0..=self.horizon).map(|k| self.max_dist2(k)).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::result::Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(CsvRow {
                k: r.k,
                agent_id: r.agent_id,
                dist2: r.dist2,
                dist_blockmax: r.dist_blockmax,
                set_index: r.set_index.map_or_else(|| "na".to_string(), |s| s.to_string()),
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file)).map_err(|e| csv_error(path, e))
    }

    /// Event log as `k,type,i,j,compute_time` lines.
    pub fn write_events<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "k,type,i,j,compute_time")?;
        for e in &self.events {
            writeln!(out, "{},{},{},{},{}", e.k, e.kind.as_str(), e.i, e.j, e.compute_time)?;
        }
        out.flush()
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse { path: path.to_path_buf(), message: format!("{other:?}") },
    }
}

/// Parses a trace CSV back into rows. Empty traces are rejected.
pub fn read_trace_csv<R: Read>(input: R, path: &Path) -> Result<Vec<TraceRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for rec in reader.deserialize::<CsvRow>() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let set_index = match rec.set_index.as_str() {
            "na" => None,
            s => Some(s.parse().map_err(|e: Error| Error::Parse { path: path.to_path_buf(), message: e.to_string() })?),
        };
        rows.push(TraceRow {
            k: rec.k,
            agent_id: rec.agent_id,
            dist2: rec.dist2,
            dist_blockmax: rec.dist_blockmax,
            set_index,
        });
    }
    if rows.is_empty() {
        return Err(Error::Parse { path: path.to_path_buf(), message: "trace has no rows".into() });
    }
    Ok(rows)
}
