//! Per-step trace records and their CSV form.
//!
//! Header `t,x,y,z,fx,fy,fz,T,phi,disp,phase,event`, `\n` line endings, floats
//! in shortest round-trip notation. Several events in one step are joined
//! with `;`.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::detector::Event;
use crate::model::Vec3;
use crate::phase::PhaseLabel;

pub const HEADER: [&str; 12] = [
    "t", "x", "y", "z", "fx", "fy", "fz", "T", "phi", "disp", "phase", "event",
];

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("cannot write trace to {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error("cannot read trace from {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed trace row {row}: {reason}")]
    Malformed { row: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSample {
    pub t: f64,
    /// Tool tip position [m].
    pub position: Vec3,
    /// Measured force (applied by the tool) [N].
    pub force: Vec3,
    /// Solder temperature [°C].
    pub temperature: f64,
    pub melt_fraction: f64,
    /// Component slide distance [m].
    pub displacement: f64,
    pub phase: PhaseLabel,
    pub events: Vec<Event>,
}

impl TraceSample {
    pub fn event_label(&self) -> String {
        self.events
            .iter()
            .map(Event::to_string)
            .collect::<Vec<_>>()
            .join(";")
    }
}

fn event_from_label(label: &str) -> Option<Event> {
    Event::ALL.into_iter().find(|e| e.to_string() == label)
}

/// Writes the CSV form of `trace` to `out`.
pub fn write_trace_to<W: Write>(trace: &[TraceSample], out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(HEADER)?;
    for s in trace {
        let nums = [
            s.t,
            s.position.x,
            s.position.y,
            s.position.z,
            s.force.x,
            s.force.y,
            s.force.z,
            s.temperature,
            s.melt_fraction,
            s.displacement,
        ];
        let mut record: Vec<String> = nums.iter().map(f64::to_string).collect();
        record.push(s.phase.to_string());
        record.push(s.event_label());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace(trace: &[TraceSample], path: impl AsRef<Path>) -> Result<(), TraceError> {
    let path = path.as_ref();
    let io_err = |source| TraceError::Write {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    write_trace_to(trace, BufWriter::new(file)).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => io_err(source),
        other => io_err(io::Error::other(format!("{other:?}"))),
    })
}

pub fn read_trace_from<R: Read>(input: R) -> Result<Vec<TraceSample>, TraceError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(HEADER) {
        return Err(TraceError::Malformed {
            row: 0,
            reason: format!("unexpected header {:?}", header),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let bad = |reason: String| TraceError::Malformed { row, reason };
        let num = |k: usize| -> Result<f64, TraceError> {
            rec[k]
                .parse::<f64>()
                .map_err(|e| bad(format!("column {}: {e}", HEADER[k])))
        };
        let phase = rec[10]
            .parse::<PhaseLabel>()
            .map_err(|e| bad(e.to_string()))?;
        let events = if rec[11].is_empty() {
            Vec::new()
        } else {
            rec[11]
                .split(';')
                .map(|l| event_from_label(l).ok_or_else(|| bad(format!("unknown event `{l}`"))))
                .collect::<Result<_, _>>()?
        };
        out.push(TraceSample {
            t: num(0)?,
            position: Vec3::new(num(1)?, num(2)?, num(3)?),
            force: Vec3::new(num(4)?, num(5)?, num(6)?),
            temperature: num(7)?,
            melt_fraction: num(8)?,
            displacement: num(9)?,
            phase,
            events,
        });
    }
    Ok(out)
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<TraceSample>, TraceError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| TraceError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    read_trace_from(file)
}
