use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One detection record: `device_id` had `app_id` installed at `timestamp`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InstallEvent {
    pub device_id: String,
    pub app_id: String,
    pub timestamp: u64,
}

impl InstallEvent {
    pub fn new(device_id: impl Into<String>, app_id: impl Into<String>, timestamp: u64) -> Self {
        Self {
            device_id: device_id.into(),
            app_id: app_id.into(),
            timestamp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventFormat {
    #[default]
    Csv,
    Jsonl,
}

impl std::str::FromStr for EventFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(EventFormat::Csv),
            "jsonl" => Ok(EventFormat::Jsonl),
            other => Err(Error::config("format", format!("expected csv or jsonl, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IngestOptions {
    pub format: EventFormat,
    /// Skip the first line (CSV only).
    pub header: bool,
    /// Fail on the first malformed line instead of counting it.
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MalformedLine {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    pub events: Vec<InstallEvent>,
    pub malformed: Vec<MalformedLine>,
}

#[derive(Deserialize)]
struct JsonEvent {
    device_id: String,
    app_id: String,
    ts: u64,
}

#[derive(Serialize)]
struct JsonEventOut<'a> {
    device_id: &'a str,
    app_id: &'a str,
    ts: u64,
}

fn check_tokens(device: &str, app: &str) -> std::result::Result<(), String> {
    if device.is_empty() {
        return Err("empty device_id".into());
    }
    if app.is_empty() {
        return Err("empty app_id".into());
    }
    Ok(())
}

fn parse_csv_line(line: &str) -> std::result::Result<InstallEvent, String> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(line.as_bytes());
    let mut record = csv::StringRecord::new();
    match rdr.read_record(&mut record) {
        Ok(true) => {}
        Ok(false) => return Err("empty record".into()),
        Err(e) => return Err(e.to_string()),
    }
    if record.len() != 3 {
        return Err(format!("expected 3 fields, found {}", record.len()));
    }
    let device = record[0].trim();
    let app = record[1].trim();
    check_tokens(device, app)?;
    let ts: u64 = record[2]
        .trim()
        .parse()
        .map_err(|e| format!("bad timestamp `{}`: {e}", &record[2]))?;
    Ok(InstallEvent::new(device, app, ts))
}

fn parse_json_line(line: &str) -> std::result::Result<InstallEvent, String> {
    let ev: JsonEvent = serde_json::from_str(line).map_err(|e| e.to_string())?;
    check_tokens(&ev.device_id, &ev.app_id)?;
    Ok(InstallEvent::new(ev.device_id, ev.app_id, ev.ts))
}

/// Reads events in file order. Blank lines are ignored; malformed lines are
/// reported in [`IngestReport::malformed`] or, in strict mode, abort the read.
pub fn ingest_events<R: Read>(source: R, opts: IngestOptions) -> Result<IngestReport> {
    let reader = BufReader::new(source);
    let mut report = IngestReport::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line?;
        if i == 0 && opts.header && opts.format == EventFormat::Csv {
            continue;
        }
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let parsed = match opts.format {
            EventFormat::Csv => parse_csv_line(trimmed),
            EventFormat::Jsonl => parse_json_line(trimmed),
        };
        match parsed {
            Ok(ev) => report.events.push(ev),
            Err(reason) => {
                if opts.strict {
                    return Err(Error::Parse {
                        line: line_no,
                        reason,
                    });
                }
                report.malformed.push(MalformedLine {
                    line: line_no,
                    reason,
                });
            }
        }
    }
    if !report.malformed.is_empty() {
        log::warn!("{} malformed event lines skipped", report.malformed.len());
    }
    Ok(report)
}

pub fn ingest_path(path: &Path, opts: IngestOptions) -> Result<IngestReport> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_events(file, opts)
}

pub fn write_events<W: Write>(sink: W, events: &[InstallEvent], format: EventFormat) -> Result<()> {
    let mut w = BufWriter::new(sink);
    match format {
        EventFormat::Csv => {
            let mut cw = csv::WriterBuilder::new().has_headers(false).from_writer(&mut w);
            for ev in events {
                cw.write_record([&ev.device_id, &ev.app_id, &ev.timestamp.to_string()])
                    .map_err(|e| Error::format("csv", e.to_string()))?;
            }
            cw.flush()?;
        }
        EventFormat::Jsonl => {
            for ev in events {
                let out = JsonEventOut {
                    device_id: &ev.device_id,
                    app_id: &ev.app_id,
                    ts: ev.timestamp,
                };
                serde_json::to_writer(&mut w, &out)
                    .map_err(|e| Error::format("jsonl", e.to_string()))?;
                w.write_all(b"\n")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_events_path(path: &Path, events: &[InstallEvent], format: EventFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_events(file, events, format)
}
