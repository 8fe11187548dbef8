//! Labeled-trace CSV: the trace columns followed by `cached` (0/1) and
//! `duration_label` (`soon`, `mean`, `late`, or `-` when not cached).

use std::fs;
use std::path::Path;

use super::{DurationLabel, LabeledRequest};
use crate::error::{Error, Result};
use crate::trace::{parse_request_fields, write_request_fields, TRACE_HEADER};

pub const LABELED_HEADER: &str = "timestamp_us,page_id,size_pages,op,cached,duration_label";

pub fn write_labeled_string(rows: &[LabeledRequest]) -> String {
    debug_assert!(LABELED_HEADER.starts_with(TRACE_HEADER));
    let mut out = String::with_capacity(rows.len() * 32 + 64);
    out.push_str(LABELED_HEADER);
    out.push('\n');
    for r in rows {
        write_request_fields(&mut out, &r.request);
        out.push_str(if r.cached { ",1," } else { ",0," });
        out.push_str(r.duration_label.map_or("-", DurationLabel::name));
        out.push('\n');
    }
    out
}

pub fn write_labeled(rows: &[LabeledRequest], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_labeled_string(rows)).map_err(|e| Error::io(path, e))
}

pub fn parse_labeled_str(text: &str) -> Result<Vec<LabeledRequest>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, h)) if h.trim() == LABELED_HEADER => {}
        Some((i, _)) => return Err(Error::parse(i + 1, format!("expected header `{LABELED_HEADER}`"))),
        None => return Err(Error::EmptyTrace),
    }
    let mut rows = Vec::new();
    let mut last_ts = 0;
    for (i, line) in lines {
        let line_no = i + 1;
        let fields: Vec<&str> = line.trim_end_matches('\r').split(',').collect();
        if fields.len() != 6 {
            return Err(Error::parse(line_no, format!("expected 6 fields, found {}", fields.len())));
        }
        let request = parse_request_fields(&fields[..4], line_no)?;
        if request.timestamp_us < last_ts {
            return Err(Error::parse(line_no, "non-monotonic timestamp"));
        }
        last_ts = request.timestamp_us;
        let cached = match fields[4].trim() {
            "0" => false,
            "1" => true,
            other => return Err(Error::parse(line_no, format!("invalid cached flag `{other}`"))),
        };
        let label = match fields[5].trim() {
            "-" => None,
            s => Some(
                s.parse::<DurationLabel>()
                    .map_err(|_| Error::parse(line_no, format!("invalid duration label `{s}`")))?,
            ),
        };
        if cached != label.is_some() {
            return Err(Error::parse(line_no, "duration_label must be present exactly when cached = 1"));
        }
        rows.push(LabeledRequest::new(request, label));
    }
    if rows.is_empty() {
        return Err(Error::EmptyTrace);
    }
    Ok(rows)
}

pub fn parse_labeled(path: impl AsRef<Path>) -> Result<Vec<LabeledRequest>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labeled_str(&text)
}
