//! Trace CSV format.
//!
//! ```text
//! # category=MailServer
//! timestamp_us,page_id,size_pages,op
//! 0,100,1,R
//! 50,101,1,W
//! ```
//!
//! Leading `#` lines are comments; `# category=<name>` carries the
//! ground-truth label. UTF-8, LF line endings, no quoting.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{IoRequest, Op, Trace, WorkloadCategory};
use crate::error::{Error, Result};

pub const TRACE_HEADER: &str = "timestamp_us,page_id,size_pages,op";

pub fn parse_trace(path: impl AsRef<Path>) -> Result<Trace> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trace_str(&text)
}

pub fn parse_trace_str(text: &str) -> Result<Trace> {
    let mut category = None;
    let mut seen_header = false;
    let mut requests = Vec::new();
    let mut last_ts = 0u64;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if !seen_header {
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(name) = comment.trim().strip_prefix("category=") {
                    category = Some(name.trim().parse::<WorkloadCategory>().map_err(|_| {
                        Error::parse(line_no, format!("unknown category `{}`", name.trim()))
                    })?);
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            if line.trim() != TRACE_HEADER {
                return Err(Error::parse(
                    line_no,
                    format!("expected header `{TRACE_HEADER}`"),
                ));
            }
            seen_header = true;
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let req = parse_row(line, line_no)?;
        if req.timestamp_us < last_ts {
            return Err(Error::parse(
                line_no,
                format!(
                    "non-monotonic timestamp {} after {}",
                    req.timestamp_us, last_ts
                ),
            ));
        }
        last_ts = req.timestamp_us;
        requests.push(req);
    }

    if !seen_header {
        return Err(Error::parse(1, "missing header"));
    }
    if requests.is_empty() {
        return Err(Error::EmptyTrace);
    }
    Trace::new(requests, category)
}

fn parse_row(line: &str, line_no: usize) -> Result<IoRequest> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 4 {
        return Err(Error::parse(
            line_no,
            format!("expected 4 fields, found {}", fields.len()),
        ));
    }
    parse_request_fields(&fields, line_no)
}

/// Parses the four request columns at the start of `fields`.
pub(crate) fn parse_request_fields(fields: &[&str], line_no: usize) -> Result<IoRequest> {
    let int = |s: &str, name: &str| -> Result<u64> {
        s.trim()
            .parse::<u64>()
            .map_err(|_| Error::parse(line_no, format!("invalid {name} `{s}`")))
    };
    let timestamp_us = int(fields[0], "timestamp_us")?;
    let page_id = int(fields[1], "page_id")?;
    let size = int(fields[2], "size_pages")?;
    if size == 0 {
        return Err(Error::parse(line_no, "size_pages must be ≥ 1"));
    }
    let size_pages = u32::try_from(size)
        .map_err(|_| Error::parse(line_no, format!("size_pages `{size}` out of range")))?;
    let op = match fields[3].trim() {
        "R" => Op::Read,
        "W" => Op::Write,
        other => return Err(Error::parse(line_no, format!("unknown op code `{other}`"))),
    };
    Ok(IoRequest {
        timestamp_us,
        page_id,
        size_pages,
        op,
    })
}

pub(crate) fn write_request_fields(out: &mut String, r: &IoRequest) {
    let _ = write!(
        out,
        "{},{},{},{}",
        r.timestamp_us,
        r.page_id,
        r.size_pages,
        r.op.code()
    );
}

pub fn write_trace_string(trace: &Trace) -> String {
    let mut out = String::with_capacity(trace.len() * 24 + 64);
    if let Some(c) = trace.category {
        let _ = writeln!(out, "# category={c}");
    }
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in trace.requests() {
        write_request_fields(&mut out, r);
        out.push('\n');
    }
    out
}

pub fn write_trace(trace: &Trace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_trace_string(trace)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_two_rows() {
        let t = parse_trace_str("timestamp_us,page_id,size_pages,op\n0,100,1,R\n50,101,1,W\n")
            .unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.requests()[0].page_id, 100);
        assert_eq!(t.requests()[1].page_id, 101);
        assert_eq!(t.requests()[1].op, Op::Write);
        assert_eq!(t.category, None);
    }

    #[test]
    fn header_only_is_empty() {
        let err = parse_trace_str("timestamp_us,page_id,size_pages,op\n").unwrap_err();
        assert_eq!(err.to_string(), "empty trace");
    }

    #[test]
    fn zero_size_rejected_with_line() {
        let err = parse_trace_str("timestamp_us,page_id,size_pages,op\n10,5,0,R\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(err.to_string().contains("size_pages must be ≥ 1"));
    }

    #[test]
    fn bad_op_and_order() {
        let err = parse_trace_str("timestamp_us,page_id,size_pages,op\n0,1,1,X\n").unwrap_err();
        assert!(err.to_string().contains("unknown op code"));
        let err =
            parse_trace_str("timestamp_us,page_id,size_pages,op\n9,1,1,R\n3,1,1,R\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = parse_trace_str("timestamp_us,page_id,size_pages,op\n0,1,R\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn category_comment() {
        let t = Trace::new(
            vec![IoRequest::new(0, 7, 2, Op::Read)],
            Some(WorkloadCategory::MailServer),
        )
        .unwrap();
        let text = write_trace_string(&t);
        assert_eq!(
            text,
            "# category=MailServer\ntimestamp_us,page_id,size_pages,op\n0,7,2,R\n"
        );
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 2);
        assert_eq!(parse_trace_str(&text).unwrap(), t);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let t = Trace::new(
            vec![
                IoRequest::new(0, 1, 1, Op::Read),
                IoRequest::new(0, 2, 3, Op::Write),
            ],
            None,
        )
        .unwrap();
        write_trace(&t, &path).unwrap();
        assert_eq!(parse_trace(&path).unwrap(), t);
    }

    fn arb_trace() -> impl Strategy<Value = Trace> {
        let req = (0u64..5_000, 0u64..1 << 40, 1u32..300, any::<bool>());
        (
            prop::collection::vec(req, 1..200),
            prop::option::of(0usize..4),
        )
            .prop_map(|(rows, cat)| {
                let mut ts = 0;
                let reqs = rows
                    .into_iter()
                    .map(|(dt, page, size, read)| {
                        ts += dt;
                        IoRequest::new(ts, page, size, if read { Op::Read } else { Op::Write })
                    })
                    .collect();
                Trace::new(reqs, cat.and_then(WorkloadCategory::from_index)).unwrap()
            })
    }

    proptest! {
        #[test]
        fn parse_inverts_write(t in arb_trace()) {
            let back = parse_trace_str(&write_trace_string(&t)).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
