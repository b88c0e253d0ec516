//! Versioned CSV trace format and its JSON-lines sibling.
//!
//! ```text
//! # dirgrad-trace v1
//! k,oracle_calls,f_gap,elapsed_ns
//! 0,0,0.5,
//! 1,4,0.49,
//! ```
//!
//! `f_gap` is empty when `f*` is unknown; `elapsed_ns` is empty unless wall
//! time was recorded. Rows need not have unit stride in `k`.

use std::io::{self, Write};

use crate::algorithms::TraceRow;
use crate::error::{Error, Result};

pub const TRACE_HEADER: &str = "# dirgrad-trace v1";
pub const TRACE_COLUMNS: &str = "k,oracle_calls,f_gap,elapsed_ns";

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_trace_csv<W: Write>(mut w: W, rows: &[TraceRow]) -> io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    writeln!(w, "{TRACE_COLUMNS}")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.k, r.oracle_calls, opt(r.f_gap), opt(r.elapsed_ns))?;
    }
    Ok(())
}

/// Wall times only, for the sidecar file next to a trace.
pub fn write_timing_csv<W: Write>(mut w: W, rows: &[TraceRow]) -> io::Result<()> {
    writeln!(w, "k,elapsed_ns")?;
    for r in rows {
        writeln!(w, "{},{}", r.k, opt(r.elapsed_ns))?;
    }
    Ok(())
}

/// One JSON object per row.
pub fn write_trace_jsonl<W: Write>(mut w: W, rows: &[TraceRow]) -> io::Result<()> {
    for r in rows {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn trace_to_string(rows: &[TraceRow]) -> String {
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, rows).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("trace output is ASCII")
}

fn bad(line: usize, reason: impl Into<String>) -> Error {
    Error::Trace {
        line,
        reason: reason.into(),
    }
}

/// Parses a v1 CSV trace. `k` must increase strictly and `oracle_calls`
/// must not decrease.
pub fn parse_trace(text: &str) -> Result<Vec<TraceRow>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    match lines.next() {
        Some((_, l)) if l == TRACE_HEADER => {}
        Some((i, l)) => return Err(bad(i, format!("expected `{TRACE_HEADER}`, found `{}`", truncate(l)))),
        None => return Err(bad(1, "empty trace")),
    }
    match lines.next() {
        Some((_, l)) if l == TRACE_COLUMNS => {}
        Some((i, l)) => return Err(bad(i, format!("expected columns `{TRACE_COLUMNS}`, found `{}`", truncate(l)))),
        None => return Err(bad(2, "missing column header")),
    }
    let mut rows: Vec<TraceRow> = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            return Err(bad(i, "blank line"));
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(bad(i, format!("expected 4 fields, found {}", fields.len())));
        }
        let k: u64 = fields[0].parse().map_err(|_| bad(i, format!("bad k `{}`", truncate(fields[0]))))?;
        let oracle_calls: u64 = fields[1]
            .parse()
            .map_err(|_| bad(i, format!("bad oracle_calls `{}`", truncate(fields[1]))))?;
        let f_gap = if fields[2].is_empty() {
            None
        } else {
            let v: f64 = fields[2]
                .parse()
                .map_err(|_| bad(i, format!("bad f_gap `{}`", truncate(fields[2]))))?;
            if v.is_nan() {
                return Err(bad(i, "f_gap is NaN"));
            }
            Some(v)
        };
        let elapsed_ns = if fields[3].is_empty() {
            None
        } else {
            Some(
                fields[3]
                    .parse()
                    .map_err(|_| bad(i, format!("bad elapsed_ns `{}`", truncate(fields[3]))))?,
            )
        };
        if let Some(prev) = rows.last() {
            if k <= prev.k {
                return Err(bad(i, format!("k must increase ({} after {})", k, prev.k)));
            }
            if oracle_calls < prev.oracle_calls {
                return Err(bad(i, "oracle_calls decreased"));
            }
        }
        rows.push(TraceRow {
            k,
            oracle_calls,
            f_gap,
            f_value: None,
            elapsed_ns,
        });
    }
    Ok(rows)
}

fn truncate(s: &str) -> &str {
    match s.char_indices().nth(40) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(k: u64, calls: u64, gap: Option<f64>) -> TraceRow {
        TraceRow {
            k,
            oracle_calls: calls,
            f_gap: gap,
            f_value: None,
            elapsed_ns: None,
        }
    }

    #[test]
    fn writes_versioned_header() {
        let text = trace_to_string(&[row(0, 0, Some(0.5)), row(1, 4, None)]);
        assert_eq!(text, "# dirgrad-trace v1\nk,oracle_calls,f_gap,elapsed_ns\n0,0,0.5,\n1,4,,\n");
    }

    #[test]
    fn rejects_malformed_traces() {
        let cases = [
            ("", 1),
            ("# dirgrad-trace v2\n", 1),
            ("# dirgrad-trace v1\nk,f_gap\n", 2),
            ("# dirgrad-trace v1\nk,oracle_calls,f_gap,elapsed_ns\n0,0,x,\n", 3),
            ("# dirgrad-trace v1\nk,oracle_calls,f_gap,elapsed_ns\n0,0,1,\n0,1,1,\n", 4),
            ("# dirgrad-trace v1\nk,oracle_calls,f_gap,elapsed_ns\n0,5,1,\n1,4,1,\n", 4),
            ("# dirgrad-trace v1\nk,oracle_calls,f_gap,elapsed_ns\n0,0,1\n", 3),
            ("# dirgrad-trace v1\nk,oracle_calls,f_gap,elapsed_ns\n0,0,NaN,\n", 3),
        ];
        for (text, line) in cases {
            match parse_trace(text) {
                Err(Error::Trace { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn accepts_crlf() {
        let rows = parse_trace("# dirgrad-trace v1\r\nk,oracle_calls,f_gap,elapsed_ns\r\n3,9,-1e-17,12\r\n").unwrap();
        assert_eq!(rows[0].elapsed_ns, Some(12));
        assert_eq!(rows[0].f_gap, Some(-1e-17));
    }

    #[test]
    fn jsonl_one_object_per_row() {
        let mut buf = Vec::new();
        write_trace_jsonl(&mut buf, &[row(0, 0, Some(1.0)), row(2, 8, Some(0.25))]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let back: Vec<TraceRow> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(back, vec![row(0, 0, Some(1.0)), row(2, 8, Some(0.25))]);
    }

    proptest! {
        #[test]
        fn csv_roundtrip(
            steps in prop::collection::vec((1u64..1000, 0u64..1000, prop::option::of(any::<f64>().prop_filter("finite", |v| v.is_finite())), prop::option::of(any::<u64>())), 0..50)
        ) {
            let mut rows = Vec::new();
            let (mut k, mut calls) = (0u64, 0u64);
            for (dk, dc, gap, t) in steps {
                rows.push(TraceRow { k, oracle_calls: calls, f_gap: gap, f_value: None, elapsed_ns: t });
                k += dk;
                calls += dc;
            }
            let text = trace_to_string(&rows);
            prop_assert_eq!(parse_trace(&text).unwrap(), rows);
        }

        #[test]
        fn parser_never_panics(text in ".{0,200}") {
            let _ = parse_trace(&text);
            let _ = parse_trace(&format!("{TRACE_HEADER}\n{TRACE_COLUMNS}\n{text}"));
        }
    }
}
