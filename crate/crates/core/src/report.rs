//! Output formats: CSV tables, versioned JSON reports and a binary table
//! container for series grids.
//!
//! The binary layout is `FKLT`, a little-endian `u32` version, a `u64`
//! header length, a JSON header naming every block, then the blocks as
//! little-endian `f64`.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::duhamel::SeriesResult;
use crate::error::{Error, Result};

/// Schema tag of every JSON report.
pub const SCHEMA: &str = "fklab.report/v1";
pub const TABLE_MAGIC: &[u8; 4] = b"FKLT";
pub const TABLE_VERSION: u32 = 1;

/// Outcome recorded in a report; maps onto the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
}

/// JSON report with the resolved configuration echoed in its header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub command: String,
    pub config: Value,
    pub status: Status,
    pub body: Value,
}

impl Report {
    pub fn new<C: Serialize, B: Serialize>(command: &str, config: &C, status: Status, body: &B) -> Result<Self> {
        let enc = |e: serde_json::Error| Error::Numeric(format!("report encoding: {e}"));
        Ok(Report {
            schema: SCHEMA.into(),
            command: command.into(),
            config: serde_json::to_value(config).map_err(enc)?,
            status,
            body: serde_json::to_value(body).map_err(enc)?,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("a report always serializes");
        s.push('\n');
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let r: Report = serde_json::from_str(text).map_err(|e| Error::Config(format!("not a report: {e}")))?;
        if r.schema != SCHEMA {
            return Err(Error::Config(format!("unsupported report schema '{}', expected '{SCHEMA}'", r.schema)));
        }
        Ok(r)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Report::parse(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_json().as_bytes())
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Rows of numbers under a fixed header.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Csv {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv { header: header.iter().map(|s| s.to_string()).collect(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Shortest round-trip formatting, so equal values give equal bytes.
    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{v:?}");
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> =
            lines.next().ok_or_else(|| Error::Config("empty CSV".into()))?.split(',').map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (i, l) in lines.enumerate() {
            let row: std::result::Result<Vec<f64>, _> = l.split(',').map(|c| c.trim().parse::<f64>()).collect();
            let row = row.map_err(|e| Error::Config(format!("CSV row {}: {e}", i + 2)))?;
            if row.len() != header.len() {
                return Err(Error::Config(format!("CSV row {} has {} fields, header has {}", i + 2, row.len(), header.len())));
            }
            rows.push(row);
        }
        Ok(Csv { header, rows })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, self.render().as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BlockInfo {
    name: String,
    len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TableHeader {
    blocks: Vec<BlockInfo>,
    meta: Value,
}

/// Named `f64` blocks plus free-form metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryTable {
    pub meta: Value,
    pub blocks: Vec<(String, Vec<f64>)>,
}

impl BinaryTable {
    pub fn block(&self, name: &str) -> Option<&[f64]> {
        self.blocks.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = TableHeader {
            blocks: self.blocks.iter().map(|(n, v)| BlockInfo { name: n.clone(), len: v.len() }).collect(),
            meta: self.meta.clone(),
        };
        let h = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(16 + h.len() + 8 * self.blocks.iter().map(|b| b.1.len()).sum::<usize>());
        out.extend_from_slice(TABLE_MAGIC);
        out.extend_from_slice(&TABLE_VERSION.to_le_bytes());
        out.extend_from_slice(&(h.len() as u64).to_le_bytes());
        out.extend_from_slice(&h);
        for (_, v) in &self.blocks {
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Config(format!("bad table: {m}"));
        let mut r = bytes;
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| bad("truncated"))?;
        if &magic != TABLE_MAGIC {
            return Err(bad("wrong magic"));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4).map_err(|_| bad("truncated"))?;
        let version = u32::from_le_bytes(b4);
        if version != TABLE_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8).map_err(|_| bad("truncated"))?;
        let hl = u64::from_le_bytes(b8) as usize;
        if hl > r.len() {
            return Err(bad("truncated header"));
        }
        let header: TableHeader = serde_json::from_slice(&r[..hl]).map_err(|e| bad(&e.to_string()))?;
        r = &r[hl..];
        let total: usize = header.blocks.iter().map(|b| b.len).sum();
        if r.len() != 8 * total {
            return Err(bad(&format!("expected {} payload bytes, found {}", 8 * total, r.len())));
        }
        let mut blocks = Vec::with_capacity(header.blocks.len());
        for b in header.blocks {
            let mut v = Vec::with_capacity(b.len);
            for _ in 0..b.len {
                r.read_exact(&mut b8).map_err(|_| bad("truncated"))?;
                v.push(f64::from_le_bytes(b8));
            }
            blocks.push((b.name, v));
        }
        Ok(BinaryTable { meta: header.meta, blocks })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        buf.write_all(&self.to_bytes()).expect("in-memory write");
        write_file(path, &buf)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        BinaryTable::from_bytes(&bytes)
    }
}

/// Grid values of a series run; arrays are indexed `[t][x][y]`.
pub fn series_table(res: &SeriesResult) -> BinaryTable {
    let mut blocks = vec![
        ("times".to_string(), res.grid.times.clone()),
        ("xs".to_string(), res.grid.xs.clone()),
        ("p0".to_string(), res.p0.clone()),
        ("q".to_string(), res.q.clone()),
        ("abs_ratio_sum".to_string(), res.abs_ratio_sum.clone()),
    ];
    for term in &res.terms {
        blocks.push((format!("ratio_{}", term.k), term.ratios.vals.clone()));
    }
    BinaryTable {
        meta: serde_json::json!({
            "kind": "series-grid",
            "layout": "[t][x][y]",
            "provenance": res.provenance,
            "orders": res.terms.len(),
            "converged": res.converged,
        }),
        blocks,
    }
}

/// One row per grid node: `t,x,y,p0,q,abs_ratio_sum`.
pub fn series_csv(res: &SeriesResult) -> Csv {
    let mut csv = Csv::new(&["t", "x", "y", "p0", "q", "abs_ratio_sum"]);
    let n = res.grid.xs.len();
    for (ti, &t) in res.grid.times.iter().enumerate() {
        for (xi, &x) in res.grid.xs.iter().enumerate() {
            for (yi, &y) in res.grid.xs.iter().enumerate() {
                let i = (ti * n + xi) * n + yi;
                csv.push(vec![t, x, y, res.p0[i], res.q[i], res.abs_ratio_sum[i]]);
            }
        }
    }
    csv
}

/// Short human summary of a JSON report.
pub fn summarize(r: &Report) -> String {
    let mut s = format!("schema  {}\ncommand {}\nstatus  {:?}\n", r.schema, r.command, r.status);
    if let Value::Object(m) = &r.body {
        for (k, v) in m {
            let line = match v {
                Value::Number(_) | Value::Bool(_) | Value::String(_) => v.to_string(),
                Value::Array(a) => format!("[{} entries]", a.len()),
                Value::Object(o) => format!("{{{} fields}}", o.len()),
                Value::Null => "null".into(),
            };
            let _ = writeln!(s, "{k:<24}{line}");
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trip() {
        let t = BinaryTable {
            meta: serde_json::json!({"kind": "test"}),
            blocks: vec![("a".into(), vec![1.0, -2.5, f64::MIN_POSITIVE]), ("b".into(), vec![])],
        };
        let back = BinaryTable::from_bytes(&t.to_bytes()).unwrap();
        assert_eq!(back, t);
        let mut bytes = t.to_bytes();
        bytes.pop();
        assert!(BinaryTable::from_bytes(&bytes).is_err());
        bytes[0] = b'X';
        assert!(BinaryTable::from_bytes(&bytes).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut c = Csv::new(&["t", "v"]);
        c.push(vec![0.1, 1.0 / 3.0]);
        c.push(vec![1e-300, -0.0]);
        let text = c.render();
        assert!(text.starts_with("t,v\n"));
        let back = Csv::parse(&text).unwrap();
        assert_eq!(back.rows[0], c.rows[0]);
        assert_eq!(back.rows[1][0], 1e-300);
    }

    #[test]
    fn report_schema_checked() {
        let r = Report::new("kernel", &serde_json::json!({"a": 1}), Status::Pass, &serde_json::json!({"x": 2})).unwrap();
        let back = Report::parse(&r.to_json()).unwrap();
        assert_eq!(back, r);
        let wrong = r.to_json().replace(SCHEMA, "other/v9");
        assert!(Report::parse(&wrong).is_err());
    }
}
