//! On-disk graph formats.
//!
//! Text edge list: one edge per LF-terminated line, two ASCII decimal VIDs
//! separated by whitespace, `src dst` by default (`dst src` selectable).
//! Blank lines and lines starting with `#` are ignored, except a
//! `# nodes: N` line, which fixes the node count (otherwise `1 + max VID`).
//!
//! Binary COO: `AGN1`, n: u64 LE, e: u64 LE, then e records of
//! (dst: u32 LE, src: u32 LE).
//!
//! Binary CSC: `AGC1`, n: u64 LE, e: u64 LE, (n + 1) pointers as u64 LE,
//! e indices as u32 LE.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CscGraph, Edge, EdgeArrayCoo, Vid};

pub const COO_MAGIC: &[u8; 4] = b"AGN1";
pub const CSC_MAGIC: &[u8; 4] = b"AGC1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphFormat {
    #[default]
    Text,
    Binary,
}

impl FromStr for GraphFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "text" | "text-edge-list" => Ok(Self::Text),
            "binary" | "binary-coo" => Ok(Self::Binary),
            other => Err(format!("unknown graph format `{other}` (text | binary)")),
        }
    }
}

impl fmt::Display for GraphFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Text => "text",
            Self::Binary => "binary",
        })
    }
}

/// Column order of a text edge list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeOrder {
    #[default]
    SrcDst,
    DstSrc,
}

impl FromStr for EdgeOrder {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "src-dst" | "src dst" => Ok(Self::SrcDst),
            "dst-src" | "dst src" => Ok(Self::DstSrc),
            other => Err(format!("unknown edge order `{other}` (src-dst | dst-src)")),
        }
    }
}

pub fn load_graph(path: &Path, format: GraphFormat, order: EdgeOrder) -> Result<EdgeArrayCoo> {
    let bytes = fs::read(path)?;
    match format {
        GraphFormat::Text => parse_text(path, &bytes, order),
        GraphFormat::Binary => parse_binary_coo(path, &bytes),
    }
}

pub fn save_graph(
    path: &Path,
    g: &EdgeArrayCoo,
    format: GraphFormat,
    order: EdgeOrder,
) -> Result<()> {
    let bytes = match format {
        GraphFormat::Text => encode_text(g, order),
        GraphFormat::Binary => encode_binary_coo(g),
    };
    write_atomic(path, &bytes)
}

pub fn encode_text(g: &EdgeArrayCoo, order: EdgeOrder) -> Vec<u8> {
    let mut out = Vec::with_capacity(g.edge_count() * 12 + 24);
    writeln!(out, "# nodes: {}", g.node_count()).unwrap();
    for e in g.edges() {
        let (a, b) = match order {
            EdgeOrder::SrcDst => (e.src, e.dst),
            EdgeOrder::DstSrc => (e.dst, e.src),
        };
        writeln!(out, "{a} {b}").unwrap();
    }
    out
}

pub fn parse_text(path: &Path, bytes: &[u8], order: EdgeOrder) -> Result<EdgeArrayCoo> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()]
            .iter()
            .filter(|&&b| b == b'\n')
            .count()
            + 1;
        Error::TextParse {
            path: path.to_owned(),
            line,
            msg: "not valid UTF-8".into(),
        }
    })?;
    let err = |line: usize, msg: String| Error::TextParse {
        path: path.to_owned(),
        line,
        msg,
    };

    let mut declared: Option<usize> = None;
    let mut edges = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(n) = comment.trim().strip_prefix("nodes:") {
                let n = n
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| err(line_no, format!("bad node count: {e}")))?;
                declared = Some(n);
            }
            continue;
        }
        let mut fields = line.split_whitespace();
        let mut next = |what: &str| -> Result<Vid> {
            let tok = fields
                .next()
                .ok_or_else(|| err(line_no, format!("missing {what} VID")))?;
            tok.parse::<Vid>()
                .map_err(|e| err(line_no, format!("bad {what} VID `{tok}`: {e}")))
        };
        let (a, b) = (next("first")?, next("second")?);
        if let Some(extra) = fields.next() {
            return Err(err(line_no, format!("unexpected trailing field `{extra}`")));
        }
        let edge = match order {
            EdgeOrder::SrcDst => Edge::new(b, a),
            EdgeOrder::DstSrc => Edge::new(a, b),
        };
        if let Some(n) = declared {
            let hi = edge.dst.max(edge.src);
            if hi as usize >= n {
                return Err(err(
                    line_no,
                    format!("VID {hi} not below declared node count {n}"),
                ));
            }
        }
        edges.push((line_no, edge));
    }

    match declared {
        Some(n) => {
            // A header after some edges still binds them.
            if let Some((line, e)) = edges.iter().find(|(_, e)| e.dst.max(e.src) as usize >= n) {
                return Err(err(
                    *line,
                    format!("VID {} not below declared node count {n}", e.dst.max(e.src)),
                ));
            }
            EdgeArrayCoo::new(n, edges.into_iter().map(|(_, e)| e).collect())
        }
        None => Ok(EdgeArrayCoo::from_edges(
            edges.into_iter().map(|(_, e)| e).collect(),
        )),
    }
}

pub fn encode_binary_coo(g: &EdgeArrayCoo) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 8 * g.edge_count());
    out.extend_from_slice(COO_MAGIC);
    out.extend_from_slice(&(g.node_count() as u64).to_le_bytes());
    out.extend_from_slice(&(g.edge_count() as u64).to_le_bytes());
    for e in g.edges() {
        out.extend_from_slice(&e.dst.to_le_bytes());
        out.extend_from_slice(&e.src.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(path: &'a Path, bytes: &'a [u8]) -> Self {
        Self {
            path,
            bytes,
            pos: 0,
        }
    }

    fn fail(&self, msg: impl Into<String>) -> Error {
        Error::BinaryParse {
            path: self.path.to_owned(),
            offset: self.pos as u64,
            msg: msg.into(),
        }
    }

    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < len {
            return Err(self.fail(format!(
                "truncated {what}: need {len} bytes, {} left",
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    fn magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        let got = self.take(4, "magic")?;
        if got != magic {
            self.pos = 0;
            return Err(self.fail(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(got),
                String::from_utf8_lossy(magic)
            )));
        }
        Ok(())
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    /// Checks a declared element count against the bytes remaining before
    /// allocating for it.
    fn expect_remaining(&self, count: u64, elem: u64, what: &str) -> Result<()> {
        let left = (self.bytes.len() - self.pos) as u64;
        match count.checked_mul(elem) {
            Some(need) if need <= left => Ok(()),
            _ => Err(self.fail(format!(
                "truncated {what}: header declares {count} entries, {left} bytes left"
            ))),
        }
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.fail(format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

pub fn parse_binary_coo(path: &Path, bytes: &[u8]) -> Result<EdgeArrayCoo> {
    let mut cur = Cursor::new(path, bytes);
    cur.magic(COO_MAGIC)?;
    let n = cur.u64("node count")?;
    let e = cur.u64("edge count")?;
    if n > u32::MAX as u64 + 1 {
        return Err(cur.fail(format!("node count {n} exceeds the 32-bit VID space")));
    }
    cur.expect_remaining(e, 8, "edge records")?;
    let mut edges = Vec::with_capacity(e as usize);
    for _ in 0..e {
        let at = cur.pos;
        let dst = cur.u32("dst")?;
        let src = cur.u32("src")?;
        let hi = dst.max(src);
        if hi as u64 >= n {
            return Err(Error::BinaryParse {
                path: path.to_owned(),
                offset: at as u64,
                msg: format!("VID {hi} not below declared node count {n}"),
            });
        }
        edges.push(Edge::new(dst, src));
    }
    cur.finish()?;
    EdgeArrayCoo::new(n as usize, edges)
}

pub fn encode_csc(csc: &CscGraph) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 8 * csc.pointers.len() + 4 * csc.indices.len());
    out.extend_from_slice(CSC_MAGIC);
    out.extend_from_slice(&(csc.node_count() as u64).to_le_bytes());
    out.extend_from_slice(&(csc.edge_count() as u64).to_le_bytes());
    for p in &csc.pointers {
        out.extend_from_slice(&p.to_le_bytes());
    }
    for i in &csc.indices {
        out.extend_from_slice(&i.to_le_bytes());
    }
    out
}

pub fn parse_csc(path: &Path, bytes: &[u8]) -> Result<CscGraph> {
    let mut cur = Cursor::new(path, bytes);
    cur.magic(CSC_MAGIC)?;
    let n = cur.u64("node count")?;
    let e = cur.u64("edge count")?;
    cur.expect_remaining(n.saturating_add(1), 8, "pointer array")?;
    let pointers = (0..=n)
        .map(|_| cur.u64("pointer"))
        .collect::<Result<Vec<_>>>()?;
    cur.expect_remaining(e, 4, "index array")?;
    let indices = (0..e)
        .map(|_| cur.u32("index"))
        .collect::<Result<Vec<_>>>()?;
    cur.finish()?;
    let csc = CscGraph { pointers, indices };
    csc.validate()?;
    Ok(csc)
}

pub fn save_csc(path: &Path, csc: &CscGraph) -> Result<()> {
    write_atomic(path, &encode_csc(csc))
}

pub fn load_csc(path: &Path) -> Result<CscGraph> {
    let bytes = fs::read(path)?;
    parse_csc(path, &bytes)
}

/// Writes through a sibling temp file so a failed run never leaves a
/// half-written output behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> &'static Path {
        Path::new("mem")
    }

    #[test]
    fn text_basic() {
        let g = parse_text(p(), b"0 1\n2 0\n", EdgeOrder::SrcDst).unwrap();
        assert_eq!((g.edge_count(), g.node_count()), (2, 3));
        let pairs: Vec<_> = g.edges().iter().map(|e| (e.src, e.dst)).collect();
        assert_eq!(pairs, vec![(0, 1), (2, 0)]);

        let g = parse_text(p(), b"0 1\n2 0\n", EdgeOrder::DstSrc).unwrap();
        assert_eq!(g.edges()[0], Edge::new(0, 1));
    }

    #[test]
    fn text_empty() {
        let g = parse_text(p(), b"", EdgeOrder::SrcDst).unwrap();
        assert_eq!((g.edge_count(), g.node_count()), (0, 0));
    }

    #[test]
    fn text_header_and_errors() {
        let g = parse_text(p(), b"# nodes: 10\n1 2\n", EdgeOrder::SrcDst).unwrap();
        assert_eq!(g.node_count(), 10);

        let err = parse_text(p(), b"0 1\n2 x\n", EdgeOrder::SrcDst).unwrap_err();
        assert!(matches!(err, Error::TextParse { line: 2, .. }), "{err}");
        let err = parse_text(p(), b"0 1 2\n", EdgeOrder::SrcDst).unwrap_err();
        assert!(matches!(err, Error::TextParse { line: 1, .. }));
        let err = parse_text(p(), b"# nodes: 2\n\n0 5\n", EdgeOrder::SrcDst).unwrap_err();
        assert!(matches!(err, Error::TextParse { line: 3, .. }));
        let err = parse_text(p(), b"3\n", EdgeOrder::SrcDst).unwrap_err();
        assert!(err.to_string().contains("missing second"));
    }

    #[test]
    fn binary_header_keeps_isolated_nodes() {
        let g =
            EdgeArrayCoo::new(5, vec![Edge::new(0, 1), Edge::new(1, 1), Edge::new(2, 0)]).unwrap();
        let bytes = encode_binary_coo(&g);
        let back = parse_binary_coo(p(), &bytes).unwrap();
        assert_eq!((back.edge_count(), back.node_count()), (3, 5));
        assert_eq!(back, g);
    }

    #[test]
    fn binary_errors_name_offsets() {
        let g = EdgeArrayCoo::new(3, vec![Edge::new(0, 1), Edge::new(2, 2)]).unwrap();
        let bytes = encode_binary_coo(&g);

        let err = parse_binary_coo(p(), &bytes[..bytes.len() - 3]).unwrap_err();
        assert!(
            matches!(err, Error::BinaryParse { offset: 20, .. }),
            "{err}"
        );

        let mut bad = bytes.clone();
        bad[28..32].copy_from_slice(&9u32.to_le_bytes());
        let err = parse_binary_coo(p(), &bad).unwrap_err();
        assert!(
            matches!(err, Error::BinaryParse { offset: 28, .. }),
            "{err}"
        );

        let err = parse_binary_coo(p(), b"AGC1").unwrap_err();
        assert!(matches!(err, Error::BinaryParse { offset: 0, .. }));

        let mut trailing = bytes;
        trailing.push(0);
        assert!(parse_binary_coo(p(), &trailing).is_err());
    }

    #[test]
    fn csc_layout() {
        let csc = CscGraph {
            pointers: vec![0, 2, 3],
            indices: vec![0, 1, 1],
        };
        let bytes = encode_csc(&csc);
        assert_eq!(&bytes[..4], b"AGC1");
        assert_eq!(u64::from_le_bytes(bytes[4..12].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(bytes[12..20].try_into().unwrap()), 3);
        assert_eq!(bytes.len(), 20 + 3 * 8 + 3 * 4);
        assert_eq!(parse_csc(p(), &bytes).unwrap(), csc);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = EdgeArrayCoo::new(7, vec![Edge::new(3, 4), Edge::new(0, 6)]).unwrap();
        for format in [GraphFormat::Text, GraphFormat::Binary] {
            let path = dir.path().join(format!("g.{format}"));
            save_graph(&path, &g, format, EdgeOrder::DstSrc).unwrap();
            assert_eq!(load_graph(&path, format, EdgeOrder::DstSrc).unwrap(), g);
        }
    }

    fn arb_graph() -> impl Strategy<Value = EdgeArrayCoo> {
        (1usize..200).prop_flat_map(|n| {
            proptest::collection::vec((0..n as Vid, 0..n as Vid), 0..300).prop_map(move |pairs| {
                EdgeArrayCoo::new(n, pairs.into_iter().map(|(d, s)| Edge::new(d, s)).collect())
                    .unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn save_load_reproduces_edges(g in arb_graph(), dst_first in any::<bool>()) {
            let order = if dst_first { EdgeOrder::DstSrc } else { EdgeOrder::SrcDst };
            prop_assert_eq!(parse_binary_coo(p(), &encode_binary_coo(&g)).unwrap(), g.clone());
            prop_assert_eq!(parse_text(p(), &encode_text(&g, order), order).unwrap(), g);
        }
    }
}
