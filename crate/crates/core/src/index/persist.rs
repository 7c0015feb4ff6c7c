//! On-disk index format, all integers little-endian:
//!
//! ```text
//! magic        8 bytes  "SSPXIDX\0"
//! version      u32
//! n_terms      u32, then per term: u32 byte length + UTF-8 bytes
//! n_docs       u32, then per doc:  u32 byte length + UTF-8 bytes
//! postings     per term id in order:
//!                varint count
//!                count varint doc-id gaps (first gap is from 0)
//!                count f64 weights (raw IEEE-754 bits)
//! checksum     u32 CRC-32 of every preceding byte
//! ```
//!
//! Varints are unsigned LEB128.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{DocId, InvertedIndex};
use crate::error::{Error, Result};
use crate::sparse::{SparseVector, Vocabulary};

pub const MAGIC: &[u8; 8] = b"SSPXIDX\0";
pub const FORMAT_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, x: u32) {
    out.extend_from_slice(&x.to_le_bytes());
}

fn put_varint(out: &mut Vec<u8>, mut x: u64) {
    while x >= 0x80 {
        out.push((x as u8) | 0x80);
        x >>= 7;
    }
    out.push(x as u8);
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| {
            Error::Corrupt(format!("unexpected end of data at byte {}", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn varint(&mut self) -> Result<u64> {
        let mut x = 0u64;
        for shift in (0..64).step_by(7) {
            let b = self.take(1)?[0];
            x |= u64::from(b & 0x7f) << shift;
            if b & 0x80 == 0 {
                return Ok(x);
            }
        }
        Err(Error::Corrupt("varint too long".into()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::Corrupt("invalid UTF-8 in string table".into()))
    }
}

impl InvertedIndex {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, FORMAT_VERSION);
        put_u32(&mut out, self.vocab.len() as u32);
        for t in self.vocab.terms() {
            put_str(&mut out, t);
        }
        put_u32(&mut out, self.doc_names.len() as u32);
        for n in &self.doc_names {
            put_str(&mut out, n);
        }
        for list in &self.postings {
            put_varint(&mut out, list.docs.len() as u64);
            let mut prev = 0;
            for &d in &list.docs {
                put_varint(&mut out, u64::from(d - prev));
                prev = d;
            }
            for w in &list.weights {
                out.extend_from_slice(&w.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        put_u32(&mut out, crc);
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        if buf.len() < MAGIC.len() + 4 || &buf[..MAGIC.len()] != MAGIC {
            return Err(Error::Corrupt("missing index header".into()));
        }
        let version = u32::from_le_bytes(buf[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        if buf.len() < 16 {
            return Err(Error::Corrupt("file too short".into()));
        }
        let (body, tail) = buf.split_at(buf.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        if crc32fast::hash(body) != stored {
            return Err(Error::Corrupt("checksum mismatch".into()));
        }

        let mut cur = Cursor { buf: body, pos: 12 };
        let n_terms = cur.u32()? as usize;
        let mut terms = Vec::with_capacity(n_terms.min(body.len()));
        for _ in 0..n_terms {
            terms.push(cur.string()?);
        }
        let vocab = Vocabulary::from_terms(terms)
            .map_err(|e| Error::Corrupt(format!("vocabulary block: {e}")))?;
        let n_docs = cur.u32()? as usize;
        let mut names = Vec::with_capacity(n_docs.min(body.len()));
        let mut lookup = HashMap::with_capacity(n_docs.min(body.len()));
        for id in 0..n_docs {
            let name = cur.string()?;
            if lookup.insert(name.clone(), id as DocId).is_some() {
                return Err(Error::Corrupt(format!("duplicate document name {name:?}")));
            }
            names.push(name);
        }

        let mut entries: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n_docs];
        for term in 0..n_terms as u32 {
            let count = cur.varint()? as usize;
            let mut ids = Vec::with_capacity(count.min(body.len()));
            let mut prev = 0u64;
            for i in 0..count {
                let gap = cur.varint()?;
                if i > 0 && gap == 0 {
                    return Err(Error::Corrupt(format!(
                        "repeated doc id in postings of term {term}"
                    )));
                }
                prev += gap;
                if prev >= n_docs as u64 {
                    return Err(Error::Corrupt(format!("doc id {prev} out of range")));
                }
                ids.push(prev as usize);
            }
            for doc in ids {
                let w = cur.f64()?;
                if !w.is_finite() || w == 0.0 {
                    return Err(Error::Corrupt(format!(
                        "invalid weight {w} in postings of term {term}"
                    )));
                }
                entries[doc].push((term, w));
            }
        }
        if cur.pos != body.len() {
            return Err(Error::Corrupt("trailing bytes after postings".into()));
        }
        let docs = entries
            .into_iter()
            .map(|e| {
                // Terms were visited in increasing order, so entries are sorted.
                let mut v = SparseVector::empty(&vocab);
                for (t, w) in e {
                    v.push_sorted(t, w);
                }
                v
            })
            .collect();
        Ok(Self::from_parts(vocab, names, lookup, docs))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&self.to_bytes())?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut buf = Vec::new();
        File::open(path)?.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }
}
