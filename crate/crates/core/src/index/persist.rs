//! On-disk index layout.
//!
//! ```text
//! <dir>/manifest       key=value lines, format_version first
//! <dir>/units.bin      length-prefixed unit records, store order
//! <dir>/postings.bin   length-prefixed phrase records, sorted by phrase
//! ```
//!
//! Every record is `u32 LE length` followed by its payload. Strings inside a
//! payload are themselves `u32 LE length` + UTF-8 bytes. Both data files are
//! covered by SHA-256 digests in the manifest.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{corpus_fingerprint, EntityIndex, Posting, TokenTable, VocabMode};
use crate::corpus::SentenceUnit;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

const MANIFEST: &str = "manifest";
const UNITS: &str = "units.bin";
const POSTINGS: &str = "postings.bin";

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }

    fn record(&mut self, payload: Writer) {
        self.u32(payload.0.len() as u32);
        self.0.extend_from_slice(&payload.0);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], what: &'static str) -> Self {
        Self { buf, what }
    }

    fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::IndexIntegrity(format!("{} truncated", self.what)));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn str(&mut self) -> Result<&'a str> {
        let n = self.u32()? as usize;
        std::str::from_utf8(self.take(n)?)
            .map_err(|_| Error::IndexIntegrity(format!("{} holds invalid UTF-8", self.what)))
    }

    fn record(&mut self) -> Result<Reader<'a>> {
        let n = self.u32()? as usize;
        Ok(Reader::new(self.take(n)?, self.what))
    }

    fn finish(&self) -> Result<()> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(Error::IndexIntegrity(format!(
                "{} has trailing bytes",
                self.what
            )))
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Write `index` into directory `dir` (created if missing).
///
/// Output bytes depend only on index contents.
pub fn save_index(index: &EntityIndex, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut units = Writer::default();
    for u in &index.units {
        let mut rec = Writer::default();
        rec.str(&u.doc_id);
        rec.u32(u.para_idx);
        rec.u32(u.sent_idx);
        rec.u64(u.char_span.0 as u64);
        rec.u64(u.char_span.1 as u64);
        rec.str(&u.text);
        rec.u32(u.norm_tokens.len() as u32);
        for t in &u.norm_tokens {
            rec.str(t);
        }
        units.record(rec);
    }

    let mut entries: Vec<(String, &[Posting])> = index
        .buckets
        .values()
        .flatten()
        .map(|e| (index.phrase_string(&e.phrase), e.postings.as_slice()))
        .collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    let mut postings = Writer::default();
    for (phrase, list) in &entries {
        let mut rec = Writer::default();
        rec.str(phrase);
        rec.u32(list.len() as u32);
        for p in *list {
            rec.u32(p.unit);
            rec.u32(p.token_start);
            rec.u32(p.token_len);
        }
        postings.record(rec);
    }

    let m = &index.manifest;
    let (mode, max_ngram) = match m.mode {
        VocabMode::Open { max_ngram } => ("open", max_ngram),
        VocabMode::Closed => ("closed", 0),
    };
    let manifest = format!(
        "format_version={FORMAT_VERSION}\n\
         mode={mode}\n\
         max_ngram={max_ngram}\n\
         corpus_fingerprint={}\n\
         unit_count={}\n\
         phrase_count={}\n\
         posting_count={}\n\
         units_sha256={}\n\
         postings_sha256={}\n",
        m.corpus_fingerprint,
        m.unit_count,
        m.phrase_count,
        m.posting_count,
        sha256_hex(&units.0),
        sha256_hex(&postings.0),
    );

    let write = |name: &str, bytes: &[u8]| {
        let p = dir.join(name);
        fs::write(&p, bytes).map_err(|e| Error::io(p, e))
    };
    write(UNITS, &units.0)?;
    write(POSTINGS, &postings.0)?;
    write(MANIFEST, manifest.as_bytes())
}

fn manifest_field<'a>(fields: &HashMap<&str, &'a str>, key: &str) -> Result<&'a str> {
    fields
        .get(key)
        .copied()
        .ok_or_else(|| Error::IndexIntegrity(format!("manifest lacks `{key}`")))
}

fn manifest_count(fields: &HashMap<&str, &str>, key: &str) -> Result<usize> {
    manifest_field(fields, key)?
        .parse()
        .map_err(|_| Error::IndexIntegrity(format!("manifest `{key}` is not a count")))
}

/// Load an index written by [`save_index`], verifying digests and counts.
pub fn load_index(dir: &Path) -> Result<EntityIndex> {
    let read = |name: &str| {
        let p = dir.join(name);
        fs::read(&p).map_err(|e| Error::io(p, e))
    };
    let manifest_bytes = read(MANIFEST)?;
    let manifest = String::from_utf8(manifest_bytes)
        .map_err(|_| Error::IndexIntegrity("manifest is not UTF-8".into()))?;
    let fields: HashMap<&str, &str> = manifest.lines().filter_map(|l| l.split_once('=')).collect();

    let version = manifest_field(&fields, "format_version")?;
    if version != FORMAT_VERSION.to_string() {
        return Err(Error::IndexVersion {
            found: version.to_owned(),
            expected: FORMAT_VERSION,
        });
    }

    let units_bytes = read(UNITS)?;
    let postings_bytes = read(POSTINGS)?;
    if sha256_hex(&units_bytes) != manifest_field(&fields, "units_sha256")? {
        return Err(Error::IndexIntegrity("units.bin digest mismatch".into()));
    }
    if sha256_hex(&postings_bytes) != manifest_field(&fields, "postings_sha256")? {
        return Err(Error::IndexIntegrity("postings.bin digest mismatch".into()));
    }

    let mode = match manifest_field(&fields, "mode")? {
        "open" => VocabMode::Open {
            max_ngram: manifest_count(&fields, "max_ngram")?,
        },
        "closed" => VocabMode::Closed,
        other => return Err(Error::IndexIntegrity(format!("unknown mode `{other}`"))),
    };

    let mut tokens = TokenTable::default();
    let mut units = Vec::new();
    let mut r = Reader::new(&units_bytes, "units.bin");
    while !r.is_empty() {
        let mut rec = r.record()?;
        let doc_id = rec.str()?.to_owned();
        let para_idx = rec.u32()?;
        let sent_idx = rec.u32()?;
        let start = rec.u64()? as usize;
        let end = rec.u64()? as usize;
        let text = rec.str()?.to_owned();
        let n = rec.u32()? as usize;
        let norm_tokens = (0..n)
            .map(|_| rec.str().map(str::to_owned))
            .collect::<Result<Vec<_>>>()?;
        rec.finish()?;
        for t in &norm_tokens {
            tokens.intern(t);
        }
        units.push(SentenceUnit {
            doc_id,
            para_idx,
            sent_idx,
            text,
            norm_tokens,
            char_span: (start, end),
        });
    }

    let mut table = HashMap::new();
    let mut r = Reader::new(&postings_bytes, "postings.bin");
    while !r.is_empty() {
        let mut rec = r.record()?;
        let phrase = rec.str()?;
        let ids: Box<[u32]> = phrase.split(' ').map(|t| tokens.intern(t)).collect();
        let n = rec.u32()? as usize;
        let mut list = Vec::with_capacity(n);
        for _ in 0..n {
            let p = Posting {
                unit: rec.u32()?,
                token_start: rec.u32()?,
                token_len: rec.u32()?,
            };
            let unit = units.get(p.unit as usize).ok_or_else(|| {
                Error::IndexIntegrity(format!("posting for `{phrase}` names missing unit"))
            })?;
            if p.token_len == 0 || (p.token_start + p.token_len) as usize > unit.norm_tokens.len() {
                return Err(Error::IndexIntegrity(format!(
                    "posting for `{phrase}` exceeds its unit"
                )));
            }
            list.push(p);
        }
        rec.finish()?;
        if table.insert(ids, list).is_some() {
            return Err(Error::IndexIntegrity(format!("phrase `{phrase}` repeated")));
        }
    }

    let index = EntityIndex::assemble(
        units,
        tokens,
        table,
        mode,
        manifest_field(&fields, "corpus_fingerprint")?.to_owned(),
    );
    let m = &index.manifest;
    let checks = [
        ("unit_count", m.unit_count),
        ("phrase_count", m.phrase_count),
        ("posting_count", m.posting_count),
    ];
    for (key, actual) in checks {
        if manifest_count(&fields, key)? != actual {
            return Err(Error::IndexIntegrity(format!(
                "manifest {key} does not match contents ({actual})"
            )));
        }
    }
    if corpus_fingerprint(&index.units) != m.corpus_fingerprint {
        return Err(Error::IndexIntegrity("corpus fingerprint mismatch".into()));
    }
    Ok(index)
}
