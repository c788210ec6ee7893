//! Binary model file.
//!
//! Layout (all integers little-endian):
//!
//! | field            | encoding                                               |
//! |------------------|--------------------------------------------------------|
//! | magic            | `KWS1`                                                 |
//! | version          | u16                                                    |
//! | config           | u32 length + UTF-8 TOML                                |
//! | codebook         | u16 K, u16 dim, K*dim i16 (Q7.8)                        |
//! | distance table   | u16 K, K*K u16 (UQ8.8)                                 |
//! | templates        | u16 count, then per template: u16 name length, name, u16 T, T u16 |
//! | frontend tables  | i16 alpha; u16 n + window; u16 n + twiddle pairs; u16 filters + (u16 start, u16 len, weights); u16 n + log2; u16 rows, u16 cols + dct |

use std::path::Path;

use crate::error::{Error, Result};
use crate::frontend::{Frontend, FrontendCounts, FrontendTables, MelFilter, MelFilterbank, PcmClip};
use crate::harness::config::Config;
use crate::matcher::{classify_counted, MatchMode, MatchResult, Template};
use crate::ops::OpCounts;
use crate::vq::{encode_utterance_counted, Codebook, DistanceTable};

pub const MAGIC: [u8; 4] = *b"KWS1";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: Config,
    pub codebook: Codebook,
    pub table: DistanceTable,
    pub templates: Vec<Template>,
    pub tables: FrontendTables,
}

/// Byte length of each section as written.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct SectionSizes {
    pub header: usize,
    pub config: usize,
    pub codebook: usize,
    pub distance_table: usize,
    pub templates: usize,
    pub frontend_tables: usize,
}

impl SectionSizes {
    pub fn total(&self) -> usize {
        self.header + self.config + self.codebook + self.distance_table + self.templates + self.frontend_tables
    }
}

impl Model {
    /// Checks cross-section consistency.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.table.size() != self.codebook.size() {
            return Err(Error::config(format!(
                "distance table is {}x{} but the codebook has {} codewords",
                self.table.size(),
                self.table.size(),
                self.codebook.size()
            )));
        }
        if self.codebook.dim() != self.config.frontend.n_mfcc {
            return Err(Error::config(format!(
                "codebook dimension {} does not match n_mfcc {}",
                self.codebook.dim(),
                self.config.frontend.n_mfcc
            )));
        }
        if self.templates.is_empty() {
            return Err(Error::config("model has no templates"));
        }
        for t in &self.templates {
            if t.indices().len() != self.config.matcher.template_len {
                return Err(Error::config(format!("template `{}` has the wrong length", t.keyword)));
            }
            if t.indices().iter().any(|&i| i as usize >= self.codebook.size()) {
                return Err(Error::config(format!("template `{}` indexes past the codebook", t.keyword)));
            }
        }
        self.tables.check_shapes(&self.config.frontend)
    }

    pub fn keywords(&self) -> Vec<&str> {
        self.templates.iter().map(|t| t.keyword.as_str()).collect()
    }

    pub fn frontend(&self) -> Result<Frontend> {
        Frontend::from_parts(self.config.frontend.clone(), self.tables.clone())
    }

    /// Extracts, encodes and classifies one clip, accumulating the matcher's counts.
    pub fn classify_clip(
        &self,
        frontend: &Frontend,
        clip: &PcmClip,
        mode: MatchMode,
        matcher_counts: &mut OpCounts,
    ) -> Result<MatchResult> {
        let mfccs = frontend.extract_mfcc_counted(clip, &mut FrontendCounts::default())?;
        if mfccs.is_empty() {
            return Err(Error::usage("clip is shorter than one frame"));
        }
        let encoded = encode_utterance_counted(&mfccs, &self.codebook, &mut OpCounts::default())?;
        let cfg = crate::matcher::MatcherConfig {
            mode,
            ..self.config.matcher.clone()
        };
        classify_counted(&encoded, &self.templates, &cfg, &self.table, matcher_counts)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.encode().0
    }

    pub fn section_sizes(&self) -> SectionSizes {
        self.encode().1
    }

    fn encode(&self) -> (Vec<u8>, SectionSizes) {
        let mut w = Writer::default();
        w.bytes(&MAGIC);
        w.u16(VERSION);
        let header = w.mark();

        let config = self.config.to_toml();
        w.u32(config.len() as u32);
        w.bytes(config.as_bytes());
        let config_len = w.mark();

        w.u16(self.codebook.size() as u16);
        w.u16(self.codebook.dim() as u16);
        for cw in self.codebook.codewords() {
            cw.iter().for_each(|&v| w.i16(v));
        }
        let codebook = w.mark();

        w.u16(self.table.size() as u16);
        self.table.entries().iter().for_each(|&v| w.u16(v));
        let distance_table = w.mark();

        w.u16(self.templates.len() as u16);
        for t in &self.templates {
            w.u16(t.keyword.len() as u16);
            w.bytes(t.keyword.as_bytes());
            w.u16(t.indices().len() as u16);
            t.indices().iter().for_each(|&v| w.u16(v));
        }
        let templates = w.mark();

        let tb = &self.tables;
        w.i16(tb.pre_emphasis_alpha);
        w.u16(tb.window.len() as u16);
        tb.window.iter().for_each(|&v| w.i16(v));
        w.u16(tb.twiddles.len() as u16);
        for &(re, im) in &tb.twiddles {
            w.i16(re);
            w.i16(im);
        }
        w.u16(tb.mel.len() as u16);
        for f in tb.mel.filters() {
            w.u16(f.start_bin as u16);
            w.u16(f.weights.len() as u16);
            f.weights.iter().for_each(|&v| w.i16(v));
        }
        w.u16(tb.log2.len() as u16);
        tb.log2.iter().for_each(|&v| w.i16(v));
        w.u16(tb.dct.len() as u16);
        w.u16(tb.dct.first().map_or(0, Vec::len) as u16);
        tb.dct.iter().flatten().for_each(|&v| w.i16(v));
        let frontend_tables = w.mark();

        let sizes = SectionSizes {
            header,
            config: config_len,
            codebook,
            distance_table,
            templates,
            frontend_tables,
        };
        (w.buf, sizes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Parse {
                offset: 0,
                detail: "bad magic (expected KWS1)".into(),
            });
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(Error::Version {
                found: version,
                expected: VERSION,
            });
        }

        let at = r.pos;
        let n = r.u32()? as usize;
        let text = std::str::from_utf8(r.take(n)?).map_err(|_| r.error_at(at, "config is not UTF-8"))?;
        let config = Config::from_toml(text).map_err(|e| r.error_at(at, &e.to_string()))?;

        let at = r.pos;
        let (k, dim) = (r.u16()? as usize, r.u16()? as usize);
        let mut codewords = Vec::with_capacity(k.min(r.remaining() / 2 + 1));
        for _ in 0..k {
            codewords.push(r.i16s(dim)?);
        }
        let codebook = Codebook::new(codewords).map_err(|e| r.error_at(at, &e.to_string()))?;

        let at = r.pos;
        let size = r.u16()? as usize;
        let entries = r.u16s(size * size)?;
        let table = DistanceTable::from_raw(size, entries).map_err(|e| r.error_at(at, &e.to_string()))?;

        let at = r.pos;
        let count = r.u16()? as usize;
        let mut templates = Vec::new();
        for _ in 0..count {
            let n = r.u16()? as usize;
            let name_at = r.pos;
            let name = std::str::from_utf8(r.take(n)?)
                .map_err(|_| r.error_at(name_at, "template name is not UTF-8"))?
                .to_string();
            let len = r.u16()? as usize;
            let indices = r.u16s(len)?;
            templates.push(Template::new(name, indices, len, size).map_err(|e| r.error_at(at, &e.to_string()))?);
        }

        let at = r.pos;
        let pre_emphasis_alpha = r.i16()?;
        let n = r.u16()? as usize;
        let window = r.i16s(n)?;
        let n = r.u16()? as usize;
        let mut twiddles = Vec::new();
        for _ in 0..n {
            twiddles.push((r.i16()?, r.i16()?));
        }
        let n = r.u16()? as usize;
        let mut filters = Vec::new();
        for _ in 0..n {
            let start_bin = r.u16()? as usize;
            let len = r.u16()? as usize;
            filters.push(MelFilter {
                start_bin,
                weights: r.i16s(len)?,
            });
        }
        let mel = MelFilterbank::from_filters(filters).map_err(|e| r.error_at(at, &e.to_string()))?;
        let n = r.u16()? as usize;
        let log2 = r.i16s(n)?;
        let (rows, cols) = (r.u16()? as usize, r.u16()? as usize);
        let mut dct = Vec::new();
        for _ in 0..rows {
            dct.push(r.i16s(cols)?);
        }
        if r.remaining() != 0 {
            return Err(r.error_at(r.pos, &format!("{} trailing bytes", r.remaining())));
        }

        let model = Model {
            config,
            codebook,
            table,
            templates,
            tables: FrontendTables {
                pre_emphasis_alpha,
                window,
                twiddles,
                mel,
                log2,
                dct,
            },
        };
        model.validate().map_err(|e| r.error_at(at, &e.to_string()))?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Model::from_bytes(&bytes)
    }
}

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
    last: usize,
}

impl Writer {
    fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }
    fn u16(&mut self, v: u16) {
        self.bytes(&v.to_le_bytes());
    }
    fn i16(&mut self, v: i16) {
        self.bytes(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }
    /// Length written since the previous mark.
    fn mark(&mut self) -> usize {
        let n = self.buf.len() - self.last;
        self.last = self.buf.len();
        n
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn error_at(&self, offset: usize, detail: &str) -> Error {
        Error::Parse {
            offset,
            detail: detail.to_string(),
        }
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(self.error_at(
                self.pos,
                &format!("truncated: need {n} bytes, {} left", self.remaining()),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn i16(&mut self) -> Result<i16> {
        Ok(i16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u16s(&mut self, n: usize) -> Result<Vec<u16>> {
        let raw = self.take(n.saturating_mul(2))?;
        Ok(raw.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect())
    }
    fn i16s(&mut self, n: usize) -> Result<Vec<i16>> {
        let raw = self.take(n.saturating_mul(2))?;
        Ok(raw.chunks_exact(2).map(|c| i16::from_le_bytes([c[0], c[1]])).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vq::build_distance_table;

    /// Small but complete model with default frontend tables.
    pub(crate) fn sample_model() -> Model {
        let config = Config::default();
        let codewords: Vec<Vec<i16>> = (0..64)
            .map(|i| (0..12).map(|j| ((i * 31 + j * 7) % 200 - 100) as i16 * 8).collect())
            .collect();
        let codebook = Codebook::new(codewords).unwrap();
        let table = build_distance_table(&codebook);
        let templates = ["go", "stop", "left", "right", "up"]
            .iter()
            .enumerate()
            .map(|(k, name)| Template::new(*name, (0..64).map(|t| ((t + k * 9) % 64) as u16).collect(), 64, 64).unwrap())
            .collect();
        let tables = FrontendTables::build(&config.frontend).unwrap();
        Model {
            config,
            codebook,
            table,
            templates,
            tables,
        }
    }

    #[test]
    fn round_trip_is_identical() {
        let m = sample_model();
        let bytes = m.to_bytes();
        let back = Model::from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn section_sizes_follow_format_arithmetic() {
        let m = sample_model();
        let s = m.section_sizes();
        assert_eq!(s.header, 6);
        assert_eq!(s.codebook, 4 + 64 * 12 * 2);
        assert_eq!(s.distance_table, 2 + 64 * 64 * 2);
        assert_eq!(s.templates, 2 + 5 * (2 + 2 + 64 * 2) + "gostopleftrightup".len());
        assert_eq!(s.total(), m.to_bytes().len());
        assert!(s.total() <= 131072);
    }

    #[test]
    fn flipped_magic_is_offset_zero() {
        let mut bytes = sample_model().to_bytes();
        bytes[0] ^= 0xff;
        assert!(matches!(Model::from_bytes(&bytes), Err(Error::Parse { offset: 0, .. })));
    }

    #[test]
    fn bumped_version() {
        let mut bytes = sample_model().to_bytes();
        bytes[4] = 2;
        assert!(matches!(
            Model::from_bytes(&bytes),
            Err(Error::Version { found: 2, expected: 1 })
        ));
    }

    #[test]
    fn every_truncation_is_a_parse_error() {
        let bytes = sample_model().to_bytes();
        for n in (0..bytes.len()).step_by(7) {
            match Model::from_bytes(&bytes[..n]) {
                Err(Error::Parse { offset, .. }) => assert!(offset <= n),
                other => panic!("truncated at {n}: {other:?}"),
            }
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(Model::from_bytes(&extra), Err(Error::Parse { .. })));
    }

    #[test]
    fn inconsistent_sections_rejected() {
        let mut m = sample_model();
        m.config.frontend.n_mfcc = 10;
        m.tables = FrontendTables::build(&m.config.frontend).unwrap();
        assert!(matches!(Model::from_bytes(&m.to_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.kws");
        let m = sample_model();
        m.save(&p).unwrap();
        assert_eq!(Model::load(&p).unwrap(), m);
    }
}
