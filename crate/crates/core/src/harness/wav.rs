//! WAV input and output. Only mono 16-bit integer PCM at 8 or 16 kHz is accepted.

use std::io::{Cursor, Read};
use std::path::Path;

use crate::error::{Error, Result};
use crate::frontend::{PcmClip, SUPPORTED_RATES};

pub fn load_wav(path: &Path) -> Result<PcmClip> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(Cursor::new(bytes), path)
}

/// Decodes an in-memory WAV file.
pub fn parse_wav(bytes: &[u8]) -> Result<PcmClip> {
    decode(Cursor::new(bytes), Path::new("<memory>"))
}

fn decode<R: Read>(reader: R, path: &Path) -> Result<PcmClip> {
    let unsupported = |detail: String| Error::UnsupportedFormat {
        path: path.to_path_buf(),
        detail,
    };
    let reader = hound::WavReader::new(reader).map_err(|e| unsupported(e.to_string()))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(unsupported(format!("expected mono, got {} channels", spec.channels)));
    }
    if spec.sample_format != hound::SampleFormat::Int {
        return Err(unsupported("expected integer PCM, got floating point".into()));
    }
    if spec.bits_per_sample != 16 {
        return Err(unsupported(format!("expected 16-bit samples, got {}-bit", spec.bits_per_sample)));
    }
    if !SUPPORTED_RATES.contains(&spec.sample_rate) {
        return Err(unsupported(format!("sample rate {} Hz not supported (8000 or 16000)", spec.sample_rate)));
    }
    let samples = reader
        .into_samples::<i16>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| unsupported(e.to_string()))?;
    if samples.is_empty() {
        return Err(unsupported("no samples".into()));
    }
    PcmClip::new(samples, spec.sample_rate)
}

pub fn wav_bytes(clip: &PcmClip) -> Vec<u8> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut cursor = Cursor::new(Vec::new());
    {
        let mut w = hound::WavWriter::new(&mut cursor, spec).expect("in-memory writer");
        for &s in clip.samples() {
            w.write_sample(s).expect("in-memory write");
        }
        w.finalize().expect("in-memory finalize");
    }
    cursor.into_inner()
}

pub fn save_wav(path: &Path, clip: &PcmClip) -> Result<()> {
    std::fs::write(path, wav_bytes(clip)).map_err(|e| Error::io(path, e))
}
