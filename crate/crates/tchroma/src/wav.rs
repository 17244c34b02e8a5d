//! RIFF/WAVE PCM reading and writing.
//!
//! Reads 8/16/24-bit integer and 32-bit float data, mono or stereo, and
//! averages stereo down to mono. Chunks other than `fmt ` and `data` are
//! skipped.

use std::path::Path;

use tchroma_core::AudioSignal;

use crate::error::{Error, IoContext, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Sample encodings [`write_wav`] can produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Pcm8,
    Pcm16,
    Pcm24,
    Float32,
}

impl SampleFormat {
    fn bits(self) -> u16 {
        match self {
            SampleFormat::Pcm8 => 8,
            SampleFormat::Pcm16 => 16,
            SampleFormat::Pcm24 => 24,
            SampleFormat::Float32 => 32,
        }
    }
}

pub fn load_wav(path: &Path) -> Result<AudioSignal> {
    decode_wav(&std::fs::read(path).at(path)?)
}

fn u16_at(b: &[u8], i: usize) -> u16 {
    u16::from_le_bytes([b[i], b[i + 1]])
}

fn u32_at(b: &[u8], i: usize) -> u32 {
    u32::from_le_bytes([b[i], b[i + 1], b[i + 2], b[i + 3]])
}

struct Fmt {
    format: u16,
    channels: u16,
    rate: u32,
    bits: u16,
}

pub fn decode_wav(bytes: &[u8]) -> Result<AudioSignal> {
    let bad = |s: &str| Error::MalformedHeader(s.to_string());
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(bad("missing RIFF/WAVE signature"));
    }
    let mut fmt: Option<Fmt> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        let end = body.checked_add(size).ok_or_else(|| bad("chunk size overflow"))?;
        if id == b"data" {
            // tolerate a data chunk cut short by a writer that never
            // patched its size
            data = Some(&bytes[body..end.min(bytes.len())]);
        } else if end > bytes.len() {
            return Err(bad("chunk runs past end of file"));
        } else if id == b"fmt " {
            if size < 16 {
                return Err(bad("fmt chunk too short"));
            }
            let c = &bytes[body..end];
            let mut format = u16_at(c, 0);
            if format == FORMAT_EXTENSIBLE {
                if size < 40 {
                    return Err(bad("extensible fmt chunk too short"));
                }
                // first two bytes of the sub-format GUID carry the real tag
                format = u16_at(c, 24);
            }
            fmt = Some(Fmt { format, channels: u16_at(c, 2), rate: u32_at(c, 4), bits: u16_at(c, 14) });
        }
        pos = end + (size & 1);
    }
    let fmt = fmt.ok_or_else(|| bad("no fmt chunk"))?;
    let data = data.ok_or_else(|| bad("no data chunk"))?;
    if fmt.rate == 0 {
        return Err(bad("sample rate is zero"));
    }
    if !(1..=2).contains(&fmt.channels) {
        return Err(Error::UnsupportedEncoding(format!("{} channels", fmt.channels)));
    }
    let decode: fn(&[u8]) -> f64 = match (fmt.format, fmt.bits) {
        (FORMAT_PCM, 8) => |b| (f64::from(b[0]) - 128.0) / 128.0,
        (FORMAT_PCM, 16) => |b| f64::from(i16::from_le_bytes([b[0], b[1]])) / 32768.0,
        (FORMAT_PCM, 24) => |b| f64::from(i32::from_le_bytes([0, b[0], b[1], b[2]]) >> 8) / 8_388_608.0,
        (FORMAT_FLOAT, 32) => |b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])),
        (f, b) => return Err(Error::UnsupportedEncoding(format!("format tag {f}, {b} bits"))),
    };
    let width = usize::from(fmt.bits / 8);
    let frame = width * usize::from(fmt.channels);
    let mut samples = Vec::with_capacity(data.len() / frame);
    for f in data.chunks_exact(frame) {
        let sum: f64 = f.chunks_exact(width).map(decode).sum();
        let x = sum / f64::from(fmt.channels);
        if !x.is_finite() {
            return Err(Error::Data("non-finite sample in WAV data".into()));
        }
        samples.push(x);
    }
    Ok(AudioSignal::new(samples, fmt.rate)?)
}

/// Mono WAV bytes; samples are clipped to `[-1, 1]` for integer formats.
pub fn encode_wav(sig: &AudioSignal, format: SampleFormat) -> Vec<u8> {
    let bits = format.bits();
    let width = usize::from(bits / 8);
    let data_len = sig.len() * width;
    let tag = if format == SampleFormat::Float32 { FORMAT_FLOAT } else { FORMAT_PCM };
    let rate = sig.sample_rate();
    let mut out = Vec::with_capacity(44 + data_len + 1);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len + (data_len & 1)) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * width as u32).to_le_bytes());
    out.extend_from_slice(&(width as u16).to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &x in sig.samples() {
        let c = x.clamp(-1.0, 1.0);
        match format {
            SampleFormat::Pcm8 => out.push(((c * 128.0).round().clamp(-128.0, 127.0) + 128.0) as u8),
            SampleFormat::Pcm16 => {
                out.extend_from_slice(&((c * 32768.0).round().clamp(-32768.0, 32767.0) as i16).to_le_bytes())
            }
            SampleFormat::Pcm24 => {
                let v = (c * 8_388_608.0).round().clamp(-8_388_608.0, 8_388_607.0) as i32;
                out.extend_from_slice(&v.to_le_bytes()[..3]);
            }
            SampleFormat::Float32 => out.extend_from_slice(&(x as f32).to_le_bytes()),
        }
    }
    if data_len & 1 == 1 {
        out.push(0);
    }
    out
}

pub fn write_wav(path: &Path, sig: &AudioSignal, format: SampleFormat) -> Result<()> {
    crate::write_atomic(path, &encode_wav(sig, format))
}
