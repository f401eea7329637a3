//! RIFF/WAVE reading and writing.
//!
//! Reads 16-bit PCM, 24-bit PCM and 32-bit IEEE float, mono or stereo
//! (including the WAVE_FORMAT_EXTENSIBLE wrapper). Writes 16-bit PCM or
//! 32-bit float.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

impl std::str::FromStr for WavEncoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pcm16" => Ok(WavEncoding::Pcm16),
            "float32" => Ok(WavEncoding::Float32),
            other => Err(Error::Parse(format!("unknown WAV encoding '{other}'"))),
        }
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes)
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

struct Format {
    tag: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

pub fn decode_wav(bytes: &[u8]) -> Result<AudioBuffer> {
    if bytes.len() < 12 {
        return Err(if bytes.starts_with(b"RIFF") {
            Error::Truncated("header")
        } else {
            Error::NotWave
        });
    }
    if &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::NotWave);
    }

    let mut pos = 12;
    let mut format: Option<Format> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        match id {
            b"fmt " => {
                if size < 16 || body + 16 > bytes.len() {
                    return Err(Error::Truncated("fmt chunk"));
                }
                let mut tag = u16_at(bytes, body);
                let bits = u16_at(bytes, body + 14);
                if tag == FORMAT_EXTENSIBLE {
                    if size < 40 || body + 26 > bytes.len() {
                        return Err(Error::Truncated("extensible fmt chunk"));
                    }
                    tag = u16_at(bytes, body + 24);
                }
                format = Some(Format {
                    tag,
                    channels: u16_at(bytes, body + 2),
                    sample_rate: u32_at(bytes, body + 4),
                    bits,
                });
            }
            b"data" => {
                let fmt = format.ok_or(Error::Parse("data chunk before fmt chunk".into()))?;
                if body + size > bytes.len() {
                    return Err(Error::Truncated("data chunk"));
                }
                return decode_samples(&fmt, &bytes[body..body + size]);
            }
            _ => {}
        }
        pos = body + size + (size & 1);
    }
    Err(Error::Truncated("no data chunk"))
}

fn decode_samples(fmt: &Format, data: &[u8]) -> Result<AudioBuffer> {
    let unsupported = Error::UnsupportedEncoding {
        format_tag: fmt.tag,
        bits: fmt.bits,
    };
    let width = match (fmt.tag, fmt.bits) {
        (FORMAT_PCM, 16) => 2,
        (FORMAT_PCM, 24) => 3,
        (FORMAT_FLOAT, 32) => 4,
        _ => return Err(unsupported),
    };
    if fmt.channels == 0 || fmt.channels > 2 {
        return Err(Error::UnsupportedChannelCount(fmt.channels));
    }
    if fmt.sample_rate == 0 {
        return Err(Error::InvalidBuffer("sample rate 0".into()));
    }
    let nch = fmt.channels as usize;
    let frame = width * nch;
    if !data.len().is_multiple_of(frame) {
        return Err(Error::Truncated("partial sample frame"));
    }
    let frames = data.len() / frame;
    let mut channels = vec![Vec::with_capacity(frames); nch];
    for (i, chunk) in data.chunks_exact(width).enumerate() {
        let value = match width {
            2 => i16::from_le_bytes([chunk[0], chunk[1]]) as f64 / 32768.0,
            3 => {
                let v = i32::from_le_bytes([0, chunk[0], chunk[1], chunk[2]]) >> 8;
                v as f64 / 8_388_608.0
            }
            _ => f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as f64,
        };
        channels[i % nch].push(value);
    }
    AudioBuffer::new(fmt.sample_rate, channels)
}

pub fn encode_wav(buffer: &AudioBuffer, encoding: WavEncoding) -> Vec<u8> {
    let nch = buffer.num_channels();
    let (tag, bits) = match encoding {
        WavEncoding::Pcm16 => (FORMAT_PCM, 16u16),
        WavEncoding::Float32 => (FORMAT_FLOAT, 32u16),
    };
    let block_align = nch as u16 * bits / 8;
    let data_len = buffer.len() * block_align as usize;

    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&(nch as u16).to_le_bytes());
    out.extend_from_slice(&buffer.sample_rate().to_le_bytes());
    out.extend_from_slice(&(buffer.sample_rate() * block_align as u32).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());

    for i in 0..buffer.len() {
        for ch in buffer.channels() {
            let x = ch[i];
            match encoding {
                WavEncoding::Pcm16 => {
                    let q = (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                    out.extend_from_slice(&q.to_le_bytes());
                }
                WavEncoding::Float32 => out.extend_from_slice(&(x as f32).to_le_bytes()),
            }
        }
    }
    out
}

/// Write `buffer` to `path`. The file is written to a sibling temporary and
/// renamed into place so readers never see a partial file.
pub fn write_wav(buffer: &AudioBuffer, path: impl AsRef<Path>, encoding: WavEncoding) -> Result<()> {
    write_atomic(path.as_ref(), &encode_wav(buffer, encoding))
}

/// Write bytes via temp file + rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}
