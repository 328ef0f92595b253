use std::fs::{self, File};
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use super::{
    validate_trace, HiddenStates, Trace, TraceError, TraceManifest, FORMAT_VERSION, MANIFEST_FILE,
    STATES_FILE,
};

/// Writes `manifest.json` and `states.f32` into `destination`, creating it if needed.
pub fn write_trace(trace: &Trace, destination: impl AsRef<Path>) -> Result<(), TraceError> {
    let violations = validate_trace(trace);
    if !violations.is_empty() {
        return Err(TraceError::Invalid(violations));
    }
    let dir = destination.as_ref();
    fs::create_dir_all(dir)?;

    let mut manifest = serde_json::to_vec_pretty(&trace.manifest)?;
    manifest.push(b'\n');
    fs::write(dir.join(MANIFEST_FILE), manifest)?;

    let mut w = BufWriter::new(File::create(dir.join(STATES_FILE))?);
    for x in trace.states.as_slice() {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads and fully validates a trace directory.
pub fn read_trace(source: impl AsRef<Path>) -> Result<Trace, TraceError> {
    let reader = TraceReader::open(source)?;
    let mut bytes = Vec::with_capacity(reader.states_len as usize);
    File::open(&reader.states_path)?.read_to_end(&mut bytes)?;
    if bytes.len() as u64 != reader.states_len {
        return Err(TraceError::SizeMismatch {
            expected: reader.states_len,
            actual: bytes.len() as u64,
        });
    }
    let data = decode_f32(&bytes);
    let m = &reader.manifest;
    let states = HiddenStates::new(m.layer_count, m.token_count, m.hidden_dim, data)?;
    let trace = Trace {
        manifest: reader.manifest,
        states,
    };
    let violations = validate_trace(&trace);
    if !violations.is_empty() {
        return Err(TraceError::Invalid(violations));
    }
    Ok(trace)
}

fn decode_f32(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

fn read_manifest(path: &Path) -> Result<TraceManifest, TraceError> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => TraceError::MissingFile(path.to_path_buf()),
        _ => TraceError::Io(e),
    })?;
    let text = String::from_utf8(bytes).map_err(|_| TraceError::NonUtf8Manifest(path.to_path_buf()))?;
    let version: serde_json::Value = serde_json::from_str(&text)?;
    if let Some(v) = version.get("format_version").and_then(|v| v.as_u64()) {
        if v != u64::from(FORMAT_VERSION) {
            return Err(TraceError::UnsupportedVersion { found: v as u32 });
        }
    }
    Ok(serde_json::from_value(version)?)
}

/// Opens a trace directory without loading the states, for layer-at-a-time access.
///
/// The manifest is parsed and the states file size is checked on open.
#[derive(Debug)]
pub struct TraceReader {
    manifest: TraceManifest,
    states_path: PathBuf,
    states_len: u64,
}

impl TraceReader {
    pub fn open(source: impl AsRef<Path>) -> Result<Self, TraceError> {
        let dir = source.as_ref();
        let manifest_path = dir.join(MANIFEST_FILE);
        let states_path = dir.join(STATES_FILE);
        if !manifest_path.is_file() {
            return Err(TraceError::MissingFile(manifest_path));
        }
        if !states_path.is_file() {
            return Err(TraceError::MissingFile(states_path));
        }
        let manifest = read_manifest(&manifest_path)?;
        let expected = manifest.states_byte_len().ok_or(TraceError::ShapeOverflow)?;
        let actual = fs::metadata(&states_path)?.len();
        if expected != actual {
            return Err(TraceError::SizeMismatch { expected, actual });
        }
        Ok(Self {
            manifest,
            states_path,
            states_len: expected,
        })
    }

    pub fn manifest(&self) -> &TraceManifest {
        &self.manifest
    }

    /// Loads one layer slab (`token_count * hidden_dim` values).
    pub fn read_layer(&self, layer: usize) -> Result<Vec<f32>, TraceError> {
        let m = &self.manifest;
        if layer >= m.layer_count {
            return Err(TraceError::LayerOutOfRange {
                layer,
                layer_count: m.layer_count,
            });
        }
        let slab = (m.token_count * m.hidden_dim * 4) as u64;
        let mut f = File::open(&self.states_path)?;
        f.seek(SeekFrom::Start(slab * layer as u64))?;
        let mut buf = vec![0u8; slab as usize];
        f.read_exact(&mut buf)?;
        let data = decode_f32(&buf);
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(TraceError::Invalid(vec![super::Violation {
                invariant: "finite",
                detail: format!("non-finite value at ({layer},{},·)", pos / m.hidden_dim.max(1)),
            }]));
        }
        Ok(data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::synthetic::TraceBuilder;
    use crate::trace::Segment;

    fn toy() -> Trace {
        TraceBuilder::new("toy")
            .token(Segment::Document, "A", 0)
            .token(Segment::Document, " b", 1)
            .token(Segment::Answer, " b", 1)
            .build_with(2, 4, |l, i, _, row| {
                for (j, x) in row.iter_mut().enumerate() {
                    *x = (l * 100 + i * 10 + j) as f32 * 0.5;
                }
            })
            .unwrap()
    }

    #[test]
    fn states_file_obeys_size_law() {
        let dir = tempfile::tempdir().unwrap();
        write_trace(&toy(), dir.path()).unwrap();
        assert_eq!(fs::metadata(dir.path().join(STATES_FILE)).unwrap().len(), 96);
    }

    #[test]
    fn truncated_states_report_both_counts() {
        let dir = tempfile::tempdir().unwrap();
        write_trace(&toy(), dir.path()).unwrap();
        let p = dir.path().join(STATES_FILE);
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 4]).unwrap();
        let err = read_trace(dir.path()).unwrap_err();
        assert!(matches!(err, TraceError::SizeMismatch { expected: 96, actual: 92 }));
        let msg = err.to_string();
        assert!(msg.contains("96") && msg.contains("92"), "{msg}");
    }

    #[test]
    fn missing_files_are_named() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(read_trace(dir.path()), Err(TraceError::MissingFile(p)) if p.ends_with(MANIFEST_FILE)));
        write_trace(&toy(), dir.path()).unwrap();
        fs::remove_file(dir.path().join(STATES_FILE)).unwrap();
        assert!(matches!(read_trace(dir.path()), Err(TraceError::MissingFile(p)) if p.ends_with(STATES_FILE)));
    }

    #[test]
    fn future_version_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_trace(&toy(), dir.path()).unwrap();
        let p = dir.path().join(MANIFEST_FILE);
        let text = fs::read_to_string(&p).unwrap().replace("\"format_version\": 1", "\"format_version\": 2");
        fs::write(&p, text).unwrap();
        assert!(matches!(read_trace(dir.path()), Err(TraceError::UnsupportedVersion { found: 2 })));
    }

    #[test]
    fn non_utf8_manifest_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_trace(&toy(), dir.path()).unwrap();
        fs::write(dir.path().join(MANIFEST_FILE), [0xffu8, 0xfe, b'{']).unwrap();
        assert!(matches!(read_trace(dir.path()), Err(TraceError::NonUtf8Manifest(_))));
    }

    #[test]
    fn zero_token_manifest_fails_validation() {
        let dir = tempfile::tempdir().unwrap();
        write_trace(&toy(), dir.path()).unwrap();
        let p = dir.path().join(MANIFEST_FILE);
        let mut m: TraceManifest = serde_json::from_slice(&fs::read(&p).unwrap()).unwrap();
        m.token_count = 0;
        m.tokens.clear();
        fs::write(&p, serde_json::to_vec(&m).unwrap()).unwrap();
        fs::write(dir.path().join(STATES_FILE), []).unwrap();
        assert!(matches!(read_trace(dir.path()), Err(TraceError::Invalid(_))));
    }

    #[test]
    fn invalid_trace_is_not_written() {
        let mut t = toy();
        t.states.as_mut_slice()[0] = f32::INFINITY;
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(write_trace(&t, dir.path()), Err(TraceError::Invalid(_))));
    }

    #[test]
    fn reader_streams_single_layers() {
        let t = toy();
        let dir = tempfile::tempdir().unwrap();
        write_trace(&t, dir.path()).unwrap();
        let r = TraceReader::open(dir.path()).unwrap();
        assert_eq!(r.read_layer(1).unwrap(), t.states.layer_slab(1).unwrap());
        assert!(r.read_layer(2).is_err());
    }
}
