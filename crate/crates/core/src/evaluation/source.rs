use std::collections::HashMap;
use std::path::PathBuf;

use super::EvalError;
use crate::simcore::MatrixView;
use crate::trace::{layer_view, Trace, TraceManifest, TraceReader};

/// Where evaluation finds the trace of a sample.
pub trait TraceSource: Sync {
    fn open(&self, sample_id: &str) -> Result<SampleTrace<'_>, EvalError>;
}

/// A trace held in memory or read one layer at a time from disk.
pub enum SampleTrace<'a> {
    Borrowed(&'a Trace),
    Streamed(TraceReader),
}

impl SampleTrace<'_> {
    pub fn manifest(&self) -> &TraceManifest {
        match self {
            SampleTrace::Borrowed(t) => &t.manifest,
            SampleTrace::Streamed(r) => r.manifest(),
        }
    }

    pub fn with_layer<R>(&self, layer: usize, f: impl FnOnce(MatrixView<'_, f32>) -> R) -> Result<R, EvalError> {
        match self {
            SampleTrace::Borrowed(t) => Ok(f(layer_view(t, layer)?)),
            SampleTrace::Streamed(r) => {
                let data = r.read_layer(layer)?;
                let m = r.manifest();
                let view = MatrixView::new(m.token_count, m.hidden_dim, &data)
                    .map_err(|e| EvalError::Alignment(e.to_string()))?;
                Ok(f(view))
            }
        }
    }
}

#[derive(Debug, Default)]
pub struct InMemoryTraces(pub HashMap<String, Trace>);

impl TraceSource for InMemoryTraces {
    fn open(&self, sample_id: &str) -> Result<SampleTrace<'_>, EvalError> {
        self.0
            .get(sample_id)
            .map(SampleTrace::Borrowed)
            .ok_or_else(|| EvalError::MissingTrace(sample_id.to_owned()))
    }
}

/// Traces stored as `<root>/<sample_id>/`.
#[derive(Debug, Clone)]
pub struct TraceDirectory {
    pub root: PathBuf,
}

impl TraceDirectory {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
}

impl TraceSource for TraceDirectory {
    fn open(&self, sample_id: &str) -> Result<SampleTrace<'_>, EvalError> {
        let dir = self.root.join(sample_id);
        if !dir.is_dir() {
            return Err(EvalError::MissingTrace(sample_id.to_owned()));
        }
        Ok(SampleTrace::Streamed(TraceReader::open(dir)?))
    }
}
