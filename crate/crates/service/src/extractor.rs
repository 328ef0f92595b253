//! Adapters to the external extractor, which renders the prompt, runs the
//! model and writes a trace directory.

use std::path::{Path, PathBuf};
use std::process::Command;

use attrib_core::datasets::split_sentences;
use attrib_core::prompt::PromptParts;
use attrib_core::text::split_passages;
use attrib_core::trace::write_trace;
use attrib_core::trace::synthetic::one_hot_prompt_trace;
use serde_json::json;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractRequest {
    pub document: String,
    pub question: String,
    /// `None` asks the extractor to generate the answer.
    pub answer: Option<String>,
    pub template_id: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ExtractorError {
    /// Extractor diagnostics, passed through unchanged.
    #[error("{0}")]
    Failed(String),
    #[error("extractor unreachable: {0}")]
    Unreachable(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub trait Extractor: Send + Sync {
    fn model_name(&self) -> &str;

    /// Writes a trace directory at `out_dir`.
    fn extract(&self, request: &ExtractRequest, out_dir: &Path) -> Result<(), ExtractorError>;
}

/// Runs `<program> <prefix...> extract --model M --doc F --question F
/// [--answer F | --generate] --template T --out DIR`.
#[derive(Debug, Clone)]
pub struct CommandExtractor {
    pub program: PathBuf,
    pub prefix_args: Vec<String>,
    pub model: String,
}

impl CommandExtractor {
    pub fn new(program: impl Into<PathBuf>, model: &str) -> Self {
        Self { program: program.into(), prefix_args: Vec::new(), model: model.to_owned() }
    }

    pub fn command(&self, request: &ExtractRequest, inputs: &Path, out_dir: &Path) -> std::io::Result<Command> {
        let doc = inputs.join("document.txt");
        let question = inputs.join("question.txt");
        std::fs::write(&doc, &request.document)?;
        std::fs::write(&question, &request.question)?;
        let mut cmd = Command::new(&self.program);
        cmd.args(&self.prefix_args)
            .arg("extract")
            .arg("--model")
            .arg(&self.model)
            .arg("--doc")
            .arg(&doc)
            .arg("--question")
            .arg(&question);
        match &request.answer {
            Some(a) => {
                let answer = inputs.join("answer.txt");
                std::fs::write(&answer, a)?;
                cmd.arg("--answer").arg(answer);
            }
            None => {
                cmd.arg("--generate");
            }
        }
        cmd.arg("--template").arg(&request.template_id).arg("--out").arg(out_dir);
        Ok(cmd)
    }
}

impl Extractor for CommandExtractor {
    fn model_name(&self) -> &str {
        &self.model
    }

    fn extract(&self, request: &ExtractRequest, out_dir: &Path) -> Result<(), ExtractorError> {
        let inputs = tempfile::tempdir()?;
        let output = self
            .command(request, inputs.path(), out_dir)?
            .output()
            .map_err(|e| ExtractorError::Unreachable(format!("{}: {e}", self.program.display())))?;
        if output.status.success() {
            Ok(())
        } else {
            let stderr = String::from_utf8_lossy(&output.stderr).trim().to_owned();
            Err(ExtractorError::Failed(if stderr.is_empty() {
                format!("extractor exited with {}", output.status)
            } else {
                stderr
            }))
        }
    }
}

/// Calls the extractor's HTTP mode: `POST <base>/extract` with the command
/// interface fields as JSON. The extractor writes to `out`, which must be a
/// path both processes can reach.
#[derive(Debug, Clone)]
pub struct HttpExtractor {
    pub base_url: String,
    pub model: String,
    pub timeout_secs: u64,
}

impl Extractor for HttpExtractor {
    fn model_name(&self) -> &str {
        &self.model
    }

    fn extract(&self, request: &ExtractRequest, out_dir: &Path) -> Result<(), ExtractorError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(self.timeout_secs))
            .build()
            .map_err(|e| ExtractorError::Unreachable(e.to_string()))?;
        let body = json!({
            "model": self.model,
            "document": request.document,
            "question": request.question,
            "answer": request.answer,
            "generate": request.answer.is_none(),
            "template": request.template_id,
            "out": out_dir,
        });
        let url = format!("{}/extract", self.base_url.trim_end_matches('/'));
        let resp = client
            .post(&url)
            .json(&body)
            .send()
            .map_err(|e| ExtractorError::Unreachable(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().unwrap_or_default();
        if status.is_success() {
            return Ok(());
        }
        let message = serde_json::from_str::<serde_json::Value>(&text)
            .ok()
            .and_then(|v| v.get("error").and_then(|e| e.as_str()).map(str::to_owned))
            .unwrap_or(text);
        Err(ExtractorError::Failed(message))
    }
}

/// In-process stand-in with one-hot token-id states over a whitespace
/// tokenizer. Generation copies the first sentence of the document.
#[derive(Debug, Clone)]
pub struct OneHotExtractor {
    pub layer_count: usize,
}

impl Default for OneHotExtractor {
    fn default() -> Self {
        Self { layer_count: 2 }
    }
}

impl OneHotExtractor {
    pub fn generate(document: &str) -> String {
        split_passages(document)
            .first()
            .and_then(|p| {
                let passage = &document[p.clone()];
                split_sentences(passage).first().map(|s| passage[s.clone()].to_owned())
            })
            .unwrap_or_default()
    }
}

impl Extractor for OneHotExtractor {
    fn model_name(&self) -> &str {
        "one-hot"
    }

    fn extract(&self, request: &ExtractRequest, out_dir: &Path) -> Result<(), ExtractorError> {
        let answer = request.answer.clone().unwrap_or_else(|| Self::generate(&request.document));
        let mut parts = PromptParts::new(&request.document, &request.question, &answer);
        parts.template_id = request.template_id.clone();
        let (trace, _) = one_hot_prompt_trace(&parts, self.layer_count).map_err(|e| ExtractorError::Failed(e.to_string()))?;
        write_trace(&trace, out_dir).map_err(|e| ExtractorError::Failed(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use attrib_core::prompt::INST_V1;
    use attrib_core::trace::read_trace;

    fn req(answer: Option<&str>) -> ExtractRequest {
        ExtractRequest {
            document: "Lincoln Castle was built in 1068. It is old.\n\nSecond passage.".into(),
            question: "When?".into(),
            answer: answer.map(str::to_owned),
            template_id: INST_V1.into(),
        }
    }

    #[test]
    fn one_hot_generates_first_sentence() {
        let dir = tempfile::tempdir().unwrap();
        OneHotExtractor::default().extract(&req(None), &dir.path().join("t")).unwrap();
        let t = read_trace(dir.path().join("t")).unwrap();
        assert!(t.prompt().ends_with("[/INST]\nLincoln Castle was built in 1068."));
    }

    #[test]
    fn command_line_shape() {
        let dir = tempfile::tempdir().unwrap();
        let e = CommandExtractor::new("extractor", "m");
        let cmd = e.command(&req(Some("A.")), dir.path(), Path::new("/out")).unwrap();
        let args: Vec<String> = cmd.get_args().map(|a| a.to_string_lossy().into_owned()).collect();
        assert_eq!(args[0], "extract");
        assert_eq!(&args[1..3], ["--model", "m"]);
        assert!(args.contains(&"--answer".to_owned()));
        assert_eq!(&args[args.len() - 4..], ["--template", "inst-v1", "--out", "/out"]);
        let cmd = e.command(&req(None), dir.path(), Path::new("/out")).unwrap();
        assert!(cmd.get_args().any(|a| a == "--generate"));
        assert_eq!(std::fs::read_to_string(dir.path().join("question.txt")).unwrap(), "When?");
    }

    #[cfg(unix)]
    #[test]
    fn command_failure_is_surfaced_verbatim() {
        let dir = tempfile::tempdir().unwrap();
        let script = dir.path().join("fake.sh");
        std::fs::write(&script, "#!/bin/sh\necho 'prompt has 5000 tokens, context limit is 4096' >&2\nexit 1\n").unwrap();
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(&script, std::fs::Permissions::from_mode(0o755)).unwrap();
        let err = CommandExtractor::new(&script, "m").extract(&req(Some("A.")), &dir.path().join("o")).unwrap_err();
        assert_eq!(err.to_string(), "prompt has 5000 tokens, context limit is 4096");
        let err = CommandExtractor::new(dir.path().join("missing"), "m")
            .extract(&req(Some("A.")), &dir.path().join("o"))
            .unwrap_err();
        assert!(matches!(err, ExtractorError::Unreachable(_)));
    }
}
