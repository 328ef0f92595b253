//! Prompt-based baselines over a chat-completion endpoint.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::BaselineError;
use crate::datasets::chardiff::align_chars;
use crate::datasets::{parse_markup, GoldSpan};
use crate::prompt::INSTRUCTION;

pub const DEFAULT_TOKEN_ENV: &str = "ATTRIB_LLM_TOKEN";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: "user".into(), content: content.into() }
    }
}

pub trait ChatClient: Send + Sync {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, BaselineError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LlmTask {
    Task1,
    Task2,
    Paraphrase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmBaselineConfig {
    pub endpoint: String,
    pub model: String,
    pub task: LlmTask,
    pub timeout_secs: f64,
    pub retries: u32,
    pub max_in_flight: usize,
    /// Name of the environment variable holding the bearer token.
    pub token_env: String,
    /// JSON-lines transcript of every request and response.
    pub transcript: Option<PathBuf>,
}

impl LlmBaselineConfig {
    pub fn new(endpoint: &str, model: &str, task: LlmTask) -> Self {
        Self {
            endpoint: endpoint.to_owned(),
            model: model.to_owned(),
            task,
            timeout_secs: 60.0,
            retries: 3,
            max_in_flight: 4,
            token_env: DEFAULT_TOKEN_ENV.to_owned(),
            transcript: None,
        }
    }

    pub fn validate(&self) -> Result<(), BaselineError> {
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(BaselineError::InvalidParams("timeout must be > 0".into()));
        }
        if self.max_in_flight == 0 {
            return Err(BaselineError::InvalidParams("max_in_flight must be >= 1".into()));
        }
        Ok(())
    }
}

struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Serialize, Deserialize)]
struct TranscriptEntry {
    unix_ms: u128,
    model: String,
    attempt: u32,
    messages: Vec<ChatMessage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    response: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// Blocking HTTP client with retries, an in-flight bound and an optional
/// transcript log. Safe to share across worker threads.
pub struct HttpChatClient {
    config: LlmBaselineConfig,
    http: reqwest::blocking::Client,
    token: Option<String>,
    gate: Gate,
    transcript: Option<Mutex<File>>,
}

impl HttpChatClient {
    pub fn new(config: LlmBaselineConfig) -> Result<Self, BaselineError> {
        config.validate()?;
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| BaselineError::Transport(e.to_string()))?;
        let transcript = match &config.transcript {
            Some(p) => Some(Mutex::new(OpenOptions::new().create(true).append(true).open(p)?)),
            None => None,
        };
        Ok(Self {
            token: std::env::var(&config.token_env).ok().filter(|t| !t.is_empty()),
            gate: Gate { free: Mutex::new(config.max_in_flight), cv: Condvar::new() },
            config,
            http,
            transcript,
        })
    }

    fn log(&self, attempt: u32, messages: &[ChatMessage], result: &Result<String, BaselineError>) {
        let Some(file) = &self.transcript else { return };
        let entry = TranscriptEntry {
            unix_ms: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis()),
            model: self.config.model.clone(),
            attempt,
            messages: messages.to_vec(),
            response: result.as_ref().ok().cloned(),
            error: result.as_ref().err().map(|e| e.to_string()),
        };
        if let Ok(line) = serde_json::to_string(&entry) {
            let mut f = file.lock().unwrap_or_else(|e| e.into_inner());
            let _ = writeln!(f, "{line}");
        }
    }

    fn attempt(&self, messages: &[ChatMessage]) -> Result<String, (bool, BaselineError)> {
        let body = json!({ "model": self.config.model, "messages": messages, "temperature": 0 });
        let mut req = self.http.post(&self.config.endpoint).json(&body);
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        let resp = req.send().map_err(|e| (true, BaselineError::Transport(e.to_string())))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| (true, BaselineError::Transport(e.to_string())))?;
        if !status.is_success() {
            let retry = status.is_server_error() || status.as_u16() == 429;
            return Err((retry, BaselineError::Http { status: status.as_u16(), body: text }));
        }
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| (false, BaselineError::Json(e)))?;
        v.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_owned)
            .ok_or_else(|| (false, BaselineError::Unparseable(format!("no choices[0].message.content in {text}"))))
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, BaselineError> {
        let _permit = self.gate.acquire();
        let mut attempt = 0;
        loop {
            let r = self.attempt(messages);
            let (retry, result) = match r {
                Ok(s) => (false, Ok(s)),
                Err((retry, e)) => (retry, Err(e)),
            };
            self.log(attempt, messages, &result);
            if result.is_ok() || !retry || attempt >= self.config.retries {
                return result;
            }
            std::thread::sleep(Duration::from_millis(200u64 << attempt.min(5)));
            attempt += 1;
        }
    }
}

/// Answers requests from a transcript written by [`HttpChatClient`], keyed
/// by the full message list. Failed entries are ignored.
pub struct ReplayChatClient {
    responses: HashMap<Vec<ChatMessage>, String>,
}

impl ReplayChatClient {
    pub fn from_transcript(path: impl AsRef<Path>) -> Result<Self, BaselineError> {
        let mut responses = HashMap::new();
        for line in BufReader::new(File::open(path)?).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e: TranscriptEntry = serde_json::from_str(&line)?;
            if let Some(r) = e.response {
                responses.insert(e.messages, r);
            }
        }
        Ok(Self { responses })
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Vec<ChatMessage>, String)>) -> Self {
        Self { responses: pairs.into_iter().collect() }
    }
}

impl ChatClient for ReplayChatClient {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, BaselineError> {
        self.responses
            .get(messages)
            .cloned()
            .ok_or_else(|| BaselineError::Transport("request not present in transcript".into()))
    }
}

fn numbered_passages<S: AsRef<str>>(passages: &[S]) -> String {
    passages
        .iter()
        .enumerate()
        .map(|(i, p)| format!("Paragraph {}: {}", i + 1, p.as_ref()))
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub fn task1_prompt<S: AsRef<str>>(passages: &[S], question: &str, answer: &str) -> String {
    format!(
        "Document:\n{}\n\nQuestion: {question}\nAnswer: {answer}\n\n\
         The answer copies some spans verbatim from the numbered paragraphs. \
         Repeat the answer exactly, without changing any character, and wrap every copied span as \
         [N span] where N is the number of the paragraph it was copied from.\nMarked answer:",
        numbered_passages(passages)
    )
}

pub fn task2_prompt<S: AsRef<str>>(passages: &[S], question: &str, marked_answer: &str) -> String {
    format!(
        "Document:\n{}\n\nQuestion: {question}\nAnswer: {marked_answer}\n\n\
         The span inside [] in the answer was copied from one of the numbered paragraphs. \
         Reply with the number of that paragraph only.\nParagraph:",
        numbered_passages(passages)
    )
}

/// Prompt used to produce paraphrased QuoteSum answers.
pub fn paraphrase_prompt(document: &str, question: &str, marked_answer: &str) -> String {
    format!(
        "Document:\n{document}\n{INSTRUCTION}Q: {question} A:\n{marked_answer}\n\
         Given the above source passages, a question and an answer. The answer summarizes the given sources while explicitly copying spans from the sources. Paraphrase the non-entity parts of the answer within [] while keeping entities intact and rewrite in the same format as original answer.\n\
         Paraphrased Answer: "
    )
}

/// Spans recovered from a task-1 completion, in original-answer offsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmSpans {
    pub completion: String,
    pub spans: Vec<GoldSpan>,
}

/// Projects spans marked on `edited` onto `original`. Each span keeps only
/// the original characters its own characters align to; contiguous runs of
/// those become spans, trimmed of whitespace.
pub fn superimpose(edited: &str, spans: &[GoldSpan], original: &str) -> Vec<GoldSpan> {
    let pairs = align_chars(edited, original);
    let mut out = Vec::new();
    for s in spans {
        let lo = pairs.partition_point(|&(e, _)| e < s.answer_char_start);
        let hi = pairs.partition_point(|&(e, _)| e < s.answer_char_end);
        let mut run: Option<Range<usize>> = None;
        let mut flush = |r: Range<usize>| {
            let text = &original[r.clone()];
            let lead = text.len() - text.trim_start().len();
            let trimmed = r.start + lead..r.start + text.trim_end().len();
            if !trimmed.is_empty() {
                out.push(GoldSpan {
                    answer_char_start: trimmed.start,
                    answer_char_end: trimmed.end,
                    passage_index: s.passage_index,
                    source_char_start: None,
                    source_char_end: None,
                });
            }
        };
        for &(_, o) in &pairs[lo..hi] {
            let w = original[o..].chars().next().map_or(1, char::len_utf8);
            run = match run {
                Some(r) if r.end == o => Some(r.start..o + w),
                Some(r) => {
                    flush(r);
                    Some(o..o + w)
                }
                None => Some(o..o + w),
            };
        }
        if let Some(r) = run {
            flush(r);
        }
    }
    out
}

/// Task 1: asks the model to mark copied spans, then superimposes them on
/// the original answer.
pub fn llm_identify_spans<S: AsRef<str>>(
    client: &dyn ChatClient,
    passages: &[S],
    question: &str,
    answer: &str,
) -> Result<LlmSpans, BaselineError> {
    let completion = client.complete(&[ChatMessage::user(task1_prompt(passages, question, answer))])?;
    let (edited, spans) = parse_markup(completion.trim(), passages.len(), 1)
        .map_err(|e| BaselineError::Unparseable(e.to_string()))?;
    Ok(LlmSpans { spans: superimpose(&edited, &spans, answer), completion })
}

/// Last run of ASCII digits in `completion`, rebased from 1 to 0.
pub fn parse_paragraph_number(completion: &str, passages: usize) -> Result<usize, BaselineError> {
    let digits = completion
        .split(|c: char| !c.is_ascii_digit())
        .rfind(|t| !t.is_empty())
        .ok_or_else(|| BaselineError::NoInteger(completion.to_owned()))?;
    let number: usize = digits.parse().map_err(|_| BaselineError::OutOfRange { number: usize::MAX, passages })?;
    if number == 0 || number > passages {
        return Err(BaselineError::OutOfRange { number, passages });
    }
    Ok(number - 1)
}

/// Task 2: marks `span` in the answer with brackets and asks for its source
/// paragraph.
pub fn llm_attribute_span<S: AsRef<str>>(
    client: &dyn ChatClient,
    passages: &[S],
    question: &str,
    answer: &str,
    span: Range<usize>,
) -> Result<usize, BaselineError> {
    if span.start >= span.end || span.end > answer.len() {
        return Err(BaselineError::InvalidParams(format!("span {span:?} outside the answer")));
    }
    let marked = format!("{}[{}]{}", &answer[..span.start], &answer[span.clone()], &answer[span.end..]);
    let completion = client.complete(&[ChatMessage::user(task2_prompt(passages, question, &marked))])?;
    parse_paragraph_number(&completion, passages.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Read;
    use std::net::TcpListener;

    struct Fixed(String);

    impl ChatClient for Fixed {
        fn complete(&self, _: &[ChatMessage]) -> Result<String, BaselineError> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn paragraph_number_rules() {
        assert_eq!(parse_paragraph_number("Paragraph 2", 3).unwrap(), 1);
        assert!(matches!(parse_paragraph_number("7", 3), Err(BaselineError::OutOfRange { number: 7, .. })));
        assert_eq!(parse_paragraph_number("Paragraphs 3 and 2 look close. Answer: 1", 3).unwrap(), 0);
        assert!(matches!(parse_paragraph_number("none", 3), Err(BaselineError::NoInteger(_))));
    }

    #[test]
    fn clean_completion_keeps_offsets() {
        let answer = "It was built in the 11th century by William.";
        let c = Fixed("It was [1 built in the 11th century] by [2 William].".into());
        let r = llm_identify_spans(&c, &["a", "b"], "q", answer).unwrap();
        let texts: Vec<&str> = r.spans.iter().map(|s| &answer[s.answer_char_start..s.answer_char_end]).collect();
        assert_eq!(texts, vec!["built in the 11th century", "William"]);
        assert_eq!(r.spans[1].passage_index, 1);
    }

    #[test]
    fn dropped_word_is_excluded() {
        let answer = "Yes. The castle was built in 1068.";
        let c = Fixed("Yes. [1 castle was built in 1068].".into());
        let r = llm_identify_spans(&c, &["a"], "q", answer).unwrap();
        assert_eq!(r.spans.len(), 1);
        assert_eq!((r.spans[0].answer_char_start, r.spans[0].answer_char_end), (9, 33));
        assert_eq!(&answer[9..33], "castle was built in 1068");
    }

    #[test]
    fn hallucinated_word_splits_span() {
        let answer = "built in 1068 by him";
        let spans = superimpose(
            "built WAY in 1068",
            &[GoldSpan { answer_char_start: 0, answer_char_end: 17, passage_index: 0, source_char_start: None, source_char_end: None }],
            answer,
        );
        for s in &spans {
            assert!(answer[s.answer_char_start..s.answer_char_end].chars().all(|c| answer.contains(c)));
        }
        let texts: Vec<&str> = spans.iter().map(|s| &answer[s.answer_char_start..s.answer_char_end]).collect();
        assert_eq!(texts.concat().replace(' ', ""), "builtin1068");
    }

    #[test]
    fn unbalanced_completion_is_reported() {
        let c = Fixed("It was [1 built".into());
        assert!(matches!(llm_identify_spans(&c, &["a"], "q", "It was built"), Err(BaselineError::Unparseable(_))));
    }

    #[test]
    fn attribute_marks_one_span() {
        struct Echo;
        impl ChatClient for Echo {
            fn complete(&self, m: &[ChatMessage]) -> Result<String, BaselineError> {
                assert!(m[0].content.contains("Answer: It was [built] then."));
                Ok("2".into())
            }
        }
        assert_eq!(llm_attribute_span(&Echo, &["a", "b"], "q", "It was built then.", 7..12).unwrap(), 1);
    }

    #[test]
    fn paraphrase_prompt_layout() {
        let p = paraphrase_prompt("D", "Q?", "[1 x]");
        assert!(p.starts_with("Document:\nD\nBased on the information"));
        assert!(p.contains("answer. \nQ: Q? A:\n[1 x]\nGiven the above"));
        assert!(p.ends_with("original answer.\nParaphrased Answer: "));
    }

    fn serve_once(responses: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let mut bodies = Vec::new();
            for (status, body) in responses {
                let (mut s, _) = listener.accept().unwrap();
                let mut buf = Vec::new();
                let mut chunk = [0u8; 4096];
                loop {
                    let n = s.read(&mut chunk).unwrap();
                    buf.extend_from_slice(&chunk[..n]);
                    let text = String::from_utf8_lossy(&buf).to_string();
                    if let Some(h) = text.find("\r\n\r\n") {
                        let len = text[..h]
                            .lines()
                            .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:").map(|v| v.trim().parse::<usize>().unwrap()))
                            .unwrap_or(0);
                        if buf.len() >= h + 4 + len {
                            bodies.push(text);
                            break;
                        }
                    }
                    if n == 0 {
                        break;
                    }
                }
                let reply = format!(
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                s.write_all(reply.as_bytes()).unwrap();
            }
            bodies
        });
        (url, handle)
    }

    #[test]
    fn http_client_retries_and_logs() {
        let ok = r#"{"choices":[{"message":{"role":"assistant","content":"Paragraph 1"}}]}"#.to_string();
        let (url, handle) = serve_once(vec![(503, "busy".into()), (200, ok)]);
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("t.jsonl");
        let mut cfg = LlmBaselineConfig::new(&url, "m", LlmTask::Task2);
        cfg.retries = 2;
        cfg.token_env = "ATTRIB_TEST_TOKEN_UNSET".into();
        cfg.transcript = Some(log.clone());
        let client = HttpChatClient::new(cfg).unwrap();
        let msgs = vec![ChatMessage::user("hi")];
        assert_eq!(client.complete(&msgs).unwrap(), "Paragraph 1");
        let requests = handle.join().unwrap();
        assert!(requests[1].contains("\"temperature\":0"));
        assert!(requests[1].contains("\"model\":\"m\""));
        let lines = std::fs::read_to_string(&log).unwrap();
        assert_eq!(lines.lines().count(), 2);
        let replay = ReplayChatClient::from_transcript(&log).unwrap();
        assert_eq!(replay.complete(&msgs).unwrap(), "Paragraph 1");
    }

    #[test]
    fn config_validation() {
        let mut c = LlmBaselineConfig::new("http://x", "m", LlmTask::Task1);
        c.timeout_secs = 0.0;
        assert!(HttpChatClient::new(c).is_err());
    }
}
