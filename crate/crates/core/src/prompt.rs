//! Prompt templates for (document, question, answer) traces.
//!
//! Rendering is a single pass over literal pieces and slots, so slot values
//! are copied verbatim and never re-scanned for placeholders.

use std::ops::Range;

use serde::{Deserialize, Serialize};

pub const INST_V1: &str = "inst-v1";
pub const PLAIN_V1: &str = "plain-v1";

pub(crate) const INSTRUCTION: &str = "Based on the information contained in the document, answer the question with details to the best of your abilities. Think step by step and explain your answer if that will help better understand the answer. \n";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Piece {
    Lit(&'static str),
    Document,
    Question,
    Answer,
}

const INST_V1_PIECES: &[Piece] = &[
    Piece::Lit("[INST]\nDocument:\n"),
    Piece::Document,
    Piece::Lit("\n"),
    Piece::Lit(INSTRUCTION),
    Piece::Lit("Q: "),
    Piece::Question,
    Piece::Lit(" A:\n[/INST]\n"),
    Piece::Answer,
];

const PLAIN_V1_PIECES: &[Piece] = &[
    Piece::Lit("Document:\n"),
    Piece::Document,
    Piece::Lit("\n"),
    Piece::Lit(INSTRUCTION),
    Piece::Lit("Q: "),
    Piece::Question,
    Piece::Lit(" A:\n"),
    Piece::Answer,
];

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("unknown prompt template id {0:?}")]
pub struct UnknownTemplate(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptParts {
    pub document: String,
    pub question: String,
    pub answer: String,
    pub template_id: String,
}

impl PromptParts {
    pub fn new(document: &str, question: &str, answer: &str) -> Self {
        Self {
            document: document.to_owned(),
            question: question.to_owned(),
            answer: answer.to_owned(),
            template_id: INST_V1.to_owned(),
        }
    }
}

/// A rendered prompt with the byte ranges each part occupies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub text: String,
    pub document: Range<usize>,
    pub question: Range<usize>,
    pub answer: Range<usize>,
}

pub fn known_templates() -> &'static [&'static str] {
    &[INST_V1, PLAIN_V1]
}

fn pieces(template_id: &str) -> Result<&'static [Piece], UnknownTemplate> {
    match template_id {
        INST_V1 => Ok(INST_V1_PIECES),
        PLAIN_V1 => Ok(PLAIN_V1_PIECES),
        other => Err(UnknownTemplate(other.to_owned())),
    }
}

pub fn render_prompt(parts: &PromptParts) -> Result<RenderedPrompt, UnknownTemplate> {
    let mut text = String::new();
    let (mut document, mut question, mut answer) = (0..0, 0..0, 0..0);
    for piece in pieces(&parts.template_id)? {
        let start = text.len();
        match piece {
            Piece::Lit(s) => text.push_str(s),
            Piece::Document => {
                text.push_str(&parts.document);
                document = start..text.len();
            }
            Piece::Question => {
                text.push_str(&parts.question);
                question = start..text.len();
            }
            Piece::Answer => {
                text.push_str(&parts.answer);
                answer = start..text.len();
            }
        }
    }
    Ok(RenderedPrompt {
        text,
        document,
        question,
        answer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inst_v1_layout() {
        let r = render_prompt(&PromptParts::new("DOC", "Q?", "A.")).unwrap();
        assert!(r.text.contains("\nQ: Q? A:\n[/INST]\nA."));
        assert!(r.text.starts_with("[INST]\nDocument:\nDOC\n"));
        assert_eq!(&r.text[r.document.clone()], "DOC");
        assert_eq!(&r.text[r.question.clone()], "Q?");
        assert_eq!(&r.text[r.answer.clone()], "A.");
    }

    #[test]
    fn empty_answer_ends_at_inst_close() {
        let r = render_prompt(&PromptParts::new("DOC", "Q?", "")).unwrap();
        assert!(r.text.ends_with("[/INST]\n"));
        assert_eq!(r.answer, r.text.len()..r.text.len());
    }

    #[test]
    fn placeholders_in_values_are_not_expanded() {
        let r = render_prompt(&PromptParts::new("see {question}", "Q?", "")).unwrap();
        assert!(r.text.contains("see {question}\n"));
    }

    #[test]
    fn unknown_template() {
        let mut p = PromptParts::new("d", "q", "a");
        p.template_id = "nope".into();
        assert_eq!(render_prompt(&p), Err(UnknownTemplate("nope".into())));
    }
}
