//! Synthetic tasks with model-independent answers.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::sequence::{Spans, TokenSequence};
use super::vocab::{self, Vocabulary};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// One retrievable visual token; answer is its id.
    NeedleRetrieval,
    /// Marked text tokens; answer is the marked span.
    Copy,
    /// Marked visual tokens; answer is how many there are.
    Count,
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "needle" | "needle_retrieval" => Ok(Self::NeedleRetrieval),
            "copy" => Ok(Self::Copy),
            "count" => Ok(Self::Count),
            other => Err(Error::UnknownTaskKind(other.to_string())),
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::NeedleRetrieval => "needle_retrieval",
            Self::Copy => "copy",
            Self::Count => "count",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskParams {
    pub visual_len: usize,
    pub text_len: usize,
    pub hidden: usize,
    pub vocab_size: usize,
    /// Marked span length for COPY.
    pub span_len: usize,
    /// Number of marked tokens for COUNT.
    pub marks: usize,
}

impl Default for TaskParams {
    fn default() -> Self {
        Self {
            visual_len: 480,
            text_len: 32,
            hidden: 64,
            vocab_size: 512,
            span_len: 1,
            marks: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Token(u32),
    Span(Vec<u32>),
    Count(u32),
}

impl Answer {
    /// Task score in [0, 1] for a decoded output.
    ///
    /// Tokens are exact-match on the first decoded token; spans score the
    /// fraction of span tokens found among the first `len` outputs; counts
    /// score `1 / (1 + |predicted - expected|)` when the first output is a
    /// count token and 0 otherwise.
    pub fn score(&self, output: &[u32]) -> f64 {
        match self {
            Answer::Token(id) => f64::from(u8::from(output.first() == Some(id))),
            Answer::Span(span) => {
                let window = &output[..span.len().min(output.len())];
                let hits = span.iter().filter(|t| window.contains(t)).count();
                hits as f64 / span.len() as f64
            }
            Answer::Count(n) => match output.first().and_then(|&t| Vocabulary::count_of(t)) {
                Some(c) => 1.0 / (1.0 + f64::from(c.abs_diff(*n))),
                None => 0.0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub kind: TaskKind,
    pub sequence: TokenSequence,
    pub answer: Answer,
    /// Sequence indices of the planted tokens (needle, span or marks).
    pub planted: Vec<usize>,
}

pub fn make_task(kind: TaskKind, params: &TaskParams, seed: u64) -> Result<Task> {
    let p = params;
    if p.text_len == 0 {
        return Err(Error::EmptyTextSpan);
    }
    if p.hidden == 0 || p.vocab_size < vocab::MIN_VOCAB {
        return Err(Error::InvalidTask(format!(
            "hidden {} / vocab {} out of range",
            p.hidden, p.vocab_size
        )));
    }
    let vocab = Vocabulary::new(p.vocab_size, p.hidden);
    let mut r = rng::stream(seed, kind as u64 + 0x7A5C);
    let word = |r: &mut rng::Rng| r.random_range(vocab::FIRST_WORD..p.vocab_size as u32);

    let mut tokens = Vec::with_capacity(p.visual_len + p.text_len);
    let mut emb = Vec::with_capacity(p.visual_len + p.text_len);
    for _ in 0..p.visual_len {
        tokens.push(vocab::VISUAL_PATCH);
        let mut patch = rng::normal_vec(&mut r, p.hidden, 1.0);
        // patches carry random answer-in content that competes with the
        // needle whenever retrieval attention is diffuse
        vocab.strip_answer_out(&mut patch);
        emb.push(patch);
    }
    for _ in 0..p.text_len - 1 {
        let id = word(&mut r);
        tokens.push(id);
        emb.push(vocab.text_embedding(id));
    }
    tokens.push(vocab::QUERY);
    emb.push(vocab.text_embedding(vocab::QUERY));

    let (answer, planted) = match kind {
        TaskKind::NeedleRetrieval => {
            if p.visual_len == 0 {
                return Err(Error::InvalidTask("needle task needs visual tokens".into()));
            }
            let pos = r.random_range(0..p.visual_len);
            let id = word(&mut r);
            tokens[pos] = id;
            emb[pos] = vocab.retrievable_embedding(id, &vec![0.0; p.hidden]);
            for t in p.visual_len..p.visual_len + p.text_len - 1 {
                while tokens[t] == id {
                    tokens[t] = word(&mut r);
                    emb[t] = vocab.text_embedding(tokens[t]);
                }
            }
            (Answer::Token(id), vec![pos])
        }
        TaskKind::Copy => {
            if p.span_len == 0 || p.span_len + 1 > p.text_len {
                return Err(Error::InvalidTask(format!(
                    "copy span {} does not fit text of {}",
                    p.span_len, p.text_len
                )));
            }
            let start = p.visual_len + r.random_range(0..p.text_len - p.span_len);
            let mut span = Vec::with_capacity(p.span_len);
            for t in start..start + p.span_len {
                let id = word(&mut r);
                tokens[t] = id;
                emb[t] = vocab.retrievable_embedding(id, &vocab.text_embedding(id));
                span.push(id);
            }
            (Answer::Span(span), (start..start + p.span_len).collect())
        }
        TaskKind::Count => {
            if p.marks > p.visual_len || p.marks as u32 > vocab::MAX_COUNT {
                return Err(Error::InvalidTask(format!(
                    "{} marks with {} visual tokens",
                    p.marks, p.visual_len
                )));
            }
            let mut picks = sample(&mut r, p.visual_len, p.marks).into_vec();
            picks.sort_unstable();
            for &pos in &picks {
                tokens[pos] = vocab::MARK;
                emb[pos] = vocab.retrievable_embedding(vocab::MARK, &emb[pos]);
            }
            (Answer::Count(p.marks as u32), picks)
        }
    };
    let sequence = TokenSequence::new(tokens, emb, Spans::new(p.visual_len, p.text_len))?;
    Ok(Task {
        kind,
        sequence,
        answer,
        planted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn needle_has_exactly_one_needle() {
        let params = TaskParams {
            visual_len: 64,
            text_len: 8,
            ..TaskParams::default()
        };
        let task = make_task(TaskKind::NeedleRetrieval, &params, 3).unwrap();
        let Answer::Token(id) = task.answer else { panic!("needle answer is a token") };
        let count = task.sequence.tokens().iter().filter(|&&t| t == id).count();
        assert_eq!(count, 1);
        assert!(task.planted[0] < 64);
        assert_eq!(task.sequence.tokens()[task.planted[0]], id);
    }

    #[test]
    fn count_answer_is_mark_count() {
        let params = TaskParams {
            marks: 5,
            visual_len: 40,
            text_len: 4,
            ..TaskParams::default()
        };
        let task = make_task(TaskKind::Count, &params, 1).unwrap();
        assert_eq!(task.answer, Answer::Count(5));
        let marks = task.sequence.tokens().iter().filter(|&&t| t == vocab::MARK).count();
        assert_eq!(marks, 5);
    }

    #[test]
    fn generation_is_deterministic() {
        let params = TaskParams::default();
        for kind in [TaskKind::NeedleRetrieval, TaskKind::Copy, TaskKind::Count] {
            let a = make_task(kind, &params, 11).unwrap();
            let b = make_task(kind, &params, 11).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn unknown_kind_is_rejected() {
        assert!(matches!(
            "sort".parse::<TaskKind>(),
            Err(Error::UnknownTaskKind(_))
        ));
        assert_eq!("needle".parse::<TaskKind>().unwrap(), TaskKind::NeedleRetrieval);
    }

    #[test]
    fn copy_span_must_fit() {
        let params = TaskParams {
            span_len: 4,
            text_len: 4,
            ..TaskParams::default()
        };
        assert!(matches!(
            make_task(TaskKind::Copy, &params, 0),
            Err(Error::InvalidTask(_))
        ));
    }

    #[test]
    fn answer_scoring() {
        assert_eq!(Answer::Token(40).score(&[40, 1]), 1.0);
        assert_eq!(Answer::Token(40).score(&[]), 0.0);
        assert_eq!(Answer::Span(vec![30, 31]).score(&[31, 99]), 0.5);
        let c3 = Vocabulary::count_token(3).unwrap();
        assert_eq!(Answer::Count(3).score(&[c3]), 1.0);
        assert_eq!(Answer::Count(5).score(&[c3]), 1.0 / 3.0);
        assert_eq!(Answer::Count(5).score(&[vocab::QUERY]), 0.0);
    }
}
