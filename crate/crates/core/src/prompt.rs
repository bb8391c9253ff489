//! Prompt assembly for each sub-task and parsing of the completions.

use serde::{Deserialize, Serialize};

use crate::graph::{EntityName, RelationName};
use crate::reference::InContextExample;
use crate::text::normalize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubTask {
    RelationGeneration,
    PureObjectGeneration,
    DkObjectGeneration,
    SubjectParaphrasing,
    RelationParaphrasing,
}

/// Parsed object-generation completion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectAnswer {
    DontKnow,
    Objects(Vec<EntityName>),
}

impl ObjectAnswer {
    pub fn objects(&self) -> &[EntityName] {
        match self {
            ObjectAnswer::DontKnow => &[],
            ObjectAnswer::Objects(v) => v,
        }
    }
}

/// Joins demonstrations as `Q: ..\nA: ..` blocks separated by blank lines
/// and appends the open block `Q: {query}\nA:`.
pub fn build_qa_prompt(examples: &[InContextExample], query: &str) -> String {
    let mut out = String::new();
    for ex in examples {
        out.push_str("Q: ");
        out.push_str(ex.query());
        out.push_str("\nA: ");
        out.push_str(ex.answer());
        out.push_str("\n\n");
    }
    out.push_str("Q: ");
    out.push_str(query);
    out.push_str("\nA:");
    out
}

/// The object-generation query for a subject/relation realization pair.
pub fn object_query(subject: &str, relation: &str) -> String {
    format!("{subject} # {relation}")
}

pub fn build_subject_paraphrase_prompt(subject: &str) -> String {
    format!("{subject} is also known as:")
}

pub const RELATION_PARAPHRASE_TEMPLATES: [(&str, &str); 3] = [
    ("'", "' may be described as"),
    ("'", "' refers to"),
    ("please describe '", "' in a few words:"),
];

pub fn build_relation_paraphrase_prompts(relation: &str) -> [String; 3] {
    RELATION_PARAPHRASE_TEMPLATES.map(|(pre, post)| format!("{pre}{relation}{post}"))
}

fn first_line(text: &str) -> &str {
    let line = text.split(['\n', '\r']).next().unwrap_or("");
    // a leaked next block marker also ends the answer
    match line.find("Q:") {
        Some(i) if i > 0 && line[..i].ends_with(char::is_whitespace) => &line[..i],
        _ => line,
    }
}

/// Splits the first line of a completion on `#`, trimming segments and
/// dropping empties and normalized duplicates.
pub fn parse_list_answer(text: &str) -> Vec<String> {
    let mut seen = Vec::new();
    let mut out = Vec::new();
    for seg in first_line(text.trim_start()).split('#') {
        let seg = seg.trim();
        if seg.is_empty() {
            continue;
        }
        let key = normalize(seg);
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        out.push(seg.to_owned());
    }
    out
}

/// Relation names from a relation-generation completion. Segments that are
/// not valid names are dropped.
pub fn parse_relations(text: &str) -> Vec<RelationName> {
    parse_list_answer(text)
        .into_iter()
        .filter_map(|s| RelationName::new(s).ok())
        .collect()
}

pub fn is_dont_know(segment: &str) -> bool {
    let n = normalize(segment).replace(['\u{2019}', '\u{2018}', '`', '\u{b4}'], "'");
    let n = n.trim_end_matches(['.', '!', ',', ';']).trim_end();
    matches!(n, "don't know" | "dont know" | "do not know" | "i don't know")
}

/// Parses an object list. Blank completions and any `Don't know` segment
/// make the whole answer an abstention.
pub fn parse_object_answer(text: &str) -> ObjectAnswer {
    let segments = parse_list_answer(text);
    if segments.is_empty() || segments.iter().any(|s| is_dont_know(s)) {
        return ObjectAnswer::DontKnow;
    }
    let objects: Vec<EntityName> = segments
        .into_iter()
        .filter_map(|s| EntityName::new(s).ok())
        .collect();
    if objects.is_empty() {
        ObjectAnswer::DontKnow
    } else {
        ObjectAnswer::Objects(objects)
    }
}

/// First line of a paraphrase completion with surrounding quotes removed.
/// Rejects empty output, self-paraphrases, and strings that could not be
/// used as a query realization.
pub fn parse_paraphrase_answer(text: &str, original: &str) -> Option<String> {
    let mut p = first_line(text.trim_start()).trim();
    if let Some(stripped) = p.strip_suffix('.') {
        p = stripped.trim_end();
    }
    let p = strip_quotes(p);
    if p.is_empty() || p.contains('#') || p.chars().any(char::is_control) {
        return None;
    }
    if normalize(p) == normalize(original) {
        return None;
    }
    Some(p.to_owned())
}

fn strip_quotes(s: &str) -> &str {
    const PAIRS: [(char, char); 3] = [('"', '"'), ('\'', '\''), ('\u{201c}', '\u{201d}')];
    for (open, close) in PAIRS {
        if let Some(inner) = s.strip_prefix(open).and_then(|r| r.strip_suffix(close)) {
            return inner.trim();
        }
    }
    s
}
