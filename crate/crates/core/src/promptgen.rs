//! Question templates for structural and texture descriptions, and
//! collection of prompts from a chat model.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::sync::Mutex;
use thiserror::Error;

/// Extra re-issues of the question when the reply has too few items.
pub const MAX_REISSUES: usize = 3;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("template: {0}")]
    Template(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("chat service failed: {0}")]
    Upstream(#[source] ClientError),
    #[error("chat service returned no usable lines")]
    EmptyResponse,
}

/// Failure reported by a chat client implementation.
#[derive(Debug, Error)]
#[error("{message}")]
pub struct ClientError {
    pub message: String,
    #[source]
    pub cause: Option<Box<dyn std::error::Error + Send + Sync>>,
}

impl ClientError {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            cause: None,
        }
    }

    pub fn with_cause(message: impl Into<String>, cause: impl std::error::Error + Send + Sync + 'static) -> Self {
        Self {
            message: message.into(),
            cause: Some(Box::new(cause)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptKind {
    Structural,
    Texture,
}

impl PromptKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptKind::Structural => "structural",
            PromptKind::Texture => "texture",
        }
    }
}

impl std::str::FromStr for PromptKind {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "structural" => Ok(Self::Structural),
            "texture" => Ok(Self::Texture),
            other => Err(PromptError::InvalidArgument(format!("unknown prompt kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub kind: PromptKind,
    /// Must contain `{class}` and `{n}` exactly once each.
    pub question_template: String,
    pub system_preamble: String,
}

const DEFAULT_PREAMBLE: &str =
    "You write short, concrete visual descriptions of single objects for an image generator.";

impl PromptTemplate {
    pub fn default_for(kind: PromptKind) -> Self {
        let question_template = match kind {
            PromptKind::Structural => {
                "List {n} common structural designs of a {class}, one per line, each a short visual description."
            }
            PromptKind::Texture => {
                "List {n} common textures, materials, and color schemes for a {class}, one per line."
            }
        };
        Self {
            kind,
            question_template: question_template.to_string(),
            system_preamble: DEFAULT_PREAMBLE.to_string(),
        }
    }

    pub fn check(&self) -> Result<(), PromptError> {
        for ph in ["{class}", "{n}"] {
            let count = self.question_template.matches(ph).count();
            if count != 1 {
                return Err(PromptError::Template(format!(
                    "placeholder {ph} must appear exactly once, found {count}"
                )));
            }
        }
        Ok(())
    }
}

pub fn render_question(template: &PromptTemplate, class_name: &str, n: usize) -> Result<String, PromptError> {
    template.check()?;
    if n == 0 {
        return Err(PromptError::InvalidArgument("n must be at least 1".into()));
    }
    if class_name.trim().is_empty() {
        return Err(PromptError::InvalidArgument("class name is empty".into()));
    }
    // Substitute {n} first so a class name containing "{n}" stays verbatim.
    let (head, tail) = template.question_template.split_once("{class}").expect("checked");
    Ok(format!(
        "{}{class_name}{}",
        head.replace("{n}", &n.to_string()),
        tail.replace("{n}", &n.to_string())
    ))
}

/// Chat-model request; field names are the wire format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system: String,
    pub user: String,
    pub max_items: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
}

/// A chat model. Implementations must tolerate concurrent calls.
pub trait ChatClient: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ClientError>;

    /// Label recorded in [`PromptSet::source`].
    fn source(&self) -> PromptSource {
        PromptSource::ChatClient
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PromptSource {
    #[serde(rename = "chat-client")]
    ChatClient,
    #[serde(rename = "fixture")]
    Fixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSet {
    pub class_name: String,
    pub kind: PromptKind,
    pub prompts: Vec<String>,
    pub source: PromptSource,
    /// Chat calls made, including re-issues.
    pub calls: usize,
}

impl PromptSet {
    pub fn achieved(&self) -> usize {
        self.prompts.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptOptions {
    /// Appended to every prompt, comma separated.
    pub qualifiers: Vec<String>,
}

impl Default for PromptOptions {
    fn default() -> Self {
        Self {
            qualifiers: ["centered", "clean background", "no occlusion"]
                .map(String::from)
                .to_vec(),
        }
    }
}

/// Splits a reply into items: one per line, list numbering such as `3.`
/// or `3)` and bullets stripped, blanks dropped.
pub fn parse_reply(text: &str) -> Vec<String> {
    text.lines()
        .filter_map(|line| {
            let mut s = line.trim();
            let digits = s.len() - s.trim_start_matches(|c: char| c.is_ascii_digit()).len();
            if digits > 0 {
                let rest = &s[digits..];
                if let Some(r) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
                    s = r.trim_start();
                }
            }
            if let Some(r) = s.strip_prefix("- ").or_else(|| s.strip_prefix("* ")) {
                s = r.trim_start();
            }
            (!s.is_empty()).then(|| s.to_string())
        })
        .collect()
}

pub fn collect_prompts(
    client: &dyn ChatClient,
    template: &PromptTemplate,
    class_name: &str,
    n: usize,
    opts: &PromptOptions,
) -> Result<PromptSet, PromptError> {
    let question = render_question(template, class_name, n)?;
    let request = ChatRequest {
        system: template.system_preamble.clone(),
        user: question,
        max_items: n,
    };
    let mut seen = HashSet::new();
    let mut items = Vec::new();
    let mut calls = 0;
    while calls <= MAX_REISSUES && items.len() < n {
        let reply = client.complete(&request).map_err(PromptError::Upstream)?;
        calls += 1;
        for item in parse_reply(&reply.text) {
            if items.len() < n && seen.insert(item.to_lowercase()) {
                items.push(item);
            }
        }
    }
    if items.is_empty() {
        return Err(PromptError::EmptyResponse);
    }
    let suffix = opts
        .qualifiers
        .iter()
        .filter(|q| !q.trim().is_empty())
        .map(|q| q.trim())
        .collect::<Vec<_>>()
        .join(", ");
    let prompts = items
        .into_iter()
        .map(|p| if suffix.is_empty() { p } else { format!("{p}, {suffix}") })
        .collect();
    Ok(PromptSet {
        class_name: class_name.to_string(),
        kind: template.kind,
        prompts,
        source: client.source(),
        calls,
    })
}

/// Replays canned replies from a JSON file shaped
/// `{"structural": {"chair": ["reply 1", "reply 2"]}, "texture": {...}}`.
/// Successive calls for the same (kind, class) return successive replies,
/// repeating the last one.
pub struct FixtureChatClient {
    replies: BTreeMap<PromptKind, BTreeMap<String, Vec<String>>>,
    cursor: Mutex<BTreeMap<(PromptKind, String), usize>>,
    kind: PromptKind,
    class_name: String,
}

impl FixtureChatClient {
    pub fn from_json(bytes: &[u8], kind: PromptKind, class_name: &str) -> Result<Self, ClientError> {
        let replies = serde_json::from_slice(bytes).map_err(|e| ClientError::with_cause("bad fixture file", e))?;
        Ok(Self {
            replies,
            cursor: Mutex::new(BTreeMap::new()),
            kind,
            class_name: class_name.to_string(),
        })
    }

    pub fn from_path(path: &Path, kind: PromptKind, class_name: &str) -> Result<Self, ClientError> {
        let bytes = std::fs::read(path).map_err(|e| ClientError::with_cause(format!("reading {}", path.display()), e))?;
        Self::from_json(&bytes, kind, class_name)
    }
}

impl ChatClient for FixtureChatClient {
    fn complete(&self, _request: &ChatRequest) -> Result<ChatResponse, ClientError> {
        let list = self
            .replies
            .get(&self.kind)
            .and_then(|m| m.get(&self.class_name))
            .filter(|l| !l.is_empty())
            .ok_or_else(|| ClientError::new(format!("no fixture for ({}, {})", self.kind.as_str(), self.class_name)))?;
        let mut cursor = self.cursor.lock().expect("cursor lock");
        let i = cursor.entry((self.kind, self.class_name.clone())).or_insert(0);
        let text = list[(*i).min(list.len() - 1)].clone();
        *i += 1;
        Ok(ChatResponse { text })
    }

    fn source(&self) -> PromptSource {
        PromptSource::Fixture
    }
}

const STYLES: [&str; 12] = [
    "modern", "rustic", "minimalist", "vintage", "industrial", "scandinavian", "mid-century", "classic",
    "contemporary", "compact", "oversized", "ergonomic",
];
const FEATURES: [&str; 10] = [
    "with a slim frame", "with rounded edges", "with a sturdy base", "with angular lines", "with a tall profile",
    "with a low profile", "with tapered legs", "with a wide footprint", "with a curved silhouette",
    "with exposed joinery",
];
const MATERIALS: [&str; 12] = [
    "oak wood", "walnut veneer", "brushed steel", "matte black metal", "white lacquer", "woven rattan",
    "grey linen", "red leather", "polished marble", "bamboo", "blue velvet", "frosted glass",
];
const FINISHES: [&str; 8] = [
    "glossy finish", "matte finish", "weathered look", "two-tone color scheme", "natural grain",
    "pastel palette", "dark stain", "bright accent color",
];

/// Offline stand-in for a chat model: answers with a numbered list of
/// `max_items` distinct descriptions derived from the question text.
#[derive(Debug, Default, Clone)]
pub struct MockChatClient;

impl MockChatClient {
    pub fn reply(request: &ChatRequest) -> String {
        let texture = request.user.contains("texture");
        let offset = request.user.bytes().fold(0usize, |h, b| h.wrapping_mul(31).wrapping_add(b as usize));
        let class = extract_class(&request.user);
        (0..request.max_items)
            .map(|i| {
                let k = i + offset % 97;
                let line = if texture {
                    format!("{} with {}", MATERIALS[k % MATERIALS.len()], FINISHES[(k / MATERIALS.len()) % FINISHES.len()])
                } else {
                    format!("a {} {class} {}", STYLES[k % STYLES.len()], FEATURES[(k / STYLES.len()) % FEATURES.len()])
                };
                // Past the word-list product the variant number keeps lines distinct.
                let cycle = k / (STYLES.len() * FEATURES.len()).min(MATERIALS.len() * FINISHES.len());
                if cycle > 0 {
                    format!("{}. {line}, variant {}", i + 1, cycle + 1)
                } else {
                    format!("{}. {line}", i + 1)
                }
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

fn extract_class(question: &str) -> String {
    for marker in [" of a ", " for a "] {
        if let Some((_, rest)) = question.split_once(marker) {
            return rest.split(',').next().unwrap_or(rest).trim_end_matches('.').to_string();
        }
    }
    "object".to_string()
}

impl ChatClient for MockChatClient {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ClientError> {
        Ok(ChatResponse {
            text: Self::reply(request),
        })
    }
}
