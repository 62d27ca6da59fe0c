//! Vocabulary, question templates and the prefix tree of legal questions.
//!
//! Every legal question is a root-to-leaf path in the trie and ends in `?`.
//! Each leaf carries exactly one [`Predicate`], which is what the Oracle
//! evaluates.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::world::WorldConfig;

pub type TokenId = usize;

pub const END_TOKEN: &str = "<End>";
pub const QUESTION_STOP: &str = "?";
/// `<End>` and `?` always occupy the first two vocabulary slots.
pub const END: TokenId = 0;
pub const STOP: TokenId = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// Box center `x < 0.5`.
    Left,
    Right,
    /// Box center `y < 0.5` (image coordinates, y grows downwards).
    Top,
    Bottom,
    /// Box center within 0.25 of the frame center on both axes.
    Center,
}

impl Region {
    pub fn contains(self, center: (f64, f64)) -> bool {
        let (x, y) = center;
        match self {
            Region::Left => x < 0.5,
            Region::Right => x >= 0.5,
            Region::Top => y < 0.5,
            Region::Bottom => y >= 0.5,
            Region::Center => (x - 0.5).abs() < 0.25 && (y - 0.5).abs() < 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Predicate {
    Category { value: String },
    Attribute { name: String, value: String },
    Region { region: Region },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionTemplate {
    /// Whitespace-separated words. At most one `{category}` or
    /// `{<attribute>}` placeholder; must end with `?`.
    pub pattern: String,
    /// Required for spatial templates, which carry no placeholder.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Region>,
}

impl QuestionTemplate {
    fn new(pattern: &str, region: Option<Region>) -> Self {
        QuestionTemplate {
            pattern: pattern.to_string(),
            region,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrammarConfig {
    /// Maximum tokens per question, `?` included.
    pub m_max: usize,
    pub templates: Vec<QuestionTemplate>,
}

impl Default for GrammarConfig {
    fn default() -> Self {
        GrammarConfig {
            m_max: 12,
            templates: vec![
                QuestionTemplate::new("is it a {category} ?", None),
                QuestionTemplate::new("is it {color} ?", None),
                QuestionTemplate::new("is it {size} ?", None),
                QuestionTemplate::new("is it in the left half ?", Some(Region::Left)),
                QuestionTemplate::new("is it in the right half ?", Some(Region::Right)),
                QuestionTemplate::new("is it in the top half ?", Some(Region::Top)),
                QuestionTemplate::new("is it in the bottom half ?", Some(Region::Bottom)),
                QuestionTemplate::new("is it in the center ?", Some(Region::Center)),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocabulary {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.first().map(String::as_str) != Some(END_TOKEN)
            || tokens.get(1).map(String::as_str) != Some(QUESTION_STOP)
        {
            return Err(Error::Grammar(format!(
                "vocabulary must start with `{END_TOKEN}` and `{QUESTION_STOP}`"
            )));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Grammar(format!("duplicate token `{t}`")));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn render(&self, ids: &[TokenId]) -> String {
        ids.iter().map(|&i| self.token(i)).collect::<Vec<_>>().join(" ")
    }

    pub fn encode(&self, text: &str) -> Result<Vec<TokenId>> {
        text.split_whitespace()
            .map(|w| self.id(w).ok_or_else(|| Error::Ungrammatical(format!("unknown word `{w}`"))))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub tokens: Vec<TokenId>,
    pub predicate: Predicate,
}

#[derive(Debug, Clone, Default)]
struct TrieNode {
    /// Sorted by token id.
    children: Vec<(TokenId, usize)>,
    /// Set on the node reached by a question's final `?`.
    question: Option<usize>,
    /// Questions whose path passes through this node.
    below: Vec<usize>,
}

/// The masked action space: vocabulary plus the trie of legal questions.
#[derive(Debug, Clone)]
pub struct Grammar {
    vocab: Vocabulary,
    questions: Vec<Question>,
    nodes: Vec<TrieNode>,
    m_max: usize,
}

/// Serialized form stored inside checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrammarSnapshot {
    pub vocabulary: Vec<String>,
    pub questions: Vec<Question>,
    pub m_max: usize,
}

impl Grammar {
    /// Expands the templates over the world's categories and attribute values.
    pub fn build(cfg: &GrammarConfig, world: &WorldConfig) -> Result<Self> {
        if cfg.m_max < 2 {
            return Err(Error::config("grammar.m_max", "must be >= 2"));
        }
        if cfg.templates.is_empty() {
            return Err(Error::config("grammar.templates", "at least one template is required"));
        }
        let mut words: Vec<Vec<String>> = Vec::new();
        let mut predicates = Vec::new();
        for (ti, template) in cfg.templates.iter().enumerate() {
            let key = format!("grammar.templates[{ti}]");
            let parts: Vec<&str> = template.pattern.split_whitespace().collect();
            if parts.last() != Some(&QUESTION_STOP) {
                return Err(Error::config(&key, "pattern must end with `?`"));
            }
            if parts[..parts.len() - 1].iter().any(|w| *w == QUESTION_STOP || *w == END_TOKEN) {
                return Err(Error::config(&key, "`?` and `<End>` may only end a pattern"));
            }
            let slots: Vec<usize> = (0..parts.len())
                .filter(|&i| parts[i].starts_with('{') && parts[i].ends_with('}'))
                .collect();
            let expand = |values: &[String], slot: usize| -> Vec<Vec<String>> {
                values
                    .iter()
                    .map(|v| {
                        let mut w: Vec<String> = parts.iter().map(|s| s.to_string()).collect();
                        w[slot] = v.clone();
                        w
                    })
                    .collect()
            };
            match (slots.as_slice(), template.region) {
                ([], Some(region)) => {
                    words.push(parts.iter().map(|s| s.to_string()).collect());
                    predicates.push(Predicate::Region { region });
                }
                ([slot], None) => {
                    let name = &parts[*slot][1..parts[*slot].len() - 1];
                    if name == "category" {
                        for (w, value) in expand(&world.categories, *slot).into_iter().zip(&world.categories) {
                            words.push(w);
                            predicates.push(Predicate::Category { value: value.clone() });
                        }
                    } else {
                        let attr = world
                            .attribute(name)
                            .ok_or_else(|| Error::config(&key, format!("unknown attribute `{name}`")))?;
                        for (w, value) in expand(&attr.values, *slot).into_iter().zip(&attr.values) {
                            words.push(w);
                            predicates.push(Predicate::Attribute {
                                name: name.to_string(),
                                value: value.clone(),
                            });
                        }
                    }
                }
                ([], None) => return Err(Error::config(&key, "template needs a placeholder or a region")),
                (_, Some(_)) => return Err(Error::config(&key, "region templates take no placeholder")),
                _ => return Err(Error::config(&key, "at most one placeholder per template")),
            }
        }

        let mut tokens = vec![END_TOKEN.to_string(), QUESTION_STOP.to_string()];
        for w in words.iter().flatten() {
            if !tokens.contains(w) {
                tokens.push(w.clone());
            }
        }
        let vocab = Vocabulary::from_tokens(tokens)?;
        let questions = words
            .iter()
            .zip(predicates)
            .map(|(w, predicate)| Question {
                tokens: w.iter().map(|t| vocab.id(t).expect("token registered above")).collect(),
                predicate,
            })
            .collect();
        Self::from_parts(vocab, questions, cfg.m_max)
    }

    pub fn from_parts(vocab: Vocabulary, questions: Vec<Question>, m_max: usize) -> Result<Self> {
        let mut nodes = vec![TrieNode::default()];
        for (qi, q) in questions.iter().enumerate() {
            if q.tokens.len() > m_max {
                return Err(Error::Grammar(format!(
                    "question `{}` has {} tokens, more than m_max = {m_max}",
                    vocab.render(&q.tokens),
                    q.tokens.len()
                )));
            }
            if q.tokens.last() != Some(&STOP) || q.tokens[..q.tokens.len() - 1].contains(&STOP) {
                return Err(Error::Grammar("every question ends with exactly one `?`".into()));
            }
            if q.tokens.iter().any(|&t| t == END || t >= vocab.len()) {
                return Err(Error::Grammar("question uses an invalid token".into()));
            }
            let mut node = 0;
            nodes[0].below.push(qi);
            for &tok in &q.tokens {
                node = match nodes[node].children.binary_search_by_key(&tok, |c| c.0) {
                    Ok(pos) => nodes[node].children[pos].1,
                    Err(pos) => {
                        nodes.push(TrieNode::default());
                        let child = nodes.len() - 1;
                        nodes[node].children.insert(pos, (tok, child));
                        child
                    }
                };
                nodes[node].below.push(qi);
            }
            if let Some(prev) = nodes[node].question.replace(qi) {
                return Err(Error::Grammar(format!(
                    "questions {prev} and {qi} share the token sequence `{}`",
                    vocab.render(&q.tokens)
                )));
            }
        }
        Ok(Grammar {
            vocab,
            questions,
            nodes,
            m_max,
        })
    }

    pub fn snapshot(&self) -> GrammarSnapshot {
        GrammarSnapshot {
            vocabulary: self.vocab.tokens().to_vec(),
            questions: self.questions.clone(),
            m_max: self.m_max,
        }
    }

    pub fn from_snapshot(s: &GrammarSnapshot) -> Result<Self> {
        Self::from_parts(Vocabulary::from_tokens(s.vocabulary.clone())?, s.questions.clone(), s.m_max)
    }

    /// Hex SHA-256 over the vocabulary and every question's token sequence.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for t in self.vocab.tokens() {
            h.update(t.as_bytes());
            h.update([0u8]);
        }
        for q in &self.questions {
            for &t in &q.tokens {
                h.update((t as u32).to_le_bytes());
            }
            h.update([0xffu8]);
        }
        hex::encode(h.finalize())
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn questions(&self) -> &[Question] {
        &self.questions
    }

    pub fn num_predicates(&self) -> usize {
        self.questions.len()
    }

    pub fn predicate(&self, index: usize) -> &Predicate {
        &self.questions[index].predicate
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    /// Trie node reached by `prefix`, if `prefix` is a proper question prefix.
    pub fn node(&self, prefix: &[TokenId]) -> Option<usize> {
        let mut node = 0;
        for &tok in prefix {
            node = self.child(node, tok)?;
        }
        Some(node)
    }

    pub fn child(&self, node: usize, token: TokenId) -> Option<usize> {
        let children = &self.nodes[node].children;
        children.binary_search_by_key(&token, |c| c.0).ok().map(|pos| children[pos].1)
    }

    pub fn children(&self, node: usize) -> impl Iterator<Item = (TokenId, usize)> + '_ {
        self.nodes[node].children.iter().copied()
    }

    /// Question indices whose path passes through `node`.
    pub fn questions_below(&self, node: usize) -> &[usize] {
        &self.nodes[node].below
    }

    /// Maps a complete token sequence to its question index.
    pub fn parse(&self, tokens: &[TokenId]) -> Result<usize> {
        self.node(tokens)
            .and_then(|n| self.nodes[n].question)
            .ok_or_else(|| Error::Ungrammatical(self.render_lossy(tokens)))
    }

    pub fn parse_text(&self, text: &str) -> Result<usize> {
        self.parse(&self.vocab.encode(text)?)
    }

    fn render_lossy(&self, tokens: &[TokenId]) -> String {
        tokens
            .iter()
            .map(|&t| if t < self.vocab.len() { self.vocab.token(t).to_string() } else { format!("#{t}") })
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Legal next tokens after `prefix`.
    ///
    /// At an empty prefix the dialogue may also stop with `<End>`. One token
    /// short of `m_max` only `?` remains. Errors if `prefix` is not a trie prefix.
    pub fn legal_tokens(&self, prefix: &[TokenId]) -> Result<Vec<bool>> {
        let node = self
            .node(prefix)
            .filter(|&n| self.nodes[n].question.is_none())
            .ok_or_else(|| Error::Ungrammatical(format!("`{}` is not a question prefix", self.render_lossy(prefix))))?;
        let mut mask = vec![false; self.vocab.len()];
        for (tok, _) in self.children(node) {
            mask[tok] = true;
        }
        if prefix.is_empty() {
            mask[END] = true;
        }
        if prefix.len() + 1 >= self.m_max {
            for (t, m) in mask.iter_mut().enumerate() {
                *m &= t == STOP;
            }
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::EmptyMask);
        }
        Ok(mask)
    }
}
