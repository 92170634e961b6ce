//! Block-structured HTML chunking.
//!
//! This is a small tolerant walker rather than a full HTML5 parser: it only
//! needs to know where block elements open and close, which text belongs to
//! which block, and which elements carry no visible text.

use super::TextChunk;

const BLOCK_TAGS: &[&str] = &[
    "p", "div", "li", "h1", "h2", "h3", "h4", "h5", "h6", "td", "section", "article",
];

// Tags that do not break a word when they sit between two letters.
const INLINE_TAGS: &[&str] = &[
    "a", "abbr", "b", "bdi", "bdo", "cite", "code", "em", "font", "i", "kbd", "mark", "q", "s",
    "samp", "small", "span", "strong", "sub", "sup", "time", "u", "var",
];

const RAW_TEXT_TAGS: &[&str] = &["script", "style"];

const ROOT_BLOCK: &str = "body";

/// Chunks extracted from one page.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PageChunks {
    pub chunks: Vec<TextChunk>,
    /// Set when the markup could not be walked and tags were stripped instead.
    pub fallback: bool,
}

/// Splits on every non-alphanumeric character and lowercases.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Decomposes a page into token chunks following its block structure.
///
/// Each block element contributes the text that is not inside a nested block,
/// so nested markup yields every piece of text exactly once, attributed to its
/// innermost block. Blocks longer than `max_tokens` are hard-split into
/// consecutive chunks. `script` and `style` bodies are skipped.
pub fn extract_chunks(html: &str, max_tokens: usize) -> PageChunks {
    let max_tokens = max_tokens.max(1);
    match Walker::new(max_tokens).run(html) {
        Some(chunks) => PageChunks { chunks, fallback: false },
        None => PageChunks { chunks: strip_tags_fallback(html, max_tokens), fallback: true },
    }
}

struct OpenBlock {
    name: String,
    text: String,
}

struct Walker {
    max_tokens: usize,
    stack: Vec<OpenBlock>,
    chunks: Vec<TextChunk>,
}

struct Tag {
    name: String,
    closing: bool,
    self_closing: bool,
    end: usize,
}

impl Walker {
    fn new(max_tokens: usize) -> Self {
        Self {
            max_tokens,
            stack: vec![OpenBlock { name: ROOT_BLOCK.to_string(), text: String::new() }],
            chunks: Vec::new(),
        }
    }

    fn run(mut self, html: &str) -> Option<Vec<TextChunk>> {
        let bytes = html.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            if bytes[i] != b'<' {
                let end = html[i..].find('<').map_or(html.len(), |off| i + off);
                let text = decode_entities(&html[i..end]);
                self.top().text.push_str(&text);
                i = end;
                continue;
            }
            let rest = &html[i..];
            if let Some(comment) = rest.strip_prefix("<!--") {
                let close = comment.find("-->")?;
                i += 4 + close + 3;
                self.separate();
            } else if rest.starts_with("<!") || rest.starts_with("<?") {
                i += rest.find('>')? + 1;
                self.separate();
            } else if bytes.get(i + 1).is_some_and(|&c| c == b'/' || c.is_ascii_alphabetic()) {
                let tag = parse_tag(html, i)?;
                i = tag.end;
                if !tag.closing && RAW_TEXT_TAGS.contains(&tag.name.as_str()) {
                    if !tag.self_closing {
                        i = skip_raw_text(html, i, &tag.name)?;
                    }
                    self.separate();
                    continue;
                }
                self.handle_tag(&tag);
            } else {
                self.top().text.push('<');
                i += 1;
            }
        }
        while self.stack.len() > 1 {
            self.pop_block();
        }
        self.flush_top();
        Some(self.chunks)
    }

    fn top(&mut self) -> &mut OpenBlock {
        self.stack.last_mut().expect("root block is never popped")
    }

    fn separate(&mut self) {
        self.top().text.push(' ');
    }

    fn handle_tag(&mut self, tag: &Tag) {
        let name = tag.name.as_str();
        if BLOCK_TAGS.contains(&name) {
            if tag.closing {
                if let Some(pos) = self.stack.iter().rposition(|b| b.name == name) {
                    if pos > 0 {
                        while self.stack.len() > pos {
                            self.pop_block();
                        }
                        return;
                    }
                }
                self.separate();
            } else if !tag.self_closing {
                self.flush_top();
                self.stack.push(OpenBlock { name: name.to_string(), text: String::new() });
            }
        } else if !INLINE_TAGS.contains(&name) {
            self.separate();
        }
    }

    fn pop_block(&mut self) {
        self.flush_top();
        self.stack.pop();
    }

    fn flush_top(&mut self) {
        let block = self.top();
        let text = std::mem::take(&mut block.text);
        let name = block.name.clone();
        let tokens = tokenize(&text);
        push_split(&mut self.chunks, tokens, &name, self.max_tokens);
    }
}

fn push_split(chunks: &mut Vec<TextChunk>, tokens: Vec<String>, block: &str, max_tokens: usize) {
    for piece in tokens.chunks(max_tokens) {
        chunks.push(TextChunk {
            tokens: piece.to_vec(),
            source_block: block.to_string(),
            index_in_page: chunks.len(),
        });
    }
}

fn parse_tag(html: &str, start: usize) -> Option<Tag> {
    let bytes = html.as_bytes();
    let mut i = start + 1;
    let closing = bytes.get(i) == Some(&b'/');
    if closing {
        i += 1;
    }
    let name_start = i;
    while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'-') {
        i += 1;
    }
    let name = html[name_start..i].to_ascii_lowercase();
    let mut quote: Option<u8> = None;
    while i < bytes.len() {
        let c = bytes[i];
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => {}
            None if c == b'"' || c == b'\'' => quote = Some(c),
            None if c == b'>' => {
                let self_closing = i > start && bytes[i - 1] == b'/';
                return Some(Tag { name, closing, self_closing, end: i + 1 });
            }
            None => {}
        }
        i += 1;
    }
    None
}

fn skip_raw_text(html: &str, from: usize, name: &str) -> Option<usize> {
    let needle = format!("</{name}");
    let lower = html[from..].to_ascii_lowercase();
    let off = lower.find(&needle)?;
    let close_start = from + off;
    let gt = html[close_start..].find('>')?;
    Some(close_start + gt + 1)
}

fn strip_tags_fallback(html: &str, max_tokens: usize) -> Vec<TextChunk> {
    let mut text = String::with_capacity(html.len());
    let mut rest = html;
    while let Some(open) = rest.find('<') {
        text.push_str(&rest[..open]);
        text.push(' ');
        let after = &rest[open..];
        let lower_head: String = after.chars().take(8).collect::<String>().to_ascii_lowercase();
        let raw = RAW_TEXT_TAGS.iter().find(|t| lower_head.starts_with(&format!("<{t}")));
        let skip_to = match raw {
            Some(tag) => after
                .to_ascii_lowercase()
                .find(&format!("</{tag}"))
                .and_then(|p| after[p..].find('>').map(|g| p + g + 1)),
            None => after.find('>').map(|g| g + 1),
        };
        match skip_to {
            Some(n) => rest = &after[n..],
            None => {
                rest = "";
                break;
            }
        }
    }
    text.push_str(rest);
    let mut chunks = Vec::new();
    push_split(&mut chunks, tokenize(&decode_entities(&text)), ROOT_BLOCK, max_tokens);
    chunks
}

fn decode_entities(text: &str) -> String {
    if !text.contains('&') {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let after = &rest[amp + 1..];
        let decoded = after
            .find(';')
            .filter(|&semi| semi > 0 && semi <= 10)
            .and_then(|semi| decode_entity(&after[..semi]).map(|c| (c, semi)));
        match decoded {
            Some((c, semi)) => {
                out.push(c);
                rest = &after[semi + 1..];
            }
            None => {
                out.push('&');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

fn decode_entity(name: &str) -> Option<char> {
    if let Some(num) = name.strip_prefix('#') {
        let code = match num.strip_prefix(['x', 'X']) {
            Some(hex) => u32::from_str_radix(hex, 16).ok()?,
            None => num.parse().ok()?,
        };
        return char::from_u32(code);
    }
    Some(match name {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "quot" => '"',
        "apos" => '\'',
        "nbsp" => ' ',
        _ => return None,
    })
}
