//! Tolerant HTML to Markdown conversion.
//!
//! Tag mapping: `h1`-`h6` become `#` headings, `p` and other block containers
//! become blank-line separated paragraphs, `ul`/`ol` become `-`/`1.` lists,
//! `a` becomes `[text](href)`, `b`/`strong` and `i`/`em` become `**`/`*`
//! emphasis, `pre` becomes a fenced block and inline `code` uses backticks.
//! `script`, `style`, `nav`, `header`, `footer`, `iframe` (and `head`) are
//! dropped with their subtrees. Everything else is unwrapped to its text.

const DROPPED: &[&str] = &[
    "script", "style", "nav", "header", "footer", "iframe", "head", "noscript", "template",
];
const RAW_TEXT: &[&str] = &["script", "style", "iframe", "textarea", "noscript"];
const VOID: &[&str] = &[
    "br", "hr", "img", "input", "meta", "link", "area", "base", "col", "embed", "source",
    "track", "wbr", "param",
];
const BLOCK: &[&str] = &[
    "p", "div", "section", "article", "main", "body", "html", "blockquote", "table", "thead",
    "tbody", "tfoot", "tr", "form", "aside", "figure", "figcaption", "dl", "dt", "dd",
    "address", "center", "hr", "fieldset", "details", "summary",
];
// opening one of these closes an open <p>
const CLOSES_P: &[&str] = &[
    "p", "div", "h1", "h2", "h3", "h4", "h5", "h6", "ul", "ol", "pre", "table", "blockquote",
    "section", "article", "form", "hr",
];

/// Line break placeholder that survives whitespace collapsing.
const BREAK: char = '\u{1E}';

#[derive(Debug)]
enum Node {
    Text(String),
    Element {
        name: String,
        attrs: Vec<(String, String)>,
        children: Vec<Node>,
    },
}

#[derive(Debug)]
enum Token {
    Text(String),
    Start {
        name: String,
        attrs: Vec<(String, String)>,
        self_closing: bool,
    },
    End(String),
}

fn tokenize(html: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut text = String::new();
    let mut rest = html;
    while let Some(pos) = rest.find('<') {
        text.push_str(&rest[..pos]);
        rest = &rest[pos..];
        let after = &rest[1..];
        if let Some(body) = after.strip_prefix("!--") {
            rest = match body.find("-->") {
                Some(e) => &body[e + 3..],
                None => "",
            };
            continue;
        }
        if after.starts_with('!') || after.starts_with('?') {
            rest = match after.find('>') {
                Some(e) => &after[e + 1..],
                None => "",
            };
            continue;
        }
        let (is_end, name_start) = match after.strip_prefix('/') {
            Some(s) => (true, s),
            None => (false, after),
        };
        if !name_start.starts_with(|c: char| c.is_ascii_alphabetic()) {
            text.push('<');
            rest = after;
            continue;
        }
        let Some(close) = find_tag_end(name_start) else {
            // unterminated tag: drop the remainder
            rest = "";
            break;
        };
        let inner = &name_start[..close];
        rest = &name_start[close + 1..];
        if !text.is_empty() {
            out.push(Token::Text(decode_entities(&std::mem::take(&mut text))));
        }
        let name_len = inner
            .find(|c: char| c.is_whitespace() || c == '/')
            .unwrap_or(inner.len());
        let name = inner[..name_len].to_ascii_lowercase();
        if is_end {
            out.push(Token::End(name));
            continue;
        }
        let self_closing = inner.trim_end().ends_with('/');
        let attrs = parse_attrs(&inner[name_len..]);
        let raw = RAW_TEXT.contains(&name.as_str()) && !self_closing;
        out.push(Token::Start {
            name: name.clone(),
            attrs,
            self_closing,
        });
        if raw {
            let lower = rest.to_ascii_lowercase();
            let needle = format!("</{name}");
            let end = lower.find(&needle).unwrap_or(rest.len());
            if end > 0 {
                out.push(Token::Text(rest[..end].to_string()));
            }
            rest = &rest[end..];
        }
    }
    text.push_str(rest);
    if !text.is_empty() {
        out.push(Token::Text(decode_entities(&text)));
    }
    out
}

/// Index of the `>` closing a tag, honoring quoted attribute values.
fn find_tag_end(s: &str) -> Option<usize> {
    let mut quote: Option<char> = None;
    for (i, c) in s.char_indices() {
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => {}
            None if c == '"' || c == '\'' => quote = Some(c),
            None if c == '>' => return Some(i),
            None => {}
        }
    }
    None
}

fn parse_attrs(s: &str) -> Vec<(String, String)> {
    let mut attrs = Vec::new();
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        while i < chars.len() && (chars[i].is_whitespace() || chars[i] == '/') {
            i += 1;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() && chars[i] != '=' && chars[i] != '/'
        {
            i += 1;
        }
        if start == i {
            i += 1;
            continue;
        }
        let key: String = chars[start..i].iter().collect::<String>().to_ascii_lowercase();
        while i < chars.len() && chars[i].is_whitespace() {
            i += 1;
        }
        let mut value = String::new();
        if i < chars.len() && chars[i] == '=' {
            i += 1;
            while i < chars.len() && chars[i].is_whitespace() {
                i += 1;
            }
            if i < chars.len() && (chars[i] == '"' || chars[i] == '\'') {
                let q = chars[i];
                i += 1;
                while i < chars.len() && chars[i] != q {
                    value.push(chars[i]);
                    i += 1;
                }
                i += 1;
            } else {
                while i < chars.len() && !chars[i].is_whitespace() {
                    value.push(chars[i]);
                    i += 1;
                }
            }
        }
        attrs.push((key, decode_entities(&value)));
    }
    attrs
}

fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(pos) = rest.find('&') {
        out.push_str(&rest[..pos]);
        rest = &rest[pos..];
        let semi = rest[1..]
            .char_indices()
            .take(10)
            .find(|&(_, c)| c == ';')
            .map(|(i, _)| i + 1);
        let decoded = semi.and_then(|end| entity(&rest[1..end]).map(|c| (c, end)));
        match decoded {
            Some((c, end)) => {
                out.push(c);
                rest = &rest[end + 1..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn entity(name: &str) -> Option<char> {
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
        "mdash" => '\u{2014}',
        "ndash" => '\u{2013}',
        "hellip" => '\u{2026}',
        "copy" => '\u{a9}',
        _ => return None,
    })
}

type OpenElement = (String, Vec<(String, String)>, Vec<Node>);

fn build_tree(tokens: Vec<Token>) -> Vec<Node> {
    // stack of open elements; index 0 is a synthetic root
    let mut stack: Vec<OpenElement> =
        vec![(String::new(), Vec::new(), Vec::new())];

    fn pop_into_parent(stack: &mut Vec<OpenElement>) {
        let (name, attrs, children) = stack.pop().expect("non-root element");
        stack
            .last_mut()
            .expect("root")
            .2
            .push(Node::Element {
                name,
                attrs,
                children,
            });
    }

    for tok in tokens {
        match tok {
            Token::Text(t) => stack.last_mut().expect("root").2.push(Node::Text(t)),
            Token::Start {
                name,
                attrs,
                self_closing,
            } => {
                if CLOSES_P.contains(&name.as_str()) && stack.len() > 1 && stack.last().unwrap().0 == "p"
                {
                    pop_into_parent(&mut stack);
                }
                if name == "li" {
                    let list_pos = stack
                        .iter()
                        .rposition(|(n, _, _)| n == "ul" || n == "ol")
                        .unwrap_or(0);
                    if let Some(li_pos) = stack.iter().rposition(|(n, _, _)| n == "li") {
                        if li_pos > list_pos {
                            while stack.len() > li_pos {
                                pop_into_parent(&mut stack);
                            }
                        }
                    }
                }
                if self_closing || VOID.contains(&name.as_str()) {
                    stack.last_mut().expect("root").2.push(Node::Element {
                        name,
                        attrs,
                        children: Vec::new(),
                    });
                } else {
                    stack.push((name, attrs, Vec::new()));
                }
            }
            Token::End(name) => {
                if let Some(pos) = stack.iter().skip(1).rposition(|(n, _, _)| *n == name) {
                    let pos = pos + 1;
                    while stack.len() > pos {
                        pop_into_parent(&mut stack);
                    }
                }
            }
        }
    }
    while stack.len() > 1 {
        pop_into_parent(&mut stack);
    }
    stack.pop().expect("root").2
}

fn collapse(s: &str) -> String {
    let mut lines = Vec::new();
    for part in s.split(BREAK) {
        let words: Vec<&str> = part.split_whitespace().collect();
        lines.push(words.join(" "));
    }
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    let first = lines.iter().position(|l| !l.is_empty()).unwrap_or(lines.len());
    lines[first..].join("\n")
}

fn attr<'a>(attrs: &'a [(String, String)], key: &str) -> Option<&'a str> {
    attrs
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
}

fn heading_level(name: &str) -> Option<usize> {
    match name.as_bytes() {
        [b'h', d @ b'1'..=b'6'] => Some((d - b'0') as usize),
        _ => None,
    }
}

/// Wraps `inner` in `mark` while keeping its surrounding whitespace outside.
fn wrap(inner: &str, mark: &str) -> String {
    let trimmed = inner.trim_matches(|c: char| c.is_whitespace() && c != BREAK);
    if trimmed.trim().is_empty() {
        return inner.to_string();
    }
    let lead = if inner.starts_with(char::is_whitespace) { " " } else { "" };
    let trail = if inner.ends_with(char::is_whitespace) { " " } else { "" };
    format!("{lead}{mark}{trimmed}{mark}{trail}")
}

fn raw_text(nodes: &[Node], out: &mut String) {
    for n in nodes {
        match n {
            Node::Text(t) => out.push_str(t),
            Node::Element { name, children, .. } => {
                if name == "br" {
                    out.push('\n');
                } else if !DROPPED.contains(&name.as_str()) {
                    raw_text(children, out);
                }
            }
        }
    }
}

struct Renderer {
    blocks: Vec<String>,
    inline: String,
}

impl Renderer {
    fn flush(&mut self) {
        let text = collapse(&std::mem::take(&mut self.inline));
        if !text.is_empty() {
            self.blocks.push(text);
        }
    }

    fn push_block(&mut self, block: String) {
        self.flush();
        if !block.trim().is_empty() {
            self.blocks.push(block);
        }
    }

    fn render(&mut self, nodes: &[Node]) {
        for node in nodes {
            match node {
                Node::Text(t) => self.inline.push_str(t),
                Node::Element {
                    name,
                    attrs,
                    children,
                } => self.element(name, attrs, children),
            }
        }
    }

    fn element(&mut self, name: &str, attrs: &[(String, String)], children: &[Node]) {
        if DROPPED.contains(&name) {
            return;
        }
        if let Some(level) = heading_level(name) {
            let text = collapse(&inline_text(children)).replace('\n', " ");
            if !text.is_empty() {
                self.push_block(format!("{} {}", "#".repeat(level), text));
            } else {
                self.flush();
            }
            return;
        }
        match name {
            "ul" | "ol" => {
                let mut lines = Vec::new();
                render_list(name == "ol", children, 0, &mut lines);
                self.push_block(lines.join("\n"));
            }
            "pre" => {
                let mut text = String::new();
                raw_text(children, &mut text);
                let text = text.trim_matches('\n');
                if !text.trim().is_empty() {
                    self.push_block(format!("```\n{text}\n```"));
                } else {
                    self.flush();
                }
            }
            "br" => self.inline.push(BREAK),
            _ if BLOCK.contains(&name) => {
                self.flush();
                self.render(children);
                self.flush();
            }
            _ => {
                let s = inline_element(name, attrs, children);
                self.inline.push_str(&s);
            }
        }
    }
}

fn inline_element(name: &str, attrs: &[(String, String)], children: &[Node]) -> String {
    let inner = inline_text(children);
    match name {
        "a" => {
            let text = collapse(&inner).replace('\n', " ");
            match attr(attrs, "href").map(str::trim) {
                Some(href) if !href.is_empty() && !text.is_empty() => {
                    let lead = if inner.starts_with(char::is_whitespace) { " " } else { "" };
                    let trail = if inner.ends_with(char::is_whitespace) { " " } else { "" };
                    format!("{lead}[{text}]({href}){trail}")
                }
                _ => inner,
            }
        }
        "b" | "strong" => wrap(&inner, "**"),
        "i" | "em" => wrap(&inner, "*"),
        "code" => wrap(&inner, "`"),
        "td" | "th" | "li" => format!("{inner} "),
        _ => inner,
    }
}

fn inline_text(nodes: &[Node]) -> String {
    let mut out = String::new();
    for n in nodes {
        match n {
            Node::Text(t) => out.push_str(t),
            Node::Element {
                name,
                attrs,
                children,
            } => {
                if DROPPED.contains(&name.as_str()) {
                    continue;
                }
                if name == "br" {
                    out.push(BREAK);
                } else if BLOCK.contains(&name.as_str())
                    || heading_level(name).is_some()
                    || matches!(name.as_str(), "ul" | "ol" | "pre")
                {
                    out.push(' ');
                    out.push_str(&inline_text(children));
                    out.push(' ');
                } else {
                    out.push_str(&inline_element(name, attrs, children));
                }
            }
        }
    }
    out
}

fn render_list(ordered: bool, children: &[Node], depth: usize, lines: &mut Vec<String>) {
    let indent = "  ".repeat(depth);
    let mut n = 0;
    for child in children {
        let Node::Element {
            name,
            children: item,
            ..
        } = child
        else {
            continue;
        };
        match name.as_str() {
            "li" => {
                n += 1;
                let marker = if ordered { format!("{n}.") } else { "-".to_string() };
                let (nested, rest): (Vec<&Node>, Vec<&Node>) = item.iter().partition(|c| {
                    matches!(c, Node::Element { name, .. } if name == "ul" || name == "ol")
                });
                let mut text = String::new();
                for r in rest {
                    text.push_str(&inline_text(std::slice::from_ref(r)));
                }
                let text = collapse(&text).replace('\n', " ");
                lines.push(format!("{indent}{marker} {text}").trim_end().to_string());
                for nl in nested {
                    if let Node::Element { name, children, .. } = nl {
                        render_list(name == "ol", children, depth + 1, lines);
                    }
                }
            }
            "ul" | "ol" => render_list(name == "ol", item, depth + 1, lines),
            _ => {}
        }
    }
}

/// Converts an HTML fragment or page to Markdown. Never fails; malformed
/// markup degrades to its text.
pub fn html_to_markdown(html: &str) -> String {
    let tree = build_tree(tokenize(html));
    let mut r = Renderer {
        blocks: Vec::new(),
        inline: String::new(),
    };
    r.render(&tree);
    r.flush();
    r.blocks.join("\n\n")
}
