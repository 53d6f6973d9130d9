//! The word tokenizer shared by the language model, shingling, decontamination
//! and the classifier's feature extractor.
//!
//! Text is lowercased and split on whitespace. Non-alphanumeric characters at
//! the start or end of a whitespace chunk are detached, one token per
//! character; characters inside a chunk (`don't`, `e-mail`, `3.14`) stay put.

/// Tokenizes `text` into owned lowercase tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        push_chunk(chunk, &mut out);
    }
    out
}

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric()
}

fn push_chunk(chunk: &str, out: &mut Vec<String>) {
    let chars: Vec<char> = chunk.chars().collect();
    let mut start = 0;
    let mut end = chars.len();
    while start < end && is_punct(chars[start]) {
        start += 1;
    }
    while end > start && is_punct(chars[end - 1]) {
        end -= 1;
    }
    for &c in &chars[..start] {
        out.extend(lower(c));
    }
    if start < end {
        let core: String = chars[start..end].iter().collect();
        out.push(core.to_lowercase());
    }
    for &c in &chars[end.max(start)..] {
        out.extend(lower(c));
    }
}

fn lower(c: char) -> Option<String> {
    Some(c.to_lowercase().collect())
}

/// Whitespace token count, used for corpus statistics and token accounting.
pub fn whitespace_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detaches_edge_punctuation() {
        assert_eq!(
            tokenize("Hello, World! (really)"),
            vec!["hello", ",", "world", "!", "(", "really", ")"]
        );
    }

    #[test]
    fn keeps_inner_punctuation() {
        assert_eq!(tokenize("don't e-mail 3.14."), vec!["don't", "e-mail", "3.14", "."]);
    }

    #[test]
    fn all_punct_chunk() {
        assert_eq!(tokenize("..."), vec![".", ".", "."]);
        assert!(tokenize("   \n\t").is_empty());
    }

    #[test]
    fn whitespace_count() {
        assert_eq!(whitespace_tokens("a b  c\n"), 3);
        assert_eq!(whitespace_tokens(""), 0);
    }
}
