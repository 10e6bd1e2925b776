//! Rule-based tokenizer: lowercase, split on whitespace and punctuation,
//! keep punctuation as tokens, keep `[bracketed]` placeholders intact.

/// A `[...]` run is kept whole when its inside is a non-empty run of ASCII
/// alphanumerics, `_` or `-`.
fn placeholder_len(chars: &[char]) -> Option<usize> {
    debug_assert_eq!(chars.first(), Some(&'['));
    let mut i = 1;
    while i < chars.len() {
        let c = chars[i];
        if c == ']' {
            return (i > 1).then_some(i + 1);
        }
        if !(c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return None;
        }
        i += 1;
    }
    None
}

pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut word = String::new();
    let mut i = 0;
    let flush = |word: &mut String, tokens: &mut Vec<String>| {
        if !word.is_empty() {
            tokens.push(std::mem::take(word));
        }
    };
    while i < chars.len() {
        let c = chars[i];
        if c.is_alphanumeric() {
            word.extend(c.to_lowercase());
            i += 1;
        } else if c.is_whitespace() {
            flush(&mut word, &mut tokens);
            i += 1;
        } else if c == '[' {
            flush(&mut word, &mut tokens);
            match placeholder_len(&chars[i..]) {
                Some(n) => {
                    let s: String = chars[i..i + n].iter().collect();
                    tokens.push(s.to_lowercase());
                    i += n;
                }
                None => {
                    tokens.push("[".to_string());
                    i += 1;
                }
            }
        } else {
            flush(&mut word, &mut tokens);
            tokens.push(c.to_string());
            i += 1;
        }
    }
    flush(&mut word, &mut tokens);
    tokens
}

fn is_closing_punct(t: &str) -> bool {
    matches!(t, "." | "," | "!" | "?" | ";" | ":" | ")" | "]" | "%" | "'")
}

fn is_opening_punct(t: &str) -> bool {
    matches!(t, "(" | "$" | "#")
}

/// Joins tokens with spaces, re-attaching punctuation to the previous word.
/// `[sent]` becomes a paragraph break.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    let mut glue_next = true;
    let mut sentence_start = true;
    for tok in tokens {
        let t = tok.as_ref();
        if t == super::SENT {
            let trimmed = out.trim_end().len();
            out.truncate(trimmed);
            if !out.is_empty() {
                out.push_str("\n\n");
            }
            glue_next = true;
            sentence_start = true;
            continue;
        }
        if !glue_next && !is_closing_punct(t) {
            out.push(' ');
        }
        if sentence_start && t.chars().next().is_some_and(char::is_alphabetic) {
            let mut cs = t.chars();
            let first = cs.next().expect("non-empty");
            out.extend(first.to_uppercase());
            out.push_str(cs.as_str());
        } else {
            out.push_str(t);
        }
        if matches!(t, "." | "!" | "?") {
            sentence_start = true;
        } else if t
            .chars()
            .next()
            .is_some_and(|c| c.is_alphanumeric() || c == '[')
        {
            sentence_start = false;
        }
        glue_next = is_opening_punct(t) || t == "'";
    }
    out
}
