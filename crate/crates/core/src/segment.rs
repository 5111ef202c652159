//! Rule-based sentence splitting.
//!
//! A boundary is placed after a run of terminal punctuation (`.`, `!`, `?`,
//! optionally followed by closing quotes or brackets) when it is followed by
//! whitespace and then an uppercase letter, a digit, or an opening quote.
//! A lone period after a known abbreviation or a single-letter initial never
//! ends a sentence, and a run such as `...` is treated as one unit.

use crate::types::Sentence;

const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "mt", "vs", "etc", "e.g", "i.e", "u.s", "u.k", "u.n", "inc",
    "ltd", "co", "corp", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec", "gen",
    "gov", "sen", "rep", "capt", "lt", "col", "sgt", "fig", "approx", "dept", "est", "cf", "al",
];

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | '\u{201d}' | '\u{2019}' | ')' | ']' | '\u{bb}')
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '\u{201c}' | '\u{2018}' | '(' | '[' | '\u{ab}')
}

fn starts_sentence(c: char) -> bool {
    c.is_uppercase() || c.is_ascii_digit() || is_opener(c)
}

/// True when the word ending right before `chars[dot]` is an abbreviation or
/// a single-letter initial.
fn is_abbreviation(chars: &[(usize, char)], dot: usize) -> bool {
    let mut start = dot;
    while start > 0 && !chars[start - 1].1.is_whitespace() {
        start -= 1;
    }
    let word: String =
        chars[start..dot].iter().map(|&(_, c)| c).skip_while(|&c| is_opener(c)).flat_map(char::to_lowercase).collect();
    let mut letters = word.chars();
    if let (Some(c), None) = (letters.next(), letters.next()) {
        if c.is_alphabetic() {
            return true;
        }
    }
    ABBREVIATIONS.contains(&word.as_str())
}

/// Splits `text` into sentences with byte spans into `text`.
///
/// Whitespace between sentences belongs to no sentence, so the gaps between
/// consecutive spans (and before the first / after the last) are all
/// whitespace. Whitespace-only input yields no sentences.
pub fn split_sentences(text: &str) -> Vec<Sentence> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let byte_at = |i: usize| chars.get(i).map_or(text.len(), |&(b, _)| b);
    let mut sentences = Vec::new();
    let mut push = |start: usize, end: usize| {
        sentences.push(Sentence { index: sentences.len(), text: text[start..end].to_owned(), span: start..end });
    };

    let Some(mut start) = chars.iter().position(|&(_, c)| !c.is_whitespace()) else {
        return Vec::new();
    };
    let mut i = start;
    while i < chars.len() {
        if !is_terminal(chars[i].1) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < chars.len() && is_terminal(chars[j].1) {
            j += 1;
        }
        let lone_period = j - i == 1 && chars[i].1 == '.';
        while j < chars.len() && is_closer(chars[j].1) {
            j += 1;
        }
        let mut k = j;
        while k < chars.len() && chars[k].1.is_whitespace() {
            k += 1;
        }
        let boundary =
            k > j && k < chars.len() && starts_sentence(chars[k].1) && !(lone_period && is_abbreviation(&chars, i));
        if boundary {
            push(byte_at(start), byte_at(j));
            start = k;
            i = k;
        } else {
            i = j;
        }
    }
    let end = text.trim_end().len();
    let start = byte_at(start);
    if start < end {
        push(start, end);
    }
    sentences
}
