//! Lexical normalization shared by the oracle scorer and the n-gram filter.

/// Lowercases, drops every character that is neither alphanumeric nor
/// whitespace, and splits on whitespace.
///
/// Punctuation is removed rather than replaced, so `"4-0"` becomes `"40"` and
/// `"England's"` becomes `"englands"`.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    let mut cleaned = String::with_capacity(text.len());
    for c in text.chars() {
        if c.is_whitespace() {
            cleaned.push(' ');
        } else if c.is_alphanumeric() {
            cleaned.extend(c.to_lowercase());
        }
    }
    cleaned.split_whitespace().map(str::to_owned).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_case_and_punctuation() {
        assert_eq!(normalize_tokens("The price is low."), vec!["the", "price", "is", "low"]);
        assert_eq!(normalize_tokens("England's 4-0 win"), vec!["englands", "40", "win"]);
    }

    #[test]
    fn collapses_whitespace() {
        assert_eq!(normalize_tokens("  a \n\t b  "), vec!["a", "b"]);
        assert!(normalize_tokens(" ... !? ").is_empty());
    }
}
