use super::stopwords::is_stopword;

/// Lowercases, strips punctuation, splits on whitespace and drops
/// stopwords and single-character tokens. Token order is preserved.
///
/// Apostrophes are deleted (`zoodle's` → `zoodles`); every other
/// non-alphanumeric character separates tokens.
pub fn tokenize_and_clean(text: &str) -> Vec<String> {
    let normalized: String = text
        .chars()
        .filter(|c| !matches!(c, '\'' | '\u{2019}'))
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    normalized
        .split_whitespace()
        .filter(|t| t.chars().count() >= 2 && !is_stopword(t))
        .map(str::to_string)
        .collect()
}
