/// Which splitting rules [`tokenize`] applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenizeMode {
    /// Split on punctuation and whitespace, then on camelCase boundaries.
    Code,
    /// Lowercased word tokens; punctuation dropped.
    Summary,
}

pub fn tokenize(text: &str, mode: TokenizeMode) -> Vec<String> {
    let words = text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty());
    match mode {
        TokenizeMode::Summary => words.map(str::to_lowercase).collect(),
        TokenizeMode::Code => words.flat_map(split_camel).collect(),
    }
}

/// Splits one alphanumeric word on case boundaries and lowercases the
/// pieces: `indexOf` → `index of`, `HTMLParser` → `html parser`.
pub fn split_camel(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..chars.len() {
        let (prev, cur) = (chars[i - 1], chars[i]);
        let next_lower = chars.get(i + 1).is_some_and(|c| c.is_lowercase());
        let boundary = cur.is_uppercase()
            && (prev.is_lowercase() || prev.is_numeric() || (prev.is_uppercase() && next_lower));
        if boundary {
            out.push(chars[start..i].iter().collect::<String>().to_lowercase());
            start = i;
        }
    }
    if start < chars.len() {
        out.push(chars[start..].iter().collect::<String>().to_lowercase());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn code(s: &str) -> Vec<String> {
        tokenize(s, TokenizeMode::Code)
    }

    #[test]
    fn method_signature() {
        assert_eq!(code("sendGuess(String guess)"), ["send", "guess", "string", "guess"]);
    }

    #[test]
    fn empty_input() {
        assert!(code("").is_empty());
        assert!(tokenize("", TokenizeMode::Summary).is_empty());
    }

    #[test]
    fn camel_and_snake() {
        assert_eq!(code("indexOf"), ["index", "of"]);
        assert_eq!(code("HTMLParser"), ["html", "parser"]);
        assert_eq!(code("MAX_VALUE"), ["max", "value"]);
        assert_eq!(code("md5Hash"), ["md5", "hash"]);
        assert_eq!(code("x = a.b[i] + 1;"), ["x", "a", "b", "i", "1"]);
    }

    #[test]
    fn summary_mode_keeps_words() {
        assert_eq!(
            tokenize("Sends a guess to the server.", TokenizeMode::Summary),
            ["sends", "a", "guess", "to", "the", "server"]
        );
        assert_eq!(tokenize("indexOf, e.g.", TokenizeMode::Summary), ["indexof", "e", "g"]);
    }

    proptest! {
        #[test]
        fn code_mode_is_idempotent(s in "[ -~]{0,40}") {
            let once = code(&s);
            let twice = code(&once.join(" "));
            prop_assert_eq!(once, twice);
        }
    }
}
