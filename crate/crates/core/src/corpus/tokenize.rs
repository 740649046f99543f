//! Deterministic tokenizer shared by the encoder, the lexicon scorer and LDA.

pub const URL_TOKEN: &str = "<url>";
pub const USER_TOKEN: &str = "<user>";
pub const SEP_TOKEN: &str = "<sep>";

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation() || matches!(c, '“' | '”' | '‘' | '’' | '…' | '«' | '»' | '¿' | '¡' | '–' | '—')
}

fn is_url(s: &str) -> bool {
    let lower = s.to_ascii_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}

fn is_mention(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next() == Some('@') && {
        let rest = chars.as_str();
        !rest.is_empty() && rest.chars().all(|c| c.is_alphanumeric() || c == '_')
    }
}

/// Lowercases, splits on whitespace and peels leading/trailing punctuation
/// off each chunk as one-character tokens. URLs become `<url>` and
/// `@name` mentions become `<user>`.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let chunk = chunk.to_lowercase();
        let chars: Vec<char> = chunk.chars().collect();

        // '@' stays attached so mentions can be recognized.
        let lead = chars.iter().take_while(|&&c| is_punct(c) && c != '@').count();
        let trail = chars[lead..].iter().rev().take_while(|&&c| is_punct(c)).count();
        let core: String = chars[lead..chars.len() - trail].iter().collect();

        out.extend(chars[..lead].iter().map(|c| c.to_string()));
        if !core.is_empty() {
            if is_url(&core) {
                out.push(URL_TOKEN.to_string());
            } else if is_mention(&core) {
                out.push(USER_TOKEN.to_string());
            } else {
                let inner: Vec<char> = core.chars().collect();
                // a lone '@' or "@@x" is punctuation, not a mention
                let at = inner.iter().take_while(|&&c| c == '@').count();
                out.extend(inner[..at].iter().map(|c| c.to_string()));
                if at < inner.len() {
                    out.push(inner[at..].iter().collect());
                }
            }
        }
        // trailing punctuation in reading order
        out.extend(chars[chars.len() - trail..].iter().map(|c| c.to_string()));
    }
    out
}
