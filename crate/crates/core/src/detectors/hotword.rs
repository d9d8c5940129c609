use super::{DetectorError, Score};

pub const MAX_PHRASE_TOKENS: usize = 6;

const DEFAULT_LEXICON: &str = include_str!("../../assets/lexicon.txt");

/// Lowercase and delete every character that is neither alphanumeric nor
/// whitespace, so "Didn't?" becomes "didnt".
pub fn normalize_transcript(text: &str) -> String {
    text.chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect()
}

fn tokens(text: &str) -> Vec<String> {
    normalize_transcript(text).split_whitespace().map(str::to_string).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HotwordLexicon {
    phrases: Vec<Vec<String>>,
}

impl HotwordLexicon {
    pub fn new<I, S>(phrases: I) -> Result<Self, DetectorError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out = Vec::new();
        for phrase in phrases {
            let toks = tokens(phrase.as_ref());
            if toks.is_empty() || toks.len() > MAX_PHRASE_TOKENS {
                return Err(DetectorError::InvalidLexicon(format!(
                    "phrase {:?} must have 1..={MAX_PHRASE_TOKENS} tokens",
                    phrase.as_ref()
                )));
            }
            if !out.contains(&toks) {
                out.push(toks);
            }
        }
        if out.is_empty() {
            return Err(DetectorError::InvalidLexicon("lexicon is empty".into()));
        }
        Ok(Self { phrases: out })
    }

    /// One phrase per line; blank lines and `#` comments ignored.
    pub fn from_text(text: &str) -> Result<Self, DetectorError> {
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn phrases(&self) -> impl Iterator<Item = String> + '_ {
        self.phrases.iter().map(|p| p.join(" "))
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    pub fn matches(&self, transcript: &str) -> bool {
        let toks = tokens(transcript);
        self.phrases
            .iter()
            .any(|p| toks.windows(p.len()).any(|w| w == p.as_slice()))
    }
}

impl Default for HotwordLexicon {
    fn default() -> Self {
        Self::from_text(DEFAULT_LEXICON).expect("bundled lexicon is valid")
    }
}

pub fn detect_hotword(transcript: &str, lexicon: &HotwordLexicon) -> Score {
    if lexicon.matches(transcript) {
        Score::ONE
    } else {
        Score::ZERO
    }
}
