use std::collections::HashSet;
use std::io;
use std::path::Path;

/// Words that mark a tweet as threatening. Matching is exact and
/// case-sensitive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordList {
    words: HashSet<String>,
}

const DEFAULT_WORDS: &[&str] = &[
    "AK47",
    "AR10",
    "AR15",
    "SKS",
    "GLOCK17",
    "GLOCK21",
    "M16",
    "M4",
    "UZI",
    "gun",
    "guns",
    "rifle",
    "pistol",
    "shotgun",
    "grenade",
    "bomb",
    "explosive",
    "shoot",
    "shooting",
    "kill",
    "attack",
    "knife",
    "stab",
    "ammo",
];

impl WordList {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        WordList {
            words: words.into_iter().map(Into::into).collect(),
        }
    }

    /// One word per line. Blank lines and lines starting with `#` are skipped.
    pub fn from_file(path: &Path) -> io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        ))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// The words in sorted order.
    pub fn words(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.words.iter().map(String::as_str).collect();
        v.sort_unstable();
        v
    }

    /// Counts the space-separated tokens of `text` that are listed once
    /// commas and periods are removed. Repeats count every time.
    pub fn rating(&self, text: &str) -> i64 {
        text.split(' ')
            .filter(|tok| {
                let stripped: String = tok.chars().filter(|c| !matches!(c, ',' | '.')).collect();
                self.contains(&stripped)
            })
            .count() as i64
    }
}

impl Default for WordList {
    fn default() -> Self {
        Self::new(DEFAULT_WORDS.iter().copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str =
        "Saul Goodman builds SKS, and Todd Alquist fires AK47, but Skyler White sells Cabbage.";

    #[test]
    fn sample_tweet_rates_two() {
        let wl = WordList::default();
        assert!(!wl.contains("Cabbage"));
        assert_eq!(wl.rating(SAMPLE), 2);
    }

    #[test]
    fn edge_cases() {
        let wl = WordList::new(["AK47"]);
        assert_eq!(wl.rating(""), 0);
        assert_eq!(wl.rating("AK47, AK47."), 2);
        assert_eq!(wl.rating("ak47"), 0);
        assert_eq!(wl.rating("AK47  AK47"), 2);
    }

    #[test]
    fn file_format() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("words.txt");
        std::fs::write(&p, "# weapons\nSKS\n\n  AK47 \n").unwrap();
        let wl = WordList::from_file(&p).unwrap();
        assert_eq!(wl.words(), ["AK47", "SKS"]);
    }
}
