//! Rule-based classification of free-text agent replies.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// A forward verdict about the machines as shown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Machine {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InverseVerdict {
    /// "Choice 1" is the stronger evidence.
    First,
    Second,
    Tie,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InverseParse {
    Verdict(InverseVerdict),
    NeedsReprompt,
}

static MACHINE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\bmachine\s+([ab])\b").unwrap());
static LONE_LETTER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b([AB])\b").unwrap());
static CHOICE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\bchoice\s*#?\s*([12])\b").unwrap());
static TIE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(tie|equally|equal|same|neither|no difference|indistinguishable)\b").unwrap()
});
static RATIO: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(\d+(?:\.\d+)?)\s*%?\s*/\s*(\d+(?:\.\d+)?)\s*%?").unwrap());

fn machine_of(s: &str) -> Machine {
    if s.eq_ignore_ascii_case("a") {
        Machine::A
    } else {
        Machine::B
    }
}

fn strip_decoration(s: &str) -> &str {
    s.trim()
        .trim_matches(|c: char| matches!(c, '.' | '"' | '\'' | '*' | ':' | '`' | '(' | ')'))
        .trim()
}

/// Classifies a forward reply: exact letter, then the last "Machine A/B",
/// then a capital A or B on the final line.
pub fn parse_forward(text: &str) -> Option<Machine> {
    let bare = strip_decoration(text);
    if bare == "A" || bare == "B" {
        return Some(machine_of(bare));
    }
    if let Some(c) = MACHINE.captures_iter(text).last() {
        return Some(machine_of(&c[1]));
    }
    let last_line = text.lines().rev().find(|l| !l.trim().is_empty())?;
    LONE_LETTER
        .captures_iter(last_line)
        .last()
        .map(|c| machine_of(&c[1]))
}

fn single_choice(text: &str) -> Option<InverseVerdict> {
    let mut one = false;
    let mut two = false;
    for c in CHOICE.captures_iter(text) {
        if &c[1] == "1" {
            one = true;
        } else {
            two = true;
        }
    }
    match (one, two) {
        (true, false) => Some(InverseVerdict::First),
        (false, true) => Some(InverseVerdict::Second),
        _ => None,
    }
}

/// Classifies an inverse reply. Replies that mention both choices are
/// decided by their final sentence; otherwise a re-prompt is requested.
pub fn parse_inverse(text: &str) -> InverseParse {
    let mentions = CHOICE.captures_iter(text).count();
    if mentions == 0 {
        return if TIE.is_match(text) {
            InverseParse::Verdict(InverseVerdict::Tie)
        } else {
            InverseParse::NeedsReprompt
        };
    }
    if let Some(v) = single_choice(text) {
        return InverseParse::Verdict(v);
    }
    let last = text
        .split_inclusive(['.', '!', '?', '\n'])
        .map(str::trim)
        .rev()
        .find(|s| !s.is_empty())
        .unwrap_or_default();
    if let Some(v) = single_choice(last) {
        return InverseParse::Verdict(v);
    }
    if TIE.is_match(last) {
        return InverseParse::Verdict(InverseVerdict::Tie);
    }
    InverseParse::NeedsReprompt
}

fn number_in(v: &serde_json::Value) -> Option<f64> {
    match v {
        serde_json::Value::Number(n) => n.as_f64(),
        serde_json::Value::String(s) => s.trim().trim_end_matches('%').trim().parse().ok(),
        _ => None,
    }
}

fn share(a: f64, b: f64) -> Option<f64> {
    if a < 0.0 || b < 0.0 || a + b <= 0.0 {
        None
    } else {
        Some(a / (a + b))
    }
}

/// Extracts P(Machine A) from a JSON object with A and B keys, or from an
/// `a/b` ratio such as "50/50".
pub fn parse_proportion(text: &str) -> Option<f64> {
    if let (Some(start), Some(end)) = (text.find('{'), text.rfind('}')) {
        if start < end {
            if let Ok(serde_json::Value::Object(map)) = serde_json::from_str(&text[start..=end]) {
                let pick = |letter: &str| {
                    map.iter().find_map(|(k, v)| {
                        let k = k.trim();
                        let hit = k.eq_ignore_ascii_case(letter)
                            || k.to_ascii_lowercase().ends_with(&format!(" {}", letter.to_ascii_lowercase()));
                        if hit {
                            number_in(v)
                        } else {
                            None
                        }
                    })
                };
                if let (Some(a), Some(b)) = (pick("A"), pick("B")) {
                    return share(a, b);
                }
            }
        }
    }
    let c = RATIO.captures_iter(text).last()?;
    share(c[1].parse().ok()?, c[2].parse().ok()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_cascade() {
        assert_eq!(parse_forward("A"), Some(Machine::A));
        assert_eq!(parse_forward(" B. "), Some(Machine::B));
        assert_eq!(
            parse_forward("Machine A is safe, but the EV of Machine B is higher... therefore the person chooses Machine B."),
            Some(Machine::B)
        );
        assert_eq!(parse_forward("Considering the risk.\nAnswer: A"), Some(Machine::A));
        assert_eq!(parse_forward("both seem fine"), None);
        // an article is not a verdict
        assert_eq!(parse_forward("a tough call"), None);
    }

    #[test]
    fn inverse_cases() {
        use InverseParse::*;
        use InverseVerdict::*;
        assert_eq!(parse_inverse("Choice 2"), Verdict(Second));
        assert_eq!(parse_inverse("\"Choice 1\""), Verdict(First));
        assert_eq!(
            parse_inverse(
                "In Choice 1 the bag had black with others. In Choice 2 only black was chosen alone.\nOverall, so Choice 1 more strongly suggests it."
            ),
            Verdict(First)
        );
        assert_eq!(parse_inverse("they are equally informative"), Verdict(Tie));
        assert_eq!(parse_inverse("Choice 1 and Choice 2 both tell us something about it"), NeedsReprompt);
        assert_eq!(parse_inverse("hmm, hard to say"), NeedsReprompt);
    }

    #[test]
    fn proportions() {
        assert_eq!(parse_proportion("50/50"), Some(0.5));
        assert_eq!(parse_proportion(r#"{"Machine A": 70, "Machine B": 30}"#), Some(0.7));
        assert_eq!(parse_proportion(r#"Sure: {"A": "25%", "B": "75%"}"#), Some(0.25));
        assert_eq!(parse_proportion("60% / 40%"), Some(0.6));
        assert_eq!(parse_proportion("no idea"), None);
        assert_eq!(parse_proportion("0/0"), None);
    }
}
