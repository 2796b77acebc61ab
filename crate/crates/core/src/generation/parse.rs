//! Extraction of the Likert score from a model reply.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParseError {
    #[error("no `SCORE:` line in reply")]
    NoScoreLine,
    #[error("score `{0}` is not in the Likert domain")]
    OutOfDomainScore(String),
}

/// Parsed reply: the score and the free text that preceded the score line.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedReply {
    pub score: i64,
    pub text: String,
}

fn score_token(line: &str) -> Option<&str> {
    let line = line.trim().trim_matches(|c| c == '*' || c == '`' || c == '_').trim();
    let head = line.get(..6)?;
    if !head.eq_ignore_ascii_case("score:") {
        return None;
    }
    Some(line[6..].trim().trim_matches(|c| c == '*' || c == '`' || c == '_' || c == '.').trim())
}

/// Score on the last `SCORE: <token>` line; the token must be a member of
/// `domain`.
pub fn parse_score(raw: &str, domain: &[i64]) -> Result<i64, ParseError> {
    parse_reply(raw, domain).map(|r| r.score)
}

pub fn parse_reply(raw: &str, domain: &[i64]) -> Result<ParsedReply, ParseError> {
    let lines: Vec<&str> = raw.lines().collect();
    let (pos, token) = lines
        .iter()
        .enumerate()
        .rev()
        .find_map(|(i, l)| score_token(l).map(|t| (i, t)))
        .ok_or(ParseError::NoScoreLine)?;
    let score: i64 = token
        .parse()
        .map_err(|_| ParseError::OutOfDomainScore(token.to_string()))?;
    if !domain.contains(&score) {
        return Err(ParseError::OutOfDomainScore(token.to_string()));
    }
    let text = lines[..pos].join("\n").trim().to_string();
    Ok(ParsedReply { score, text })
}

/// Canonical score line, as requested by the formatting instructions.
pub fn format_score(score: i64) -> String {
    format!("SCORE: {score}")
}
