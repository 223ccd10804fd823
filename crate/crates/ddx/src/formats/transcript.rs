//! Transcript files: for each consultation a header line
//! `{consultation, turns}` followed by one line per turn.

use std::path::Path;

use serde::{Deserialize, Serialize};

use ddx_core::dialogue::{Transcript, Turn};

use super::push_json_line;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    consultation: String,
    turns: usize,
}

pub fn render_transcript(transcript: &Transcript, out: &mut String) {
    push_json_line(out, &Header { consultation: transcript.consultation_id.clone(), turns: transcript.turns.len() });
    for t in &transcript.turns {
        push_json_line(out, t);
    }
}

pub fn render_transcripts<'a>(transcripts: impl IntoIterator<Item = &'a Transcript>) -> String {
    let mut out = String::new();
    for t in transcripts {
        render_transcript(t, &mut out);
    }
    out
}

pub fn parse_transcripts(text: &str, path: &Path) -> Result<Vec<Transcript>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let mut out = Vec::new();
    while let Some((i, line)) = lines.next() {
        let header: Header =
            serde_json::from_str(line).map_err(|e| Error::format(path, i + 1, format!("bad consultation header: {e}")))?;
        let mut transcript = Transcript::new(header.consultation);
        for _ in 0..header.turns {
            let (j, line) = lines
                .next()
                .ok_or_else(|| Error::format(path, i + 1, format!("expected {} turns", header.turns)))?;
            let turn: Turn = serde_json::from_str(line).map_err(|e| Error::format(path, j + 1, e.to_string()))?;
            transcript.turns.push(turn);
        }
        out.push(transcript);
    }
    Ok(out)
}

pub fn save_transcripts<'a>(transcripts: impl IntoIterator<Item = &'a Transcript>, path: &Path) -> Result<()> {
    super::write(path, &render_transcripts(transcripts))
}

pub fn load_transcripts(path: &Path) -> Result<Vec<Transcript>> {
    parse_transcripts(&super::read(path)?, path)
}
