use serde::{Deserialize, Serialize};
use std::io::Write;

/// One rejected or adjusted input row. Emitted as JSON lines so runs can be
/// diffed and grepped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// 1-based data row number (header excluded); 0 when not row-scoped.
    pub row: usize,
    pub code: String,
    pub detail: String,
}

impl Diagnostic {
    pub fn new(row: usize, code: &str, detail: impl Into<String>) -> Self {
        Diagnostic {
            row,
            code: code.to_string(),
            detail: detail.into(),
        }
    }
}

pub fn write_jsonl<W: Write>(mut w: W, diags: &[Diagnostic]) -> std::io::Result<()> {
    for d in diags {
        serde_json::to_writer(&mut w, d)?;
        writeln!(w)?;
    }
    Ok(())
}
