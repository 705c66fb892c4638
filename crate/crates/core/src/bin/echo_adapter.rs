//! Reference adapter that answers every protocol op without a model.

use std::io::{BufRead, Write};

use panelvox::perception::adapter::{echo_manifest, echo_response};

fn main() -> std::io::Result<()> {
    let stdin = std::io::stdin();
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", serde_json::to_string(&echo_manifest()).expect("manifest serializes"))?;
    out.flush()?;
    for line in stdin.lock().lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        writeln!(out, "{}", echo_response(&line))?;
        out.flush()?;
    }
    Ok(())
}
