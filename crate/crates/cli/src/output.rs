//! Rendering and writing of command results.

use std::fmt::Write as _;
use std::io::Write as _;

use serde::Serialize;

use crate::{Failure, Format, OutputArgs};

/// `{:.16e}`: 17 significant digits, enough to round-trip an `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV text with a leading `# config:` line.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new<C: Serialize>(config: &C, header: &[&str]) -> Self {
        let json = serde_json::to_string(config).expect("config serializes");
        let mut text = String::new();
        writeln!(text, "# config: {json}").unwrap();
        writeln!(text, "{}", header.join(",")).unwrap();
        Self { text }
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, cells: I) {
        let cells: Vec<String> = cells.into_iter().collect();
        writeln!(self.text, "{}", cells.join(",")).unwrap();
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("result serializes");
    s.push('\n');
    s
}

pub fn emit(
    out: &OutputArgs,
    default: Format,
    render: impl FnOnce(Format) -> String,
) -> Result<(), Failure> {
    let text = render(out.format.unwrap_or(default));
    match &out.output {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| Failure::io(format!("stdout: {e}")))
        }
        Some(path) => {
            std::fs::write(path, text).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
        }
    }
}
