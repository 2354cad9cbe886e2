//! Terminal session source: prompts on a writer, commands from a reader.

use std::io::{BufRead, Write};

use pmx_core::session::{prompt_lines, CommandSource, Prompt, Response};

/// Reads one command per line; prompts, responses and notes are written
/// to `output`.
pub struct StdioSource<R, W> {
    input: R,
    output: W,
}

impl<R: BufRead, W: Write> StdioSource<R, W> {
    pub fn new(input: R, output: W) -> Self {
        StdioSource {
            input,
            output,
        }
    }
}

impl<R: BufRead, W: Write> CommandSource for StdioSource<R, W> {
    fn next_line(&mut self, prompt: &Prompt) -> Option<String> {
        for l in prompt_lines(prompt) {
            let _ = writeln!(self.output, "{l}");
        }
        let _ = write!(self.output, "pmx> ");
        let _ = self.output.flush();
        let mut line = String::new();
        match self.input.read_line(&mut line) {
            Ok(0) | Err(_) => None,
            Ok(_) => {
                Some(line.trim_end_matches(['\r', '\n']).to_string())
            }
        }
    }

    fn respond(&mut self, r: &Response) {
        for l in &r.lines {
            let _ = writeln!(self.output, "{l}");
        }
    }

    fn note(&mut self, line: &str) {
        let _ = writeln!(self.output, "  {line}");
    }
}
