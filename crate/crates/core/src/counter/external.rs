use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use num_bigint::BigUint;

use super::{CounterError, ModelCount};
use crate::logic::{emit_dimacs, Clause, CnfFormula, Literal, Position};

const PLACEHOLDER: &str = "{input}";

/// A whitespace-separated command template with one `{input}` placeholder,
/// e.g. `ganak {input}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalCommand {
    argv: Vec<String>,
}

impl ExternalCommand {
    pub fn new(template: &str) -> Result<Self, CounterError> {
        let found = template.matches(PLACEHOLDER).count();
        if found != 1 {
            return Err(CounterError::BadTemplate(found));
        }
        Ok(Self {
            argv: template.split_whitespace().map(str::to_string).collect(),
        })
    }

    pub fn template(&self) -> String {
        self.argv.join(" ")
    }

    pub(crate) fn count(
        &self,
        formula: &CnfFormula,
        condition: &Position,
        timeout: Option<Duration>,
    ) -> Result<ModelCount, CounterError> {
        let mut conditioned = formula.clone();
        for (var, value) in condition.iter() {
            let unit = Clause::new([Literal::new(var, value).expect("var >= 1")]).expect("unit");
            conditioned.push(unit);
        }
        let mut file = tempfile::Builder::new()
            .prefix("mutcoh-")
            .suffix(".cnf")
            .tempfile()?;
        file.write_all(emit_dimacs(&conditioned).as_bytes())?;
        file.flush()?;
        let path = file.path().to_string_lossy().into_owned();

        let args: Vec<String> = self
            .argv
            .iter()
            .map(|a| a.replace(PLACEHOLDER, &path))
            .collect();
        let mut child = Command::new(&args[0])
            .args(&args[1..])
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()?;

        let mut stdout = child.stdout.take().expect("piped");
        let mut stderr = child.stderr.take().expect("piped");
        let out_reader = std::thread::spawn(move || {
            let mut buf = String::new();
            stdout.read_to_string(&mut buf).map(|_| buf)
        });
        let err_reader = std::thread::spawn(move || {
            let mut buf = String::new();
            stderr.read_to_string(&mut buf).map(|_| buf)
        });

        let started = Instant::now();
        let status = loop {
            if let Some(status) = child.try_wait()? {
                break status;
            }
            if let Some(t) = timeout {
                if started.elapsed() >= t {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(CounterError::Timeout(t));
                }
            }
            std::thread::sleep(Duration::from_millis(2));
        };
        let stdout = out_reader.join().expect("reader thread")?;
        let stderr = err_reader.join().expect("reader thread")?;
        let captured = format!("{stdout}{stderr}");

        if !status.success() {
            return Err(CounterError::Backend {
                message: format!("`{}` exited with {status}", args.join(" ")),
                output: captured,
            });
        }
        parse_count(&stdout).map(ModelCount).ok_or(CounterError::Backend {
            message: "no line ending in a model count".into(),
            output: captured,
        })
    }
}

/// The last line whose final token is a decimal integer, e.g. `s mc 42` or
/// `c s exact arb int 42`.
fn parse_count(output: &str) -> Option<BigUint> {
    output.lines().rev().find_map(|line| {
        let token = line.split_whitespace().last()?;
        if token.bytes().all(|b| b.is_ascii_digit()) {
            token.parse().ok()
        } else {
            None
        }
    })
}
