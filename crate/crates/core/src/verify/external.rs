//! Subprocess engine.
//!
//! The network is written as NNet and the property as JSON into a temporary
//! directory, the command template is run through `sh -c` with `{network}`
//! and `{property}` replaced by the file paths, and stdout must contain a
//! line `HOLDS` or `VIOLATED x1,x2,...`. The exit code must be 0.

use std::io::Read;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use super::{is_counterexample, EngineReport};
use crate::model::{save_nnet, Outcome, PropertyFile, VerificationProblem};

fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

/// Parse the engine's stdout.
pub fn parse_response(stdout: &str) -> Result<Outcome, String> {
    for line in stdout.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if line == "HOLDS" {
            return Ok(Outcome::Holds);
        }
        if let Some(rest) = line.strip_prefix("VIOLATED") {
            let x = rest
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad counterexample entry {t:?}: {e}")))
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(Outcome::Violated { counterexample: x });
        }
    }
    Err(format!("no HOLDS/VIOLATED line in output {:?}", stdout.trim()))
}

pub fn external_verify(problem: &VerificationProblem, command: &str, deadline: Option<Instant>) -> EngineReport {
    EngineReport::new(match run(problem, command, deadline) {
        Ok(Outcome::Violated { counterexample }) => {
            if is_counterexample(problem, &counterexample) {
                Outcome::Violated { counterexample }
            } else {
                Outcome::unknown(format!("invalid counterexample {counterexample:?}"))
            }
        }
        Ok(outcome) => outcome,
        Err(reason) => Outcome::unknown(reason),
    })
}

fn run(problem: &VerificationProblem, command: &str, deadline: Option<Instant>) -> Result<Outcome, String> {
    let dir = tempfile::tempdir().map_err(|e| format!("temp dir: {e}"))?;
    let net_path = dir.path().join("network.nnet");
    let prop_path = dir.path().join("property.json");
    save_nnet(&problem.network, &net_path).map_err(|e| e.to_string())?;
    let prop = serde_json::to_string_pretty(&PropertyFile::from_problem(problem)).map_err(|e| e.to_string())?;
    std::fs::write(&prop_path, prop).map_err(|e| e.to_string())?;
    let cmd = command
        .replace("{network}", &shell_quote(&net_path.to_string_lossy()))
        .replace("{property}", &shell_quote(&prop_path.to_string_lossy()));

    let mut child = Command::new("sh")
        .arg("-c")
        .arg(&cmd)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| format!("could not start engine: {e}"))?;
    let mut stdout = child.stdout.take().expect("piped stdout");
    let mut stderr = child.stderr.take().expect("piped stderr");
    let out_reader = std::thread::spawn(move || {
        let mut s = String::new();
        stdout.read_to_string(&mut s).map(|_| s)
    });
    let err_reader = std::thread::spawn(move || {
        let mut s = String::new();
        stderr.read_to_string(&mut s).map(|_| s)
    });
    let status = loop {
        if let Some(status) = child.try_wait().map_err(|e| e.to_string())? {
            break status;
        }
        if deadline.is_some_and(|d| Instant::now() >= d) {
            let _ = child.kill();
            let _ = child.wait();
            return Err("timeout".into());
        }
        std::thread::sleep(Duration::from_millis(5));
    };
    let out = out_reader.join().map_err(|_| "stdout reader panicked")?.map_err(|e| e.to_string())?;
    let err = err_reader.join().map_err(|_| "stderr reader panicked")?.unwrap_or_default();
    if !status.success() {
        return Err(format!("engine exited with {status}: {}", err.trim()));
    }
    parse_response(&out)
}
