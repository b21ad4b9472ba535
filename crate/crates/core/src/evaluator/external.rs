//! Client side of the `gaia-eval` line protocol.
//!
//! The endpoint is a child process. It first prints
//! `{"protocol":"gaia-eval","version":1}`, then answers each request line on
//! stdin with exactly one response line on stdout:
//!
//! ```text
//! -> {"id":"r0","arch":{"depths":[3,4,6,3],"widths":[64,64,128,256,512],"scale":800},"fidelity":"fast","task":"coco"}
//! <- {"id":"r0","metric":41.2,"metric_name":"AP","cost_s":12.5}
//! <- {"id":"r0","error":"unknown task"}
//! ```
//!
//! Unknown fields are ignored. One malformed response line is tolerated per
//! request; the next line must be well-formed.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{EvalError, EvalRequest, EvalResult, Evaluator, Provenance};

pub const PROTOCOL_NAME: &str = "gaia-eval";
pub const PROTOCOL_VERSION: u64 = 1;

#[derive(Deserialize)]
struct Handshake {
    protocol: String,
    version: u64,
}

#[derive(Serialize)]
struct WireArch {
    depths: [u32; 4],
    widths: [u32; 5],
    scale: u32,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    id: &'a str,
    arch: WireArch,
    fidelity: &'a str,
    task: &'a str,
}

#[derive(Deserialize)]
struct WireResponse {
    id: String,
    metric: Option<f64>,
    metric_name: Option<String>,
    cost_s: Option<f64>,
    error: Option<String>,
}

pub(crate) fn encode_request(req: &EvalRequest) -> String {
    serde_json::to_string(&WireRequest {
        id: &req.id,
        arch: WireArch {
            depths: req.arch.depths,
            widths: req.arch.widths,
            scale: req.arch.scale,
        },
        fidelity: req.fidelity.as_str(),
        task: &req.task,
    })
    .expect("request serializes")
}

struct Endpoint {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl Endpoint {
    fn spawn(command: &str) -> Result<Self, EvalError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| EvalError::EndpointDown(format!("{command}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let mut ep = Self { child, stdin, stdout };
        let line = ep.read_line()?;
        let hs: Handshake =
            serde_json::from_str(&line).map_err(|_| EvalError::ProtocolError(format!("bad handshake {line:?}")))?;
        if hs.protocol != PROTOCOL_NAME || hs.version != PROTOCOL_VERSION {
            return Err(EvalError::ProtocolError(format!(
                "unsupported protocol {} v{}",
                hs.protocol, hs.version
            )));
        }
        Ok(ep)
    }

    fn read_line(&mut self) -> Result<String, EvalError> {
        let mut line = String::new();
        let n = self
            .stdout
            .read_line(&mut line)
            .map_err(|e| EvalError::EndpointDown(e.to_string()))?;
        if n == 0 {
            return Err(EvalError::EndpointDown("endpoint closed its output".into()));
        }
        Ok(line.trim_end().to_string())
    }

    fn call(&mut self, req: &EvalRequest) -> Result<EvalResult, EvalError> {
        let mut payload = encode_request(req);
        payload.push('\n');
        self.stdin
            .write_all(payload.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| EvalError::EndpointDown(e.to_string()))?;

        let mut line = self.read_line()?;
        let mut resp = serde_json::from_str::<WireResponse>(&line);
        if resp.is_err() {
            log::warn!("malformed response line {line:?}, reading one more");
            line = self.read_line()?;
            resp = serde_json::from_str::<WireResponse>(&line);
        }
        let resp = resp.map_err(|_| EvalError::ProtocolError(line.clone()))?;
        if resp.id != req.id {
            return Err(EvalError::ProtocolError(format!(
                "response id {:?} does not match request id {:?}",
                resp.id, req.id
            )));
        }
        if let Some(msg) = resp.error {
            return Err(EvalError::RemoteError(msg));
        }
        match (resp.metric, resp.cost_s) {
            (Some(metric), Some(cost_s)) if metric.is_finite() => Ok(EvalResult {
                id: resp.id,
                metric,
                metric_name: resp.metric_name.unwrap_or_else(|| "metric".into()),
                cost_s,
                provenance: Provenance::External,
            }),
            _ => Err(EvalError::ProtocolError(line)),
        }
    }
}

impl Drop for Endpoint {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// A pool of endpoint processes running one shell command.
pub struct ExecEvaluator {
    endpoints: Vec<Mutex<Endpoint>>,
}

impl ExecEvaluator {
    /// Spawns `processes` copies of `command` (run through `sh -c`) and
    /// completes each handshake.
    pub fn spawn(command: &str, processes: usize) -> Result<Self, EvalError> {
        let endpoints = (0..processes.max(1))
            .map(|_| Endpoint::spawn(command).map(Mutex::new))
            .collect::<Result<_, _>>()?;
        Ok(Self { endpoints })
    }
}

impl Evaluator for ExecEvaluator {
    fn evaluate(&self, req: &EvalRequest) -> Result<EvalResult, EvalError> {
        for ep in &self.endpoints {
            if let Ok(mut guard) = ep.try_lock() {
                return guard.call(req);
            }
        }
        let mut guard = self.endpoints[0]
            .lock()
            .map_err(|_| EvalError::EndpointDown("endpoint lock poisoned".into()))?;
        guard.call(req)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archspace::SubSpace;
    use crate::evaluator::Fidelity;

    #[test]
    fn request_wire_format() {
        let req = EvalRequest::new("r0", SubSpace::ar50().anchor, Fidelity::FastFinetune, "coco");
        assert_eq!(
            encode_request(&req),
            r#"{"id":"r0","arch":{"depths":[3,4,6,3],"widths":[64,64,128,256,512],"scale":560},"fidelity":"fast","task":"coco"}"#
        );
    }
}
