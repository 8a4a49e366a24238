//! Newline-delimited JSON evaluation protocol, UTF-8, one object per line:
//!
//! ```text
//! request:  {"id": <uint64>, "op": "eval", "scheme": "<encoded scheme>"}
//! response: {"id": <uint64>, "g_val": <float in [0,1]>}
//! error:    {"id": <uint64>, "error": "<message>"}
//! ```
//!
//! The same schema runs over child-process standard streams and TCP byte
//! streams. Evaluators answer one request at a time; requests are matched to
//! responses solely by id.

use crate::error::Result;
use crate::scheme::ConnectionScheme;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::Arc;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRequest {
    pub id: u64,
    pub op: String,
    pub scheme: String,
}

/// A response line: either a value or an error, both carrying the request id.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EvalResponse {
    Value { id: u64, g_val: f64 },
    Error { id: u64, error: String },
}

impl EvalResponse {
    pub fn id(&self) -> u64 {
        match self {
            EvalResponse::Value { id, .. } => *id,
            EvalResponse::Error { id, .. } => *id,
        }
    }
}

/// Answer a single request line. Malformed requests produce an error response
/// with the id recovered from the line when possible, 0 otherwise.
pub fn handle_line<F>(line: &str, eval: &mut F) -> EvalResponse
where
    F: FnMut(&ConnectionScheme) -> Result<f64>,
{
    let fallback_id = serde_json::from_str::<serde_json::Value>(line)
        .ok()
        .and_then(|v| v.get("id").and_then(serde_json::Value::as_u64))
        .unwrap_or(0);
    let request: EvalRequest = match serde_json::from_str(line) {
        Ok(r) => r,
        Err(e) => {
            return EvalResponse::Error {
                id: fallback_id,
                error: format!("bad request: {e}"),
            }
        }
    };
    if request.op != "eval" {
        return EvalResponse::Error {
            id: request.id,
            error: format!("unsupported op {:?}", request.op),
        };
    }
    let scheme = match ConnectionScheme::decode(&request.scheme) {
        Ok(s) => s,
        Err(e) => {
            return EvalResponse::Error {
                id: request.id,
                error: format!("bad scheme: {e}"),
            }
        }
    };
    match eval(&scheme) {
        Ok(g_val) => EvalResponse::Value {
            id: request.id,
            g_val,
        },
        Err(e) => EvalResponse::Error {
            id: request.id,
            error: e.to_string(),
        },
    }
}

/// Serve requests line by line until the reader reaches end of input.
/// Every response is flushed immediately; no pipelining is assumed.
pub fn serve_lines<R, W, F>(reader: R, mut writer: W, mut eval: F) -> Result<()>
where
    R: BufRead,
    W: Write,
    F: FnMut(&ConnectionScheme) -> Result<f64>,
{
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = handle_line(&line, &mut eval);
        serde_json::to_writer(&mut writer, &response)?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
    Ok(())
}

/// Accept TCP connections forever, serving each on its own thread so that
/// independent connections make progress concurrently.
pub fn serve_tcp<F>(listener: TcpListener, eval: F) -> Result<()>
where
    F: Fn(&ConnectionScheme) -> Result<f64> + Send + Sync + 'static,
{
    let eval = Arc::new(eval);
    for stream in listener.incoming() {
        let stream = stream?;
        let eval = Arc::clone(&eval);
        std::thread::spawn(move || {
            let reader = BufReader::new(match stream.try_clone() {
                Ok(s) => s,
                Err(_) => return,
            });
            let _ = serve_lines(reader, stream, |s| eval(s));
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::sparsity_reward;

    fn half(_: &ConnectionScheme) -> Result<f64> {
        Ok(0.5)
    }

    #[test]
    fn echo_stub_returns_half() {
        let mut eval = half;
        let resp = handle_line(r#"{"id":7,"op":"eval","scheme":"1010"}"#, &mut eval);
        match resp {
            EvalResponse::Value { id, g_val } => {
                assert_eq!(id, 7);
                assert_eq!(g_val, 0.5);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sparsity_stub_matches_local_recomputation() {
        let mut eval = |s: &ConnectionScheme| Ok(sparsity_reward(s));
        let scheme = ConnectionScheme::decode("110000").unwrap();
        let resp = handle_line(
            &format!(r#"{{"id":1,"op":"eval","scheme":"{}"}}"#, scheme.encode()),
            &mut eval,
        );
        match resp {
            EvalResponse::Value { g_val, .. } => {
                assert_eq!(g_val, sparsity_reward(&scheme));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unsupported_op_is_an_error_response() {
        let resp = handle_line(r#"{"id":3,"op":"train","scheme":"10"}"#, &mut half);
        assert!(matches!(resp, EvalResponse::Error { id: 3, .. }));
    }

    #[test]
    fn bad_scheme_is_an_error_response() {
        let resp = handle_line(r#"{"id":4,"op":"eval","scheme":"10x"}"#, &mut half);
        assert!(matches!(resp, EvalResponse::Error { id: 4, .. }));
    }

    #[test]
    fn malformed_json_recovers_id_when_present() {
        let resp = handle_line(r#"{"id":9,"op":}"#, &mut half);
        assert!(matches!(resp, EvalResponse::Error { id: 0, .. }));
        let resp = handle_line(r#"{"id":9}"#, &mut half);
        assert!(matches!(resp, EvalResponse::Error { id: 9, .. }));
    }

    #[test]
    fn serve_lines_round_trip() {
        let input = "{\"id\":1,\"op\":\"eval\",\"scheme\":\"10\"}\n\n{\"id\":2,\"op\":\"eval\",\"scheme\":\"11\"}\n";
        let mut output = Vec::new();
        serve_lines(input.as_bytes(), &mut output, |s| Ok(sparsity_reward(s))).unwrap();
        let lines: Vec<&str> = std::str::from_utf8(&output).unwrap().trim().lines().collect();
        assert_eq!(lines.len(), 2);
        let first: EvalResponse = serde_json::from_str(lines[0]).unwrap();
        let second: EvalResponse = serde_json::from_str(lines[1]).unwrap();
        assert!(matches!(first, EvalResponse::Value { id: 1, g_val } if g_val == 0.5));
        assert!(matches!(second, EvalResponse::Value { id: 2, g_val } if g_val == 0.0));
    }

    #[test]
    fn response_serialization_shape() {
        let value = EvalResponse::Value { id: 5, g_val: 0.25 };
        assert_eq!(serde_json::to_string(&value).unwrap(), r#"{"id":5,"g_val":0.25}"#);
        let error = EvalResponse::Error {
            id: 6,
            error: "boom".into(),
        };
        assert_eq!(serde_json::to_string(&error).unwrap(), r#"{"id":6,"error":"boom"}"#);
    }
}
