//! Line-delimited JSON protocol spoken by external models over stdin/stdout.
//!
//! ```text
//! -> {"op": "hello"}
//! <- {"input_dim": 2, "num_classes": 2}
//! -> {"id": 1, "op": "predict", "inputs": [[0.1, 0.2], [0.3, 0.4]]}
//! <- {"id": 1, "labels": [0, 1]}
//! <- {"id": 2, "error": "input 0 has dimension 3, expected 2"}
//! ```
//!
//! Responses echo the request id and may arrive out of order.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::Classifier;
use crate::perturbation::InputVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Request {
    Hello,
    Predict { id: u64, inputs: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Handshake {
    pub input_dim: usize,
    pub num_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelsResponse {
    pub id: u64,
    pub labels: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
    pub error: String,
}

/// Anything a model may send back after the handshake.
#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    Labels(LabelsResponse),
    Error(ErrorResponse),
}

impl Reply {
    pub fn parse(line: &str) -> Result<Reply, String> {
        let value: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        if value.get("error").is_some() {
            serde_json::from_value(value)
                .map(Reply::Error)
                .map_err(|e| e.to_string())
        } else {
            serde_json::from_value(value)
                .map(Reply::Labels)
                .map_err(|e| e.to_string())
        }
    }

    pub fn id(&self) -> Option<u64> {
        match self {
            Reply::Labels(r) => Some(r.id),
            Reply::Error(r) => r.id,
        }
    }
}

/// First `max` characters of a payload, for error messages.
pub fn excerpt(line: &str, max: usize) -> String {
    let mut out: String = line.chars().take(max).collect();
    if line.chars().count() > max {
        out.push_str("...");
    }
    out
}

fn write_line<W: Write, T: Serialize>(out: &mut W, msg: &T) -> io::Result<()> {
    serde_json::to_writer(&mut *out, msg)?;
    out.write_all(b"\n")?;
    out.flush()
}

fn answer(model: &dyn Classifier, id: u64, inputs: Vec<Vec<f64>>) -> Result<Vec<i64>, String> {
    let batch = inputs
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            if v.len() != model.input_dim() {
                return Err(format!(
                    "input {i} has dimension {}, expected {}",
                    v.len(),
                    model.input_dim()
                ));
            }
            InputVector::new(v).map_err(|e| format!("input {i}: {e}"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let labels = model
        .predict_batch(&batch)
        .map_err(|e| format!("request {id}: {e}"))?;
    Ok(labels.into_iter().map(|l| l as i64).collect())
}

/// Serves `model` over the protocol until `input` reaches end of file.
///
/// Malformed requests get an error reply (carrying the id when one can be
/// recovered) and the loop keeps going.
pub fn serve<R: BufRead, W: Write>(model: &dyn Classifier, input: R, mut output: W) -> io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Request>(&line) {
            Ok(Request::Hello) => write_line(
                &mut output,
                &Handshake {
                    input_dim: model.input_dim(),
                    num_classes: model.num_classes(),
                },
            )?,
            Ok(Request::Predict { id, inputs }) => match answer(model, id, inputs) {
                Ok(labels) => write_line(&mut output, &LabelsResponse { id, labels })?,
                Err(error) => write_line(&mut output, &ErrorResponse { id: Some(id), error })?,
            },
            Err(e) => {
                let id = serde_json::from_str::<Value>(&line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(Value::as_u64));
                write_line(
                    &mut output,
                    &ErrorResponse {
                        id,
                        error: format!("malformed request: {e}"),
                    },
                )?
            }
        }
    }
    Ok(())
}
