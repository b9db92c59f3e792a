//! Trace serialization: JSON Lines, one event per line, deterministic field
//! order, value-sets as sorted arrays.

use std::io::{BufRead, Write};

use serde::Serialize;

use super::{Event, EventKind, ObjectId, OpKind, RetVal, Trace};
use crate::value::ValueArena;

#[derive(Debug, thiserror::Error)]
pub enum TraceIoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Serialize)]
struct EventJson {
    step: u64,
    actor: u32,
    kind: &'static str,
    object: String,
    op: &'static str,
    args: Vec<serde_json::Value>,
    ret: serde_json::Value,
}

fn ret_to_json(ret: Option<RetVal>, arena: &ValueArena) -> serde_json::Value {
    match ret {
        None => serde_json::Value::Null,
        Some(RetVal::Ack) => serde_json::Value::String("ACK".into()),
        Some(RetVal::Val(v)) => arena.to_json(v),
    }
}

pub fn write_jsonl<W: Write>(
    trace: &Trace,
    arena: &ValueArena,
    mut out: W,
) -> Result<(), TraceIoError> {
    for ev in &trace.events {
        let line = EventJson {
            step: ev.step,
            actor: ev.actor,
            kind: ev.kind.as_str(),
            object: ev.object.to_string(),
            op: ev.op.as_str(),
            args: ev.args.iter().map(|&v| arena.to_json(v)).collect(),
            ret: ret_to_json(ev.ret, arena),
        };
        serde_json::to_writer(&mut out, &line).map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn trace_to_string(trace: &Trace, arena: &ValueArena) -> String {
    let mut buf = Vec::new();
    write_jsonl(trace, arena, &mut buf).expect("in-memory write cannot fail");
    String::from_utf8(buf).expect("traces are utf-8")
}

/// Reads a JSONL trace, interning values into `arena`. The process count is
/// inferred from scan widths (falling back to the largest actor index).
pub fn read_jsonl<R: BufRead>(reader: R, arena: &mut ValueArena) -> Result<Trace, TraceIoError> {
    let mut events = Vec::new();
    let mut max_actor = 0u32;
    let mut n_from_scan = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse = |msg: String| TraceIoError::Parse {
            line: idx + 1,
            msg,
        };
        let v: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| parse(e.to_string()))?;
        let get = |key: &str| {
            v.get(key)
                .cloned()
                .ok_or_else(|| parse(format!("missing field {key}")))
        };
        let step = get("step")?
            .as_u64()
            .ok_or_else(|| parse("step must be an integer".into()))?;
        let actor = get("actor")?
            .as_u64()
            .ok_or_else(|| parse("actor must be an integer".into()))? as u32;
        let kind_str = get("kind")?;
        let kind_str = kind_str
            .as_str()
            .ok_or_else(|| parse("kind must be a string".into()))?
            .to_string();
        let kind: EventKind = serde_json::from_value(serde_json::Value::String(kind_str.clone()))
            .map_err(|_| parse(format!("unknown kind {kind_str}")))?;
        let object_str = get("object")?;
        let object_str = object_str
            .as_str()
            .ok_or_else(|| parse("object must be a string".into()))?;
        let object = ObjectId::parse(object_str)
            .ok_or_else(|| parse(format!("unknown object {object_str}")))?;
        let op_str = get("op")?;
        let op_str = op_str
            .as_str()
            .ok_or_else(|| parse("op must be a string".into()))?;
        let op = OpKind::parse(op_str).ok_or_else(|| parse(format!("unknown op {op_str}")))?;
        let args = match get("args")? {
            serde_json::Value::Array(items) => items
                .iter()
                .map(|item| arena.from_json(item).map_err(|e| parse(e.to_string())))
                .collect::<Result<Vec<_>, _>>()?,
            _ => return Err(parse("args must be an array".into())),
        };
        let ret = match get("ret")? {
            serde_json::Value::Null => None,
            serde_json::Value::String(s) if s == "ACK" => Some(RetVal::Ack),
            other => Some(RetVal::Val(
                arena.from_json(&other).map_err(|e| parse(e.to_string()))?,
            )),
        };
        if kind == EventKind::Scan {
            if let Some(RetVal::Val(v)) = ret {
                if let Some(items) = arena.as_tuple(v) {
                    n_from_scan = Some(items.len());
                }
            }
        }
        max_actor = max_actor.max(actor);
        events.push(Event {
            step,
            actor,
            kind,
            object,
            op,
            args,
            ret,
        });
    }
    let n = n_from_scan.unwrap_or(max_actor as usize + 1);
    Ok(Trace {
        events,
        n,
        truncated: false,
    })
}
