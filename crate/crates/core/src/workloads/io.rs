//! JSONL trace files: one header line, then one line per turn.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{Session, Trace, TraceAgent, Turn};
use crate::error::{Error, Result};
use crate::types::Token;

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum Line {
    Header {
        version: u32,
        name: String,
        template: Vec<u32>,
        agents: Vec<HeaderAgent>,
    },
    Turn {
        session: u32,
        turn_index: u32,
        agent: String,
        history_tokens: u32,
        decode_tokens: u32,
        #[serde(default)]
        tool_ms: u32,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderAgent {
    label: String,
    anchor: Vec<u32>,
}

pub fn write_trace<W: Write>(trace: &Trace, mut w: W) -> Result<()> {
    let header = Line::Header {
        version: TRACE_SCHEMA_VERSION,
        name: trace.name.clone(),
        template: trace.template.iter().map(|t| t.0).collect(),
        agents: trace
            .agents
            .iter()
            .map(|a| HeaderAgent { label: a.label.clone(), anchor: a.anchor.iter().map(|t| t.0).collect() })
            .collect(),
    };
    let io = |e: serde_json::Error| Error::Io(e.to_string());
    serde_json::to_writer(&mut w, &header).map_err(io)?;
    w.write_all(b"\n")?;
    for t in trace.turns() {
        let line = Line::Turn {
            session: t.session,
            turn_index: t.turn_index,
            agent: trace.agents[t.agent].label.clone(),
            history_tokens: t.history_tokens,
            decode_tokens: t.decode_tokens,
            tool_ms: t.tool_ms,
        };
        serde_json::to_writer(&mut w, &line).map_err(io)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Parses a trace file. Errors carry the 1-based line number.
pub fn read_trace<R: BufRead>(r: R) -> Result<Trace> {
    let mut trace: Option<Trace> = None;
    for (i, line) in r.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line =
            serde_json::from_str(&line).map_err(|e| Error::Parse { line: lineno, message: e.to_string() })?;
        let perr = |message: String| Error::Parse { line: lineno, message };
        match parsed {
            Line::Header { version, name, template, agents } => {
                if trace.is_some() {
                    return Err(perr("second header".into()));
                }
                if version != TRACE_SCHEMA_VERSION {
                    return Err(perr(format!("unsupported trace version {version}")));
                }
                trace = Some(Trace {
                    name,
                    template: template.into_iter().map(Token).collect(),
                    agents: agents
                        .into_iter()
                        .map(|a| TraceAgent { label: a.label, anchor: a.anchor.into_iter().map(Token).collect() })
                        .collect(),
                    sessions: Vec::new(),
                });
            }
            Line::Turn { session, turn_index, agent, history_tokens, decode_tokens, tool_ms } => {
                let t = trace.as_mut().ok_or_else(|| perr("turn before header".into()))?;
                let a = t
                    .agents
                    .iter()
                    .position(|x| x.label == agent)
                    .ok_or_else(|| perr(format!("unknown agent {agent}")))?;
                if t.sessions.last().is_none_or(|s| s.id != session) {
                    if t.sessions.iter().any(|s| s.id == session) {
                        return Err(perr(format!("session {session} is not contiguous")));
                    }
                    t.sessions.push(Session { id: session, turns: Vec::new() });
                }
                let s = t.sessions.last_mut().expect("just ensured");
                if turn_index as usize != s.turns.len() {
                    return Err(perr(format!(
                        "session {session}: expected turn_index {}, got {turn_index}",
                        s.turns.len()
                    )));
                }
                if decode_tokens == 0 {
                    return Err(perr("decode_tokens must be positive".into()));
                }
                s.turns.push(Turn {
                    session,
                    turn_index,
                    agent: a,
                    template_tokens: t.template.len() as u32,
                    anchor_tokens: t.agents[a].anchor.len() as u32,
                    history_tokens,
                    decode_tokens,
                    tool_ms,
                });
            }
        }
    }
    let trace = trace.ok_or(Error::Parse { line: 1, message: "missing header".into() })?;
    trace.validate()?;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workloads::{generate_trace, preset};

    #[test]
    fn round_trip() {
        let mut spec = preset("supervisor-a").unwrap();
        spec.sessions = 3;
        let t = generate_trace(&spec).unwrap();
        let mut buf = Vec::new();
        write_trace(&t, &mut buf).unwrap();
        assert_eq!(read_trace(&buf[..]).unwrap(), t);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let mut spec = preset("supervisor-b").unwrap();
        spec.sessions = 1;
        let t = generate_trace(&spec).unwrap();
        let mut buf = Vec::new();
        write_trace(&t, &mut buf).unwrap();
        let mut text = String::from_utf8(buf).unwrap();
        text.push_str("{\"kind\":\"turn\",\"session\":0,oops}\n");
        let n = text.lines().count();
        match read_trace(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, n),
            other => panic!("{other:?}"),
        }
        let bad = "{\"kind\":\"turn\",\"session\":0,\"turn_index\":0,\"agent\":\"x\",\"history_tokens\":1,\"decode_tokens\":1}\n";
        assert!(matches!(read_trace(bad.as_bytes()), Err(Error::Parse { line: 1, .. })));
    }
}
