//! Newline-delimited JSON bridge exposing a live run to one external
//! front-end over TCP.
//!
//! The server sends `model` on connect, `step` for every trace record,
//! `context` and `options` whenever the run waits for input, `ack` for
//! every command, `event` for notes and the end of the run, and `error`
//! for malformed client messages. The client sends `command` messages
//! whose payload `text` is a session command line.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

use pmx_core::model::SystemModel;
use pmx_core::refine::{Refined, RefinementMetadata};
use pmx_core::runtime::{HaltReason, SystemRun, TraceRecord};
use pmx_core::session::{prompt_lines, view_options, CommandSource, Prompt, Response, Session, SessionError};

/// Kinds of bridge messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageKind {
    Model,
    Context,
    Options,
    Event,
    Step,
    Command,
    Ack,
    Error,
}

/// One protocol line. `seq` increases strictly per direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeMessage {
    #[serde(rename = "type")]
    pub kind: MessageKind,
    pub seq: u64,
    #[serde(default)]
    pub payload: Json,
}

impl BridgeMessage {
    /// A client command carrying a session command line.
    pub fn command(seq: u64, text: &str) -> Self {
        BridgeMessage {
            kind: MessageKind::Command,
            seq,
            payload: json!({ "text": text }),
        }
    }
}

/// Layout-ready view of the refined state machines and the mapping back to
/// original elements.
pub fn model_payload(model: &SystemModel, metadata: &RefinementMetadata) -> Json {
    let comps: Vec<Json> = model
        .components
        .iter()
        .map(|c| {
            let (states, transitions) = match &c.behavior {
                Some(h) => (
                    h.states
                        .values()
                        .map(|s| {
                            json!({
                                "id": s.id.as_str(),
                                "name": s.name,
                                "kind": s.kind,
                                "parent": s.parent.as_ref().map(|p| p.as_str()),
                            })
                        })
                        .collect::<Vec<_>>(),
                    h.transitions
                        .values()
                        .map(|t| {
                            json!({
                                "id": t.id.as_str(),
                                "src": t.src.as_str(),
                                "des": t.des.as_str(),
                                "triggers": t.triggers.iter().map(|m| m.to_string()).collect::<Vec<_>>(),
                                "guard": t.guard.as_ref().map(|g| g.to_string()),
                            })
                        })
                        .collect::<Vec<_>>(),
                ),
                None => (vec![], vec![]),
            };
            json!({
                "name": c.name,
                "level": c.level,
                "states": states,
                "transitions": transitions,
            })
        })
        .collect();
    json!({ "system": model.name, "components": comps, "metadata": metadata.to_json() })
}

/// Session source backed by a TCP client. A lost client is replaced by the
/// next one to connect, which receives the model and the current context.
pub struct BridgeSource {
    listener: TcpListener,
    conn: Option<(BufReader<TcpStream>, TcpStream)>,
    seq: u64,
    last_client_seq: Option<u64>,
    sent_steps: usize,
    pending_ack: Option<u64>,
    model: Json,
    current: Option<(Json, Json)>,
    /// Trace length when the current context was sent.
    steps_at_context: usize,
    /// Every accepted command line, in order.
    pub commands: Vec<String>,
}

impl BridgeSource {
    /// Waits for the first client and sends it the model.
    pub fn accept(listener: TcpListener, model: Json) -> std::io::Result<Self> {
        let mut s = BridgeSource {
            listener,
            conn: None,
            seq: 0,
            last_client_seq: None,
            sent_steps: 0,
            pending_ack: None,
            model,
            current: None,
            steps_at_context: 0,
            commands: Vec::new(),
        };
        s.connect()?;
        Ok(s)
    }

    fn connect(&mut self) -> std::io::Result<()> {
        let (stream, _) = self.listener.accept()?;
        let reader = BufReader::new(stream.try_clone()?);
        self.conn = Some((reader, stream));
        self.last_client_seq = None;
        self.send(MessageKind::Model, self.model.clone());
        if let Some((ctx, opts)) = self.current.clone() {
            self.send(MessageKind::Context, ctx);
            self.send(MessageKind::Options, opts);
        }
        Ok(())
    }

    fn send(&mut self, kind: MessageKind, payload: Json) {
        let Some((_, stream)) = self.conn.as_mut() else { return };
        self.seq += 1;
        let msg = BridgeMessage {
            kind,
            seq: self.seq,
            payload,
        };
        let mut line = serde_json::to_string(&msg).expect("bridge messages serialize");
        line.push('\n');
        if stream.write_all(line.as_bytes()).and_then(|_| stream.flush()).is_err() {
            self.conn = None;
        }
    }

    fn flush_ack(&mut self) {
        if let Some(seq) = self.pending_ack.take() {
            self.send(MessageKind::Ack, json!({ "command_seq": seq, "ok": true, "lines": [] }));
        }
    }

    fn send_steps(&mut self, trace: &[TraceRecord]) {
        for r in &trace[self.sent_steps.min(trace.len())..] {
            self.send(MessageKind::Step, serde_json::to_value(r).expect("trace records serialize"));
        }
        self.sent_steps = trace.len();
    }

    /// Reports the end of the run and closes the connection.
    pub fn finish(&mut self, trace: &[TraceRecord], outcome: &Result<HaltReason, SessionError>) {
        self.flush_ack();
        self.send_steps(trace);
        let payload = match outcome {
            Ok(h) => json!({ "halted": h.to_string(), "steps": trace.len() }),
            Err(e) => json!({ "halted": "error", "error": e.to_string(), "steps": trace.len() }),
        };
        self.send(MessageKind::Event, payload);
        self.conn = None;
    }

    /// Reads the next valid command, answering malformed lines with `error`.
    fn read_command(&mut self) -> Option<String> {
        loop {
            if self.conn.is_none() && self.connect().is_err() {
                return None;
            }
            let mut line = String::new();
            let read = match self.conn.as_mut() {
                Some((reader, _)) => reader.read_line(&mut line),
                None => continue,
            };
            match read {
                Ok(0) | Err(_) => {
                    self.conn = None;
                    continue;
                }
                Ok(_) => {}
            }
            if line.trim().is_empty() {
                continue;
            }
            let msg: BridgeMessage = match serde_json::from_str(line.trim()) {
                Ok(m) => m,
                Err(e) => {
                    self.send(MessageKind::Error, json!({ "message": format!("malformed message: {e}") }));
                    continue;
                }
            };
            if msg.kind != MessageKind::Command {
                self.send(MessageKind::Error, json!({ "seq": msg.seq, "message": "only command messages are accepted" }));
                continue;
            }
            if self.last_client_seq.is_some_and(|s| msg.seq <= s) {
                self.send(MessageKind::Error, json!({ "seq": msg.seq, "message": "seq must increase" }));
                continue;
            }
            let Some(text) = msg.payload.get("text").and_then(Json::as_str) else {
                self.send(MessageKind::Error, json!({ "seq": msg.seq, "message": "command needs a text payload" }));
                continue;
            };
            self.last_client_seq = Some(msg.seq);
            self.pending_ack = Some(msg.seq);
            self.commands.push(text.to_string());
            return Some(text.to_string());
        }
    }
}

impl CommandSource for BridgeSource {
    fn next_line(&mut self, prompt: &Prompt) -> Option<String> {
        self.flush_ack();
        let ctx = json!({
            "context": prompt.context,
            "reason": prompt.reason,
            "offered": prompt.offered,
            "lines": prompt_lines(prompt),
        });
        let opts = match prompt.context {
            Some(c) => {
                let v = view_options(c);
                json!({ "lines": v.lines, "options": v.data, "offered": prompt.offered })
            }
            None => json!({ "lines": [], "options": [], "offered": [] }),
        };
        // a command answered within the same wait does not repeat the context
        let fresh = (ctx.clone(), opts.clone());
        if self.current.as_ref() != Some(&fresh) || self.steps_at_context != self.sent_steps {
            self.current = Some(fresh);
            self.steps_at_context = self.sent_steps;
            self.send(MessageKind::Context, ctx);
            self.send(MessageKind::Options, opts);
        }
        self.read_command()
    }

    fn respond(&mut self, r: &Response) {
        let seq = self.pending_ack.take();
        self.send(
            MessageKind::Ack,
            json!({ "command_seq": seq, "ok": r.ok, "lines": r.lines, "data": r.data }),
        );
    }

    fn note(&mut self, line: &str) {
        self.send(MessageKind::Event, json!({ "note": line }));
    }

    fn observe(&mut self, trace: &[TraceRecord]) {
        self.flush_ack();
        self.send_steps(trace);
    }
}

/// Runs a session whose commands come from the bridge client and reports
/// the end of the run to it. Returns the halt reason and the commands
/// received.
pub fn serve_session(
    listener: TcpListener,
    refined: &Refined,
    run: &mut SystemRun,
    mut session_for: impl FnMut(BridgeSource) -> Session<BridgeSource>,
) -> std::io::Result<(Result<HaltReason, SessionError>, Vec<String>)> {
    let source = BridgeSource::accept(listener, model_payload(&refined.model, &refined.metadata))?;
    let mut session = session_for(source);
    let outcome = session.run(run);
    session.source.finish(run.trace(), &outcome);
    Ok((outcome, std::mem::take(&mut session.source.commands)))
}
