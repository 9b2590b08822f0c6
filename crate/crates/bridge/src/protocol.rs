//! Wire format (version 1). Every message is one JSON text frame:
//! `{"v":1,"type":"...","payload":{...},"seq":n}`.
//!
//! Inbound `seq` is chosen by the client and echoed as `ack_seq`. Outbound
//! `seq` is a single server-wide counter shared by acks and snapshots.

use assembly_core::{Pose64, WorkspaceSet};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const PROTOCOL_VERSION: u64 = 1;

/// Operator command, validated for shape but not yet against the world.
#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    MoveComponent { id: usize, pose: Pose64 },
    Pause,
    Resume,
    SingleStep,
    Reset { seed: u64 },
    SetParam { name: Param, value: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    TS,
    EpsilonG,
}

impl Param {
    pub fn as_str(self) -> &'static str {
        match self {
            Param::TS => "t_s",
            Param::EpsilonG => "epsilon_g",
        }
    }
}

/// Client command together with its sequence number.
#[derive(Clone, Debug, PartialEq)]
pub struct Request {
    pub seq: u64,
    pub command: Command,
}

/// Why a command was refused. The `Display` form starts with the category
/// (`parse`, `version`, `id`, `param`) followed by detail.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum Rejection {
    #[error("parse: {0}")]
    Parse(String),
    #[error("version: expected {PROTOCOL_VERSION}, got {0}")]
    Version(u64),
    #[error("id: {0}")]
    Id(String),
    #[error("param: {0}")]
    Param(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AckStatus {
    Accepted,
    Rejected,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    /// Client `seq` being answered; `None` when the message had no readable seq.
    pub ack_seq: Option<u64>,
    pub status: AckStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl Ack {
    pub fn accepted(seq: u64) -> Self {
        Ack {
            ack_seq: Some(seq),
            status: AckStatus::Accepted,
            reason: None,
        }
    }

    pub fn rejected(seq: Option<u64>, why: &Rejection) -> Self {
        Ack {
            ack_seq: seq,
            status: AckStatus::Rejected,
            reason: Some(why.to_string()),
        }
    }

    pub fn is_accepted(&self) -> bool {
        self.status == AckStatus::Accepted
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimStatus {
    Running,
    Paused,
    Converged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandView {
    pub id: usize,
    pub pose: Pose64,
    pub selected_subgoal: Option<usize>,
    pub attached_component: Option<usize>,
    /// Energy of the selected component for this hand, if any.
    pub energy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentView {
    pub id: usize,
    pub pose: Pose64,
    pub goal_pose: Pose64,
    pub goal_loss: f64,
    pub at_goal: bool,
}

/// Copy of the world after a step, as sent to clients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: u64,
    pub sim_status: SimStatus,
    pub hands: Vec<HandView>,
    pub components: Vec<ComponentView>,
    pub workspaces: Vec<WorkspaceSet<f64>>,
    pub total_loss: f64,
    /// Total loss over the largest total seen since the last reset.
    pub normalized_loss: f64,
    /// Number of event-log records so far.
    pub log_len: usize,
}

/// Outbound messages.
#[derive(Clone, Debug, PartialEq)]
pub enum ServerMessage {
    Snapshot(Snapshot),
    Ack(Ack),
}

impl ServerMessage {
    pub fn encode(&self, seq: u64) -> String {
        let (kind, payload) = match self {
            ServerMessage::Snapshot(s) => ("snapshot", serde_json::to_value(s)),
            ServerMessage::Ack(a) => ("ack", serde_json::to_value(a)),
        };
        let payload = payload.expect("protocol types serialize to JSON");
        json!({ "v": PROTOCOL_VERSION, "type": kind, "payload": payload, "seq": seq }).to_string()
    }

    pub fn decode(text: &str) -> Result<(u64, ServerMessage), Rejection> {
        let v: Value = serde_json::from_str(text).map_err(|e| Rejection::Parse(e.to_string()))?;
        let seq = v["seq"].as_u64().ok_or_else(|| Rejection::Parse("missing seq".into()))?;
        let payload = v["payload"].clone();
        let msg = match v["type"].as_str() {
            Some("snapshot") => ServerMessage::Snapshot(from_value(payload)?),
            Some("ack") => ServerMessage::Ack(from_value(payload)?),
            other => return Err(Rejection::Parse(format!("unknown message type {other:?}"))),
        };
        Ok((seq, msg))
    }
}

fn from_value<T: serde::de::DeserializeOwned>(v: Value) -> Result<T, Rejection> {
    serde_json::from_value(v).map_err(|e| Rejection::Parse(e.to_string()))
}

/// Parses a client frame. On failure returns the seq if one could be read,
/// so the rejection can still be correlated.
pub fn parse_request(text: &str) -> Result<Request, (Option<u64>, Rejection)> {
    let v: Value = serde_json::from_str(text).map_err(|e| (None, Rejection::Parse(e.to_string())))?;
    let obj = v
        .as_object()
        .ok_or_else(|| (None, Rejection::Parse("message must be a JSON object".into())))?;
    let seq = obj.get("seq").and_then(Value::as_u64);
    let fail = |r: Rejection| (seq, r);
    if let Some(ver) = obj.get("v") {
        let ver = ver
            .as_u64()
            .ok_or_else(|| fail(Rejection::Parse("`v` must be an unsigned integer".into())))?;
        if ver != PROTOCOL_VERSION {
            return Err(fail(Rejection::Version(ver)));
        }
    }
    let seq = seq.ok_or_else(|| fail(Rejection::Parse("missing or invalid `seq`".into())))?;
    let fail = |r: Rejection| (Some(seq), r);
    let kind = obj
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| fail(Rejection::Parse("missing `type`".into())))?;
    let empty = Value::Object(Default::default());
    let payload = obj.get("payload").unwrap_or(&empty);
    let field = |name: &str| {
        payload
            .get(name)
            .ok_or_else(|| fail(Rejection::Parse(format!("{kind}: missing payload.{name}"))))
    };
    let command = match kind {
        "move_component" => {
            let id = field("id")?
                .as_u64()
                .ok_or_else(|| fail(Rejection::Parse("move_component: id must be an unsigned integer".into())))?;
            let pose: Pose64 = serde_json::from_value(field("pose")?.clone())
                .map_err(|e| fail(Rejection::Parse(format!("move_component: pose: {e}"))))?;
            Command::MoveComponent {
                id: id as usize,
                pose,
            }
        }
        "pause" => Command::Pause,
        "resume" => Command::Resume,
        "single_step" => Command::SingleStep,
        "reset" => {
            let seed = field("seed")?
                .as_u64()
                .ok_or_else(|| fail(Rejection::Parse("reset: seed must be an unsigned integer".into())))?;
            Command::Reset { seed }
        }
        "set_param" => {
            let name = match field("name")?.as_str() {
                Some("t_s") => Param::TS,
                Some("epsilon_g") => Param::EpsilonG,
                other => return Err(fail(Rejection::Param(format!("unknown parameter {other:?}")))),
            };
            let value = field("value")?
                .as_f64()
                .ok_or_else(|| fail(Rejection::Parse("set_param: value must be a number".into())))?;
            if !(value > 0.0 && value.is_finite()) {
                return Err(fail(Rejection::Param(format!(
                    "{} must be finite and > 0, got {value}",
                    name.as_str()
                ))));
            }
            Command::SetParam { name, value }
        }
        other => return Err(fail(Rejection::Parse(format!("unknown command type `{other}`")))),
    };
    Ok(Request { seq, command })
}

/// Client-side encoding of a command, the inverse of [`parse_request`].
pub fn encode_request(seq: u64, cmd: &Command) -> String {
    let (kind, payload) = match cmd {
        Command::MoveComponent { id, pose } => (
            "move_component",
            json!({ "id": id, "pose": serde_json::to_value(pose).expect("pose serializes") }),
        ),
        Command::Pause => ("pause", json!({})),
        Command::Resume => ("resume", json!({})),
        Command::SingleStep => ("single_step", json!({})),
        Command::Reset { seed } => ("reset", json!({ "seed": seed })),
        Command::SetParam { name, value } => ("set_param", json!({ "name": name.as_str(), "value": value })),
    };
    json!({ "v": PROTOCOL_VERSION, "type": kind, "payload": payload, "seq": seq }).to_string()
}
