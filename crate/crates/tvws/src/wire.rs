//! JSON bodies exchanged with the service.
//!
//! Every endpoint accepts either its bare body or the same body wrapped in
//! a [`WireEnvelope`]. Unknown fields are ignored everywhere.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use tvws_core::geo::Cell;
use tvws_core::registry::{Timestamp, TvSetRecord, TvTransmitter};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadKind {
    Query,
    SpectrumReport,
    TvEvent,
    PullPoll,
    AdminLoad,
}

impl PayloadKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PayloadKind::Query => "query",
            PayloadKind::SpectrumReport => "spectrum_report",
            PayloadKind::TvEvent => "tv_event",
            PayloadKind::PullPoll => "pull_poll",
            PayloadKind::AdminLoad => "admin_load",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireEnvelope {
    pub schema_version: u32,
    pub kind: PayloadKind,
    pub body: serde_json::Value,
}

impl WireEnvelope {
    pub fn wrap<T: Serialize>(kind: PayloadKind, body: &T) -> Self {
        WireEnvelope {
            schema_version: SCHEMA_VERSION,
            kind,
            body: serde_json::to_value(body).expect("wire types serialize"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl ErrorBody {
    pub fn new(code: &str, message: impl Into<String>, field: Option<String>) -> Self {
        ErrorBody {
            code: code.into(),
            message: message.into(),
            field,
        }
    }
}

/// A rejected request: HTTP status plus body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub status: u16,
    pub body: ErrorBody,
}

impl Rejection {
    pub fn validation(message: impl Into<String>, field: Option<String>) -> Self {
        Rejection {
            status: 422,
            body: ErrorBody::new("validation", message, field),
        }
    }
}

impl From<tvws_core::Error> for Rejection {
    fn from(e: tvws_core::Error) -> Self {
        use tvws_core::Error as E;
        let (status, code, field) = match &e {
            E::OutOfArea { .. } => (404, "out_of_area", Some("loc")),
            E::StaleTimestamp { .. } => (409, "stale_timestamp", Some("timestamp")),
            E::Invalid { field, .. } => (422, "validation", Some(*field)),
            E::UnknownChannel(_) => (422, "unknown_channel", Some("channel")),
            E::UnknownPower(_) => (422, "unknown_power", Some("power_mw")),
            E::InvalidDistance(_) => (422, "validation", None),
            E::OutOfRange { .. } => (422, "out_of_range", None),
        };
        Rejection {
            status,
            body: ErrorBody::new(code, e.to_string(), field.map(String::from)),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PullPoll {
    #[serde(default)]
    pub contributor_id: Option<String>,
    #[serde(default)]
    pub now: Option<Timestamp>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyMark {
    pub cells: Vec<Cell>,
    pub time: Timestamp,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdminLoad {
    #[serde(default)]
    pub transmitters: Vec<TvTransmitter>,
    #[serde(default)]
    pub tv_records: Vec<TvSetRecord>,
    #[serde(default)]
    pub surveyed: Option<SurveyMark>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectrumAck {
    pub accepted: bool,
    pub closed_tasks: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TvAck {
    pub tv_id: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadAck {
    pub transmitters: usize,
    pub tv_records: usize,
    pub surveyed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Digest {
    pub digest: String,
    pub applied: u64,
}

/// Decodes a request body of the given kind, unwrapping an envelope when
/// one is present.
pub fn decode<T: DeserializeOwned>(kind: PayloadKind, bytes: &[u8]) -> Result<T, Rejection> {
    let value: serde_json::Value = if bytes.iter().all(u8::is_ascii_whitespace) {
        serde_json::Value::Object(Default::default())
    } else {
        serde_json::from_slice(bytes).map_err(|e| Rejection::validation(format!("malformed JSON: {e}"), None))?
    };
    let body = match value.get("schema_version") {
        Some(_) => {
            let env: WireEnvelope = from_value(value)?;
            if env.schema_version != SCHEMA_VERSION {
                return Err(Rejection {
                    status: 422,
                    body: ErrorBody::new(
                        "unsupported_schema_version",
                        format!("schema_version {} is not supported", env.schema_version),
                        Some("schema_version".into()),
                    ),
                });
            }
            if env.kind != kind {
                return Err(Rejection::validation(
                    format!("expected a {} payload", kind.as_str()),
                    Some("kind".into()),
                ));
            }
            env.body
        }
        None => value,
    };
    from_value(body)
}

fn from_value<T: DeserializeOwned>(value: serde_json::Value) -> Result<T, Rejection> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let message = e.inner().to_string();
        // serde reports a missing field against its parent.
        let missing = message
            .strip_prefix("missing field `")
            .and_then(|m| m.split('`').next());
        let field = match (path.as_str(), missing) {
            (".", Some(m)) => Some(m.to_string()),
            (p, Some(m)) => Some(format!("{p}.{m}")),
            (".", None) => None,
            (p, None) => Some(p.to_string()),
        };
        Rejection::validation(message, field)
    })
}
