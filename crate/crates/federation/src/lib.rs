//! Transport for site quality reports: a site agent that turns incoming
//! cases into windowed [`SiteReport`](segqc_core::federation::SiteReport)s
//! and pushes them to a central monitor, which merges them into a fleet
//! summary, persists them in an append-only log and evaluates alert rules.
//!
//! The protocol is JSON over HTTP/1.1:
//!
//! | method | path          | body / response                                  |
//! |--------|---------------|--------------------------------------------------|
//! | POST   | `/v1/reports` | `SiteReport`; 200 accepted, 409 stale, 422 invalid |
//! | GET    | `/v1/summary` | `FleetSummary`                                   |
//! | GET    | `/v1/alerts`  | [`AlertsBody`]                                   |
//! | GET    | `/v1/healthz` | [`Health`]                                       |

pub mod agent;
mod durable;
pub mod monitor;
pub mod wire;

pub use agent::{Agent, AgentConfig, AgentError, AgentState, FlushOutcome, RetryPolicy, RunOutcome, WindowRecord};
pub use monitor::{router, serve, spawn_monitor, Monitor, MonitorConfig, MonitorError, MonitorHandle};
pub use wire::{Ack, AlertsBody, ErrorBody, Health};
