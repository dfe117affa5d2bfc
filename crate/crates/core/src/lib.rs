//! Scenario-based architecture evaluation for foundation-model agents.
//!
//! The crate is organised around the evaluation workflow:
//!
//! * [`catalogue`] holds the quality-attribute and artefact vocabularies and
//!   the built-in general-scenario catalogue.
//! * [`format`] parses and serialises the declarative document format that
//!   carries context scenarios, architecture models, governance tags and
//!   stakeholder priority inputs.
//! * [`workspace`] tracks an evaluation session and enforces step ordering.
//! * [`prioritiser`] ranks scenarios and re-ranks them from runtime evidence.
//! * [`measures`] and [`telemetry`] evaluate response measures over span
//!   records; [`monitor`] runs them over sliding windows.
//! * [`analysis`] performs gap analysis and renders reports.
//! * [`corpus`] ships the tax-copilot case study as fixtures plus a seeded
//!   trace generator.

#[macro_use]
mod macros;

pub mod analysis;
pub mod catalogue;
pub mod corpus;
pub mod error;
pub mod finding;
pub mod format;
pub mod measures;
pub mod monitor;
pub mod prioritiser;
pub mod telemetry;
pub mod workspace;

pub use error::{Error, Result};
