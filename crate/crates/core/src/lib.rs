//! Privacy-policy transparency toolkit.
//!
//! Finds and extracts a website's privacy policy, has a language model rate
//! it on criteria the model picks itself, turns the 1-5 ratings into traffic
//! lights, and answers follow-up questions in per-site chat threads. A small
//! HTTP service exposes all of it to a browser extension or any other client.
//!
//! The runnable programs in `examples/` are the best starting point.

pub mod acquisition;
pub mod assessment;
pub mod clock;
pub mod conversation;
pub mod domain;
pub mod fixtures;
pub mod llm;
pub mod service;
pub mod store;

pub use acquisition::{AcquisitionStatus, PolicyAcquirer, PolicyDocument};
pub use assessment::{score_criterion, score_overall, Assessor, LikertScore, PolicyAssessment, TrafficColor};
pub use conversation::{ChatScope, Conversation};
pub use llm::{LlmGateway, MockProvider, UserSettings};
pub use service::{Service, ServiceConfig};
pub use store::{AssessmentCache, Store};
