pub mod agents;
pub mod backend;
pub mod corpus;
pub mod domain;
pub mod jsonl;
pub mod metrics;
pub mod protocol;
