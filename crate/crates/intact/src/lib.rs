//! IO, gateway clients and CLI for the `intact-core` sanitization
//! pipeline: corpus file formats, TOML run configuration, HTTP backends
//! for OpenAI-compatible model servers, a deterministic mock model
//! server, run manifests, evaluation result files and the `intact`
//! command-line tool.

pub mod backend;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod manifest;
pub mod mock_server;
pub mod report;
pub mod runner;
