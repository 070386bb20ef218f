//! Topic evolution and emerging-topic detection over timestamped,
//! citation-linked document corpora.

pub mod cluster;
pub mod corpus;
pub mod docembed;
pub mod dynembed;
pub mod emergence;
pub mod error;
pub mod evaluation;
pub mod linalg;
pub mod par;
pub mod pipeline;
pub mod seed;
pub mod synth;
pub mod sgns;
pub mod tcgraph;
pub mod text;
pub mod topics;
pub mod vecio;

pub use error::{AtemError, Result};
