//! Textual format, builders, statistics, and everything the CLI drives.

pub mod builders;
pub mod emit;
pub mod parser;
pub mod stats;

pub use builders::{build_rxx_around, build_rxx_explicit, build_v_chain, build_v_chain_with_pool};
pub use emit::emit_text;
pub use parser::{parse, ParseError};
pub use stats::{stats, GateCounts, GateStats, NotFlattenedError, PassSummary};
