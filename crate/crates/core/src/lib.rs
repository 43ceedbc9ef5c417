//! Cold-start item promotion on bipartite user-item networks.
//!
//! A new item is linked to `R` users picked by a degree-based rule, and the
//! number of other users whose item-based collaborative-filtering top-`L`
//! list then contains it is measured. The crate covers the whole pipeline:
//! network ingestion ([`network`]), structural statistics ([`stats`]),
//! degree-preserving null models ([`nullmodel`]), synthetic generators
//! ([`synth`]), recommendation engines ([`recsys`]) and the promotion
//! experiments themselves ([`promotion`]).

pub mod error;
pub mod network;
pub mod nullmodel;
pub mod promotion;
pub mod recsys;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use network::{BipartiteNetwork, Side};
