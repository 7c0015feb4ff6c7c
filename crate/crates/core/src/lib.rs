//! Set-compositional retrieval over lexically grounded sparse vectors.
//!
//! Queries such as "birds of Colombia but not Venezuela" are built from two
//! atomic term-weight vectors combined with vector algebra ([`compose`]),
//! retrieved exactly with a signed inverted index ([`index`]) and scored with
//! standard ranking metrics ([`eval`]).
//!
//! Batch entry points take an [`Execution`] mode. With the `parallel` feature
//! (on by default) [`Execution::Parallel`] fans work out over rayon; without
//! it every mode runs sequentially. Results never depend on the mode.

pub mod activations;
pub mod compose;
pub mod cpt;
pub mod error;
pub mod eval;
mod exec;
pub mod fusion;
pub mod index;
pub mod io;
pub mod lexical;
pub mod sparse;

pub use compose::{ComposedQuery, CompositionalQuery, Method, SetOperator};
pub use cpt::{CptQuery, PseudoTermVector};
pub use error::{Error, ErrorKind, Result};
pub use exec::{configure_threads, Execution};
pub use index::{Hit, InvertedIndex, SearchResult};
pub use sparse::{OnUnknown, SparseVector, TermId, VocabId, Vocabulary};
