//! Crawl a knowledge graph out of a text-completion language model.
//!
//! Starting from one seed entity, the crawler asks the model for the
//! entity's relations, then for the objects of each relation, using
//! few-shot Q/A prompts. Paraphrased subjects and relations give several
//! independent realizations of each query, and an object is only accepted
//! when enough realizations agree. An abstention answer ("Don't know")
//! keeps unsure facts out of the graph.
//!
//! The [`eval`] module estimates precision by checking whether each object
//! appears near the top of a search snippet for its subject and relation.

pub mod backend;
pub mod crawl;
pub mod dk;
pub mod error;
pub mod eval;
pub mod graph;
pub mod prompt;
pub mod reference;
pub mod text;

pub use crawl::{CrawlConfig, Crawler, ExpansionRecord, PromptSet};
pub use error::{BackendError, Error, Result};
pub use graph::{EntityName, KnowledgeGraph, Realization, RelationName, Triplet};
pub use reference::{InContextExample, ReferenceKb};
