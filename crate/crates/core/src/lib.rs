//! Faceted company segmentation.
//!
//! The crate covers the full offline pipeline behind a company-segmentation
//! service:
//!
//! - [`corpus`]: URL selection, HTML block chunking, vocabulary building and
//!   page cleaning, info-box relevance filtering.
//! - [`embed`]: pre-trained word vectors and chunk encoding.
//! - [`model`]: the per-facet chunk-convolution classifier, a linear baseline,
//!   analytic gradients and deterministic training.
//! - [`semisup`]: iterative pseudo-labeling over external companies.
//! - [`concept`]: link-graph relatedness measures, masked NMF completion,
//!   GCCA fusion, the cosine concept graph and label clustering.
//! - [`eval`]: micro-averaged F1/AUC, domain splits and the two ablation
//!   harnesses.
//! - [`kg`]: the embedded knowledge graph with idempotent, per-key ordered
//!   upserts.
//! - [`synth`]: a seeded synthetic corpus generator used by tests, the guide
//!   and the acceptance suite.
//!
//! A narrative guide lives in the `book/` directory of the repository; its
//! code listings are compiled and run as doctests of this crate.

pub mod concept;
pub mod corpus;
pub mod embed;
pub mod eval;
mod fnv;
pub mod kg;
pub mod model;
pub mod semisup;
pub mod synth;

pub use corpus::{Facet, LabelSource, SiteDocument};
pub use fnv::fnv1a64;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    pub struct Intro;
    #[doc = include_str!("../../../book/src/corpus.md")]
    pub struct Corpus;
    #[doc = include_str!("../../../book/src/classifier.md")]
    pub struct Classifier;
    #[doc = include_str!("../../../book/src/semisup.md")]
    pub struct SemiSupervision;
    #[doc = include_str!("../../../book/src/relatedness.md")]
    pub struct Relatedness;
    #[doc = include_str!("../../../book/src/fusion.md")]
    pub struct Fusion;
    #[doc = include_str!("../../../book/src/evaluation.md")]
    pub struct Evaluation;
    #[doc = include_str!("../../../book/src/knowledge_graph.md")]
    pub struct KnowledgeGraph;
}
