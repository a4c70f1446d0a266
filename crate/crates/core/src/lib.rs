//! Exact and variational inference on bipartite noisy-or networks.
//!
//! The crate is `no_std` and only needs `alloc`. It covers:
//!
//! * [`model`]: the disease/symptom network, queries and validation.
//! * [`exact`]: brute-force enumeration and Quickscore inclusion-exclusion.
//! * [`variational`]: the conjugate-dual upper bound, the CVX (Newton) and
//!   PPF (closed form) solvers for the variational parameters, and a
//!   memoizing [`variational::XiCache`].
//! * [`hybrid`]: JJ99, variational-first (VFH) and joint (JH)
//!   hybridizations together with GDO / FDO transformation orderings.
//! * [`synth`]: seeded synthetic networks, Bates prior scrambling, query
//!   generators and the analytic helpers behind finding-degree ordering.
//!
//! File formats, the benchmark harness and the command-line tool live in the
//! companion `nobn` crate.
#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
mod math;

pub mod exact;
pub mod hybrid;
pub mod model;
pub mod synth;
pub mod variational;

pub use error::{Entity, Error, Result, ValidationError};
pub use model::{
    Disease, DiseaseId, NetworkBuilder, NoisyOrNetwork, Parent, Query, Symptom, SymptomId,
};

pub mod prelude {
    pub use crate::exact::{
        brute_force_evidence, brute_force_posteriors, quickscore_evidence, quickscore_posteriors,
        EvidenceValue,
    };
    pub use crate::hybrid::{
        infer, rank_diseases, Algorithm, Counters, HybridConfig, InferenceResult, Partition,
        TransformOrder,
    };
    pub use crate::model::{DiseaseId, NetworkBuilder, NoisyOrNetwork, Query, SymptomId};
    pub use crate::variational::{OddsSource, Solver, XiAssignment, XiCache};
    pub use crate::{Error, Result};
}
