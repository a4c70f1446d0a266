use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Network entity named in a [`ValidationError`], by its file key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Entity {
    Disease(i64),
    Symptom(i64),
    Edge { symptom: i64, disease: i64 },
}

impl fmt::Display for Entity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entity::Disease(id) => write!(f, "disease {id}"),
            Entity::Symptom(id) => write!(f, "symptom {id}"),
            Entity::Edge { symptom, disease } => {
                write!(f, "edge (symptom {symptom}, disease {disease})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{entity}: {reason}")]
pub struct ValidationError {
    pub entity: Entity,
    pub reason: &'static str,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(#[from] ValidationError),
    #[error("unknown symptom {0}")]
    UnknownSymptom(i64),
    #[error("unknown disease {0}")]
    UnknownDisease(i64),
    #[error("invalid query: {0}")]
    InvalidQuery(&'static str),
    #[error("brute force limited to {limit} diseases, network has {actual}")]
    TooManyDiseases { limit: usize, actual: usize },
    #[error("exact step limited to {limit} positive findings, got {actual}")]
    TooManyPositiveFindings { limit: usize, actual: usize },
    #[error("evidence is impossible under the model (probability 0)")]
    EvidenceImpossible,
    /// The signed inclusion-exclusion sum lost all precision.
    #[error("inclusion-exclusion cancelled to a nonpositive evidence")]
    Cancellation,
    #[error("argument outside the function domain: {0}")]
    Domain(&'static str),
    #[error("symptom {0} has no parents to transform")]
    NoParents(u32),
    #[error("xi solver did not converge: {0}")]
    NoConvergence(&'static str),
    #[error("no variational parameter for symptom {0}")]
    MissingXi(u32),
    #[error("posterior-dependent variational parameters cannot be cached")]
    Uncacheable,
    #[error("n-variational = {n} exceeds |F+| = {positives}")]
    BadN { n: usize, positives: usize },
    #[error("invalid generator spec: {0}")]
    Spec(&'static str),
    #[error("no disease with at least one child symptom")]
    NoEligibleLabel,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}
