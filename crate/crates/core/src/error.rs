use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("exterior derivative of a degree-{degree} form exceeds the fibre dimension {fibre_dim}")]
    DegreeOverflow { degree: usize, fibre_dim: usize },

    #[error("field form has no derivative callable and finite differences are disabled")]
    MissingDerivative,

    #[error("operation requires the {expected} backend, got {got}")]
    BackendMismatch {
        expected: &'static str,
        got: &'static str,
    },

    #[error("base sample index {index} out of range (grid has {len} samples)")]
    SampleOutOfRange { index: usize, len: usize },

    #[error("interior product is undefined on 0-forms")]
    ContractDegreeZero,

    #[error("homotopy operator is undefined on 0-forms")]
    HomotopyDegreeZero,

    #[error("degree mismatch: expected {expected}, got {got}")]
    DegreeMismatch { expected: usize, got: usize },

    #[error("fibre dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid base grid: {0}")]
    InvalidGrid(String),

    #[error("invalid fibre complex: {0}")]
    InvalidComplex(String),

    #[error("patch cover leaves sample {sample} uncovered")]
    CoverGap { sample: usize },

    #[error("green solves require a fully periodic fibre complex")]
    NonPeriodicHodge,

    #[error("no green solve was built for forms of degree {degree}")]
    DegreeNotBuilt { degree: usize },

    #[error("restriction at sample {sample} is not exact: reconstruction residual {residual:.3e}")]
    NotExact { sample: usize, residual: f64 },

    #[error("subbundle is not Lagrangian: sup of omega pulled back to L is {defect:.3e}")]
    NotLagrangian { defect: f64 },

    #[error("point leaves the tubular domain: normal offset {offset:.3e} exceeds radius {radius:.3e}")]
    OutsideTubularDomain { offset: f64, radius: f64 },

    #[error("omega is degenerate at a sampled point: |det| = {det:.3e}")]
    SingularOmega { det: f64 },

    #[error("polarisation spec rejected: {check} residual {residual:.3e} exceeds {bound:.1e}")]
    PolarizationRejected {
        check: &'static str,
        residual: f64,
        bound: f64,
    },

    #[error("jacobian eigenvalue {re:.6}+{im:.6}i is outside the {{0,1}} clusters")]
    EigenvalueOutsideClusters { re: f64, im: f64 },

    #[error("coordinate Hamiltonian flows do not commute: defect {defect:.3e}")]
    NonCommutingFlows { defect: f64 },

    #[error("candidate leaves the chart domain at base samples {samples:?}")]
    OutOfChart { samples: Vec<usize> },

    #[error("newton iteration failed to converge at node {node} after {iters} iterations")]
    InversionFailed { node: usize, iters: usize },

    #[error("section is not reparametrisable (outside V1): {reason}")]
    NotInvertible { reason: String },

    #[error("quadrature produced a non-finite value; evaluation left the retraction domain")]
    QuadratureDomain,

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("table format: {0}")]
    Table(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
