//! Numerical machinery for fibred differential forms over a sampled base:
//! the fibred de Rham calculus in cochain and analytic backends, the glued
//! Hodge right-inverse of `d_p` and its closed/complement splitting, the
//! fibred Poincare lemma with Liouville forms, transverse polarisations,
//! family Weinstein tubular-neighbourhood charts, and the correspondence
//! between Lagrangian fibrations and Lagrangian subbundles of product
//! bundles.

pub mod complex;
pub mod error;
pub mod fibration;
pub mod forms;
pub mod grid;
pub mod hodge;
pub mod interp;
pub mod linalg;
pub mod models;
pub mod poincare;
pub mod polarization;
pub mod table;
pub mod weinstein;

pub use complex::{Axis, AxisTopology, Domain, FibreComplex, FibrePoint};
pub use error::{Error, Result};
pub use forms::{
    contract, fibred_d, lie_derivative, pullback, restrict, sample_to_cochain, CochainForm,
    Components, FieldForm, FibredForm, FormData, FormSlice, VerticalField, VerticalMap,
};
pub use grid::{BaseGrid, BaseTopology, CoverSpec, Patch};
pub use hodge::{build_delta, build_delta_with_trivializations, DeltaOperator, Trivialization};
pub use models::{
    CoordSplit, LagrangianSubbundle, ModelParams, PolKind, PolarizationSpec,
    SymplecticBundleModel,
};
pub use poincare::{
    homotopy_identity_check, homotopy_p, leaf_retraction, linear_retraction,
    liouville_from_symplectic, HomotopyConfig, VerticalRetraction,
};
pub use polarization::{
    conformal_check, jacobian_split, liouville_field, transverse_leaf, EigenSplit, LiouvilleField,
};
pub use weinstein::{
    build_chart, is_lagrangian, lagrangianize, subbundle_to_form, FlowConfig, LagrangianVerdict,
    SubbundleCandidate, WeinsteinChart,
};
pub use fibration::{
    graph_of, lagrangian_fibration_test, psi, psi_round_trip, submersion_test, BiFibration,
    CircleSection, FibrationMap, FibrationVerdict, SubmersionReport, TorusSection,
};
