//! Point counts, strata and zeta functions for moduli of finite flat models
//! of rank-2 étale phi-modules over finite fields.

pub mod error;
pub mod gf;
pub mod laurent;
mod linalg;
pub mod oracle;
pub mod phimod;
pub mod sample;
pub mod strata;
pub mod verify;
pub mod zeta;

pub use error::{Error, Result};
pub use gf::{embed, field_arithmetic, frobenius_p, FieldDescriptor, FieldElement, FieldOp, FieldSpec, Fq};
pub use laurent::{FrobeniusSemantics, SeriesOp, TruncatedLaurentSeries, Valuation};
pub use oracle::{enumerate_models, saturation_check, EnumerationWindows, OracleConfig, PointSet};
pub use phimod::{
    detect_normal_form, emit_spec_json, is_model, parse_spec_json, transform_basis, IrreducibleForm, LatticeCoord,
    Matrix2, NormalFormKind, PhiModuleSpec, ReducibleForm,
};
pub use strata::{predict_cell, predicted_cell_count, CellDescriptor, StratumKey};
pub use verify::{run_verify, VerifyConfig, VerifyReport};
pub use zeta::{case_bound, fit_zeta, make_witness, theorem_bound, BoundReport, Case, WitnessKind, ZetaFunction};
