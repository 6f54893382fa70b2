//! Finite, verifiable models of a Pettis-integrable function whose
//! indefinite integral has a prescribed, arbitrarily slow modulus of
//! continuity, together with the continuous-function variant and the
//! sampling campaigns that check them numerically.

pub mod campaign;
pub mod carriers;
pub mod continuous;
pub mod error;
pub mod interval;
pub mod pettis;
pub mod psi;
pub mod space;

pub use carriers::{allocate_carriers, CarrierFamily, CarrierScheme, DisjointnessReport, SchemeConfig, Violation};
pub use continuous::{series_certificate, ContinuousConfig, ContinuousModel, PairCheck};
pub use error::{Error, Result};
pub use interval::{dyadic_interval, find_inner_dyadic, DyadicIndex, Interval, IntervalSet};
pub use pettis::{build_model, IntegralEnclosure, ModelArchive, ModelConfig, PettisModel, ProofChain};
pub use psi::{
    certify_ratio, coefficients, validate_growth, CoefficientTable, GrowthSettings, PsiFamily, PsiSpec, SequenceRule,
    ValidationReport,
};
pub use space::{apply_functional, BlockLayout, BlockVector, Exponent, Functional, Run};
