//! Rigorous Darboux-sum enclosures of Riemann integrals, lower and upper
//! pre-primitives, and certificates for the fundamental theorem of calculus.
//!
//! Every number the library reports is an [`Interval`] guaranteed to contain
//! the true value. Cell bounds come from range enclosures of the integrand,
//! which are legitimate lower and upper bounds, so the computed sums are true
//! lower and upper Darboux sums rather than approximations.
//!
//! ```
//! use darboux_core::{certify, CertifyOptions, FuncExpr, IntegrabilityKind};
//!
//! let f: FuncExpr = "x^2".parse().unwrap();
//! let v = certify(&f, 0.0, 1.0, &CertifyOptions::new(1e-6, 100_000)).unwrap();
//! assert_eq!(v.kind, IntegrabilityKind::Integrable);
//! assert!(v.enclosure.contains(1.0 / 3.0));
//! ```

pub mod darboux;
pub mod error;
pub mod expr;
pub mod ftc;
pub mod gallery;
pub mod interval;
pub mod preprimitive;

pub use darboux::{
    certify, darboux_sums, lower_integral_additivity_check, lower_sum, refine_once, upper_sum,
    AdditivityReport, CertifyOptions, DarbouxSums, IntegrabilityKind, IntegrabilityVerdict,
    Partition, StopReason,
};
pub use error::{Error, ParseError, Result};
pub use expr::{parse, FuncExpr, Point, Provenance, RangeEnclosure};
pub use ftc::{ftc_check, integral_function, FtcCertificate, FtcVerdict, IntegralPoint};
pub use gallery::{builtin_gallery, gallery_entry, GalleryEntry, Integrability};
pub use interval::Interval;
pub use preprimitive::{
    build_lower_preprimitive, build_upper_preprimitive, check_constant_difference,
    check_lipschitz, check_one_sided_derivative, check_sandwich, default_h_schedule,
    CheckVerdict, PrePrimitiveFn, PrePrimitiveReport, Property, Side, WorkBudget,
};
