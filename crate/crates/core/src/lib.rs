//! Topological spectra of OAM-entangled qudit states.
//!
//! The pipeline runs from a biphoton state (OAM charges plus amplitudes)
//! through the su(d) observable fields `m_a(r, phi)`, unit-vector triples
//! built from them, wrapping-number quadrature with map classification and
//! gluing, closed-form and limit-based analytic values, dependency analysis,
//! and a tomography simulator that feeds reconstructed states back into the
//! same spectrum machinery.

pub mod error;
pub mod field;
pub mod invariants;
pub mod lie;
pub mod monopole;
pub mod quad;
pub mod spectrum;
pub mod state;
pub mod tomography;

mod pool;

pub use error::{Error, Result};
pub use field::{Axis, MapClass, MapKind, SpatialDensity, TripleSpec, UnitField};
pub use invariants::WrappingResult;
pub use lie::{build_basis, cartan_weyl, nice_pairs, BasisElement, LieBasis, RootPair};
pub use quad::{Grid, GridKind};
pub use spectrum::{compute_spectrum, Mode, SpectrumEntry, SpectrumOptions, TopologicalSpectrum};
pub use state::{make_state, QuditState, SubspacePerturbation};
