//! Variational synthesis of small unitaries into CZ + single-qubit rotation
//! circuits, using controlled-phase relaxation of the gate placement search.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adam;
pub mod analysis;
pub mod circuit;
pub mod error;
pub mod grad;
pub mod losses;
pub mod refine;
pub mod store;
pub mod synthesis;
pub mod tensor;

pub use adam::{adam_run, adam_run_with, AdamOptions, AdamState, SampleResult};
pub use circuit::{evaluate, BlockStyle, CircuitIR, CouplingMap, Entangler, Gate, GateKind, Template};
pub use error::{Error, Result};
pub use grad::{finite_difference_gradient, gradient, polish, GradientWorkspace};
pub use losses::{hs_distance, relative_phase_loss, state_prep_loss, LossKind, LossSpec, PenaltyShape};
pub use tensor::{haar_random_unitary, hs_overlap, GateMatrix, Matrix, UnitaryMatrix, C64};
