//! Builders for the problem families: affine strongly monotone test beds,
//! batched total-variation denoising, and adversarially perturbed least squares.

pub mod adversarial;
pub mod affine;
pub mod denoise;
pub mod estimate;
pub mod grid;
pub mod regularize;

pub use adversarial::{make_adversarial, AdversarialFamily, AdversarialSpec};
pub use affine::{make_affine_saddle, AffineFamily, AffineSaddleSpec};
pub use denoise::{make_denoising, DenoisingFamily, DenoisingSpec};
pub use estimate::{estimate_constants, EstimatedConstants};
pub use grid::{div_field, grad_image, GridShape};
pub use regularize::regularize_operator;
