//! Symmetric-transform algebra.
//!
//! Blocks are indexed by convolution degree `l`, the size of the subsets
//! being summed. Degree `l` corresponds to the coefficient of `s^(L-l)` in
//! `prod_i (s + y_i(t))`, where `y_i(t)` is the polynomial in `t` whose
//! coefficients are the entries of `y_i`.

mod invert;
mod monomial;
mod sensitivity;
pub(crate) mod set;
mod transform;

pub use invert::{invert_scalar, invert_vector, ScalarInversion, VectorInversion, CONDITION_LIMIT};
pub use monomial::{
    degree_projection, design_matrices, design_matrix, monomial_transform, multiset_count,
    MonomialBasis, MonomialBlock, MonomialIndex,
};
pub use sensitivity::{root_sensitivity, SensitivityMatrix};
pub use set::{canonical_cmp, ParameterSet};
pub use transform::{
    block_len, convolve, elementary_convolution, elementary_symmetric, full_transform,
    naive_transform, transform_into, CoefficientBlock,
};
