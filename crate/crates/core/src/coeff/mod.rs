//! Exact scalars, polynomials, truncated series and ideal normal forms.

pub mod context;
pub mod ideal;
pub mod linalg;
pub mod monomial;
pub mod parse;
pub mod poly;
pub mod scalar;
pub mod series;

pub use context::{Ctx, VarClass, VarContext, Variable};
pub use ideal::{
    buchberger, ideal_power, normal_form, normal_form_series, reduce, truncated_buchberger,
    IdealSpec,
};
pub use linalg::{Matrix, SparseSystem};
pub use monomial::Monomial;
pub use parse::parse_poly;
pub use poly::{poly_compose, poly_diff, poly_mul, Polynomial};
pub use scalar::{ComplexScalar, GaussianRational, Rational, Scalar};
pub use series::{matrix_series_inverse, series_invert, Precision, Series};
