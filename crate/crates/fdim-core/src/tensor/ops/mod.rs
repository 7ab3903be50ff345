mod broadcast;
mod conv;
mod deform;
mod elementwise;
mod linear;
mod pool;
mod reduce;

pub use conv::Conv2dSpec;
pub(crate) use elementwise::softplus_stable;

/// Force row-major layout. `into_shape` reinterprets memory in the array's
/// own layout, and `dot` may return Fortran-ordered results for degenerate
/// (k = 1) products, so every reshape-after-GEMM must pass through here.
pub(crate) fn standardize2<T: crate::tensor::Scalar>(
    a: ndarray::Array2<T>,
) -> ndarray::Array2<T> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().to_owned()
    }
}
