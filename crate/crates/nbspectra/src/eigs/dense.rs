//! Dense oracle backend: materializes `B` and runs a full non-symmetric
//! eigen-decomposition. Only for small instances; the sparse path never
//! materializes anything.

use ndarray::Array1;
use ndarray_linalg::Eig;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::nbop::NBOperator;

use super::{residual, SpectralReport};

/// Largest operator dimension the dense path accepts.
pub const DENSE_LIMIT: usize = 4000;

/// Dimension up to which every eigenvector is retained; above it only the
/// vectors of the 32 largest-modulus eigenvalues are kept.
const RETAIN_ALL_LIMIT: usize = 1200;

/// Full spectrum of the materialized `2m x 2m` matrix.
pub fn dense_spectrum(op: &NBOperator) -> Result<SpectralReport> {
    let dim = op.dim();
    if dim > DENSE_LIMIT {
        return Err(Error::SizeExceeded(format!(
            "dense path limited to 2m <= {DENSE_LIMIT}, got {dim}"
        )));
    }
    if dim == 0 {
        return Ok(SpectralReport {
            eigenvalues: Vec::new(),
            vectors: Vec::new(),
            residuals: Vec::new(),
            converged: Vec::new(),
            method: "dense",
        });
    }
    let b = op.to_dense();
    let (vals, vecs) = b
        .eig()
        .map_err(|e| Error::Backend(format!("dgeev: {e}")))?;

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &bb| {
        vals[bb]
            .norm()
            .partial_cmp(&vals[a].norm())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(
                vals[a]
                    .arg()
                    .partial_cmp(&vals[bb].arg())
                    .unwrap_or(std::cmp::Ordering::Equal),
            )
    });

    let retain = if dim <= RETAIN_ALL_LIMIT { dim } else { 32 };
    let mut eigenvalues = Vec::with_capacity(dim);
    let mut vectors: Vec<Option<Array1<Complex64>>> = Vec::with_capacity(dim);
    let mut residuals = Vec::with_capacity(dim);
    for (rank, &i) in order.iter().enumerate() {
        eigenvalues.push(vals[i]);
        if rank < retain {
            let v = vecs.column(i).to_owned();
            let r = residual(op, vals[i], &v);
            vectors.push(Some(v));
            residuals.push(Some(r));
        } else {
            vectors.push(None);
            residuals.push(None);
        }
    }
    Ok(SpectralReport {
        eigenvalues,
        vectors,
        residuals,
        converged: vec![true; dim],
        method: "dense",
    })
}
