//! Reference matrices used across tests, docs, and the shipped configs.

use crate::matrix::MatrixSpec;

/// Well-behaved positive 5x5 system: dominant eigenvalue 0.966,
/// second eigenvalue magnitude 0.228, condition near 1.
pub fn well_behaved_5x5() -> MatrixSpec {
    MatrixSpec::from_rows(&[
        vec![0.1795, 0.0861, 0.1860, 0.0924, 0.1661],
        vec![0.1429, 0.1680, 0.0517, 0.2626, 0.3272],
        vec![0.3558, 0.0127, 0.2797, 0.0221, 0.3227],
        vec![0.2766, 0.2654, 0.1611, 0.0408, 0.0745],
        vec![0.3539, 0.3059, 0.0596, 0.2933, 0.3147],
    ])
    .expect("constant fixture")
}

/// Severely ill-conditioned 5x5 system: dominant eigenvalue 0.950,
/// second eigenvalue magnitude 0.888, squared left-eigenvector norm ~170.
pub fn ill_conditioned_5x5() -> MatrixSpec {
    MatrixSpec::from_rows(&[
        vec![0.5086, 0.3496, 0.0795, -0.2044, -0.3530],
        vec![-0.6168, 0.1553, 0.5224, -0.0293, 0.0137],
        vec![-0.5526, 0.0069, 0.0008, -0.3189, 0.4345],
        vec![0.4805, 0.8053, -0.5502, 0.6173, -0.3041],
        vec![-0.4307, 0.8960, 0.0255, 0.1454, 0.6965],
    ])
    .expect("constant fixture")
}

/// Mean-value matrix a*G (all entries equal to `a`), so lambda = n*a.
pub fn mean_value(n: usize, a: f64) -> MatrixSpec {
    MatrixSpec::from_rows(&vec![vec![a; n]; n]).expect("constant fixture")
}
