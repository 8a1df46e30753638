//! Brute-force symplectic spectra from explicitly built covariance matrices.

use nalgebra::{Matrix2, Matrix4};

/// Two-mode squeezed vacuum with variance `V = v_a + 1`, mode B sent through
/// a channel of transmittance `t` and channel-input excess noise `xi`.
pub fn epr_covariance(v_a: f64, t: f64, xi: f64) -> Matrix4<f64> {
    let v = v_a + 1.0;
    let chi = 1.0 / t - 1.0 + xi;
    let c = (t * (v * v - 1.0)).sqrt();
    let b = t * (v + chi);
    Matrix4::new(
        v, 0.0, c, 0.0, //
        0.0, v, 0.0, -c, //
        c, 0.0, b, 0.0, //
        0.0, -c, 0.0, b,
    )
}

fn omega() -> Matrix4<f64> {
    let j = Matrix2::new(0.0, 1.0, -1.0, 0.0);
    let mut w = Matrix4::zeros();
    w.fixed_view_mut::<2, 2>(0, 0).copy_from(&j);
    w.fixed_view_mut::<2, 2>(2, 2).copy_from(&j);
    w
}

/// Symplectic eigenvalues `[ν_max, ν_min]` of a two-mode covariance matrix,
/// taken as square roots of the spectrum of `σ^½ Ωᵀ σ Ω σ^½`.
pub fn two_mode_symplectic(sigma: &Matrix4<f64>) -> [f64; 2] {
    let eig = sigma.symmetric_eigen();
    let root = eig.eigenvectors
        * Matrix4::from_diagonal(&eig.eigenvalues.map(|x| x.max(0.0).sqrt()))
        * eig.eigenvectors.transpose();
    let w = omega();
    let m = root * w.transpose() * sigma * w * root;
    let m = (m + m.transpose()) * 0.5;
    let values = m.symmetric_eigenvalues();
    let hi = values.max().max(0.0).sqrt();
    let lo = values.min().max(0.0).sqrt();
    [hi, lo]
}

/// Alice's covariance after Bob measures the x quadrature of mode B.
pub fn conditional_on_homodyne(sigma: &Matrix4<f64>) -> Matrix2<f64> {
    let a = sigma.fixed_view::<2, 2>(0, 0).into_owned();
    let c = sigma.fixed_view::<2, 2>(0, 2).into_owned();
    let b = sigma.fixed_view::<2, 2>(2, 2).into_owned();
    // Moore-Penrose inverse of diag(1, 0)·B·diag(1, 0).
    let mut pinv = Matrix2::zeros();
    pinv[(0, 0)] = 1.0 / b[(0, 0)];
    a - c * pinv * c.transpose()
}

/// `[ν₁, ν₂, ν₃, ν₄]` computed from the covariance matrices.
pub fn symplectic_eigenvalues(v_a: f64, t: f64, xi: f64) -> [f64; 4] {
    let sigma = epr_covariance(v_a, t, xi);
    let [nu1, nu2] = two_mode_symplectic(&sigma);
    let nu3 = conditional_on_homodyne(&sigma).determinant().sqrt();
    [nu1, nu2, nu3, 1.0]
}
