//! Small dense complex linear-algebra helpers built on nalgebra.

use nalgebra::{DMatrix, Matrix3, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type Real3 = Matrix3<f64>;
pub type Vec3 = Vector3<f64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == Complex64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Largest entry magnitude, used as a cheap matrix scale.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// ‖M − M†‖ / max(‖M‖, 1e-300), Frobenius norms.
pub fn hermiticity_error(m: &CMat) -> f64 {
    let diff = m - m.adjoint();
    diff.norm() / m.norm().max(1e-300)
}

/// Σ T_ab · A_a · B_b for operator triples A, B (e.g. S·T·I).
pub fn bilinear(a: &[CMat; 3], t: &Real3, b: &[CMat; 3]) -> CMat {
    let n = a[0].nrows();
    let mut out = CMat::zeros(n, n);
    for p in 0..3 {
        for q in 0..3 {
            let v = t[(p, q)];
            if v != 0.0 {
                out += (&a[p] * &b[q]) * c(v);
            }
        }
    }
    out
}

/// Σ v_a · A_a.
pub fn linear(v: &Vec3, a: &[CMat; 3]) -> CMat {
    let n = a[0].nrows();
    let mut out = CMat::zeros(n, n);
    for p in 0..3 {
        if v[p] != 0.0 {
            out += &a[p] * c(v[p]);
        }
    }
    out
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted
/// ascending. Checks ‖Hv − λv‖ against `1e-8 ‖H‖`.
pub fn eigh(h: &CMat) -> Result<(Vec<f64>, CMat)> {
    let n = h.nrows();
    if n != h.ncols() {
        return Err(Error::InvalidArgument("matrix is not square".into()));
    }
    // Symmetrize so round-off asymmetry never leaks into the solver.
    let sym = (h + h.adjoint()) * c(0.5);
    let eig = sym.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(k).into_owned();
        // Fix the phase: largest component real positive.
        let (mut best, mut best_abs) = (0, -1.0);
        for (r, z) in v.iter().enumerate() {
            if z.norm() > best_abs + 1e-12 {
                best = r;
                best_abs = z.norm();
            }
        }
        let ph = v[best] / v[best].norm();
        v /= ph;
        vectors.set_column(col, &v);
    }
    let scale = sym.norm().max(1e-300);
    for (col, &lambda) in values.iter().enumerate() {
        let v = vectors.column(col);
        let resid = (&sym * v - v * c(lambda)).norm();
        if resid > 1e-8 * scale {
            return Err(Error::Numerical(format!(
                "eigenvector residual {resid:.3e} exceeds tolerance for ‖H‖ = {scale:.3e}"
            )));
        }
    }
    Ok((values, vectors))
}

/// exp(−i·phase·H) for Hermitian `H`.
pub fn expm_hermitian(h: &CMat, phase: f64) -> Result<CMat> {
    let (vals, vecs) = eigh(h)?;
    Ok(expm_from_eigh(&vals, &vecs, phase))
}

pub fn expm_from_eigh(vals: &[f64], vecs: &CMat, phase: f64) -> CMat {
    let n = vals.len();
    let mut scaled = vecs.clone();
    for (j, &lambda) in vals.iter().enumerate() {
        let f = Complex64::from_polar(1.0, -phase * lambda);
        for i in 0..n {
            scaled[(i, j)] *= f;
        }
    }
    scaled * vecs.adjoint()
}

/// ‖U†U − 1‖ in max-entry norm.
pub fn unitarity_error(u: &CMat) -> f64 {
    let n = u.nrows();
    max_abs(&(u.adjoint() * u - CMat::identity(n, n)))
}

/// Rotation matrix from axis-angle.
pub fn rotation(axis: Vec3, angle: f64) -> Real3 {
    *nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle).matrix()
}

pub fn is_symmetric(t: &Real3, tol: f64) -> bool {
    let scale = t.norm().max(1.0);
    (t - t.transpose()).norm() <= tol * scale
}
