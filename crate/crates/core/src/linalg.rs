//! Small dense linear-algebra and quadrature helpers shared across modules.
//!
//! Everything here works on `nalgebra` dynamic types; ambient dimensions in
//! this crate are tiny (at most six), so clarity wins over blocking or
//! statically sized fast paths.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Stencil (offset, coefficient) pairs for central first-derivative rules;
/// the derivative is `sum(c_k * f(x + k*h)) / h`.
pub fn central_stencil(order: usize) -> &'static [(isize, f64)] {
    const ORDER2: [(isize, f64); 2] = [(-1, -0.5), (1, 0.5)];
    const ORDER4: [(isize, f64); 4] = [
        (-2, 1.0 / 12.0),
        (-1, -8.0 / 12.0),
        (1, 8.0 / 12.0),
        (2, -1.0 / 12.0),
    ];
    match order {
        2 => &ORDER2,
        4 => &ORDER4,
        _ => panic!("unsupported central-difference order {order}"),
    }
}

/// 4-point Richardson-extrapolated first derivative of a scalar function:
/// `[8(f(h) - f(-h)) - (f(2h) - f(-2h))] / (12 h)`, error `O(h^4)`.
pub fn richardson_derivative<F: FnMut(f64) -> f64>(mut f: F, h: f64) -> f64 {
    (8.0 * (f(h) - f(-h)) - (f(2.0 * h) - f(-2.0 * h))) / (12.0 * h)
}

/// Generalized cross product: for `n` columns in an `(n+1)`-dimensional
/// coordinate space, returns the cofactor vector orthogonal to all columns.
/// The result is not normalized; its magnitude is the parallelotope volume.
pub fn generalized_cross(columns: &[DVector<f64>]) -> DVector<f64> {
    let n = columns.len();
    let dim = n + 1;
    for c in columns {
        assert_eq!(c.len(), dim, "generalized_cross needs n vectors of length n+1");
    }
    let mut out = DVector::zeros(dim);
    let mut minor = DMatrix::zeros(n, n);
    for skip in 0..dim {
        let mut r = 0;
        for row in 0..dim {
            if row == skip {
                continue;
            }
            for (j, c) in columns.iter().enumerate() {
                minor[(r, j)] = c[row];
            }
            r += 1;
        }
        let sign = if skip % 2 == 0 { 1.0 } else { -1.0 };
        out[skip] = sign * minor.clone().determinant();
    }
    out
}

/// Modified Gram-Schmidt with respect to an arbitrary inner product.
/// Vectors whose residual norm falls below `drop_tol` are discarded.
pub fn orthonormalize<F>(vectors: &[DVector<f64>], inner: F, drop_tol: f64) -> Vec<DVector<f64>>
where
    F: Fn(&DVector<f64>, &DVector<f64>) -> f64,
{
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = v.clone();
        for b in &basis {
            let c = inner(&w, b);
            w -= b * c;
        }
        // One re-orthogonalization pass keeps the basis clean near dependence.
        for b in &basis {
            let c = inner(&w, b);
            w -= b * c;
        }
        let nrm = inner(&w, &w).max(0.0).sqrt();
        if nrm > drop_tol {
            basis.push(w / nrm);
        }
    }
    basis
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = 0.5 * (m + m.transpose());
    let mut vals: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals
}

/// Eigenvalues (ascending) of `g^{-1} h` for symmetric `h` and SPD `g`,
/// computed through a Cholesky whitening so the spectrum stays real.
pub fn generalized_sym_eigenvalues(h: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<Vec<f64>> {
    let chol = g
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numeric("metric not positive definite in eigen solve".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))?;
    let m = &linv * h * linv.transpose();
    Ok(sym_eigenvalues(&m))
}

/// Solve `g x = rhs` for SPD `g` with an LU fallback.
pub fn solve_spd(g: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(chol) = g.clone().cholesky() {
        return Ok(chol.solve(rhs));
    }
    g.clone()
        .lu()
        .solve(rhs)
        .ok_or_else(|| Error::Numeric("singular Gram matrix".into()))
}

/// Numerical rank of a matrix: number of singular values above
/// `rel_threshold * sigma_max`.
pub fn numerical_rank(m: &DMatrix<f64>, rel_threshold: f64) -> usize {
    let svals = m.clone().svd(false, false).singular_values;
    let smax = svals.iter().cloned().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    svals.iter().filter(|s| **s > rel_threshold * smax).count()
}

/// Condition number estimate (sigma_max / sigma_min) of a rectangular matrix.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let svals = m.clone().svd(false, false).singular_values;
    let smax = svals.iter().cloned().fold(0.0_f64, f64::max);
    let smin = svals.iter().cloned().fold(f64::INFINITY, f64::min);
    if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Fejér's first quadrature rule on `[-1, 1]`: nodes `cos((2j+1)pi/(2n))`
/// (descending in the node variable as `j` grows) with positive weights that
/// sum to 2. Used to integrate zonally-smooth densities through a cosine
/// substitution on midpoint angle grids.
pub fn fejer1_weights(n: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(n);
    for j in 0..n {
        let theta = (2 * j + 1) as f64 * std::f64::consts::PI / (2 * n) as f64;
        let mut s = 0.0;
        for m in 1..=(n / 2) {
            s += (2.0 * m as f64 * theta).cos() / ((4 * m * m - 1) as f64);
        }
        w.push((2.0 / n as f64) * (1.0 - 2.0 * s));
    }
    w
}

/// Merge a multiset of (value, multiplicity) pairs, combining entries closer
/// than `tol`; positions are multiplicity-weighted averages.
pub fn merge_multiset(mut entries: Vec<(f64, usize)>, tol: f64) -> Vec<(f64, usize)> {
    entries.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut out: Vec<(f64, usize)> = Vec::new();
    for (v, m) in entries {
        if let Some(last) = out.last_mut() {
            if (v - last.0).abs() <= tol {
                let total = last.1 + m;
                last.0 = (last.0 * last.1 as f64 + v * m as f64) / total as f64;
                last.1 = total;
                continue;
            }
        }
        out.push((v, m));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cross_product_matches_classical() {
        let a = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let b = DVector::from_vec(vec![0.0, 1.0, 0.0]);
        let c = generalized_cross(&[a, b]);
        assert_relative_eq!(c[2], 1.0, epsilon = 1e-14);
        assert!(c[0].abs() < 1e-14 && c[1].abs() < 1e-14);
    }

    #[test]
    fn cross_product_orthogonal_in_4d() {
        let cols = vec![
            DVector::from_vec(vec![1.0, 0.3, -0.2, 0.5]),
            DVector::from_vec(vec![0.0, 1.0, 0.4, -0.1]),
            DVector::from_vec(vec![0.2, 0.0, 1.0, 0.7]),
        ];
        let z = generalized_cross(&cols);
        for c in &cols {
            assert!(z.dot(c).abs() < 1e-12);
        }
        assert!(z.norm() > 0.1);
    }

    #[test]
    fn fejer_weights_sum_to_two_and_integrate_polynomials() {
        for n in [8usize, 17, 64] {
            let w = fejer1_weights(n);
            let sum: f64 = w.iter().sum();
            assert_relative_eq!(sum, 2.0, epsilon = 1e-12);
            // integrate x^2 on [-1,1] = 2/3
            let mut acc = 0.0;
            for (j, wj) in w.iter().enumerate() {
                let x = ((2 * j + 1) as f64 * std::f64::consts::PI / (2 * n) as f64).cos();
                acc += wj * x * x;
            }
            assert_relative_eq!(acc, 2.0 / 3.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn richardson_derivative_is_fourth_order() {
        let f = |x: f64| (2.0 * x).sin() + x * x;
        let exact = 2.0; // derivative at 0
        let e1 = (richardson_derivative(f, 1e-2) - exact).abs();
        let e2 = (richardson_derivative(f, 5e-3) - exact).abs();
        assert!(e1 < 1e-7);
        assert!(e2 * 8.0 < e1, "expected at least ~16x error drop, got {e1} -> {e2}");
    }

    #[test]
    fn generalized_eigenvalues_respect_metric() {
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let vals = generalized_sym_eigenvalues(&h, &g).unwrap();
        // compare against direct solve of det(h - λ g) = 0
        let a = g.clone().try_inverse().unwrap() * &h;
        let mut direct = a.complex_eigenvalues().iter().map(|c| c.re).collect::<Vec<_>>();
        direct.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (x, y) in vals.iter().zip(direct.iter()) {
            assert_relative_eq!(x, y, epsilon = 1e-10);
        }
    }

    #[test]
    fn multiset_merging_accumulates_multiplicity() {
        let merged = merge_multiset(vec![(1.0, 1), (1.0 + 1e-12, 2), (2.0, 1)], 1e-9);
        assert_eq!(merged.len(), 2);
        assert_eq!(merged[0].1, 3);
    }

    #[test]
    fn rank_detects_deficiency() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1e-12, 0.0, 0.0, 0.0, 2.0]);
        assert_eq!(numerical_rank(&m, 1e-7), 2);
    }
}
