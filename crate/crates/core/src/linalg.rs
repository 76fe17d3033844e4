//! Dense column-major kernels backing the least-squares fits: Householder QR,
//! a one-sided Jacobi SVD on the triangular factor for conditioning reports,
//! and LU with partial pivoting for the small square systems that define the
//! spline bases.

/// Outcome of an orthogonal-factorization least-squares solve.
#[derive(Debug, Clone)]
pub(crate) struct LsqOutcome {
    pub coeffs: Vec<f64>,
    /// Sum of squared residuals of the solved system.
    pub residual_ss: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl LsqOutcome {
    /// Smallest singular value relative to the largest; 0 for a zero system.
    pub fn rel_sigma_min(&self) -> f64 {
        if self.sigma_max > 0.0 {
            self.sigma_min / self.sigma_max
        } else {
            0.0
        }
    }
}

/// Minimize `‖A x − b‖₂` by Householder QR. `a` is column-major `m × n` with
/// `m ≥ n`; both `a` and `rhs` are consumed as workspace. Singular values are
/// taken from the triangular factor, which shares them with `A`.
pub(crate) fn householder_lsq(m: usize, n: usize, a: &mut [f64], rhs: &mut [f64]) -> LsqOutcome {
    assert!(m >= n, "least-squares system must not be underdetermined");
    assert_eq!(a.len(), m * n);
    assert_eq!(rhs.len(), m);

    for j in 0..n {
        // Householder vector for column j, acting on rows j..m.
        let mut norm_sq = 0.0;
        for i in j..m {
            let v = a[j * m + i];
            norm_sq += v * v;
        }
        if norm_sq == 0.0 {
            // Zero column: nothing to eliminate, R_jj = 0.
            continue;
        }
        let norm = norm_sq.sqrt();
        let ajj = a[j * m + j];
        let alpha = if ajj >= 0.0 { -norm } else { norm };
        let v0 = ajj - alpha;
        // vᵀv = -2·alpha·v0 (exact for the chosen sign), always positive here.
        let two_over_vtv = 2.0 / (-2.0 * alpha * v0);
        a[j * m + j] = v0;

        for k in (j + 1)..n {
            let (head, tail) = a.split_at_mut((j + 1) * m);
            let vcol = &head[j * m + j..j * m + m];
            let col = &mut tail[(k - j - 1) * m + j..(k - j - 1) * m + m];
            let mut w = 0.0;
            for i in 0..col.len() {
                w += vcol[i] * col[i];
            }
            w *= two_over_vtv;
            for i in 0..col.len() {
                col[i] -= w * vcol[i];
            }
        }
        {
            let vcol = &a[j * m + j..(j + 1) * m];
            let r = &mut rhs[j..m];
            let mut w = 0.0;
            for i in 0..r.len() {
                w += vcol[i] * r[i];
            }
            w *= two_over_vtv;
            for i in 0..r.len() {
                r[i] -= w * vcol[i];
            }
        }
        a[j * m + j] = alpha;
    }

    // Conditioning of R (upper n×n triangle of the factored matrix).
    let mut r = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..=j {
            r[j * n + i] = a[j * m + i];
        }
    }
    let (sigma_min, sigma_max) = jacobi_singular_range(n, &mut r);

    // Back-substitution on R x = Qᵀb, guarding exact zero pivots; callers gate
    // on the singular-value ratio before trusting the coefficients.
    let mut coeffs = vec![0.0; n];
    for j in (0..n).rev() {
        let mut s = rhs[j];
        for k in (j + 1)..n {
            s -= a[k * m + j] * coeffs[k];
        }
        let d = a[j * m + j];
        coeffs[j] = if d != 0.0 { s / d } else { 0.0 };
    }
    let residual_ss = rhs[n..].iter().map(|v| v * v).sum();

    LsqOutcome {
        coeffs,
        residual_ss,
        sigma_min,
        sigma_max,
    }
}

/// Minimum-norm least squares with rank truncation: singular directions with
/// `σ ≤ rel_tol · σ_max` are dropped instead of amplified. Used where a
/// one-sided sample region leaves far knots undetermined.
pub(crate) fn householder_lsq_truncated(
    m: usize,
    n: usize,
    a: &mut [f64],
    rhs: &mut [f64],
    rel_tol: f64,
) -> LsqOutcome {
    assert!(m >= n);
    // Reduce to the triangular factor with the rhs folded in.
    let full = householder_lsq(m, n, a, rhs);
    let tail_ss = full.residual_ss;
    let mut r = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..=j {
            r[j * n + i] = a[j * m + i];
        }
    }
    // One-sided Jacobi on R tracking the right factor: columns of `r` become
    // σ_j·w_j while `v` accumulates the corresponding right singular vectors.
    let mut v = vec![0.0; n * n];
    for j in 0..n {
        v[j * n + j] = 1.0;
    }
    let eps = 1e-14;
    for _sweep in 0..40 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (mut app, mut aqq, mut apq) = (0.0, 0.0, 0.0);
                for i in 0..n {
                    let x = r[p * n + i];
                    let y = r[q * n + i];
                    app += x * x;
                    aqq += y * y;
                    apq += x * y;
                }
                if apq.abs() <= eps * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let x = r[p * n + i];
                    let y = r[q * n + i];
                    r[p * n + i] = c * x - s * y;
                    r[q * n + i] = s * x + c * y;
                    let xv = v[p * n + i];
                    let yv = v[q * n + i];
                    v[p * n + i] = c * xv - s * yv;
                    v[q * n + i] = s * xv + c * yv;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sigmas: Vec<f64> = (0..n)
        .map(|j| (0..n).map(|i| r[j * n + i] * r[j * n + i]).sum::<f64>().sqrt())
        .collect();
    let sigma_max = sigmas.iter().cloned().fold(0.0f64, f64::max);
    let sigma_min = sigmas.iter().cloned().fold(f64::INFINITY, f64::min);
    let cut = rel_tol * sigma_max;
    let b1 = &rhs[..n];
    let mut coeffs = vec![0.0; n];
    let mut kept_proj_ss = 0.0;
    for j in 0..n {
        if sigmas[j] > cut && sigmas[j] > 0.0 {
            // w_j = column j of r divided by σ_j.
            let wtb: f64 = (0..n).map(|i| r[j * n + i] * b1[i]).sum::<f64>() / sigmas[j];
            kept_proj_ss += wtb * wtb;
            let scale = wtb / sigmas[j];
            for i in 0..n {
                coeffs[i] += scale * v[j * n + i];
            }
        }
    }
    let b1_ss: f64 = b1.iter().map(|x| x * x).sum();
    let residual_ss = tail_ss + (b1_ss - kept_proj_ss).max(0.0);
    LsqOutcome {
        coeffs,
        residual_ss,
        sigma_min,
        sigma_max,
    }
}

/// Smallest and largest singular values of a column-major `n × n` matrix by
/// one-sided Jacobi orthogonalization. Destroys `a`.
pub(crate) fn jacobi_singular_range(n: usize, a: &mut [f64]) -> (f64, f64) {
    assert_eq!(a.len(), n * n);
    if n == 0 {
        return (0.0, 0.0);
    }
    let eps = 1e-14;
    for _sweep in 0..40 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (mut app, mut aqq, mut apq) = (0.0, 0.0, 0.0);
                for i in 0..n {
                    let x = a[p * n + i];
                    let y = a[q * n + i];
                    app += x * x;
                    aqq += y * y;
                    apq += x * y;
                }
                if apq.abs() <= eps * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let x = a[p * n + i];
                    let y = a[q * n + i];
                    a[p * n + i] = c * x - s * y;
                    a[q * n + i] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for j in 0..n {
        let s: f64 = (0..n).map(|i| a[j * n + i] * a[j * n + i]).sum();
        let s = s.sqrt();
        lo = lo.min(s);
        hi = hi.max(s);
    }
    (lo, hi)
}

/// LU factorization with partial pivoting of a column-major `n × n` matrix.
/// Returns the row permutation, or `None` for a numerically singular matrix.
pub(crate) fn lu_factor(n: usize, a: &mut [f64]) -> Option<Vec<usize>> {
    assert_eq!(a.len(), n * n);
    let mut perm: Vec<usize> = (0..n).collect();
    for j in 0..n {
        let mut pivot = j;
        let mut best = a[j * n + j].abs();
        for i in (j + 1)..n {
            let v = a[j * n + i].abs();
            if v > best {
                best = v;
                pivot = i;
            }
        }
        if best == 0.0 {
            return None;
        }
        if pivot != j {
            perm.swap(j, pivot);
            for k in 0..n {
                a.swap(k * n + j, k * n + pivot);
            }
        }
        let d = a[j * n + j];
        for i in (j + 1)..n {
            a[j * n + i] /= d;
        }
        for k in (j + 1)..n {
            let f = a[k * n + j];
            if f != 0.0 {
                for i in (j + 1)..n {
                    a[k * n + i] -= f * a[j * n + i];
                }
            }
        }
    }
    Some(perm)
}

/// Solve `A x = b` in place using a factorization from [`lu_factor`].
pub(crate) fn lu_solve(n: usize, lu: &[f64], perm: &[usize], b: &mut [f64]) {
    let x: Vec<f64> = perm.iter().map(|&p| b[p]).collect();
    b.copy_from_slice(&x);
    for j in 0..n {
        let v = b[j];
        if v != 0.0 {
            for i in (j + 1)..n {
                b[i] -= lu[j * n + i] * v;
            }
        }
    }
    for j in (0..n).rev() {
        b[j] /= lu[j * n + j];
        let v = b[j];
        if v != 0.0 {
            for i in 0..j {
                b[i] -= lu[j * n + i] * v;
            }
        }
    }
}
