//! Uniform-knot cardinal cubic splines in one and two dimensions.
//!
//! The basis attached to a [`KnotGrid1D`] is the cardinal interpolatory basis:
//! `B_j` is the not-a-knot cubic spline taking value 1 at knot `j` and 0 at
//! every other knot, so spline coefficients are simply values at the knots.
//! Grids with 2 or 3 knots degenerate to linear and quadratic Lagrange
//! interpolation, which keeps the coarse lattices used by the bivariate
//! problems representable. Each basis function is precomputed once as
//! per-interval cubic segments, making evaluation a segment lookup plus a
//! Horner step — that is the inner loop of every objective evaluation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{householder_lsq, lu_factor, lu_solve};

/// Relative singular-value threshold below which a least-squares design is
/// treated as rank deficient.
pub const WELL_POSED_THRESHOLD: f64 = 1e-8;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum SplineError {
    #[error("invalid knot grid: {0}")]
    InvalidGrid(String),
    #[error(
        "span {span} is not an integer multiple of knot spacing {delta} (residual {residual:.3e})"
    )]
    NonDivisibleSpan { span: f64, delta: f64, residual: f64 },
    #[error("evaluation point {x} outside domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },
    #[error("coefficient vector has length {got}, expected {expected}")]
    CoeffLength { expected: usize, got: usize },
    #[error("basis index {index} out of range for {count} knots")]
    BadIndex { index: usize, count: usize },
    #[error("{samples} samples cannot determine {coeffs} coefficients")]
    TooFewSamples { samples: usize, coeffs: usize },
    #[error("ill-posed least-squares design: relative smallest singular value {rel_sigma_min:.3e}")]
    IllPosed { rel_sigma_min: f64 },
    #[error("sample set is {got}-dimensional, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid sample set: {0}")]
    BadSamples(String),
}

/// Uniform knot lattice `t_j = a + j·δ`, `j = 0..k-1`, spanning `[a, b]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct KnotGrid1D {
    a: f64,
    b: f64,
    delta: f64,
    count: usize,
    /// Cardinal basis segments, flattened `[basis][segment][4]`.
    seg_coeffs: Vec<f64>,
}

#[derive(Serialize, Deserialize, Clone)]
struct GridRepr {
    a: f64,
    b: f64,
    delta: f64,
}

impl TryFrom<GridRepr> for KnotGrid1D {
    type Error = SplineError;
    fn try_from(r: GridRepr) -> Result<Self, SplineError> {
        KnotGrid1D::new(r.a, r.b, r.delta)
    }
}

impl From<KnotGrid1D> for GridRepr {
    fn from(g: KnotGrid1D) -> Self {
        GridRepr {
            a: g.a,
            b: g.b,
            delta: g.delta,
        }
    }
}

impl PartialEq for KnotGrid1D {
    fn eq(&self, other: &Self) -> bool {
        self.a == other.a && self.b == other.b && self.delta == other.delta
    }
}

impl KnotGrid1D {
    pub fn new(a: f64, b: f64, delta: f64) -> Result<Self, SplineError> {
        if !(a.is_finite() && b.is_finite() && delta.is_finite()) {
            return Err(SplineError::InvalidGrid("non-finite endpoint or spacing".into()));
        }
        if a >= b {
            return Err(SplineError::InvalidGrid(format!(
                "left end {a} must be below right end {b}"
            )));
        }
        if delta <= 0.0 {
            return Err(SplineError::InvalidGrid(format!("knot spacing {delta} must be positive")));
        }
        let span = b - a;
        let intervals = (span / delta).round();
        let residual = (span - intervals * delta).abs();
        if intervals < 1.0 || residual > 1e-9 * span {
            return Err(SplineError::NonDivisibleSpan { span, delta, residual });
        }
        let count = intervals as usize + 1;
        let seg_coeffs = build_cardinal_segments(count, delta);
        Ok(Self {
            a,
            b,
            delta,
            count,
            seg_coeffs,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Number of knots (= number of basis functions).
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn knot(&self, j: usize) -> f64 {
        debug_assert!(j < self.count);
        if j + 1 == self.count {
            self.b
        } else {
            self.a + j as f64 * self.delta
        }
    }

    pub fn knots(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(|j| self.knot(j))
    }

    pub fn contains(&self, x: f64) -> bool {
        let tol = 1e-12 * (self.b - self.a).max(1.0);
        x.is_finite() && x >= self.a - tol && x <= self.b + tol
    }

    fn locate(&self, x: f64) -> Result<(usize, f64), SplineError> {
        if !self.contains(x) {
            return Err(SplineError::OutOfDomain {
                x,
                lo: self.a,
                hi: self.b,
            });
        }
        let xc = x.clamp(self.a, self.b);
        let seg = (((xc - self.a) / self.delta) as usize).min(self.count - 2);
        Ok((seg, xc - (self.a + seg as f64 * self.delta)))
    }

    /// Value of every basis function at `x`, written into `out` (length `count`).
    pub fn basis_values(&self, x: f64, out: &mut [f64]) -> Result<(), SplineError> {
        assert_eq!(out.len(), self.count);
        let (seg, tau) = self.locate(x)?;
        let k1 = self.count - 1;
        for (m, slot) in out.iter_mut().enumerate() {
            let c = &self.seg_coeffs[(m * k1 + seg) * 4..(m * k1 + seg) * 4 + 4];
            *slot = c[0] + tau * (c[1] + tau * (c[2] + tau * c[3]));
        }
        Ok(())
    }

    /// First derivative of every basis function at `x`.
    pub fn basis_derivatives(&self, x: f64, out: &mut [f64]) -> Result<(), SplineError> {
        assert_eq!(out.len(), self.count);
        let (seg, tau) = self.locate(x)?;
        let k1 = self.count - 1;
        for (m, slot) in out.iter_mut().enumerate() {
            let c = &self.seg_coeffs[(m * k1 + seg) * 4..(m * k1 + seg) * 4 + 4];
            *slot = c[1] + tau * (2.0 * c[2] + tau * 3.0 * c[3]);
        }
        Ok(())
    }

    /// Value of the single cardinal basis function `j` at `x`.
    pub fn basis_value(&self, j: usize, x: f64) -> Result<f64, SplineError> {
        if j >= self.count {
            return Err(SplineError::BadIndex {
                index: j,
                count: self.count,
            });
        }
        let (seg, tau) = self.locate(x)?;
        let c = &self.seg_coeffs[(j * (self.count - 1) + seg) * 4..][..4];
        Ok(c[0] + tau * (c[1] + tau * (c[2] + tau * c[3])))
    }
}

/// Cardinal basis segments for `k` uniformly spaced knots `delta` apart.
fn build_cardinal_segments(k: usize, delta: f64) -> Vec<f64> {
    let nseg = k - 1;
    let mut out = vec![0.0; k * nseg * 4];
    match k {
        2 => {
            // Linear interpolation between the two knots.
            out[0..4].copy_from_slice(&[1.0, -1.0 / delta, 0.0, 0.0]);
            out[4..8].copy_from_slice(&[0.0, 1.0 / delta, 0.0, 0.0]);
        }
        3 => {
            // Quadratic Lagrange polynomials through the three knots,
            // re-expressed in local coordinates on each interval.
            let d = delta;
            // Global coefficients in u = x - a: B_m(u) = g0 + g1 u + g2 u².
            let globals = [
                [1.0, -3.0 / (2.0 * d), 1.0 / (2.0 * d * d)],
                [0.0, 2.0 / d, -1.0 / (d * d)],
                [0.0, -1.0 / (2.0 * d), 1.0 / (2.0 * d * d)],
            ];
            for (m, g) in globals.iter().enumerate() {
                for s in 0..2 {
                    let shift = s as f64 * d;
                    let c0 = g[0] + g[1] * shift + g[2] * shift * shift;
                    let c1 = g[1] + 2.0 * g[2] * shift;
                    let base = (m * nseg + s) * 4;
                    out[base..base + 4].copy_from_slice(&[c0, c1, g[2], 0.0]);
                }
            }
        }
        _ => {
            // Not-a-knot cubic spline: solve for the second derivatives M_j of
            // the interpolant of each unit vector, then read off the cubics.
            let mut sys = vec![0.0; k * k];
            let mut set = |row: usize, col: usize, v: f64| sys[col * k + row] = v;
            set(0, 0, 1.0);
            set(0, 1, -2.0);
            set(0, 2, 1.0);
            for i in 1..k - 1 {
                set(i, i - 1, 1.0);
                set(i, i, 4.0);
                set(i, i + 1, 1.0);
            }
            set(k - 1, k - 3, 1.0);
            set(k - 1, k - 2, -2.0);
            set(k - 1, k - 1, 1.0);
            let perm = lu_factor(k, &mut sys).expect("not-a-knot system is regular");

            let dd = 6.0 / (delta * delta);
            let mut m_vals = vec![0.0; k];
            for m in 0..k {
                m_vals.iter_mut().for_each(|v| *v = 0.0);
                // Right-hand side: 6·(y_{j-1} - 2 y_j + y_{j+1})/δ² for interior
                // rows, with y = e_m; not-a-knot rows stay zero.
                for j in 1..k - 1 {
                    let mut acc = 0.0;
                    if j - 1 == m {
                        acc += 1.0;
                    }
                    if j == m {
                        acc -= 2.0;
                    }
                    if j + 1 == m {
                        acc += 1.0;
                    }
                    m_vals[j] = acc * dd;
                }
                lu_solve(k, &sys, &perm, &mut m_vals);
                for s in 0..nseg {
                    let y0 = if m == s { 1.0 } else { 0.0 };
                    let y1 = if m == s + 1 { 1.0 } else { 0.0 };
                    let c0 = y0;
                    let c1 = (y1 - y0) / delta - delta * (2.0 * m_vals[s] + m_vals[s + 1]) / 6.0;
                    let c2 = m_vals[s] / 2.0;
                    let c3 = (m_vals[s + 1] - m_vals[s]) / (6.0 * delta);
                    let base = (m * nseg + s) * 4;
                    out[base..base + 4].copy_from_slice(&[c0, c1, c2, c3]);
                }
            }
        }
    }
    out
}

/// Tensor-product lattice for bivariate splines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotGrid2D {
    pub gx: KnotGrid1D,
    pub gy: KnotGrid1D,
}

impl KnotGrid2D {
    pub fn new(gx: KnotGrid1D, gy: KnotGrid1D) -> Self {
        Self { gx, gy }
    }

    /// Square grid with the same span and spacing on both axes.
    pub fn square(lo: f64, hi: f64, delta: f64) -> Result<Self, SplineError> {
        Ok(Self {
            gx: KnotGrid1D::new(lo, hi, delta)?,
            gy: KnotGrid1D::new(lo, hi, delta)?,
        })
    }

    pub fn coeff_count(&self) -> usize {
        self.gx.count() * self.gy.count()
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.gx.contains(p[0]) && self.gy.contains(p[1])
    }
}

/// Univariate spline in the cardinal basis: `coeffs[j]` is the value at knot `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spline1D {
    grid: KnotGrid1D,
    coeffs: Vec<f64>,
}

impl Spline1D {
    pub fn new(grid: KnotGrid1D, coeffs: Vec<f64>) -> Result<Self, SplineError> {
        if coeffs.len() != grid.count() {
            return Err(SplineError::CoeffLength {
                expected: grid.count(),
                got: coeffs.len(),
            });
        }
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> &KnotGrid1D {
        &self.grid
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, x: f64) -> Result<f64, SplineError> {
        let (seg, tau) = self.grid.locate(x)?;
        let k1 = self.grid.count() - 1;
        let mut acc = 0.0;
        for (m, &c) in self.coeffs.iter().enumerate() {
            if c != 0.0 {
                let p = &self.grid.seg_coeffs[(m * k1 + seg) * 4..][..4];
                acc += c * (p[0] + tau * (p[1] + tau * (p[2] + tau * p[3])));
            }
        }
        Ok(acc)
    }

    pub fn eval_derivative(&self, x: f64) -> Result<f64, SplineError> {
        let mut buf = vec![0.0; self.grid.count()];
        self.grid.basis_derivatives(x, &mut buf)?;
        Ok(buf.iter().zip(&self.coeffs).map(|(b, c)| b * c).sum())
    }
}

/// Bivariate tensor-product spline; `coeffs` is row-major `[ix][iy]` and holds
/// values at the knot lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spline2D {
    grid: KnotGrid2D,
    coeffs: Vec<f64>,
}

impl Spline2D {
    pub fn new(grid: KnotGrid2D, coeffs: Vec<f64>) -> Result<Self, SplineError> {
        if coeffs.len() != grid.coeff_count() {
            return Err(SplineError::CoeffLength {
                expected: grid.coeff_count(),
                got: coeffs.len(),
            });
        }
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> &KnotGrid2D {
        &self.grid
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, ix: usize, iy: usize) -> f64 {
        self.coeffs[ix * self.grid.gy.count() + iy]
    }

    pub fn eval(&self, p: [f64; 2]) -> Result<f64, SplineError> {
        let kx = self.grid.gx.count();
        let ky = self.grid.gy.count();
        let mut bx = vec![0.0; kx];
        let mut by = vec![0.0; ky];
        self.grid.gx.basis_values(p[0], &mut bx)?;
        self.grid.gy.basis_values(p[1], &mut by)?;
        let mut acc = 0.0;
        for ix in 0..kx {
            let w = bx[ix];
            if w != 0.0 {
                let row = &self.coeffs[ix * ky..(ix + 1) * ky];
                let dot: f64 = row.iter().zip(&by).map(|(c, b)| c * b).sum();
                acc += w * dot;
            }
        }
        Ok(acc)
    }

    /// Gradient via the tensor-product derivative bases.
    pub fn eval_gradient(&self, p: [f64; 2]) -> Result<[f64; 2], SplineError> {
        let kx = self.grid.gx.count();
        let ky = self.grid.gy.count();
        let mut bx = vec![0.0; kx];
        let mut by = vec![0.0; ky];
        let mut dbx = vec![0.0; kx];
        let mut dby = vec![0.0; ky];
        self.grid.gx.basis_values(p[0], &mut bx)?;
        self.grid.gy.basis_values(p[1], &mut by)?;
        self.grid.gx.basis_derivatives(p[0], &mut dbx)?;
        self.grid.gy.basis_derivatives(p[1], &mut dby)?;
        let mut gx = 0.0;
        let mut gy = 0.0;
        for ix in 0..kx {
            let row = &self.coeffs[ix * ky..(ix + 1) * ky];
            let dot: f64 = row.iter().zip(&by).map(|(c, b)| c * b).sum();
            let ddot: f64 = row.iter().zip(&dby).map(|(c, b)| c * b).sum();
            gx += dbx[ix] * dot;
            gy += bx[ix] * ddot;
        }
        Ok([gx, gy])
    }

    /// Evaluate on the full lattice `xs × ys`; output index is `iy * xs.len() + ix`.
    pub fn eval_lattice(&self, xs: &[f64], ys: &[f64]) -> Result<Vec<f64>, SplineError> {
        let kx = self.grid.gx.count();
        let ky = self.grid.gy.count();
        let nx = xs.len();
        let ny = ys.len();
        let mut bx = vec![0.0; nx * kx];
        for (i, &x) in xs.iter().enumerate() {
            self.grid.gx.basis_values(x, &mut bx[i * kx..(i + 1) * kx])?;
        }
        let mut by = vec![0.0; ky];
        let mut out = vec![0.0; nx * ny];
        let mut tmp = vec![0.0; kx];
        for (iy, &y) in ys.iter().enumerate() {
            self.grid.gy.basis_values(y, &mut by)?;
            for ix_k in 0..kx {
                let row = &self.coeffs[ix_k * ky..(ix_k + 1) * ky];
                tmp[ix_k] = row.iter().zip(&by).map(|(c, b)| c * b).sum();
            }
            let dst = &mut out[iy * nx..(iy + 1) * nx];
            for (i, slot) in dst.iter_mut().enumerate() {
                let bxi = &bx[i * kx..(i + 1) * kx];
                *slot = bxi.iter().zip(&tmp).map(|(b, t)| b * t).sum();
            }
        }
        Ok(out)
    }
}

/// Sample sites with observed values and a nominal mesh size.
#[derive(Debug, Clone, PartialEq)]
pub enum Sites {
    One(Vec<f64>),
    Two(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    sites: Sites,
    values: Vec<f64>,
    mesh_h: f64,
}

impl SampleSet {
    pub fn new_1d(xs: Vec<f64>, values: Vec<f64>, mesh_h: Option<f64>) -> Result<Self, SplineError> {
        if xs.len() != values.len() {
            return Err(SplineError::BadSamples(format!(
                "{} sites vs {} values",
                xs.len(),
                values.len()
            )));
        }
        if xs.is_empty() {
            return Err(SplineError::BadSamples("empty sample set".into()));
        }
        if xs.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(SplineError::BadSamples("non-finite site or value".into()));
        }
        let mesh_h = match mesh_h {
            Some(h) => h,
            None => estimate_mesh_1d(&xs),
        };
        if !(mesh_h > 0.0) {
            return Err(SplineError::BadSamples(format!("mesh size {mesh_h} must be positive")));
        }
        Ok(Self {
            sites: Sites::One(xs),
            values,
            mesh_h,
        })
    }

    pub fn new_2d(
        sites: Vec<[f64; 2]>,
        values: Vec<f64>,
        mesh_h: Option<f64>,
    ) -> Result<Self, SplineError> {
        if sites.len() != values.len() {
            return Err(SplineError::BadSamples(format!(
                "{} sites vs {} values",
                sites.len(),
                values.len()
            )));
        }
        if sites.is_empty() {
            return Err(SplineError::BadSamples("empty sample set".into()));
        }
        if sites.iter().flatten().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(SplineError::BadSamples("non-finite site or value".into()));
        }
        let mesh_h = match mesh_h {
            Some(h) => h,
            None => estimate_mesh_2d(&sites),
        };
        if !(mesh_h > 0.0) {
            return Err(SplineError::BadSamples(format!("mesh size {mesh_h} must be positive")));
        }
        Ok(Self {
            sites: Sites::Two(sites),
            values,
            mesh_h,
        })
    }

    pub fn dim(&self) -> usize {
        match self.sites {
            Sites::One(_) => 1,
            Sites::Two(_) => 2,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mesh_h(&self) -> f64 {
        self.mesh_h
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn xs(&self) -> Option<&[f64]> {
        match &self.sites {
            Sites::One(v) => Some(v),
            Sites::Two(_) => None,
        }
    }

    pub fn sites_2d(&self) -> Option<&[[f64; 2]]> {
        match &self.sites {
            Sites::Two(v) => Some(v),
            Sites::One(_) => None,
        }
    }

    /// Same sites, different values (used by noise injection and extension).
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self, SplineError> {
        if values.len() != self.len() {
            return Err(SplineError::BadSamples(format!(
                "{} values for {} sites",
                values.len(),
                self.len()
            )));
        }
        Ok(Self {
            sites: self.sites.clone(),
            values,
            mesh_h: self.mesh_h,
        })
    }
}

fn estimate_mesh_1d(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut gaps: Vec<f64> = sorted.windows(2).map(|w| w[1] - w[0]).filter(|g| *g > 0.0).collect();
    if gaps.is_empty() {
        return 0.0;
    }
    gaps.sort_by(|a, b| a.total_cmp(b));
    gaps[gaps.len() / 2]
}

fn estimate_mesh_2d(sites: &[[f64; 2]]) -> f64 {
    if sites.len() < 2 {
        return 0.0;
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in sites {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let span = (x1 - x0).max(y1 - y0).max(f64::MIN_POSITIVE);
    // Bucket sites so nearest-neighbor search stays near-linear.
    let cell = span / (sites.len() as f64).sqrt().max(1.0);
    let nx = ((x1 - x0) / cell).ceil() as i64 + 1;
    let key = |p: &[f64; 2]| -> (i64, i64) {
        (((p[0] - x0) / cell) as i64, ((p[1] - y0) / cell) as i64)
    };
    let mut buckets: std::collections::HashMap<(i64, i64), Vec<usize>> = std::collections::HashMap::new();
    for (i, p) in sites.iter().enumerate() {
        buckets.entry(key(p)).or_default().push(i);
    }
    let _ = nx;
    let mut nn = Vec::with_capacity(sites.len());
    for (i, p) in sites.iter().enumerate() {
        let (kx, ky) = key(p);
        let mut best = f64::INFINITY;
        let mut ring = 1i64;
        loop {
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    if let Some(ids) = buckets.get(&(kx + dx, ky + dy)) {
                        for &j in ids {
                            if j != i {
                                let d = ((sites[j][0] - p[0]).powi(2)
                                    + (sites[j][1] - p[1]).powi(2))
                                .sqrt();
                                best = best.min(d);
                            }
                        }
                    }
                }
            }
            // A hit within `ring` cells is conclusive once the ring radius
            // exceeds the best distance found.
            if best <= ring as f64 * cell || ring as f64 * cell > span {
                break;
            }
            ring += 1;
        }
        if best.is_finite() {
            nn.push(best);
        }
    }
    if nn.is_empty() {
        return 0.0;
    }
    nn.sort_by(|a, b| a.total_cmp(b));
    nn[nn.len() / 2]
}

/// Result of a well-posed least-squares spline fit.
#[derive(Debug, Clone)]
pub struct SplineFit<S> {
    pub spline: S,
    pub residual_rms: f64,
    pub residual_ss: f64,
    /// Smallest singular value of the design matrix relative to the largest.
    pub rel_sigma_min: f64,
}

/// Column-major design matrix of basis values at a fixed site list.
#[derive(Debug, Clone)]
pub(crate) struct Design {
    pub m: usize,
    pub n: usize,
    cols: Vec<f64>,
}

impl Design {
    pub fn new_1d(grid: &KnotGrid1D, xs: &[f64]) -> Result<Self, SplineError> {
        let m = xs.len();
        let n = grid.count();
        let mut cols = vec![0.0; m * n];
        let mut row = vec![0.0; n];
        for (i, &x) in xs.iter().enumerate() {
            grid.basis_values(x, &mut row)?;
            for j in 0..n {
                cols[j * m + i] = row[j];
            }
        }
        Ok(Self { m, n, cols })
    }

    pub fn new_2d(grid: &KnotGrid2D, sites: &[[f64; 2]]) -> Result<Self, SplineError> {
        let m = sites.len();
        let kx = grid.gx.count();
        let ky = grid.gy.count();
        let n = kx * ky;
        let mut cols = vec![0.0; m * n];
        let mut bx = vec![0.0; kx];
        let mut by = vec![0.0; ky];
        for (i, p) in sites.iter().enumerate() {
            grid.gx.basis_values(p[0], &mut bx)?;
            grid.gy.basis_values(p[1], &mut by)?;
            for jx in 0..kx {
                let w = bx[jx];
                if w != 0.0 {
                    for jy in 0..ky {
                        cols[(jx * ky + jy) * m + i] = w * by[jy];
                    }
                }
            }
        }
        Ok(Self { m, n, cols })
    }

    /// Predicted values at every design site.
    pub fn matvec(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.n);
        let mut out = vec![0.0; self.m];
        for (j, &c) in coeffs.iter().enumerate() {
            if c != 0.0 {
                let col = &self.cols[j * self.m..(j + 1) * self.m];
                for (o, v) in out.iter_mut().zip(col) {
                    *o += c * v;
                }
            }
        }
        out
    }

    /// Least squares over all rows.
    pub fn fit(&self, values: &[f64]) -> Result<crate::linalg::LsqOutcome, SplineError> {
        assert_eq!(values.len(), self.m);
        if self.m < self.n {
            return Err(SplineError::TooFewSamples {
                samples: self.m,
                coeffs: self.n,
            });
        }
        let mut work = self.cols.clone();
        let mut rhs = values.to_vec();
        let out = householder_lsq(self.m, self.n, &mut work, &mut rhs);
        if out.rel_sigma_min() <= WELL_POSED_THRESHOLD {
            return Err(SplineError::IllPosed {
                rel_sigma_min: out.rel_sigma_min(),
            });
        }
        Ok(out)
    }

    /// Least squares over a row subset, with the right-hand side given in the
    /// same order as `rows`.
    pub fn fit_rows(&self, rows: &[usize], rhs: &[f64]) -> Result<crate::linalg::LsqOutcome, SplineError> {
        assert_eq!(rows.len(), rhs.len());
        let ms = rows.len();
        if ms < self.n {
            return Err(SplineError::TooFewSamples {
                samples: ms,
                coeffs: self.n,
            });
        }
        let mut work = vec![0.0; ms * self.n];
        for j in 0..self.n {
            let col = &self.cols[j * self.m..(j + 1) * self.m];
            let dst = &mut work[j * ms..(j + 1) * ms];
            for (t, &r) in rows.iter().enumerate() {
                dst[t] = col[r];
            }
        }
        let mut rhs = rhs.to_vec();
        let out = householder_lsq(ms, self.n, &mut work, &mut rhs);
        if out.rel_sigma_min() <= WELL_POSED_THRESHOLD {
            return Err(SplineError::IllPosed {
                rel_sigma_min: out.rel_sigma_min(),
            });
        }
        Ok(out)
    }
}

/// Fit a univariate spline to samples by least squares.
pub fn fit_spline_1d(samples: &SampleSet, grid: &KnotGrid1D) -> Result<SplineFit<Spline1D>, SplineError> {
    let xs = samples.xs().ok_or(SplineError::DimensionMismatch {
        expected: 1,
        got: samples.dim(),
    })?;
    let design = Design::new_1d(grid, xs)?;
    let out = design.fit(samples.values())?;
    let rel = out.rel_sigma_min();
    let rms = (out.residual_ss / samples.len() as f64).sqrt();
    Ok(SplineFit {
        spline: Spline1D::new(grid.clone(), out.coeffs)?,
        residual_rms: rms,
        residual_ss: out.residual_ss,
        rel_sigma_min: rel,
    })
}

/// Fit a bivariate tensor-product spline to samples by least squares.
pub fn fit_spline_2d(samples: &SampleSet, grid: &KnotGrid2D) -> Result<SplineFit<Spline2D>, SplineError> {
    let sites = samples.sites_2d().ok_or(SplineError::DimensionMismatch {
        expected: 2,
        got: samples.dim(),
    })?;
    let design = Design::new_2d(grid, sites)?;
    let out = design.fit(samples.values())?;
    let rel = out.rel_sigma_min();
    let rms = (out.residual_ss / samples.len() as f64).sqrt();
    Ok(SplineFit {
        spline: Spline2D::new(grid.clone(), out.coeffs)?,
        residual_rms: rms,
        residual_ss: out.residual_ss,
        rel_sigma_min: rel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn knot_grid_matches_stated_lattices() {
        let g = KnotGrid1D::new(-3.0, 3.0, 1.5).unwrap();
        assert_eq!(g.count(), 5);
        let knots: Vec<f64> = g.knots().collect();
        assert_eq!(knots, vec![-3.0, -1.5, 0.0, 1.5, 3.0]);

        let g = KnotGrid1D::new(-2.0, 2.0, 2.0).unwrap();
        assert_eq!(g.count(), 3);
        assert_eq!(g.knots().collect::<Vec<_>>(), vec![-2.0, 0.0, 2.0]);

        let g = KnotGrid1D::new(0.0, 1.0, 1.0).unwrap();
        assert_eq!(g.count(), 2);
    }

    #[test]
    fn non_divisible_span_rejected() {
        let err = KnotGrid1D::new(0.0, 1.0, 0.3).unwrap_err();
        match err {
            SplineError::NonDivisibleSpan { residual, .. } => assert!(residual > 1e-3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn cardinal_property_all_grid_sizes() {
        for delta in [1.5, 2.0, 3.0, 6.0, 0.75] {
            let g = KnotGrid1D::new(-3.0, 3.0, delta).unwrap();
            for i in 0..g.count() {
                for j in 0..g.count() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    let got = g.basis_value(j, g.knot(i)).unwrap();
                    assert!(
                        (got - want).abs() < 1e-12,
                        "B_{j}(t_{i}) = {got} on delta {delta}"
                    );
                }
            }
        }
    }

    #[test]
    fn partition_of_unity() {
        let g = KnotGrid1D::new(-3.0, 3.0, 1.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut buf = vec![0.0; g.count()];
        for _ in 0..100 {
            let x = rng.gen_range(-3.0..3.0);
            g.basis_values(x, &mut buf).unwrap();
            let s: f64 = buf.iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "sum {s} at {x}");
        }
    }

    #[test]
    fn basis_matches_dense_collocation_oracle() {
        // Oracle: per-interval cubic coefficients solved directly from the
        // interpolation + C1 + C2 + not-a-knot equations, independent of the
        // second-derivative construction used by the implementation.
        let g = KnotGrid1D::new(-3.0, 3.0, 1.5).unwrap();
        let k = g.count();
        let nseg = k - 1;
        let delta = g.delta();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for m in 0..k {
            let nunk = 4 * nseg;
            let mut sys = vec![0.0; nunk * nunk];
            let mut rhs = vec![0.0; nunk];
            let mut row = 0;
            let mut set = |sys: &mut [f64], row: usize, col: usize, v: f64| {
                sys[col * nunk + row] = v;
            };
            // Interpolation of the unit vector at both ends of every interval.
            for s in 0..nseg {
                set(&mut sys, row, 4 * s, 1.0);
                rhs[row] = if m == s { 1.0 } else { 0.0 };
                row += 1;
                for p in 0..4 {
                    set(&mut sys, row, 4 * s + p, delta.powi(p as i32));
                }
                rhs[row] = if m == s + 1 { 1.0 } else { 0.0 };
                row += 1;
            }
            // C1 and C2 continuity at interior knots.
            for s in 0..nseg - 1 {
                set(&mut sys, row, 4 * s + 1, 1.0);
                set(&mut sys, row, 4 * s + 2, 2.0 * delta);
                set(&mut sys, row, 4 * s + 3, 3.0 * delta * delta);
                set(&mut sys, row, 4 * (s + 1) + 1, -1.0);
                row += 1;
                set(&mut sys, row, 4 * s + 2, 2.0);
                set(&mut sys, row, 4 * s + 3, 6.0 * delta);
                set(&mut sys, row, 4 * (s + 1) + 2, -2.0);
                row += 1;
            }
            // Not-a-knot: third derivative continuous at the second and
            // second-to-last knots.
            set(&mut sys, row, 3, 1.0);
            set(&mut sys, row, 4 + 3, -1.0);
            row += 1;
            set(&mut sys, row, 4 * (nseg - 2) + 3, 1.0);
            set(&mut sys, row, 4 * (nseg - 1) + 3, -1.0);
            row += 1;
            assert_eq!(row, nunk);
            let perm = crate::linalg::lu_factor(nunk, &mut sys).unwrap();
            crate::linalg::lu_solve(nunk, &sys, &perm, &mut rhs);

            for _ in 0..20 {
                let x = rng.gen_range(-3.0..3.0);
                let s = (((x + 3.0) / delta) as usize).min(nseg - 1);
                let tau = x - (-3.0 + s as f64 * delta);
                let c = &rhs[4 * s..4 * s + 4];
                let want = c[0] + tau * (c[1] + tau * (c[2] + tau * c[3]));
                let got = g.basis_value(m, x).unwrap();
                assert!((got - want).abs() < 1e-10, "B_{m}({x}): {got} vs {want}");
            }
        }
    }

    #[test]
    fn spline_reproduces_cubic() {
        let g = KnotGrid1D::new(-3.0, 3.0, 1.5).unwrap();
        let p = |x: f64| x * x * x;
        let coeffs: Vec<f64> = g.knots().map(p).collect();
        let s = Spline1D::new(g, coeffs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x = rng.gen_range(-3.0..3.0);
            assert!((s.eval(x).unwrap() - p(x)).abs() < 1e-9);
        }
    }

    #[test]
    fn eval_out_of_domain_errors() {
        let g = KnotGrid1D::new(-3.0, 3.0, 1.5).unwrap();
        let s = Spline1D::new(g, vec![1.0; 5]).unwrap();
        assert!(matches!(s.eval(3.5), Err(SplineError::OutOfDomain { .. })));
        assert!((s.eval(3.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn c2_continuity_across_knots() {
        // One-sided 4-point second-difference stencils are exact on cubics, so
        // the only mismatch left across a knot is the (zero) jump in s''.
        let g = KnotGrid1D::new(-3.0, 3.0, 1.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let coeffs: Vec<f64> = (0..g.count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = Spline1D::new(g.clone(), coeffs).unwrap();
        let e = 1e-4;
        for j in 1..g.count() - 1 {
            let t = g.knot(j);
            let f = |x: f64| s.eval(x).unwrap();
            let left = (2.0 * f(t) - 5.0 * f(t - e) + 4.0 * f(t - 2.0 * e) - f(t - 3.0 * e)) / (e * e);
            let right = (2.0 * f(t) - 5.0 * f(t + e) + 4.0 * f(t + 2.0 * e) - f(t + 3.0 * e)) / (e * e);
            assert!((left - right).abs() < 1e-6, "knot {j}: {left} vs {right}");
        }
    }

    #[test]
    fn tensor_product_reproduces_bicubic() {
        let grid = KnotGrid2D::square(-3.0, 3.0, 2.0).unwrap();
        let q = |x: f64, y: f64| x.powi(3) * y * y;
        let mut coeffs = vec![0.0; grid.coeff_count()];
        for (ix, tx) in grid.gx.knots().enumerate() {
            for (iy, ty) in grid.gy.knots().enumerate() {
                coeffs[ix * grid.gy.count() + iy] = q(tx, ty);
            }
        }
        let s = Spline2D::new(grid, coeffs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let p = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            assert!((s.eval(p).unwrap() - q(p[0], p[1])).abs() < 1e-8);
        }
    }

    #[test]
    fn spline2d_cardinal_at_knots_and_lattice_consistency() {
        let grid = KnotGrid2D::square(-2.0, 2.0, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let coeffs: Vec<f64> = (0..grid.coeff_count()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let s = Spline2D::new(grid.clone(), coeffs.clone()).unwrap();
        for ix in 0..grid.gx.count() {
            for iy in 0..grid.gy.count() {
                let v = s.eval([grid.gx.knot(ix), grid.gy.knot(iy)]).unwrap();
                assert!((v - s.coeff(ix, iy)).abs() < 1e-10);
            }
        }
        let xs: Vec<f64> = (0..9).map(|i| -2.0 + 0.5 * i as f64).collect();
        let ys: Vec<f64> = (0..5).map(|i| -2.0 + 1.0 * i as f64).collect();
        let lat = s.eval_lattice(&xs, &ys).unwrap();
        for (iy, &y) in ys.iter().enumerate() {
            for (ix, &x) in xs.iter().enumerate() {
                let direct = s.eval([x, y]).unwrap();
                assert!((lat[iy * xs.len() + ix] - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn linearity_of_evaluation() {
        let g = KnotGrid1D::new(-3.0, 3.0, 1.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let c1: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let c2: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let combo: Vec<f64> = c1.iter().zip(&c2).map(|(x, y)| a * x + b * y).collect();
            let s1 = Spline1D::new(g.clone(), c1).unwrap();
            let s2 = Spline1D::new(g.clone(), c2).unwrap();
            let sc = Spline1D::new(g.clone(), combo).unwrap();
            let x = rng.gen_range(-3.0..3.0);
            let want = a * s1.eval(x).unwrap() + b * s2.eval(x).unwrap();
            assert!((sc.eval(x).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_recovers_in_space_spline() {
        let g = KnotGrid1D::new(-3.0, 3.0, 1.5).unwrap();
        let truth = Spline1D::new(g.clone(), vec![0.4, -1.2, 2.0, 0.3, -0.7]).unwrap();
        let xs: Vec<f64> = (0..61).map(|i| -3.0 + 0.1 * i as f64).collect();
        let vals: Vec<f64> = xs.iter().map(|&x| truth.eval(x).unwrap()).collect();
        let samples = SampleSet::new_1d(xs, vals, Some(0.1)).unwrap();
        let fit = fit_spline_1d(&samples, &g).unwrap();
        for (got, want) in fit.spline.coeffs().iter().zip(truth.coeffs()) {
            assert!((got - want).abs() < 1e-9);
        }
        assert!(fit.residual_rms < 1e-10);
    }

    #[test]
    fn fit_cubic_data_sup_error() {
        let g = KnotGrid1D::new(-3.0, 3.0, 1.5).unwrap();
        let xs: Vec<f64> = (0..301).map(|i| -3.0 + 0.02 * i as f64).collect();
        let vals: Vec<f64> = xs.iter().map(|&x| x * x * x).collect();
        let samples = SampleSet::new_1d(xs.clone(), vals, Some(0.02)).unwrap();
        let fit = fit_spline_1d(&samples, &g).unwrap();
        let sup = xs
            .iter()
            .map(|&x| (fit.spline.eval(x).unwrap() - x * x * x).abs())
            .fold(0.0f64, f64::max);
        assert!(sup < 1e-9, "sup {sup}");
    }

    #[test]
    fn fit_with_too_few_samples_errors() {
        let g = KnotGrid1D::new(-3.0, 3.0, 1.5).unwrap();
        let xs = vec![-2.0, 0.0, 1.0];
        let vals = vec![1.0, 2.0, 3.0];
        let samples = SampleSet::new_1d(xs, vals, Some(1.0)).unwrap();
        assert!(matches!(
            fit_spline_1d(&samples, &g),
            Err(SplineError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn mesh_estimation() {
        let xs: Vec<f64> = (0..11).map(|i| i as f64 * 0.5).collect();
        let s = SampleSet::new_1d(xs, vec![0.0; 11], None).unwrap();
        assert!((s.mesh_h() - 0.5).abs() < 1e-12);

        let mut sites = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                sites.push([i as f64 * 0.25, j as f64 * 0.25]);
            }
        }
        let s = SampleSet::new_2d(sites, vec![0.0; 100], None).unwrap();
        assert!((s.mesh_h() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn grid_serde_round_trip() {
        let g = KnotGrid1D::new(-3.0, 3.0, 1.5).unwrap();
        let s = Spline1D::new(g, vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back: Spline1D = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        assert!((back.eval(0.7).unwrap() - s.eval(0.7).unwrap()).abs() < 1e-15);
    }
}
