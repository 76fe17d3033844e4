//! Cost functionals for the piecewise-smooth fitting problems: univariate
//! min/max and plus-part compositions, the bivariate max-of-three crease
//! objective, the jump objective with its full/restricted/extended inner
//! least-squares variants, and the three-corner objective.
//!
//! Every functional is a pure function of `(params, spec)`. The spec owns the
//! precomputed design matrices, so repeated evaluations (the optimizer's inner
//! loop) cost one or two row-subset least-squares solves plus some distance
//! queries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    classify_restricted_from_values, exclude_boundary_neighbors, extract_zero_set, GeometryError,
    Label, Polyline, Rect, Segmentation,
};
use crate::linalg::householder_lsq;
use crate::spline::{
    Design, KnotGrid1D, KnotGrid2D, SampleSet, Spline2D, SplineError, WELL_POSED_THRESHOLD,
};

#[derive(Error, Debug)]
pub enum ObjectiveError {
    #[error("parameter vector has length {got}, expected {expected}")]
    ParamLength { expected: usize, got: usize },
    #[error("operation {op} is not defined for problem kind {kind:?}")]
    KindMismatch { op: &'static str, kind: ProblemKind },
    #[error("sample set is {got}-dimensional, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("extension needs at least one source sample")]
    EmptyExtensionSource,
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Which composition the optimizer is fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    UnivMin,
    UnivMax,
    UnivPlusPart,
    MaxOfThree,
    Jump,
    ThreeCorner,
}

/// Inner least-squares flavor for the jump objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpVariant {
    /// Side fits over all points of each sign.
    Full,
    /// Side fits exclude the band within `h` of the zero curve.
    #[default]
    Restricted,
    /// Restricted fits augmented with extension values across the band.
    Extended,
}

#[derive(Debug, Clone)]
pub struct JumpOptions {
    pub variant: JumpVariant,
    /// Multiplier on the sample mesh for the exclusion threshold `h`.
    pub h_multiplier: f64,
    /// Nearest same-side samples feeding each extension fit.
    pub extension_neighborhood: usize,
    /// Report the restricted/extended residual as the outer value instead of
    /// the sign-membership sum.
    pub outer_extended: bool,
    /// Marching-squares lattice spacing; defaults to half the sample mesh.
    pub zero_set_resolution: Option<f64>,
    /// Grid for the side fits; defaults to the curve grid.
    pub side_grid: Option<KnotGrid2D>,
}

impl Default for JumpOptions {
    fn default() -> Self {
        Self {
            variant: JumpVariant::Restricted,
            h_multiplier: 1.0,
            extension_neighborhood: 16,
            outer_extended: false,
            zero_set_resolution: None,
            side_grid: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CornerOptions {
    /// Length-scale margin for the pairwise-boundary exclusion band.
    pub band: f64,
    /// Exclude labeled samples whose grid 4-neighborhood disagrees.
    pub neighbor_exclusion: bool,
    /// Grid for the sector fits; defaults to the label grid.
    pub side_grid: Option<KnotGrid2D>,
}

impl Default for CornerOptions {
    fn default() -> Self {
        Self {
            band: 0.0,
            neighbor_exclusion: true,
            side_grid: None,
        }
    }
}

/// A fitting problem bound to its samples and knot grids, with the design
/// matrices precomputed.
pub struct ProblemSpec {
    kind: ProblemKind,
    samples: SampleSet,
    grid1: Option<KnotGrid1D>,
    grid2: Option<KnotGrid2D>,
    jump: JumpOptions,
    corner: CornerOptions,
    design_main: Design,
    /// Design for inner side fits when a separate grid is configured.
    design_side: Option<Design>,
    side_grid: Option<KnotGrid2D>,
    penalty: f64,
}

impl ProblemSpec {
    pub fn univariate(
        kind: ProblemKind,
        samples: SampleSet,
        grid: KnotGrid1D,
    ) -> Result<Self, ObjectiveError> {
        if !matches!(
            kind,
            ProblemKind::UnivMin | ProblemKind::UnivMax | ProblemKind::UnivPlusPart
        ) {
            return Err(ObjectiveError::KindMismatch {
                op: "univariate",
                kind,
            });
        }
        let xs = samples.xs().ok_or(ObjectiveError::DimensionMismatch {
            expected: 1,
            got: samples.dim(),
        })?;
        let design_main = Design::new_1d(&grid, xs)?;
        let penalty = penalty_for(&samples);
        Ok(Self {
            kind,
            samples,
            grid1: Some(grid),
            grid2: None,
            jump: JumpOptions::default(),
            corner: CornerOptions::default(),
            design_main,
            design_side: None,
            side_grid: None,
            penalty,
        })
    }

    pub fn max_of_three(samples: SampleSet, grid: KnotGrid2D) -> Result<Self, ObjectiveError> {
        let sites = samples.sites_2d().ok_or(ObjectiveError::DimensionMismatch {
            expected: 2,
            got: samples.dim(),
        })?;
        let design_main = Design::new_2d(&grid, sites)?;
        let penalty = penalty_for(&samples);
        Ok(Self {
            kind: ProblemKind::MaxOfThree,
            samples,
            grid1: None,
            grid2: Some(grid),
            jump: JumpOptions::default(),
            corner: CornerOptions::default(),
            design_main,
            design_side: None,
            side_grid: None,
            penalty,
        })
    }

    pub fn jump(
        samples: SampleSet,
        grid: KnotGrid2D,
        opts: JumpOptions,
    ) -> Result<Self, ObjectiveError> {
        let sites = samples.sites_2d().ok_or(ObjectiveError::DimensionMismatch {
            expected: 2,
            got: samples.dim(),
        })?;
        let design_main = Design::new_2d(&grid, sites)?;
        let design_side = match &opts.side_grid {
            Some(g) => Some(Design::new_2d(g, sites)?),
            None => None,
        };
        let penalty = penalty_for(&samples);
        let side_grid = opts.side_grid.clone();
        Ok(Self {
            kind: ProblemKind::Jump,
            samples,
            grid1: None,
            grid2: Some(grid),
            jump: opts,
            corner: CornerOptions::default(),
            design_main,
            design_side,
            side_grid,
            penalty,
        })
    }

    pub fn three_corner(
        samples: SampleSet,
        grid: KnotGrid2D,
        opts: CornerOptions,
    ) -> Result<Self, ObjectiveError> {
        let sites = samples.sites_2d().ok_or(ObjectiveError::DimensionMismatch {
            expected: 2,
            got: samples.dim(),
        })?;
        let design_main = Design::new_2d(&grid, sites)?;
        let design_side = match &opts.side_grid {
            Some(g) => Some(Design::new_2d(g, sites)?),
            None => None,
        };
        let penalty = penalty_for(&samples);
        let side_grid = opts.side_grid.clone();
        Ok(Self {
            kind: ProblemKind::ThreeCorner,
            samples,
            grid1: None,
            grid2: Some(grid),
            jump: JumpOptions::default(),
            corner: opts,
            design_main,
            design_side,
            side_grid,
            penalty,
        })
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn samples(&self) -> &SampleSet {
        &self.samples
    }

    pub fn grid_1d(&self) -> Option<&KnotGrid1D> {
        self.grid1.as_ref()
    }

    pub fn grid_2d(&self) -> Option<&KnotGrid2D> {
        self.grid2.as_ref()
    }

    pub fn side_grid_2d(&self) -> Option<&KnotGrid2D> {
        self.side_grid.as_ref().or(self.grid2.as_ref())
    }

    pub fn jump_options(&self) -> &JumpOptions {
        &self.jump
    }

    pub fn corner_options(&self) -> &CornerOptions {
        &self.corner
    }

    /// Penalty reported for degenerate segmentations (data-scaled).
    pub fn penalty_value(&self) -> f64 {
        self.penalty
    }

    /// Number of free parameters seen by the optimizer.
    pub fn dim(&self) -> usize {
        match self.kind {
            ProblemKind::UnivMin | ProblemKind::UnivMax | ProblemKind::UnivPlusPart => {
                2 * self.grid1.as_ref().expect("univariate grid").count()
            }
            ProblemKind::MaxOfThree | ProblemKind::ThreeCorner => {
                3 * self.grid2.as_ref().expect("2d grid").coeff_count()
            }
            ProblemKind::Jump => self.grid2.as_ref().expect("2d grid").coeff_count(),
        }
    }

    fn check_params(&self, params: &[f64]) -> Result<(), ObjectiveError> {
        if params.len() != self.dim() {
            return Err(ObjectiveError::ParamLength {
                expected: self.dim(),
                got: params.len(),
            });
        }
        Ok(())
    }

    fn side_design(&self) -> &Design {
        self.design_side.as_ref().unwrap_or(&self.design_main)
    }

    /// Total objective as a closure for the optimizer. Parameter length is
    /// validated by the pipeline before the loop starts; evaluation itself
    /// never fails, mapping degenerate segmentations to the penalty value.
    pub fn objective(&self) -> impl Fn(&[f64]) -> f64 + Sync + '_ {
        move |params: &[f64]| match self.kind {
            ProblemKind::UnivMin | ProblemKind::UnivMax => {
                f1_min(params, self).expect("validated params")
            }
            ProblemKind::UnivPlusPart => f2_pluspart(params, self).expect("validated params"),
            ProblemKind::MaxOfThree => fa_max3(params, self).expect("validated params"),
            ProblemKind::Jump => fb(params, self).expect("validated params").value,
            ProblemKind::ThreeCorner => fc(params, self).expect("validated params").value,
        }
    }
}

fn penalty_for(samples: &SampleSet) -> f64 {
    10.0 * samples.values().iter().map(|v| v * v).sum::<f64>()
}

/// The plus-part operation `(t)₊`.
pub fn plus_part(t: f64) -> f64 {
    if t >= 0.0 {
        t
    } else {
        0.0
    }
}

/// Sum of squared residuals of the min (or max) composition of two splines on
/// the problem grid; `params` is the concatenation of both coefficient blocks.
pub fn f1_min(params: &[f64], spec: &ProblemSpec) -> Result<f64, ObjectiveError> {
    let use_max = match spec.kind {
        ProblemKind::UnivMin => false,
        ProblemKind::UnivMax => true,
        kind => return Err(ObjectiveError::KindMismatch { op: "f1_min", kind }),
    };
    spec.check_params(params)?;
    let k = params.len() / 2;
    let left = spec.design_main.matvec(&params[..k]);
    let right = spec.design_main.matvec(&params[k..]);
    let mut acc = 0.0;
    for ((f, l), r) in spec.samples.values().iter().zip(&left).zip(&right) {
        let composed = if use_max { l.max(*r) } else { l.min(*r) };
        let resid = f - composed;
        acc += resid * resid;
    }
    Ok(acc)
}

/// Plus-part reformulation: residuals of `g₁ - (g₂)₊`.
pub fn f2_pluspart(params: &[f64], spec: &ProblemSpec) -> Result<f64, ObjectiveError> {
    if spec.kind != ProblemKind::UnivPlusPart {
        return Err(ObjectiveError::KindMismatch {
            op: "f2_pluspart",
            kind: spec.kind,
        });
    }
    spec.check_params(params)?;
    let k = params.len() / 2;
    let g1 = spec.design_main.matvec(&params[..k]);
    let g2 = spec.design_main.matvec(&params[k..]);
    let mut acc = 0.0;
    for ((f, a), b) in spec.samples.values().iter().zip(&g1).zip(&g2) {
        let resid = f - (a - plus_part(*b));
        acc += resid * resid;
    }
    Ok(acc)
}

/// Sum of squared residuals of the max of three bivariate splines.
pub fn fa_max3(params: &[f64], spec: &ProblemSpec) -> Result<f64, ObjectiveError> {
    if spec.kind != ProblemKind::MaxOfThree {
        return Err(ObjectiveError::KindMismatch {
            op: "fa_max3",
            kind: spec.kind,
        });
    }
    spec.check_params(params)?;
    let n = params.len() / 3;
    let g1 = spec.design_main.matvec(&params[..n]);
    let g2 = spec.design_main.matvec(&params[n..2 * n]);
    let g3 = spec.design_main.matvec(&params[2 * n..]);
    let mut acc = 0.0;
    for i in 0..spec.samples.len() {
        let composed = g1[i].max(g2[i]).max(g3[i]);
        let resid = spec.samples.values()[i] - composed;
        acc += resid * resid;
    }
    Ok(acc)
}

/// Values predicted at target points by moving local polynomial fits, exact
/// for total-degree-3 polynomials when the local fit is well posed.
#[derive(Debug, Clone)]
pub struct Extension {
    pub values: Vec<f64>,
    /// Set when any local fit fell back to a lower degree.
    pub degraded: bool,
}

pub fn extend_data(
    side_samples: &SampleSet,
    targets: &[[f64; 2]],
    neighborhood: usize,
) -> Result<Extension, ObjectiveError> {
    let sites = side_samples
        .sites_2d()
        .ok_or(ObjectiveError::DimensionMismatch {
            expected: 2,
            got: side_samples.dim(),
        })?;
    extend_from_parts(sites, side_samples.values(), targets, neighborhood)
}

fn extend_from_parts(
    sites: &[[f64; 2]],
    values: &[f64],
    targets: &[[f64; 2]],
    neighborhood: usize,
) -> Result<Extension, ObjectiveError> {
    if sites.is_empty() {
        return Err(ObjectiveError::EmptyExtensionSource);
    }
    let mut out = Vec::with_capacity(targets.len());
    let mut degraded = false;
    let mut order: Vec<usize> = Vec::new();
    for &t in targets {
        order.clear();
        order.extend(0..sites.len());
        let count = neighborhood.min(sites.len()).max(1);
        let dist_sq = |i: usize| {
            let d0 = sites[i][0] - t[0];
            let d1 = sites[i][1] - t[1];
            d0 * d0 + d1 * d1
        };
        if count < sites.len() {
            order.select_nth_unstable_by(count - 1, |&a, &b| dist_sq(a).total_cmp(&dist_sq(b)));
            order.truncate(count);
        }
        // Scale local coordinates by the neighborhood radius for conditioning.
        let radius = order
            .iter()
            .map(|&i| dist_sq(i).sqrt())
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);
        let (value, fell_back) = local_poly_predict(sites, values, &order, t, radius);
        degraded |= fell_back;
        out.push(value);
    }
    Ok(Extension {
        values: out,
        degraded,
    })
}

/// Bivariate monomial powers of total degree ≤ d, constant term first.
fn monomial_powers(degree: usize) -> Vec<(u32, u32)> {
    let mut p = Vec::new();
    for total in 0..=degree as u32 {
        for px in (0..=total).rev() {
            p.push((px, total - px));
        }
    }
    p
}

fn local_poly_predict(
    sites: &[[f64; 2]],
    values: &[f64],
    chosen: &[usize],
    target: [f64; 2],
    radius: f64,
) -> (f64, bool) {
    for degree in (0..=3usize).rev() {
        let powers = monomial_powers(degree);
        let ncols = powers.len();
        if chosen.len() < ncols {
            continue;
        }
        let m = chosen.len();
        let mut a = vec![0.0; m * ncols];
        for (row, &i) in chosen.iter().enumerate() {
            let ux = (sites[i][0] - target[0]) / radius;
            let uy = (sites[i][1] - target[1]) / radius;
            for (col, &(px, py)) in powers.iter().enumerate() {
                a[col * m + row] = ux.powi(px as i32) * uy.powi(py as i32);
            }
        }
        let mut rhs: Vec<f64> = chosen.iter().map(|&i| values[i]).collect();
        let out = householder_lsq(m, ncols, &mut a, &mut rhs);
        if out.rel_sigma_min() > WELL_POSED_THRESHOLD {
            // Local coordinates are centered on the target, so the prediction
            // is the constant term.
            return (out.coeffs[0], degree < 3);
        }
    }
    // Last resort: average of the neighborhood.
    let mean = chosen.iter().map(|&i| values[i]).sum::<f64>() / chosen.len() as f64;
    (mean, true)
}

/// Inner fits attached to an objective evaluation.
#[derive(Debug, Clone)]
pub enum InnerFits {
    Jump {
        plus: Option<Spline2D>,
        minus: Option<Spline2D>,
    },
    Sheets([Option<Spline2D>; 3]),
}

/// Value of a segmentation-based objective together with the linearly solved
/// inner splines and the segmentation they were fitted on.
#[derive(Debug, Clone)]
pub struct ObjectiveValue {
    pub value: f64,
    pub inner: InnerFits,
    pub segmentation: Segmentation,
    /// Zero level set of the curve spline (jump objective only).
    pub curves: Vec<Polyline>,
    pub well_posed: bool,
    pub degraded_extension: bool,
}

enum SideOutcome {
    Empty,
    Fitted { coeffs: Vec<f64>, residual_ss: f64 },
    Degenerate,
}

fn fit_side(design: &Design, rows: &[usize], rhs: &[f64]) -> SideOutcome {
    if rows.is_empty() {
        return SideOutcome::Empty;
    }
    match design.fit_rows(rows, rhs) {
        Ok(out) => SideOutcome::Fitted {
            coeffs: out.coeffs,
            residual_ss: out.residual_ss,
        },
        Err(SplineError::TooFewSamples { .. }) | Err(SplineError::IllPosed { .. }) => {
            SideOutcome::Degenerate
        }
        Err(e) => unreachable!("design rows are precomputed: {e}"),
    }
}

/// Jump objective: segment by the sign (and, for the restricted variants, the
/// distance to the zero set) of the curve spline given by `params`, solve the
/// side fits linearly, and report the outer sign-membership residual.
pub fn fb(params: &[f64], spec: &ProblemSpec) -> Result<ObjectiveValue, ObjectiveError> {
    if spec.kind != ProblemKind::Jump {
        return Err(ObjectiveError::KindMismatch {
            op: "fb",
            kind: spec.kind,
        });
    }
    spec.check_params(params)?;
    let grid = spec.grid2.as_ref().expect("jump grid");
    let sites = spec.samples.sites_2d().expect("2d samples");
    let values = spec.samples.values();
    let gamma_vals = spec.design_main.matvec(params);

    let opts = &spec.jump;
    let h = spec.samples.mesh_h() * opts.h_multiplier;
    let (segmentation, curves) = match opts.variant {
        JumpVariant::Full => {
            let labels = gamma_vals
                .iter()
                .map(|&v| {
                    if v > 0.0 {
                        Label::Plus
                    } else if v < 0.0 {
                        Label::Minus
                    } else {
                        Label::Excluded
                    }
                })
                .collect();
            (Segmentation::new(labels), Vec::new())
        }
        JumpVariant::Restricted | JumpVariant::Extended => {
            let gamma = Spline2D::new(grid.clone(), params.to_vec())?;
            let rect = Rect::new(grid.gx.a(), grid.gx.b(), grid.gy.a(), grid.gy.b());
            let resolution = opts.zero_set_resolution.unwrap_or_else(|| {
                crate::geometry::default_zero_set_resolution(spec.samples.mesh_h(), &gamma)
            });
            let curves = extract_zero_set(&gamma, rect, resolution)?;
            let seg = classify_restricted_from_values(&gamma_vals, sites, &curves, h);
            (seg, curves)
        }
    };

    let labels = segmentation.labels();
    let mut plus_rows = Vec::new();
    let mut minus_rows = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        match l {
            Label::Plus => plus_rows.push(i),
            Label::Minus => minus_rows.push(i),
            _ => {}
        }
    }
    let sign_plus: Vec<usize> = (0..gamma_vals.len()).filter(|&i| gamma_vals[i] > 0.0).collect();
    let sign_minus: Vec<usize> = (0..gamma_vals.len()).filter(|&i| gamma_vals[i] < 0.0).collect();

    let design = spec.side_design();
    let mut degraded_extension = false;

    let mut solve_side = |fit_rows: &[usize]| -> Result<SideOutcome, ObjectiveError> {
        match opts.variant {
            JumpVariant::Full | JumpVariant::Restricted => {
                let rhs: Vec<f64> = fit_rows.iter().map(|&i| values[i]).collect();
                Ok(fit_side(design, fit_rows, &rhs))
            }
            JumpVariant::Extended => {
                // X̂ = X \ (other side's restricted set): own restricted rows
                // plus the excluded band, with band values filled by extension.
                if fit_rows.is_empty() {
                    return Ok(SideOutcome::Empty);
                }
                let mut rows = fit_rows.to_vec();
                let mut rhs: Vec<f64> = fit_rows.iter().map(|&i| values[i]).collect();
                let band: Vec<usize> = labels
                    .iter()
                    .enumerate()
                    .filter_map(|(i, &l)| (l == Label::Excluded).then_some(i))
                    .collect();
                if !band.is_empty() {
                    let src_sites: Vec<[f64; 2]> = fit_rows.iter().map(|&i| sites[i]).collect();
                    let src_values: Vec<f64> = fit_rows.iter().map(|&i| values[i]).collect();
                    let targets: Vec<[f64; 2]> = band.iter().map(|&i| sites[i]).collect();
                    let ext = extend_from_parts(
                        &src_sites,
                        &src_values,
                        &targets,
                        opts.extension_neighborhood,
                    )?;
                    degraded_extension |= ext.degraded;
                    rows.extend_from_slice(&band);
                    rhs.extend_from_slice(&ext.values);
                }
                Ok(fit_side(design, &rows, &rhs))
            }
        }
    };

    let plus_outcome = solve_side(&plus_rows)?;
    let minus_outcome = solve_side(&minus_rows)?;

    // A side whose sign set is populated but whose fit set is empty or rank
    // deficient leaves those residuals undefined: report the penalty.
    let degenerate = |outcome: &SideOutcome, sign_rows: &[usize]| match outcome {
        SideOutcome::Degenerate => true,
        SideOutcome::Empty => !sign_rows.is_empty(),
        SideOutcome::Fitted { .. } => false,
    };
    if degenerate(&plus_outcome, &sign_plus) || degenerate(&minus_outcome, &sign_minus) {
        return Ok(ObjectiveValue {
            value: spec.penalty,
            inner: InnerFits::Jump {
                plus: None,
                minus: None,
            },
            segmentation,
            curves,
            well_posed: false,
            degraded_extension,
        });
    }

    let side_grid = spec.side_grid_2d().expect("jump side grid").clone();
    let mut inner_residual = 0.0;
    let mut spline_of =
        |outcome: SideOutcome| -> Result<(Option<Spline2D>, Option<Vec<f64>>), ObjectiveError> {
            match outcome {
                SideOutcome::Fitted { coeffs, residual_ss } => {
                    inner_residual += residual_ss;
                    let pred = design.matvec(&coeffs);
                    Ok((Some(Spline2D::new(side_grid.clone(), coeffs)?), Some(pred)))
                }
                _ => Ok((None, None)),
            }
        };
    let (plus_spline, plus_pred) = spline_of(plus_outcome)?;
    let (minus_spline, minus_pred) = spline_of(minus_outcome)?;

    let value = if opts.outer_extended {
        inner_residual
    } else {
        // Outer sum with sign membership: every sample charges the side its
        // sign selects, regardless of the exclusion band used for the fits.
        let mut acc = 0.0;
        for i in 0..gamma_vals.len() {
            let pred = if gamma_vals[i] > 0.0 {
                plus_pred.as_ref().map(|p| p[i])
            } else if gamma_vals[i] < 0.0 {
                minus_pred.as_ref().map(|p| p[i])
            } else {
                None
            };
            if let Some(p) = pred {
                let r = values[i] - p;
                acc += r * r;
            }
        }
        acc
    };

    Ok(ObjectiveValue {
        value,
        inner: InnerFits::Jump {
            plus: plus_spline,
            minus: minus_spline,
        },
        segmentation,
        curves,
        well_posed: true,
        degraded_extension,
    })
}

/// Three-corner objective: argmax of three label splines segments the samples,
/// each sector gets a linear spline fit, and the value is the sum of the
/// per-sector residuals over the unexcluded sets.
pub fn fc(params: &[f64], spec: &ProblemSpec) -> Result<ObjectiveValue, ObjectiveError> {
    if spec.kind != ProblemKind::ThreeCorner {
        return Err(ObjectiveError::KindMismatch {
            op: "fc",
            kind: spec.kind,
        });
    }
    spec.check_params(params)?;
    let sites = spec.samples.sites_2d().expect("2d samples");
    let values = spec.samples.values();
    let n = params.len() / 3;
    let v1 = spec.design_main.matvec(&params[..n]);
    let v2 = spec.design_main.matvec(&params[n..2 * n]);
    let v3 = spec.design_main.matvec(&params[2 * n..]);

    let margins = if spec.corner.band > 0.0 {
        let grid = spec.grid2.as_ref().expect("corner grid");
        let splines = [
            Spline2D::new(grid.clone(), params[..n].to_vec())?,
            Spline2D::new(grid.clone(), params[n..2 * n].to_vec())?,
            Spline2D::new(grid.clone(), params[2 * n..].to_vec())?,
        ];
        let mut m = Vec::with_capacity(sites.len());
        for (i, &p) in sites.iter().enumerate() {
            let trio = [v1[i], v2[i], v3[i]];
            let mut order = [0usize, 1, 2];
            order.sort_by(|&a, &b| trio[b].total_cmp(&trio[a]));
            let gt = splines[order[0]].eval_gradient(p)?;
            let gs = splines[order[1]].eval_gradient(p)?;
            m.push(spec.corner.band * (gt[0] - gs[0]).hypot(gt[1] - gs[1]));
        }
        Some(m)
    } else {
        None
    };
    let mut segmentation =
        crate::geometry::segment_by_max_from_values([&v1, &v2, &v3], margins.as_deref());
    if spec.corner.neighbor_exclusion {
        segmentation = exclude_boundary_neighbors(sites, spec.samples.mesh_h(), &segmentation);
    }

    let design = spec.side_design();
    let mut sheets: [Option<Spline2D>; 3] = [None, None, None];
    let side_grid = spec.side_grid_2d().expect("corner side grid").clone();
    let mut value = 0.0;
    let mut any_fitted = false;
    let mut well_posed = true;
    for sector in 0..3u8 {
        let rows = segmentation.indices_with(Label::Sector(sector));
        let rhs: Vec<f64> = rows.iter().map(|&i| values[i]).collect();
        match fit_side(design, &rows, &rhs) {
            SideOutcome::Empty => {}
            SideOutcome::Degenerate => {
                well_posed = false;
            }
            SideOutcome::Fitted { coeffs, residual_ss } => {
                any_fitted = true;
                value += residual_ss;
                sheets[sector as usize] = Some(Spline2D::new(side_grid.clone(), coeffs)?);
            }
        }
    }
    // A label holding a few stray points (rank-deficient fit) or a
    // segmentation covering nothing at all is degenerate.
    if !well_posed || !any_fitted {
        return Ok(ObjectiveValue {
            value: spec.penalty,
            inner: InnerFits::Sheets([None, None, None]),
            segmentation,
            curves: Vec::new(),
            well_posed: false,
            degraded_extension: false,
        });
    }
    Ok(ObjectiveValue {
        value,
        inner: InnerFits::Sheets(sheets),
        segmentation,
        curves: Vec::new(),
        well_posed: true,
        degraded_extension: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spline::Spline1D;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn univ_grid() -> KnotGrid1D {
        KnotGrid1D::new(-3.0, 3.0, 1.5).unwrap()
    }

    fn univ_samples(f: impl Fn(f64) -> f64) -> SampleSet {
        let xs: Vec<f64> = (0..301).map(|i| -3.0 + 0.02 * i as f64).collect();
        let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        SampleSet::new_1d(xs, vals, Some(0.02)).unwrap()
    }

    fn knot_values_2d(grid: &KnotGrid2D, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let ky = grid.gy.count();
        let mut coeffs = vec![0.0; grid.coeff_count()];
        for (ix, tx) in grid.gx.knots().enumerate() {
            for (iy, ty) in grid.gy.knots().enumerate() {
                coeffs[ix * ky + iy] = f(tx, ty);
            }
        }
        coeffs
    }

    fn grid_samples_2d(lo: f64, hi: f64, h: f64, f: impl Fn(f64, f64) -> f64) -> SampleSet {
        let n = ((hi - lo) / h).round() as usize + 1;
        let mut sites = Vec::with_capacity(n * n);
        let mut vals = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                let p = [lo + i as f64 * h, lo + j as f64 * h];
                sites.push(p);
                vals.push(f(p[0], p[1]));
            }
        }
        SampleSet::new_2d(sites, vals, Some(h)).unwrap()
    }

    #[test]
    fn plus_part_cases() {
        assert_eq!(plus_part(3.0), 3.0);
        assert_eq!(plus_part(-2.0), 0.0);
        assert_eq!(plus_part(0.0), 0.0);
    }

    #[test]
    fn f1_zero_at_generating_params() {
        let grid = univ_grid();
        let left = Spline1D::new(grid.clone(), vec![2.0, 0.5, -0.2, 0.6, 1.8]).unwrap();
        let right = Spline1D::new(grid.clone(), vec![-1.5, 0.2, 1.0, 0.3, -1.0]).unwrap();
        let samples = univ_samples(|x| left.eval(x).unwrap().min(right.eval(x).unwrap()));
        let spec = ProblemSpec::univariate(ProblemKind::UnivMin, samples, grid).unwrap();
        let mut params = left.coeffs().to_vec();
        params.extend_from_slice(right.coeffs());
        let v = f1_min(&params, &spec).unwrap();
        assert!(v < 1e-18 * 301.0, "value {v}");
    }

    #[test]
    fn f1_equal_splines_reduces_to_single_sse() {
        let grid = univ_grid();
        let samples = univ_samples(|x| x.sin());
        let spec =
            ProblemSpec::univariate(ProblemKind::UnivMin, samples.clone(), grid.clone()).unwrap();
        let coeffs = vec![0.3, -0.4, 0.9, 0.1, -0.6];
        let mut params = coeffs.clone();
        params.extend_from_slice(&coeffs);
        let spline = Spline1D::new(grid, coeffs).unwrap();
        let direct: f64 = samples
            .xs()
            .unwrap()
            .iter()
            .zip(samples.values())
            .map(|(&x, &f)| {
                let r = f - spline.eval(x).unwrap();
                r * r
            })
            .sum();
        let v = f1_min(&params, &spec).unwrap();
        assert!((v - direct).abs() < 1e-12 * direct.max(1.0));
    }

    #[test]
    fn f1_matches_naive_loop_exactly() {
        let grid = KnotGrid1D::new(-3.0, 3.0, 1.5).unwrap();
        let xs: Vec<f64> = (0..11).map(|i| -3.0 + 0.6 * i as f64).collect();
        let vals: Vec<f64> = xs.iter().map(|&x| (x * 0.9).cos()).collect();
        let samples = SampleSet::new_1d(xs.clone(), vals.clone(), Some(0.6)).unwrap();
        let spec = ProblemSpec::univariate(ProblemKind::UnivMin, samples, grid.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let params: Vec<f64> = (0..10).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let left = Spline1D::new(grid.clone(), params[..5].to_vec()).unwrap();
            let right = Spline1D::new(grid.clone(), params[5..].to_vec()).unwrap();
            let mut naive = 0.0;
            for (&x, &f) in xs.iter().zip(&vals) {
                let composed = left.eval(x).unwrap().min(right.eval(x).unwrap());
                let r = f - composed;
                naive += r * r;
            }
            assert_eq!(f1_min(&params, &spec).unwrap(), naive);
        }
    }

    #[test]
    fn f2_f1_equivalence_identity() {
        // min(a, b) = a - (a - b)₊, mapped block-wise through the linear space.
        let grid = univ_grid();
        let samples = univ_samples(|x| (x * 0.5).sin() + 0.2 * x);
        let spec_min =
            ProblemSpec::univariate(ProblemKind::UnivMin, samples.clone(), grid.clone()).unwrap();
        let spec_plus = ProblemSpec::univariate(ProblemKind::UnivPlusPart, samples, grid).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let a: Vec<f64> = (0..5).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..5).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let mut p1 = a.clone();
            p1.extend_from_slice(&b);
            let mut p2 = a.clone();
            p2.extend(a.iter().zip(&b).map(|(x, y)| x - y));
            let v1 = f1_min(&p1, &spec_min).unwrap();
            let v2 = f2_pluspart(&p2, &spec_plus).unwrap();
            assert!((v1 - v2).abs() < 1e-12, "{v1} vs {v2}");
        }
    }

    #[test]
    fn f2_nonpositive_second_block_is_single_sse() {
        let grid = univ_grid();
        let samples = univ_samples(|x| 0.1 * x * x);
        let spec =
            ProblemSpec::univariate(ProblemKind::UnivPlusPart, samples.clone(), grid.clone())
                .unwrap();
        let g1 = vec![0.5, -0.1, 0.2, 0.7, -0.3];
        let g2 = vec![-1.0; 5]; // strictly negative spline
        let mut params = g1.clone();
        params.extend_from_slice(&g2);
        let spline = Spline1D::new(grid, g1).unwrap();
        let direct: f64 = samples
            .xs()
            .unwrap()
            .iter()
            .zip(samples.values())
            .map(|(&x, &f)| {
                let r = f - spline.eval(x).unwrap();
                r * r
            })
            .sum();
        let v = f2_pluspart(&params, &spec).unwrap();
        assert!((v - direct).abs() < 1e-12 * direct.max(1.0));
    }

    #[test]
    fn fa_cases() {
        let grid = KnotGrid2D::square(-2.0, 2.0, 2.0).unwrap();
        let n = grid.coeff_count();
        let samples = grid_samples_2d(-2.0, 2.0, 0.8, |x, y| x + y);
        let spec = ProblemSpec::max_of_three(samples.clone(), grid.clone()).unwrap();

        // Equal triplets reduce to a single-spline SSE.
        let c = knot_values_2d(&grid, |x, y| 0.2 * x - 0.1 * y + 0.5);
        let mut params = c.clone();
        params.extend_from_slice(&c);
        params.extend_from_slice(&c);
        let spline = Spline2D::new(grid.clone(), c).unwrap();
        let direct: f64 = samples
            .sites_2d()
            .unwrap()
            .iter()
            .zip(samples.values())
            .map(|(&p, &f)| {
                let r = f - spline.eval(p).unwrap();
                r * r
            })
            .sum();
        assert!((fa_max3(&params, &spec).unwrap() - direct).abs() < 1e-12 * direct.max(1.0));

        // Exact at generating parameters.
        let c1 = knot_values_2d(&grid, |x, _| x);
        let c2 = knot_values_2d(&grid, |x, _| -x);
        let c3 = knot_values_2d(&grid, |_, y| y);
        let s = [
            Spline2D::new(grid.clone(), c1.clone()).unwrap(),
            Spline2D::new(grid.clone(), c2.clone()).unwrap(),
            Spline2D::new(grid.clone(), c3.clone()).unwrap(),
        ];
        let gen_samples = grid_samples_2d(-2.0, 2.0, 0.8, |x, y| {
            s[0].eval([x, y])
                .unwrap()
                .max(s[1].eval([x, y]).unwrap())
                .max(s[2].eval([x, y]).unwrap())
        });
        let spec2 = ProblemSpec::max_of_three(gen_samples, grid.clone()).unwrap();
        let mut gen_params = c1;
        gen_params.extend_from_slice(&c2);
        gen_params.extend_from_slice(&c3);
        assert!(fa_max3(&gen_params, &spec2).unwrap() < 1e-20);

        // Brute-force oracle, summation order included.
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let small = grid_samples_2d(-2.0, 2.0, 1.0, |x, y| (x * y).sin());
        let spec3 = ProblemSpec::max_of_three(small.clone(), grid.clone()).unwrap();
        for _ in 0..5 {
            let params: Vec<f64> = (0..3 * n).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let sp: Vec<Spline2D> = (0..3)
                .map(|b| Spline2D::new(grid.clone(), params[b * n..(b + 1) * n].to_vec()).unwrap())
                .collect();
            let mut naive = 0.0;
            for (&p, &f) in small.sites_2d().unwrap().iter().zip(small.values()) {
                let composed = sp[0]
                    .eval(p)
                    .unwrap()
                    .max(sp[1].eval(p).unwrap())
                    .max(sp[2].eval(p).unwrap());
                let r = f - composed;
                naive += r * r;
            }
            assert_eq!(fa_max3(&params, &spec3).unwrap(), naive);
        }
    }

    #[test]
    fn extension_exact_for_cubics() {
        let p = |x: f64, y: f64| x * x * x - 2.0 * x * y * y;
        let side = grid_samples_2d(0.0, 2.0, 0.25, p);
        let targets = [[-0.3, 0.4], [1.0, -0.2], [2.3, 1.1]];
        let ext = extend_data(&side, &targets, 16).unwrap();
        assert!(!ext.degraded);
        for (t, v) in targets.iter().zip(&ext.values) {
            assert!((v - p(t[0], t[1])).abs() < 1e-8, "at {t:?}: {v}");
        }
    }

    #[test]
    fn extension_constant_data() {
        let side = grid_samples_2d(0.0, 1.0, 0.25, |_, _| 4.2);
        let ext = extend_data(&side, &[[2.0, 2.0]], 16).unwrap();
        assert!((ext.values[0] - 4.2).abs() < 1e-10);
    }

    #[test]
    fn extension_degrades_on_collinear_sources() {
        let sites = vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        let side = SampleSet::new_2d(sites, vec![1.0, 2.0, 3.0], Some(1.0)).unwrap();
        let ext = extend_data(&side, &[[1.0, 1.0]], 16).unwrap();
        assert!(ext.degraded);
        assert!(ext.values[0].is_finite());
    }

    fn jump_spec(variant: JumpVariant, f: impl Fn(f64, f64) -> f64) -> ProblemSpec {
        let grid = KnotGrid2D::square(-3.0, 3.0, 1.5).unwrap();
        let samples = grid_samples_2d(-3.0, 3.0, 0.25, f);
        ProblemSpec::jump(
            samples,
            grid,
            JumpOptions {
                variant,
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn fb_strictly_positive_gamma_is_single_sse() {
        for variant in [JumpVariant::Full, JumpVariant::Restricted] {
            let spec = jump_spec(variant, |x, y| (0.3 * x).sin() + 0.1 * y);
            let grid = spec.grid_2d().unwrap().clone();
            let params = knot_values_2d(&grid, |_, _| 1.0);
            let out = fb(&params, &spec).unwrap();
            assert!(out.well_posed);
            let fit = crate::spline::fit_spline_2d(spec.samples(), &grid).unwrap();
            assert!(
                (out.value - fit.residual_ss).abs() < 1e-10 * fit.residual_ss.max(1.0),
                "{} vs {}",
                out.value,
                fit.residual_ss
            );
            match out.inner {
                InnerFits::Jump { plus, minus } => {
                    assert!(plus.is_some());
                    assert!(minus.is_none());
                }
                _ => panic!("wrong inner kind"),
            }
        }
    }

    #[test]
    fn fb_sign_flip_swaps_roles() {
        let spec = jump_spec(JumpVariant::Restricted, |x, y| {
            if y > 0.15 * x {
                5.0 + 0.2 * x
            } else {
                0.1 * y
            }
        });
        let grid = spec.grid_2d().unwrap().clone();
        let params = knot_values_2d(&grid, |_, y| y);
        let flipped: Vec<f64> = params.iter().map(|v| -v).collect();
        let a = fb(&params, &spec).unwrap();
        let b = fb(&flipped, &spec).unwrap();
        assert!((a.value - b.value).abs() < 1e-9 * a.value.max(1.0));
        assert_eq!(
            a.segmentation.count(Label::Plus),
            b.segmentation.count(Label::Minus)
        );
        assert_eq!(
            a.segmentation.count(Label::Excluded),
            b.segmentation.count(Label::Excluded)
        );
    }

    #[test]
    fn fb_scale_invariance_of_segmentation() {
        let spec = jump_spec(JumpVariant::Restricted, |x, y| {
            if y > 0.15 * x {
                5.0
            } else {
                0.0
            }
        });
        let grid = spec.grid_2d().unwrap().clone();
        let params = knot_values_2d(&grid, |x, y| y - 0.15 * x);
        let scaled: Vec<f64> = params.iter().map(|v| 3.7 * v).collect();
        let a = fb(&params, &spec).unwrap();
        let b = fb(&scaled, &spec).unwrap();
        assert_eq!(a.segmentation.labels(), b.segmentation.labels());
    }

    #[test]
    fn fb_known_jump_oracle() {
        // Jump across y = 0 between two in-space splines; with the exact
        // level-set parameters the restricted sides fit their pieces exactly.
        let grid = KnotGrid2D::square(-3.0, 3.0, 1.5).unwrap();
        let plus_piece = Spline2D::new(
            grid.clone(),
            knot_values_2d(&grid, |x, y| 4.0 + 0.3 * x - 0.2 * y),
        )
        .unwrap();
        let minus_piece =
            Spline2D::new(grid.clone(), knot_values_2d(&grid, |x, y| 0.2 * x * y)).unwrap();
        let samples = grid_samples_2d(-3.0, 3.0, 0.25, |x, y| {
            if y > 0.0 {
                plus_piece.eval([x, y]).unwrap()
            } else {
                minus_piece.eval([x, y]).unwrap()
            }
        });
        let h = samples.mesh_h();
        let spec = ProblemSpec::jump(samples, grid.clone(), JumpOptions::default()).unwrap();
        let params = knot_values_2d(&grid, |_, y| y);
        let out = fb(&params, &spec).unwrap();
        assert!(out.well_posed);
        let sites = spec.samples().sites_2d().unwrap();
        for (i, &l) in out.segmentation.labels().iter().enumerate() {
            let y = sites[i][1];
            match l {
                Label::Plus => assert!(y > 0.0 && y.abs() > h * 0.999),
                Label::Minus => assert!(y < 0.0 && y.abs() > h * 0.999),
                Label::Excluded => assert!(y.abs() <= h * 1.5 + 1e-9, "excluded at {y}"),
                Label::Sector(_) => panic!("unexpected sector label"),
            }
        }
        assert!(out.value < 1e-14, "outer value {}", out.value);
    }

    #[test]
    fn fb_monotone_penalty_for_flipped_far_point() {
        // Jump of size 10 with exact pieces: flipping far samples onto the
        // wrong side cannot decrease the sign-membership objective.
        let grid = KnotGrid2D::square(-3.0, 3.0, 2.0).unwrap();
        let samples = grid_samples_2d(-3.0, 3.0, 0.25, |_, y| if y > 0.0 { 10.0 } else { 0.0 });
        let spec = ProblemSpec::jump(
            samples,
            grid.clone(),
            JumpOptions {
                variant: JumpVariant::Full,
                ..Default::default()
            },
        )
        .unwrap();
        let params = knot_values_2d(&grid, |_, y| y);
        let base = fb(&params, &spec).unwrap().value;
        // Push the coefficient at knot (x=1, y=3) down hard: samples near that
        // knot flip from plus to minus while the far field keeps its sign.
        let ky = grid.gy.count();
        let ix = grid.gx.knots().position(|t| t == 1.0).unwrap();
        let iy = grid.gy.knots().position(|t| t == 3.0).unwrap();
        let mut perturbed = params.clone();
        perturbed[ix * ky + iy] = -8.0;
        let worse = fb(&perturbed, &spec).unwrap().value;
        assert!(
            worse > base + 1.0,
            "flipping a far point should cost O(jump²): {base} -> {worse}"
        );
    }

    #[test]
    fn fb_extended_variant_fits_across_band() {
        let grid = KnotGrid2D::square(-3.0, 3.0, 1.5).unwrap();
        let plus = |x: f64, y: f64| 5.0 + 0.5 * x - 0.3 * y;
        let minus = |x: f64, y: f64| 0.3 * x * y;
        let samples = grid_samples_2d(-3.0, 3.0, 0.25, |x, y| {
            if y > 0.0 {
                plus(x, y)
            } else {
                minus(x, y)
            }
        });
        let spec = ProblemSpec::jump(
            samples,
            grid.clone(),
            JumpOptions {
                variant: JumpVariant::Extended,
                ..Default::default()
            },
        )
        .unwrap();
        let params = knot_values_2d(&grid, |_, y| y);
        let out = fb(&params, &spec).unwrap();
        assert!(out.well_posed);
        // Extension of polynomial data is exact, so the fits still reproduce
        // the pieces and the outer value stays at machine scale.
        assert!(out.value < 1e-12, "outer value {}", out.value);
    }

    fn corner_spec(f: impl Fn(f64, f64) -> f64) -> ProblemSpec {
        let grid = KnotGrid2D::square(-2.0, 2.0, 2.0).unwrap();
        let samples = grid_samples_2d(-2.0, 2.0, 0.125, f);
        ProblemSpec::three_corner(samples, grid, CornerOptions::default()).unwrap()
    }

    #[test]
    fn fc_single_active_label() {
        let spec = corner_spec(|x, y| 0.3 * x + 0.1 * y);
        let grid = spec.grid_2d().unwrap().clone();
        let mut params = knot_values_2d(&grid, |_, _| 1.0);
        params.extend(knot_values_2d(&grid, |_, _| 0.0));
        params.extend(knot_values_2d(&grid, |_, _| -1.0));
        let out = fc(&params, &spec).unwrap();
        assert!(out.well_posed);
        assert_eq!(out.segmentation.count(Label::Sector(0)), spec.samples().len());
        let fit = crate::spline::fit_spline_2d(spec.samples(), &grid).unwrap();
        assert!((out.value - fit.residual_ss).abs() < 1e-9 * fit.residual_ss.max(1.0));
    }

    #[test]
    fn fc_label_permutation_symmetry() {
        let spec = corner_spec(|x, y| {
            let th = y.atan2(x);
            if th > 0.5 && th < 2.6 {
                0.0
            } else if th <= 0.5 && th > -1.6 {
                5.0
            } else {
                10.0
            }
        });
        let grid = spec.grid_2d().unwrap().clone();
        let b1 = knot_values_2d(&grid, |_, y| y);
        let b2 = knot_values_2d(&grid, |x, _| x);
        let b3 = knot_values_2d(&grid, |x, y| -x - y);
        let mut p123 = b1.clone();
        p123.extend_from_slice(&b2);
        p123.extend_from_slice(&b3);
        let mut p312 = b3.clone();
        p312.extend_from_slice(&b1);
        p312.extend_from_slice(&b2);
        let a = fc(&p123, &spec).unwrap();
        let b = fc(&p312, &spec).unwrap();
        assert!((a.value - b.value).abs() < 1e-10 * a.value.max(1.0));
    }

    #[test]
    fn fc_matches_known_segmentation_oracle() {
        // Sectors defined by three affine label functions; data equal to a
        // different in-space sheet per sector. Fitting each sector under the
        // same segmentation reproduces fc's value.
        let grid = KnotGrid2D::square(-2.0, 2.0, 2.0).unwrap();
        let l1 = |_x: f64, y: f64| y;
        let l2 = |x: f64, y: f64| -0.8 * x - 0.4 * y;
        let l3 = |x: f64, y: f64| 0.8 * x - 0.4 * y;
        let sheet = [
            |x: f64, y: f64| 1.0 + 0.1 * x + 0.2 * y,
            |x: f64, _y: f64| 6.0 - 0.3 * x,
            |_x: f64, y: f64| 11.0 + 0.2 * y,
        ];
        let label_of = move |x: f64, y: f64| -> usize {
            let v = [l1(x, y), l2(x, y), l3(x, y)];
            let mut best = 0;
            for k in 1..3 {
                if v[k] > v[best] {
                    best = k;
                }
            }
            best
        };
        let samples = grid_samples_2d(-2.0, 2.0, 0.125, |x, y| sheet[label_of(x, y)](x, y));
        let spec =
            ProblemSpec::three_corner(samples.clone(), grid.clone(), CornerOptions::default())
                .unwrap();
        let mut params = knot_values_2d(&grid, l1);
        params.extend(knot_values_2d(&grid, l2));
        params.extend(knot_values_2d(&grid, l3));
        let out = fc(&params, &spec).unwrap();
        assert!(out.well_posed);

        // Oracle: fit each sector on the same banded segmentation directly.
        let mut oracle = 0.0;
        let sites = samples.sites_2d().unwrap();
        for sector in 0..3u8 {
            let rows = out.segmentation.indices_with(Label::Sector(sector));
            if rows.is_empty() {
                continue;
            }
            let sub_sites: Vec<[f64; 2]> = rows.iter().map(|&i| sites[i]).collect();
            let sub_vals: Vec<f64> = rows.iter().map(|&i| samples.values()[i]).collect();
            let sub = SampleSet::new_2d(sub_sites, sub_vals, Some(samples.mesh_h())).unwrap();
            let fit = crate::spline::fit_spline_2d(&sub, &grid).unwrap();
            oracle += fit.residual_ss;
        }
        assert!(
            (out.value - oracle).abs() < 1e-10 + 1e-9 * oracle.max(1.0),
            "{} vs {}",
            out.value,
            oracle
        );
        // Affine sheets are representable, so the value sits at machine floor.
        assert!(out.value < 1e-10, "value {}", out.value);
    }

    #[test]
    fn fc_all_ties_penalized() {
        let spec = corner_spec(|x, _| x);
        let grid = spec.grid_2d().unwrap().clone();
        let c = knot_values_2d(&grid, |x, y| 0.1 * x + 0.7 * y);
        let mut params = c.clone();
        params.extend_from_slice(&c);
        params.extend_from_slice(&c);
        let out = fc(&params, &spec).unwrap();
        assert!(!out.well_posed);
        assert_eq!(out.value, spec.penalty_value());
    }

    #[test]
    fn objective_values_nonnegative() {
        let spec = jump_spec(JumpVariant::Restricted, |x, y| if y > 0.0 { 3.0 + x } else { -y });
        let grid = spec.grid_2d().unwrap().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let obj = spec.objective();
        for _ in 0..5 {
            let params: Vec<f64> =
                (0..grid.coeff_count()).map(|_| rng.gen_range(-2.0..2.0)).collect();
            assert!(obj(&params) >= 0.0);
        }
    }

    #[test]
    fn param_length_checked() {
        let spec = corner_spec(|x, _| x);
        assert!(matches!(
            fc(&[0.0; 5], &spec),
            Err(ObjectiveError::ParamLength { .. })
        ));
    }
}
