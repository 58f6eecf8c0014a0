//! Parameter-space exploration: 2D slice classification through the magic
//! simplex, constrained minimization of the witness over the state family,
//! and sweeps of the Horodecki parameter.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::mubs::{mub_family, MubError};
use crate::simplex::{
    coeffs_from_family, horodecki_params, ppt_min_eig_coeffs, FamilyParams, SimplexCoeffs,
    SimplexError,
};
use crate::witness::{LabelingMode, McpEvaluator, WitnessError};

/// Minimum partial-transpose eigenvalue above which a state counts as PPT.
pub const PPT_FEASIBLE_TOL: f64 = -1e-9;
/// Physicality tolerance on the smallest simplex coefficient.
pub const PHYSICAL_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid slice spec: {0}")]
    InvalidSpec(String),
    #[error("sweep range [{0}, {1}] outside [0, 5]")]
    OutOfRange(f64, f64),
    #[error("optimization not supported for dimension {0}")]
    UnsupportedDimension(usize),
    #[error(transparent)]
    Mub(#[from] MubError),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
    #[error(transparent)]
    Witness(#[from] WitnessError),
}

/// A 2D window {q1, q2} through the d=3 simplex at fixed q3.
#[derive(Debug, Clone, Serialize)]
pub struct SliceSpec {
    pub q3: f64,
    pub q1_range: (f64, f64),
    pub q2_range: (f64, f64),
    /// Grid points per axis.
    pub resolution: usize,
}

impl SliceSpec {
    fn validate(&self) -> Result<(), SearchError> {
        if self.q1_range.0 >= self.q1_range.1 || self.q2_range.0 >= self.q2_range.1 {
            return Err(SearchError::InvalidSpec("ranges need lo < hi".into()));
        }
        if self.resolution < 2 {
            return Err(SearchError::InvalidSpec("resolution must be >= 2".into()));
        }
        Ok(())
    }

    pub fn q1_at(&self, ix: usize) -> f64 {
        let (lo, hi) = self.q1_range;
        lo + (hi - lo) * ix as f64 / (self.resolution - 1) as f64
    }

    pub fn q2_at(&self, iy: usize) -> f64 {
        let (lo, hi) = self.q2_range;
        lo + (hi - lo) * iy as f64 / (self.resolution - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellClass {
    Unphysical,
    SeparableOrUndetected,
    FreeEntangled,
    BoundEntangled,
}

impl CellClass {
    pub fn label(self) -> &'static str {
        match self {
            CellClass::Unphysical => "unphysical",
            CellClass::SeparableOrUndetected => "separable-or-undetected",
            CellClass::FreeEntangled => "free-entangled",
            CellClass::BoundEntangled => "bound-entangled",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridCell {
    pub q1: f64,
    pub q2: f64,
    pub physical: bool,
    pub ppt: bool,
    pub witness: f64,
    pub min_pt_eig: f64,
    pub class: CellClass,
}

/// Row-major classification of a slice: cell (iy, ix) sits at
/// (q1_at(ix), q2_at(iy)); rows iterate q2 ascending.
#[derive(Debug, Clone, Serialize)]
pub struct ClassifiedGrid {
    pub spec: SliceSpec,
    pub cells: Vec<GridCell>,
}

impl ClassifiedGrid {
    pub fn cell(&self, iy: usize, ix: usize) -> &GridCell {
        &self.cells[iy * self.spec.resolution + ix]
    }
}

fn classify(coeffs: &SimplexCoeffs, witness: f64, min_pt_eig: f64) -> CellClass {
    if !coeffs.is_physical(PHYSICAL_TOL) {
        CellClass::Unphysical
    } else if min_pt_eig < PPT_FEASIBLE_TOL {
        CellClass::FreeEntangled
    } else if witness < 0.0 {
        CellClass::BoundEntangled
    } else {
        CellClass::SeparableOrUndetected
    }
}

/// Classifies every cell of the slice. Cells are independent work items;
/// the output order (and content) does not depend on the rayon thread count.
pub fn scan_slice(spec: &SliceSpec, mode: &LabelingMode) -> Result<ClassifiedGrid, SearchError> {
    spec.validate()?;
    let fam = mub_family(3)?;
    let eval = McpEvaluator::new(&fam)?;
    let n = spec.resolution;
    let cells: Vec<GridCell> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (iy, ix) = (idx / n, idx % n);
            let q1 = spec.q1_at(ix);
            let q2 = spec.q2_at(iy);
            let coeffs = coeffs_from_family(&FamilyParams::new3(q1, q2, spec.q3))
                .expect("d=3 family always expands");
            let witness = eval
                .eval(&coeffs, mode)
                .expect("evaluator dimension matches")
                .witness
                .expect("complete family has a witness");
            let min_pt_eig =
                ppt_min_eig_coeffs(&coeffs).expect("block eigensolve cannot fail on finite input");
            GridCell {
                q1,
                q2,
                physical: coeffs.is_physical(PHYSICAL_TOL),
                ppt: min_pt_eig >= PPT_FEASIBLE_TOL,
                witness,
                min_pt_eig,
                class: classify(&coeffs, witness, min_pt_eig),
            }
        })
        .collect();
    Ok(ClassifiedGrid {
        spec: spec.clone(),
        cells,
    })
}

/// Connectivity analysis of the bound-entangled set of a classified grid.
#[derive(Debug, Clone, Serialize)]
pub struct RegionReport {
    pub bound_cells: usize,
    /// 4-connected components of the bound-entangled set.
    pub components: usize,
    /// Non-bound pockets fully enclosed by the bound set.
    pub holes: usize,
}

/// Flood-fill analysis: counts connected components of the bound-entangled
/// region and enclosed holes (non-bound cells unreachable from the grid
/// border through non-bound cells).
pub fn analyze_bound_region(grid: &ClassifiedGrid) -> RegionReport {
    let n = grid.spec.resolution;
    let bound: Vec<bool> = grid
        .cells
        .iter()
        .map(|c| c.class == CellClass::BoundEntangled)
        .collect();
    let bound_cells = bound.iter().filter(|&&b| b).count();

    let neighbors = |idx: usize| {
        let (iy, ix) = (idx / n, idx % n);
        let mut out = Vec::with_capacity(4);
        if ix > 0 {
            out.push(idx - 1);
        }
        if ix + 1 < n {
            out.push(idx + 1);
        }
        if iy > 0 {
            out.push(idx - n);
        }
        if iy + 1 < n {
            out.push(idx + n);
        }
        out
    };

    let mut visited = vec![false; n * n];
    let mut components = 0;
    for start in 0..n * n {
        if bound[start] && !visited[start] {
            components += 1;
            let mut stack = vec![start];
            visited[start] = true;
            while let Some(idx) = stack.pop() {
                for nb in neighbors(idx) {
                    if bound[nb] && !visited[nb] {
                        visited[nb] = true;
                        stack.push(nb);
                    }
                }
            }
        }
    }

    // Flood the non-bound complement from the border; what remains
    // unvisited is enclosed.
    let mut outside = vec![false; n * n];
    let mut stack = Vec::new();
    for idx in 0..n * n {
        let (iy, ix) = (idx / n, idx % n);
        let on_border = ix == 0 || iy == 0 || ix == n - 1 || iy == n - 1;
        if on_border && !bound[idx] && !outside[idx] {
            outside[idx] = true;
            stack.push(idx);
        }
    }
    while let Some(idx) = stack.pop() {
        for nb in neighbors(idx) {
            if !bound[nb] && !outside[nb] {
                outside[nb] = true;
                stack.push(nb);
            }
        }
    }
    let holes = (0..n * n).filter(|&i| !bound[i] && !outside[i]).count();

    RegionReport {
        bound_cells,
        components,
        holes,
    }
}

// ---------------------------------------------------------------------------
// Witness optimization over the state family
// ---------------------------------------------------------------------------

/// Budget knobs for [`optimize_witness`]. The defaults reproduce the
/// per-dimension minima in a few seconds per dimension.
#[derive(Debug, Clone, Serialize)]
pub struct OptimizeBudget {
    /// Coarse-grid points per class-weight axis.
    pub grid_resolution: usize,
    /// Number of best grid cells used as local-descent starting points.
    pub refine_starts: usize,
    /// Nelder-Mead iterations per start.
    pub refine_iters: usize,
}

impl Default for OptimizeBudget {
    fn default() -> Self {
        OptimizeBudget {
            grid_resolution: 25,
            refine_starts: 40,
            refine_iters: 800,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizationResult {
    pub d: usize,
    pub params: FamilyParams,
    pub witness: f64,
    pub min_pt_eig: f64,
    pub evaluations: usize,
    /// Best witness after the grid stage and after each refinement start.
    pub trace: Vec<f64>,
}

/// The family expressed in "class weight" coordinates: the shared value of
/// c_{0,0}, of the c_{i,0} cells, of the c_{i,1} cells, and (d > 3) of the
/// c_{i,z} cells. Physicality is then plain nonnegativity plus a
/// nonnegative remainder for the uniform background, which makes the
/// feasible set a simplex that a grid can cover without guessing q bounds.
#[derive(Debug, Clone, Copy)]
struct ClassWeights {
    d: usize,
    w: [f64; 4], // c00, ci0, ci1, ciz
}

impl ClassWeights {
    fn ndim(d: usize) -> usize {
        if d > 3 {
            4
        } else {
            3
        }
    }

    /// Uniform-background weight implied by normalization.
    fn base(&self) -> f64 {
        let d = self.d as f64;
        let used =
            self.w[0] + (d - 1.0) * self.w[1] + d * self.w[2] + d * (d - 3.0) * self.w[3];
        // base occupies the remaining d cells of the last column (d=3: the
        // c_{i,2} column; d>3: column d-1) plus nothing else.
        (1.0 - used) / d
    }

    fn coeffs(&self) -> Option<SimplexCoeffs> {
        let d = self.d;
        let base = self.base();
        if self.w.iter().any(|&x| x < 0.0) || base < 0.0 {
            return None;
        }
        let mut c = vec![base; d * d];
        c[0] = self.w[0];
        for i in 1..d {
            c[i * d] = self.w[1];
        }
        for i in 0..d {
            c[i * d + 1] = self.w[2];
        }
        if d > 3 {
            for z in 2..=(d - 2) {
                for i in 0..d {
                    c[i * d + z] = self.w[3];
                }
            }
        }
        Some(SimplexCoeffs { d, c })
    }

    fn params(&self) -> FamilyParams {
        let d = self.d as f64;
        let base = self.base();
        FamilyParams {
            d: self.d,
            q1: (d * d - (d + 1.0)) * (self.w[0] - base),
            q2: (d + 1.0) * (d - 1.0) * (self.w[1] - base),
            q3: d * (self.w[2] - base),
            q4: (self.d > 3).then(|| d * (self.w[3] - base)),
        }
    }
}

struct WitnessObjective {
    d: usize,
    eval: McpEvaluator,
    mode: LabelingMode,
    evaluations: std::cell::Cell<usize>,
}

impl WitnessObjective {
    /// 2 - I_{d+1} with hard rejection of infeasible points, so reported
    /// minima are exactly feasible.
    fn value(&self, w: &[f64]) -> f64 {
        self.evaluations.set(self.evaluations.get() + 1);
        let cw = ClassWeights {
            d: self.d,
            w: [w[0], w[1], w[2], if self.d > 3 { w[3] } else { 0.0 }],
        };
        let Some(coeffs) = cw.coeffs() else {
            return f64::INFINITY;
        };
        let min_pt = ppt_min_eig_coeffs(&coeffs).expect("block eigensolve");
        if min_pt < PPT_FEASIBLE_TOL {
            return f64::INFINITY;
        }
        let rep = self.eval.eval(&coeffs, &self.mode).expect("dims match");
        rep.witness.expect("complete family")
    }
}

/// Deterministic Nelder-Mead on n dims with infinity-valued walls.
fn nelder_mead(
    f: &impl Fn(&[f64]) -> f64,
    x0: &[f64],
    step: f64,
    iters: usize,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = f(&x);
        simplex.push((x, v));
    }
    for _ in 0..iters {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let worst = simplex[n].1;
        let best = simplex[0].1;
        if best.is_finite() && worst.is_finite() && (worst - best).abs() < 1e-12 {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|i| simplex[..n].iter().map(|(x, _)| x[i]).sum::<f64>() / n as f64)
            .collect();
        let reflect: Vec<f64> = (0..n)
            .map(|i| centroid[i] + (centroid[i] - simplex[n].0[i]))
            .collect();
        let fr = f(&reflect);
        if fr < simplex[0].1 {
            let expand: Vec<f64> = (0..n)
                .map(|i| centroid[i] + 2.0 * (centroid[i] - simplex[n].0[i]))
                .collect();
            let fe = f(&expand);
            simplex[n] = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflect, fr);
        } else {
            let contract: Vec<f64> = (0..n)
                .map(|i| centroid[i] + 0.5 * (simplex[n].0[i] - centroid[i]))
                .collect();
            let fc = f(&contract);
            if fc < simplex[n].1 {
                simplex[n] = (contract, fc);
            } else {
                // Shrink toward the best vertex.
                let best_x = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    for (x, &b) in v.0.iter_mut().zip(&best_x) {
                        *x = b + 0.5 * (*x - b);
                    }
                    v.1 = f(&v.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

/// Minimizes 2 - I_{d+1} over the family subject to physicality and PPT:
/// coarse grid over the class-weight simplex, then Nelder-Mead refinement
/// from the best cells. Fully deterministic.
pub fn optimize_witness(
    d: usize,
    mode: &LabelingMode,
    budget: &OptimizeBudget,
) -> Result<OptimizationResult, SearchError> {
    if !matches!(d, 3 | 4 | 5 | 7 | 8 | 9) {
        return Err(SearchError::UnsupportedDimension(d));
    }
    let fam = mub_family(d)?;
    let objective = WitnessObjective {
        d,
        eval: McpEvaluator::new(&fam)?,
        mode: mode.clone(),
        evaluations: std::cell::Cell::new(0),
    };
    let f = |w: &[f64]| objective.value(w);

    let ndim = ClassWeights::ndim(d);
    let df = d as f64;
    // Per-axis upper bounds implied by normalization alone.
    let axis_max = [
        1.0,
        1.0 / (df - 1.0),
        1.0 / df,
        if d > 3 { 1.0 / (df * (df - 3.0)) } else { 1.0 },
    ];

    let r = budget.grid_resolution;
    let mut candidates: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut idx = vec![0usize; ndim];
    loop {
        let w: Vec<f64> = (0..ndim)
            .map(|i| axis_max[i] * idx[i] as f64 / (r - 1) as f64)
            .collect();
        let v = f(&w);
        if v.is_finite() {
            candidates.push((v, w));
        }
        // Odometer increment.
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < r {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == ndim {
                break;
            }
        }
        if k == ndim {
            break;
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| {
        a.1.iter()
            .zip(&b.1)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    }));

    let mut trace = vec![candidates.first().map(|(v, _)| *v).unwrap_or(f64::INFINITY)];
    let mut best: Option<(f64, Vec<f64>)> = candidates.first().cloned();
    let step = axis_max[..ndim].iter().fold(f64::INFINITY, |a, &b| a.min(b)) / r as f64;
    for (_, start) in candidates.iter().take(budget.refine_starts) {
        let (x, v) = nelder_mead(&f, start, step, budget.refine_iters);
        if best
            .as_ref()
            .is_none_or(|(bv, bx)| v < *bv || (v == *bv && x < *bx))
        {
            best = Some((v, x));
        }
        trace.push(best.as_ref().unwrap().0);
    }

    let (witness, w) = best.ok_or_else(|| {
        SearchError::InvalidSpec("no feasible point found on the coarse grid".into())
    })?;
    let cw = ClassWeights {
        d,
        w: [w[0], w[1], w[2], if d > 3 { w[3] } else { 0.0 }],
    };
    let coeffs = cw.coeffs().expect("best point is feasible");
    let min_pt_eig = ppt_min_eig_coeffs(&coeffs)?;
    Ok(OptimizationResult {
        d,
        params: cw.params(),
        witness,
        min_pt_eig,
        evaluations: objective.evaluations.get(),
        trace,
    })
}

// ---------------------------------------------------------------------------
// Horodecki sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub min_pt_eig: f64,
    pub witness: f64,
    pub ppt: bool,
    pub bound_entangled: bool,
}

/// Evaluates the Horodecki state over a lambda grid: minimum PT eigenvalue
/// and witness per point, flagging bound entanglement where both criteria
/// fire.
pub fn horodecki_sweep(
    lambda_lo: f64,
    lambda_hi: f64,
    step: f64,
    mode: &LabelingMode,
) -> Result<Vec<SweepPoint>, SearchError> {
    if !(0.0..=5.0).contains(&lambda_lo) || !(0.0..=5.0).contains(&lambda_hi) || lambda_lo > lambda_hi
    {
        return Err(SearchError::OutOfRange(lambda_lo, lambda_hi));
    }
    if step <= 0.0 {
        return Err(SearchError::InvalidSpec("step must be positive".into()));
    }
    let fam = mub_family(3)?;
    let eval = McpEvaluator::new(&fam)?;
    let mut out = Vec::new();
    let n = ((lambda_hi - lambda_lo) / step).round() as usize;
    for i in 0..=n {
        let lambda = (lambda_lo + i as f64 * step).min(lambda_hi);
        let coeffs = coeffs_from_family(&horodecki_params(lambda)?)?;
        let min_pt_eig = ppt_min_eig_coeffs(&coeffs)?;
        let witness = eval.eval(&coeffs, mode)?.witness.expect("complete family");
        let ppt = min_pt_eig >= PPT_FEASIBLE_TOL;
        out.push(SweepPoint {
            lambda,
            min_pt_eig,
            witness,
            ppt,
            bound_entangled: ppt && witness < 0.0,
        });
    }
    Ok(out)
}
