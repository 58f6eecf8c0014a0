//! Statistical simulation of the coincidence-counting experiment:
//! Poisson-noisy projective counts with flat background, retroactive mixing
//! of per-Bell-state recordings, probability normalization, overcomplete
//! state tomography, and the measurement-budget formulas.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;
use thiserror::Error;

use crate::mubs::{conjugate_basis, MubError, MubFamily};
use crate::numkernel::{herm_eig, ComplexMatrix, NumError, HERM_TOL};
use crate::simplex::{bell_state, SimplexCoeffs, SimplexError};
use crate::witness::{report_from_tables, CorrelationReport, LabelingMode, WitnessError};

#[derive(Debug, Error)]
pub enum ExpError {
    #[error("negative mixing weight {0}: retroactive mixing needs a physical state")]
    NegativeWeight(f64),
    #[error("all counts are zero; cannot normalize")]
    EmptyCounts,
    #[error("tomography settings are rank-deficient")]
    SingularSystem,
    #[error("OAM index {0} outside {{-1, 0, +1}}")]
    OutOfRange(i64),
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("{0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Witness(#[from] WitnessError),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
    #[error(transparent)]
    Mub(#[from] MubError),
}

/// Counting-statistics model of the detection apparatus. A perfectly
/// correlated setting yields `peak` expected coincidences per integration
/// window; every setting additionally sees a flat `background` mean.
#[derive(Debug, Clone, Serialize)]
pub struct NoiseModel {
    /// Expected coincidences per window at a perfectly correlated setting.
    pub peak: f64,
    /// Integration windows accumulated per setting.
    pub windows: u32,
    /// Background coincidences per window.
    pub background: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(peak: f64, background: f64, seed: u64) -> Result<Self, ExpError> {
        if peak.is_nan() || peak < 0.0 || background.is_nan() || background < 0.0 {
            return Err(ExpError::InvalidNoise(format!(
                "rates must be nonnegative, got peak {peak}, background {background}"
            )));
        }
        Ok(NoiseModel {
            peak,
            windows: 1,
            background,
            seed,
        })
    }

    /// Laboratory-scale defaults: 1500 peak coincidences, background 5.
    pub fn lab_scale(seed: u64) -> Self {
        NoiseModel {
            peak: 1500.0,
            windows: 1,
            background: 5.0,
            seed,
        }
    }
}

/// Counts recorded at one projective setting: one integer per Bell state
/// (recorded separately, as in the experiment) plus the retroactively mixed
/// value once weights have been applied.
#[derive(Debug, Clone, Serialize)]
pub struct CountRecord {
    pub setting: u64,
    pub per_state: Vec<u64>,
    pub mixed: f64,
}

/// RNG substream tied to (seed, setting, part) so that counts do not depend
/// on evaluation order or thread scheduling. `part` distinguishes the
/// per-Bell-state recording sessions of one setting.
fn substream(seed: u64, setting: u64, part: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&setting.to_le_bytes());
    key[16..24].copy_from_slice(&part.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

fn draw(mean: f64, rng: &mut ChaCha8Rng) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
}

fn check_unit(ket: &[Complex64]) -> Result<(), ExpError> {
    let n: f64 = ket.iter().map(|z| z.norm_sqr()).sum();
    if (n - 1.0).abs() > 1e-9 {
        return Err(ExpError::DimensionMismatch(format!(
            "detection ket norm^2 = {n}, expected 1"
        )));
    }
    Ok(())
}

fn joint_prob_mean(
    rho: &ComplexMatrix,
    ket_a: &[Complex64],
    ket_b: &[Complex64],
    noise: &NoiseModel,
) -> Result<f64, ExpError> {
    let d = ket_a.len();
    let p = crate::witness::joint_prob(rho, ket_a, ket_b)?;
    // Scaled so a perfectly correlated setting (p = 1/d) peaks at `peak`.
    Ok(noise.windows as f64 * (noise.peak * p * d as f64 + noise.background))
}

/// One Poisson-noisy coincidence count for projecting `rho` onto
/// |ket_a>|ket_b>. Reproducible: the draw depends only on (seed, setting).
pub fn simulate_counts(
    rho: &ComplexMatrix,
    ket_a: &[Complex64],
    ket_b: &[Complex64],
    noise: &NoiseModel,
    setting: u64,
) -> Result<u64, ExpError> {
    check_unit(ket_a)?;
    check_unit(ket_b)?;
    let mean = joint_prob_mean(rho, ket_a, ket_b, noise)?;
    Ok(draw(mean, &mut substream(noise.seed, setting, 0)))
}

/// Applies simplex weights to per-Bell-state counts: mixed = sum c_{k,l} *
/// count_{k,l} per setting. Only physical (nonnegative) weightings can be
/// realized by summing recorded counts.
pub fn retroactive_mix(
    records: &[CountRecord],
    coeffs: &SimplexCoeffs,
) -> Result<Vec<CountRecord>, ExpError> {
    if let Some(&w) = coeffs.c.iter().find(|&&w| w < 0.0) {
        return Err(ExpError::NegativeWeight(w));
    }
    let n = coeffs.d * coeffs.d;
    records
        .iter()
        .map(|r| {
            if r.per_state.len() != n {
                return Err(ExpError::DimensionMismatch(format!(
                    "record has {} per-state counts, expected {}",
                    r.per_state.len(),
                    n
                )));
            }
            let mixed = r
                .per_state
                .iter()
                .zip(&coeffs.c)
                .map(|(&g, &w)| w * g as f64)
                .sum();
            Ok(CountRecord {
                setting: r.setting,
                per_state: r.per_state.clone(),
                mixed,
            })
        })
        .collect()
}

/// P = Gamma / sum Gamma over the settings of one basis pair.
pub fn probabilities_from_counts(counts: &[f64]) -> Result<Vec<f64>, ExpError> {
    let total: f64 = counts.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(ExpError::EmptyCounts);
    }
    Ok(counts.iter().map(|&g| g / total).collect())
}

// ---------------------------------------------------------------------------
// MCP measurement
// ---------------------------------------------------------------------------

/// Records per-Bell-state counts for every MCP setting: all (i, j) outcome
/// pairs of every basis pair, Bob measuring in the conjugated bases.
/// Setting ids are (basis * d + i) * d + j.
pub fn simulate_mcp_counts(
    fam: &MubFamily,
    noise: &NoiseModel,
) -> Result<Vec<CountRecord>, ExpError> {
    let d = fam.d;
    let states: Vec<ComplexMatrix> = (0..d)
        .flat_map(|k| (0..d).map(move |l| (k, l)))
        .map(|(k, l)| bell_state(d, k, l))
        .collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for (m_idx, basis) in fam.bases.iter().enumerate() {
        let bob = conjugate_basis(basis);
        for (i, ket_a) in basis.iter().enumerate() {
            for (j, ket_b) in bob.iter().enumerate() {
                let setting = ((m_idx * d + i) * d + j) as u64;
                let per_state = states
                    .iter()
                    .enumerate()
                    .map(|(s, rho)| {
                        let mean = joint_prob_mean(rho, ket_a, ket_b, noise)?;
                        Ok(draw(
                            mean,
                            &mut substream(noise.seed, setting, s as u64),
                        ))
                    })
                    .collect::<Result<Vec<u64>, ExpError>>()?;
                out.push(CountRecord {
                    setting,
                    per_state,
                    mixed: 0.0,
                });
            }
        }
    }
    Ok(out)
}

/// Full experimental pipeline for a simplex state: record per-Bell-state
/// counts, mix retroactively, normalize per basis pair, and evaluate the
/// correlation sum on the estimated probabilities.
pub fn experimental_witness(
    coeffs: &SimplexCoeffs,
    fam: &MubFamily,
    noise: &NoiseModel,
    mode: &LabelingMode,
) -> Result<CorrelationReport, ExpError> {
    let d = fam.d;
    let records = retroactive_mix(&simulate_mcp_counts(fam, noise)?, coeffs)?;
    let mut tables = Vec::with_capacity(fam.bases.len());
    for m_idx in 0..fam.bases.len() {
        let gamma: Vec<f64> = records[m_idx * d * d..(m_idx + 1) * d * d]
            .iter()
            .map(|r| r.mixed)
            .collect();
        tables.push(probabilities_from_counts(&gamma)?);
    }
    Ok(report_from_tables(d, &tables, mode)?)
}

// ---------------------------------------------------------------------------
// Tomography
// ---------------------------------------------------------------------------

/// Overcomplete single-side detection kets: the d basis states plus every
/// two-state superposition (|a> + e^{i phi} |b>)/sqrt(2) with phi in
/// {0, pi/2, pi, 3pi/2}. Pair settings are the Cartesian square.
#[derive(Debug, Clone)]
pub struct TomographySet {
    pub d: usize,
    pub kets: Vec<Vec<Complex64>>,
}

impl TomographySet {
    pub fn pair_count(&self) -> usize {
        self.kets.len() * self.kets.len()
    }
}

pub fn tomography_settings(d: usize) -> TomographySet {
    assert!(d >= 2);
    let mut kets: Vec<Vec<Complex64>> = Vec::with_capacity(d + 2 * d * (d - 1));
    for i in 0..d {
        let mut k = vec![Complex64::ZERO; d];
        k[i] = Complex64::ONE;
        kets.push(k);
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for a in 0..d {
        for b in (a + 1)..d {
            for quarter in 0..4u8 {
                let phase = Complex64::from_polar(1.0, f64::from(quarter) * std::f64::consts::FRAC_PI_2);
                let mut k = vec![Complex64::ZERO; d];
                k[a] = Complex64::new(r, 0.0);
                k[b] = phase * r;
                kets.push(k);
            }
        }
    }
    TomographySet { d, kets }
}

/// Poisson counts for every ket pair of the tomography set, row-major over
/// (Alice ket, Bob ket).
pub fn simulate_tomography_counts(
    rho: &ComplexMatrix,
    set: &TomographySet,
    noise: &NoiseModel,
) -> Result<Vec<u64>, ExpError> {
    let nk = set.kets.len();
    let mut out = Vec::with_capacity(nk * nk);
    for ia in 0..nk {
        for ib in 0..nk {
            let setting = (ia * nk + ib) as u64;
            let mean = joint_prob_mean(rho, &set.kets[ia], &set.kets[ib], noise)?;
            out.push(draw(mean, &mut substream(noise.seed, setting, 0)));
        }
    }
    Ok(out)
}

/// Exact expected counts (no Poisson draw, no background): the infinite
/// statistics limit used as reconstruction oracle.
pub fn ideal_tomography_counts(
    rho: &ComplexMatrix,
    set: &TomographySet,
    noise: &NoiseModel,
) -> Result<Vec<f64>, ExpError> {
    let nk = set.kets.len();
    let mut out = Vec::with_capacity(nk * nk);
    for ia in 0..nk {
        for ib in 0..nk {
            let p = crate::witness::joint_prob(rho, &set.kets[ia], &set.kets[ib])?;
            out.push(noise.windows as f64 * noise.peak * p * set.d as f64);
        }
    }
    Ok(out)
}

/// Real quadratic form <k| G_m |k> over the standard Hermitian basis
/// {E_ii} then {(E_ij + E_ji)/sqrt2, i(E_ij - E_ji)/sqrt2} for i < j.
fn herm_basis_row(ket: &[Complex64], row: &mut [f64]) {
    let dim = ket.len();
    let mut m = 0;
    for z in ket {
        row[m] = z.norm_sqr();
        m += 1;
    }
    let s = std::f64::consts::SQRT_2;
    for i in 0..dim {
        for j in (i + 1)..dim {
            let z = ket[i].conj() * ket[j];
            row[m] = s * z.re;
            row[m + 1] = -s * z.im;
            m += 2;
        }
    }
}

fn herm_from_params(dim: usize, x: &[f64]) -> ComplexMatrix {
    let mut rho = ComplexMatrix::zeros(dim);
    let mut m = 0;
    for i in 0..dim {
        rho[(i, i)] = Complex64::new(x[i], 0.0);
        m += 1;
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..dim {
        for j in (i + 1)..dim {
            let z = Complex64::new(x[m] * r, -x[m + 1] * r);
            rho[(i, j)] = z;
            rho[(j, i)] = z.conj();
            m += 2;
        }
    }
    rho
}

/// Linear-inversion tomography: least squares over the Hermitian parameter
/// space against probabilities recovered from the counts via the noise
/// model, then eigenvalue clipping to the state space and trace
/// renormalization.
pub fn reconstruct(
    set: &TomographySet,
    counts: &[f64],
    noise: &NoiseModel,
) -> Result<ComplexMatrix, ExpError> {
    let nk = set.kets.len();
    let dim = set.d * set.d;
    let nparam = dim * dim;
    if counts.len() != nk * nk {
        return Err(ExpError::DimensionMismatch(format!(
            "{} counts for {} settings",
            counts.len(),
            nk * nk
        )));
    }
    if noise.peak <= 0.0 {
        return Err(ExpError::InvalidNoise("peak rate must be positive".into()));
    }
    let scale = noise.windows as f64;

    // Normal equations N x = b accumulated row by row.
    let mut normal = vec![0.0f64; nparam * nparam];
    let mut b = vec![0.0f64; nparam];
    let mut row = vec![0.0f64; nparam];
    let mut pair = vec![Complex64::ZERO; dim];
    for ia in 0..nk {
        for ib in 0..nk {
            let p_hat = ((counts[ia * nk + ib] / scale - noise.background)
                / (noise.peak * set.d as f64))
                .max(0.0);
            for (idx, z) in pair.iter_mut().enumerate() {
                *z = set.kets[ia][idx / set.d] * set.kets[ib][idx % set.d];
            }
            herm_basis_row(&pair, &mut row);
            for i in 0..nparam {
                if row[i] != 0.0 {
                    b[i] += row[i] * p_hat;
                    for j in i..nparam {
                        normal[i * nparam + j] += row[i] * row[j];
                    }
                }
            }
        }
    }
    for i in 0..nparam {
        for j in 0..i {
            normal[i * nparam + j] = normal[j * nparam + i];
        }
    }

    // Pseudo-inverse through the eigendecomposition of the (real symmetric)
    // normal matrix; a complete tomography set is full rank.
    let n_mat = ComplexMatrix::from_fn(nparam, |i, j| Complex64::new(normal[i * nparam + j], 0.0));
    let (spec, vecs) = herm_eig(&n_mat, HERM_TOL)?;
    let lam_max = spec.max();
    if lam_max.is_nan() || lam_max <= 0.0 || spec.min() < 1e-10 * lam_max {
        return Err(ExpError::SingularSystem);
    }
    let mut x = vec![0.0f64; nparam];
    for k in 0..nparam {
        let mut proj = 0.0;
        for i in 0..nparam {
            proj += vecs[(i, k)].re * b[i];
        }
        let w = proj / spec.values[k];
        for i in 0..nparam {
            x[i] += w * vecs[(i, k)].re;
        }
    }

    // Project onto the state space: clip negative eigenvalues, renormalize.
    let raw = herm_from_params(dim, &x);
    let (spec, vecs) = herm_eig(&raw, HERM_TOL)?;
    let clipped: Vec<f64> = spec.values.iter().map(|&l| l.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(ExpError::SingularSystem);
    }
    let mut rho = ComplexMatrix::zeros(dim);
    for k in 0..dim {
        if clipped[k] > 0.0 {
            let col: Vec<Complex64> = (0..dim).map(|i| vecs[(i, k)]).collect();
            rho.add_scaled(&ComplexMatrix::outer(&col), clipped[k] / total);
        }
    }
    Ok(rho)
}

// ---------------------------------------------------------------------------
// Budget and OAM bookkeeping
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MeasurementBudget {
    /// Overcomplete state tomography settings: d^2 - 4d^3 + 4d^4.
    pub n_qst: usize,
    /// MCP with single-outcome projections per basis: d + d^2.
    pub n_mcp1: usize,
    /// MCP with full outcome resolution: d^2 + d^3.
    pub n_mcp2: usize,
}

pub fn measurement_budget(d: usize) -> MeasurementBudget {
    assert!(d >= 2);
    MeasurementBudget {
        n_qst: 4 * d * d * d * d - 4 * d * d * d + d * d,
        n_mcp1: d + d * d,
        n_mcp2: d * d + d * d * d,
    }
}

/// Maps the OAM label l in {-1, 0, +1} onto the qutrit index {0, 1, 2}.
pub fn oam_relabel(l: i64) -> Result<usize, ExpError> {
    if !(-1..=1).contains(&l) {
        return Err(ExpError::OutOfRange(l));
    }
    Ok((l + 1) as usize)
}
