//! The maximum complementarity protocol: joint probabilities in MUB pairs,
//! per-basis correlation functions with outcome relabeling, the sum I_m,
//! the separability bound 1 + (m-1)/d, and the witness value 2 - I_{d+1}.
//!
//! Bob's measurement bases are always the componentwise conjugates of
//! Alice's; every reference number assumes that pairing, so it is baked in
//! rather than left to callers.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::mubs::{conjugate_basis, MubFamily};
use crate::numkernel::{ComplexMatrix, NumError};
use crate::simplex::{bell_vector, SimplexCoeffs, SimplexError};

#[derive(Debug, Error)]
pub enum WitnessError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unsupported labeling: {0}")]
    UnsupportedLabeling(String),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
}

/// Outcome relabeling: one permutation of Bob's outcome index per basis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Labeling {
    pub sigmas: Vec<Vec<usize>>,
}

/// How Bob's outcomes are relabeled when evaluating the protocol.
#[derive(Debug, Clone)]
pub enum LabelingMode {
    /// The explicit d=3 labeling: sigma(i) = i+1 mod 3 on the computational
    /// basis, identity on the other three.
    MethodsD3,
    /// Caller-supplied permutations, one per basis.
    Fixed(Labeling),
    /// Per-basis maximization of C over all permutations.
    Maximize,
}

/// Result of one protocol evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct CorrelationReport {
    pub d: usize,
    /// Number of bases used.
    pub m: usize,
    /// C_{A_k,B_k} per basis, in family order.
    pub c_values: Vec<f64>,
    /// I_m = sum of the C values.
    pub i_m: f64,
    /// Separability bound 1 + (m-1)/d.
    pub bound: f64,
    /// 2 - I_{d+1}; present only when all d+1 bases were used. Negative
    /// values certify entanglement.
    pub witness: Option<f64>,
    /// The relabeling actually applied.
    pub labeling: Labeling,
}

/// The separability bound I_m <= 1 + (m-1)/d, which holds for every
/// separable state.
pub fn separable_bound(m: usize, d: usize) -> f64 {
    assert!(m >= 1 && d >= 2);
    1.0 + (m - 1) as f64 / d as f64
}

/// Single joint probability Tr(|a b><a b| rho), clamped to [0,1].
pub fn joint_prob(
    rho: &ComplexMatrix,
    ket_a: &[Complex64],
    ket_b: &[Complex64],
) -> Result<f64, WitnessError> {
    if ket_a.len() * ket_b.len() != rho.dim() {
        return Err(WitnessError::DimensionMismatch(format!(
            "kets {}x{} vs state dim {}",
            ket_a.len(),
            ket_b.len(),
            rho.dim()
        )));
    }
    let joint = crate::numkernel::kron_vec(ket_a, ket_b);
    let p = rho.sandwich(&joint, &joint).re;
    if !(-1e-12..=1.0 + 1e-12).contains(&p) {
        return Err(WitnessError::DimensionMismatch(format!(
            "joint probability {p} outside [0,1]; state is not normalized"
        )));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// C = sum_i P(i, sigma(i)) for one basis pair.
pub fn correlation(
    rho: &ComplexMatrix,
    basis_a: &[Vec<Complex64>],
    basis_b: &[Vec<Complex64>],
    sigma: &[usize],
) -> Result<f64, WitnessError> {
    let d = basis_a.len();
    let mut c = 0.0;
    for i in 0..d {
        c += joint_prob(rho, &basis_a[i], &basis_b[sigma[i]])?;
    }
    Ok(c)
}

/// Table of all joint probabilities p[i][j] = P(A -> i, B -> j) for one
/// basis pair; everything downstream (correlations, relabelings) reads it.
pub fn prob_table(
    rho: &ComplexMatrix,
    basis_a: &[Vec<Complex64>],
    basis_b: &[Vec<Complex64>],
) -> Result<Vec<f64>, WitnessError> {
    let d = basis_a.len();
    let mut t = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            t[i * d + j] = joint_prob(rho, &basis_a[i], &basis_b[j])?;
        }
    }
    Ok(t)
}

fn trace_along(table: &[f64], d: usize, sigma: &[usize]) -> f64 {
    (0..d).map(|i| table[i * d + sigma[i]]).sum()
}

/// All permutations of 0..d in lexicographic order.
fn permutations(d: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..d).collect();
    let mut used = vec![false; d];
    fn rec(d: usize, cur: &mut Vec<usize>, used: &mut Vec<bool>, pos: usize, out: &mut Vec<Vec<usize>>) {
        if pos == d {
            out.push(cur.clone());
            return;
        }
        for v in 0..d {
            if !used[v] {
                used[v] = true;
                cur[pos] = v;
                rec(d, cur, used, pos + 1, out);
                used[v] = false;
            }
        }
    }
    rec(d, &mut cur, &mut used, 0, &mut out);
    out
}

/// Maximum-weight assignment on a d x d table via the Hungarian algorithm
/// (potentials formulation, O(d^3)); used where d! is no longer cheap.
fn hungarian_max(table: &[f64], d: usize) -> Vec<usize> {
    // Minimize the negated weights. 1-based helper arrays per the classic
    // formulation.
    let inf = f64::INFINITY;
    let cost = |i: usize, j: usize| -table[i * d + j];
    let mut u = vec![0.0; d + 1];
    let mut v = vec![0.0; d + 1];
    let mut p = vec![0usize; d + 1]; // p[j] = row assigned to column j
    let mut way = vec![0usize; d + 1];
    for i in 1..=d {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; d + 1];
        let mut used = vec![false; d + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=d {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=d {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut sigma = vec![0usize; d];
    for j in 1..=d {
        if p[j] > 0 {
            sigma[p[j] - 1] = j - 1;
        }
    }
    sigma
}

fn best_sigma_for_table(table: &[f64], d: usize) -> (Vec<usize>, f64) {
    if d <= 5 {
        let mut best: Option<(Vec<usize>, f64)> = None;
        for sigma in permutations(d) {
            let c = trace_along(table, d, &sigma);
            // Strictly-greater keeps the lexicographically smallest sigma on
            // ties (permutations come in lexicographic order).
            if best.as_ref().is_none_or(|(_, bc)| c > *bc) {
                best = Some((sigma, c));
            }
        }
        best.unwrap()
    } else {
        let sigma = hungarian_max(table, d);
        let c = trace_along(table, d, &sigma);
        (sigma, c)
    }
}

/// Relabeling of Bob's outcomes maximizing C for one basis pair.
pub fn best_relabeling(
    rho: &ComplexMatrix,
    basis_a: &[Vec<Complex64>],
    basis_b: &[Vec<Complex64>],
) -> Result<(Vec<usize>, f64), WitnessError> {
    let d = basis_a.len();
    let table = prob_table(rho, basis_a, basis_b)?;
    Ok(best_sigma_for_table(&table, d))
}

fn identity_sigma(d: usize) -> Vec<usize> {
    (0..d).collect()
}

fn methods_d3_labeling() -> Labeling {
    Labeling {
        sigmas: vec![
            vec![1, 2, 0], // sigma(i) = i+1 mod 3 on the computational basis
            identity_sigma(3),
            identity_sigma(3),
            identity_sigma(3),
        ],
    }
}

/// Builds the protocol report from already-measured probability tables, one
/// per basis pair; this is the entry point for experimentally estimated
/// probabilities.
pub fn report_from_tables(
    d: usize,
    tables: &[Vec<f64>],
    mode: &LabelingMode,
) -> Result<CorrelationReport, WitnessError> {
    let m = tables.len();
    let sigmas: Vec<Vec<usize>> = match mode {
        LabelingMode::MethodsD3 => {
            if d != 3 || m != 4 {
                return Err(WitnessError::UnsupportedLabeling(format!(
                    "methods labeling is defined for d=3 with 4 bases, got d={d}, m={m}"
                )));
            }
            methods_d3_labeling().sigmas
        }
        LabelingMode::Fixed(lab) => {
            if lab.sigmas.len() != m {
                return Err(WitnessError::UnsupportedLabeling(format!(
                    "labeling has {} permutations for {} bases",
                    lab.sigmas.len(),
                    m
                )));
            }
            for s in &lab.sigmas {
                let mut seen = vec![false; d];
                if s.len() != d || s.iter().any(|&x| x >= d || std::mem::replace(&mut seen[x], true)) {
                    return Err(WitnessError::UnsupportedLabeling(format!(
                        "permutation {s:?} is not a bijection of 0..{d}"
                    )));
                }
            }
            lab.sigmas.clone()
        }
        LabelingMode::Maximize => tables
            .iter()
            .map(|t| best_sigma_for_table(t, d).0)
            .collect(),
    };
    let c_values: Vec<f64> = tables
        .iter()
        .zip(&sigmas)
        .map(|(t, s)| trace_along(t, d, s))
        .collect();
    let i_m: f64 = c_values.iter().sum();
    Ok(CorrelationReport {
        d,
        m,
        c_values,
        i_m,
        bound: separable_bound(m, d),
        witness: (m == d + 1).then_some(2.0 - i_m),
        labeling: Labeling { sigmas },
    })
}

/// Runs the protocol on an arbitrary two-qudit state: all C_{A_k,B_k} with
/// Bob's bases conjugated, I_m, the bound, and (for a complete family) the
/// witness 2 - I_{d+1}.
pub fn mcp(
    rho: &ComplexMatrix,
    fam: &MubFamily,
    mode: &LabelingMode,
) -> Result<CorrelationReport, WitnessError> {
    let d = fam.d;
    if rho.dim() != d * d {
        return Err(WitnessError::DimensionMismatch(format!(
            "state dim {} vs family dimension {}",
            rho.dim(),
            d
        )));
    }
    let tables: Vec<Vec<f64>> = fam
        .bases
        .iter()
        .map(|basis| prob_table(rho, basis, &conjugate_basis(basis)))
        .collect::<Result<_, _>>()?;
    report_from_tables(d, &tables, mode)
}

/// Precomputed protocol evaluator for simplex states of one dimension.
///
/// The probability table of every (basis, Bell state) pair is computed once;
/// an evaluation is then a linear fold over the coefficient table followed
/// by the relabeling step. Exact (no sampling), and the workhorse behind
/// grid scans and the optimizer.
pub struct McpEvaluator {
    pub d: usize,
    /// per_basis[k][bell][i*d + j]
    per_basis: Vec<Vec<Vec<f64>>>,
}

impl McpEvaluator {
    pub fn new(fam: &MubFamily) -> Result<Self, WitnessError> {
        let d = fam.d;
        let mut per_basis = Vec::with_capacity(fam.bases.len());
        for basis in &fam.bases {
            let bob = conjugate_basis(basis);
            let mut tables = Vec::with_capacity(d * d);
            for k in 0..d {
                for l in 0..d {
                    let psi = bell_vector(d, k, l)?;
                    let mut t = vec![0.0; d * d];
                    for (i, va) in basis.iter().enumerate() {
                        for (j, vb) in bob.iter().enumerate() {
                            let joint = crate::numkernel::kron_vec(va, vb);
                            let amp: Complex64 =
                                joint.iter().zip(&psi).map(|(a, b)| a.conj() * b).sum();
                            t[i * d + j] = amp.norm_sqr();
                        }
                    }
                    tables.push(t);
                }
            }
            per_basis.push(tables);
        }
        Ok(McpEvaluator { d, per_basis })
    }

    pub fn eval(
        &self,
        coeffs: &SimplexCoeffs,
        mode: &LabelingMode,
    ) -> Result<CorrelationReport, WitnessError> {
        if coeffs.d != self.d {
            return Err(WitnessError::DimensionMismatch(format!(
                "coeffs dim {} vs evaluator dimension {}",
                coeffs.d, self.d
            )));
        }
        let d = self.d;
        let tables: Vec<Vec<f64>> = self
            .per_basis
            .iter()
            .map(|bell_tables| {
                let mut t = vec![0.0; d * d];
                for (bell, bt) in bell_tables.iter().enumerate() {
                    let w = coeffs.c[bell];
                    if w != 0.0 {
                        for (acc, &v) in t.iter_mut().zip(bt) {
                            *acc += w * v;
                        }
                    }
                }
                t
            })
            .collect();
        report_from_tables(d, &tables, mode)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mubs::mub_family;
    use crate::simplex::{
        bell_state, coeffs_from_family, featured_params, state_from_coeffs,
    };
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn maximally_mixed(d: usize) -> ComplexMatrix {
        ComplexMatrix::identity(d * d).scale(c64(1.0 / (d * d) as f64, 0.0))
    }

    fn random_ket(d: usize, rng: &mut impl Rng) -> Vec<Complex64> {
        let mut v: Vec<Complex64> = (0..d)
            .map(|_| c64(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let n: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in v.iter_mut() {
            *z /= n;
        }
        v
    }

    #[test]
    fn joint_prob_definite_and_uniform() {
        let mut p = ComplexMatrix::zeros(9);
        p[(0, 0)] = c64(1.0, 0.0);
        let e0 = vec![c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0)];
        assert!((joint_prob(&p, &e0, &e0).unwrap() - 1.0).abs() < 1e-12);
        let mixed = maximally_mixed(3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let a = random_ket(3, &mut rng);
            let b = random_ket(3, &mut rng);
            assert!((joint_prob(&mixed, &a, &b).unwrap() - 1.0 / 9.0).abs() < 1e-12);
        }
    }

    #[test]
    fn joint_prob_bell_with_conjugate_ket() {
        // <a, a*| P_00 |a, a*> = 1/3 for every unit |a>.
        let p00 = bell_state(3, 0, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let a = random_ket(3, &mut rng);
            let a_conj: Vec<Complex64> = a.iter().map(|z| z.conj()).collect();
            assert!((joint_prob(&p00, &a, &a_conj).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn joint_prob_dim_mismatch() {
        let p = maximally_mixed(3);
        let e = vec![c64(1.0, 0.0), c64(0.0, 0.0)];
        assert!(matches!(
            joint_prob(&p, &e, &e),
            Err(WitnessError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn product_state_predictabilities() {
        // |0_1 0_1>: computational basis with identity sigma gives 1, any
        // other MUB gives 1/d via joint probabilities 1/d^2 each.
        let fam = mub_family(3).unwrap();
        let mut rho = ComplexMatrix::zeros(9);
        rho[(0, 0)] = c64(1.0, 0.0);
        let id = vec![0, 1, 2];
        let c1 = correlation(&rho, &fam.bases[0], &conjugate_basis(&fam.bases[0]), &id).unwrap();
        assert!((c1 - 1.0).abs() < 1e-12);
        for basis in &fam.bases[1..] {
            let bob = conjugate_basis(basis);
            for a in basis.iter() {
                for b in bob.iter() {
                    let p = joint_prob(&rho, a, b).unwrap();
                    assert!((p - 1.0 / 9.0).abs() < 1e-12);
                }
            }
            let c = correlation(&rho, basis, &bob, &id).unwrap();
            assert!((c - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn separable_bound_values() {
        assert!((separable_bound(4, 3) - 2.0).abs() < 1e-15);
        assert!((separable_bound(1, 3) - 1.0).abs() < 1e-15);
        assert!((separable_bound(3, 6) - (1.0 + 2.0 / 6.0)).abs() < 1e-15);
    }

    #[test]
    fn featured_state_methods_labeling_reproduces_table() {
        let fam = mub_family(3).unwrap();
        let rho = state_from_coeffs(&coeffs_from_family(&featured_params()).unwrap()).unwrap();
        let rep = mcp(&rho, &fam, &LabelingMode::MethodsD3).unwrap();
        let expect = [0.675, 0.468, 0.468, 0.468];
        for (got, want) in rep.c_values.iter().zip(&expect) {
            assert!((got - want).abs() < 1e-3, "C {got} vs {want}");
        }
        let w = rep.witness.unwrap();
        assert!((w + 0.079).abs() < 1e-3, "witness {w}");
    }

    #[test]
    fn featured_state_best_relabeling_is_cyclic_shift() {
        let fam = mub_family(3).unwrap();
        let rho = state_from_coeffs(&coeffs_from_family(&featured_params()).unwrap()).unwrap();
        let bob = conjugate_basis(&fam.bases[0]);
        let (sigma, c) = best_relabeling(&rho, &fam.bases[0], &bob).unwrap();
        assert_eq!(sigma, vec![1, 2, 0]);
        assert!((c - 0.675).abs() < 1e-3);
    }

    #[test]
    fn maximally_mixed_report() {
        let fam = mub_family(3).unwrap();
        let rep = mcp(&maximally_mixed(3), &fam, &LabelingMode::Maximize).unwrap();
        assert!((rep.i_m - 4.0 / 3.0).abs() < 1e-10);
        assert!((rep.witness.unwrap() - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn bell_state_maximize_saturates() {
        let fam = mub_family(3).unwrap();
        let rep = mcp(&bell_state(3, 0, 0).unwrap(), &fam, &LabelingMode::Maximize).unwrap();
        for c in &rep.c_values {
            assert!((c - 1.0).abs() < 1e-10);
        }
        assert!((rep.i_m - 4.0).abs() < 1e-10);
        assert!((rep.witness.unwrap() + 2.0).abs() < 1e-10);
    }

    #[test]
    fn p00_identity_relabeling_is_perfect() {
        let fam = mub_family(3).unwrap();
        let p00 = bell_state(3, 0, 0).unwrap();
        let bob = conjugate_basis(&fam.bases[1]);
        let (sigma, c) = best_relabeling(&p00, &fam.bases[1], &bob).unwrap();
        assert_eq!(sigma, vec![0, 1, 2]);
        assert!((c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn evaluator_matches_direct_mcp() {
        let fam = mub_family(3).unwrap();
        let eval = McpEvaluator::new(&fam).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let mut c: Vec<f64> = (0..9).map(|_| rng.gen::<f64>()).collect();
            let s: f64 = c.iter().sum();
            for v in c.iter_mut() {
                *v /= s;
            }
            let coeffs = SimplexCoeffs { d: 3, c };
            let rho = state_from_coeffs(&coeffs).unwrap();
            for mode in [LabelingMode::MethodsD3, LabelingMode::Maximize] {
                let a = mcp(&rho, &fam, &mode).unwrap();
                let b = eval.eval(&coeffs, &mode).unwrap();
                assert!((a.i_m - b.i_m).abs() < 1e-10);
                for (x, y) in a.c_values.iter().zip(&b.c_values) {
                    assert!((x - y).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn maximize_never_below_methods() {
        let fam = mub_family(3).unwrap();
        let eval = McpEvaluator::new(&fam).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let mut c: Vec<f64> = (0..9).map(|_| rng.gen::<f64>()).collect();
            let s: f64 = c.iter().sum();
            for v in c.iter_mut() {
                *v /= s;
            }
            let coeffs = SimplexCoeffs { d: 3, c };
            let a = eval.eval(&coeffs, &LabelingMode::MethodsD3).unwrap();
            let b = eval.eval(&coeffs, &LabelingMode::Maximize).unwrap();
            assert!(b.i_m >= a.i_m - 1e-12);
        }
    }

    #[test]
    fn c_invariant_under_basis_vector_phases() {
        let fam = mub_family(3).unwrap();
        let rho = state_from_coeffs(&coeffs_from_family(&featured_params()).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for basis in &fam.bases {
            let bob = conjugate_basis(basis);
            let base_c = correlation(&rho, basis, &bob, &[0, 1, 2]).unwrap();
            // Random global phases on each Alice vector and matching
            // conjugated Bob vectors.
            let phased: Vec<Vec<Complex64>> = basis
                .iter()
                .map(|v| {
                    let ph = Complex64::from_polar(1.0, rng.gen::<f64>() * std::f64::consts::TAU);
                    v.iter().map(|z| z * ph).collect()
                })
                .collect();
            let phased_bob = conjugate_basis(&phased);
            let c = correlation(&rho, &phased, &phased_bob, &[0, 1, 2]).unwrap();
            assert!((c - base_c).abs() < 1e-12);
        }
    }

    #[test]
    fn hungarian_matches_exhaustive_on_small_tables() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for d in [3usize, 4, 5] {
            for _ in 0..50 {
                let table: Vec<f64> = (0..d * d).map(|_| rng.gen::<f64>()).collect();
                let mut best = f64::NEG_INFINITY;
                for sigma in permutations(d) {
                    best = best.max(trace_along(&table, d, &sigma));
                }
                let sigma = hungarian_max(&table, d);
                let got = trace_along(&table, d, &sigma);
                assert!((got - best).abs() < 1e-12, "d={d}");
            }
        }
    }

    #[test]
    fn methods_labeling_rejected_for_other_dims() {
        let fam = mub_family(2).unwrap();
        let rho = maximally_mixed(2);
        assert!(matches!(
            mcp(&rho, &fam, &LabelingMode::MethodsD3),
            Err(WitnessError::UnsupportedLabeling(_))
        ));
    }

    #[test]
    fn fixed_labeling_validated() {
        let fam = mub_family(3).unwrap();
        let rho = maximally_mixed(3);
        let bad = Labeling {
            sigmas: vec![vec![0, 0, 1]; 4],
        };
        assert!(matches!(
            mcp(&rho, &fam, &LabelingMode::Fixed(bad)),
            Err(WitnessError::UnsupportedLabeling(_))
        ));
    }

    #[test]
    fn d6_reduced_family_reports_no_witness() {
        let fam = mub_family(6).unwrap();
        let rep = mcp(&maximally_mixed(6), &fam, &LabelingMode::Maximize).unwrap();
        assert_eq!(rep.m, 3);
        assert!(rep.witness.is_none());
        assert!((rep.bound - (1.0 + 2.0 / 6.0)).abs() < 1e-15);
    }
}
