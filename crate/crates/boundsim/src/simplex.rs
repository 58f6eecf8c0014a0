//! Weyl operators, Bell-state projectors and the magic simplex of
//! Bell-diagonal two-qudit states, together with the three/four-parameter
//! state family, the Horodecki state, PPT testing and the 72 phase-space
//! relabelings of a d=3 family member.
//!
//! Convention: `W_{k,l} |n> = w^{kn} |n+l mod d>` (phase gradient k, cyclic
//! shift l upward). The shift direction is the one that reproduces the
//! correlation value C_{A1,B1} = 0.675 of the reference state under the
//! sigma(i) = i+1 labeling; the opposite choice only permutes labels.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkernel::{self, ComplexMatrix, NumError, Side};

use std::f64::consts::PI;

#[derive(Debug, Error)]
pub enum SimplexError {
    #[error("Weyl index ({k},{l}) out of range for dimension {d}")]
    IndexOutOfRange { d: usize, k: usize, l: usize },
    #[error("coefficients sum to {0}, expected 1")]
    BadNormalization(f64),
    #[error("Horodecki parameter {0} outside [0,5]")]
    OutOfRange(f64),
    #[error("operation not supported for dimension {0}")]
    UnsupportedDimension(usize),
    #[error(transparent)]
    Num(#[from] NumError),
}

/// Index pair (k,l) of a Weyl operator / Bell state; arithmetic is mod d.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeylIndex {
    pub k: usize,
    pub l: usize,
}

/// The d x d table of Bell-state weights c_{k,l} defining a simplex state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexCoeffs {
    pub d: usize,
    /// Row-major: c[k*d + l].
    pub c: Vec<f64>,
}

impl SimplexCoeffs {
    pub fn uniform(d: usize) -> Self {
        SimplexCoeffs {
            d,
            c: vec![1.0 / (d * d) as f64; d * d],
        }
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.c[k * self.d + l]
    }

    pub fn sum(&self) -> f64 {
        self.c.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.c.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Physical iff every weight is nonnegative within tolerance.
    pub fn is_physical(&self, tol: f64) -> bool {
        self.min() >= -tol
    }
}

/// Parameters (q1, q2, q3[, q4]) of the reduced state family; q4 only
/// enters for d > 3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    pub d: usize,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub q4: Option<f64>,
}

impl FamilyParams {
    pub fn new3(q1: f64, q2: f64, q3: f64) -> Self {
        FamilyParams {
            d: 3,
            q1,
            q2,
            q3,
            q4: None,
        }
    }
}

/// The bound-entangled reference state highlighted throughout:
/// q = (-0.07, -1.73, -0.5774), d = 3.
pub fn featured_params() -> FamilyParams {
    FamilyParams::new3(-0.07, -1.73, -0.5774)
}

fn check_index(d: usize, k: usize, l: usize) -> Result<(), SimplexError> {
    if k >= d || l >= d {
        return Err(SimplexError::IndexOutOfRange { d, k, l });
    }
    Ok(())
}

/// The Weyl operator W_{k,l}.
pub fn weyl(d: usize, k: usize, l: usize) -> Result<ComplexMatrix, SimplexError> {
    check_index(d, k, l)?;
    let mut m = ComplexMatrix::zeros(d);
    for n in 0..d {
        m[((n + l) % d, n)] = Complex64::from_polar(1.0, 2.0 * PI * (k * n) as f64 / d as f64);
    }
    Ok(m)
}

/// The maximally entangled vector (W_{k,l} ox 1) (1/sqrt d) sum_a |aa>.
pub fn bell_vector(d: usize, k: usize, l: usize) -> Result<Vec<Complex64>, SimplexError> {
    check_index(d, k, l)?;
    let norm = 1.0 / (d as f64).sqrt();
    let mut v = vec![Complex64::default(); d * d];
    for a in 0..d {
        let phase = Complex64::from_polar(norm, 2.0 * PI * (k * a) as f64 / d as f64);
        v[((a + l) % d) * d + a] = phase;
    }
    Ok(v)
}

/// Rank-1 projector P_{k,l} onto the Bell vector.
pub fn bell_state(d: usize, k: usize, l: usize) -> Result<ComplexMatrix, SimplexError> {
    Ok(ComplexMatrix::outer(&bell_vector(d, k, l)?))
}

/// rho = sum c_{k,l} P_{k,l}. The spectrum of the result is exactly the
/// coefficient multiset.
pub fn state_from_coeffs(c: &SimplexCoeffs) -> Result<ComplexMatrix, SimplexError> {
    let s = c.sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(SimplexError::BadNormalization(s));
    }
    let d = c.d;
    let mut rho = ComplexMatrix::zeros(d * d);
    for k in 0..d {
        for l in 0..d {
            let w = c.get(k, l);
            if w == 0.0 {
                continue;
            }
            rho.add_scaled(&bell_state(d, k, l)?, w);
        }
    }
    Ok(rho)
}

/// Expands family parameters into the full coefficient table.
pub fn coeffs_from_family(p: &FamilyParams) -> Result<SimplexCoeffs, SimplexError> {
    let d = p.d;
    if d < 3 || (d > 3 && p.q4.is_none()) {
        return Err(SimplexError::UnsupportedDimension(d));
    }
    let df = d as f64;
    let q4 = p.q4.unwrap_or(0.0);
    let denom1 = df * df - (df + 1.0);
    let identity_weight =
        1.0 - p.q1 / denom1 - p.q2 / (df + 1.0) - p.q3 - (df - 3.0) * q4;
    let base = identity_weight / (df * df);
    let mut c = vec![base; d * d];
    c[0] += p.q1 / denom1;
    for i in 1..d {
        c[i * d] += p.q2 / ((df + 1.0) * (df - 1.0));
    }
    for i in 0..d {
        c[i * d + 1] += p.q3 / df;
    }
    if d > 3 {
        for z in 2..=(d - 2) {
            for i in 0..d {
                c[i * d + z] += q4 / df;
            }
        }
    }
    Ok(SimplexCoeffs { d, c })
}

/// The one-parameter Horodecki state, embedded in the family at d = 3.
pub fn horodecki_params(lambda: f64) -> Result<FamilyParams, SimplexError> {
    if !(0.0..=5.0).contains(&lambda) {
        return Err(SimplexError::OutOfRange(lambda));
    }
    Ok(FamilyParams::new3(
        (30.0 - 5.0 * lambda) / 21.0,
        -8.0 * lambda / 21.0,
        (5.0 - 2.0 * lambda) / 7.0,
    ))
}

/// Minimum eigenvalue of rho^{T_A} for a d x d bipartite state, via a full
/// partial transpose and eigensolve.
pub fn ppt_min_eig(rho: &ComplexMatrix, d: usize) -> Result<f64, SimplexError> {
    if rho.dim() != d * d {
        return Err(SimplexError::UnsupportedDimension(d));
    }
    let pt = numkernel::partial_transpose(rho, d, d, Side::A)?;
    let spec = numkernel::herm_eigvals(&pt, 1e-8)?;
    Ok(spec.min())
}

/// Minimum eigenvalue of the partial transpose of a simplex state, computed
/// from the coefficient table alone.
///
/// For Bell-diagonal states the partial transpose is block diagonal in the
/// d sectors of constant index sum s = a+b mod d; each d x d block has
/// entries B^{(s)}_{a',a} = (1/d) sum_k c_{k,(a+a'-s) mod d} w^{k(a-a')}.
/// This is the fast route used in grid scans and the optimizer; it is
/// cross-checked against [`ppt_min_eig`] in the test suite.
pub fn ppt_min_eig_coeffs(coeffs: &SimplexCoeffs) -> Result<f64, SimplexError> {
    let d = coeffs.d;
    let df = d as f64;
    let mut min_eig = f64::INFINITY;
    for s in 0..d {
        let block = ComplexMatrix::from_fn(d, |ap, a| {
            let l = (a + ap + d - s) % d;
            let mut z = Complex64::default();
            for k in 0..d {
                let c = coeffs.get(k, l);
                if c != 0.0 {
                    let angle = 2.0 * PI * (k * ((a + d - ap) % d)) as f64 / df;
                    z += Complex64::from_polar(c, angle);
                }
            }
            z / df
        });
        let spec = numkernel::herm_eigvals(&block, 1e-9)?;
        min_eig = min_eig.min(spec.min());
    }
    Ok(min_eig)
}

/// One of the 72 phase-space relabelings of a d=3 family member: the line
/// carrying the q1/q2 weights, which of its points is the q1 vertex, and
/// which parallel line carries q3.
#[derive(Debug, Clone, Serialize)]
pub struct Variant {
    pub line: [WeylIndex; 3],
    pub vertex: WeylIndex,
    pub q3_line: [WeylIndex; 3],
    pub coeffs: SimplexCoeffs,
}

/// All phase-space lines of Z3 x Z3 grouped by direction; each group holds
/// the 3 parallel lines in offset order. Direction order is fixed so that
/// the first enumerated variant is the canonical family layout.
fn d3_line_classes() -> Vec<[[(usize, usize); 3]; 3]> {
    let mut classes = Vec::new();
    for m in 0..3 {
        // Direction (1, m): lines {(t, c + m t)}.
        let mut parallels = [[(0usize, 0usize); 3]; 3];
        for (c, line) in parallels.iter_mut().enumerate() {
            for (t, pt) in line.iter_mut().enumerate() {
                *pt = (t, (c + m * t) % 3);
            }
        }
        classes.push(parallels);
    }
    // Direction (0, 1): lines {(c, t)}.
    let mut vertical = [[(0usize, 0usize); 3]; 3];
    for (c, line) in vertical.iter_mut().enumerate() {
        for (t, pt) in line.iter_mut().enumerate() {
            *pt = (c, t);
        }
    }
    classes.push(vertical);
    classes
}

/// Enumerates the (3+1) x 3 x 3 x 2 = 72 unitary-equivalent coefficient
/// tables realizing the same d=3 family member. Variant 0 reproduces the
/// canonical `coeffs_from_family` layout exactly.
pub fn equivalent_variants(p: &FamilyParams) -> Result<Vec<Variant>, SimplexError> {
    if p.d != 3 {
        return Err(SimplexError::UnsupportedDimension(p.d));
    }
    let identity_weight = 1.0 - p.q1 / 5.0 - p.q2 / 4.0 - p.q3;
    let base = identity_weight / 9.0;
    let mut out = Vec::with_capacity(72);
    for parallels in d3_line_classes() {
        for offset in 0..3 {
            let line = parallels[offset];
            for vertex_pos in 0..3 {
                for other in 0..2 {
                    let q3_offset = [(offset + 1) % 3, (offset + 2) % 3][other];
                    let q3_line = parallels[q3_offset];
                    let mut c = vec![base; 9];
                    for (t, &(k, l)) in line.iter().enumerate() {
                        if t == vertex_pos {
                            c[k * 3 + l] += p.q1 / 5.0;
                        } else {
                            c[k * 3 + l] += p.q2 / 8.0;
                        }
                    }
                    for &(k, l) in &q3_line {
                        c[k * 3 + l] += p.q3 / 3.0;
                    }
                    let to_idx = |(k, l): (usize, usize)| WeylIndex { k, l };
                    out.push(Variant {
                        line: line.map(to_idx),
                        vertex: to_idx(line[vertex_pos]),
                        q3_line: q3_line.map(to_idx),
                        coeffs: SimplexCoeffs { d: 3, c },
                    });
                }
            }
        }
    }
    debug_assert_eq!(out.len(), 72);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{fidelity, herm_eigvals, kron};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn weyl_identity_and_phase_gradient() {
        let w00 = weyl(3, 0, 0).unwrap();
        assert!(w00.max_abs_diff(&ComplexMatrix::identity(3)) < 1e-15);
        let w10 = weyl(3, 1, 0).unwrap();
        let w = Complex64::from_polar(1.0, 2.0 * PI / 3.0);
        assert!((w10[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((w10[(1, 1)] - w).norm() < 1e-15);
        assert!((w10[(2, 2)] - w * w).norm() < 1e-15);
    }

    #[test]
    fn weyl_shift_cubes_to_identity_up_to_phase() {
        let w01 = weyl(3, 0, 1).unwrap();
        let cubed = w01.mul(&w01).mul(&w01);
        // Strip the global phase using the (0,0) entry.
        let phase = cubed[(0, 0)];
        assert!((phase.norm() - 1.0).abs() < 1e-12);
        let normalized = cubed.scale(phase.conj());
        assert!(normalized.max_abs_diff(&ComplexMatrix::identity(3)) < 1e-12);
    }

    #[test]
    fn weyl_is_unitary() {
        for d in [2usize, 3, 5, 8] {
            for k in 0..d {
                for l in 0..d {
                    let w = weyl(d, k, l).unwrap();
                    let prod = w.dagger().mul(&w);
                    assert!(prod.max_abs_diff(&ComplexMatrix::identity(d)) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn weyl_index_out_of_range() {
        assert!(matches!(
            weyl(3, 3, 0),
            Err(SimplexError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn bell_states_orthogonal_complete() {
        for d in [2usize, 3, 4] {
            let mut sum = ComplexMatrix::zeros(d * d);
            let states: Vec<_> = (0..d)
                .flat_map(|k| (0..d).map(move |l| (k, l)))
                .map(|(k, l)| bell_state(d, k, l).unwrap())
                .collect();
            for (i, a) in states.iter().enumerate() {
                assert!((a.trace().re - 1.0).abs() < 1e-12);
                assert!(a.hermiticity_deviation() < 1e-12);
                for (j, b) in states.iter().enumerate() {
                    let overlap = a.mul(b).trace().norm();
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((overlap - want).abs() < 1e-12, "d={d} {i} {j}");
                }
                sum.add_scaled(a, 1.0);
            }
            assert!(sum.max_abs_diff(&ComplexMatrix::identity(d * d)) < 1e-10);
        }
    }

    #[test]
    fn bell_00_overlaps_reference_vector() {
        let d = 3;
        let p00 = bell_state(d, 0, 0).unwrap();
        let psi = bell_vector(d, 0, 0).unwrap();
        let overlap = p00.sandwich(&psi, &psi).re;
        assert!((overlap - 1.0).abs() < 1e-12);
        let p10 = bell_state(d, 1, 0).unwrap();
        assert!(p00.mul(&p10).trace().norm() < 1e-12);
    }

    #[test]
    fn state_from_uniform_is_maximally_mixed() {
        let rho = state_from_coeffs(&SimplexCoeffs::uniform(3)).unwrap();
        let target = ComplexMatrix::identity(9).scale(Complex64::new(1.0 / 9.0, 0.0));
        assert!(rho.max_abs_diff(&target) < 1e-12);
    }

    #[test]
    fn state_from_vertex_is_bell_projector() {
        let mut c = SimplexCoeffs {
            d: 3,
            c: vec![0.0; 9],
        };
        c.c[0] = 1.0;
        let rho = state_from_coeffs(&c).unwrap();
        assert!(rho.max_abs_diff(&bell_state(3, 0, 0).unwrap()) < 1e-12);
    }

    #[test]
    fn state_rejects_bad_normalization() {
        let c = SimplexCoeffs {
            d: 3,
            c: vec![0.5; 9],
        };
        assert!(matches!(
            state_from_coeffs(&c),
            Err(SimplexError::BadNormalization(_))
        ));
    }

    #[test]
    fn featured_coeffs_match_derived_table() {
        let c = coeffs_from_family(&featured_params()).unwrap();
        assert!((c.get(0, 0) - 0.2109).abs() < 1e-4);
        for i in 1..3 {
            assert!((c.get(i, 0) - 0.0086).abs() < 1e-4);
        }
        for i in 0..3 {
            assert!((c.get(i, 1) - 0.0324).abs() < 1e-4);
            assert!((c.get(i, 2) - 0.2249).abs() < 1e-4);
        }
        assert!(c.is_physical(0.0));
        assert!((c.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn family_zero_is_uniform_and_vertex_limit_works() {
        let c = coeffs_from_family(&FamilyParams::new3(0.0, 0.0, 0.0)).unwrap();
        for &v in &c.c {
            assert!((v - 1.0 / 9.0).abs() < 1e-15);
        }
        // q1 = d^2-(d+1) = 5 gives the pure Bell vertex.
        let c = coeffs_from_family(&FamilyParams::new3(5.0, 0.0, 0.0)).unwrap();
        assert!((c.get(0, 0) - 1.0).abs() < 1e-12);
        for (i, &v) in c.c.iter().enumerate().skip(1) {
            assert!(v.abs() < 1e-12, "c[{i}] = {v}");
        }
    }

    #[test]
    fn featured_state_is_physical() {
        let c = coeffs_from_family(&featured_params()).unwrap();
        let rho = state_from_coeffs(&c).unwrap();
        assert!((rho.trace().re - 1.0).abs() < 1e-12);
        let spec = herm_eigvals(&rho, 1e-9).unwrap();
        assert!(spec.min() >= -1e-10);
    }

    #[test]
    fn horodecki_mapping_values() {
        let p = horodecki_params(3.5).unwrap();
        assert!((p.q1 - 0.5952).abs() < 1e-4);
        assert!((p.q2 + 1.3333).abs() < 1e-4);
        assert!((p.q3 + 0.2857).abs() < 1e-4);
        let p0 = horodecki_params(0.0).unwrap();
        assert!((p0.q1 - 30.0 / 21.0).abs() < 1e-15);
        assert!(p0.q2.abs() < 1e-15);
        assert!((p0.q3 - 5.0 / 7.0).abs() < 1e-15);
        assert!(matches!(
            horodecki_params(5.1),
            Err(SimplexError::OutOfRange(_))
        ));
    }

    #[test]
    fn horodecki_ppt_window() {
        // PPT inside [1,4], NPT at the flanks.
        let mut l = 1.0;
        while l <= 4.0 + 1e-9 {
            let c = coeffs_from_family(&horodecki_params(l).unwrap()).unwrap();
            assert!(
                ppt_min_eig_coeffs(&c).unwrap() >= -1e-9,
                "lambda={l} should be PPT"
            );
            l += 0.1;
        }
        for l in [0.5, 4.5] {
            let c = coeffs_from_family(&horodecki_params(l).unwrap()).unwrap();
            assert!(ppt_min_eig_coeffs(&c).unwrap() < -1e-6, "lambda={l}");
        }
        let c2 = coeffs_from_family(&horodecki_params(2.0).unwrap()).unwrap();
        assert!(ppt_min_eig_coeffs(&c2).unwrap() >= -1e-9);
    }

    #[test]
    fn ppt_identity_and_bell() {
        let i9 = ComplexMatrix::identity(9).scale(Complex64::new(1.0 / 9.0, 0.0));
        assert!((ppt_min_eig(&i9, 3).unwrap() - 1.0 / 9.0).abs() < 1e-12);
        let p00 = bell_state(3, 0, 0).unwrap();
        assert!((ppt_min_eig(&p00, 3).unwrap() + 1.0 / 3.0).abs() < 1e-10);
        // -1/d appears with multiplicity d(d-1)/2 = 3.
        let pt = numkernel::partial_transpose(&p00, 3, 3, Side::A).unwrap();
        let spec = herm_eigvals(&pt, 1e-9).unwrap();
        let negatives = spec
            .values
            .iter()
            .filter(|&&v| (v + 1.0 / 3.0).abs() < 1e-10)
            .count();
        assert_eq!(negatives, 3);
    }

    #[test]
    fn block_ppt_matches_full_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for d in [2usize, 3, 4, 5] {
            for _ in 0..20 {
                let mut c: Vec<f64> = (0..d * d).map(|_| rng.gen::<f64>()).collect();
                let s: f64 = c.iter().sum();
                for v in c.iter_mut() {
                    *v /= s;
                }
                let coeffs = SimplexCoeffs { d, c };
                let rho = state_from_coeffs(&coeffs).unwrap();
                let full = ppt_min_eig(&rho, d).unwrap();
                let fast = ppt_min_eig_coeffs(&coeffs).unwrap();
                assert!((full - fast).abs() < 1e-9, "d={d}: {full} vs {fast}");
            }
        }
    }

    #[test]
    fn spectrum_equals_coefficient_multiset() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for d in [3usize, 4, 5] {
            for _ in 0..20 {
                let mut c: Vec<f64> = (0..d * d).map(|_| rng.gen::<f64>()).collect();
                let s: f64 = c.iter().sum();
                for v in c.iter_mut() {
                    *v /= s;
                }
                let coeffs = SimplexCoeffs { d, c: c.clone() };
                let rho = state_from_coeffs(&coeffs).unwrap();
                let spec = herm_eigvals(&rho, 1e-9).unwrap();
                let mut sorted = c;
                sorted.sort_by(f64::total_cmp);
                for (a, b) in spec.values.iter().zip(&sorted) {
                    assert!((a - b).abs() < 1e-10, "d={d}");
                }
            }
        }
    }

    #[test]
    fn variants_count_and_canonical_first() {
        let p = featured_params();
        let variants = equivalent_variants(&p).unwrap();
        assert_eq!(variants.len(), 72);
        let canonical = coeffs_from_family(&p).unwrap();
        for (a, b) in variants[0].coeffs.c.iter().zip(&canonical.c) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn variants_share_coefficient_multiset() {
        let p = featured_params();
        let variants = equivalent_variants(&p).unwrap();
        let mut reference = variants[0].coeffs.c.clone();
        reference.sort_by(f64::total_cmp);
        for v in &variants {
            let mut sorted = v.coeffs.c.clone();
            sorted.sort_by(f64::total_cmp);
            for (a, b) in sorted.iter().zip(&reference) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn variants_share_pt_spectrum() {
        let p = featured_params();
        let variants = equivalent_variants(&p).unwrap();
        let reference = ppt_min_eig_coeffs(&variants[0].coeffs).unwrap();
        for v in &variants {
            let m = ppt_min_eig_coeffs(&v.coeffs).unwrap();
            assert!((m - reference).abs() < 1e-9);
        }
    }

    #[test]
    fn variants_reject_other_dims() {
        let p = FamilyParams {
            d: 4,
            q1: 0.0,
            q2: 0.0,
            q3: 0.0,
            q4: Some(0.0),
        };
        assert!(matches!(
            equivalent_variants(&p),
            Err(SimplexError::UnsupportedDimension(4))
        ));
    }

    #[test]
    fn fidelity_bell_vs_mixed_is_one_ninth() {
        let p00 = bell_state(3, 0, 0).unwrap();
        let mixed = ComplexMatrix::identity(9).scale(Complex64::new(1.0 / 9.0, 0.0));
        let f = fidelity(&p00, &mixed).unwrap();
        assert!((f - 1.0 / 9.0).abs() < 1e-9, "got {f}");
    }

    #[test]
    fn local_weyl_rotation_preserves_spectrum() {
        let c = coeffs_from_family(&featured_params()).unwrap();
        let rho = state_from_coeffs(&c).unwrap();
        let w = weyl(3, 1, 2).unwrap();
        let u = kron(&w, &ComplexMatrix::identity(3));
        let rotated = u.mul(&rho).mul(&u.dagger());
        let s1 = herm_eigvals(&rho, 1e-9).unwrap();
        let s2 = herm_eigvals(&rotated, 1e-8).unwrap();
        for (a, b) in s1.values.iter().zip(&s2.values) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
