//! Complete sets of mutually unbiased bases for prime and prime-power
//! dimensions, plus the reduced three-basis family for d = 6.
//!
//! Odd prime powers use the Wootters-Fields construction over GF(p^n);
//! even prime powers use the Galois-ring construction over GR(4, n).
//! Basis and vector ordering follow field-element enumeration order so
//! downstream labelings are reproducible.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use std::f64::consts::PI;

#[derive(Debug, Error)]
pub enum MubError {
    #[error("{0} is not prime")]
    NotPrime(u32),
    #[error("field size {0} exceeds the supported maximum of 16")]
    TooLarge(u32),
    #[error("no complete or reduced MUB family implemented for dimension {0}")]
    UnsupportedDimension(usize),
}

fn is_prime(p: u32) -> bool {
    p >= 2 && (2..p).take_while(|q| q * q <= p).all(|q| !p.is_multiple_of(q))
}

// ---------------------------------------------------------------------------
// GF(p^n) with explicit lookup tables
// ---------------------------------------------------------------------------

/// Finite field GF(p^n) with full addition and multiplication tables.
///
/// Elements are indexed 0..d-1; index i encodes the polynomial with base-p
/// digits of i as coefficients (least significant digit = constant term).
/// The prime subfield therefore occupies indices 0..p-1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaloisField {
    pub p: u32,
    pub n: u32,
    pub d: usize,
    /// Coefficients of the monic irreducible modulus, constant term first.
    pub irreducible: Vec<u32>,
    add: Vec<u8>,
    mul: Vec<u8>,
}

fn digits(mut v: usize, p: usize, n: usize) -> Vec<u32> {
    let mut out = vec![0u32; n];
    for o in out.iter_mut() {
        *o = (v % p) as u32;
        v /= p;
    }
    out
}

/// Remainder of `poly` (constant term first) modulo the monic `modulus`.
fn poly_rem(mut poly: Vec<u32>, modulus: &[u32], p: u32) -> Vec<u32> {
    let deg_m = modulus.len() - 1;
    while poly.len() > deg_m {
        let lead = *poly.last().unwrap() % p;
        let shift = poly.len() - 1 - deg_m;
        if lead != 0 {
            for (i, &mc) in modulus.iter().enumerate() {
                let idx = shift + i;
                poly[idx] = (poly[idx] + p - (lead * mc) % p) % p;
            }
        }
        poly.pop();
    }
    poly
}

fn poly_mul(a: &[u32], b: &[u32], p: u32) -> Vec<u32> {
    let mut out = vec![0u32; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = (out[i + j] + x * y) % p;
        }
    }
    out
}

fn is_irreducible(candidate: &[u32], p: u32) -> bool {
    let n = candidate.len() - 1;
    // Trial division by every monic polynomial of degree 1..=n/2.
    for deg in 1..=n / 2 {
        let count = (p as usize).pow(deg as u32);
        for v in 0..count {
            let mut divisor = digits(v, p as usize, deg);
            divisor.push(1); // monic
            let rem = poly_rem(candidate.to_vec(), &divisor, p);
            if rem.iter().all(|&c| c % p == 0) {
                return false;
            }
        }
    }
    true
}

/// Constructs GF(p^n) with the lexicographically smallest monic irreducible
/// modulus (ordered by the base-p integer formed by the non-leading
/// coefficients).
pub fn gf_make(p: u32, n: u32) -> Result<GaloisField, MubError> {
    if !is_prime(p) {
        return Err(MubError::NotPrime(p));
    }
    let d = (p as usize).pow(n);
    if d > 16 {
        return Err(MubError::TooLarge(d as u32));
    }
    let irreducible = if n == 1 {
        vec![0, 1]
    } else {
        (0..d)
            .map(|v| {
                let mut cand = digits(v, p as usize, n as usize);
                cand.push(1);
                cand
            })
            .find(|cand| is_irreducible(cand, p))
            .expect("an irreducible polynomial of every degree exists")
    };

    let enc = |poly: &[u32]| -> usize {
        poly.iter()
            .rev()
            .fold(0usize, |acc, &c| acc * p as usize + (c % p) as usize)
    };

    let mut add = vec![0u8; d * d];
    let mut mul = vec![0u8; d * d];
    for i in 0..d {
        let di = digits(i, p as usize, n as usize);
        for j in 0..d {
            let dj = digits(j, p as usize, n as usize);
            let sum: Vec<u32> = di.iter().zip(&dj).map(|(a, b)| (a + b) % p).collect();
            add[i * d + j] = enc(&sum) as u8;
            let prod = poly_rem(poly_mul(&di, &dj, p), &irreducible, p);
            let mut padded = prod;
            padded.resize(n as usize, 0);
            mul[i * d + j] = enc(&padded) as u8;
        }
    }
    Ok(GaloisField {
        p,
        n,
        d,
        irreducible,
        add,
        mul,
    })
}

impl GaloisField {
    pub fn add(&self, a: usize, b: usize) -> usize {
        self.add[a * self.d + b] as usize
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.mul[a * self.d + b] as usize
    }

    pub fn pow(&self, mut base: usize, mut e: u64) -> usize {
        let mut acc = 1usize;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Field trace to the prime subfield; the result is in 0..p.
    pub fn trace(&self, z: usize) -> u32 {
        let mut acc = 0usize;
        let mut frob = z;
        for _ in 0..self.n {
            acc = self.add(acc, frob);
            frob = self.pow(frob, self.p as u64);
        }
        debug_assert!(acc < self.p as usize, "trace must land in the prime subfield");
        acc as u32
    }

    pub fn inverse(&self, a: usize) -> Option<usize> {
        (1..self.d).find(|&b| self.mul(a, b) == 1)
    }
}

// ---------------------------------------------------------------------------
// GR(4, n) for even prime powers
// ---------------------------------------------------------------------------

/// Galois ring GR(4, n): Z4[x] modulo a monic basic irreducible obtained by
/// Graeffe-lifting the lexicographically smallest primitive polynomial over
/// GF(2). Only what the even-dimension MUB construction needs is exposed.
struct GaloisRing {
    n: usize,
    modulus: Vec<u32>, // constant term first, length n+1, monic
    /// Teichmueller set: 0 followed by the powers of the root xi.
    teich: Vec<Vec<u32>>,
}

impl GaloisRing {
    fn new(n: usize) -> Self {
        // Lexicographically smallest primitive polynomials over GF(2).
        let f2: &[u32] = match n {
            1 => &[1, 1],
            2 => &[1, 1, 1],
            3 => &[1, 1, 0, 1],
            4 => &[1, 1, 0, 0, 1],
            _ => panic!("GR(4,{n}) not supported"),
        };
        // Graeffe lift: (-1)^n h(x^2) = f(x) f(-x) over Z4.
        let f4: Vec<i64> = f2.iter().map(|&c| c as i64).collect();
        let f4_neg: Vec<i64> = f4
            .iter()
            .enumerate()
            .map(|(i, &c)| if i % 2 == 1 { -c } else { c })
            .collect();
        let mut prod = vec![0i64; 2 * n + 1];
        for (i, &a) in f4.iter().enumerate() {
            for (j, &b) in f4_neg.iter().enumerate() {
                prod[i + j] += a * b;
            }
        }
        let sign = if n % 2 == 1 { -1 } else { 1 };
        let mut modulus = vec![0u32; n + 1];
        for (k, m) in modulus.iter_mut().enumerate() {
            debug_assert!(prod.iter().enumerate().all(|(i, &c)| i % 2 == 0 || c == 0));
            *m = (((sign * prod[2 * k]) % 4 + 4) % 4) as u32;
        }
        debug_assert_eq!(modulus[n], 1, "lifted modulus must stay monic");

        let mut ring = GaloisRing {
            n,
            modulus,
            teich: Vec::new(),
        };
        let zero = vec![0u32; n];
        let mut xi = vec![0u32; n];
        if n == 1 {
            // Root of y + 3 is 1.
            xi[0] = 1;
        } else {
            xi[1] = 1;
        }
        let mut teich = vec![zero];
        let mut cur = ring.one();
        for _ in 0..(1usize << n) - 1 {
            teich.push(cur.clone());
            cur = ring.mul(&cur, &xi);
        }
        debug_assert_eq!(cur, ring.one(), "xi must have order 2^n - 1");
        ring.teich = teich;
        ring
    }

    fn one(&self) -> Vec<u32> {
        let mut v = vec![0u32; self.n];
        v[0] = 1;
        v
    }

    fn add(&self, a: &[u32], b: &[u32]) -> Vec<u32> {
        a.iter().zip(b).map(|(x, y)| (x + y) % 4).collect()
    }

    fn mul(&self, a: &[u32], b: &[u32]) -> Vec<u32> {
        let mut prod = vec![0u32; 2 * self.n - 1];
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                prod[i + j] = (prod[i + j] + x * y) % 4;
            }
        }
        // Reduce modulo the monic modulus.
        for k in (self.n..prod.len()).rev() {
            let lead = prod[k];
            if lead != 0 {
                for (i, &mc) in self.modulus.iter().enumerate() {
                    let idx = k - self.n + i;
                    prod[idx] = (prod[idx] + 4 - (lead * mc) % 4) % 4;
                }
            }
        }
        prod.truncate(self.n);
        prod
    }

    fn scale2(&self, a: &[u32]) -> Vec<u32> {
        a.iter().map(|x| (2 * x) % 4).collect()
    }

    /// Ring trace to Z4 via the Frobenius z = a + 2b |-> a^2 + 2b^2 on the
    /// 2-adic (Teichmueller) decomposition; arguments here are always of the
    /// form a + 2c with a, c Teichmueller, which keeps the trace computable
    /// with plain ring products.
    fn trace_teich_pair(&self, a: &[u32], c: &[u32]) -> u32 {
        let mut acc = vec![0u32; self.n];
        let mut fa = a.to_vec();
        let mut fc = c.to_vec();
        for _ in 0..self.n {
            acc = self.add(&acc, &self.add(&fa, &self.scale2(&fc)));
            fa = self.mul(&fa, &fa);
            fc = self.mul(&fc, &fc);
        }
        debug_assert!(
            acc[1..].iter().all(|&x| x == 0),
            "ring trace must land in Z4"
        );
        acc[0]
    }
}

// ---------------------------------------------------------------------------
// MUB families
// ---------------------------------------------------------------------------

/// A set of orthonormal bases of dimension d, pairwise mutually unbiased.
/// `bases[k][i][x]` is component x of vector i of basis k; basis 0 is always
/// the computational basis.
#[derive(Debug, Clone)]
pub struct MubFamily {
    pub d: usize,
    pub bases: Vec<Vec<Vec<Complex64>>>,
}

/// Exhaustive verification report for a basis family.
#[derive(Debug, Clone, Serialize)]
pub struct MubReport {
    pub max_overlap_deviation: f64,
    pub max_orthonormality_deviation: f64,
}

fn computational_basis(d: usize) -> Vec<Vec<Complex64>> {
    (0..d)
        .map(|i| {
            (0..d)
                .map(|x| Complex64::new(if x == i { 1.0 } else { 0.0 }, 0.0))
                .collect()
        })
        .collect()
}

fn root_of_unity(num: f64, den: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * num / den)
}

fn odd_prime_power_family(gf: &GaloisField) -> Vec<Vec<Vec<Complex64>>> {
    let d = gf.d;
    let norm = 1.0 / (d as f64).sqrt();
    let mut bases = vec![computational_basis(d)];
    for r in 0..d {
        let mut basis = Vec::with_capacity(d);
        for m in 0..d {
            let vec: Vec<Complex64> = (0..d)
                .map(|x| {
                    let arg = gf.add(gf.mul(r, gf.mul(x, x)), gf.mul(m, x));
                    root_of_unity(gf.trace(arg) as f64, gf.p as f64) * norm
                })
                .collect();
            basis.push(vec);
        }
        bases.push(basis);
    }
    bases
}

fn even_prime_power_family(n: usize) -> Vec<Vec<Vec<Complex64>>> {
    let ring = GaloisRing::new(n);
    let d = 1usize << n;
    let norm = 1.0 / (d as f64).sqrt();
    let i_unit = Complex64::new(0.0, 1.0);
    let mut bases = vec![computational_basis(d)];
    for b in 0..d {
        let tb = &ring.teich[b];
        let mut basis = Vec::with_capacity(d);
        for m in 0..d {
            let tm = &ring.teich[m];
            let vec: Vec<Complex64> = (0..d)
                .map(|x| {
                    let tx = &ring.teich[x];
                    let a = ring.mul(tb, tx);
                    let c = ring.mul(tm, tx);
                    let e = ring.trace_teich_pair(&a, &c);
                    i_unit.powu(e) * norm
                })
                .collect();
            basis.push(vec);
        }
        bases.push(basis);
    }
    bases
}

/// The known three-basis family for d = 6: computational, Fourier, and a
/// chirped Fourier basis whose unbiasedness rests on a quadratic Gauss sum.
fn d6_family() -> Vec<Vec<Vec<Complex64>>> {
    let d = 6usize;
    let norm = 1.0 / (d as f64).sqrt();
    let fourier: Vec<Vec<Complex64>> = (0..d)
        .map(|k| {
            (0..d)
                .map(|j| root_of_unity((k * j) as f64, d as f64) * norm)
                .collect()
        })
        .collect();
    let chirped: Vec<Vec<Complex64>> = (0..d)
        .map(|k| {
            (0..d)
                .map(|j| {
                    let chirp = Complex64::from_polar(1.0, PI * (j * j) as f64 / d as f64);
                    chirp * root_of_unity((k * j) as f64, d as f64) * norm
                })
                .collect()
        })
        .collect();
    vec![computational_basis(d), fourier, chirped]
}

/// Builds the MUB family for dimension d: d+1 bases for supported prime
/// powers, exactly 3 bases for d = 6.
pub fn mub_family(d: usize) -> Result<MubFamily, MubError> {
    let bases = match d {
        2 | 4 | 8 => even_prime_power_family(d.trailing_zeros() as usize),
        3 | 5 | 7 => odd_prime_power_family(&gf_make(d as u32, 1)?),
        9 => odd_prime_power_family(&gf_make(3, 2)?),
        6 => d6_family(),
        _ => return Err(MubError::UnsupportedDimension(d)),
    };
    Ok(MubFamily { d, bases })
}

/// Componentwise complex conjugate of every vector in a basis.
pub fn conjugate_basis(basis: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    basis
        .iter()
        .map(|v| v.iter().map(|z| z.conj()).collect())
        .collect()
}

/// Exhaustive pairwise check of orthonormality within each basis and
/// unbiasedness (|<i|j>|^2 = 1/d) across distinct bases.
pub fn verify_mub(fam: &MubFamily) -> MubReport {
    let d = fam.d;
    let mut max_overlap: f64 = 0.0;
    let mut max_ortho: f64 = 0.0;
    for (n, basis_n) in fam.bases.iter().enumerate() {
        for (i, vi) in basis_n.iter().enumerate() {
            for (j, vj) in basis_n.iter().enumerate() {
                let ip: Complex64 = vi.iter().zip(vj).map(|(a, b)| a.conj() * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                max_ortho = max_ortho.max((ip.norm() - want).abs());
            }
        }
        for basis_m in fam.bases.iter().skip(n + 1) {
            for vi in basis_n {
                for vj in basis_m {
                    let ip: Complex64 = vi.iter().zip(vj).map(|(a, b)| a.conj() * b).sum();
                    max_overlap = max_overlap.max((ip.norm_sqr() - 1.0 / d as f64).abs());
                }
            }
        }
    }
    MubReport {
        max_overlap_deviation: max_overlap,
        max_orthonormality_deviation: max_ortho,
    }
}
