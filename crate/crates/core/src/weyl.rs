//! Weyl–Titchmarsh functions of half-line restrictions and the reflectionless
//! defect.
//!
//! A half-line restriction on `[k, ∞)` sets `α_{k−1} = −1`; the restriction on
//! `(−∞, k]` sets `α_k = −1`. Windows of `dim` sites are closed at the far end
//! by another `−1`, so every truncation is unitary. Resolvent entries come from
//! `ℰ − z = ℒ(ℳ − zℒ*)`, where `ℳ − zℒ*` is tridiagonal.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientSequence;
use crate::error::{Error, Result};
use crate::linalg::unit;
use crate::operator::{block_factor, BlockFactor, Edge, Piece};
use crate::spectral_sets::CircleArcSet;
use crate::C64;

/// Largest accepted change between the `dim` and `2·dim` truncations.
pub const STABILITY_TOL: f64 = 1e-8;
/// `|z|` must stay below `1 − DISK_MARGIN`.
pub const DISK_MARGIN: f64 = 1e-6;
/// Smallest accepted `|denominator|` in the `M₋` formula.
pub const DENOMINATOR_TOL: f64 = 1e-12;
const SIGN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Plus,
    Minus,
}

/// A value of `m₊` or `m₋` together with how it was computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaratheodoryValue {
    pub z: C64,
    pub value: C64,
    pub side: Side,
    pub base_site: i64,
    /// The smaller of the two compared truncations.
    pub truncation_dim: usize,
}

fn check_z(z: C64) -> Result<()> {
    if !z.is_finite() || z.norm() >= 1.0 - DISK_MARGIN {
        return Err(Error::invalid("z", format!("|z| = {} is not below 1 − {DISK_MARGIN:e}", z.norm())));
    }
    Ok(())
}

/// Solves a tridiagonal system with partial pivoting. `sub[i]` is entry
/// `(i+1, i)`, `sup[i]` is entry `(i, i+1)`.
fn solve_tridiagonal(sub: &[C64], diag: &[C64], sup: &[C64], rhs: &[C64]) -> Result<Vec<C64>> {
    let n = diag.len();
    let zero = C64::new(0.0, 0.0);
    // row i of U holds (u0, u1, u2) at columns (i, i+1, i+2)
    let mut u = vec![[zero; 3]; n];
    let mut b = rhs.to_vec();
    let mut cur = [diag[0], if n > 1 { sup[0] } else { zero }, zero];
    for i in 0..n {
        if i + 1 < n {
            let next = [sub[i], diag[i + 1], if i + 2 < n { sup[i + 1] } else { zero }];
            let (mut top, mut low) = (cur, next);
            if next[0].norm() > cur[0].norm() {
                std::mem::swap(&mut top, &mut low);
                b.swap(i, i + 1);
            }
            if top[0].norm() == 0.0 {
                return Err(Error::Numerical(format!("singular resolvent system at row {i}")));
            }
            let f = low[0] / top[0];
            b[i + 1] = b[i + 1] - f * b[i];
            u[i] = top;
            cur = [low[1] - f * top[1], low[2] - f * top[2], zero];
        } else {
            if cur[0].norm() == 0.0 {
                return Err(Error::Numerical(format!("singular resolvent system at row {i}")));
            }
            u[i] = cur;
        }
    }
    let mut x = vec![zero; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        if i + 1 < n {
            s -= u[i][1] * x[i + 1];
        }
        if i + 2 < n {
            s -= u[i][2] * x[i + 2];
        }
        x[i] = s / u[i][0];
    }
    Ok(x)
}

fn add_factor(f: &BlockFactor, scale: C64, adjoint: bool, sub: &mut [C64], diag: &mut [C64], sup: &mut [C64]) {
    for p in &f.pieces {
        match *p {
            Piece::Pair { i, j, m } => {
                debug_assert_eq!(j, i + 1);
                let m = if adjoint { m.adjoint() } else { m };
                diag[i] += scale * m.a;
                sup[i] += scale * m.b;
                sub[i] += scale * m.c;
                diag[j] += scale * m.d;
            }
            Piece::Single { i, v } => diag[i] += scale * if adjoint { v.conj() } else { v },
        }
    }
}

/// `⟨δ_at, (E + z)(E − z)⁻¹δ_at⟩` for the window `E = ℒℳ` on `[lo, lo+dim)`
/// closed by `−1` on both edges.
fn caratheodory_entry(seq: &CoefficientSequence, lo: i64, dim: usize, at: usize, z: C64) -> Result<C64> {
    let edge = Edge::Closed(C64::new(-1.0, 0.0));
    let l = block_factor(seq, lo, dim, 0, edge, edge)?;
    let m = block_factor(seq, lo, dim, 1, edge, edge)?;
    let zero = C64::new(0.0, 0.0);
    let (mut sub, mut diag, mut sup) = (vec![zero; dim - 1], vec![zero; dim], vec![zero; dim - 1]);
    add_factor(&m, C64::new(1.0, 0.0), false, &mut sub, &mut diag, &mut sup);
    add_factor(&l, -z, true, &mut sub, &mut diag, &mut sup);
    let mut delta = vec![zero; dim];
    delta[at] = C64::new(1.0, 0.0);
    let mut rhs = vec![zero; dim];
    l.apply_adjoint(&delta, &mut rhs);
    let x = solve_tridiagonal(&sub, &diag, &sup, &rhs)?;
    Ok(C64::new(1.0, 0.0) + 2.0 * z * x[at])
}

fn stable_entry(seq: &CoefficientSequence, side: Side, k: i64, z: C64, dim: usize) -> Result<C64> {
    if dim < 2 {
        return Err(Error::invalid("dim", "a truncation needs at least two sites"));
    }
    let eval = |d: usize| match side {
        Side::Plus => caratheodory_entry(seq, k, d, 0, z),
        Side::Minus => caratheodory_entry(seq, k - d as i64 + 1, d, d - 1, z).map(|v| -v),
    };
    let a = eval(dim)?;
    let b = eval(2 * dim)?;
    let change = (a - b).norm();
    if !(change < STABILITY_TOL) {
        return Err(Error::TruncationUnstable { dim, change });
    }
    Ok(b)
}

fn finish(seq: &CoefficientSequence, side: Side, k: i64, z: C64, dim: usize) -> Result<CaratheodoryValue> {
    check_z(z)?;
    let value = stable_entry(seq, side, k, z, dim)?;
    let re = match side {
        Side::Plus => value.re,
        Side::Minus => -value.re,
    };
    if re < -SIGN_TOL {
        return Err(Error::Numerical(format!("{side:?} function has the wrong sign, value {value}")));
    }
    Ok(CaratheodoryValue { z, value, side, base_site: k, truncation_dim: dim })
}

/// `m₊(z, k) = ⟨δ_k, (ℰ₊ + z)(ℰ₊ − z)⁻¹δ_k⟩` for the restriction to `[k, ∞)`.
///
/// Evaluated on `[k, k+dim)` and `[k, k+2·dim)`; the two must agree to
/// [`STABILITY_TOL`].
pub fn m_plus(seq: &CoefficientSequence, k: i64, z: C64, dim: usize) -> Result<CaratheodoryValue> {
    finish(seq, Side::Plus, k, z, dim)
}

/// `m₋(z, k) = −⟨δ_k, (ℰ₋ + z)(ℰ₋ − z)⁻¹δ_k⟩` for the restriction to `(−∞, k]`.
pub fn m_minus(seq: &CoefficientSequence, k: i64, z: C64, dim: usize) -> Result<CaratheodoryValue> {
    finish(seq, Side::Minus, k, z, dim)
}

/// `(M₊, M₋)` at site `k`: `M₊ = m₊(z, k−1)` and
/// `M₋ = [Re(1−ᾱ_k) + i·Im(1+ᾱ_k)·m₋] / [i·Im(1−ᾱ_k) + Re(1+ᾱ_k)·m₋]`
/// with `m₋ = m₋(z, k−2)`.
pub fn m_coefficients(seq: &CoefficientSequence, k: i64, z: C64, dim: usize) -> Result<(C64, C64)> {
    let mp = m_plus(seq, k - 1, z, dim)?.value;
    let mm = m_minus(seq, k - 2, z, dim)?.value;
    Ok((mp, m_minus_transform(seq.eval(k), mm)?))
}

fn m_minus_transform(alpha: C64, mm: C64) -> Result<C64> {
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let a = alpha.conj();
    let num = C64::new((one - a).re, 0.0) + i * (one + a).im * mm;
    let den = i * (one - a).im + (one + a).re * mm;
    if den.norm() < DENOMINATOR_TOL {
        return Err(Error::SingularDenominator { value: den.norm() });
    }
    Ok(num / den)
}

/// One point of a defect sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectSample {
    pub theta: f64,
    pub r: f64,
    pub defect: f64,
}

/// A truncation size for radius `r`: a power of two large enough that `r^{dim/4}`
/// is negligible.
pub fn default_dim(r: f64) -> usize {
    let need = if r <= 0.0 { 64.0 } else { 4.0 * (1e-12f64).ln() / r.ln() };
    (need.max(64.0) as usize).next_power_of_two()
}

/// `|M₊(re^{iθ}, k) + conj(M₋(re^{iθ}, k))|` at `samples` angles spread over `set`.
pub fn defect_sweep(
    seq: &CoefficientSequence,
    k: i64,
    set: &CircleArcSet,
    r: f64,
    samples: usize,
) -> Result<Vec<DefectSample>> {
    if !(0.9..1.0).contains(&r) {
        return Err(Error::invalid("r", format!("{r} is not in [0.9, 1)")));
    }
    if samples < 16 {
        return Err(Error::invalid("samples", format!("{samples} < 16")));
    }
    if set.is_empty() {
        return Err(Error::invalid("S", "empty arc set"));
    }
    let dim = default_dim(r);
    set.sample(samples)
        .into_par_iter()
        .map(|theta| {
            let (mp, mm) = m_coefficients(seq, k, r * unit(theta), dim)?;
            Ok(DefectSample { theta, r, defect: (mp + mm.conj()).norm() })
        })
        .collect()
}

/// The largest sampled defect, a finite-radius surrogate for `M₊ = −conj(M₋)`
/// on `S`.
pub fn reflectionless_defect(
    seq: &CoefficientSequence,
    k: i64,
    set: &CircleArcSet,
    r: f64,
    samples: usize,
) -> Result<f64> {
    Ok(defect_sweep(seq, k, set, r, samples)?.iter().map(|s| s.defect).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::periodic_spectrum;
    use nalgebra::DMatrix;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn dense_plus(seq: &CoefficientSequence, k: i64, z: C64, dim: usize) -> C64 {
        // independent route: ϴ blocks written into dense ℒ, ℳ with α = −1 at both cuts
        let mut l = DMatrix::<C64>::zeros(dim, dim);
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        for n in k - 1..k + dim as i64 {
            let a = if n == k - 1 || n == k + dim as i64 - 1 { c(-1.0, 0.0) } else { seq.eval(n) };
            let r = (1.0 - a.norm_sqr()).sqrt();
            let block = [[a.conj(), c(r, 0.0)], [c(r, 0.0), -a]];
            let target = if n.rem_euclid(2) == 0 { &mut l } else { &mut m };
            for (di, row) in block.iter().enumerate() {
                for (dj, &v) in row.iter().enumerate() {
                    let (i, j) = (n - k + di as i64, n - k + dj as i64);
                    if (0..dim as i64).contains(&i) && (0..dim as i64).contains(&j) {
                        target[(i as usize, j as usize)] = v;
                    }
                }
            }
        }
        let e = l * m;
        let id = DMatrix::<C64>::identity(dim, dim);
        let res = (&e - &id * z).lu().solve(&(&e + &id * z)).unwrap();
        res[(0, 0)]
    }

    #[test]
    fn tridiagonal_solver_matches_dense() {
        let n = 7;
        let sub: Vec<C64> = (0..n - 1).map(|i| c(i as f64 + 1.0, 0.3)).collect();
        let diag: Vec<C64> = (0..n).map(|i| c(0.01 * i as f64, -0.2)).collect();
        let sup: Vec<C64> = (0..n - 1).map(|i| c(-0.5, i as f64)).collect();
        let rhs: Vec<C64> = (0..n).map(|i| c(1.0, i as f64)).collect();
        let x = solve_tridiagonal(&sub, &diag, &sup, &rhs).unwrap();
        let mut a = DMatrix::from_element(n, n, c(0.0, 0.0));
        for i in 0..n {
            a[(i, i)] = diag[i];
            if i + 1 < n {
                a[(i + 1, i)] = sub[i];
                a[(i, i + 1)] = sup[i];
            }
        }
        let ax = a * DMatrix::from_column_slice(n, 1, &x);
        for i in 0..n {
            assert!((ax[(i, 0)] - rhs[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn free_values() {
        let s = CoefficientSequence::free();
        for (j, k) in [(0, 0), (1, 3), (2, -5)] {
            let z = 0.9 * unit(j as f64 + 0.4);
            assert!((m_plus(&s, k, z, 256).unwrap().value - 1.0).norm() < 1e-12);
            assert!((m_minus(&s, k, z, 256).unwrap().value + 1.0).norm() < 1e-12);
            let (p, m) = m_coefficients(&s, k, z, 256).unwrap();
            assert!((p - 1.0).norm() < 1e-12 && (m + 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn value_at_origin() {
        let s = CoefficientSequence::quasiperiodic(0.6, 0.3, 0.1).unwrap();
        for k in [-3, 0, 2] {
            assert!((m_plus(&s, k, c(0.0, 0.0), 64).unwrap().value - 1.0).norm() < 1e-14);
            assert!((m_minus(&s, k, c(0.0, 0.0), 64).unwrap().value + 1.0).norm() < 1e-14);
        }
    }

    #[test]
    fn matches_dense_resolvent() {
        let s = CoefficientSequence::quasiperiodic(0.7, 0.618, 0.2).unwrap();
        for (k, z) in [(0, c(0.3, 0.4)), (3, c(-0.5, 0.1)), (-4, c(0.0, -0.7))] {
            let fast = caratheodory_entry(&s, k, 256, 0, z).unwrap();
            assert!((fast - dense_plus(&s, k, z, 256)).norm() < 1e-10, "{k}");
        }
    }

    #[test]
    fn caratheodory_signs() {
        let s = CoefficientSequence::constant(c(0.5, 0.0)).unwrap();
        assert!(m_plus(&s, 0, c(0.0, 0.3), 128).unwrap().value.re > 0.0);
        let q = CoefficientSequence::quasiperiodic(0.8, 0.41, 0.0).unwrap();
        for (j, k) in (0..8).zip([-7, -2, 0, 1, 4, 9, 12, 15]) {
            let z = 0.8 * unit(0.77 * j as f64);
            assert!(m_plus(&q, k, z, 256).unwrap().value.re > 0.0);
            assert!(m_minus(&q, k, z, 256).unwrap().value.re < 0.0);
        }
    }

    #[test]
    fn rejections() {
        let s = CoefficientSequence::constant(c(0.5, 0.0)).unwrap();
        assert!(matches!(m_plus(&s, 0, c(0.9999999, 0.0), 64), Err(Error::InvalidParameter { .. })));
        assert!(matches!(m_plus(&s, 0, c(0.99, 0.0), 16), Err(Error::TruncationUnstable { .. })));
        assert!(matches!(m_minus_transform(c(0.0, 0.0), c(0.0, 0.0)), Err(Error::SingularDenominator { .. })));
    }

    #[test]
    fn real_alpha_simplification() {
        for (a, mm) in [(0.3, c(-0.4, 0.2)), (-0.7, c(-1.3, -0.5))] {
            let got = m_minus_transform(c(a, 0.0), mm).unwrap();
            assert!((got - (1.0 - a) / ((1.0 + a) * mm)).norm() < 1e-14);
        }
    }

    #[test]
    fn defect_free_and_constant() {
        let free = CoefficientSequence::free();
        let d = reflectionless_defect(&free, 0, &CircleArcSet::full(), 0.99, 32).unwrap();
        assert!(d < 1e-10);

        let s = CoefficientSequence::constant(c(0.5, 0.0)).unwrap();
        let bands = periodic_spectrum(&s, 2, 512).unwrap();
        let d90 = reflectionless_defect(&s, 0, &bands, 0.9, 32).unwrap();
        let d99 = reflectionless_defect(&s, 0, &bands, 0.99, 32).unwrap();
        assert!(d99 >= 0.0 && d99 < d90, "{d90} {d99}");
    }
}
