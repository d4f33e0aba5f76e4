//! Floquet theory for periodic sequences: the twisted blocks `ℒ_q`, `ℳ_q(k)`,
//! band eigenpairs, band derivatives, discriminant spectra and the
//! monodromy-norm bound.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientSequence;
use crate::error::{Error, Result};
use crate::linalg::{self, unit};
use crate::operator::{block_factor, BlockFactor, Edge};
use crate::spectral_sets::CircleArcSet;
use crate::transfer;
use crate::C64;

/// Eigenvalues closer than this (chordally) count as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-8;
/// Largest accepted eigen-residual `‖ℰ_q u − z u‖`.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// A band eigenvalue with its Floquet solutions `u` (of `ℰ_q`) and `v = ℒ_q* u`
/// (of the dual `ℳ_qℒ_q`), both of unit norm on `0..q`.
#[derive(Debug, Clone, PartialEq)]
pub struct FloquetEigenpair {
    pub k: f64,
    pub z: C64,
    pub u: Vec<C64>,
    pub v: Vec<C64>,
}

fn check_periodic(seq: &CoefficientSequence, q: usize) -> Result<()> {
    if q == 0 || q % 2 != 0 {
        return Err(Error::NotEven { name: "q", value: q as i64 });
    }
    if !seq.is_periodic_with(q) {
        return Err(Error::PeriodMismatch { period: seq.period().unwrap_or(0), q });
    }
    Ok(())
}

fn factors(seq: &CoefficientSequence, q: usize, k: f64) -> Result<(BlockFactor, BlockFactor)> {
    check_periodic(seq, q)?;
    let twist = Edge::Wrap(unit(k * q as f64));
    let l = block_factor(seq, 0, q, 0, twist, twist)?;
    let m = block_factor(seq, 0, q, 1, twist, twist)?;
    Ok((l, m))
}

/// `(ℒ_q, ℳ_q(k))` as dense `q×q` matrices.
pub fn floquet_blocks(seq: &CoefficientSequence, q: usize, k: f64) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
    let (l, m) = factors(seq, q, k)?;
    Ok((l.to_dense(), m.to_dense()))
}

/// `ℰ_q(k) = ℒ_qℳ_q(k)`.
pub fn floquet_matrix(seq: &CoefficientSequence, q: usize, k: f64) -> Result<DMatrix<C64>> {
    let (l, m) = factors(seq, q, k)?;
    Ok(l.left_multiply(&m.to_dense()))
}

/// The dual `ℰ̃_q(k) = ℳ_q(k)ℒ_q`.
pub fn dual_matrix(seq: &CoefficientSequence, q: usize, k: f64) -> Result<DMatrix<C64>> {
    let (l, m) = factors(seq, q, k)?;
    Ok(m.left_multiply(&l.to_dense()))
}

/// Eigenvalues of `ℰ_q(k)` for any `k`, sorted by angle.
pub fn floquet_eigenvalues(seq: &CoefficientSequence, q: usize, k: f64) -> Result<Vec<C64>> {
    let mut ev = linalg::unitary_eigenvalues(&floquet_matrix(seq, q, k)?);
    ev.sort_by(|a, b| linalg::angle(*a).total_cmp(&linalg::angle(*b)));
    Ok(ev)
}

/// The `q` eigenpairs of `ℰ_q(k)` for `k ∈ (0, π/q)`, sorted by angle.
pub fn band_eigens(seq: &CoefficientSequence, q: usize, k: f64) -> Result<Vec<FloquetEigenpair>> {
    check_periodic(seq, q)?;
    let kmax = PI / q as f64;
    if !(k > 0.0 && k < kmax) {
        return Err(Error::invalid("k", format!("{k} is not strictly inside (0, π/{q})")));
    }
    eigens_at(seq, q, k)
}

fn eigens_at(seq: &CoefficientSequence, q: usize, k: f64) -> Result<Vec<FloquetEigenpair>> {
    let (l, m) = factors(seq, q, k)?;
    let e = l.left_multiply(&m.to_dense());
    let (values, vecs) = linalg::unitary_eigen(&e);

    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| linalg::angle(values[a]).total_cmp(&linalg::angle(values[b])));
    for w in 0..q {
        let (a, b) = (values[order[w]], values[order[(w + 1) % q]]);
        if q > 1 && (a - b).norm() < DEGENERACY_GAP {
            return Err(Error::NearDegenerate { k, gap: (a - b).norm() });
        }
    }

    let mut pairs = Vec::with_capacity(q);
    let mut tmp = vec![C64::new(0.0, 0.0); q];
    for &j in &order {
        let z = values[j] / values[j].norm();
        let col = vecs.column(j);
        let norm = col.norm();
        let u: Vec<C64> = col.iter().map(|x| x / norm).collect();
        let mut v = vec![C64::new(0.0, 0.0); q];
        l.apply_adjoint(&u, &mut v);
        let vn = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= vn);

        let eu = &e * DMatrix::from_column_slice(q, 1, &u);
        let res = (0..q).map(|i| (eu[(i, 0)] - z * u[i]).norm_sqr()).sum::<f64>().sqrt();
        if res > RESIDUAL_TOL {
            return Err(Error::Numerical(format!("eigen-residual {res:e} at k = {k}")));
        }
        // dual check: ℳ_q u = z v
        m.apply(&u, &mut tmp);
        let dual = (0..q).map(|i| (tmp[i] - z * v[i]).norm_sqr()).sum::<f64>().sqrt();
        if dual > RESIDUAL_TOL {
            return Err(Error::Numerical(format!("dual residual {dual:e} at k = {k}")));
        }
        pairs.push(FloquetEigenpair { k, z, u, v });
    }
    Ok(pairs)
}

/// `dz/dk = iqρ_{q−1}·[v̄(−1)u(0) − v̄(0)u(−1)]` with the Floquet extension
/// `u(−1) = e^{−ikq}u(q−1)`, `v(−1) = e^{−ikq}v(q−1)`.
pub fn band_derivative(pair: &FloquetEigenpair, seq: &CoefficientSequence, q: usize) -> Result<C64> {
    check_periodic(seq, q)?;
    if pair.u.len() != q || pair.v.len() != q {
        return Err(Error::invalid("pair", format!("expected vectors of length {q}")));
    }
    let phase = unit(-pair.k * q as f64);
    let u_m1 = phase * pair.u[q - 1];
    let v_m1 = phase * pair.v[q - 1];
    let rho = seq.rho(q as i64 - 1);
    let bracket = v_m1.conj() * pair.u[0] - pair.v[0].conj() * u_m1;
    Ok(C64::new(0.0, q as f64 * rho) * bracket)
}

/// For each pair in `next`, the index of the pair in `prev` with the largest
/// eigenvector overlap `|⟨u_prev, u_next⟩|`, assigned greedily.
pub fn match_branches(prev: &[FloquetEigenpair], next: &[FloquetEigenpair]) -> Vec<usize> {
    let mut cand = Vec::with_capacity(prev.len() * next.len());
    for (i, a) in prev.iter().enumerate() {
        for (j, b) in next.iter().enumerate() {
            let ov: C64 = a.u.iter().zip(&b.u).map(|(x, y)| x.conj() * y).sum();
            cand.push((ov.norm(), i, j));
        }
    }
    cand.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut assign = vec![usize::MAX; next.len()];
    let mut used = vec![false; prev.len()];
    for (_, i, j) in cand {
        if assign[j] == usize::MAX && !used[i] {
            assign[j] = i;
            used[i] = true;
        }
    }
    assign
}

/// One row of a band-structure table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub q: usize,
    pub n: usize,
    pub k: f64,
    pub z: C64,
    pub dz_dk: C64,
}

/// Band functions on `nk` interior points `k_j = (j + ½)·π/(q·nk)`, with
/// labels threaded across `k` by eigenvector overlap.
pub fn band_structure(seq: &CoefficientSequence, q: usize, nk: usize) -> Result<Vec<BandPoint>> {
    check_periodic(seq, q)?;
    if nk == 0 {
        return Err(Error::invalid("nk", "need at least one k point"));
    }
    let step = PI / (q as f64 * nk as f64);
    let ks: Vec<f64> = (0..nk).map(|j| (j as f64 + 0.5) * step).collect();
    let all: Vec<Vec<FloquetEigenpair>> = ks.par_iter().map(|&k| band_eigens(seq, q, k)).collect::<Result<_>>()?;

    let mut labels: Vec<usize> = (0..q).collect();
    let mut out = Vec::with_capacity(nk * q);
    for (j, pairs) in all.iter().enumerate() {
        if j > 0 {
            let m = match_branches(&all[j - 1], pairs);
            labels = m.iter().map(|&i| labels[i]).collect();
        }
        for (p, &n) in pairs.iter().zip(&labels) {
            out.push(BandPoint { q, n, k: p.k, z: p.z, dz_dk: band_derivative(p, seq, q)? });
        }
    }
    out.sort_by(|a, b| a.n.cmp(&b.n).then(a.k.total_cmp(&b.k)));
    Ok(out)
}

/// Both spectrum computations and how far apart they are.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    /// `{e^{iθ} : |tr Φ_q(e^{iθ})| ≤ 2}` with edges bisected.
    pub discriminant: CircleArcSet,
    /// `⋃_k σ(ℰ_q(k))` over the k-grid, consecutive branch points joined.
    pub k_grid: CircleArcSet,
    pub hausdorff: f64,
    pub flagged: bool,
}

const EDGE_TOL: f64 = 1e-13;

/// The band set of a `q`-periodic sequence from the discriminant.
///
/// The θ-grid of `resolution` points is augmented with the eigenvalues of
/// `ℰ_q(0)` and `ℰ_q(π/q)`, which contain every band edge; each cell is
/// classified at its midpoint and every in/out transition is bisected on
/// `|D(θ)| − 2`. The result is cross-checked against the k-grid union of
/// Floquet spectra and rejected when they differ by more than ten θ-cells.
pub fn periodic_spectrum(seq: &CoefficientSequence, q: usize, resolution: usize) -> Result<CircleArcSet> {
    let rep = periodic_spectrum_report(seq, q, resolution, (resolution / 8).max(64))?;
    if rep.flagged {
        return Err(Error::Numerical(format!(
            "discriminant and k-grid spectra disagree by {:e} (allowed {:e})",
            rep.hausdorff,
            10.0 * TAU / resolution as f64
        )));
    }
    Ok(rep.discriminant)
}

pub fn periodic_spectrum_report(seq: &CoefficientSequence, q: usize, resolution: usize, nk: usize) -> Result<SpectrumReport> {
    let discriminant = discriminant_spectrum(seq, q, resolution)?;
    let k_grid = kgrid_spectrum(seq, q, nk)?;
    let hausdorff = discriminant.hausdorff(&k_grid)?;
    let flagged = hausdorff > 10.0 * TAU / resolution as f64;
    Ok(SpectrumReport { discriminant, k_grid, hausdorff, flagged })
}

/// Discriminant method only.
pub fn discriminant_spectrum(seq: &CoefficientSequence, q: usize, resolution: usize) -> Result<CircleArcSet> {
    check_periodic(seq, q)?;
    if resolution < 4 {
        return Err(Error::invalid("resolution", "need at least 4 θ samples"));
    }
    // |D| − 2: ≤ 0 on the bands
    let g = |t: f64| transfer::discriminant_unchecked(seq, q, t).abs() - 2.0;
    // sanity: the trace must be real
    transfer::discriminant(seq, q, 0.1)?;

    let mut breaks: Vec<f64> = transfer::uniform_grid(resolution);
    for k in [0.0, PI / q as f64] {
        breaks.extend(floquet_eigenvalues(seq, q, k)?.into_iter().map(linalg::angle));
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < EDGE_TOL);
    let n = breaks.len();
    let cell = |i: usize| -> (f64, f64) {
        let lo = breaks[i];
        let hi = if i + 1 < n { breaks[i + 1] } else { breaks[0] + TAU };
        (lo, hi)
    };
    let inside: Vec<bool> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (lo, hi) = cell(i);
            g(0.5 * (lo + hi)) <= 0.0
        })
        .collect();

    if inside.iter().all(|&b| b) {
        return Ok(CircleArcSet::full());
    }
    let bisect = |mut a: f64, mut b: f64| -> f64 {
        // g(a) ≤ 0 < g(b) or the reverse; shrink to the sign change
        let fa = g(a) <= 0.0;
        while (b - a).abs() > 1e-13 {
            let m = 0.5 * (a + b);
            if (g(m) <= 0.0) == fa {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    };
    let mid = |i: usize| {
        let (lo, hi) = cell(i);
        0.5 * (lo + hi)
    };

    let mut arcs = Vec::new();
    // walk from a cell that is outside so arcs never straddle the start
    let start = inside.iter().position(|&b| !b).unwrap();
    let mut i = (start + 1) % n;
    let mut steps = 0;
    while steps < n {
        if inside[i] {
            let first = i;
            let mut last = i;
            let mut len = 1;
            while inside[(last + 1) % n] && len < n {
                last = (last + 1) % n;
                len += 1;
            }
            let prev = (first + n - 1) % n;
            let next = (last + 1) % n;
            let unwrap = |t: f64, reference: f64| reference + (t - reference).rem_euclid(TAU);
            let lo_mid = mid(prev);
            let lo = bisect(mid(first), unwrap(lo_mid, mid(first)) - TAU);
            let mut hi = bisect(mid(last), unwrap(mid(next), mid(last)));
            while hi < lo {
                hi += TAU;
            }
            arcs.push((lo, hi));
            steps += len;
            i = next;
        } else {
            steps += 1;
            i = (i + 1) % n;
        }
    }
    CircleArcSet::new(arcs)
}

/// Spectrum from `nk` Floquet matrices at `k_j = j·(π/q)/(nk − 1)`, joining
/// matched branch points of consecutive `k` by the shorter arc.
pub fn kgrid_spectrum(seq: &CoefficientSequence, q: usize, nk: usize) -> Result<CircleArcSet> {
    check_periodic(seq, q)?;
    if nk < 2 {
        return Err(Error::invalid("nk", "need at least two k points"));
    }
    let kmax = PI / q as f64;
    let ks: Vec<f64> = (0..nk).map(|j| kmax * j as f64 / (nk - 1) as f64).collect();
    let all: Vec<(Vec<C64>, DMatrix<C64>)> = ks
        .par_iter()
        .map(|&k| floquet_matrix(seq, q, k).map(|e| linalg::unitary_eigen(&e)))
        .collect::<Result<_>>()?;

    let mut arcs = Vec::new();
    for w in all.windows(2) {
        let (za, ua) = &w[0];
        let (zb, ub) = &w[1];
        let overlaps = ua.adjoint() * ub;
        let mut cand: Vec<(f64, usize, usize)> = Vec::with_capacity(q * q);
        for i in 0..q {
            for j in 0..q {
                cand.push((overlaps[(i, j)].norm(), i, j));
            }
        }
        cand.sort_by(|x, y| y.0.total_cmp(&x.0));
        let mut used_a = vec![false; q];
        let mut used_b = vec![false; q];
        for (_, i, j) in cand {
            if used_a[i] || used_b[j] {
                continue;
            }
            used_a[i] = true;
            used_b[j] = true;
            let (ta, tb) = (linalg::angle(za[i]), linalg::angle(zb[j]));
            let d = (tb - ta).rem_euclid(TAU);
            if d <= PI {
                arcs.push((ta, ta + d));
            } else {
                arcs.push((tb, tb + (TAU - d)));
            }
        }
    }
    CircleArcSet::new(arcs)
}

/// Outcome of the monodromy-norm bound at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Checks `‖Φ_q(z)‖ ≤ 4q/|dz/dk|` at a band-interior `z`.
///
/// The Bloch number is read off the discriminant, `2cos(kq) = tr Φ_q(z)`, and
/// the band through `z` is the eigenvalue of `ℰ_q(k)` closest to `z`.
pub fn monodromy_bound_check(seq: &CoefficientSequence, q: usize, z: C64) -> Result<BoundCheck> {
    check_periodic(seq, q)?;
    let phi = transfer::monodromy(seq, q, z)?;
    let tr = phi.trace();
    if tr.im.abs() > 1e-10 {
        return Err(Error::Numerical(format!("monodromy trace {tr} is not real")));
    }
    let d = tr.re;
    if d.abs() >= 2.0 - 1e-12 {
        return Err(Error::NotInBand { trace: d });
    }
    let k = (d / 2.0).acos() / q as f64;
    let pairs = band_eigens(seq, q, k)?;
    let pair = pairs
        .iter()
        .min_by(|a, b| (a.z - z).norm().total_cmp(&(b.z - z).norm()))
        .expect("q ≥ 2 eigenpairs");
    let miss = (pair.z - z).norm();
    if miss > 1e-8 {
        return Err(Error::Numerical(format!("no Floquet eigenvalue within 1e-8 of z (closest {miss:e})")));
    }
    let dz = band_derivative(pair, seq, q)?;
    let lhs = phi.norm();
    let rhs = 4.0 * q as f64 / dz.norm();
    Ok(BoundCheck { lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-8) })
}
