//! ϴ blocks, the `ℰ = ℒℳ` factorization and finite CMV windows.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::coefficients::{rho_of, CoefficientSequence};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat2C, ONE, ZERO};
use crate::C64;

/// How a finite window is closed off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Indices taken modulo the window size.
    PeriodicWrap,
    /// Half-line restriction to `ℤ₊` with `α_{−1} = −1`; the far edge is
    /// closed the same way so the window stays unitary.
    HalfLineLeft,
    /// Plain restriction of the two-sided matrix. Not unitary.
    RawCut,
}

/// The 2×2 unitary `[[ᾱ, ρ], [ρ, −α]]`.
pub fn theta(alpha: C64) -> Result<Mat2C> {
    if !(alpha.norm() < 1.0) {
        return Err(Error::OutsideDisk { value: alpha });
    }
    Ok(theta_unchecked(alpha))
}

pub(crate) fn theta_unchecked(alpha: C64) -> Mat2C {
    let rho = C64::new(rho_of(alpha), 0.0);
    Mat2C::new(alpha.conj(), rho, rho, -alpha)
}

/// How a block factor treats the block that straddles a window edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Edge {
    /// Couple the last site to the first; the off-diagonal entries pick up
    /// `twist` at `(dim−1, 0)` and its conjugate at `(0, dim−1)`.
    Wrap(C64),
    /// Replace the straddling coefficient by a unimodular value.
    Closed(C64),
    /// Keep only the diagonal entry of the straddling block.
    Cut,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Piece {
    /// A 2×2 block acting on local coordinates `(i, j)`.
    Pair { i: usize, j: usize, m: Mat2C },
    Single { i: usize, v: C64 },
}

/// A direct sum of ϴ blocks on a window, kept in factored form.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BlockFactor {
    pub dim: usize,
    pub pieces: Vec<Piece>,
}

impl BlockFactor {
    /// `y = F x`.
    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        for p in &self.pieces {
            match *p {
                Piece::Pair { i, j, m } => {
                    let (xi, xj) = (x[i], x[j]);
                    y[i] = m.a * xi + m.b * xj;
                    y[j] = m.c * xi + m.d * xj;
                }
                Piece::Single { i, v } => y[i] = v * x[i],
            }
        }
    }

    /// `y = F* x`.
    pub fn apply_adjoint(&self, x: &[C64], y: &mut [C64]) {
        for p in &self.pieces {
            match *p {
                Piece::Pair { i, j, m } => {
                    let (xi, xj) = (x[i], x[j]);
                    y[i] = m.a.conj() * xi + m.c.conj() * xj;
                    y[j] = m.b.conj() * xi + m.d.conj() * xj;
                }
                Piece::Single { i, v } => y[i] = v.conj() * x[i],
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut out = DMatrix::from_element(self.dim, self.dim, ZERO);
        for p in &self.pieces {
            match *p {
                Piece::Pair { i, j, m } => {
                    out[(i, i)] = m.a;
                    out[(i, j)] = m.b;
                    out[(j, i)] = m.c;
                    out[(j, j)] = m.d;
                }
                Piece::Single { i, v } => out[(i, i)] = v,
            }
        }
        out
    }

    /// `self · rhs` without a dense multiply: each row of the product mixes
    /// at most two rows of `rhs`.
    pub fn left_multiply(&self, rhs: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::from_element(self.dim, rhs.ncols(), ZERO);
        for p in &self.pieces {
            match *p {
                Piece::Pair { i, j, m } => {
                    for col in 0..rhs.ncols() {
                        let (ri, rj) = (rhs[(i, col)], rhs[(j, col)]);
                        out[(i, col)] = m.a * ri + m.b * rj;
                        out[(j, col)] = m.c * ri + m.d * rj;
                    }
                }
                Piece::Single { i, v } => {
                    for col in 0..rhs.ncols() {
                        out[(i, col)] = v * rhs[(i, col)];
                    }
                }
            }
        }
        out
    }
}

/// Blocks `ϴ(α_n)` on `(n, n+1)` for every `n ≡ parity (mod 2)` meeting the
/// window `[lo, lo+dim)`.
pub(crate) fn block_factor(
    seq: &CoefficientSequence,
    lo: i64,
    dim: usize,
    parity: i64,
    left: Edge,
    right: Edge,
) -> Result<BlockFactor> {
    if dim < 2 {
        return Err(Error::invalid("dim", "a window needs at least two sites"));
    }
    let wraps = matches!(left, Edge::Wrap(_)) || matches!(right, Edge::Wrap(_));
    if wraps && (dim % 2 != 0 || left != right) {
        return Err(Error::invalid("boundary", "wrapping needs an even window with the same twist on both edges"));
    }
    for edge in [left, right] {
        if let Edge::Closed(c) | Edge::Wrap(c) = edge {
            if (c.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::invalid("boundary", format!("edge value {c} is not unimodular")));
            }
        }
    }
    let hi = lo + dim as i64;
    let mut pieces = Vec::with_capacity(dim / 2 + 2);
    let first = if (lo - 1).rem_euclid(2) == parity.rem_euclid(2) { lo - 1 } else { lo };
    let mut n = first;
    while n < hi {
        let i = n - lo;
        if n == lo - 1 {
            match left {
                Edge::Wrap(_) => {}
                Edge::Closed(c) => pieces.push(Piece::Single { i: 0, v: -c }),
                Edge::Cut => pieces.push(Piece::Single { i: 0, v: -seq.eval(n) }),
            }
        } else if n == hi - 1 {
            let last = dim - 1;
            match right {
                Edge::Wrap(twist) => {
                    let mut m = theta_unchecked(seq.eval(n));
                    m.b *= twist;
                    m.c *= twist.conj();
                    pieces.push(Piece::Pair { i: last, j: 0, m });
                }
                Edge::Closed(c) => pieces.push(Piece::Single { i: last, v: c.conj() }),
                Edge::Cut => pieces.push(Piece::Single { i: last, v: seq.eval(n).conj() }),
            }
        } else {
            let i = i as usize;
            pieces.push(Piece::Pair { i, j: i + 1, m: theta_unchecked(seq.eval(n)) });
        }
        n += 2;
    }
    Ok(BlockFactor { dim, pieces })
}

/// A finite window of a pentadiagonal unitary, indexed from `offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedUnitary {
    offset: i64,
    boundary: Boundary,
    entries: DMatrix<C64>,
}

impl BandedUnitary {
    pub(crate) fn new(offset: i64, boundary: Boundary, entries: DMatrix<C64>) -> Self {
        debug_assert!(entries.is_square());
        BandedUnitary { offset, boundary, entries }
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.entries
    }

    /// Entry at global indices `(row, col)`, or `None` outside the window.
    pub fn get(&self, row: i64, col: i64) -> Option<C64> {
        let (r, c) = (row - self.offset, col - self.offset);
        let n = self.dim() as i64;
        if (0..n).contains(&r) && (0..n).contains(&c) {
            Some(self.entries[(r as usize, c as usize)])
        } else {
            None
        }
    }

    /// `max |(U U^*) − I|` entrywise.
    pub fn unitarity_residual(&self) -> f64 {
        linalg::unitarity_residual(&self.entries)
    }

    /// Largest entry outside the pentadiagonal band. Under periodic wrap the
    /// band distance is measured cyclically.
    pub fn band_violation(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let d = i.abs_diff(j);
                let d = if self.boundary == Boundary::PeriodicWrap { d.min(n - d) } else { d };
                if d > 2 {
                    worst = worst.max(self.entries[(i, j)].norm());
                }
            }
        }
        worst
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        linalg::unitary_eigenvalues(&self.entries)
    }

    /// Spectral norm of `self − other`.
    pub fn norm_distance(&self, other: &BandedUnitary) -> Result<f64> {
        if self.dim() != other.dim() || self.offset != other.offset {
            return Err(Error::WindowMismatch(format!(
                "[{}, +{}) vs [{}, +{})",
                self.offset,
                self.dim(),
                other.offset,
                other.dim()
            )));
        }
        Ok(linalg::spectral_norm(&(&self.entries - &other.entries)))
    }

    /// Nonzero entries as `(i, j, value)` in row-major order, local indices.
    pub fn nonzeros(&self) -> Vec<(usize, usize, C64)> {
        let n = self.dim();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = self.entries[(i, j)];
                if v != ZERO {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> MatrixJson {
        let n = self.dim();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let v = self.entries[(i, j)];
                entries.push([v.re, v.im]);
            }
        }
        MatrixJson { offset: self.offset, dim: n, boundary: self.boundary, entries }
    }

    pub fn from_json(m: &MatrixJson) -> Result<Self> {
        if m.dim == 0 || m.entries.len() != m.dim * m.dim {
            return Err(Error::invalid("entries", format!("expected {} entries, found {}", m.dim * m.dim, m.entries.len())));
        }
        let entries = DMatrix::from_row_iterator(m.dim, m.dim, m.entries.iter().map(|e| C64::new(e[0], e[1])));
        Ok(BandedUnitary::new(m.offset, m.boundary, entries))
    }

    /// CSV with header `i,j,re,im`, one line per nonzero entry.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "i,j,re,im")?;
        for (i, j, v) in self.nonzeros() {
            writeln!(w, "{i},{j},{:.16e},{:.16e}", v.re, v.im)?;
        }
        Ok(())
    }
}

/// Serialized form of a [`BandedUnitary`]; `entries` are row-major `[re, im]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub offset: i64,
    pub dim: usize,
    pub boundary: Boundary,
    pub entries: Vec<[f64; 2]>,
}

fn check_window(offset: i64, dim: usize, boundary: Boundary) -> Result<(Edge, Edge)> {
    if offset.rem_euclid(2) != 0 {
        return Err(Error::NotEven { name: "offset", value: offset });
    }
    if dim == 0 || dim % 2 != 0 {
        return Err(Error::NotEven { name: "dim", value: dim as i64 });
    }
    match boundary {
        Boundary::PeriodicWrap => Ok((Edge::Wrap(ONE), Edge::Wrap(ONE))),
        Boundary::HalfLineLeft => {
            if offset != 0 {
                return Err(Error::invalid("offset", "half-line windows start at 0"));
            }
            Ok((Edge::Closed(-ONE), Edge::Closed(-ONE)))
        }
        Boundary::RawCut => Err(Error::invalid("boundary", "ℒ and ℳ are only defined blockwise; raw_cut is not allowed")),
    }
}

pub(crate) fn factors(
    seq: &CoefficientSequence,
    offset: i64,
    dim: usize,
    boundary: Boundary,
) -> Result<(BlockFactor, BlockFactor)> {
    let (left, right) = check_window(offset, dim, boundary)?;
    let l = block_factor(seq, offset, dim, 0, left, right)?;
    let m = block_factor(seq, offset, dim, 1, left, right)?;
    Ok((l, m))
}

/// The factors `ℒ = ⊕ϴ(α_{2j})` and `ℳ = ⊕ϴ(α_{2j+1})` on a window.
pub fn assemble_lm(
    seq: &CoefficientSequence,
    offset: i64,
    dim: usize,
    boundary: Boundary,
) -> Result<(BandedUnitary, BandedUnitary)> {
    let (l, m) = factors(seq, offset, dim, boundary)?;
    Ok((
        BandedUnitary::new(offset, boundary, l.to_dense()),
        BandedUnitary::new(offset, boundary, m.to_dense()),
    ))
}

/// The CMV window `ℰ = ℒℳ`.
pub fn assemble_cmv(seq: &CoefficientSequence, offset: i64, dim: usize, boundary: Boundary) -> Result<BandedUnitary> {
    let (l, m) = factors(seq, offset, dim, boundary)?;
    Ok(BandedUnitary::new(offset, boundary, l.left_multiply(&m.to_dense())))
}

/// The two-sided `ℰ` restricted to `[offset, offset+dim)` with no boundary
/// correction. Any parity of `offset` and `dim` is accepted.
pub fn restrict_cmv(seq: &CoefficientSequence, offset: i64, dim: usize) -> Result<BandedUnitary> {
    if dim == 0 {
        return Err(Error::invalid("dim", "must be positive"));
    }
    let pad = 2usize;
    let lo = offset - pad as i64;
    let wide = dim + 2 * pad;
    let l = block_factor(seq, lo, wide, 0, Edge::Cut, Edge::Cut)?;
    let m = block_factor(seq, lo, wide, 1, Edge::Cut, Edge::Cut)?;
    let full = l.left_multiply(&m.to_dense());
    let inner = full.view((pad, pad), (dim, dim)).into_owned();
    Ok(BandedUnitary::new(offset, Boundary::RawCut, inner))
}

/// The sieved sequence `α̂_{2j} = 0`, `α̂_{2j−1} = α_j`.
pub fn sieve(seq: &CoefficientSequence) -> CoefficientSequence {
    seq.sieve()
}

/// Residuals of the mod-4 splitting of `ℰ̂²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SieveSquareReport {
    /// Largest entry of `ℰ̂²` mapping `𝒳` into `𝒴`.
    pub x_invariant_residual: f64,
    /// Largest entry of `ℰ̂²` mapping `𝒴` into `𝒳`.
    pub y_invariant_residual: f64,
    /// Entrywise mismatch of `ℰ̂²|_𝒳` against `ℰᵀ` and of `ℰ̂²|_𝒴` against `ℰ`.
    pub similarity_residual: f64,
}

fn in_x(i: usize) -> bool {
    i % 4 == 0 || i % 4 == 3
}

/// Site of `ℰ` represented by a sieved index: `𝒳 ∋ 4m−1, 4m ↦ 2m, 2m+1`
/// and `𝒴 ∋ 4m−2, 4m+1 ↦ 2m, 2m+1`.
fn sieve_site(i: usize) -> usize {
    match i % 4 {
        0 | 2 => i / 2 + 1,
        _ => (i + 1) / 2,
    }
}

/// Builds `ℰ̂²` for the sieved sequence on `[0, dim)` with periodic wrap and
/// checks that it splits over `𝒳 = {0, 3 mod 4}` and `𝒴 = {1, 2 mod 4}` into
/// copies of `ℰ` on `[0, dim/2)`: transposed on `𝒳`, as is on `𝒴`.
pub fn verify_sieve_square(seq: &CoefficientSequence, dim: usize) -> Result<SieveSquareReport> {
    if dim == 0 || dim % 4 != 0 {
        return Err(Error::invalid("dim", format!("{dim} is not a positive multiple of 4")));
    }
    let half = dim / 2;
    if !seq.is_periodic_with(half) {
        return Err(Error::PeriodMismatch { period: seq.period().unwrap_or(0), q: half });
    }
    let sieved = seq.sieve();
    let e_hat = assemble_cmv(&sieved, 0, dim, Boundary::PeriodicWrap)?.into_matrix();
    let sq = &e_hat * &e_hat;
    let e = assemble_cmv(seq, 0, half, Boundary::PeriodicWrap)?.into_matrix();

    let mut x_leak = 0.0f64;
    let mut y_leak = 0.0f64;
    let mut sim = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            let v = sq[(i, j)];
            match (in_x(i), in_x(j)) {
                (false, true) => x_leak = x_leak.max(v.norm()),
                (true, false) => y_leak = y_leak.max(v.norm()),
                (true, true) => {
                    let (a, b) = (sieve_site(i) % half, sieve_site(j) % half);
                    sim = sim.max((v - e[(b, a)]).norm());
                }
                (false, false) => {
                    let (a, b) = (sieve_site(i) % half, sieve_site(j) % half);
                    sim = sim.max((v - e[(a, b)]).norm());
                }
            }
        }
    }
    Ok(SieveSquareReport { x_invariant_residual: x_leak, y_invariant_residual: y_leak, similarity_residual: sim })
}

/// Spectral norm of `ℰ − ℰ′` on a common window starting at 0.
///
/// With periodic wrap and two periodic sequences the window must hold a whole
/// number of common periods; the result is then the exact norm on `ℓ²(ℤ)`.
pub fn norm_diff(seq1: &CoefficientSequence, seq2: &CoefficientSequence, dim: usize, boundary: Boundary) -> Result<f64> {
    if boundary == Boundary::PeriodicWrap {
        if let (Some(p1), Some(p2)) = (seq1.period(), seq2.period()) {
            let common = lcm(p1, p2);
            if dim % common != 0 {
                return Err(Error::invalid(
                    "dim",
                    format!("window {dim} is not a multiple of the common period {common}"),
                ));
            }
        }
    }
    let a = assemble_cmv(seq1, 0, dim, boundary)?;
    let b = assemble_cmv(seq2, 0, dim, boundary)?;
    a.norm_distance(&b)
}

/// A bound `C(r)` with `‖ℰ − ℰ′‖ ≤ C(r)·‖α − α′‖_∞` whenever both sequences
/// stay in the disk of radius `r`.
///
/// Each ϴ block moves by at most `√2·|a − b| / √(1 − r²)` in norm, and each
/// of `ℒ`, `ℳ` contributes once.
pub fn cmv_lipschitz_constant(r: f64) -> f64 {
    2.0 * std::f64::consts::SQRT_2 / (1.0 - r * r).sqrt()
}

fn lcm(a: usize, b: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}
