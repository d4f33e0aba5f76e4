//! Finite unions of closed arcs on the unit circle.
//!
//! Angles are in radians. An arc `[lo, hi]` has `0 ≤ lo < 2π` and
//! `lo ≤ hi ≤ lo + 2π`; an arc may run past `2π`, in which case it wraps
//! through the point `1`. Distances between points of the circle are chordal,
//! `|e^{is} − e^{it}| = 2 sin(|s − t|/2)`.

use std::f64::consts::{PI, TAU};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::operator::{BandedUnitary, Boundary};
use crate::C64;

/// Arcs whose endpoints are closer than this are merged.
pub const ARC_TOL: f64 = 1e-12;

/// A canonical finite union of closed arcs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ArcsJson", into = "ArcsJson")]
pub struct CircleArcSet {
    arcs: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArcsJson {
    arcs: Vec<[f64; 2]>,
}

impl TryFrom<ArcsJson> for CircleArcSet {
    type Error = Error;

    fn try_from(j: ArcsJson) -> Result<Self> {
        CircleArcSet::new(j.arcs.into_iter().map(|a| (a[0], a[1])))
    }
}

impl From<CircleArcSet> for ArcsJson {
    fn from(s: CircleArcSet) -> Self {
        ArcsJson { arcs: s.arcs.iter().map(|&(a, b)| [a, b]).collect() }
    }
}

/// Chordal length of an angular separation `d ∈ [0, π]`.
pub fn chordal(d: f64) -> f64 {
    2.0 * (d.clamp(0.0, PI) / 2.0).sin()
}

/// Angular radius of a chordal ball of radius `eps`.
pub fn angular_radius(eps: f64) -> f64 {
    if eps >= 2.0 {
        PI
    } else {
        2.0 * (eps / 2.0).asin()
    }
}

/// Angular distance from `x` to the arc `[lo, hi]`.
fn arc_distance(x: f64, (lo, hi): (f64, f64)) -> f64 {
    let t = (x - lo).rem_euclid(TAU);
    let w = hi - lo;
    if t <= w {
        0.0
    } else {
        (t - w).min(TAU - t)
    }
}

impl CircleArcSet {
    /// Canonicalizes an arbitrary list of arcs `[lo, hi]` with `hi ≥ lo`.
    pub fn new<I: IntoIterator<Item = (f64, f64)>>(arcs: I) -> Result<Self> {
        let mut pieces = Vec::new();
        for (lo, hi) in arcs {
            if !lo.is_finite() || !hi.is_finite() || hi < lo {
                return Err(Error::invalid("arcs", format!("[{lo}, {hi}] is not an arc")));
            }
            if hi - lo >= TAU - ARC_TOL {
                return Ok(CircleArcSet::full());
            }
            let a = lo.rem_euclid(TAU);
            let b = if a == lo { hi } else { a + (hi - lo) };
            if b > TAU {
                pieces.push((a, TAU));
                pieces.push((0.0, b - TAU));
            } else {
                pieces.push((a, b));
            }
        }
        Ok(CircleArcSet::from_linear(pieces))
    }

    pub fn empty() -> Self {
        CircleArcSet { arcs: Vec::new() }
    }

    pub fn full() -> Self {
        CircleArcSet { arcs: vec![(0.0, TAU)] }
    }

    /// Degenerate arcs at the given angles.
    pub fn points<I: IntoIterator<Item = f64>>(angles: I) -> Self {
        let pieces = angles.into_iter().map(|t| {
            let a = t.rem_euclid(TAU);
            (a, a)
        });
        CircleArcSet::from_linear(pieces.collect())
    }

    /// Degenerate arcs at the arguments of the given points.
    pub fn from_unit_points(zs: &[C64]) -> Self {
        CircleArcSet::points(zs.iter().map(|&z| linalg::angle(z)))
    }

    /// Canonical form from intervals inside `[0, 2π]`.
    fn from_linear(mut pieces: Vec<(f64, f64)>) -> Self {
        pieces.retain(|p| p.1 >= p.0);
        pieces.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pieces.len());
        for (lo, hi) in pieces {
            match merged.last_mut() {
                Some(last) if lo <= last.1 + ARC_TOL => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        if merged.is_empty() {
            return CircleArcSet::empty();
        }
        if merged[0].0 <= ARC_TOL && merged.last().unwrap().1 >= TAU - ARC_TOL {
            if merged.len() == 1 {
                return CircleArcSet::full();
            }
            let first = merged.remove(0);
            let last = merged.last_mut().unwrap();
            last.1 = TAU + first.1;
            if last.1 - last.0 >= TAU - ARC_TOL {
                return CircleArcSet::full();
            }
        }
        CircleArcSet { arcs: merged }
    }

    /// Pieces inside `[0, 2π]`, wrapping arcs split at `2π`.
    fn linear(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.arcs.len() + 1);
        for &(lo, hi) in &self.arcs {
            if hi > TAU {
                out.push((0.0, hi - TAU));
                out.push((lo, TAU));
            } else {
                out.push((lo, hi));
            }
        }
        out.sort_by(|x, y| x.0.total_cmp(&y.0));
        out
    }

    pub fn arcs(&self) -> &[(f64, f64)] {
        &self.arcs
    }

    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.arcs.len() == 1 && self.arcs[0].1 - self.arcs[0].0 >= TAU - ARC_TOL
    }

    pub fn measure(&self) -> f64 {
        self.arcs.iter().map(|(lo, hi)| hi - lo).sum()
    }

    /// `n` angles spread evenly by arc length, at the midpoints of `n` equal
    /// slices of the set. A set of measure zero yields its points.
    pub fn sample(&self, n: usize) -> Vec<f64> {
        let total = self.measure();
        if total <= 0.0 {
            return self.arcs.iter().map(|a| a.0).collect();
        }
        let mut out = Vec::with_capacity(n);
        let (mut a, mut before) = (0, 0.0);
        for j in 0..n {
            let s = (j as f64 + 0.5) / n as f64 * total;
            while a + 1 < self.arcs.len() && s > before + self.arcs[a].1 - self.arcs[a].0 {
                before += self.arcs[a].1 - self.arcs[a].0;
                a += 1;
            }
            let (lo, hi) = self.arcs[a];
            out.push((lo + (s - before).min(hi - lo)).rem_euclid(TAU));
        }
        out
    }

    pub fn contains(&self, theta: f64) -> bool {
        self.arcs.iter().any(|&a| arc_distance(theta, a) == 0.0)
    }

    /// Angular distance from `theta` to the set (`+∞` for the empty set).
    pub fn angular_distance(&self, theta: f64) -> f64 {
        self.arcs.iter().map(|&a| arc_distance(theta, a)).fold(f64::INFINITY, f64::min)
    }

    /// Chordal distance from `e^{iθ}` to the set.
    pub fn distance(&self, theta: f64) -> f64 {
        chordal(self.angular_distance(theta))
    }

    pub fn union(&self, other: &CircleArcSet) -> CircleArcSet {
        let mut pieces = self.linear();
        pieces.extend(other.linear());
        CircleArcSet::from_linear(pieces)
    }

    pub fn intersection(&self, other: &CircleArcSet) -> CircleArcSet {
        let (a, b) = (self.linear(), other.linear());
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            let lo = a[i].0.max(b[j].0);
            let hi = a[i].1.min(b[j].1);
            if lo <= hi {
                out.push((lo, hi));
            }
            if a[i].1 < b[j].1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        CircleArcSet::from_linear(out)
    }

    /// Closure of `self ∖ other`.
    pub fn difference(&self, other: &CircleArcSet) -> CircleArcSet {
        let cut = other.linear();
        let mut out = Vec::new();
        for (lo, hi) in self.linear() {
            let mut start = lo;
            for &(c0, c1) in &cut {
                if c1 < start || c0 > hi {
                    continue;
                }
                if c0 > start {
                    out.push((start, c0));
                }
                start = start.max(c1);
                if start >= hi {
                    break;
                }
            }
            if start < hi {
                out.push((start, hi));
            }
        }
        // slivers left by endpoint roundoff are not part of the difference
        out.retain(|p| p.1 - p.0 > ARC_TOL);
        CircleArcSet::from_linear(out)
    }

    /// `Leb(self ∖ other)`.
    pub fn diff_measure(&self, other: &CircleArcSet) -> f64 {
        self.difference(other).measure()
    }

    /// Gaps between consecutive arcs, as arcs.
    pub fn complement(&self) -> CircleArcSet {
        CircleArcSet::full().difference(self)
    }

    /// `{z : dist(z, self) ≤ ε}` in the chordal metric.
    pub fn eps_neighborhood(&self, eps: f64) -> Result<CircleArcSet> {
        if !(eps > 0.0) {
            return Err(Error::invalid("eps", format!("{eps} must be positive")));
        }
        if self.is_empty() {
            return Ok(CircleArcSet::empty());
        }
        if eps >= 2.0 {
            return Ok(CircleArcSet::full());
        }
        let d = angular_radius(eps);
        CircleArcSet::new(self.arcs.iter().map(|&(lo, hi)| (lo - d, (hi + d).min(lo - d + TAU))))
    }

    /// Preimage under `z ↦ z²`.
    pub fn preimage_double(&self) -> CircleArcSet {
        if self.is_full() {
            return CircleArcSet::full();
        }
        let mut pieces = Vec::with_capacity(2 * self.arcs.len() + 2);
        for &(lo, hi) in &self.arcs {
            pieces.push((lo / 2.0, hi / 2.0));
            pieces.push((lo / 2.0 + PI, hi / 2.0 + PI));
        }
        CircleArcSet::new(pieces).expect("halved arcs are valid")
    }

    /// Rotation by `phi`.
    pub fn rotate(&self, phi: f64) -> CircleArcSet {
        if self.is_full() {
            return self.clone();
        }
        CircleArcSet::new(self.arcs.iter().map(|&(lo, hi)| (lo + phi, hi + phi))).expect("rotated arcs are valid")
    }

    /// `sup_{x ∈ self} dist(x, other)` in angular units.
    fn directed_angular(&self, other: &CircleArcSet) -> f64 {
        if other.is_full() {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for &(lo, hi) in &self.arcs {
            worst = worst.max(other.angular_distance(lo)).max(other.angular_distance(hi));
        }
        // inside an arc of `self` the distance to `other` peaks at gap midpoints
        let n = other.arcs.len();
        for k in 0..n {
            let end = other.arcs[k].1;
            let next = if k + 1 < n { other.arcs[k + 1].0 } else { other.arcs[0].0 + TAU };
            let mid = 0.5 * (end + next);
            if self.contains(mid) {
                worst = worst.max(other.angular_distance(mid));
            }
        }
        worst
    }

    /// Chordal Hausdorff distance. Errors when either set is empty.
    pub fn hausdorff(&self, other: &CircleArcSet) -> Result<f64> {
        if self.is_empty() || other.is_empty() {
            return Err(Error::invalid("sets", "Hausdorff distance needs two nonempty sets"));
        }
        let d = self.directed_angular(other).max(other.directed_angular(self));
        Ok(chordal(d))
    }

    /// CSV with header `lo,hi`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "lo,hi")?;
        for &(lo, hi) in &self.arcs {
            writeln!(w, "{lo:.16e},{hi:.16e}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut arcs = Vec::new();
        for (k, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::invalid("csv", e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || (k == 0 && line.starts_with("lo")) {
                continue;
            }
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|v| v.trim().parse().ok())
                    .ok_or_else(|| Error::invalid("csv", format!("line {}: expected `lo,hi`", k + 1)))
            };
            let mut parts = line.split(',');
            arcs.push((parse(parts.next())?, parse(parts.next())?));
        }
        CircleArcSet::new(arcs)
    }
}

/// `⋂_{m ≥ tail_start} ⋃_{n ≥ m} sets[n]` over the finite list.
///
/// The unions shrink as `m` grows, so over a finite list this is the last set
/// whenever `tail_start` is in range.
pub fn limsup_surrogate(sets: &[CircleArcSet], tail_start: usize) -> Result<CircleArcSet> {
    if tail_start >= sets.len() {
        return Err(Error::invalid("tail_start", format!("{tail_start} is past the end of {} sets", sets.len())));
    }
    let mut tails = vec![CircleArcSet::empty(); sets.len() + 1];
    for n in (tail_start..sets.len()).rev() {
        tails[n] = tails[n + 1].union(&sets[n]);
    }
    let mut acc = CircleArcSet::full();
    for tail in &tails[tail_start..sets.len()] {
        acc = acc.intersection(tail);
    }
    Ok(acc)
}

/// Outcome of comparing `d_H(σ(U), σ(V))` against `‖U − V‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralVariation {
    pub dh: f64,
    pub norm: f64,
    pub holds: bool,
}

/// Checks `d_H(σ(U), σ(V)) ≤ ‖U − V‖` on two unitary windows.
pub fn spectral_variation_check(u: &BandedUnitary, v: &BandedUnitary) -> Result<SpectralVariation> {
    for w in [u, v] {
        if w.boundary() == Boundary::RawCut {
            return Err(Error::invalid("boundary", "raw_cut windows are not unitary"));
        }
        let r = w.unitarity_residual();
        if r > 1e-10 {
            return Err(Error::NotUnitary { residual: r });
        }
    }
    let norm = u.norm_distance(v)?;
    let su = CircleArcSet::from_unit_points(&u.eigenvalues());
    let sv = CircleArcSet::from_unit_points(&v.eigenvalues());
    let dh = su.hausdorff(&sv)?;
    Ok(SpectralVariation { dh, norm, holds: dh <= norm * (1.0 + 1e-10) })
}
