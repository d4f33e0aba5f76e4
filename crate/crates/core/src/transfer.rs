//! Transfer cocycles: Szegő matrices, Gesztesy–Zinchenko steps, monodromies,
//! Lyapunov exponents and the estimator for their zero set `𝒵`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{rho_of, CoefficientSequence};
use crate::error::{Error, Result};
use crate::linalg::{unit, Mat2C};
use crate::spectral_sets::CircleArcSet;
use crate::C64;

/// Default rescaling cadence of [`lyapunov`].
pub const SCALE_EVERY: usize = 16;

const UNIT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Szego,
    GzEven,
    GzOdd,
}

/// One step of a transfer cocycle, tagged with where it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CocycleStep {
    pub kind: StepKind,
    pub matrix: Mat2C,
    pub z: C64,
    pub site: i64,
}

impl CocycleStep {
    pub fn szego(seq: &CoefficientSequence, site: i64, z: C64) -> Result<Self> {
        Ok(CocycleStep { kind: StepKind::Szego, matrix: szego(seq.eval(site), z)?, z, site })
    }

    pub fn gz(seq: &CoefficientSequence, site: i64, z: C64) -> Result<Self> {
        let kind = if site.rem_euclid(2) == 0 { StepKind::GzEven } else { StepKind::GzOdd };
        Ok(CocycleStep { kind, matrix: gz_step(seq, site, z)?, z, site })
    }
}

fn check_z(z: C64) -> Result<()> {
    if z.norm() == 0.0 || !z.is_finite() {
        Err(Error::ZeroSpectralParameter)
    } else {
        Ok(())
    }
}

fn check_unit(z: C64) -> Result<()> {
    check_z(z)?;
    if (z.norm() - 1.0).abs() > UNIT_TOL {
        return Err(Error::invalid("z", format!("|z| = {} is not 1", z.norm())));
    }
    Ok(())
}

/// Szegő matrix `S(α, z) = ρ⁻¹·[[z, −ᾱ], [−zα, 1]]`.
pub fn szego(alpha: C64, z: C64) -> Result<Mat2C> {
    if !(alpha.norm() < 1.0) {
        return Err(Error::OutsideDisk { value: alpha });
    }
    check_z(z)?;
    Ok(szego_unchecked(alpha, z))
}

fn szego_unchecked(alpha: C64, z: C64) -> Mat2C {
    let r = 1.0 / rho_of(alpha);
    Mat2C::new(z * r, -alpha.conj() * r, -z * alpha * r, C64::new(r, 0.0))
}

/// Gesztesy–Zinchenko step `Y(n, z)`: `ρ⁻¹·[[−α, 1], [1, −ᾱ]]` for even `n`,
/// `ρ⁻¹·[[−ᾱ, z], [z⁻¹, −α]]` for odd `n`.
pub fn gz_step(seq: &CoefficientSequence, n: i64, z: C64) -> Result<Mat2C> {
    check_z(z)?;
    Ok(gz_unchecked(seq.eval(n), n, z))
}

fn gz_unchecked(alpha: C64, n: i64, z: C64) -> Mat2C {
    let r = C64::new(1.0 / rho_of(alpha), 0.0);
    let one = C64::new(1.0, 0.0);
    if n.rem_euclid(2) == 0 {
        Mat2C::new(-alpha, one, one, -alpha.conj()).scale(r)
    } else {
        Mat2C::new(-alpha.conj(), z, z.inv(), -alpha).scale(r)
    }
}

/// The inverse relation for an odd step: `ρ⁻¹·[[α, z], [z⁻¹, ᾱ]]` takes the
/// solution at `n` back to `n − 1`.
pub fn gz_odd_back_step(seq: &CoefficientSequence, n: i64, z: C64) -> Result<Mat2C> {
    check_z(z)?;
    if n.rem_euclid(2) == 0 {
        return Err(Error::invalid("n", "the back step is defined for odd sites"));
    }
    let alpha = seq.eval(n);
    let r = C64::new(1.0 / rho_of(alpha), 0.0);
    Ok(Mat2C::new(alpha, z, z.inv(), alpha.conj()).scale(r))
}

/// `Φ_q(z) = Y(q−1, z)⋯Y(0, z)`.
pub fn monodromy(seq: &CoefficientSequence, q: usize, z: C64) -> Result<Mat2C> {
    if q == 0 || q % 2 != 0 {
        return Err(Error::NotEven { name: "q", value: q as i64 });
    }
    check_unit(z)?;
    Ok(monodromy_unchecked(seq, q, z))
}

pub(crate) fn monodromy_unchecked(seq: &CoefficientSequence, q: usize, z: C64) -> Mat2C {
    (0..q as i64).fold(Mat2C::identity(), |acc, n| gz_unchecked(seq.eval(n), n, z) * acc)
}

/// The discriminant `D(θ) = tr Φ_q(e^{iθ})`, real by construction.
pub fn discriminant(seq: &CoefficientSequence, q: usize, theta: f64) -> Result<f64> {
    let tr = monodromy(seq, q, unit(theta))?.trace();
    if tr.im.abs() > 1e-10 * tr.norm().max(1.0) {
        return Err(Error::Numerical(format!("monodromy trace {tr} is not real at θ = {theta}")));
    }
    Ok(tr.re)
}

pub(crate) fn discriminant_unchecked(seq: &CoefficientSequence, q: usize, theta: f64) -> f64 {
    monodromy_unchecked(seq, q, unit(theta)).trace().re
}

/// Lyapunov exponent at `z ∈ ∂𝔻`.
///
/// Periodic sequences use the exact value `p⁻¹·log spr(S(α_{p−1}, z)⋯S(α_0, z))`;
/// otherwise this is [`lyapunov_orbit`].
pub fn lyapunov(seq: &CoefficientSequence, z: C64, n_steps: usize, scale_every: usize) -> Result<f64> {
    check_unit(z)?;
    if n_steps == 0 {
        return Err(Error::invalid("N", "at least one step is required"));
    }
    match seq.period() {
        Some(p) => Ok(lyapunov_periodic(seq, p, z)),
        None => lyapunov_orbit(seq, z, n_steps, scale_every),
    }
}

fn lyapunov_periodic(seq: &CoefficientSequence, p: usize, z: C64) -> f64 {
    let prod = (0..p as i64).fold(Mat2C::identity(), |acc, n| szego_unchecked(seq.eval(n), z) * acc);
    (prod.spectral_radius().ln() / p as f64).max(0.0)
}

/// Birkhoff average `N⁻¹·log‖S(α_{N−1}, z)⋯S(α_0, z)‖` along the orbit,
/// rescaling the running product by its largest entry every `scale_every`
/// steps.
pub fn lyapunov_orbit(seq: &CoefficientSequence, z: C64, n_steps: usize, scale_every: usize) -> Result<f64> {
    check_unit(z)?;
    if n_steps == 0 {
        return Err(Error::invalid("N", "at least one step is required"));
    }
    if scale_every == 0 {
        return Err(Error::invalid("scale_every", "must be positive"));
    }
    let mut prod = Mat2C::identity();
    let mut log_scale = 0.0;
    for n in 0..n_steps {
        prod = szego_unchecked(seq.eval(n as i64), z) * prod;
        if (n + 1) % scale_every == 0 {
            let s = prod.max_abs();
            prod = prod.scale(C64::new(1.0 / s, 0.0));
            log_scale += s.ln();
        }
    }
    Ok((log_scale + prod.norm().ln()) / n_steps as f64)
}

/// Output of [`estimate_z`].
#[derive(Debug, Clone, PartialEq)]
pub struct ZEstimate {
    pub set: CircleArcSet,
    /// `(θ, L(e^{iθ}))` for every grid point.
    pub samples: Vec<(f64, f64)>,
    pub warnings: Vec<String>,
}

/// Thresholds the Lyapunov exponent on a sorted angle grid: consecutive grid
/// points with `L < eps` span an arc, isolated ones give a point. The grid is
/// treated as closing up around the circle when its last gap is no wider than
/// its widest interior gap.
pub fn estimate_z(seq: &CoefficientSequence, grid: &[f64], n_steps: usize, eps: f64) -> Result<ZEstimate> {
    if !(eps > 0.0) {
        return Err(Error::invalid("eps", format!("threshold {eps} must be positive")));
    }
    if grid.is_empty() {
        return Err(Error::invalid("grid", "empty grid"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.last().unwrap() - grid[0] >= std::f64::consts::TAU {
        return Err(Error::invalid("grid", "angles must be strictly increasing within one turn"));
    }
    let values: Vec<f64> = grid
        .par_iter()
        .map(|&t| lyapunov(seq, unit(t), n_steps, SCALE_EVERY))
        .collect::<Result<_>>()?;

    let mut warnings = Vec::new();
    for (&t, &l) in grid.iter().zip(&values) {
        if l < -eps / 10.0 {
            warnings.push(format!("negative Lyapunov estimate {l:e} at θ = {t}; N may be too small"));
        }
    }

    let n = grid.len();
    let below: Vec<bool> = values.iter().map(|&l| l < eps).collect();
    let widest = grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let closing = grid[0] + std::f64::consts::TAU - grid[n - 1];
    let cyclic = n > 1 && closing <= widest * (1.0 + 1e-9);

    let mut arcs = Vec::new();
    for i in 0..n {
        if !below[i] {
            continue;
        }
        let mut joined = false;
        if i + 1 < n && below[i + 1] {
            arcs.push((grid[i], grid[i + 1]));
            joined = true;
        } else if i + 1 == n && cyclic && below[0] {
            arcs.push((grid[i], grid[0] + std::f64::consts::TAU));
            joined = true;
        }
        let prev_joined = if i > 0 { below[i - 1] } else { cyclic && below[n - 1] };
        if !joined && !prev_joined {
            arcs.push((grid[i], grid[i]));
        }
    }
    let set = CircleArcSet::new(arcs)?;
    Ok(ZEstimate { set, samples: grid.iter().copied().zip(values).collect(), warnings })
}

/// `n` equally spaced angles `2πj/n`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| std::f64::consts::TAU * j as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn szego_examples() {
        let z = unit(0.7);
        let s = szego(c(0.0, 0.0), z).unwrap();
        assert!(s.max_diff(&Mat2C::new(z, c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0))) < 1e-16);
        let a = c(0.3, -0.5);
        assert!((szego(a, z).unwrap().det().norm() - 1.0).abs() < 1e-14);
        let lhs = szego(a, z).unwrap() * szego(c(0.0, 0.0), z).unwrap();
        assert!(lhs.max_diff(&szego(a, z * z).unwrap()) < 1e-14);
        assert!(szego(c(1.0, 0.0), z).is_err());
        assert!(matches!(szego(a, c(0.0, 0.0)), Err(Error::ZeroSpectralParameter)));
    }

    #[test]
    fn gz_free_steps() {
        let free = CoefficientSequence::free();
        let z = unit(1.3);
        let even = gz_step(&free, 0, z).unwrap();
        assert_eq!(even, Mat2C::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)));
        let odd = gz_step(&free, 1, z).unwrap();
        assert!(odd.max_diff(&Mat2C::new(c(0.0, 0.0), z, z.inv(), c(0.0, 0.0))) < 1e-16);
    }

    #[test]
    fn gz_back_step_inverts_odd_step() {
        let s = CoefficientSequence::periodic_table(vec![c(0.2, 0.3), c(-0.4, 0.5)]).unwrap();
        let z = unit(2.1);
        let y = gz_step(&s, 1, z).unwrap();
        let back = gz_odd_back_step(&s, 1, z).unwrap();
        assert!((y * back).max_diff(&Mat2C::identity()) < 1e-13);
        assert!((back * y).max_diff(&Mat2C::identity()) < 1e-13);
        assert!((y.det() + c(1.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn free_monodromy_q2() {
        let free = CoefficientSequence::free();
        let theta = 0.9;
        let z = unit(theta);
        let phi = monodromy(&free, 2, z).unwrap();
        assert!(phi.max_diff(&Mat2C::new(z, c(0.0, 0.0), c(0.0, 0.0), z.inv())) < 1e-15);
        assert!((discriminant(&free, 2, theta).unwrap() - 2.0 * theta.cos()).abs() < 1e-15);
        assert!(monodromy(&free, 3, z).is_err());
    }

    #[test]
    fn monodromy_det_and_trace() {
        let s = CoefficientSequence::periodic_table(vec![c(0.2, 0.3), c(-0.4, 0.5), c(0.1, -0.1), c(0.6, 0.0)]).unwrap();
        for k in 0..20 {
            let z = unit(0.31 * k as f64);
            let phi = monodromy(&s, 4, z).unwrap();
            assert!((phi.det() - c(1.0, 0.0)).norm() < 1e-12);
            assert!(phi.trace().im.abs() < 1e-12);
        }
        let real = CoefficientSequence::periodic_table(vec![c(0.3, 0.0), c(-0.2, 0.0)]).unwrap();
        assert_eq!(monodromy(&real, 2, c(1.0, 0.0)).unwrap().trace().im, 0.0);
    }

    #[test]
    fn constant_half_trace_against_window_spectrum() {
        // the constant-0.5 operator has its gap around z = 1: there |tr| > 2 and
        // no window eigenvalue is nearby, while z = −1 is a spectral point
        let s = CoefficientSequence::constant(c(0.5, 0.0)).unwrap();
        let e = crate::operator::assemble_cmv(&s, 0, 64, crate::operator::Boundary::PeriodicWrap).unwrap();
        let ev = e.eigenvalues();
        let nearest = |z: C64| ev.iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min);
        let d_gap = discriminant(&s, 2, 0.0).unwrap();
        assert!(d_gap.abs() > 2.0, "{d_gap}");
        assert!(nearest(unit(0.0)) > 0.5);
        let d_band = discriminant(&s, 2, PI).unwrap();
        assert!(d_band.abs() <= 2.0 + 1e-12, "{d_band}");
        assert!(nearest(unit(PI)) < 1e-12);
    }

    #[test]
    fn lyapunov_free_is_zero() {
        let free = CoefficientSequence::free();
        for t in [0.0, 1.0, 3.0] {
            assert_eq!(lyapunov(&free, unit(t), 1000, SCALE_EVERY).unwrap(), 0.0);
            assert!(lyapunov_orbit(&free, unit(t), 1000, SCALE_EVERY).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn lyapunov_constant_closed_form() {
        let a = c(0.5, 0.0);
        let s = CoefficientSequence::constant(a).unwrap();
        let gap = unit(0.0);
        let exact = szego(a, gap).unwrap().spectral_radius().ln();
        assert!(exact > 0.1);
        assert!((lyapunov(&s, gap, 1, SCALE_EVERY).unwrap() - exact).abs() < 1e-12);
        let orbit = lyapunov_orbit(&s, gap, 100_000, SCALE_EVERY).unwrap();
        assert!((orbit - exact).abs() < 1e-4, "{orbit} vs {exact}");
        let band = unit(2.0);
        assert!(lyapunov_orbit(&s, band, 100_000, SCALE_EVERY).unwrap() < 1e-3);
    }

    #[test]
    fn sieved_lyapunov_is_half_of_squared() {
        let s = CoefficientSequence::constant(c(0.5, 0.0)).unwrap();
        let hat = s.sieve();
        for k in 0..16 {
            let z = unit(0.4 * k as f64 + 0.05);
            let lhs = lyapunov(&hat, z, 1, SCALE_EVERY).unwrap();
            let rhs = lyapunov(&s, z * z, 1, SCALE_EVERY).unwrap();
            assert!((2.0 * lhs - rhs).abs() < 1e-12, "{lhs} {rhs}");
        }
    }

    #[test]
    fn z_estimates() {
        let grid = uniform_grid(256);
        let free = estimate_z(&CoefficientSequence::free(), &grid, 1000, 1e-2).unwrap();
        assert!(free.set.is_full());
        assert!(free.warnings.is_empty());

        let half = CoefficientSequence::constant(c(0.5, 0.0)).unwrap();
        let est = estimate_z(&half, &grid, 100_000, 1e-2).unwrap();
        assert!(est.set.measure() > 0.5 && est.set.measure() < TAU - 0.5);
        assert!(estimate_z(&half, &[1.0, 0.5], 10, 1e-2).is_err());
        assert!(estimate_z(&half, &grid, 10, 0.0).is_err());
    }

    #[test]
    fn isolated_points_become_degenerate_arcs() {
        let s = CoefficientSequence::constant(c(0.5, 0.0)).unwrap();
        // gap of the constant-0.5 operator is |θ| < π/3
        let est = estimate_z(&s, &[0.0, 2.0, 6.0], 1000, 1e-2).unwrap();
        assert_eq!(est.set.arcs(), &[(2.0, 2.0)]);
        let est = estimate_z(&s, &[0.0, 2.0, 2.1, 6.0], 1000, 1e-2).unwrap();
        assert!(est.set.contains(2.05));
        assert!(!est.set.contains(0.0) && !est.set.contains(2.2));
    }
}
