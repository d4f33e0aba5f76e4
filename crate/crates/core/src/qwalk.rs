//! Coined quantum walks on `ℤ`: `𝐔 = 𝐒𝐐` with the biased shift
//! `δ_n^± ↦ δ_{n±1}^±`, their CMV form, and time evolution.
//!
//! In the CMV order, `δ_n^+` sits at index `2n − 1` and `δ_n^−` at `2n`. A coin
//! then corresponds to Verblunsky coefficients exactly when it has the form
//! `Q_n = [[ρ, −α], [ᾱ, ρ]]` with `ρ > 0`; in that case `α_{2n−1} = α`, and
//! every even coefficient vanishes.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientSequence;
use crate::error::{Error, Result};
use crate::linalg::Mat2C;
use crate::C64;

/// Largest accepted `‖Q*Q − I‖` for a coin.
pub const COIN_UNITARY_TOL: f64 = 1e-13;
/// Amplitude at the outermost site of a window that triggers growth.
pub const GROW_THRESHOLD: f64 = 1e-8;
/// Largest accepted deviation from unit norm for a state.
pub const NORM_TOL: f64 = 1e-10;
/// Default cap on the number of sites of an absorbing window.
pub const DEFAULT_MAX_SITES: usize = 1 << 24;
const GAUGE_TOL: f64 = 1e-12;
const PAR_MIN: usize = 4096;

#[derive(Clone)]
enum CoinSource {
    Constant(Mat2C),
    Table(Arc<[Mat2C]>),
    Func(Arc<dyn Fn(i64) -> Mat2C + Send + Sync>),
}

/// Coins `Q_n ∈ 𝕌(2)`, `n ∈ ℤ`.
#[derive(Clone)]
pub struct CoinSequence {
    src: CoinSource,
}

impl std::fmt::Debug for CoinSequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.src {
            CoinSource::Constant(q) => f.debug_tuple("Constant").field(q).finish(),
            CoinSource::Table(t) => f.debug_tuple("Periodic").field(&t.len()).finish(),
            CoinSource::Func(_) => f.write_str("Func"),
        }
    }
}

fn check_coin(q: &Mat2C, site: i64) -> Result<()> {
    let res = q.unitarity_residual();
    if !(res <= COIN_UNITARY_TOL) {
        return Err(Error::Coin { site, reason: format!("not unitary (residual {res:e})") });
    }
    Ok(())
}

impl CoinSequence {
    pub fn constant(q: Mat2C) -> Result<Self> {
        check_coin(&q, 0)?;
        Ok(CoinSequence { src: CoinSource::Constant(q) })
    }

    /// `Q_n = table[n mod p]`.
    pub fn periodic(table: Vec<Mat2C>) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::invalid("coins", "empty coin table"));
        }
        for (j, q) in table.iter().enumerate() {
            check_coin(q, j as i64)?;
        }
        Ok(CoinSequence { src: CoinSource::Table(table.into()) })
    }

    /// Coins from a closure; unitarity is checked wherever a coin is used.
    pub fn from_fn<F: Fn(i64) -> Mat2C + Send + Sync + 'static>(f: F) -> Self {
        CoinSequence { src: CoinSource::Func(Arc::new(f)) }
    }

    pub fn identity() -> Self {
        CoinSequence { src: CoinSource::Constant(Mat2C::identity()) }
    }

    pub fn hadamard() -> Self {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        CoinSequence { src: CoinSource::Constant(Mat2C::new(h, h, h, -h)) }
    }

    pub fn eval(&self, n: i64) -> Mat2C {
        match &self.src {
            CoinSource::Constant(q) => *q,
            CoinSource::Table(t) => t[n.rem_euclid(t.len() as i64) as usize],
            CoinSource::Func(f) => f(n),
        }
    }

    fn checked(&self, n: i64) -> Result<Mat2C> {
        let q = self.eval(n);
        if let CoinSource::Func(_) = self.src {
            check_coin(&q, n)?;
        }
        Ok(q)
    }

    pub fn period(&self) -> Option<usize> {
        match &self.src {
            CoinSource::Constant(_) => Some(1),
            CoinSource::Table(t) => Some(t.len()),
            CoinSource::Func(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spin {
    Plus,
    Minus,
}

/// A walker state on the sites `lo..lo+len`, one `(ψ⁺, ψ⁻)` pair per site.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkState {
    lo: i64,
    amps: Vec<[C64; 2]>,
}

impl WalkState {
    pub fn new(lo: i64, amps: Vec<[C64; 2]>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::invalid("amplitudes", "empty state"));
        }
        let s = WalkState { lo, amps };
        let n = s.norm();
        if !((n - 1.0).abs() <= NORM_TOL) {
            return Err(Error::invalid("amplitudes", format!("norm {n} is not 1")));
        }
        Ok(s)
    }

    /// `δ_n^±` on the one-site window `{n}`.
    pub fn localized(n: i64, spin: Spin) -> Self {
        let (one, zero) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        let a = match spin {
            Spin::Plus => [one, zero],
            Spin::Minus => [zero, one],
        };
        WalkState { lo: n, amps: vec![a] }
    }

    /// Inclusive site range.
    pub fn window(&self) -> (i64, i64) {
        (self.lo, self.lo + self.amps.len() as i64 - 1)
    }

    pub fn amplitudes(&self) -> &[[C64; 2]] {
        &self.amps
    }

    pub fn amplitude(&self, n: i64) -> [C64; 2] {
        let i = n - self.lo;
        if i < 0 || i >= self.amps.len() as i64 {
            [C64::new(0.0, 0.0); 2]
        } else {
            self.amps[i as usize]
        }
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a[0].norm_sqr() + a[1].norm_sqr()).sum::<f64>().sqrt()
    }

    /// `(n, |ψ_n⁺|², |ψ_n⁻|²)` for every site of the window.
    pub fn probabilities(&self) -> impl Iterator<Item = (i64, f64, f64)> + '_ {
        self.amps.iter().enumerate().map(|(i, a)| (self.lo + i as i64, a[0].norm_sqr(), a[1].norm_sqr()))
    }

    /// `Σ_{|j| ≤ J} |ψ_j⁺|² + |ψ_j⁻|²`.
    pub fn mass_within(&self, j: i64) -> f64 {
        self.probabilities().filter(|p| p.0.abs() <= j).map(|p| p.1 + p.2).sum()
    }

    /// The same state on the larger window `lo..=hi`, padded with zeros.
    pub fn embedded(&self, lo: i64, hi: i64) -> Result<Self> {
        let (a, b) = self.window();
        if lo > a || hi < b {
            return Err(Error::WindowMismatch(format!("[{lo}, {hi}] does not contain [{a}, {b}]")));
        }
        Ok(self.embed(lo, (hi - lo + 1) as usize))
    }

    fn embed(&self, lo: i64, len: usize) -> Self {
        let mut amps = vec![[C64::new(0.0, 0.0); 2]; len];
        for (i, a) in self.amps.iter().enumerate() {
            amps[(self.lo + i as i64 - lo) as usize] = *a;
        }
        WalkState { lo, amps }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkBoundary {
    /// Site `hi + 1` is identified with `lo`; `𝐔` is unitary.
    Wrap,
    /// Amplitude leaving the window is dropped; [`evolve`] grows the window
    /// before that can matter.
    Absorbing,
}

/// `𝐔 = 𝐒𝐐` on a window of sites.
#[derive(Debug, Clone)]
pub struct WalkOperator {
    coins: CoinSequence,
    lo: i64,
    local: Vec<Mat2C>,
    boundary: WalkBoundary,
    max_sites: usize,
}

/// `𝐔 = 𝐒𝐐` on the sites `lo..=hi`.
pub fn build_walk(coins: &CoinSequence, lo: i64, hi: i64, boundary: WalkBoundary) -> Result<WalkOperator> {
    if hi < lo {
        return Err(Error::invalid("window", format!("[{lo}, {hi}] is empty")));
    }
    let local = (lo..=hi).map(|n| coins.checked(n)).collect::<Result<_>>()?;
    Ok(WalkOperator { coins: coins.clone(), lo, local, boundary, max_sites: DEFAULT_MAX_SITES })
}

impl WalkOperator {
    pub fn with_max_sites(mut self, max_sites: usize) -> Self {
        self.max_sites = max_sites;
        self
    }

    /// Inclusive site range.
    pub fn window(&self) -> (i64, i64) {
        (self.lo, self.lo + self.local.len() as i64 - 1)
    }

    pub fn boundary(&self) -> WalkBoundary {
        self.boundary
    }

    pub fn coins(&self) -> &CoinSequence {
        &self.coins
    }

    /// Matrix in the natural order `δ_lo^+, δ_lo^−, δ_{lo+1}^+, …`.
    pub fn to_dense(&self) -> DMatrix<C64> {
        let n = self.local.len();
        let mut u = DMatrix::from_element(2 * n, 2 * n, C64::new(0.0, 0.0));
        for (i, q) in self.local.iter().enumerate() {
            // column δ_i^s: (Q e_s)^+ goes to site i+1, (Q e_s)^− to site i−1
            let right = if i + 1 < n { Some(i + 1) } else if self.boundary == WalkBoundary::Wrap { Some(0) } else { None };
            let left = if i > 0 { Some(i - 1) } else if self.boundary == WalkBoundary::Wrap { Some(n - 1) } else { None };
            for (s, col) in [(0, [q.a, q.c]), (1, [q.b, q.d])] {
                if let Some(r) = right {
                    u[(2 * r, 2 * i + s)] += col[0];
                }
                if let Some(l) = left {
                    u[(2 * l + 1, 2 * i + s)] += col[1];
                }
            }
        }
        u
    }

    /// One application of `𝐔` to a state on exactly this window.
    pub fn apply(&self, state: &WalkState) -> Result<WalkState> {
        if state.window() != self.window() {
            return Err(Error::WindowMismatch(format!("state {:?} vs operator {:?}", state.window(), self.window())));
        }
        Ok(WalkState { lo: self.lo, amps: self.step(&state.amps) })
    }

    fn step(&self, psi: &[[C64; 2]]) -> Vec<[C64; 2]> {
        let n = psi.len();
        let wrap = self.boundary == WalkBoundary::Wrap;
        let zero = C64::new(0.0, 0.0);
        let site = |i: usize| -> [C64; 2] {
            let plus = match (i, wrap) {
                (0, false) => zero,
                (0, true) => self.local[n - 1].apply(psi[n - 1])[0],
                _ => self.local[i - 1].apply(psi[i - 1])[0],
            };
            let minus = if i + 1 < n {
                self.local[i + 1].apply(psi[i + 1])[1]
            } else if wrap {
                self.local[0].apply(psi[0])[1]
            } else {
                zero
            };
            [plus, minus]
        };
        if n >= PAR_MIN {
            (0..n).into_par_iter().with_min_len(1024).map(site).collect()
        } else {
            (0..n).map(site).collect()
        }
    }

    fn regrow(&mut self, lo: i64, len: usize) -> Result<()> {
        let old_lo = self.lo;
        let old = std::mem::take(&mut self.local);
        let mut local = Vec::with_capacity(len);
        for n in lo..lo + len as i64 {
            let i = n - old_lo;
            if i >= 0 && (i as usize) < old.len() {
                local.push(old[i as usize]);
            } else {
                local.push(self.coins.checked(n)?);
            }
        }
        self.lo = lo;
        self.local = local;
        Ok(())
    }
}

fn needs_growth(psi: &[[C64; 2]]) -> bool {
    let big = |a: &[C64; 2]| a[0].norm() > GROW_THRESHOLD || a[1].norm() > GROW_THRESHOLD;
    big(&psi[0]) || big(&psi[psi.len() - 1])
}

/// The state after `t` steps, calling `observe(s, state)` for `s = 0, …, t`.
///
/// Under [`WalkBoundary::Wrap`] the state must live on the operator's window.
/// Under [`WalkBoundary::Absorbing`] the state is embedded in the union of both
/// windows, and the window doubles whenever an outermost amplitude exceeds
/// [`GROW_THRESHOLD`].
pub fn evolve_with<F: FnMut(usize, &WalkState)>(
    state: &WalkState,
    op: &WalkOperator,
    t: usize,
    mut observe: F,
) -> Result<WalkState> {
    let mut op = op.clone();
    let mut cur = match op.boundary {
        WalkBoundary::Wrap => {
            if state.window() != op.window() {
                return Err(Error::WindowMismatch(format!(
                    "state {:?} vs operator {:?}",
                    state.window(),
                    op.window()
                )));
            }
            state.clone()
        }
        WalkBoundary::Absorbing => {
            let (slo, shi) = state.window();
            let (olo, ohi) = op.window();
            let (lo, hi) = (slo.min(olo), shi.max(ohi));
            let len = (hi - lo + 1) as usize;
            if len > op.max_sites {
                return Err(Error::WindowOverflow { limit: op.max_sites });
            }
            op.regrow(lo, len)?;
            state.embed(lo, len)
        }
    };
    observe(0, &cur);
    for s in 1..=t {
        if op.boundary == WalkBoundary::Absorbing && needs_growth(&cur.amps) {
            let len = cur.amps.len();
            let pad = len.max(16);
            let new_len = len + 2 * pad;
            if new_len > op.max_sites {
                return Err(Error::WindowOverflow { limit: op.max_sites });
            }
            let lo = cur.lo - pad as i64;
            op.regrow(lo, new_len)?;
            cur = cur.embed(lo, new_len);
        }
        cur = WalkState { lo: cur.lo, amps: op.step(&cur.amps) };
        observe(s, &cur);
    }
    Ok(cur)
}

/// The state after `t` applications of `𝐔`; see [`evolve_with`].
pub fn evolve(state: &WalkState, op: &WalkOperator, t: usize) -> Result<WalkState> {
    evolve_with(state, op, t, |_, _| {})
}

/// `Σ_{j=−J}^{J} |⟨δ_j^+, 𝐔ᵗψ⟩|² + |⟨δ_j^−, 𝐔ᵗψ⟩|²`.
pub fn survival_probability(state0: &WalkState, op: &WalkOperator, j: i64, t: usize) -> Result<f64> {
    if j < 0 {
        return Err(Error::invalid("J", format!("{j} is negative")));
    }
    Ok(evolve(state0, op, t)?.mass_within(j).clamp(0.0, 1.0))
}

/// Survival probabilities at every time in `times`, from a single run.
pub fn survival_curve(state0: &WalkState, op: &WalkOperator, j: i64, times: &[usize]) -> Result<Vec<f64>> {
    if j < 0 {
        return Err(Error::invalid("J", format!("{j} is negative")));
    }
    let t_max = times.iter().copied().max().unwrap_or(0);
    let mut at = vec![f64::NAN; t_max + 1];
    evolve_with(state0, op, t_max, |s, st| {
        if times.contains(&s) {
            at[s] = st.mass_within(j).clamp(0.0, 1.0);
        }
    })?;
    Ok(times.iter().map(|&s| at[s]).collect())
}

/// Position of `δ_n^±` in the CMV order.
pub fn cmv_index(n: i64, spin: Spin) -> i64 {
    match spin {
        Spin::Plus => 2 * n - 1,
        Spin::Minus => 2 * n,
    }
}

/// Verblunsky coefficient `α_{2n−1}` of the coin at site `n`, or the reason it
/// is not of the form `[[ρ, −α], [ᾱ, ρ]]`, `ρ > 0`.
pub fn coin_to_alpha(q: &Mat2C, site: i64) -> Result<C64> {
    check_coin(q, site)?;
    let fail = |reason: &str| Err(Error::Coin { site, reason: reason.to_string() });
    if (q.a - q.d).norm() > GAUGE_TOL {
        return fail("diagonal entries differ");
    }
    if q.a.im.abs() > GAUGE_TOL || !(q.a.re > 0.0) {
        return fail("diagonal entry is not a positive real");
    }
    if (q.c + q.b.conj()).norm() > GAUGE_TOL {
        return fail("off-diagonal entries are not of the form (−α, ᾱ)");
    }
    Ok(q.c.conj())
}

/// The coin `[[ρ, −α], [ᾱ, ρ]]`.
pub fn alpha_to_coin(alpha: C64) -> Result<Mat2C> {
    if !(alpha.norm() < 1.0) {
        return Err(Error::OutsideDisk { value: alpha });
    }
    let rho = C64::new((1.0 - alpha.norm_sqr()).sqrt(), 0.0);
    Ok(Mat2C::new(rho, -alpha, alpha.conj(), rho))
}

/// A walk written as a CMV matrix.
#[derive(Debug, Clone)]
pub struct CgmvForm {
    /// `α_{2n−1}` from the coins, zero at even sites.
    pub sequence: CoefficientSequence,
    /// Basis vector at each CMV position `2·lo − 1, 2·lo, …`.
    pub ordering: Vec<(i64, Spin)>,
    /// CMV index of the first row.
    pub offset: i64,
    /// `𝐔` on the window in the CMV order.
    pub matrix: DMatrix<C64>,
}

/// The CMV form of the walk on `lo..=hi`. For coins with a finite period the
/// gauge is checked on a whole period as well as on the window.
pub fn to_cmv(coins: &CoinSequence, lo: i64, hi: i64, boundary: WalkBoundary) -> Result<CgmvForm> {
    let op = build_walk(coins, lo, hi, boundary)?;
    let check: Vec<i64> = match coins.period() {
        Some(p) => (lo..=hi).chain(0..p as i64).collect(),
        None => (lo..=hi).collect(),
    };
    for &n in &check {
        coin_to_alpha(&coins.eval(n), n)?;
    }
    let sequence = match &coins.src {
        CoinSource::Constant(q) => {
            let a = coin_to_alpha(q, 0)?;
            CoefficientSequence::periodic_table(vec![C64::new(0.0, 0.0), a])?
        }
        CoinSource::Table(t) => {
            // period 2p in the CMV index; site n owns index 2n − 1
            let p = t.len();
            let mut vals = vec![C64::new(0.0, 0.0); 2 * p];
            for (n, q) in t.iter().enumerate() {
                vals[(2 * n + 2 * p - 1) % (2 * p)] = coin_to_alpha(q, n as i64)?;
            }
            CoefficientSequence::periodic_table(vals)?
        }
        CoinSource::Func(_) => {
            let c = coins.clone();
            let bound = check.iter().map(|&n| c.eval(n).c.norm()).fold(0.0, f64::max);
            CoefficientSequence::from_fn(
                move |m| {
                    if m.rem_euclid(2) == 0 {
                        C64::new(0.0, 0.0)
                    } else {
                        c.eval((m + 1) / 2).c.conj()
                    }
                },
                bound,
                None,
            )?
        }
    };

    let ordering: Vec<(i64, Spin)> = (lo..=hi).flat_map(|n| [(n, Spin::Plus), (n, Spin::Minus)]).collect();
    // δ_lo^+ leads both orders, so the natural matrix is already in CMV order
    Ok(CgmvForm { sequence, ordering, offset: cmv_index(lo, Spin::Plus), matrix: op.to_dense() })
}

/// Largest entry of `m` farther than `width` from the diagonal. With `cyclic`,
/// distances wrap around the window.
pub fn band_violation(m: &DMatrix<C64>, width: usize, cyclic: bool) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = i.abs_diff(j);
            let d = if cyclic { d.min(n - d) } else { d };
            if d > width {
                worst = worst.max(m[(i, j)].norm());
            }
        }
    }
    worst
}

/// Coin families accepted in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoinSpec {
    Identity,
    Hadamard,
    /// One matrix for every site, rows of `[re, im]` pairs.
    Constant { matrix: [[[f64; 2]; 2]; 2] },
    /// `Q_n = matrices[n mod p]`.
    Periodic { matrices: Vec<[[[f64; 2]; 2]; 2]> },
    /// CGMV-gauge coins from `α_{2n−1} = alphas[n mod p]`.
    Verblunsky { alphas: Vec<[f64; 2]> },
}

fn to_mat(m: &[[[f64; 2]; 2]; 2]) -> Mat2C {
    let c = |e: [f64; 2]| C64::new(e[0], e[1]);
    Mat2C::new(c(m[0][0]), c(m[0][1]), c(m[1][0]), c(m[1][1]))
}

impl CoinSpec {
    pub fn build(&self) -> Result<CoinSequence> {
        match self {
            CoinSpec::Identity => Ok(CoinSequence::identity()),
            CoinSpec::Hadamard => Ok(CoinSequence::hadamard()),
            CoinSpec::Constant { matrix } => CoinSequence::constant(to_mat(matrix)),
            CoinSpec::Periodic { matrices } => CoinSequence::periodic(matrices.iter().map(to_mat).collect()),
            CoinSpec::Verblunsky { alphas } => {
                let coins = alphas
                    .iter()
                    .enumerate()
                    .map(|(n, a)| {
                        alpha_to_coin(C64::new(a[0], a[1])).map_err(|e| Error::Coin { site: n as i64, reason: e.to_string() })
                    })
                    .collect::<Result<_>>()?;
                CoinSequence::periodic(coins)
            }
        }
    }
}

/// Initial states accepted in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Localized { site: i64, spin: Spin },
    /// `amplitudes[i] = [[re ψ⁺, im ψ⁺], [re ψ⁻, im ψ⁻]]` at site `lo + i`.
    Amplitudes { lo: i64, amplitudes: Vec<[[f64; 2]; 2]> },
}

impl InitialSpec {
    pub fn build(&self) -> Result<WalkState> {
        match self {
            InitialSpec::Localized { site, spin } => Ok(WalkState::localized(*site, *spin)),
            InitialSpec::Amplitudes { lo, amplitudes } => WalkState::new(
                *lo,
                amplitudes.iter().map(|a| [C64::new(a[0][0], a[0][1]), C64::new(a[1][0], a[1][1])]).collect(),
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::unitarity_residual;
    use crate::operator::restrict_cmv;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn identity_coins_shift() {
        let op = build_walk(&CoinSequence::identity(), -3, 3, WalkBoundary::Absorbing).unwrap();
        let s = evolve(&WalkState::localized(0, Spin::Plus), &op, 1).unwrap();
        assert_eq!(s.amplitude(1), [c(1.0, 0.0), c(0.0, 0.0)]);
        let s = evolve(&WalkState::localized(0, Spin::Plus), &op, 5).unwrap();
        assert_eq!(s.amplitude(5), [c(1.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(s.norm(), 1.0);
        let s0 = evolve(&WalkState::localized(2, Spin::Minus), &op, 0).unwrap();
        assert_eq!(s0.amplitude(2), [c(0.0, 0.0), c(1.0, 0.0)]);
    }

    #[test]
    fn swap_coin_step() {
        let one = c(1.0, 0.0);
        let zero = c(0.0, 0.0);
        let swap = CoinSequence::constant(Mat2C::new(zero, one, one, zero)).unwrap();
        let op = build_walk(&swap, -2, 2, WalkBoundary::Wrap).unwrap();
        let psi = WalkState::localized(0, Spin::Plus).embed(-2, 5);
        let s = op.apply(&psi).unwrap();
        assert_eq!(s.amplitude(-1), [zero, one]);
        assert_eq!(s.norm(), 1.0);
    }

    #[test]
    fn hadamard_unitary_and_norm() {
        let op = build_walk(&CoinSequence::hadamard(), -8, 7, WalkBoundary::Wrap).unwrap();
        assert!(unitarity_residual(&op.to_dense()) < 1e-13);
        let s = evolve(&WalkState::localized(0, Spin::Plus), &op.clone().into_absorbing(), 100).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-7);
    }

    impl WalkOperator {
        fn into_absorbing(mut self) -> Self {
            self.boundary = WalkBoundary::Absorbing;
            self
        }
    }

    #[test]
    fn survival_examples() {
        let psi = WalkState::localized(0, Spin::Plus);
        let shift = build_walk(&CoinSequence::identity(), 0, 0, WalkBoundary::Absorbing).unwrap();
        assert_eq!(survival_probability(&psi, &shift, 0, 0).unwrap(), 1.0);
        assert_eq!(survival_probability(&psi, &shift, 3, 10).unwrap(), 0.0);
        let had = build_walk(&CoinSequence::hadamard(), 0, 0, WalkBoundary::Absorbing).unwrap();
        let curve = survival_curve(&psi, &had, 5, &[20, 200]).unwrap();
        assert!(curve[1] < curve[0], "{curve:?}");
        assert_eq!(curve[0], survival_probability(&psi, &had, 5, 20).unwrap());
    }

    #[test]
    fn growth_cap() {
        let op = build_walk(&CoinSequence::identity(), 0, 0, WalkBoundary::Absorbing).unwrap().with_max_sites(40);
        assert!(matches!(
            evolve(&WalkState::localized(0, Spin::Plus), &op, 100),
            Err(Error::WindowOverflow { limit: 40 })
        ));
    }

    #[test]
    fn rejects_bad_coins() {
        let bad = Mat2C::new(c(1.0, 0.0), c(0.1, 0.0), c(0.0, 0.0), c(1.0, 0.0));
        assert!(matches!(CoinSequence::periodic(vec![Mat2C::identity(), bad]), Err(Error::Coin { site: 1, .. })));
        let f = CoinSequence::from_fn(move |n| if n == 4 { bad } else { Mat2C::identity() });
        assert!(matches!(build_walk(&f, 0, 9, WalkBoundary::Wrap), Err(Error::Coin { site: 4, .. })));
        assert!(matches!(
            to_cmv(&CoinSequence::hadamard(), 0, 3, WalkBoundary::Wrap),
            Err(Error::Coin { site: 0, .. })
        ));
    }

    #[test]
    fn identity_is_free_cmv() {
        let form = to_cmv(&CoinSequence::identity(), -4, 4, WalkBoundary::Absorbing).unwrap();
        assert_eq!(form.offset, -9);
        assert!(band_violation(&form.matrix, 2, false) == 0.0);
        assert!(form.sequence.eval(3).norm() == 0.0 && form.sequence.eval(-2).norm() == 0.0);
        for j in 0..form.matrix.ncols() {
            let nz = form.matrix.column(j).iter().filter(|x| x.norm() > 0.0).count();
            assert!(nz <= 1);
        }
    }

    #[test]
    fn gauge_coins_roundtrip() {
        let alphas = [c(0.3, -0.2), c(-0.5, 0.1), c(0.0, 0.7)];
        let coins = CoinSequence::periodic(alphas.iter().map(|&a| alpha_to_coin(a).unwrap()).collect()).unwrap();
        let (lo, hi) = (-6, 5);
        let form = to_cmv(&coins, lo, hi, WalkBoundary::Absorbing).unwrap();
        for n in lo..=hi {
            let a = form.sequence.eval(2 * n - 1);
            assert!((a - alphas[n.rem_euclid(3) as usize]).norm() < 1e-15);
            assert_eq!(form.sequence.eval(2 * n), c(0.0, 0.0));
        }
        let dim = form.matrix.nrows();
        let e = restrict_cmv(&form.sequence, form.offset, dim).unwrap().into_matrix();
        let mut worst: f64 = 0.0;
        for i in 2..dim - 2 {
            for j in 2..dim - 2 {
                worst = worst.max((e[(i, j)] - form.matrix[(i, j)]).norm());
            }
        }
        assert!(worst < 1e-12, "{worst}");
        assert_eq!(band_violation(&form.matrix, 2, false), 0.0);
    }
}
