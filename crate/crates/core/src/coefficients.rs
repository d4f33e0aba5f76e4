//! Verblunsky coefficient sequences and limit-periodic families.
//!
//! A [`CoefficientSequence`] is a map `n ↦ α_n` into the open unit disk
//! together with a certified bound on `sup |α_n|` and, optionally, a period.
//! Every operator in the crate is generated from one of these.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{self, Boundary};
use crate::C64;

type EvalFn = dyn Fn(i64) -> C64 + Send + Sync;

#[derive(Clone)]
enum Source {
    Constant(C64),
    Quasiperiodic { lambda: f64, beta: f64, theta: f64 },
    Table(Arc<[C64]>),
    Sieved(Arc<CoefficientSequence>),
    Func(Arc<EvalFn>),
}

/// A two-sided sequence of Verblunsky coefficients.
///
/// Values are immutable after construction and cheap to clone.
#[derive(Clone)]
pub struct CoefficientSequence {
    source: Source,
    sup_norm_bound: f64,
    period: Option<usize>,
}

fn check_in_disk(value: C64) -> Result<()> {
    if value.norm() < 1.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::OutsideDisk { value })
    }
}

impl CoefficientSequence {
    /// `α_n = a` for every `n`.
    pub fn constant(a: C64) -> Result<Self> {
        check_in_disk(a)?;
        Ok(CoefficientSequence {
            source: Source::Constant(a),
            sup_norm_bound: a.norm(),
            period: Some(1),
        })
    }

    /// All coefficients zero.
    pub fn free() -> Self {
        CoefficientSequence {
            source: Source::Constant(C64::new(0.0, 0.0)),
            sup_norm_bound: 0.0,
            period: Some(1),
        }
    }

    /// `α_n = λ·exp(2πi(nβ + θ))`.
    pub fn quasiperiodic(lambda: f64, beta: f64, theta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&lambda) {
            return Err(Error::invalid("lambda", format!("{lambda} is not in [0, 1)")));
        }
        if !beta.is_finite() || !theta.is_finite() {
            return Err(Error::invalid("beta", "frequency and phase must be finite"));
        }
        Ok(CoefficientSequence {
            source: Source::Quasiperiodic { lambda, beta, theta },
            sup_norm_bound: lambda,
            period: None,
        })
    }

    /// The periodic sequence `α_{j+nq} = values[j]` with `q = values.len()`.
    pub fn periodic_table(values: Vec<C64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("values", "a periodic table needs at least one entry"));
        }
        let mut bound = 0.0f64;
        for &v in &values {
            check_in_disk(v)?;
            bound = bound.max(v.norm());
        }
        let period = values.len();
        Ok(CoefficientSequence {
            source: Source::Table(values.into()),
            sup_norm_bound: bound,
            period: Some(period),
        })
    }

    /// Wraps an arbitrary evaluator.
    ///
    /// `sup_norm_bound` must be a valid bound for `|f(n)|`; it is checked
    /// lazily by [`CoefficientSequence::eval`] in debug builds only. When a
    /// period is given, `f` is only ever called on `0..period`.
    pub fn from_fn<F>(f: F, sup_norm_bound: f64, period: Option<usize>) -> Result<Self>
    where
        F: Fn(i64) -> C64 + Send + Sync + 'static,
    {
        if !(0.0..1.0).contains(&sup_norm_bound) {
            return Err(Error::invalid("sup_norm_bound", format!("{sup_norm_bound} is not in [0, 1)")));
        }
        if period == Some(0) {
            return Err(Error::invalid("period", "must be positive"));
        }
        Ok(CoefficientSequence {
            source: Source::Func(Arc::new(f)),
            sup_norm_bound,
            period,
        })
    }

    pub fn eval(&self, n: i64) -> C64 {
        let value = match &self.source {
            Source::Constant(a) => *a,
            Source::Quasiperiodic { lambda, beta, theta } => {
                let phase = ((n as f64) * beta).fract() + theta;
                C64::from_polar(*lambda, TAU * phase)
            }
            Source::Table(values) => values[n.rem_euclid(values.len() as i64) as usize],
            Source::Sieved(inner) => {
                if n.rem_euclid(2) == 0 {
                    C64::new(0.0, 0.0)
                } else {
                    inner.eval((n + 1).div_euclid(2))
                }
            }
            Source::Func(f) => match self.period {
                Some(q) => f(n.rem_euclid(q as i64)),
                None => f(n),
            },
        };
        debug_assert!(value.norm() <= self.sup_norm_bound + 1e-15);
        value
    }

    /// `ρ_n = sqrt(1 - |α_n|²)`.
    pub fn rho(&self, n: i64) -> f64 {
        rho_of(self.eval(n))
    }

    pub fn sup_norm_bound(&self) -> f64 {
        self.sup_norm_bound
    }

    pub fn period(&self) -> Option<usize> {
        self.period
    }

    /// `α_lo, …, α_{lo+len-1}`.
    pub fn window(&self, lo: i64, len: usize) -> Vec<C64> {
        (0..len as i64).map(|i| self.eval(lo + i)).collect()
    }

    /// True when the period divides `q`.
    pub fn is_periodic_with(&self, q: usize) -> bool {
        matches!(self.period, Some(p) if q > 0 && q % p == 0)
    }

    /// The `q`-periodic sequence repeating `α_0, …, α_{q-1}`.
    pub fn periodize(&self, q: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::invalid("q", "period must be positive"));
        }
        CoefficientSequence::periodic_table(self.window(0, q))
    }

    /// The sieved sequence: `α̂_{2j} = 0`, `α̂_{2j-1} = α_j`.
    pub fn sieve(&self) -> Self {
        match self.period {
            Some(p) => {
                let table: Vec<C64> = (0..2 * p as i64)
                    .map(|m| if m % 2 == 0 { C64::new(0.0, 0.0) } else { self.eval((m + 1) / 2) })
                    .collect();
                CoefficientSequence {
                    source: Source::Table(table.into()),
                    sup_norm_bound: self.sup_norm_bound,
                    period: Some(2 * p),
                }
            }
            None => CoefficientSequence {
                source: Source::Sieved(Arc::new(self.clone())),
                sup_norm_bound: self.sup_norm_bound,
                period: None,
            },
        }
    }

    /// `max_{lo ≤ n < lo+len} |α_n - β_n|`.
    pub fn sup_distance(&self, other: &CoefficientSequence, lo: i64, len: usize) -> f64 {
        (0..len as i64)
            .map(|i| (self.eval(lo + i) - other.eval(lo + i)).norm())
            .fold(0.0, f64::max)
    }
}

impl fmt::Debug for CoefficientSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.source {
            Source::Constant(a) => format!("Constant({a})"),
            Source::Quasiperiodic { lambda, beta, theta } => {
                format!("Quasiperiodic(λ={lambda}, β={beta}, θ={theta})")
            }
            Source::Table(v) => format!("Table(len={})", v.len()),
            Source::Sieved(inner) => format!("Sieved({inner:?})"),
            Source::Func(_) => "Func".to_string(),
        };
        f.debug_struct("CoefficientSequence")
            .field("source", &kind)
            .field("sup_norm_bound", &self.sup_norm_bound)
            .field("period", &self.period)
            .finish()
    }
}

pub(crate) fn rho_of(alpha: C64) -> f64 {
    (1.0 - alpha.norm_sqr()).max(0.0).sqrt()
}

/// A monotone decreasing rate `φ(q)` bounding `‖ℰ_n − ℰ‖ ≤ φ(q_n)`.
#[derive(Clone)]
pub struct RateFunction(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl RateFunction {
    pub fn new<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        RateFunction(Arc::new(f))
    }

    pub fn eval(&self, q: f64) -> f64 {
        (self.0)(q)
    }
}

impl fmt::Debug for RateFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("RateFunction(..)")
    }
}

/// One periodic approximant in a limit-periodic family.
#[derive(Debug, Clone)]
pub struct Stage {
    pub period: usize,
    pub seq: CoefficientSequence,
}

/// Closed-form structure of a constructed family: stage `n` is the sum of
/// increments `0..=n`, increment `m` having amplitude `amplitudes[m]` and
/// pattern `exp(2πi j / q_m)`.
#[derive(Debug, Clone)]
struct IncrementSum {
    amplitudes: Vec<f64>,
    periods: Vec<usize>,
}

impl IncrementSum {
    fn increment(&self, m: usize, j: i64) -> C64 {
        let q = self.periods[m] as i64;
        C64::from_polar(self.amplitudes[m], TAU * j.rem_euclid(q) as f64 / q as f64)
    }

    fn partial(&self, upto: usize, j: i64) -> C64 {
        (0..=upto).map(|m| self.increment(m, j)).sum()
    }
}

/// Periodic approximants `ℰ_n` (periods `q_n`, each dividing the next) of a
/// limit sequence.
#[derive(Debug, Clone)]
pub struct LimitPeriodicFamily {
    stages: Vec<Stage>,
    limit: CoefficientSequence,
    rate: Option<RateFunction>,
    closed_form: Option<IncrementSum>,
}

impl LimitPeriodicFamily {
    /// Validates the divisibility chain and that the sampled sup-distance to
    /// the limit is nonincreasing along the stages.
    pub fn new(stages: Vec<Stage>, limit: CoefficientSequence, rate: Option<RateFunction>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::invalid("stages", "a family needs at least one stage"));
        }
        for (n, st) in stages.iter().enumerate() {
            if !st.seq.is_periodic_with(st.period) {
                return Err(Error::invalid("stages", format!("stage {n} is not {}-periodic", st.period)));
            }
        }
        for w in stages.windows(2) {
            if w[1].period % w[0].period != 0 {
                return Err(Error::invalid(
                    "stages",
                    format!("period {} does not divide {}", w[0].period, w[1].period),
                ));
            }
        }
        let q_max = stages.last().map(|s| s.period).unwrap_or(1);
        let lo = -(2 * q_max as i64);
        let dists: Vec<f64> = stages.iter().map(|s| s.seq.sup_distance(&limit, lo, 4 * q_max)).collect();
        if dists.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-12) + 1e-15) {
            return Err(Error::invalid("stages", "sup distance to the limit increases along the family"));
        }
        Ok(LimitPeriodicFamily { stages, limit, rate, closed_form: None })
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn limit(&self) -> &CoefficientSequence {
        &self.limit
    }

    pub fn rate(&self) -> Option<&RateFunction> {
        self.rate.as_ref()
    }

    pub fn periods(&self) -> Vec<usize> {
        self.stages.iter().map(|s| s.period).collect()
    }

    /// `α^{(n)}(j) − α^{(n-1)}(j)`, evaluated from the closed form when the
    /// family was constructed (no cancellation), by subtraction otherwise.
    pub fn stage_increment(&self, n: usize, j: i64) -> C64 {
        match &self.closed_form {
            Some(cf) if n > 0 => cf.increment(n, j),
            Some(cf) => cf.increment(0, j),
            None if n > 0 => self.stages[n].seq.eval(j) - self.stages[n - 1].seq.eval(j),
            None => self.stages[0].seq.eval(j),
        }
    }

    /// `α^{(n)}(j) − α(j)`, from the closed form when available.
    pub fn stage_minus_limit(&self, n: usize, j: i64) -> C64 {
        match &self.closed_form {
            Some(cf) => -(n + 1..cf.amplitudes.len()).map(|m| cf.increment(m, j)).sum::<C64>(),
            None => self.stages[n].seq.eval(j) - self.limit.eval(j),
        }
    }

    /// `max_{|j| ≤ radius} |α^{(n)}(j) − α(j)|`.
    pub fn stage_sup_distance(&self, n: usize, radius: i64) -> f64 {
        (-radius..=radius).map(|j| self.stage_minus_limit(n, j).norm()).fold(0.0, f64::max)
    }

    /// `max_{|j| ≤ radius} |α^{(n)}(j) − α^{(n-1)}(j)|`.
    pub fn increment_sup(&self, n: usize, radius: i64) -> f64 {
        (-radius..=radius).map(|j| self.stage_increment(n, j).norm()).fold(0.0, f64::max)
    }
}

/// Amplitude profile of the increments of a constructed Pastur–Tkachenko family.
///
/// The amplitude of the increment that turns stage `n` into stage `n+1` is
/// `decay(n, q_{n+1})`.
#[derive(Clone)]
pub enum Decay {
    /// `base_amp · exp(−q_{n+1}²)`.
    Gaussian,
    /// `base_amp · base^{−q_{n+1}}`.
    Geometric { base: f64 },
    /// Arbitrary `(n, q_{n+1}) ↦ amplitude`, used verbatim.
    Custom(Arc<dyn Fn(usize, usize) -> f64 + Send + Sync>),
}

impl Decay {
    fn amplitude(&self, base_amp: f64, n: usize, q_next: usize) -> f64 {
        let q = q_next as f64;
        match self {
            Decay::Gaussian => base_amp * (-q * q).exp(),
            Decay::Geometric { base } => base_amp * base.powf(-q),
            Decay::Custom(f) => f(n, q_next),
        }
    }
}

impl fmt::Debug for Decay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decay::Gaussian => f.write_str("Gaussian"),
            Decay::Geometric { base } => write!(f, "Geometric({base})"),
            Decay::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Builds a limit-periodic family with super-exponentially small increments.
///
/// Stage 0 is `base_amp·exp(2πi j/q₀)`; stage `n ≥ 1` adds
/// `decay(n−1, q_n)·exp(2πi j/q_n)` with `q_n = q₀·2ⁿ`. The limit is the last
/// constructed stage, so every distance to it is a finite sum of increments and
/// can be evaluated without cancellation.
pub fn pastur_tkachenko_family(base_amp: f64, decay: Decay, q0: usize, levels: usize) -> Result<LimitPeriodicFamily> {
    if q0 == 0 || q0 % 2 != 0 {
        return Err(Error::NotEven { name: "q0", value: q0 as i64 });
    }
    if !(0.0..1.0).contains(&base_amp) {
        return Err(Error::invalid("base_amp", format!("{base_amp} is not in [0, 1)")));
    }
    if levels > 20 {
        return Err(Error::invalid("levels", "at most 20 levels are supported"));
    }
    let periods: Vec<usize> = (0..=levels).map(|n| q0 << n).collect();
    let mut amplitudes = vec![base_amp];
    for n in 1..=levels {
        let amp = decay.amplitude(base_amp, n - 1, periods[n]);
        if !(amp.is_finite() && amp >= 0.0) {
            return Err(Error::invalid("decay", format!("amplitude {amp} at level {} is not a nonnegative number", n - 1)));
        }
        amplitudes.push(amp);
    }
    let total: f64 = amplitudes.iter().sum();
    if total >= 1.0 {
        return Err(Error::invalid("base_amp", format!("coefficients reach modulus {total} ≥ 1")));
    }
    let cf = IncrementSum { amplitudes, periods: periods.clone() };

    let mut stages = Vec::with_capacity(levels + 1);
    for (n, &q) in periods.iter().enumerate() {
        let table: Vec<C64> = (0..q as i64).map(|j| cf.partial(n, j)).collect();
        stages.push(Stage { period: q, seq: CoefficientSequence::periodic_table(table)? });
    }
    let limit = stages.last().expect("at least one stage").seq.clone();

    // ‖ℰ_n − ℰ‖ ≤ C(r)·‖α^{(n)} − α‖_∞ ≤ C(r)·Σ_{m>n} amp_m
    let lipschitz = operator::cmv_lipschitz_constant(total);
    let tails: Vec<f64> = (0..=levels).map(|n| cf.amplitudes[n + 1..].iter().sum()).collect();
    let rate_periods = periods.clone();
    let rate = RateFunction::new(move |q: f64| {
        // largest stage whose period does not exceed q
        let idx = rate_periods.iter().rposition(|&p| p as f64 <= q).unwrap_or(0);
        lipschitz * tails[idx]
    });

    let mut family = LimitPeriodicFamily::new(stages, limit, Some(rate))?;
    family.closed_form = Some(cf);
    Ok(family)
}

/// Outcome of the positive-measure sum criterion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpSumReport {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    /// `(n, q_n, ‖ℰ_n − ℰ_{n−1}‖)` for the finitely many computed terms.
    pub terms: Vec<(usize, usize, f64)>,
    /// Certified bound on the terms beyond the last constructed stage.
    pub tail_bound: f64,
}

/// Checks `Σ_{n>k} q_n‖ℰ_n − ℰ_{n−1}‖ < ½·sigma_k_measure`.
///
/// Norms of consecutive differences are computed exactly on periodic windows
/// of `4·q_max` sites. Terms past the last stage are bounded through the
/// family's rate function, continuing the periods geometrically; without a
/// rate the criterion refuses.
pub fn lp_sum_criterion(family: &LimitPeriodicFamily, k: usize, sigma_k_measure: f64) -> Result<LpSumReport> {
    let stages = family.stages();
    if k >= stages.len() {
        return Err(Error::invalid("k", format!("stage index {k} out of range (family has {} stages)", stages.len())));
    }
    let rate = family
        .rate()
        .ok_or_else(|| Error::UncertifiedTail("family carries no rate function".into()))?;
    let q_max = stages.last().map(|s| s.period).unwrap_or(1);
    let dim = 4 * q_max;

    let mut terms = Vec::new();
    let mut lhs = 0.0;
    for n in k + 1..stages.len() {
        let diff = operator::norm_diff(&stages[n].seq, &stages[n - 1].seq, dim, Boundary::PeriodicWrap)?;
        lhs += stages[n].period as f64 * diff;
        terms.push((n, stages[n].period, diff));
    }

    let tail_bound = certified_tail(family, rate)?;
    lhs += tail_bound;
    let rhs = 0.5 * sigma_k_measure;
    Ok(LpSumReport { holds: lhs < rhs, lhs, rhs, terms, tail_bound })
}

fn certified_tail(family: &LimitPeriodicFamily, rate: &RateFunction) -> Result<f64> {
    let periods = family.periods();
    let last = *periods.last().expect("nonempty family") as f64;
    let ratio = if periods.len() >= 2 { last / periods[periods.len() - 2] as f64 } else { 2.0 };
    let mut prev_q = last;
    let mut tail = 0.0;
    let mut last_term = f64::INFINITY;
    for step in 0..200 {
        let q = prev_q * ratio;
        let bound = rate.eval(q) + rate.eval(prev_q);
        if !bound.is_finite() || bound < 0.0 {
            return Err(Error::UncertifiedTail(format!("rate returned {bound} at q = {q}")));
        }
        let term = q * bound;
        tail += term;
        if term == 0.0 || (step > 4 && term < 1e-18 * tail.max(1e-300)) {
            if term > last_term {
                return Err(Error::UncertifiedTail("terms are not decreasing".into()));
            }
            return Ok(tail);
        }
        if step > 4 && term > 0.9 * last_term {
            return Err(Error::UncertifiedTail(format!("terms decay too slowly near q = {q}")));
        }
        last_term = term;
        prev_q = q;
    }
    Err(Error::UncertifiedTail("tail did not converge within 200 terms".into()))
}

/// JSON description of a sequence, tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SequenceSpec {
    Constant {
        value: [f64; 2],
    },
    Quasiperiodic {
        lambda: f64,
        beta: f64,
        #[serde(default)]
        theta: f64,
    },
    PeriodicTable {
        values: Vec<[f64; 2]>,
    },
    /// The limit of a constructed Pastur–Tkachenko family.
    PtFamily(FamilySpec),
    Sieved {
        inner: Box<SequenceSpec>,
    },
}

impl SequenceSpec {
    pub fn build(&self) -> Result<CoefficientSequence> {
        match self {
            SequenceSpec::Constant { value } => CoefficientSequence::constant(C64::new(value[0], value[1])),
            SequenceSpec::Quasiperiodic { lambda, beta, theta } => {
                CoefficientSequence::quasiperiodic(*lambda, *beta, *theta)
            }
            SequenceSpec::PeriodicTable { values } => {
                CoefficientSequence::periodic_table(values.iter().map(|v| C64::new(v[0], v[1])).collect())
            }
            SequenceSpec::PtFamily(spec) => Ok(spec.build()?.limit().clone()),
            SequenceSpec::Sieved { inner } => Ok(inner.build()?.sieve()),
        }
    }
}

/// Decay profile as it appears in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DecaySpec {
    Gaussian,
    Geometric { base: f64 },
}

impl Default for DecaySpec {
    fn default() -> Self {
        DecaySpec::Gaussian
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub base_amp: f64,
    pub q0: usize,
    pub levels: usize,
    #[serde(default)]
    pub decay: DecaySpec,
}

impl Default for FamilySpec {
    /// The reference family: `q₀ = 2`, three levels, Gaussian decay, `base_amp = 0.1`.
    fn default() -> Self {
        FamilySpec { base_amp: 0.1, q0: 2, levels: 3, decay: DecaySpec::Gaussian }
    }
}

impl FamilySpec {
    pub fn build(&self) -> Result<LimitPeriodicFamily> {
        let decay = match self.decay {
            DecaySpec::Gaussian => Decay::Gaussian,
            DecaySpec::Geometric { base } => {
                if !(base > 1.0) {
                    return Err(Error::invalid("decay.base", format!("{base} must exceed 1")));
                }
                Decay::Geometric { base }
            }
        };
        pastur_tkachenko_family(self.base_amp, decay, self.q0, self.levels)
    }
}
