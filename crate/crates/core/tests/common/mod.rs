#![allow(dead_code)]

use cmvlab::coefficients::CoefficientSequence;
use cmvlab::{Mat2C, C64};
use proptest::prelude::*;
use std::f64::consts::TAU;

pub fn alpha(radius: f64) -> impl Strategy<Value = C64> {
    (0.0..radius, 0.0..TAU).prop_map(|(r, t)| C64::from_polar(r, t))
}

pub fn unit_z() -> impl Strategy<Value = C64> {
    (0.0..TAU).prop_map(|t| C64::from_polar(1.0, t))
}

/// A periodic table whose period is one of `periods`.
pub fn periodic_seq(periods: &'static [usize], radius: f64) -> impl Strategy<Value = CoefficientSequence> {
    prop::sample::select(periods)
        .prop_flat_map(move |p| prop::collection::vec(alpha(radius), p))
        .prop_map(|v| CoefficientSequence::periodic_table(v).unwrap())
}

/// Haar-like `e^{iφ}·[[a, −b̄], [b, ā]]`.
pub fn unitary2() -> impl Strategy<Value = Mat2C> {
    (0.0..TAU, 0.0..TAU, 0.0..TAU, 0.0..1.0f64).prop_map(|(phi, s, t, x)| {
        let (ra, rb) = (x.sqrt(), (1.0 - x).sqrt());
        let a = C64::from_polar(ra, s);
        let b = C64::from_polar(rb, t);
        Mat2C::new(a, -b.conj(), b, a.conj()).scale(C64::from_polar(1.0, phi))
    })
}
