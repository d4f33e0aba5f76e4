/*!
Numerical toolkit for CMV operators built from Verblunsky coefficients.

The crate is organized bottom-up:

* [`coefficients`] builds sequences `n ↦ α_n` (constant, quasi-periodic,
  periodic tables, sieved, constructed limit-periodic families).
* [`operator`] turns a sequence into ϴ blocks, the `ℒℳ` factorization and
  finite pentadiagonal windows.
* [`transfer`] holds the Szegő and Gesztesy–Zinchenko cocycles, monodromies,
  Lyapunov exponents and the zero-set estimator.
* [`floquet`] covers Floquet blocks, band eigenpairs, band derivatives and
  discriminant spectra of periodic sequences.
* [`spectral_sets`] does exact arithmetic on finite unions of arcs.
* [`weyl`] evaluates Weyl–Titchmarsh coefficients of half-line restrictions.
* [`qwalk`] runs coined quantum walks and their CMV representation.

```
use cmvlab::{coefficients::CoefficientSequence, floquet, C64};

let seq = CoefficientSequence::constant(C64::new(0.5, 0.0))?;
let bands = floquet::periodic_spectrum(&seq, 2, 512)?;
assert!(bands.measure() > 0.0 && bands.measure() < std::f64::consts::TAU);
# Ok::<(), cmvlab::Error>(())
```
*/

pub mod coefficients;
pub mod error;
pub mod floquet;
pub mod linalg;
pub mod operator;
pub mod qwalk;
pub mod spectral_sets;
pub mod transfer;
pub mod weyl;

pub use error::{Error, Result};
pub use linalg::Mat2C;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
