//! # hullconc
//!
//! Convex distance `D(x, A)`, the convex-hull cost functional `F_ψ(x, A)` and
//! the concentration inequalities they satisfy, on finite product spaces.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`product_space`] | alphabets, points, sets, product measures, weighted Hamming distances |
//! | [`psi`] | the quadratic and `ψ_c` cost families |
//! | [`g_transform`] | `G(η)`, `g(η)` and concavity certificates |
//! | [`hull`] | conditional-gradient solver over `conv(h(x, A))` with exact oracles |
//! | [`verify`] | exact-enumeration and Monte Carlo inequality checks |
//!
//! ```
//! use hullconc::product_space::{Alphabet, Point, PointSet};
//! use hullconc::hull::{distance_d, DEFAULT_TOL};
//!
//! let alphabet = Alphabet::uniform(3, 2).unwrap();
//! let a = PointSet::from_symbols(alphabet, vec![vec![1, 1, 1]]).unwrap();
//! let x = Point::from_symbols(vec![0, 0, 0]);
//! let d = distance_d(&x, &a, DEFAULT_TOL).unwrap();
//! assert!((d - 3f64.sqrt()).abs() < 1e-9);
//! ```

pub mod error;
pub mod g_transform;
pub mod hull;
pub mod numeric;
pub mod product_space;
pub mod psi;
pub mod verify;

pub use error::{Error, Result};
