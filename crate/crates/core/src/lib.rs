//! Exact and empirical arithmetic for the discrepancy of k-free-supported
//! completely multiplicative ±1 functions twisted by real primitive characters.

pub mod arith;
pub mod bounded;
pub mod characters;
pub mod correlation;
pub mod error;
pub mod multfun;
pub mod window;

pub use arith::{
    delta, factor_stats, factorize, kfree_indicator, lcm_first_odds, mobius, nearest_int_dist,
    ExactRational, Factorization, SieveTable,
};
pub use bounded::BoundedValue;
pub use characters::{
    build_real_primitive, char_autocorrelation, char_autocorrelation_closed, chi_star_value,
    ChiStarExtension, DiscriminantSign, RealPrimitiveCharacter,
};
pub use error::{Error, Result};
