//! Exact rational values and their text forms.
//!
//! All state values, distances, and tolerances are exact rationals;
//! floating point enters only at the logarithm stage of the estimator.

use num_rational::Rational64;
use num_traits::{Signed, ToPrimitive, Zero};

pub type Rat = Rational64;

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(n, d)
}

pub fn rat_zero() -> Rat {
    Rat::zero()
}

pub fn to_f64(r: Rat) -> f64 {
    r.to_f64().expect("i64 rational converts to f64")
}

pub fn abs(r: Rat) -> Rat {
    r.abs()
}

/// Parses `p/q` or a plain integer. Used by structure files, where decimal
/// notation is rejected to keep values exact.
pub fn parse_exact(s: &str) -> Option<Rat> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().ok()?;
        let d: i64 = d.trim().parse().ok()?;
        if d == 0 {
            return None;
        }
        Some(Rat::new(n, d))
    } else {
        let n: i64 = s.parse().ok()?;
        Some(Rat::new(n, 1))
    }
}

/// Parses `p/q`, a plain integer, or a decimal such as `0.05`, expanding
/// the decimal exactly (`0.05` becomes `1/20`). Used by experiment grids.
pub fn parse_number(s: &str) -> Option<Rat> {
    let s = s.trim();
    if s.contains('/') {
        return parse_exact(s);
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        if frac_part.is_empty() || frac_part.len() > 12 {
            return None;
        }
        let negative = int_part.trim_start().starts_with('-');
        let int_val: i64 = if int_part == "-" {
            0
        } else {
            int_part.parse().ok()?
        };
        let frac_val: i64 = frac_part.parse().ok()?;
        if frac_val < 0 {
            return None;
        }
        let denom = 10_i64.checked_pow(frac_part.len() as u32)?;
        let frac = Rat::new(frac_val, denom);
        let whole = Rat::new(int_val, 1);
        Some(if negative { whole - frac } else { whole + frac })
    } else {
        parse_exact(s)
    }
}

/// Canonical text: `p/q`, or just `p` when the denominator is 1.
pub fn fmt_rat(r: Rat) -> String {
    if *r.denom() == 1 {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}
