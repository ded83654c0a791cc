//! Exact scalar coordinates: arbitrary-precision rationals plus parsing,
//! formatting and conversion helpers used throughout the crate.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact scalar: an arbitrary-precision rational number.
///
/// All breakpoints, map values and slopes are stored as `Scalar`s, so
/// evaluation, composition and preimage solves are free of rounding.
pub type Scalar = BigRational;

/// `n/d` as an exact scalar. Panics if `d == 0`.
pub fn ratio(n: i64, d: i64) -> Scalar {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Integer as an exact scalar.
pub fn int(n: i64) -> Scalar {
    BigRational::from_integer(BigInt::from(n))
}

/// Parses `p/q`, an integer, or a decimal literal. Decimals are read
/// exactly as `p/10^k`.
pub fn parse_scalar(text: &str) -> Result<Scalar> {
    let s = text.trim();
    if s.is_empty() {
        return Err(Error::Domain("empty scalar".into()));
    }
    let bad = |s: &str| Error::Domain(format!("cannot parse scalar `{s}`"));
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num.trim().parse().map_err(|_| bad(s))?;
        let d: BigInt = den.trim().parse().map_err(|_| bad(s))?;
        if d.is_zero() {
            return Err(Error::Domain(format!("zero denominator in `{s}`")));
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        let neg = whole.trim_start().starts_with('-');
        let w: BigInt = if whole == "-" || whole.is_empty() {
            BigInt::zero()
        } else {
            whole.parse().map_err(|_| bad(s))?
        };
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad(s));
        }
        let f: BigInt = frac.parse().map_err(|_| bad(s))?;
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let mag = w.abs() * &scale + f;
        let mag = if neg { -mag } else { mag };
        return Ok(BigRational::new(mag, scale));
    }
    let n: BigInt = s.parse().map_err(|_| bad(s))?;
    Ok(BigRational::from_integer(n))
}

/// Formats exactly: integers bare, everything else as `p/q`.
pub fn format_scalar(x: &Scalar) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Rounds to `f64`, falling back to a bit-shifted path when the parts are
/// too large for a direct conversion.
pub fn scalar_to_f64(x: &Scalar) -> f64 {
    if let Some(v) = x.to_f64() {
        if v.is_finite() {
            return v;
        }
    }
    if x.is_zero() {
        return 0.0;
    }
    // Scale so the integer quotient carries ~80 significant bits.
    let nbits = x.numer().bits() as i64;
    let dbits = x.denom().bits() as i64;
    let shift = dbits - nbits + 80;
    let scaled = if shift >= 0 {
        (x.numer() << shift as usize) / x.denom()
    } else {
        x.numer() / (x.denom() << (-shift) as usize)
    };
    let q = scaled.to_f64().unwrap_or(f64::MAX);
    q * 2f64.powi(-shift as i32)
}

/// Exact conversion of a finite `f64` (every finite double is a dyadic
/// rational).
pub fn scalar_from_f64(v: f64) -> Scalar {
    BigRational::from_float(v).expect("finite float")
}

/// Best rational approximation of `v` with error below `tol`, via
/// continued fractions. Used when a float result must be written back
/// into exact map data.
pub fn approx_rational(v: f64, tol: f64) -> Scalar {
    let exact = scalar_from_f64(v);
    if v == v.trunc() {
        return exact;
    }
    let (mut p0, mut q0) = (BigInt::one(), BigInt::zero());
    let (mut p1, mut q1) = (BigInt::from(v.floor() as i64), BigInt::one());
    let mut frac = &exact - BigRational::from_integer(p1.clone());
    for _ in 0..64 {
        let cand = BigRational::new(p1.clone(), q1.clone());
        if (scalar_to_f64(&cand) - v).abs() <= tol {
            return cand;
        }
        if frac.is_zero() {
            break;
        }
        let inv = frac.recip();
        let a = inv.floor().to_integer();
        frac = inv - BigRational::from_integer(a.clone());
        let p2 = &a * &p1 + &p0;
        let q2 = &a * &q1 + &q0;
        p0 = std::mem::replace(&mut p1, p2);
        q0 = std::mem::replace(&mut q1, q2);
    }
    exact
}

/// Rounds `x` to the dyadic grid `m / 2^bits` (nearest, ties away from
/// zero) when its denominator is wider than `bits`; exact values on a
/// coarser grid are returned unchanged.
pub fn round_dyadic(x: &Scalar, bits: u32) -> Scalar {
    if x.denom().bits() <= bits as u64 {
        return x.clone();
    }
    let scaled = x.numer() << bits as usize;
    let (mut q, r) = scaled.div_rem(x.denom());
    // round half away from zero
    if (&r.abs() << 1usize) >= x.denom().abs() {
        if x.numer().sign() == Sign::Minus {
            q -= 1;
        } else {
            q += 1;
        }
    }
    BigRational::new(q, BigInt::one() << bits as usize)
}

/// Integer square root (floor) of a nonnegative integer.
pub fn bigint_sqrt_floor(n: &BigInt) -> BigInt {
    assert!(!n.is_negative(), "sqrt of negative integer");
    if n.is_zero() {
        return BigInt::zero();
    }
    let mut x: BigInt = BigInt::one() << ((n.bits() / 2 + 1) as usize);
    loop {
        let y = (&x + n / &x) >> 1usize;
        if y >= x {
            return x;
        }
        x = y;
    }
}

/// Natural logarithm of a positive rational, robust to huge numerators
/// and denominators.
pub fn ln_scalar(x: &Scalar) -> f64 {
    assert!(x.is_positive(), "log of non-positive scalar");
    let nbits = x.numer().bits() as i64;
    let dbits = x.denom().bits() as i64;
    if nbits < 500 && dbits < 500 {
        return scalar_to_f64(x).ln();
    }
    let shift = nbits - dbits;
    let scaled = if shift >= 0 {
        x / BigRational::from_integer(BigInt::one() << shift as usize)
    } else {
        x * BigRational::from_integer(BigInt::one() << (-shift) as usize)
    };
    scalar_to_f64(&scaled).ln() + shift as f64 * std::f64::consts::LN_2
}
