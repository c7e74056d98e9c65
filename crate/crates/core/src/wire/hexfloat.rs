//! IEEE-754 binary64 hexadecimal literals (`0x1.999999999999ap-4`).
//!
//! Formatting is canonical: the mantissa is printed with trailing zero
//! digits removed, normals as `0x1.…p±e`, subnormals as `0x0.…p-1022`,
//! zero as `0x0p+0`. Parsing accepts exactly that canonical form, so a
//! decoded value always re-encodes to the same bytes.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HexFloatError {
    #[error("non-finite value {0} cannot be encoded")]
    NonFinite(String),
    #[error("malformed hex float literal {0:?}")]
    Malformed(String),
}

const MANT_BITS: u32 = 52;
const MANT_MASK: u64 = (1 << MANT_BITS) - 1;
const EXP_BIAS: i64 = 1023;

pub fn format(v: f64) -> Result<String, HexFloatError> {
    if !v.is_finite() {
        return Err(HexFloatError::NonFinite(v.to_string()));
    }
    let bits = v.to_bits();
    let mut out = String::with_capacity(24);
    if bits >> 63 == 1 {
        out.push('-');
    }
    let exp = ((bits >> MANT_BITS) & 0x7ff) as i64;
    let mant = bits & MANT_MASK;
    if exp == 0 && mant == 0 {
        out.push_str("0x0p+0");
        return Ok(out);
    }
    let (lead, e) = if exp == 0 { ('0', 1 - EXP_BIAS) } else { ('1', exp - EXP_BIAS) };
    out.push_str("0x");
    out.push(lead);
    if mant != 0 {
        let digits = format!("{mant:013x}");
        out.push('.');
        out.push_str(digits.trim_end_matches('0'));
    }
    write!(out, "p{}{}", if e < 0 { '-' } else { '+' }, e.abs()).expect("write to string");
    Ok(out)
}

pub fn parse(s: &str) -> Result<f64, HexFloatError> {
    let bad = || HexFloatError::Malformed(s.to_string());
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let body = body.strip_prefix("0x").ok_or_else(bad)?;
    let (mantissa, exponent) = body.split_once('p').ok_or_else(bad)?;
    let (lead, frac) = match mantissa.split_once('.') {
        Some((l, f)) => {
            if f.is_empty() || f.len() > 13 || f.ends_with('0') {
                return Err(bad());
            }
            (l, f)
        }
        None => (mantissa, ""),
    };
    let (sign, digits) = match exponent.as_bytes().first() {
        Some(b'+') => (1i64, &exponent[1..]),
        Some(b'-') => (-1i64, &exponent[1..]),
        _ => return Err(bad()),
    };
    if digits.is_empty()
        || !digits.bytes().all(|b| b.is_ascii_digit())
        || (digits.len() > 1 && digits.starts_with('0'))
    {
        return Err(bad());
    }
    let e: i64 = sign * digits.parse::<i64>().map_err(|_| bad())?;
    if !frac.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase()) {
        return Err(bad());
    }
    let mut mant = if frac.is_empty() {
        0
    } else {
        u64::from_str_radix(frac, 16).map_err(|_| bad())?
    };
    mant <<= 4 * (13 - frac.len() as u32);
    let exp_bits = match lead {
        "1" => {
            if !(1 - EXP_BIAS..=EXP_BIAS).contains(&e) {
                return Err(bad());
            }
            (e + EXP_BIAS) as u64
        }
        "0" => {
            let zero = mant == 0 && e == 0 && frac.is_empty();
            if !(zero || (mant != 0 && e == 1 - EXP_BIAS)) {
                return Err(bad());
            }
            0
        }
        _ => return Err(bad()),
    };
    let bits = (u64::from(neg) << 63) | (exp_bits << MANT_BITS) | mant;
    Ok(f64::from_bits(bits))
}

/// Serde adapter storing an `f64` as a hex-float string.
pub mod serde_f64 {
    use serde::{de::Error as _, ser::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format(*v).map_err(S::Error::custom)?)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let s = String::deserialize(d)?;
        super::parse(&s).map_err(D::Error::custom)
    }
}

/// Serde adapter for fixed-size arrays of hex-float strings.
/// Optional real as a hex-float string or null.
pub mod serde_option_f64 {
    use serde::{de::Error as _, ser::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => s.serialize_str(&super::format(*v).map_err(S::Error::custom)?),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| super::parse(&s).map_err(D::Error::custom))
            .transpose()
    }
}

pub mod serde_array {
    use serde::{
        de::Error as _, ser::Error as _, ser::SerializeTuple, Deserialize, Deserializer,
        Serializer,
    };

    pub fn serialize<S: Serializer, const N: usize>(v: &[f64; N], s: S) -> Result<S::Ok, S::Error> {
        let mut t = s.serialize_tuple(N)?;
        for x in v {
            t.serialize_element(&super::format(*x).map_err(S::Error::custom)?)?;
        }
        t.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>, const N: usize>(
        d: D,
    ) -> Result<[f64; N], D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        if raw.len() != N {
            return Err(D::Error::invalid_length(raw.len(), &"fixed-size real array"));
        }
        let mut out = [0.0; N];
        for (o, s) in out.iter_mut().zip(&raw) {
            *o = super::parse(s).map_err(D::Error::custom)?;
        }
        Ok(out)
    }
}

/// Serde adapter for variable-length real vectors.
pub mod serde_vec {
    use serde::{de::Error as _, ser::Error as _, ser::SerializeSeq, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut t = s.serialize_seq(Some(v.len()))?;
        for x in v {
            t.serialize_element(&super::format(*x).map_err(S::Error::custom)?)?;
        }
        t.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| super::parse(s).map_err(D::Error::custom))
            .collect()
    }
}
