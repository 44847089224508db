//! Unit handling. Everything internal is SI: pressures in Pa, lengths in m,
//! times in s. Configs may carry values as `"1000 d"` / `"4 MPa"` strings or
//! as plain SI numbers; conversion happens once at parse time.

use crate::error::{FracporeError, Result};

pub const DAY: f64 = 86_400.0;
/// 365-day year, the usual reservoir-engineering convention.
pub const YEAR: f64 = 365.0 * DAY;

/// Parses a quantity given either as a plain SI number or as `"<value> <unit>"`.
///
/// Accepted units: Pa, kPa, MPa, GPa (pressure); m, cm, mm (length);
/// s, min, h, d/day/days, yr/year/years (time); plus dimensionless `-`.
pub fn parse_quantity(text: &str) -> Result<f64> {
    let t = text.trim();
    if let Ok(v) = t.parse::<f64>() {
        return Ok(v);
    }
    let (num, unit) = t
        .find(|c: char| c.is_ascii_alphabetic())
        .map(|i| t.split_at(i))
        .ok_or_else(|| FracporeError::Parse(format!("cannot parse quantity '{t}'")))?;
    let v: f64 = num
        .trim()
        .parse()
        .map_err(|_| FracporeError::Parse(format!("bad number in quantity '{t}'")))?;
    Ok(v * unit_factor(unit.trim())?)
}

pub fn unit_factor(unit: &str) -> Result<f64> {
    let f = match unit {
        "" | "-" => 1.0,
        "Pa" => 1.0,
        "kPa" => 1e3,
        "MPa" => 1e6,
        "GPa" => 1e9,
        "m" => 1.0,
        "cm" => 1e-2,
        "mm" => 1e-3,
        "m2" | "m^2" => 1.0,
        "m3" | "m^3" => 1.0,
        "s" => 1.0,
        "min" => 60.0,
        "h" => 3600.0,
        "d" | "day" | "days" => DAY,
        "yr" | "year" | "years" => YEAR,
        "Pa.s" | "Pa*s" | "Pa·s" => 1.0,
        other => {
            return Err(FracporeError::Parse(format!("unknown unit '{other}'")));
        }
    };
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_numbers_pass_through() {
        assert_eq!(parse_quantity("1e5").unwrap(), 1e5);
        assert_eq!(parse_quantity(" -3.5 ").unwrap(), -3.5);
    }

    #[test]
    fn units_convert() {
        assert_eq!(parse_quantity("4 MPa").unwrap(), 4e6);
        assert_eq!(parse_quantity("1000 d").unwrap(), 1000.0 * 86_400.0);
        assert_eq!(parse_quantity("200 yr").unwrap(), 200.0 * 365.0 * 86_400.0);
        assert_eq!(parse_quantity("10mm").unwrap(), 1e-2);
    }

    #[test]
    fn junk_is_rejected() {
        assert!(parse_quantity("fast").is_err());
        assert!(parse_quantity("3 parsec").is_err());
    }
}
