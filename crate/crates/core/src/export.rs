//! Fixed-format number rendering shared by the CSV and summary writers.

use num_rational::{BigRational, Ratio};
use num_traits::ToPrimitive;

/// Formats with 9 significant digits in plain decimal notation.
pub fn sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x == 0.0 {
            "0".into()
        } else {
            x.to_string()
        };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (8 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding may carry into a new leading digit (9.999999999 -> 10.00000000)
    let digits = s.chars().filter(|c| c.is_ascii_digit()).count();
    let leading_zeros = s
        .trim_start_matches('-')
        .chars()
        .take_while(|&c| c == '0' || c == '.')
        .filter(|&c| c == '0')
        .count();
    if digits - leading_zeros > 9 && decimals > 0 {
        format!("{x:.prec$}", prec = decimals - 1)
    } else {
        s
    }
}

/// `p/q` rendering of an exact rational (`p` when `q = 1`).
pub fn ratio<T: std::fmt::Display + Clone + num_integer::Integer>(r: &Ratio<T>) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn big_ratio_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(sig9(0.853_553_390_593_273_8), "0.853553391");
        assert_eq!(sig9(1.0), "1.00000000");
        assert_eq!(sig9(0.25), "0.250000000");
        assert_eq!(sig9(0.0), "0");
        assert_eq!(sig9(-0.103_553_390_593_273_8), "-0.103553391");
        assert_eq!(sig9(9.999_999_999_9), "10.0000000");
        assert_eq!(sig9(123_456_789_012.0), "123456789012");
        assert_eq!(sig9(1.5e-5), "0.0000150000000");
    }

    #[test]
    fn ratios() {
        assert_eq!(ratio(&Ratio::new(2i64, 8)), "1/4");
        assert_eq!(ratio(&Ratio::new(4i64, 2)), "2");
    }
}
