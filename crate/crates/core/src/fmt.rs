//! Number formatting shared by the CSV writers.

/// Formats like C's `%.12g`: 12 significant digits, trailing zeros trimmed,
/// scientific notation outside `[1e-4, 1e12)`.
pub fn g12(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    // The exponent after rounding to DIGITS significant digits.
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("rust exponent format");
    let exp: i32 = exp.parse().expect("rust exponent format");
    if exp < -4 || exp >= DIGITS {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::g12;

    #[test]
    fn matches_printf_g() {
        assert_eq!(g12(0.0), "0");
        assert_eq!(g12(1.0), "1");
        assert_eq!(g12(0.31640625), "0.31640625");
        assert_eq!(g12(1.0 / 3.0), "0.333333333333");
        assert_eq!(g12(-2.5), "-2.5");
        assert_eq!(g12(1e6), "1000000");
        assert_eq!(g12(1e12), "1e+12");
        assert_eq!(g12(123456789012.4), "123456789012");
        assert_eq!(g12(0.0001), "0.0001");
        assert_eq!(g12(0.00001234), "1.234e-05");
        assert_eq!(g12(9.9999999999995), "10");
    }

    #[test]
    fn round_trips_to_twelve_digits() {
        for &x in &[std::f64::consts::PI, 0.0020114944203306106, 13.815510557964274, 4.5e-17] {
            let back: f64 = g12(x).parse().unwrap();
            assert!(((back - x) / x).abs() < 1e-11, "{x} -> {back}");
        }
    }
}
