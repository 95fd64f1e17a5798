//! Fixed-precision float formatting shared by every CSV writer.

/// Formats `x` in plain decimal notation with 17 significant digits.
///
/// 17 digits are enough for any `f64` to survive a text round trip, so
/// files written here parse back bit-identically.
pub(crate) fn sig17(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x:?}");
    }
    // The exponent of the value after rounding to 17 digits, which may differ
    // from floor(log10(|x|)) when rounding carries into a new decade.
    let sci = format!("{x:.16e}");
    let exp: i32 = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse().ok())
        .unwrap_or(0);
    if !(-7..=20).contains(&exp) {
        return sci;
    }
    let decimals = (16 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}
