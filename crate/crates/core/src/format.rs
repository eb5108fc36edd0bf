//! Fixed float rendering shared by every CSV writer.

/// Renders `x` with at most 12 significant digits, using the shortest
/// representation that round-trips the rounded value.
pub fn fmt_f64(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".to_owned();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("scientific float literal");
    let s = format!("{rounded}");
    if s == "-0" {
        "0".to_owned()
    } else {
        s
    }
}

/// Semicolon-joined probability vector, for CSV cells.
pub fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(";")
}
