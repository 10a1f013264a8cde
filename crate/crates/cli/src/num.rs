//! Locale-free numeric printing: 12 significant digits, tiny values as `0`.

pub const ZERO_BELOW: f64 = 1e-12;

pub fn clean(v: f64) -> f64 {
    if v.abs() < ZERO_BELOW {
        0.0
    } else {
        v
    }
}

pub fn fmt(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v.abs() < ZERO_BELOW {
        return "0".into();
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim(&format!("{v:.decimals$}")).to_string()
    } else {
        format!("{}e{exp}", trim(mantissa))
    }
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn join(values: &[f64]) -> String {
    values.iter().map(|&v| fmt(v)).collect::<Vec<_>>().join(" ")
}
