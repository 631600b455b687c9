//! CSV output: comma separated, `.` decimal point, 17 significant digits,
//! header row, LF line endings.

use std::fmt::Write as _;
use std::io::Write;

use crate::fit::DecayCurve;

/// Round-trip exact float formatting (17 significant digits).
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    format!("{v:.16e}")
}

/// Simple CSV builder that owns its text.
#[derive(Debug, Default, Clone)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, fields: &[String]) -> &mut Self {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
        self
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(self.text.as_bytes())
    }
}

/// `n,value,stderr,method` rows.
pub fn curve_csv(curve: &DecayCurve) -> Csv {
    let mut csv = Csv::new(&["n", "value", "stderr", "method"]);
    for p in &curve.points {
        csv.row(&[
            p.n.to_string(),
            fmt_f64(p.value),
            fmt_f64(p.stderr),
            curve.method.clone(),
        ]);
    }
    csv
}

/// One `index,value` column per cell.
pub fn cells_csv(bounds: &[f64], columns: &[(&str, &[f64])]) -> Csv {
    let mut header = vec!["cell", "left", "right"];
    header.extend(columns.iter().map(|c| c.0));
    let mut csv = Csv::new(&header);
    for i in 0..bounds.len() - 1 {
        let mut row = vec![i.to_string(), fmt_f64(bounds[i]), fmt_f64(bounds[i + 1])];
        for (_, col) in columns {
            let mut s = String::new();
            let _ = write!(s, "{}", fmt_f64(col[i]));
            row.push(s);
        }
        csv.row(&row);
    }
    csv
}
