use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::Scheme;
use crate::error::{Error, Result};
use crate::optimizer::PrecoderCase;

pub const CSV_HEADER: &str =
    "snr_db,pd_no_ris,pd_random_ris,pd_optimized,pd_clutter_unaware,realized_pfa,ci_halfwidth";

/// Outcome of one scheme at one sweep point.
#[derive(Debug, Clone, Serialize)]
pub struct SchemePoint {
    pub scheme: Scheme,
    pub threshold: f64,
    pub realized_pfa: f64,
    pub ci_halfwidth: f64,
    pub pd: f64,
    pub case_fired: PrecoderCase,
    pub comm_snr: f64,
    pub sensing_gain: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveRow {
    pub snr_db: f64,
    /// In [`Scheme::ALL`] order.
    pub schemes: Vec<SchemePoint>,
}

impl CurveRow {
    pub fn from_schemes(snr_db: f64, schemes: Vec<SchemePoint>) -> Self {
        Self { snr_db, schemes }
    }

    pub fn get(&self, scheme: Scheme) -> Option<&SchemePoint> {
        self.schemes.iter().find(|s| s.scheme == scheme)
    }

    fn pd_of(&self, scheme: Scheme) -> f64 {
        self.get(scheme).map_or(f64::NAN, |s| s.pd)
    }

    /// Detection rates in [`Scheme::ALL`] order.
    pub fn pd(&self) -> [f64; 4] {
        Scheme::ALL.map(|s| self.pd_of(s))
    }

    /// False-alarm rate and CI half-width reported in the CSV (optimized scheme).
    pub fn reported_pfa(&self) -> (f64, f64) {
        self.get(Scheme::Optimized)
            .map_or((f64::NAN, f64::NAN), |s| (s.realized_pfa, s.ci_halfwidth))
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct CurveTable {
    pub rows: Vec<CurveRow>,
}

impl CurveTable {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let (pfa, half) = row.reported_pfa();
            let mut fields = vec![row.snr_db];
            fields.extend(row.pd());
            fields.extend([pfa, half]);
            let line: Vec<String> = fields.into_iter().map(format_sig).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }
}

/// `%g`-style formatting with 6 significant digits.
pub fn format_sig(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{:.*}", (5 - exp) as usize, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn emit_csv(table: &CurveTable, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &table.to_csv_string())
}

pub fn emit_json(table: &CurveTable, path: impl AsRef<Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(table).expect("table serializes");
    text.push('\n');
    write_file(path.as_ref(), &text)
}
