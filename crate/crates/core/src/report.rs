//! Bound reports: exact left-hand sides against bound shapes, with the
//! unspecified absolute constant fitted over the grid.

use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;
use std::io;

/// Which way the inequality points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// `lhs <= C * rhs_shape`; the fitted constant is the max ratio.
    Upper,
    /// `lhs >= c * rhs_shape`; the fitted constant is the min ratio.
    Lower,
}

/// Ordered named parameters of one grid point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params(pub Vec<(String, f64)>);

impl Params {
    pub fn new() -> Self {
        Params(Vec::new())
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.0.push((name.to_string(), value));
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

impl Serialize for Params {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridRow {
    pub params: Params,
    pub lhs: f64,
    pub rhs_shape: f64,
    /// lhs / rhs_shape, evaluated in log space when the row was built from logs.
    pub ratio: f64,
    /// Inside the smallness region the inequality is claimed for.
    pub admissible: bool,
    /// Reason the row is left out of fitting, e.g. an unattainable k.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excluded: Option<String>,
}

impl GridRow {
    pub fn new(params: Params, lhs: f64, rhs_shape: f64) -> Self {
        let ratio = if lhs == 0.0 {
            0.0
        } else if rhs_shape == 0.0 {
            f64::INFINITY
        } else {
            lhs / rhs_shape
        };
        GridRow {
            params,
            lhs,
            rhs_shape,
            ratio,
            admissible: true,
            excluded: None,
        }
    }

    /// Builds the row from natural logs of both sides so the ratio survives
    /// underflow of either side.
    pub fn from_logs(params: Params, ln_lhs: f64, ln_rhs: f64) -> Self {
        let ratio = if ln_lhs == f64::NEG_INFINITY {
            0.0
        } else {
            (ln_lhs - ln_rhs).exp()
        };
        GridRow {
            params,
            lhs: ln_lhs.exp(),
            rhs_shape: ln_rhs.exp(),
            ratio,
            admissible: true,
            excluded: None,
        }
    }

    pub fn admissible(mut self, yes: bool) -> Self {
        self.admissible = yes;
        self
    }

    pub fn exclude(mut self, why: impl Into<String>) -> Self {
        self.excluded = Some(why.into());
        self
    }

    fn counts(&self) -> bool {
        self.admissible && self.excluded.is_none()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub id: String,
    pub direction: Direction,
    pub rows: Vec<GridRow>,
    /// Max (upper) or min (lower) of lhs/rhs_shape over admissible rows.
    pub fitted_c: Option<f64>,
    pub budget: f64,
    /// Absolute allowance on the comparison for float round-off.
    pub tolerance: f64,
    pub pass: bool,
    pub worst_point: Option<Params>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl BoundReport {
    pub fn new(id: impl Into<String>, direction: Direction) -> Self {
        BoundReport {
            id: id.into(),
            direction,
            rows: Vec::new(),
            fitted_c: None,
            budget: 1.0,
            tolerance: 0.0,
            pass: true,
            worst_point: None,
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: GridRow) {
        self.rows.push(row);
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    /// Fits the constant and decides pass/fail against `budget`.
    pub fn finish(mut self, budget: f64, tolerance: f64) -> Self {
        self.budget = budget;
        self.tolerance = tolerance;
        self.refit();
        self
    }

    /// Re-evaluates pass/fail against a different budget.
    pub fn with_budget(mut self, budget: f64) -> Self {
        self.budget = budget;
        self.refit();
        self
    }

    fn refit(&mut self) {
        let better = |a: f64, b: f64| match self.direction {
            Direction::Upper => a > b,
            Direction::Lower => a < b,
        };
        let mut best: Option<(f64, usize)> = None;
        for (i, row) in self.rows.iter().enumerate().filter(|(_, r)| r.counts()) {
            match best {
                Some((b, _)) if !better(row.ratio, b) && !row.ratio.is_nan() => {}
                _ => best = Some((row.ratio, i)),
            }
        }
        self.fitted_c = best.map(|(c, _)| c);
        self.worst_point = best.map(|(_, i)| self.rows[i].params.clone());
        self.pass = match (self.fitted_c, self.direction) {
            (None, _) => true,
            (Some(c), Direction::Upper) => c.is_finite() && c <= self.budget + self.tolerance,
            (Some(c), Direction::Lower) => c >= self.budget - self.tolerance,
        };
    }

    pub fn violations(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.counts())
            .filter(|r| match self.direction {
                Direction::Upper => !(r.ratio <= self.budget + self.tolerance),
                Direction::Lower => !(r.ratio >= self.budget - self.tolerance),
            })
            .count()
    }

    pub fn admissible_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.counts()).count()
    }

    /// One row per grid point: the parameters, then lhs, rhs_shape, ratio.
    pub fn write_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        write_reports_csv(std::slice::from_ref(self), out)
    }
}

/// Several inequalities verified together for one subject.
#[derive(Debug, Clone, Serialize)]
pub struct ReportSet {
    pub subject: String,
    pub params: Params,
    pub reports: Vec<BoundReport>,
}

impl ReportSet {
    pub fn new(subject: impl Into<String>, params: Params) -> Self {
        ReportSet {
            subject: subject.into(),
            params,
            reports: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }

    pub fn get(&self, id: &str) -> Option<&BoundReport> {
        self.reports.iter().find(|r| r.id == id)
    }

    pub fn with_budget(mut self, budget: f64) -> Self {
        self.reports = self
            .reports
            .into_iter()
            .map(|r| r.with_budget(budget))
            .collect();
        self
    }

    /// All reports under one header; parameter columns are the union.
    pub fn write_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        write_reports_csv(&self.reports, out)
    }
}

fn write_reports_csv<W: io::Write>(reports: &[BoundReport], out: W) -> csv::Result<()> {
    let mut names: Vec<&str> = Vec::new();
    for row in reports.iter().flat_map(|r| &r.rows) {
        for (n, _) in &row.params.0 {
            if !names.contains(&n.as_str()) {
                names.push(n);
            }
        }
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = vec!["id"];
    header.extend(&names);
    header.extend(["lhs", "rhs_shape", "ratio", "admissible", "excluded"]);
    w.write_record(&header)?;
    for r in reports {
        for row in &r.rows {
            let mut rec = vec![r.id.clone()];
            for n in &names {
                rec.push(row.params.get(n).map(fmt_num).unwrap_or_default());
            }
            rec.push(fmt_num(row.lhs));
            rec.push(fmt_num(row.rhs_shape));
            rec.push(fmt_num(row.ratio));
            rec.push(row.admissible.to_string());
            rec.push(row.excluded.clone().unwrap_or_default());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Shortest round-trip formatting; infinities spelled out.
pub fn fmt_num(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:?}")
    }
}
