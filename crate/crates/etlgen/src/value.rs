//! Runtime values for the in-memory executor.
//!
//! Numbers are exact decimals (scaled integers), not binary floats, so
//! sums and averages reproduce byte-identically across platforms. Dates
//! are calendar dates without time.

use std::cmp::Ordering;

use chrono::{Datelike, NaiveDate};
use rust_decimal::{Decimal, RoundingStrategy};

/// Fractional digits kept by division and averaging (rounded half-up).
pub const DIV_SCALE: u32 = 6;

/// The column types the pipeline understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DataType {
    Number,
    String,
    Date,
}

impl DataType {
    pub fn name(self) -> &'static str {
        match self {
            DataType::Number => "number",
            DataType::String => "string",
            DataType::Date => "date",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "number" => Some(DataType::Number),
            "string" => Some(DataType::String),
            "date" => Some(DataType::Date),
            _ => None,
        }
    }
}

impl std::fmt::Display for DataType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A cell value. `Null` stands in for missing data of any type.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Number(Decimal),
    String(String),
    Date(NaiveDate),
    Null,
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn data_type(&self) -> Option<DataType> {
        match self {
            Value::Number(_) => Some(DataType::Number),
            Value::String(_) => Some(DataType::String),
            Value::Date(_) => Some(DataType::Date),
            Value::Null => None,
        }
    }

    /// Canonical display: numbers without trailing zeros, dates as
    /// DD/MM/YYYY, null as the empty string.
    pub fn render(&self) -> String {
        match self {
            Value::Number(d) => format_decimal(*d),
            Value::String(s) => s.clone(),
            Value::Date(d) => format_date(*d),
            Value::Null => String::new(),
        }
    }

    /// Total order used for canonical row sorting; nulls sort last,
    /// mixed types fall back to a type-tag order.
    pub fn cmp_canonical(&self, other: &Value) -> Ordering {
        fn tag(v: &Value) -> u8 {
            match v {
                Value::Number(_) => 0,
                Value::String(_) => 1,
                Value::Date(_) => 2,
                Value::Null => 3,
            }
        }
        match (self, other) {
            (Value::Null, Value::Null) => Ordering::Equal,
            (Value::Null, _) => Ordering::Greater,
            (_, Value::Null) => Ordering::Less,
            (Value::Number(a), Value::Number(b)) => a.cmp(b),
            (Value::String(a), Value::String(b)) => a.cmp(b),
            (Value::Date(a), Value::Date(b)) => a.cmp(b),
            _ => tag(self).cmp(&tag(other)),
        }
    }

    /// Equality for grouping: nulls group together, numbers compare
    /// numerically (1.0 groups with 1.00).
    pub fn group_eq(&self, other: &Value) -> bool {
        self.cmp_canonical(other) == Ordering::Equal
    }
}

/// Render a decimal without trailing fraction zeros (`2.50` → `2.5`).
pub fn format_decimal(d: Decimal) -> String {
    d.normalize().to_string()
}

/// Parse a decimal numeral: optional sign, digits, optional fraction.
/// No scientific notation.
pub fn parse_decimal(s: &str) -> Option<Decimal> {
    let rest = s.strip_prefix(['+', '-']).unwrap_or(s);
    let (int, frac) = match rest.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (rest, None),
    };
    if int.is_empty() || !int.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if let Some(f) = frac {
        if f.is_empty() || !f.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
    }
    Decimal::from_str_exact(s).ok()
}

/// Dates are accepted as DD/MM/YYYY or ISO YYYY-MM-DD.
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s, "%d/%m/%Y")
        .or_else(|_| NaiveDate::parse_from_str(s, "%Y-%m-%d"))
        .ok()
}

pub fn format_date(d: NaiveDate) -> String {
    format!("{:02}/{:02}/{:04}", d.day(), d.month(), d.year())
}

/// Division rounded half-up to [`DIV_SCALE`] digits; division by zero
/// is the caller's concern (checked before calling).
pub fn div_rounded(a: Decimal, b: Decimal) -> Decimal {
    (a / b).round_dp_with_strategy(DIV_SCALE, RoundingStrategy::MidpointAwayFromZero)
}

/// English month name with initial capital, January through December.
pub fn month_name(d: NaiveDate) -> &'static str {
    const NAMES: [&str; 12] = [
        "January", "February", "March", "April", "May", "June", "July", "August", "September",
        "October", "November", "December",
    ];
    NAMES[(d.month() - 1) as usize]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_literals() {
        assert_eq!(parse_decimal("100"), Some(Decimal::from(100)));
        assert_eq!(parse_decimal("-2.5").map(format_decimal), Some("-2.5".into()));
        assert_eq!(parse_decimal("1e3"), None);
        assert_eq!(parse_decimal(".5"), None);
        assert_eq!(parse_decimal("5."), None);
        assert_eq!(parse_decimal("2.50").map(format_decimal), Some("2.5".into()));
    }

    #[test]
    fn date_forms() {
        let d = NaiveDate::from_ymd_opt(2010, 11, 15).unwrap();
        assert_eq!(parse_date("15/11/2010"), Some(d));
        assert_eq!(parse_date("2010-11-15"), Some(d));
        assert_eq!(format_date(d), "15/11/2010");
        assert_eq!(month_name(d), "November");
        assert_eq!(parse_date("2010/11/15"), None);
    }

    #[test]
    fn division_rounds_half_up() {
        let q = div_rounded(Decimal::from(10), Decimal::from(3));
        assert_eq!(format_decimal(q), "3.333333");
        let q = div_rounded(Decimal::from(1), Decimal::from(1600000));
        assert_eq!(format_decimal(q), "0.000001");
    }

    #[test]
    fn null_sorts_last() {
        let mut vals = vec![Value::Null, Value::Number(Decimal::from(2)), Value::Number(Decimal::from(1))];
        vals.sort_by(|a, b| a.cmp_canonical(b));
        assert_eq!(vals[0], Value::Number(Decimal::from(1)));
        assert!(vals[2].is_null());
    }
}
