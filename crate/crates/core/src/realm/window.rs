use std::fmt;

use chrono::{DateTime, Datelike, Utc};
use serde::{Deserialize, Serialize};

/// Calendar bucketing scheme, anchored to UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Windowing {
    #[default]
    Yearly,
    Quarterly,
}

impl fmt::Display for Windowing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Windowing::Yearly => "yearly",
            Windowing::Quarterly => "quarterly",
        })
    }
}

impl std::str::FromStr for Windowing {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "yearly" => Ok(Windowing::Yearly),
            "quarterly" => Ok(Windowing::Quarterly),
            other => Err(crate::Error::invalid(format!("unknown windowing {other:?}"))),
        }
    }
}

/// `year * 4 + quarter_index`; consecutive quarters differ by one.
pub fn quarter_ordinal(ts: DateTime<Utc>) -> i64 {
    i64::from(ts.year()) * 4 + i64::from(ts.month0() / 3)
}

/// A half-open range of calendar quarters `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Window {
    start: i64,
    end: i64,
}

impl Window {
    pub fn year(year: i32) -> Self {
        let start = i64::from(year) * 4;
        Window { start, end: start + 4 }
    }

    /// `quarter` is 1-based.
    pub fn quarter(year: i32, quarter: u32) -> Self {
        assert!((1..=4).contains(&quarter), "quarter out of range: {quarter}");
        let start = i64::from(year) * 4 + i64::from(quarter - 1);
        Window { start, end: start + 1 }
    }

    /// `n` quarters starting at the given ordinal.
    pub fn quarters(start: i64, n: i64) -> Self {
        Window { start, end: start + n.max(0) }
    }

    pub fn all() -> Self {
        Window { start: i64::MIN, end: i64::MAX }
    }

    pub fn containing(ts: DateTime<Utc>, windowing: Windowing) -> Self {
        let q = quarter_ordinal(ts);
        match windowing {
            Windowing::Yearly => Window::year(q.div_euclid(4) as i32),
            Windowing::Quarterly => Window::quarters(q, 1),
        }
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn end(&self) -> i64 {
        self.end
    }

    /// Calendar year of the first quarter.
    pub fn year_of_start(&self) -> i32 {
        self.start.div_euclid(4) as i32
    }

    pub fn contains(&self, ts: DateTime<Utc>) -> bool {
        let q = quarter_ordinal(ts);
        self.start <= q && q < self.end
    }
}

fn quarter_label(q: i64) -> String {
    format!("{}-Q{}", q.div_euclid(4), q.rem_euclid(4) + 1)
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.start == i64::MIN && self.end == i64::MAX {
            f.write_str("all")
        } else if self.start.rem_euclid(4) == 0 && self.end - self.start == 4 {
            write!(f, "{}", self.year_of_start())
        } else if self.end - self.start == 1 {
            f.write_str(&quarter_label(self.start))
        } else {
            write!(f, "{}..{}", quarter_label(self.start), quarter_label(self.end - 1))
        }
    }
}
