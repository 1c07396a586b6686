//! Heuristic generalization of dates in standard formats.
//!
//! A parsed date is generalized along a fixed coarsening ladder, starting
//! one level above the input's own specificity:
//!
//! - day+month+year: month+year, season+year, half-of-year, decade part,
//!   century part, ...
//! - month+year: season+year, half-of-year, decade part, century part,
//!   century, ...
//! - bare year: decade part, decade, century part, century, millennium.
//!
//! Every rung denotes an interval of days that contains the previous
//! rung's interval, so each step is a true generalization. Seasons use the
//! Northern-hemisphere meteorological mapping clipped to the calendar
//! year (so the winter rung of a December date covers December only); a
//! summer month, which straddles the two halves of the year, skips to the
//! bare year at the half-of-year level. Decade parts split on the
//! terminal digit (0-3 early, 4-6 mid, 7-9 late), century parts on the
//! in-century year (00-29 early, 30-69 mid, 70-99 late) so that decades
//! never straddle a part boundary. Centuries are colloquial: the 20th
//! century is 1900-1999.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

const MONTHS: [&str; 12] = [
    "January",
    "February",
    "March",
    "April",
    "May",
    "June",
    "July",
    "August",
    "September",
    "October",
    "November",
    "December",
];

/// A calendar date; fields ordered so derived comparison is chronological.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct CivilDate {
    pub year: i32,
    pub month: u8,
    pub day: u8,
}

/// A date span parsed from text, at one of three specificities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParsedDate {
    Full(CivilDate),
    MonthYear { year: i32, month: u8 },
    Year(i32),
}

/// An inclusive interval of days.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DateInterval {
    pub start: CivilDate,
    pub end: CivilDate,
}

impl DateInterval {
    pub fn contains(&self, other: &DateInterval) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    fn years(start: i32, end: i32) -> DateInterval {
        DateInterval {
            start: CivilDate { year: start, month: 1, day: 1 },
            end: CivilDate { year: end, month: 12, day: 31 },
        }
    }
}

/// One rung of the generalization ladder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DateRung {
    pub text: String,
    pub interval: DateInterval,
}

fn is_leap(year: i32) -> bool {
    year % 4 == 0 && (year % 100 != 0 || year % 400 == 0)
}

fn days_in_month(year: i32, month: u8) -> u8 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 => {
            if is_leap(year) {
                29
            } else {
                28
            }
        }
        _ => 0,
    }
}

fn month_index(name: &str) -> Option<u8> {
    let lower: String = name.chars().flat_map(char::to_lowercase).collect();
    let lower = lower.trim_end_matches('.');
    for (i, month) in MONTHS.iter().enumerate() {
        let full: String = month.chars().flat_map(char::to_lowercase).collect();
        if lower == full || (lower.len() == 3 && full.starts_with(lower)) || lower == "sept" && i == 8
        {
            return Some(i as u8 + 1);
        }
    }
    None
}

fn parse_year(s: &str) -> Option<i32> {
    if s.len() == 4 && s.chars().all(|c| c.is_ascii_digit()) {
        let y: i32 = s.parse().ok()?;
        (1000..=2999).contains(&y).then_some(y)
    } else {
        None
    }
}

fn parse_day(s: &str, year: i32, month: u8) -> Option<u8> {
    if s.is_empty() || s.len() > 2 || !s.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let d: u8 = s.parse().ok()?;
    (1..=days_in_month(year, month)).contains(&d).then_some(d)
}

/// Parses the accepted standard formats: `D Month YYYY`, `Month D, YYYY`,
/// `Month YYYY`, `YYYY-MM-DD`, `DD/MM/YYYY` and `YYYY`. Anything else is
/// not parseable and is routed to the model instead.
pub fn parse_date(text: &str) -> Option<ParsedDate> {
    let trimmed = text.trim();
    let tokens: Vec<&str> = trimmed.split_whitespace().collect();
    match tokens.as_slice() {
        [year] => {
            if let Some(y) = parse_year(year) {
                return Some(ParsedDate::Year(y));
            }
            parse_dashed(year).or_else(|| parse_slashed(year))
        }
        [month, year] => {
            let m = month_index(month)?;
            let y = parse_year(year)?;
            Some(ParsedDate::MonthYear { year: y, month: m })
        }
        [a, b, year_tok] => {
            let y = parse_year(year_tok)?;
            if let Some(m) = month_index(a) {
                // Month D, YYYY
                let day_tok = b.trim_end_matches(',');
                let d = parse_day(day_tok, y, m)?;
                if !b.ends_with(',') {
                    return None;
                }
                Some(ParsedDate::Full(CivilDate { year: y, month: m, day: d }))
            } else {
                // D Month YYYY
                let m = month_index(b)?;
                let d = parse_day(a, y, m)?;
                Some(ParsedDate::Full(CivilDate { year: y, month: m, day: d }))
            }
        }
        _ => None,
    }
}

fn parse_dashed(s: &str) -> Option<ParsedDate> {
    // YYYY-MM-DD
    let mut parts = s.split('-');
    let y = parse_year(parts.next()?)?;
    let m: u8 = parts.next()?.parse().ok()?;
    if !(1..=12).contains(&m) {
        return None;
    }
    let d = parse_day(parts.next()?, y, m)?;
    if parts.next().is_some() {
        return None;
    }
    Some(ParsedDate::Full(CivilDate { year: y, month: m, day: d }))
}

fn parse_slashed(s: &str) -> Option<ParsedDate> {
    // DD/MM/YYYY
    let mut parts = s.split('/');
    let d_tok = parts.next()?;
    let m: u8 = parts.next()?.parse().ok()?;
    if !(1..=12).contains(&m) {
        return None;
    }
    let y = parse_year(parts.next()?)?;
    if parts.next().is_some() {
        return None;
    }
    let d = parse_day(d_tok, y, m)?;
    Some(ParsedDate::Full(CivilDate { year: y, month: m, day: d }))
}

/// The interval of days the parsed date itself denotes.
pub fn denoted_interval(date: &ParsedDate) -> DateInterval {
    match *date {
        ParsedDate::Full(d) => DateInterval { start: d, end: d },
        ParsedDate::MonthYear { year, month } => month_interval(year, month),
        ParsedDate::Year(y) => DateInterval::years(y, y),
    }
}

fn month_interval(year: i32, month: u8) -> DateInterval {
    DateInterval {
        start: CivilDate { year, month, day: 1 },
        end: CivilDate { year, month, day: days_in_month(year, month) },
    }
}

fn month_year_rung(year: i32, month: u8) -> DateRung {
    DateRung {
        text: format!("{} {year}", MONTHS[month as usize - 1]),
        interval: month_interval(year, month),
    }
}

/// Meteorological season clipped to the calendar year: December maps to a
/// December-only winter so the rung stays inside its year.
fn season_rung(year: i32, month: u8) -> DateRung {
    let (name, lo, hi) = match month {
        3..=5 => ("spring", 3, 5),
        6..=8 => ("summer", 6, 8),
        9..=11 => ("autumn", 9, 11),
        12 => ("winter", 12, 12),
        _ => ("winter", 1, 2),
    };
    DateRung {
        text: format!("{name} {year}"),
        interval: DateInterval {
            start: CivilDate { year, month: lo, day: 1 },
            end: CivilDate { year, month: hi, day: days_in_month(year, hi) },
        },
    }
}

/// The half of the year containing the season, or the bare year when the
/// season straddles both halves (summer).
fn half_rung(year: i32, month: u8) -> DateRung {
    let season = season_rung(year, month);
    if season.interval.end.month <= 6 {
        DateRung {
            text: format!("the first half of {year}"),
            interval: DateInterval {
                start: CivilDate { year, month: 1, day: 1 },
                end: CivilDate { year, month: 6, day: 30 },
            },
        }
    } else if season.interval.start.month >= 7 {
        DateRung {
            text: format!("the second half of {year}"),
            interval: DateInterval {
                start: CivilDate { year, month: 7, day: 1 },
                end: CivilDate { year, month: 12, day: 31 },
            },
        }
    } else {
        year_rung(year)
    }
}

fn year_rung(year: i32) -> DateRung {
    DateRung { text: year.to_string(), interval: DateInterval::years(year, year) }
}

fn part_name(lo: u8) -> &'static str {
    match lo {
        0 => "early",
        1 => "mid",
        _ => "late",
    }
}

fn decade_part_rung(year: i32) -> DateRung {
    let decade = year / 10 * 10;
    let (idx, lo, hi) = match year % 10 {
        0..=3 => (0, 0, 3),
        4..=6 => (1, 4, 6),
        _ => (2, 7, 9),
    };
    DateRung {
        text: format!("the {} {decade}s", part_name(idx)),
        interval: DateInterval::years(decade + lo, decade + hi),
    }
}

fn decade_rung(year: i32) -> DateRung {
    let decade = year / 10 * 10;
    DateRung {
        text: format!("the {decade}s"),
        interval: DateInterval::years(decade, decade + 9),
    }
}

fn ordinal(n: i32) -> String {
    let suffix = match (n % 10, n % 100) {
        (1, 11) | (2, 12) | (3, 13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    };
    format!("{n}{suffix}")
}

fn century_part_rung(year: i32) -> DateRung {
    let century = year / 100;
    let (idx, lo, hi) = match year % 100 {
        0..=29 => (0, 0, 29),
        30..=69 => (1, 30, 69),
        _ => (2, 70, 99),
    };
    DateRung {
        text: format!("the {} {} century", part_name(idx), ordinal(century + 1)),
        interval: DateInterval::years(century * 100 + lo, century * 100 + hi),
    }
}

fn century_rung(year: i32) -> DateRung {
    let century = year / 100;
    DateRung {
        text: format!("the {} century", ordinal(century + 1)),
        interval: DateInterval::years(century * 100, century * 100 + 99),
    }
}

fn millennium_rung(year: i32) -> DateRung {
    let millennium = year / 1000;
    DateRung {
        text: format!("the {} millennium", ordinal(millennium + 1)),
        interval: DateInterval::years(millennium * 1000, millennium * 1000 + 999),
    }
}

/// The generalization ladder starting one level above the input's own
/// specificity. Returns `None` when fewer than `count` rungs exist.
pub fn date_ladder(date: &ParsedDate, count: usize) -> Option<Vec<DateRung>> {
    let rungs: Vec<DateRung> = match *date {
        ParsedDate::Full(d) => [
            month_year_rung(d.year, d.month),
            season_rung(d.year, d.month),
            half_rung(d.year, d.month),
            decade_part_rung(d.year),
            century_part_rung(d.year),
            century_rung(d.year),
            millennium_rung(d.year),
        ]
        .into_iter()
        .collect(),
        ParsedDate::MonthYear { year, month } => [
            season_rung(year, month),
            half_rung(year, month),
            decade_part_rung(year),
            century_part_rung(year),
            century_rung(year),
            millennium_rung(year),
        ]
        .into_iter()
        .collect(),
        ParsedDate::Year(year) => [
            decade_part_rung(year),
            decade_rung(year),
            century_part_rung(year),
            century_rung(year),
            millennium_rung(year),
        ]
        .into_iter()
        .collect(),
    };
    if count > rungs.len() {
        return None;
    }
    Some(rungs.into_iter().take(count).collect())
}
