//! Annual time series, serialised as `{years: [...], values: [...]}`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub years: Vec<i32>,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(years: Vec<i32>, values: Vec<f64>) -> Result<Self> {
        if years.len() != values.len() {
            return Err(Error::validation(format!(
                "series has {} years but {} values",
                years.len(),
                values.len()
            )));
        }
        if years.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("series years must be strictly increasing"));
        }
        Ok(Self { years, values })
    }

    pub fn from_fn(first: i32, last: i32, mut f: impl FnMut(i32) -> f64) -> Self {
        let years: Vec<i32> = (first..=last).collect();
        let values = years.iter().map(|&y| f(y)).collect();
        Self { years, values }
    }

    pub fn constant(first: i32, last: i32, value: f64) -> Self {
        Self::from_fn(first, last, |_| value)
    }

    pub fn len(&self) -> usize {
        self.years.len()
    }

    pub fn is_empty(&self) -> bool {
        self.years.is_empty()
    }

    pub fn first_year(&self) -> Option<i32> {
        self.years.first().copied()
    }

    pub fn last_year(&self) -> Option<i32> {
        self.years.last().copied()
    }

    /// True when years are consecutive integers.
    pub fn is_contiguous(&self) -> bool {
        self.years.windows(2).all(|w| w[1] == w[0] + 1)
    }

    pub fn get(&self, year: i32) -> Option<f64> {
        self.years
            .binary_search(&year)
            .ok()
            .map(|idx| self.values[idx])
    }

    /// Exact lookup; errors when the year is not on the grid.
    pub fn at(&self, year: i32) -> Result<f64> {
        self.get(year).ok_or(Error::OffGrid {
            year,
            first: self.first_year().unwrap_or(0),
            last: self.last_year().unwrap_or(-1),
        })
    }

    /// Linear interpolation in decimal years, held constant beyond either end.
    pub fn interpolate(&self, t: f64) -> f64 {
        let (Some(&first), Some(&last)) = (self.years.first(), self.years.last()) else {
            return 0.0;
        };
        if t <= first as f64 {
            return self.values[0];
        }
        if t >= last as f64 {
            return self.values[self.values.len() - 1];
        }
        let idx = self.years.partition_point(|&y| (y as f64) <= t);
        let (y0, y1) = (self.years[idx - 1] as f64, self.years[idx] as f64);
        let (v0, v1) = (self.values[idx - 1], self.values[idx]);
        v0 + (v1 - v0) * (t - y0) / (y1 - y0)
    }

    /// Policy semantics: zero before the first year, the latest defined value
    /// afterwards (last value beyond the end).
    pub fn policy_value(&self, year: i32) -> f64 {
        match self.years.partition_point(|&y| y <= year) {
            0 => 0.0,
            idx => self.values[idx - 1],
        }
    }

    pub fn map(&self, mut f: impl FnMut(i32, f64) -> f64) -> Self {
        Self {
            years: self.years.clone(),
            values: self
                .years
                .iter()
                .zip(&self.values)
                .map(|(&y, &v)| f(y, v))
                .collect(),
        }
    }
}
