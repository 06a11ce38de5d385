//! Model time axis: five-year nodes and annual series derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hours in a (non-leap) year. GW × fraction × this / 1000 gives TWh/yr.
pub const HOURS_PER_YEAR: f64 = 8760.0;

/// Evenly spaced model nodes from `start_year` to `end_year` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub start_year: i32,
    pub end_year: i32,
    pub step: i32,
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid {
            start_year: 2020,
            end_year: 2060,
            step: 5,
        }
    }
}

impl TimeGrid {
    pub fn new(start_year: i32, end_year: i32, step: i32) -> Result<Self> {
        if step <= 0 {
            return Err(Error::validation("step", "must be positive"));
        }
        if start_year >= end_year {
            return Err(Error::validation("end_year", "must be after start_year"));
        }
        if (end_year - start_year) % step != 0 {
            return Err(Error::validation(
                "end_year",
                format!("span {start_year}..{end_year} is not a multiple of {step}"),
            ));
        }
        Ok(TimeGrid {
            start_year,
            end_year,
            step,
        })
    }

    pub fn len(&self) -> usize {
        ((self.end_year - self.start_year) / self.step) as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn years(&self) -> impl Iterator<Item = i32> + '_ {
        (0..self.len()).map(move |i| self.start_year + i as i32 * self.step)
    }

    pub fn year(&self, index: usize) -> i32 {
        self.start_year + index as i32 * self.step
    }

    pub fn index_of(&self, year: i32) -> Option<usize> {
        let off = year - self.start_year;
        if off < 0 || off % self.step != 0 || year > self.end_year {
            None
        } else {
            Some((off / self.step) as usize)
        }
    }

    pub fn contains(&self, year: i32) -> bool {
        self.index_of(year).is_some()
    }

    /// Build a node series from one value per grid node.
    pub fn series(&self, values: impl IntoIterator<Item = f64>) -> NodeSeries {
        NodeSeries {
            points: self.years().zip(values).collect(),
        }
    }

    pub fn constant(&self, value: f64) -> NodeSeries {
        self.series(std::iter::repeat(value))
    }
}

/// Values at model nodes, ordered by year.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NodeSeries {
    points: Vec<(i32, f64)>,
}

impl NodeSeries {
    /// Builds a series, rejecting unsorted or duplicated years.
    pub fn new(mut points: Vec<(i32, f64)>) -> Result<Self> {
        points.sort_by_key(|p| p.0);
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::domain("duplicate year in node series"));
        }
        if points.iter().any(|p| !p.1.is_finite()) {
            return Err(Error::domain("non-finite value in node series"));
        }
        Ok(NodeSeries { points })
    }

    pub fn points(&self) -> &[(i32, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn years(&self) -> impl Iterator<Item = i32> + '_ {
        self.points.iter().map(|p| p.0)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.1)
    }

    pub fn first_year(&self) -> Option<i32> {
        self.points.first().map(|p| p.0)
    }

    pub fn last_year(&self) -> Option<i32> {
        self.points.last().map(|p| p.0)
    }

    /// Value at an exact node year.
    pub fn get(&self, year: i32) -> Option<f64> {
        self.points
            .binary_search_by_key(&year, |p| p.0)
            .ok()
            .map(|i| self.points[i].1)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> NodeSeries {
        NodeSeries {
            points: self.points.iter().map(|&(y, v)| (y, f(v))).collect(),
        }
    }

    /// Combine two series on their common years.
    pub fn zip_with(&self, other: &NodeSeries, f: impl Fn(f64, f64) -> f64) -> NodeSeries {
        NodeSeries {
            points: self
                .points
                .iter()
                .filter_map(|&(y, a)| other.get(y).map(|b| (y, f(a, b))))
                .collect(),
        }
    }

    /// Grid years between the first and last entry that have no value.
    pub fn missing_nodes(&self, grid: &TimeGrid) -> Vec<i32> {
        let (Some(first), Some(last)) = (self.first_year(), self.last_year()) else {
            return Vec::new();
        };
        grid.years()
            .filter(|&y| y >= first && y <= last && self.get(y).is_none())
            .collect()
    }

    /// Years present in the series that do not fall on the grid.
    pub fn off_grid(&self, grid: &TimeGrid) -> Vec<i32> {
        self.years().filter(|&y| !grid.contains(y)).collect()
    }

    /// Piecewise-linear value at an arbitrary (possibly fractional) time.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let first = self.points.first()?;
        let last = self.points.last()?;
        if t < first.0 as f64 || t > last.0 as f64 {
            return None;
        }
        if self.points.len() == 1 {
            return Some(first.1);
        }
        let i = self
            .points
            .partition_point(|p| (p.0 as f64) <= t)
            .clamp(1, self.points.len() - 1);
        let (a, va) = self.points[i - 1];
        let (b, vb) = self.points[i];
        Some(va + (vb - va) * (t - a as f64) / (b - a) as f64)
    }

    /// Linear interpolation onto every calendar year from the first to the last node.
    pub fn interpolate_annual(&self) -> Result<AnnualSeries> {
        if self.points.len() < 2 {
            return Err(Error::EmptySeries(self.points.len()));
        }
        let mut values = Vec::new();
        for w in self.points.windows(2) {
            let (a, va) = w[0];
            let (b, vb) = w[1];
            let span = (b - a) as f64;
            for y in a..b {
                values.push(va + (vb - va) * (y - a) as f64 / span);
            }
        }
        let (_, last) = self.points[self.points.len() - 1];
        values.push(last);
        Ok(AnnualSeries {
            start: self.points[0].0,
            values,
        })
    }
}

/// One value per calendar year, starting at `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnualSeries {
    pub start: i32,
    pub values: Vec<f64>,
}

impl AnnualSeries {
    pub fn end(&self) -> i32 {
        self.start + self.values.len() as i32 - 1
    }

    pub fn get(&self, year: i32) -> Option<f64> {
        if year < self.start {
            return None;
        }
        self.values.get((year - self.start) as usize).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (self.start + i as i32, v))
    }

    /// Sub-range `[from, to]` inclusive.
    pub fn window(&self, from: i32, to: i32) -> Option<AnnualSeries> {
        if from < self.start || to > self.end() || from > to {
            return None;
        }
        let lo = (from - self.start) as usize;
        let hi = (to - self.start) as usize;
        Some(AnnualSeries {
            start: from,
            values: self.values[lo..=hi].to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(points: &[(i32, f64)]) -> NodeSeries {
        NodeSeries::new(points.to_vec()).unwrap()
    }

    #[test]
    fn grid_has_nine_nodes() {
        let g = TimeGrid::default();
        assert_eq!(g.len(), 9);
        assert_eq!(g.index_of(2035), Some(3));
        assert_eq!(g.index_of(2033), None);
        assert!(TimeGrid::new(2020, 2061, 5).is_err());
        assert!(TimeGrid::new(2060, 2020, 5).is_err());
    }

    #[test]
    fn interpolates_between_two_nodes() {
        let a = series(&[(2020, 100.0), (2025, 200.0)])
            .interpolate_annual()
            .unwrap();
        assert_eq!(a.get(2022), Some(140.0));
        assert_eq!(a.end(), 2025);
    }

    #[test]
    fn constant_nodes_stay_constant() {
        let a = series(&[(2020, 5.0), (2025, 5.0), (2030, 5.0)])
            .interpolate_annual()
            .unwrap();
        assert!(a.values.iter().all(|&v| v == 5.0));
        assert_eq!(a.values.len(), 11);
    }

    #[test]
    fn interpolates_fast_generation_nodes() {
        let a = series(&[(2025, 5020.0), (2030, 2550.0)])
            .interpolate_annual()
            .unwrap();
        assert!((a.get(2028).unwrap() - 3538.0).abs() < 1e-9);
    }

    #[test]
    fn single_node_is_rejected() {
        assert!(matches!(
            series(&[(2020, 1.0)]).interpolate_annual(),
            Err(Error::EmptySeries(1))
        ));
    }

    #[test]
    fn missing_interior_node_detected() {
        let g = TimeGrid::default();
        let s = series(&[(2030, 1.0), (2040, 1.0)]);
        assert_eq!(s.missing_nodes(&g), vec![2035]);
    }

    #[test]
    fn duplicate_years_rejected() {
        assert!(NodeSeries::new(vec![(2020, 1.0), (2020, 2.0)]).is_err());
    }
}
