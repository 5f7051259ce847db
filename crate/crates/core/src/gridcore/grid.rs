use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cell {
    Free,
    Obstacle,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellCoord {
    pub col: usize,
    pub row: usize,
}

impl CellCoord {
    pub const fn new(col: usize, row: usize) -> Self {
        CellCoord { col, row }
    }

    /// Chebyshev adjacency, excluding the cell itself.
    pub fn is_adjacent(self, other: CellCoord) -> bool {
        let dc = self.col.abs_diff(other.col);
        let dr = self.row.abs_diff(other.row);
        dc <= 1 && dr <= 1 && (dc + dr) > 0
    }

    pub fn offset(self, dc: i64, dr: i64) -> Option<CellCoord> {
        let col = self.col as i64 + dc;
        let row = self.row as i64 + dr;
        (col >= 0 && row >= 0).then(|| CellCoord::new(col as usize, row as usize))
    }

    /// Euclidean distance between cell centers.
    pub fn distance(self, other: CellCoord) -> f64 {
        let dc = self.col as f64 - other.col as f64;
        let dr = self.row as f64 - other.row as f64;
        dc.hypot(dr)
    }

    pub fn center(self) -> (f64, f64) {
        (self.col as f64 + 0.5, self.row as f64 + 0.5)
    }
}

impl fmt::Display for CellCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.col, self.row)
    }
}

/// Continuous pose in cell units; heading in radians, normalized to `[-π, π)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose {
            x,
            y,
            heading: normalize_angle(heading),
        }
    }

    /// Pose at the center of `cell`.
    pub fn at_cell(cell: CellCoord, heading: f64) -> Self {
        let (x, y) = cell.center();
        Pose::new(x, y, heading)
    }

    /// Cell containing the pose, if the coordinates are non-negative.
    pub fn cell(&self) -> Option<CellCoord> {
        (self.x >= 0.0 && self.y >= 0.0)
            .then(|| CellCoord::new(self.x.floor() as usize, self.y.floor() as usize))
    }
}

pub(crate) fn normalize_angle(a: f64) -> f64 {
    let mut r = (a + PI).rem_euclid(2.0 * PI) - PI;
    if r >= PI {
        r -= 2.0 * PI;
    }
    r
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    cells: Vec<Cell>,
}

impl OccupancyGrid {
    pub fn new(width: usize, height: usize, fill: Cell) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::input(format!("grid dimensions must be positive, got {width}x{height}")));
        }
        Ok(OccupancyGrid {
            width,
            height,
            cells: vec![fill; width * height],
        })
    }

    /// Parses rows given top-down (`#` obstacle, `.` free, `?` unknown).
    pub fn from_ascii(rows: &[&str]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut grid = OccupancyGrid::new(width, height, Cell::Free)?;
        for (i, line) in rows.iter().enumerate() {
            if line.chars().count() != width {
                return Err(Error::input("ragged ascii grid"));
            }
            let row = height - 1 - i;
            for (col, ch) in line.chars().enumerate() {
                let cell = match ch {
                    '#' => Cell::Obstacle,
                    '.' => Cell::Free,
                    '?' => Cell::Unknown,
                    other => return Err(Error::input(format!("unexpected grid character {other:?}"))),
                };
                grid.set(CellCoord::new(col, row), cell);
            }
        }
        Ok(grid)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn contains(&self, c: CellCoord) -> bool {
        c.col < self.width && c.row < self.height
    }

    pub fn contains_signed(&self, col: i64, row: i64) -> bool {
        col >= 0 && row >= 0 && (col as usize) < self.width && (row as usize) < self.height
    }

    #[inline]
    pub fn index(&self, c: CellCoord) -> usize {
        c.row * self.width + c.col
    }

    #[inline]
    pub fn coord(&self, index: usize) -> CellCoord {
        CellCoord::new(index % self.width, index / self.width)
    }

    /// Panics when `c` is out of bounds.
    #[inline]
    pub fn get(&self, c: CellCoord) -> Cell {
        assert!(self.contains(c), "cell {c} outside {}x{} grid", self.width, self.height);
        self.cells[self.index(c)]
    }

    pub fn try_get(&self, c: CellCoord) -> Option<Cell> {
        self.contains(c).then(|| self.cells[self.index(c)])
    }

    #[inline]
    pub fn set(&mut self, c: CellCoord, cell: Cell) {
        let i = self.index(c);
        self.cells[i] = cell;
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn coords(&self) -> impl Iterator<Item = CellCoord> + '_ {
        (0..self.cells.len()).map(|i| self.coord(i))
    }

    #[inline]
    pub fn is_traversable(&self, c: CellCoord, traversable_unknown: bool) -> bool {
        match self.get(c) {
            Cell::Free => true,
            Cell::Unknown => traversable_unknown,
            Cell::Obstacle => false,
        }
    }

    pub fn count(&self, kind: Cell) -> usize {
        self.cells.iter().filter(|&&c| c == kind).count()
    }

    /// Maps each cell state onto a scalar value.
    pub fn to_scalar_map<T: Scalar>(&self, free: T, obstacle: T, unknown: T) -> ScalarMap<T> {
        let values = self
            .cells
            .iter()
            .map(|c| match c {
                Cell::Free => free,
                Cell::Obstacle => obstacle,
                Cell::Unknown => unknown,
            })
            .collect();
        ScalarMap {
            width: self.width,
            height: self.height,
            values,
        }
    }

    pub fn diagonal(&self) -> f64 {
        (self.width as f64).hypot(self.height as f64)
    }

    /// Rows top-down, for debugging output.
    pub fn to_ascii(&self) -> String {
        let mut s = String::with_capacity((self.width + 1) * self.height);
        for row in (0..self.height).rev() {
            for col in 0..self.width {
                s.push(match self.get(CellCoord::new(col, row)) {
                    Cell::Free => '.',
                    Cell::Obstacle => '#',
                    Cell::Unknown => '?',
                });
            }
            s.push('\n');
        }
        s
    }
}

/// Dense per-cell real values, row-major with row 0 at the bottom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarMap<T> {
    width: usize,
    height: usize,
    values: Vec<T>,
}

impl<T: Scalar> ScalarMap<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::input(format!("map dimensions must be positive, got {width}x{height}")));
        }
        Ok(ScalarMap {
            width,
            height,
            values: vec![value; width * height],
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::filled(width, height, T::zero())
    }

    pub fn from_vec(width: usize, height: usize, values: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::shape(format!("{width}x{height}"), format!("{} values", values.len())));
        }
        Ok(ScalarMap { width, height, values })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn contains(&self, c: CellCoord) -> bool {
        c.col < self.width && c.row < self.height
    }

    #[inline]
    pub fn get(&self, c: CellCoord) -> T {
        assert!(self.contains(c), "cell {c} outside {}x{} map", self.width, self.height);
        self.values[c.row * self.width + c.col]
    }

    #[inline]
    pub fn set(&mut self, c: CellCoord, v: T) {
        assert!(self.contains(c), "cell {c} outside {}x{} map", self.width, self.height);
        self.values[c.row * self.width + c.col] = v;
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> ScalarMap<T> {
        ScalarMap {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Element-wise maximum with another map of the same shape.
    pub fn max_with(&mut self, other: &ScalarMap<T>) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::shape(
                format!("{}x{}", self.width, self.height),
                format!("{}x{}", other.width, other.height),
            ));
        }
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            if b > *a {
                *a = b;
            }
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> ScalarMap<U> {
        ScalarMap {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heading_normalization_range() {
        for a in [-7.0, -PI, -0.1, 0.0, PI, 3.5 * PI, 100.0] {
            let n = normalize_angle(a);
            assert!((-PI..PI).contains(&n), "{a} -> {n}");
            assert!(((a - n) / (2.0 * PI)).fract().abs() < 1e-9 || ((a - n) / (2.0 * PI)).fract().abs() > 1.0 - 1e-9);
        }
        assert_eq!(normalize_angle(PI), -PI);
    }

    #[test]
    fn ascii_rows_are_top_down() {
        let g = OccupancyGrid::from_ascii(&["#..", "..?"]).unwrap();
        assert_eq!(g.get(CellCoord::new(0, 1)), Cell::Obstacle);
        assert_eq!(g.get(CellCoord::new(2, 0)), Cell::Unknown);
        assert_eq!(g.to_ascii(), "#..\n..?\n");
    }

    #[test]
    fn zero_sized_grid_rejected() {
        assert!(OccupancyGrid::new(0, 3, Cell::Free).is_err());
        assert!(ScalarMap::<f32>::zeros(3, 0).is_err());
    }

    #[test]
    fn pose_cell_roundtrip() {
        let c = CellCoord::new(4, 7);
        assert_eq!(Pose::at_cell(c, 0.3).cell(), Some(c));
    }
}
