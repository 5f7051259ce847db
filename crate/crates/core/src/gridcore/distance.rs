use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::ops::Add;

use serde::{Deserialize, Serialize};

use super::grid::{CellCoord, OccupancyGrid, ScalarMap};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Neighbor expansion order: E, NE, N, NW, W, SW, S, SE as `(dcol, drow)`.
pub const NEIGHBOR_ORDER: [(i64, i64); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

/// Exact 8-connected path length `axial + diagonal·√2`.
///
/// Because √2 is irrational, two costs are equal only when both counts match,
/// so comparisons never depend on floating point rounding.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathCost {
    pub axial: u32,
    pub diagonal: u32,
}

impl PathCost {
    pub const ZERO: PathCost = PathCost { axial: 0, diagonal: 0 };
    pub const AXIAL: PathCost = PathCost { axial: 1, diagonal: 0 };
    pub const DIAGONAL: PathCost = PathCost { axial: 0, diagonal: 1 };

    /// Octile distance between two cells.
    pub fn octile(a: CellCoord, b: CellCoord) -> PathCost {
        let dc = a.col.abs_diff(b.col) as u32;
        let dr = a.row.abs_diff(b.row) as u32;
        let (lo, hi) = if dc < dr { (dc, dr) } else { (dr, dc) };
        PathCost {
            axial: hi - lo,
            diagonal: lo,
        }
    }

    pub fn step(dc: i64, dr: i64) -> PathCost {
        if dc != 0 && dr != 0 {
            PathCost::DIAGONAL
        } else {
            PathCost::AXIAL
        }
    }

    pub fn value<T: Scalar>(self) -> T {
        T::lit(self.axial as f64) + T::lit(self.diagonal as f64) * T::SQRT_2()
    }
}

impl Add for PathCost {
    type Output = PathCost;

    fn add(self, rhs: PathCost) -> PathCost {
        PathCost {
            axial: self.axial + rhs.axial,
            diagonal: self.diagonal + rhs.diagonal,
        }
    }
}

impl Ord for PathCost {
    fn cmp(&self, other: &Self) -> Ordering {
        // Compare da against dd·√2 using integers only.
        let da = self.axial as i64 - other.axial as i64;
        let dd = other.diagonal as i64 - self.diagonal as i64;
        match (da.signum(), dd.signum()) {
            (0, 0) => Ordering::Equal,
            (a, d) if a <= 0 && d >= 0 => Ordering::Less,
            (a, d) if a >= 0 && d <= 0 => Ordering::Greater,
            (-1, -1) => (dd * dd * 2).cmp(&(da * da)),
            _ => (da * da).cmp(&(dd * dd * 2)),
        }
    }
}

impl PartialOrd for PathCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn diagonal_allowed(grid: &OccupancyGrid, from: CellCoord, dc: i64, dr: i64, traversable_unknown: bool) -> bool {
    if dc == 0 || dr == 0 {
        return true;
    }
    // No corner cutting: both orthogonal neighbours must be passable.
    let a = CellCoord::new((from.col as i64 + dc) as usize, from.row);
    let b = CellCoord::new(from.col, (from.row as i64 + dr) as usize);
    grid.is_traversable(a, traversable_unknown) && grid.is_traversable(b, traversable_unknown)
}

pub(crate) fn neighbors(
    grid: &OccupancyGrid,
    c: CellCoord,
    traversable_unknown: bool,
) -> impl Iterator<Item = (CellCoord, PathCost)> + '_ {
    NEIGHBOR_ORDER.iter().filter_map(move |&(dc, dr)| {
        let col = c.col as i64 + dc;
        let row = c.row as i64 + dr;
        if !grid.contains_signed(col, row) {
            return None;
        }
        let n = CellCoord::new(col as usize, row as usize);
        (grid.is_traversable(n, traversable_unknown) && diagonal_allowed(grid, c, dc, dr, traversable_unknown))
            .then(|| (n, PathCost::step(dc, dr)))
    })
}

/// Exact multi-source shortest path costs; `None` marks unreachable or
/// untraversable cells.
pub fn distance_costs(
    grid: &OccupancyGrid,
    sources: &[CellCoord],
    traversable_unknown: bool,
) -> Result<Vec<Option<PathCost>>> {
    if sources.is_empty() {
        return Err(Error::input("distance field needs at least one source"));
    }
    if let Some(bad) = sources.iter().find(|s| !grid.contains(**s)) {
        return Err(Error::input(format!("source {bad} outside grid")));
    }
    let mut costs: Vec<Option<PathCost>> = vec![None; grid.width() * grid.height()];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        if grid.is_traversable(s, traversable_unknown) {
            let i = grid.index(s);
            costs[i] = Some(PathCost::ZERO);
            heap.push(Reverse((PathCost::ZERO, i)));
        }
    }
    while let Some(Reverse((cost, i))) = heap.pop() {
        if costs[i].is_some_and(|c| c < cost) {
            continue;
        }
        let here = grid.coord(i);
        for (n, step) in neighbors(grid, here, traversable_unknown) {
            let j = grid.index(n);
            let next = cost + step;
            if costs[j].is_none_or(|c| next < c) {
                costs[j] = Some(next);
                heap.push(Reverse((next, j)));
            }
        }
    }
    Ok(costs)
}

/// Shortest 8-connected path cost from the nearest source, as a map.
/// Untraversable and unreachable cells hold `T::max_value()`.
pub fn distance_field<T: Scalar>(
    grid: &OccupancyGrid,
    sources: &[CellCoord],
    traversable_unknown: bool,
) -> Result<ScalarMap<T>> {
    let costs = distance_costs(grid, sources, traversable_unknown)?;
    let values = costs
        .into_iter()
        .map(|c| c.map_or(T::max_value(), PathCost::value))
        .collect();
    ScalarMap::from_vec(grid.width(), grid.height(), values)
}

/// Deterministic shortest path from `from` to `to`, inclusive of both ends.
/// Returns `Ok(None)` when `to` cannot be reached.
pub fn shortest_path(
    grid: &OccupancyGrid,
    from: CellCoord,
    to: CellCoord,
    traversable_unknown: bool,
) -> Result<Option<Vec<CellCoord>>> {
    if !grid.contains(from) || !grid.contains(to) {
        return Err(Error::input(format!("path endpoints {from} -> {to} outside grid")));
    }
    if !grid.is_traversable(from, traversable_unknown) {
        return Err(Error::input(format!("path start {from} is not traversable")));
    }
    if !grid.is_traversable(to, traversable_unknown) {
        return Ok(None);
    }
    let costs = distance_costs(grid, &[to], traversable_unknown)?;
    let Some(mut remaining) = costs[grid.index(from)] else {
        return Ok(None);
    };
    let mut path = vec![from];
    let mut here = from;
    while here != to {
        // Descend the field from the goal; first neighbour in expansion
        // order that lies on a geodesic wins.
        let (next, rest) = neighbors(grid, here, traversable_unknown)
            .find_map(|(n, step)| {
                let c = costs[grid.index(n)]?;
                (c + step == remaining).then_some((n, c))
            })
            .expect("distance field is consistent");
        path.push(next);
        here = next;
        remaining = rest;
    }
    Ok(Some(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridcore::Cell;
    use proptest::prelude::*;

    fn cost(a: u32, d: u32) -> PathCost {
        PathCost { axial: a, diagonal: d }
    }

    #[test]
    fn path_cost_ordering_matches_reals() {
        let samples: Vec<PathCost> = (0..8).flat_map(|a| (0..8).map(move |d| cost(a, d))).collect();
        for &x in &samples {
            for &y in &samples {
                let fx: f64 = x.value();
                let fy: f64 = y.value();
                let expected = if x == y { Ordering::Equal } else { fx.partial_cmp(&fy).unwrap() };
                assert_eq!(x.cmp(&y), expected, "{x:?} vs {y:?}");
            }
        }
    }

    #[test]
    fn center_source_on_free_square() {
        let g = OccupancyGrid::new(3, 3, Cell::Free).unwrap();
        let d: ScalarMap<f64> = distance_field(&g, &[CellCoord::new(1, 1)], false).unwrap();
        assert_eq!(d.get(CellCoord::new(1, 1)), 0.0);
        for corner in [(0, 0), (2, 0), (0, 2), (2, 2)] {
            assert_eq!(d.get(CellCoord::new(corner.0, corner.1)), std::f64::consts::SQRT_2);
        }
        assert_eq!(d.get(CellCoord::new(1, 0)), 1.0);
    }

    #[test]
    fn obstacles_and_unknown_marked_unreachable() {
        let g = OccupancyGrid::from_ascii(&["..?", ".#.", "..."]).unwrap();
        let d: ScalarMap<f32> = distance_field(&g, &[CellCoord::new(0, 0)], false).unwrap();
        assert_eq!(d.get(CellCoord::new(1, 1)), f32::MAX);
        assert_eq!(d.get(CellCoord::new(2, 2)), f32::MAX);
        let d: ScalarMap<f32> = distance_field(&g, &[CellCoord::new(0, 0)], true).unwrap();
        assert!(d.get(CellCoord::new(2, 2)) < 5.0);
    }

    #[test]
    fn corner_cutting_forbidden() {
        // Diagonal squeeze between (1,0) and (0,1) is blocked.
        let g = OccupancyGrid::from_ascii(&["#.", ".#"]).unwrap();
        let d: ScalarMap<f64> = distance_field(&g, &[CellCoord::new(0, 0)], false).unwrap();
        assert_eq!(d.get(CellCoord::new(1, 1)), f64::MAX);
    }

    #[test]
    fn input_errors() {
        let g = OccupancyGrid::new(3, 3, Cell::Free).unwrap();
        assert!(distance_field::<f32>(&g, &[], false).is_err());
        assert!(distance_field::<f32>(&g, &[CellCoord::new(3, 0)], false).is_err());
        let blocked = OccupancyGrid::from_ascii(&["#.."]).unwrap();
        assert!(shortest_path(&blocked, CellCoord::new(0, 0), CellCoord::new(2, 0), false).is_err());
    }

    #[test]
    fn degenerate_and_corridor_paths() {
        let g = OccupancyGrid::from_ascii(&["#######", "#.....#", "#######"]).unwrap();
        let a = CellCoord::new(1, 1);
        assert_eq!(shortest_path(&g, a, a, false).unwrap(), Some(vec![a]));
        let p = shortest_path(&g, a, CellCoord::new(5, 1), false).unwrap().unwrap();
        assert_eq!(p.len(), 5);
        assert!(p.windows(2).all(|w| PathCost::octile(w[0], w[1]) == PathCost::AXIAL));
        assert_eq!(shortest_path(&g, a, CellCoord::new(0, 0), false).unwrap(), None);
    }

    #[test]
    fn ties_follow_expansion_order() {
        // Two geodesics reach (1,2); NE precedes N in expansion order.
        let g = OccupancyGrid::new(3, 3, Cell::Free).unwrap();
        let p = shortest_path(&g, CellCoord::new(0, 0), CellCoord::new(1, 2), false).unwrap().unwrap();
        assert_eq!(p, vec![CellCoord::new(0, 0), CellCoord::new(1, 1), CellCoord::new(1, 2)]);
    }

    fn arb_grid() -> impl Strategy<Value = OccupancyGrid> {
        (3usize..9, 3usize..9).prop_flat_map(|(w, h)| {
            proptest::collection::vec(prop::bool::weighted(0.25), w * h).prop_map(move |bits| {
                let mut g = OccupancyGrid::new(w, h, Cell::Free).unwrap();
                for (i, b) in bits.into_iter().enumerate() {
                    if b {
                        let c = g.coord(i);
                        g.set(c, Cell::Obstacle);
                    }
                }
                g
            })
        })
    }

    proptest! {
        #[test]
        fn symmetric_and_triangle(g in arb_grid(), seeds in proptest::collection::vec(0usize..1000, 3)) {
            let n = g.width() * g.height();
            let free: Vec<CellCoord> = g.coords().filter(|&c| g.get(c) == Cell::Free).collect();
            prop_assume!(!free.is_empty());
            let a = free[seeds[0] % free.len()];
            let b = free[seeds[1] % free.len()];
            let c = free[seeds[2] % free.len()];
            let from_a = distance_costs(&g, &[a], false).unwrap();
            let from_b = distance_costs(&g, &[b], false).unwrap();
            prop_assert_eq!(from_a[g.index(b)], from_b[g.index(a)]);
            if let (Some(ab), Some(bc), Some(ac)) = (from_a[g.index(b)], from_b[g.index(c)], from_a[g.index(c)]) {
                prop_assert!(ac <= ab + bc);
            }
            prop_assert_eq!(from_a.len(), n);
            if let Some(p) = shortest_path(&g, a, b, false).unwrap() {
                prop_assert_eq!(p[0], a);
                prop_assert_eq!(*p.last().unwrap(), b);
                let total = p.windows(2).fold(PathCost::ZERO, |acc, w| {
                    assert!(w[0].is_adjacent(w[1]));
                    acc + PathCost::octile(w[0], w[1])
                });
                prop_assert_eq!(Some(total), from_b[g.index(a)]);
            } else {
                prop_assert_eq!(from_a[g.index(b)], None);
            }
        }
    }
}
