use alloc::vec;
use alloc::vec::Vec;

use super::map::{Cell, GridMap, RoadKind};
use crate::{Error, Result};

/// Cells a vehicle at `pos` can see inside its `size × size` window.
///
/// Buildings block sight, so from an intersection the visible area is a cross
/// (the full row and column through `pos`), and from a straight road it is the
/// line along the road. Clipped to the grid; always contains `pos`. Sorted
/// row-major.
pub fn observable_area(map: &GridMap, pos: Cell, size: usize) -> Result<Vec<Cell>> {
    let kind =
        map.road_kind(pos).ok_or(Error::InvalidPosition { row: pos.row, col: pos.col, reason: "observer must stand on a road cell" })?;
    let half = size / 2;
    let w = map.width();
    let lo = |x: usize| x.saturating_sub(half);
    let hi = |x: usize| (x + half).min(w - 1);

    let see_row = matches!(kind, RoadKind::Intersection | RoadKind::Horizontal);
    let see_col = matches!(kind, RoadKind::Intersection | RoadKind::Vertical);

    let mut cells = Vec::new();
    if see_col {
        for r in lo(pos.row)..pos.row {
            cells.push(Cell::new(r, pos.col));
        }
    }
    if see_row {
        for c in lo(pos.col)..=hi(pos.col) {
            cells.push(Cell::new(pos.row, c));
        }
    } else {
        cells.push(pos);
    }
    if see_col {
        for r in pos.row + 1..=hi(pos.row) {
            cells.push(Cell::new(r, pos.col));
        }
    }
    Ok(cells)
}

/// One pursuer's local view: evader detections limited to what is visible
/// and building occupancy over the whole window. Entry `(a, b)` covers cell
/// `(center.row + a - size/2, center.col + b - size/2)`; off-grid entries are 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PursuerObservation {
    pub size: usize,
    pub center: Cell,
    pub evaders: Vec<u8>,
    pub obstacles: Vec<u8>,
}

impl PursuerObservation {
    pub(crate) fn build(map: &GridMap, center: Cell, size: usize, evaders: impl Iterator<Item = Cell>) -> Result<Self> {
        let visible = observable_area(map, center, size)?;
        let half = size as isize / 2;
        let mut e = vec![0u8; size * size];
        let mut b = vec![0u8; size * size];
        for a in 0..size {
            for bb in 0..size {
                let r = center.row as isize + a as isize - half;
                let c = center.col as isize + bb as isize - half;
                if map.in_bounds(r, c) && map.is_obstacle(Cell::new(r as usize, c as usize)) {
                    b[a * size + bb] = 1;
                }
            }
        }
        for ev in evaders {
            if visible.binary_search(&ev).is_ok() {
                let a = (ev.row as isize - center.row as isize + half) as usize;
                let bb = (ev.col as isize - center.col as isize + half) as usize;
                e[a * size + bb] = 1;
            }
        }
        Ok(Self { size, center, evaders: e, obstacles: b })
    }

    pub fn evader_at(&self, a: usize, b: usize) -> u8 {
        self.evaders[a * self.size + b]
    }

    pub fn obstacle_at(&self, a: usize, b: usize) -> u8 {
        self.obstacles[a * self.size + b]
    }

    /// Grid cell covered by window entry `(a, b)`, if on the grid.
    pub fn cell_of(&self, map: &GridMap, a: usize, b: usize) -> Option<Cell> {
        let half = self.size as isize / 2;
        let r = self.center.row as isize + a as isize - half;
        let c = self.center.col as isize + b as isize - half;
        map.in_bounds(r, c).then(|| Cell::new(r as usize, c as usize))
    }

    pub fn sees_evader(&self) -> bool {
        self.evaders.iter().any(|&v| v != 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cells(v: &[(usize, usize)]) -> Vec<Cell> {
        let mut out: Vec<Cell> = v.iter().map(|&p| Cell::from(p)).collect();
        out.sort();
        out
    }

    #[test]
    fn interior_intersection_is_a_cross() {
        let map = GridMap::new(13).unwrap();
        let area = observable_area(&map, Cell::new(6, 6), 5).unwrap();
        assert_eq!(area.len(), 9);
        assert!(area.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn straight_road_is_a_line() {
        let map = GridMap::new(13).unwrap();
        let area = observable_area(&map, Cell::new(6, 5), 5).unwrap();
        assert_eq!(area, cells(&[(6, 3), (6, 4), (6, 5), (6, 6), (6, 7)]));
        let area = observable_area(&map, Cell::new(5, 6), 5).unwrap();
        assert_eq!(area, cells(&[(3, 6), (4, 6), (5, 6), (6, 6), (7, 6)]));
    }

    #[test]
    fn corner_is_clipped() {
        let map = GridMap::new(13).unwrap();
        let area = observable_area(&map, Cell::new(0, 0), 5).unwrap();
        assert_eq!(area, cells(&[(0, 0), (0, 1), (0, 2), (1, 0), (2, 0)]));
    }

    #[test]
    fn obstacle_position_is_rejected() {
        let map = GridMap::new(13).unwrap();
        assert!(matches!(observable_area(&map, Cell::new(1, 1), 5), Err(Error::InvalidPosition { .. })));
    }

    #[test]
    fn obstacles_are_not_occluded() {
        let map = GridMap::new(13).unwrap();
        let obs = PursuerObservation::build(&map, Cell::new(6, 5), 5, core::iter::empty()).unwrap();
        // window rows 4..=8, cols 3..=7: obstacles at odd×odd
        let count: u32 = obs.obstacles.iter().map(|&x| x as u32).sum();
        assert_eq!(count, 6);
        assert_eq!(obs.obstacle_at(1, 0), 1); // (5,3)
        assert_eq!(obs.obstacle_at(0, 0), 0); // (4,3)
    }

    #[test]
    fn evader_off_the_cross_is_hidden() {
        let map = GridMap::new(13).unwrap();
        let obs = PursuerObservation::build(&map, Cell::new(6, 6), 5, [Cell::new(4, 4)].into_iter()).unwrap();
        assert!(!obs.sees_evader());
        let obs = PursuerObservation::build(&map, Cell::new(6, 6), 5, [Cell::new(6, 8)].into_iter()).unwrap();
        assert_eq!(obs.evader_at(2, 4), 1);
    }
}
