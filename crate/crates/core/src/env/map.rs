use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result};

/// A grid coordinate, `row` growing southwards and `col` eastwards.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

impl From<(usize, usize)> for Cell {
    fn from((row, col): (usize, usize)) -> Self {
        Self { row, col }
    }
}

/// Compass heading of a vehicle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Heading {
    North,
    East,
    South,
    West,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::North, Heading::East, Heading::South, Heading::West];

    pub fn index(self) -> usize {
        match self {
            Heading::North => 0,
            Heading::East => 1,
            Heading::South => 2,
            Heading::West => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// `(d_row, d_col)` of one cell of travel.
    pub fn delta(self) -> (isize, isize) {
        match self {
            Heading::North => (-1, 0),
            Heading::East => (0, 1),
            Heading::South => (1, 0),
            Heading::West => (0, -1),
        }
    }

    pub fn left(self) -> Self {
        Self::ALL[(self.index() + 3) % 4]
    }

    pub fn right(self) -> Self {
        Self::ALL[(self.index() + 1) % 4]
    }

    pub fn opposite(self) -> Self {
        Self::ALL[(self.index() + 2) % 4]
    }

    pub fn is_horizontal(self) -> bool {
        matches!(self, Heading::East | Heading::West)
    }
}

/// What kind of road a road cell belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RoadKind {
    Intersection,
    /// Road running east-west.
    Horizontal,
    /// Road running north-south.
    Vertical,
}

/// Square urban grid: straight roads every `interval + 1` cells, building
/// blocks of `interval × interval` cells in between.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridMap {
    width: usize,
    interval: usize,
    obstacle: Vec<bool>,
}

impl GridMap {
    /// Map with one-cell building blocks (obstacle iff both coordinates are odd).
    pub fn new(width: usize) -> Result<Self> {
        Self::with_interval(width, 1)
    }

    pub fn with_interval(width: usize, interval: usize) -> Result<Self> {
        if interval == 0 {
            return Err(Error::InvalidConfig("intersection interval must be at least 1".into()));
        }
        let period = interval + 1;
        if width < 2 * period + 1 || !(width - 1).is_multiple_of(period) {
            return Err(Error::InvalidConfig(format!(
                "grid width {width} incompatible with intersection interval {interval} \
                 (need width >= {} and width - 1 divisible by {period})",
                2 * period + 1
            )));
        }
        let mut obstacle = Vec::with_capacity(width * width);
        for row in 0..width {
            for col in 0..width {
                obstacle.push(row % period != 0 && col % period != 0);
            }
        }
        Ok(Self { width, interval, obstacle })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn interval(&self) -> usize {
        self.interval
    }

    fn period(&self) -> usize {
        self.interval + 1
    }

    pub fn in_bounds(&self, row: isize, col: isize) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.width && (col as usize) < self.width
    }

    pub fn is_obstacle(&self, cell: Cell) -> bool {
        cell.row < self.width && cell.col < self.width && self.obstacle[cell.row * self.width + cell.col]
    }

    /// In bounds and not a building.
    pub fn is_road(&self, cell: Cell) -> bool {
        cell.row < self.width && cell.col < self.width && !self.obstacle[cell.row * self.width + cell.col]
    }

    pub fn road_kind(&self, cell: Cell) -> Option<RoadKind> {
        if !self.is_road(cell) {
            return None;
        }
        let p = self.period();
        Some(match (cell.row.is_multiple_of(p), cell.col.is_multiple_of(p)) {
            (true, true) => RoadKind::Intersection,
            (true, false) => RoadKind::Horizontal,
            _ => RoadKind::Vertical,
        })
    }

    pub fn is_intersection(&self, cell: Cell) -> bool {
        self.road_kind(cell) == Some(RoadKind::Intersection)
    }

    /// The cell one step along `heading`, if it stays on the grid.
    pub fn neighbor(&self, cell: Cell, heading: Heading) -> Option<Cell> {
        let (dr, dc) = heading.delta();
        let r = cell.row as isize + dr;
        let c = cell.col as isize + dc;
        self.in_bounds(r, c).then(|| Cell::new(r as usize, c as usize))
    }

    /// The neighbour along `heading` if it is a road cell.
    pub fn road_neighbor(&self, cell: Cell, heading: Heading) -> Option<Cell> {
        self.neighbor(cell, heading).filter(|&n| self.is_road(n))
    }

    pub fn obstacle_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells().filter(move |&c| self.is_obstacle(c))
    }

    pub fn road_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells().filter(move |&c| self.is_road(c))
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> {
        let w = self.width;
        (0..w * w).map(move |i| Cell::new(i / w, i % w))
    }

    pub fn obstacle_count(&self) -> usize {
        self.obstacle.iter().filter(|&&b| b).count()
    }

    pub fn road_count(&self) -> usize {
        self.width * self.width - self.obstacle_count()
    }

    /// Headings along which a vehicle parked on `cell` can ever move.
    pub fn aligned_headings(&self, cell: Cell) -> &'static [Heading] {
        match self.road_kind(cell) {
            Some(RoadKind::Intersection) => &Heading::ALL,
            Some(RoadKind::Horizontal) => &[Heading::East, Heading::West],
            Some(RoadKind::Vertical) => &[Heading::North, Heading::South],
            None => &[],
        }
    }

    /// Top-left cells of the building blocks whose surrounding ring of road
    /// cells passes through `cell`.
    pub fn adjacent_blocks(&self, cell: Cell) -> Vec<Cell> {
        let mut out = Vec::new();
        if !self.is_road(cell) {
            return out;
        }
        let p = self.period();
        let blocks_per_side = (self.width - 1) / p;
        for br in 0..blocks_per_side {
            for bc in 0..blocks_per_side {
                let top = br * p;
                let left = bc * p;
                let inside_rows = cell.row >= top && cell.row <= top + p;
                let inside_cols = cell.col >= left && cell.col <= left + p;
                if inside_rows && inside_cols {
                    out.push(Cell::new(top + 1, left + 1));
                }
            }
        }
        out
    }

    /// Road cells surrounding the block whose top-left cell is `block`,
    /// clockwise from the north-west corner. Length `4 * (interval + 1)`.
    pub fn ring(&self, block: Cell) -> Result<Vec<Cell>> {
        let p = self.period();
        if block.row == 0
            || block.col == 0
            || !(block.row - 1).is_multiple_of(p)
            || !(block.col - 1).is_multiple_of(p)
            || !self.is_obstacle(block)
        {
            return Err(Error::InvalidPosition { row: block.row, col: block.col, reason: "not the top-left cell of a building block" });
        }
        let top = block.row - 1;
        let left = block.col - 1;
        let bottom = top + p;
        let right = left + p;
        let mut ring = Vec::with_capacity(4 * p);
        for c in left..right {
            ring.push(Cell::new(top, c));
        }
        for r in top..bottom {
            ring.push(Cell::new(r, right));
        }
        for c in (left + 1..=right).rev() {
            ring.push(Cell::new(bottom, c));
        }
        for r in (top + 1..=bottom).rev() {
            ring.push(Cell::new(r, left));
        }
        Ok(ring)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn width_13_counts() {
        let map = GridMap::new(13).unwrap();
        assert_eq!(map.obstacle_count(), 36);
        assert_eq!(map.road_count(), 133);
    }

    #[test]
    fn width_5_obstacles() {
        let map = GridMap::new(5).unwrap();
        let obstacles: Vec<Cell> = map.obstacle_cells().collect();
        assert_eq!(obstacles, [(1, 1), (1, 3), (3, 1), (3, 3)].map(Cell::from));
    }

    #[test]
    fn rejects_even_or_small_width() {
        assert!(matches!(GridMap::new(12), Err(Error::InvalidConfig(_))));
        assert!(matches!(GridMap::new(3), Err(Error::InvalidConfig(_))));
        assert!(matches!(GridMap::new(0), Err(Error::InvalidConfig(_))));
        assert!(GridMap::new(5).is_ok());
    }

    #[test]
    fn wider_interval_blocks() {
        let map = GridMap::with_interval(7, 2).unwrap();
        assert_eq!(map.obstacle_count(), 16);
        assert_eq!(map.ring(Cell::new(1, 1)).unwrap().len(), 12);
    }

    #[test]
    fn ring_is_closed_walk_of_road_cells() {
        let map = GridMap::new(13).unwrap();
        let ring = map.ring(Cell::new(5, 5)).unwrap();
        assert_eq!(ring.len(), 8);
        for (i, &c) in ring.iter().enumerate() {
            let next = ring[(i + 1) % ring.len()];
            assert!(map.is_road(c));
            assert_eq!(c.row.abs_diff(next.row) + c.col.abs_diff(next.col), 1);
        }
        assert!(map.ring(Cell::new(4, 4)).is_err());
    }

    #[test]
    fn every_road_cell_lies_on_some_ring() {
        let map = GridMap::new(13).unwrap();
        for cell in map.road_cells() {
            let blocks = map.adjacent_blocks(cell);
            assert!(!blocks.is_empty());
            for b in blocks {
                assert!(map.ring(b).unwrap().contains(&cell));
            }
        }
    }

    #[test]
    fn headings_rotate() {
        for h in Heading::ALL {
            assert_eq!(h.left().right(), h);
            assert_eq!(h.opposite().opposite(), h);
            assert_eq!(h.left().left(), h.opposite());
        }
        assert_eq!(Heading::North.left(), Heading::West);
        assert_eq!(Heading::North.right(), Heading::East);
    }
}
