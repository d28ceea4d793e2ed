//! 4-connected lattice morphology: component labeling, disc dilation,
//! hole filling and small-object removal.

use std::collections::VecDeque;

use crate::grid::BinaryGrid;

/// One 4-connected component. `cells` are row-major sorted, so `cells[0]` is
/// the component's top-left (smallest) index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    pub cells: Vec<usize>,
    pub touches_border: bool,
}

impl Component {
    pub fn area(&self) -> usize {
        self.cells.len()
    }

    pub fn first_index(&self) -> usize {
        self.cells[0]
    }
}

/// Labels the 4-connected components of cells whose value equals `value`.
/// Components are returned in order of their smallest cell index.
pub fn components(grid: &BinaryGrid, value: bool) -> Vec<Component> {
    let (w, h) = (grid.width(), grid.height());
    let cells = grid.cells();
    let mut seen = vec![false; cells.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..cells.len() {
        if seen[start] || cells[start] != value {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut members = Vec::new();
        let mut touches_border = false;
        while let Some(i) = queue.pop_front() {
            members.push(i);
            let (x, y) = (i % w, i / w);
            if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                touches_border = true;
            }
            for n in grid.neighbors4(i) {
                if !seen[n] && cells[n] == value {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
        members.sort_unstable();
        out.push(Component {
            cells: members,
            touches_border,
        });
    }
    out
}

/// Number of 4-connected positive components.
pub fn count_components(grid: &BinaryGrid) -> usize {
    components(grid, true).len()
}

/// Largest positive component; ties go to the component with the smallest
/// top-left cell index.
pub fn largest_component(grid: &BinaryGrid) -> Option<Component> {
    // components() is ordered by first index, so keeping the first maximum
    // implements the tie rule.
    let mut best: Option<Component> = None;
    for c in components(grid, true) {
        if best.as_ref().is_none_or(|b| c.area() > b.area()) {
            best = Some(c);
        }
    }
    best
}

pub fn component_mask(width: usize, height: usize, component: &Component) -> BinaryGrid {
    let mut g = BinaryGrid::new(width, height);
    for &i in &component.cells {
        g.cells_mut()[i] = true;
    }
    g
}

/// Dilation by a Euclidean disc: a cell is set iff some set cell lies within
/// `radius` cells (center-to-center distance).
pub fn dilate_disc(grid: &BinaryGrid, radius: usize) -> BinaryGrid {
    if radius == 0 {
        return grid.clone();
    }
    let (w, h) = (grid.width() as isize, grid.height() as isize);
    let r = radius as isize;
    let r2 = r * r;
    let offsets: Vec<(isize, isize)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .filter(|(dx, dy)| dx * dx + dy * dy <= r2)
        .collect();
    let mut out = BinaryGrid::new(grid.width(), grid.height());
    for i in grid.ones() {
        let (x, y) = grid.coords(i);
        let (x, y) = (x as isize, y as isize);
        for &(dx, dy) in &offsets {
            let (nx, ny) = (x + dx, y + dy);
            if nx >= 0 && ny >= 0 && nx < w && ny < h {
                out.set(nx as usize, ny as usize, true);
            }
        }
    }
    out
}

/// Fills background components that do not touch the border and have area
/// strictly below `min_area`.
pub fn fill_small_holes(grid: &BinaryGrid, min_area: usize) -> BinaryGrid {
    let mut out = grid.clone();
    for c in components(grid, false) {
        if !c.touches_border && c.area() < min_area {
            for &i in &c.cells {
                out.cells_mut()[i] = true;
            }
        }
    }
    out
}

/// Clears positive components with area strictly below `min_area`.
pub fn remove_small_objects(grid: &BinaryGrid, min_area: usize) -> BinaryGrid {
    let mut out = grid.clone();
    for c in components(grid, true) {
        if c.area() < min_area {
            for &i in &c.cells {
                out.cells_mut()[i] = false;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(rows: &[&str]) -> BinaryGrid {
        let h = rows.len();
        let w = rows[0].len();
        BinaryGrid::from_fn(w, h, |x, y| rows[y].as_bytes()[x] == b'#')
    }

    #[test]
    fn diagonal_cells_are_separate_components() {
        let g = parse(&["#.", ".#"]);
        assert_eq!(count_components(&g), 2);
    }

    #[test]
    fn largest_component_tie_prefers_top_left() {
        let g = parse(&["##..", "....", "..##"]);
        let c = largest_component(&g).unwrap();
        assert_eq!(c.cells, vec![0, 1]);
    }

    #[test]
    fn dilation_radius_one_is_a_plus() {
        let g = parse(&["...", ".#.", "..."]);
        assert_eq!(dilate_disc(&g, 1), parse(&[".#.", "###", ".#."]));
    }

    #[test]
    fn holes_touching_border_are_kept() {
        let g = parse(&["###", "#.#", "#.."]);
        assert_eq!(fill_small_holes(&g, 100), g);
        let enclosed = parse(&["###", "#.#", "###"]);
        assert_eq!(fill_small_holes(&enclosed, 100).count(), 9);
        assert_eq!(fill_small_holes(&enclosed, 1), enclosed);
    }

    #[test]
    fn small_objects_removed_strictly_below_threshold() {
        let g = parse(&["##.", "...", "..#"]);
        assert_eq!(remove_small_objects(&g, 2).count(), 2);
        assert_eq!(remove_small_objects(&g, 3).count(), 0);
    }
}
