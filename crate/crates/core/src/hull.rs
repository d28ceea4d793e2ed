//! Convex hull of lattice cell centers (Andrew's monotone chain) and its
//! rasterization back onto the lattice.
//!
//! Cell centers are integer points, so all orientation tests are exact.

use crate::grid::BinaryGrid;

pub type Point = (i64, i64);

#[inline]
fn cross(o: Point, a: Point, b: Point) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Counter-clockwise hull without collinear vertices. Returns one point for a
/// single distinct input and two for collinear inputs.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts = points.to_vec();
    pts.sort_unstable();
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Whether `p` lies inside or on the boundary of `hull` (as produced by
/// [`convex_hull`]).
pub fn hull_contains(hull: &[Point], p: Point) -> bool {
    match hull.len() {
        0 => false,
        1 => hull[0] == p,
        2 => {
            let (a, b) = (hull[0], hull[1]);
            cross(a, b, p) == 0
                && p.0 >= a.0.min(b.0)
                && p.0 <= a.0.max(b.0)
                && p.1 >= a.1.min(b.1)
                && p.1 <= a.1.max(b.1)
        }
        n => (0..n).all(|i| cross(hull[i], hull[(i + 1) % n], p) >= 0),
    }
}

/// Marks every cell whose center lies in the convex hull of the set cells.
pub fn rasterize_hull(grid: &BinaryGrid) -> BinaryGrid {
    let points: Vec<Point> = grid
        .ones()
        .map(|i| {
            let (x, y) = grid.coords(i);
            (x as i64, y as i64)
        })
        .collect();
    let hull = convex_hull(&points);
    if hull.is_empty() {
        return BinaryGrid::new(grid.width(), grid.height());
    }
    let min_x = hull.iter().map(|p| p.0).min().unwrap_or(0) as usize;
    let max_x = hull.iter().map(|p| p.0).max().unwrap_or(0) as usize;
    let min_y = hull.iter().map(|p| p.1).min().unwrap_or(0) as usize;
    let max_y = hull.iter().map(|p| p.1).max().unwrap_or(0) as usize;
    let mut out = BinaryGrid::new(grid.width(), grid.height());
    for y in min_y..=max_y {
        for x in min_x..=max_x {
            if hull_contains(&hull, (x as i64, y as i64)) {
                out.set(x, y, true);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_hull_drops_interior_and_edge_points() {
        let pts = [(0, 0), (2, 0), (1, 0), (2, 2), (0, 2), (1, 1)];
        let hull = convex_hull(&pts);
        assert_eq!(hull, vec![(0, 0), (2, 0), (2, 2), (0, 2)]);
        assert!(hull_contains(&hull, (1, 0)));
        assert!(hull_contains(&hull, (1, 1)));
        assert!(!hull_contains(&hull, (3, 1)));
    }

    #[test]
    fn collinear_input_gives_segment() {
        let hull = convex_hull(&[(0, 0), (3, 3), (1, 1)]);
        assert_eq!(hull, vec![(0, 0), (3, 3)]);
        assert!(hull_contains(&hull, (2, 2)));
        assert!(!hull_contains(&hull, (2, 1)));
        assert!(!hull_contains(&hull, (4, 4)));
    }

    #[test]
    fn l_shape_fills_triangle() {
        let mut g = BinaryGrid::new(3, 3);
        for (x, y) in [(0, 0), (1, 0), (2, 0), (2, 1), (2, 2)] {
            g.set(x, y, true);
        }
        let r = rasterize_hull(&g);
        assert!(r.get(1, 1));
        assert!(!r.get(0, 1));
        assert_eq!(r.count(), 6);
    }
}
