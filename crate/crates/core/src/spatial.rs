//! Uniform grid index over a point set: radius queries and nearest-point lookup.
//!
//! Rebuilt from scratch whenever the point set moves; construction is a
//! counting sort into compressed cell buckets.

use crate::geom::Point;

#[derive(Debug, Clone)]
pub struct SpatialGrid {
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    cell_start: Vec<u32>,
    items: Vec<u32>,
    points: Vec<Point>,
}

impl SpatialGrid {
    /// Index `points` with square cells of side `cell` (> 0).
    pub fn build(points: &[Point], cell: f64) -> Self {
        assert!(cell > 0.0 && cell.is_finite(), "cell size must be positive");
        let (mut min, mut max) = (Point::new(0.0, 0.0), Point::new(0.0, 0.0));
        if let Some(first) = points.first() {
            min = *first;
            max = *first;
            for p in points {
                min.x = min.x.min(p.x);
                min.y = min.y.min(p.y);
                max.x = max.x.max(p.x);
                max.y = max.y.max(p.y);
            }
        }
        let nx = (((max.x - min.x) / cell).floor() as usize + 1).max(1);
        let ny = (((max.y - min.y) / cell).floor() as usize + 1).max(1);
        let mut grid = SpatialGrid {
            origin: min,
            cell,
            nx,
            ny,
            cell_start: vec![0; nx * ny + 1],
            items: vec![0; points.len()],
            points: points.to_vec(),
        };
        let cells: Vec<usize> = points.iter().map(|p| grid.cell_index(p)).collect();
        for &c in &cells {
            grid.cell_start[c + 1] += 1;
        }
        for i in 0..nx * ny {
            grid.cell_start[i + 1] += grid.cell_start[i];
        }
        let mut fill = grid.cell_start.clone();
        for (i, &c) in cells.iter().enumerate() {
            grid.items[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        grid
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> Point {
        self.points[i]
    }

    fn cell_coords(&self, p: &Point) -> (i64, i64) {
        (
            ((p.x - self.origin.x) / self.cell).floor() as i64,
            ((p.y - self.origin.y) / self.cell).floor() as i64,
        )
    }

    fn cell_index(&self, p: &Point) -> usize {
        let (cx, cy) = self.cell_coords(p);
        let cx = cx.clamp(0, self.nx as i64 - 1) as usize;
        let cy = cy.clamp(0, self.ny as i64 - 1) as usize;
        cy * self.nx + cx
    }

    fn bucket(&self, cx: i64, cy: i64) -> &[u32] {
        if cx < 0 || cy < 0 || cx >= self.nx as i64 || cy >= self.ny as i64 {
            return &[];
        }
        let c = cy as usize * self.nx + cx as usize;
        &self.items[self.cell_start[c] as usize..self.cell_start[c + 1] as usize]
    }

    /// Indices of all points within `radius` of `p` (closed disk), ascending.
    pub fn within(&self, p: &Point, radius: f64, out: &mut Vec<usize>) {
        out.clear();
        if self.points.is_empty() {
            return;
        }
        let r2 = radius * radius;
        let (x0, y0) = self.cell_coords(&Point::new(p.x - radius, p.y - radius));
        let (x1, y1) = self.cell_coords(&Point::new(p.x + radius, p.y + radius));
        let x0 = x0.max(0);
        let y0 = y0.max(0);
        let x1 = x1.min(self.nx as i64 - 1);
        let y1 = y1.min(self.ny as i64 - 1);
        for cy in y0..=y1 {
            for cx in x0..=x1 {
                for &i in self.bucket(cx, cy) {
                    if self.points[i as usize].distance_sq(p) <= r2 {
                        out.push(i as usize);
                    }
                }
            }
        }
        out.sort_unstable();
    }

    /// Index of the point nearest to `p` and its distance.
    ///
    /// `tie_key` orders equally distant candidates; the smallest key wins.
    pub fn nearest_by<K: Ord>(&self, p: &Point, tie_key: impl Fn(usize) -> K) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let (pcx, pcy) = self.cell_coords(p);
        let mut best: Option<(usize, f64)> = None;
        let max_ring = (self.nx.max(self.ny) as i64) + pcx.abs().max(pcy.abs()) + 1;
        for ring in 0..=max_ring {
            // Every point in ring `ring` is at least (ring - 1) cells away.
            if let Some((_, d)) = best {
                if (ring as f64 - 1.0) * self.cell > d {
                    break;
                }
            }
            for cy in (pcy - ring)..=(pcy + ring) {
                for cx in (pcx - ring)..=(pcx + ring) {
                    if (cx - pcx).abs() != ring && (cy - pcy).abs() != ring {
                        continue;
                    }
                    for &i in self.bucket(cx, cy) {
                        let i = i as usize;
                        let d = self.points[i].distance(p);
                        best = match best {
                            None => Some((i, d)),
                            Some((bi, bd)) => {
                                if d < bd || (d == bd && tie_key(i) < tie_key(bi)) {
                                    Some((i, d))
                                } else {
                                    Some((bi, bd))
                                }
                            }
                        };
                    }
                }
            }
        }
        best
    }
}
