//! Uniform triangulations of axis-aligned rectangles.
//!
//! Level `i` splits the rectangle into `2^i x 2^i` squares, each cut along the
//! lower-left to upper-right diagonal. On the unit square every triangle then
//! has diameter `2^(1/2 - i)`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rectangle {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rectangle {
    pub const UNIT: Rectangle = Rectangle {
        x_min: 0.0,
        x_max: 1.0,
        y_min: 0.0,
        y_max: 1.0,
    };

    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let r = Rectangle {
            x_min,
            x_max,
            y_min,
            y_max,
        };
        if !(r.width() > 0.0 && r.height() > 0.0) || ![x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite()) {
            return Err(Error::Mesh(format!("degenerate rectangle {r:?}")));
        }
        Ok(r)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

/// A face shared by two cells. The normal points from `cells[0]` into `cells[1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteriorFace {
    pub cells: [usize; 2],
    pub local_edges: [usize; 2],
    pub normal: Point,
    pub length: f64,
    /// Endpoints in the counter-clockwise order of `cells[0]`.
    pub endpoints: [Point; 2],
}

impl InteriorFace {
    /// The same face with the roles of the two cells exchanged.
    pub fn flipped(&self) -> InteriorFace {
        InteriorFace {
            cells: [self.cells[1], self.cells[0]],
            local_edges: [self.local_edges[1], self.local_edges[0]],
            normal: [-self.normal[0], -self.normal[1]],
            length: self.length,
            endpoints: [self.endpoints[1], self.endpoints[0]],
        }
    }

    pub fn point_at(&self, s: f64) -> Point {
        lerp(self.endpoints[0], self.endpoints[1], s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFace {
    pub cell: usize,
    pub local_edge: usize,
    /// Outward unit normal.
    pub normal: Point,
    pub length: f64,
    pub endpoints: [Point; 2],
}

impl BoundaryFace {
    pub fn point_at(&self, s: f64) -> Point {
        lerp(self.endpoints[0], self.endpoints[1], s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceRef {
    Interior(usize),
    Boundary(usize),
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    interior_faces: Vec<InteriorFace>,
    boundary_faces: Vec<BoundaryFace>,
    cell_faces: Vec<[FaceRef; 3]>,
    cell_diameters: Vec<f64>,
    cell_areas: Vec<f64>,
    level: u32,
    squares_per_side: usize,
    rectangle: Rectangle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshStatistics {
    pub cells: usize,
    pub interior_faces: usize,
    pub boundary_faces: usize,
    pub h_cell_min: f64,
    pub h_cell_max: f64,
    pub h_face_min: f64,
    pub h_face_max: f64,
    /// Mesh regularity: the largest `delta` with `delta * h_T <= h_F` for all `F` in `F_T`.
    pub delta: f64,
    /// Maximum number of faces of a cell.
    pub max_faces_per_cell: usize,
}

fn lerp(a: Point, b: Point, s: f64) -> Point {
    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
}

fn distance(a: Point, b: Point) -> f64 {
    (b[0] - a[0]).hypot(b[1] - a[1])
}

impl Mesh {
    /// Builds the level-`level` uniform triangulation of `rectangle`.
    pub fn uniform(level: u32, rectangle: Rectangle) -> Result<Mesh> {
        if level == 0 {
            return Err(Error::Mesh("refinement level must be at least 1".into()));
        }
        Rectangle::new(rectangle.x_min, rectangle.x_max, rectangle.y_min, rectangle.y_max)?;
        let n = 1usize
            .checked_shl(level)
            .filter(|&n| n.leading_zeros() > 1 && level < usize::BITS)
            .ok_or_else(|| Error::Mesh(format!("level {level} overflows index arithmetic")))?;
        let cell_count = n
            .checked_mul(n)
            .and_then(|v| v.checked_mul(2))
            .filter(|&c| c <= u32::MAX as usize)
            .ok_or_else(|| Error::Mesh(format!("level {level} overflows index arithmetic")))?;

        let dx = rectangle.width() / n as f64;
        let dy = rectangle.height() / n as f64;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for b in 0..=n {
            for a in 0..=n {
                // Pin the far edges exactly to the rectangle bounds.
                let x = if a == n { rectangle.x_max } else { rectangle.x_min + a as f64 * dx };
                let y = if b == n { rectangle.y_max } else { rectangle.y_min + b as f64 * dy };
                vertices.push([x, y]);
            }
        }
        let vid = |a: usize, b: usize| b * (n + 1) + a;
        let mut cells = Vec::with_capacity(cell_count);
        for b in 0..n {
            for a in 0..n {
                let v00 = vid(a, b);
                let v10 = vid(a + 1, b);
                let v11 = vid(a + 1, b + 1);
                let v01 = vid(a, b + 1);
                cells.push([v00, v10, v11]);
                cells.push([v00, v11, v01]);
            }
        }
        Self::from_cells(vertices, cells, level, n, rectangle)
    }

    /// Builds the face topology for counter-clockwise triangles.
    fn from_cells(
        vertices: Vec<Point>,
        cells: Vec<[usize; 3]>,
        level: u32,
        squares_per_side: usize,
        rectangle: Rectangle,
    ) -> Result<Mesh> {
        let mut open: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
        let mut interior_faces = Vec::new();
        let mut cell_faces = vec![[FaceRef::Boundary(usize::MAX); 3]; cells.len()];

        for (c, tri) in cells.iter().enumerate() {
            for e in 0..3 {
                let (va, vb) = (tri[(e + 1) % 3], tri[(e + 2) % 3]);
                let key = (va.min(vb), va.max(vb));
                match open.remove(&key) {
                    Some((c1, e1)) => {
                        let [p0, p1] = edge_points(&vertices, &cells[c1], e1);
                        let length = distance(p0, p1);
                        let normal = [(p1[1] - p0[1]) / length, -(p1[0] - p0[0]) / length];
                        cell_faces[c1][e1] = FaceRef::Interior(interior_faces.len());
                        cell_faces[c][e] = FaceRef::Interior(interior_faces.len());
                        interior_faces.push(InteriorFace {
                            cells: [c1, c],
                            local_edges: [e1, e],
                            normal,
                            length,
                            endpoints: [p0, p1],
                        });
                    }
                    None => {
                        open.insert(key, (c, e));
                    }
                }
            }
        }

        let mut leftover: Vec<(usize, usize)> = open.into_values().collect();
        leftover.sort_unstable();
        let boundary_faces: Vec<BoundaryFace> = leftover
            .into_iter()
            .enumerate()
            .map(|(idx, (c, e))| {
                let [p0, p1] = edge_points(&vertices, &cells[c], e);
                let length = distance(p0, p1);
                cell_faces[c][e] = FaceRef::Boundary(idx);
                BoundaryFace {
                    cell: c,
                    local_edge: e,
                    normal: [(p1[1] - p0[1]) / length, -(p1[0] - p0[0]) / length],
                    length,
                    endpoints: [p0, p1],
                }
            })
            .collect();

        let cell_diameters = cells
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|v| vertices[v]);
                distance(a, b).max(distance(b, c)).max(distance(c, a))
            })
            .collect();
        let cell_areas = cells
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|v| vertices[v]);
                0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
            })
            .collect();

        Ok(Mesh {
            vertices,
            cells,
            interior_faces,
            boundary_faces,
            cell_faces,
            cell_diameters,
            cell_areas,
            level,
            squares_per_side,
            rectangle,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn interior_faces(&self) -> &[InteriorFace] {
        &self.interior_faces
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary_faces
    }

    pub fn cell_faces(&self, cell: usize) -> &[FaceRef; 3] {
        &self.cell_faces[cell]
    }

    pub fn cell_diameter(&self, cell: usize) -> f64 {
        self.cell_diameters[cell]
    }

    pub fn cell_diameters(&self) -> &[f64] {
        &self.cell_diameters
    }

    pub fn cell_area(&self, cell: usize) -> f64 {
        self.cell_areas[cell]
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn rectangle(&self) -> Rectangle {
        self.rectangle
    }

    /// Nominal mesh width `h = max h_T`.
    pub fn mesh_width(&self) -> f64 {
        self.cell_diameters.iter().copied().fold(0.0, f64::max)
    }

    pub fn cell_vertices(&self, cell: usize) -> [Point; 3] {
        self.cells[cell].map(|v| self.vertices[v])
    }

    pub fn centroid(&self, cell: usize) -> Point {
        let [a, b, c] = self.cell_vertices(cell);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Cells sharing a face with `cell`.
    pub fn neighbors(&self, cell: usize) -> impl Iterator<Item = usize> + '_ {
        self.cell_faces[cell].iter().filter_map(move |f| match *f {
            FaceRef::Interior(i) => {
                let [a, b] = self.interior_faces[i].cells;
                Some(if a == cell { b } else { a })
            }
            FaceRef::Boundary(_) => None,
        })
    }

    /// The cell containing `p`. Points outside the rectangle are clamped onto it.
    pub fn locate(&self, p: Point) -> usize {
        let n = self.squares_per_side;
        let r = &self.rectangle;
        let s = ((p[0] - r.x_min) / r.width() * n as f64).clamp(0.0, n as f64);
        let t = ((p[1] - r.y_min) / r.height() * n as f64).clamp(0.0, n as f64);
        let a = (s.floor() as usize).min(n - 1);
        let b = (t.floor() as usize).min(n - 1);
        let upper = (t - b as f64) > (s - a as f64);
        2 * (b * n + a) + usize::from(upper)
    }

    pub fn statistics(&self) -> MeshStatistics {
        let (h_face_min, h_face_max) = self
            .interior_faces
            .iter()
            .map(|f| f.length)
            .chain(self.boundary_faces.iter().map(|f| f.length))
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), h| (lo.min(h), hi.max(h)));
        let (h_cell_min, h_cell_max) = self
            .cell_diameters
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &h| (lo.min(h), hi.max(h)));
        let mut delta = f64::INFINITY;
        for (c, faces) in self.cell_faces.iter().enumerate() {
            for f in faces {
                let h_f = match *f {
                    FaceRef::Interior(i) => self.interior_faces[i].length,
                    FaceRef::Boundary(i) => self.boundary_faces[i].length,
                };
                delta = delta.min(h_f / self.cell_diameters[c]);
            }
        }
        MeshStatistics {
            cells: self.cells.len(),
            interior_faces: self.interior_faces.len(),
            boundary_faces: self.boundary_faces.len(),
            h_cell_min,
            h_cell_max,
            h_face_min,
            h_face_max,
            delta,
            max_faces_per_cell: 3,
        }
    }
}

fn edge_points(vertices: &[Point], tri: &[usize; 3], e: usize) -> [Point; 2] {
    [vertices[tri[(e + 1) % 3]], vertices[tri[(e + 2) % 3]]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_one_counts() {
        let m = Mesh::uniform(1, Rectangle::UNIT).unwrap();
        assert_eq!(m.num_cells(), 8);
        assert_eq!(m.interior_faces().len(), 8);
        assert_eq!(m.boundary_faces().len(), 8);
        for &h in m.cell_diameters() {
            assert!((h - 0.5f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn level_four_width() {
        let m = Mesh::uniform(4, Rectangle::UNIT).unwrap();
        assert_eq!(m.num_cells(), 512);
        assert!((m.mesh_width() - 2f64.powf(-3.5)).abs() < 1e-15);
    }

    #[test]
    fn statistics_by_enumeration() {
        let m = Mesh::uniform(1, Rectangle::UNIT).unwrap();
        let s = m.statistics();
        assert_eq!(s.max_faces_per_cell, 3);
        assert_eq!(s.h_cell_min, s.h_cell_max);
        // Each triangle has two legs of length 1/2 and a hypotenuse of length sqrt(2)/2.
        let mut expected = f64::INFINITY;
        for c in 0..m.num_cells() {
            let [a, b, cc] = m.cell_vertices(c);
            for (p, q) in [(a, b), (b, cc), (cc, a)] {
                expected = expected.min(distance(p, q) / m.cell_diameter(c));
            }
        }
        assert!((s.delta - expected).abs() < 1e-15);
        assert!((s.delta - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn area_and_nesting() {
        let r = Rectangle::new(-1.0, 2.0, 0.5, 1.25).unwrap();
        let mut prev = 0;
        for level in 1..=5 {
            let m = Mesh::uniform(level, r).unwrap();
            let area: f64 = (0..m.num_cells()).map(|c| m.cell_area(c)).sum();
            assert!((area - r.area()).abs() <= 1e-13 * r.area());
            if prev > 0 {
                assert_eq!(m.num_cells(), 4 * prev);
            }
            prev = m.num_cells();
        }
    }

    #[test]
    fn face_bijection_and_normals() {
        let m = Mesh::uniform(3, Rectangle::UNIT).unwrap();
        let mut edges = std::collections::HashSet::new();
        for t in m.cells() {
            for e in 0..3 {
                let (a, b) = (t[(e + 1) % 3], t[(e + 2) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        assert_eq!(edges.len(), m.interior_faces().len() + m.boundary_faces().len());

        for f in m.interior_faces() {
            assert_ne!(f.cells[0], f.cells[1]);
            assert!((f.normal[0].hypot(f.normal[1]) - 1.0).abs() < 1e-15);
            // The normal points away from the centroid of cells[0] and towards cells[1].
            let mid = f.point_at(0.5);
            let c0 = m.centroid(f.cells[0]);
            let c1 = m.centroid(f.cells[1]);
            assert!((mid[0] - c0[0]) * f.normal[0] + (mid[1] - c0[1]) * f.normal[1] > 0.0);
            assert!((mid[0] - c1[0]) * f.normal[0] + (mid[1] - c1[1]) * f.normal[1] < 0.0);
        }
        for f in m.boundary_faces() {
            let mid = f.point_at(0.5);
            let on_boundary = [mid[0], mid[1]].iter().any(|&v| v.abs() < 1e-15 || (v - 1.0).abs() < 1e-15);
            assert!(on_boundary);
        }
    }

    #[test]
    fn locate_finds_containing_cell() {
        let m = Mesh::uniform(3, Rectangle::UNIT).unwrap();
        for c in 0..m.num_cells() {
            assert_eq!(m.locate(m.centroid(c)), c);
        }
    }

    #[test]
    fn rejects_bad_levels() {
        assert!(Mesh::uniform(0, Rectangle::UNIT).is_err());
        assert!(Mesh::uniform(40, Rectangle::UNIT).is_err());
        assert!(Rectangle::new(0.0, 0.0, 0.0, 1.0).is_err());
    }
}
