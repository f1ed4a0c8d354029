//! Axis-aligned rectangular obstacles.
//!
//! Obstacles are 2.5D: full-height boxes over an x-y footprint. They block
//! robot motion, attenuate radio crossing their walls, and their four
//! vertical faces act as specular reflectors for the multipath model.

use nalgebra::Vector2;

/// One axis-aligned rectangle in the world's x-y plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

/// A vertical obstacle face: a wall segment with its outward normal.
#[derive(Debug, Clone, Copy)]
pub struct Face {
    pub a: Vector2<f64>,
    pub b: Vector2<f64>,
    pub normal: Vector2<f64>,
}

impl Obstacle {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        assert!(x_min < x_max && y_min < y_max, "degenerate obstacle");
        Obstacle {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    pub fn contains(&self, p: Vector2<f64>) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn faces(&self) -> [Face; 4] {
        let (x0, x1, y0, y1) = (self.x_min, self.x_max, self.y_min, self.y_max);
        [
            Face {
                a: Vector2::new(x0, y0),
                b: Vector2::new(x0, y1),
                normal: Vector2::new(-1.0, 0.0),
            },
            Face {
                a: Vector2::new(x1, y0),
                b: Vector2::new(x1, y1),
                normal: Vector2::new(1.0, 0.0),
            },
            Face {
                a: Vector2::new(x0, y0),
                b: Vector2::new(x1, y0),
                normal: Vector2::new(0.0, -1.0),
            },
            Face {
                a: Vector2::new(x0, y1),
                b: Vector2::new(x1, y1),
                normal: Vector2::new(0.0, 1.0),
            },
        ]
    }
}

impl Face {
    /// Mirror a point across this face's infinite line.
    pub fn mirror(&self, p: Vector2<f64>) -> Vector2<f64> {
        let d = (p - self.a).dot(&self.normal);
        p - self.normal * (2.0 * d)
    }

    /// Signed distance of a point from the face plane along the outward normal.
    pub fn side(&self, p: Vector2<f64>) -> f64 {
        (p - self.a).dot(&self.normal)
    }

    /// Intersection of segment pq with this face segment, as the point.
    pub fn intersect_segment(&self, p: Vector2<f64>, q: Vector2<f64>) -> Option<Vector2<f64>> {
        segment_intersection(p, q, self.a, self.b)
    }
}

/// Intersection point of two segments, or None when they do not cross.
pub fn segment_intersection(
    p: Vector2<f64>,
    q: Vector2<f64>,
    a: Vector2<f64>,
    b: Vector2<f64>,
) -> Option<Vector2<f64>> {
    let r = q - p;
    let s = b - a;
    let denom = r.x * s.y - r.y * s.x;
    if denom.abs() < 1e-15 {
        return None;
    }
    let ap = a - p;
    let t = (ap.x * s.y - ap.y * s.x) / denom;
    let u = (ap.x * r.y - ap.y * r.x) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some(p + r * t)
    } else {
        None
    }
}

/// The world's obstacle collection.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObstacleSet {
    pub obstacles: Vec<Obstacle>,
}

impl ObstacleSet {
    pub fn new(obstacles: Vec<Obstacle>) -> Self {
        ObstacleSet { obstacles }
    }

    pub fn empty() -> Self {
        ObstacleSet {
            obstacles: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.obstacles.is_empty()
    }

    pub fn contains(&self, p: Vector2<f64>) -> bool {
        self.obstacles.iter().any(|o| o.contains(p))
    }

    /// Number of wall faces the segment pq crosses, over all obstacles.
    pub fn wall_crossings(&self, p: Vector2<f64>, q: Vector2<f64>) -> usize {
        self.obstacles
            .iter()
            .flat_map(|o| o.faces())
            .filter(|f| f.intersect_segment(p, q).is_some())
            .count()
    }

    /// Whether the segment pq touches any obstacle (used for motion checks).
    pub fn blocks_segment(&self, p: Vector2<f64>, q: Vector2<f64>) -> bool {
        self.contains(q) || self.contains(p) || self.wall_crossings(p, q) > 0
    }
}
