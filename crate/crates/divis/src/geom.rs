//! Planar geometry primitives: vectors, segments, shapes, ray casts and
//! swept-disc collision queries. Everything is in meters, f64.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// Z-component of the cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn length(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn length_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn normalized(self) -> Vec2 {
        let l = self.length();
        if l == 0.0 {
            Vec2::ZERO
        } else {
            self * (1.0 / l)
        }
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).length()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn from_angle(a: f64) -> Vec2 {
        Vec2::new(a.cos(), a.sin())
    }

    /// Perpendicular, rotated 90 degrees counter-clockwise.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl std::ops::Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub fn new(a: Vec2, b: Vec2) -> Self {
        Segment { a, b }
    }

    pub fn closest_point(&self, p: Vec2) -> Vec2 {
        let d = self.b - self.a;
        let len_sq = d.length_sq();
        if len_sq == 0.0 {
            return self.a;
        }
        let t = ((p - self.a).dot(d) / len_sq).clamp(0.0, 1.0);
        self.a + d * t
    }

    pub fn distance_to_point(&self, p: Vec2) -> f64 {
        self.closest_point(p).distance(p)
    }
}

/// A solid obstacle footprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Circle { center: Vec2, radius: f64 },
    /// Convex polygon, vertices in counter-clockwise order.
    Polygon { points: Vec<Vec2> },
}

impl Shape {
    pub fn contains(&self, p: Vec2) -> bool {
        match self {
            Shape::Circle { center, radius } => p.distance(*center) <= *radius,
            Shape::Polygon { points } => {
                let n = points.len();
                for i in 0..n {
                    let a = points[i];
                    let b = points[(i + 1) % n];
                    if (b - a).cross(p - a) < 0.0 {
                        return false;
                    }
                }
                true
            }
        }
    }

    /// Distance from `p` to the shape boundary; 0 inside.
    pub fn distance_to_point(&self, p: Vec2) -> f64 {
        if self.contains(p) {
            return 0.0;
        }
        match self {
            Shape::Circle { center, radius } => (p.distance(*center) - radius).max(0.0),
            Shape::Polygon { points } => {
                let n = points.len();
                let mut best = f64::INFINITY;
                for i in 0..n {
                    let seg = Segment::new(points[i], points[(i + 1) % n]);
                    best = best.min(seg.distance_to_point(p));
                }
                best
            }
        }
    }

    /// Closest point on the shape boundary to `p`.
    pub fn closest_boundary_point(&self, p: Vec2) -> Vec2 {
        match self {
            Shape::Circle { center, radius } => {
                let d = p - *center;
                if d.length() == 0.0 {
                    *center + Vec2::new(*radius, 0.0)
                } else {
                    *center + d.normalized() * *radius
                }
            }
            Shape::Polygon { points } => {
                let n = points.len();
                let mut best = points[0];
                let mut best_d = f64::INFINITY;
                for i in 0..n {
                    let seg = Segment::new(points[i], points[(i + 1) % n]);
                    let c = seg.closest_point(p);
                    let d = c.distance(p);
                    if d < best_d {
                        best_d = d;
                        best = c;
                    }
                }
                best
            }
        }
    }

    pub fn edges(&self) -> Vec<Segment> {
        match self {
            Shape::Circle { .. } => Vec::new(),
            Shape::Polygon { points } => {
                let n = points.len();
                (0..n)
                    .map(|i| Segment::new(points[i], points[(i + 1) % n]))
                    .collect()
            }
        }
    }
}

/// First intersection parameter `t >= 0` of the ray `origin + t * dir`
/// with a segment, or None.
pub fn ray_segment_hit(origin: Vec2, dir: Vec2, seg: &Segment) -> Option<f64> {
    let d = seg.b - seg.a;
    let denom = dir.cross(d);
    if denom.abs() < 1e-15 {
        return None; // parallel
    }
    let diff = seg.a - origin;
    let t = diff.cross(d) / denom;
    let u = diff.cross(dir) / denom;
    if t >= 0.0 && (0.0..=1.0).contains(&u) {
        Some(t)
    } else {
        None
    }
}

/// First intersection parameter of the ray with a circle boundary.
pub fn ray_circle_hit(origin: Vec2, dir: Vec2, center: Vec2, radius: f64) -> Option<f64> {
    // |origin + t dir - center|^2 = radius^2
    let oc = origin - center;
    let a = dir.length_sq();
    let b = 2.0 * oc.dot(dir);
    let c = oc.length_sq() - radius * radius;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 || a == 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = (-b - sq) / (2.0 * a);
    let t1 = (-b + sq) / (2.0 * a);
    if t0 >= 0.0 {
        Some(t0)
    } else if t1 >= 0.0 {
        // origin inside the circle
        Some(0.0)
    } else {
        None
    }
}

pub fn ray_shape_hit(origin: Vec2, dir: Vec2, shape: &Shape) -> Option<f64> {
    match shape {
        Shape::Circle { center, radius } => ray_circle_hit(origin, dir, *center, *radius),
        Shape::Polygon { points } => {
            if shape.contains(origin) {
                return Some(0.0);
            }
            let n = points.len();
            let mut best: Option<f64> = None;
            for i in 0..n {
                let seg = Segment::new(points[i], points[(i + 1) % n]);
                if let Some(t) = ray_segment_hit(origin, dir, &seg) {
                    best = Some(best.map_or(t, |b: f64| b.min(t)));
                }
            }
            best
        }
    }
}

/// Earliest `t in [0,1]` at which a disc of radius `r` moving from `p0`
/// to `p1` touches the circle (`center`, `radius`).
pub fn sweep_disc_circle(p0: Vec2, p1: Vec2, r: f64, center: Vec2, radius: f64) -> Option<f64> {
    let rr = r + radius;
    let d = p1 - p0;
    let oc = p0 - center;
    if oc.length_sq() <= rr * rr {
        return Some(0.0); // already touching
    }
    let a = d.length_sq();
    if a == 0.0 {
        return None;
    }
    let b = 2.0 * oc.dot(d);
    let c = oc.length_sq() - rr * rr;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let t = (-b - disc.sqrt()) / (2.0 * a);
    if (0.0..=1.0).contains(&t) {
        Some(t)
    } else {
        None
    }
}

/// Earliest `t in [0,1]` at which a disc of radius `r` moving from `p0`
/// to `p1` touches the segment. Treats the segment as a capsule of
/// radius `r` around it and collides the moving center against it.
pub fn sweep_disc_segment(p0: Vec2, p1: Vec2, r: f64, seg: &Segment) -> Option<f64> {
    if seg.distance_to_point(p0) <= r {
        return Some(0.0);
    }
    let mut best: Option<f64> = None;
    let mut consider = |t: f64| {
        if (0.0..=1.0).contains(&t) {
            best = Some(best.map_or(t, |b: f64| b.min(t)));
        }
    };

    // Endpoint caps.
    for cap in [seg.a, seg.b] {
        if let Some(t) = sweep_disc_circle(p0, p1, r, cap, 0.0) {
            consider(t);
        }
    }

    // Flat side: moving point crosses the line offset by r, with the
    // foot of the perpendicular inside the segment span.
    let e = seg.b - seg.a;
    let elen = e.length();
    if elen > 0.0 {
        let n = e.perp().normalized();
        let d = p1 - p0;
        let denom = d.dot(n);
        if denom.abs() > 1e-15 {
            let s0 = (p0 - seg.a).dot(n);
            for side in [r, -r] {
                let t = (side - s0) / denom;
                if (0.0..=1.0).contains(&t) {
                    let hit = p0 + d * t;
                    let along = (hit - seg.a).dot(e) / (elen * elen);
                    if (0.0..=1.0).contains(&along) {
                        consider(t);
                    }
                }
            }
        }
    }
    best
}

pub fn sweep_disc_shape(p0: Vec2, p1: Vec2, r: f64, shape: &Shape) -> Option<f64> {
    match shape {
        Shape::Circle { center, radius } => sweep_disc_circle(p0, p1, r, *center, *radius),
        Shape::Polygon { points } => {
            if shape.distance_to_point(p0) <= r {
                return Some(0.0);
            }
            let n = points.len();
            let mut best: Option<f64> = None;
            for i in 0..n {
                let seg = Segment::new(points[i], points[(i + 1) % n]);
                if let Some(t) = sweep_disc_segment(p0, p1, r, &seg) {
                    best = Some(best.map_or(t, |b: f64| b.min(t)));
                }
            }
            best
        }
    }
}

/// Normalize an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut a = a % std::f64::consts::TAU;
    if a <= -std::f64::consts::PI {
        a += std::f64::consts::TAU;
    } else if a > std::f64::consts::PI {
        a -= std::f64::consts::TAU;
    }
    a
}
