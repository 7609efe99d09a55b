//! Planar geometry on the normalized canvas.
//!
//! All coordinates live in the unit square. Points coming from sensors are
//! snapped to a 1/4096 grid on ingestion so that hashing the scene is
//! platform independent.

use serde::{Deserialize, Serialize};

/// Grid resolution used when snapping ingested coordinates.
pub const QUANTUM: f64 = 1.0 / 4096.0;

/// A point (or displacement) on the canvas or the floor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

#[allow(clippy::should_implement_trait)]
impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Clamps to the unit square and snaps to the quantization grid.
    /// Returns `None` for non-finite components.
    pub fn ingest(x: f64, y: f64) -> Option<Self> {
        if !x.is_finite() || !y.is_finite() {
            return None;
        }
        Some(Self::new(snap(x.clamp(0.0, 1.0)), snap(y.clamp(0.0, 1.0))))
    }

    /// Same as [`Vec2::ingest`] for a point that is already finite.
    pub fn snapped(self) -> Self {
        Self::ingest(self.x, self.y).unwrap_or(Self::new(0.5, 0.5))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }

    pub fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }

    pub fn scale(self, k: f64) -> Self {
        Self::new(self.x * k, self.y * k)
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Self) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn length(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Self) -> f64 {
        self.sub(o).length()
    }

    pub fn lerp(self, o: Self, t: f64) -> Self {
        Self::new(self.x + (o.x - self.x) * t, self.y + (o.y - self.y) * t)
    }
}

fn snap(v: f64) -> f64 {
    (v / QUANTUM).round() * QUANTUM
}

/// Distance from `p` to segment `ab`, and the clamped parameter of the
/// nearest point along the segment.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> (f64, f64) {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    let t = if len2 == 0.0 {
        0.0
    } else {
        (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0)
    };
    (p.distance(a.lerp(b, t)), t)
}

/// Total length of a polyline.
pub fn arclength(points: &[Vec2]) -> f64 {
    points.windows(2).map(|w| w[0].distance(w[1])).sum()
}

/// Nearest point on a polyline to a probe.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub distance: f64,
    /// Arclength from the first vertex to the nearest point.
    pub arclength: f64,
    pub point: Vec2,
}

/// Projects `p` onto the polyline. Ties are resolved towards the smallest
/// arclength. A single-vertex polyline projects onto that vertex.
pub fn project(points: &[Vec2], p: Vec2) -> Option<Projection> {
    let first = *points.first()?;
    let mut best = Projection {
        distance: p.distance(first),
        arclength: 0.0,
        point: first,
    };
    let mut walked = 0.0;
    for w in points.windows(2) {
        let (d, t) = point_segment_distance(p, w[0], w[1]);
        let seg = w[0].distance(w[1]);
        if d < best.distance {
            best = Projection {
                distance: d,
                arclength: walked + t * seg,
                point: w[0].lerp(w[1], t),
            };
        }
        walked += seg;
    }
    Some(best)
}

/// Minimum distance from `p` to any segment of the polyline.
pub fn polyline_distance(points: &[Vec2], p: Vec2) -> f64 {
    project(points, p).map_or(f64::INFINITY, |pr| pr.distance)
}

/// Point located `s` units along the polyline (clamped to its ends).
pub fn point_at(points: &[Vec2], s: f64) -> Vec2 {
    let mut remaining = s.max(0.0);
    for w in points.windows(2) {
        let seg = w[0].distance(w[1]);
        if remaining <= seg && seg > 0.0 {
            return w[0].lerp(w[1], remaining / seg);
        }
        remaining -= seg;
    }
    *points.last().expect("point_at on empty polyline")
}

/// Resamples a polyline to `k` points spaced at equal arclength, including
/// both endpoints.
pub fn resample(points: &[Vec2], k: usize) -> Vec<Vec2> {
    assert!(k >= 2, "resample needs at least two output points");
    let total = arclength(points);
    let mut out = Vec::with_capacity(k);
    let mut seg = 0;
    let mut seg_start = 0.0;
    for i in 0..k {
        let target = total * i as f64 / (k - 1) as f64;
        while seg + 2 < points.len() {
            let len = points[seg].distance(points[seg + 1]);
            if seg_start + len >= target {
                break;
            }
            seg_start += len;
            seg += 1;
        }
        if seg + 1 >= points.len() {
            out.push(points[seg]);
            continue;
        }
        let len = points[seg].distance(points[seg + 1]);
        let t = if len > 0.0 {
            ((target - seg_start) / len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(points[seg].lerp(points[seg + 1], t));
    }
    out[k - 1] = *points.last().unwrap();
    out
}

/// Proper or touching intersection of segments `ab` and `cd`.
/// Collinear overlaps are not reported.
pub fn segment_intersection(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> Option<Vec2> {
    let r = b.sub(a);
    let s = d.sub(c);
    let denom = r.cross(s);
    if denom == 0.0 {
        return None;
    }
    let qp = c.sub(a);
    let t = qp.cross(s) / denom;
    let u = qp.cross(r) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some(a.lerp(b, t))
    } else {
        None
    }
}

/// Axis-aligned rectangle, inclusive bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub const fn new(min: Vec2, max: Vec2) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn center(&self) -> Vec2 {
        self.min.lerp(self.max, 0.5)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: Vec2,
    pub radius: f64,
}

impl Circle {
    pub fn contains(&self, p: Vec2) -> bool {
        self.center.distance(p) <= self.radius
    }

    fn contains_eps(&self, p: Vec2) -> bool {
        self.center.distance(p) <= self.radius * (1.0 + 1e-12) + 1e-15
    }

    fn from_two(a: Vec2, b: Vec2) -> Self {
        Circle {
            center: a.lerp(b, 0.5),
            radius: a.distance(b) / 2.0,
        }
    }

    fn from_three(a: Vec2, b: Vec2, c: Vec2) -> Self {
        let bx = b.x - a.x;
        let by = b.y - a.y;
        let cx = c.x - a.x;
        let cy = c.y - a.y;
        let d = 2.0 * (bx * cy - by * cx);
        if d.abs() < 1e-18 {
            // Collinear: the farthest pair spans the circle.
            let candidates = [Self::from_two(a, b), Self::from_two(a, c), Self::from_two(b, c)];
            return candidates
                .into_iter()
                .max_by(|p, q| p.radius.total_cmp(&q.radius))
                .unwrap();
        }
        let b2 = bx * bx + by * by;
        let c2 = cx * cx + cy * cy;
        let ux = (cy * b2 - by * c2) / d;
        let uy = (bx * c2 - cx * b2) / d;
        let center = Vec2::new(a.x + ux, a.y + uy);
        Circle {
            center,
            radius: center.distance(a),
        }
    }
}

/// Smallest circle enclosing every point (Welzl, iterative form).
///
/// Points are visited in a fixed pseudo-random order so the expected running
/// time stays linear for inputs that arrive along a curve, while the result
/// stays deterministic.
pub fn min_enclosing_circle(points: &[Vec2]) -> Option<Circle> {
    if points.is_empty() {
        return None;
    }
    let mut pts = points.to_vec();
    let mut state = 0x9E37_79B9_7F4A_7C15_u64 ^ pts.len() as u64;
    for i in (1..pts.len()).rev() {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let j = ((state >> 33) % (i as u64 + 1)) as usize;
        pts.swap(i, j);
    }
    let mut c = Circle {
        center: pts[0],
        radius: 0.0,
    };
    for i in 1..pts.len() {
        if c.contains_eps(pts[i]) {
            continue;
        }
        c = Circle {
            center: pts[i],
            radius: 0.0,
        };
        for j in 0..i {
            if c.contains_eps(pts[j]) {
                continue;
            }
            c = Circle::from_two(pts[i], pts[j]);
            for k in 0..j {
                if !c.contains_eps(pts[k]) {
                    c = Circle::from_three(pts[i], pts[j], pts[k]);
                }
            }
        }
    }
    Some(c)
}
