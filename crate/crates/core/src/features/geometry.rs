//! Plane-curve measures: directed Hausdorff and discrete Fréchet distances
//! to a reference line, the smallest enclosing circle and curve entropy.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

pub type Point = [f64; 2];

fn dist2(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

pub fn distance(a: Point, b: Point) -> f64 {
    dist2(a, b).sqrt()
}

/// `n` equally spaced points on the chord from `from` to `to`, endpoints included.
pub fn reference_line(from: Point, to: Point, n: usize) -> Vec<Point> {
    assert!(n >= 2);
    (0..n)
        .map(|k| {
            if k == n - 1 {
                return to;
            }
            let f = k as f64 / (n - 1) as f64;
            [from[0] + f * (to[0] - from[0]), from[1] + f * (to[1] - from[1])]
        })
        .collect()
}

/// `max_{a in A} min_{b in B} |a - b|`, with the early-break scan: once a
/// candidate in `B` is closer than the running maximum, `a` cannot raise it.
pub fn directed_hausdorff(a: &[Point], b: &[Point]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::DegenerateSeries("Hausdorff distance of an empty set".into()));
    }
    let mut cmax = 0.0f64;
    for &p in a {
        let mut cmin = f64::INFINITY;
        let mut dominated = false;
        for &q in b {
            let d = dist2(p, q);
            if d < cmax {
                dominated = true;
                break;
            }
            cmin = cmin.min(d);
        }
        if !dominated && cmin > cmax {
            cmax = cmin;
        }
    }
    Ok(cmax.sqrt())
}

/// Discrete Fréchet distance by dynamic programming over the coupling lattice.
pub fn discrete_frechet(a: &[Point], b: &[Point]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::DegenerateSeries("Fréchet distance needs two points per curve".into()));
    }
    let m = b.len();
    let mut prev = vec![0.0f64; m];
    let mut cur = vec![0.0f64; m];
    for (i, &p) in a.iter().enumerate() {
        for j in 0..m {
            let d = dist2(p, b[j]);
            let reach = match (i, j) {
                (0, 0) => d,
                (0, _) => cur[j - 1],
                (_, 0) => prev[0],
                _ => prev[j].min(prev[j - 1]).min(cur[j - 1]),
            };
            cur[j] = reach.max(d);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m - 1].sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Point,
    pub radius: f64,
}

const CONTAIN_EPS: f64 = 1.0 + 1e-14;

impl Circle {
    pub fn contains(&self, p: Point) -> bool {
        distance(self.center, p) <= self.radius * CONTAIN_EPS
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }
}

pub fn circle_from_diameter(a: Point, b: Point) -> Circle {
    let c = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
    Circle { center: c, radius: distance(c, a).max(distance(c, b)) }
}

/// Circumcircle of three points, `None` when they are collinear.
pub fn circumcircle(a: Point, b: Point, c: Point) -> Option<Circle> {
    let ox = (a[0].min(b[0]).min(c[0]) + a[0].max(b[0]).max(c[0])) / 2.0;
    let oy = (a[1].min(b[1]).min(c[1]) + a[1].max(b[1]).max(c[1])) / 2.0;
    let (ax, ay) = (a[0] - ox, a[1] - oy);
    let (bx, by) = (b[0] - ox, b[1] - oy);
    let (cx, cy) = (c[0] - ox, c[1] - oy);
    let d = (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by)) * 2.0;
    if d == 0.0 {
        return None;
    }
    let (a2, b2, c2) = (ax * ax + ay * ay, bx * bx + by * by, cx * cx + cy * cy);
    let x = ox + (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d;
    let y = oy + (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d;
    let center = [x, y];
    let radius = distance(center, a).max(distance(center, b)).max(distance(center, c));
    Some(Circle { center, radius })
}

fn cross(p: Point, q: Point, r: Point) -> f64 {
    (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
}

fn circle_with_two(points: &[Point], p: Point, q: Point) -> Circle {
    let base = circle_from_diameter(p, q);
    let mut left: Option<Circle> = None;
    let mut right: Option<Circle> = None;
    for &r in points {
        if base.contains(r) {
            continue;
        }
        let side = cross(p, q, r);
        let Some(c) = circumcircle(p, q, r) else { continue };
        let offset = cross(p, q, c.center);
        if side > 0.0 && left.is_none_or(|l| offset > cross(p, q, l.center)) {
            left = Some(c);
        } else if side < 0.0 && right.is_none_or(|rc| offset < cross(p, q, rc.center)) {
            right = Some(c);
        }
    }
    match (left, right) {
        (None, None) => base,
        (Some(l), None) => l,
        (None, Some(r)) => r,
        (Some(l), Some(r)) => {
            if l.radius <= r.radius {
                l
            } else {
                r
            }
        }
    }
}

fn circle_with_one(points: &[Point], p: Point) -> Circle {
    let mut c = Circle { center: p, radius: 0.0 };
    for (i, &q) in points.iter().enumerate() {
        if !c.contains(q) {
            c = if c.radius == 0.0 {
                circle_from_diameter(p, q)
            } else {
                circle_with_two(&points[..=i], p, q)
            };
        }
    }
    c
}

/// Smallest enclosing circle by the randomized incremental (move-to-front)
/// algorithm; the shuffle is seeded so results are reproducible.
pub fn smallest_enclosing_circle(points: &[Point]) -> Option<Circle> {
    if points.is_empty() {
        return None;
    }
    let mut shuffled = points.to_vec();
    shuffled.shuffle(&mut rng::substream(0, "enclosing-circle", points.len() as u64));
    let mut c: Option<Circle> = None;
    for i in 0..shuffled.len() {
        let p = shuffled[i];
        if c.is_none_or(|c| !c.contains(p)) {
            c = Some(circle_with_one(&shuffled[..=i], p));
        }
    }
    c
}

pub fn arc_length(points: &[Point]) -> f64 {
    points.windows(2).map(|w| distance(w[0], w[1])).sum()
}

/// `log2(2L / D) / log2(N - 1)` for a polyline of `N` points with arc length
/// `L` and smallest-enclosing-circle diameter `D`.
pub fn curve_entropy(points: &[Point]) -> Result<f64> {
    let n = points.len();
    if n < 3 {
        return Err(Error::DegenerateSeries(format!("curve entropy needs 3 points, got {n}")));
    }
    let d = smallest_enclosing_circle(points).map_or(0.0, |c| c.diameter());
    if !(d > 0.0) {
        return Err(Error::DegenerateSeries("curve has zero extent".into()));
    }
    let l = arc_length(points);
    Ok((2.0 * l / d).log2() / ((n - 1) as f64).log2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn hausdorff_examples() {
        let b = vec![[0.0, 0.0], [1.0, 1.0], [2.0, 0.5]];
        assert_eq!(directed_hausdorff(&b[..2], &b).unwrap(), 0.0);
        assert_eq!(directed_hausdorff(&[[0.0, 0.0]], &[[3.0, 4.0]]).unwrap(), 5.0);
        assert!(directed_hausdorff(&[], &b).is_err());
    }

    #[test]
    fn hausdorff_is_directed() {
        let a = vec![[0.0, 0.0]];
        let b = vec![[0.0, 0.0], [10.0, 0.0]];
        assert_eq!(directed_hausdorff(&a, &b).unwrap(), 0.0);
        assert_eq!(directed_hausdorff(&b, &a).unwrap(), 10.0);
    }

    #[test]
    fn frechet_examples() {
        let a: Vec<Point> = (0..6).map(|k| [k as f64, (k as f64).sin()]).collect();
        assert_eq!(discrete_frechet(&a, &a).unwrap(), 0.0);
        let h = 0.75;
        let b: Vec<Point> = a.iter().map(|p| [p[0], p[1] + h]).collect();
        assert!((discrete_frechet(&a, &b).unwrap() - h).abs() < 1e-15);
    }

    #[test]
    fn collinear_circle_uses_endpoints() {
        let pts: Vec<Point> = (0..9).map(|k| [k as f64 / 8.0, k as f64 / 8.0]).collect();
        let c = smallest_enclosing_circle(&pts).unwrap();
        assert!((c.diameter() - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn straight_line_entropy() {
        for n in [3usize, 5, 9, 33] {
            let pts: Vec<Point> = (0..n).map(|k| {
                let f = k as f64 / (n - 1) as f64;
                [f, 0.2 + 0.6 * f]
            }).collect();
            let ec = curve_entropy(&pts).unwrap();
            assert!((ec - 1.0 / ((n - 1) as f64).log2()).abs() < 1e-12, "n={n}: {ec}");
        }
    }

    #[test]
    fn oscillation_raises_entropy() {
        let n = 41;
        let line: Vec<Point> = (0..n).map(|k| [k as f64 / 40.0, k as f64 / 40.0]).collect();
        let wiggly: Vec<Point> = line
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let bump = if k == 0 || k == n - 1 { 0.0 } else if k % 2 == 0 { 0.03 } else { -0.03 };
                [p[0], p[1] + bump]
            })
            .collect();
        assert!(curve_entropy(&wiggly).unwrap() > curve_entropy(&line).unwrap());
    }

    #[test]
    fn degenerate_entropy_inputs() {
        assert!(curve_entropy(&[[0.0, 0.0], [1.0, 1.0]]).is_err());
        assert!(curve_entropy(&[[0.5, 0.5]; 4]).is_err());
    }

    #[test]
    fn circle_contains_all_random_points() {
        let mut r = rng::substream(9, "test", 0);
        for _ in 0..50 {
            let pts: Vec<Point> = (0..30).map(|_| [r.random(), r.random()]).collect();
            let c = smallest_enclosing_circle(&pts).unwrap();
            assert!(pts.iter().all(|&p| c.contains(p)));
        }
    }
}
