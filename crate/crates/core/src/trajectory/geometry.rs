//! Oriented bounding-rectangle distances.

use super::VehicleState;

type Point = [f64; 2];

/// Corners of a vehicle footprint, counter-clockwise.
pub fn rectangle_corners(v: &VehicleState) -> [Point; 4] {
    let (s, c) = v.heading.sin_cos();
    let hl = 0.5 * v.length;
    let hw = 0.5 * v.width;
    let local = [[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]];
    local.map(|[a, b]| [v.x + a * c - b * s, v.y + a * s + b * c])
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let ap = sub(p, a);
    let len2 = dot(ab, ab);
    let t = if len2 > 0.0 {
        (dot(ap, ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
    let d = sub(p, q);
    dot(d, d).sqrt()
}

/// Separating-axis test on the four edge normals; touching counts as overlap.
fn overlaps(a: &[Point; 4], b: &[Point; 4]) -> bool {
    for poly in [a, b] {
        for i in 0..4 {
            let e = sub(poly[(i + 1) % 4], poly[i]);
            let axis = [-e[1], e[0]];
            let project = |p: &[Point; 4]| {
                p.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), q| {
                    let d = dot(*q, axis);
                    (lo.min(d), hi.max(d))
                })
            };
            let (alo, ahi) = project(a);
            let (blo, bhi) = project(b);
            if ahi < blo || bhi < alo {
                return false;
            }
        }
    }
    true
}

/// Euclidean gap between two vehicle footprints, `0` when they overlap.
pub fn rectangle_gap(a: &VehicleState, b: &VehicleState) -> f64 {
    let ca = rectangle_corners(a);
    let cb = rectangle_corners(b);
    if overlaps(&ca, &cb) {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for (p, poly) in [(&ca, &cb), (&cb, &ca)] {
        for &pt in p.iter() {
            for i in 0..4 {
                best = best.min(point_segment_distance(pt, poly[i], poly[(i + 1) % 4]));
            }
        }
    }
    best
}

/// Minimum remaining distance from the subject to any neighbor, `None` when
/// there are no neighbors.
pub fn compute_mrd(subject: &VehicleState, neighbors: &[&VehicleState]) -> Option<f64> {
    neighbors
        .iter()
        .map(|n| rectangle_gap(subject, n))
        .min_by(|a, b| a.total_cmp(b))
}
