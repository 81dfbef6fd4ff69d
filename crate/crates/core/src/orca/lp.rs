//! Incremental 2D linear programming over half-planes inside a speed disc.
//!
//! A [`Line`] admits the velocities on its left: `det(direction, v - point) >= 0`.

use crate::types::Point;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub point: Point,
    /// Unit direction.
    pub direction: Point,
}

#[inline]
pub(crate) fn det(a: Point, b: Point) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Scales `v` down to length `radius` when longer.
pub fn clamp_norm(v: Point, radius: f64) -> Point {
    let n2 = v.norm_squared();
    if n2 > radius * radius {
        v * (radius / n2.sqrt())
    } else {
        v
    }
}

fn violates(line: &Line, v: Point) -> bool {
    det(line.direction, line.point - v) > 0.0
}

/// Optimum on `lines[k]` subject to `lines[..k]` and the disc.
fn solve_on_line(lines: &[Line], k: usize, radius: f64, opt: Point, direction_opt: bool) -> Option<Point> {
    let line = &lines[k];
    let dot = line.point.dot(&line.direction);
    let disc = dot * dot + radius * radius - line.point.norm_squared();
    if disc < 0.0 {
        return None;
    }
    let root = disc.sqrt();
    let (mut t_left, mut t_right) = (-dot - root, -dot + root);
    for other in &lines[..k] {
        let denom = det(line.direction, other.direction);
        let numer = det(other.direction, line.point - other.point);
        if denom.abs() <= EPS {
            if numer < 0.0 {
                return None;
            }
            continue;
        }
        let t = numer / denom;
        if denom >= 0.0 {
            t_right = t_right.min(t);
        } else {
            t_left = t_left.max(t);
        }
        if t_left > t_right {
            return None;
        }
    }
    let t = if direction_opt {
        if opt.dot(&line.direction) > 0.0 {
            t_right
        } else {
            t_left
        }
    } else {
        line.direction.dot(&(opt - line.point)).clamp(t_left, t_right)
    };
    Some(line.point + line.direction * t)
}

/// Velocity in the disc closest to `opt` (or furthest along `opt` when
/// `direction_opt`) satisfying every line. On failure returns the index of the
/// first line that could not be satisfied together with the best velocity so
/// far.
pub fn solve_2d(lines: &[Line], radius: f64, opt: Point, direction_opt: bool) -> (Point, Option<usize>) {
    let mut result = if direction_opt { opt * radius } else { clamp_norm(opt, radius) };
    for k in 0..lines.len() {
        if violates(&lines[k], result) {
            match solve_on_line(lines, k, radius, opt, direction_opt) {
                Some(v) => result = v,
                None => return (result, Some(k)),
            }
        }
    }
    (result, None)
}

/// Minimizes the largest violation over `lines[begin..]` given the partial
/// solution `result`.
pub fn solve_3d(lines: &[Line], begin: usize, radius: f64, mut result: Point) -> Point {
    let mut distance = 0.0;
    for i in begin..lines.len() {
        let li = &lines[i];
        if det(li.direction, li.point - result) <= distance {
            continue;
        }
        let mut projected = Vec::with_capacity(i);
        for lj in &lines[..i] {
            let d = det(li.direction, lj.direction);
            let point = if d.abs() <= EPS {
                if li.direction.dot(&lj.direction) > 0.0 {
                    continue;
                }
                (li.point + lj.point) * 0.5
            } else {
                li.point + li.direction * (det(lj.direction, li.point - lj.point) / d)
            };
            let dir = lj.direction - li.direction;
            let n = dir.norm();
            if n <= EPS {
                continue;
            }
            projected.push(Line { point, direction: dir / n });
        }
        let target = Point::new(-li.direction.y, li.direction.x);
        let (v, fail) = solve_2d(&projected, radius, target, true);
        if fail.is_none() {
            result = v;
        }
        distance = det(li.direction, li.point - result);
    }
    result
}

/// 2D solve with the 3D fallback when the half-planes have no common point.
pub fn solve(lines: &[Line], radius: f64, opt: Point) -> Point {
    match solve_2d(lines, radius, opt, false) {
        (v, None) => v,
        (v, Some(k)) => solve_3d(lines, k, radius, v),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(px: f64, py: f64, angle: f64) -> Line {
        Line { point: Point::new(px, py), direction: Point::new(angle.cos(), angle.sin()) }
    }

    #[test]
    fn unconstrained_is_projection() {
        assert_eq!(solve(&[], 1.0, Point::new(0.3, 0.4)), Point::new(0.3, 0.4));
        let v = solve(&[], 1.0, Point::new(3.0, 4.0));
        assert!((v - Point::new(0.6, 0.8)).norm() < 1e-15);
    }

    #[test]
    fn single_half_plane_projects_onto_boundary() {
        // admit y >= 0.5 (left of +x direction through (0, 0.5))
        let v = solve(&[line(0.0, 0.5, 0.0)], 2.0, Point::new(0.7, 0.0));
        assert!((v - Point::new(0.7, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn infeasible_minimizes_worst_violation() {
        // y >= 0.5 and y <= -0.5: best compromise is y = 0
        let lines = [line(0.0, 0.5, 0.0), line(0.0, -0.5, std::f64::consts::PI)];
        let v = solve(&lines, 2.0, Point::new(0.3, 0.0));
        assert!(v.y.abs() < 1e-9, "{v:?}");
    }

    proptest! {
        #[test]
        fn feasible_result_satisfies_all_and_stays_in_disc(
            raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -3.2f64..3.2), 0..8),
            ox in -3.0f64..3.0, oy in -3.0f64..3.0,
        ) {
            // every line passes left of the origin so 0 is always feasible
            let lines: Vec<Line> = raw.iter().map(|&(px, py, a)| {
                let mut l = line(px, py, a);
                if det(l.direction, l.point) > 0.0 {
                    l.direction = -l.direction;
                }
                l
            }).collect();
            let (v, fail) = solve_2d(&lines, 1.0, Point::new(ox, oy), false);
            prop_assert!(fail.is_none());
            prop_assert!(v.norm() <= 1.0 + 1e-9);
            for l in &lines {
                prop_assert!(det(l.direction, l.point - v) <= 1e-9);
            }
        }
    }
}
