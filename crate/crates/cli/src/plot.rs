//! SVG trajectory view: robot path, pedestrian tracks and group hulls.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crowdnav::grouping::{cluster_groups, GroupingError, GroupingParams};
use crowdnav::sim::EpisodeRecord;
use crowdnav::Point;

const PX_PER_M: f64 = 40.0;
const MARGIN: f64 = 1.0;
/// Group hulls are drawn every this many steps, and at the last step.
const SNAPSHOT_EVERY: usize = 50;

/// Convex hull, counter-clockwise, without collinear points.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut p: Vec<Point> = points.to_vec();
    p.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let cross = |o: &Point, a: &Point, b: &Point| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    let mut hull: Vec<Point> = Vec::with_capacity(2 * p.len());
    for pass in [p.clone(), p.iter().rev().copied().collect()] {
        let floor = hull.len();
        for q in pass {
            while hull.len() >= floor + 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], &q) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    hull
}

struct Frame {
    min: Point,
    max: Point,
}

impl Frame {
    fn x(&self, p: &Point) -> f64 {
        (p.x - self.min.x) * PX_PER_M
    }
    fn y(&self, p: &Point) -> f64 {
        (self.max.y - p.y) * PX_PER_M
    }
    fn pts(&self, ps: &[Point]) -> String {
        ps.iter().map(|p| format!("{:.2},{:.2}", self.x(p), self.y(p))).collect::<Vec<_>>().join(" ")
    }
}

pub fn render_svg(r: &EpisodeRecord, grouping: &GroupingParams) -> Result<String, GroupingError> {
    let robot: Vec<Point> =
        std::iter::once(r.initial.position()).chain(r.steps.iter().map(|s| s.robot.position())).collect();
    let mut tracks: BTreeMap<u32, Vec<Point>> = BTreeMap::new();
    for s in &r.steps {
        for h in &s.visible {
            tracks.entry(h.id).or_default().push(h.position());
        }
    }

    let goal = r.goal.position();
    let all = robot.iter().chain(tracks.values().flatten()).chain(std::iter::once(&goal));
    let (mut min, mut max) = (Point::repeat(f64::INFINITY), Point::repeat(f64::NEG_INFINITY));
    for p in all {
        min = min.inf(p);
        max = max.sup(p);
    }
    let f = Frame { min: min - Point::repeat(MARGIN), max: max + Point::repeat(MARGIN) };
    let (w, h) = ((f.max.x - f.min.x) * PX_PER_M, (f.max.y - f.min.y) * PX_PER_M);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.2} {h:.2}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        "<title>{} {:?} t={:.1}s steps={}</title>",
        r.planner,
        r.outcome,
        r.navigation_time,
        r.steps.len()
    );

    let snaps: Vec<usize> = (0..r.steps.len())
        .filter(|k| k % SNAPSHOT_EVERY == 0 || k + 1 == r.steps.len())
        .collect();
    for &k in &snaps {
        let humans = &r.steps[k].visible;
        let groups = cluster_groups(humans, grouping)?;
        for g in &groups.groups {
            let hull = convex_hull(&g.member_positions);
            let _ = writeln!(
                s,
                r##"<polygon points="{}" fill="#f4a261" fill-opacity="0.2" stroke="#e76f51" stroke-width="1.5" stroke-linejoin="round"/>"##,
                f.pts(&hull)
            );
        }
        for hm in humans {
            let p = hm.position();
            let _ = writeln!(
                s,
                r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="#8d99ae" fill-opacity="0.6"/>"##,
                f.x(&p),
                f.y(&p),
                0.25 * PX_PER_M
            );
        }
    }
    for (id, t) in &tracks {
        let _ = writeln!(
            s,
            r##"<polyline data-ped="{id}" points="{}" fill="none" stroke="#8d99ae" stroke-width="1"/>"##,
            f.pts(t)
        );
    }
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#1d3557" stroke-width="2.5"/>"##,
        f.pts(&robot)
    );
    let _ = writeln!(
        s,
        r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="#2a9d8f" fill-opacity="0.3" stroke="#2a9d8f"/>"##,
        f.x(&goal),
        f.y(&goal),
        0.5 * PX_PER_M
    );
    let p0 = r.initial.position();
    let _ = writeln!(s, r##"<circle cx="{:.2}" cy="{:.2}" r="5" fill="#1d3557"/>"##, f.x(&p0), f.y(&p0));
    s.push_str("</svg>\n");
    Ok(s)
}
