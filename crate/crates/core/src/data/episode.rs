//! Robot start/goal sampling across the dominant flow, and episode manifests.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, Segment};
use crate::types::{Point, DT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    /// Pedestrians replay the recording.
    Offline,
    /// Pedestrians are reactive agents.
    Online,
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setting::Offline => "offline",
            Setting::Online => "online",
        })
    }
}

impl FromStr for Setting {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "offline" => Ok(Setting::Offline),
            "online" => Ok(Setting::Online),
            _ => Err(format!("unknown setting {s:?} (expected offline or online)")),
        }
    }
}

/// Start and goal regions are rectangles centered `offset` meters on either
/// side of the flow line through the segment centroid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodeSampling {
    pub offset: f64,
    /// Half-extent of each region along the flow (m).
    pub half_along: f64,
    /// Half-extent of each region across the flow (m).
    pub half_across: f64,
    /// Recording time kept after the start frame where possible (s).
    pub horizon: f64,
    /// Shortest accepted start-goal distance (m).
    pub min_distance: f64,
}

impl Default for EpisodeSampling {
    fn default() -> Self {
        Self { offset: 4.0, half_along: 1.5, half_across: 0.5, horizon: 40.0, min_distance: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub segment: usize,
    /// Position in the dataset's frame list where the episode starts.
    pub start_frame: usize,
    pub start: Point,
    pub goal: Point,
    pub setting: Setting,
    pub seed: u64,
}

const MAX_TRIES: usize = 100;

pub fn sample_episode<R: Rng>(
    segment: &Segment,
    setting: Setting,
    sampling: &EpisodeSampling,
    rng: &mut R,
) -> Result<EpisodeSpec, DataError> {
    let size = segment.bounds.size();
    if !(size.x > 0.0 && size.y > 0.0) {
        return Err(DataError::Degenerate(format!("segment {} has an empty scene box", segment.id)));
    }
    let flow = segment.dominant_flow;
    let across = Point::new(-flow.y, flow.x);
    let draw = |side: f64, rng: &mut R| {
        let a = rng.gen_range(-sampling.half_along..=sampling.half_along);
        let b = rng.gen_range(-sampling.half_across..=sampling.half_across);
        segment.bounds.clamp(segment.centroid + across * (side * sampling.offset + b) + flow * a)
    };
    for _ in 0..MAX_TRIES {
        let (mut start, mut goal) = (draw(1.0, rng), draw(-1.0, rng));
        if rng.gen_bool(0.5) {
            std::mem::swap(&mut start, &mut goal);
        }
        if (goal - start).norm() >= sampling.min_distance {
            let keep = (sampling.horizon / DT).round() as usize;
            let latest = segment.last_frame.saturating_sub(keep).max(segment.first_frame);
            let start_frame = rng.gen_range(segment.first_frame..=latest);
            return Ok(EpisodeSpec { segment: segment.id, start_frame, start, goal, setting, seed: rng.gen() });
        }
    }
    Err(DataError::Degenerate(format!("segment {}: start and goal regions collapse inside the scene box", segment.id)))
}

pub const MANIFEST_HEADER: &str = "# segment start_frame start_x start_y goal_x goal_y seed setting";

pub fn write_manifest<W: Write>(specs: &[EpisodeSpec], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{MANIFEST_HEADER}")?;
    for s in specs {
        writeln!(
            w,
            "{} {} {} {} {} {} {} {}",
            s.segment, s.start_frame, s.start.x, s.start.y, s.goal.x, s.goal.y, s.seed, s.setting
        )?;
    }
    Ok(())
}

pub fn read_manifest(text: &str) -> Result<Vec<EpisodeSpec>, DataError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let c: Vec<&str> = body.split_whitespace().collect();
        if c.len() != 8 {
            return Err(DataError::Parse { line, msg: format!("expected 8 columns, found {}", c.len()) });
        }
        let err = |what: &str, v: &str| DataError::Parse { line, msg: format!("bad {what} {v:?}") };
        let int = |k: usize, what: &str| c[k].parse::<usize>().map_err(|_| err(what, c[k]));
        let real = |k: usize, what: &str| {
            c[k].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| err(what, c[k]))
        };
        out.push(EpisodeSpec {
            segment: int(0, "segment")?,
            start_frame: int(1, "start_frame")?,
            start: Point::new(real(2, "start_x")?, real(3, "start_y")?),
            goal: Point::new(real(4, "goal_x")?, real(5, "goal_y")?),
            seed: c[6].parse().map_err(|_| err("seed", c[6]))?,
            setting: c[7].parse().map_err(|_| err("setting", c[7]))?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Bounds;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn segment(flow: Point) -> Segment {
        Segment {
            id: 3,
            first_frame: 100,
            last_frame: 1000,
            min_count: 5,
            max_count: 9,
            mean_count: 7.0,
            dominant_flow: flow.normalize(),
            centroid: Point::new(1.0, -0.5),
            bounds: Bounds::new(Point::new(-12.0, -6.0), Point::new(12.0, 6.0)),
        }
    }

    #[test]
    fn seeded_sampling_is_repeatable() {
        let s = segment(Point::new(1.0, 0.0));
        let a = sample_episode(&s, Setting::Online, &Default::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = sample_episode(&s, Setting::Online, &Default::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.segment, 3);
        assert!((100..=600).contains(&a.start_frame));
    }

    #[test]
    fn start_goal_cross_the_flow_and_stay_in_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for flow in [Point::new(1.0, 0.0), Point::new(0.3, -1.0), Point::new(-1.0, 1.0)] {
            let s = segment(flow);
            let n = 2000;
            let mut crossing = 0;
            for _ in 0..n {
                let e = sample_episode(&s, Setting::Offline, &Default::default(), &mut rng).unwrap();
                assert!(s.bounds.contains(e.start) && s.bounds.contains(e.goal));
                assert!(e.start != e.goal);
                let d = (e.goal - e.start).normalize();
                if d.dot(&s.dominant_flow).abs() <= 0.5 {
                    crossing += 1;
                }
            }
            assert!(crossing as f64 >= 0.9 * n as f64, "{crossing}");
        }
    }

    #[test]
    fn degenerate_box_rejected() {
        let mut s = segment(Point::new(1.0, 0.0));
        s.bounds = Bounds::new(Point::zeros(), Point::new(5.0, 0.0));
        assert!(sample_episode(&s, Setting::Offline, &Default::default(), &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let s = segment(Point::new(0.2, 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let specs: Vec<EpisodeSpec> = (0..20)
            .map(|k| {
                let setting = if k % 2 == 0 { Setting::Online } else { Setting::Offline };
                sample_episode(&s, setting, &Default::default(), &mut rng).unwrap()
            })
            .collect();
        let mut buf = Vec::new();
        write_manifest(&specs, &mut buf).unwrap();
        assert_eq!(read_manifest(std::str::from_utf8(&buf).unwrap()).unwrap(), specs);
        assert!(matches!(read_manifest("0 1 2 3 4 5 6 sideways\n"), Err(DataError::Parse { line: 1, .. })));
    }
}
