//! Scene featurization shared by every model.
//!
//! Features are origin-centered on the target agent's present position.
//! Histories of the target and the other agent are flattened; map polylines
//! are summarized by the offset to their nearest point plus a tag one-hot;
//! context agents contribute their last position and velocity.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // std, when linked, provides these methods inherently
use num_traits::Float;

use crate::error::{bail, Result};
use crate::types::{Agent, Observation, Point, Trajectory};

/// Meters per feature unit for positions.
pub const POSITION_SCALE: f64 = 20.0;
const VELOCITY_SCALE: f64 = 10.0;
const MAP_TAGS: [&str; 2] = ["lane", "stop_line"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureLayout {
    pub history_len: usize,
    pub future_len: usize,
    pub max_polylines: usize,
    pub max_extra_agents: usize,
}

impl FeatureLayout {
    pub const VERSION: u32 = 1;

    pub fn new(history_len: usize, future_len: usize) -> Self {
        Self { history_len, future_len, max_polylines: 4, max_extra_agents: 2 }
    }

    pub fn scene_dim(&self) -> usize {
        4 * self.history_len + 2 + self.max_polylines * (2 + MAP_TAGS.len() + 1) + self.max_extra_agents * 4
    }

    /// Flattened future trajectory length (`2T`).
    pub fn future_dim(&self) -> usize {
        2 * self.future_len
    }
}

/// Reference frame of a featurized target agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub origin: Point,
    /// Final-step velocity of the target's history.
    pub velocity: Point,
}

impl Frame {
    /// Flattened constant-velocity extrapolation over `steps` future points.
    pub fn constant_velocity(&self, steps: usize, dt: f64) -> Vec<f64> {
        (1..=steps)
            .flat_map(|t| {
                let s = t as f64 * dt;
                [self.origin[0] + self.velocity[0] * s, self.origin[1] + self.velocity[1] * s]
            })
            .collect()
    }

    /// `origin` repeated `steps` times, flattened.
    pub fn tiled_origin(&self, steps: usize) -> Vec<f64> {
        (0..steps).flat_map(|_| self.origin).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneFeatures {
    pub values: Vec<f64>,
    pub frame: Frame,
}

fn push_relative(out: &mut Vec<f64>, traj: &Trajectory, origin: Point) {
    for p in traj.points() {
        out.push((p[0] - origin[0]) / POSITION_SCALE);
        out.push((p[1] - origin[1]) / POSITION_SCALE);
    }
}

/// Closest point of a polyline (segments, not just vertices) to `q`.
pub fn nearest_point(points: &[Point], q: Point) -> Option<Point> {
    match points {
        [] => None,
        [only] => Some(*only),
        _ => points
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                let d = [b[0] - a[0], b[1] - a[1]];
                let len2 = d[0] * d[0] + d[1] * d[1];
                let s = if len2 > 0.0 { (((q[0] - a[0]) * d[0] + (q[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
                [a[0] + s * d[0], a[1] + s * d[1]]
            })
            .min_by(|p, r| {
                let dp = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
                let dr = (r[0] - q[0]).powi(2) + (r[1] - q[1]).powi(2);
                dp.total_cmp(&dr)
            }),
    }
}

pub fn scene_features(layout: &FeatureLayout, x: &Observation, target: Agent) -> Result<SceneFeatures> {
    let h = layout.history_len;
    if x.history_a.len() != h || x.history_b.len() != h {
        bail!(Shape, "feature layout expects histories of {h} points, got {} and {}", x.history_a.len(), x.history_b.len());
    }
    let (own, other) = match target {
        Agent::A => (&x.history_a, &x.history_b),
        Agent::B => (&x.history_b, &x.history_a),
    };
    let frame = Frame { origin: own.last(), velocity: own.final_velocity() };
    let origin = frame.origin;
    let mut values = Vec::with_capacity(layout.scene_dim());
    push_relative(&mut values, own, origin);
    push_relative(&mut values, other, origin);
    values.extend(match target {
        Agent::A => [1.0, 0.0],
        Agent::B => [0.0, 1.0],
    });
    for slot in 0..layout.max_polylines {
        let poly = x.map_polylines.get(slot);
        match poly.and_then(|p| nearest_point(&p.points, origin).map(|n| (p, n))) {
            Some((p, n)) => {
                values.push((n[0] - origin[0]) / POSITION_SCALE);
                values.push((n[1] - origin[1]) / POSITION_SCALE);
                let mut known = false;
                for tag in MAP_TAGS {
                    let hit = p.tag == tag;
                    known |= hit;
                    values.push(if hit { 1.0 } else { 0.0 });
                }
                values.push(if known { 0.0 } else { 1.0 });
            }
            None => values.extend(core::iter::repeat_n(0.0, 2 + MAP_TAGS.len() + 1)),
        }
    }
    for slot in 0..layout.max_extra_agents {
        match x.extra_agents.get(slot) {
            Some(e) => {
                let last = e.last();
                let v = e.final_velocity();
                values.extend([
                    (last[0] - origin[0]) / POSITION_SCALE,
                    (last[1] - origin[1]) / POSITION_SCALE,
                    v[0] / VELOCITY_SCALE,
                    v[1] / VELOCITY_SCALE,
                ]);
            }
            None => values.extend([0.0; 4]),
        }
    }
    debug_assert_eq!(values.len(), layout.scene_dim());
    Ok(SceneFeatures { values, frame })
}

/// Flattened future expressed relative to `origin`, in feature units.
pub fn future_features(traj: &Trajectory, origin: Point) -> Vec<f64> {
    let mut out = vec![];
    push_relative(&mut out, traj, origin);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_scenarios, SynthConfig};

    #[test]
    fn nearest_point_projects_onto_segment() {
        let n = nearest_point(&[[0.0, 0.0], [10.0, 0.0]], [3.0, 4.0]).unwrap();
        assert_eq!(n, [3.0, 0.0]);
        assert_eq!(nearest_point(&[], [0.0, 0.0]), None);
    }

    #[test]
    fn feature_dimension_matches_layout() {
        let s = &synth_scenarios(&SynthConfig::default(), 1, 2).unwrap()[1];
        let layout = FeatureLayout::new(10, 16);
        for agent in [Agent::A, Agent::B] {
            let f = scene_features(&layout, &s.observation, agent).unwrap();
            assert_eq!(f.values.len(), layout.scene_dim());
            assert!(f.values.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn wrong_history_length() {
        let s = &synth_scenarios(&SynthConfig::default(), 1, 1).unwrap()[0];
        let layout = FeatureLayout::new(8, 16);
        assert!(scene_features(&layout, &s.observation, Agent::A).is_err());
    }
}
