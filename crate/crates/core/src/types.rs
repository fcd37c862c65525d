//! Scenario data model for a single interacting vehicle pair.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)] // std, when linked, provides these methods inherently
use num_traits::Float;

use crate::error::{bail, Result};

/// A 2D position in meters.
pub type Point = [f64; 2];

/// Uniformly sampled sequence of positions for one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    points: Vec<Point>,
    dt: f64,
}

impl Trajectory {
    pub fn new(points: Vec<Point>, dt: f64) -> Result<Self> {
        if points.len() < 2 {
            bail!(Validation, "trajectory needs at least 2 points, got {}", points.len());
        }
        if !(dt > 0.0) || !dt.is_finite() {
            bail!(Validation, "trajectory dt must be positive and finite, got {dt}");
        }
        if let Some(i) = points.iter().position(|p| !p[0].is_finite() || !p[1].is_finite()) {
            bail!(Validation, "trajectory point {i} is not finite");
        }
        Ok(Self { points, dt })
    }

    /// Rebuilds a trajectory from a flat `[x0, y0, x1, y1, ...]` buffer.
    pub fn from_flat(flat: &[f64], dt: f64) -> Result<Self> {
        if !flat.len().is_multiple_of(2) {
            bail!(Shape, "flat trajectory buffer has odd length {}", flat.len());
        }
        Self::new(flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect(), dt)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> Point {
        self.points[0]
    }

    pub fn last(&self) -> Point {
        self.points[self.points.len() - 1]
    }

    /// Velocity over the final step.
    pub fn final_velocity(&self) -> Point {
        let n = self.points.len();
        let (a, b) = (self.points[n - 2], self.points[n - 1]);
        [(b[0] - a[0]) / self.dt, (b[1] - a[1]) / self.dt]
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| [p[0], p[1]]).collect()
    }

    /// Every point shifted by `offset`.
    pub fn translated(&self, offset: Point) -> Self {
        Self { points: self.points.iter().map(|p| [p[0] + offset[0], p[1] + offset[1]]).collect(), dt: self.dt }
    }
}

/// Mean point-wise Euclidean distance between two equally long trajectories.
pub fn average_displacement(a: &[Point], b: &[Point]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let total: f64 = a.iter().zip(b).map(|(p, q)| distance(*p, *q)).sum();
    total / a.len() as f64
}

pub fn distance(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

/// Which vehicle of the interacting pair. `A` reacts, `B` is controlled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Agent {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "UPPERCASE"))]
pub enum Family {
    /// B merges from an adjacent lane into A's lane.
    Merge,
    /// B crosses A's path at an unsignalized conflict point.
    Yield,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Merge => "MERGE",
            Family::Yield => "YIELD",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "MERGE" => Some(Family::Merge),
            "YIELD" => Some(Family::Yield),
            _ => None,
        }
    }
}

/// A map element: lane centerline, stop line, ...
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub tag: String,
    pub points: Vec<Point>,
}

/// Everything observed up to the present: the scene input `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub history_a: Trajectory,
    pub history_b: Trajectory,
    /// Non-interacting context agents (histories only).
    pub extra_agents: Vec<Trajectory>,
    pub map_polylines: Vec<Polyline>,
}

impl Observation {
    pub fn history(&self, agent: Agent) -> &Trajectory {
        match agent {
            Agent::A => &self.history_a,
            Agent::B => &self.history_b,
        }
    }

    pub fn dt(&self) -> f64 {
        self.history_a.dt()
    }

    pub fn history_len(&self) -> usize {
        self.history_a.len()
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.history_a.len();
        let dt = self.history_a.dt();
        if self.history_b.len() != h {
            bail!(Validation, "history_b has {} points, history_a has {h}", self.history_b.len());
        }
        if self.history_b.dt() != dt {
            bail!(Validation, "history_b dt differs from history_a");
        }
        for (i, e) in self.extra_agents.iter().enumerate() {
            if e.dt() != dt {
                bail!(Validation, "extra_agents[{i}] dt differs from history_a");
            }
        }
        for (i, p) in self.map_polylines.iter().enumerate() {
            if p.points.iter().any(|q| !q[0].is_finite() || !q[1].is_finite()) {
                bail!(Validation, "map_polylines[{i}] has a non-finite point");
            }
        }
        Ok(())
    }
}

/// One record of the interactive dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub family: Family,
    pub observation: Observation,
    pub future_a: Trajectory,
    /// Ground-truth future of the controlled agent, `y^{B,0}`.
    pub future_b: Trajectory,
}

impl Scenario {
    pub fn future(&self, agent: Agent) -> &Trajectory {
        match agent {
            Agent::A => &self.future_a,
            Agent::B => &self.future_b,
        }
    }

    pub fn horizon(&self) -> usize {
        self.future_a.len()
    }

    /// Checks every structural invariant; errors name the scenario and field.
    pub fn validate(&self) -> Result<()> {
        let id = &self.id;
        if let Err(e) = self.observation.validate() {
            bail!(Validation, "scenario {id}: observation: {e}");
        }
        let t = self.future_a.len();
        if self.future_b.len() != t {
            bail!(Validation, "scenario {id}: future_b has {} points but future_a has {t}", self.future_b.len());
        }
        let dt = self.observation.dt();
        if self.future_a.dt() != dt || self.future_b.dt() != dt {
            bail!(Validation, "scenario {id}: future dt differs from history dt");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetSplit {
    pub train: Vec<Scenario>,
    pub validation: Vec<Scenario>,
}

impl DatasetSplit {
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for s in self.train.iter().chain(&self.validation) {
            s.validate()?;
            if !seen.insert(s.id.as_str()) {
                bail!(Validation, "scenario {}: duplicate id", s.id);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn trajectory_rejects_short_and_bad_dt() {
        assert!(Trajectory::new(vec![[0.0, 0.0]], 0.5).is_err());
        assert!(Trajectory::new(vec![[0.0, 0.0], [1.0, 0.0]], 0.0).is_err());
        assert!(Trajectory::new(vec![[0.0, 0.0], [f64::NAN, 0.0]], 0.5).is_err());
    }

    #[test]
    fn flat_round_trip() {
        let t = Trajectory::new(vec![[1.0, 2.0], [3.0, 4.0]], 0.5).unwrap();
        assert_eq!(Trajectory::from_flat(&t.to_flat(), 0.5).unwrap(), t);
        assert_eq!(t.final_velocity(), [4.0, 4.0]);
    }
}
