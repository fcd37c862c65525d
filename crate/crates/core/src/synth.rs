//! Seeded generator of interacting-pair scenarios.
//!
//! Agent B executes an open-loop maneuver parameterized by a scalar in
//! `[-1, 1]` (assertive at `-1`, yielding at `+1`). Agent A is reactive: it
//! follows the intelligent driver model and treats B as a leader (merge) or
//! the conflict point as a stopped obstacle (crossing) whenever B is about to
//! occupy its path. The maneuver is never observable from the history, only
//! from B's future, so the causal link from `y^B` to A's progress is known.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // std, when linked, provides these methods inherently
use num_traits::Float;

use rand::Rng as _;

use crate::error::{bail, Result};
use crate::rng::{self, Rng};
use crate::types::{Family, Observation, Point, Polyline, Scenario, Trajectory};

/// Intelligent driver model parameters for agent A.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct IdmParams {
    pub max_accel: f64,
    pub comfort_decel: f64,
    pub min_gap: f64,
    pub time_headway: f64,
    pub exponent: f64,
    pub vehicle_length: f64,
    /// Hard braking limit (m/s^2, positive).
    pub max_decel: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self { max_accel: 1.5, comfort_decel: 2.5, min_gap: 2.0, time_headway: 1.2, exponent: 4.0, vehicle_length: 4.5, max_decel: 8.0 }
    }
}

impl IdmParams {
    /// IDM acceleration; `leader` is `(gap_m, leader_speed)`.
    pub fn accel(&self, speed: f64, desired: f64, leader: Option<(f64, f64)>) -> f64 {
        let free = 1.0 - (speed / desired.max(0.1)).powf(self.exponent);
        let interaction = match leader {
            Some((gap, lead_speed)) => {
                let approach = speed - lead_speed;
                let desired_gap = self.min_gap
                    + (speed * self.time_headway + speed * approach / (2.0 * (self.max_accel * self.comfort_decel).sqrt())).max(0.0);
                (desired_gap / gap.max(0.1)).powi(2)
            }
            None => 0.0,
        };
        (self.max_accel * (free - interaction)).max(-self.max_decel)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SynthConfig {
    /// Observed steps `H`, including the present.
    pub history_len: usize,
    /// Predicted steps `T`.
    pub future_len: usize,
    pub dt: f64,
    /// Integration substeps per recorded step.
    pub substeps: usize,
    /// Desired speed range of A.
    pub speed_a: [f64; 2],
    /// A's speed at the first recorded step, as a fraction of its desired speed.
    pub initial_speed_fraction: [f64; 2],
    pub speed_b: [f64; 2],
    /// Bound on any recorded step length divided by `dt`.
    pub v_max: f64,
    /// Standard deviation of the position noise on every recorded point (m).
    pub noise_std: f64,
    /// Probability that B's timing makes the pair genuinely interact.
    pub interaction_prob: f64,
    /// Probability that B's maneuver falls on the assertive half `[-1, 0)`.
    pub assertive_fraction: f64,
    pub lane_width: f64,
    pub max_extra_agents: usize,
    pub idm: IdmParams,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            history_len: 10,
            future_len: 16,
            dt: 0.5,
            substeps: 5,
            speed_a: [10.0, 14.0],
            initial_speed_fraction: [0.6, 1.0],
            speed_b: [6.0, 10.0],
            v_max: 25.0,
            noise_std: 0.05,
            interaction_prob: 0.7,
            assertive_fraction: 0.3,
            lane_width: 3.5,
            max_extra_agents: 2,
            idm: IdmParams::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            bail!(Validation, "synth config: dt must be positive, got {}", self.dt);
        }
        if self.future_len < 2 {
            bail!(Validation, "synth config: future_len must be >= 2, got {}", self.future_len);
        }
        if self.history_len < 2 {
            bail!(Validation, "synth config: history_len must be >= 2, got {}", self.history_len);
        }
        if self.substeps == 0 {
            bail!(Validation, "synth config: substeps must be >= 1");
        }
        for (name, r) in [("speed_a", self.speed_a), ("speed_b", self.speed_b), ("initial_speed_fraction", self.initial_speed_fraction)] {
            if !(r[0] > 0.0 && r[0] <= r[1]) {
                bail!(Validation, "synth config: {name} must satisfy 0 < lo <= hi");
            }
        }
        if self.noise_std < 0.0 || !(0.0..=1.0).contains(&self.interaction_prob) {
            bail!(Validation, "synth config: noise_std >= 0 and interaction_prob in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.assertive_fraction) {
            bail!(Validation, "synth config: assertive_fraction must lie in [0, 1]");
        }
        Ok(())
    }

    /// Time of the first recorded point; the present is `t = 0`.
    fn start_time(&self) -> f64 {
        -((self.history_len - 1) as f64) * self.dt
    }
}

/// Initial conditions of one scene, independent of B's maneuver.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneDraw {
    pub family: Family,
    /// A's desired speed.
    pub speed_a: f64,
    /// A's speed at the first recorded step.
    pub initial_speed_a: f64,
    pub speed_b: f64,
    /// A's position at `t = 0`.
    pub start_a: Point,
    /// B's position at `t = 0`.
    pub start_b: Point,
    pub interactive: bool,
    /// `(x at t = 0, speed)` of background vehicles on the far lane.
    pub extras: Vec<(f64, f64)>,
    pub noise_seed: u64,
}

/// A generated scenario together with the latent maneuver that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScenario {
    pub scenario: Scenario,
    pub maneuver: f64,
    pub draw: SceneDraw,
}

const ZONE_HALF: f64 = 2.5;
const FAR_LANE_Y: f64 = -7.0;

pub fn draw_scene(config: &SynthConfig, family: Family, rng: &mut Rng) -> SceneDraw {
    let speed_a = rng.random_range(config.speed_a[0]..=config.speed_a[1]);
    let f = config.initial_speed_fraction;
    let initial_speed_a = speed_a * rng.random_range(f[0]..=f[1]);
    let speed_b = rng.random_range(config.speed_b[0]..=config.speed_b[1]);
    let interactive = rng.random::<f64>() < config.interaction_prob;
    let (start_a, start_b) = match family {
        Family::Yield => {
            // Arrival times at the conflict zone; interactive pairs arrive together.
            let reach = ZONE_HALF + config.idm.vehicle_length / 2.0;
            let tta_a = rng.random_range(2.5..5.0);
            let tta_b = if interactive { tta_a + rng.random_range(-0.5..1.5) } else { tta_a + rng.random_range(7.0..12.0) };
            ([-reach - speed_a * tta_a, 0.0], [0.0, -reach - speed_b * tta_b])
        }
        Family::Merge => {
            let gap = if interactive {
                rng.random_range(3.0..15.0)
            } else if rng.random::<bool>() {
                rng.random_range(70.0..100.0)
            } else {
                -rng.random_range(20.0..40.0)
            };
            ([0.0, 0.0], [gap, config.lane_width])
        }
    };
    let n_extra = rng.random_range(0..=config.max_extra_agents);
    let extras = (0..n_extra).map(|_| (rng.random_range(-40.0..60.0), rng.random_range(8.0..12.0))).collect();
    SceneDraw { family, speed_a, initial_speed_a, speed_b, start_a, start_b, interactive, extras, noise_seed: rng.random() }
}

#[derive(Debug, Clone, Copy)]
struct Vehicle {
    x: f64,
    y: f64,
    speed: f64,
}

/// Open-loop longitudinal/lateral plan of B, active for `t > 0`.
#[derive(Debug, Clone, Copy)]
enum BPlan {
    /// Constant acceleration, optional lane change start time.
    Proceed { accel: f64, lane_change_at: Option<f64> },
    /// Brake to the stop line, wait, then go.
    StopAndGo { decel: f64, dwell: f64 },
}

struct BState {
    plan: BPlan,
    stopped_at: Option<f64>,
    cruise: f64,
}

const LANE_CHANGE_SECONDS: f64 = 3.0;
const B_MAX_SPEED: f64 = 15.0;
const B_RESTART_ACCEL: f64 = 1.5;
/// A gives way to a B that reaches the conflict zone less than this many
/// seconds after A would.
const COMMIT_WINDOW: f64 = 2.0;

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    0.5 - 0.5 * (core::f64::consts::PI * u).cos()
}

fn stop_line_y(config: &SynthConfig) -> f64 {
    -(ZONE_HALF + config.idm.vehicle_length / 2.0 + 1.0)
}

fn plan_for(config: &SynthConfig, draw: &SceneDraw, maneuver: f64) -> BPlan {
    let u = (maneuver.clamp(-1.0, 1.0) + 1.0) / 2.0;
    match draw.family {
        Family::Yield => {
            let dist = stop_line_y(config) - draw.start_b[1];
            if u < 0.5 || dist < 0.5 {
                BPlan::Proceed { accel: (1.0 - 2.0 * u).max(0.0), lane_change_at: None }
            } else {
                let decel = draw.speed_b * draw.speed_b / (2.0 * dist);
                BPlan::StopAndGo { decel, dwell: 16.0 * (2.0 * u - 1.0) }
            }
        }
        Family::Merge => {
            if u < 0.5 {
                // Accelerate and cut in early.
                BPlan::Proceed { accel: 0.3 * (1.0 - 2.0 * u), lane_change_at: Some(0.5 + 4.0 * u) }
            } else {
                // Slow down and merge late, behind A.
                let w = 2.0 * u - 1.0;
                BPlan::Proceed { accel: -2.0 * w, lane_change_at: Some(2.5 + 5.0 * w) }
            }
        }
    }
}

fn b_accel(state: &mut BState, b: &Vehicle, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    match state.plan {
        BPlan::Proceed { accel, .. } => {
            if (accel > 0.0 && b.speed >= B_MAX_SPEED) || (accel < 0.0 && b.speed <= 0.5 * state.cruise) {
                0.0
            } else {
                accel
            }
        }
        BPlan::StopAndGo { decel, dwell } => match state.stopped_at {
            None if b.speed <= 1e-6 => {
                state.stopped_at = Some(t);
                0.0
            }
            None => -decel,
            Some(t_stop) if t < t_stop + dwell => 0.0,
            Some(_) if b.speed < state.cruise => B_RESTART_ACCEL,
            Some(_) => 0.0,
        },
    }
}

fn b_lateral(config: &SynthConfig, plan: BPlan, t: f64) -> Option<f64> {
    match plan {
        BPlan::Proceed { lane_change_at: Some(start), .. } => {
            Some(config.lane_width * (1.0 - smoothstep((t - start) / LANE_CHANGE_SECONDS)))
        }
        _ => None,
    }
}

/// A's IDM acceleration. `b_accel` is B's current longitudinal acceleration;
/// a braking or stopped B is read as yielding.
fn a_accel(config: &SynthConfig, draw: &SceneDraw, a: &Vehicle, b: &Vehicle, b_accel: f64) -> f64 {
    let idm = &config.idm;
    let half = idm.vehicle_length / 2.0;
    let leader = match draw.family {
        Family::Merge => {
            let merging = (b.y - config.lane_width).abs() > 0.2;
            (merging && b.x > a.x).then_some((b.x - a.x - idm.vehicle_length, b.speed))
        }
        Family::Yield => {
            let reach = ZONE_HALF + half;
            let a_gap = -reach - a.x;
            let b_cleared = b.y > reach;
            let b_inside = b.y.abs() <= reach;
            let tta_a = a_gap / a.speed.max(0.1);
            let tta_b = (-reach - b.y) / b.speed.max(0.1);
            let yielding = b_accel < -0.3 || b.speed <= 0.5;
            let committed = !b_cleared && (b_inside || (!yielding && tta_b < tta_a + COMMIT_WINDOW));
            (a_gap > 0.0 && committed).then_some((a_gap, 0.0))
        }
    };
    idm.accel(a.speed, draw.speed_a, leader)
}

/// Simulates the scene under `maneuver` and records noisy observations.
pub fn rollout(config: &SynthConfig, draw: &SceneDraw, maneuver: f64, id: String) -> Result<Scenario> {
    config.validate()?;
    let t0 = config.start_time();
    let (h, t_len) = (config.history_len, config.future_len);
    let total = h + t_len;
    let plan = plan_for(config, draw, maneuver);
    let mut b_state = BState { plan, stopped_at: None, cruise: draw.speed_b };

    // Constant-velocity back-extrapolation to the first recorded time.
    let (dir_a, dir_b) = match draw.family {
        Family::Merge => ([1.0, 0.0], [1.0, 0.0]),
        Family::Yield => ([1.0, 0.0], [0.0, 1.0]),
    };
    let mut a = Vehicle { x: draw.start_a[0] + t0 * draw.initial_speed_a * dir_a[0], y: draw.start_a[1], speed: draw.initial_speed_a };
    let mut b = Vehicle {
        x: draw.start_b[0] + t0 * draw.speed_b * dir_b[0],
        y: draw.start_b[1] + t0 * draw.speed_b * dir_b[1],
        speed: draw.speed_b,
    };

    let h_sub = config.dt / config.substeps as f64;
    let mut rec_a = Vec::with_capacity(total);
    let mut rec_b = Vec::with_capacity(total);
    for k in 0..total {
        let t_k = t0 + k as f64 * config.dt;
        rec_a.push([a.x, a.y]);
        rec_b.push([b.x, b.y]);
        if k + 1 == total {
            break;
        }
        for j in 0..config.substeps {
            let t = t_k + j as f64 * h_sub;
            let acc_b = b_accel(&mut b_state, &b, t);
            let acc_a = a_accel(config, draw, &a, &b, acc_b);
            a.speed = (a.speed + acc_a * h_sub).max(0.0);
            a.x += a.speed * h_sub;
            b.speed = (b.speed + acc_b * h_sub).max(0.0);
            match draw.family {
                Family::Merge => {
                    b.x += b.speed * h_sub;
                    if let Some(y) = b_lateral(config, plan, t + h_sub) {
                        b.y = y;
                    }
                }
                Family::Yield => b.y += b.speed * h_sub,
            }
        }
    }

    let mut noise_rng = rng::seeded(draw.noise_seed);
    let mut noisy = |pts: &[Point]| -> Vec<Point> {
        pts.iter()
            .map(|p| [p[0] + config.noise_std * rng::normal(&mut noise_rng), p[1] + config.noise_std * rng::normal(&mut noise_rng)])
            .collect()
    };
    let rec_a = noisy(&rec_a);
    let rec_b = noisy(&rec_b);
    let extra_agents = draw
        .extras
        .iter()
        .map(|&(x0, v)| {
            let pts: Vec<Point> = (0..h).map(|k| [x0 - v * (t0 + k as f64 * config.dt), FAR_LANE_Y]).collect();
            Trajectory::new(noisy(&pts), config.dt)
        })
        .collect::<Result<Vec<_>>>()?;

    let dt = config.dt;
    let observation = Observation {
        history_a: Trajectory::new(rec_a[..h].to_vec(), dt)?,
        history_b: Trajectory::new(rec_b[..h].to_vec(), dt)?,
        extra_agents,
        map_polylines: map_for(config, draw.family),
    };
    let scenario = Scenario {
        id,
        family: draw.family,
        observation,
        future_a: Trajectory::new(rec_a[h..].to_vec(), dt)?,
        future_b: Trajectory::new(rec_b[h..].to_vec(), dt)?,
    };
    scenario.validate()?;
    Ok(scenario)
}

fn straight(tag: &str, from: Point, to: Point, n: usize) -> Polyline {
    let points = (0..n)
        .map(|i| {
            let s = i as f64 / (n - 1) as f64;
            [from[0] + s * (to[0] - from[0]), from[1] + s * (to[1] - from[1])]
        })
        .collect();
    Polyline { tag: tag.into(), points }
}

fn map_for(config: &SynthConfig, family: Family) -> Vec<Polyline> {
    let w = config.lane_width;
    match family {
        Family::Merge => vec![
            straight("lane", [-150.0, 0.0], [250.0, 0.0], 17),
            straight("lane", [-150.0, w], [250.0, w], 17),
            straight("lane", [250.0, FAR_LANE_Y], [-150.0, FAR_LANE_Y], 17),
        ],
        Family::Yield => {
            let stop = stop_line_y(config) + config.idm.vehicle_length / 2.0;
            vec![
                straight("lane", [-150.0, 0.0], [250.0, 0.0], 17),
                straight("lane", [0.0, -150.0], [0.0, 150.0], 13),
                straight("stop_line", [-w / 2.0, stop], [w / 2.0, stop], 2),
                straight("lane", [250.0, FAR_LANE_Y], [-150.0, FAR_LANE_Y], 17),
            ]
        }
    }
}

/// Generates `n` scenarios alternating MERGE and YIELD, keeping the latent
/// maneuvers. Ids embed the seed so different seeds never collide.
pub fn synth_scenarios_with_maneuvers(config: &SynthConfig, seed: u64, n: usize) -> Result<Vec<SyntheticScenario>> {
    config.validate()?;
    if n == 0 {
        bail!(Validation, "synth_scenarios: n must be >= 1");
    }
    let mut rng = rng::seeded(seed);
    (0..n)
        .map(|i| {
            let family = if i % 2 == 0 { Family::Merge } else { Family::Yield };
            let draw = draw_scene(config, family, &mut rng);
            let maneuver =
                if rng.random::<f64>() < config.assertive_fraction { rng.random_range(-1.0..0.0) } else { rng.random_range(0.0..=1.0) };
            let id = format!("s{seed}-{i:05}");
            let scenario = rollout(config, &draw, maneuver, id)?;
            Ok(SyntheticScenario { scenario, maneuver, draw })
        })
        .collect()
}

pub fn synth_scenarios(config: &SynthConfig, seed: u64, n: usize) -> Result<Vec<Scenario>> {
    Ok(synth_scenarios_with_maneuvers(config, seed, n)?.into_iter().map(|s| s.scenario).collect())
}

/// Mean speed of a trajectory from its step lengths (no smoothing).
pub fn path_speed(traj: &Trajectory) -> f64 {
    let pts = traj.points();
    let len: f64 = pts.windows(2).map(|w| crate::types::distance(w[0], w[1])).sum();
    len / ((pts.len() - 1) as f64 * traj.dt())
}
