//! Pinball: a ball on a bordered table with circular force fields.
//!
//! The agent sees only a rendered top view of the table. Each step it adds one
//! of a small set of momentum vectors to the ball; the ball then moves for one
//! time unit under linear friction (explicit Euler with fixed substeps),
//! reflecting off the borders. Entering a force field accrues its reward,
//! optionally deflects the ball and may end the episode.
//!
//! World coordinates have `y` pointing up; frames are row-major with row 0 at
//! the top of the table.

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Deflection {
    None,
    /// New direction uniformly at random, speed preserved.
    RandomDirection,
    /// Velocity turned by 90 degrees to a randomly chosen side.
    Perpendicular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceField {
    pub center: [f64; 2],
    pub radius: f64,
    pub reward: f64,
    pub terminal: bool,
    pub deflection: Deflection,
}

impl ForceField {
    fn contains(&self, p: [f64; 2]) -> bool {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        dx * dx + dy * dy < self.radius * self.radius
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PinballConfig {
    pub width: f64,
    pub height: f64,
    /// Render resolution as `[columns, rows]`.
    pub resolution: [usize; 2],
    pub ball_radius: f64,
    /// Linear friction coefficient per unit time.
    pub friction: f64,
    pub start: [f64; 2],
    pub start_velocity: [f64; 2],
    pub fields: Vec<ForceField>,
    pub step_reward: f64,
    /// Momentum vector added by each action.
    pub actions: Vec<[f64; 2]>,
    pub max_steps: usize,
    /// Euler substeps per environment step.
    pub substeps: usize,
}

/// Momentum vectors pointing up and 30 degrees to either side.
pub fn fan_actions(magnitude: f64) -> Vec<[f64; 2]> {
    let (s, c) = 30f64.to_radians().sin_cos();
    vec![[0.0, magnitude], [-s * magnitude, c * magnitude], [s * magnitude, c * magnitude]]
}

impl Default for PinballConfig {
    fn default() -> Self {
        Self {
            width: 50.0,
            height: 36.0,
            resolution: [50, 36],
            ball_radius: 2.0,
            friction: 0.3,
            start: [25.0, 3.0],
            start_velocity: [0.0, 0.0],
            fields: vec![
                ForceField {
                    center: [25.0, 21.0],
                    radius: 4.0,
                    reward: 1.0,
                    terminal: true,
                    deflection: Deflection::None,
                },
                ForceField {
                    center: [9.0, 24.0],
                    radius: 5.0,
                    reward: 0.0,
                    terminal: false,
                    deflection: Deflection::RandomDirection,
                },
                ForceField {
                    center: [41.0, 24.0],
                    radius: 5.0,
                    reward: 0.0,
                    terminal: false,
                    deflection: Deflection::RandomDirection,
                },
            ],
            step_reward: -0.02,
            actions: fan_actions(2.0),
            max_steps: 15,
            substeps: 10,
        }
    }
}

impl PinballConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.height > 0.0) || self.resolution[0] == 0 || self.resolution[1] == 0 {
            return Err(Error::Config("table size and resolution must be positive".into()));
        }
        let r = self.ball_radius;
        if !(r > 0.0) || 2.0 * r >= self.width.min(self.height) {
            return Err(Error::Config("ball radius must fit on the table".into()));
        }
        if !(self.friction >= 0.0) || self.substeps == 0 || self.actions.is_empty() {
            return Err(Error::Config("friction, substeps and actions must be valid".into()));
        }
        if !self.inside(self.start) {
            return Err(Error::Config("start position must be inside the borders".into()));
        }
        for (i, f) in self.fields.iter().enumerate() {
            if !(f.radius > 0.0)
                || !(0.0..=self.width).contains(&f.center[0])
                || !(0.0..=self.height).contains(&f.center[1])
            {
                return Err(Error::Config(format!("force field {i} lies outside the table")));
            }
        }
        Ok(())
    }

    fn inside(&self, p: [f64; 2]) -> bool {
        let r = self.ball_radius;
        (r..=self.width - r).contains(&p[0]) && (r..=self.height - r).contains(&p[1])
    }

    pub fn input_dim(&self) -> usize {
        self.resolution[0] * self.resolution[1]
    }

    /// Default table after the change: a perpendicular deflector sits between
    /// the start position and the target.
    pub fn obstructed(&self) -> Self {
        let mut cfg = self.clone();
        cfg.fields.push(ForceField {
            center: [25.0, 11.0],
            radius: 4.0,
            reward: 0.0,
            terminal: false,
            deflection: Deflection::Perpendicular,
        });
        cfg
    }
}

/// Grayscale image, row-major, values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub cols: usize,
    pub rows: usize,
    pub pixels: Vec<f32>,
}

impl Frame {
    pub fn blank(cols: usize, rows: usize) -> Self {
        Self { cols, rows, pixels: vec![0.0; cols * rows] }
    }

    /// Binary PGM (P5) encoding.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.cols, self.rows).into_bytes();
        out.extend(self.pixels.iter().map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8));
        out
    }

    /// ASCII rendering for terminals; `#` marks lit pixels.
    pub fn to_ascii(&self) -> String {
        let mut s = String::new();
        for row in self.pixels.chunks(self.cols) {
            for &p in row {
                s.push(if p > 0.5 { '#' } else { '.' });
            }
            let _ = writeln!(s);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    pub steps: usize,
    pub terminal: bool,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub frame: Frame,
    pub reward: f64,
    pub terminal: bool,
}

#[derive(Debug, Clone)]
pub struct Pinball {
    config: PinballConfig,
    state: EnvState,
    inside: Vec<bool>,
    rng: ChaCha8Rng,
}

impl Pinball {
    pub fn new(config: PinballConfig, rng: ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let inside = vec![false; config.fields.len()];
        let state = EnvState {
            position: config.start,
            velocity: config.start_velocity,
            steps: 0,
            terminal: false,
        };
        Ok(Self { config, state, inside, rng })
    }

    pub fn config(&self) -> &PinballConfig {
        &self.config
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn n_actions(&self) -> usize {
        self.config.actions.len()
    }

    pub(crate) fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }

    /// Replaces the table layout (e.g. to obstruct the target); takes effect
    /// at the next reset.
    pub fn reconfigure(&mut self, config: PinballConfig) -> Result<()> {
        config.validate()?;
        self.inside = vec![false; config.fields.len()];
        self.config = config;
        Ok(())
    }

    /// Puts the ball at the start position and renders the first frame.
    pub fn reset(&mut self) -> StepOutcome {
        self.state = EnvState {
            position: self.config.start,
            velocity: self.config.start_velocity,
            steps: 0,
            terminal: false,
        };
        for (i, f) in self.config.fields.iter().enumerate() {
            self.inside[i] = f.contains(self.state.position);
            if self.inside[i] && f.terminal {
                self.state.terminal = true;
            }
        }
        if self.config.max_steps == 0 {
            self.state.terminal = true;
        }
        StepOutcome { frame: self.render(), reward: 0.0, terminal: self.state.terminal }
    }

    pub fn step(&mut self, action: usize) -> Result<StepOutcome> {
        if self.state.terminal {
            return Err(Error::Contract("step called on a terminal state".into()));
        }
        let Some(&kick) = self.config.actions.get(action) else {
            return invalid_arg(format!("action {action} out of range"));
        };
        self.state.velocity[0] += kick[0];
        self.state.velocity[1] += kick[1];
        let mut reward = self.config.step_reward;
        let n = self.config.substeps;
        let dt = 1.0 / n as f64;
        let damping = (1.0 - self.config.friction * dt).max(0.0);
        'integrate: for _ in 0..n {
            let s = &mut self.state;
            s.position[0] += s.velocity[0] * dt;
            s.position[1] += s.velocity[1] * dt;
            s.velocity[0] *= damping;
            s.velocity[1] *= damping;
            self.reflect();
            for i in 0..self.config.fields.len() {
                let field = &self.config.fields[i];
                let now = field.contains(self.state.position);
                if now && !self.inside[i] {
                    reward += field.reward;
                    let (deflection, terminal) = (field.deflection, field.terminal);
                    self.deflect(deflection);
                    if terminal {
                        self.inside[i] = true;
                        self.state.terminal = true;
                        break 'integrate;
                    }
                }
                self.inside[i] = now;
            }
        }
        self.state.steps += 1;
        if self.state.steps >= self.config.max_steps {
            self.state.terminal = true;
        }
        Ok(StepOutcome { frame: self.render(), reward, terminal: self.state.terminal })
    }

    fn reflect(&mut self) {
        let r = self.config.ball_radius;
        let limits = [self.config.width, self.config.height];
        let s = &mut self.state;
        for (axis, limit) in limits.into_iter().enumerate() {
            let (lo, hi) = (r, limit - r);
            if s.position[axis] < lo {
                s.position[axis] = 2.0 * lo - s.position[axis];
                s.velocity[axis] = -s.velocity[axis];
            } else if s.position[axis] > hi {
                s.position[axis] = 2.0 * hi - s.position[axis];
                s.velocity[axis] = -s.velocity[axis];
            }
            s.position[axis] = s.position[axis].clamp(lo, hi);
        }
    }

    fn deflect(&mut self, mode: Deflection) {
        let [vx, vy] = self.state.velocity;
        match mode {
            Deflection::None => {}
            Deflection::RandomDirection => {
                let speed = vx.hypot(vy);
                let angle = self.rng.random::<f64>() * std::f64::consts::TAU;
                self.state.velocity = [speed * angle.cos(), speed * angle.sin()];
            }
            Deflection::Perpendicular => {
                self.state.velocity = if self.rng.random::<bool>() { [-vy, vx] } else { [vy, -vx] };
            }
        }
    }

    /// Filled disk of the ball on a blank table.
    pub fn render(&self) -> Frame {
        let [cols, rows] = self.config.resolution;
        let mut frame = Frame::blank(cols, rows);
        let sx = self.config.width / cols as f64;
        let sy = self.config.height / rows as f64;
        let [bx, by] = self.state.position;
        let r2 = self.config.ball_radius * self.config.ball_radius;
        for row in 0..rows {
            let y = self.config.height - (row as f64 + 0.5) * sy;
            for col in 0..cols {
                let x = (col as f64 + 0.5) * sx;
                if (x - bx).powi(2) + (y - by).powi(2) <= r2 {
                    frame.pixels[row * cols + col] = 1.0;
                }
            }
        }
        frame
    }
}
