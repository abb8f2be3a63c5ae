use std::ops::{Add, Mul};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::measure::{draw_noise, measure_with_noise};
use super::trajectory::{Record, Trajectory};
use crate::config::{ControlMode, PingMode, ScenarioConfig};
use crate::control::{
    surge_amplitude, surge_command, yaw_rate_command, SurgeFactors, DIRECTION_POLARITY,
};
use crate::error::ConfigError;
use crate::estimator::{estimated_damping, estimated_direction, filter_derivative, FilterState};
use crate::geometry::{cost, to_polar, PlanarPoint, SourcePosition};
use crate::plant::{
    cartesian_derivative, rk4_step, CartesianState, CurrentDisturbance, HighpassParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    /// Ran to `t_max`.
    Horizon,
    /// Range fell below the stop radius.
    ReachedTarget,
}

/// Joint integrated state: plant, filter and (optionally lagged) actual commands.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LoopState {
    pub plant: CartesianState,
    pub filter: FilterState,
    pub surge: f64,
    pub yaw_rate: f64,
}

impl Add for LoopState {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            plant: self.plant + o.plant,
            filter: self.filter + o.filter,
            surge: self.surge + o.surge,
            yaw_rate: self.yaw_rate + o.yaw_rate,
        }
    }
}

impl Mul<f64> for LoopState {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self {
            plant: self.plant * s,
            filter: self.filter * s,
            surge: self.surge * s,
            yaw_rate: self.yaw_rate * s,
        }
    }
}

/// Commands and derived quantities at one evaluation point.
#[derive(Debug, Clone, Copy)]
struct Evaluation {
    range: f64,
    alpha: f64,
    delta: f64,
    cost: f64,
    direction: f64,
    damping: f64,
    surge_cmd: f64,
    yaw_cmd: f64,
}

/// Closed-loop simulator for one scenario.
///
/// Holds the measurement state (last accepted delta, ping clock, per-step
/// noise) and the scenario's RNG stream, so a given (config, stream) pair
/// always replays the same run.
pub struct Simulator {
    cfg: ScenarioConfig,
    source: SourcePosition,
    hp: HighpassParams,
    current: CurrentDisturbance,
    rng: ChaCha8Rng,
    /// Last accepted measurement; 0 before the first one.
    held: f64,
    /// Noise drawn for the current step (continuous mode).
    step_noise: f64,
    next_ping: f64,
}

impl Simulator {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self, ConfigError> {
        Self::with_stream(cfg, 0)
    }

    /// Uses RNG stream `stream` of the scenario seed; batch runs give each
    /// scenario its own stream.
    pub fn with_stream(cfg: &ScenarioConfig, stream: u64) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.noise.seed);
        rng.set_stream(stream);
        Ok(Self {
            cfg: *cfg,
            source: cfg.source_position(),
            hp: HighpassParams { h: cfg.es.h },
            current: cfg.current(),
            rng,
            held: 0.0,
            step_noise: 0.0,
            next_ping: 0.0,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn initial_state(&self) -> LoopState {
        LoopState {
            plant: CartesianState {
                x: self.cfg.vehicle.x,
                y: self.cfg.vehicle.y,
                heading: self.cfg.vehicle.heading,
                filter: 0.0,
            },
            ..Default::default()
        }
    }

    fn lagged(&self) -> bool {
        self.cfg.run.command_lag > 0.0
    }

    /// Measurement the controller uses at a stage state.
    fn stage_delta(&self, plant: &CartesianState) -> f64 {
        match self.cfg.ping.mode {
            PingMode::Periodic => self.held,
            PingMode::Continuous => {
                let g = self.cfg.geometry(plant.center(), plant.heading);
                let m = measure_with_noise(0.0, &g, &self.source, self.step_noise);
                if m.valid {
                    m.delta
                } else {
                    self.held
                }
            }
        }
    }

    fn evaluate(&self, t: f64, s: &LoopState) -> Evaluation {
        let cfg = &self.cfg;
        let delta = self.stage_delta(&s.plant);
        let f = cost(delta);
        let pose = to_polar(s.plant.center(), s.plant.heading, &self.source);
        let yaw_cmd = yaw_rate_command(t, f, s.plant.filter, &cfg.es);
        let (direction, amplitude, damping) = match cfg.run.mode {
            ControlMode::Oracle => {
                let factors = SurgeFactors::oracle(delta, pose.alpha, pose.range, &cfg.surge);
                let direction = if pose.degenerate {
                    0.0
                } else {
                    factors.direction
                };
                (direction, factors.amplitude, factors.damping)
            }
            ControlMode::Estimated => (
                DIRECTION_POLARITY * estimated_direction(&s.filter, cfg.filter.deadband),
                surge_amplitude(f, &cfg.surge),
                estimated_damping(&s.filter, cfg.filter.scale, &cfg.surge),
            ),
        };
        Evaluation {
            range: pose.range,
            alpha: pose.alpha,
            delta,
            cost: f,
            direction,
            damping,
            surge_cmd: surge_command(direction, amplitude, damping),
            yaw_cmd,
        }
    }

    fn derivative(&self, t: f64, s: &LoopState) -> LoopState {
        let e = self.evaluate(t, s);
        let (surge, yaw_rate, lag_rates) = if self.lagged() {
            let tau = self.cfg.run.command_lag;
            (
                s.surge,
                s.yaw_rate,
                (
                    (e.surge_cmd - s.surge) / tau,
                    (e.yaw_cmd - s.yaw_rate) / tau,
                ),
            )
        } else {
            (e.surge_cmd, e.yaw_cmd, (0.0, 0.0))
        };
        LoopState {
            plant: cartesian_derivative(&s.plant, surge, yaw_rate, e.cost, &self.hp, &self.current),
            filter: filter_derivative(&s.filter, e.delta, yaw_rate, &self.cfg.filter),
            surge: lag_rates.0,
            yaw_rate: lag_rates.1,
        }
    }

    /// Refreshes the measurement state at the start of a step at time `t`.
    fn sample_measurement(&mut self, t: f64, s: &LoopState) {
        let g = self.cfg.geometry(s.plant.center(), s.plant.heading);
        match self.cfg.ping.mode {
            PingMode::Continuous => {
                self.step_noise = draw_noise(self.cfg.noise.sigma, &mut self.rng);
                let m = measure_with_noise(t, &g, &self.source, self.step_noise);
                if m.valid {
                    self.held = m.delta;
                }
            }
            PingMode::Periodic => {
                // Tolerance keeps pings on the nominal grid despite t = i * dt rounding.
                if t + 1e-9 * self.cfg.run.dt >= self.next_ping {
                    let noise = draw_noise(self.cfg.noise.sigma, &mut self.rng);
                    let m = measure_with_noise(t, &g, &self.source, noise);
                    if m.valid {
                        self.held = m.delta;
                    }
                    self.next_ping += self.cfg.ping.period;
                }
            }
        }
    }

    /// Advances one RK4 step of length `run.dt` from time `t`. Commands are
    /// re-evaluated at every stage; in periodic mode the measurement is held
    /// over the whole step.
    pub fn step(&mut self, state: &LoopState, t: f64) -> LoopState {
        self.sample_measurement(t, state);
        self.integrate(state, t)
    }

    fn integrate(&self, state: &LoopState, t: f64) -> LoopState {
        rk4_step(*state, t, self.cfg.run.dt, |tt, s| self.derivative(tt, &s))
    }

    fn record(&self, t: f64, s: &LoopState) -> Record {
        let e = self.evaluate(t, s);
        let surge = if self.lagged() { s.surge } else { e.surge_cmd };
        Record {
            t,
            x: s.plant.x,
            y: s.plant.y,
            psi: s.plant.wrapped_heading(),
            filter: s.plant.filter,
            range: e.range,
            alpha: e.alpha,
            delta: e.delta,
            cost: e.cost,
            surge,
            direction: e.direction,
            damping: e.damping,
            v1: s.filter.v1,
            v2: s.filter.v2,
        }
    }

    fn range_of(&self, s: &LoopState) -> f64 {
        PlanarPoint::new(s.plant.x, s.plant.y).distance(&self.source.planar())
    }

    /// Runs from the configured initial state to `t_max` or the stop radius.
    pub fn run(&mut self) -> Trajectory {
        let run = self.cfg.run;
        let steps = (run.t_max / run.dt).round() as u64;
        let decimation = u64::from(run.decimation);
        let mut state = self.initial_state();
        let mut records = Vec::with_capacity((steps / decimation + 2) as usize);
        let mut status = RunStatus::Horizon;
        let mut index = 0;
        let terminal = loop {
            let t = index as f64 * run.dt;
            self.sample_measurement(t, &state);
            let current = self.record(t, &state);
            if index % decimation == 0 {
                records.push(current);
            }
            if self.range_of(&state) < run.stop_range {
                status = RunStatus::ReachedTarget;
                break current;
            }
            if index >= steps {
                break current;
            }
            state = self.integrate(&state, t);
            index += 1;
        };
        Trajectory {
            records,
            terminal,
            status,
            sample_period: run.dt * decimation as f64,
        }
    }
}

/// Runs one scenario on RNG stream 0.
pub fn simulate(cfg: &ScenarioConfig) -> Result<Trajectory, ConfigError> {
    Ok(Simulator::new(cfg)?.run())
}
