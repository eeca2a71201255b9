use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::calibration::BlackBox;
use crate::transfer::Command;

/// Speed and turn-rate scale of a vehicle: command `(v, γ)` drives at
/// `v·v_max` m/s while turning at `γ·gamma_max` rad/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    pub v_max: f64,
    pub gamma_max: f64,
}

impl VehicleParams {
    pub fn new(v_max: f64, gamma_max: f64) -> Self {
        VehicleParams { v_max, gamma_max }
    }
}

/// Planar pose.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose { x, y, theta }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    /// Maps a pose given in this pose's body frame to the world frame.
    pub fn compose(&self, local: &Pose) -> Pose {
        let (s, c) = self.theta.sin_cos();
        Pose {
            x: self.x + c * local.x - s * local.y,
            y: self.y + s * local.x + c * local.y,
            theta: wrap_angle(self.theta + local.theta),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub t: f64,
}

impl SimState {
    pub fn at(pose: Pose, t: f64) -> Self {
        SimState {
            x: pose.x,
            y: pose.y,
            theta: pose.theta,
            t,
        }
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.x, self.y, self.theta)
    }
}

/// Wraps an angle to (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// One forward-Euler step of the unicycle model, plus optional additive
/// Gaussian noise on position.
pub fn step_vehicle<R: Rng + ?Sized>(
    state: &SimState,
    u: Command,
    params: &VehicleParams,
    dt: f64,
    noise_sigma: f64,
    rng: &mut R,
) -> SimState {
    let speed = u.v * params.v_max;
    let (s, c) = state.theta.sin_cos();
    let mut next = SimState {
        x: state.x + speed * c * dt,
        y: state.y + speed * s * dt,
        theta: wrap_angle(state.theta + u.gamma * params.gamma_max * dt),
        t: state.t + dt,
    };
    if noise_sigma > 0.0 {
        let [nx, ny] = position_noise(noise_sigma, rng);
        next.x += nx;
        next.y += ny;
    }
    next
}

fn position_noise<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> [f64; 2] {
    let normal = Normal::new(0.0, sigma).expect("noise sigma must be finite and non-negative");
    [normal.sample(rng), normal.sample(rng)]
}

/// A simulated vehicle seen only through its commands and noisy position
/// readings. The true state evolves noise-free; every reading of it carries
/// independent N(0, σ²) position error.
#[derive(Clone, Debug)]
pub struct SimulatedVehicle {
    params: VehicleParams,
    dt: f64,
    noise_sigma: f64,
    state: SimState,
    rng: ChaCha8Rng,
}

impl SimulatedVehicle {
    pub fn new(params: VehicleParams, dt: f64, noise_sigma: f64, seed: u64) -> Self {
        SimulatedVehicle {
            params,
            dt,
            noise_sigma,
            state: SimState::default(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn params(&self) -> &VehicleParams {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Ground truth, for metrics only.
    pub fn true_state(&self) -> SimState {
        self.state
    }

    pub fn place(&mut self, pose: Pose) {
        self.state = SimState::at(pose, 0.0);
    }

    /// Noisy reading of the current state.
    pub fn measure(&mut self) -> SimState {
        let mut s = self.state;
        if self.noise_sigma > 0.0 {
            let [nx, ny] = position_noise(self.noise_sigma, &mut self.rng);
            s.x += nx;
            s.y += ny;
        }
        s
    }

    /// Advances the true state by one control step.
    pub fn advance(&mut self, u: Command) {
        self.state = step_vehicle(&self.state, u, &self.params, self.dt, 0.0, &mut self.rng);
    }
}

impl BlackBox for SimulatedVehicle {
    fn reset(&mut self) -> SimState {
        self.place(Pose::default());
        self.state
    }

    fn step(&mut self, u: Command) -> SimState {
        self.advance(u);
        self.measure()
    }

    fn step_dt(&self) -> f64 {
        self.dt
    }
}
