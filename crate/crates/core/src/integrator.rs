//! Adaptive Dormand–Prince 5(4) integration with dense output and
//! Poincaré-section event location.

use crate::model::{ModelError, State, SystemConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Trajectories wandering past this distance from the origin are treated as
/// escaped and the integration is stopped.
pub const ESCAPE_RADIUS: f64 = 10.0;
/// Integration aborts when a trajectory comes closer than this to a primary.
pub const PROXIMITY_FLOOR: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum IntegrationError {
    #[error("step size underflow at t = {t}: h = {h:e}")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("step count exceeded {0}")]
    StepLimit(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("event bisection failed to converge in {0} iterations")]
    EventBisection(usize),
}

/// Tolerances and limits for the adaptive integrator.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IntegrationSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub initial_step: f64,
    pub max_steps: usize,
    /// Minimum distance to any primary before the run aborts.
    pub proximity_floor: f64,
    /// Distance from the origin beyond which the trajectory counts as escaped.
    pub escape_radius: f64,
}

impl Default for IntegrationSettings {
    fn default() -> Self {
        IntegrationSettings {
            rel_tol: 1e-11,
            abs_tol: 1e-12,
            initial_step: 1e-4,
            max_steps: 2_000_000,
            proximity_floor: PROXIMITY_FLOOR,
            escape_radius: ESCAPE_RADIUS,
        }
    }
}

/// Why an integration run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    TimeReached,
    Escaped,
    PrimaryProximity,
    EventLimit,
}

/// One accepted step together with the dense-output interpolant over it.
#[derive(Debug, Clone)]
pub struct DenseSegment {
    pub t0: f64,
    pub h: f64,
    pub y0: [f64; 4],
    /// Coefficients of the quartic Hermite-type interpolant, per component.
    cont: [[f64; 5]; 4],
}

impl DenseSegment {
    /// Evaluate the interpolant at `t` in `[t0, t0 + h]`.
    pub fn eval(&self, t: f64) -> [f64; 4] {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let mut y = [0.0; 4];
        for (i, c) in self.cont.iter().enumerate() {
            // Hairer's nested form: c0 + s(c1 + s1(c2 + s(c3 + s1 c4)))
            y[i] = c[0] + s * (c[1] + s1 * (c[2] + s * (c[3] + s1 * c[4])));
        }
        y
    }
}

/// Full result of an integration run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub segments: Vec<DenseSegment>,
    pub stop: StopReason,
    pub final_time: f64,
}

impl Trajectory {
    /// Interpolated state at an arbitrary time inside the integration span.
    pub fn sample(&self, t: f64) -> Option<State> {
        let seg = self
            .segments
            .iter()
            .find(|s| within_span(t, s.t0, s.h))?;
        Some(State::from_array(seg.eval(t)))
    }
}

fn within_span(t: f64, t0: f64, h: f64) -> bool {
    if h >= 0.0 {
        (t0..=t0 + h).contains(&t)
    } else {
        (t0 + h..=t0).contains(&t)
    }
}

/// A located crossing of the Poincaré section `y = 0`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SectionEvent {
    pub t: f64,
    pub state: State,
    /// Sign of `y'` at the crossing: +1 upward, -1 downward.
    pub direction: i8,
}

/// Which section crossings to record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingDirection {
    Upward,
    Downward,
    Both,
}

// Dormand-Prince RK5(4)7M tableau
#[allow(dead_code)] // stage times kept for tableau completeness
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// dense-output weights for the Shampine interpolant
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Integrate the synodic-frame equations of motion from `y0` over
/// `[0, t_final]` (`t_final` may be negative for backward runs).
pub fn integrate(
    config: &SystemConfig,
    y0: State,
    t_final: f64,
    settings: &IntegrationSettings,
) -> Result<Trajectory, IntegrationError> {
    let mut stepper = Stepper::new(config, y0, t_final, settings)?;
    while stepper.active() {
        stepper.step()?;
    }
    Ok(stepper.finish())
}

/// Integrate and record crossings of the section `y = 0` in the requested
/// direction, refined to machine precision by bisection on the dense output.
///
/// Crossings inside the ball of radius `exclusion_radius` around
/// `exclusion_center` are skipped (used to ignore the launch-adjacent
/// crossing of manifold orbits). Integration stops early once `max_events`
/// crossings have been recorded.
#[allow(clippy::too_many_arguments)]
pub fn integrate_with_section(
    config: &SystemConfig,
    y0: State,
    t_final: f64,
    settings: &IntegrationSettings,
    direction: CrossingDirection,
    max_events: usize,
    exclusion_center: Option<(f64, f64)>,
    exclusion_radius: f64,
) -> Result<(Trajectory, Vec<SectionEvent>), IntegrationError> {
    let mut stepper = Stepper::new(config, y0, t_final, settings)?;
    let mut events = Vec::new();
    while stepper.active() {
        let seg = match stepper.step()? {
            Some(seg) => seg,
            None => continue,
        };
        let ya = seg.y0;
        let yb = seg.eval(seg.t0 + seg.h);
        if ya[1] == 0.0 || ya[1].signum() == yb[1].signum() {
            continue;
        }
        let (t_ev, y_ev) = bisect_section(&seg, seg.t0, seg.t0 + seg.h)?;
        let dir = if seg.h > 0.0 {
            if ya[1] < 0.0 { 1 } else { -1 }
        } else if ya[1] < 0.0 {
            -1
        } else {
            1
        };
        let wanted = match direction {
            CrossingDirection::Both => true,
            CrossingDirection::Upward => dir == 1,
            CrossingDirection::Downward => dir == -1,
        };
        if !wanted {
            continue;
        }
        if let Some((cx, cy)) = exclusion_center {
            let d2 = (y_ev[0] - cx).powi(2) + (y_ev[1] - cy).powi(2);
            if d2 < exclusion_radius * exclusion_radius {
                continue;
            }
        }
        events.push(SectionEvent {
            t: t_ev,
            state: State::from_array(y_ev),
            direction: dir,
        });
        if events.len() >= max_events {
            stepper.stop(StopReason::EventLimit);
        }
    }
    Ok((stepper.finish(), events))
}

fn bisect_section(seg: &DenseSegment, mut ta: f64, mut tb: f64) -> Result<(f64, [f64; 4]), IntegrationError> {
    const MAX_ITERS: usize = 200;
    let mut fa = seg.eval(ta)[1];
    for _ in 0..MAX_ITERS {
        let tm = 0.5 * (ta + tb);
        if tm == ta || tm == tb {
            let y = seg.eval(tm);
            return Ok((tm, y));
        }
        let fm = seg.eval(tm)[1];
        if fm == 0.0 {
            return Ok((tm, seg.eval(tm)));
        }
        if fa.signum() == fm.signum() {
            ta = tm;
            fa = fm;
        } else {
            tb = tm;
        }
    }
    Err(IntegrationError::EventBisection(MAX_ITERS))
}

struct Stepper<'a> {
    config: &'a SystemConfig,
    settings: &'a IntegrationSettings,
    t: f64,
    y: [f64; 4],
    k0: [f64; 4],
    h: f64,
    t_final: f64,
    dir: f64,
    steps: usize,
    done: Option<StopReason>,
    times: Vec<f64>,
    states: Vec<State>,
    segments: Vec<DenseSegment>,
}

impl<'a> Stepper<'a> {
    fn new(
        config: &'a SystemConfig,
        y0: State,
        t_final: f64,
        settings: &'a IntegrationSettings,
    ) -> Result<Self, IntegrationError> {
        let dir = if t_final < 0.0 { -1.0 } else { 1.0 };
        let y = y0.to_array();
        let k0 = crate::model::vector_field(config, &y0)?.to_array();
        Ok(Stepper {
            config,
            settings,
            t: 0.0,
            y,
            k0,
            h: settings.initial_step.abs().max(1e-12) * dir,
            t_final,
            dir,
            steps: 0,
            done: if t_final == 0.0 {
                Some(StopReason::TimeReached)
            } else {
                None
            },
            times: vec![0.0],
            states: vec![y0],
            segments: Vec::new(),
        })
    }

    fn active(&self) -> bool {
        self.done.is_none()
    }

    fn stop(&mut self, reason: StopReason) {
        self.done = Some(reason);
    }

    fn guard(&mut self) -> Result<(), IntegrationError> {
        let (x, yc) = (self.y[0], self.y[1]);
        if (x * x + yc * yc).sqrt() > self.settings.escape_radius {
            self.stop(StopReason::Escaped);
            return Ok(());
        }
        for p in &self.config.primaries {
            let d = ((x - p.position.0).powi(2) + (yc - p.position.1).powi(2)).sqrt();
            if d < self.settings.proximity_floor {
                self.stop(StopReason::PrimaryProximity);
                return Ok(());
            }
        }
        Ok(())
    }

    /// Attempt one accepted step; returns its dense segment (None if the
    /// run terminated instead).
    fn step(&mut self) -> Result<Option<DenseSegment>, IntegrationError> {
        loop {
            if self.done.is_some() {
                return Ok(None);
            }
            self.steps += 1;
            if self.steps > self.settings.max_steps {
                return Err(IntegrationError::StepLimit(self.settings.max_steps));
            }
            // clamp onto the final time
            if (self.t + self.h - self.t_final) * self.dir > 0.0 {
                self.h = self.t_final - self.t;
            }
            if self.h.abs() < 1e-15 * (1.0 + self.t.abs()) {
                return Err(IntegrationError::StepSizeUnderflow { t: self.t, h: self.h });
            }

            let mut k = [[0.0; 4]; 7];
            k[0] = self.k0;
            let mut failed_eval = false;
            for s in 1..7 {
                let mut ys = self.y;
                for (j, yj) in ys.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (i, ki) in k.iter().enumerate().take(s) {
                        acc += A[s][i] * ki[j];
                    }
                    *yj += self.h * acc;
                }
                match crate::model::vector_field(self.config, &State::from_array(ys)) {
                    Ok(f) => k[s] = f.to_array(),
                    Err(ModelError::Collision { .. }) => {
                        failed_eval = true;
                        break;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            if failed_eval {
                // shrink into the singular stage and let the proximity guard fire
                self.h *= 0.25;
                continue;
            }
            // 5th-order solution is stage 6's argument; error from E weights
            let mut y5 = self.y;
            for (j, yj) in y5.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (i, ki) in k.iter().enumerate().take(6) {
                    acc += A[6][i] * ki[j];
                }
                *yj += self.h * acc;
            }
            let mut err = 0.0f64;
            for j in 0..4 {
                let mut e = 0.0;
                for (i, ki) in k.iter().enumerate() {
                    e += E[i] * ki[j];
                }
                e *= self.h;
                let sc = self.settings.abs_tol
                    + self.settings.rel_tol * self.y[j].abs().max(y5[j].abs());
                err += (e / sc).powi(2);
            }
            err = (err / 4.0).sqrt();

            if err <= 1.0 {
                // FSAL: stage 7 is already f(t + h, y5)
                let k_new = k[6];
                let seg = self.dense_segment(&k, y5);
                self.t += self.h;
                self.y = y5;
                self.k0 = k_new;
                self.times.push(self.t);
                self.states.push(State::from_array(y5));
                self.segments.push(seg.clone());
                // PI-free step-size controller with the usual safety clamps
                let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
                self.h *= fac;
                self.guard()?;
                if (self.t - self.t_final) * self.dir >= 0.0 {
                    self.stop(StopReason::TimeReached);
                }
                return Ok(Some(seg));
            }
            self.h *= (0.9 * err.powf(-0.2)).max(0.2);
        }
    }

    fn dense_segment(&self, k: &[[f64; 4]; 7], y5: [f64; 4]) -> DenseSegment {
        let h = self.h;
        let mut cont = [[0.0; 5]; 4];
        for j in 0..4 {
            let ydiff = y5[j] - self.y[j];
            let bspl = h * k[0][j] - ydiff;
            let mut dsum = 0.0;
            for (i, ki) in k.iter().enumerate() {
                dsum += D[i] * ki[j];
            }
            cont[j] = [
                self.y[j],
                ydiff,
                bspl,
                ydiff - h * k[6][j] - bspl,
                h * dsum,
            ];
        }
        DenseSegment { t0: self.t, h, y0: self.y, cont }
    }

    fn finish(self) -> Trajectory {
        Trajectory {
            times: self.times,
            states: self.states,
            segments: self.segments,
            stop: self.done.unwrap_or(StopReason::TimeReached),
            final_time: self.t,
        }
    }
}
