//! Quantum propagators `G(x, y, t)` in units ħ = m = 1.
//!
//! Closed forms exist for free motion and the unit oscillator. For any
//! potential `U(x) = αx + βx²` the module also provides the time-sliced path
//! integral (with the intermediate positions integrated out exactly) and the
//! van Vleck form built from the classical action.

use std::f64::consts::{FRAC_PI_4, PI};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_CAUSTIC_THRESHOLD: f64 = 1e-6;
/// Largest slice duration accepted by [`green_sliced`] for curved potentials.
pub const DEFAULT_MAX_SLICE_STEP: f64 = 0.5;
/// Step of the central differences taken on the classical action.
pub const DEFAULT_ACTION_FD_STEP: f64 = 1e-2;

/// `U(x) = αx + βx²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub alpha: f64,
    pub beta: f64,
}

impl Potential {
    pub const FREE: Potential = Potential { alpha: 0.0, beta: 0.0 };
    /// Unit-frequency oscillator `x²/2`.
    pub const HARMONIC: Potential = Potential { alpha: 0.0, beta: 0.5 };

    pub fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.alpha * x + self.beta * x * x
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.alpha + 2.0 * self.beta * x
    }

    pub fn is_free(&self) -> bool {
        self.alpha == 0.0 && self.beta == 0.0
    }

    pub fn is_unit_oscillator(&self) -> bool {
        self.alpha == 0.0 && self.beta == 0.5
    }

    fn validate(&self) -> Result<()> {
        if self.alpha.is_finite() && self.beta.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("non-finite potential {self:?}")))
        }
    }

    /// Rejects durations at which the boundary-value problem has a conjugate
    /// point (`√(2β)·T` a multiple of π).
    fn check_conjugate(&self, duration: f64) -> Result<()> {
        if self.beta > 0.0 {
            let phase = (2.0 * self.beta).sqrt() * duration;
            let k = (phase / PI).round();
            if k != 0.0 && (phase - k * PI).abs() < DEFAULT_CAUSTIC_THRESHOLD {
                return Err(Error::DegenerateBoundaryValue(format!(
                    "conjugate point: sqrt(2 beta) T = {phase} is within {DEFAULT_CAUSTIC_THRESHOLD:e} of {k} pi"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "alpha={},beta={}", self.alpha, self.beta)
    }
}

fn inverse_sqrt(z: Complex64) -> Complex64 {
    z.sqrt().inv()
}

/// Free-particle propagator `(2πit)^{-1/2} exp(i(x-y)²/2t)`, principal branch.
pub fn green_free(x: f64, y: f64, t: f64) -> Result<Complex64> {
    if t == 0.0 {
        return Err(Error::SingularTime(t));
    }
    let d = x - y;
    let phase = d * d / (2.0 * t);
    Ok(inverse_sqrt(Complex64::new(0.0, 2.0 * PI * t)) * Complex64::from_polar(1.0, phase))
}

/// Unit-oscillator propagator with the default caustic threshold.
pub fn green_oscillator(x: f64, y: f64, t: f64) -> Result<Complex64> {
    green_oscillator_with(x, y, t, DEFAULT_CAUSTIC_THRESHOLD)
}

pub fn green_oscillator_with(x: f64, y: f64, t: f64, caustic_threshold: f64) -> Result<Complex64> {
    let (s, c) = t.sin_cos();
    if s.abs() <= caustic_threshold {
        return Err(Error::Caustic {
            t,
            sin_abs: s.abs(),
            threshold: caustic_threshold,
        });
    }
    let phase = 0.5 * (c / s) * (x * x + y * y) - x * y / s;
    Ok(inverse_sqrt(Complex64::new(0.0, 2.0 * PI * s)) * Complex64::from_polar(1.0, phase))
}

/// Positions `x_n = x(nT/N)` of a path on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalPath {
    duration: f64,
    positions: Vec<f64>,
}

impl ClassicalPath {
    pub fn new(duration: f64, positions: Vec<f64>) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::InvalidInput("a path needs at least 2 points".into()));
        }
        if !(duration >= 0.0 && duration.is_finite()) {
            return Err(Error::InvalidInput(format!("invalid path duration {duration}")));
        }
        Ok(Self { duration, positions })
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn slices(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn time_step(&self) -> f64 {
        self.duration / self.slices() as f64
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn times(&self) -> Vec<f64> {
        let n = self.slices();
        (0..=n)
            .map(|k| {
                if k == n {
                    self.duration
                } else {
                    k as f64 * self.time_step()
                }
            })
            .collect()
    }

    /// Largest `|(x_{n+1} - 2x_n + x_{n-1})/Δt² + U'(x_n)|` over interior points.
    pub fn euler_lagrange_residual(&self, potential: &Potential) -> f64 {
        let dt = self.time_step();
        self.positions
            .windows(3)
            .map(|w| ((w[2] - 2.0 * w[1] + w[0]) / (dt * dt) + potential.derivative(w[1])).abs())
            .fold(0.0, f64::max)
    }
}

/// Classical path of `ẍ = -U'(x)` from `x1` at `t = 0` to `x2` at `t = T`,
/// sampled on `slices + 1` equally spaced times.
pub fn classical_trajectory(
    potential: &Potential,
    x1: f64,
    x2: f64,
    duration: f64,
    slices: usize,
) -> Result<ClassicalPath> {
    potential.validate()?;
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "duration must be positive, got {duration}"
        )));
    }
    if slices == 0 {
        return Err(Error::InvalidInput("need at least one slice".into()));
    }
    potential.check_conjugate(duration)?;
    let Potential { alpha, beta } = *potential;
    let x_at: Box<dyn Fn(f64) -> f64> = if beta == 0.0 {
        let v = (x2 - x1 + 0.5 * alpha * duration * duration) / duration;
        Box::new(move |t| x1 + v * t - 0.5 * alpha * t * t)
    } else {
        // Relative to the stationary point x_e of U the motion is harmonic
        // (β > 0) or hyperbolic (β < 0).
        let xe = -alpha / (2.0 * beta);
        let (d1, d2) = (x1 - xe, x2 - xe);
        if beta > 0.0 {
            let w = (2.0 * beta).sqrt();
            let s = (w * duration).sin();
            Box::new(move |t| xe + (d1 * (w * (duration - t)).sin() + d2 * (w * t).sin()) / s)
        } else {
            let k = (-2.0 * beta).sqrt();
            let s = (k * duration).sinh();
            Box::new(move |t| xe + (d1 * (k * (duration - t)).sinh() + d2 * (k * t).sinh()) / s)
        }
    };
    let dt = duration / slices as f64;
    let mut positions: Vec<f64> = (0..=slices).map(|n| x_at(n as f64 * dt)).collect();
    positions[0] = x1;
    positions[slices] = x2;
    ClassicalPath::new(duration, positions)
}

/// Time-sliced action `Σ_n [(x_n - x_{n-1})²/(2Δt) - U(x_n)Δt]`.
pub fn action_of_path(path: &ClassicalPath, potential: &Potential) -> f64 {
    let dt = path.time_step();
    path.positions
        .windows(2)
        .map(|w| {
            let dx = w[1] - w[0];
            let kinetic = if dx == 0.0 { 0.0 } else { dx * dx / (2.0 * dt) };
            kinetic - potential.value(w[1]) * dt
        })
        .sum()
}

/// Closed-form classical action `S(x2, x1, t)` along the classical path.
pub fn classical_action(potential: &Potential, x2: f64, x1: f64, t: f64) -> Result<f64> {
    potential.validate()?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("time must be positive, got {t}")));
    }
    potential.check_conjugate(t)?;
    let Potential { alpha, beta } = *potential;
    if beta == 0.0 {
        let d = x2 - x1;
        return Ok(d * d / (2.0 * t) - 0.5 * alpha * t * (x1 + x2) - alpha * alpha * t.powi(3) / 24.0);
    }
    // U = β(x - x_e)² - α²/(4β).
    let xe = -alpha / (2.0 * beta);
    let (d1, d2) = (x1 - xe, x2 - xe);
    let offset = alpha * alpha * t / (4.0 * beta);
    let quadratic = if beta > 0.0 {
        let w = (2.0 * beta).sqrt();
        let (s, c) = (w * t).sin_cos();
        w * ((d1 * d1 + d2 * d2) * c - 2.0 * d1 * d2) / (2.0 * s)
    } else {
        let k = (-2.0 * beta).sqrt();
        k * ((d1 * d1 + d2 * d2) * (k * t).cosh() - 2.0 * d1 * d2) / (2.0 * (k * t).sinh())
    };
    Ok(quadratic + offset)
}

/// How the van Vleck propagator obtains the classical action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ActionMethod {
    ClosedForm,
    /// `action_of_path` on the classical trajectory with this many slices.
    Discretized(usize),
}

fn action(potential: &Potential, method: ActionMethod, x2: f64, x1: f64, t: f64) -> Result<f64> {
    match method {
        ActionMethod::ClosedForm => classical_action(potential, x2, x1, t),
        ActionMethod::Discretized(n) => {
            classical_trajectory(potential, x1, x2, t, n).map(|p| action_of_path(&p, potential))
        }
    }
}

/// Van Vleck propagator `(-2πi/S₁₂)^{-1/2} exp(iS)` where `S₁₂ = ∂²S/∂x1∂x2`
/// is taken by central differences with step `fd_step`.
pub fn green_van_fleck_with(
    potential: &Potential,
    x2: f64,
    x1: f64,
    t: f64,
    fd_step: f64,
    method: ActionMethod,
) -> Result<Complex64> {
    let s = |a: f64, b: f64| action(potential, method, a, b, t);
    let h = fd_step;
    let s0 = s(x2, x1)?;
    let mixed = (s(x2 + h, x1 + h)? - s(x2 + h, x1 - h)? - s(x2 - h, x1 + h)? + s(x2 - h, x1 - h)?) / (4.0 * h * h);
    if mixed == 0.0 || !mixed.is_finite() {
        return Err(Error::DegenerateBoundaryValue(format!(
            "vanishing mixed action derivative at t = {t}"
        )));
    }
    let amplitude = inverse_sqrt(Complex64::new(0.0, -2.0 * PI / mixed));
    Ok(amplitude * Complex64::from_polar(1.0, s0))
}

pub fn green_van_fleck(potential: &Potential, x2: f64, x1: f64, t: f64) -> Result<Complex64> {
    green_van_fleck_with(potential, x2, x1, t, DEFAULT_ACTION_FD_STEP, ActionMethod::ClosedForm)
}

/// `∂S/∂t + (∂S/∂x2)²/2 + U(x2)` by central differences of the closed-form
/// action; vanishes when the action solves the Hamilton–Jacobi equation.
pub fn hamilton_jacobi_residual(potential: &Potential, x2: f64, x1: f64, t: f64, step: f64) -> Result<f64> {
    let ds_dt = (classical_action(potential, x2, x1, t + step)? - classical_action(potential, x2, x1, t - step)?)
        / (2.0 * step);
    let ds_dx = (classical_action(potential, x2 + step, x1, t)? - classical_action(potential, x2 - step, x1, t)?)
        / (2.0 * step);
    Ok(ds_dt + 0.5 * ds_dx * ds_dx + potential.value(x2))
}

/// `N`-slice path integral with every intermediate position integrated out
/// exactly.
///
/// The running kernel after `n` slices is `P_n exp(i(a_n x² + b_n x + c_n))`;
/// each further slice is a Fresnel integral that maps `(a, b, c)` to new real
/// coefficients and multiplies the prefactor by `√(π/|A|) e^{±iπ/4}`.
pub fn green_sliced(potential: &Potential, x: f64, y: f64, t: f64, slices: usize) -> Result<Complex64> {
    green_sliced_with(potential, x, y, t, slices, DEFAULT_MAX_SLICE_STEP)
}

pub fn green_sliced_with(
    potential: &Potential,
    x: f64,
    y: f64,
    t: f64,
    slices: usize,
    max_step: f64,
) -> Result<Complex64> {
    potential.validate()?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("time must be positive, got {t}")));
    }
    if slices == 0 {
        return Err(Error::InvalidInput("need at least one slice".into()));
    }
    let dt = t / slices as f64;
    if potential.beta != 0.0 && dt >= max_step {
        return Err(Error::InvalidInput(format!(
            "slice duration {dt} exceeds the stability bound {max_step}"
        )));
    }
    let Potential { alpha, beta } = *potential;
    let short = inverse_sqrt(Complex64::new(0.0, 2.0 * PI * dt));
    let inv2dt = 1.0 / (2.0 * dt);

    let mut a = inv2dt - beta * dt;
    let mut b = -y / dt - alpha * dt;
    let mut c = y * y * inv2dt;
    let mut prefactor = short;
    for _ in 1..slices {
        let big_a = a + inv2dt;
        if big_a.abs() < 1e-300 {
            return Err(Error::DegenerateBoundaryValue(format!(
                "vanishing Fresnel coefficient in slice recursion at t = {t}"
            )));
        }
        let fresnel = (PI / big_a.abs()).sqrt() * Complex64::from_polar(1.0, FRAC_PI_4 * big_a.signum());
        prefactor *= short * fresnel;
        let next_a = inv2dt - beta * dt - 1.0 / (4.0 * big_a * dt * dt);
        let next_b = -alpha * dt + b / (2.0 * big_a * dt);
        c -= b * b / (4.0 * big_a);
        a = next_a;
        b = next_b;
    }
    Ok(prefactor * Complex64::from_polar(1.0, a * x * x + b * x + c))
}

/// Which propagator a [`GreenFunction`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GreenKind {
    Free,
    Oscillator,
    VanFleck { potential: Potential },
    Sliced { potential: Potential, slices: usize },
}

/// Evaluatable propagator descriptor; immutable and cheap to copy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenFunction {
    pub kind: GreenKind,
    pub caustic_threshold: f64,
    pub fd_step: f64,
    pub max_slice_step: f64,
}

impl GreenFunction {
    pub fn new(kind: GreenKind) -> Self {
        Self {
            kind,
            caustic_threshold: DEFAULT_CAUSTIC_THRESHOLD,
            fd_step: DEFAULT_ACTION_FD_STEP,
            max_slice_step: DEFAULT_MAX_SLICE_STEP,
        }
    }

    pub fn free() -> Self {
        Self::new(GreenKind::Free)
    }

    pub fn oscillator() -> Self {
        Self::new(GreenKind::Oscillator)
    }

    pub fn van_fleck(potential: Potential) -> Self {
        Self::new(GreenKind::VanFleck { potential })
    }

    pub fn sliced(potential: Potential, slices: usize) -> Self {
        Self::new(GreenKind::Sliced { potential, slices })
    }

    /// Closed form where one exists, van Vleck otherwise.
    pub fn for_potential(potential: Potential) -> Self {
        if potential.is_free() {
            Self::free()
        } else if potential.is_unit_oscillator() {
            Self::oscillator()
        } else {
            Self::van_fleck(potential)
        }
    }

    pub fn potential(&self) -> Potential {
        match self.kind {
            GreenKind::Free => Potential::FREE,
            GreenKind::Oscillator => Potential::HARMONIC,
            GreenKind::VanFleck { potential } | GreenKind::Sliced { potential, .. } => potential,
        }
    }

    /// Checks that `t` lies in the validity domain of this propagator.
    pub fn check_time(&self, t: f64) -> Result<()> {
        if !t.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite time {t}")));
        }
        match self.kind {
            GreenKind::Free => {
                if t == 0.0 {
                    return Err(Error::SingularTime(t));
                }
            }
            GreenKind::Oscillator => {
                let s = t.sin().abs();
                if s <= self.caustic_threshold {
                    return Err(Error::Caustic {
                        t,
                        sin_abs: s,
                        threshold: self.caustic_threshold,
                    });
                }
            }
            GreenKind::VanFleck { potential } | GreenKind::Sliced { potential, .. } => {
                if t <= 0.0 {
                    return Err(Error::SingularTime(t));
                }
                potential.check_conjugate(t)?;
            }
        }
        Ok(())
    }

    pub fn is_valid_at(&self, t: f64) -> bool {
        self.check_time(t).is_ok()
    }

    pub fn eval(&self, x: f64, y: f64, t: f64) -> Result<Complex64> {
        match self.kind {
            GreenKind::Free => green_free(x, y, t),
            GreenKind::Oscillator => green_oscillator_with(x, y, t, self.caustic_threshold),
            GreenKind::VanFleck { potential } => {
                green_van_fleck_with(&potential, x, y, t, self.fd_step, ActionMethod::ClosedForm)
            }
            GreenKind::Sliced { potential, slices } => {
                green_sliced_with(&potential, x, y, t, slices, self.max_slice_step)
            }
        }
    }

    pub fn label(&self) -> String {
        match self.kind {
            GreenKind::Free => "free".into(),
            GreenKind::Oscillator => "oscillator".into(),
            GreenKind::VanFleck { .. } => "van-fleck".into(),
            GreenKind::Sliced { slices, .. } => format!("sliced-{slices}"),
        }
    }
}
