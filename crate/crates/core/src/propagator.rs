//! Time evolution of tomograms.
//!
//! Three routes are provided: exact coordinate pullbacks for the free particle
//! and the unit oscillator, the chain through a quantum Green function
//! (tomogram → density matrix → `G ρ G†` → tomogram), and the regularized
//! Fourier component `Π_F` of the transition kernel.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{reduce_evolution_equation, solve_characteristics, PotentialPolynomial};
use crate::greens::{GreenFunction, Potential};
use crate::numerics::{damped_integral_2d_report, UniformGrid};
use crate::states::{default_position_grid, propagator_matrix, DensityMatrix};
use crate::tomography::{
    density_from_tomogram, tomogram_from_density, Discrepancy, ForwardOptions, FrameMap, ReconstructionOptions,
    Tomogram,
};

/// Evolution route.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Pullback,
    Green,
    Pde,
}

/// Frame map of the exact delta kernels: `(μ, ν) ↦ (μ, ν + μt)` for the free
/// particle and the rotation by `t` for the unit oscillator.
pub fn pullback_map(potential: &Potential, t: f64) -> Result<FrameMap> {
    if !t.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite time {t}")));
    }
    if potential.is_free() {
        Ok(FrameMap::linear([[1.0, 0.0], [t, 1.0]]))
    } else if potential.is_unit_oscillator() {
        let (s, c) = t.sin_cos();
        Ok(FrameMap::linear([[c, -s], [s, c]]))
    } else {
        Err(Error::UnsupportedPotential(format!(
            "pullback evolution needs the free particle or the unit oscillator, got alpha = {}, beta = {}",
            potential.alpha, potential.beta
        )))
    }
}

/// `w_t(X, μ, ν) = w₀(X, μ', ν')` with `(μ', ν')` from [`pullback_map`].
pub fn evolve_pullback(w: &Tomogram, potential: &Potential, t: f64) -> Result<Tomogram> {
    Ok(w.pulled_back(&pullback_map(potential, t)?))
}

/// Numerical settings of the Green-function route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenRouteOptions {
    /// Grid on which the density matrix is reconstructed and propagated.
    pub position_grid: UniformGrid,
    pub reconstruction: ReconstructionOptions,
    pub forward: ForwardOptions,
}

impl Default for GreenRouteOptions {
    fn default() -> Self {
        Self {
            position_grid: default_position_grid(),
            reconstruction: ReconstructionOptions::default(),
            forward: ForwardOptions::default(),
        }
    }
}

/// Result of [`evolve_via_green`] with its diagnostics.
#[derive(Debug, Clone)]
pub struct GreenEvolution {
    pub tomogram: Tomogram,
    /// Trace of the reconstructed density matrix before renormalization.
    pub reconstructed_trace: f64,
    /// Trace after propagation.
    pub evolved_trace: f64,
    pub hermiticity_defect: f64,
    pub accuracy_warning: bool,
}

/// Evolves through the density matrix: `ρ_t(x, x') = ∬ G(x, y, t) ρ(y, z)
/// conj(G(x', z, t)) dy dz`. At `t = 0` the propagation step is skipped.
///
/// The reconstructed density matrix is rescaled to unit trace before it is
/// propagated; the raw trace is reported.
pub fn evolve_via_green(
    w: &Tomogram,
    green: &GreenFunction,
    t: f64,
    options: &GreenRouteOptions,
) -> Result<GreenEvolution> {
    if t != 0.0 {
        green.check_time(t)?;
    }
    let rec = density_from_tomogram(w, &options.position_grid, options.reconstruction)?;
    let reconstructed_trace = rec.density.trace().re;
    if !(reconstructed_trace > 0.0) {
        return Err(Error::NonFinite(format!("reconstructed trace {reconstructed_trace}")));
    }
    let rho = DensityMatrix::new(options.position_grid, rec.density.values() / reconstructed_trace)?;
    let rho_t = if t == 0.0 {
        rho
    } else {
        let m = propagator_matrix(green, &options.position_grid, t)?;
        let m_dag = m.t().mapv(|v| v.conj());
        DensityMatrix::new(options.position_grid, m.dot(rho.values()).dot(&m_dag))?
    };
    let evolved_trace = rho_t.trace().re;
    let tomogram = tomogram_from_density(&rho_t, w.x_grid(), w.theta_grid(), options.forward)?;
    Ok(GreenEvolution {
        tomogram,
        reconstructed_trace,
        evolved_trace,
        hermiticity_defect: rec.hermiticity_defect,
        accuracy_warning: rec.accuracy_warning,
    })
}

/// Dispatches to one of the evolution routes. The Green route uses the
/// closed form where one exists and van Vleck otherwise.
pub fn evolve(route: Route, w: &Tomogram, potential: &Potential, t: f64) -> Result<Tomogram> {
    match route {
        Route::Pullback => evolve_pullback(w, potential, t),
        Route::Green => {
            let green = GreenFunction::for_potential(*potential);
            Ok(evolve_via_green(w, &green, t, &GreenRouteOptions::default())?.tomogram)
        }
        Route::Pde => {
            let pde = reduce_evolution_equation(&PotentialPolynomial::from(*potential))?;
            solve_characteristics(&pde, w, t)
        }
    }
}

/// Evolves by `t_a` then `t_b` and compares with a single step of `t_a + t_b`
/// on the lattice of `w`.
pub fn check_composition(route: Route, potential: &Potential, t_a: f64, t_b: f64, w: &Tomogram) -> Result<Discrepancy> {
    let two_steps = evolve(route, &evolve(route, w, potential, t_a)?, potential, t_b)?;
    let one_step = evolve(route, w, potential, t_a + t_b)?;
    two_steps.compare(&one_step)
}

/// Integration domain of the kernel quadrature (same grid for `z` and `a`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelDomain {
    /// Half-width; `None` picks `max(80, sqrt(ln(1e10)/ε))` so that the
    /// damping factor at the edge is below `1e-10`.
    pub half_width: Option<f64>,
    pub step: f64,
}

impl Default for KernelDomain {
    fn default() -> Self {
        Self {
            half_width: None,
            step: 0.125,
        }
    }
}

impl KernelDomain {
    pub fn grid(&self, eps: f64) -> Result<UniformGrid> {
        let half = self
            .half_width
            .unwrap_or_else(|| 80.0f64.max((1e10f64.ln() / eps).sqrt()));
        if !(self.step > 0.0 && half > 0.0) {
            return Err(Error::InvalidInput(format!(
                "kernel domain half-width {half}, step {}",
                self.step
            )));
        }
        let intervals = (2.0 * half / self.step).ceil() as usize;
        UniformGrid::symmetric(half, intervals + 1)
    }
}

/// Fourier component `Π_F(k; μ, ν; μ', ν'; t)` of the tomogram propagator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelFourierQuery {
    pub k: f64,
    pub mu: f64,
    pub nu: f64,
    pub mu_p: f64,
    pub nu_p: f64,
    pub t: f64,
    pub eps: f64,
    pub green: GreenFunction,
    #[serde(default)]
    pub domain: KernelDomain,
}

/// Damped kernel value at `X' = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelValue {
    pub k: f64,
    pub value: Complex64,
    pub boundary_ratio: f64,
    pub accuracy_warning: bool,
}

impl KernelValue {
    /// The kernel depends on `X` and `X'` only through `X - X'`; moving the
    /// source point to `X'` multiplies the component by `e^{ikX'}`.
    pub fn at_source(&self, x_p: f64) -> Complex64 {
        self.value * Complex64::from_polar(1.0, self.k * x_p)
    }
}

/// Boundary-to-peak ratio above which a kernel value is flagged.
pub const KERNEL_BOUNDARY_THRESHOLD: f64 = 1e-8;

/// `(k²/2π) ∬ G(a + kν/2, z + kν', t) conj(G(a - kν/2, z, t))
/// exp(ik(-kμ'ν'/2 - μ'z + μa)) exp(-ε(z² + a²)) dz da`.
pub fn kernel_fourier(q: &KernelFourierQuery) -> Result<KernelValue> {
    let fields = [q.k, q.mu, q.nu, q.mu_p, q.nu_p, q.t, q.eps];
    if fields.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite kernel query".into()));
    }
    if q.k == 0.0 {
        return Err(Error::InvalidInput("kernel query needs k != 0".into()));
    }
    if !(q.eps > 0.0) {
        return Err(Error::InvalidInput(format!("damping must be positive, got {}", q.eps)));
    }
    q.green.check_time(q.t)?;
    let grid = q.domain.grid(q.eps)?;
    let (k, t) = (q.k, q.t);
    let half_k_nu = k * q.nu / 2.0;
    let k_nu_p = k * q.nu_p;
    let nan = Complex64::new(f64::NAN, f64::NAN);
    let integrand = |z: f64, a: f64| {
        let g1 = q.green.eval(a + half_k_nu, z + k_nu_p, t).unwrap_or(nan);
        let g2 = q.green.eval(a - half_k_nu, z, t).unwrap_or(nan);
        let phase = k * (-k * q.mu_p * q.nu_p / 2.0 - q.mu_p * z + q.mu * a);
        g1 * g2.conj() * Complex64::from_polar(1.0, phase)
    };
    let report = damped_integral_2d_report(integrand, &grid, &grid, q.eps)?;
    Ok(KernelValue {
        k,
        value: report.value * (k * k / (2.0 * PI)),
        boundary_ratio: report.boundary_ratio,
        accuracy_warning: report.boundary_ratio > KERNEL_BOUNDARY_THRESHOLD,
    })
}
