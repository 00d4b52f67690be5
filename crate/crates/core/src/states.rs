//! Wavefunctions, density matrices and their evolution through a propagator.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greens::{GreenFunction, GreenKind};
use crate::numerics::{integrate_samples, interpolate_cubic, UniformGrid};

/// Highest oscillator level [`make_state`] builds by default.
pub const DEFAULT_MAX_LEVEL: usize = 32;
/// Norm drift above which evolution flags the result.
pub const NORM_DRIFT_TOLERANCE: f64 = 1e-4;

/// Default position grid `[-12, 12]` with 512 points.
pub fn default_position_grid() -> UniformGrid {
    UniformGrid::symmetric(12.0, 512).expect("valid default grid")
}

/// One term of a superposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub amplitude: Complex64,
    pub state: StateSpec,
}

/// Preset test states (ω = 1 oscillator units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum StateSpec {
    /// Oscillator eigenstate `n`.
    Oscillator {
        n: usize,
    },
    /// `(πσ²)^{-1/4} exp(-(x - x0)²/(2σ²) + i p0 x)`.
    Gaussian {
        x0: f64,
        p0: f64,
        sigma: f64,
    },
    Superposition {
        components: Vec<Component>,
    },
}

impl StateSpec {
    pub fn ground() -> Self {
        StateSpec::Oscillator { n: 0 }
    }

    pub fn gaussian(x0: f64, p0: f64, sigma: f64) -> Self {
        StateSpec::Gaussian { x0, p0, sigma }
    }

    /// Equal-weight superposition of the given states.
    pub fn equal_superposition(states: Vec<StateSpec>) -> Self {
        let components = states
            .into_iter()
            .map(|state| Component {
                amplitude: Complex64::new(1.0, 0.0),
                state,
            })
            .collect();
        StateSpec::Superposition { components }
    }

    fn validate(&self, max_level: usize) -> Result<()> {
        match self {
            StateSpec::Oscillator { n } if *n > max_level => Err(Error::UnsupportedState(format!(
                "oscillator level {n} exceeds the maximum {max_level}"
            ))),
            StateSpec::Oscillator { .. } => Ok(()),
            StateSpec::Gaussian { x0, p0, sigma } => {
                if !(*sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "packet width must be positive, got {sigma}"
                    )));
                }
                if !(x0.is_finite() && p0.is_finite()) {
                    return Err(Error::InvalidInput("packet center must be finite".into()));
                }
                Ok(())
            }
            StateSpec::Superposition { components } => {
                if components.is_empty() {
                    return Err(Error::InvalidInput("empty superposition".into()));
                }
                components.iter().try_for_each(|c| c.state.validate(max_level))
            }
        }
    }

    /// Analytic amplitude at `x`; superpositions are not renormalized.
    pub fn amplitude(&self, x: f64) -> Complex64 {
        match self {
            StateSpec::Oscillator { n } => Complex64::new(hermite_function(*n, x), 0.0),
            StateSpec::Gaussian { x0, p0, sigma } => {
                let norm = (PI * sigma * sigma).powf(-0.25);
                let d = (x - x0) / sigma;
                Complex64::from_polar(norm * (-0.5 * d * d).exp(), p0 * x)
            }
            StateSpec::Superposition { components } => {
                components.iter().map(|c| c.amplitude * c.state.amplitude(x)).sum()
            }
        }
    }
}

impl fmt::Display for StateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateSpec::Oscillator { n: 0 } => write!(f, "ho_ground"),
            StateSpec::Oscillator { n } => write!(f, "ho:{n}"),
            StateSpec::Gaussian { x0, p0, sigma } => write!(f, "gaussian:{x0},{p0},{sigma}"),
            StateSpec::Superposition { components } => {
                for (i, c) in components.iter().enumerate() {
                    if i > 0 {
                        write!(f, "+")?;
                    }
                    if c.amplitude != Complex64::new(1.0, 0.0) {
                        write!(f, "({})*", c.amplitude)?;
                    }
                    write!(f, "{}", c.state)?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for StateSpec {
    type Err = Error;

    /// Accepts `ho_ground`, `ho:N`, `gaussian:x0,p0,sigma` and `a+b+...`
    /// (equal-weight superposition).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.contains('+') {
            let parts = s.split('+').map(str::parse).collect::<Result<Vec<_>>>()?;
            return Ok(StateSpec::equal_superposition(parts));
        }
        let bad = || Error::InvalidInput(format!("unrecognized state '{s}'"));
        if s == "ho_ground" {
            return Ok(StateSpec::ground());
        }
        if let Some(n) = s.strip_prefix("ho:") {
            return n.trim().parse().map(|n| StateSpec::Oscillator { n }).map_err(|_| bad());
        }
        if let Some(args) = s.strip_prefix("gaussian:") {
            let v: Vec<f64> = args
                .split(',')
                .map(|a| a.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad())?;
            if let [x0, p0, sigma] = v[..] {
                return Ok(StateSpec::gaussian(x0, p0, sigma));
            }
        }
        Err(bad())
    }
}

/// Normalized oscillator eigenfunction by the three-term recurrence
/// `ψ_{k+1} = √(2/(k+1)) x ψ_k - √(k/(k+1)) ψ_{k-1}`.
fn hermite_function(n: usize, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25) * (-0.5 * x * x).exp();
    for k in 0..n {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * x * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Complex amplitudes on a uniform position grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: UniformGrid,
    values: Vec<Complex64>,
}

impl WaveFunction {
    pub fn new(grid: UniformGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite(format!("wavefunction sample {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn norm_squared(&self) -> f64 {
        let density: Vec<f64> = self.values.iter().map(|v| v.norm_sqr()).collect();
        integrate_samples(&density, self.grid.step()).expect("grid has at least 8 points")
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm_squared();
        if !(n > 0.0) {
            return Err(Error::InvalidInput("cannot normalize a zero wavefunction".into()));
        }
        let scale = n.sqrt().recip();
        self.values.iter_mut().for_each(|v| *v *= scale);
        Ok(self)
    }

    /// Cubic interpolation between grid points; zero outside the grid.
    pub fn value_at(&self, x: f64) -> Complex64 {
        interpolate_cubic(&self.grid, &self.values, x)
    }
}

pub fn make_state(spec: &StateSpec, grid: &UniformGrid) -> Result<WaveFunction> {
    make_state_with(spec, grid, DEFAULT_MAX_LEVEL)
}

pub fn make_state_with(spec: &StateSpec, grid: &UniformGrid, max_level: usize) -> Result<WaveFunction> {
    spec.validate(max_level)?;
    let values = grid.points().iter().map(|&x| spec.amplitude(x)).collect();
    WaveFunction::new(*grid, values)?.normalized()
}

/// Hermitian matrix `ρ(x_i, x_j)` on a position grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    grid: UniformGrid,
    values: Array2<Complex64>,
}

impl DensityMatrix {
    pub fn new(grid: UniformGrid, values: Array2<Complex64>) -> Result<Self> {
        let n = grid.len();
        if values.dim() != (n, n) {
            return Err(Error::InvalidInput(format!(
                "density matrix of shape {:?} on a grid of {n} points",
                values.dim()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<Complex64> {
        self.values
    }

    /// `∫ ρ(x, x) dx`.
    pub fn trace(&self) -> Complex64 {
        let diag: Vec<Complex64> = self.values.diag().to_vec();
        integrate_samples(&diag, self.grid.step()).expect("grid has at least 8 points")
    }

    /// `max |ρ - ρ†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.grid.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.values[[i, j]] - self.values[[j, i]].conj()).norm());
            }
        }
        worst
    }

    /// `(ρ + ρ†)/2`.
    pub fn hermitized(mut self) -> Self {
        let n = self.grid.len();
        for i in 0..n {
            for j in i..n {
                let avg = 0.5 * (self.values[[i, j]] + self.values[[j, i]].conj());
                self.values[[i, j]] = avg;
                self.values[[j, i]] = avg.conj();
            }
        }
        self
    }

    /// Convex combination `Σ p_k ρ_k` of matrices on a common grid.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let (_, first) = parts
            .first()
            .ok_or_else(|| Error::InvalidInput("empty mixture".into()))?;
        let grid = first.grid;
        let mut values = Array2::zeros(first.values.dim());
        for (p, rho) in parts {
            if rho.grid != grid {
                return Err(Error::InvalidInput("mixture components use different grids".into()));
            }
            if !(*p >= 0.0) {
                return Err(Error::InvalidInput(format!("negative mixture weight {p}")));
            }
            values.scaled_add(Complex64::new(*p, 0.0), &rho.values);
        }
        Ok(Self { grid, values })
    }

    /// Operator square `∫ ρ(x, u) ρ(u, x') du` with the grid quadrature.
    pub fn square(&self) -> Array2<Complex64> {
        let weights = self.grid.weights();
        let mut weighted = self.values.clone();
        for (mut col, w) in weighted.columns_mut().into_iter().zip(&weights) {
            col.mapv_inplace(|v| v * *w);
        }
        weighted.dot(&self.values)
    }
}

pub fn density_from_wavefunction(psi: &WaveFunction) -> DensityMatrix {
    let v = psi.values();
    let n = v.len();
    let values = Array2::from_shape_fn((n, n), |(i, j)| v[i] * v[j].conj());
    DensityMatrix { grid: psi.grid, values }
}

/// Matrix `M[x, y] = G(x, y, t) q_y` (quadrature weights folded in), so that
/// `Ψ_t = M Ψ`.
pub fn propagator_matrix(green: &GreenFunction, grid: &UniformGrid, t: f64) -> Result<Array2<Complex64>> {
    green.check_time(t)?;
    let pts = grid.points();
    let weights = grid.weights();
    let n = pts.len();
    let rows: Vec<Vec<Complex64>> = pts
        .par_iter()
        .map(|&x| {
            pts.iter()
                .zip(&weights)
                .map(|(&y, &w)| green.eval(x, y, t).map(|g| g * w))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let flat: Vec<Complex64> = rows.into_iter().flatten().collect();
    Ok(Array2::from_shape_vec((n, n), flat).expect("square matrix"))
}

/// Options for [`evolve_wavefunction`].
#[derive(Debug, Clone, Copy, Default)]
pub struct EvolveOptions {
    /// Evaluate the oscillator at multiples of π as the delta-kernel limit
    /// `e^{-ikπ/2} Ψ((-1)^k x)` instead of failing with a caustic error.
    pub allow_delta_limit: bool,
}

/// Evolved wavefunction with its unnormalized norm.
#[derive(Debug, Clone)]
pub struct Evolved {
    pub wavefunction: WaveFunction,
    pub norm_squared: f64,
}

impl Evolved {
    pub fn norm_drift(&self) -> f64 {
        (self.norm_squared - 1.0).abs()
    }

    pub fn drift_exceeded(&self) -> bool {
        self.norm_drift() > NORM_DRIFT_TOLERANCE
    }
}

/// `Ψ_t(x) = ∫ G(x, y, t) Ψ(y) dy`. The result is not renormalized; the
/// drift is reported on [`Evolved`].
pub fn evolve_wavefunction(
    psi: &WaveFunction,
    green: &GreenFunction,
    t: f64,
    options: EvolveOptions,
) -> Result<Evolved> {
    if t == 0.0 {
        return Ok(Evolved {
            wavefunction: psi.clone(),
            norm_squared: psi.norm_squared(),
        });
    }
    if matches!(green.kind, GreenKind::Oscillator) && t.sin().abs() <= green.caustic_threshold {
        if !options.allow_delta_limit {
            green.check_time(t)?;
        }
        return oscillator_delta_limit(psi, t);
    }
    let m = propagator_matrix(green, psi.grid(), t)?;
    let values = m.dot(&ndarray::Array1::from(psi.values().to_vec())).to_vec();
    let wavefunction = WaveFunction::new(*psi.grid(), values)?;
    let norm_squared = wavefunction.norm_squared();
    Ok(Evolved {
        wavefunction,
        norm_squared,
    })
}

fn oscillator_delta_limit(psi: &WaveFunction, t: f64) -> Result<Evolved> {
    let k = (t / PI).round() as i64;
    let phase = Complex64::from_polar(1.0, -(k as f64) * PI / 2.0);
    let mut values: Vec<Complex64> = psi.values().iter().map(|v| v * phase).collect();
    if k.rem_euclid(2) == 1 {
        if !psi.grid().is_symmetric() {
            return Err(Error::InvalidInput(
                "parity limit needs a grid symmetric about zero".into(),
            ));
        }
        values.reverse();
    }
    let wavefunction = WaveFunction::new(*psi.grid(), values)?;
    let norm_squared = wavefunction.norm_squared();
    Ok(Evolved {
        wavefunction,
        norm_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greens::Potential;

    fn grid() -> UniformGrid {
        default_position_grid()
    }

    #[test]
    fn ground_state_value_at_origin() {
        let psi = make_state(&StateSpec::ground(), &grid()).unwrap();
        assert!((StateSpec::ground().amplitude(0.0).re - 0.7511).abs() < 1e-4);
        // 512 points: x = 0 is not a node; interpolate.
        assert!((psi.value_at(0.0).re - PI.powf(-0.25)).abs() < 1e-6);
    }

    #[test]
    fn unit_gaussian_is_the_ground_state() {
        let g = grid();
        let a = make_state(&StateSpec::ground(), &g).unwrap();
        let b = make_state(&StateSpec::gaussian(0.0, 0.0, 1.0), &g).unwrap();
        for (u, v) in a.values().iter().zip(b.values()) {
            assert!((u - v).norm() < 1e-15);
        }
    }

    #[test]
    fn presets_are_normalized() {
        let g = grid();
        for spec in [
            StateSpec::ground(),
            StateSpec::Oscillator { n: 5 },
            StateSpec::Oscillator { n: 32 },
            StateSpec::gaussian(1.0, 0.5, 1.0),
            StateSpec::gaussian(-2.0, 1.5, 0.6),
            "ho:0+ho:1".parse().unwrap(),
        ] {
            let psi = make_state(&spec, &g).unwrap();
            assert!((psi.norm_squared() - 1.0).abs() < 1e-8, "{spec}");
        }
    }

    #[test]
    fn hermite_functions_are_orthonormal() {
        let g = grid();
        let w = g.weights();
        let psi: Vec<Vec<f64>> = (0..6)
            .map(|n| g.points().iter().map(|&x| hermite_function(n, x)).collect())
            .collect();
        for m in 0..6 {
            for n in 0..6 {
                let overlap: f64 = (0..g.len()).map(|i| w[i] * psi[m][i] * psi[n][i]).sum();
                let expected = if m == n { 1.0 } else { 0.0 };
                assert!((overlap - expected).abs() < 1e-10, "<{m}|{n}> = {overlap}");
            }
        }
    }

    #[test]
    fn invalid_presets_are_rejected() {
        let g = grid();
        assert!(matches!(
            make_state(&StateSpec::Oscillator { n: 33 }, &g),
            Err(Error::UnsupportedState(_))
        ));
        assert!(make_state_with(&StateSpec::Oscillator { n: 40 }, &g, 40).is_ok());
        assert!(matches!(
            make_state(&StateSpec::gaussian(0.0, 0.0, 0.0), &g),
            Err(Error::InvalidInput(_))
        ));
        assert!(make_state(&StateSpec::gaussian(0.0, 0.0, -1.0), &g).is_err());
    }

    #[test]
    fn state_strings_roundtrip() {
        for s in ["ho_ground", "ho:3", "gaussian:1,0.5,1", "ho_ground+ho:1"] {
            let spec: StateSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("ho:x".parse::<StateSpec>().is_err());
        assert!("gaussian:1,2".parse::<StateSpec>().is_err());
        assert!("squeezed".parse::<StateSpec>().is_err());
    }

    #[test]
    fn pure_density_matrix() {
        let psi = make_state(&StateSpec::gaussian(0.5, -0.3, 0.8), &grid()).unwrap();
        let rho = density_from_wavefunction(&psi);
        for (i, v) in psi.values().iter().enumerate() {
            assert_eq!(rho.values()[[i, i]].re, v.norm_sqr());
            assert!(rho.values()[[i, i]].im.abs() < 1e-15);
        }
        assert!((rho.trace() - Complex64::new(1.0, 0.0)).norm() < 1e-6);
        assert_eq!(rho.hermiticity_defect(), 0.0);
    }

    #[test]
    fn pure_density_matrix_is_idempotent() {
        let g = UniformGrid::symmetric(12.0, 160).unwrap();
        let psi = make_state(&StateSpec::gaussian(1.0, 0.5, 1.0), &g).unwrap();
        let rho = density_from_wavefunction(&psi);
        let sq = rho.square();
        let err = (&sq - rho.values()).iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn mixture_weights_combine() {
        let g = grid();
        let r0 = density_from_wavefunction(&make_state(&StateSpec::ground(), &g).unwrap());
        let r1 = density_from_wavefunction(&make_state(&StateSpec::Oscillator { n: 1 }, &g).unwrap());
        let mix = DensityMatrix::mixture(&[(0.5, &r0), (0.5, &r1)]).unwrap();
        assert!((mix.trace().re - 1.0).abs() < 1e-8);
        assert!(DensityMatrix::mixture(&[]).is_err());
        assert!(DensityMatrix::mixture(&[(-0.1, &r0)]).is_err());
    }

    #[test]
    fn evolution_at_zero_is_identity() {
        let psi = make_state(&StateSpec::gaussian(1.0, 0.5, 1.0), &grid()).unwrap();
        let out = evolve_wavefunction(&psi, &GreenFunction::free(), 0.0, EvolveOptions::default()).unwrap();
        assert_eq!(out.wavefunction, psi);
    }

    #[test]
    fn free_gaussian_spreads() {
        let psi = make_state(&StateSpec::ground(), &grid()).unwrap();
        let out = evolve_wavefunction(&psi, &GreenFunction::free(), 1.0, EvolveOptions::default()).unwrap();
        assert!(!out.drift_exceeded());
        let width2 = 2.0;
        for (x, v) in grid().points().iter().zip(out.wavefunction.values()) {
            let expected = (PI * width2).powf(-0.5) * (-x * x / width2).exp();
            assert!((v.norm_sqr() - expected).abs() < 1e-5, "x = {x}");
        }
    }

    #[test]
    fn ground_state_is_stationary() {
        let psi = make_state(&StateSpec::ground(), &grid()).unwrap();
        let out = evolve_wavefunction(&psi, &GreenFunction::oscillator(), 0.7, EvolveOptions::default()).unwrap();
        for (a, b) in psi.values().iter().zip(out.wavefunction.values()) {
            assert!((a.norm() - b.norm()).abs() < 1e-6);
        }
    }

    #[test]
    fn norm_is_preserved_by_closed_forms() {
        let psi = make_state(&StateSpec::gaussian(1.0, 0.5, 1.0), &grid()).unwrap();
        for (g, t) in [
            (GreenFunction::free(), 0.5),
            (GreenFunction::free(), 1.0),
            (GreenFunction::oscillator(), 0.7),
            (GreenFunction::oscillator(), 2.0),
        ] {
            let out = evolve_wavefunction(&psi, &g, t, EvolveOptions::default()).unwrap();
            assert!(out.norm_drift() < 1e-4, "{} t = {t}", g.label());
        }
    }

    #[test]
    fn free_evolution_composes() {
        let psi = make_state(&StateSpec::gaussian(1.0, 0.5, 1.0), &grid()).unwrap();
        let free = GreenFunction::free();
        let o = EvolveOptions::default();
        let half = evolve_wavefunction(&psi, &free, 0.5, o).unwrap().wavefunction;
        let twice = evolve_wavefunction(&half, &free, 0.5, o).unwrap().wavefunction;
        let once = evolve_wavefunction(&psi, &free, 1.0, o).unwrap().wavefunction;
        let err = twice
            .values()
            .iter()
            .zip(once.values())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn caustic_needs_the_delta_flag() {
        let psi = make_state(&StateSpec::gaussian(1.0, 0.5, 1.0), &grid()).unwrap();
        let osc = GreenFunction::oscillator();
        assert!(matches!(
            evolve_wavefunction(&psi, &osc, PI, EvolveOptions::default()),
            Err(Error::Caustic { .. })
        ));
        let out = evolve_wavefunction(
            &psi,
            &osc,
            PI,
            EvolveOptions {
                allow_delta_limit: true,
            },
        )
        .unwrap();
        let g = grid();
        // Half a period maps x -> -x.
        for (i, v) in out.wavefunction.values().iter().enumerate() {
            let mirrored = psi.values()[g.len() - 1 - i];
            assert!((v.norm() - mirrored.norm()).abs() < 1e-15);
        }
        // Two quarter periods through the kernel, including the global phase.
        let quarter = evolve_wavefunction(&psi, &osc, PI / 2.0, EvolveOptions::default())
            .unwrap()
            .wavefunction;
        let half = evolve_wavefunction(&quarter, &osc, PI / 2.0, EvolveOptions::default())
            .unwrap()
            .wavefunction;
        let err = half
            .values()
            .iter()
            .zip(out.wavefunction.values())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn van_fleck_propagation_matches_free() {
        let psi = make_state(&StateSpec::gaussian(0.0, 1.0, 1.0), &grid()).unwrap();
        let o = EvolveOptions::default();
        let a = evolve_wavefunction(&psi, &GreenFunction::van_fleck(Potential::FREE), 0.6, o).unwrap();
        let b = evolve_wavefunction(&psi, &GreenFunction::free(), 0.6, o).unwrap();
        let err = a
            .wavefunction
            .values()
            .iter()
            .zip(b.wavefunction.values())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }
}
