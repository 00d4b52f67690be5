//! Symplectic tomograms `w(X, μ, ν)` and the map between them and states.
//!
//! A [`Tomogram`] stores `w(X, cos θ, sin θ)` on an `X × θ` lattice with
//! `θ ∈ [0, π)` and extends to every frame `(μ, ν) ≠ 0` by homogeneity,
//! `w(aX, aμ, aν) = w(X, μ, ν)/|a|`. Evolved tomograms can carry an affine
//! [`FrameMap`] that is applied to every query before the lattice lookup, so
//! that pullback evolutions compose without re-interpolation.
//!
//! Sign conventions are fixed in `docs/conventions.md`.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{integrate_samples, interpolate_cubic, lagrange4, UniformGrid, MIN_GRID_POINTS};
use crate::states::{DensityMatrix, WaveFunction};

/// `|sin θ|` below which the forward transform uses the `ν → 0` limit.
pub const DEFAULT_EPS_THETA: f64 = 1e-3;
/// Stored values above `-NEGATIVE_TOLERANCE` count as nonnegative.
pub const NEGATIVE_TOLERANCE: f64 = 1e-10;

/// Angles `θ_j = jπ/n`, `j = 0..n`, covering `[0, π)`.
///
/// In the inclusive-endpoint convention of [`UniformGrid`] this is the grid
/// `[0, π - π/n]` with `n` points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTheta")]
pub struct ThetaGrid {
    count: usize,
}

#[derive(Deserialize)]
struct RawTheta {
    count: usize,
}

impl TryFrom<RawTheta> for ThetaGrid {
    type Error = Error;

    fn try_from(raw: RawTheta) -> Result<Self> {
        ThetaGrid::new(raw.count)
    }
}

impl ThetaGrid {
    pub fn new(count: usize) -> Result<Self> {
        if count < MIN_GRID_POINTS {
            return Err(Error::InvalidInput(format!(
                "theta grid needs at least {MIN_GRID_POINTS} points, got {count}"
            )));
        }
        Ok(Self { count })
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        PI / self.count as f64
    }

    pub fn point(&self, j: usize) -> f64 {
        j as f64 * self.step()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count).map(|j| self.point(j)).collect()
    }

    pub fn as_uniform(&self) -> UniformGrid {
        UniformGrid::new(0.0, PI - self.step(), self.count).expect("count checked")
    }
}

/// Default lattice: `X ∈ [-12, 12]` with 512 points, 128 angles.
pub fn default_tomogram_grids() -> (UniformGrid, ThetaGrid) {
    (
        UniformGrid::symmetric(12.0, 512).expect("valid default grid"),
        ThetaGrid::new(128).expect("valid default grid"),
    )
}

/// Affine frame map `(X, μ, ν) ↦ (X + s·(μ, ν), M (μ, ν))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameMap {
    pub matrix: [[f64; 2]; 2],
    pub shift: [f64; 2],
}

impl Default for FrameMap {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl FrameMap {
    pub const IDENTITY: FrameMap = FrameMap {
        matrix: [[1.0, 0.0], [0.0, 1.0]],
        shift: [0.0, 0.0],
    };

    pub fn linear(matrix: [[f64; 2]; 2]) -> Self {
        Self {
            matrix,
            shift: [0.0, 0.0],
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    pub fn apply(&self, x: f64, mu: f64, nu: f64) -> (f64, f64, f64) {
        let m = &self.matrix;
        (
            x + self.shift[0] * mu + self.shift[1] * nu,
            m[0][0] * mu + m[0][1] * nu,
            m[1][0] * mu + m[1][1] * nu,
        )
    }

    /// The map `v ↦ self(inner(v))`.
    pub fn after(&self, inner: &FrameMap) -> FrameMap {
        let a = &self.matrix;
        let b = &inner.matrix;
        let mut matrix = [[0.0; 2]; 2];
        for (r, row) in matrix.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
        }
        // X + s_inner·v + s_self·(B v)
        let shift = [
            inner.shift[0] + self.shift[0] * b[0][0] + self.shift[1] * b[1][0],
            inner.shift[1] + self.shift[0] * b[0][1] + self.shift[1] * b[1][1],
        ];
        FrameMap { matrix, shift }
    }
}

/// Discrepancy between two functions sampled on the same lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub linf: f64,
    pub l2: f64,
}

/// Nonnegative marginal distribution on an `X × θ` lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Tomogram {
    x_grid: UniformGrid,
    theta: ThetaGrid,
    /// θ-major: `values[j * nx + i] = w(X_i, θ_j)`.
    values: Vec<f64>,
    map: FrameMap,
    /// Quadrature weights of the `X` grid.
    x_weights: Vec<f64>,
}

impl Tomogram {
    pub fn from_samples(x_grid: UniformGrid, theta: ThetaGrid, values: Vec<f64>) -> Result<Self> {
        if !x_grid.is_symmetric() {
            return Err(Error::InvalidInput(
                "tomogram X grid must be symmetric about zero".into(),
            ));
        }
        if values.len() != x_grid.len() * theta.len() {
            return Err(Error::InvalidInput(format!(
                "{} samples for a {}x{} lattice",
                values.len(),
                theta.len(),
                x_grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("tomogram sample {k}")));
        }
        Ok(Self {
            x_grid,
            theta,
            values,
            map: FrameMap::IDENTITY,
            x_weights: x_grid.weights(),
        })
    }

    pub fn x_grid(&self) -> &UniformGrid {
        &self.x_grid
    }

    pub fn theta_grid(&self) -> &ThetaGrid {
        &self.theta
    }

    pub fn frame_map(&self) -> &FrameMap {
        &self.map
    }

    /// Same lattice samples, queried through `map` first:
    /// `w'(X, μ, ν) = w(map(X, μ, ν))`.
    pub fn pulled_back(&self, map: &FrameMap) -> Tomogram {
        Tomogram {
            map: self.map.after(map),
            ..self.clone()
        }
    }

    /// Raw stored samples (before any frame map).
    pub fn stored_values(&self) -> &[f64] {
        &self.values
    }

    /// `w(X_i, cos θ_j, sin θ_j)` including the frame map.
    pub fn value_at(&self, i: usize, j: usize) -> f64 {
        if self.map.is_identity() {
            return self.values[j * self.x_grid.len() + i];
        }
        let (s, c) = self.theta.point(j).sin_cos();
        self.evaluate(self.x_grid.point(i), c, s).unwrap_or(0.0)
    }

    /// All lattice values, θ-major.
    pub fn lattice_values(&self) -> Vec<f64> {
        if self.map.is_identity() {
            return self.values.clone();
        }
        let nx = self.x_grid.len();
        (0..self.theta.len())
            .into_par_iter()
            .flat_map_iter(|j| (0..nx).map(move |i| (i, j)))
            .map(|(i, j)| self.value_at(i, j))
            .collect()
    }

    /// Samples the (possibly mapped) tomogram back onto its lattice.
    pub fn materialize(&self) -> Tomogram {
        Tomogram {
            x_grid: self.x_grid,
            theta: self.theta,
            values: self.lattice_values(),
            map: FrameMap::IDENTITY,
            x_weights: self.x_weights.clone(),
        }
    }

    pub fn min_value(&self) -> f64 {
        self.lattice_values().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// `w(X, μ, ν)` for any frame with `(μ, ν) ≠ 0`, by homogeneity and
    /// four-point interpolation in `X` and in θ.
    pub fn evaluate(&self, x: f64, mu: f64, nu: f64) -> Result<f64> {
        let (x, mu, nu) = self.map.apply(x, mu, nu);
        self.evaluate_stored(x, mu, nu)
    }

    fn evaluate_stored(&self, x: f64, mu: f64, nu: f64) -> Result<f64> {
        if !(x.is_finite() && mu.is_finite() && nu.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite query ({x}, {mu}, {nu})")));
        }
        if mu == 0.0 && nu == 0.0 {
            return Err(Error::InvalidFrame { mu, nu });
        }
        let (x, frame) = canonical_frame(x, mu, nu);
        Ok(self.interpolate(x / frame.scale, frame.theta) / frame.scale)
    }

    fn slice(&self, j: usize) -> &[f64] {
        let nx = self.x_grid.len();
        &self.values[j * nx..(j + 1) * nx]
    }

    fn slice_value(&self, j: usize, y: f64) -> f64 {
        interpolate_cubic(&self.x_grid, self.slice(j), y)
    }

    /// Four-point stencil in θ as `(stored slice, reflected, weight)`.
    /// Slices beyond `[0, π)` are stored ones with `Y` reflected, by
    /// `w̃(Y, θ + π) = w̃(-Y, θ)`. A lattice angle gives a single slice.
    fn theta_stencil(&self, theta: f64) -> ([(usize, bool, f64); 4], usize) {
        let n = self.theta.len() as i64;
        let u = theta / self.theta.step();
        let j = u.floor();
        let f = u - j;
        let j = j as i64;
        let periodic = |m: i64| (m.rem_euclid(n) as usize, m.div_euclid(n).rem_euclid(2) == 1);
        let mut out = [(0, false, 0.0); 4];
        if f == 0.0 {
            let (k, r) = periodic(j);
            out[0] = (k, r, 1.0);
            return (out, 1);
        }
        for (s, w) in lagrange4(1.0 + f).into_iter().enumerate() {
            let (k, r) = periodic(j - 1 + s as i64);
            out[s] = (k, r, w);
        }
        (out, 4)
    }

    /// `w̃(Y, θ)` on the unit circle.
    fn interpolate(&self, y: f64, theta: f64) -> f64 {
        let (stencil, len) = self.theta_stencil(theta);
        stencil[..len]
            .iter()
            .map(|&(k, reflected, w)| w * self.slice_value(k, if reflected { -y } else { y }))
            .sum()
    }

    /// `∫ w(X, μ, ν) e^{ikX} dX`, integrated on nodes aligned with the
    /// stored lattice so that no interpolation in `X` is involved.
    pub fn fourier_integral(&self, mu: f64, nu: f64, k: f64) -> Result<Complex64> {
        let (x0, mu, nu) = self.map.apply(0.0, mu, nu);
        if mu == 0.0 && nu == 0.0 {
            return Err(Error::InvalidFrame { mu, nu });
        }
        // w(X + c, v') with c = x0: shifting X multiplies by e^{-ikc}.
        let shift = Complex64::from_polar(1.0, -k * x0);
        let (_, frame) = canonical_frame(0.0, mu, nu);
        let k = if frame.flipped { -k } else { k };
        Ok(shift * self.stored_fourier(frame.theta, k * frame.scale))
    }

    /// `∫ w̃(Y, θ) e^{iωY} dY`, interpolated in θ only.
    fn stored_fourier(&self, theta: f64, omega: f64) -> Complex64 {
        let (stencil, len) = self.theta_stencil(theta);
        stencil[..len]
            .iter()
            .map(|&(k, reflected, w)| self.slice_fourier(k, if reflected { -omega } else { omega }) * w)
            .sum()
    }

    fn slice_fourier(&self, j: usize, omega: f64) -> Complex64 {
        let step = Complex64::from_polar(1.0, omega * self.x_grid.step());
        let mut phase = Complex64::from_polar(1.0, omega * self.x_grid.lower());
        let mut acc = Complex64::new(0.0, 0.0);
        for (v, q) in self.slice(j).iter().zip(&self.x_weights) {
            acc += phase * (q * v);
            phase *= step;
        }
        acc
    }

    /// `χ(μ, ν) = ∫ w(X, μ, ν) e^{iX} dX`; at `μ = ν = 0` the `s → 0` limit,
    /// the integral of the `θ = 0` slice.
    pub fn characteristic(&self, mu: f64, nu: f64) -> Result<Complex64> {
        if mu == 0.0 && nu == 0.0 {
            return self.fourier_integral(1.0, 0.0, 0.0);
        }
        self.fourier_integral(mu, nu, 1.0)
    }

    /// `∫ w(X, cos θ_j, sin θ_j) dX` for every stored angle.
    pub fn slice_integrals(&self) -> Vec<f64> {
        if self.map.is_identity() {
            return (0..self.theta.len())
                .map(|j| integrate_samples(self.slice(j), self.x_grid.step()).expect("grid >= 8"))
                .collect();
        }
        self.theta
            .points()
            .iter()
            .map(|th| {
                let (s, c) = th.sin_cos();
                self.fourier_integral(c, s, 0.0).map(|z| z.re).unwrap_or(f64::NAN)
            })
            .collect()
    }

    /// Largest `|∫ w dX - 1|` over the stored angles.
    pub fn normalization_error(&self) -> f64 {
        self.slice_integrals()
            .into_iter()
            .map(|v| (v - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn compare(&self, other: &Tomogram) -> Result<Discrepancy> {
        if self.x_grid != other.x_grid || self.theta != other.theta {
            return Err(Error::InvalidInput("tomograms live on different lattices".into()));
        }
        let a = self.lattice_values();
        let b = other.lattice_values();
        let qx = self.x_grid.weights();
        let nx = qx.len();
        let dtheta = self.theta.step();
        let mut linf = 0.0f64;
        let mut sq = 0.0;
        for (k, (u, v)) in a.iter().zip(&b).enumerate() {
            let d = (u - v).abs();
            linf = linf.max(d);
            sq += qx[k % nx] * dtheta * d * d;
        }
        Ok(Discrepancy { linf, l2: sq.sqrt() })
    }
}

struct CanonicalFrame {
    scale: f64,
    theta: f64,
    flipped: bool,
}

/// Maps `(X, μ, ν)` to `(±X, s, θ)` with `θ ∈ [0, π)` using
/// `w(X, μ, ν) = w(-X, -μ, -ν)`.
fn canonical_frame(x: f64, mu: f64, nu: f64) -> (f64, CanonicalFrame) {
    let flipped = nu < 0.0 || (nu == 0.0 && mu < 0.0);
    let (x, mu, nu) = if flipped { (-x, -mu, -nu) } else { (x, mu, nu) };
    // atan2(+0, μ > 0) = 0; ν > 0 gives (0, π).
    let theta = nu.abs().atan2(mu);
    (
        x,
        CanonicalFrame {
            scale: mu.hypot(nu),
            theta,
            flipped,
        },
    )
}

/// Options of the forward transforms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardOptions {
    pub eps_theta: f64,
}

impl Default for ForwardOptions {
    fn default() -> Self {
        Self {
            eps_theta: DEFAULT_EPS_THETA,
        }
    }
}

/// `(2π)^{-1/2} q_k e^{-i p x_k}` on the position grid, reused as momentum grid.
fn fourier_matrix(grid: &UniformGrid) -> Array2<Complex64> {
    let pts = grid.points();
    let q = grid.weights();
    let norm = (2.0 * PI).sqrt().recip();
    Array2::from_shape_fn((pts.len(), pts.len()), |(p, k)| {
        Complex64::from_polar(norm * q[k], -pts[p] * pts[k])
    })
}

/// How a slice at `(μ, ν) = (cos θ, sin θ)` is computed.
enum SliceRoute {
    /// `w = |Ψ(X/μ)|²/|μ|`.
    Limit { mu: f64 },
    /// Chirp sum in the position representation with frame `(μ, ν)`.
    Position { mu: f64, nu: f64 },
    /// Chirp sum in the momentum representation, where the frame reads
    /// `(ν, -μ)` and `|ν'| ≥ |μ'|` keeps the chirp resolvable.
    Momentum { mu: f64, nu: f64 },
}

fn slice_route(theta: f64, eps_theta: f64) -> SliceRoute {
    let (nu, mu) = theta.sin_cos();
    if nu.abs() < eps_theta {
        SliceRoute::Limit { mu }
    } else if nu.abs() >= mu.abs() {
        SliceRoute::Position { mu, nu }
    } else {
        SliceRoute::Momentum { mu: nu, nu: -mu }
    }
}

fn check_forward_grids(x_grid: &UniformGrid, options: &ForwardOptions) -> Result<()> {
    if !x_grid.is_symmetric() {
        return Err(Error::InvalidInput(
            "tomogram X grid must be symmetric about zero".into(),
        ));
    }
    if !(options.eps_theta >= 0.0 && options.eps_theta < 0.5) {
        return Err(Error::InvalidInput(format!(
            "eps_theta {} outside [0, 0.5)",
            options.eps_theta
        )));
    }
    Ok(())
}

/// `w(X, μ, ν) = (2π|ν|)^{-1} |∫ Ψ(y) exp(iμy²/(2ν) - iXy/ν) dy|²` on the
/// lattice `(X_i, cos θ_j, sin θ_j)`.
pub fn tomogram_from_wavefunction(
    psi: &WaveFunction,
    x_grid: &UniformGrid,
    theta: &ThetaGrid,
    options: ForwardOptions,
) -> Result<Tomogram> {
    check_forward_grids(x_grid, &options)?;
    let grid = *psi.grid();
    let weights = grid.weights();
    let position: Vec<Complex64> = psi.values().to_vec();
    let momentum: Vec<Complex64> = fourier_matrix(&grid)
        .dot(&ndarray::Array1::from(position.clone()))
        .to_vec();
    let xs = x_grid.points();

    let slices: Vec<Vec<f64>> = theta
        .points()
        .par_iter()
        .map(|&th| match slice_route(th, options.eps_theta) {
            SliceRoute::Limit { mu } => xs.iter().map(|&x| psi.value_at(x / mu).norm_sqr() / mu.abs()).collect(),
            SliceRoute::Position { mu, nu } => chirp_slice(&position, &grid, &weights, mu, nu, &xs),
            SliceRoute::Momentum { mu, nu } => chirp_slice(&momentum, &grid, &weights, mu, nu, &xs),
        })
        .collect();
    Tomogram::from_samples(*x_grid, *theta, slices.concat())
}

fn chirp_slice(amp: &[Complex64], grid: &UniformGrid, weights: &[f64], mu: f64, nu: f64, xs: &[f64]) -> Vec<f64> {
    let chirped: Vec<Complex64> = amp
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let y = grid.point(k);
            a * Complex64::from_polar(weights[k], mu * y * y / (2.0 * nu))
        })
        .collect();
    let norm = (2.0 * PI * nu.abs()).recip();
    let (y0, h) = (grid.lower(), grid.step());
    xs.iter()
        .map(|&x| {
            let step = Complex64::from_polar(1.0, -x * h / nu);
            let mut phase = Complex64::from_polar(1.0, -x * y0 / nu);
            let mut acc = Complex64::new(0.0, 0.0);
            for c in &chirped {
                acc += c * phase;
                phase *= step;
            }
            norm * acc.norm_sqr()
        })
        .collect()
}

/// Bilinear extension of the forward transform to density matrices:
/// `w = (2π|ν|)^{-1} ∬ ρ(y, z) exp(iμ(y² - z²)/(2ν) - iX(y - z)/ν) dy dz`.
pub fn tomogram_from_density(
    rho: &DensityMatrix,
    x_grid: &UniformGrid,
    theta: &ThetaGrid,
    options: ForwardOptions,
) -> Result<Tomogram> {
    check_forward_grids(x_grid, &options)?;
    let grid = *rho.grid();
    let weights = grid.weights();
    let position = rho.values();
    let f = fourier_matrix(&grid);
    let momentum = f.dot(position).dot(&f.t().mapv(|v| v.conj()));
    let diagonal: Vec<Complex64> = position.diag().to_vec();
    let xs = x_grid.points();

    let slices: Vec<Vec<f64>> = theta
        .points()
        .par_iter()
        .map(|&th| match slice_route(th, options.eps_theta) {
            SliceRoute::Limit { mu } => xs
                .iter()
                .map(|&x| interpolate_cubic(&grid, &diagonal, x / mu).re / mu.abs())
                .collect(),
            SliceRoute::Position { mu, nu } => chirp_slice_mixed(position, &grid, &weights, mu, nu, &xs),
            SliceRoute::Momentum { mu, nu } => chirp_slice_mixed(&momentum, &grid, &weights, mu, nu, &xs),
        })
        .collect();
    Tomogram::from_samples(*x_grid, *theta, slices.concat())
}

/// Sums the chirp-weighted matrix along its diagonals `y - z = m h`, then
/// Fourier-sums over `m`.
fn chirp_slice_mixed(
    rho: &Array2<Complex64>,
    grid: &UniformGrid,
    weights: &[f64],
    mu: f64,
    nu: f64,
    xs: &[f64],
) -> Vec<f64> {
    let n = grid.len();
    let c: Vec<Complex64> = (0..n)
        .map(|k| {
            let y = grid.point(k);
            Complex64::from_polar(weights[k], mu * y * y / (2.0 * nu))
        })
        .collect();
    // diag[m + n - 1] = Σ_{k - l = m} c_k ρ_kl c_l*
    let mut diag = vec![Complex64::new(0.0, 0.0); 2 * n - 1];
    for k in 0..n {
        for l in 0..n {
            diag[k + n - 1 - l] += c[k] * rho[[k, l]] * c[l].conj();
        }
    }
    let norm = (2.0 * PI * nu.abs()).recip();
    let h = grid.step();
    let m0 = -((n - 1) as f64);
    xs.iter()
        .map(|&x| {
            let step = Complex64::from_polar(1.0, -x * h / nu);
            let mut phase = Complex64::from_polar(1.0, -x * m0 * h / nu);
            let mut acc = Complex64::new(0.0, 0.0);
            for d in &diag {
                acc += d * phase;
                phase *= step;
            }
            norm * acc.re
        })
        .collect()
}

/// Options of the inverse transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionOptions {
    /// `μ` is integrated over `[-mu_max, mu_max]`.
    pub mu_max: f64,
    pub mu_count: usize,
    /// Gaussian damping `exp(-ε_μ μ²)`; `None` applies damping only when the
    /// truncated integrand is still significant at `|μ| = mu_max`.
    pub mu_damping: Option<f64>,
    /// Boundary-to-peak ratio above which the truncation is flagged.
    pub boundary_threshold: f64,
}

impl Default for ReconstructionOptions {
    fn default() -> Self {
        Self {
            mu_max: 40.0,
            mu_count: 801,
            mu_damping: None,
            boundary_threshold: 1e-5,
        }
    }
}

/// Output of [`density_from_tomogram`].
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub density: DensityMatrix,
    /// `max |ρ - ρ†|` before hermitization.
    pub hermiticity_defect: f64,
    /// Largest `|χ|` at `|μ| = mu_max` relative to the peak.
    pub boundary_ratio: f64,
    pub accuracy_warning: bool,
    pub damping_applied: f64,
}

/// `ρ(x, x') = (2π)^{-1} ∬ w(X, μ, x - x') exp(i(X - μ(x + x')/2)) dμ dX`.
///
/// The `X` integral is the characteristic function `χ(μ, x - x')` of the
/// tomogram; the `μ` integral runs on a uniform grid over `[-M, M]`.
pub fn density_from_tomogram(
    w: &Tomogram,
    target: &UniformGrid,
    options: ReconstructionOptions,
) -> Result<Reconstruction> {
    if !(options.mu_max > 0.0) {
        return Err(Error::InvalidInput(format!(
            "mu_max must be positive, got {}",
            options.mu_max
        )));
    }
    let mu_grid = UniformGrid::symmetric(options.mu_max, options.mu_count)?;
    let mus = mu_grid.points();
    let q_mu = mu_grid.weights();
    let n = target.len();
    let nm = mus.len();
    let h = target.step();

    // chi[m][l] = χ(μ_l, (m - n + 1) h)
    let chi: Vec<Vec<Complex64>> = (0..2 * n - 1)
        .into_par_iter()
        .map(|m| {
            let d = (m as f64 - (n - 1) as f64) * h;
            mus.iter()
                .map(|&mu| w.characteristic(mu, d))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let peak = chi.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    let edge = chi
        .iter()
        .map(|row| row[0].norm().max(row[nm - 1].norm()))
        .fold(0.0, f64::max);
    let boundary_ratio = if peak > 0.0 { edge / peak } else { 0.0 };
    let accuracy_warning = boundary_ratio > options.boundary_threshold;
    let damping = match options.mu_damping {
        Some(eps) => eps,
        // Bring the edge down to the threshold.
        None if accuracy_warning => {
            (boundary_ratio / options.boundary_threshold).ln() / (options.mu_max * options.mu_max)
        }
        None => 0.0,
    };

    let scale = (2.0 * PI).recip();
    let weighted: Vec<Vec<Complex64>> = chi
        .iter()
        .map(|row| {
            row.iter()
                .zip(&q_mu)
                .zip(&mus)
                .map(|((c, q), mu)| c * (scale * q * (-damping * mu * mu).exp()))
                .collect()
        })
        .collect();
    // phases[i][l] = e^{-iμ_l x_i / 2}
    let phases: Vec<Vec<Complex64>> = (0..n)
        .map(|i| {
            let x = target.point(i);
            mus.iter()
                .map(|&mu| Complex64::from_polar(1.0, -0.5 * mu * x))
                .collect()
        })
        .collect();

    let rows: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    let row = &weighted[i + n - 1 - j];
                    let (ei, ej) = (&phases[i], &phases[j]);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for l in 0..nm {
                        acc += row[l] * ei[l] * ej[l];
                    }
                    acc
                })
                .collect()
        })
        .collect();
    let values = Array2::from_shape_vec((n, n), rows.concat()).expect("square matrix");
    let raw = DensityMatrix::new(*target, values)?;
    let hermiticity_defect = raw.hermiticity_defect();
    Ok(Reconstruction {
        density: raw.hermitized(),
        hermiticity_defect,
        boundary_ratio,
        accuracy_warning,
        damping_applied: damping,
    })
}

/// `w(X, cos φ, sin φ)` on the tomogram's `X` grid. Angles in `[π, 2π)` use
/// `w(X, φ) = w(-X, φ - π)`.
pub fn optical_slice(w: &Tomogram, phi: f64) -> Vec<f64> {
    let phi = phi.rem_euclid(2.0 * PI);
    let (sign, phi) = if phi >= PI { (-1.0, phi - PI) } else { (1.0, phi) };
    let (s, c) = phi.sin_cos();
    w.x_grid
        .points()
        .iter()
        .map(|&x| w.evaluate(sign * x, c, s).expect("unit frame"))
        .collect()
}

/// Optical tomogram `w(X, φ)` sampled on an `X` grid and a list of angles.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticalTomogram {
    pub x_grid: UniformGrid,
    pub phis: Vec<f64>,
    /// φ-major.
    pub values: Vec<f64>,
}

impl OpticalTomogram {
    pub fn from_tomogram(w: &Tomogram, phis: &[f64]) -> Self {
        let values = phis.par_iter().flat_map_iter(|&phi| optical_slice(w, phi)).collect();
        Self {
            x_grid: *w.x_grid(),
            phis: phis.to_vec(),
            values,
        }
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let nx = self.x_grid.len();
        &self.values[k * nx..(k + 1) * nx]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{default_position_grid, density_from_wavefunction, make_state, StateSpec};

    fn ground_closed_form(x: f64, mu: f64, nu: f64) -> f64 {
        let s2 = mu * mu + nu * nu;
        (PI * s2).powf(-0.5) * (-x * x / s2).exp()
    }

    fn tomogram(spec: &StateSpec) -> Tomogram {
        let psi = make_state(spec, &default_position_grid()).unwrap();
        let (xg, tg) = default_tomogram_grids();
        tomogram_from_wavefunction(&psi, &xg, &tg, ForwardOptions::default()).unwrap()
    }

    #[test]
    fn theta_grid_is_half_open() {
        let g = ThetaGrid::new(8).unwrap();
        assert_eq!(g.point(0), 0.0);
        assert!((g.point(7) - 7.0 * PI / 8.0).abs() < 1e-15);
        assert_eq!(g.as_uniform().upper(), PI - PI / 8.0);
        assert!(ThetaGrid::new(4).is_err());
    }

    #[test]
    fn frame_maps_compose() {
        let a = FrameMap {
            matrix: [[1.0, 2.0], [0.5, -1.0]],
            shift: [0.3, -0.2],
        };
        let b = FrameMap {
            matrix: [[0.0, -1.0], [1.0, 0.0]],
            shift: [1.0, 2.0],
        };
        let ab = a.after(&b);
        let (x, mu, nu) = (0.7, 0.4, -1.3);
        let (x1, m1, n1) = b.apply(x, mu, nu);
        let direct = a.apply(x1, m1, n1);
        let composed = ab.apply(x, mu, nu);
        assert!((direct.0 - composed.0).abs() < 1e-15);
        assert!((direct.1 - composed.1).abs() < 1e-15);
        assert!((direct.2 - composed.2).abs() < 1e-15);
        assert!(FrameMap::IDENTITY.after(&FrameMap::IDENTITY).is_identity());
    }

    #[test]
    fn ground_state_matches_closed_form() {
        let w = tomogram(&StateSpec::ground());
        let xs = w.x_grid().points();
        for (j, th) in w.theta_grid().points().iter().enumerate() {
            for (i, &x) in xs.iter().enumerate() {
                let expected = ground_closed_form(x, th.cos(), th.sin());
                assert!((w.value_at(i, j) - expected).abs() < 1e-6, "θ = {th}, X = {x}");
            }
        }
    }

    #[test]
    fn slices_are_normalized_and_nonnegative() {
        for spec in [
            StateSpec::Oscillator { n: 1 },
            StateSpec::gaussian(1.0, 0.5, 1.0),
            "ho:0+ho:2".parse().unwrap(),
        ] {
            let w = tomogram(&spec);
            assert!(w.normalization_error() < 1e-6, "{spec}");
            assert!(w.min_value() >= -NEGATIVE_TOLERANCE, "{spec}");
        }
    }

    #[test]
    fn quarter_turn_is_the_momentum_distribution() {
        let w = tomogram(&StateSpec::ground());
        let j = w.theta_grid().len() / 2;
        for (i, x) in w.x_grid().points().iter().enumerate() {
            let expected = PI.powf(-0.5) * (-x * x).exp();
            assert!((w.value_at(i, j) - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn homogeneity_is_exact_for_powers_of_two() {
        let w = tomogram(&StateSpec::gaussian(1.0, 0.5, 1.0));
        for &(x, mu, nu) in &[(0.3, 0.8, 0.5), (-1.1, -0.2, 1.7), (2.0, 1.0, -0.4)] {
            let base = w.evaluate(x, mu, nu).unwrap();
            assert_eq!(w.evaluate(2.0 * x, 2.0 * mu, 2.0 * nu).unwrap(), base / 2.0);
            assert_eq!(w.evaluate(0.5 * x, 0.5 * mu, 0.5 * nu).unwrap(), base * 2.0);
            assert_eq!(w.evaluate(x, -mu, -nu).unwrap(), w.evaluate(-x, mu, nu).unwrap());
        }
    }

    #[test]
    fn evaluate_off_the_unit_circle() {
        let w = tomogram(&StateSpec::ground());
        let v = w.evaluate(0.5, 3.0, 4.0).unwrap();
        assert!((v - (PI * 25.0).powf(-0.5) * (-0.25f64 / 25.0).exp()).abs() < 1e-5);
        assert!(matches!(w.evaluate(0.5, 0.0, 0.0), Err(Error::InvalidFrame { .. })));
    }

    #[test]
    fn mixed_route_matches_pure_route() {
        let g = default_position_grid();
        let (xg, tg) = default_tomogram_grids();
        let psi = make_state(&StateSpec::ground(), &g).unwrap();
        let pure = tomogram_from_wavefunction(&psi, &xg, &tg, ForwardOptions::default()).unwrap();
        let mixed =
            tomogram_from_density(&density_from_wavefunction(&psi), &xg, &tg, ForwardOptions::default()).unwrap();
        assert!(pure.compare(&mixed).unwrap().linf < 1e-8);
    }

    #[test]
    fn mixture_tomogram() {
        let g = default_position_grid();
        let (xg, tg) = default_tomogram_grids();
        let psi0 = make_state(&StateSpec::ground(), &g).unwrap();
        let psi1 = make_state(&StateSpec::Oscillator { n: 1 }, &g).unwrap();
        let r0 = density_from_wavefunction(&psi0);
        let r1 = density_from_wavefunction(&psi1);
        let mix = DensityMatrix::mixture(&[(0.5, &r0), (0.5, &r1)]).unwrap();
        let w = tomogram_from_density(&mix, &xg, &tg, ForwardOptions::default()).unwrap();
        assert!(w.normalization_error() < 1e-6);
        for (i, x) in xg.points().iter().enumerate() {
            let expected = 0.5 * (psi0.value_at(*x).norm_sqr() + psi1.value_at(*x).norm_sqr());
            assert!((w.value_at(i, 0) - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_asymmetric_x_grid() {
        let psi = make_state(&StateSpec::ground(), &default_position_grid()).unwrap();
        let xg = UniformGrid::new(-10.0, 12.0, 64).unwrap();
        let tg = ThetaGrid::new(16).unwrap();
        assert!(tomogram_from_wavefunction(&psi, &xg, &tg, ForwardOptions::default()).is_err());
    }

    #[test]
    fn characteristic_of_ground_state() {
        let w = tomogram(&StateSpec::ground());
        for &(mu, nu) in &[(0.0, 0.0), (1.0, 0.0), (0.3, -2.0), (-1.5, 0.5)] {
            let expected = (-(mu * mu + nu * nu) / 4.0f64).exp();
            let chi = w.characteristic(mu, nu).unwrap();
            assert!(
                (chi - Complex64::new(expected, 0.0)).norm() < 1e-6,
                "({mu}, {nu}): {chi}"
            );
        }
    }

    #[test]
    fn reconstruction_of_ground_state() {
        let w = tomogram(&StateSpec::ground());
        let target = UniformGrid::symmetric(12.0, 129).unwrap();
        let rec = density_from_tomogram(&w, &target, ReconstructionOptions::default()).unwrap();
        let mid = 64;
        assert_eq!(target.point(mid), 0.0);
        assert!((rec.density.values()[[mid, mid]].re - PI.powf(-0.5)).abs() < 1e-3);
        assert!((rec.density.trace().re - 1.0).abs() < 1e-3);
        assert!(!rec.accuracy_warning);
    }

    #[test]
    fn optical_slices() {
        let spec = StateSpec::gaussian(1.0, 0.5, 1.0);
        let w = tomogram(&spec);
        let xs = w.x_grid().points();
        let pos = optical_slice(&w, 0.0);
        for (x, v) in xs.iter().zip(&pos) {
            assert!((v - spec.amplitude(*x).norm_sqr()).abs() < 1e-6);
        }
        let mom = optical_slice(&w, PI / 2.0);
        for (p, v) in xs.iter().zip(&mom) {
            let expected = PI.powf(-0.5) * (-(p - 0.5) * (p - 0.5)).exp();
            assert!((v - expected).abs() < 1e-6);
        }
        let a = optical_slice(&w, 0.4);
        let b = optical_slice(&w, 0.4 + PI);
        let n = a.len();
        for i in 0..n {
            assert!((a[i] - b[n - 1 - i]).abs() < 1e-12);
        }
    }
}
