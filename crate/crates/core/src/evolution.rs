//! First-order evolution equation for tomograms with potentials of degree at
//! most two.
//!
//! The quantum evolution equation for `w(X, μ, ν, t)` reads
//!
//! ```text
//! ∂_t w - μ ∂_ν w - i [V(A - iB) - V(A + iB)] w = 0,
//! A = -∂_X⁻¹ ∂_μ,  B = (ν/2) ∂_X.
//! ```
//!
//! `A` and `B` commute, so for a polynomial `V` the bracket is a polynomial
//! in two commuting symbols. Only the monomials `B` and `AB` survive when
//! `deg V ≤ 2`, giving a transport equation with coefficients linear in
//! `(μ, ν)`. The equation is solved exactly along its characteristics.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greens::Potential;
use crate::tomography::{FrameMap, OpticalTomogram, Tomogram};

/// `V(q) = Σ_n c_n qⁿ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialPolynomial {
    pub coefficients: Vec<f64>,
}

impl PotentialPolynomial {
    pub fn new(coefficients: Vec<f64>) -> Self {
        Self { coefficients }
    }

    /// Index of the highest nonzero coefficient (0 for a constant).
    pub fn degree(&self) -> usize {
        self.coefficients.iter().rposition(|c| *c != 0.0).unwrap_or(0)
    }
}

impl From<Potential> for PotentialPolynomial {
    fn from(u: Potential) -> Self {
        Self::new(vec![0.0, u.alpha, u.beta])
    }
}

/// Polynomial in the commuting symbols `A`, `B`: `(p, q) ↦` coefficient of
/// `A^p B^q`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SymbolPolynomial {
    terms: BTreeMap<(u32, u32), Complex64>,
}

impl SymbolPolynomial {
    pub fn coefficient(&self, p: u32, q: u32) -> Complex64 {
        self.terms.get(&(p, q)).copied().unwrap_or_default()
    }

    /// Nonzero terms in `(p, q)` order.
    pub fn terms(&self) -> impl Iterator<Item = ((u32, u32), Complex64)> + '_ {
        self.terms.iter().map(|(k, v)| (*k, *v))
    }

    fn add(&mut self, p: u32, q: u32, c: Complex64) {
        let entry = self.terms.entry((p, q)).or_default();
        *entry += c;
        if *entry == Complex64::new(0.0, 0.0) {
            self.terms.remove(&(p, q));
        }
    }

    fn scaled(&self, s: Complex64) -> Self {
        let mut out = Self::default();
        for (&(p, q), &c) in &self.terms {
            out.add(p, q, c * s);
        }
        out
    }

    fn minus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&(p, q), &c) in &other.terms {
            out.add(p, q, -c);
        }
        out
    }

    /// `V(A + cB)`.
    fn substitute(v: &PotentialPolynomial, c: Complex64) -> Self {
        let mut out = Self::default();
        for (n, &vn) in v.coefficients.iter().enumerate() {
            if vn == 0.0 {
                continue;
            }
            // (A + cB)^n = Σ_j C(n, j) A^{n-j} c^j B^j
            let mut binom = 1.0;
            for j in 0..=n {
                out.add((n - j) as u32, j as u32, c.powu(j as u32) * (vn * binom));
                binom = binom * (n - j) as f64 / (j + 1) as f64;
            }
        }
        out
    }
}

/// `-i [V(A - iB) - V(A + iB)]`.
pub fn potential_symbol(v: &PotentialPolynomial) -> SymbolPolynomial {
    let i = Complex64::i();
    SymbolPolynomial::substitute(v, -i)
        .minus(&SymbolPolynomial::substitute(v, i))
        .scaled(-i)
}

/// `a μ + b ν`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearForm {
    pub mu: f64,
    pub nu: f64,
}

impl LinearForm {
    pub fn eval(&self, mu: f64, nu: f64) -> f64 {
        self.mu * mu + self.nu * nu
    }
}

impl fmt::Display for LinearForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}*mu + {}*nu", self.mu, self.nu)
    }
}

/// `∂_t w + c_X ∂_X w + c_μ ∂_μ w + c_ν ∂_ν w = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportPDE {
    pub c_x: LinearForm,
    pub c_mu: LinearForm,
    pub c_nu: LinearForm,
}

impl TransportPDE {
    /// Matrix `G` of the characteristic system `d(X, μ, ν)/ds = G (X, μ, ν)`.
    pub fn generator(&self) -> [[f64; 3]; 3] {
        [
            [0.0, self.c_x.mu, self.c_x.nu],
            [0.0, self.c_mu.mu, self.c_mu.nu],
            [0.0, self.c_nu.mu, self.c_nu.nu],
        ]
    }

    /// The generator in the coordinates `(X, z, z̄)`, `z = μ + iν`.
    pub fn bargmann_generator(&self) -> Matrix3 {
        let g = to_complex(&self.generator());
        matmul(&matmul(&BARGMANN, &g), &bargmann_inverse())
    }
}

/// Reduces the evolution equation for `V` to a transport equation.
pub fn reduce_evolution_equation(v: &PotentialPolynomial) -> Result<TransportPDE> {
    if v.coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput("non-finite potential coefficient".into()));
    }
    if v.degree() > 2 {
        return Err(Error::UnsupportedPotential(format!(
            "degree {} potential has no first-order evolution equation",
            v.degree()
        )));
    }
    let mut pde = TransportPDE {
        c_x: LinearForm::default(),
        c_mu: LinearForm::default(),
        // -μ ∂_ν
        c_nu: LinearForm { mu: -1.0, nu: 0.0 },
    };
    for ((p, q), c) in potential_symbol(v).terms() {
        if c.im != 0.0 {
            return Err(Error::UnsupportedPotential(format!(
                "complex symbol coefficient {c} of A^{p} B^{q}"
            )));
        }
        match (p, q) {
            // B = (ν/2) ∂_X
            (0, 1) => pde.c_x.nu += c.re / 2.0,
            // AB = -(ν/2) ∂_μ
            (1, 1) => pde.c_mu.nu -= c.re / 2.0,
            _ => {
                return Err(Error::UnsupportedPotential(format!(
                    "symbol term A^{p} B^{q} is not first order"
                )))
            }
        }
    }
    Ok(pde)
}

pub type Matrix3 = [[Complex64; 3]; 3];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// `(X, μ, ν) ↦ (X, z, z̄)`.
const BARGMANN: Matrix3 = [
    [ONE, ZERO, ZERO],
    [ZERO, ONE, I],
    [ZERO, ONE, Complex64::new(0.0, -1.0)],
];

fn bargmann_inverse() -> Matrix3 {
    let h = Complex64::new(0.5, 0.0);
    let hi = Complex64::new(0.0, 0.5);
    [[ONE, ZERO, ZERO], [ZERO, h, h], [ZERO, -hi, hi]]
}

fn to_complex(m: &[[f64; 3]; 3]) -> Matrix3 {
    m.map(|row| row.map(|v| Complex64::new(v, 0.0)))
}

fn matmul(a: &Matrix3, b: &Matrix3) -> Matrix3 {
    let mut out = [[ZERO; 3]; 3];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[r][k] * b[k][c]).sum();
        }
    }
    out
}

fn norm_inf(m: &Matrix3) -> f64 {
    m.iter()
        .map(|row| row.iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a Taylor series.
pub fn expm(m: &Matrix3) -> Matrix3 {
    let norm = norm_inf(m);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scale = 0.5f64.powi(squarings as i32);
    let a = m.map(|row| row.map(|v| v * scale));

    let mut result = [[ZERO; 3]; 3];
    let mut term = [[ZERO; 3]; 3];
    for k in 0..3 {
        result[k][k] = ONE;
        term[k][k] = ONE;
    }
    for n in 1..=30 {
        term = matmul(&term, &a).map(|row| row.map(|v| v / n as f64));
        for r in 0..3 {
            for c in 0..3 {
                result[r][c] += term[r][c];
            }
        }
        if norm_inf(&term) < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = matmul(&result, &result);
    }
    result
}

fn frame_map_from(e: &[[f64; 3]; 3]) -> FrameMap {
    FrameMap {
        matrix: [[e[1][1], e[1][2]], [e[2][1], e[2][2]]],
        shift: [e[0][1], e[0][2]],
    }
}

/// Foot of the characteristic through each point after time `t`:
/// `w(·, t) = w₀ ∘ exp(-tG)`.
pub fn characteristic_map(pde: &TransportPDE, t: f64) -> Result<FrameMap> {
    if !t.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite time {t}")));
    }
    let g = to_complex(&pde.generator()).map(|row| row.map(|v| v * -t));
    let e = expm(&g).map(|row| row.map(|v| v.re));
    Ok(frame_map_from(&e))
}

/// Solves the transport equation with initial data `w₀` by characteristics.
pub fn solve_characteristics(pde: &TransportPDE, w0: &Tomogram, t: f64) -> Result<Tomogram> {
    let map = characteristic_map(pde, t)?;
    check_invertible(&map)?;
    Ok(w0.pulled_back(&map))
}

fn check_invertible(map: &FrameMap) -> Result<()> {
    let m = &map.matrix;
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if !(det.is_finite() && det != 0.0) {
        return Err(Error::InvalidFrame { mu: det, nu: 0.0 });
    }
    Ok(())
}

/// Conjugate pair `(z, z̄)` with `z = μ + iν`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BargmannPoint {
    pub z: Complex64,
    pub zbar: Complex64,
}

/// Largest `|z̄ - conj(z)|` accepted by [`BargmannPoint::to_frame`].
pub const CONJUGATE_TOLERANCE: f64 = 1e-12;

impl BargmannPoint {
    pub fn from_frame(mu: f64, nu: f64) -> Self {
        Self {
            z: Complex64::new(mu, nu),
            zbar: Complex64::new(mu, -nu),
        }
    }

    /// `μ = (z + z̄)/2`, `ν = (z - z̄)/(2i)`.
    pub fn to_frame(&self) -> Result<(f64, f64)> {
        let defect = (self.zbar - self.z.conj()).norm();
        if !(defect <= CONJUGATE_TOLERANCE) {
            return Err(Error::InvalidInput(format!(
                "z = {} and zbar = {} are not conjugate",
                self.z, self.zbar
            )));
        }
        let mu = (self.z + self.zbar) / 2.0;
        let nu = (self.z - self.zbar) / (2.0 * I);
        Ok((mu.re, nu.re))
    }
}

/// [`characteristic_map`] computed in the coordinates `(X, z, z̄)` and mapped
/// back to `(X, μ, ν)`.
pub fn characteristic_map_bargmann(pde: &TransportPDE, t: f64) -> Result<FrameMap> {
    if !t.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite time {t}")));
    }
    let g = pde.bargmann_generator().map(|row| row.map(|v| v * -t));
    let e = matmul(&matmul(&bargmann_inverse(), &expm(&g)), &BARGMANN);
    let scale = norm_inf(&e).max(1.0);
    if e.iter().flatten().any(|v| v.im.abs() > CONJUGATE_TOLERANCE * scale) {
        return Err(Error::InvalidInput(
            "flow in (z, zbar) does not preserve conjugate pairs".into(),
        ));
    }
    Ok(frame_map_from(&e.map(|row| row.map(|v| v.re))))
}

/// [`solve_characteristics`] through the `(X, z, z̄)` coordinates.
pub fn solve_characteristics_bargmann(pde: &TransportPDE, w0: &Tomogram, t: f64) -> Result<Tomogram> {
    let map = characteristic_map_bargmann(pde, t)?;
    check_invertible(&map)?;
    Ok(w0.pulled_back(&map))
}

/// Evolves `w₀` under `V` and samples the optical tomogram `w(X, φ, t)`.
pub fn evolve_optical(w0: &Tomogram, v: &PotentialPolynomial, t: f64, phis: &[f64]) -> Result<OpticalTomogram> {
    let pde = reduce_evolution_equation(v)?;
    let wt = solve_characteristics(&pde, w0, t)?;
    Ok(OpticalTomogram::from_tomogram(&wt, phis))
}
