//! Grids, quadrature and the damped evaluation of oscillatory double integrals.
//!
//! All grids include both endpoints: a grid with `count` points on
//! `[lower, upper]` has step `(upper - lower) / (count - 1)`.

use std::ops::{Add, Mul};

use num_complex::Complex64;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest number of points a grid may carry.
pub const MIN_GRID_POINTS: usize = 8;

/// Equally spaced points on `[lower, upper]`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid")]
pub struct UniformGrid {
    lower: f64,
    upper: f64,
    count: usize,
}

#[derive(Deserialize)]
struct RawGrid {
    lower: f64,
    upper: f64,
    count: usize,
}

impl TryFrom<RawGrid> for UniformGrid {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        UniformGrid::new(raw.lower, raw.upper, raw.count)
    }
}

impl UniformGrid {
    pub fn new(lower: f64, upper: f64, count: usize) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "grid bounds must be finite, got [{lower}, {upper}]"
            )));
        }
        if upper <= lower {
            return Err(Error::InvalidInput(format!(
                "grid upper bound {upper} must exceed lower bound {lower}"
            )));
        }
        if count < MIN_GRID_POINTS {
            return Err(Error::InvalidInput(format!(
                "grid needs at least {MIN_GRID_POINTS} points, got {count}"
            )));
        }
        Ok(Self { lower, upper, count })
    }

    /// Grid on `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, count: usize) -> Result<Self> {
        Self::new(-half_width, half_width, count)
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        (self.upper - self.lower) / (self.count - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.count {
            self.upper
        } else {
            self.lower + i as f64 * self.step()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.point(i)).collect()
    }

    /// True when the grid is mirror-symmetric about zero, so that
    /// `point(count - 1 - i) == -point(i)` up to rounding.
    pub fn is_symmetric(&self) -> bool {
        (self.lower + self.upper).abs() <= 1e-12 * self.upper.abs().max(1.0)
    }

    /// Quadrature weights (step included) matching [`integrate_samples`].
    pub fn weights(&self) -> Vec<f64> {
        let h = self.step();
        unit_weights(self.count).into_iter().map(|w| w * h).collect()
    }

    /// Fractional index of `x`: `Some((i, f))` with `x = point(i) + f * step`,
    /// `0 <= f < 1`, or `None` when `x` lies outside the grid. The upper
    /// endpoint maps to `(count - 2, 1.0)`.
    pub fn locate(&self, x: f64) -> Option<(usize, f64)> {
        let u = (x - self.lower) / self.step();
        let last = (self.count - 1) as f64;
        if !(u >= 0.0 && u <= last) {
            // Accept points within rounding distance of the ends.
            if u < 0.0 && u > -1e-9 {
                return Some((0, 0.0));
            }
            if u > last && u < last + 1e-9 {
                return Some((self.count - 2, 1.0));
            }
            return None;
        }
        let i = (u.floor() as usize).min(self.count - 2);
        Some((i, u - i as f64))
    }
}

/// Unit-step weights of the fourth-order Gregory rule (trapezoid with end
/// corrections); plain trapezoid below six samples.
fn unit_weights(n: usize) -> Vec<f64> {
    let mut w = vec![1.0; n];
    if n >= 6 {
        const ENDS: [f64; 3] = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
        for (k, &e) in ENDS.iter().enumerate() {
            w[k] = e;
            w[n - 1 - k] = e;
        }
    } else {
        w[0] = 0.5;
        w[n - 1] = 0.5;
    }
    w
}

/// Integrates equally spaced samples with spacing `step`.
///
/// Uses the fourth-order Gregory rule for six or more samples and the
/// trapezoid rule otherwise.
pub fn integrate_samples<T>(values: &[T], step: f64) -> Result<T>
where
    T: Copy + Zero + Add<Output = T> + Mul<f64, Output = T>,
{
    if values.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 samples to integrate, got {}",
            values.len()
        )));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidInput(format!("step must be positive, got {step}")));
    }
    let weights = unit_weights(values.len());
    let sum = values.iter().zip(&weights).fold(T::zero(), |acc, (&v, &w)| acc + v * w);
    Ok(sum * step)
}

/// Neumaier-compensated complex accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    re: (f64, f64),
    im: (f64, f64),
}

fn neumaier(acc: &mut (f64, f64), x: f64) {
    let (sum, comp) = *acc;
    let t = sum + x;
    let c = if sum.abs() >= x.abs() {
        (sum - t) + x
    } else {
        (x - t) + sum
    };
    *acc = (t, comp + c);
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, z: Complex64) {
        neumaier(&mut self.re, z.re);
        neumaier(&mut self.im, z.im);
    }

    pub fn total(&self) -> Complex64 {
        Complex64::new(self.re.0 + self.re.1, self.im.0 + self.im.1)
    }
}

impl FromIterator<Complex64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = Complex64>>(iter: I) -> Self {
        let mut s = Self::new();
        for z in iter {
            s.add(z);
        }
        s
    }
}

/// Result of a damped double integral together with the magnitude of the
/// damped integrand at the domain boundary, relative to its peak.
#[derive(Debug, Clone, Copy)]
pub struct DampedIntegral {
    pub value: Complex64,
    pub boundary_ratio: f64,
}

/// `∬ f(z, a) exp(-ε (z² + a²)) dz da` by tensor-product quadrature.
pub fn damped_integral_2d<F>(f: F, z: &UniformGrid, a: &UniformGrid, eps: f64) -> Result<Complex64>
where
    F: Fn(f64, f64) -> Complex64 + Sync,
{
    damped_integral_2d_report(f, z, a, eps).map(|r| r.value)
}

/// [`damped_integral_2d`] plus the boundary-to-peak magnitude ratio.
pub fn damped_integral_2d_report<F>(f: F, z: &UniformGrid, a: &UniformGrid, eps: f64) -> Result<DampedIntegral>
where
    F: Fn(f64, f64) -> Complex64 + Sync,
{
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidInput(format!("damping must be positive, got {eps}")));
    }
    let zw = z.weights();
    let aw = a.weights();
    let a_pts = a.points();
    let a_damp: Vec<f64> = a_pts.iter().map(|&x| (-eps * x * x).exp()).collect();
    let nz = z.len();
    let na = a.len();

    struct Row {
        sum: Complex64,
        peak: f64,
        edge: f64,
    }

    let rows: Vec<Result<Row>> = (0..nz)
        .into_par_iter()
        .map(|i| {
            let zi = z.point(i);
            let z_damp = (-eps * zi * zi).exp();
            let on_z_edge = i == 0 || i + 1 == nz;
            let mut acc = CompensatedSum::new();
            let mut peak = 0.0f64;
            let mut edge = 0.0f64;
            for j in 0..na {
                let v = f(zi, a_pts[j]);
                if !(v.re.is_finite() && v.im.is_finite()) {
                    return Err(Error::NonFinite(format!(
                        "integrand at grid point (z[{i}] = {zi}, a[{j}] = {})",
                        a_pts[j]
                    )));
                }
                let damped = v * (z_damp * a_damp[j]);
                let m = damped.norm();
                peak = peak.max(m);
                if on_z_edge || j == 0 || j + 1 == na {
                    edge = edge.max(m);
                }
                acc.add(damped * aw[j]);
            }
            Ok(Row {
                sum: acc.total() * zw[i],
                peak,
                edge,
            })
        })
        .collect();

    let mut total = CompensatedSum::new();
    let mut peak = 0.0f64;
    let mut edge = 0.0f64;
    for row in rows {
        let row = row?;
        total.add(row.sum);
        peak = peak.max(row.peak);
        edge = edge.max(row.edge);
    }
    let boundary_ratio = if peak > 0.0 { edge / peak } else { 0.0 };
    Ok(DampedIntegral {
        value: total.total(),
        boundary_ratio,
    })
}

/// Four-point Lagrange interpolation; zero outside the grid.
pub fn interpolate_cubic<T>(grid: &UniformGrid, values: &[T], x: f64) -> T
where
    T: Copy + Zero + Add<Output = T> + Mul<f64, Output = T>,
{
    debug_assert_eq!(grid.len(), values.len());
    let Some((i, f)) = grid.locate(x) else {
        return T::zero();
    };
    if f == 0.0 {
        return values[i];
    }
    let n = grid.len();
    // Stencil i-1..=i+2, shifted inward at the ends.
    let start = i.saturating_sub(1).min(n - 4);
    let u = (i - start) as f64 + f;
    let mut out = T::zero();
    for (k, l) in lagrange4(u).into_iter().enumerate() {
        out = out + values[start + k] * l;
    }
    out
}

/// Lagrange weights of the nodes `0, 1, 2, 3` at position `u`.
pub fn lagrange4(u: f64) -> [f64; 4] {
    let mut weights = [1.0; 4];
    for (k, w) in weights.iter_mut().enumerate() {
        for m in 0..4 {
            if m != k {
                *w *= (u - m as f64) / (k as f64 - m as f64);
            }
        }
    }
    weights
}
