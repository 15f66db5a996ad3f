//! Convolution kernels on the torus and their finite-dimensional image
//! geometry.
//!
//! Both kernels admit an orthonormal coordinate representation of the image
//! space Im(Φ): the ideal low-pass filter is exactly the span of the first
//! 2fc+1 real Fourier modes, and the periodized Gaussian is represented on a
//! uniform quadrature grid (trapezoid rule is spectrally accurate for smooth
//! periodic functions). Every inner product in the library is a plain dot
//! product of these coordinates.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Mat};

/// Coordinates of an element of Im(Φ) in the kernel's orthonormal basis.
pub type ImageVector = Vec<f64>;

/// Normalize a torus point into `[0, 1)`.
pub fn wrap_unit(t: f64) -> f64 {
    let r = t - libm::floor(t);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Wrap-around distance on the torus.
pub fn wrap_dist(a: f64, b: f64) -> f64 {
    let d = libm::fabs(wrap_unit(a) - wrap_unit(b));
    if d > 0.5 {
        1.0 - d
    } else {
        d
    }
}

/// Kernel description as serialized in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum KernelSpec {
    Ideal { fc: u32 },
    Gaussian { sigma: f64, wraps: u32 },
}

#[derive(Debug, Clone, PartialEq)]
enum KernelKind {
    /// Dirichlet kernel with unit Fourier coefficients up to `fc`.
    Ideal { fc: u32 },
    /// Periodized Gaussian, truncated at `wraps` wrap-arounds.
    Gaussian { sigma: f64, wraps: u32 },
}

/// Uniform grid `z_i = i/p` on the torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub p: usize,
}

impl GridSpec {
    pub fn new(p: usize) -> GridSpec {
        assert!(p >= 1, "grid needs at least one point");
        GridSpec { p }
    }

    pub fn h(&self) -> f64 {
        1.0 / self.p as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }

    /// Grid index of a torus point, if it lies on the grid.
    pub fn index_of(&self, t: f64, tol: f64) -> Option<usize> {
        let s = wrap_unit(t) * self.p as f64;
        let i = libm::round(s) as usize % self.p;
        if wrap_dist(self.point(i), t) <= tol * self.h() {
            Some(i)
        } else {
            None
        }
    }
}

/// Grid restriction `Φ_G` of the kernel operator together with its
/// derivative counterpart `Φ'_G`.
pub struct GridOperators {
    pub phi: Mat,
    pub dphi: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorusKernel {
    kind: KernelKind,
    smoothness_order: u8,
    image_dim: usize,
}

/// Physicists' Hermite polynomials H_0..H_5.
fn hermite(k: u8, x: f64) -> f64 {
    match k {
        0 => 1.0,
        1 => 2.0 * x,
        2 => 4.0 * x * x - 2.0,
        3 => x * (8.0 * x * x - 12.0),
        4 => (16.0 * x * x - 48.0) * x * x + 12.0,
        5 => x * ((32.0 * x * x - 160.0) * x * x + 120.0),
        _ => unreachable!("derivative order capped at 5"),
    }
}

impl TorusKernel {
    /// Ideal low-pass filter with cutoff `fc` (unit Fourier coefficients).
    pub fn ideal(fc: u32) -> TorusKernel {
        assert!(fc >= 1);
        TorusKernel {
            kind: KernelKind::Ideal { fc },
            smoothness_order: 5,
            image_dim: 2 * fc as usize + 1,
        }
    }

    /// Periodized Gaussian with the default quadrature (4096 samples),
    /// valid for grids up to P = 64.
    pub fn gaussian(sigma: f64, wraps: u32) -> TorusKernel {
        Self::gaussian_for_grid(sigma, wraps, 1)
    }

    /// Periodized Gaussian whose image-space quadrature resolves grids up to
    /// `max_p` points (M = max(4096, 64 max_p) samples).
    pub fn gaussian_for_grid(sigma: f64, wraps: u32, max_p: usize) -> TorusKernel {
        assert!(sigma > 0.0 && wraps >= 1);
        let m = core::cmp::max(4096, 64 * max_p);
        TorusKernel {
            kind: KernelKind::Gaussian { sigma, wraps },
            smoothness_order: 5,
            image_dim: m,
        }
    }

    pub fn from_spec(spec: &KernelSpec, max_p: usize) -> TorusKernel {
        match *spec {
            KernelSpec::Ideal { fc } => TorusKernel::ideal(fc),
            KernelSpec::Gaussian { sigma, wraps } => {
                TorusKernel::gaussian_for_grid(sigma, wraps, max_p)
            }
        }
    }

    pub fn spec(&self) -> KernelSpec {
        match self.kind {
            KernelKind::Ideal { fc } => KernelSpec::Ideal { fc },
            KernelKind::Gaussian { sigma, wraps } => KernelSpec::Gaussian { sigma, wraps },
        }
    }

    pub fn smoothness_order(&self) -> u8 {
        self.smoothness_order
    }

    /// Dimension of the orthonormal image representation.
    pub fn image_dim(&self) -> usize {
        self.image_dim
    }

    fn check_order(&self, order: u8) -> Result<()> {
        if order > self.smoothness_order {
            return Err(Error::Domain(format!(
                "derivative order {order} exceeds kernel smoothness {}",
                self.smoothness_order
            )));
        }
        Ok(())
    }

    /// `φ̃^{(order)}(t)`, the `order`-th derivative of the kernel profile,
    /// 1-periodic.
    pub fn eval_deriv(&self, order: u8, t: f64) -> Result<f64> {
        self.check_order(order)?;
        Ok(match self.kind {
            KernelKind::Ideal { fc } => {
                let mut acc = if order == 0 { 1.0 } else { 0.0 };
                let phase = order as f64 * PI / 2.0;
                for j in 1..=fc {
                    let w = 2.0 * PI * j as f64;
                    acc += 2.0 * libm::pow(w, order as f64) * libm::cos(w * t + phase);
                }
                acc
            }
            KernelKind::Gaussian { sigma, wraps } => {
                let tt = t - libm::round(t);
                let s2 = sigma * libm::sqrt(2.0);
                let scale = libm::pow(-1.0 / s2, order as f64);
                let mut acc = 0.0;
                for w in -(wraps as i64)..=(wraps as i64) {
                    let u = tt + w as f64;
                    acc += scale
                        * hermite(order, u / s2)
                        * libm::exp(-u * u / (2.0 * sigma * sigma));
                }
                acc
            }
        })
    }

    /// Coordinates of `∂₂^order φ(·, z)`: the image of the `order`-th
    /// derivative of a Dirac at `z`.
    pub fn spike_column(&self, z: f64, order: u8) -> Result<ImageVector> {
        self.check_order(order)?;
        Ok(match self.kind {
            KernelKind::Ideal { fc } => {
                let mut c = vec![0.0; self.image_dim];
                c[0] = if order == 0 { 1.0 } else { 0.0 };
                let sq2 = libm::sqrt(2.0);
                let phase = order as f64 * PI / 2.0;
                for j in 1..=fc as usize {
                    let w = 2.0 * PI * j as f64;
                    let amp = sq2 * libm::pow(w, order as f64);
                    c[2 * j - 1] = amp * libm::cos(w * z + phase);
                    c[2 * j] = amp * libm::sin(w * z + phase);
                }
                c
            }
            KernelKind::Gaussian { .. } => {
                let m = self.image_dim;
                let inv_sqrt_m = 1.0 / libm::sqrt(m as f64);
                let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
                let mut c = vec![0.0; m];
                for (i, ci) in c.iter_mut().enumerate() {
                    let x = i as f64 / m as f64;
                    *ci = sign * self.eval_deriv(order, x - z)? * inv_sqrt_m;
                }
                c
            }
        })
    }

    /// `η^{(order)}(t)` where `η = Φ* q`.
    pub fn adjoint_eval(&self, q: &[f64], order: u8, t: f64) -> Result<f64> {
        let col = self.spike_column(t, order)?;
        Ok(dot(q, &col))
    }

    /// Grid operator `Φ_G` and its derivative `Φ'_G` (columns indexed by the
    /// grid points).
    pub fn grid_operators(&self, grid: &GridSpec) -> Result<GridOperators> {
        if let KernelKind::Gaussian { .. } = self.kind {
            if self.image_dim < 64 * grid.p {
                return Err(Error::InvalidInput(format!(
                    "gaussian kernel quadrature ({} samples) too coarse for P = {}; \
                     construct with gaussian_for_grid",
                    self.image_dim, grid.p
                )));
            }
        }
        // sampled-space kernels whose quadrature grid refines the spike grid
        // only take image_dim distinct profile values per derivative order
        if let KernelKind::Gaussian { .. } = self.kind {
            let m = self.image_dim;
            if m % grid.p == 0 {
                let stride = m / grid.p;
                let inv_sqrt_m = 1.0 / libm::sqrt(m as f64);
                let mut profiles = [Vec::new(), Vec::new()];
                for (order, prof) in profiles.iter_mut().enumerate() {
                    let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
                    *prof = (0..m)
                        .map(|i| {
                            self.eval_deriv(order as u8, i as f64 / m as f64)
                                .map(|v| sign * v * inv_sqrt_m)
                        })
                        .collect::<Result<Vec<f64>>>()?;
                }
                let mut phi = Mat::zeros(m, 0);
                let mut dphi = Mat::zeros(m, 0);
                let mut col = vec![0.0; m];
                for j in 0..grid.p {
                    let off = j * stride;
                    for (mat, prof) in
                        [(&mut phi, &profiles[0]), (&mut dphi, &profiles[1])]
                    {
                        for (i, c) in col.iter_mut().enumerate() {
                            *c = prof[(i + m - off) % m];
                        }
                        mat.push_col(&col);
                    }
                }
                return Ok(GridOperators { phi, dphi });
            }
        }
        let mut phi = Mat::zeros(self.image_dim, 0);
        let mut dphi = Mat::zeros(self.image_dim, 0);
        for i in 0..grid.p {
            phi.push_col(&self.spike_column(grid.point(i), 0)?);
            dphi.push_col(&self.spike_column(grid.point(i), 1)?);
        }
        Ok(GridOperators { phi, dphi })
    }

    /// The family `{Φ_{x0}^{(k)}}` for `k = 0..=max_order` at pairwise
    /// distinct points.
    pub fn spike_operators(&self, x0: &[f64], max_order: u8) -> Result<Vec<Mat>> {
        self.check_order(max_order)?;
        for (a, &xa) in x0.iter().enumerate() {
            for &xb in x0.iter().skip(a + 1) {
                if wrap_dist(xa, xb) == 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "spike points must be pairwise distinct (duplicate at {xa})"
                    )));
                }
            }
        }
        let mut ops = Vec::with_capacity(max_order as usize + 1);
        for k in 0..=max_order {
            let mut m = Mat::zeros(self.image_dim, 0);
            for &x in x0 {
                m.push_col(&self.spike_column(x, k)?);
            }
            ops.push(m);
        }
        Ok(ops)
    }

    /// `Γ_{x0} = [Φ_{x0}  Φ'_{x0}]`.
    pub fn gamma_operator(&self, x0: &[f64]) -> Result<Mat> {
        let ops = self.spike_operators(x0, 1)?;
        let mut g = ops[0].clone();
        for j in 0..ops[1].cols() {
            g.push_col(ops[1].col(j));
        }
        Ok(g)
    }
}
