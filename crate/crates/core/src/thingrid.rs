//! Thin-grid analysis of spike deconvolution: the vanishing-derivatives and
//! third-derivative precertificates, non-degeneracy checks, natural shifts,
//! extended-support predictions on a grid, saturation classification, and
//! the asymptotic probes (Γ-convergence, λ₀ scaling, Gram expansions).
//!
//! Positions are points of the torus [0,1); grids are uniform with stepsize
//! h = 1/P. The natural shifts are intrinsic to the measure: they do not
//! depend on the grid, only the side each paired spike appears on does.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use serde::Serialize;

use crate::cone::{self, CbpCertificate, UpDownSupport};
use crate::error::{Error, Result};
use crate::kernel::{wrap_dist, wrap_unit, GridSpec, ImageVector, TorusKernel};
use crate::lasso::{self, SignMode, SignedSupport};
use crate::linalg::{axpy, norm2, norm_inf, Mat, Qr};

const RANK_TOL: f64 = 1e-11;
/// Constraint-interpolation tolerance for the closed-form precertificates.
const CONSTRAINT_TOL: f64 = 1e-9;

/// Off-grid signed spike train.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpikeMeasure {
    positions: Vec<f64>,
    amplitudes: Vec<f64>,
}

impl SpikeMeasure {
    pub fn new(positions: Vec<f64>, amplitudes: Vec<f64>) -> Result<SpikeMeasure> {
        if positions.len() != amplitudes.len() || positions.is_empty() {
            return Err(Error::InvalidInput(
                "positions and amplitudes must be equal-length and nonempty".to_string(),
            ));
        }
        if amplitudes.iter().any(|&a| a == 0.0) {
            return Err(Error::InvalidInput("amplitudes must be nonzero".to_string()));
        }
        let positions: Vec<f64> = positions.into_iter().map(wrap_unit).collect();
        for (i, &xi) in positions.iter().enumerate() {
            for &xj in positions.iter().skip(i + 1) {
                if wrap_dist(xi, xj) == 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "spike positions must be pairwise distinct (duplicate at {xi})"
                    )));
                }
            }
        }
        Ok(SpikeMeasure { positions, amplitudes })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn signs(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|&a| if a > 0.0 { 1.0 } else { -1.0 }).collect()
    }

    pub fn is_positive(&self) -> bool {
        self.amplitudes.iter().all(|&a| a > 0.0)
    }

    pub fn min_separation(&self) -> f64 {
        let mut sep = f64::INFINITY;
        for (i, &xi) in self.positions.iter().enumerate() {
            for &xj in self.positions.iter().skip(i + 1) {
                sep = sep.min(wrap_dist(xi, xj));
            }
        }
        sep
    }

    /// Exact observation `y0 = Φ m0` in image coordinates.
    pub fn observe(&self, kernel: &TorusKernel) -> Result<ImageVector> {
        let mut y = vec![0.0; kernel.image_dim()];
        for (&x, &a) in self.positions.iter().zip(&self.amplitudes) {
            axpy(a, &kernel.spike_column(x, 0)?, &mut y);
        }
        Ok(y)
    }

    /// Amplitude vector on a grid carrying the measure; errors when a spike
    /// is off the grid.
    pub fn grid_vector(&self, grid: &GridSpec) -> Result<Vec<f64>> {
        let mut a = vec![0.0; grid.p];
        for (&x, &amp) in self.positions.iter().zip(&self.amplitudes) {
            match grid.index_of(x, 1e-9) {
                Some(i) => a[i] += amp,
                None => {
                    return Err(Error::InvalidInput(format!(
                        "spike at {x} is not a grid point of P = {}",
                        grid.p
                    )))
                }
            }
        }
        Ok(a)
    }
}

/// A dual vector with kernel-backed evaluation of `η(t) = (Φ* q)(t)` and its
/// derivatives at arbitrary torus points.
#[derive(Debug, Clone)]
pub struct ContinuousCertificate {
    pub p: ImageVector,
    pub norm_p: f64,
    kernel: TorusKernel,
}

impl ContinuousCertificate {
    pub fn eval(&self, order: u8, t: f64) -> Result<f64> {
        self.kernel.adjoint_eval(&self.p, order, t)
    }
}

/// The per-spike shift data `(ρ, ε)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NaturalShift {
    pub rho: Vec<f64>,
    /// `ε_ν ∈ {−1, 0, +1}`, zero when `|ρ_ν|` is below the zero tolerance.
    pub epsilon: Vec<i8>,
}

impl NaturalShift {
    fn from_rho(rho: Vec<f64>, orient: impl Fn(usize, f64) -> f64) -> NaturalShift {
        let scale = norm_inf(&rho);
        let ztol = if scale < 1e-12 { 1e-12 } else { 1e-9 * scale };
        let epsilon = rho
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                if libm::fabs(r) < ztol {
                    0i8
                } else if orient(i, r) > 0.0 {
                    1i8
                } else {
                    -1i8
                }
            })
            .collect();
        NaturalShift { rho, epsilon }
    }

    pub fn all_nonzero(&self) -> bool {
        self.epsilon.iter().all(|&e| e != 0)
    }
}

/// Grid-level extended-support predictions driven by the natural shifts.
#[derive(Debug, Clone, Serialize)]
pub struct ExtendedSupportPrediction {
    /// LASSO variant: `{(x_ν, sign α_ν)} ∪ {(x_ν + ε_ν h, sign α_ν)}`.
    pub lasso: Option<SignedSupport>,
    /// C-BP variant `(J↑, J↓)`.
    pub cbp: Option<UpDownSupport>,
    pub grid: GridSpec,
    /// All prediction hypotheses that are cheap to check held (on-grid spikes,
    /// separation > 2h, every ρ_ν nonzero).
    pub hypothesis_ok: bool,
    pub shift: NaturalShift,
}

fn spike_system(
    kernel: &TorusKernel,
    m0: &SpikeMeasure,
    orders: &[u8],
) -> Result<Vec<Mat>> {
    let max_order = *orders.iter().max().unwrap();
    let ops = kernel.spike_operators(m0.positions(), max_order)?;
    Ok(orders.iter().map(|&k| ops[k as usize].clone()).collect())
}

fn concat_cols(mats: &[&Mat]) -> Mat {
    let mut out = Mat::zeros(mats[0].rows(), 0);
    for m in mats {
        for j in 0..m.cols() {
            out.push_col(m.col(j));
        }
    }
    out
}

/// Project the columns of `b` onto the orthogonal complement of the column
/// span of `a` (given its QR).
fn project_out(qr_a: &Qr, a: &Mat, b: &Mat) -> Mat {
    let mut out = Mat::zeros(b.rows(), 0);
    for j in 0..b.cols() {
        let coeff = qr_a.solve_ls(b.col(j));
        let mut w = b.col(j).to_vec();
        axpy(-1.0, &a.matvec(&coeff), &mut w);
        out.push_col(&w);
    }
    out
}

/// Vanishing-derivatives precertificate `η_V`: interpolates the amplitude
/// signs with zero first derivative at every spike, with minimal dual norm.
/// Both closed forms (the stacked pseudo-inverse and the block-inversion
/// formula) are computed and must agree.
pub fn vanishing_precertificate(
    kernel: &TorusKernel,
    m0: &SpikeMeasure,
) -> Result<ContinuousCertificate> {
    let n = m0.len();
    let sys = spike_system(kernel, m0, &[0, 1])?;
    let (phi, dphi) = (&sys[0], &sys[1]);
    let gamma = concat_cols(&[phi, dphi]);
    let qr_gamma = Qr::new(&gamma);
    qr_gamma.require_full_rank(RANK_TOL, "Gamma_x0 in vanishing precertificate")?;
    let mut rhs = m0.signs();
    rhs.extend(core::iter::repeat(0.0).take(n));
    let p = qr_gamma.min_norm_transpose_solve(&rhs);

    // block-inversion form: p = p_F − Π Φ' (Φ'* Π Φ')^{-1} Φ'* p_F
    let qr_phi = Qr::new(phi);
    qr_phi.require_full_rank(RANK_TOL, "Phi_x0 in vanishing precertificate")?;
    let p_fuchs = qr_phi.min_norm_transpose_solve(&m0.signs());
    let w = project_out(&qr_phi, phi, dphi);
    let qr_w = Qr::new(&w);
    qr_w.require_full_rank(RANK_TOL, "projected Phi'_x0")?;
    let coeff = qr_w.solve_gram(&dphi.tr_matvec(&p_fuchs));
    let mut p_block = p_fuchs;
    axpy(-1.0, &w.matvec(&coeff), &mut p_block);

    let mut diff = p.clone();
    axpy(-1.0, &p_block, &mut diff);
    let scale = norm2(&p).max(1e-12);
    if norm2(&diff) > CONSTRAINT_TOL * scale {
        return Err(Error::ProbeFailure(format!(
            "the two closed forms of the vanishing precertificate disagree by {:.3e}",
            norm2(&diff) / scale
        )));
    }

    let cert = ContinuousCertificate { norm_p: norm2(&p), p, kernel: kernel.clone() };
    for (&x, s) in m0.positions().iter().zip(m0.signs()) {
        if libm::fabs(cert.eval(0, x)? - s) > CONSTRAINT_TOL
            || libm::fabs(cert.eval(1, x)?) > CONSTRAINT_TOL * deriv_scale(kernel, 1)
        {
            return Err(Error::ProbeFailure(
                "vanishing precertificate interpolation constraints violated".to_string(),
            ));
        }
    }
    Ok(cert)
}

/// Natural magnitude of the order-k derivative of `Φ* p` for unit-scale
/// duals, used to make derivative tolerances dimensionless.
fn deriv_scale(kernel: &TorusKernel, order: u8) -> f64 {
    libm::fabs(kernel.eval_deriv(order, 0.0).unwrap_or(1.0))
        .max(libm::fabs(kernel.eval_deriv(order, 0.25).unwrap_or(1.0)))
        .max(1.0)
}

/// Dense scan of `f` over the torus minus open balls around the exclusions,
/// with one quadratic refinement around the running maximum.
fn scan_max(
    f: &impl Fn(f64) -> f64,
    exclusions: &[f64],
    radius: f64,
    points: usize,
) -> (f64, f64) {
    let n = points.max(16);
    let mut best_t = f64::NAN;
    let mut best = f64::NEG_INFINITY;
    for i in 0..n {
        let t = i as f64 / n as f64;
        if exclusions.iter().any(|&x| wrap_dist(t, x) < radius) {
            continue;
        }
        let v = f(t);
        if v > best {
            best = v;
            best_t = t;
        }
    }
    if best_t.is_nan() {
        return (f64::NAN, f64::NEG_INFINITY);
    }
    // local quadratic refinement around the discrete argmax
    let dt = 1.0 / n as f64;
    let (fm, f0, fp) = (f(best_t - dt), best, f(best_t + dt));
    let denom = fm - 2.0 * f0 + fp;
    if denom < 0.0 {
        let delta = 0.5 * (fm - fp) / denom;
        if libm::fabs(delta) <= 1.0 {
            let t = best_t + delta * dt;
            if !exclusions.iter().any(|&x| wrap_dist(t, x) < radius) {
                let v = f(t);
                if v > best {
                    return (wrap_unit(t), v);
                }
            }
        }
    }
    (best_t, best)
}

fn exclusion_radius(m0: &SpikeMeasure) -> f64 {
    if m0.len() == 1 {
        0.02
    } else {
        (m0.min_separation() / 4.0).min(0.02)
    }
}

/// Outcome of a non-degeneracy scan.
#[derive(Debug, Clone, Serialize)]
pub struct NondegeneracyReport {
    pub holds: bool,
    /// Largest certificate value found off the spikes (absolute value for
    /// the LASSO check, signed for the one-sided C-BP check).
    pub off_spike_max: f64,
    pub off_spike_argmax: f64,
    /// Smallest |η''(x_ν)| (LASSO) or largest μ''(x_ν) (C-BP, must be < 0).
    pub curvature_extreme: f64,
    /// C-BP only: smallest μ⁗(x_ν) (must be > 0). NaN for the LASSO check.
    pub fourth_extreme: f64,
}

/// Non-Degenerate Source Condition: `|η_V| < 1` off the spikes and
/// `η_V''(x_ν) ≠ 0` everywhere.
pub fn check_ndsc(
    kernel: &TorusKernel,
    m0: &SpikeMeasure,
    scan_points: usize,
) -> Result<NondegeneracyReport> {
    let cert = vanishing_precertificate(kernel, m0)?;
    check_ndsc_of(kernel, m0, &cert, scan_points)
}

/// Same scan against a caller-supplied certificate (used to probe scaled or
/// otherwise perturbed duals).
pub fn check_ndsc_of(
    kernel: &TorusKernel,
    m0: &SpikeMeasure,
    cert: &ContinuousCertificate,
    scan_points: usize,
) -> Result<NondegeneracyReport> {
    let radius = exclusion_radius(m0);
    let f = |t: f64| libm::fabs(cert.eval(0, t).unwrap_or(f64::NAN));
    let (argmax, max_off) = scan_max(&f, m0.positions(), radius, scan_points);
    let curv_tol = 1e-9 * deriv_scale(kernel, 2);
    let mut min_curv = f64::INFINITY;
    for &x in m0.positions() {
        min_curv = min_curv.min(libm::fabs(cert.eval(2, x)?));
    }
    Ok(NondegeneracyReport {
        holds: max_off < 1.0 && min_curv > curv_tol,
        off_spike_max: max_off,
        off_spike_argmax: argmax,
        curvature_extreme: min_curv,
        fourth_extreme: f64::NAN,
    })
}

/// Natural shift of the LASSO:
/// `ρ = (Φ'* Π Φ')^{-1} Φ'* Φ^{+,*} sign(α)`, ε = sign(diag(sign α) ρ).
pub fn natural_shift_lasso(kernel: &TorusKernel, m0: &SpikeMeasure) -> Result<NaturalShift> {
    let sys = spike_system(kernel, m0, &[0, 1])?;
    let (phi, dphi) = (&sys[0], &sys[1]);
    let gamma = concat_cols(&[phi, dphi]);
    Qr::new(&gamma).require_full_rank(RANK_TOL, "Gamma_x0 in natural shift")?;
    let qr_phi = Qr::new(phi);
    let p_fuchs = qr_phi.min_norm_transpose_solve(&m0.signs());
    let w = project_out(&qr_phi, phi, dphi);
    let qr_w = Qr::new(&w);
    let rho = qr_w.solve_gram(&dphi.tr_matvec(&p_fuchs));
    let signs = m0.signs();
    Ok(NaturalShift::from_rho(rho, move |i, r| signs[i] * r))
}

/// Extended-support prediction of the LASSO on a grid carrying the measure:
/// each spike pairs with its neighbor on the side `ε_ν`, same sign.
pub fn predict_extended_support_lasso(
    kernel: &TorusKernel,
    m0: &SpikeMeasure,
    grid: &GridSpec,
) -> Result<ExtendedSupportPrediction> {
    let a0 = m0.grid_vector(grid)?; // errors when off-grid
    let shift = natural_shift_lasso(kernel, m0)?;
    let hypothesis_ok = shift.all_nonzero() && m0.min_separation() > 2.0 * grid.h();

    let mut entries: Vec<(usize, i8)> = Vec::new();
    for (&x, &amp) in m0.positions().iter().zip(m0.amplitudes()) {
        let i = grid.index_of(x, 1e-9).expect("checked by grid_vector");
        let s = if amp > 0.0 { 1i8 } else { -1i8 };
        entries.push((i, s));
    }
    for (nu, &x) in m0.positions().iter().enumerate() {
        let e = shift.epsilon[nu];
        if e != 0 {
            let i = grid.index_of(x, 1e-9).unwrap();
            let j = (i + grid.p).wrapping_add_signed(e as isize) % grid.p;
            let s = if m0.amplitudes()[nu] > 0.0 { 1i8 } else { -1i8 };
            entries.push((j, s));
        }
    }
    let _ = a0;
    Ok(ExtendedSupportPrediction {
        lasso: Some(SignedSupport::new(entries)?),
        cbp: None,
        grid: *grid,
        hypothesis_ok,
        shift,
    })
}

/// Third-derivative precertificate `μ_T` of a positive measure: value one,
/// vanishing first and third derivatives at every spike, minimal dual norm.
/// Both printed closed forms are computed and must agree.
pub fn third_derivative_precertificate(
    kernel: &TorusKernel,
    m0: &SpikeMeasure,
) -> Result<ContinuousCertificate> {
    if !m0.is_positive() {
        return Err(Error::InvalidInput(
            "the third-derivative precertificate needs positive amplitudes".to_string(),
        ));
    }
    let n = m0.len();
    let sys = spike_system(kernel, m0, &[0, 1, 3])?;
    let (phi, dphi, d3phi) = (&sys[0], &sys[1], &sys[2]);
    let stacked = concat_cols(&[phi, dphi, d3phi]);
    let qr_all = Qr::new(&stacked);
    qr_all.require_full_rank(RANK_TOL, "[Phi, Phi', Phi'''] in third-derivative precertificate")?;
    let mut rhs = vec![1.0; n];
    rhs.extend(core::iter::repeat(0.0).take(2 * n));
    let q = qr_all.min_norm_transpose_solve(&rhs);

    // second printed form: q = p_V − Π̃ Φ³ (Φ³* Π̃ Φ³)^{-1} Φ³* p_V
    let gamma = concat_cols(&[phi, dphi]);
    let qr_gamma = Qr::new(&gamma);
    let mut rhs_v = vec![1.0; n];
    rhs_v.extend(core::iter::repeat(0.0).take(n));
    let p_v = qr_gamma.min_norm_transpose_solve(&rhs_v);
    let w = project_out(&qr_gamma, &gamma, d3phi);
    let qr_w = Qr::new(&w);
    qr_w.require_full_rank(RANK_TOL, "projected Phi'''_x0")?;
    let coeff = qr_w.solve_gram(&d3phi.tr_matvec(&p_v));
    let mut q_block = p_v;
    axpy(-1.0, &w.matvec(&coeff), &mut q_block);

    let mut diff = q.clone();
    axpy(-1.0, &q_block, &mut diff);
    let scale = norm2(&q).max(1e-12);
    if norm2(&diff) > CONSTRAINT_TOL * scale {
        return Err(Error::ProbeFailure(format!(
            "the two closed forms of the third-derivative precertificate disagree by {:.3e}",
            norm2(&diff) / scale
        )));
    }

    let cert = ContinuousCertificate { norm_p: norm2(&q), p: q, kernel: kernel.clone() };
    for &x in m0.positions() {
        if libm::fabs(cert.eval(0, x)? - 1.0) > CONSTRAINT_TOL
            || libm::fabs(cert.eval(1, x)?) > CONSTRAINT_TOL * deriv_scale(kernel, 1)
            || libm::fabs(cert.eval(3, x)?) > CONSTRAINT_TOL * deriv_scale(kernel, 3)
        {
            return Err(Error::ProbeFailure(
                "third-derivative precertificate interpolation constraints violated"
                    .to_string(),
            ));
        }
    }
    Ok(cert)
}

/// Twice Non-Degenerate Source Condition: `μ_T < 1` off the spikes (one
/// sided), `μ_T''(x_ν) < 0` and `μ_T⁗(x_ν) > 0`.
pub fn check_tndsc(
    kernel: &TorusKernel,
    m0: &SpikeMeasure,
    scan_points: usize,
) -> Result<NondegeneracyReport> {
    let cert = third_derivative_precertificate(kernel, m0)?;
    check_tndsc_of(kernel, m0, &cert, scan_points)
}

pub fn check_tndsc_of(
    kernel: &TorusKernel,
    m0: &SpikeMeasure,
    cert: &ContinuousCertificate,
    scan_points: usize,
) -> Result<NondegeneracyReport> {
    let radius = exclusion_radius(m0);
    let f = |t: f64| cert.eval(0, t).unwrap_or(f64::NAN);
    let (argmax, max_off) = scan_max(&f, m0.positions(), radius, scan_points);
    let mut max_curv = f64::NEG_INFINITY;
    let mut min_fourth = f64::INFINITY;
    for &x in m0.positions() {
        max_curv = max_curv.max(cert.eval(2, x)?);
        min_fourth = min_fourth.min(cert.eval(4, x)?);
    }
    let curv_tol = 1e-9 * deriv_scale(kernel, 2);
    let fourth_tol = 1e-9 * deriv_scale(kernel, 4);
    Ok(NondegeneracyReport {
        holds: max_off < 1.0 && max_curv < -curv_tol && min_fourth > fourth_tol,
        off_spike_max: max_off,
        off_spike_argmax: argmax,
        curvature_extreme: max_curv,
        fourth_extreme: min_fourth,
    })
}

/// Natural shift of the C-BP:
/// `ρ = (Φ³* Π̃ Φ³)^{-1} Φ³* Γ^{+,*} [𝟙; 0]`, ε = −sign(ρ).
pub fn natural_shift_cbp(kernel: &TorusKernel, m0: &SpikeMeasure) -> Result<NaturalShift> {
    if !m0.is_positive() {
        return Err(Error::InvalidInput(
            "the C-BP natural shift needs positive amplitudes".to_string(),
        ));
    }
    let n = m0.len();
    let sys = spike_system(kernel, m0, &[0, 1, 3])?;
    let (phi, dphi, d3phi) = (&sys[0], &sys[1], &sys[2]);
    let stacked = concat_cols(&[phi, dphi, d3phi]);
    Qr::new(&stacked).require_full_rank(RANK_TOL, "[Phi, Phi', Phi'''] in C-BP shift")?;
    let gamma = concat_cols(&[phi, dphi]);
    let qr_gamma = Qr::new(&gamma);
    let mut rhs = vec![1.0; n];
    rhs.extend(core::iter::repeat(0.0).take(n));
    let q_v = qr_gamma.min_norm_transpose_solve(&rhs);
    let w = project_out(&qr_gamma, &gamma, d3phi);
    let qr_w = Qr::new(&w);
    let rho = qr_w.solve_gram(&d3phi.tr_matvec(&q_v));
    Ok(NaturalShift::from_rho(rho, |_, r| -r))
}

/// Extended-support prediction of the C-BP on a grid carrying the measure:
/// `J↑` gains `x_ν − h` when `ρ_ν > 0`, `J↓` gains `x_ν + h` when `ρ_ν < 0`.
pub fn predict_extended_support_cbp(
    kernel: &TorusKernel,
    m0: &SpikeMeasure,
    grid: &GridSpec,
) -> Result<ExtendedSupportPrediction> {
    let _ = m0.grid_vector(grid)?;
    let shift = natural_shift_cbp(kernel, m0)?;
    let hypothesis_ok = shift.all_nonzero() && m0.min_separation() > 2.0 * grid.h();

    let mut up: Vec<usize> = Vec::new();
    let mut down: Vec<usize> = Vec::new();
    for (nu, &x) in m0.positions().iter().enumerate() {
        let i = grid.index_of(x, 1e-9).unwrap();
        up.push(i);
        down.push(i);
        match shift.epsilon[nu] {
            // ε = −sign(ρ): ρ > 0 pairs to the left (up set), ρ < 0 to the
            // right (down set)
            -1 => up.push((i + grid.p - 1) % grid.p),
            1 => down.push((i + 1) % grid.p),
            _ => {}
        }
    }
    up.sort_unstable();
    down.sort_unstable();
    Ok(ExtendedSupportPrediction {
        lasso: None,
        cbp: Some(UpDownSupport { up, down }),
        grid: *grid,
        hypothesis_ok,
        shift,
    })
}

/// One classified spike window of the saturation table.
#[derive(Debug, Clone, Serialize)]
pub struct SaturationClass {
    /// Grid indices saturating `μ + (h/2)μ'` inside the window.
    pub s_right: Vec<usize>,
    /// Grid indices saturating `μ − (h/2)μ'` inside the window.
    pub s_left: Vec<usize>,
    /// Number of Dirac masses the pattern allows (1..=4).
    pub masses: u8,
    /// Rows achievable when the third derivative does not vanish.
    pub starred: bool,
    /// Possible Dirac locations for the row.
    pub dirac_positions: Vec<f64>,
}

/// Classify the saturations of a grid dual certificate inside each spike
/// window against the admissible configurations. The windows are
/// `(center, radius)` pairs; radii must stay below half the separation.
pub fn classify_saturations(
    cert: &CbpCertificate,
    grid: &GridSpec,
    spike_windows: &[(f64, f64)],
) -> Result<Vec<SaturationClass>> {
    let h = grid.h();
    let mut out = Vec::with_capacity(spike_windows.len());
    for &(center, radius) in spike_windows {
        // signed offsets from the window center, sorted
        let mut right: Vec<(i64, usize)> = Vec::new();
        let mut left: Vec<(i64, usize)> = Vec::new();
        for k in 0..grid.p {
            let t = grid.point(k);
            if wrap_dist(t, center) >= radius {
                continue;
            }
            let mut delta = wrap_unit(t) - wrap_unit(center);
            if delta > 0.5 {
                delta -= 1.0;
            } else if delta < -0.5 {
                delta += 1.0;
            }
            let steps = libm::round(delta / h) as i64;
            if cert.sat_up.contains(&k) {
                right.push((steps, k));
            }
            if cert.sat_down.contains(&k) {
                left.push((steps, k));
            }
        }
        right.sort_unstable();
        left.sort_unstable();

        let classify_err = |msg: &str| Error::Classification {
            sat_right: right.iter().map(|&(_, k)| k).collect(),
            sat_left: left.iter().map(|&(_, k)| k).collect(),
            msg: msg.to_string(),
        };

        let consecutive = |v: &[(i64, usize)]| v.len() == 2 && v[1].0 == v[0].0 + 1;
        if right.len() > 2 || left.len() > 2 {
            return Err(classify_err("more than two saturations on one side"));
        }
        if (right.len() == 2 && !consecutive(&right))
            || (left.len() == 2 && !consecutive(&left))
        {
            return Err(classify_err("non-adjacent double saturation"));
        }
        if !right.is_empty() && !left.is_empty() {
            let max_r = right.last().unwrap().0;
            let min_l = left.first().unwrap().0;
            if max_r > min_l {
                return Err(classify_err("max S_right exceeds min S_left"));
            }
        }

        let pos = |steps: i64, side: f64| center + steps as f64 * h + side * h / 2.0;
        let (masses, starred, dirac_positions) = match (right.len(), left.len()) {
            (0, 0) => return Err(classify_err("no saturation inside the window")),
            (1, 0) => (1, true, vec![pos(right[0].0, 1.0)]),
            (0, 1) => (1, true, vec![pos(left[0].0, -1.0)]),
            (1, 1) if right[0].0 == left[0].0 => {
                (1, false, vec![center + right[0].0 as f64 * h])
            }
            (1, 1) => (2, false, vec![pos(right[0].0, 1.0), pos(left[0].0, -1.0)]),
            (2, 0) => (2, true, vec![pos(right[0].0, 1.0), pos(right[1].0, 1.0)]),
            (0, 2) => (2, true, vec![pos(left[0].0, -1.0), pos(left[1].0, -1.0)]),
            (1, 2) if right[0].0 == left[0].0 => (
                2,
                false,
                vec![center + right[0].0 as f64 * h, pos(left[1].0, -1.0)],
            ),
            (2, 1) if right[1].0 == left[0].0 => (
                2,
                false,
                vec![pos(right[0].0, 1.0), center + left[0].0 as f64 * h],
            ),
            (1, 2) => (
                3,
                false,
                vec![pos(right[0].0, 1.0), pos(left[0].0, -1.0), pos(left[1].0, -1.0)],
            ),
            (2, 1) => (
                3,
                false,
                vec![pos(right[0].0, 1.0), pos(right[1].0, 1.0), pos(left[0].0, -1.0)],
            ),
            (2, 2) if right[1].0 == left[0].0 => (
                3,
                false,
                vec![
                    pos(right[0].0, 1.0),
                    center + right[1].0 as f64 * h,
                    pos(left[1].0, -1.0),
                ],
            ),
            (2, 2) => (
                4,
                false,
                vec![
                    pos(right[0].0, 1.0),
                    pos(right[1].0, 1.0),
                    pos(left[0].0, -1.0),
                    pos(left[1].0, -1.0),
                ],
            ),
            _ => return Err(classify_err("unrecognized saturation pattern")),
        };
        out.push(SaturationClass {
            s_right: right.iter().map(|&(_, k)| k).collect(),
            s_left: left.iter().map(|&(_, k)| k).collect(),
            masses,
            starred,
            dirac_positions: dirac_positions.into_iter().map(wrap_unit).collect(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProblemVariant {
    Lasso,
    Cbp,
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaProbe {
    pub grid_sizes: Vec<usize>,
    pub values: Vec<f64>,
    /// Non-increasing within rounding slack.
    pub monotone: bool,
    /// `values[k] − values[k+1]`.
    pub increments: Vec<f64>,
    /// Increments eventually shrink (last ≤ half the largest).
    pub cauchy: bool,
}

/// Optimal objective values of the grid problems over a nested family of
/// grids. Feasible sets grow under nesting, so the sequence must be
/// non-increasing.
pub fn gamma_convergence_probe(
    kernel: &TorusKernel,
    y: &ImageVector,
    lambda: f64,
    grids: &[GridSpec],
    variant: ProblemVariant,
) -> Result<GammaProbe> {
    if grids.len() < 2 {
        return Err(Error::InvalidInput("need at least two grids".to_string()));
    }
    for w in grids.windows(2) {
        if w[1].p % w[0].p != 0 || w[1].p <= w[0].p {
            return Err(Error::InvalidInput(format!(
                "grids must be nested and increasing: {} then {}",
                w[0].p, w[1].p
            )));
        }
    }
    let mut values = Vec::with_capacity(grids.len());
    for grid in grids {
        let ops = kernel.grid_operators(grid)?;
        let value = match variant {
            ProblemVariant::Lasso => {
                let path = lasso::homotopy(&ops.phi, y, lambda, SignMode::Signed)?;
                let a = path.eval(lambda);
                objective_value(&ops.phi, y, lambda, &a)
            }
            ProblemVariant::Cbp => {
                let lam_mat = cone::assemble_lambda(&ops.phi, &ops.dphi, grid.h());
                let path = lasso::homotopy(&lam_mat, y, lambda, SignMode::Positive)?;
                let x = path.eval(lambda);
                objective_value(&lam_mat, y, lambda, &x)
            }
        };
        values.push(value);
    }
    let scale = values[0].max(1.0);
    let increments: Vec<f64> = values.windows(2).map(|w| w[0] - w[1]).collect();
    let monotone = increments.iter().all(|&d| d >= -1e-12 * scale);
    let max_inc = increments.iter().cloned().fold(0.0f64, f64::max);
    let cauchy = increments.last().map(|&d| d <= 0.5 * max_inc + 1e-12 * scale).unwrap_or(true);
    Ok(GammaProbe { grid_sizes: grids.iter().map(|g| g.p).collect(), values, monotone, increments, cauchy })
}

fn objective_value(op: &Mat, y: &[f64], lambda: f64, a: &[f64]) -> f64 {
    let mut r = y.to_vec();
    axpy(-1.0, &op.matvec(a), &mut r);
    0.5 * crate::linalg::dot(&r, &r) + lambda * a.iter().map(|&v| libm::fabs(v)).sum::<f64>()
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow {
    pub p: usize,
    pub h: f64,
    /// Largest λ at which the noiseless path support equals the predicted
    /// extended support; absent when the prediction is not the extended
    /// support at this stepsize (support still stable, or a different
    /// pattern).
    pub lambda0: Option<f64>,
    /// `‖slope‖∞` of the terminal path segment.
    pub terminal_slope_inf: Option<f64>,
    pub error: Option<alloc::string::String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingProbe {
    pub variant: ProblemVariant,
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of `log λ₀` against `log h` over the grids where
    /// λ₀ exists.
    pub lambda0_slope: f64,
    /// Least-squares slope of `log ‖slope‖∞` against `log h`.
    pub lipschitz_slope: f64,
}

/// Measure `λ₀(h)` over a family of grids and fit the scaling exponent. The
/// expected slopes are ≈ 1 for the LASSO and ≈ 3 for the C-BP.
///
/// On the noiseless terminal segment the off-support dual values are
/// λ-independent, so λ₀ is exactly the first sign-change breakpoint of the
/// closed-form segment `x_J(λ) = x0_J − λ (Op_J* Op_J)^{-1} s_J` over the
/// certificate-verified extended support; it is computed from that formula
/// rather than by following the whole path.
pub fn scaling_probe_lambda0(
    kernel: &TorusKernel,
    m0: &SpikeMeasure,
    grids: &[GridSpec],
    variant: ProblemVariant,
) -> Result<ScalingProbe> {
    let mut rows = Vec::with_capacity(grids.len());
    for grid in grids {
        let row = scaling_row(kernel, m0, grid, variant);
        rows.push(match row {
            Ok((lambda0, slope_inf)) => ScalingRow {
                p: grid.p,
                h: grid.h(),
                lambda0: Some(lambda0),
                terminal_slope_inf: Some(slope_inf),
                error: None,
            },
            Err(e) => ScalingRow {
                p: grid.p,
                h: grid.h(),
                lambda0: None,
                terminal_slope_inf: None,
                error: Some(format!("{e}")),
            },
        });
    }
    let usable: Vec<&ScalingRow> = rows.iter().filter(|r| r.lambda0.is_some()).collect();
    if usable.len() < 3 {
        return Err(Error::ProbeFailure(format!(
            "λ₀ measurable on only {} of {} grids",
            usable.len(),
            rows.len()
        )));
    }
    let xs: Vec<f64> = usable.iter().map(|r| libm::log(r.h)).collect();
    let lambda0_slope =
        fit_slope(&xs, &usable.iter().map(|r| libm::log(r.lambda0.unwrap())).collect::<Vec<_>>());
    let lipschitz_slope = fit_slope(
        &xs,
        &usable.iter().map(|r| libm::log(r.terminal_slope_inf.unwrap())).collect::<Vec<_>>(),
    );
    Ok(ScalingProbe { variant, rows, lambda0_slope, lipschitz_slope })
}

fn scaling_row(
    kernel: &TorusKernel,
    m0: &SpikeMeasure,
    grid: &GridSpec,
    variant: ProblemVariant,
) -> Result<(f64, f64)> {
    let ops = kernel.grid_operators(grid)?;
    let a0 = m0.grid_vector(grid)?;
    match variant {
        ProblemVariant::Lasso => {
            let pred = predict_extended_support_lasso(kernel, m0, grid)?;
            let target = pred.lasso.expect("lasso prediction");
            if !pred.hypothesis_ok {
                return Err(Error::ProbeFailure(format!(
                    "prediction hypotheses fail on P = {}",
                    grid.p
                )));
            }
            let cert = lasso::minimal_norm_certificate(&ops.phi, &a0)?;
            if cert.saturation != target {
                return Err(Error::ProbeFailure(format!(
                    "extended support at P = {} is {:?}, not the prediction",
                    grid.p,
                    cert.saturation.indices()
                )));
            }
            let sub = ops.phi.gather(&target.indices());
            let qr = Qr::new(&sub);
            let zeros = vec![0.0; kernel.image_dim()];
            let (_, slope) = qr.solve_augmented(&sub, &zeros, &target.signs_f64(), 2);
            // x_J(λ) = x0_J + λ·slope with slope = −(G_J)^{-1} s_J
            let mut lambda0 = f64::INFINITY;
            for ((&j, &s), &sl) in
                target.indices().iter().zip(&target.signs_f64()).zip(&slope)
            {
                if s * sl < 0.0 && a0[j] != 0.0 {
                    lambda0 = lambda0.min(-a0[j] / sl);
                }
            }
            if !lambda0.is_finite() {
                return Err(Error::ProbeFailure("terminal segment never ends".to_string()));
            }
            Ok((lambda0, norm_inf(&slope)))
        }
        ProblemVariant::Cbp => {
            let pred = predict_extended_support_cbp(kernel, m0, grid)?;
            let target = pred.cbp.expect("cbp prediction");
            if !pred.hypothesis_ok {
                return Err(Error::ProbeFailure(format!(
                    "prediction hypotheses fail on P = {}",
                    grid.p
                )));
            }
            let h = grid.h();
            let cert = cone::cbp_minimal_norm_certificate(
                &ops.phi,
                &ops.dphi,
                &a0,
                &vec![0.0; grid.p],
                h,
            )?;
            let mut sat = UpDownSupport { up: cert.sat_up.clone(), down: cert.sat_down.clone() };
            sat.up.sort_unstable();
            sat.down.sort_unstable();
            if sat != target {
                return Err(Error::ProbeFailure(format!(
                    "extended support at P = {} is ({:?}, {:?}), not the prediction",
                    grid.p, sat.up, sat.down
                )));
            }
            let lam_mat = cone::assemble_lambda(&ops.phi, &ops.dphi, h);
            let mut idx: Vec<usize> = target.up.clone();
            idx.extend(target.down.iter().map(|&j| grid.p + j));
            let sub = lam_mat.gather(&idx);
            let qr = Qr::new(&sub);
            let zeros = vec![0.0; kernel.image_dim()];
            let ones = vec![1.0; idx.len()];
            let (_, slope) = qr.solve_augmented(&sub, &zeros, &ones, 2);
            // (u, v) start from a0/2 at the original nodes, 0 on extensions
            let mut lambda0 = f64::INFINITY;
            for (&j, &sl) in idx.iter().zip(&slope) {
                let x0 = if j < grid.p { 0.5 * a0[j] } else { 0.5 * a0[j - grid.p] };
                if sl < 0.0 && x0 > 0.0 {
                    lambda0 = lambda0.min(-x0 / sl);
                }
            }
            if !lambda0.is_finite() {
                return Err(Error::ProbeFailure("terminal segment never ends".to_string()));
            }
            Ok((lambda0, norm_inf(&slope)))
        }
    }
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

#[derive(Debug, Clone, Serialize)]
pub struct GramExpansionRow {
    pub h: f64,
    /// `‖exact − leading‖∞` (per-h absolute residual), when computable.
    pub residual: Option<f64>,
    /// residual divided by the leading-term magnitude `‖leading‖∞`.
    pub ratio: Option<f64>,
    pub error: Option<alloc::string::String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GramExpansionReport {
    pub variant: ProblemVariant,
    pub rows: Vec<GramExpansionRow>,
    /// Ratios decrease over the h-halvings that computed successfully.
    pub ratios_decreasing: bool,
}

/// Compare exact inverse-Gram products against their leading-order
/// expansions: `(Op_J*Op_J)^{-1}[s;s] = (1/h)[Eρ; −Eρ] + O(1)` for the LASSO
/// family and the `1/(γ₃ h³)` analogue for the C-BP family (γ₃ = −1/12).
pub fn gram_expansion_check(
    kernel: &TorusKernel,
    m0: &SpikeMeasure,
    h_list: &[f64],
    variant: ProblemVariant,
) -> Result<GramExpansionReport> {
    let n = m0.len();
    let gamma3 = 1.0 / 6.0 - 1.0 / 4.0;
    let (shift, order) = match variant {
        ProblemVariant::Lasso => (natural_shift_lasso(kernel, m0)?, 1.0),
        ProblemVariant::Cbp => (natural_shift_cbp(kernel, m0)?, 3.0),
    };
    let signs = m0.signs();
    // ε = ±1 even when ρ_ν = 0 (any side; the leading term is then zero)
    let eps: Vec<f64> = shift
        .epsilon
        .iter()
        .map(|&e| if e == 0 { 1.0 } else { e as f64 })
        .collect();

    let mut rows = Vec::with_capacity(h_list.len());
    let mut ratios = Vec::new();
    for &h in h_list {
        let row = (|| -> Result<(f64, Option<f64>)> {
            let (exact, leading): (Vec<f64>, Vec<f64>) = match variant {
                ProblemVariant::Lasso => {
                    let mut cols = Mat::zeros(kernel.image_dim(), 0);
                    for &x in m0.positions() {
                        cols.push_col(&kernel.spike_column(x, 0)?);
                    }
                    for (nu, &x) in m0.positions().iter().enumerate() {
                        cols.push_col(&kernel.spike_column(x + eps[nu] * h, 0)?);
                    }
                    let qr = Qr::new(&cols);
                    qr.require_full_rank(RANK_TOL, "Gram expansion columns")?;
                    let mut s2 = signs.clone();
                    s2.extend_from_slice(&signs);
                    let zeros = vec![0.0; cols.rows()];
                    let (_, neg) = qr.solve_augmented(&cols, &zeros, &s2, 2);
                    let exact: Vec<f64> = neg.iter().map(|v| -v).collect();
                    let mut lead = vec![0.0; 2 * n];
                    for nu in 0..n {
                        if shift.epsilon[nu] != 0 {
                            lead[nu] = eps[nu] * shift.rho[nu] / h;
                            lead[n + nu] = -eps[nu] * shift.rho[nu] / h;
                        }
                    }
                    (exact, lead)
                }
                ProblemVariant::Cbp => {
                    let mut cols = Mat::zeros(kernel.image_dim(), 0);
                    for &x in m0.positions() {
                        let mut c = kernel.spike_column(x, 0)?;
                        axpy(0.5 * h, &kernel.spike_column(x, 1)?, &mut c);
                        cols.push_col(&c);
                    }
                    for &x in m0.positions() {
                        let mut c = kernel.spike_column(x, 0)?;
                        axpy(-0.5 * h, &kernel.spike_column(x, 1)?, &mut c);
                        cols.push_col(&c);
                    }
                    for (nu, &x) in m0.positions().iter().enumerate() {
                        let xn = x + eps[nu] * h;
                        let mut c = kernel.spike_column(xn, 0)?;
                        axpy(-eps[nu] * 0.5 * h, &kernel.spike_column(xn, 1)?, &mut c);
                        cols.push_col(&c);
                    }
                    let qr = Qr::new(&cols);
                    qr.require_full_rank(RANK_TOL, "C-BP Gram expansion columns")?;
                    let zeros = vec![0.0; cols.rows()];
                    let (_, neg) = qr.solve_augmented(&cols, &zeros, &vec![1.0; 3 * n], 2);
                    let exact: Vec<f64> = neg.iter().map(|v| -v).collect();
                    // the expansion orders columns per spike as
                    // (A + ε(h/2)B, A − ε(h/2)B, neighbor): the first block is
                    // the up column when ε = +1 and the down column when
                    // ε = −1; the opposite column carries no 1/h³ term
                    let mut lead = vec![0.0; 3 * n];
                    for nu in 0..n {
                        if shift.epsilon[nu] != 0 {
                            let t = eps[nu] * shift.rho[nu] / (gamma3 * h * h * h);
                            if shift.epsilon[nu] > 0 {
                                lead[nu] = t;
                            } else {
                                lead[n + nu] = t;
                            }
                            lead[2 * n + nu] = -t;
                        }
                    }
                    (exact, lead)
                }
            };
            let mut diff = exact;
            axpy(-1.0, &leading, &mut diff);
            let resid = norm_inf(&diff);
            let lead_mag = norm_inf(&leading);
            // ρ = 0 has no leading term; the residual itself is the O(1) part
            let ratio = if lead_mag > 0.0 { Some(resid / lead_mag) } else { None };
            Ok((resid, ratio))
        })();
        match row {
            Ok((resid, ratio)) => {
                if let Some(r) = ratio {
                    ratios.push(r);
                }
                rows.push(GramExpansionRow { h, residual: Some(resid), ratio, error: None });
            }
            Err(e) => {
                rows.push(GramExpansionRow {
                    h,
                    residual: None,
                    ratio: None,
                    error: Some(format!("{e}")),
                });
            }
        }
    }
    let _ = order;
    let ratios_decreasing = ratios.windows(2).all(|w| w[1] <= w[0] * 1.05);
    Ok(GramExpansionReport { variant, rows, ratios_decreasing })
}
