//! LASSO / Basis-Pursuit machinery for an arbitrary operator into the
//! observation space: solvers, the exact piecewise-affine solution path,
//! dual certificates and the extended support.
//!
//! The sign conventions follow the optimality system
//!   `‖Op* p_λ‖∞ ≤ 1`, `(Op* p_λ)_I = sign(a_I)`, `p_λ = (y − Op a_λ)/λ`,
//! with the minimal-norm certificate `η₀ = Op* Op_J^{+,*} s_J` saturating
//! exactly on the extended support `J`.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::ImageVector;
use crate::linalg::{axpy, dot, norm2, norm_inf, Mat, Qr};
use crate::qp;

/// Relative tolerance when reading saturations `|η| = 1`.
pub const SAT_TOL: f64 = 1e-7;
/// Relative threshold under which a Gram-solve coefficient counts as zero.
pub const ZERO_TOL_REL: f64 = 1e-9;
pub(crate) const FISTA_MAX_ITER: usize = 200_000;
const RANK_TOL: f64 = 1e-11;

/// Whether a problem penalizes signed amplitudes or nonnegative ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignMode {
    Signed,
    Positive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SignedSupport {
    entries: Vec<(usize, i8)>,
}

impl SignedSupport {
    pub fn new(mut entries: Vec<(usize, i8)>) -> Result<SignedSupport> {
        entries.sort_by_key(|&(i, _)| i);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidInput(format!(
                    "duplicate index {} in signed support",
                    w[0].0
                )));
            }
        }
        if entries.iter().any(|&(_, s)| s != 1 && s != -1) {
            return Err(Error::InvalidInput("signs must be ±1".to_string()));
        }
        Ok(SignedSupport { entries })
    }

    pub fn from_vector(a: &[f64]) -> SignedSupport {
        let entries = a
            .iter()
            .enumerate()
            .filter(|&(_, &v)| v != 0.0)
            .map(|(i, &v)| (i, if v > 0.0 { 1i8 } else { -1i8 }))
            .collect();
        SignedSupport { entries }
    }

    pub fn entries(&self) -> &[(usize, i8)] {
        &self.entries
    }

    pub fn indices(&self) -> Vec<usize> {
        self.entries.iter().map(|&(i, _)| i).collect()
    }

    pub fn signs_f64(&self) -> Vec<f64> {
        self.entries.iter().map(|&(_, s)| s as f64).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sign_of(&self, idx: usize) -> Option<i8> {
        self.entries.iter().find(|&&(i, _)| i == idx).map(|&(_, s)| s)
    }

    /// Subset with sign agreement.
    pub fn is_contained_in(&self, other: &SignedSupport) -> bool {
        self.entries.iter().all(|&(i, s)| other.sign_of(i) == Some(s))
    }
}

#[derive(Debug, Clone)]
pub struct LassoProblem {
    pub op: Mat,
    pub y: ImageVector,
    pub lambda: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    /// Dual vector in image coordinates.
    pub p: ImageVector,
    /// `η = Op* p` over all columns.
    pub eta: Vec<f64>,
    /// Columns with `|η_j| ≥ 1 − SAT_TOL`, with the sign of `η_j`.
    pub saturation: SignedSupport,
    pub max_abs: f64,
    pub norm_p: f64,
    /// `max |η_j|` outside the defining support rows.
    pub off_support_max: f64,
    /// Strict validity: `off_support_max < 1`.
    pub valid: bool,
}

fn certificate_from_p(op: &Mat, p: Vec<f64>, defining: &[usize]) -> CertificateReport {
    let eta = op.tr_matvec(&p);
    let saturation = SignedSupport {
        entries: eta
            .iter()
            .enumerate()
            .filter(|&(_, &e)| libm::fabs(e) >= 1.0 - SAT_TOL)
            .map(|(j, &e)| (j, if e >= 0.0 { 1i8 } else { -1i8 }))
            .collect(),
    };
    let max_abs = norm_inf(&eta);
    let off_support_max = eta
        .iter()
        .enumerate()
        .filter(|(j, _)| !defining.contains(j))
        .fold(0.0f64, |m, (_, &e)| m.max(libm::fabs(e)));
    CertificateReport {
        norm_p: norm2(&p),
        p,
        eta,
        saturation,
        max_abs,
        off_support_max,
        valid: off_support_max < 1.0,
    }
}

// ---------------------------------------------------------------------------
// FISTA

fn prox(v: f64, t: f64, mode: SignMode) -> f64 {
    match mode {
        SignMode::Signed => {
            if v > t {
                v - t
            } else if v < -t {
                v + t
            } else {
                0.0
            }
        }
        SignMode::Positive => (v - t).max(0.0),
    }
}

pub(crate) fn objective(op: &Mat, y: &[f64], lambda: f64, a: &[f64]) -> f64 {
    let mut r = y.to_vec();
    axpy(-1.0, &op.matvec(a), &mut r);
    0.5 * dot(&r, &r) + lambda * a.iter().map(|&x| libm::fabs(x)).sum::<f64>()
}

fn duality_gap(op: &Mat, y: &[f64], lambda: f64, a: &[f64], mode: SignMode) -> f64 {
    let mut r = y.to_vec();
    axpy(-1.0, &op.matvec(a), &mut r);
    let c = op.tr_matvec(&r);
    let cmax = match mode {
        SignMode::Signed => norm_inf(&c),
        SignMode::Positive => c.iter().fold(0.0f64, |m, &x| m.max(x)),
    };
    let scale = if cmax > lambda { cmax / lambda } else { 1.0 };
    // dual value ½‖y‖² − ½‖y − λp‖² at p = r/(λ·scale)
    let mut ylp = y.to_vec();
    axpy(-1.0 / scale, &r, &mut ylp);
    let dual = 0.5 * dot(y, y) - 0.5 * dot(&ylp, &ylp);
    objective(op, y, lambda, a) - dual
}

struct FistaStage {
    x: Vec<f64>,
    converged: bool,
    iters: usize,
    last_gap: f64,
}

fn fista_stage(
    op: &Mat,
    y: &[f64],
    lambda: f64,
    tol: f64,
    mode: SignMode,
    x0: Vec<f64>,
    step: f64,
    max_iter: usize,
    check_gap: bool,
) -> FistaStage {
    let n = op.cols();
    let mut x = x0;
    let mut z = x.clone();
    let mut theta = 1.0f64;
    let mut last_gap = f64::INFINITY;

    for it in 0..max_iter {
        let mut resid = op.matvec(&z);
        axpy(-1.0, y, &mut resid); // Az − y
        let grad = op.tr_matvec(&resid);
        let mut x_new = vec![0.0; n];
        for j in 0..n {
            x_new[j] = prox(z[j] - step * grad[j], step * lambda, mode);
        }
        let theta_new = 0.5 * (1.0 + libm::sqrt(1.0 + 4.0 * theta * theta));
        let beta = (theta - 1.0) / theta_new;
        for j in 0..n {
            z[j] = x_new[j] + beta * (x_new[j] - x[j]);
        }
        x = x_new;
        theta = theta_new;
        if (it + 1) % 200 == 0 {
            theta = 1.0;
            z.copy_from_slice(&x);
        }

        if it % 10 == 0 || it + 1 == max_iter {
            // fixed-point residual of the prox map at x
            let mut r = op.matvec(&x);
            axpy(-1.0, y, &mut r);
            let g = op.tr_matvec(&r);
            let mut fp = 0.0f64;
            for j in 0..n {
                fp = fp.max(libm::fabs(x[j] - prox(x[j] - step * g[j], step * lambda, mode)));
            }
            if fp <= tol {
                if !check_gap {
                    return FistaStage { x, converged: true, iters: it + 1, last_gap };
                }
                last_gap = duality_gap(op, y, lambda, &x, mode);
                if last_gap <= tol {
                    return FistaStage { x, converged: true, iters: it + 1, last_gap };
                }
            }
        }
    }
    FistaStage { x, converged: false, iters: max_iter, last_gap }
}

/// Accelerated proximal gradient with periodic restart and geometric
/// continuation in λ (warm starts from larger λ keep the iterates sparse,
/// which cold starts cannot achieve at λ ≪ λ_max within the iteration
/// budget). Stops when both the duality gap and the prox fixed-point
/// residual fall below `tol`.
pub(crate) fn fista(
    op: &Mat,
    y: &[f64],
    lambda: f64,
    tol: f64,
    mode: SignMode,
) -> Result<Vec<f64>> {
    if lambda <= 0.0 {
        return Err(Error::InvalidInput("FISTA requires lambda > 0".to_string()));
    }
    let n = op.cols();
    let lip = op.gram_spectral_norm(50);
    if lip == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let step = 1.0 / lip;
    let lam_top = lambda_max(op, y, mode);

    let mut budget = FISTA_MAX_ITER;
    let mut x = vec![0.0; n];
    let mut stage_lam = lam_top * 0.5;
    while stage_lam > lambda && budget > FISTA_MAX_ITER / 2 {
        let stage_tol = (1e-4 * stage_lam * step).max(tol);
        let out = fista_stage(op, y, stage_lam, stage_tol, mode, x, step, 400, false);
        x = out.x;
        budget = budget.saturating_sub(out.iters);
        stage_lam *= 0.5;
    }
    let out = fista_stage(op, y, lambda, tol, mode, x, step, budget, true);
    if out.converged {
        Ok(out.x)
    } else {
        Err(Error::IterationLimit { what: "FISTA".to_string(), residual: out.last_gap })
    }
}

pub fn solve_lasso_fista(problem: &LassoProblem, tol: f64) -> Result<Vec<f64>> {
    fista(&problem.op, &problem.y, problem.lambda, tol, SignMode::Signed)
}

/// Mode-parameterized FISTA entry point, the independent first-order solver
/// used to cross-validate homotopy paths.
pub fn fista_reference(
    op: &Mat,
    y: &[f64],
    lambda: f64,
    tol: f64,
    mode: SignMode,
) -> Result<Vec<f64>> {
    fista(op, y, lambda, tol, mode)
}

// ---------------------------------------------------------------------------
// Homotopy

#[derive(Debug, Clone, Serialize)]
pub struct PathSegment {
    pub lambda_hi: f64,
    pub lambda_lo: f64,
    /// Active columns, parallel to `signs`, `offset`, `slope`.
    pub indices: Vec<usize>,
    pub signs: Vec<i8>,
    /// On the segment, `a_λ[indices[k]] = offset[k] + λ · slope[k]`.
    pub offset: Vec<f64>,
    pub slope: Vec<f64>,
}

impl PathSegment {
    pub fn support(&self) -> SignedSupport {
        let mut entries: Vec<(usize, i8)> =
            self.indices.iter().copied().zip(self.signs.iter().copied()).collect();
        entries.sort_by_key(|&(i, _)| i);
        SignedSupport { entries }
    }

    pub fn eval(&self, lambda: f64, n_cols: usize) -> Vec<f64> {
        let mut a = vec![0.0; n_cols];
        for (k, &i) in self.indices.iter().enumerate() {
            a[i] = self.offset[k] + lambda * self.slope[k];
        }
        a
    }

    pub fn max_slope_inf(&self) -> f64 {
        norm_inf(&self.slope)
    }
}

/// The exact piecewise-affine solution path `λ ↦ a_λ`, stored from
/// `λ_max` down to `λ_min`.
#[derive(Debug, Clone, Serialize)]
pub struct SolutionPath {
    pub lambda_max: f64,
    pub segments: Vec<PathSegment>,
    /// λ values where several breakpoint events coincided and the smallest
    /// index was chosen.
    pub ties: Vec<f64>,
    pub n_cols: usize,
}

impl SolutionPath {
    /// Decreasing list `[λ_max, λ_1, ..., λ_last]`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = vec![self.lambda_max];
        b.extend(self.segments.iter().map(|s| s.lambda_lo));
        b
    }

    pub fn eval(&self, lambda: f64) -> Vec<f64> {
        if lambda >= self.lambda_max || self.segments.is_empty() {
            return vec![0.0; self.n_cols];
        }
        for seg in &self.segments {
            if lambda >= seg.lambda_lo {
                return seg.eval(lambda, self.n_cols);
            }
        }
        // below the computed range: extrapolate the terminal segment
        self.segments.last().unwrap().eval(lambda, self.n_cols)
    }

    pub fn final_segment(&self) -> Option<&PathSegment> {
        self.segments.last()
    }

    /// The λ → 0⁺ limit of the path (offset of the terminal segment). Equals
    /// the Basis-Pursuit solution when the path was run down to zero.
    pub fn limit_solution(&self) -> Vec<f64> {
        match self.segments.last() {
            None => vec![0.0; self.n_cols],
            Some(seg) => seg.eval(0.0, self.n_cols),
        }
    }
}

/// LARS-style homotopy. Events are located from the closed-form affine
/// segment; all linear solves go through QR of the active columns.
pub(crate) fn homotopy(
    op: &Mat,
    y: &[f64],
    lambda_min: f64,
    mode: SignMode,
) -> Result<SolutionPath> {
    if lambda_min < 0.0 {
        return Err(Error::InvalidInput("lambda_min must be nonnegative".to_string()));
    }
    let n = op.cols();
    let coly = op.tr_matvec(y);
    let lambda_max = match mode {
        SignMode::Signed => norm_inf(&coly),
        SignMode::Positive => coly.iter().fold(0.0f64, |m, &x| m.max(x)),
    };

    let zero_path = |lmax: f64| SolutionPath {
        lambda_max: lmax,
        segments: vec![PathSegment {
            lambda_hi: f64::INFINITY,
            lambda_lo: 0.0,
            indices: vec![],
            signs: vec![],
            offset: vec![],
            slope: vec![],
        }],
        ties: vec![],
        n_cols: n,
    };
    if lambda_max <= 0.0 {
        return Ok(zero_path(0.0));
    }

    let guard = lambda_min.max(1e-12 * lambda_max);
    let tie_abs = 1e-12 * lambda_max;

    // first entering index: |⟨g_j, y⟩| = λ_max (smallest index on ties)
    let mut active: Vec<usize> = Vec::new();
    let mut signs: Vec<f64> = Vec::new();
    let mut entered_at: Vec<f64> = Vec::new();
    let mut ties: Vec<f64> = Vec::new();
    {
        let mut hits: Vec<usize> = Vec::new();
        for (j, &c) in coly.iter().enumerate() {
            let v = match mode {
                SignMode::Signed => libm::fabs(c),
                SignMode::Positive => c,
            };
            if v >= lambda_max - tie_abs {
                hits.push(j);
            }
        }
        if hits.len() > 1 {
            ties.push(lambda_max);
        }
        let j0 = hits[0];
        active.push(j0);
        signs.push(match mode {
            SignMode::Signed => {
                if coly[j0] >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            SignMode::Positive => 1.0,
        });
        entered_at.push(lambda_max);
    }

    let mut segments: Vec<PathSegment> = Vec::new();
    let mut lam = lambda_max;
    let max_iters = 10 * n + 10;
    // (index, sign, λ) of recent departures: blocks the spurious immediate
    // re-entry candidate located exactly at the departure λ
    let mut left_at: Vec<(usize, f64, f64)> = Vec::new();

    for _ in 0..max_iters {
        if active.len() > op.rows() {
            return Err(Error::RankDeficient(
                "active set exceeds the observation dimension".to_string(),
            ));
        }
        let sub = op.gather(&active);
        let qr = Qr::new(&sub);
        qr.require_full_rank(RANK_TOL, "active set Gram in homotopy")?;
        // augmented-system refinement keeps both the residual (breakpoint
        // locations) and the coefficient components (departure events)
        // accurate on nearly collocated columns, where plain Gram solves
        // lose κ² digits
        let zeros_h = vec![0.0; sub.rows()];
        let zeros_k = vec![0.0; active.len()];
        let (r0, offset) = qr.solve_augmented(&sub, y, &zeros_k, 2);
        let (u, slope) = qr.solve_augmented(&sub, &zeros_h, &signs, 2);

        // constraints whose η merely grazed the bound carry a coefficient
        // that stays at noise level; they only pollute the active set and
        // the conditioning, so sweep them out (a swept index may re-enter
        // strictly below the current λ if it was real)
        let coeff_scale = norm_inf(&offset).max(1e-12);
        let mut swept = false;
        for k in (0..active.len()).rev() {
            if entered_at[k] > lam + tie_abs
                && libm::fabs(offset[k] + lam * slope[k]) <= 1e-10 * coeff_scale
            {
                left_at.push((active[k], signs[k], lam));
                active.remove(k);
                signs.remove(k);
                entered_at.remove(k);
                swept = true;
            }
        }
        if swept {
            continue;
        }

        // η_j(λ) = d_j/λ + e_j for inactive columns; the augmented solve
        // returned u = Op_J (Op_J*Op_J)^{-1} s directly in image space.
        // When the active columns interpolate y exactly (noiseless terminal
        // regime) every d_j is zero in exact arithmetic: entering events
        // below are floating-point phantoms and are suppressed.
        let interpolating = norm2(&r0) <= 1e-9 * norm2(y);
        let d = op.tr_matvec(&r0);
        let e = op.tr_matvec(&u);

        // candidate events at or below the current λ; simultaneous crossings
        // are processed one at a time through zero-length segments
        let upper = lam * (1.0 + 1e-12);
        let mut best_lam = f64::NEG_INFINITY;
        let mut best_events: Vec<(usize, bool, f64)> = Vec::new(); // (index, entering, sign)
        let consider = |l: f64, idx: usize, entering: bool, sgn: f64,
                            best_lam: &mut f64,
                            best_events: &mut Vec<(usize, bool, f64)>| {
            if !(l > 0.0) || l > upper {
                return;
            }
            if l > *best_lam + tie_abs {
                *best_lam = l;
                best_events.clear();
                best_events.push((idx, entering, sgn));
            } else if l >= *best_lam - tie_abs {
                best_events.push((idx, entering, sgn));
            }
        };
        if !interpolating {
            for j in 0..n {
                if active.contains(&j) {
                    continue;
                }
                let sides: &[f64] = match mode {
                    SignMode::Signed => &[1.0, -1.0],
                    SignMode::Positive => &[1.0],
                };
                for &s in sides {
                    let denom = s - e[j];
                    if libm::fabs(denom) <= 1e-300 {
                        continue;
                    }
                    let l = d[j] / denom;
                    let spurious = left_at.iter().any(|&(bj, bs, bl)| {
                        bj == j && bs == s && libm::fabs(l - bl) <= tie_abs.max(1e-9 * bl)
                    });
                    if !spurious {
                        consider(l, j, true, s, &mut best_lam, &mut best_events);
                    }
                }
            }
        }
        for (k, &i) in active.iter().enumerate() {
            if slope[k] != 0.0 {
                let l = -offset[k] / slope[k];
                // a freshly entered coefficient vanishes exactly at its entry
                // λ; only genuinely lower crossings are departures
                if l < entered_at[k] - tie_abs.max(1e-9 * entered_at[k]) {
                    consider(l, i, false, 0.0, &mut best_lam, &mut best_events);
                }
            }
        }

        if best_events.is_empty() || best_lam <= guard {
            segments.push(PathSegment {
                lambda_hi: lam,
                lambda_lo: lambda_min,
                indices: active.clone(),
                signs: signs.iter().map(|&s| if s > 0.0 { 1 } else { -1 }).collect(),
                offset,
                slope,
            });
            break;
        }

        let event_lam = best_lam.min(lam);
        segments.push(PathSegment {
            lambda_hi: lam,
            lambda_lo: event_lam,
            indices: active.clone(),
            signs: signs.iter().map(|&s| if s > 0.0 { 1 } else { -1 }).collect(),
            offset,
            slope,
        });

        if best_events.len() > 1 {
            ties.push(event_lam);
            best_events.sort_by_key(|&(i, _, _)| i);
        }
        left_at.retain(|&(_, _, bl)| event_lam >= bl * (1.0 - 1e-6));
        let (idx, entering, sgn) = best_events[0];
        if entering {
            active.push(idx);
            signs.push(sgn);
            entered_at.push(event_lam);
        } else {
            let k = active.iter().position(|&i| i == idx).unwrap();
            left_at.push((idx, signs[k], event_lam));
            active.remove(k);
            signs.remove(k);
            entered_at.remove(k);
        }
        lam = event_lam;
        if active.is_empty() {
            // the path vanished; it stays zero below this λ
            segments.push(PathSegment {
                lambda_hi: lam,
                lambda_lo: lambda_min,
                indices: vec![],
                signs: vec![],
                offset: vec![],
                slope: vec![],
            });
            break;
        }
    }

    Ok(SolutionPath { lambda_max, segments, ties, n_cols: n })
}

pub fn lasso_homotopy(op: &Mat, y: &[f64], lambda_min: f64) -> Result<SolutionPath> {
    homotopy(op, y, lambda_min, SignMode::Signed)
}

// ---------------------------------------------------------------------------
// Certificates

/// Fuchs precertificate `η_F = Op* Op_I^{+,*} s_I`.
pub fn fuchs_precertificate(op: &Mat, support: &SignedSupport) -> Result<CertificateReport> {
    let idx = support.indices();
    if idx.is_empty() {
        return Err(Error::InvalidInput("empty support".to_string()));
    }
    if idx.len() > op.rows() {
        return Err(Error::RankDeficient(
            "support larger than the observation dimension".to_string(),
        ));
    }
    let sub = op.gather(&idx);
    let qr = Qr::new(&sub);
    qr.require_full_rank(RANK_TOL, "Op_I in Fuchs precertificate")?;
    let p = qr.min_norm_transpose_solve(&support.signs_f64());
    Ok(certificate_from_p(op, p, &idx))
}

/// Minimal-norm dual certificate of `a0` for the Basis-Pursuit problem with
/// `y0 = Op a0`. The active-set QP is warm-started from the homotopy dual
/// limit when the path cleanly reproduces `a0`; otherwise (ill-conditioned
/// thin-grid paths) it runs cold from the support equalities. Infeasibility
/// of the dual constraints is exactly a failing source condition.
pub fn minimal_norm_certificate(op: &Mat, a0: &[f64]) -> Result<CertificateReport> {
    let support = SignedSupport::from_vector(a0);
    if support.is_empty() {
        return Err(Error::InvalidInput("a0 must be nonzero".to_string()));
    }
    let y0 = op.matvec(a0);
    let equalities: Vec<(usize, f64)> =
        support.entries().iter().map(|&(i, s)| (i, s as f64)).collect();

    // try the homotopy route; fall back to the cold dual iteration when the
    // path does not reproduce a0 to working accuracy
    let scale = norm_inf(a0).max(1.0);
    let warm_route = homotopy(op, &y0, 0.0, SignMode::Signed).ok().and_then(|path| {
        let limit = path.limit_solution();
        let mut dev = 0.0f64;
        for (l, a) in limit.iter().zip(a0) {
            dev = dev.max(libm::fabs(l - a));
        }
        if dev > 1e-8 * scale {
            return None;
        }
        let seg = path.final_segment()?;
        let sub = op.gather(&seg.indices);
        let qr = Qr::new(&sub);
        let s: Vec<f64> = seg.signs.iter().map(|&s| s as f64).collect();
        let p_start = qr.min_norm_transpose_solve(&s);
        let warm: Vec<(usize, i8)> = seg
            .indices
            .iter()
            .zip(&seg.signs)
            .filter(|&(i, _)| support.sign_of(*i).is_none())
            .map(|(&i, &s)| (i, s))
            .collect();
        let sol =
            qp::min_norm_dual(op, &equalities, true, &warm, &p_start, 10 * op.cols()).ok()?;

        // post-condition: agreement with the homotopy dual limit
        let lam_ref = 1e-8 * path.lambda_max;
        if lam_ref > 0.0 {
            let a_ref = path.eval(lam_ref);
            let mut p_ref = y0.clone();
            axpy(-1.0, &op.matvec(&a_ref), &mut p_ref);
            let mut diff = 0.0;
            for (k, pr) in p_ref.iter().enumerate() {
                diff += (pr / lam_ref - sol.p[k]) * (pr / lam_ref - sol.p[k]);
            }
            if libm::sqrt(diff) > 1e-5 * (1.0 + norm2(&sol.p)) {
                return None;
            }
        }
        Some(sol)
    });

    let sol = match warm_route {
        Some(sol) => sol,
        None => qp::min_norm_dual_cold(op, &equalities, true, 10 * op.cols())?,
    };

    // the certificate must actually certify: source condition fails when the
    // projection cannot keep the off-support values inside the bound
    let worst = sol
        .eta
        .iter()
        .enumerate()
        .filter(|&(j, _)| support.sign_of(j).is_none())
        .fold(0.0f64, |m, (_, &e)| m.max(libm::fabs(e)));
    if worst > 1.0 + 10.0 * SAT_TOL {
        return Err(Error::Infeasible(format!(
            "source condition fails: no dual certificate interpolates the signed \
             support (best attempt exceeds the bound by {:.3e})",
            worst - 1.0
        )));
    }

    Ok(certificate_from_p(op, sol.p, &support.indices()))
}

/// Outcome of the closed-form extended-support test of a candidate `(J, s_J)`.
#[derive(Debug, Clone)]
pub struct ExtendedSupportCheck {
    pub passes: bool,
    /// `v_J = (Op_J* Op_J)^{-1} s_J`, parallel to the candidate entries.
    pub v: Vec<f64>,
    pub sign_condition_ok: bool,
    /// `‖Op_{J^c}* Op_J v_J‖∞`.
    pub off_candidate_max: f64,
    /// The certificate `η₀ = Op* Op_J^{+,*} s_J` when the test passes.
    pub eta0: Option<CertificateReport>,
}

/// Closed-form test: `(J, s_J)` is the extended signed support of `a0` iff
/// for `v_J = (Op_J* Op_J)^{-1} s_J` every extension entry has `v_j = 0` or
/// `s_j = −sign(v_j)`, and `‖Op_{J^c}* Op_J v_J‖∞ < 1`.
pub fn extended_support_check(
    op: &Mat,
    a0: &[f64],
    candidate: &SignedSupport,
) -> Result<ExtendedSupportCheck> {
    let support = SignedSupport::from_vector(a0);
    if !support.is_contained_in(candidate) {
        return Err(Error::InvalidInput(
            "candidate must contain the signed support of a0".to_string(),
        ));
    }
    let idx = candidate.indices();
    if idx.len() > op.rows() {
        return Err(Error::RankDeficient(
            "candidate has more columns than observation dimensions".to_string(),
        ));
    }
    let sub = op.gather(&idx);
    let qr = Qr::new(&sub);
    qr.require_full_rank(RANK_TOL, "Op_J in extended-support check")?;
    let v = qr.solve_gram(&candidate.signs_f64());

    let ztol = ZERO_TOL_REL * norm_inf(&v).max(1e-300);
    let mut sign_ok = true;
    for (k, &(j, s)) in candidate.entries().iter().enumerate() {
        if support.sign_of(j).is_some() {
            continue;
        }
        if libm::fabs(v[k]) > ztol && (s as f64) * v[k] > 0.0 {
            sign_ok = false;
        }
    }

    let p0 = sub.matvec(&v);
    let eta = op.tr_matvec(&p0);
    let off_max = eta
        .iter()
        .enumerate()
        .filter(|(j, _)| !idx.contains(j))
        .fold(0.0f64, |m, (_, &e)| m.max(libm::fabs(e)));

    let passes = sign_ok && off_max < 1.0;
    let eta0 = passes.then(|| certificate_from_p(op, p0, &support.indices()));
    Ok(ExtendedSupportCheck {
        passes,
        v,
        sign_condition_ok: sign_ok,
        off_candidate_max: off_max,
        eta0,
    })
}

#[derive(Debug, Clone)]
pub struct LowNoiseSolution {
    pub a: Vec<f64>,
    /// Whether the closed-form candidate satisfies the full KKT system of
    /// `P_λ(y0 + w)` (i.e. `(λ, w)` is inside the low-noise regime).
    pub kkt_valid: bool,
    /// False when some `v_j = 0` on the extension (the genericity
    /// hypothesis behind the closed form).
    pub hypothesis_ok: bool,
    /// Extended signed support used by the formula.
    pub extended: SignedSupport,
}

/// Closed form of the low-noise solution:
/// `a_J = a0_J + Op_J^+ w − λ (Op_J* Op_J)^{-1} sign(η0_J)`.
pub fn low_noise_solution(
    op: &Mat,
    a0: &[f64],
    w: &[f64],
    lambda: f64,
) -> Result<LowNoiseSolution> {
    if lambda <= 0.0 {
        return Err(Error::InvalidInput("lambda must be positive".to_string()));
    }
    let support = SignedSupport::from_vector(a0);
    let cert = minimal_norm_certificate(op, a0)?;
    let extended = cert.saturation.clone();
    let idx = extended.indices();
    let s = extended.signs_f64();

    if idx.len() > op.rows() {
        return Err(Error::RankDeficient(
            "extended support larger than the observation dimension".to_string(),
        ));
    }
    let sub = op.gather(&idx);
    let qr = Qr::new(&sub);
    qr.require_full_rank(RANK_TOL, "Op_J in low-noise formula")?;
    let v = qr.solve_gram(&s);
    let correction = qr.solve_ls(w);

    let ztol = ZERO_TOL_REL * norm_inf(&v).max(1e-300);
    let hypothesis_ok = extended
        .entries()
        .iter()
        .enumerate()
        .filter(|(_, &(j, _))| support.sign_of(j).is_none())
        .all(|(k, _)| libm::fabs(v[k]) > ztol);

    let mut a = vec![0.0; op.cols()];
    for (k, &j) in idx.iter().enumerate() {
        a[j] = a0[j] + correction[k] - lambda * v[k];
    }

    // full KKT check at y = y0 + w
    let mut y = op.matvec(a0);
    axpy(1.0, w, &mut y);
    let mut r = y.clone();
    axpy(-1.0, &op.matvec(&a), &mut r);
    let eta: Vec<f64> = op.tr_matvec(&r).iter().map(|&c| c / lambda).collect();
    let mut kkt_valid = true;
    for (j, &aj) in a.iter().enumerate() {
        if aj != 0.0 {
            if libm::fabs(eta[j] - if aj > 0.0 { 1.0 } else { -1.0 }) > 1e-7 {
                kkt_valid = false;
            }
        } else if libm::fabs(eta[j]) > 1.0 + 1e-9 {
            kkt_valid = false;
        }
    }
    // inside the low-noise regime the signs on the whole extended
    // support equal s_J
    for (k, &j) in idx.iter().enumerate() {
        if a[j] * s[k] < 0.0 {
            kkt_valid = false;
        }
    }

    Ok(LowNoiseSolution { a, kkt_valid, hypothesis_ok, extended })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Identifiability {
    Identifiable,
    NotASolution,
    Ambiguous,
}

/// Decides whether `a0` is the unique Basis-Pursuit solution of its own
/// noiseless observations.
pub fn identifiability_test(op: &Mat, a0: &[f64]) -> Identifiability {
    let support = SignedSupport::from_vector(a0);
    if support.is_empty() {
        // zero vector: trivially the unique solution of Op a = 0
        return Identifiability::Identifiable;
    }
    let y0 = op.matvec(a0);
    let path = match homotopy(op, &y0, 0.0, SignMode::Signed) {
        Ok(p) => p,
        Err(Error::RankDeficient(_)) => return Identifiability::Ambiguous,
        Err(_) => return Identifiability::NotASolution,
    };
    let limit = path.limit_solution();
    let scale = norm_inf(a0).max(1.0);
    let mut dev = 0.0f64;
    for (l, a) in limit.iter().zip(a0) {
        dev = dev.max(libm::fabs(l - a));
    }
    if dev > 1e-6 * scale {
        return Identifiability::NotASolution;
    }

    let cert = match minimal_norm_certificate(op, a0) {
        Ok(c) => c,
        Err(Error::Infeasible(_)) => return Identifiability::NotASolution,
        Err(Error::RankDeficient(_)) => return Identifiability::Ambiguous,
        Err(_) => return Identifiability::Ambiguous,
    };

    // degenerate saturation: the set must be stable against a 10x coarser
    // reading of |η| = 1, and Op_J must keep full rank
    let j_idx = cert.saturation.indices();
    let loose: Vec<usize> = cert
        .eta
        .iter()
        .enumerate()
        .filter(|&(_, &e)| libm::fabs(e) >= 1.0 - 10.0 * SAT_TOL)
        .map(|(j, _)| j)
        .collect();
    if loose != j_idx {
        return Identifiability::Ambiguous;
    }
    let qr = Qr::new(&op.gather(&j_idx));
    if qr.rank(RANK_TOL) < j_idx.len() {
        return Identifiability::Ambiguous;
    }

    // sign conditions of the closed-form characterization certify uniqueness
    match extended_support_check(op, a0, &cert.saturation) {
        Ok(chk) if chk.passes => Identifiability::Identifiable,
        Ok(_) => Identifiability::Ambiguous,
        Err(_) => Identifiability::Ambiguous,
    }
}

/// Smallest λ for which the zero vector is optimal.
pub fn lambda_max(op: &Mat, y: &[f64], mode: SignMode) -> f64 {
    let c = op.tr_matvec(y);
    match mode {
        SignMode::Signed => norm_inf(&c),
        SignMode::Positive => c.iter().fold(0.0f64, |m, &x| m.max(x)),
    }
}

/// `‖Op*(y − Op a) − λ g‖∞` minimized over subgradients `g ∈ ∂‖a‖₁`.
pub fn kkt_residual(op: &Mat, y: &[f64], lambda: f64, a: &[f64], mode: SignMode) -> f64 {
    let mut r = y.to_vec();
    axpy(-1.0, &op.matvec(a), &mut r);
    let c = op.tr_matvec(&r);
    let mut worst = 0.0f64;
    for (j, &cj) in c.iter().enumerate() {
        let g = if a[j] > 0.0 {
            1.0
        } else if a[j] < 0.0 {
            -1.0
        } else {
            match mode {
                SignMode::Signed => (cj / lambda).clamp(-1.0, 1.0),
                SignMode::Positive => (cj / lambda).min(1.0),
            }
        };
        worst = worst.max(libm::fabs(cj - lambda * g));
    }
    worst
}
