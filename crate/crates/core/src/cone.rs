//! The cone-constrained LASSO behind Continuous Basis-Pursuit.
//!
//! A pair `(a, b)` with `a_i ≥ 0`, `|b_i| ≤ (h/2) a_i` encodes spikes of
//! amplitude `a_i` shifted by `b_i / a_i` from their grid node. The linear
//! map `H_h : (u, v) ↦ (u + v, (h/2)(u − v))` turns the cone constraint into
//! plain nonnegativity, and the problem into a positive LASSO on the
//! assembled operator `Λ = [A + (h/2)B,  A − (h/2)B]`.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::ImageVector;
use crate::lasso::{self, SignMode, SolutionPath, SAT_TOL, ZERO_TOL_REL};
use crate::linalg::{axpy, norm2, norm_inf, Mat, Qr};
use crate::qp;

const RANK_TOL: f64 = 1e-11;

/// Element of the cone `C_h^P`: amplitudes and first-order shifts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConePair {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub h: f64,
}

impl ConePair {
    pub fn new(a: Vec<f64>, b: Vec<f64>, h: f64) -> Result<ConePair> {
        if a.len() != b.len() {
            return Err(Error::InvalidInput("a and b must have equal length".to_string()));
        }
        if h <= 0.0 {
            return Err(Error::InvalidInput("stepsize h must be positive".to_string()));
        }
        let pair = ConePair { a, b, h };
        pair.check_cone(1e-9)?;
        Ok(pair)
    }

    fn check_cone(&self, tol: f64) -> Result<()> {
        let scale = norm_inf(&self.a).max(1.0);
        for (i, (&ai, &bi)) in self.a.iter().zip(&self.b).enumerate() {
            if ai < -tol * scale || libm::fabs(bi) > 0.5 * self.h * ai + tol * scale {
                return Err(Error::InvalidInput(format!(
                    "entry {i} outside the cone: a = {ai}, b = {bi}, h = {}",
                    self.h
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// Recovered spike position for grid node `i`: `i·h + b_i/a_i`,
    /// with `b_i/a_i = 0` when `a_i = 0`.
    pub fn position(&self, i: usize) -> f64 {
        let base = i as f64 * self.h;
        if self.a[i] == 0.0 {
            base
        } else {
            base + self.b[i] / self.a[i]
        }
    }

    /// Active spikes as `(position, amplitude)` pairs.
    pub fn measure(&self) -> Vec<(f64, f64)> {
        (0..self.len())
            .filter(|&i| self.a[i] != 0.0)
            .map(|i| (self.position(i), self.a[i]))
            .collect()
    }

    pub fn support(&self, tol: f64) -> UpDownSupport {
        let p = self.to_positive();
        UpDownSupport {
            up: p.u.iter().enumerate().filter(|&(_, &x)| x > tol).map(|(i, _)| i).collect(),
            down: p.v.iter().enumerate().filter(|&(_, &x)| x > tol).map(|(i, _)| i).collect(),
        }
    }

    pub fn to_positive(&self) -> PositivePair {
        let u = self
            .a
            .iter()
            .zip(&self.b)
            .map(|(&a, &b)| 0.5 * (a + 2.0 * b / self.h))
            .collect();
        let v = self
            .a
            .iter()
            .zip(&self.b)
            .map(|(&a, &b)| 0.5 * (a - 2.0 * b / self.h))
            .collect();
        PositivePair { u, v }
    }
}

/// The `(u, v)` coordinates of a cone pair: both entrywise nonnegative.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivePair {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// `(I↑, I↓)`: nodes whose spike does not sit on the left (resp. right)
/// half-grid point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UpDownSupport {
    pub up: Vec<usize>,
    pub down: Vec<usize>,
}

/// `H_h`: `(u, v) ↦ (a, b) = (u + v, (h/2)(u − v))`.
pub fn hh_map(u: &[f64], v: &[f64], h: f64) -> Result<ConePair> {
    if u.len() != v.len() {
        return Err(Error::InvalidInput("u and v must have equal length".to_string()));
    }
    let scale = norm_inf(u).max(norm_inf(v)).max(1.0);
    if u.iter().chain(v).any(|&x| x < -1e-12 * scale) {
        return Err(Error::InvalidInput("hh_map requires nonnegative inputs".to_string()));
    }
    let a = u.iter().zip(v).map(|(&x, &y)| x + y).collect();
    let b = u.iter().zip(v).map(|(&x, &y)| 0.5 * h * (x - y)).collect();
    Ok(ConePair { a, b, h })
}

/// Inverse of `H_h` on the cone.
pub fn hh_inverse(pair: &ConePair) -> Result<PositivePair> {
    pair.check_cone(1e-9)?;
    Ok(pair.to_positive())
}

/// `Λ = [A + (h/2)B,  A − (h/2)B]` (2P columns).
pub fn assemble_lambda(op_a: &Mat, op_b: &Mat, h: f64) -> Mat {
    assert_eq!(op_a.cols(), op_b.cols());
    assert_eq!(op_a.rows(), op_b.rows());
    let p = op_a.cols();
    let mut m = Mat::zeros(op_a.rows(), 0);
    for j in 0..p {
        let mut c = op_a.col(j).to_vec();
        axpy(0.5 * h, op_b.col(j), &mut c);
        m.push_col(&c);
    }
    for j in 0..p {
        let mut c = op_a.col(j).to_vec();
        axpy(-0.5 * h, op_b.col(j), &mut c);
        m.push_col(&c);
    }
    m
}

/// Dual certificate data for the cone problem.
#[derive(Debug, Clone, Serialize)]
pub struct CbpCertificate {
    pub q: ImageVector,
    /// `(A* + (h/2)B*) q` per grid node.
    pub eta_up: Vec<f64>,
    /// `(A* − (h/2)B*) q` per grid node.
    pub eta_down: Vec<f64>,
    pub sat_up: Vec<usize>,
    pub sat_down: Vec<usize>,
    pub norm_q: f64,
    /// `max_k (A*q)_k + (h/2)|(B*q)_k|`; feasibility means ≤ 1 + SAT_TOL.
    pub feas_max: f64,
}

fn certificate_from_q(op_a: &Mat, op_b: &Mat, h: f64, q: Vec<f64>) -> CbpCertificate {
    let eta_a = op_a.tr_matvec(&q);
    let eta_b = op_b.tr_matvec(&q);
    let eta_up: Vec<f64> =
        eta_a.iter().zip(&eta_b).map(|(&x, &d)| x + 0.5 * h * d).collect();
    let eta_down: Vec<f64> =
        eta_a.iter().zip(&eta_b).map(|(&x, &d)| x - 0.5 * h * d).collect();
    let sat = |eta: &[f64]| {
        eta.iter()
            .enumerate()
            .filter(|&(_, &e)| e >= 1.0 - SAT_TOL)
            .map(|(i, _)| i)
            .collect::<Vec<_>>()
    };
    let feas_max = eta_a
        .iter()
        .zip(&eta_b)
        .fold(f64::NEG_INFINITY, |m, (&x, &d)| m.max(x + 0.5 * h * libm::fabs(d)));
    CbpCertificate {
        sat_up: sat(&eta_up),
        sat_down: sat(&eta_down),
        norm_q: norm2(&q),
        q,
        eta_up,
        eta_down,
        feas_max,
    }
}

/// Positive-LASSO solve of the reparametrized problem, mapped back through
/// `H_h`. Split degeneracies (identical up/down columns) are canonicalized
/// to `b = 0`.
pub fn solve_cbp(
    op_a: &Mat,
    op_b: &Mat,
    y: &[f64],
    lambda: f64,
    h: f64,
    tol: f64,
) -> Result<ConePair> {
    if h <= 0.0 {
        return Err(Error::InvalidInput("stepsize h must be positive".to_string()));
    }
    let lam_mat = assemble_lambda(op_a, op_b, h);
    let x = lasso::fista(&lam_mat, y, lambda, tol, SignMode::Positive)?;
    let p = op_a.cols();
    let mut u = x[..p].to_vec();
    let mut v = x[p..].to_vec();
    for j in 0..p {
        let cu = lam_mat.col(j);
        let cd = lam_mat.col(p + j);
        let mut diff = 0.0;
        for (x1, x2) in cu.iter().zip(cd) {
            diff += (x1 - x2) * (x1 - x2);
        }
        if libm::sqrt(diff) <= 1e-12 * norm2(cu) {
            let m = 0.5 * (u[j] + v[j]);
            u[j] = m;
            v[j] = m;
        }
    }
    hh_map(&u, &v, h)
}

/// Homotopy path of the positive LASSO on an assembled operator.
pub fn positive_lasso_homotopy(
    lam_mat: &Mat,
    y: &[f64],
    lambda_min: f64,
) -> Result<SolutionPath> {
    lasso::homotopy(lam_mat, y, lambda_min, SignMode::Positive)
}

/// Split a 2P-coordinate positive vector into the `(I↑, I↓)` support.
pub fn split_updown(x: &[f64], p: usize, tol: f64) -> UpDownSupport {
    UpDownSupport {
        up: (0..p).filter(|&j| x[j] > tol).collect(),
        down: (0..p).filter(|&j| x[p + j] > tol).collect(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CbpOptimality {
    pub pass: bool,
    /// Name of the first violated optimality condition, when failing.
    pub violated: Option<&'static str>,
    /// Strict-inequality diagnostics guaranteeing uniqueness.
    pub strict_ok: bool,
    /// λ = 0 only: the printed λ=0 conditions (equality on I↑ alone) and the
    /// λ>0-shaped conditions (equality on both I↑ and I↓) disagree.
    pub forms_disagree: bool,
}

/// Optimality check for `(a, b)` at the given λ. For λ > 0 the dual vector
/// is `q_λ = (y − Aa − Bb)/λ`; for λ = 0 the minimal-norm dual of the
/// positive homotopy is used.
pub fn cbp_optimality_check(
    op_a: &Mat,
    op_b: &Mat,
    y: &[f64],
    lambda: f64,
    pair: &ConePair,
    tol: f64,
) -> Result<(CbpCertificate, CbpOptimality)> {
    pair.check_cone(1e-9)?;
    let h = pair.h;
    let pos = pair.to_positive();
    let utol = ZERO_TOL_REL * norm_inf(&pair.a).max(1.0);
    let i_up: Vec<usize> =
        (0..pair.len()).filter(|&i| pos.u[i] > utol).collect();
    let i_down: Vec<usize> =
        (0..pair.len()).filter(|&i| pos.v[i] > utol).collect();

    let mut resid = y.to_vec();
    axpy(-1.0, &op_a.matvec(&pair.a), &mut resid);
    axpy(-1.0, &op_b.matvec(&pair.b), &mut resid);

    if lambda > 0.0 {
        let q: Vec<f64> = resid.iter().map(|&r| r / lambda).collect();
        let cert = certificate_from_q(op_a, op_b, h, q);
        let mut violated = None;
        let max_up = cert.eta_up.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let max_down = cert.eta_down.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        if max_up > 1.0 + tol {
            violated = Some("max (A* + h/2 B*) q <= 1");
        } else if max_down > 1.0 + tol {
            violated = Some("max (A* - h/2 B*) q <= 1");
        } else if i_up.iter().any(|&i| libm::fabs(cert.eta_up[i] - 1.0) > tol) {
            violated = Some("(A* + h/2 B*) q = 1 on I_up");
        } else if i_down.iter().any(|&i| libm::fabs(cert.eta_down[i] - 1.0) > tol) {
            violated = Some("(A* - h/2 B*) q = 1 on I_down");
        }
        let strict_ok = strictness_ok(&cert, &i_up, &i_down, pair.len());
        let opt = CbpOptimality {
            pass: violated.is_none(),
            violated,
            strict_ok,
            forms_disagree: false,
        };
        return Ok((cert, opt));
    }

    // λ = 0: the pair must reproduce the observations and admit a feasible
    // dual with the printed saturation pattern
    if norm2(&resid) > tol * norm2(y).max(1.0) {
        let q = vec![0.0; y.len()];
        let cert = certificate_from_q(op_a, op_b, h, q);
        return Ok((
            cert,
            CbpOptimality {
                pass: false,
                violated: Some("A a + B b = y"),
                strict_ok: false,
                forms_disagree: false,
            },
        ));
    }
    let lam_mat = assemble_lambda(op_a, op_b, h);
    let path = positive_lasso_homotopy(&lam_mat, y, 0.0)?;
    let limit = path.limit_solution();
    let mass: f64 = pair.a.iter().sum();
    let mass_opt: f64 = limit.iter().sum();
    let objective_optimal = mass <= mass_opt + 1e-9 * mass_opt.max(1.0);

    let seg = path.final_segment().expect("path nonempty");
    let sub = lam_mat.gather(&seg.indices);
    let qr = Qr::new(&sub);
    let ones = vec![1.0; seg.indices.len()];
    let q_hom = if seg.indices.is_empty() { vec![0.0; y.len()] } else {
        qr.min_norm_transpose_solve(&ones)
    };
    let cert = certificate_from_q(op_a, op_b, h, q_hom);

    // as printed: equality only on I↑; λ>0-shaped: equality on I↑ and I↓
    let printed_ok = objective_optimal
        && i_up.iter().all(|&i| libm::fabs(cert.eta_up[i] - 1.0) <= SAT_TOL)
        && cert.feas_max <= 1.0 + SAT_TOL;
    let both_ok = printed_ok
        && i_down.iter().all(|&i| libm::fabs(cert.eta_down[i] - 1.0) <= SAT_TOL);
    let strict_ok = strictness_ok(&cert, &i_up, &i_down, pair.len());
    let opt = CbpOptimality {
        pass: printed_ok,
        violated: if printed_ok { None } else { Some("lambda = 0 optimality") },
        strict_ok,
        forms_disagree: printed_ok != both_ok,
    };
    Ok((cert, opt))
}

fn strictness_ok(
    cert: &CbpCertificate,
    i_up: &[usize],
    i_down: &[usize],
    p: usize,
) -> bool {
    for k in 0..p {
        let in_up = i_up.contains(&k);
        let in_down = i_down.contains(&k);
        if !in_up && !in_down {
            // feasibility strictly interior off the support
            if cert.eta_up[k].max(cert.eta_down[k]) >= 1.0 - SAT_TOL {
                return false;
            }
        } else if in_down && !in_up {
            if cert.eta_up[k] >= 1.0 - SAT_TOL {
                return false;
            }
        } else if in_up && !in_down {
            if cert.eta_down[k] >= 1.0 - SAT_TOL {
                return false;
            }
        }
    }
    true
}

/// Result of the closed-form extended-support test of a candidate
/// `(J↑, J↓)` for the cone problem.
#[derive(Debug, Clone)]
pub struct CbpLemmaCheck {
    pub passes: bool,
    /// `ξ = (Λ_J* Λ_J)^{-1} 𝟙`; the optimality multipliers are `−ξ`.
    pub xi: Vec<f64>,
    pub sign_condition_ok: bool,
    pub off_candidate_max: f64,
    /// `q = Λ_J (Λ_J* Λ_J)^{-1} 𝟙` when the test passes.
    pub certificate: Option<CbpCertificate>,
}

/// Columns of `Λ` selected by a `(J↑, J↓)` candidate: up-part first.
fn gather_updown(lam_mat: &Mat, p: usize, cand: &UpDownSupport) -> Mat {
    let mut idx: Vec<usize> = cand.up.clone();
    idx.extend(cand.down.iter().map(|&j| p + j));
    lam_mat.gather(&idx)
}

/// Closed-form test: `(J↑, J↓) ⊇ (I↑, I↓)` is the extended support iff the
/// multiplier vector `−ξ` is nonnegative on the extension and the certificate
/// `q = Λ_J ξ` stays strictly below 1 off the candidate.
pub fn cbp_extended_support_check(
    op_a: &Mat,
    op_b: &Mat,
    h: f64,
    support: &UpDownSupport,
    candidate: &UpDownSupport,
) -> Result<CbpLemmaCheck> {
    let p = op_a.cols();
    if !support.up.iter().all(|i| candidate.up.contains(i))
        || !support.down.iter().all(|i| candidate.down.contains(i))
    {
        return Err(Error::InvalidInput(
            "candidate must contain the (I_up, I_down) support".to_string(),
        ));
    }
    let lam_mat = assemble_lambda(op_a, op_b, h);
    if candidate.up.len() + candidate.down.len() > lam_mat.rows() {
        return Err(Error::RankDeficient(
            "candidate has more columns than observation dimensions".to_string(),
        ));
    }
    let sub = gather_updown(&lam_mat, p, candidate);
    let qr = Qr::new(&sub);
    qr.require_full_rank(RANK_TOL, "Lambda_J in cone extended-support check")?;
    let ones = vec![1.0; sub.cols()];
    let xi = qr.solve_gram(&ones);

    let ztol = ZERO_TOL_REL * norm_inf(&xi).max(1e-300);
    let mut sign_ok = true;
    for (k, &j) in candidate.up.iter().enumerate() {
        if !support.up.contains(&j) && xi[k] > ztol {
            sign_ok = false;
        }
    }
    let nu = candidate.up.len();
    for (k, &j) in candidate.down.iter().enumerate() {
        if !support.down.contains(&j) && xi[nu + k] > ztol {
            sign_ok = false;
        }
    }

    let q = sub.matvec(&xi);
    let cert = certificate_from_q(op_a, op_b, h, q);
    let mut off_max = f64::NEG_INFINITY;
    for j in 0..p {
        if !candidate.up.contains(&j) {
            off_max = off_max.max(cert.eta_up[j]);
        }
        if !candidate.down.contains(&j) {
            off_max = off_max.max(cert.eta_down[j]);
        }
    }
    let passes = sign_ok && off_max < 1.0;
    Ok(CbpLemmaCheck {
        passes,
        xi,
        sign_condition_ok: sign_ok,
        off_candidate_max: off_max,
        certificate: passes.then_some(cert),
    })
}

/// Minimal-norm dual certificate of a cone solution `(a0, b0)`: active-set
/// QP over the dual polytope with equalities on `(I↑, I↓)`, cross-checked
/// against the closed-form extended-support test. Infeasibility of
/// the QP is exactly a failing source condition, so it doubles as the
/// post-hoc check that `(a0, b0)` solves the cone Basis-Pursuit of its own
/// observations.
pub fn cbp_minimal_norm_certificate(
    op_a: &Mat,
    op_b: &Mat,
    a0: &[f64],
    b0: &[f64],
    h: f64,
) -> Result<CbpCertificate> {
    let pair = ConePair::new(a0.to_vec(), b0.to_vec(), h)?;
    let p = op_a.cols();
    let pos = pair.to_positive();
    let utol = ZERO_TOL_REL * norm_inf(a0).max(1.0);
    let lam_mat = assemble_lambda(op_a, op_b, h);

    let mut equalities: Vec<(usize, f64)> = Vec::new();
    for i in 0..p {
        if pos.u[i] > utol {
            equalities.push((i, 1.0));
        }
    }
    for i in 0..p {
        if pos.v[i] > utol {
            equalities.push((p + i, 1.0));
        }
    }
    let sol = qp::min_norm_dual_cold(&lam_mat, &equalities, false, 10 * 2 * p)?;
    let feas = sol
        .eta
        .iter()
        .enumerate()
        .filter(|&(j, _)| !equalities.iter().any(|&(e, _)| e == j))
        .fold(f64::NEG_INFINITY, |m, (_, &e)| m.max(e));
    if feas > 1.0 + 10.0 * SAT_TOL {
        return Err(Error::Infeasible(format!(
            "source condition fails: no dual certificate interpolates (I_up, I_down) \
             (best attempt exceeds the bound by {:.3e})",
            feas - 1.0
        )));
    }
    let cert = certificate_from_q(op_a, op_b, h, sol.p);

    // cross-check against the closed-form candidate when it passes
    let support = UpDownSupport {
        up: (0..p).filter(|&i| pos.u[i] > utol).collect(),
        down: (0..p).filter(|&i| pos.v[i] > utol).collect(),
    };
    let candidate = UpDownSupport { up: cert.sat_up.clone(), down: cert.sat_down.clone() };
    match cbp_extended_support_check(op_a, op_b, h, &support, &candidate) {
        Ok(chk) => {
            if let Some(closed) = &chk.certificate {
                let mut diff = cert.q.clone();
                axpy(-1.0, &closed.q, &mut diff);
                if norm2(&diff) > 1e-7 * (1.0 + cert.norm_q) {
                    return Err(Error::ProbeFailure(format!(
                        "cone minimal-norm certificate deviates from the closed form by {:.3e}",
                        norm2(&diff)
                    )));
                }
            }
        }
        // degenerate saturation patterns (e.g. B = 0 makes the up and down
        // columns coincide) have no full-rank closed-form candidate
        Err(Error::RankDeficient(_)) => {}
        Err(e) => return Err(e),
    }
    Ok(cert)
}

#[derive(Debug, Clone)]
pub struct CbpLowNoiseSolution {
    pub pair: ConePair,
    pub kkt_valid: bool,
    pub hypothesis_ok: bool,
    pub extended: UpDownSupport,
}

/// Closed form of the cone low-noise solution:
/// `(a_λ; b_λ) = (a0; b0) + H_h Λ_J^+ w − λ H_h (Λ_J* Λ_J)^{-1} 𝟙`.
pub fn cbp_low_noise_solution(
    op_a: &Mat,
    op_b: &Mat,
    a0: &[f64],
    b0: &[f64],
    w: &[f64],
    lambda: f64,
    h: f64,
) -> Result<CbpLowNoiseSolution> {
    if lambda <= 0.0 {
        return Err(Error::InvalidInput("lambda must be positive".to_string()));
    }
    let p = op_a.cols();
    let pair0 = ConePair::new(a0.to_vec(), b0.to_vec(), h)?;
    let pos0 = pair0.to_positive();
    let utol = ZERO_TOL_REL * norm_inf(a0).max(1.0);

    let cert = cbp_minimal_norm_certificate(op_a, op_b, a0, b0, h)?;
    let extended = UpDownSupport { up: cert.sat_up.clone(), down: cert.sat_down.clone() };

    let lam_mat = assemble_lambda(op_a, op_b, h);
    let sub = gather_updown(&lam_mat, p, &extended);
    let qr = Qr::new(&sub);
    qr.require_full_rank(RANK_TOL, "Lambda_J in cone low-noise formula")?;
    let ones = vec![1.0; sub.cols()];
    let xi = qr.solve_gram(&ones);
    let corr = qr.solve_ls(w);

    let ztol = ZERO_TOL_REL * norm_inf(&xi).max(1e-300);
    let mut hypothesis_ok = true;
    let mut x = vec![0.0; 2 * p];
    for (k, &j) in extended.up.iter().enumerate() {
        x[j] = pos0.u[j] + corr[k] - lambda * xi[k];
        if pos0.u[j] <= utol && -xi[k] <= ztol {
            hypothesis_ok = false;
        }
    }
    let nu = extended.up.len();
    for (k, &j) in extended.down.iter().enumerate() {
        x[p + j] = pos0.v[j] + corr[nu + k] - lambda * xi[nu + k];
        if pos0.v[j] <= utol && -xi[nu + k] <= ztol {
            hypothesis_ok = false;
        }
    }

    // positive-LASSO KKT at y = y0 + w
    let mut y = op_a.matvec(a0);
    axpy(1.0, &op_b.matvec(b0), &mut y);
    axpy(1.0, w, &mut y);
    let mut r = y.clone();
    axpy(-1.0, &lam_mat.matvec(&x), &mut r);
    let c = lam_mat.tr_matvec(&r);
    let mut kkt_valid = x.iter().all(|&xi| xi >= 0.0);
    for (j, &cj) in c.iter().enumerate() {
        if x[j] > 0.0 {
            if libm::fabs(cj - lambda) > 1e-7 * lambda.max(1.0) {
                kkt_valid = false;
            }
        } else if cj > lambda * (1.0 + 1e-9) {
            kkt_valid = false;
        }
    }

    let u: Vec<f64> = x[..p].iter().map(|&t| t.max(0.0)).collect();
    let v: Vec<f64> = x[p..].iter().map(|&t| t.max(0.0)).collect();
    let pair = if kkt_valid {
        hh_map(&u, &v, h)?
    } else {
        // outside the regime the formula may leave the cone; report the raw
        // candidate clamped to nonnegativity
        ConePair {
            a: u.iter().zip(&v).map(|(&a, &b)| a + b).collect(),
            b: u.iter().zip(&v).map(|(&a, &b)| 0.5 * h * (a - b)).collect(),
            h,
        }
    };
    Ok(CbpLowNoiseSolution { pair, kkt_valid, hypothesis_ok, extended })
}
