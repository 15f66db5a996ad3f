//! Minimum-norm point of the dual feasible polytope.
//!
//! Solves `min ½‖p‖²` subject to
//!   `⟨g_i, p⟩ = b_i`      for the equality constraints (support rows), and
//!   `σ ⟨g_j, p⟩ ≤ 1`      for every other column `j` (σ ∈ {−1,+1} when
//!                          `two_sided`, σ = +1 otherwise),
//! where the `g`'s are the columns of the constraint matrix. This is the
//! projection problem defining minimal-norm dual certificates.
//!
//! The method is a primal active-set iteration: each working set yields the
//! minimum-norm point of an affine subspace (one QR solve); wrong-sign
//! multipliers leave the working set, blocking constraints on the segment
//! towards the subspace minimizer enter it. The caller supplies a feasible
//! start (in practice the homotopy dual limit, which is already optimal up
//! to rounding, so the loop usually certifies in one pass).

use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm2, Mat, Qr};

const FEAS_TOL: f64 = 1e-10;
const MULT_TOL: f64 = 1e-10;
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct QpSolution {
    /// Minimum-norm dual point.
    pub p: Vec<f64>,
    /// `η = Gᵀ p` over all columns.
    pub eta: Vec<f64>,
    /// Inequality constraints active at the solution, as `(column, side)`.
    pub active: Vec<(usize, i8)>,
    pub iterations: usize,
}

struct Working {
    /// (column index, side); side = 0 marks an equality row.
    members: Vec<(usize, i8)>,
    rhs: Vec<f64>,
}

impl Working {
    fn sub(&self, cols: &Mat) -> Mat {
        let idx: Vec<usize> = self.members.iter().map(|&(j, _)| j).collect();
        cols.gather(&idx)
    }

    fn contains(&self, j: usize) -> bool {
        self.members.iter().any(|&(k, _)| k == j)
    }
}

/// Cold-start dual iteration: no feasible point is needed. Starting from the
/// minimum-norm point of the equality rows, repeatedly add the most violated
/// inequality and drop working-set members with wrong-sign multipliers. For
/// the strictly convex objective this terminates at the projection onto the
/// polytope; the pivot cap guards the degenerate cases.
pub fn min_norm_dual_cold(
    cols: &Mat,
    equalities: &[(usize, f64)],
    two_sided: bool,
    max_pivots: usize,
) -> Result<QpSolution> {
    let mut work = Working {
        members: equalities.iter().map(|&(i, _)| (i, 0i8)).collect(),
        rhs: equalities.iter().map(|&(_, b)| b).collect(),
    };
    let eq_count = work.members.len();

    let mut iterations = 0;
    loop {
        iterations += 1;
        if iterations > max_pivots {
            return Err(Error::IterationLimit {
                what: "dual active-set QP".to_string(),
                residual: f64::NAN,
            });
        }
        if work.members.len() > cols.rows() {
            // a working set beyond the ambient dimension cannot be independent
            work.members.pop();
            work.rhs.pop();
            continue;
        }
        let sub = work.sub(cols);
        let qr = Qr::new(&sub);
        if qr.rank(RANK_TOL) < sub.cols() {
            if work.members.len() > eq_count {
                work.members.pop();
                work.rhs.pop();
                continue;
            }
            return Err(Error::Infeasible(
                "equality constraints of the dual QP are linearly dependent".to_string(),
            ));
        }
        let p = qr.min_norm_transpose_solve(&work.rhs);
        let coeff = qr.solve_gram(&work.rhs);

        // wrong-sign multipliers leave first
        let mut drop: Option<(usize, f64)> = None;
        for (k, &(_, s)) in work.members.iter().enumerate().skip(eq_count) {
            let viol = s as f64 * coeff[k];
            if viol > MULT_TOL && drop.map(|(_, v)| viol > v).unwrap_or(true) {
                drop = Some((k, viol));
            }
        }
        if let Some((k, _)) = drop {
            work.members.remove(k);
            work.rhs.remove(k);
            continue;
        }

        // then the most violated inequality enters
        let eta = cols.tr_matvec(&p);
        let mut add: Option<(usize, i8, f64)> = None;
        for (j, &e) in eta.iter().enumerate() {
            if work.contains(j) {
                continue;
            }
            let (v, s) = if two_sided {
                (libm::fabs(e), if e >= 0.0 { 1i8 } else { -1i8 })
            } else {
                (e, 1i8)
            };
            if v > 1.0 + FEAS_TOL && add.map(|(_, _, b)| v > b).unwrap_or(true) {
                add = Some((j, s, v));
            }
        }
        match add {
            Some((j, s, _)) => {
                work.members.push((j, s));
                work.rhs.push(s as f64);
            }
            None => {
                let active = work.members[eq_count..].to_vec();
                return Ok(QpSolution { p, eta, active, iterations });
            }
        }
    }
}

/// See module docs. `equalities` lists `(column, rhs)` pairs; `warm` seeds
/// the active inequalities; `start` must be feasible up to roundoff.
pub fn min_norm_dual(
    cols: &Mat,
    equalities: &[(usize, f64)],
    two_sided: bool,
    warm: &[(usize, i8)],
    start: &[f64],
    max_pivots: usize,
) -> Result<QpSolution> {
    let n = cols.cols();
    let mut p = start.to_vec();

    // start must satisfy the equality rows and be inside the polytope
    for &(i, b) in equalities {
        if libm::fabs(dot(cols.col(i), &p) - b) > 1e-6 {
            return Err(Error::Infeasible(
                "warm-start point violates an equality constraint of the dual polytope"
                    .to_string(),
            ));
        }
    }

    let mut work = Working {
        members: equalities.iter().map(|&(i, _)| (i, 0i8)).collect(),
        rhs: equalities.iter().map(|&(_, b)| b).collect(),
    };
    let eq_count = work.members.len();
    for &(j, s) in warm {
        if !work.contains(j) {
            work.members.push((j, s));
            work.rhs.push(s as f64);
        }
    }

    let mut iterations = 0;
    loop {
        iterations += 1;
        if iterations > max_pivots {
            let eta = cols.tr_matvec(&p);
            let worst = eta
                .iter()
                .map(|&e| if two_sided { libm::fabs(e) } else { e })
                .fold(f64::NEG_INFINITY, f64::max);
            return Err(Error::IterationLimit {
                what: "active-set QP".to_string(),
                residual: worst - 1.0,
            });
        }

        if work.members.len() > cols.rows() {
            work.members.pop();
            work.rhs.pop();
            continue;
        }
        let sub = work.sub(cols);
        let qr = Qr::new(&sub);
        if qr.rank(RANK_TOL) < sub.cols() {
            // a freshly added constraint is linearly dependent on the working
            // set: drop the most recent inequality member and retry
            if work.members.len() > eq_count {
                work.members.pop();
                work.rhs.pop();
                continue;
            }
            return Err(Error::RankDeficient(
                "equality constraints of the dual QP are linearly dependent".to_string(),
            ));
        }
        let target = qr.min_norm_transpose_solve(&work.rhs);

        let mut dir = target.clone();
        axpy(-1.0, &p, &mut dir);
        let moved = norm2(&dir) > 1e-13 * (1.0 + norm2(&p));

        if moved {
            // longest feasible step towards the subspace minimizer
            let mut t = 1.0;
            let mut blocking: Option<(usize, i8)> = None;
            for j in 0..n {
                if work.contains(j) {
                    continue;
                }
                let val = dot(cols.col(j), &p);
                let dv = dot(cols.col(j), &dir);
                let sides: &[i8] = if two_sided { &[1, -1] } else { &[1] };
                for &s in sides {
                    let sv = s as f64;
                    let delta = sv * dv;
                    if delta > 1e-14 {
                        let room = 1.0 - sv * val;
                        let tj = room / delta;
                        if tj < t - 1e-14 {
                            t = tj.max(0.0);
                            blocking = Some((j, s));
                        }
                    }
                }
            }
            axpy(t, &dir, &mut p);
            if let Some((j, s)) = blocking {
                work.members.push((j, s));
                work.rhs.push(s as f64);
                continue;
            }
        }

        // at the subspace minimizer: check multipliers of active inequalities
        let coeff = qr.solve_gram(&work.rhs);
        let mut drop: Option<(usize, f64)> = None;
        for (k, &(_, s)) in work.members.iter().enumerate().skip(eq_count) {
            let viol = s as f64 * coeff[k];
            if viol > MULT_TOL {
                if drop.map(|(_, v)| viol > v).unwrap_or(true) {
                    drop = Some((k, viol));
                }
            }
        }
        if let Some((k, _)) = drop {
            work.members.remove(k);
            work.rhs.remove(k);
            continue;
        }

        // optimal: verify feasibility before returning
        let eta = cols.tr_matvec(&p);
        let mut worst = 0.0f64;
        for (j, &e) in eta.iter().enumerate() {
            if work.contains(j) {
                continue;
            }
            let v = if two_sided { libm::fabs(e) } else { e };
            if v - 1.0 > worst {
                worst = v - 1.0;
            }
        }
        if worst > FEAS_TOL * 10.0 {
            // should have been caught as a blocking constraint; treat as a
            // degenerate pivot and add the worst violator
            let mut jbest = 0;
            let mut sbest = 1i8;
            let mut vbest = f64::NEG_INFINITY;
            for (j, &e) in eta.iter().enumerate() {
                if work.contains(j) {
                    continue;
                }
                let (v, s) = if two_sided {
                    (libm::fabs(e), if e >= 0.0 { 1 } else { -1 })
                } else {
                    (e, 1)
                };
                if v > vbest {
                    vbest = v;
                    jbest = j;
                    sbest = s;
                }
            }
            work.members.push((jbest, sbest));
            work.rhs.push(sbest as f64);
            continue;
        }

        let active = work.members[eq_count..].to_vec();
        return Ok(QpSolution { p, eta, active, iterations });
    }
}
