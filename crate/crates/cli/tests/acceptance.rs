//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! (run with `--nocapture` to see them). The compressed-sensing criterion
//! runs a reduced ensemble by default; set CERTISCOPE_ACCEPTANCE=full for
//! the full-size run (also reproducible through the CLI).

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use certiscope_core::cone::{
    assemble_lambda, hh_map, positive_lasso_homotopy, split_updown,
};
use certiscope_core::cs::{
    aggregate_histogram, aggregate_transition, evaluate_trial, AmplitudeLaw, EnsembleConfig,
    TrialOutcome,
};
use certiscope_core::lasso::{
    extended_support_check, fista_reference, identifiability_test, lambda_max, lasso_homotopy,
    minimal_norm_certificate, Identifiability, SignMode, SignedSupport,
};
use certiscope_core::linalg::{axpy, norm_inf, Mat, Qr};
use certiscope_core::thingrid::{
    check_ndsc, check_tndsc, gamma_convergence_probe, gram_expansion_check,
    predict_extended_support_cbp, predict_extended_support_lasso, scaling_probe_lambda0,
    third_derivative_precertificate, vanishing_precertificate, ProblemVariant, SpikeMeasure,
};
use certiscope_core::{GridSpec, TorusKernel};

fn report(criterion: &str, passed: bool, detail: &str) {
    println!("criterion {criterion}: {} — {detail}", if passed { "PASS" } else { "FAIL" });
    assert!(passed, "criterion {criterion} failed: {detail}");
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn criterion_1_lasso_extended_support() {
    let t0 = Instant::now();
    let kernel = TorusKernel::ideal(10);
    let grid = GridSpec::new(256);
    let h = grid.h();
    // two positive on-grid spikes separated by 23h ≈ 0.0898
    let m0 = SpikeMeasure::new(vec![103.0 * h, 126.0 * h], vec![1.0, 1.0]).unwrap();
    assert!(check_ndsc(&kernel, &m0, 8192).unwrap().holds);

    let pred = predict_extended_support_lasso(&kernel, &m0, &grid).unwrap();
    assert!(pred.hypothesis_ok);
    let target = pred.lasso.unwrap();

    let ops = kernel.grid_operators(&grid).unwrap();
    let y0 = m0.observe(&kernel).unwrap();
    let a0 = m0.grid_vector(&grid).unwrap();
    let path = lasso_homotopy(&ops.phi, &y0, 0.0).unwrap();
    let seg = path.final_segment().unwrap();
    let support_matches = seg.support() == target;

    // closed form of the terminal segment: offset = a0 on J, slope = −G_J⁻¹ s_J
    let idx = target.indices();
    let sub = ops.phi.gather(&idx);
    let qr = Qr::new(&sub);
    let zeros = vec![0.0; kernel.image_dim()];
    let (_, slope_cf) = qr.solve_augmented(&sub, &zeros, &target.signs_f64(), 2);
    let mut off_dev = 0.0f64;
    let mut slope_dev = 0.0f64;
    for (k, &j) in seg.indices.iter().enumerate() {
        let pos = idx.iter().position(|&i| i == j).unwrap();
        let off_ref = a0[j];
        off_dev = off_dev.max((seg.offset[k] - off_ref).abs() / off_ref.abs().max(1.0));
        slope_dev = slope_dev
            .max((seg.slope[k] - slope_cf[pos]).abs() / slope_cf[pos].abs().max(1.0));
    }
    let elapsed = t0.elapsed();
    report(
        "1 (LASSO extended support)",
        support_matches && off_dev < 1e-7 && slope_dev < 1e-7 && elapsed.as_secs() < 10,
        &format!(
            "support match: {support_matches}, offset dev {off_dev:.2e}, slope dev \
             {slope_dev:.2e}, {elapsed:?}"
        ),
    );
}

#[test]
fn criterion_2_cbp_extended_support() {
    let t0 = Instant::now();
    let kernel = TorusKernel::ideal(10);
    let grid = GridSpec::new(1024);
    let h = grid.h();
    // separation 307h ≈ 0.2998 (TNDSC regime)
    let m0 = SpikeMeasure::new(vec![341.0 * h, 648.0 * h], vec![1.0, 1.0]).unwrap();
    assert!(check_tndsc(&kernel, &m0, 8192).unwrap().holds);

    let pred = predict_extended_support_cbp(&kernel, &m0, &grid).unwrap();
    assert!(pred.hypothesis_ok);
    let target = pred.cbp.unwrap();
    let shift = pred.shift;

    let ops = kernel.grid_operators(&grid).unwrap();
    let y0 = m0.observe(&kernel).unwrap();
    let lam_mat = assemble_lambda(&ops.phi, &ops.dphi, h);
    let path = positive_lasso_homotopy(&lam_mat, &y0, 0.0).unwrap();
    let seg = path.final_segment().unwrap();
    let mut indicator = vec![0.0; 2 * grid.p];
    for &j in &seg.indices {
        indicator[j] = 1.0;
    }
    let term = split_updown(&indicator, grid.p, 0.5);
    let support_matches = term == target;

    // recovered measure inside the terminal segment: N pairs, original spike
    // moved by |t| < h/2, neighbor at the predicted side saturated
    let lam_probe = 0.5 * seg.lambda_hi.min(path.lambda_max);
    let x = path.eval(lam_probe);
    let u: Vec<f64> = x[..grid.p].iter().map(|&t| t.max(0.0)).collect();
    let v: Vec<f64> = x[grid.p..].iter().map(|&t| t.max(0.0)).collect();
    let pair = hh_map(&u, &v, h).unwrap();
    let mut pairs_ok = true;
    for (nu, &xnu) in m0.positions().iter().enumerate() {
        let i = grid.index_of(xnu, 1e-9).unwrap();
        let eps = shift.epsilon[nu] as i64;
        let neighbor = (i as i64 + eps).rem_euclid(grid.p as i64) as usize;
        // original node: interior shift
        let t_shift = pair.position(i) - xnu;
        pairs_ok &= pair.a[i] > 0.0 && t_shift.abs() < h / 2.0;
        // neighbor node: active and saturated back toward the spike
        let sat = pair.b[neighbor] / pair.a[neighbor].max(1e-300);
        pairs_ok &= pair.a[neighbor] > 0.0 && (sat + eps as f64 * h / 2.0).abs() < 1e-6 * h;
    }
    let elapsed = t0.elapsed();
    report(
        "2 (C-BP extended support)",
        support_matches && pairs_ok && elapsed.as_secs() < 30,
        &format!("support match: {support_matches}, pair structure: {pairs_ok}, {elapsed:?}"),
    );
}

/// Enumerate signed candidates (J, s_J) ⊇ (I, s_I) with |J| ≤ |I| + extra.
fn enumerate_passing(op: &Mat, a0: &[f64], extra: usize) -> Vec<SignedSupport> {
    let p = op.cols();
    let support = SignedSupport::from_vector(a0);
    let base = support.indices();
    let rest: Vec<usize> = (0..p).filter(|j| !base.contains(j)).collect();
    let mut passing = Vec::new();
    let mut stack: Vec<(Vec<usize>, usize)> = vec![(vec![], 0)];
    while let Some((subset, start)) = stack.pop() {
        let k = subset.len();
        for bits in 0..(1u32 << k) {
            let mut entries = support.entries().to_vec();
            for (t, &j) in subset.iter().enumerate() {
                entries.push((j, if bits >> t & 1 == 1 { 1i8 } else { -1i8 }));
            }
            let cand = SignedSupport::new(entries).unwrap();
            if let Ok(chk) = extended_support_check(op, a0, &cand) {
                if chk.passes {
                    passing.push(cand);
                }
            }
        }
        if k < extra {
            for (pos, &j) in rest.iter().enumerate().skip(start) {
                let mut next = subset.clone();
                next.push(j);
                stack.push((next, pos + 1));
            }
        }
    }
    passing
}

#[test]
fn criterion_3_lemma_oracle_equivalence() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(314159);
    let mut matched = 0;
    let mut tested = 0;
    while tested < 50 {
        let rows = rng.gen_range(5..=8);
        let cols = rng.gen_range(9..=14);
        let s = rng.gen_range(1..=3);
        let columns: Vec<Vec<f64>> = (0..cols)
            .map(|_| (0..rows).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let op = Mat::from_columns(&columns);
        let mut a0 = vec![0.0; cols];
        let mut idx: Vec<usize> = (0..cols).collect();
        for i in 0..s {
            let j = rng.gen_range(i..cols);
            idx.swap(i, j);
        }
        for &i in &idx[..s] {
            a0[i] = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        }
        if identifiability_test(&op, &a0) != Identifiability::Identifiable {
            continue;
        }
        let cert = minimal_norm_certificate(&op, &a0).unwrap();
        if cert.saturation.len() > s + 3 {
            continue; // outside the enumeration band
        }
        tested += 1;
        let passing = enumerate_passing(&op, &a0, 3);
        if passing.len() == 1 && passing[0] == cert.saturation {
            matched += 1;
        }
    }
    let elapsed = t0.elapsed();
    report(
        "3 (extended-support enumeration oracle)",
        matched == 50 && elapsed.as_secs() < 60,
        &format!("{matched}/50 matched, {elapsed:?}"),
    );
}

fn transition_outcomes(
    base: &EnsembleConfig,
    s_values: &[usize],
    want_ext: bool,
) -> Vec<Vec<TrialOutcome>> {
    s_values
        .iter()
        .map(|&s| {
            let cfg = EnsembleConfig { s, ..base.clone() };
            (0..base.trials as u64).map(|t| evaluate_trial(&cfg, t, want_ext)).collect()
        })
        .collect()
}

#[test]
fn criterion_4_cs_phase_transition() {
    let t0 = Instant::now();
    let full = std::env::var("CERTISCOPE_ACCEPTANCE").as_deref() == Ok("full");
    if full {
        let base = EnsembleConfig {
            p: 400,
            q: 100,
            s: 0,
            trials: 200,
            master_seed: 0xC0FFEE,
            amplitude_law: AmplitudeLaw::UnitSigned,
        };
        let s_values: Vec<usize> = (1..=30).collect();
        let outcomes = transition_outcomes(&base, &s_values, false);
        let curve = aggregate_transition(&s_values, base.trials, &outcomes);
        let cross = |ps: &[f64]| {
            s_values.iter().zip(ps).rev().find(|&(_, &p)| p >= 0.5).map(|(&s, _)| s)
        };
        let fx = cross(&curve.p_fuchs_valid);
        let ix = cross(&curve.p_identifiable);
        let fuchs_ok = fx.map(|s| (4..=9).contains(&s)).unwrap_or(false);
        let ident_ok = ix.map(|s| (17..=23).contains(&s)).unwrap_or(false);
        let elapsed = t0.elapsed();
        report(
            "4 (CS phase transition, full)",
            fuchs_ok && ident_ok && curve.implication_violations == 0 && elapsed.as_secs() < 1800,
            &format!("fuchs crossing {fx:?} ∈ [4,9], ident crossing {ix:?} ∈ [17,23], {elapsed:?}"),
        );
    } else {
        // CI profile: reduced ensemble, monotonicity and the per-trial
        // Fuchs ⇒ identifiable implication
        let base = EnsembleConfig {
            p: 200,
            q: 50,
            s: 0,
            trials: 50,
            master_seed: 0xC0FFEE,
            amplitude_law: AmplitudeLaw::UnitSigned,
        };
        let s_values: Vec<usize> = (0..=16).step_by(2).collect();
        let outcomes = transition_outcomes(&base, &s_values, false);
        let curve = aggregate_transition(&s_values, base.trials, &outcomes);
        let mut monotone = true;
        for k in 1..s_values.len() {
            let slack = 3.0 * (curve.se_identifiable[k] + curve.se_identifiable[k - 1]);
            if curve.p_identifiable[k] > curve.p_identifiable[k - 1] + slack {
                monotone = false;
            }
        }
        let elapsed = t0.elapsed();
        report(
            "4 (CS phase transition, fast profile)",
            monotone && curve.implication_violations == 0 && elapsed.as_secs() < 1800,
            &format!(
                "monotone within 3 SE: {monotone}, implication violations: {}, {elapsed:?} \
                 (set CERTISCOPE_ACCEPTANCE=full for the (400,100) crossings)",
                curve.implication_violations
            ),
        );
    }
}

#[test]
fn criterion_5_histogram_support_instability() {
    let t0 = Instant::now();
    let cfg = EnsembleConfig {
        p: 400,
        q: 100,
        s: 14,
        trials: 500,
        master_seed: 0xC0FFEE,
        amplitude_law: AmplitudeLaw::UnitSigned,
    };
    let outcomes: Vec<TrialOutcome> =
        (0..cfg.trials as u64).map(|t| evaluate_trial(&cfg, t, true)).collect();
    let hist = aggregate_histogram(cfg.s, &outcomes).unwrap();
    let min_j = hist.counts.keys().next().copied().unwrap_or(0);
    let above: usize =
        hist.counts.iter().filter(|&(&k, _)| k > 14).map(|(_, &c)| c).sum();
    let frac_above = above as f64 / hist.identifiable_trials.max(1) as f64;
    let elapsed = t0.elapsed();
    report(
        "5 (histogram support instability)",
        min_j == 14 && frac_above >= 0.20,
        &format!(
            "min |J| = {min_j}, {:.1}% of {} identifiable trials have |J| > 14, {elapsed:?}",
            100.0 * frac_above,
            hist.identifiable_trials
        ),
    );
}

#[test]
fn criterion_6_scaling_laws() {
    let t0 = Instant::now();
    let kernel = TorusKernel::ideal(10);
    let grids: Vec<GridSpec> =
        [64usize, 128, 256, 512, 1024].iter().map(|&p| GridSpec::new(p)).collect();
    let m_lasso = SpikeMeasure::new(vec![21.0 / 64.0, 27.0 / 64.0], vec![1.0, 1.0]).unwrap();
    let m_cbp = SpikeMeasure::new(vec![21.0 / 64.0, 30.0 / 64.0], vec![1.0, 1.0]).unwrap();
    let probe_l =
        scaling_probe_lambda0(&kernel, &m_lasso, &grids, ProblemVariant::Lasso).unwrap();
    let probe_c = scaling_probe_lambda0(&kernel, &m_cbp, &grids, ProblemVariant::Cbp).unwrap();
    let lasso_ok = (0.7..=1.3).contains(&probe_l.lambda0_slope);
    let cbp_ok = (2.5..=3.5).contains(&probe_c.lambda0_slope);
    let n_l = probe_l.rows.iter().filter(|r| r.lambda0.is_some()).count();
    let n_c = probe_c.rows.iter().filter(|r| r.lambda0.is_some()).count();
    let elapsed = t0.elapsed();
    report(
        "6 (scaling laws)",
        lasso_ok && cbp_ok && elapsed.as_secs() < 300,
        &format!(
            "lasso slope {:.3} ∈ [0.7,1.3] over {n_l}/5 grids, cbp slope {:.3} ∈ [2.5,3.5] \
             over {n_c}/5 grids (support is still stable on the coarsest grids — λ₀ \
             undefined there), {elapsed:?}",
            probe_l.lambda0_slope, probe_c.lambda0_slope
        ),
    );
}

#[test]
fn criterion_7_gamma_convergence() {
    let t0 = Instant::now();
    let kernel = TorusKernel::gaussian_for_grid(0.1, 3, 512);
    let m0 = SpikeMeasure::new(vec![0.3, 2.0 / 3.0], vec![1.0, 1.0]).unwrap();
    let y = m0.observe(&kernel).unwrap();
    let grids: Vec<GridSpec> =
        [32usize, 64, 128, 256, 512].iter().map(|&p| GridSpec::new(p)).collect();
    let lam = 0.05;

    let pl = gamma_convergence_probe(&kernel, &y, lam, &grids, ProblemVariant::Lasso).unwrap();
    let scale_l = pl.values[0].max(1.0);
    let lasso_ok =
        pl.monotone && pl.increments.last().map(|&d| d.abs() < 1e-4 * scale_l).unwrap_or(false);

    let pc = gamma_convergence_probe(&kernel, &y, lam, &grids, ProblemVariant::Cbp).unwrap();
    let scale_c = pc.values[0].max(1.0);
    // C-BP values converge but not monotonically: the linearized images do
    // not nest across grids, so coarse values can undershoot the limit
    let cbp_converges =
        pc.increments.last().map(|&d| d.abs() < 1e-4 * scale_c).unwrap_or(false);
    let elapsed = t0.elapsed();
    report(
        "7 (Γ-convergence probe)",
        lasso_ok && cbp_converges && elapsed.as_secs() < 300,
        &format!(
            "lasso monotone: {}, lasso final inc {:.2e}; cbp final inc {:.2e} \
             (cbp monotone: {} — coarse C-BP grids undershoot, nesting fails \
             structurally), {elapsed:?}",
            pl.monotone,
            pl.increments.last().unwrap().abs(),
            pc.increments.last().unwrap().abs(),
            pc.monotone
        ),
    );
}

#[test]
fn criterion_8_formula_cross_checks() {
    let t0 = Instant::now();
    let kernel = TorusKernel::ideal(10);
    // both printed forms of each precertificate are computed and compared to
    // 1e-9 inside the constructors, which error on disagreement
    let mut rng = ChaCha8Rng::seed_from_u64(2718);
    let mut done = 0;
    while done < 20 {
        let n = rng.gen_range(1..=3);
        let mut pos: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        pos.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let m0 = match SpikeMeasure::new(pos, vec![1.0; n]) {
            Ok(m) if m.len() == 1 || m.min_separation() > 0.09 => m,
            _ => continue,
        };
        vanishing_precertificate(&kernel, &m0).unwrap();
        third_derivative_precertificate(&kernel, &m0).unwrap();
        done += 1;
    }

    // leading-order Gram expansions: ratios decrease over four halvings
    let m2 = SpikeMeasure::new(vec![0.45, 0.55], vec![1.0, 1.0]).unwrap();
    let h_lasso: Vec<f64> = (8..=12).map(|k| 0.5f64.powi(k)).collect();
    let rl = gram_expansion_check(&kernel, &m2, &h_lasso, ProblemVariant::Lasso).unwrap();
    let m3 = SpikeMeasure::new(vec![21.0 / 64.0, 27.0 / 64.0], vec![1.0, 1.0]).unwrap();
    let h_cbp: Vec<f64> = (6..=10).map(|k| 0.5f64.powi(k)).collect();
    let rc = gram_expansion_check(&kernel, &m3, &h_cbp, ProblemVariant::Cbp).unwrap();
    let elapsed = t0.elapsed();
    report(
        "8 (certificate formula cross-checks)",
        rl.ratios_decreasing && rc.ratios_decreasing,
        &format!(
            "20 configurations agree to 1e-9; expansion ratios decreasing \
             (lasso {:?}, cbp {:?}), {elapsed:?}",
            rl.rows.iter().filter_map(|r| r.ratio).map(|x| (x * 1e3).round() / 1e3).collect::<Vec<_>>(),
            rc.rows.iter().filter_map(|r| r.ratio).map(|x| (x * 1e3).round() / 1e3).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn criterion_9_solver_cross_validation() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(112358);
    let mut worst = 0.0f64;
    for mode in [SignMode::Signed, SignMode::Positive] {
        for _ in 0..100 {
            let rows = rng.gen_range(6..=10);
            let cols = rng.gen_range(12..=24);
            let s = rng.gen_range(1..=4);
            let columns: Vec<Vec<f64>> = (0..cols)
                .map(|_| (0..rows).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
                .collect();
            let op = Mat::from_columns(&columns);
            let mut x0 = vec![0.0; cols];
            for _ in 0..s {
                let j = rng.gen_range(0..cols);
                x0[j] += match mode {
                    SignMode::Positive => rng.gen_range(0.3..1.5),
                    SignMode::Signed => {
                        if rng.gen_bool(0.5) {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                };
            }
            let mut y = op.matvec(&x0);
            for v in y.iter_mut() {
                *v += 0.01 * rng.gen_range(-1.0..1.0f64);
            }
            let lmax = lambda_max(&op, &y, mode);
            if lmax <= 0.0 {
                continue;
            }
            let lam = lmax * 10f64.powf(rng.gen_range(-4.0..-0.3));
            let path = match mode {
                SignMode::Signed => lasso_homotopy(&op, &y, lam).unwrap(),
                SignMode::Positive => positive_lasso_homotopy(&op, &y, lam).unwrap(),
            };
            let a_path = path.eval(lam);
            let a_fista = fista_reference(&op, &y, lam, 1e-10, mode).unwrap();
            worst = worst.max(max_abs_diff(&a_path, &a_fista));
        }
    }
    let elapsed = t0.elapsed();
    report(
        "9 (solver cross-validation)",
        worst < 1e-5,
        &format!("100 signed + 100 positive pairs, worst deviation {worst:.2e}, {elapsed:?}"),
    );
}

/// The terminal residual of the noiseless criterion-1 instance doubles as a
/// regression guard for the whole homotopy stack.
#[test]
fn terminal_residual_sanity() {
    let kernel = TorusKernel::ideal(10);
    let grid = GridSpec::new(256);
    let m0 = SpikeMeasure::new(vec![103.0 / 256.0, 126.0 / 256.0], vec![1.0, 1.0]).unwrap();
    let ops = kernel.grid_operators(&grid).unwrap();
    let y0 = m0.observe(&kernel).unwrap();
    let path = lasso_homotopy(&ops.phi, &y0, 0.0).unwrap();
    let limit = path.limit_solution();
    let mut r = y0.clone();
    axpy(-1.0, &ops.phi.matvec(&limit), &mut r);
    assert!(norm_inf(&r) < 1e-9);
}
