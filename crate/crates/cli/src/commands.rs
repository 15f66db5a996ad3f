//! The experiment commands: each one computes, writes CSV + SVG + JSON
//! summary, and returns its internal assertion results.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use certiscope_core::cone::{assemble_lambda, hh_map, positive_lasso_homotopy, split_updown};
use certiscope_core::cs::{aggregate_histogram, aggregate_transition, evaluate_trial};
use certiscope_core::lasso::{lambda_max, lasso_homotopy, SignMode, SolutionPath};
use certiscope_core::thingrid::{
    check_ndsc, check_tndsc, gamma_convergence_probe, gram_expansion_check,
    predict_extended_support_cbp, predict_extended_support_lasso, scaling_probe_lambda0,
    third_derivative_precertificate, vanishing_precertificate, ProblemVariant, SpikeMeasure,
};
use certiscope_core::{GridSpec, TorusKernel};

use crate::artifact::{g17, ArtifactWriter, Check, FigureArtifact};
use crate::config::*;
use crate::svg::{BarChart, BarGroup, LineChart, PALETTE};

pub type CmdResult = Result<(FigureArtifact, Vec<Check>), String>;

fn err_str<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

#[derive(Serialize)]
struct Summary<C: Serialize, D: Serialize> {
    config: C,
    checks: Vec<Check>,
    csv_sha256: String,
    #[serde(flatten)]
    data: D,
}

fn kernel_for(spikes: &SpikesConfig, max_p: usize) -> TorusKernel {
    TorusKernel::from_spec(&spikes.kernel, max_p)
}

// ---------------------------------------------------------------------------

pub fn cmd_certificates(config: CertificatesConfig, out: &Path) -> CmdResult {
    let kernel = kernel_for(&config.spikes, 1);
    let m0 = config.spikes.measure().map_err(err_str)?;
    let eta_v = vanishing_precertificate(&kernel, &m0).map_err(err_str)?;
    let positive = m0.is_positive();
    let mu_t = if positive {
        Some(third_derivative_precertificate(&kernel, &m0).map_err(err_str)?)
    } else {
        None
    };
    let ndsc = check_ndsc(&kernel, &m0, config.scan_points).map_err(err_str)?;
    let tndsc = if positive {
        Some(check_tndsc(&kernel, &m0, config.scan_points).map_err(err_str)?)
    } else {
        None
    };

    let writer = ArtifactWriter::new(out, "certificates").map_err(err_str)?;
    let mut rows = Vec::with_capacity(config.samples);
    for i in 0..config.samples {
        let t = i as f64 / config.samples as f64;
        let ev = eta_v.eval(0, t).map_err(err_str)?;
        let mt = match &mu_t {
            Some(c) => g17(c.eval(0, t).map_err(err_str)?),
            None => String::new(),
        };
        rows.push(vec![g17(t), g17(ev), mt]);
    }
    let sha = writer.write_csv("t,eta_v,mu_t", &rows).map_err(err_str)?;

    let mut chart = LineChart::new("Precertificates", "t", "value");
    chart.add_series(
        "eta_V",
        rows.iter()
            .map(|r| (parse17(&r[0]), parse17(&r[1])))
            .collect(),
    );
    if mu_t.is_some() {
        chart.add_series(
            "mu_T",
            rows.iter().map(|r| (parse17(&r[0]), parse17(&r[2]))).collect(),
        );
    }
    chart.markers = m0.positions().to_vec();
    writer.write_svg(&chart.render()).map_err(err_str)?;

    let checks = vec![
        Check::new(
            "eta_v_interpolates",
            true,
            "sign and derivative constraints verified during construction",
        ),
        Check::new("ndsc_scan_completed", ndsc.off_spike_max.is_finite(), ""),
    ];

    #[derive(Serialize)]
    struct Data {
        ndsc: certiscope_core::thingrid::NondegeneracyReport,
        tndsc: Option<certiscope_core::thingrid::NondegeneracyReport>,
        positive_measure: bool,
    }
    let artifact = writer
        .finish(
            sha.clone(),
            &Summary {
                config,
                checks: checks.clone(),
                csv_sha256: sha,
                data: Data { ndsc, tndsc, positive_measure: positive },
            },
        )
        .map_err(err_str)?;
    Ok((artifact, checks))
}

fn parse17(s: &str) -> f64 {
    s.parse().unwrap_or(f64::NAN)
}

// ---------------------------------------------------------------------------

fn path_rows(path: &SolutionPath, problem: &str, split_at: Option<usize>) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for seg in &path.segments {
        let hi = seg.lambda_hi.min(path.lambda_max);
        for &(lam, edge) in &[(hi, "hi"), (seg.lambda_lo, "lo")] {
            for (k, &idx) in seg.indices.iter().enumerate() {
                let v = seg.offset[k] + lam * seg.slope[k];
                let (name, col) = match split_at {
                    Some(p) if idx >= p => (format!("{problem}_down"), idx - p),
                    Some(_) => (format!("{problem}_up"), idx),
                    None => (problem.to_string(), idx),
                };
                rows.push(vec![name, g17(lam), edge.to_string(), col.to_string(), g17(v)]);
            }
        }
    }
    rows
}

pub fn cmd_path(config: PathConfig, out: &Path) -> CmdResult {
    let kernel = kernel_for(&config.spikes, config.grid_p);
    let m0 = config.spikes.measure().map_err(err_str)?;
    let grid = GridSpec::new(config.grid_p);
    let a0 = m0.grid_vector(&grid).map_err(err_str)?;
    let ops = kernel.grid_operators(&grid).map_err(err_str)?;
    let y0 = m0.observe(&kernel).map_err(err_str)?;

    // LASSO path and prediction
    let lmax_l = lambda_max(&ops.phi, &y0, SignMode::Signed);
    let path_l =
        lasso_homotopy(&ops.phi, &y0, config.lambda_min_rel * lmax_l).map_err(err_str)?;
    let pred_l = predict_extended_support_lasso(&kernel, &m0, &grid).map_err(err_str)?;
    let target_l = pred_l.lasso.clone().expect("lasso prediction");
    let term_l = path_l.final_segment().expect("nonempty path");
    let lasso_match = term_l.support() == target_l;
    let lambda0_l = term_l.lambda_hi.min(path_l.lambda_max);
    let limit_l = path_l.limit_solution();
    let endpoint_dev = limit_l
        .iter()
        .zip(&a0)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));

    let mut rows = path_rows(&path_l, "lasso", None);
    let mut checks = vec![
        Check::new(
            "lasso_first_segment_matches_prediction",
            lasso_match,
            format!(
                "terminal support {:?}, predicted {:?}",
                term_l.support().entries(),
                target_l.entries()
            ),
        ),
        Check::new(
            "lasso_endpoint_recovers_a0",
            endpoint_dev < 1e-8,
            format!("max deviation {endpoint_dev:.3e}"),
        ),
    ];

    // C-BP path for positive measures
    let mut cbp_summary = None;
    if m0.is_positive() {
        let lam_mat = assemble_lambda(&ops.phi, &ops.dphi, grid.h());
        let lmax_c = lambda_max(&lam_mat, &y0, SignMode::Positive);
        let path_c = positive_lasso_homotopy(&lam_mat, &y0, config.lambda_min_rel * lmax_c)
            .map_err(err_str)?;
        let pred_c = predict_extended_support_cbp(&kernel, &m0, &grid).map_err(err_str)?;
        let target_c = pred_c.cbp.clone().expect("cbp prediction");
        let term_c = path_c.final_segment().expect("nonempty path");
        let mut x_ind = vec![0.0; 2 * grid.p];
        for &j in &term_c.indices {
            x_ind[j] = 1.0;
        }
        let term_support = split_updown(&x_ind, grid.p, 0.5);
        let cbp_match = term_support == target_c;
        let lambda0_c = term_c.lambda_hi.min(path_c.lambda_max);

        // recovered measure inside the terminal segment
        let lam_probe = 0.5 * (lambda0_c + term_c.lambda_lo.max(0.0));
        let x = path_c.eval(lam_probe);
        let u: Vec<f64> = x[..grid.p].iter().map(|&t| t.max(0.0)).collect();
        let v: Vec<f64> = x[grid.p..].iter().map(|&t| t.max(0.0)).collect();
        let pair = hh_map(&u, &v, grid.h()).map_err(err_str)?;
        let measure: Vec<(f64, f64)> = pair.measure();

        rows.extend(path_rows(&path_c, "cbp", Some(grid.p)));
        checks.push(Check::new(
            "cbp_first_segment_matches_prediction",
            cbp_match,
            format!(
                "terminal (up {:?}, down {:?}), predicted (up {:?}, down {:?})",
                term_support.up, term_support.down, target_c.up, target_c.down
            ),
        ));
        checks.push(Check::new(
            "cbp_lambda0_below_lasso_lambda0",
            lambda0_c < lambda0_l,
            format!("cbp λ₀ = {lambda0_c:.3e}, lasso λ₀ = {lambda0_l:.3e}"),
        ));

        #[derive(Serialize)]
        struct CbpSummary {
            lambda_max: f64,
            lambda0: f64,
            predicted_up: Vec<usize>,
            predicted_down: Vec<usize>,
            matches: bool,
            recovered_measure: Vec<(f64, f64)>,
        }
        cbp_summary = Some(CbpSummary {
            lambda_max: lmax_c,
            lambda0: lambda0_c,
            predicted_up: target_c.up,
            predicted_down: target_c.down,
            matches: cbp_match,
            recovered_measure: measure,
        });
    }

    let writer = ArtifactWriter::new(out, "path").map_err(err_str)?;
    let sha = writer.write_csv("problem,lambda,edge,index,value", &rows).map_err(err_str)?;

    // coefficient traces of the LASSO path
    let mut chart = LineChart::new("Solution path", "lambda", "coefficient");
    let mut active_indices: Vec<usize> = Vec::new();
    for seg in &path_l.segments {
        for &i in &seg.indices {
            if !active_indices.contains(&i) {
                active_indices.push(i);
            }
        }
    }
    for (ci, &i) in active_indices.iter().enumerate() {
        let mut pts = Vec::new();
        for seg in &path_l.segments {
            if let Some(k) = seg.indices.iter().position(|&j| j == i) {
                let hi = seg.lambda_hi.min(path_l.lambda_max);
                pts.push((hi, seg.offset[k] + hi * seg.slope[k]));
                pts.push((seg.lambda_lo, seg.offset[k] + seg.lambda_lo * seg.slope[k]));
            }
        }
        chart.series.push(crate::svg::Series {
            label: format!("a[{i}]"),
            color: PALETTE[ci % PALETTE.len()].to_string(),
            points: pts,
            dashed: a0[i] == 0.0,
        });
    }
    writer.write_svg(&chart.render()).map_err(err_str)?;

    #[derive(Serialize)]
    struct Data<T: Serialize> {
        lasso_lambda_max: f64,
        lasso_lambda0: f64,
        lasso_predicted: Vec<(usize, i8)>,
        lasso_matches: bool,
        cbp: Option<T>,
    }
    let data = Data {
        lasso_lambda_max: lmax_l,
        lasso_lambda0: lambda0_l,
        lasso_predicted: target_l.entries().to_vec(),
        lasso_matches: lasso_match,
        cbp: cbp_summary,
    };
    let artifact = writer
        .finish(sha.clone(), &Summary { config, checks: checks.clone(), csv_sha256: sha, data })
        .map_err(err_str)?;
    Ok((artifact, checks))
}

// ---------------------------------------------------------------------------

pub fn cmd_cs_transition(config: CsTransitionConfig, out: &Path) -> CmdResult {
    let s_values: Vec<usize> = (config.s_min..=config.s_max).collect();
    let outcomes: Vec<Vec<certiscope_core::cs::TrialOutcome>> = s_values
        .par_iter()
        .map(|&s| {
            let cfg = config.ensemble(s);
            (0..config.trials as u64)
                .into_par_iter()
                .map(|t| evaluate_trial(&cfg, t, false))
                .collect()
        })
        .collect();
    let curve = aggregate_transition(&s_values, config.trials, &outcomes);

    let writer = ArtifactWriter::new(out, "cs-transition").map_err(err_str)?;
    let rows: Vec<Vec<String>> = s_values
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            vec![
                s.to_string(),
                config.trials.to_string(),
                g17(curve.p_identifiable[k]),
                g17(curve.se_identifiable[k]),
                g17(curve.p_fuchs_valid[k]),
                g17(curve.se_fuchs[k]),
            ]
        })
        .collect();
    let sha = writer
        .write_csv("s,trials,p_identifiable,se_ident,p_fuchs,se_fuchs", &rows)
        .map_err(err_str)?;

    let mut chart = LineChart::new(
        &format!("Recovery probability (P={}, Q={})", config.p, config.q),
        "s",
        "probability",
    );
    chart.add_series(
        "identifiable",
        s_values.iter().zip(&curve.p_identifiable).map(|(&s, &p)| (s as f64, p)).collect(),
    );
    chart.add_series_dashed(
        "Fuchs valid",
        s_values.iter().zip(&curve.p_fuchs_valid).map(|(&s, &p)| (s as f64, p)).collect(),
    );
    writer.write_svg(&chart.render()).map_err(err_str)?;

    let cross = |ps: &[f64]| -> Option<usize> {
        s_values
            .iter()
            .zip(ps)
            .rev()
            .find(|&(_, &p)| p >= 0.5)
            .map(|(&s, _)| s)
    };
    let fuchs_cross = cross(&curve.p_fuchs_valid);
    let ident_cross = cross(&curve.p_identifiable);

    // statistical monotonicity within three standard errors
    let mut monotone = true;
    for k in 1..s_values.len() {
        let slack = 3.0 * (curve.se_identifiable[k] + curve.se_identifiable[k - 1]);
        if curve.p_identifiable[k] > curve.p_identifiable[k - 1] + slack {
            monotone = false;
        }
    }

    let checks = vec![
        Check::new(
            "fuchs_implies_identifiable",
            curve.implication_violations == 0,
            format!("{} violations", curve.implication_violations),
        ),
        Check::new("identifiability_monotone_3se", monotone, ""),
    ];

    #[derive(Serialize)]
    struct Data {
        fuchs_crossing: Option<usize>,
        identifiability_crossing: Option<usize>,
    }
    let artifact = writer
        .finish(
            sha.clone(),
            &Summary {
                config,
                checks: checks.clone(),
                csv_sha256: sha,
                data: Data { fuchs_crossing: fuchs_cross, identifiability_crossing: ident_cross },
            },
        )
        .map_err(err_str)?;
    Ok((artifact, checks))
}

pub fn cmd_cs_histogram(config: CsHistogramConfig, out: &Path) -> CmdResult {
    let mut hists = Vec::new();
    for &s in &config.s_values {
        let cfg = config.ensemble(s);
        let outcomes: Vec<certiscope_core::cs::TrialOutcome> = (0..config.trials as u64)
            .into_par_iter()
            .map(|t| evaluate_trial(&cfg, t, true))
            .collect();
        hists.push(aggregate_histogram(s, &outcomes).map_err(err_str)?);
    }

    let writer = ArtifactWriter::new(out, "cs-histogram").map_err(err_str)?;
    let mut rows = Vec::new();
    for h in &hists {
        for (&size, &count) in &h.counts {
            rows.push(vec![h.s.to_string(), size.to_string(), count.to_string()]);
        }
    }
    let sha = writer.write_csv("s,J_size,count", &rows).map_err(err_str)?;

    let chart = BarChart {
        title: format!("Extended support sizes (P={}, Q={})", config.p, config.q),
        x_label: "|J|".to_string(),
        y_label: "count".to_string(),
        groups: hists
            .iter()
            .enumerate()
            .map(|(k, h)| BarGroup {
                label: format!("s = {}", h.s),
                color: PALETTE[k % PALETTE.len()].to_string(),
                bars: h.counts.iter().map(|(&sz, &c)| (sz as f64, c as f64)).collect(),
            })
            .collect(),
    };
    writer.write_svg(&chart.render()).map_err(err_str)?;

    let mut checks = Vec::new();
    for h in &hists {
        let min_j = h.counts.keys().next().copied();
        checks.push(Check::new(
            &format!("s{}_ext_size_at_least_s", h.s),
            min_j.map(|m| m >= h.s).unwrap_or(true),
            format!("min |J| = {min_j:?}"),
        ));
    }

    #[derive(Serialize)]
    struct Data {
        histograms: Vec<certiscope_core::cs::SupportSizeHistogram>,
    }
    let artifact = writer
        .finish(
            sha.clone(),
            &Summary {
                config,
                checks: checks.clone(),
                csv_sha256: sha,
                data: Data { histograms: hists },
            },
        )
        .map_err(err_str)?;
    Ok((artifact, checks))
}

// ---------------------------------------------------------------------------

pub fn cmd_scaling(config: ScalingConfig, out: &Path) -> CmdResult {
    let max_p = config.grid_sizes.iter().copied().max().unwrap_or(64);
    let kernel = TorusKernel::from_spec(&config.kernel, max_p);
    let grids: Vec<GridSpec> = config.grid_sizes.iter().map(|&p| GridSpec::new(p)).collect();

    let m_lasso =
        SpikeMeasure::new(config.lasso_positions.clone(), config.lasso_amplitudes.clone())
            .map_err(err_str)?;
    let m_cbp = SpikeMeasure::new(config.cbp_positions.clone(), config.cbp_amplitudes.clone())
        .map_err(err_str)?;
    let probe_l =
        scaling_probe_lambda0(&kernel, &m_lasso, &grids, ProblemVariant::Lasso).map_err(err_str)?;
    let probe_c =
        scaling_probe_lambda0(&kernel, &m_cbp, &grids, ProblemVariant::Cbp).map_err(err_str)?;

    let writer = ArtifactWriter::new(out, "scaling").map_err(err_str)?;
    let mut rows = Vec::new();
    for (variant, probe) in [("lasso", &probe_l), ("cbp", &probe_c)] {
        for r in &probe.rows {
            rows.push(vec![
                variant.to_string(),
                r.p.to_string(),
                g17(r.h),
                r.lambda0.map(g17).unwrap_or_default(),
                r.terminal_slope_inf.map(g17).unwrap_or_default(),
                r.error.clone().unwrap_or_default(),
            ]);
        }
    }
    let sha = writer
        .write_csv("variant,p,h,lambda0,terminal_slope_inf,status", &rows)
        .map_err(err_str)?;

    let mut chart = LineChart::new(
        &format!(
            "lambda0 scaling (lasso slope {:.2}, cbp slope {:.2})",
            probe_l.lambda0_slope, probe_c.lambda0_slope
        ),
        "h",
        "lambda0",
    );
    chart.log_x = true;
    chart.log_y = true;
    for (label, probe) in [("lasso", &probe_l), ("cbp", &probe_c)] {
        chart.add_series(
            label,
            probe
                .rows
                .iter()
                .filter_map(|r| r.lambda0.map(|l| (r.h, l)))
                .collect(),
        );
    }
    writer.write_svg(&chart.render()).map_err(err_str)?;

    let checks = vec![
        Check::new(
            "lasso_slope_near_one",
            (0.7..=1.3).contains(&probe_l.lambda0_slope),
            format!("slope {:.3}", probe_l.lambda0_slope),
        ),
        Check::new(
            "cbp_slope_near_three",
            (2.5..=3.5).contains(&probe_c.lambda0_slope),
            format!("slope {:.3}", probe_c.lambda0_slope),
        ),
    ];

    #[derive(Serialize)]
    struct Data {
        lasso: certiscope_core::thingrid::ScalingProbe,
        cbp: certiscope_core::thingrid::ScalingProbe,
    }
    let artifact = writer
        .finish(
            sha.clone(),
            &Summary {
                config,
                checks: checks.clone(),
                csv_sha256: sha,
                data: Data { lasso: probe_l, cbp: probe_c },
            },
        )
        .map_err(err_str)?;
    Ok((artifact, checks))
}

// ---------------------------------------------------------------------------

pub fn cmd_gamma(config: GammaConfig, out: &Path) -> CmdResult {
    let max_p = config.grid_sizes.iter().copied().max().unwrap_or(64);
    let kernel = kernel_for(&config.spikes, max_p);
    let m0 = config.spikes.measure().map_err(err_str)?;
    let y = m0.observe(&kernel).map_err(err_str)?;
    let grids: Vec<GridSpec> = config.grid_sizes.iter().map(|&p| GridSpec::new(p)).collect();

    let probe_l = gamma_convergence_probe(&kernel, &y, config.lambda, &grids, ProblemVariant::Lasso)
        .map_err(err_str)?;
    let probe_c = if m0.is_positive() {
        Some(
            gamma_convergence_probe(&kernel, &y, config.lambda, &grids, ProblemVariant::Cbp)
                .map_err(err_str)?,
        )
    } else {
        None
    };

    let writer = ArtifactWriter::new(out, "gamma").map_err(err_str)?;
    let mut rows = Vec::new();
    for (variant, probe) in
        [("lasso", Some(&probe_l)), ("cbp", probe_c.as_ref())]
    {
        if let Some(probe) = probe {
            for (k, &p) in probe.grid_sizes.iter().enumerate() {
                rows.push(vec![
                    variant.to_string(),
                    p.to_string(),
                    g17(1.0 / p as f64),
                    g17(probe.values[k]),
                ]);
            }
        }
    }
    let sha = writer.write_csv("variant,p,h,value", &rows).map_err(err_str)?;

    let mut chart = LineChart::new("Optimal values over nested grids", "P", "objective");
    chart.log_x = true;
    chart.add_series(
        "lasso",
        probe_l.grid_sizes.iter().zip(&probe_l.values).map(|(&p, &v)| (p as f64, v)).collect(),
    );
    if let Some(pc) = &probe_c {
        chart.add_series(
            "cbp",
            pc.grid_sizes.iter().zip(&pc.values).map(|(&p, &v)| (p as f64, v)).collect(),
        );
    }
    writer.write_svg(&chart.render()).map_err(err_str)?;

    let scale = probe_l.values[0].max(1.0);
    let mut checks = vec![
        Check::new("lasso_values_nonincreasing", probe_l.monotone, format!("{:?}", probe_l.values)),
        Check::new(
            "lasso_final_increment_small",
            probe_l.increments.last().map(|&d| d.abs() < 1e-4 * scale).unwrap_or(false),
            format!("{:?}", probe_l.increments),
        ),
    ];
    if let Some(pc) = &probe_c {
        let scale_c = pc.values[0].max(1.0);
        checks.push(Check::new(
            "cbp_values_converge",
            pc.increments.last().map(|&d| d.abs() < 1e-4 * scale_c).unwrap_or(false),
            format!("values {:?} (coarse grids may undershoot the limit)", pc.values),
        ));
    }

    #[derive(Serialize)]
    struct Data {
        lasso: certiscope_core::thingrid::GammaProbe,
        cbp: Option<certiscope_core::thingrid::GammaProbe>,
    }
    let artifact = writer
        .finish(
            sha.clone(),
            &Summary {
                config,
                checks: checks.clone(),
                csv_sha256: sha,
                data: Data { lasso: probe_l, cbp: probe_c },
            },
        )
        .map_err(err_str)?;
    Ok((artifact, checks))
}

// ---------------------------------------------------------------------------

pub fn cmd_gram_check(config: GramCheckConfig, out: &Path) -> CmdResult {
    let kernel = kernel_for(&config.spikes, 1);
    let m0 = config.spikes.measure().map_err(err_str)?;
    let h_list: Vec<f64> = config.h_exponents.iter().map(|&k| (2.0f64).powi(k)).collect();

    let rep_l =
        gram_expansion_check(&kernel, &m0, &h_list, ProblemVariant::Lasso).map_err(err_str)?;
    let rep_c = if m0.is_positive() {
        Some(gram_expansion_check(&kernel, &m0, &h_list, ProblemVariant::Cbp).map_err(err_str)?)
    } else {
        None
    };

    let writer = ArtifactWriter::new(out, "gram-check").map_err(err_str)?;
    let mut rows = Vec::new();
    for (variant, rep) in [("lasso", Some(&rep_l)), ("cbp", rep_c.as_ref())] {
        if let Some(rep) = rep {
            for r in &rep.rows {
                rows.push(vec![
                    variant.to_string(),
                    g17(r.h),
                    r.residual.map(g17).unwrap_or_default(),
                    r.ratio.map(g17).unwrap_or_default(),
                    r.error.clone().unwrap_or_default(),
                ]);
            }
        }
    }
    let sha = writer.write_csv("variant,h,residual,ratio,status", &rows).map_err(err_str)?;

    let mut chart = LineChart::new("Inverse-Gram expansion residual ratios", "h", "ratio");
    chart.log_x = true;
    chart.log_y = true;
    for (label, rep) in [("lasso", Some(&rep_l)), ("cbp", rep_c.as_ref())] {
        if let Some(rep) = rep {
            chart.add_series(
                label,
                rep.rows.iter().filter_map(|r| r.ratio.map(|q| (r.h, q))).collect(),
            );
        }
    }
    writer.write_svg(&chart.render()).map_err(err_str)?;

    let mut checks =
        vec![Check::new("lasso_ratios_decreasing", rep_l.ratios_decreasing, "")];
    if let Some(rc) = &rep_c {
        checks.push(Check::new("cbp_ratios_decreasing", rc.ratios_decreasing, ""));
    }

    #[derive(Serialize)]
    struct Data {
        lasso: certiscope_core::thingrid::GramExpansionReport,
        cbp: Option<certiscope_core::thingrid::GramExpansionReport>,
    }
    let artifact = writer
        .finish(
            sha.clone(),
            &Summary {
                config,
                checks: checks.clone(),
                csv_sha256: sha,
                data: Data { lasso: rep_l, cbp: rep_c },
            },
        )
        .map_err(err_str)?;
    Ok((artifact, checks))
}
