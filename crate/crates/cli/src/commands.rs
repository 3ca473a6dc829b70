use anyhow::{bail, Context, Result};
use rdd_core::dgp::{coverage_study, generate, CoverageStudy, DgpSpec};
use rdd_core::falsify::{
    binomial_density_test, covariate_balance, density_discontinuity_test, donut_hole,
    first_stage_f, first_stage_f_between, placebo_cutoffs, sensitivity_sweep, BalanceSettings,
    DiagnosticReport, Neighborhoods,
};
use rdd_core::locrand::{
    effect_grid, fisher_ci, fisher_test, select_window, superpop_estimate, RandomizationConfig,
    TestStatistic, WindowGrowth, WindowSelectionConfig,
};
use rdd_core::rdplot::{build_rdplot, histogram_svg, score_histogram, Binning, PlotOptions};
use rdd_core::seed::derive_seed;
use rdd_core::{
    estimate_fuzzy, estimate_sharp, score_profile, ColumnMap, Compliance, RDResult, RdError, Target,
};
use serde_json::json;

use crate::args::{
    BinningArg, DataArgs, DensityArgs, DgpArg, EstimatorArgs, FalsifyArgs, FrameworkArg, OutArgs,
    PlotArgs, RandinfArgs, SimulateArgs, StatisticArg, WinselectArgs,
};
use crate::output::{ci2, f2, num, report, write_file, write_outputs, Renderings};
use crate::setup::{estimation_spec, resolve, window};

fn effect_table(rows: &[(&str, &RDResult)], level: f64) -> String {
    let ci_head = format!("{:.0}% Robust CI", level * 100.0);
    let mut s = format!(
        "{:<14} {:>10} {:>18} {:>9} {:>10} {:>7} {:>7}\n",
        "", "RD Effect", ci_head, "p-value", "Bandwidth", "N-_h", "N+_h"
    );
    for (label, r) in rows {
        s += &format!(
            "{:<14} {:>10} {:>18} {:>9} {:>10} {:>7} {:>7}\n",
            label,
            f2(r.point),
            ci2(r.ci_rbc.lower, r.ci_rbc.upper),
            f2(r.p_rbc),
            f2(r.h),
            r.n_minus_h,
            r.n_plus_h
        );
    }
    s
}

pub fn estimate(data: &DataArgs, est: &EstimatorArgs, out: &OutArgs) -> Result<()> {
    let cfg = resolve(data)?;
    let spec = estimation_spec(est)?;
    let d = cfg.load()?;
    let design = cfg.design();
    let profile = score_profile(&d, &design);
    let (table, result) = match design.compliance {
        Compliance::Sharp => {
            let r = estimate_sharp(&d, &design, &spec)?;
            (effect_table(&[("RD effect", &r)], est.level), json!(r))
        }
        Compliance::Fuzzy => {
            let r = estimate_fuzzy(&d, &design, &spec)?;
            (
                effect_table(
                    &[
                        ("First stage", &r.first_stage),
                        ("ITT", &r.outcome),
                        ("Fuzzy RD", &r.ratio),
                    ],
                    est.level,
                ),
                json!(r),
            )
        }
    };
    print!("{table}");
    println!(
        "kernel: {}, p = {}, q = {}, variance: {:?}",
        spec.kernel, spec.p, spec.q, spec.variance
    );
    if profile.has_mass_points() {
        println!(
            "score has mass points: {} distinct values ({} below, {} above)",
            profile.k, profile.k_minus, profile.k_plus
        );
    }
    let config = json!({ "data": cfg, "estimator": spec });
    let rep = report(
        "estimate",
        &config,
        &json!({ "estimates": result, "score_profile": profile }),
    )?;
    write_outputs(out, &rep, Renderings::default())
}

pub fn winselect(data: &DataArgs, win: &WinselectArgs, out: &OutArgs) -> Result<()> {
    let cfg = resolve(data)?;
    if cfg.covariates.is_empty() {
        bail!("winselect needs --covariates");
    }
    let d = cfg.load()?;
    let design = cfg.design();
    let growth = if win.masspoints {
        WindowGrowth::MassPoints
    } else if let Some(w) = win.wstep {
        WindowGrowth::Width(w)
    } else if let Some(m) = win.wobs {
        WindowGrowth::Observations(m)
    } else {
        WindowGrowth::Auto
    };
    let wc = WindowSelectionConfig {
        covariates: cfg.covariates.clone(),
        threshold: win.threshold,
        min_side: win.min_side,
        growth,
        max_windows: (win.nwindows > 0).then_some(win.nwindows),
        reps: cfg.reps,
        seed: cfg.seed,
    };
    let trace = select_window(&d, &design, &wc)?;
    let mut head = format!("{:<24} {:>6} {:>6} {:>8}", "Window", "N-", "N+", "min p");
    for c in &cfg.covariates {
        head += &format!(" {:>10}", truncate(c, 10));
    }
    println!("{head}");
    for c in &trace.candidates {
        let w = &c.window;
        let mark = if *w == trace.chosen && !trace.no_balanced_window {
            " *"
        } else {
            ""
        };
        let mut line = format!(
            "{:<24} {:>6} {:>6} {:>8.3}",
            format!("[{}, {}]", num(w.lower), num(w.upper)),
            w.n_minus,
            w.n_plus,
            c.min_p_value
        );
        for b in &c.balance {
            line += &format!(" {:>10.3}", b.p_value);
        }
        println!("{line}{mark}");
    }
    if trace.no_balanced_window {
        println!(
            "no balanced window: even the smallest window has min p < {}",
            trace.threshold
        );
    } else {
        println!(
            "chosen window: [{}, {}] ({} observations)",
            num(trace.chosen.lower),
            num(trace.chosen.upper),
            trace.chosen.total()
        );
    }
    let rep = report(
        "winselect",
        &json!({ "data": cfg, "winselect": win }),
        &trace,
    )?;
    write_outputs(out, &rep, Renderings::default())
}

fn truncate(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}

pub fn randinf(data: &DataArgs, ra: &RandinfArgs, out: &OutArgs) -> Result<()> {
    let cfg = resolve(data)?;
    let d = cfg.load()?;
    let design = cfg.design();
    let Some(w) = window(&d, &design, &ra.window)? else {
        bail!("randinf needs a window: --wl and --wr, or --w");
    };
    let fuzzy = design.compliance == Compliance::Fuzzy;
    let statistic = match ra.statistic {
        Some(StatisticArg::Diffmeans) => TestStatistic::DiffMeans,
        Some(StatisticArg::Tsls) => TestStatistic::TwoStage,
        None if fuzzy => TestStatistic::TwoStage,
        None => TestStatistic::DiffMeans,
    };
    let rc = RandomizationConfig {
        reps: cfg.reps,
        seed: cfg.seed,
    };
    let mut fisher = fisher_test(&d, &design, &w, &Target::Outcome, statistic, &rc)?;
    if let Some(g) = &ra.ci {
        if g.len() != 3 {
            bail!("--ci expects lower,upper,step");
        }
        let grid = effect_grid(g[0], g[1], g[2])?;
        fisher.ci = Some(fisher_ci(
            &d,
            &design,
            &w,
            &Target::Outcome,
            statistic,
            &grid,
            ra.alpha,
            &rc,
        )?);
    }
    let two_stage = fuzzy || statistic == TestStatistic::TwoStage;
    let cv = rdd_core::stats::critical_value(1.0 - ra.alpha);
    let sp = superpop_estimate(&d, &design, &w, &Target::Outcome, two_stage, cv);
    println!(
        "window [{}, {}]: {} below, {} at or above",
        num(w.lower),
        num(w.upper),
        w.n_minus,
        w.n_plus
    );
    println!(
        "statistic ({:?}) = {:.3}, Fisherian p = {:.3} ({:?}, {} assignments, seed {})",
        statistic,
        fisher.statistic,
        fisher.p_value,
        fisher.method,
        fisher.n_permutations,
        fisher.seed
    );
    if let Some(ci) = &fisher.ci {
        println!(
            "{:.0}% CI under a constant-effect model: {}",
            (1.0 - ra.alpha) * 100.0,
            ci2(ci.lower, ci.upper)
        );
    }
    match &sp {
        Ok(s) => {
            println!(
                "large sample: diff in means {} {} p = {}",
                f2(s.outcome.estimate),
                ci2(s.outcome.ci.lower, s.outcome.ci.upper),
                f2(s.outcome.p_value)
            );
            if let (Some(fs), Some(r)) = (&s.first_stage, &s.ratio) {
                println!(
                    "large sample: first stage {} {}",
                    f2(fs.estimate),
                    ci2(fs.ci.lower, fs.ci.upper)
                );
                println!(
                    "large sample: ratio {} {}",
                    f2(r.estimate),
                    ci2(r.ci.lower, r.ci.upper)
                );
            }
        }
        Err(e) => println!("large sample inference unavailable: {e}"),
    }
    let rep = report(
        "randinf",
        &json!({ "data": cfg, "randinf": ra }),
        &json!({ "fisher": fisher, "large_sample": sp.ok() }),
    )?;
    write_outputs(out, &rep, Renderings::default())
}

pub fn density(data: &DataArgs, da: &DensityArgs, out: &OutArgs) -> Result<()> {
    let cfg = resolve(data)?;
    let d = cfg.load()?;
    let design = cfg.design();
    let mut tests = Vec::new();
    let mut notes = Vec::new();
    if let Some(w) = window(&d, &design, &da.window)? {
        tests.push(binomial_density_test(&d, &design, &w, da.prob)?);
    }
    match density_discontinuity_test(&d, &design, da.bin_width, da.h_density) {
        Ok(t) => tests.push(t),
        Err(e @ (RdError::DiscreteScore(_) | RdError::InsufficientBins(_))) => {
            notes.push(format!("local-linear density test skipped: {e}"));
        }
        Err(e) => return Err(e.into()),
    }
    let report_md = DiagnosticReport {
        density: tests.clone(),
        flags: notes.clone(),
        ..Default::default()
    }
    .to_markdown();
    print!("{report_md}");
    let rep = report(
        "density",
        &json!({ "data": cfg, "density": da }),
        &json!({ "tests": tests, "notes": notes }),
    )?;
    write_outputs(
        out,
        &rep,
        Renderings {
            markdown: Some(report_md),
            ..Default::default()
        },
    )
}

pub fn falsify(
    data: &DataArgs,
    est: &EstimatorArgs,
    fa: &FalsifyArgs,
    out: &OutArgs,
) -> Result<()> {
    let cfg = resolve(data)?;
    let spec = estimation_spec(est)?;
    let d = cfg.load()?;
    let design = cfg.design();
    let win = window(&d, &design, &fa.window)?;
    let rc = RandomizationConfig {
        reps: cfg.reps,
        seed: cfg.seed,
    };
    let mut r = DiagnosticReport::default();
    let mut notes = Vec::new();

    if !fa.no_density {
        if let Some(w) = &win {
            r.density.push(binomial_density_test(&d, &design, w, 0.5)?);
        }
        match density_discontinuity_test(&d, &design, None, None) {
            Ok(t) => r.density.push(t),
            Err(e) => notes.push(format!("local-linear density test skipped: {e}")),
        }
    }
    if !cfg.covariates.is_empty() {
        let settings = match fa.framework {
            FrameworkArg::Continuity => BalanceSettings::Continuity(spec),
            FrameworkArg::Fuzzy => {
                if design.compliance != Compliance::Fuzzy {
                    bail!("--framework fuzzy needs --fuzzy and --received");
                }
                BalanceSettings::FuzzyRatio(spec)
            }
            FrameworkArg::Locrand => match &win {
                Some(w) => BalanceSettings::LocalRandomization {
                    window: *w,
                    config: rc,
                },
                None => bail!("--framework locrand needs a window (--wl/--wr or --w)"),
            },
        };
        r.balance_rows = covariate_balance(&d, &design, &cfg.covariates, &settings)?;
    }
    if !fa.placebo_cutoffs.is_empty() {
        r.placebo_rows = placebo_cutoffs(&d, &design, &spec, &fa.placebo_cutoffs)?;
    }
    if !fa.donut.is_empty() {
        r.donut_rows = donut_hole(&d, &design, &spec, &fa.donut)?;
    }
    if !fa.bandwidths.is_empty() {
        r.sensitivity_rows = sensitivity_sweep(
            &d,
            &design,
            &spec,
            &Neighborhoods::Bandwidths(fa.bandwidths.clone()),
        )?;
    }
    if design.compliance == Compliance::Fuzzy {
        r.first_stage_f = Some(match &win {
            Some(w) => first_stage_f_between(&d, &design, w.lower, w.upper)?,
            None => {
                let (h, _) = spec.resolve_bandwidths(&d, &design)?;
                first_stage_f(&d, &design, h)?
            }
        });
    }
    r.refresh_flags();
    r.flags.extend(notes);
    let md = r.to_markdown();
    print!("{md}");
    let rep = report(
        "falsify",
        &json!({ "data": cfg, "estimator": spec, "falsify": fa }),
        &r,
    )?;
    write_outputs(
        out,
        &rep,
        Renderings {
            markdown: Some(md),
            ..Default::default()
        },
    )
}

pub fn plot(data: &DataArgs, pa: &PlotArgs, out: &OutArgs) -> Result<()> {
    let cfg = resolve(data)?;
    let d = cfg.load()?;
    let design = cfg.design();
    let config = json!({ "data": cfg, "plot": pa });
    if pa.histogram {
        let range = pa.range.as_ref().map(|r| (r[0], r[1]));
        let h = score_histogram(&d, &design, pa.bin_width, range)?;
        println!(
            "histogram: {} bins of width {:.4}, {} observations",
            h.bins.len(),
            h.bin_width,
            h.total()
        );
        let rep = report("plot", &config, &h)?;
        return write_outputs(
            out,
            &rep,
            Renderings {
                csv: Some(h.to_csv()),
                svg: Some(histogram_svg(&h)),
                ..Default::default()
            },
        );
    }
    let binning = match pa.binning {
        BinningArg::Auto => Binning::Auto,
        BinningArg::Even => Binning::EvenlySpaced(pa.bins),
        BinningArg::Quantile => Binning::QuantileSpaced(pa.bins),
        BinningArg::Masspoints => Binning::MassPoints,
    };
    let p = build_rdplot(
        &d,
        &design,
        &PlotOptions {
            p_global: pa.p_global,
            binning,
        },
    )?;
    let below = p
        .bins
        .iter()
        .filter(|b| b.upper <= design.cutoff && b.lower < design.cutoff)
        .count();
    println!(
        "rd plot: {:?} binning, {} bins ({} below, {} at or above), global order {}",
        p.binning,
        p.bins.len(),
        below,
        p.bins.len() - below,
        p.p_global
    );
    for f in &p.flags {
        println!("note: {f}");
    }
    let rep = report("plot", &config, &p)?;
    write_outputs(
        out,
        &rep,
        Renderings {
            csv: Some(p.to_csv()),
            svg: Some(p.to_svg()),
            ..Default::default()
        },
    )
}

pub fn simulate(sa: &SimulateArgs, est: &EstimatorArgs, out: &OutArgs) -> Result<()> {
    let study = match &sa.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<CoverageStudy>(&text)
                .with_context(|| format!("parsing {}", path.display()))?
        }
        None => CoverageStudy {
            dgp: match sa.dgp {
                DgpArg::Curved => DgpSpec::curved(sa.n),
                DgpArg::Linear => DgpSpec::linear(sa.n),
            },
            replications: sa.reps,
            master_seed: sa.seed,
            estimator: estimation_spec(est)?,
        },
    };
    let table = coverage_study(&study)?;
    println!(
        "{:<14} {:>9} {:>8} {:>12}",
        "Interval", "Coverage", "SE", "Mean width"
    );
    println!(
        "{:<14} {:>9.3} {:>8.3} {:>12.3}",
        "Conventional",
        table.conventional_coverage,
        table.conventional_se,
        table.mean_conventional_width
    );
    println!(
        "{:<14} {:>9.3} {:>8.3} {:>12.3}",
        "Robust", table.robust_coverage, table.robust_se, table.mean_robust_width
    );
    println!(
        "replications {}, n {}, target {:.4}, mean estimate {:.4}, mean h {:.4}",
        table.replications, table.n, table.target, table.mean_point, table.mean_h
    );
    if let Some(path) = &sa.data_out {
        let spec = study
            .dgp
            .clone()
            .with_seed(derive_seed(study.master_seed, 0));
        let (data, _) = generate(&spec)?;
        let map = ColumnMap {
            score: "x".into(),
            outcome: "y".into(),
            received: spec.compliance.map(|_| "d".into()),
            covariates: vec![],
        };
        let mut buf = Vec::new();
        data.write_csv(&mut buf, &map)?;
        write_file(path, &String::from_utf8(buf)?)?;
    }
    let rep = report("simulate", &study, &table)?;
    write_outputs(
        out,
        &rep,
        Renderings {
            csv: Some(table.to_csv()),
            ..Default::default()
        },
    )
}
