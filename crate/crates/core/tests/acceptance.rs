//! Acceptance criteria. Each test writes one `PASS`/`FAIL` line to stderr
//! (bypassing output capture) and then asserts.

use std::io::Write;
use std::path::PathBuf;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use rdd_core::dgp::{coverage_study, generate, CoverageStudy, DgpSpec, ScoreDensity, TakeUp};
use rdd_core::falsify::{
    binomial_counts_test, covariate_balance, density_discontinuity_test, donut_hole,
    first_stage_f_between, BalanceSettings,
};
use rdd_core::locrand::{
    superpop_estimate, RandMethod, RandomizationConfig, WindowGrowth, WindowSelectionConfig,
};
use rdd_core::rdplot::{build_rdplot, score_histogram, Binning, PlotOptions};
use rdd_core::seed::rng_for;
use rdd_core::{
    estimate_fuzzy, estimate_sharp, fisher_test, load_csv, local_fit, select_window, ColumnMap,
    EstimationSpec, Kernel, RDDataset, RDDesign, RDResult, Side, Target, TestStatistic,
    TreatedSide, Window,
};

fn report(id: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "{tag} [{id}] {detail}");
}

// ---------------------------------------------------------------- 1

#[test]
fn c1_coverage_of_conventional_and_robust_intervals() {
    let study = CoverageStudy {
        dgp: DgpSpec::curved(1000),
        replications: 2000,
        master_seed: 20_240_601,
        estimator: EstimationSpec::default(),
    };
    let t = coverage_study(&study).unwrap();
    let conv_ok = (0.70..=0.88).contains(&t.conventional_coverage);
    let rob_ok = (0.92..=0.975).contains(&t.robust_coverage);
    report(
        "1",
        conv_ok && rob_ok,
        &format!(
            "coverage, curved design n=1000, 2000 reps: conventional {:.3} (target [0.70, 0.88]), robust {:.3} (target [0.92, 0.975])",
            t.conventional_coverage, t.robust_coverage
        ),
    );
    assert!(conv_ok, "conventional coverage {}", t.conventional_coverage);
    assert!(rob_ok, "robust coverage {}", t.robust_coverage);
}

// ---------------------------------------------------------------- 2

#[test]
fn c2a_binomial_38_below_27_above() {
    let p = binomial_counts_test(38, 27, 0.5).p_value;
    let ok = (p - 0.215).abs() <= 0.001;
    report(
        "2a",
        ok,
        &format!("binomial 38 below / 27 above, q=1/2: p = {p:.4} (target 0.215 ± 0.001)"),
    );
    assert!(ok);
}

/// The quoted claim is not reproducible with an exact binomial test; the
/// line is reported (red) here and asserted only in the ignored test below.
#[test]
fn c2b_binomial_83_total_50_above_reported() {
    let p = binomial_counts_test(33, 50, 0.5).p_value;
    report(
        "2b",
        p < 0.005,
        &format!("binomial 83 total / 50 above, q=1/2: p = {p:.4} (target < 0.005; exact two-sided value is 0.0784)"),
    );
    assert!((p - 0.078_419_624_815_807_64).abs() < 1e-9);
}

#[test]
#[ignore = "quoted value p < 0.005 is inconsistent with the exact test (p = 0.0784)"]
fn c2b_binomial_83_total_50_above_claim() {
    assert!(binomial_counts_test(33, 50, 0.5).p_value < 0.005);
}

// ---------------------------------------------------------------- 3

/// Dense normal equations `(Z'WZ) β = Z'Wy` solved by Gaussian elimination
/// with partial pivoting.
#[allow(clippy::needless_range_loop)]
fn normal_equations(u: &[f64], y: &[f64], w: &[f64], p: usize) -> Vec<f64> {
    let k = p + 1;
    let mut a = vec![vec![0.0; k + 1]; k];
    for i in 0..u.len() {
        let z: Vec<f64> = (0..k).map(|j| u[i].powi(j as i32)).collect();
        for r in 0..k {
            for c in 0..k {
                a[r][c] += w[i] * z[r] * z[c];
            }
            a[r][k] += w[i] * z[r] * y[i];
        }
    }
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        for r in col + 1..k {
            let f = a[r][col] / a[col][col];
            for c in col..=k {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut beta = vec![0.0; k];
    for r in (0..k).rev() {
        let s: f64 = (r + 1..k).map(|c| a[r][c] * beta[c]).sum();
        beta[r] = (a[r][k] - s) / a[r][r];
    }
    beta
}

#[test]
fn c3_local_fit_matches_normal_equations_oracle() {
    let kernels = [Kernel::Triangular, Kernel::Uniform, Kernel::Epanechnikov];
    let mut rng = rng_for(3, 0);
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    let mut per_order = [0usize; 3];
    while checked < 1000 {
        let n = rng.random_range(4..=30);
        let p = rng.random_range(0..=2usize);
        let kernel = kernels[rng.random_range(0..3)];
        let c = rng.random_range(-2.0..2.0);
        let h = rng.random_range(0.3..1.5);
        let x: Vec<f64> = (0..n).map(|_| c + rng.random_range(-1.2..1.2)).collect();
        let y: Vec<f64> = x.iter().map(|_| rng.random_range(-3.0..3.0)).collect();
        let side = if rng.random::<bool>() {
            Side::AtOrAbove
        } else {
            Side::Below
        };
        let data = RDDataset::new(x.clone(), y.clone()).unwrap();
        let design = RDDesign::sharp(c);
        let Ok(fit) = local_fit(&data, &design, side, p, h, kernel) else {
            continue;
        };
        let (mut u, mut yy, mut w) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..n {
            if Side::of(x[i], c) != side {
                continue;
            }
            let wi = kernel.weight((x[i] - c) / h);
            if wi > 0.0 {
                u.push(x[i] - c);
                yy.push(y[i]);
                w.push(wi);
            }
        }
        let oracle = normal_equations(&u, &yy, &w, p);
        let scale = oracle
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let err = fit
            .coefficients
            .iter()
            .zip(&oracle)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            / scale;
        worst = worst.max(err);
        per_order[p] += 1;
        checked += 1;
    }
    let ok = worst <= 1e-8;
    report(
        "3",
        ok,
        &format!(
            "local fit vs normal equations, 1000 instances (p=0/1/2: {}/{}/{}), worst relative error {worst:.2e} (target 1e-8)",
            per_order[0], per_order[1], per_order[2]
        ),
    );
    assert!(ok, "{worst}");
}

// ---------------------------------------------------------------- 4

/// Brute force over all bitmasks with the observed number above.
fn brute_force_p(y: &[f64], d: Option<&[f64]>, n_above: usize, stat: TestStatistic) -> f64 {
    let n = y.len();
    let contrast = |mask: u32| -> f64 {
        let (mut ya, mut yb, mut da, mut db) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            if mask >> i & 1 == 1 {
                ya += y[i];
                da += d.map_or(0.0, |d| d[i]);
            } else {
                yb += y[i];
                db += d.map_or(0.0, |d| d[i]);
            }
        }
        let (na, nb) = (n_above as f64, (n - n_above) as f64);
        let dy = ya / na - yb / nb;
        match stat {
            TestStatistic::DiffMeans => dy,
            TestStatistic::TwoStage => dy / (da / na - db / nb),
        }
    };
    // Units are ordered below first, so the observed set is the top `n_above` bits.
    let observed_mask = ((1u32 << n_above) - 1) << (n - n_above);
    let obs = contrast(observed_mask);
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() as usize != n_above {
            continue;
        }
        total += 1;
        let s = contrast(mask);
        if !s.is_finite() || s.abs() >= obs.abs() * (1.0 - 1e-9) {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

fn small_window(
    rng: &mut impl RngCore,
    n: usize,
    n_above: usize,
    fuzzy: bool,
) -> (RDDataset, Window) {
    let x: Vec<f64> = (0..n)
        .map(|i| i as f64 - (n - n_above) as f64 + 0.5)
        .collect();
    let integer = rng.random::<bool>();
    let y: Vec<f64> = (0..n)
        .map(|_| {
            if integer {
                rng.random_range(0..4) as f64
            } else {
                rng.random_range(-2.0..2.0)
            }
        })
        .collect();
    let mut data = RDDataset::new(x.clone(), y).unwrap();
    if fuzzy {
        let d: Vec<f64> = x
            .iter()
            .map(|&v| {
                f64::from(u8::from(
                    rng.random::<f64>() < if v > 0.0 { 0.7 } else { 0.3 },
                ))
            })
            .collect();
        data = data.with_received(d).unwrap();
    }
    let design = RDDesign::sharp(0.0);
    let w = Window::new(&data, &design, x[0], x[n - 1]).unwrap();
    (data, w)
}

#[test]
fn c4_permutation_exactness() {
    let design = RDDesign::sharp(0.0);
    let mut rng = rng_for(4, 0);
    let mut exact_cases = 0;
    let mut exact_mismatch = 0;
    let mut two_stage_cases = 0;
    while exact_cases < 300 {
        let n = rng.random_range(2..=20usize);
        let n_above = rng.random_range(1..n);
        if rdd_core::locrand::binomial_coefficient(n, n_above) > 100_000 {
            continue;
        }
        let fuzzy = rng.random::<f64>() < 0.3;
        let (data, w) = small_window(&mut rng, n, n_above, fuzzy);
        let stat = if fuzzy {
            TestStatistic::TwoStage
        } else {
            TestStatistic::DiffMeans
        };
        let r = fisher_test(
            &data,
            &design,
            &w,
            &Target::Outcome,
            stat,
            &RandomizationConfig::default(),
        )
        .unwrap();
        assert_eq!(r.method, RandMethod::FisherExact);
        let oracle = brute_force_p(data.outcome(), data.received(), n_above, stat);
        if r.p_value != oracle {
            exact_mismatch += 1;
        }
        exact_cases += 1;
        two_stage_cases += usize::from(fuzzy);
    }
    let mut mc_worst: f64 = 0.0;
    let mut mc_ok = true;
    for k in 0..6 {
        let (data, w) = small_window(&mut rng, 20, 8 + k % 5, false);
        let config = RandomizationConfig {
            reps: 50_000,
            seed: 100 + k as u64,
        };
        let r = fisher_test(
            &data,
            &design,
            &w,
            &Target::Outcome,
            TestStatistic::DiffMeans,
            &config,
        )
        .unwrap();
        assert_eq!(r.method, RandMethod::FisherMonteCarlo);
        let exact = brute_force_p(data.outcome(), None, 8 + k % 5, TestStatistic::DiffMeans);
        let se = (exact * (1.0 - exact) / 50_000.0)
            .sqrt()
            .max(1.0 / 50_000.0);
        let z = (r.p_value - exact).abs() / se;
        mc_worst = mc_worst.max(z);
        mc_ok &= z <= 3.0;
    }
    let ok = exact_mismatch == 0 && mc_ok;
    report(
        "4",
        ok,
        &format!(
            "Fisher exact vs brute force on {exact_cases} windows of <= 20 units ({two_stage_cases} two-stage): {exact_mismatch} mismatches (target 0, bit-exact); Monte Carlo 50,000 draws on 6 windows of 20 units: worst |diff| = {mc_worst:.2} SE (target <= 3)"
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------- 5

#[test]
fn c5_fuzzy_ratio_identity() {
    let worst = (0..100u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = rng_for(5, s);
            let lo = rng.random_range(0.0..0.4);
            let spec = DgpSpec {
                compliance: Some(TakeUp {
                    p_below: lo,
                    p_above: lo + rng.random_range(0.2..0.6),
                }),
                mu_above: vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                ..DgpSpec::linear(rng.random_range(400..2000)).with_seed(s)
            };
            let (data, _) = generate(&spec).unwrap();
            let r = estimate_fuzzy(&data, &spec.design(), &EstimationSpec::default()).unwrap();
            assert_eq!(r.outcome.h, r.first_stage.h);
            (r.ratio.point * r.first_stage.point - r.outcome.point).abs()
                / r.outcome.point.abs().max(1.0)
        })
        .reduce(|| 0.0, f64::max);
    let ok = worst <= 1e-12;
    report(
        "5",
        ok,
        &format!("fuzzy ratio identity on 100 datasets: worst |tau_FRD * tau_D - tau_Y| = {worst:.2e} (target 1e-12)"),
    );
    assert!(ok);
}

// ---------------------------------------------------------------- 6

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

fn same_estimates(a: &RDResult, b: &RDResult, rel: f64) -> bool {
    close(a.point, b.point, rel)
        && close(a.bias_correction, b.bias_correction, rel)
        && close(a.se_conventional, b.se_conventional, rel)
        && close(a.se_robust, b.se_robust, rel)
        && close(a.h, b.h, rel)
        && close(a.b, b.b, rel)
        && a.n_minus_h == b.n_minus_h
        && a.n_plus_h == b.n_plus_h
}

#[test]
fn c6_invariance_suite() {
    let spec = DgpSpec {
        covariates: 1,
        compliance: Some(TakeUp {
            p_below: 0.2,
            p_above: 0.8,
        }),
        ..DgpSpec::curved(1500).with_seed(6)
    };
    let (data, _) = generate(&spec).unwrap();
    let design = spec.design();
    let sharp_design = RDDesign::sharp(0.0);
    let est = EstimationSpec::default();
    let mut checks: Vec<(&str, bool)> = Vec::new();

    // Location: (X, c) -> (X + a, c + a).
    let a = 3.0;
    let shifted = RDDataset::new(
        data.score().iter().map(|v| v + a).collect(),
        data.outcome().to_vec(),
    )
    .unwrap()
    .with_received(data.received().unwrap().to_vec())
    .unwrap();
    let shifted_design = RDDesign {
        cutoff: a,
        ..design
    };
    let base = estimate_fuzzy(&data, &design, &est).unwrap();
    let moved = estimate_fuzzy(&shifted, &shifted_design, &est).unwrap();
    let window = Window::symmetric(&data, &design, 0.1).unwrap();
    let moved_window = Window::symmetric(&shifted, &shifted_design, 0.1).unwrap();
    let fz = fisher_test(
        &data,
        &design,
        &window,
        &Target::Outcome,
        TestStatistic::DiffMeans,
        &Default::default(),
    )
    .unwrap();
    let fz_moved = fisher_test(
        &shifted,
        &shifted_design,
        &moved_window,
        &Target::Outcome,
        TestStatistic::DiffMeans,
        &Default::default(),
    )
    .unwrap();
    let sp = superpop_estimate(&data, &design, &window, &Target::Outcome, true, 1.96).unwrap();
    let sp_moved = superpop_estimate(
        &shifted,
        &shifted_design,
        &moved_window,
        &Target::Outcome,
        true,
        1.96,
    )
    .unwrap();
    checks.push((
        "location",
        same_estimates(&base.outcome, &moved.outcome, 1e-8)
            && same_estimates(&base.first_stage, &moved.first_stage, 1e-8)
            && same_estimates(&base.ratio, &moved.ratio, 1e-8)
            && fz.statistic == fz_moved.statistic
            && fz.p_value == fz_moved.p_value
            && sp.outcome.estimate == sp_moved.outcome.estimate
            && sp.ratio.unwrap().estimate == sp_moved.ratio.unwrap().estimate,
    ));

    // Sign flip: (X, c) -> (-X, -c) with the treated side swapped.
    let negated = RDDataset::new(
        data.score().iter().map(|v| -v).collect(),
        data.outcome().to_vec(),
    )
    .unwrap();
    let flipped = RDDesign::sharp(-0.0).with_treated_side(TreatedSide::Below);
    let r = estimate_sharp(&data, &sharp_design, &est).unwrap();
    let rf = estimate_sharp(&negated, &flipped, &est).unwrap();
    checks.push((
        "sign flip",
        rf.point == -r.point && rf.bias_correction == -r.bias_correction && rf.h == r.h,
    ));

    // Outcome affine map Y -> alpha Y + beta.
    let mut affine_ok = true;
    for (alpha, beta) in [(2.5, -7.0), (-0.5, 3.0)] {
        let ay = data
            .with_outcome(data.outcome().iter().map(|v| alpha * v + beta).collect())
            .unwrap();
        let ra = estimate_sharp(&ay, &sharp_design, &est).unwrap();
        let (lo, hi) = if alpha > 0.0 {
            (alpha * r.ci_rbc.lower, alpha * r.ci_rbc.upper)
        } else {
            (alpha * r.ci_rbc.upper, alpha * r.ci_rbc.lower)
        };
        let (clo, chi) = if alpha > 0.0 {
            (
                alpha * r.ci_conventional.lower,
                alpha * r.ci_conventional.upper,
            )
        } else {
            (
                alpha * r.ci_conventional.upper,
                alpha * r.ci_conventional.lower,
            )
        };
        affine_ok &= close(ra.point, alpha * r.point, 1e-8)
            && close(ra.bias_correction, alpha * r.bias_correction, 1e-8)
            && close(ra.ci_rbc.lower, lo, 1e-8)
            && close(ra.ci_rbc.upper, hi, 1e-8)
            && close(ra.ci_conventional.lower, clo, 1e-8)
            && close(ra.ci_conventional.upper, chi, 1e-8);
    }
    checks.push(("outcome affine", affine_ok));

    // Donut radius 0 is the identity.
    let donut = donut_hole(&data, &sharp_design, &est, &[0.0]).unwrap();
    let donut_ok = match &donut[0].detail {
        rdd_core::falsify::RowDetail::Continuity { result } => *result == r,
        _ => false,
    };
    checks.push(("donut r=0", donut_ok));

    // Plot mass conservation.
    let mut mass_ok = true;
    for binning in [
        Binning::EvenlySpaced(20),
        Binning::QuantileSpaced(15),
        Binning::MassPoints,
    ] {
        let plot = build_rdplot(
            &data,
            &sharp_design,
            &PlotOptions {
                p_global: 4,
                binning,
            },
        )
        .unwrap();
        mass_ok &= plot.bins.iter().map(|b| b.count).sum::<usize>() == data.len();
    }
    let hist = score_histogram(&data, &sharp_design, None, None).unwrap();
    mass_ok &= hist.total() as usize == data.len();
    let ranged = score_histogram(&data, &sharp_design, Some(0.05), Some((-0.3, 0.3))).unwrap();
    let in_range = data
        .score()
        .iter()
        .filter(|&&v| (-0.3..=0.3).contains(&v))
        .count();
    mass_ok &= ranged.total() as usize == in_range;
    checks.push(("plot mass", mass_ok));

    let ok = checks.iter().all(|(_, p)| *p);
    let detail: Vec<String> = checks
        .iter()
        .map(|(n, p)| format!("{n}: {}", if *p { "ok" } else { "broken" }))
        .collect();
    report("6", ok, &format!("invariances ({})", detail.join(", ")));
    assert!(ok, "{checks:?}");
}

// ---------------------------------------------------------------- 7

#[test]
fn c7_null_calibration_of_diagnostics() {
    let reps = 1000u64;
    let density_rej = (0..reps)
        .into_par_iter()
        .filter(|&r| {
            let spec = DgpSpec {
                score: ScoreDensity::Uniform {
                    lower: -1.0,
                    upper: 1.0,
                },
                ..DgpSpec::linear(10_000).with_seed(70_000 + r)
            };
            let (d, _) = generate(&spec).unwrap();
            density_discontinuity_test(&d, &RDDesign::sharp(0.0), None, None)
                .unwrap()
                .p_value
                < 0.05
        })
        .count() as f64
        / reps as f64;
    let balance_rej = (0..reps)
        .into_par_iter()
        .filter(|&r| {
            let spec = DgpSpec {
                covariates: 1,
                ..DgpSpec::linear(1000).with_seed(71_000 + r)
            };
            let (d, _) = generate(&spec).unwrap();
            let rows = covariate_balance(
                &d,
                &RDDesign::sharp(0.0),
                &["z1".to_string()],
                &BalanceSettings::Continuity(EstimationSpec::default()),
            )
            .unwrap();
            rows[0].p_value() < 0.05
        })
        .count() as f64
        / reps as f64;
    let range = 0.035..=0.065;
    let ok = range.contains(&density_rej) && range.contains(&balance_rej);
    report(
        "7",
        ok,
        &format!(
            "null rejection at 5% over 1000 reps: density {:.1}%, covariate balance {:.1}% (target [3.5%, 6.5%])",
            100.0 * density_rej,
            100.0 * balance_rej
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------- 8

/// Golden checks against the public replication data, exported to CSV in
/// `$RD_REPLICATION_DIR` (see README for the expected files and columns).
#[test]
fn c8_conditional_golden_tests() {
    let Some(dir) = std::env::var_os("RD_REPLICATION_DIR").map(PathBuf::from) else {
        let _ = writeln!(
            std::io::stderr(),
            "SKIP [8] golden tests: RD_REPLICATION_DIR not set"
        );
        return;
    };
    let mut lines: Vec<(String, bool)> = Vec::new();
    let est = EstimationSpec::default();

    let art = dir.join("art.csv");
    if art.exists() {
        let covs: Vec<String> = [
            "age1", "age2", "age3", "age4", "age5", "age6", "age7", "age8", "qtr1", "qtr2", "qtr3",
            "qtr4", "qtr5", "qtr6", "clinic_a", "clinic_b", "clinic_c",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let map = ColumnMap {
            score: "cd4".into(),
            outcome: "visit_test_6_18".into(),
            received: Some("art_6m".into()),
            covariates: covs.clone(),
        };
        let data = load_csv(&art, &map).unwrap();
        let design = RDDesign::sharp(350.0)
            .with_treated_side(TreatedSide::Below)
            .fuzzy();
        let r = estimate_fuzzy(&data, &design, &est).unwrap();
        lines.push((
            format!("ART tau_D {:.3} (target -0.21 ± 0.03)", r.first_stage.point),
            (r.first_stage.point + 0.21).abs() <= 0.03,
        ));
        lines.push((
            format!("ART tau_Y {:.3} (target -0.14 ± 0.03)", r.outcome.point),
            (r.outcome.point + 0.14).abs() <= 0.03,
        ));
        lines.push((
            format!("ART tau_FRD {:.3} (target 0.67 ± 0.08)", r.ratio.point),
            (r.ratio.point - 0.67).abs() <= 0.08,
        ));
        lines.push((
            format!("ART h {:.2} (target 114.36 ± 15%)", r.outcome.h),
            (r.outcome.h / 114.36 - 1.0).abs() <= 0.15,
        ));
        let mut wc = WindowSelectionConfig::new(covs);
        wc.growth = WindowGrowth::Width(1.0);
        wc.seed = 50;
        wc.reps = 1000;
        let trace = select_window(&data, &design, &wc).unwrap();
        let (lo, hi) = (trace.chosen.lower, trace.chosen.upper);
        lines.push((
            format!("ART window [{lo}, {hi}] (target [346, 354] ± one mass point per side)"),
            (lo - 346.0).abs() <= 1.0 && (hi - 354.0).abs() <= 1.0,
        ));
    }

    let cost = dir.join("costsharing.csv");
    if cost.exists() {
        let data = load_csv(&cost, &ColumnMap::new("week", "visits")).unwrap();
        let design = RDDesign::sharp(0.0);
        let r = estimate_sharp(&data, &design, &est).unwrap();
        lines.push((
            format!("cost-sharing effect {:.3} (target -1.29 ± 0.15)", r.point),
            (r.point + 1.29).abs() <= 0.15,
        ));
        let w = Window::new(&data, &design, -1.0, 0.0).unwrap();
        let f = fisher_test(
            &data,
            &design,
            &w,
            &Target::Outcome,
            TestStatistic::DiffMeans,
            &RandomizationConfig::default(),
        )
        .unwrap();
        lines.push((
            format!(
                "cost-sharing Fisher diff {:.3}, p {:.4} (targets -1.362 ± 0.01, 0.006 ± 0.003)",
                f.statistic, f.p_value
            ),
            (f.statistic + 1.362).abs() <= 0.01
                && (f.p_value - 0.006).abs() <= 0.003
                && f.method == RandMethod::FisherExact,
        ));
    }

    let chemo = dir.join("chemo.csv");
    if chemo.exists() {
        let map = ColumnMap {
            score: "oncotype".into(),
            outcome: "recurrence".into(),
            received: Some("chemo".into()),
            covariates: vec![],
        };
        let data = load_csv(&chemo, &map).unwrap();
        let design = RDDesign::sharp(26.0).fuzzy();
        let f = first_stage_f_between(&data, &design, 25.0, 26.0).unwrap();
        lines.push((
            format!(
                "chemotherapy first-stage F {:.2} on [25, 26] (target < 10, weak flag)",
                f.f
            ),
            f.f < 10.0 && f.weak,
        ));
    }

    if lines.is_empty() {
        let _ = writeln!(
            std::io::stderr(),
            "SKIP [8] golden tests: no replication CSVs in {}",
            dir.display()
        );
        return;
    }
    for (text, pass) in &lines {
        report("8", *pass, text);
    }
    assert!(lines.iter().all(|(_, p)| *p));
}
