use rayon::prelude::*;
use rdd_core::dgp::{coverage_study, generate, CoverageStudy, DgpSpec, ScoreDensity, TakeUp};
use rdd_core::locrand::{select_window, RandomizationConfig, WindowGrowth, WindowSelectionConfig};
use rdd_core::*;

fn selected_h(spec: &DgpSpec) -> f64 {
    let (data, _) = generate(spec).unwrap();
    select_bandwidth(
        &data,
        &spec.design(),
        1,
        Kernel::Triangular,
        &Target::Outcome,
    )
    .unwrap()
    .h
}

fn mean_h(n: usize, reps: u64, base_seed: u64) -> f64 {
    let total: f64 = (0..reps)
        .into_par_iter()
        .map(|r| selected_h(&DgpSpec::curved(n).with_seed(base_seed + r)))
        .sum();
    total / reps as f64
}

#[test]
fn bandwidth_shrinks_at_the_mse_rate() {
    let small = mean_h(4_000, 500, 1_000);
    let large = mean_h(64_000, 500, 2_000);
    let ratio = large / small;
    let expect = 16f64.powf(-0.2);
    eprintln!("mean h {small:.4} -> {large:.4}, ratio {ratio:.4} (rate {expect:.4})");
    assert!((ratio / expect - 1.0).abs() < 0.10);
}

#[test]
fn mean_bandwidth_decreases_with_sample_size() {
    let hs: Vec<f64> = [500, 2000, 8000]
        .iter()
        .enumerate()
        .map(|(i, &n)| mean_h(n, 200, 10_000 * (i as u64 + 1)))
        .collect();
    eprintln!("mean h by n: {hs:?}");
    for pair in hs.windows(2) {
        assert!(pair[1] < pair[0] * 1.05);
    }
}

#[test]
fn bandwidth_stays_between_the_feasibility_floor_and_the_range() {
    for seed in 0..200u64 {
        let n = [60, 200, 1000][seed as usize % 3];
        let spec = DgpSpec::curved(n).with_seed(seed);
        let (data, _) = generate(&spec).unwrap();
        let h = select_bandwidth(
            &data,
            &spec.design(),
            1,
            Kernel::Triangular,
            &Target::Outcome,
        )
        .unwrap()
        .h;
        let x = data.score();
        let range =
            x.iter().cloned().fold(f64::MIN, f64::max) - x.iter().cloned().fold(f64::MAX, f64::min);
        assert!(h <= range * (1.0 + 1e-6), "h {h} > range {range}");
        for below in [true, false] {
            let mut d: Vec<f64> = x
                .iter()
                .filter(|&&v| (v < 0.0) == below)
                .map(|v| v.abs())
                .collect();
            d.sort_by(f64::total_cmp);
            d.dedup();
            assert!(h >= d[2], "h {h} below third distinct distance {}", d[2]);
        }
    }
}

#[test]
fn bandwidth_ignores_outcome_scale_and_score_location() {
    for seed in 0..50u64 {
        let spec = DgpSpec::curved(800).with_seed(seed);
        let (data, _) = generate(&spec).unwrap();
        let design = spec.design();
        let h = select_bandwidth(&data, &design, 1, Kernel::Triangular, &Target::Outcome)
            .unwrap()
            .h;
        let doubled = RDDataset::new(
            data.score().to_vec(),
            data.outcome().iter().map(|v| 2.0 * v).collect(),
        )
        .unwrap();
        let h2 = select_bandwidth(&doubled, &design, 1, Kernel::Triangular, &Target::Outcome)
            .unwrap()
            .h;
        assert!((h2 / h - 1.0).abs() < 1e-9, "{h} vs {h2}");
        let shift = 37.5;
        let moved = RDDataset::new(
            data.score().iter().map(|v| v + shift).collect(),
            data.outcome().to_vec(),
        )
        .unwrap();
        let h3 = select_bandwidth(
            &moved,
            &RDDesign::sharp(shift),
            1,
            Kernel::Triangular,
            &Target::Outcome,
        )
        .unwrap()
        .h;
        assert!((h3 / h - 1.0).abs() < 1e-6, "{h} vs {h3}");
    }
}

#[test]
fn fisher_test_holds_its_size_under_the_null() {
    let reps = 2000u64;
    let alpha = 0.05;
    let rejections: usize = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut spec = DgpSpec::linear(400).with_seed(500 + r);
            spec.mu_below = vec![0.0];
            spec.mu_above = vec![0.0];
            let (data, _) = generate(&spec).unwrap();
            let design = spec.design();
            let w = Window::symmetric(&data, &design, 0.1).unwrap();
            let cfg = RandomizationConfig { reps: 500, seed: r };
            let t = fisher_test(
                &data,
                &design,
                &w,
                &Target::Outcome,
                TestStatistic::DiffMeans,
                &cfg,
            )
            .unwrap();
            usize::from(t.p_value <= alpha)
        })
        .sum();
    let rate = rejections as f64 / reps as f64;
    let mc = 3.0 * (alpha * (1.0 - alpha) / reps as f64).sqrt();
    eprintln!("Fisher null rejection rate {rate:.4}");
    assert!(rate <= alpha + mc);
}

#[test]
fn single_candidate_window_is_accepted_under_pure_noise_covariates() {
    let reps = 300u64;
    let accepted: usize = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut spec = DgpSpec::linear(300).with_seed(9_000 + r);
            spec.covariates = 1;
            let (data, _) = generate(&spec).unwrap();
            let mut cfg = WindowSelectionConfig::new(vec!["z1".into()]);
            cfg.growth = WindowGrowth::Width(0.5);
            cfg.max_windows = Some(1);
            cfg.reps = 200;
            cfg.seed = r;
            let trace = select_window(&data, &spec.design(), &cfg).unwrap();
            assert_eq!(trace.candidates.len(), 1);
            usize::from(!trace.no_balanced_window)
        })
        .sum();
    let share = accepted as f64 / reps as f64;
    eprintln!("single-window acceptance {share:.3}");
    assert!(share >= 0.85);
}

#[test]
fn fuzzy_estimate_recovers_the_complier_effect() {
    let reps = 500u64;
    let total: f64 = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut spec = DgpSpec::linear(50_000).with_seed(70_000 + r);
            spec.compliance = Some(TakeUp {
                p_below: 0.2,
                p_above: 0.8,
            });
            let (data, truth) = generate(&spec).unwrap();
            assert!((truth.complier_effect.unwrap() - 0.5).abs() < 1e-12);
            estimate_fuzzy(&data, &spec.design(), &EstimationSpec::default())
                .unwrap()
                .ratio
                .point
        })
        .sum();
    let mean = total / reps as f64;
    eprintln!("mean fuzzy estimate {mean:.4}");
    assert!((mean - 0.5).abs() < 0.02);
}

#[test]
fn conventional_bias_falls_at_the_rate_of_h_squared() {
    let ns = [2_000usize, 8_000, 32_000];
    let reps = 400u64;
    let biases: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let total: f64 = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let spec = DgpSpec::curved(n).with_seed(n as u64 * 1_000 + r);
                    let (data, truth) = generate(&spec).unwrap();
                    estimate_sharp(&data, &spec.design(), &EstimationSpec::default())
                        .unwrap()
                        .point
                        - truth.tau_srd
                })
                .sum();
            total / reps as f64
        })
        .collect();
    let lx: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ly: Vec<f64> = biases.iter().map(|b| b.abs().ln()).collect();
    let mx = lx.iter().sum::<f64>() / 3.0;
    let my = ly.iter().sum::<f64>() / 3.0;
    let slope = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    eprintln!("mean bias by n: {biases:?}, log-log slope {slope:.3}");
    assert!((slope + 0.4).abs() < 0.1);
}

#[test]
fn bias_estimate_vanishes_as_the_bandwidth_shrinks() {
    let x: Vec<f64> = (0..4000)
        .map(|i| -1.0 + 2.0 * (i as f64 + 0.5) / 4000.0)
        .collect();
    let y: Vec<f64> = x
        .iter()
        .map(|&v| {
            if v >= 0.0 {
                1.0 + 0.5 * v - 2.0 * v * v + v.powi(3)
            } else {
                0.3 * v + 1.5 * v * v - v.powi(3)
            }
        })
        .collect();
    let data = RDDataset::new(x, y).unwrap();
    let design = RDDesign::sharp(0.0);
    let mut last = (f64::INFINITY, f64::INFINITY);
    for h in [0.8, 0.4, 0.2, 0.1, 0.05] {
        let r =
            estimate_sharp(&data, &design, &EstimationSpec::default().with_bandwidth(h)).unwrap();
        let err = (r.point - 1.0).abs();
        assert!(
            r.bias_correction.abs() < last.0,
            "h {h}: |B| {} not below {}",
            r.bias_correction.abs(),
            last.0
        );
        assert!(err < last.1);
        last = (r.bias_correction.abs(), err);
    }
    assert!(last.1 < 1e-2);
}

#[test]
fn coverage_table_is_pure_and_thread_count_free() {
    let study = CoverageStudy {
        dgp: DgpSpec {
            score: ScoreDensity::Uniform {
                lower: -1.0,
                upper: 1.0,
            },
            ..DgpSpec::curved(500)
        },
        replications: 120,
        master_seed: 4242,
        estimator: EstimationSpec::default(),
    };
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let four = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap();
    let a = one.install(|| coverage_study(&study)).unwrap();
    let b = four.install(|| coverage_study(&study)).unwrap();
    let c = coverage_study(&study).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_eq!(a.to_csv(), c.to_csv());
}
