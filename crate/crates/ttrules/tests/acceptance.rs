//! Acceptance suite: one test per criterion, each printing a PASS line
//! with its measured figures (run with --nocapture to see them all).

use std::path::{Path, PathBuf};
use std::time::Instant;

use once_cell::sync::Lazy;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ttrules::bdd::{BddStore, Op};
use ttrules::config::{Architecture, PipelineConfig};
use ttrules::data::{
    binarize, fit_binarizer, load_csv, BinarizedDataset, BinarizerMap, BitMatrix, FeatureEncoder,
    Labels, Schema, Task, TaskKind,
};
use ttrules::eval::{accuracy, auc, cross_validate, rmse, ruleset_metric, CvSummary};
use ttrules::net::{
    build_model, collect_patch_support, loss_and_grads, ternarize_head, train, validation_metric,
    ActivationMode, HeadMode, Hyperparams, Standardization, TTnetModel,
};
use ttrules::rules::{extract_rules, minimize_qm, Cube, DnfFormula, DontCareFlags, TruthTable};
use ttrules::ruleset::{optimize_ruleset, verify_exactness, RuleSet};

fn workspace_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

fn pass(criterion: u32, name: &str, details: &str) {
    println!("criterion {criterion} ({name}): PASS — {details}");
}

// ---------------------------------------------------------------------
// fixtures
// ---------------------------------------------------------------------

fn passthrough_map(total_bits: usize) -> BinarizerMap {
    BinarizerMap::from_encoders(
        (0..total_bits)
            .map(|i| FeatureEncoder::Passthrough {
                feature: format!("g{i}"),
            })
            .collect(),
        vec![],
    )
}

fn random_binary_ds(total_bits: usize, rows: usize, seed: u64) -> BinarizedDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bits = BitMatrix::zeros(rows, total_bits);
    let mut labels = Vec::with_capacity(rows);
    for r in 0..rows {
        for c in 0..total_bits {
            bits.set(r, c, rng.gen_bool(0.5));
        }
        // label depends on two planted bits so training has signal
        labels.push(usize::from(bits.get(r, 0) ^ bits.get(r, 1)));
    }
    BinarizedDataset {
        bits,
        labels: Labels::Classes(labels),
        task: Task::Binary,
        map: passthrough_map(total_bits),
    }
}

/// All 2^n inputs as one dataset (labels are irrelevant to exactness).
fn exhaustive_ds(template: &BinarizedDataset) -> BinarizedDataset {
    let n = template.total_bits();
    assert!(n <= 16);
    let rows = 1usize << n;
    let mut bits = BitMatrix::zeros(rows, n);
    for code in 0..rows {
        for j in 0..n {
            if (code >> j) & 1 == 1 {
                bits.set(code, j, true);
            }
        }
    }
    BinarizedDataset {
        bits,
        labels: Labels::Classes((0..rows).map(|r| r % 2).collect()),
        task: template.task,
        map: template.map.clone(),
    }
}

struct SmallBinaryFixture {
    model: TTnetModel,
    train_ds: BinarizedDataset,
    ruleset: RuleSet,
}

static SMALL_BINARY: Lazy<SmallBinaryFixture> = Lazy::new(|| {
    let ds = random_binary_ds(12, 200, 7);
    let model = build_model(12, 6, 4, 4, Task::Binary, 7).unwrap();
    let trained = train(
        &model,
        &ds,
        &ds,
        &Hyperparams {
            epochs: 60,
            batch_size: 25,
            ..Hyperparams::default()
        },
    )
    .unwrap();
    let model = trained.model;
    let support = collect_patch_support(&model, &ds);
    let ruleset = extract_rules(&model, &ds.map, &support, DontCareFlags::default()).unwrap();
    let (ruleset, _) = optimize_ruleset(&ruleset, &ds, 1.0).unwrap();
    SmallBinaryFixture {
        model,
        train_ds: ds,
        ruleset,
    }
});

struct BreastCancerFixture {
    ds: BinarizedDataset,
    map: BinarizerMap,
    float_model: TTnetModel,
    float_metric: f64,
    summary: CvSummary,
    cv_seconds: f64,
}

static BREAST_CANCER: Lazy<BreastCancerFixture> = Lazy::new(|| {
    let config = PipelineConfig {
        dataset: workspace_path("data/breast_cancer.csv"),
        schema: workspace_path("schemas/breast_cancer.schema.json"),
        task: TaskKind::Binary,
        architecture: Architecture {
            n_filters: 40,
            k: 6,
            hidden_width: 4,
        },
        training: Hyperparams {
            epochs: 150,
            batch_size: 32,
            learning_rate: 0.1,
            weight_decay: 1e-4,
            l1_head: 1e-3,
            seed: 0,
        },
        head: HeadMode::Float,
        dont_care: DontCareFlags::default(),
        corr_threshold: 1.0,
        seed: 0,
        out_dir: PathBuf::from("out"),
    };
    let schema = Schema::from_json_file(&config.schema).unwrap();
    let raw = load_csv(&config.dataset, &schema).unwrap();
    let map = fit_binarizer(&raw).unwrap();
    let ds = binarize(&raw, &map, TaskKind::Binary).unwrap();
    let model = build_model(
        map.total_bits,
        config.architecture.n_filters,
        config.architecture.k,
        config.architecture.hidden_width,
        ds.task,
        config.seed,
    )
    .unwrap();
    let trained = train(&model, &ds, &ds, &config.training).unwrap();
    let float_metric = validation_metric(&trained.model, &ds).unwrap();

    let start = Instant::now();
    let summary = cross_validate(&config, &raw, 5, config.seed).unwrap();
    let cv_seconds = start.elapsed().as_secs_f64();
    BreastCancerFixture {
        ds,
        map,
        float_model: trained.model,
        float_metric,
        summary,
        cv_seconds,
    }
});

// ---------------------------------------------------------------------
// criterion 1: exactness headline
// ---------------------------------------------------------------------

#[test]
fn criterion_1_exactness_headline() {
    // binary (passthrough) features leave no encoding don't-cares, so the
    // rule set must match the network on every one of the 2^12 inputs
    let fix = &*SMALL_BINARY;
    let train_check = verify_exactness(&fix.ruleset, &fix.model, &fix.train_ds).unwrap();
    assert_eq!(train_check.agreement, 1.0);
    assert!(train_check.max_score_diff <= 1e-9);
    let all = exhaustive_ds(&fix.train_ds);
    let all_check = verify_exactness(&fix.ruleset, &fix.model, &all).unwrap();
    assert_eq!(
        all_check.agreement, 1.0,
        "exhaustive agreement over 4096 inputs"
    );
    assert!(all_check.max_score_diff <= 1e-9);

    // thermometer model: exact on every encodable input and on all rows
    let bc = &*BREAST_CANCER;
    let support = collect_patch_support(&bc.float_model, &bc.ds);
    let ruleset =
        extract_rules(&bc.float_model, &bc.map, &support, DontCareFlags::default()).unwrap();
    let (ruleset, _) = optimize_ruleset(&ruleset, &bc.ds, 1.0).unwrap();
    let check = verify_exactness(&ruleset, &bc.float_model, &bc.ds).unwrap();
    assert_eq!(check.agreement, 1.0);
    assert!(check.max_score_diff <= 1e-9);

    // every CV fold verified train and test agreement at 1.0 (the harness
    // aborts otherwise)
    for fold in &bc.summary.folds {
        assert_eq!(fold.train_agreement, 1.0);
        assert_eq!(fold.test_agreement, 1.0);
    }
    pass(
        1,
        "exactness headline",
        &format!(
            "agreement 1.0 on 2^12 exhaustive inputs, {} breast-cancer rows, and 5 CV folds (train+test)",
            bc.ds.n_rows()
        ),
    );
}

// ---------------------------------------------------------------------
// criterion 2: breast cancer CV AUC
// ---------------------------------------------------------------------

#[test]
fn criterion_2_breast_cancer_auc() {
    let bc = &*BREAST_CANCER;
    assert_eq!(bc.summary.per_fold.len(), 5);
    assert!(
        bc.summary.mean >= 0.95,
        "mean rule-set AUC {:.4} below the 0.95 gate",
        bc.summary.mean
    );
    assert!(
        bc.cv_seconds < 300.0,
        "CV took {:.1}s, over the 5-minute budget",
        bc.cv_seconds
    );
    pass(
        2,
        "breast cancer AUC",
        &format!(
            "5-fold rule-set AUC {:.4} ± {:.4} in {:.1}s (reference scale: 0.986)",
            bc.summary.mean, bc.summary.std, bc.cv_seconds
        ),
    );
}

// ---------------------------------------------------------------------
// criterion 3: rule-count shape under ternarization
// ---------------------------------------------------------------------

#[test]
fn criterion_3_ternary_rule_count() {
    let bc = &*BREAST_CANCER;
    let tern = ternarize_head(&bc.float_model, &bc.ds).unwrap();
    assert_eq!(tern.head.mode, HeadMode::Ternary);
    let tern_metric = validation_metric(&tern, &bc.ds).unwrap();
    assert!(
        bc.float_metric - tern_metric < 0.02 * bc.float_metric.abs() + 1e-12,
        "ternary AUC {tern_metric:.4} degrades more than 2% from float {:.4}",
        bc.float_metric
    );

    let support = collect_patch_support(&tern, &bc.ds);
    let ruleset = extract_rules(&tern, &bc.map, &support, DontCareFlags::default()).unwrap();
    let (ruleset, _) = optimize_ruleset(&ruleset, &bc.ds, 1.0).unwrap();
    assert!(
        ruleset.rules.len() <= 40,
        "{} rules exceeds the 40-rule shape bound",
        ruleset.rules.len()
    );
    // ternary rules score in {-1, 0, +1}
    for rule in &ruleset.rules {
        assert!(rule.weights.iter().all(|&w| w == 1.0 || w == -1.0));
    }
    let check = verify_exactness(&ruleset, &tern, &bc.ds).unwrap();
    assert_eq!(check.agreement, 1.0);
    pass(
        3,
        "rule-count shape",
        &format!(
            "ternarized model: {} rules (reference scale: 24), AUC {tern_metric:.4} vs float {:.4}",
            ruleset.rules.len(),
            bc.float_metric
        ),
    );
}

// ---------------------------------------------------------------------
// criterion 4: Quine-McCluskey oracle
// ---------------------------------------------------------------------

#[test]
fn criterion_4_qm_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..200 {
        let k = rng.gen_range(2..=6usize);
        let n = 1usize << k;
        let outputs: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        let dont_care: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.2)).collect();
        let table = TruthTable {
            k,
            input_indices: (0..k).collect(),
            outputs: outputs.clone(),
            dont_care: dont_care.clone(),
            origin: format!("trial{trial}"),
        };
        let formula = minimize_qm(&table);
        // brute-force evaluation of the returned DNF on every row
        for row in 0..n as u16 {
            if dont_care[row as usize] {
                continue;
            }
            assert_eq!(
                formula.eval_code(row),
                outputs[row as usize],
                "trial {trial}: row {row} disagrees (k={k})"
            );
        }
        let minterms = table.on_set().len();
        assert!(
            formula.cubes.len() <= minterms.max(1),
            "trial {trial}: {} cubes for {minterms} minterms",
            formula.cubes.len()
        );
    }
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 10.0, "QM oracle took {secs:.1}s");
    pass(
        4,
        "QM oracle",
        &format!("200 random tables (k in 2..6, random don't-cares) exact in {secs:.2}s"),
    );
}

// ---------------------------------------------------------------------
// criterion 5: ROBDD canonicity
// ---------------------------------------------------------------------

#[test]
fn criterion_5_robdd_canonicity() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    for trial in 0..500 {
        let k = rng.gen_range(2..=6usize);
        let n = 1usize << k;
        let truth: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        let table = TruthTable {
            k,
            input_indices: (0..k).collect(),
            outputs: truth.clone(),
            dont_care: vec![false; n],
            origin: format!("t{trial}"),
        };
        let minterm_formula = DnfFormula {
            k,
            input_indices: (0..k).collect(),
            cubes: (0..n as u16)
                .filter(|&r| truth[r as usize])
                .map(Cube::minterm)
                .collect(),
        };
        let minimized = minimize_qm(&table);
        let mut store = BddStore::new((0..k).map(|i| (i, format!("x{i}"))).collect()).unwrap();
        let via_minterms = store.build_from_dnf(&minterm_formula).unwrap();
        let via_minimized = store.build_from_dnf(&minimized).unwrap();
        assert_eq!(
            via_minterms, via_minimized,
            "trial {trial}: routes disagree"
        );
        assert!(
            store.check_reduced(via_minterms),
            "trial {trial}: reduction broken"
        );
        assert!(store.check_equivalence(via_minterms, &table).unwrap());
    }
    // XOR_n has 2n-1 decision nodes
    for n in [2usize, 3, 4] {
        let mut store = BddStore::new((0..n).map(|i| (i, format!("x{i}"))).collect()).unwrap();
        let mut acc = store.false_ref();
        for lvl in 0..n {
            let v = store.var(lvl as u32);
            acc = store.apply(Op::Xor, acc, v).unwrap();
        }
        assert_eq!(store.node_count(acc), 2 * n - 1);
        assert!(store.check_reduced(acc));
    }
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 10.0, "ROBDD checks took {secs:.1}s");
    pass(
        5,
        "ROBDD canonicity",
        &format!(
            "500 dual-route builds identical, XOR node counts 3/5/7, reduced stores, in {secs:.2}s"
        ),
    );
}

// ---------------------------------------------------------------------
// criterion 6: gradient check
// ---------------------------------------------------------------------

fn finite_difference_check(
    model: &TTnetModel,
    ds: &BinarizedDataset,
    rows: &[usize],
) -> (usize, f64) {
    let eps = 1e-4;
    let loss_of = |m: &TTnetModel| loss_and_grads(m, ds, rows, ActivationMode::Surrogate).0;
    let (_, grads) = loss_and_grads(model, ds, rows, ActivationMode::Surrogate);

    let mut checked = 0usize;
    let mut worst = 0.0f64;
    let mut compare = |analytic: f64, loss_plus: f64, loss_minus: f64, what: &str| {
        let fd = (loss_plus - loss_minus) / (2.0 * eps);
        let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-4);
        assert!(
            rel <= 1e-3,
            "{what}: analytic {analytic:.8} vs fd {fd:.8} (rel {rel:.2e})"
        );
        checked += 1;
        if rel > worst {
            worst = rel;
        }
    };

    for f in 0..model.filters.len() {
        for i in 0..model.filters[f].hidden_width() {
            for j in 0..model.filters[f].fan_in() {
                let mut plus = model.clone();
                plus.filters[f].w1[i][j] += eps;
                let mut minus = model.clone();
                minus.filters[f].w1[i][j] -= eps;
                compare(
                    grads.filters[f].w1[i][j],
                    loss_of(&plus),
                    loss_of(&minus),
                    &format!("filter {f} w1[{i}][{j}]"),
                );
            }
            let mut plus = model.clone();
            plus.filters[f].b1[i] += eps;
            let mut minus = model.clone();
            minus.filters[f].b1[i] -= eps;
            compare(
                grads.filters[f].b1[i],
                loss_of(&plus),
                loss_of(&minus),
                "b1",
            );
            let mut plus = model.clone();
            plus.filters[f].w2[i] += eps;
            let mut minus = model.clone();
            minus.filters[f].w2[i] -= eps;
            compare(
                grads.filters[f].w2[i],
                loss_of(&plus),
                loss_of(&minus),
                "w2",
            );
        }
        let mut plus = model.clone();
        plus.filters[f].b2 += eps;
        let mut minus = model.clone();
        minus.filters[f].b2 -= eps;
        compare(grads.filters[f].b2, loss_of(&plus), loss_of(&minus), "b2");
    }
    for c in 0..model.head.n_outputs() {
        for f in 0..model.filters.len() {
            let mut plus = model.clone();
            plus.head.weights[c][f] += eps;
            let mut minus = model.clone();
            minus.head.weights[c][f] -= eps;
            compare(
                grads.head_weights[c][f],
                loss_of(&plus),
                loss_of(&minus),
                &format!("head w[{c}][{f}]"),
            );
        }
        let mut plus = model.clone();
        plus.head.bias[c] += eps;
        let mut minus = model.clone();
        minus.head.bias[c] -= eps;
        compare(
            grads.head_bias[c],
            loss_of(&plus),
            loss_of(&minus),
            "head bias",
        );
    }
    (checked, worst)
}

#[test]
fn criterion_6_gradient_check() {
    let start = Instant::now();
    let rows: Vec<usize> = (0..8).collect();

    // binary classification
    let ds = random_binary_ds(10, 8, 42);
    let model = build_model(10, 4, 3, 3, Task::Binary, 13).unwrap();
    let (checked_bin, worst_bin) = finite_difference_check(&model, &ds, &rows);

    // multiclass
    let mut ds3 = random_binary_ds(10, 8, 43);
    ds3.task = Task::Multiclass(3);
    ds3.labels = Labels::Classes(vec![0, 1, 2, 0, 1, 2, 0, 1]);
    let model3 = build_model(10, 4, 3, 3, Task::Multiclass(3), 14).unwrap();
    let (checked_mc, worst_mc) = finite_difference_check(&model3, &ds3, &rows);

    // regression
    let mut dsr = random_binary_ds(10, 8, 44);
    dsr.task = Task::Regression;
    dsr.labels = Labels::Values(vec![0.4, -1.2, 0.8, 2.0, -0.3, 1.1, 0.0, -2.2]);
    let mut modelr = build_model(10, 4, 3, 3, Task::Regression, 15).unwrap();
    modelr.standardization = Some(Standardization {
        mean: 0.0,
        std: 1.0,
    });
    let (checked_reg, worst_reg) = finite_difference_check(&modelr, &dsr, &rows);

    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 5.0, "gradient check took {secs:.1}s");
    pass(
        6,
        "gradient check",
        &format!(
            "{} parameters verified (worst rel err {:.2e}) in {secs:.2}s",
            checked_bin + checked_mc + checked_reg,
            worst_bin.max(worst_mc).max(worst_reg)
        ),
    );
}

// ---------------------------------------------------------------------
// criterion 7: scalability property
// ---------------------------------------------------------------------

fn peak_rss_gib() -> Option<f64> {
    #[cfg(unix)]
    unsafe {
        let mut usage: libc::rusage = std::mem::zeroed();
        if libc::getrusage(libc::RUSAGE_SELF, &mut usage) == 0 && usage.ru_maxrss > 0 {
            // ru_maxrss is KiB on Linux
            return Some(usage.ru_maxrss as f64 / (1024.0 * 1024.0));
        }
    }
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    for line in status.lines() {
        if let Some(rest) = line
            .strip_prefix("VmHWM:")
            .or_else(|| line.strip_prefix("VmRSS:"))
        {
            let kb: f64 = rest.trim().trim_end_matches("kB").trim().parse().ok()?;
            return Some(kb / (1024.0 * 1024.0));
        }
    }
    None
}

#[test]
fn criterion_7_scalability() {
    let start = Instant::now();
    let ds = random_binary_ds(20_000, 2_000, 777);
    let model = build_model(20_000, 1_064, 6, 2, Task::Binary, 777).unwrap();
    let hp = Hyperparams {
        epochs: 3,
        batch_size: 64,
        learning_rate: 0.05,
        weight_decay: 1e-4,
        l1_head: 1e-3,
        seed: 777,
    };
    let trained = train(&model, &ds, &ds, &hp).unwrap();
    let model = trained.model;

    let support = collect_patch_support(&model, &ds);
    let ruleset = extract_rules(&model, &ds.map, &support, DontCareFlags::default()).unwrap();
    let nonzero_filters = (0..model.filters.len())
        .filter(|&f| model.head.weights.iter().any(|row| row[f] != 0.0))
        .count();
    assert_eq!(
        ruleset.rules.len(),
        nonzero_filters,
        "one rule per nonzero-weight filter"
    );
    let (optimized, report) = optimize_ruleset(&ruleset, &ds, 1.0).unwrap();
    assert!(report.after_correlation_prune <= report.initial_rules);

    let check = verify_exactness(&optimized, &model, &ds).unwrap();
    assert_eq!(check.agreement, 1.0, "scalability model stays exact");

    let secs = start.elapsed().as_secs_f64();
    assert!(
        secs < 600.0,
        "scalability run took {secs:.1}s, over 10 minutes"
    );
    let rss = peak_rss_gib();
    if let Some(gib) = rss {
        assert!(gib < 4.0, "peak RSS {gib:.2} GiB exceeds 4 GB");
    }
    pass(
        7,
        "scalability",
        &format!(
            "20000 features x 2000 samples: {} rules from {} filters ({} read bits), {:.1}s, peak {:.2} GiB",
            optimized.rules.len(),
            model.filters.len(),
            ttrules::net::bits_read(&model),
            secs,
            rss.unwrap_or(f64::NAN)
        ),
    );

    // informational runs against the public DNA expression datasets
    report_optional_dna_run("TTRULES_TCGA_CSV", TaskKind::Regression, "RMSE 0.029");
    report_optional_dna_run("TTRULES_MELANOMA_CSV", TaskKind::Binary, "AUC 0.835");
}

/// Informational only: no pass/fail. Expects a pre-binarized CSV whose
/// last column is the target.
fn report_optional_dna_run(env_var: &str, task: TaskKind, reference: &str) {
    let Ok(path) = std::env::var(env_var) else {
        return;
    };
    let run = || -> ttrules::Result<(f64, usize)> {
        let mut reader = csv::Reader::from_path(&path)
            .map_err(|e| ttrules::Error::Value(format!("{path}: {e}")))?;
        let headers = reader.headers()?.clone();
        let target = headers.iter().next_back().unwrap().to_string();
        let features = headers
            .iter()
            .take(headers.len() - 1)
            .map(ttrules::data::FeatureSpec::binary)
            .collect();
        let schema = Schema::new(features, &target)?;
        let raw = load_csv(Path::new(&path), &schema)?;
        let map = fit_binarizer(&raw)?;
        let ds = binarize(&raw, &map, task)?;
        let model = build_model(map.total_bits, 1064, 6, 2, ds.task, 0)?;
        let trained = train(
            &model,
            &ds,
            &ds,
            &Hyperparams {
                epochs: 3,
                ..Hyperparams::default()
            },
        )?;
        let support = collect_patch_support(&trained.model, &ds);
        let ruleset = extract_rules(&trained.model, &map, &support, DontCareFlags::default())?;
        let (ruleset, _) = optimize_ruleset(&ruleset, &ds, 1.0)?;
        Ok((ruleset_metric(&ruleset, &ds)?, ruleset.rules.len()))
    };
    match run() {
        Ok((metric, rules)) => println!(
            "informational {env_var}: metric {metric:.4} over {rules} rules (reference: {reference})"
        ),
        Err(e) => println!("informational {env_var}: skipped ({e})"),
    }
}

// ---------------------------------------------------------------------
// criterion 8: metric golden tests
// ---------------------------------------------------------------------

#[test]
fn criterion_8_metric_goldens() {
    let start = Instant::now();
    let tol = 1e-9;
    assert!((auc(&[0.9, 0.8, 0.3, 0.2], &[1, 1, 0, 0]).unwrap() - 1.0).abs() < tol);
    assert!((auc(&[0.5, 0.5, 0.5, 0.5], &[1, 0, 1, 0]).unwrap() - 0.5).abs() < tol);
    assert!((auc(&[0.9, 0.2, 0.8, 0.3], &[1, 0, 0, 1]).unwrap() - 0.75).abs() < tol);
    assert!((accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap() - 1.0).abs() < tol);
    assert!((accuracy(&[0, 0, 0, 0], &[0, 1, 1, 1]).unwrap() - 0.25).abs() < tol);
    assert!(rmse(&[1.5, 2.5], &[1.5, 2.5]).unwrap().abs() < tol);
    assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < tol);
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 1.0);
    pass(
        8,
        "metric goldens",
        &format!("all worked examples reproduced to 1e-9 in {secs:.3}s"),
    );
}

// ---------------------------------------------------------------------
// criterion 9: lossless-optimization invariance
// ---------------------------------------------------------------------

fn assert_scores_invariant(
    before: &RuleSet,
    after: &RuleSet,
    total_bits: usize,
    exhaustive: bool,
    seed: u64,
) {
    let check = |input: &[bool]| {
        let a = before.scores(input);
        let b = after.scores(input);
        for (x, y) in a.iter().zip(&b) {
            assert!(
                (x - y).abs() <= 1e-12,
                "scores diverge on {input:?}: {x} vs {y}"
            );
        }
    };
    if exhaustive {
        assert!(total_bits <= 16);
        for code in 0..1u32 << total_bits {
            let input: Vec<bool> = (0..total_bits).map(|j| (code >> j) & 1 == 1).collect();
            check(&input);
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..1000 {
            let input: Vec<bool> = (0..total_bits).map(|_| rng.gen_bool(0.5)).collect();
            check(&input);
        }
    }
}

#[test]
fn criterion_9_lossless_optimization_invariance() {
    let start = Instant::now();

    // small model: exhaustive over all 2^12 inputs
    let fix = &*SMALL_BINARY;
    let support = collect_patch_support(&fix.model, &fix.train_ds);
    let unoptimized = extract_rules(
        &fix.model,
        &fix.train_ds.map,
        &support,
        DontCareFlags::default(),
    )
    .unwrap();
    let (optimized, _) = optimize_ruleset(&unoptimized, &fix.train_ds, 1.0).unwrap();
    assert_scores_invariant(&unoptimized, &optimized, 12, true, 0);

    // breast-cancer float and ternary models: 1000 random inputs each
    let bc = &*BREAST_CANCER;
    let support = collect_patch_support(&bc.float_model, &bc.ds);
    let unopt =
        extract_rules(&bc.float_model, &bc.map, &support, DontCareFlags::default()).unwrap();
    let (opt, _) = optimize_ruleset(&unopt, &bc.ds, 1.0).unwrap();
    assert_scores_invariant(&unopt, &opt, bc.map.total_bits, false, 1);

    let tern = ternarize_head(&bc.float_model, &bc.ds).unwrap();
    let support = collect_patch_support(&tern, &bc.ds);
    let unopt_t = extract_rules(&tern, &bc.map, &support, DontCareFlags::default()).unwrap();
    let (opt_t, _) = optimize_ruleset(&unopt_t, &bc.ds, 1.0).unwrap();
    assert_scores_invariant(&unopt_t, &opt_t, bc.map.total_bits, false, 2);

    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 10.0, "invariance checks took {secs:.1}s");
    pass(
        9,
        "lossless-optimization invariance",
        &format!(
            "scores preserved to 1e-12 (4096 exhaustive + 2x1000 random inputs) in {secs:.2}s"
        ),
    );
}
