//! Acceptance run: one line per criterion, `PASS`, `FAIL` or `BLOCKED`.
//! Runs as a plain binary (no libtest harness) so the lines always print.
//! Datasets that cannot ship with the repository are looked up in
//! `$CHAOSLEARN_DATA`, else `<workspace>/data`; without them the dependent
//! checks report BLOCKED and do not fail the run.

use std::path::{Path, PathBuf};
use std::time::Instant;

use chaoslearn::attractor::rk4_step;
use chaoslearn::circuit::{power_estimate, resistors_to_params, rho_to_r9, CircuitConfig};
use chaoslearn::data::{smote_balance, split_indices, zscore_apply, zscore_fit, Dataset, SplitConfig, Target};
use chaoslearn::experiment::{
    emit_split_study, run_benchmark, run_circuit, run_optimize, run_scan, Benchmark, ExperimentConfig, Report,
};
use chaoslearn::lyapunov::{attractor_lle, lle_accuracy_scan, LleConfig, ScanConfig};
use chaoslearn::readout::{
    confusion, fit_pipeline, iteration_sweep, Prediction, ReadoutKind, SelectionMode, SweepConfig,
};
use chaoslearn::rng::SeededRng;
use chaoslearn::transform::transform;
use chaoslearn::{AttractorSpec, IntegrationConfig, State3};
use nalgebra::DMatrix;

mod common;

// Tolerances.
const RK4_ORDER: (f64, f64) = (4.0, 0.2);
const SINC_BASELINE: (f64, f64) = (0.346, 0.03);
const SINC_RHO28_MAX: f64 = 0.16;
const SINC_RHO97_MAX: f64 = 0.12;
const SINC_DUAL_MAX: f64 = 0.06;
const ABALONE_MAX: f64 = 0.085;
const IRIS_BASELINE: (f64, f64) = (0.80, 0.05);
const IRIS_MIN: f64 = 0.93;
const IRIS_GAIN_MIN: f64 = 0.10;
const LIVER_RIDGE_BASELINE: (f64, f64) = (0.817, 0.04);
const LIVER_RIDGE_MIN: f64 = 0.90;
const LIVER_SVM_MIN: f64 = 0.96;
const LIVER_FALLBACK_GAIN: f64 = 0.08;
const LIVER_FALLBACK_P: f64 = 0.05;
const MNIST_EMBEDDING: (f64, f64) = (0.9542, 0.01);
const MNIST_PCA_GAIN_MIN: f64 = 0.05;
const LLE_RHO28_TOL: f64 = 0.15;
const LLE_PEARSON_MIN: f64 = 0.5;
const POWER_MW: f64 = 351.0;
const RESISTOR_ROUND_TRIP: f64 = 1e-9;
const CIRCUIT_IRIS_TOL: f64 = 0.03;

const MNIST_EMBEDDING_FILE: &str = "mnist_embedding.csv";

struct Suite {
    pass: usize,
    fail: usize,
    blocked: usize,
}

impl Suite {
    fn check(&mut self, id: &str, what: &str, ok: bool, detail: String) {
        if ok {
            self.pass += 1;
        } else {
            self.fail += 1;
        }
        println!("{} [{id}] {what}: {detail}", if ok { "PASS   " } else { "FAIL   " });
    }

    fn blocked(&mut self, id: &str, what: &str, why: &str) {
        self.blocked += 1;
        println!("BLOCKED [{id}] {what}: {why}");
    }

    fn error(&mut self, id: &str, what: &str, e: chaoslearn::Error) {
        self.check(id, what, false, format!("error: {e}"));
    }
}

fn data_dir() -> PathBuf {
    std::env::var_os("CHAOSLEARN_DATA")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(rel)
}

fn preset_in(b: Benchmark, dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(b);
    cfg.data.dir = Some(dir.to_path_buf());
    cfg
}

fn iris_cfg() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(Benchmark::Iris);
    cfg.data.path = Some(fixture("iris.csv"));
    cfg
}

fn first(r: &Report) -> (f64, f64) {
    (r.readouts[0].baseline, r.readouts[0].sweep.reported_metric)
}

/// Least-squares slope of log error against log dt over random starts.
fn criterion_1(s: &mut Suite) {
    let spec = AttractorSpec::lorenz_rho(28.0).unwrap();
    let horizon = 0.5;
    let run = |init: State3, dt: f64| {
        let n = (horizon / dt).round() as usize;
        (0..n).try_fold(init, |x, _| rk4_step(&spec, x, dt)).unwrap()
    };
    let dts = [0.0025, 0.00125, 0.000625, 0.0003125];
    let mut rng = SeededRng::new(1);
    let mut slopes = Vec::new();
    for _ in 0..8 {
        let init = State3::new(rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0), rng.uniform(5.0, 30.0));
        let reference = run(init, 1e-5);
        let pts: Vec<(f64, f64)> = dts
            .iter()
            .map(|&dt| {
                let e = run(init, dt);
                let err = ((e.x - reference.x).powi(2) + (e.y - reference.y).powi(2) + (e.z - reference.z).powi(2)).sqrt();
                (dt.ln(), err.ln())
            })
            .collect();
        let n = pts.len() as f64;
        let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        slopes.push(slope);
    }
    let worst = slopes.iter().copied().fold(RK4_ORDER.0, |w, x| if (x - RK4_ORDER.0).abs() > (w - RK4_ORDER.0).abs() { x } else { w });
    s.check(
        "1",
        "RK4 global error order on Lorenz (8 random starts)",
        slopes.iter().all(|x| (x - RK4_ORDER.0).abs() <= RK4_ORDER.1),
        format!("worst slope {worst:.3} of {slopes:.2?} (want {} ± {})", RK4_ORDER.0, RK4_ORDER.1),
    );
}

fn criterion_2_3(s: &mut Suite) {
    match run_benchmark(&ExperimentConfig::preset(Benchmark::Sinc)) {
        Ok(r) => {
            let (base, best) = first(&r);
            s.check(
                "2a",
                "sinc linear-regression baseline RMSE",
                (base - SINC_BASELINE.0).abs() <= SINC_BASELINE.1,
                format!("{base:.4} (want {} ± {})", SINC_BASELINE.0, SINC_BASELINE.1),
            );
            s.check("2b", "sinc ρ=28 best RMSE", best <= SINC_RHO28_MAX, format!("{best:.4} (want ≤ {SINC_RHO28_MAX})"));
        }
        Err(e) => s.error("2", "sinc ρ=28", e),
    }
    let mut cfg = ExperimentConfig::preset(Benchmark::Sinc);
    cfg.transformers = vec![AttractorSpec::lorenz(10.0, 8.0 / 3.0, 97.0).unwrap()];
    match run_benchmark(&cfg) {
        Ok(r) => {
            let best = first(&r).1;
            s.check("3a", "sinc ρ=97 best RMSE", best <= SINC_RHO97_MAX, format!("{best:.4} (want ≤ {SINC_RHO97_MAX})"));
        }
        Err(e) => s.error("3a", "sinc ρ=97", e),
    }
    match run_optimize(&ExperimentConfig::preset(Benchmark::SincDual)) {
        Ok(r) => {
            let o = r.optimization.as_ref().unwrap();
            let best = first(&r).1;
            s.check(
                "3b",
                "sinc dual transformer after search",
                best <= SINC_DUAL_MAX,
                format!(
                    "RMSE {best:.5} at ρ1={:.2}, ρ2={:.2} after {} evaluations (want ≤ {SINC_DUAL_MAX})",
                    o.best("rho1").unwrap(),
                    o.best("rho2").unwrap(),
                    o.log.len()
                ),
            );
        }
        Err(e) => s.error("3b", "sinc dual", e),
    }
}

fn criterion_4(s: &mut Suite, dir: &Path) {
    let what = "abalone RMSE at σ=10, β=2.667, ρ=64.917";
    let cfg = preset_in(Benchmark::Abalone, dir);
    match run_benchmark(&cfg) {
        Ok(r) => {
            let (base, best) = first(&r);
            s.check("4", what, best <= ABALONE_MAX, format!("{best:.4}, baseline {base:.4} (want ≤ {ABALONE_MAX})"));
        }
        Err(chaoslearn::Error::MissingData(m)) => s.blocked("4", what, &format!("dataset not present ({m})")),
        Err(e) => s.error("4", what, e),
    }
}

fn criterion_5(s: &mut Suite) -> Option<f64> {
    match run_benchmark(&iris_cfg()) {
        Ok(r) => {
            let (base, best) = first(&r);
            s.check(
                "5a",
                "iris LDA + ridge baseline accuracy",
                (base - IRIS_BASELINE.0).abs() <= IRIS_BASELINE.1,
                format!("{base:.4} (want {} ± {})", IRIS_BASELINE.0, IRIS_BASELINE.1),
            );
            s.check(
                "5b",
                "iris transformed accuracy (paper-mode selection)",
                best >= IRIS_MIN,
                format!("{best:.4} at iteration {} (want ≥ {IRIS_MIN})", r.readouts[0].sweep.best_iteration),
            );
            s.check(
                "5c",
                "iris improvement over baseline",
                best - base >= IRIS_GAIN_MIN,
                format!("{:+.4} (want ≥ {IRIS_GAIN_MIN})", best - base),
            );
            Some(best)
        }
        Err(e) => {
            s.error("5", "iris", e);
            None
        }
    }
}

fn criterion_6(s: &mut Suite, dir: &Path) {
    let what = "liver (HCV + SMOTE)";
    let cfg = preset_in(Benchmark::Liver, dir);
    let r = match run_benchmark(&cfg) {
        Ok(r) => r,
        Err(chaoslearn::Error::MissingData(m)) => {
            s.blocked("6", what, &format!("dataset not present ({m})"));
            return;
        }
        Err(e) => return s.error("6", what, e),
    };
    let ridge = r.readout("ridge_classifier").unwrap();
    let svm = r.readout("linear_svm").unwrap();
    let absolute = (ridge.baseline - LIVER_RIDGE_BASELINE.0).abs() <= LIVER_RIDGE_BASELINE.1
        && ridge.sweep.reported_metric >= LIVER_RIDGE_MIN
        && svm.sweep.reported_metric >= LIVER_SVM_MIN;
    let detail = format!(
        "ridge {:.4} → {:.4}, SVM {:.4} → {:.4} (want baseline {} ± {}, ridge ≥ {LIVER_RIDGE_MIN}, SVM ≥ {LIVER_SVM_MIN})",
        ridge.baseline,
        ridge.sweep.reported_metric,
        svm.baseline,
        svm.sweep.reported_metric,
        LIVER_RIDGE_BASELINE.0,
        LIVER_RIDGE_BASELINE.1
    );
    if absolute {
        return s.check("6", "liver absolute accuracies", true, detail);
    }
    println!("        [6] absolute targets missed ({detail}); evaluating the 20-split fallback");
    let mut cfg = cfg;
    cfg.readouts = vec![ReadoutKind::ridge_classifier()];
    match emit_split_study(&cfg, 20) {
        Ok(r) => {
            let st = &r.split_study.as_ref().unwrap()[0];
            let gain = st.mean - st.baseline_mean;
            let p = st.paired.map(|t| t.p_value).unwrap_or(f64::NAN);
            s.check(
                "6",
                "liver fallback: ridge gain over 20 splits",
                gain >= LIVER_FALLBACK_GAIN && p < LIVER_FALLBACK_P,
                format!("gain {gain:+.4}, paired p {p:.2e} (want ≥ {LIVER_FALLBACK_GAIN}, p < {LIVER_FALLBACK_P})"),
            );
        }
        Err(e) => s.error("6", "liver fallback", e),
    }
}

fn criterion_7(s: &mut Suite, dir: &Path) {
    let what = "mnist with imported 7-D embedding";
    let emb = dir.join(MNIST_EMBEDDING_FILE);
    if !emb.exists() {
        s.blocked("7a", what, &format!("dataset not present ({} missing)", emb.display()));
    } else {
        let mut cfg = preset_in(Benchmark::Mnist, dir);
        cfg.data.embedding = Some(emb);
        match run_benchmark(&cfg) {
            Ok(r) => {
                let best = first(&r).1;
                s.check(
                    "7a",
                    what,
                    (best - MNIST_EMBEDDING.0).abs() <= MNIST_EMBEDDING.1,
                    format!("{best:.4} (want {} ± {})", MNIST_EMBEDDING.0, MNIST_EMBEDDING.1),
                );
            }
            Err(chaoslearn::Error::MissingData(m)) => s.blocked("7a", what, &format!("dataset not present ({m})")),
            Err(e) => s.error("7a", what, e),
        }
    }

    // Built-in reduction on the bundled 5000-image subset.
    let mut cfg = ExperimentConfig::preset(Benchmark::Mnist);
    cfg.data.images = Some(fixture("mnist5k/images-idx3-ubyte.gz"));
    cfg.data.labels = Some(fixture("mnist5k/labels-idx1-ubyte.gz"));
    match run_benchmark(&cfg) {
        Ok(r) => {
            let (base, best) = first(&r);
            s.check(
                "7b",
                "mnist (5000 images) PCA-7 ridge gain",
                best - base >= MNIST_PCA_GAIN_MIN,
                format!("{base:.4} → {best:.4}, {:+.4} (want ≥ {MNIST_PCA_GAIN_MIN})", best - base),
            );
        }
        Err(e) => s.error("7b", "mnist PCA-7", e),
    }
}

fn criterion_8(s: &mut Suite, dir: &Path) {
    let cfg = LleConfig::default();
    match attractor_lle(&AttractorSpec::lorenz_rho(2.0).unwrap(), &cfg) {
        Ok(e) => s.check("8a", "Rosenstein exponent at ρ=2", e.lambda_max <= 0.0, format!("{:.4} (want ≤ 0)", e.lambda_max)),
        Err(e) => s.error("8a", "ρ=2 exponent", e),
    }
    let oracle = common::benettin_lorenz(10.0, 8.0 / 3.0, 28.0, 0.01, 1000, 200_000);
    match attractor_lle(&AttractorSpec::lorenz_rho(28.0).unwrap(), &cfg) {
        Ok(e) => s.check(
            "8b",
            "Rosenstein exponent at ρ=28 vs two-trajectory oracle",
            (e.lambda_max - oracle).abs() <= LLE_RHO28_TOL && (e.lambda_max - 0.9).abs() <= LLE_RHO28_TOL,
            format!("{:.4} vs oracle {oracle:.4} (want within {LLE_RHO28_TOL} of both the oracle and 0.9)", e.lambda_max),
        ),
        Err(e) => s.error("8b", "ρ=28 exponent", e),
    }
    let what = "Pearson r between exponent and liver accuracy over ρ = 1..100";
    match run_scan(&preset_in(Benchmark::Liver, dir)) {
        Ok(r) => {
            let sc = r.scan.unwrap();
            s.check("8c", what, sc.pearson_r >= LLE_PEARSON_MIN, format!("{:.3} (want ≥ {LLE_PEARSON_MIN})", sc.pearson_r));
        }
        Err(chaoslearn::Error::MissingData(m)) => s.blocked("8c", what, &format!("dataset not present ({m})")),
        Err(e) => s.error("8c", what, e),
    }
}

fn criterion_9(s: &mut Suite, iris_numeric: Option<f64>) {
    let p = power_estimate(&CircuitConfig::default());
    s.check("9a", "circuit power at defaults", p.total_mw == POWER_MW, format!("{} mW (want exactly {POWER_MW})", p.total_mw));

    let base = CircuitConfig::default();
    let worst = [1.5, 2.0, 10.0, 28.0, 64.917, 97.0, 100.0]
        .iter()
        .map(|&rho| {
            let cfg = CircuitConfig { r9: rho_to_r9(rho, base.r8).unwrap(), ..base };
            let (back, _) = resistors_to_params(&cfg).unwrap();
            ((back - rho) / rho).abs()
        })
        .fold(0.0f64, f64::max);
    s.check(
        "9b",
        "resistor mapping round trip",
        worst <= RESISTOR_ROUND_TRIP,
        format!("worst relative error {worst:.1e} (want ≤ {RESISTOR_ROUND_TRIP:.0e})"),
    );

    match (run_circuit(&iris_cfg()), iris_numeric) {
        (Ok(r), Some(numeric)) => {
            let acc = first(&r).1;
            s.check(
                "9c",
                "circuit-mode iris at ρ=97 vs numerical",
                (acc - numeric).abs() <= CIRCUIT_IRIS_TOL,
                format!("{acc:.4} vs {numeric:.4} (want within ±{CIRCUIT_IRIS_TOL})"),
            );
        }
        (Ok(_), None) => s.check("9c", "circuit-mode iris", false, "numerical iris run failed".into()),
        (Err(e), _) => s.error("9c", "circuit-mode iris", e),
    }
}

/// Synthetic three-class data: Gaussian blobs with unequal class sizes.
fn blobs(seed: u32) -> Dataset {
    let mut rng = SeededRng::new(seed);
    let sizes = [40, 15, 25];
    let centers = [[0.0, 0.0, 0.0], [2.5, 0.5, -1.0], [-1.0, 2.0, 1.5]];
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (c, &n) in sizes.iter().enumerate() {
        for _ in 0..n {
            for m in centers[c] {
                rows.push(m + rng.uniform(-1.0, 1.0) + rng.uniform(-1.0, 1.0));
            }
            labels.push(c);
        }
    }
    let n = labels.len();
    let x = DMatrix::from_row_slice(n, 3, &rows);
    Dataset::from_parts(x, Target::Class { labels, names: vec!["a".into(), "b".into(), "c".into()] }).unwrap()
}

fn criterion_10(s: &mut Suite) {
    let ds = blobs(3);
    let x = ds.x();

    let sc = zscore_fit(x).unwrap();
    let z = zscore_apply(&sc, x).unwrap();
    let worst = (0..z.ncols())
        .map(|j| {
            let c = z.column(j);
            let m = c.mean();
            let sd = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (c.len() - 1) as f64).sqrt();
            m.abs().max((sd - 1.0).abs())
        })
        .fold(0.0f64, f64::max);
    s.check("10a", "z-score gives zero mean, unit sample std", worst < 1e-12, format!("worst deviation {worst:.1e}"));

    let bal = smote_balance(&ds, 5, 0).unwrap();
    let counts = bal.class_counts();
    let originals_kept = bal.x().rows(0, x.nrows()) == x.rows(0, x.nrows());
    s.check(
        "10b",
        "SMOTE balances every class and keeps original rows",
        counts.iter().all(|&c| c == 40) && originals_kept,
        format!("class counts {counts:?}"),
    );

    let labels = ds.labels().unwrap();
    let pred: Vec<usize> = labels.iter().enumerate().map(|(i, &l)| if i % 7 == 0 { (l + 1) % 3 } else { l }).collect();
    let cm = confusion(&pred, labels, 3).unwrap();
    let rows_ok = (0..3).all(|t| {
        let row: u64 = (0..3).map(|p| cm.counts[(t, p)]).sum();
        let frac: f64 = (0..3).map(|p| cm.normalized[(t, p)]).sum();
        row as usize == ds.class_counts()[t] && (frac - 1.0).abs() < 1e-12
    });
    s.check("10c", "confusion rows sum to class sizes and to 1", rows_ok, format!("{} samples", cm.total()));

    let split = split_indices(ds.n_samples(), &SplitConfig::new(0.7, 0).unwrap()).unwrap();
    let tensor = transform(&z, &AttractorSpec::lorenz_rho(28.0).unwrap(), &IntegrationConfig::new(0.01, 30).unwrap()).unwrap();
    let cfg = SweepConfig::new(ReadoutKind::ridge_classifier(), SelectionMode::Honest);
    let a = iteration_sweep(std::slice::from_ref(&tensor), ds.target(), &split, &cfg).unwrap();
    let b = iteration_sweep(std::slice::from_ref(&tensor), ds.target(), &split, &cfg).unwrap();
    s.check(
        "10d",
        "iteration sweep is deterministic",
        serde_json::to_string(&a).unwrap() == serde_json::to_string(&b).unwrap(),
        format!("best iteration {}", a.best_iteration),
    );

    // The class decision is the argmax of affine scores with an unpenalized
    // intercept, so translating every feature must not change it.
    let shifted = z.map(|v| v + 3.0);
    let predict = |m: &DMatrix<f64>| {
        let train = ds.select_rows(&split.train);
        let p = fit_pipeline(&m.select_rows(&split.train), train.target(), &ReadoutKind::ridge_classifier(), None, 0).unwrap();
        match p.predict(&m.select_rows(&split.test)).unwrap() {
            Prediction::Labels(l) => l,
            Prediction::Real(_) => unreachable!(),
        }
    };
    s.check("10e", "ridge classifier argmax invariant to feature translation", predict(&z) == predict(&shifted), String::new());

    let scan_cfg = ScanConfig {
        sigma: 10.0,
        beta: 8.0 / 3.0,
        integration: IntegrationConfig::new(0.01, 20).unwrap(),
        lle: LleConfig { series_len: 3000, ..LleConfig::default() },
        sweep: SweepConfig::new(ReadoutKind::linear_svm(), SelectionMode::Paper),
    };
    let zds = ds.with_x(z.clone(), ds.feature_names().to_vec()).unwrap();
    let r1 = lle_accuracy_scan(&zds, &split, &[5.0, 28.0], &scan_cfg).unwrap();
    let r2 = lle_accuracy_scan(&zds, &split, &[5.0, 28.0], &scan_cfg).unwrap();
    s.check(
        "10f",
        "ρ scan is reproducible",
        serde_json::to_string(&r1).unwrap() == serde_json::to_string(&r2).unwrap(),
        format!("{} rows", r1.len()),
    );
}

fn main() {
    let start = Instant::now();
    let dir = data_dir();
    println!("acceptance run (external data directory: {})", dir.display());
    let mut s = Suite { pass: 0, fail: 0, blocked: 0 };
    criterion_1(&mut s);
    criterion_2_3(&mut s);
    criterion_4(&mut s, &dir);
    let iris = criterion_5(&mut s);
    criterion_6(&mut s, &dir);
    criterion_7(&mut s, &dir);
    criterion_8(&mut s, &dir);
    criterion_9(&mut s, iris);
    criterion_10(&mut s);
    println!(
        "acceptance: {} passed, {} failed, {} blocked ({:.1} s)",
        s.pass,
        s.fail,
        s.blocked,
        start.elapsed().as_secs_f64()
    );
    if s.fail > 0 {
        std::process::exit(1);
    }
}
