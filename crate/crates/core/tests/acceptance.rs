//! Acceptance criteria 1-7. Each test writes one `criterion N: PASS|FAIL`
//! line to stderr (uncaptured, so it shows in plain `cargo test` output) and
//! then fails if the criterion failed. The criteria run one at a time so the
//! runtime limits measure a single criterion.

mod common;

use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use beam_core::critic::CriticKind;
use beam_core::datasets::{mnist_load, read_idx_images, DatasetKind, IdxImages, MogSpec};
use beam_core::divergences::{discriminator_divergence_1d, kl_divergence_1d, knn_kl_estimate, normal_pdf, Quadrature};
use beam_core::experiment::{self, Checkpoint, EvalOptions, RunOptions};
use beam_core::rbm::{LayerKind, RbmModel};
use beam_core::rng;
use beam_core::tds::{gamma_step, ParticlePopulation, TdsConfig};
use beam_core::training::{adversarial_gradient_weighted, data_expectation, model_expectation, CriticConfig, TrainConfig, Trainer};
use common::configs::{derived, files, opts, reduced, BUNDLED};
use common::critic::{boundary_tie, brute_force, cache, fixture};
use common::*;
use ndarray::{array, Array1, Array2};
use proptest::test_runner::{Config, RngSeed, TestRunner};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

static SERIAL: Mutex<()> = Mutex::new(());

/// Outcome of one criterion: named checks, each with a detail string.
struct Report {
    number: u32,
    checks: Vec<(String, bool, String)>,
    started: Instant,
}

impl Report {
    fn new(number: u32) -> Self {
        Self {
            number,
            checks: Vec::new(),
            started: Instant::now(),
        }
    }

    fn check(&mut self, name: &str, ok: bool, detail: impl Into<String>) {
        self.checks.push((name.to_string(), ok, detail.into()));
    }

    fn runtime_below(&mut self, limit: Duration) {
        let took = self.started.elapsed();
        self.check("runtime", took < limit, format!("{:.1}s < {}s", took.as_secs_f64(), limit.as_secs()));
    }

    /// Prints the summary line plus one indented line per check, then panics on failure.
    fn finish(self) {
        let ok = self.checks.iter().all(|c| c.1);
        let mut text = format!(
            "criterion {}: {} ({:.1}s)\n",
            self.number,
            if ok { "PASS" } else { "FAIL" },
            self.started.elapsed().as_secs_f64()
        );
        for (name, pass, detail) in &self.checks {
            text.push_str(&format!("    [{}] {name}: {detail}\n", if *pass { "ok" } else { "FAIL" }));
        }
        let _ = std::io::stderr().write_all(text.as_bytes());
        let failed: Vec<&str> = self.checks.iter().filter(|c| !c.1).map(|c| c.0.as_str()).collect();
        assert!(ok, "criterion {} failed: {}", self.number, failed.join(", "));
    }
}

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

// ---------------------------------------------------------------- criterion 1

fn binary_rows(n: usize, seed: u64) -> Array2<f64> {
    let mut r = rng::stream(seed, 5);
    Array2::from_shape_fn((n, 2), |_| f64::from(u8::from(r.random::<bool>())))
}

fn h_code(h: &Array1<f64>) -> usize {
    h.iter().enumerate().map(|(i, b)| (*b as usize) << i).sum()
}

/// Worst relative error of the ML and adversarial gradients on one seeded 2x2 model.
fn gradient_errors(seed: u64) -> (f64, f64) {
    let model = random_bernoulli(2, 2, seed, 1.5);
    let data = binary_rows(6, seed);

    let (states, probs) = joint_table(&model, 1.0);
    let mut ml = data_expectation(&model, data.view()).unwrap();
    ml.add_scaled(&model_expectation(&model, &batch(&states), Some(&probs)).unwrap(), -1.0);
    let ml_numeric = finite_difference(&model, 1e-5, |m| log_likelihood(m, &data));

    let mut r = rng::stream(seed, 17);
    let critic: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
    let values: Vec<f64> = states.iter().map(|s| critic[h_code(&s.h)]).collect();
    let adv = adversarial_gradient_weighted(&model, &batch(&states), &values, &probs).unwrap();
    let objective = |m: &RbmModel| {
        let (s, p) = joint_table(m, 1.0);
        s.iter().zip(&p).map(|(s, p)| p * critic[h_code(&s.h)]).sum::<f64>()
    };
    let adv_numeric = finite_difference(&model, 1e-5, objective);

    (relative_error(&ml.values(), &ml_numeric), relative_error(&adv.values(), &adv_numeric))
}

#[test]
fn criterion_1_gradient_oracles() {
    let _guard = serial();
    let mut report = Report::new(1);
    let mut runner = TestRunner::new(Config {
        cases: 256,
        rng_seed: RngSeed::Fixed(1),
        failure_persistence: None,
        ..Config::default()
    });
    let worst = Mutex::new((0.0f64, 0.0f64));
    let outcome = runner.run(&(0u64..1_000_000), |seed| {
        let (ml, adv) = gradient_errors(seed);
        let mut w = worst.lock().unwrap();
        w.0 = w.0.max(ml);
        w.1 = w.1.max(adv);
        proptest::prop_assert!(ml < 1e-3, "ML gradient, seed {seed}: {ml}");
        proptest::prop_assert!(adv < 1e-3, "adversarial gradient, seed {seed}: {adv}");
        Ok(())
    });
    let (ml, adv) = *worst.lock().unwrap();
    let detail = match &outcome {
        Ok(()) => format!("256 models, worst ML {ml:.2e}, worst adversarial {adv:.2e} (< 1e-3)"),
        Err(e) => e.to_string(),
    };
    report.check("finite differences", outcome.is_ok(), detail);
    report.runtime_below(Duration::from_secs(10));
    report.finish();
}

// ---------------------------------------------------------------- criterion 2

fn chain_histogram(model: &RbmModel, beta: f64, sweeps: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, 0);
    let mut kernel = model.kernel();
    let mut v = vec![0.0; model.n_visible()];
    let mut h = vec![0.0; model.n_hidden()];
    let mut counts = vec![0.0; 1 << (model.n_visible() + model.n_hidden())];
    for _ in 0..sweeps {
        kernel.gibbs_step(&mut v, &mut h, beta, &mut r);
        counts[state_index(&v, &h)] += 1.0;
    }
    counts.iter().map(|c| c / sweeps as f64).collect()
}

fn zero_variance_matches_plain_gibbs() -> bool {
    let model = random_gaussian(4, 3, 2);
    let cfg = TdsConfig {
        particles: 16,
        phi: 0.9,
        var_beta: 0.0,
        steps_per_grad: 1,
    };
    let mut pop = ParticlePopulation::init(&model, &cfg, 9, rng::STREAM_PARTICLES).unwrap();
    let mut states = pop.states.clone();
    let mut rngs = pop.rngs().to_vec();
    pop.advance(&model, &cfg, 50).unwrap();
    let mut kernel = model.kernel();
    for p in 0..cfg.particles {
        let mut v = states.v.row(p).to_vec();
        let mut h = states.h.row(p).to_vec();
        for _ in 0..50 {
            kernel.gibbs_step(&mut v, &mut h, 1.0, &mut rngs[p]);
        }
        states.v.row_mut(p).assign(&Array1::from(v));
        states.h.row_mut(p).assign(&Array1::from(h));
    }
    let bits = |a: &Array2<f64>| a.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    pop.betas.iter().all(|b| *b == 1.0) && bits(&states.v) == bits(&pop.states.v) && bits(&states.h) == bits(&pop.states.h)
}

#[test]
fn criterion_2_gibbs_and_tds() {
    let _guard = serial();
    let mut report = Report::new(2);

    let model = random_bernoulli(2, 2, 7, 1.0);
    for beta in [1.0, 0.5] {
        let (_, exact) = joint_table(&model, beta);
        let tv = total_variation(&chain_histogram(&model, beta, 1_000_000, 11), &exact);
        report.check(&format!("chain histogram, beta {beta}"), tv < 0.01, format!("TV {tv:.4} < 0.01 at 10^6 sweeps"));
    }

    let (phi, var) = (0.9, 0.81);
    let n = 1_000_000;
    let mut r = rng::stream(2024, 0);
    let mut beta = 1.0;
    let xs: Vec<f64> = (0..n)
        .map(|_| {
            beta = gamma_step(beta, phi, var, &mut r).unwrap();
            beta
        })
        .collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let variance = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    let lag1 = xs.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / (n - 1) as f64 / variance;
    report.check("gamma mean", (mean - 1.0).abs() < 0.01, format!("{mean:.4} in 1 ± 0.01"));
    report.check("gamma variance", (variance - var).abs() < 0.03, format!("{variance:.4} in 0.81 ± 0.03"));
    report.check("gamma lag-1", (lag1 - phi).abs() < 0.02, format!("{lag1:.4} in 0.9 ± 0.02"));

    report.check("zero variance", zero_variance_matches_plain_gibbs(), "bit-identical to plain Gibbs");
    report.runtime_below(Duration::from_secs(60));
    report.finish();
}

// ---------------------------------------------------------------- criterion 3

fn normal(n: usize, mean: f64, std: f64, seed: u64) -> Array2<f64> {
    let mut r = rng::stream(seed, 77);
    Array2::from_shape_fn((n, 1), |_| {
        let z: f64 = StandardNormal.sample(&mut r);
        mean + std * z
    })
}

fn gaussian_kl(m1: f64, s1: f64, m2: f64, s2: f64) -> f64 {
    (s2 / s1).ln() + (s1 * s1 + (m1 - m2).powi(2)) / (2.0 * s2 * s2) - 0.5
}

#[test]
fn criterion_3_divergence_calibration() {
    let _guard = serial();
    let mut report = Report::new(3);
    let n = 10_000;

    let same = knn_kl_estimate(normal(n, 0.0, 1.0, 1).view(), normal(n, 0.0, 1.0, 2).view()).unwrap();
    report.check("N(0,1) vs N(0,1)", same.abs() < 0.05, format!("{same:.4} in 0 ± 0.05"));
    let shifted = knn_kl_estimate(normal(n, 0.0, 1.0, 3).view(), normal(n, 1.0, 1.0, 4).view()).unwrap();
    report.check("N(0,1) vs N(1,1)", (shifted - 0.5).abs() < 0.07, format!("{shifted:.4} in 0.5 ± 0.07"));

    // N(0,1) against N(0,4) read as variance 4; the closed forms are the oracle.
    let (narrow, wide) = (normal(n, 0.0, 1.0, 5), normal(n, 0.0, 2.0, 6));
    let forward = knn_kl_estimate(narrow.view(), wide.view()).unwrap();
    let reverse = knn_kl_estimate(wide.view(), narrow.view()).unwrap();
    let (fo, ro) = (gaussian_kl(0.0, 1.0, 0.0, 2.0), gaussian_kl(0.0, 2.0, 0.0, 1.0));
    report.check("asymmetry, narrow to wide", (forward - fo).abs() < 0.1, format!("{forward:.4} in {fo:.4} ± 0.1"));
    report.check("asymmetry, wide to narrow", (reverse - ro).abs() < 0.1, format!("{reverse:.4} in {ro:.4} ± 0.1"));

    let (mut bound, mut reverse_above, mut dd_above) = (true, true, true);
    let mut worst_dd = (f64::INFINITY, 0.0);
    for i in 0..=24 {
        let delta = i as f64 * 0.25;
        let half = delta / 2.0;
        let p = move |x: f64| 0.5 * normal_pdf(x, -half, 1.0) + 0.5 * normal_pdf(x, half, 1.0);
        let sq = (1.0 + half * half).sqrt();
        let q = move |x: f64| normal_pdf(x, 0.0, sq);
        let grid = Quadrature::symmetric(half, sq);
        let dd = discriminator_divergence_1d(p, q, &grid).unwrap();
        let fwd = kl_divergence_1d(p, q, &grid).unwrap();
        let rev = kl_divergence_1d(q, p, &grid).unwrap();
        bound &= std::f64::consts::LN_2 + dd >= rev;
        if delta >= 1.0 {
            reverse_above &= rev > fwd;
            if dd - fwd < worst_dd.0 {
                worst_dd = (dd - fwd, delta);
            }
            dd_above &= dd > fwd;
        }
    }
    report.check("log 2 + D_D >= reverse KL", bound, "Δ = 0, 0.25, ..., 6");
    report.check("reverse KL > forward KL", reverse_above, "Δ = 1, ..., 6");
    report.check(
        "D_D > forward KL",
        dd_above,
        format!("Δ = 1, ..., 6; smallest D_D - KL is {:.2e} at Δ = {}", worst_dd.0, worst_dd.1),
    );
    report.runtime_below(Duration::from_secs(60));
    report.finish();
}

// ---------------------------------------------------------------- criterion 4

fn last_reverse_kl(dir: &Path) -> f64 {
    let metrics = fs::read_to_string(dir.join("metrics.csv")).unwrap();
    metrics.lines().last().unwrap().split(',').nth(3).unwrap().parse().unwrap()
}

#[test]
fn criterion_4_grid_mode_coverage() {
    let _guard = serial();
    let mut report = Report::new(4);
    let tmp = tempfile::tempdir().unwrap();

    let beam_cfg = derived("grid", tmp.path(), &[]);
    let beam_dir = tmp.path().join("beam");
    experiment::run(&beam_cfg, &opts(&beam_dir, "200")).unwrap();
    fs::rename(&beam_cfg, tmp.path().join("beam.cfg")).unwrap();
    let baseline_cfg = derived("grid", tmp.path(), &[("train.gamma", "1")]);
    let baseline_dir = tmp.path().join("baseline");
    experiment::run(&baseline_cfg, &opts(&baseline_dir, "200")).unwrap();

    let ckpt = Checkpoint::load(&beam_dir.join("checkpoint_final.json")).unwrap();
    let model = ckpt.model.to_model().unwrap();
    let tds = ckpt.train.to_config().tds;
    let reference = experiment::eval_reference("mog_grid", &model, 10_000, ckpt.seed).unwrap();
    let eval = experiment::eval_model(
        &model,
        &tds,
        reference.view(),
        &EvalOptions {
            particles: 10_000,
            ..EvalOptions::default()
        },
        ckpt.seed,
    )
    .unwrap();

    let spec = MogSpec::grid();
    let mut counts = [0usize; 25];
    let mut near = 0usize;
    for row in eval.samples.rows() {
        let k = spec.nearest_mode(row);
        counts[k] += 1;
        let d: f64 = row.iter().zip(&spec.modes[k].mean).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if d <= 4.0 * spec.modes[k].std {
            near += 1;
        }
    }
    let total = eval.samples.nrows() as f64;
    let min_share = *counts.iter().min().unwrap() as f64 / total;
    let covered = counts.iter().filter(|&&c| c as f64 / total >= 0.01).count();
    report.check(
        "every basin >= 1%",
        covered == 25,
        format!("{covered}/25 basins, smallest {:.2}% of {} particles", 100.0 * min_share, eval.samples.nrows()),
    );
    let share_near = near as f64 / total;
    report.check("within 4 stds", share_near >= 0.95, format!("{:.1}% >= 95%", 100.0 * share_near));

    let (beam, baseline) = (last_reverse_kl(&beam_dir), last_reverse_kl(&baseline_dir));
    report.check(
        "reverse KL vs likelihood-only",
        beam < 0.5 * baseline,
        format!("final {beam:.3} < 0.5 × {baseline:.3}"),
    );
    report.finish();
}

// ---------------------------------------------------------------- criterion 5

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        for &k in &order[i..=j] {
            out[k] = (i + j) as f64 / 2.0 + 1.0;
        }
        i = j + 1;
    }
    out
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Spearman correlation of `ys` with their index, and the exact one-sided
/// permutation p-value in the direction of `sign` (+1 increasing, -1 decreasing).
fn spearman_trend(ys: &[f64], sign: f64) -> (f64, f64) {
    let t: Vec<f64> = (1..=ys.len()).map(|i| i as f64).collect();
    let r = ranks(ys);
    let rho = pearson(&t, &r);
    // Enumerate every ordering of the ranks (Heap's algorithm).
    let mut perm = r.clone();
    let n = perm.len();
    let observed = sign * rho - 1e-12;
    let (mut hits, mut total) = (0u64, 0u64);
    let mut count = |p: &[f64]| {
        total += 1;
        if sign * pearson(&t, p) >= observed {
            hits += 1;
        }
    };
    let mut c = vec![0usize; n];
    count(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            count(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    (rho, hits as f64 / total as f64)
}

#[test]
fn criterion_5_mnist_likelihood_pathology() {
    let _guard = serial();
    let mut report = Report::new(5);
    let tmp = tempfile::tempdir().unwrap();
    let cfg = derived("mnist_continuous", tmp.path(), &[]);
    for seed in [1u64, 2, 3] {
        let dir = tmp.path().join(format!("seed{seed}"));
        experiment::run(
            &cfg,
            &RunOptions {
                seed: Some(seed),
                ..opts(&dir, "10+10")
            },
        )
        .unwrap();
        let metrics = fs::read_to_string(dir.join("metrics.csv")).unwrap();
        let rows: Vec<Vec<&str>> = metrics.lines().skip(1).map(|l| l.split(',').collect()).collect();
        let column = |phase: &str, i: usize| -> Vec<f64> {
            rows.iter().filter(|r| r[1] == phase).map(|r| r[i].parse().unwrap()).collect()
        };
        let (fwd_ml, rev_ml, rev_adv) = (column("ml", 2), column("ml", 3), column("adv", 3));
        let (rho, p) = spearman_trend(&fwd_ml, -1.0);
        report.check(
            &format!("seed {seed}: forward KL falls under likelihood"),
            p < 0.05,
            format!("rho {rho:.3}, p {p:.4}"),
        );
        let (rho, p) = spearman_trend(&rev_ml, 1.0);
        report.check(
            &format!("seed {seed}: reverse KL rises under likelihood"),
            p < 0.05,
            format!("rho {rho:.3}, p {p:.4}"),
        );
        let (rho, p) = spearman_trend(&rev_adv, -1.0);
        report.check(
            &format!("seed {seed}: reverse KL trend negative with adversary"),
            rho < 0.0,
            format!("rho {rho:.3}, p {p:.4}"),
        );
    }
    report.finish();
}

#[test]
fn spearman_trend_helper() {
    let (rho, p) = spearman_trend(&[1.0, 2.0, 3.0, 4.0, 5.0], 1.0);
    assert!((rho - 1.0).abs() < 1e-12);
    assert!((p - 1.0 / 120.0).abs() < 1e-12);
    let (rho, p) = spearman_trend(&[5.0, 4.0, 3.0, 2.0, 1.0], 1.0);
    assert!((rho + 1.0).abs() < 1e-12);
    assert!((p - 1.0).abs() < 1e-12);
    assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
}

// ---------------------------------------------------------------- criterion 6

#[test]
fn criterion_6_critics() {
    let _guard = serial();
    let mut report = Report::new(6);
    let (mut exact, mut in_range, mut symmetric, mut checked) = (0, 0, 0, 0);
    for seed in 0..1000 {
        let f = fixture(seed);
        let (c, swapped) = (cache(&f, false), cache(&f, true));
        let tie = boundary_tie(&f);
        if !tie {
            checked += 1;
        }
        let (mut e, mut r, mut s) = (true, true, true);
        for kind in [CriticKind::Nearest, CriticKind::DistanceWeighted] {
            let got = c.evaluate(kind, f.query.view(), None).unwrap();
            e &= got.to_bits() == brute_force(&f, kind).to_bits();
            r &= (-1.0..=1.0).contains(&got);
            if !tie {
                s &= (got + swapped.evaluate(kind, f.query.view(), None).unwrap()).abs() < 1e-12;
            }
        }
        exact += usize::from(e);
        in_range += usize::from(r);
        symmetric += usize::from(s && !tie);
    }
    report.check("brute force", exact == 1000, format!("{exact}/1000 fixtures bit-identical"));
    report.check("range", in_range == 1000, format!("{in_range}/1000 fixtures in [-1, 1]"));
    report.check(
        "side swap negates",
        symmetric == checked,
        format!("{symmetric}/{checked} fixtures without a tie at the k-th neighbor"),
    );
    report.runtime_below(Duration::from_secs(10));
    report.finish();
}

// ---------------------------------------------------------------- criterion 7

fn bundled_idx_header() -> Vec<u8> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist-subset/images-idx3-ubyte.gz");
    let mut header = vec![0u8; 16];
    flate2::read::GzDecoder::new(fs::File::open(path).unwrap()).read_exact(&mut header).unwrap();
    header
}

fn idx_checks(report: &mut Report) {
    let header = bundled_idx_header();
    let magic = u32::from_be_bytes(header[..4].try_into().unwrap());
    let rows = u32::from_be_bytes(header[8..12].try_into().unwrap());
    let cols = u32::from_be_bytes(header[12..16].try_into().unwrap());
    report.check(
        "bundled IDX header",
        magic == 0x0000_0803 && rows == 28 && cols == 28,
        format!("magic {magic:#010x}, {rows}x{cols}"),
    );

    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("x.idx");
    let images = IdxImages {
        count: 1,
        rows: 28,
        cols: 28,
        pixels: vec![7; 784],
    };
    beam_core::datasets::write_idx_images(&path, &images, false).unwrap();
    let mut bytes = fs::read(&path).unwrap();
    bytes[2] = 9;
    fs::write(&path, &bytes).unwrap();
    let bad_magic = read_idx_images(&path).is_err();
    let small = IdxImages {
        count: 1,
        rows: 14,
        cols: 14,
        pixels: vec![0; 196],
    };
    beam_core::datasets::write_idx_images(&path, &small, false).unwrap();
    let bad_shape = mnist_load(&path, DatasetKind::Continuous).is_err();
    report.check("IDX rejections", bad_magic && bad_shape, format!("bad magic {bad_magic}, 14x14 {bad_shape}"));
}

fn round_trip_check(report: &mut Report) {
    let mut r = rng::stream(4, 0);
    let model = RbmModel::random(LayerKind::Gaussian, 3, 4, 0.3, &mut r);
    let config = TrainConfig {
        gamma: 0.5,
        lr: 0.01,
        lr_adv: 0.01,
        decay: 0.1,
        adam_beta1: 0.9,
        adam_beta2: 0.999,
        adam_eps: 1e-8,
        epochs_ml: 1,
        epochs_adv: 1,
        batch_size: 4,
        monitor_minibatch: 4,
        tds: TdsConfig {
            particles: 4,
            phi: 0.9,
            var_beta: 0.81,
            steps_per_grad: 2,
        },
        critic: CriticConfig::default(),
    };
    let mut t = Trainer::new(model, config, 3).unwrap();
    let data = array![[0.1, 0.2, 0.3], [1.0, -1.0, 0.5], [0.0, 0.0, 0.0], [2.0, 1.0, -1.0]];
    for _ in 0..3 {
        t.train_step(data.view(), 0.5, 0.01).unwrap();
    }
    let text = Checkpoint::from_trainer(&t, 3).to_json();
    let back = Checkpoint::from_json(&text).unwrap();
    let restored = back.to_trainer(None).unwrap();
    let ok = restored.model == t.model
        && restored.population.states == t.population.states
        && restored.population.betas == t.population.betas
        && Checkpoint::from_trainer(&restored, 3).to_json() == text;
    report.check("checkpoint round trip", ok, "model, particles, temperatures and text identical");
}

#[test]
fn criterion_7_plumbing() {
    let _guard = serial();
    let mut report = Report::new(7);
    idx_checks(&mut report);
    round_trip_check(&mut report);
    for name in BUNDLED {
        let tmp = tempfile::tempdir().unwrap();
        let (cfg, epochs) = reduced(name, tmp.path());
        let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
        experiment::run(&cfg, &opts(&a, epochs)).unwrap();
        experiment::run(&cfg, &opts(&b, epochs)).unwrap();
        let identical = files(&a) == files(&b);
        fs::create_dir_all(&c).unwrap();
        fs::copy(a.join("checkpoint_epoch001.json"), c.join("checkpoint_epoch001.json")).unwrap();
        fs::copy(a.join("metrics.csv"), c.join("metrics.csv")).unwrap();
        experiment::resume(&c.join("checkpoint_epoch001.json"), &cfg, &opts(&c, epochs)).unwrap();
        let resumed = ["metrics.csv", "checkpoint_final.json", "samples_epoch002.csv"]
            .iter()
            .all(|f| fs::read(a.join(f)).unwrap() == fs::read(c.join(f)).unwrap());
        report.check(
            &format!("{name} reruns and resume"),
            identical && resumed,
            format!("rerun byte-identical {identical}, resume from epoch 1 identical {resumed}"),
        );
    }
    report.finish();
}
