//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line for each
//! and exits non-zero if any fails.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use wpos::dataset::{self, Cell};
use wpos::experiment;
use wpos::select;
use wpos::ExperimentConfig;
use wpos_core::pdp::synthesize_pdp;
use wpos_core::rng::stream;
use wpos_core::selection::{knn_kl, marcum_q, select_feature_size, SelectionInputs, TABLE1_MEAN_ORDERED, TABLE1_SEPARATION_TERMS};
use wpos_nn::{
    build_pdp_cnn, build_pnn, build_toa_rss_mlp, gradient_check, BranchSpec, LayerSpec, Model, ModelKind, ModelSpec,
    Tensor, TrainingParams,
};

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within_budget(start: Instant, budget: Duration) -> Result<(), String> {
    let took = start.elapsed();
    check(took < budget, format!("took {:.1} s, budget {:.0} s", took.as_secs_f64(), budget.as_secs_f64()))
}

fn near(got: f64, want: f64) -> bool {
    (got - want).abs() <= 0.02f64.max(0.02 * want.abs())
}

fn rows_near(what: &str, f: usize, got: &[f64], want: &[f64]) -> Result<(), String> {
    check(got.len() == want.len(), format!("{what} F={f}: {} values, expected {}", got.len(), want.len()))?;
    for (g, w) in got.iter().zip(want) {
        check(near(*g, *w), format!("{what} F={f}: {g:.4} vs {w}"))?;
    }
    Ok(())
}

fn table_reproduction() -> Outcome {
    let start = Instant::now();
    let inputs = SelectionInputs { mean_ordered: TABLE1_MEAN_ORDERED.to_vec(), dof: 2.0, f_min: 3, f_max: 8, weight: 0.5 };
    let t = select_feature_size(&inputs, &[1.0; 6]).map_err(|e| e.to_string())?;
    let expected: [(usize, f64, &[f64], f64, f64, &[f64], &[f64], f64); 3] = [
        (4, 5.23, &[12.13, 7.27], 4.651, 10.98, &[0.92, 0.57], &[0.44, 0.53], 0.7213),
        (5, 4.39, &[12.97, 8.11, 5.07], 5.099, 7.91, &[0.99, 0.83, 0.52], &[0.09, 0.49, 0.42], 0.7857),
        (6, 3.89, &[13.46, 8.60, 5.56, 2.45], 5.326, 5.79, &[0.99, 0.95, 0.72, 0.35], &[0.01, 0.20, 0.55, 0.24], 0.7912),
    ];
    for (f, psi2, lambda, gain, threshold, p, acq, a) in expected {
        let r = t.row(f).ok_or(format!("no row for F={f}"))?;
        check(near(r.psi2 * 1e7, psi2), format!("psi2 F={f}: {:.4}", r.psi2 * 1e7))?;
        let lam: Vec<f64> = r.lambda[2..].iter().map(|v| v * 1e7).collect();
        rows_near("lambda", f, &lam, lambda)?;
        check(near(r.ll_gain, gain), format!("LL gain F={f}: {:.4}", r.ll_gain))?;
        check(near(r.threshold * 1e7, threshold), format!("threshold F={f}: {:.4}", r.threshold * 1e7))?;
        rows_near("exceedance", f, &r.exceedance[2..], p)?;
        rows_near("acquisition", f, &r.acquisition[3..], acq)?;
        check(near(r.information_term, a), format!("(a) F={f}: {:.4}", r.information_term))?;
    }
    within_budget(start, Duration::from_secs(1))?;
    Ok(format!("F=4..6 rows match, {:.1} ms", start.elapsed().as_secs_f64() * 1e3))
}

fn selected_size() -> Outcome {
    let start = Instant::now();
    let inputs = SelectionInputs { mean_ordered: TABLE1_MEAN_ORDERED.to_vec(), dof: 2.0, f_min: 3, f_max: 8, weight: 0.5 };
    let t = select_feature_size(&inputs, &TABLE1_SEPARATION_TERMS).map_err(|e| e.to_string())?;
    let want = [0.79, 0.76, 0.89, 0.88, 0.87, 0.85];
    let got: Vec<f64> = t.rows.iter().map(|r| r.criterion).collect();
    for (g, w) in got.iter().zip(want) {
        check((g - w).abs() <= 0.01, format!("criterion {g:.4} vs {w}"))?;
    }
    check(t.best_f == 5, format!("F* = {}", t.best_f))?;
    within_budget(start, Duration::from_secs(1))?;
    let shown: Vec<String> = got.iter().map(|v| format!("{v:.3}")).collect();
    Ok(format!("criterion [{}], F* = 5", shown.join(", ")))
}

fn marcum_equivalence() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let order = [0.5, 1.0, 4.0][i % 3];
        let a = 6.0 * ((i * 7) % 20) as f64 / 19.0;
        let b = 6.0 * ((i * 13 + 5) % 20) as f64 / 19.0;
        let series = marcum_q(order, a, b).map_err(|e| e.to_string())?;
        worst = worst.max((series - support::marcum_by_quadrature(order, a, b)).abs());
    }
    check(worst < 1e-6, format!("max abs error {worst:e}"))?;
    within_budget(start, Duration::from_secs(10))?;
    Ok(format!("max abs error {worst:.2e} over 20 points"))
}

fn gaussian(n: usize, mean: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream(seed, 0);
    (0..n).map(|_| vec![mean + rng.sample::<f64, _>(StandardNormal)]).collect()
}

fn knn_divergence() -> Outcome {
    let start = Instant::now();
    let p = gaussian(5000, 0.0, 41);
    let q = gaussian(5000, 1.0, 42);
    let d = knn_kl(&p, &q, 30, 1.0).map_err(|e| e.to_string())?;
    check((d - 0.5).abs() <= 0.05, format!("D(N(0,1) || N(1,1)) = {d:.4}, expected 0.5 within 10%"))?;
    let a = gaussian(1000, 0.0, 43);
    let b = gaussian(1000, 0.0, 44);
    let same = knn_kl(&a, &b, 30, 1.0).map_err(|e| e.to_string())?;
    check(same.abs() < 0.05, format!("self-divergence {same:.4}"))?;
    within_budget(start, Duration::from_secs(30))?;
    Ok(format!("estimate {d:.4}, self-divergence {same:.4}"))
}

fn toy(branch: Vec<LayerSpec>, input: [usize; 3], head: Vec<LayerSpec>, classes: usize) -> ModelSpec {
    ModelSpec { branches: vec![BranchSpec { input, layers: branch }], head, classes, seed: 23, training: TrainingParams::default() }
}

fn gradient_checks() -> Outcome {
    let start = Instant::now();
    let cases: Vec<(&str, ModelSpec)> = vec![
        ("dense", toy(vec![], [5, 1, 1], vec![LayerSpec::dense(3)], 3)),
        ("dense+relu", toy(vec![], [4, 1, 1], vec![LayerSpec::dense(6), LayerSpec::Relu, LayerSpec::dense(3)], 3)),
        ("conv3x3+flatten", toy(vec![LayerSpec::conv3x3(3), LayerSpec::Flatten], [2, 4, 3], vec![LayerSpec::dense(2)], 2)),
        (
            "conv2x3 valid+relu",
            toy(
                vec![LayerSpec::Conv { out_channels: 2, kernel_h: 2, kernel_w: 3, padding: 0 }, LayerSpec::Relu, LayerSpec::Flatten],
                [1, 4, 5],
                vec![LayerSpec::dense(3)],
                3,
            ),
        ),
        ("pnn", build_pnn(3, 2, 4)),
        ("pdp-cnn", build_pdp_cnn(2, 3, 3)),
        ("toa-rss", build_toa_rss_mlp(3, 4)),
    ];
    let mut worst: f64 = 0.0;
    for (name, spec) in cases {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let labels = [1usize, 0];
        let inputs: Vec<Tensor> = spec
            .branches
            .iter()
            .map(|b| {
                let [c, h, w] = b.input;
                let n = labels.len() * c * h * w;
                Tensor::new([labels.len(), c, h, w], (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
            })
            .collect();
        let model = Model::new(spec).map_err(|e| format!("{name}: {e}"))?;
        let r = gradient_check(&model, &inputs, &labels, 1e-5).map_err(|e| format!("{name}: {e}"))?;
        check(r.max_relative_error < 1e-4, format!("{name}: relative error {:e}", r.max_relative_error))?;
        worst = worst.max(r.max_relative_error);
    }
    within_budget(start, Duration::from_secs(30))?;
    Ok(format!("7 toy networks, max relative error {worst:.2e}"))
}

fn distributional_synthesis() -> Outcome {
    let start = Instant::now();
    let (sigma2, nu) = (2.5e-7, 8.0);
    let noise = synthesize_pdp(&vec![0.0; 10_000], sigma2, nu, &mut stream(61, 0)).map_err(|e| e.to_string())?;
    let d = support::ks_statistic(noise.as_slice(), |e| support::chi2_cdf_even_dof(e * nu / sigma2, 8));
    let p = support::kolmogorov_p_value(d, 10_000);
    check(p > 0.01, format!("KS p-value {p:.4}"))?;
    let energy = 4.0 * sigma2;
    let sig = synthesize_pdp(&vec![energy; 1_000_000], sigma2, nu, &mut stream(62, 0)).map_err(|e| e.to_string())?;
    let xs = sig.as_slice();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let (want_mean, want_var) = (sigma2 + energy, (2.0 * sigma2 * sigma2 + 4.0 * sigma2 * energy) / nu);
    check((mean / want_mean - 1.0).abs() < 0.02, format!("mean {mean:e} vs {want_mean:e}"))?;
    check((var / want_var - 1.0).abs() < 0.02, format!("variance {var:e} vs {want_var:e}"))?;
    within_budget(start, Duration::from_secs(30))?;
    Ok(format!(
        "KS p = {p:.3}, mean off by {:.2}%, variance off by {:.2}%",
        100.0 * (mean / want_mean - 1.0).abs(),
        100.0 * (var / want_var - 1.0).abs()
    ))
}

struct ScenarioRates {
    f_star: [usize; 3],
    los15: Vec<(usize, f64)>,
    nlos15: f64,
    los5: f64,
    toa_rss_los15: f64,
}

fn desk_scale() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig::default();
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let m = cfg.scene().map_err(|e| e.to_string())?.num_sensors();
    let chance = 100.0 / cfg.num_zones() as f64;
    let run = || -> anyhow::Result<Vec<ScenarioRates>> {
        let reference = dataset::reference_noise(&cfg)?;
        let mut out = Vec::new();
        for &scenario in &cfg.scenario_seeds {
            let generate = |los: bool, snr_db: f64| dataset::generate_cell(&cfg, Cell { scenario, los, snr_db, repeat: 0 }, &reference, threads);
            let pnn_at = |data: &dataset::CellData, f: usize| -> anyhow::Result<f64> {
                let features = data.features(f)?;
                Ok(experiment::run_cell_model(&cfg, data, ModelKind::Pnn, Some(&features), threads)?.0.rate)
            };
            let los15 = generate(true, 15.0)?;
            let nlos15 = generate(false, 15.0)?;
            let los5 = generate(true, 5.0)?;
            let mut f_star = [0; 3];
            for (slot, data) in [&los15, &nlos15, &los5].into_iter().enumerate() {
                f_star[slot] = select::select_for_cell(&cfg, data, |f| data.features(f))?.best_f;
            }
            let mut grid = Vec::new();
            for f in cfg.selection.grid() {
                let rate = pnn_at(&los15, f)?;
                println!("    scenario {scenario} LOS 15 dB P-NN F={f}: {rate:.1}%");
                grid.push((f, rate));
            }
            let rates = ScenarioRates {
                f_star,
                nlos15: pnn_at(&nlos15, f_star[1])?,
                los5: pnn_at(&los5, f_star[2])?,
                toa_rss_los15: experiment::run_cell_model(&cfg, &los15, ModelKind::ToaRss, None, threads)?.0.rate,
                los15: grid,
            };
            println!(
                "    scenario {scenario}: F* = {:?} (LOS 15, NLOS 15, LOS 5 dB); NLOS 15 dB {:.1}%, LOS 5 dB {:.1}%, TOA/RSS LOS 15 dB {:.1}%",
                rates.f_star, rates.nlos15, rates.los5, rates.toa_rss_los15
            );
            out.push(rates);
        }
        Ok(out)
    };
    let results = run().map_err(|e| format!("{e:#}"))?;
    let n = results.len() as f64;
    let mean = |f: &dyn Fn(&ScenarioRates) -> f64| results.iter().map(f).sum::<f64>() / n;
    let at = |r: &ScenarioRates, f: usize| r.los15.iter().find(|(g, _)| *g == f).map(|x| x.1).unwrap_or(f64::NAN);
    let selected = mean(&|r| at(r, r.f_star[0]));
    let nlos = mean(&|r| r.nlos15);
    let low_snr = mean(&|r| r.los5);
    let best = cfg.selection.grid().map(|f| mean(&|r| at(r, f))).fold(f64::MIN, f64::max);
    let dims: Vec<usize> = results.iter().flat_map(|r| r.f_star).map(|f| 2 * f * m).collect();
    let toa = mean(&|r| r.toa_rss_los15);
    println!("    P-NN vs TOA/RSS-MLP at 15 dB LOS: {selected:.1}% vs {toa:.1}%");
    let mut failures = Vec::new();
    let mut note = |ok: bool, msg: String| {
        if !ok {
            failures.push(msg)
        }
    };
    note(selected > 3.0 * chance, format!("(i) {selected:.1}% does not exceed {:.1}%", 3.0 * chance));
    note(selected > nlos, format!("(ii) LOS {selected:.1}% not above NLOS {nlos:.1}%"));
    note(selected > low_snr, format!("(iii) 15 dB {selected:.1}% not above 5 dB {low_snr:.1}%"));
    note(selected >= best - 3.0, format!("(iv) {selected:.1}% at F* vs best {best:.1}%"));
    note(dims.iter().all(|&d| d as f64 <= 0.2 * 1200.0), format!("(v) dimensions {dims:?}"));
    let took = start.elapsed();
    note(took < Duration::from_secs(30 * 60), format!("took {:.0} s", took.as_secs_f64()));
    if !failures.is_empty() {
        return Err(failures.join("; "));
    }
    Ok(format!(
        "LOS 15 dB {selected:.1}% (best {best:.1}%), NLOS {nlos:.1}%, 5 dB {low_snr:.1}%, dims {dims:?}, {:.0} s",
        took.as_secs_f64()
    ))
}

fn cli(args: &[&str]) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_wpos"))
        .args(args)
        .env("RUST_LOG", "warn")
        .stdout(std::process::Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    check(status.success(), format!("wpos {} exited with {status}", args.join(" ")))
}

fn tree(root: &Path, sub: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.join(sub)];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).into_iter().flatten().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = tmp.path().join("small.toml");
    std::fs::write(
        &config,
        "seed = 5\nscenario_seeds = [301]\nsnr_db = [10.0]\nlos = [true, false]\nd_train = 300\nd_test = 100\n\
         calibration_samples = 20000\nrepeats = 1\n[selection]\nf_min = 4\nf_max = 5\nneighbors = 5\n[training]\nepochs = 2\n",
    )
    .map_err(|e| e.to_string())?;
    let runs = [tmp.path().join("a"), tmp.path().join("b")];
    for out in &runs {
        let out = out.to_str().unwrap();
        for cmd in ["generate", "select-f", "train", "eval"] {
            cli(&[cmd, "--config", config.to_str().unwrap(), "--out", out, "--deterministic"])?;
        }
    }
    let files = tree(&runs[0], Path::new("data"));
    check(!files.is_empty() && files == tree(&runs[1], Path::new("data")), "dataset listings differ")?;
    let mut compared = 0;
    for f in files.iter().map(|p| p.as_path()).chain([Path::new("metrics.csv")]) {
        let a = std::fs::read(runs[0].join(f)).map_err(|e| format!("{}: {e}", f.display()))?;
        let b = std::fs::read(runs[1].join(f)).map_err(|e| format!("{}: {e}", f.display()))?;
        check(a == b, format!("{} differs between runs", f.display()))?;
        compared += 1;
    }
    Ok(format!("{compared} files byte-identical across two CLI runs"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 worked-example table", table_reproduction),
        ("2 selected feature size", selected_size),
        ("3 Marcum Q vs quadrature", marcum_equivalence),
        ("4 KNN divergence", knn_divergence),
        ("5 gradient checks", gradient_checks),
        ("6 distributional synthesis", distributional_synthesis),
        ("7 desk-scale properties", desk_scale),
        ("8 determinism", determinism),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !only.is_empty() && !only.iter().any(|o| name.starts_with(o.as_str())) {
            continue;
        }
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
