//! End-to-end acceptance checks. Runs sequentially (timings are part of the
//! criteria) and prints one PASS/FAIL line per criterion.

mod oracle;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use priorfill::align::{build_index, prefill, prefill_interpolation, prefill_with_index, FillConfig, Weighting};
use priorfill::io::{read_depth_png16, read_pfm, write_depth_png16, write_pfm};
use priorfill::metrics::{absrel, absrel_pairs, evaluate, rmse, silog, silog_pairs};
use priorfill::scenegen::{derive_prediction, generate_scene, Distortion, PredictionSpec, SceneKind, SceneSpec};
use priorfill::seed::derive_seed;
use priorfill::synth::{downsample_prior, mask_square, sample_sparse_random};
use priorfill::{DepthMap, Grid, RelativePrediction, ValidityMask};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("oracle equivalence", criterion_1),
        ("exact recovery", criterion_2),
        ("affine absorption", criterion_3),
        ("valid-pixel inheritance", criterion_4),
        ("sparse-prior trend", criterion_5),
        ("k robustness", criterion_6),
        ("metric identities", criterion_7),
        ("determinism", criterion_8),
        ("performance", criterion_9),
        ("format round trips", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {:>2} ({name}): {detail} [{secs:.2} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {:>2} ({name}): {detail} [{secs:.2} s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn bits(map: &DepthMap) -> Vec<u32> {
    map.depth().values().iter().map(|v| v.to_bits()).collect()
}

/// Bitwise equality with `prior` on its valid set.
fn inherits(out: &DepthMap, prior: &DepthMap) -> bool {
    let (o, p) = (bits(out), bits(prior));
    prior.mask().indices().all(|i| o[i] == p[i])
}

// --- criterion 1 ------------------------------------------------------------

struct Instance {
    prior: DepthMap,
    pred: RelativePrediction,
    k: usize,
    weighting: Weighting,
}

fn random_instance(rng: &mut ChaCha8Rng, case: usize) -> Instance {
    let w = rng.random_range(1..=32usize);
    let h = rng.random_range(1..=32usize);
    let n = rng.random_range(1..=200usize).min(w * h);
    let k = [1, 3, 5, 10][case % 4];
    let weighting = if case % 8 < 4 {
        Weighting::InverseDistance
    } else {
        Weighting::Uniform
    };
    let mut idx: Vec<usize> = (0..w * h).collect();
    for i in 0..n {
        let j = rng.random_range(i..w * h);
        idx.swap(i, j);
    }
    let mut bits = vec![false; w * h];
    for &i in &idx[..n] {
        bits[i] = true;
    }
    let depth: Vec<f32> = (0..w * h)
        .map(|i| if bits[i] { rng.random_range(0.5f32..20.0) } else { 0.0 })
        .collect();
    // Half of the predictions are smooth ramps with jitter, half are unstructured.
    let (gx, gy, c) = (
        rng.random_range(-1.0f32..1.0),
        rng.random_range(-1.0f32..1.0),
        rng.random_range(-5.0f32..5.0),
    );
    let smooth = case.is_multiple_of(2);
    let pred: Vec<f32> = (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as f32, (i / w) as f32);
            if smooth {
                gx * x + gy * y + c + rng.random_range(-0.05f32..0.05)
            } else {
                rng.random_range(-3.0f32..3.0)
            }
        })
        .collect();
    Instance {
        prior: DepthMap::new(Grid::new(w, h, depth).unwrap(), ValidityMask::new(w, h, bits).unwrap()).unwrap(),
        pred: RelativePrediction::new(Grid::new(w, h, pred).unwrap()),
        k,
        weighting,
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut worst = 0.0f64;
    for case in 0..200 {
        let inst = random_instance(&mut rng, case);
        let cfg = FillConfig::default().with_k(inst.k).with_weighting(inst.weighting);
        let out = prefill(&inst.prior, &inst.pred, &cfg).map_err(|e| format!("case {case}: {e}"))?;
        ensure!(
            inherits(&out.map, &inst.prior),
            "case {case}: valid pixels not inherited"
        );
        let prior: Vec<Option<f64>> = (0..inst.prior.depth().len())
            .map(|i| inst.prior.mask().at(i).then(|| inst.prior.depth().at(i) as f64))
            .collect();
        let pred = inst.pred.values().to_vec();
        let expect = oracle::prefill(
            inst.prior.width(),
            &prior,
            &pred,
            inst.k,
            inst.weighting == Weighting::InverseDistance,
        );
        for (i, (&got, &want)) in out.map.depth().values().iter().zip(&expect).enumerate() {
            let err = (got as f64 - (want as f32) as f64).abs();
            worst = worst.max(err);
            ensure!(err <= 1e-6, "case {case}, pixel {i}: got {got}, oracle {want}");
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!("200 instances, max |diff| {worst:.2e}"))
}

// --- criteria 2-4 -------------------------------------------------------------

const SCALES: [f64; 3] = [0.5, 1.0, 3.0];
const SHIFTS: [f64; 3] = [-0.5, 0.0, 2.0];

/// 50 scenes (64 rows x 80 columns) with their three priors.
fn recovery_suite() -> Vec<(DepthMap, Vec<(&'static str, DepthMap)>)> {
    (0..50u64)
        .map(|i| {
            let kind = SceneKind::ALL[i as usize % 4];
            let gt = generate_scene(&SceneSpec::new(
                kind,
                80,
                64,
                (1.0, 10.0),
                derive_seed(2, &format!("scene/{i}")),
            ))
            .unwrap();
            let seed = |name: &str| derive_seed(2, &format!("prior/{name}/scene/{i}"));
            let priors = vec![
                ("sparse_random(100)", sample_sparse_random(&gt, 100, seed("S")).unwrap()),
                ("low_res(8)", downsample_prior(&gt, 8).unwrap()),
                ("square_mask(32)", mask_square(&gt, 32, None, seed("M")).unwrap()),
            ];
            (gt, priors)
        })
        .collect()
}

fn criterion_2() -> Outcome {
    let cfg = FillConfig::default();
    let mut worst = 0.0f64;
    let mut runs = 0;
    for (s, (gt, priors)) in recovery_suite().iter().enumerate() {
        for a in SCALES {
            for b in SHIFTS {
                let pred = derive_prediction(gt, &PredictionSpec::affine(a, b)).unwrap();
                for (name, prior) in priors {
                    let out = prefill(prior, &pred, &cfg).unwrap().map;
                    let holes = prior.mask().not();
                    let e = absrel(&out, gt, Some(&holes)).unwrap();
                    worst = worst.max(e);
                    runs += 1;
                    ensure!(e <= 1e-3, "scene {s}, a={a}, b={b}, {name}: AbsRel {e:.3e}");
                }
            }
        }
    }
    Ok(format!("{runs} runs, worst hole AbsRel(x100) {worst:.2e}"))
}

fn criterion_3() -> Outcome {
    let cfg = FillConfig::default();
    let mut worst = 0.0f64;
    let mut runs = 0;
    for (s, (gt, priors)) in recovery_suite().iter().enumerate() {
        for a in SCALES {
            for b in SHIFTS {
                let pred = derive_prediction(gt, &PredictionSpec::affine(a, b)).unwrap();
                for (name, prior) in priors {
                    let base = prefill(prior, &pred, &cfg).unwrap().map;
                    for alpha in [0.1, 10.0] {
                        for beta in [-1.0, 5.0] {
                            let moved = prefill(prior, &pred.affine(alpha, beta).unwrap(), &cfg).unwrap().map;
                            runs += 1;
                            for (&x, &y) in base.depth().values().iter().zip(moved.depth().values()) {
                                let rel = ((x - y) as f64).abs() / x as f64;
                                worst = worst.max(rel);
                                ensure!(
                                    rel <= 1e-4,
                                    "scene {s}, a={a}, b={b}, {name}, alpha={alpha}, beta={beta}: {x} vs {y}"
                                );
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(format!("{runs} transformed runs, worst relative change {worst:.2e}"))
}

fn criterion_4() -> Outcome {
    // Criterion 1 already checks its own instances; cover the scene suite with
    // every method that promises inheritance, both weightings and all k.
    let mut checked = 0;
    for (s, (gt, priors)) in recovery_suite().iter().enumerate() {
        for (a, b) in [(0.5, 2.0), (3.0, -0.5)] {
            let pred = derive_prediction(gt, &PredictionSpec::affine(a, b)).unwrap();
            for alpha_beta in [None, Some((0.1, 5.0)), Some((10.0, -1.0))] {
                let pred = match alpha_beta {
                    Some((al, be)) => pred.affine(al, be).unwrap(),
                    None => pred.clone(),
                };
                for (name, prior) in priors {
                    for k in [1, 5, 20] {
                        for weighting in [Weighting::Uniform, Weighting::InverseDistance] {
                            let cfg = FillConfig::default().with_k(k).with_weighting(weighting);
                            let out = prefill(prior, &pred, &cfg).unwrap().map;
                            ensure!(inherits(&out, prior), "scene {s}, {name}, k={k}: prior pixel changed");
                            ensure!(out.is_fully_valid(), "scene {s}, {name}: output not dense");
                            checked += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(format!("{checked} outputs bitwise equal to the prior on its valid set"))
}

// --- criteria 5-6 -------------------------------------------------------------

struct TrendCase {
    gt: DepthMap,
    pred: RelativePrediction,
    prior: DepthMap,
}

fn trend_suite() -> Vec<TrendCase> {
    (0..20u64)
        .map(|i| {
            let spec = SceneSpec::new(
                SceneKind::Fractal,
                160,
                128,
                (1.0, 10.0),
                derive_seed(5, &format!("scene/{i}")),
            );
            let gt = generate_scene(&spec).unwrap();
            let pspec = PredictionSpec::default().with_distortion(Distortion::Gamma { gamma: 1.3 });
            let pred = derive_prediction(&gt, &pspec).unwrap();
            let prior = sample_sparse_random(&gt, 100, derive_seed(5, &format!("prior/S/scene/{i}"))).unwrap();
            TrendCase { gt, pred, prior }
        })
        .collect()
}

fn hole_absrel(out: &DepthMap, c: &TrendCase) -> f64 {
    absrel(out, &c.gt, Some(&c.prior.mask().not())).unwrap()
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let suite = trend_suite();
    let (mut idw, mut uni, mut interp, mut wins) = (0.0, 0.0, 0.0, 0);
    for c in &suite {
        let cfg = FillConfig::default();
        let e_idw = hole_absrel(&prefill(&c.prior, &c.pred, &cfg).unwrap().map, c);
        let e_uni = hole_absrel(
            &prefill(&c.prior, &c.pred, &cfg.with_weighting(Weighting::Uniform))
                .unwrap()
                .map,
            c,
        );
        let e_int = hole_absrel(&prefill_interpolation(&c.prior, cfg.k).unwrap().map, c);
        idw += e_idw / 20.0;
        uni += e_uni / 20.0;
        interp += e_int / 20.0;
        wins += usize::from(e_idw < e_int);
    }
    let elapsed = start.elapsed();
    let detail = format!(
        "mean AbsRel(x100) inverse_distance {idw:.3} < uniform {uni:.3} <= interpolation {interp:.3}; wins {wins}/20"
    );
    ensure!(idw < uni && uni <= interp, "{detail}");
    ensure!(wins >= 18, "{detail}");
    ensure!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    Ok(detail)
}

fn criterion_6() -> Outcome {
    let suite = trend_suite();
    let mut means = Vec::new();
    for k in [3, 5, 10, 20] {
        let cfg = FillConfig::default().with_k(k);
        let mut mean = 0.0;
        for c in &suite {
            let out = prefill(&c.prior, &c.pred, &cfg).unwrap().map;
            ensure!(
                out.depth().values().iter().all(|v| v.is_finite()),
                "k={k}: non-finite output"
            );
            mean += hole_absrel(&out, c) / suite.len() as f64;
        }
        means.push((k, mean));
    }
    let max = means.iter().map(|m| m.1).fold(f64::MIN, f64::max);
    let min = means.iter().map(|m| m.1).fold(f64::MAX, f64::min);
    let detail = means
        .iter()
        .map(|(k, m)| format!("k={k}: {m:.3}"))
        .collect::<Vec<_>>()
        .join(", ");
    ensure!(max / min <= 2.0, "ratio {:.3}; {detail}", max / min);
    Ok(format!("max/min {:.3}; {detail}", max / min))
}

// --- criterion 7 --------------------------------------------------------------

fn criterion_7() -> Outcome {
    let gt = generate_scene(&SceneSpec::new(SceneKind::Spheres, 40, 30, (0.5, 8.0), 77)).unwrap();
    let same = evaluate(&gt, &gt, None, 1.0).unwrap();
    ensure!(
        same.absrel == 0.0 && same.rmse == 0.0 && same.silog == 0.0,
        "identical maps gave {same:?}"
    );

    // Scale invariance on exact f64 pairs, and against the textbook formula.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let pairs: Vec<(f64, f64)> = (0..500)
            .map(|_| (rng.random_range(0.1..50.0), rng.random_range(0.1..50.0)))
            .collect();
        let base = silog_pairs(&pairs, 1.0).unwrap();
        ensure!(
            (base - oracle::silog(&pairs, 1.0)).abs() < 1e-9,
            "silog disagrees with its definition"
        );
        ensure!(
            (absrel_pairs(&pairs).unwrap() - oracle::absrel(&pairs)).abs() < 1e-9,
            "absrel disagrees with its definition"
        );
        for c in [0.1, 1.0, 7.0] {
            let scaled: Vec<(f64, f64)> = pairs.iter().map(|&(p, g)| (c * p, g)).collect();
            let d = (silog_pairs(&scaled, 1.0).unwrap() - base).abs();
            worst = worst.max(d);
            ensure!(d <= 1e-9, "silog changed by {d:e} under scale {c}");
        }
    }

    // Worked examples.
    let row =
        |v: &[f64]| DepthMap::dense(Grid::new(v.len(), 1, v.iter().map(|&x| x as f32).collect()).unwrap()).unwrap();
    let a = absrel(&row(&[1.0, 3.0]), &row(&[2.0, 2.0]), None).unwrap();
    ensure!(a == 50.0, "AbsRel example gave {a}");
    let s = silog_pairs(&[(1.0, 1.0), (std::f64::consts::E, 1.0)], 1.0).unwrap();
    ensure!(s == 0.5, "SIlog example gave {s}");
    let s32 = silog(&row(&[1.0, std::f64::consts::E]), &row(&[1.0, 1.0]), None, 1.0).unwrap();
    ensure!((s32 - 0.5).abs() < 1e-7, "SIlog example on f32 maps gave {s32}");
    let r = rmse(&row(&[1.0, 3.0]), &row(&[2.0, 2.0]), None).unwrap();
    ensure!(r == 1.0, "RMSE example gave {r}");
    Ok(format!("identities exact; worst silog scale drift {worst:.1e}"))
}

// --- criterion 8 --------------------------------------------------------------

const BENCH_CONFIG: &str = r#"
version = 1
seed = 2024
methods = ["prefill", "prefill_uniform", "interpolation", "global_align"]

[scene]
kind = "spheres"
width = 96
height = 72
depth_range = [0.5, 12.0]
count = 6
prediction = { affine = [0.7, 0.3], distortion = { type = "smooth_noise", amplitude = 0.05 } }

[[priors]]
name = "S"
patterns = [{ type = "sparse_random", n = 100 }]

[[priors]]
name = "L"
patterns = [{ type = "low_res", factor = 8 }]

[[priors]]
name = "M"
patterns = [{ type = "square_mask", side_px = 32 }]

[[priors]]
name = "S+M"
patterns = [{ type = "sparse_random", n = 100 }, { type = "square_mask", side_px = 32 }]
noise = { outlier_fraction = 0.02 }

[[priors]]
name = "L+M"
patterns = [{ type = "low_res", factor = 8 }, { type = "square_mask", side_px = 32 }]

[[priors]]
name = "S+L"
patterns = [{ type = "low_res", factor = 4 }, { type = "sparse_random", n = 100 }]
noise = {}

[metrics]
regions = "holes"
"#;

fn run_bench(dir: &std::path::Path, threads: usize, tag: &str) -> Result<Vec<u8>, String> {
    let out = dir.join(format!("out-{tag}"));
    let status = Command::new(env!("CARGO_BIN_EXE_priorfill"))
        .args(["bench", "--config"])
        .arg(dir.join("bench.toml"))
        .arg("--out")
        .arg(&out)
        .args(["--threads", &threads.to_string()])
        .status()
        .map_err(|e| e.to_string())?;
    ensure!(status.success(), "bench exited with {status}");
    std::fs::read(out.join("report.json")).map_err(|e| e.to_string())
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    std::fs::write(dir.path().join("bench.toml"), BENCH_CONFIG).map_err(|e| e.to_string())?;
    let one = run_bench(dir.path(), 1, "a")?;
    let eight = run_bench(dir.path(), 8, "b")?;
    let again = run_bench(dir.path(), 8, "c")?;
    ensure!(one == eight, "--threads 1 and --threads 8 reports differ");
    ensure!(eight == again, "repeated --threads 8 reports differ");
    let doc: serde_json::Value = serde_json::from_slice(&one).map_err(|e| e.to_string())?;
    let cells = doc["results"].as_array().map_or(0, Vec::len);
    ensure!(cells == 24, "expected 24 cells, got {cells}");
    Ok(format!("3 runs byte-identical ({} bytes, {cells} cells)", one.len()))
}

// --- criterion 9 --------------------------------------------------------------

fn criterion_9() -> Outcome {
    let gt = generate_scene(&SceneSpec::new(SceneKind::Fractal, 640, 480, (1.0, 20.0), 9)).unwrap();
    let pred = derive_prediction(&gt, &PredictionSpec::affine(0.4, 1.0)).unwrap();
    let cfg = FillConfig::default();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let time = |n: usize| -> Duration {
        let prior = sample_sparse_random(&gt, n, 99).unwrap();
        pool.install(|| {
            (0..3)
                .map(|_| {
                    let start = Instant::now();
                    let index = build_index(&prior).unwrap();
                    let out = prefill_with_index(&prior, &pred, &index, &cfg).unwrap();
                    let t = start.elapsed();
                    assert!(out.map.is_fully_valid());
                    t
                })
                .min()
                .unwrap()
        })
    };
    let t2000 = time(2000);
    let t4000 = time(4000);
    let ratio = t4000.as_secs_f64() / t2000.as_secs_f64();
    let detail = format!("N=2000: {t2000:.2?}, N=4000: {t4000:.2?}, ratio {ratio:.2}");
    ensure!(t2000 < Duration::from_secs(2), "{detail}");
    ensure!(ratio < 2.5, "{detail}");
    Ok(detail)
}

// --- criterion 10 -------------------------------------------------------------

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for case in 0..100 {
        let (w, h) = (rng.random_range(1..=48usize), rng.random_range(1..=48usize));
        let values: Vec<f32> = (0..w * h)
            .map(|_| loop {
                let v = f32::from_bits(rng.random());
                if v.is_finite() {
                    break v;
                }
            })
            .collect();
        let grid = Grid::new(w, h, values).unwrap();
        let back = read_pfm(&write_pfm(&grid)).map_err(|e| format!("case {case}: {e}"))?;
        ensure!(back.dims() == grid.dims(), "case {case}: dims changed");
        ensure!(
            back.values()
                .iter()
                .zip(grid.values())
                .all(|(a, b)| a.to_bits() == b.to_bits()),
            "case {case}: PFM not bitwise lossless"
        );
    }
    let mut worst = 0.0f64;
    for case in 0..100 {
        let (w, h) = (rng.random_range(1..=48usize), rng.random_range(1..=48usize));
        let scale = [0.1, 0.25, 1.0, 2.0, 5.0][case % 5];
        let max_m = 65535.0 * scale / 1000.0;
        let depth: Vec<f32> = (0..w * h)
            .map(|_| rng.random_range(scale / 1000.0..max_m) as f32)
            .collect();
        let bits: Vec<bool> = (0..w * h).map(|_| rng.random_bool(0.8)).collect();
        let map = DepthMap::new(Grid::new(w, h, depth).unwrap(), ValidityMask::new(w, h, bits).unwrap()).unwrap();
        let png = write_depth_png16(&map, scale).unwrap();
        ensure!(png.clamped == 0, "case {case}: unexpected clamping");
        let back = read_depth_png16(&png.bytes, scale).map_err(|e| format!("case {case}: {e}"))?;
        ensure!(back.mask() == map.mask(), "case {case}: validity changed");
        for i in map.mask().indices() {
            let err = (back.depth().at(i) as f64 - map.depth().at(i) as f64).abs();
            worst = worst.max(err / scale);
            // Quantization bound plus the f32 storage of the decoded value.
            let bound = scale / 2000.0 + f32::EPSILON as f64 * max_m;
            ensure!(err <= bound, "case {case}, pixel {i}: error {err} > {bound}");
        }
    }
    Ok(format!(
        "100 PFM grids bitwise; 100 PNG16 maps, worst error {worst:.2e} x scale"
    ))
}
