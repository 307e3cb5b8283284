//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails or overruns its time budget.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use floodline::ensemble::cv::kfold_partition;
use floodline::ensemble::metrics::{metrics, rmse};
use floodline::ensemble::model::boosting_history;
use floodline::ensemble::{
    kfold_cv, Dataset, EnsembleModel, Hyperparams, MaxFeatures, ModelReport, OutlierConfig, SeedPath, WorkflowMode,
};
use floodline::geo::{bearing, pitch_angle, GeoPoint};
use floodline::pipeline::synth::{generate, RunKnobs, SynthAoi, SynthConfig, Target};
use floodline::pipeline::{run_all, RunConfig};
use floodline::raster::{parse_grid, RasterGrid};
use floodline::risk::ddf;
use floodline::Error;
use rand::RngExt;
use rand::SeedableRng;
use rand_pcg::Pcg64;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err(format!($($arg)+));
        }
    };
}

/// Damage control points in feet and fraction of value, as published.
const TABLE: [(f64, f64); 13] = [
    (-2.0, 0.000),
    (-1.0, 0.025),
    (0.0, 0.134),
    (1.0, 0.233),
    (2.0, 0.321),
    (3.0, 0.401),
    (4.0, 0.471),
    (5.0, 0.532),
    (6.0, 0.586),
    (7.0, 0.637),
    (8.0, 0.672),
    (12.0, 0.772),
    (16.0, 0.807),
];

fn oracle_ddf(fdis_m: f64) -> f64 {
    let ft = fdis_m / 0.3048;
    if ft <= -2.0 {
        return 0.0;
    }
    if ft >= 16.0 {
        return 0.807;
    }
    let k = TABLE.iter().rposition(|p| p.0 <= ft).unwrap();
    let (x0, y0) = TABLE[k];
    let (x1, y1) = TABLE[k + 1];
    y0 + (ft - x0) / (x1 - x0) * (y1 - y0)
}

struct Shared {
    root: tempfile::TempDir,
    determinism_out: Option<PathBuf>,
    tuning_out: Option<PathBuf>,
}

fn read_csv(path: &Path) -> Result<Vec<HashMap<String, String>>, String> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let headers = rdr.headers().map_err(|e| e.to_string())?.clone();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| format!("{}: {e}", path.display()))?;
        out.push(headers.iter().zip(rec.iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect());
    }
    Ok(out)
}

fn num(row: &HashMap<String, String>, key: &str) -> Result<f64, String> {
    let s = row.get(key).ok_or_else(|| format!("missing column {key}"))?;
    s.parse::<f64>().map_err(|_| format!("column {key}: not a number: {s:?}"))
}

fn opt_num(row: &HashMap<String, String>, key: &str) -> Result<Option<f64>, String> {
    match row.get(key).map(String::as_str) {
        None => Err(format!("missing column {key}")),
        Some("") => Ok(None),
        Some(_) => num(row, key).map(Some),
    }
}

fn make_fixture(dir: &Path, seed: u64, run: RunKnobs, aoi: Vec<SynthAoi>) -> Result<PathBuf, String> {
    let cfg = SynthConfig {
        seed,
        output_dir: "fixture".into(),
        run,
        aoi,
    };
    generate(&cfg, dir).map(|o| o.config_path).map_err(|e| e.to_string())
}

fn run_pipeline(config: &Path) -> Result<PathBuf, String> {
    let cfg = RunConfig::load(config).map_err(|e| e.to_string())?;
    run_all(&cfg, &[]).map_err(|e| e.to_string())?;
    Ok(cfg.output_dir.clone())
}

fn c1(_: &mut Shared) -> Outcome {
    let mut worst = 0.0f64;
    for (ft, frac) in TABLE {
        let got = ddf(ft * 0.3048);
        worst = worst.max((got - frac).abs());
    }
    ensure!(worst <= 1e-12, "worst control-point error {worst:e}");
    let mid = ddf(0.4572);
    ensure!(mid == 0.277, "ddf(0.4572) = {mid:?}");
    Ok(format!("13 control points, max error {worst:e}; ddf(0.4572) = {mid}"))
}

fn c2(_: &mut Shared) -> Outcome {
    ensure!(ddf(-0.70) == 0.0, "ddf(-0.70) = {}", ddf(-0.70));
    ensure!(ddf(5.5) == 0.807, "ddf(5.5) = {}", ddf(5.5));
    let mut rng = Pcg64::seed_from_u64(2);
    for _ in 0..10_000 {
        let below = -0.6096 - rng.random_range(0.0f64..100.0);
        ensure!(ddf(below) == 0.0, "ddf({below}) = {}", ddf(below));
        let above = 4.8768 + rng.random_range(0.0f64..100.0);
        ensure!(ddf(above) == 0.807, "ddf({above}) = {}", ddf(above));
        let inside = rng.random_range(-0.6096f64..4.8768);
        let (a, b) = (ddf(inside), oracle_ddf(inside));
        ensure!((a - b).abs() <= 1e-12, "ddf({inside}) = {a}, oracle {b}");
    }
    Ok("floor, cap and 10000 interior interpolations".into())
}

fn oracle_bearing(a: GeoPoint, b: GeoPoint) -> f64 {
    let (p1, l1) = (a.lat.to_radians(), a.lon.to_radians());
    let (p2, l2) = (b.lat.to_radians(), b.lon.to_radians());
    let v = [p2.cos() * l2.cos(), p2.cos() * l2.sin(), p2.sin()];
    let east = [-l1.sin(), l1.cos(), 0.0];
    let north = [-p1.sin() * l1.cos(), -p1.sin() * l1.sin(), p1.cos()];
    let dot = |u: [f64; 3], w: [f64; 3]| u[0] * w[0] + u[1] * w[1] + u[2] * w[2];
    dot(v, east).atan2(dot(v, north)).to_degrees().rem_euclid(360.0)
}

fn c3(_: &mut Shared) -> Outcome {
    let mut rng = Pcg64::seed_from_u64(3);
    let point = |rng: &mut Pcg64| {
        let lat = rng.random_range(-1.0f64..1.0).asin().to_degrees();
        let lon = rng.random_range(-180.0f64..180.0);
        GeoPoint::new(lat, lon).unwrap()
    };
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let (a, b) = (point(&mut rng), point(&mut rng));
        let got = bearing(a, b);
        ensure!((0.0..360.0).contains(&got), "bearing out of range: {got}");
        let d = (got - oracle_bearing(a, b) + 180.0).rem_euclid(360.0) - 180.0;
        worst = worst.max(d.abs());
    }
    ensure!(worst <= 1e-9, "worst bearing disagreement {worst:e} deg");
    for h in [2u32, 512, 8192, 16384] {
        let f = f64::from(h);
        ensure!(pitch_angle(f / 2.0, h) == 0.0, "horizon pitch for H={h}");
        ensure!(pitch_angle(0.0, h) == 90.0, "top pitch for H={h}");
        ensure!(pitch_angle(f, h) == -90.0, "bottom pitch for H={h}");
    }
    Ok(format!("10000 pairs, max disagreement {worst:e} deg"))
}

/// Independent ESRI grid reader for the oracle: header map plus row-major values.
fn oracle_grid(path: &Path) -> (HashMap<String, f64>, Vec<f64>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut header = HashMap::new();
    let mut values = Vec::new();
    for line in text.lines() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() == 2 && toks[0].parse::<f64>().is_err() {
            header.insert(toks[0].to_lowercase(), toks[1].parse::<f64>().unwrap());
        } else {
            values.extend(toks.iter().map(|t| t.parse::<f64>().unwrap()));
        }
    }
    (header, values)
}

fn oracle_flood_m(grid: &(HashMap<String, f64>, Vec<f64>), lat: f64, lon: f64) -> f64 {
    let (h, v) = grid;
    let (nc, nr) = (h["ncols"] as i64, h["nrows"] as i64);
    let (x0, y0, cs, nd) = (h["xllcorner"], h["yllcorner"], h["cellsize"], h["nodata_value"]);
    let col = ((lon - x0) / cs).floor() as i64;
    let row = nr - 1 - ((lat - y0) / cs).floor() as i64;
    let mut cand = Vec::new();
    for r in row - 1..=row + 1 {
        for c in col - 1..=col + 1 {
            if r < 0 || c < 0 || r >= nr || c >= nc {
                continue;
            }
            let val = v[(r * nc + c) as usize];
            if val == nd {
                continue;
            }
            let cx = x0 + (c as f64 + 0.5) * cs;
            let cy = y0 + ((nr - 1 - r) as f64 + 0.5) * cs;
            cand.push((((cx - lon).powi(2) + (cy - lat).powi(2)).sqrt(), val));
        }
    }
    cand.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let used = &cand[..cand.len().min(6)];
    used.iter().map(|c| c.1).sum::<f64>() / used.len() as f64 * 0.3048
}

fn c4(sh: &mut Shared) -> Outcome {
    let dir = sh.root.path().join("recovery");
    let aoi = SynthAoi::new("rec", 500);
    let config = make_fixture(&dir, 41, RunKnobs::default(), vec![aoi])?;
    let out = run_pipeline(&config)?;
    let fixture = config.parent().unwrap();

    let truth: HashMap<String, HashMap<String, String>> = read_csv(&fixture.join("rec/ground_truth.csv"))?
        .into_iter()
        .map(|r| (r["parcel_id"].clone(), r))
        .collect();
    let estimates = read_csv(&out.join("rec/estimates.csv"))?;
    ensure!(estimates.len() == 500, "{} estimate rows", estimates.len());
    let mut worst = 0.0f64;
    for e in &estimates {
        let id = &e["parcel_id"];
        ensure!(e["screen_status"] == "accepted", "{id}: status {}", e["screen_status"]);
        let got = opt_num(e, "hdsl_m")?.ok_or_else(|| format!("{id}: no HDSL"))?;
        let want = num(&truth[id], "hdsl_generated_m")?;
        worst = worst.max((got - want).abs());
    }
    ensure!(worst <= 1e-6, "worst HDSL error {worst:e} m");

    let parcels: HashMap<String, HashMap<String, String>> = read_csv(&fixture.join("rec/parcels.csv"))?
        .into_iter()
        .map(|r| (r["parcel_id"].clone(), r))
        .collect();
    let grid = oracle_grid(&fixture.join("rec/fathom_100yr.asc"));
    let assessment = read_csv(&out.join("rec/assessment.csv"))?;
    let flooded: Vec<_> = assessment.iter().filter(|r| r["category"] == "flooded").collect();
    let dry: Vec<_> = assessment.iter().filter(|r| r["category"] == "clearance").collect();
    ensure!(!flooded.is_empty() && !dry.is_empty(), "{} flooded, {} clearance", flooded.len(), dry.len());
    let n_flooded = flooded.len().min(5).max(10usize.saturating_sub(dry.len()));
    let pick = |rows: &[&HashMap<String, String>], n: usize| -> Vec<HashMap<String, String>> {
        (0..n).map(|i| rows[i * rows.len() / n].clone()).collect()
    };
    let mut spots = pick(&flooded, n_flooded);
    spots.extend(pick(&dry, 10 - n_flooded));
    ensure!(spots.len() == 10, "only {} spot parcels", spots.len());
    for s in &spots {
        let id = &s["parcel_id"];
        let p = &parcels[id];
        let t = &truth[id];
        let f = oracle_flood_m(&grid, num(p, "lat")?, num(p, "lon")?);
        let fdis = f - (num(t, "street_elev_m")? + num(t, "hdsl_m")?);
        let value = num(p, "assessed_value_usd")?;
        let loss = if fdis > 0.0 { value * oracle_ddf(fdis) } else { 0.0 };
        let (got_fdis, got_loss) = (num(s, "fdis_m")?, num(s, "loss_usd")?);
        ensure!((got_fdis - fdis).abs() <= 1e-9, "{id}: fdis {got_fdis} vs oracle {fdis}");
        ensure!((got_loss - loss).abs() <= 1e-9 * value, "{id}: loss {got_loss} vs oracle {loss}");
        let want_cat = if fdis > 0.0 { "flooded" } else { "clearance" };
        ensure!(s["category"] == want_cat, "{id}: category {} vs {want_cat}", s["category"]);
    }
    Ok(format!("500 parcels, max HDSL error {worst:.2e} m; {n_flooded} flooded + {} dry spot parcels match", 10 - n_flooded))
}

fn c5(sh: &mut Shared) -> Outcome {
    let dir = sh.root.path().join("tuning");
    let mut aoi = SynthAoi::new("tun", 1000);
    aoi.imagery_coverage = 0.5;
    aoi.workflow = "tuning_extended".into();
    let run = RunKnobs {
        n_iter: Some(30),
        ..RunKnobs::default()
    };
    let config = make_fixture(&dir, 52, run, vec![aoi])?;
    let out = run_pipeline(&config)?;
    sh.tuning_out = Some(out.clone());
    let fixture = config.parent().unwrap();

    let report = read_csv(&out.join("tun/model_report.csv"))?;
    ensure!(report.len() == 12, "{} candidate rows, expected 6 outlier configs x 2 algorithms", report.len());
    let selected: Vec<_> = report.iter().filter(|r| r["selected"] == "true").collect();
    ensure!(selected.len() == 1, "{} selected rows", selected.len());
    let r2_cv = num(selected[0], "r2_cv")?;
    ensure!(r2_cv >= 0.99, "selected R2_CV {r2_cv}");
    ensure!(selected[0]["gate_passed"] == "true", "gate not passed");

    let truth: HashMap<String, f64> = read_csv(&fixture.join("tun/ground_truth.csv"))?
        .iter()
        .filter(|r| r["has_imagery"] == "false")
        .map(|r| Ok((r["parcel_id"].clone(), num(r, "hdsl_generated_m")?)))
        .collect::<Result<_, String>>()?;
    let merged = read_csv(&out.join("tun/merged_hdsl.csv"))?;
    let (mut pred, mut obs) = (Vec::new(), Vec::new());
    for r in merged.iter().filter(|r| r["hdsl_source"] == "imputed") {
        let want = truth.get(&r["parcel_id"]).ok_or_else(|| format!("{} imputed but has imagery", r["parcel_id"]))?;
        pred.push(num(r, "hdsl_m")?);
        obs.push(*want);
    }
    ensure!(pred.len() * 10 >= truth.len() * 9, "only {} of {} held-back parcels imputed", pred.len(), truth.len());
    let e = rmse(&pred, &obs);
    ensure!(e <= 0.05, "imputed RMSE {e} m");
    Ok(format!(
        "selected {} / {}: R2_CV {r2_cv:.4}; {} imputed, RMSE {e:.4} m",
        selected[0]["model"],
        selected[0]["outlier_config"],
        pred.len()
    ))
}

fn c6(sh: &mut Shared) -> Outcome {
    let dir = sh.root.path().join("noise");
    let mut aoi = SynthAoi::new("noise", 300);
    aoi.imagery_coverage = 0.7;
    aoi.target = Target::Noise;
    aoi.workflow = "tuning_extended".into();
    let run = RunKnobs {
        n_iter: Some(30),
        ..RunKnobs::default()
    };
    let config = make_fixture(&dir, 63, run, vec![aoi])?;
    let out = run_pipeline(&config)?;
    let report = read_csv(&out.join("noise/model_report.csv"))?;
    ensure!(!report.is_empty(), "no candidate rows");
    let mut best = f64::NEG_INFINITY;
    for r in &report {
        if let Some(v) = opt_num(r, "r2_cv")? {
            best = best.max(v);
        }
        ensure!(r["gate_passed"] == "false", "gate passed on a noise target");
    }
    ensure!(best < 0.15, "best R2_CV {best}");
    let imputed = read_csv(&out.join("noise/merged_hdsl.csv"))?
        .iter()
        .filter(|r| r["hdsl_source"] == "imputed")
        .count();
    ensure!(imputed == 0, "{imputed} imputed rows");
    ensure!(!out.join("noise/model.json").exists(), "model.json written for a gated AOI");
    let summary = read_csv(&out.join("noise/impute_summary.csv"))?;
    ensure!(summary.len() == 1 && summary[0]["n_imputed"] == "0", "impute summary reports imputed rows");
    Ok(format!("best R2_CV {best:.4}, 0 imputed, gate_passed = false on {} rows", report.len()))
}

fn random_dataset(rng: &mut Pcg64) -> Dataset {
    let n = rng.random_range(5..80usize);
    let p = rng.random_range(1..6usize);
    let features: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..p)
                .map(|_| if rng.random_range(0..4) == 0 { rng.random_range(0..3) as f64 } else { rng.random_range(-5.0f64..5.0) })
                .collect()
        })
        .collect();
    let targets = features
        .iter()
        .map(|x| x[0].sin() * 3.0 + x.iter().sum::<f64>() * 0.2 + rng.random_range(-1.0f64..1.0))
        .collect();
    Dataset::new(features, targets).unwrap()
}

fn c7(_: &mut Shared) -> Outcome {
    let mut rng = Pcg64::seed_from_u64(7);
    let mut rounds = 0usize;
    for d in 0..100u64 {
        let data = random_dataset(&mut rng);
        for eta in [0.05, 0.1, 0.3] {
            let depth = rng.random_range(1..5usize);
            let leaf = rng.random_range(1..4usize);
            let h = Hyperparams::gradient_boost(60, eta, Some(depth), leaf);
            let hist = boosting_history(&data, &h, SeedPath::new(d));
            for w in hist.windows(2) {
                ensure!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "dataset {d}, eta {eta}: RMSE rose {} -> {}", w[0], w[1]);
            }
            rounds += hist.len();
        }
    }

    let mut queries = 0usize;
    for f in 0..10u64 {
        let data = random_dataset(&mut rng);
        let p = data.n_features();
        let mf = if rng.random_range(0..2) == 0 { MaxFeatures::All } else { MaxFeatures::Count(rng.random_range(1..=p)) };
        let h = Hyperparams::random_forest(rng.random_range(1..40usize), None, rng.random_range(1..4usize), mf);
        let model = EnsembleModel::fit(&data, &h, OutlierConfig::None, SeedPath::new(100 + f)).map_err(|e| e.to_string())?;
        for _ in 0..1000 {
            let x: Vec<f64> = (0..p).map(|_| rng.random_range(-8.0f64..8.0)).collect();
            let trees = model.tree_predictions(&x);
            let lo = trees.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = trees.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let y = model.predict(&x);
            ensure!(lo <= y && y <= hi, "forest {f}: prediction {y} outside [{lo}, {hi}]");
            queries += 1;
        }
    }

    let mut partitions = 0usize;
    for s in 0..300u64 {
        let n = rng.random_range(2..400usize);
        let k = rng.random_range(2..=n.min(12));
        let folds = kfold_partition(n, k, SeedPath::new(s));
        ensure!(folds.len() == k, "n={n} k={k}: {} folds", folds.len());
        let mut seen = vec![0u32; n];
        for fold in &folds {
            for &i in fold {
                ensure!(i < n, "row {i} out of range");
                seen[i] += 1;
            }
        }
        ensure!(seen.iter().all(|&c| c == 1), "n={n} k={k}: rows not covered exactly once");
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        let spread = sizes.iter().max().unwrap() - sizes.iter().min().unwrap();
        ensure!(spread <= 1, "n={n} k={k}: fold sizes {sizes:?}");
        partitions += 1;
    }
    Ok(format!("{rounds} boosting rounds, {queries} forest queries, {partitions} partitions"))
}

fn copy_dir(from: &Path, to: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(to)?;
    for entry in std::fs::read_dir(from)? {
        let entry = entry?;
        let target = to.join(entry.file_name());
        if entry.file_type()?.is_dir() {
            copy_dir(&entry.path(), &target)?;
        } else {
            std::fs::copy(entry.path(), target)?;
        }
    }
    Ok(())
}

fn tree_files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn with_threads(config: &Path, threads: usize) -> std::io::Result<()> {
    let text = std::fs::read_to_string(config)?;
    std::fs::write(config, text.replacen("output_dir", &format!("threads = {threads}\noutput_dir"), 1))
}

fn c8(sh: &mut Shared) -> Outcome {
    let base = sh.root.path().join("determinism");
    let mut a = SynthAoi::new("d1", 160);
    a.imagery_coverage = 0.6;
    a.door_visibility = 0.8;
    a.noise_sigma = 0.05;
    a.outside_fraction = 0.15;
    let mut b = SynthAoi::new("d2", 140);
    b.imagery_coverage = 0.7;
    b.workflow = "tuning_extended".into();
    b.origin_lat = 29.9;
    let run = RunKnobs {
        n_iter: Some(4),
        ..RunKnobs::default()
    };
    let config = make_fixture(&base.join("src"), 88, run, vec![a, b])?;
    let fixture = config.parent().unwrap();

    let mut outs = Vec::new();
    let mut times = Vec::new();
    for (name, threads) in [("serial", 1), ("parallel", 4)] {
        let copy = base.join(name);
        copy_dir(fixture, &copy).map_err(|e| e.to_string())?;
        with_threads(&copy.join("config.toml"), threads).map_err(|e| e.to_string())?;
        let t = Instant::now();
        outs.push(run_pipeline(&copy.join("config.toml"))?);
        times.push(t.elapsed());
    }
    let (x, y) = (tree_files(&outs[0]), tree_files(&outs[1]));
    ensure!(x.len() > 10, "only {} output files", x.len());
    let names_x: BTreeSet<_> = x.keys().collect();
    let names_y: BTreeSet<_> = y.keys().collect();
    ensure!(names_x == names_y, "file sets differ: {:?}", names_x.symmetric_difference(&names_y).collect::<Vec<_>>());
    for (k, v) in &x {
        ensure!(y[k] == *v, "{} differs between runs", k.display());
    }
    ensure!(
        times[1] < times[0] * 2,
        "parallel run took {:.2}s against {:.2}s single-threaded",
        times[1].as_secs_f64(),
        times[0].as_secs_f64()
    );
    sh.determinism_out = Some(outs[0].clone());
    Ok(format!(
        "{} files identical; threads=1 {:.2}s, threads=4 {:.2}s",
        x.len(),
        times[0].as_secs_f64(),
        times[1].as_secs_f64()
    ))
}

const CATEGORIES: [&str; 4] = ["flooded", "clearance", "in_extent_no_lfe", "outside_extent"];

fn check_summary_file(path: &Path, prefix: &str, total_key: &str) -> Result<usize, String> {
    let rows = read_csv(path)?;
    let mut regional = None;
    let mut sums = [0.0f64; 5];
    for r in &rows {
        let total = num(r, total_key)?;
        let mut parts = 0.0;
        for c in CATEGORIES {
            parts += num(r, &format!("{prefix}n_{c}"))?;
        }
        ensure!(parts == total, "{}: {} categories sum to {parts}, total {total}", path.display(), r["aoi_id"]);
        if r["aoi_id"] == "REGIONAL" {
            regional = Some(r);
        } else {
            sums[0] += total;
            for (i, c) in CATEGORIES.iter().enumerate() {
                sums[i + 1] += num(r, &format!("{prefix}n_{c}"))?;
            }
        }
    }
    let reg = regional.ok_or_else(|| format!("{}: no REGIONAL row", path.display()))?;
    ensure!(num(reg, total_key)? == sums[0], "{}: regional total != sum of AOIs", path.display());
    for (i, c) in CATEGORIES.iter().enumerate() {
        ensure!(num(reg, &format!("{prefix}n_{c}"))? == sums[i + 1], "{}: regional {c} != sum", path.display());
    }
    Ok(rows.len())
}

fn c9(sh: &mut Shared) -> Outcome {
    let out = sh.determinism_out.clone().ok_or("determinism run unavailable")?;
    let summary = out.join("summary.csv");
    let mut rows = check_summary_file(&summary, "", "n_parcels")?;
    rows += check_summary_file(&out.join("risk_table.csv"), "", "n_parcels")?;

    let summary_rows = read_csv(&summary)?;
    let aoi_rows: Vec<_> = summary_rows.iter().filter(|r| r["aoi_id"] != "REGIONAL").collect();
    let reg = summary_rows.iter().find(|r| r["aoi_id"] == "REGIONAL").unwrap();
    for key in ["total_loss_usd", "value_at_risk_usd", "n_damaged"] {
        let s: f64 = aoi_rows.iter().map(|r| num(r, key)).sum::<Result<f64, _>>()?;
        let r = num(reg, key)?;
        ensure!((r - s).abs() <= 1e-9 * s.abs().max(1.0), "regional {key} {r} != AOI sum {s}");
    }

    let by_id: HashMap<&str, &HashMap<String, String>> = aoi_rows.iter().map(|r| (r["aoi_id"].as_str(), *r)).collect();
    let sens = read_csv(&out.join("sensitivity.csv"))?;
    ensure!(!sens.is_empty(), "empty sensitivity table");
    for s in &sens {
        let (e, c) = (num(s, "extracted_only_total_loss_usd")?, num(s, "combined_total_loss_usd")?);
        ensure!(c >= e, "{}: combined loss {c} < extracted-only {e}", s["aoi_id"]);
        let total = match by_id.get(s["aoi_id"].as_str()) {
            Some(r) => num(r, "n_parcels")?,
            None => num(reg, "n_parcels")?,
        };
        for p in ["extracted_only_", "combined_"] {
            let parts: f64 = CATEGORIES.iter().map(|c| num(s, &format!("{p}n_{c}"))).sum::<Result<f64, _>>()?;
            ensure!(parts == total, "{}: {p} categories sum to {parts}, total {total}", s["aoi_id"]);
        }
        rows += 1;
    }

    for r in &aoi_rows {
        let id = &r["aoi_id"];
        let fixture = out.parent().unwrap();
        let parcels: BTreeSet<String> =
            read_csv(&fixture.join(format!("{id}/parcels.csv")))?.into_iter().map(|p| p["parcel_id"].clone()).collect();
        let assessed = read_csv(&out.join(format!("{id}/assessment.csv")))?;
        let dropped = read_csv(&out.join(format!("{id}/assess_drops.csv")))?;
        let mut seen: Vec<String> = assessed.iter().chain(&dropped).map(|p| p["parcel_id"].clone()).collect();
        seen.sort();
        let n = seen.len();
        seen.dedup();
        ensure!(n == seen.len(), "{id}: parcel listed twice across assessment and drops");
        ensure!(seen.into_iter().collect::<BTreeSet<_>>() == parcels, "{id}: parcels missing from outputs");
        ensure!(num(r, "n_parcels")? == assessed.len() as f64, "{id}: summary count != assessment rows");
        for c in CATEGORIES {
            let counted = assessed.iter().filter(|a| a["category"] == c).count() as f64;
            ensure!(num(r, &format!("n_{c}"))? == counted, "{id}: {c} count mismatch");
        }
    }
    Ok(format!("{rows} summary rows checked, parcel ledger complete"))
}

fn random_grid(rng: &mut Pcg64) -> RasterGrid {
    let ncols = rng.random_range(1..15usize);
    let nrows = rng.random_range(1..15usize);
    let nodata = [-9999.0, -3.4028234663852886e38, 0.0, -1.0, 1e30][rng.random_range(0..5)];
    let mode = rng.random_range(0..4);
    let values = (0..ncols * nrows)
        .map(|i| match mode {
            0 if i % 3 == 0 => nodata,
            1 if rng.random_range(0..2) == 0 => nodata,
            2 => nodata,
            _ => match rng.random_range(0..4) {
                0 => rng.random_range(-1000i32..1000) as f64,
                1 => rng.random_range(-1.0f64..1.0) * 10f64.powi(rng.random_range(-12..12)),
                2 => -0.0,
                _ => rng.random_range(-50.0f64..150.0),
            },
        })
        .collect();
    RasterGrid::new(
        ncols,
        nrows,
        rng.random_range(-180.0f64..180.0),
        rng.random_range(-90.0f64..90.0),
        10f64.powi(rng.random_range(-5..3)) * rng.random_range(0.5f64..2.0),
        nodata,
        values,
    )
    .unwrap()
}

const MALFORMED: [(&str, &str, Option<usize>); 12] = [
    ("truncated data", "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n3\n", Some(7)),
    ("missing ncols", "nrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n3 4\n", Some(5)),
    ("non-numeric token", "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 x\n3 4\n", Some(6)),
    ("empty input", "", Some(1)),
    ("header only", "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n", None),
    ("unknown key", "ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\nbogus 1\n1\n", Some(5)),
    ("key without value", "ncols 1\nnrows\nxllcorner 0\nyllcorner 0\ncellsize 1\n1\n", Some(2)),
    ("extra cells", "ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n1\n2\n", Some(7)),
    ("negative cellsize", "ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize -1\n1\n", None),
    ("fractional ncols", "ncols 2.5\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n", None),
    ("duplicate key", "ncols 1\nncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n1\n", Some(2)),
    ("binary noise", "\u{1}\u{2}ncols\u{7f} ??\n\u{0}", Some(1)),
];

fn c10(_: &mut Shared) -> Outcome {
    let mut rng = Pcg64::seed_from_u64(10);
    for i in 0..100 {
        let g = random_grid(&mut rng);
        let text = g.to_ascii();
        let back = parse_grid(&text).map_err(|e| format!("grid {i}: {e}"))?;
        ensure!(back == g, "grid {i}: round trip changed the grid");
        ensure!(back.to_ascii() == text, "grid {i}: re-serialization differs");
    }
    for (name, text, want_line) in MALFORMED {
        let res = catch_unwind(|| parse_grid(text)).map_err(|_| format!("{name}: parser panicked"))?;
        match res {
            Err(Error::GridParse { line, .. }) => {
                ensure!(line > 0, "{name}: line 0");
                if let Some(w) = want_line {
                    ensure!(line == w, "{name}: reported line {line}, expected {w}");
                }
            }
            Err(e) => return Err(format!("{name}: wrong error kind: {e}")),
            Ok(_) => return Err(format!("{name}: accepted")),
        }
    }
    // every truncation of a valid grid is either a valid grid or a line-numbered error
    let text = random_grid(&mut rng).to_ascii();
    for cut in 0..text.len() {
        if !text.is_char_boundary(cut) {
            continue;
        }
        let res = catch_unwind(|| parse_grid(&text[..cut])).map_err(|_| format!("truncation at {cut} panicked"))?;
        if let Err(e) = res {
            ensure!(matches!(e, Error::GridParse { line, .. } if line > 0), "truncation at {cut}: {e}");
        }
    }
    Ok(format!("100 round trips, {} malformed inputs rejected", MALFORMED.len()))
}

fn c11(sh: &mut Shared) -> Outcome {
    let obs = [1.0, 2.0, 3.0, 4.0];
    let pred = [1.5, 2.0, 2.5, 4.0];
    let m = metrics(&pred, &obs);
    let want_rmse = (0.5f64 / 4.0).sqrt();
    ensure!((m.rmse - want_rmse).abs() <= 1e-15, "RMSE {}", m.rmse);
    ensure!((m.rmse_pct - want_rmse / 2.5 * 100.0).abs() <= 1e-12, "RMSE% {}", m.rmse_pct);
    ensure!(m.r2.is_some_and(|r| (r - 0.9).abs() <= 1e-15), "R2 {:?}", m.r2);

    // a depth-0 booster predicts the training mean, so each fold score has a closed form
    let ys = [1.0, 3.0, 4.0, 8.0];
    let data = Dataset::new(vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]], ys.to_vec()).unwrap();
    let h = Hyperparams::gradient_boost(3, 0.1, Some(0), 1);
    let split = SeedPath::new(11);
    let cv = kfold_cv(&data, 2, &h, OutlierConfig::None, split, SeedPath::new(12));
    let folds = kfold_partition(4, 2, split);
    let mut fold_scores = Vec::new();
    for val in &folds {
        let train: Vec<f64> = (0..4).filter(|i| !val.contains(i)).map(|i| ys[i]).collect();
        let mu = train.iter().sum::<f64>() / train.len() as f64;
        let v: Vec<f64> = val.iter().map(|&i| ys[i]).collect();
        let vm = v.iter().sum::<f64>() / v.len() as f64;
        let ss_res: f64 = v.iter().map(|y| (y - mu).powi(2)).sum();
        let ss_tot: f64 = v.iter().map(|y| (y - vm).powi(2)).sum();
        fold_scores.push(1.0 - ss_res / ss_tot);
    }
    let want_cv = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
    let got_cv = cv.r2_cv.ok_or("R2_CV undefined")?;
    ensure!((got_cv - want_cv).abs() <= 1e-9, "R2_CV {got_cv} vs {want_cv}");

    let mut rep = ModelReport {
        aoi_id: "t".into(),
        workflow: WorkflowMode::BatchStandard,
        algo: None,
        outlier_config: None,
        hyperparams: None,
        n_train: 4,
        rmse_m: None,
        rmse_pct: None,
        r2: None,
        r2_cv: None,
        gap: None,
        selected: false,
        gate_passed: false,
    };
    rep.set_scores(Some(m.rmse), Some(m.rmse_pct), m.r2, Some(got_cv));
    let gap = rep.gap.ok_or("gap undefined")?;
    ensure!((gap - (0.9 - want_cv)).abs() <= 1e-9, "gap {gap}");

    let mut outs: Vec<PathBuf> = Vec::new();
    outs.extend(sh.determinism_out.clone());
    outs.extend(sh.tuning_out.clone());
    ensure!(!outs.is_empty(), "no pipeline output to inspect");
    let mut checked = 0;
    for out in &outs {
        let mut files = vec![out.join("model_performance.csv")];
        for entry in std::fs::read_dir(out).map_err(|e| e.to_string())? {
            let p = entry.map_err(|e| e.to_string())?.path().join("model_report.csv");
            if p.exists() {
                files.push(p);
            }
        }
        for f in files {
            for r in read_csv(&f)? {
                match (opt_num(&r, "r2")?, opt_num(&r, "r2_cv")?, opt_num(&r, "gap")?) {
                    (Some(a), Some(b), Some(g)) => ensure!(g == a - b, "{}: gap {g} != {a} - {b}", f.display()),
                    (Some(_), Some(_), None) => return Err(format!("{}: gap missing", f.display())),
                    (_, _, g) => ensure!(g.is_none(), "{}: gap without both scores", f.display()),
                }
                checked += 1;
            }
        }
    }
    ensure!(checked > 0, "no exported model rows");
    Ok(format!("RMSE {:.6}, R2 0.9, R2_CV {got_cv:.4}; gap exact on {checked} exported rows", m.rmse))
}

type Criterion = (u32, &'static str, Duration, fn(&mut Shared) -> Outcome);

fn main() {
    let secs = Duration::from_secs;
    let criteria: [Criterion; 11] = [
        (1, "ddf control points", secs(1), c1),
        (2, "ddf floor and cap", secs(1), c2),
        (3, "geometry oracle", secs(5), c3),
        (4, "synthetic end-to-end recovery", secs(30), c4),
        (5, "imputation recovery", secs(300), c5),
        (6, "gating on noise", secs(120), c6),
        (7, "ensemble properties", secs(120), c7),
        (8, "determinism", secs(600), c8),
        (9, "bookkeeping identities", secs(10), c9),
        (10, "grid parser robustness", secs(10), c10),
        (11, "metric definitions", secs(1), c11),
    ];
    let only: Vec<u32> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect())
        .unwrap_or_default();
    std::panic::set_hook(Box::new(|_| {}));
    let mut shared = Shared {
        root: tempfile::tempdir().expect("temp dir"),
        determinism_out: None,
        tuning_out: None,
    };
    let mut failed = 0;
    for (n, name, budget, f) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(|| f(&mut shared))).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panic: {msg}"))
        });
        let dt = t.elapsed();
        let res = match res {
            Ok(d) if dt > budget => Err(format!("over budget: {d}")),
            other => other,
        };
        let (tag, detail) = match &res {
            Ok(d) => ("PASS", d.as_str()),
            Err(e) => ("FAIL", e.as_str()),
        };
        if res.is_err() {
            failed += 1;
        }
        println!(
            "criterion {n:>2} {name}: {tag} ({:.2}s of {}s) {detail}",
            dt.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
