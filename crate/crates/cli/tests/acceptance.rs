//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tower::ServiceExt;

use crimegwr::experiment::{evaluate_synthetic, generate_synthetic, BandwidthChoice, SplitSpec, SyntheticSpec};
use crimegwr::ingest::{
    build_model_rows, parse_crimes, parse_demographics, parse_weather, BuildOptions, ColumnConfig, GeoUnitTable,
    WeatherSeries,
};
use crimegwr::risk::{ModelBundle, RiskEngine, RiskQuery};
use crimegwr::stats::{hour_histogram, pearson, shift_change_correlation, temperature_histogram};
use crimegwr::{fit, fit_local, r_squared, select_bandwidth, GeoPoint, GwrDataset, GwrRow, KernelSpec};
use crimegwr_oracles::{
    brute_loo, gaussian_weight, gd_wls, haversine_km, histogram_direct, pearson_direct, qr_ols, r_squared_direct,
    rel_close,
};
use crimegwr_service::{router, AppState, RiskResponse};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed <= limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

struct Instance {
    data: GwrDataset,
    locs: Vec<(f64, f64)>,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
}

fn random_instance(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Instance {
    let beta: Vec<f64> = (0..p).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let (mut locs, mut x, mut y, mut rows) = (vec![], vec![], vec![], vec![]);
    for _ in 0..n {
        let loc = (rng.gen_range(-77.70..-77.50), rng.gen_range(43.10..43.26));
        let mut f = vec![1.0];
        f.extend((1..p).map(|_| rng.gen_range(-2.0..2.0)));
        let r = f.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + rng.gen_range(-0.5..0.5);
        rows.push(GwrRow::new(GeoPoint::new(loc.0, loc.1).unwrap(), f.clone(), r));
        locs.push(loc);
        x.push(f);
        y.push(r);
    }
    Instance { data: GwrDataset::unnamed(rows).unwrap(), locs, x, y }
}

fn ols_limit() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let p = rng.gen_range(1..=4);
        let n = rng.gen_range(p + 3..=50);
        let inst = random_instance(&mut rng, n, p);
        let ols = qr_ols(&inst.x, &inst.y);
        let model = fit(&inst.data, &KernelSpec::gaussian(1e6).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        for local in model.locals() {
            for (a, b) in local.beta.iter().zip(&ols) {
                worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(1.0));
                check(rel_close(*a, *b, 1e-8), || format!("beta {a} vs OLS {b}"))?;
            }
        }
    }
    within(t.elapsed(), Duration::from_secs(5))?;
    Ok(format!("20 datasets, worst relative error {worst:.1e}, {:.2?}", t.elapsed()))
}

fn wls_oracle() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let p = rng.gen_range(1..=3);
        let n = rng.gen_range(4 * p + 4..=24);
        let inst = random_instance(&mut rng, n, p);
        let h = rng.gen_range(8.0..30.0);
        let at = inst.locs[rng.gen_range(0..n)];
        let w: Vec<f64> =
            inst.locs.iter().map(|l| gaussian_weight(haversine_km(at.0, at.1, l.0, l.1), h)).collect();
        let local = fit_local(&GeoPoint::new(at.0, at.1).unwrap(), &inst.data, &KernelSpec::gaussian(h).unwrap(), None)
            .map_err(|e| e.to_string())?;
        let gd = gd_wls(&inst.x, &inst.y, &w, 2_000_000);
        for (a, b) in local.beta.iter().zip(&gd) {
            worst = worst.max((a - b).abs());
            check((a - b).abs() <= 1e-6, || format!("beta {a} vs gradient descent {b}"))?;
        }
    }
    within(t.elapsed(), Duration::from_secs(30))?;
    Ok(format!("50 instances, worst abs error {worst:.1e}, {:.2?}", t.elapsed()))
}

fn synthetic_recovery() -> Outcome {
    let t = Instant::now();
    let spec = SyntheticSpec::smooth_default(2024);
    let data = generate_synthetic(&spec).map_err(|e| e.to_string())?;
    let report = evaluate_synthetic(&data, &SplitSpec::default(), &BandwidthChoice::AutoGrid).map_err(|e| e.to_string())?;
    let year = &report.years[0];
    let r2 = year.r_squared.ok_or("no R2")?;
    let model = year.model.as_ref().ok_or("no model")?;
    let p = spec.surfaces.len();
    let mut sse = vec![0.0; p];
    for l in model.locals() {
        let truth = spec.true_beta(&l.point);
        for k in 0..p {
            sse[k] += (l.beta[k] - truth[k]).powi(2);
        }
    }
    let ratios: Vec<f64> = sse
        .iter()
        .zip(&spec.surfaces)
        .map(|(s, f)| (s / model.locals().len() as f64).sqrt() / f.range())
        .collect();
    for (k, r) in ratios.iter().enumerate() {
        check(*r <= 0.15, || format!("coefficient {k} RMSE is {:.1}% of range", 100.0 * r))?;
    }
    check(r2 >= 0.85, || format!("test R2 {r2}"))?;
    within(t.elapsed(), Duration::from_secs(120))?;
    Ok(format!(
        "n = {}, h = {:.3} km, test R2 = {r2:.4}, RMSE/range = {}, {:.2?}",
        data.dataset.n(),
        year.bandwidth_km,
        ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join("/"),
        t.elapsed()
    ))
}

fn loo_cv() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let inst = random_instance(&mut rng, 30, 3);
    let candidates = [2.0, 4.0, 8.0, 16.0, 32.0, 1000.0];
    let sel = select_bandwidth(&inst.data, &candidates).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for s in &sel.scores {
        let score = s.score.ok_or_else(|| format!("h = {} degenerate", s.bandwidth_km))?;
        let brute = brute_loo(&inst.locs, &inst.x, &inst.y, s.bandwidth_km);
        worst = worst.max((score - brute).abs() / brute.abs().max(1.0));
        check(rel_close(score, brute, 1e-10), || format!("h = {}: {score} vs {brute}", s.bandwidth_km))?;
    }
    Ok(format!("{} candidates, worst relative error {worst:.1e}, best h = {}", candidates.len(), sel.best_h))
}

fn statistics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for _ in 0..200 {
        let n = rng.gen_range(3..80);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| rng.gen_range(-1.0..1.0) * v + rng.gen_range(-4.0..4.0)).collect();
        let a = pearson(&x, &y).map_err(|e| e.to_string())?;
        check((a - pearson_direct(&x, &y)).abs() <= 1e-12, || format!("pearson {a}"))?;
        let b = r_squared(&y, &x).map_err(|e| e.to_string())?;
        check((b - r_squared_direct(&y, &x)).abs() <= 1e-12, || format!("r_squared {b}"))?;
    }

    let city = crimegwr::experiment::generate_city(&crimegwr::experiment::CitySpec {
        grid: 3,
        first_year: 2016,
        last_year: 2016,
        ..crimegwr::experiment::CitySpec::rochester(404)
    })
    .map_err(|e| e.to_string())?;
    let weather = WeatherSeries::new(city.weather.clone());
    let hours = hour_histogram(&city.incidents, None).map_err(|e| e.to_string())?;
    let hv: Vec<f64> = city.incidents.iter().map(|i| f64::from(i.hour())).collect();
    let edges: Vec<f64> = (0..=24).map(f64::from).collect();
    check(hours.counts == histogram_direct(&hv, &edges), || "hour counts differ".into())?;
    let total = hours.total() as f64;
    for (c, p) in hours.counts.iter().zip(&hours.percentages) {
        check((p - 100.0 * *c as f64 / total).abs() <= 1e-12, || "hour percentage".into())?;
    }
    let temps = temperature_histogram(&city.incidents, &weather, None, 5.0).map_err(|e| e.to_string())?;
    let tv: Vec<f64> =
        city.incidents.iter().map(|i| weather.temp_on(i.occurred_at.date()).unwrap().0).collect();
    check(temps.counts == histogram_direct(&tv, temps.bin_edges.as_ref().unwrap()), || {
        "temperature counts differ".into()
    })?;

    let mut indicator = vec![0.0; 24];
    for h in [7, 15, 23] {
        indicator[h] = 1.0;
    }
    let shift = shift_change_correlation(&hours).map_err(|e| e.to_string())?;
    let direct = pearson_direct(&hours.percentages, &indicator);
    check((shift - direct).abs() <= 1e-12, || format!("shift r {shift} vs {direct}"))?;
    let constructed: Vec<f64> = (0..24).map(|h| (h as f64 * 0.7).sin() + 2.0).collect();
    let mut fake = hours.clone();
    fake.percentages = constructed.clone();
    let r = shift_change_correlation(&fake).map_err(|e| e.to_string())?;
    check((r - pearson_direct(&constructed, &indicator)).abs() <= 1e-12, || "constructed 24-vector".into())?;
    Ok(format!(
        "200 pearson/r_squared fixtures, hour/temperature histograms, shift-change r = {shift:.4} (synthetic data)"
    ))
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_crimegwr")
}

fn run(args: &[&str]) -> Result<(), String> {
    let out = Command::new(bin()).args(args).output().map_err(|e| e.to_string())?;
    check(out.status.success(), || {
        format!("crimegwr {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr))
    })
}

fn pipeline(root: &Path) -> Result<(), String> {
    let p = |s: &str| root.join(s).to_string_lossy().into_owned();
    let grid = "2,4,8,16,32";
    run(&["synthetic", "--out", &p("data"), "--seed", "9", "--grid", "5", "--first-year", "2016", "--last-year", "2017"])?;
    run(&["fit", "--data", &p("data"), "--out", &p("model/bundle.json"), "--grid", grid])?;
    run(&["evaluate", "--data", &p("data"), "--out", &p("eval"), "--seed", "9", "--grid", grid])?;
    run(&["heatmap", "--data", &p("data"), "--out", &p("heat"), "--resolution", "12", "--grid", grid])?;
    run(&["stats", "--data", &p("data"), "--out", &p("stats")])?;
    Ok(())
}

fn files_under(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("crimegwr-acceptance-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn determinism() -> Outcome {
    let t = Instant::now();
    let (a, b) = (scratch("run-a"), scratch("run-b"));
    pipeline(&a)?;
    pipeline(&b)?;
    let (fa, fb) = (files_under(&a), files_under(&b));
    check(fa.keys().eq(fb.keys()), || "different file sets".into())?;
    for (name, bytes) in &fa {
        check(fb[name] == *bytes, || format!("{} differs", name.display()))?;
    }
    let kinds = ["csv", "json", "geojson"].map(|ext| fa.keys().filter(|p| p.extension().is_some_and(|e| e == ext)).count());
    let _ = std::fs::remove_dir_all(&a);
    let _ = std::fs::remove_dir_all(&b);
    Ok(format!(
        "{} files identical ({} csv, {} json, {} geojson), {:.2?}",
        fa.len(),
        kinds[0],
        kinds[1],
        kinds[2],
        t.elapsed()
    ))
}

fn ingestion_partition() -> Outcome {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures");
    let city_dir = scratch("ingest");
    crimegwr::experiment::generate_city(&crimegwr::experiment::CitySpec::rochester(31))
        .and_then(|c| c.write_csvs(&city_dir))
        .map_err(|e| e.to_string())?;
    let cols = ColumnConfig::default();
    let open = |p: PathBuf| File::open(&p).map_err(|e| format!("{}: {e}", p.display()));

    let mut parsed = 0;
    for entry in std::fs::read_dir(&fixtures).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let (acc, rej, total) = if name.starts_with("crimes") {
            let o = parse_crimes(open(path.clone())?, &cols.crimes).map_err(|e| e.to_string())?;
            (o.records.len(), o.rejects.len(), o.total_rows)
        } else if name.starts_with("demographics") {
            let (_, o) = parse_demographics(open(path.clone())?, &cols.demographics).map_err(|e| e.to_string())?;
            (o.records.len(), o.rejects.len(), o.total_rows)
        } else if name.starts_with("weather") {
            let o = parse_weather(open(path.clone())?, &cols.weather).map_err(|e| e.to_string())?;
            (o.records.len(), o.rejects.len(), o.total_rows)
        } else {
            continue;
        };
        check(acc + rej == total, || format!("{name}: {acc} + {rej} != {total}"))?;
        parsed += 1;
    }

    let mut cells = 0;
    for (crimes, demo, weather) in [
        (fixtures.join("crimes_3.csv"), fixtures.join("demographics_3.csv"), fixtures.join("weather_3.csv")),
        (city_dir.join("crimes.csv"), city_dir.join("demographics.csv"), city_dir.join("weather.csv")),
    ] {
        let c = parse_crimes(open(crimes)?, &cols.crimes).map_err(|e| e.to_string())?;
        let (eth, d) = parse_demographics(open(demo)?, &cols.demographics).map_err(|e| e.to_string())?;
        let w = parse_weather(open(weather)?, &cols.weather).map_err(|e| e.to_string())?;
        for (acc, rej, total) in [
            (c.records.len(), c.rejects.len(), c.total_rows),
            (d.records.len(), d.rejects.len(), d.total_rows),
            (w.records.len(), w.rejects.len(), w.total_rows),
        ] {
            check(acc + rej == total, || format!("{acc} + {rej} != {total}"))?;
        }
        for min_support in [1, 5] {
            let rows = build_model_rows(
                &c.records,
                &GeoUnitTable::new(eth.clone(), d.records.clone()),
                &WeatherSeries::new(w.records.clone()),
                BuildOptions { min_support },
            )
            .map_err(|e| e.to_string())?;
            for r in &rows.rows {
                let s: f64 = r.responses.iter().sum();
                check((s - 1.0).abs() <= 1e-9, || format!("{} {} responses sum to {s}", r.geoid, r.year))?;
            }
            cells += rows.rows.len();
        }
    }
    let _ = std::fs::remove_dir_all(&city_dir);
    Ok(format!("{parsed} fixture files balanced, {cells} cells sum to 1"))
}

fn service_agreement() -> Outcome {
    let dir = scratch("service");
    let data = dir.join("data");
    let bundle_path = dir.join("bundle.json");
    run(&["synthetic", "--out", &data.to_string_lossy(), "--seed", "12", "--grid", "5", "--first-year", "2017", "--last-year", "2017"])?;
    run(&["fit", "--data", &data.to_string_lossy(), "--out", &bundle_path.to_string_lossy(), "--bandwidth", "6"])?;
    let bundle = ModelBundle::load(&bundle_path).map_err(|e| e.to_string())?;
    let engine = RiskEngine::new(bundle.clone()).map_err(|e| e.to_string())?;
    let state = AppState::new(None);
    state.install(RiskEngine::new(bundle.clone()).map_err(|e| e.to_string())?);
    let app = router(state);

    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let get = |uri: String| -> Result<Vec<u8>, String> {
        rt.block_on(async {
            let resp = app.clone().oneshot(Request::get(uri).body(Body::empty()).unwrap()).await.map_err(|e| e.to_string())?;
            if !resp.status().is_success() {
                return Err(format!("status {}", resp.status()));
            }
            Ok(resp.into_body().collect().await.map_err(|e| e.to_string())?.to_bytes().to_vec())
        })
    };

    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut geoid_mode = 0;
    for i in 0..100 {
        let (lat, lon) = if i % 4 == 0 {
            let u = &bundle.geounits.units[rng.gen_range(0..bundle.geounits.units.len())];
            (u.centroid.lat(), u.centroid.lon())
        } else {
            (rng.gen_range(43.11..43.25), rng.gen_range(-77.69..-77.51))
        };
        let hour = rng.gen_range(0..24);
        let month = rng.gen_range(1..=12);
        let temp = (i % 3 == 0).then(|| rng.gen_range(0.0..90.0));
        let mut uri = format!("/api/risk?lat={lat}&lon={lon}&hour={hour}&month={month}");
        if let Some(t) = temp {
            uri.push_str(&format!("&temp_f={t}"));
        }
        let served: RiskResponse = serde_json::from_slice(&get(uri)?).map_err(|e| e.to_string())?;
        let q = RiskQuery::new(lat, lon, hour, month, temp).map_err(|e| e.to_string())?;
        let lib = RiskResponse::new(&q, engine.assess(&q).map_err(|e| e.to_string())?);
        check(served == lib, || format!("query {i} differs: {served:?} vs {lib:?}"))?;
        for p in served.probabilities.values() {
            check((0.0..=1.0).contains(p), || format!("probability {p}"))?;
        }
        geoid_mode += usize::from(served.geoid.is_some());
    }

    // The CLI's answer for a training centroid is the same bytes the service returns.
    let u = &bundle.geounits.units[0];
    let (lat, lon) = (u.centroid.lat().to_string(), u.centroid.lon().to_string());
    let out = Command::new(bin())
        .args(["risk", "--model", &bundle_path.to_string_lossy(), "--lat", &lat, "--lon", &lon, "--hour", "13", "--month", "6"])
        .output()
        .map_err(|e| e.to_string())?;
    check(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
    let cli: RiskResponse = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    let served: RiskResponse =
        serde_json::from_slice(&get(format!("/api/risk?lat={lat}&lon={lon}&hour=13&month=6"))?).map_err(|e| e.to_string())?;
    check(cli == served, || "CLI and service disagree at a centroid".into())?;
    let _ = std::fs::remove_dir_all(&dir);
    Ok(format!("100 queries identical ({geoid_mode} resolved to a GeoID), CLI matches service"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("OLS-limit equivalence (1e-8 relative)", ols_limit),
        ("WLS oracle equivalence (1e-6)", wls_oracle),
        ("Synthetic coefficient recovery (RMSE <= 15% range, R2 >= 0.85)", synthetic_recovery),
        ("LOO-CV correctness (1e-10)", loo_cv),
        ("Statistics oracles (1e-12)", statistics),
        ("Pipeline determinism (byte-identical outputs)", determinism),
        ("Ingestion partition invariant", ingestion_partition),
        ("Service/library agreement (100 queries)", service_agreement),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
