use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::Datelike;
use serde_json::json;

use crimegwr::experiment::{
    export_geojson, generate_city, run_yearly_evaluation, CitySpec, SplitSpec,
};
use crimegwr::ingest::{
    build_model_rows, parse_crimes, parse_demographics, parse_weather, write_rejects, BuildOptions, ColumnConfig,
    CrimeIncident, GeoUnitTable, ModelRows, WeatherSeries,
};
use crimegwr::risk::{ModelBundle, RiskEngine, RiskQuery};
use crimegwr::stats;
use crimegwr::{BBox, CrimeType};
use crimegwr_service::{RiskResponse, ServiceConfig};

use crate::{EvaluateArgs, FitArgs, HeatmapArgs, InputArgs, RiskArgs, ServeArgs, StatsArgs, SyntheticArgs};

struct Inputs {
    incidents: Vec<CrimeIncident>,
    geounits: GeoUnitTable,
    weather: WeatherSeries,
    rows: ModelRows,
}

fn input_path(explicit: &Option<PathBuf>, data: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    match (explicit, data) {
        (Some(p), _) => Ok(p.clone()),
        (None, Some(d)) => Ok(d.join(name)),
        (None, None) => bail!("pass --data or --{}", name.trim_end_matches(".csv")),
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

fn load_inputs(a: &InputArgs) -> Result<Inputs> {
    let columns = match &a.columns {
        Some(p) => ColumnConfig::from_toml(&fs::read_to_string(p)?)?,
        None => ColumnConfig::default(),
    };
    let crimes = parse_crimes(open(&input_path(&a.crimes, &a.data, "crimes.csv")?)?, &columns.crimes)?;
    let (eth, demo) =
        parse_demographics(open(&input_path(&a.demographics, &a.data, "demographics.csv")?)?, &columns.demographics)?;
    let weather = parse_weather(open(&input_path(&a.weather, &a.data, "weather.csv")?)?, &columns.weather)?;

    let geounits = GeoUnitTable::new(eth, demo.records);
    let weather_series = WeatherSeries::new(weather.records);
    let rows = build_model_rows(
        &crimes.records,
        &geounits,
        &weather_series,
        BuildOptions { min_support: a.min_support },
    )?;
    if let Some(dir) = &a.reports {
        fs::create_dir_all(dir)?;
        write_rejects(&crimes.rejects, create(&dir.join("crimes_rejects.csv"))?)?;
        write_rejects(&demo.rejects, create(&dir.join("demographics_rejects.csv"))?)?;
        write_rejects(&weather.rejects, create(&dir.join("weather_rejects.csv"))?)?;
        write_json(&dir.join("coverage.json"), &rows.coverage)?;
    }
    for (name, rejected, total) in [
        ("crimes", crimes.rejects.len(), crimes.total_rows),
        ("demographics", demo.rejects.len(), demo.total_rows),
        ("weather", weather.rejects.len(), weather.total_rows),
    ] {
        if rejected > 0 {
            eprintln!("{name}: rejected {rejected} of {total} rows");
        }
    }
    Ok(Inputs { incidents: crimes.records, geounits, weather: weather_series, rows })
}

fn crime_types(selected: &[CrimeType]) -> Vec<CrimeType> {
    if selected.is_empty() {
        CrimeType::ALL.to_vec()
    } else {
        selected.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }
}

pub fn synthetic(a: SyntheticArgs) -> Result<()> {
    let spec = CitySpec { grid: a.grid, first_year: a.first_year, last_year: a.last_year, ..CitySpec::rochester(a.seed) };
    let city = generate_city(&spec)?;
    fs::create_dir_all(&a.out)?;
    city.write_csvs(&a.out)?;
    eprintln!(
        "wrote {} incidents over {} GeoIDs to {}",
        city.incidents.len(),
        city.geounits.units.len(),
        a.out.display()
    );
    Ok(())
}

pub fn fit(mut a: FitArgs) -> Result<()> {
    if a.input.reports.is_none() {
        a.input.reports = Some(a.out.parent().map(Path::to_path_buf).unwrap_or_default());
    }
    let inputs = load_inputs(&a.input)?;
    let bundle = ModelBundle::fit(&inputs.rows, &inputs.geounits, &inputs.weather, a.year, &a.bandwidth.choice())?;
    let mut w = create(&a.out)?;
    std::io::Write::write_all(&mut w, bundle.to_json().as_bytes())?;
    let reports = a.input.reports.as_deref().unwrap_or(Path::new("."));
    write_json(&reports.join("climatology.json"), &bundle.climatology)?;
    for (t, m) in &bundle.models {
        eprintln!(
            "{}: h = {} km, {} locals, global R2 = {:?}",
            t.key(),
            m.kernel().bandwidth_km(),
            m.locals().len(),
            m.diagnostics().global_r_squared
        );
    }
    eprintln!("model_version {}", bundle.model_version);
    Ok(())
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    let inputs = load_inputs(&a.input)?;
    let split = SplitSpec::new(a.test_fraction, a.seed)?;
    fs::create_dir_all(&a.out)?;
    let mut metrics = BTreeMap::new();
    for t in crime_types(&a.crime_type) {
        let (report, _) = run_yearly_evaluation(
            &inputs.rows,
            &inputs.geounits.ethnicity_names,
            t,
            &split,
            &a.bandwidth.choice(),
            a.shared_bandwidth,
        )?;
        report.write_scatter_csv(create(&a.out.join(format!("scatter_{}.csv", t.key())))?)?;
        for y in &report.years {
            eprintln!("{} {}: h = {} km, R2 = {:?}", t.key(), y.year, y.bandwidth_km, y.r_squared);
        }
        metrics.insert(t.key(), report);
    }
    write_json(
        &a.out.join("metrics.json"),
        &json!({ "seed": a.seed, "test_fraction": a.test_fraction, "crime_types": metrics }),
    )
}

fn year_mean_temp(weather: &WeatherSeries, year: i32) -> Option<f64> {
    let temps: Vec<f64> = weather.days().iter().filter(|d| d.date.year() == year).map(|d| d.avg_temp_f).collect();
    (!temps.is_empty()).then(|| temps.iter().sum::<f64>() / temps.len() as f64)
}

pub fn heatmap(a: HeatmapArgs) -> Result<()> {
    let inputs = load_inputs(&a.input)?;
    let years: Vec<i32> = if a.year.is_empty() {
        inputs.rows.rows.iter().map(|r| r.year).collect::<BTreeSet<_>>().into_iter().collect()
    } else {
        a.year.clone()
    };
    let bbox = match a.bbox {
        Some(b) => b,
        None => BBox::enclosing(inputs.geounits.units.iter().map(|u| &u.centroid)).context("no GeoUnits")?,
    };
    fs::create_dir_all(&a.out)?;
    for year in years {
        let temp = match a.temp_f.or_else(|| year_mean_temp(&inputs.weather, year)) {
            Some(t) => t,
            None => bail!("no weather for {year}; pass --temp-f"),
        };
        let bundle =
            ModelBundle::fit(&inputs.rows, &inputs.geounits, &inputs.weather, Some(year), &a.bandwidth.choice())?;
        let engine = RiskEngine::new(bundle)?;
        for t in crime_types(&a.crime_type) {
            let grid = engine.heatmap(t, &bbox, a.resolution, a.bucket, temp)?;
            let degenerate = grid.values.iter().filter(|v| v.is_none()).count();
            fs::write(a.out.join(format!("{}_{year}.geojson", t.key())), export_geojson(&grid))?;
            eprintln!("{} {year}: {} cells, {degenerate} without support", t.key(), grid.values.len());
        }
    }
    Ok(())
}

pub fn stats(a: StatsArgs) -> Result<()> {
    let inputs = load_inputs(&a.input)?;
    let f = a.crime_type;
    fs::create_dir_all(&a.out)?;
    let hours = stats::hour_histogram(&inputs.incidents, f)?;
    let months = stats::month_histogram(&inputs.incidents, f)?;
    let temps = stats::temperature_histogram(&inputs.incidents, &inputs.weather, f, a.temp_bin_f)?;
    hours.write_csv(create(&a.out.join("hour_histogram.csv"))?)?;
    months.write_csv(create(&a.out.join("month_histogram.csv"))?)?;
    temps.write_csv(create(&a.out.join("temperature_histogram.csv"))?)?;

    let profile = stats::month_temperature_profile(&inputs.incidents, &inputs.weather)?;
    let mut w = csv::Writer::from_writer(create(&a.out.join("month_profile.csv"))?);
    w.write_record(["month", "crime_percentage", "mean_temp_f"])?;
    for p in &profile {
        w.write_record([
            p.month.to_string(),
            p.crime_percentage.to_string(),
            p.mean_temp_f.map(|t| t.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;

    let labels = |h: &stats::Histogram| -> Vec<String> { stats::modes(h).into_iter().map(|i| h.labels[i].clone()).collect() };
    let shift_r = stats::shift_change_correlation(&hours).ok();
    let property = stats::feature_response_correlation(
        &inputs.rows.rows,
        &inputs.rows.feature_names,
        "property_rate",
        CrimeType::Burglary,
    );
    let property_r = match &property {
        Ok(c) => {
            c.write_pairs_csv(create(&a.out.join("property_rate_burglary_pairs.csv"))?)?;
            Some(c.r)
        }
        Err(e) => {
            eprintln!("property_rate vs burglary: {e}");
            None
        }
    };
    write_json(
        &a.out.join("summary.json"),
        &json!({
            "crime_filter": f.map(|t| t.key()),
            "incidents": hours.total(),
            "hour_modes": labels(&hours),
            "month_modes": labels(&months),
            "temperature_modes": labels(&temps),
            "shift_change_r": shift_r,
            "property_rate_burglary_r": property_r,
        }),
    )
}

pub fn risk(a: RiskArgs) -> Result<()> {
    let engine = RiskEngine::new(ModelBundle::load(&a.model)?)?.with_geoid_radius(a.geoid_radius_km);
    let q = RiskQuery::new(a.lat, a.lon, a.hour, a.month, a.temp_f)?;
    let report = engine.assess(&q)?;
    println!("{}", serde_json::to_string_pretty(&RiskResponse::new(&q, report))?);
    Ok(())
}

pub fn serve(a: ServeArgs) -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    let mut cfg = ServiceConfig::load(a.config.as_deref())?;
    if let Some(l) = a.listen {
        cfg.listen = l;
    }
    if let Some(m) = a.model {
        cfg.model_path = Some(m);
    }
    if let Some(d) = a.heatmap_dir {
        cfg.heatmap_dir = Some(d);
    }
    tokio::runtime::Runtime::new()?.block_on(crimegwr_service::serve(cfg))?;
    Ok(())
}
