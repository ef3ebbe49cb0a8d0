//! End to end: write a sales CSV, read it back, fit, export the surface and
//! plots, then query a forecast.
//!
//! Run with `cargo run --example csv_to_forecast`; output lands in
//! `forecast_out/`.

use std::fs::{self, File};
use std::io::Write;
use std::path::Path;

use qgsa::export::{read_surface_csv, write_surface_csv};
use qgsa::panel::{build_weekday_panel, parse_csv, CsvSchema, WEEKDAY_NAMES};
use qgsa::plot::write_day_plots;
use qgsa::{qam_fit, qam_predict, QamConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = Path::new("forecast_out");
    fs::create_dir_all(out)?;

    // twelve weeks of a shop open 8:00-19:59 with a lunch and evening peak
    let csv_path = out.join("sales.csv");
    let mut f = File::create(&csv_path)?;
    writeln!(f, "date,hour,qty")?;
    let start = chrono::NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date");
    for day in 0..84 {
        let date = start + chrono::Duration::days(day);
        for hour in 8..20 {
            let peak = if hour == 12 || hour == 18 { 6.0 } else { 0.0 };
            let qty = 4.0 + peak + ((day * 7 + hour) % 5) as f64;
            writeln!(f, "{date},{hour},{qty}")?;
        }
    }
    drop(f);

    let schema = CsvSchema {
        open_hour: 8,
        ..CsvSchema::default()
    };
    let records = parse_csv(File::open(&csv_path)?, &schema)?;
    let panel = build_weekday_panel(&records, 12)?;
    let mut config = QamConfig::new(0.95);
    config.smoother.span = 0.4;
    let surface = qam_fit(&panel, &config)?;

    let meta = vec![("span".to_string(), "0.4".to_string())];
    write_surface_csv(File::create(out.join("surface.csv"))?, &surface, 8, &meta)?;
    let labels: Vec<String> = WEEKDAY_NAMES.iter().map(|s| s.to_string()).collect();
    write_day_plots(out, &panel, &surface, &labels, 8)?;

    let back = read_surface_csv(File::open(out.join("surface.csv"))?)?;
    for hour in [9.0, 12.0, 12.5, 18.0] {
        let t = hour - 8.0 + 1.0;
        let p = qam_predict(&back.surface, t, 5)?;
        let (h, m) = (hour as u32, (hour.fract() * 60.0).round() as u32);
        println!("Friday {h:02}:{m:02}  95% quantile of sales {:.2}", p.value);
    }
    println!("surface, plots and data in {}", out.display());
    Ok(())
}
