//! Result emission: CSV with an embedded config line, JSON summaries,
//! and the dataset interchange format.
//!
//! CSV files carry the resolved configuration as a single `#`-prefixed
//! comment line above the header row. Numbers are written in the
//! shortest representation that round-trips.

use std::path::Path;

use serde::Serialize;

use crate::ExperimentConfig;
use cfk_core::simgen::ScenarioDataset;

/// Write rows as CSV with the config echo on the first line.
pub fn write_csv<T: Serialize>(
    path: &Path,
    config: &ExperimentConfig,
    rows: &[T],
) -> anyhow::Result<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row)?;
    }
    let body = String::from_utf8(writer.into_inner()?)?;
    std::fs::write(path, format!("{}\n{body}", config_line(config)?))?;
    Ok(())
}

fn config_line(config: &ExperimentConfig) -> anyhow::Result<String> {
    Ok(format!("# config {}", serde_json::to_string(config)?))
}

/// Write a JSON summary embedding the resolved config.
pub fn write_summary<T: Serialize>(
    path: &Path,
    config: &ExperimentConfig,
    summary: &T,
) -> anyhow::Result<()> {
    #[derive(Serialize)]
    struct Envelope<'a, T> {
        config: &'a ExperimentConfig,
        summary: &'a T,
    }
    let envelope = Envelope { config, summary };
    std::fs::write(path, serde_json::to_string_pretty(&envelope)?)?;
    Ok(())
}

/// Dataset interchange format: `x_1..x_d, t, y` plus the oracle columns
/// `y0_star`, `y1_star`, `propensity`.
pub fn write_dataset_csv(
    path: &Path,
    config: &ExperimentConfig,
    data: &ScenarioDataset,
) -> anyhow::Result<()> {
    let dim = data.observed.covariates[0].len();
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (1..=dim).map(|j| format!("x_{j}")).collect();
    header.extend(["t", "y", "y0_star", "y1_star", "propensity"].map(String::from));
    writer.write_record(&header)?;
    for i in 0..data.observed.len() {
        let mut record: Vec<String> = data.observed.covariates[i]
            .iter()
            .map(|v| v.to_string())
            .collect();
        record.push((data.observed.treatments[i] as u8).to_string());
        record.push(data.observed.outcomes[i][0].to_string());
        record.push(data.y0_star[i].to_string());
        record.push(data.y1_star[i].to_string());
        record.push(data.propensity[i].to_string());
        writer.write_record(&record)?;
    }
    let body = String::from_utf8(writer.into_inner()?)?;
    std::fs::write(path, format!("{}\n{body}", config_line(config)?))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Experiment;
    use cfk_core::simgen::{gen_scenario, Scenario, ScenarioConfig};
    use serde::Serialize;

    #[derive(Serialize)]
    struct Row {
        name: &'static str,
        value: f64,
    }

    #[test]
    fn csv_carries_config_then_header() {
        let dir = std::env::temp_dir().join("cfk-output-test");
        std::fs::create_dir_all(&dir).unwrap();
        let config = ExperimentConfig::new(Experiment::Table1, dir.clone());
        let path = dir.join("rows.csv");
        write_csv(&path, &config, &[Row { name: "a", value: 0.1 }]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        let first = lines.next().unwrap();
        assert!(first.starts_with("# config {"));
        assert!(first.contains("\"experiment\":\"table1\""));
        assert_eq!(lines.next().unwrap(), "name,value");
        assert_eq!(lines.next().unwrap(), "a,0.1");
    }

    #[test]
    fn dataset_csv_round_trips_values() {
        let dir = std::env::temp_dir().join("cfk-output-test");
        std::fs::create_dir_all(&dir).unwrap();
        let config = ExperimentConfig::new(Experiment::Table1, dir.clone());
        let data = gen_scenario(&ScenarioConfig::new(Scenario::III, 8, 3)).unwrap();
        let path = dir.join("dataset.csv");
        write_dataset_csv(&path, &config, &data).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# config"));
        let header = lines.next().unwrap();
        assert_eq!(header, "x_1,x_2,x_3,x_4,x_5,t,y,y0_star,y1_star,propensity");
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        // Shortest round-trip formatting: parsing back gives the value.
        assert_eq!(first[0].parse::<f64>().unwrap(), data.observed.covariates[0][0]);
        assert_eq!(first[9].parse::<f64>().unwrap(), data.propensity[0]);
        assert_eq!(first[5], if data.observed.treatments[0] { "1" } else { "0" });
    }
}
