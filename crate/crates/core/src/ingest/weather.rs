//! Daily weather CSV: `date,temperature_c,precipitation_mm,snow_cm` with
//! ISO-8601 dates.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::Deserialize;

use super::IngestError;
use crate::domain::WeatherDaily;

#[derive(Debug, Deserialize)]
struct RawWeather {
    date: NaiveDate,
    temperature_c: f64,
    precipitation_mm: f64,
    snow_cm: f64,
}

pub fn load_weather_csv(path: &Path) -> Result<BTreeMap<NaiveDate, WeatherDaily>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut out = BTreeMap::new();
    for row in rdr.deserialize() {
        let raw: RawWeather = row?;
        let w = WeatherDaily::new(raw.date, raw.temperature_c, raw.precipitation_mm, raw.snow_cm)?;
        out.insert(raw.date, w);
    }
    Ok(out)
}

/// Weather for a date with the nearest-prior-within-3-days fallback.
pub fn weather_for_date(
    map: &BTreeMap<NaiveDate, WeatherDaily>,
    date: NaiveDate,
) -> Result<WeatherDaily, IngestError> {
    super::quality::lookup_weather(map, date)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("weather.csv");
        std::fs::write(&p, "date,temperature_c,precipitation_mm,snow_cm\n2024-09-16,18.5,0.0,0.0\n2024-09-17,12.0,4.2,0.0\n").unwrap();
        let map = load_weather_csv(&p).unwrap();
        assert_eq!(map.len(), 2);
        let d = NaiveDate::from_ymd_opt(2024, 9, 17).unwrap();
        assert_eq!(map[&d].precipitation_mm, 4.2);
    }

    #[test]
    fn negative_precipitation_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("weather.csv");
        std::fs::write(&p, "date,temperature_c,precipitation_mm,snow_cm\n2024-09-16,18.5,-1.0,0.0\n").unwrap();
        assert!(load_weather_csv(&p).is_err());
    }
}
