//! Systematic multi-resolution feature generation.
//!
//! Grouping combinations pair a spatial key (cells at resolutions 9/10, route,
//! segment, route-crossed variants, or none) with a temporal key (hour of
//! day, time period, or none). Every combination aggregates historical pace
//! with the same 9 statistics; per-hour boolean encodings, daily weather and
//! the cluster id complete the matrix. Statistics only ever see observations
//! strictly before the target row's cutoff timestamp.

use std::collections::BTreeMap;

use chrono::{DateTime, Datelike, NaiveDate, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::PaceObservation;
use crate::hexgrid::cell_of;
use crate::par;
use crate::reduce::quantile_sorted;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("empty feature config: no spatial or temporal keys enabled")]
    EmptyConfig,
    #[error("duplicate column name during assembly: {0}")]
    AssemblyConflict(String),
    #[error("missing weather for {0}")]
    MissingWeather(NaiveDate),
    #[error("invalid coordinates in observation {0}")]
    BadObservation(String),
}

pub const STAT_NAMES: [&str; 9] = ["mean", "stdev", "min", "max", "p25", "p50", "p75", "count", "sum"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialKey {
    H3Res9,
    H3Res10,
    Route,
    Segment,
    RouteH3Res9,
    RouteH3Res10,
    RouteSegment,
    Global,
}

impl SpatialKey {
    fn label(self) -> &'static str {
        match self {
            SpatialKey::H3Res9 => "h3r9",
            SpatialKey::H3Res10 => "h3r10",
            SpatialKey::Route => "route",
            SpatialKey::Segment => "segment",
            SpatialKey::RouteH3Res9 => "route_x_h3r9",
            SpatialKey::RouteH3Res10 => "route_x_h3r10",
            SpatialKey::RouteSegment => "route_x_segment",
            SpatialKey::Global => "global",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalKey {
    HourOfDay,
    TimePeriod,
    All,
}

impl TemporalKey {
    fn label(self) -> &'static str {
        match self {
            TemporalKey::HourOfDay => "hour",
            TemporalKey::TimePeriod => "period",
            TemporalKey::All => "all",
        }
    }
}

/// One grouping combination. The canonical name is `{spatial}.{temporal}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupingCombo {
    pub spatial: SpatialKey,
    pub temporal: TemporalKey,
}

impl GroupingCombo {
    pub fn name(&self) -> String {
        format!("{}.{}", self.spatial.label(), self.temporal.label())
    }
}

/// The six operational time-of-day periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimePeriod {
    Night,
    EarlyMorning,
    MorningRush,
    Midday,
    AfternoonRush,
    Evening,
}

impl TimePeriod {
    pub fn index(self) -> u8 {
        match self {
            TimePeriod::Night => 0,
            TimePeriod::EarlyMorning => 1,
            TimePeriod::MorningRush => 2,
            TimePeriod::Midday => 3,
            TimePeriod::AfternoonRush => 4,
            TimePeriod::Evening => 5,
        }
    }

    pub fn is_peak(self) -> bool {
        matches!(self, TimePeriod::MorningRush | TimePeriod::AfternoonRush)
    }
}

/// Local civil time pieces of a UTC timestamp under a fixed agency offset.
pub fn local_parts(enter_time: i64, tz_offset_s: i32) -> (u32, u32, chrono::Weekday) {
    let local = DateTime::from_timestamp(enter_time + tz_offset_s as i64, 0).expect("valid timestamp");
    (local.hour(), local.minute(), local.weekday())
}

/// Fixed-boundary period labelling:
/// night [22:00, 05:00), early morning [05:00, 07:00), morning rush
/// [07:00, 09:00), midday [09:00, 15:30), afternoon rush [15:30, 18:30),
/// evening [18:30, 22:00).
pub fn time_period_of(enter_time: i64, tz_offset_s: i32) -> TimePeriod {
    let (h, m, _) = local_parts(enter_time, tz_offset_s);
    let mins = h * 60 + m;
    match mins {
        0..=299 => TimePeriod::Night,          // [00:00, 05:00)
        300..=419 => TimePeriod::EarlyMorning, // [05:00, 07:00)
        420..=539 => TimePeriod::MorningRush,  // [07:00, 09:00)
        540..=929 => TimePeriod::Midday,       // [09:00, 15:30)
        930..=1109 => TimePeriod::AfternoonRush, // [15:30, 18:30)
        1110..=1319 => TimePeriod::Evening,    // [18:30, 22:00)
        _ => TimePeriod::Night,                // [22:00, 24:00)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Plain spatial keys entering the single-key enumeration (may include
    /// `Global` for the no-spatial grouping).
    pub spatial_keys: Vec<SpatialKey>,
    pub temporal_keys: Vec<TemporalKey>,
    /// Route-crossed spatial keys; paired with every temporal key.
    pub crossed_keys: Vec<SpatialKey>,
    /// Combos (by canonical name) whose statistic columns are dropped as
    /// target-leakage guards.
    pub leakage_drop: Vec<String>,
    /// Agency-local UTC offset, seconds.
    pub tz_offset_s: i32,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            spatial_keys: vec![
                SpatialKey::H3Res9,
                SpatialKey::H3Res10,
                SpatialKey::Route,
                SpatialKey::Segment,
                SpatialKey::Global,
            ],
            temporal_keys: vec![TemporalKey::HourOfDay, TemporalKey::TimePeriod, TemporalKey::All],
            crossed_keys: vec![SpatialKey::RouteH3Res9, SpatialKey::RouteH3Res10, SpatialKey::RouteSegment],
            leakage_drop: vec!["segment.hour".into(), "route_x_segment.hour".into()],
            tz_offset_s: -5 * 3600,
        }
    }
}

/// Deterministic enumeration: single spatial × temporal (minus the fully
/// global pair), then crossed × temporal. The default config yields exactly
/// 23 combinations.
pub fn enumerate_combos(config: &FeatureConfig) -> Result<Vec<GroupingCombo>, FeatureError> {
    if (config.spatial_keys.is_empty() && config.crossed_keys.is_empty()) || config.temporal_keys.is_empty() {
        return Err(FeatureError::EmptyConfig);
    }
    let mut out = Vec::new();
    for &s in &config.spatial_keys {
        for &t in &config.temporal_keys {
            if s == SpatialKey::Global && t == TemporalKey::All {
                continue;
            }
            out.push(GroupingCombo { spatial: s, temporal: t });
        }
    }
    for &s in &config.crossed_keys {
        for &t in &config.temporal_keys {
            out.push(GroupingCombo { spatial: s, temporal: t });
        }
    }
    Ok(out)
}

/// Closed-form column count for a config: combos×9 + 96 booleans + 3 weather
/// + 1 categorical − dropped×9.
pub fn expected_feature_count(config: &FeatureConfig) -> Result<usize, FeatureError> {
    let combos = enumerate_combos(config)?;
    let dropped = combos.iter().filter(|c| config.leakage_drop.contains(&c.name())).count();
    Ok(combos.len() * 9 + 96 + 3 + 1 - dropped * 9)
}

/// Compact per-observation key parts, computed once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ObsKeyParts {
    pub route: u32,
    pub segment: u32,
    pub cell9: u64,
    pub cell10: u64,
    pub hour: u8,
    pub period: u8,
}

/// Grouping key: two spatial words plus a temporal byte.
pub type GroupKey = (u64, u64, u8);

/// Interned id spaces shared between history and target rows.
#[derive(Debug, Default, Clone)]
pub struct KeyInterner {
    routes: BTreeMap<String, u32>,
    segments: BTreeMap<String, u32>,
}

impl KeyInterner {
    fn intern(map: &mut BTreeMap<String, u32>, v: &str) -> u32 {
        if let Some(&i) = map.get(v) {
            return i;
        }
        let i = map.len() as u32;
        map.insert(v.to_string(), i);
        i
    }

    pub fn parts(&mut self, obs: &PaceObservation, tz_offset_s: i32) -> Result<ObsKeyParts, FeatureError> {
        let route = Self::intern(&mut self.routes, &obs.route_id);
        let segment = Self::intern(&mut self.segments, &obs.segment_id);
        let cell9 = cell_of(obs.centroid, 9)
            .map_err(|_| FeatureError::BadObservation(obs.elementary_id.clone()))?
            .raw();
        let cell10 = cell_of(obs.centroid, 10)
            .map_err(|_| FeatureError::BadObservation(obs.elementary_id.clone()))?
            .raw();
        let (hour, _, _) = local_parts(obs.enter_time, tz_offset_s);
        let period = time_period_of(obs.enter_time, tz_offset_s).index();
        Ok(ObsKeyParts { route, segment, cell9, cell10, hour: hour as u8, period })
    }
}

impl GroupingCombo {
    /// Key of an observation under this combo.
    pub fn key(&self, p: &ObsKeyParts) -> GroupKey {
        let spatial = match self.spatial {
            SpatialKey::H3Res9 => (p.cell9, 0),
            SpatialKey::H3Res10 => (p.cell10, 0),
            SpatialKey::Route => (p.route as u64, 0),
            SpatialKey::Segment => (p.segment as u64, 0),
            SpatialKey::RouteH3Res9 => (p.route as u64, p.cell9),
            SpatialKey::RouteH3Res10 => (p.route as u64, p.cell10),
            SpatialKey::RouteSegment => (p.route as u64, p.segment as u64),
            SpatialKey::Global => (0, 0),
        };
        let temporal = match self.temporal {
            TemporalKey::HourOfDay => p.hour,
            TemporalKey::TimePeriod => p.period,
            TemporalKey::All => u8::MAX,
        };
        (spatial.0, spatial.1, temporal)
    }
}

/// Keyed statistics table for one combo at one cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct StatTable {
    pub combo: GroupingCombo,
    pub cutoff: i64,
    pub rows: BTreeMap<GroupKey, [f64; 9]>,
}

/// The 9 statistics over a group's pace values: mean, population stdev, min,
/// max, p25/p50/p75 (type-7), count, sum.
pub fn stats9(values: &mut Vec<f64>) -> [f64; 9] {
    let n = values.len();
    debug_assert!(n > 0);
    let sum: f64 = values.iter().sum();
    let mean = sum / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    [
        mean,
        var.sqrt(),
        values[0],
        values[n - 1],
        quantile_sorted(values, 0.25),
        quantile_sorted(values, 0.50),
        quantile_sorted(values, 0.75),
        n as f64,
        sum,
    ]
}

/// Groups historical observations under `combo` and computes the 9 statistics
/// per group. Only observations with `enter_time < cutoff` contribute.
pub fn aggregate_stats(
    history: &[(ObsKeyParts, i64, f64)],
    combo: &GroupingCombo,
    cutoff: i64,
) -> StatTable {
    let mut groups: BTreeMap<GroupKey, Vec<f64>> = BTreeMap::new();
    for (parts, enter_time, pace) in history {
        if *enter_time < cutoff {
            groups.entry(combo.key(parts)).or_default().push(*pace);
        }
    }
    let rows = groups
        .into_iter()
        .map(|(k, mut v)| (k, stats9(&mut v)))
        .collect();
    StatTable { combo: combo.clone(), cutoff, rows }
}

/// 96 boolean temporal columns: for each hour h, (is_hour, ∧weekday, ∧peak,
/// ∧weekend). Exactly the observation's own hour can be set.
pub fn encode_hour_booleans(enter_time: i64, tz_offset_s: i32) -> [f64; 96] {
    let (hour, _, weekday) = local_parts(enter_time, tz_offset_s);
    let period = time_period_of(enter_time, tz_offset_s);
    let is_weekend = matches!(weekday, chrono::Weekday::Sat | chrono::Weekday::Sun);
    let mut out = [0.0; 96];
    let base = hour as usize * 4;
    out[base] = 1.0;
    out[base + 1] = if is_weekend { 0.0 } else { 1.0 };
    out[base + 2] = if period.is_peak() { 1.0 } else { 0.0 };
    out[base + 3] = if is_weekend { 1.0 } else { 0.0 };
    out
}

pub fn hour_boolean_names() -> Vec<String> {
    let mut names = Vec::with_capacity(96);
    for h in 0..24 {
        names.push(format!("hour_{h}"));
        names.push(format!("hour_{h}_weekday"));
        names.push(format!("hour_{h}_peak"));
        names.push(format!("hour_{h}_weekend"));
    }
    names
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureGroup {
    Spatial,
    Temporal,
    Statistical,
    Boolean,
    Weather,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub group: FeatureGroup,
}

/// Assembled leakage-guarded feature matrix, row-aligned with the target
/// observations passed to [`assemble_matrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub columns: Vec<ColumnMeta>,
    /// Row-major n×d.
    pub data: Vec<f64>,
    pub target: Vec<f64>,
    pub n_rows: usize,
    /// Statistic cells imputed per column (same length as `columns`).
    pub missing_counts: Vec<u64>,
}

impl FeatureMatrix {
    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.columns.len() + col]
    }

    pub fn to_dmatrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.n_rows, self.columns.len(), &self.data)
    }

    /// Index of a named column.
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Hash of the column schema (names + groups), used to pin downstream
    /// artifacts to the matrix layout.
    pub fn schema_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for c in &self.columns {
            hasher.update(c.name.as_bytes());
            hasher.update([0u8]);
            hasher.update(format!("{:?}", c.group).as_bytes());
            hasher.update([1u8]);
        }
        hex::encode(hasher.finalize())
    }
}

/// Daily weather columns keyed by service date.
pub type WeatherByDate = BTreeMap<NaiveDate, (f64, f64, f64)>;

/// Per-row cutoff: local midnight of the observation's service date. All
/// statistics for a row use only history strictly before this instant
/// (service-date batch semantics).
pub fn cutoff_for(date: NaiveDate, tz_offset_s: i32) -> i64 {
    date.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp() - tz_offset_s as i64
}

/// Joins combo statistics, boolean encodings, weather and the cluster id into
/// the modelling matrix. Missing statistic cells are imputed with the
/// column's mean over present cells and counted in `missing_counts`.
pub fn assemble_matrix(
    targets: &[PaceObservation],
    history: &[PaceObservation],
    cluster_of_route: &BTreeMap<String, i32>,
    weather: &WeatherByDate,
    config: &FeatureConfig,
) -> Result<FeatureMatrix, FeatureError> {
    let combos = enumerate_combos(config)?;
    let kept: Vec<&GroupingCombo> = combos.iter().filter(|c| !config.leakage_drop.contains(&c.name())).collect();

    // Column catalogue.
    let mut columns: Vec<ColumnMeta> = Vec::new();
    for combo in &kept {
        for stat in STAT_NAMES {
            columns.push(ColumnMeta { name: format!("{}.{stat}", combo.name()), group: FeatureGroup::Statistical });
        }
    }
    for name in hour_boolean_names() {
        columns.push(ColumnMeta { name, group: FeatureGroup::Boolean });
    }
    for name in ["weather_temperature_c", "weather_precipitation_mm", "weather_snow_cm"] {
        columns.push(ColumnMeta { name: name.into(), group: FeatureGroup::Weather });
    }
    columns.push(ColumnMeta { name: "cluster_id".into(), group: FeatureGroup::Categorical });
    {
        let mut seen = std::collections::BTreeSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(FeatureError::AssemblyConflict(c.name.clone()));
            }
        }
    }
    let d = columns.len();
    let n = targets.len();

    // Intern key parts for history and targets with one shared interner.
    let mut interner = KeyInterner::default();
    let mut hist_parts: Vec<(ObsKeyParts, i64, f64)> = Vec::with_capacity(history.len());
    for o in history {
        hist_parts.push((interner.parts(o, config.tz_offset_s)?, o.enter_time, o.pace_s_per_m));
    }
    let mut target_parts: Vec<ObsKeyParts> = Vec::with_capacity(n);
    for o in targets {
        target_parts.push(interner.parts(o, config.tz_offset_s)?);
    }

    // One stat table per (combo, distinct cutoff).
    let mut cutoffs: Vec<i64> = targets
        .iter()
        .map(|o| cutoff_for(o.service_date, config.tz_offset_s))
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    cutoffs.sort_unstable();
    let jobs: Vec<(usize, i64)> = kept
        .iter()
        .enumerate()
        .flat_map(|(ci, _)| cutoffs.iter().map(move |&cut| (ci, cut)))
        .collect();
    let tables: Vec<StatTable> = par::map_collect(&jobs, |&(ci, cut)| aggregate_stats(&hist_parts, kept[ci], cut));
    let table_of = |ci: usize, cut: i64| -> &StatTable {
        let cut_idx = cutoffs.binary_search(&cut).expect("cutoff present");
        &tables[ci * cutoffs.len() + cut_idx]
    };

    let mut data = vec![0.0f64; n * d];
    let mut present = vec![true; n * d];
    let stat_cols = kept.len() * 9;

    for (i, obs) in targets.iter().enumerate() {
        let parts = &target_parts[i];
        let cut = cutoff_for(obs.service_date, config.tz_offset_s);
        let row = &mut data[i * d..(i + 1) * d];
        for (ci, combo) in kept.iter().enumerate() {
            let key = combo.key(parts);
            match table_of(ci, cut).rows.get(&key) {
                Some(stats) => row[ci * 9..ci * 9 + 9].copy_from_slice(stats),
                None => {
                    for s in 0..9 {
                        present[i * d + ci * 9 + s] = false;
                    }
                }
            }
        }
        let booleans = encode_hour_booleans(obs.enter_time, config.tz_offset_s);
        row[stat_cols..stat_cols + 96].copy_from_slice(&booleans);
        let (t, p, s) = weather
            .get(&obs.service_date)
            .copied()
            .ok_or(FeatureError::MissingWeather(obs.service_date))?;
        row[stat_cols + 96] = t;
        row[stat_cols + 97] = p;
        row[stat_cols + 98] = s;
        row[stat_cols + 99] = cluster_of_route
            .get(&obs.route_id)
            .copied()
            .unwrap_or(crate::domain::CLUSTER_UNASSIGNED) as f64;
    }

    // Mean imputation over present cells, column by column.
    let mut missing_counts = vec![0u64; d];
    for j in 0..stat_cols {
        let mut sum = 0.0;
        let mut cnt = 0u64;
        for i in 0..n {
            if present[i * d + j] {
                sum += data[i * d + j];
                cnt += 1;
            }
        }
        let fill = if cnt > 0 { sum / cnt as f64 } else { 0.0 };
        for i in 0..n {
            if !present[i * d + j] {
                data[i * d + j] = fill;
                missing_counts[j] += 1;
            }
        }
    }

    let target: Vec<f64> = targets.iter().map(|o| o.pace_s_per_m).collect();
    Ok(FeatureMatrix { columns, data, target, n_rows: n, missing_counts })
}
