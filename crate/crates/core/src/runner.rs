//! Whole runs, seed batches and CSV artifacts.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::CountryConfig;
use crate::engine::{ExposureEvent, SimOptions, Simulation};
use crate::error::{Error, Result};
use crate::scenario::Scenario;

pub const SERIES_HEADER: [&str; 10] = [
    "day",
    "susceptible",
    "exposed",
    "infectious",
    "hospitalized",
    "active",
    "recovered",
    "dead",
    "new_infections",
    "abroad",
];

/// End-of-day compartment tally. `dead` and `recovered` are cumulative.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DailyCounts {
    pub day: u32,
    pub susceptible: u32,
    pub exposed: u32,
    pub infectious: u32,
    pub hospitalized: u32,
    pub active: u32,
    pub recovered: u32,
    pub dead: u32,
    pub new_infections: u32,
    pub abroad: u32,
}

impl DailyCounts {
    pub fn total(&self) -> u32 {
        self.susceptible + self.active + self.recovered + self.dead
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub scenario: String,
    pub seed: u64,
    pub config_digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpidemicTimeSeries {
    pub meta: SeriesMeta,
    pub days: Vec<DailyCounts>,
}

impl EpidemicTimeSeries {
    pub fn summary(&self) -> RunSummary {
        RunSummary::of(&self.meta, &self.days)
    }

    pub fn active(&self) -> Vec<u32> {
        self.days.iter().map(|d| d.active).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub peak_active: u32,
    pub peak_day: u32,
    pub total_dead: u32,
    pub total_ever_infected: u32,
    pub end_day: u32,
}

impl RunSummary {
    pub fn of(meta: &SeriesMeta, days: &[DailyCounts]) -> RunSummary {
        let mut peak = (0, 0);
        for d in days {
            if d.active > peak.0 {
                peak = (d.active, d.day);
            }
        }
        let last = days.last().copied().unwrap_or_default();
        RunSummary {
            seed: meta.seed,
            peak_active: peak.0,
            peak_day: peak.1,
            total_dead: last.dead,
            total_ever_infected: days.iter().map(|d| d.new_infections).sum(),
            end_day: if last.active == 0 { last.day } else { last.day + 1 },
        }
    }
}

/// Per-day statistics of one column across runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRow {
    pub day: u32,
    pub mean: f64,
    pub min: u32,
    pub max: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub runs: Vec<EpidemicTimeSeries>,
    pub summaries: Vec<RunSummary>,
    /// Envelope of the `active` column. Runs that ended early contribute
    /// their final row to every later day.
    pub envelope: Vec<EnvelopeRow>,
}

impl BatchResult {
    pub fn mean_peak(&self) -> f64 {
        mean(self.summaries.iter().map(|s| s.peak_active as f64))
    }

    pub fn mean_dead(&self) -> f64 {
        mean(self.summaries.iter().map(|s| s.total_dead as f64))
    }
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = xs.len();
    if n == 0 {
        return 0.0;
    }
    xs.sum::<f64>() / n as f64
}

pub fn envelope(runs: &[EpidemicTimeSeries], column: impl Fn(&DailyCounts) -> u32) -> Vec<EnvelopeRow> {
    let len = runs.iter().map(|r| r.days.len()).max().unwrap_or(0);
    (0..len)
        .map(|i| {
            let values: Vec<u32> = runs
                .iter()
                .filter_map(|r| r.days.get(i).or(r.days.last()).map(&column))
                .collect();
            EnvelopeRow {
                day: i as u32,
                mean: values.iter().map(|&v| v as f64).sum::<f64>() / values.len() as f64,
                min: values.iter().copied().min().unwrap_or(0),
                max: values.iter().copied().max().unwrap_or(0),
            }
        })
        .collect()
}

/// Indices of the distinct waves in `values`: local maxima at least
/// `min_height` tall whose topographic prominence is at least
/// `min_rel_prominence` of their height. Prominence is measured against the
/// higher of the two lowest points separating the peak from taller ground
/// (or the series ends). Plateaus report their first day.
pub fn wave_peaks(values: &[u32], min_height: u32, min_rel_prominence: f64) -> Vec<usize> {
    let n = values.len();
    let mut peaks = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[j + 1] == values[i] {
            j += 1;
        }
        let rises = i == 0 || values[i - 1] < values[i];
        let falls = j + 1 == n || values[j + 1] < values[i];
        let h = values[i];
        if rises && falls && h >= min_height && h > 0 {
            let base = |range: &mut dyn Iterator<Item = usize>| {
                let mut low = h;
                for k in range {
                    if values[k] > h {
                        return low;
                    }
                    low = low.min(values[k]);
                }
                low
            };
            let left = base(&mut (0..i).rev());
            let right = base(&mut (j + 1..n));
            let prominence = h - left.max(right);
            if prominence as f64 >= min_rel_prominence * h as f64 {
                peaks.push(i);
            }
        }
        i = j + 1;
    }
    peaks
}

fn meta(config: &CountryConfig, scenario: &Scenario, seed: u64) -> SeriesMeta {
    SeriesMeta {
        scenario: scenario.name.clone(),
        seed,
        config_digest: config.digest(),
    }
}

/// Run one epidemic to its horizon or extinction.
pub fn run(config: &CountryConfig, scenario: &Scenario, seed: u64) -> Result<EpidemicTimeSeries> {
    run_with(Arc::new(config.clone()), scenario, seed, SimOptions::default()).map(|(series, _)| series)
}

/// Like [`run`], also returning the exposure events when `options.record_events` is set.
pub fn run_with(
    config: Arc<CountryConfig>,
    scenario: &Scenario,
    seed: u64,
    options: SimOptions,
) -> Result<(EpidemicTimeSeries, Vec<ExposureEvent>)> {
    let mut sim = Simulation::new(config.clone(), scenario, seed, options)?;
    sim.run_to_end();
    log::debug!(
        "{} seed {seed}: {} days, peak {}",
        scenario.name,
        sim.day(),
        sim.history().iter().map(|d| d.active).max().unwrap_or(0)
    );
    let series = EpidemicTimeSeries {
        meta: meta(&config, scenario, seed),
        days: sim.history().to_vec(),
    };
    let events = sim.events().to_vec();
    Ok((series, events))
}

/// Independent runs over `seeds`, executed on the rayon pool.
pub fn run_batch(config: &CountryConfig, scenario: &Scenario, seeds: &[u64]) -> Result<BatchResult> {
    if seeds.is_empty() {
        return Err(Error::NoSeeds);
    }
    config.validate()?;
    scenario.validate()?;
    let config = Arc::new(config.clone());
    let runs = seeds
        .par_iter()
        .map(|&seed| run_with(config.clone(), scenario, seed, SimOptions::default()).map(|(s, _)| s))
        .collect::<Result<Vec<_>>>()?;
    let summaries = runs.iter().map(EpidemicTimeSeries::summary).collect();
    let envelope = envelope(&runs, |d| d.active);
    Ok(BatchResult {
        runs,
        summaries,
        envelope,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn write_series(series: &EpidemicTimeSeries, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    write_series_to(&series.days, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// The series as CSV; no quoting is needed for integer-only rows.
pub fn write_series_to(days: &[DailyCounts], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "{}", SERIES_HEADER.join(","))?;
    for d in days {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            d.day,
            d.susceptible,
            d.exposed,
            d.infectious,
            d.hospitalized,
            d.active,
            d.recovered,
            d.dead,
            d.new_infections,
            d.abroad
        )?;
    }
    Ok(())
}

pub fn series_csv(days: &[DailyCounts]) -> String {
    let mut buf = Vec::new();
    write_series_to(days, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii")
}

pub fn read_series(path: &Path) -> Result<Vec<DailyCounts>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    let headers = reader.headers()?.clone();
    if headers.iter().ne(SERIES_HEADER) {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::InvalidData, "unexpected series header"),
        ));
    }
    reader.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_events(events: &[ExposureEvent], path: &Path) -> Result<()> {
    let mut out = create(path)?;
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "day,hour,location_id,location_kind,source,target")?;
        for e in events {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                e.day, e.hour, e.location_id.0, e.location_kind, e.source, e.target
            )?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

pub fn write_summaries(summaries: &[RunSummary], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for s in summaries {
        writer.serialize(s)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> CountryConfig {
        CountryConfig {
            house_count: 150,
            ..CountryConfig::default()
        }
    }

    fn scenario() -> Scenario {
        Scenario {
            name: "plain".into(),
            horizon: 60,
            seeds: vec![],
            actions: vec![],
        }
    }

    #[test]
    fn empty_seed_list_is_rejected() {
        assert!(matches!(
            run_batch(&tiny(), &scenario(), &[]),
            Err(Error::NoSeeds)
        ));
    }

    #[test]
    fn single_seed_envelope_is_the_run() {
        let batch = run_batch(&tiny(), &scenario(), &[5]).unwrap();
        let run = &batch.runs[0];
        assert_eq!(batch.envelope.len(), run.days.len());
        for (row, day) in batch.envelope.iter().zip(&run.days) {
            assert_eq!(row.min, day.active);
            assert_eq!(row.max, day.active);
            assert_eq!(row.mean, day.active as f64);
        }
    }

    #[test]
    fn envelope_carries_final_row() {
        let m = SeriesMeta {
            scenario: "x".into(),
            seed: 0,
            config_digest: String::new(),
        };
        let row = |day, active| DailyCounts {
            day,
            active,
            ..DailyCounts::default()
        };
        let a = EpidemicTimeSeries {
            meta: m.clone(),
            days: vec![row(0, 1), row(1, 3), row(2, 5)],
        };
        let b = EpidemicTimeSeries {
            meta: m,
            days: vec![row(0, 1), row(1, 0)],
        };
        let env = envelope(&[a, b], |d| d.active);
        assert_eq!(env.len(), 3);
        assert_eq!((env[2].min, env[2].max, env[2].mean), (0, 5, 2.5));
    }

    #[test]
    fn summary_recomputes_from_rows() {
        let series = run(&tiny(), &scenario(), 9).unwrap();
        let s = series.summary();
        assert_eq!(s.peak_active, series.active().into_iter().max().unwrap());
        assert!(s.total_dead <= s.total_ever_infected);
        assert!(s.peak_active >= 1);
    }

    #[test]
    fn wave_peaks_need_a_dip() {
        let two = [0, 5, 10, 6, 4, 8, 12, 3, 0];
        assert_eq!(wave_peaks(&two, 1, 0.25), vec![2, 6]);
        // 10 -> 9 -> 12 is noise at 25% but a wave at 5%.
        let shallow = [0, 10, 9, 12, 0];
        assert_eq!(wave_peaks(&shallow, 1, 0.25), vec![3]);
        assert_eq!(wave_peaks(&shallow, 1, 0.05), vec![1, 3]);
        // A series cut off while rising has no wave at its end.
        assert_eq!(wave_peaks(&[0, 4, 8, 3, 5, 9], 1, 0.25), vec![2]);
        assert_eq!(wave_peaks(&[0, 4, 4, 4, 1], 1, 0.25), vec![1]);
        assert_eq!(wave_peaks(&[0, 2, 0, 50, 0], 5, 0.25), vec![3]);
        assert!(wave_peaks(&[], 1, 0.25).is_empty());
    }

    #[test]
    fn csv_roundtrip() {
        let series = run(&tiny(), &scenario(), 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.csv");
        write_series(&series, &path).unwrap();
        assert_eq!(read_series(&path).unwrap(), series.days);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(
            "day,susceptible,exposed,infectious,hospitalized,active,recovered,dead,new_infections,abroad\n"
        ));
    }
}
