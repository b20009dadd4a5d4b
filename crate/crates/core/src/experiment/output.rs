use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{io_err, BaselineResult, ExperimentError, ExperimentReport};
use crate::cem::{EpochStats, StepRecord};
use crate::kpi::KpiVector;

const EPOCHS: &str = "epochs.csv";
const STEPS: &str = "steps.csv";
const KPIS: &str = "kpis.csv";
pub const PLOT_REWARDS_FILE: &str = "rewards.dat";

fn epoch_header() -> Vec<String> {
    ["epoch", "p25", "median", "mean", "p75", "baseline", "best_reward", "best_action"]
        .map(String::from)
        .to_vec()
}

fn step_header() -> Vec<String> {
    let mut h: Vec<String> = [
        "epoch",
        "candidate",
        "origin",
        "action",
        "reward",
        "constraint_ok",
        "retries_used",
        "session_seed",
    ]
    .map(String::from)
    .to_vec();
    h.extend(KpiVector::NAMES.iter().map(|s| s.to_string()));
    h
}

fn kpi_header() -> Vec<String> {
    let mut h = vec!["epoch".to_string()];
    for n in KpiVector::NAMES {
        h.push(n.to_string());
        h.push(format!("baseline_{n}"));
    }
    h
}

type CsvOut = csv::Writer<BufWriter<File>>;

/// Append-only writers for the per-epoch CSV files.
pub(super) struct Outputs {
    pub dir: PathBuf,
    epochs: CsvOut,
    steps: CsvOut,
    kpis: CsvOut,
}

fn open_append(path: &Path) -> Result<CsvOut, ExperimentError> {
    let f = OpenOptions::new().append(true).open(path).map_err(io_err(path))?;
    Ok(csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(f)))
}

fn create_with_header(path: &Path, header: &[String]) -> Result<(), ExperimentError> {
    let f = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(f));
    w.write_record(header)?;
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Rewrites `path` keeping the header and rows whose first column (the
/// epoch) is below `keep_below`.
fn truncate_epochs(path: &Path, keep_below: u64) -> Result<(), ExperimentError> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let rows: Vec<csv::StringRecord> = r
        .records()
        .filter_map(|rec| match rec {
            Ok(rec) => match rec.get(0).and_then(|e| e.parse::<u64>().ok()) {
                Some(e) if e < keep_below => Some(Ok(rec)),
                _ => None,
            },
            Err(e) => Some(Err(e)),
        })
        .collect::<Result<_, _>>()?;
    let f = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(f));
    w.write_record(&header)?;
    for row in &rows {
        w.write_record(row)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self, ExperimentError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        create_with_header(&dir.join(EPOCHS), &epoch_header())?;
        create_with_header(&dir.join(STEPS), &step_header())?;
        create_with_header(&dir.join(KPIS), &kpi_header())?;
        Self::open(dir)
    }

    pub fn reopen(dir: &Path, completed_epochs: u64) -> Result<Self, ExperimentError> {
        for f in [EPOCHS, STEPS, KPIS] {
            truncate_epochs(&dir.join(f), completed_epochs)?;
        }
        Self::open(dir)
    }

    fn open(dir: &Path) -> Result<Self, ExperimentError> {
        Ok(Self {
            dir: dir.to_path_buf(),
            epochs: open_append(&dir.join(EPOCHS))?,
            steps: open_append(&dir.join(STEPS))?,
            kpis: open_append(&dir.join(KPIS))?,
        })
    }

    pub fn write_baseline(&self, b: &BaselineResult) -> Result<(), ExperimentError> {
        write_baseline_csv(&self.dir, b)
    }

    pub fn append_epoch(
        &mut self,
        s: &EpochStats,
        steps: &[StepRecord],
        kpi_mean: &KpiVector,
        baseline_kpis: &KpiVector,
    ) -> Result<(), ExperimentError> {
        self.epochs.write_record([
            s.epoch.to_string(),
            s.p25.to_string(),
            s.median.to_string(),
            s.mean.to_string(),
            s.p75.to_string(),
            s.baseline.to_string(),
            s.best_reward.to_string(),
            s.best_action.to_canonical_json(),
        ])?;
        for st in steps {
            let r = &st.result;
            let mut row = vec![
                st.epoch.to_string(),
                st.candidate.to_string(),
                st.origin.as_str().to_string(),
                st.action.to_canonical_json(),
                r.reward.to_string(),
                r.constraint_ok.to_string(),
                r.retries_used.to_string(),
                r.session_seed.to_string(),
            ];
            row.extend(r.kpis.values().iter().map(f64::to_string));
            self.steps.write_record(&row)?;
        }
        let mut row = vec![s.epoch.to_string()];
        for (m, b) in kpi_mean.values().iter().zip(baseline_kpis.values()) {
            row.push(m.to_string());
            row.push(b.to_string());
        }
        self.kpis.write_record(&row)?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), ExperimentError> {
        for w in [&mut self.epochs, &mut self.steps, &mut self.kpis] {
            w.flush().map_err(io_err(&self.dir))?;
        }
        Ok(())
    }

    pub fn write_final(&self, report: &ExperimentReport) -> Result<(), ExperimentError> {
        #[derive(Serialize)]
        struct Summary<'a> {
            seed: u64,
            completed_epochs: u64,
            baseline: f64,
            first_median_at_or_above_baseline: Option<u64>,
            first_p25_at_or_above_baseline: Option<u64>,
            final_best: &'a crate::action::ParameterSet,
            final_epoch_median: Option<f64>,
            best_so_far: &'a Option<super::BestSoFar>,
        }
        write_json_atomic(&self.dir.join("best_params.json"), &report.final_best)?;
        write_json_atomic(
            &self.dir.join("summary.json"),
            &Summary {
                seed: report.seed,
                completed_epochs: report.completed_epochs,
                baseline: report.baseline,
                first_median_at_or_above_baseline: report.milestones.first_median_at_or_above_baseline,
                first_p25_at_or_above_baseline: report.milestones.first_p25_at_or_above_baseline,
                final_best: &report.final_best,
                final_epoch_median: report.epochs.last().map(|e| e.median),
                best_so_far: &report.best_so_far,
            },
        )?;
        write_json_atomic(&self.dir.join("report.json"), report)
    }
}

/// Writes pretty JSON to a sibling temp file and renames it into place.
pub(super) fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<(), ExperimentError> {
    let tmp = path.with_extension("json.tmp");
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    {
        let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(text.as_bytes()).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Writes whitespace-delimited gnuplot data into `dir`: `rewards.dat` and
/// one `kpi_<name>.dat` per KPI. Returns the written paths.
pub fn emit_plot_data(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    let mut text = String::from("# epoch p25 median mean p75 baseline\n");
    for e in &report.epochs {
        text.push_str(&format!(
            "{} {} {} {} {} {}\n",
            e.epoch, e.p25, e.median, e.mean, e.p75, e.baseline
        ));
    }
    let path = dir.join(PLOT_REWARDS_FILE);
    fs::write(&path, text).map_err(io_err(&path))?;
    written.push(path);
    let base = report.baseline_kpis.values();
    for (k, name) in KpiVector::NAMES.iter().enumerate() {
        let mut text = format!("# epoch population_mean baseline ({name})\n");
        for (e, m) in report.epochs.iter().zip(&report.kpi_means) {
            text.push_str(&format!("{} {} {}\n", e.epoch, m.values()[k], base[k]));
        }
        let path = dir.join(format!("kpi_{name}.dat"));
        fs::write(&path, text).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}

/// Writes `baseline.csv`: one row per SME session.
pub fn write_baseline_csv(dir: &Path, b: &BaselineResult) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join("baseline.csv");
    let mut w = csv::Writer::from_path(&path)?;
    let mut h = vec!["session".to_string(), "session_seed".into(), "reward".into(), "constraint_ok".into()];
    h.extend(KpiVector::NAMES.iter().map(|s| s.to_string()));
    w.write_record(&h)?;
    for i in 0..b.rewards.len() {
        let mut row = vec![
            i.to_string(),
            b.seeds[i].to_string(),
            b.rewards[i].to_string(),
            b.constraint_ok[i].to_string(),
        ];
        row.extend(b.kpi_table[i].values().iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(())
}
