//! Multi-seed, multi-setting experiment execution and aggregation.
//!
//! Independent (setting, seed) runs execute on a small worker pool; each
//! run is internally single-threaded. Aggregation afterward computes the
//! per-episode mean and population standard deviation over seeds of the
//! average-reward and per-task score curves, aligned by episode. Episodes
//! missing from every seed (e.g. after an aborted run) aggregate to NaN,
//! the explicit gap marker.

use crate::config::{AlgorithmTag, TrainConfig};
use crate::runlog::{fmt_f64, RunLog};
use crate::trainer::{run_training, RunOutcome};
use crate::HarnessError;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

/// Mean/std curves for one setting, aligned by episode.
#[derive(Debug, Clone, PartialEq)]
pub struct SettingCurves {
    pub setting: String,
    pub n_tasks: usize,
    pub n_seeds: usize,
    pub episodes: Vec<u32>,
    pub reward_mean: Vec<f64>,
    pub reward_std: Vec<f64>,
    /// `[task][episode index]`
    pub score_mean: Vec<Vec<f64>>,
    pub score_std: Vec<Vec<f64>>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Aggregate per-episode curves over seeds.
pub fn aggregate(setting: &str, logs: &[&RunLog]) -> SettingCurves {
    assert!(!logs.is_empty(), "aggregate needs at least one log");
    let n_tasks = logs[0].n_tasks;
    let max_len = logs.iter().map(|l| l.records.len()).max().unwrap_or(0);
    let mut episodes = Vec::with_capacity(max_len);
    let mut reward_mean = Vec::with_capacity(max_len);
    let mut reward_std = Vec::with_capacity(max_len);
    let mut score_mean = vec![Vec::with_capacity(max_len); n_tasks];
    let mut score_std = vec![Vec::with_capacity(max_len); n_tasks];
    for i in 0..max_len {
        episodes.push((i + 1) as u32);
        let rewards: Vec<f64> = logs
            .iter()
            .filter_map(|l| l.records.get(i))
            .map(|r| r.avg_reward)
            .collect();
        let (m, s) = mean_std(&rewards);
        reward_mean.push(m);
        reward_std.push(s);
        for t in 0..n_tasks {
            let scores: Vec<f64> = logs
                .iter()
                .filter_map(|l| l.records.get(i))
                .map(|r| r.mean_score[t])
                .collect();
            let (m, s) = mean_std(&scores);
            score_mean[t].push(m);
            score_std[t].push(s);
        }
    }
    SettingCurves {
        setting: setting.to_string(),
        n_tasks,
        n_seeds: logs.len(),
        episodes,
        reward_mean,
        reward_std,
        score_mean,
        score_std,
    }
}

impl SettingCurves {
    pub fn header(n_tasks: usize) -> String {
        let mut cols = vec![
            "episode".to_string(),
            "reward_mean".to_string(),
            "reward_std".to_string(),
        ];
        for t in 0..n_tasks {
            cols.push(format!("score_t{t}_mean"));
            cols.push(format!("score_t{t}_std"));
        }
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let mut out = Self::header(self.n_tasks);
        out.push('\n');
        for (i, ep) in self.episodes.iter().enumerate() {
            let mut fields = vec![
                ep.to_string(),
                fmt_f64(self.reward_mean[i]),
                fmt_f64(self.reward_std[i]),
            ];
            for t in 0..self.n_tasks {
                fields.push(fmt_f64(self.score_mean[t][i]));
                fields.push(fmt_f64(self.score_std[t][i]));
            }
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(setting: &str, text: &str) -> Result<Self, HarnessError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| HarnessError::Malformed {
            what: "aggregate csv",
            msg: "empty file".into(),
        })?;
        let cols: Vec<&str> = header.split(',').collect();
        let n_tasks = cols.iter().filter(|c| c.ends_with("_mean") && c.starts_with("score_")).count();
        if cols.len() != 3 + 2 * n_tasks {
            return Err(HarnessError::Malformed {
                what: "aggregate csv",
                msg: format!("unexpected header: {header}"),
            });
        }
        let mut curves = SettingCurves {
            setting: setting.to_string(),
            n_tasks,
            n_seeds: 0,
            episodes: Vec::new(),
            reward_mean: Vec::new(),
            reward_std: Vec::new(),
            score_mean: vec![Vec::new(); n_tasks],
            score_std: vec![Vec::new(); n_tasks],
        };
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 + 2 * n_tasks {
                return Err(HarnessError::Malformed {
                    what: "aggregate csv",
                    msg: format!("bad row: {line}"),
                });
            }
            let parse = |s: &str| -> Result<f64, HarnessError> {
                s.parse().map_err(|_| HarnessError::Malformed {
                    what: "aggregate csv",
                    msg: format!("bad float '{s}'"),
                })
            };
            curves.episodes.push(fields[0].parse().map_err(|_| HarnessError::Malformed {
                what: "aggregate csv",
                msg: format!("bad episode '{}'", fields[0]),
            })?);
            curves.reward_mean.push(parse(fields[1])?);
            curves.reward_std.push(parse(fields[2])?);
            for t in 0..n_tasks {
                curves.score_mean[t].push(parse(fields[3 + 2 * t])?);
                curves.score_std[t].push(parse(fields[4 + 2 * t])?);
            }
        }
        Ok(curves)
    }
}

/// Outcome of one matrix cell; failures are kept, not fatal.
#[derive(Debug)]
pub struct MatrixReport {
    pub curves: Vec<SettingCurves>,
    pub completed: Vec<RunOutcome>,
    pub failures: Vec<(AlgorithmTag, u64, HarnessError)>,
    pub agg_files: Vec<PathBuf>,
}

/// Run every (setting, seed) cell, then aggregate per setting and write
/// `agg_<setting>.csv` files into `outdir`.
pub fn run_matrix(cfg: &TrainConfig, outdir: &Path) -> Result<MatrixReport, HarnessError> {
    std::fs::create_dir_all(outdir).map_err(|e| HarnessError::io(outdir, e))?;
    let cells: Vec<(AlgorithmTag, u64)> = cfg
        .settings
        .iter()
        .flat_map(|&s| cfg.seeds.iter().map(move |&seed| (s, seed)))
        .collect();

    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(cells.len().max(1));
    let next = Mutex::new(0usize);
    let results: Mutex<Vec<Option<Result<RunOutcome, HarnessError>>>> =
        Mutex::new((0..cells.len()).map(|_| None).collect());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = {
                    let mut guard = next.lock().unwrap();
                    let idx = *guard;
                    if idx >= cells.len() {
                        return;
                    }
                    *guard += 1;
                    idx
                };
                let (setting, seed) = cells[idx];
                let result = run_training(cfg, setting, seed, outdir);
                results.lock().unwrap()[idx] = Some(result);
            });
        }
    });

    let mut completed = Vec::new();
    let mut failures = Vec::new();
    for (cell, result) in cells.iter().zip(results.into_inner().unwrap()) {
        match result.expect("worker filled every slot") {
            Ok(outcome) => completed.push(outcome),
            Err(err) => {
                eprintln!("run {}_{} failed: {err}", cell.0, cell.1);
                failures.push((cell.0, cell.1, err));
            }
        }
    }

    let mut curves = Vec::new();
    let mut agg_files = Vec::new();
    for &setting in &cfg.settings {
        let logs: Vec<&RunLog> = completed
            .iter()
            .filter(|o| o.setting == setting)
            .map(|o| &o.log)
            .collect();
        if logs.is_empty() {
            eprintln!("setting {setting}: no completed runs, skipping aggregation");
            continue;
        }
        let agg = aggregate(setting.as_str(), &logs);
        let path = outdir.join(format!("agg_{setting}.csv"));
        std::fs::write(&path, agg.to_csv()).map_err(|e| HarnessError::io(&path, e))?;
        agg_files.push(path);
        curves.push(agg);
    }

    Ok(MatrixReport {
        curves,
        completed,
        failures,
        agg_files,
    })
}
