//! Plot-data emission: pivot per-setting aggregates into one file per
//! figure panel (average reward, plus one per task's mean score), columns
//! `episode, <setting>_mean, <setting>_std, ...` — ready for any plotting
//! tool.

use crate::matrix::SettingCurves;
use crate::runlog::fmt_f64;
use crate::HarnessError;
use std::path::{Path, PathBuf};

/// Column layout check: one episode column plus mean/std per setting.
pub fn panel_column_count(n_settings: usize) -> usize {
    1 + 2 * n_settings
}

fn panel_csv(
    curves: &[SettingCurves],
    pick: impl Fn(&SettingCurves, usize) -> (f64, f64),
) -> String {
    // Union of episode grids, ascending; a setting missing an episode
    // contributes NaN gap markers.
    let mut episodes: Vec<u32> = curves
        .iter()
        .flat_map(|c| c.episodes.iter().copied())
        .collect();
    episodes.sort_unstable();
    episodes.dedup();

    let mut header = vec!["episode".to_string()];
    for c in curves {
        header.push(format!("{}_mean", c.setting));
        header.push(format!("{}_std", c.setting));
    }
    let mut out = header.join(",");
    out.push('\n');
    for &ep in &episodes {
        let mut fields = vec![ep.to_string()];
        for c in curves {
            match c.episodes.iter().position(|&e| e == ep) {
                Some(i) => {
                    let (m, s) = pick(c, i);
                    fields.push(fmt_f64(m));
                    fields.push(fmt_f64(s));
                }
                None => {
                    fields.push("NaN".into());
                    fields.push("NaN".into());
                }
            }
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Emit one file per panel from in-memory aggregates. Returns the paths.
pub fn emit_plots(curves: &[SettingCurves], outdir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(outdir).map_err(|e| HarnessError::io(outdir, e))?;
    let mut written = Vec::new();

    let reward = panel_csv(curves, |c, i| (c.reward_mean[i], c.reward_std[i]));
    let path = outdir.join("plot_avg_reward.csv");
    std::fs::write(&path, reward).map_err(|e| HarnessError::io(&path, e))?;
    written.push(path);

    let n_tasks = curves.iter().map(|c| c.n_tasks).max().unwrap_or(0);
    for t in 0..n_tasks {
        let panel = panel_csv(curves, |c, i| {
            if t < c.n_tasks {
                (c.score_mean[t][i], c.score_std[t][i])
            } else {
                (f64::NAN, f64::NAN)
            }
        });
        let path = outdir.join(format!("plot_score_task{t}.csv"));
        std::fs::write(&path, panel).map_err(|e| HarnessError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Read every `agg_<setting>.csv` in a run directory (sorted by name for a
/// deterministic column order) and emit the panels next to them.
pub fn emit_plots_from_dir(run_dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let mut agg_files: Vec<PathBuf> = std::fs::read_dir(run_dir)
        .map_err(|e| HarnessError::io(run_dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map(|n| n.starts_with("agg_") && n.ends_with(".csv"))
                .unwrap_or(false)
        })
        .collect();
    agg_files.sort();
    if agg_files.is_empty() {
        return Err(HarnessError::Malformed {
            what: "plots",
            msg: format!(
                "no agg_<setting>.csv files in {} (run `matrix` first)",
                run_dir.display()
            ),
        });
    }
    let mut curves = Vec::new();
    for path in &agg_files {
        let name = path.file_name().unwrap().to_str().unwrap();
        let setting = name
            .trim_start_matches("agg_")
            .trim_end_matches(".csv")
            .to_string();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        curves.push(SettingCurves::from_csv(&setting, &text)?);
    }
    emit_plots(&curves, run_dir)
}

/// Parse a panel file back into `(episodes, per-setting mean/std columns)`.
pub fn parse_panel(text: &str) -> Result<(Vec<u32>, Vec<String>, Vec<Vec<f64>>), HarnessError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| HarnessError::Malformed {
        what: "plot panel",
        msg: "empty file".into(),
    })?;
    let cols: Vec<String> = header.split(',').map(|s| s.to_string()).collect();
    let mut episodes = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); cols.len() - 1];
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(HarnessError::Malformed {
                what: "plot panel",
                msg: format!("bad row: {line}"),
            });
        }
        episodes.push(fields[0].parse().map_err(|_| HarnessError::Malformed {
            what: "plot panel",
            msg: format!("bad episode '{}'", fields[0]),
        })?);
        for (i, f) in fields[1..].iter().enumerate() {
            values[i].push(f.parse().map_err(|_| HarnessError::Malformed {
                what: "plot panel",
                msg: format!("bad float '{f}'"),
            })?);
        }
    }
    Ok((episodes, cols, values))
}
