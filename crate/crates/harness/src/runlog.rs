//! Per-episode training records and their CSV form.
//!
//! CSV is the only log format. Floats are written in shortest round-trip
//! form, so parsing a log back reproduces every value bit-exactly, and two
//! identical runs produce byte-identical files. Wall-clock time is kept in
//! memory and in the run's meta file but deliberately excluded from the
//! CSV so logs stay reproducible. Column layouts are documented in
//! `docs/csv-schema.md`.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("csv line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("csv header is malformed: {0}")]
    Header(String),
}

/// One completed training episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: u32,
    pub steps: u32,
    /// Reward summed over steps (and tasks, for vector rewards), divided by
    /// steps x reward entries.
    pub avg_reward: f64,
    /// Mean over the episode's steps of each task's score.
    pub mean_score: Vec<f64>,
    /// Each task's error at the episode's final step.
    pub final_error: Vec<f64>,
    /// Mean critic loss per head over the episode's executed updates
    /// (NaN while the buffer is still warming up).
    pub critic_loss: Vec<f64>,
    /// Mean actor gradient norm over executed updates (NaN during warmup).
    pub actor_grad_norm: f64,
    /// Not serialized into the CSV.
    pub wall_clock_s: f64,
}

/// Episode-indexed training log for one (setting, seed) run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub n_tasks: usize,
    pub n_heads: usize,
    pub records: Vec<EpisodeRecord>,
}

impl RunLog {
    pub fn new(n_tasks: usize, n_heads: usize) -> Self {
        Self {
            n_tasks,
            n_heads,
            records: Vec::new(),
        }
    }

    pub fn header(n_tasks: usize, n_heads: usize) -> String {
        let mut cols = vec!["episode".to_string(), "steps".to_string(), "avg_reward".to_string()];
        cols.extend((0..n_tasks).map(|t| format!("mean_score_t{t}")));
        cols.extend((0..n_tasks).map(|t| format!("final_error_t{t}")));
        cols.extend((0..n_heads).map(|h| format!("critic_loss_h{h}")));
        cols.push("actor_grad_norm".to_string());
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let mut out = Self::header(self.n_tasks, self.n_heads);
        out.push('\n');
        for r in &self.records {
            let mut fields = vec![r.episode.to_string(), r.steps.to_string(), fmt_f64(r.avg_reward)];
            fields.extend(r.mean_score.iter().map(|v| fmt_f64(*v)));
            fields.extend(r.final_error.iter().map(|v| fmt_f64(*v)));
            fields.extend(r.critic_loss.iter().map(|v| fmt_f64(*v)));
            fields.push(fmt_f64(r.actor_grad_norm));
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, LogError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| LogError::Header("empty file".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        let n_tasks = cols.iter().filter(|c| c.starts_with("mean_score_t")).count();
        let n_heads = cols.iter().filter(|c| c.starts_with("critic_loss_h")).count();
        let expected = 3 + 2 * n_tasks + n_heads + 1;
        if cols.len() != expected || n_tasks == 0 {
            return Err(LogError::Header(format!(
                "unexpected columns: {header}"
            )));
        }
        let mut log = RunLog::new(n_tasks, n_heads);
        for (lineno, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != expected {
                return Err(LogError::Parse {
                    line: lineno + 1,
                    msg: format!("expected {expected} fields, got {}", fields.len()),
                });
            }
            let mut it = fields.into_iter();
            let parse_err = |msg: &str| LogError::Parse {
                line: lineno + 1,
                msg: msg.into(),
            };
            let episode = it
                .next()
                .unwrap()
                .parse()
                .map_err(|_| parse_err("bad episode"))?;
            let steps = it.next().unwrap().parse().map_err(|_| parse_err("bad steps"))?;
            let mut floats: Vec<f64> = Vec::new();
            for f in it {
                floats.push(f.parse().map_err(|_| parse_err("bad float"))?);
            }
            let avg_reward = floats[0];
            let mean_score = floats[1..1 + n_tasks].to_vec();
            let final_error = floats[1 + n_tasks..1 + 2 * n_tasks].to_vec();
            let critic_loss = floats[1 + 2 * n_tasks..1 + 2 * n_tasks + n_heads].to_vec();
            let actor_grad_norm = floats[1 + 2 * n_tasks + n_heads];
            log.records.push(EpisodeRecord {
                episode,
                steps,
                avg_reward,
                mean_score,
                final_error,
                critic_loss,
                actor_grad_norm,
                wall_clock_s: 0.0,
            });
        }
        Ok(log)
    }
}

/// One evaluation round during or after training.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub episode: u32,
    pub success_rate: f64,
    pub mean_error: Vec<f64>,
    pub median_error: Vec<f64>,
    pub mean_score: Vec<f64>,
}

pub fn eval_header(n_tasks: usize) -> String {
    let mut cols = vec!["episode".to_string(), "success_rate".to_string()];
    cols.extend((0..n_tasks).map(|t| format!("mean_error_t{t}")));
    cols.extend((0..n_tasks).map(|t| format!("median_error_t{t}")));
    cols.extend((0..n_tasks).map(|t| format!("mean_score_t{t}")));
    cols.join(",")
}

pub fn evals_to_csv(n_tasks: usize, evals: &[EvalRecord]) -> String {
    let mut out = eval_header(n_tasks);
    out.push('\n');
    for e in evals {
        let mut fields = vec![e.episode.to_string(), fmt_f64(e.success_rate)];
        fields.extend(e.mean_error.iter().map(|v| fmt_f64(*v)));
        fields.extend(e.median_error.iter().map(|v| fmt_f64(*v)));
        fields.extend(e.mean_score.iter().map(|v| fmt_f64(*v)));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn evals_from_csv(text: &str) -> Result<Vec<EvalRecord>, LogError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| LogError::Header("empty file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let n_tasks = cols.iter().filter(|c| c.starts_with("mean_error_t")).count();
    if cols.len() != 2 + 3 * n_tasks || n_tasks == 0 {
        return Err(LogError::Header(format!("unexpected columns: {header}")));
    }
    let mut out = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 + 3 * n_tasks {
            return Err(LogError::Parse {
                line: lineno + 1,
                msg: "wrong field count".into(),
            });
        }
        let parse = |s: &str| -> Result<f64, LogError> {
            s.parse().map_err(|_| LogError::Parse {
                line: lineno + 1,
                msg: format!("bad float '{s}'"),
            })
        };
        let episode = fields[0].parse().map_err(|_| LogError::Parse {
            line: lineno + 1,
            msg: "bad episode".into(),
        })?;
        let success_rate = parse(fields[1])?;
        let mut rest = Vec::new();
        for f in &fields[2..] {
            rest.push(parse(f)?);
        }
        out.push(EvalRecord {
            episode,
            success_rate,
            mean_error: rest[..n_tasks].to_vec(),
            median_error: rest[n_tasks..2 * n_tasks].to_vec(),
            mean_score: rest[2 * n_tasks..].to_vec(),
        });
    }
    Ok(out)
}

/// Shortest round-trip decimal form.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}
