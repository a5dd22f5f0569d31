use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use crate::agent::SURPRISE_OFFSETS;
use crate::env::Frame;
use crate::error::{Error, Result};

use super::{ExperimentConfig, TrialOutput};

pub const STEP_COLUMNS: [&str; 11] = [
    "seed",
    "episode",
    "step",
    "action",
    "reward",
    "surprise_1",
    "surprise_2",
    "surprise_3",
    "memory_surprise",
    "episode_return",
    "segments",
];

/// Leading columns of `episodes.csv`; per-seed columns follow.
pub const EPISODE_COLUMNS: [&str; 6] =
    ["episode", "switched", "mean_return", "mean_surprise_1", "mean_surprise_2", "mean_surprise_3"];

const PER_SEED: [&str; 4] = ["return", "surprise_1", "length", "segments"];

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub(super) struct Writers {
    steps: csv::Writer<BufWriter<File>>,
    episodes: csv::Writer<BufWriter<File>>,
    timing: csv::Writer<BufWriter<File>>,
}

impl Writers {
    /// Creates the output directory and every metrics file up front so an
    /// unusable location fails before any trial starts.
    pub(super) fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)
            .map_err(|e| Error::Config(format!("cannot create output directory {}: {e}", dir.display())))?;
        let open = |name: &str| -> Result<csv::Writer<BufWriter<File>>> {
            let path = dir.join(name);
            let file = File::create(&path)
                .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
            Ok(csv::Writer::from_writer(BufWriter::new(file)))
        };
        Ok(Self { steps: open("steps.csv")?, episodes: open("episodes.csv")?, timing: open("timing.csv")? })
    }

    pub(super) fn write(&mut self, config: &ExperimentConfig, trials: &[TrialOutput]) -> Result<()> {
        self.write_steps(trials)?;
        self.write_episodes(config, trials)?;
        self.write_timing(trials)?;
        for w in [&mut self.steps, &mut self.episodes, &mut self.timing] {
            w.flush()?;
        }
        Ok(())
    }

    fn write_steps(&mut self, trials: &[TrialOutput]) -> Result<()> {
        self.steps.write_record(STEP_COLUMNS).map_err(csv_err)?;
        for t in trials {
            for (e, ep) in t.episodes.iter().enumerate() {
                for s in &ep.steps {
                    let mut row = vec![
                        t.seed.to_string(),
                        (e + 1).to_string(),
                        s.step.to_string(),
                        s.action.to_string(),
                        s.reward.to_string(),
                    ];
                    row.extend(s.surprise.iter().map(|&x| opt(x)));
                    row.push(s.memory_surprise.to_string());
                    row.push(ep.episode_return.to_string());
                    row.push(s.segments.to_string());
                    self.steps.write_record(&row).map_err(csv_err)?;
                }
            }
        }
        Ok(())
    }

    fn write_episodes(&mut self, config: &ExperimentConfig, trials: &[TrialOutput]) -> Result<()> {
        let mut header: Vec<String> = EPISODE_COLUMNS.iter().map(|s| s.to_string()).collect();
        for t in trials {
            header.extend(PER_SEED.iter().map(|c| format!("{c}_seed{}", t.seed)));
        }
        self.episodes.write_record(&header).map_err(csv_err)?;
        for e in 0..config.episodes {
            let switched = config.switch_episode.is_some_and(|s| e >= s);
            let mut row = vec![(e + 1).to_string(), u8::from(switched).to_string()];
            row.push(opt(mean(trials.iter().map(|t| t.episodes[e].episode_return))));
            for offset in 1..=SURPRISE_OFFSETS {
                row.push(opt(mean(trials.iter().filter_map(|t| t.episodes[e].mean_surprise(offset)))));
            }
            for t in trials {
                let ep = &t.episodes[e];
                row.push(ep.episode_return.to_string());
                row.push(opt(ep.mean_surprise(1)));
                row.push(ep.steps.len().to_string());
                row.push(ep.steps.last().map(|s| s.segments.to_string()).unwrap_or_default());
            }
            self.episodes.write_record(&row).map_err(csv_err)?;
        }
        Ok(())
    }

    fn write_timing(&mut self, trials: &[TrialOutput]) -> Result<()> {
        self.timing.write_record(["seed", "episode", "wall_ms"]).map_err(csv_err)?;
        for t in trials {
            for (e, ep) in t.episodes.iter().enumerate() {
                let ms = ep.elapsed.as_secs_f64() * 1e3;
                self.timing
                    .write_record([t.seed.to_string(), (e + 1).to_string(), format!("{ms:.3}")])
                    .map_err(csv_err)?;
            }
        }
        Ok(())
    }
}

pub(super) fn write_frame(dir: &Path, seed: u64, episode: usize, step: usize, frame: &Frame) -> Result<()> {
    let dir = dir.join(format!("seed{seed}"));
    fs::create_dir_all(&dir)?;
    fs::write(dir.join(format!("ep{episode:04}_step{step:02}.pgm")), frame.to_pgm())?;
    Ok(())
}
