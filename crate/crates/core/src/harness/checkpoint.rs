//! Checkpoint file: `DHTM` magic, a little-endian `u32` format version, then
//! the experiment config, trial position, environment and agent sections.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::agent::Agent;
use crate::codec;
use crate::encoder::Stage;
use crate::env::{Pinball, PinballConfig};
use crate::error::{Error, Result};

use super::{ExperimentConfig, Trial};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"DHTM";
const MAX_TEXT: usize = 1 << 20;

fn write_text<W: Write>(w: &mut W, text: &str) -> Result<()> {
    codec::write_bytes(w, text.as_bytes())
}

fn read_text<R: Read>(r: &mut R) -> Result<String> {
    String::from_utf8(codec::read_bytes(r, MAX_TEXT)?).map_err(|e| Error::Parse(e.to_string()))
}

pub(super) fn save(trial: &Trial, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(CHECKPOINT_VERSION)?;
    // the output location is not part of the model state
    let config = ExperimentConfig { out_dir: None, ..trial.config.clone() };
    write_text(&mut w, &config.to_toml()?)?;
    codec::write_u64(&mut w, trial.seed)?;
    codec::write_usize(&mut w, trial.episodes_done)?;
    let env = toml::to_string(trial.env.config()).map_err(|e| Error::Config(e.to_string()))?;
    write_text(&mut w, &env)?;
    codec::write_rng(&mut w, trial.env.rng())?;
    trial.agent.write_to(&mut w)?;
    w.flush()?;
    Ok(())
}

pub(super) fn load(path: &Path) -> Result<Trial> {
    let mut r = BufReader::new(File::open(path)?);
    read_trial(&mut r)
}

fn read_trial<R: Read>(r: &mut R) -> Result<Trial> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| Error::Parse("file too short for a checkpoint".into()))?;
    if &magic != MAGIC {
        return Err(Error::Parse("not a checkpoint file".into()));
    }
    let version = r.read_u32::<LittleEndian>().map_err(|_| Error::Parse("truncated header".into()))?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion { found: version, expected: CHECKPOINT_VERSION });
    }
    let parse = |e: Error| match e {
        Error::Io(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => Error::Parse("truncated checkpoint".into()),
        other => other,
    };
    let config = ExperimentConfig::from_toml(&read_text(r).map_err(parse)?)
        .map_err(|e| Error::Parse(format!("embedded config: {e}")))?;
    let seed = codec::read_u64(r).map_err(parse)?;
    let episodes_done = codec::read_usize(r).map_err(parse)?;
    let env_config: PinballConfig =
        toml::from_str(&read_text(r).map_err(parse)?).map_err(|e| Error::Parse(format!("environment: {e}")))?;
    let env = Pinball::new(env_config, codec::read_rng(r).map_err(parse)?)?;
    let agent = Agent::read_from(r).map_err(parse)?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Parse("trailing bytes after checkpoint".into()));
    }
    Ok(Trial { config, seed, episodes_done, agent, env })
}

/// Human-readable summary of a checkpoint.
pub fn inspect(path: &Path) -> Result<String> {
    let trial = load(path)?;
    Ok(report(&trial))
}

pub(super) fn report(trial: &Trial) -> String {
    let agent = &trial.agent;
    let memory = agent.memory();
    let t = memory.topology();
    let mut out = String::new();
    let _ = writeln!(out, "seed {}  episodes {}", trial.seed, trial.episodes_done);
    let _ = writeln!(
        out,
        "topology: {} variables x {} states x {} cells, context {} of {} actions",
        t.n_vars, t.n_obs_states, t.cells_per_column, t.context_field_size, t.n_actions
    );
    let per_var = memory.segments_per_var();
    let _ = writeln!(out, "segments: {}", memory.segment_count());
    for (k, n) in per_var.iter().enumerate() {
        let _ = writeln!(out, "  var {k}: {n}");
    }
    let mut bins = [0usize; 10];
    for seg in memory.segments() {
        bins[((seg.factor * 10.0) as usize).min(9)] += 1;
    }
    let _ = writeln!(out, "factor histogram:");
    for (i, n) in bins.iter().enumerate() {
        let _ = writeln!(out, "  [{:.1}, {:.1}{} {n}", i as f64 / 10.0, (i + 1) as f64 / 10.0, if i == 9 { "]" } else { ")" });
    }
    let norms = agent.sr().row_norms();
    let (min, max) = norms.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let mean = norms.iter().sum::<f64>() / norms.len() as f64;
    let _ = writeln!(out, "sr row norms: min {min:.4} mean {mean:.4} max {max:.4}");
    let enc = agent.encoder();
    let stage = match enc.stage() {
        Stage::Newborn => format!("newborn ({} steps left)", enc.newborn_remaining()),
        Stage::Adult => "adult".to_string(),
    };
    let _ = writeln!(out, "encoder: {stage}");
    out
}
