//! End-to-end runs through the library: CSV contents, determinism and
//! checkpoint resume.

use dhtm::agent::AgentConfig;
use dhtm::encoder::EncoderConfig;
use dhtm::env::PinballConfig;
use dhtm::harness::{self, ExperimentConfig, Trial, EPISODE_COLUMNS, STEP_COLUMNS};
use dhtm::tm::{MemoryConfig, Topology};

fn small() -> ExperimentConfig {
    let env = PinballConfig { resolution: [25, 18], max_steps: 6, ..PinballConfig::default() };
    ExperimentConfig {
        episodes: 5,
        seeds: vec![2, 9],
        encoder: EncoderConfig {
            input_dim: env.input_dim(),
            num_neurons: 32,
            blocks: 2,
            newborn_steps: 20,
            target_rf_size: 20,
            ..EncoderConfig::default()
        },
        memory: MemoryConfig {
            topology: Topology { n_vars: 2, n_obs_states: 16, cells_per_column: 2, context_field_size: 3, n_actions: 4 },
            ..MemoryConfig::default()
        },
        agent: AgentConfig { horizon: 3, ..AgentConfig::default() },
        env,
        ..ExperimentConfig::default()
    }
}

fn records(path: &std::path::Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let header = reader.headers().unwrap().iter().map(String::from).collect();
    let rows = reader.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn step_rows_agree_with_episode_records() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small();
    config.out_dir = Some(dir.path().to_path_buf());
    let (_, trials) = harness::run(&config).unwrap();

    let (header, rows) = records(&dir.path().join("steps.csv"));
    assert_eq!(header, STEP_COLUMNS);
    let total: usize = trials.iter().flat_map(|t| &t.episodes).map(|e| e.steps.len()).sum();
    assert_eq!(rows.len(), total);
    let mut rows = rows.iter();
    for t in &trials {
        for (e, ep) in t.episodes.iter().enumerate() {
            for s in &ep.steps {
                let row = rows.next().unwrap();
                assert_eq!(row[0], t.seed.to_string());
                assert_eq!(row[1], (e + 1).to_string());
                assert_eq!(row[2], s.step.to_string());
                assert_eq!(row[3], s.action.to_string());
                assert_eq!(row[4].parse::<f64>().unwrap(), s.reward);
                assert_eq!(row[9].parse::<f64>().unwrap(), ep.episode_return);
                assert_eq!(row[10], s.segments.to_string());
            }
        }
    }

    let (header, rows) = records(&dir.path().join("episodes.csv"));
    assert_eq!(&header[..EPISODE_COLUMNS.len()], &EPISODE_COLUMNS);
    assert_eq!(header.len(), EPISODE_COLUMNS.len() + 4 * config.seeds.len());
    assert_eq!(rows.len(), config.episodes);
    let (header, rows) = records(&dir.path().join("timing.csv"));
    assert_eq!(header, ["seed", "episode", "wall_ms"]);
    assert_eq!(rows.len(), config.episodes * config.seeds.len());
}

#[test]
fn identical_configs_give_identical_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut config = small();
    config.switch_episode = Some(3);
    for dir in [&a, &b] {
        config.out_dir = Some(dir.path().to_path_buf());
        harness::run(&config).unwrap();
    }
    for f in ["steps.csv", "episodes.csv", "checkpoint_seed2.bin", "checkpoint_seed9.bin"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }

    // a different seed changes the trajectories
    let c = tempfile::tempdir().unwrap();
    config.seeds = vec![3, 9];
    config.out_dir = Some(c.path().to_path_buf());
    harness::run(&config).unwrap();
    assert_ne!(std::fs::read(a.path().join("steps.csv")).unwrap(), std::fs::read(c.path().join("steps.csv")).unwrap());
}

#[test]
fn resumed_checkpoint_matches_an_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small();
    config.switch_episode = Some(4);
    let mut whole = Trial::new(config.clone(), 7).unwrap();
    let mut first = Trial::new(config, 7).unwrap();
    for _ in 0..3 {
        whole.run_episode().unwrap();
        first.run_episode().unwrap();
    }
    let path = dir.path().join("mid.bin");
    first.save(&path).unwrap();
    drop(first);
    let mut resumed = Trial::load(&path).unwrap();
    for _ in 0..3 {
        assert_eq!(whole.run_episode().unwrap().steps, resumed.run_episode().unwrap().steps);
    }
    assert!(resumed.switched());
    let report = harness::inspect(&path).unwrap();
    assert!(report.starts_with("seed 7  episodes 3\n"), "{report}");
}
