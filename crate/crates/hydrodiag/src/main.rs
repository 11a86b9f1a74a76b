use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use hydrodiag::config::PipelineConfig;
use hydrodiag::formats::{
    load_csv, load_reference_csv, save_reference_csv, write_assignment_csv, write_embedding_csv, write_features_csv,
    write_scores_csv, AssignmentSidecar,
};
use hydrodiag::pipeline::{embedded_points, ensure_bank_current, score_new_data, test_summary, LabelOutcome, Pipeline, RunOutcome};
use hydrodiag::state::{state_labels, LabelOverrides, ProjectState, Stage};
use hydrodiag_core::cluster::precision;
use hydrodiag_core::ingest::{hpp_fixture, synth_generate, SynthConfig};

#[derive(Parser)]
#[command(name = "hydrodiag", version, about = "Condition monitoring by clustering operating states and per-state autoencoders")]
struct Cli {
    /// Project state file.
    #[arg(long, short, global = true, default_value = "project.json")]
    state: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and its reference regime labels.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Reference labels (`row_id,label`).
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Generator settings as JSON; defaults to the two-regime plant fixture.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Load, clean, normalize and split a dataset into a new project.
    Ingest {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the pipeline, starting a project or resuming the existing one.
    Run {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Stop after clustering so labels can be applied.
        #[arg(long)]
        pause: bool,
    },
    /// Fit the embedding.
    Embed,
    /// Run every configured clustering algorithm.
    Cluster {
        /// Reference labels to report precision against.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Apply cluster-to-state labels from a JSON file.
    Label {
        #[arg(long)]
        file: PathBuf,
    },
    /// Fit the voting classifier and the model bank, then score the test rows.
    Train,
    /// Write scores: the stored test-row scores, or those of new data.
    Score {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export a stage output.
    Export {
        #[arg(long, value_enum)]
        what: Export,
        /// Assignment to export (`--what assignment`); defaults to the active one.
        #[arg(long)]
        algo: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API over the project.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Export {
    /// `timestamp,x,y[,z],row_id` for every row.
    Embedding,
    /// `row_id,timestamp,label` for the training rows, plus a `.json` sidecar.
    Assignment,
    /// `timestamp,state,mae,dev,nearest_state` for the test rows.
    Scores,
    /// `row_id,timestamp,label` of the resolved states.
    States,
    /// Cleaned features in the input CSV layout.
    Features,
    /// Per-state against global test MAE, as JSON.
    Summary,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        let broken_pipe = e
            .chain()
            .any(|c| c.downcast_ref::<io::Error>().is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe));
        if broken_pipe {
            return;
        }
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn output(out: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn print_outcome(p: &Pipeline, outcome: RunOutcome) {
    for r in &p.state.manifest.stages {
        println!("{:<10} {:?}", r.stage.name(), r.status);
    }
    if outcome == RunOutcome::AwaitingLabels {
        println!("waiting for labels: run `hydrodiag label --file overrides.json`, then `hydrodiag train`");
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let state_path = cli.state;
    match cli.command {
        Command::Synth { out, labels, config, seed } => {
            let mut cfg = match config {
                Some(p) => serde_json::from_str::<SynthConfig>(&std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?)?,
                None => hpp_fixture(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let (m, truth) = synth_generate(&cfg)?;
            hydrodiag::formats::save_features_csv(&m, &out)?;
            if let Some(l) = labels {
                save_reference_csv(&truth, &l)?;
            }
            println!("wrote {} rows of {} signals to {}", m.n_rows(), m.n_signals(), out.display());
        }
        Command::Ingest { data, config } => {
            let cfg = PipelineConfig::load(&config)?;
            let raw = load_csv(&data)?;
            let mut p = Pipeline::new(cfg, raw, data.display().to_string())?.with_checkpoint(&state_path);
            p.run_until(Stage::Split)?;
            let s = &p.state;
            println!("{}", serde_json::to_string_pretty(&(&s.ingest, &s.split))?);
        }
        Command::Run { data, config, pause } => {
            let mut p = match (state_path.exists(), data) {
                (false, Some(data)) => {
                    let Some(config) = config else { bail!("a new project needs --config") };
                    let raw = load_csv(&data)?;
                    Pipeline::new(PipelineConfig::load(&config)?, raw, data.display().to_string())?.with_checkpoint(&state_path)
                }
                (false, None) => bail!("{} does not exist; pass --data and --config to start a project", state_path.display()),
                (true, data) => {
                    let mut p = Pipeline::open(&state_path)?;
                    if let Some(c) = config {
                        p.set_config(PipelineConfig::load(&c)?)?;
                    }
                    if let Some(d) = data {
                        p.set_data(load_csv(&d)?, d.display().to_string());
                    }
                    p
                }
            };
            p.pause_for_labels = pause;
            let outcome = p.run_until(Stage::Score)?;
            print_outcome(&p, outcome);
            if outcome == RunOutcome::Completed {
                println!("{}", serde_json::to_string_pretty(&test_summary(&p.state)?)?);
            }
        }
        Command::Embed => {
            let mut p = Pipeline::open(&state_path)?;
            p.run_until(Stage::Embed)?;
            let e = p.state.embedding.as_ref().expect("embed stage ran");
            println!("embedded {} training rows into {} dimensions", e.coords.rows(), e.coords.cols());
        }
        Command::Cluster { reference } => {
            let mut p = Pipeline::open(&state_path)?;
            p.pause_for_labels = true;
            p.run_until(Stage::Cluster)?;
            let truth = reference.map(load_reference_csv).transpose()?;
            for (name, a) in &p.state.assignments {
                let mut line = format!("{name:<14} clusters {:<3} noise {}", a.n_clusters, a.noise_count());
                if let Some(t) = &truth {
                    if t.len() < a.labels.len() {
                        bail!("reference has {} rows, the training split {}", t.len(), a.labels.len());
                    }
                    line += &format!(" precision {:.4}", precision(&a.labels, &t[..a.labels.len()])?);
                }
                println!("{line}");
            }
        }
        Command::Label { file } => {
            let mut p = Pipeline::open(&state_path)?;
            let text = std::fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
            let overrides: LabelOverrides = serde_json::from_str(&text).with_context(|| format!("parsing {}", file.display()))?;
            match p.apply_labels(&overrides)? {
                LabelOutcome::AlreadyApplied => println!("already applied"),
                LabelOutcome::Applied { stale } => {
                    for s in &p.state.states {
                        println!("state {:<16} {:?} clusters {:?}", s.name, s.tag, s.clusters);
                    }
                    let names: Vec<&str> = stale.iter().map(|s| s.name()).collect();
                    println!("stale: {}", names.join(", "));
                }
            }
        }
        Command::Train => {
            let mut p = Pipeline::open(&state_path)?;
            if p.run_until(Stage::Score)? == RunOutcome::AwaitingLabels {
                bail!("labels are required first: run `hydrodiag label --file overrides.json`");
            }
            println!("{}", serde_json::to_string_pretty(&test_summary(&p.state)?)?);
        }
        Command::Score { data, out } => {
            let state = ProjectState::load(&state_path)?;
            let rows = match data {
                Some(d) => score_new_data(&state, &load_csv(&d)?)?,
                None => {
                    ensure_bank_current(&state)?;
                    state.scores.clone()
                }
            };
            write_scores_csv(&rows, output(out.as_deref())?)?;
        }
        Command::Export { what, algo, out } => {
            let state = ProjectState::load(&state_path)?;
            export(&state, what, algo, out.as_deref())?;
        }
        Command::Serve { port, host } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(hydrodiag::server::serve(state_path, SocketAddr::new(host, port)))?;
        }
    }
    Ok(())
}

fn export(state: &ProjectState, what: Export, algo: Option<String>, out: Option<&Path>) -> anyhow::Result<()> {
    match what {
        Export::Embedding => write_embedding_csv(&embedded_points(state)?, output(out)?)?,
        Export::Assignment | Export::States => {
            let n_train = state.split_info()?.n_train;
            let ids: Vec<usize> = (0..n_train).collect();
            let ts = &state.dataset()?.timestamps()[..n_train];
            let assignment = match (what, algo) {
                (Export::States, _) => {
                    if state.states.is_empty() {
                        bail!("no states yet; apply labels first");
                    }
                    let labels = state_labels(state.active_assignment()?, &state.states);
                    let params = state.states.iter().map(|s| (s.label.to_string(), s.name.clone())).collect();
                    hydrodiag_core::cluster::ClusterAssignment::new(labels, "states", params)?
                }
                (_, Some(a)) => state.assignments.get(&a).cloned().with_context(|| format!("no assignment `{a}`"))?,
                (_, None) => state.active_assignment().cloned().or_else(|_| {
                    let name = &state.config.clustering.active;
                    state.assignments.get(name).cloned().with_context(|| format!("no assignment `{name}`"))
                })?,
            };
            match out {
                Some(p) => hydrodiag::formats::save_assignment(&assignment, &ids, ts, p)?,
                None => {
                    write_assignment_csv(&assignment, &ids, ts, io::stdout().lock())?;
                    eprintln!("{}", serde_json::to_string(&AssignmentSidecar::of(&assignment))?);
                }
            }
        }
        Export::Scores => {
            ensure_bank_current(state)?;
            write_scores_csv(&state.scores, output(out)?)?;
        }
        Export::Features => write_features_csv(state.dataset()?, output(out)?)?,
        Export::Summary => {
            let mut w = output(out)?;
            serde_json::to_writer_pretty(&mut w, &test_summary(state)?)?;
            writeln!(w)?;
        }
    }
    Ok(())
}
