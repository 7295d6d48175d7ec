use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use hypertrack::eval::{evaluate, read_curves, write_curves};
use hypertrack::plot::{render_svg, Series};
use hypertrack::sequence::{read_sequence, write_sequence};
use hypertrack::synth::{generate, SynthSpec};
use hypertrack::tracker::{read_results, track_with, write_results};
use hypertrack::TrackerConfig;

#[derive(Parser)]
#[command(
    name = "hypertrack",
    version,
    about = "Part-based tracking with geometric hypergraphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track the target through a sequence and write one CSV row per frame.
    Track {
        #[arg(long)]
        seq: PathBuf,
        /// Tracker configuration (JSON); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write each frame's hypergraph to `<out>.graph.jsonl`.
        #[arg(long)]
        dump_graph: bool,
        /// Also write each frame's modes to `<out>.modes.jsonl`.
        #[arg(long)]
        dump_modes: bool,
    },
    /// Generate a synthetic sequence from a generator spec (JSON).
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score tracking results against the sequence's ground truth.
    Eval {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        seq: PathBuf,
        /// Metrics JSON; the curves go next to it with a `.csv` extension.
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw precision and success plots from curve files.
    Plot {
        #[arg(long)]
        out: PathBuf,
        /// Curve CSVs written by `eval` (a metrics `.json` selects its sibling `.csv`).
        inputs: Vec<PathBuf>,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn curves_path(metrics: &Path) -> PathBuf {
    let sibling = metrics.with_extension("csv");
    if sibling == metrics {
        with_suffix(metrics, ".curves.csv")
    } else {
        sibling
    }
}

fn run_track(seq: &Path, config: Option<&Path>, out: &Path, dump_graph: bool, dump_modes: bool) -> Result<()> {
    let config = match config {
        Some(path) => TrackerConfig::load(path).with_context(|| format!("config {}", path.display()))?,
        None => TrackerConfig::default(),
    };
    config.validate()?;
    let seq = read_sequence(seq).with_context(|| format!("sequence {}", seq.display()))?;

    let mut graphs = dump_graph
        .then(|| create(&with_suffix(out, ".graph.jsonl")))
        .transpose()?;
    let mut modes = dump_modes
        .then(|| create(&with_suffix(out, ".modes.jsonl")))
        .transpose()?;
    let mut dump_error = None;
    let results = track_with(&seq, &config, |trace| {
        let mut emit = |w: &mut BufWriter<File>, value: serde_json::Value| {
            if dump_error.is_none() {
                if let Err(e) = writeln!(w, "{value}") {
                    dump_error = Some(e);
                }
            }
        };
        if let Some(w) = graphs.as_mut() {
            emit(w, trace.graph_json());
        }
        if let Some(w) = modes.as_mut() {
            emit(w, trace.modes_json());
        }
    })?;
    if let Some(e) = dump_error {
        return Err(e).context("writing debug dump");
    }
    for w in graphs.iter_mut().chain(modes.iter_mut()) {
        w.flush()?;
    }

    let mut w = create(out)?;
    write_results(&results, &mut w)?;
    w.flush()?;
    Ok(())
}

fn run_synth(spec: &Path, out: &Path) -> Result<()> {
    let spec = SynthSpec::load(spec).with_context(|| format!("spec {}", spec.display()))?;
    let seq = generate(&spec)?;
    write_sequence(&seq, out).with_context(|| format!("cannot write {}", out.display()))?;
    Ok(())
}

fn run_eval(results: &Path, seq: &Path, out: &Path) -> Result<()> {
    let file = File::open(results).with_context(|| format!("cannot open {}", results.display()))?;
    let results = read_results(BufReader::new(file)).context("results")?;
    let seq = read_sequence(seq).with_context(|| format!("sequence {}", seq.display()))?;
    let metrics = evaluate(&results, &seq)?;

    let mut w = create(out)?;
    serde_json::to_writer_pretty(&mut w, &metrics)?;
    writeln!(w)?;
    w.flush()?;

    let mut w = create(&curves_path(out))?;
    write_curves(&metrics.curves(), &mut w)?;
    w.flush()?;
    Ok(())
}

fn run_plot(out: &Path, inputs: &[PathBuf]) -> Result<()> {
    if inputs.is_empty() {
        bail!("plot needs at least one curve file");
    }
    let mut series = Vec::with_capacity(inputs.len());
    for input in inputs {
        let path = if input.extension().is_some_and(|e| e == "json") {
            curves_path(input)
        } else {
            input.clone()
        };
        let file = File::open(&path).with_context(|| format!("cannot open {}", path.display()))?;
        let points = read_curves(BufReader::new(file)).with_context(|| format!("curves {}", path.display()))?;
        let label = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        series.push(Series { label, points });
    }
    let svg = render_svg(&series)?;
    std::fs::write(out, svg).with_context(|| format!("cannot write {}", out.display()))?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Track {
            seq,
            config,
            out,
            dump_graph,
            dump_modes,
        } => run_track(&seq, config.as_deref(), &out, dump_graph, dump_modes),
        Command::Synth { spec, out } => run_synth(&spec, &out),
        Command::Eval { results, seq, out } => run_eval(&results, &seq, &out),
        Command::Plot { out, inputs } => run_plot(&out, &inputs),
    }
}
