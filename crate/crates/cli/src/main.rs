mod config;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use specmine_core::abstraction::Recipe;
use specmine_core::automaton::{apply_recipe, to_dot};
use specmine_core::contract_sim::{builtin, parse_script, run_scenario};
use specmine_core::pipeline::{mine, Mined, MiningOptions};
use specmine_core::sessions::{parse_histories, write_histories, History, DEFAULT_ORDERING_CAP};
use specmine_core::trace_model::{parse_trace, serialize_trace, TraceLedger};
use specmine_core::tuner::{compute_cost, tune, CostConfig, TraceRecord, Tuned, TunerTrace};
use specmine_core::Parallelism;

use config::{cost_config, pick, ConfigFile, TuneOverrides};

#[derive(Parser, Debug)]
#[command(
    name = "specmine",
    version,
    about = "Mine behavioral specifications from contract transaction traces"
)]
struct Cli {
    /// Flat TOML file whose keys mirror the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run every data-parallel loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Execute a scenario script and write its trace.
    Simulate {
        /// Builtin scenario: rps or token.
        #[arg(long)]
        scenario: Option<String>,
        /// Line-delimited step records replacing the builtin script.
        #[arg(long)]
        script: Option<PathBuf>,
        /// Trace file to write.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract histories from a trace.
    Mine {
        #[command(flatten)]
        mining: MiningArgs,
        /// Histories file to write.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search for a low-cost automaton over mined histories.
    Tune {
        /// Histories file produced by `mine`.
        #[arg(long)]
        histories: Option<PathBuf>,
        #[command(flatten)]
        tuning: TuningArgs,
        /// Directory receiving automaton.dot, recipe.json and cost_trace.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mine and tune in one go.
    Run {
        #[command(flatten)]
        mining: MiningArgs,
        #[command(flatten)]
        tuning: TuningArgs,
        /// Directory receiving every artifact.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct MiningArgs {
    /// Trace file.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Seed transaction id; defaults to the trace's seed or its first transaction.
    #[arg(long)]
    seed_tx: Option<String>,
    /// Orderings enumerated per final transaction [default: 16].
    #[arg(long)]
    ordering_cap: Option<usize>,
    /// Also write the dependency graph as DOT.
    #[arg(long)]
    emit_depgraph: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TuningArgs {
    /// Cost weights: default, general or precise.
    #[arg(long)]
    preset: Option<String>,
    /// Number of recipes explored [default: 10000].
    #[arg(long)]
    bound: Option<usize>,
    /// Seed of the annealing random generator [default: 42].
    #[arg(long)]
    rng_seed: Option<u64>,
    /// Extra copy of the best recipe.
    #[arg(long)]
    dump_recipe: Option<PathBuf>,
    /// Evaluate this recipe instead of searching.
    #[arg(long)]
    load_recipe: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy)]
enum Artifact {
    Trace,
    Histories,
    Recipe,
    CostTrace,
    Dot,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let parallelism = file.parallelism(cli.sequential);
    match cli.command {
        Command::Simulate {
            scenario,
            script,
            out,
        } => cmd_simulate(
            pick(&scenario, &file.scenario),
            pick(&script, &file.script),
            &required(pick(&out, &file.out), "--out")?,
        ),
        Command::Mine { mining, out } => {
            let opts = MineSettings::resolve(&mining, &file, parallelism)?;
            let out = required(pick(&out, &file.out), "--out")?;
            check_file_target(&out)?;
            let mined = opts.mine()?;
            write_mined(&mined, &out)?;
            verify(&[(out, Artifact::Histories)])?;
            print_mining_summary(&mined);
            Ok(())
        }
        Command::Tune {
            histories,
            tuning,
            out,
        } => {
            let path = required(pick(&histories, &file.histories), "--histories")?;
            let settings = TuneSettings::resolve(&tuning, &file, parallelism)?;
            let out = required(pick(&out, &file.out), "--out")?;
            prepare_dir(&out)?;
            let histories = read_histories(&path)?;
            settings.tune(&histories, &out)
        }
        Command::Run {
            mining,
            tuning,
            out,
        } => {
            let opts = MineSettings::resolve(&mining, &file, parallelism)?;
            let settings = TuneSettings::resolve(&tuning, &file, parallelism)?;
            let out = required(pick(&out, &file.out), "--out")?;
            prepare_dir(&out)?;
            let mined = opts.mine()?;
            let histories_path = out.join("histories.jsonl");
            write_mined(&mined, &histories_path)?;
            verify(&[(histories_path, Artifact::Histories)])?;
            print_mining_summary(&mined);
            settings.tune(&mined.histories, &out)
        }
    }
}

fn required(value: Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    value.with_context(|| format!("missing {flag} (flag or config key)"))
}

fn check_input(path: &Path) -> Result<()> {
    ensure!(
        path.is_file(),
        "input file {} does not exist",
        path.display()
    );
    Ok(())
}

fn check_file_target(path: &Path) -> Result<()> {
    ensure!(!path.is_dir(), "output {} is a directory", path.display());
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure!(
            parent.is_dir(),
            "output directory {} does not exist",
            parent.display()
        );
    }
    Ok(())
}

fn prepare_dir(dir: &Path) -> Result<()> {
    ensure!(
        !dir.exists() || dir.is_dir(),
        "output {} exists and is not a directory",
        dir.display()
    );
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn cmd_simulate(scenario: Option<String>, script: Option<PathBuf>, out: &Path) -> Result<()> {
    check_file_target(out)?;
    let name = scenario.context("missing --scenario (rps or token)")?;
    let (scenario, builtin_script) = builtin(&name)?;
    let script = match script {
        Some(path) => {
            check_input(&path)?;
            let reader = BufReader::new(File::open(&path)?);
            parse_script(reader).with_context(|| format!("reading script {}", path.display()))?
        }
        None => builtin_script,
    };
    let ledger = run_scenario(scenario.as_ref(), &script)?;
    write_file(out, &serialize_trace(&ledger))?;
    verify(&[(out.to_path_buf(), Artifact::Trace)])?;
    println!("{} transactions written to {}", ledger.len(), out.display());
    Ok(())
}

struct MineSettings {
    trace: PathBuf,
    depgraph: Option<PathBuf>,
    options: MiningOptions,
}

impl MineSettings {
    fn resolve(args: &MiningArgs, file: &ConfigFile, parallelism: Parallelism) -> Result<Self> {
        let trace = required(pick(&args.trace, &file.trace), "--trace")?;
        check_input(&trace)?;
        let depgraph = pick(&args.emit_depgraph, &file.emit_depgraph);
        if let Some(path) = &depgraph {
            check_file_target(path)?;
        }
        let ordering_cap =
            pick(&args.ordering_cap, &file.ordering_cap).unwrap_or(DEFAULT_ORDERING_CAP);
        ensure!(ordering_cap > 0, "--ordering-cap must be positive");
        Ok(Self {
            trace,
            depgraph,
            options: MiningOptions {
                seed: pick(&args.seed_tx, &file.seed_tx),
                ordering_cap,
                parallelism,
            },
        })
    }

    fn mine(&self) -> Result<Mined> {
        let ledger = read_trace(&self.trace)?;
        let mined = mine(&ledger, &self.options)?;
        if let Some(path) = &self.depgraph {
            write_file(path, &mined.graph.to_dot())?;
            verify(&[(path.clone(), Artifact::Dot)])?;
        }
        Ok(mined)
    }
}

fn read_trace(path: &Path) -> Result<TraceLedger> {
    let reader = BufReader::new(File::open(path)?);
    parse_trace(reader).with_context(|| format!("reading trace {}", path.display()))
}

fn read_histories(path: &Path) -> Result<Vec<History>> {
    check_input(path)?;
    let reader = BufReader::new(File::open(path)?);
    parse_histories(reader).with_context(|| format!("reading histories {}", path.display()))
}

fn write_mined(mined: &Mined, path: &Path) -> Result<()> {
    let mut out =
        BufWriter::new(File::create(path).with_context(|| format!("writing {}", path.display()))?);
    write_histories(&mined.histories, &mut out)?;
    out.flush()?;
    Ok(())
}

fn print_mining_summary(mined: &Mined) {
    let s = mined.summary();
    println!("total transactions: {}", s.transactions);
    println!("final transactions: {}", s.finals);
    println!("histories: {}", s.histories);
    println!("average length: {:.2}", s.average_length);
    if s.truncated {
        println!("note: ordering enumeration was truncated; raise --ordering-cap to see more");
    }
}

struct TuneSettings {
    cfg: CostConfig,
    dump: Option<PathBuf>,
    load: Option<Recipe>,
}

impl TuneSettings {
    fn resolve(args: &TuningArgs, file: &ConfigFile, parallelism: Parallelism) -> Result<Self> {
        let overrides = TuneOverrides {
            preset: args.preset.clone(),
            bound: args.bound,
            rng_seed: args.rng_seed,
        };
        let cfg = cost_config(&overrides, file, parallelism)?;
        let dump = pick(&args.dump_recipe, &file.dump_recipe);
        if let Some(path) = &dump {
            check_file_target(path)?;
        }
        let load = match pick(&args.load_recipe, &file.load_recipe) {
            Some(path) => {
                check_input(&path)?;
                let text = fs::read_to_string(&path)?;
                Some(
                    Recipe::from_json(&text)
                        .with_context(|| format!("reading recipe {}", path.display()))?,
                )
            }
            None => None,
        };
        Ok(Self { cfg, dump, load })
    }

    fn tune(&self, histories: &[History], out: &Path) -> Result<()> {
        if histories.is_empty() {
            bail!("the histories corpus is empty");
        }
        let tuned = match &self.load {
            Some(recipe) => evaluate(histories, recipe, &self.cfg),
            None => tune(histories, &self.cfg)?,
        };
        let recipe_json = tuned.recipe.to_json();
        let mut artifacts = vec![
            (
                out.join("automaton.dot"),
                Artifact::Dot,
                to_dot(&tuned.automaton),
            ),
            (
                out.join("recipe.json"),
                Artifact::Recipe,
                recipe_json.clone(),
            ),
            (
                out.join("cost_trace.csv"),
                Artifact::CostTrace,
                tuned.trace.to_csv(),
            ),
        ];
        if let Some(path) = &self.dump {
            artifacts.push((path.clone(), Artifact::Recipe, recipe_json));
        }
        for (path, _, contents) in &artifacts {
            write_file(path, contents)?;
        }
        let written: Vec<(PathBuf, Artifact)> =
            artifacts.into_iter().map(|(p, k, _)| (p, k)).collect();
        verify(&written)?;
        print_tuning_summary(&tuned);
        Ok(())
    }
}

fn evaluate(histories: &[History], recipe: &Recipe, cfg: &CostConfig) -> Tuned {
    let (automaton, _) = apply_recipe(histories, recipe);
    let cost = compute_cost(&automaton, histories, recipe, cfg);
    Tuned {
        automaton,
        recipe: recipe.clone(),
        trace: TunerTrace {
            records: vec![TraceRecord {
                step: 0,
                cost,
                accepted: true,
                best_cost: cost,
            }],
        },
    }
}

fn cost_reduction(trace: &TunerTrace) -> f64 {
    match (trace.initial_cost(), trace.best_cost()) {
        (Some(initial), Some(best)) if initial.is_finite() && initial > 0.0 && best.is_finite() => {
            100.0 * (initial - best) / initial
        }
        _ => 0.0,
    }
}

fn print_tuning_summary(tuned: &Tuned) {
    println!("states: {}", tuned.automaton.state_count());
    println!("transitions: {}", tuned.automaton.transitions().len());
    println!(
        "accepted recipes: {:.2}%",
        100.0 * tuned.trace.accepted_fraction()
    );
    println!("cost reduction: {:.2}%", cost_reduction(&tuned.trace));
}

/// Reads every output back with the parser of its format.
fn verify(outputs: &[(PathBuf, Artifact)]) -> Result<()> {
    for (path, kind) in outputs {
        let text = fs::read_to_string(path)
            .with_context(|| format!("output {} was not written", path.display()))?;
        let check = match kind {
            Artifact::Trace => parse_trace(text.as_bytes())
                .map(drop)
                .map_err(anyhow::Error::from),
            Artifact::Histories => parse_histories(text.as_bytes())
                .map(drop)
                .map_err(anyhow::Error::from),
            Artifact::Recipe => Recipe::from_json(&text)
                .map(drop)
                .map_err(anyhow::Error::from),
            Artifact::CostTrace => check_csv(&text),
            Artifact::Dot => check_dot(&text),
        };
        check.with_context(|| format!("output {} does not parse back", path.display()))?;
    }
    Ok(())
}

fn check_csv(text: &str) -> Result<()> {
    let mut lines = text.lines();
    ensure!(
        lines.next() == Some("step,cost,accepted,best_cost"),
        "unexpected header"
    );
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        ensure!(fields.len() == 4, "expected four fields in {line:?}");
        fields[0].parse::<usize>()?;
        fields[1].parse::<f64>()?;
        fields[2].parse::<bool>()?;
        fields[3].parse::<f64>()?;
    }
    Ok(())
}

fn check_dot(text: &str) -> Result<()> {
    let trimmed = text.trim();
    ensure!(
        trimmed.starts_with("digraph") && trimmed.ends_with('}'),
        "not a DOT digraph"
    );
    let opens = trimmed.matches('{').count();
    let closes = trimmed.matches('}').count();
    ensure!(opens == closes, "unbalanced braces");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_check_accepts_infinite_costs() {
        assert!(
            check_csv("step,cost,accepted,best_cost\n0,inf,true,inf\n1,3.5,false,3.5\n").is_ok()
        );
        assert!(check_csv("step,cost\n").is_err());
        assert!(check_csv("step,cost,accepted,best_cost\n0,x,true,1\n").is_err());
    }

    #[test]
    fn reduction_guards_degenerate_traces() {
        let record = |cost: f64, best: f64| TraceRecord {
            step: 0,
            cost,
            accepted: true,
            best_cost: best,
        };
        let trace = TunerTrace {
            records: vec![record(10.0, 10.0), record(4.0, 4.0)],
        };
        assert_eq!(cost_reduction(&trace), 60.0);
        let trace = TunerTrace {
            records: vec![record(f64::INFINITY, f64::INFINITY)],
        };
        assert_eq!(cost_reduction(&trace), 0.0);
    }
}
