//! Batch driver for the structure-learning pipeline. Every stage reads its
//! inputs from files and writes JSON, CSV or DOT outputs; nothing is
//! timestamped, so reruns with the same inputs and seed are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use causalbn::cbn::{effect_report, fit, DiscreteBayesNet};
use causalbn::dataset::{apply_cleaning, impute, load_csv, load_csv_inferred, CategoricalDataset, Imputation, Schema};
use causalbn::ensemble::{select_by_bic, tally_edges, Outcome};
use causalbn::eval::{cross_validate, roc_csv, structure_report, structure_report_csv, CvOptions};
use causalbn::graph::{to_dot, Dag, GraphJson};
use causalbn::knowledge::KnowledgeConstraints;
use causalbn::learners::{learn, Algorithm, LearnResult, LearnerConfig};
use causalbn::par::Exec;
use causalbn::synth::{random_net, sepsis_scenario};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Parser)]
#[command(name = "causalbn", version, about = "Discrete Bayesian-network causal discovery pipeline")]
struct Cli {
    /// JSON file overriding default settings (`learner`, `k`, `smoothing`,
    /// `missing`); explicit flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run every data-parallel loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn one structure per algorithm.
    Learn(LearnArgs),
    /// Average learned DAGs into a consensus family and pick L by BIC.
    Average(AverageArgs),
    /// Tabulate SHD, fragments, parameters, edges, BIC and log-likelihood.
    Compare(CompareArgs),
    /// Cross-validate a structure as a classifier of a binary target.
    Validate(ValidateArgs),
    /// Estimate the effect of setting a binary exposure on a binary target.
    Intervene(InterveneArgs),
    /// Write a ground-truth network, its constraints and a sample.
    Synth(SynthArgs),
    /// Run learn, average, compare, validate and intervene in sequence.
    Pipeline(PipelineArgs),
}

#[derive(Args, Clone)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Schema JSON; without it states are inferred from the column values.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Handling of missing cells.
    #[arg(long, value_enum)]
    missing: Option<Missing>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Missing {
    /// Fail if any cell is missing.
    #[default]
    Error,
    /// Drop incomplete rows.
    Drop,
    /// Fill each column's most frequent state.
    Mode,
}

#[derive(Args)]
struct LearnArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    constraints: Option<PathBuf>,
    /// Comma-separated algorithm names; all six when omitted.
    #[arg(long, value_delimiter = ',')]
    algorithms: Vec<Algorithm>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct AverageArgs {
    /// Directory holding `*.dag.json` files.
    #[arg(long)]
    graphs: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    constraints: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Graph files, or directories of `*.dag.json` files.
    #[arg(long, num_args = 1.., required = true)]
    graphs: Vec<PathBuf>,
    #[arg(long)]
    reference: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    graph: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    target: String,
    /// Number of folds (default 10).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Additive CPT smoothing (default 1).
    #[arg(long)]
    smoothing: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InterveneArgs {
    /// Structure to parametrise from `--data`.
    #[arg(long, required_unless_present = "network", requires = "data")]
    graph: Option<PathBuf>,
    /// Fully parametrised network JSON, used as is.
    #[arg(long, conflicts_with = "graph")]
    network: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long, value_enum)]
    missing: Option<Missing>,
    #[arg(long)]
    exposure: String,
    #[arg(long)]
    target: String,
    /// Additive CPT smoothing (default 1).
    #[arg(long)]
    smoothing: Option<f64>,
    /// Output JSON file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scenario {
    Sepsis,
    Random,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value = "sepsis")]
    scenario: Scenario,
    /// Rows to sample.
    #[arg(long, default_value_t = 50_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    /// Node count of a random network.
    #[arg(long, default_value_t = 10)]
    nodes: usize,
    #[arg(long, default_value_t = 2)]
    max_parents: usize,
    /// States per node of a random network: one value or one per node.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    states: Vec<usize>,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    constraints: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    algorithms: Vec<Algorithm>,
    /// Ground-truth DAG for the comparison table; the averaged DAG otherwise.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    target: String,
    /// Exposures to intervene on, comma-separated.
    #[arg(long, value_delimiter = ',')]
    exposures: Vec<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    smoothing: Option<f64>,
    #[arg(long)]
    out_dir: PathBuf,
}

/// Settings file read through `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Config {
    learner: Option<serde_json::Value>,
    k: Option<usize>,
    seed: Option<u64>,
    smoothing: Option<f64>,
    missing: Option<Missing>,
}

struct Settings {
    config: Config,
    exec: Exec,
}

impl Settings {
    fn load(cli: &Cli) -> Result<Settings> {
        let config = match &cli.config {
            Some(p) => serde_json::from_str(&read(p)?).with_context(|| format!("parsing config {}", p.display()))?,
            None => Config::default(),
        };
        let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
        Ok(Settings { config, exec })
    }

    fn learner(&self, alg: Algorithm, seed: Option<u64>) -> Result<LearnerConfig> {
        let mut cfg: LearnerConfig = match &self.config.learner {
            Some(v) => serde_json::from_value(v.clone()).context("parsing `learner` settings")?,
            None => LearnerConfig::default(),
        };
        cfg.algorithm = alg;
        cfg.exec = self.exec;
        if let Some(s) = seed.or(self.config.seed) {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.config.seed).unwrap_or(0)
    }

    fn smoothing(&self, flag: Option<f64>) -> f64 {
        flag.or(self.config.smoothing).unwrap_or(1.0)
    }

    fn folds(&self, flag: Option<usize>) -> usize {
        flag.or(self.config.k).unwrap_or(10)
    }

    fn missing(&self, flag: Option<Missing>) -> Missing {
        flag.or(self.config.missing).unwrap_or_default()
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn load_data(settings: &Settings, data: &Path, schema: Option<&Path>, missing: Option<Missing>) -> Result<CategoricalDataset> {
    let d = match schema {
        Some(s) => {
            let schema = Schema::load(s)?;
            let d = load_csv(data, &schema)?;
            apply_cleaning(&d, &schema.cleaning)?
        }
        None => load_csv_inferred(data)?,
    };
    Ok(match settings.missing(missing) {
        Missing::Error => d,
        Missing::Drop => impute(&d, Imputation::ListwiseDelete)?,
        Missing::Mode => impute(&d, Imputation::ColumnMode)?,
    })
}

fn load_args_data(settings: &Settings, a: &DataArgs) -> Result<CategoricalDataset> {
    load_data(settings, &a.data, a.schema.as_deref(), a.missing)
}

fn load_constraints(path: Option<&Path>, names: &[String]) -> Result<KnowledgeConstraints> {
    let Some(path) = path else { return Ok(KnowledgeConstraints::default()) };
    let k = KnowledgeConstraints::load(path)?;
    let diagnostics = k.validate(names);
    if !diagnostics.is_empty() {
        let lines: Vec<String> = diagnostics.iter().map(|d| format!("  {d}")).collect();
        bail!("invalid constraints in {}:\n{}", path.display(), lines.join("\n"));
    }
    Ok(k)
}

fn read_dag(path: &Path) -> Result<Dag> {
    let json: GraphJson = serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    Dag::from_json(&json).with_context(|| format!("reading DAG from {}", path.display()))
}

fn write_dag(dir: &Path, stem: &str, dag: &Dag) -> Result<()> {
    write_json(&dir.join(format!("{stem}.dag.json")), &dag.to_json())?;
    write(&dir.join(format!("{stem}.dot")), &to_dot(&dag.to_pdag(), None))
}

/// `*.dag.json` files of a directory in name order.
fn dag_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(".dag.json")))
        .collect();
    out.sort();
    if out.is_empty() {
        bail!("no *.dag.json files in {}", dir.display());
    }
    Ok(out)
}

fn graph_label(path: &Path) -> String {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("graph");
    name.strip_suffix(".dag.json").or_else(|| name.strip_suffix(".json")).unwrap_or(name).to_string()
}

fn algorithms(list: &[Algorithm]) -> Vec<Algorithm> {
    if list.is_empty() {
        Algorithm::ALL.to_vec()
    } else {
        list.to_vec()
    }
}

// ---- commands ---------------------------------------------------------------

fn run_learn(
    settings: &Settings,
    d: &CategoricalDataset,
    k: &KnowledgeConstraints,
    algs: &[Algorithm],
    seed: Option<u64>,
    out: &Path,
) -> Result<Vec<LearnResult>> {
    let configs: Vec<LearnerConfig> = algs.iter().map(|&a| settings.learner(a, seed)).collect::<Result<_>>()?;
    let results: Vec<Result<LearnResult>> = std::thread::scope(|s| {
        let handles: Vec<_> = configs.iter().map(|cfg| s.spawn(move || learn(d, cfg, k))).collect();
        handles
            .into_iter()
            .zip(&configs)
            .map(|(h, cfg)| {
                h.join()
                    .map_err(|_| anyhow::anyhow!("{} panicked", cfg.algorithm))?
                    .with_context(|| format!("learning with {}", cfg.algorithm))
            })
            .collect()
    });
    let results: Vec<LearnResult> = results.into_iter().collect::<Result<_>>()?;
    for (r, cfg) in results.iter().zip(&configs) {
        let stem = r.algorithm.as_str();
        write_json(&out.join(format!("{stem}.pdag.json")), &r.graph.to_json())?;
        write_dag(out, stem, &r.dag)?;
        let bic = causalbn::scoring::bic(&r.dag, d)?;
        write_json(
            &out.join(format!("{stem}.stats.json")),
            &json!({
                "algorithm": r.algorithm,
                "config": cfg,
                "forced_extension": r.forced_extension,
                "edges": r.dag.edge_count(),
                "bic": bic,
                "stats": r.stats,
                "candidate_sets": r.candidate_sets,
                "trace": r.trace,
            }),
        )?;
        println!("{stem}: {} edges, BIC {bic:.4}", r.dag.edge_count());
    }
    Ok(results)
}

fn run_average(
    d: &CategoricalDataset,
    k: &KnowledgeConstraints,
    dags: &[Dag],
    out: &Path,
) -> Result<Dag> {
    let tally = tally_edges(dags)?;
    let family = select_by_bic(&tally, d, k)?;
    write_json(&out.join("family.json"), &family.to_json())?;
    let selected = family.selected();
    write_dag(out, "selected", &selected.dag)?;
    let mut table = String::from("l,edges,bic\n");
    for (m, b) in family.members.iter().zip(&family.bic) {
        table.push_str(&format!("{},{},{b}\n", m.threshold, m.dag.edge_count()));
    }
    write(&out.join("bic.csv"), &table)?;
    let dropped: Vec<_> = family
        .members
        .iter()
        .flat_map(|m| {
            m.log
                .iter()
                .filter(|e| matches!(e.outcome, Outcome::Dropped | Outcome::Reversed))
                .map(move |e| json!({"l": m.threshold, "from": e.from, "to": e.to, "count": e.count, "outcome": e.outcome}))
        })
        .collect();
    write_json(&out.join("dropped.json"), &dropped)?;
    println!("selected L = {} of {} ({} edges)", family.selected_l, tally.k(), selected.dag.edge_count());
    Ok(selected.dag.clone())
}

fn run_compare(d: &CategoricalDataset, graphs: &[(String, Dag)], reference: &Dag, out: &Path) -> Result<()> {
    let rows = structure_report(graphs, reference, d)?;
    write(&out.join("structure_report.csv"), &structure_report_csv(&rows))?;
    write_json(&out.join("structure_report.json"), &rows)?;
    for r in &rows {
        println!("{}: SHD {}, {} edges", r.name, r.shd, r.edges);
    }
    Ok(())
}

fn run_validate(g: &Dag, d: &CategoricalDataset, target: &str, opts: &CvOptions, out: &Path) -> Result<()> {
    let g = g.aligned_to(&d.names())?;
    let report = cross_validate(&g, d, target, opts)?;
    write_json(&out.join("cv_report.json"), &report)?;
    write(&out.join("roc.csv"), &roc_csv(&report.roc))?;
    match report.mean.auc {
        Some(auc) => println!("{target}: mean accuracy {:.4}, mean AUC {auc:.4}", report.mean.accuracy),
        None => println!("{target}: mean accuracy {:.4}", report.mean.accuracy),
    }
    Ok(())
}

fn run_intervene(net: &DiscreteBayesNet, exposure: &str, target: &str, out: &Path) -> Result<()> {
    let r = effect_report(net, exposure, target)?;
    let mut v = serde_json::to_value(&r)?;
    v["summary"] = json!(r.summary(1));
    write_json(out, &v)?;
    println!("{}", r.summary(1));
    Ok(())
}

fn fitted(settings: &Settings, g: &Dag, d: &CategoricalDataset, smoothing: Option<f64>) -> Result<DiscreteBayesNet> {
    Ok(fit(&g.aligned_to(&d.names())?, d, settings.smoothing(smoothing))?)
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let settings = Settings::load(cli)?;
    match &cli.command {
        Command::Learn(a) => {
            let d = load_args_data(&settings, &a.data)?;
            let k = load_constraints(a.constraints.as_deref(), &d.names())?;
            run_learn(&settings, &d, &k, &algorithms(&a.algorithms), a.seed, &a.out_dir)?;
        }
        Command::Average(a) => {
            let d = load_args_data(&settings, &a.data)?;
            let k = load_constraints(a.constraints.as_deref(), &d.names())?;
            let dags: Vec<Dag> = dag_files(&a.graphs)?.iter().map(|p| read_dag(p)).collect::<Result<_>>()?;
            run_average(&d, &k, &dags, &a.out)?;
        }
        Command::Compare(a) => {
            let d = load_args_data(&settings, &a.data)?;
            let reference = read_dag(&a.reference)?;
            let mut graphs = Vec::new();
            for p in &a.graphs {
                let files = if p.is_dir() { dag_files(p)? } else { vec![p.clone()] };
                for f in files {
                    graphs.push((graph_label(&f), read_dag(&f)?));
                }
            }
            run_compare(&d, &graphs, &reference, &a.out)?;
        }
        Command::Validate(a) => {
            let d = load_args_data(&settings, &a.data)?;
            let g = read_dag(&a.graph)?;
            let opts = CvOptions {
                k: settings.folds(a.k),
                seed: settings.seed(a.seed),
                smoothing: settings.smoothing(a.smoothing),
                exec: settings.exec,
            };
            run_validate(&g, &d, &a.target, &opts, &a.out)?;
        }
        Command::Intervene(a) => {
            let net = match (&a.network, &a.graph, &a.data) {
                (Some(n), _, _) => DiscreteBayesNet::load(n)?,
                (None, Some(g), Some(data)) => {
                    let d = load_data(&settings, data, a.schema.as_deref(), a.missing)?;
                    fitted(&settings, &read_dag(g)?, &d, a.smoothing)?
                }
                _ => bail!("intervene needs --network, or --graph with --data"),
            };
            run_intervene(&net, &a.exposure, &a.target, &a.out)?;
        }
        Command::Synth(a) => synth(a, settings.exec)?,
        Command::Pipeline(a) => {
            let d = load_args_data(&settings, &a.data)?;
            let k = load_constraints(a.constraints.as_deref(), &d.names())?;
            let out = &a.out_dir;
            let results = run_learn(&settings, &d, &k, &algorithms(&a.algorithms), a.seed, &out.join("learn"))?;
            let dags: Vec<Dag> = results.iter().map(|r| r.dag.clone()).collect();
            let averaged = run_average(&d, &k, &dags, &out.join("average"))?;
            let reference = match &a.reference {
                Some(p) => read_dag(p)?,
                None => averaged.clone(),
            };
            let mut graphs: Vec<(String, Dag)> = results.iter().map(|r| (r.algorithm.to_string(), r.dag.clone())).collect();
            graphs.push(("average".into(), averaged.clone()));
            run_compare(&d, &graphs, &reference, &out.join("compare"))?;
            let opts = CvOptions {
                k: settings.folds(a.k),
                seed: settings.seed(a.seed),
                smoothing: settings.smoothing(a.smoothing),
                exec: settings.exec,
            };
            run_validate(&averaged, &d, &a.target, &opts, &out.join("validate"))?;
            let net = fitted(&settings, &averaged, &d, a.smoothing)?;
            net.save(out.join("network.json"))?;
            for e in &a.exposures {
                run_intervene(&net, e, &a.target, &out.join("intervene").join(format!("{e}.json")))?;
            }
        }
    }
    Ok(())
}

fn synth(a: &SynthArgs, exec: Exec) -> Result<()> {
    let (net, k) = match a.scenario {
        Scenario::Sepsis => sepsis_scenario(a.seed)?,
        Scenario::Random => (random_net(a.nodes, a.max_parents, &a.states, a.seed)?, KnowledgeConstraints::default()),
    };
    let out = &a.out_dir;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    net.save(out.join("network.json"))?;
    write_dag(out, "truth", net.dag())?;
    write_json(&out.join("constraints.json"), &k.to_json())?;
    write_json(&out.join("schema.json"), &Schema::from_variables(net.variables()))?;
    let d = net.sample(a.n, a.seed, exec)?;
    d.write_csv(out.join("data.csv"))?;
    println!("{} rows over {} variables written to {}", a.n, net.node_count(), out.display());
    Ok(())
}
