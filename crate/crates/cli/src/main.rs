use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};

use freqnet_cli::experiments::{
    self, compile_any, convergence_csv, sweep_csv, ExperimentError, ExperimentSpec,
};
use freqnet_core::caps::Caps;
use freqnet_core::inference::{estimate_query, exact_query, forward_sample, Query};
use freqnet_core::learn::{
    fit_params, fit_partition_frequencies, FitConfig, GradientMode, ParametricModel,
};
use freqnet_core::logic::{Binding, DomainSizes};
use freqnet_core::model::{validate, Model};
use freqnet_core::parse::{
    parse_formula, parse_model, parse_query, parse_structure, print_model, print_structure,
};
use freqnet_core::projective::{check_projectivity, CompileError};

/// Lifted Bayesian networks over relative frequencies: grounding, inference,
/// asymptotic limits and cross-size learning.
#[derive(Parser)]
#[command(name = "freqnet", version, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Master seed for all randomized work.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Sample count for Monte Carlo estimation.
    #[arg(long, global = true, default_value_t = 20000)]
    samples: usize,
    /// World-enumeration cap (number of ground atoms); FREQNET_CAP also sets it.
    #[arg(long, global = true)]
    cap: Option<usize>,
    /// Atomic-diagram enumeration cap for limit compilation.
    #[arg(long, global = true)]
    diagram_cap: Option<usize>,
    /// Output file (defaults to stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Compile limits even when an aggregation function is not
    /// interior-preserving.
    #[arg(long, global = true, default_value_t = false)]
    force: bool,
}

#[derive(Args)]
struct ModelArg {
    /// Model file (.cplm).
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args)]
struct SizeArg {
    /// Domain sizes: `sort=N[,sort=N...]` or a single integer for all sorts.
    #[arg(long)]
    size: String,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a formula on a structure.
    Eval {
        #[command(flatten)]
        model: ModelArg,
        /// Structure file (.cpls).
        #[arg(long)]
        structure: PathBuf,
        /// Formula text, e.g. "freq(Q(y) ; y) >= 0.2".
        #[arg(long)]
        formula: String,
        /// Free-variable binding: `x=0,y=3`.
        #[arg(long)]
        bind: Option<String>,
    },
    /// Ground a model and report the layer sizes.
    Ground {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        size: SizeArg,
    },
    /// Query probability: exact enumeration or likelihood weighting.
    #[command(group(ArgGroup::new("method").required(true).args(["exact", "lw"])))]
    Infer {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        size: SizeArg,
        /// Query: `R(0)` or `R(0) | Q(1), ~Q(2)`.
        #[arg(long)]
        query: String,
        /// Exact inference by world enumeration.
        #[arg(long)]
        exact: bool,
        /// Likelihood weighting.
        #[arg(long)]
        lw: bool,
    },
    /// Forward-sample a world and print it as a structure file.
    Sample {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        size: SizeArg,
    },
    /// Compile the asymptotic limit to a quantifier-free model.
    CompileLimit {
        #[command(flatten)]
        model: ModelArg,
    },
    /// Check that a quantifier-free model's exact queries are size-invariant.
    CheckProjective {
        #[command(flatten)]
        model: ModelArg,
        /// Comma-separated size schedule, e.g. `3,4,5,6,7,8`.
        #[arg(long, default_value = "3,4,5,6,7,8")]
        sizes: String,
        /// Explicit queries (repeatable).
        #[arg(long = "query")]
        queries: Vec<String>,
        /// Number of randomized queries to generate when none are given.
        #[arg(long, default_value_t = 10)]
        num_queries: usize,
    },
    /// Estimate a query across a size schedule and compare with the limit.
    Converge {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        query: String,
        #[arg(long, default_value = "20,50,100,200,500,1000")]
        sizes: String,
    },
    /// Sweep one parameter over a grid and report per-size maximum gaps.
    SweepUniform {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        query: String,
        /// Swept parameter as `Relation.param`, e.g. `R.w1`.
        #[arg(long)]
        param: String,
        #[arg(long, default_value = "50,200,800")]
        sizes: String,
        #[arg(long, default_value_t = -3.0)]
        from: f64,
        #[arg(long, default_value_t = 3.0)]
        to: f64,
        #[arg(long, default_value_t = 0.5)]
        step: f64,
    },
    /// Fit parameters from data: frequencies for partition models, gradient
    /// ascent against the compiled limit for functional models.
    Learn {
        #[command(flatten)]
        model: ModelArg,
        /// Training structure files (repeatable).
        #[arg(long = "data", required = true)]
        data: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        rate: f64,
        #[arg(long, default_value_t = 500)]
        iters: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Use finite-difference gradients everywhere.
        #[arg(long)]
        fd: bool,
    },
    /// Cross-size transfer: sample a large world, fit on subsampled
    /// substructures, compare limit queries.
    Transfer {
        #[command(flatten)]
        model: ModelArg,
        /// Fit skeleton (defaults to the generator model file).
        #[arg(long)]
        skeleton: Option<PathBuf>,
        #[arg(long)]
        query: String,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 50)]
        m: usize,
        #[arg(long, default_value_t = 50)]
        k: usize,
    },
    /// Closed-form count-based logistic regression mismatch across sizes.
    RlrMismatch,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's own help/version paths exit 0; anything else is usage
            if e.use_stderr() {
                eprint!("{}", e);
                return ExitCode::from(1);
            }
            print!("{}", e);
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(e.exit_code())
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Run(String),
    #[error("{0}")]
    Critical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Run(_) => 2,
            CliError::Critical(_) => 3,
        }
    }
}

fn classify_compile(e: CompileError) -> CliError {
    match e {
        CompileError::Critical { .. } => CliError::Critical(e.to_string()),
        other => CliError::Run(other.to_string()),
    }
}

fn classify_experiment(e: ExperimentError) -> CliError {
    match e {
        ExperimentError::Compile(inner) => classify_compile(inner),
        ExperimentError::Setup(msg) => CliError::Usage(msg),
        other => CliError::Run(other.to_string()),
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Run(format!("cannot read {}: {}", path.display(), e)))
}

fn load_model(path: &Path) -> Result<Model, CliError> {
    let text = read_file(path)?;
    let model = parse_model(&text)
        .map_err(|e| CliError::Run(format!("{}: {}", path.display(), e)))?;
    let diags = validate(&model);
    for d in &diags {
        eprintln!("warning: {}", d);
    }
    Ok(model)
}

fn parse_sizes_arg(model: &Model, text: &str) -> Result<DomainSizes, CliError> {
    let sig = model.signature();
    if let Ok(n) = text.trim().parse::<usize>() {
        return DomainSizes::uniform(sig, n).map_err(|e| CliError::Usage(e.to_string()));
    }
    let mut by_sort: BTreeMap<String, usize> = BTreeMap::new();
    for part in text.split(',') {
        let (name, value) = part
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("bad size component `{}`", part)))?;
        let n: usize = value
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad size `{}`", value)))?;
        by_sort.insert(name.trim().to_string(), n);
    }
    let mut sizes = Vec::new();
    for (_, sort) in sig.sorts() {
        match by_sort.get(sort) {
            Some(&n) => sizes.push(n),
            None => return Err(CliError::Usage(format!("missing size for sort `{}`", sort))),
        }
    }
    DomainSizes::new(sig, &sizes).map_err(|e| CliError::Usage(e.to_string()))
}

fn parse_schedule(text: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Usage(format!("bad size `{}`", s)))
        })
        .collect()
}

fn parse_query_arg(model: &Model, text: &str) -> Result<Query, CliError> {
    parse_query(text, model.signature()).map_err(|e| CliError::Usage(e.to_string()))
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CliError::Run(format!("cannot write {}: {}", path.display(), e))),
        None => {
            print!("{}", content);
            Ok(())
        }
    }
}

fn caps_of(cli: &Cli) -> Caps {
    let mut caps = Caps::from_env();
    if let Some(c) = cli.cap {
        caps.max_world_atoms = c;
    }
    if let Some(c) = cli.diagram_cap {
        caps.max_diagram_atoms = c;
    }
    caps
}

fn run(cli: Cli) -> Result<(), CliError> {
    let caps = caps_of(&cli);
    match &cli.command {
        Command::Eval { model, structure, formula, bind } => {
            let model = load_model(&model.model)?;
            let text = read_file(structure)?;
            let data = parse_structure(&text, model.signature())
                .map_err(|e| CliError::Run(e.to_string()))?;
            let f = parse_formula(formula, model.signature())
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let mut binding = Binding::new();
            if let Some(spec) = bind {
                let free = freqnet_core::logic::free_variables(&f);
                for part in spec.split(',') {
                    let (name, value) = part
                        .split_once('=')
                        .ok_or_else(|| CliError::Usage(format!("bad binding `{}`", part)))?;
                    let e: u32 = value
                        .trim()
                        .parse()
                        .map_err(|_| CliError::Usage(format!("bad element `{}`", value)))?;
                    let var = free
                        .iter()
                        .find(|v| &*v.name == name.trim())
                        .ok_or_else(|| CliError::Usage(format!("`{}` is not free in the formula", name)))?;
                    binding.push(var.clone(), e);
                }
            }
            let value = freqnet_core::logic::evaluate(&data, &binding, &f)
                .map_err(|e| CliError::Run(e.to_string()))?;
            emit(&cli.out, &format!("{}\n", value))
        }
        Command::Ground { model, size } => {
            let model = load_model(&model.model)?;
            let sizes = parse_sizes_arg(&model, &size.size)?;
            let net = freqnet_core::ground::ground(&model, &sizes)
                .map_err(|e| CliError::Run(e.to_string()))?;
            let mut text = String::new();
            for (rel, layer) in net.layers() {
                text.push_str(&format!(
                    "{}: {} atoms\n",
                    model.signature().relation(*rel).name,
                    layer.len()
                ));
            }
            text.push_str(&format!("total: {} atoms\n", net.atom_count()));
            emit(&cli.out, &text)
        }
        Command::Infer { model, size, query, exact, lw } => {
            let model = load_model(&model.model)?;
            let sizes = parse_sizes_arg(&model, &size.size)?;
            let q = parse_query_arg(&model, query)?;
            if *exact {
                let p = exact_query(&model, &sizes, &q, &caps)
                    .map_err(|e| CliError::Run(e.to_string()))?;
                emit(&cli.out, &format!("{}\n", p))
            } else {
                debug_assert!(*lw);
                let est = estimate_query(&model, &sizes, &q, cli.samples, cli.seed)
                    .map_err(|e| CliError::Run(e.to_string()))?;
                emit(
                    &cli.out,
                    &format!(
                        "{} stderr={} ess={:.1} seed={}\n",
                        est.value, est.std_error, est.effective_samples, est.seed
                    ),
                )
            }
        }
        Command::Sample { model, size } => {
            let model = load_model(&model.model)?;
            let sizes = parse_sizes_arg(&model, &size.size)?;
            let world = forward_sample(&model, &sizes, cli.seed)
                .map_err(|e| CliError::Run(e.to_string()))?;
            emit(&cli.out, &print_structure(&world))
        }
        Command::CompileLimit { model } => {
            let model = load_model(&model.model)?;
            let net = compile_any(&model, &caps, cli.force).map_err(classify_compile)?;
            let as_model = net.to_model().map_err(classify_compile)?;
            emit(&cli.out, &print_model(&as_model))
        }
        Command::CheckProjective { model, sizes, queries, num_queries } => {
            let model = load_model(&model.model)?;
            let schedule = parse_schedule(sizes)?;
            let mut qs = Vec::new();
            for q in queries {
                qs.push(parse_query_arg(&model, q)?);
            }
            if qs.is_empty() {
                qs = random_queries(&model, *num_queries, cli.seed)?;
            }
            let report = check_projectivity(&model, &schedule, &qs, &caps)
                .map_err(classify_compile)?;
            let mut text = String::new();
            for row in &report.rows {
                let values: Vec<String> =
                    row.values.iter().map(|(n, v)| format!("n={}: {:.12}", n, v)).collect();
                text.push_str(&format!(
                    "{} [{}] max deviation {:.3e} -> {}\n",
                    row.query,
                    values.join(", "),
                    row.max_deviation,
                    if row.ok { "projective" } else { "VIOLATION" }
                ));
            }
            text.push_str(&format!(
                "{}\n",
                if report.all_ok() { "all projective" } else { "violations found" }
            ));
            emit(&cli.out, &text)
        }
        Command::Converge { model, query, sizes } => {
            let model = load_model(&model.model)?;
            let q = parse_query_arg(&model, query)?;
            let spec = ExperimentSpec {
                name: "converge".into(),
                sizes: parse_schedule(sizes)?,
                samples: vec![cli.samples],
                grid: vec![],
                seed: cli.seed,
            };
            let rows = experiments::run_convergence(&model, &q, &spec, &caps, cli.force)
                .map_err(classify_experiment)?;
            emit(&cli.out, &convergence_csv(&rows))
        }
        Command::SweepUniform { model, query, param, sizes, from, to, step } => {
            let model = load_model(&model.model)?;
            let q = parse_query_arg(&model, query)?;
            let (rel, pname) = param
                .split_once('.')
                .ok_or_else(|| CliError::Usage("expected --param Relation.param".into()))?;
            if *step <= 0.0 {
                return Err(CliError::Usage("step must be positive".into()));
            }
            let mut grid = Vec::new();
            let mut w = *from;
            while w <= *to + 1e-12 {
                grid.push(w);
                w += step;
            }
            let spec = ExperimentSpec {
                name: "sweep".into(),
                sizes: parse_schedule(sizes)?,
                samples: vec![cli.samples],
                grid,
                seed: cli.seed,
            };
            let report =
                experiments::run_uniform_sweep(&model, rel, pname, &q, &spec, &caps, cli.force)
                    .map_err(classify_experiment)?;
            emit(&cli.out, &sweep_csv(&report))
        }
        Command::Learn { model, data, rate, iters, tol, fd } => {
            let model = load_model(&model.model)?;
            let mut structures = Vec::new();
            for path in data {
                let text = read_file(path)?;
                structures.push(
                    parse_structure(&text, model.signature())
                        .map_err(|e| CliError::Run(format!("{}: {}", path.display(), e)))?,
                );
            }
            if model.all_partition() {
                if structures.len() != 1 {
                    return Err(CliError::Usage(
                        "frequency fitting expects exactly one data structure".into(),
                    ));
                }
                let (fitted, diags) = fit_partition_frequencies(&model, &structures[0])
                    .map_err(|e| CliError::Run(e.to_string()))?;
                for d in diags {
                    eprintln!("note: {}", d);
                }
                emit(&cli.out, &print_model(&fitted))
            } else {
                let pm = ParametricModel::all_free(&model)
                    .map_err(|e| CliError::Run(e.to_string()))?;
                let config = FitConfig {
                    learning_rate: *rate,
                    max_iterations: *iters,
                    tolerance: *tol,
                    gradient_mode: if *fd {
                        GradientMode::FiniteDifference
                    } else {
                        GradientMode::Analytic
                    },
                    seed: cli.seed,
                };
                let result = fit_params(&pm, &structures, &config, &caps)
                    .map_err(|e| CliError::Run(e.to_string()))?;
                let params: Vec<String> = result
                    .param_names
                    .iter()
                    .zip(result.params.iter())
                    .map(|(n, v)| format!("{}={}", n, v))
                    .collect();
                emit(
                    &cli.out,
                    &format!(
                        "params,loglik,iterations,converged\n{},{},{},{}\n",
                        params.join(" "),
                        result.log_likelihood,
                        result.iterations,
                        result.converged
                    ),
                )
            }
        }
        Command::Transfer { model, skeleton, query, n, m, k } => {
            let generator = load_model(&model.model)?;
            let skeleton = match skeleton {
                Some(path) => load_model(path)?,
                None => generator.clone(),
            };
            let q = parse_query_arg(&generator, query)?;
            let config = FitConfig {
                max_iterations: 500,
                ..FitConfig::default()
            };
            let report = experiments::run_transfer(
                &generator, &skeleton, &q, *n, *m, *k, cli.seed, &config, &caps,
            )
            .map_err(classify_experiment)?;
            let params: Vec<String> = report
                .fit
                .param_names
                .iter()
                .zip(report.fit.params.iter())
                .map(|(n, v)| format!("{}={:.6}", n, v))
                .collect();
            emit(
                &cli.out,
                &format!(
                    "generator_limit={:.6}\nfitted_limit={:.6}\ngap={:.6}\nparams: {}\nloglik={:.4} iterations={} converged={}\n",
                    report.generator_limit,
                    report.fitted_limit,
                    report.gap,
                    params.join(" "),
                    report.fit.log_likelihood,
                    report.fit.iterations,
                    report.fit.converged
                ),
            )
        }
        Command::RlrMismatch => {
            let r = experiments::run_rlr_mismatch();
            emit(
                &cli.out,
                &format!(
                    "w_small={:.6}\nw_large={:.6}\ntransfer_prediction={:.3e}\n",
                    r.w_small, r.w_large, r.transfer_prediction
                ),
            )
        }
    }
}

/// Randomized ground queries over the model's relations, half with one
/// evidence literal. Deterministic per seed.
fn random_queries(model: &Model, count: usize, seed: u64) -> Result<Vec<Query>, CliError> {
    use freqnet_core::ground::GroundAtom;
    use freqnet_core::inference::Literal;
    let sig = model.signature();
    let mut state = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    let mut out = Vec::with_capacity(count);
    let rel_count = sig.relation_count();
    for i in 0..count {
        let rel = freqnet_core::logic::RelId((next() as usize) % rel_count);
        let arity = sig.relation(rel).arity();
        let args: Vec<u32> = (0..arity).map(|_| (next() % 3) as u32).collect();
        let target = if next() % 2 == 0 {
            Literal::pos(GroundAtom::new(rel, args))
        } else {
            Literal::neg(GroundAtom::new(rel, args))
        };
        let evidence = if i % 2 == 1 {
            let erel = freqnet_core::logic::RelId((next() as usize) % rel_count);
            let eargs: Vec<u32> = (0..sig.relation(erel).arity()).map(|_| (next() % 3) as u32).collect();
            let lit = if next() % 2 == 0 {
                Literal::pos(GroundAtom::new(erel, eargs))
            } else {
                Literal::neg(GroundAtom::new(erel, eargs))
            };
            if lit.atom == target.atom {
                vec![]
            } else {
                vec![lit]
            }
        } else {
            vec![]
        };
        out.push(Query::new(target, evidence).map_err(|e| CliError::Run(e.to_string()))?);
    }
    Ok(out)
}
