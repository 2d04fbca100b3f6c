use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use ftkit::galileo;
use ftkit::mttf::{LimitParams, MttfMethod, SubstitutionParams};
use ftkit::ordering::{order_from_list, parse_order_file};
use ftkit::{
    uniform_times, DftAnalyzer, DftOptions, FaultTree, ImportanceMeasure, OrderingHeuristic,
    StaticAnalysis, TranslateOptions, VariableOrder,
};

#[derive(Parser, Debug)]
#[command(name = "ftkit", version, about = "Static and dynamic fault tree analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one analysis on a Galileo model.
    Analyze(AnalyzeArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Metric {
    Mcs,
    Unreliability,
    Curve,
    Importance,
    Mttf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Measure {
    Birnbaum,
    Cif,
    Vf,
    Raw,
    Rrw,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Limit,
    Substitution,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(clap::Args, Debug)]
struct AnalyzeArgs {
    metric: Metric,
    /// Galileo file, or `-` for standard input.
    input: String,
    /// `dfs`, `tdlr`, or a file listing basic events one per line.
    #[arg(long, default_value = "dfs")]
    ordering: String,
    /// Mission time for unreliability and importance.
    #[arg(long, default_value_t = 1.0)]
    time: f64,
    #[arg(long, default_value_t = 10_000)]
    points: usize,
    #[arg(long, default_value_t = 10.0)]
    horizon: f64,
    #[arg(long, default_value_t = ftkit::DEFAULT_CHUNK_SIZE)]
    chunk_size: usize,
    #[arg(long, value_enum, default_value = "birnbaum")]
    measure: Measure,
    #[arg(long, value_enum, default_value = "limit")]
    method: Method,
    /// Panel contribution below which the limit method stops.
    #[arg(long, default_value_t = 1e-12)]
    epsilon: f64,
    #[arg(long, default_value_t = 1e-10)]
    initial_step: f64,
    /// Sample count of the substitution method.
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    /// Drop cut sets with more events than this.
    #[arg(long)]
    max_order: Option<usize>,
    /// Fail when more cut sets than this would be listed.
    #[arg(long)]
    max_solutions: Option<usize>,
    /// State cap for each Markov chain.
    #[arg(long)]
    max_states: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Solve dynamic trees as one Markov chain.
    #[arg(long)]
    no_modularisation: bool,
    /// Keep intermediate gate diagrams during translation.
    #[arg(long)]
    cache_gates: bool,
    /// Write the top-level BDD as DOT.
    #[arg(long)]
    dump_bdd: Option<PathBuf>,
    /// Write the solved Markov chains.
    #[arg(long)]
    dump_ctmc: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Analysis(String),
}

impl Failure {
    fn analysis(e: impl std::fmt::Display) -> Self {
        Failure::Analysis(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let Command::Analyze(args) = cli.command;
    match run(&args) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Analysis(msg)) => {
            eprintln!("analysis failed: {msg}");
            ExitCode::from(2)
        }
    }
}

fn read_input(input: &str) -> Result<String, Failure> {
    let mut text = String::new();
    if input == "-" {
        std::io::stdin()
            .read_to_string(&mut text)
            .map_err(|e| Failure::Usage(format!("cannot read standard input: {e}")))?;
    } else {
        text = std::fs::read_to_string(input)
            .map_err(|e| Failure::Usage(format!("cannot read `{input}`: {e}")))?;
    }
    Ok(text)
}

fn check_args(a: &AnalyzeArgs) -> Result<(), Failure> {
    let usage = |m: &str| Err(Failure::Usage(m.to_string()));
    if a.chunk_size == 0 {
        return usage("--chunk-size must be positive");
    }
    if !(a.time.is_finite() && a.time >= 0.0) {
        return usage("--time must be a finite non-negative number");
    }
    if a.metric == Metric::Curve {
        if a.points == 0 {
            return usage("--points must be positive");
        }
        if !(a.horizon.is_finite() && a.horizon >= 0.0) {
            return usage("--horizon must be a finite non-negative number");
        }
        if a.points > 1 && a.horizon == 0.0 {
            return usage("--horizon must be positive when more than one point is requested");
        }
    }
    if a.metric == Metric::Mttf {
        if !(a.epsilon.is_finite() && a.epsilon > 0.0) {
            return usage("--epsilon must be positive");
        }
        if !(a.initial_step.is_finite() && a.initial_step > 0.0) {
            return usage("--initial-step must be positive");
        }
        if a.samples < 2 {
            return usage("--samples must be at least 2");
        }
    }
    if a.max_states == Some(0) || a.max_solutions == Some(0) {
        return usage("caps must be positive");
    }
    Ok(())
}

fn heuristic(name: &str) -> Option<OrderingHeuristic> {
    match name {
        "dfs" => Some(OrderingHeuristic::Dfs),
        "tdlr" => Some(OrderingHeuristic::Tdlr),
        _ => None,
    }
}

fn static_order(ft: &FaultTree, ordering: &str) -> Result<VariableOrder, Failure> {
    if let Some(h) = heuristic(ordering) {
        return Ok(VariableOrder::from_heuristic(ft, h));
    }
    let text = std::fs::read_to_string(ordering)
        .map_err(|e| Failure::Usage(format!("cannot read order file `{ordering}`: {e}")))?;
    order_from_list(ft, &parse_order_file(&text))
        .map_err(|e| Failure::Usage(format!("order file `{ordering}`: {e}")))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents)
        .map_err(|e| Failure::Usage(format!("cannot write `{}`: {e}", path.display())))
}

fn run(a: &AnalyzeArgs) -> Result<String, Failure> {
    check_args(a)?;
    let text = read_input(&a.input)?;
    let model = galileo::parse(&text).map_err(|e| {
        let name = if a.input == "-" { "<stdin>" } else { a.input.as_str() };
        Failure::Usage(format!("{name}: {e}"))
    })?;
    let ft = model.tree;
    let results = if ft.is_static() {
        run_static(a, &ft)?
    } else {
        run_dynamic(a, &ft)?
    };
    Ok(render(a, &results))
}

enum Results {
    CutSets(Vec<Vec<String>>),
    Curve { times: Vec<f64>, values: Vec<f64> },
    Point { time: f64, value: f64 },
    Importance(Vec<(String, f64)>),
    Mttf(f64),
}

fn measure(m: Measure) -> ImportanceMeasure {
    match m {
        Measure::Birnbaum => ImportanceMeasure::Birnbaum,
        Measure::Cif => ImportanceMeasure::CriticalImportance,
        Measure::Vf => ImportanceMeasure::VeselyFussell,
        Measure::Raw => ImportanceMeasure::RiskAchievementWorth,
        Measure::Rrw => ImportanceMeasure::RiskReductionWorth,
    }
}

fn run_static(a: &AnalyzeArgs, ft: &FaultTree) -> Result<Results, Failure> {
    if a.no_modularisation || a.max_states.is_some() || a.dump_ctmc.is_some() {
        return Err(Failure::Usage(
            "Markov chain options only apply to dynamic fault trees".into(),
        ));
    }
    let order = static_order(ft, &a.ordering)?;
    let mut sa = StaticAnalysis::new(ft, &order, TranslateOptions { cache_gates: a.cache_gates })
        .map_err(Failure::analysis)?;
    if let Some(cap) = a.max_solutions {
        sa.manager_mut().set_solution_cap(cap);
    }
    if let Some(path) = &a.dump_bdd {
        write_file(path, &sa.manager().to_dot(sa.root()))?;
    }
    let r = match a.metric {
        Metric::Mcs => Results::CutSets(sa.minimal_cut_sets(a.max_order).map_err(Failure::analysis)?),
        Metric::Unreliability => Results::Point {
            time: a.time,
            value: sa.unreliability_at(a.time).map_err(Failure::analysis)?,
        },
        Metric::Curve => {
            let times = uniform_times(a.horizon, a.points);
            let curve = sa.curve(&times, a.chunk_size).map_err(Failure::analysis)?;
            Results::Curve {
                times: curve.times().to_vec(),
                values: curve.values().to_vec(),
            }
        }
        Metric::Importance => Results::Importance(
            sa.importance_at(measure(a.measure), a.time).map_err(Failure::analysis)?,
        ),
        Metric::Mttf => {
            let method = match a.method {
                Method::Limit => MttfMethod::Limit(LimitParams {
                    epsilon: a.epsilon,
                    initial_step: a.initial_step,
                    chunk_size: a.chunk_size,
                    ..LimitParams::default()
                }),
                Method::Substitution => MttfMethod::Substitution(SubstitutionParams {
                    samples: a.samples,
                    chunk_size: a.chunk_size,
                }),
            };
            Results::Mttf(sa.mttf(&method).map_err(Failure::analysis)?)
        }
    };
    Ok(r)
}

fn run_dynamic(a: &AnalyzeArgs, ft: &FaultTree) -> Result<Results, Failure> {
    let unsupported = match a.metric {
        Metric::Mcs => Some("minimal cut sets"),
        Metric::Importance => Some("importance measures"),
        Metric::Mttf => Some("MTTF"),
        _ => None,
    };
    if let Some(what) = unsupported {
        return Err(Failure::Usage(format!(
            "{what} cannot be computed for a tree with dynamic gates"
        )));
    }
    let Some(ordering) = heuristic(&a.ordering) else {
        return Err(Failure::Usage(
            "order files are only supported for static fault trees".into(),
        ));
    };
    let mut opts = DftOptions {
        modularise: !a.no_modularisation,
        ordering,
        chunk_size: a.chunk_size,
        ..DftOptions::default()
    };
    if let Some(cap) = a.max_states {
        opts.state_cap = cap;
    }
    let analyzer = DftAnalyzer::new(ft.clone(), opts).map_err(|e| Failure::Usage(e.to_string()))?;
    let times = match a.metric {
        Metric::Curve => uniform_times(a.horizon, a.points),
        _ => vec![a.time],
    };
    let result = analyzer.analyze(&times).map_err(Failure::analysis)?;
    if let Some(path) = &a.dump_ctmc {
        let mut out = String::new();
        for (root, chain) in analyzer.solved_chains() {
            let _ = writeln!(out, "# module {root}");
            out.push_str(&chain.dump());
        }
        write_file(path, &out)?;
    }
    if let Some(path) = &a.dump_bdd {
        if a.no_modularisation {
            return Err(Failure::Usage(
                "--dump-bdd needs a static residual tree; drop --no-modularisation".into(),
            ));
        }
        let (residual, _, _) = analyzer.residual_tree(&times).map_err(Failure::analysis)?;
        let order = VariableOrder::from_heuristic(&residual, ordering);
        let sa = StaticAnalysis::new(&residual, &order, TranslateOptions { cache_gates: a.cache_gates })
            .map_err(Failure::analysis)?;
        write_file(path, &sa.manager().to_dot(sa.root()))?;
    }
    let curve = result.curve;
    Ok(match a.metric {
        Metric::Curve => Results::Curve {
            times: curve.times().to_vec(),
            values: curve.values().to_vec(),
        },
        _ => Results::Point {
            time: a.time,
            value: curve.values()[0],
        },
    })
}

fn metric_name(m: Metric) -> &'static str {
    match m {
        Metric::Mcs => "mcs",
        Metric::Unreliability => "unreliability",
        Metric::Curve => "curve",
        Metric::Importance => "importance",
        Metric::Mttf => "mttf",
    }
}

fn parameters(a: &AnalyzeArgs) -> Value {
    let mut p = serde_json::Map::new();
    p.insert("ordering".into(), json!(a.ordering));
    match a.metric {
        Metric::Mcs => {
            p.insert("max_order".into(), json!(a.max_order));
        }
        Metric::Unreliability => {
            p.insert("time".into(), json!(a.time));
        }
        Metric::Curve => {
            p.insert("horizon".into(), json!(a.horizon));
            p.insert("points".into(), json!(a.points));
            p.insert("chunk_size".into(), json!(a.chunk_size));
        }
        Metric::Importance => {
            p.insert("measure".into(), json!(format!("{:?}", a.measure).to_lowercase()));
            p.insert("time".into(), json!(a.time));
        }
        Metric::Mttf => match a.method {
            Method::Limit => {
                p.insert("method".into(), json!("limit"));
                p.insert("epsilon".into(), json!(a.epsilon));
                p.insert("initial_step".into(), json!(a.initial_step));
            }
            Method::Substitution => {
                p.insert("method".into(), json!("substitution"));
                p.insert("samples".into(), json!(a.samples));
            }
        },
    }
    if matches!(a.metric, Metric::Unreliability | Metric::Curve) {
        p.insert("modularisation".into(), json!(!a.no_modularisation));
    }
    Value::Object(p)
}

fn render(a: &AnalyzeArgs, r: &Results) -> String {
    match a.format {
        Format::Json => {
            let results = match r {
                Results::CutSets(sets) => json!(sets),
                Results::Curve { times, values } => json!({ "time": times, "probability": values }),
                Results::Point { time, value } => json!({ "time": time, "probability": value }),
                Results::Importance(rows) => Value::Array(
                    rows.iter().map(|(be, v)| json!({ "be": be, "value": v })).collect(),
                ),
                Results::Mttf(v) => json!({ "mttf": v }),
            };
            let doc = json!({
                "metric": metric_name(a.metric),
                "model": a.input,
                "parameters": parameters(a),
                "results": results,
            });
            let mut s = serde_json::to_string_pretty(&doc).expect("serialisable");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = String::new();
            match r {
                Results::CutSets(sets) => {
                    for set in sets {
                        let _ = writeln!(s, "{}", set.join(","));
                    }
                }
                Results::Curve { times, values } => {
                    s.push_str("time,probability\n");
                    for (t, v) in times.iter().zip(values) {
                        let _ = writeln!(s, "{t},{v}");
                    }
                }
                Results::Point { time, value } => {
                    let _ = writeln!(s, "time,probability\n{time},{value}");
                }
                Results::Importance(rows) => {
                    s.push_str("be,value\n");
                    for (be, v) in rows {
                        let _ = writeln!(s, "{be},{v}");
                    }
                }
                Results::Mttf(v) => {
                    let _ = writeln!(s, "mttf\n{v}");
                }
            }
            s
        }
    }
}
