//! Batch driver: run protocols, explore schedules, check traces, and
//! operate the topology toolkit.
//!
//! Exit codes: 0 all checks passed, 1 a checker reported a violation
//! (counterexample written to the report), 2 usage or configuration error.


use std::fs;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use anonsim::agreement::{BaryProgram, SafeAgreementProgram, SetAgreementProgram};
use anonsim::bgsim::{BgSimProgram, SimSpec};
use anonsim::sim::explore::{explore, ExploreOptions, Leaf};
use anonsim::sim::trace::{read_jsonl, trace_to_string};
use anonsim::sim::{
    run, CrashPlan, CrashPoint, CrashRule, ModelConfig, OpKind, Program, SchedulePolicy, Trace,
};
use anonsim::topology::{
    bary_iter, check_carried, format_complex, make_kset_task, min_of_carrier, parse_carrier,
    parse_complex, skel, solve_task, Carriage, ColorlessTask,
    DEFAULT_SIZE_CAP,
};
use anonsim::value::{ValueArena, ValueTree};
use anonsim::verify::battery::{
    bary_battery, bgsim_battery, safe_agreement_battery, set_agreement_battery, weakset_battery,
};
use anonsim::verify::{CheckReport, Verdict, Violation};
use anonsim::weakset::{Mutation, WeakSetProgram, WsScriptOp};

#[derive(Parser)]
#[command(name = "anonsim", version, about = "anonymous shared-memory protocol simulator and checker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one protocol execution and check it.
    Run(RunArgs),
    /// Exhaustively explore interleavings (and crash placements) of a
    /// protocol at desk scale.
    Explore(ExploreArgs),
    /// Check an existing JSONL trace.
    Check(CheckArgs),
    /// Operate on complexes: subdivision, skeleton, carriage checks.
    Topology(TopologyArgs),
    /// Solve a colorless task end to end and verify the outputs.
    Solve(SolveArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Protocol {
    Weakset,
    Safeagreement,
    Setagreement,
    Bary,
    Bgsim,
}

#[derive(Args)]
struct ModelArgs {
    /// Process count.
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Crash budget (t < n).
    #[arg(long, default_value_t = 0)]
    t: usize,
    /// Seed for the seeded-random scheduler and crash placement.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Step budget per run.
    #[arg(long, default_value_t = 200_000)]
    max_steps: u64,
    /// Inputs, comma separated; defaults to 0..n-1.
    #[arg(long, value_delimiter = ',')]
    inputs: Option<Vec<i64>>,
    /// Crash plan entries "actor@step", comma separated.
    #[arg(long, value_delimiter = ',')]
    crash: Option<Vec<String>>,
    /// Read model parameters from a TOML config file instead.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    protocol: Protocol,
    #[command(flatten)]
    model: ModelArgs,
    /// Rounds for the barycentric protocol (and flooding depth for bgsim).
    #[arg(long, default_value_t = 1)]
    b: usize,
    /// Simulated protocol for bgsim.
    #[arg(long, value_enum, default_value_t = Simulated::Setagree)]
    simulated: Simulated,
    /// Scheduler policy.
    #[arg(long, default_value = "seeded-random")]
    policy: String,
    /// Write the JSONL trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the JSON check report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ExploreArgs {
    #[arg(long, value_enum)]
    protocol: Protocol,
    #[command(flatten)]
    model: ModelArgs,
    /// Depth bound on steps per branch.
    #[arg(long, default_value_t = 40)]
    depth: u64,
    /// Also branch on crash placements within the budget.
    #[arg(long, default_value_t = false)]
    crash_choices: bool,
    /// Rounds for the barycentric protocol (and flooding depth for bgsim).
    #[arg(long, default_value_t = 1)]
    b: usize,
    /// Simulated protocol for bgsim.
    #[arg(long, value_enum, default_value_t = Simulated::Setagree)]
    simulated: Simulated,
    /// Node budget for the search.
    #[arg(long, default_value_t = 5_000_000)]
    max_nodes: u64,
    /// Prune branches that reach an already-explored state (keeps long
    /// protocols tractable; history-level checks then see fewer branches).
    /// Defaults on for the agreement protocols, off for weakset/bary.
    #[arg(long)]
    dedup: Option<bool>,
    /// Write the JSON exploration report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Simulated {
    /// Full-information set agreement: wait for n-t filled components,
    /// decide the minimum input seen.
    Setagree,
    /// Full-information flooding for b rounds; decide everything seen.
    Flooding,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckMode {
    /// Linearization-point checker only.
    Tau,
    /// Brute-force oracle only.
    Oracle,
    /// The full battery for the object.
    Full,
}

#[derive(Args)]
struct CheckArgs {
    /// JSONL trace file.
    #[arg(long)]
    trace: PathBuf,
    /// Which object's battery to run.
    #[arg(long, value_enum)]
    object: Protocol,
    #[arg(long, value_enum, default_value_t = CheckMode::Full)]
    mode: CheckMode,
    /// t for the set-agreement decision bound.
    #[arg(long, default_value_t = 1)]
    t: usize,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct TopologyArgs {
    #[command(subcommand)]
    op: TopologyOp,
}

#[derive(Subcommand)]
enum TopologyOp {
    /// b-iterated barycentric subdivision of a complex file.
    Bary {
        /// Facet-list complex file.
        #[arg(long)]
        complex: PathBuf,
        #[arg(long, default_value_t = 1)]
        b: usize,
        /// Write the subdivided complex here (facet list).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// k-skeleton of a complex file.
    Skel {
        #[arg(long)]
        complex: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that the min-of-carrier map at depth b is carried by the
    /// k-set agreement task on the complex's vertices.
    CheckCarried {
        /// Input complex (facet list). Vertices must be integers.
        #[arg(long)]
        complex: PathBuf,
        /// Optional explicit carrier map file; defaults to the k-set task.
        #[arg(long)]
        carrier: Option<PathBuf>,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        b: usize,
    },
}

#[derive(Args)]
struct SolveArgs {
    /// Values forming the task universe; defaults to 0..n-1.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<i64>>,
    /// Solve the k-set agreement task with k = t+1 on those values.
    #[command(flatten)]
    model: ModelArgs,
    /// Subdivision depth of the vertex map.
    #[arg(long, default_value_t = 0)]
    b: usize,
    /// Number of seeded runs.
    #[arg(long, default_value_t = 1)]
    runs: u64,
    #[arg(long)]
    report: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(clean) => {
            if clean {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool, String> {
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Explore(args) => cmd_explore(args),
        Command::Check(args) => cmd_check(args),
        Command::Topology(args) => cmd_topology(args),
        Command::Solve(args) => cmd_solve(args),
    }
}

/// TOML config mirror of the model parameters.
#[derive(serde::Deserialize)]
struct FileConfig {
    n: Option<usize>,
    t: Option<usize>,
    seed: Option<u64>,
    max_steps: Option<u64>,
    inputs: Option<Vec<i64>>,
    crash: Option<Vec<String>>,
}

struct Model {
    config: ModelConfig,
    inputs: Vec<i64>,
    plan: CrashPlan,
}

fn parse_crash_entry(s: &str) -> Result<CrashRule, String> {
    // Forms: "A@S" (crash actor A at step S), "A@S!op" (outside op after S),
    // "A@op" (inside the first op of that kind).
    let (actor, rest) = s
        .split_once('@')
        .ok_or_else(|| format!("bad crash entry {s}: expected actor@step"))?;
    let actor: u32 = actor
        .parse()
        .map_err(|_| format!("bad crash actor in {s}"))?;
    if let Some((step, op)) = rest.split_once('!') {
        let step = step.parse().map_err(|_| format!("bad crash step in {s}"))?;
        let op = OpKind::parse(op).ok_or_else(|| format!("bad op kind in {s}"))?;
        return Ok(CrashRule {
            actor,
            point: CrashPoint::OutsideOp { step, op },
        });
    }
    match rest.parse::<u64>() {
        Ok(step) => Ok(CrashRule {
            actor,
            point: CrashPoint::AtStep(step),
        }),
        Err(_) => {
            let op = OpKind::parse(rest).ok_or_else(|| format!("bad crash point in {s}"))?;
            Ok(CrashRule {
                actor,
                point: CrashPoint::InsideOp { op, object: None },
            })
        }
    }
}

fn build_model(args: &ModelArgs) -> Result<Model, String> {
    let mut n = args.n;
    let mut t = args.t;
    let mut seed = args.seed;
    let mut max_steps = args.max_steps;
    let mut inputs = args.inputs.clone();
    let mut crash = args.crash.clone();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let file: FileConfig = toml::from_str(&text).map_err(|e| e.to_string())?;
        if let Some(v) = file.n {
            n = v;
        }
        if let Some(v) = file.t {
            t = v;
        }
        if let Some(v) = file.seed {
            seed = v;
        }
        if let Some(v) = file.max_steps {
            max_steps = v;
        }
        if file.inputs.is_some() {
            inputs = file.inputs;
        }
        if file.crash.is_some() {
            crash = file.crash;
        }
    }
    let config = ModelConfig {
        n,
        t,
        max_steps,
        seed,
    };
    config.validate().map_err(|e| e.to_string())?;
    let inputs = inputs.unwrap_or_else(|| (0..n as i64).collect());
    if inputs.len() != n {
        return Err(format!("{} inputs for n = {n}", inputs.len()));
    }
    let rules = crash
        .unwrap_or_default()
        .iter()
        .map(|s| parse_crash_entry(s))
        .collect::<Result<Vec<_>, _>>()?;
    let plan = CrashPlan { rules };
    plan.validate(&config).map_err(|e| e.to_string())?;
    Ok(Model {
        config,
        inputs,
        plan,
    })
}

fn parse_policy(s: &str) -> Result<SchedulePolicy, String> {
    match s {
        "round-robin" => Ok(SchedulePolicy::RoundRobin),
        "seeded-random" => Ok(SchedulePolicy::SeededRandom),
        other => Err(format!("unknown policy {other}")),
    }
}

fn write_report<T: serde::Serialize>(path: &Option<PathBuf>, report: &T) -> Result<(), String> {
    if let Some(path) = path {
        let json = serde_json::to_string_pretty(report).map_err(|e| e.to_string())?;
        fs::write(path, json).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(())
}

fn battery_for(
    protocol: Protocol,
    t: usize,
) -> impl Fn(&Trace, &mut ValueArena) -> Vec<Violation> {
    move |trace, arena| match protocol {
        Protocol::Weakset => weakset_battery(trace, arena),
        Protocol::Safeagreement => safe_agreement_battery(trace, arena),
        Protocol::Setagreement => set_agreement_battery(trace, arena, t),
        Protocol::Bary => bary_battery(trace, arena),
        Protocol::Bgsim => bgsim_battery(trace, arena),
    }
}

/// One program instance per process for the chosen protocol.
enum Programs {
    Weakset(Vec<WeakSetProgram>),
    Safe(Vec<SafeAgreementProgram>),
    SetAgree(Vec<SetAgreementProgram>),
    Bary(Vec<BaryProgram>),
    BgSim(Vec<BgSimProgram>),
}

fn build_programs(protocol: Protocol, model: &Model, b: usize, simulated: Simulated) -> Programs {
    let inputs = &model.inputs;
    match protocol {
        Protocol::Weakset => Programs::Weakset(
            inputs
                .iter()
                .map(|&v| {
                    WeakSetProgram::with_mutation(
                        vec![WsScriptOp::Add(ValueTree::Int(v)), WsScriptOp::Get],
                        Mutation::Faithful,
                    )
                })
                .collect(),
        ),
        Protocol::Safeagreement => Programs::Safe(
            inputs
                .iter()
                .map(|&v| SafeAgreementProgram::propose_then_resolve(v, 2 * model.config.n + 2))
                .collect(),
        ),
        Protocol::Setagreement => Programs::SetAgree(
            inputs
                .iter()
                .map(|&v| SetAgreementProgram::new(v, model.config.t))
                .collect(),
        ),
        Protocol::Bary => Programs::Bary(inputs.iter().map(|&v| BaryProgram::new(v, b)).collect()),
        Protocol::Bgsim => {
            let spec = match simulated {
                Simulated::Setagree => SimSpec::SetAgreeMin {
                    wait_for: model.config.n - model.config.t,
                },
                Simulated::Flooding => SimSpec::Flood { rounds: b.max(1) },
            };
            Programs::BgSim(inputs.iter().map(|&v| BgSimProgram::new(v, spec.clone())).collect())
        }
    }
}

#[derive(serde::Serialize)]
struct RunReport {
    steps: u64,
    truncated: bool,
    checks: CheckReport,
}

fn cmd_run(args: RunArgs) -> Result<bool, String> {
    let model = build_model(&args.model)?;
    let policy = parse_policy(&args.policy)?;
    let battery = battery_for(args.protocol, model.config.t);

    fn go<P: Program>(
        programs: Vec<P>,
        model: &Model,
        policy: &SchedulePolicy,
        battery: impl Fn(&Trace, &mut ValueArena) -> Vec<Violation>,
        trace_path: &Option<PathBuf>,
        report_path: &Option<PathBuf>,
    ) -> Result<bool, String> {
        let mut out =
            run(programs, &model.config, &model.plan, policy).map_err(|e| e.to_string())?;
        if let Some(path) = trace_path {
            let text = trace_to_string(&out.trace, &out.arena);
            fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))?;
        }
        let violations = battery(&out.trace, &mut out.arena);
        let mut checks = CheckReport::default();
        checks.record(
            "battery",
            if violations.is_empty() {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
        );
        checks.extend_violations(violations);
        let clean = checks.all_passed();
        for v in &checks.violations {
            eprintln!("violation: {}", v.render());
        }
        let report = RunReport {
            steps: out.steps,
            truncated: out.trace.truncated,
            checks,
        };
        write_report(report_path, &report)?;
        println!(
            "run: {} steps, truncated={}, {}",
            report.steps,
            report.truncated,
            if clean { "clean" } else { "violations found" }
        );
        Ok(clean)
    }

    match build_programs(args.protocol, &model, args.b, args.simulated) {
        Programs::Weakset(p) => go(p, &model, &policy, battery, &args.trace, &args.report),
        Programs::Safe(p) => go(p, &model, &policy, battery, &args.trace, &args.report),
        Programs::SetAgree(p) => go(p, &model, &policy, battery, &args.trace, &args.report),
        Programs::Bary(p) => go(p, &model, &policy, battery, &args.trace, &args.report),
        Programs::BgSim(p) => go(p, &model, &policy, battery, &args.trace, &args.report),
    }
}

fn cmd_explore(args: ExploreArgs) -> Result<bool, String> {
    let model = build_model(&args.model)?;
    let mut opts = ExploreOptions::exact(args.depth).with_max_nodes(args.max_nodes);
    if args.crash_choices {
        opts = opts.with_crashes();
    }
    let dedup = args.dedup.unwrap_or(matches!(
        args.protocol,
        Protocol::Safeagreement | Protocol::Setagreement | Protocol::Bgsim
    ));
    if dedup {
        opts = opts.deduped();
    }
    let battery = battery_for(args.protocol, model.config.t);

    fn go<P: Program>(
        programs: Vec<P>,
        model: &Model,
        opts: &ExploreOptions,
        battery: impl Fn(&Trace, &mut ValueArena) -> Vec<Violation>,
        report_path: &Option<PathBuf>,
    ) -> Result<bool, String> {
        let report = explore(programs, &model.config, opts, |leaf: Leaf<'_, P>| {
            let mut found = battery(leaf.trace, leaf.arena);
            found.truncate(4);
            found.into_iter().map(|v| v.render()).collect()
        })
        .map_err(|e| e.to_string())?;
        let clean = report.violations == 0 && report.no_progress_cycles == 0;
        println!(
            "explore: {} interleavings ({} complete), {} violations, {} no-progress cycles{}",
            report.interleavings,
            report.complete_histories,
            report.violations,
            report.no_progress_cycles,
            if report.budget_exhausted {
                " (node budget hit)"
            } else {
                ""
            }
        );
        for v in &report.violation_samples {
            eprintln!("violation: {v}");
        }
        write_report(report_path, &report)?;
        Ok(clean)
    }

    match build_programs(args.protocol, &model, args.b, args.simulated) {
        Programs::Weakset(p) => go(p, &model, &opts, battery, &args.report),
        Programs::Safe(p) => go(p, &model, &opts, battery, &args.report),
        Programs::SetAgree(p) => go(p, &model, &opts, battery, &args.report),
        Programs::Bary(p) => go(p, &model, &opts, battery, &args.report),
        Programs::BgSim(p) => go(p, &model, &opts, battery, &args.report),
    }
}

fn cmd_check(args: CheckArgs) -> Result<bool, String> {
    let file = fs::File::open(&args.trace).map_err(|e| format!("{}: {e}", args.trace.display()))?;
    let mut arena = ValueArena::new();
    let trace = read_jsonl(BufReader::new(file), &mut arena).map_err(|e| e.to_string())?;
    trace.check_well_formed().map_err(|e| format!("malformed trace: {e}"))?;

    let violations = match (args.object, args.mode) {
        (Protocol::Weakset, CheckMode::Tau) => {
            let outcome = anonsim::verify::linearize::linearize_tau(
                &trace,
                &mut arena,
                &anonsim::verify::history::Lens::Physical,
                anonsim::verify::history::GetTauMode::Equality,
            );
            outcome.violations
        }
        (Protocol::Weakset, CheckMode::Oracle) => {
            match anonsim::verify::linearize::linearize_bruteforce(
                &trace,
                &mut arena,
                &anonsim::verify::history::Lens::Physical,
                anonsim::verify::battery::BF_BUDGET,
            ) {
                anonsim::verify::linearize::BfVerdict::Linearizable => Vec::new(),
                anonsim::verify::linearize::BfVerdict::NotLinearizable => vec![Violation::new(
                    "oracle",
                    "no legal sequential witness exists".into(),
                )],
                anonsim::verify::linearize::BfVerdict::Inconclusive => {
                    return Err("oracle search budget exceeded: inconclusive".into())
                }
            }
        }
        (protocol, _) => battery_for(protocol, args.t)(&trace, &mut arena),
    };

    let mut checks = CheckReport::default();
    checks.record(
        "trace",
        if violations.is_empty() {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
    );
    checks.extend_violations(violations);
    let clean = checks.all_passed();
    for v in &checks.violations {
        eprintln!("violation: {}", v.render());
    }
    write_report(&args.report, &checks)?;
    println!("check: {}", if clean { "clean" } else { "violations found" });
    Ok(clean)
}

fn cmd_topology(args: TopologyArgs) -> Result<bool, String> {
    match args.op {
        TopologyOp::Bary { complex, b, out } => {
            let text =
                fs::read_to_string(&complex).map_err(|e| format!("{}: {e}", complex.display()))?;
            let k = parse_complex(&text).map_err(|e| e.to_string())?;
            let result = bary_iter(&k, b, DEFAULT_SIZE_CAP).map_err(|e| e.to_string())?;
            let rendered = format_complex(&result);
            match out {
                Some(path) => {
                    fs::write(&path, rendered).map_err(|e| format!("{}: {e}", path.display()))?
                }
                None => println!("{rendered}"),
            }
            println!(
                "bary^{b}: {} vertices, {} simplices",
                result.vertex_count(),
                result.simplex_count()
            );
            Ok(true)
        }
        TopologyOp::Skel { complex, k, out } => {
            let text =
                fs::read_to_string(&complex).map_err(|e| format!("{}: {e}", complex.display()))?;
            let c = parse_complex(&text).map_err(|e| e.to_string())?;
            let result = skel(&c, k);
            let rendered = format_complex(&result);
            match out {
                Some(path) => {
                    fs::write(&path, rendered).map_err(|e| format!("{}: {e}", path.display()))?
                }
                None => println!("{rendered}"),
            }
            println!(
                "skel^{k}: {} vertices, {} simplices",
                result.vertex_count(),
                result.simplex_count()
            );
            Ok(true)
        }
        TopologyOp::CheckCarried {
            complex,
            carrier,
            k,
            b,
        } => {
            let text =
                fs::read_to_string(&complex).map_err(|e| format!("{}: {e}", complex.display()))?;
            let input = parse_complex(&text).map_err(|e| e.to_string())?;
            let task = match carrier {
                Some(path) => {
                    let ctext =
                        fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                    let delta = parse_carrier(&ctext).map_err(|e| e.to_string())?;
                    let output = skel(&input, k);
                    ColorlessTask::new(input.clone(), output, delta).map_err(|e| e.to_string())?
                }
                None => {
                    let values: Vec<i64> = input
                        .vertices()
                        .into_iter()
                        .map(|v| match v {
                            ValueTree::Int(i) => Ok(i),
                            other => Err(format!("non-integer vertex {other}")),
                        })
                        .collect::<Result<_, _>>()?;
                    make_kset_task(&values, k).map_err(|e| e.to_string())?
                }
            };
            let table = min_of_carrier(&task.input, b).map_err(|e| e.to_string())?;
            match check_carried(&table, &task).map_err(|e| e.to_string())? {
                Carriage::Carried => {
                    println!("carried: the depth-{b} map respects the carrier");
                    Ok(true)
                }
                Carriage::Fail { simplex, reason } => {
                    eprintln!("violation: not carried at {simplex}: {reason}");
                    Ok(false)
                }
            }
        }
    }
}

#[derive(serde::Serialize)]
struct SolveReport {
    runs: u64,
    violations: u64,
    sample: Option<String>,
}

fn cmd_solve(args: SolveArgs) -> Result<bool, String> {
    let model = build_model(&args.model)?;
    let n = model.config.n;
    let t = model.config.t;
    let values = args.values.unwrap_or_else(|| (0..n as i64).collect());
    let task = make_kset_task(&values, t + 1).map_err(|e| e.to_string())?;
    let restricted = task.restrict_to_skeleton(t);
    let table = min_of_carrier(&restricted.input, args.b).map_err(|e| e.to_string())?;
    let inputs: Vec<ValueTree> = model.inputs.iter().map(|&v| ValueTree::Int(v)).collect();

    let mut violations = 0u64;
    let mut sample = None;
    for i in 0..args.runs {
        let outcome = solve_task(
            &task,
            &table,
            n,
            t,
            &inputs,
            &model.plan,
            model.config.seed.wrapping_add(i),
            model.config.max_steps,
        )
        .map_err(|e| e.to_string())?;
        if !outcome.in_delta {
            violations += 1;
            if sample.is_none() {
                sample = Some(format!(
                    "run {i}: outputs {:?} escape the carrier",
                    outcome.outputs
                ));
            }
        }
    }
    let clean = violations == 0;
    println!(
        "solve: {} runs, {} carrier violations",
        args.runs, violations
    );
    if let Some(s) = &sample {
        eprintln!("violation: {s}");
    }
    write_report(&args.report, &SolveReport {
        runs: args.runs,
        violations,
        sample,
    })?;
    Ok(clean)
}
