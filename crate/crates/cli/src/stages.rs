use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use log::{info, warn};
use serde::Serialize;
use sha2::{Digest, Sha256};

use chainforge_core::des::{self, SimConfig, ValidationSummary};
use chainforge_core::gfa::{run_gfa, GfaConfig, GfaResult};
use chainforge_core::model::{resolve_design, NetworkDesign, NetworkInstance};
use chainforge_core::pareto::{epsilon_grid, sweep, ParetoSolution, SolutionPool};
use chainforge_core::stochastic::{EstimateResult, PeriodInput, PlanConfig, PlanSummary, Planner};

use crate::args::{Cli, GfaArgs, GfaOpts, OptimizeArgs, OptimizeOpts, ParetoArgs, RunArgs, SimOpts, ValidateArgs};

/// A failed stage: exit code 2 for unusable input, 1 for everything else.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub message: String,
    pub code: u8,
}

impl StageError {
    fn input(stage: &'static str, message: impl ToString) -> Self {
        Self {
            stage,
            message: message.to_string(),
            code: 2,
        }
    }

    fn failed(stage: &'static str, message: impl ToString) -> Self {
        Self {
            stage,
            message: message.to_string(),
            code: 1,
        }
    }
}

type StageResult<T> = Result<T, StageError>;

fn read_text(stage: &'static str, path: &Path) -> StageResult<String> {
    fs::read_to_string(path).map_err(|e| StageError::input(stage, format!("cannot read {}: {e}", path.display())))
}

fn load(stage: &'static str, path: &Path, std_dev: bool) -> StageResult<NetworkInstance> {
    let text = read_text(stage, path)?;
    let mut inst =
        NetworkInstance::from_json(&text).map_err(|e| StageError::input(stage, format!("{}: {e}", path.display())))?;
    if std_dev {
        variance_as_std_dev(&mut inst);
    }
    Ok(inst)
}

/// Reinterprets every demand `variance` as a standard deviation.
fn variance_as_std_dev(inst: &mut NetworkInstance) {
    let d = &mut inst.stochastic.demand;
    d.variance *= d.variance;
    for region in &mut inst.regions {
        for c in &mut region.customers {
            if let Some(d) = &mut c.demand {
                d.variance *= d.variance;
            }
        }
    }
}

fn load_design(stage: &'static str, path: &Path, inst: &NetworkInstance) -> StageResult<(NetworkInstance, NetworkDesign)> {
    let text = read_text(stage, path)?;
    resolve_design(&text, inst).map_err(|e| StageError::input(stage, format!("{}: {e}", path.display())))
}

fn create_dir(stage: &'static str, dir: &Path) -> StageResult<()> {
    fs::create_dir_all(dir).map_err(|e| StageError::failed(stage, format!("cannot create {}: {e}", dir.display())))
}

fn write_file(stage: &'static str, path: &Path, write: impl FnOnce(&mut dyn Write) -> Result<(), String>) -> StageResult<()> {
    let fail = |e: String| StageError::failed(stage, format!("cannot write {}: {e}", path.display()));
    let file = File::create(path).map_err(|e| fail(e.to_string()))?;
    let mut out = BufWriter::new(file);
    write(&mut out).map_err(fail)?;
    out.flush().map_err(|e| fail(e.to_string()))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn write_text(stage: &'static str, path: &Path, text: &str) -> StageResult<()> {
    write_file(stage, path, |w| w.write_all(text.as_bytes()).map_err(|e| e.to_string()))
}

// ---- gfa

fn gfa_stage(inst: &NetworkInstance, opts: &GfaOpts, seed: u64, out: &Path) -> StageResult<GfaResult> {
    let config = GfaConfig {
        dc_counts: opts.dc_counts.iter().cloned().collect(),
        max_iterations: opts.max_iterations,
        tolerance: opts.tolerance,
        restarts: opts.restarts,
        seed,
    };
    let res = run_gfa(inst, &config).map_err(|e| StageError::failed("gfa", e))?;
    if !res.converged {
        warn!("weiszfeld hit the iteration limit in at least one region");
    }
    create_dir("gfa", out)?;
    write_text("gfa", &out.join("design.json"), &res.design.to_json(&res.instance, res.iterations, res.converged))?;
    Ok(res)
}

pub fn gfa_command(cli: &Cli, a: &GfaArgs) -> StageResult<()> {
    let inst = load("gfa", &a.instance, false)?;
    gfa_stage(&inst, &a.gfa, cli.seed, &cli.out).map(|_| ())
}

// ---- optimize

/// One grid point that produced an estimate, and where its plan went.
struct Solved {
    estimate: EstimateResult,
    plan: PlanSummary,
    plan_path: PathBuf,
}

fn plan_config(opts: &OptimizeOpts) -> PlanConfig {
    PlanConfig {
        balance: opts.balance.into(),
        affordability: opts.affordability.into(),
        ..PlanConfig::default()
    }
}

fn with_safety_stock(stage: &'static str, inst: NetworkInstance, v: Option<f64>) -> StageResult<NetworkInstance> {
    match v {
        Some(v) => inst.with_safety_stock(v).map_err(|e| StageError::input(stage, e)),
        None => Ok(inst),
    }
}

fn optimize_stage(
    inst: &NetworkInstance,
    design: &NetworkDesign,
    opts: &OptimizeOpts,
    seed: u64,
    out: &Path,
) -> StageResult<(SolutionPool, Vec<Solved>)> {
    let stage = "optimize";
    let g = &opts.epsilon_grid;
    let grid = epsilon_grid(g.lo, g.hi, g.steps, g.log).map_err(|e| StageError::input(stage, e))?;
    let planner = Planner::new(inst, design, plan_config(opts)).map_err(|e| StageError::failed(stage, e))?;
    let points = sweep(&planner, &grid, opts.replications, seed).map_err(|e| StageError::failed(stage, e))?;

    let plans_dir = out.join("plans");
    create_dir(stage, &plans_dir)?;
    let mut solved = Vec::new();
    for (k, point) in points.into_iter().enumerate() {
        let estimate = match point.outcome {
            Ok(est) => est,
            Err(e) => {
                warn!("epsilon {}: {e}", point.epsilon);
                eprintln!("chainforge: optimize: epsilon {} skipped: {e}", point.epsilon);
                continue;
            }
        };
        let plan = PlanSummary::from_estimate(&planner, &estimate);
        let plan_path = plans_dir.join(format!("plan_{k:02}.json"));
        write_text(stage, &plan_path, &plan.to_json())?;
        if let Some(dir) = &opts.dump_models {
            dump_models(&planner, &estimate, k, dir)?;
        }
        solved.push(Solved {
            estimate,
            plan,
            plan_path,
        });
    }
    if solved.is_empty() {
        return Err(StageError::failed(stage, "no epsilon produced a solution"));
    }
    let pool = SolutionPool::new(
        solved
            .iter()
            .map(|s| ParetoSolution {
                plan: Some(s.plan_path.display().to_string()),
                ..ParetoSolution::from_estimate(&s.estimate)
            })
            .collect(),
    );
    write_file(stage, &out.join("solutions.csv"), |w| pool.write_csv(w, false).map_err(|e| e.to_string()))?;
    Ok((pool, solved))
}

/// Writes the period models of replication 0, rebuilt from the states it visited.
fn dump_models(planner: &Planner, est: &EstimateResult, k: usize, dir: &Path) -> StageResult<()> {
    create_dir("optimize", dir)?;
    for d in &est.runs[0].periods {
        let input = PeriodInput {
            period: d.period,
            inventory: d.inventory_start.clone(),
            demand: d.demand.clone(),
            factors: d.factors.clone(),
        };
        let pm = planner.build_period_model(&input, est.epsilon);
        let path = dir.join(format!("eps{k:02}_t{}.lp", d.period));
        write_file("optimize", &path, |w| pm.model.write_lp(w).map_err(|e| e.to_string()))?;
    }
    Ok(())
}

pub fn optimize_command(cli: &Cli, a: &OptimizeArgs) -> StageResult<()> {
    let inst = load("optimize", &a.instance, a.opt.variance_is_std_dev)?;
    let inst = with_safety_stock("optimize", inst, a.opt.safety_stock)?;
    let (inst, design) = load_design("optimize", &a.design, &inst)?;
    create_dir("optimize", &cli.out)?;
    optimize_stage(&inst, &design, &a.opt, cli.seed, &cli.out).map(|_| ())
}

// ---- pareto

fn pareto_stage(pool: &SolutionPool, out: &Path) -> StageResult<()> {
    create_dir("pareto", out)?;
    write_file("pareto", &out.join("front.csv"), |w| pool.write_csv(w, true).map_err(|e| e.to_string()))?;
    write_text("pareto", &out.join("front.svg"), &pool.to_svg())
}

pub fn pareto_command(cli: &Cli, a: &ParetoArgs) -> StageResult<()> {
    let file = File::open(&a.solutions)
        .map_err(|e| StageError::input("pareto", format!("cannot read {}: {e}", a.solutions.display())))?;
    let pool = SolutionPool::read_csv(file)
        .map_err(|e| StageError::input("pareto", format!("{}: {e}", a.solutions.display())))?;
    pareto_stage(&pool, &cli.out)
}

// ---- validate

fn sim_config(inst: &NetworkInstance, opts: &SimOpts, seed: u64) -> SimConfig {
    SimConfig {
        orders_per_period: opts.orders_per_period,
        lead_time: opts.lead_time,
        backlog: opts.backlog.into(),
        ..SimConfig::new(inst, seed)
    }
}

fn validate_stage(
    inst: &NetworkInstance,
    design: &NetworkDesign,
    plans: &[&PlanSummary],
    opts: &SimOpts,
    seed: u64,
    out: &Path,
) -> StageResult<Vec<ValidationSummary>> {
    let config = sim_config(inst, opts, seed);
    let mut rows = Vec::with_capacity(plans.len());
    for &plan in plans {
        let summary = des::validate(inst, design, plan, &config, opts.runs)
            .map_err(|e| StageError::failed("validate", format!("epsilon {}: {e}", plan.epsilon)))?;
        rows.push((summary, plan));
    }
    create_dir("validate", out)?;
    write_file("validate", &out.join("validation.csv"), |w| {
        des::write_validation_csv(w, inst, &rows).map_err(|e| e.to_string())
    })?;
    Ok(rows.into_iter().map(|(s, _)| s).collect())
}

pub fn validate_command(cli: &Cli, a: &ValidateArgs) -> StageResult<()> {
    let inst = load("validate", &a.instance, a.variance_is_std_dev)?;
    let (inst, design) = load_design("validate", &a.design, &inst)?;
    let mut plans = Vec::with_capacity(a.solutions.len());
    for path in &a.solutions {
        let text = read_text("validate", path)?;
        let plan = PlanSummary::from_json(&text)
            .map_err(|e| StageError::input("validate", format!("{}: {e}", path.display())))?;
        des::check_plan(&inst, &design, &plan)
            .map_err(|e| StageError::input("validate", format!("{}: {e}", path.display())))?;
        plans.push(plan);
    }
    let refs: Vec<&PlanSummary> = plans.iter().collect();
    validate_stage(&inst, &design, &refs, &a.sim, cli.seed, &cli.out).map(|_| ())
}

// ---- run

#[derive(Serialize)]
struct Flags<'a> {
    seed: u64,
    jobs: Option<usize>,
    out: String,
    gfa: &'a GfaOpts,
    optimize: &'a OptimizeOpts,
    validate: &'a SimOpts,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    argv: Vec<String>,
    instance: String,
    instance_sha256: String,
    seed: u64,
    flags: Flags<'a>,
    started: String,
    finished: String,
    /// Output path relative to the output directory, and its SHA-256.
    outputs: BTreeMap<String, String>,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn sha256_file(path: &Path) -> std::io::Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn run_command(cli: &Cli, a: &RunArgs) -> StageResult<()> {
    let started = now();
    let out = &cli.out;
    let instance_text = read_text("run", &a.instance)?;
    let inst = load("run", &a.instance, a.opt.variance_is_std_dev)?;
    let inst = with_safety_stock("run", inst, a.opt.safety_stock)?;
    create_dir("run", out)?;

    let located = gfa_stage(&inst, &a.gfa, cli.seed, out)?;
    let (inst, design) = (located.instance, located.design);
    let (pool, solved) = optimize_stage(&inst, &design, &a.opt, cli.seed, out)?;
    pareto_stage(&pool, out)?;
    let front: Vec<&PlanSummary> = solved
        .iter()
        .zip(&pool.on_front)
        .filter_map(|(s, &on)| on.then_some(&s.plan))
        .collect();
    validate_stage(&inst, &design, &front, &a.sim, cli.seed, out)?;

    let mut names: Vec<String> = ["design.json", "solutions.csv", "front.csv", "front.svg", "validation.csv"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend(solved.iter().map(|s| {
        let rel = s.plan_path.strip_prefix(out).unwrap_or(&s.plan_path);
        rel.to_string_lossy().replace('\\', "/")
    }));
    let mut outputs = BTreeMap::new();
    for name in names {
        let digest = sha256_file(&out.join(&name)).map_err(|e| StageError::failed("run", format!("{name}: {e}")))?;
        outputs.insert(name, digest);
    }
    let manifest = RunManifest {
        tool: "chainforge",
        version: env!("CARGO_PKG_VERSION"),
        argv: std::env::args().collect(),
        instance: a.instance.display().to_string(),
        instance_sha256: hex::encode(Sha256::digest(instance_text.as_bytes())),
        seed: cli.seed,
        flags: Flags {
            seed: cli.seed,
            jobs: cli.jobs,
            out: out.display().to_string(),
            gfa: &a.gfa,
            optimize: &a.opt,
            validate: &a.sim,
        },
        started,
        finished: now(),
        outputs,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_text("run", &out.join("manifest.json"), &text)
}
