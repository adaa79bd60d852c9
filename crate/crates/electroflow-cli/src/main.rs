//! Command-line interface: solve, validate, bench, and inspect subcommands
//! over DIMACS instances or built-in generator families.

mod config;

use clap::{Args, Parser, Subcommand};
use config::{Algorithm, RunConfig};
use electroflow::dimacs;
use electroflow::error::Error;
use electroflow::gen;
use electroflow::graph::FlowInstance;
use electroflow::ipm::{self};
use electroflow::linalg;
use electroflow::locator::{Locator, LocatorConfig};
use electroflow::oracle;
use electroflow::rng::RngStream;
use electroflow::walks;
use std::io::Write;
use std::path::PathBuf;

/// Exit codes: 0 success, 2 parse/I-O error, 3 infeasible instance,
/// 4 solver failure, 5 validation mismatch.
const EXIT_IO: i32 = 2;
const EXIT_INFEASIBLE: i32 = 3;
const EXIT_SOLVER: i32 = 4;
const EXIT_MISMATCH: i32 = 5;

#[derive(Parser)]
#[command(name = "electroflow", about = "Minimum cost flow via localized electrical flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Key=value config file; CLI flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// practical | faithful
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// ipm-localized | ipm-exact | ssp
    #[arg(long)]
    algorithm: Option<String>,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include wall-clock columns (not byte-reproducible).
    #[arg(long)]
    timings: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one DIMACS instance and emit the flow assignment plus cost.
    Solve {
        #[command(flatten)]
        common: CommonOpts,
        /// DIMACS min-format instance file.
        instance: PathBuf,
    },
    /// Cross-check the interior point solver against the exact oracle.
    Validate {
        #[command(flatten)]
        common: CommonOpts,
        /// Optional DIMACS instance; a generated suite is used when absent.
        instance: Option<PathBuf>,
        /// Number of generated instances in the suite.
        #[arg(long, default_value_t = 30)]
        count: usize,
        /// Deliberately corrupt the solver output to prove the validator
        /// catches mismatches.
        #[arg(long)]
        inject_fault: bool,
    },
    /// Run generator families through the solver and report a CSV.
    Bench {
        #[command(flatten)]
        common: CommonOpts,
        /// Comma-separated families: random, grid, regular.
        #[arg(long, default_value = "random,grid,regular")]
        families: String,
        /// Instances per family.
        #[arg(long, default_value_t = 5)]
        count: usize,
        /// Vertex-count scale.
        #[arg(long, default_value_t = 16)]
        size: usize,
        /// Max capacity / max |cost| of generated arcs.
        #[arg(long, default_value_t = 10)]
        max_cap: i64,
        #[arg(long, default_value_t = 10)]
        max_cost: i64,
    },
    /// Print instance statistics (and optionally a congestion-subset report).
    Inspect {
        #[command(flatten)]
        common: CommonOpts,
        instance: PathBuf,
        /// Also build a congestion reduction subset and verify it.
        #[arg(long)]
        subset_report: bool,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Solve { common, instance } => cmd_solve(&common, &instance),
        Command::Validate {
            common,
            instance,
            count,
            inject_fault,
        } => cmd_validate(&common, instance.as_deref(), count, inject_fault),
        Command::Bench {
            common,
            families,
            count,
            size,
            max_cap,
            max_cost,
        } => cmd_bench(&common, &families, count, size, max_cap, max_cost),
        Command::Inspect {
            common,
            instance,
            subset_report,
        } => cmd_inspect(&common, &instance, subset_report),
    };
    std::process::exit(code);
}

fn resolve_config(common: &CommonOpts) -> Result<RunConfig, (i32, String)> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_file(path).map_err(|e| (EXIT_IO, format!("config: {e}")))?,
        None => RunConfig::default(),
    };
    let flag = |v: &Option<String>| v.clone();
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(mode) = flag(&common.mode) {
        cfg.set("mode", &mode)
            .map_err(|e| (EXIT_IO, e.to_string()))?;
    }
    if let Some(k) = common.k {
        cfg.k = Some(k);
    }
    if let Some(beta) = common.beta {
        cfg.beta = Some(beta);
    }
    if let Some(alpha) = common.alpha {
        cfg.alpha = Some(alpha);
    }
    if let Some(eps) = common.eps {
        cfg.eps = Some(eps);
    }
    if let Some(algo) = flag(&common.algorithm) {
        cfg.algorithm = Algorithm::parse(&algo).map_err(|e| (EXIT_IO, e.to_string()))?;
    }
    cfg.timings = cfg.timings || common.timings;
    Ok(cfg)
}

fn emit(common: &CommonOpts, text: &str) -> i32 {
    match &common.out {
        Some(path) => match std::fs::write(path, text) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: writing {}: {e}", path.display());
                EXIT_IO
            }
        },
        None => {
            print!("{text}");
            let _ = std::io::stdout().flush();
            0
        }
    }
}

fn classify_error(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::Io(_) => EXIT_IO,
        Error::Infeasible => EXIT_INFEASIBLE,
        _ => EXIT_SOLVER,
    }
}

fn solve_instance(
    inst: &FlowInstance,
    cfg: &RunConfig,
) -> Result<(Vec<i64>, i128, Option<ipm::RunLog>), Error> {
    match cfg.algorithm {
        Algorithm::Ssp => {
            let res = oracle::ssp_min_cost_flow(inst);
            if !res.feasible {
                return Err(Error::Infeasible);
            }
            Ok((res.flow, res.cost, None))
        }
        Algorithm::IpmLocalized | Algorithm::IpmExact => {
            let sol = ipm::min_cost_flow(inst, &cfg.solve_params(), cfg.seed)?;
            Ok((sol.flow, sol.cost, Some(sol.log)))
        }
    }
}

fn cmd_solve(common: &CommonOpts, path: &std::path::Path) -> i32 {
    let cfg = match resolve_config(common) {
        Ok(c) => c,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            return code;
        }
    };
    let inst = match dimacs::read_dimacs(path) {
        Ok(i) => i,
        Err(e) => {
            eprintln!("error: parse: {e}");
            return EXIT_IO;
        }
    };
    match solve_instance(&inst, &cfg) {
        Ok((flow, _cost, _log)) => {
            let mut buf = Vec::new();
            if dimacs::write_flow(&mut buf, &inst, &flow).is_err() {
                eprintln!("error: serialization failed");
                return EXIT_SOLVER;
            }
            let mut text = format!("c config {}\n", cfg.hash());
            text.push_str(&String::from_utf8_lossy(&buf));
            emit(common, &text)
        }
        Err(e) => {
            eprintln!("error: {} ({e})", error_tag(&e));
            classify_error(&e)
        }
    }
}

fn error_tag(e: &Error) -> &'static str {
    match e {
        Error::Infeasible => "infeasible",
        Error::Parse { .. } | Error::Io(_) => "io",
        _ => "solver",
    }
}

fn validation_suite(seed: u64, count: usize) -> Vec<FlowInstance> {
    let rng = RngStream::new(seed, "cli/validate-suite");
    (0..count)
        .map(|i| {
            let mut irng = rng.derive_idx("instance", i as u64);
            let n = 5 + i % 10;
            let m = n + 4 + i % 14;
            gen::random_signed_cost_instance(n, m, 12, 9, &mut irng)
        })
        .collect()
}

fn cmd_validate(
    common: &CommonOpts,
    instance: Option<&std::path::Path>,
    count: usize,
    inject_fault: bool,
) -> i32 {
    let cfg = match resolve_config(common) {
        Ok(c) => c,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            return code;
        }
    };
    let instances: Vec<(String, FlowInstance)> = match instance {
        Some(path) => match dimacs::read_dimacs(path) {
            Ok(i) => vec![(path.display().to_string(), i)],
            Err(e) => {
                eprintln!("error: parse: {e}");
                return EXIT_IO;
            }
        },
        None => validation_suite(cfg.seed, count)
            .into_iter()
            .enumerate()
            .map(|(i, inst)| (format!("generated-{i}"), inst))
            .collect(),
    };
    let mut report = String::from("name,feasible,integral,ipm_cost,ssp_cost,match\n");
    let mut mismatches = Vec::new();
    for (name, inst) in &instances {
        let oracle_res = oracle::ssp_min_cost_flow(inst);
        let ipm_res = ipm::min_cost_flow(inst, &cfg.solve_params(), cfg.seed);
        match (oracle_res.feasible, ipm_res) {
            (true, Ok(sol)) => {
                let mut cost = sol.cost;
                if inject_fault {
                    // Simulates a skipped rounding step.
                    cost += 1;
                }
                let feasible = inst.is_feasible_int(&sol.flow);
                let matched = feasible && cost == oracle_res.cost;
                report.push_str(&format!(
                    "{name},{feasible},true,{cost},{},{matched}\n",
                    oracle_res.cost
                ));
                if !matched {
                    mismatches.push(format!("{name} (seed {})", cfg.seed));
                }
            }
            (false, Err(Error::Infeasible)) => {
                report.push_str(&format!("{name},false,,,,true\n"));
            }
            (feas, res) => {
                let msg = match res {
                    Ok(_) => "solved an instance the oracle calls infeasible".to_string(),
                    Err(e) => format!("solver error: {e}"),
                };
                report.push_str(&format!("{name},{feas},,,,false\n"));
                mismatches.push(format!("{name}: {msg}"));
            }
        }
    }
    report.push_str(&format!("c config {}\n", cfg.hash()));
    let code = emit(common, &report);
    if code != 0 {
        return code;
    }
    if mismatches.is_empty() {
        0
    } else {
        for m in &mismatches {
            eprintln!("mismatch: {m}");
        }
        EXIT_MISMATCH
    }
}

struct BenchRow {
    family: String,
    index: usize,
    n: usize,
    m: usize,
    cost: i128,
    oracle_cost: i128,
    iterations: usize,
    locator_inits: usize,
    z_total: usize,
    laplacian_factors: u64,
    recall: f64,
    wall_ms: f64,
}

fn bench_instance(
    family: &str,
    index: usize,
    inst: &FlowInstance,
    cfg: &RunConfig,
) -> Result<BenchRow, Error> {
    let t0 = std::time::Instant::now();
    let factors_before = linalg::laplacian_factor_count();
    let params = cfg.solve_params();
    let sol = ipm::min_cost_flow(inst, &params, cfg.seed ^ index as u64)?;
    let oracle_res = oracle::ssp_min_cost_flow(inst);
    if !oracle_res.feasible || oracle_res.cost != sol.cost {
        return Err(Error::Contract(format!(
            "bench cost mismatch on {family}-{index}"
        )));
    }
    // Locator recall against the dense oracle on a fresh interior state.
    let mut rng = RngStream::new(cfg.seed ^ index as u64, "cli/bench-recall");
    let f: Vec<f64> = inst
        .cap
        .iter()
        .map(|&u| u as f64 * (0.25 + 0.5 * rng.next_f64()))
        .collect();
    let s_plus: Vec<f64> = (0..inst.m()).map(|e| inst.cap[e] as f64 - f[e]).collect();
    let (_, rho) = oracle::dense_electrical_step(inst, &s_plus, &f)?;
    let eps = 0.12;
    let congested: Vec<usize> = (0..inst.m()).filter(|&e| rho[e].abs() >= eps).collect();
    let recall = if congested.is_empty() {
        1.0
    } else {
        let loc_cfg = LocatorConfig {
            beta: 0.4,
            eps,
            eps_hat: 0.06,
            alpha: 2.0,
            ..LocatorConfig::default()
        };
        let mut loc = Locator::initialize(inst, &f, loc_cfg, &mut rng)?;
        let z = loc.solve()?;
        congested.iter().filter(|e| z.contains(e)).count() as f64 / congested.len() as f64
    };
    Ok(BenchRow {
        family: family.to_string(),
        index,
        n: inst.n,
        m: inst.m(),
        cost: sol.cost,
        oracle_cost: oracle_res.cost,
        iterations: sol.iterations,
        locator_inits: sol.locator_inits,
        z_total: sol.z_total,
        laplacian_factors: linalg::laplacian_factor_count() - factors_before,
        recall,
        wall_ms: t0.elapsed().as_secs_f64() * 1e3,
    })
}

fn cmd_bench(
    common: &CommonOpts,
    families: &str,
    count: usize,
    size: usize,
    max_cap: i64,
    max_cost: i64,
) -> i32 {
    let cfg = match resolve_config(common) {
        Ok(c) => c,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            return code;
        }
    };
    let fams: Vec<&str> = families
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .collect();
    // Per-instance sub-streams: adding instances never perturbs earlier ones.
    let base = RngStream::new(cfg.seed, "cli/bench");
    let mut jobs: Vec<(String, usize, FlowInstance)> = Vec::new();
    for fam in &fams {
        for i in 0..count {
            let mut irng = base.derive_idx(fam, i as u64);
            let inst = match *fam {
                // Bench families draw costs uniformly in [1, max_cost].
                "random" => gen::random_connected_instance(
                    size.max(4),
                    2 * size.max(4),
                    max_cap,
                    max_cost,
                    &mut irng,
                ),
                "grid" => gen::grid_instance(
                    (size / 4).max(2),
                    4.min(size).max(2),
                    max_cap,
                    max_cost,
                    &mut irng,
                ),
                "regular" => {
                    gen::regularish_instance(size.max(4), 4, max_cap, max_cost, &mut irng)
                }
                other => {
                    eprintln!("error: unknown family '{other}'");
                    return EXIT_IO;
                }
            };
            jobs.push((fam.to_string(), i, inst));
        }
    }
    let threads: usize = std::env::var("ELECTROFLOW_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&t| t >= 1)
        .unwrap_or(1);
    let results: Vec<Result<BenchRow, Error>> = if threads <= 1 {
        jobs.iter()
            .map(|(fam, i, inst)| bench_instance(fam, *i, inst, &cfg))
            .collect()
    } else {
        // Fixed-stride partition merged by job index keeps output
        // deterministic whatever the thread timing does.
        let mut slots: Vec<Option<Result<BenchRow, Error>>> =
            (0..jobs.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            let chunks: Vec<Vec<usize>> = (0..threads)
                .map(|t| (t..jobs.len()).step_by(threads).collect())
                .collect();
            let mut handles = Vec::new();
            for chunk in chunks {
                let jobs = &jobs;
                let cfg = &cfg;
                handles.push(scope.spawn(move || {
                    chunk
                        .into_iter()
                        .map(|j| {
                            let (fam, i, inst) = &jobs[j];
                            (j, bench_instance(fam, *i, inst, cfg))
                        })
                        .collect::<Vec<_>>()
                }));
            }
            for handle in handles {
                for (j, res) in handle.join().expect("bench worker panicked") {
                    slots[j] = Some(res);
                }
            }
        });
        slots.into_iter().map(|s| s.unwrap()).collect()
    };
    let mut csv = String::from(
        "family,index,n,m,k,beta,alpha,eps,algorithm,cost,oracle_cost,iterations,locator_inits,z_total,laplacian_factors,recall,config",
    );
    if cfg.timings {
        csv.push_str(",wall_ms");
    }
    csv.push('\n');
    let params = cfg.solve_params();
    let hash = cfg.hash();
    for res in results {
        match res {
            Ok(row) => {
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.4},{}",
                    row.family,
                    row.index,
                    row.n,
                    row.m,
                    params.k,
                    params.beta,
                    params.alpha,
                    params.eps,
                    cfg.algorithm.as_str(),
                    row.cost,
                    row.oracle_cost,
                    row.iterations,
                    row.locator_inits,
                    row.z_total,
                    row.laplacian_factors,
                    row.recall,
                    hash,
                ));
                if cfg.timings {
                    csv.push_str(&format!(",{:.3}", row.wall_ms));
                }
                csv.push('\n');
            }
            Err(e) => {
                eprintln!("error: bench: {e}");
                return classify_error(&e);
            }
        }
    }
    emit(common, &csv)
}

fn cmd_inspect(common: &CommonOpts, path: &std::path::Path, subset_report: bool) -> i32 {
    let cfg = match resolve_config(common) {
        Ok(c) => c,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            return code;
        }
    };
    let inst = match dimacs::read_dimacs(path) {
        Ok(i) => i,
        Err(e) => {
            eprintln!("error: parse: {e}");
            return EXIT_IO;
        }
    };
    let supply: i64 = inst.demand.iter().filter(|&&d| d > 0).sum();
    let mut text = format!(
        "instance {}\nvertices {}\narcs {}\ntotal supply {}\ncost range [{}, {}]\ncapacity range [{}, {}]\nconnected {}\n",
        path.display(),
        inst.n,
        inst.m(),
        supply,
        inst.cost.iter().min().copied().unwrap_or(0),
        inst.cost.iter().max().copied().unwrap_or(0),
        inst.cap.iter().min().copied().unwrap_or(0),
        inst.cap.iter().max().copied().unwrap_or(0),
        inst.is_connected(),
    );
    if subset_report {
        let beta = cfg.beta.unwrap_or(0.3);
        let r = vec![1.0; inst.m()];
        let lap = linalg::Laplacian::from_instance(&inst, &r);
        let cong = walks::CongestionConfig::default();
        let mut rng = RngStream::new(cfg.seed, "cli/inspect");
        match walks::build_congestion_reduction_subset(&lap, beta, &cong, &mut rng).and_then(
            |subset| {
                walks::check_congestion_reduction(&lap, &subset.verts, beta, &cong, 200, &mut rng)
            },
        ) {
            Ok(rep) => {
                text.push_str(&format!(
                    "subset size {} (bound {:.1})\nhitting miss fraction {:.3}\nmax visit load {:.2} (threshold {:.2})\nsubset ok {}\n",
                    rep.subset_size,
                    rep.size_bound,
                    rep.hitting_miss_fraction,
                    rep.max_visit_load,
                    rep.load_threshold,
                    rep.all_ok(),
                ));
            }
            Err(e) => {
                eprintln!("error: subset report: {e}");
                return EXIT_SOLVER;
            }
        }
    }
    emit(common, &text)
}
