//! `hodyn` command-line front end.
//!
//! Exit codes: 0 success, 1 input or validation error, 2 numerical failure,
//! 3 non-convergence (partial results are still written).

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hodyn::harness::bench::{bench_point, loglog_slope, REPS, WARMUP};
use hodyn::harness::fd::FdConfig;
use hodyn::harness::metric::jacobian_report;
use hodyn::harness::random::{random_chain, random_coords};
use hodyn::kinodynamics::{forward_state, GravitySpec, JointCoordSeries};
use hodyn::model::{load_model_file, RobotModel};
use hodyn::trajopt::io::{fit_theta, read_trajectory, write_trajectory};
use hodyn::trajopt::ioc::{inverse_kkt, l1_distance, simplex_normalize};
use hodyn::trajopt::{direct_optimize, Experiment};
use hodyn::Error;

#[derive(Parser)]
#[command(name = "hodyn", version, about = "Higher-order kinodynamics, Jacobian checks and trajectory optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a model file.
    CheckModel { model: PathBuf },
    /// Link poses and velocity series along a trajectory CSV or an experiment's initial spline.
    Fk {
        model: PathBuf,
        source: PathBuf,
        #[arg(long, default_value_t = 0)]
        order: usize,
    },
    /// Compare analytical Jacobians with the finite-difference oracle.
    JacTest {
        model: Option<PathBuf>,
        #[arg(long)]
        dof: Option<usize>,
        #[arg(long, default_value = "0,1,3,4")]
        orders: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        fd_step: f64,
        #[arg(long)]
        no_gravity: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Direct trajectory optimization.
    Optimize {
        experiment: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover cost weights from an observed trajectory.
    Ioc {
        experiment: PathBuf,
        trajectory: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Time analytical and FD Jacobian bundles over a DoF sweep.
    Bench {
        #[arg(long, default_value = "2,4,8,16,32,64,128")]
        dof_list: String,
        #[arg(long, default_value_t = 1)]
        order: usize,
        #[arg(long, default_value_t = REPS)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Input(String),
    Numerical(String),
    NotConverged(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Numerical(_) | Error::Uninformative => Failure::Numerical(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type CliResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::CheckModel { model } => check_model(&model),
        Command::Fk { model, source, order } => fk(&model, &source, order),
        Command::JacTest {
            model,
            dof,
            orders,
            seed,
            fd_step,
            no_gravity,
            out,
        } => jac_test(model.as_deref(), dof, &orders, seed, fd_step, !no_gravity, out.as_deref()),
        Command::Optimize { experiment, out } => optimize(&experiment, &out),
        Command::Ioc {
            experiment,
            trajectory,
            truth,
        } => ioc(&experiment, &trajectory, truth.as_deref()),
        Command::Bench {
            dof_list,
            order,
            reps,
            seed,
            out,
        } => bench(&dof_list, order, reps, seed, out.as_deref()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(2)
        }
        Err(Failure::NotConverged(m)) => {
            eprintln!("not converged: {m}");
            ExitCode::from(3)
        }
    }
}

fn output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn check_model(path: &Path) -> CliResult {
    let m = load_model_file(path)?;
    println!(
        "model '{}': {} links, {} joints, {} DoF, root '{}'",
        m.name,
        m.links.len(),
        m.joints.len(),
        m.total_dof(),
        m.links[m.root].id
    );
    Ok(())
}

/// Parses `0,1,3,4` or an inclusive range `0..4`.
fn parse_list(s: &str) -> std::result::Result<Vec<usize>, Failure> {
    let bad = || Failure::Input(format!("cannot parse list '{s}'"));
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

fn jac_test(
    model: Option<&Path>,
    dof: Option<usize>,
    orders: &str,
    seed: u64,
    fd_step: f64,
    gravity: bool,
    out: Option<&Path>,
) -> CliResult {
    let model: RobotModel = match (model, dof) {
        (Some(p), None) => load_model_file(p)?,
        (None, Some(n)) if n > 0 => random_chain(n, seed),
        _ => return Err(Failure::Input("give exactly one of a model path or --dof N (N ≥ 1)".into())),
    };
    let orders = parse_list(orders)?;
    let cfg = FdConfig {
        step: fd_step,
        ..FdConfig::default()
    };
    let g = if gravity {
        GravitySpec::on([0.0, 0.0, -9.81])
    } else {
        GravitySpec::off()
    };
    let mut w = output(out)?;
    writeln!(w, "family,order,max_abs,e_J")?;
    for &k in &orders {
        let coords = random_coords(&model, k + 1, seed);
        for r in jacobian_report(&model, &coords, &g, k, &cfg)? {
            let e = r.e_j.map_or_else(|| "undefined".to_string(), |e| format!("{e:.6e}"));
            writeln!(w, "{},{},{:.6e},{}", r.family, r.order, r.max_abs, e)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn fk(model_path: &Path, source: &Path, order: usize) -> CliResult {
    let model = load_model_file(model_path)?;
    let samples: Vec<(f64, JointCoordSeries)> = if source.extension().is_some_and(|e| e == "json") {
        let exp = Experiment::load(source)?;
        if exp.model.dofs() != model.dofs() {
            return Err(Failure::Input("experiment model does not match the given model".into()));
        }
        let traj = exp.trajectory(exp.initial_theta())?;
        exp.times
            .iter()
            .map(|&t| Ok((t, traj.eval_series(t, order)?)))
            .collect::<hodyn::Result<_>>()?
    } else {
        if order > 1 {
            return Err(Failure::Input("a trajectory CSV carries derivatives up to q̈, so --order must be ≤ 1".into()));
        }
        if !model.all_single_dof() {
            return Err(Failure::Input("trajectory CSV input needs one-DoF joints".into()));
        }
        table_series(&model, source, order)?
    };
    let mut w = output(None)?;
    let mut header = vec!["t".to_string(), "link".into(), "x".into(), "y".into(), "z".into()];
    header.extend((0..3).flat_map(|r| (0..3).map(move |c| format!("r{r}{c}"))));
    for b in 0..=order {
        header.extend((0..6).map(|c| format!("nu{b}_{c}")));
    }
    writeln!(w, "{}", header.join(","))?;
    for (t, coords) in samples {
        let st = forward_state(&model, &coords, &GravitySpec::off(), order)?;
        for (i, c) in st.world.iter().enumerate() {
            let p = c.pose().translation();
            let r = c.pose().rotation();
            let mut row = vec![format!("{t:.16e}"), model.links[model.body_link[i]].id.clone()];
            row.extend(p.iter().map(|v| format!("{v:.16e}")));
            row.extend((0..3).flat_map(|a| (0..3).map(move |b| (a, b))).map(|(a, b)| format!("{:.16e}", r[(a, b)])));
            row.extend(c.velocity().as_vector().iter().map(|v| format!("{v:.16e}")));
            writeln!(w, "{}", row.join(","))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads `t, q_*, qd_*, qdd_*` columns into coordinate series of order ≤ 1.
fn table_series(model: &RobotModel, path: &Path, order: usize) -> std::result::Result<Vec<(f64, JointCoordSeries)>, Failure> {
    let n = model.num_bodies();
    let mut r = csv_reader(path)?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| Failure::Input(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let col = |name: String| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Failure::Input(format!("trajectory CSV lacks column '{name}'")))
    };
    let t_col = col("t".into())?;
    let mut cols = Vec::new();
    for prefix in ["q", "qd", "qdd"].iter().take(order + 2) {
        cols.push((0..n).map(|j| col(format!("{prefix}_{j}"))).collect::<std::result::Result<Vec<_>, _>>()?);
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Failure::Input(e.to_string()))?;
        let num = |c: usize| -> std::result::Result<f64, Failure> {
            rec.get(c)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Failure::Input(format!("bad number in column {c}")))
        };
        let mut s = JointCoordSeries::zeros(model.dofs(), order);
        for j in 0..n {
            s.set_q(j, &[num(cols[0][j])?]);
            for b in 0..=order {
                // q̇_b = q^(b+1) / b!, and b ≤ 1 here.
                s.set_qd_block(j, b, &[num(cols[b + 1][j])?]);
            }
        }
        out.push((num(t_col)?, s));
    }
    Ok(out)
}

fn csv_reader(path: &Path) -> std::result::Result<csv::Reader<File>, Failure> {
    csv::Reader::from_path(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn optimize(path: &Path, out: &Path) -> CliResult {
    let exp = Experiment::load(path)?;
    let res = direct_optimize(&exp)?;
    std::fs::create_dir_all(out)?;
    write_trajectory(BufWriter::new(File::create(out.join("trajectory.csv"))?), &exp, &res.theta)?;
    let summary = format!(
        "{{\n  \"converged\": {},\n  \"line_search_failed\": {},\n  \"iterations\": {},\n  \"final_cost\": {:e},\n  \"weighted_cost\": {:e},\n  \"penalty\": {:e},\n  \"term_costs\": [{}],\n  \"boundary_residual\": {:e},\n  \"bound_violation\": {:e}\n}}\n",
        res.converged,
        res.line_search_failed,
        res.iterations,
        res.final_cost,
        res.weighted_cost,
        res.penalty,
        res.term_costs.iter().map(|c| format!("{c:e}")).collect::<Vec<_>>().join(", "),
        res.boundary_residual,
        res.bound_violation
    );
    std::fs::write(out.join("result.json"), summary)?;
    let mut theta = String::new();
    for v in res.theta.iter() {
        theta.push_str(&format!("{v:.16e}\n"));
    }
    std::fs::write(out.join("theta.csv"), theta)?;
    eprintln!(
        "iterations {}, cost {:.6e}, boundary residual {:.3e}",
        res.iterations, res.final_cost, res.boundary_residual
    );
    if !res.converged {
        let why = if res.line_search_failed { "line search failed" } else { "iteration limit reached" };
        return Err(Failure::NotConverged(why.into()));
    }
    Ok(())
}

fn read_weights(path: &Path) -> std::result::Result<Vec<f64>, Failure> {
    let text = std::fs::read_to_string(path)?;
    let w: Vec<f64> = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .filter_map(|s| s.parse().ok())
        .collect();
    if w.is_empty() || w.iter().any(|v| *v < 0.0) || w.iter().sum::<f64>() <= 0.0 {
        return Err(Failure::Input(format!("{}: expected nonnegative weights", path.display())));
    }
    Ok(simplex_normalize(&w))
}

fn ioc(exp_path: &Path, traj_path: &Path, truth: Option<&Path>) -> CliResult {
    let exp = Experiment::load(exp_path)?;
    let table = read_trajectory(File::open(traj_path)?, exp.n_q())?;
    let theta = fit_theta(&exp, &table)?;
    let res = inverse_kkt(&exp, &theta)?;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.12e}")).collect::<Vec<_>>().join(",");
    println!("weights,{}", fmt(&res.weights));
    println!("residual,{:.6e}", res.residual);
    if let Some(p) = truth {
        let t = read_weights(p)?;
        if t.len() != res.weights.len() {
            return Err(Failure::Input(format!(
                "truth lists {} weights, experiment has {}",
                t.len(),
                res.weights.len()
            )));
        }
        println!("l1_error,{:.6e}", l1_distance(&res.weights, &t));
    }
    Ok(())
}

fn bench(dof_list: &str, order: usize, reps: usize, seed: u64, out: Option<&Path>) -> CliResult {
    let dofs = parse_list(dof_list)?;
    if dofs.contains(&0) {
        return Err(Failure::Input("DoF values must be positive".into()));
    }
    let mut rows = Vec::new();
    for &n in &dofs {
        let r = bench_point(n, order, WARMUP, reps, seed)?;
        eprintln!("dof {n}: analytic {:.3e} s, fd {:.3e} s", r.analytic_s, r.fd_s);
        rows.push(r);
    }
    let mut w = output(out)?;
    writeln!(w, "dof,order,analytic_s,fd_s,speedup")?;
    for r in &rows {
        writeln!(w, "{},{},{:.6e},{:.6e},{:.3}", r.dof, r.order, r.analytic_s, r.fd_s, r.speedup())?;
    }
    w.flush()?;
    if rows.len() >= 2 {
        let x: Vec<f64> = rows.iter().map(|r| r.dof as f64).collect();
        let a: Vec<f64> = rows.iter().map(|r| r.analytic_s).collect();
        let f: Vec<f64> = rows.iter().map(|r| r.fd_s).collect();
        eprintln!("log-log slope: analytic {:.3}, fd {:.3}", loglog_slope(&x, &a), loglog_slope(&x, &f));
    }
    Ok(())
}
