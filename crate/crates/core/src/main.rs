use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use lft_recover::experiment::{self, ExampleSetup, TrialRecord};
use lft_recover::recoverability::{check_recoverability_sampled, SamplingPlan};
use lft_recover::recovery::{build_problem, recover, RecoveryConfig, TracePoint};
use lft_recover::robustness::check_robustness;
use lft_recover::{compute_rtim, io, Error, InterpSpec, LftPlant, Rtim, Theta, Vector};

#[derive(Parser, Debug)]
#[command(name = "lft-recover", version, about = "Interpolation-based parameter recovery for LFT plants")]
struct Cli {
    /// Where diagnostic dumps go on numerical failure (default: the system temp dir).
    #[arg(long, global = true)]
    diag_dir: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Print the RTIM Γ for a plant, an interpolation spec and θ.
    Rtim {
        #[command(flatten)]
        io: ModelArgs,
        /// Comma-separated θ.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        theta: Vec<f64>,
    },
    /// Sampled recoverability test over the parameter box.
    Check {
        #[command(flatten)]
        io: ModelArgs,
        /// θ samples.
        #[arg(long, default_value_t = 50)]
        n_theta: usize,
        /// φ samples per θ.
        #[arg(long, default_value_t = 50)]
        n_phi: usize,
        /// Pass threshold on ‖lhs‖²/‖φ‖².
        #[arg(long, default_value_t = 1e-8)]
        mu_t: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Recover θ from an RTIM estimate.
    Recover {
        #[command(flatten)]
        io: ModelArgs,
        /// Γ as a CSV file or inline rows ("1,2;3,4").
        #[arg(long, allow_hyphen_values = true)]
        gamma: String,
        /// Weight of the rank penalty block.
        #[arg(long, default_value_t = 2.0)]
        lambda1: f64,
        /// Tail singular value weight.
        #[arg(long, default_value_t = 10.0)]
        lambda2: f64,
        /// Gradient step.
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        /// Stop when the cost changes by at most this much.
        #[arg(long, default_value_t = 1e-10)]
        eps: f64,
        #[arg(long, default_value_t = 2500)]
        max_iter: usize,
        /// Initial θ, comma-separated (default: upper corner of the parameter box).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        init: Option<Vec<f64>>,
        /// Accepted for reproducible scripting; the iteration is deterministic.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Do not project θ onto the parameter box.
        #[arg(long)]
        no_clamp: bool,
        /// Write the per-iteration trace here.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Robustness flag and error amplification factor κ at θ.
    Robustness {
        #[command(flatten)]
        io: ModelArgs,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        theta: Vec<f64>,
    },
    /// Run the fourth-order example noise study and write CSV outputs.
    ReproduceExample(ReproduceArgs),
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Plant JSON.
    #[arg(long)]
    plant: PathBuf,
    /// Interpolation spec JSON with "Xi" and "Pi" (default: read from the plant file).
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    /// Monte-Carlo trials.
    #[arg(long, default_value_t = 300)]
    trials: usize,
    /// Std of the multiplicative RTIM perturbation.
    #[arg(long, default_value_t = 0.17)]
    noise_std: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "example-out")]
    out_dir: PathBuf,
    /// Points on the frequency-response grid over [0.1, 100] rad/s.
    #[arg(long, default_value_t = 400)]
    freq_points: usize,
}

enum Failure {
    Validation(String),
    Numerical(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e)
        } else {
            Failure::Validation(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Validation(e.to_string())
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
    let label = subcommand_name(&cli.cmd);
    match run(&cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e}");
            match write_diag(cli.diag_dir.as_deref(), label, &e) {
                Ok(p) => eprintln!("diagnostic dump: {}", p.display()),
                Err(w) => eprintln!("could not write diagnostic dump: {w}"),
            }
            ExitCode::from(2)
        }
    }
}

fn subcommand_name(cmd: &Cmd) -> &'static str {
    match cmd {
        Cmd::Rtim { .. } => "rtim",
        Cmd::Check { .. } => "check",
        Cmd::Recover { .. } => "recover",
        Cmd::Robustness { .. } => "robustness",
        Cmd::ReproduceExample(_) => "reproduce-example",
    }
}

fn write_diag(dir: Option<&Path>, label: &str, e: &Error) -> std::io::Result<PathBuf> {
    let dir = dir.map(Path::to_path_buf).unwrap_or_else(std::env::temp_dir);
    fs::create_dir_all(&dir)?;
    let path = dir.join(format!("lft-recover-{label}-{}.json", std::process::id()));
    let doc = json!({
        "subcommand": label,
        "error": e.to_string(),
        "detail": format!("{e:?}"),
        "args": std::env::args().collect::<Vec<_>>(),
    });
    fs::write(&path, serde_json::to_string_pretty(&doc).expect("serializable") + "\n")?;
    Ok(path)
}

fn load_model(a: &ModelArgs) -> Result<(LftPlant, InterpSpec), Failure> {
    for (flag, p) in [("--plant", Some(&a.plant)), ("--spec", a.spec.as_ref())] {
        if let Some(p) = p {
            if !p.is_file() {
                return Err(Failure::Validation(format!("{flag}: no such file {}", p.display())));
            }
        }
    }
    let plant = io::load_plant(&a.plant)?;
    let spec = match &a.spec {
        Some(p) => io::load_spec(p)?,
        None => io::load_spec(&a.plant)?,
    };
    spec.check_against(&plant)?;
    Ok((plant, spec))
}

fn theta_arg(plant: &LftPlant, flag: &str, v: &[f64]) -> Result<Theta, Failure> {
    if v.len() != plant.m_theta() {
        return Err(Failure::Validation(format!(
            "{flag}: expected {} values, got {}",
            plant.m_theta(),
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Failure::Validation(format!("{flag}: non-finite value")));
    }
    Ok(Vector::from_column_slice(v))
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.10e}")).collect::<Vec<_>>().join(", ")
}

fn run(cmd: &Cmd) -> CliResult {
    match cmd {
        Cmd::Rtim { io: a, theta } => {
            let (plant, spec) = load_model(a)?;
            let th = theta_arg(&plant, "--theta", theta)?;
            let g = compute_rtim(&plant, &th, &spec)?.gamma;
            println!("Gamma ({}x{}):{g}", g.nrows(), g.ncols());
            print!("{}", io::matrix_to_csv(&g));
        }
        Cmd::Check {
            io: a,
            n_theta,
            n_phi,
            mu_t,
            seed,
        } => {
            let (plant, spec) = load_model(a)?;
            let plan = SamplingPlan {
                n_theta: *n_theta,
                n_phi: *n_phi,
                mu_t: *mu_t,
                seed: *seed,
            };
            let v = check_recoverability_sampled(&plant, &spec, &plan)?;
            println!(
                "verdict: {} (min ratio {:.6e}, failed {}/{}, empty left null {}, resampled {})",
                v.verdict,
                v.min_ratio,
                v.failed_thetas.len(),
                v.samples.len(),
                v.empty_left_null,
                v.resampled
            );
            let head: Vec<String> = (1..=plant.m_theta()).map(|i| format!("theta{i}")).collect();
            println!("index,{},min_ratio,passed", head.join(","));
            for (i, s) in v.samples.iter().enumerate() {
                let th: Vec<String> = s.theta.iter().map(|x| format!("{x:.17e}")).collect();
                println!("{i},{},{:.17e},{}", th.join(","), s.min_ratio, s.passed);
            }
        }
        Cmd::Recover {
            io: a,
            gamma,
            lambda1,
            lambda2,
            step,
            eps,
            max_iter,
            init,
            seed: _,
            no_clamp,
            trace_out,
        } => {
            let (plant, spec) = load_model(a)?;
            let g = io::parse_matrix_arg(gamma)?;
            let init_theta = match init {
                Some(v) => theta_arg(&plant, "--init", v)?,
                None => plant.theta_box.upper.clone(),
            };
            let cfg = RecoveryConfig {
                lambda1: *lambda1,
                lambda2: *lambda2,
                step: *step,
                eps_it: *eps,
                max_iter: *max_iter,
                init_theta,
                clamp_to_box: !no_clamp,
                backtracking: false,
            };
            cfg.validate()?;
            let rtim = Rtim::estimate(g, "user supplied");
            let prob = build_problem(&plant, &spec, &rtim)?;
            let res = recover(&prob, &cfg)?;
            println!("theta_hat: {}", fmt_vec(res.theta_hat.as_slice()));
            println!("final cost: {:.10e}", res.cost_trace.last().copied().unwrap_or(f64::NAN));
            println!("iterations: {} (converged: {})", res.iterations, res.converged);
            if res.prox_fallbacks > 0 {
                println!("prox fallbacks: {}", res.prox_fallbacks);
            }
            if !res.t1_full_rank {
                println!("warning: T_1 at the estimate is rank deficient");
            }
            if let Some(p) = trace_out {
                fs::write(p, trace_csv(&res.trace))?;
            }
        }
        Cmd::Robustness { io: a, theta } => {
            let (plant, spec) = load_model(a)?;
            let th = theta_arg(&plant, "--theta", theta)?;
            let r = check_robustness(&plant, &th, &spec)?;
            println!("robust: {}", r.robust);
            match r.amplification {
                Some(k) => println!("kappa: {k:.10e}"),
                None => println!("kappa: undefined"),
            }
            println!(
                "condition matrix: {}x{}, rank {}{}",
                r.condition_shape.0,
                r.condition_shape.1,
                r.condition_matrix_rank,
                if r.empty_null { " (empty null basis)" } else { "" }
            );
            println!(
                "m_theta {} m_x {} m_y {} m_xi {}",
                plant.m_theta(),
                plant.m_x(),
                plant.m_y(),
                spec.m_xi()
            );
        }
        Cmd::ReproduceExample(a) => reproduce(a)?,
    }
    Ok(())
}

fn trace_csv(trace: &[TracePoint]) -> String {
    let mut s = String::from("iter,J,e_norm,sigma1,sigma2\n");
    for (i, t) in trace.iter().enumerate() {
        let _ = writeln!(s, "{i},{:.17e},{:.17e},{:.17e},{:.17e}", t.cost, t.e_norm, t.sigma1, t.sigma2);
    }
    s
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.17e}")).unwrap_or_default()
}

fn trials_csv(records: &[TrialRecord]) -> String {
    let mut s = String::from(
        "index,eps1,eps2,eps3,eps4,eps_norm,zeta_hat0,omega_hat0,zeta_hat1,omega_hat1,\
         rel_err_zeta0,rel_err_zeta1,rel_err_omega0,rel_err_omega1,r_zeta,r_omega,\
         converged0,converged1,failed0,failed1\n",
    );
    for r in records {
        let eps: Vec<String> = r.eps.iter().map(|x| format!("{x:.17e}")).collect();
        let _ = writeln!(
            s,
            "{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{},{},{},{},{},{}",
            r.index,
            eps.join(","),
            r.eps_norm,
            r.theta_hat[0][0],
            r.theta_hat[0][1],
            r.theta_hat[1][0],
            r.theta_hat[1][1],
            r.rel_err_zeta[0],
            r.rel_err_zeta[1],
            r.rel_err_omega[0],
            r.rel_err_omega[1],
            opt(r.r_zeta),
            opt(r.r_omega),
            r.converged[0],
            r.converged[1],
            r.failed[0],
            r.failed[1],
        );
    }
    s
}

fn bins_csv(t: &experiment::BinTable, reference: Option<&[[usize; 5]; 3]>) -> String {
    let mut s = String::from("lo,hi,total,r_zeta_lt_1,r_omega_lt_1");
    if reference.is_some() {
        s.push_str(",ref_total,ref_r_zeta_lt_1,ref_r_omega_lt_1");
    }
    s.push('\n');
    for (k, b) in t.bins.iter().enumerate() {
        let _ = write!(
            s,
            "{},{},{},{},{}",
            t.edges[k],
            t.edges[k + 1],
            b.total,
            b.zeta_better,
            b.omega_better
        );
        if let Some(r) = reference {
            let _ = write!(s, ",{},{},{}", r[0][k], r[1][k], r[2][k]);
        }
        s.push('\n');
    }
    let sum = t.sums();
    let _ = write!(s, "sum,,{},{},{}", sum.total, sum.zeta_better, sum.omega_better);
    if let Some(r) = reference {
        let tot = |i: usize| r[i].iter().sum::<usize>();
        let _ = write!(s, ",{},{},{}", tot(0), tot(1), tot(2));
    }
    s.push('\n');
    if t.overflow.total > 0 {
        let o = &t.overflow;
        let _ = writeln!(s, "outside,,{},{},{}", o.total, o.zeta_better, o.omega_better);
    }
    s
}

fn reproduce(a: &ReproduceArgs) -> CliResult {
    let setup = ExampleSetup::reference();
    fs::create_dir_all(a.out_dir.join("cost_traces"))?;

    let records = experiment::run_monte_carlo(
        &setup.plant,
        &setup.theta_true,
        &setup.designs.spec0,
        &setup.designs.spec1,
        &setup.recovery,
        a.trials,
        a.noise_std,
        a.seed,
    )?;
    let sorted = experiment::sort_by_eps_norm(&records);
    fs::write(a.out_dir.join("trials.csv"), trials_csv(&sorted))?;

    let table = experiment::bin_table(&records, &experiment::BIN_EDGES)?;
    let reference = (a.trials == 300).then_some(&experiment::REFERENCE_COUNTS);
    fs::write(a.out_dir.join("bins.csv"), bins_csv(&table, reference))?;

    let grid = experiment::log_grid(0.1, 100.0, a.freq_points.max(2));
    let fr = experiment::freq_response(&setup.plant, &setup.theta_true, &grid)?;
    let mut s = String::from("omega,abs_h\n");
    for (w, h) in fr {
        let _ = writeln!(s, "{w:.17e},{h:.17e}");
    }
    fs::write(a.out_dir.join("freq_response.csv"), s)?;

    let designs = [("value", &setup.designs.spec0), ("deriv", &setup.designs.spec1)];
    for (name, spec) in designs {
        let gamma = compute_rtim(&setup.plant, &setup.theta_true, spec)?.gamma;
        let base = lft_recover::recovery::ProblemBase::new(&setup.plant, spec)?;
        for (k, eps) in experiment::REPRESENTATIVE_EPS.iter().enumerate() {
            let res = experiment::recover_perturbed(&base, &gamma, eps, &setup.recovery)?;
            let path = a.out_dir.join("cost_traces").join(format!("trace{}_{name}.csv", k + 1));
            fs::write(path, trace_csv(&res.trace))?;
        }
    }

    let sum = table.sums();
    let n = records.len() as f64;
    println!("trials: {}", records.len());
    println!(
        "r_zeta < 1: {} ({:.3})  r_omega < 1: {} ({:.3})",
        sum.zeta_better,
        sum.zeta_better as f64 / n,
        sum.omega_better,
        sum.omega_better as f64 / n
    );
    let failed = records.iter().filter(|r| r.failed.iter().any(|&f| f)).count();
    if failed > 0 {
        println!("failed recoveries: {failed}");
    }
    println!("outputs written to {}", a.out_dir.display());
    Ok(())
}
