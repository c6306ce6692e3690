//! Command-line front end for the htype library: build and verify group
//! structures, evaluate distances, geodesics, heat kernels, polynomial
//! semigroups, envelope scans, and Monte Carlo simulations.
//!
//! Exit codes: 0 success, 1 validation error, 2 numerical failure (a partial
//! report is still printed).

use clap::{Args, Parser, Subcommand};
use htype::algebra::{
    build_clifford, build_complex_heisenberg, build_heisenberg, minimal_clifford_dim, verify_htype,
};
use htype::estimates::{
    scan_crude_gradient, scan_gradient_ratio, scan_kernel_ratio, scan_vertical_gradient, GridSpec,
};
use htype::geometry::{cc_distance, geodesic_from_endpoint, geodesic_path};
use htype::heatkernel::{pt, KernelQuery};
use htype::polyop::{
    apply_l, apply_xi, grad_sq, heat_poly, k2_closed_form, k2_ratio, parse_polynomial,
};
use htype::simulate::{simulate, SimConfig};
use htype::{Error, GroupPoint64, HTypeStructure64, Poly64};
use serde_json::json;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "htype", version, about = "H-type groups: geometry, heat kernels, oracles")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a group structure and emit it as JSON
    Group(GroupArgs),
    /// Carnot-Caratheodory distance from the radial profile
    Dist(DistArgs),
    /// Sample the minimizing geodesic to a point as CSV
    Geodesic(GeodesicArgs),
    /// Heat kernel evaluation
    Heat(HeatArgs),
    /// Polynomial operators and the exact gradient ratio
    Poly(PolyArgs),
    /// Verification reports
    Verify(VerifyArgs),
    /// Horizontal Brownian motion sampling
    Simulate(SimulateArgs),
}

/// How to obtain the structure matrices.
#[derive(Args, Clone)]
struct StructureArgs {
    /// heisenberg | complex-heisenberg | clifford
    #[arg(long)]
    preset: Option<String>,
    /// JSON file with {n, m, J}
    #[arg(long)]
    structure: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// direct-sum copies of the minimal Clifford module
    #[arg(long, default_value_t = 1)]
    copies: usize,
}

#[derive(Args)]
struct GroupArgs {
    #[command(flatten)]
    structure: StructureArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DistArgs {
    #[arg(long)]
    n: u32,
    #[arg(long)]
    m: u32,
    /// |x|
    #[arg(long)]
    x: f64,
    /// |z|
    #[arg(long)]
    z: f64,
    /// emit the full result as JSON instead of d=<value>
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct GeodesicArgs {
    #[command(flatten)]
    structure: StructureArgs,
    /// endpoint horizontal coordinates, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Vec<f64>,
    /// endpoint central coordinates, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    z: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HeatArgs {
    #[command(subcommand)]
    cmd: HeatCmd,
}

#[derive(Subcommand)]
enum HeatCmd {
    /// Evaluate p_t at one radial point; prints JSON
    Eval(HeatEvalArgs),
    /// CSV table of p_t over a radial grid
    Table(HeatTableArgs),
}

#[derive(Args)]
struct HeatEvalArgs {
    #[arg(long)]
    n: u32,
    #[arg(long)]
    m: u32,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// |x|
    #[arg(long)]
    x: f64,
    /// |z|
    #[arg(long)]
    z: f64,
    /// relative tolerance
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Args)]
struct HeatTableArgs {
    #[arg(long)]
    n: u32,
    #[arg(long)]
    m: u32,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 3.0)]
    x_max: f64,
    #[arg(long, default_value_t = 3.0)]
    z_max: f64,
    /// grid points along |x|
    #[arg(long, default_value_t = 16)]
    nx: usize,
    /// grid points along |z|
    #[arg(long, default_value_t = 16)]
    nz: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PolyArgs {
    #[command(subcommand)]
    cmd: PolyCmd,
}

#[derive(Args, Clone)]
struct PolyCommon {
    #[command(flatten)]
    structure: StructureArgs,
    /// polynomial text, e.g. "x1^2 + 3*z1*x2"
    #[arg(long)]
    poly: String,
}

#[derive(Subcommand)]
enum PolyCmd {
    /// Apply the sublaplacian L
    L(PolyCommon),
    /// Apply the left-invariant field X_i
    Xi {
        #[command(flatten)]
        common: PolyCommon,
        /// 1-based field index
        #[arg(long)]
        i: usize,
    },
    /// Apply the heat semigroup P_t
    Heat {
        #[command(flatten)]
        common: PolyCommon,
        #[arg(long)]
        t: f64,
    },
    /// Horizontal gradient square |grad p|^2
    Gradsq(PolyCommon),
    /// Gradient ratio k2(t) for the section 5.4 test function
    K2 {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        t: f64,
    },
}

#[derive(Args)]
struct VerifyArgs {
    #[command(subcommand)]
    cmd: VerifyCmd,
}

#[derive(Subcommand)]
enum VerifyCmd {
    /// H-type axioms on a structure; prints a JSON report
    Group {
        #[command(flatten)]
        structure: StructureArgs,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Envelope ratio scans; prints ScanReports as JSON
    Bounds {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        m: u32,
        #[arg(long, default_value_t = 2.0)]
        d0_min: f64,
        #[arg(long, default_value_t = 10.0)]
        d0_max: f64,
        /// grid points along d0 and along the horizontal share, "KxA"
        #[arg(long, default_value = "12x12")]
        grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    structure: StructureArgs,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 10_000)]
    paths: usize,
    #[arg(long, default_value_t = 200)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure that knows its exit code.
struct Failure {
    code: u8,
    message: String,
}

type CliResult<T> = Result<T, Failure>;

fn invalid(msg: impl Into<String>) -> Failure {
    Failure { code: 1, message: msg.into() }
}

fn from_lib(e: Error) -> Failure {
    let code = match e {
        Error::NoConvergence(_) => 2,
        _ => 1,
    };
    Failure { code, message: e.to_string() }
}

impl StructureArgs {
    fn resolve(&self) -> CliResult<HTypeStructure64> {
        if let Some(path) = &self.structure {
            let text = std::fs::read_to_string(path)
                .map_err(|e| invalid(format!("--structure {}: {e}", path.display())))?;
            return HTypeStructure64::from_json(&text).map_err(from_lib);
        }
        match self.preset.as_deref() {
            Some("heisenberg") => {
                let n = self.n.ok_or_else(|| invalid("--preset heisenberg needs --n"))?;
                build_heisenberg(n).map_err(from_lib)
            }
            Some("complex-heisenberg") => Ok(build_complex_heisenberg()),
            Some("clifford") => {
                let m = self.m.ok_or_else(|| invalid("--preset clifford needs --m"))?;
                build_clifford(m, self.copies).map_err(from_lib)
            }
            Some(other) => Err(invalid(format!("--preset {other} unknown"))),
            None => {
                // infer from plain dimensions
                let m = self.m.unwrap_or(1);
                if m == 1 {
                    let n = self.n.ok_or_else(|| invalid("need --n (or --preset)"))?;
                    return build_heisenberg(n).map_err(from_lib);
                }
                let Some(n) = self.n else {
                    return build_clifford(m, self.copies).map_err(from_lib);
                };
                if n == 2 && m == 2 {
                    return Ok(build_complex_heisenberg());
                }
                let dim = minimal_clifford_dim(m as u64) as usize;
                if (2 * n) % dim != 0 {
                    return Err(invalid(format!(
                        "--n {n} --m {m}: horizontal dimension {} is not a multiple \
                         of the minimal Clifford module dimension {dim}",
                        2 * n
                    )));
                }
                build_clifford(m, 2 * n / dim).map_err(from_lib)
            }
        }
    }
}

/// println! panics on a closed pipe (e.g. piping into head); exit quietly
/// instead.
fn print_line(content: &str) -> CliResult<()> {
    use std::io::Write as _;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{content}").and_then(|()| out.flush()) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => std::process::exit(0),
        Err(e) => Err(invalid(format!("stdout: {e}"))),
    }
}

fn emit(out: &Option<PathBuf>, content: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| invalid(format!("--out {}: {e}", path.display()))),
        None => print_line(content),
    }
}

fn structure_json(s: &HTypeStructure64) -> String {
    let body: serde_json::Value = serde_json::from_str(&s.to_json()).expect("own serialization");
    serde_json::to_string_pretty(&json!({ "schema": 1, "structure": body })).expect("json")
}

fn run_group(args: &GroupArgs) -> CliResult<()> {
    let s = args.structure.resolve()?;
    emit(&args.out, &structure_json(&s))
}

fn run_dist(args: &DistArgs) -> CliResult<()> {
    if args.n == 0 || args.m == 0 {
        return Err(invalid("--n and --m must be positive"));
    }
    if args.x < 0.0 || args.z < 0.0 {
        return Err(invalid("--x and --z are norms and must be nonnegative"));
    }
    let res = cc_distance(args.x, args.z).map_err(from_lib)?;
    if args.json {
        let doc = json!({
            "schema": 1,
            "d": res.d,
            "theta": res.theta,
            "branch": res.branch,
        });
        print_line(&serde_json::to_string_pretty(&doc).expect("json"))?;
    } else {
        print_line(&format!("d={}", res.d))?;
    }
    Ok(())
}

fn run_geodesic(args: &GeodesicArgs) -> CliResult<()> {
    let s = args.structure.resolve()?;
    if args.x.len() != s.horizontal_dim() {
        return Err(invalid(format!(
            "--x needs {} coordinates, got {}",
            s.horizontal_dim(),
            args.x.len()
        )));
    }
    if args.z.len() != s.center_dim() {
        return Err(invalid(format!(
            "--z needs {} coordinates, got {}",
            s.center_dim(),
            args.z.len()
        )));
    }
    if args.steps == 0 {
        return Err(invalid("--steps must be positive"));
    }
    let g = GroupPoint64::new(args.x.clone(), args.z.clone());
    let params = geodesic_from_endpoint(&s, &g).map_err(from_lib)?;
    let path = geodesic_path(&s, &params, args.steps).map_err(from_lib)?;
    let mut csv = String::from("t");
    for i in 1..=s.horizontal_dim() {
        write!(csv, ",x{i}").expect("string");
    }
    for j in 1..=s.center_dim() {
        write!(csv, ",z{j}").expect("string");
    }
    csv.push('\n');
    for (t, p) in &path {
        write!(csv, "{t}").expect("string");
        for v in p.x.iter().chain(p.z.iter()) {
            write!(csv, ",{v}").expect("string");
        }
        csv.push('\n');
    }
    emit(&args.out, csv.trim_end())
}

fn eval_query(n: u32, m: u32, t: f64, x: f64, z: f64, tol: f64) -> CliResult<KernelQuery<f64>> {
    KernelQuery::new(n, m, t, x, z, tol).map_err(from_lib)
}

fn run_heat_eval(args: &HeatEvalArgs) -> CliResult<()> {
    let q = eval_query(args.n, args.m, args.t, args.x, args.z, args.tol)?;
    let res = pt(&q).map_err(from_lib)?;
    let doc = json!({
        "schema": 1,
        "value": res.value,
        "err": res.abs_err_estimate,
        "method": res.method,
        "large_d0": res.large_d0,
        "converged": res.converged,
    });
    print_line(&serde_json::to_string_pretty(&doc).expect("json"))?;
    if !res.converged {
        return Err(Failure { code: 2, message: "quadrature did not converge".into() });
    }
    Ok(())
}

fn run_heat_table(args: &HeatTableArgs) -> CliResult<()> {
    if args.nx < 1 || args.nz < 1 {
        return Err(invalid("--nx and --nz must be positive"));
    }
    if args.x_max < 0.0 || args.z_max < 0.0 {
        return Err(invalid("--x-max and --z-max must be nonnegative"));
    }
    let mut csv = String::from("x,z,value,err\n");
    let mut failed = false;
    for i in 0..args.nx {
        for j in 0..args.nz {
            let x = args.x_max * i as f64 / (args.nx.max(2) - 1) as f64;
            let z = args.z_max * j as f64 / (args.nz.max(2) - 1) as f64;
            let q = eval_query(args.n, args.m, args.t, x, z, args.tol)?;
            let res = pt(&q).map_err(from_lib)?;
            failed |= !res.converged;
            writeln!(csv, "{x},{z},{},{}", res.value, res.abs_err_estimate).expect("string");
        }
    }
    emit(&args.out, csv.trim_end())?;
    if failed {
        return Err(Failure { code: 2, message: "some table entries did not converge".into() });
    }
    Ok(())
}

fn poly_input(common: &PolyCommon) -> CliResult<(HTypeStructure64, Poly64)> {
    let s = common.structure.resolve()?;
    let p = parse_polynomial(&common.poly, s.horizontal_dim(), s.center_dim())
        .map_err(from_lib)?;
    Ok((s, p))
}

fn run_poly(cmd: &PolyCmd) -> CliResult<()> {
    match cmd {
        PolyCmd::L(common) => {
            let (s, p) = poly_input(common)?;
            print_line(&apply_l(&s, &p).map_err(from_lib)?.to_string())?;
        }
        PolyCmd::Xi { common, i } => {
            let (s, p) = poly_input(common)?;
            if *i == 0 {
                return Err(invalid("--i is 1-based"));
            }
            print_line(&apply_xi(&s, &p, i - 1).map_err(from_lib)?.to_string())?;
        }
        PolyCmd::Heat { common, t } => {
            let (s, p) = poly_input(common)?;
            print_line(&heat_poly(&s, &p, *t).map_err(from_lib)?.to_string())?;
        }
        PolyCmd::Gradsq(common) => {
            let (s, p) = poly_input(common)?;
            print_line(&grad_sq(&s, &p).map_err(from_lib)?.to_string())?;
        }
        PolyCmd::K2 { n, t } => {
            let value = k2_ratio(*n, *t).map_err(from_lib)?;
            let doc = json!({
                "schema": 1,
                "n": n,
                "t": t,
                "k2": value,
                "closed_form": k2_closed_form(*n, *t),
            });
            print_line(&serde_json::to_string_pretty(&doc).expect("json"))?;
        }
    }
    Ok(())
}

fn run_verify_group(structure: &StructureArgs, tol: f64) -> CliResult<()> {
    if !(tol > 0.0) {
        return Err(invalid("--tol must be positive"));
    }
    let s = structure.resolve()?;
    let report = verify_htype(&s, tol);
    let pass = report.pass;
    let doc = json!({ "schema": 1, "report": report });
    print_line(&serde_json::to_string_pretty(&doc).expect("json"))?;
    if !pass {
        return Err(Failure { code: 2, message: "verification failed".into() });
    }
    Ok(())
}

fn run_verify_bounds(
    n: u32,
    m: u32,
    d0_min: f64,
    d0_max: f64,
    grid: &str,
    out: &Option<PathBuf>,
) -> CliResult<()> {
    let (nd, na) = grid
        .split_once('x')
        .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)))
        .ok_or_else(|| invalid(format!("--grid {grid}: expected KxA, e.g. 12x12")))?;
    let spec = GridSpec::new(d0_min, d0_max, nd, na).map_err(from_lib)?;
    let kernel = scan_kernel_ratio(n, m, &spec, d0_min).map_err(from_lib)?;
    let gradient = scan_gradient_ratio(n, m, &spec, d0_min).map_err(from_lib)?;
    let crude = scan_crude_gradient(n, m, &spec).map_err(from_lib)?;
    let vertical = scan_vertical_gradient(n, m, &spec).map_err(from_lib)?;
    let pass = kernel.passes()
        && gradient.passes()
        && crude.max_ratio.is_finite()
        && vertical.max_ratio.is_finite();
    let doc = json!({
        "schema": 1,
        "kernel": kernel,
        "gradient": gradient,
        "crude_gradient": crude,
        "vertical_gradient": vertical,
        "pass": pass,
    });
    emit(out, &serde_json::to_string_pretty(&doc).expect("json"))?;
    if !pass {
        return Err(Failure { code: 2, message: "bound scan failed".into() });
    }
    Ok(())
}

fn run_simulate(args: &SimulateArgs) -> CliResult<()> {
    let s = args.structure.resolve()?;
    let cfg = SimConfig {
        t: args.t,
        steps: args.steps,
        n_paths: args.paths,
        seed: args.seed,
    };
    let batch = simulate(&s, &cfg).map_err(from_lib)?;
    let mut csv = String::new();
    for i in 1..=s.horizontal_dim() {
        if i > 1 {
            csv.push(',');
        }
        write!(csv, "x{i}").expect("string");
    }
    for j in 1..=s.center_dim() {
        write!(csv, ",z{j}").expect("string");
    }
    csv.push('\n');
    for p in &batch.points {
        let row: Vec<String> = p.x.iter().chain(p.z.iter()).map(|v| v.to_string()).collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    emit(&args.out, csv.trim_end())
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.cmd {
        Cmd::Group(a) => run_group(a),
        Cmd::Dist(a) => run_dist(a),
        Cmd::Geodesic(a) => run_geodesic(a),
        Cmd::Heat(a) => match &a.cmd {
            HeatCmd::Eval(e) => run_heat_eval(e),
            HeatCmd::Table(t) => run_heat_table(t),
        },
        Cmd::Poly(a) => run_poly(&a.cmd),
        Cmd::Verify(a) => match &a.cmd {
            VerifyCmd::Group { structure, tol } => run_verify_group(structure, *tol),
            VerifyCmd::Bounds { n, m, d0_min, d0_max, grid, out } => {
                run_verify_bounds(*n, *m, *d0_min, *d0_max, grid, out)
            }
        },
        Cmd::Simulate(a) => run_simulate(a),
    }
}

fn init_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("HTYPE_THREADS") else {
        return Ok(());
    };
    let count: usize = raw
        .parse()
        .map_err(|_| invalid(format!("HTYPE_THREADS={raw}: not a thread count")))?;
    if count == 0 {
        return Err(invalid("HTYPE_THREADS must be positive"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(count)
        .build_global()
        .map_err(|e| invalid(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version go to stdout with success; flag errors exit 1
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    if let Err(f) = init_threads() {
        eprintln!("error: {}", f.message);
        return ExitCode::from(f.code);
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
