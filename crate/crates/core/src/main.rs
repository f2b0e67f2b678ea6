#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use enthier::bounds::{convex_roof_upper_bound, SearchConfig};
use enthier::io::{self, report_number, FileError, LoadOptions, LoadedState};
use enthier::measures::{self, Evaluator, Family, MeasureSpec};
use enthier::partitions::{enumerate_k_partitions, stirling2};
use enthier::sweep::{self, CustomTemplate, SweepConfig, Template};
use enthier::verify::{run_suite, Suite, VerifyConfig};
use enthier::Error;

#[derive(Parser)]
#[command(name = "enthier", version, about = "Hierarchical multipartite entanglement measures")]
struct Cli {
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone, Copy)]
struct SpecArgs {
    /// kgm, qkgm, akgm, kme or qkme
    #[arg(long)]
    family: Family,
    #[arg(long)]
    k: usize,
    /// q for qkgm/qkme, alpha for akgm
    #[arg(long, allow_hyphen_values = true)]
    param: Option<f64>,
}

impl SpecArgs {
    fn spec(&self) -> MeasureSpec {
        MeasureSpec::new(self.family, self.k, self.param)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a measure on a pure state file
    Compute {
        file: PathBuf,
        #[command(flatten)]
        spec: SpecArgs,
        /// Include every partition score
        #[arg(long)]
        scores: bool,
        /// Reject slightly unnormalized input instead of rescaling it
        #[arg(long)]
        no_normalize: bool,
    },
    /// GM and ME curves along a one-parameter family, as CSV
    Sweep {
        /// fig1, fig2 or a path to a custom template file
        #[arg(long, default_value = "fig1")]
        template: String,
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        theta_start: String,
        #[arg(long, default_value = "pi", allow_hyphen_values = true)]
        theta_end: String,
        #[arg(long, default_value_t = 2001)]
        steps: usize,
        #[arg(long, default_value_t = 10.0)]
        kink_factor: f64,
        /// Write the CSV here instead of stdout
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// W-to-GHZ ratio of the alpha-2-GM concurrence, as CSV
    Ratio {
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 3)]
        n_min: usize,
        #[arg(long, default_value_t = 20)]
        n_max: usize,
    },
    /// List or count the k-partitions of n subsystems
    Partitions {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        count_only: bool,
    },
    /// Run a randomized property suite
    Verify {
        /// thm2, thm5, lu, perm, sep-zero, pi-sandwich or n-degeneracy
        #[arg(long)]
        suite: Suite,
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        local_dim: usize,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Overridden by ENTHIER_SEED
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Convex-roof upper bound for a (mixed) state file
    Bound {
        file: PathBuf,
        #[command(flatten)]
        spec: SpecArgs,
        /// Overridden by ENTHIER_SEED
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 32)]
        restarts: usize,
        #[arg(long, default_value_t = 200)]
        refine_iters: usize,
        /// Comma-separated ensemble sizes (default: rank..=rank+2)
        #[arg(long, value_delimiter = ',')]
        ensemble_sizes: Option<Vec<usize>>,
        #[arg(long)]
        no_normalize: bool,
    },
}

enum Failure {
    Input(FileError),
    /// Report already printed; a property failed.
    Violation,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e.into())
    }
}

impl From<FileError> for Failure {
    fn from(e: FileError) -> Self {
        Failure::Input(e)
    }
}

type CmdResult = Result<(), Failure>;

fn effective_seed(flag: u64) -> Result<u64, Error> {
    match std::env::var("ENTHIER_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParam(format!("ENTHIER_SEED={v:?} is not an unsigned integer"))),
        Err(_) => Ok(flag),
    }
}

fn load(path: &Path, no_normalize: bool) -> Result<io::StateFile, FileError> {
    let file = io::read_state_file(
        path,
        LoadOptions {
            normalize: !no_normalize,
        },
    )?;
    for w in &file.warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
    Ok(file)
}

fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    // a closed pipe is not an error worth reporting
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn emit_json<T: Serialize>(value: &T) {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    emit(&text);
}

fn spec_json(spec: &MeasureSpec) -> serde_json::Value {
    json!({ "family": spec.family.name(), "k": spec.k, "param": spec.param })
}

fn compute(file: &Path, spec: MeasureSpec, scores: bool, no_normalize: bool) -> CmdResult {
    let loaded = load(file, no_normalize)?;
    let LoadedState::Pure(psi) = &loaded.state else {
        return Err(Error::InvalidState("compute needs a pure state; use `bound` for mixed states".into()).into());
    };
    let r = Evaluator::new(psi.dims(), spec)?.evaluate(psi)?;
    let mut record = json!({
        "measure": spec_json(&spec),
        "value": report_number(r.value),
    });
    if let Some(p) = &r.attaining_partition {
        record["attaining_partition"] = json!(p.to_string());
    }
    if scores {
        if let Some(list) = &r.per_partition_scores {
            record["per_partition_scores"] = list
                .iter()
                .map(|(p, s)| json!({ "partition": p.to_string(), "score": report_number(*s) }))
                .collect();
        }
    }
    if !r.notes.is_empty() {
        record["notes"] = json!(r.notes);
    }
    if let Some(label) = &loaded.label {
        record["label"] = json!(label);
    }
    emit_json(&record);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_sweep_cmd(
    template: &str,
    spec: SpecArgs,
    theta_start: &str,
    theta_end: &str,
    steps: usize,
    kink_factor: f64,
    output: Option<&Path>,
) -> CmdResult {
    let template = match template {
        "fig1" => Template::Fig1,
        "fig2" => Template::Fig2,
        path => {
            let text = std::fs::read_to_string(path).map_err(|source| FileError::Io {
                path: path.into(),
                source,
            })?;
            Template::Custom(CustomTemplate::parse(&text)?)
        }
    };
    if !(kink_factor > 0.0) {
        return Err(Error::InvalidParam(format!("kink factor must be positive, got {kink_factor}")).into());
    }
    let cfg = SweepConfig {
        family: spec.family,
        k: spec.k,
        param: spec.param,
        theta_start: sweep::parse_angle(theta_start)?,
        theta_end: sweep::parse_angle(theta_end)?,
        steps,
        template,
    };
    let rows = sweep::run_sweep(&cfg)?;
    let text = sweep::sweep_csv(&rows);
    match output {
        Some(p) => std::fs::write(p, &text).map_err(|source| FileError::Io { path: p.into(), source })?,
        None => emit(&text),
    }
    let gm: Vec<f64> = rows.iter().map(|r| r.gm).collect();
    let me: Vec<f64> = rows.iter().map(|r| r.me).collect();
    eprintln!(
        "kinks: value_gm={} value_me={}",
        sweep::detect_kinks(&gm, kink_factor).len(),
        sweep::detect_kinks(&me, kink_factor).len()
    );
    match sweep::find_order_reversal(&rows, 1e-9) {
        Some(r) => eprintln!(
            "order reversal: theta={} vs theta={} (margin {:.3e})",
            rows[r.i].theta, rows[r.j].theta, r.margin
        ),
        None => eprintln!("order reversal: none"),
    }
    Ok(())
}

fn ratio(alpha: f64, n_min: usize, n_max: usize) -> CmdResult {
    if !(3 <= n_min && n_min <= n_max && n_max <= 64) {
        return Err(Error::InvalidParam(format!("need 3 <= n-min <= n-max <= 64, got {n_min}..{n_max}")).into());
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidParam(format!("alpha must be in [0, 1), got {alpha}")).into());
    }
    if alpha == 0.0 {
        eprintln!("warning: alpha = 0 is degenerate; every ratio is exactly 1");
    }
    let mut rows = Vec::new();
    for n in n_min..=n_max {
        let w = measures::w_alpha2(n, alpha)?;
        let g = measures::ghz_alpha2(n, alpha)?;
        rows.push([n as f64, w, g, measures::ghz_w_ratio(n, alpha)?]);
    }
    for pair in rows.windows(2) {
        if alpha > 0.0 && pair[1][3] <= pair[0][3] {
            eprintln!(
                "warning: ratio does not increase from n={} to n={}",
                pair[0][0], pair[1][0]
            );
        }
    }
    emit(&io::csv(&["n", "w_value", "ghz_value", "ratio"], &rows));
    Ok(())
}

fn partitions(n: usize, k: usize, count_only: bool) -> CmdResult {
    if count_only {
        emit(&format!("{}\n", stirling2(n, k)?));
        return Ok(());
    }
    let mut out = std::io::BufWriter::new(std::io::stdout().lock());
    for p in enumerate_k_partitions(n, k)? {
        if writeln!(out, "{p}").is_err() {
            break;
        }
    }
    let _ = out.flush();
    Ok(())
}

fn verify(suite: Suite, n: usize, local_dim: usize, samples: usize, seed: u64) -> CmdResult {
    let cfg = VerifyConfig {
        n,
        local_dim,
        samples,
        seed: effective_seed(seed)?,
    };
    let report = run_suite(suite, &cfg)?;
    let passed = report.passed();
    let mut record = serde_json::to_value(&report).expect("report serializes");
    for p in record["properties"].as_array_mut().into_iter().flatten() {
        let s = p["worst_slack"].as_f64().unwrap_or(f64::NAN);
        p["worst_slack"] = json!(report_number(s));
    }
    record["passed"] = json!(passed);
    emit_json(&record);
    if passed {
        Ok(())
    } else {
        Err(Failure::Violation)
    }
}

#[allow(clippy::too_many_arguments)]
fn bound(
    file: &Path,
    spec: MeasureSpec,
    seed: u64,
    restarts: usize,
    refine_iters: usize,
    ensemble_sizes: Option<Vec<usize>>,
    no_normalize: bool,
) -> CmdResult {
    let loaded = load(file, no_normalize)?;
    let rho = loaded.state.to_density();
    let cfg = SearchConfig {
        seed: effective_seed(seed)?,
        ensemble_sizes,
        restarts,
        refine_iters,
        ..SearchConfig::default()
    };
    let b = convex_roof_upper_bound(&rho, &spec, &cfg, &[])?;
    let weights: Vec<f64> = b.best.entries().iter().map(|(p, _)| report_number(*p)).collect();
    emit_json(&json!({
        "measure": spec_json(&spec),
        "upper_bound": report_number(b.value),
        "ensemble_size": b.best.len(),
        "weights": weights,
        "reconstruction_error": report_number(b.best.reconstruction_error(&rho)),
        "seed": cfg.seed,
        "restarts": cfg.restarts,
    }));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("warning: could not configure thread pool: {e}");
        }
    }
    let result = match cli.command {
        Command::Compute {
            file,
            spec,
            scores,
            no_normalize,
        } => compute(&file, spec.spec(), scores, no_normalize),
        Command::Sweep {
            template,
            spec,
            theta_start,
            theta_end,
            steps,
            kink_factor,
            output,
        } => run_sweep_cmd(
            &template,
            spec,
            &theta_start,
            &theta_end,
            steps,
            kink_factor,
            output.as_deref(),
        ),
        Command::Ratio { alpha, n_min, n_max } => ratio(alpha, n_min, n_max),
        Command::Partitions { n, k, count_only } => partitions(n, k, count_only),
        Command::Verify {
            suite,
            n,
            local_dim,
            samples,
            seed,
        } => verify(suite, n, local_dim, samples, seed),
        Command::Bound {
            file,
            spec,
            seed,
            restarts,
            refine_iters,
            ensemble_sizes,
            no_normalize,
        } => bound(
            &file,
            spec.spec(),
            seed,
            restarts,
            refine_iters,
            ensemble_sizes,
            no_normalize,
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violation) => ExitCode::from(1),
        Err(Failure::Input(e)) => {
            let record = json!({ "error": { "code": e.code(), "message": e.to_string() } });
            eprintln!("{record}");
            ExitCode::from(2)
        }
    }
}
