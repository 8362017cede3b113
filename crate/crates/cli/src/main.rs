//! Batch front-end: scenario pipelines over the built-in symplectic bundle
//! models, with machine-readable reports and plot-ready tables.

mod ops;
mod scenario;

use clap::{Args, Parser, Subcommand};
use scenario::{ModelSpec, Scenario, StepSpec, SCHEMA_VERSION};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_STEP_FAILURE: u8 = 1;
const EXIT_PARSE_ERROR: u8 = 2;
const EXIT_MODEL_FAILURE: u8 = 3;

#[derive(Parser)]
#[command(name = "weinfib", about = "fibred-form pipelines on symplectic bundle models", version)]
struct Cli {
    /// Output directory for reports and tables.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (falls back to WEINFIB_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed for randomised probes; seeded runs are bit-reproducible.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// cylinder | torus2 | torus4 | product_mxb
    #[arg(long, default_value = "cylinder")]
    model: String,

    #[arg(long, default_value_t = 16)]
    base_samples: usize,

    /// circle | interval
    #[arg(long, default_value = "circle")]
    base_topology: String,

    /// Comma-separated nodes per fibre axis.
    #[arg(long, default_value = "32,32", value_delimiter = ',')]
    fibre_resolution: Vec<usize>,

    /// Amplitude of the b-dependent scale c(b) = 1 + a sin b.
    #[arg(long, default_value_t = 0.0)]
    c_amplitude: f64,

    #[arg(long, default_value_t = 1.0)]
    tubular_radius: f64,
}

impl ModelArgs {
    fn spec(&self) -> ModelSpec {
        ModelSpec {
            name: self.model.clone(),
            base_topology: self.base_topology.clone(),
            base_samples: self.base_samples,
            fibre_resolution: self.fibre_resolution.clone(),
            c_amplitude: self.c_amplitude,
            tubular_radius: self.tubular_radius,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file end to end.
    Run {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Right-inverse, idempotence and kernel residuals of the glued delta.
    Hodge {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "0,1", value_delimiter = ',')]
        degrees: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Construct the Liouville form of the model and verify it.
    Liouville {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Liouville field, eigenspace split and conformal checks.
    Polarize {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Build the family Weinstein chart.
    WeinsteinBuild {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
    /// Probe the chart for fibrewise symplecticity.
    WeinsteinVerify {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 100)]
        probes: usize,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
    /// Classify a graph form as Lagrangian or not.
    Classify {
        #[command(flatten)]
        model: ModelArgs,
        /// zero | const:c1[,c2] | fourier:i,j[,amp] | const_plus_fourier:c,i,j | exact:amp
        #[arg(long)]
        alpha: String,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Project a graph form onto its closed part through the Hodge split.
    Lagrangianize {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        alpha: String,
        #[arg(long, default_value_t = 32)]
        grid: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Graph a projection map and test the subbundle property.
    Graph {
        /// t2_theta | t2_theta_half_sin | t2_theta_sin | t4_theta12 | t4_theta1_r2 | t4_theta1_r1
        #[arg(long)]
        pi: String,
        #[arg(long, default_value_t = 32)]
        grid: usize,
    },
    /// Lagrangian-fibration verdict for a projection map.
    ClassifyFibration {
        #[arg(long)]
        pi: String,
        #[arg(long, default_value_t = 16)]
        grid: usize,
    },
    /// Bi-fibration reparametrisation round trip on the circle.
    Psi {
        #[arg(long, default_value_t = 256)]
        nodes: usize,
        #[arg(long, default_value_t = 0.1)]
        amplitude: f64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
}

fn single_step(model: ModelSpec, op: &str, tol: f64, params: BTreeMap<String, String>) -> Scenario {
    Scenario {
        schema_version: SCHEMA_VERSION,
        seed: None,
        model,
        pipeline: vec![StepSpec {
            index: 1,
            op: op.into(),
            tol,
            params,
        }],
        outputs: BTreeMap::new(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let threads = cli.threads.or_else(|| {
        std::env::var("WEINFIB_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    let scenario = match &cli.command {
        Command::Run { scenario } => {
            let text = match std::fs::read_to_string(scenario) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", scenario.display());
                    return ExitCode::from(EXIT_PARSE_ERROR);
                }
            };
            match scenario::parse_scenario(&text) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_PARSE_ERROR);
                }
            }
        }
        Command::Hodge { model, degrees, trials, tol } => {
            let mut params = BTreeMap::new();
            params.insert(
                "degrees".into(),
                degrees.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(","),
            );
            params.insert("trials".into(), trials.to_string());
            single_step(model.spec(), "hodge", *tol, params)
        }
        Command::Liouville { model, tol } => {
            single_step(model.spec(), "liouville", *tol, BTreeMap::new())
        }
        Command::Polarize { model, tol } => {
            let mut s = single_step(model.spec(), "polarize", *tol, BTreeMap::new());
            s.pipeline.insert(
                0,
                StepSpec {
                    index: 0,
                    op: "liouville".into(),
                    tol: 1e-6,
                    params: BTreeMap::new(),
                },
            );
            s
        }
        Command::WeinsteinBuild { model, h, tol } => {
            let mut params = BTreeMap::new();
            params.insert("h".into(), h.to_string());
            let mut s = single_step(model.spec(), "weinstein-build", *tol, params);
            s.pipeline.insert(
                0,
                StepSpec {
                    index: 0,
                    op: "liouville".into(),
                    tol: 1e-6,
                    params: BTreeMap::new(),
                },
            );
            s
        }
        Command::WeinsteinVerify { model, probes, tol } => {
            let mut params = BTreeMap::new();
            params.insert("probes".into(), probes.to_string());
            let mut s = single_step(model.spec(), "weinstein-verify", *tol, params);
            s.pipeline.insert(
                0,
                StepSpec {
                    index: 0,
                    op: "weinstein-build".into(),
                    tol: 1e-5,
                    params: BTreeMap::new(),
                },
            );
            s.pipeline.insert(
                0,
                StepSpec {
                    index: 0,
                    op: "liouville".into(),
                    tol: 1e-6,
                    params: BTreeMap::new(),
                },
            );
            s
        }
        Command::Classify { model, alpha, tol } => {
            let mut params = BTreeMap::new();
            params.insert("alpha".into(), alpha.clone());
            single_step(model.spec(), "classify", *tol, params)
        }
        Command::Lagrangianize { model, alpha, grid, tol } => {
            let mut params = BTreeMap::new();
            params.insert("alpha".into(), alpha.clone());
            params.insert("grid".into(), grid.to_string());
            single_step(model.spec(), "lagrangianize", *tol, params)
        }
        Command::Graph { pi, grid } => {
            let mut params = BTreeMap::new();
            params.insert("pi".into(), pi.clone());
            params.insert("grid".into(), grid.to_string());
            single_step(ModelSpec::default(), "graph", 1e-6, params)
        }
        Command::ClassifyFibration { pi, grid } => {
            let mut params = BTreeMap::new();
            params.insert("pi".into(), pi.clone());
            params.insert("grid".into(), grid.to_string());
            single_step(ModelSpec::default(), "classify-fibration", 1e-8, params)
        }
        Command::Psi { nodes, amplitude, tol } => {
            let mut params = BTreeMap::new();
            params.insert("nodes".into(), nodes.to_string());
            params.insert("amplitude".into(), amplitude.to_string());
            single_step(ModelSpec::default(), "psi", *tol, params)
        }
    };

    let seed = cli.seed.or(scenario.seed).unwrap_or(0);
    if let Some(dir) = &cli.out {
        if let Err(e) = std::fs::create_dir_all(dir) {
            eprintln!("error: cannot create {}: {e}", dir.display());
            return ExitCode::from(EXIT_MODEL_FAILURE);
        }
    }

    let outcome = match ops::run_scenario(&scenario, seed, cli.out.as_deref()) {
        Ok(o) => o,
        Err(e) => {
            // distinguish model construction problems from step-level ones
            let msg = format!("{e:#}");
            eprintln!("error: {msg}");
            let code = if msg.contains("model build failure") {
                EXIT_MODEL_FAILURE
            } else {
                EXIT_STEP_FAILURE
            };
            return ExitCode::from(code);
        }
    };

    for step in &outcome.report.steps {
        let line = format!(
            "step {} [{}]: {}",
            step.step, step.op, step.verdict
        );
        if cli.verbose {
            let residuals: Vec<String> = step
                .residuals
                .iter()
                .map(|(k, v)| format!("{k}={v:.3e}"))
                .collect();
            println!("{line} ({})", residuals.join(", "));
        } else {
            println!("{line}");
        }
    }
    if cli.verbose {
        for t in &outcome.timings {
            println!("step {} [{}]: {:.1} ms", t.step, t.op, t.wall_time_ms);
        }
    }

    if let Some(dir) = &cli.out {
        let report_path = dir.join("report.json");
        match std::fs::File::create(&report_path)
            .map_err(anyhow::Error::from)
            .and_then(|f| serde_json::to_writer_pretty(f, &outcome.report).map_err(Into::into))
        {
            Ok(()) => {}
            Err(e) => {
                eprintln!("error: cannot write {}: {e}", report_path.display());
                return ExitCode::from(EXIT_STEP_FAILURE);
            }
        }
        // wall times are non-deterministic, so they live next to the report
        let timing_path = dir.join("timings.json");
        if let Ok(f) = std::fs::File::create(timing_path) {
            let _ = serde_json::to_writer_pretty(f, &outcome.timings);
        }
    }

    if outcome.report.exit == 0 {
        ExitCode::SUCCESS
    } else {
        let failed: Vec<String> = outcome
            .report
            .steps
            .iter()
            .filter(|s| s.verdict != "pass")
            .map(|s| format!("{} ({})", s.step, s.op))
            .collect();
        eprintln!("failed steps: {}", failed.join(", "));
        ExitCode::from(EXIT_STEP_FAILURE)
    }
}
