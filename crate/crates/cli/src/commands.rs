//! Subcommand implementations. Each writes its artifacts under the output
//! directory and returns whether every requested computation completed
//! without flagged failures.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use dml_core::bounds::{bound_report, corollary_checklist, plug_in_diagnostics, BoundReport, Checklist, PlugInDiagnostics};
use dml_core::engine::{dml_estimate, DmlResult};
use dml_core::simlab::table::{markdown_table, read_csv, write_csv};
use dml_core::simlab::{run_monte_carlo, CoverageCell};
use dml_core::Dataset;

use crate::config::{Command, RunConfig};
use crate::error::CliError;

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "+", env!("DML_GIT_DESCRIBE"));

/// Provenance block embedded in every JSON artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub command: Command,
    pub config: RunConfig,
    pub seed: u64,
    pub threads: usize,
    pub wall_time_seconds: f64,
}

impl Manifest {
    fn new(cfg: &RunConfig, command: Command, started: Instant) -> Self {
        Manifest {
            version: VERSION.into(),
            command,
            config: cfg.effective(command),
            seed: cfg.seed,
            threads: rayon::current_num_threads(),
            wall_time_seconds: started.elapsed().as_secs_f64(),
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateArtifact {
    pub manifest: Manifest,
    pub result: DmlResult,
    pub diagnostics: PlugInDiagnostics,
}

/// Runs the cross-fitted estimator on a CSV file. Relative data paths are
/// resolved against `base`, normally the directory of the configuration file.
pub fn estimate(cfg: &RunConfig, base: &Path) -> Result<bool, CliError> {
    cfg.validate(Command::Estimate)?;
    let started = Instant::now();
    let data_cfg = cfg.data.as_ref().expect("validated");
    let path = if data_cfg.path.is_absolute() { data_cfg.path.clone() } else { base.join(&data_cfg.path) };
    let data = Dataset::read_csv(&path, &data_cfg.columns)?;
    let functional = cfg.functional.as_ref().expect("validated");
    let spec = functional.build(&data)?;
    let regression = cfg.regression_or_default();
    let riesz = cfg.riesz_or_default();
    let result = dml_estimate(&data, &spec, &regression, &riesz, cfg.folds, cfg.level, cfg.seed)?;
    let diagnostics = plug_in_diagnostics(&result);

    create_dir(&cfg.output)?;
    let mut csv = String::from("kind,point,n,theta,sigma,se,level,ci_low,ci_high\n");
    csv.push_str(&format!(
        "{},{},{},{},{},{},{},{},{}\n",
        spec.kind().name(),
        spec.point(),
        result.n,
        result.theta,
        result.sigma,
        result.se,
        result.level,
        result.ci[0],
        result.ci[1]
    ));
    fs::write(cfg.output.join("estimate.csv"), csv)?;

    println!("{} at {} (n = {}, L = {})", spec.kind().name(), spec.point(), result.n, cfg.folds);
    println!("theta = {:.6}", result.theta);
    println!("sigma = {:.6}  se = {:.6}", result.sigma, result.se);
    println!("{:.0}% CI = [{:.6}, {:.6}]", 100.0 * (1.0 - result.level), result.ci[0], result.ci[1]);
    println!("plug-in kappa = {:.4}  zeta = {:.4}", diagnostics.kappa, diagnostics.zeta);
    match (diagnostics.berry_esseen, diagnostics.moment_condition) {
        (Some(be), Some(mc)) => println!("berry-esseen term = {be:.4}  ((kappa/sigma)^3 + zeta^2)/sqrt(n) = {mc:.4}"),
        _ => println!("moment diagnostics undefined: sigma = 0"),
    }
    println!("max |alpha| = {:.4}  trimmed rows = {}", diagnostics.max_abs_alpha, diagnostics.trimmed);

    let artifact = EstimateArtifact { manifest: Manifest::new(cfg, Command::Estimate, started), result, diagnostics };
    write_json(&cfg.output.join("estimate.json"), &artifact)?;
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsArtifact {
    pub manifest: Manifest,
    pub report: Option<BoundReport>,
    pub checklist: Option<Checklist>,
}

pub fn bounds(cfg: &RunConfig) -> Result<bool, CliError> {
    cfg.validate(Command::Bounds)?;
    let started = Instant::now();
    let report = cfg.bounds.as_ref().map(bound_report).transpose()?;
    let checklist = (!cfg.checklist.is_empty()).then(|| corollary_checklist(&cfg.checklist)).transpose()?;
    if let Some(r) = &report {
        println!("delta (basic)   = {:.6e}", r.delta_basic);
        println!("delta (refined) = {:.6e}", r.delta_refined);
        println!("berry-esseen    = {:.6e}", r.berry_esseen);
        println!("variance bound  = {:.6e} (delta' = {:.6e}, delta'' = {:.6e})", r.variance.total, r.variance.delta_prime, r.variance.delta_double_prime);
        if let Some(a) = r.approximation_error {
            println!("approximation   = {a:.6e}");
        }
        println!("kolmogorov      = {:.6e}", r.kolmogorov_bound);
    }
    if let Some(c) = &checklist {
        let flag = |t: &dml_core::bounds::Trajectory| if t.non_increasing { "non-increasing" } else { "NOT non-increasing" };
        println!("n: {:?}", c.n);
        println!("moments          {}", flag(&c.moments));
        println!("regression rate  {}", flag(&c.regression_rate));
        println!("representer rate {}", flag(&c.representer_rate));
        println!("product rate     {}", flag(&c.product_rate));
    }
    create_dir(&cfg.output)?;
    let artifact = BoundsArtifact { manifest: Manifest::new(cfg, Command::Bounds, started), report, checklist };
    write_json(&cfg.output.join("bounds.json"), &artifact)?;
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationArtifact {
    pub manifest: Manifest,
    /// Distinct failure tags per cell.
    pub failure_kinds: Vec<Vec<String>>,
    pub cells: Vec<CoverageCell>,
}

fn learner_title(learner: &str) -> &str {
    match learner {
        "mlp" => "neural network",
        "forest" => "random forest",
        other => other,
    }
}

fn regime_title(regime: &str) -> &str {
    match regime {
        "high" => "High",
        _ => "Low",
    }
}

pub fn table_title(regime: &str, learner: &str) -> String {
    format!("{} dimensional coverage simulation with {}", regime_title(regime), learner_title(learner))
}

pub fn coverage_stem(regime: &str, learner: &str) -> String {
    format!("coverage_{regime}_{learner}")
}

pub fn simulate(cfg: &RunConfig) -> Result<bool, CliError> {
    cfg.validate(Command::Simulate)?;
    let started = Instant::now();
    let sim = cfg.simulation_config();
    let report = run_monte_carlo(&sim)?;
    let (regime, learner) = (sim.regime(), sim.learner());

    create_dir(&cfg.output)?;
    let stem = coverage_stem(regime, learner);
    let mut csv = Vec::new();
    write_csv(&report.cells, &mut csv)?;
    fs::write(cfg.output.join(format!("{stem}.csv")), csv)?;
    let markdown = format!(
        "## {}\n\nR = {}, n = {}, L = {}, seed = {}\n\n{}",
        table_title(regime, learner),
        sim.replications,
        sim.n,
        sim.folds,
        sim.seed,
        markdown_table(&report.cells)
    );
    fs::write(cfg.output.join(format!("{stem}.md")), &markdown)?;
    print!("{markdown}");

    let flagged = report.cells.iter().filter(|c| c.flagged).count();
    let artifact = SimulationArtifact {
        manifest: Manifest::new(cfg, Command::Simulate, started),
        failure_kinds: report.failure_kinds,
        cells: report.cells,
    };
    write_json(&cfg.output.join(format!("manifest_{regime}_{learner}.json")), &artifact)?;
    if flagged > 0 {
        log::warn!("{flagged} cell(s) flagged for failed replications");
    }
    Ok(flagged == 0)
}

/// Published table order.
pub const TABLE_ORDER: [(&str, &str); 6] =
    [("low", "mlp"), ("low", "forest"), ("low", "lasso"), ("high", "mlp"), ("high", "forest"), ("high", "lasso")];

/// Collates the coverage CSVs in `dir` into one markdown document in table order.
pub fn report(dir: &Path, output: Option<PathBuf>) -> Result<bool, CliError> {
    let mut doc = String::from("# Coverage simulations\n");
    let mut found = 0;
    let mut flagged = false;
    for (k, (regime, learner)) in TABLE_ORDER.iter().enumerate() {
        let path = dir.join(format!("{}.csv", coverage_stem(regime, learner)));
        if !path.exists() {
            log::info!("{} not found, skipping", path.display());
            continue;
        }
        let file = fs::File::open(&path).map_err(|e| CliError::io(format!("cannot open {}: {e}", path.display())))?;
        let cells = read_csv(file)?;
        flagged |= cells.iter().any(|c| c.flagged);
        let reps = cells.iter().map(|c| c.replications).max().unwrap_or(0);
        doc.push_str(&format!("\n## Table {}. {}\n\nR = {reps}\n\n{}", k + 1, table_title(regime, learner), markdown_table(&cells)));
        found += 1;
    }
    if found == 0 {
        return Err(CliError::io(format!("no coverage_<regime>_<learner>.csv files in {}", dir.display())));
    }
    let out = output.unwrap_or_else(|| dir.join("report.md"));
    fs::write(&out, &doc).map_err(|e| CliError::io(format!("cannot write {}: {e}", out.display())))?;
    print!("{doc}");
    Ok(!flagged)
}
