//! `ppr`: weighted progression-rate estimands from the command line.

mod bundle;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ppr_core::error::{PprError, Result};
use ppr_core::estimands::{delta_ppr_estimate, delta_ppr_smart, relative_metrics, PprResult};
use ppr_core::quadrature::gauss_legendre;
use ppr_core::study::{
    fmt_sig10, run_continuous_study, run_discrete_study, variance_ratio_table, EstimandId,
    GridKind, StudyConfig,
};
use ppr_core::trajectories::{control_mean, treated_mean, ScenarioId};
use ppr_core::weights::{
    auc_discrete_weights, cfb_discrete_weights, contrast_from_weights, ols_discrete_weights,
    quadrature_contrast, Contrast, TimeGrid, WeightSpec,
};

/// Grid agreement required when a weighted estimand is applied to file input.
const GRID_MATCH_TOL: f64 = 1e-9;

#[derive(Parser)]
#[command(
    name = "ppr",
    version,
    about = "Weighted progression-rate estimands, contrasts, and study tables"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the weights and contrast coefficients of an estimand
    Weights {
        /// cfb | ols | auc | beta:a,b | partial-auc | power-auc:alpha
        #[arg(long)]
        estimand: String,
        /// Number of visits
        #[arg(long)]
        m: usize,
        /// equal | gl
        #[arg(long, default_value = "equal")]
        grid: GridKind,
    },
    /// Slope-versus-baseline variance ratios under exchangeable noise
    VarianceTable,
    /// Run the full comparison study and write a tidy CSV
    Study {
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
        /// equal | gl
        #[arg(long, default_value = "equal")]
        grid: GridKind,
        /// Replace the baseline coefficient of every contrast with its
        /// variance-minimizing value
        #[arg(long)]
        smart: bool,
        #[arg(long, value_delimiter = ',')]
        scenarios: Option<Vec<ScenarioId>>,
        #[arg(long, value_delimiter = ',')]
        m: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        sigma: Option<Vec<f64>>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        estimands: Option<Vec<EstimandId>>,
    },
    /// Apply an estimand to per-visit effect estimates from files
    Estimate {
        /// CSV with header t,delta
        #[arg(long)]
        effects: PathBuf,
        /// Headerless m x m covariance CSV
        #[arg(long)]
        cov: PathBuf,
        /// cfb | ols | auc | beta:a,b | partial-auc | power-auc:alpha
        #[arg(long)]
        estimand: String,
        /// Variance-minimizing baseline coefficient
        #[arg(long)]
        smart: bool,
        /// Also report percentages relative to this estimand
        #[arg(long)]
        reference: Option<String>,
    },
    /// Tabulate a built-in scenario's trajectories and effect curves
    Scenario {
        /// decreasing | constant | increasing | inc-then-dec
        scenario: ScenarioId,
        /// Number of equally spaced rows
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
    /// Print a Gauss-Legendre rule
    GlNodes {
        /// Rule order, 1..=64
        #[arg(long)]
        n: usize,
    },
}

/// An estimand named on the command line: either one of the discrete trio
/// or a weight function for quadrature contrasts.
enum EstimandArg {
    Discrete(EstimandId),
    Weighted(WeightSpec),
}

fn parse_estimand(s: &str) -> Result<EstimandArg> {
    match s {
        "cfb" => return Ok(EstimandArg::Discrete(EstimandId::Cfb)),
        "ols" => return Ok(EstimandArg::Discrete(EstimandId::Ols)),
        "auc" => return Ok(EstimandArg::Discrete(EstimandId::Auc)),
        "partial-auc" => return Ok(EstimandArg::Weighted(WeightSpec::partial_auc())),
        _ => {}
    }
    if let Some(rest) = s.strip_prefix("beta:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() != 2 {
            return Err(PprError::InvalidArgument(format!(
                "beta estimand needs two parameters as beta:a,b, got '{s}'"
            )));
        }
        let a = parse_param(parts[0], s)?;
        let b = parse_param(parts[1], s)?;
        return Ok(EstimandArg::Weighted(WeightSpec::beta(a, b)?));
    }
    if let Some(rest) = s.strip_prefix("power-auc:") {
        let alpha = parse_param(rest, s)?;
        return Ok(EstimandArg::Weighted(WeightSpec::power_auc(alpha)?));
    }
    Err(PprError::InvalidArgument(format!(
        "unknown estimand '{s}' (expected cfb, ols, auc, beta:a,b, partial-auc, \
         or power-auc:alpha)"
    )))
}

fn parse_param(raw: &str, whole: &str) -> Result<f64> {
    raw.trim().parse::<f64>().map_err(|_| {
        PprError::InvalidArgument(format!(
            "'{}' is not a number in estimand '{whole}'",
            raw.trim()
        ))
    })
}

fn weight_spec_for(id: EstimandId) -> WeightSpec {
    match id {
        EstimandId::Cfb => WeightSpec::cfb(),
        EstimandId::Ols => WeightSpec::ols(),
        EstimandId::Auc => WeightSpec::auc(),
    }
}

/// Builds the contrast an estimand induces on a visit grid. Weighted
/// estimands demand the quadrature-augmented grid.
fn contrast_for(arg: &EstimandArg, grid: &TimeGrid) -> Result<Contrast> {
    match arg {
        EstimandArg::Discrete(EstimandId::Cfb) => {
            contrast_from_weights(&cfb_discrete_weights(grid)?)
        }
        EstimandArg::Discrete(EstimandId::Ols) => {
            contrast_from_weights(&ols_discrete_weights(grid)?)
        }
        EstimandArg::Discrete(EstimandId::Auc) => {
            contrast_from_weights(&auc_discrete_weights(grid)?)
        }
        EstimandArg::Weighted(spec) => {
            let m = grid.len();
            let target = TimeGrid::gauss_legendre_augmented(m)?;
            for (i, (&have, &want)) in grid.points().iter().zip(target.points()).enumerate() {
                if (have - want).abs() > GRID_MATCH_TOL {
                    return Err(PprError::InvalidArgument(format!(
                        "a weighted estimand needs the quadrature-augmented visit grid: \
                         visit {} is {have}, expected {want}",
                        i + 1
                    )));
                }
            }
            quadrature_contrast(spec, m)
        }
    }
}

fn cmd_weights(estimand: &str, m: usize, grid_kind: GridKind) -> Result<()> {
    let arg = parse_estimand(estimand)?;
    match grid_kind {
        GridKind::EqualSpaced => {
            let id = match arg {
                EstimandArg::Discrete(id) => id,
                EstimandArg::Weighted(spec) => {
                    return Err(PprError::InvalidArgument(format!(
                        "estimand '{}' has no per-increment weights; use --grid gl",
                        spec.label()
                    )))
                }
            };
            let grid = TimeGrid::equal_spaced(m)?;
            let dw = match id {
                EstimandId::Cfb => cfb_discrete_weights(&grid)?,
                EstimandId::Ols => ols_discrete_weights(&grid)?,
                EstimandId::Auc => auc_discrete_weights(&grid)?,
            };
            let contrast = contrast_from_weights(&dw)?;
            println!("t,w,v");
            for (i, (&t, &v)) in grid
                .points()
                .iter()
                .zip(contrast.coefficients())
                .enumerate()
            {
                // the baseline visit carries no increment weight
                let w = if i == 0 {
                    String::new()
                } else {
                    fmt_sig10(dw.values()[i - 1])
                };
                println!("{},{},{}", fmt_sig10(t), w, fmt_sig10(v));
            }
        }
        GridKind::GaussLegendreAugmented => {
            let spec = match arg {
                EstimandArg::Weighted(spec) => spec,
                EstimandArg::Discrete(id) => weight_spec_for(id),
            };
            let contrast = quadrature_contrast(&spec, m)?;
            println!("t,w,v");
            for (&t, &q) in contrast
                .grid()
                .points()
                .iter()
                .zip(contrast.coefficients())
            {
                println!("{},{},{}", fmt_sig10(t), fmt_sig10(spec.eval(t)), fmt_sig10(q));
            }
        }
    }
    Ok(())
}

fn cmd_variance_table() -> Result<()> {
    println!("m,discrete,continuous,discrete_full,continuous_full");
    for row in variance_ratio_table()? {
        println!(
            "{},{:.2},{:.2},{},{}",
            row.m,
            row.discrete,
            row.continuous,
            fmt_sig10(row.discrete),
            fmt_sig10(row.continuous),
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_study(
    out: &PathBuf,
    grid: GridKind,
    smart: bool,
    scenarios: Option<Vec<ScenarioId>>,
    m: Option<Vec<usize>>,
    k: Option<Vec<f64>>,
    sigma: Option<Vec<f64>>,
    rho: Option<f64>,
    estimands: Option<Vec<EstimandId>>,
) -> Result<()> {
    let mut config = StudyConfig {
        grid_kind: grid,
        use_smart: smart,
        ..StudyConfig::default()
    };
    if let Some(v) = scenarios {
        config.scenarios = v;
    }
    if let Some(v) = m {
        config.m_values = v;
    }
    if let Some(v) = k {
        config.k_values = v;
    }
    if let Some(v) = sigma {
        config.sigma_values = v;
    }
    if let Some(v) = rho {
        config.rho = v;
    }
    if let Some(v) = estimands {
        config.estimands = v;
    }
    let table = match config.grid_kind {
        GridKind::EqualSpaced => run_discrete_study(&config)?,
        GridKind::GaussLegendreAugmented => run_continuous_study(&config)?,
    };
    std::fs::write(out, table.to_csv())?;
    eprintln!(
        "study: grid {}, smart {}, rho {}, {} scenarios x {} m x {} k x {} sigma x {} estimands",
        config.grid_kind.label(),
        config.use_smart,
        fmt_sig10(config.rho),
        config.scenarios.len(),
        config.m_values.len(),
        config.k_values.len(),
        config.sigma_values.len(),
        config.estimands.len(),
    );
    eprintln!("wrote {} rows to {}", table.rows.len(), out.display());
    Ok(())
}

fn print_result(prefix: &str, r: &PprResult) {
    println!("{prefix}point: {}", fmt_sig10(r.point));
    println!("{prefix}se: {}", fmt_sig10(r.se));
    println!("{prefix}z_squared: {}", fmt_sig10(r.z_squared));
}

fn cmd_estimate(
    effects: &PathBuf,
    cov: &PathBuf,
    estimand: &str,
    smart: bool,
    reference: Option<&str>,
) -> Result<()> {
    let bundle = bundle::load_bundle(effects, cov)?;
    let arg = parse_estimand(estimand)?;
    let contrast = contrast_for(&arg, bundle.grid())?;
    let run = |c: &Contrast| {
        if smart {
            delta_ppr_smart(c, &bundle)
        } else {
            delta_ppr_estimate(c, &bundle)
        }
    };
    let result = run(&contrast)?;
    println!("estimand: {}", result.estimand);
    println!("smart: {smart}");
    print_result("", &result);
    if let Some(ref_name) = reference {
        let ref_arg = parse_estimand(ref_name)?;
        let ref_contrast = contrast_for(&ref_arg, bundle.grid())?;
        let ref_result = run(&ref_contrast)?;
        println!("reference: {}", ref_result.estimand);
        print_result("reference_", &ref_result);
        let metrics = relative_metrics(
            result.point,
            result.variance,
            ref_result.point,
            ref_result.variance,
        )?;
        println!("signal_pct: {}", fmt_sig10(metrics.signal_pct));
        println!("se_pct: {}", fmt_sig10(metrics.se_pct));
        if ref_result.z_squared <= 0.0 {
            return Err(PprError::InvalidArgument(
                "reference estimand has zero z-squared; no relative z-squared exists".to_string(),
            ));
        }
        println!(
            "z_squared_pct: {}",
            fmt_sig10(100.0 * result.z_squared / ref_result.z_squared)
        );
    }
    Ok(())
}

fn cmd_scenario(scenario: ScenarioId, points: usize) -> Result<()> {
    if points < 2 {
        return Err(PprError::InvalidArgument(format!(
            "scenario table needs at least 2 points, got {points}"
        )));
    }
    let f = control_mean();
    let h = treated_mean(scenario);
    println!("t,f,h,delta,f_prime,h_prime,delta_prime");
    for i in 0..points {
        let t = i as f64 / (points - 1) as f64;
        println!(
            "{},{},{},{},{},{},{}",
            fmt_sig10(t),
            fmt_sig10(f.value(t)),
            fmt_sig10(h.value(t)),
            fmt_sig10(ppr_core::trajectories::effect_cumulative(scenario, t)),
            fmt_sig10(f.derivative(t)),
            fmt_sig10(h.derivative(t)),
            fmt_sig10(ppr_core::trajectories::effect_rate(scenario, t)),
        );
    }
    Ok(())
}

fn cmd_gl_nodes(n: usize) -> Result<()> {
    let rule = gauss_legendre(n)?;
    println!("node,weight");
    for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
        println!("{},{}", fmt_sig10(x), fmt_sig10(w));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Ok(raw) = std::env::var("PPR_THREADS") {
        let threads: usize = raw.trim().parse().map_err(|_| {
            PprError::InvalidArgument(format!(
                "PPR_THREADS must be a positive integer, got '{raw}'"
            ))
        })?;
        if threads == 0 {
            return Err(PprError::InvalidArgument(
                "PPR_THREADS must be a positive integer, got '0'".to_string(),
            ));
        }
        // a failure here means the pool is already set, which is fine
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match cli.command {
        Command::Weights { estimand, m, grid } => cmd_weights(&estimand, m, grid),
        Command::VarianceTable => cmd_variance_table(),
        Command::Study {
            out,
            grid,
            smart,
            scenarios,
            m,
            k,
            sigma,
            rho,
            estimands,
        } => cmd_study(&out, grid, smart, scenarios, m, k, sigma, rho, estimands),
        Command::Estimate {
            effects,
            cov,
            estimand,
            smart,
            reference,
        } => cmd_estimate(&effects, &cov, &estimand, smart, reference.as_deref()),
        Command::Scenario { scenario, points } => cmd_scenario(scenario, points),
        Command::GlNodes { n } => cmd_gl_nodes(n),
    }
}

fn exit_code_for(e: &PprError) -> u8 {
    match e {
        PprError::InvalidArgument(_) | PprError::GridMismatch { .. } | PprError::Parse { .. } => 2,
        PprError::Io(_) => 3,
        PprError::NotPositiveDefinite { .. } | PprError::NonFinite { .. } => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
