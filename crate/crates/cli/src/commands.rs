//! The five subcommands.

use std::fmt;

use macalloc::allocation::{boundary_rate, solve_multipliers, PowerControlOracle};
use macalloc::bounds::{bound_sweep, BoundReport, Minimizer};
use macalloc::optimize::PolymatroidOracle;
use macalloc::policy::performance_gap_on_trace;
use macalloc::{
    averaged_region_from_trace, frank_wolfe, instantaneous_region, ChannelState, FwReport,
    RankTable, StepRule,
};
use serde::Serialize;

use crate::config::{Config, ConfigError, Mode};
use crate::output::{floats, numbered, Csv, OutputDir};

/// Why a command failed; each kind has its own exit code.
#[derive(Debug)]
pub enum Failure {
    Config(ConfigError),
    Mode(String),
    Solver(String),
    Other(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Other(_) => 1,
            Failure::Config(_) => 2,
            Failure::Mode(_) => 3,
            Failure::Solver(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "config error: {e}"),
            Failure::Mode(m) => write!(f, "mode mismatch: {m}"),
            Failure::Solver(m) => write!(f, "solver did not converge: {m}"),
            Failure::Other(m) => write!(f, "{m}"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(format!("i/o error: {e}"))
    }
}

impl From<macalloc::Error> for Failure {
    fn from(e: macalloc::Error) -> Self {
        match e {
            macalloc::Error::NonConvergence { .. } => Failure::Solver(e.to_string()),
            other => Failure::Other(other.to_string()),
        }
    }
}

fn require(config: &Config, mode: Mode, command: &str) -> Result<(), Failure> {
    if config.mode == mode {
        Ok(())
    } else {
        Err(Failure::Mode(format!(
            "`{command}` needs mode = \"{mode}\", config has \"{}\"",
            config.mode
        )))
    }
}

#[derive(Serialize)]
struct RegionsSummary {
    mode: Mode,
    /// Regions are for constant transmit powers; in power-control mode the budgets are used as those powers.
    power_policy: &'static str,
    n_samples: usize,
    seed: u64,
    states: usize,
}

pub fn regions(config: &Config, out: &mut OutputDir) -> Result<(), Failure> {
    let scenario = config.scenario()?;
    let fading = config.fading()?;
    let states = config.states()?;
    let n = config.samples("n_region", config.samples.n_region)?;
    for (k, gains) in states.iter().enumerate() {
        let state = ChannelState::new(gains.clone())
            .map_err(|e| ConfigError::new(format!("regions.states[{k}]"), e))?;
        let table: RankTable = instantaneous_region(&scenario, &state)?.to_table();
        out.write_json(&format!("instantaneous_{k}.json"), &table)?;
    }
    let trace = fading.sample(n, config.seed)?;
    let averaged = averaged_region_from_trace(&scenario, &trace)?;
    out.write_json("averaged.json", &averaged.region.to_table())?;
    out.write_json("averaged_stderr.json", &averaged.std_err_table())?;
    if config.samples.export_trace {
        let mut buf = Vec::new();
        trace.write_csv(&mut buf)?;
        out.write("trace.csv", &String::from_utf8(buf).expect("CSV is ASCII"))?;
    }
    out.write_json(
        "summary.json",
        &RegionsSummary {
            mode: config.mode,
            power_policy: "constant",
            n_samples: n,
            seed: config.seed,
            states: states.len(),
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct OptimizeSummary {
    mode: Mode,
    rule: StepRule,
    iterations: usize,
    oracle_calls: usize,
    converged: bool,
    gap: f64,
    utility: f64,
    rates: Vec<f64>,
    /// Samples behind the averaged region (fixed-power mode only).
    n_samples: Option<usize>,
    seed: u64,
}

pub fn optimize(config: &Config, out: &mut OutputDir) -> Result<(), Failure> {
    let scenario = config.scenario()?;
    let fading = config.fading()?;
    let utility = config.utility()?;
    let opts = config.fw_options()?;
    let (report, n_samples): (FwReport, Option<usize>) = match config.mode {
        Mode::FixedPower => {
            let n = config.samples("n_region", config.samples.n_region)?;
            let region =
                averaged_region_from_trace(&scenario, &fading.sample(n, config.seed)?)?.region;
            (
                frank_wolfe(&mut PolymatroidOracle::new(&region), &utility, None, &opts)?,
                Some(n),
            )
        }
        Mode::PowerControl => {
            fading
                .require_independent_continuous()
                .map_err(|e| ConfigError::new("fading", e))?;
            let mut oracle = PowerControlOracle::new(
                scenario,
                fading,
                config.budget()?,
                config.solver_options()?,
            )?;
            (frank_wolfe(&mut oracle, &utility, None, &opts)?, None)
        }
    };
    let m = config.num_users();
    let mut header = vec!["iter".to_string(), "utility".into(), "gap".into()];
    header.extend(numbered("R", m));
    let mut csv = Csv::new(&header);
    for it in &report.trajectory {
        csv.row(
            [
                it.iter.to_string(),
                it.utility.to_string(),
                it.gap.to_string(),
            ]
            .into_iter()
            .chain(floats(&it.rates)),
        );
    }
    out.write("iterations.csv", &csv.into_string())?;
    out.write_json(
        "summary.json",
        &OptimizeSummary {
            mode: config.mode,
            rule: report.rule,
            iterations: report.iterations,
            oracle_calls: report.oracle_calls,
            converged: report.converged,
            gap: report.gap,
            utility: report.utility,
            rates: report.rates.clone(),
            n_samples,
            seed: config.seed,
        },
    )?;
    if !report.converged {
        return Err(Failure::Solver(format!(
            "Frank-Wolfe stopped after {} iterations with gap {} > {}",
            report.iterations, report.gap, opts.gap_tol
        )));
    }
    Ok(())
}

pub fn boundary(config: &Config, out: &mut OutputDir) -> Result<(), Failure> {
    require(config, Mode::PowerControl, "boundary")?;
    let scenario = config.scenario()?;
    let fading = config.fading()?;
    fading
        .require_independent_continuous()
        .map_err(|e| ConfigError::new("fading", e))?;
    let budget = config.budget()?;
    let opts = config.solver_options()?;
    let m = config.num_users();
    let mut header = numbered("mu", m);
    header.extend(numbered("lambda", m));
    header.extend(numbered("R", m));
    header.push("residual".into());
    let mut csv = Csv::new(&header);
    for mu in config.directions()? {
        let sol = solve_multipliers(&scenario, &fading, &budget, &mu, None, &opts)?;
        let rates = boundary_rate(&scenario, &fading, &mu, &sol.lambda, &opts.quadrature)?;
        csv.row(
            floats(&mu)
                .chain(floats(sol.lambda.values()))
                .chain(floats(&rates))
                .chain([sol.residual.to_string()]),
        );
    }
    out.write("boundary.csv", &csv.into_string())?;
    Ok(())
}

#[derive(Serialize)]
struct SimulateSummary {
    mean_rates: Vec<f64>,
    rates_se: Vec<f64>,
    mean_utility: f64,
    utility_se: f64,
    utility_of_mean: f64,
    optimum: Vec<f64>,
    optimal_utility: f64,
    gap: f64,
    gap_se: f64,
    n_samples: usize,
    seed: u64,
}

pub fn simulate(config: &Config, out: &mut OutputDir) -> Result<(), Failure> {
    require(config, Mode::FixedPower, "simulate")?;
    let scenario = config.scenario()?;
    let fading = config.fading()?;
    let utility = config.utility()?;
    let n = config.samples("n_sim", config.samples.n_sim)?;
    let trace = fading.sample(n, config.seed)?;
    let report = performance_gap_on_trace(&scenario, &trace, &utility)?;
    let g = &report.greedy;
    let m = config.num_users();
    let mut header = vec!["sample".to_string()];
    header.extend(numbered("h", m));
    header.extend(numbered("R", m));
    header.push("u".into());
    let mut csv = Csv::new(&header);
    for (k, h) in trace.rows().enumerate() {
        csv.row(
            [k.to_string()]
                .into_iter()
                .chain(floats(h))
                .chain(floats(&g.sample_rates[k]))
                .chain([g.sample_utility[k].to_string()]),
        );
    }
    out.write("samples.csv", &csv.into_string())?;
    out.write_json(
        "summary.json",
        &SimulateSummary {
            mean_rates: g.mean_rates.clone(),
            rates_se: g.rates_se.clone(),
            mean_utility: g.mean_utility,
            utility_se: g.utility_se,
            utility_of_mean: g.utility_of_mean,
            optimum: report.optimum.clone(),
            optimal_utility: report.optimal_utility,
            gap: report.gap,
            gap_se: report.gap_se,
            n_samples: n,
            seed: config.seed,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct ScaleSummary {
    scale: f64,
    sigma_h: f64,
    minimizer: Minimizer,
    gap: f64,
    gap_se: f64,
}

#[derive(Serialize)]
struct BoundsSummary<'a> {
    report: &'a BoundReport,
    scales: Vec<ScaleSummary>,
}

pub fn bounds(config: &Config, out: &mut OutputDir) -> Result<(), Failure> {
    require(config, Mode::FixedPower, "bounds")?;
    let scenario = config.scenario()?;
    let fading = config.fading()?;
    let utility = config.utility()?;
    let grid = config.epsilon_grid()?;
    let scales = config.scales()?;
    let n = config.samples("n_bounds", config.samples.n_bounds)?;
    let models = scales
        .iter()
        .map(|&c| fading.with_scaled_spread(c))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| ConfigError::new("bounds.scales", e))?;
    let base = bound_sweep(&scenario, &fading, &utility, &grid, n, config.seed)?;

    let header: Vec<String> =
        "epsilon,delta,A,B,r,omega,bound1,bound2,min_bound,gap,gap_se,vacuous_flag"
            .split(',')
            .map(String::from)
            .collect();
    let mut csv = Csv::new(&header);
    for r in &base.rows {
        csv.row(
            floats(&[
                r.epsilon,
                r.delta,
                r.a,
                r.b,
                r.r,
                r.omega,
                r.bound1,
                r.bound2,
                r.min_bound,
                base.gap,
                base.gap_se,
            ])
            .chain([u8::from(r.vacuous).to_string()]),
        );
    }
    out.write("bounds.csv", &csv.into_string())?;

    let header: Vec<String> = "scale,sigma_h,epsilon,bound1,bound2,min_bound,is_minimizer"
        .split(',')
        .map(String::from)
        .collect();
    let mut fig = Csv::new(&header);
    let mut per_scale = Vec::new();
    for (&c, model) in scales.iter().zip(&models) {
        let scaled;
        let report = if c == 1.0 {
            &base
        } else {
            scaled = bound_sweep(&scenario, model, &utility, &grid, n, config.seed)?;
            &scaled
        };
        for r in &report.rows {
            fig.row(
                floats(&[
                    c,
                    report.sigma_h,
                    r.epsilon,
                    r.bound1,
                    r.bound2,
                    r.min_bound,
                ])
                .chain([u8::from(r.epsilon == report.minimizer.epsilon).to_string()]),
            );
        }
        per_scale.push(ScaleSummary {
            scale: c,
            sigma_h: report.sigma_h,
            minimizer: report.minimizer.clone(),
            gap: report.gap,
            gap_se: report.gap_se,
        });
    }
    out.write("figure1.csv", &fig.into_string())?;
    out.write_json(
        "summary.json",
        &BoundsSummary {
            report: &base,
            scales: per_scale,
        },
    )?;
    Ok(())
}
