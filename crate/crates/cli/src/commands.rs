use std::path::{Path, PathBuf};

use mic_core::inference::{InitScheme, InteractionMode};
use mic_core::moments::first_moment_ode;
use mic_core::{
    cross_validate, evaluate, fit, generate_scenario, initialize, moment_curves, simulate, split_train_test,
    EvalConfig, EventLog, ExponentialKernel, FitConfig, InteractionSpec, Mixing, ModelVariant,
    ScenarioConfig, UserGraph,
};
use serde::Serialize;

use crate::args::*;
use crate::artifact::Provenance;
use crate::error::{CliError, Result};
use crate::formats::{
    edge_list_csv, event_log_csv, params_json, read_edge_list, read_event_log, read_params, read_sigma, EdgeList,
};
use crate::layout::{layout, LayoutOptions};
use crate::sweep::{run_sweep, SweepConfig};

pub(crate) fn dispatch(cmd: &Command, args: Vec<String>) -> Result<()> {
    match cmd {
        Command::Simulate(a) => simulate_cmd(a, args),
        Command::Fit(a) => fit_cmd(a, args),
        Command::Crossval(a) => crossval_cmd(a, args),
        Command::Eval(a) => eval_cmd(a, args),
        Command::Moments(a) => moments_cmd(a, args),
        Command::VizExport(a) => viz_cmd(a, args),
        Command::Sweep(a) => sweep_cmd(a, args),
    }
}

fn resolve_mixing(m: &MixingArgs) -> Result<Mixing> {
    match (m.mixing, m.beta) {
        (Some(MixingKind::Linear), Some(_)) => Err(CliError::Usage("--beta has no effect with --mixing linear".into())),
        (Some(MixingKind::Linear), None) | (None, None) => Ok(Mixing::Linear),
        (Some(MixingKind::Boltzmann), None) => Err(CliError::Usage("--mixing boltzmann needs --beta".into())),
        (_, Some(beta)) => Mixing::boltzmann(beta).map_err(|e| CliError::Usage(e.to_string())),
    }
}

fn kernel(tau: f64) -> Result<ExponentialKernel> {
    ExponentialKernel::new(tau).map_err(|e| CliError::Usage(format!("--tau: {e}")))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent().filter(|d| !d.as_os_str().is_empty()) {
        Some(dir) => create_dir(dir),
        None => Ok(()),
    }
}

struct Data {
    log: EventLog,
    edges: Option<EdgeList>,
    n_users: usize,
    n_cascades: usize,
}

impl Data {
    fn graph(&self) -> Result<UserGraph> {
        match &self.edges {
            Some(e) => e.graph(self.n_users),
            None => Err(CliError::Usage("--graph is required".into())),
        }
    }
}

fn load_data(d: &DataArgs, prov: &mut Provenance) -> Result<Data> {
    prov.add_input(&d.events)?;
    let log = read_event_log(&d.events, d.horizon)?;
    let edges = match &d.graph {
        Some(path) => {
            prov.add_input(path)?;
            Some(read_edge_list(path)?)
        }
        None => None,
    };
    let (seen_users, seen_cascades) = log.id_extent();
    let graph_users = edges.as_ref().and_then(EdgeList::max_id).map_or(0, |id| id + 1);
    let n_users = d.users.unwrap_or(seen_users.max(graph_users));
    let n_cascades = d.cascades.unwrap_or(seen_cascades);
    if n_users == 0 || n_cascades == 0 {
        return Err(CliError::data(&d.events, "no users or cascades; pass --users and --cascades"));
    }
    log.check_ids(n_users, n_cascades)
        .map_err(|e| CliError::data(&d.events, e.to_string()))?;
    Ok(Data {
        log,
        edges,
        n_users,
        n_cascades,
    })
}

fn simulate_cmd(a: &SimulateArgs, args: Vec<String>) -> Result<()> {
    let mut prov = Provenance::new(args, Some(a.seed));
    let (graph, params) = match &a.params {
        Some(path) => {
            prov.add_input(path)?;
            let params = read_params(path)?;
            (UserGraph::from_weights(&params.influence)?, params)
        }
        None => {
            let interaction = match a.sigma.as_str() {
                "identity" => InteractionSpec::Identity,
                path => {
                    let path = Path::new(path);
                    prov.add_input(path)?;
                    let m = read_sigma(path)?;
                    if m.nrows() != a.cascades {
                        return Err(CliError::data(
                            path,
                            format!("matrix is {0}x{0} but --cascades is {1}", m.nrows(), a.cascades),
                        ));
                    }
                    InteractionSpec::Matrix(m)
                }
            };
            let scenario = ScenarioConfig {
                n_users: a.users,
                n_cascades: a.cascades,
                edge_prob: a.edge_prob,
                horizon: a.horizon,
                tau: a.tau,
                w_max: a.w_max,
                mu_max: a.mu_max,
                ..ScenarioConfig::synthetic(resolve_mixing(&a.mixing)?, interaction, a.seed)
            };
            scenario
                .validate()
                .map_err(|e| CliError::Usage(e.to_string()))?;
            generate_scenario(&scenario)?
        }
    };
    let log = simulate(&params, &graph, a.horizon, a.seed)?;
    log::info!("simulated {} events on {} users", log.len(), params.n_users());
    create_dir(&a.out_dir)?;
    prov.emit(&a.out_dir.join("events.csv"), &event_log_csv(&log))?;
    prov.emit(&a.out_dir.join("graph.csv"), &edge_list_csv(&graph, Some(&params.influence)))?;
    prov.emit(&a.out_dir.join("params.json"), &params_json(&params))
}

#[derive(Serialize)]
struct TrajectoryDocument {
    variant: String,
    n_train_events: usize,
    trajectory: Vec<f64>,
    converged: bool,
    iterations: usize,
}

fn train_part(log: &EventLog, fraction: Option<f64>) -> Result<EventLog> {
    match fraction {
        None => Ok(log.clone()),
        Some(f) => Ok(split_train_test(log, f).map_err(|e| CliError::Usage(format!("--train-fraction: {e}")))?.0),
    }
}

fn fit_cmd(a: &FitArgs, args: Vec<String>) -> Result<()> {
    let mut prov = Provenance::new(args, None);
    let data = load_data(&a.data, &mut prov)?;
    let graph = data.graph()?;
    kernel(a.tau)?;

    let (mixing, interaction, name) = match a.variant {
        Some(v) => {
            let beta = || {
                a.mixing
                    .beta
                    .ok_or_else(|| CliError::Usage(format!("--variant {v:?} needs --beta").to_lowercase()))
            };
            let variant = match v {
                VariantKind::Mic => ModelVariant::Mic { beta: beta()? },
                VariantKind::Cc => ModelVariant::Cc { beta: beta()? },
                VariantKind::Linmic => ModelVariant::LinMic,
                VariantKind::Ic => ModelVariant::Ic,
            };
            (variant.mixing(), variant.interaction_mode(), variant.name().to_string())
        }
        None => {
            let mixing = resolve_mixing(&a.mixing)?;
            let interaction = match a.sigma.as_str() {
                "learn" => InteractionMode::Learn,
                "identity" => InteractionMode::FixedIdentity,
                path => {
                    let path = Path::new(path);
                    prov.add_input(path)?;
                    InteractionMode::Fixed(read_sigma(path)?)
                }
            };
            (mixing, interaction, "custom".to_string())
        }
    };

    let train = train_part(&data.log, a.train_fraction)?;
    let mut cfg = FitConfig {
        epsilon: a.epsilon,
        max_outer_iters: a.max_iters,
        interaction,
        n_cascades: Some(data.n_cascades),
        ..FitConfig::new(a.tau, mixing)
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(weights) = data.edges.as_ref().and_then(|e| e.weights(data.n_users)) {
        log::info!("starting from the graph's edge weights");
        let mut start = initialize(&train, &graph, data.n_cascades, kernel(a.tau)?, mixing)?;
        start.influence = weights;
        cfg.init = InitScheme::Given(start);
    }
    let result = fit(&train, &graph, &cfg)?;
    log::info!(
        "fit {name}: {} iterations, log-likelihood {:?}",
        result.iterations,
        result.trajectory.last()
    );

    ensure_parent(&a.out)?;
    prov.emit(&a.out, &params_json(&result.params))?;
    prov.emit_json(
        &a.out.with_extension("trajectory.json"),
        &TrajectoryDocument {
            variant: name,
            n_train_events: train.len(),
            trajectory: result.trajectory,
            converged: result.converged,
            iterations: result.iterations,
        },
    )
}

#[derive(Serialize)]
struct CrossvalCellDoc {
    beta: f64,
    tau: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    loglik: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct CrossvalDocument {
    schema: &'static str,
    mixing: &'static str,
    train_fraction: f64,
    best_beta: f64,
    best_tau: f64,
    best_loglik: f64,
    cells: Vec<CrossvalCellDoc>,
}

fn crossval_cmd(a: &CrossvalArgs, args: Vec<String>) -> Result<()> {
    let mut prov = Provenance::new(args, None);
    let data = load_data(&a.data, &mut prov)?;
    let graph = data.graph()?;
    let first_beta = *a.betas.first().expect("clap requires one value");
    let mixing = if a.linear {
        Mixing::Linear
    } else {
        Mixing::boltzmann(first_beta).map_err(|e| CliError::Usage(e.to_string()))?
    };
    let interaction = match a.sigma.as_str() {
        "learn" => InteractionMode::Learn,
        "identity" => InteractionMode::FixedIdentity,
        other => return Err(CliError::Usage(format!("--sigma must be learn or identity, got {other:?}"))),
    };
    let base = FitConfig {
        interaction,
        n_cascades: Some(data.n_cascades),
        ..FitConfig::new(a.taus[0], mixing)
    };
    for &tau in &a.taus {
        kernel(tau)?;
    }
    let cv = cross_validate(&data.log, &graph, &a.betas, &a.taus, a.train_fraction, &base)?;
    let doc = CrossvalDocument {
        schema: "mic.crossval/1",
        mixing: if a.linear { "linear" } else { "boltzmann" },
        train_fraction: a.train_fraction,
        best_beta: cv.best_beta,
        best_tau: cv.best_tau,
        best_loglik: cv.best_score,
        cells: cv
            .table
            .into_iter()
            .map(|c| {
                let (loglik, error) = match c.score {
                    Ok(s) => (Some(s), None),
                    Err(e) => (None, Some(e)),
                };
                CrossvalCellDoc {
                    beta: c.beta,
                    tau: c.tau,
                    loglik,
                    error,
                }
            })
            .collect(),
    };
    ensure_parent(&a.out)?;
    prov.emit_json(&a.out, &doc)
}

#[derive(Serialize)]
struct EvalDocument {
    schema: &'static str,
    train_fraction: f64,
    n_train_events: usize,
    seed: u64,
    #[serde(flatten)]
    report: mic_core::MetricReport,
}

fn eval_cmd(a: &EvalArgs, args: Vec<String>) -> Result<()> {
    let mut prov = Provenance::new(args, Some(a.seed));
    prov.add_input(&a.params)?;
    let params = read_params(&a.params)?;
    let data = load_data(
        &DataArgs {
            users: Some(a.data.users.unwrap_or(params.n_users())),
            cascades: Some(a.data.cascades.unwrap_or(params.n_cascades())),
            ..a.data.clone()
        },
        &mut prov,
    )?;
    if data.n_users != params.n_users() || data.n_cascades != params.n_cascades() {
        return Err(CliError::Usage(format!(
            "parameters are for {} users and {} cascades",
            params.n_users(),
            params.n_cascades()
        )));
    }
    let graph = match &data.edges {
        Some(_) => data.graph()?,
        None => UserGraph::from_weights(&params.influence)?,
    };
    let (train, test) =
        split_train_test(&data.log, a.train_fraction).map_err(|e| CliError::Usage(format!("--train-fraction: {e}")))?;
    let cfg = EvalConfig {
        n_bins: a.bins,
        replications: a.replications,
        seed: a.seed,
        context_fractions: a.context_fractions.clone(),
        top_fractions: a.top_fractions.clone(),
    };
    let report = evaluate(&params, &graph, &train, &test, &cfg)?;
    ensure_parent(&a.out)?;
    prov.emit_json(
        &a.out,
        &EvalDocument {
            schema: "mic.eval/1",
            train_fraction: a.train_fraction,
            n_train_events: train.len(),
            seed: a.seed,
            report,
        },
    )
}

#[derive(Serialize)]
struct MomentsDocument {
    schema: &'static str,
    #[serde(flatten)]
    curves: mic_core::MomentCurves,
    /// `[u][c][k]` from the per-cascade first-moment system.
    #[serde(skip_serializing_if = "Option::is_none")]
    per_cascade_ode: Option<Vec<Vec<Vec<f64>>>>,
}

fn moments_cmd(a: &MomentsArgs, args: Vec<String>) -> Result<()> {
    let mut prov = Provenance::new(args, None);
    prov.add_input(&a.params)?;
    let params = read_params(&a.params)?;
    let times: Vec<f64> = if !a.times.is_empty() {
        a.times.clone()
    } else {
        if a.points < 2 {
            return Err(CliError::Usage("--points must be at least 2".into()));
        }
        (0..a.points)
            .map(|k| a.t_max * k as f64 / (a.points - 1) as f64)
            .collect()
    };
    let curves = moment_curves(&params, &times)?;
    if !curves.stability.stable {
        log::warn!(
            "spectral radius {} of the influence matrix exceeds 1/tau = {}; moments grow without bound",
            curves.stability.rho,
            curves.stability.threshold
        );
    }
    let per_cascade_ode = if a.per_cascade_ode {
        let solved = first_moment_ode(&params, &times)?;
        Some(
            (0..params.n_users())
                .map(|u| {
                    (0..params.n_cascades())
                        .map(|c| solved.iter().map(|m| m[(u, c)]).collect())
                        .collect()
                })
                .collect(),
        )
    } else {
        None
    };
    ensure_parent(&a.out)?;
    prov.emit_json(
        &a.out,
        &MomentsDocument {
            schema: "mic.moments/1",
            curves,
            per_cascade_ode,
        },
    )
}

fn viz_cmd(a: &VizArgs, args: Vec<String>) -> Result<()> {
    let mut prov = Provenance::new(args, Some(a.seed));
    prov.add_input(&a.params)?;
    prov.add_input(&a.events)?;
    let params = read_params(&a.params)?;
    let log = read_event_log(&a.events, a.horizon)?;
    log.check_ids(params.n_users(), params.n_cascades())
        .map_err(|e| CliError::data(&a.events, e.to_string()))?;
    let options = LayoutOptions {
        threshold_percentile: a.threshold_percentile,
        layer_offset: a.layer_offset,
        iterations: a.iterations,
        seed: a.seed,
    };
    let doc = layout(&params, &log, &options)?;
    ensure_parent(&a.out)?;
    prov.emit_json(&a.out, &doc)
}

fn sweep_cmd(a: &SweepArgs, args: Vec<String>) -> Result<()> {
    let prov = Provenance::new(args, Some(a.seed));
    let cfg = SweepConfig {
        betas: a.betas.clone(),
        sigmas: a.sigmas.clone(),
        replications: a.replications,
        base_seed: a.seed,
        n_users: a.users,
        n_cascades: a.cascades,
        edge_prob: a.edge_prob,
        horizon: a.horizon,
        tau: a.tau,
        train_fraction: a.train_fraction,
        ..SweepConfig::default()
    };
    let journal: PathBuf = a.journal.clone().unwrap_or_else(|| a.out.with_extension("jsonl"));
    ensure_parent(&a.out)?;
    let table = run_sweep(&cfg, &journal)?;
    prov.emit_json(&a.out, &table)
}
