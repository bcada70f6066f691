use std::path::Path;
use std::time::Instant;

use beliefctl_core::aggregation::{
    build_aggregate_mdp, epsilon_and_bound, representative_count, BasePolicyBundle, BuildOptions,
    ConstructionMode, FeatureSpace, RepresentativeSet,
};
use beliefctl_core::document::{load_model, ModelDocument};
use beliefctl_core::evaluation::{
    adaptation_metric, evaluate_policy, run_episode, CostSummary, EvalOptions, ModelSchedule,
    SwitchingPolicy,
};
use beliefctl_core::recovery::{
    build_recovery_pomdp, zone_feature_space, RecoveryParams, DENSE_REPLICA_LIMIT,
};
use beliefctl_core::rng::derive_seed;
use beliefctl_core::rollout::{Decision, RolloutConfig, RolloutPlanner, RolloutPolicy};
use beliefctl_core::{Belief, DenseModel, Policy, Pomdp};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, FeatureSpec, LoadedConfig, ModelSpec, PolicyKind};
use crate::output::{config_hash, write_json, Csv};
use crate::{Cli, CliError, Command};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub states: usize,
    pub features: usize,
    pub resolution: u32,
    pub representatives: usize,
    pub controls: usize,
    pub mode: ConstructionMode,
    pub nonzeros: usize,
    pub sweeps: usize,
    pub last_change: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptationPoint {
    pub lookahead: usize,
    pub horizon: usize,
    /// Mean wall time per simulated decision.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
    pub cost: f64,
    pub std_error: f64,
    pub adaptation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptationRecord {
    /// Base-policy cost on the changed model.
    pub j0: f64,
    pub j0_std_error: f64,
    pub j1: f64,
    pub episodes: usize,
    pub horizon: usize,
    pub points: Vec<AdaptationPoint>,
}

struct Context<'a> {
    cli: &'a Cli,
    loaded: Option<LoadedConfig>,
    seed: u64,
    hash: String,
}

impl Context<'_> {
    fn config(&self) -> Result<&ExperimentConfig, CliError> {
        self.loaded
            .as_ref()
            .map(|l| &l.config)
            .ok_or_else(|| CliError::Config("this command needs --config".into()))
    }

    fn out(&self, name: &str) -> std::path::PathBuf {
        self.cli.out.join(name)
    }

    fn timing(&self, start: Instant) -> Option<f64> {
        (!self.cli.no_timing).then(|| start.elapsed().as_secs_f64())
    }

    fn csv(&self, header: &[&str]) -> Csv {
        Csv::new(&self.hash, self.seed, header)
    }
}

pub(crate) fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let loaded = cli
        .config
        .as_deref()
        .map(LoadedConfig::from_path)
        .transpose()?;
    let seed = cli
        .seed
        .or(loaded.as_ref().map(|l| l.config.seed))
        .unwrap_or(0);
    let hash = config_hash(loaded.as_ref().map_or(&[][..], |l| &l.bytes));
    let ctx = Context {
        cli,
        loaded,
        seed,
        hash,
    };
    match &cli.command {
        Command::Solve => solve(&ctx),
        Command::Evaluate { bundle, trace } => evaluate(&ctx, bundle.as_deref(), *trace),
        Command::BoundExperiment => bound_experiment(&ctx),
        Command::Adaptation => adaptation(&ctx),
        Command::CountRepresentatives => count_representatives(&ctx),
        Command::Oracle => oracle(&ctx),
    }
}

struct Models {
    pre: Box<dyn Pomdp>,
    /// Switch step and the changed model.
    post: Option<(usize, Box<dyn Pomdp>)>,
    params: Option<RecoveryParams>,
}

impl Models {
    fn schedule(&self) -> ModelSchedule<'_> {
        match &self.post {
            Some((k, post)) => ModelSchedule::switching(self.pre.as_ref(), *k, post.as_ref()),
            None => ModelSchedule::fixed(self.pre.as_ref()),
        }
    }
}

fn load_models(ctx: &Context<'_>) -> Result<Models, CliError> {
    let loaded = ctx.loaded.as_ref().expect("checked by config()");
    let config = &loaded.config;
    match &config.model {
        ModelSpec::Recovery(params) => {
            let pre = build_recovery_pomdp(params)?;
            let post = match &config.scenario {
                Some(s) => Some((
                    s.switch_step,
                    build_recovery_pomdp(&s.delta.apply(params)?)?,
                )),
                None => None,
            };
            Ok(Models {
                pre,
                post,
                params: Some(params.clone()),
            })
        }
        ModelSpec::Path(path) => {
            let path = loaded.resolve(path);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let doc =
                ModelDocument::from_json(&text).map_err(|e| CliError::Config(e.to_string()))?;
            Ok(Models {
                pre: load_model(&doc)?,
                post: None,
                params: None,
            })
        }
    }
}

fn feature_space(config: &ExperimentConfig, models: &Models) -> Result<FeatureSpace, CliError> {
    match &config.aggregation.features {
        FeatureSpec::Identity => Ok(FeatureSpace::identity(models.pre.num_states())),
        FeatureSpec::Zones { zones } => {
            let params = models.params.as_ref().expect("validated with the config");
            Ok(zone_feature_space(params, zones)?)
        }
    }
}

fn solve_with(
    ctx: &Context<'_>,
    model: &dyn Pomdp,
    features: FeatureSpace,
    resolution: u32,
    threshold: f64,
) -> Result<(BasePolicyBundle, SolveSummary), CliError> {
    let config = ctx.config()?;
    let start = Instant::now();
    let reps = RepresentativeSet::enumerate_with_capacity(
        features.num_features(),
        resolution,
        config.aggregation.capacity,
    )?;
    let options = BuildOptions {
        mode: config.aggregation.construction,
        seed: derive_seed(ctx.seed, &[0, resolution as u64]),
        pair_budget: config.aggregation.pair_budget,
    };
    let mut mdp = build_aggregate_mdp(model, features, reps, options)?;
    let solution = mdp
        .value_iteration(threshold, config.solver.max_sweeps)?
        .clone();
    let summary = SolveSummary {
        states: model.num_states(),
        features: mdp.features().num_features(),
        resolution,
        representatives: mdp.num_states(),
        controls: mdp.num_controls(),
        mode: mdp.mode(),
        nonzeros: mdp.nonzeros(),
        sweeps: solution.sweeps,
        last_change: solution.last_change,
        wall_seconds: ctx.timing(start),
    };
    Ok((BasePolicyBundle::new(mdp)?, summary))
}

fn solve(ctx: &Context<'_>) -> Result<(), CliError> {
    let config = ctx.config()?;
    let models = load_models(ctx)?;
    let features = feature_space(config, &models)?;
    let (bundle, summary) = solve_with(
        ctx,
        models.pre.as_ref(),
        features,
        config.aggregation.resolution,
        config.solver.threshold,
    )?;
    write_json(&ctx.out("bundle.json"), &bundle)?;
    write_json(&ctx.out("solve_summary.json"), &summary)?;
    if let Some(params) = &models.params {
        if params.replicas <= DENSE_REPLICA_LIMIT {
            let dense = DenseModel::from_model(models.pre.as_ref())?;
            write_json(&ctx.out("model.json"), &ModelDocument::from_dense(&dense))?;
        }
    }
    Ok(())
}

fn read_bundle(path: &Path) -> Result<BasePolicyBundle, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("bundle: {e}")))
}

fn initial_belief(config: &ExperimentConfig, n: usize) -> Result<Belief, CliError> {
    match &config.evaluation.initial_belief {
        Some(p) if p.len() == n => Ok(Belief::new(p.clone())?),
        Some(p) => Err(CliError::Config(format!(
            "initial belief has {} entries for {n} states",
            p.len()
        ))),
        None => Ok(Belief::point_mass(n, 0)),
    }
}

fn rollout_config(ctx: &Context<'_>, base: &RolloutConfig) -> RolloutConfig {
    base.clone()
        .with_seed(derive_seed(ctx.seed, &[2, base.seed]))
}

fn evaluate(ctx: &Context<'_>, bundle_flag: Option<&Path>, trace: bool) -> Result<(), CliError> {
    let config = ctx.config()?;
    let models = load_models(ctx)?;
    let bundle = match (bundle_flag, &config.bundle) {
        (Some(path), _) => read_bundle(path)?,
        (None, Some(path)) => read_bundle(&ctx.loaded.as_ref().unwrap().resolve(path))?,
        (None, None) => {
            let features = feature_space(config, &models)?;
            solve_with(
                ctx,
                models.pre.as_ref(),
                features,
                config.aggregation.resolution,
                config.solver.threshold,
            )?
            .0
        }
    };
    let n = models.pre.num_states();
    if bundle.num_states() != n {
        return Err(CliError::Config(format!(
            "bundle covers {} states, model has {n}",
            bundle.num_states()
        )));
    }
    let b0 = initial_belief(config, n)?;
    let options = EvalOptions {
        episodes: config.evaluation.episodes,
        horizon: config.evaluation.horizon,
        seed: derive_seed(ctx.seed, &[1]),
        estimator: config.evaluation.estimator_for(n),
    };
    let rollout = rollout_config(ctx, &config.rollout);
    let schedule = models.schedule();
    let mut csv = ctx.csv(&[
        "policy",
        "episodes",
        "horizon",
        "mean",
        "std_dev",
        "std_error",
        "truncation_bound",
        "degenerate_steps",
    ]);
    for &kind in &config.evaluation.policies {
        let summary = match kind {
            PolicyKind::Base => evaluate_policy(&schedule, || base_policy(&bundle), &b0, &options)?,
            PolicyKind::Rollout => {
                let make = rollout_factory(&models, &bundle, &rollout)?;
                evaluate_policy(&schedule, make, &b0, &options)?
            }
        };
        if summary.episodes > 0 {
            csv.row(&summary_fields(kind.name(), options.horizon, &summary));
        }
    }
    csv.write(&ctx.out("evaluation.csv"))?;
    if trace {
        write_trace(ctx, &models, &bundle, &rollout, &b0, &options)?;
    }
    Ok(())
}

fn base_policy(bundle: &BasePolicyBundle) -> impl Policy + '_ {
    move |b: &Belief| bundle.base_control(b.probs())
}

/// A constructor of rollout policies that plans on the model in force:
/// before a scenario switch on the original model, after it on the changed
/// one, always with the same bundle.
fn rollout_factory<'a>(
    models: &'a Models,
    bundle: &'a BasePolicyBundle,
    config: &'a RolloutConfig,
) -> Result<impl Fn() -> BoxedPolicy<'a> + Sync + 'a, CliError> {
    RolloutPlanner::new(models.pre.as_ref(), bundle, config.clone())?;
    if let Some((_, post)) = &models.post {
        RolloutPlanner::new(post.as_ref(), bundle, config.clone())?;
    }
    Ok(move || {
        let planner = |m: &'a dyn Pomdp| {
            RolloutPolicy::new(RolloutPlanner::new(m, bundle, config.clone()).expect("validated"))
        };
        BoxedPolicy(match &models.post {
            Some((k, post)) => Box::new(SwitchingPolicy::new(
                planner(models.pre.as_ref()),
                *k,
                planner(post.as_ref()),
            )),
            None => Box::new(planner(models.pre.as_ref())),
        })
    })
}

struct BoxedPolicy<'a>(Box<dyn Policy + 'a>);

impl Policy for BoxedPolicy<'_> {
    fn control(&mut self, belief: &Belief) -> usize {
        self.0.control(belief)
    }
}

fn summary_fields(name: &str, horizon: usize, s: &CostSummary) -> Vec<String> {
    vec![
        name.to_string(),
        s.episodes.to_string(),
        horizon.to_string(),
        s.mean.to_string(),
        s.std_dev.to_string(),
        s.std_error.to_string(),
        s.truncation_bound.to_string(),
        s.degenerate_steps.to_string(),
    ]
}

#[derive(Serialize)]
struct TraceLine<'a> {
    step: usize,
    decision: &'a Decision,
    #[serde(skip_serializing_if = "Option::is_none")]
    seconds: Option<f64>,
}

struct TracingPolicy<'a> {
    planners: Vec<RolloutPlanner<'a>>,
    switch_step: usize,
    step: usize,
    no_timing: bool,
    lines: Vec<String>,
    error: Option<beliefctl_core::Error>,
}

impl Policy for TracingPolicy<'_> {
    fn control(&mut self, belief: &Belief) -> usize {
        let planner =
            &self.planners[usize::from(self.step >= self.switch_step).min(self.planners.len() - 1)];
        let start = Instant::now();
        let result = planner.decide(belief);
        let seconds = (!self.no_timing).then(|| start.elapsed().as_secs_f64());
        let step = self.step;
        self.step += 1;
        match result {
            Ok(decision) => {
                let line = TraceLine {
                    step,
                    decision: &decision,
                    seconds,
                };
                self.lines
                    .push(serde_json::to_string(&line).expect("decisions serialize"));
                decision.control
            }
            Err(e) => {
                self.error.get_or_insert(e);
                0
            }
        }
    }
}

/// Plans one episode (the first evaluation seed) decision by decision and
/// writes one JSON line per decision.
fn write_trace(
    ctx: &Context<'_>,
    models: &Models,
    bundle: &BasePolicyBundle,
    config: &RolloutConfig,
    b0: &Belief,
    options: &EvalOptions,
) -> Result<(), CliError> {
    let mut planners = vec![RolloutPlanner::new(
        models.pre.as_ref(),
        bundle,
        config.clone(),
    )?];
    let mut switch_step = usize::MAX;
    if let Some((k, post)) = &models.post {
        planners.push(RolloutPlanner::new(post.as_ref(), bundle, config.clone())?);
        switch_step = *k;
    }
    let mut policy = TracingPolicy {
        planners,
        switch_step,
        step: 0,
        no_timing: ctx.cli.no_timing,
        lines: Vec::new(),
        error: None,
    };
    if options.horizon > 0 {
        run_episode(
            &models.schedule(),
            &mut policy,
            b0,
            options.horizon,
            options.estimator,
            derive_seed(options.seed, &[0]),
        )?;
    }
    if let Some(e) = policy.error {
        return Err(e.into());
    }
    let mut text = policy.lines.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    std::fs::write(ctx.out("trace.jsonl"), text)?;
    Ok(())
}

/// Grid points of the finest resolution with at most `limit` points; on two
/// states this is the evenly spaced grid with `limit` points.
fn probe_beliefs(n: usize, limit: usize) -> Result<Vec<Belief>, CliError> {
    let mut r = 1;
    while representative_count(n, r + 1) <= limit as u128 {
        r += 1;
    }
    let grid = RepresentativeSet::enumerate(n, r)?;
    Ok((0..grid.len())
        .map(|k| Belief::new(grid.point(k)).expect("grid points are distributions"))
        .collect())
}

fn oracle_bundle(ctx: &Context<'_>, model: &dyn Pomdp) -> Result<BasePolicyBundle, CliError> {
    let config = ctx.config()?;
    let threshold = config.bound.threshold.unwrap_or(config.solver.threshold);
    Ok(solve_with(
        ctx,
        model,
        FeatureSpace::identity(model.num_states()),
        config.bound.oracle_resolution,
        threshold,
    )?
    .0)
}

fn bound_experiment(ctx: &Context<'_>) -> Result<(), CliError> {
    let config = ctx.config()?;
    let mut csv = ctx.csv(&[
        "resolution",
        "representatives",
        "sweeps",
        "epsilon",
        "bound",
        "observed_error",
    ]);
    if !config.bound.resolutions.is_empty() {
        let models = load_models(ctx)?;
        let model = models.pre.as_ref();
        let oracle = oracle_bundle(ctx, model)?;
        let probes = probe_beliefs(model.num_states(), config.bound.probes)?;
        let threshold = config.bound.threshold.unwrap_or(config.solver.threshold);
        for &rho in &config.bound.resolutions {
            let features = feature_space(config, &models)?;
            let (bundle, summary) = solve_with(ctx, model, features, rho, threshold)?;
            let report = epsilon_and_bound(&bundle, |b| oracle.cost(b.probs()), &probes);
            csv.row(&[
                rho.to_string(),
                summary.representatives.to_string(),
                summary.sweeps.to_string(),
                report.epsilon.to_string(),
                report.bound.to_string(),
                report.observed_error.to_string(),
            ]);
        }
    }
    csv.write(&ctx.out("bound.csv"))
}

fn adaptation(ctx: &Context<'_>) -> Result<(), CliError> {
    let config = ctx.config()?;
    let spec = config
        .adaptation
        .as_ref()
        .ok_or_else(|| CliError::Config("adaptation needs an adaptation section".into()))?;
    if config.scenario.is_none() {
        return Err(CliError::Config(
            "adaptation needs a scenario section".into(),
        ));
    }
    let models = load_models(ctx)?;
    let post = models.post.as_ref().expect("scenario present").1.as_ref();
    let (bundle, _) = solve_with(
        ctx,
        models.pre.as_ref(),
        feature_space(config, &models)?,
        config.aggregation.resolution,
        config.solver.threshold,
    )?;
    let n = post.num_states();
    let b0 = initial_belief(config, n)?;
    let options = EvalOptions {
        episodes: spec.episodes.unwrap_or(config.evaluation.episodes),
        horizon: spec.horizon.unwrap_or(config.evaluation.horizon),
        seed: derive_seed(ctx.seed, &[3]),
        estimator: config.evaluation.estimator_for(n),
    };
    let schedule = ModelSchedule::fixed(post);
    let j0 = evaluate_policy(&schedule, || base_policy(&bundle), &b0, &options)?;
    adaptation_metric(j0.mean, spec.j1, j0.mean)?;
    let mut points = Vec::with_capacity(spec.budgets.len());
    for budget in &spec.budgets {
        let mut rc = rollout_config(ctx, &config.rollout);
        rc.lookahead = budget.lookahead;
        rc.horizon = budget.horizon;
        RolloutPlanner::new(post, &bundle, rc.clone())?;
        let start = Instant::now();
        let s = evaluate_policy(
            &schedule,
            || {
                RolloutPolicy::new(
                    RolloutPlanner::new(post, &bundle, rc.clone()).expect("validated"),
                )
            },
            &b0,
            &options,
        )?;
        let decisions = (options.episodes * options.horizon).max(1) as f64;
        points.push(AdaptationPoint {
            lookahead: budget.lookahead,
            horizon: budget.horizon,
            seconds: ctx.timing(start).map(|t| t / decisions),
            cost: s.mean,
            std_error: s.std_error,
            adaptation: adaptation_metric(j0.mean, spec.j1, s.mean)?,
        });
    }
    let record = AdaptationRecord {
        j0: j0.mean,
        j0_std_error: j0.std_error,
        j1: spec.j1,
        episodes: options.episodes,
        horizon: options.horizon,
        points,
    };
    write_json(&ctx.out("adaptation.json"), &record)
}

fn count_representatives(ctx: &Context<'_>) -> Result<(), CliError> {
    let counts = ctx
        .loaded
        .as_ref()
        .map(|l| l.config.counts.clone())
        .unwrap_or_default();
    let mut csv = ctx.csv(&["features", "resolution", "count"]);
    for &m in &counts.features {
        for &rho in &counts.resolutions {
            csv.row(&[
                m.to_string(),
                rho.to_string(),
                representative_count(m, rho).to_string(),
            ]);
        }
    }
    csv.write(&ctx.out("representatives.csv"))
}

fn oracle(ctx: &Context<'_>) -> Result<(), CliError> {
    ctx.config()?;
    let models = load_models(ctx)?;
    let oracle = oracle_bundle(ctx, models.pre.as_ref())?;
    let reps = oracle.mdp().representatives();
    let mut csv = ctx.csv(&["index", "belief", "value"]);
    for (k, v) in oracle.values().iter().enumerate() {
        let belief: Vec<String> = reps.point(k).iter().map(f64::to_string).collect();
        csv.row(&[k.to_string(), belief.join(" "), v.to_string()]);
    }
    write_json(&ctx.out("oracle_bundle.json"), &oracle)?;
    csv.write(&ctx.out("oracle.csv"))
}
