//! Dispatch of a validated config to the mean-field and particle drivers.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use super::bayes;
use super::config::{ExperimentConfig, ExperimentKind, TargetSpec};
use super::record::{ExperimentRecord, FinalState, ReplicateRecord, RunRecord, Table};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::meanfield::{run_eps_scaling, run_trajectory_from, MeanFieldState, Scheme, TorusRunSpec, Trajectory};
use crate::metrics::{mmd2, observable_error, GridDensity};
use crate::particles::{run_sampler, Algorithm, ParticleEnsemble, SamplerRng, SamplerSpec};
use crate::targets::{Target, TorusPotential, TorusTarget};

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "BDSAMPLER_THREADS";

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Initial-ensemble stream of a replicate, disjoint from the sampler streams.
fn init_stream(replicate: usize) -> u64 {
    u64::MAX - replicate as u64
}

fn init_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(init_stream(replicate));
    r
}

/// Runs the experiment. Solver aborts are recorded, not returned.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentRecord> {
    config.validate()?;
    let pool = thread_pool()?;
    let start = Instant::now();
    let mut rec = ExperimentRecord {
        config: config.clone(),
        master_seed: config.seed,
        version: VERSION.to_string(),
        records: Vec::new(),
        tables: BTreeMap::new(),
        summary: BTreeMap::new(),
        notes: BTreeMap::new(),
        error: None,
        wall_clock_s: 0.0,
    };
    let outcome = pool.install(|| match config.kind {
        ExperimentKind::Decay => run_decay(config, &mut rec),
        ExperimentKind::EpsScaling => run_scaling(config, &mut rec),
        ExperimentKind::Particles => run_particles(config, &mut rec),
        ExperimentKind::Bayes => run_bayes(config, &mut rec),
    });
    match outcome {
        Ok(()) => {}
        Err(e @ Error::SolverAbort(_)) => rec.error = Some(e.to_string()),
        Err(e) => return Err(e),
    }
    rec.wall_clock_s = start.elapsed().as_secs_f64();
    Ok(rec)
}

/// Logistic-regression benchmark; the config must be of the Bayes kind.
pub fn bayes_benchmark(config: &ExperimentConfig) -> Result<ExperimentRecord> {
    if config.kind != ExperimentKind::Bayes {
        return Err(Error::Config(format!("bayes_benchmark needs a bayes config, got {:?}", config.kind)));
    }
    run(config)
}

fn torus_potential(config: &ExperimentConfig) -> TorusPotential {
    match &config.target {
        TargetSpec::Torus { potential } => potential.clone(),
        _ => unreachable!("validated torus target"),
    }
}

fn torus_spec(config: &ExperimentConfig, scheme: Scheme, epsilon: Option<f64>) -> TorusRunSpec {
    TorusRunSpec {
        potential: torus_potential(config),
        n_grid: config.n_grid,
        dt: config.dt,
        t_final: config.t_final,
        record_interval: config.record_interval,
        scheme,
        epsilon,
    }
}

fn trajectory_table(tr: &Trajectory) -> Table {
    let mut t = Table::new(&["t", "kl", "chi2", "bound_b1", "bound_b2", "feps", "mass_err", "bound_chi2"]);
    for r in &tr.rows {
        t.push(vec![
            Some(r.t),
            Some(r.kl),
            Some(r.chi2),
            Some(r.bound_b1),
            Some(r.bound_b2),
            r.feps,
            Some(r.mass_err),
            Some(r.bound_chi2),
        ]);
    }
    t
}

fn grid_state(tr: &Trajectory) -> FinalState {
    let rho = tr.final_rho();
    FinalState::Grid {
        period: rho.period(),
        values: rho.into_values(),
    }
}

fn decay_label(scheme: Scheme) -> String {
    match scheme {
        Scheme::Bd => "kl_decay".into(),
        Scheme::Bd2 => "chi2_decay".into(),
        s => format!("{}_decay", s.name()),
    }
}

fn run_decay(config: &ExperimentConfig, rec: &mut ExperimentRecord) -> Result<()> {
    let target = Arc::new(TorusTarget::new(torus_potential(config), config.n_grid)?);
    let results: Vec<(Scheme, Result<Trajectory>, f64)> = config
        .schemes
        .par_iter()
        .map(|&scheme| {
            let t0 = Instant::now();
            let spec = torus_spec(config, scheme, scheme.needs_kernel().then_some(config.epsilon));
            let out = (|| {
                let kernel = spec.epsilon.map(|e| KernelSpec::new(e, 1)).transpose()?;
                let rho0 = GridDensity::uniform(config.n_grid, target.period())?;
                let state = MeanFieldState::new(rho0, target.clone(), kernel)?;
                run_trajectory_from(state, scheme, spec.dt, spec.t_final, spec.record_interval)
            })();
            (scheme, out, t0.elapsed().as_secs_f64())
        })
        .collect();
    for (scheme, out, secs) in results {
        let (table, final_state, error, diagnostics) = match out {
            Ok(tr) => {
                rec.summary.insert("bound_m".into(), tr.bounds.m);
                rec.summary.insert("kl0".into(), tr.bounds.kl0);
                rec.summary.insert("chi2_0".into(), tr.bounds.chi0);
                let last = *tr.rows.last().expect("initial row");
                rec.summary.insert(format!("{}_kl_final", scheme.name()), last.kl);
                let diag = json!({"rows": tr.rows.len()});
                (trajectory_table(&tr), grid_state(&tr), None, diag)
            }
            Err(e @ Error::SolverAbort(_)) => (Table::default(), FinalState::None, Some(e.to_string()), json!(null)),
            Err(e) => return Err(e),
        };
        rec.records.push(RunRecord {
            label: decay_label(scheme),
            replicates: vec![ReplicateRecord {
                replicate: 0,
                stream: 0,
                table,
                final_state,
                diagnostics,
                error,
            }],
            wall_clock_s: secs,
        });
    }
    Ok(())
}

/// File-name label of a bandwidth, e.g. `eps_0.05`.
pub fn eps_label(eps: f64) -> String {
    format!("eps_{eps}")
}

fn run_scaling(config: &ExperimentConfig, rec: &mut ExperimentRecord) -> Result<()> {
    let multi = config.schemes.len() > 1;
    for &scheme in &config.schemes {
        let t0 = Instant::now();
        let spec = torus_spec(config, scheme, None);
        let sc = run_eps_scaling(&spec, &config.epsilons)?;
        let prefix = if multi { format!("{}_", scheme.name()) } else { String::new() };
        let secs = t0.elapsed().as_secs_f64();
        let mut table = Table::new(&["eps", "kl_final", "w2_final", "feps_final", "plateau_rel_change"]);
        for r in &sc.runs {
            table.push_values(&[r.epsilon, r.kl_final, r.w2_final, r.feps_final, r.plateau_rel_change]);
            rec.records.push(RunRecord {
                label: format!("{prefix}{}", eps_label(r.epsilon)),
                replicates: vec![ReplicateRecord {
                    replicate: 0,
                    stream: 0,
                    table: trajectory_table(&r.trajectory),
                    final_state: grid_state(&r.trajectory),
                    diagnostics: json!({"epsilon": r.epsilon}),
                    error: None,
                }],
                wall_clock_s: secs / sc.runs.len() as f64,
            });
        }
        rec.tables.insert(format!("{prefix}eps_scaling"), table);
        rec.summary.insert(format!("{prefix}kl_slope"), sc.kl_slope);
        rec.summary.insert(format!("{prefix}kl_fit_r2"), sc.kl_fit_r2);
        rec.summary.insert(format!("{prefix}w2_slope"), sc.w2_slope);
        rec.summary.insert(format!("{prefix}feps_c"), sc.feps_c);
        rec.summary.insert(format!("{prefix}feps_r2"), sc.feps_r2);
    }
    rec.notes.insert(
        "slope".into(),
        "least-squares slope of log kl_final against log eps over the ladder".into(),
    );
    Ok(())
}

fn sampler_spec(config: &ExperimentConfig, algorithm: Algorithm) -> SamplerSpec {
    SamplerSpec {
        algorithm,
        dt: config.dt,
        t_final: config.t_final,
        epsilon: config.epsilon,
        record_interval: config.record_interval,
        log_normalizer: config.log_normalizer,
    }
}

type Observer<'a> = dyn Fn(&ParticleEnsemble) -> Result<Vec<f64>> + Sync + 'a;

/// Every (algorithm, replicate) pair from the replicate's shared initial ensemble.
fn run_jobs<T: Target>(
    config: &ExperimentConfig,
    target: &T,
    initial: &(dyn Fn(usize) -> Result<ParticleEnsemble> + Sync),
    columns: &[&str],
    observe: &Observer<'_>,
) -> Result<Vec<RunRecord>> {
    let jobs: Vec<(Algorithm, usize)> = config
        .algorithms
        .iter()
        .flat_map(|&a| (0..config.replicates).map(move |r| (a, r)))
        .collect();
    let results: Vec<(ReplicateRecord, f64)> = jobs
        .par_iter()
        .map(|&(alg, rep)| -> Result<(ReplicateRecord, f64)> {
            let t0 = Instant::now();
            let mut ens = initial(rep)?;
            let spec = sampler_spec(config, alg);
            let mut rng = SamplerRng::new(config.seed, rep as u64);
            let mut table = Table::new(columns);
            let out = run_sampler(&spec, target, &mut ens, &mut rng, |t, e| {
                let mut row = vec![t];
                row.extend(observe(e)?);
                table.push_values(&row);
                Ok(())
            });
            let (diagnostics, error) = match out {
                Ok(d) => (serde_json::to_value(d).expect("diagnostics serialize"), None),
                Err(e @ Error::SolverAbort(_)) => (json!(null), Some(e.to_string())),
                Err(e) => return Err(e),
            };
            let rec = ReplicateRecord {
                replicate: rep,
                stream: rep as u64,
                table,
                final_state: FinalState::Particles {
                    dim: ens.dim(),
                    positions: ens.positions().to_vec(),
                },
                diagnostics,
                error,
            };
            Ok((rec, t0.elapsed().as_secs_f64()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut it = results.into_iter();
    Ok(config
        .algorithms
        .iter()
        .map(|alg| {
            let reps: Vec<(ReplicateRecord, f64)> = it.by_ref().take(config.replicates).collect();
            RunRecord {
                label: alg.name().into(),
                wall_clock_s: reps.iter().map(|r| r.1).sum(),
                replicates: reps.into_iter().map(|r| r.0).collect(),
            }
        })
        .collect())
}

fn final_means(rec: &mut ExperimentRecord, metrics: &[&str]) {
    for r in &rec.records {
        let agg = r.aggregate();
        for m in metrics {
            if let Some(v) = agg.last(&format!("{m}_mean")) {
                rec.summary.insert(format!("{}_{m}_final_mean", r.label), v);
            }
            if let Some(v) = agg.last(&format!("{m}_sd")) {
                rec.summary.insert(format!("{}_{m}_final_sd", r.label), v);
            }
        }
    }
}

fn run_particles(config: &ExperimentConfig, rec: &mut ExperimentRecord) -> Result<()> {
    let TargetSpec::GaussianMixture {
        target,
        initial,
        observable,
        mmd_epsilon,
    } = &config.target
    else {
        unreachable!("validated mixture target")
    };
    let pi = target.build()?;
    let init = initial.build()?;
    let mmd_kernel = KernelSpec::new(*mmd_epsilon, pi.dim())?;
    let n = config.n_particles;
    let make = |rep: usize| init.sample(n, &mut init_rng(config.seed, rep));
    let observe = |e: &ParticleEnsemble| -> Result<Vec<f64>> {
        let obs = observable_error(e, &pi, observable)?;
        let m2 = mmd2(e.into(), (&pi).into(), &mmd_kernel)?;
        Ok(vec![obs, m2, m2.sqrt()])
    };
    rec.records = run_jobs(config, &pi, &make, &["t", "obs_error", "mmd2", "mmd"], &observe)?;
    final_means(rec, &["obs_error", "mmd2", "mmd"]);
    Ok(())
}

fn run_bayes(config: &ExperimentConfig, rec: &mut ExperimentRecord) -> Result<()> {
    let TargetSpec::Logistic {
        dataset,
        train_fraction,
        prior_rate,
    } = &config.target
    else {
        unreachable!("validated logistic target")
    };
    let data = bayes::load_source(dataset)?;
    let (train, test) = data.split(*train_fraction, config.seed)?;
    let post = bayes::posterior(&train, *prior_rate)?;
    let d = train.n_features();
    let n = config.n_particles;
    let make = |rep: usize| bayes::prior_ensemble(n, d, *prior_rate, &mut init_rng(config.seed, rep));
    let observe = |e: &ParticleEnsemble| -> Result<Vec<f64>> {
        let (acc, ll) = bayes::scores(e, &test);
        Ok(vec![acc, ll])
    };
    rec.records = run_jobs(config, &post, &make, &["t", "accuracy", "log_lik"], &observe)?;
    final_means(rec, &["accuracy", "log_lik"]);
    let mut table = Table::new(&["accuracy_mean", "accuracy_sd", "log_lik_mean", "log_lik_sd"]);
    table.label_column = Some("algorithm".into());
    for r in &rec.records {
        let agg = r.aggregate();
        table.row_labels.push(r.label.clone());
        table.push(vec![
            agg.last("accuracy_mean"),
            agg.last("accuracy_sd"),
            agg.last("log_lik_mean"),
            agg.last("log_lik_sd"),
        ]);
    }
    rec.tables.insert("bayes_summary".into(), table);
    rec.notes.insert("prediction_rule".into(), bayes::PREDICTION_RULE.into());
    rec.notes.insert("train_size".into(), train.len().to_string());
    rec.notes.insert("test_size".into(), test.len().to_string());
    Ok(())
}
