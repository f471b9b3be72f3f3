use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use idxtune::advisor::{request_recommendations, service_from_env, AdvisorService, FixtureAdvisor};
use idxtune::catalog::{load_catalog, Catalog, IndexDefinition};
use idxtune::cost_oracle::SyntheticWorkloadSpec;
use idxtune::enumerator::{greedy_select, merge_pools, CandidatePool, Configuration, GreedyOptions};
use idxtune::plan::{parse_plan, render_json, PlanTree};
use idxtune::prompt::{build_multi_query_prompt, build_single_query_prompt, PromptBundle, PromptTemplates};
use idxtune::rule_tuner::{simple_index_recommendation, TunerParams};
use idxtune::synth::{random_workload, PlanShape};
use idxtune::validator::{
    breakdown_report, validate_configurations, Breakdown, EventLog, NamedConfiguration,
    SimulatedExecutor,
};

use crate::manifest::{RunManifest, SYNTHETIC_ORACLE};
use crate::CliError;

const EVENTS_FILE: &str = "events.jsonl";

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn json<T: serde::Serialize + ?Sized>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output serializes") + "\n"
}

/// Output directory for one command, holding a copy of the effective manifest.
fn run_dir(m: &RunManifest, sub: &str) -> Result<PathBuf, CliError> {
    let dir = m.out_dir().join(sub);
    write(&dir.join("manifest.toml"), &m.to_toml())?;
    Ok(dir)
}

fn load_events(m: &RunManifest) -> Result<EventLog, CliError> {
    let path = m.out_dir().join(EVENTS_FILE);
    if path.exists() {
        Ok(EventLog::from_jsonl(&read(&path)?)?)
    } else {
        Ok(EventLog::default())
    }
}

fn save_events(m: &RunManifest, log: &EventLog) -> Result<(), CliError> {
    write(&m.out_dir().join(EVENTS_FILE), &log.to_jsonl())
}

fn catalog(m: &RunManifest) -> Result<Catalog, CliError> {
    Ok(load_catalog(&read(RunManifest::require(&m.catalog, "catalog")?)?)?)
}

fn sim(m: &RunManifest) -> Result<SyntheticWorkloadSpec, CliError> {
    Ok(SyntheticWorkloadSpec::from_json(&read(RunManifest::require(&m.sim, "sim")?)?)?)
}

struct LoadedPlan {
    path: PathBuf,
    plan: PlanTree,
}

fn plans(m: &RunManifest, catalog: &Catalog) -> Result<Vec<LoadedPlan>, CliError> {
    let files = m.plan_files()?;
    if files.is_empty() {
        return Err(CliError::usage("no plans given (use --plan or --plans-dir)"));
    }
    files
        .into_iter()
        .map(|path| {
            let plan = parse_plan(&read(&path)?, catalog)?;
            Ok(LoadedPlan { path, plan })
        })
        .collect()
}

/// SQL text stored next to a plan file as `<stem>.sql`.
fn sql_for(plan: &LoadedPlan) -> Result<String, CliError> {
    read(&plan.path.with_extension("sql"))
}

fn tuner_pool(plans: &[LoadedPlan], params: TunerParams) -> Result<CandidatePool, CliError> {
    let mut all = Vec::new();
    for p in plans {
        all.extend(simple_index_recommendation(&p.plan, params)?);
    }
    Ok(merge_pools(&[CandidatePool::from_source("tuner", all)]))
}

fn params(m: &RunManifest) -> Result<TunerParams, CliError> {
    Ok(TunerParams::new(m.alpha.unwrap_or(0.0))?)
}

pub fn recommend(m: &RunManifest) -> Result<(), CliError> {
    let catalog = catalog(m)?;
    let plans = plans(m, &catalog)?;
    let params = params(m)?;
    let dir = run_dir(m, "recommend")?;
    let mut log = load_events(m)?;
    let started = Instant::now();
    let mut all = Vec::new();
    for p in &plans {
        let indexes = simple_index_recommendation(&p.plan, params)?;
        let qid = &p.plan.query_id;
        write(&dir.join(format!("{qid}.json")), &json(&indexes))?;
        let ddl: String = indexes.iter().map(|ix| ix.to_ddl() + "\n").collect();
        write(&dir.join(format!("{qid}.sql")), &ddl)?;
        println!("{qid}: {} index(es)", indexes.len());
        all.extend(indexes);
    }
    log.record_tuner("recommend", started.elapsed());
    let pool = merge_pools(&[CandidatePool::from_source("tuner", all)]);
    let pool: Vec<&IndexDefinition> = pool.indexes().collect();
    write(&dir.join("pool.json"), &json(&pool))?;
    save_events(m, &log)
}

/// A pool file holds a JSON list of indexes or a configuration object.
fn load_pool(path: &Path) -> Result<Vec<IndexDefinition>, CliError> {
    let text = read(path)?;
    let indexes: Vec<IndexDefinition> = match serde_json::from_str(&text) {
        Ok(list) => list,
        Err(_) => Configuration::from_json(&text)?.indexes,
    };
    Ok(indexes.into_iter().map(IndexDefinition::with_default_name).collect())
}

pub fn tune(m: &RunManifest, pool_files: &[PathBuf]) -> Result<(), CliError> {
    let catalog = catalog(m)?;
    let spec = sim(m)?;
    let oracle = m.oracle.as_deref().unwrap_or(SYNTHETIC_ORACLE);
    let has_plans = !m.plans.is_empty() || m.plans_dir.is_some();
    let loaded = if has_plans { plans(m, &catalog)? } else { Vec::new() };
    let workload: Vec<String> = if has_plans {
        loaded.iter().map(|p| p.plan.query_id.clone()).collect()
    } else {
        spec.queries.iter().map(|q| q.id.clone()).collect()
    };

    let pool = if pool_files.is_empty() {
        if !has_plans {
            return Err(CliError::usage("tune needs --pool files or plans to derive a pool from"));
        }
        tuner_pool(&loaded, params(m)?)?
    } else {
        let mut pools = Vec::new();
        for path in pool_files {
            let source = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let indexes = load_pool(path)?;
            for ix in &indexes {
                let violations = catalog.validate_index(ix);
                if !violations.is_empty() {
                    let why: Vec<String> = violations.iter().map(ToString::to_string).collect();
                    return Err(CliError::input(format!("{}: index {}: {}", path.display(), ix.name, why.join("; "))));
                }
            }
            pools.push(CandidatePool::from_source(&source, indexes));
        }
        merge_pools(&pools)
    };

    let dir = run_dir(m, "tune")?;
    let mut log = load_events(m)?;
    let started = Instant::now();
    let config = greedy_select(&pool, &workload, m.k(), &spec, GreedyOptions::default())?;
    log.record_tuner("enumerate", started.elapsed());
    write(&dir.join("configuration.json"), &(config.to_json() + "\n"))?;
    save_events(m, &log)?;
    println!(
        "oracle {oracle}: {} of {} candidates selected (k = {}), estimated cost {:.3}",
        config.indexes.len(),
        pool.len(),
        config.constraint_k,
        config.estimated_workload_cost.unwrap_or(0.0)
    );
    for ix in &config.indexes {
        println!("  {}", ix.to_ddl());
    }
    Ok(())
}

fn prompts(m: &RunManifest, multi: bool) -> Result<(Catalog, Vec<PromptBundle>), CliError> {
    let catalog = catalog(m)?;
    let plans = plans(m, &catalog)?;
    let templates = PromptTemplates::default();
    let bundles = if multi {
        let queries = plans
            .iter()
            .map(|p| Ok((sql_for(p)?, p.plan.clone())))
            .collect::<Result<Vec<_>, CliError>>()?;
        vec![build_multi_query_prompt(&templates, &queries, &catalog, m.k())?]
    } else {
        plans
            .iter()
            .map(|p| Ok(build_single_query_prompt(&templates, &sql_for(p)?, &catalog, &p.plan)?))
            .collect::<Result<Vec<_>, CliError>>()?
    };
    Ok((catalog, bundles))
}

fn prompt_name(bundle: &PromptBundle) -> String {
    match bundle.k_constraint {
        Some(k) => format!("workload_k{k}"),
        None => bundle.query_ids.join("_"),
    }
}

pub fn prompt(m: &RunManifest, multi: bool) -> Result<(), CliError> {
    let (_, bundles) = prompts(m, multi)?;
    let dir = run_dir(m, "prompts")?;
    for bundle in &bundles {
        let path = dir.join(format!("{}.txt", prompt_name(bundle)));
        write(&path, &bundle.text)?;
        println!("{} ({} chars)", path.display(), bundle.char_count());
    }
    Ok(())
}

pub fn advise(m: &RunManifest, single: bool) -> Result<(), CliError> {
    let (catalog, bundles) = prompts(m, !single)?;
    let service: Box<dyn AdvisorService> = match &m.stub {
        Some(dir) => Box::new(FixtureAdvisor::new(RunManifest::require(&Some(dir.clone()), "stub")?)),
        None => service_from_env().map_err(|e| CliError::usage(e.to_string()))?,
    };
    let n = m.n.unwrap_or(1);
    let dir = run_dir(m, "advise")?;
    let mut log = load_events(m)?;
    let mut parsed = Vec::new();
    let mut failures = 0;
    let mut total = 0;
    for bundle in &bundles {
        let name = prompt_name(bundle);
        write(&dir.join(format!("{name}.prompt.txt")), &bundle.text)?;
        let started = Instant::now();
        let responses = request_recommendations(service.as_ref(), bundle, n, &catalog)?;
        log.record_advisor(&name, started.elapsed());
        for r in &responses {
            total += 1;
            write(&dir.join(format!("{name}.response_{}.json", r.invocation_id)), &json(r))?;
            match &r.error {
                None => parsed.extend(r.parsed.iter().cloned()),
                Some(e) => {
                    failures += 1;
                    eprintln!("{name} #{}: {:?}: {}", r.invocation_id, e.kind, e.message);
                }
            }
        }
    }
    let pool = merge_pools(&[CandidatePool::from_source("advisor", parsed)]);
    let pool: Vec<&IndexDefinition> = pool.indexes().collect();
    write(&dir.join("pool.json"), &json(&pool))?;
    save_events(m, &log)?;
    println!("{} response(s), {failures} failed, {} distinct index(es)", total, pool.len());
    if failures == total {
        return Err(CliError::service("every advisor invocation failed"));
    }
    Ok(())
}

pub fn validate(m: &RunManifest, config_files: &[PathBuf], cap_secs: f64) -> Result<(), CliError> {
    let spec = sim(m)?;
    let catalog = match &m.catalog {
        Some(_) => Some(catalog(m)?),
        None => None,
    };
    let mut configs = Vec::new();
    for path in config_files {
        let config = Configuration::from_json(&read(path)?)?;
        if let Some(c) = &catalog {
            config.validate(c)?;
        }
        let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        configs.push(NamedConfiguration { id, config });
    }
    let workload: Vec<String> = spec.queries.iter().map(|q| q.id.clone()).collect();
    let dir = run_dir(m, "validate")?;
    let mut log = load_events(m)?;
    let mut executor = SimulatedExecutor::new(&spec);
    let cap = Duration::from_secs_f64(cap_secs);
    let report = validate_configurations(&configs, &workload, &mut executor, cap, &mut log)?;
    write(&dir.join("report.json"), &(report.to_json() + "\n"))?;
    save_events(m, &log)?;
    for c in &report.configs {
        let status = c.error.as_deref().unwrap_or("ok");
        println!("{}: total {:.3} s (cap {:.3} s) {status}", c.id, c.total.as_secs_f64(), c.cap.as_secs_f64());
    }
    println!("winner: {}", report.winner.as_deref().unwrap_or("none"));
    Ok(())
}

pub fn report(m: &RunManifest, events: Option<&Path>) -> Result<(), CliError> {
    let path = events.map(Path::to_path_buf).unwrap_or_else(|| m.out_dir().join(EVENTS_FILE));
    let log = EventLog::from_jsonl(&read(&path)?)?;
    let summary = breakdown_report(&Breakdown::from_events(log.events()));
    let dir = run_dir(m, "report")?;
    write(&dir.join("breakdown.json"), &(summary.to_json() + "\n"))?;
    let text = summary.to_text();
    write(&dir.join("breakdown.txt"), &text)?;
    print!("{text}");
    Ok(())
}

pub fn synth(m: &RunManifest, tables: usize, queries: usize) -> Result<(), CliError> {
    if tables == 0 || queries == 0 {
        return Err(CliError::usage("--tables and --queries must be at least 1"));
    }
    let seed = m.seed.unwrap_or(0);
    let workload = random_workload(seed, tables, queries, PlanShape::default());
    let out = m.out_dir();
    write(&out.join("catalog.json"), &(workload.catalog.to_json() + "\n"))?;
    write(&out.join("sim.json"), &(workload.spec.to_json() + "\n"))?;
    for (sql, plan) in &workload.queries {
        write(&out.join("plans").join(format!("{}.json", plan.query_id)), &(render_json(plan) + "\n"))?;
        write(&out.join("plans").join(format!("{}.sql", plan.query_id)), &(sql.clone() + "\n"))?;
    }
    let generated = RunManifest {
        catalog: Some("catalog.json".into()),
        plans_dir: Some("plans".into()),
        sim: Some("sim.json".into()),
        oracle: Some(SYNTHETIC_ORACLE.into()),
        alpha: m.alpha,
        k: Some(m.k()),
        seed: Some(seed),
        out: Some("run".into()),
        ..Default::default()
    };
    write(&out.join("manifest.toml"), &generated.to_toml())?;
    println!("wrote {} tables, {} plans to {}", tables, queries, out.display());
    Ok(())
}
