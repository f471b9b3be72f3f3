//! Budget-accounted validation of competing configurations.
//!
//! Every distinct index is built once for the whole session. Configurations
//! are evaluated in the order given. Each query runs five times in isolation
//! and its median counts. After each configuration the per-run timeout drops
//! to the best workload total seen so far. All elapsed time goes through a
//! single append-only [`EventLog`], which is what the breakdown is computed from.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::catalog::{IndexDefinition, IndexKey};
use crate::cost_oracle::SyntheticWorkloadSpec;
use crate::enumerator::Configuration;
use crate::error::{Error, Result};
use crate::serde_duration::{self, from_millis_f64};

pub const RUNS_PER_QUERY: usize = 5;
pub const DEFAULT_CAP: Duration = Duration::from_secs(300);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOutcome {
    pub elapsed: Duration,
    pub timed_out: bool,
}

/// A database (or simulation of one) that can build indexes and time queries.
pub trait Executor {
    /// Idempotent per index name.
    fn create_index(&mut self, index: &IndexDefinition) -> Result<Duration>;
    fn drop_index(&mut self, name: &str) -> Result<Duration>;
    /// Restricts subsequent runs to exactly `indexes` (all previously created).
    fn enable_only(&mut self, indexes: &[IndexDefinition]) -> Result<()>;
    fn run_query(&mut self, query_id: &str, timeout: Duration) -> Result<RunOutcome>;
}

/// Executes against the true-time channel of a synthetic workload.
///
/// Building an index costs one pass over its table. Materialized indexes that
/// are not enabled are ignored by the simulated optimizer.
#[derive(Debug, Clone)]
pub struct SimulatedExecutor<'a> {
    spec: &'a SyntheticWorkloadSpec,
    materialized: BTreeMap<String, IndexDefinition>,
    active: Vec<IndexDefinition>,
}

impl<'a> SimulatedExecutor<'a> {
    pub fn new(spec: &'a SyntheticWorkloadSpec) -> Self {
        SimulatedExecutor {
            spec,
            materialized: BTreeMap::new(),
            active: Vec::new(),
        }
    }

    pub fn materialized(&self) -> impl Iterator<Item = &IndexDefinition> {
        self.materialized.values()
    }
}

impl Executor for SimulatedExecutor<'_> {
    fn create_index(&mut self, index: &IndexDefinition) -> Result<Duration> {
        if self.materialized.contains_key(&index.name) {
            return Ok(Duration::ZERO);
        }
        let rows = self.spec.table_rows(&index.table).unwrap_or(0) as f64;
        self.materialized.insert(index.name.clone(), index.clone());
        Ok(from_millis_f64(rows * self.spec.time_per_unit_ms))
    }

    fn drop_index(&mut self, name: &str) -> Result<Duration> {
        self.materialized.remove(name);
        self.active.retain(|ix| ix.name != name);
        Ok(Duration::ZERO)
    }

    fn enable_only(&mut self, indexes: &[IndexDefinition]) -> Result<()> {
        if let Some(missing) = indexes
            .iter()
            .find(|ix| !self.materialized.contains_key(&ix.name))
        {
            return Err(Error::Executor(format!(
                "index `{}` has not been created",
                missing.name
            )));
        }
        self.active = indexes.to_vec();
        Ok(())
    }

    fn run_query(&mut self, query_id: &str, timeout: Duration) -> Result<RunOutcome> {
        let elapsed = from_millis_f64(self.spec.true_time(&self.active, query_id)?);
        Ok(if elapsed >= timeout {
            RunOutcome {
                elapsed: timeout,
                timed_out: true,
            }
        } else {
            RunOutcome {
                elapsed,
                timed_out: false,
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Create,
    Drop,
    Run,
    Tune,
}

/// Subject prefix marking advisor tuning time (everything else tuned is tuner time).
pub const ADVISOR_SUBJECT_PREFIX: &str = "advisor";
pub const TUNER_SUBJECT_PREFIX: &str = "tuner";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub ts: DateTime<Utc>,
    pub kind: EventKind,
    pub subject: String,
    #[serde(with = "serde_duration::millis", rename = "elapsed_ms")]
    pub elapsed: Duration,
}

/// Append-only session log. Timestamps advance by each event's elapsed time
/// from `start`, so a simulated session is fully deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    start: DateTime<Utc>,
    clock: Duration,
    events: Vec<Event>,
}

impl Default for EventLog {
    fn default() -> Self {
        EventLog::starting_at(DateTime::<Utc>::UNIX_EPOCH)
    }
}

impl EventLog {
    pub fn starting_at(start: DateTime<Utc>) -> Self {
        EventLog {
            start,
            clock: Duration::ZERO,
            events: Vec::new(),
        }
    }

    pub fn record(&mut self, kind: EventKind, subject: impl Into<String>, elapsed: Duration) {
        let ts = self.start
            + chrono::Duration::from_std(self.clock).unwrap_or(chrono::Duration::MAX);
        self.clock += elapsed;
        self.events.push(Event {
            ts,
            kind,
            subject: subject.into(),
            elapsed,
        });
    }

    pub fn record_tuner(&mut self, label: &str, elapsed: Duration) {
        self.record(EventKind::Tune, format!("{TUNER_SUBJECT_PREFIX}:{label}"), elapsed);
    }

    pub fn record_advisor(&mut self, label: &str, elapsed: Duration) {
        self.record(EventKind::Tune, format!("{ADVISOR_SUBJECT_PREFIX}:{label}"), elapsed);
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn total(&self) -> Duration {
        self.events.iter().map(|e| e.elapsed).sum()
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn to_jsonl(&self) -> String {
        self.events
            .iter()
            .map(|e| serde_json::to_string(e).expect("event serializes") + "\n")
            .collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let events = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str::<Event>(l).map_err(|e| Error::parse("event log", e)))
            .collect::<Result<Vec<_>>>()?;
        let start = events
            .first()
            .map(|e| e.ts)
            .unwrap_or(DateTime::<Utc>::UNIX_EPOCH);
        let clock = events.iter().map(|e| e.elapsed).sum();
        Ok(EventLog {
            start,
            clock,
            events,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub query_id: String,
    #[serde(with = "duration_vec_ms", rename = "runs_ms")]
    pub runs: Vec<Duration>,
    #[serde(with = "serde_duration::millis", rename = "median_ms")]
    pub median: Duration,
    pub capped: bool,
}

mod duration_vec_ms {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::serde_duration::{as_millis_f64, from_millis_f64};

    pub fn serialize<S: Serializer>(v: &[Duration], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|d| as_millis_f64(*d)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Duration>, D::Error> {
        Ok(Vec::<f64>::deserialize(d)?
            .into_iter()
            .map(from_millis_f64)
            .collect())
    }
}

/// Third order statistic of five runs.
pub fn median_of(runs: &[Duration]) -> Duration {
    let mut sorted = runs.to_vec();
    sorted.sort();
    sorted[sorted.len() / 2]
}

/// A run that failed partway; the runs completed before the failure are kept.
#[derive(Debug)]
pub struct MeasureError {
    pub query_id: String,
    pub partial: Vec<Duration>,
    pub source: Error,
}

impl std::fmt::Display for MeasureError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "query `{}` failed after {} runs: {}",
            self.query_id,
            self.partial.len(),
            self.source
        )
    }
}

impl std::error::Error for MeasureError {}

/// Five sequential runs truncated at `cap`; a capped run records the cap itself.
pub fn measure_query<E: Executor + ?Sized>(
    executor: &mut E,
    query_id: &str,
    cap: Duration,
    log: &mut EventLog,
) -> std::result::Result<Measurement, MeasureError> {
    if cap.is_zero() {
        return Err(MeasureError {
            query_id: query_id.to_string(),
            partial: Vec::new(),
            source: Error::InvalidParameter("timeout cap must be positive".into()),
        });
    }
    let mut runs = Vec::with_capacity(RUNS_PER_QUERY);
    let mut capped = false;
    for _ in 0..RUNS_PER_QUERY {
        match executor.run_query(query_id, cap) {
            Ok(outcome) => {
                let hit = outcome.timed_out || outcome.elapsed >= cap;
                let elapsed = if hit { cap } else { outcome.elapsed };
                capped |= hit;
                log.record(EventKind::Run, query_id, elapsed);
                runs.push(elapsed);
            }
            Err(source) => {
                return Err(MeasureError {
                    query_id: query_id.to_string(),
                    partial: runs,
                    source,
                })
            }
        }
    }
    Ok(Measurement {
        query_id: query_id.to_string(),
        median: median_of(&runs),
        runs,
        capped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedConfiguration {
    pub id: String,
    pub config: Configuration,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleStep {
    Create(IndexDefinition),
    Evaluate {
        config: usize,
        enable: Vec<IndexDefinition>,
    },
}

/// Build/evaluate order. Each structurally distinct index is created once,
/// right before the first configuration that needs it, under the first name
/// it was seen with.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationSchedule {
    pub steps: Vec<ScheduleStep>,
}

impl ValidationSchedule {
    pub fn creations(&self) -> impl Iterator<Item = &IndexDefinition> {
        self.steps.iter().filter_map(|s| match s {
            ScheduleStep::Create(ix) => Some(ix),
            ScheduleStep::Evaluate { .. } => None,
        })
    }
}

pub fn plan_validation(configs: &[NamedConfiguration]) -> ValidationSchedule {
    let mut canonical: BTreeMap<IndexKey, IndexDefinition> = BTreeMap::new();
    let mut steps = Vec::new();
    for (pos, named) in configs.iter().enumerate() {
        let mut enable: Vec<IndexDefinition> = Vec::new();
        for index in &named.config.indexes {
            let key = index.structural_key();
            let def = canonical.entry(key).or_insert_with(|| {
                steps.push(ScheduleStep::Create(index.clone()));
                index.clone()
            });
            if !enable.iter().any(|e| e.name == def.name) {
                enable.push(def.clone());
            }
        }
        steps.push(ScheduleStep::Evaluate { config: pos, enable });
    }
    ValidationSchedule { steps }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigResult {
    pub id: String,
    #[serde(with = "serde_duration::millis", rename = "cap_ms")]
    pub cap: Duration,
    #[serde(with = "serde_duration::millis", rename = "total_ms")]
    pub total: Duration,
    pub measurements: Vec<Measurement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Time per accounting category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Breakdown {
    #[serde(with = "serde_duration::millis", rename = "tuner_ms")]
    pub tuner: Duration,
    #[serde(with = "serde_duration::millis", rename = "advisor_ms")]
    pub advisor: Duration,
    #[serde(with = "serde_duration::millis", rename = "index_creation_ms")]
    pub index_creation: Duration,
    #[serde(with = "serde_duration::millis", rename = "query_execution_ms")]
    pub query_execution: Duration,
}

impl Breakdown {
    /// Drops are index maintenance and count toward index creation.
    pub fn from_events(events: &[Event]) -> Self {
        let mut b = Breakdown::default();
        for e in events {
            let bucket = match e.kind {
                EventKind::Create | EventKind::Drop => &mut b.index_creation,
                EventKind::Run => &mut b.query_execution,
                EventKind::Tune if e.subject.starts_with(ADVISOR_SUBJECT_PREFIX) => &mut b.advisor,
                EventKind::Tune => &mut b.tuner,
            };
            *bucket += e.elapsed;
        }
        b
    }

    pub fn total(&self) -> Duration {
        self.tuner + self.advisor + self.index_creation + self.query_execution
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub configs: Vec<ConfigResult>,
    pub breakdown: Breakdown,
    pub distinct_indexes: usize,
    pub winner: Option<String>,
}

impl ValidationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(document: &str) -> Result<Self> {
        serde_json::from_str(document).map_err(|e| Error::parse("validation report", e))
    }

    pub fn config(&self, id: &str) -> Option<&ConfigResult> {
        self.configs.iter().find(|c| c.id == id)
    }
}

/// Evaluates `configs` in order over `workload` and reports the winner.
///
/// Failures (index build, enabling, a query run) mark that configuration and
/// the session moves on; failed configurations never win or tighten the cap.
pub fn validate_configurations<E: Executor + ?Sized>(
    configs: &[NamedConfiguration],
    workload: &[String],
    executor: &mut E,
    initial_cap: Duration,
    log: &mut EventLog,
) -> Result<ValidationReport> {
    if initial_cap.is_zero() {
        return Err(Error::InvalidParameter("initial cap must be positive".into()));
    }
    let schedule = plan_validation(configs);
    let mut failed_builds: BTreeMap<String, String> = BTreeMap::new();
    let mut results = Vec::with_capacity(configs.len());
    let mut cap = initial_cap;
    let mut distinct = 0;

    for step in &schedule.steps {
        match step {
            ScheduleStep::Create(index) => {
                distinct += 1;
                match executor.create_index(index) {
                    Ok(elapsed) => log.record(EventKind::Create, index.name.as_str(), elapsed),
                    Err(e) => {
                        failed_builds.insert(index.name.clone(), e.to_string());
                    }
                }
            }
            ScheduleStep::Evaluate { config, enable } => {
                let mut result = ConfigResult {
                    id: configs[*config].id.clone(),
                    cap,
                    total: Duration::ZERO,
                    measurements: Vec::new(),
                    error: None,
                };
                result.error = evaluate(
                    executor,
                    enable,
                    workload,
                    cap,
                    log,
                    &failed_builds,
                    &mut result.measurements,
                );
                result.total = result.measurements.iter().map(|m| m.median).sum();
                if result.error.is_none() {
                    // a zero cap would make every later run time out instantly
                    cap = cap.min(result.total).max(Duration::from_nanos(1));
                }
                results.push(result);
            }
        }
    }

    let winner = results
        .iter()
        .filter(|r| r.error.is_none())
        .fold(None::<&ConfigResult>, |best, r| match best {
            Some(b) if b.total <= r.total => Some(b),
            _ => Some(r),
        })
        .map(|r| r.id.clone());

    Ok(ValidationReport {
        configs: results,
        breakdown: Breakdown::from_events(log.events()),
        distinct_indexes: distinct,
        winner,
    })
}

fn evaluate<E: Executor + ?Sized>(
    executor: &mut E,
    enable: &[IndexDefinition],
    workload: &[String],
    cap: Duration,
    log: &mut EventLog,
    failed_builds: &BTreeMap<String, String>,
    measurements: &mut Vec<Measurement>,
) -> Option<String> {
    if let Some((name, why)) = enable
        .iter()
        .find_map(|ix| failed_builds.get_key_value(&ix.name))
    {
        return Some(format!("index `{name}` could not be built: {why}"));
    }
    if let Err(e) = executor.enable_only(enable) {
        return Some(e.to_string());
    }
    for query in workload {
        match measure_query(executor, query, cap, log) {
            Ok(m) => measurements.push(m),
            Err(e) => return Some(e.to_string()),
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryLine {
    pub category: String,
    #[serde(with = "serde_duration::millis", rename = "elapsed_ms")]
    pub elapsed: Duration,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownSummary {
    pub categories: Vec<CategoryLine>,
    #[serde(with = "serde_duration::millis", rename = "total_ms")]
    pub total: Duration,
}

impl BreakdownSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    pub fn to_text(&self) -> String {
        let width = self
            .categories
            .iter()
            .map(|c| c.category.len())
            .max()
            .unwrap_or(0)
            .max("Total".len());
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>14}  {:>7}", "Category", "Time (s)", "Share");
        for c in &self.categories {
            let _ = writeln!(
                out,
                "{:<width$}  {:>14.3}  {:>6.2}%",
                c.category,
                c.elapsed.as_secs_f64(),
                c.percent
            );
        }
        let _ = writeln!(
            out,
            "{:<width$}  {:>14.3}  {:>6.2}%",
            "Total",
            self.total.as_secs_f64(),
            if self.total.is_zero() { 0.0 } else { 100.0 }
        );
        out
    }
}

/// Four-way split of session time, with shares of the total.
pub fn breakdown_report(breakdown: &Breakdown) -> BreakdownSummary {
    let total = breakdown.total();
    let share = |d: Duration| {
        if total.is_zero() {
            0.0
        } else {
            100.0 * d.as_nanos() as f64 / total.as_nanos() as f64
        }
    };
    let categories = [
        ("Tuner", breakdown.tuner),
        ("Advisor", breakdown.advisor),
        ("Index Creation", breakdown.index_creation),
        ("Query Execution", breakdown.query_execution),
    ]
    .into_iter()
    .map(|(name, elapsed)| CategoryLine {
        category: name.to_string(),
        elapsed,
        percent: share(elapsed),
    })
    .collect();
    BreakdownSummary { categories, total }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Replays fixed durations per query, cycling through them.
    struct Scripted {
        times: BTreeMap<String, Vec<Duration>>,
        calls: BTreeMap<String, usize>,
        fail_on: Option<(String, usize)>,
    }

    impl Scripted {
        fn new(times: &[(&str, &[u64])]) -> Self {
            Scripted {
                times: times
                    .iter()
                    .map(|(q, ms)| {
                        (q.to_string(), ms.iter().map(|m| Duration::from_millis(*m)).collect())
                    })
                    .collect(),
                calls: BTreeMap::new(),
                fail_on: None,
            }
        }
    }

    impl Executor for Scripted {
        fn create_index(&mut self, _: &IndexDefinition) -> Result<Duration> {
            Ok(Duration::from_millis(1))
        }
        fn drop_index(&mut self, _: &str) -> Result<Duration> {
            Ok(Duration::ZERO)
        }
        fn enable_only(&mut self, _: &[IndexDefinition]) -> Result<()> {
            Ok(())
        }
        fn run_query(&mut self, q: &str, timeout: Duration) -> Result<RunOutcome> {
            let n = self.calls.entry(q.to_string()).or_default();
            *n += 1;
            if self.fail_on.as_ref() == Some(&(q.to_string(), *n)) {
                return Err(Error::Executor("lost connection".into()));
            }
            let script = &self.times[q];
            let t = script[(*n - 1) % script.len()];
            Ok(RunOutcome {
                elapsed: t.min(timeout),
                timed_out: t >= timeout,
            })
        }
    }

    fn secs(v: &[u64]) -> Vec<Duration> {
        v.iter().map(|s| Duration::from_secs(*s)).collect()
    }

    #[test]
    fn median_of_five() {
        let mut ex = Scripted::new(&[("q", &[5000, 1000, 4000, 2000, 3000])]);
        let mut log = EventLog::default();
        let m = measure_query(&mut ex, "q", DEFAULT_CAP, &mut log).unwrap();
        assert_eq!(m.median, Duration::from_secs(3));
        assert!(!m.capped);
        assert_eq!(log.count(EventKind::Run), 5);
    }

    #[test]
    fn capped_runs_record_the_cap() {
        let mut ex = Scripted::new(&[("q", &[1000, 1000, 1000, 1000, 900_000])]);
        let mut log = EventLog::default();
        let m = measure_query(&mut ex, "q", DEFAULT_CAP, &mut log).unwrap();
        assert_eq!(m.median, Duration::from_secs(1));
        assert!(m.capped);
        assert_eq!(m.runs[4], DEFAULT_CAP);
        assert_eq!(m.runs, [secs(&[1, 1, 1, 1]), vec![DEFAULT_CAP]].concat());
    }

    #[test]
    fn failure_keeps_partial_runs() {
        let mut ex = Scripted::new(&[("q", &[10])]);
        ex.fail_on = Some(("q".into(), 3));
        let mut log = EventLog::default();
        let err = measure_query(&mut ex, "q", DEFAULT_CAP, &mut log).unwrap_err();
        assert_eq!(err.partial.len(), 2);
        assert!(measure_query(&mut ex, "q", Duration::ZERO, &mut log).is_err());
    }

    fn named(id: &str, indexes: Vec<IndexDefinition>) -> NamedConfiguration {
        NamedConfiguration {
            id: id.into(),
            config: Configuration::new(10, indexes).unwrap(),
        }
    }

    #[test]
    fn shared_indexes_are_built_once() {
        let i1 = IndexDefinition::new("T", ["a"], Vec::<&str>::new());
        let i2 = IndexDefinition::new("T", ["b"], Vec::<&str>::new());
        let mut renamed = i1.clone();
        renamed.name = "same_thing".into();
        let schedule = plan_validation(&[named("a", vec![i1.clone()]), named("b", vec![renamed, i2])]);
        let created: Vec<_> = schedule.creations().map(|i| i.name.clone()).collect();
        assert_eq!(created.len(), 2);
        match &schedule.steps[3] {
            ScheduleStep::Evaluate { config, enable } => {
                assert_eq!(*config, 1);
                assert_eq!(enable[0].name, i1.name);
            }
            other => panic!("unexpected step {other:?}"),
        }
    }

    #[test]
    fn adaptive_cap_and_winner() {
        // one query per config, constant times 100 s, 40 s, 70 s
        struct PerConfig(Vec<u64>, usize);
        impl Executor for PerConfig {
            fn create_index(&mut self, _: &IndexDefinition) -> Result<Duration> {
                Ok(Duration::ZERO)
            }
            fn drop_index(&mut self, _: &str) -> Result<Duration> {
                Ok(Duration::ZERO)
            }
            fn enable_only(&mut self, _: &[IndexDefinition]) -> Result<()> {
                self.1 += 1;
                Ok(())
            }
            fn run_query(&mut self, _: &str, timeout: Duration) -> Result<RunOutcome> {
                let t = Duration::from_secs(self.0[self.1 - 1]);
                Ok(RunOutcome {
                    elapsed: t.min(timeout),
                    timed_out: t >= timeout,
                })
            }
        }
        let configs = [named("c1", vec![]), named("c2", vec![]), named("c3", vec![])];
        let mut ex = PerConfig(vec![100, 40, 70], 0);
        let mut log = EventLog::default();
        let report =
            validate_configurations(&configs, &["q".into()], &mut ex, DEFAULT_CAP, &mut log)
                .unwrap();
        let caps: Vec<_> = report.configs.iter().map(|c| c.cap).collect();
        assert_eq!(caps, secs(&[300, 100, 40]));
        let totals: Vec<_> = report.configs.iter().map(|c| c.total).collect();
        assert_eq!(totals, secs(&[100, 40, 40]));
        assert!(report.configs[2].measurements[0].capped);
        assert_eq!(report.winner.as_deref(), Some("c2"));
    }

    #[test]
    fn breakdown_percentages() {
        let b = Breakdown {
            tuner: Duration::from_secs(2),
            advisor: Duration::from_secs(10),
            index_creation: Duration::from_secs(30),
            query_execution: Duration::from_secs(58),
        };
        let s = breakdown_report(&b);
        assert_eq!(s.total, Duration::from_secs(100));
        let pct: Vec<_> = s.categories.iter().map(|c| c.percent).collect();
        assert_eq!(pct, vec![2.0, 10.0, 30.0, 58.0]);
        let zero = breakdown_report(&Breakdown::default());
        assert!(zero.categories.iter().all(|c| c.percent == 0.0 && c.elapsed.is_zero()));
        assert!(s.to_text().contains("Query Execution"));
    }

    #[test]
    fn event_log_round_trips_through_jsonl() {
        let mut log = EventLog::default();
        log.record_tuner("rule", Duration::from_micros(1500));
        log.record_advisor("1", Duration::from_secs(12));
        log.record(EventKind::Create, "ix", Duration::from_nanos(123_456_789));
        log.record(EventKind::Run, "q1", Duration::from_millis(7));
        let text = log.to_jsonl();
        assert!(text.lines().next().unwrap().contains(r#""kind":"tune""#));
        let back = EventLog::from_jsonl(&text).unwrap();
        assert_eq!(back.events(), log.events());
        let b = Breakdown::from_events(back.events());
        assert_eq!(b.total(), log.total());
        assert_eq!(b.advisor, Duration::from_secs(12));
    }
}
