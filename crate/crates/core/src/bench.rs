//! Synthetic datasets and the benchmark harness.
//!
//! * `two_hop`: random `:knows` graph plus `:interest` edges, queried with
//!   the two-hop COUNT query.
//! * `selective_join`: products with type/feature/producer/offer edges where
//!   one product type is rare, queried with a four-pattern star join.
//! * `group_distinct`: per-person distinct friend and interest counts.

use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dictionary::Term;
use crate::exec::{run_planned, EngineConfig, EngineError, QueryOutput};
use crate::plan::EngineMode;
use crate::planner::plan_query;
use crate::query::{parse_query, RDF};
use crate::storage::TripleStore;

pub const TWO_HOP_QUERY: &str = "SELECT (COUNT(*) AS ?count) {
  ?person1 :knows ?person2 .
  ?person2 :knows ?person3 .
  ?person3 :interest ?tag .
  FILTER(?person1 != ?person3)
}";

pub const SELECTIVE_JOIN_QUERY: &str = "SELECT * {
  ?product rdf:type :ProductType22 .
  ?product :productFeature ?feature .
  ?product :producer ?producer .
  ?offer :product ?product .
}";

pub const GROUP_DISTINCT_QUERY: &str = "SELECT ?person (COUNT(DISTINCT ?friend) AS ?friends) (COUNT(DISTINCT ?interest) AS ?interests) {
  ?person :knows ?friend .
  ?person :interest ?interest .
} GROUP BY ?person";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    TwoHop,
    SelectiveJoin,
    GroupDistinct,
}

impl Suite {
    pub const ALL: [Suite; 3] = [Suite::TwoHop, Suite::SelectiveJoin, Suite::GroupDistinct];

    pub fn name(self) -> &'static str {
        match self {
            Suite::TwoHop => "two_hop",
            Suite::SelectiveJoin => "selective_join",
            Suite::GroupDistinct => "group_distinct",
        }
    }

    pub fn query(self) -> &'static str {
        match self {
            Suite::TwoHop => TWO_HOP_QUERY,
            Suite::SelectiveJoin => SELECTIVE_JOIN_QUERY,
            Suite::GroupDistinct => GROUP_DISTINCT_QUERY,
        }
    }

    /// Dataset at the given scale (1.0 is the default size).
    pub fn generate(self, seed: u64, scale: f64) -> TripleStore {
        let n = |base: f64| ((base * scale).round() as usize).max(2);
        match self {
            Suite::TwoHop => two_hop(seed, TwoHopParams {
                persons: n(5000.0),
                ..TwoHopParams::default()
            }),
            Suite::SelectiveJoin => selective_join(seed, SelectiveJoinParams {
                products: n(10_000.0),
                ..SelectiveJoinParams::default()
            }),
            Suite::GroupDistinct => two_hop(seed, TwoHopParams {
                persons: n(5000.0),
                degree: 10,
                interests: 4,
                tags: 200,
            }),
        }
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown suite '{s}' (expected two_hop, selective_join or group_distinct)"))
    }
}

fn ex(local: &str) -> Term {
    Term::iri(format!("http://example.org/{local}"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TwoHopParams {
    pub persons: usize,
    /// Out-degree of every person.
    pub degree: usize,
    /// Interest tags per person.
    pub interests: usize,
    pub tags: usize,
}

impl Default for TwoHopParams {
    fn default() -> Self {
        TwoHopParams {
            persons: 5000,
            degree: 20,
            interests: 5,
            tags: 500,
        }
    }
}

pub fn two_hop(seed: u64, p: TwoHopParams) -> TripleStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let persons: Vec<Term> = (0..p.persons).map(|i| ex(&format!("person{i}"))).collect();
    let tags: Vec<Term> = (0..p.tags.max(1)).map(|i| ex(&format!("tag{i}"))).collect();
    let (knows, interest) = (ex("knows"), ex("interest"));
    let mut st = TripleStore::new();
    let degree = p.degree.min(p.persons.saturating_sub(1));
    for (i, person) in persons.iter().enumerate() {
        for j in sample(&mut rng, p.persons - 1, degree) {
            // skip self by shifting indices at or above i
            let target = if j >= i { j + 1 } else { j };
            st.insert_terms(person, &knows, &persons[target]).unwrap();
        }
        for j in sample(&mut rng, tags.len(), p.interests.min(tags.len())) {
            st.insert_terms(person, &interest, &tags[j]).unwrap();
        }
    }
    st.freeze();
    st
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SelectiveJoinParams {
    pub products: usize,
    /// Product types; the queried type gets about `1 / types` of the products.
    pub types: usize,
    pub features_per_product: usize,
    pub offers_per_product: usize,
    pub feature_pool: usize,
    pub producers: usize,
}

impl Default for SelectiveJoinParams {
    fn default() -> Self {
        SelectiveJoinParams {
            products: 10_000,
            types: 100,
            features_per_product: 20,
            offers_per_product: 20,
            feature_pool: 5000,
            producers: 200,
        }
    }
}

pub fn selective_join(seed: u64, p: SelectiveJoinParams) -> TripleStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rdf_type = Term::iri(format!("{RDF}type"));
    let (feature, producer, product) = (ex("productFeature"), ex("producer"), ex("product"));
    let mut st = TripleStore::new();
    let mut offer = 0usize;
    for i in 0..p.products {
        let prod = ex(&format!("product{i}"));
        let ty = rng.gen_range(0..p.types.max(1));
        st.insert_terms(&prod, &rdf_type, &ex(&format!("ProductType{ty}"))).unwrap();
        for f in sample(&mut rng, p.feature_pool, p.features_per_product.min(p.feature_pool)) {
            st.insert_terms(&prod, &feature, &ex(&format!("feature{f}"))).unwrap();
        }
        let pr = rng.gen_range(0..p.producers.max(1));
        st.insert_terms(&prod, &producer, &ex(&format!("producer{pr}"))).unwrap();
        for _ in 0..p.offers_per_product {
            st.insert_terms(&ex(&format!("offer{offer}")), &product, &prod).unwrap();
            offer += 1;
        }
    }
    st.freeze();
    st
}

/// Timing and counters of one engine configuration.
#[derive(Clone, Debug, Serialize)]
pub struct RunStats {
    pub name: String,
    pub median_ms: f64,
    pub timings_ms: Vec<f64>,
    pub result_rows: usize,
    /// Rows fetched from storage in one run.
    pub rows_read: u64,
    /// Rows produced by each scan, from a profiled run.
    pub scans: Vec<(String, u64)>,
    /// Profile of that run.
    pub profile: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub suite: Suite,
    pub seed: u64,
    pub scale: f64,
    pub triples: usize,
    pub runs: Vec<RunStats>,
    /// Legacy median time divided by batch (adaptive) median time.
    pub speedup: f64,
    /// Rows read with fixed-size batches divided by rows read with adaptive sizing.
    pub overfetch_fixed_vs_adaptive: f64,
    /// Rows read with adaptive sizing divided by rows read by the legacy engine.
    pub overfetch_adaptive_vs_legacy: f64,
}

impl BenchReport {
    pub fn run(&self, name: &str) -> Option<&RunStats> {
        self.runs.iter().find(|r| r.name == name)
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "suite {} (seed {}, scale {}, {} triples)\n",
            self.suite.name(),
            self.seed,
            self.scale,
            self.triples
        );
        for r in &self.runs {
            s.push_str(&format!(
                "  {:<14} median {:>9.2} ms  rows {:>8}  rows read {:>9}\n",
                r.name, r.median_ms, r.result_rows, r.rows_read
            ));
            for (label, n) in &r.scans {
                s.push_str(&format!("      {label}: {n}\n"));
            }
        }
        s.push_str(&format!("  speedup (legacy / batch): {:.2}x\n", self.speedup));
        s.push_str(&format!(
            "  rows read: batch-adaptive / legacy = {:.2}, batch-fixed / batch-adaptive = {:.2}\n",
            self.overfetch_adaptive_vs_legacy, self.overfetch_fixed_vs_adaptive
        ));
        s
    }
}

/// The three measured configurations: legacy, batch with adaptive sizing, batch with fixed-size batches.
pub fn configurations() -> Vec<(&'static str, EngineConfig)> {
    let legacy = EngineConfig::new(EngineMode::Legacy);
    let adaptive = EngineConfig::new(EngineMode::Auto);
    let mut fixed = EngineConfig::new(EngineMode::Auto);
    fixed.exec.adaptive = false;
    vec![("legacy", legacy), ("batch-adaptive", adaptive), ("batch-fixed", fixed)]
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => 0.0,
        n if n % 2 == 1 => v[n / 2],
        n => (v[n / 2 - 1] + v[n / 2]) / 2.0,
    }
}

/// Runs `query` under one configuration: warm-ups, timed runs, then one profiled run.
pub fn measure(
    store: &Arc<TripleStore>,
    query: &str,
    name: &str,
    config: &EngineConfig,
    warmups: usize,
    runs: usize,
) -> Result<RunStats, EngineError> {
    let q = parse_query(query)?;
    let planned = plan_query(&q, store, &config.planner())?;
    let mut last: Option<QueryOutput> = None;
    for _ in 0..warmups {
        last = Some(run_planned(store, &planned, config)?);
    }
    let mut timings = Vec::new();
    for _ in 0..runs {
        let out = run_planned(store, &planned, config)?;
        timings.push(out.elapsed.as_secs_f64() * 1e3);
        last = Some(out);
    }
    let mut profiled = config.clone();
    profiled.profile = true;
    let prof = run_planned(store, &planned, &profiled)?;
    let root = prof.profile.clone().expect("profiling was requested");
    let mut scans = Vec::new();
    root.walk(&mut |n| {
        if n.label.starts_with("Scan(") {
            scans.push((n.label.clone(), n.stats.rows_out));
        }
    });
    let out = last.unwrap_or(prof.clone());
    Ok(RunStats {
        name: name.to_string(),
        median_ms: median(&timings),
        timings_ms: timings,
        result_rows: out.rows.len(),
        rows_read: prof.rows_read,
        scans,
        profile: root.render(),
    })
}

pub fn run_bench(suite: Suite, seed: u64, scale: f64, warmups: usize, runs: usize) -> Result<BenchReport, EngineError> {
    let store = Arc::new(suite.generate(seed, scale));
    let mut stats = Vec::new();
    for (name, cfg) in configurations() {
        stats.push(measure(&store, suite.query(), name, &cfg, warmups, runs)?);
    }
    let by = |n: &str| stats.iter().find(|r| r.name == n).unwrap();
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { f64::INFINITY };
    Ok(BenchReport {
        suite,
        seed,
        scale,
        triples: store.len(),
        speedup: ratio(by("legacy").median_ms, by("batch-adaptive").median_ms),
        overfetch_fixed_vs_adaptive: ratio(by("batch-fixed").rows_read as f64, by("batch-adaptive").rows_read as f64),
        overfetch_adaptive_vs_legacy: ratio(by("batch-adaptive").rows_read as f64, by("legacy").rows_read as f64),
        runs: stats,
    })
}

/// Wall time helper for callers that time something else.
pub fn millis(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}
