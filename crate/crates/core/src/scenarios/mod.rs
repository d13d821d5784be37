//! Runnable scenarios and the registry the CLI dispatches through.
//!
//! Every scenario takes a parameter table (unknown keys are rejected), a run
//! seed, and returns a JSON results object plus optional CSV tables. The
//! resolved parameters, including defaults, are echoed back so a summary is
//! self-describing.

pub mod barrier;
pub mod checks;
pub mod ghz_bohm;
pub mod interferometer;
pub mod many_worlds;
pub mod stern_gerlach;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::grw::{Display, GrwParams, PointerModel};
use crate::rng::substream;

/// A CSV table emitted by a scenario, written as `<scenario>_<name>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub csv: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutput {
    /// Parameters after defaults were filled in.
    pub params: Value,
    pub results: Value,
    pub tables: Vec<Table>,
}

type Runner = fn(&Map<String, Value>, u64) -> Result<ScenarioOutput>;

pub struct ScenarioInfo {
    pub name: &'static str,
    /// Figure or equation of the source material the scenario reproduces.
    pub anchor: &'static str,
    pub summary: &'static str,
    defaults: fn() -> Value,
    resolver: fn(&Map<String, Value>) -> Result<Value>,
    runner: Runner,
}

impl ScenarioInfo {
    /// Parameter names with their default values.
    pub fn defaults(&self) -> Value {
        (self.defaults)()
    }

    /// Validates a parameter table and fills in defaults, without running.
    pub fn resolve(&self, params: &Map<String, Value>) -> Result<Value> {
        (self.resolver)(params)
    }

    pub fn run(&self, params: &Map<String, Value>, seed: u64) -> Result<ScenarioOutput> {
        (self.runner)(params, seed)
    }
}

macro_rules! scenario {
    ($name:literal, $anchor:literal, $summary:literal, $params:ty, $run:path) => {
        ScenarioInfo {
            name: $name,
            anchor: $anchor,
            summary: $summary,
            defaults: || serde_json::to_value(<$params>::default()).expect("params serialize"),
            resolver: |raw| {
                let p: $params = parse_params(raw)?;
                Ok(serde_json::to_value(&p).expect("params serialize"))
            },
            runner: |raw, seed| {
                let p: $params = parse_params(raw)?;
                let (results, tables) = $run(&p, seed)?;
                Ok(ScenarioOutput {
                    params: serde_json::to_value(&p).expect("params serialize"),
                    results,
                    tables,
                })
            },
        }
    };
}

static REGISTRY: &[ScenarioInfo] = &[
    scenario!("ghz_parity", "Eqs 5, 7", "GHZ parity expectations", NoParams, run_ghz_parity),
    scenario!("hv_search", "Eq 8", "exhaustive local hidden-value search", NoParams, run_hv_search),
    scenario!("uncertainty", "Eqs 1-2", "minimum-uncertainty packet and Robertson bound", UncertaintyParams, run_uncertainty),
    scenario!("bohm_consistency", "Eqs 9, 13-14", "full versus conditional guidance velocity", ConsistencyParams, run_consistency),
    scenario!("quantum_force", "Eq 15", "quantum-potential acceleration of a free packet", ForceParams, run_force),
    scenario!("grw_tail", "Eqs 11-12", "GRW tail amplitude and disturbance factors", NoParams, run_grw_tail),
    scenario!("stern_gerlach_bohm", "Fig 5", "Bohmian Stern-Gerlach spot and label", SgBohmParams, run_sg_bohm),
    scenario!("stern_gerlach_grw", "Figs 3-4", "GRW hits on a pointer or screen record", SgGrwParams, run_sg_grw),
    scenario!("pointer_vs_screen", "Fig 3", "pointer and screen under one shared hit schedule", PvsParams, run_pointer_vs_screen),
    scenario!("ghz_bohm", "Fig 6", "Bohmian GHZ outcomes, contextuality and remote flip", GhzBohmParams, run_ghz_bohm),
    scenario!("many_worlds_bs", "Fig 7", "Born ensemble of Bohmian worlds through a beam splitter", ManyWorldsParams, run_many_worlds),
    scenario!("measure_invariance", "Fig 8", "measure of a branch under local transforms of others", NoParams, run_invariance),
    scenario!("equal_measure_refinement", "Eqs 17-18", "world counting after equal-measure refinement", RefinementParams, run_refinement),
    scenario!("sleeping_beauty", "Eq 19", "Sleeping Beauty credence from measures", NoParams, run_sleeping_beauty),
    scenario!("ifm", "Resolution of quantum paradoxes: IFM", "interaction-free measurement", IfmParams, run_ifm),
    scenario!("alien_betting", "Measure of existence: betting", "dark-port odds set after the branch weights", BettingParams, run_betting),
    scenario!("nested_mzi_trace", "Fig 9", "weak trace in a nested interferometer", TraceParams, run_trace),
];

pub fn registry() -> &'static [ScenarioInfo] {
    REGISTRY
}

pub fn find(name: &str) -> Result<&'static ScenarioInfo> {
    REGISTRY
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::UnknownScenario(name.into()))
}

/// Runs a registered scenario by name.
pub fn run_scenario(name: &str, params: &Map<String, Value>, seed: u64) -> Result<ScenarioOutput> {
    find(name)?.run(params, seed)
}

fn parse_params<P: DeserializeOwned>(raw: &Map<String, Value>) -> Result<P> {
    serde_json::from_value(Value::Object(raw.clone())).map_err(|e| Error::Config(e.to_string()))
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("results serialize")
}

type Run = Result<(Value, Vec<Table>)>;

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoParams {}

fn run_ghz_parity(_: &NoParams, _: u64) -> Run {
    Ok((to_json(&checks::ghz_parity()?), vec![]))
}

fn run_hv_search(_: &NoParams, _: u64) -> Run {
    let r = checks::hv_search_report();
    let relaxations: Map<String, Value> = r
        .relaxations
        .iter()
        .map(|(k, v)| (format!("without_{k}"), json!(v)))
        .collect();
    Ok((
        json!({
            "assignments": r.assignments,
            "satisfying": r.satisfying,
            "relaxations": relaxations,
        }),
        vec![],
    ))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct UncertaintyParams {
    n_states: usize,
}

impl Default for UncertaintyParams {
    fn default() -> Self {
        Self { n_states: 1000 }
    }
}

fn run_uncertainty(p: &UncertaintyParams, seed: u64) -> Run {
    Ok((to_json(&checks::uncertainty_report(p.n_states, seed)?), vec![]))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConsistencyParams {
    n_states: usize,
}

impl Default for ConsistencyParams {
    fn default() -> Self {
        Self { n_states: 100 }
    }
}

fn run_consistency(p: &ConsistencyParams, seed: u64) -> Run {
    Ok((to_json(&checks::bohm_consistency(p.n_states, seed)?), vec![]))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ForceParams {
    width: f64,
}

impl Default for ForceParams {
    fn default() -> Self {
        Self { width: 1.0 }
    }
}

fn run_force(p: &ForceParams, _: u64) -> Run {
    let samples = checks::quantum_force(p.width)?;
    let mut csv = String::from("x,numeric,analytic\n");
    for s in &samples {
        csv.push_str(&format!("{},{},{}\n", s.x, s.numeric, s.analytic));
    }
    Ok((
        json!({ "samples": samples }),
        vec![Table {
            name: "force".into(),
            csv,
        }],
    ))
}

fn run_grw_tail(_: &NoParams, _: u64) -> Run {
    Ok((to_json(&checks::grw_tail()?), vec![]))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SgBohmParams {
    magnet_sign: i8,
    initial_fraction: f64,
    /// Born ensemble size for the frequency check; 0 skips it.
    ensemble: usize,
}

impl Default for SgBohmParams {
    fn default() -> Self {
        Self {
            magnet_sign: 1,
            initial_fraction: 0.25,
            ensemble: 0,
        }
    }
}

fn run_sg_bohm(p: &SgBohmParams, seed: u64) -> Run {
    use stern_gerlach::*;
    let cfg = SternGerlachConfig::pointer(p.magnet_sign);
    let out = stern_gerlach_bohm(&cfg, p.initial_fraction)?;
    let mut results = to_json(&out);
    if p.ensemble > 0 {
        let e = stern_gerlach_ensemble(p.magnet_sign, p.ensemble, seed)?;
        results["ensemble"] = to_json(&e);
    }
    let mut csv = String::from("t,z\n");
    for (t, z) in &out.trajectory {
        csv.push_str(&format!("{t},{z}\n"));
    }
    Ok((results, vec![Table { name: "trajectory".into(), csv }]))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SgGrwParams {
    display: Display,
    magnet_sign: i8,
    n_particles: usize,
    /// Branch displacement in units of d.
    separation: f64,
    tau: f64,
    d: f64,
    n_hits: usize,
}

impl Default for SgGrwParams {
    fn default() -> Self {
        Self {
            display: Display::Pointer,
            magnet_sign: 1,
            n_particles: 1000,
            separation: 100.0,
            tau: 1.0,
            d: 1.0,
            n_hits: 10,
        }
    }
}

fn collapse_csv(run: &crate::grw::CollapseRun) -> Result<String> {
    let mut buf = Vec::new();
    run.write_csv(&mut buf)?;
    Ok(String::from_utf8(buf).expect("csv is utf-8"))
}

fn run_sg_grw(p: &SgGrwParams, seed: u64) -> Run {
    use stern_gerlach::*;
    let params = GrwParams::new(p.tau, p.d)?;
    let cfg = SternGerlachConfig {
        magnet_sign: p.magnet_sign,
        display: p.display,
        pointer_model: PointerModel {
            n_particles: p.n_particles,
            separation: p.separation * p.d,
            internal_width: 0.0,
        },
    };
    let mut rng = substream(seed, "stern_gerlach_grw", 0);
    let r = stern_gerlach_grw(&cfg, &params, p.n_hits, &mut rng)?;
    let mut results = to_json(&r);
    results["collapsed"] = json!(r.collapsed());
    let csv = collapse_csv(&r.run)?;
    Ok((results, vec![Table { name: "hits".into(), csv }]))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PvsParams {
    tau: f64,
    d: f64,
    n_hits: usize,
}

impl Default for PvsParams {
    fn default() -> Self {
        Self {
            tau: 1.0,
            d: 1.0,
            n_hits: 10,
        }
    }
}

fn run_pointer_vs_screen(p: &PvsParams, seed: u64) -> Run {
    let params = GrwParams::new(p.tau, p.d)?;
    let r = stern_gerlach::pointer_vs_screen(&params, p.n_hits, seed)?;
    let mut results = to_json(&r);
    results["pointer"]["collapsed"] = json!(r.pointer.collapsed());
    results["screen"]["collapsed"] = json!(r.screen.collapsed());
    Ok((
        results,
        vec![
            Table {
                name: "pointer_hits".into(),
                csv: collapse_csv(&r.pointer.run)?,
            },
            Table {
                name: "screen_hits".into(),
                csv: collapse_csv(&r.screen.run)?,
            },
        ],
    ))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GhzBohmParams {
    orientations: [i8; 3],
    order: Vec<usize>,
    initial_positions: [f64; 3],
    /// Also run all 8 orientations × both (B, C) orders.
    sweep: bool,
}

impl Default for GhzBohmParams {
    fn default() -> Self {
        let d = ghz_bohm::GhzBohmConfig::default();
        Self {
            orientations: d.orientations,
            order: d.order,
            initial_positions: d.initial_positions,
            sweep: false,
        }
    }
}

fn run_ghz_bohm(p: &GhzBohmParams, _: u64) -> Run {
    use ghz_bohm::*;
    let device = GhzDevice::new()?;
    let r = device.run(&GhzBohmConfig {
        orientations: p.orientations,
        order: p.order.clone(),
        initial_positions: p.initial_positions,
    })?;
    let mut results = to_json(&r);
    results["satisfies_ghz"] = json!(r.satisfies_ghz());
    results["device"] = to_json(&device.summary());
    if p.sweep {
        let sweep = ghz_bohm_sweep(&device, p.initial_positions)?;
        results["sweep"] = json!(sweep
            .iter()
            .map(|s| json!({
                "orientations": s.orientations,
                "order": s.order,
                "values": s.outcomes.map(|o| o.value),
                "product": s.product,
                "satisfies_ghz": s.satisfies_ghz(),
            }))
            .collect::<Vec<_>>());
    }
    let mut csv = String::from("site,t,x\n");
    for (site, path) in &r.paths {
        for (t, x) in path {
            csv.push_str(&format!("{site},{t},{x}\n"));
        }
    }
    Ok((results, vec![Table { name: "paths".into(), csv }]))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ManyWorldsParams {
    n: usize,
    transmit_prob: f64,
    n_trajectories: usize,
}

impl Default for ManyWorldsParams {
    fn default() -> Self {
        let d = many_worlds::ManyWorldsConfig::default();
        Self {
            n: d.n,
            transmit_prob: d.transmit_prob,
            n_trajectories: d.n_trajectories,
        }
    }
}

fn run_many_worlds(p: &ManyWorldsParams, seed: u64) -> Run {
    let cfg = many_worlds::ManyWorldsConfig {
        n: p.n,
        transmit_prob: p.transmit_prob,
        n_trajectories: p.n_trajectories,
        seed,
        ..Default::default()
    };
    let r = many_worlds::many_worlds_bs(&cfg)?;
    Ok((
        to_json(&r),
        vec![Table {
            name: "trajectories".into(),
            csv: r.trajectories.to_csv(),
        }],
    ))
}

fn run_invariance(_: &NoParams, _: u64) -> Run {
    let r = checks::measure_invariance()?;
    let mu: Map<String, Value> = r.mu_a.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    let split: Map<String, Value> = r
        .split_measures
        .iter()
        .map(|(k, v)| (k.clone(), json!(v)))
        .collect();
    Ok((json!({ "mu_a": mu, "split_measures": split }), vec![]))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RefinementParams {
    p: f64,
    eps: f64,
}

impl Default for RefinementParams {
    fn default() -> Self {
        Self { p: 0.7, eps: 1e-3 }
    }
}

fn run_refinement(p: &RefinementParams, _: u64) -> Run {
    Ok((to_json(&checks::refinement_report(p.p, p.eps)?), vec![]))
}

fn run_sleeping_beauty(_: &NoParams, _: u64) -> Run {
    Ok((to_json(&checks::sleeping_beauty_report()?), vec![]))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct IfmParams {
    reflectivity: f64,
    phase: f64,
    object_present: bool,
    /// Photons to sample; 0 reports probabilities only.
    shots: usize,
}

impl Default for IfmParams {
    fn default() -> Self {
        Self {
            reflectivity: 0.5,
            phase: 0.0,
            object_present: true,
            shots: 0,
        }
    }
}

fn run_ifm(p: &IfmParams, seed: u64) -> Run {
    use interferometer::*;
    let cfg = MziConfig {
        reflectivity: p.reflectivity,
        phase: p.phase,
        object_present: p.object_present,
        n_nested: 0,
    };
    let exact = ifm(&cfg)?;
    let grid = ifm_grid(&cfg)?;
    let mut results = json!({
        "bright": exact.bright,
        "dark": exact.dark,
        "absorbed": exact.absorbed,
        "mistuned": exact.dark_leak > 1e-12,
        "dark_leak": exact.dark_leak,
        "grid_oracle": grid,
    });
    if p.shots > 0 {
        let counts = ifm_shots(&cfg, p.shots, &mut substream(seed, "ifm", 0))?;
        results["counts"] = json!({
            "bright": counts[0],
            "dark": counts[1],
            "absorbed": counts[2],
        });
    }
    Ok((results, vec![]))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BettingParams {
    reflectivity: f64,
}

impl Default for BettingParams {
    fn default() -> Self {
        Self { reflectivity: 0.5 }
    }
}

fn run_betting(p: &BettingParams, _: u64) -> Run {
    Ok((to_json(&interferometer::alien_betting(p.reflectivity)?), vec![]))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TraceParams {
    epsilon: f64,
    post_selection: interferometer::PostSelection,
    outer_reflectivity: f64,
    inner_reflectivity: f64,
}

impl Default for TraceParams {
    fn default() -> Self {
        Self {
            epsilon: 1e-2,
            post_selection: interferometer::PostSelection::D2,
            outer_reflectivity: 0.5,
            inner_reflectivity: 0.5,
        }
    }
}

fn run_trace(p: &TraceParams, _: u64) -> Run {
    use interferometer::*;
    let cfg = NestedConfig {
        outer_reflectivity: p.outer_reflectivity,
        inner_reflectivity: p.inner_reflectivity,
    };
    let r = nested_mzi_trace(p.epsilon, p.post_selection, &cfg)?;
    let mut csv = String::from("arm,trace,trace_over_eps2\n");
    let eps2 = p.epsilon * p.epsilon;
    let mut traces = Map::new();
    for (arm, t) in &r.traces {
        let scaled = if eps2 > 0.0 { t / eps2 } else { 0.0 };
        csv.push_str(&format!("{},{t},{scaled}\n", arm.name()));
        traces.insert(arm.name().into(), json!({ "trace": t, "trace_over_eps2": scaled }));
    }
    Ok((
        json!({
            "epsilon": r.epsilon,
            "post_selection": r.post_selection,
            "probability": r.probability,
            "traces": traces,
        }),
        vec![Table { name: "traces".into(), csv }],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_complete_and_unique() {
        assert!(registry().len() >= 10);
        let mut names: Vec<_> = registry().iter().map(|s| s.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), registry().len());
        assert_eq!(find("ghz_bohm").unwrap().anchor, "Fig 6");
        assert_eq!(find("many_worlds_bs").unwrap().anchor, "Fig 7");
    }

    #[test]
    fn defaults_round_trip_through_the_parser() {
        for s in registry() {
            let d = s.defaults();
            let map = d.as_object().expect("params are a table");
            assert_eq!(s.resolve(map).unwrap(), d, "{}", s.name);
            assert_eq!(s.resolve(&Map::new()).unwrap(), d, "{}", s.name);
        }
    }

    #[test]
    fn unknown_parameter_is_a_config_error() {
        let mut raw = Map::new();
        raw.insert("bogus".into(), json!(1));
        let err = run_scenario("ghz_parity", &raw, 0).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(matches!(run_scenario("nope", &Map::new(), 0), Err(Error::UnknownScenario(_))));
    }

    #[test]
    fn cheap_scenarios_run_with_defaults() {
        let out = run_scenario("ghz_parity", &Map::new(), 1).unwrap();
        assert_eq!(out.results["xxx"], json!(-1.0));
        let sb = run_scenario("sleeping_beauty", &Map::new(), 1).unwrap();
        assert_eq!(sb.results["credence_heads"], json!("1/3"));
    }
}
