//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use entangle_cli::document::{Overrides, ResolvedVariant};
use entangle_cli::presets;
use entangle_core::engine::{continuous_generation_step, GenerationPolicy};
use entangle_core::metrics::analytics::{expected_links_over_interval, expected_pair_links_per_step};
use entangle_core::netstate::NetworkState;
use entangle_core::schemes::{NeighborDistribution, SchemeConfig, UsageRecord};
use entangle_core::topology::{make_bottleneck, make_bottleneck_traffic};
use entangle_core::{
    run_experiment, run_trial_observed, Edge, NodeId, Request, Route, SimConfig, SwapOrder,
    Topology, TrialObserver,
};
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Steady state is the mean of the average latency over this many final
/// request indices.
const STEADY_TAIL: usize = 20;
const C1_MIN_REDUCTION: f64 = 0.25;
const C2_MIN_GAP: f64 = 1.0;
const C3_MAX_LATENCY: f64 = 0.5;
const C4_MAX_RELATIVE_GAP: f64 = 0.15;
const C5_REPS: usize = 1_000_000;
const C5_SIGMAS: f64 = 3.0;
const C6_TRIALS: usize = 10_000;
const C6_MAX_RELATIVE_ERROR: f64 = 0.10;
const C7_CASES: u32 = 64;
const NORMALIZATION_TOLERANCE: f64 = 1e-9;

struct Verdict {
    pass: bool,
    detail: String,
}

fn preset(name: &str) -> BTreeMap<String, ResolvedVariant> {
    presets::get(name)
        .expect("preset exists")
        .resolve(Path::new("."), Overrides::default())
        .expect("preset resolves")
        .into_iter()
        .map(|v| (v.label.clone(), v))
        .collect()
}

fn steady(v: &ResolvedVariant) -> f64 {
    let exp = run_experiment(&v.config, &v.topology, &v.traffic).expect("experiment runs");
    assert!(exp.failed.is_empty(), "{}: trials hit the step cap", v.label);
    exp.series.tail_mean(STEADY_TAIL)
}

fn adaptive_improvement() -> Verdict {
    let p = preset("asnet10_alpha_sweep");
    let (off, on) = (steady(&p["alpha_0.0"]), steady(&p["alpha_0.1"]));
    let reduction = 1.0 - on / off;
    Verdict {
        pass: reduction >= C1_MIN_REDUCTION,
        detail: format!(
            "alpha=0 {off:.2}, alpha=0.1 {on:.2}, reduction {:.1}% (need >= {:.0}%)",
            100.0 * reduction,
            100.0 * C1_MIN_REDUCTION
        ),
    }
}

fn scheme_ordering() -> Verdict {
    let p = preset("asnet10_scheme_compare");
    let a = steady(&p["adaptive_alpha_0.1"]);
    let pl = steady(&p["power_law"]);
    let u = steady(&p["uniform"]);
    Verdict {
        pass: pl - a >= C2_MIN_GAP && u - pl >= C2_MIN_GAP,
        detail: format!("adaptive {a:.2} < power-law {pl:.2} < uniform {u:.2} (gaps >= {C2_MIN_GAP})"),
    }
}

fn zero_latency_regime() -> Verdict {
    let p = preset("bottleneck_alloc");
    let l = steady(&p["unequal_tau1000_pe0.1_alpha0.05"]);
    Verdict {
        pass: l <= C3_MAX_LATENCY,
        detail: format!("unequal 5/30, tau=1000, p_e=0.1, alpha=0.05: {l:.3} (need <= {C3_MAX_LATENCY})"),
    }
}

fn allocation_effect() -> Verdict {
    let p = preset("bottleneck_alloc");
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha in ["0.0", "0.05"] {
        let u = steady(&p[&format!("unequal_tau1000_pe0.01_alpha{alpha}")]);
        let e = steady(&p[&format!("equal30_tau1000_pe0.01_alpha{alpha}")]);
        pass &= u < e;
        parts.push(format!("tau=1000 a={alpha}: unequal {u:.2} < equal {e:.2}"));
    }
    for alpha in ["0.0", "0.05"] {
        let u = steady(&p[&format!("unequal_tau100_pe0.01_alpha{alpha}")]);
        let e = steady(&p[&format!("equal30_tau100_pe0.01_alpha{alpha}")]);
        let gap = (u - e).abs() / e;
        pass &= gap <= C4_MAX_RELATIVE_GAP;
        parts.push(format!("tau=100 a={alpha}: {u:.2} vs {e:.2} ({:.1}%)", 100.0 * gap));
    }
    Verdict {
        pass,
        detail: parts.join("; "),
    }
}

fn per_step_oracle() -> Verdict {
    let p_gen = 0.1;
    let t = Topology::new(5, [(0, 1), (0, 2), (0, 3), (1, 2), (3, 4)], vec![10; 5]).unwrap();
    let policy = GenerationPolicy::new(&t, &SchemeConfig::adaptive(0.0)).unwrap();
    let busy = vec![false; 5];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut state = NetworkState::new(&t, None);
    let mut counts: BTreeMap<Edge, u64> = t.edges().iter().map(|e| (*e, 0)).collect();
    for _ in 0..C5_REPS {
        continuous_generation_step(&mut state, &policy, &busy, p_gen, &mut rng);
        let ids: Vec<_> = state.links().map(|l| (l.id, l.span())).collect();
        for (id, span) in ids {
            *counts.get_mut(&span).unwrap() += 1;
            state.release(id).unwrap();
        }
    }
    let mut pass = true;
    let mut worst: f64 = 0.0;
    for (e, hits) in &counts {
        let p = expected_pair_links_per_step(&t, e.lo, e.hi, p_gen).unwrap();
        let n = C5_REPS as f64;
        let sigma = (n * p * (1.0 - p)).sqrt();
        let z = (*hits as f64 - n * p).abs() / sigma;
        worst = worst.max(z);
        pass &= z <= C5_SIGMAS;
    }
    Verdict {
        pass,
        detail: format!("{} edges, {C5_REPS} reps, worst deviation {worst:.2} sigma", counts.len()),
    }
}

fn interval_oracle() -> Verdict {
    let (p_gen, memories, interval) = (0.01, 5, 100u64);
    let star = Topology::new(5, [(0, 1), (0, 2), (0, 3), (0, 4)], vec![memories; 5]).unwrap();
    let expected =
        expected_links_over_interval(&star, NodeId(0), NodeId(1), p_gen, memories as f64, interval as f64)
            .unwrap();
    let policy = GenerationPolicy::new(&star, &SchemeConfig::adaptive(0.0)).unwrap();
    let busy = vec![false; 5];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut total = 0usize;
    for _ in 0..C6_TRIALS {
        let mut state = NetworkState::new(&star, None);
        for t in 0..interval {
            state.expire(t);
            continuous_generation_step(&mut state, &policy, &busy, p_gen, &mut rng);
        }
        let span = Edge::new(NodeId(0), NodeId(1));
        total += state.links().filter(|l| l.span() == span).count();
    }
    let observed = total as f64 / C6_TRIALS as f64;
    let err = (observed - expected).abs() / expected;
    Verdict {
        pass: err <= C6_MAX_RELATIVE_ERROR,
        detail: format!(
            "star center-leaf after {interval} steps: simulated {observed:.3}, formula {expected:.3}, error {:.1}% (need <= {:.0}%)",
            100.0 * err,
            100.0 * C6_MAX_RELATIVE_ERROR
        ),
    }
}

/// Checks simulation invariants at every hook.
#[derive(Default)]
struct Invariants {
    active: usize,
    violations: Vec<String>,
}

impl TrialObserver for Invariants {
    fn on_route(&mut self, t: u64, r: &Request, _route: &Route, _s: &NetworkState<'_>) {
        self.active += 1;
        if self.active > 1 {
            self.violations.push(format!("t={t}: request {} started while another is active", r.index));
        }
    }

    fn on_complete(&mut self, _t: u64, _r: &Request, _p: &GenerationPolicy) {
        self.active -= 1;
    }

    fn on_step(&mut self, t: u64, _a: Option<&Request>, s: &NetworkState<'_>) {
        if let Err(e) = s.check_consistency() {
            self.violations.push(format!("t={t}: {e}"));
        }
        let topo = s.topology();
        let capacity: usize = topo.memory_counts().iter().sum();
        let free: usize = topo.nodes().map(|n| s.free_slots(n)).sum();
        if free + 2 * s.live_links() != capacity {
            self.violations.push(format!("t={t}: slots not conserved"));
        }
        if let Some(tau) = s.lifetime() {
            if s.links().any(|l| t - l.created_at >= tau) {
                self.violations.push(format!("t={t}: expired link still live"));
            }
        }
    }
}

fn sim_strategy() -> impl Strategy<Value = SimConfig> {
    (
        any::<u64>(),
        0.05f64..1.0,
        prop_oneof![Just(None), (5u64..300).prop_map(Some)],
        0usize..3,
        0.0f64..=1.0,
        prop::bool::ANY,
        10u64..120,
        0.5f64..=1.0,
    )
        .prop_map(|(seed, p_gen, lifetime, kind, alpha, balanced, interval, p_swap)| SimConfig {
            seed,
            p_gen,
            p_swap,
            memory_lifetime: lifetime,
            scheme: match kind {
                0 => SchemeConfig::adaptive(alpha),
                1 => SchemeConfig::uniform_global(),
                _ => SchemeConfig::power_law_global(2.0),
            },
            swap_order: if balanced { SwapOrder::Balanced } else { SwapOrder::LeftToRight },
            queue_interval: interval,
            queue_length: 8,
            trials: 1,
            ..Default::default()
        })
}

fn property_suites() -> Verdict {
    let mut failures = Vec::new();
    let mut run = |name: &str, result: Result<(), String>| {
        if let Err(e) = result {
            failures.push(format!("{name}: {e}"));
        }
    };
    let cfg = || PropConfig {
        cases: C7_CASES,
        failure_persistence: None,
        ..PropConfig::default()
    };
    let star = |d: usize| Topology::new(d + 1, (1..=d).map(|k| (0, k)), vec![2; d + 1]).unwrap();

    run(
        "normalization",
        TestRunner::new(PropConfig { cases: 8, ..cfg() })
            .run(&(2usize..8, any::<u64>(), 0.0f64..=1.0), |(d, seed, alpha)| {
                let t = star(d);
                let mut dist = NeighborDistribution::init_uniform(NodeId(0), &t).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for _ in 0..10_000 {
                    let (used, created) = random_split(d, &mut rng);
                    let usage = UsageRecord::new(&t, NodeId(0), used, created).unwrap();
                    dist.adapt_in_place(&usage, alpha);
                    let sum: f64 = dist.probs().iter().sum();
                    prop_assert!((sum - 1.0).abs() <= NORMALIZATION_TOLERANCE, "sum {}", sum);
                    prop_assert!(dist.probs().iter().all(|&p| p >= 0.0));
                }
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    run(
        "S-stability and fixed point",
        TestRunner::new(cfg())
            .run(&(2usize..8, any::<u64>(), 0.0f64..=1.0), |(d, seed, alpha)| {
                let t = star(d);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut dist = NeighborDistribution::init_uniform(NodeId(0), &t).unwrap();
                for _ in 0..rng.random_range(0..20) {
                    let (u, c) = random_split(d, &mut rng);
                    dist.adapt_in_place(&UsageRecord::new(&t, NodeId(0), u, c).unwrap(), alpha);
                }
                let (used, created) = random_split(d, &mut rng);
                let usage = UsageRecord::new(&t, NodeId(0), used.clone(), created.clone()).unwrap();
                let next = dist.adapt(&usage, alpha);
                for n in &used {
                    prop_assert_eq!(next.probability(*n), dist.probability(*n));
                }
                let all: Vec<NodeId> = (1..=d).map(NodeId).collect();
                let split = rng.random_range(0..=d);
                let full = UsageRecord::new(&t, NodeId(0), all[..split].to_vec(), all[split..].to_vec())
                    .unwrap();
                prop_assert_eq!(dist.adapt(&full, alpha), dist.clone());
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    run(
        "monogamy, conservation, expiry, single active, no-wait",
        TestRunner::new(cfg())
            .run(&sim_strategy(), |config| {
                let t = make_bottleneck();
                let mut obs = Invariants::default();
                let r = run_trial_observed(&config, &t, &make_bottleneck_traffic(), 0, &mut obs)
                    .map_err(|e| TestCaseError::fail(e.to_string()))?;
                prop_assert!(obs.violations.is_empty(), "{:?}", &obs.violations[..obs.violations.len().min(3)]);
                prop_assert_eq!(obs.active, 0);
                let q = &r.requests;
                prop_assert_eq!(q[0].submitted_at, Some(q[0].scheduled_at));
                for w in q.windows(2) {
                    let expect = w[1].scheduled_at.max(w[0].completed_at.unwrap());
                    prop_assert_eq!(w[1].submitted_at, Some(expect));
                }
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    run(
        "swap atomicity",
        TestRunner::new(cfg())
            .run(&(3usize..8, 0.0f64..=1.0, any::<u64>()), |(n, p, seed)| {
                let t = Topology::new(n, (0..n - 1).map(|i| (i, i + 1)), vec![2; n]).unwrap();
                let mut s = NetworkState::new(&t, None);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut ids = Vec::new();
                for i in 0..n - 1 {
                    ids.push(s.try_generate(NodeId(i), NodeId(i + 1), 1.0, &mut rng).unwrap().unwrap());
                }
                let mut acc = ids[0];
                for i in 1..n - 1 {
                    let before = (s.live_links(), s.occupied_slots(NodeId(i)));
                    match s.try_swap(acc, ids[i], NodeId(i), p, &mut rng).unwrap() {
                        Some(id) => {
                            prop_assert_eq!(s.live_links(), before.0 - 1);
                            acc = id;
                        }
                        None => {
                            prop_assert_eq!(s.live_links(), before.0 - 2);
                            break;
                        }
                    }
                    prop_assert_eq!(s.occupied_slots(NodeId(i)), before.1 - 2);
                    prop_assert!(s.check_consistency().is_ok());
                }
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    run("seed determinism", cli_determinism());

    Verdict {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            "all property suites green; CSVs byte-identical across runs and --jobs".into()
        } else {
            failures.join(" | ")
        },
    }
}

fn random_split(d: usize, rng: &mut impl Rng) -> (Vec<NodeId>, Vec<NodeId>) {
    let mut used = Vec::new();
    let mut created = Vec::new();
    for k in 1..=d {
        match rng.random_range(0..3) {
            0 => used.push(NodeId(k)),
            1 => created.push(NodeId(k)),
            _ => {}
        }
    }
    (used, created)
}

fn cli_determinism() -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |sub: &str, jobs: &str| -> Result<BTreeMap<String, Vec<u8>>, String> {
        let out = dir.path().join(sub);
        let status = Command::new(env!("CARGO_BIN_EXE_entsim"))
            .args(["run", "presets/bottleneck_alloc", "--seed", "7", "--trials", "8", "--jobs", jobs])
            .arg("--out-dir")
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(String::from_utf8_lossy(&status.stderr).into_owned());
        }
        let mut files = BTreeMap::new();
        for entry in std::fs::read_dir(&out).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.extension().is_some_and(|x| x == "csv") {
                let name = path.file_name().unwrap().to_string_lossy().into_owned();
                files.insert(name, std::fs::read(&path).map_err(|e| e.to_string())?);
            }
        }
        Ok(files)
    };
    let a = run("a", "1")?;
    let b = run("b", "1")?;
    let c = run("c", "4")?;
    if a.len() != 12 {
        return Err(format!("expected 12 CSVs, got {}", a.len()));
    }
    if a != b {
        return Err("two identical runs differ".into());
    }
    if a != c {
        return Err("--jobs 1 and --jobs 4 differ".into());
    }
    Ok(())
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 7] = [
        ("adaptive improvement on asnet10", adaptive_improvement),
        ("scheme ordering on asnet10", scheme_ordering),
        ("zero-latency regime on bottleneck", zero_latency_regime),
        ("memory allocation effect on bottleneck", allocation_effect),
        ("per-step link rate oracle", per_step_oracle),
        ("interval link count oracle", interval_oracle),
        ("property suites and determinism", property_suites),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {} {} - {name}: {} [{:.1}s]",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
