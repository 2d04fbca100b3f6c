//! Acceptance runner: checks every criterion at its stated size and
//! tolerance and prints one PASS/FAIL line each. Exits non-zero on failure.

mod common;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ftkit::analysis::{birnbaum, unreliability, StaticAnalysis};
use ftkit::ctmc::{build_ctmc, transient_failure_prob};
use ftkit::galileo;
use ftkit::model::{Distribution, FaultTree, NodeType, SpareKind};
use ftkit::modular::{
    analyze_dft, analyze_dft_monolithic, detect_modules, select_dynamic_modules, DftAnalyzer,
    DftOptions,
};
use ftkit::mttf::{LimitParams, MttfMethod, SubstitutionParams};
use ftkit::ordering::{dfs_order, order_from_list, tdlr_order};
use ftkit::translate::{manager_for, translate, TranslateOptions};
use ftkit::uniform_times;
use rand::Rng;

use common::*;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"))
}

fn analysis(ft: &FaultTree) -> StaticAnalysis {
    StaticAnalysis::new(ft, &dfs_order(ft), TranslateOptions::default()).unwrap()
}

fn sample_sft() -> FaultTree {
    let e = || Distribution::exponential(1.0);
    FaultTree::builder()
        .gate("T", NodeType::And, &["G", "H"])
        .gate("G", NodeType::Vot(2), &["F", "C", "D"])
        .gate("H", NodeType::Or, &["D", "E"])
        .gate("F", NodeType::Or, &["A", "B"])
        .basic_event("A", e())
        .basic_event("B", e())
        .basic_event("C", e())
        .basic_event("D", e())
        .basic_event("E", e())
        .top("T")
        .build()
        .unwrap()
}

fn modular_dft() -> FaultTree {
    let e = Distribution::exponential;
    FaultTree::builder()
        .gate("T", NodeType::Or, &["G", "K", "S"])
        .gate("G", NodeType::And, &["A", "B"])
        .gate("K", NodeType::And, &["B", "H"])
        .gate("H", NodeType::Pand, &["C", "D"])
        .gate("S", NodeType::Spare(SpareKind::Warm), &["E", "F"])
        .basic_event("A", e(0.5))
        .basic_event("B", e(0.7))
        .basic_event("C", e(1.0))
        .basic_event("D", e(1.2))
        .basic_event("E", e(0.8))
        .basic_event(
            "F",
            Distribution::Exponential {
                rate: 0.9,
                dormancy: 0.3,
            },
        )
        .top("T")
        .build()
        .unwrap()
}

fn corpus() -> Vec<FaultTree> {
    let mut rng = rng(3);
    (0..500)
        .map(|_| {
            let n = rng.gen_range(1..=12);
            random_sft(&mut rng, n)
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let ft = sample_sft();
    let count = |order| {
        let mut m = manager_for(&ft, &order);
        let f = translate(&ft, &order, &mut m).unwrap();
        m.internal_node_count(f)
    };
    let dfs = dfs_order(&ft);
    let tdlr = tdlr_order(&ft);
    ensure(dfs.names(&ft) == ["A", "B", "C", "D", "E"], || format!("dfs order {:?}", dfs.names(&ft)))?;
    ensure(tdlr.names(&ft) == ["C", "D", "E", "A", "B"], || format!("tdlr order {:?}", tdlr.names(&ft)))?;
    let (a, b) = (count(dfs), count(tdlr));
    ensure(a == 7 && b == 6, || format!("node counts dfs={a} tdlr={b}"))?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("dfs=7 tdlr=6 in {:?}", start.elapsed()))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let ft = modular_dft();
    let dynamic = select_dynamic_modules(&ft, &detect_modules(&ft));
    let roots: BTreeSet<&str> = dynamic.iter().map(|m| ft.name(m.root)).collect();
    ensure(roots == BTreeSet::from(["H", "S"]), || format!("dynamic modules {roots:?}"))?;
    let analyzer = DftAnalyzer::new(ft.clone(), DftOptions::default()).unwrap();
    let (residual, _, _) = analyzer.residual_tree(&[0.0, 1.0]).map_err(|e| e.to_string())?;
    let kids = |n: &str| -> Vec<String> {
        residual
            .children(residual.find(n).unwrap())
            .iter()
            .map(|&c| residual.name(c).to_string())
            .collect()
    };
    ensure(
        kids("T") == ["G", "K", "S'"] && kids("K") == ["B", "H'"] && kids("G") == ["A", "B"],
        || "residual tree differs from the expected middle tree".into(),
    )?;
    ensure(residual.len() == 7 && residual.is_static(), || "residual size".into())?;
    let order = order_from_list(&residual, &["S'", "B", "A", "H'"]).unwrap();
    let mut m = manager_for(&residual, &order);
    let f = translate(&residual, &order, &mut m).unwrap();
    for bits in 0..16u32 {
        let a: Vec<bool> = (0..4).map(|i| bits >> i & 1 == 1).collect();
        let expected = a[0] || (a[1] && (a[2] || a[3]));
        ensure(m.evaluate(f, &a) == expected, || format!("truth table row {bits:04b}"))?;
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("modules {{H, S}}, {} BDD nodes, {:?}", m.internal_node_count(f), start.elapsed()))
}

fn criterion_3(corpus: &[FaultTree]) -> Outcome {
    let start = Instant::now();
    let mut mismatches = 0;
    for ft in corpus {
        let mut a = analysis(ft);
        let got: BTreeSet<BTreeSet<String>> = a
            .minimal_cut_sets(None)
            .unwrap()
            .into_iter()
            .map(|s| s.into_iter().collect())
            .collect();
        if got != brute_force_mcs(ft) {
            mismatches += 1;
        }
    }
    ensure(mismatches == 0, || format!("{mismatches} mismatches"))?;
    within(start.elapsed(), Duration::from_secs(300))?;
    Ok(format!("{} trees, 0 mismatches, {:?}", corpus.len(), start.elapsed()))
}

fn criterion_4(corpus: &[FaultTree]) -> Outcome {
    let mut rng = rng(4);
    let mut worst = 0.0f64;
    for ft in corpus {
        let a = analysis(ft);
        for _ in 0..5 {
            let t = rng.gen_range(0.0..3.0);
            let probs: Vec<f64> = ft.basic_events().map(|b| exp_prob(ft, b, t)).collect();
            let err = (a.unreliability_at(t).unwrap() - minterm_unreliability(ft, &probs)).abs();
            worst = worst.max(err);
        }
    }
    ensure(worst <= 1e-12, || format!("max error {worst:e}"))?;
    Ok(format!("max abs error {worst:.1e}"))
}

fn criterion_5() -> Outcome {
    let mut rng = rng(5);
    let ft = random_sft(&mut rng, 150);
    let a = analysis(&ft);
    let times = uniform_times(10.0, 10_000);
    let start = Instant::now();
    let curve = a.curve(&times, 1024).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(10))?;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let i = rng.gen_range(0..times.len());
        let scalar = a.unreliability_at(times[i]).unwrap();
        worst = worst.max((curve.values()[i] - scalar).abs());
    }
    ensure(worst <= 1e-15, || format!("max deviation {worst:e}"))?;
    Ok(format!(
        "150 BEs, {} BDD nodes, 10000 points in {elapsed:?}, max deviation {worst:e}",
        a.manager().internal_node_count(a.root())
    ))
}

fn criterion_6(corpus: &[FaultTree]) -> Outcome {
    let mut rng = rng(6);
    let mut worst = 0.0f64;
    for ft in corpus {
        let mut a = analysis(ft);
        let order = dfs_order(ft);
        let probs: Vec<f64> = (0..order.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
        // Probabilities in declaration order for the minterm oracle.
        let by_decl: Vec<f64> = ft
            .basic_events()
            .map(|b| probs[order.as_slice().iter().position(|&x| x == b).unwrap()])
            .collect();
        let root = a.root();
        for (level, &b) in order.as_slice().iter().enumerate() {
            let bi = birnbaum(a.manager_mut(), root, level, &probs).unwrap();
            let d = ft.basic_events().position(|x| x == b).unwrap();
            let mut hi = by_decl.clone();
            let mut lo = by_decl.clone();
            hi[d] = 1.0;
            lo[d] = 0.0;
            let slope = minterm_unreliability(ft, &hi) - minterm_unreliability(ft, &lo);
            worst = worst.max((bi - slope).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;

    let ft = FaultTree::builder()
        .gate("T", NodeType::Or, &["a", "b"])
        .basic_event("a", Distribution::exponential(1.0))
        .basic_event("b", Distribution::exponential(1.0))
        .top("T")
        .build()
        .unwrap();
    let mut a = analysis(&ft);
    let root = a.root();
    let probs = [0.3, 0.45];
    let bi = birnbaum(a.manager_mut(), root, 0, &probs).unwrap();
    ensure(bi == 1.0 - probs[1], || format!("OR case {bi}"))?;
    let u = unreliability(a.manager(), root, &probs).unwrap();
    ensure((u - (0.3 + 0.45 - 0.3 * 0.45)).abs() < 1e-15, || "OR unreliability".into())?;
    Ok(format!("max deviation {worst:.1e}, OR(a,b) exact"))
}

fn criterion_7() -> Outcome {
    let limit = MttfMethod::Limit(LimitParams::default());
    let subst = MttfMethod::Substitution(SubstitutionParams::default());
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let e = Distribution::exponential;
    let cases = [
        (
            "BE(2)",
            FaultTree::builder().basic_event("x", e(2.0)).top("x").build().unwrap(),
            0.5,
        ),
        (
            "AND(1,2)",
            FaultTree::builder()
                .gate("T", NodeType::And, &["a", "b"])
                .basic_event("a", e(1.0))
                .basic_event("b", e(2.0))
                .top("T")
                .build()
                .unwrap(),
            7.0 / 6.0,
        ),
        (
            "OR(1,1)",
            FaultTree::builder()
                .gate("T", NodeType::Or, &["a", "b"])
                .basic_event("a", e(1.0))
                .basic_event("b", e(1.0))
                .top("T")
                .build()
                .unwrap(),
            0.5,
        ),
    ];
    let mut worst = 0.0f64;
    for (name, ft, expected) in &cases {
        let a = analysis(ft);
        for method in [&limit, &subst] {
            let v = a.mttf(method).map_err(|e| format!("{name}: {e}"))?;
            worst = worst.max(rel(v, *expected));
            ensure(rel(v, *expected) <= 1e-5, || format!("{name}: {v} vs {expected}"))?;
        }
    }
    let mut rng = rng(7);
    let mut agree = 0.0f64;
    for i in 0..20 {
        let n = rng.gen_range(2..=10);
        let ft = random_sft(&mut rng, n);
        let a = analysis(&ft);
        let l = a.mttf(&limit).map_err(|e| format!("random {i}: {e}"))?;
        let s = a.mttf(&subst).map_err(|e| format!("random {i}: {e}"))?;
        agree = agree.max(rel(l, s));
        ensure(rel(l, s) <= 1e-5, || format!("random {i}: limit {l} substitution {s}"))?;
    }
    Ok(format!("analytic max rel error {worst:.1e}, random max disagreement {agree:.1e}"))
}

fn criterion_8() -> Outcome {
    let pand = FaultTree::builder()
        .gate("T", NodeType::Pand, &["C", "D"])
        .basic_event("C", Distribution::exponential(1.0))
        .basic_event("D", Distribution::exponential(1.0))
        .top("T")
        .build()
        .unwrap();
    let chain = build_ctmc(&pand).map_err(|e| e.to_string())?;
    let p = transient_failure_prob(&chain, &[1.0]).unwrap().values()[0];
    let e1 = (-1.0f64).exp();
    let closed = (1.0 - (-2.0f64).exp()) / 2.0 - e1 * (1.0 - e1);
    ensure((p - closed).abs() <= 1e-8, || format!("PAND {p} vs {closed}"))?;

    const SAMPLES: usize = 1_000_000;
    let times = [0.5, 1.0, 2.0];
    let mut worst_sigma = 0.0f64;
    let mut fixtures = dynamic_fixtures();
    fixtures.push(("pand2", pand));
    for (i, (name, ft)) in fixtures.iter().enumerate() {
        let chain = build_ctmc(ft).map_err(|e| format!("{name}: {e}"))?;
        let exact = transient_failure_prob(&chain, &times).unwrap();
        let mc = Simulator::new(ft).estimate(&times, SAMPLES, 8_000 + i as u64);
        for (j, &t) in times.iter().enumerate() {
            let p = exact.values()[j];
            let sigma = (p * (1.0 - p) / SAMPLES as f64).sqrt();
            let dev = (mc[j] - p).abs();
            let z = if sigma > 0.0 { dev / sigma } else if dev == 0.0 { 0.0 } else { f64::INFINITY };
            worst_sigma = worst_sigma.max(z);
            ensure(z <= 3.0, || format!("{name} at t={t}: ctmc {p} mc {} ({z:.2} sigma)", mc[j]))?;
        }
    }
    Ok(format!(
        "PAND closed form err {:.1e}; {} fixtures within {worst_sigma:.2} sigma",
        (p - closed).abs(),
        fixtures.len()
    ))
}

fn criterion_9() -> Outcome {
    let mut rng = rng(9);
    let times: Vec<f64> = (1..=10).map(|i| i as f64 * 0.3).collect();
    let mut worst = 0.0f64;
    let mut proper = 0;
    for i in 0..50 {
        let ft = random_dft(&mut rng, 14);
        let modular = analyze_dft(&ft, &times, 1024).map_err(|e| format!("tree {i}: {e}"))?;
        let mono = analyze_dft_monolithic(&ft, &times).map_err(|e| format!("tree {i}: {e}"))?;
        for (a, b) in modular.curve.values().iter().zip(mono.curve.values()) {
            worst = worst.max((a - b).abs());
        }
        let top = ft.name(ft.top());
        if modular.dynamic_modules.iter().any(|m| m != top) {
            proper += 1;
            ensure(modular.ctmc_states < mono.ctmc_states, || {
                format!(
                    "tree {i}: modular {} states, monolithic {}",
                    modular.ctmc_states, mono.ctmc_states
                )
            })?;
        }
    }
    ensure(worst <= 1e-8, || format!("max deviation {worst:e}"))?;
    Ok(format!("50 trees ({proper} with proper dynamic modules), max deviation {worst:.1e}"))
}

fn criterion_10() -> Outcome {
    let mut rng = rng(10);
    let mut failures = 0;
    for i in 0..200 {
        let ft = if i % 2 == 0 {
            let n = rng.gen_range(1..=15);
            random_sft(&mut rng, n)
        } else {
            random_dft(&mut rng, 20)
        };
        let text = galileo::serialize(&ft).map_err(|e| e.to_string())?;
        match galileo::parse(&text) {
            Ok(m) if m.tree == ft => {}
            _ => failures += 1,
        }
    }
    ensure(failures == 0, || format!("{failures} round-trip failures"))?;
    Ok("200 trees, 0 failures".into())
}

fn main() -> ExitCode {
    let corpus = corpus();
    let criteria: Vec<(usize, &str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        (1, "BDD node counts under DFS and TDLR", Box::new(criterion_1)),
        (2, "modularisation pipeline on the example DFT", Box::new(criterion_2)),
        (3, "minimal cut sets against brute force", Box::new(|| criterion_3(&corpus))),
        (4, "unreliability against minterm summation", Box::new(|| criterion_4(&corpus))),
        (5, "vectorised curve fidelity and speed", Box::new(criterion_5)),
        (6, "Birnbaum index against finite differences", Box::new(|| criterion_6(&corpus))),
        (7, "MTTF analytic cases and method agreement", Box::new(criterion_7)),
        (8, "CTMC semantics against closed form and simulation", Box::new(criterion_8)),
        (9, "modular against monolithic CTMC", Box::new(criterion_9)),
        (10, "Galileo round trip", Box::new(criterion_10)),
    ];
    let mut failed = 0;
    for (n, title, check) in criteria {
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(&check))
            .unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("[PASS] criterion {n}: {title} ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] criterion {n}: {title} ({detail})");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
