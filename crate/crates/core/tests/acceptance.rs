mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use common::*;
use textnmn::config::Variant;
use textnmn::knowledge::{extract_query_nouns, ingest_abstracts, KbIndex};
use textnmn::metrics::{consensus_score, Metric};
use textnmn::synth::Template;
use textnmn::train::{evaluate, train, TrainOutcome};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn desk_run(variant: Variant, seed: u64, rate: f64, templates: &[Template]) -> TrainOutcome<f64> {
    let (tr, va) = desk_data(seed, rate, templates);
    train(desk_config(variant, seed), &tr, &va, None, None, |_| {}).unwrap()
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let mut worst = (0.0, String::new());
    for (name, params, f) in op_cases() {
        let r = textnmn::gradcheck::gradient_check(f, &params, GRAD_EPS).map_err(|e| e.to_string())?;
        if r.max_rel_error >= worst.0 {
            worst = (r.max_rel_error, name.to_string());
        }
    }
    for variant in HEAD_VARIANTS {
        let r = head_gradient_check(variant);
        if r.max_rel_error >= worst.0 {
            worst = (r.max_rel_error, variant.to_string());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst.0 < GRAD_TOL && secs < 60.0,
        format!("max rel error {:.2e} ({}), {secs:.1}s", worst.0, worst.1),
    )
}

fn overfit() -> Outcome {
    let start = Instant::now();
    let out = desk_run(Variant::Nmn, 0, 0.7, &Template::ALL);
    let (epoch, acc) = out
        .log
        .iter()
        .map(|l| (l.epoch, l.train_acc))
        .fold((0, 0.0), |best, x| if x.1 > best.1 { x } else { best });
    let secs = start.elapsed().as_secs_f64();
    check(
        acc >= 0.95 && secs < 300.0,
        format!("best train exact {acc:.3} at epoch {epoch}, {secs:.1}s"),
    )
}

fn caption_only() -> Outcome {
    let colour = [Template::Color];
    let chance = 1.0 / textnmn::synth::COLORS.len() as f64;
    let informative = desk_run(Variant::CapOnly, 0, 1.0, &colour);
    let train_acc = informative.log.iter().map(|l| l.train_acc).fold(0.0, f64::max);
    let blind = desk_run(Variant::CapOnly, 0, 0.0, &colour);
    let (_, held_out) = desk_data(7, 0.0, &colour);
    let prep = blind.model.prepare_all(&held_out, None).unwrap();
    let blind_acc = evaluate(&blind.model, &prep, Metric::Exact).unwrap().overall;
    check(
        train_acc >= 0.9 && (blind_acc - chance).abs() <= 0.10,
        format!("rate 1: train {train_acc:.3}; rate 0: held-out {blind_acc:.3} vs chance {chance:.3}"),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn caption_direction() -> Outcome {
    let best_val = |variant| -> Vec<f64> {
        (0..5)
            .map(|seed| {
                let out = desk_run(variant, seed, 0.7, &Template::ALL);
                out.log.iter().map(|l| l.val_acc).fold(0.0, f64::max)
            })
            .collect()
    };
    let nmn = best_val(Variant::Nmn);
    let cap = best_val(Variant::NmnCap);
    let (a, b) = (median(nmn.clone()), median(cap.clone()));
    check(
        b >= a,
        format!(
            "median val nmn {a:.3}, nmn+cap {b:.3}, gap {:+.3} (nmn {nmn:?}, nmn+cap {cap:?})",
            b - a
        ),
    )
}

fn layouts() -> Outcome {
    let cases = layout_cases();
    let bad = layout_mismatches(&cases);
    check(
        cases.len() == 20 && bad.is_empty(),
        format!("{} questions × 2 modes, {} mismatches {bad:?}", cases.len(), bad.len()),
    )
}

fn retrieval() -> Outcome {
    let checked = random_retrieval_sweep(2024, 20, 50)?;
    let ingested = ingest_abstracts(&fixture("pizza_abstracts.tsv")).map_err(|e| e.to_string())?;
    let index = KbIndex::build(&ingested.docs, None).map_err(|e| e.to_string())?;
    let question: Vec<&str> = "what toppings are on the pizza".split(' ').collect();
    let terms = extract_query_nouns(&question);
    let hits = index.search(&terms, 1).map_err(|e| e.to_string())?;
    let top = hits.first().map(|h| index.title(h.0)).unwrap_or("");
    check(
        checked == 1000 && top == "Pizza",
        format!("{checked} random queries identical; pizza question tops with {top:?}"),
    )
}

fn adadelta() -> Outcome {
    let gap = adadelta_max_gap(100);
    let first = adadelta_first_step(1.0);
    let expect = -(1e-6f64 / (0.05 + 1e-6)).sqrt();
    check(
        gap < 1e-12 && (first - expect).abs() < 1e-15,
        format!("max gap {gap:.1e} over 100 steps; first step {first:.6e}"),
    )
}

fn metric_checks() -> Outcome {
    let four = consensus_score("yes", &humans(4));
    let two = consensus_score("yes", &humans(2));
    let counts = category_counts(&EXAMPLE_QUESTIONS);
    let split_ok =
        counts.get("number") == Some(&2) && counts.get("yes/no") == Some(&1) && counts.get("other") == Some(&3);
    check(
        four == 1.0 && two == 2.0 / 3.0 && split_ok,
        format!("4/10 → {four}, 2/10 → {two:.4}, split {counts:?}"),
    )
}

fn persistence() -> Outcome {
    let a = trained_checkpoint(Variant::NmnCapAttn, 11);
    let b = trained_checkpoint(Variant::NmnCapAttn, 11);
    let model: textnmn::Model64 = textnmn::checkpoint::from_bytes(&a).map_err(|e| e.to_string())?;
    let bad = reload_mismatches(&model, &small_data(123, 10));
    check(
        a == b && bad.is_empty(),
        format!(
            "checkpoints identical: {} ({} bytes); reload mismatches {bad:?}",
            a == b,
            a.len()
        ),
    )
}

fn degradation() -> Outcome {
    let bad = zero_kb_mismatches(&small_data(8, 12));
    check(bad.is_empty(), format!("12 instances, mismatches {bad:?}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("gradient suite", gradients),
        ("nmn overfits 200 instances", overfit),
        ("caption-only learns from captions only", caption_only),
        ("nmn+cap median val >= nmn", caption_direction),
        ("layout compiler fixture", layouts),
        ("bm25 search equals brute force", retrieval),
        ("adadelta reference", adadelta),
        ("metric spot checks", metric_checks),
        ("determinism and persistence", persistence),
        ("zero kb vector degrades to nmn", degradation),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
