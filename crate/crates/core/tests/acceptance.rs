//! Acceptance gate. Runs every criterion in order, prints one PASS/FAIL line
//! per criterion and exits non-zero if any of them fails.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use speakstyle::corpus::{
    generate_synthetic_corpus, load_manifest, synthesize_utterance, LabelColumn, ManifestShape,
    SynthConfig,
};
use speakstyle::pipeline::{evaluate_system, EvalOptions, Evaluation};
use speakstyle::reference::{compute_averages, CorpusIndex, DEFAULT_THRESHOLD};
use speakstyle::{
    agreement, compute_cell_average, compute_triplet, dtw_align, extract_features, AudioClip,
    FeatureBundle, FrameConfig, LabelVector, NormKind, Triplet, Utterance,
};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn triplet_close(a: &Triplet, b: &Triplet, tol: f64) -> bool {
    close(a.id, b.id, tol) && close(a.p, b.p, tol) && close(a.ir, b.ir, tol)
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    if elapsed.as_secs_f64() < limit_s {
        Ok(())
    } else {
        Err(format!("took {:.1}s, limit {limit_s}s", elapsed.as_secs_f64()))
    }
}

// 1 ------------------------------------------------------------------------

fn metric_identity_and_symmetry() -> Outcome {
    let start = Instant::now();
    let cfg = SynthConfig::new(5, 10, 4, 2024);
    let frame = FrameConfig::default();
    let mut bundles = Vec::new();
    for g in 0..cfg.groups {
        for s in 0..cfg.speakers_per_group {
            for p in 0..cfg.prompts {
                let clip = synthesize_utterance(&cfg, p, g, s).map_err(|e| e.to_string())?;
                bundles.push(extract_features(&clip, &frame).map_err(|e| e.to_string())?);
            }
        }
    }
    ensure!(bundles.len() >= 200, "only {} utterances", bundles.len());

    for (k, b) in bundles.iter().enumerate() {
        let t = compute_triplet(b, b).map_err(|e| e.to_string())?;
        ensure!(
            triplet_close(&t, &Triplet::new(0.0, 1.0, 1.0), 1e-9),
            "utterance {k}: self triplet {t:?}"
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let pairs = 1000;
    for _ in 0..pairs {
        let i = rng.random_range(0..bundles.len());
        let j = loop {
            let j = rng.random_range(0..bundles.len());
            if j != i {
                break j;
            }
        };
        let ab = compute_triplet(&bundles[i], &bundles[j]).map_err(|e| e.to_string())?;
        let ba = compute_triplet(&bundles[j], &bundles[i]).map_err(|e| e.to_string())?;
        worst = worst
            .max((ab.id - ba.id).abs())
            .max((ab.p - ba.p).abs())
            .max((ab.ir - ba.ir).abs());
        ensure!(triplet_close(&ab, &ba, 1e-9), "pair ({i},{j}): {ab:?} vs {ba:?}");
    }
    within(start.elapsed(), 30.0)?;
    Ok(format!(
        "{} utterances, {pairs} pairs, max asymmetry {worst:.1e}, {:.1}s",
        bundles.len(),
        start.elapsed().as_secs_f64()
    ))
}

// 2 ------------------------------------------------------------------------

fn local_cost(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

// Every monotone path from (0,0) to the end, weighted 2 on the start cell and
// on diagonal steps, 1 on single steps. Sums are accumulated in path order.
fn enumerate_min(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    fn walk(a: &[Vec<f64>], b: &[Vec<f64>], i: usize, j: usize, acc: f64, best: &mut f64) {
        if i == a.len() - 1 && j == b.len() - 1 {
            *best = best.min(acc);
            return;
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            walk(a, b, i + 1, j + 1, acc + 2.0 * local_cost(&a[i + 1], &b[j + 1]), best);
        }
        if i + 1 < a.len() {
            walk(a, b, i + 1, j, acc + local_cost(&a[i + 1], &b[j]), best);
        }
        if j + 1 < b.len() {
            walk(a, b, i, j + 1, acc + local_cost(&a[i], &b[j + 1]), best);
        }
    }
    let mut best = f64::INFINITY;
    walk(a, b, 0, 0, 2.0 * local_cost(&a[0], &b[0]), &mut best);
    best
}

fn random_track(rng: &mut ChaCha8Rng, len: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..len)
        .map(|_| (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect()
}

fn dtw_matches_enumeration() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    for case in 0..500 {
        let dim = rng.random_range(1..=3);
        let n = rng.random_range(1..=6);
        let m = rng.random_range(1..=6);
        let a = random_track(&mut rng, n, dim);
        let b = random_track(&mut rng, m, dim);
        let path = dtw_align(&a, &b).map_err(|e| e.to_string())?;
        let oracle = enumerate_min(&a, &b);
        ensure!(
            path.cost == oracle,
            "case {case} ({n}x{m}, dim {dim}): dtw {} vs enumeration {oracle}",
            path.cost
        );
    }
    within(start.elapsed(), 10.0)?;
    Ok(format!("500 pairs exact, {:.2}s", start.elapsed().as_secs_f64()))
}

// 3 ------------------------------------------------------------------------

fn random_bundle(rng: &mut ChaCha8Rng) -> FeatureBundle {
    let cfg = FrameConfig {
        n_ceps: 3,
        ..FrameConfig::default()
    };
    let n = rng.random_range(3..=12);
    let spectral = random_track(rng, n, 3);
    let pitch = (0..n)
        .map(|_| rng.random_bool(0.8).then(|| rng.random_range(80.0..300.0)))
        .collect();
    let stress = (0..n).map(|_| rng.random_range(-50.0..-10.0)).collect();
    FeatureBundle::from_parts(cfg, 16000, spectral, pitch, stress).expect("valid bundle")
}

fn cell_average_matches_quadruple_loop() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (prompts, groups) = (10, 5);
    let mut index = CorpusIndex::new(prompts, (0..groups).map(|g| format!("g{g}")).collect());
    for i in 0..prompts {
        for j in 0..groups {
            let n = rng.random_range(1..=5);
            for k in 0..n {
                let u = Utterance::new(format!("s{k}"), random_bundle(&mut rng));
                index.insert(i, j, u).map_err(|e| e.to_string())?;
            }
        }
    }

    let averages = compute_averages(&index, NormKind::L2).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for i in 0..prompts {
        for j in 0..groups {
            let cell = index.cell(i, j);
            let n = cell.len();
            let (mut id, mut p, mut ir) = (0.0, 0.0, 0.0);
            for k in 0..n {
                for l in 0..n {
                    let t = compute_triplet(&cell[k].bundle, &cell[l].bundle)
                        .map_err(|e| e.to_string())?;
                    id += t.id;
                    p += t.p;
                    ir += t.ir;
                }
            }
            let denom = (n * n) as f64;
            let expected = Triplet::new(id / denom, p / denom, ir / denom);

            let direct = compute_cell_average(i, j, cell, NormKind::L2).map_err(|e| e.to_string())?;
            let bulk = averages
                .iter()
                .find(|a| a.prompt == i && a.group == j)
                .ok_or(format!("no average for cell ({i},{j})"))?;
            for got in [&direct.mean, &bulk.mean] {
                worst = worst
                    .max((got.id - expected.id).abs())
                    .max((got.p - expected.p).abs())
                    .max((got.ir - expected.ir).abs());
                ensure!(
                    triplet_close(got, &expected, 1e-9),
                    "cell ({i},{j}) n={n}: {got:?} vs {expected:?}"
                );
            }
        }
    }
    Ok(format!("{} cells, max deviation {worst:.1e}", prompts * groups))
}

// 4 ------------------------------------------------------------------------

fn pitch_accuracy_on_tones() -> Outcome {
    let sr = 16000;
    let cfg = FrameConfig::default();
    let mut worst = 0.0f64;
    let mut summary = Vec::new();
    for f in [100.0, 150.0, 220.0, 330.0, 440.0] {
        let samples: Vec<f64> = (0..sr as usize / 2)
            .map(|i| 0.5 * (2.0 * std::f64::consts::PI * f * i as f64 / sr as f64).sin())
            .collect();
        let clip = AudioClip::new(samples, sr).map_err(|e| e.to_string())?;
        let bundle = extract_features(&clip, &cfg).map_err(|e| e.to_string())?;
        let voiced: Vec<f64> = bundle.pitch().iter().flatten().copied().collect();
        ensure!(
            voiced.len() == bundle.frame_count(),
            "{f} Hz: only {} of {} frames voiced",
            voiced.len(),
            bundle.frame_count()
        );
        for (k, est) in voiced.iter().enumerate() {
            let err = (est - f).abs() / f;
            worst = worst.max(err);
            ensure!(err <= 0.02, "{f} Hz frame {k}: estimated {est:.2} Hz");
        }
        summary.push(format!("{f:.0}"));
    }
    Ok(format!(
        "tones {} Hz, every frame voiced, max relative error {:.3}%",
        summary.join("/"),
        100.0 * worst
    ))
}

// 5, 7, 8 ------------------------------------------------------------------

fn run_protocol(dir: &Path) -> Result<(Evaluation, Duration), String> {
    let start = Instant::now();
    let cfg = SynthConfig::new(5, 6, 4, 42);
    let manifest_path =
        generate_synthetic_corpus(&cfg, &dir.join("corpus")).map_err(|e| e.to_string())?;
    let manifest =
        load_manifest(&manifest_path, ManifestShape::default()).map_err(|e| e.to_string())?;
    let opts = EvalOptions {
        config: FrameConfig::default(),
        threshold: DEFAULT_THRESHOLD,
        norm: NormKind::L2,
        seed: 42,
        reference_labels: LabelColumn::Expert1,
    };
    let eval = evaluate_system(&manifest, &opts).map_err(|e| e.to_string())?;
    eval.write(&dir.join("run")).map_err(|e| e.to_string())?;
    Ok((eval, start.elapsed()))
}

fn end_to_end_recovery(eval: &Evaluation, elapsed: Duration) -> Outcome {
    let truth = eval
        .report
        .system_vs_truth
        .as_ref()
        .ok_or("report has no truth column")?;
    ensure!(truth.n == 10, "expected 10 test speakers, got {}", truth.n);
    ensure!(truth.total_pct >= 80.0, "total agreement {:.1}% < 80%", truth.total_pct);
    ensure!(truth.one_step_pct >= 95.0, "1-step agreement {:.1}% < 95%", truth.one_step_pct);
    within(elapsed, 120.0)?;
    Ok(format!(
        "{} test speakers, total {:.1}%, 1-step {:.1}%, {:.1}s",
        truth.n,
        truth.total_pct,
        truth.one_step_pct,
        elapsed.as_secs_f64()
    ))
}

fn l2_scalar(t: &Triplet) -> f64 {
    let a = t.id / (1.0 + t.id);
    let b = (1.0 - t.p) / 2.0;
    let c = (1.0 - t.ir) / 2.0;
    (a * a + b * b + c * c).sqrt()
}

fn dominance_audit(eval: &Evaluation) -> Outcome {
    let (mut dominant, mut fallback) = (0, 0);
    for o in &eval.outcomes {
        let r = &o.result;
        let chosen = &r.scores[r.chosen].triplet;
        for s in &r.scores {
            ensure!(
                close(s.scalar, l2_scalar(&s.triplet), 1e-12),
                "{} prompt {}: stored scalar disagrees with its triplet",
                o.speaker,
                r.prompt
            );
        }
        if r.dominant {
            dominant += 1;
            for s in r.scores.iter().filter(|s| s.group != r.chosen) {
                let t = &s.triplet;
                ensure!(
                    chosen.id <= t.id && chosen.p >= t.p && chosen.ir >= t.ir,
                    "{} prompt {}: group {} marked dominant but not over group {}",
                    o.speaker,
                    r.prompt,
                    r.chosen,
                    s.group
                );
            }
        } else {
            fallback += 1;
            let min = r
                .scores
                .iter()
                .map(|s| l2_scalar(&s.triplet))
                .fold(f64::INFINITY, f64::min);
            ensure!(
                l2_scalar(chosen) == min,
                "{} prompt {}: group {} is not the scalar argmin",
                o.speaker,
                r.prompt,
                r.chosen
            );
        }
    }
    ensure!(!eval.outcomes.is_empty(), "no classifications to audit");
    Ok(format!("{dominant} dominant and {fallback} argmin decisions re-verified"))
}

fn determinism(first: &Path, second: &Path) -> Outcome {
    let mut sizes = Vec::new();
    for name in ["model.json", "results.csv", "report.json"] {
        let a = fs::read(first.join("run").join(name)).map_err(|e| format!("{name}: {e}"))?;
        let b = fs::read(second.join("run").join(name)).map_err(|e| format!("{name}: {e}"))?;
        ensure!(a == b, "{name} differs between runs");
        sizes.push(format!("{name} {}B", a.len()));
    }
    Ok(format!("byte-identical: {}", sizes.join(", ")))
}

// 6 ------------------------------------------------------------------------

fn constructed(exact: usize, adjacent: usize, total: usize) -> (LabelVector, LabelVector) {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for k in 0..total {
        let subject = format!("subject{k:03}");
        let truth = k % 5;
        let other = if k < exact {
            truth
        } else if k < exact + adjacent {
            if truth == 4 { 3 } else { truth + 1 }
        } else {
            (truth + 2 + k % 2) % 5
        };
        a.push((subject.clone(), truth));
        b.push((subject, other));
    }
    (
        LabelVector::from_pairs(a).expect("unique subjects"),
        LabelVector::from_pairs(b).expect("unique subjects"),
    )
}

fn agreement_arithmetic() -> Outcome {
    let mut lines = Vec::new();
    for (exact, adjacent, want_total, want_step) in [(26, 19, 26.0, 45.0), (56, 44, 56.0, 100.0)] {
        let (a, b) = constructed(exact, adjacent, 100);
        let r = agreement(&a, &b, 5).map_err(|e| e.to_string())?;
        ensure!(r.n == 100, "n = {}", r.n);
        ensure!(
            r.total_pct == want_total && r.one_step_pct == want_step,
            "{exact}+{adjacent}: got {}% / {}%",
            r.total_pct,
            r.one_step_pct
        );
        let diagonal: usize = (0..5).map(|g| r.confusion[g][g]).sum();
        ensure!(diagonal == exact, "confusion diagonal {diagonal} != {exact}");
        lines.push(format!("{:.1}% / {:.1}%", r.total_pct, r.one_step_pct));
    }
    Ok(lines.join(" and "))
}

// ---------------------------------------------------------------------------

fn check(number: usize, title: &str, f: impl FnOnce() -> Outcome) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    });
    match outcome {
        Ok(detail) => {
            println!("PASS  criterion {number}: {title}: {detail}");
            true
        }
        Err(detail) => {
            println!("FAIL  criterion {number}: {title}: {detail}");
            false
        }
    }
}

fn main() {
    let mut ok = Vec::new();
    ok.push(check(1, "metric identity and symmetry", metric_identity_and_symmetry));
    ok.push(check(2, "DTW optimality against enumeration", dtw_matches_enumeration));
    ok.push(check(3, "cell average against quadruple loop", cell_average_matches_quadruple_loop));
    ok.push(check(4, "pitch accuracy on pure tones", pitch_accuracy_on_tones));

    let first = tempfile::tempdir().expect("tempdir");
    let second = tempfile::tempdir().expect("tempdir");
    let run_a = run_protocol(first.path());
    ok.push(check(5, "end-to-end recovery", || {
        let (eval, elapsed) = run_a.as_ref().map_err(Clone::clone)?;
        end_to_end_recovery(eval, *elapsed)
    }));
    ok.push(check(6, "agreement arithmetic", agreement_arithmetic));
    ok.push(check(7, "dominance soundness audit", || {
        let (eval, _) = run_a.as_ref().map_err(Clone::clone)?;
        dominance_audit(eval)
    }));
    let run_b = run_protocol(second.path());
    ok.push(check(8, "determinism", || {
        run_b.as_ref().map_err(Clone::clone)?;
        determinism(first.path(), second.path())
    }));

    let passed = ok.iter().filter(|&&b| b).count();
    println!("acceptance: {passed}/{} criteria passed", ok.len());
    if passed != ok.len() {
        std::process::exit(1);
    }
}
