//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use kwskit::audio::{save_wav, AudioClip, SAMPLE_RATE};
use kwskit::augment::{spec_augment, MaskPolicy};
use kwskit::cleaner::{clean_clip, slide_best, CleanerConfig, TargetClass};
use kwskit::cssm::{bg_window, compose, kw_window, kw_window_at, synthesize, CssmParams, PadMode, Windows};
use kwskit::dataset::{validate_counts, Manifest, Split};
use kwskit::frontend::{FrontendConfig, Mfcc};
use kwskit::model::{
    build_a0, count_flops, count_params, forward, param_report, toggle_report, weighted_xent, xent_grad,
    ClassWeights, ParamConventions, WeightSet, REFERENCE_FLOPS, REFERENCE_PARAMS,
};
use kwskit::scaling::{apply_scaling, enumerate_candidates, Decimal, ScaleCandidate, SearchSpec};
use kwskit::{FeatureMap, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// high-precision reference values
const I0_1_5: f64 = 1.646_723_189_772_890_8;
const INV_I0_1_5: f64 = 0.607_266_604_497_089_6;
const LN_20: f64 = 2.995_732_273_553_991;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Power series for I0, written independently of the library.
fn i0_oracle(x: f64) -> f64 {
    let q = x * x / 4.0;
    let (mut term, mut sum, mut k) = (1.0f64, 1.0f64, 1.0f64);
    while term > 1e-18 * sum {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

fn kw_oracle(m: usize, beta: f64) -> Vec<f64> {
    let d = (m - 1) as f64;
    (0..m)
        .map(|i| {
            let j = i as f64 - d / 2.0;
            let r = (1.0 - 4.0 * j * j / (d * d)).max(0.0);
            i0_oracle(beta * r.sqrt()) / i0_oracle(beta)
        })
        .collect()
}

fn noise_clip(rng: &mut ChaCha8Rng, len: usize, amp: f32) -> AudioClip {
    AudioClip::new((0..len).map(|_| rng.gen_range(-amp..=amp)).collect(), SAMPLE_RATE).unwrap()
}

fn window_oracle() -> Result<Outcome> {
    let centre = kw_window_at(0.0, 16_000, 1.5);
    let w = kw_window(16_000, 1.5)?;
    let series = 1.0 / i0_oracle(1.5);
    let edge_err = (w[0] - series).abs().max((w[15_999] - series).abs());
    let series_vs_ref = (i0_oracle(1.5) - I0_1_5).abs().max((series - INV_I0_1_5).abs());
    let bg = bg_window(16_000, 2_000, 2.5, 1.05, PadMode::Literal)?;
    let core = &bg[2_000..18_000];
    let sampled_min = core.iter().cloned().fold(f64::INFINITY, f64::min);
    let core_min = 1.05 - kw_window_at(0.0, 16_000, 2.5);
    let max_sample = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pass = centre == 1.0
        && edge_err < 1e-9
        && series_vs_ref < 1e-15
        && (core_min - 0.05).abs() < 1e-12
        && sampled_min >= core_min
        && max_sample <= 1.0;
    Ok(outcome(
        pass,
        format!(
            "centre {centre}, edge err {edge_err:.1e}, bg core min {core_min:.15} (nearest samples {sampled_min:.12})"
        ),
    ))
}

fn cssm_exactness() -> Result<Outcome> {
    let params = CssmParams::default();
    let windows = Windows::new(&params)?;
    let kw_ref = kw_oracle(16_000, 1.5);
    let bg_core: Vec<f64> = kw_oracle(16_000, 2.5).iter().map(|v| 1.05 - v).collect();
    let mut worst = 0.0f64;
    let mut outside_ok = true;
    for case in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1_000 + case);
        let (ka, ba) = (rng.gen_range(0.05..0.9), rng.gen_range(0.05..0.9));
        let kw = noise_clip(&mut rng, 16_000, ka);
        let bg = noise_clip(&mut rng, 32_000, ba);
        let k = params.sample_k(&mut rng);
        let out = synthesize(&kw, &bg, k, &params)?;
        let pre = compose(&kw, &bg, k, &params, &windows)?;
        if out.clip.len() != 32_000 || pre.len() != 32_000 {
            return Ok(outcome(false, format!("case {case}: length {}", out.clip.len())));
        }
        for i in (0..k).chain(k + 20_000..32_000) {
            if out.clip.samples()[i].to_bits() != bg.samples()[i].to_bits() {
                outside_ok = false;
            }
        }
        for j in 0..16_000 {
            let i = k + 2_000 + j;
            let residual = pre[i] - f64::from(bg.samples()[i]) * bg_core[j];
            let expect = f64::from(kw.samples()[j]) * kw_ref[j];
            worst = worst.max((residual - expect).abs());
        }
    }
    Ok(outcome(
        outside_ok && worst <= 1e-6,
        format!("200 cases, outside carve bit-equal: {outside_ok}, max residual err {worst:.1e}"),
    ))
}

fn frontend_shape() -> Result<Outcome> {
    let mfcc = Mfcc::new(FrontendConfig::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let two = mfcc.compute(&noise_clip(&mut rng, 32_000, 0.5))?;
    let short = mfcc.compute(&noise_clip(&mut rng, 20_000, 0.5))?;
    let hop = 160;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let len = rng.gen_range(8_000..32_000);
        let amp = rng.gen_range(0.01..0.9);
        let clip = noise_clip(&mut rng, len, amp);
        let shifted = clip.slice(hop, len - hop)?;
        let a = mfcc.compute(&clip)?;
        let b = mfcc.compute(&shifted)?;
        for t in 0..b.n_frames() {
            for (x, y) in a.row(t + 1).iter().zip(b.row(t)) {
                worst = worst.max(f64::from((x - y).abs()));
            }
        }
    }
    let shapes = (two.n_frames(), two.n_coeffs(), short.n_frames(), short.n_coeffs());
    Ok(outcome(
        shapes == (198, 40, 123, 40) && worst <= 1e-6,
        format!(
            "2 s -> {}x{}, 1.25 s -> {}x{}, hop-shift max err {worst:.1e} over 50 clips",
            shapes.0, shapes.1, shapes.2, shapes.3
        ),
    ))
}

fn spec_augment_invariants() -> Result<Outcome> {
    let policy = MaskPolicy::default();
    let (frames, coeffs) = (198, 40);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut freq_hits, mut time_hits) = (0usize, 0usize);
    let mut ok = true;
    for _ in 0..1000 {
        let v: Vec<f32> = (0..frames * coeffs).map(|_| rng.gen_range(-30.0..30.0)).collect();
        let fm = FeatureMap::new(v, frames, coeffs)?;
        let (out, draw) = spec_augment(&fm, &policy, &mut rng)?;
        let fb = draw.freq.map(|b| b.start..b.start + b.width);
        let tb = draw.time.map(|b| b.start..b.start + b.width);
        freq_hits += usize::from(fb.is_some());
        time_hits += usize::from(tb.is_some());
        ok &= draw.freq.map_or(true, |b| b.width <= 5 && b.start + b.width <= coeffs);
        ok &= draw.time.map_or(true, |b| b.width <= 8 && b.start + b.width <= frames);
        for t in 0..frames {
            for c in 0..coeffs {
                let masked = fb.as_ref().is_some_and(|r| r.contains(&c)) || tb.as_ref().is_some_and(|r| r.contains(&t));
                let (x, y) = (fm.row(t)[c], out.row(t)[c]);
                ok &= if masked { y == 0.0 } else { x.to_bits() == y.to_bits() };
            }
        }
    }
    let (rf, rt) = (freq_hits as f64 / 1000.0, time_hits as f64 / 1000.0);
    let rates_ok = (0.45..=0.55).contains(&rf) && (0.45..=0.55).contains(&rt);
    Ok(outcome(
        ok && rates_ok,
        format!("1000 draws, bounds and unmasked cells ok: {ok}, rates freq {rf:.3} time {rt:.3}"),
    ))
}

fn energy_probs(w: &AudioClip) -> Vec<f64> {
    let e = w.energy();
    let p = e / (e + 50.0);
    let mut v = vec![(1.0 - p) / 19.0; 20];
    v[0] = p;
    v
}

fn cleaner_oracle() -> Result<Outcome> {
    let cfg = CleanerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    let mut peak_found = 0;
    for _ in 0..100 {
        let len = rng.gen_range(12_000..64_000);
        let mut v: Vec<f32> = (0..len).map(|_| rng.gen_range(-0.01..0.01)).collect();
        let burst = 3_000.min(len);
        let at = rng.gen_range(0..=len - burst);
        for s in &mut v[at..at + burst] {
            *s = rng.gen_range(-0.8..0.8);
        }
        let clip = AudioClip::new(v, SAMPLE_RATE)?;
        let got = slide_best(&clip, &mut |w: &AudioClip| Ok(energy_probs(w)), TargetClass::Index(0), &cfg)?;

        // exhaustive evaluation with independent padding
        let padded: Vec<f32> = if len < cfg.win_len {
            let left = (cfg.win_len - len) / 2;
            let mut p = vec![0.0; left];
            p.extend_from_slice(clip.samples());
            p.resize(cfg.win_len, 0.0);
            p
        } else {
            clip.samples().to_vec()
        };
        let (mut best_off, mut best_p, mut n) = (0, f64::NEG_INFINITY, 0);
        let mut off = 0;
        while off + cfg.win_len <= padded.len() {
            let w = AudioClip::new(padded[off..off + cfg.win_len].to_vec(), SAMPLE_RATE)?;
            let p = energy_probs(&w)[0];
            if p > best_p {
                best_p = p;
                best_off = off;
            }
            n += 1;
            off += cfg.stride;
        }
        let same = got.offset == best_off
            && got.prob == best_p
            && got.evaluated == n
            && got.window.samples() == &padded[best_off..best_off + cfg.win_len];
        mismatches += usize::from(!same);
        let pad = padded.len() - len;
        let burst_start = at + pad / 2 * usize::from(len < cfg.win_len);
        peak_found += usize::from(got.offset <= burst_start && burst_start + burst <= got.offset + cfg.win_len);
    }
    let clip = AudioClip::new(vec![0.1; 24_000], SAMPLE_RATE)?;
    let flat = |p: f64| {
        move |_: &AudioClip| -> Result<Vec<f64>> {
            let mut v = vec![(1.0 - p) / 19.0; 20];
            v[0] = p;
            Ok(v)
        }
    };
    let at = clean_clip(&clip, &mut flat(0.97), TargetClass::Index(0), &cfg)?;
    let above = clean_clip(&clip, &mut flat(0.970_000_001), TargetClass::Index(0), &cfg)?;
    let strict = !at.accepted && above.accepted && above.best.offset == 0;
    Ok(outcome(
        mismatches == 0 && strict,
        format!(
            "100 clips, mismatches {mismatches}, planted peak inside best window {peak_found}/100, strict threshold: {strict}"
        ),
    ))
}

fn scaling_enumeration() -> Result<Outcome> {
    let got = enumerate_candidates(&SearchSpec::default())?;
    // α = a/100, β = b/100; α·β² ∈ [0.047, 0.053] ⇔ a·b² ∈ [47000, 53000]
    let mut oracle = Vec::new();
    for b in 25i64..=60 {
        for a in 25i64..=60 {
            if (47_000..=53_000).contains(&(a * b * b)) {
                oracle.push((a, b));
            }
        }
    }
    let as_pairs: Vec<(i64, i64)> = got
        .iter()
        .map(|c| {
            let h = |d: Decimal| (d.to_f64() * 100.0).round() as i64;
            (h(c.alpha), h(c.beta))
        })
        .collect();
    let exact_grid = got
        .iter()
        .all(|c| c.alpha.to_string().parse::<Decimal>().ok() == Some(c.alpha));
    let base = build_a0();
    let identity = apply_scaling(&base, &ScaleCandidate::new(Decimal::ONE, Decimal::ONE)) == base;
    let delta = got.len() as i64 - 75;
    Ok(outcome(
        as_pairs == oracle && exact_grid && identity,
        format!(
            "{} candidates (oracle {}), delta vs 75: {delta:+}, identity scaling unchanged: {identity}",
            got.len(),
            oracle.len()
        ),
    ))
}

fn parameter_accounting() -> Result<Outcome> {
    let a0 = build_a0();
    let report = param_report(&a0, &ParamConventions::default());
    let total = count_params(&a0);
    let stages: Vec<String> = report.stages.iter().map(|s| format!("{}:{}", s.stage, s.params)).collect();
    let rel = (total as f64 - REFERENCE_PARAMS as f64) / REFERENCE_PARAMS as f64;
    let within = rel.abs() <= 0.10;
    let toggles = toggle_report(&a0, REFERENCE_PARAMS);
    let emitted = !toggles.conventions.is_empty();
    let nearest = toggles
        .conventions
        .iter()
        .chain(&toggles.one_layer_fewer)
        .min_by_key(|r| r.delta.abs())
        .map(|r| format!("{} = {}", r.label, r.total))
        .unwrap_or_default();
    let flops = count_flops(&a0, (198, 40));
    Ok(outcome(
        within && (total == REFERENCE_PARAMS || emitted) && report.stages.iter().map(|s| s.params).sum::<u64>() == total,
        format!(
            "params {total} vs {REFERENCE_PARAMS} ({:+.1}%, need within 10%), stages [{}], toggle report emitted ({} rows, nearest: {nearest}); MACs {}, 2xMACs {} vs {REFERENCE_FLOPS}",
            100.0 * rel,
            stages.join(" "),
            toggles.conventions.len() + toggles.one_layer_fewer.len(),
            flops.macs,
            flops.flops
        ),
    ))
}

fn inference_sanity() -> Result<Outcome> {
    let a0 = build_a0();
    let ws = WeightSet::init_seeded(&a0, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    let mut finite = true;
    for i in 0..20 {
        let frames = if i % 2 == 0 { 198 } else { 123 };
        let v: Vec<f32> = (0..frames * 40).map(|_| rng.gen_range(-20.0..20.0)).collect();
        let p = forward(&a0, &ws, &FeatureMap::new(v, frames, 40)?)?;
        finite &= p.len() == 20 && p.iter().all(|x| x.is_finite() && *x >= 0.0);
        worst = worst.max((p.iter().sum::<f64>() - 1.0).abs());
    }
    let mut zero = ws.clone();
    zero.get_mut("classifier.weight")?.data.fill(0.0);
    zero.get_mut("classifier.bias")?.data.fill(0.0);
    let v: Vec<f32> = (0..198 * 40).map(|_| rng.gen_range(-20.0..20.0)).collect();
    let p = forward(&a0, &zero, &FeatureMap::new(v, 198, 40)?)?;
    let uniform = p.iter().all(|x| (x - 0.05).abs() < 1e-12);
    Ok(outcome(
        finite && worst <= 1e-6 && uniform,
        format!("20 inputs, max |sum-1| {worst:.1e}, finite: {finite}, zero classifier uniform: {uniform}"),
    ))
}

fn loss_gradient() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let h = 1e-4;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let z: Vec<f64> = (0..20).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let w = ClassWeights::new((0..20).map(|_| rng.gen_range(0.2..3.0)).collect())?;
        let label = rng.gen_range(0..20);
        let g = xent_grad(&z, label, &w)?;
        let mut num = Vec::with_capacity(20);
        for i in 0..20 {
            let (mut up, mut dn) = (z.clone(), z.clone());
            up[i] += h;
            dn[i] -= h;
            num.push((weighted_xent(&up, label, &w)? - weighted_xent(&dn, label, &w)?) / (2.0 * h));
        }
        let diff: f64 = g.iter().zip(&num).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = g.iter().map(|a| a * a).sum::<f64>().sqrt().max(num.iter().map(|a| a * a).sum::<f64>().sqrt());
        worst = worst.max(diff / scale);
    }
    let uniform = weighted_xent(&[0.7; 20], 11, &ClassWeights::uniform(20))?;
    let err = (uniform - LN_20).abs();
    Ok(outcome(
        worst <= 1e-5 && err <= 1e-9,
        format!("100 trials, max relative error {worst:.1e}; uniform loss {uniform:.12} (err {err:.1e})"),
    ))
}

fn dataset_bookkeeping() -> Result<Outcome> {
    let m = Manifest::from_reference();
    let r = validate_counts(&m);
    let totals = (
        r.split(Split::Train).total,
        r.split(Split::Test).total,
        r.split(Split::Css).total,
    );
    let per_test = r.split(Split::Test).classes.iter().all(|c| c.actual == 300);
    let round_trip = Manifest::parse(&m.to_csv())?.to_csv() == m.to_csv();
    Ok(outcome(
        r.all_zero() && totals == (24_435, 6_000, 1_002) && per_test && round_trip,
        format!(
            "all deltas zero: {}, totals {}/{}/{}, 300 per test class: {per_test}",
            r.all_zero(),
            totals.0,
            totals.1,
            totals.2
        ),
    ))
}

fn write_inputs(root: &Path) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..10 {
        let len = 18_000 + 500 * i;
        let f = 0.02 + 0.01 * i as f32;
        let v: Vec<f32> = (0..len)
            .map(|t| 0.4 * (t as f32 * f).sin() * (std::f32::consts::PI * t as f32 / len as f32).sin())
            .collect();
        let dir = root.join("kw").join(if i % 2 == 0 { "goal" } else { "out" });
        std::fs::create_dir_all(&dir).unwrap();
        save_wav(&AudioClip::new(v, SAMPLE_RATE)?, dir.join(format!("{i}.wav")))?;
    }
    std::fs::create_dir_all(root.join("bg")).unwrap();
    for i in 0..3 {
        save_wav(&noise_clip(&mut rng, 40_000 + 1000 * i, 0.2), root.join("bg").join(format!("{i}.wav")))?;
    }
    Ok(())
}

fn run_pipeline(root: &Path) -> std::result::Result<(), String> {
    let bin = env!("CARGO_BIN_EXE_kwskit");
    let steps: [&[&str]; 3] = [
        &["synth", "--keywords", "kw", "--backgrounds", "bg", "--out", "css", "--count", "50"],
        &["features", "--in", "css", "--out", "feats"],
        &["infer", "--in", "feats", "--out", "probs.jsonl"],
    ];
    for args in steps {
        let out = Command::new(bin)
            .args(args)
            .args(["--seed", "7"])
            .current_dir(root)
            .env("SOURCE_DATE_EPOCH", "1700000000")
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
        }
    }
    Ok(())
}

fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    files
}

fn end_to_end() -> Result<Outcome> {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        write_inputs(d)?;
        if let Err(e) = run_pipeline(d) {
            return Ok(outcome(false, e));
        }
    }
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    let wavs = sa.keys().filter(|p| p.starts_with("css") && p.extension().is_some_and(|e| e == "wav")).count();
    let logs = sa.keys().filter(|p| p.to_string_lossy().contains("runlog")).count();
    Ok(outcome(
        sa == sb && wavs == 50 && logs == 3,
        format!(
            "{} files compared, byte-identical: {}, {wavs} samples, {logs} run-logs",
            sa.len(),
            sa == sb
        ),
    ))
}

type Check = fn() -> Result<Outcome>;

fn main() {
    let checks: [(&str, Check, Duration); 11] = [
        ("window oracle", window_oracle, Duration::from_secs(1)),
        ("CSSM exactness", cssm_exactness, Duration::from_secs(10)),
        ("frontend shape", frontend_shape, Duration::from_secs(30)),
        ("SpecAugment invariants", spec_augment_invariants, Duration::from_secs(10)),
        ("cleaner oracle", cleaner_oracle, Duration::from_secs(30)),
        ("scaling enumeration", scaling_enumeration, Duration::from_secs(1)),
        ("parameter accounting", parameter_accounting, Duration::from_secs(1)),
        ("inference sanity", inference_sanity, Duration::from_secs(30)),
        ("loss gradient", loss_gradient, Duration::from_secs(5)),
        ("dataset bookkeeping", dataset_bookkeeping, Duration::from_secs(1)),
        ("end-to-end determinism", end_to_end, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in checks.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && took <= *budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!(
            "[{}] {:>2} {name}: {detail} ({:.2} s, budget {} s)",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
