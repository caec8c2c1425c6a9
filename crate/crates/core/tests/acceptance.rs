//! Acceptance criteria, one line of output each. Runs as its own binary
//! (no libtest harness) so the PASS/FAIL lines are always visible.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use bitext_core::backtranslation::{backtranslate, BacktranslateConfig};
use bitext_core::bleu::{bleu, tokenize_whitespace, Smoothing, TokenStream};
use bitext_core::cleaner::{
    answer_block, clean_corpus, default_few_shots, parse_cleaner_response, render_cleaner_prompt, CleanerConfig,
    CleanerVerdict, ReplayChatBackend, ResponseCache,
};
use bitext_core::heuristics::{run_heuristics, HeuristicConfig};
use bitext_core::margin::{filter_by_margin, knn, margin_score, mine_pairs, EmbeddingTable, MineConfig};
use bitext_core::pipeline::{run_pipeline, RunOptions};
use bitext_core::sft::{emit_sft, expand_directions, render_translation_prompt, Direction, SftRecord};
use bitext_core::{split_dataset, LanguageRegistry, Sentence, SentencePair, Status};
use common::oracles;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reg() -> LanguageRegistry {
    LanguageRegistry::default()
}

fn pair(id: u64, src: &str, sl: &str, tgt: &str, tl: &str) -> SentencePair {
    let r = reg();
    SentencePair::new(
        id,
        src,
        r.get(sl).unwrap().clone(),
        tgt,
        r.get(tl).unwrap().clone(),
        "fixture",
    )
    .unwrap()
}

fn within(limit: Duration, start: Instant) {
    let took = start.elapsed();
    assert!(took < limit, "took {took:?}, limit {limit:?}");
}

fn criterion_1() {
    let start = Instant::now();
    let long_src = format!("{}abcdefghij", "abcdefghi ".repeat(49));
    let long_tgt = format!("{}jihgfedcba", "ihgfedcba ".repeat(49));
    assert_eq!(long_src.chars().count(), 500);
    let mut pairs = vec![
        pair(0, "Abcdefghij klmn", "en", "Opqrstuvwx yzab", "ban"),
        pair(1, &long_src, "en", &long_tgt, "ban"),
        pair(
            2,
            "The cat sat down.",
            "en",
            "Meong punika negak ring natar sane linggah pisan.",
            "ban",
        ),
        pair(
            3,
            "abcdefghijklmnopqrst words here",
            "en",
            "basa bali sane becik",
            "ban",
        ),
        pair(4, "Abcd, efgh, ijklm, nop.", "en", "Siki kalih telu papat.", "ban"),
    ];
    for i in 5..15u64 {
        pairs.push(pair(
            i,
            &format!("Sentence number {i} is right here."),
            "en",
            &format!("Lengkara kaping {i} wenten iriki."),
            "ban",
        ));
    }
    pairs.extend([
        pair(
            15,
            "  Sentence   number 5 is right here. ",
            "en",
            "Lengkara kaping 5  wenten iriki.",
            "ban",
        ),
        pair(16, "A perfectly ordinary sentence.", "en", "Becik.", "ban"),
        pair(
            17,
            "The dog ran away.",
            "en",
            "Asu punika malaib joh pisan saking umah sane linggah.",
            "ban",
        ),
        pair(18, "abcdefghijklmnopqrstu is long", "en", "basa bali sane becik", "ban"),
        pair(
            19,
            "Temple 123 in village 4567 great",
            "en",
            "Pura ring desa luwih pisan",
            "ban",
        ),
    ]);
    let cfg = HeuristicConfig::default();
    let (kept, report) = run_heuristics(pairs, &cfg);
    let ids: Vec<u64> = kept.iter().map(|p| p.id).collect();
    assert_eq!(ids, (0..15).collect::<Vec<_>>());
    let labels: BTreeMap<u64, (String, String)> = report
        .rejections
        .iter()
        .map(|r| (r.pair_id, (r.stage.clone(), r.reason.clone())))
        .collect();
    let expected: BTreeMap<u64, (String, String)> = [
        (15, ("dedup", "duplicate")),
        (16, ("length", "too_short")),
        (17, ("length_ratio", "length_ratio")),
        (18, ("word_length", "long_word")),
        (19, ("punct_digit", "digits")),
    ]
    .into_iter()
    .map(|(id, (s, r))| (id, (s.to_string(), r.to_string())))
    .collect();
    assert_eq!(labels, expected);
    let (again, second) = run_heuristics(kept.clone(), &cfg);
    assert_eq!(second.rejected_total(), 0);
    assert_eq!(again, kept);
    within(Duration::from_secs(1), start);
}

fn random_rows(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

fn criterion_2() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let src = random_rows(&mut rng, 200, 32);
    let mut tgt = random_rows(&mut rng, 200, 32);
    // identical rows force exact cosine ties in the target pool
    for i in 11..16 {
        tgt[i] = tgt[10].clone();
    }
    let st = EmbeddingTable::from_rows(src.clone()).unwrap();
    let tt = EmbeddingTable::from_rows(tgt.clone()).unwrap();
    for i in 0..200 {
        let got = margin_score(i, i, &st, &tt, 3).unwrap().value.unwrap();
        let want = oracles::margin(i, i, &src, &tgt, 3);
        assert!((got - want).abs() <= 1e-6, "pair {i}: {got} vs {want}");
        let fwd: Vec<usize> = knn(i, &st, &tt, 3).unwrap().neighbors.iter().map(|n| n.id).collect();
        let bwd: Vec<usize> = knn(i, &tt, &st, 3).unwrap().neighbors.iter().map(|n| n.id).collect();
        let ofwd: Vec<usize> = oracles::knn(&src[i], &tgt, 3).iter().map(|n| n.0).collect();
        let obwd: Vec<usize> = oracles::knn(&tgt[i], &src, 3).iter().map(|n| n.0).collect();
        assert_eq!(fwd, ofwd, "forward kNN of {i}");
        assert_eq!(bwd, obwd, "backward kNN of {i}");
    }
    // a query equal to the duplicated rows ranks them by index
    let q = EmbeddingTable::from_rows(vec![tgt[10].clone()]).unwrap();
    let ids: Vec<usize> = knn(0, &q, &tt, 3).unwrap().neighbors.iter().map(|n| n.id).collect();
    assert_eq!(ids, [10, 11, 12]);
    within(Duration::from_secs(10), start);
}

fn criterion_3() {
    let same: Vec<Vec<f64>> = vec![vec![0.6, 0.8]; 10];
    let t = EmbeddingTable::from_rows(same).unwrap();
    for i in 0..10 {
        let s = margin_score(i, (i + 3) % 10, &t, &t, 3).unwrap().value.unwrap();
        assert!((s - 1.0).abs() <= 1e-9, "identical pools: {s}");
    }
    let basis: Vec<Vec<f64>> = (0..4)
        .map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let b = EmbeddingTable::from_rows(basis).unwrap();
    for i in 0..4 {
        let s = margin_score(i, i, &b, &b, 3).unwrap().value.unwrap();
        assert!((s - 3.0).abs() <= 1e-9, "orthogonal: {s}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let src = random_rows(&mut rng, 60, 16);
    let tgt = random_rows(&mut rng, 60, 16);
    let scale = |rows: &[Vec<f64>], rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| {
                let f = rng.gen_range(0.01..100.0);
                r.iter().map(|v| v * f).collect()
            })
            .collect()
    };
    let (a_s, a_t) = (
        EmbeddingTable::from_rows(src.clone()).unwrap(),
        EmbeddingTable::from_rows(tgt.clone()).unwrap(),
    );
    let (b_s, b_t) = (
        EmbeddingTable::from_rows(scale(&src, &mut rng)).unwrap(),
        EmbeddingTable::from_rows(scale(&tgt, &mut rng)).unwrap(),
    );
    for i in 0..60 {
        let x = margin_score(i, i, &a_s, &a_t, 3).unwrap().value.unwrap();
        let y = margin_score(i, i, &b_s, &b_t, 3).unwrap().value.unwrap();
        assert!((x - y).abs() <= 1e-9, "scaling changed pair {i}: {x} vs {y}");
    }
}

fn criterion_4() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut near_threshold = 0;
    for trial in 0..40 {
        let n = rng.gen_range(5..=50);
        let dim = rng.gen_range(3..10);
        let src = random_rows(&mut rng, n, dim);
        let tgt: Vec<Vec<f64>> = src
            .iter()
            .map(|x| {
                let sigma = rng.gen_range(0.0..1.5);
                x.iter().map(|v| v + sigma * rng.gen_range(-1.0..1.0)).collect()
            })
            .collect();
        let pairs: Vec<SentencePair> = (0..n as u64).map(|i| pair(i, "a b", "en", "c d", "ban")).collect();
        let st = EmbeddingTable::from_rows(src.clone()).unwrap();
        let tt = EmbeddingTable::from_rows(tgt.clone()).unwrap();
        let (kept, _) = filter_by_margin(pairs, &st, &tt, 1.09, 3).unwrap();
        let kept: BTreeSet<u64> = kept.iter().map(|p| p.id).collect();
        for i in 0..n {
            let s = oracles::margin(i, i, &src, &tgt, 3);
            if (s - 1.09).abs() < 1e-9 {
                near_threshold += 1;
                continue;
            }
            assert_eq!(
                kept.contains(&(i as u64)),
                s >= 1.09,
                "trial {trial} pair {i}: oracle score {s}"
            );
        }

        // mining over unrelated pools of different sizes
        let m = rng.gen_range(3..=50);
        let tgt_pool: Vec<Vec<f64>> = (0..m)
            .map(|j| {
                if j < n && rng.gen_bool(0.6) {
                    src[j].iter().map(|v| v + 0.3 * rng.gen_range(-1.0..1.0)).collect()
                } else {
                    (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
                }
            })
            .collect();
        let ssent: Vec<Sentence> = (0..n)
            .map(|i| Sentence::new(i as u64, format!("s{i}"), reg().get("en").unwrap().clone(), "d"))
            .collect();
        let tsent: Vec<Sentence> = (0..m)
            .map(|j| Sentence::new(j as u64, format!("t{j}"), reg().get("ban").unwrap().clone(), "d"))
            .collect();
        let mined = mine_pairs(
            &ssent,
            &st,
            &tsent,
            &EmbeddingTable::from_rows(tgt_pool.clone()).unwrap(),
            &MineConfig::default(),
        )
        .unwrap();
        let got: Vec<(usize, usize)> = mined
            .iter()
            .map(|p| (p.src.text[1..].parse().unwrap(), p.tgt.text[1..].parse().unwrap()))
            .collect();
        let want: Vec<(usize, usize)> = oracles::mine(&src, &tgt_pool, 0.7).iter().map(|x| (x.0, x.1)).collect();
        assert_eq!(got, want, "mining trial {trial}");
        let targets: BTreeSet<usize> = got.iter().map(|x| x.1).collect();
        assert_eq!(targets.len(), got.len(), "targets must be injective");
        assert!(mined.iter().all(|p| p.scores["mine_cos"] >= 0.7));
    }
    assert_eq!(
        near_threshold, 0,
        "random data landed on the threshold; pick another seed"
    );
}

fn criterion_5() {
    let astaire = pair(
        0,
        "Astaire continued to act in the 1970s.",
        "en",
        "Astaire sasai maakting ring warsa 1970-an.",
        "ban",
    );
    let rec = render_translation_prompt(&astaire, &Direction::new("en", "ban")).unwrap();
    assert_eq!(rec.text(), include_str!("golden/translation_prompt_astaire.txt"));
    let examples = vec![
        pair(
            0,
            "Dengan harga yang bisa dibilang menengah, apa saja yang ditwarkannya?",
            "id",
            "Suratan puniki nénten indik Kabupatén miwah kota ring Kepulauan Riau.",
            "ban",
        ),
        pair(
            1,
            "Bahasa daerah memiliki karakteristik yang unik.",
            "id",
            "(32:2) Basa daerah madue \"karakteristik\" sane soleh.",
            "ban",
        ),
    ];
    let prompt = render_cleaner_prompt(&examples, &default_few_shots()).unwrap();
    assert_eq!(prompt, include_str!("golden/cleaner_prompt_few_shot.txt"));
}

fn random_sentence(rng: &mut ChaCha8Rng) -> String {
    const WORDS: [&str; 12] = [
        "basa",
        "daerah",
        "(32:2)",
        "\"unik\"",
        "Kabupatén",
        "ring",
        "sane",
        "yang",
        "memiliki",
        "kota,",
        "apa?",
        "1970-an.",
    ];
    let n = rng.gen_range(1..10);
    (0..n)
        .map(|_| WORDS[rng.gen_range(0..WORDS.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

fn criterion_6() {
    let examples = vec![
        pair(
            0,
            "Dengan harga yang bisa dibilang menengah, apa saja yang ditwarkannya?",
            "id",
            "Suratan puniki nénten indik Kabupatén miwah kota ring Kepulauan Riau.",
            "ban",
        ),
        pair(
            1,
            "Bahasa daerah memiliki karakteristik yang unik.",
            "id",
            "(32:2) Basa daerah madue \"karakteristik\" sane soleh.",
            "ban",
        ),
    ];
    let mut replay = ReplayChatBackend::new();
    replay.insert(
        include_str!("golden/cleaner_prompt_few_shot.txt"),
        include_str!("golden/cleaner_response_few_shot.txt"),
    );
    let (kept, report) = clean_corpus(
        examples,
        &replay,
        &ResponseCache::in_memory(),
        &default_few_shots(),
        &CleanerConfig::default(),
    );
    assert_eq!(report.rejections.len(), 1);
    assert_eq!(
        (report.rejections[0].pair_id, report.rejections[0].reason.as_str()),
        (0, "cleaner_misaligned")
    );
    assert_eq!(kept.len(), 1);
    assert_eq!(kept[0].src.text, "Bahasa daerah memiliki karakteristik yang unik.");
    assert_eq!(kept[0].tgt.text, "Basa daerah madue karakteristik sane soleh.");

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let n = rng.gen_range(1..=8);
        let batch: Vec<SentencePair> = (0..n)
            .map(|i| pair(i, &random_sentence(&mut rng), "id", &random_sentence(&mut rng), "ban"))
            .collect();
        let verdicts: Vec<CleanerVerdict> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.4) {
                    CleanerVerdict::misaligned()
                } else {
                    CleanerVerdict::aligned(random_sentence(&mut rng), random_sentence(&mut rng))
                }
            })
            .collect();
        let prompt = render_cleaner_prompt(&batch, &default_few_shots()).unwrap();
        assert_eq!(common::batch_lines(&prompt).len(), batch.len());
        let response = verdicts
            .iter()
            .map(|v| answer_block(v, "Indonesian", "Balinese"))
            .collect::<Vec<_>>()
            .join("\n\n");
        assert_eq!(parse_cleaner_response(&response, &batch).unwrap(), verdicts);
    }
}

fn criterion_7() {
    let start = Instant::now();
    let h = tokenize_whitespace(&["the cat sat on the mat", "a quick brown fox jumps", "x"]);
    let same = bleu(&h, &h, 4, Smoothing::None).unwrap();
    assert_eq!(same.score, 100.0);
    let b = bleu(
        &tokenize_whitespace(&["the the the the"]),
        &tokenize_whitespace(&["the cat sat down"]),
        4,
        Smoothing::None,
    )
    .unwrap();
    assert_eq!(b.precisions[0], 0.25);
    assert_eq!(b.score, 0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let vocab: Vec<String> = (0..8).map(|i| format!("w{i}")).collect();
    for corpus in 0..50 {
        let segs = rng.gen_range(1..20);
        let mut hyp = Vec::new();
        let mut refs = Vec::new();
        for _ in 0..segs {
            let len = rng.gen_range(1..25);
            let r: Vec<String> = (0..len).map(|_| vocab[rng.gen_range(0..vocab.len())].clone()).collect();
            let mut h = Vec::new();
            for t in &r {
                if !rng.gen_bool(0.85) {
                    continue;
                }
                h.push(if rng.gen_bool(0.2) {
                    vocab[rng.gen_range(0..vocab.len())].clone()
                } else {
                    t.clone()
                });
            }
            if rng.gen_bool(0.3) {
                h.push(vocab[rng.gen_range(0..vocab.len())].clone());
            }
            hyp.push(h);
            refs.push(r);
        }
        let stream = |s: Vec<Vec<String>>| TokenStream {
            tokenizer_id: "whitespace".into(),
            segments: s,
        };
        for (smoothing, add1) in [(Smoothing::None, false), (Smoothing::Add1ForNGe2, true)] {
            let got = bleu(&stream(hyp.clone()), &stream(refs.clone()), 4, smoothing)
                .unwrap()
                .score;
            let want = oracles::bleu(&hyp, &refs, add1);
            assert!(
                (got - want).abs() <= 0.1,
                "corpus {corpus} ({smoothing}): {got} vs {want}"
            );
        }
    }
    within(Duration::from_secs(5), start);
}

fn criterion_8() {
    let pairs: Vec<SentencePair> = (0..1000u64)
        .map(|i| pair(i, &format!("source {i}"), "en", &format!("target {i}"), "min"))
        .collect();
    let a = split_dataset(&pairs, 42).unwrap();
    let b = split_dataset(&pairs, 42).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.sizes(), (900, 50, 50));
    assert!(a.train.is_disjoint(&a.validation) && a.train.is_disjoint(&a.test) && a.validation.is_disjoint(&a.test));
    let all: BTreeSet<u64> = a.train.iter().chain(&a.validation).chain(&a.test).copied().collect();
    assert_eq!(all, (0..1000).collect());

    let dir = tempfile::tempdir().unwrap();
    let records = expand_directions(&pairs).unwrap();
    let summary = emit_sft(&records, &a, dir.path()).unwrap();
    assert_eq!((summary.train, summary.validation, summary.test), (1800, 100, 100));
    let mut seen: BTreeMap<u64, BTreeSet<&str>> = BTreeMap::new();
    let mut count: BTreeMap<u64, usize> = BTreeMap::new();
    for name in ["train", "validation", "test"] {
        let text = fs::read_to_string(dir.path().join(format!("{name}.jsonl"))).unwrap();
        for line in text.lines() {
            let r: SftRecord = serde_json::from_str(line).unwrap();
            seen.entry(r.pair_id).or_default().insert(name);
            *count.entry(r.pair_id).or_default() += 1;
        }
    }
    assert_eq!(seen.len(), 1000);
    assert!(seen.values().all(|s| s.len() == 1), "a pair straddles splits");
    assert!(count.values().all(|&c| c == 2));
}

fn criterion_9() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let cfg = common::write_fixture(dir.path());
        let out = run_pipeline(&cfg, &common::fixture_backends(&cfg), &RunOptions::default()).unwrap();
        let files: Vec<_> = common::read_tree(&cfg.output.dir)
            .into_iter()
            .filter(|(p, _)| !p.ends_with("checkpoint.json") && !p.ends_with("cleaner_cache.jsonl"))
            .collect();
        (out, files, dir)
    };
    let (a, fa, _da) = run();
    let (b, fb, _db) = run();
    assert!(fa.len() >= 10, "expected the full set of outputs, got {}", fa.len());
    assert_eq!(
        fa.iter().map(|f| &f.0).collect::<Vec<_>>(),
        fb.iter().map(|f| &f.0).collect::<Vec<_>>()
    );
    for ((path, x), (_, y)) in fa.iter().zip(&fb) {
        assert!(x == y, "{} differs between runs", path.display());
    }
    assert_eq!(a.corpus, b.corpus);
    assert!(a.stats.telescopes());
    assert!(a.report.is_consistent());
    let t = &a.stats.table;
    for c in 0..t.lang_pairs.len() {
        let before: usize = t.rows.iter().map(|r| r.cells[c].0).sum();
        let after: usize = t.rows.iter().map(|r| r.cells[c].1).sum();
        assert_eq!(t.total[c], (before, after));
    }
    let inputs = a.report.stages[0].added + a.report.stages.iter().skip(1).map(|s| s.added).sum::<usize>();
    assert_eq!(a.corpus.len() + a.report.rejections.len(), inputs);
}

fn criterion_10() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let r = reg();
    let mut synthetic = Vec::new();
    let mut next = 0u64;
    while synthetic.len() < 500 {
        let mono_lang = ["ban", "min"][rng.gen_range(0..2)];
        let src_lang = ["en", "id"][rng.gen_range(0..2)];
        let n = rng.gen_range(1..40).min(500 - synthetic.len());
        let mono: Vec<Sentence> = (0..n)
            .map(|_| {
                next += 1;
                Sentence::new(
                    next,
                    random_sentence(&mut rng),
                    r.get(mono_lang).unwrap().clone(),
                    "mono",
                )
            })
            .collect();
        let (pairs, _) = backtranslate(
            &mono,
            &common::ReverseTranslator,
            r.get(src_lang).unwrap(),
            &BacktranslateConfig::default(),
        )
        .unwrap();
        synthetic.extend(pairs);
    }
    let authentic: Vec<SentencePair> = (0..50u64)
        .map(|i| pair(10_000 + i, &format!("source {i}"), "en", &format!("target {i}"), "ban"))
        .collect();
    let mut all = authentic;
    all.extend(synthetic.iter().cloned());
    let records = expand_directions(&all).unwrap();
    assert_eq!(records.len(), 50 * 2 + 500);
    let by_id: BTreeMap<u64, &SentencePair> = synthetic.iter().map(|p| (p.id, p)).collect();
    let mut counterexamples = 0;
    let mut checked = 0;
    for rec in records.iter().filter(|r| r.synthetic) {
        let p = by_id[&rec.pair_id];
        let Status::Synthetic { from, to } = &p.status else {
            panic!("not synthetic")
        };
        let ok = rec.direction == format!("{to}-{from}")
            && rec
                .prompt
                .contains(&format!("\n{}: {}\n", p.src.lang.display_name(), p.src.text))
            && rec.completion == format!(" {}", p.tgt.text)
            && p.tgt.lang.code() == from;
        if !ok {
            counterexamples += 1;
        }
        checked += 1;
    }
    assert_eq!(checked, 500);
    assert_eq!(counterexamples, 0);
}

fn main() {
    let criteria: [(&str, fn()); 10] = [
        ("heuristic suite", criterion_1),
        ("margin oracle", criterion_2),
        ("margin analytics", criterion_3),
        ("threshold semantics", criterion_4),
        ("prompt golden files", criterion_5),
        ("cleaner round-trip", criterion_6),
        ("BLEU", criterion_7),
        ("split", criterion_8),
        ("end-to-end determinism", criterion_9),
        ("backtranslation orientation", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check));
        let ms = start.elapsed().as_millis();
        match outcome {
            Ok(()) => println!("criterion {:>2} {name}: PASS ({ms} ms)", i + 1),
            Err(_) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({ms} ms)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
