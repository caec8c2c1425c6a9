//! Straightforward reference implementations used to cross-check the
//! library. They favour obviousness over speed.

use std::collections::BTreeMap;

pub fn cos(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Every pool row scored, sorted by cosine descending then index
/// ascending, truncated to k.
pub fn knn(query: &[f64], pool: &[Vec<f64>], k: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = pool.iter().enumerate().map(|(j, v)| (j, cos(query, v))).collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

fn mean(v: &[(usize, f64)]) -> f64 {
    v.iter().map(|x| x.1).sum::<f64>() / v.len() as f64
}

/// Ratio margin of src row `i` against tgt row `j`.
pub fn margin(i: usize, j: usize, src: &[Vec<f64>], tgt: &[Vec<f64>], k: usize) -> f64 {
    let fwd = mean(&knn(&src[i], tgt, k));
    let bwd = mean(&knn(&tgt[j], src, k));
    cos(&src[i], &tgt[j]) / (fwd / 2.0 + bwd / 2.0)
}

/// Nearest-target mining: (src, tgt, cos) for every source whose best
/// target reaches `threshold` and wins that target (highest cosine, then
/// lowest source index).
pub fn mine(src: &[Vec<f64>], tgt: &[Vec<f64>], threshold: f64) -> Vec<(usize, usize, f64)> {
    let mut winners: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    for (i, s) in src.iter().enumerate() {
        let (j, c) = knn(s, tgt, 1)[0];
        if c < threshold {
            continue;
        }
        let better = match winners.get(&j) {
            None => true,
            Some(&(pi, pc)) => c > pc || (c == pc && i < pi),
        };
        if better {
            winners.insert(j, (i, c));
        }
    }
    let mut out: Vec<(usize, usize, f64)> = winners.into_iter().map(|(j, (i, c))| (i, j, c)).collect();
    out.sort_by_key(|x| x.0);
    out
}

fn ngrams(tokens: &[String], n: usize) -> BTreeMap<String, i64> {
    let mut m = BTreeMap::new();
    if tokens.len() >= n {
        for i in 0..=tokens.len() - n {
            *m.entry(tokens[i..i + n].join("\u{1}")).or_insert(0) += 1;
        }
    }
    m
}

/// Corpus BLEU-4: clipped counts summed over the corpus; orders without
/// hypothesis n-grams are skipped; optional add-one for zero matches at
/// n >= 2.
pub fn bleu(hyps: &[Vec<String>], refs: &[Vec<String>], add1: bool) -> f64 {
    let mut matched = [0i64; 4];
    let mut total = [0i64; 4];
    let (mut c, mut r) = (0usize, 0usize);
    for (h, rf) in hyps.iter().zip(refs) {
        c += h.len();
        r += rf.len();
        for n in 1..=4 {
            let rc = ngrams(rf, n);
            for (g, cnt) in ngrams(h, n) {
                total[n - 1] += cnt;
                matched[n - 1] += cnt.min(*rc.get(&g).unwrap_or(&0));
            }
        }
    }
    let mut logs = Vec::new();
    for n in 0..4 {
        if total[n] == 0 {
            continue;
        }
        let p = if matched[n] == 0 && n >= 1 && add1 {
            1.0 / (total[n] + 1) as f64
        } else {
            matched[n] as f64 / total[n] as f64
        };
        if p == 0.0 {
            return 0.0;
        }
        logs.push(p.ln());
    }
    if logs.is_empty() || c == 0 {
        return 0.0;
    }
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    100.0 * bp * (logs.iter().sum::<f64>() / logs.len() as f64).exp()
}
