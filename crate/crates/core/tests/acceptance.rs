//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits nonzero if any fails.

mod common;

use std::collections::{HashMap, HashSet};
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_rational::Ratio;
use permacc::analysis::{bleu, build_signature_table, minitree_overlap, signature_ratio, BleuConfig, TaggedSentence, Upos};
use permacc::corpus::{Dataset, Label, TokenSeq};
use permacc::manifest::{permute_dataset, RunManifest};
use permacc::metrics::{build_outcomes, compute_report, ExampleOutcome, Fraction, MetricsConfig, MetricsReport};
use permacc::model::{make_model_a, make_model_b, train_bow, ModelHandle, NliModel, PairInput, Prediction};
use permacc::permute::records::PermutedRecord;
use permacc::permute::{clumped_permute, derangement_capacity, PermutationSpec};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> Result<(), String> {
    ensure(
        elapsed < Duration::from_secs(limit_secs),
        format!("took {elapsed:.2?}, limit {limit_secs} s"),
    )
}

struct Run {
    records: Vec<PermutedRecord>,
    preds: Vec<Prediction>,
    outcomes: Vec<ExampleOutcome>,
    report: MetricsReport,
}

fn run(data: &Dataset, q: usize, min_tokens: usize, model: &ModelHandle) -> Run {
    let (records, _) = permute_dataset(data, &PermutationSpec::new(q, 20210801), min_tokens).unwrap();
    let inputs: Vec<PairInput> = records.iter().map(PairInput::from).collect();
    let preds = model.predict_batch(&inputs).unwrap();
    let outcomes = build_outcomes(&records, &preds).unwrap();
    let report = compute_report(&data.name, &model.model_id(), &outcomes, &MetricsConfig::grid(50)).unwrap();
    Run {
        records,
        preds,
        outcomes,
        report,
    }
}

fn bow_oracle() -> Check {
    let train = common::fixture("train", 3000, 1, 6, 14, 0.7);
    let test = common::fixture("test", 1000, 2, 6, 14, 0.7);
    let model = train_bow(&train, 1.0).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let r = run(&test, 100, 6, &model).report;
    let elapsed = start.elapsed();
    within(elapsed, 5)?;
    ensure(r.examples == 1000, format!("{} examples retained", r.examples))?;
    ensure(r.d_c > 0 && r.d_f > 0, "fixture must have both correct and incorrect originals")?;
    ensure(r.p_c == Some(Fraction::one()), format!("P^c = {:?}", r.p_c))?;
    ensure(r.p_f == Some(Fraction::zero()), format!("P^f = {:?}", r.p_f))?;
    ensure(r.omega_max == r.accuracy, format!("omega_max {} vs accuracy {}", r.omega_max, r.accuracy))?;
    ensure(r.omega_rand == r.accuracy, format!("omega_rand {} vs accuracy {}", r.omega_rand, r.accuracy))?;
    ensure(r.flips.count == 0, format!("{} flips", r.flips.count))?;
    Ok(format!("accuracy {} on 1000 x 100, {elapsed:.2?}", r.accuracy))
}

fn model_a_oracle() -> Check {
    let test = common::fixture("a", 400, 3, 6, 12, 0.7);
    let r = run(&test, 20, 6, &make_model_a());
    for o in &r.outcomes {
        let want = if o.gold == Label::Neutral { Fraction::one() } else { Fraction::zero() };
        ensure(o.pr_correct() == want, format!("{}: pr_correct {}", o.uid, o.pr_correct()))?;
    }
    let neutral = test.examples.iter().filter(|e| e.gold == Label::Neutral).count();
    let base = Fraction::new(neutral as u128, test.len() as u128);
    ensure(r.report.omega_max == base, format!("omega_max {} vs base rate {base}", r.report.omega_max))?;
    Ok(format!("omega_max = neutral base rate = {base}"))
}

/// P(X > k) for X ~ Binomial(n, 1/3), exactly.
fn binomial_tail(n: u64, k: u64) -> f64 {
    let mut total = BigUint::from(0u32);
    let mut choose = BigUint::from(1u32);
    for i in 0..=n {
        if i > k {
            total += &choose * BigUint::from(2u32).pow((n - i) as u32);
        }
        choose = choose * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    let r = Ratio::new(total, BigUint::from(3u32).pow(n as u32));
    num_traits::ToPrimitive::to_f64(&r).unwrap()
}

fn model_b_statistics() -> Check {
    let test = common::fixture("b", 300, 4, 6, 14, 0.7);
    let start = Instant::now();
    let r = run(&test, 100, 6, &make_model_b(7)).report;
    let elapsed = start.elapsed();
    within(elapsed, 30)?;
    ensure(r.examples == 300, format!("{} examples", r.examples))?;
    let (p_c, p_f) = (r.p_c.unwrap().to_f64(), r.p_f.unwrap().to_f64());
    // Each side is a mean of Binomial(100, 1/3) / 100 draws: sd sqrt(2/9 / (100 m)).
    let third = 1.0 / 3.0;
    for (name, v, m) in [("P^c", p_c, r.d_c), ("P^f", p_f, r.d_f)] {
        ensure((v - third).abs() <= 0.03, format!("{name} = {v:.4}"))?;
        let sd = (2.0 / 9.0 / (100.0 * m as f64)).sqrt();
        ensure((v - third).abs() <= 5.0 * sd, format!("{name} = {v:.4} is {:.1} sd out", (v - third).abs() / sd))?;
    }
    let any = binomial_tail(100, 0);
    ensure((any - (1.0 - (2.0f64 / 3.0).powi(100))).abs() < 1e-12, "binomial oracle self-check")?;
    ensure(r.omega_max.to_f64() >= 0.99, format!("omega_max = {}", r.omega_max))?;
    let sd_max = (any * (1.0 - any) / 300.0).sqrt().max(1.0 / 300.0);
    ensure((r.omega_max.to_f64() - any).abs() <= 5.0 * sd_max, format!("omega_max {} vs oracle {any}", r.omega_max))?;
    let tail = binomial_tail(100, 33);
    let sd = (tail * (1.0 - tail) / 300.0).sqrt();
    let rand = r.omega_rand.to_f64();
    ensure((rand - tail).abs() <= 5.0 * sd, format!("omega_rand {rand:.4} vs oracle {tail:.4}"))?;
    Ok(format!(
        "P^c {p_c:.4}, P^f {p_f:.4}, omega_max {:.4}, omega_rand {rand:.4} (oracle {tail:.4}), {elapsed:.2?}",
        r.omega_max.to_f64()
    ))
}

type Q = Ratio<i64>;

/// The metric definitions transcribed literally over raw predictions.
struct Naive {
    pr: HashMap<String, Q>,
    orig_ok: HashMap<String, bool>,
}

impl Naive {
    fn new(records: &[PermutedRecord], preds: &[Prediction], q: i64) -> Self {
        let label: HashMap<(String, u32), Label> =
            preds.iter().map(|p| ((p.uid.clone(), p.perm_index), p.label)).collect();
        let mut pr = HashMap::new();
        let mut orig_ok = HashMap::new();
        for r in records {
            let hit = label[&(r.uid.clone(), r.perm_index)] == r.label;
            if r.perm_index == 0 {
                orig_ok.insert(r.uid.clone(), hit);
            } else {
                let e = pr.entry(r.uid.clone()).or_insert_with(|| Q::from_integer(0));
                if hit {
                    *e += Q::new(1, q);
                }
            }
        }
        Naive { pr, orig_ok }
    }

    fn omega(&self, x: Q) -> Q {
        let n = self.pr.len() as i64;
        let passing = self
            .pr
            .values()
            .filter(|&&p| if x == Q::from_integer(1) { p == x } else { p > x })
            .count() as i64;
        Q::new(passing, n)
    }

    fn mean_where(&self, ok: bool) -> Option<Q> {
        let vals: Vec<Q> = self
            .pr
            .iter()
            .filter(|(u, _)| self.orig_ok[*u] == ok)
            .map(|(_, &p)| p)
            .collect();
        if vals.is_empty() {
            return None;
        }
        Some(vals.iter().fold(Q::from_integer(0), |a, &b| a + b) / Q::from_integer(vals.len() as i64))
    }
}

fn frac(q: Q) -> Fraction {
    Fraction::new(*q.numer() as u128, *q.denom() as u128)
}

fn brute_force_equivalence() -> Check {
    let test = common::fixture("bf", 6, 5, 4, 7, 0.7);
    let mut checked = 0;
    for seed in 0..20 {
        let r = run(&test, 6, 4, &make_model_b(seed));
        ensure(r.outcomes.len() == 6, "all six examples must be eligible")?;
        let naive = Naive::new(&r.records, &r.preds, 6);
        for o in &r.outcomes {
            ensure(o.pr_correct() == frac(naive.pr[&o.uid]), format!("pr_correct of {}", o.uid))?;
        }
        let rep = &r.report;
        ensure(rep.omega_max == frac(naive.omega(Q::from_integer(0))), "omega_max")?;
        ensure(rep.omega_rand == frac(naive.omega(Q::new(1, 3))), "omega_rand")?;
        ensure(rep.omega_one == frac(naive.omega(Q::from_integer(1))), "omega_1")?;
        for p in &rep.omega_curve {
            let x = Q::new(p.x.numer() as i64, p.x.denom() as i64);
            ensure(p.omega == frac(naive.omega(x)), format!("omega at {}", p.x))?;
        }
        ensure(rep.p_c == naive.mean_where(true).map(frac), "P^c")?;
        ensure(rep.p_f == naive.mean_where(false).map(frac), "P^f")?;
        let mut flips: Vec<String> = naive
            .pr
            .iter()
            .filter(|(u, p)| !naive.orig_ok[*u] && **p > Q::from_integer(0))
            .map(|(u, _)| u.clone())
            .collect();
        flips.sort();
        let mut got = rep.flips.uids.clone();
        got.sort();
        ensure(got == flips, "flips")?;
        let correct = naive.orig_ok.values().filter(|&&b| b).count();
        ensure(rep.accuracy == Fraction::new(correct as u128, 6), "accuracy")?;
        checked += 1;
    }
    Ok(format!("{checked} seeded runs agree exactly"))
}

fn permutation_invariants() -> Check {
    let start = Instant::now();
    let data = common::fixture("perm", 1000, 6, 6, 40, 0.7);
    let spec = PermutationSpec::new(100, 99);
    let (records, drops) = permute_dataset(&data, &spec, 6).map_err(|e| e.to_string())?;
    ensure(drops.retained == 1000, format!("{} retained", drops.retained))?;
    let originals: HashMap<&str, &PermutedRecord> =
        records.iter().filter(|r| r.perm_index == 0).map(|r| (r.uid.as_str(), r)).collect();
    let (mut fixed, mut multiset, mut dupes, mut perms) = (0, 0, 0, 0);
    let mut seen: HashMap<&str, HashSet<(&str, &str)>> = HashMap::new();
    let mut lengths = HashSet::new();
    for r in records.iter().filter(|r| r.perm_index > 0) {
        perms += 1;
        let o = originals[r.uid.as_str()];
        for (a, b) in [(&o.premise, &r.premise), (&o.hypothesis, &r.hypothesis)] {
            let a: Vec<&str> = a.split(' ').collect();
            let b: Vec<&str> = b.split(' ').collect();
            lengths.insert(a.len());
            fixed += a.iter().zip(&b).filter(|(x, y)| x == y).count();
            let (mut sa, mut sb) = (a.clone(), b.clone());
            sa.sort();
            sb.sort();
            multiset += usize::from(sa != sb);
        }
        if !seen.entry(&r.uid).or_default().insert((&r.premise, &r.hypothesis)) {
            dupes += 1;
        }
    }
    ensure(perms == 100_000, format!("{perms} permutations"))?;
    ensure(lengths.contains(&6) && lengths.contains(&40), "lengths must span 6 to 40")?;
    ensure(fixed == 0, format!("{fixed} fixed points"))?;
    ensure(multiset == 0, format!("{multiset} multiset violations"))?;
    ensure(dupes == 0, format!("{dupes} duplicate pairs"))?;

    let manifest = RunManifest::new(&spec, 6, &data, drops.retained);
    let text = serde_json::to_string(&manifest).unwrap();
    let reloaded: RunManifest = serde_json::from_str(&text).unwrap();
    ensure(reloaded.matches(&data), "manifest does not recognise its dataset")?;
    let again = reloaded.regenerate(&data).map_err(|e| e.to_string())?;
    let bytes = |rs: &[PermutedRecord]| {
        let mut b = Vec::new();
        permacc::permute::records::write_records(&mut b, rs).unwrap();
        b
    };
    ensure(bytes(&again) == bytes(&records), "regeneration differs")?;
    let elapsed = start.elapsed();
    within(elapsed, 60)?;
    Ok(format!("{perms} permutations clean, regeneration bit-identical, {elapsed:.2?}"))
}

fn brute_capacity(n: usize) -> u128 {
    fn go(pos: usize, n: usize, used: &mut Vec<bool>) -> u128 {
        if pos == n {
            return 1;
        }
        let mut total = 0;
        for j in 0..n {
            if j != pos && !used[j] {
                used[j] = true;
                total += go(pos + 1, n, used);
                used[j] = false;
            }
        }
        total
    }
    go(0, n, &mut vec![false; n])
}

fn capacity() -> Check {
    let want = [1u128, 2, 9, 44, 265, 1854, 14833];
    for (n, &w) in (2..=8).zip(&want) {
        let seq = TokenSeq::new((0..n).map(|i| format!("w{i}")).collect()).unwrap();
        let got = derangement_capacity(&seq);
        ensure(got == w && brute_capacity(n) == w, format!("n = {n}: {got}, brute force {}", brute_capacity(n)))?;
    }
    Ok("n = 2..8 gives 1, 2, 9, 44, 265, 1854, 14833".into())
}

fn bleu_checks() -> Check {
    let data = common::fixture("bleu", 300, 8, 6, 20, 0.7);
    let (records, _) = permute_dataset(&data, &PermutationSpec::new(20, 3), 6).unwrap();
    let originals: HashMap<&str, &PermutedRecord> =
        records.iter().filter(|r| r.perm_index == 0).map(|r| (r.uid.as_str(), r)).collect();
    let uni = BleuConfig::order(1);
    let mut count = 0;
    for r in records.iter().filter(|r| r.perm_index > 0) {
        let o = originals[r.uid.as_str()];
        for (a, b) in [(&o.premise, &r.premise), (&o.hypothesis, &r.hypothesis)] {
            let a: Vec<&str> = a.split(' ').collect();
            let b: Vec<&str> = b.split(' ').collect();
            let s = bleu(&a, &b, &uni).unwrap();
            ensure(s == 1.0, format!("BLEU-1 {s} for {}#{}", r.uid, r.perm_index))?;
            count += 1;
        }
    }

    let r: Vec<&str> = "a b c d e f".split(' ').collect();
    let c: Vec<&str> = "b a d c f e".split(' ').collect();
    let hand = (1.0f64 * (1e-9 / 5.0)).sqrt();
    let got = bleu(&r, &c, &BleuConfig::order(2)).unwrap();
    ensure((got - hand).abs() <= 1e-9, format!("hand bigram case {got} vs {hand}"))?;

    let sentence: TokenSeq = "the quick brown fox jumps over a lazy dog near the river"
        .split(' ')
        .enumerate()
        .map(|(i, w)| format!("{w}{i}"))
        .collect::<Vec<_>>()
        .join(" ")
        .parse()
        .unwrap();
    let bi = BleuConfig::order(2);
    let mut means = Vec::new();
    for f in [0.0, 0.25, 0.5, 0.75] {
        let mut total = 0.0;
        for s in 0..1000u64 {
            let p = clumped_permute(&sentence, f, s).unwrap();
            total += bleu(sentence.tokens(), p.tokens.tokens(), &bi).unwrap();
        }
        means.push(total / 1000.0);
    }
    ensure(means.windows(2).all(|w| w[1] > w[0]), format!("BLEU-2 means {means:?}"))?;
    Ok(format!(
        "{count} BLEU-1 scores exactly 1; hand case {got:.6e}; BLEU-2 by clump {:.4?}",
        means
    ))
}

fn pos_minitree() -> Check {
    use Upos::*;
    let s = |w: &str, t: &[Upos]| TaggedSentence::new(w.split(' ').map(String::from).collect(), t.to_vec()).unwrap();
    let corpus = vec![
        s("the dog runs", &[Det, Noun, Verb]),
        s("a cat sleeps", &[Det, Noun, Verb]),
        s("the cat runs fast", &[Det, Noun, Verb, Adv]),
        s("dogs run", &[Noun, Verb]),
        s("a big dog barks", &[Det, Adj, Noun, Verb]),
    ];
    let table = build_signature_table(&corpus, 1).unwrap();
    let f = Fraction::new;
    let psi = |w: &str, t: Upos| table.psi(w).unwrap().get(t);
    let hand = [
        ("the", Noun, f(1, 1)),
        ("dog", Det, f(1, 4)),
        ("dog", Adj, f(1, 4)),
        ("dog", Verb, f(1, 2)),
        ("runs", Noun, f(3, 4)),
        ("runs", Adv, f(1, 4)),
        ("cat", Det, f(1, 2)),
        ("cat", Verb, f(1, 2)),
        ("a", Noun, f(1, 2)),
        ("a", Adj, f(1, 2)),
        ("fast", Verb, f(1, 1)),
    ];
    for (w, t, want) in hand {
        ensure(psi(w, t) == want, format!("psi({w})[{t}] = {}, expected {want}", psi(w, t)))?;
    }

    // k = 2: "the" {NOUN, ADJ} vs {NOUN, ADJ}; "dog" {VERB, ADJ} vs {DET, VERB};
    // "runs" {NOUN, ADV} vs {NOUN, ADJ}: (2 + 1 + 1) / 6.
    let orig = minitree_overlap(&corpus[0].tokens, &corpus[0].tags, &table, 2).unwrap();
    ensure(orig.beta == f(2, 3), format!("beta(S) = {}", orig.beta))?;
    // "runs the dog": runs {DET, ADJ} 0, the {NOUN, VERB} 1, dog {DET, ADJ} 1.
    let words: Vec<String> = "runs the dog".split(' ').map(String::from).collect();
    let perm = minitree_overlap(&words, &[Verb, Det, Noun], &table, 2).unwrap();
    ensure(perm.beta == f(1, 3), format!("beta(S^) = {}", perm.beta))?;
    let ratio = signature_ratio(&perm, &orig).unwrap();
    ensure(ratio == f(1, 2), format!("ratio = {ratio}"))?;

    for sent in &corpus {
        let own = build_signature_table(std::slice::from_ref(sent), 1).unwrap();
        for k in [1, 2, 4, 17] {
            let b = minitree_overlap(&sent.tokens, &sent.tags, &own, k).unwrap().beta;
            ensure(b == Fraction::one(), format!("self-table beta {b} for {:?} at k = {k}", sent.tokens))?;
        }
    }
    Ok("psi and beta match hand values; ratio 1/2; self-table beta = 1".into())
}

fn omega_monotone() -> Check {
    let test = common::fixture("mono", 200, 9, 6, 12, 0.7);
    let mut total = 0;
    for model in [make_model_b(1), make_model_b(2), make_model_a()] {
        let r = run(&test, 30, 6, &model).report;
        ensure(r.omega_curve.len() == 50, "grid must have 50 points")?;
        for w in r.omega_curve.windows(2) {
            ensure(w[1].omega <= w[0].omega, format!("omega rises at x = {}", w[1].x))?;
        }
        ensure(r.check_invariants().is_empty(), format!("{:?}", r.check_invariants()))?;
        total += 1;
    }
    Ok(format!("non-increasing over 50 points for {total} models"))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("bow oracle", bow_oracle),
        ("model A oracle", model_a_oracle),
        ("model B statistics", model_b_statistics),
        ("brute-force equivalence", brute_force_equivalence),
        ("permutation invariants", permutation_invariants),
        ("capacity", capacity),
        ("BLEU", bleu_checks),
        ("POS mini-tree", pos_minitree),
        ("omega_x monotonicity", omega_monotone),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match std::panic::catch_unwind(check) {
            Ok(Ok(detail)) => println!("PASS  {name}: {detail}"),
            Ok(Err(why)) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
            Err(_) => {
                failed += 1;
                println!("FAIL  {name}: panicked");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
