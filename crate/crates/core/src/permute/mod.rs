//! Word-order permutations with no word left in place.
//!
//! [`derange`] rearranges one sentence, [`clumped_permute`] does the same
//! while moving a contiguous run of words as one unit, and
//! [`generate_permutations`] builds the `q` distinct permuted pairs of an
//! example. Every draw is a pure function of its seed.

mod capacity;
pub mod records;
pub mod seed;

use std::collections::HashSet;
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use capacity::derangement_capacity;
use capacity::{capacity_of, multiplicities, token_derangement_exists};

use crate::corpus::{Dataset, Example, TokenSeq};
use crate::error::{Error, Result};

/// Upper bound on rejected draws before giving up.
pub const MAX_DRAWS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Both,
    HypothesisOnly,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Both => "both",
            Mode::HypothesisOnly => "hypothesis_only",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(Mode::Both),
            "hypothesis_only" | "hypothesis-only" => Ok(Mode::HypothesisOnly),
            other => Err(Error::InvalidParameter(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationSpec {
    pub q: usize,
    pub master_seed: u64,
    pub mode: Mode,
    /// Fraction of each sentence moved as one contiguous unit; 0 disables
    /// clumping.
    pub clump_fraction: f64,
}

impl PermutationSpec {
    pub fn new(q: usize, master_seed: u64) -> Self {
        PermutationSpec {
            q,
            master_seed,
            mode: Mode::Both,
            clump_fraction: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.q == 0 {
            return Err(Error::InvalidParameter("q must be at least 1".into()));
        }
        check_fraction(self.clump_fraction)
    }
}

fn check_fraction(f: f64) -> Result<()> {
    if !(0.0..1.0).contains(&f) {
        return Err(Error::InvalidParameter(format!(
            "clump fraction must lie in [0, 1), got {f}"
        )));
    }
    Ok(())
}

/// A rearranged sentence plus the source index of every output position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permuted {
    pub tokens: TokenSeq,
    /// `tokens[i]` is the original token at `source[i]`.
    pub source: Vec<usize>,
    /// Positions holding a word equal to the original one there. Non-zero
    /// only when repeated words make that unavoidable.
    pub waivers: usize,
}

impl Permuted {
    fn identity(tokens: &TokenSeq) -> Self {
        Permuted {
            tokens: tokens.clone(),
            source: (0..tokens.len()).collect(),
            waivers: 0,
        }
    }

    /// Applies the same rearrangement to a parallel sequence, e.g. POS tags.
    pub fn apply<T: Clone>(&self, parallel: &[T]) -> Vec<T> {
        self.source.iter().map(|&j| parallel[j].clone()).collect()
    }
}

/// Rearranges `items` so that no position keeps its item.
///
/// If some arrangement puts a different item at every position, draws
/// uniformly among those. Otherwise draws a position-level derangement that
/// differs from the input and reports how many positions still hold an
/// equal item.
fn derange_items<T: Eq + Hash>(items: &[T], rng: &mut ChaCha8Rng) -> Option<(Vec<usize>, usize)> {
    let n = items.len();
    let strict = token_derangement_exists(&multiplicities(items), n);
    if !strict && capacity_of(items) == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..MAX_DRAWS {
        order.shuffle(rng);
        let accepted = if strict {
            order.iter().enumerate().all(|(i, &j)| items[i] != items[j])
        } else {
            order.iter().enumerate().all(|(i, &j)| i != j)
                && order.iter().enumerate().any(|(i, &j)| items[i] != items[j])
        };
        if accepted {
            let waivers = order
                .iter()
                .enumerate()
                .filter(|&(i, &j)| items[i] == items[j])
                .count();
            return Some((order, waivers));
        }
    }
    None
}

fn rearranged(tokens: &TokenSeq, source: Vec<usize>, waivers: usize) -> Permuted {
    let out = source.iter().map(|&j| tokens.tokens()[j].clone()).collect();
    Permuted {
        tokens: TokenSeq::from_validated(out),
        source,
        waivers,
    }
}

/// Permutes `tokens` so that no word stays at its original position.
pub fn derange(tokens: &TokenSeq, seed: u64) -> Result<Permuted> {
    if tokens.len() < 2 {
        return Err(Error::TooShort {
            len: tokens.len(),
            min: 2,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (source, waivers) = derange_items(tokens.tokens(), &mut rng)
        .ok_or_else(|| Error::NoDerangement(tokens.text()))?;
    Ok(rearranged(tokens, source, waivers))
}

/// Number of tokens in the clump for a sentence of `len` tokens.
pub fn clump_len(len: usize, fraction: f64) -> usize {
    // guard against products like 0.7 * 10 = 7.000000000000001
    ((fraction * len as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Moves a contiguous run of `ceil(fraction * len)` tokens as one unit and
/// deranges the units. A fraction of 0 is exactly [`derange`].
pub fn clumped_permute(tokens: &TokenSeq, fraction: f64, seed: u64) -> Result<Permuted> {
    check_fraction(fraction)?;
    let n = tokens.len();
    if n < 2 {
        return Err(Error::TooShort { len: n, min: 2 });
    }
    let clump = clump_len(n, fraction);
    if clump == 0 {
        return derange(tokens, seed);
    }
    if clump >= n {
        return Err(Error::ClumpTooLarge { clump, len: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = rng.gen_range(0..=n - clump);
    let mut units: Vec<Vec<usize>> = (0..start).map(|i| vec![i]).collect();
    units.push((start..start + clump).collect());
    units.extend((start + clump..n).map(|i| vec![i]));

    let keys: Vec<Vec<&str>> = units
        .iter()
        .map(|u| u.iter().map(|&i| tokens.tokens()[i].as_str()).collect())
        .collect();
    let (order, waivers) =
        derange_items(&keys, &mut rng).ok_or_else(|| Error::NoDerangement(tokens.text()))?;
    let source = order.iter().flat_map(|&u| units[u].iter().copied()).collect();
    Ok(rearranged(tokens, source, waivers))
}

fn permute_sentence(tokens: &TokenSeq, fraction: f64, seed: u64) -> Result<Permuted> {
    if fraction == 0.0 {
        derange(tokens, seed)
    } else {
        clumped_permute(tokens, fraction, seed)
    }
}

/// Seed actually used for a pair after `attempt` rejected duplicates.
pub fn pair_seed(master: u64, uid: &str, perm_index: u32, attempt: usize) -> u64 {
    let base = seed::keyed_seed(master, uid, u64::from(perm_index));
    if attempt == 0 {
        base
    } else {
        seed::mix(base, 0x100 + attempt as u64)
    }
}

const PREMISE_STREAM: u64 = 1;
const HYPOTHESIS_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutedPair {
    /// 1-based; 0 is reserved for the original pair.
    pub perm_index: u32,
    pub seed: u64,
    pub premise: Permuted,
    pub hypothesis: Permuted,
}

impl PermutedPair {
    pub fn waivers(&self) -> usize {
        self.premise.waivers + self.hypothesis.waivers
    }
}

/// Regenerates one pair from its recorded seed.
pub fn permute_pair(ex: &Example, spec: &PermutationSpec, perm_index: u32, seed: u64) -> Result<PermutedPair> {
    let premise = match spec.mode {
        Mode::Both => permute_sentence(
            &ex.premise,
            spec.clump_fraction,
            seed::mix(seed, PREMISE_STREAM),
        )?,
        Mode::HypothesisOnly => Permuted::identity(&ex.premise),
    };
    let hypothesis = permute_sentence(
        &ex.hypothesis,
        spec.clump_fraction,
        seed::mix(seed, HYPOTHESIS_STREAM),
    )?;
    Ok(PermutedPair {
        perm_index,
        seed,
        premise,
        hypothesis,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationSet {
    pub uid: String,
    pub pairs: Vec<PermutedPair>,
}

impl PermutationSet {
    pub fn fixed_point_waivers(&self) -> usize {
        self.pairs.iter().map(PermutedPair::waivers).sum()
    }
}

/// Draws `spec.q` pairwise-distinct permuted pairs for `ex`.
///
/// Pair `j` (1-based) is seeded from `(master_seed, uid, j)`; a pair that
/// duplicates an earlier one is redrawn with the next attempt seed.
pub fn generate_permutations(ex: &Example, spec: &PermutationSpec) -> Result<PermutationSet> {
    spec.validate()?;
    let mut seen: HashSet<(TokenSeq, TokenSeq)> = HashSet::with_capacity(spec.q);
    let mut pairs = Vec::with_capacity(spec.q);
    for j in 1..=spec.q as u32 {
        let mut placed = false;
        for attempt in 0..MAX_DRAWS {
            let seed = pair_seed(spec.master_seed, &ex.uid, j, attempt);
            let pair = permute_pair(ex, spec, j, seed)?;
            let key = (pair.premise.tokens.clone(), pair.hypothesis.tokens.clone());
            if seen.insert(key) {
                pairs.push(pair);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::InsufficientPermutations {
                uid: ex.uid.clone(),
                wanted: spec.q,
                got: pairs.len(),
            });
        }
    }
    Ok(PermutationSet {
        uid: ex.uid.clone(),
        pairs,
    })
}

/// Permutation sets for every example, in dataset order.
pub fn generate_all(d: &Dataset, spec: &PermutationSpec) -> Result<Vec<PermutationSet>> {
    d.examples
        .par_iter()
        .map(|ex| generate_permutations(ex, spec))
        .collect()
}

/// Replaces every example by a single permuted pair with the same uid and
/// label, for training on scrambled text.
pub fn permute_train(d: &Dataset, seed: u64) -> Result<Dataset> {
    let spec = PermutationSpec::new(1, seed);
    let examples = d
        .examples
        .par_iter()
        .map(|ex| {
            let set = generate_permutations(ex, &spec)?;
            let pair = set.pairs.into_iter().next().expect("q = 1");
            Ok(Example {
                uid: ex.uid.clone(),
                premise: pair.premise.tokens,
                hypothesis: pair.hypothesis.tokens,
                gold: ex.gold,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        name: format!("{}.permuted", d.name),
        examples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;
    use proptest::prelude::*;

    fn seq(s: &str) -> TokenSeq {
        s.parse().unwrap()
    }

    fn ex(uid: &str, p: &str, h: &str) -> Example {
        Example {
            uid: uid.into(),
            premise: seq(p),
            hypothesis: seq(h),
            gold: Label::Entailment,
        }
    }

    fn sorted(t: &TokenSeq) -> Vec<String> {
        let mut v = t.tokens().to_vec();
        v.sort();
        v
    }

    #[test]
    fn derange_moves_every_distinct_word() {
        let t = seq("a b c d e f");
        for s in 0..200 {
            let p = derange(&t, s).unwrap();
            for (i, tok) in p.tokens.tokens().iter().enumerate() {
                assert_ne!(tok, &t.tokens()[i]);
            }
            assert_eq!(p.waivers, 0);
            assert_eq!(sorted(&p.tokens), sorted(&t));
        }
    }

    #[test]
    fn derange_reaches_all_265_derangements_of_six() {
        let t = seq("a b c d e f");
        let seen: HashSet<TokenSeq> = (0..20_000).map(|s| derange(&t, s).unwrap().tokens).collect();
        assert_eq!(seen.len(), 265);
    }

    #[test]
    fn duplicate_words_waive_unavoidable_fixed_points() {
        let t = seq("x x y");
        for s in 0..50 {
            let p = derange(&t, s).unwrap();
            assert!(p.source.iter().enumerate().all(|(i, &j)| i != j));
            assert_ne!(p.tokens, t);
            assert_eq!(p.waivers, 1);
        }
    }

    #[test]
    fn derange_errors() {
        assert!(matches!(derange(&seq("solo"), 1), Err(Error::TooShort { .. })));
        assert!(matches!(derange(&seq("x x"), 1), Err(Error::NoDerangement(_))));
    }

    #[test]
    fn zero_clump_is_plain_derange() {
        let t = seq("a b c d e f g h");
        for s in 0..20 {
            assert_eq!(clumped_permute(&t, 0.0, s).unwrap(), derange(&t, s).unwrap());
        }
    }

    #[test]
    fn clump_stays_contiguous() {
        let t = seq("a b c d e f g h");
        for s in 0..100 {
            let p = clumped_permute(&t, 0.5, s).unwrap();
            // some run of four consecutive source indices survives intact
            let intact = (0..=4).any(|st| {
                let run: Vec<usize> = (st..st + 4).collect();
                p.source.windows(4).any(|w| w == run.as_slice())
            });
            assert!(intact, "{:?}", p.source);
            assert_eq!(sorted(&p.tokens), sorted(&t));
        }
    }

    #[test]
    fn clump_covering_sentence_is_rejected() {
        let t = seq("a b c d");
        assert!(matches!(
            clumped_permute(&t, 0.9, 1),
            Err(Error::ClumpTooLarge { .. })
        ));
        assert!(clumped_permute(&t, 1.0, 1).is_err());
    }

    #[test]
    fn clump_lengths() {
        assert_eq!(clump_len(8, 0.25), 2);
        assert_eq!(clump_len(8, 0.5), 4);
        assert_eq!(clump_len(10, 0.7), 7);
        assert_eq!(clump_len(7, 0.25), 2);
        assert_eq!(clump_len(12, 0.0), 0);
    }

    #[test]
    fn hundred_distinct_pairs_for_six_and_eight_tokens() {
        let e = ex("u", "a b c d e f", "g h i j k l m n");
        let set = generate_permutations(&e, &PermutationSpec::new(100, 3)).unwrap();
        assert_eq!(set.pairs.len(), 100);
        let distinct: HashSet<_> = set
            .pairs
            .iter()
            .map(|p| (p.premise.tokens.clone(), p.hypothesis.tokens.clone()))
            .collect();
        assert_eq!(distinct.len(), 100);
        assert_eq!(set, generate_permutations(&e, &PermutationSpec::new(100, 3)).unwrap());
    }

    #[test]
    fn hypothesis_only_keeps_premise() {
        let e = ex("u", "a b c d e f", "g h i j k l m n");
        let spec = PermutationSpec {
            mode: Mode::HypothesisOnly,
            ..PermutationSpec::new(100, 9)
        };
        let set = generate_permutations(&e, &spec).unwrap();
        assert!(set.pairs.iter().all(|p| p.premise.tokens == e.premise));
        assert!(set.pairs.iter().all(|p| p.hypothesis.tokens != e.hypothesis));
    }

    #[test]
    fn too_few_permutations_is_an_error() {
        // 3 distinct words: 2 derangements each, 4 pairs at most
        let e = ex("u", "a b c", "d e f");
        let err = generate_permutations(&e, &PermutationSpec::new(5, 1)).unwrap_err();
        assert!(matches!(err, Error::InsufficientPermutations { got: 4, .. }));
        assert!(generate_permutations(&e, &PermutationSpec::new(4, 1)).is_ok());
    }

    #[test]
    fn seeds_isolate_pairs_and_uids() {
        let a = ex("u1", "a b c d e f g h i j", "k l m n o p q r s t");
        let b = Example { uid: "u2".into(), ..a.clone() };
        let spec = PermutationSpec::new(10, 42);
        let sa = generate_permutations(&a, &spec).unwrap();
        let sb = generate_permutations(&b, &spec).unwrap();
        assert!(sa.pairs.iter().zip(&sb.pairs).all(|(x, y)| x.premise != y.premise));
        // a shorter q is a prefix of a longer one
        let short = generate_permutations(&a, &PermutationSpec::new(4, 42)).unwrap();
        assert_eq!(short.pairs[..], sa.pairs[..4]);
        // regenerating a single pair from its recorded seed
        let p = &sa.pairs[7];
        assert_eq!(&permute_pair(&a, &spec, p.perm_index, p.seed).unwrap(), p);
    }

    #[test]
    fn permute_train_preserves_uids_and_labels() {
        let d = Dataset::new(
            "train",
            vec![
                ex("1", "a b c", "d e f g"),
                ex("2", "the cat sat", "on the mat"),
                ex("3", "x y", "z w"),
            ],
        )
        .unwrap();
        let p = permute_train(&d, 5).unwrap();
        assert_eq!(p.len(), 3);
        for (o, n) in d.examples.iter().zip(&p.examples) {
            assert_eq!(o.uid, n.uid);
            assert_eq!(o.gold, n.gold);
            assert_ne!(o.premise, n.premise);
            assert_ne!(o.hypothesis, n.hypothesis);
        }
        assert_eq!(p, permute_train(&d, 5).unwrap());
    }

    proptest! {
        #[test]
        fn derange_preserves_multiset(words in prop::collection::vec("[a-e]{1,2}", 2..14), s in any::<u64>()) {
            let t = TokenSeq::new(words).unwrap();
            if let Ok(p) = derange(&t, s) {
                prop_assert_eq!(sorted(&p.tokens), sorted(&t));
                prop_assert!(p.source.iter().enumerate().all(|(i, &j)| i != j));
                prop_assert_eq!(p.apply(t.tokens()), p.tokens.tokens().to_vec());
            } else {
                prop_assert_eq!(derangement_capacity(&t), 0);
            }
        }

        #[test]
        fn clumped_preserves_multiset(len in 2usize..30, f in prop::sample::select(vec![0.0, 0.25, 0.5, 0.75]), s in any::<u64>()) {
            let t = TokenSeq::new((0..len).map(|i| format!("w{i}")).collect()).unwrap();
            match clumped_permute(&t, f, s) {
                Ok(p) => {
                    prop_assert_eq!(p.tokens.len(), len);
                    prop_assert_eq!(sorted(&p.tokens), sorted(&t));
                    prop_assert_ne!(p.tokens, t);
                }
                Err(Error::ClumpTooLarge { .. }) => prop_assert!(clump_len(len, f) >= len),
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            }
        }
    }
}
