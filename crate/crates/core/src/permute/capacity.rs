//! Exact counts of the distinct rearrangements the sampler can emit.

use std::collections::HashMap;
use std::hash::Hash;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::corpus::TokenSeq;

/// Number of distinct sequences [`derange`](super::derange) can return for
/// `tokens`, saturating at `u128::MAX`.
///
/// When some arrangement puts a different word at every position (true
/// unless one word fills more than half the sentence) this is the number of
/// such arrangements. Otherwise it counts the distinct outputs of
/// position-level derangements, excluding the original sequence.
pub fn derangement_capacity(tokens: &TokenSeq) -> u128 {
    capacity_of(tokens.tokens())
}

pub(crate) fn capacity_of<T: Eq + Hash>(items: &[T]) -> u128 {
    let counts = multiplicities(items);
    let n = items.len();
    let exact = if token_derangement_exists(&counts, n) {
        token_derangements(&counts)
    } else {
        let moved = singletons_moved(&counts);
        if counts.iter().any(|&c| c == 1) {
            moved
        } else {
            // the original itself is reachable and not a permutation of interest
            moved - BigUint::one()
        }
    };
    exact.to_u128().unwrap_or(u128::MAX)
}

/// Occurrence counts per distinct item, in first-occurrence order.
pub(crate) fn multiplicities<T: Eq + Hash>(items: &[T]) -> Vec<usize> {
    let mut index: HashMap<&T, usize> = HashMap::new();
    let mut counts = Vec::new();
    for item in items {
        let slot = *index.entry(item).or_insert_with(|| {
            counts.push(0);
            counts.len() - 1
        });
        counts[slot] += 1;
    }
    counts
}

/// A rearrangement with a different item at every position exists iff no
/// item fills more than half of the positions.
pub(crate) fn token_derangement_exists(counts: &[usize], n: usize) -> bool {
    n > 0 && counts.iter().all(|&c| 2 * c <= n)
}

fn factorial(n: usize) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * BigUint::from(k))
}

fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Distinct arrangements of the multiset in which no item lands on a
/// position originally holding an equal item.
///
/// Labels every occurrence, counts permutations avoiding the block-diagonal
/// forbidden board with the rook-polynomial form of inclusion-exclusion, and
/// divides out the relabelings of equal items.
fn token_derangements(counts: &[usize]) -> BigUint {
    let n: usize = counts.iter().sum();
    // rook numbers of the forbidden board: product of c x c full blocks
    let mut rooks = vec![BigUint::one()];
    for &c in counts {
        let block: Vec<BigUint> = (0..=c)
            .map(|a| {
                let b = binomial(c, a);
                &b * &b * factorial(a)
            })
            .collect();
        let mut next = vec![BigUint::zero(); rooks.len() + c];
        for (i, r) in rooks.iter().enumerate() {
            for (j, b) in block.iter().enumerate() {
                next[i + j] += r * b;
            }
        }
        rooks = next;
    }
    let mut total = BigInt::zero();
    for (a, r) in rooks.iter().enumerate() {
        let term = BigInt::from(r * factorial(n - a));
        if a % 2 == 0 {
            total += term;
        } else {
            total -= term;
        }
    }
    debug_assert!(!total.is_negative());
    let labeled = total.to_biguint().unwrap_or_default();
    let relabelings = counts
        .iter()
        .fold(BigUint::one(), |acc, &c| acc * factorial(c));
    labeled / relabelings
}

/// Distinct arrangements in which every item occurring exactly once has
/// moved. A sequence is the output of some position-level derangement iff
/// this holds: items occurring two or more times can always trade places
/// among their own positions.
fn singletons_moved(counts: &[usize]) -> BigUint {
    let n: usize = counts.iter().sum();
    let singles = counts.iter().filter(|&&c| c == 1).count();
    let repeated = counts
        .iter()
        .filter(|&&c| c > 1)
        .fold(BigUint::one(), |acc, &c| acc * factorial(c));
    let mut total = BigInt::zero();
    for a in 0..=singles {
        let term = BigInt::from(binomial(singles, a) * factorial(n - a) / &repeated);
        if a % 2 == 0 {
            total += term;
        } else {
            total -= term;
        }
    }
    total.to_biguint().unwrap_or_default()
}
