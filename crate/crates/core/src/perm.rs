//! Permutations of `{0, .., n-1}` and the plans of `M` permutations that
//! drive every interval computation.

use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Largest `n` accepted by [`PermutationPlan::enumerate_all`] unless a
/// different cap is passed explicitly.
pub const DEFAULT_ENUMERATION_CAP: usize = 10;

/// A bijection on `{0, .., n-1}`, stored as its image vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    /// Validates that `mapping` is a bijection.
    pub fn from_vec(mapping: Vec<usize>) -> Result<Self> {
        let n = mapping.len();
        let mut seen = vec![false; n];
        for &j in &mapping {
            if j >= n || seen[j] {
                return Err(Error::invalid(format!(
                    "not a permutation of 0..{n}: {mapping:?}"
                )));
            }
            seen[j] = true;
        }
        Ok(Permutation(mapping))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &j)| i == j)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &j) in self.0.iter().enumerate() {
            inv[j] = i;
        }
        Permutation(inv)
    }

    /// Permuted copy of `v`: `result[i] = v[p(i)]`.
    pub fn apply<T: Copy>(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.0.len() {
            return Err(Error::invalid(format!(
                "vector of length {} cannot be permuted by a permutation of length {}",
                v.len(),
                self.0.len()
            )));
        }
        Ok(self.0.iter().map(|&j| v[j]).collect())
    }

    fn is_bijection(&self) -> bool {
        let mut seen = vec![false; self.0.len()];
        self.0
            .iter()
            .all(|&j| j < seen.len() && !std::mem::replace(&mut seen[j], true))
    }
}

/// An ordered list of `M` permutations of `{0, .., n-1}`.
///
/// Sampled plans are i.i.d. uniform draws with replacement, so duplicates
/// (including the identity) can occur; [`duplicate_count`] reports them.
/// Exhaustive plans list all of `S_n` in lexicographic order.
///
/// [`duplicate_count`]: PermutationPlan::duplicate_count
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationPlan {
    n: usize,
    seed: u64,
    exhaustive: bool,
    permutations: Vec<Permutation>,
}

impl PermutationPlan {
    /// Draws `m` uniform permutations of `n` elements.
    ///
    /// Each draw is a Fisher-Yates shuffle of the identity: for `i` from
    /// `n-1` down to `1`, swap position `i` with a uniform position in
    /// `0..=i`. Draws are consumed from one generator in plan order.
    pub fn sample(n: usize, m: usize, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!(
                "need n >= 2 to sample permutations, got {n}"
            )));
        }
        if m < 1 {
            return Err(Error::invalid("need at least one permutation"));
        }
        let mut rng = rng_from_seed(seed);
        let mut permutations = Vec::with_capacity(m);
        for _ in 0..m {
            let mut mapping: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = rng.random_range(0..=i);
                mapping.swap(i, j);
            }
            let p = Permutation(mapping);
            debug_assert!(p.is_bijection());
            permutations.push(p);
        }
        Ok(PermutationPlan {
            n,
            seed,
            exhaustive: false,
            permutations,
        })
    }

    /// All `n!` permutations in lexicographic order, for `n` up to
    /// [`DEFAULT_ENUMERATION_CAP`].
    pub fn enumerate_all(n: usize) -> Result<Self> {
        Self::enumerate_all_capped(n, DEFAULT_ENUMERATION_CAP)
    }

    pub fn enumerate_all_capped(n: usize, cap: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid(
                "cannot enumerate permutations of zero elements",
            ));
        }
        if n > cap {
            return Err(Error::ResourceLimit(format!(
                "{n}! permutations exceeds the enumeration cap of {cap}!"
            )));
        }
        let total: usize = (1..=n).product();
        let mut permutations = Vec::with_capacity(total);
        let mut current: Vec<usize> = (0..n).collect();
        loop {
            permutations.push(Permutation(current.clone()));
            if !next_lexicographic(&mut current) {
                break;
            }
        }
        debug_assert_eq!(permutations.len(), total);
        Ok(PermutationPlan {
            n,
            seed: 0,
            exhaustive: true,
            permutations,
        })
    }

    /// Plan from explicit permutations, e.g. `M` copies of the identity.
    pub fn from_permutations(n: usize, permutations: Vec<Permutation>) -> Result<Self> {
        if permutations.is_empty() {
            return Err(Error::invalid("a plan needs at least one permutation"));
        }
        if let Some(p) = permutations.iter().find(|p| p.len() != n) {
            return Err(Error::invalid(format!(
                "permutation of length {} in a plan for n = {n}",
                p.len()
            )));
        }
        Ok(PermutationPlan {
            n,
            seed: 0,
            exhaustive: false,
            permutations,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.permutations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutations.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_exhaustive(&self) -> bool {
        self.exhaustive
    }

    pub fn permutations(&self) -> &[Permutation] {
        &self.permutations
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Permutation> {
        self.permutations.iter()
    }

    /// Number of draws that repeat an earlier draw.
    pub fn duplicate_count(&self) -> usize {
        let mut sorted: Vec<&Permutation> = self.permutations.iter().collect();
        sorted.sort_unstable();
        sorted.windows(2).filter(|w| w[0] == w[1]).count()
    }

    /// Writes the plan as text: a header line followed by one row of
    /// space-separated indices per permutation.
    ///
    /// ```text
    /// permci-plan v1 n=3 m=2 seed=7 exhaustive=false
    /// 0 2 1
    /// 1 0 2
    /// ```
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "permci-plan v1 n={} m={} seed={} exhaustive={}",
            self.n,
            self.len(),
            self.seed,
            self.exhaustive
        )?;
        for p in &self.permutations {
            let row: Vec<String> = p.0.iter().map(|j| j.to_string()).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        Ok(())
    }

    /// Reads a plan written by [`write_text`](Self::write_text).
    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::invalid("empty plan file"))?
            .map_err(|e| Error::invalid(e.to_string()))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("permci-plan") || fields.next() != Some("v1") {
            return Err(Error::invalid(format!(
                "unrecognised plan header: {header}"
            )));
        }
        let (mut n, mut m, mut seed, mut exhaustive) = (None, None, None, None);
        for field in fields {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("malformed header field {field}")))?;
            let bad = || Error::invalid(format!("malformed header field {field}"));
            match key {
                "n" => n = Some(value.parse::<usize>().map_err(|_| bad())?),
                "m" => m = Some(value.parse::<usize>().map_err(|_| bad())?),
                "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad())?),
                "exhaustive" => exhaustive = Some(value.parse::<bool>().map_err(|_| bad())?),
                _ => return Err(bad()),
            }
        }
        let missing = |k: &str| Error::invalid(format!("plan header lacks {k}"));
        let n = n.ok_or_else(|| missing("n"))?;
        let m = m.ok_or_else(|| missing("m"))?;
        let mut permutations = Vec::with_capacity(m);
        for (row, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::invalid(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let mapping = line
                .split_whitespace()
                .map(|s| s.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::invalid(format!("plan row {}: {e}", row + 1)))?;
            if mapping.len() != n {
                return Err(Error::invalid(format!(
                    "plan row {} has {} entries, expected {n}",
                    row + 1,
                    mapping.len()
                )));
            }
            permutations.push(Permutation::from_vec(mapping)?);
        }
        if permutations.len() != m {
            return Err(Error::invalid(format!(
                "plan header promises {m} permutations, found {}",
                permutations.len()
            )));
        }
        Ok(PermutationPlan {
            n,
            seed: seed.ok_or_else(|| missing("seed"))?,
            exhaustive: exhaustive.ok_or_else(|| missing("exhaustive"))?,
            permutations,
        })
    }
}

impl<'a> IntoIterator for &'a PermutationPlan {
    type Item = &'a Permutation;
    type IntoIter = std::slice::Iter<'a, Permutation>;

    fn into_iter(self) -> Self::IntoIter {
        self.permutations.iter()
    }
}

/// Advances `v` to its lexicographic successor; false when `v` was the last.
fn next_lexicographic(v: &mut [usize]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn sample_two_elements() {
        let plan = PermutationPlan::sample(2, 1, 0).unwrap();
        let p = plan.permutations()[0].as_slice();
        assert!(p == [0, 1] || p == [1, 0]);
    }

    #[test]
    fn sample_is_deterministic() {
        let a = PermutationPlan::sample(5, 100, 7).unwrap();
        let b = PermutationPlan::sample(5, 100, 7).unwrap();
        assert_eq!(a, b);
        let c = PermutationPlan::sample(5, 100, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sample_rejects_bad_sizes() {
        assert!(matches!(
            PermutationPlan::sample(1, 10, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            PermutationPlan::sample(4, 0, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn sample_uniform_over_s4() {
        let draws = 240_000;
        let plan = PermutationPlan::sample(4, draws, 12345).unwrap();
        let mut counts: HashMap<&[usize], usize> = HashMap::new();
        for p in &plan {
            assert!(p.is_bijection());
            *counts.entry(p.as_slice()).or_default() += 1;
        }
        let all = PermutationPlan::enumerate_all(4).unwrap();
        assert_eq!(counts.len(), 24);
        let expected = 1.0 / 24.0;
        let se = (expected * (1.0 - expected) / draws as f64).sqrt();
        for p in &all {
            let freq = counts[p.as_slice()] as f64 / draws as f64;
            assert!((freq - expected).abs() < 0.005, "{p:?}: {freq}");
            assert!((freq - expected).abs() < 4.0 * se, "{p:?}: {freq}");
        }
    }

    #[test]
    fn enumerate_three() {
        let plan = PermutationPlan::enumerate_all(3).unwrap();
        assert!(plan.is_exhaustive());
        assert_eq!(plan.len(), 6);
        assert_eq!(plan.permutations()[0].as_slice(), &[0, 1, 2]);
        assert_eq!(plan.permutations()[5].as_slice(), &[2, 1, 0]);
        let rows: Vec<&Permutation> = plan.iter().collect();
        assert!(rows.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn enumerate_one_is_identity() {
        let plan = PermutationPlan::enumerate_all(1).unwrap();
        assert_eq!(plan.len(), 1);
        assert!(plan.permutations()[0].is_identity());
    }

    #[test]
    fn enumerate_eight_distinct() {
        let plan = PermutationPlan::enumerate_all(8).unwrap();
        assert_eq!(plan.len(), 40320);
        assert_eq!(plan.duplicate_count(), 0);
        assert!(plan.iter().all(Permutation::is_bijection));
    }

    #[test]
    fn enumerate_respects_cap() {
        assert!(matches!(
            PermutationPlan::enumerate_all(11),
            Err(Error::ResourceLimit(_))
        ));
        assert!(matches!(
            PermutationPlan::enumerate_all_capped(5, 4),
            Err(Error::ResourceLimit(_))
        ));
    }

    #[test]
    fn apply_examples() {
        let id = Permutation::identity(3);
        assert_eq!(id.apply(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        let p = Permutation::from_vec(vec![2, 0, 1]).unwrap();
        assert_eq!(
            p.apply(&[10.0, 20.0, 30.0]).unwrap(),
            vec![30.0, 10.0, 20.0]
        );
        assert!(p.apply(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn from_vec_rejects_non_bijections() {
        assert!(Permutation::from_vec(vec![0, 0, 1]).is_err());
        assert!(Permutation::from_vec(vec![0, 3, 1]).is_err());
    }

    #[test]
    fn duplicates_are_counted() {
        let id = Permutation::identity(3);
        let plan = PermutationPlan::from_permutations(3, vec![id.clone(), id.clone(), id]).unwrap();
        assert_eq!(plan.duplicate_count(), 2);
    }

    #[test]
    fn text_round_trip() {
        let plan = PermutationPlan::sample(6, 50, 99).unwrap();
        let mut buf = Vec::new();
        plan.write_text(&mut buf).unwrap();
        let back = PermutationPlan::read_text(buf.as_slice()).unwrap();
        assert_eq!(plan, back);
    }

    #[test]
    fn text_rejects_truncated() {
        let text = "permci-plan v1 n=3 m=2 seed=1 exhaustive=false\n0 1 2\n";
        assert!(PermutationPlan::read_text(text.as_bytes()).is_err());
        let text = "permci-plan v1 n=3 m=1 seed=1 exhaustive=false\n0 1 1\n";
        assert!(PermutationPlan::read_text(text.as_bytes()).is_err());
    }
}
