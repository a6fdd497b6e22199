//! Memory-index sampling.
//!
//! After n steps the memory weight of instant k is
//! `rho_n(k) = 1 + c * #{j : beta_j = k}` for k < n and `rho_n(n) = 1`,
//! with total weight `(c+1)n - c`. The next recalled instant is drawn with
//! probability `rho_n(k) / ((c+1)n - c)`.
//!
//! Two interchangeable backends realize that law:
//!
//! * [`RecordMemory`] — O(1) per draw. The law is an exact two-part mixture:
//!   with probability `n / ((c+1)n - c)` a uniform index in 1..=n (the unit
//!   base mass), otherwise a uniform element of the reinforcement record
//!   (n-1 past draws, each carrying extra mass c). Consumes exactly 2
//!   uniforms per draw (branch + index).
//! * [`TreeMemory`] — O(log n) per draw via inverse prefix-sum search on a
//!   Fenwick tree holding the explicit weights. Consumes exactly 1 uniform
//!   per draw. Kept as an independent cross-check of the mixture backend and
//!   as the natural backend for generalized weight rules.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Backend selector, `--sampler record|tree` on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Record,
    Tree,
}

impl std::str::FromStr for SamplerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "record" => Ok(SamplerKind::Record),
            "tree" => Ok(SamplerKind::Tree),
            other => Err(Error::InvalidArgument(format!(
                "unknown sampler backend '{other}' (expected 'record' or 'tree')"
            ))),
        }
    }
}

impl std::fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SamplerKind::Record => write!(f, "record"),
            SamplerKind::Tree => write!(f, "tree"),
        }
    }
}

/// Growable index store: 32-bit entries while indices fit, promoted to
/// 64-bit past 2^31. Memory is the binding constraint at large n.
#[derive(Debug, Clone)]
enum IndexVec {
    Small(Vec<u32>),
    Large(Vec<u64>),
}

impl IndexVec {
    fn new() -> Self {
        IndexVec::Small(Vec::new())
    }

    #[inline]
    fn push(&mut self, v: u64) {
        match self {
            IndexVec::Small(xs) => {
                if v <= u32::MAX as u64 {
                    xs.push(v as u32);
                } else {
                    let mut big: Vec<u64> = xs.iter().map(|&x| x as u64).collect();
                    big.push(v);
                    *self = IndexVec::Large(big);
                }
            }
            IndexVec::Large(xs) => xs.push(v),
        }
    }

    #[inline]
    fn get(&self, i: usize) -> u64 {
        match self {
            IndexVec::Small(xs) => xs[i] as u64,
            IndexVec::Large(xs) => xs[i],
        }
    }

    fn len(&self) -> usize {
        match self {
            IndexVec::Small(xs) => xs.len(),
            IndexVec::Large(xs) => xs.len(),
        }
    }

    fn bytes(&self) -> usize {
        match self {
            IndexVec::Small(xs) => xs.capacity() * 4,
            IndexVec::Large(xs) => xs.capacity() * 8,
        }
    }

    fn iter(&self) -> Box<dyn Iterator<Item = u64> + '_> {
        match self {
            IndexVec::Small(xs) => Box::new(xs.iter().map(|&x| x as u64)),
            IndexVec::Large(xs) => Box::new(xs.iter().copied()),
        }
    }
}

/// O(1)-per-draw backend: the reinforcement record is the list of past
/// draws `beta_2..beta_n`; index k implicitly carries weight
/// `1 + c * multiplicity(k)`.
#[derive(Debug, Clone)]
pub struct RecordMemory {
    c: f64,
    n: u64,
    history: IndexVec,
}

impl RecordMemory {
    pub fn new(c: f64) -> Self {
        RecordMemory {
            c,
            n: 1,
            history: IndexVec::new(),
        }
    }

    /// Rebuilds a memory from a fixed draw history (`history[j]` is the draw
    /// made at time j+2, so it must lie in `1..=j+1`).
    pub fn from_history(c: f64, history: &[u64]) -> Result<Self> {
        validate_history(history)?;
        let mut mem = RecordMemory::new(c);
        for &b in history {
            mem.record(b);
        }
        Ok(mem)
    }

    /// Draws the next memory index without mutating the state.
    /// Consumes exactly two uniforms: branch, then index.
    #[inline]
    pub fn draw<R: Rng>(&self, rng: &mut R) -> u64 {
        let u_branch: f64 = rng.gen();
        let u_index: f64 = rng.gen();
        let n = self.n;
        let total = (self.c + 1.0) * n as f64 - self.c;
        if u_branch * total < n as f64 {
            // unit base mass: uniform over 1..=n
            (1 + (u_index * n as f64) as u64).min(n)
        } else {
            let len = self.history.len();
            debug_assert!(len > 0);
            let i = ((u_index * len as f64) as usize).min(len - 1);
            self.history.get(i)
        }
    }

    /// Registers the draw actually used for step n+1 and advances time.
    #[inline]
    pub fn record(&mut self, beta: u64) {
        debug_assert!(beta >= 1 && beta <= self.n);
        self.history.push(beta);
        self.n += 1;
    }

    pub fn time(&self) -> u64 {
        self.n
    }

    /// Exact per-index law implied by the current record.
    pub fn distribution(&self) -> Vec<f64> {
        let n = self.n as usize;
        let mut w = vec![1.0; n];
        for b in self.history.iter() {
            w[(b - 1) as usize] += self.c;
        }
        let total = (self.c + 1.0) * self.n as f64 - self.c;
        w.iter_mut().for_each(|x| *x /= total);
        w
    }

    pub fn memory_bytes(&self) -> usize {
        self.history.bytes() + std::mem::size_of::<Self>()
    }
}

/// Fenwick tree over f64 weights, 1-indexed internally, with O(log n)
/// append, point update, prefix sum and rank query.
#[derive(Debug, Clone)]
pub struct Fenwick {
    t: Vec<f64>, // t[0] unused
}

impl Fenwick {
    pub fn new() -> Self {
        Fenwick { t: vec![0.0] }
    }

    pub fn len(&self) -> usize {
        self.t.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Appends a new trailing element with value `v`.
    pub fn push(&mut self, v: f64) {
        let i = self.t.len();
        let lsb = i & i.wrapping_neg();
        // t[i] covers the range (i-lsb, i]
        let covered = self.prefix(i - 1) - self.prefix(i - lsb);
        self.t.push(v + covered);
    }

    /// Adds `delta` to element `i` (0-based).
    pub fn add(&mut self, i: usize, delta: f64) {
        let mut idx = i + 1;
        while idx < self.t.len() {
            self.t[idx] += delta;
            idx += idx & idx.wrapping_neg();
        }
    }

    /// Sum of the first `i` elements (0-based count).
    pub fn prefix(&self, mut i: usize) -> f64 {
        let mut s = 0.0;
        while i > 0 {
            s += self.t[i];
            i -= i & i.wrapping_neg();
        }
        s
    }

    pub fn total(&self) -> f64 {
        self.prefix(self.len())
    }

    /// Value of element `i` (0-based).
    pub fn value(&self, i: usize) -> f64 {
        self.prefix(i + 1) - self.prefix(i)
    }

    /// Smallest 0-based index `i` with `prefix(i+1) >= target`, assuming
    /// non-negative values. Clamped to the last element.
    pub fn rank(&self, target: f64) -> usize {
        let n = self.len();
        let mut pos = 0usize;
        let mut rem = target;
        let mut bit = n.next_power_of_two();
        while bit > 0 {
            let next = pos + bit;
            if next <= n && self.t[next] < rem {
                rem -= self.t[next];
                pos = next;
            }
            bit >>= 1;
        }
        pos.min(n - 1)
    }
}

impl Default for Fenwick {
    fn default() -> Self {
        Self::new()
    }
}

/// O(log n)-per-draw backend holding explicit weights.
#[derive(Debug, Clone)]
pub struct TreeMemory {
    c: f64,
    n: u64,
    tree: Fenwick,
}

impl TreeMemory {
    pub fn new(c: f64) -> Self {
        let mut tree = Fenwick::new();
        tree.push(1.0);
        TreeMemory { c, n: 1, tree }
    }

    pub fn from_history(c: f64, history: &[u64]) -> Result<Self> {
        validate_history(history)?;
        let mut mem = TreeMemory::new(c);
        for &b in history {
            mem.record(b);
        }
        Ok(mem)
    }

    /// Inverse prefix-sum draw. Consumes exactly one uniform.
    #[inline]
    pub fn draw<R: Rng>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.gen();
        let total = (self.c + 1.0) * self.n as f64 - self.c;
        (self.tree.rank(u * total) + 1) as u64
    }

    #[inline]
    pub fn record(&mut self, beta: u64) {
        debug_assert!(beta >= 1 && beta <= self.n);
        self.tree.add((beta - 1) as usize, self.c);
        self.tree.push(1.0);
        self.n += 1;
    }

    pub fn time(&self) -> u64 {
        self.n
    }

    pub fn distribution(&self) -> Vec<f64> {
        let total = (self.c + 1.0) * self.n as f64 - self.c;
        (0..self.tree.len())
            .map(|i| self.tree.value(i) / total)
            .collect()
    }

    pub fn memory_bytes(&self) -> usize {
        self.tree.t.capacity() * 8 + std::mem::size_of::<Self>()
    }
}

/// Runtime-selected backend; one per walk, never shared.
#[derive(Debug, Clone)]
pub enum MemoryState {
    Record(RecordMemory),
    Tree(TreeMemory),
}

impl MemoryState {
    pub fn new(kind: SamplerKind, c: f64) -> Self {
        match kind {
            SamplerKind::Record => MemoryState::Record(RecordMemory::new(c)),
            SamplerKind::Tree => MemoryState::Tree(TreeMemory::new(c)),
        }
    }

    #[inline]
    pub fn draw<R: Rng>(&self, rng: &mut R) -> u64 {
        match self {
            MemoryState::Record(m) => m.draw(rng),
            MemoryState::Tree(m) => m.draw(rng),
        }
    }

    #[inline]
    pub fn record(&mut self, beta: u64) {
        match self {
            MemoryState::Record(m) => m.record(beta),
            MemoryState::Tree(m) => m.record(beta),
        }
    }

    pub fn time(&self) -> u64 {
        match self {
            MemoryState::Record(m) => m.time(),
            MemoryState::Tree(m) => m.time(),
        }
    }

    pub fn distribution(&self) -> Vec<f64> {
        match self {
            MemoryState::Record(m) => m.distribution(),
            MemoryState::Tree(m) => m.distribution(),
        }
    }

    pub fn memory_bytes(&self) -> usize {
        match self {
            MemoryState::Record(m) => m.memory_bytes(),
            MemoryState::Tree(m) => m.memory_bytes(),
        }
    }

    pub fn kind(&self) -> SamplerKind {
        match self {
            MemoryState::Record(_) => SamplerKind::Record,
            MemoryState::Tree(_) => SamplerKind::Tree,
        }
    }
}

fn validate_history(history: &[u64]) -> Result<()> {
    for (i, &b) in history.iter().enumerate() {
        // entry i is the draw at time i+2 and must point to an instant < i+2
        let max = (i + 1) as u64;
        if b < 1 || b > max {
            return Err(Error::InvalidHistory(format!(
                "entry {i} (draw at time {}) is {b}, outside 1..={max}",
                i + 2
            )));
        }
    }
    Ok(())
}

/// Exact law of the next memory index for a fixed draw history:
/// `(rho_n(1), ..., rho_n(n)) / ((c+1)n - c)` with n = history.len() + 1.
pub fn exact_distribution(history: &[u64], c: f64) -> Result<Vec<f64>> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "reinforcement c = {c} must be a non-negative real"
        )));
    }
    validate_history(history)?;
    let n = history.len() + 1;
    let mut w = vec![1.0; n];
    for &b in history {
        w[(b - 1) as usize] += c;
    }
    let total = (c + 1.0) * n as f64 - c;
    w.iter_mut().for_each(|x| *x /= total);
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn fenwick_matches_naive() {
        let mut f = Fenwick::new();
        let mut naive: Vec<f64> = Vec::new();
        let vals = [2.0, 4.0, 1.0, 0.5, 1.25, 3.0, 0.25, 7.0, 1.0];
        for &v in &vals {
            f.push(v);
            naive.push(v);
        }
        f.add(2, 1.5);
        naive[2] += 1.5;
        f.add(7, -0.5);
        naive[7] -= 0.5;
        for i in 0..=naive.len() {
            let want: f64 = naive[..i].iter().sum();
            assert!((f.prefix(i) - want).abs() < 1e-12);
        }
        for i in 0..naive.len() {
            assert!((f.value(i) - naive[i]).abs() < 1e-12);
        }
        // rank: smallest i with prefix(i+1) >= target
        let mut acc = 0.0;
        for (i, &v) in naive.iter().enumerate() {
            acc += v;
            assert_eq!(f.rank(acc - 1e-9), i);
        }
        assert_eq!(f.rank(0.0), 0);
        assert_eq!(f.rank(1e12), naive.len() - 1);
    }

    #[test]
    fn n1_always_returns_one() {
        let mut rng = stream_rng(1, 0);
        let rec = RecordMemory::new(2.0);
        let tree = TreeMemory::new(2.0);
        for _ in 0..200 {
            assert_eq!(rec.draw(&mut rng), 1);
            assert_eq!(tree.draw(&mut rng), 1);
        }
    }

    #[test]
    fn n2_law_is_1_plus_c_over_2_plus_c() {
        for c in [0.0, 0.5, 1.0, 3.0] {
            let rec = RecordMemory::from_history(c, &[1]).unwrap();
            let d = rec.distribution();
            assert!((d[0] - (1.0 + c) / (2.0 + c)).abs() < 1e-15);
            assert!((d[1] - 1.0 / (2.0 + c)).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_distribution_examples() {
        assert_eq!(exact_distribution(&[], 2.0).unwrap(), vec![1.0]);
        let d = exact_distribution(&[1], 2.0).unwrap();
        assert!((d[0] - 0.75).abs() < 1e-15 && (d[1] - 0.25).abs() < 1e-15);
        // c = 0: uniform regardless of history
        let d0 = exact_distribution(&[1, 2, 1], 0.0).unwrap();
        for &x in &d0 {
            assert!((x - 0.25).abs() < 1e-15);
        }
        assert!(exact_distribution(&[2], 1.0).is_err());
        assert!(exact_distribution(&[1, 5], 1.0).is_err());
    }

    #[test]
    fn tree_weights_after_fixed_history() {
        // history {beta_2=1, beta_3=1}, c=1: weights (3,1,1), P(1) = 3/5
        let tree = TreeMemory::from_history(1.0, &[1, 1]).unwrap();
        let d = tree.distribution();
        assert!((d[0] - 0.6).abs() < 1e-15);
        assert!((d[1] - 0.2).abs() < 1e-15);
        assert!((d[2] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn backends_agree_with_exact_distribution() {
        let history = [1u64, 2, 1, 3, 3, 1, 5];
        for c in [0.0, 0.7, 2.5] {
            let want = exact_distribution(&history, c).unwrap();
            let rec = RecordMemory::from_history(c, &history).unwrap();
            let tree = TreeMemory::from_history(c, &history).unwrap();
            for ((a, b), w) in rec
                .distribution()
                .iter()
                .zip(tree.distribution().iter())
                .zip(want.iter())
            {
                assert!((a - w).abs() < 1e-12);
                assert!((b - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn distribution_sums_to_one() {
        let history = [1u64, 1, 3, 2, 4, 4, 4];
        for c in [0.0, 0.3, 1.0, 9.0] {
            let d = exact_distribution(&history, c).unwrap();
            let s: f64 = d.iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(d.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn empirical_draw_frequencies_match_law() {
        // modest-resolution check; the acceptance suite runs the full
        // chi-square protocol
        let history = [1u64, 1, 2, 4];
        let c = 1.5;
        let want = exact_distribution(&history, c).unwrap();
        let rec = RecordMemory::from_history(c, &history).unwrap();
        let tree = TreeMemory::from_history(c, &history).unwrap();
        let mut rng = stream_rng(7, 0);
        let draws = 200_000;
        let mut count_rec = vec![0u64; want.len()];
        let mut count_tree = vec![0u64; want.len()];
        for _ in 0..draws {
            count_rec[(rec.draw(&mut rng) - 1) as usize] += 1;
            count_tree[(tree.draw(&mut rng) - 1) as usize] += 1;
        }
        for (counts, label) in [(&count_rec, "record"), (&count_tree, "tree")] {
            for (k, (&cnt, &w)) in counts.iter().zip(want.iter()).enumerate() {
                let se = (w * (1.0 - w) / draws as f64).sqrt();
                let dev = (cnt as f64 / draws as f64 - w).abs();
                assert!(dev < 5.0 * se, "{label} index {k}: dev {dev} > 5se {se}");
            }
        }
    }

    #[test]
    fn index_vec_promotes_to_u64() {
        let mut v = IndexVec::new();
        v.push(3);
        v.push(u32::MAX as u64 + 5);
        v.push(7);
        assert_eq!(v.get(0), 3);
        assert_eq!(v.get(1), u32::MAX as u64 + 5);
        assert_eq!(v.get(2), 7);
        assert_eq!(v.len(), 3);
    }
}
