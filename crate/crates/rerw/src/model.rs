//! Model parameters, walk state and the exact single-step dynamics.
//!
//! The walk starts at the origin; at time 1 it moves right with probability
//! q. At time n+1 it recalls a past instant `beta` with probability
//! proportional to that instant's memory weight, then repeats that step's
//! direction with probability p (flips it otherwise):
//!
//! ```text
//! X_{n+1} = alpha_{n+1} * X_{beta_{n+1}},   S_{n+1} = S_n + X_{n+1}.
//! ```
//!
//! Recalling an instant reinforces it: weight c is added at `beta` and the
//! new instant enters with weight 1. Alongside the position the walk tracks
//! the weighted signed sum `Y_n = sum_k X_k rho_n(k)`, which drives every
//! conditional expectation:
//!
//! ```text
//! Y_{n+1} = Y_n + (alpha_{n+1} + c) * X_{beta_{n+1}},
//! E[X_{n+1} | F_n] = a Y_n / ((c+1)n - c),       a = 2p - 1.
//! ```

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::sampler::{MemoryState, SamplerKind};

/// Half-width of the band around a = (1-c)/2 classified as critical.
/// Exact float equality is too brittle; parameters aimed at the critical
/// line should be exactly representable pairs like (p, c) = (0.25, 2).
pub const CRITICAL_TOL: f64 = 1e-12;

/// Model parameters (p, c, q) with the derived a = 2p-1 and
/// lambda = 1/(c+1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WalkParams {
    p: f64,
    c: f64,
    q: f64,
    a: f64,
    lambda: f64,
}

impl WalkParams {
    pub fn new(p: f64, c: f64, q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) || !p.is_finite() {
            return Err(Error::InvalidParam(format!(
                "memory parameter p = {p} outside [0, 1]"
            )));
        }
        if !(0.0..=1.0).contains(&q) || !q.is_finite() {
            return Err(Error::InvalidParam(format!(
                "first-step bias q = {q} outside [0, 1]"
            )));
        }
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::InvalidParam(format!(
                "reinforcement intensity c = {c} must be a non-negative real"
            )));
        }
        let a = 2.0 * p - 1.0;
        if a + c == 0.0 {
            return Err(Error::InvalidParam(format!(
                "a + c = 0 (a = 2p-1 = {a}, c = {c}); the decomposition \
                 N_n = S_n - (a/(a+c))Y_n is undefined"
            )));
        }
        Ok(WalkParams {
            p,
            c,
            q,
            a,
            lambda: 1.0 / (c + 1.0),
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `1 + 2ac + c^2`, the conditional second moment of the increment
    /// `(alpha + c) X_beta` of Y.
    pub fn sigma_sq(&self) -> f64 {
        1.0 + 2.0 * self.a * self.c + self.c * self.c
    }

    /// Total memory weight at time n, `(c+1)n - c`.
    pub fn total_weight(&self, n: u64) -> f64 {
        (self.c + 1.0) * n as f64 - self.c
    }

    /// p = 1/2 makes the increments independent coin flips; the simulator
    /// accepts it, analytic front-ends warn.
    pub fn is_memoryless(&self) -> bool {
        self.a == 0.0
    }

    pub fn regime(&self) -> Regime {
        let boundary = (1.0 - self.c) / 2.0;
        if self.a < boundary - CRITICAL_TOL {
            Regime::Diffusive
        } else if self.a > boundary + CRITICAL_TOL {
            Regime::Superdiffusive
        } else {
            Regime::Critical
        }
    }
}

/// Scaling regime: a < (1-c)/2 diffusive, = critical, > superdiffusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Diffusive,
    Critical,
    Superdiffusive,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Diffusive => "diffusive",
            Regime::Critical => "critical",
            Regime::Superdiffusive => "superdiffusive",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Bit-packed store of step signs (+1/-1), 1-indexed access.
#[derive(Debug, Clone, Default)]
struct SignVec {
    words: Vec<u64>,
    len: u64,
}

impl SignVec {
    #[inline]
    fn push(&mut self, positive: bool) {
        let bit = self.len;
        if (bit >> 6) as usize >= self.words.len() {
            self.words.push(0);
        }
        if positive {
            self.words[(bit >> 6) as usize] |= 1u64 << (bit & 63);
        }
        self.len += 1;
    }

    /// Sign of X_k for 1 <= k <= len.
    #[inline]
    fn get(&self, k: u64) -> i8 {
        debug_assert!(k >= 1 && k <= self.len);
        let bit = k - 1;
        if self.words[(bit >> 6) as usize] >> (bit & 63) & 1 == 1 {
            1
        } else {
            -1
        }
    }

    fn bytes(&self) -> usize {
        self.words.capacity() * 8
    }
}

/// Everything produced by one step, handed to streaming observers.
///
/// For k = 1 there is no recalled instant: `beta` is 0 and `alpha`/`x_beta`
/// both carry the first step's sign.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord {
    pub k: u64,
    pub s: i64,
    pub y: f64,
    pub alpha: i8,
    pub beta: u64,
    pub x_beta: i8,
}

/// Streaming per-step hook. Statistics that need every step (quadratic
/// strong law sums, center of mass, quadratic variations, running maxima)
/// accumulate through this instead of storing 10^8-step paths.
pub trait StepObserver {
    fn observe(&mut self, rec: &StepRecord);
}

/// State of a single walk. Single-threaded by construction; ensembles get
/// their parallelism by running many independent walks.
#[derive(Debug, Clone)]
pub struct WalkState {
    params: WalkParams,
    n: u64,
    s: i64,
    y: f64,
    signs: SignVec,
    memory: MemoryState,
    rng: ChaCha8Rng,
}

impl WalkState {
    /// Stream 0 of `seed`; see [`WalkState::with_stream`].
    pub fn new(params: WalkParams, backend: SamplerKind, seed: u64) -> Self {
        Self::with_stream(params, backend, seed, 0)
    }

    /// Creates the walk and performs the first step: X_1 = +1 with
    /// probability q. Consumes one uniform.
    pub fn with_stream(
        params: WalkParams,
        backend: SamplerKind,
        master_seed: u64,
        stream: u64,
    ) -> Self {
        let mut rng = stream_rng(master_seed, stream);
        let u: f64 = rng.gen();
        let x1: i8 = if u < params.q { 1 } else { -1 };
        let mut signs = SignVec::default();
        signs.push(x1 > 0);
        WalkState {
            params,
            n: 1,
            s: x1 as i64,
            y: x1 as f64,
            signs,
            memory: MemoryState::new(backend, params.c),
            rng,
        }
    }

    /// Advances the walk by one step.
    ///
    /// Draw order is fixed: the memory index first (2 uniforms for the
    /// record backend, 1 for the tree backend), then one uniform for alpha.
    pub fn step(&mut self) -> StepRecord {
        debug_assert_eq!(self.memory.time(), self.n);
        let beta = self.memory.draw(&mut self.rng);
        let u: f64 = self.rng.gen();
        let alpha: i8 = if u < self.params.p { 1 } else { -1 };
        let x_beta = self.signs.get(beta);
        let x = alpha * x_beta;
        self.s += x as i64;
        self.y += (alpha as f64 + self.params.c) * x_beta as f64;
        self.signs.push(x > 0);
        self.memory.record(beta);
        self.n += 1;
        StepRecord {
            k: self.n,
            s: self.s,
            y: self.y,
            alpha,
            beta,
            x_beta,
        }
    }

    /// Draws a hypothetical next step without advancing the state
    /// (for conditional-moment diagnostics at a fixed history).
    pub fn sample_increment<R: Rng>(&self, rng: &mut R) -> StepRecord {
        let beta = self.memory.draw(rng);
        let u: f64 = rng.gen();
        let alpha: i8 = if u < self.params.p { 1 } else { -1 };
        let x_beta = self.signs.get(beta);
        let x = alpha * x_beta;
        StepRecord {
            k: self.n + 1,
            s: self.s + x as i64,
            y: self.y + (alpha as f64 + self.params.c) * x_beta as f64,
            alpha,
            beta,
            x_beta,
        }
    }

    /// The k = 1 record (beta = 0 sentinel).
    pub fn first_record(&self) -> StepRecord {
        let x1 = self.signs.get(1);
        StepRecord {
            k: 1,
            s: x1 as i64,
            y: x1 as f64,
            alpha: x1,
            beta: 0,
            x_beta: x1,
        }
    }

    pub fn n(&self) -> u64 {
        self.n
    }
    pub fn s(&self) -> i64 {
        self.s
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn params(&self) -> &WalkParams {
        &self.params
    }
    pub fn memory(&self) -> &MemoryState {
        &self.memory
    }

    /// Current heap footprint of the path-dependent state.
    pub fn memory_bytes(&self) -> usize {
        self.memory.memory_bytes() + self.signs.bytes()
    }
}

/// Estimated peak heap bytes for one walk of `n_steps` steps.
pub fn estimated_walk_bytes(n_steps: u64, backend: SamplerKind) -> usize {
    let signs = (n_steps / 8 + 16) as usize;
    let memory = match backend {
        SamplerKind::Record => {
            let per = if n_steps < (1 << 31) { 4 } else { 8 };
            (n_steps as usize).saturating_mul(per)
        }
        SamplerKind::Tree => (n_steps as usize).saturating_mul(8),
    };
    signs + memory
}

/// One checkpoint row of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckpointRecord {
    pub k: u64,
    pub s: i64,
    pub y: f64,
}

/// Per-checkpoint record of a single walk. The first record is always at
/// k = 1; checkpoint indices are strictly increasing.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: WalkParams,
    pub seed: u64,
    pub checkpoints: Vec<u64>,
    pub records: Vec<CheckpointRecord>,
}

impl Trajectory {
    /// CSV rows `step,S,Y`, integers for step and S, full-precision decimal
    /// for Y.
    pub fn to_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "step,S,Y")?;
        for r in &self.records {
            writeln!(w, "{},{},{}", r.k, r.s, crate::fmt_f64_full(r.y))?;
        }
        Ok(())
    }
}

fn validate_checkpoints(checkpoints: &[u64], n_steps: u64) -> Result<()> {
    for pair in checkpoints.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::CheckpointsNotIncreasing);
        }
    }
    for &k in checkpoints {
        if k < 1 || k > n_steps {
            return Err(Error::CheckpointOutOfRange {
                checkpoint: k,
                n_steps,
            });
        }
    }
    Ok(())
}

/// Runs a walk for `n_steps` steps recording (S_k, Y_k) at the requested
/// checkpoints (k = 1 is always recorded). Deterministic in
/// (params, n_steps, seed, backend, checkpoints).
pub fn run(
    params: WalkParams,
    n_steps: u64,
    seed: u64,
    checkpoints: &[u64],
    backend: SamplerKind,
) -> Result<Trajectory> {
    run_with_observers(params, n_steps, seed, checkpoints, backend, &mut [])
}

/// [`run`] with streaming observers invoked once per step, k = 1 included.
pub fn run_with_observers(
    params: WalkParams,
    n_steps: u64,
    seed: u64,
    checkpoints: &[u64],
    backend: SamplerKind,
    observers: &mut [&mut dyn StepObserver],
) -> Result<Trajectory> {
    if n_steps < 1 {
        return Err(Error::InvalidArgument("n_steps must be >= 1".into()));
    }
    validate_checkpoints(checkpoints, n_steps)?;

    let mut walk = WalkState::new(params, backend, seed);
    let first = walk.first_record();
    for obs in observers.iter_mut() {
        obs.observe(&first);
    }

    let mut recorded = Vec::with_capacity(checkpoints.len() + 1);
    let mut wanted = checkpoints.iter().copied().peekable();
    recorded.push(CheckpointRecord {
        k: 1,
        s: walk.s(),
        y: walk.y(),
    });
    if wanted.peek() == Some(&1) {
        wanted.next();
    }

    for _ in 1..n_steps {
        let rec = walk.step();
        for obs in observers.iter_mut() {
            obs.observe(&rec);
        }
        if wanted.peek() == Some(&rec.k) {
            wanted.next();
            recorded.push(CheckpointRecord {
                k: rec.k,
                s: rec.s,
                y: rec.y,
            });
        }
    }

    Ok(Trajectory {
        params,
        seed,
        checkpoints: recorded.iter().map(|r| r.k).collect(),
        records: recorded,
    })
}
