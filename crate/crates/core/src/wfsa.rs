//! Chain-structured WFSAs and the dynamic programs that score them.
//!
//! A WFSA with `k` main transitions has states `0..=k`. State 0 is the start
//! state and carries a free self-loop of weight 1; every other state is final
//! and carries a self-loop whose weight changes per token. Main transition
//! `i` moves from state `i - 1` to state `i`.
//!
//! Two semirings run over the same recurrence: plus-times gives the Forward
//! score of a document, and the interval semiring tracks the smallest and
//! largest path score so that extreme paths can be recovered even when
//! main-transition weights are negative.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Guard for [`enumerate_paths`].
pub const MAX_ENUMERATED_PATHS: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WfsaShape {
    main_transitions: usize,
}

impl WfsaShape {
    pub fn new(main_transitions: usize) -> Result<Self> {
        if main_transitions == 0 {
            return Err(Error::InvalidConfig(
                "a WFSA needs at least one main transition".into(),
            ));
        }
        Ok(WfsaShape { main_transitions })
    }

    /// Number of main transitions `k`.
    #[inline]
    pub fn main_transitions(&self) -> usize {
        self.main_transitions
    }

    /// `k + 1`, counting the start state.
    #[inline]
    pub fn num_states(&self) -> usize {
        self.main_transitions + 1
    }

    pub fn final_states(&self) -> core::ops::RangeInclusive<usize> {
        1..=self.main_transitions
    }
}

/// Transition weights produced by one token.
///
/// Index `i - 1` holds the weights for state `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimestepWeights {
    pub self_loop: Vec<f64>,
    pub main: Vec<f64>,
}

impl TimestepWeights {
    pub fn new(self_loop: Vec<f64>, main: Vec<f64>) -> Self {
        debug_assert_eq!(self_loop.len(), main.len());
        TimestepWeights { self_loop, main }
    }

    pub fn zeros(k: usize) -> Self {
        TimestepWeights {
            self_loop: vec![0.0; k],
            main: vec![0.0; k],
        }
    }

    fn width(&self) -> usize {
        self.main.len()
    }
}

fn check_weights(shape: WfsaShape, weights: &[TimestepWeights]) -> Result<()> {
    let k = shape.main_transitions();
    if let Some((t, w)) = weights
        .iter()
        .enumerate()
        .find(|(_, w)| w.width() != k || w.self_loop.len() != k)
    {
        return Err(Error::ShapeMismatch(alloc::format!(
            "timestep {} carries {} weights for a WFSA with {} main transitions",
            t + 1,
            w.width(),
            k
        )));
    }
    Ok(())
}

pub trait Semiring: Copy {
    fn zero() -> Self;
    fn one() -> Self;
    fn plus(self, other: Self) -> Self;
    fn times(self, other: Self) -> Self;
    fn from_weight(weight: f64) -> Self;
    fn is_finite(&self) -> bool;
}

impl Semiring for f64 {
    #[inline]
    fn zero() -> Self {
        0.0
    }
    #[inline]
    fn one() -> Self {
        1.0
    }
    #[inline]
    fn plus(self, other: Self) -> Self {
        self + other
    }
    #[inline]
    fn times(self, other: Self) -> Self {
        self * other
    }
    #[inline]
    fn from_weight(weight: f64) -> Self {
        weight
    }
    #[inline]
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

/// Smallest and largest score over a set of paths; `Empty` when the set is empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extremes {
    Empty,
    Range { min: f64, max: f64 },
}

impl Extremes {
    pub fn min(&self) -> Option<f64> {
        match *self {
            Extremes::Empty => None,
            Extremes::Range { min, .. } => Some(min),
        }
    }

    pub fn max(&self) -> Option<f64> {
        match *self {
            Extremes::Empty => None,
            Extremes::Range { max, .. } => Some(max),
        }
    }
}

impl Semiring for Extremes {
    fn zero() -> Self {
        Extremes::Empty
    }

    fn one() -> Self {
        Extremes::Range { min: 1.0, max: 1.0 }
    }

    fn plus(self, other: Self) -> Self {
        match (self, other) {
            (Extremes::Empty, x) | (x, Extremes::Empty) => x,
            (Extremes::Range { min: a, max: b }, Extremes::Range { min: c, max: d }) => {
                Extremes::Range {
                    min: a.min(c),
                    max: b.max(d),
                }
            }
        }
    }

    fn times(self, other: Self) -> Self {
        match (self, other) {
            (Extremes::Empty, _) | (_, Extremes::Empty) => Extremes::Empty,
            (Extremes::Range { min: a, max: b }, Extremes::Range { min: c, max: d }) => {
                let products = [a * c, a * d, b * c, b * d];
                Extremes::Range {
                    min: products.iter().copied().fold(f64::INFINITY, f64::min),
                    max: products.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                }
            }
        }
    }

    fn from_weight(weight: f64) -> Self {
        Extremes::Range {
            min: weight,
            max: weight,
        }
    }

    fn is_finite(&self) -> bool {
        match *self {
            Extremes::Empty => true,
            Extremes::Range { min, max } => min.is_finite() && max.is_finite(),
        }
    }
}

/// DP values `c_t^(i)` for `t in 0..=n` and `i in 0..=k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTable<S = f64> {
    k: usize,
    n: usize,
    values: Vec<S>,
}

impl<S: Semiring> ForwardTable<S> {
    #[inline]
    pub fn get(&self, t: usize, state: usize) -> S {
        self.values[t * (self.k + 1) + state]
    }

    pub fn row(&self, t: usize) -> &[S] {
        &self.values[t * (self.k + 1)..(t + 1) * (self.k + 1)]
    }

    /// Values after the whole document, states `0..=k`.
    pub fn final_values(&self) -> &[S] {
        self.row(self.n)
    }

    /// Sum over final states after the whole document.
    pub fn total(&self) -> S {
        self.final_values()[1..]
            .iter()
            .fold(S::zero(), |acc, &v| acc.plus(v))
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn main_transitions(&self) -> usize {
        self.k
    }
}

/// The chain recurrence under an arbitrary semiring.
pub fn forward_table<S: Semiring>(
    shape: WfsaShape,
    weights: &[TimestepWeights],
) -> Result<ForwardTable<S>> {
    check_weights(shape, weights)?;
    let k = shape.main_transitions();
    let n = weights.len();
    let width = k + 1;
    let mut values = vec![S::zero(); (n + 1) * width];
    values[0] = S::one();
    for (t, w) in weights.iter().enumerate() {
        let (prev, cur) = values[t * width..(t + 2) * width].split_at_mut(width);
        cur[0] = S::one();
        for i in 1..=k {
            let stay = prev[i].times(S::from_weight(w.self_loop[i - 1]));
            let advance = prev[i - 1].times(S::from_weight(w.main[i - 1]));
            cur[i] = stay.plus(advance);
        }
        if !cur.iter().all(|v| v.is_finite()) {
            return Err(Error::Overflow { timestep: t + 1 });
        }
    }
    Ok(ForwardTable { k, n, values })
}

/// Forward algorithm under plus-times: the sum of all accepting path scores.
pub fn forward_score(shape: WfsaShape, weights: &[TimestepWeights]) -> Result<ForwardTable<f64>> {
    forward_table::<f64>(shape, weights)
}

/// What one token did on a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PathStep {
    /// Free self-loop on the start state (weight 1).
    Start,
    /// Gated self-loop on the given state (`>= 1`).
    SelfLoop(usize),
    /// Main transition `i`, entering state `i`.
    Main(usize),
}

/// One accepting path, one step per token.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PathRecord {
    pub steps: Vec<PathStep>,
    pub score: f64,
}

impl PathRecord {
    /// Token index consumed by each main transition, in chain order.
    pub fn main_tokens(&self) -> Vec<usize> {
        self.steps
            .iter()
            .enumerate()
            .filter_map(|(t, s)| matches!(s, PathStep::Main(_)).then_some(t))
            .collect()
    }

    /// Token indices spent looping on `state` (state 0 is the start state).
    pub fn self_loop_tokens(&self, state: usize) -> Vec<usize> {
        self.steps
            .iter()
            .enumerate()
            .filter_map(|(t, s)| match *s {
                PathStep::Start if state == 0 => Some(t),
                PathStep::SelfLoop(q) if q == state => Some(t),
                _ => None,
            })
            .collect()
    }

    /// Token index of the first main transition.
    pub fn start_time(&self) -> Option<usize> {
        self.steps
            .iter()
            .position(|s| matches!(s, PathStep::Main(_)))
    }

    /// State the path ends in, i.e. the number of main transitions taken.
    pub fn end_state(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| matches!(s, PathStep::Main(_)))
            .count()
    }

    /// Product of the weights along the path, multiplied in token order.
    pub fn recompute_score(&self, weights: &[TimestepWeights]) -> f64 {
        self.steps
            .iter()
            .zip(weights)
            .fold(1.0, |acc, (step, w)| match *step {
                PathStep::Start => acc,
                PathStep::SelfLoop(q) => acc * w.self_loop[q - 1],
                PathStep::Main(i) => acc * w.main[i - 1],
            })
    }
}

fn binomial(n: u128, r: u128) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    (0..r).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of accepting paths over `n` tokens: `sum_{m=1..k} C(n, m)`.
pub fn count_paths(shape: WfsaShape, n: usize) -> u128 {
    (1..=shape.main_transitions() as u128)
        .map(|m| binomial(n as u128, m))
        .sum()
}

/// Every accepting path with its exact product score.
///
/// Exponential in `k`; meant as a brute-force reference for small inputs.
pub fn enumerate_paths(shape: WfsaShape, weights: &[TimestepWeights]) -> Result<Vec<PathRecord>> {
    check_weights(shape, weights)?;
    let n = weights.len();
    let count = count_paths(shape, n);
    if count > MAX_ENUMERATED_PATHS {
        return Err(Error::TooManyPaths {
            count,
            limit: MAX_ENUMERATED_PATHS,
        });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut positions = Vec::new();
    for m in 1..=shape.main_transitions().min(n) {
        choose_positions(n, m, 0, &mut positions, &mut |pos| {
            let mut steps = Vec::with_capacity(n);
            let mut state = 0;
            for t in 0..n {
                if state < pos.len() && pos[state] == t {
                    state += 1;
                    steps.push(PathStep::Main(state));
                } else if state == 0 {
                    steps.push(PathStep::Start);
                } else {
                    steps.push(PathStep::SelfLoop(state));
                }
            }
            let mut record = PathRecord { steps, score: 0.0 };
            record.score = record.recompute_score(weights);
            out.push(record);
        });
    }
    Ok(out)
}

fn choose_positions(
    n: usize,
    m: usize,
    from: usize,
    acc: &mut Vec<usize>,
    emit: &mut dyn FnMut(&[usize]),
) {
    if acc.len() == m {
        emit(acc);
        return;
    }
    let remaining = m - acc.len();
    for t in from..=n - remaining {
        acc.push(t);
        choose_positions(n, m, t + 1, acc, emit);
        acc.pop();
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Origin {
    SelfLoop,
    Main,
}

/// Backpointer to the extreme value at the previous timestep.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Back {
    origin: Origin,
    from_max: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cell {
    min: f64,
    max: f64,
    min_back: Back,
    max_back: Back,
}

/// Highest- and lowest-scoring accepting paths.
///
/// Main-transition weights may be negative, so the product of two small
/// scores can become the largest one. Each cell keeps both the minimum and
/// the maximum reachable score with separate backpointers, which restores
/// optimal substructure under sign changes.
///
/// Returns `None` for an empty document.
pub fn extreme_path(
    shape: WfsaShape,
    weights: &[TimestepWeights],
) -> Result<Option<(PathRecord, PathRecord)>> {
    check_weights(shape, weights)?;
    let k = shape.main_transitions();
    let n = weights.len();
    if n == 0 {
        return Ok(None);
    }
    let width = k + 1;
    // cells[t * width + i]; state 0 is always exactly 1
    let mut cells: Vec<Option<Cell>> = vec![None; (n + 1) * width];
    let start = Back {
        origin: Origin::SelfLoop,
        from_max: true,
    };
    let one = Cell {
        min: 1.0,
        max: 1.0,
        min_back: start,
        max_back: start,
    };
    cells[0] = Some(one);
    for (t, w) in weights.iter().enumerate() {
        let base = (t + 1) * width;
        cells[base] = Some(one);
        for i in 1..=k {
            let mut candidates: [Option<(f64, Back)>; 4] = [None; 4];
            if let Some(c) = cells[t * width + i] {
                let f = w.self_loop[i - 1];
                candidates[0] = Some((c.max * f, Back { origin: Origin::SelfLoop, from_max: true }));
                candidates[1] = Some((c.min * f, Back { origin: Origin::SelfLoop, from_max: false }));
            }
            if let Some(c) = cells[t * width + i - 1] {
                let u = w.main[i - 1];
                candidates[2] = Some((c.max * u, Back { origin: Origin::Main, from_max: true }));
                candidates[3] = Some((c.min * u, Back { origin: Origin::Main, from_max: false }));
            }
            let mut best: Option<Cell> = None;
            for (value, back) in candidates.iter().flatten().copied() {
                best = Some(match best {
                    None => Cell {
                        min: value,
                        max: value,
                        min_back: back,
                        max_back: back,
                    },
                    Some(mut cell) => {
                        if value > cell.max {
                            cell.max = value;
                            cell.max_back = back;
                        }
                        if value < cell.min {
                            cell.min = value;
                            cell.min_back = back;
                        }
                        cell
                    }
                });
            }
            if let Some(cell) = best {
                if !(cell.min.is_finite() && cell.max.is_finite()) {
                    return Err(Error::Overflow { timestep: t + 1 });
                }
            }
            cells[base + i] = best;
        }
    }

    let last = n * width;
    let mut best_max: Option<(f64, usize)> = None;
    let mut best_min: Option<(f64, usize)> = None;
    for i in 1..=k {
        if let Some(c) = cells[last + i] {
            if best_max.is_none_or(|(v, _)| c.max > v) {
                best_max = Some((c.max, i));
            }
            if best_min.is_none_or(|(v, _)| c.min < v) {
                best_min = Some((c.min, i));
            }
        }
    }
    let (Some((max_score, max_state)), Some((min_score, min_state))) = (best_max, best_min) else {
        return Ok(None);
    };
    let backtrack = |mut state: usize, mut want_max: bool, score: f64| -> PathRecord {
        let mut steps = vec![PathStep::Start; n];
        for t in (1..=n).rev() {
            if state == 0 {
                break;
            }
            let cell = cells[t * width + state].expect("backpointer into unreachable cell");
            let back = if want_max { cell.max_back } else { cell.min_back };
            match back.origin {
                Origin::SelfLoop => steps[t - 1] = PathStep::SelfLoop(state),
                Origin::Main => {
                    steps[t - 1] = PathStep::Main(state);
                    state -= 1;
                }
            }
            want_max = back.from_max;
        }
        PathRecord { steps, score }
    };
    Ok(Some((
        backtrack(max_state, true, max_score),
        backtrack(min_state, false, min_score),
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_weights(rng: &mut ChaCha8Rng, k: usize, n: usize, signed_loops: bool) -> Vec<TimestepWeights> {
        (0..n)
            .map(|_| {
                let self_loop = (0..k)
                    .map(|_| {
                        if signed_loops {
                            rng.random_range(-1.0..1.0)
                        } else {
                            rng.random_range(0.01..0.99)
                        }
                    })
                    .collect();
                let main = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
                TimestepWeights::new(self_loop, main)
            })
            .collect()
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn zero_main_weights_give_zero_score() {
        let shape = WfsaShape::new(3).unwrap();
        let weights: Vec<_> = (0..5)
            .map(|_| TimestepWeights::new(vec![0.7; 3], vec![0.0; 3]))
            .collect();
        assert_eq!(forward_score(shape, &weights).unwrap().total(), 0.0);
    }

    #[test]
    fn single_transition_single_token() {
        let shape = WfsaShape::new(1).unwrap();
        let weights = [TimestepWeights::new(vec![0.4], vec![3.0])];
        let table = forward_score(shape, &weights).unwrap();
        assert_eq!(table.get(1, 1), 3.0);
        assert_eq!(table.get(1, 0), 1.0);
        assert_eq!(table.total(), 3.0);
    }

    #[test]
    fn boundary_conditions() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let shape = WfsaShape::new(4).unwrap();
        let weights = random_weights(&mut rng, 4, 6, false);
        let table = forward_score(shape, &weights).unwrap();
        for t in 0..=6 {
            assert_eq!(table.get(t, 0), 1.0);
        }
        for i in 1..=4 {
            assert_eq!(table.get(0, i), 0.0);
        }
    }

    #[test]
    fn zero_shape_rejected() {
        assert!(WfsaShape::new(0).is_err());
    }

    #[test]
    fn overflow_names_timestep() {
        let shape = WfsaShape::new(1).unwrap();
        let weights = [
            TimestepWeights::new(vec![0.5], vec![1e200]),
            TimestepWeights::new(vec![1e200], vec![1.0]),
        ];
        assert_eq!(
            forward_score(shape, &weights).unwrap_err(),
            Error::Overflow { timestep: 2 }
        );
        assert_eq!(
            extreme_path(shape, &weights).unwrap_err(),
            Error::Overflow { timestep: 2 }
        );
    }

    #[test]
    fn mismatched_weight_width_rejected() {
        let shape = WfsaShape::new(2).unwrap();
        let weights = [TimestepWeights::new(vec![0.5], vec![1.0])];
        assert!(matches!(
            forward_score(shape, &weights),
            Err(Error::ShapeMismatch(_))
        ));
    }

    // Independent path count: N(t, i) = N(t-1, i) + N(t-1, i-1), N(t, 0) = 1.
    fn count_by_recursion(k: usize, n: usize) -> usize {
        let mut counts = vec![0usize; k + 1];
        counts[0] = 1;
        for _ in 0..n {
            for i in (1..=k).rev() {
                counts[i] += counts[i - 1];
            }
        }
        counts[1..].iter().sum()
    }

    #[test]
    fn path_counts_match_recursion() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in 1..=4 {
            for n in 0..=7 {
                let shape = WfsaShape::new(k).unwrap();
                let weights = random_weights(&mut rng, k, n, false);
                let paths = enumerate_paths(shape, &weights).unwrap();
                assert_eq!(paths.len(), count_by_recursion(k, n), "k={k} n={n}");
                assert_eq!(count_paths(shape, n) as usize, paths.len());
            }
        }
    }

    #[test]
    fn one_transition_two_tokens() {
        let shape = WfsaShape::new(1).unwrap();
        let weights = [
            TimestepWeights::new(vec![0.25], vec![2.0]),
            TimestepWeights::new(vec![0.5], vec![3.0]),
        ];
        let paths = enumerate_paths(shape, &weights).unwrap();
        assert_eq!(paths.len(), 2);
        assert_eq!(paths[0].steps, vec![PathStep::Main(1), PathStep::SelfLoop(1)]);
        assert_eq!(paths[0].score, 1.0);
        assert_eq!(paths[1].steps, vec![PathStep::Start, PathStep::Main(1)]);
        assert_eq!(paths[1].score, 3.0);
    }

    #[test]
    fn too_few_tokens_for_deep_states() {
        let shape = WfsaShape::new(2).unwrap();
        let weights = [TimestepWeights::new(vec![0.5, 0.5], vec![1.5, 2.0])];
        let paths = enumerate_paths(shape, &weights).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].end_state(), 1);
        assert!(paths.iter().all(|p| p.end_state() != 2));
    }

    #[test]
    fn enumeration_guard() {
        let shape = WfsaShape::new(4).unwrap();
        let weights = vec![TimestepWeights::zeros(4); 80];
        assert!(matches!(
            enumerate_paths(shape, &weights),
            Err(Error::TooManyPaths { .. })
        ));
    }

    #[test]
    fn forward_equals_path_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let k = rng.random_range(1..=4);
            let n = rng.random_range(1..=6);
            let shape = WfsaShape::new(k).unwrap();
            let weights = random_weights(&mut rng, k, n, false);
            let total = forward_score(shape, &weights).unwrap().total();
            let brute: f64 = enumerate_paths(shape, &weights)
                .unwrap()
                .iter()
                .map(|p| p.score)
                .sum();
            assert!(rel_close(total, brute, 1e-9), "{total} vs {brute}");
        }
    }

    #[test]
    fn extreme_path_matches_enumeration_with_signed_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for trial in 0..200 {
            let k = rng.random_range(1..=4);
            let n = rng.random_range(1..=6);
            let shape = WfsaShape::new(k).unwrap();
            let weights = random_weights(&mut rng, k, n, trial % 2 == 0);
            let (hi, lo) = extreme_path(shape, &weights).unwrap().unwrap();
            let paths = enumerate_paths(shape, &weights).unwrap();
            let max = paths.iter().map(|p| p.score).fold(f64::NEG_INFINITY, f64::max);
            let min = paths.iter().map(|p| p.score).fold(f64::INFINITY, f64::min);
            assert!(rel_close(hi.score, max, 1e-9));
            assert!(rel_close(lo.score, min, 1e-9));
            assert!(rel_close(hi.recompute_score(&weights), hi.score, 1e-9));
            assert!(rel_close(lo.recompute_score(&weights), lo.score, 1e-9));
        }
    }

    #[test]
    fn negative_product_dominates() {
        // Two negative main weights multiply into the best path.
        let shape = WfsaShape::new(2).unwrap();
        let weights = [
            TimestepWeights::new(vec![0.5, 0.5], vec![-3.0, 0.1]),
            TimestepWeights::new(vec![0.5, 0.5], vec![0.2, -4.0]),
            TimestepWeights::new(vec![0.5, 0.9], vec![0.3, 0.1]),
        ];
        let (hi, lo) = extreme_path(shape, &weights).unwrap().unwrap();
        let paths = enumerate_paths(shape, &weights).unwrap();
        let best = paths.iter().max_by(|a, b| a.score.total_cmp(&b.score)).unwrap();
        assert_eq!(hi.score, best.score);
        assert_eq!(hi.steps, best.steps);
        assert_eq!(hi.main_tokens(), vec![0, 1]);
        assert!((hi.score - 10.8).abs() < 1e-12);
        let worst = paths.iter().min_by(|a, b| a.score.total_cmp(&b.score)).unwrap();
        assert_eq!(lo.score, worst.score);
    }

    #[test]
    fn single_candidate_max_equals_min() {
        let shape = WfsaShape::new(1).unwrap();
        let weights = [TimestepWeights::new(vec![0.3], vec![-2.5])];
        let (hi, lo) = extreme_path(shape, &weights).unwrap().unwrap();
        assert_eq!(hi, lo);
        assert_eq!(hi.score, -2.5);
    }

    #[test]
    fn positive_weights_match_max_product_viterbi() {
        // Plain max-product DP without min tracking suffices for positive weights.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let k = rng.random_range(1..=4);
            let n = rng.random_range(1..=8);
            let shape = WfsaShape::new(k).unwrap();
            let weights: Vec<_> = (0..n)
                .map(|_| {
                    TimestepWeights::new(
                        (0..k).map(|_| rng.random_range(0.01..0.99)).collect(),
                        (0..k).map(|_| rng.random_range(0.01..3.0)).collect(),
                    )
                })
                .collect();
            let mut best = vec![f64::NEG_INFINITY; k + 1];
            best[0] = 1.0;
            for w in &weights {
                for i in (1..=k).rev() {
                    best[i] = (best[i] * w.self_loop[i - 1]).max(best[i - 1] * w.main[i - 1]);
                }
            }
            let viterbi = best[1..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let (hi, _) = extreme_path(shape, &weights).unwrap().unwrap();
            assert!(rel_close(hi.score, viterbi, 1e-12));
        }
    }

    #[test]
    fn interval_semiring_agrees_with_backtracked_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..100 {
            let k = rng.random_range(1..=4);
            let n = rng.random_range(1..=9);
            let shape = WfsaShape::new(k).unwrap();
            let weights = random_weights(&mut rng, k, n, true);
            let range = forward_table::<Extremes>(shape, &weights).unwrap().total();
            let (hi, lo) = extreme_path(shape, &weights).unwrap().unwrap();
            assert_eq!(range.max(), Some(hi.score));
            assert_eq!(range.min(), Some(lo.score));
        }
    }

    #[test]
    fn zeroed_transition_silences_downstream_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let shape = WfsaShape::new(4).unwrap();
        let mut weights = random_weights(&mut rng, 4, 7, false);
        for w in &mut weights {
            w.main[1] = 0.0;
        }
        let table = forward_score(shape, &weights).unwrap();
        for t in 0..=7 {
            for j in 2..=4 {
                assert_eq!(table.get(t, j), 0.0);
            }
        }
    }

    #[test]
    fn scaling_main_weights_keeps_fixed_length_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..50 {
            let n = rng.random_range(3..=6);
            let shape = WfsaShape::new(2).unwrap();
            let weights = random_weights(&mut rng, 2, n, false);
            let alpha = rng.random_range(0.1..5.0);
            let scaled: Vec<_> = weights
                .iter()
                .map(|w| TimestepWeights::new(w.self_loop.clone(), w.main.iter().map(|u| u * alpha).collect()))
                .collect();
            let full_length = |ws: &[TimestepWeights]| {
                enumerate_paths(shape, ws)
                    .unwrap()
                    .into_iter()
                    .filter(|p| p.end_state() == 2)
                    .max_by(|a, b| a.score.total_cmp(&b.score))
                    .unwrap()
            };
            let a = full_length(&weights);
            let b = full_length(&scaled);
            assert_eq!(a.steps, b.steps);
            assert!(rel_close(b.score, a.score * alpha * alpha, 1e-12));
        }
    }
}
