//! Queue-reordering (rank) methods and the simulated user's switching rule.
//!
//! A rank method is characterized by a selection matrix: per (true label,
//! assigned label) cell, the proportion of that cell's objects pulled to the
//! front of the queue. `BiPart` applies one matrix once; `BatchLinear`
//! sweeps a linearly interpolated series of matrices, fixing one batch per
//! step, which mimics orderings whose usefulness decays over the session.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::mock::{ConfusionMatrix, Item, LabeledPool};
use crate::strategy::{CommandSet, Strategy, UserProfile};

/// Minimum number of single corrections that signals the right moment for
/// switching rank methods, regardless of batch size.
pub const RIGHT_MOMENT_MIN_SINGLES: usize = 3;

/// Per-cell selection proportions, same orientation as [`ConfusionMatrix`]:
/// row is the true label, column the assigned label, binary `[[tn, fp], [fn, tp]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionMatrix {
    cells: Vec<Vec<f64>>,
}

impl SelectionMatrix {
    pub fn new(cells: Vec<Vec<f64>>) -> Result<Self, SimError> {
        let c = cells.len();
        if c < 2 {
            return Err(SimError::InvalidConfig(format!(
                "selection matrix must be at least 2x2, got {c} rows"
            )));
        }
        for (i, row) in cells.iter().enumerate() {
            if row.len() != c {
                return Err(SimError::InvalidConfig(format!(
                    "selection matrix row {i} has {} cells, expected {c}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) || v.is_nan() {
                    return Err(SimError::InvalidConfig(format!(
                        "selection matrix cell[{i}][{j}] = {v} outside [0, 1]"
                    )));
                }
            }
        }
        Ok(Self { cells })
    }

    pub fn binary(tn: f64, fp: f64, fn_: f64, tp: f64) -> Result<Self, SimError> {
        Self::new(vec![vec![tn, fp], vec![fn_, tp]])
    }

    pub fn class_count(&self) -> usize {
        self.cells.len()
    }

    pub fn cell(&self, gt: usize, ml: usize) -> f64 {
        self.cells[gt][ml]
    }

    /// Element-wise interpolation, `t = 0` gives `self`, `t = 1` gives `other`.
    pub fn lerp(&self, other: &SelectionMatrix, t: f64) -> SelectionMatrix {
        let cells = self
            .cells
            .iter()
            .zip(&other.cells)
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(&x, &y)| x + t * (y - x))
                    .collect::<Vec<_>>()
            })
            .collect();
        SelectionMatrix { cells }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RankMethodType {
    BiPart,
    BatchLinear,
}

/// A rank method: one selection matrix for `BiPart`, two for `BatchLinear`,
/// plus an optional binary target mask for accuracy reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankMethodSpec {
    pub rm_type: RankMethodType,
    pub rm1: SelectionMatrix,
    pub rm2: Option<SelectionMatrix>,
    pub target: Option<Vec<Vec<u8>>>,
}

impl RankMethodSpec {
    pub fn bipart(rm1: SelectionMatrix) -> Self {
        Self {
            rm_type: RankMethodType::BiPart,
            rm1,
            rm2: None,
            target: None,
        }
    }

    pub fn batch_linear(rm1: SelectionMatrix, rm2: SelectionMatrix) -> Self {
        Self {
            rm_type: RankMethodType::BatchLinear,
            rm1,
            rm2: Some(rm2),
            target: None,
        }
    }

    pub fn with_target(mut self, target: Vec<Vec<u8>>) -> Self {
        self.target = Some(target);
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        match (self.rm_type, &self.rm2) {
            (RankMethodType::BiPart, Some(_)) => Err(SimError::InvalidConfig(
                "BiPart rank method must not carry a second selection matrix".into(),
            )),
            (RankMethodType::BatchLinear, None) => Err(SimError::InvalidConfig(
                "BatchLinear rank method requires a second selection matrix".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Expected number of objects a selection matrix pulls from an `n`-object
/// pool distributed according to `cm`.
pub fn selection_size(rm1: &SelectionMatrix, cm: &ConfusionMatrix, n: usize) -> f64 {
    let c = cm.class_count();
    let mut sum = 0.0;
    for i in 0..c {
        for j in 0..c {
            sum += cm.cell(i, j) * rm1.cell(i, j);
        }
    }
    n as f64 * sum
}

/// Fraction of selected mass that hits the target cells.
pub fn rank_accuracy(
    rm1: &SelectionMatrix,
    cm: &ConfusionMatrix,
    target: &[Vec<u8>],
) -> Result<f64, SimError> {
    let c = cm.class_count();
    let mut selected = 0.0;
    let mut hit = 0.0;
    for i in 0..c {
        for j in 0..c {
            let mass = rm1.cell(i, j) * cm.cell(i, j);
            selected += mass;
            if target[i][j] != 0 {
                hit += mass;
            }
        }
    }
    if selected <= 0.0 {
        return Err(SimError::UndefinedAccuracy);
    }
    Ok(hit / selected)
}

fn round_half_away(x: f64) -> usize {
    x.round().max(0.0) as usize
}

/// In-place BiPart reorder of a slice: per cell, `round(p * count)` members
/// are drawn uniformly without replacement and moved to the front; both the
/// selected and unselected blocks keep their prior relative order.
fn bipart_slice<R: Rng>(items: &mut [Item], rm1: &SelectionMatrix, rng: &mut R) {
    let c = rm1.class_count();
    // Cell membership in row-major draw order, so the random stream usage
    // is fixed regardless of item order.
    let mut cell_positions: Vec<Vec<usize>> = vec![Vec::new(); c * c];
    for (pos, item) in items.iter().enumerate() {
        cell_positions[item.gt * c + item.ml].push(pos);
    }
    let mut selected = vec![false; items.len()];
    for (cell, positions) in cell_positions.iter().enumerate() {
        let p = rm1.cell(cell / c, cell % c);
        let take = round_half_away(p * positions.len() as f64).min(positions.len());
        if take == 0 {
            continue;
        }
        for idx in rand::seq::index::sample(rng, positions.len(), take) {
            selected[positions[idx]] = true;
        }
    }
    let mut front: Vec<Item> = Vec::with_capacity(items.len());
    let mut back: Vec<Item> = Vec::new();
    for (pos, item) in items.iter().enumerate() {
        if selected[pos] {
            front.push(*item);
        } else {
            back.push(*item);
        }
    }
    front.extend(back);
    items.copy_from_slice(&front);
}

/// Applies a BiPart rank method, returning the reordered pool.
pub fn apply_bipart<R: Rng>(
    mut pool: LabeledPool,
    rm1: &SelectionMatrix,
    rng: &mut R,
) -> LabeledPool {
    bipart_slice(pool.items_mut(), rm1, rng);
    pool
}

/// Applies a BatchLinear rank method.
///
/// With `k = ceil(n / n_batch)` batches, a series of `k - 1` matrices is
/// built by interpolating `rm1` to `rm2`; each step reorders the not yet
/// fixed suffix and then fixes the next `n_batch` items. When the series
/// would be shorter than its two endpoints (`k <= 2`), the method degrades
/// to a single BiPart pass with `rm1`.
pub fn apply_batchlinear<R: Rng>(
    mut pool: LabeledPool,
    rm1: &SelectionMatrix,
    rm2: &SelectionMatrix,
    n_batch: usize,
    rng: &mut R,
) -> LabeledPool {
    assert!(n_batch >= 1, "batch size must be >= 1");
    assert!(!pool.is_empty(), "apply_batchlinear on empty pool");
    let n = pool.len();
    let k = n.div_ceil(n_batch);
    if k <= 2 {
        bipart_slice(pool.items_mut(), rm1, rng);
        return pool;
    }
    let steps = k - 1;
    let mut fixed = 0usize;
    for s in 0..steps {
        let t = s as f64 / (steps - 1) as f64;
        let matrix = rm1.lerp(rm2, t);
        bipart_slice(&mut pool.items_mut()[fixed..], &matrix, rng);
        fixed = (fixed + n_batch).min(n);
    }
    pool
}

/// Applies any rank method spec to the pool.
pub fn apply_rank_method<R: Rng>(
    pool: LabeledPool,
    spec: &RankMethodSpec,
    n_batch: usize,
    rng: &mut R,
) -> LabeledPool {
    match spec.rm_type {
        RankMethodType::BiPart => apply_bipart(pool, &spec.rm1, rng),
        RankMethodType::BatchLinear => apply_batchlinear(
            pool,
            &spec.rm1,
            spec.rm2.as_ref().expect("validated BatchLinear"),
            n_batch,
            rng,
        ),
    }
}

/// True when the last batch's single-correction count signals that the
/// current ordering has stopped paying off.
pub fn is_right_moment(n_single: usize, n_batch: usize, u_rmec: f64) -> bool {
    let threshold = (u_rmec * n_batch as f64).max(RIGHT_MOMENT_MIN_SINGLES as f64);
    n_single as f64 >= threshold
}

/// Latency bookkeeping for rank switching within one session.
#[derive(Debug, Clone, Default)]
pub struct RankState {
    /// Index into the session's rank method list, if one has been applied.
    pub active: Option<usize>,
    /// Batches elapsed since the right-moment condition first held under
    /// the active ordering. Reset whenever a rank method is applied.
    pub right_moment_age: Option<u32>,
    pub ranks_applied: usize,
}

impl RankState {
    pub fn on_rank_applied(&mut self, index: usize) {
        self.active = Some(index);
        self.right_moment_age = None;
        self.ranks_applied += 1;
    }

    /// Called after each batch with whether that batch hit the right moment.
    pub fn on_batch_completed(&mut self, right_moment: bool) {
        match self.right_moment_age {
            Some(age) => self.right_moment_age = Some(age + 1),
            None if right_moment => self.right_moment_age = Some(0),
            None => {}
        }
    }
}

/// Expected composition of the next batch if `rm1` were applied to a pool
/// with the given remaining cell counts, followed by the expected minimum
/// single-edit count over the strategies enabled by `clist`.
fn expected_next_singles(
    rm1: &SelectionMatrix,
    remaining: &[Vec<usize>],
    n_batch: usize,
    clist: &CommandSet,
) -> f64 {
    let total: usize = remaining.iter().flatten().sum();
    let batch = n_batch.min(total) as f64;
    let mut selected = [[0.0f64; 2]; 2];
    let mut n_s = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let s = round_half_away(rm1.cell(i, j) * remaining[i][j] as f64)
                .min(remaining[i][j]) as f64;
            selected[i][j] = s;
            n_s += s;
        }
    }
    // Front block first; any shortfall is filled proportionally from the
    // unselected remainder.
    let mut expect = [[0.0f64; 2]; 2];
    if n_s >= batch {
        for i in 0..2 {
            for j in 0..2 {
                expect[i][j] = batch * selected[i][j] / n_s;
            }
        }
    } else {
        let rest = total as f64 - n_s;
        let shortfall = batch - n_s;
        for i in 0..2 {
            for j in 0..2 {
                let unsel = remaining[i][j] as f64 - selected[i][j];
                expect[i][j] = selected[i][j]
                    + if rest > 0.0 {
                        shortfall * unsel / rest
                    } else {
                        0.0
                    };
            }
        }
    }
    let (tn, fp, fn_, tp) = (expect[0][0], expect[0][1], expect[1][0], expect[1][1]);
    let mut best = fp + fn_; // baseline, always available
    for strategy in [
        Strategy::MostlyTrue,
        Strategy::MostlyFalse,
        Strategy::MostlyWrong,
    ] {
        if !clist.contains(strategy.global_command().unwrap()) {
            continue;
        }
        let singles = match strategy {
            Strategy::MostlyTrue => fp + tn,
            Strategy::MostlyFalse => fn_ + tp,
            Strategy::MostlyWrong => tp + tn,
            Strategy::Baseline => unreachable!(),
        };
        best = best.min(singles);
    }
    best
}

/// Decides whether a rank method should be applied before the next batch
/// and, if so, which one.
///
/// A rank is due at session start and, when the profile's latency is
/// finite, exactly `u_rmal` batches after a right moment was observed.
/// The simulated user is omniscient-greedy: among the available methods it
/// picks the one minimizing the expected next-batch single-edit count under
/// the best enabled label strategy, ties broken by list order, with the
/// active method re-selected only when strictly minimal.
#[allow(clippy::too_many_arguments)]
pub fn select_rank_method(
    rlist: &[RankMethodSpec],
    remaining: &[Vec<usize>],
    state: &RankState,
    profile: &UserProfile,
    clist: &CommandSet,
    n_batch: usize,
) -> Option<usize> {
    if rlist.is_empty() || n_batch < 2 {
        return None;
    }
    let due = if state.ranks_applied == 0 {
        true
    } else {
        match (profile.u_rmal, state.right_moment_age) {
            (Some(latency), Some(age)) => age >= latency,
            _ => false,
        }
    };
    if !due {
        return None;
    }
    let scored: Vec<(usize, f64)> = rlist
        .iter()
        .enumerate()
        .map(|(idx, spec)| {
            (
                idx,
                expected_next_singles(&spec.rm1, remaining, n_batch, clist),
            )
        })
        .collect();
    let best_score = scored
        .iter()
        .map(|&(_, s)| s)
        .fold(f64::INFINITY, f64::min);
    // List-order tie-break, except the active method only wins a tie when
    // it is the sole minimizer.
    let minimizers: Vec<usize> = scored
        .iter()
        .filter(|&&(_, s)| s <= best_score)
        .map(|&(idx, _)| idx)
        .collect();
    if minimizers.len() > 1 {
        if let Some(active) = state.active {
            if let Some(&other) = minimizers.iter().find(|&&idx| idx != active) {
                return Some(other);
            }
        }
    }
    minimizers.first().copied()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mock::{create_mock_dataset, pool_confusion};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cm_51() -> ConfusionMatrix {
        ConfusionMatrix::binary(0.50, 0.05, 0.30, 0.15).unwrap()
    }

    fn fn_mask() -> Vec<Vec<u8>> {
        vec![vec![0, 0], vec![1, 0]]
    }

    fn accuracy_family(a: f64) -> SelectionMatrix {
        let rest = (1.0 - a) / 3.0;
        SelectionMatrix::binary(rest, rest, a, rest).unwrap()
    }

    #[test]
    fn selection_size_cases() {
        let ones = SelectionMatrix::binary(1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(selection_size(&ones, &cm_51(), 1000), 1000.0);
        let all_fn = SelectionMatrix::binary(0.0, 0.0, 1.0, 0.0).unwrap();
        assert!((selection_size(&all_fn, &cm_51(), 1000) - 300.0).abs() < 1e-9);
        let zeros = SelectionMatrix::binary(0.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(selection_size(&zeros, &cm_51(), 1000), 0.0);
    }

    #[test]
    fn accuracy_closed_form() {
        // The FN-targeting family has accuracy 9a / (2a + 7) under the
        // 0.50/0.05/0.30/0.15 confusion matrix.
        for a in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let acc = rank_accuracy(&accuracy_family(a), &cm_51(), &fn_mask()).unwrap();
            let expected = 9.0 * a / (2.0 * a + 7.0);
            assert!((acc - expected).abs() < 1e-12, "a={a}: {acc} vs {expected}");
        }
        let acc = rank_accuracy(&accuracy_family(0.5), &cm_51(), &fn_mask()).unwrap();
        assert!((acc - 0.5625).abs() < 1e-12);
    }

    #[test]
    fn accuracy_undefined_when_nothing_selected() {
        let zeros = SelectionMatrix::binary(0.0, 0.0, 0.0, 0.0).unwrap();
        assert!(matches!(
            rank_accuracy(&zeros, &cm_51(), &fn_mask()),
            Err(SimError::UndefinedAccuracy)
        ));
    }

    #[test]
    fn bipart_all_ones_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pool = create_mock_dataset(100, &cm_51(), &mut rng).unwrap();
        let before = pool.items().to_vec();
        let ones = SelectionMatrix::binary(1.0, 1.0, 1.0, 1.0).unwrap();
        let after = apply_bipart(pool, &ones, &mut rng);
        assert_eq!(after.items(), &before[..]);
    }

    #[test]
    fn bipart_stable_partition() {
        // 2 TN and 3 FN interleaved; selecting all FN moves them to the
        // front in their original relative order.
        let tn = Item { gt: 0, ml: 0 };
        let fn_ = Item { gt: 1, ml: 0 };
        let pool = LabeledPool::from_items(2, vec![tn, fn_, tn, fn_, fn_]);
        let rm = SelectionMatrix::binary(0.0, 0.0, 1.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let after = apply_bipart(pool, &rm, &mut rng);
        assert_eq!(after.items(), &[fn_, fn_, fn_, tn, tn]);
    }

    #[test]
    fn bipart_front_block_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pool = create_mock_dataset(1000, &cm_51(), &mut rng).unwrap();
        let rm = SelectionMatrix::binary(0.0, 1.0, 1.0, 0.0).unwrap();
        let after = apply_bipart(pool, &rm, &mut rng);
        // 50 FP + 300 FN move to the front.
        let front = &after.items()[..350];
        assert!(front.iter().all(|it| it.gt != it.ml));
        assert!(after.items()[350..].iter().all(|it| it.gt == it.ml));
    }

    #[test]
    fn batchlinear_two_step_trace() {
        // n = 6, n_batch = 2: k = 3, the series is [rm1, rm2] with no
        // interior interpolants. rm1 reorders all 6, two items get fixed,
        // rm2 reorders the last 4.
        let tn = Item { gt: 0, ml: 0 };
        let fn_ = Item { gt: 1, ml: 0 };
        let fp = Item { gt: 0, ml: 1 };
        let pool = LabeledPool::from_items(2, vec![tn, fp, fn_, tn, fn_, fp]);
        let rm1 = SelectionMatrix::binary(0.0, 0.0, 1.0, 0.0).unwrap();
        let rm2 = SelectionMatrix::binary(0.0, 1.0, 0.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let after = apply_batchlinear(pool, &rm1, &rm2, 2, &mut rng);
        // rm1 front-loads the two FNs; rm2 then pulls the FPs ahead of the TNs.
        assert_eq!(after.items(), &[fn_, fn_, fp, fp, tn, tn]);
    }

    #[test]
    fn batchlinear_degenerate_small_pool() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pool = create_mock_dataset(30, &cm_51(), &mut rng).unwrap();
        let rm1 = SelectionMatrix::binary(0.0, 0.0, 0.9, 0.1).unwrap();
        let rm2 = SelectionMatrix::binary(0.1, 0.9, 0.0, 0.0).unwrap();

        // k = ceil(30 / 20) = 2: falls back to a single BiPart with rm1.
        let mut rng_a = ChaCha8Rng::seed_from_u64(77);
        let via_linear = apply_batchlinear(pool.clone(), &rm1, &rm2, 20, &mut rng_a);
        let mut rng_b = ChaCha8Rng::seed_from_u64(77);
        let via_bipart = apply_bipart(pool, &rm1, &mut rng_b);
        assert_eq!(via_linear.items(), via_bipart.items());
    }

    #[test]
    fn batchlinear_equal_endpoints_matches_repeated_bipart() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pool = create_mock_dataset(50, &cm_51(), &mut rng).unwrap();
        let rm = SelectionMatrix::binary(0.2, 0.4, 0.6, 0.8).unwrap();

        let mut rng_a = ChaCha8Rng::seed_from_u64(55);
        let via_linear = apply_batchlinear(pool.clone(), &rm, &rm, 10, &mut rng_a);

        // Oracle: repeated BiPart on shrinking suffixes with the same matrix.
        let mut rng_b = ChaCha8Rng::seed_from_u64(55);
        let mut items = pool.items().to_vec();
        let k = 50usize.div_ceil(10);
        let mut fixed = 0;
        for _ in 0..k - 1 {
            bipart_slice(&mut items[fixed..], &rm, &mut rng_b);
            fixed += 10;
        }
        assert_eq!(via_linear.items(), &items[..]);
    }

    #[test]
    fn right_moment_thresholds() {
        assert!(is_right_moment(3, 20, 0.1));
        assert!(!is_right_moment(2, 20, 0.1));
        assert!(is_right_moment(6, 20, 0.3));
        assert!(!is_right_moment(5, 20, 0.3));
    }

    #[test]
    fn select_none_when_empty_or_tiny_batches() {
        let state = RankState::default();
        let profile = UserProfile::optimal(Some(0));
        let remaining = vec![vec![250, 250], vec![250, 250]];
        assert_eq!(
            select_rank_method(&[], &remaining, &state, &profile, &CommandSet::full(), 20),
            None
        );
        let four: Vec<RankMethodSpec> = [
            (0.0, 0.0, 0.9, 0.1),
            (0.1, 0.9, 0.0, 0.0),
            (0.9, 0.1, 0.0, 0.0),
            (0.0, 0.0, 0.1, 0.9),
        ]
        .iter()
        .map(|&(tn, fp, fn_, tp)| {
            RankMethodSpec::bipart(SelectionMatrix::binary(tn, fp, fn_, tp).unwrap())
        })
        .collect();
        assert_eq!(
            select_rank_method(&four, &remaining, &state, &profile, &CommandSet::full(), 1),
            None
        );
    }

    #[test]
    fn select_initial_rank_for_single_method() {
        let state = RankState::default();
        let profile = UserProfile::optimal(None);
        let remaining = vec![vec![500, 50], vec![300, 150]];
        let one = vec![RankMethodSpec::bipart(
            SelectionMatrix::binary(0.0, 0.0, 0.9, 0.1).unwrap(),
        )];
        assert_eq!(
            select_rank_method(&one, &remaining, &state, &profile, &CommandSet::full(), 20),
            Some(0)
        );
        // After the initial rank, u_rmal = NULL never switches again.
        let mut after = RankState::default();
        after.on_rank_applied(0);
        after.on_batch_completed(true);
        assert_eq!(
            select_rank_method(&one, &remaining, &after, &profile, &CommandSet::full(), 20),
            None
        );
    }

    #[test]
    fn latency_counts_batches_after_right_moment() {
        let profile = UserProfile::optimal(Some(2));
        let remaining = vec![vec![100, 100], vec![100, 100]];
        let one = vec![RankMethodSpec::bipart(
            SelectionMatrix::binary(0.0, 0.0, 0.9, 0.1).unwrap(),
        )];
        let mut state = RankState::default();
        state.on_rank_applied(0);
        state.on_batch_completed(true); // age 0
        let clist = CommandSet::full();
        assert_eq!(
            select_rank_method(&one, &remaining, &state, &profile, &clist, 20),
            None
        );
        state.on_batch_completed(false); // age 1
        assert_eq!(
            select_rank_method(&one, &remaining, &state, &profile, &clist, 20),
            None
        );
        state.on_batch_completed(false); // age 2 == u_rmal
        assert_eq!(
            select_rank_method(&one, &remaining, &state, &profile, &clist, 20),
            Some(0)
        );
    }

    proptest! {
        #[test]
        fn reorders_are_permutations(n in 1usize..400, seed in any::<u64>(),
                                     p in proptest::collection::vec(0.0f64..=1.0, 8)) {
            let cm = cm_51();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pool = create_mock_dataset(n, &cm, &mut rng).unwrap();
            let before = pool_confusion(&pool);
            let rm1 = SelectionMatrix::binary(p[0], p[1], p[2], p[3]).unwrap();
            let rm2 = SelectionMatrix::binary(p[4], p[5], p[6], p[7]).unwrap();
            let after_bipart = apply_bipart(pool.clone(), &rm1, &mut rng);
            prop_assert_eq!(pool_confusion(&after_bipart), before.clone());
            let after_linear = apply_batchlinear(pool, &rm1, &rm2, 7, &mut rng);
            prop_assert_eq!(pool_confusion(&after_linear), before);
        }

        #[test]
        fn selection_size_monotone_in_entries(base in 0.0f64..0.9, bump in 0.0f64..0.1, n in 1usize..2000) {
            let cm = cm_51();
            let low = SelectionMatrix::binary(base, base, base, base).unwrap();
            let high = SelectionMatrix::binary(base + bump, base, base, base).unwrap();
            prop_assert!(selection_size(&high, &cm, n) >= selection_size(&low, &cm, n));
            // Linear in n.
            let s1 = selection_size(&low, &cm, 1);
            prop_assert!((selection_size(&low, &cm, n) - n as f64 * s1).abs() < 1e-6 * n as f64);
        }
    }
}
