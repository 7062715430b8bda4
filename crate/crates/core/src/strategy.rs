//! Per-batch label strategies and the user model for choosing among them.
//!
//! For binary labels a batch can be cleaned up four ways: correct every
//! mismatch one by one (B), set all labels true first (T), set all false
//! first (F), or invert all first (W), each followed by residual single
//! edits. Strategies are ranked by residual edit count and the simulated
//! user picks one according to a skill level and an uncertainty window.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::mock::Item;

/// Edit commands a UI may expose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Command {
    SingleEdit,
    AllTrue,
    AllFalse,
    InverseAll,
}

/// The commands available in the simulated interface. SingleEdit is
/// mandatory, otherwise not every object could be corrected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandSet {
    commands: Vec<Command>,
}

impl CommandSet {
    pub fn new(commands: Vec<Command>) -> Result<Self, SimError> {
        if !commands.contains(&Command::SingleEdit) {
            return Err(SimError::InvalidConfig(
                "command set must contain SingleEdit".into(),
            ));
        }
        Ok(Self { commands })
    }

    /// All four commands.
    pub fn full() -> Self {
        Self {
            commands: vec![
                Command::SingleEdit,
                Command::AllTrue,
                Command::AllFalse,
                Command::InverseAll,
            ],
        }
    }

    /// SingleEdit only.
    pub fn single_only() -> Self {
        Self {
            commands: vec![Command::SingleEdit],
        }
    }

    pub fn contains(&self, cmd: Command) -> bool {
        self.commands.contains(&cmd)
    }

    pub fn commands(&self) -> &[Command] {
        &self.commands
    }
}

/// Cell counts of one batch before any edits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl BatchCounts {
    pub fn from_items(items: &[Item]) -> Self {
        let mut counts = BatchCounts {
            tp: 0,
            tn: 0,
            fp: 0,
            fn_: 0,
        };
        for item in items {
            match (item.gt, item.ml) {
                (1, 1) => counts.tp += 1,
                (0, 0) => counts.tn += 1,
                (0, 1) => counts.fp += 1,
                (1, 0) => counts.fn_ += 1,
                _ => unreachable!("binary labels expected"),
            }
        }
        counts
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// One way of cleaning a batch: an optional global command plus the
/// residual single edits it leaves behind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    /// Single edits only.
    Baseline,
    /// AllTrue, then single edits.
    MostlyTrue,
    /// AllFalse, then single edits.
    MostlyFalse,
    /// InverseAll, then single edits.
    MostlyWrong,
}

impl Strategy {
    /// The global command this strategy leads with, if any.
    pub fn global_command(&self) -> Option<Command> {
        match self {
            Strategy::Baseline => None,
            Strategy::MostlyTrue => Some(Command::AllTrue),
            Strategy::MostlyFalse => Some(Command::AllFalse),
            Strategy::MostlyWrong => Some(Command::InverseAll),
        }
    }

    /// Residual single edits after the (optional) global command.
    pub fn n_single(&self, counts: &BatchCounts) -> usize {
        match self {
            Strategy::Baseline => counts.fp + counts.fn_,
            Strategy::MostlyTrue => counts.fp + counts.tn,
            Strategy::MostlyFalse => counts.fn_ + counts.tp,
            Strategy::MostlyWrong => counts.tp + counts.tn,
        }
    }

    /// Fixed tie-break order: B, T, F, W.
    fn order(&self) -> usize {
        match self {
            Strategy::Baseline => 0,
            Strategy::MostlyTrue => 1,
            Strategy::MostlyFalse => 2,
            Strategy::MostlyWrong => 3,
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self {
            Strategy::Baseline => "B",
            Strategy::MostlyTrue => "T",
            Strategy::MostlyFalse => "F",
            Strategy::MostlyWrong => "W",
        };
        write!(f, "{tag}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyChoice {
    pub strategy: Strategy,
    pub n_single: usize,
}

impl StrategyChoice {
    pub fn uses_global(&self) -> bool {
        self.strategy != Strategy::Baseline
    }
}

/// The simulated user's skill and decision parameters.
///
/// `u_rmec` defaults to 0.3 when built via [`UserProfile::new`] callers that
/// pass it explicitly; the shipped presets use 0.3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    /// Skill in picking a label strategy, in [-1, 1]; 1 always picks the best.
    pub u_gcsl: f64,
    /// Uncertainty of that pick, in [0, 1]; 1 is a uniform random pick.
    pub u_gcsu: f64,
    /// Latency, in batches, before acting on a due rank switch.
    /// `None` means the user never switches after the initial rank.
    pub u_rmal: Option<u32>,
    /// Single-edit ratio above which a batch signals the right moment
    /// for switching rank methods, in [0, 1].
    pub u_rmec: f64,
}

/// Default efficiency criterion used by the bundled presets.
pub const DEFAULT_U_RMEC: f64 = 0.3;

impl UserProfile {
    pub fn new(
        u_gcsl: f64,
        u_gcsu: f64,
        u_rmal: Option<u32>,
        u_rmec: f64,
    ) -> Result<Self, SimError> {
        if !(-1.0..=1.0).contains(&u_gcsl) || u_gcsl.is_nan() {
            return Err(SimError::InvalidProfile(format!(
                "u_gcsl = {u_gcsl} outside [-1, 1]"
            )));
        }
        if !(0.0..=1.0).contains(&u_gcsu) || u_gcsu.is_nan() {
            return Err(SimError::InvalidProfile(format!(
                "u_gcsu = {u_gcsu} outside [0, 1]"
            )));
        }
        if !(0.0..=1.0).contains(&u_rmec) || u_rmec.is_nan() {
            return Err(SimError::InvalidProfile(format!(
                "u_rmec = {u_rmec} outside [0, 1]"
            )));
        }
        Ok(Self {
            u_gcsl,
            u_gcsu,
            u_rmal,
            u_rmec,
        })
    }

    /// Fully skilled, certain user with the default efficiency criterion.
    pub fn optimal(u_rmal: Option<u32>) -> Self {
        Self {
            u_gcsl: 1.0,
            u_gcsu: 0.0,
            u_rmal,
            u_rmec: DEFAULT_U_RMEC,
        }
    }
}

/// One choice per strategy whose enabling command is in `clist`.
pub fn enumerate_strategies(clist: &CommandSet, counts: &BatchCounts) -> Vec<StrategyChoice> {
    [
        Strategy::Baseline,
        Strategy::MostlyTrue,
        Strategy::MostlyFalse,
        Strategy::MostlyWrong,
    ]
    .into_iter()
    .filter(|s| match s.global_command() {
        None => true,
        Some(cmd) => clist.contains(cmd),
    })
    .map(|s| StrategyChoice {
        strategy: s,
        n_single: s.n_single(counts),
    })
    .collect()
}

/// Sorts choices best first and reports the baseline's position `bl`.
///
/// Order: ascending `n_single`; among ties, no-global before global (a
/// global command costs extra for the same residual), then fixed B, T, F, W.
pub fn rank_strategies(choices: &[StrategyChoice]) -> (Vec<StrategyChoice>, usize) {
    assert!(!choices.is_empty(), "rank_strategies on empty list");
    let mut ranked = choices.to_vec();
    ranked.sort_by_key(|c| (c.n_single, c.uses_global(), c.strategy.order()));
    let bl = ranked
        .iter()
        .position(|c| c.strategy == Strategy::Baseline)
        .expect("SingleEdit is always in the command set");
    (ranked, bl)
}

/// Round half away from zero, the convention used for the skill index
/// and the uncertainty window radius.
fn round_half_away(x: f64) -> i64 {
    x.round() as i64
}

/// Simulates the user's pick from a ranked strategy list.
///
/// The skill level maps to a position `k` between the optimum and the
/// baseline (or between the baseline and the worst for negative skill),
/// and the uncertainty widens that position into a window from which the
/// pick is drawn uniformly.
pub fn select_strategy<R: Rng>(
    ranked: &[StrategyChoice],
    bl: usize,
    profile: &UserProfile,
    rng: &mut R,
) -> Result<StrategyChoice, SimError> {
    // Re-validate the ranges so callers constructing the profile by hand
    // still get a diagnostic here.
    UserProfile::new(
        profile.u_gcsl,
        profile.u_gcsu,
        profile.u_rmal,
        profile.u_rmec,
    )?;
    let n_s = ranked.len();
    assert!(bl < n_s, "baseline position out of range");
    if n_s == 1 {
        // Only one strategy: the pick is forced regardless of uncertainty.
        return Ok(ranked[0]);
    }
    let k = if profile.u_gcsl >= 0.0 {
        round_half_away((1.0 - profile.u_gcsl) * bl as f64)
    } else {
        round_half_away(-profile.u_gcsl * (n_s as f64 - 1.0 - bl as f64) + bl as f64)
    }
    .clamp(0, n_s as i64 - 1) as usize;

    if profile.u_gcsu == 0.0 {
        return Ok(ranked[k]);
    }
    if profile.u_gcsu == 1.0 {
        return Ok(ranked[rng.gen_range(0..n_s)]);
    }
    let delta = round_half_away(profile.u_gcsu * n_s as f64) as usize;
    let a = k.saturating_sub(delta);
    let b = (k + delta).min(n_s - 1);
    Ok(ranked[rng.gen_range(a..=b)])
}

/// Applies a global command to a batch's assigned labels in place.
/// Binary labels: 1 is positive/true, 0 is negative/false.
pub fn apply_global(cmd: Command, batch_ml: &mut [usize]) -> Result<(), SimError> {
    match cmd {
        Command::SingleEdit => Err(SimError::InvalidConfig(
            "SingleEdit is not a global command; single edits are applied per item".into(),
        )),
        Command::AllTrue => {
            batch_ml.iter_mut().for_each(|l| *l = 1);
            Ok(())
        }
        Command::AllFalse => {
            batch_ml.iter_mut().for_each(|l| *l = 0);
            Ok(())
        }
        Command::InverseAll => {
            batch_ml.iter_mut().for_each(|l| *l = 1 - *l);
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    // Explicit import so the enum shadows proptest's Strategy trait.
    use super::Strategy;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn counts(tp: usize, tn: usize, fp: usize, fn_: usize) -> BatchCounts {
        BatchCounts { tp, tn, fp, fn_ }
    }

    fn n_single_of(choices: &[StrategyChoice], s: Strategy) -> usize {
        choices
            .iter()
            .find(|c| c.strategy == s)
            .map(|c| c.n_single)
            .unwrap()
    }

    #[test]
    fn enumerate_scenario_counts() {
        // 10 TP, 0 TN, 2 FP, 8 FN: one AllTrue plus two singles beats ten singles.
        let all = enumerate_strategies(&CommandSet::full(), &counts(10, 0, 2, 8));
        assert_eq!(n_single_of(&all, Strategy::Baseline), 10);
        assert_eq!(n_single_of(&all, Strategy::MostlyTrue), 2);
        assert_eq!(n_single_of(&all, Strategy::MostlyFalse), 18);
        assert_eq!(n_single_of(&all, Strategy::MostlyWrong), 10);
    }

    #[test]
    fn enumerate_single_only() {
        let only = enumerate_strategies(&CommandSet::single_only(), &counts(1, 2, 3, 4));
        assert_eq!(only.len(), 1);
        assert_eq!(only[0].strategy, Strategy::Baseline);
        assert_eq!(only[0].n_single, 7);
    }

    #[test]
    fn enumerate_all_fn() {
        let all = enumerate_strategies(&CommandSet::full(), &counts(0, 0, 0, 5));
        assert_eq!(n_single_of(&all, Strategy::Baseline), 5);
        assert_eq!(n_single_of(&all, Strategy::MostlyTrue), 0);
        assert_eq!(n_single_of(&all, Strategy::MostlyFalse), 5);
        assert_eq!(n_single_of(&all, Strategy::MostlyWrong), 0);
    }

    #[test]
    fn rank_scenario_order() {
        let all = enumerate_strategies(&CommandSet::full(), &counts(10, 0, 2, 8));
        let (ranked, bl) = rank_strategies(&all);
        let order: Vec<Strategy> = ranked.iter().map(|c| c.strategy).collect();
        // B ties W at 10 singles; the no-global baseline wins the tie.
        assert_eq!(
            order,
            vec![
                Strategy::MostlyTrue,
                Strategy::Baseline,
                Strategy::MostlyWrong,
                Strategy::MostlyFalse
            ]
        );
        assert_eq!(bl, 1);
    }

    #[test]
    fn rank_all_tn_order() {
        // tn = k only: B=0, T=k, F=0, W=k. Brute-force order: B, F, T, W.
        let all = enumerate_strategies(&CommandSet::full(), &counts(0, 6, 0, 0));
        let (ranked, bl) = rank_strategies(&all);
        let order: Vec<Strategy> = ranked.iter().map(|c| c.strategy).collect();
        assert_eq!(
            order,
            vec![
                Strategy::Baseline,
                Strategy::MostlyFalse,
                Strategy::MostlyTrue,
                Strategy::MostlyWrong
            ]
        );
        assert_eq!(bl, 0);
    }

    #[test]
    fn rank_singleton() {
        let only = enumerate_strategies(&CommandSet::single_only(), &counts(1, 1, 1, 1));
        let (ranked, bl) = rank_strategies(&only);
        assert_eq!(ranked, only);
        assert_eq!(bl, 0);
    }

    #[test]
    fn select_optimal() {
        let all = enumerate_strategies(&CommandSet::full(), &counts(10, 0, 2, 8));
        let (ranked, bl) = rank_strategies(&all);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let profile = UserProfile::optimal(None);
        let pick = select_strategy(&ranked, bl, &profile, &mut rng).unwrap();
        assert_eq!(pick, ranked[0]);
    }

    #[test]
    fn select_uncertainty_windows() {
        // u_gcsu = 0.25 with four strategies gives delta = 1, window {0, 1};
        // u_gcsu = 0.5 gives delta = 2, window {0, 1, 2}.
        let all = enumerate_strategies(&CommandSet::full(), &counts(3, 3, 7, 7));
        let (ranked, bl) = rank_strategies(&all);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let p = UserProfile::new(1.0, 0.25, None, 0.3).unwrap();
            let pick = select_strategy(&ranked, bl, &p, &mut rng).unwrap();
            let pos = ranked.iter().position(|c| *c == pick).unwrap();
            assert!(pos <= 1, "TOP2 window exceeded: {pos}");
        }
        for _ in 0..200 {
            let p = UserProfile::new(1.0, 0.5, None, 0.3).unwrap();
            let pick = select_strategy(&ranked, bl, &p, &mut rng).unwrap();
            let pos = ranked.iter().position(|c| *c == pick).unwrap();
            assert!(pos <= 2, "TOP3 window exceeded: {pos}");
        }
    }

    #[test]
    fn select_baseline_user() {
        let all = enumerate_strategies(&CommandSet::full(), &counts(10, 0, 2, 8));
        let (ranked, bl) = rank_strategies(&all);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = UserProfile::new(0.0, 0.0, None, 0.3).unwrap();
        let pick = select_strategy(&ranked, bl, &p, &mut rng).unwrap();
        assert_eq!(pick.strategy, Strategy::Baseline);
    }

    #[test]
    fn select_rejects_bad_profile() {
        let all = enumerate_strategies(&CommandSet::full(), &counts(1, 1, 1, 1));
        let (ranked, bl) = rank_strategies(&all);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let bad = UserProfile {
            u_gcsl: 2.0,
            u_gcsu: 0.0,
            u_rmal: None,
            u_rmec: 0.3,
        };
        assert!(select_strategy(&ranked, bl, &bad, &mut rng).is_err());
    }

    #[test]
    fn apply_global_commands() {
        let mut labels = vec![1, 0, 1];
        apply_global(Command::InverseAll, &mut labels).unwrap();
        assert_eq!(labels, vec![0, 1, 0]);
        apply_global(Command::AllTrue, &mut labels).unwrap();
        assert_eq!(labels, vec![1, 1, 1]);
        apply_global(Command::AllFalse, &mut labels).unwrap();
        apply_global(Command::InverseAll, &mut labels).unwrap();
        assert_eq!(labels, vec![1, 1, 1]);
        assert!(apply_global(Command::SingleEdit, &mut labels).is_err());
    }

    proptest! {
        #[test]
        fn complementarity(tp in 0usize..50, tn in 0usize..50, fp in 0usize..50, fn_ in 0usize..50) {
            prop_assume!(tp + tn + fp + fn_ >= 1);
            let c = counts(tp, tn, fp, fn_);
            let k = c.total();
            prop_assert_eq!(Strategy::Baseline.n_single(&c) + Strategy::MostlyWrong.n_single(&c), k);
            prop_assert_eq!(Strategy::MostlyTrue.n_single(&c) + Strategy::MostlyFalse.n_single(&c), k);
        }

        #[test]
        fn optimal_pick_attains_minimum(tp in 0usize..40, tn in 0usize..40, fp in 0usize..40, fn_ in 0usize..40, seed in any::<u64>()) {
            prop_assume!(tp + tn + fp + fn_ >= 1);
            let c = counts(tp, tn, fp, fn_);
            let all = enumerate_strategies(&CommandSet::full(), &c);
            let (ranked, bl) = rank_strategies(&all);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pick = select_strategy(&ranked, bl, &UserProfile::optimal(None), &mut rng).unwrap();
            let min = all.iter().map(|s| s.n_single).min().unwrap();
            prop_assert_eq!(pick.n_single, min);
        }

        #[test]
        fn skill_position_monotone(tp in 0usize..40, tn in 0usize..40, fp in 0usize..40, fn_ in 0usize..40) {
            prop_assume!(tp + tn + fp + fn_ >= 1);
            let c = counts(tp, tn, fp, fn_);
            let all = enumerate_strategies(&CommandSet::full(), &c);
            let (ranked, bl) = rank_strategies(&all);
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let mut last_pos = usize::MAX;
            let mut level = -1.0f64;
            while level <= 1.0 + 1e-12 {
                let p = UserProfile::new(level.min(1.0), 0.0, None, 0.3).unwrap();
                let pick = select_strategy(&ranked, bl, &p, &mut rng).unwrap();
                let pos = ranked.iter().position(|x| *x == pick).unwrap();
                prop_assert!(pos <= last_pos, "position increased with skill");
                last_pos = pos;
                level += 0.125;
            }
        }

        #[test]
        fn global_then_singles_fixes_everything(tp in 0usize..30, tn in 0usize..30, fp in 0usize..30, fn_ in 0usize..30, seed in any::<u64>()) {
            prop_assume!(tp + tn + fp + fn_ >= 1);
            let mut items: Vec<Item> = Vec::new();
            items.extend(std::iter::repeat(Item { gt: 1, ml: 1 }).take(tp));
            items.extend(std::iter::repeat(Item { gt: 0, ml: 0 }).take(tn));
            items.extend(std::iter::repeat(Item { gt: 0, ml: 1 }).take(fp));
            items.extend(std::iter::repeat(Item { gt: 1, ml: 0 }).take(fn_));
            let c = BatchCounts::from_items(&items);
            let all = enumerate_strategies(&CommandSet::full(), &c);
            let (ranked, bl) = rank_strategies(&all);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = UserProfile::new(0.5, 0.5, None, 0.3).unwrap();
            let pick = select_strategy(&ranked, bl, &p, &mut rng).unwrap();
            let mut labels: Vec<usize> = items.iter().map(|i| i.ml).collect();
            if let Some(cmd) = pick.strategy.global_command() {
                apply_global(cmd, &mut labels).unwrap();
            }
            let mut singles = 0;
            for (label, item) in labels.iter_mut().zip(&items) {
                if *label != item.gt {
                    *label = item.gt;
                    singles += 1;
                }
            }
            prop_assert_eq!(singles, pick.n_single);
            prop_assert!(labels.iter().zip(&items).all(|(l, i)| *l == i.gt));
        }
    }
}
