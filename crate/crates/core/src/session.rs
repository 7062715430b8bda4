//! The session simulator: batch extraction, strategy choice, rank switching,
//! operation logging, and total cost computation.
//!
//! A session walks two nested loops. The outer loop optionally reorders the
//! queue, fetches a batch, overviews it, and optionally fires a global edit;
//! the inner loop views every object and corrects each mismatch with a
//! single edit. The cost of the session is the sum of unit costs over the
//! logged operations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::mock::{create_mock_dataset, pool_confusion, ConfusionMatrix, Item};
use crate::profile::{Layout, TimingProfile};
use crate::rank::{
    apply_rank_method, is_right_moment, select_rank_method, RankMethodSpec, RankState,
};
use crate::strategy::{
    apply_global, enumerate_strategies, rank_strategies, select_strategy, BatchCounts,
    CommandSet, Strategy, UserProfile,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpKind {
    New,
    Overview,
    View,
    Single,
    Global,
    Rank,
}

impl OpKind {
    pub const ALL: [OpKind; 6] = [
        OpKind::New,
        OpKind::Overview,
        OpKind::View,
        OpKind::Single,
        OpKind::Global,
        OpKind::Rank,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            OpKind::New => "new",
            OpKind::Overview => "overview",
            OpKind::View => "view",
            OpKind::Single => "single",
            OpKind::Global => "global",
            OpKind::Rank => "rank",
        }
    }

    pub fn parse(s: &str) -> Option<OpKind> {
        OpKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Op {
    pub kind: OpKind,
    pub batch_index: usize,
}

/// The simulated operation sequence of one session.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OpLog {
    pub ops: Vec<Op>,
}

impl OpLog {
    fn push(&mut self, kind: OpKind, batch_index: usize) {
        self.ops.push(Op { kind, batch_index });
    }

    pub fn counts(&self) -> OpCounts {
        let mut counts = OpCounts::default();
        for op in &self.ops {
            match op.kind {
                OpKind::New => counts.new += 1,
                OpKind::Overview => counts.overview += 1,
                OpKind::View => counts.view += 1,
                OpKind::Single => counts.single += 1,
                OpKind::Global => counts.global += 1,
                OpKind::Rank => counts.rank += 1,
            }
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OpCounts {
    pub new: usize,
    pub overview: usize,
    pub view: usize,
    pub single: usize,
    pub global: usize,
    pub rank: usize,
}

impl OpCounts {
    pub fn get(&self, kind: OpKind) -> usize {
        match kind {
            OpKind::New => self.new,
            OpKind::Overview => self.overview,
            OpKind::View => self.view,
            OpKind::Single => self.single,
            OpKind::Global => self.global,
            OpKind::Rank => self.rank,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub k_batch: usize,
    pub strategy: Strategy,
    pub n_single: usize,
    pub ranked_before: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    /// Total session time in seconds.
    pub t_session: f64,
    pub op_counts: OpCounts,
    pub batches: Vec<BatchRecord>,
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub n: usize,
    pub cm: ConfusionMatrix,
    pub layout: Layout,
    pub timing: TimingProfile,
    pub clist: CommandSet,
    pub profile: UserProfile,
    pub rlist: Vec<RankMethodSpec>,
    pub seed: u64,
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.n == 0 {
            return Err(SimError::InvalidConfig("object count must be >= 1".into()));
        }
        if self.cm.class_count() != 2 {
            return Err(SimError::InvalidConfig(
                "session simulation supports binary labels only".into(),
            ));
        }
        // Re-validate parts that may have arrived through deserialization,
        // which bypasses the checked constructors.
        ConfusionMatrix::new(self.cm.cells().to_vec())?;
        CommandSet::new(self.clist.commands().to_vec())?;
        self.timing.validate()?;
        self.timing.costs(self.layout).map(|_| ())?;
        UserProfile::new(
            self.profile.u_gcsl,
            self.profile.u_gcsu,
            self.profile.u_rmal,
            self.profile.u_rmec,
        )?;
        for spec in &self.rlist {
            spec.validate()?;
            if spec.rm1.class_count() != 2 {
                return Err(SimError::InvalidConfig(
                    "rank method selection matrices must be 2x2".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Runs one session. Deterministic given the config (including its seed):
/// the random stream is consumed by dataset generation first, then by the
/// per-decision draws in loop order.
pub fn simulate_session(config: &SessionConfig) -> Result<(OpLog, SessionResult), SimError> {
    let (log, result, _) = simulate_session_trace(config)?;
    Ok((log, result))
}

/// Like [`simulate_session`], but also returns the items in completion
/// order with their post-session labels, for external verification.
pub fn simulate_session_trace(
    config: &SessionConfig,
) -> Result<(OpLog, SessionResult, Vec<Item>), SimError> {
    config.validate()?;
    let n_batch = config.layout.n_batch();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pool = create_mock_dataset(config.n, &config.cm, &mut rng)?;

    let mut log = OpLog::default();
    let mut batches = Vec::new();
    let mut finished: Vec<Item> = Vec::with_capacity(config.n);
    let mut state = RankState::default();
    let mut batch_index = 0usize;

    while !pool.is_empty() {
        let remaining = pool_confusion(&pool);
        let ranked_before = if let Some(idx) = select_rank_method(
            &config.rlist,
            &remaining,
            &state,
            &config.profile,
            &config.clist,
            n_batch,
        ) {
            log.push(OpKind::Rank, batch_index);
            pool = apply_rank_method(pool, &config.rlist[idx], n_batch, &mut rng);
            state.on_rank_applied(idx);
            true
        } else {
            false
        };

        log.push(OpKind::New, batch_index);
        let mut batch = pool.extract_batch(n_batch);
        log.push(OpKind::Overview, batch_index);

        let counts = BatchCounts::from_items(&batch);
        let choices = enumerate_strategies(&config.clist, &counts);
        let (ranked, bl) = rank_strategies(&choices);
        let pick = select_strategy(&ranked, bl, &config.profile, &mut rng)?;

        if let Some(cmd) = pick.strategy.global_command() {
            log.push(OpKind::Global, batch_index);
            let mut labels: Vec<usize> = batch.iter().map(|it| it.ml).collect();
            apply_global(cmd, &mut labels)?;
            for (item, label) in batch.iter_mut().zip(labels) {
                item.ml = label;
            }
        }

        let mut n_single = 0usize;
        for item in batch.iter_mut() {
            log.push(OpKind::View, batch_index);
            if item.ml != item.gt {
                log.push(OpKind::Single, batch_index);
                item.ml = item.gt;
                n_single += 1;
            }
        }
        debug_assert_eq!(n_single, pick.n_single);
        debug_assert!(batch.iter().all(|it| it.ml == it.gt));

        batches.push(BatchRecord {
            k_batch: batch.len(),
            strategy: pick.strategy,
            n_single,
            ranked_before,
        });
        finished.extend(batch);
        state.on_batch_completed(is_right_moment(n_single, n_batch, config.profile.u_rmec));
        batch_index += 1;
    }

    let t_session = get_cost(&log, &config.timing, config.layout)?;
    let result = SessionResult {
        t_session,
        op_counts: log.counts(),
        batches,
    };
    Ok((log, result, finished))
}

/// Sums the unit cost of every logged operation under the given layout.
pub fn get_cost(ops: &OpLog, timing: &TimingProfile, layout: Layout) -> Result<f64, SimError> {
    let unit = timing.costs(layout)?;
    let counts = ops.counts();
    Ok(counts.new as f64 * unit.t_new
        + counts.overview as f64 * unit.t_overview
        + counts.view as f64 * unit.t_view
        + counts.single as f64 * unit.t_single
        + counts.global as f64 * unit.t_global
        + counts.rank as f64 * unit.t_rank)
}
