//! Parameter sweeps: run sessions across layouts and conditions, aggregate
//! session times, and classify layout/time curves.
//!
//! Every trial gets a seed derived by hashing `seed_base / condition /
//! layout / trial`, so results are reproducible and independent of worker
//! count or execution order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::mock::ConfusionMatrix;
use crate::profile::{builtin_profile, Layout, TimingProfile};
use crate::rank::{RankMethodSpec, SelectionMatrix};
use crate::session::{simulate_session, SessionConfig};
use crate::strategy::{CommandSet, UserProfile};

/// One experimental condition (a curve in the final chart).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub cm: ConfusionMatrix,
    pub clist: CommandSet,
    pub user: UserProfile,
    #[serde(default)]
    pub rlist: Vec<RankMethodSpec>,
    /// Overrides the sweep-level timing profile when set.
    #[serde(default)]
    pub profile_id: Option<String>,
    /// Overrides the sweep-level layouts when set.
    #[serde(default)]
    pub layouts: Option<Vec<Layout>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub name: String,
    pub seed_base: String,
    pub n: usize,
    pub trials: u32,
    pub profile_id: String,
    pub layouts: Vec<Layout>,
    pub conditions: Vec<Condition>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.trials == 0 {
            return Err(SimError::InvalidConfig("trials must be >= 1".into()));
        }
        if self.conditions.is_empty() {
            return Err(SimError::InvalidConfig("no conditions".into()));
        }
        for c in &self.conditions {
            if c.layouts.as_ref().unwrap_or(&self.layouts).is_empty() {
                return Err(SimError::InvalidConfig(format!(
                    "condition '{}' has no layouts",
                    c.name
                )));
            }
            if c.profile_id.as_deref().unwrap_or(&self.profile_id).is_empty() {
                return Err(SimError::InvalidConfig(format!(
                    "condition '{}' has no timing profile; presets require one \
                     to be supplied",
                    c.name
                )));
            }
        }
        Ok(())
    }
}

/// 64-bit FNV-1a. Stable across platforms and releases, unlike the std
/// hasher, which would silently reshuffle every seed schedule.
pub fn stable_hash64(text: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in text.bytes() {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn trial_seed(seed_base: &str, condition: &str, trial: u32) -> u64 {
    stable_hash64(&format!("{seed_base}/{condition}/{trial}"))
}

/// One scheduled (condition, trial) pair. A trial shares its seed across
/// layouts, so layout comparisons within a trial are paired: adding or
/// removing a layout never perturbs the other layouts' datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub condition: usize,
    pub trial: u32,
    pub seed: u64,
}

/// Entries in canonical order: conditions as listed, trials ascending.
pub fn expand_sweep(config: &SweepConfig) -> Vec<SweepEntry> {
    let mut entries = Vec::new();
    for (ci, c) in config.conditions.iter().enumerate() {
        for trial in 0..config.trials {
            entries.push(SweepEntry {
                condition: ci,
                trial,
                seed: trial_seed(&config.seed_base, &c.name, trial),
            });
        }
    }
    entries
}

/// One completed trial on one layout; the fixed row schema of the
/// results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub condition: String,
    pub rows: u32,
    pub cols: u32,
    pub n_batch: usize,
    pub trial: u32,
    pub seed: u64,
    #[serde(rename = "t_session_s")]
    pub t_session: f64,
    pub n_new: usize,
    pub n_overview: usize,
    pub n_view: usize,
    pub n_single: usize,
    pub n_global: usize,
    pub n_rank: usize,
}

fn resolve_profile(
    id: &str,
    extra: &[TimingProfile],
) -> Result<TimingProfile, SimError> {
    extra
        .iter()
        .find(|p| p.id == id)
        .cloned()
        .or_else(|| builtin_profile(id))
        .ok_or_else(|| SimError::InvalidConfig(format!("unknown timing profile '{id}'")))
}

/// Runs every job in parallel. `extra_profiles` are looked up by id before
/// the built-in profiles. Output order is canonical regardless of the
/// rayon pool size.
pub fn run_sweep(
    config: &SweepConfig,
    extra_profiles: &[TimingProfile],
) -> Result<Vec<TrialRow>, SimError> {
    config.validate()?;
    let entries = expand_sweep(config);
    // Resolve and validate session configs up front so errors carry no
    // thread-dependent ordering. Row order: condition, layout, trial.
    let mut sessions = Vec::new();
    for (ci, c) in config.conditions.iter().enumerate() {
        let profile_id = c.profile_id.as_deref().unwrap_or(&config.profile_id);
        let timing = resolve_profile(profile_id, extra_profiles).map_err(|e| {
            SimError::InvalidConfig(format!("condition '{}': {e}", c.name))
        })?;
        for &layout in c.layouts.as_ref().unwrap_or(&config.layouts) {
            for entry in entries.iter().filter(|e| e.condition == ci) {
                let sc = SessionConfig {
                    n: config.n,
                    cm: c.cm.clone(),
                    layout,
                    timing: timing.clone(),
                    clist: c.clist.clone(),
                    profile: c.user,
                    rlist: c.rlist.clone(),
                    seed: entry.seed,
                };
                sc.validate().map_err(|e| {
                    SimError::InvalidConfig(format!("condition '{}': {e}", c.name))
                })?;
                sessions.push((layout, entry.trial, entry.seed, c.name.clone(), sc));
            }
        }
    }
    sessions
        .par_iter()
        .map(|(layout, trial, seed, name, sc)| {
            let (_, result) = simulate_session(sc)?;
            Ok(TrialRow {
                condition: name.clone(),
                rows: layout.rows,
                cols: layout.cols,
                n_batch: layout.n_batch(),
                trial: *trial,
                seed: *seed,
                t_session: result.t_session,
                n_new: result.op_counts.new,
                n_overview: result.op_counts.overview,
                n_view: result.op_counts.view,
                n_single: result.op_counts.single,
                n_global: result.op_counts.global,
                n_rank: result.op_counts.rank,
            })
        })
        .collect()
}

/// Mean and sample standard deviation per (condition, layout).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub condition: String,
    pub rows: u32,
    pub cols: u32,
    pub n_batch: usize,
    pub trials: usize,
    pub mean_t: f64,
    pub std_t: f64,
}

/// Groups trials by (condition, layout) in first-appearance order.
pub fn aggregate(rows: &[TrialRow]) -> Vec<AggregateRow> {
    let mut order: Vec<(String, u32, u32)> = Vec::new();
    let mut groups: std::collections::HashMap<(String, u32, u32), Vec<f64>> =
        std::collections::HashMap::new();
    for r in rows {
        let key = (r.condition.clone(), r.rows, r.cols);
        let entry = groups.entry(key.clone()).or_default();
        if entry.is_empty() {
            order.push(key);
        }
        entry.push(r.t_session);
    }
    order
        .into_iter()
        .map(|key| {
            let values = &groups[&key];
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let std = if values.len() > 1 {
                (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0))
                    .sqrt()
            } else {
                0.0
            };
            AggregateRow {
                condition: key.0,
                rows: key.1,
                cols: key.2,
                n_batch: (key.1 * key.2) as usize,
                trials: values.len(),
                mean_t: mean,
                std_t: std,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalLayout {
    pub rows: u32,
    pub cols: u32,
    pub n_batch: usize,
    pub mean_t: f64,
    /// The optimum sits at the smallest or largest swept batch size, so the
    /// true optimum may lie outside the swept range.
    pub boundary: bool,
}

/// Minimum-mean layout for one condition; ties go to the smaller batch.
pub fn find_optimal_layout(rows: &[AggregateRow]) -> Option<OptimalLayout> {
    let mut sorted: Vec<&AggregateRow> = rows.iter().collect();
    sorted.sort_by_key(|r| r.n_batch);
    let best = sorted
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            a.mean_t
                .partial_cmp(&b.mean_t)
                .unwrap()
                .then(a.n_batch.cmp(&b.n_batch))
        })?
        .0;
    let r = sorted[best];
    Some(OptimalLayout {
        rows: r.rows,
        cols: r.cols,
        n_batch: r.n_batch,
        mean_t: r.mean_t,
        boundary: best == 0 || best == sorted.len() - 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveShape {
    UShaped,
    MonotoneDown,
    MonotoneUp,
    Other,
}

impl std::fmt::Display for CurveShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CurveShape::UShaped => "u_shaped",
            CurveShape::MonotoneDown => "monotone_down",
            CurveShape::MonotoneUp => "monotone_up",
            CurveShape::Other => "other",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeDescriptor {
    pub shape: CurveShape,
    /// Index of the smallest mean (ties go to the first).
    pub argmin: usize,
}

/// Classifies a curve of means ordered by batch size. With `epsilon` zero
/// the decrease and increase checks are strict; a positive `epsilon`
/// tolerates counter-movements up to that size, which absorbs trial noise.
pub fn check_ushape(means: &[f64], epsilon: f64) -> ShapeDescriptor {
    let argmin = means
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    let descr = |shape| ShapeDescriptor { shape, argmin };
    if means.len() < 2 {
        return descr(CurveShape::Other);
    }
    let dec: Vec<bool> = means.windows(2).map(|w| w[1] < w[0] + epsilon).collect();
    let inc: Vec<bool> = means.windows(2).map(|w| w[1] > w[0] - epsilon).collect();
    if dec.iter().all(|&d| d) {
        return descr(CurveShape::MonotoneDown);
    }
    if inc.iter().all(|&i| i) {
        return descr(CurveShape::MonotoneUp);
    }
    for split in 1..means.len() - 1 {
        let down = (0..split).all(|i| dec[i]);
        let up = (split..means.len() - 1).all(|i| inc[i]);
        if down && up {
            return descr(CurveShape::UShaped);
        }
    }
    descr(CurveShape::Other)
}

pub const PRESET_NAMES: [&str; 6] = [
    "cs-rank-accuracy",
    "cs-rank-availability",
    "cs-rank-latency",
    "cs-label-strategy",
    "cs-prelabel-accuracy",
    "cs-application",
];

fn layouts(pairs: &[(u32, u32)]) -> Vec<Layout> {
    pairs
        .iter()
        .map(|&(r, c)| Layout::new(r, c).expect("preset layout"))
        .collect()
}

/// The four single-cell-focused bipart methods: each promotes one
/// confusion cell to the front of the batch order.
fn standard_rank_methods() -> Vec<RankMethodSpec> {
    let m = |cells: [[f64; 2]; 2]| {
        SelectionMatrix::binary(cells[0][0], cells[0][1], cells[1][0], cells[1][1])
            .expect("preset matrix")
    };
    vec![
        RankMethodSpec::bipart(m([[0.0, 0.0], [0.9, 0.1]])), // false negatives
        RankMethodSpec::bipart(m([[0.1, 0.9], [0.0, 0.0]])), // false positives
        RankMethodSpec::bipart(m([[0.9, 0.1], [0.0, 0.0]])), // true negatives
        RankMethodSpec::bipart(m([[0.0, 0.0], [0.1, 0.9]])), // true positives
    ]
}

/// Built-in sweep configurations, by name.
pub fn preset(name: &str) -> Result<SweepConfig, SimError> {
    let base = |name: &str, lays: Vec<Layout>, conditions: Vec<Condition>| SweepConfig {
        name: name.to_string(),
        seed_base: format!("qa4ml/{name}"),
        n: 1000,
        trials: 10,
        // The source experiments publish no unit times, so the caller must
        // pick a profile; validation rejects the empty id.
        profile_id: String::new(),
        layouts: lays,
        conditions,
    };
    match name {
        // How the accuracy of a single rank method's selection shifts the
        // best layout: higher accuracy favors larger batches.
        "cs-rank-accuracy" => {
            let cm = ConfusionMatrix::binary(0.50, 0.05, 0.30, 0.15)?;
            let conditions = [0.0, 0.25, 0.5, 0.75, 1.0]
                .iter()
                .map(|&a| {
                    let off = (1.0 - a) / 3.0;
                    let rm1 = SelectionMatrix::binary(off, off, a, off)?;
                    Ok(Condition {
                        name: format!("a={a:.2}"),
                        cm: cm.clone(),
                        clist: CommandSet::full(),
                        user: UserProfile::optimal(None),
                        rlist: vec![RankMethodSpec::bipart(rm1)
                            .with_target(vec![vec![0, 0], vec![1, 0]])],
                        profile_id: None,
                        layouts: None,
                    })
                })
                .collect::<Result<_, SimError>>()?;
            Ok(base(
                name,
                layouts(&[(3, 4), (4, 5), (5, 6), (6, 8), (8, 10)]),
                conditions,
            ))
        }
        // How many rank methods are available, from none to all four.
        "cs-rank-availability" => {
            let cm = ConfusionMatrix::binary(0.25, 0.25, 0.25, 0.25)?;
            let methods = standard_rank_methods();
            let conditions = (0..=4)
                .map(|k| Condition {
                    name: format!("{k}RM"),
                    cm: cm.clone(),
                    clist: CommandSet::full(),
                    user: UserProfile::optimal(Some(0)),
                    rlist: methods[..k].to_vec(),
                    profile_id: None,
                    layouts: None,
                })
                .collect();
            Ok(base(
                name,
                layouts(&[(1, 1), (2, 3), (3, 4), (4, 5), (5, 8)]),
                conditions,
            ))
        }
        // How long the user waits before acting on a due rank switch.
        "cs-rank-latency" => {
            let cm = ConfusionMatrix::binary(0.25, 0.25, 0.25, 0.25)?;
            let conditions = (0..=4)
                .map(|lat| Condition {
                    name: format!("latency={lat}"),
                    cm: cm.clone(),
                    clist: CommandSet::full(),
                    user: UserProfile::optimal(Some(lat)),
                    rlist: standard_rank_methods(),
                    profile_id: None,
                    layouts: None,
                })
                .collect();
            Ok(base(
                name,
                layouts(&[(2, 3), (3, 4), (4, 5), (5, 8)]),
                conditions,
            ))
        }
        // How well the user picks global-command strategies.
        "cs-label-strategy" => {
            let cm = ConfusionMatrix::binary(0.15, 0.25, 0.15, 0.45)?;
            let users = [
                ("NoGC", CommandSet::single_only(), 0.0, 1.0),
                ("OPT", CommandSet::full(), 1.0, 0.0),
                ("TOP2", CommandSet::full(), 1.0, 0.25),
                ("TOP3", CommandSet::full(), 1.0, 0.5),
                ("Random", CommandSet::full(), 1.0, 1.0),
            ];
            let conditions = users
                .into_iter()
                .map(|(label, clist, u_gcsl, u_gcsu)| {
                    Ok(Condition {
                        name: label.to_string(),
                        cm: cm.clone(),
                        clist,
                        user: UserProfile::new(
                            u_gcsl,
                            u_gcsu,
                            None,
                            crate::strategy::DEFAULT_U_RMEC,
                        )?,
                        rlist: vec![],
                        profile_id: None,
                        layouts: None,
                    })
                })
                .collect::<Result<_, SimError>>()?;
            Ok(base(
                name,
                layouts(&[(3, 4), (4, 5), (5, 6), (6, 8), (8, 10)]),
                conditions,
            ))
        }
        // How pre-labeling accuracy shifts the best layout.
        "cs-prelabel-accuracy" => {
            let conditions = [0.5, 0.6, 0.7, 0.8, 0.9]
                .iter()
                .map(|&a| {
                    let diag = 0.5 * a;
                    let off = 0.5 - diag;
                    Ok(Condition {
                        name: format!("a={a:.1}"),
                        cm: ConfusionMatrix::binary(diag, off, off, diag)?,
                        clist: CommandSet::full(),
                        user: UserProfile::optimal(None),
                        rlist: vec![],
                        profile_id: None,
                        layouts: None,
                    })
                })
                .collect::<Result<_, SimError>>()?;
            Ok(base(
                name,
                layouts(&[(1, 2), (2, 2), (2, 3), (3, 4), (4, 5), (5, 6), (8, 8)]),
                conditions,
            ))
        }
        // One condition per application timing profile, each swept over the
        // layouts that profile covers.
        "cs-application" => {
            let cm = ConfusionMatrix::binary(0.35, 0.15, 0.15, 0.35)?;
            let ids = [
                "synthetic-js-block",
                "synthetic-js-in-bar",
                "synthetic-cbs-image",
                "synthetic-cbs-pixel",
            ];
            let conditions = ids
                .iter()
                .map(|&id| {
                    let profile = builtin_profile(id).expect("bundled profile");
                    let covered = profile
                        .layouts
                        .iter()
                        .map(|lc| Layout::new(lc.rows, lc.cols).expect("profile layout"))
                        .collect();
                    Condition {
                        name: id.trim_start_matches("synthetic-").to_string(),
                        cm: cm.clone(),
                        clist: CommandSet::full(),
                        user: UserProfile::optimal(Some(0)),
                        rlist: standard_rank_methods(),
                        profile_id: Some(id.to_string()),
                        layouts: Some(covered),
                    }
                })
                .collect();
            Ok(base(
                name,
                layouts(&crate::profile::SYNTHETIC_LAYOUTS),
                conditions,
            ))
        }
        _ => Err(SimError::UnknownPreset(
            name.to_string(),
            PRESET_NAMES.join(", "),
        )),
    }
}

/// Top-level sweep definition as read from a TOML file: either a full
/// configuration or a preset reference with shallow overrides.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SweepFile {
    Preset {
        preset: String,
        seed_base: Option<String>,
        n: Option<usize>,
        trials: Option<u32>,
        profile_id: Option<String>,
    },
    Full(SweepConfig),
}

pub fn sweep_config_from_toml(text: &str) -> Result<SweepConfig, SimError> {
    let file: SweepFile = toml::from_str(text).map_err(|e| SimError::Parse {
        line: 0,
        message: format!("sweep config: {e}"),
    })?;
    let config = match file {
        SweepFile::Preset {
            preset: preset_name,
            seed_base,
            n,
            trials,
            profile_id,
        } => {
            let mut config = preset(&preset_name)?;
            if let Some(v) = seed_base {
                config.seed_base = v;
            }
            if let Some(v) = n {
                config.n = v;
            }
            if let Some(v) = trials {
                config.trials = v;
            }
            if let Some(v) = profile_id {
                config.profile_id = v;
            }
            config
        }
        SweepFile::Full(config) => config,
    };
    config.validate()?;
    Ok(config)
}
