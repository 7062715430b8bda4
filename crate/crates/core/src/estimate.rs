//! Fitting unit time costs from captured interaction logs.
//!
//! Logs arrive as CSV with one row per operation:
//! `session_id,op_kind,rows,cols,start_ms,end_ms,err_ratio`.
//!
//! Two capture styles are supported per layout:
//! - direct: every operation carries its own measured duration; the three
//!   layout-dependent costs are plain means.
//! - lumped: view and single rows are zero-duration markers and the
//!   overview row spans the rest of the batch (overview + views + singles).
//!   The three costs are then recovered from the per-batch linear system
//!   `T = t_overview + k * t_view + m * t_single` by least squares, which
//!   needs batches with distinct (k, m) combinations to be identifiable.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::profile::{GenericCosts, Layout, LayoutCosts, TimingProfile};
use crate::session::{BatchRecord, OpKind, OpLog};

/// One captured operation. Timestamps are wall-clock milliseconds and may
/// carry sub-millisecond fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpRecord {
    pub session_id: String,
    pub op_kind: OpKind,
    pub rows: u32,
    pub cols: u32,
    pub start_ms: f64,
    pub end_ms: f64,
    /// (K_fp + K_fn) / K of the enclosing batch.
    pub err_ratio: f64,
}

impl OpRecord {
    pub fn duration_s(&self) -> f64 {
        (self.end_ms - self.start_ms) / 1000.0
    }

    pub fn layout(&self) -> Layout {
        Layout {
            rows: self.rows,
            cols: self.cols,
        }
    }
}

pub const OP_LOG_HEADER: &str = "session_id,op_kind,rows,cols,start_ms,end_ms,err_ratio";

/// Parses a CSV op log, reporting malformed lines by number (header = line 1).
pub fn parse_op_log<R: Read>(source: R) -> Result<Vec<OpRecord>, SimError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    {
        let headers = reader.headers().map_err(|e| SimError::Parse {
            line: 1,
            message: e.to_string(),
        })?;
        let expected: Vec<&str> = OP_LOG_HEADER.split(',').collect();
        for column in &expected {
            if !headers.iter().any(|h| h == *column) {
                return Err(SimError::Parse {
                    line: 1,
                    message: format!("missing column '{column}'"),
                });
            }
        }
    }
    let mut records = Vec::new();
    for (idx, row) in reader.deserialize::<RawRecord>().enumerate() {
        let line = idx + 2;
        let raw = row.map_err(|e| SimError::Parse {
            line,
            message: e.to_string(),
        })?;
        let op_kind = OpKind::parse(&raw.op_kind).ok_or_else(|| SimError::Parse {
            line,
            message: format!("unknown op_kind '{}'", raw.op_kind),
        })?;
        if raw.end_ms < raw.start_ms {
            return Err(SimError::Parse {
                line,
                message: format!(
                    "negative duration: end_ms {} < start_ms {}",
                    raw.end_ms, raw.start_ms
                ),
            });
        }
        if !(0.0..=1.0).contains(&raw.err_ratio) {
            return Err(SimError::Parse {
                line,
                message: format!("err_ratio {} outside [0, 1]", raw.err_ratio),
            });
        }
        records.push(OpRecord {
            session_id: raw.session_id,
            op_kind,
            rows: raw.rows,
            cols: raw.cols,
            start_ms: raw.start_ms,
            end_ms: raw.end_ms,
            err_ratio: raw.err_ratio,
        });
    }
    Ok(records)
}

#[derive(Deserialize)]
struct RawRecord {
    session_id: String,
    op_kind: String,
    rows: u32,
    cols: u32,
    start_ms: f64,
    end_ms: f64,
    err_ratio: f64,
}

/// Writes records in the canonical CSV format.
pub fn write_op_log<W: std::io::Write>(
    records: &[OpRecord],
    writer: W,
) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(OP_LOG_HEADER.split(','))
        .map_err(|e| SimError::Parse {
            line: 1,
            message: e.to_string(),
        })?;
    for r in records {
        w.write_record([
            r.session_id.as_str(),
            r.op_kind.as_str(),
            &r.rows.to_string(),
            &r.cols.to_string(),
            &format!("{:?}", r.start_ms),
            &format!("{:?}", r.end_ms),
            &format!("{:?}", r.err_ratio),
        ])
        .map_err(|e| SimError::Parse {
            line: 0,
            message: e.to_string(),
        })?;
    }
    w.flush().map_err(|e| SimError::io("op log", e))?;
    Ok(())
}

/// Order-invariant mean of the given durations.
fn sorted_mean(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values.iter().sum::<f64>() / values.len() as f64
}

/// Means of the three layout-independent costs.
pub fn estimate_generic(records: &[OpRecord]) -> Result<GenericCosts, SimError> {
    let mean_of = |kind: OpKind| -> Result<f64, SimError> {
        let durations: Vec<f64> = records
            .iter()
            .filter(|r| r.op_kind == kind)
            .map(|r| r.duration_s())
            .collect();
        if durations.is_empty() {
            return Err(SimError::Unidentifiable(
                format!("t_{}", kind.as_str()),
                "no records of this kind".into(),
            ));
        }
        Ok(sorted_mean(durations))
    };
    Ok(GenericCosts {
        t_new: mean_of(OpKind::New)?,
        t_rank: mean_of(OpKind::Rank)?,
        t_global: mean_of(OpKind::Global)?,
    })
}

/// Fitted layout-dependent costs plus fit diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutFit {
    pub t_view: f64,
    pub t_overview: f64,
    pub t_single: f64,
    /// Records (direct) or batches (lumped) backing the fit.
    pub samples: usize,
    pub residual_norm: f64,
    /// Mean single-edit duration per err-ratio decile, where observed.
    pub err_bucket_single_means: BTreeMap<u32, f64>,
}

/// Fits `t_view`, `t_overview`, `t_single` per layout.
pub fn fit_batch_params(
    records: &[OpRecord],
) -> Result<BTreeMap<Layout, LayoutFit>, SimError> {
    let mut layouts: BTreeMap<Layout, Vec<&OpRecord>> = BTreeMap::new();
    for r in records {
        if matches!(r.op_kind, OpKind::View | OpKind::Overview | OpKind::Single)
            || matches!(r.op_kind, OpKind::New | OpKind::Global | OpKind::Rank)
        {
            layouts.entry(r.layout()).or_default().push(r);
        }
    }
    if layouts.is_empty() {
        return Err(SimError::Unidentifiable(
            "batch parameters".into(),
            "no records".into(),
        ));
    }
    let mut fits = BTreeMap::new();
    for (layout, recs) in layouts {
        let positive = |kind: OpKind| -> Vec<f64> {
            recs.iter()
                .filter(|r| r.op_kind == kind && r.duration_s() > 0.0)
                .map(|r| r.duration_s())
                .collect()
        };
        let views = positive(OpKind::View);
        let overviews = positive(OpKind::Overview);
        let singles = positive(OpKind::Single);

        let err_bucket_single_means = err_buckets(&recs);

        let fit = if !views.is_empty() && !overviews.is_empty() && !singles.is_empty() {
            LayoutFit {
                samples: views.len() + overviews.len() + singles.len(),
                t_view: sorted_mean(views),
                t_overview: sorted_mean(overviews),
                t_single: sorted_mean(singles),
                residual_norm: 0.0,
                err_bucket_single_means,
            }
        } else {
            fit_lumped(layout, &recs, err_bucket_single_means)?
        };
        fits.insert(layout, fit);
    }
    Ok(fits)
}

fn err_buckets(recs: &[&OpRecord]) -> BTreeMap<u32, f64> {
    let mut buckets: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for r in recs {
        if r.op_kind == OpKind::Single && r.duration_s() > 0.0 {
            let bucket = ((r.err_ratio * 10.0).floor() as u32).min(9);
            buckets.entry(bucket).or_default().push(r.duration_s());
        }
    }
    buckets
        .into_iter()
        .map(|(b, v)| (b, sorted_mean(v)))
        .collect()
}

/// One reconstructed batch: the lumped remainder time and its op counts.
struct BatchRow {
    total_s: f64,
    k_view: f64,
    m_single: f64,
}

fn fit_lumped(
    layout: Layout,
    recs: &[&OpRecord],
    err_bucket_single_means: BTreeMap<u32, f64>,
) -> Result<LayoutFit, SimError> {
    // Group by session, order by start time, split batches at `new` ops.
    let mut by_session: BTreeMap<&str, Vec<&OpRecord>> = BTreeMap::new();
    for r in recs {
        by_session.entry(r.session_id.as_str()).or_default().push(r);
    }
    let mut rows: Vec<BatchRow> = Vec::new();
    for (_, mut ops) in by_session {
        ops.sort_by(|a, b| a.start_ms.partial_cmp(&b.start_ms).unwrap());
        let mut current: Option<BatchRow> = None;
        for op in ops {
            if op.op_kind == OpKind::New {
                if let Some(row) = current.take() {
                    rows.push(row);
                }
                current = Some(BatchRow {
                    total_s: 0.0,
                    k_view: 0.0,
                    m_single: 0.0,
                });
            }
            if let Some(row) = current.as_mut() {
                match op.op_kind {
                    OpKind::View => row.k_view += 1.0,
                    OpKind::Single => row.m_single += 1.0,
                    OpKind::Overview => row.total_s += op.duration_s(),
                    // Generic ops carry their own measured durations and
                    // stay out of the lumped remainder.
                    OpKind::New | OpKind::Global | OpKind::Rank => {}
                }
            }
        }
        if let Some(row) = current.take() {
            rows.push(row);
        }
    }
    if rows.len() < 3 {
        return Err(SimError::Unidentifiable(
            format!("layout {layout}"),
            format!("only {} batches reconstructed, need >= 3", rows.len()),
        ));
    }
    // Normal equations for T = t_overview + k * t_view + m * t_single.
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for row in &rows {
        let x = [1.0, row.k_view, row.m_single];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += x[i] * x[j];
            }
            atb[i] += x[i] * row.total_s;
        }
    }
    let solution = solve_3x3(ata, atb).ok_or_else(|| {
        SimError::Unidentifiable(
            format!("layout {layout}"),
            "rank-deficient batch system; need batches with distinct (k, n_single)".into(),
        )
    })?;
    let residual_norm = rows
        .iter()
        .map(|row| {
            let predicted =
                solution[0] + solution[1] * row.k_view + solution[2] * row.m_single;
            (row.total_s - predicted).powi(2)
        })
        .sum::<f64>()
        .sqrt();
    Ok(LayoutFit {
        t_overview: solution[0],
        t_view: solution[1],
        t_single: solution[2],
        samples: rows.len(),
        residual_norm,
        err_bucket_single_means,
    })
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_3x3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let mut m = [[0.0f64; 4]; 3];
    for i in 0..3 {
        m[i][..3].copy_from_slice(&a[i]);
        m[i][3] = b[i];
    }
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |acc, &v| acc.max(v.abs()))
        .max(1.0);
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())?;
        if m[pivot][col].abs() < 1e-10 * scale {
            return None;
        }
        m.swap(col, pivot);
        for row in col + 1..3 {
            let factor = m[row][col] / m[col][col];
            for k in col..4 {
                m[row][k] -= factor * m[col][k];
            }
        }
    }
    let mut x = [0.0f64; 3];
    for i in (0..3).rev() {
        let mut sum = m[i][3];
        for j in i + 1..3 {
            sum -= m[i][j] * x[j];
        }
        x[i] = sum / m[i][i];
    }
    Some(x)
}

/// Assembles a profile from fitted values, rejecting non-positive fits.
pub fn build_timing_profile(
    generic: GenericCosts,
    per_layout: &BTreeMap<Layout, LayoutFit>,
    id: &str,
) -> Result<TimingProfile, SimError> {
    let profile = TimingProfile {
        id: id.to_string(),
        generic,
        layouts: per_layout
            .iter()
            .map(|(layout, fit)| LayoutCosts {
                rows: layout.rows,
                cols: layout.cols,
                t_view: fit.t_view,
                t_overview: fit.t_overview,
                t_single: fit.t_single,
            })
            .collect(),
    };
    profile.validate()?;
    Ok(profile)
}

/// Runs the full pipeline: parse, estimate generic costs, fit per layout.
pub fn fit_profile_from_log<R: Read>(source: R, id: &str) -> Result<TimingProfile, SimError> {
    let records = parse_op_log(source)?;
    let generic = estimate_generic(&records)?;
    let fits = fit_batch_params(&records)?;
    build_timing_profile(generic, &fits, id)
}

/// Exports a simulated session as a direct-capture log: every operation
/// gets the profile's unit duration and sequential timestamps. The batch
/// records supply each batch's error ratio.
pub fn records_from_session(
    ops: &OpLog,
    batches: &[BatchRecord],
    timing: &TimingProfile,
    layout: Layout,
    session_id: &str,
) -> Result<Vec<OpRecord>, SimError> {
    let unit = timing.costs(layout)?;
    let mut clock_ms = 0.0f64;
    let mut records = Vec::with_capacity(ops.ops.len());
    for op in &ops.ops {
        let duration_s = match op.kind {
            OpKind::New => unit.t_new,
            OpKind::Overview => unit.t_overview,
            OpKind::View => unit.t_view,
            OpKind::Single => unit.t_single,
            OpKind::Global => unit.t_global,
            OpKind::Rank => unit.t_rank,
        };
        let batch = &batches[op.batch_index];
        let err_ratio = batch.n_single as f64 / batch.k_batch as f64;
        let end_ms = clock_ms + duration_s * 1000.0;
        records.push(OpRecord {
            session_id: session_id.to_string(),
            op_kind: op.kind,
            rows: layout.rows,
            cols: layout.cols,
            start_ms: clock_ms,
            end_ms,
            err_ratio,
        });
        clock_ms = end_ms;
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mock::ConfusionMatrix;
    use crate::profile::synthetic_default;
    use crate::session::{simulate_session, SessionConfig};
    use crate::strategy::{CommandSet, UserProfile};

    fn sample_session_records(layout: Layout, n: usize, seed: u64) -> Vec<OpRecord> {
        let timing = synthetic_default();
        let config = SessionConfig {
            n,
            cm: ConfusionMatrix::binary(0.50, 0.05, 0.30, 0.15).unwrap(),
            layout,
            timing: timing.clone(),
            clist: CommandSet::full(),
            profile: UserProfile::optimal(None),
            rlist: vec![],
            seed,
        };
        let (ops, result) = simulate_session(&config).unwrap();
        records_from_session(&ops, &result.batches, &timing, layout, &format!("s{seed}"))
            .unwrap()
    }

    #[test]
    fn parse_well_formed() {
        let csv = "session_id,op_kind,rows,cols,start_ms,end_ms,err_ratio\n\
                   s1,new,4,5,0,1500,0.2\n\
                   s1,overview,4,5,1500,3000,0.2\n\
                   s1,view,4,5,3000,3600,0.2\n\
                   s1,single,4,5,3600,4900,0.2\n\
                   s1,global,4,5,4900,5900,0.2\n\
                   s1,rank,4,5,5900,8900,0.2\n";
        let records = parse_op_log(csv.as_bytes()).unwrap();
        assert_eq!(records.len(), 6);
        assert_eq!(records[0].op_kind, OpKind::New);
        assert!((records[0].duration_s() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn parse_reports_line_numbers() {
        let csv = "session_id,op_kind,rows,cols,start_ms,end_ms,err_ratio\n\
                   s1,new,4,5,0,1500,0.2\n\
                   s1,view,4,5,2000,1000,0.2\n";
        let err = parse_op_log(csv.as_bytes()).unwrap_err();
        match err {
            SimError::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("negative duration"));
            }
            other => panic!("unexpected error: {other}"),
        }

        let csv = "session_id,op_kind,rows,cols,start_ms,end_ms,err_ratio\n\
                   s1,zoom,4,5,0,1,0.2\n";
        assert!(matches!(
            parse_op_log(csv.as_bytes()),
            Err(SimError::Parse { line: 2, .. })
        ));

        let csv = "session_id,op_kind,rows,cols,start_ms,end_ms\ns1,new,4,5,0,1\n";
        match parse_op_log(csv.as_bytes()).unwrap_err() {
            SimError::Parse { line: 1, message } => assert!(message.contains("err_ratio")),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn parse_empty_log() {
        let csv = "session_id,op_kind,rows,cols,start_ms,end_ms,err_ratio\n";
        assert!(parse_op_log(csv.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn generic_means() {
        let mk = |kind: &str, start: f64, end: f64| {
            format!("s1,{kind},4,5,{start},{end},0.0\n")
        };
        let csv = format!(
            "{OP_LOG_HEADER}\n{}{}{}{}",
            mk("new", 0.0, 900.0),
            mk("new", 900.0, 2000.0),
            mk("rank", 2000.0, 5000.0),
            mk("global", 5000.0, 7400.0),
        );
        let records = parse_op_log(csv.as_bytes()).unwrap();
        let generic = estimate_generic(&records).unwrap();
        assert!((generic.t_new - 1.0).abs() < 1e-12);
        assert!((generic.t_rank - 3.0).abs() < 1e-12);
        assert!((generic.t_global - 2.4).abs() < 1e-12);
    }

    #[test]
    fn generic_missing_kind_errors() {
        let csv = format!("{OP_LOG_HEADER}\ns1,new,4,5,0,900,0.0\n");
        let records = parse_op_log(csv.as_bytes()).unwrap();
        match estimate_generic(&records).unwrap_err() {
            SimError::Unidentifiable(what, _) => assert_eq!(what, "t_rank"),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn noiseless_round_trip_direct() {
        let layout = Layout::new(4, 5).unwrap();
        let mut records = sample_session_records(layout, 200, 1);
        records.extend(sample_session_records(layout, 200, 2));
        // Rank/global kinds may be absent without ranking; synthesize one of each.
        let timing = synthetic_default();
        records.push(OpRecord {
            session_id: "aux".into(),
            op_kind: OpKind::Rank,
            rows: 4,
            cols: 5,
            start_ms: 0.0,
            end_ms: timing.generic.t_rank * 1000.0,
            err_ratio: 0.0,
        });
        let fitted = {
            let generic = estimate_generic(&records).unwrap();
            let fits = fit_batch_params(&records).unwrap();
            build_timing_profile(generic, &fits, "refit").unwrap()
        };
        let want = timing.costs(layout).unwrap();
        let got = fitted.costs(layout).unwrap();
        for (a, b) in [
            (got.t_new, want.t_new),
            (got.t_view, want.t_view),
            (got.t_overview, want.t_overview),
            (got.t_single, want.t_single),
        ] {
            assert!((a - b).abs() / b < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn lumped_round_trip() {
        // Convert direct records into lumped form: zero-duration view and
        // single markers, overview spans the inner loop.
        let layout = Layout::new(4, 5).unwrap();
        let timing = synthetic_default();
        let mut lumped: Vec<OpRecord> = Vec::new();
        // Uneven session sizes leave partial last batches, so k varies and
        // the intercept stays separable from the per-view term.
        for (n, seed) in [(200usize, 1u64), (193, 2), (207, 3)] {
            let direct = sample_session_records(layout, n, seed);
            let mut pending_inner = 0.0f64;
            let mut overview_at = None;
            for r in &direct {
                match r.op_kind {
                    OpKind::Overview => {
                        overview_at = Some(lumped.len());
                        pending_inner = r.duration_s();
                        lumped.push(r.clone());
                    }
                    OpKind::View | OpKind::Single => {
                        pending_inner += r.duration_s();
                        let mut marker = r.clone();
                        marker.end_ms = marker.start_ms;
                        lumped.push(marker);
                        if let Some(at) = overview_at {
                            lumped[at].end_ms =
                                lumped[at].start_ms + pending_inner * 1000.0;
                        }
                    }
                    _ => lumped.push(r.clone()),
                }
            }
        }
        let fits = fit_batch_params(&lumped).unwrap();
        let fit = &fits[&layout];
        let want = timing.costs(layout).unwrap();
        assert!((fit.t_view - want.t_view).abs() / want.t_view < 1e-9);
        assert!((fit.t_overview - want.t_overview).abs() / want.t_overview < 1e-9);
        assert!((fit.t_single - want.t_single).abs() / want.t_single < 1e-9);
        assert!(fit.residual_norm < 1e-9);
    }

    #[test]
    fn lumped_rank_deficiency_detected() {
        // Identical batches: only one distinct (k, m) combination.
        let mut csv = format!("{OP_LOG_HEADER}\n");
        let mut t = 0.0;
        for _ in 0..5 {
            csv.push_str(&format!("s1,new,2,2,{t},{},0.5\n", t + 1000.0));
            t += 1000.0;
            csv.push_str(&format!("s1,overview,2,2,{t},{},0.5\n", t + 8000.0));
            t += 8000.0;
            for _ in 0..4 {
                csv.push_str(&format!("s1,view,2,2,{t},{t},0.5\n"));
            }
            for _ in 0..2 {
                csv.push_str(&format!("s1,single,2,2,{t},{t},0.5\n"));
            }
        }
        let records = parse_op_log(csv.as_bytes()).unwrap();
        match fit_batch_params(&records).unwrap_err() {
            SimError::Unidentifiable(what, _) => assert!(what.contains("2x2")),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn fit_invariant_to_record_order() {
        let layout = Layout::new(3, 4).unwrap();
        let records = sample_session_records(layout, 200, 9);
        let fits_a = fit_batch_params(&records).unwrap();
        let mut reversed = records.clone();
        reversed.reverse();
        let fits_b = fit_batch_params(&reversed).unwrap();
        assert_eq!(fits_a, fits_b);
    }

    #[test]
    fn build_rejects_nonpositive() {
        let generic = GenericCosts {
            t_new: 1.0,
            t_rank: 1.0,
            t_global: 1.0,
        };
        let mut fits = BTreeMap::new();
        fits.insert(
            Layout::new(2, 2).unwrap(),
            LayoutFit {
                t_view: 0.0,
                t_overview: 1.0,
                t_single: 1.0,
                samples: 3,
                residual_norm: 0.0,
                err_bucket_single_means: BTreeMap::new(),
            },
        );
        assert!(build_timing_profile(generic, &fits, "bad").is_err());
    }
}
