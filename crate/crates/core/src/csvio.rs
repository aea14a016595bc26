//! CSV export/import. One header row, no comment lines, so every file loads
//! directly into a plotting tool. Scalars are written with the shortest
//! round-tripping decimal form, which makes reruns byte-identical (timing
//! columns aside) and imports exact.

use std::io::{Read, Write};

use crate::algorithms::{Algorithm, RunTrace};
use crate::error::Error;
use crate::losses::RidgeStream;
use crate::metrics::{DiagnosticsSeries, RegretReport, TimingRow};
use crate::network::MixingSchedule;
use crate::scalar::Scalar;

/// Schedule export: one block of `n` rows per round, columns
/// `t,row,w_1..w_n`.
pub fn write_schedule_csv<S: Scalar, W: Write>(
    out: W,
    schedule: &MixingSchedule<S>,
) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    let n = schedule.n();
    let mut header = vec!["t".to_string(), "row".to_string()];
    header.extend((1..=n).map(|j| format!("w_{j}")));
    w.write_record(&header)?;
    for t in 1..=schedule.horizon() {
        let a = schedule.matrix(t);
        for i in 0..n {
            let mut rec = vec![t.to_string(), i.to_string()];
            rec.extend((0..n).map(|j| a.entry(i, j).to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Stream export, columns `i,t,l,a_1..a_d`, one row per (agent, round).
/// Every materialized round is written so a replay regenerates budgets too.
pub fn write_stream_csv<S: Scalar, W: Write>(
    out: W,
    stream: &RidgeStream<S>,
) -> Result<(), Error> {
    use crate::losses::LossStream;
    let mut w = csv::Writer::from_writer(out);
    let d = stream.dim();
    let mut header = vec!["i".to_string(), "t".to_string(), "l".to_string()];
    header.extend((1..=d).map(|k| format!("a_{k}")));
    w.write_record(&header)?;
    for t in 1..=stream.max_round() {
        for i in 0..stream.agents() {
            let mut rec = vec![i.to_string(), t.to_string(), stream.label(i, t).to_string()];
            rec.extend(stream.feature(i, t).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Rebuilds a stream from [`write_stream_csv`] output. The regularizer is
/// not part of the schema and must be supplied.
pub fn read_stream_csv<S: Scalar, R: Read>(
    input: R,
    lambda1: S,
) -> Result<RidgeStream<S>, Error> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.len() < 4 || &headers[0] != "i" || &headers[1] != "t" || &headers[2] != "l" {
        return Err(Error::Parse(format!(
            "unexpected stream header: {:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let d = headers.len() - 3;
    let mut rows: Vec<(usize, usize, S, Vec<S>)> = Vec::new();
    let mut agents = 0usize;
    let mut rounds = 0usize;
    for record in r.records() {
        let record = record?;
        let i: usize = record[0].parse().map_err(|e| Error::Parse(format!("agent: {e}")))?;
        let t: usize = record[1].parse().map_err(|e| Error::Parse(format!("round: {e}")))?;
        let l = S::parse_scalar(&record[2]).map_err(Error::Parse)?;
        let mut a = Vec::with_capacity(d);
        for k in 0..d {
            a.push(S::parse_scalar(&record[3 + k]).map_err(Error::Parse)?);
        }
        agents = agents.max(i + 1);
        rounds = rounds.max(t);
        rows.push((i, t, l, a));
    }
    if rows.is_empty() {
        return Err(Error::Parse("empty stream file".into()));
    }
    let mut features = vec![S::nan(); rounds * agents * d];
    let mut labels = vec![S::nan(); rounds * agents];
    for (i, t, l, a) in rows {
        let base = ((t - 1) * agents + i) * d;
        features[base..base + d].copy_from_slice(&a);
        labels[(t - 1) * agents + i] = l;
    }
    if labels.iter().any(|v| v.is_nan()) {
        return Err(Error::Parse("stream file has missing (agent, round) rows".into()));
    }
    RidgeStream::from_parts(agents, d, lambda1, features, labels)
}

/// Trace export, columns `t,i,x_1..x_d,round_time_ns`; full traces append
/// the mixed points and revealed gradients, plus the oracle vertices and
/// gradient-tracking internals when the run produced them.
pub fn write_trace_csv<S: Scalar, W: Write>(out: W, trace: &RunTrace<S>) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    let d = trace.dim();
    let full = trace.mixed(0, 1).is_some();
    let diag = trace.diagnostics();
    let mut header: Vec<String> = vec!["t".into(), "i".into()];
    header.extend((1..=d).map(|k| format!("x_{k}")));
    header.push("round_time_ns".into());
    if full {
        for prefix in ["xhat", "grad"] {
            header.extend((1..=d).map(|k| format!("{prefix}_{k}")));
        }
    }
    if diag.is_some() {
        for prefix in ["gradbar", "gradhat", "v"] {
            header.extend((1..=d).map(|k| format!("{prefix}_{k}")));
        }
    }
    w.write_record(&header)?;
    for t in 1..=trace.horizon() {
        for i in 0..trace.agents() {
            let mut rec = vec![t.to_string(), i.to_string()];
            rec.extend(trace.decision(i, t).iter().map(|v| v.to_string()));
            rec.push(trace.round_times_ns()[t - 1].to_string());
            if full {
                let xhat = trace.mixed(i, t).expect("full trace");
                let grad = trace.gradient(i, t).expect("full trace");
                rec.extend(xhat.iter().map(|v| v.to_string()));
                rec.extend(grad.iter().map(|v| v.to_string()));
            }
            if let Some(diag) = diag {
                let lo = ((t - 1) * trace.agents() + i) * d;
                rec.extend(diag.grad_bar[lo..lo + d].iter().map(|v| v.to_string()));
                rec.extend(diag.grad_hat[lo..lo + d].iter().map(|v| v.to_string()));
                rec.extend(diag.v[lo..lo + d].iter().map(|v| v.to_string()));
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the decision columns of a trace CSV back into an analyzable trace.
pub fn read_trace_csv<S: Scalar, R: Read>(
    input: R,
    algorithm: Algorithm,
) -> Result<RunTrace<S>, Error> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.len() < 4 || &headers[0] != "t" || &headers[1] != "i" {
        return Err(Error::Parse(format!(
            "unexpected trace header: {:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let d = headers
        .iter()
        .skip(2)
        .take_while(|h| h.starts_with("x_"))
        .count();
    if d == 0 {
        return Err(Error::Parse("trace file has no decision columns".into()));
    }
    let mut cells: Vec<(usize, usize, Vec<S>, u64)> = Vec::new();
    let mut agents = 0usize;
    let mut horizon = 0usize;
    for record in r.records() {
        let record = record?;
        let t: usize = record[0].parse().map_err(|e| Error::Parse(format!("round: {e}")))?;
        let i: usize = record[1].parse().map_err(|e| Error::Parse(format!("agent: {e}")))?;
        let mut x = Vec::with_capacity(d);
        for k in 0..d {
            x.push(S::parse_scalar(&record[2 + k]).map_err(Error::Parse)?);
        }
        let ns: u64 = record[2 + d]
            .parse()
            .map_err(|e| Error::Parse(format!("round_time_ns: {e}")))?;
        agents = agents.max(i + 1);
        horizon = horizon.max(t);
        cells.push((t, i, x, ns));
    }
    if cells.is_empty() {
        return Err(Error::Parse("empty trace file".into()));
    }
    let mut decisions = vec![S::nan(); horizon * agents * d];
    let mut times = vec![0u64; horizon];
    for (t, i, x, ns) in cells {
        let base = ((t - 1) * agents + i) * d;
        decisions[base..base + d].copy_from_slice(&x);
        times[t - 1] = ns;
    }
    if decisions.iter().any(|v| v.is_nan()) {
        return Err(Error::Parse("trace file has missing (round, agent) rows".into()));
    }
    RunTrace::from_decisions(algorithm, agents, d, horizon, decisions, times)
}

/// Regret export, columns
/// `T_prime,avg_regret_over_T,sup_envelope,inf_envelope,H_T,D_T,theorem1_rhs`.
/// Budget and bound columns are blank if they were not attached.
pub fn write_regret_csv<S: Scalar, W: Write>(
    out: W,
    report: &RegretReport<S>,
) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "T_prime",
        "avg_regret_over_T",
        "sup_envelope",
        "inf_envelope",
        "H_T",
        "D_T",
        "theorem1_rhs",
    ])?;
    let opt = |series: &Option<Vec<S>>, t: usize| {
        series
            .as_ref()
            .and_then(|s| s.get(t - 1))
            .map(|v| v.to_string())
            .unwrap_or_default()
    };
    for t in 1..=report.horizon {
        w.write_record([
            t.to_string(),
            report.avg_over_t[t - 1].to_string(),
            report.sup_over_t[t - 1].to_string(),
            report.inf_over_t[t - 1].to_string(),
            opt(&report.h_cumulative, t),
            opt(&report.d_cumulative, t),
            opt(&report.bound_rhs, t),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Diagnostics export, columns `t,consensus_err,grad_consensus_err,delta_sum`.
pub fn write_diagnostics_csv<S: Scalar, W: Write>(
    out: W,
    diagnostics: &DiagnosticsSeries<S>,
) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "consensus_err", "grad_consensus_err", "delta_sum"])?;
    for t in 0..diagnostics.consensus_err.len() {
        w.write_record([
            (t + 1).to_string(),
            diagnostics.consensus_err[t].to_string(),
            diagnostics.grad_consensus_err[t].to_string(),
            diagnostics.delta_sum[t].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Timing export, columns `algorithm,d,rounds,mean_round_time_s,total_time_s`.
pub fn write_timing_csv<W: Write>(out: W, rows: &[TimingRow]) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["algorithm", "d", "rounds", "mean_round_time_s", "total_time_s"])?;
    for row in rows {
        w.write_record([
            row.algorithm.clone(),
            row.dim.to_string(),
            row.rounds.to_string(),
            row.mean_round_secs.to_string(),
            row.total_secs.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
