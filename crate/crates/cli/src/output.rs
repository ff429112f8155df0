//! CSV tables and run metadata.
//!
//! `regret.csv`: `policy,checkpoint,mean_regret,stderr`
//!
//! `allocations.csv`: `policy,checkpoint,type,resource,mean_count`, where
//! `resource` is a resource index or `reject`.
//!
//! Floats carry six decimals; rows follow the policy order of the run, then
//! checkpoint, type and resource.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use kbsim_core::sim::PolicySummary;

pub const REJECT: &str = "reject";

/// Six-decimal rendering; negative zero prints as zero.
pub fn fmt6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

/// The value a reader recovers from [`fmt6`].
pub fn round6(x: f64) -> f64 {
    fmt6(x).parse().expect("formatted float parses")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretRow {
    pub policy: String,
    pub checkpoint: usize,
    pub mean_regret: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationRow {
    pub policy: String,
    pub checkpoint: usize,
    #[serde(rename = "type")]
    pub ty: usize,
    pub resource: String,
    pub mean_count: f64,
}

/// Rows as they appear after a write/read round trip.
pub fn regret_rows(summaries: &[PolicySummary]) -> Vec<RegretRow> {
    summaries
        .iter()
        .flat_map(|s| {
            s.checkpoints.iter().map(move |c| RegretRow {
                policy: s.policy.name().to_string(),
                checkpoint: c.t,
                mean_regret: round6(c.mean_regret),
                stderr: round6(c.stderr),
            })
        })
        .collect()
}

pub fn allocation_rows(summaries: &[PolicySummary]) -> Vec<AllocationRow> {
    let mut rows = Vec::new();
    for s in summaries {
        for c in &s.checkpoints {
            for (ty, counts) in c.mean_allocations.iter().enumerate() {
                let reject = counts.len() - 1;
                for (arm, m) in counts.iter().enumerate() {
                    rows.push(AllocationRow {
                        policy: s.policy.name().to_string(),
                        checkpoint: c.t,
                        ty,
                        resource: if arm == reject {
                            REJECT.to_string()
                        } else {
                            arm.to_string()
                        },
                        mean_count: round6(*m),
                    });
                }
            }
        }
    }
    rows
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

pub fn write_regret<W: Write>(rows: &[RegretRow], out: W) -> csv::Result<()> {
    let mut w = writer(out);
    w.write_record(["policy", "checkpoint", "mean_regret", "stderr"])?;
    for r in rows {
        w.write_record([
            r.policy.clone(),
            r.checkpoint.to_string(),
            fmt6(r.mean_regret),
            fmt6(r.stderr),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_allocations<W: Write>(rows: &[AllocationRow], out: W) -> csv::Result<()> {
    let mut w = writer(out);
    w.write_record(["policy", "checkpoint", "type", "resource", "mean_count"])?;
    for r in rows {
        w.write_record([
            r.policy.clone(),
            r.checkpoint.to_string(),
            r.ty.to_string(),
            r.resource.clone(),
            fmt6(r.mean_count),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_regret<R: Read>(input: R) -> csv::Result<Vec<RegretRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

pub fn read_allocations<R: Read>(input: R) -> csv::Result<Vec<AllocationRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_decimals() {
        assert_eq!(fmt6(495.0), "495.000000");
        assert_eq!(fmt6(-1e-9), "0.000000");
        assert_eq!(fmt6(1.0 / 3.0), "0.333333");
        assert_eq!(round6(2.0 / 3.0), 0.666667);
    }

    #[test]
    fn regret_round_trip() {
        let rows = vec![
            RegretRow {
                policy: "ulwe".into(),
                checkpoint: 100,
                mean_regret: round6(12.3456789),
                stderr: round6(0.5),
            },
            RegretRow {
                policy: "alg_lp".into(),
                checkpoint: 200,
                mean_regret: round6(-0.25),
                stderr: 0.0,
            },
        ];
        let mut buf = Vec::new();
        write_regret(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(!text.contains('\r'));
        assert!(
            text.starts_with("policy,checkpoint,mean_regret,stderr\nulwe,100,12.345679,0.500000\n")
        );
        assert_eq!(read_regret(buf.as_slice()).unwrap(), rows);
    }
}
