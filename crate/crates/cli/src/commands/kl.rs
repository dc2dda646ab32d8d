//! `pushgp validate-kl`: score a model's predictive distributions against
//! repeated-push empirical distributions via per-push KL divergence.

use crate::artifact;
use crate::output::{csv_writer, write_sidecar};
use pushgp::data::group_repeats;
use pushgp::metrics::kl_push;
use pushgp::{Error, Result};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Clone, Serialize)]
pub struct KlOptions {
    pub model_file: PathBuf,
    pub data: PathBuf,
    pub out: PathBuf,
}

#[derive(Debug, Clone)]
pub struct KlGroupRow {
    pub speed: f64,
    pub contact: f64,
    pub angle: f64,
    pub count: usize,
    pub per_output: [f64; 3],
    pub total: f64,
    pub floored: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct KlSummary {
    pub n_groups: usize,
    /// Groups with a single repetition, excluded from the summary.
    pub excluded: usize,
    pub average: f64,
    pub median: f64,
}

pub fn cmd_validate_kl(opts: &KlOptions) -> Result<(Vec<KlGroupRow>, KlSummary)> {
    let model = artifact::load(&opts.model_file)?;
    let ds = crate::commands::load_dataset(&opts.data)?;
    let groups = group_repeats(&ds)?;
    let mut rows = Vec::new();
    let mut excluded = 0usize;
    for g in &groups {
        if g.empirical_std.is_none() {
            excluded += 1;
            continue;
        }
        let predicted = model.predict(&g.input)?;
        let r = kl_push(&predicted, g)?;
        rows.push(KlGroupRow {
            speed: g.input.speed,
            contact: g.input.contact,
            angle: g.input.angle,
            count: g.count,
            per_output: r.per_output,
            total: r.total,
            floored: r.variance_floored,
        });
    }
    if rows.is_empty() {
        return Err(Error::invalid(
            "no group has enough repetitions to estimate a distribution",
        ));
    }
    let mut totals: Vec<f64> = rows.iter().map(|r| r.total).collect();
    totals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let average = totals.iter().sum::<f64>() / totals.len() as f64;
    let median = if totals.len() % 2 == 1 {
        totals[totals.len() / 2]
    } else {
        0.5 * (totals[totals.len() / 2 - 1] + totals[totals.len() / 2])
    };
    let summary = KlSummary {
        n_groups: rows.len(),
        excluded,
        average,
        median,
    };

    let mut w = csv_writer(&opts.out)?;
    w.write_record([
        "kind", "v_p_mm_s", "c", "beta_rad", "count", "kl_dx", "kl_dy", "kl_dtheta", "kl_total",
        "variance_floored",
    ])
    .map_err(|e| Error::Format(e.to_string()))?;
    for r in &rows {
        w.write_record([
            "group".to_string(),
            r.speed.to_string(),
            r.contact.to_string(),
            r.angle.to_string(),
            r.count.to_string(),
            r.per_output[0].to_string(),
            r.per_output[1].to_string(),
            r.per_output[2].to_string(),
            r.total.to_string(),
            r.floored.to_string(),
        ])
        .map_err(|e| Error::Format(e.to_string()))?;
    }
    for (kind, value) in [("average", average), ("median", median)] {
        w.write_record([
            kind.to_string(),
            String::new(),
            String::new(),
            String::new(),
            summary.n_groups.to_string(),
            String::new(),
            String::new(),
            String::new(),
            value.to_string(),
            String::new(),
        ])
        .map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))?;
    write_sidecar(&opts.out, "validate-kl", &serde_json::json!({
        "options": opts,
        "summary": summary,
    }))?;
    Ok((rows, summary))
}
