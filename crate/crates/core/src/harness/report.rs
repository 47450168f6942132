//! CSV and Markdown report emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::conceal::Algorithm;
use crate::video_io::write_atomic;

use super::config::ExperimentConfig;
use super::psnr::Psnr;
use super::run::ExperimentReport;
use super::HarnessError;

/// Published pooled PSNR (dB) for the CIF test sequences, in
/// `Algorithm::ALL` order.
pub const PUBLISHED_PSNR_DB: [(&str, [f64; 5]); 3] = [
    ("city", [25.63, 22.53, 27.94, 31.99, 32.52]),
    ("foreman", [27.60, 30.10, 33.04, 34.37, 35.53]),
    ("vimto", [22.79, 28.14, 28.21, 29.31, 30.70]),
];

/// Published frame-count results for "vimto": `(n_prev, n_next, 3D-FSE, MC-FSE)`.
pub const PUBLISHED_SWEEP_DB: [(usize, usize, f64, f64); 4] = [
    (1, 0, 29.21, 29.35),
    (2, 0, 28.80, 30.01),
    (1, 1, 30.63, 31.08),
    (2, 2, 29.31, 30.70),
];

pub const POOLING_NOTE: &str = "PSNR pools the squared error of every lost pixel over all loss \
frames of a sequence before conversion to dB; `inf` marks zero error.";

/// The published value for a sequence whose name contains one of the known
/// CIF sequence names.
pub fn published_psnr(sequence: &str, algorithm: Algorithm) -> Option<f64> {
    let name = sequence.to_ascii_lowercase();
    let col = Algorithm::ALL.iter().position(|&a| a == algorithm)?;
    PUBLISHED_PSNR_DB
        .iter()
        .find(|(k, _)| name.contains(k))
        .map(|(_, v)| v[col])
}

fn db(p: &Psnr) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{:.4}", p.db())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn report_csv(report: &ExperimentReport) -> String {
    let mut s = String::from(
        "sequence,algorithm,n_prev,n_next,psnr_pooled_db,infinite,mse,lost_pixels,blocks,\
         failed_blocks,fallback_blocks,aligned_blocks,non_monotone_blocks,seconds\n",
    );
    for c in &report.cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{:.6},{},{},{},{},{},{},{:.3}",
            csv_field(&c.sequence),
            c.algorithm.name(),
            c.n_prev,
            c.n_next,
            db(&c.psnr),
            c.psnr.is_infinite(),
            c.psnr.mse(),
            c.psnr.count,
            c.blocks.len(),
            c.failed_blocks(),
            c.fallback_blocks(),
            c.aligned_blocks(),
            c.non_monotone_blocks(),
            c.seconds
        );
    }
    s
}

pub fn blocks_csv(report: &ExperimentReport) -> String {
    let mut s = String::from(
        "sequence,algorithm,frame,x0,y0,size,psnr_db,mse,aligned,energy_non_increasing,fallback,error\n",
    );
    let opt = |b: Option<bool>| b.map(|b| b.to_string()).unwrap_or_default();
    for c in &report.cells {
        for b in &c.blocks {
            let r = &b.report;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{:.6},{},{},{},{}",
                csv_field(&c.sequence),
                c.algorithm.name(),
                r.block.frame,
                r.block.x0,
                r.block.y0,
                r.block.size,
                db(&b.psnr),
                b.psnr.mse(),
                opt(r.aligned),
                opt(r.energy_non_increasing),
                csv_field(r.fallback.as_deref().unwrap_or("")),
                csv_field(r.error.as_deref().unwrap_or(""))
            );
        }
    }
    s
}

/// One row per iteration, one column per (sequence, algorithm).
pub fn trace_csv(report: &ExperimentReport) -> String {
    let mut columns: BTreeMap<(String, Algorithm), BTreeMap<usize, Psnr>> = BTreeMap::new();
    for t in &report.traces {
        columns
            .entry((t.sequence.clone(), t.algorithm))
            .or_default()
            .insert(t.iteration, t.psnr);
    }
    let mut s = String::from("iteration");
    for (seq, alg) in columns.keys() {
        s += &format!(",{}", csv_field(&format!("{seq} {}", alg.name())));
    }
    s.push('\n');
    let last = columns
        .values()
        .filter_map(|c| c.keys().last())
        .max()
        .copied()
        .unwrap_or(0);
    for it in 1..=last {
        s += &it.to_string();
        for col in columns.values() {
            s.push(',');
            if let Some(p) = col.get(&it) {
                s += &db(p);
            }
        }
        s.push('\n');
    }
    s
}

/// One row per (sequence, n_prev, n_next), one column per FSE algorithm.
pub fn sweep_csv(report: &ExperimentReport) -> String {
    let algs: Vec<Algorithm> = Algorithm::ALL
        .into_iter()
        .filter(|a| report.sweep.iter().any(|r| r.algorithm == *a))
        .collect();
    let mut s = String::from("sequence,n_prev,n_next");
    for a in &algs {
        s += &format!(",{}", a.name());
    }
    s.push('\n');
    let mut rows: Vec<(String, usize, usize)> = Vec::new();
    for r in &report.sweep {
        let key = (r.sequence.clone(), r.n_prev, r.n_next);
        if !rows.contains(&key) {
            rows.push(key);
        }
    }
    for (seq, p, f) in rows {
        s += &format!("{},{p},{f}", csv_field(&seq));
        for a in &algs {
            s.push(',');
            if let Some(r) = report
                .sweep
                .iter()
                .find(|r| r.sequence == seq && r.n_prev == p && r.n_next == f && r.algorithm == *a)
            {
                s += &db(&r.psnr);
            }
        }
        s.push('\n');
    }
    s
}

fn md_db(p: &Psnr) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{:.2} dB", p.db())
    }
}

/// Algorithms as rows, sequences as columns.
pub fn report_markdown(report: &ExperimentReport) -> String {
    let mut seqs: Vec<&str> = Vec::new();
    for c in &report.cells {
        if !seqs.contains(&c.sequence.as_str()) {
            seqs.push(&c.sequence);
        }
    }
    let algs: Vec<Algorithm> = Algorithm::ALL
        .into_iter()
        .filter(|a| report.cells.iter().any(|c| c.algorithm == *a))
        .collect();
    let mut s = String::from("# Concealment results\n\n");
    s += POOLING_NOTE;
    s += "\n\n|  |";
    for q in &seqs {
        s += &format!(" {q} |");
    }
    s += "\n|---|";
    s += &"---|".repeat(seqs.len());
    s.push('\n');
    for a in &algs {
        s += &format!("| {} |", a.name());
        for q in &seqs {
            match report.cell(q, *a) {
                Some(c) => s += &format!(" {} |", md_db(&c.psnr)),
                None => s += " |",
            }
        }
        s.push('\n');
    }

    let published: Vec<&str> = seqs
        .iter()
        .copied()
        .filter(|q| published_psnr(q, Algorithm::Tr).is_some())
        .collect();
    if !published.is_empty() {
        s += "\nPublished values for the same sequences, for reference only (the loss \
              pattern is not identical):\n\n|  |";
        for q in &published {
            s += &format!(" {q} |");
        }
        s += "\n|---|";
        s += &"---|".repeat(published.len());
        s.push('\n');
        for a in &algs {
            s += &format!("| {} |", a.name());
            for q in &published {
                s += &format!(" {:.2} dB |", published_psnr(q, *a).unwrap_or(f64::NAN));
            }
            s.push('\n');
        }
    }

    if !report.sweep.is_empty() {
        s += "\n## Frame counts\n\n| sequence | n_prev | n_next |";
        let algs: Vec<Algorithm> = Algorithm::ALL
            .into_iter()
            .filter(|a| report.sweep.iter().any(|r| r.algorithm == *a))
            .collect();
        for a in &algs {
            s += &format!(" {} |", a.name());
        }
        s += "\n|---|---|---|";
        s += &"---|".repeat(algs.len());
        s.push('\n');
        let mut seen = Vec::new();
        for r in &report.sweep {
            let key = (r.sequence.as_str(), r.n_prev, r.n_next);
            if seen.contains(&key) {
                continue;
            }
            seen.push(key);
            s += &format!("| {} | {} | {} |", r.sequence, r.n_prev, r.n_next);
            for a in &algs {
                let cell = report.sweep.iter().find(|x| {
                    (x.sequence.as_str(), x.n_prev, x.n_next) == key && x.algorithm == *a
                });
                s += &match cell {
                    Some(x) => format!(" {} |", md_db(&x.psnr)),
                    None => " |".into(),
                };
            }
            s.push('\n');
        }
    }

    s += "\n## Timing\n\n| sequence | algorithm | blocks | failed | seconds |\n|---|---|---|---|---|\n";
    for c in &report.cells {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {:.2} |",
            c.sequence,
            c.algorithm.name(),
            c.blocks.len(),
            c.failed_blocks(),
            c.seconds
        );
    }
    if !report.warnings.is_empty() {
        s += "\n## Warnings\n\n";
        for w in &report.warnings {
            let _ = writeln!(s, "- {w}");
        }
    }
    s
}

/// Writes every report file into the configured output directory.
pub fn write_all(cfg: &ExperimentConfig, report: &ExperimentReport) -> Result<(), HarnessError> {
    let out = &cfg.output;
    write_atomic(&out.join("report.csv"), report_csv(report).as_bytes())?;
    write_atomic(&out.join("report.md"), report_markdown(report).as_bytes())?;
    write_atomic(&out.join("blocks.csv"), blocks_csv(report).as_bytes())?;
    write_atomic(&out.join("config.txt"), cfg.to_text().as_bytes())?;
    if !report.traces.is_empty() {
        write_atomic(&out.join("trace.csv"), trace_csv(report).as_bytes())?;
    }
    if !report.sweep.is_empty() {
        write_atomic(&out.join("frame_sweep.csv"), sweep_csv(report).as_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_lookup() {
        assert_eq!(published_psnr("foreman_cif", Algorithm::Mcfse), Some(35.53));
        assert_eq!(published_psnr("Vimto", Algorithm::Tr), Some(22.79));
        assert_eq!(published_psnr("synth-static", Algorithm::Tr), None);
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("plain"), "plain");
    }

    #[test]
    fn sweep_table_values_are_consistent() {
        let mc_22 = PUBLISHED_SWEEP_DB
            .iter()
            .find(|r| (r.0, r.1) == (2, 2))
            .unwrap()
            .3;
        assert_eq!(Some(mc_22), published_psnr("vimto", Algorithm::Mcfse));
    }
}
