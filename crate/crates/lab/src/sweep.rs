//! Multi-configuration runs over sample sizes and seeds.

use std::fmt::Write as _;
use std::path::Path;

use gnnlab_core::Mode;
use rayon::prelude::*;

use crate::experiment::{self, ExperimentSpec, RunError};
use crate::formats::{self, real};

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub seed: u64,
    pub final_dist_w: f64,
    pub final_dist_v: f64,
}

pub const SWEEP_HEADER: &str = "n,seed,final_dist_w,final_dist_v";

/// Copies `base` with the sample count replaced: nodes for NGNN, graphs
/// for GGNN.
pub fn with_samples(base: &ExperimentSpec, n: usize, seed: u64) -> ExperimentSpec {
    let mut spec = base.clone();
    match spec.mode {
        Mode::Ngnn => spec.n = n,
        Mode::Ggnn => spec.n_graphs = n,
    }
    spec.seed = seed;
    spec
}

/// Runs every `(n, seed)` pair on the current rayon pool. Rows come back
/// in list order, n-major. With `out` set, each trajectory is written to
/// `runs/n{n}_seed{seed}.csv` and the summary to `sweep.csv`.
pub fn sweep(base: &ExperimentSpec, ns: &[usize], seeds: &[u64], out: Option<&Path>) -> Result<Vec<SweepRow>, RunError> {
    let jobs: Vec<(usize, u64)> = ns.iter().flat_map(|&n| seeds.iter().map(move |&s| (n, s))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(n, seed)| {
            let result = experiment::run(&with_samples(base, n, seed))?;
            if let Some(dir) = out {
                let path = dir.join(format!("runs/n{n}_seed{seed}.csv"));
                formats::write_atomic(&path, formats::trajectory_csv(&result.outcome.trajectory).as_bytes())?;
            }
            let last = result.final_record();
            Ok(SweepRow {
                n,
                seed,
                final_dist_w: last.dist_w.unwrap_or(f64::NAN),
                final_dist_v: last.dist_v.unwrap_or(f64::NAN),
            })
        })
        .collect::<Result<Vec<_>, RunError>>()?;
    if let Some(dir) = out {
        formats::write_atomic(&dir.join("sweep.csv"), sweep_csv(&rows).as_bytes())?;
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.n, r.seed, real(r.final_dist_w), real(r.final_dist_v));
    }
    out
}

/// Median of `final_dist_v` for each n, in the order the n values first appear.
pub fn median_dist_v(rows: &[SweepRow]) -> Vec<(usize, f64)> {
    let mut ns: Vec<usize> = Vec::new();
    for r in rows {
        if !ns.contains(&r.n) {
            ns.push(r.n);
        }
    }
    ns.into_iter()
        .map(|n| {
            let mut v: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.final_dist_v).collect();
            (n, median(&mut v))
        })
        .collect()
}

pub fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Parses `a,b,c` or a half-open range `a..b`.
pub fn parse_list(s: &str) -> Result<Vec<u64>, String> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| format!("bad range start in {s:?}"))?;
        let b: u64 = b.trim().parse().map_err(|_| format!("bad range end in {s:?}"))?;
        return Ok((a..b).collect());
    }
    s.split(',').map(|x| x.trim().parse().map_err(|_| format!("bad list entry {x:?}"))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_and_ranges() {
        assert_eq!(parse_list("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_list("250, 1000,4000").unwrap(), vec![250, 1000, 4000]);
        assert!(parse_list("1,x").is_err());
    }

    #[test]
    fn medians() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        let rows: Vec<SweepRow> = [(10, 1.0), (10, 3.0), (20, 0.5)]
            .iter()
            .map(|&(n, v)| SweepRow { n, seed: 0, final_dist_w: 0.0, final_dist_v: v })
            .collect();
        assert_eq!(median_dist_v(&rows), vec![(10, 2.0), (20, 0.5)]);
    }

    #[test]
    fn cardinality_and_single_seed() {
        let mut base = ExperimentSpec::preset("ngnn-relu").unwrap();
        base.epochs = 3;
        base.xi = gnnlab_core::XiConfig::MonteCarlo { samples: 5 };
        let rows = sweep(&base, &[20, 40, 80], &[0, 1], None).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows.iter().map(|r| (r.n, r.seed)).collect::<Vec<_>>(), vec![(20, 0), (20, 1), (40, 0), (40, 1), (80, 0), (80, 1)]);
        let single = sweep(&base, &[40], &[1], None).unwrap();
        let direct = experiment::run(&with_samples(&base, 40, 1)).unwrap();
        assert_eq!(single[0].final_dist_v, direct.final_record().dist_v.unwrap());
    }
}
