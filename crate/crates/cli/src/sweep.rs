//! Parallel campaigns over grids of signal sizes.
//!
//! Each work item draws from its own ChaCha stream keyed by the item's
//! position in the grid, so results do not depend on the thread count.

use ambiglab::cones::{p_of, random_index_set, random_typed_pair};
use ambiglab::generators::{gen_coded_instance, gen_sparse_instance, Family};
use ambiglab::rng;
use ambiglab::verification::{probe_point, verify_instance, TrialOutcome, FD_STEP, SVD_TOL};
use ambiglab::{IndexSet, PairTypeKind};
use anyhow::{anyhow, bail};
use clap::ValueEnum;
use rayon::prelude::*;
use serde::Serialize;

pub const THREADS_ENV: &str = "AMBIGLAB_THREADS";
const VERIFY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Grid {
    Theorem2,
    Theorem3,
}

/// Inclusive range `a..b`, `a..=b`, or a single value.
pub fn parse_range(s: &str) -> anyhow::Result<(usize, usize)> {
    let s = s.trim();
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (a.trim().parse()?, b.trim().trim_start_matches('=').parse()?),
        None => {
            let v = s.parse()?;
            (v, v)
        }
    };
    if lo > hi {
        bail!("empty range {s:?}");
    }
    Ok((lo, hi))
}

#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub grid: &'static str,
    pub m: usize,
    pub n: usize,
    pub item: usize,
    pub type_x: String,
    pub type_y: String,
    pub lambda1: String,
    pub lambda2: String,
    pub p1: usize,
    pub p2: usize,
    pub claimed_dim: Option<usize>,
    pub verified: bool,
    pub conv_residual: String,
    pub probe_pre: Option<usize>,
    pub probe_post: Option<usize>,
    pub outcome: String,
}

struct Item {
    m: usize,
    n: usize,
    types: Option<(PairTypeKind, PairTypeKind)>,
    k: usize,
}

fn type_name(k: PairTypeKind) -> String {
    match k.t() {
        Some(t) => t.to_string(),
        None => "unclassified".into(),
    }
}

fn set_str(s: &IndexSet) -> String {
    s.iter().map(|j| j.to_string()).collect::<Vec<_>>().join(" ")
}

fn run_item(grid: Grid, item: &Item, seed: u64, key: u64) -> Row {
    let mut r = rng::stream(seed, key);
    let (m, n) = (item.m, item.n);
    let mut row = Row {
        grid: match grid {
            Grid::Theorem2 => "theorem2",
            Grid::Theorem3 => "theorem3",
        },
        m,
        n,
        item: item.k,
        type_x: "sparse".into(),
        type_y: "sparse".into(),
        lambda1: String::new(),
        lambda2: String::new(),
        p1: 0,
        p2: 0,
        claimed_dim: None,
        verified: false,
        conv_residual: String::new(),
        probe_pre: None,
        probe_post: None,
        outcome: String::new(),
    };
    let built = (|| -> anyhow::Result<_> {
        match item.types {
            None => {
                let l1 = random_index_set(3, m.checked_sub(2).ok_or_else(|| anyhow!("m too small"))?, 0.5, &mut r)?;
                let l2 = random_index_set(3, n.checked_sub(2).ok_or_else(|| anyhow!("n too small"))?, 0.5, &mut r)?;
                let inst = gen_sparse_instance(&l1, &l2, m, n, key)?;
                Ok((Family::sparse(l1.clone(), l2.clone(), m, n), l1, l2, inst))
            }
            Some((tx, ty)) => {
                let (l1, b) = random_typed_pair(tx, m, &mut r)?;
                let (l2, bp) = random_typed_pair(ty, n, &mut r)?;
                let inst = gen_coded_instance(&l1, &b, &l2, &bp, m, n, key)?;
                Ok((Family::coded(l1.clone(), b, l2.clone(), bp, m, n), l1, l2, inst))
            }
        }
    })();
    if let Some((tx, ty)) = item.types {
        row.type_x = type_name(tx);
        row.type_y = type_name(ty);
    }
    let (family, l1, l2, inst) = match built {
        Ok(v) => v,
        Err(e) => {
            row.outcome = format!("error: {e}");
            return row;
        }
    };
    row.lambda1 = set_str(&l1);
    row.lambda2 = set_str(&l2);
    row.p1 = p_of(&l1);
    row.p2 = p_of(&l2);
    row.claimed_dim = Some(inst.claimed_dim);
    match verify_instance(&inst, VERIFY_TOL) {
        Ok(rep) => {
            row.verified = rep.pass;
            row.conv_residual = format!("{:.16e}", rep.conv_residual);
        }
        Err(e) => row.outcome = format!("error: {e}"),
    }
    let probe = family.plan().and_then(|plan| {
        let point = plan.sample_point(&mut r)?;
        Ok((probe_point(&plan, &point, FD_STEP, SVD_TOL)?, plan.claim_is_lower_bound()))
    });
    match probe {
        Ok((TrialOutcome::Measured { pre, post }, lower)) => {
            row.probe_pre = Some(pre);
            row.probe_post = Some(post);
            let ok = if lower { post >= inst.claimed_dim } else { post == inst.claimed_dim };
            if row.outcome.is_empty() {
                row.outcome = if ok { "agree" } else { "disagree" }.into();
            }
        }
        Ok((TrialOutcome::Inconclusive, _)) => {
            if row.outcome.is_empty() {
                row.outcome = "inconclusive".into();
            }
        }
        Err(e) => {
            if row.outcome.is_empty() {
                row.outcome = format!("error: {e}");
            }
        }
    }
    row
}

pub fn run(m: (usize, usize), n: (usize, usize), grid: Grid, trials: usize, seed: u64) -> anyhow::Result<Vec<Row>> {
    let kinds = [PairTypeKind::Type0, PairTypeKind::Type1, PairTypeKind::Type2];
    let mut items = Vec::new();
    for mm in m.0..=m.1 {
        for nn in n.0..=n.1 {
            match grid {
                Grid::Theorem2 => {
                    for k in 0..trials {
                        items.push(Item { m: mm, n: nn, types: None, k });
                    }
                }
                Grid::Theorem3 => {
                    for &tx in &kinds {
                        for &ty in &kinds {
                            for k in 0..trials {
                                items.push(Item { m: mm, n: nn, types: Some((tx, ty)), k });
                            }
                        }
                    }
                }
            }
        }
    }
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse::<usize>().map_err(|e| anyhow!("{THREADS_ENV}={v:?}: {e}"))?,
        Err(_) => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let mut rows: Vec<(usize, Row)> = pool.install(|| {
        items
            .par_iter()
            .enumerate()
            .map(|(key, item)| (key, run_item(grid, item, seed, key as u64)))
            .collect()
    });
    rows.sort_by_key(|(key, _)| *key);
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

pub fn to_csv(rows: &[Row]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| anyhow!("{e}"))?)?)
}
