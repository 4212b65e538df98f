//! Subdata selection: extreme-value selection with sequential exclusion,
//! plus the uniform-random and full-data baselines.
//!
//! The extreme-value selector scans one covariate at a time and keeps the r
//! smallest and r largest remaining rows, r = k/(2p). Per-column extremes are
//! found by rank selection (`select_nth_unstable_by`, O(N)) rather than a
//! full sort; a sort-based reference with identical tie-breaking is kept for
//! testing and as a timing baseline.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::RngSpec;
use serde::{Deserialize, Serialize};

/// How a subdata set was chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Iboss,
    Random,
    Full,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Iboss => write!(f, "iboss"),
            Method::Random => write!(f, "random"),
            Method::Full => write!(f, "full"),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "iboss" => Ok(Method::Iboss),
            "random" => Ok(Method::Random),
            "full" => Ok(Method::Full),
            other => Err(format!("unknown method `{other}` (iboss, random, full)")),
        }
    }
}

/// Validated plan for an extreme-value selection: subdata size k and
/// per-tail count r = k/(2p), which must be a positive integer.
#[derive(Clone, Copy, Debug)]
pub struct SelectionPlan {
    pub k: usize,
    pub r: usize,
}

impl SelectionPlan {
    pub fn new(k: usize, p: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::ZeroSubdata);
        }
        if !k.is_multiple_of(2 * p) {
            return Err(Error::PerTailNotInteger { k, p });
        }
        if k < 2 * p {
            return Err(Error::SubdataTooSmall { k, min: 2 * p });
        }
        Ok(Self { k, r: k / (2 * p) })
    }
}

/// Indices of the chosen rows, strictly increasing, with method provenance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method: Method,
    pub k: usize,
    pub indices: Vec<usize>,
}

impl SelectionResult {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }
}

// Ascending by value, ties broken toward the smaller row index.
#[inline]
fn cmp_asc(a: &(f64, u32), b: &(f64, u32)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

// Descending by value, ties broken toward the smaller row index.
#[inline]
fn cmp_desc(a: &(f64, u32), b: &(f64, u32)) -> std::cmp::Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// Extreme-value subdata selection with sequential exclusion.
///
/// For covariate 1 the r smallest and r largest rows are taken; for each
/// subsequent covariate the same among rows not already selected. Ties at a
/// selection boundary prefer the smaller row index, which makes the result
/// deterministic even on data with duplicated values.
pub fn select_iboss(data: &Dataset, plan: &SelectionPlan) -> Result<SelectionResult> {
    let (n, p, r) = (data.n(), data.p(), plan.r);
    if n < plan.k {
        return Err(Error::SubdataExceedsData { k: plan.k, n });
    }
    let mut taken = vec![false; n];
    let mut chosen: Vec<usize> = Vec::with_capacity(plan.k);
    let mut pool: Vec<(f64, u32)> = Vec::with_capacity(n);
    for j in 0..p {
        pool.clear();
        for (i, flag) in taken.iter().enumerate() {
            if !flag {
                pool.push((data.z(i, j), i as u32));
            }
        }
        debug_assert!(pool.len() >= 2 * r);
        pool.select_nth_unstable_by(r - 1, cmp_asc);
        for &(_, i) in &pool[..r] {
            taken[i as usize] = true;
            chosen.push(i as usize);
        }
        let rest = &mut pool[r..];
        rest.select_nth_unstable_by(r - 1, cmp_desc);
        for &(_, i) in &rest[..r] {
            taken[i as usize] = true;
            chosen.push(i as usize);
        }
    }
    chosen.sort_unstable();
    Ok(SelectionResult {
        method: Method::Iboss,
        k: plan.k,
        indices: chosen,
    })
}

/// Sort-based reference for [`select_iboss`]: fully sorts each column and
/// applies the exclusion literally, with the same tie-breaking. O(N log N)
/// per covariate; used as the correctness oracle and the timing baseline.
pub fn select_iboss_full_sort(data: &Dataset, plan: &SelectionPlan) -> Result<SelectionResult> {
    let (n, p, r) = (data.n(), data.p(), plan.r);
    if n < plan.k {
        return Err(Error::SubdataExceedsData { k: plan.k, n });
    }
    let mut taken = vec![false; n];
    let mut chosen: Vec<usize> = Vec::with_capacity(plan.k);
    for j in 0..p {
        let mut column: Vec<(f64, u32)> = (0..n)
            .filter(|&i| !taken[i])
            .map(|i| (data.z(i, j), i as u32))
            .collect();
        column.sort_unstable_by(cmp_asc);
        for &(_, i) in &column[..r] {
            taken[i as usize] = true;
            chosen.push(i as usize);
        }
        let mut rest: Vec<(f64, u32)> = column[r..].to_vec();
        rest.sort_unstable_by(cmp_desc);
        for &(_, i) in &rest[..r] {
            taken[i as usize] = true;
            chosen.push(i as usize);
        }
    }
    chosen.sort_unstable();
    Ok(SelectionResult {
        method: Method::Iboss,
        k: plan.k,
        indices: chosen,
    })
}

/// Draw k distinct row indices uniformly without replacement.
pub fn select_random(data: &Dataset, k: usize, rng: RngSpec) -> Result<SelectionResult> {
    if k == 0 {
        return Err(Error::ZeroSubdata);
    }
    if k > data.n() {
        return Err(Error::SubdataExceedsData { k, n: data.n() });
    }
    let mut r = rng.rng();
    let mut indices = rand::seq::index::sample(&mut r, data.n(), k).into_vec();
    indices.sort_unstable();
    Ok(SelectionResult {
        method: Method::Random,
        k,
        indices,
    })
}

/// The trivial full-data "selection": every row.
pub fn select_full(data: &Dataset) -> SelectionResult {
    SelectionResult {
        method: Method::Full,
        k: data.n(),
        indices: (0..data.n()).collect(),
    }
}
