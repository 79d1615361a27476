//! Record selection stages: per-cluster sampling against an allocation,
//! category balancing, controlled-ratio mixing, and the budgeted final
//! assembly. Every stage preserves input record order and is deterministic
//! in its seed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{self, Dataset};
use crate::plan::largest_remainder;
use crate::seeds;
use crate::ClusterModel;

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("plan has {counts} counts for {clusters} clusters")]
    PlanMismatch { clusters: usize, counts: usize },
    #[error("cluster {cluster}: plan wants {want} records but only {have} exist")]
    CountExceedsCluster { cluster: usize, want: usize, have: usize },
    #[error("cluster model was fit on different records than this dataset")]
    IdMismatch,
    #[error("mixture needs at least one component")]
    EmptyMixture,
    #[error("mixture ratio {ratio} for component {index} is not usable")]
    RatioInvalid { index: usize, ratio: f64 },
    #[error(
        "record id \"{id}\" appears in mixture components {first} and {second}; \
         components must not share ids"
    )]
    DuplicateId { id: String, first: usize, second: usize },
}

/// Draws `counts[c]` records uniformly from each cluster of `model`. The
/// model must have been fit on exactly this dataset (same ids, same order).
/// Output keeps dataset order.
pub fn sample_plan(
    ds: &Dataset,
    model: &ClusterModel,
    counts: &[usize],
    seed: u64,
) -> Result<Dataset, SelectError> {
    if counts.len() != model.k {
        return Err(SelectError::PlanMismatch { clusters: model.k, counts: counts.len() });
    }
    if model.ids.len() != ds.len()
        || model.ids.iter().zip(ds.ids()).any(|(a, b)| a != b)
    {
        return Err(SelectError::IdMismatch);
    }

    let mut keep = Vec::new();
    for c in 0..model.k {
        let members = model.members(c);
        if counts[c] > members.len() {
            return Err(SelectError::CountExceedsCluster {
                cluster: c,
                want: counts[c],
                have: members.len(),
            });
        }
        let mut rng = seeds::rng(seed, "cluster", c as u64);
        for pick in seeds::sample_indices(&mut rng, members.len(), counts[c]) {
            keep.push(members[pick]);
        }
    }
    keep.sort_unstable();
    Ok(ds.derived(keep.iter().map(|&i| ds.records[i].clone()).collect()))
}

#[derive(Debug, Clone, Copy)]
pub enum BalanceMode {
    /// Split `total` as evenly as the category sizes allow (waterfill;
    /// leftovers go to the lexicographically earliest categories).
    Uniform { total: usize },
    /// Keep at most `cap` records per category.
    Capped { cap: usize },
}

#[derive(Debug, Clone)]
pub struct BalanceResult {
    pub dataset: Dataset,
    /// Category label -> number of records kept, ordered by label.
    /// Records without a category balance under the empty label.
    pub kept: BTreeMap<String, usize>,
}

/// Rebalances the category distribution by uniform downsampling within each
/// category. Output keeps dataset order.
pub fn balance_categories(ds: &Dataset, mode: BalanceMode, seed: u64) -> BalanceResult {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in ds.records.iter().enumerate() {
        groups.entry(r.category.clone().unwrap_or_default()).or_default().push(i);
    }
    let labels: Vec<&String> = groups.keys().collect();
    let sizes: Vec<usize> = groups.values().map(Vec::len).collect();
    let quotas = match mode {
        BalanceMode::Uniform { total } => waterfill(&sizes, total),
        BalanceMode::Capped { cap } => sizes.iter().map(|&s| s.min(cap)).collect(),
    };

    let mut keep = Vec::new();
    let mut kept = BTreeMap::new();
    for (slot, (label, members)) in groups.iter().enumerate() {
        let mut rng = seeds::rng(seed, "balance", slot as u64);
        for pick in seeds::sample_indices(&mut rng, members.len(), quotas[slot]) {
            keep.push(members[pick]);
        }
        kept.insert(label.clone(), quotas[slot]);
    }
    debug_assert_eq!(labels.len(), quotas.len());
    keep.sort_unstable();
    BalanceResult {
        dataset: ds.derived(keep.iter().map(|&i| ds.records[i].clone()).collect()),
        kept,
    }
}

/// Evens `total` units across groups of the given sizes: repeated equal
/// division over the groups that still have room, remainders to the earliest
/// groups.
fn waterfill(sizes: &[usize], total: usize) -> Vec<usize> {
    let supply: usize = sizes.iter().sum();
    let mut out = vec![0usize; sizes.len()];
    let mut remaining = total.min(supply);
    while remaining > 0 {
        let open: Vec<usize> = (0..sizes.len()).filter(|&i| out[i] < sizes[i]).collect();
        let share = remaining / open.len();
        let extra = remaining % open.len();
        if share == 0 {
            for &i in open.iter().take(extra) {
                out[i] += 1;
            }
            break;
        }
        for (rank, &i) in open.iter().enumerate() {
            let want = share + usize::from(rank < extra);
            out[i] += want.min(sizes[i] - out[i]);
        }
        remaining = total.min(supply) - out.iter().sum::<usize>();
    }
    out
}

#[derive(Debug, Clone)]
pub struct MixResult {
    /// Components concatenated in order, each sampled down to its quota.
    pub dataset: Dataset,
    /// Integer quotas implied by the ratios.
    pub quotas: Vec<usize>,
    /// What each component actually contributed (quota clamped to size).
    pub taken: Vec<usize>,
    /// False when a component could not fill its quota; the exact ratio was
    /// not reachable and no mass was moved between components to hide that.
    pub feasible: bool,
}

/// Assembles a mixture of datasets at the given ratios, `total` records in
/// all. Components must not share record ids. Each record is tagged with the
/// index of its component under the `mix_source` meta key.
pub fn mix(parts: &[(Dataset, f64)], total: usize, seed: u64) -> Result<MixResult, SelectError> {
    if parts.is_empty() {
        return Err(SelectError::EmptyMixture);
    }
    for (index, (_, ratio)) in parts.iter().enumerate() {
        if !ratio.is_finite() || *ratio < 0.0 {
            return Err(SelectError::RatioInvalid { index, ratio: *ratio });
        }
    }
    let ratio_sum: f64 = parts.iter().map(|(_, r)| r).sum();
    if ratio_sum <= 0.0 {
        return Err(SelectError::RatioInvalid { index: 0, ratio: 0.0 });
    }
    // Components must come from disjoint id namespaces, or the mixture could
    // not be written out and read back as one dataset.
    let mut owner: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
    for (i, (ds, _)) in parts.iter().enumerate() {
        for r in &ds.records {
            if let Some(&first) = owner.get(r.id.as_str()) {
                return Err(SelectError::DuplicateId { id: r.id.clone(), first, second: i });
            }
            owner.insert(&r.id, i);
        }
    }

    let proportions: Vec<f64> = parts.iter().map(|(_, r)| r / ratio_sum).collect();
    let quotas = largest_remainder(&proportions, total);

    let mut records = Vec::new();
    let mut taken = Vec::with_capacity(parts.len());
    let mut provenance = Vec::new();
    for (i, ((ds, _), &quota)) in parts.iter().zip(&quotas).enumerate() {
        let take = quota.min(ds.len());
        let mut rng = seeds::rng(seed, "mix", i as u64);
        for pick in seeds::sample_indices(&mut rng, ds.len(), take) {
            let mut r = ds.records[pick].clone();
            r.meta.insert("mix_source".into(), i.to_string());
            records.push(r);
        }
        taken.push(take);
        provenance.extend(ds.provenance.iter().cloned());
    }
    let feasible = taken == quotas;
    Ok(MixResult { dataset: Dataset { records, provenance }, quotas, taken, feasible })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssembleAudit {
    pub input: usize,
    pub after_dedup: usize,
    pub after_length: usize,
    pub after_budget: usize,
    pub budget: usize,
    pub length_limit: usize,
    pub seed: u64,
    /// Whether the budget actually truncated the pool.
    pub sampled: bool,
}

#[derive(Debug, Clone)]
pub struct AssembleResult {
    pub dataset: Dataset,
    pub audit: AssembleAudit,
}

/// Final assembly: dedup, length filter, then uniform downsampling to the
/// budget. Output keeps dataset order.
pub fn assemble(ds: &Dataset, budget: usize, length_limit: usize, seed: u64) -> AssembleResult {
    let input = ds.len();
    let deduped = dataset::dedup(ds);
    let after_dedup = deduped.len();
    let trimmed = dataset::length_filter(&deduped, length_limit);
    let after_length = trimmed.len();

    let sampled = budget < after_length;
    let dataset = if sampled {
        let mut rng = seeds::rng(seed, "assemble", 0);
        let keep = seeds::sample_indices(&mut rng, after_length, budget);
        trimmed.derived(keep.iter().map(|&i| trimmed.records[i].clone()).collect())
    } else {
        trimmed
    };

    AssembleResult {
        audit: AssembleAudit {
            input,
            after_dedup,
            after_length,
            after_budget: dataset.len(),
            budget,
            length_limit,
            seed,
            sampled,
        },
        dataset,
    }
}
