//! Per-cluster quota allocation. Cluster weights follow the square root of
//! cluster size; a Dirichlet draw around those weights (concentration `tau`)
//! perturbs the proportions, largest-remainder apportionment turns them into
//! integers, and clamped mass is redistributed until the budget is spent or
//! every cluster is saturated. `tau = inf` short-circuits to the deterministic
//! weight vector itself.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeds;
use crate::variates;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("allocation needs at least one cluster")]
    Empty,
    #[error("cap vector has {caps} entries for {clusters} clusters")]
    CapMismatch { caps: usize, clusters: usize },
    #[error("dirichlet concentration must be positive, got {tau}")]
    InvalidTau { tau: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AllocationPlan {
    /// Final per-cluster counts. Sums to min(budget, total capacity).
    pub counts: Vec<usize>,
    /// False when the capped supply cannot reach the budget; counts then
    /// equal the effective caps.
    pub feasible: bool,
    pub audit: AllocationAudit,
}

/// Every intermediate quantity of one allocation, for reproducibility
/// reviews.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AllocationAudit {
    pub budget: usize,
    pub sizes: Vec<usize>,
    /// Effective caps: min(configured cap, cluster size).
    pub caps: Vec<usize>,
    /// None encodes an infinite concentration (no sampling).
    pub tau: Option<f64>,
    pub seed: u64,
    /// Normalized sqrt-size weights.
    pub weights: Vec<f64>,
    /// Sampled (or deterministic) proportion vector.
    pub proportions: Vec<f64>,
    /// Largest-remainder apportionment before any cap was applied.
    pub provisional: Vec<usize>,
    pub rounds: Vec<RedistributionRound>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RedistributionRound {
    /// Unplaced mass at the start of the round.
    pub residual: usize,
    /// Clusters that still had headroom, ascending.
    pub eligible: Vec<usize>,
    /// Apportioned grants per eligible cluster, before re-clamping.
    pub granted: Vec<usize>,
}

/// Allocates `budget` slots across clusters of the given sizes.
pub fn allocate_sqrt(
    sizes: &[usize],
    caps: &[usize],
    budget: usize,
    tau: f64,
    seed: u64,
) -> Result<AllocationPlan, PlanError> {
    if sizes.is_empty() {
        return Err(PlanError::Empty);
    }
    if caps.len() != sizes.len() {
        return Err(PlanError::CapMismatch { caps: caps.len(), clusters: sizes.len() });
    }
    if !(tau > 0.0) {
        return Err(PlanError::InvalidTau { tau });
    }
    let k = sizes.len();
    let eff_caps: Vec<usize> = sizes.iter().zip(caps).map(|(&s, &c)| s.min(c)).collect();
    let supply: usize = eff_caps.iter().sum();

    let raw: Vec<f64> = sizes.iter().map(|&s| (s as f64).sqrt()).collect();
    let raw_total: f64 = raw.iter().sum();
    let weights: Vec<f64> = if raw_total > 0.0 {
        raw.iter().map(|w| w / raw_total).collect()
    } else {
        vec![1.0 / k as f64; k]
    };

    let proportions = if tau.is_infinite() {
        weights.clone()
    } else {
        sample_proportions(&weights, tau, seed)
    };

    let mut audit = AllocationAudit {
        budget,
        sizes: sizes.to_vec(),
        caps: eff_caps.clone(),
        tau: tau.is_finite().then_some(tau),
        seed,
        weights,
        proportions: proportions.clone(),
        provisional: Vec::new(),
        rounds: Vec::new(),
    };

    if supply < budget {
        audit.provisional = eff_caps.clone();
        return Ok(AllocationPlan { counts: eff_caps, feasible: false, audit });
    }

    let provisional = largest_remainder(&proportions, budget);
    audit.provisional = provisional.clone();

    let mut counts: Vec<usize> =
        provisional.iter().zip(&eff_caps).map(|(&p, &c)| p.min(c)).collect();
    let mut residual = budget - counts.iter().sum::<usize>();

    while residual > 0 {
        let eligible: Vec<usize> = (0..k).filter(|&c| counts[c] < eff_caps[c]).collect();
        debug_assert!(!eligible.is_empty(), "supply >= budget leaves headroom");
        if eligible.is_empty() {
            break;
        }
        let mass: Vec<f64> = eligible.iter().map(|&c| proportions[c]).collect();
        let mass_total: f64 = mass.iter().sum();
        let share: Vec<f64> = if mass_total > 0.0 {
            mass.iter().map(|m| m / mass_total).collect()
        } else {
            vec![1.0 / eligible.len() as f64; eligible.len()]
        };
        let granted = largest_remainder(&share, residual);
        for (slot, &c) in eligible.iter().enumerate() {
            counts[c] += granted[slot].min(eff_caps[c] - counts[c]);
        }
        audit.rounds.push(RedistributionRound { residual, eligible, granted });
        residual = budget - counts.iter().sum::<usize>();
    }

    debug_assert_eq!(counts.iter().sum::<usize>(), budget.min(supply));
    Ok(AllocationPlan { counts, feasible: true, audit })
}

fn sample_proportions(weights: &[f64], tau: f64, seed: u64) -> Vec<f64> {
    let mut rng = seeds::rng(seed, "allocate", 0);
    // Zero-weight clusters (empty clusters under a fractional cap pipeline)
    // take no part in the draw and stay at proportion zero.
    let positive: Vec<usize> =
        (0..weights.len()).filter(|&c| weights[c] > 0.0).collect();
    let alphas: Vec<f64> = positive.iter().map(|&c| tau * weights[c]).collect();
    let mut proportions = vec![0.0; weights.len()];
    if positive.is_empty() {
        return proportions;
    }
    let draw = variates::dirichlet(&mut rng, &alphas);
    for (slot, &c) in positive.iter().enumerate() {
        proportions[c] = draw[slot];
    }
    proportions
}

/// Integer apportionment of `total` by the given proportions: floors first,
/// then one extra unit per largest fractional part (ties to the lower index).
pub fn largest_remainder(proportions: &[f64], total: usize) -> Vec<usize> {
    if proportions.is_empty() {
        return Vec::new();
    }
    let t = total as f64;
    let quotas: Vec<f64> = proportions.iter().map(|p| p * t).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut leftover = total.saturating_sub(assigned);
    let mut by_frac: Vec<usize> = (0..proportions.len()).collect();
    by_frac.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &idx in by_frac.iter().cycle() {
        if leftover == 0 {
            break;
        }
        counts[idx] += 1;
        leftover -= 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn sqrt_weights_split_a_two_cluster_budget() {
        // sqrt weights 10:20 over a budget of 30.
        let plan = allocate_sqrt(&[100, 400], &[1000, 1000], 30, f64::INFINITY, 0).unwrap();
        assert_eq!(plan.counts, vec![10, 20]);
        assert!(plan.feasible);
        assert!(plan.audit.rounds.is_empty());
        assert_eq!(plan.audit.tau, None);
        assert_eq!(plan.audit.provisional, vec![10, 20]);
    }

    #[test]
    fn clamped_mass_moves_to_clusters_with_headroom() {
        let plan = allocate_sqrt(&[100, 400], &[5, 1000], 30, f64::INFINITY, 0).unwrap();
        assert_eq!(plan.counts, vec![5, 25]);
        assert!(plan.feasible);
        assert_eq!(plan.audit.rounds.len(), 1);
        assert_eq!(plan.audit.rounds[0].residual, 5);
        assert_eq!(plan.audit.rounds[0].eligible, vec![1]);
    }

    #[test]
    fn infeasible_budget_returns_caps_and_flags_it() {
        let plan = allocate_sqrt(&[10, 10], &[4, 3], 100, f64::INFINITY, 0).unwrap();
        assert!(!plan.feasible);
        assert_eq!(plan.counts, vec![4, 3]);
        assert_eq!(plan.counts.iter().sum::<usize>(), 7);
    }

    #[test]
    fn zero_budget_allocates_nothing() {
        let plan = allocate_sqrt(&[50, 60], &[50, 60], 0, 4.0, 11).unwrap();
        assert_eq!(plan.counts, vec![0, 0]);
        assert!(plan.feasible);
    }

    #[test]
    fn empty_clusters_receive_nothing() {
        let plan = allocate_sqrt(&[0, 100, 0], &[10, 10, 10], 10, 2.5, 3).unwrap();
        assert_eq!(plan.counts[0], 0);
        assert_eq!(plan.counts[2], 0);
        assert_eq!(plan.counts[1], 10);
    }

    #[test]
    fn caps_never_exceed_cluster_size() {
        let plan = allocate_sqrt(&[3, 100], &[50, 50], 40, f64::INFINITY, 0).unwrap();
        assert_eq!(plan.audit.caps, vec![3, 50]);
        assert!(plan.counts[0] <= 3);
        assert_eq!(plan.counts.iter().sum::<usize>(), 40);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(matches!(allocate_sqrt(&[], &[], 5, 1.0, 0), Err(PlanError::Empty)));
        assert!(matches!(
            allocate_sqrt(&[1, 2], &[1], 5, 1.0, 0),
            Err(PlanError::CapMismatch { .. })
        ));
        assert!(matches!(
            allocate_sqrt(&[1], &[1], 5, 0.0, 0),
            Err(PlanError::InvalidTau { .. })
        ));
        assert!(matches!(
            allocate_sqrt(&[1], &[1], 5, f64::NAN, 0),
            Err(PlanError::InvalidTau { .. })
        ));
    }

    #[test]
    fn randomized_plans_satisfy_the_budget_and_cap_invariants() {
        let mut rng = crate::seeds::rng(17, "plan-test", 0);
        for trial in 0..300u64 {
            let k = rng.gen_range(1..=8);
            let sizes: Vec<usize> = (0..k).map(|_| rng.gen_range(0..50)).collect();
            let caps: Vec<usize> = (0..k).map(|_| rng.gen_range(0..40)).collect();
            let budget = rng.gen_range(0..200);
            let tau = [0.5, 5.0, f64::INFINITY][rng.gen_range(0..3)];
            let plan = allocate_sqrt(&sizes, &caps, budget, tau, trial).unwrap();
            let supply: usize = sizes.iter().zip(&caps).map(|(&s, &c)| s.min(c)).sum();
            assert_eq!(
                plan.counts.iter().sum::<usize>(),
                budget.min(supply),
                "trial {trial}"
            );
            assert_eq!(plan.feasible, budget <= supply, "trial {trial}");
            for c in 0..k {
                assert!(plan.counts[c] <= sizes[c].min(caps[c]), "trial {trial} cluster {c}");
            }
            let again = allocate_sqrt(&sizes, &caps, budget, tau, trial).unwrap();
            assert_eq!(plan.counts, again.counts, "trial {trial} not deterministic");
        }
    }

    #[test]
    fn concentration_tightens_proportions_around_the_weights() {
        let sizes = [100usize, 200, 300, 400];
        let caps = [1000usize; 4];
        let mut deviation = Vec::new();
        for &tau in &[10.0, 1e3, 1e6] {
            let mut total = 0.0;
            for seed in 0..300u64 {
                let plan = allocate_sqrt(&sizes, &caps, 100, tau, seed).unwrap();
                total += plan
                    .audit
                    .proportions
                    .iter()
                    .zip(&plan.audit.weights)
                    .map(|(p, w)| (p - w).abs())
                    .sum::<f64>();
            }
            deviation.push(total / 300.0);
        }
        assert!(
            deviation[0] > deviation[1] && deviation[1] > deviation[2],
            "mean L1 deviation should shrink as tau grows: {deviation:?}"
        );
        let exact = allocate_sqrt(&sizes, &caps, 100, f64::INFINITY, 0).unwrap();
        assert_eq!(exact.audit.proportions, exact.audit.weights);
    }

    #[test]
    fn largest_remainder_hits_the_total_and_breaks_ties_low() {
        assert_eq!(largest_remainder(&[0.5, 0.5], 3), vec![2, 1]);
        assert_eq!(largest_remainder(&[1.0 / 3.0; 3], 10), vec![4, 3, 3]);
        assert_eq!(largest_remainder(&[0.0, 1.0], 7), vec![0, 7]);
        let mut rng = crate::seeds::rng(23, "plan-test", 1);
        for _ in 0..200 {
            let k = rng.gen_range(1..10);
            let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let props: Vec<f64> = if total > 0.0 {
                raw.iter().map(|r| r / total).collect()
            } else {
                vec![1.0 / k as f64; k]
            };
            let n = rng.gen_range(0..500);
            let counts = largest_remainder(&props, n);
            assert_eq!(counts.iter().sum::<usize>(), n);
            for (c, p) in counts.iter().zip(&props) {
                // Never more than one unit above the exact quota.
                assert!((*c as f64) <= p * n as f64 + 1.0 + 1e-9);
            }
        }
    }
}
