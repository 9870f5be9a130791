use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{contract, PressureError, Result};
use crate::scalar::log_sum_exp;

/// Largest pool the exhaustive solver accepts.
pub const EXACT_LIMIT: usize = 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverMode {
    Greedy,
    Exact,
}

impl fmt::Display for CoverMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoverMode::Greedy => "greedy",
            CoverMode::Exact => "exact",
        })
    }
}

impl FromStr for CoverMode {
    type Err = PressureError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(CoverMode::Greedy),
            "exact" => Ok(CoverMode::Exact),
            other => Err(contract(format!("unknown cover mode '{other}'"))),
        }
    }
}

/// Weighted partial set cover: pick sets whose union carries mass above
/// `target`, minimizing `sum exp(log_weights)`.
#[derive(Debug, Clone, Copy)]
pub struct CoverProblem<'a> {
    pub masses: &'a [f64],
    /// Member element indices of each set.
    pub sets: &'a [Vec<u32>],
    pub log_weights: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverPick {
    /// Chosen set indices, in selection order.
    pub chosen: Vec<usize>,
    pub log_weight: f64,
    pub covered: f64,
}

impl<'a> CoverProblem<'a> {
    pub fn new(masses: &'a [f64], sets: &'a [Vec<u32>], log_weights: &'a [f64]) -> Result<Self> {
        if sets.len() != log_weights.len() {
            return Err(contract("one log-weight per set required"));
        }
        if sets.iter().flatten().any(|&e| e as usize >= masses.len()) {
            return Err(contract("set member outside the element range"));
        }
        Ok(CoverProblem {
            masses,
            sets,
            log_weights,
        })
    }

    /// Mass of the union of `chosen`.
    pub fn covered_by(&self, chosen: &[usize]) -> f64 {
        let mut hit = vec![false; self.masses.len()];
        let mut m = 0.0;
        for &c in chosen {
            for &e in &self.sets[c] {
                if !hit[e as usize] {
                    hit[e as usize] = true;
                    m += self.masses[e as usize];
                }
            }
        }
        m
    }

    pub fn log_weight_of(&self, chosen: &[usize]) -> f64 {
        let lw: Vec<f64> = chosen.iter().map(|&c| self.log_weights[c]).collect();
        log_sum_exp(&lw)
    }

    fn infeasible(&self, target: f64) -> Option<PressureError> {
        let all: Vec<usize> = (0..self.sets.len()).collect();
        let max_mass = self.covered_by(&all);
        if max_mass > target {
            None
        } else {
            Some(PressureError::InfeasibleCover {
                max_mass,
                required: target,
            })
        }
    }

    pub fn solve(&self, target: f64, mode: CoverMode) -> Result<CoverPick> {
        if let Some(e) = self.infeasible(target) {
            return Err(e);
        }
        match mode {
            CoverMode::Greedy => Ok(self.greedy(target)),
            CoverMode::Exact => self.exact(target),
        }
    }

    /// Repeatedly takes the set with the largest `new mass / weight`; ties go to
    /// the lighter set, then to the lower index. Lazy evaluation is exact here
    /// because gains only shrink.
    fn greedy(&self, target: f64) -> CoverPick {
        let mut hit = vec![false; self.masses.len()];
        let gain = |c: usize, hit: &[bool]| -> f64 {
            self.sets[c]
                .iter()
                .filter(|&&e| !hit[e as usize])
                .map(|&e| self.masses[e as usize])
                .sum()
        };
        let mut heap: BinaryHeap<Entry> = (0..self.sets.len())
            .filter_map(|c| {
                let g = gain(c, &hit);
                (g > 0.0).then(|| Entry::new(g, self.log_weights[c], c))
            })
            .collect();
        let mut chosen = Vec::new();
        let mut covered = 0.0;
        while covered <= target {
            let Some(top) = heap.pop() else { break };
            let g = gain(top.index, &hit);
            if g <= 0.0 {
                continue;
            }
            let fresh = Entry::new(g, top.log_weight, top.index);
            if let Some(next) = heap.peek() {
                if fresh < *next {
                    heap.push(fresh);
                    continue;
                }
            }
            for &e in &self.sets[top.index] {
                if !hit[e as usize] {
                    hit[e as usize] = true;
                    covered += self.masses[e as usize];
                }
            }
            chosen.push(top.index);
        }
        CoverPick {
            log_weight: self.log_weight_of(&chosen),
            chosen,
            covered,
        }
    }

    /// Exhaustive search over all subsets; ties keep the earliest subset in
    /// binary counting order.
    fn exact(&self, target: f64) -> Result<CoverPick> {
        let k = self.sets.len();
        if k > EXACT_LIMIT {
            return Err(contract(format!(
                "exact cover limited to {EXACT_LIMIT} candidates, got {k}"
            )));
        }
        let words = self.masses.len().div_ceil(64);
        let bits: Vec<Vec<u64>> = self
            .sets
            .iter()
            .map(|s| {
                let mut b = vec![0u64; words];
                for &e in s {
                    b[e as usize / 64] |= 1 << (e % 64);
                }
                b
            })
            .collect();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut union = vec![0u64; words];
        let mut lw = Vec::with_capacity(k);
        for mask in 1usize..(1 << k) {
            lw.clear();
            lw.extend((0..k).filter(|i| mask >> i & 1 == 1).map(|i| self.log_weights[i]));
            let w = log_sum_exp(&lw);
            if let Some((bw, _, _)) = best {
                if !(w < bw) {
                    continue;
                }
            }
            union.iter_mut().for_each(|u| *u = 0);
            for i in (0..k).filter(|i| mask >> i & 1 == 1) {
                for (u, b) in union.iter_mut().zip(&bits[i]) {
                    *u |= b;
                }
            }
            let mut m = 0.0;
            for (wi, &u) in union.iter().enumerate() {
                let mut u = u;
                while u != 0 {
                    let b = u.trailing_zeros() as usize;
                    m += self.masses[wi * 64 + b];
                    u &= u - 1;
                }
            }
            if m > target {
                best = Some((w, mask, m));
            }
        }
        let (w, mask, m) = best.expect("feasibility checked");
        Ok(CoverPick {
            chosen: (0..k).filter(|i| mask >> i & 1 == 1).collect(),
            log_weight: w,
            covered: m,
        })
    }
}

/// Heap entry ordered by key (larger first), then lighter weight, then lower index.
#[derive(Debug, Clone, Copy)]
struct Entry {
    key: f64,
    log_weight: f64,
    index: usize,
}

impl Entry {
    fn new(gain: f64, log_weight: f64, index: usize) -> Self {
        Entry {
            key: gain.ln() - log_weight,
            log_weight,
            index,
        }
    }
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key
            .total_cmp(&other.key)
            .then_with(|| other.log_weight.total_cmp(&self.log_weight))
            .then_with(|| other.index.cmp(&self.index))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn greedy_prefers_ratio_then_weight_then_index() {
        let masses = [0.25; 4];
        let sets = vec![vec![0, 1], vec![2, 3], vec![0, 1, 2, 3]];
        // the full set costs 3 for mass 1, the halves cost 1 each for mass 1/2
        let lw = [0.0, 0.0, 3f64.ln()];
        let p = CoverProblem::new(&masses, &sets, &lw).unwrap();
        let g = p.solve(0.9, CoverMode::Greedy).unwrap();
        assert_eq!(g.chosen, vec![0, 1]);
        assert!((g.log_weight - 2f64.ln()).abs() < 1e-15);
        let e = p.solve(0.9, CoverMode::Exact).unwrap();
        assert_eq!(e.chosen, vec![0, 1]);
    }

    #[test]
    fn infeasible_reports_mass() {
        let masses = [0.5, 0.5];
        let sets = vec![vec![0]];
        let p = CoverProblem::new(&masses, &sets, &[0.0]).unwrap();
        match p.solve(0.9, CoverMode::Greedy) {
            Err(PressureError::InfeasibleCover { max_mass, .. }) => assert_eq!(max_mass, 0.5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exact_beats_or_ties_greedy() {
        // the widest set straddles both halves, so greedy needs three sets
        let masses = [1.0 / 6.0; 6];
        let sets = vec![vec![0, 1, 3, 4], vec![0, 1, 2], vec![3, 4, 5]];
        let lw = [0.0, 0.0, 0.0];
        let p = CoverProblem::new(&masses, &sets, &lw).unwrap();
        let g = p.solve(0.99, CoverMode::Greedy).unwrap();
        let e = p.solve(0.99, CoverMode::Exact).unwrap();
        assert_eq!(g.chosen.len(), 3);
        assert_eq!(e.chosen, vec![1, 2]);
        assert!(e.log_weight <= g.log_weight);
    }
}
