//! Reference values by enumerating every memoryless deterministic strategy.
//!
//! Deliberately shares no code with the iterative checker: its own graph
//! search and a dense Gaussian elimination per induced chain.

use thiserror::Error;

use super::Optimization;
use crate::model::{ConcreteMdp, SpecKind, Specification};

pub const MAX_ENUMERATED_STRATEGIES: u64 = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("{0} strategies exceed the enumeration limit")]
    TooLarge(u128),
    #[error("singular induced chain")]
    Singular,
}

/// States of the chain `succ` from which some state in `set` is reachable.
fn can_reach(succ: &[Vec<usize>], set: &[bool]) -> Vec<bool> {
    let mut reach = set.to_vec();
    loop {
        let mut changed = false;
        for s in 0..succ.len() {
            if !reach[s] && succ[s].iter().any(|&t| reach[t]) {
                reach[s] = true;
                changed = true;
            }
        }
        if !changed {
            return reach;
        }
    }
}

fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>, OracleError> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .ok_or(OracleError::Singular)?;
        if a[pivot][col].abs() < 1e-300 {
            return Err(OracleError::Singular);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Ok(x)
}

/// Values of all states in the chain fixed by `pick`.
fn chain_values(mdp: &ConcreteMdp<f64>, pick: &[usize], cost: bool) -> Result<Vec<f64>, OracleError> {
    let n = mdp.num_states();
    let row = |s: usize| &mdp.choices[s][pick[s]];
    let succ: Vec<Vec<usize>> = (0..n)
        .map(|s| row(s).transitions.iter().filter(|(_, p)| *p > 0.0).map(|(t, _)| *t).collect())
        .collect();
    let reach_target = can_reach(&succ, &mdp.targets);
    let mut values = vec![0.0; n];
    let unknown: Vec<bool> = if cost {
        let stuck: Vec<bool> = reach_target.iter().map(|r| !r).collect();
        let risky = can_reach(&succ, &stuck);
        for s in 0..n {
            if risky[s] {
                values[s] = f64::INFINITY;
            }
        }
        (0..n).map(|s| !mdp.targets[s] && !risky[s]).collect()
    } else {
        for s in 0..n {
            if mdp.targets[s] {
                values[s] = 1.0;
            }
        }
        (0..n).map(|s| !mdp.targets[s] && reach_target[s]).collect()
    };
    let idx: Vec<usize> = (0..n).filter(|&s| unknown[s]).collect();
    let mut pos = vec![usize::MAX; n];
    for (i, &s) in idx.iter().enumerate() {
        pos[s] = i;
    }
    let m = idx.len();
    let mut a = vec![vec![0.0; m]; m];
    let mut b = vec![0.0; m];
    for (i, &s) in idx.iter().enumerate() {
        a[i][i] += 1.0;
        if cost {
            b[i] += row(s).cost;
        }
        for &(t, p) in &row(s).transitions {
            if unknown[t] {
                a[i][pos[t]] -= p;
            } else {
                b[i] += p * values[t];
            }
        }
    }
    for (i, v) in gauss_solve(a, b)?.into_iter().enumerate() {
        values[idx[i]] = v;
    }
    Ok(values)
}

/// Per-state extremal value over all memoryless deterministic strategies.
pub fn brute_force_values(mdp: &ConcreteMdp<f64>, kind: SpecKind, opt: Optimization) -> Result<Vec<f64>, OracleError> {
    let n = mdp.num_states();
    let arity: Vec<usize> = mdp.choices.iter().map(Vec::len).collect();
    let count = arity.iter().fold(1u128, |acc, &k| acc.saturating_mul(k as u128));
    if count > MAX_ENUMERATED_STRATEGIES as u128 {
        return Err(OracleError::TooLarge(count));
    }
    let cost = kind == SpecKind::ExpectedCost;
    let mut pick = vec![0; n];
    let mut best: Option<Vec<f64>> = None;
    loop {
        let v = chain_values(mdp, &pick, cost)?;
        best = Some(match best {
            None => v,
            Some(b) => b
                .into_iter()
                .zip(v)
                .map(|(x, y)| match opt {
                    Optimization::Max => x.max(y),
                    Optimization::Min => x.min(y),
                })
                .collect(),
        });
        // odometer increment
        let mut s = 0;
        loop {
            if s == n {
                return Ok(best.expect("at least one strategy"));
            }
            pick[s] += 1;
            if pick[s] < arity[s] {
                break;
            }
            pick[s] = 0;
            s += 1;
        }
    }
}

/// Extremal value at the initial state against the adversary of `spec`.
pub fn brute_force_oracle(mdp: &ConcreteMdp<f64>, spec: &Specification) -> Result<f64, OracleError> {
    let v = brute_force_values(mdp, spec.kind, Optimization::adversary(spec))?;
    Ok(v[mdp.initial])
}
