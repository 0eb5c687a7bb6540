//! Switching cost between topologies: the minimum total planar displacement
//! over all element assignments, and cost tables over topology catalogs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    build_auxiliary, build_cuca_uniform, build_fuca, build_uca, ArrayTopology, Auxiliary, FucaSpec,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReconfigError {
    #[error("element counts differ: {0} vs {1}")]
    CountMismatch(usize, usize),
    #[error("cost matrix must be square and finite")]
    BadCost,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentResult {
    pub total_distance: f64,
    /// Element `i` of the source moves to element `permutation[i]` of the target.
    pub permutation: Vec<usize>,
    /// FNV-1a over the bit patterns of the ground-cost matrix, row-major.
    pub cost_matrix_checksum: u64,
}

/// Minimum-cost perfect assignment on a square matrix (Hungarian method with
/// potentials, O(n³)). Returns the optimal cost and `row → column`.
pub fn hungarian(cost: &[Vec<f64>]) -> Result<(f64, Vec<usize>), ReconfigError> {
    let n = cost.len();
    if cost.iter().any(|r| r.len() != n || r.iter().any(|c| !c.is_finite())) {
        return Err(ReconfigError::BadCost);
    }
    if n == 0 {
        return Ok((0.0, Vec::new()));
    }
    // 1-based potentials; column 0 is a virtual start
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    // sum in row order so the total does not depend on the dual updates
    let total = assignment.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    Ok((total, assignment))
}

fn checksum(cost: &[Vec<f64>]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for row in cost {
        for c in row {
            for b in c.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
    }
    h
}

/// Planar Euclidean ground cost between the elements of `a` (rows) and `b`.
pub fn ground_cost(a: &ArrayTopology, b: &ArrayTopology) -> Vec<Vec<f64>> {
    let pb = b.element_positions();
    a.element_positions()
        .iter()
        .map(|p| pb.iter().map(|q| (p[0] - q[0]).hypot(p[1] - q[1])).collect())
        .collect()
}

/// Minimum aggregate element displacement to morph `a` into `b`.
pub fn switching_cost(a: &ArrayTopology, b: &ArrayTopology) -> Result<AssignmentResult, ReconfigError> {
    if a.element_count() != b.element_count() {
        return Err(ReconfigError::CountMismatch(a.element_count(), b.element_count()));
    }
    let cost = ground_cost(a, b);
    let (total_distance, permutation) = hungarian(&cost)?;
    Ok(AssignmentResult {
        total_distance,
        permutation,
        cost_matrix_checksum: checksum(&cost),
    })
}

/// Pairwise switching costs with row/column labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

pub fn cost_matrix(catalog: &[ArrayTopology]) -> Result<CostMatrix, ReconfigError> {
    let n = catalog.len();
    if let Some(first) = catalog.first() {
        if let Some(bad) = catalog.iter().find(|t| t.element_count() != first.element_count()) {
            return Err(ReconfigError::CountMismatch(first.element_count(), bad.element_count()));
        }
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let costs = pairs
        .par_iter()
        .map(|&(i, j)| switching_cost(&catalog[i], &catalog[j]).map(|r| r.total_distance))
        .collect::<Result<Vec<f64>, _>>()?;
    let mut values = vec![vec![0.0; n]; n];
    for (&(i, j), c) in pairs.iter().zip(costs) {
        values[i][j] = c;
        values[j][i] = c;
    }
    Ok(CostMatrix {
        labels: catalog.iter().map(|t| t.label()).collect(),
        values,
    })
}

/// Every named-family topology with exactly `count` elements that builds
/// and validates within `aperture`.
pub fn catalog_with_count(count: usize, aperture: f64) -> Vec<ArrayTopology> {
    let mut out = Vec::new();
    if count % 2 == 0 {
        out.extend(build_uca(count, aperture, 0.0));
    }
    let structures: Vec<(usize, usize)> = (2..=count / 4)
        .filter(|n| count % n == 0)
        .map(|n| (n, count / n))
        .filter(|&(_, k)| k >= 4 && k % 2 == 0)
        .collect();
    for &(n, k) in &structures {
        out.extend(build_cuca_uniform(n, k, aperture, 0.0));
    }
    for &(n, k) in &structures {
        out.extend(build_fuca(&FucaSpec::new(n, k, 0.6 * aperture, 0.4 * aperture)));
    }
    out.extend(build_auxiliary(Auxiliary::Ura, count, aperture));
    let arms = if count % 4 == 0 {
        4
    } else {
        (2..=count).find(|a| count % a == 0).unwrap_or(count)
    };
    out.extend(build_auxiliary(Auxiliary::Rla { arms }, count, aperture));
    out.extend(build_auxiliary(Auxiliary::Spiral, count, aperture));
    out
}

/// All feasible topologies using at most `budget` elements (unused elements
/// stay parked), ordered by element count and then family.
pub fn catalog_for_budget(budget: usize, aperture: f64) -> Vec<ArrayTopology> {
    (4..=budget).flat_map(|c| catalog_with_count(c, aperture)).collect()
}
