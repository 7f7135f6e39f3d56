//! Clustering accuracy under optimal label matching, and NMI.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Class-by-cluster counts. Rows follow the sorted distinct true labels,
/// columns the sorted distinct predicted labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<usize>>,
    pub n: usize,
}

impl ContingencyTable {
    pub fn new(y: &[usize], l: &[usize]) -> Result<Self> {
        if y.len() != l.len() {
            return Err(Error::Shape(format!("{} true labels vs {} predicted", y.len(), l.len())));
        }
        let rows = index_of(y);
        let cols = index_of(l);
        let mut counts = vec![vec![0; cols.len()]; rows.len()];
        for (a, b) in y.iter().zip(l) {
            counts[rows[a]][cols[b]] += 1;
        }
        Ok(Self { counts, n: y.len() })
    }
}

fn index_of(labels: &[usize]) -> BTreeMap<usize, usize> {
    let mut m = BTreeMap::new();
    for &x in labels {
        m.entry(x).or_insert(0);
    }
    for (i, v) in m.values_mut().enumerate() {
        *v = i;
    }
    m
}

/// Minimum-cost perfect matching on a square matrix (rectangular input is
/// zero-padded). Returns `assignment[row] = column`; among optimal
/// assignments the lexicographically smallest is chosen.
pub fn hungarian(cost: &[Vec<f64>]) -> Result<Vec<usize>> {
    let rows = cost.len();
    let cols = cost.iter().map(Vec::len).max().unwrap_or(0);
    let m = rows.max(cols);
    if cost.iter().flatten().any(|c| c.is_nan()) {
        return Err(Error::InvalidArgument("NaN in cost matrix".into()));
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::InvalidArgument("non-finite cost".into()));
    }
    let mut square = vec![vec![0.0; m]; m];
    for (i, r) in cost.iter().enumerate() {
        square[i][..r.len()].copy_from_slice(r);
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    let (mut best, _) = solve(&square);
    let optimum = total(&square, &best);
    let scale = square.iter().flatten().fold(1.0f64, |a, &c| a.max(c.abs()));
    let tol = 1e-9 * scale * m as f64;

    // Walk rows in order and pin each to the smallest column that still
    // admits an optimal completion.
    let mut fixed: Vec<usize> = Vec::with_capacity(m);
    for r in 0..m {
        let current = best[r];
        for c in 0..current {
            if fixed.contains(&c) {
                continue;
            }
            let mut trial = fixed.clone();
            trial.push(c);
            if let Some(assignment) = complete_with_prefix(&square, &trial) {
                if total(&square, &assignment) <= optimum + tol {
                    best = assignment;
                    break;
                }
            }
        }
        fixed.push(best[r]);
    }
    best.truncate(rows);
    Ok(best)
}

fn total(cost: &[Vec<f64>], assignment: &[usize]) -> f64 {
    assignment.iter().enumerate().map(|(i, &j)| cost[i][j]).sum()
}

/// Optimal assignment with rows `0..prefix.len()` pinned to `prefix`.
fn complete_with_prefix(cost: &[Vec<f64>], prefix: &[usize]) -> Option<Vec<usize>> {
    let m = cost.len();
    let free_rows: Vec<usize> = (prefix.len()..m).collect();
    let free_cols: Vec<usize> = (0..m).filter(|c| !prefix.contains(c)).collect();
    let sub: Vec<Vec<f64>> = free_rows.iter().map(|&r| free_cols.iter().map(|&c| cost[r][c]).collect()).collect();
    let (sub_assign, _) = if sub.is_empty() { (Vec::new(), 0.0) } else { solve(&sub) };
    let mut out = prefix.to_vec();
    out.extend(sub_assign.iter().map(|&j| free_cols[j]));
    Some(out)
}

/// O(m³) shortest augmenting path with row/column potentials.
fn solve(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    let inf = f64::INFINITY;
    // 1-based bookkeeping; column 0 is the virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
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
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    let t = total(cost, &assignment);
    (assignment, t)
}

/// Fraction of samples whose predicted cluster maps to their class under the
/// best one-to-one cluster→class map.
pub fn acc(y: &[usize], l: &[usize]) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let table = ContingencyTable::new(y, l)?;
    let max = table.counts.iter().flatten().copied().max().unwrap_or(0) as f64;
    // Rows are predicted clusters so the assignment maps cluster -> class.
    // Missing rows/columns count as zero matches.
    let n_true = table.counts.len();
    let n_pred = table.counts.first().map_or(0, Vec::len);
    let m = n_true.max(n_pred);
    let count = |t: usize, c: usize| if t < n_true && c < n_pred { table.counts[t][c] } else { 0 };
    let cost: Vec<Vec<f64>> = (0..m).map(|c| (0..m).map(|t| max - count(t, c) as f64).collect()).collect();
    let assignment = hungarian(&cost)?;
    let matched: usize = assignment.iter().enumerate().map(|(c, &t)| count(t, c)).sum();
    Ok(matched as f64 / y.len() as f64)
}

/// `I(y; l) / max(H(y), H(l))` with natural logs; 0 when both partitions are
/// constant.
pub fn nmi(y: &[usize], l: &[usize]) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let table = ContingencyTable::new(y, l)?;
    let n = table.n as f64;
    let row_sums: Vec<f64> = table.counts.iter().map(|r| r.iter().sum::<usize>() as f64).collect();
    let n_cols = table.counts[0].len();
    let col_sums: Vec<f64> = (0..n_cols).map(|j| table.counts.iter().map(|r| r[j]).sum::<usize>() as f64).collect();
    let entropy = |sums: &[f64]| -> f64 { -sums.iter().filter(|&&s| s > 0.0).map(|&s| (s / n) * (s / n).ln()).sum::<f64>() };
    let hy = entropy(&row_sums);
    let hl = entropy(&col_sums);
    let denom = hy.max(hl);
    if denom <= 0.0 {
        return Ok(0.0);
    }
    // Same partition up to relabeling: I = H(y) = H(l), so skip the rounding.
    let one_per_row = table.counts.iter().all(|r| r.iter().filter(|&&c| c > 0).count() <= 1);
    let one_per_col = (0..n_cols).all(|j| table.counts.iter().filter(|r| r[j] > 0).count() <= 1);
    if one_per_row && one_per_col {
        return Ok(1.0);
    }
    let mut mi = 0.0;
    for (a, row) in table.counts.iter().enumerate() {
        for (b, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += (c / n) * (c * n / (row_sums[a] * col_sums[b])).ln();
            }
        }
    }
    Ok((mi / denom).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hungarian_small_cases() {
        let c = vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]];
        assert_eq!(hungarian(&c).unwrap(), vec![0, 1, 2]);
        assert_eq!(hungarian(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap(), vec![0, 1]);
        assert!(hungarian(&[vec![f64::NAN]]).is_err());
        assert_eq!(hungarian(&[]).unwrap(), Vec::<usize>::new());
    }

    #[test]
    fn hungarian_prefers_lexicographically_smallest() {
        // Every permutation costs the same.
        let c = vec![vec![1.0; 4]; 4];
        assert_eq!(hungarian(&c).unwrap(), vec![0, 1, 2, 3]);
        let c = vec![vec![0.0, 0.0, 5.0], vec![0.0, 0.0, 5.0], vec![5.0, 5.0, 0.0]];
        assert_eq!(hungarian(&c).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn hungarian_rectangular_is_padded() {
        let c = vec![vec![3.0, 1.0, 2.0], vec![1.0, 3.0, 3.0]];
        assert_eq!(hungarian(&c).unwrap(), vec![1, 0]);
    }

    #[test]
    fn acc_cases() {
        assert_eq!(acc(&[0, 1, 2, 1], &[0, 1, 2, 1]).unwrap(), 1.0);
        assert_eq!(acc(&[0, 1, 2, 1], &[2, 0, 1, 0]).unwrap(), 1.0);
        assert_eq!(acc(&[0, 0, 1, 1], &[1, 1, 1, 0]).unwrap(), 0.75);
        assert!(acc(&[0, 1], &[0]).is_err());
        // More clusters than classes: only one cluster per class can count.
        assert_eq!(acc(&[0, 0, 0, 0], &[0, 1, 2, 3]).unwrap(), 0.25);
    }

    #[test]
    fn nmi_cases() {
        assert_eq!(nmi(&[0, 0, 1, 1, 2], &[0, 0, 1, 1, 2]).unwrap(), 1.0);
        assert_eq!(nmi(&[0, 4, 4, 2, 2, 2, 0], &[7, 1, 1, 0, 0, 0, 7]).unwrap(), 1.0);
        assert!(nmi(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap().abs() < 1e-12);
        assert_eq!(nmi(&[3, 3, 3], &[1, 1, 1]).unwrap(), 0.0);

        // y=[0,0,1,1], l=[0,0,0,1]: counts [[2,0],[1,1]].
        let n = 4.0f64;
        let (hy, hl) = (2.0f64.ln(), -(0.75f64 * 0.75f64.ln() + 0.25 * 0.25f64.ln()));
        let mi = (2.0 / n) * (2.0 * n / (2.0 * 3.0)).ln() + (1.0 / n) * (n / (2.0 * 3.0)).ln() + (1.0 / n) * (n / 2.0).ln();
        let expected = mi / hy.max(hl);
        assert!((nmi(&[0, 0, 1, 1], &[0, 0, 0, 1]).unwrap() - expected).abs() < 1e-12);
    }
}
