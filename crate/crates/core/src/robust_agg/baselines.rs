//! Baseline aggregators.

use super::{check_count, AggError};
use crate::vectors::{check_len, median, ParameterVector};

fn common_len(updates: &[ParameterVector]) -> Result<usize, AggError> {
    let first = updates.first().ok_or(AggError::EmptyInput)?;
    for u in updates {
        check_len(first.len(), u.len())?;
    }
    Ok(first.len())
}

/// Size-weighted mean `sum n_i u_i / sum n_i`.
pub fn fedavg_aggregate(updates: &[ParameterVector], sizes: &[usize]) -> Result<ParameterVector, AggError> {
    let m = common_len(updates)?;
    check_count("sizes", updates.len(), sizes.len())?;
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return Err(AggError::AllZeroWeights);
    }
    let mut acc = ParameterVector::zeros(m);
    for (u, &n) in updates.iter().zip(sizes) {
        acc.axpy(n as f64 / total as f64, u)?;
    }
    Ok(acc)
}

/// Coordinate-wise median.
pub fn median_aggregate(updates: &[ParameterVector]) -> Result<ParameterVector, AggError> {
    let m = common_len(updates)?;
    let mut column = Vec::with_capacity(updates.len());
    let out = (0..m)
        .map(|c| {
            column.clear();
            column.extend(updates.iter().map(|u| u[c]));
            median(&column).expect("non-empty")
        })
        .collect();
    Ok(ParameterVector(out))
}

fn squared_distance(a: &ParameterVector, b: &ParameterVector) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

/// Krum score of every update: the sum of squared distances to its
/// `n - f - 2` nearest other updates.
pub fn krum_scores(updates: &[ParameterVector], f: usize) -> Result<Vec<f64>, AggError> {
    common_len(updates)?;
    let n = updates.len();
    if n < f + 3 {
        return Err(AggError::TooFewClients { n, f });
    }
    let neighbours = n - f - 2;
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = squared_distance(&updates[i], &updates[j]);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    Ok((0..n)
        .map(|i| {
            let mut others: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist[i][j]).collect();
            others.sort_by(f64::total_cmp);
            others[..neighbours].iter().sum()
        })
        .collect())
}

/// The update with the minimal Krum score; ties go to the lowest index.
pub fn krum_aggregate(updates: &[ParameterVector], f: usize) -> Result<ParameterVector, AggError> {
    let scores = krum_scores(updates, f)?;
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s < scores[best] {
            best = i;
        }
    }
    Ok(updates[best].clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalars(v: &[f64]) -> Vec<ParameterVector> {
        v.iter().map(|&x| ParameterVector(vec![x])).collect()
    }

    #[test]
    fn fedavg_examples() {
        let ups = scalars(&[1.0, 3.0]);
        assert_eq!(fedavg_aggregate(&ups, &[5, 5]).unwrap().0, vec![2.0]);
        assert_eq!(fedavg_aggregate(&ups[..1], &[7]).unwrap(), ups[0]);
        assert_eq!(fedavg_aggregate(&scalars(&[0.0, 4.0]), &[1, 3]).unwrap().0, vec![3.0]);
        assert_eq!(fedavg_aggregate(&[], &[]), Err(AggError::EmptyInput));
    }

    #[test]
    fn median_examples() {
        assert_eq!(median_aggregate(&scalars(&[1.0, 2.0, 100.0])).unwrap().0, vec![2.0]);
        assert_eq!(median_aggregate(&scalars(&[1.0, 3.0])).unwrap().0, vec![2.0]);
        assert_eq!(median_aggregate(&[]), Err(AggError::EmptyInput));
    }

    #[test]
    fn krum_examples() {
        let ups = scalars(&[0.0, 0.1, 0.2, 10.0]);
        assert_eq!(krum_aggregate(&ups, 1).unwrap(), ups[0]);
        let same = vec![ParameterVector(vec![1.0, 2.0]); 5];
        assert_eq!(krum_aggregate(&same, 1).unwrap(), same[0]);
        assert_eq!(
            krum_aggregate(&ups, 2),
            Err(AggError::TooFewClients { n: 4, f: 2 })
        );
    }
}
