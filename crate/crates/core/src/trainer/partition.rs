use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::{Dataset, TrainError};
use crate::seed;

const MAX_ATTEMPTS: u64 = 1000;

/// Label-skew non-IID split: for each class, client shares are drawn from a
/// symmetric `Dirichlet(dirichlet_alpha)`. The result is a disjoint cover of
/// `data`; a draw that leaves any client empty is rejected and redrawn.
pub fn partition_non_iid(
    data: &Dataset,
    clients: usize,
    dirichlet_alpha: f64,
    seed_value: u64,
) -> Result<Vec<Dataset>, TrainError> {
    if clients < 2 {
        return Err(TrainError::InvalidConfig("need at least 2 clients".into()));
    }
    if !(dirichlet_alpha.is_finite() && dirichlet_alpha > 0.0) {
        return Err(TrainError::InvalidConfig(format!(
            "dirichlet alpha {dirichlet_alpha} must be positive"
        )));
    }
    if data.len() < clients {
        return Err(TrainError::TooFewSamples {
            clients,
            samples: data.len(),
        });
    }
    let gamma = Gamma::new(dirichlet_alpha, 1.0).expect("positive shape");
    let by_class: Vec<Vec<usize>> = (0..=1u8)
        .map(|c| (0..data.len()).filter(|&i| data.label(i) == c).collect())
        .collect();

    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = seed::rng(seed_value, "partition", &[attempt]);
        let mut assignment: Vec<Vec<usize>> = vec![Vec::new(); clients];
        for members in &by_class {
            let mut members = members.clone();
            members.shuffle(&mut rng);
            let shares = dirichlet(&gamma, clients, &mut rng);
            let mut start = 0;
            let mut cumulative = 0.0;
            for (c, share) in shares.iter().enumerate() {
                cumulative += share;
                let end = if c + 1 == clients {
                    members.len()
                } else {
                    ((cumulative * members.len() as f64).round() as usize).clamp(start, members.len())
                };
                assignment[c].extend_from_slice(&members[start..end]);
                start = end;
            }
        }
        if assignment.iter().all(|a| !a.is_empty()) {
            return Ok(assignment
                .into_iter()
                .map(|mut idx| {
                    idx.sort_unstable();
                    data.subset(&idx)
                })
                .collect());
        }
    }
    Err(TrainError::TooFewSamples {
        clients,
        samples: data.len(),
    })
}

fn dirichlet<R: Rng>(gamma: &Gamma<f64>, k: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 && total.is_finite() {
            return draws.into_iter().map(|g| g / total).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::make_synthetic;

    #[test]
    fn partition_is_a_disjoint_cover() {
        let data = make_synthetic(300, 2, 1.0, 4);
        let parts = partition_non_iid(&data, 7, 0.5, 1).unwrap();
        assert_eq!(parts.len(), 7);
        assert!(parts.iter().all(|p| !p.is_empty()));
        let mut rows: Vec<Vec<u64>> = parts
            .iter()
            .flat_map(|p| (0..p.len()).map(move |i| p.row(i).iter().map(|v| v.to_bits()).collect()))
            .collect();
        let mut original: Vec<Vec<u64>> =
            (0..data.len()).map(|i| data.row(i).iter().map(|v| v.to_bits()).collect()).collect();
        rows.sort();
        original.sort();
        assert_eq!(rows, original);
    }

    #[test]
    fn deterministic_and_errors() {
        let data = make_synthetic(50, 2, 1.0, 4);
        assert_eq!(
            partition_non_iid(&data, 5, 0.3, 9).unwrap(),
            partition_non_iid(&data, 5, 0.3, 9).unwrap()
        );
        assert!(matches!(
            partition_non_iid(&data, 51, 1.0, 0),
            Err(TrainError::TooFewSamples { .. })
        ));
        assert!(partition_non_iid(&data, 1, 1.0, 0).is_err());
        assert!(partition_non_iid(&data, 2, 0.0, 0).is_err());
    }
}
