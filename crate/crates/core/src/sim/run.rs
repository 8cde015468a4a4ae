//! Round orchestration.
//!
//! Each round runs three phases separated by barriers: cohort selection on
//! the server, client work in parallel, then aggregation and scoring in
//! ascending id order. Client work depends only on seeds derived from
//! `(master seed, client, round)`, so results do not depend on the thread
//! count.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bytes::{account_bytes, setup_bytes, ByteCounts, RoundContext};
use super::config::{Aggregator, DataSource, Mode, ScenarioConfig};
use super::SimError;
use crate::adversary::{assign_byzantine, corrupt_update, poison_labels, AttackKind, AttackPlan};
use crate::privacy::add_dp_noise;
use crate::robust_agg::{
    adaptive_clip_threshold, aggregate_weighted, aggregation_weights, clip_update, fedavg_aggregate, krum_aggregate,
    median_aggregate, score_round, select_clients, AggError, ClientRecord, ClientScore,
};
use crate::secure_agg::{
    establish_pairwise_seeds, kem_keygen, mask_update, recover_dropout_residual, reconstruct_client_seeds,
    share_client_seeds, unmask_aggregate, ClientKeys, MaskedUpdate, SeedTable,
};
use crate::seed;
use crate::trainer::{
    evaluate, ingest_csv_split, init_model, local_train, make_synthetic, partition_non_iid, Dataset, MetricsReport,
    ModelSpec,
};
use crate::vectors::{l2_norm, quantize, ParameterVector, RingVector};
use crate::ClientId;

/// One client's row in a [`RoundReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientRound {
    pub id: ClientId,
    /// Reputation after this round's update.
    pub reputation: f64,
    pub sim: Option<f64>,
    pub mag: Option<f64>,
    pub score: Option<f64>,
    pub byzantine: bool,
    pub participated: bool,
    pub dropped: bool,
    pub bytes: ByteCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: u64,
    /// Test metrics of the global model after this round's step.
    pub metrics: MetricsReport,
    pub cohort: Vec<ClientId>,
    pub dropped: Vec<ClientId>,
    /// `None` when clipping is off.
    pub clip_threshold: Option<f64>,
    pub sigma: f64,
    /// Why the model was left unchanged, if it was.
    pub aborted: Option<String>,
    /// Hybrid mode: largest per-coordinate gap between the unmasked aggregate
    /// and the plaintext aggregate of the same client vectors.
    pub aggregate_deviation: Option<f64>,
    pub clients: Vec<ClientRound>,
    /// Wall-clock time of the round. Kept out of the serialized report so
    /// that metrics files are reproducible.
    #[serde(skip)]
    pub latency: Duration,
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ScenarioConfig,
    pub param_count: usize,
    pub byzantine: Vec<ClientId>,
    pub initial_metrics: MetricsReport,
    pub rounds: Vec<RoundReport>,
    /// First round whose trailing 5-round mean accuracy reaches 99.5% of
    /// that mean's maximum over the run.
    pub convergence_round: Option<u64>,
    pub final_metrics: MetricsReport,
    /// One-off handshake traffic.
    pub setup_bytes: u64,
    /// Recurring per-round traffic summed over rounds and clients.
    pub round_bytes: ByteCounts,
    pub total_bytes: u64,
    /// Global model before round 0 and after every round.
    #[serde(skip)]
    pub trajectory: Vec<ParameterVector>,
}

struct ClientData {
    clean: Dataset,
    poisoned: Option<Dataset>,
}

/// A federation mid-run.
pub struct Simulation {
    cfg: ScenarioConfig,
    spec: ModelSpec,
    attack: AttackPlan,
    pub global: ParameterVector,
    pub records: Vec<ClientRecord>,
    clients: Vec<ClientData>,
    test: Dataset,
    byzantine: BTreeSet<ClientId>,
    seeds: Option<SeedTable>,
    pool: rayon::ThreadPool,
}

/// `(train, test)` for the scenario's data source.
pub fn load_data(cfg: &ScenarioConfig) -> Result<(Dataset, Dataset), SimError> {
    let data = &cfg.training.data;
    let master = cfg.federation.seed;
    match data.source {
        DataSource::Synthetic => {
            let all = make_synthetic(data.samples, data.features, data.separation, seed::derive(master, "data", &[]));
            let mut rows: Vec<usize> = (0..all.len()).collect();
            rows.shuffle(&mut seed::rng(master, "test-split", &[]));
            let n_test = ((data.test_fraction * all.len() as f64).round() as usize).clamp(1, all.len() - 1);
            let (test, train) = rows.split_at(n_test);
            Ok((all.subset(train), all.subset(test)))
        }
        DataSource::Csv => {
            let path = data.path.as_ref().expect("validated");
            let (train, test, _) = ingest_csv_split(
                path,
                &data.label_column,
                &data.categorical,
                data.test_fraction,
                seed::derive(master, "test-split", &[]),
            )?;
            Ok((train, test))
        }
    }
}

/// Model size of a scenario, loading its data when the width depends on it.
pub fn scenario_param_count(cfg: &ScenarioConfig) -> Result<usize, SimError> {
    let dim = match cfg.training.data.source {
        DataSource::Synthetic => cfg.training.data.features,
        DataSource::Csv => load_data(cfg)?.0.dim(),
    };
    Ok(cfg.model.spec(dim).param_count())
}

impl Simulation {
    pub fn new(cfg: ScenarioConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let master = cfg.federation.seed;
        let n = cfg.federation.clients;
        let (train, test) = load_data(&cfg)?;
        let parts = partition_non_iid(&train, n, cfg.training.data.dirichlet_alpha, seed::derive(master, "partition", &[]))?;
        let spec = cfg.model.spec(train.dim());
        spec.validate()?;
        let global = init_model(&spec, seed::derive(master, "init-model", &[]));

        let attack = AttackPlan {
            seed: seed::derive(master, "attack", &[cfg.attack.seed]),
            ..cfg.attack
        };
        let byzantine = if attack.kind == AttackKind::None {
            BTreeSet::new()
        } else {
            assign_byzantine(n, attack.fraction, attack.seed)
        };
        let clients: Vec<ClientData> = parts
            .into_iter()
            .enumerate()
            .map(|(i, clean)| {
                let poisoned = (attack.poisons_labels() && byzantine.contains(&ClientId(i as u32)))
                    .then(|| poison_labels(&clean, attack.label_flip_fraction, seed::derive(attack.seed, "poison", &[i as u64])));
                ClientData { clean, poisoned }
            })
            .collect();
        let records = clients
            .iter()
            .enumerate()
            .map(|(i, c)| ClientRecord::new(ClientId(i as u32), c.clean.len()))
            .collect();

        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.federation.threads)
            .build()
            .map_err(|e| SimError::ThreadPool(e.to_string()))?;

        let seeds = if cfg.federation.mode.is_masked() {
            let suite = cfg.federation.kem;
            let keys: Vec<ClientKeys> = pool.install(|| {
                (0..n as u32)
                    .into_par_iter()
                    .map(|i| ClientKeys {
                        id: ClientId(i),
                        keys: kem_keygen(suite, &seed::derive_bytes(master, "kem-keygen", &[i as u64])),
                    })
                    .collect()
            });
            Some(establish_pairwise_seeds(&keys, suite, seed::derive(master, "handshake", &[]))?)
        } else {
            None
        };

        Ok(Simulation {
            cfg,
            spec,
            attack,
            global,
            records,
            clients,
            test,
            byzantine,
            seeds,
            pool,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn byzantine(&self) -> &BTreeSet<ClientId> {
        &self.byzantine
    }

    pub fn test_set(&self) -> &Dataset {
        &self.test
    }

    pub fn evaluate(&self) -> Result<MetricsReport, SimError> {
        Ok(evaluate(&self.spec, &self.global, &self.test)?)
    }

    /// Local training and, for Byzantine clients, the attack.
    fn client_update(&self, id: ClientId, round: u64) -> Result<ParameterVector, SimError> {
        let byzantine = self.byzantine.contains(&id);
        let client = &self.clients[id.index()];
        let data = match &client.poisoned {
            Some(p) if byzantine && self.attack.is_active(round) => p,
            _ => &client.clean,
        };
        let train_cfg = self
            .cfg
            .training
            .train_config(seed::derive(self.cfg.federation.seed, "local-train", &[id.0 as u64, round]));
        let local = local_train(&self.spec, &self.global, data, &train_cfg)?;
        let delta = local.sub(&self.global)?;
        Ok(if byzantine {
            corrupt_update(&delta, &self.attack, round, id)
        } else {
            delta
        })
    }

    fn dropouts(&self, round: u64, cohort: &[ClientId]) -> BTreeSet<ClientId> {
        let members: BTreeSet<ClientId> = cohort.iter().copied().collect();
        let mut dropped: BTreeSet<ClientId> = self
            .cfg
            .dropouts
            .schedule
            .iter()
            .filter(|e| e.round == round)
            .flat_map(|e| e.clients.iter().map(|&c| ClientId(c)))
            .filter(|c| members.contains(c))
            .collect();
        let p = self.cfg.dropouts.probability;
        if p > 0.0 {
            let mut rng = seed::rng(self.cfg.federation.seed, "dropouts", &[round]);
            for &id in cohort {
                let drop = rng.gen_bool(p);
                if drop && dropped.len() < self.cfg.shamir.max_dropouts {
                    dropped.insert(id);
                }
            }
        }
        dropped
    }

    fn plaintext_aggregate(
        &self,
        updates: &[ParameterVector],
        reputations: &[f64],
        sizes: &[usize],
    ) -> Result<ParameterVector, AggError> {
        match self.cfg.federation.aggregator {
            Aggregator::Reputation => aggregate_weighted(updates, reputations, sizes),
            Aggregator::Fedavg => fedavg_aggregate(updates, sizes),
            Aggregator::Median => median_aggregate(updates),
            Aggregator::Krum => {
                let n = updates.len();
                let default_f = (self.cfg.attack.fraction * self.cfg.federation.cohort as f64 + 1e-9).floor() as usize;
                let f = self.cfg.federation.krum_f.unwrap_or(default_f).min(n.saturating_sub(3));
                krum_aggregate(updates, f)
            }
        }
    }

    /// Broadcast weights `omega_i` for the masked modes, fixed at selection.
    fn broadcast_weights(&self, reputations: &[f64], sizes: &[usize]) -> Result<Vec<f64>, AggError> {
        match self.cfg.federation.aggregator {
            Aggregator::Fedavg => aggregation_weights(&vec![1.0; sizes.len()], sizes),
            _ => aggregation_weights(reputations, sizes),
        }
    }

    /// Masked path: scale, quantize, mask; the server sums the survivors,
    /// subtracts dropout residuals and renormalizes over the survivors.
    fn secure_aggregate(
        &self,
        round: u64,
        cohort: &[ClientId],
        updates: &[ParameterVector],
        weights: &[f64],
        dropped: &BTreeSet<ClientId>,
    ) -> Result<Option<ParameterVector>, SimError> {
        let seeds = self.seeds.as_ref().expect("masked mode has seeds");
        let quant = &self.cfg.quantization;
        let masked: Vec<MaskedUpdate> = self.pool.install(|| {
            cohort
                .par_iter()
                .zip(updates.par_iter().zip(weights.par_iter()))
                .map(|(&id, (u, &w))| {
                    let q = quantize(&u.scaled(w), quant)?;
                    Ok(mask_update(&q, id, seeds, cohort, round)?)
                })
                .collect::<Result<Vec<_>, SimError>>()
        })?;
        let survivors: Vec<ClientId> = cohort.iter().copied().filter(|c| !dropped.contains(c)).collect();
        let uploads: Vec<MaskedUpdate> = masked.into_iter().filter(|u| !dropped.contains(&u.client)).collect();
        let residual = if dropped.is_empty() {
            None
        } else {
            let shares = share_client_seeds(
                seeds,
                cohort,
                self.cfg.shamir.max_dropouts,
                seed::derive(self.cfg.federation.seed, "seed-shares", &[]),
                round,
            )?;
            let m = self.global.len();
            let mut residual = RingVector::zeros(m);
            for &d in dropped {
                let rebuilt = reconstruct_client_seeds(&shares, d, &survivors)?;
                residual += &recover_dropout_residual(d, &survivors, &rebuilt, round, m)?;
            }
            Some(residual)
        };
        let sum = unmask_aggregate(&uploads, quant.scale, residual.as_ref())?;
        if dropped.is_empty() {
            return Ok(Some(sum));
        }
        let surviving_weight: f64 = cohort
            .iter()
            .zip(weights)
            .filter(|(c, _)| !dropped.contains(c))
            .map(|(_, w)| w)
            .sum();
        if !(surviving_weight > 0.0) {
            return Ok(None);
        }
        Ok(Some(sum.scaled(1.0 / surviving_weight)))
    }

    /// Execute round `round` and advance the global model.
    pub fn run_round(&mut self, round: u64) -> Result<RoundReport, SimError> {
        let start = Instant::now();
        let mode = self.cfg.federation.mode;
        let cohort = select_clients(&self.records, &self.cfg.selection(), round);
        let sizes: Vec<usize> = cohort.iter().map(|c| self.records[c.index()].samples).collect();
        let reputations: Vec<f64> = cohort.iter().map(|c| self.records[c.index()].reputation).collect();

        let raw: Vec<ParameterVector> = self.pool.install(|| {
            cohort
                .par_iter()
                .map(|&id| self.client_update(id, round))
                .collect::<Result<Vec<_>, SimError>>()
        })?;

        let norms: Vec<f64> = raw.iter().map(l2_norm).collect();
        let clip = self.cfg.training.clip.then(|| adaptive_clip_threshold(&norms));
        let sigma = self.cfg.privacy.sigma(clip.unwrap_or(0.0))?;
        let master = self.cfg.federation.seed;
        let updates: Vec<ParameterVector> = cohort
            .iter()
            .zip(&raw)
            .map(|(&id, u)| {
                let clipped = match clip {
                    Some(c) => clip_update(u, c),
                    None => u.clone(),
                };
                add_dp_noise(&clipped, sigma, seed::derive(master, "dp-noise", &[id.0 as u64, round]))
            })
            .collect();

        let dropped = self.dropouts(round, &cohort);
        let mut surv_ids = Vec::new();
        let mut surv_updates = Vec::new();
        let mut surv_reps = Vec::new();
        let mut surv_sizes = Vec::new();
        for (i, &id) in cohort.iter().enumerate() {
            if !dropped.contains(&id) {
                surv_ids.push(id);
                surv_updates.push(updates[i].clone());
                surv_reps.push(reputations[i]);
                surv_sizes.push(sizes[i]);
            }
        }

        let mut aborted = None;
        let mut deviation = None;
        let plaintext = self.plaintext_aggregate(&surv_updates, &surv_reps, &surv_sizes);
        let aggregate = match mode {
            Mode::Plaintext => match plaintext {
                Ok(a) => Some(a),
                Err(e) => {
                    aborted = Some(e.to_string());
                    None
                }
            },
            Mode::Masked | Mode::Hybrid => match self.broadcast_weights(&reputations, &sizes) {
                Err(e) => {
                    aborted = Some(e.to_string());
                    None
                }
                Ok(weights) => {
                    let secure = self.secure_aggregate(round, &cohort, &updates, &weights, &dropped)?;
                    if secure.is_none() {
                        aborted = Some(AggError::AllZeroWeights.to_string());
                    }
                    if let (Mode::Hybrid, Some(s), Ok(p)) = (mode, &secure, &plaintext) {
                        deviation = Some(s.max_abs_diff(p)?);
                    }
                    secure
                }
            },
        };
        if let Some(a) = &aggregate {
            self.global.axpy(1.0, a)?;
        }

        let scores: BTreeMap<ClientId, ClientScore> = if mode == Mode::Masked {
            BTreeMap::new()
        } else {
            let pairs: Vec<(ClientId, ParameterVector)> = surv_ids.iter().copied().zip(surv_updates).collect();
            score_round(round, &pairs, &mut self.records, &self.cfg.reputation)?
                .into_iter()
                .map(|s| (s.id, s))
                .collect()
        };

        let metrics = self.evaluate()?;
        let param_count = self.global.len();
        let members: BTreeSet<ClientId> = cohort.iter().copied().collect();
        let clients = self
            .records
            .iter()
            .map(|r| {
                let score = scores.get(&r.id);
                let participated = members.contains(&r.id);
                let is_dropped = dropped.contains(&r.id);
                ClientRound {
                    id: r.id,
                    reputation: r.reputation,
                    sim: score.map(|s| s.sim),
                    mag: score.map(|s| s.mag),
                    score: score.map(|s| s.score),
                    byzantine: self.byzantine.contains(&r.id),
                    participated,
                    dropped: is_dropped,
                    bytes: account_bytes(
                        &self.cfg,
                        &RoundContext {
                            param_count,
                            cohort_size: cohort.len(),
                            participated,
                            dropped: is_dropped,
                        },
                    ),
                }
            })
            .collect();

        Ok(RoundReport {
            round,
            metrics,
            cohort,
            dropped: dropped.into_iter().collect(),
            clip_threshold: clip,
            sigma,
            aborted,
            aggregate_deviation: deviation,
            clients,
            latency: start.elapsed(),
        })
    }
}

/// First round `t` whose trailing mean accuracy over rounds
/// `max(0, t - 4)..=t` is at least 99.5% of the largest such mean.
pub fn convergence_round(accuracies: &[f64]) -> Option<u64> {
    let averages: Vec<f64> = (0..accuracies.len())
        .map(|t| {
            let window = &accuracies[t.saturating_sub(4)..=t];
            window.iter().sum::<f64>() / window.len() as f64
        })
        .collect();
    let best = averages.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    averages.iter().position(|&a| a >= 0.995 * best).map(|t| t as u64)
}

/// Run every round of `cfg`.
pub fn run_experiment(cfg: ScenarioConfig) -> Result<ExperimentResult, SimError> {
    let mut sim = Simulation::new(cfg)?;
    let initial_metrics = sim.evaluate()?;
    let mut trajectory = vec![sim.global.clone()];
    let mut rounds = Vec::with_capacity(sim.cfg.federation.rounds as usize);
    for t in 0..sim.cfg.federation.rounds {
        rounds.push(sim.run_round(t)?);
        trajectory.push(sim.global.clone());
    }
    let accuracies: Vec<f64> = rounds.iter().map(|r| r.metrics.accuracy).collect();
    let mut round_bytes = ByteCounts::default();
    for r in &rounds {
        for c in &r.clients {
            round_bytes += ByteCounts {
                kem_pk: 0,
                kem_ct: 0,
                ..c.bytes
            };
        }
    }
    let setup = setup_bytes(&sim.cfg);
    Ok(ExperimentResult {
        param_count: sim.global.len(),
        byzantine: sim.byzantine.iter().copied().collect(),
        final_metrics: rounds.last().map_or(initial_metrics, |r| r.metrics),
        initial_metrics,
        convergence_round: convergence_round(&accuracies),
        setup_bytes: setup,
        total_bytes: setup + round_bytes.per_round(),
        round_bytes,
        rounds,
        trajectory,
        config: sim.cfg,
    })
}
