//! PrivMVMF: encrypted uploads, ciphertext aggregation, decrypting clients and
//! unrated-item sampling.

use std::collections::BTreeSet;
use std::ops::Range;
use std::time::Instant;

use log::{debug, info};
use mvmf_core::nalgebra::{DMatrix, DVector};
use mvmf_core::{derive_seed, objective, GradientBundle, Hyperparameters, RatingDataset, WeightScheme};
use mvmf_paillier::{add_assign_values, decrypt_values, encrypt_values, Ciphertext, Encoding, KeyPair, PublicKey};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FedError, Result};
use crate::roles::{client_round, item_server_round, ServerState, UpdateMode};
use crate::run::{assemble_model, check_inputs, initial_model, EpochRecord, PhaseTimings, TrainedRun};
use crate::transport::{InProcessQueue, Transport};

const SAMPLE_STREAM: u64 = 0x5A4D;
const CIPHER_STREAM: u64 = 0xC1F0;

/// Default magnitude bound on uploaded gradient entries before encoding.
pub const DEFAULT_CLIP_BOUND: f64 = 1e6;

/// Upload whose payloads are ciphertext vectors; the only per-user message the server sees.
pub type EncryptedBundle = GradientBundle<Vec<Ciphertext>>;

/// Uniform sample without replacement of `min(round(rho |O_i|), m - |O_i|)` unrated items per user.
pub fn sample_unrated(data: &RatingDataset<f64>, rho: f64, seed: u64) -> Result<Vec<BTreeSet<usize>>> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(FedError::Config(format!("sampling ratio {rho} must be finite and non-negative")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, SAMPLE_STREAM));
    let m = data.n_items();
    Ok((0..data.n_users())
        .map(|i| {
            let rated = data.user_ratings(i);
            let size = ((rho * rated.len() as f64).round() as usize).min(m - rated.len());
            let unrated: Vec<usize> = (0..m).filter(|&j| data.rating(i, j).is_none()).collect();
            unrated.choose_multiple(&mut rng, size).copied().collect()
        })
        .collect())
}

/// Sampled weight scheme with fresh sets from `hp.rho`.
pub fn sampled_scheme(data: &RatingDataset<f64>, hp: &Hyperparameters, seed: u64) -> Result<WeightScheme<f64>> {
    Ok(WeightScheme::Sampled { alpha: hp.alpha, sampled: sample_unrated(data, hp.rho, seed)? })
}

/// Clients that decrypt aggregates; rows are split between them by index range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecrypterPool {
    members: Vec<usize>,
}

impl DecrypterPool {
    pub fn new(members: Vec<usize>, n_users: usize) -> Result<Self> {
        if members.is_empty() {
            return Err(FedError::Config("decrypter pool is empty".into()));
        }
        if let Some(&bad) = members.iter().find(|&&c| c >= n_users) {
            return Err(FedError::Config(format!("decrypter {bad} is not one of {n_users} clients")));
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    /// Contiguous near-equal split of `0..rows`, one range per member.
    pub fn ranges(&self, rows: usize) -> Vec<(usize, Range<usize>)> {
        let k = self.members.len();
        let base = rows / k;
        let extra = rows % k;
        let mut start = 0;
        self.members
            .iter()
            .enumerate()
            .map(|(idx, &member)| {
                let len = base + usize::from(idx < extra);
                let r = start..start + len;
                start += len;
                (member, r)
            })
            .collect()
    }

    /// Decrypts every row; rows without any contribution decode to zero.
    pub fn decrypt(&self, agg: &EncryptedAggregate, keys: &KeyPair, encoding: &Encoding) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let m = agg.items.len();
        let rows = m + agg.attrs.len();
        let mut q_sum = DMatrix::zeros(m, agg.k);
        let mut u_sum = DMatrix::zeros(agg.attrs.len(), agg.k);
        for (member, range) in self.ranges(rows) {
            debug!("decrypter {member}: rows {range:?}");
            for row in range {
                let (slot, target, r) = if row < m {
                    (&agg.items[row], &mut q_sum, row)
                } else {
                    (&agg.attrs[row - m], &mut u_sum, row - m)
                };
                if let Some(cs) = slot {
                    let vals = decrypt_values(cs, encoding, &keys.private, &keys.public)?;
                    for (c, v) in vals.into_iter().enumerate() {
                        target[(r, c)] = v;
                    }
                }
            }
        }
        Ok((q_sum, u_sum))
    }
}

/// Server-side ciphertext sums: `E(sum_i f(i,j))` per item and `E(sum_i f(i,d_u))` per attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct EncryptedAggregate {
    pub items: Vec<Option<Vec<Ciphertext>>>,
    pub attrs: Vec<Option<Vec<Ciphertext>>>,
    pub k: usize,
}

/// Multiplies ciphertexts in the given bundle order.
pub fn aggregate_encrypted(
    bundles: &[EncryptedBundle],
    n_items: usize,
    n_attrs: usize,
    k: usize,
    pk: &PublicKey,
) -> Result<EncryptedAggregate> {
    let mut agg = EncryptedAggregate { items: vec![None; n_items], attrs: vec![None; n_attrs], k };
    for b in bundles {
        for (slots, grads) in [(&mut agg.items, &b.q_grads), (&mut agg.attrs, &b.u_grads)] {
            for (idx, cs) in grads {
                if cs.len() != k {
                    return Err(FedError::Protocol(format!("user {} sent {} ciphertexts, expected {k}", b.user, cs.len())));
                }
                let slot = slots
                    .get_mut(*idx)
                    .ok_or_else(|| FedError::Protocol(format!("user {} sent index {idx} out of range", b.user)))?;
                match slot {
                    Some(acc) => add_assign_values(acc, cs, pk)?,
                    None => *slot = Some(cs.clone()),
                }
            }
        }
    }
    Ok(agg)
}

fn encrypt_bundle<R: Rng + ?Sized>(
    b: &mvmf_core::PlainBundle<f64>,
    bound: f64,
    encoding: &Encoding,
    pk: &PublicKey,
    rng: &mut R,
) -> Result<EncryptedBundle> {
    let mut enc = |grads: &[(usize, DVector<f64>)]| -> Result<Vec<(usize, Vec<Ciphertext>)>> {
        grads
            .iter()
            .map(|(idx, g)| Ok((*idx, encrypt_values(g.as_slice(), bound, encoding, pk, rng)?)))
            .collect()
    };
    let q_grads = enc(&b.q_grads)?;
    let u_grads = enc(&b.u_grads)?;
    Ok(EncryptedBundle { user: b.user, q_grads, u_grads })
}

#[derive(Debug, Clone)]
pub struct PrivConfig {
    pub epochs: usize,
    pub seed: u64,
    pub clip_bound: f64,
    pub encoding: Encoding,
    /// Keep each epoch's decrypted `(q_sum, u_sum)`.
    pub record_aggregates: bool,
}

impl PrivConfig {
    pub fn new(epochs: usize, seed: u64) -> Self {
        Self { epochs, seed, clip_bound: DEFAULT_CLIP_BOUND, encoding: Encoding::default(), record_aggregates: false }
    }
}

#[derive(Debug, Clone)]
pub struct PrivRun {
    pub run: TrainedRun,
    pub aggregates: Vec<(DMatrix<f64>, DMatrix<f64>)>,
}

/// Encrypted training. Clients use the SemiALS update and the Sampled scheme;
/// the item server stays plaintext.
pub fn run_privmvmf(
    data: &RatingDataset<f64>,
    hp: &Hyperparameters,
    w: &WeightScheme<f64>,
    pool: &DecrypterPool,
    keys: &KeyPair,
    cfg: &PrivConfig,
) -> Result<PrivRun> {
    check_inputs(data, hp, w)?;
    if !matches!(w, WeightScheme::Sampled { .. }) {
        return Err(FedError::Config("encrypted training requires the sampled weight scheme".into()));
    }
    let pk = &keys.public;
    let n = data.n_users();
    if !cfg.encoding.has_headroom(pk, n, cfg.clip_bound) {
        return Err(FedError::Config(format!(
            "{}-bit key cannot hold a sum of {n} values bounded by {}",
            pk.bits(),
            cfg.clip_bound
        )));
    }
    let init = initial_model(data, hp.k, cfg.seed);
    let initial_objective = objective(data, &init, w, hp.lambda1, hp.lambda2)?;
    let mut clients: Vec<DVector<f64>> = (0..n).map(|i| init.p_row(i)).collect();
    let mut rngs: Vec<ChaCha8Rng> = (0..n)
        .map(|i| ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(cfg.seed, CIPHER_STREAM), i as u64)))
        .collect();
    let mut server = ServerState::new(init.u.clone(), init.q.clone(), hp);
    let mut v = init.v.clone();
    let mut uplink: InProcessQueue<EncryptedBundle> = InProcessQueue::new();
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut aggregates = Vec::new();
    info!("privmvmf: {} epochs, {}-bit key, {} decrypters", cfg.epochs, pk.bits(), pool.members().len());

    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        let (u_b, q_b) = (server.u.clone(), server.q.clone());

        let t = Instant::now();
        let (v_new, item_bundle) = item_server_round(data.item_feats(), &q_b, hp.lambda1, hp.lambda2)?;
        let item_time = t.elapsed().as_secs_f64();
        v = v_new;

        let t = Instant::now();
        for (user, (p, rng)) in clients.iter_mut().zip(rngs.iter_mut()).enumerate() {
            let plain = client_round(data, &q_b, &u_b, w, hp, user, UpdateMode::SemiAls, p, 0.0, rng)?;
            uplink.send(encrypt_bundle(&plain, cfg.clip_bound, &cfg.encoding, pk, rng)?)?;
        }
        let local = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let mut bundles = uplink.drain();
        if bundles.len() != n {
            return Err(FedError::Protocol(format!("{} uploads for {} users", bundles.len(), n)));
        }
        bundles.sort_by_key(|b| b.user);
        let agg = aggregate_encrypted(&bundles, data.n_items(), data.n_user_attrs(), hp.k, pk)?;
        let aggregation = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let (q_sum, u_sum) = pool.decrypt(&agg, keys, &cfg.encoding)?;
        let decryption = t.elapsed().as_secs_f64();

        let t = Instant::now();
        server.apply_sums(&q_sum, &u_sum, &item_bundle, hp)?;
        let server_update = item_time + t.elapsed().as_secs_f64();
        let epoch_time = start.elapsed().as_secs_f64();
        if cfg.record_aggregates {
            aggregates.push((q_sum, u_sum));
        }

        let model = assemble_model(&clients, &server, v.clone())?;
        let j = objective(data, &model, w, hp.lambda1, hp.lambda2)?;
        debug!("epoch {epoch}: J = {j:.6}, aggregation {aggregation:.3}s, decryption {decryption:.3}s");
        trace.push(EpochRecord {
            epoch,
            objective: j,
            timings: PhaseTimings {
                local_update: local,
                local_update_per_client: local / n as f64,
                aggregation,
                decryption: Some(decryption),
                server_update,
                epoch: epoch_time,
            },
        });
    }
    let model = if cfg.epochs == 0 { init } else { assemble_model(&clients, &server, v)? };
    Ok(PrivRun { run: TrainedRun { model, initial_objective, trace }, aggregates })
}

/// Equation and unknown counts of the server's view of one aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LeakageReport {
    pub equations: usize,
    pub variables: usize,
    pub underdetermined: bool,
}

pub const DEFAULT_LEAKAGE_RATIO: f64 = 5.0;

/// `(m + l_x) K` equations against `sum_i |O_i'| + n l_x` unknowns, where `O_i'`
/// is the rated plus sampled set. Flags when unknowns exceed `ratio` times equations.
pub fn leakage_report(data: &RatingDataset<f64>, sampled: &[BTreeSet<usize>], k: usize, ratio: f64) -> LeakageReport {
    let equations = (data.n_items() + data.n_user_attrs()) * k;
    let uploaded: usize = (0..data.n_users())
        .map(|i| data.user_ratings(i).len() + sampled.get(i).map_or(0, |s| s.len()))
        .sum();
    let variables = uploaded + data.n_users() * data.n_user_attrs();
    LeakageReport { equations, variables, underdetermined: variables as f64 > ratio * equations as f64 }
}

/// Adversary picks an item uniformly from a random user's `O_i'` and guesses
/// "rated"; returns the empirical success rate over `trials`.
pub fn membership_guess_rate(data: &RatingDataset<f64>, sampled: &[BTreeSet<usize>], trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..trials {
        let i = rng.gen_range(0..data.n_users());
        let rated = data.user_ratings(i);
        let extra = sampled.get(i).map_or(0, |s| s.len());
        let pick = rng.gen_range(0..rated.len() + extra);
        if pick < rated.len() {
            hits += 1;
        }
    }
    hits as f64 / trials.max(1) as f64
}
