//! Seeded generator of Ethereum-shaped datasets with Zipf-skewed address and
//! token popularity.
//!
//! One ChaCha stream drives the whole generation, so equal configurations
//! yield equal datasets (and equal exports) byte for byte.

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, Poisson, Zipf};
use serde::{Deserialize, Serialize};

use crate::chain_model::{
    AccountAddress, AddressRow, BalanceSnapshot, Block, ByteString, ChainDataset, Contract, HashId,
    Sighash, Token, TokenTransaction, Transaction, Wei, Withdrawal, DEFAULT_TOKEN_DECIMALS, U256,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_blocks: u64,
    pub start_number: u64,
    pub start_timestamp: u64,
    /// Seconds between consecutive blocks.
    pub block_interval: u64,
    pub mean_tx_per_block: f64,
    pub address_pool: usize,
    pub address_zipf_s: f64,
    pub n_tokens: usize,
    pub token_zipf_s: f64,
    /// Probability that a transaction carries token transfers.
    pub token_tx_prob: f64,
    /// Mean number of token transfers in a token-carrying transaction (≥ 1).
    pub token_tx_mean: f64,
    pub contract_fraction: f64,
    /// Expected withdrawals per block.
    pub withdrawal_rate: f64,
    pub initial_balance: Wei,
    /// Fraction of token names containing the substring "US".
    pub us_name_fraction: f64,
    pub zero_supply_fraction: f64,
    /// Upward shift of the transaction gas distribution per block. Zero
    /// keeps the distribution stationary.
    pub gas_drift_per_block: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            n_blocks: 100,
            start_number: 19_005_000,
            start_timestamp: 1_705_500_000,
            block_interval: 12,
            mean_tx_per_block: 100.0,
            address_pool: 5_000,
            address_zipf_s: 1.1,
            n_tokens: 200,
            token_zipf_s: 1.2,
            token_tx_prob: 0.3,
            token_tx_mean: 1.5,
            contract_fraction: 0.1,
            withdrawal_rate: 16.0,
            initial_balance: Wei(U256::exp10(20)),
            us_name_fraction: 0.1,
            zero_supply_fraction: 0.01,
            gas_drift_per_block: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid synth config: {0}")]
pub struct SynthConfigError(pub String);

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthConfigError> {
        let fail = |m: &str| Err(SynthConfigError(m.to_string()));
        if self.n_blocks < 1 {
            return fail("n_blocks must be at least 1");
        }
        if self.address_pool < 1 {
            return fail("address_pool must be at least 1");
        }
        if self.n_tokens > self.address_pool {
            return fail("n_tokens cannot exceed address_pool");
        }
        for (name, p) in [
            ("token_tx_prob", self.token_tx_prob),
            ("contract_fraction", self.contract_fraction),
            ("us_name_fraction", self.us_name_fraction),
            ("zero_supply_fraction", self.zero_supply_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return fail(&format!("{name} must lie in [0, 1]"));
            }
        }
        for (name, v) in [
            ("address_zipf_s", self.address_zipf_s),
            ("token_zipf_s", self.token_zipf_s),
            ("mean_tx_per_block", self.mean_tx_per_block),
            ("withdrawal_rate", self.withdrawal_rate),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(&format!("{name} must be a finite value >= 0"));
            }
        }
        if !(self.token_tx_mean >= 1.0 && self.token_tx_mean.is_finite()) {
            return fail("token_tx_mean must be >= 1");
        }
        Ok(())
    }
}

/// Draws `10^e` with `e` uniform in `[lo_exp, hi_exp]`, as an exact integer.
fn log_uniform(rng: &mut ChaCha8Rng, lo_exp: f64, hi_exp: f64) -> U256 {
    let e = lo_exp + (hi_exp - lo_exp) * rng.random::<f64>();
    let k = e.floor();
    let mantissa = (10f64.powf(e - k) * 1e15) as u64;
    let k = k as i64;
    if k >= 15 {
        U256::from(mantissa) * U256::exp10((k - 15) as usize)
    } else {
        U256::from(mantissa) / U256::exp10((15 - k) as usize)
    }
}

fn random_bytes<const N: usize>(rng: &mut ChaCha8Rng) -> [u8; N] {
    let mut b = [0u8; N];
    rng.fill(&mut b[..]);
    b
}

fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<u8> {
    let mut v = vec![0u8; len];
    rng.fill(&mut v[..]);
    v
}

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ne", "zor", "ta", "vi", "qua", "ren", "do", "pix", "el", "sha", "bo", "ly", "fin", "gra", "tu",
];

fn pseudo_word(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(2..=3);
    let mut w = String::new();
    for _ in 0..n {
        w.push_str(SYLLABLES[rng.random_range(0..SYLLABLES.len())]);
    }
    let mut c = w.chars();
    let first = c.next().unwrap().to_ascii_uppercase();
    std::iter::once(first).chain(c).collect()
}

/// Picks ranks from a Zipf law over `n` items (rank 0 is the hottest).
struct RankSampler(Option<Zipf<f64>>, usize);

impl RankSampler {
    fn new(n: usize, s: f64) -> Self {
        if n == 0 {
            return RankSampler(None, 0);
        }
        RankSampler(Some(Zipf::new(n as f64, s).expect("validated zipf parameters")), n)
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let z = self.0.as_ref().expect("sampling from an empty pool");
        (z.sample(rng) as usize).clamp(1, self.1) - 1
    }
}

struct Pool {
    addresses: Vec<AccountAddress>,
    /// Indices into `addresses` of externally owned accounts, in rank order.
    eoas: Vec<usize>,
    contracts: Vec<usize>,
    base_nonce: Vec<u64>,
}

fn build_pool(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Pool {
    let mut seen = HashSet::new();
    let mut addresses = Vec::with_capacity(cfg.address_pool);
    while addresses.len() < cfg.address_pool {
        let a = AccountAddress(random_bytes(rng));
        if seen.insert(a) {
            addresses.push(a);
        }
    }
    let mut eoas = Vec::new();
    let mut contracts = Vec::new();
    let mut base_nonce = vec![0; cfg.address_pool];
    for (i, nonce) in base_nonce.iter_mut().enumerate() {
        if i > 0 && rng.random_bool(cfg.contract_fraction) {
            contracts.push(i);
        } else {
            eoas.push(i);
            *nonce = 10f64.powf(7.0 * rng.random::<f64>()) as u64;
        }
    }
    Pool {
        addresses,
        eoas,
        contracts,
        base_nonce,
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<ChainDataset, SynthConfigError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pool = build_pool(cfg, &mut rng);
    let n_blocks = cfg.n_blocks;

    // Contracts: one or two versions, most deployed before the first block.
    let mut contracts: Vec<(Contract, Option<u64>)> = Vec::new();
    for &i in &pool.contracts {
        let versions = if rng.random_bool(0.05) { 2 } else { 1 };
        let mut created: Option<u64> = None;
        for version in 0..versions {
            let offset = if version == 0 {
                (!rng.random_bool(0.8)).then(|| rng.random_range(0..n_blocks))
            } else {
                Some(rng.random_range(created.unwrap_or(0)..n_blocks))
            };
            created = offset.or(created);
            let sighashes = (0..rng.random_range(0..8)).map(|_| Sighash(random_bytes(&mut rng))).collect();
            let len = rng.random_range(16..64);
            let bytecode = ByteString(random_vec(&mut rng, len));
            contracts.push((
                Contract {
                    address: pool.addresses[i],
                    version: version as u64,
                    function_sighashes: sighashes,
                    bytecode,
                    is_erc20: rng.random_bool(0.3),
                    is_erc721: rng.random_bool(0.05),
                    block_hash: None,
                },
                offset,
            ));
        }
    }

    // Tokens live at contract addresses where possible; token 0 always
    // predates the dataset so every block has an eligible token.
    let first_version_offset: BTreeMap<AccountAddress, Option<u64>> = contracts
        .iter()
        .filter(|(c, _)| c.version == 0)
        .map(|(c, off)| (c.address, *off))
        .collect();
    let mut token_hosts: Vec<usize> = pool.contracts.clone();
    token_hosts.extend(pool.eoas.iter().rev().copied());
    let mut tokens: Vec<(Token, Option<u64>)> = Vec::with_capacity(cfg.n_tokens);
    for (ti, &host) in token_hosts.iter().take(cfg.n_tokens).enumerate() {
        let address = pool.addresses[host];
        let offset = if ti == 0 {
            None
        } else {
            first_version_offset.get(&address).copied().flatten()
        };
        let symbol: String = (0..rng.random_range(3..=4))
            .map(|_| (b'A' + rng.random_range(0..26u8)) as char)
            .collect();
        let word = pseudo_word(&mut rng);
        let name = if rng.random_bool(cfg.us_name_fraction) {
            format!("{word} US Dollar")
        } else {
            format!("{word} Token")
        };
        let decimals = match rng.random_range(0..100) {
            0..=84 => Some(DEFAULT_TOKEN_DECIMALS),
            85..=94 => Some(6),
            _ => None,
        };
        let d = decimals.unwrap_or(DEFAULT_TOKEN_DECIMALS) as f64;
        let total_supply = if rng.random_bool(cfg.zero_supply_fraction) {
            U256::zero()
        } else {
            log_uniform(&mut rng, 6.0 + d, 12.0 + d)
        };
        tokens.push((
            Token {
                address,
                symbol,
                name,
                decimals,
                total_supply,
                block_hash: None,
            },
            offset,
        ));
    }

    let sender_ranks = RankSampler::new(pool.eoas.len(), cfg.address_zipf_s);
    let receiver_ranks = RankSampler::new(pool.addresses.len(), cfg.address_zipf_s);
    let token_ranks = RankSampler::new(tokens.len(), cfg.token_zipf_s);
    let tx_count = (cfg.mean_tx_per_block > 0.0).then(|| Poisson::new(cfg.mean_tx_per_block).unwrap());
    let wd_count = (cfg.withdrawal_rate > 0.0).then(|| Poisson::new(cfg.withdrawal_rate).unwrap());
    let extra_transfers = Geometric::new(1.0 / cfg.token_tx_mean).unwrap();

    let mut balances: Vec<Wei> = vec![cfg.initial_balance; pool.addresses.len()];
    let mut sent: Vec<u64> = vec![0; pool.addresses.len()];
    let index_of: BTreeMap<AccountAddress, usize> =
        pool.addresses.iter().enumerate().map(|(i, a)| (*a, i)).collect();

    let mut ds = ChainDataset::default();
    let mut withdrawal_index = 0u64;
    let mut block_hashes: HashSet<HashId> = HashSet::new();
    let mut tx_hashes: HashSet<HashId> = HashSet::new();

    for k in 0..n_blocks {
        let hash = loop {
            let h = HashId(random_bytes(&mut rng));
            if block_hashes.insert(h) {
                break h;
            }
        };
        let extra_len = rng.random_range(0..=32);
        let block = Block {
            hash,
            number: cfg.start_number + k,
            timestamp: cfg.start_timestamp + k * cfg.block_interval,
            extra_data: ByteString(random_vec(&mut rng, extra_len)),
            base_fee_per_gas: Wei::from_u64(rng.random_range(1_000_000_000..100_000_000_000)),
            size: rng.random_range(1_000..200_000),
            miner: pool.addresses[pool.eoas[sender_ranks.sample(&mut rng)]],
        };
        for (c, off) in contracts.iter_mut() {
            if *off == Some(k) {
                c.block_hash = Some(hash);
            }
        }
        for (t, off) in tokens.iter_mut() {
            if *off == Some(k) {
                t.block_hash = Some(hash);
            }
        }

        let n_tx = tx_count.as_ref().map_or(0, |p| p.sample(&mut rng) as u64);
        let mut log_index = 0u64;
        for j in 0..n_tx {
            let from_i = pool.eoas[sender_ranks.sample(&mut rng)];
            let to_i = if rng.random_bool(0.03) {
                None
            } else {
                Some(receiver_ranks.sample(&mut rng))
            };
            let value = match to_i {
                None => Wei::ZERO,
                Some(_) => Wei(log_uniform(&mut rng, 12.0, 19.0).min(balances[from_i].0)),
            };
            let carries_tokens = !tokens.is_empty() && rng.random_bool(cfg.token_tx_prob);
            let input = if carries_tokens || to_i.is_some_and(|t| pool.contracts.binary_search(&t).is_ok()) {
                let words = rng.random_range(0..4);
                ByteString(random_vec(&mut rng, 4 + 32 * words))
            } else {
                ByteString::default()
            };
            let tx_hash = loop {
                let h = HashId(random_bytes(&mut rng));
                if tx_hashes.insert(h) {
                    break h;
                }
            };
            let tx = Transaction {
                hash: tx_hash,
                transaction_index: j,
                value,
                from_address: pool.addresses[from_i],
                to_address: to_i.map(|t| pool.addresses[t]),
                gas: 21_000 + rng.random_range(0..200_000) + cfg.gas_drift_per_block * k,
                max_priority_fee_per_gas: rng
                    .random_bool(0.7)
                    .then(|| Wei::from_u64(rng.random_range(100_000_000..5_000_000_000))),
                input,
                block_hash: hash,
                transaction_type: match rng.random_range(0..100) {
                    0..=19 => 0,
                    20..=24 => 1,
                    _ => 2,
                },
                nonce: pool.base_nonce[from_i] + sent[from_i],
            };
            sent[from_i] += 1;
            balances[from_i] = balances[from_i].checked_sub(value).expect("value capped by balance");
            if let Some(t) = to_i {
                balances[t] = balances[t].checked_add(value).expect("balance overflow");
            }

            if carries_tokens {
                let n = 1 + extra_transfers.sample(&mut rng);
                for _ in 0..n {
                    let mut ti = token_ranks.sample(&mut rng);
                    while tokens[ti].1.is_some_and(|off| off > k) {
                        ti = (ti + 1) % tokens.len();
                    }
                    ds.token_transactions.push(TokenTransaction {
                        transaction_hash: tx_hash,
                        log_index,
                        token_address: tokens[ti].0.address,
                        value: log_uniform(&mut rng, 6.0, 24.0),
                    });
                    log_index += 1;
                }
            }
            ds.transactions.push(tx);
        }

        let n_wd = wd_count.as_ref().map_or(0, |p| p.sample(&mut rng) as u64);
        for _ in 0..n_wd {
            let a = pool.eoas[sender_ranks.sample(&mut rng)];
            let amount = Wei(log_uniform(&mut rng, 15.0, 19.5));
            balances[a] = balances[a].checked_add(amount).expect("balance overflow");
            ds.withdrawals.push(Withdrawal {
                hash,
                withdrawal_index,
                validator: rng.random_range(0..1_000_000),
                address: pool.addresses[a],
                amount,
            });
            withdrawal_index += 1;
        }
        ds.blocks.push(block);
    }

    ds.contracts = contracts.into_iter().map(|(c, _)| c).collect();
    ds.tokens = tokens.into_iter().map(|(t, _)| t).collect();
    ds.addresses = pool
        .addresses
        .iter()
        .map(|a| AddressRow {
            address: *a,
            eth_balance: balances[index_of[a]],
        })
        .collect();
    ds.final_balances = BalanceSnapshot {
        as_of_block: cfg.start_number + n_blocks - 1,
        balances: ds.addresses.iter().map(|r| (r.address, r.eth_balance)).collect(),
    };
    ds.canonicalize();
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_model::validate_dataset;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            seed,
            n_blocks: 10,
            start_number: 0,
            mean_tx_per_block: 20.0,
            address_pool: 200,
            n_tokens: 20,
            withdrawal_rate: 2.0,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn numbers_blocks_from_start() {
        let ds = generate(&small(1)).unwrap();
        let numbers: Vec<u64> = ds.blocks.iter().map(|b| b.number).collect();
        assert_eq!(numbers, (0..10).collect::<Vec<_>>());
        let ts: Vec<u64> = ds.blocks.iter().map(|b| b.timestamp).collect();
        assert!(ts.windows(2).all(|w| w[1] - w[0] == 12));
        assert_eq!(ds.final_balances.as_of_block, 9);
    }

    #[test]
    fn deterministic_for_equal_config() {
        assert_eq!(generate(&small(7)).unwrap(), generate(&small(7)).unwrap());
        assert_ne!(generate(&small(7)).unwrap(), generate(&small(8)).unwrap());
    }

    #[test]
    fn hundred_blocks_validate_clean() {
        let cfg = SynthConfig {
            n_blocks: 100,
            mean_tx_per_block: 15.0,
            address_pool: 300,
            n_tokens: 40,
            ..small(3)
        };
        let ds = generate(&cfg).unwrap();
        let report = validate_dataset(&ds);
        assert!(report.is_clean(), "{:?}", &report.violations[..report.violations.len().min(5)]);
    }

    #[test]
    fn ledger_sum_is_conserved() {
        let cfg = small(11);
        let ds = generate(&cfg).unwrap();
        // Independent ledger: initial balances plus every withdrawal; value
        // transfers only move wei between addresses.
        let mut expected = cfg.initial_balance.0 * U256::from(cfg.address_pool);
        for w in &ds.withdrawals {
            expected += w.amount.0;
        }
        let mut total = U256::zero();
        for b in ds.final_balances.balances.values() {
            total += b.0;
        }
        assert_eq!(total, expected);
        // Contract-creation transactions carry no value.
        assert!(ds.transactions.iter().filter(|t| t.to_address.is_none()).all(|t| t.value.is_zero()));
    }

    #[test]
    fn final_balances_match_replayed_flows() {
        let cfg = small(5);
        let ds = generate(&cfg).unwrap();
        let mut bal: BTreeMap<AccountAddress, U256> =
            ds.addresses.iter().map(|a| (a.address, cfg.initial_balance.0)).collect();
        for t in &ds.transactions {
            *bal.get_mut(&t.from_address).unwrap() -= t.value.0;
            if let Some(to) = t.to_address {
                *bal.get_mut(&to).unwrap() += t.value.0;
            }
        }
        for w in &ds.withdrawals {
            *bal.get_mut(&w.address).unwrap() += w.amount.0;
        }
        for (a, b) in &bal {
            assert_eq!(ds.final_balances.get(a).0, *b);
        }
    }

    #[test]
    fn sender_popularity_is_skewed() {
        let cfg = SynthConfig {
            n_blocks: 120,
            mean_tx_per_block: 100.0,
            address_pool: 1_000,
            address_zipf_s: 1.1,
            contract_fraction: 0.0,
            ..small(42)
        };
        let ds = generate(&cfg).unwrap();
        assert!(ds.transactions.len() >= 10_000);
        let mut counts: BTreeMap<AccountAddress, usize> = BTreeMap::new();
        for t in &ds.transactions {
            *counts.entry(t.from_address).or_default() += 1;
        }
        let mut c: Vec<usize> = counts.values().copied().collect();
        c.sort_unstable();
        let median = c[c.len() / 2];
        let top = *c.last().unwrap();
        assert!(top >= 5 * median, "top {top} median {median}");
    }

    #[test]
    fn token_names_split_on_us() {
        let cfg = SynthConfig {
            n_tokens: 200,
            address_pool: 400,
            ..small(9)
        };
        let ds = generate(&cfg).unwrap();
        let us = ds.tokens.iter().filter(|t| t.name.contains("US")).count();
        assert!(us > 5 && us < 50, "{us}");
        assert!(ds.tokens.iter().any(|t| t.total_supply.is_zero()) || cfg.zero_supply_fraction < 0.05);
    }

    #[test]
    fn rejects_invalid_config() {
        assert!(generate(&SynthConfig { n_blocks: 0, ..small(1) }).is_err());
        assert!(generate(&SynthConfig { token_tx_prob: 1.5, ..small(1) }).is_err());
    }

    #[test]
    fn gas_drift_moves_distribution() {
        let cfg = SynthConfig {
            n_blocks: 50,
            gas_drift_per_block: 10_000,
            ..small(2)
        };
        let ds = generate(&cfg).unwrap();
        let by_block: BTreeMap<HashId, u64> = ds.blocks.iter().map(|b| (b.hash, b.number)).collect();
        let mean = |lo: u64, hi: u64| {
            let g: Vec<u64> = ds
                .transactions
                .iter()
                .filter(|t| (lo..hi).contains(&by_block[&t.block_hash]))
                .map(|t| t.gas)
                .collect();
            g.iter().sum::<u64>() as f64 / g.len() as f64
        };
        assert!(mean(40, 50) > mean(0, 10) + 300_000.0);
    }
}
