//! Index-build and search scaling sweep.
//!
//! For each pair count, a [`scaling_corpus`] is published under scheme B and
//! every keyword is searched once. Operation counts are the portable metric;
//! wall times are informational.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::chain::{ChainConfig, Ledger, Wallet};
use crate::crypto::{KeyBundle, Keypair};
use crate::sse::{derive_trapdoor, phi_search, publish_corpus, PublishedIndex, Scheme, SseError};
use crate::workload::scaling_corpus;

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub pair_counts: Vec<usize>,
    pub keywords: usize,
    pub per_doc: usize,
    pub chain: ChainConfig,
    pub security_bits: u32,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            pair_counts: vec![100, 200, 400, 800],
            keywords: 10,
            per_doc: 2,
            chain: ChainConfig::default(),
            security_bits: 256,
            seed: 0,
        }
    }
}

/// One sample: an index size and one searched keyword.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub pairs: usize,
    pub keywords: usize,
    pub build_ops: u64,
    pub build_ms: f64,
    /// Insertion position of the searched keyword, from 1.
    pub position: usize,
    pub hops: usize,
    pub search_reads: u64,
    pub search_us: f64,
}

pub const TSV_HEADER: &str = "pairs\tkeywords\tbuild_ops\tbuild_ms\tposition\thops\tsearch_reads\tsearch_us";

impl SweepRow {
    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{}\t{}\t{:.3}\t{}\t{}\t{}\t{:.1}",
            self.pairs,
            self.keywords,
            self.build_ops,
            self.build_ms,
            self.position,
            self.hops,
            self.search_reads,
            self.search_us
        )
    }
}

pub fn to_tsv(rows: &[SweepRow]) -> String {
    let mut out = String::from(TSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_tsv());
        out.push('\n');
    }
    out
}

/// Publishes a scaling corpus with `pairs` pairs on a fresh ledger.
pub fn build(config: &SweepConfig, pairs: usize) -> Result<(Ledger, KeyBundle, PublishedIndex, f64), SseError> {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&config.seed.to_le_bytes());
    let keys = KeyBundle::from_seed(config.security_bits, seed)?;
    let owner = Wallet::new(Keypair::from_seed(seed), 0);
    let mut ledger = Ledger::genesis(config.chain.clone(), &[(owner.public(), u64::MAX / 2)])?;
    let corpus = scaling_corpus(pairs, config.keywords, config.per_doc);
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed ^ pairs as u64);
    let start = Instant::now();
    let index = publish_corpus(&mut ledger, &owner, &keys, &corpus, Scheme::B, &mut rng)?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    Ok((ledger, keys, index, ms))
}

pub fn run(config: &SweepConfig) -> Result<Vec<SweepRow>, SseError> {
    let mut rows = vec![];
    for &pairs in &config.pair_counts {
        let (ledger, keys, index, build_ms) = build(config, pairs)?;
        let p = ledger.txid_bytes();
        for (j, w) in index.posting_lists.keys().enumerate() {
            let td = derive_trapdoor(&keys, w, Scheme::B, p);
            ledger.reset_reads();
            let start = Instant::now();
            let r = phi_search(&ledger, &td, &index.broadcast.locator)?;
            let search_us = start.elapsed().as_secs_f64() * 1e6;
            rows.push(SweepRow {
                pairs,
                keywords: config.keywords,
                build_ops: index.stats.op_count(),
                build_ms,
                position: j + 1,
                hops: r.hops,
                search_reads: ledger.reads(),
                search_us,
            });
        }
    }
    Ok(rows)
}

/// Least-squares line `y = a + b x`; returns `(a, b, r²)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (a, b, r2)
}
