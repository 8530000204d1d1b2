//! Fixtures shared by the criterion benches in `benches/`.

use ssebc_core::chain::Ledger;
use ssebc_core::crypto::KeyBundle;
use ssebc_core::sse::{derive_trapdoor, PublishedIndex, Scheme, Trapdoor};
use ssebc_core::sweep::{self, SweepConfig};

pub const PAIR_COUNTS: [usize; 4] = [100, 200, 400, 800];

/// A published scheme B index plus one trapdoor per keyword, in insertion order.
pub struct Fixture {
    pub ledger: Ledger,
    pub index: PublishedIndex,
    pub trapdoors: Vec<Trapdoor>,
}

pub fn fixture(config: &SweepConfig, pairs: usize) -> Fixture {
    let (ledger, keys, index, _): (Ledger, KeyBundle, PublishedIndex, f64) =
        sweep::build(config, pairs).expect("sweep build");
    let p = ledger.txid_bytes();
    let trapdoors = index.posting_lists.keys().map(|w| derive_trapdoor(&keys, w, Scheme::B, p)).collect();
    Fixture {
        ledger,
        index,
        trapdoors,
    }
}
