//! Acceptance suite: one PASS/FAIL line per criterion.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use ssebc_core::chain::*;
use ssebc_core::crypto::*;
use ssebc_core::protocol::*;
use ssebc_core::sse::*;
use ssebc_core::sweep::{self, linear_fit, SweepConfig};
use ssebc_core::workload::{random_corpus, CorpusShape};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Equal entry serializations and posting lists of length Δ.
fn flattened(idx: &PublishedIndex) -> Result<(), String> {
    let lens: BTreeSet<usize> = idx.entries.iter().map(|e| e.to_bytes().len()).collect();
    ensure(lens.len() <= 1, || format!("entry lengths {lens:?}"))?;
    let delta = idx.delta();
    ensure(idx.posting_lists.values().all(|p| p.delta() == delta), || "posting list lengths differ".into())
}

fn fresh_ledger(iota: usize, owner: &Wallet) -> Ledger {
    let cfg = ChainConfig {
        embed_limit: iota,
        ..ChainConfig::default()
    };
    Ledger::genesis(cfg, &[(owner.public(), u64::MAX / 4)]).unwrap()
}

/// Returns the number of indexes checked for size flattening.
fn correctness(flat: &mut usize) -> Check {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(0xacce);
    let (mut queries, mut chunked, mut whole) = (0usize, 0usize, 0usize);
    for round in 0..100 {
        let corpus = random_corpus(&mut rng, CorpusShape::default());
        let keys = KeyBundle::from_seed(256, rng.gen()).unwrap();
        let owner = Wallet::new(Keypair::from_seed(rng.gen()), 0);
        for (scheme, iota) in [(Scheme::A, 1 << 20), (Scheme::B, 120)] {
            let mut ledger = fresh_ledger(iota, &owner);
            let idx = publish_corpus(&mut ledger, &owner, &keys, &corpus, scheme, &mut rng)
                .map_err(|e| format!("round {round} {scheme}: {e}"))?;
            flattened(&idx).map_err(|e| format!("round {round} {scheme}: {e}"))?;
            *flat += 1;
            if scheme == Scheme::B {
                for id in idx.doc_txids.values() {
                    let (_, n) = read_blob(&ledger, id).unwrap();
                    if n > 1 {
                        chunked += 1
                    } else {
                        whole += 1
                    }
                }
            }
            for w in &corpus.dictionary {
                let td = derive_trapdoor(&keys, w, scheme, ledger.txid_bytes());
                let got = phi_search(&ledger, &td, &idx.broadcast.locator)
                    .and_then(|r| decrypt_results(&keys, &r.ciphertexts))
                    .map_err(|e| format!("round {round} {scheme} {w}: {e}"))?;
                let expected: Vec<Vec<u8>> = corpus
                    .matching(w)
                    .iter()
                    .map(|d| corpus.document(*d).unwrap().plaintext.clone())
                    .collect();
                ensure(got == expected, || format!("round {round} {scheme} {w}: result differs from oracle"))?;
                queries += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(chunked > 0 && whole > 0, || "corpora did not mix chunked and whole documents".into())?;
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!(
        "100 corpora x 2 schemes, {queries} queries exact ({chunked} chunked / {whole} whole docs), {secs:.1}s"
    ))
}

struct Party {
    ledger: Ledger,
    keys: KeyBundle,
    uprime: Wallet,
    q: Wallet,
    index: PublishedIndex,
}

fn protocol_world(scheme: Scheme, iota: usize) -> Party {
    let keys = KeyBundle::from_seed(256, [11; 32]).unwrap();
    let owner = Wallet::new(Keypair::from_seed([12; 32]), 0);
    let uprime = Wallet::new(Keypair::from_seed([13; 32]), 0);
    let q = Wallet::new(Keypair::from_seed([14; 32]), 0);
    let cfg = ChainConfig {
        embed_limit: iota,
        ..ChainConfig::default()
    };
    let alloc = [(owner.public(), 1_000_000), (uprime.public(), 1_000), (q.public(), 1_000)];
    let mut ledger = Ledger::genesis(cfg, &alloc).unwrap();
    register(&mut ledger);
    let corpus = Corpus::new(vec![
        Document::from_text(1, "alpha w one"),
        Document::from_text(2, "beta two"),
        Document::from_text(3, "w gamma three"),
        Document::from_text(4, "delta w four and a longer tail so that this one is chunked under scheme b"),
    ]);
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let index = publish_corpus(&mut ledger, &owner, &keys, &corpus, scheme, &mut rng).unwrap();
    Party {
        ledger,
        keys,
        uprime,
        q,
        index,
    }
}

fn ask(p: &mut Party, w: &str, deadline: u64) -> Result<(AskOffer, FuseRefund), ProtocolError> {
    let params = AskParams {
        keyword: w.into(),
        deposit: 25,
        deadline,
        max_delay: 2,
    };
    make_ask(&mut p.ledger, &p.uprime, &p.keys, &p.index.broadcast, p.q.public(), &p.q, &params)
}

fn penalty() -> Check {
    let (mut cases, mut accepted, mut refunded) = (0usize, 0usize, 0usize);
    for (scheme, iota) in [(Scheme::A, 4096), (Scheme::B, 80)] {
        let mut p = protocol_world(scheme, iota);
        let u0 = p.ledger.balance(&p.uprime.public());
        let deadline = p.ledger.clock() + 10;
        let (offer, fuse) = ask(&mut p, "w", deadline).map_err(|e| e.to_string())?;
        p.ledger.mine_block();
        let r = phi_search(&p.ledger, offer.trapdoor(), &offer.payload.locator).map_err(|e| e.to_string())?;
        ensure(r.ciphertexts.len() == 3, || "expected a 3-match keyword".into())?;
        let honest = ReturnPayload {
            ciphertexts: r.ciphertexts,
            digest: r.digest,
        };

        let mut adversarial = vec![];
        for i in 0..3 {
            for b in 0..honest.ciphertexts[i].len() {
                let mut t = honest.clone();
                t.ciphertexts[i][b] ^= 0x01;
                adversarial.push(t);
            }
        }
        for b in 0..honest.digest.len() {
            let mut t = honest.clone();
            t.digest[b] ^= 0x01;
            adversarial.push(t);
        }
        for mask in 0..7u32 {
            let sub: Vec<Vec<u8>> = (0..3).filter(|i| mask & (1 << i) != 0).map(|i| honest.ciphertexts[i].clone()).collect();
            let recomputed = keyed_hash(&offer.trapdoor().mac_key, &sub.concat());
            for digest in [honest.digest.clone(), recomputed] {
                adversarial.push(ReturnPayload {
                    ciphertexts: sub.clone(),
                    digest,
                });
            }
        }

        let snapshot = p.ledger.to_bytes();
        for payload in adversarial {
            cases += 1;
            let mut ledger = Ledger::from_bytes(&snapshot).unwrap();
            register(&mut ledger);
            let claim = build_return(&ledger, &p.q, &offer, payload);
            if submit_return(&mut ledger, &claim).is_ok() {
                accepted += 1;
                ledger.mine_block();
            }
            ledger.advance_to(deadline);
            if refund_after_timeout(&mut ledger, &fuse).is_ok() {
                ledger.mine_block();
            }
            if matches!(settlement(&ledger, &offer), Settlement::Refunded(_)) && ledger.balance(&p.uprime.public()) == u0 {
                refunded += 1;
            }
        }
    }
    ensure(accepted == 0, || format!("{accepted} adversarial returns accepted"))?;
    ensure(refunded == cases, || format!("deposit recovered in {refunded}/{cases} runs"))?;
    Ok(format!("{cases} tamper/subset cases, 0 accepted, {refunded}/{cases} refunded via Fuse"))
}

fn timeouts() -> Check {
    // (a) ask never mined: abort recovers T_q.
    let mut p = protocol_world(Scheme::A, 4096);
    let u0 = p.ledger.balance(&p.uprime.public());
    let deadline = p.ledger.clock() + 8;
    let (offer, _) = ask(&mut p, "w", deadline).map_err(|e| e.to_string())?;
    p.ledger.withhold(&offer.ask_txid);
    p.ledger.advance_to(deadline - offer.max_delay);
    let refund = abort_before_inclusion(&mut p.ledger, &p.uprime, &offer).map_err(|e| format!("(a) {e}"))?;
    p.ledger.mine_block();
    p.ledger.release(&offer.ask_txid);
    let s = p.ledger.mine_block();
    ensure(p.ledger.is_mined(&refund) && !p.ledger.is_mined(&offer.ask_txid), || "(a) ask or refund state wrong".into())?;
    ensure(s.rejected.iter().any(|(id, r)| *id == offer.ask_txid && matches!(r, Reject::DoubleSpend(_))), || {
        "(a) late ask not rejected as double spend".into()
    })?;
    ensure(p.ledger.balance(&p.uprime.public()) == u0, || "(a) balance not restored".into())?;

    // (b) no return by t: Fuse refunds U′. (c) Fuse before t: locktime rejection.
    let mut p = protocol_world(Scheme::B, 80);
    let u0 = p.ledger.balance(&p.uprime.public());
    let deadline = p.ledger.clock() + 8;
    let (offer, fuse) = ask(&mut p, "w", deadline).map_err(|e| e.to_string())?;
    p.ledger.mine_block();
    let early = refund_after_timeout(&mut p.ledger, &fuse);
    ensure(matches!(early, Err(ProtocolError::LocktimeNotReached { .. })), || format!("(c) got {early:?}"))?;
    p.ledger.advance_to(deadline);
    refund_after_timeout(&mut p.ledger, &fuse).map_err(|e| format!("(b) {e}"))?;
    p.ledger.mine_block();
    ensure(matches!(settlement(&p.ledger, &offer), Settlement::Refunded(_)), || "(b) not refunded".into())?;
    ensure(p.ledger.balance(&p.uprime.public()) == u0, || "(b) balance not restored".into())?;
    Ok("(a) abort recovers T_q, (b) Fuse refunds after t, (c) early Fuse rejected on locktime".into())
}

fn chunking() -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    for i in 0..1000 {
        let p = rng.gen_range(1..=64);
        let iota = p + rng.gen_range(1..=512);
        let len = if i % 10 == 0 { rng.gen_range(0..=1 << 20) } else { rng.gen_range(0..=8192) };
        let mut c = vec![0u8; len];
        rng.fill(&mut c[..]);
        let plan = chunk_ciphertext(&c, iota, p).map_err(|e| e.to_string())?;
        ensure(plan.s() == len.div_ceil(iota - p), || format!("len {len} iota {iota} p {p}: s = {}", plan.s()))?;
        ensure(plan.chunks.iter().all(|x| x.len() + p <= iota), || "chunk exceeds limit".into())?;
        ensure(reassemble(&plan.chunks) == c, || format!("len {len}: reassembly differs"))?;
    }
    Ok("1000 random (len, iota, p): s = ceil(len/(iota-p)), reassemble(chunk(C)) = C".into())
}

fn scaling(flat: &mut usize) -> Check {
    let cfg = SweepConfig::default();
    let rows = sweep::run(&cfg).map_err(|e| e.to_string())?;
    let mut xs = vec![];
    let mut ys = vec![];
    for &pairs in &cfg.pair_counts {
        let r = rows.iter().find(|r| r.pairs == pairs).unwrap();
        xs.push(pairs as f64);
        ys.push(r.build_ops as f64);
    }
    let (_, slope, r2) = linear_fit(&xs, &ys);
    ensure(r2 >= 0.99, || format!("op-count fit r2 = {r2:.5}"))?;
    for &pairs in &cfg.pair_counts {
        let (_, _, idx, _) = sweep::build(&cfg, pairs).map_err(|e| e.to_string())?;
        flattened(&idx)?;
        *flat += 1;
    }

    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let mut checked = 0;
    for m in [1usize, 2, 3, 8, 17, 32, 64] {
        let keys = KeyBundle::from_seed(256, rng.gen()).unwrap();
        let owner = Wallet::new(Keypair::from_seed(rng.gen()), 0);
        let mut ledger = fresh_ledger(80, &owner);
        let mut kws: Vec<String> = (0..m).map(|i| format!("k{i:03}")).collect();
        let docs = (1..=10u64)
            .map(|d| {
                kws.shuffle(&mut rng);
                Document::new(d, format!("doc {d}"), kws[..rng.gen_range(0..=m.min(4))].to_vec())
            })
            .collect();
        let corpus = Corpus::new(docs).with_dictionary(kws.clone());
        let idx = publish_corpus(&mut ledger, &owner, &keys, &corpus, Scheme::B, &mut rng).map_err(|e| e.to_string())?;
        flattened(&idx)?;
        *flat += 1;
        for (pos, w) in corpus.dictionary.iter().enumerate() {
            let j = pos + 1;
            let td = derive_trapdoor(&keys, w, Scheme::B, ledger.txid_bytes());
            let r = phi_search(&ledger, &td, &idx.broadcast.locator).map_err(|e| e.to_string())?;
            ensure(r.hops == m - j + 1, || format!("m={m} j={j}: hops {}", r.hops))?;
            checked += 1;
        }
    }
    Ok(format!(
        "op-count vs pairs {:?}: slope {slope:.2}, r2 = {r2:.5}; hops = m-j+1 for {checked} keywords, m <= 64",
        cfg.pair_counts
    ))
}

fn random_script<R: Rng>(rng: &mut R, scheme: Scheme) -> String {
    let words = ["a", "b", "c", "d"];
    let mut s = String::new();
    for id in 1..=rng.gen_range(1..=5) {
        let n = rng.gen_range(0..=3);
        let kws: Vec<&str> = words.choose_multiple(rng, n).copied().collect();
        let kws = if kws.is_empty() { "-".to_string() } else { kws.join(",") };
        s += &format!("owner doc {id} {kws} text {id} {}\n", "x".repeat(rng.gen_range(0..120)));
    }
    s += &format!("owner index {scheme}\n");
    let mut asks = 0;
    for _ in 0..rng.gen_range(5..25) {
        let offer = |rng: &mut R| rng.gen_range(1..=asks.max(1));
        let line = match rng.gen_range(0..12) {
            0 | 1 => {
                asks += 1;
                let w = ["a", "b", "c", "d", "zz"].choose(rng).unwrap();
                let cosign = if rng.gen_bool(0.1) { " cosign=no" } else { "" };
                format!(
                    "uprime ask {w} {} t=+{} max_delay={}{cosign}",
                    rng.gen_range(2..50),
                    rng.gen_range(4..12),
                    rng.gen_range(1..3)
                )
            }
            2 | 3 => format!("world mine {}", rng.gen_range(0..4)),
            _ if asks == 0 => "world mine 1".into(),
            4 | 5 => format!("q fulfill offer-{}", offer(rng)),
            6 => format!("q tamper offer-{} byte={}", offer(rng), rng.gen_range(0..500)),
            7 => format!("q subset offer-{}", offer(rng)),
            8 => format!("uprime refund offer-{}", offer(rng)),
            9 => format!("uprime abort offer-{}", offer(rng)),
            10 => format!("world withhold offer-{}", offer(rng)),
            _ => format!("world release offer-{}", offer(rng)),
        };
        s += &line;
        s.push('\n');
    }
    s
}

/// Runs one script, checking conservation after every step, then settles
/// every open offer and checks spend invariants. Returns the transcript and
/// final ledger bytes for the replay comparison.
fn run_checked(cfg: &scenario::ScenarioConfig, script: &str) -> Result<(String, Vec<u8>, [usize; 2]), String> {
    let steps = scenario::parse_script(script).map_err(|e| e.to_string())?;
    let mut s = Scenario::new(cfg.clone()).map_err(|e| e.to_string())?;
    for step in &steps {
        let rec = s.apply(step).clone();
        let l = &s.ledger;
        ensure(l.utxo_value() + l.total_fees() == l.total_minted(), || format!("conservation broken at step {}", rec.step))?;
        if matches!(step, Step::Tamper { .. } | Step::Subset(_)) {
            ensure(rec.outcome != "ok", || format!("adversarial return accepted at step {}", rec.step))?;
        }
    }
    // Settle: release everything, pass every deadline, fire every Fuse.
    let offers: Vec<_> = s.offers.iter().flatten().cloned().collect();
    for o in &offers {
        s.ledger.release(&o.offer.ask_txid);
    }
    s.ledger.mine_block();
    let last = offers.iter().map(|o| o.offer.deadline()).max().unwrap_or(0);
    s.ledger.advance_to(last);
    for o in &offers {
        let _ = refund_after_timeout(&mut s.ledger, &o.fuse);
    }
    s.ledger.mine_block();

    let l = &s.ledger;
    ensure(l.utxo_value() + l.total_fees() == l.total_minted(), || "conservation broken after settlement".into())?;
    for block in l.blocks() {
        for tx in &block.txs {
            if !tx.is_coinbase() {
                ensure(l.validate(tx).is_err(), || "replayed transaction accepted".into())?;
            }
        }
    }
    for o in &offers {
        if !l.is_mined(&o.offer.ask_txid) {
            continue;
        }
        let op = o.offer.outpoint();
        let spends: Vec<(u64, &Transaction)> = l
            .blocks()
            .iter()
            .flat_map(|b| b.txs.iter().map(move |t| (b.time, t)))
            .filter(|(_, t)| t.inputs.iter().any(|i| i.prev == op))
            .collect();
        ensure(spends.len() == 1, || format!("deposit spent {} times", spends.len()))?;
        let (time, tx) = spends[0];
        if l.txid(tx) == o.fuse.txid {
            ensure(time >= o.offer.deadline(), || "Fuse mined before its deadline".into())?;
        }
    }
    let mut settled = [0, 0];
    for o in &offers {
        match settlement(l, &o.offer) {
            Settlement::Returned(..) => settled[0] += 1,
            Settlement::Refunded(_) => settled[1] += 1,
            Settlement::Open => {}
        }
    }
    Ok((s.transcript_jsonl(), s.ledger.to_bytes(), settled))
}

fn ledger_safety() -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let mut steps = 0;
    let mut settled = [0, 0];
    for i in 0..1000u64 {
        let scheme = if rng.gen_bool(0.5) { Scheme::A } else { Scheme::B };
        let mut cfg = scenario::ScenarioConfig {
            seed: i,
            fee: rng.gen_range(0..2),
            ..Default::default()
        };
        cfg.chain.embed_limit = if scheme == Scheme::A { 4096 } else { *[80usize, 200].choose(&mut rng).unwrap() };
        let script = random_script(&mut rng, scheme);
        let (t1, l1, n) = run_checked(&cfg, &script).map_err(|e| format!("scenario {i}: {e}\n{script}"))?;
        let (t2, l2, _) = run_checked(&cfg, &script).map_err(|e| format!("scenario {i} replay: {e}"))?;
        settled[0] += n[0];
        settled[1] += n[1];
        ensure(t1 == t2 && l1 == l2, || format!("scenario {i}: replay differs"))?;
        steps += t1.lines().count();
    }
    ensure(settled[0] > 0 && settled[1] > 0, || format!("settlements {settled:?} miss a branch"))?;
    Ok(format!(
        "1000 random scripts ({steps} steps, {} returns, {} refunds): conservation, no double spend, one spend per ask, replay identical",
        settled[0], settled[1]
    ))
}

fn main() -> ExitCode {
    let mut flat = 0;
    let c1 = correctness(&mut flat);
    let c5 = scaling(&mut flat);
    let c6 = match (&c1, &c5) {
        (Ok(_), Ok(_)) => Ok(format!("{flat} indexes: equal entry lengths, all posting lists of length delta")),
        _ => Err("suite 1 or 5 failed before every index was checked".into()),
    };
    let results = [
        ("1 correctness", c1),
        ("2 penalty", penalty()),
        ("3 timeouts", timeouts()),
        ("4 chunking", chunking()),
        ("5 scaling", c5),
        ("6 size pattern", c6),
        ("7 ledger safety", ledger_safety()),
    ];
    let mut ok = true;
    for (name, r) in &results {
        match r {
            Ok(msg) => println!("PASS criterion {name}: {msg}"),
            Err(msg) => {
                ok = false;
                println!("FAIL criterion {name}: {msg}");
            }
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
