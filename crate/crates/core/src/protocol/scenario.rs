//! Line-oriented scenario scripts and their deterministic runner.
//!
//! ```text
//! owner doc 1 w,ab some text        # add a document (keywords '-' for none)
//! owner ingest corpus/              # add every document in a directory
//! owner index B                     # encrypt, store and index the corpus
//! uprime ask w 10 t=+8 max_delay=2  # ask for keyword w with deposit 10
//! world mine 1
//! q fulfill offer-1                 # or: q tamper offer-1 byte=3 / q subset offer-1
//! world mine 1
//! uprime decrypt offer-1
//! uprime refund offer-1             # submit the Fuse
//! uprime abort offer-1              # redeem the ask's input instead
//! world withhold offer-1            # miners ignore the ask until released
//! world release offer-1
//! ```
//!
//! Deadlines are absolute (`t=50`) or relative to the current clock
//! (`t=+5`). `offer-N` names the N-th ask line of the script.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use super::flow::{
    abort_before_inclusion, build_return, decrypt_return, fulfill, make_ask, read_ask, refund_after_timeout,
    submit_return, AskOffer, AskParams, FuseCosigner, FuseRefund, Refuse,
};
use super::messages::ReturnPayload;
use super::{register, ProtocolError};
use crate::chain::{ChainConfig, Ledger, Txid, Wallet};
use crate::crypto::{KeyBundle, Keypair, PublicKey};
use crate::sse::{empty_digest, load_corpus, phi_search, publish_corpus, Corpus, Document, PublishedIndex, Scheme, SseError};

#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub security_bits: u32,
    pub chain: ChainConfig,
    pub fee: u64,
    pub max_delay: u64,
    /// Each party starts with `utxos` genesis outputs of `funds` each.
    pub funds: u64,
    pub utxos: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 0,
            security_bits: 256,
            chain: ChainConfig::default(),
            fee: 0,
            max_delay: 2,
            funds: 1_000,
            utxos: 8,
        }
    }
}

/// The owner's keys and the three parties' wallets, all derived from a seed.
#[derive(Clone, Debug)]
pub struct Parties {
    pub keys: KeyBundle,
    pub owner: Wallet,
    pub uprime: Wallet,
    pub q: Wallet,
}

impl Parties {
    pub fn from_seed(rng: &mut ChaCha20Rng, security_bits: u32, fee: u64) -> Result<Self, SseError> {
        let mut seed = || {
            let mut s = [0u8; 32];
            rng.fill_bytes(&mut s);
            s
        };
        let keys = KeyBundle::from_seed(security_bits, seed())?;
        Ok(Parties {
            keys,
            owner: Wallet::new(Keypair::from_seed(seed()), fee),
            uprime: Wallet::new(Keypair::from_seed(seed()), fee),
            q: Wallet::new(Keypair::from_seed(seed()), fee),
        })
    }

    fn named(&self) -> [(&'static str, PublicKey); 3] {
        [
            ("owner", self.owner.public()),
            ("q", self.q.public()),
            ("uprime", self.uprime.public()),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Deadline {
    At(u64),
    After(u64),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Step {
    Doc { id: u64, keywords: Vec<String>, text: String },
    Ingest(PathBuf),
    Index(Scheme),
    Ask { keyword: String, deposit: u64, deadline: Deadline, max_delay: Option<u64>, cosign: bool },
    Abort(usize),
    Refund(usize),
    Decrypt(usize),
    Fulfill(usize),
    Tamper { offer: usize, byte: usize },
    Subset(usize),
    Mine(u64),
    Withhold(usize),
    Release(usize),
}

impl Step {
    fn party(&self) -> &'static str {
        match self {
            Step::Doc { .. } | Step::Ingest(_) | Step::Index(_) => "owner",
            Step::Ask { .. } | Step::Abort(_) | Step::Refund(_) | Step::Decrypt(_) => "uprime",
            Step::Fulfill(_) | Step::Tamper { .. } | Step::Subset(_) => "q",
            Step::Mine(_) | Step::Withhold(_) | Step::Release(_) => "world",
        }
    }

    fn action(&self) -> String {
        match self {
            Step::Doc { id, .. } => format!("doc {id}"),
            Step::Ingest(p) => format!("ingest {}", p.display()),
            Step::Index(s) => format!("index {s}"),
            Step::Ask { keyword, deposit, .. } => format!("ask {keyword} {deposit}"),
            Step::Abort(n) => format!("abort offer-{n}"),
            Step::Refund(n) => format!("refund offer-{n}"),
            Step::Decrypt(n) => format!("decrypt offer-{n}"),
            Step::Fulfill(n) => format!("fulfill offer-{n}"),
            Step::Tamper { offer, byte } => format!("tamper offer-{offer} byte={byte}"),
            Step::Subset(n) => format!("subset offer-{n}"),
            Step::Mine(n) => format!("mine {n}"),
            Step::Withhold(n) => format!("withhold offer-{n}"),
            Step::Release(n) => format!("release offer-{n}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("step {step} (line {line}): {message}")]
pub struct ScenarioError {
    pub step: usize,
    pub line: usize,
    pub message: String,
}

/// Parses a script. Blank lines and `#` comments are skipped; steps are
/// numbered from 1.
pub fn parse_script(text: &str) -> Result<Vec<Step>, ScenarioError> {
    let mut steps = vec![];
    let mut asks = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| ScenarioError {
            step: steps.len() + 1,
            line: i + 1,
            message,
        };
        let words: Vec<&str> = line.split_whitespace().collect();
        let offer = |w: Option<&&str>| -> Result<usize, ScenarioError> {
            let n = w
                .and_then(|w| w.strip_prefix("offer-"))
                .and_then(|n| n.parse::<usize>().ok())
                .ok_or_else(|| err("expected offer-N".into()))?;
            if n == 0 || n > asks {
                return Err(err(format!("offer-{n} does not name an earlier ask")));
            }
            Ok(n)
        };
        let num = |w: Option<&&str>, what: &str| -> Result<u64, ScenarioError> {
            w.and_then(|w| w.parse().ok()).ok_or_else(|| err(format!("expected {what}")))
        };
        let step = match (words[0], words.get(1).copied()) {
            ("owner", Some("doc")) => {
                let id = num(words.get(2), "document id")?;
                let kws = words.get(3).ok_or_else(|| err("expected keywords".into()))?;
                let keywords = if *kws == "-" {
                    vec![]
                } else {
                    kws.split(',').filter(|k| !k.is_empty()).map(String::from).collect()
                };
                Step::Doc {
                    id,
                    keywords,
                    text: words[4.min(words.len())..].join(" "),
                }
            }
            ("owner", Some("ingest")) => {
                Step::Ingest(words.get(2).ok_or_else(|| err("expected a directory".into()))?.into())
            }
            ("owner", Some("index")) => {
                let s = words.get(2).ok_or_else(|| err("expected A or B".into()))?;
                Step::Index(s.parse().map_err(|e: SseError| err(e.to_string()))?)
            }
            ("uprime", Some("ask")) => {
                let keyword = words.get(2).ok_or_else(|| err("expected a keyword".into()))?.to_string();
                let deposit = num(words.get(3), "deposit")?;
                let (mut deadline, mut max_delay, mut cosign) = (None, None, true);
                for opt in &words[4.min(words.len())..] {
                    match opt.split_once('=') {
                        Some(("t", v)) => {
                            deadline = Some(match v.strip_prefix('+') {
                                Some(r) => Deadline::After(r.parse().map_err(|_| err("bad t".into()))?),
                                None => Deadline::At(v.parse().map_err(|_| err("bad t".into()))?),
                            })
                        }
                        Some(("max_delay", v)) => {
                            max_delay = Some(v.parse().map_err(|_| err("bad max_delay".into()))?)
                        }
                        Some(("cosign", "no")) => cosign = false,
                        Some(("cosign", "yes")) => cosign = true,
                        _ => return Err(err(format!("unknown option {opt:?}"))),
                    }
                }
                asks += 1;
                Step::Ask {
                    keyword,
                    deposit,
                    deadline: deadline.ok_or_else(|| err("expected t=<deadline>".into()))?,
                    max_delay,
                    cosign,
                }
            }
            ("uprime", Some("abort")) => Step::Abort(offer(words.get(2))?),
            ("uprime", Some("refund")) => Step::Refund(offer(words.get(2))?),
            ("uprime", Some("decrypt")) => Step::Decrypt(offer(words.get(2))?),
            ("q", Some("fulfill")) => Step::Fulfill(offer(words.get(2))?),
            ("q", Some("subset")) => Step::Subset(offer(words.get(2))?),
            ("q", Some("tamper")) => {
                let offer = offer(words.get(2))?;
                let byte = match words.get(3).and_then(|w| w.strip_prefix("byte=")) {
                    Some(b) => b.parse().map_err(|_| err("bad byte".into()))?,
                    None if words.len() == 3 => 0,
                    None => return Err(err(format!("unknown option {:?}", words[3]))),
                };
                Step::Tamper { offer, byte }
            }
            ("world", Some("mine")) => Step::Mine(match words.get(2) {
                Some(_) => num(words.get(2), "block count")?,
                None => 1,
            }),
            ("world", Some("withhold")) => Step::Withhold(offer(words.get(2))?),
            ("world", Some("release")) => Step::Release(offer(words.get(2))?),
            _ => return Err(err(format!("unknown command {line:?}"))),
        };
        steps.push(step);
    }
    Ok(steps)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TranscriptRecord {
    pub step: usize,
    pub clock: u64,
    pub party: String,
    pub action: String,
    pub txid: Option<String>,
    pub outcome: String,
    pub deltas: BTreeMap<String, i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<serde_json::Value>,
}

#[derive(Clone, Debug)]
pub struct OfferState {
    pub keyword: String,
    pub offer: AskOffer,
    pub fuse: FuseRefund,
}

/// A running scenario. Fields are public so tests can inspect the state.
pub struct Scenario {
    pub config: ScenarioConfig,
    pub ledger: Ledger,
    pub parties: Parties,
    pub corpus: Corpus,
    pub index: Option<PublishedIndex>,
    /// One slot per ask step; `None` if the ask failed.
    pub offers: Vec<Option<OfferState>>,
    pub transcript: Vec<TranscriptRecord>,
    rng: ChaCha20Rng,
    balances: BTreeMap<&'static str, u64>,
}

type Outcome = Result<(Option<Txid>, Option<serde_json::Value>), String>;

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self, ScenarioError> {
        let setup = |message: String| ScenarioError {
            step: 0,
            line: 0,
            message,
        };
        let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
        let parties = Parties::from_seed(&mut rng, config.security_bits, config.fee).map_err(|e| setup(e.to_string()))?;
        let alloc: Vec<(PublicKey, u64)> = parties
            .named()
            .iter()
            .flat_map(|(_, pk)| std::iter::repeat_n((*pk, config.funds), config.utxos))
            .collect();
        let mut ledger = Ledger::genesis(config.chain.clone(), &alloc).map_err(|e| setup(e.to_string()))?;
        register(&mut ledger);
        let mut s = Scenario {
            config,
            ledger,
            parties,
            corpus: Corpus::default(),
            index: None,
            offers: vec![],
            transcript: vec![],
            rng,
            balances: BTreeMap::new(),
        };
        s.balances = s.current_balances();
        Ok(s)
    }

    fn current_balances(&self) -> BTreeMap<&'static str, u64> {
        self.parties
            .named()
            .iter()
            .map(|(n, pk)| (*n, self.ledger.balance(pk)))
            .collect()
    }

    /// Net balance change of each party since the scenario started.
    pub fn net_deltas(&self) -> BTreeMap<String, i64> {
        let mut net: BTreeMap<String, i64> = BTreeMap::new();
        for r in &self.transcript {
            for (k, v) in &r.deltas {
                *net.entry(k.clone()).or_default() += v;
            }
        }
        net
    }

    pub fn offer(&self, n: usize) -> Option<&OfferState> {
        self.offers.get(n.checked_sub(1)?)?.as_ref()
    }

    pub fn run(&mut self, steps: &[Step]) {
        for step in steps {
            self.apply(step);
        }
    }

    pub fn apply(&mut self, step: &Step) -> &TranscriptRecord {
        let outcome = self.execute(step);
        let now = self.current_balances();
        let deltas = now
            .iter()
            .map(|(k, v)| (k.to_string(), *v as i64 - self.balances[k] as i64))
            .collect();
        self.balances = now;
        let (txid, detail, outcome) = match outcome {
            Ok((txid, detail)) => (txid, detail, "ok".to_string()),
            Err(e) => (None, None, e),
        };
        self.transcript.push(TranscriptRecord {
            step: self.transcript.len() + 1,
            clock: self.ledger.clock(),
            party: step.party().into(),
            action: step.action(),
            txid: txid.map(|t| t.to_hex()),
            outcome,
            deltas,
            detail,
        });
        self.transcript.last().expect("just pushed")
    }

    fn state(&self, n: usize) -> Result<&OfferState, String> {
        self.offer(n).ok_or_else(|| format!("error: offer-{n} was not created"))
    }

    fn execute(&mut self, step: &Step) -> Outcome {
        let err = |e: &dyn std::fmt::Display| format!("error: {e}");
        let rejected = |e: ProtocolError| match e {
            ProtocolError::ClaimRejected(_)
            | ProtocolError::Rejected(_)
            | ProtocolError::LocktimeNotReached { .. }
            | ProtocolError::AlreadySpent(_) => format!("rejected: {e}"),
            other => format!("error: {other}"),
        };
        match step {
            Step::Doc { id, keywords, text } => {
                if self.corpus.document(*id).is_some() {
                    return Err(format!("error: duplicate doc id {id}"));
                }
                let doc = Document::new(*id, text.as_bytes(), keywords.iter().cloned());
                self.corpus.dictionary.extend(doc.keywords.iter().cloned());
                self.corpus.documents.push(doc);
                Ok((None, None))
            }
            Step::Ingest(dir) => {
                let loaded = load_corpus(dir).map_err(|e| err(&e))?;
                let base = self.corpus.documents.iter().map(|d| d.doc_id).max().unwrap_or(0);
                for mut d in loaded.documents {
                    d.doc_id += base;
                    self.corpus.dictionary.extend(d.keywords.iter().cloned());
                    self.corpus.documents.push(d);
                }
                Ok((None, Some(json!({ "documents": self.corpus.documents.len() }))))
            }
            Step::Index(scheme) => {
                let idx = publish_corpus(
                    &mut self.ledger,
                    &self.parties.owner,
                    &self.parties.keys,
                    &self.corpus,
                    *scheme,
                    &mut self.rng,
                )
                .map_err(|e| err(&e))?;
                let detail = json!({
                    "keywords": idx.posting_lists.len(),
                    "delta": idx.delta(),
                    "op_count": idx.stats.op_count(),
                });
                let id = idx.broadcast.locator.clone();
                self.index = Some(idx);
                Ok((Some(id), Some(detail)))
            }
            Step::Ask {
                keyword,
                deposit,
                deadline,
                max_delay,
                cosign,
            } => {
                self.offers.push(None);
                let index = self.index.as_ref().ok_or("error: no index published")?;
                let deadline = match deadline {
                    Deadline::At(t) => *t,
                    Deadline::After(d) => self.ledger.clock() + d,
                };
                let params = AskParams {
                    keyword: keyword.clone(),
                    deposit: *deposit,
                    deadline,
                    max_delay: max_delay.unwrap_or(self.config.max_delay),
                };
                let cosigner: &dyn FuseCosigner = if *cosign { &self.parties.q } else { &Refuse };
                let (offer, fuse) = make_ask(
                    &mut self.ledger,
                    &self.parties.uprime,
                    &self.parties.keys,
                    &index.broadcast,
                    self.parties.q.public(),
                    cosigner,
                    &params,
                )
                .map_err(|e| err(&e))?;
                let id = offer.ask_txid.clone();
                let detail = json!({ "deadline": deadline, "fuse": fuse.txid.to_hex() });
                *self.offers.last_mut().expect("pushed") = Some(OfferState {
                    keyword: keyword.clone(),
                    offer,
                    fuse,
                });
                Ok((Some(id), Some(detail)))
            }
            Step::Abort(n) => {
                let offer = self.state(*n)?.offer.clone();
                let id = abort_before_inclusion(&mut self.ledger, &self.parties.uprime, &offer).map_err(rejected)?;
                Ok((Some(id), None))
            }
            Step::Refund(n) => {
                let fuse = self.state(*n)?.fuse.clone();
                let id = refund_after_timeout(&mut self.ledger, &fuse).map_err(rejected)?;
                Ok((Some(id), None))
            }
            Step::Decrypt(n) => {
                let offer = self.state(*n)?.offer.clone();
                let docs = decrypt_return(&self.ledger, &self.parties.keys, &offer).map_err(|e| err(&e))?;
                let texts: Vec<String> = docs.iter().map(|d| String::from_utf8_lossy(d).into_owned()).collect();
                Ok((None, Some(json!({ "documents": texts }))))
            }
            Step::Fulfill(n) => {
                let ask = self.state(*n)?.offer.ask_txid.clone();
                let claim = fulfill(&mut self.ledger, &self.parties.q, &ask).map_err(rejected)?;
                let detail = json!({ "results": claim.payload.ciphertexts.len() });
                Ok((Some(claim.txid), Some(detail)))
            }
            Step::Tamper { offer: n, byte } => {
                let (offer, mut payload) = self.honest_result(*n)?;
                let total: usize = payload.ciphertexts.iter().map(Vec::len).sum();
                if total == 0 {
                    let i = byte % payload.digest.len();
                    payload.digest[i] ^= 1;
                } else {
                    let mut at = byte % total;
                    for c in &mut payload.ciphertexts {
                        if at < c.len() {
                            c[at] ^= 1;
                            break;
                        }
                        at -= c.len();
                    }
                }
                self.submit_claim(&offer, payload).map_err(rejected)
            }
            Step::Subset(n) => {
                let (offer, mut payload) = self.honest_result(*n)?;
                if payload.ciphertexts.pop().is_none() {
                    return Err("error: empty result has no strict subset".into());
                }
                self.submit_claim(&offer, payload).map_err(rejected)
            }
            Step::Mine(n) => {
                let mut included = 0;
                let mut dropped = vec![];
                for s in self.ledger.mine_blocks(*n) {
                    included += s.included.len();
                    dropped.extend(s.rejected.iter().map(|(id, r)| json!({ "txid": id.to_hex(), "reason": r.to_string() })));
                }
                Ok((None, Some(json!({ "included": included, "rejected": dropped }))))
            }
            Step::Withhold(n) => {
                let id = self.state(*n)?.offer.ask_txid.clone();
                self.ledger.withhold(&id);
                Ok((Some(id), None))
            }
            Step::Release(n) => {
                let id = self.state(*n)?.offer.ask_txid.clone();
                self.ledger.release(&id);
                Ok((Some(id), None))
            }
        }
    }

    /// What an honest searcher would return for offer `n`.
    fn honest_result(&self, n: usize) -> Result<(AskOffer, ReturnPayload), String> {
        let ask = &self.state(n)?.offer.ask_txid;
        let offer = read_ask(&self.ledger, ask).map_err(|e| format!("error: {e}"))?;
        let td = offer.trapdoor();
        let payload = match phi_search(&self.ledger, td, &offer.payload.locator) {
            Ok(r) => ReturnPayload {
                ciphertexts: r.ciphertexts,
                digest: r.digest,
            },
            Err(SseError::NoMatch) => ReturnPayload {
                ciphertexts: vec![],
                digest: empty_digest(&td.mac_key),
            },
            Err(e) => return Err(format!("error: {e}")),
        };
        Ok((offer, payload))
    }

    fn submit_claim(&mut self, offer: &AskOffer, payload: ReturnPayload) -> Result<(Option<Txid>, Option<serde_json::Value>), ProtocolError> {
        let claim = build_return(&self.ledger, &self.parties.q, offer, payload);
        let id = submit_return(&mut self.ledger, &claim)?;
        Ok((Some(id), None))
    }

    /// The transcript as JSON lines.
    pub fn transcript_jsonl(&self) -> String {
        self.transcript
            .iter()
            .map(|r| serde_json::to_string(r).expect("serializable") + "\n")
            .collect()
    }
}

/// Parses and runs a script from a fresh ledger.
pub fn run_scenario(config: ScenarioConfig, script: &str) -> Result<Scenario, ScenarioError> {
    let steps = parse_script(script)?;
    let mut s = Scenario::new(config)?;
    s.run(&steps);
    Ok(s)
}
