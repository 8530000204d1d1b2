use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use ssebc_core::chain::{ChainConfig, Ledger, Transaction, Txid};
use ssebc_core::crypto::KeyBundle;
use ssebc_core::protocol::{register, AskOffer, FuseRefund, Parties, ScenarioConfig, TranscriptRecord};
use ssebc_core::sse::{Broadcast, Corpus, Document, Scheme};

pub const CONFIG_FILE: &str = "config.toml";
pub const KEY_FILE: &str = "keys.json";
pub const LEDGER_FILE: &str = "ledger.bin";
pub const BROADCAST_FILE: &str = "broadcast.txt";
pub const STATE_FILE: &str = "state.json";
pub const TRANSCRIPT_DIR: &str = "transcripts";
pub const LOCK_FILE: &str = ".lock";

/// Settings as they appear in `config.toml`; every field is optional.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub scheme: Option<Scheme>,
    pub iota: Option<usize>,
    pub p_bits: Option<usize>,
    pub max_delay: Option<u64>,
    pub fee: Option<u64>,
    pub security_bits: Option<u32>,
}

/// Fully resolved settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Settings {
    pub seed: u64,
    pub scheme: Scheme,
    pub iota: usize,
    pub p_bits: usize,
    pub max_delay: u64,
    pub fee: u64,
    pub security_bits: u32,
}

impl Settings {
    /// `flags` already carries env values (clap resolves flag over env);
    /// the config file fills whatever is still unset.
    pub fn resolve(flags: &FileConfig, file: &FileConfig) -> Self {
        Settings {
            seed: flags.seed.or(file.seed).unwrap_or(0),
            scheme: flags.scheme.or(file.scheme).unwrap_or(Scheme::B),
            iota: flags.iota.or(file.iota).unwrap_or(80),
            p_bits: flags.p_bits.or(file.p_bits).unwrap_or(256),
            max_delay: flags.max_delay.or(file.max_delay).unwrap_or(2),
            fee: flags.fee.or(file.fee).unwrap_or(0),
            security_bits: flags.security_bits.or(file.security_bits).unwrap_or(256),
        }
    }

    pub fn chain(&self) -> Result<ChainConfig> {
        if !self.p_bits.is_multiple_of(8) {
            bail!("--p-bits must be a multiple of 8, got {}", self.p_bits);
        }
        let chain = ChainConfig {
            embed_limit: self.iota,
            txid_bytes: self.p_bits / 8,
            ..ChainConfig::default()
        };
        chain.validate()?;
        Ok(chain)
    }

    pub fn scenario(&self) -> Result<ScenarioConfig> {
        Ok(ScenarioConfig {
            seed: self.seed,
            security_bits: self.security_bits,
            chain: self.chain()?,
            fee: self.fee,
            max_delay: self.max_delay,
            ..ScenarioConfig::default()
        })
    }

    fn to_file(&self) -> FileConfig {
        FileConfig {
            seed: Some(self.seed),
            scheme: Some(self.scheme),
            iota: Some(self.iota),
            p_bits: Some(self.p_bits),
            max_delay: Some(self.max_delay),
            fee: Some(self.fee),
            security_bits: Some(self.security_bits),
        }
    }
}

pub fn read_config(dir: &Path) -> Result<FileConfig> {
    let path = dir.join(CONFIG_FILE);
    if !path.exists() {
        return Ok(FileConfig::default());
    }
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Serialize, Deserialize)]
struct KeyFile {
    security_bits: u32,
    #[serde(with = "hex")]
    bundle: Vec<u8>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StoredDocument {
    pub doc_id: u64,
    #[serde(with = "hex")]
    pub plaintext: Vec<u8>,
    pub keywords: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StoredOffer {
    pub keyword: String,
    #[serde(with = "hex")]
    pub offer: Vec<u8>,
    #[serde(with = "hex")]
    pub fuse: Vec<u8>,
}

/// Everything besides the ledger and keys that commands carry between runs.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct State {
    /// Commands run so far; also seeds each command's randomness.
    pub step: u64,
    pub documents: Vec<StoredDocument>,
    pub offers: Vec<StoredOffer>,
}

impl State {
    pub fn corpus(&self) -> Corpus {
        Corpus::new(
            self.documents
                .iter()
                .map(|d| Document::new(d.doc_id, d.plaintext.clone(), d.keywords.iter().cloned()))
                .collect(),
        )
    }

    pub fn set_corpus(&mut self, corpus: &Corpus) {
        self.documents = corpus
            .documents
            .iter()
            .map(|d| StoredDocument {
                doc_id: d.doc_id,
                plaintext: d.plaintext.clone(),
                keywords: d.keywords.iter().cloned().collect(),
            })
            .collect();
    }
}

/// Removes the lock file when dropped.
pub struct Lock(PathBuf);

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

pub struct Workspace {
    pub dir: PathBuf,
    pub settings: Settings,
    pub keys: KeyBundle,
    pub parties: Parties,
    pub ledger: Ledger,
    pub state: State,
    _lock: Lock,
}

pub fn lock(dir: &Path) -> Result<Lock> {
    let path = dir.join(LOCK_FILE);
    OpenOptions::new()
        .write(true)
        .create_new(true)
        .open(&path)
        .with_context(|| format!("workspace {} is locked by another command ({})", dir.display(), path.display()))?;
    Ok(Lock(path))
}

fn write_private(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut opts = OpenOptions::new();
    opts.write(true).create(true).truncate(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        opts.mode(0o600);
    }
    let mut f = opts.open(path).with_context(|| format!("writing {}", path.display()))?;
    f.write_all(bytes)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        fs::set_permissions(path, fs::Permissions::from_mode(0o600))?;
    }
    Ok(())
}

fn parties(settings: &Settings) -> Result<Parties> {
    let mut rng = ChaCha20Rng::seed_from_u64(settings.seed);
    Ok(Parties::from_seed(&mut rng, settings.security_bits, settings.fee)?)
}

impl Workspace {
    /// Creates a fresh workspace: config, key file, funded genesis ledger.
    pub fn init(dir: &Path, settings: Settings) -> Result<Self> {
        fs::create_dir_all(dir.join(TRANSCRIPT_DIR)).with_context(|| format!("creating {}", dir.display()))?;
        let lock = lock(dir)?;
        if dir.join(KEY_FILE).exists() {
            bail!("{} already holds keys; use a fresh workspace", dir.display());
        }
        let scenario = ssebc_core::protocol::Scenario::new(settings.scenario()?)?;
        let keys = scenario.parties.keys.clone();
        let key_file = KeyFile {
            security_bits: settings.security_bits,
            bundle: keys.to_bytes(),
        };
        write_private(&dir.join(KEY_FILE), serde_json::to_string_pretty(&key_file)?.as_bytes())?;
        fs::write(dir.join(CONFIG_FILE), toml::to_string(&settings.to_file())?)?;
        let ws = Workspace {
            dir: dir.to_path_buf(),
            settings,
            keys,
            parties: scenario.parties,
            ledger: scenario.ledger,
            state: State::default(),
            _lock: lock,
        };
        ws.save()?;
        Ok(ws)
    }

    pub fn open(dir: &Path, flags: &FileConfig) -> Result<Self> {
        if !dir.join(KEY_FILE).exists() {
            bail!("{} is not an initialized workspace (run `ssebc keygen` first)", dir.display());
        }
        let lock = lock(dir)?;
        let settings = Settings::resolve(flags, &read_config(dir)?);
        let raw = fs::read_to_string(dir.join(KEY_FILE))?;
        let kf: KeyFile = serde_json::from_str(&raw).context("parsing key file")?;
        let keys = KeyBundle::from_bytes(&kf.bundle)?;
        let mut parties = parties(&Settings {
            security_bits: kf.security_bits,
            ..settings.clone()
        })?;
        parties.keys = keys.clone();
        let mut ledger = Ledger::load(&dir.join(LEDGER_FILE)).map_err(|e| anyhow::anyhow!("loading ledger: {e}"))?;
        register(&mut ledger);
        let state: State = serde_json::from_str(&fs::read_to_string(dir.join(STATE_FILE))?).context("parsing state")?;
        Ok(Workspace {
            dir: dir.to_path_buf(),
            settings,
            keys,
            parties,
            ledger,
            state,
            _lock: lock,
        })
    }

    pub fn save(&self) -> Result<()> {
        self.ledger.save(&self.dir.join(LEDGER_FILE))?;
        write_private(&self.dir.join(STATE_FILE), serde_json::to_string_pretty(&self.state)?.as_bytes())
    }

    /// Deterministic randomness for the current command.
    pub fn rng(&self) -> ChaCha20Rng {
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&self.settings.seed.to_le_bytes());
        seed[8..16].copy_from_slice(&self.state.step.to_le_bytes());
        seed[16..].copy_from_slice(b"ssebc-cli-rng/v1");
        ChaCha20Rng::from_seed(seed)
    }

    pub fn broadcast(&self) -> Result<Broadcast> {
        let path = self.dir.join(BROADCAST_FILE);
        let text = fs::read_to_string(&path).context("no index has been published (run `ssebc index`)")?;
        Ok(text.parse()?)
    }

    pub fn set_broadcast(&self, b: &Broadcast) -> Result<()> {
        fs::write(self.dir.join(BROADCAST_FILE), b.to_string())?;
        Ok(())
    }

    pub fn balances(&self) -> BTreeMap<String, u64> {
        [
            ("owner", self.parties.owner.public()),
            ("q", self.parties.q.public()),
            ("uprime", self.parties.uprime.public()),
        ]
        .into_iter()
        .map(|(n, pk)| (n.to_string(), self.ledger.balance(&pk)))
        .collect()
    }

    pub fn offer(&self, reference: &str) -> Result<(usize, AskOffer, FuseRefund)> {
        let n: usize = reference
            .strip_prefix("offer-")
            .unwrap_or(reference)
            .parse()
            .with_context(|| format!("bad offer reference {reference:?} (expected offer-N)"))?;
        let stored = n
            .checked_sub(1)
            .and_then(|i| self.state.offers.get(i))
            .with_context(|| format!("no offer-{n}; {} offers exist", self.state.offers.len()))?;
        let p = self.ledger.txid_bytes();
        let offer = AskOffer::from_bytes(&stored.offer, p)?;
        let tx = Transaction::from_bytes(&stored.fuse).context("decoding stored fuse")?;
        let fuse = FuseRefund {
            txid: tx.txid(p),
            tx,
        };
        Ok((n, offer, fuse))
    }

    /// Appends one record to the workspace transcript.
    pub fn record(
        &mut self,
        before: &BTreeMap<String, u64>,
        party: &str,
        action: String,
        txid: Option<&Txid>,
        outcome: &str,
        detail: Option<serde_json::Value>,
    ) -> Result<()> {
        self.state.step += 1;
        let after = self.balances();
        let rec = TranscriptRecord {
            step: self.state.step as usize,
            clock: self.ledger.clock(),
            party: party.into(),
            action,
            txid: txid.map(Txid::to_hex),
            outcome: outcome.into(),
            deltas: after.iter().map(|(k, v)| (k.clone(), *v as i64 - before[k] as i64)).collect(),
            detail,
        };
        let path = self.dir.join(TRANSCRIPT_DIR).join("transcript.jsonl");
        let mut f = OpenOptions::new().create(true).append(true).open(&path)?;
        writeln!(f, "{}", serde_json::to_string(&rec)?)?;
        Ok(())
    }
}
