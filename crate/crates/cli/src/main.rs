//! `ssebc`: drive a searchable-encryption workspace over the simulated ledger.

mod inspect;
mod workspace;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use ssebc_core::chain::Txid;
use ssebc_core::protocol::{
    abort_before_inclusion, decrypt_return, fulfill, make_ask, refund_after_timeout, run_scenario, settlement, AskParams,
    FuseCosigner, Refuse, Settlement,
};
use ssebc_core::sse::{load_corpus, publish_corpus, Scheme};
use ssebc_core::sweep::{self, linear_fit, SweepConfig};

use workspace::{read_config, FileConfig, Settings, StoredOffer, Workspace, TRANSCRIPT_DIR};

#[derive(Parser)]
#[command(name = "ssebc", version, about = "Searchable encryption over a simulated UTXO ledger")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Workspace directory.
    #[arg(long, global = true, env = "SSEBC_WORKSPACE", default_value = "ssebc-workspace")]
    workspace: PathBuf,
    /// Seed for keys, wallets and all command randomness.
    #[arg(long, global = true, env = "SSEBC_SEED")]
    seed: Option<u64>,
    /// Index scheme: A (single index transaction) or B (record chain).
    #[arg(long, global = true, env = "SSEBC_SCHEME")]
    scheme: Option<Scheme>,
    /// Per-output payload limit in bytes.
    #[arg(long, global = true, env = "SSEBC_IOTA")]
    iota: Option<usize>,
    /// Transaction id length in bits.
    #[arg(long, global = true, env = "SSEBC_P_BITS")]
    p_bits: Option<usize>,
    /// Blocks before the deadline after which an unmined ask is aborted.
    #[arg(long, global = true, env = "SSEBC_MAX_DELAY")]
    max_delay: Option<u64>,
    /// Fee paid by every transaction a party builds.
    #[arg(long, global = true, env = "SSEBC_FEE")]
    fee: Option<u64>,
    /// Key length in bits (128 or 256).
    #[arg(long, global = true, env = "SSEBC_SECURITY_BITS")]
    security_bits: Option<u32>,
}

impl GlobalArgs {
    fn flags(&self) -> FileConfig {
        FileConfig {
            seed: self.seed,
            scheme: self.scheme,
            iota: self.iota,
            p_bits: self.p_bits,
            max_delay: self.max_delay,
            fee: self.fee,
            security_bits: self.security_bits,
        }
    }

    fn settings(&self) -> Result<Settings> {
        Ok(Settings::resolve(&self.flags(), &read_config(&self.workspace)?))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Initialize the workspace: keys, parties and a funded genesis ledger.
    Keygen,
    /// Load a directory of documents as the owner's corpus.
    Ingest { dir: PathBuf },
    /// Encrypt and publish the corpus and its index.
    Index,
    /// Post an ask for a keyword, with its Fuse cosigned by the searcher.
    Ask {
        keyword: String,
        /// Deposit paid to the searcher on a valid return.
        #[arg(long, default_value_t = 10)]
        deposit: u64,
        /// Deadline: an absolute clock value, or `+N` relative to now.
        #[arg(long, default_value = "+10")]
        deadline: String,
        /// Searcher refuses to cosign the Fuse.
        #[arg(long)]
        no_cosign: bool,
    },
    /// Searcher answers an offer with a return transaction.
    Fulfill { offer: String },
    /// Recover the deposit: abort if the ask is unmined, else submit the Fuse.
    Refund { offer: String },
    /// Mine blocks.
    Mine {
        #[arg(default_value_t = 1)]
        blocks: u64,
    },
    /// Show ledger transactions without revealing payload contents.
    Inspect { txid: Option<String> },
    /// Verify and decrypt the return for an offer.
    Decrypt { offer: String },
    /// Sweep corpus sizes and emit a TSV of build and search costs.
    Bench {
        /// Pair counts to sweep.
        #[arg(long, value_delimiter = ',', default_value = "100,200,400,800")]
        pairs: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        keywords: usize,
        #[arg(long, default_value_t = 2)]
        per_doc: usize,
        /// Output file; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scripted multi-party scenarios.
    Scenario {
        #[command(subcommand)]
        command: ScenarioCommand,
    },
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// Run a script and write its JSONL transcript.
    Run {
        script: PathBuf,
        /// Transcript path; defaults to <workspace>/transcripts/<script>.jsonl.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

type Outcome = (Option<Txid>, Option<serde_json::Value>);

/// Runs `f` against the workspace, appends a transcript record either way
/// and persists the result.
fn with_workspace(
    g: &GlobalArgs,
    party: &str,
    action: String,
    f: impl FnOnce(&mut Workspace) -> Result<Outcome>,
) -> Result<()> {
    let mut ws = Workspace::open(&g.workspace, &g.flags())?;
    let before = ws.balances();
    let result = f(&mut ws);
    match &result {
        Ok((txid, detail)) => ws.record(&before, party, action, txid.as_ref(), "ok", detail.clone())?,
        Err(e) => ws.record(&before, party, action, None, &format!("error: {e:#}"), None)?,
    }
    ws.save()?;
    result.map(|_| ())
}

fn parse_deadline(spec: &str, clock: u64) -> Result<u64> {
    let n = |s: &str| s.parse::<u64>().with_context(|| format!("bad deadline {spec:?}"));
    Ok(match spec.strip_prefix('+') {
        Some(rel) => clock + n(rel)?,
        None => n(spec)?,
    })
}

fn keygen(g: &GlobalArgs) -> Result<()> {
    let settings = g.settings()?;
    let mut ws = Workspace::init(&g.workspace, settings)?;
    let before = ws.balances();
    let detail = json!({
        "security_bits": ws.settings.security_bits,
        "iota": ws.settings.iota,
        "p_bits": ws.settings.p_bits,
        "balances": before,
    });
    ws.record(&before, "owner", "keygen".into(), None, "ok", Some(detail))?;
    ws.save()?;
    println!("initialized {} (seed {})", g.workspace.display(), ws.settings.seed);
    Ok(())
}

fn ingest(ws: &mut Workspace, dir: &Path) -> Result<Outcome> {
    let corpus = load_corpus(dir).with_context(|| format!("loading corpus from {}", dir.display()))?;
    corpus.validate()?;
    ws.state.set_corpus(&corpus);
    println!(
        "ingested {} documents, {} keywords, {} pairs",
        corpus.documents.len(),
        corpus.dictionary.len(),
        corpus.pairs()
    );
    let detail = json!({"documents": corpus.documents.len(), "keywords": corpus.dictionary.len(), "pairs": corpus.pairs()});
    Ok((None, Some(detail)))
}

fn index(ws: &mut Workspace) -> Result<Outcome> {
    let corpus = ws.state.corpus();
    if corpus.documents.is_empty() {
        bail!("no documents ingested");
    }
    let mut rng = ws.rng();
    let scheme = ws.settings.scheme;
    let idx = publish_corpus(&mut ws.ledger, &ws.parties.owner, &ws.keys, &corpus, scheme, &mut rng)?;
    ws.set_broadcast(&idx.broadcast)?;
    println!(
        "scheme {scheme} index at {} ({} keywords, delta {}, {} transactions, {} ops)",
        idx.broadcast.locator,
        idx.posting_lists.len(),
        idx.delta(),
        idx.stats.transactions,
        idx.stats.op_count()
    );
    let detail = json!({
        "scheme": scheme.to_string(),
        "keywords": idx.posting_lists.len(),
        "delta": idx.delta(),
        "transactions": idx.stats.transactions,
        "ops": idx.stats.op_count(),
    });
    Ok((Some(idx.broadcast.locator), Some(detail)))
}

fn ask(ws: &mut Workspace, keyword: &str, deposit: u64, deadline: &str, no_cosign: bool) -> Result<Outcome> {
    let broadcast = ws.broadcast()?;
    let params = AskParams {
        keyword: keyword.into(),
        deposit,
        deadline: parse_deadline(deadline, ws.ledger.clock())?,
        max_delay: ws.settings.max_delay,
    };
    let cosigner: &dyn FuseCosigner = if no_cosign { &Refuse } else { &ws.parties.q };
    let (offer, fuse) = make_ask(
        &mut ws.ledger,
        &ws.parties.uprime,
        &ws.keys,
        &broadcast,
        ws.parties.q.public(),
        cosigner,
        &params,
    )?;
    ws.state.offers.push(StoredOffer {
        keyword: keyword.into(),
        offer: offer.to_bytes(),
        fuse: fuse.tx.to_bytes(),
    });
    let n = ws.state.offers.len();
    println!("offer-{n} ask {} deadline {} fuse {}", offer.ask_txid, offer.deadline(), fuse.txid);
    let detail = json!({"offer": n, "deposit": deposit, "deadline": offer.deadline(), "fuse": fuse.txid.to_hex()});
    Ok((Some(offer.ask_txid), Some(detail)))
}

fn fulfill_cmd(ws: &mut Workspace, reference: &str) -> Result<Outcome> {
    let (n, offer, _) = ws.offer(reference)?;
    let claim = fulfill(&mut ws.ledger, &ws.parties.q, &offer.ask_txid)?;
    println!("offer-{n} return {} with {} results", claim.txid, claim.payload.ciphertexts.len());
    Ok((Some(claim.txid), Some(json!({"offer": n, "results": claim.payload.ciphertexts.len()}))))
}

fn refund(ws: &mut Workspace, reference: &str) -> Result<Outcome> {
    let (n, offer, fuse) = ws.offer(reference)?;
    let (how, txid) = if ws.ledger.is_mined(&offer.ask_txid) {
        ("fuse", refund_after_timeout(&mut ws.ledger, &fuse)?)
    } else {
        ("abort", abort_before_inclusion(&mut ws.ledger, &ws.parties.uprime, &offer)?)
    };
    println!("offer-{n} {how} {txid}");
    Ok((Some(txid), Some(json!({"offer": n, "via": how}))))
}

fn mine(ws: &mut Workspace, blocks: u64) -> Result<Outcome> {
    let mut included = 0;
    for s in ws.ledger.mine_blocks(blocks) {
        included += s.included.len();
        println!("block {} time {}: {} included", s.height, s.time, s.included.len());
        for id in &s.included {
            println!("  + {id}");
        }
        for (id, why) in &s.rejected {
            println!("  - {id}: {why}");
        }
    }
    Ok((None, Some(json!({"blocks": blocks, "included": included}))))
}

fn decrypt(ws: &mut Workspace, reference: &str) -> Result<Outcome> {
    let (n, offer, _) = ws.offer(reference)?;
    if let Settlement::Refunded(id) = settlement(&ws.ledger, &offer) {
        bail!("offer-{n} was refunded by {id}; nothing to decrypt");
    }
    let docs = decrypt_return(&ws.ledger, &ws.keys, &offer)?;
    println!("offer-{n}: {} documents", docs.len());
    for (i, d) in docs.iter().enumerate() {
        println!("--- document {}", i + 1);
        println!("{}", String::from_utf8_lossy(d));
    }
    Ok((None, Some(json!({"offer": n, "documents": docs.len()}))))
}

fn inspect_cmd(g: &GlobalArgs, txid: Option<&str>) -> Result<()> {
    let ws = Workspace::open(&g.workspace, &g.flags())?;
    let broadcast = ws.broadcast().ok();
    let map = inspect::IndexMap::new(&ws.ledger, &ws.keys, broadcast.as_ref());
    match txid {
        Some(hex) => {
            let id = Txid::from_hex(hex).with_context(|| format!("bad txid {hex:?}"))?;
            match inspect::describe(&ws.ledger, &map, &id) {
                Some(line) => println!("{line}"),
                None => bail!("transaction {hex} is not on the ledger"),
            }
        }
        None => {
            println!(
                "height {} clock {} mempool {} utxo_value {}",
                ws.ledger.height(),
                ws.ledger.clock(),
                ws.ledger.mempool().count(),
                ws.ledger.utxo_value()
            );
            for line in inspect::describe_all(&ws.ledger, &map) {
                println!("{line}");
            }
        }
    }
    Ok(())
}

fn bench(g: &GlobalArgs, pairs: Vec<usize>, keywords: usize, per_doc: usize, out: Option<&Path>) -> Result<()> {
    let s = g.settings()?;
    let config = SweepConfig {
        pair_counts: pairs,
        keywords,
        per_doc,
        chain: s.chain()?,
        security_bits: s.security_bits,
        seed: s.seed,
    };
    let rows = sweep::run(&config)?;
    let tsv = sweep::to_tsv(&rows);
    match out {
        Some(path) => std::fs::write(path, &tsv).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{tsv}"),
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = config
        .pair_counts
        .iter()
        .filter_map(|&p| rows.iter().find(|r| r.pairs == p).map(|r| (p as f64, r.build_ops as f64)))
        .unzip();
    if xs.len() >= 2 {
        let (a, b, r2) = linear_fit(&xs, &ys);
        eprintln!("build ops ~ {a:.1} + {b:.3} * pairs (r2 {r2:.5})");
    }
    Ok(())
}

fn scenario(g: &GlobalArgs, script: &Path, out: Option<&Path>) -> Result<()> {
    let settings = g.settings()?;
    let text = std::fs::read_to_string(script).with_context(|| format!("reading {}", script.display()))?;
    let s = run_scenario(settings.scenario()?, &text)?;
    let path = match out {
        Some(p) => p.to_path_buf(),
        None => {
            let stem = script.file_stem().map_or("scenario".into(), |s| s.to_string_lossy().into_owned());
            let dir = g.workspace.join(TRANSCRIPT_DIR);
            std::fs::create_dir_all(&dir)?;
            dir.join(format!("{stem}.jsonl"))
        }
    };
    std::fs::write(&path, s.transcript_jsonl())?;
    let failed = s.transcript.iter().filter(|r| r.outcome != "ok").count();
    println!(
        "{} steps ({failed} not ok), clock {}, net {:?}; transcript {}",
        s.transcript.len(),
        s.ledger.clock(),
        s.net_deltas(),
        path.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Keygen => keygen(g),
        Command::Ingest { dir } => with_workspace(g, "owner", format!("ingest {}", dir.display()), |ws| ingest(ws, &dir)),
        Command::Index => {
            let action = format!("index {}", g.settings()?.scheme);
            with_workspace(g, "owner", action, index)
        }
        Command::Ask {
            keyword,
            deposit,
            deadline,
            no_cosign,
        } => with_workspace(g, "uprime", format!("ask {keyword} {deposit} t={deadline}"), |ws| {
            ask(ws, &keyword, deposit, &deadline, no_cosign)
        }),
        Command::Fulfill { offer } => with_workspace(g, "q", format!("fulfill {offer}"), |ws| fulfill_cmd(ws, &offer)),
        Command::Refund { offer } => with_workspace(g, "uprime", format!("refund {offer}"), |ws| refund(ws, &offer)),
        Command::Mine { blocks } => with_workspace(g, "world", format!("mine {blocks}"), |ws| mine(ws, blocks)),
        Command::Decrypt { offer } => with_workspace(g, "uprime", format!("decrypt {offer}"), |ws| decrypt(ws, &offer)),
        Command::Inspect { txid } => inspect_cmd(g, txid.as_deref()),
        Command::Bench {
            pairs,
            keywords,
            per_doc,
            out,
        } => bench(g, pairs, keywords, per_doc, out.as_deref()),
        Command::Scenario {
            command: ScenarioCommand::Run { script, out },
        } => scenario(g, &script, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
