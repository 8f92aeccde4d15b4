//! Deterministic synthetic chain generator.
//!
//! Produces low-difficulty, fully valid headers with real proof of work,
//! block bodies and keyed P2PKH outputs, so every protocol path can run on a
//! desk machine. Spends carry a placeholder `script_sig` (pubkey ‖ marker)
//! rather than a signature; nothing in this crate executes scripts.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chain::{expected_nbits, validate_header, ChainParams, ChainState, ParamsFile};
use crate::codec::{
    decode_block_body, encode_block_body, merkle_root, nbits_to_target, p2pkh_script,
    read_headers, write_var_bytes, BlockHeader, CodecError, Hash256, OutPoint, Transaction, TxIn,
    TxOut, MAX_MONEY,
};
use crate::crypto::{pubkey_hash, sha256, PubKeyHash, Scalar, SecretKey};
use crate::uint::U256;

pub const DEFAULT_NBITS: u32 = 0x1f010000; // target 2^240
pub const REGTEST_MAX_NBITS: u32 = 0x207fffff;
pub const BLOCK_SUBSIDY: u64 = 50 * 100_000_000;
pub const PLACEHOLDER_MARKER: &[u8] = b"zkbtc-testchain-unsigned";

/// Targets below this need too many tries for a desk machine.
pub fn mining_guard() -> U256 {
    U256::pow2(200)
}

#[derive(Debug, thiserror::Error)]
pub enum TestChainError {
    #[error("invalid block plan: {0}")]
    PlanInvalid(String),
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("target {0} is below the mining guard")]
    TargetTooHard(U256),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("format: {0}")]
    Format(String),
}

impl From<CodecError> for TestChainError {
    fn from(e: CodecError) -> Self {
        TestChainError::Format(e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TxIntent {
    /// Pays `value` to key `key`, funded from the miner key's outputs.
    CreateP2pkhUtxo { value: u64, key: u32 },
    /// Moves an existing output in full to key `key`.
    SpendOutpoint { block: u32, tx: u32, vout: u32, key: u32 },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPlan {
    #[serde(default)]
    pub txs: Vec<TxIntent>,
    /// Seconds since the previous block; defaults to the configured spacing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_delta: Option<i64>,
}

#[derive(Clone, Debug)]
pub struct TestChainConfig {
    pub seed: Vec<u8>,
    pub initial_nbits: u32,
    pub retarget_interval: u32,
    pub block_spacing: u32,
    pub genesis_timestamp: u32,
    pub key_count: u32,
    /// One entry per block after genesis.
    pub block_plan: Vec<BlockPlan>,
    /// Allows mining below [`mining_guard`].
    pub allow_hard_targets: bool,
}

impl Default for TestChainConfig {
    fn default() -> Self {
        TestChainConfig {
            seed: b"zkbtc".to_vec(),
            initial_nbits: DEFAULT_NBITS,
            retarget_interval: 8,
            block_spacing: 600,
            genesis_timestamp: 1_700_000_000,
            key_count: 8,
            block_plan: Vec::new(),
            allow_hard_targets: false,
        }
    }
}

impl TestChainConfig {
    pub fn with_empty_blocks(mut self, n: usize) -> Self {
        self.block_plan = vec![BlockPlan::default(); n];
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub header: BlockHeader,
    pub txs: Vec<Transaction>,
}

impl Block {
    pub fn txids(&self) -> Vec<Hash256> {
        self.txs.iter().map(Transaction::txid).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TestChain {
    pub params: ChainParams,
    /// `blocks[0]` is genesis.
    pub blocks: Vec<Block>,
    pub keys: Vec<SecretKey>,
}

impl TestChain {
    pub fn headers(&self) -> Vec<BlockHeader> {
        self.blocks.iter().map(|b| b.header).collect()
    }

    pub fn tip_height(&self) -> u64 {
        self.blocks.len() as u64 - 1
    }

    pub fn pubkey_hash(&self, key: u32) -> PubKeyHash {
        pubkey_hash(&self.keys[key as usize].public_key()).expect("non-zero key")
    }
}

/// `scalar = sha256(seed ‖ index) mod n`, with zero mapped to one.
pub fn derive_key(seed: &[u8], index: u32) -> SecretKey {
    let mut buf = seed.to_vec();
    buf.extend_from_slice(&index.to_le_bytes());
    let s = Scalar::from_be_bytes_reduced(&sha256(&buf));
    SecretKey::new(s).unwrap_or_else(|_| SecretKey::new(Scalar::ONE).unwrap())
}

/// Searches nonces from zero; bumps the timestamp when all 2^32 fail.
pub fn mine(
    template: &BlockHeader,
    target: &U256,
    allow_hard_targets: bool,
) -> Result<BlockHeader, TestChainError> {
    if *target < mining_guard() && !allow_hard_targets {
        return Err(TestChainError::TargetTooHard(*target));
    }
    let mut header = *template;
    loop {
        for nonce in 0..=u32::MAX {
            header.nonce = nonce;
            if U256::from_le_bytes(&header.block_hash().0) <= *target {
                return Ok(header);
            }
        }
        header.timestamp = header.timestamp.wrapping_add(1);
    }
}

fn coinbase(height: u64, seed: &[u8], miner: &PubKeyHash) -> Transaction {
    let mut script_sig = Vec::new();
    write_var_bytes(&mut script_sig, &height.to_le_bytes());
    write_var_bytes(&mut script_sig, &sha256(seed)[..8]);
    Transaction {
        version: 1,
        inputs: vec![TxIn {
            prevout: OutPoint::NULL,
            script_sig,
            sequence: u32::MAX,
            witness: vec![],
        }],
        outputs: vec![TxOut { value: BLOCK_SUBSIDY, script_pubkey: p2pkh_script(&miner.0) }],
        locktime: 0,
        has_witness: false,
    }
}

fn placeholder_script_sig(key: &SecretKey) -> Vec<u8> {
    let mut s = Vec::new();
    write_var_bytes(&mut s, &key.public_key().to_compressed().expect("non-zero key"));
    write_var_bytes(&mut s, PLACEHOLDER_MARKER);
    s
}

struct Utxo {
    value: u64,
    owner: u32,
    /// Creation order, so coin selection is deterministic.
    seq: u64,
}

struct Builder<'a> {
    config: &'a TestChainConfig,
    keys: Vec<SecretKey>,
    hashes: Vec<PubKeyHash>,
    utxos: HashMap<OutPoint, Utxo>,
    next_seq: u64,
}

impl Builder<'_> {
    fn add_outputs(&mut self, tx: &Transaction, owners: &[u32]) {
        let txid = tx.txid();
        for (vout, (out, owner)) in tx.outputs.iter().zip(owners).enumerate() {
            self.utxos.insert(
                OutPoint { txid, vout: vout as u32 },
                Utxo { value: out.value, owner: *owner, seq: self.next_seq },
            );
            self.next_seq += 1;
        }
    }

    fn check_key(&self, key: u32) -> Result<(), TestChainError> {
        if key as usize >= self.keys.len() {
            return Err(TestChainError::PlanInvalid(format!("unknown key index {key}")));
        }
        Ok(())
    }

    fn spend_input(&mut self, outpoint: OutPoint) -> Result<(TxIn, u64), TestChainError> {
        let utxo = self.utxos.remove(&outpoint).ok_or_else(|| {
            TestChainError::PlanInvalid(format!(
                "outpoint {}:{} is missing or already spent",
                outpoint.txid, outpoint.vout
            ))
        })?;
        let input = TxIn {
            prevout: outpoint,
            script_sig: placeholder_script_sig(&self.keys[utxo.owner as usize]),
            sequence: u32::MAX,
            witness: vec![],
        };
        Ok((input, utxo.value))
    }

    fn build_tx(
        &mut self,
        intent: &TxIntent,
        blocks: &[Block],
        current: &[Transaction],
    ) -> Result<Transaction, TestChainError> {
        match *intent {
            TxIntent::CreateP2pkhUtxo { value, key } => {
                self.check_key(key)?;
                if value == 0 || value > MAX_MONEY {
                    return Err(TestChainError::PlanInvalid(format!("bad output value {value}")));
                }
                let mut funding: Vec<(OutPoint, u64, u64)> = self
                    .utxos
                    .iter()
                    .filter(|(_, u)| u.owner == 0)
                    .map(|(op, u)| (*op, u.value, u.seq))
                    .collect();
                funding.sort_by_key(|&(_, _, seq)| seq);
                let mut selected = Vec::new();
                let mut total = 0u64;
                for (op, v, _) in funding {
                    if total >= value {
                        break;
                    }
                    selected.push(op);
                    total += v;
                }
                if total < value {
                    return Err(TestChainError::PlanInvalid(format!(
                        "miner funds {total} cannot cover {value}"
                    )));
                }
                let inputs = selected
                    .into_iter()
                    .map(|op| self.spend_input(op).map(|(i, _)| i))
                    .collect::<Result<Vec<_>, _>>()?;
                let mut outputs =
                    vec![TxOut { value, script_pubkey: p2pkh_script(&self.hashes[key as usize].0) }];
                let mut owners = vec![key];
                if total > value {
                    outputs.push(TxOut {
                        value: total - value,
                        script_pubkey: p2pkh_script(&self.hashes[0].0),
                    });
                    owners.push(0);
                }
                let tx = Transaction { version: 2, inputs, outputs, locktime: 0, has_witness: false };
                self.add_outputs(&tx, &owners);
                Ok(tx)
            }
            TxIntent::SpendOutpoint { block, tx, vout, key } => {
                self.check_key(key)?;
                let source = if block as usize == blocks.len() {
                    current.get(tx as usize)
                } else {
                    blocks.get(block as usize).and_then(|b| b.txs.get(tx as usize))
                }
                .ok_or_else(|| {
                    TestChainError::PlanInvalid(format!("no transaction {tx} in block {block}"))
                })?;
                let outpoint = OutPoint { txid: source.txid(), vout };
                let (input, value) = self.spend_input(outpoint)?;
                let tx = Transaction {
                    version: 2,
                    inputs: vec![input],
                    outputs: vec![TxOut {
                        value,
                        script_pubkey: p2pkh_script(&self.hashes[key as usize].0),
                    }],
                    locktime: 0,
                    has_witness: false,
                };
                self.add_outputs(&tx, &[key]);
                Ok(tx)
            }
        }
    }
}

pub fn generate(config: &TestChainConfig) -> Result<TestChain, TestChainError> {
    let initial_target = nbits_to_target(config.initial_nbits)
        .map_err(|e| TestChainError::ConfigInvalid(e.to_string()))?;
    if initial_target < U256::pow2(236) {
        return Err(TestChainError::ConfigInvalid(
            "initial target needs more than 2^20 expected tries".into(),
        ));
    }
    if config.key_count == 0 {
        return Err(TestChainError::ConfigInvalid("at least one key is required".into()));
    }
    let keys: Vec<SecretKey> = (0..config.key_count).map(|i| derive_key(&config.seed, i)).collect();
    let hashes: Vec<PubKeyHash> =
        keys.iter().map(|k| pubkey_hash(&k.public_key()).expect("non-zero key")).collect();
    let mut b = Builder { config, keys, hashes, utxos: HashMap::new(), next_seq: 0 };

    let cb = coinbase(0, &config.seed, &b.hashes[0]);
    b.add_outputs(&cb, &[0]);
    let template = BlockHeader {
        version: 1,
        prev_hash: Hash256::ZERO,
        merkle_root: cb.txid(),
        timestamp: config.genesis_timestamp,
        nbits: config.initial_nbits,
        nonce: 0,
    };
    let genesis = mine(&template, &initial_target, config.allow_hard_targets)?;
    let params = ChainParams::new(
        config.retarget_interval,
        config.retarget_interval as u64 * config.block_spacing as u64,
        4,
        nbits_to_target(REGTEST_MAX_NBITS).expect("static nbits"),
        genesis,
    )
    .map_err(|e| TestChainError::ConfigInvalid(e.to_string()))?;

    let mut blocks = vec![Block { header: genesis, txs: vec![cb] }];
    let mut state = ChainState::genesis(&params);
    for plan in &config.block_plan {
        let height = state.height + 1;
        let mut txs = vec![coinbase(height, &b.config.seed, &b.hashes[0])];
        b.add_outputs(&txs[0], &[0]);
        for intent in &plan.txs {
            let tx = b.build_tx(intent, &blocks, &txs)?;
            txs.push(tx);
        }
        let delta = plan.time_delta.unwrap_or(config.block_spacing as i64);
        let timestamp = (state.tip_header.timestamp as i64 + delta).clamp(0, u32::MAX as i64) as u32;
        let nbits = expected_nbits(&state, &params);
        let target = nbits_to_target(nbits).expect("validator produced nbits");
        let txids: Vec<Hash256> = txs.iter().map(Transaction::txid).collect();
        let template = BlockHeader {
            version: 0x2000_0000,
            prev_hash: state.tip_hash,
            merkle_root: merkle_root(&txids).expect("coinbase present"),
            timestamp,
            nbits,
            nonce: 0,
        };
        let header = mine(&template, &target, config.allow_hard_targets)?;
        state = validate_header(&state, &header, &params)
            .expect("generator builds headers that satisfy the validator");
        blocks.push(Block { header, txs });
    }
    Ok(TestChain { params, blocks, keys: b.keys })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyEntry {
    pub secret: String,
    pub pubkey_hash: String,
}

/// Writes `headers.bin`, `blocks/<height>.bin`, `keys.json` and `params.json`.
pub fn export(chain: &TestChain, dir: &Path) -> Result<(), TestChainError> {
    fs::create_dir_all(dir.join("blocks"))?;
    let headers: Vec<u8> = chain.blocks.iter().flat_map(|b| b.header.encode()).collect();
    fs::write(dir.join("headers.bin"), headers)?;
    for (height, block) in chain.blocks.iter().enumerate() {
        fs::write(dir.join("blocks").join(format!("{height}.bin")), encode_block_body(&block.txs))?;
    }
    let keys: BTreeMap<String, KeyEntry> = chain
        .keys
        .iter()
        .enumerate()
        .map(|(i, k)| {
            let entry = KeyEntry {
                secret: hex::encode(k.to_be_bytes()),
                pubkey_hash: pubkey_hash(&k.public_key()).expect("non-zero key").to_hex(),
            };
            (i.to_string(), entry)
        })
        .collect();
    fs::write(dir.join("keys.json"), pretty_json(&keys))?;
    fs::write(dir.join("params.json"), pretty_json(&chain.params.to_file()))?;
    Ok(())
}

fn pretty_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

pub fn load_params(path: &Path) -> Result<ChainParams, TestChainError> {
    let file: ParamsFile = serde_json::from_str(&fs::read_to_string(path)?)
        .map_err(|e| TestChainError::Format(e.to_string()))?;
    ChainParams::from_file(&file).map_err(|e| TestChainError::Format(e.to_string()))
}

pub fn load_keys(path: &Path) -> Result<Vec<SecretKey>, TestChainError> {
    let entries: BTreeMap<String, KeyEntry> = serde_json::from_str(&fs::read_to_string(path)?)
        .map_err(|e| TestChainError::Format(e.to_string()))?;
    let mut indexed = entries
        .into_iter()
        .map(|(k, e)| {
            let idx: usize = k.parse().map_err(|_| TestChainError::Format(format!("key {k}")))?;
            let bytes: [u8; 32] = hex::decode(&e.secret)
                .ok()
                .and_then(|b| b.try_into().ok())
                .ok_or_else(|| TestChainError::Format(format!("secret for key {k}")))?;
            let sk = SecretKey::from_be_bytes(&bytes)
                .map_err(|e| TestChainError::Format(e.to_string()))?;
            Ok((idx, sk))
        })
        .collect::<Result<Vec<_>, TestChainError>>()?;
    indexed.sort_by_key(|(i, _)| *i);
    if indexed.iter().enumerate().any(|(pos, (i, _))| pos != *i) {
        return Err(TestChainError::Format("key indices must be 0..n".into()));
    }
    Ok(indexed.into_iter().map(|(_, k)| k).collect())
}

pub fn load_block(path: &Path) -> Result<Vec<Transaction>, TestChainError> {
    Ok(decode_block_body(&fs::read(path)?)?)
}

pub fn import(dir: &Path) -> Result<TestChain, TestChainError> {
    let params = load_params(&dir.join("params.json"))?;
    let keys = load_keys(&dir.join("keys.json"))?;
    let headers = read_headers(&fs::read(dir.join("headers.bin"))?)?;
    let blocks = headers
        .into_iter()
        .enumerate()
        .map(|(h, header)| {
            let txs = load_block(&dir.join("blocks").join(format!("{h}.bin")))?;
            Ok(Block { header, txs })
        })
        .collect::<Result<Vec<_>, TestChainError>>()?;
    Ok(TestChain { params, blocks, keys })
}
