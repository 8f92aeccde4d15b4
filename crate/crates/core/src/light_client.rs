//! Epoch proofs for a header-chain light client.
//!
//! An epoch proof attests that a batch of blocks extends a known
//! [`ChainState`]. Statements are hash-chained through `prev_commitment`, so
//! a client only keeps the latest commitment and chain state. The only
//! backend is designated-verifier: the blob carries the start state, headers
//! and block bodies sealed under a shared key, and the verifier re-executes
//! every check.

use serde::{Deserialize, Serialize};

use crate::chain::{validate_chain, ChainParams, ChainState, Checkpoint, HeaderError, CHAIN_STATE_LEN};
use crate::codec::{
    decode_block_body, decode_tx, encode_block_body, merkle_root, read_headers, write_var_bytes,
    write_varint, BlockHeader, CodecError, Hash256, Reader, Transaction, HEADER_LEN,
};
use crate::crypto::sha256;
use crate::por::Backend;
use crate::sealed::{open, seal, DvKey};
use crate::testchain::TestChain;

/// `prev_commitment` of the first epoch.
pub const GENESIS_MARKER: [u8; 32] = [0; 32];
pub const DEFAULT_EPOCH_LEN: usize = 8;
pub const STATEMENT_LEN: usize = 32 * 3 + 8 + 32;
pub const CLIENT_STATE_LEN: usize = 32 + CHAIN_STATE_LEN + 8;
const _: () = assert!(CLIENT_STATE_LEN <= 256);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EpochStatement {
    pub prev_commitment: [u8; 32],
    pub start_state: [u8; 32],
    pub end_state: [u8; 32],
    pub n_headers: u64,
    /// Merkle root over the epoch's block hashes.
    pub headers_root: Hash256,
}

impl EpochStatement {
    pub fn encode(&self) -> [u8; STATEMENT_LEN] {
        let mut out = [0u8; STATEMENT_LEN];
        out[0..32].copy_from_slice(&self.prev_commitment);
        out[32..64].copy_from_slice(&self.start_state);
        out[64..96].copy_from_slice(&self.end_state);
        out[96..104].copy_from_slice(&self.n_headers.to_le_bytes());
        out[104..136].copy_from_slice(&self.headers_root.0);
        out
    }

    pub fn commitment(&self) -> [u8; 32] {
        sha256(&self.encode())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpochProof {
    pub statement: EpochStatement,
    pub backend: Backend,
    pub dv_blob: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClientState {
    pub latest_statement_commitment: [u8; 32],
    pub chain_state: ChainState,
    pub epochs_verified: u64,
}

/// Which check rejected a block.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EpochCheck {
    #[error("epoch has no blocks")]
    Empty,
    #[error("start state does not match the previous statement")]
    StartMismatch,
    #[error("header: {0}")]
    Header(HeaderError),
    #[error("block has no transactions")]
    EmptyBlock,
    #[error("transaction does not re-parse: {0}")]
    TxDecode(String),
    #[error("merkle root mismatch")]
    MerkleRoot,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LightClientError {
    #[error("invalid epoch at height {height}: {check}")]
    InvalidEpoch { height: u64, check: EpochCheck },
    #[error("epoch does not link to the client state")]
    LinkageBroken,
    #[error("epoch proof rejected: {0}")]
    ProofInvalid(String),
    #[error("malformed epoch proof: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("epoch {index}: {error}")]
pub struct SyncError {
    pub index: usize,
    pub error: LightClientError,
    /// State after the last accepted epoch.
    pub last_good: ClientState,
}

pub type EpochBlock = (BlockHeader, Vec<Transaction>);

/// Every consensus and body check for one epoch. Returns the end state.
pub fn check_epoch(start: &ChainState, blocks: &[EpochBlock], params: &ChainParams) -> Result<ChainState, LightClientError> {
    if blocks.is_empty() {
        return Err(LightClientError::InvalidEpoch { height: start.height + 1, check: EpochCheck::Empty });
    }
    let headers: Vec<BlockHeader> = blocks.iter().map(|(h, _)| *h).collect();
    let end = validate_chain(start, &headers, params)
        .map_err(|e| LightClientError::InvalidEpoch { height: e.height, check: EpochCheck::Header(e.kind) })?;
    for (i, (header, txs)) in blocks.iter().enumerate() {
        let height = start.height + 1 + i as u64;
        let fail = |check| LightClientError::InvalidEpoch { height, check };
        if txs.is_empty() {
            return Err(fail(EpochCheck::EmptyBlock));
        }
        let mut txids = Vec::with_capacity(txs.len());
        for tx in txs {
            let raw = tx.encode();
            match decode_tx(&raw) {
                Ok(parsed) if parsed == *tx => txids.push(parsed.txid()),
                Ok(_) => return Err(fail(EpochCheck::TxDecode("re-encoding differs".into()))),
                Err(e) => return Err(fail(EpochCheck::TxDecode(e.to_string()))),
            }
        }
        if merkle_root(&txids).ok() != Some(header.merkle_root) {
            return Err(fail(EpochCheck::MerkleRoot));
        }
    }
    Ok(end)
}

fn headers_root(blocks: &[EpochBlock]) -> Hash256 {
    let hashes: Vec<Hash256> = blocks.iter().map(|(h, _)| h.block_hash()).collect();
    merkle_root(&hashes).unwrap_or_default()
}

/// `prev = None` starts from genesis, in which case `start` must be the
/// genesis state of `params`.
pub fn prove_epoch(
    prev: Option<&EpochStatement>,
    start: &ChainState,
    blocks: &[EpochBlock],
    params: &ChainParams,
    dv_key: &DvKey,
    seed: &[u8],
) -> Result<EpochProof, LightClientError> {
    let linked = match prev {
        Some(p) => p.end_state == start.digest(),
        None => *start == ChainState::genesis(params),
    };
    if !linked {
        return Err(LightClientError::InvalidEpoch { height: start.height + 1, check: EpochCheck::StartMismatch });
    }
    let end = check_epoch(start, blocks, params)?;
    let statement = EpochStatement {
        prev_commitment: prev.map_or(GENESIS_MARKER, EpochStatement::commitment),
        start_state: start.digest(),
        end_state: end.digest(),
        n_headers: blocks.len() as u64,
        headers_root: headers_root(blocks),
    };
    Ok(seal_epoch(statement, start, blocks, dv_key, seed))
}

/// Seals `blocks` under `statement` without checking anything. Lets tests
/// build proofs a dishonest key holder could produce.
pub fn seal_epoch(
    statement: EpochStatement,
    start: &ChainState,
    blocks: &[EpochBlock],
    dv_key: &DvKey,
    seed: &[u8],
) -> EpochProof {
    let mut plain = start.encode().to_vec();
    write_varint(&mut plain, blocks.len() as u64);
    for (header, txs) in blocks {
        plain.extend_from_slice(&header.encode());
        write_var_bytes(&mut plain, &encode_block_body(txs));
    }
    let dv_blob = seal(dv_key, &statement.commitment(), &plain, seed);
    EpochProof { statement, backend: Backend::DesignatedVerifier, dv_blob }
}

fn decode_blob(plain: &[u8]) -> Result<(ChainState, Vec<EpochBlock>), CodecError> {
    let mut r = Reader::new(plain);
    let start = ChainState::decode(r.take(CHAIN_STATE_LEN)?)?;
    let n = r.count(HEADER_LEN + 1)?;
    let mut blocks = Vec::with_capacity(n);
    for _ in 0..n {
        let header = read_headers(r.take(HEADER_LEN)?)?[0];
        blocks.push((header, decode_block_body(r.var_bytes()?)?));
    }
    r.finish()?;
    Ok((start, blocks))
}

impl ClientState {
    pub fn genesis(params: &ChainParams) -> ClientState {
        ClientState {
            latest_statement_commitment: GENESIS_MARKER,
            chain_state: ChainState::genesis(params),
            epochs_verified: 0,
        }
    }

    pub fn encode(&self) -> [u8; CLIENT_STATE_LEN] {
        let mut out = [0u8; CLIENT_STATE_LEN];
        out[..32].copy_from_slice(&self.latest_statement_commitment);
        out[32..32 + CHAIN_STATE_LEN].copy_from_slice(&self.chain_state.encode());
        out[32 + CHAIN_STATE_LEN..].copy_from_slice(&self.epochs_verified.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<ClientState, CodecError> {
        if bytes.len() != CLIENT_STATE_LEN {
            return Err(CodecError::WrongLength { expected: CLIENT_STATE_LEN, got: bytes.len() });
        }
        Ok(ClientState {
            latest_statement_commitment: bytes[..32].try_into().unwrap(),
            chain_state: ChainState::decode(&bytes[32..32 + CHAIN_STATE_LEN])?,
            epochs_verified: u64::from_le_bytes(bytes[32 + CHAIN_STATE_LEN..].try_into().unwrap()),
        })
    }

    pub fn to_checkpoint(&self) -> ClientCheckpoint {
        ClientCheckpoint {
            chain: self.chain_state.to_checkpoint(),
            latest_statement_commitment: hex::encode(self.latest_statement_commitment),
            epochs_verified: self.epochs_verified,
        }
    }

    pub fn from_checkpoint(cp: &ClientCheckpoint) -> Result<ClientState, CodecError> {
        let commitment = hex::decode(&cp.latest_statement_commitment)
            .ok()
            .and_then(|b| b.try_into().ok())
            .ok_or_else(|| CodecError::InvalidHex("latest_statement_commitment".into()))?;
        Ok(ClientState {
            latest_statement_commitment: commitment,
            chain_state: ChainState::from_checkpoint(&cp.chain)?,
            epochs_verified: cp.epochs_verified,
        })
    }
}

/// Chain checkpoint fields plus the statement commitment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientCheckpoint {
    #[serde(flatten)]
    pub chain: Checkpoint,
    pub latest_statement_commitment: String,
    #[serde(default)]
    pub epochs_verified: u64,
}

pub fn verify_epoch(
    client: &ClientState,
    proof: &EpochProof,
    params: &ChainParams,
    dv_key: &DvKey,
) -> Result<ClientState, LightClientError> {
    let st = &proof.statement;
    if st.prev_commitment != client.latest_statement_commitment || st.start_state != client.chain_state.digest() {
        return Err(LightClientError::LinkageBroken);
    }
    if proof.backend != Backend::DesignatedVerifier {
        return Err(LightClientError::ProofInvalid(format!("backend {} cannot attest epochs", proof.backend)));
    }
    let commitment = st.commitment();
    let plain = open(dv_key, &commitment, &proof.dv_blob).map_err(|e| LightClientError::ProofInvalid(e.to_string()))?;
    let (start, blocks) = decode_blob(&plain).map_err(|e| LightClientError::ProofInvalid(e.to_string()))?;
    if start != client.chain_state {
        return Err(LightClientError::ProofInvalid("sealed start state differs".into()));
    }
    let end = check_epoch(&start, &blocks, params).map_err(|e| LightClientError::ProofInvalid(e.to_string()))?;
    if end.digest() != st.end_state || blocks.len() as u64 != st.n_headers || headers_root(&blocks) != st.headers_root {
        return Err(LightClientError::ProofInvalid("statement does not match sealed blocks".into()));
    }
    Ok(ClientState { latest_statement_commitment: commitment, chain_state: end, epochs_verified: client.epochs_verified + 1 })
}

/// Applies `proofs` in order, stopping at the first failure.
pub fn sync<'a>(
    client: &ClientState,
    proofs: impl IntoIterator<Item = &'a EpochProof>,
    params: &ChainParams,
    dv_key: &DvKey,
) -> Result<ClientState, SyncError> {
    let mut state = client.clone();
    for (index, proof) in proofs.into_iter().enumerate() {
        match verify_epoch(&state, proof, params, dv_key) {
            Ok(next) => state = next,
            Err(error) => return Err(SyncError { index, error, last_good: state }),
        }
    }
    Ok(state)
}

/// Splits blocks `1..` of a generated chain into epochs of `epoch_len` and
/// proves each one. The last epoch may be shorter.
pub fn prove_chain(
    chain: &TestChain,
    epoch_len: usize,
    dv_key: &DvKey,
    seed: &[u8],
) -> Result<Vec<EpochProof>, LightClientError> {
    if epoch_len == 0 {
        return Err(LightClientError::InvalidEpoch { height: 1, check: EpochCheck::Empty });
    }
    let mut state = ChainState::genesis(&chain.params);
    let mut prev: Option<EpochStatement> = None;
    let mut proofs = Vec::new();
    for chunk in chain.blocks[1..].chunks(epoch_len) {
        let blocks: Vec<EpochBlock> = chunk.iter().map(|b| (b.header, b.txs.clone())).collect();
        let proof = prove_epoch(prev.as_ref(), &state, &blocks, &chain.params, dv_key, seed)?;
        state = check_epoch(&state, &blocks, &chain.params)?;
        prev = Some(proof.statement);
        proofs.push(proof);
    }
    Ok(proofs)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatementJson {
    pub prev: String,
    pub start: String,
    pub end: String,
    pub n: u64,
    pub headers_root: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochProofJson {
    pub statement: StatementJson,
    pub backend: String,
    pub dv_blob: String,
}

impl EpochProof {
    pub fn to_json(&self) -> EpochProofJson {
        let st = &self.statement;
        EpochProofJson {
            statement: StatementJson {
                prev: hex::encode(st.prev_commitment),
                start: hex::encode(st.start_state),
                end: hex::encode(st.end_state),
                n: st.n_headers,
                headers_root: hex::encode(st.headers_root.0),
            },
            backend: self.backend.to_string(),
            dv_blob: hex::encode(&self.dv_blob),
        }
    }

    pub fn from_json(j: &EpochProofJson) -> Result<EpochProof, LightClientError> {
        fn h32(s: &str) -> Result<[u8; 32], LightClientError> {
            hex::decode(s)
                .ok()
                .and_then(|b| b.try_into().ok())
                .ok_or_else(|| LightClientError::Malformed(format!("expected 32 hex bytes, got {s:?}")))
        }
        let st = &j.statement;
        if st.n == 0 {
            return Err(LightClientError::Malformed("n must be at least 1".into()));
        }
        Ok(EpochProof {
            statement: EpochStatement {
                prev_commitment: h32(&st.prev)?,
                start_state: h32(&st.start)?,
                end_state: h32(&st.end)?,
                n_headers: st.n,
                headers_root: Hash256(h32(&st.headers_root)?),
            },
            backend: j.backend.parse().map_err(|e: crate::por::PorError| LightClientError::Malformed(e.to_string()))?,
            dv_blob: hex::decode(&j.dv_blob).map_err(|e| LightClientError::Malformed(e.to_string()))?,
        })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("serializable") + "\n"
    }

    pub fn from_json_str(s: &str) -> Result<EpochProof, LightClientError> {
        let j: EpochProofJson = serde_json::from_str(s).map_err(|e| LightClientError::Malformed(e.to_string()))?;
        EpochProof::from_json(&j)
    }
}
