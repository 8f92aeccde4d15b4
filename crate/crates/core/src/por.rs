//! Proof of reserve: the statement "I control an unspent P2PKH output worth
//! more than X satoshis in this header chain".
//!
//! [`check_relation`] is the reference predicate. Two proof backends sit on
//! top of it:
//!
//! * `designated-verifier` seals the whole witness under a key shared with
//!   the verifier, who decrypts it and re-runs [`check_relation`]. Sound for
//!   the full relation, not zero-knowledge.
//! * `hybrid` proves knowledge of the output key (Schnorr sigma protocol)
//!   and `v > X` (STARK), both bound through one Fiat–Shamir context to a
//!   salted commitment to `(v, txid, vout)`. The commitment is never opened,
//!   so inclusion, unspentness and the key-to-script link are NOT proven.
//!   A hybrid acceptance is reported as [`PorGuarantee::ThresholdAndKeyKnowledge`],
//!   never as a full reserve proof.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::codec::{
    build_merkle_branch, decode_tx, merkle_root, read_varint, verify_merkle_branch_strict,
    write_var_bytes, write_varint, BlockHeader, CodecError, Hash256, MerkleBranch, Reader,
    Transaction,
};
use crate::crypto::{pubkey_hash, sha256, sigma_prove, sigma_verify, Point, PubKeyHash, SecretKey, Sha256, SigmaProof};
use crate::sealed::{open, seal, DvKey};
use crate::stark::{
    prove_trace, stark_prove_threshold, stark_verify_threshold, trace_from_bits,
    GElement, StarkConfig, StarkProof, StarkProofJson,
};
use crate::testchain::TestChain;

pub const PROOF_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PorPublicInputs {
    pub threshold_x: u64,
    pub headers: Vec<BlockHeader>,
}

impl PorPublicInputs {
    /// `threshold (8 bytes LE) ‖ headers (80 bytes each)`.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 80 * self.headers.len());
        out.extend_from_slice(&self.threshold_x.to_le_bytes());
        for h in &self.headers {
            out.extend_from_slice(&h.encode());
        }
        out
    }

    pub fn digest(&self) -> [u8; 32] {
        sha256(&self.encode())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScanBlock {
    pub block_index: usize,
    pub raw_txs: Vec<Vec<u8>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PorWitness {
    pub raw_tx: Vec<u8>,
    pub vout: u32,
    pub secret_key: SecretKey,
    pub merkle_branch: MerkleBranch,
    pub block_index: usize,
    /// Full bodies of every block after `block_index`.
    pub spend_scan_blocks: Vec<ScanBlock>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RelationFailure {
    InclusionFailed,
    NotP2pkh,
    ValueBelowThreshold,
    KeyMismatch,
    SpentUtxo,
    ScanIncomplete,
}

impl fmt::Display for RelationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RelationVerdict {
    pub accepted: bool,
    pub failure: Option<RelationFailure>,
}

impl RelationVerdict {
    const ACCEPT: RelationVerdict = RelationVerdict { accepted: true, failure: None };

    fn reject(f: RelationFailure) -> Self {
        RelationVerdict { accepted: false, failure: Some(f) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PorError {
    #[error("output index {vout} out of range for {outputs} outputs")]
    IndexOutOfRange { vout: u32, outputs: usize },
    #[error("script is not a P2PKH template")]
    NotP2pkh,
    #[error("witness does not satisfy the relation: {0}")]
    RelationUnsatisfied(RelationFailure),
    #[error("unknown backend {0:?}")]
    UnknownBackend(String),
    #[error("designated-verifier proof needs a key")]
    MissingDvKey,
    #[error("malformed proof: {0}")]
    Malformed(String),
    #[error("fixture: {0}")]
    Fixture(String),
}

/// Value and locking script of output `vout`.
pub fn extract_output(tx: &Transaction, vout: u32) -> Result<(u64, Vec<u8>), PorError> {
    tx.outputs
        .get(vout as usize)
        .map(|o| (o.value, o.script_pubkey.clone()))
        .ok_or(PorError::IndexOutOfRange { vout, outputs: tx.outputs.len() })
}

/// Accepts exactly `76 a9 14 <20 bytes> 88 ac`.
pub fn parse_p2pkh(script: &[u8]) -> Result<PubKeyHash, PorError> {
    match script {
        [0x76, 0xa9, 0x14, hash @ .., 0x88, 0xac] if hash.len() == 20 => {
            Ok(PubKeyHash(hash.try_into().unwrap()))
        }
        _ => Err(PorError::NotP2pkh),
    }
}

/// Checks, in order: inclusion, P2PKH form, `v > X`, key ownership, and that
/// no authenticated later block spends the output.
pub fn check_relation(public: &PorPublicInputs, w: &PorWitness) -> RelationVerdict {
    use RelationFailure::*;
    let Ok(tx) = decode_tx(&w.raw_tx) else {
        return RelationVerdict::reject(InclusionFailed);
    };
    let txid = tx.txid();
    let Some(header) = public.headers.get(w.block_index) else {
        return RelationVerdict::reject(InclusionFailed);
    };
    if !verify_merkle_branch_strict(&txid, &w.merkle_branch, &header.merkle_root) {
        return RelationVerdict::reject(InclusionFailed);
    }
    let Ok((value, script)) = extract_output(&tx, w.vout) else {
        return RelationVerdict::reject(NotP2pkh);
    };
    let Ok(pkh) = parse_p2pkh(&script) else {
        return RelationVerdict::reject(NotP2pkh);
    };
    if value <= public.threshold_x {
        return RelationVerdict::reject(ValueBelowThreshold);
    }
    if pubkey_hash(&w.secret_key.public_key()).ok() != Some(pkh) {
        return RelationVerdict::reject(KeyMismatch);
    }
    match scan_for_spend(public, w, &txid) {
        Ok(false) => RelationVerdict::ACCEPT,
        Ok(true) => RelationVerdict::reject(SpentUtxo),
        Err(()) => RelationVerdict::reject(ScanIncomplete),
    }
}

/// `Err` when coverage is incomplete or a block body fails to authenticate.
fn scan_for_spend(public: &PorPublicInputs, w: &PorWitness, txid: &Hash256) -> Result<bool, ()> {
    let required: BTreeSet<usize> = (w.block_index + 1..public.headers.len()).collect();
    let mut seen = BTreeSet::new();
    let mut spent = false;
    for block in &w.spend_scan_blocks {
        if !required.contains(&block.block_index) || !seen.insert(block.block_index) {
            return Err(());
        }
        let txs: Vec<Transaction> =
            block.raw_txs.iter().map(|raw| decode_tx(raw)).collect::<Result<_, _>>().map_err(|_| ())?;
        let txids: Vec<Hash256> = txs.iter().map(Transaction::txid).collect();
        if merkle_root(&txids).ok() != Some(public.headers[block.block_index].merkle_root) {
            return Err(());
        }
        spent |= txs
            .iter()
            .flat_map(|t| &t.inputs)
            .any(|i| i.prevout.txid == *txid && i.prevout.vout == w.vout);
    }
    if seen != required {
        return Err(());
    }
    Ok(spent)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Backend {
    DesignatedVerifier,
    Hybrid,
}

impl Backend {
    pub fn as_str(&self) -> &'static str {
        match self {
            Backend::DesignatedVerifier => "designated-verifier",
            Backend::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Backend {
    type Err = PorError;
    fn from_str(s: &str) -> Result<Self, PorError> {
        match s {
            "designated-verifier" | "dv" => Ok(Backend::DesignatedVerifier),
            "hybrid" => Ok(Backend::Hybrid),
            other => Err(PorError::UnknownBackend(other.to_string())),
        }
    }
}

/// Prover-side backend selection; the designated-verifier backend needs the
/// verifier's key.
#[derive(Clone, Debug)]
pub enum ProverBackend {
    DesignatedVerifier(DvKey),
    Hybrid,
}

impl ProverBackend {
    pub fn backend(&self) -> Backend {
        match self {
            ProverBackend::DesignatedVerifier(_) => Backend::DesignatedVerifier,
            ProverBackend::Hybrid => Backend::Hybrid,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PorProof {
    pub backend: Backend,
    pub public_digest: [u8; 32],
    pub witness_commitment: [u8; 32],
    pub sigma: SigmaProof,
    /// Compressed key the sigma proof is about (hybrid only).
    pub pubkey: Option<Point>,
    pub stark: Option<StarkProof>,
    pub dv_blob: Option<Vec<u8>>,
}

/// What an accepted proof establishes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PorGuarantee {
    /// Knowledge of a secret key and of some `v > X`, both bound to the same
    /// committed outpoint. Inclusion and unspentness are not covered.
    ThresholdAndKeyKnowledge,
    /// Every clause of [`check_relation`], checked by the key holder.
    FullRelation,
}

fn derive_salt(seed: &[u8], sk: &SecretKey, digest: &[u8; 32], txid: &Hash256, vout: u32) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"zkbtc/por-salt")
        .update(&(seed.len() as u64).to_le_bytes())
        .update(seed)
        .update(&sk.to_be_bytes())
        .update(digest)
        .update(&txid.0)
        .update(&vout.to_le_bytes());
    h.finalize()
}

/// `sha256(salt ‖ v (8 bytes LE) ‖ txid ‖ vout (4 bytes LE))`.
pub fn witness_commitment(salt: &[u8; 32], value: u64, txid: &Hash256, vout: u32) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(salt).update(&value.to_le_bytes()).update(&txid.0).update(&vout.to_le_bytes());
    h.finalize()
}

fn context(digest: &[u8; 32], commitment: &[u8; 32]) -> Vec<u8> {
    [&digest[..], &commitment[..]].concat()
}

pub fn por_prove(
    public: &PorPublicInputs,
    witness: &PorWitness,
    backend: &ProverBackend,
    seed: &[u8],
) -> Result<PorProof, PorError> {
    let verdict = check_relation(public, witness);
    if let Some(f) = verdict.failure {
        return Err(PorError::RelationUnsatisfied(f));
    }
    assemble_unchecked(public, witness, backend, seed)
}

/// Builds a proof without the relation self-check. For a witness with
/// `v <= X` the STARK is attempted over the field-wrapped trace. Exposed so
/// soundness tests can attempt forgeries.
pub fn assemble_unchecked(
    public: &PorPublicInputs,
    witness: &PorWitness,
    backend: &ProverBackend,
    seed: &[u8],
) -> Result<PorProof, PorError> {
    let tx = decode_tx(&witness.raw_tx).map_err(|e| PorError::Malformed(e.to_string()))?;
    let txid = tx.txid();
    let value = tx.outputs.get(witness.vout as usize).map_or(0, |o| o.value);
    let digest = public.digest();
    let salt = derive_salt(seed, &witness.secret_key, &digest, &txid, witness.vout);
    let commitment = witness_commitment(&salt, value, &txid, witness.vout);
    let ctx = context(&digest, &commitment);
    let pubkey = witness.secret_key.public_key();
    let sigma = sigma_prove(&witness.secret_key, &pubkey, &ctx, seed)
        .map_err(|e| PorError::Malformed(e.to_string()))?;
    let mut proof = PorProof {
        backend: backend.backend(),
        public_digest: digest,
        witness_commitment: commitment,
        sigma,
        pubkey: None,
        stark: None,
        dv_blob: None,
    };
    match backend {
        ProverBackend::Hybrid => {
            let x = public.threshold_x;
            let stark = match stark_prove_threshold(value, x, &salt, &ctx, true) {
                Ok(p) => p,
                Err(_) => {
                    let wrapped = GElement::new(value) - GElement::new(x) - GElement::ONE;
                    let trace = trace_from_bits(GElement::new(value), wrapped.value());
                    prove_trace(&trace, x, &salt, &ctx, true, &StarkConfig::default())
                        .map_err(|e| PorError::Malformed(e.to_string()))?
                }
            };
            proof.pubkey = Some(pubkey);
            proof.stark = Some(stark);
        }
        ProverBackend::DesignatedVerifier(key) => {
            proof.dv_blob = Some(seal(key, &digest, &encode_sealed_witness(witness, &salt), seed));
        }
    }
    Ok(proof)
}

pub fn por_verify(public: &PorPublicInputs, proof: &PorProof, dv_key: Option<&DvKey>) -> Result<bool, PorError> {
    Ok(por_verify_guarantee(public, proof, dv_key)?.is_some())
}

/// `Ok(None)` for a rejected proof.
pub fn por_verify_guarantee(
    public: &PorPublicInputs,
    proof: &PorProof,
    dv_key: Option<&DvKey>,
) -> Result<Option<PorGuarantee>, PorError> {
    let digest = public.digest();
    if proof.public_digest != digest {
        return Ok(None);
    }
    let ctx = context(&digest, &proof.witness_commitment);
    if proof.sigma.context != ctx {
        return Ok(None);
    }
    match proof.backend {
        Backend::Hybrid => {
            let (Some(pubkey), Some(stark)) = (&proof.pubkey, &proof.stark) else {
                return Ok(None);
            };
            let ok = sigma_verify(pubkey, &proof.sigma) && stark_verify_threshold(public.threshold_x, stark, &ctx);
            Ok(ok.then_some(PorGuarantee::ThresholdAndKeyKnowledge))
        }
        Backend::DesignatedVerifier => {
            let key = dv_key.ok_or(PorError::MissingDvKey)?;
            let Some(blob) = &proof.dv_blob else {
                return Ok(None);
            };
            let Ok(plain) = open(key, &digest, blob) else {
                return Ok(None);
            };
            let Ok((witness, salt)) = decode_sealed_witness(&plain) else {
                return Ok(None);
            };
            let Ok(tx) = decode_tx(&witness.raw_tx) else {
                return Ok(None);
            };
            let value = tx.outputs.get(witness.vout as usize).map_or(0, |o| o.value);
            let ok = witness_commitment(&salt, value, &tx.txid(), witness.vout) == proof.witness_commitment
                && sigma_verify(&witness.secret_key.public_key(), &proof.sigma)
                && check_relation(public, &witness).accepted;
            Ok(ok.then_some(PorGuarantee::FullRelation))
        }
    }
}

fn encode_sealed_witness(w: &PorWitness, salt: &[u8; 32]) -> Vec<u8> {
    let mut out = Vec::new();
    write_var_bytes(&mut out, &w.raw_tx);
    out.extend_from_slice(&w.vout.to_le_bytes());
    out.extend_from_slice(&w.secret_key.to_be_bytes());
    out.extend_from_slice(&w.merkle_branch.leaf_index.to_le_bytes());
    write_varint(&mut out, w.merkle_branch.siblings.len() as u64);
    for s in &w.merkle_branch.siblings {
        out.extend_from_slice(&s.0);
    }
    write_varint(&mut out, w.block_index as u64);
    write_varint(&mut out, w.spend_scan_blocks.len() as u64);
    for b in &w.spend_scan_blocks {
        write_varint(&mut out, b.block_index as u64);
        write_varint(&mut out, b.raw_txs.len() as u64);
        for tx in &b.raw_txs {
            write_var_bytes(&mut out, tx);
        }
    }
    out.extend_from_slice(salt);
    out
}

fn decode_sealed_witness(bytes: &[u8]) -> Result<(PorWitness, [u8; 32]), CodecError> {
    let mut r = Reader::new(bytes);
    let raw_tx = r.var_bytes()?.to_vec();
    let vout = r.u32_le()?;
    let secret_key = SecretKey::from_be_bytes(&r.take_array()?)
        .map_err(|_| CodecError::InvalidHex("secret key out of range".into()))?;
    let leaf_index = r.u32_le()?;
    let n = r.count(32)?;
    let siblings = (0..n).map(|_| r.hash()).collect::<Result<_, _>>()?;
    let block_index = read_varint(&mut r)? as usize;
    let n_blocks = r.count(2)?;
    let mut spend_scan_blocks = Vec::with_capacity(n_blocks);
    for _ in 0..n_blocks {
        let block_index = read_varint(&mut r)? as usize;
        let n_txs = r.count(1)?;
        let raw_txs = (0..n_txs).map(|_| r.var_bytes().map(<[u8]>::to_vec)).collect::<Result<_, _>>()?;
        spend_scan_blocks.push(ScanBlock { block_index, raw_txs });
    }
    let salt = r.take_array()?;
    r.finish()?;
    let witness = PorWitness {
        raw_tx,
        vout,
        secret_key,
        merkle_branch: MerkleBranch { leaf_index, siblings },
        block_index,
        spend_scan_blocks,
    };
    Ok((witness, salt))
}

/// JSON envelope of a [`PorProof`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PorProofFile {
    pub version: u32,
    pub backend: String,
    pub public_digest: String,
    pub witness_commitment: String,
    pub sigma: String,
    pub pubkey: Option<String>,
    pub stark: Option<StarkProofJson>,
    pub dv_blob: Option<String>,
}

fn hex32(s: &str, what: &str) -> Result<[u8; 32], PorError> {
    hex::decode(s)
        .ok()
        .and_then(|b| b.try_into().ok())
        .ok_or_else(|| PorError::Malformed(format!("{what} must be 32 bytes of hex")))
}

impl PorProof {
    pub fn to_file(&self) -> PorProofFile {
        PorProofFile {
            version: PROOF_VERSION,
            backend: self.backend.to_string(),
            public_digest: hex::encode(self.public_digest),
            witness_commitment: hex::encode(self.witness_commitment),
            sigma: hex::encode(self.sigma.to_bytes()),
            pubkey: self.pubkey.map(|p| hex::encode(p.to_compressed().expect("sigma key is finite"))),
            stark: self.stark.as_ref().map(StarkProof::to_json),
            dv_blob: self.dv_blob.as_ref().map(hex::encode),
        }
    }

    pub fn from_file(f: &PorProofFile) -> Result<PorProof, PorError> {
        if f.version != PROOF_VERSION {
            return Err(PorError::Malformed(format!("unsupported version {}", f.version)));
        }
        let malformed = |e: &dyn fmt::Display| PorError::Malformed(e.to_string());
        let bytes = |s: &str| hex::decode(s).map_err(|e| malformed(&e));
        let pubkey = match &f.pubkey {
            Some(s) => Some(Point::from_compressed(&bytes(s)?).map_err(|e| malformed(&e))?),
            None => None,
        };
        let stark = match &f.stark {
            Some(j) => Some(StarkProof::from_json(j).map_err(|e| malformed(&e))?),
            None => None,
        };
        Ok(PorProof {
            backend: f.backend.parse()?,
            public_digest: hex32(&f.public_digest, "public_digest")?,
            witness_commitment: hex32(&f.witness_commitment, "witness_commitment")?,
            sigma: SigmaProof::from_bytes(&bytes(&f.sigma)?).map_err(|e| malformed(&e))?,
            pubkey,
            stark,
            dv_blob: f.dv_blob.as_deref().map(bytes).transpose()?,
        })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("serializable") + "\n"
    }

    pub fn from_json_str(s: &str) -> Result<PorProof, PorError> {
        let file: PorProofFile = serde_json::from_str(s).map_err(|e| PorError::Malformed(e.to_string()))?;
        PorProof::from_file(&file)
    }
}

/// Public inputs over every header of a generated chain.
pub fn public_inputs_from_chain(chain: &TestChain, threshold_x: u64) -> PorPublicInputs {
    PorPublicInputs { threshold_x, headers: chain.headers() }
}

/// Witness for output `vout` of transaction `tx_index` in block `tx_block`,
/// claimed with key `key_index`, scanning every later block.
pub fn witness_from_chain(
    chain: &TestChain,
    tx_block: usize,
    tx_index: usize,
    vout: u32,
    key_index: usize,
) -> Result<PorWitness, PorError> {
    let block = chain
        .blocks
        .get(tx_block)
        .ok_or_else(|| PorError::Fixture(format!("no block {tx_block}")))?;
    let tx = block
        .txs
        .get(tx_index)
        .ok_or_else(|| PorError::Fixture(format!("no transaction {tx_index} in block {tx_block}")))?;
    let secret_key = *chain
        .keys
        .get(key_index)
        .ok_or_else(|| PorError::Fixture(format!("no key {key_index}")))?;
    let merkle_branch =
        build_merkle_branch(&block.txids(), tx_index).map_err(|e| PorError::Fixture(e.to_string()))?;
    let spend_scan_blocks = chain.blocks[tx_block + 1..]
        .iter()
        .enumerate()
        .map(|(i, b)| ScanBlock {
            block_index: tx_block + 1 + i,
            raw_txs: b.txs.iter().map(Transaction::encode).collect(),
        })
        .collect();
    Ok(PorWitness { raw_tx: tx.encode(), vout, secret_key, merkle_branch, block_index: tx_block, spend_scan_blocks })
}
