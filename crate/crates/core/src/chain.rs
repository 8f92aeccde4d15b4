//! Header-chain state transition: proof of work, linkage, difficulty
//! retargeting and cumulative work.
//!
//! Retargeting follows Bitcoin consensus exactly, including the historical
//! off-by-one: an epoch's timespan is measured from its first block to its
//! last, i.e. over `interval - 1` gaps. Median-time-past, future timestamp
//! and reorg handling are not modelled.

use serde::{Deserialize, Serialize};

use crate::codec::{
    decode_header, nbits_to_target, target_to_nbits, BlockHeader, CodecError, CompactError,
    Hash256,
};
use crate::crypto::sha256;
use crate::uint::U256;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainParams {
    pub retarget_interval: u32,
    pub target_timespan: u64,
    pub clamp_factor: u64,
    pub max_target: U256,
    pub genesis: BlockHeader,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParamsError {
    #[error("retarget interval must be at least 1")]
    ZeroInterval,
    #[error("clamp factor must exceed 1")]
    BadClampFactor,
    #[error("target timespan must be at least the clamp factor")]
    BadTimespan,
    #[error("genesis nbits: {0}")]
    GenesisTarget(#[from] CompactError),
    #[error("invalid params file: {0}")]
    Format(String),
}

impl ChainParams {
    pub fn new(
        retarget_interval: u32,
        target_timespan: u64,
        clamp_factor: u64,
        max_target: U256,
        genesis: BlockHeader,
    ) -> Result<Self, ParamsError> {
        if retarget_interval == 0 {
            return Err(ParamsError::ZeroInterval);
        }
        if clamp_factor <= 1 {
            return Err(ParamsError::BadClampFactor);
        }
        if target_timespan < clamp_factor {
            return Err(ParamsError::BadTimespan);
        }
        if nbits_to_target(genesis.nbits)?.is_zero() {
            return Err(ParamsError::GenesisTarget(CompactError::ZeroTarget));
        }
        Ok(ChainParams { retarget_interval, target_timespan, clamp_factor, max_target, genesis })
    }

    /// Bitcoin mainnet rules and genesis block.
    pub fn mainnet() -> Self {
        let genesis = decode_header(
            &hex::decode(MAINNET_GENESIS_HEX).expect("static hex"),
        )
        .expect("static header");
        ChainParams {
            retarget_interval: 2016,
            target_timespan: 14 * 24 * 60 * 60,
            clamp_factor: 4,
            max_target: nbits_to_target(0x1d00ffff).expect("static nbits"),
            genesis,
        }
    }

    pub fn to_file(&self) -> ParamsFile {
        ParamsFile {
            retarget_interval: self.retarget_interval,
            target_timespan: self.target_timespan,
            clamp_factor: self.clamp_factor,
            max_target: self.max_target,
            genesis: hex::encode(self.genesis.encode()),
        }
    }

    pub fn from_file(f: &ParamsFile) -> Result<Self, ParamsError> {
        let bytes = hex::decode(&f.genesis).map_err(|e| ParamsError::Format(e.to_string()))?;
        let genesis = decode_header(&bytes).map_err(|e| ParamsError::Format(e.to_string()))?;
        Self::new(f.retarget_interval, f.target_timespan, f.clamp_factor, f.max_target, genesis)
    }
}

pub const MAINNET_GENESIS_HEX: &str = "0100000000000000000000000000000000000000000000000000000000000000000000003ba3edfd7a7b12b27ac72c3e67768f617fc81bc3888a51323a9fb8aa4b1e5e4a29ab5f49ffff001d1dac2b7c";

/// `params.json` layout.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub retarget_interval: u32,
    pub target_timespan: u64,
    pub clamp_factor: u64,
    pub max_target: U256,
    /// Hex of the 80-byte genesis header.
    pub genesis: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainState {
    pub height: u64,
    pub tip_hash: Hash256,
    pub tip_header: BlockHeader,
    pub current_nbits: u32,
    pub cumulative_work: U256,
    pub epoch_start_timestamp: u32,
}

pub const CHAIN_STATE_LEN: usize = 8 + 32 + 80 + 4 + 32 + 4;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HeaderError {
    #[error("prev_hash {got} does not link to tip {expected}")]
    BadLinkage { expected: Hash256, got: Hash256 },
    #[error("block hash {hash} exceeds target")]
    PowNotSatisfied { hash: Hash256 },
    #[error("nbits {got:#010x} differs from required {expected:#010x}")]
    WrongDifficulty { expected: u32, got: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("header at height {height} rejected: {kind}")]
pub struct ChainError {
    pub height: u64,
    pub kind: HeaderError,
}

impl ChainState {
    pub fn genesis(params: &ChainParams) -> ChainState {
        let g = params.genesis;
        ChainState {
            height: 0,
            tip_hash: g.block_hash(),
            tip_header: g,
            current_nbits: g.nbits,
            cumulative_work: work(g.nbits).unwrap_or(U256::ZERO),
            epoch_start_timestamp: g.timestamp,
        }
    }

    /// Fixed-size binary encoding, used for digests and client storage.
    pub fn encode(&self) -> [u8; CHAIN_STATE_LEN] {
        let mut out = [0u8; CHAIN_STATE_LEN];
        out[0..8].copy_from_slice(&self.height.to_le_bytes());
        out[8..40].copy_from_slice(&self.tip_hash.0);
        out[40..120].copy_from_slice(&self.tip_header.encode());
        out[120..124].copy_from_slice(&self.current_nbits.to_le_bytes());
        out[124..156].copy_from_slice(&self.cumulative_work.to_le_bytes());
        out[156..160].copy_from_slice(&self.epoch_start_timestamp.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<ChainState, CodecError> {
        if bytes.len() != CHAIN_STATE_LEN {
            return Err(CodecError::WrongLength { expected: CHAIN_STATE_LEN, got: bytes.len() });
        }
        let tip_header = decode_header(&bytes[40..120])?;
        let tip_hash = Hash256(bytes[8..40].try_into().unwrap());
        if tip_header.block_hash() != tip_hash {
            return Err(CodecError::InvalidHex("tip_hash does not match tip_header".into()));
        }
        Ok(ChainState {
            height: u64::from_le_bytes(bytes[0..8].try_into().unwrap()),
            tip_hash,
            tip_header,
            current_nbits: u32::from_le_bytes(bytes[120..124].try_into().unwrap()),
            cumulative_work: U256::from_le_bytes(bytes[124..156].try_into().unwrap()),
            epoch_start_timestamp: u32::from_le_bytes(bytes[156..160].try_into().unwrap()),
        })
    }

    pub fn digest(&self) -> [u8; 32] {
        sha256(&self.encode())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            height: self.height,
            tip_hash: self.tip_hash,
            tip_header: hex::encode(self.tip_header.encode()),
            nbits: format!("{:08x}", self.current_nbits),
            cumulative_work: self.cumulative_work,
            epoch_start_timestamp: self.epoch_start_timestamp,
        }
    }

    pub fn from_checkpoint(cp: &Checkpoint) -> Result<ChainState, CodecError> {
        let header = decode_header(&crate::codec::decode_hex(&cp.tip_header)?)?;
        if header.block_hash() != cp.tip_hash {
            return Err(CodecError::InvalidHex("tip_hash does not match tip_header".into()));
        }
        let nbits = u32::from_str_radix(&cp.nbits, 16)
            .map_err(|e| CodecError::InvalidHex(e.to_string()))?;
        Ok(ChainState {
            height: cp.height,
            tip_hash: cp.tip_hash,
            tip_header: header,
            current_nbits: nbits,
            cumulative_work: cp.cumulative_work,
            epoch_start_timestamp: cp.epoch_start_timestamp,
        })
    }
}

/// Checkpoint JSON. `tip_header` is carried alongside `tip_hash` because the
/// next retarget needs the tip's timestamp.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub height: u64,
    pub tip_hash: Hash256,
    pub tip_header: String,
    pub nbits: String,
    pub cumulative_work: U256,
    pub epoch_start_timestamp: u32,
}

/// Expected work for a target: `floor(2^256 / (target + 1))`.
pub fn work(nbits: u32) -> Result<U256, CompactError> {
    let target = nbits_to_target(nbits)?;
    work_for_target(&target)
}

pub fn work_for_target(target: &U256) -> Result<U256, CompactError> {
    if target.is_zero() {
        return Err(CompactError::ZeroTarget);
    }
    if *target == U256::MAX {
        return Ok(U256::ONE);
    }
    // 2^256 / (t+1) == (2^256 - t - 1) / (t+1) + 1 == !t / (t+1) + 1
    let denom = target.wrapping_add(&U256::ONE);
    Ok((!*target).div_rem(&denom).0.wrapping_add(&U256::ONE))
}

/// Timespan fed to the retarget formula, before clamping.
pub fn epoch_timespan(state: &ChainState) -> i64 {
    state.tip_header.timestamp as i64 - state.epoch_start_timestamp as i64
}

/// Retargets `old_target` for an observed timespan.
pub fn retarget(old_target: &U256, actual_timespan: i64, params: &ChainParams) -> U256 {
    let min = (params.target_timespan / params.clamp_factor) as i64;
    let max = params.target_timespan.saturating_mul(params.clamp_factor) as i64;
    let clamped = actual_timespan.clamp(min, max) as u64;
    match old_target.mul_div_u64(clamped, params.target_timespan) {
        Some(t) if t <= params.max_target => t,
        _ => params.max_target,
    }
}

pub fn expected_nbits(state: &ChainState, params: &ChainParams) -> u32 {
    let next_height = state.height + 1;
    if next_height % params.retarget_interval as u64 != 0 {
        return state.current_nbits;
    }
    let old = nbits_to_target(state.current_nbits).unwrap_or(params.max_target);
    let new = retarget(&old, epoch_timespan(state), params);
    target_to_nbits(&new).unwrap_or(state.current_nbits)
}

/// Whether the header's hash, read as a little-endian integer, meets its own target.
pub fn meets_target(header: &BlockHeader) -> bool {
    match nbits_to_target(header.nbits) {
        Ok(target) => U256::from_le_bytes(&header.block_hash().0) <= target,
        Err(_) => false,
    }
}

pub fn validate_header(
    state: &ChainState,
    header: &BlockHeader,
    params: &ChainParams,
) -> Result<ChainState, HeaderError> {
    if header.prev_hash != state.tip_hash {
        return Err(HeaderError::BadLinkage { expected: state.tip_hash, got: header.prev_hash });
    }
    let expected = expected_nbits(state, params);
    if header.nbits != expected {
        return Err(HeaderError::WrongDifficulty { expected, got: header.nbits });
    }
    let hash = header.block_hash();
    if !meets_target(header) {
        return Err(HeaderError::PowNotSatisfied { hash });
    }
    let height = state.height + 1;
    let header_work = work(header.nbits).expect("expected nbits is a valid non-zero target");
    let epoch_start_timestamp = if height % params.retarget_interval as u64 == 0 {
        header.timestamp
    } else {
        state.epoch_start_timestamp
    };
    Ok(ChainState {
        height,
        tip_hash: hash,
        tip_header: *header,
        current_nbits: header.nbits,
        cumulative_work: state.cumulative_work.wrapping_add(&header_work),
        epoch_start_timestamp,
    })
}

/// Left fold of [`validate_header`], stopping at the first bad header.
pub fn validate_chain(
    start: &ChainState,
    headers: &[BlockHeader],
    params: &ChainParams,
) -> Result<ChainState, ChainError> {
    headers.iter().try_fold(start.clone(), |state, h| {
        validate_header(&state, h, params)
            .map_err(|kind| ChainError { height: state.height + 1, kind })
    })
}
