use serde::{Deserialize, Serialize};

use super::{write_var_bytes, write_varint, CodecError, Hash256, Reader};

/// 21 million BTC in satoshis.
pub const MAX_MONEY: u64 = 21_000_000 * 100_000_000;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct OutPoint {
    pub txid: Hash256,
    pub vout: u32,
}

impl OutPoint {
    pub const NULL: OutPoint = OutPoint { txid: Hash256::ZERO, vout: u32::MAX };

    pub fn is_null(&self) -> bool {
        *self == Self::NULL
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TxIn {
    pub prevout: OutPoint,
    pub script_sig: Vec<u8>,
    pub sequence: u32,
    /// Witness stack; empty for legacy inputs.
    pub witness: Vec<Vec<u8>>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TxOut {
    pub value: u64,
    pub script_pubkey: Vec<u8>,
}

/// A transaction. When `has_witness` is false every input's witness must be
/// empty; the witness data is otherwise dropped by `encode`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Transaction {
    pub version: i32,
    pub inputs: Vec<TxIn>,
    pub outputs: Vec<TxOut>,
    pub locktime: u32,
    pub has_witness: bool,
}

impl Transaction {
    /// Full serialization (segwit form when `has_witness`).
    pub fn encode(&self) -> Vec<u8> {
        self.serialize(self.has_witness)
    }

    /// Serialization without marker, flag and witnesses.
    pub fn encode_stripped(&self) -> Vec<u8> {
        self.serialize(false)
    }

    fn serialize(&self, with_witness: bool) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + 64 * self.inputs.len() + 40 * self.outputs.len());
        out.extend_from_slice(&self.version.to_le_bytes());
        if with_witness {
            out.extend_from_slice(&[0x00, 0x01]);
        }
        write_varint(&mut out, self.inputs.len() as u64);
        for input in &self.inputs {
            out.extend_from_slice(&input.prevout.txid.0);
            out.extend_from_slice(&input.prevout.vout.to_le_bytes());
            write_var_bytes(&mut out, &input.script_sig);
            out.extend_from_slice(&input.sequence.to_le_bytes());
        }
        write_varint(&mut out, self.outputs.len() as u64);
        for output in &self.outputs {
            out.extend_from_slice(&output.value.to_le_bytes());
            write_var_bytes(&mut out, &output.script_pubkey);
        }
        if with_witness {
            for input in &self.inputs {
                write_varint(&mut out, input.witness.len() as u64);
                for item in &input.witness {
                    write_var_bytes(&mut out, item);
                }
            }
        }
        out.extend_from_slice(&self.locktime.to_le_bytes());
        out
    }

    pub fn txid(&self) -> Hash256 {
        Hash256::hash(&self.encode_stripped())
    }

    pub fn wtxid(&self) -> Hash256 {
        Hash256::hash(&self.encode())
    }

    pub fn is_coinbase(&self) -> bool {
        self.inputs.len() == 1 && self.inputs[0].prevout.is_null()
    }

    /// Parses one transaction from the reader, leaving any following bytes.
    pub fn read_from(r: &mut Reader<'_>) -> Result<Transaction, CodecError> {
        let version = r.i32_le()?;
        let mut has_witness = false;
        if r.peek()? == 0x00 {
            r.u8()?;
            if r.u8()? != 0x01 {
                return Err(CodecError::BadSegwitMarker);
            }
            has_witness = true;
        }
        // Smallest input: 32 + 4 + 1 + 4 bytes.
        let n_in = r.count(41)?;
        if n_in == 0 {
            return Err(CodecError::NoInputs);
        }
        let mut inputs = Vec::with_capacity(n_in);
        for _ in 0..n_in {
            let txid = r.hash()?;
            let vout = r.u32_le()?;
            let script_sig = r.var_bytes()?.to_vec();
            let sequence = r.u32_le()?;
            inputs.push(TxIn {
                prevout: OutPoint { txid, vout },
                script_sig,
                sequence,
                witness: Vec::new(),
            });
        }
        let n_out = r.count(9)?;
        if n_out == 0 {
            return Err(CodecError::NoOutputs);
        }
        let mut outputs = Vec::with_capacity(n_out);
        for _ in 0..n_out {
            let value = r.u64_le()?;
            if value > MAX_MONEY {
                return Err(CodecError::ValueOutOfRange(value));
            }
            let script_pubkey = r.var_bytes()?.to_vec();
            outputs.push(TxOut { value, script_pubkey });
        }
        if has_witness {
            for input in inputs.iter_mut() {
                let n_items = r.count(1)?;
                input.witness = (0..n_items)
                    .map(|_| r.var_bytes().map(<[u8]>::to_vec))
                    .collect::<Result<_, _>>()?;
            }
        }
        let locktime = r.u32_le()?;
        Ok(Transaction { version, inputs, outputs, locktime, has_witness })
    }
}

pub fn decode_tx(bytes: &[u8]) -> Result<Transaction, CodecError> {
    let mut r = Reader::new(bytes);
    let tx = Transaction::read_from(&mut r)?;
    r.finish()?;
    Ok(tx)
}

pub fn txid(tx: &Transaction) -> Hash256 {
    tx.txid()
}

pub fn wtxid(tx: &Transaction) -> Hash256 {
    tx.wtxid()
}

/// Block body file layout: varint transaction count ‖ serialized transactions.
pub fn encode_block_body(txs: &[Transaction]) -> Vec<u8> {
    let mut out = Vec::new();
    write_varint(&mut out, txs.len() as u64);
    for tx in txs {
        out.extend_from_slice(&tx.encode());
    }
    out
}

pub fn decode_block_body(bytes: &[u8]) -> Result<Vec<Transaction>, CodecError> {
    let mut r = Reader::new(bytes);
    let n = r.count(60)?;
    let txs = (0..n).map(|_| Transaction::read_from(&mut r)).collect::<Result<Vec<_>, _>>()?;
    r.finish()?;
    Ok(txs)
}
