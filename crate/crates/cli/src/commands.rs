use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use zkbtc_core::chain::{validate_chain, ChainParams, ChainState, Checkpoint};
use zkbtc_core::codec::{
    build_merkle_branch, decode_header, decode_hex, decode_tx, nbits_to_target, read_headers,
    verify_merkle_branch, verify_merkle_branch_strict, BlockHeader, Hash256, MerkleBranch, Transaction,
};
use zkbtc_core::light_client::{prove_chain, sync, ClientCheckpoint, ClientState, EpochProof};
use zkbtc_core::por::{
    parse_p2pkh, por_prove, por_verify_guarantee, public_inputs_from_chain, witness_from_chain, PorError,
    PorGuarantee, PorProof, PorPublicInputs, ProverBackend,
};
use zkbtc_core::sealed::DvKey;
use zkbtc_core::stark::{stark_prove_threshold_with, stark_verify_threshold_with, StarkConfig, StarkError};
use zkbtc_core::testchain::{self, generate, BlockPlan, TestChainConfig, TestChainError};

use crate::output::{usage, CliError, Output};
use crate::{BackendArg, Cli, Command};

const DEFAULT_SEED: &[u8] = b"zkbtc";

struct Ctx<'a> {
    cli: &'a Cli,
    seed: Vec<u8>,
}

impl Ctx<'_> {
    fn path(&self, p: &Path) -> PathBuf {
        match &self.cli.data_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    fn read(&self, p: &Path) -> Result<Vec<u8>, CliError> {
        let full = self.path(p);
        fs::read(&full).map_err(|e| usage(format!("{}: {e}", full.display())))
    }

    fn read_string(&self, p: &Path) -> Result<String, CliError> {
        String::from_utf8(self.read(p)?).map_err(|_| usage(format!("{} is not UTF-8", p.display())))
    }

    fn write(&self, p: &Path, contents: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
        let full = self.path(p);
        if let Some(parent) = full.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&full, contents)?;
        Ok(full)
    }

    fn dv_key(&self, hex: Option<&str>) -> Result<DvKey, CliError> {
        match hex {
            Some(h) => DvKey::from_hex(h).map_err(usage),
            None => Ok(DvKey::derive_from_seed(&self.seed)),
        }
    }

    fn chain(&self, dir: &Path) -> Result<testchain::TestChain, CliError> {
        testchain::import(&self.path(dir)).map_err(chain_error)
    }
}

fn chain_error(e: TestChainError) -> CliError {
    match e {
        TestChainError::Io(e) => CliError::Io(e),
        other => usage(other),
    }
}

fn rejected(out: Output) -> CliError {
    CliError::Rejected(out)
}

pub fn run(cli: &Cli) -> Result<Output, CliError> {
    let seed = match &cli.seed {
        Some(h) => hex::decode(h).map_err(|e| usage(format!("--seed: {e}")))?,
        None => DEFAULT_SEED.to_vec(),
    };
    let ctx = Ctx { cli, seed };
    match &cli.command {
        Command::GenTestchain(a) => gen_testchain(&ctx, a),
        Command::ChainValidate(a) => chain_validate(&ctx, a),
        Command::ParseTx(a) => parse_tx(&a.hex),
        Command::ParseHeader(a) => parse_header(&a.hex),
        Command::MerkleBranch(a) => merkle_branch(&ctx, a),
        Command::MerkleVerify(a) => merkle_verify(&ctx, a),
        Command::PorProve(a) => cmd_por_prove(&ctx, a),
        Command::PorVerify(a) => cmd_por_verify(&ctx, a),
        Command::LcProve(a) => lc_prove(&ctx, a),
        Command::LcVerify(a) => lc_verify(&ctx, a),
        Command::StarkDemo(a) => stark_demo(a),
    }
}

fn gen_testchain(ctx: &Ctx, a: &crate::GenTestchain) -> Result<Output, CliError> {
    let mut plan: Vec<BlockPlan> = match &a.plan {
        Some(p) => serde_json::from_str(&ctx.read_string(p)?).map_err(|e| usage(format!("plan: {e}")))?,
        None => Vec::new(),
    };
    let blocks = a.blocks.unwrap_or(plan.len());
    if blocks < plan.len() {
        return Err(usage(format!("plan has {} entries but --blocks is {blocks}", plan.len())));
    }
    plan.resize(blocks, BlockPlan::default());
    let mut config = TestChainConfig {
        seed: ctx.seed.clone(),
        retarget_interval: a.retarget_interval,
        block_plan: plan,
        ..Default::default()
    };
    if let Some(n) = &a.nbits {
        config.initial_nbits = parse_u32_hex(n)?;
    }
    let chain = generate(&config).map_err(chain_error)?;
    let out = ctx.path(&a.out);
    testchain::export(&chain, &out).map_err(chain_error)?;
    let tip = chain.blocks.last().expect("genesis present");
    Ok(Output::new()
        .with("out", out.display().to_string())
        .with("height", chain.tip_height())
        .with("tip_hash", tip.header.block_hash().to_string())
        .with("keys", chain.keys.len()))
}

fn parse_u32_hex(s: &str) -> Result<u32, CliError> {
    u32::from_str_radix(s.trim_start_matches("0x"), 16).map_err(|e| usage(format!("{s:?}: {e}")))
}

fn params_for(ctx: &Ctx, explicit: Option<&Path>, headers: &Path) -> Result<ChainParams, CliError> {
    if let Some(p) = explicit {
        return testchain::load_params(&ctx.path(p)).map_err(chain_error);
    }
    let beside = ctx.path(headers).with_file_name("params.json");
    if beside.exists() {
        testchain::load_params(&beside).map_err(chain_error)
    } else {
        Ok(ChainParams::mainnet())
    }
}

fn state_json(s: &ChainState) -> Value {
    serde_json::to_value(s.to_checkpoint()).expect("serializable")
}

/// Headers starting at genesis, validated. `Err(Rejected)` names the height.
fn validated_headers(ctx: &Ctx, headers_path: &Path, params: &ChainParams) -> Result<(Vec<BlockHeader>, ChainState), CliError> {
    let headers = read_headers(&ctx.read(headers_path)?).map_err(usage)?;
    let reject = |height: u64, reason: String| {
        rejected(Output::new().with("valid", false).with("height", height).with("error", reason))
    };
    match headers.first() {
        None => return Err(usage("header file is empty")),
        Some(g) if *g != params.genesis => return Err(reject(0, "first header is not the genesis header".into())),
        Some(_) => {}
    }
    let state = validate_chain(&ChainState::genesis(params), &headers[1..], params)
        .map_err(|e| reject(e.height, e.kind.to_string()))?;
    Ok((headers, state))
}

fn chain_validate(ctx: &Ctx, a: &crate::ChainValidate) -> Result<Output, CliError> {
    let params = params_for(ctx, a.params.as_deref(), &a.headers)?;
    let state = match &a.checkpoint {
        None => validated_headers(ctx, &a.headers, &params)?.1,
        Some(cp) => {
            let cp: Checkpoint =
                serde_json::from_str(&ctx.read_string(cp)?).map_err(|e| usage(format!("checkpoint: {e}")))?;
            let start = ChainState::from_checkpoint(&cp).map_err(usage)?;
            let headers = read_headers(&ctx.read(&a.headers)?).map_err(usage)?;
            validate_chain(&start, &headers, &params).map_err(|e| {
                rejected(Output::new().with("valid", false).with("height", e.height).with("error", e.kind.to_string()))
            })?
        }
    };
    Ok(Output::new().with("valid", true).with("state", state_json(&state)))
}

fn tx_json(tx: &Transaction) -> Value {
    let inputs: Vec<Value> = tx
        .inputs
        .iter()
        .map(|i| {
            json!({
                "prev_txid": i.prevout.txid.to_string(),
                "vout": i.prevout.vout,
                "script_sig": hex::encode(&i.script_sig),
                "sequence": i.sequence,
                "witness": i.witness.iter().map(hex::encode).collect::<Vec<_>>(),
            })
        })
        .collect();
    let outputs: Vec<Value> = tx
        .outputs
        .iter()
        .map(|o| {
            json!({
                "value": o.value,
                "script_pubkey": hex::encode(&o.script_pubkey),
                "p2pkh": parse_p2pkh(&o.script_pubkey).ok().map(|h| h.to_hex()),
            })
        })
        .collect();
    json!({
        "txid": tx.txid().to_string(),
        "wtxid": tx.wtxid().to_string(),
        "version": tx.version,
        "segwit": tx.has_witness,
        "coinbase": tx.is_coinbase(),
        "inputs": inputs,
        "outputs": outputs,
        "locktime": tx.locktime,
    })
}

fn parse_tx(hex_str: &str) -> Result<Output, CliError> {
    let tx = decode_tx(&decode_hex(hex_str).map_err(usage)?).map_err(usage)?;
    let Value::Object(map) = tx_json(&tx) else { unreachable!() };
    Ok(Output(map))
}

fn parse_header(hex_str: &str) -> Result<Output, CliError> {
    let h = decode_header(&decode_hex(hex_str).map_err(usage)?).map_err(usage)?;
    let target = nbits_to_target(h.nbits);
    Ok(Output::new()
        .with("hash", h.block_hash().to_string())
        .with("version", h.version)
        .with("prev_hash", h.prev_hash.to_string())
        .with("merkle_root", h.merkle_root.to_string())
        .with("timestamp", h.timestamp)
        .with("nbits", format!("{:08x}", h.nbits))
        .with("nonce", h.nonce)
        .with("target", target.as_ref().map_or(Value::Null, |t| json!(t.to_hex())))
        .with("meets_target", zkbtc_core::chain::meets_target(&h)))
}

/// Written by `merkle-branch`, read by `merkle-verify`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BranchFile {
    txid: Hash256,
    root: Hash256,
    branch: MerkleBranch,
}

fn merkle_branch(ctx: &Ctx, a: &crate::MerkleBranchArgs) -> Result<Output, CliError> {
    let txs = zkbtc_core::codec::decode_block_body(&ctx.read(&a.block)?).map_err(usage)?;
    let txids: Vec<Hash256> = txs.iter().map(Transaction::txid).collect();
    let branch = build_merkle_branch(&txids, a.index).map_err(usage)?;
    let root = zkbtc_core::codec::merkle_root(&txids).map_err(usage)?;
    let file = BranchFile { txid: txids[a.index], root, branch };
    let Value::Object(map) = serde_json::to_value(&file).expect("serializable") else { unreachable!() };
    Ok(Output(map))
}

fn merkle_verify(ctx: &Ctx, a: &crate::MerkleVerifyArgs) -> Result<Output, CliError> {
    let file: BranchFile =
        serde_json::from_str(&ctx.read_string(&a.branch)?).map_err(|e| usage(format!("branch: {e}")))?;
    let parse = |s: &Option<String>, dflt: Hash256| -> Result<Hash256, CliError> {
        s.as_deref().map_or(Ok(dflt), |h| Hash256::from_display_hex(h).map_err(usage))
    };
    let txid = parse(&a.txid, file.txid)?;
    let root = parse(&a.root, file.root)?;
    let ok = if a.lenient {
        verify_merkle_branch(&txid, &file.branch, &root)
    } else {
        verify_merkle_branch_strict(&txid, &file.branch, &root)
    };
    let out = Output::new().with("valid", ok).with("txid", txid.to_string()).with("root", root.to_string());
    if ok {
        Ok(out)
    } else {
        Err(rejected(out))
    }
}

fn cmd_por_prove(ctx: &Ctx, a: &crate::PorProve) -> Result<Output, CliError> {
    let chain = ctx.chain(&a.chain)?;
    let public = public_inputs_from_chain(&chain, a.threshold);
    let witness = witness_from_chain(&chain, a.tx_block, a.tx_index, a.vout, a.key_index).map_err(usage)?;
    let backend = match a.backend {
        BackendArg::Hybrid => ProverBackend::Hybrid,
        BackendArg::Dv => ProverBackend::DesignatedVerifier(ctx.dv_key(a.dv_key.as_deref())?),
    };
    let proof = match por_prove(&public, &witness, &backend, &ctx.seed) {
        Ok(p) => p,
        Err(PorError::RelationUnsatisfied(f)) => {
            return Err(rejected(Output::new().with("proved", false).with("failure", f.to_string())))
        }
        Err(e) => return Err(CliError::Internal(e.to_string())),
    };
    let path = ctx.write(&a.out, proof.to_json_string())?;
    Ok(Output::new()
        .with("proved", true)
        .with("backend", proof.backend.to_string())
        .with("threshold", a.threshold)
        .with("out", path.display().to_string()))
}

fn cmd_por_verify(ctx: &Ctx, a: &crate::PorVerify) -> Result<Output, CliError> {
    let params = params_for(ctx, a.params.as_deref(), &a.headers)?;
    let (headers, _) = validated_headers(ctx, &a.headers, &params)?;
    let proof = PorProof::from_json_str(&ctx.read_string(&a.proof)?).map_err(usage)?;
    let public = PorPublicInputs { threshold_x: a.threshold, headers };
    let key = ctx.dv_key(a.dv_key.as_deref())?;
    let verdict = por_verify_guarantee(&public, &proof, Some(&key)).map_err(usage)?;
    let out = Output::new().with("backend", proof.backend.to_string()).with("threshold", a.threshold);
    match verdict {
        Some(g) => Ok(out.with("accepted", true).with(
            "guarantee",
            match g {
                PorGuarantee::FullRelation => "full-relation",
                PorGuarantee::ThresholdAndKeyKnowledge => "threshold-and-key-knowledge",
            },
        )),
        None => Err(rejected(out.with("accepted", false))),
    }
}

fn lc_prove(ctx: &Ctx, a: &crate::LcProve) -> Result<Output, CliError> {
    let chain = ctx.chain(&a.chain)?;
    if a.epoch_len == 0 {
        return Err(usage("--epoch-len must be at least 1"));
    }
    let key = ctx.dv_key(a.dv_key.as_deref())?;
    let proofs = prove_chain(&chain, a.epoch_len, &key, &ctx.seed).map_err(|e| {
        rejected(Output::new().with("proved", false).with("error", e.to_string()))
    })?;
    for (i, p) in proofs.iter().enumerate() {
        ctx.write(&a.out.join(format!("epoch-{i:06}.json")), p.to_json_string())?;
    }
    Ok(Output::new()
        .with("proved", true)
        .with("epochs", proofs.len())
        .with("height", chain.tip_height())
        .with("out", ctx.path(&a.out).display().to_string()))
}

fn lc_verify(ctx: &Ctx, a: &crate::LcVerify) -> Result<Output, CliError> {
    let params = testchain::load_params(&ctx.path(&a.params)).map_err(chain_error)?;
    let client = match &a.checkpoint {
        Some(p) => {
            let cp: ClientCheckpoint =
                serde_json::from_str(&ctx.read_string(p)?).map_err(|e| usage(format!("checkpoint: {e}")))?;
            ClientState::from_checkpoint(&cp).map_err(usage)?
        }
        None => ClientState::genesis(&params),
    };
    let dir = ctx.path(&a.proofs);
    let mut names: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| usage(format!("{}: {e}", dir.display())))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    names.retain(|p| p.extension().is_some_and(|x| x == "json"));
    names.sort();
    let proofs = names
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p)?;
            EpochProof::from_json_str(&text).map_err(|e| usage(format!("{}: {e}", p.display())))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let key = ctx.dv_key(a.dv_key.as_deref())?;
    match sync(&client, &proofs, &params, &key) {
        Ok(state) => Ok(Output::new()
            .with("synced", true)
            .with("epochs_verified", state.epochs_verified)
            .with("client", serde_json::to_value(state.to_checkpoint()).expect("serializable"))),
        Err(e) => Err(rejected(
            Output::new()
                .with("synced", false)
                .with("failed_epoch", e.index)
                .with("error", e.error.to_string())
                .with("client", serde_json::to_value(e.last_good.to_checkpoint()).expect("serializable")),
        )),
    }
}

fn stark_demo(a: &crate::StarkDemo) -> Result<Output, CliError> {
    let config = if a.fast { StarkConfig::fast() } else { StarkConfig::default() };
    let context = b"zkbtc/stark-demo";
    let out = Output::new().with("v", a.v).with("x", a.x).with("zk", a.zk);
    let proof = match stark_prove_threshold_with(a.v, a.x, b"stark-demo", context, a.zk, &config) {
        Ok(p) => p,
        Err(e @ (StarkError::ThresholdNotMet { .. } | StarkError::OutOfRange(_))) => {
            return Err(rejected(out.with("proved", false).with("error", e.to_string())))
        }
        Err(e) => return Err(CliError::Internal(e.to_string())),
    };
    if !stark_verify_threshold_with(a.x, &proof, context, &config) {
        return Err(CliError::Internal("honest proof failed to verify".into()));
    }
    let json_len = serde_json::to_vec(&proof.to_json()).expect("serializable").len();
    Ok(out
        .with("proved", true)
        .with("verified", true)
        .with("queries", config.n_queries)
        .with("proof_bytes", proof.to_bytes().len())
        .with("proof_json_bytes", json_len))
}
