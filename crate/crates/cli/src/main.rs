mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::output::{CliError, Output};

#[derive(Parser, Debug)]
#[command(name = "zkbtc", version, about = "Bitcoin proof-of-reserve and light-client proofs")]
pub struct Cli {
    /// Base directory for relative paths.
    #[arg(long, global = true, env = "ZKBTC_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    /// Print one JSON document instead of key/value lines.
    #[arg(long, global = true)]
    pub json: bool,
    /// Hex seed for keys, nonces and masking.
    #[arg(long, global = true)]
    pub seed: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a regtest-style chain with planned transactions.
    GenTestchain(GenTestchain),
    /// Validate a header file under consensus rules.
    ChainValidate(ChainValidate),
    /// Decode a raw transaction.
    ParseTx(HexArg),
    /// Decode an 80-byte header.
    ParseHeader(HexArg),
    /// Build the Merkle branch of one transaction in a block body.
    MerkleBranch(MerkleBranchArgs),
    /// Check a Merkle branch against a root.
    MerkleVerify(MerkleVerifyArgs),
    /// Prove ownership of an unspent output above a threshold.
    PorProve(PorProve),
    /// Verify a proof-of-reserve file.
    PorVerify(PorVerify),
    /// Prove a chain in epochs for light clients.
    LcProve(LcProve),
    /// Sync a light client from a directory of epoch proofs.
    LcVerify(LcVerify),
    /// Prove and verify `v > x` with the STARK alone.
    StarkDemo(StarkDemo),
}

#[derive(Args, Debug)]
pub struct GenTestchain {
    /// Blocks after genesis; defaults to the plan length.
    #[arg(long)]
    pub blocks: Option<usize>,
    #[arg(long, default_value_t = 8)]
    pub retarget_interval: u32,
    /// JSON array with one entry per block.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Compact target of genesis, hex.
    #[arg(long)]
    pub nbits: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ChainValidate {
    /// Concatenated headers. Starts at genesis unless --checkpoint is given,
    /// in which case it holds the headers after the checkpoint tip.
    #[arg(long)]
    pub headers: PathBuf,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Defaults to params.json beside the headers, then mainnet.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct HexArg {
    #[arg(long)]
    pub hex: String,
}

#[derive(Args, Debug)]
pub struct MerkleBranchArgs {
    #[arg(long)]
    pub block: PathBuf,
    #[arg(long)]
    pub index: usize,
}

#[derive(Args, Debug)]
pub struct MerkleVerifyArgs {
    /// Output of merkle-branch.
    #[arg(long)]
    pub branch: PathBuf,
    /// Overrides the txid in the branch file.
    #[arg(long)]
    pub txid: Option<String>,
    /// Overrides the root in the branch file.
    #[arg(long)]
    pub root: Option<String>,
    /// Accept branches that fail the duplicate-sibling check.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum BackendArg {
    Hybrid,
    Dv,
}

#[derive(Args, Debug)]
pub struct PorProve {
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long)]
    pub threshold: u64,
    #[arg(long)]
    pub tx_block: usize,
    #[arg(long)]
    pub tx_index: usize,
    #[arg(long)]
    pub vout: u32,
    #[arg(long)]
    pub key_index: usize,
    #[arg(long, value_enum)]
    pub backend: BackendArg,
    #[arg(long)]
    pub out: PathBuf,
    /// Designated-verifier key, hex; derived from the seed if absent.
    #[arg(long)]
    pub dv_key: Option<String>,
}

#[derive(Args, Debug)]
pub struct PorVerify {
    #[arg(long)]
    pub headers: PathBuf,
    #[arg(long)]
    pub threshold: u64,
    #[arg(long)]
    pub proof: PathBuf,
    #[arg(long)]
    pub dv_key: Option<String>,
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LcProve {
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub epoch_len: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub dv_key: Option<String>,
}

#[derive(Args, Debug)]
pub struct LcVerify {
    #[arg(long)]
    pub proofs: PathBuf,
    #[arg(long)]
    pub params: PathBuf,
    /// Client checkpoint to resume from; genesis if absent.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub dv_key: Option<String>,
}

#[derive(Args, Debug)]
pub struct StarkDemo {
    #[arg(long)]
    pub v: u64,
    #[arg(long)]
    pub x: u64,
    #[arg(long)]
    pub zk: bool,
    /// 16 FRI queries instead of 32.
    #[arg(long)]
    pub fast: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let json = cli.json;
    let result = commands::run(&cli);
    let (code, out) = match result {
        Ok(out) => (0, out),
        Err(CliError::Rejected(out)) => (2, out),
        Err(e) => (e.exit_code(), Output::error(&e)),
    };
    out.print(json, code != 0);
    ExitCode::from(code)
}
