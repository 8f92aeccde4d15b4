use zkbtc_core::chain::{validate_chain, ChainState};
use zkbtc_core::light_client::{prove_chain, sync, ClientState, LightClientError, CLIENT_STATE_LEN};
use zkbtc_core::sealed::DvKey;
use zkbtc_core::testchain::{generate, BlockPlan, TestChainConfig, TxIntent};

const KEY: DvKey = DvKey([9; 32]);

fn config(blocks: usize, interval: u32, deltas: &[i64]) -> TestChainConfig {
    let mut cfg = TestChainConfig { initial_nbits: 0x20010000, retarget_interval: interval, ..Default::default() }
        .with_empty_blocks(blocks);
    for (i, b) in cfg.block_plan.iter_mut().enumerate() {
        b.time_delta = Some(deltas[i % deltas.len()]);
    }
    cfg
}

#[test]
fn epoch_sync_equals_monolithic_validation() {
    let fixtures = [
        config(24, 8, &[600]),
        config(24, 8, &[100, 3000, 600]),
        config(37, 5, &[7200, 10]),
        {
            let mut c = config(16, 4, &[600]);
            c.block_plan[2] = BlockPlan { txs: vec![TxIntent::CreateP2pkhUtxo { value: 5, key: 1 }], time_delta: None };
            c.block_plan[6].txs.push(TxIntent::SpendOutpoint { block: 3, tx: 1, vout: 0, key: 1 });
            c
        },
    ];
    for cfg in &fixtures {
        let chain = generate(cfg).unwrap();
        let mono = validate_chain(&ChainState::genesis(&chain.params), &chain.headers()[1..], &chain.params).unwrap();
        for epoch_len in [1, 3, 8, 64] {
            let proofs = prove_chain(&chain, epoch_len, &KEY, b"s").unwrap();
            let client = sync(&ClientState::genesis(&chain.params), &proofs, &chain.params, &KEY).unwrap();
            assert_eq!(client.chain_state, mono, "epoch_len {epoch_len}");
            assert_eq!(client.epochs_verified as usize, proofs.len());
            assert_eq!(client.encode().len(), CLIENT_STATE_LEN);
        }
    }
}

#[test]
fn resume_from_checkpoint() {
    let chain = generate(&config(24, 8, &[600])).unwrap();
    let proofs = prove_chain(&chain, 8, &KEY, b"s").unwrap();
    let mid = sync(&ClientState::genesis(&chain.params), &proofs[..2], &chain.params, &KEY).unwrap();
    let text = serde_json::to_string(&mid.to_checkpoint()).unwrap();
    let resumed = ClientState::from_checkpoint(&serde_json::from_str(&text).unwrap()).unwrap();
    let end = sync(&resumed, &proofs[2..], &chain.params, &KEY).unwrap();
    assert_eq!(end.chain_state.height, 24);
    let err = sync(&resumed, &proofs[1..], &chain.params, &KEY).unwrap_err();
    assert_eq!((err.index, err.error), (0, LightClientError::LinkageBroken));
}

#[test]
fn proofs_from_other_chain_do_not_link() {
    let a = generate(&config(16, 8, &[600])).unwrap();
    let b = generate(&TestChainConfig { seed: b"other".to_vec(), ..config(16, 8, &[600]) }).unwrap();
    let pa = prove_chain(&a, 8, &KEY, b"s").unwrap();
    let pb = prove_chain(&b, 8, &KEY, b"s").unwrap();
    let err = sync(&ClientState::genesis(&a.params), [&pa[0], &pb[1]], &a.params, &KEY).unwrap_err();
    assert_eq!(err.index, 1);
    assert_eq!(err.last_good.chain_state.height, 8);
}
