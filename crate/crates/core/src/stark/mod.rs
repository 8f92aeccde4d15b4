//! A small transparent STARK for the threshold statement `v > x`.
//!
//! Pipeline: trace columns are interpolated over the 64-element subgroup
//! `H`, optionally masked with a random multiple of `Z_H = x^64 - 1`, and
//! extended to the coset `7 * <w_N>` with blowup 8. One Merkle tree commits
//! all columns row-wise. The constraint quotients are combined into a
//! composition polynomial, split as `H0 + x^D * H1` and committed. The
//! verifier checks the constraints at one out-of-domain point `z` and FRI
//! tests the DEEP combination that ties the committed evaluations to the
//! values claimed at `z` and `z * omega`.
//!
//! Every challenge is drawn from the 64-bit base field. That caps soundness
//! well below production levels; this is a demonstrator.

mod air;
mod encoding;
mod field;
mod fri;
mod merkle;
mod poly;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub use air::{
    air_check, threshold_trace, trace_from_bits, TraceTable, COL_A, COL_B, COL_P, COL_V, MAX_THRESHOLD,
    NUM_COLUMNS, RANGE_BITS, TRACE_LEN,
};
pub use encoding::StarkProofJson;
pub use field::{batch_inverse, GElement, MODULUS};
pub use fri::{fri_prove, fri_verify, fri_verify_openings, FriParams, FriProof, FriQuery, LayerOpening};
pub use merkle::{hash_leaf, verify_path, Digest, MerkleTree};
pub use poly::{coset_points, eval_poly, evaluate_coset, interpolate_coset, intt, lde, ntt};

use crate::crypto::{Sha256, Transcript};

pub const BLOWUP: usize = 8;
pub const DEFAULT_QUERIES: usize = 32;
/// Query count for the fast test profile.
pub const FAST_QUERIES: usize = 16;
const NUM_CONSTRAINTS: usize = 9;
const NUM_OOD: usize = 2 * NUM_COLUMNS + 2;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StarkError {
    #[error("threshold not met: v = {v} is not greater than x = {x}")]
    ThresholdNotMet { v: u64, x: u64 },
    #[error("value {0} outside the supported 62-bit range")]
    OutOfRange(u64),
    #[error("length {0} is not a power of two")]
    NonPowerOfTwo(usize),
    #[error("expected length {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("malformed proof: {0}")]
    Malformed(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StarkConfig {
    pub n_queries: usize,
}

impl Default for StarkConfig {
    fn default() -> Self {
        StarkConfig { n_queries: DEFAULT_QUERIES }
    }
}

impl StarkConfig {
    pub fn fast() -> Self {
        StarkConfig { n_queries: FAST_QUERIES }
    }
}

/// Trace and composition values at one queried domain row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowOpening {
    pub trace: [GElement; NUM_COLUMNS],
    pub trace_path: Vec<Digest>,
    pub composition: [GElement; 2],
    pub composition_path: Vec<Digest>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StarkProof {
    pub trace_root: Digest,
    pub composition_root: Digest,
    /// Columns at `z`, columns at `z * omega`, then `H0(z)`, `H1(z)`.
    pub ood_values: Vec<GElement>,
    pub fri: FriProof,
    /// One per FRI query, in the same order.
    pub openings: Vec<RowOpening>,
    pub zk: bool,
}

/// Degree bound of the committed trace polynomials.
pub fn trace_degree_bound(zk: bool) -> usize {
    if zk {
        2 * TRACE_LEN
    } else {
        TRACE_LEN
    }
}

pub(crate) fn draw_element(t: &mut Transcript, label: &str) -> GElement {
    GElement::new(t.challenge_u64(label))
}

fn new_transcript(context: &[u8], x: u64, zk: bool, n_queries: usize) -> Transcript {
    let mut t = Transcript::new("zkbtc/stark-threshold-v1");
    t.absorb("context", context);
    t.absorb_u64("x", x);
    t.absorb("zk", &[zk as u8]);
    t.absorb_u64("blowup", BLOWUP as u64);
    t.absorb_u64("queries", n_queries as u64);
    t
}

/// Out-of-domain point: outside `H` and outside the evaluation coset.
fn draw_ood_point(t: &mut Transcript, domain: usize) -> GElement {
    let g_inv = GElement::GENERATOR.inverse().unwrap();
    loop {
        let z = draw_element(t, "ood-point");
        if z.pow(TRACE_LEN as u64) != GElement::ONE && (z * g_inv).pow(domain as u64) != GElement::ONE {
            return z;
        }
    }
}

fn absorb_elements(t: &mut Transcript, label: &str, values: &[GElement]) {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    t.absorb(label, &bytes);
}

fn draw_many(t: &mut Transcript, label: &str, n: usize) -> Vec<GElement> {
    (0..n).map(|_| draw_element(t, label)).collect()
}

fn mask_rng(trace: &TraceTable, x: u64, salt: &[u8], context: &[u8]) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(b"zkbtc/stark-mask");
    for part in [salt, context] {
        h.update(&(part.len() as u64).to_le_bytes()).update(part);
    }
    h.update(&x.to_le_bytes());
    for col in &trace.columns {
        for v in col {
            h.update(&v.to_le_bytes());
        }
    }
    ChaCha20Rng::from_seed(h.finalize())
}

fn random_element(rng: &mut ChaCha20Rng) -> GElement {
    loop {
        if let Some(g) = GElement::from_canonical(rng.next_u64()) {
            return g;
        }
    }
}

struct Frame {
    omega: GElement,
    w62: GElement,
    w63: GElement,
}

impl Frame {
    fn new() -> Self {
        let omega = GElement::root_of_unity(TRACE_LEN.trailing_zeros());
        Frame { omega, w62: omega.pow(62), w63: omega.pow(63) }
    }
}

/// Constraint numerators at one point, given the current and next rows.
fn constraint_terms(cur: &[GElement; NUM_COLUMNS], next: &[GElement; NUM_COLUMNS], x: u64) -> [GElement; NUM_CONSTRAINTS] {
    let [v, b, p, a] = *cur;
    let [v1, b1, p1, a1] = *next;
    let one = GElement::ONE;
    [
        b * (b - one),
        p - one,
        p1 - p.double(),
        v1 - v,
        a - b * p,
        a1 - a - b1 * p1,
        a - (v - GElement::new(x) - one),
        b,
        b,
    ]
}

/// Zerofier inverses per constraint, from `1/Z_H`, `1/(x-1)`,
/// `1/(x-w^63)`, `1/(x-w^62)` and the point itself.
fn zerofier_inverses(
    point: GElement,
    frame: &Frame,
    inv_zh: GElement,
    inv_x1: GElement,
    inv_x63: GElement,
    inv_x62: GElement,
) -> [GElement; NUM_CONSTRAINTS] {
    // Transitions vanish on H minus its last row.
    let inv_trans = (point - frame.w63) * inv_zh;
    [inv_zh, inv_x1, inv_trans, inv_trans, inv_x1, inv_trans, inv_x63, inv_x62, inv_x63]
}

fn combine(alphas: &[GElement], nums: &[GElement; NUM_CONSTRAINTS], invs: &[GElement; NUM_CONSTRAINTS]) -> GElement {
    alphas
        .iter()
        .zip(nums)
        .zip(invs)
        .fold(GElement::ZERO, |acc, ((a, n), i)| acc + *a * *n * *i)
}

/// Proves a trace without checking it. Honest callers go through
/// [`stark_prove_threshold`]; tests use this to attempt forgeries.
pub fn prove_trace(
    trace: &TraceTable,
    x: u64,
    salt: &[u8],
    context: &[u8],
    zk: bool,
    config: &StarkConfig,
) -> Result<StarkProof, StarkError> {
    for col in &trace.columns {
        if col.len() != TRACE_LEN {
            return Err(StarkError::LengthMismatch { expected: TRACE_LEN, got: col.len() });
        }
    }
    let d = trace_degree_bound(zk);
    let n = BLOWUP * d;
    let g = GElement::GENERATOR;
    let frame = Frame::new();
    let mut rng = mask_rng(trace, x, salt, context);

    let mut polys = Vec::with_capacity(NUM_COLUMNS);
    for col in &trace.columns {
        let mut c = col.clone();
        intt(&mut c)?;
        c.resize(d, GElement::ZERO);
        if zk {
            // c + r * (x^64 - 1), deg r < 64
            for k in 0..TRACE_LEN {
                let r = random_element(&mut rng);
                c[k] -= r;
                c[k + TRACE_LEN] += r;
            }
        }
        polys.push(c);
    }
    let evals: Vec<Vec<GElement>> =
        polys.iter().map(|p| evaluate_coset(p, g, n)).collect::<Result<_, _>>()?;
    let row = |i: usize| -> [GElement; NUM_COLUMNS] { std::array::from_fn(|c| evals[c][i]) };
    let trace_tree = MerkleTree::from_rows((0..n).map(row));

    let mut t = new_transcript(context, x, zk, config.n_queries);
    t.absorb("trace-root", &trace_tree.root());
    let alphas = draw_many(&mut t, "alpha", NUM_CONSTRAINTS);

    let xs = coset_points(g, n)?;
    let mut denoms = Vec::with_capacity(4 * n);
    for &p in &xs {
        denoms.extend([p.pow(TRACE_LEN as u64) - GElement::ONE, p - GElement::ONE, p - frame.w63, p - frame.w62]);
    }
    let inv = batch_inverse(&denoms);
    let step = n / TRACE_LEN;
    let composition: Vec<GElement> = (0..n)
        .map(|i| {
            let nums = constraint_terms(&row(i), &row((i + step) % n), x);
            let invs = zerofier_inverses(xs[i], &frame, inv[4 * i], inv[4 * i + 1], inv[4 * i + 2], inv[4 * i + 3]);
            combine(&alphas, &nums, &invs)
        })
        .collect();
    let comp_coeffs = interpolate_coset(&composition, g)?;
    let h0 = evaluate_coset(&comp_coeffs[..d], g, n)?;
    let h1 = evaluate_coset(&comp_coeffs[d..2 * d], g, n)?;
    let comp_tree = MerkleTree::from_rows((0..n).map(|i| [h0[i], h1[i]]));
    t.absorb("composition-root", &comp_tree.root());

    let z = draw_ood_point(&mut t, n);
    let zw = z * frame.omega;
    let mut ood: Vec<GElement> = polys.iter().map(|p| eval_poly(p, z)).collect();
    ood.extend(polys.iter().map(|p| eval_poly(p, zw)));
    ood.push(eval_poly(&comp_coeffs[..d], z));
    ood.push(eval_poly(&comp_coeffs[d..2 * d], z));
    absorb_elements(&mut t, "ood", &ood);
    let gammas = draw_many(&mut t, "gamma", NUM_OOD);

    let inv_z = batch_inverse(&xs.iter().map(|p| *p - z).collect::<Vec<_>>());
    let inv_zw = batch_inverse(&xs.iter().map(|p| *p - zw).collect::<Vec<_>>());
    let deep: Vec<GElement> = (0..n)
        .map(|i| deep_value(&row(i), [h0[i], h1[i]], &ood, &gammas, inv_z[i], inv_zw[i]))
        .collect();

    let fri_params = FriParams { blowup: BLOWUP, n_queries: config.n_queries, max_degree: d - 1 };
    let (fri, indices) = fri_prove(&deep, g, &fri_params, &mut t)?;
    let openings = indices
        .iter()
        .map(|&q| RowOpening {
            trace: row(q),
            trace_path: trace_tree.open(q),
            composition: [h0[q], h1[q]],
            composition_path: comp_tree.open(q),
        })
        .collect();
    Ok(StarkProof { trace_root: trace_tree.root(), composition_root: comp_tree.root(), ood_values: ood, fri, openings, zk })
}

fn deep_value(
    trace: &[GElement; NUM_COLUMNS],
    comp: [GElement; 2],
    ood: &[GElement],
    gammas: &[GElement],
    inv_z: GElement,
    inv_zw: GElement,
) -> GElement {
    let mut at_z = GElement::ZERO;
    let mut at_zw = GElement::ZERO;
    for c in 0..NUM_COLUMNS {
        at_z += gammas[c] * (trace[c] - ood[c]);
        at_zw += gammas[NUM_COLUMNS + c] * (trace[c] - ood[NUM_COLUMNS + c]);
    }
    for k in 0..2 {
        at_z += gammas[2 * NUM_COLUMNS + k] * (comp[k] - ood[2 * NUM_COLUMNS + k]);
    }
    at_z * inv_z + at_zw * inv_zw
}

pub fn stark_prove_threshold(
    v: u64,
    x: u64,
    salt: &[u8],
    context: &[u8],
    zk: bool,
) -> Result<StarkProof, StarkError> {
    stark_prove_threshold_with(v, x, salt, context, zk, &StarkConfig::default())
}

pub fn stark_prove_threshold_with(
    v: u64,
    x: u64,
    salt: &[u8],
    context: &[u8],
    zk: bool,
    config: &StarkConfig,
) -> Result<StarkProof, StarkError> {
    let trace = threshold_trace(v, x)?;
    prove_trace(&trace, x, salt, context, zk, config)
}

pub fn stark_verify_threshold(x: u64, proof: &StarkProof, context: &[u8]) -> bool {
    stark_verify_threshold_with(x, proof, context, &StarkConfig::default())
}

pub fn stark_verify_threshold_with(x: u64, proof: &StarkProof, context: &[u8], config: &StarkConfig) -> bool {
    verify_inner(x, proof, context, config).is_some()
}

fn verify_inner(x: u64, proof: &StarkProof, context: &[u8], config: &StarkConfig) -> Option<()> {
    if x > MAX_THRESHOLD
        || proof.ood_values.len() != NUM_OOD
        || proof.openings.len() != config.n_queries
    {
        return None;
    }
    let d = trace_degree_bound(proof.zk);
    let n = BLOWUP * d;
    let g = GElement::GENERATOR;
    let frame = Frame::new();
    let ood = &proof.ood_values;

    let mut t = new_transcript(context, x, proof.zk, config.n_queries);
    t.absorb("trace-root", &proof.trace_root);
    let alphas = draw_many(&mut t, "alpha", NUM_CONSTRAINTS);
    t.absorb("composition-root", &proof.composition_root);
    let z = draw_ood_point(&mut t, n);

    let cur: [GElement; NUM_COLUMNS] = ood[..NUM_COLUMNS].try_into().ok()?;
    let next: [GElement; NUM_COLUMNS] = ood[NUM_COLUMNS..2 * NUM_COLUMNS].try_into().ok()?;
    let inv_zh = (z.pow(TRACE_LEN as u64) - GElement::ONE).inverse()?;
    let invs = zerofier_inverses(
        z,
        &frame,
        inv_zh,
        (z - GElement::ONE).inverse()?,
        (z - frame.w63).inverse()?,
        (z - frame.w62).inverse()?,
    );
    let lhs = combine(&alphas, &constraint_terms(&cur, &next, x), &invs);
    let rhs = ood[2 * NUM_COLUMNS] + z.pow(d as u64) * ood[2 * NUM_COLUMNS + 1];
    if lhs != rhs {
        return None;
    }
    absorb_elements(&mut t, "ood", ood);
    let gammas = draw_many(&mut t, "gamma", NUM_OOD);

    let fri_params = FriParams { blowup: BLOWUP, n_queries: config.n_queries, max_degree: d - 1 };
    let values = fri_verify_openings(&proof.fri, g, &fri_params, &mut t)?;
    let depth = n.trailing_zeros() as usize;
    let w = GElement::root_of_unity(depth as u32);
    let zw = z * frame.omega;
    for ((q, f_q), op) in values.into_iter().zip(&proof.openings) {
        if !verify_path(&proof.trace_root, depth, q, &op.trace, &op.trace_path)
            || !verify_path(&proof.composition_root, depth, q, &op.composition, &op.composition_path)
        {
            return None;
        }
        let point = g * w.pow(q as u64);
        let expected = deep_value(&op.trace, op.composition, ood, &gammas, (point - z).inverse()?, (point - zw).inverse()?);
        if expected != f_q {
            return None;
        }
    }
    Some(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const CTX: &[u8] = b"unit-test-context";

    #[test]
    fn completeness_both_modes() {
        for zk in [false, true] {
            let proof = stark_prove_threshold(100_000, 50_000, b"salt", CTX, zk).unwrap();
            assert!(stark_verify_threshold(50_000, &proof, CTX), "zk={zk}");
            assert!(!stark_verify_threshold(50_001, &proof, CTX), "zk={zk}");
            assert!(!stark_verify_threshold(50_000, &proof, b"other context"), "zk={zk}");
        }
    }

    #[test]
    fn deterministic_and_zk_changes_bytes() {
        let a = stark_prove_threshold(100, 10, b"s", CTX, true).unwrap();
        let b = stark_prove_threshold(100, 10, b"s", CTX, true).unwrap();
        assert_eq!(a, b);
        let c = stark_prove_threshold(100, 10, b"s", CTX, false).unwrap();
        assert_ne!(a.to_bytes(), c.to_bytes());
        let d = stark_prove_threshold(100, 10, b"t", CTX, true).unwrap();
        assert_ne!(a.trace_root, d.trace_root);
    }

    #[test]
    fn refuses_false_statements() {
        assert_eq!(
            stark_prove_threshold(5, 5, b"", CTX, false),
            Err(StarkError::ThresholdNotMet { v: 5, x: 5 })
        );
    }

    #[test]
    fn tampering_rejected() {
        let proof = stark_prove_threshold(1000, 10, b"s", CTX, true).unwrap();
        let mut bad = proof.clone();
        bad.ood_values[0] += GElement::ONE;
        assert!(!stark_verify_threshold(10, &bad, CTX));
        let mut bad = proof.clone();
        bad.openings[3].trace[1] += GElement::ONE;
        assert!(!stark_verify_threshold(10, &bad, CTX));
        let mut bad = proof.clone();
        bad.trace_root[0] ^= 1;
        assert!(!stark_verify_threshold(10, &bad, CTX));
        let mut bad = proof.clone();
        bad.zk = false;
        assert!(!stark_verify_threshold(10, &bad, CTX));
        let mut bad = proof;
        bad.openings.pop();
        assert!(!stark_verify_threshold(10, &bad, CTX));
    }

    #[test]
    fn forged_traces_rejected() {
        for seed in 0..10u8 {
            // A_63 off by one.
            let mut trace = threshold_trace(1000, 10).unwrap();
            trace.columns[3][63] += GElement::ONE;
            let proof = prove_trace(&trace, 10, &[seed], CTX, seed % 2 == 0, &StarkConfig::default()).unwrap();
            assert!(!stark_verify_threshold(10, &proof, CTX));
        }
        // Field wrap-around: v = 3, x = 5.
        let wrapped = trace_from_bits(GElement::new(3), MODULUS - 3);
        let proof = prove_trace(&wrapped, 5, b"", CTX, true, &StarkConfig::default()).unwrap();
        assert!(!stark_verify_threshold(5, &proof, CTX));
    }

    #[test]
    fn fast_profile_round_trip() {
        let cfg = StarkConfig::fast();
        let proof = stark_prove_threshold_with(2, 1, b"", CTX, false, &cfg).unwrap();
        assert!(stark_verify_threshold_with(1, &proof, CTX, &cfg));
        assert!(!stark_verify_threshold(1, &proof, CTX));
    }
}
