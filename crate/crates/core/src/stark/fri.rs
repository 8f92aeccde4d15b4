//! FRI low-degree test with folding factor 2.
//!
//! Layer `i` lives on the coset `offset^(2^i) * <w^(2^i)>`. Each committed
//! layer pairs positions `j` and `j + n/2` (the points `x` and `-x`) in one
//! Merkle leaf, so one path opens both inputs of a fold.

use super::field::{batch_inverse, GElement};
use super::merkle::{verify_path, Digest, MerkleTree};
use super::poly::{eval_poly, interpolate_coset};
use super::{draw_element, StarkError};
use crate::crypto::Transcript;

pub const FINAL_POLY_LEN: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FriParams {
    pub blowup: usize,
    pub n_queries: usize,
    pub max_degree: usize,
}

impl FriParams {
    pub fn new(max_degree: usize) -> Self {
        FriParams { blowup: 8, n_queries: 32, max_degree }
    }

    pub fn domain_size(&self) -> usize {
        self.blowup * (self.max_degree + 1)
    }

    /// Committed layers: fold until the degree bound is `FINAL_POLY_LEN`.
    pub fn num_layers(&self) -> usize {
        ((self.max_degree + 1) / FINAL_POLY_LEN).trailing_zeros() as usize
    }

    fn validate(&self) -> Result<(), StarkError> {
        let bound = self.max_degree + 1;
        if !bound.is_power_of_two() || bound < 2 * FINAL_POLY_LEN {
            return Err(StarkError::Malformed(format!("FRI degree bound {bound}")));
        }
        if !self.blowup.is_power_of_two() || self.blowup < 2 {
            return Err(StarkError::NonPowerOfTwo(self.blowup));
        }
        if self.n_queries == 0 {
            return Err(StarkError::Malformed("FRI needs at least one query".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerOpening {
    pub values: [GElement; 2],
    pub path: Vec<Digest>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FriQuery {
    pub layers: Vec<LayerOpening>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FriProof {
    pub layer_roots: Vec<Digest>,
    pub final_poly: Vec<GElement>,
    pub queries: Vec<FriQuery>,
}

const INV_TWO: GElement = GElement::new(0x7FFF_FFFF_8000_0001);

fn fold_pair(a: GElement, b: GElement, beta: GElement, inv_two_x: GElement) -> GElement {
    (a + b) * INV_TWO + beta * (a - b) * inv_two_x
}

fn fold_layer(layer: &[GElement], offset: GElement, beta: GElement) -> Vec<GElement> {
    let half = layer.len() / 2;
    let w = GElement::root_of_unity(layer.len().trailing_zeros());
    let two_x: Vec<GElement> =
        std::iter::successors(Some(offset.double()), |x| Some(*x * w)).take(half).collect();
    let inv = batch_inverse(&two_x);
    (0..half).map(|j| fold_pair(layer[j], layer[j + half], beta, inv[j])).collect()
}

fn draw_queries(transcript: &mut Transcript, n: usize, domain: usize) -> Vec<usize> {
    (0..n).map(|_| transcript.challenge_u64("fri-query") as usize % domain).collect()
}

fn absorb_final(transcript: &mut Transcript, final_poly: &[GElement]) {
    let bytes: Vec<u8> = final_poly.iter().flat_map(|c| c.to_le_bytes()).collect();
    transcript.absorb("fri-final", &bytes);
}

/// Commits to `codeword` (evaluations on `offset * <w_N>`) and answers
/// transcript-derived queries. Also returns the query indices in `[0, N)`.
pub fn fri_prove(
    codeword: &[GElement],
    offset: GElement,
    params: &FriParams,
    transcript: &mut Transcript,
) -> Result<(FriProof, Vec<usize>), StarkError> {
    params.validate()?;
    let n = params.domain_size();
    if codeword.len() != n {
        return Err(StarkError::LengthMismatch { expected: n, got: codeword.len() });
    }
    let mut layers = Vec::new();
    let mut trees = Vec::new();
    let mut roots = Vec::new();
    let mut current = codeword.to_vec();
    let mut off = offset;
    for _ in 0..params.num_layers() {
        let half = current.len() / 2;
        let tree = MerkleTree::from_rows((0..half).map(|j| [current[j], current[j + half]]));
        transcript.absorb("fri-root", &tree.root());
        let beta = draw_element(transcript, "fri-beta");
        let next = fold_layer(&current, off, beta);
        roots.push(tree.root());
        trees.push(tree);
        layers.push(std::mem::replace(&mut current, next));
        off = off.square();
    }
    let mut final_poly = interpolate_coset(&current, off)?;
    final_poly.truncate(FINAL_POLY_LEN);
    absorb_final(transcript, &final_poly);

    let indices = draw_queries(transcript, params.n_queries, n);
    let queries = indices
        .iter()
        .map(|&q| {
            let mut idx = q % (n / 2);
            let layers = layers
                .iter()
                .zip(&trees)
                .map(|(layer, tree)| {
                    let half = layer.len() / 2;
                    let p = idx % half;
                    idx = p;
                    LayerOpening { values: [layer[p], layer[p + half]], path: tree.open(p) }
                })
                .collect();
            FriQuery { layers }
        })
        .collect();
    Ok((FriProof { layer_roots: roots, final_poly, queries }, indices))
}

/// Verifies `proof` and returns, per query, the index in `[0, N)` and the
/// authenticated layer-0 value there. `None` on any failure.
pub fn fri_verify_openings(
    proof: &FriProof,
    offset: GElement,
    params: &FriParams,
    transcript: &mut Transcript,
) -> Option<Vec<(usize, GElement)>> {
    params.validate().ok()?;
    let n = params.domain_size();
    let k = params.num_layers();
    if proof.layer_roots.len() != k
        || proof.final_poly.len() > FINAL_POLY_LEN
        || proof.queries.len() != params.n_queries
        || proof.queries.iter().any(|q| q.layers.len() != k)
    {
        return None;
    }
    let betas: Vec<GElement> = proof
        .layer_roots
        .iter()
        .map(|root| {
            transcript.absorb("fri-root", root);
            draw_element(transcript, "fri-beta")
        })
        .collect();
    absorb_final(transcript, &proof.final_poly);
    let indices = draw_queries(transcript, params.n_queries, n);

    let offsets: Vec<GElement> =
        std::iter::successors(Some(offset), |o| Some(o.square())).take(k).collect();
    let roots: Vec<GElement> = (0..k)
        .map(|i| GElement::root_of_unity((n >> i).trailing_zeros()))
        .collect();

    let mut out = Vec::with_capacity(indices.len());
    for (&q, query) in indices.iter().zip(&proof.queries) {
        let mut idx = q % (n / 2);
        let mut carried: Option<GElement> = None;
        for i in 0..k {
            let half = n >> (i + 1);
            let (p, pos) = (idx % half, idx / half);
            let open = &query.layers[i];
            if !verify_path(&proof.layer_roots[i], half.trailing_zeros() as usize, p, &open.values, &open.path) {
                return None;
            }
            if let Some(expected) = carried {
                if open.values[pos] != expected {
                    return None;
                }
            }
            let x = offsets[i] * roots[i].pow(p as u64);
            carried = Some(fold_pair(open.values[0], open.values[1], betas[i], x.double().inverse()?));
            if i + 1 == k && eval_poly(&proof.final_poly, x.square()) != carried? {
                return None;
            }
            idx = p;
        }
        out.push((q, query.layers[0].values[q / (n / 2)]));
    }
    Some(out)
}

pub fn fri_verify(proof: &FriProof, offset: GElement, params: &FriParams, transcript: &mut Transcript) -> bool {
    fri_verify_openings(proof, offset, params, transcript).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stark::poly::evaluate_coset;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const G: GElement = GElement::GENERATOR;

    fn codeword(rng: &mut ChaCha8Rng, degree_bound: usize, params: &FriParams) -> Vec<GElement> {
        let coeffs: Vec<GElement> = (0..degree_bound).map(|_| GElement::new(rng.gen())).collect();
        evaluate_coset(&coeffs, G, params.domain_size()).unwrap()
    }

    fn round_trip(word: &[GElement], params: &FriParams, seed: u64) -> bool {
        let mut tp = Transcript::new("fri-test");
        tp.absorb_u64("seed", seed);
        let mut tv = tp.clone();
        let (proof, _) = fri_prove(word, G, params, &mut tp).unwrap();
        fri_verify(&proof, G, params, &mut tv)
    }

    #[test]
    fn honest_low_degree_accepted() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for max_degree in [7usize, 63, 127] {
            let params = FriParams::new(max_degree);
            let word = codeword(&mut rng, max_degree + 1, &params);
            assert!(round_trip(&word, &params, 0), "degree {max_degree}");
        }
    }

    #[test]
    fn random_codewords_rejected() {
        let params = FriParams::new(63);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let accepted = (0..100)
            .filter(|&seed| {
                let word: Vec<GElement> =
                    (0..params.domain_size()).map(|_| GElement::new(rng.gen())).collect();
                round_trip(&word, &params, seed)
            })
            .count();
        assert!(accepted <= 5, "{accepted} of 100 random codewords accepted");
    }

    #[test]
    fn degree_just_above_bound_rejected() {
        let params = FriParams::new(63);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let word = codeword(&mut rng, 128, &params);
        assert!(!round_trip(&word, &params, 0));
    }

    #[test]
    fn corrupted_opening_rejected() {
        let params = FriParams::new(63);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let word = codeword(&mut rng, 64, &params);
        let mut tp = Transcript::new("fri-test");
        let tv = tp.clone();
        let (proof, indices) = fri_prove(&word, G, &params, &mut tp).unwrap();
        for layer in 0..params.num_layers() {
            let mut bad = proof.clone();
            bad.queries[0].layers[layer].values[0] += GElement::ONE;
            assert!(!fri_verify(&bad, G, &params, &mut tv.clone()));
        }
        // A corrupted codeword position is caught when queried.
        let mut corrupted = word.clone();
        corrupted[indices[0]] += GElement::ONE;
        let mut tp2 = Transcript::new("fri-test");
        let (proof2, _) = fri_prove(&corrupted, G, &params, &mut tp2).unwrap();
        let mut tv2 = Transcript::new("fri-test");
        let verdict = fri_verify_openings(&proof2, G, &params, &mut tv2);
        assert!(verdict.is_none());
    }

    #[test]
    fn shape_checks() {
        let params = FriParams::new(63);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let word = codeword(&mut rng, 64, &params);
        let mut tp = Transcript::new("fri-test");
        let (proof, _) = fri_prove(&word, G, &params, &mut tp).unwrap();
        let mut long = proof.clone();
        long.final_poly.push(GElement::ZERO);
        assert!(!fri_verify(&long, G, &params, &mut Transcript::new("fri-test")));
        let mut short = proof.clone();
        short.queries.pop();
        assert!(!fri_verify(&short, G, &params, &mut Transcript::new("fri-test")));
        assert!(fri_verify(&proof, G, &params, &mut Transcript::new("fri-test")));
        assert!(!fri_verify(&proof, G, &params, &mut Transcript::new("other")));
        assert!(matches!(
            fri_prove(&word[..100], G, &params, &mut Transcript::new("x")),
            Err(StarkError::LengthMismatch { .. })
        ));
    }
}
