//! Radix-2 NTT, coset evaluation and interpolation.

use super::field::GElement;
use super::StarkError;

fn log2_exact(n: usize) -> Result<u32, StarkError> {
    if n == 0 || !n.is_power_of_two() {
        return Err(StarkError::NonPowerOfTwo(n));
    }
    Ok(n.trailing_zeros())
}

fn bit_reverse(a: &mut [GElement]) {
    let n = a.len();
    let bits = n.trailing_zeros();
    if bits == 0 {
        return;
    }
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if i < j {
            a.swap(i, j);
        }
    }
}

fn transform(a: &mut [GElement], root: GElement) {
    let n = a.len();
    bit_reverse(a);
    let mut len = 2;
    while len <= n {
        let w_len = root.pow((n / len) as u64);
        let half = len / 2;
        let twiddles: Vec<GElement> = std::iter::successors(Some(GElement::ONE), |w| Some(*w * w_len))
            .take(half)
            .collect();
        for chunk in a.chunks_mut(len) {
            let (lo, hi) = chunk.split_at_mut(half);
            for ((u, v), w) in lo.iter_mut().zip(hi.iter_mut()).zip(&twiddles) {
                let t = *v * *w;
                *v = *u - t;
                *u += t;
            }
        }
        len <<= 1;
    }
}

/// Coefficients to evaluations at `w^i`, `w` the primitive `n`-th root.
pub fn ntt(a: &mut [GElement]) -> Result<(), StarkError> {
    let log_n = log2_exact(a.len())?;
    transform(a, GElement::root_of_unity(log_n));
    Ok(())
}

/// Evaluations at `w^i` back to coefficients.
pub fn intt(a: &mut [GElement]) -> Result<(), StarkError> {
    let log_n = log2_exact(a.len())?;
    let root = GElement::root_of_unity(log_n).inverse().expect("root is non-zero");
    transform(a, root);
    let n_inv = GElement::new(a.len() as u64).inverse().expect("n < p");
    for x in a.iter_mut() {
        *x *= n_inv;
    }
    Ok(())
}

/// Evaluates `coeffs` on the coset `offset * <w_n>`, `n >= coeffs.len()`.
pub fn evaluate_coset(coeffs: &[GElement], offset: GElement, n: usize) -> Result<Vec<GElement>, StarkError> {
    log2_exact(n)?;
    if coeffs.len() > n {
        return Err(StarkError::LengthMismatch { expected: n, got: coeffs.len() });
    }
    let mut out = vec![GElement::ZERO; n];
    let mut s = GElement::ONE;
    for (o, c) in out.iter_mut().zip(coeffs) {
        *o = *c * s;
        s *= offset;
    }
    ntt(&mut out)?;
    Ok(out)
}

/// Inverse of [`evaluate_coset`]: coefficients of the unique polynomial of
/// degree `< evals.len()` with these values on `offset * <w_n>`.
pub fn interpolate_coset(evals: &[GElement], offset: GElement) -> Result<Vec<GElement>, StarkError> {
    let mut c = evals.to_vec();
    intt(&mut c)?;
    let inv = offset.inverse().ok_or(StarkError::Malformed("zero coset offset".into()))?;
    let mut s = GElement::ONE;
    for x in c.iter_mut() {
        *x *= s;
        s *= inv;
    }
    Ok(c)
}

/// Horner evaluation.
pub fn eval_poly(coeffs: &[GElement], x: GElement) -> GElement {
    coeffs.iter().rev().fold(GElement::ZERO, |acc, c| acc * x + *c)
}

/// Low-degree extension of a column given on the subgroup of its own size
/// to the coset `GENERATOR * <w>` of size `blowup * len`.
pub fn lde(column: &[GElement], blowup: usize) -> Result<Vec<GElement>, StarkError> {
    log2_exact(blowup)?;
    let mut coeffs = column.to_vec();
    intt(&mut coeffs)?;
    evaluate_coset(&coeffs, GElement::GENERATOR, column.len() * blowup)
}

/// Points of `offset * <w_n>` in NTT order.
pub fn coset_points(offset: GElement, n: usize) -> Result<Vec<GElement>, StarkError> {
    let w = GElement::root_of_unity(log2_exact(n)?);
    Ok(std::iter::successors(Some(offset), |x| Some(*x * w)).take(n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<GElement> {
        (0..n).map(|_| GElement::new(rng.gen())).collect()
    }

    /// Lagrange interpolation through `(xs, ys)` evaluated at `at`.
    fn lagrange(xs: &[GElement], ys: &[GElement], at: GElement) -> GElement {
        let mut acc = GElement::ZERO;
        for (i, (xi, yi)) in xs.iter().zip(ys).enumerate() {
            let mut num = GElement::ONE;
            let mut den = GElement::ONE;
            for (j, xj) in xs.iter().enumerate() {
                if i != j {
                    num *= at - *xj;
                    den *= *xi - *xj;
                }
            }
            acc += *yi * num * den.inverse().unwrap();
        }
        acc
    }

    #[test]
    fn ntt_matches_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for log_n in 0..7 {
            let n = 1 << log_n;
            let coeffs = random_vec(&mut rng, n);
            let mut evals = coeffs.clone();
            ntt(&mut evals).unwrap();
            let w = GElement::root_of_unity(log_n);
            for (i, e) in evals.iter().enumerate() {
                assert_eq!(*e, eval_poly(&coeffs, w.pow(i as u64)));
            }
            intt(&mut evals).unwrap();
            assert_eq!(evals, coeffs);
        }
    }

    #[test]
    fn lde_agrees_with_lagrange() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for log_n in 0..=6 {
            let n = 1usize << log_n;
            let column = random_vec(&mut rng, n);
            let ext = lde(&column, 8).unwrap();
            let xs = coset_points(GElement::ONE, n).unwrap();
            let coset = coset_points(GElement::GENERATOR, 8 * n).unwrap();
            for i in (0..8 * n).step_by(1 + n / 4) {
                assert_eq!(ext[i], lagrange(&xs, &column, coset[i]), "n={n} i={i}");
            }
            // Any n extended points recover the column.
            let picked: Vec<usize> = (0..n).map(|k| (k * 5 + 3) % (8 * n)).collect();
            let mut distinct = picked.clone();
            distinct.sort();
            distinct.dedup();
            if distinct.len() == n {
                let px: Vec<_> = picked.iter().map(|&i| coset[i]).collect();
                let py: Vec<_> = picked.iter().map(|&i| ext[i]).collect();
                for (k, x) in xs.iter().enumerate() {
                    assert_eq!(lagrange(&px, &py, *x), column[k]);
                }
            }
        }
    }

    #[test]
    fn lde_simple_shapes() {
        let c = vec![GElement::new(42); 64];
        assert!(lde(&c, 8).unwrap().iter().all(|v| *v == GElement::new(42)));
        let identity = coset_points(GElement::ONE, 64).unwrap();
        assert_eq!(lde(&identity, 8).unwrap(), coset_points(GElement::GENERATOR, 512).unwrap());
        assert_eq!(lde(&[GElement::ONE; 3], 8), Err(StarkError::NonPowerOfTwo(3)));
        assert_eq!(lde(&[GElement::ONE; 4], 3), Err(StarkError::NonPowerOfTwo(3)));
    }

    #[test]
    fn coset_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let coeffs = random_vec(&mut rng, 16);
        let evals = evaluate_coset(&coeffs, GElement::GENERATOR, 64).unwrap();
        let back = interpolate_coset(&evals, GElement::GENERATOR).unwrap();
        assert_eq!(&back[..16], &coeffs[..]);
        assert!(back[16..].iter().all(|c| c.is_zero()));
    }
}
