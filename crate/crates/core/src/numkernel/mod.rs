//! Dense numeric kernel: matrices, reverse-mode differentiation, the Adam
//! optimizer and the cosine / layer-norm primitives shared by every stage.

mod gradcheck;
mod graph;
mod params;
mod tensor;

pub use gradcheck::{grad_check, GRAD_CHECK_FLOOR};
pub use graph::{sigmoid, softmax_rows, Gradients, Graph, Var, LAYER_NORM_EPS};
pub use params::{Adam, Bound, ParamId, ParamStore};
pub use tensor::{dot, norm, Tensor2};

use alloc::vec::Vec;
use rand::Rng;

use crate::error::{Error, Result};

/// Matrix with entries drawn uniformly from `[-bound, bound)`.
pub fn uniform(rng: &mut impl Rng, rows: usize, cols: usize, bound: f64) -> Tensor2 {
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| if bound > 0.0 { rng.random_range(-bound..bound) } else { 0.0 })
        .collect();
    Tensor2::from_vec(rows, cols, data).expect("sized")
}

/// Cosine similarity of two equal-length, nonzero vectors.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape {
            op: "cosine_similarity",
            expected: (1, a.len()),
            found: (1, b.len()),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if !(na > 0.0) || !(nb > 0.0) {
        return Err(Error::Degenerate("cosine_similarity"));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Row-wise layer normalization (ε = [`LAYER_NORM_EPS`]) followed by the
/// affine `gain * x̂ + bias`.
pub fn layer_norm(x: &Tensor2, gain: &[f64], bias: &[f64]) -> Result<Tensor2> {
    let mut g = Graph::new();
    let xv = g.leaf(x.clone());
    let gv = g.leaf(Tensor2::row_vector(gain));
    let bv = g.leaf(Tensor2::row_vector(bias));
    let out = g.layer_norm(xv, gv, bv)?;
    Ok(g.value(out).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine_similarity(&[1.0, 1.0], &[1.0, -1.0]).unwrap(), 0.0);
        assert_eq!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::Degenerate("cosine_similarity"))
        );
        assert!(cosine_similarity(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn layer_norm_examples() {
        let x = Tensor2::from_vec(1, 3, vec![2.0, 4.0, 6.0]).unwrap();
        let y = layer_norm(&x, &[1.0; 3], &[0.0; 3]).unwrap();
        // mean 4, variance 8/3
        let expected = 2.0 / libm::sqrt(8.0 / 3.0 + 1e-5);
        assert!((y.get(0, 0) + expected).abs() < 1e-12);
        assert_eq!(y.get(0, 1), 0.0);
        assert!((y.get(0, 2) - expected).abs() < 1e-12);
        assert!((expected - 1.2247).abs() < 1e-4);

        let c = Tensor2::filled(1, 4, 3.5);
        assert_eq!(layer_norm(&c, &[1.0; 4], &[0.0; 4]).unwrap().data(), &[0.0; 4]);

        let z = layer_norm(&x, &[0.0; 3], &[0.7; 3]).unwrap();
        assert_eq!(z.data(), &[0.7; 3]);

        assert!(layer_norm(&Tensor2::zeros(2, 0), &[], &[]).is_err());
        assert!(layer_norm(&x, &[1.0; 2], &[0.0; 3]).is_err());
    }

    fn vec_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, n)
    }

    proptest! {
        #[test]
        fn cosine_symmetric_bounded(a in vec_strategy(5), b in vec_strategy(5)) {
            prop_assume!(norm(&a) > 1e-9 && norm(&b) > 1e-9);
            let ab = cosine_similarity(&a, &b).unwrap();
            let ba = cosine_similarity(&b, &a).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!((-1.0..=1.0).contains(&ab));
            prop_assert!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn layer_norm_row_stats(rows in prop::collection::vec(vec_strategy(6), 1..4)) {
            let x = Tensor2::from_rows(&rows).unwrap();
            let y = layer_norm(&x, &[1.0; 6], &[0.0; 6]).unwrap();
            for (r, src) in y.iter_rows().zip(&rows) {
                let mean: f64 = src.iter().sum::<f64>() / 6.0;
                let var: f64 = src.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 6.0;
                prop_assume!(var > 1e-2);
                let m: f64 = r.iter().sum::<f64>() / 6.0;
                let v: f64 = r.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 6.0;
                prop_assert!(m.abs() < 1e-6);
                prop_assert!((v - 1.0).abs() < 1e-3);
            }
        }

        #[test]
        fn elementwise_ops_pass_grad_check(
            a in vec_strategy(6),
            b in vec_strategy(6),
            width in prop::sample::select(vec![1usize, 3, 5]),
        ) {
            let mut s = ParamStore::new();
            let pa = s.add("a", Tensor2::from_vec(3, 2, a).unwrap().map(|v| v * 0.3));
            let pb = s.add("b", Tensor2::from_vec(2, 3, b).unwrap().map(|v| v * 0.3));
            let gain = s.add("gain", Tensor2::row_vector(&[1.1, 0.9, 1.0]));
            let bias = s.add("bias", Tensor2::row_vector(&[0.1, -0.2, 0.05]));
            let err = grad_check(&[s], 1e-5, |g, bd| {
                let (a, b) = (bd[0].var(pa), bd[0].var(pb));
                let u = g.unfold(a, width)?;
                let w = g.leaf(Tensor2::filled(2 * width, 3, 0.25));
                let conv = g.matmul(u, w)?;
                let m = g.matmul(a, b)?;
                let s1 = g.add(m, conv)?;
                let ln = g.layer_norm(s1, bd[0].var(gain), bd[0].var(bias))?;
                let t = g.tanh(ln);
                let sg = g.sigmoid(m);
                let prod = g.mul(t, sg)?;
                let cos = g.cosine(prod, b)?;
                let pooled = g.mean_rows(cos)?;
                let sc = g.scale(pooled, 2.0);
                let mse_t = g.leaf(Tensor2::filled(1, 2, 0.1));
                let mse = g.mse(sc, mse_t)?;
                let xent = g.softmax_xent(sc, &[1])?;
                let shifted = g.sub(sc, mse_t)?;
                let mae = g.mae(shifted, mse_t)?;
                let sum = g.add(mse, xent)?;
                g.add(sum, mae)
            }).unwrap();
            prop_assert!(err < 1e-4, "rel err {}", err);
        }
    }
}
