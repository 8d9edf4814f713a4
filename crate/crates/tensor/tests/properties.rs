use proptest::prelude::*;
use sardiff_tensor::{conv2d_output_size, Tape, Tensor};

fn tensor(shape: Vec<usize>, seed: u64) -> Tensor<f64> {
    let mut state = seed;
    Tensor::from_fn(shape, |_| {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    })
}

proptest! {
    #[test]
    fn conv2d_is_linear_in_input(
        n in 1usize..3, c in 1usize..4, o in 1usize..4, h in 3usize..9, w in 3usize..9,
        stride in 1usize..3, pad in 0usize..2, a in -2.0f64..2.0, b in -2.0f64..2.0, seed in any::<u64>(),
    ) {
        let tape = Tape::<f64>::new();
        let x = tape.constant(tensor(vec![n, c, h, w], seed));
        let y = tape.constant(tensor(vec![n, c, h, w], seed ^ 0xabcdef));
        let k = tape.constant(tensor(vec![o, c, 3, 3], seed.rotate_left(7)));
        let combined = x.scale(a).add(&y.scale(b)).unwrap().conv2d(&k, None, stride, pad).unwrap();
        let separate = x.conv2d(&k, None, stride, pad).unwrap().scale(a)
            .add(&y.conv2d(&k, None, stride, pad).unwrap().scale(b)).unwrap();
        let (lhs, rhs) = (combined.value(), separate.value());
        let scale = rhs.max_abs().max(1e-12);
        for (l, r) in lhs.data().iter().zip(rhs.data()) {
            prop_assert!((l - r).abs() / scale <= 1e-6);
        }
    }

    #[test]
    fn conv2d_shape_contract(
        n in 1usize..3, c in 1usize..4, o in 1usize..5, h in 1usize..12, w in 1usize..12,
        k in 1usize..4, stride in 1usize..4, pad in 0usize..3,
    ) {
        let tape = Tape::<f32>::new();
        let x = tape.constant(Tensor::ones(vec![n, c, h, w]));
        let kern = tape.constant(Tensor::ones(vec![o, c, k, k]));
        let expected = conv2d_output_size(h, k, stride, pad).zip(conv2d_output_size(w, k, stride, pad));
        match (x.conv2d(&kern, None, stride, pad), expected) {
            (Ok(y), Some((oh, ow))) => {
                prop_assert_eq!(y.shape(), vec![n, o, oh, ow]);
                prop_assert_eq!(oh, (h + 2 * pad - k) / stride + 1);
            }
            (Err(_), None) => {}
            (got, want) => prop_assert!(false, "mismatch: {:?} vs {:?}", got.map(|v| v.shape()), want),
        }
    }

    #[test]
    fn elementwise_and_spatial_shapes(n in 1usize..3, c in 1usize..5, c2 in 1usize..5, h in 1usize..6, w in 1usize..6) {
        let tape = Tape::<f32>::new();
        let x = tape.constant(Tensor::ones(vec![n, c, h, w]));
        let y = tape.constant(Tensor::ones(vec![n, c2, h, w]));
        prop_assert_eq!(x.silu().shape(), vec![n, c, h, w]);
        prop_assert_eq!(x.upsample_nearest2x().unwrap().shape(), vec![n, c, 2 * h, 2 * w]);
        prop_assert_eq!(x.concat_channels(&y).unwrap().shape(), vec![n, c + c2, h, w]);
        prop_assert_eq!(x.spatial_attention(&x, &x).unwrap().shape(), vec![n, c, h, w]);
        let bias = tape.constant(Tensor::ones(vec![n, c]));
        prop_assert_eq!(x.add_channel_bias(&bias).unwrap().shape(), vec![n, c, h, w]);
        prop_assert_eq!(x.mse(&x).unwrap().shape(), vec![1]);
    }
}
