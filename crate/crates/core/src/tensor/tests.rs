//! Hand-computed forward values and gradient wiring checks for the tape.
//! Exhaustive derivative verification lives in the finite-difference
//! integration tests; these pin down small closed-form cases.

use super::*;

fn tensor(tape: &Tape, shape: &[usize], data: &[f64]) -> Tensor {
    tape.constant(shape, data.to_vec()).unwrap()
}

#[test]
fn constant_rejects_bad_inputs() {
    let tape = Tape::new();
    assert!(tape.constant(&[2, 2], vec![1.0, 2.0]).is_err());
    assert!(tape.constant(&[0], vec![]).is_err());
    assert!(tape.constant(&[1], vec![f64::NAN]).is_err());
    assert!(tape.constant(&[1], vec![f64::INFINITY]).is_err());
}

#[test]
fn elementwise_forward_values() {
    let tape = Tape::new();
    let x = tensor(&tape, &[3], &[-1.0, 0.0, 2.0]);
    assert_eq!(x.relu().unwrap().data(), &[0.0, 0.0, 2.0]);
    assert_eq!(x.abs().unwrap().data(), &[1.0, 0.0, 2.0]);
    assert_eq!(x.neg().unwrap().data(), &[1.0, 0.0, -2.0]);
    assert_eq!(x.tanh().unwrap().data()[1], 0.0);
    assert_eq!(x.exp().unwrap().data()[1], 1.0);
    let y = tensor(&tape, &[3], &[2.0, 3.0, 4.0]);
    assert_eq!(x.add(&y).unwrap().data(), &[1.0, 3.0, 6.0]);
    assert_eq!(x.sub(&y).unwrap().data(), &[-3.0, -3.0, -2.0]);
    assert_eq!(x.mul(&y).unwrap().data(), &[-2.0, 0.0, 8.0]);
    assert_eq!(x.scale(2.0).unwrap().data(), &[-2.0, 0.0, 4.0]);
    assert_eq!(x.add_scalar(1.0).unwrap().data(), &[0.0, 1.0, 3.0]);
}

#[test]
fn shape_mismatch_is_reported() {
    let tape = Tape::new();
    let a = tensor(&tape, &[2], &[1.0, 2.0]);
    let b = tensor(&tape, &[3], &[1.0, 2.0, 3.0]);
    match a.add(&b) {
        Err(MilError::ShapeMismatch { op, lhs, rhs }) => {
            assert_eq!(op, "add");
            assert_eq!(lhs, vec![2]);
            assert_eq!(rhs, vec![3]);
        }
        other => panic!("expected shape mismatch, got {other:?}"),
    }
}

#[test]
fn matmul_identity_and_hand_case() {
    let tape = Tape::new();
    let eye = tensor(&tape, &[2, 2], &[1.0, 0.0, 0.0, 1.0]);
    let v = tensor(&tape, &[2, 1], &[3.0, 4.0]);
    assert_eq!(eye.matmul(&v).unwrap().data(), &[3.0, 4.0]);

    let a = tensor(&tape, &[1, 2], &[1.0, 2.0]);
    let b = tensor(&tape, &[2, 1], &[3.0, 4.0]);
    assert_eq!(a.matmul(&b).unwrap().data(), &[11.0]);

    // [2,3] x [3,2] hand case.
    let a = tensor(&tape, &[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    let b = tensor(&tape, &[3, 2], &[7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
    assert_eq!(a.matmul(&b).unwrap().data(), &[58.0, 64.0, 139.0, 154.0]);

    assert!(a.matmul(&a).is_err());
}

#[test]
fn transpose_round_trip() {
    let tape = Tape::new();
    let a = tensor(&tape, &[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    let t = a.transpose().unwrap();
    assert_eq!(t.shape(), &[3, 2]);
    assert_eq!(t.data(), &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
    assert_eq!(t.transpose().unwrap().data(), a.data());
}

#[test]
fn softmax_rows_values() {
    let tape = Tape::new();
    let x = tensor(&tape, &[2, 3], &[0.0, 0.0, 0.0, 1000.0, 0.0, 0.0]);
    let y = x.softmax_rows().unwrap();
    let d = y.data();
    for v in &d[..3] {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
    // Large logits must not overflow thanks to max subtraction.
    assert_eq!(&d[3..], &[1.0, 0.0, 0.0]);
}

#[test]
fn softmax_rows_shift_invariance() {
    let tape = Tape::new();
    let x = tensor(&tape, &[1, 3], &[0.1, -2.0, 1.5]);
    let y1 = x.softmax_rows().unwrap();
    let y2 = x.add_scalar(123.0).unwrap().softmax_rows().unwrap();
    for (a, b) in y1.data().iter().zip(y2.data()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn pairwise_distance_hand_cases() {
    let tape = Tape::new();
    let a = tensor(&tape, &[1, 2], &[0.0, 0.0]);
    let b = tensor(&tape, &[2, 2], &[3.0, 4.0, 1.0, -1.0]);
    let l2 = a.pairwise_distances(&b, Norm::L2Sq).unwrap();
    assert_eq!(l2.data(), &[25.0, 2.0]);
    let l1 = a.pairwise_distances(&b, Norm::L1).unwrap();
    assert_eq!(l1.data(), &[7.0, 2.0]);
}

#[test]
fn sum_and_sum_rows() {
    let tape = Tape::new();
    let x = tensor(&tape, &[2, 2], &[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(x.sum().unwrap().item().unwrap(), 10.0);
    let rows = x.sum_rows().unwrap();
    assert_eq!(rows.shape(), &[2, 1]);
    assert_eq!(rows.data(), &[3.0, 7.0]);
}

#[test]
fn broadcast_adds() {
    let tape = Tape::new();
    let x = tensor(&tape, &[2, 2], &[1.0, 2.0, 3.0, 4.0]);
    let row = tensor(&tape, &[1, 2], &[10.0, 20.0]);
    assert_eq!(
        x.add_row_broadcast(&row).unwrap().data(),
        &[11.0, 22.0, 13.0, 24.0]
    );
    let col = tensor(&tape, &[2, 1], &[10.0, 20.0]);
    assert_eq!(
        x.add_col_broadcast(&col).unwrap().data(),
        &[11.0, 12.0, 23.0, 24.0]
    );
}

#[test]
fn backward_sum_gives_ones() {
    let tape = Tape::new();
    let x = tensor(&tape, &[3], &[1.0, 1.0, 1.0]);
    let loss = x.sum().unwrap();
    tape.backward(&loss).unwrap();
    assert_eq!(x.grad().unwrap(), vec![1.0, 1.0, 1.0]);
}

#[test]
fn backward_square_doubles() {
    let tape = Tape::new();
    let x = tensor(&tape, &[2], &[1.0, 2.0]);
    let loss = x.mul(&x).unwrap().sum().unwrap();
    tape.backward(&loss).unwrap();
    // d/dx sum(x*x) = 2x; the two uses of x must both contribute.
    assert_eq!(x.grad().unwrap(), vec![2.0, 4.0]);
}

#[test]
fn backward_reused_intermediate_sums_contributions() {
    let tape = Tape::new();
    let x = tensor(&tape, &[1], &[3.0]);
    let y = x.scale(2.0).unwrap(); // y = 2x
    let loss = y.add(&y).unwrap().sum().unwrap(); // loss = 4x
    tape.backward(&loss).unwrap();
    assert_eq!(x.grad().unwrap(), vec![4.0]);
}

#[test]
fn backward_requires_scalar_loss() {
    let tape = Tape::new();
    let x = tensor(&tape, &[2], &[1.0, 2.0]);
    assert!(tape.backward(&x).is_err());
}

#[test]
fn backward_matmul_hand_gradient() {
    let tape = Tape::new();
    let a = tensor(&tape, &[1, 2], &[1.0, 2.0]);
    let b = tensor(&tape, &[2, 1], &[3.0, 4.0]);
    let loss = a.matmul(&b).unwrap().sum().unwrap();
    tape.backward(&loss).unwrap();
    assert_eq!(a.grad().unwrap(), vec![3.0, 4.0]);
    assert_eq!(b.grad().unwrap(), vec![1.0, 2.0]);
}

#[test]
fn clamp_blocks_gradient_outside_interval() {
    let tape = Tape::new();
    let x = tensor(&tape, &[3], &[-1.0, 0.5, 2.0]);
    let loss = x.clamp(0.0, 1.0).unwrap().sum().unwrap();
    tape.backward(&loss).unwrap();
    assert_eq!(x.grad().unwrap(), vec![0.0, 1.0, 0.0]);
}

#[test]
fn pow_scalar_exp_matches_fixed_power() {
    let tape = Tape::new();
    let x = tensor(&tape, &[3], &[0.0, 1.0, 4.0]);
    let alpha = tape.scalar(0.5).unwrap();
    let y = x.pow_scalar_exp(&alpha).unwrap();
    assert_eq!(y.data(), &[0.0, 1.0, 2.0]);
    assert_eq!(x.powf(0.5).unwrap().data(), y.data());

    let neg = tensor(&tape, &[1], &[-1.0]);
    assert!(neg.pow_scalar_exp(&alpha).is_err());
}

#[test]
fn mul_scalar_tensor_gradients() {
    let tape = Tape::new();
    let x = tensor(&tape, &[2], &[3.0, 5.0]);
    let s = tape.scalar(2.0).unwrap();
    let loss = x.mul_scalar_tensor(&s).unwrap().sum().unwrap();
    tape.backward(&loss).unwrap();
    assert_eq!(x.grad().unwrap(), vec![2.0, 2.0]);
    assert_eq!(s.grad().unwrap(), vec![8.0]);
}

#[test]
fn conv2d_ones_kernel_hand_case() {
    let tape = Tape::new();
    // 3x3 image of ones, 2x2 ones kernel, stride 1 -> 2x2 of 4s.
    let x = tensor(&tape, &[1, 1, 3, 3], &[1.0; 9]);
    let w = tensor(&tape, &[1, 1, 2, 2], &[1.0; 4]);
    let b = tensor(&tape, &[1], &[0.0]);
    let y = conv2d(&x, &w, &b, 1).unwrap();
    assert_eq!(y.shape(), &[1, 1, 2, 2]);
    assert_eq!(y.data(), &[4.0; 4]);

    let loss = y.sum().unwrap();
    tape.backward(&loss).unwrap();
    // Centre pixel participates in all four windows, corners in one.
    let gx = x.grad().unwrap();
    assert_eq!(
        gx,
        vec![1.0, 2.0, 1.0, 2.0, 4.0, 2.0, 1.0, 2.0, 1.0]
    );
    assert_eq!(w.grad().unwrap(), vec![4.0; 4]);
    assert_eq!(b.grad().unwrap(), vec![4.0]);
}

#[test]
fn conv2d_bias_and_stride() {
    let tape = Tape::new();
    let x = tensor(
        &tape,
        &[1, 1, 3, 3],
        &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0],
    );
    let w = tensor(&tape, &[1, 1, 1, 1], &[2.0]);
    let b = tensor(&tape, &[1], &[10.0]);
    let y = conv2d(&x, &w, &b, 2).unwrap();
    assert_eq!(y.shape(), &[1, 1, 2, 2]);
    assert_eq!(y.data(), &[12.0, 16.0, 24.0, 28.0]);
}

#[test]
fn conv2d_rejects_oversized_kernel_and_zero_stride() {
    let tape = Tape::new();
    let x = tensor(&tape, &[1, 1, 2, 2], &[1.0; 4]);
    let w = tensor(&tape, &[1, 1, 3, 3], &[1.0; 9]);
    let b = tensor(&tape, &[1], &[0.0]);
    assert!(conv2d(&x, &w, &b, 1).is_err());
    let w1 = tensor(&tape, &[1, 1, 1, 1], &[1.0]);
    assert!(conv2d(&x, &w1, &b, 0).is_err());
}

#[test]
fn maxpool2d_hand_case() {
    let tape = Tape::new();
    let x = tensor(
        &tape,
        &[1, 1, 4, 2],
        &[1.0, 5.0, 2.0, 3.0, -1.0, 0.0, 7.0, 4.0],
    );
    let y = maxpool2d(&x, 2).unwrap();
    assert_eq!(y.shape(), &[1, 1, 2, 1]);
    assert_eq!(y.data(), &[5.0, 7.0]);
    let loss = y.sum().unwrap();
    tape.backward(&loss).unwrap();
    assert_eq!(
        x.grad().unwrap(),
        vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]
    );
}

#[test]
fn reshape_preserves_data_and_gradient() {
    let tape = Tape::new();
    let x = tensor(&tape, &[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    let y = x.reshape(&[3, 2]).unwrap();
    assert_eq!(y.shape(), &[3, 2]);
    assert_eq!(y.data(), x.data());
    assert!(x.reshape(&[4]).is_err());
    let loss = y.sum().unwrap();
    tape.backward(&loss).unwrap();
    assert_eq!(x.grad().unwrap(), vec![1.0; 6]);
}

#[test]
fn param_set_round_trip() {
    let mut params = ParamSet::new();
    let id = params.add("w", &[2], vec![1.0, 2.0]).unwrap();
    assert!(params.add("w", &[1], vec![0.0]).is_err());
    assert!(params.add("bad", &[3], vec![0.0]).is_err());

    let tape = Tape::new();
    let w = tape.leaf(&params, id);
    let loss = w.mul(&w).unwrap().sum().unwrap();
    tape.backward(&loss).unwrap();
    tape.accumulate_grads(&mut params);
    assert_eq!(params.get(id).grad, vec![2.0, 4.0]);
    // Accumulation sums across calls until zero_grad.
    tape.accumulate_grads(&mut params);
    assert_eq!(params.get(id).grad, vec![4.0, 8.0]);
    params.zero_grad();
    assert_eq!(params.get(id).grad, vec![0.0, 0.0]);

    let snap = params.snapshot();
    params.get_mut(id).value[0] = 99.0;
    params.restore(&snap);
    assert_eq!(params.get(id).value, vec![1.0, 2.0]);
}
