use spraygnn_autodiff::{Tape, Tensor, TensorError};

#[test]
fn segment_sum_by_hand() {
    let mut tape = Tape::new();
    let x = tape.input(&Tensor::from_vec(&[3, 1], vec![1.0, 2.0, 3.0]).unwrap());
    let s = tape.segment_sum(x, &[0, 0, 1], 2).unwrap();
    assert_eq!(tape.values(s).unwrap(), &[3.0, 3.0]);
    assert_eq!(tape.shape(s).unwrap(), &[2, 1]);
}

#[test]
fn segment_sum_rejects_out_of_range_ids() {
    let mut tape = Tape::new();
    let x = tape.input(&Tensor::from_vec(&[2, 1], vec![1.0, 2.0]).unwrap());
    let err = tape.segment_sum(x, &[0, 2], 2).unwrap_err();
    assert!(matches!(err, TensorError::SegmentOutOfRange { segment: 2, num_segments: 2 }));
}

#[test]
fn relu_values() {
    let mut tape = Tape::new();
    let x = tape.input(&Tensor::from_vec(&[3], vec![-2.0, 0.0, 2.0]).unwrap());
    let r = tape.relu(x).unwrap();
    assert_eq!(tape.values(r).unwrap(), &[0.0, 0.0, 2.0]);
}

#[test]
fn matmul_rejects_mismatched_inner_dims() {
    let mut tape = Tape::<f64>::new();
    let a = tape.input(&Tensor::zeros(&[2, 3]));
    let b = tape.input(&Tensor::zeros(&[4, 2]));
    assert!(matches!(tape.matmul(a, b), Err(TensorError::ShapeMismatch { .. })));
}

#[test]
fn matmul_handles_zero_rows() {
    let mut tape = Tape::<f64>::new();
    let a = tape.input(&Tensor::zeros(&[0, 3]));
    let b = tape.input(&Tensor::zeros(&[3, 4]));
    let c = tape.matmul(a, b).unwrap();
    assert_eq!(tape.shape(c).unwrap(), &[0, 4]);
}

#[test]
fn sum_of_squares_gradient_is_two_x() {
    let mut tape = Tape::new();
    let x = tape.input(&Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap());
    let q = tape.square(x).unwrap();
    let mean = tape.reduce_mean(q).unwrap();
    // loss = (x₁² + x₂²)/2 scaled by 2 gives Σx².
    let loss = tape.scale(mean, 2.0).unwrap();
    assert_eq!(tape.values(loss).unwrap(), &[5.0]);
    let grads = tape.backward(loss).unwrap();
    assert_eq!(grads.get(x).unwrap(), &[2.0, 4.0]);
}

#[test]
fn relu_blocks_gradient_at_negative_preactivation() {
    let mut tape = Tape::new();
    let x = tape.input(&Tensor::from_vec(&[2], vec![-1.0, 1.0]).unwrap());
    let r = tape.relu(x).unwrap();
    let q = tape.square(r).unwrap();
    let mean = tape.reduce_mean(q).unwrap();
    let grads = tape.backward(mean).unwrap();
    assert_eq!(grads.get(x).unwrap(), &[0.0, 1.0]);
}

#[test]
fn backward_requires_scalar_loss() {
    let mut tape = Tape::new();
    let x = tape.input(&Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap());
    assert!(matches!(tape.backward(x), Err(TensorError::NotScalar { len: 2 })));
}

#[test]
fn foreign_variables_are_rejected() {
    let mut a = Tape::new();
    let mut b = Tape::new();
    let x = a.input(&Tensor::scalar(1.0));
    let y = b.input(&Tensor::scalar(2.0));
    assert!(matches!(a.add(x, y), Err(TensorError::DetachedTensor)));
    assert!(matches!(b.values(x), Err(TensorError::DetachedTensor)));
}

#[test]
fn concat_and_gather_shapes() {
    let mut tape = Tape::new();
    let a = tape.input(&Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
    let b = tape.input(&Tensor::from_vec(&[2, 1], vec![5.0, 6.0]).unwrap());
    let c = tape.concat_cols(&[a, b]).unwrap();
    assert_eq!(tape.values(c).unwrap(), &[1.0, 2.0, 5.0, 3.0, 4.0, 6.0]);
    let g = tape.gather_rows(c, &[1, 1, 0]).unwrap();
    assert_eq!(tape.shape(g).unwrap(), &[3, 3]);
    assert_eq!(tape.values(g).unwrap()[0..3], [3.0, 4.0, 6.0]);
}
