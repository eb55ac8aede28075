use spraygnn_autodiff::{read_checkpoint, write_checkpoint, Tensor, TensorError};

#[test]
fn round_trip_is_bit_exact() {
    let dir = std::env::temp_dir().join(format!("sgnn-ckpt-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("roundtrip.sgnn");

    let tensors = vec![
        ("enc.w0".to_string(), Tensor::from_vec(&[2, 3], vec![1.5, -2.25, 1e-300, 0.0, f64::MIN_POSITIVE, 3.75]).unwrap()),
        ("enc.b0".to_string(), Tensor::from_vec(&[1, 3], vec![0.1, 0.2, 0.3]).unwrap()),
        ("scalar".to_string(), Tensor::scalar(42.0)),
    ];
    write_checkpoint(&path, &tensors).unwrap();
    let back: Vec<(String, Tensor<f64>)> = read_checkpoint(&path).unwrap();
    assert_eq!(back.len(), tensors.len());
    for ((na, ta), (nb, tb)) in tensors.iter().zip(&back) {
        assert_eq!(na, nb);
        assert_eq!(ta.shape(), tb.shape());
        assert!(ta.values().iter().zip(tb.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn bad_magic_is_rejected() {
    let dir = std::env::temp_dir().join(format!("sgnn-ckpt-bad-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.sgnn");
    std::fs::write(&path, b"NOPE\x01\x00\x00\x00").unwrap();
    let err = read_checkpoint::<f64, _>(&path).unwrap_err();
    assert!(matches!(err, TensorError::Checkpoint(_)));
    std::fs::remove_dir_all(&dir).ok();
}
