mod common;

use common::formats::{random_stream, random_weights, INSTANCES};
use evfuse::event::{parse_event_file, serialize_event_stream, EventError};
use evfuse::nn::weights::MAGIC;
use evfuse::nn::{parse_weight_file, serialize_weight_file, Backbone, BackboneSpec, WeightFile, WeightFileError};
use evfuse::Tensor;

#[test]
fn event_files_round_trip() {
    let mut rng = common::rng(21);
    for i in 0..INSTANCES {
        let stream = random_stream(&mut rng);
        let bytes = serialize_event_stream(&stream);
        let parsed = parse_event_file(&bytes).unwrap();
        assert_eq!(parsed, stream, "instance {i}");
        assert_eq!(serialize_event_stream(&parsed), bytes, "instance {i}");
    }
}

#[test]
fn weight_files_round_trip() {
    let mut rng = common::rng(22);
    for i in 0..INSTANCES {
        let file = random_weights(&mut rng);
        let bytes = serialize_weight_file(&file);
        let parsed = parse_weight_file(&bytes).unwrap();
        assert_eq!(serialize_weight_file(&parsed), bytes, "instance {i}");
        for (a, b) in parsed.entries.iter().zip(&file.entries) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.shape, b.shape);
            assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}

#[test]
fn comments_and_leading_zeros_parse_to_the_canonical_form() {
    let text = b"# made by hand\n\n3 2\n# mid\n0007,2,1,1\n7,0,0,-1\n";
    let stream = parse_event_file(text).unwrap();
    assert_eq!(serialize_event_stream(&stream), b"3 2\n7,2,1,1\n7,0,0,-1\n");
}

#[test]
fn malformed_event_files_report_their_line() {
    let cases: [(&[u8], usize); 7] = [
        (b"2 2\n0,0,0,1\r\n", 2),
        (b"2 2\n0,2,0,1\n", 2),
        (b"2 2\n5,0,0,1\n4,0,0,1\n", 3),
        (b"2 2\n0,0,0,0\n", 2),
        (b"2 2\n0, 0,0,1\n", 2),
        (b"#\n2 0\n", 2),
        (b"2 2\n+1,0,0,1\n", 2),
    ];
    for (bytes, line) in cases {
        let err = parse_event_file(bytes).unwrap_err();
        assert!(err.to_string().contains(&format!("line {line}")), "{err}");
    }
    assert_eq!(parse_event_file(b"# only a comment\n"), Err(EventError::MissingHeader));
}

#[test]
fn weight_file_rejects_damage() {
    let mut file = WeightFile::default();
    file.push("a", &Tensor::<f32>::vector(vec![1.0, -2.0]));
    let good = serialize_weight_file(&file);
    assert_eq!(&good[..8], MAGIC);
    assert_eq!(&good[29..], [0, 0, 0x80, 0x3f, 0, 0, 0, 0xc0]);

    let mut bad = good.clone();
    bad[0] = b'X';
    assert_eq!(parse_weight_file(&bad), Err(WeightFileError::BadMagic));
    assert!(matches!(parse_weight_file(&good[..good.len() - 1]), Err(WeightFileError::Truncated { .. })));
    let mut long = good.clone();
    long.push(0);
    assert_eq!(parse_weight_file(&long), Err(WeightFileError::TrailingBytes(1)));
    let mut nan = good.clone();
    nan[33..37].copy_from_slice(&f32::NAN.to_le_bytes());
    assert!(matches!(parse_weight_file(&nan), Err(WeightFileError::Entry { index: 0, .. })));

    file.push("a", &Tensor::<f32>::scalar(3.0));
    assert!(matches!(parse_weight_file(&serialize_weight_file(&file)), Err(WeightFileError::Entry { index: 1, .. })));
}

#[test]
fn backbone_weights_survive_a_file() {
    let spec = BackboneSpec::with_widths(3, [8, 16, 16]);
    let net = Backbone::<f32>::random(spec.clone(), &mut common::rng(5));
    let mut file = WeightFile::default();
    net.to_weights(&mut file);
    let parsed = parse_weight_file(&serialize_weight_file(&file)).unwrap();
    let back = Backbone::<f32>::from_weights(spec, &parsed).unwrap();
    let x = Tensor::from_fn(&[3, 32, 32], |i| (i % 7) as f32 / 7.0);
    assert_eq!(net.forward(&x).unwrap(), back.forward(&x).unwrap());
}
