use nmtune::data::format::{decode, encode, HEADER_LEN};
use nmtune::data::{read_features, write_features, FeatureFile};
use nmtune::Error;
use proptest::prelude::*;

fn feature_file() -> impl Strategy<Value = FeatureFile> {
    (0usize..12, 1usize..9, prop::option::of(1u32..6)).prop_flat_map(|(m, d, classes)| {
        let values = prop::collection::vec(any::<f32>(), m * d);
        let labels = match classes {
            Some(c) => prop::collection::vec(0..c, m).prop_map(move |l| Some((l, c))).boxed(),
            None => Just(None).boxed(),
        };
        (values, labels).prop_map(move |(v, l)| FeatureFile::new(m, d, v, l).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// Bitwise identity, NaN payloads and signed zeros included.
    #[test]
    fn round_trip_is_bitwise(file in feature_file()) {
        let bytes = encode(&file);
        prop_assert_eq!(bytes.len() as u64, file.encoded_len());
        let back = decode(&bytes).unwrap();
        let bits = |f: &FeatureFile| f.features.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&file));
        prop_assert_eq!(&back.labels, &file.labels);
        prop_assert_eq!((back.rows, back.dim, back.num_classes), (file.rows, file.dim, file.num_classes));
        prop_assert_eq!(encode(&back), bytes);
    }

    #[test]
    fn every_truncation_is_rejected(file in feature_file(), cut in any::<prop::sample::Index>()) {
        let bytes = encode(&file);
        let n = cut.index(bytes.len());
        prop_assert!(decode(&bytes[..n]).is_err());
    }
}

#[test]
fn labeled_length_arithmetic() {
    let file = FeatureFile::new(100, 8, vec![0.25; 800], Some((vec![1; 100], 3))).unwrap();
    assert_eq!(HEADER_LEN, 32);
    assert_eq!(encode(&file).len() as u64, HEADER_LEN + 100 * 8 * 4 + 100 * 4);
    let unlabeled = FeatureFile::new(100, 8, vec![0.25; 800], None).unwrap();
    assert_eq!(encode(&unlabeled).len() as u64, HEADER_LEN + 100 * 8 * 4);
}

#[test]
fn disk_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.nmft");
    let file = FeatureFile::new(3, 2, vec![1.0, -0.0, f32::MIN_POSITIVE, 4.5, 5.0, 6.0], Some((vec![0, 1, 1], 2))).unwrap();
    write_features(&path, &file).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(bytes, encode(&file));
    assert_eq!(read_features(&path).unwrap(), file);
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1, "no temp file left behind");
}

#[test]
fn corruption_cases() {
    let file = FeatureFile::new(2, 2, vec![1.0; 4], Some((vec![0, 1], 2))).unwrap();
    let good = encode(&file);

    let mut magic = good.clone();
    magic[..4].copy_from_slice(b"XXXX");
    assert!(matches!(decode(&magic), Err(Error::Format(_))));

    let mut version = good.clone();
    version[4] = 9;
    assert!(matches!(decode(&version), Err(Error::Format(_))));

    let mut flags = good.clone();
    flags[28] = 0b10;
    assert!(matches!(decode(&flags), Err(Error::Format(_))));

    let mut label = good.clone();
    let last = label.len() - 4;
    label[last..].copy_from_slice(&7u32.to_le_bytes());
    assert!(matches!(decode(&label), Err(Error::Validation(_))));

    let err = decode(&good[..good.len() - 1]).unwrap_err();
    assert!(matches!(err, Error::Length { expected, actual } if expected == good.len() as u64 && actual == good.len() as u64 - 1));

    let mut long = good;
    long.extend_from_slice(&[0; 4]);
    assert!(matches!(decode(&long), Err(Error::Format(_))));
}
