//! Dataset CSV round trips and malformed inputs.

use ddpc::data::{collect_sequences, dataset_from_csv, dataset_to_csv, load_dataset, save_dataset, DataShape, ExcitationSpec};
use ddpc::error::Error;
use ddpc::lti::NoiseSpec;
use ddpc::plant::{build_benchmark_model, BenchmarkParams};

fn dataset(noisy: bool) -> ddpc::data::DataMatrices {
    let model = build_benchmark_model(&BenchmarkParams::default()).unwrap();
    let shape = DataShape::for_model(&model, 110, 4, 40).unwrap();
    let noise = NoiseSpec::new(1e-2, 99).unwrap();
    collect_sequences(&model, shape, &ExcitationSpec::default(), noisy.then_some(&noise), 8).unwrap()
}

#[test]
fn round_trip_is_bit_exact() {
    for noisy in [false, true] {
        let data = dataset(noisy);
        let back = dataset_from_csv(&dataset_to_csv(&data)).unwrap();
        assert_eq!(back.m(), data.m());
        assert_eq!(back.y_n(), data.y_n());
        assert_eq!(back.shape(), data.shape());
        assert_eq!(back.seed(), data.seed());
        assert_eq!(back.sigma_w(), data.sigma_w());
        assert_eq!(back.noise().map(|n| n.seed), data.noise().map(|n| n.seed));
    }
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let data = dataset(true);
    save_dataset(&data, &path).unwrap();
    assert_eq!(load_dataset(&path).unwrap().m(), data.m());
    assert!(matches!(load_dataset(&dir.path().join("missing.csv")), Err(Error::Io(_))));
}

#[test]
fn malformed_inputs_are_rejected_with_their_kind() {
    let text = dataset_to_csv(&dataset(false));
    assert!(matches!(dataset_from_csv(""), Err(Error::Parse { .. })));
    assert!(matches!(dataset_from_csv(&text.replacen("#shape 110", "#shape x", 1)), Err(Error::Parse { .. })));

    // Drop Y_L; X1 is optional and may go too.
    let cut = text.find("#block Y_L").unwrap();
    let missing = dataset_from_csv(&text[..cut]);
    assert!(matches!(missing, Err(Error::MissingBlock(_))), "{missing:?}");
    let cut = text.find("#block X1").unwrap();
    assert!(dataset_from_csv(&text[..cut]).unwrap().x1().is_none());

    // One row of the first block loses a value.
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let row = lines.iter().position(|l| l.starts_with("#block")).unwrap() + 1;
    let trimmed = lines[row].rsplit_once(',').unwrap().0.to_string();
    lines[row] = trimmed;
    let short = dataset_from_csv(&lines.join("\n"));
    assert!(matches!(short, Err(Error::ShapeMismatch { .. }) | Err(Error::Parse { .. })), "{short:?}");
}
