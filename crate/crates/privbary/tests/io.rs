use privbary::io::{parse_measure_csv, read_json, read_region, write_json, write_measure_csv, CountsFile, Stamped};
use privbary_core::coreset::{build_coreset, CoresetConfig};
use privbary_core::rng::rng_from_seed;
use privbary_core::synth::uniform_ball;
use privbary_core::DiscreteMeasure;
use rand::Rng;

#[test]
fn headerless_rows_are_uniform() {
    let ing = parse_measure_csv("0,0\n1,0\n".as_bytes()).unwrap();
    assert_eq!(ing.measure, DiscreteMeasure::uniform(2, vec![0.0, 0.0, 1.0, 0.0]).unwrap());
    assert!(ing.warnings.is_empty());
}

#[test]
fn explicit_weights_are_preserved() {
    let ing = parse_measure_csv("x1,weight\n0.1,0.25\n-0.2,0.75\n".as_bytes()).unwrap();
    assert_eq!(ing.measure.weights(), &[0.25, 0.75]);
    assert_eq!(ing.measure.coords(), &[0.1, -0.2]);
}

#[test]
fn unnormalized_weights_warn_and_renormalize() {
    let ing = parse_measure_csv("x1,weight\n0,1\n1,3\n".as_bytes()).unwrap();
    assert_eq!(ing.measure.weights(), &[0.25, 0.75]);
    assert_eq!(ing.warnings.len(), 1);
    let close = parse_measure_csv("x1,weight\n0,0.2500000001\n1,0.75\n".as_bytes()).unwrap();
    assert!(close.warnings.is_empty());
}

#[test]
fn malformed_files_are_rejected() {
    for bad in ["0,0\n1\n", "0,nan\n", "0,inf\n", "", "x1,x2\n", "x1,y\n0,0\n", "0,abc\n"] {
        assert!(parse_measure_csv(bad.as_bytes()).is_err(), "{bad:?}");
    }
}

#[test]
fn comment_lines_are_skipped() {
    let ing = parse_measure_csv("# seed 4\nx1,x2\n0.5,0\n".as_bytes()).unwrap();
    assert_eq!(ing.measure.len(), 1);
}

#[test]
fn thousand_points_round_trip_bit_exactly() {
    let mut rng = rng_from_seed(9);
    let n = 1000;
    let coords: Vec<f64> = (0..3 * n).map(|_| rng.random_range(-0.5..0.5)).collect();
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mu = DiscreteMeasure::new(3, coords, raw.iter().map(|w| w / total).collect()).unwrap();
    let mut buf = Vec::new();
    write_measure_csv(&mu, &["provenance".into()], &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("# provenance\nx1,x2,x3,weight\n"));
    let back = parse_measure_csv(buf.as_slice()).unwrap();
    assert_eq!(back.measure.coords(), mu.coords());
    assert_eq!(back.measure.weights(), mu.weights());
}

#[test]
fn region_file_is_a_list_of_rings() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("region.json");
    std::fs::write(&path, "[[[0,0],[1,0],[1,1],[0,1]], [[0.25,0.25],[0.75,0.25],[0.75,0.75],[0.25,0.75],[0.25,0.25]]]").unwrap();
    let r = read_region(&path).unwrap();
    assert_eq!(r.rings().len(), 2);
    assert!(r.contains([0.1, 0.1]));
    assert!(!r.contains([0.5, 0.5]));
    std::fs::write(&path, "[[[0,0],[1,0]]]").unwrap();
    assert!(read_region(&path).is_err());
}

#[test]
fn counts_json_omits_true_counts_and_is_stamped() {
    let mu = uniform_ball(100, 2, 0.5, &mut rng_from_seed(3)).unwrap();
    let core = build_coreset(&mu, &CoresetConfig::new(1.0, 3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("counts.json");
    write_json(&Stamped::new(3, CountsFile { counts: core.counts.clone() }), &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(!text.contains("true_counts"));
    assert!(text.contains("\"version\"") && text.contains("\"seed\": 3"));
    let back: Stamped<CountsFile> = read_json(&path).unwrap();
    assert_eq!(back.body.counts.leaves(), core.counts.leaves());
}
