use olps::market::{load_price_relatives, synthetic_iid, FileFormat};
use olps::OlpsError;

#[test]
fn saved_market_loads_back() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("market.csv");
    let seq = synthetic_iid(4, 25, 3, 0.5, 1.5).unwrap();
    seq.save_csv(&path).unwrap();
    let back = load_price_relatives(&path, FileFormat::Relatives, false).unwrap();
    assert_eq!(back, seq);
}

#[test]
fn named_prices_load_as_relatives() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("prices.csv");
    std::fs::write(&path, "a,b\n1,4\n2,2\n3,1\n").unwrap();
    let seq = load_price_relatives(&path, FileFormat::Prices, true).unwrap();
    assert_eq!(seq.asset_names().unwrap(), ["a".to_string(), "b".to_string()]);
    assert_eq!(seq.row(0), [2.0, 0.5]);
    assert_eq!(seq.row(1), [1.5, 0.5]);
    let out = dir.path().join("again.csv");
    seq.save_csv(&out).unwrap();
    let again = load_price_relatives(&out, FileFormat::Relatives, true).unwrap();
    assert_eq!(again, seq);
}

#[test]
fn load_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.csv");
    assert!(matches!(
        load_price_relatives(&missing, FileFormat::Relatives, false),
        Err(OlpsError::Io(_))
    ));
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1,1\n1,-2\n").unwrap();
    assert!(matches!(
        load_price_relatives(&bad, FileFormat::Relatives, false),
        Err(OlpsError::Parse { row: 2, column: 2, .. })
    ));
}
