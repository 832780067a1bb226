use fgumbel::core::dist::fg_sample;
use fgumbel::core::{fit_ecm, EcmConfig, FgParams, FitResult};
use fgumbel::dataset::{elevation_change, Dataset};
use fgumbel::document::{ResultDocument, Stopwatch};

#[test]
fn result_document_round_trips() {
    let y = fg_sample(&FgParams::new(0.0, 1.0, 5.0, 0.5).unwrap(), 200, 1).unwrap();
    let fit = fit_ecm(&y, &EcmConfig::default()).unwrap();
    let doc = ResultDocument::new(
        vec!["fgumbel".into(), "fit".into()],
        &EcmConfig::default(),
        &fit,
        &Stopwatch::start(),
        Some(0),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("doc.json");
    doc.write(&path).unwrap();
    let back = ResultDocument::read(&path).unwrap();
    let again: FitResult = back.payload_as().unwrap();
    assert_eq!(again, fit);
    let mut raw: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    raw["schema_version"] = 99.into();
    std::fs::write(&path, raw.to_string()).unwrap();
    assert!(ResultDocument::read(&path).is_err());
}

#[test]
fn non_finite_values_survive_json() {
    let y = fg_sample(&FgParams::new(0.0, 1.0, 1.0, 0.5).unwrap(), 50, 2).unwrap();
    let mut fit = fit_ecm(&y, &EcmConfig::default()).unwrap();
    fit.aic = f64::INFINITY;
    fit.bic = f64::NAN;
    let doc = ResultDocument::new(vec![], &(), &fit, &Stopwatch::start(), None).unwrap();
    let text = doc.to_json().unwrap();
    assert!(text.contains("\"inf\"") && text.contains("\"NaN\""));
    let back: FitResult = serde_json::from_str::<ResultDocument>(&text).unwrap().payload_as().unwrap();
    assert_eq!(back.aic, f64::INFINITY);
    assert!(back.bic.is_nan());
}

#[test]
fn dataset_reports_bad_rows() {
    let ds = Dataset::from_reader("# comment\n a , b \n1,2\n,3\nx,4\n".as_bytes()).unwrap();
    assert_eq!(ds.headers(), ["a", "b"]);
    assert_eq!(ds.numeric_column("b").unwrap(), vec![2.0, 3.0, 4.0]);
    let err = ds.numeric_column("a").unwrap_err().to_string();
    assert!(err.contains("row 2 (missing)") && err.contains("row 3 ('x')"), "{err}");
    assert!(ds.numeric_column("c").is_err());
    assert!(ds.design("a", &["a".to_string()]).is_err());
}

#[test]
fn daily_elevation_change_sign_follows_order() {
    let text = "datetime,gage\n\
        2021-01-01 00:00,10.0\n2021-01-01 06:00,9.0\n2021-01-01 12:00,12.5\n\
        2021-01-02 00:00,5.0\n2021-01-02 06:00,7.0\n2021-01-02 12:00,4.0\n";
    let ds = Dataset::from_reader(text.as_bytes()).unwrap();
    let series = elevation_change(&ds, "datetime", "gage").unwrap();
    assert_eq!(series.len(), 2);
    // day 1: min 9.0 before max 12.5; day 2: max 7.0 before min 4.0
    assert!((series[0].change - 3.5).abs() < 1e-12);
    assert!((series[1].change + 3.0).abs() < 1e-12);
}
