use roadcast::datahub::{
    gen_synthetic, interpolate_missing, load_graph_csv, load_speed_csv, write_graph_csv,
    write_speed_csv, Profile,
};
use roadcast::Error;

#[test]
fn synthetic_corpus_survives_a_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (field, graph) = gen_synthetic(8, 300, 17, Profile::Volatile).unwrap();
    let speeds = dir.path().join("speeds.csv");
    let edges = dir.path().join("graph.csv");
    write_speed_csv(&field, &speeds).unwrap();
    write_graph_csv(&graph, &edges).unwrap();
    assert_eq!(load_speed_csv(&speeds).unwrap(), field);
    assert_eq!(load_graph_csv(&edges).unwrap(), graph);
}

#[test]
fn gaps_are_filled_after_loading() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gappy.csv");
    std::fs::write(&path, "a,b\n10,1\n,2\n30,\n40,4\n").unwrap();
    let field = load_speed_csv(&path).unwrap();
    assert!(!field.is_clean());
    let clean = interpolate_missing(&field).unwrap();
    assert_eq!(clean.series(0), &[10.0, 20.0, 30.0, 40.0]);
    assert_eq!(clean.series(1), &[1.0, 2.0, 3.0, 4.0]);
}

#[test]
fn missing_file_reports_its_path() {
    let err = load_speed_csv("/nonexistent/speeds.csv").unwrap_err();
    match err {
        Error::Io { path, .. } => assert!(path.ends_with("speeds.csv")),
        other => panic!("unexpected {other:?}"),
    }
}
