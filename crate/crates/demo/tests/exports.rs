use cubiclines_demo::{hilbert_table_json, line_census_json, track_loop_json};

#[test]
fn hilbert_table_is_symmetric_with_trivial_first_row() {
    for p in [2, 3, 5, 7] {
        let t = hilbert_table_json(p).unwrap();
        let rows = t["table"].as_array().unwrap();
        assert_eq!(rows.len(), if p == 2 { 8 } else { 4 });
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(rows[0][i], 1);
            for j in 0..rows.len() {
                assert_eq!(r[j], rows[j][i]);
            }
        }
    }
    assert!(hilbert_table_json(9).is_err());
}

#[test]
fn census_of_fermat_and_shipped_form() {
    let r = line_census_json(2, 5, "x1^3 + x2^3 + x3^3 + x4^3 + x5^3").unwrap();
    assert_eq!(r["lines_scanned"], 155);
    assert_eq!(r["lines_found"], 15);
    let h = line_census_json(3, 5, "preset:H").unwrap();
    assert_eq!(h["lines_scanned"], 1210);
    assert_eq!(h["lines_found"], 0);
    assert!(line_census_json(3, 3, "x1^2").is_err());
}

#[test]
fn loop_tracking_reports_windings() {
    let r = track_loop_json("x^3 + y^3 + z^3", 500).unwrap();
    assert_eq!(r["winding"], serde_json::json!([1]));
    let r = track_loop_json("z^3 - z x^2 - z y^2 + 1/10 y^3", 500).unwrap();
    assert_eq!(r["total_multiplicity"], 3);
    assert!(!r["antipodal_witness"].is_null());
}
