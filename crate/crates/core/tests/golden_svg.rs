use std::path::Path;

use tlnas::report::{render_scatter_svg, AxesConfig, ScatterPoint};

fn three_points() -> (Vec<ScatterPoint>, AxesConfig) {
    let points = vec![
        ScatterPoint { x: 0.01, y: 90.0, color: 3.8 },
        ScatterPoint { x: 0.1, y: 80.0, color: 4.4 },
        ScatterPoint { x: 1.0, y: 60.0, color: 5.8 },
    ];
    let axes = AxesConfig {
        title: "three points".into(),
        x_label: "CV_U".into(),
        y_label: "accuracy (%)".into(),
        color_label: "log10 parameters".into(),
        log_x: true,
        ..AxesConfig::default()
    };
    (points, axes)
}

/// Regenerate with `TLNAS_BLESS=1 cargo test --test golden_svg`.
#[test]
fn three_point_scatter_matches_golden_file() {
    let (points, axes) = three_points();
    let svg = render_scatter_svg(&points, &axes);
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/scatter_three_points.svg");
    if std::env::var_os("TLNAS_BLESS").is_some() {
        std::fs::write(&path, &svg).unwrap();
    }
    let golden = std::fs::read_to_string(&path).unwrap();
    assert_eq!(svg, golden, "rendering changed; inspect and bless if intended");
}

#[test]
fn three_point_scatter_structure() {
    let (points, axes) = three_points();
    let svg = render_scatter_svg(&points, &axes);
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    assert!(svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<circle").count(), 3);
    assert!(svg.contains("<!-- skipped 0 points -->"));
    for label in ["three points", "CV_U", "accuracy (%)", "log10 parameters"] {
        assert!(svg.contains(label), "missing {label}");
    }
}
