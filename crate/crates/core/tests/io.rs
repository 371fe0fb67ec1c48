mod common;

use common::corpus_file;
use relu_pwa::{load_network, parse_network, save_network, to_canonical_json, Error};

#[test]
fn corpus_files_are_canonical() {
    let dir = corpus_file("");
    let mut count = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "json") {
            continue;
        }
        let text = std::fs::read_to_string(&path).unwrap();
        let net = load_network(&path).unwrap();
        assert_eq!(to_canonical_json(&net), text, "{}", path.display());
        count += 1;
    }
    assert!(count >= 9);
}

#[test]
fn save_then_load_is_bit_exact() {
    let net = load_network(corpus_file("normalized_l5.json")).unwrap();
    let dir = tempdir();
    let path = dir.join("copy.json");
    save_network(&net, &path).unwrap();
    let again = load_network(&path).unwrap();
    assert_eq!(again, net);
    assert_eq!(
        std::fs::read_to_string(&path).unwrap(),
        to_canonical_json(&net)
    );
    std::fs::remove_dir_all(dir).unwrap();
}

fn tempdir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("relu-pwa-io-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn errors_name_the_offending_layer() {
    let bad_bias = r#"{"layers": [
        {"weights": [[1, 0], [0, 1]], "bias": [0, 0]},
        {"weights": [[1, 1]], "bias": [0, 0]}
    ]}"#;
    match parse_network(bad_bias) {
        Err(Error::Shape(m)) => assert!(m.contains("layer 2") && m.contains("expected 1"), "{m}"),
        other => panic!("{other:?}"),
    }
    let missing = load_network(corpus_file("no_such_file.json"));
    assert!(matches!(missing, Err(Error::Io(_))));
}
