//! The schema reference stays in step with the schema definitions.

use laborflux::ingest::schema;

#[test]
fn every_schema_is_documented_with_magic_and_header() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/schemas.md");
    let doc = std::fs::read_to_string(path).unwrap();
    for s in schema::ALL {
        let block = format!("{}\n{}\n", s.magic, s.column_names().join(","));
        assert!(doc.contains(&block), "docs/schemas.md lacks\n{block}");
    }
}
