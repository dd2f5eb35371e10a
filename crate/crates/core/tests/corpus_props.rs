//! Property tests for the corpus layer: split partitioning, the table
//! ordering invariant, and round-trip stability of the aggregated export.

use culture_probe_core::corpus::{
    aggregate, ingest, split_by_cue, write_aggregated_tsv, AssociationRecord, CorpusFormat,
    ResponsePosition,
};
use proptest::prelude::*;
use std::io::Write;

fn record(cue: String, response: String) -> AssociationRecord {
    AssociationRecord {
        cue,
        response,
        participant_id: None,
        country: None,
        native_language: None,
        position: ResponsePosition::Unknown,
    }
}

fn arb_records() -> impl Strategy<Value = Vec<AssociationRecord>> {
    let cue = prop::sample::select(vec!["sun", "moon", "tree", "Rain", "wind", "sea"]);
    let response = prop::sample::select(vec![
        "light", "Dark", "leaf", "water", "sky", "cloud", "storm", "wave", "  sand ", "GLOW",
    ]);
    prop::collection::vec((cue, response), 1..120).prop_map(|pairs| {
        pairs
            .into_iter()
            .map(|(c, r)| record(c.to_string(), r.to_string()))
            .collect()
    })
}

proptest! {
    #[test]
    fn split_partitions_for_all_seeds(cue_count in 3usize..60, seed in any::<u64>()) {
        let records: Vec<AssociationRecord> = (0..cue_count)
            .map(|i| record(format!("cue{i:03}"), "response".to_string()))
            .collect();
        let table = aggregate(&records).unwrap();
        let split = split_by_cue(&table, [0.8, 0.1, 0.1], seed).unwrap();

        let mut union: Vec<&String> = split
            .train_cues
            .iter()
            .chain(&split.valid_cues)
            .chain(&split.test_cues)
            .collect();
        union.sort();
        prop_assert_eq!(union.len(), cue_count);
        union.dedup();
        prop_assert_eq!(union.len(), cue_count, "partitions overlap");
        prop_assert!(split.train_cues.is_disjoint(&split.valid_cues));
        prop_assert!(split.train_cues.is_disjoint(&split.test_cues));
        prop_assert!(split.valid_cues.is_disjoint(&split.test_cues));
    }

    #[test]
    fn aggregation_ordering_invariant(records in arb_records()) {
        let table = aggregate(&records).unwrap();
        let mut counted = 0u64;
        for cue in table.cues().collect::<Vec<_>>() {
            let list = table.responses(cue).unwrap();
            for pair in list.windows(2) {
                let (ref r1, c1) = pair[0];
                let (ref r2, c2) = pair[1];
                prop_assert!(c1 > c2 || (c1 == c2 && r1 < r2),
                    "ordering violated for {cue}: ({r1},{c1}) before ({r2},{c2})");
            }
            let total: u64 = list.iter().map(|(_, c)| c).sum();
            prop_assert_eq!(Some(total), table.total(cue));
            counted += total;
        }
        prop_assert_eq!(counted, records.len() as u64);
    }

    #[test]
    fn export_reingest_is_identity(records in arb_records()) {
        let table = aggregate(&records).unwrap();
        let mut buffer = Vec::new();
        write_aggregated_tsv(&table, &mut buffer).unwrap();

        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(&buffer).unwrap();
        let outcome = ingest(file.path(), CorpusFormat::Aggregated).unwrap();
        prop_assert!(outcome.row_errors.is_empty());
        let round_tripped = aggregate(&outcome.records).unwrap();
        prop_assert_eq!(table, round_tripped);
    }
}
