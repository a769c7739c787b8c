//! Writes the multi-query fixture sets under `fixtures/multi/`.
//!
//! cargo run -p lift-core --example make_fixtures

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use lift_core::client::ClientConfig;
use lift_core::syntax::{format_query, write_triples};
use lift_core::workload::{disjoint_workload, execute_all};
use lift_core::{shuffle_logs, write_log, ShuffleMode, ShufflePolicy};

fn main() -> std::io::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/multi");
    let sets = [
        ("w1", 11, 4, ShuffleMode::RandomInterleave),
        ("w2", 12, 6, ShuffleMode::RandomInterleave),
        ("w3", 13, 3, ShuffleMode::RoundRobin),
    ];
    for (name, seed, n, mode) in sets {
        let dir = root.join(name);
        fs::create_dir_all(&dir)?;
        let w = disjoint_workload(seed, n);
        write_triples(
            BufWriter::new(fs::File::create(dir.join("data.store"))?),
            w.store.triples(),
        )?;
        for (i, q) in w.queries.iter().enumerate() {
            fs::write(dir.join(format!("q{i}.rq")), format_query(q))?;
        }
        let logs = execute_all(&w, &ClientConfig::default()).expect("generated queries run");
        let log = shuffle_logs(&logs, &ShufflePolicy { seed, mode });
        write_log(BufWriter::new(fs::File::create(dir.join("shuffled.log"))?), &log)?;
        println!(
            "{name}: {} queries, {} triples, {} entries",
            n,
            w.store.len(),
            log.len()
        );
    }
    Ok(())
}
